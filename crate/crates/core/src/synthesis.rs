//! Beam-steering phase synthesis with feed compensation.
//!
//! Elements sit on a centered rectangular grid in the z = 0 plane; the
//! column index runs along x and the row index along y. A profile phase is
//! the reflection phase each cell must add so that the feed's field leaves
//! the surface as a plane wave toward (theta, phi). Phases are referenced
//! to the array's geometric center.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::angle::wrap_deg;
use crate::circuit::SPEED_OF_LIGHT;
use crate::error::{Result, RisError};

pub type Vec3 = [f64; 3];

/// Free-space wavenumber in rad/m.
pub fn wavenumber(frequency: f64) -> f64 {
    2.0 * std::f64::consts::PI * frequency / SPEED_OF_LIGHT
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayLayout {
    pub rows: usize,
    pub cols: usize,
    pub pitch: f64,
}

impl Default for ArrayLayout {
    /// The 10 x 10 prototype with 13.5 mm cells.
    fn default() -> Self {
        Self {
            rows: 10,
            cols: 10,
            pitch: 13.5e-3,
        }
    }
}

impl ArrayLayout {
    pub fn new(rows: usize, cols: usize, pitch: f64) -> Result<Self> {
        let layout = Self { rows, cols, pitch };
        layout.validate()?;
        Ok(layout)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(RisError::Validation(format!(
                "layout needs at least one row and column, got {}x{}",
                self.rows, self.cols
            )));
        }
        if !(self.pitch > 0.0 && self.pitch.is_finite()) {
            return Err(RisError::Validation(format!(
                "layout pitch must be > 0, got {}",
                self.pitch
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn check_index(&self, row: usize, col: usize) -> Result<()> {
        if row < self.rows && col < self.cols {
            Ok(())
        } else {
            Err(RisError::IndexOutOfBounds {
                row,
                col,
                rows: self.rows,
                cols: self.cols,
            })
        }
    }

    pub fn element_position(&self, row: usize, col: usize) -> Result<Vec3> {
        self.check_index(row, col)?;
        Ok(self.position(row, col))
    }

    pub(crate) fn position(&self, row: usize, col: usize) -> Vec3 {
        let x = (col as f64 - (self.cols as f64 - 1.0) / 2.0) * self.pitch;
        let y = (row as f64 - (self.rows as f64 - 1.0) / 2.0) * self.pitch;
        [x, y, 0.0]
    }

    /// Row-major iterator over `(row, col)`.
    pub fn indices(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.rows).flat_map(move |r| (0..self.cols).map(move |c| (r, c)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaveModel {
    Spherical,
    Plane,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeedSpec {
    pub position: Vec3,
    pub wave_model: WaveModel,
    /// Propagation direction of the incident plane wave; plane mode only.
    pub plane_incidence_direction: Vec3,
}

impl Default for FeedSpec {
    /// Horn on boresight, 450 mm from the array center.
    fn default() -> Self {
        Self {
            position: [0.0, 0.0, 0.45],
            wave_model: WaveModel::Spherical,
            plane_incidence_direction: [0.0, 0.0, -1.0],
        }
    }
}

impl FeedSpec {
    pub fn spherical(position: Vec3) -> Result<Self> {
        let feed = Self {
            position,
            wave_model: WaveModel::Spherical,
            plane_incidence_direction: [0.0, 0.0, -1.0],
        };
        feed.validate()?;
        Ok(feed)
    }

    /// Plane wave travelling along `direction` (normalized here).
    pub fn plane(direction: Vec3) -> Result<Self> {
        let n = norm(direction);
        if !(n > 0.0 && n.is_finite()) {
            return Err(RisError::Validation(
                "plane incidence direction must be a non-zero vector".into(),
            ));
        }
        let feed = Self {
            position: [0.0, 0.0, 0.0],
            wave_model: WaveModel::Plane,
            plane_incidence_direction: direction.map(|c| c / n),
        };
        feed.validate()?;
        Ok(feed)
    }

    pub fn normal_incidence() -> Self {
        Self::plane([0.0, 0.0, -1.0]).expect("unit vector")
    }

    pub fn validate(&self) -> Result<()> {
        match self.wave_model {
            WaveModel::Spherical => {
                if !(self.position[2] > 0.0) || self.position.iter().any(|c| !c.is_finite()) {
                    return Err(RisError::Validation(format!(
                        "spherical feed must sit in front of the surface (z > 0), got {:?}",
                        self.position
                    )));
                }
            }
            WaveModel::Plane => {
                let n = norm(self.plane_incidence_direction);
                if (n - 1.0).abs() > 1e-12 {
                    return Err(RisError::Validation(format!(
                        "plane incidence direction must be unit length, |d| = {n}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Unwrapped incident phase in radians at a point on the surface.
    pub(crate) fn phase_at(&self, k0: f64, p: Vec3) -> f64 {
        match self.wave_model {
            WaveModel::Spherical => -k0 * distance(self.position, p),
            WaveModel::Plane => -k0 * dot(self.plane_incidence_direction, p),
        }
    }

    /// Complex illumination (amplitude and phase) at a point on the surface.
    /// Spherical feeds carry a 1/r taper, plane waves are uniform.
    pub(crate) fn illumination(&self, k0: f64, p: Vec3) -> num_complex::Complex64 {
        let phase = self.phase_at(k0, p);
        let amplitude = match self.wave_model {
            WaveModel::Spherical => 1.0 / distance(self.position, p),
            WaveModel::Plane => 1.0,
        };
        num_complex::Complex64::from_polar(amplitude, phase)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamSpec {
    pub theta_deg: f64,
    pub phi_deg: f64,
    pub frequency: f64,
}

impl BeamSpec {
    pub fn new(theta_deg: f64, phi_deg: f64, frequency: f64) -> Result<Self> {
        let beam = Self {
            theta_deg,
            phi_deg,
            frequency,
        };
        beam.validate()?;
        Ok(beam)
    }

    pub fn validate(&self) -> Result<()> {
        if !(-90.0..=90.0).contains(&self.theta_deg) {
            return Err(RisError::Range {
                what: "theta_deg",
                value: self.theta_deg,
                min: -90.0,
                max: 90.0,
            });
        }
        if !(0.0..360.0).contains(&self.phi_deg) {
            return Err(RisError::Range {
                what: "phi_deg",
                value: self.phi_deg,
                min: 0.0,
                max: 360.0,
            });
        }
        if !(self.frequency > 0.0 && self.frequency.is_finite()) {
            return Err(RisError::Domain {
                what: "frequency",
                requirement: "positive",
                value: self.frequency,
            });
        }
        Ok(())
    }

    /// Direction cosines (u, v) of the beam.
    fn direction_cosines(&self) -> (f64, f64) {
        let t = self.theta_deg.to_radians();
        let p = self.phi_deg.to_radians();
        (t.sin() * p.cos(), t.sin() * p.sin())
    }
}

/// Incident feed phase at an element, wrapped degrees.
pub fn incident_phase(
    element: (usize, usize),
    feed: &FeedSpec,
    layout: &ArrayLayout,
    frequency: f64,
) -> Result<f64> {
    let p = layout.element_position(element.0, element.1)?;
    Ok(wrap_deg(
        feed.phase_at(wavenumber(frequency), p).to_degrees(),
    ))
}

fn raw_required_phase(p: Vec3, beam: &BeamSpec, feed: &FeedSpec) -> f64 {
    let k0 = wavenumber(beam.frequency);
    let (u, v) = beam.direction_cosines();
    -k0 * (p[0] * u + p[1] * v) - feed.phase_at(k0, p)
}

/// Reflection phase an element must impose, wrapped degrees, relative to
/// the value at the array center.
pub fn required_phase(
    element: (usize, usize),
    beam: &BeamSpec,
    feed: &FeedSpec,
    layout: &ArrayLayout,
) -> Result<f64> {
    let p = layout.element_position(element.0, element.1)?;
    let reference = raw_required_phase([0.0; 3], beam, feed);
    Ok(wrap_deg(
        (raw_required_phase(p, beam, feed) - reference).to_degrees(),
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseProfile {
    pub layout: ArrayLayout,
    pub frequency: f64,
    pub beam: BeamSpec,
    pub feed: FeedSpec,
    /// Row-major, degrees in (-180, 180].
    pub required_phase: Vec<f64>,
}

impl PhaseProfile {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.required_phase[row * self.layout.cols + col]
    }

    /// Profile with columns reversed, i.e. mirrored across x = 0.
    pub fn mirrored_x(&self) -> Self {
        let mut out = self.clone();
        for r in 0..self.layout.rows {
            for c in 0..self.layout.cols {
                out.required_phase[r * self.layout.cols + c] =
                    self.get(r, self.layout.cols - 1 - c);
            }
        }
        out
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let model = match self.feed.wave_model {
            WaveModel::Spherical => "spherical",
            WaveModel::Plane => "plane",
        };
        let [px, py, pz] = self.feed.position;
        let [dx, dy, dz] = self.feed.plane_incidence_direction;
        writeln!(out, "# frequency_hz = {}", self.frequency)?;
        writeln!(out, "# theta_deg = {}", self.beam.theta_deg)?;
        writeln!(out, "# phi_deg = {}", self.beam.phi_deg)?;
        writeln!(out, "# feed_model = {model}")?;
        writeln!(out, "# feed_position_m = {px},{py},{pz}")?;
        writeln!(out, "# feed_direction = {dx},{dy},{dz}")?;
        writeln!(
            out,
            "# layout = {}x{} pitch_m={}",
            self.layout.rows, self.layout.cols, self.layout.pitch
        )?;
        for r in 0..self.layout.rows {
            let row: Vec<String> = (0..self.layout.cols)
                .map(|c| format!("{:.6}", self.get(r, c)))
                .collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

pub fn synthesize_profile(
    beam: &BeamSpec,
    feed: &FeedSpec,
    layout: &ArrayLayout,
) -> Result<PhaseProfile> {
    beam.validate()?;
    feed.validate()?;
    layout.validate()?;
    let required_phase = layout
        .indices()
        .map(|idx| required_phase(idx, beam, feed, layout))
        .collect::<Result<Vec<_>>>()?;
    Ok(PhaseProfile {
        layout: *layout,
        frequency: beam.frequency,
        beam: *beam,
        feed: *feed,
        required_phase,
    })
}

pub(crate) fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn distance(a: Vec3, b: Vec3) -> f64 {
    norm([a[0] - b[0], a[1] - b[1], a[2] - b[2]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angle::circular_diff_deg;

    const F: f64 = 6.1e9;

    #[test]
    fn element_positions_are_centered() {
        let l = ArrayLayout::default();
        let p = l.element_position(0, 0).unwrap();
        assert!((p[0] + 60.75e-3).abs() < 1e-12 && (p[1] + 60.75e-3).abs() < 1e-12);
        let q = l.element_position(9, 9).unwrap();
        assert!((q[0] - 60.75e-3).abs() < 1e-12);
        assert!(l.element_position(10, 0).is_err());
    }

    #[test]
    fn normal_plane_wave_has_zero_incident_phase() {
        let l = ArrayLayout::default();
        let feed = FeedSpec::normal_incidence();
        for idx in l.indices() {
            assert_eq!(incident_phase(idx, &feed, &l, F).unwrap(), 0.0);
        }
    }

    #[test]
    fn corner_excess_phase_under_spherical_feed() {
        // path 458.13 mm vs 450 mm, lambda0 = 49.146 mm -> ~59.6 deg excess
        let l = ArrayLayout::default();
        let feed = FeedSpec::default();
        let corner = l.element_position(9, 9).unwrap();
        let path = distance(feed.position, corner);
        assert!((path * 1e3 - 458.13).abs() < 0.01);
        let k0 = wavenumber(F);
        let center_phase = -k0 * 0.45;
        let excess = circular_diff_deg(
            center_phase.to_degrees(),
            incident_phase((9, 9), &feed, &l, F).unwrap(),
        );
        assert!((excess - 59.6).abs() < 0.1, "{excess}");
    }

    #[test]
    fn center_elements_have_shortest_path() {
        let l = ArrayLayout::default();
        let feed = FeedSpec::default();
        let d: Vec<f64> = l
            .indices()
            .map(|(r, c)| distance(feed.position, l.position(r, c)))
            .collect();
        let min = d.iter().cloned().fold(f64::INFINITY, f64::min);
        for (r, c) in [(4, 4), (4, 5), (5, 4), (5, 5)] {
            assert!((d[r * 10 + c] - min).abs() < 1e-15);
        }
    }

    #[test]
    fn broadside_plane_profile_is_uniform() {
        let l = ArrayLayout::default();
        let beam = BeamSpec::new(0.0, 0.0, F).unwrap();
        let p = synthesize_profile(&beam, &FeedSpec::normal_incidence(), &l).unwrap();
        assert!(p.required_phase.iter().all(|&v| v == p.required_phase[0]));
    }

    #[test]
    fn column_increment_matches_steering_angle() {
        // k0 d = 98.89 deg at 6.1 GHz
        let l = ArrayLayout::default();
        for (theta, expect) in [(15.0, 25.6), (30.0, 49.4)] {
            let beam = BeamSpec::new(theta, 0.0, F).unwrap();
            let p = synthesize_profile(&beam, &FeedSpec::normal_incidence(), &l).unwrap();
            for c in 0..9 {
                let step = circular_diff_deg(p.get(3, c), p.get(3, c + 1));
                assert!((step - expect).abs() < 0.1, "theta {theta}: {step}");
            }
        }
    }

    #[test]
    fn single_element_profile() {
        let l = ArrayLayout::new(1, 1, 13.5e-3).unwrap();
        let beam = BeamSpec::new(20.0, 45.0, F).unwrap();
        let feed = FeedSpec::default();
        let p = synthesize_profile(&beam, &feed, &l).unwrap();
        assert_eq!(
            p.required_phase,
            vec![required_phase((0, 0), &beam, &feed, &l).unwrap()]
        );
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(BeamSpec::new(91.0, 0.0, F).is_err());
        assert!(BeamSpec::new(10.0, 360.0, F).is_err());
        assert!(FeedSpec::spherical([0.0, 0.0, -0.1]).is_err());
        assert!(FeedSpec::plane([0.0, 0.0, 0.0]).is_err());
        assert!(ArrayLayout::new(0, 3, 1e-3).is_err());
        let l = ArrayLayout::default();
        let beam = BeamSpec::new(0.0, 0.0, F).unwrap();
        assert!(required_phase((0, 10), &beam, &FeedSpec::default(), &l).is_err());
    }

    #[test]
    fn phi_zero_profile_rows_identical() {
        let l = ArrayLayout::default();
        let beam = BeamSpec::new(15.0, 0.0, F).unwrap();
        let p = synthesize_profile(&beam, &FeedSpec::normal_incidence(), &l).unwrap();
        for r in 1..10 {
            for c in 0..10 {
                assert_eq!(p.get(r, c), p.get(0, c));
            }
        }
    }
}
