//! Scattered-field superposition and beam metrics.
//!
//! Each element re-radiates its illumination times its reflection
//! coefficient through a `cos^q(theta)` element pattern. Cuts use a signed
//! theta in [-90, 90] along azimuth `phi_cut`; full-sphere sampling uses
//! polar theta in [0, 180] with the half space behind the ground plane dark.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::circuit::{reflection_coefficient, UnitCellParams};
use crate::error::{Result, RisError};
use crate::mapping::VoltagePlan;
use crate::synthesis::{distance, wavenumber, ArrayLayout, FeedSpec, PhaseProfile, Vec3};

/// Lowest value written to `magnitude_db` (for exact nulls).
pub const DB_FLOOR: f64 = -300.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadiusMode {
    FarField,
    FiniteRadius(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereSampling {
    pub theta_step_deg: f64,
    pub phi_step_deg: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationGrid {
    pub theta_deg: Vec<f64>,
    pub phi_cut_deg: f64,
    pub radius_mode: RadiusMode,
    /// Exponent q of the `cos^q` element pattern.
    pub element_exponent: f64,
    /// Also sample the full sphere (needed for directivity).
    pub sphere: Option<SphereSampling>,
}

impl Default for ObservationGrid {
    /// -90..90 deg in 1 deg steps, phi = 0, far field, cosine element.
    fn default() -> Self {
        Self {
            theta_deg: (-90..=90).map(f64::from).collect(),
            phi_cut_deg: 0.0,
            radius_mode: RadiusMode::FarField,
            element_exponent: 1.0,
            sphere: None,
        }
    }
}

impl ObservationGrid {
    pub fn with_sphere(mut self, step_deg: f64) -> Self {
        self.sphere = Some(SphereSampling {
            theta_step_deg: step_deg,
            phi_step_deg: step_deg,
        });
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.theta_deg.is_empty() {
            return Err(RisError::Validation("observation grid is empty".into()));
        }
        if self.theta_deg.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(RisError::Validation(
                "observation theta must be strictly increasing".into(),
            ));
        }
        if self.theta_deg[0] < -90.0 || self.theta_deg[self.theta_deg.len() - 1] > 90.0 {
            return Err(RisError::Validation(
                "observation theta must lie within [-90, 90]".into(),
            ));
        }
        if !(self.element_exponent >= 0.0) {
            return Err(RisError::Validation(format!(
                "element exponent must be >= 0, got {}",
                self.element_exponent
            )));
        }
        if let RadiusMode::FiniteRadius(r) = self.radius_mode {
            if !(r > 0.0 && r.is_finite()) {
                return Err(RisError::Validation(format!(
                    "finite observation radius must be > 0, got {r}"
                )));
            }
        }
        if let Some(s) = self.sphere {
            for step in [s.theta_step_deg, s.phi_step_deg] {
                if !(step > 0.0 && step <= 90.0) {
                    return Err(RisError::Validation(format!(
                        "sphere step must be in (0, 90] deg, got {step}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// What sets each element's reflection coefficient.
#[derive(Debug, Clone, Copy)]
pub enum Excitation<'a> {
    /// Unit-magnitude `exp(j phase)` straight from the synthesized profile.
    Ideal(&'a PhaseProfile),
    /// Cell model evaluated at each planned voltage.
    Quantized(&'a VoltagePlan),
    /// Arbitrary row-major reflection coefficients.
    Custom {
        frequency: f64,
        reflection: &'a [Complex64],
    },
}

impl Excitation<'_> {
    fn frequency(&self) -> f64 {
        match self {
            Excitation::Ideal(p) => p.frequency,
            Excitation::Quantized(p) => p.frequency,
            Excitation::Custom { frequency, .. } => *frequency,
        }
    }

    fn reflections(&self, layout: &ArrayLayout, params: &UnitCellParams) -> Result<Vec<Complex64>> {
        let (rows, cols, n) = match self {
            Excitation::Ideal(p) => (p.layout.rows, p.layout.cols, p.required_phase.len()),
            Excitation::Quantized(p) => (p.rows, p.cols, p.voltages.len()),
            Excitation::Custom { reflection, .. } => (layout.rows, layout.cols, reflection.len()),
        };
        if rows != layout.rows || cols != layout.cols || n != layout.len() {
            return Err(RisError::Validation(format!(
                "excitation is {rows}x{cols} ({n} values) but layout is {}x{}",
                layout.rows, layout.cols
            )));
        }
        match self {
            Excitation::Ideal(p) => Ok(p
                .required_phase
                .iter()
                .map(|ph| Complex64::from_polar(1.0, ph.to_radians()))
                .collect()),
            Excitation::Quantized(p) => p
                .voltages
                .iter()
                .map(|q| reflection_coefficient(p.frequency, q.volts(), params).map(|s| s.gamma))
                .collect(),
            Excitation::Custom { reflection, .. } => Ok(reflection.to_vec()),
        }
    }
}

/// Full-sphere power samples, theta-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereField {
    pub theta_deg: Vec<f64>,
    pub phi_deg: Vec<f64>,
    pub power: Vec<f64>,
}

impl SphereField {
    /// Uniform unit power on a grid with the given step.
    pub fn isotropic(step_deg: f64) -> Self {
        let theta_deg = inclusive_steps(0.0, 180.0, step_deg);
        let phi_deg = inclusive_steps(0.0, 360.0, step_deg);
        let power = vec![1.0; theta_deg.len() * phi_deg.len()];
        Self {
            theta_deg,
            phi_deg,
            power,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadiationPattern {
    pub frequency: f64,
    pub grid: ObservationGrid,
    pub field: Vec<Complex64>,
    /// Normalized to 0 dB at the peak.
    pub magnitude_db: Vec<f64>,
    pub sphere: Option<SphereField>,
}

impl RadiationPattern {
    /// Builds the normalized dB trace from raw cut samples.
    pub fn from_field(frequency: f64, grid: ObservationGrid, field: Vec<Complex64>) -> Self {
        let peak = field.iter().map(|e| e.norm()).fold(0.0, f64::max);
        let magnitude_db = field
            .iter()
            .map(|e| {
                if peak == 0.0 {
                    0.0
                } else {
                    let ratio = e.norm() / peak;
                    if ratio > 0.0 {
                        (20.0 * ratio.log10()).max(DB_FLOOR)
                    } else {
                        DB_FLOOR
                    }
                }
            })
            .collect();
        Self {
            frequency,
            grid,
            field,
            magnitude_db,
            sphere: None,
        }
    }

    pub fn theta_deg(&self) -> &[f64] {
        &self.grid.theta_deg
    }

    /// Writes `theta_deg,field_re,field_im,magnitude_db`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "theta_deg,field_re,field_im,magnitude_db")?;
        for ((t, e), db) in self
            .grid
            .theta_deg
            .iter()
            .zip(&self.field)
            .zip(&self.magnitude_db)
        {
            writeln!(out, "{t},{:.12e},{:.12e},{:.6}", e.re, e.im, db)?;
        }
        Ok(())
    }
}

struct Radiator {
    position: Vec3,
    weight: Complex64,
}

fn radiators(
    excitation: &Excitation<'_>,
    layout: &ArrayLayout,
    feed: &FeedSpec,
    params: &UnitCellParams,
) -> Result<(f64, Vec<Radiator>)> {
    layout.validate()?;
    feed.validate()?;
    let frequency = excitation.frequency();
    let k0 = wavenumber(frequency);
    let gammas = excitation.reflections(layout, params)?;
    let out = layout
        .indices()
        .zip(gammas)
        .map(|((r, c), gamma)| {
            let position = layout.position(r, c);
            Radiator {
                position,
                weight: feed.illumination(k0, position) * gamma,
            }
        })
        .collect();
    Ok((k0, out))
}

fn element_pattern(cos_theta: f64, q: f64) -> f64 {
    if cos_theta < 0.0 {
        0.0
    } else if q == 0.0 {
        1.0
    } else {
        cos_theta.powf(q)
    }
}

fn field_toward(k0: f64, radiators: &[Radiator], dir: Vec3, mode: RadiusMode, q: f64) -> Complex64 {
    let ep = element_pattern(dir[2], q);
    if ep == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let sum: Complex64 = match mode {
        RadiusMode::FarField => radiators
            .iter()
            .map(|r| {
                let proj = r.position[0] * dir[0] + r.position[1] * dir[1] + r.position[2] * dir[2];
                r.weight * Complex64::from_polar(1.0, k0 * proj)
            })
            .sum(),
        RadiusMode::FiniteRadius(radius) => {
            let obs = dir.map(|c| c * radius);
            radiators
                .iter()
                .map(|r| {
                    let d = distance(obs, r.position);
                    r.weight * Complex64::from_polar(radius / d, -k0 * (d - radius))
                })
                .sum()
        }
    };
    sum * ep
}

fn inclusive_steps(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    let mut v: Vec<f64> = (0..=n).map(|i| start + i as f64 * step).collect();
    if stop - v[v.len() - 1] > 1e-9 {
        v.push(stop);
    }
    v
}

/// Superposes every element's scattered contribution over the grid.
pub fn compute_pattern(
    excitation: Excitation<'_>,
    layout: &ArrayLayout,
    feed: &FeedSpec,
    params: &UnitCellParams,
    grid: &ObservationGrid,
) -> Result<RadiationPattern> {
    grid.validate()?;
    let (k0, rad) = radiators(&excitation, layout, feed, params)?;
    let q = grid.element_exponent;
    let phi = grid.phi_cut_deg.to_radians();
    let field = grid
        .theta_deg
        .iter()
        .map(|t| {
            let t = t.to_radians();
            let dir = [t.sin() * phi.cos(), t.sin() * phi.sin(), t.cos()];
            field_toward(k0, &rad, dir, grid.radius_mode, q)
        })
        .collect();
    let mut pattern = RadiationPattern::from_field(excitation.frequency(), grid.clone(), field);
    if let Some(s) = grid.sphere {
        let theta_deg = inclusive_steps(0.0, 180.0, s.theta_step_deg);
        let phi_deg = inclusive_steps(0.0, 360.0, s.phi_step_deg);
        let mut power = Vec::with_capacity(theta_deg.len() * phi_deg.len());
        for t in &theta_deg {
            let t = t.to_radians();
            for p in &phi_deg {
                let p = p.to_radians();
                let dir = [t.sin() * p.cos(), t.sin() * p.sin(), t.cos()];
                power.push(field_toward(k0, &rad, dir, grid.radius_mode, q).norm_sqr());
            }
        }
        pattern.sphere = Some(SphereField {
            theta_deg,
            phi_deg,
            power,
        });
    }
    Ok(pattern)
}

/// Angle of the global maximum; ties go to the smaller |theta|.
pub fn main_lobe(pattern: &RadiationPattern) -> f64 {
    let theta = pattern.theta_deg();
    let mut best = 0;
    for i in 1..theta.len() {
        let (a, b) = (pattern.magnitude_db[i], pattern.magnitude_db[best]);
        if a > b || (a == b && theta[i].abs() < theta[best].abs()) {
            best = i;
        }
    }
    theta[best]
}

fn peak_index(pattern: &RadiationPattern) -> usize {
    let lobe = main_lobe(pattern);
    pattern
        .theta_deg()
        .iter()
        .position(|&t| t == lobe)
        .expect("main lobe is a grid sample")
}

/// Indices `[lo, hi]` of the main lobe, bounded by the first local minimum
/// on each side of the peak (or the grid edge).
pub fn main_lobe_region(pattern: &RadiationPattern) -> (usize, usize) {
    let db = &pattern.magnitude_db;
    let peak = peak_index(pattern);
    let mut lo = peak;
    while lo > 0 && db[lo - 1] < db[lo] {
        lo -= 1;
    }
    let mut hi = peak;
    while hi + 1 < db.len() && db[hi + 1] < db[hi] {
        hi += 1;
    }
    (lo, hi)
}

/// Highest level outside the main-lobe region relative to the peak, dB.
pub fn side_lobe_level(pattern: &RadiationPattern) -> Result<f64> {
    let db = &pattern.magnitude_db;
    let max = db.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = db.iter().cloned().fold(f64::INFINITY, f64::min);
    if max - min < 1e-12 {
        return Err(RisError::UndefinedSideLobe("pattern is flat"));
    }
    let (lo, hi) = main_lobe_region(pattern);
    let side = db[..lo]
        .iter()
        .chain(&db[hi + 1..])
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    if side == f64::NEG_INFINITY {
        return Err(RisError::UndefinedSideLobe(
            "no secondary maximum inside the observation grid",
        ));
    }
    Ok(side - db[peak_index(pattern)])
}

/// Width between the -3 dB crossings around the peak, interpolated linearly.
pub fn half_power_beamwidth(pattern: &RadiationPattern) -> Result<f64> {
    const LEVEL: f64 = -3.0;
    let db = &pattern.magnitude_db;
    let theta = pattern.theta_deg();
    let peak = peak_index(pattern);
    let cross = |i: usize, j: usize| -> f64 {
        // db[i] >= LEVEL > db[j]
        let t = (db[i] - LEVEL) / (db[i] - db[j]);
        theta[i] + t * (theta[j] - theta[i])
    };
    let mut i = peak;
    while i > 0 && db[i - 1] >= LEVEL {
        i -= 1;
    }
    if i == 0 {
        return Err(RisError::BeamwidthBoundary("lower"));
    }
    let left = cross(i, i - 1);
    let mut j = peak;
    while j + 1 < db.len() && db[j + 1] >= LEVEL {
        j += 1;
    }
    if j + 1 == db.len() {
        return Err(RisError::BeamwidthBoundary("upper"));
    }
    let right = cross(j, j + 1);
    Ok(right - left)
}

/// `4 pi max|E|^2 / integral |E|^2 sin(theta) dtheta dphi`, trapezoidal, in dBi.
pub fn sphere_directivity(sphere: &SphereField) -> Result<f64> {
    let nt = sphere.theta_deg.len();
    let np = sphere.phi_deg.len();
    if nt < 2 || np < 2 || sphere.power.len() != nt * np {
        return Err(RisError::Validation("sphere sampling is incomplete".into()));
    }
    let trapz = |x: &[f64], y: &[f64]| -> f64 {
        x.windows(2)
            .zip(y.windows(2))
            .map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]))
            .sum()
    };
    let phi_rad: Vec<f64> = sphere.phi_deg.iter().map(|p| p.to_radians()).collect();
    let theta_rad: Vec<f64> = sphere.theta_deg.iter().map(|t| t.to_radians()).collect();
    let ring: Vec<f64> = (0..nt)
        .map(|i| trapz(&phi_rad, &sphere.power[i * np..(i + 1) * np]) * theta_rad[i].sin())
        .collect();
    let total = trapz(&theta_rad, &ring);
    let max = sphere.power.iter().cloned().fold(0.0, f64::max);
    if !(total > 0.0) {
        return Err(RisError::Validation("pattern radiates no power".into()));
    }
    Ok(10.0 * (4.0 * std::f64::consts::PI * max / total).log10())
}

pub fn directivity(pattern: &RadiationPattern) -> Result<f64> {
    match &pattern.sphere {
        Some(s) => sphere_directivity(s),
        None => Err(RisError::Unsupported(
            "directivity needs full-sphere sampling; compute the pattern with ObservationGrid::with_sphere",
        )),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamMetrics {
    pub main_lobe_deg: f64,
    pub sll_db: f64,
    /// Present when the pattern carries full-sphere samples.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub directivity_dbi: Option<f64>,
    pub hpbw_deg: f64,
}

impl BeamMetrics {
    pub fn from_pattern(pattern: &RadiationPattern) -> Result<Self> {
        let directivity_dbi = match pattern.sphere {
            Some(_) => Some(directivity(pattern)?),
            None => None,
        };
        Ok(Self {
            main_lobe_deg: main_lobe(pattern),
            sll_db: side_lobe_level(pattern)?,
            directivity_dbi,
            hpbw_deg: half_power_beamwidth(pattern)?,
        })
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("metrics always serialize")
    }
}
