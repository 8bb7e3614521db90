//! Equivalent-circuit model of the varactor-tuned unit cell.
//!
//! The cell is a shunt series-RLC branch (diode resistance, diode plus
//! structure inductance, varactor plus patch capacitance) in parallel with
//! the inductive input impedance of the grounded substrate stack. The
//! branch is multiplied by a dimensionless geometry factor that maps the
//! lumped element impedance onto the cell's sheet impedance. Reflection is
//! taken against free space at normal incidence.

use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::angle::{unwrap_deg, wrap_deg};
use crate::error::{Result, RisError};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const MU0: f64 = 4.0e-7 * std::f64::consts::PI;

/// Free-space wave impedance in ohms.
pub fn eta0() -> f64 {
    let eps0 = 1.0 / (MU0 * SPEED_OF_LIGHT * SPEED_OF_LIGHT);
    (MU0 / eps0).sqrt()
}

/// Design center frequency. Wavelength references and the phase-span check use it.
pub const CENTER_FREQUENCY_HZ: f64 = 6.1e9;
/// Lower and upper edges of the operating band.
pub const BAND_HZ: (f64, f64) = (5.8e9, 6.4e9);

const BIAS_TOLERANCE: f64 = 1e-9;

/// Junction-capacitance law `Cj0 / (1 + V/Vj)^M + Cp` plus package parasitics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VaractorModel {
    pub junction_capacitance_zero_bias: f64,
    pub grading_exponent: f64,
    pub junction_potential: f64,
    pub parasitic_capacitance: f64,
    pub series_resistance: f64,
    pub series_inductance: f64,
    pub bias_range: [f64; 2],
}

impl Default for VaractorModel {
    /// Least-squares fit to tabulated C-V points of the SMV1231-079LF;
    /// see `scripts/calibrate_cell.py`.
    fn default() -> Self {
        Self {
            junction_capacitance_zero_bias: 2.127e-12,
            grading_exponent: 1.117,
            junction_potential: 2.553,
            parasitic_capacitance: 0.2238e-12,
            series_resistance: 0.2,
            series_inductance: 0.7e-9,
            bias_range: [0.0, 14.0],
        }
    }
}

impl VaractorModel {
    pub fn validate(&self) -> Result<()> {
        positive(
            "varactor.junction_capacitance_zero_bias",
            self.junction_capacitance_zero_bias,
        )?;
        positive("varactor.grading_exponent", self.grading_exponent)?;
        positive("varactor.junction_potential", self.junction_potential)?;
        non_negative("varactor.parasitic_capacitance", self.parasitic_capacitance)?;
        non_negative("varactor.series_resistance", self.series_resistance)?;
        non_negative("varactor.series_inductance", self.series_inductance)?;
        let [lo, hi] = self.bias_range;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(RisError::Validation(format!(
                "varactor.bias_range must satisfy min < max, got [{lo}, {hi}]"
            )));
        }
        if lo <= -self.junction_potential {
            return Err(RisError::Validation(format!(
                "varactor.bias_range minimum {lo} V drives the junction into forward conduction"
            )));
        }
        Ok(())
    }

    pub fn check_bias(&self, bias: f64) -> Result<()> {
        let [lo, hi] = self.bias_range;
        if !bias.is_finite() || bias < lo - BIAS_TOLERANCE || bias > hi + BIAS_TOLERANCE {
            return Err(RisError::Range {
                what: "bias",
                value: bias,
                min: lo,
                max: hi,
            });
        }
        Ok(())
    }
}

/// Geometry, substrate and lumped-element description of one cell. All SI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UnitCellParams {
    pub cell_pitch: f64,
    pub substrate_permittivity: f64,
    pub substrate_loss_tangent: f64,
    pub layer1_height: f64,
    pub layer2_height: f64,
    /// Overall board thickness including metal and bonding layers.
    pub total_thickness: f64,
    /// l1, l2, l3.
    pub patch_lengths: [f64; 3],
    pub gap: f64,
    pub via_radius: f64,
    /// Via and patch inductance lumped into one series element.
    pub fixed_inductance: f64,
    /// Middle-patch and top-gap capacitance, in parallel with the varactor.
    pub fixed_capacitance: f64,
    pub middle_patch_enabled: bool,
    /// Lumped-to-sheet impedance factor applied to the whole shunt branch.
    pub branch_impedance_scale: f64,
    pub varactor: VaractorModel,
}

impl Default for UnitCellParams {
    fn default() -> Self {
        Self {
            cell_pitch: 13.5e-3,
            substrate_permittivity: 3.55,
            substrate_loss_tangent: 0.0027,
            layer1_height: 1.524e-3,
            layer2_height: 0.813e-3,
            total_thickness: 3.9e-3,
            patch_lengths: [4.2e-3, 10.0e-3, 8.5e-3],
            gap: 0.2e-3,
            via_radius: 0.4e-3,
            fixed_inductance: 0.1e-9,
            fixed_capacitance: 0.1e-12,
            middle_patch_enabled: true,
            branch_impedance_scale: 20.0,
            varactor: VaractorModel::default(),
        }
    }
}

impl UnitCellParams {
    pub fn validate(&self) -> Result<()> {
        positive("cell_pitch", self.cell_pitch)?;
        if !(self.substrate_permittivity >= 1.0) {
            return Err(RisError::Validation(format!(
                "substrate_permittivity must be >= 1, got {}",
                self.substrate_permittivity
            )));
        }
        non_negative("substrate_loss_tangent", self.substrate_loss_tangent)?;
        positive("layer1_height", self.layer1_height)?;
        positive("layer2_height", self.layer2_height)?;
        positive("total_thickness", self.total_thickness)?;
        for (i, &l) in self.patch_lengths.iter().enumerate() {
            if !(l > 0.0 && l.is_finite()) {
                return Err(RisError::Validation(format!(
                    "patch_lengths[{i}] must be > 0, got {l}"
                )));
            }
        }
        positive("gap", self.gap)?;
        positive("via_radius", self.via_radius)?;
        positive("fixed_inductance", self.fixed_inductance)?;
        non_negative("fixed_capacitance", self.fixed_capacitance)?;
        positive("branch_impedance_scale", self.branch_impedance_scale)?;
        if self.total_thickness < self.substrate_height() {
            return Err(RisError::Validation(format!(
                "total_thickness {} is smaller than layer1_height + layer2_height = {}",
                self.total_thickness,
                self.substrate_height()
            )));
        }
        let limit = SPEED_OF_LIGHT / CENTER_FREQUENCY_HZ / 10.0;
        if self.total_thickness >= limit {
            return Err(RisError::Validation(format!(
                "total_thickness {} m is not below lambda0/10 = {limit} m",
                self.total_thickness
            )));
        }
        self.varactor.validate()
    }

    /// Dielectric height between the tuned patch layer and ground.
    pub fn substrate_height(&self) -> f64 {
        self.layer1_height + self.layer2_height
    }

    /// Series inductance of the shunt branch (diode package plus structure).
    pub fn branch_inductance(&self) -> f64 {
        self.varactor.series_inductance + self.fixed_inductance
    }

    pub fn total_capacitance(&self, bias: f64) -> Result<f64> {
        let patch = if self.middle_patch_enabled {
            self.fixed_capacitance
        } else {
            0.0
        };
        Ok(patch + varactor_capacitance(bias, &self.varactor)?)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let params: Self = toml::from_str(text).map_err(|e| RisError::Config(e.to_string()))?;
        params.validate()?;
        Ok(params)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("unit-cell parameters always serialize")
    }
}

fn positive(what: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(RisError::Validation(format!(
            "{what} must be > 0, got {value}"
        )))
    }
}

fn non_negative(what: &'static str, value: f64) -> Result<()> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(RisError::Validation(format!(
            "{what} must be >= 0, got {value}"
        )))
    }
}

/// Capacitance of the reverse-biased varactor including its parasitic.
pub fn varactor_capacitance(bias: f64, model: &VaractorModel) -> Result<f64> {
    model.check_bias(bias)?;
    let junction = model.junction_capacitance_zero_bias
        / (1.0 + bias / model.junction_potential).powf(model.grading_exponent);
    Ok(junction + model.parasitic_capacitance)
}

/// LC resonance `1 / (2 pi sqrt(LC))`.
pub fn resonant_frequency(inductance: f64, capacitance: f64) -> Result<f64> {
    if !(inductance > 0.0 && inductance.is_finite()) {
        return Err(RisError::Domain {
            what: "inductance",
            requirement: "positive",
            value: inductance,
        });
    }
    if !(capacitance > 0.0 && capacitance.is_finite()) {
        return Err(RisError::Domain {
            what: "capacitance",
            requirement: "positive",
            value: capacitance,
        });
    }
    Ok(1.0 / (2.0 * std::f64::consts::PI * (inductance * capacitance).sqrt()))
}

fn check_frequency(frequency: f64) -> Result<()> {
    if frequency > 0.0 && frequency.is_finite() {
        Ok(())
    } else {
        Err(RisError::Domain {
            what: "frequency",
            requirement: "positive",
            value: frequency,
        })
    }
}

/// Impedance of the tuned shunt branch, already scaled to sheet impedance.
pub fn branch_impedance(frequency: f64, bias: f64, params: &UnitCellParams) -> Result<Complex64> {
    check_frequency(frequency)?;
    let omega = 2.0 * std::f64::consts::PI * frequency;
    let c = params.total_capacitance(bias)?;
    let z = Complex64::new(
        params.varactor.series_resistance,
        omega * params.branch_inductance() - 1.0 / (omega * c),
    );
    Ok(z * params.branch_impedance_scale)
}

/// Input impedance of the conductor-backed substrate stack,
/// `j eta/sqrt(er) tan(beta h)` with a lossy complex permittivity.
pub fn grounded_slab_impedance(frequency: f64, params: &UnitCellParams) -> Result<Complex64> {
    check_frequency(frequency)?;
    let er = Complex64::new(
        params.substrate_permittivity,
        -params.substrate_permittivity * params.substrate_loss_tangent,
    );
    let n = er.sqrt();
    let beta = 2.0 * std::f64::consts::PI * frequency / SPEED_OF_LIGHT * n;
    let h = params.substrate_height();
    Ok(Complex64::i() * eta0() / n * (beta * h).tan())
}

pub fn surface_impedance(frequency: f64, bias: f64, params: &UnitCellParams) -> Result<Complex64> {
    let zb = branch_impedance(frequency, bias, params)?;
    let zs = grounded_slab_impedance(frequency, params)?;
    if zb.norm() == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    Ok(zb * zs / (zb + zs))
}

/// One evaluated point of the cell response.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReflectionSample {
    pub frequency: f64,
    pub bias: f64,
    pub gamma: Complex64,
    pub magnitude: f64,
    /// Degrees in (-180, 180].
    pub phase: f64,
}

impl ReflectionSample {
    pub fn new(frequency: f64, bias: f64, gamma: Complex64) -> Self {
        Self {
            frequency,
            bias,
            gamma,
            magnitude: gamma.norm(),
            phase: wrap_deg(gamma.arg().to_degrees()),
        }
    }
}

pub fn reflection_coefficient(
    frequency: f64,
    bias: f64,
    params: &UnitCellParams,
) -> Result<ReflectionSample> {
    let z = surface_impedance(frequency, bias, params)?;
    let eta = eta0();
    let gamma = (z - eta) / (z + eta);
    Ok(ReflectionSample::new(frequency, bias, gamma))
}

/// Dense frequency-major grid of reflection samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionTable {
    frequencies: Vec<f64>,
    biases: Vec<f64>,
    samples: Vec<ReflectionSample>,
}

impl ReflectionTable {
    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn samples(&self) -> &[ReflectionSample] {
        &self.samples
    }

    pub fn get(&self, freq_index: usize, bias_index: usize) -> &ReflectionSample {
        &self.samples[freq_index * self.biases.len() + bias_index]
    }

    /// All bias samples at one frequency, in bias order.
    pub fn row(&self, freq_index: usize) -> &[ReflectionSample] {
        let n = self.biases.len();
        &self.samples[freq_index * n..(freq_index + 1) * n]
    }

    pub fn frequency_index(&self, frequency: f64) -> Result<usize> {
        self.frequencies
            .iter()
            .position(|&f| (f - frequency).abs() <= 1e-9 * frequency.abs().max(1.0))
            .ok_or(RisError::FrequencyNotFound(frequency))
    }

    pub fn min_magnitude(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.magnitude)
            .fold(f64::INFINITY, f64::min)
    }

    /// Writes `frequency_hz,bias_v,gamma_re,gamma_im,magnitude,phase_deg`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(
            out,
            "frequency_hz,bias_v,gamma_re,gamma_im,magnitude,phase_deg"
        )?;
        for s in &self.samples {
            writeln!(
                out,
                "{},{},{:.12},{:.12},{:.12},{:.9}",
                s.frequency, s.bias, s.gamma.re, s.gamma.im, s.magnitude, s.phase
            )?;
        }
        Ok(())
    }
}

fn check_axis(name: &'static str, values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(RisError::Validation(format!("{name} must not be empty")));
    }
    if values.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(RisError::Validation(format!(
            "{name} must be strictly increasing"
        )));
    }
    Ok(())
}

pub fn sweep_response(
    frequencies: &[f64],
    biases: &[f64],
    params: &UnitCellParams,
) -> Result<ReflectionTable> {
    check_axis("frequencies", frequencies)?;
    check_axis("biases", biases)?;
    let mut samples = Vec::with_capacity(frequencies.len() * biases.len());
    for &f in frequencies {
        for &v in biases {
            samples.push(reflection_coefficient(f, v, params)?);
        }
    }
    Ok(ReflectionTable {
        frequencies: frequencies.to_vec(),
        biases: biases.to_vec(),
        samples,
    })
}

/// Unwrapped max-minus-min phase over bias, in degrees.
pub fn phase_span(table: &ReflectionTable, frequency: f64) -> Result<f64> {
    let fi = table.frequency_index(frequency)?;
    let phases: Vec<f64> = table.row(fi).iter().map(|s| s.phase).collect();
    Ok(span_of(&phases))
}

pub(crate) fn span_of(wrapped: &[f64]) -> f64 {
    let u = unwrap_deg(wrapped);
    let max = u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = u.iter().cloned().fold(f64::INFINITY, f64::min);
    max - min
}

/// Resonance of the shunt branch and the reflection-phase slope there.
///
/// Returns `(f_res, |d phase / d f|)` with the slope in degrees per hertz,
/// from a central difference of the wrapped-safe phase ratio.
pub fn phase_slope_at_resonance(params: &UnitCellParams, bias: f64) -> Result<(f64, f64)> {
    let f_res = resonant_frequency(params.branch_inductance(), params.total_capacitance(bias)?)?;
    let df = f_res * 1e-7;
    let lo = reflection_coefficient(f_res - df, bias, params)?.gamma;
    let hi = reflection_coefficient(f_res + df, bias, params)?.gamma;
    let dphi = (hi / lo).arg().to_degrees();
    Ok((f_res, (dphi / (2.0 * df)).abs()))
}

/// Evenly spaced grid on integer steps so endpoints are reproduced exactly.
pub fn linear_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(stop >= start) {
        return Err(RisError::Validation(format!(
            "grid needs step > 0 and stop >= start, got start={start} stop={stop} step={step}"
        )));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    // snap to 1e-9 so decimal grids print cleanly (0.3, not 0.30000000000000004)
    Ok((0..=n)
        .map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lossless() -> UnitCellParams {
        let mut p = UnitCellParams::default();
        p.varactor.series_resistance = 0.0;
        p.substrate_loss_tangent = 0.0;
        p
    }

    #[test]
    fn zero_bias_capacitance_is_cj0_plus_cp() {
        let m = VaractorModel::default();
        let c = varactor_capacitance(0.0, &m).unwrap();
        assert_eq!(
            c,
            m.junction_capacitance_zero_bias + m.parasitic_capacitance
        );
    }

    #[test]
    fn capacitance_at_full_bias_matches_fit() {
        // fit target: ~0.47-0.49 pF near the top of the tuning range
        let c = varactor_capacitance(14.0, &VaractorModel::default()).unwrap();
        assert!((c - 0.4874e-12).abs() < 0.002e-12, "{c}");
    }

    #[test]
    fn capacitance_rejects_out_of_range_bias() {
        let err = varactor_capacitance(14.5, &VaractorModel::default()).unwrap_err();
        assert!(err.to_string().contains("14.5"));
        assert!(varactor_capacitance(-0.1, &VaractorModel::default()).is_err());
    }

    #[test]
    fn resonance_examples() {
        let f = resonant_frequency(1.0e-9, 0.68e-12).unwrap();
        assert!((f / 1e9 - 6.103).abs() < 5e-4, "{f}");
        let f4 = resonant_frequency(1.0e-9, 2.72e-12).unwrap();
        assert!((f4 / 1e9 - 3.051).abs() < 1e-3, "{f4}");
        assert!((f / f4 - 2.0).abs() < 1e-12);
        assert!(resonant_frequency(0.0, 1e-12).is_err());
        assert!(resonant_frequency(1e-9, -1e-12).is_err());
    }

    #[test]
    fn lossless_cell_reflects_fully() {
        let p = lossless();
        for f in [5.0e9, 5.8e9, 6.1e9, 6.4e9, 7.0e9] {
            for v in [0.0, 3.3, 7.0, 14.0] {
                let s = reflection_coefficient(f, v, &p).unwrap();
                assert!((s.magnitude - 1.0).abs() < 1e-9, "{f} {v} {}", s.magnitude);
            }
        }
    }

    #[test]
    fn series_resonance_shorts_the_surface() {
        let p = lossless();
        let bias = 7.0;
        let f_res =
            resonant_frequency(p.branch_inductance(), p.total_capacitance(bias).unwrap()).unwrap();
        let zb = branch_impedance(f_res, bias, &p).unwrap();
        assert!(zb.re == 0.0);
        assert!(zb.im.abs() < 1e-9 * p.branch_impedance_scale * 1e3, "{zb}");
        // Gamma passes through -1: the wrapped phase flips across the +-180 cut
        let s = reflection_coefficient(f_res, bias, &p).unwrap();
        assert!((s.gamma + 1.0).norm() < 1e-6, "{}", s.gamma);
        let below = reflection_coefficient(f_res * (1.0 - 1e-4), bias, &p).unwrap();
        let above = reflection_coefficient(f_res * (1.0 + 1e-4), bias, &p).unwrap();
        assert!(below.phase * above.phase < 0.0);
        assert!(below.phase.abs() > 170.0 && above.phase.abs() > 170.0);
    }

    #[test]
    fn lossy_elements_give_positive_resistance() {
        let p = UnitCellParams {
            substrate_loss_tangent: 0.0,
            ..UnitCellParams::default()
        };
        let z = surface_impedance(6.1e9, 5.0, &p).unwrap();
        assert!(z.re > 0.0);
        let mut q = UnitCellParams::default();
        q.varactor.series_resistance = 0.0;
        let z = surface_impedance(6.1e9, 5.0, &q).unwrap();
        assert!(z.re > 0.0);
    }

    #[test]
    fn sample_fields_agree_with_gamma() {
        let s = reflection_coefficient(6.0e9, 2.0, &UnitCellParams::default()).unwrap();
        assert!((s.magnitude - s.gamma.norm()).abs() < 1e-9);
        let rebuilt = Complex64::from_polar(s.magnitude, s.phase.to_radians());
        assert!((rebuilt - s.gamma).norm() < 1e-9);
    }

    #[test]
    fn single_point_sweep() {
        let p = UnitCellParams::default();
        let t = sweep_response(&[6.1e9], &[4.0], &p).unwrap();
        assert_eq!(t.samples().len(), 1);
        assert_eq!(
            t.samples()[0],
            reflection_coefficient(6.1e9, 4.0, &p).unwrap()
        );
        assert_eq!(phase_span(&t, 6.1e9).unwrap(), 0.0);
    }

    #[test]
    fn sweep_rejects_bad_axes() {
        let p = UnitCellParams::default();
        assert!(sweep_response(&[], &[1.0], &p).is_err());
        assert!(sweep_response(&[6e9, 5e9], &[1.0], &p).is_err());
        assert!(sweep_response(&[6e9], &[1.0, 1.0], &p).is_err());
    }

    #[test]
    fn span_lookup_requires_present_frequency() {
        let p = UnitCellParams::default();
        let t = sweep_response(&[6.0e9, 6.1e9], &[0.0, 14.0], &p).unwrap();
        assert!(matches!(
            phase_span(&t, 6.05e9),
            Err(RisError::FrequencyNotFound(_))
        ));
    }

    #[test]
    fn middle_patch_lowers_resonance() {
        let mut p = UnitCellParams::default();
        let with = resonant_frequency(p.branch_inductance(), p.total_capacitance(7.0).unwrap());
        p.middle_patch_enabled = false;
        let without = resonant_frequency(p.branch_inductance(), p.total_capacitance(7.0).unwrap());
        assert!(with.unwrap() < without.unwrap());
    }

    #[test]
    fn default_params_validate() {
        UnitCellParams::default().validate().unwrap();
        let p = UnitCellParams {
            total_thickness: 6e-3,
            ..UnitCellParams::default()
        };
        assert!(p.validate().is_err());
        let mut p = UnitCellParams::default();
        p.varactor.bias_range = [14.0, 0.0];
        assert!(p.validate().is_err());
    }

    #[test]
    fn grid_endpoints_are_exact() {
        let g = linear_grid(0.0, 14.0, 0.1).unwrap();
        assert_eq!(g.len(), 141);
        assert_eq!(g[140], 14.0);
        assert_eq!(g[3], 0.3);
    }
}
