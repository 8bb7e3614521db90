//! Phase-to-bias inversion and DAC quantization.

use std::io::Write;

use crate::angle::{circular_diff_deg, unwrap_deg, wrap_deg};
use crate::circuit::{linear_grid, reflection_coefficient, UnitCellParams};
use crate::error::{Result, RisError};
use crate::synthesis::PhaseProfile;

/// DAC output span in volts.
pub const DAC_FULL_SCALE_V: f64 = 14.0;
pub const DAC_MAX_CODE: u16 = u16::MAX;
/// Voltage programming resolution in volts.
pub const VOLTAGE_STEP_V: f64 = 0.01;
const FULL_SCALE_CENTIVOLTS: u32 = 1400;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LutEntry {
    pub bias: f64,
    /// Unwrapped along bias, starting from the lowest bias.
    pub phase: f64,
    pub magnitude: f64,
}

/// Sampled phase-versus-bias curve at one frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseLut {
    frequency: f64,
    entries: Vec<LutEntry>,
}

impl PhaseLut {
    pub fn new(frequency: f64, entries: Vec<LutEntry>) -> Result<Self> {
        if entries.len() < 2 {
            return Err(RisError::Validation(format!(
                "a phase LUT needs at least 2 entries, got {}",
                entries.len()
            )));
        }
        if entries.windows(2).any(|w| !(w[1].bias > w[0].bias)) {
            return Err(RisError::Validation(
                "LUT biases must be strictly increasing".into(),
            ));
        }
        let rising = entries[1].phase > entries[0].phase;
        let monotone = entries.windows(2).all(|w| {
            if rising {
                w[1].phase > w[0].phase
            } else {
                w[1].phase < w[0].phase
            }
        });
        if !monotone {
            return Err(RisError::NonMonotonePhase {
                frequency_hz: frequency,
            });
        }
        Ok(Self { frequency, entries })
    }

    pub fn frequency(&self) -> f64 {
        self.frequency
    }

    pub fn entries(&self) -> &[LutEntry] {
        &self.entries
    }

    fn first(&self) -> &LutEntry {
        &self.entries[0]
    }

    fn last(&self) -> &LutEntry {
        &self.entries[self.entries.len() - 1]
    }

    /// Unwrapped phase range covered by the bias sweep.
    pub fn span(&self) -> f64 {
        (self.last().phase - self.first().phase).abs()
    }

    /// Width of the arc no bias can reach, `360 - span` (zero if the curve wraps).
    pub fn unreachable_arc(&self) -> f64 {
        (360.0 - self.span()).max(0.0)
    }

    fn phase_bounds(&self) -> (f64, f64) {
        let (a, b) = (self.first().phase, self.last().phase);
        (a.min(b), a.max(b))
    }

    /// Whether `target` (any representation, degrees) lies on the reachable arc.
    pub fn is_reachable(&self, target: f64) -> bool {
        let (lo, hi) = self.phase_bounds();
        lo + (target - lo).rem_euclid(360.0) <= hi + 1e-9
    }

    /// Linearly interpolated unwrapped phase at a bias inside the table.
    pub fn phase_at_bias(&self, bias: f64) -> Result<f64> {
        let (lo, hi) = (self.first().bias, self.last().bias);
        if !(bias >= lo - 1e-9 && bias <= hi + 1e-9) {
            return Err(RisError::Range {
                what: "bias",
                value: bias,
                min: lo,
                max: hi,
            });
        }
        let i = self
            .entries
            .partition_point(|e| e.bias <= bias)
            .clamp(1, self.entries.len() - 1);
        let (a, b) = (&self.entries[i - 1], &self.entries[i]);
        let t = (bias - a.bias) / (b.bias - a.bias);
        Ok(a.phase + t * (b.phase - a.phase))
    }

    /// Largest phase step between adjacent entries, degrees.
    pub fn max_gap(&self) -> f64 {
        self.entries
            .windows(2)
            .map(|w| (w[1].phase - w[0].phase).abs())
            .fold(0.0, f64::max)
    }

    /// Steepest local slope, degrees per volt.
    pub fn max_slope(&self) -> f64 {
        self.entries
            .windows(2)
            .map(|w| ((w[1].phase - w[0].phase) / (w[1].bias - w[0].bias)).abs())
            .fold(0.0, f64::max)
    }

    /// Phase step of the segment containing `bias`.
    pub fn local_gap(&self, bias: f64) -> f64 {
        let i = self
            .entries
            .partition_point(|e| e.bias <= bias)
            .clamp(1, self.entries.len() - 1);
        (self.entries[i].phase - self.entries[i - 1].phase).abs()
    }
}

/// Samples the cell model on `0, step, 2 step, ...` up to the top of the
/// bias range (which is always included).
pub fn build_lut(params: &UnitCellParams, frequency: f64, bias_step: f64) -> Result<PhaseLut> {
    let [lo, hi] = params.varactor.bias_range;
    if !(bias_step > 0.0 && bias_step <= hi - lo) {
        return Err(RisError::Range {
            what: "bias_step",
            value: bias_step,
            min: 0.0,
            max: hi - lo,
        });
    }
    let mut biases = linear_grid(lo, hi, bias_step)?;
    if hi - biases[biases.len() - 1] > 1e-9 {
        biases.push(hi);
    }
    let samples = biases
        .iter()
        .map(|&v| reflection_coefficient(frequency, v, params))
        .collect::<Result<Vec<_>>>()?;
    let wrapped: Vec<f64> = samples.iter().map(|s| s.phase).collect();
    let entries = unwrap_deg(&wrapped)
        .into_iter()
        .zip(&samples)
        .map(|(phase, s)| LutEntry {
            bias: s.bias,
            phase,
            magnitude: s.magnitude,
        })
        .collect();
    PhaseLut::new(frequency, entries)
}

/// Bias whose interpolated phase is circularly closest to `target`.
///
/// Returns `(bias, achieved_phase)` with the phase wrapped. Targets in the
/// unreachable arc snap to the nearer endpoint; an exact tie goes to the
/// lower-bias endpoint.
pub fn phase_to_voltage(lut: &PhaseLut, target: f64) -> (f64, f64) {
    let (lo, hi) = lut.phase_bounds();
    let shifted = lo + (target - lo).rem_euclid(360.0);
    if shifted <= hi {
        let e = lut.entries();
        for w in e.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            let (pmin, pmax) = (a.phase.min(b.phase), a.phase.max(b.phase));
            if shifted >= pmin && shifted <= pmax {
                let t = (shifted - a.phase) / (b.phase - a.phase);
                return (a.bias + t * (b.bias - a.bias), wrap_deg(shifted));
            }
        }
    }
    let above = shifted - hi;
    let below = lo + 360.0 - shifted;
    let first = lut.first();
    let last = lut.last();
    let (at_hi, at_lo) = if last.phase >= first.phase {
        (last, first)
    } else {
        (first, last)
    };
    let chosen = if (above - below).abs() <= 1e-9 {
        first
    } else if above < below {
        at_hi
    } else {
        at_lo
    };
    (chosen.bias, wrap_deg(chosen.phase))
}

/// A voltage snapped to the 0.01 V programming grid with its DAC code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct QuantizedVoltage {
    pub centivolts: u16,
    pub code: u16,
}

impl QuantizedVoltage {
    pub fn volts(&self) -> f64 {
        f64::from(self.centivolts) / 100.0
    }
}

/// Rounds half away from zero to 0.01 V, then `code = round(v / 14 * 65535)`.
pub fn quantize_voltage(v: f64) -> Result<QuantizedVoltage> {
    if !(0.0..=DAC_FULL_SCALE_V).contains(&v) {
        return Err(RisError::Range {
            what: "voltage",
            value: v,
            min: 0.0,
            max: DAC_FULL_SCALE_V,
        });
    }
    // Ties are judged on the decimal value the caller wrote: 1.005 is
    // 100.49999... cV in binary but must still round up.
    let scaled = v * 100.0;
    let centivolts = if (scaled.fract() - 0.5).abs() < 1e-9 {
        scaled.trunc() + 1.0
    } else {
        scaled.round()
    } as u32;
    // integer half-up on a non-negative value is half-away-from-zero
    let code = (2 * centivolts * u32::from(DAC_MAX_CODE) + FULL_SCALE_CENTIVOLTS)
        / (2 * FULL_SCALE_CENTIVOLTS);
    Ok(QuantizedVoltage {
        centivolts: centivolts as u16,
        code: code as u16,
    })
}

pub fn decode_code(code: u16) -> f64 {
    f64::from(code) / f64::from(DAC_MAX_CODE) * DAC_FULL_SCALE_V
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoltagePlan {
    pub rows: usize,
    pub cols: usize,
    pub frequency: f64,
    /// Row-major grids.
    pub voltages: Vec<QuantizedVoltage>,
    pub required_phase: Vec<f64>,
    pub achieved_phase: Vec<f64>,
    pub phase_error: Vec<f64>,
}

impl VoltagePlan {
    pub fn volts(&self, row: usize, col: usize) -> f64 {
        self.voltages[row * self.cols + col].volts()
    }

    pub fn dac_codes(&self) -> Vec<u16> {
        self.voltages.iter().map(|q| q.code).collect()
    }

    /// Plan with every cell at the same voltage.
    pub fn uniform(rows: usize, cols: usize, frequency: f64, v: f64) -> Result<Self> {
        let q = quantize_voltage(v)?;
        let n = rows * cols;
        Ok(Self {
            rows,
            cols,
            frequency,
            voltages: vec![q; n],
            required_phase: vec![0.0; n],
            achieved_phase: vec![0.0; n],
            phase_error: vec![0.0; n],
        })
    }

    /// Writes `row,col,voltage_v,dac_code,required_phase_deg,achieved_phase_deg,phase_error_deg`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(
            out,
            "row,col,voltage_v,dac_code,required_phase_deg,achieved_phase_deg,phase_error_deg"
        )?;
        for r in 0..self.rows {
            for c in 0..self.cols {
                let i = r * self.cols + c;
                let q = self.voltages[i];
                writeln!(
                    out,
                    "{r},{c},{}.{:02},{},{:.6},{:.6},{:.6}",
                    q.centivolts / 100,
                    q.centivolts % 100,
                    q.code,
                    self.required_phase[i],
                    self.achieved_phase[i],
                    self.phase_error[i]
                )?;
            }
        }
        Ok(())
    }
}

pub fn plan_voltages(profile: &PhaseProfile, lut: &PhaseLut) -> Result<VoltagePlan> {
    let tol = 1e-9 * profile.frequency.abs().max(1.0);
    if (profile.frequency - lut.frequency()).abs() > tol {
        return Err(RisError::Validation(format!(
            "profile frequency {} Hz does not match LUT frequency {} Hz",
            profile.frequency,
            lut.frequency()
        )));
    }
    let n = profile.required_phase.len();
    let mut plan = VoltagePlan {
        rows: profile.layout.rows,
        cols: profile.layout.cols,
        frequency: profile.frequency,
        voltages: Vec::with_capacity(n),
        required_phase: profile.required_phase.clone(),
        achieved_phase: Vec::with_capacity(n),
        phase_error: Vec::with_capacity(n),
    };
    let (lut_lo, lut_hi) = (lut.first().bias, lut.last().bias);
    for &required in &profile.required_phase {
        let (bias, _) = phase_to_voltage(lut, required);
        let q = quantize_voltage(bias.clamp(0.0, DAC_FULL_SCALE_V))?;
        let achieved = wrap_deg(lut.phase_at_bias(q.volts().clamp(lut_lo, lut_hi))?);
        plan.voltages.push(q);
        plan.achieved_phase.push(achieved);
        plan.phase_error.push(circular_diff_deg(achieved, required));
    }
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_lut() -> PhaseLut {
        // 310 deg span, rising
        PhaseLut::new(
            6.1e9,
            vec![
                LutEntry {
                    bias: 0.0,
                    phase: -155.0,
                    magnitude: 0.9,
                },
                LutEntry {
                    bias: 7.0,
                    phase: 0.0,
                    magnitude: 0.8,
                },
                LutEntry {
                    bias: 14.0,
                    phase: 155.0,
                    magnitude: 0.9,
                },
            ],
        )
        .unwrap()
    }

    #[test]
    fn quantize_examples() {
        assert_eq!(
            quantize_voltage(0.0).unwrap(),
            QuantizedVoltage {
                centivolts: 0,
                code: 0
            }
        );
        let full = quantize_voltage(14.0).unwrap();
        assert_eq!((full.volts(), full.code), (14.0, 65535));
        assert_eq!(quantize_voltage(7.0).unwrap().code, 32768);
        assert_eq!(quantize_voltage(3.14259).unwrap().centivolts, 314);
        assert_eq!(quantize_voltage(0.125).unwrap().centivolts, 13);
        assert!(quantize_voltage(14.01).is_err());
        assert!(quantize_voltage(-0.001).is_err());
    }

    #[test]
    fn exact_entry_phase_returns_its_bias() {
        let lut = toy_lut();
        let (v, achieved) = phase_to_voltage(&lut, 0.0);
        assert!((v - 7.0).abs() < 1e-12);
        assert_eq!(achieved, 0.0);
        let (v, achieved) = phase_to_voltage(&lut, 155.0);
        assert!((v - 14.0).abs() < 1e-12);
        assert!((achieved - 155.0).abs() < 1e-12);
    }

    #[test]
    fn interpolates_between_entries() {
        let (v, a) = phase_to_voltage(&toy_lut(), 77.5);
        assert!((v - 10.5).abs() < 1e-12);
        assert!((a - 77.5).abs() < 1e-12);
    }

    #[test]
    fn unreachable_arc_snaps_to_nearer_endpoint() {
        let lut = toy_lut();
        assert!((lut.unreachable_arc() - 50.0).abs() < 1e-12);
        // midpoint of the dead zone is 180: tie -> lower bias
        let (v, a) = phase_to_voltage(&lut, 180.0);
        assert_eq!(v, 0.0);
        assert_eq!(a, -155.0);
        let (v, _) = phase_to_voltage(&lut, 170.0);
        assert_eq!(v, 14.0);
        let (v, _) = phase_to_voltage(&lut, -170.0);
        assert_eq!(v, 0.0);
    }

    #[test]
    fn falling_lut_tie_still_prefers_lower_bias() {
        let lut = PhaseLut::new(
            6.1e9,
            vec![
                LutEntry {
                    bias: 0.0,
                    phase: 155.0,
                    magnitude: 1.0,
                },
                LutEntry {
                    bias: 14.0,
                    phase: -155.0,
                    magnitude: 1.0,
                },
            ],
        )
        .unwrap();
        assert_eq!(phase_to_voltage(&lut, 180.0).0, 0.0);
        assert_eq!(phase_to_voltage(&lut, 170.0).0, 0.0);
        assert_eq!(phase_to_voltage(&lut, -170.0).0, 14.0);
    }

    #[test]
    fn rejects_non_monotone_tables() {
        let err = PhaseLut::new(
            5.9e9,
            vec![
                LutEntry {
                    bias: 0.0,
                    phase: 0.0,
                    magnitude: 1.0,
                },
                LutEntry {
                    bias: 1.0,
                    phase: 10.0,
                    magnitude: 1.0,
                },
                LutEntry {
                    bias: 2.0,
                    phase: 5.0,
                    magnitude: 1.0,
                },
            ],
        )
        .unwrap_err();
        assert!(err.to_string().contains("5900000000"));
        assert!(PhaseLut::new(6e9, vec![]).is_err());
    }

    #[test]
    fn coarse_lut_has_two_entries() {
        let lut = build_lut(&UnitCellParams::default(), 6.1e9, 14.0).unwrap();
        assert_eq!(lut.entries().len(), 2);
        assert_eq!(lut.entries()[0].bias, 0.0);
        assert_eq!(lut.entries()[1].bias, 14.0);
        assert!(build_lut(&UnitCellParams::default(), 6.1e9, 0.0).is_err());
    }

    #[test]
    fn odd_step_still_ends_at_full_bias() {
        let lut = build_lut(&UnitCellParams::default(), 6.1e9, 0.3).unwrap();
        assert_eq!(lut.entries().last().unwrap().bias, 14.0);
    }

    #[test]
    fn decode_is_within_half_lsb() {
        for cv in 0..=1400u32 {
            let q = quantize_voltage(f64::from(cv) / 100.0).unwrap();
            assert!((decode_code(q.code) - q.volts()).abs() <= 14.0 / (2.0 * 65535.0) + 1e-12);
        }
    }
}
