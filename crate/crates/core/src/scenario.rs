//! End-to-end pipelines behind the command line: cell sweeps and steered beams.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::circuit::{
    linear_grid, phase_span, sweep_response, ReflectionTable, UnitCellParams, BAND_HZ,
    CENTER_FREQUENCY_HZ,
};
use crate::controller::{apply_frames, encode_plan, write_capture, ControlFrame, DacBankState};
use crate::error::{Result, RisError};
use crate::mapping::{build_lut, plan_voltages, PhaseLut, VoltagePlan, VOLTAGE_STEP_V};
use crate::radiation::{
    compute_pattern, BeamMetrics, Excitation, ObservationGrid, RadiationPattern,
};
use crate::synthesis::{synthesize_profile, ArrayLayout, BeamSpec, FeedSpec, PhaseProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanMode {
    /// Pattern from the synthesized phases with unit reflection.
    Ideal,
    /// Pattern from the cell model at the quantized bias plan.
    Quantized,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub frequency_hz: f64,
    pub theta_deg: f64,
    pub phi_deg: f64,
    pub feed: FeedSpec,
    pub mode: PlanMode,
    pub layout: ArrayLayout,
    pub grid: ObservationGrid,
}

impl ScenarioSpec {
    /// Prototype defaults: 10 x 10 board, horn at 450 mm, quantized plan,
    /// -90..90 deg cut plus a 2 deg full sphere for directivity.
    pub fn new(frequency_hz: f64, theta_deg: f64) -> Self {
        Self {
            frequency_hz,
            theta_deg,
            phi_deg: 0.0,
            feed: FeedSpec::default(),
            mode: PlanMode::Quantized,
            layout: ArrayLayout::default(),
            grid: ObservationGrid::default().with_sphere(2.0),
        }
    }

    pub fn dir_name(&self) -> String {
        scenario_dir_name(self.frequency_hz, self.theta_deg)
    }
}

/// `f<GHz>_t<deg>`, e.g. `f6.1_t15`.
pub fn scenario_dir_name(frequency_hz: f64, theta_deg: f64) -> String {
    let ghz = (frequency_hz / 1e9 * 1e6).round() / 1e6;
    let theta = (theta_deg * 1e6).round() / 1e6;
    format!("f{ghz}_t{theta}")
}

#[derive(Debug, Clone)]
pub struct BeamArtifacts {
    pub spec: ScenarioSpec,
    pub profile: PhaseProfile,
    pub lut: PhaseLut,
    pub plan: VoltagePlan,
    pub frames: Vec<ControlFrame>,
    pub bank: DacBankState,
    pub pattern: RadiationPattern,
    pub metrics: BeamMetrics,
}

/// Synthesis, bias planning, frame encoding, bank readback, pattern, metrics.
pub fn run_beam(spec: &ScenarioSpec, params: &UnitCellParams) -> Result<BeamArtifacts> {
    let beam = BeamSpec::new(spec.theta_deg, spec.phi_deg, spec.frequency_hz)
        .map_err(RisError::in_stage("synthesis"))?;
    let profile = synthesize_profile(&beam, &spec.feed, &spec.layout)
        .map_err(RisError::in_stage("synthesis"))?;
    let lut = build_lut(params, spec.frequency_hz, VOLTAGE_STEP_V)
        .map_err(RisError::in_stage("mapping"))?;
    let plan = plan_voltages(&profile, &lut).map_err(RisError::in_stage("mapping"))?;
    let frames = encode_plan(&plan).map_err(RisError::in_stage("controller"))?;
    let bank =
        apply_frames(&frames, &DacBankState::new()).map_err(RisError::in_stage("controller"))?;
    if bank.cell_codes() != plan.dac_codes() {
        return Err(RisError::in_stage("controller")(RisError::Validation(
            "DAC readback does not reproduce the planned codes".into(),
        )));
    }
    let excitation = match spec.mode {
        PlanMode::Ideal => Excitation::Ideal(&profile),
        PlanMode::Quantized => Excitation::Quantized(&plan),
    };
    let pattern = compute_pattern(excitation, &spec.layout, &spec.feed, params, &spec.grid)
        .map_err(RisError::in_stage("radiation"))?;
    let metrics = BeamMetrics::from_pattern(&pattern).map_err(RisError::in_stage("metrics"))?;
    Ok(BeamArtifacts {
        spec: spec.clone(),
        profile,
        lut,
        plan,
        frames,
        bank,
        pattern,
        metrics,
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Writes `profile.csv`, `plan.csv`, `pattern.csv`, `metrics.txt` and
/// `frames.bin` into `<out>/f<GHz>_t<deg>/`; returns that directory.
pub fn write_beam_artifacts(art: &BeamArtifacts, out: &Path) -> Result<PathBuf> {
    let dir = out.join(art.spec.dir_name());
    fs::create_dir_all(&dir)?;
    let mut w = create(&dir.join("profile.csv"))?;
    art.profile.write_csv(&mut w)?;
    w.flush()?;
    let mut w = create(&dir.join("plan.csv"))?;
    art.plan.write_csv(&mut w)?;
    w.flush()?;
    let mut w = create(&dir.join("pattern.csv"))?;
    art.pattern.write_csv(&mut w)?;
    w.flush()?;
    fs::write(dir.join("metrics.txt"), art.metrics.to_text())?;
    let raw: Vec<Vec<u8>> = art.frames.iter().map(ControlFrame::to_bytes).collect();
    let mut w = create(&dir.join("frames.bin"))?;
    write_capture(&raw, &mut w)?;
    w.flush()?;
    Ok(dir)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSpec {
    pub f_start_hz: f64,
    pub f_stop_hz: f64,
    pub f_step_hz: f64,
    pub v_start: f64,
    pub v_stop: f64,
    pub v_step: f64,
}

impl Default for SweepSpec {
    /// 5.8-6.4 GHz in 10 MHz steps, 0-14 V in 0.1 V steps.
    fn default() -> Self {
        Self {
            f_start_hz: BAND_HZ.0,
            f_stop_hz: BAND_HZ.1,
            f_step_hz: 10e6,
            v_start: 0.0,
            v_stop: 14.0,
            v_step: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSummary {
    /// Frequency the span is reported at: the center frequency if sampled,
    /// otherwise the nearest sampled frequency.
    pub span_frequency_hz: f64,
    pub phase_span_deg: f64,
    /// Minimum |Gamma| over sampled frequencies inside the band (all
    /// frequencies if none fall inside).
    pub min_magnitude: f64,
}

impl SweepSummary {
    pub fn to_text(&self) -> String {
        format!(
            "span_frequency_hz = {}\nphase_span_deg = {:.6}\nmin_magnitude = {:.6}\n",
            self.span_frequency_hz, self.phase_span_deg, self.min_magnitude
        )
    }
}

pub fn run_sweep(
    params: &UnitCellParams,
    spec: &SweepSpec,
) -> Result<(ReflectionTable, SweepSummary)> {
    let freqs = linear_grid(spec.f_start_hz, spec.f_stop_hz, spec.f_step_hz)?;
    let biases = linear_grid(spec.v_start, spec.v_stop, spec.v_step)?;
    let table = sweep_response(&freqs, &biases, params)?;
    let span_frequency_hz = *freqs
        .iter()
        .min_by(|a, b| {
            (*a - CENTER_FREQUENCY_HZ)
                .abs()
                .total_cmp(&(*b - CENTER_FREQUENCY_HZ).abs())
        })
        .expect("non-empty grid");
    let phase_span_deg = phase_span(&table, span_frequency_hz)?;
    let in_band = |f: f64| f >= BAND_HZ.0 - 1.0 && f <= BAND_HZ.1 + 1.0;
    let any_in_band = freqs.iter().any(|&f| in_band(f));
    let min_magnitude = table
        .samples()
        .iter()
        .filter(|s| !any_in_band || in_band(s.frequency))
        .map(|s| s.magnitude)
        .fold(f64::INFINITY, f64::min);
    Ok((
        table,
        SweepSummary {
            span_frequency_hz,
            phase_span_deg,
            min_magnitude,
        },
    ))
}

/// Writes `sweep.csv` and `summary.txt` into `out`.
pub fn write_sweep(table: &ReflectionTable, summary: &SweepSummary, out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    let mut w = create(&out.join("sweep.csv"))?;
    table.write_csv(&mut w)?;
    w.flush()?;
    fs::write(out.join("summary.txt"), summary.to_text())?;
    Ok(())
}
