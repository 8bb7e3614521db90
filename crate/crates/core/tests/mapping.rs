use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ris_core::angle::{circular_diff_deg, wrap_deg};
use ris_core::circuit::{reflection_coefficient, UnitCellParams};
use ris_core::mapping::{
    build_lut, decode_code, phase_to_voltage, plan_voltages, quantize_voltage, QuantizedVoltage,
};
use ris_core::synthesis::{synthesize_profile, ArrayLayout, BeamSpec, FeedSpec};

const F: f64 = 6.1e9;

#[test]
fn lut_shapes() {
    let p = UnitCellParams::default();
    let coarse = build_lut(&p, F, 14.0).unwrap();
    let b: Vec<f64> = coarse.entries().iter().map(|e| e.bias).collect();
    assert_eq!(b, vec![0.0, 14.0]);

    let lut = build_lut(&p, F, 0.1).unwrap();
    assert_eq!(lut.entries().len(), 141);
    assert!(lut.span() >= 310.0);
    for e in lut.entries() {
        let s = reflection_coefficient(F, e.bias, &p).unwrap();
        assert!(circular_diff_deg(wrap_deg(e.phase), s.phase).abs() < 1e-12);
        assert_eq!(e.magnitude, s.magnitude);
    }
}

#[test]
fn exact_entry_and_dead_zone_tie() {
    let lut = build_lut(&UnitCellParams::default(), F, 0.1).unwrap();
    let e = lut.entries()[37];
    let (bias, achieved) = phase_to_voltage(&lut, wrap_deg(e.phase));
    assert!((bias - e.bias).abs() < 1e-9);
    assert!(circular_diff_deg(achieved, wrap_deg(e.phase)).abs() < 1e-9);

    // middle of the unreachable arc is equidistant from both ends
    let first = lut.entries()[0];
    let last = lut.entries()[140];
    let (hi, lo) = if last.phase > first.phase {
        (last.phase, first.phase)
    } else {
        (first.phase, last.phase)
    };
    let mid = wrap_deg(hi + (360.0 - (hi - lo)) / 2.0);
    assert!(!lut.is_reachable(mid));
    let (bias, _) = phase_to_voltage(&lut, mid);
    assert_eq!(bias, 0.0);
}

#[test]
fn inversion_reevaluated_through_cell_model() {
    let p = UnitCellParams::default();
    let lut = build_lut(&p, F, 0.1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut checked = 0;
    while checked < 100 {
        let target: f64 = rng.gen_range(-180.0..180.0);
        if !lut.is_reachable(target) {
            continue;
        }
        let (bias, predicted) = phase_to_voltage(&lut, target);
        assert!(circular_diff_deg(predicted, target).abs() < 1e-9);
        let actual = reflection_coefficient(F, bias, &p).unwrap().phase;
        let err = circular_diff_deg(actual, target).abs();
        assert!(err <= lut.local_gap(bias), "target {target}: err {err}");
        checked += 1;
    }
}

#[test]
fn quantization_examples() {
    assert_eq!(
        quantize_voltage(0.0).unwrap(),
        QuantizedVoltage {
            centivolts: 0,
            code: 0
        }
    );
    assert_eq!(
        quantize_voltage(14.0).unwrap(),
        QuantizedVoltage {
            centivolts: 1400,
            code: 65535
        }
    );
    assert_eq!(quantize_voltage(7.0).unwrap().code, 32768);
    assert_eq!(quantize_voltage(1.005).unwrap().centivolts, 101);
    assert!(quantize_voltage(-0.01).is_err());
    assert!(quantize_voltage(14.01).is_err());
}

#[test]
fn broadside_plan_is_uniform() {
    let lut = build_lut(&UnitCellParams::default(), F, 0.1).unwrap();
    let prof = synthesize_profile(
        &BeamSpec::new(0.0, 0.0, F).unwrap(),
        &FeedSpec::normal_incidence(),
        &ArrayLayout::default(),
    )
    .unwrap();
    let plan = plan_voltages(&prof, &lut).unwrap();
    assert!(plan.voltages.iter().all(|q| *q == plan.voltages[0]));
}

#[test]
fn steered_plan_error_bound() {
    let lut = build_lut(&UnitCellParams::default(), F, 0.1).unwrap();
    let prof = synthesize_profile(
        &BeamSpec::new(15.0, 0.0, F).unwrap(),
        &FeedSpec::default(),
        &ArrayLayout::default(),
    )
    .unwrap();
    let plan = plan_voltages(&prof, &lut).unwrap();
    let bound = lut.max_gap() / 2.0 + lut.max_slope() * 0.005;
    for (i, (&req, &err)) in plan
        .required_phase
        .iter()
        .zip(&plan.phase_error)
        .enumerate()
    {
        if lut.is_reachable(req) {
            assert!(err.abs() <= bound + 1e-9, "cell {i}: {err} > {bound}");
        } else {
            assert!(err.abs() <= lut.unreachable_arc() / 2.0 + lut.max_slope() * 0.005 + 1e-9);
        }
        assert!(plan.voltages[i].centivolts <= 1400);
    }
}

#[test]
fn refinement_below_programming_step_is_stable() {
    let p = UnitCellParams::default();
    let prof = synthesize_profile(
        &BeamSpec::new(15.0, 0.0, F).unwrap(),
        &FeedSpec::default(),
        &ArrayLayout::default(),
    )
    .unwrap();
    let a = plan_voltages(&prof, &build_lut(&p, F, 0.01).unwrap()).unwrap();
    let b = plan_voltages(&prof, &build_lut(&p, F, 0.0025).unwrap()).unwrap();
    let lut = build_lut(&p, F, 0.01).unwrap();
    let slack = lut.max_slope() * 0.005;
    for i in 0..100 {
        let dv = (i32::from(a.voltages[i].centivolts) - i32::from(b.voltages[i].centivolts)).abs();
        assert!(dv <= 1, "cell {i}: {dv} cV");
        assert!(
            circular_diff_deg(a.achieved_phase[i], b.achieved_phase[i]).abs()
                <= 2.0 * slack + lut.max_gap() / 2.0
        );
    }
}

#[test]
fn frequency_mismatch_is_rejected() {
    let lut = build_lut(&UnitCellParams::default(), 6.0e9, 0.1).unwrap();
    let prof = synthesize_profile(
        &BeamSpec::new(15.0, 0.0, F).unwrap(),
        &FeedSpec::default(),
        &ArrayLayout::default(),
    )
    .unwrap();
    assert!(plan_voltages(&prof, &lut).is_err());
}

proptest! {
    #[test]
    fn quantize_idempotent(v in 0.0..=14.0f64) {
        let q = quantize_voltage(v).unwrap();
        prop_assert_eq!(quantize_voltage(q.volts()).unwrap(), q);
    }

    #[test]
    fn codes_monotone(a in 0.0..=14.0f64, b in 0.0..=14.0f64) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(quantize_voltage(lo).unwrap().code <= quantize_voltage(hi).unwrap().code);
    }

    #[test]
    fn decode_within_half_lsb(cv in 0u16..=1400) {
        let q = quantize_voltage(f64::from(cv) / 100.0).unwrap();
        prop_assert_eq!(q.centivolts, cv);
        // exact: |code/65535*14 - cv/100| <= 14/(2*65535)
        prop_assert!((1400 * i64::from(q.code) - 65535 * i64::from(cv)).abs() <= 700);
        prop_assert!((decode_code(q.code) - q.volts()).abs() <= 14.0 / (2.0 * 65535.0) + 1e-12);
    }

    #[test]
    fn inversion_is_sound(target in -180.0..180.0f64) {
        let p = UnitCellParams::default();
        let lut = build_lut(&p, F, 0.1).unwrap();
        let (bias, achieved) = phase_to_voltage(&lut, target);
        prop_assert!((0.0..=14.0).contains(&bias));
        if lut.is_reachable(target) {
            let actual = reflection_coefficient(F, bias, &p).unwrap().phase;
            prop_assert!(circular_diff_deg(actual, target).abs() <= lut.local_gap(bias));
        } else {
            prop_assert!(circular_diff_deg(achieved, target).abs() <= lut.unreachable_arc() / 2.0 + 1e-9);
        }
    }
}
