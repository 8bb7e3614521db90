//! Degree-based phase helpers shared by every module.

/// Wrap an angle in degrees into (-180, 180].
pub fn wrap_deg(deg: f64) -> f64 {
    let mut w = deg.rem_euclid(360.0);
    if w > 180.0 {
        w -= 360.0;
    }
    // rem_euclid maps -180 to 180, which is already the closed end
    w
}

/// Signed circular difference `a - b`, wrapped into (-180, 180].
pub fn circular_diff_deg(a: f64, b: f64) -> f64 {
    wrap_deg(a - b)
}

/// Unwrap a sequence of phases (degrees) starting from the first sample.
pub fn unwrap_deg(phases: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(phases.len());
    let mut offset = 0.0;
    for (i, &p) in phases.iter().enumerate() {
        if i > 0 {
            let prev = phases[i - 1];
            let d = p - prev;
            if d > 180.0 {
                offset -= 360.0;
            } else if d < -180.0 {
                offset += 360.0;
            }
        }
        out.push(p + offset);
    }
    out
}
