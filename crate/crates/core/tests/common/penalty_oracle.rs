//! Independent reference evaluators written directly from the block definitions.

use rsgym::penalty::{Anchor, Curve, OriginalPenalty, Shape, SimplifiedPenalty};

/// Simplified block energy at `x`: zero inside the range, else CONSTANT S,
/// LINEAR S*d, or QUADRATIC S*d^2 where d is the distance to the nearest edge.
pub fn simplified_energy(p: &SimplifiedPenalty, x: f64) -> f64 {
    let t = p.target.value();
    let r = p.radius.value();
    let eps = 1e-9;
    let d = match p.shape {
        Shape::Above => (x - t).max(0.0),
        Shape::Below => (t - x).max(0.0),
        Shape::Outside => {
            if x < t - r {
                t - r - x
            } else if x > t + r {
                x - t - r
            } else {
                0.0
            }
        }
    };
    if d <= eps {
        return 0.0;
    }
    let s = p.strength;
    match p.boundary {
        Curve::Constant => s,
        Curve::Linear => s * d,
        Curve::Quadratic => s * d * d,
    }
}

/// Native block energy at `x`, found by locating the bracketing knots.
pub fn original_energy(p: &OriginalPenalty, x: f64) -> f64 {
    let v = &p.penalties;
    let n = v.len();
    let (lo, hi) = match p.anchor {
        Anchor::Absolute { absolute, delta_start, delta_end } => {
            ((absolute + delta_start) as f64, (absolute + delta_end) as f64)
        }
        Anchor::Fraction { fraction, fract_delta_start, fract_delta_end } => {
            (fraction + fract_delta_start, fraction + fract_delta_end)
        }
    };
    if n == 1 {
        return v[0];
    }
    let h = (hi - lo) / (n as f64 - 1.0);
    let knot = |i: usize| lo + h * i as f64;
    if x < lo - 1e-9 {
        let dx = knot(1) - x;
        return match p.before_fn {
            Curve::Constant => v[0],
            Curve::Linear => v[0] - (v[1] - v[0]) * (lo - x) / h,
            Curve::Quadratic => v[1] + (v[0] - v[1]) * (dx / h) * (dx / h),
        };
    }
    if x > hi + 1e-9 {
        let dx = x - knot(n - 2);
        return match p.after_fn {
            Curve::Constant => v[n - 1],
            Curve::Linear => v[n - 1] + (v[n - 1] - v[n - 2]) * (x - hi) / h,
            Curve::Quadratic => v[n - 2] + (v[n - 1] - v[n - 2]) * (dx / h) * (dx / h),
        };
    }
    for i in 0..n - 1 {
        let (a, b) = (knot(i), knot(i + 1));
        if x <= b + 1e-12 || i == n - 2 {
            let w = ((x - a) / (b - a)).clamp(0.0, 1.0);
            return v[i] * (1.0 - w) + v[i + 1] * w;
        }
    }
    unreachable!()
}
