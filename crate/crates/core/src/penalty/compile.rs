//! Lowering of simplified blocks to native blocks.
//!
//! Count blocks use a padded three-knot (or `2R+3`-knot) table whose end
//! functions reproduce the boundary law exactly. Fraction blocks use the
//! same layout with a knot step of [`FRACTION_STEP`]; they are exact at every
//! occupancy on that grid and, for LINEAR boundaries, everywhere.

use super::original::{Anchor, OriginalPenalty, Selector};
use super::simplified::SimplifiedPenalty;
use super::{Occupancy, PenaltyError, Shape, TOLERANCE};
use crate::penalty::Curve;

/// Knot spacing for fraction anchors.
pub const FRACTION_STEP: f64 = 0.01;

/// Builds the native block equivalent to `p`.
pub fn compile_penalty(p: &SimplifiedPenalty) -> Result<OriginalPenalty, PenaltyError> {
    p.validate()?;
    let s = p.strength;
    let (anchor, penalties, before_fn, after_fn) = match (p.target, p.radius) {
        (Occupancy::Count(t), Occupancy::Count(r)) => {
            let t = t as i64;
            let r = r as i64;
            match p.shape {
                Shape::Above => (
                    Anchor::Absolute { absolute: t, delta_start: -1, delta_end: 1 },
                    vec![0.0, 0.0, s],
                    Curve::Constant,
                    p.boundary,
                ),
                Shape::Below => (
                    Anchor::Absolute { absolute: t, delta_start: -1, delta_end: 1 },
                    vec![s, 0.0, 0.0],
                    p.boundary,
                    Curve::Constant,
                ),
                Shape::Outside => {
                    if t - r < 0 {
                        return Err(PenaltyError::NegativeRange { target: t as f64, radius: r as f64 });
                    }
                    let mut pens = vec![0.0; (2 * r + 3) as usize];
                    pens[0] = s;
                    *pens.last_mut().expect("non-empty") = s;
                    (
                        Anchor::Absolute { absolute: t, delta_start: -(r + 1), delta_end: r + 1 },
                        pens,
                        p.boundary,
                        p.boundary,
                    )
                }
            }
        }
        (Occupancy::Fraction(t), Occupancy::Fraction(r)) => {
            let h = FRACTION_STEP;
            match p.shape {
                Shape::Above => (
                    Anchor::Fraction { fraction: t, fract_delta_start: -h, fract_delta_end: h },
                    vec![0.0, 0.0, p.boundary.grow(s, h)],
                    Curve::Constant,
                    p.boundary,
                ),
                Shape::Below => (
                    Anchor::Fraction { fraction: t, fract_delta_start: -h, fract_delta_end: h },
                    vec![p.boundary.grow(s, h), 0.0, 0.0],
                    p.boundary,
                    Curve::Constant,
                ),
                Shape::Outside => {
                    if t - r < -TOLERANCE {
                        return Err(PenaltyError::NegativeRange { target: t, radius: r });
                    }
                    let m = if r == 0.0 { 0 } else { ((2.0 * r) / h - TOLERANCE).ceil() as usize };
                    let step = if m == 0 { h } else { 2.0 * r / m as f64 };
                    let edge = p.boundary.grow(s, step);
                    let mut pens = vec![0.0; m + 3];
                    pens[0] = edge;
                    pens[m + 2] = edge;
                    (
                        Anchor::Fraction { fraction: t, fract_delta_start: -(r + step), fract_delta_end: r + step },
                        pens,
                        p.boundary,
                        p.boundary,
                    )
                }
            }
        }
        _ => return Err(PenaltyError::KindMismatch { expected: p.target.kind(), got: p.radius.kind() }),
    };
    Ok(OriginalPenalty {
        selector: Selector::Types(p.types.clone()),
        anchor,
        penalties,
        before_fn,
        after_fn,
        comment: p.comment.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::penalty::{emit_original, PenaltyFunction};
    use crate::residue::ResidueTypeSet;

    fn simple(shape: Shape, t: u64, r: u64, boundary: Curve, s: f64) -> SimplifiedPenalty {
        SimplifiedPenalty {
            types: ResidueTypeSet::parse("P").unwrap(),
            shape,
            target: Occupancy::Count(t),
            radius: Occupancy::Count(r),
            boundary,
            strength: s,
            comment: None,
        }
    }

    #[test]
    fn above_layout() {
        let o = compile_penalty(&simple(Shape::Above, 5, 0, Curve::Linear, 10.0)).unwrap();
        assert_eq!(o.anchor, Anchor::Absolute { absolute: 5, delta_start: -1, delta_end: 1 });
        assert_eq!(o.penalties, vec![0.0, 0.0, 10.0]);
        assert_eq!((o.before_fn, o.after_fn), (Curve::Constant, Curve::Linear));
    }

    #[test]
    fn below_layout() {
        let o = compile_penalty(&simple(Shape::Below, 5, 0, Curve::Constant, 100.0)).unwrap();
        assert_eq!(o.penalties, vec![100.0, 0.0, 0.0]);
        assert_eq!((o.before_fn, o.after_fn), (Curve::Constant, Curve::Constant));
    }

    #[test]
    fn outside_layout() {
        let o = compile_penalty(&simple(Shape::Outside, 7, 3, Curve::Quadratic, 10.0)).unwrap();
        assert_eq!(o.anchor, Anchor::Absolute { absolute: 7, delta_start: -4, delta_end: 4 });
        assert_eq!(o.penalties, vec![10.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 10.0]);
        assert_eq!((o.before_fn, o.after_fn), (Curve::Quadratic, Curve::Quadratic));
        assert_eq!(o.energy(Occupancy::Count(11)).unwrap(), 10.0);
        assert!(emit_original(&o).contains("PENALTIES 10 0 0 0 0 0 0 0 10\n"));
    }

    #[test]
    fn negative_range_rejected() {
        let p = simple(Shape::Outside, 2, 3, Curve::Linear, 1.0);
        assert!(matches!(compile_penalty(&p), Err(PenaltyError::NegativeRange { .. })));
    }

    #[test]
    fn fraction_outside_spacing() {
        let mut p = simple(Shape::Outside, 0, 0, Curve::Linear, 4.0);
        p.target = Occupancy::Fraction(0.3);
        p.radius = Occupancy::Fraction(0.05);
        let o = compile_penalty(&p).unwrap();
        assert_eq!(o.penalties.len(), 13);
        let knots = o.knots();
        assert!((knots[1] - 0.25).abs() < 1e-12);
        assert!((knots[11] - 0.35).abs() < 1e-12);
    }
}
