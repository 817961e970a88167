mod common;

use common::penalty_oracle::{original_energy, simplified_energy};
use proptest::prelude::*;
use rsgym::penalty::{
    compile_penalty, emit_original, emit_simplified, parse_original, parse_simplified, verify_equivalence, Anchor, Curve,
    Domain, Occupancy, OccupancyKind, OriginalPenalty, PenaltyFunction, Selector, Shape, SimplifiedPenalty,
};
use rsgym::residue::ResidueTypeSet;

fn shape() -> impl Strategy<Value = Shape> {
    prop_oneof![Just(Shape::Above), Just(Shape::Below), Just(Shape::Outside)]
}

fn curve() -> impl Strategy<Value = Curve> {
    prop_oneof![Just(Curve::Constant), Just(Curve::Linear), Just(Curve::Quadratic)]
}

fn types() -> impl Strategy<Value = ResidueTypeSet> {
    prop::sample::subsequence(vec!["A", "G", "P", "L", "TRF", "W"], 1..3)
        .prop_map(|codes| ResidueTypeSet::parse(&codes.join(",")).unwrap())
}

fn strength() -> impl Strategy<Value = f64> {
    (1u32..200, prop::bool::ANY).prop_map(|(s, half)| s as f64 + if half { 0.5 } else { 0.0 })
}

/// Count and fraction blocks on the 0.01 grid, every shape and boundary.
fn simplified() -> impl Strategy<Value = SimplifiedPenalty> {
    (types(), shape(), curve(), strength(), prop::bool::ANY, 0u32..=100, 0u32..=100).prop_map(
        |(types, shape, boundary, strength, fraction, a, b)| {
            let (t, r) = if shape == Shape::Outside { (a.max(b), a.min(b).min(a.max(b))) } else { (a, b % 7) };
            let r = if shape == Shape::Outside { r.min(t) } else { r };
            let (target, radius) = if fraction {
                (Occupancy::Fraction(t as f64 / 100.0), Occupancy::Fraction(r as f64 / 100.0))
            } else {
                (Occupancy::Count((t % 40) as u64), Occupancy::Count((r % 40).min(t % 40) as u64))
            };
            SimplifiedPenalty { types, shape, target, radius, boundary, strength, comment: None }
        },
    )
}

fn domain(p: &SimplifiedPenalty) -> Domain {
    Domain::default_for(p.target.kind())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn compiled_blocks_are_equivalent(p in simplified()) {
        let o = compile_penalty(&p).unwrap();
        let report = verify_equivalence(&p, &o, &domain(&p)).unwrap();
        prop_assert!(report.equivalent, "{:?}\n{}", report.first_divergence, emit_original(&o));
        for x in domain(&p).points {
            let expected = simplified_energy(&p, x.value());
            prop_assert!((original_energy(&o, x.value()) - expected).abs() <= 1e-9);
            prop_assert!((p.energy(x).unwrap() - expected).abs() <= 1e-9);
        }
    }

    #[test]
    fn zero_inside_and_non_negative(p in simplified()) {
        let o = compile_penalty(&p).unwrap();
        let (lo, hi) = p.range();
        for x in domain(&p).points {
            let (es, eo) = (p.energy(x).unwrap(), o.energy(x).unwrap());
            prop_assert!(es >= 0.0 && eo >= -1e-9);
            if x.value() >= lo - 1e-9 && x.value() <= hi + 1e-9 {
                prop_assert!(es == 0.0 && eo.abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn monotone_by_shape(p in simplified()) {
        let o = compile_penalty(&p).unwrap();
        let pts = domain(&p).points;
        let (lo, hi) = p.range();
        for f in [&p as &dyn PenaltyFunction, &o as &dyn PenaltyFunction] {
            let vals: Vec<(f64, f64)> = pts.iter().map(|x| (x.value(), f.energy(*x).unwrap())).collect();
            for w in vals.windows(2) {
                let ((x0, e0), (x1, e1)) = (w[0], w[1]);
                let rising = e1 >= e0 - 1e-9;
                let falling = e1 <= e0 + 1e-9;
                match p.shape {
                    Shape::Above => prop_assert!(rising),
                    Shape::Below => prop_assert!(falling),
                    Shape::Outside => {
                        if x1 <= lo + 1e-9 { prop_assert!(falling); }
                        if x0 >= hi - 1e-9 { prop_assert!(rising); }
                    }
                }
            }
        }
    }

    #[test]
    fn strength_scales_linear_and_constant(p in simplified()) {
        prop_assume!(p.boundary != Curve::Quadratic);
        let mut doubled = p.clone();
        doubled.strength *= 2.0;
        let od = compile_penalty(&doubled).unwrap();
        let o = compile_penalty(&p).unwrap();
        for x in domain(&p).points {
            let e = p.energy(x).unwrap();
            if e > 0.0 {
                prop_assert!((doubled.energy(x).unwrap() - 2.0 * e).abs() <= 1e-9);
                prop_assert!((od.energy(x).unwrap() - 2.0 * o.energy(x).unwrap()).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn simplified_text_round_trips(p in simplified()) {
        prop_assert_eq!(parse_simplified(&emit_simplified(&p)).unwrap(), vec![p]);
    }

    #[test]
    fn original_text_round_trips(o in original()) {
        let text = emit_original(&o);
        prop_assert_eq!(parse_original(&text).unwrap(), vec![o]);
    }
}

fn original() -> impl Strategy<Value = OriginalPenalty> {
    let absolute = (0i64..30, -6i64..=0, 0i64..=6).prop_flat_map(|(a, s, e)| {
        let n = (e - s + 1) as usize;
        (Just(Anchor::Absolute { absolute: a, delta_start: s, delta_end: e }), prop::collection::vec(-500i32..500, n))
    });
    let fraction = (0u32..=100, 1u32..20, 1u32..20, 2usize..8).prop_flat_map(|(f, s, e, n)| {
        (
            Just(Anchor::Fraction {
                fraction: f as f64 / 100.0,
                fract_delta_start: -(s as f64) / 100.0,
                fract_delta_end: e as f64 / 100.0,
            }),
            prop::collection::vec(-500i32..500, n),
        )
    });
    (prop_oneof![absolute, fraction], types(), curve(), curve(), prop::bool::ANY).prop_filter_map(
        "single knot needs constant ends",
        |((anchor, pens), types, before_fn, after_fn, halves)| {
            let penalties: Vec<f64> =
                pens.iter().map(|&v| v as f64 / if halves { 4.0 } else { 1.0 }).collect();
            if penalties.len() == 1 && (before_fn != Curve::Constant || after_fn != Curve::Constant) {
                return None;
            }
            Some(OriginalPenalty { selector: Selector::Types(types), anchor, penalties, before_fn, after_fn, comment: None })
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn original_eval_matches_oracle(o in original()) {
        let pts = Domain::default_for(o.anchor.kind()).points;
        for x in pts {
            let want = original_energy(&o, x.value());
            let got = o.energy(x).unwrap();
            prop_assert!((got - want).abs() <= 1e-6 * want.abs().max(1.0), "x={} want={} got={}", x, want, got);
        }
    }
}

#[test]
fn kinds_survive_compilation() {
    let p = &parse_simplified(
        "PENALTY_DEFINITION\nTYPE W\nSHAPE OUTSIDE\nTARGET 0.1\nRADIUS 0.05\nBOUNDARY QUADRATIC\nSTRENGTH 3\nEND_PENALTY_DEFINITION",
    )
    .unwrap()[0];
    let o = compile_penalty(p).unwrap();
    assert_eq!(o.anchor.kind(), OccupancyKind::Fraction);
    assert!(verify_equivalence(p, &o, &Domain::fractions(100)).unwrap().equivalent);
}
