use num_rational::BigRational;
use num_traits::One;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::error::MkrError;

fn one() -> BigRational {
    BigRational::one()
}

#[test]
fn single_layer_scalar_expansion() {
    let x = symbolic_cross_compress(1, 1).unwrap();
    // variables: v, e, wvv, wev, wve, wee, bv, be
    let n = x.nvars();
    assert_eq!(n, 8);
    assert_eq!(x.v[0].num_terms(), 3);
    assert_eq!(x.v[0].coefficient(&[1, 1, 1, 0, 0, 0, 0, 0]), one());
    assert_eq!(x.v[0].coefficient(&[1, 1, 0, 1, 0, 0, 0, 0]), one());
    assert_eq!(x.v[0].coefficient(&[0, 0, 0, 0, 0, 0, 1, 0]), one());
    assert_eq!(x.e[0].coefficient(&[1, 1, 0, 0, 1, 0, 0, 0]), one());
    assert_eq!(x.e[0].coefficient(&[1, 1, 0, 0, 0, 1, 0, 0]), one());
}

#[test]
fn degrees_double_per_layer() {
    let expected = [(1, 1), (2, 2), (4, 4)];
    for layers in 1..=3 {
        for dim in 1..=2 {
            let r = check_theorem1(layers, dim).unwrap();
            assert!(r.passed, "L={layers} d={dim}: {r:?}");
            let (dv, de) = expected[layers - 1];
            assert_eq!((r.v_sum.max_v_degree, r.v_sum.max_e_degree), (dv, de));
            assert_eq!((r.e_sum.max_v_degree, r.e_sum.max_e_degree), (dv, de));
            assert!(r.v_sum.witness.is_some());
        }
    }
}

#[test]
fn witness_names_the_top_monomial() {
    let r = check_theorem1(2, 1).unwrap();
    let w = r.v_sum.witness.unwrap();
    assert!(w.contains("v1^2") && w.contains("e1^2"), "{w}");
}

#[test]
fn single_layer_sum_is_the_double_sum() {
    let x = symbolic_cross_compress(1, 2).unwrap();
    let n = x.nvars();
    let var = |i| Polynomial::var(n, i);
    let mut rhs = Polynomial::zero(n);
    for i in 0..2 {
        rhs = &rhs + &var(x.weight_var(0, 4, i));
        for j in 0..2 {
            let w = &var(x.weight_var(0, 1, i)) + &var(x.weight_var(0, 0, j));
            rhs = &rhs + &(&(&w * &var(i)) * &var(2 + j));
        }
    }
    assert_eq!(x.sum_v(), rhs);
}

#[test]
fn expansion_limits() {
    assert!(matches!(symbolic_cross_compress(4, 1), Err(MkrError::Contract(_))));
    assert!(matches!(symbolic_cross_compress(1, 3), Err(MkrError::Contract(_))));
    assert!(matches!(symbolic_cross_compress(0, 1), Err(MkrError::Contract(_))));
    assert!(matches!(symbolic_cross_compress_within(3, 2, 100), Err(MkrError::TermBudget(_))));
}

/// Substitutes random numbers into the symbolic outputs and compares with a
/// numeric forward pass through the same stack of units.
#[test]
fn symbolic_matches_numeric_forward() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (layers, dim) in [(1, 2), (2, 1), (2, 2), (3, 1)] {
        let x = symbolic_cross_compress(layers, dim).unwrap();
        for _ in 0..5 {
            let point: Vec<f64> = (0..x.nvars()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut v = point[..dim].to_vec();
            let mut e = point[dim..2 * dim].to_vec();
            for l in 0..layers {
                let w = |s: usize| (0..dim).map(|j| point[x.weight_var(l, s, j)]).collect::<Vec<_>>();
                let weights = UnitWeights {
                    w_vv: w(0),
                    w_ev: w(1),
                    w_ve: w(2),
                    w_ee: w(3),
                    b_v: w(4),
                    b_e: w(5),
                };
                (v, e) = cross_compress_factored(&weights, &v, &e).unwrap();
            }
            for i in 0..dim {
                assert!((x.v[i].eval_f64(&point) - v[i]).abs() < 1e-9);
                assert!((x.e[i].eval_f64(&point) - e[i]).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn matrix_and_factored_forms_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for dim in [1, 3, 8] {
        for _ in 0..50 {
            let w = UnitWeights::random(dim, &mut rng);
            let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect();
            let e: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect();
            let (a, b) = cross_compress_forward(&w, &v, &e).unwrap();
            let (c, d) = cross_compress_factored(&w, &v, &e).unwrap();
            for i in 0..dim {
                assert!((a[i] - c[i]).abs() < 1e-12 && (b[i] - d[i]).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn propositions_hold() {
    for dim in [1, 2, 8] {
        let r = check_prop1(1000, dim, 5).unwrap();
        assert!(r.passes(PROP1_TOLERANCE), "{r:?}");
        let r = check_prop2(1000, dim, 5).unwrap();
        assert!(r.passes(PROP2_TOLERANCE), "{r:?}");
        assert!(r.skipped < 100, "{r:?}");
        let r = check_prop3(1000, dim, 5).unwrap();
        assert!(r.passes(PROP3_TOLERANCE), "{r:?}");
    }
}

#[test]
fn zero_inputs_leave_only_biases() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let w = UnitWeights::random(3, &mut rng);
    let (v1, e1) = cross_compress_forward(&w, &[0.0; 3], &[0.0; 3]).unwrap();
    assert_eq!(v1, w.b_v);
    assert_eq!(e1, w.b_e);
    let w = UnitWeights::random(3, &mut rng).without_biases();
    let (v1, _) = cross_compress_forward(&w, &[1.0, 2.0, 3.0], &[0.0; 3]).unwrap();
    assert_eq!(v1, vec![0.0; 3]);
}

#[test]
fn sign_flip_is_caught() {
    let flipped = |w: &UnitWeights, v: &[f64], e: &[f64]| {
        let (mut v1, e1) = cross_compress_forward(w, v, e)?;
        // v' = C w_vv − Cᵀ w_ev
        let v_ev: f64 = v.iter().zip(&w.w_ev).map(|(a, b)| a * b).sum();
        for (x, ei) in v1.iter_mut().zip(e) {
            *x -= 2.0 * ei * v_ev;
        }
        Ok((v1, e1))
    };
    let r = check_prop3_with(100, 2, 0, flipped).unwrap();
    assert!(!r.passes(PROP3_TOLERANCE));
    assert!(r.max_deviation > 1e-3);
}

#[test]
fn verifier_output_is_json_lines() {
    let results = verify_suite(&VerifyConfig {
        trials: 20,
        gradient_seeds: 1,
        seed: 0,
    });
    assert_eq!(results.len(), 6 + 9 + 3);
    assert!(results.iter().all(|r| r.passed()), "{results:#?}");
    let line = serde_json::to_string(&results[0]).unwrap();
    let back: serde_json::Value = serde_json::from_str(&line).unwrap();
    assert_eq!(back["check"], "theorem1");
    assert_eq!(back["status"], "pass");
    assert!(back["witness"].is_string());
    let prop = results.iter().find(|r| r.check == "prop3").unwrap();
    assert!(prop.deviation.is_some());
}

#[test]
fn correlation_needs_two_items() {
    use crate::data::{DatasetBundle, LabeledInteraction, RawTriple};
    let li = |u: &str, i: &str| LabeledInteraction {
        user: u.into(),
        item: i.into(),
        label: 1,
    };
    let t = RawTriple {
        head: "a".into(),
        relation: "r".into(),
        tail: "b".into(),
    };
    let bundle = DatasetBundle::assemble(&[li("u", "x")], &[t], &[("x".into(), "a".into())]).unwrap();
    assert!(matches!(correlation_study(&bundle, 10, 0), Err(MkrError::Data(_))));
}
