use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::autodiff::{ParameterStore, Tape, Tensor, Var};
use crate::error::Result;
use crate::units::{cross, CrossCompressUnit, DcnLayer, StitchUnit};

/// Plain-vector weights of one cross&compress layer.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitWeights {
    pub w_vv: Vec<f64>,
    pub w_ev: Vec<f64>,
    pub w_ve: Vec<f64>,
    pub w_ee: Vec<f64>,
    pub b_v: Vec<f64>,
    pub b_e: Vec<f64>,
}

impl UnitWeights {
    pub fn random<R: Rng>(dim: usize, rng: &mut R) -> Self {
        UnitWeights {
            w_vv: uniform(dim, rng),
            w_ev: uniform(dim, rng),
            w_ve: uniform(dim, rng),
            w_ee: uniform(dim, rng),
            b_v: uniform(dim, rng),
            b_e: uniform(dim, rng),
        }
    }

    pub fn without_biases(mut self) -> Self {
        self.b_v.iter_mut().for_each(|b| *b = 0.0);
        self.b_e.iter_mut().for_each(|b| *b = 0.0);
        self
    }

    pub fn dim(&self) -> usize {
        self.w_vv.len()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleReport {
    pub trials: usize,
    pub dim: usize,
    /// Trials skipped because the restriction could not be satisfied.
    pub skipped: usize,
    pub max_deviation: f64,
}

impl OracleReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.skipped < self.trials && self.max_deviation < tolerance
    }
}

fn uniform<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn row(tape: &mut Tape<f64>, x: &[f64]) -> Result<Var> {
    Ok(tape.constant(Tensor::matrix(1, x.len(), x.to_vec())?))
}

fn unit_store(w: &UnitWeights) -> Result<(ParameterStore<f64>, CrossCompressUnit)> {
    let mut store = ParameterStore::new();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let unit = CrossCompressUnit::register(&mut store, "cc", w.dim(), &mut rng)?;
    for (id, data) in unit.params().into_iter().zip([&w.w_vv, &w.w_ev, &w.w_ve, &w.w_ee, &w.b_v, &w.b_e]) {
        store.set(id, Tensor::vector(data.clone()))?;
    }
    Ok((store, unit))
}

/// One cross&compress layer through the explicit cross matrix
/// (`v' = C w_vv + Cᵀ w_ev + b_v`).
pub fn cross_compress_forward(w: &UnitWeights, v: &[f64], e: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let (store, unit) = unit_store(w)?;
    let mut tape = Tape::new();
    let v = tape.constant(Tensor::vector(v.to_vec()));
    let e = tape.constant(Tensor::vector(e.to_vec()));
    let (v1, e1) = unit.apply_matrix_form(&mut tape, &store, v, e)?;
    Ok((tape.value(v1).data().to_vec(), tape.value(e1).data().to_vec()))
}

/// The same layer through the batched factored form used in the model.
pub fn cross_compress_factored(w: &UnitWeights, v: &[f64], e: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let (store, unit) = unit_store(w)?;
    let mut tape = Tape::new();
    let v = row(&mut tape, v)?;
    let e = row(&mut tape, e)?;
    let (v1, e1) = unit.apply(&mut tape, &store, v, e)?;
    Ok((tape.value(v1).data().to_vec(), tape.value(e1).data().to_vec()))
}

/// `|Σᵢ v₁⁽ⁱ⁾|` of one layer against `|b + Σᵢ Σⱼ (w_ev⁽ⁱ⁾ + w_vv⁽ʲ⁾) vᵢ eⱼ|`
/// with `b = Σᵢ b_v⁽ⁱ⁾`.
pub fn check_prop1(trials: usize, dim: usize, seed: u64) -> Result<OracleReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let w = UnitWeights::random(dim, &mut rng);
        let (v, e) = (uniform(dim, &mut rng), uniform(dim, &mut rng));
        let (v1, _) = cross_compress_forward(&w, &v, &e)?;
        let lhs = v1.iter().sum::<f64>().abs();
        let mut rhs = w.b_v.iter().sum::<f64>();
        for i in 0..dim {
            for j in 0..dim {
                rhs += (w.w_ev[i] + w.w_vv[j]) * v[i] * e[j];
            }
        }
        worst = worst.max((lhs - rhs.abs()).abs());
    }
    Ok(OracleReport {
        trials,
        dim,
        skipped: 0,
        max_deviation: worst,
    })
}

/// Restricted cross&compress against the DCN layer. `w_vv` is rescaled so
/// `eᵀ w_vv = 1` and `w_ee` so `vᵀ w_ee = 1`; the second cross term uses the
/// layer-0 anchor in place of the current input. Trials where a rescaling
/// would divide by (nearly) zero are skipped.
pub fn check_prop2(trials: usize, dim: usize, seed: u64) -> Result<OracleReport> {
    const DEGENERATE: f64 = 1e-3;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut skipped = 0;
    for _ in 0..trials {
        let mut w = UnitWeights::random(dim, &mut rng);
        let (v, e) = (uniform(dim, &mut rng), uniform(dim, &mut rng));
        let (v0, e0) = (uniform(dim, &mut rng), uniform(dim, &mut rng));
        let (s_vv, s_ee) = (dot(&e, &w.w_vv), dot(&v, &w.w_ee));
        if s_vv.abs() < DEGENERATE || s_ee.abs() < DEGENERATE {
            skipped += 1;
            continue;
        }
        w.w_vv.iter_mut().for_each(|x| *x /= s_vv);
        w.w_ee.iter_mut().for_each(|x| *x /= s_ee);

        let mut tape = Tape::<f64>::new();
        let cv = tape.constant(Tensor::vector(v.clone()));
        let ce = tape.constant(Tensor::vector(e.clone()));
        let cv0 = tape.constant(Tensor::vector(v0.clone()));
        let ce0 = tape.constant(Tensor::vector(e0.clone()));
        let c = cross(&mut tape, cv, ce)?;
        let c_v_e0 = cross(&mut tape, cv, ce0)?;
        let c_v0_e = cross(&mut tape, cv0, ce)?;
        let (c, c_v_e0, c_v0_e) = (tape.value(c).clone(), tape.value(c_v_e0).clone(), tape.value(c_v0_e).clone());
        let mat_vec = |m: &Tensor<f64>, x: &[f64], transposed: bool| -> Vec<f64> {
            (0..dim)
                .map(|i| (0..dim).map(|j| if transposed { m.at(j, i) } else { m.at(i, j) } * x[j]).sum())
                .collect()
        };
        let a = mat_vec(&c, &w.w_vv, false);
        let b = mat_vec(&c_v_e0, &w.w_ev, true);
        let restricted_v: Vec<f64> = (0..dim).map(|i| a[i] + b[i] + w.b_v[i]).collect();
        let a = mat_vec(&c_v0_e, &w.w_ve, false);
        let b = mat_vec(&c, &w.w_ee, true);
        let restricted_e: Vec<f64> = (0..dim).map(|i| a[i] + b[i] + w.b_e[i]).collect();

        let mut store = ParameterStore::new();
        let layer = DcnLayer::register(&mut store, "dcn", dim, &mut rng)?;
        store.set(layer.w_ev, Tensor::vector(w.w_ev.clone()))?;
        store.set(layer.w_ve, Tensor::vector(w.w_ve.clone()))?;
        store.set(layer.b_v, Tensor::vector(w.b_v.clone()))?;
        store.set(layer.b_e, Tensor::vector(w.b_e.clone()))?;
        let mut tape = Tape::new();
        let (rv, re) = (row(&mut tape, &v)?, row(&mut tape, &e)?);
        let (rv0, re0) = (row(&mut tape, &v0)?, row(&mut tape, &e0)?);
        let (dv, de) = layer.apply(&mut tape, &store, rv, re, Some((rv0, re0)))?;
        worst = worst
            .max(max_abs_diff(&restricted_v, tape.value(dv).data()))
            .max(max_abs_diff(&restricted_e, tape.value(de).data()));
    }
    Ok(OracleReport {
        trials,
        dim,
        skipped,
        max_deviation: worst,
    })
}

/// Bias-free cross&compress against the 2×2 transfer-matrix form
/// `[v'; e'] = [[eᵀw_vv, vᵀw_ev], [eᵀw_ve, vᵀw_ee]] [v; e]`, evaluated by a
/// cross-stitch unit carrying those four scalars.
pub fn check_prop3(trials: usize, dim: usize, seed: u64) -> Result<OracleReport> {
    check_prop3_with(trials, dim, seed, cross_compress_forward)
}

/// As `check_prop3`, with the cross&compress forward pass supplied by the
/// caller.
pub fn check_prop3_with<F>(trials: usize, dim: usize, seed: u64, forward: F) -> Result<OracleReport>
where
    F: Fn(&UnitWeights, &[f64], &[f64]) -> Result<(Vec<f64>, Vec<f64>)>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let w = UnitWeights::random(dim, &mut rng).without_biases();
        let (v, e) = (uniform(dim, &mut rng), uniform(dim, &mut rng));
        let (v1, e1) = forward(&w, &v, &e)?;

        let mut store = ParameterStore::new();
        let stitch = StitchUnit::register(&mut store, "stitch", dim)?;
        let alphas = [
            (stitch.alpha_aa, dot(&e, &w.w_vv)),
            (stitch.alpha_ab, dot(&v, &w.w_ev)),
            (stitch.alpha_ba, dot(&e, &w.w_ve)),
            (stitch.alpha_bb, dot(&v, &w.w_ee)),
        ];
        for (id, a) in alphas {
            store.set(id, Tensor::scalar(a))?;
        }
        let mut tape = Tape::new();
        let (rv, re) = (row(&mut tape, &v)?, row(&mut tape, &e)?);
        let (sv, se) = stitch.apply(&mut tape, &store, rv, re)?;
        worst = worst
            .max(max_abs_diff(&v1, tape.value(sv).data()))
            .max(max_abs_diff(&e1, tape.value(se).data()));
    }
    Ok(OracleReport {
        trials,
        dim,
        skipped: 0,
        max_deviation: worst,
    })
}
