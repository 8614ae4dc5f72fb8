//! Every tape primitive against central differences, 100 seeds each.

use mkr::autodiff::{check_gradients, ParamKind, ParameterStore, Tape, Tensor, Var};
use mkr::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEEDS: u64 = 100;
const STEP: f64 = 1e-6;
const TOL: f64 = 1e-4;

type Build = fn(&mut Tape<f64>, &[Var]) -> Result<Var>;

struct Case {
    name: &'static str,
    /// Shape and sampling range of each parameter.
    inputs: &'static [(&'static [usize], f64, f64)],
    build: Build,
}

fn random(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor<f64> {
    let n = shape.iter().product();
    let data: Vec<f64> = (0..n).map(|_| rng.random_range(lo..hi)).collect();
    Tensor::from_f64(shape, &data).unwrap()
}

/// Signed weights bounded away from zero so no upstream gradient vanishes.
fn weights(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    let n = shape.iter().product();
    let data: Vec<f64> = (0..n)
        .map(|_| {
            let m = rng.random_range(0.5..1.5);
            if rng.random_bool(0.5) { m } else { -m }
        })
        .collect();
    Tensor::from_f64(shape, &data).unwrap()
}

fn run(case: &Case) {
    for seed in 0..SEEDS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParameterStore::new();
        let ids: Vec<_> = case
            .inputs
            .iter()
            .enumerate()
            .map(|(k, &(shape, lo, hi))| {
                store
                    .register(format!("p{k}"), ParamKind::Weight, random(&mut rng, shape, lo, hi))
                    .unwrap()
            })
            .collect();
        // shape of the primitive's output, to draw the weighting
        let mut probe = Tape::new();
        let vars: Vec<Var> = ids.iter().map(|&id| probe.param(&store, id)).collect();
        let out = (case.build)(&mut probe, &vars).unwrap();
        let w = weights(&mut rng, probe.shape(out));

        let report = check_gradients(&mut store, None, STEP, |tape, store| {
            let vars: Vec<Var> = ids.iter().map(|&id| tape.param(store, id)).collect();
            let out = (case.build)(tape, &vars)?;
            let w = tape.constant(w.clone());
            let weighted = tape.mul(out, w)?;
            Ok(tape.sum(weighted))
        })
        .unwrap();
        assert!(
            report.passes(TOL),
            "{} seed {seed}: relative error {:.3e} at {:?}",
            case.name,
            report.max_relative_error,
            report.worst
        );
    }
}

const M34: &[usize] = &[3, 4];

const CASES: &[Case] = &[
    Case { name: "matmul", inputs: &[(M34, -1.0, 1.0), (&[4, 2], -1.0, 1.0)], build: |t, v| t.matmul(v[0], v[1]) },
    Case { name: "add", inputs: &[(M34, -1.0, 1.0), (M34, -1.0, 1.0)], build: |t, v| t.add(v[0], v[1]) },
    Case { name: "sub", inputs: &[(M34, -1.0, 1.0), (M34, -1.0, 1.0)], build: |t, v| t.sub(v[0], v[1]) },
    Case { name: "mul", inputs: &[(M34, -1.0, 1.0), (M34, -1.0, 1.0)], build: |t, v| t.mul(v[0], v[1]) },
    Case { name: "mul_scalar", inputs: &[(M34, -1.0, 1.0), (&[], -1.0, 1.0)], build: |t, v| t.mul(v[0], v[1]) },
    Case { name: "add_row", inputs: &[(M34, -1.0, 1.0), (&[4], -1.0, 1.0)], build: |t, v| t.add_row(v[0], v[1]) },
    Case { name: "mul_col", inputs: &[(M34, -1.0, 1.0), (&[3, 1], -1.0, 1.0)], build: |t, v| t.mul_col(v[0], v[1]) },
    Case { name: "scale", inputs: &[(M34, -1.0, 1.0)], build: |t, v| Ok(t.scale(v[0], -2.5)) },
    Case { name: "sigmoid", inputs: &[(M34, -3.0, 3.0)], build: |t, v| Ok(t.sigmoid(v[0])) },
    Case { name: "relu", inputs: &[(M34, -2.0, 2.0)], build: |t, v| Ok(t.relu(v[0])) },
    Case { name: "ln", inputs: &[(M34, 0.5, 2.0)], build: |t, v| Ok(t.ln(v[0])) },
    Case { name: "clamp", inputs: &[(M34, -2.0, 2.0)], build: |t, v| Ok(t.clamp(v[0], -1.0, 1.0)) },
    Case { name: "sum", inputs: &[(M34, -1.0, 1.0)], build: |t, v| Ok(t.sum(v[0])) },
    Case { name: "mean", inputs: &[(M34, -1.0, 1.0)], build: |t, v| Ok(t.mean(v[0])) },
    Case { name: "row_sum", inputs: &[(M34, -1.0, 1.0)], build: |t, v| Ok(t.row_sum(v[0])) },
    Case { name: "squared_norm", inputs: &[(M34, -1.0, 1.0)], build: |t, v| Ok(t.squared_norm(v[0])) },
    // repeated rows accumulate
    Case { name: "gather", inputs: &[(&[5, 3], -1.0, 1.0)], build: |t, v| t.gather(v[0], &[4, 0, 4, 2]) },
    Case { name: "concat_cols", inputs: &[(M34, -1.0, 1.0), (&[3, 2], -1.0, 1.0)], build: |t, v| t.concat_cols(v[0], v[1]) },
    Case { name: "concat_rows", inputs: &[(M34, -1.0, 1.0), (&[2, 4], -1.0, 1.0)], build: |t, v| t.concat_rows(v[0], v[1]) },
    Case { name: "transpose", inputs: &[(M34, -1.0, 1.0)], build: |t, v| Ok(t.transpose(v[0])) },
    Case { name: "reshape", inputs: &[(M34, -1.0, 1.0)], build: |t, v| t.reshape(v[0], &[2, 6]) },
];

#[test]
fn every_primitive_matches_central_differences() {
    for case in CASES {
        run(case);
    }
}

#[test]
fn composite_graph_with_shared_inputs() {
    // a parameter used on several paths sums its adjoints
    run(&Case {
        name: "composite",
        inputs: &[(M34, -1.0, 1.0), (&[4, 4], -1.0, 1.0), (&[4], -0.5, 0.5)],
        build: |t, v| {
            let h = t.matmul(v[0], v[1])?;
            let h = t.add_row(h, v[2])?;
            let s = t.sigmoid(h);
            let r = t.mul(s, v[0])?;
            let q = t.squared_norm(v[0]);
            let r = t.mul(r, q)?;
            t.add(r, v[0])
        },
    });
}
