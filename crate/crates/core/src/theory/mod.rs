//! Executable checks of the cross&compress theory: symbolic degree growth,
//! numeric equivalence oracles, and the rater/graph-neighbour correlation
//! study.

mod correlation;
mod oracles;
mod polynomial;
mod symbolic;

pub use correlation::{
    correlation_study, correlation_study_with, Bucket, CorrelationReport, DirectionReport, DEFAULT_BUCKETS,
};
pub use oracles::{
    check_prop1, check_prop2, check_prop3, check_prop3_with, cross_compress_factored, cross_compress_forward,
    OracleReport, UnitWeights,
};
pub use polynomial::{format_monomial, Coefficient, MultivariatePolynomial};
pub use symbolic::{
    check_theorem1, cross_degree, symbolic_cross_compress, symbolic_cross_compress_within, CrossDegree, Polynomial,
    SymbolicExpansion, Theorem1Report, DEFAULT_TERM_BUDGET, MAX_SYMBOLIC_DIM, MAX_SYMBOLIC_LAYERS,
};

use serde::Serialize;
use serde_json::{json, Value};

use crate::model::Variant;
use crate::training::tiny_gradient_check;

pub const PROP1_TOLERANCE: f64 = 1e-10;
pub const PROP2_TOLERANCE: f64 = 1e-10;
pub const PROP3_TOLERANCE: f64 = 1e-12;
pub const GRADIENT_TOLERANCE: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
}

/// One line of verifier output.
#[derive(Clone, Debug, Serialize)]
pub struct VerifierResult {
    pub check: String,
    pub params: Value,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deviation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl VerifierResult {
    fn new(check: &str, params: Value, passed: bool) -> Self {
        VerifierResult {
            check: check.to_string(),
            params,
            status: if passed { Status::Pass } else { Status::Fail },
            witness: None,
            deviation: None,
            error: None,
        }
    }

    fn failed(check: &str, params: Value, err: impl ToString) -> Self {
        VerifierResult {
            error: Some(err.to_string()),
            ..Self::new(check, params, false)
        }
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

/// Numbers of trials and seeds used by `verify_suite`.
#[derive(Clone, Debug)]
pub struct VerifyConfig {
    pub trials: usize,
    pub gradient_seeds: usize,
    pub seed: u64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            trials: 1000,
            gradient_seeds: 20,
            seed: 0,
        }
    }
}

/// Runs the degree check over the whole budgeted grid, the three oracles
/// and the tiny-model gradient checks.
pub fn verify_suite(config: &VerifyConfig) -> Vec<VerifierResult> {
    let mut out = Vec::new();
    for layers in 1..=MAX_SYMBOLIC_LAYERS {
        for dim in 1..=MAX_SYMBOLIC_DIM {
            let params = json!({ "layers": layers, "dim": dim });
            out.push(match check_theorem1(layers, dim) {
                Ok(r) => VerifierResult {
                    witness: r.v_sum.witness.clone(),
                    ..VerifierResult::new(
                        "theorem1",
                        json!({
                            "layers": layers,
                            "dim": dim,
                            "expected_degree": r.expected_degree,
                            "v_sum_degrees": [r.v_sum.max_v_degree, r.v_sum.max_e_degree],
                            "e_sum_degrees": [r.e_sum.max_v_degree, r.e_sum.max_e_degree],
                        }),
                        r.passed,
                    )
                },
                Err(e) => VerifierResult::failed("theorem1", params, e),
            });
        }
    }

    let oracles: [(&str, fn(usize, usize, u64) -> crate::Result<OracleReport>, f64, &[usize]); 3] = [
        ("prop1", check_prop1, PROP1_TOLERANCE, &[1, 2, 8]),
        ("prop2", check_prop2, PROP2_TOLERANCE, &[1, 2, 8]),
        ("prop3", check_prop3, PROP3_TOLERANCE, &[1, 2, 8]),
    ];
    for (name, check, tol, dims) in oracles {
        for &dim in dims {
            let params = json!({ "trials": config.trials, "dim": dim, "seed": config.seed, "tolerance": tol });
            out.push(match check(config.trials, dim, config.seed) {
                Ok(r) => {
                    let mut p = params;
                    p["skipped"] = json!(r.skipped);
                    VerifierResult {
                        deviation: Some(r.max_deviation),
                        ..VerifierResult::new(name, p, r.passes(tol))
                    }
                }
                Err(e) => VerifierResult::failed(name, params, e),
            });
        }
    }

    for variant in [Variant::Full, Variant::Dcn, Variant::Stitch] {
        let mut worst: f64 = 0.0;
        let mut error = None;
        for s in 0..config.gradient_seeds as u64 {
            match tiny_gradient_check(config.seed + s, variant) {
                Ok(r) => worst = worst.max(r.max_relative_error),
                Err(e) => {
                    error = Some(e.to_string());
                    break;
                }
            }
        }
        let params = json!({
            "variant": variant.to_string(),
            "seeds": config.gradient_seeds,
            "tolerance": GRADIENT_TOLERANCE,
        });
        out.push(match error {
            Some(e) => VerifierResult::failed("gradient", params, e),
            None => VerifierResult {
                deviation: Some(worst),
                ..VerifierResult::new("gradient", params, worst < GRADIENT_TOLERANCE)
            },
        });
    }
    out
}

#[cfg(test)]
mod tests;
