use super::{ParamId, ParameterStore, Tape, Var};
use crate::error::Result;
use crate::scalar::Scalar;

/// Outcome of comparing reverse-mode gradients with central differences.
#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Parameter name and flat element index of the worst entry.
    pub worst: Option<(String, usize)>,
    pub analytic: f64,
    pub numeric: f64,
    pub elements_checked: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_relative_error < tolerance
    }
}

/// Checks every element of every parameter in `params` (all parameters
/// when `None`). The relative error of an element is
/// `|analytic − numeric| / max(|analytic|, 1e−8)`.
pub fn check_gradients<T, F>(
    store: &mut ParameterStore<T>,
    params: Option<&[ParamId]>,
    step: f64,
    build: F,
) -> Result<GradCheckReport>
where
    T: Scalar,
    F: Fn(&mut Tape<T>, &ParameterStore<T>) -> Result<Var>,
{
    let mut tape = Tape::new();
    let loss = build(&mut tape, store)?;
    tape.backward(loss, store)?;

    let ids: Vec<ParamId> = match params {
        Some(p) => p.to_vec(),
        None => store.ids().collect(),
    };
    let eval = |store: &ParameterStore<T>| -> Result<f64> {
        let mut tape = Tape::new();
        let loss = build(&mut tape, store)?;
        Ok(tape.value(loss).item().as_f64())
    };

    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst: None,
        analytic: 0.0,
        numeric: 0.0,
        elements_checked: 0,
    };
    let h = T::lit(step);
    for id in ids {
        let analytic: Vec<f64> = store.grad(id).data().iter().map(|g| g.as_f64()).collect();
        for (k, &a) in analytic.iter().enumerate() {
            let orig = store.value(id).data()[k];
            store.value_mut(id).data_mut()[k] = orig + h;
            let up = eval(store)?;
            store.value_mut(id).data_mut()[k] = orig - h;
            let down = eval(store)?;
            store.value_mut(id).data_mut()[k] = orig;
            let numeric = (up - down) / (2.0 * step);
            let rel = (a - numeric).abs() / a.abs().max(1e-8);
            report.elements_checked += 1;
            if rel > report.max_relative_error || report.worst.is_none() {
                report.max_relative_error = report.max_relative_error.max(rel);
                if rel >= report.max_relative_error {
                    report.worst = Some((store.name(id).to_string(), k));
                    report.analytic = a;
                    report.numeric = numeric;
                }
            }
        }
    }
    Ok(report)
}
