//! Central finite-difference checks against the tape gradients.

use super::tape::{ParamStore, Tape, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Default perturbation for central differences on `f64`.
pub const DEFAULT_EPS: f64 = 1e-6;

/// Worst coordinate found by [`grad_check_many`].
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// `(input index, flat coordinate)` of the worst coordinate.
    pub worst: Option<(usize, usize)>,
    pub analytic: f64,
    pub numeric: f64,
    pub coordinates: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(1e-8);
    (analytic - numeric).abs() / denom
}

fn eval<F>(f: &F, inputs: &[Tensor]) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.constant(t.clone())).collect();
    let out = f(&mut tape, &vars)?;
    let value = tape.value(out);
    if !value.is_scalar() {
        return Err(Error::Contract(format!(
            "grad_check needs a scalar function, got shape {:?}",
            value.shape()
        )));
    }
    let v = value.item();
    if !v.is_finite() {
        return Err(Error::Numeric(format!("function value is {v}")));
    }
    Ok(v)
}

/// Compares tape gradients of `f` with respect to every coordinate of every
/// input against central differences with step `eps`.
pub fn grad_check_many<F>(f: F, inputs: &[Tensor], eps: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    if !(eps > 0.0) {
        return Err(Error::Contract(format!("eps must be positive, got {eps}")));
    }
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.input(t.clone())).collect();
    let out = f(&mut tape, &vars)?;
    let v0 = tape.value(out);
    if !v0.is_scalar() {
        return Err(Error::Contract(format!(
            "grad_check needs a scalar function, got shape {:?}",
            v0.shape()
        )));
    }
    if !v0.item().is_finite() {
        return Err(Error::Numeric(format!("function value is {}", v0.item())));
    }
    let grads = tape.backward(out)?;

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        analytic: 0.0,
        numeric: 0.0,
        coordinates: 0,
    };
    let mut probe = inputs.to_vec();
    for (which, var) in vars.iter().enumerate() {
        let analytic = grads.wrt(*var, &tape);
        for j in 0..inputs[which].len() {
            let orig = inputs[which].data()[j];
            probe[which].data_mut()[j] = orig + eps;
            let fp = eval(&f, &probe)?;
            probe[which].data_mut()[j] = orig - eps;
            let fm = eval(&f, &probe)?;
            probe[which].data_mut()[j] = orig;

            let numeric = (fp - fm) / (2.0 * eps);
            let a = analytic.data()[j];
            let err = relative_error(a, numeric);
            report.coordinates += 1;
            if err > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = err;
                report.worst = Some((which, j));
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}

/// Checks the gradients of `f` with respect to every parameter in `store`.
/// `f` must bind parameters through [`Tape::param`]. The reported input
/// index is the parameter's position in the store.
pub fn grad_check_params<F>(f: F, store: &ParamStore, eps: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &ParamStore) -> Result<Var>,
{
    if !(eps > 0.0) {
        return Err(Error::Contract(format!("eps must be positive, got {eps}")));
    }
    let value_of = |s: &ParamStore| -> Result<f64> {
        let mut tape = Tape::new();
        let out = f(&mut tape, s)?;
        let v = tape.value(out);
        if !v.is_scalar() {
            return Err(Error::Contract(format!(
                "grad_check needs a scalar function, got shape {:?}",
                v.shape()
            )));
        }
        if !v.item().is_finite() {
            return Err(Error::Numeric(format!("function value is {}", v.item())));
        }
        Ok(v.item())
    };
    value_of(store)?;
    let mut tape = Tape::new();
    let out = f(&mut tape, store)?;
    let analytic = tape.backward(out)?.for_store(store);

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        analytic: 0.0,
        numeric: 0.0,
        coordinates: 0,
    };
    let mut probe = store.clone();
    let ids: Vec<_> = store.ids().collect();
    for (which, id) in ids.into_iter().enumerate() {
        for j in 0..store.get(id).len() {
            let orig = store.get(id).data()[j];
            probe.get_mut(id).data_mut()[j] = orig + eps;
            let fp = value_of(&probe)?;
            probe.get_mut(id).data_mut()[j] = orig - eps;
            let fm = value_of(&probe)?;
            probe.get_mut(id).data_mut()[j] = orig;

            let numeric = (fp - fm) / (2.0 * eps);
            let a = analytic[which].data()[j];
            let err = relative_error(a, numeric);
            report.coordinates += 1;
            if err > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = err;
                report.worst = Some((which, j));
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}

/// Max relative error of the gradient of `f` at `x`.
pub fn grad_check<F>(f: F, x: &Tensor, eps: f64) -> Result<f64>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    grad_check_many(|tape, vars| f(tape, vars[0]), std::slice::from_ref(x), eps)
        .map(|r| r.max_rel_error)
}
