use rand::seq::index::sample;
use rand::RngCore;
use serde::Serialize;

use super::params::ParamStore;
use super::tape::{BackwardFault, Tape, Var};
use crate::{Error, Result};

pub const FD_STEP: f64 = 1e-5;
/// Denominator floor for the relative error, as a fraction of
/// `max(1, |f|)`. Central differences carry a rounding error of about
/// `ε·|f|/h` per evaluation, a few times more once it accumulates through a
/// deep network (measured around `1e-10·|f|`), so entries whose true gradient
/// is below the floor are judged on absolute error instead.
pub const REL_FLOOR: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-4;

#[derive(Clone, Copy, Debug)]
pub struct GradcheckOptions {
    pub step: f64,
    pub floor: f64,
    /// Entries sampled per tensor; `0` checks every entry.
    pub samples_per_tensor: usize,
    pub fault: Option<BackwardFault>,
}

impl Default for GradcheckOptions {
    fn default() -> Self {
        Self {
            step: FD_STEP,
            floor: REL_FLOOR,
            samples_per_tensor: 0,
            fault: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TensorCheck {
    pub name: String,
    pub checked: usize,
    pub max_abs_err: f64,
    pub max_rel_err: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradcheckReport {
    pub label: String,
    pub max_rel_err: f64,
    /// Value of the checked function at the unperturbed parameters.
    pub value: f64,
    /// Tensor holding the largest relative error.
    pub worst: String,
    pub tensors: Vec<TensorCheck>,
}

impl GradcheckReport {
    pub fn passed(&self, tol: f64) -> bool {
        self.max_rel_err.is_finite() && self.max_rel_err < tol
    }
}

pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

fn eval(f: &dyn Fn(&mut Tape, &[Var]) -> Result<Var>, params: &ParamStore) -> Result<f64> {
    let mut tape = Tape::new();
    let vars = params.bind(&mut tape);
    let out = f(&mut tape, &vars)?;
    tape.value(out)
        .item()
        .ok_or_else(|| Error::NonScalarLoss(tape.value(out).shape().to_vec()))
}

/// Compare reverse-mode gradients of the scalar `f(params)` with central
/// differences, per parameter tensor.
pub fn check_gradients(
    label: &str,
    params: &ParamStore,
    f: &dyn Fn(&mut Tape, &[Var]) -> Result<Var>,
    opts: &GradcheckOptions,
    rng: &mut dyn RngCore,
) -> Result<GradcheckReport> {
    let mut tape = match opts.fault {
        Some(fault) => Tape::with_fault(fault),
        None => Tape::new(),
    };
    let vars = params.bind(&mut tape);
    let loss = f(&mut tape, &vars)?;
    let grads = tape.backward(loss)?;
    let value = tape.value(loss).data()[0];
    let floor = opts.floor * value.abs().max(1.0);
    let analytic: Vec<_> = vars
        .iter()
        .enumerate()
        .map(|(i, &v)| grads.get_or_zeros(v, params.get(i).shape()))
        .collect();
    drop(grads);
    drop(tape);

    let mut work = params.clone();
    let mut tensors = Vec::with_capacity(params.len());
    for (i, name) in params.names().iter().enumerate() {
        let n = params.get(i).len();
        let picks: Vec<usize> = if opts.samples_per_tensor == 0 || opts.samples_per_tensor >= n {
            (0..n).collect()
        } else {
            let mut v = sample(rng, n, opts.samples_per_tensor).into_vec();
            v.sort_unstable();
            v
        };
        let mut check = TensorCheck {
            name: name.clone(),
            checked: picks.len(),
            max_abs_err: 0.0,
            max_rel_err: 0.0,
        };
        for k in picks {
            let orig = work.get(i).data()[k];
            work.get_mut(i).data_mut()[k] = orig + opts.step;
            let plus = eval(f, &work)?;
            work.get_mut(i).data_mut()[k] = orig - opts.step;
            let minus = eval(f, &work)?;
            work.get_mut(i).data_mut()[k] = orig;
            let numeric = (plus - minus) / (2.0 * opts.step);
            let a = analytic[i].data()[k];
            check.max_abs_err = check.max_abs_err.max((a - numeric).abs());
            let rel = relative_error(a, numeric, floor);
            if !(rel <= check.max_rel_err) {
                check.max_rel_err = rel;
            }
        }
        tensors.push(check);
    }
    let (max_rel_err, worst) = tensors
        .iter()
        .fold((0.0, String::new()), |(m, w), t| {
            if !(t.max_rel_err <= m) || w.is_empty() {
                (t.max_rel_err, t.name.clone())
            } else {
                (m, w)
            }
        });
    Ok(GradcheckReport {
        label: label.to_string(),
        max_rel_err,
        value,
        worst,
        tensors,
    })
}
