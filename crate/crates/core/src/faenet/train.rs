use nalgebra::Vector3;
use rand::RngCore;
use rayon::prelude::*;

use super::model::FAENet;
use crate::diffmath::{AdamW, Tape, Tensor, Var};
use crate::frames::CanonicalView;
use crate::geometry::AtomicSystem;
use crate::parallel::pool;
use crate::strategy::SymmetryStrategy;
use crate::{Error, Result};

/// One training example. For classification `energy` holds the 0/1 label.
#[derive(Clone, Debug)]
pub struct Sample {
    pub system: AtomicSystem,
    pub energy: f64,
    pub forces: Option<Vec<Vector3<f64>>>,
}

impl Sample {
    pub fn energy_only(system: AtomicSystem, energy: f64) -> Self {
        Self {
            system,
            energy,
            forces: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Objective {
    /// `energy · MSE(E) + force · MSE(F)`
    Regression { energy: f64, force: f64 },
    /// Binary cross-entropy with the energy output as logit.
    Classification,
}

impl Objective {
    pub fn energy_only() -> Self {
        Objective::Regression {
            energy: 1.0,
            force: 0.0,
        }
    }
}

fn rotation_transposed(view: &CanonicalView) -> Tensor {
    let u = view.transform.rotation();
    let mut data = Vec::with_capacity(9);
    for a in 0..3 {
        for b in 0..3 {
            data.push(u[(b, a)]);
        }
    }
    Tensor::matrix(3, 3, data).unwrap()
}

/// Frame-averaged loss of one sample on `tape`. Views are constants; only
/// the parameters `p` are differentiated.
pub fn sample_loss(
    model: &FAENet,
    tape: &mut Tape,
    p: &[Var],
    sample: &Sample,
    views: &[CanonicalView],
    objective: Objective,
) -> Result<Var> {
    let want_forces = matches!(objective, Objective::Regression { force, .. } if force != 0.0);
    if want_forces && !model.config().predict_forces {
        return Err(Error::NoForcesRequested);
    }
    let k = 1.0 / views.len() as f64;
    let mut energies = Vec::with_capacity(views.len());
    let mut forces = Vec::new();
    for view in views {
        let inputs = model.prepare(&view.system)?;
        let out = model.forward_view(tape, p, &inputs)?;
        energies.push(out.energy);
        if want_forces {
            let ut = tape.constant(rotation_transposed(view));
            forces.push(tape.matmul(out.forces.unwrap(), ut)?);
        }
    }
    let energy = sum_all(tape, &energies)?;
    let energy = tape.scale(energy, k);
    match objective {
        Objective::Classification => {
            let y = tape.constant(Tensor::scalar(sample.energy));
            tape.bce_with_logits(energy, y)
        }
        Objective::Regression {
            energy: ce,
            force: cf,
        } => {
            let y = tape.constant(Tensor::scalar(sample.energy));
            let le = tape.mse_loss(energy, y)?;
            let le = tape.scale(le, ce);
            if !want_forces {
                return Ok(le);
            }
            let target = sample.forces.as_ref().ok_or_else(|| {
                Error::InvalidSystem("force loss requested but sample has no force targets".into())
            })?;
            let f = sum_all(tape, &forces)?;
            let f = tape.scale(f, k);
            let data = target.iter().flat_map(|v| [v.x, v.y, v.z]).collect();
            let yf = tape.constant(Tensor::matrix(target.len(), 3, data)?);
            let lf = tape.mse_loss(f, yf)?;
            let lf = tape.scale(lf, cf);
            tape.add(le, lf)
        }
    }
}

fn sum_all(tape: &mut Tape, vars: &[Var]) -> Result<Var> {
    let mut acc = vars[0];
    for &v in &vars[1..] {
        acc = tape.add(acc, v)?;
    }
    Ok(acc)
}

/// Mean loss over `batch` and its gradient, one entry per parameter tensor.
pub fn batch_gradients(
    model: &FAENet,
    batch: &[Sample],
    objective: Objective,
    strategy: &dyn SymmetryStrategy,
    rng: &mut dyn RngCore,
) -> Result<(f64, Vec<Tensor>)> {
    if batch.is_empty() {
        return Err(Error::InvalidConfig("empty training batch".into()));
    }
    for s in batch {
        if !s.energy.is_finite() || s.forces.iter().flatten().any(|f| !f.iter().all(|v| v.is_finite())) {
            return Err(Error::InvalidSystem("non-finite training target".into()));
        }
    }
    // Views are drawn up front so the random stream does not depend on
    // thread scheduling.
    let views: Vec<_> = batch.iter().map(|s| strategy.views(&s.system, rng).views).collect();
    let per_sample: Vec<(f64, Vec<Tensor>)> = pool().install(|| {
        batch
            .par_iter()
            .zip(views.par_iter())
            .map(|(sample, views)| {
                let mut tape = Tape::new();
                let p = model.params().bind(&mut tape);
                let loss = sample_loss(model, &mut tape, &p, sample, views, objective)?;
                let grads = tape.backward(loss)?;
                let value = tape.value(loss).data()[0];
                let g = p
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| grads.get_or_zeros(v, model.params().get(i).shape()))
                    .collect();
                Ok((value, g))
            })
            .collect::<Result<_>>()
    })?;
    let scale = 1.0 / batch.len() as f64;
    let mut iter = per_sample.into_iter();
    let (mut loss, mut grads) = iter.next().unwrap();
    for (l, g) in iter {
        loss += l;
        for (acc, x) in grads.iter_mut().zip(&g) {
            acc.add_assign(x);
        }
    }
    for g in &mut grads {
        g.scale_assign(scale);
    }
    Ok((loss * scale, grads))
}

/// One optimizer step on `batch`; returns the mean loss before the update.
/// A non-finite loss or gradient aborts without touching the parameters.
pub fn train_step(
    model: &mut FAENet,
    batch: &[Sample],
    objective: Objective,
    strategy: &dyn SymmetryStrategy,
    optimizer: &mut AdamW,
    rng: &mut dyn RngCore,
) -> Result<f64> {
    let (loss, grads) = batch_gradients(model, batch, objective, strategy, rng)?;
    if !loss.is_finite() {
        return Err(Error::NonFiniteLoss(loss));
    }
    if grads.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFiniteLoss(loss));
    }
    optimizer.step(model.params_mut(), &grads);
    Ok(loss)
}
