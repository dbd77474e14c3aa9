use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, RngCore};
use serde::Serialize;

use super::config::{EnergyHead, FAENetConfig, MpVariant};
use super::model::FAENet;
use super::train::{sample_loss, Objective, Sample};
use crate::diffmath::{check_gradients, GradcheckOptions, GradcheckReport, ParamStore, Tape, Tensor, Var};
use crate::elements::NUM_ELEMENTS;
use crate::frames::{compute_frame, frame_views, FrameGroup};
use crate::geometry::AtomicSystem;
use crate::{seeded_rng, Result};

/// Outcome of [`gradcheck_model`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModelGradcheck {
    pub tolerance: f64,
    pub max_rel_err: f64,
    /// Label of the composite holding the largest error.
    pub worst_check: String,
    pub passed: bool,
    pub checks: Vec<GradcheckReport>,
}

fn random_system(rng: &mut dyn RngCore, n: usize, periodic: bool) -> AtomicSystem {
    let side = 2.5;
    let pos = (0..n)
        .map(|_| Vector3::new(rng.random_range(0.0..side), rng.random_range(0.0..side), rng.random_range(0.0..side)))
        .collect();
    let z = (0..n).map(|_| rng.random_range(1..=20)).collect();
    if periodic {
        let cell = Matrix3::new(7.0, 0.0, 0.0, 0.3, 7.2, 0.0, 0.1, -0.2, 7.5);
        AtomicSystem::periodic(pos, z, cell, [true; 3]).expect("valid cell")
    } else {
        AtomicSystem::new(pos, z).expect("valid system")
    }
}

fn random_matrix(rng: &mut dyn RngCore, rows: usize, cols: usize) -> Tensor {
    Tensor::matrix(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// `Σ out ⊙ R` for a fixed random `R`, a generic scalar probe of `out`.
fn probe(tape: &mut Tape, out: Var, r: &Tensor) -> Result<Var> {
    let w = tape.constant(r.clone());
    let y = tape.mul(out, w)?;
    Ok(tape.sum(y))
}

fn probe_tensor(rng: &mut dyn RngCore, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// Finite-difference checks of every composite the model is built from and
/// of a full frame-averaged forward + loss pass, derived from `base`.
///
/// Each composite is checked on a fresh model whose config selects the
/// variant under test, so all message-passing and energy-head variants are
/// covered whatever `base` says.
pub fn gradcheck_model(
    base: &FAENetConfig,
    seed: u64,
    opts: &GradcheckOptions,
    tolerance: f64,
) -> Result<ModelGradcheck> {
    let mut rng = seeded_rng(seed);
    let mut checks = Vec::new();
    let variant = |mp: MpVariant, head: EnergyHead, forces: bool, table: bool, rng: &mut dyn RngCore| {
        let mut cfg = FAENetConfig {
            mp_variant: mp,
            energy_head: head,
            predict_forces: forces,
            ..base.clone()
        };
        if table && cfg.property_table.is_none() {
            cfg.property_table = Some((0..NUM_ELEMENTS).map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect()).collect());
            cfg.property_channels = cfg.property_channels.min(cfg.hidden_channels / 2).max(1);
        }
        FAENet::new(cfg, rng)
    };
    let mut run = |label: &str, params: &ParamStore, f: &dyn Fn(&mut Tape, &[Var]) -> Result<Var>, rng: &mut dyn RngCore| -> Result<()> {
        checks.push(check_gradients(label, params, f, opts, rng)?);
        Ok(())
    };

    let system = random_system(&mut rng, 5, false);
    let h = base.hidden_channels;

    // Node embedding, with and without a property table.
    for table in [false, true] {
        let model = variant(base.mp_variant, base.energy_head, false, table, &mut rng)?;
        let inputs = model.prepare(&system)?;
        let r = random_matrix(&mut rng, system.len(), h);
        let label = if table { "embed_nodes_properties" } else { "embed_nodes" };
        run(label, model.params(), &|t, p| {
            let out = model.embed_nodes(t, p, &inputs)?;
            probe(t, out, &r)
        }, &mut rng)?;
    }

    // Edge embedding.
    {
        let model = variant(base.mp_variant, base.energy_head, false, false, &mut rng)?;
        let inputs = model.prepare(&system)?;
        let r = random_matrix(&mut rng, inputs.src.len(), base.num_filters);
        run("embed_edges", model.params(), &|t, p| {
            let out = model.embed_edges(t, p, &inputs)?;
            probe(t, out, &r)
        }, &mut rng)?;
    }

    // One interaction block per variant.
    for (mp, label) in [
        (MpVariant::Standard, "interaction_standard"),
        (MpVariant::Simple, "interaction_simple"),
        (MpVariant::Basic, "interaction_basic"),
    ] {
        let model = variant(mp, base.energy_head, false, false, &mut rng)?;
        let inputs = model.prepare(&system)?;
        let r = random_matrix(&mut rng, system.len(), h);
        run(label, model.params(), &|t, p| {
            let h0 = model.embed_nodes(t, p, &inputs)?;
            let e = model.embed_edges(t, p, &inputs)?;
            let out = model.interaction(t, p, 0, h0, e, &inputs)?;
            probe(t, out, &r)
        }, &mut rng)?;
    }

    // Output heads on a fixed representation.
    for (head, forces, label) in [
        (EnergyHead::Weighted, false, "energy_head_weighted"),
        (EnergyHead::Simple, false, "energy_head_simple"),
        (EnergyHead::Weighted, true, "force_head"),
    ] {
        let model = variant(base.mp_variant, head, forces, false, &mut rng)?;
        let h_out = Arc::new(random_matrix(&mut rng, system.len(), h));
        let rf = random_matrix(&mut rng, system.len(), 3);
        run(label, model.params(), &|t, p| {
            let x = t.constant_shared(h_out.clone());
            let out = model.readout(t, p, x)?;
            match (forces, out.forces) {
                (true, Some(f)) => probe(t, f, &rf),
                _ => Ok(out.energy),
            }
        }, &mut rng)?;
    }

    // Full E(3) frame-averaged forward + loss, free and periodic.
    for (periodic, label) in [(false, "full_forward_loss"), (true, "full_forward_loss_periodic")] {
        let model = variant(base.mp_variant, base.energy_head, true, false, &mut rng)?;
        let sys = random_system(&mut rng, 4, periodic);
        let views = frame_views(&sys, &compute_frame(&sys, FrameGroup::E3));
        let target = probe_tensor(&mut rng, &[sys.len(), 3]);
        let sample = Sample {
            system: sys.clone(),
            energy: rng.random_range(-1.0..1.0),
            forces: Some(target.data().chunks_exact(3).map(|c| Vector3::new(c[0], c[1], c[2])).collect()),
        };
        let objective = Objective::Regression { energy: 1.0, force: 0.5 };
        run(label, model.params(), &|t, p| sample_loss(&model, t, p, &sample, &views, objective), &mut rng)?;
    }

    // Classification loss as used by the benchmarks.
    {
        let model = variant(base.mp_variant, base.energy_head, false, false, &mut rng)?;
        let views = frame_views(&system, &compute_frame(&system, FrameGroup::E3));
        let sample = Sample::energy_only(system.clone(), 1.0);
        run("classification_loss", model.params(), &|t, p| {
            sample_loss(&model, t, p, &sample, &views, Objective::Classification)
        }, &mut rng)?;
    }

    let worst = checks
        .iter()
        .fold(&checks[0], |w, c| if !(c.max_rel_err <= w.max_rel_err) { c } else { w });
    let max_rel_err = worst.max_rel_err;
    Ok(ModelGradcheck {
        tolerance,
        max_rel_err,
        worst_check: worst.label.clone(),
        passed: checks.iter().all(|c| c.passed(tolerance)),
        checks,
    })
}
