//! PCA frames, canonicalization and frame-averaged prediction.
//!
//! For a frame `F(X) = {(U, t)}` a model `Φ` is averaged as
//! `⟨Φ⟩(X) = 1/|F| Σ_g ρ₂(g) Φ(ρ₁(g)⁻¹ X)`, where `ρ₁(g)⁻¹` centres and rotates
//! into the eigenbasis and `ρ₂(g)` is the identity on energies and `v ↦ vUᵀ`
//! on per-atom vectors.

mod canonical;
mod frame;

pub use canonical::{
    canonicalize, same_view_multiset, uncanonicalize_output, uncanonicalize_vectors,
    view_distance, CanonicalView, ModelOutput, OutputKind,
};
pub use frame::{compute_frame, frame_from_text, frame_to_text, Frame, FrameGroup, DEGENERACY_GAP};

use nalgebra::Vector3;
use rand::{Rng, RngCore};
use rayon::prelude::*;

use crate::geometry::AtomicSystem;
use crate::Result;

/// Energy (invariant) and optional per-atom forces (equivariant).
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub energy: f64,
    pub forces: Option<Vec<Vector3<f64>>>,
}

impl Prediction {
    pub fn energy(energy: f64) -> Self {
        Self {
            energy,
            forces: None,
        }
    }
}

/// A structure → property map that can be wrapped by frame averaging.
pub trait StructureModel: Sync {
    fn predict(&self, system: &AtomicSystem) -> Result<Prediction>;
}

impl<F> StructureModel for F
where
    F: Fn(&AtomicSystem) -> Result<Prediction> + Sync,
{
    fn predict(&self, system: &AtomicSystem) -> Result<Prediction> {
        self(system)
    }
}

/// Evaluate `model` on every view, map forces through `ρ₂` and take the mean.
pub fn average_over_views(
    model: &dyn StructureModel,
    views: &[CanonicalView],
) -> Result<Prediction> {
    let outputs: Vec<Prediction> = views
        .par_iter()
        .map(|v| {
            let mut p = model.predict(&v.system)?;
            if let Some(f) = p.forces.as_mut() {
                *f = uncanonicalize_vectors(f, &v.transform);
            }
            Ok(p)
        })
        .collect::<Result<_>>()?;

    let k = outputs.len() as f64;
    let energy = outputs.iter().map(|p| p.energy).sum::<f64>() / k;
    let forces = if outputs.iter().all(|p| p.forces.is_some()) {
        let n = outputs[0].forces.as_ref().map_or(0, Vec::len);
        let mut acc = vec![Vector3::zeros(); n];
        for p in &outputs {
            for (a, f) in acc.iter_mut().zip(p.forces.as_ref().unwrap()) {
                *a += f;
            }
        }
        Some(acc.into_iter().map(|a| a / k).collect())
    } else {
        None
    };
    Ok(Prediction { energy, forces })
}

/// Canonical views for every element of `frame`.
pub fn frame_views(system: &AtomicSystem, frame: &Frame) -> Vec<CanonicalView> {
    frame.elements.iter().map(|g| canonicalize(system, g)).collect()
}

/// Canonical view for one element drawn uniformly from `frame`.
pub fn sample_view(system: &AtomicSystem, frame: &Frame, rng: &mut dyn RngCore) -> CanonicalView {
    let k = rng.random_range(0..frame.len());
    canonicalize(system, &frame.elements[k])
}

/// Full frame averaging over all `|F(X)|` elements.
pub fn full_fa_predict(
    model: &dyn StructureModel,
    system: &AtomicSystem,
    group: FrameGroup,
) -> Result<Prediction> {
    let frame = compute_frame(system, group);
    average_over_views(model, &frame_views(system, &frame))
}

/// Stochastic frame averaging: one uniformly sampled frame element.
pub fn stochastic_fa_predict(
    model: &dyn StructureModel,
    system: &AtomicSystem,
    group: FrameGroup,
    rng: &mut dyn RngCore,
) -> Result<Prediction> {
    let frame = compute_frame(system, group);
    average_over_views(model, &[sample_view(system, &frame, rng)])
}
