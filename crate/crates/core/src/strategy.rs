//! Symmetry-preservation methods behind a common trait, registered by name.
//!
//! Every method reduces to "which views does the model see": full frame
//! averaging returns all frame elements, stochastic frame averaging one sampled
//! element, data augmentation one random rigid motion, and the plain model the
//! identity view. Outputs are always mapped back with the view's transform and
//! averaged, so the same prediction path serves all of them.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::RngCore;

use crate::frames::{
    average_over_views, canonicalize, compute_frame, frame_views, sample_view, CanonicalView,
    FrameGroup, Prediction, StructureModel,
};
use crate::geometry::{random_transform, AtomicSystem, EuclideanTransform, Group};
use crate::{Error, Result};

/// Views a model is evaluated on for one input, with the input's frame status.
#[derive(Clone, Debug)]
pub struct ViewSet {
    pub views: Vec<CanonicalView>,
    pub degenerate: bool,
}

pub trait SymmetryStrategy: Send + Sync {
    /// Registry key.
    fn name(&self) -> &str;

    /// Group whose PCA frame decides degeneracy.
    fn frame_group(&self) -> FrameGroup {
        FrameGroup::E3
    }

    /// Whether repeated calls on the same input can return different views.
    fn is_stochastic(&self) -> bool;

    fn views(&self, system: &AtomicSystem, rng: &mut dyn RngCore) -> ViewSet;

    fn predict(
        &self,
        model: &dyn StructureModel,
        system: &AtomicSystem,
        rng: &mut dyn RngCore,
    ) -> Result<Prediction> {
        let set = self.views(system, rng);
        average_over_views(model, &set.views)
    }
}

/// Average over every frame element.
#[derive(Clone, Debug)]
pub struct FullFrameAveraging {
    name: String,
    group: FrameGroup,
}

impl FullFrameAveraging {
    pub fn new(name: impl Into<String>, group: FrameGroup) -> Self {
        Self {
            name: name.into(),
            group,
        }
    }
}

impl SymmetryStrategy for FullFrameAveraging {
    fn name(&self) -> &str {
        &self.name
    }

    fn frame_group(&self) -> FrameGroup {
        self.group
    }

    fn is_stochastic(&self) -> bool {
        false
    }

    fn views(&self, system: &AtomicSystem, _rng: &mut dyn RngCore) -> ViewSet {
        let frame = compute_frame(system, self.group);
        ViewSet {
            views: frame_views(system, &frame),
            degenerate: frame.degenerate,
        }
    }
}

/// One frame element sampled uniformly per call.
#[derive(Clone, Debug)]
pub struct StochasticFrameAveraging {
    name: String,
    group: FrameGroup,
}

impl StochasticFrameAveraging {
    pub fn new(name: impl Into<String>, group: FrameGroup) -> Self {
        Self {
            name: name.into(),
            group,
        }
    }
}

impl SymmetryStrategy for StochasticFrameAveraging {
    fn name(&self) -> &str {
        &self.name
    }

    fn frame_group(&self) -> FrameGroup {
        self.group
    }

    fn is_stochastic(&self) -> bool {
        true
    }

    fn views(&self, system: &AtomicSystem, rng: &mut dyn RngCore) -> ViewSet {
        let frame = compute_frame(system, self.group);
        ViewSet {
            views: vec![sample_view(system, &frame, rng)],
            degenerate: frame.degenerate,
        }
    }
}

/// A random rigid motion per call; forces are rotated back afterwards.
#[derive(Clone, Debug)]
pub struct DataAugmentation {
    group: Group,
}

impl DataAugmentation {
    pub fn new(group: Group) -> Self {
        Self { group }
    }
}

impl SymmetryStrategy for DataAugmentation {
    fn name(&self) -> &str {
        "data_augment"
    }

    fn is_stochastic(&self) -> bool {
        true
    }

    fn views(&self, system: &AtomicSystem, rng: &mut dyn RngCore) -> ViewSet {
        // gD is the canonical view for g⁻¹, whose ρ₂ undoes the motion.
        let g = random_transform(self.group, rng);
        ViewSet {
            views: vec![canonicalize(system, &g.inverse())],
            degenerate: compute_frame(system, FrameGroup::E3).degenerate,
        }
    }
}

/// The bare model on raw coordinates.
#[derive(Clone, Debug, Default)]
pub struct NoSymmetry;

impl SymmetryStrategy for NoSymmetry {
    fn name(&self) -> &str {
        "none"
    }

    fn is_stochastic(&self) -> bool {
        false
    }

    fn views(&self, system: &AtomicSystem, _rng: &mut dyn RngCore) -> ViewSet {
        ViewSet {
            views: vec![CanonicalView {
                system: system.clone(),
                transform: EuclideanTransform::identity(),
            }],
            degenerate: compute_frame(system, FrameGroup::E3).degenerate,
        }
    }
}

/// Name → strategy table.
#[derive(Clone, Default)]
pub struct StrategyRegistry {
    entries: BTreeMap<String, Arc<dyn SymmetryStrategy>>,
}

impl StrategyRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    /// `full`, `stochastic`, `se3_full`, `se3_stochastic`, `z2d_full`,
    /// `z2d_stochastic`, `data_augment` and `none`.
    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(FullFrameAveraging::new("full", FrameGroup::E3)));
        r.register(Arc::new(StochasticFrameAveraging::new("stochastic", FrameGroup::E3)));
        r.register(Arc::new(FullFrameAveraging::new("se3_full", FrameGroup::SE3)));
        r.register(Arc::new(StochasticFrameAveraging::new("se3_stochastic", FrameGroup::SE3)));
        r.register(Arc::new(FullFrameAveraging::new("z2d_full", FrameGroup::ZAxis2D)));
        r.register(Arc::new(StochasticFrameAveraging::new("z2d_stochastic", FrameGroup::ZAxis2D)));
        r.register(Arc::new(DataAugmentation::new(Group::E3)));
        r.register(Arc::new(NoSymmetry));
        r
    }

    /// Insert or replace a strategy under its own name.
    pub fn register(&mut self, strategy: Arc<dyn SymmetryStrategy>) {
        self.entries.insert(strategy.name().to_string(), strategy);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn SymmetryStrategy>> {
        self.entries
            .get(name)
            .cloned()
            .ok_or_else(|| Error::UnknownStrategy(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

/// Shortcut for `StrategyRegistry::builtin().get(name)`.
pub fn builtin(name: &str) -> Result<Arc<dyn SymmetryStrategy>> {
    StrategyRegistry::builtin().get(name)
}
