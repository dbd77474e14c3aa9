use std::sync::Arc;

use nalgebra::Vector3;
use rand::RngCore;

use super::config::{EnergyHead, FAENetConfig, MpVariant};
use crate::diffmath::{glorot_uniform, ParamStore, Tape, Tensor, Var};
use crate::elements::NUM_ELEMENTS;
use crate::frames::{Prediction, StructureModel};
use crate::geometry::{build_radius_graph, AtomicSystem};
use crate::strategy::SymmetryStrategy;
use crate::{Error, Result};

/// Gaussian expansion of `d` with centres evenly spaced on `[0, cutoff]` and
/// width equal to the centre spacing.
pub fn rbf(d: f64, num_gaussians: usize, cutoff: f64) -> Vec<f64> {
    if num_gaussians == 1 {
        return vec![(-d * d / (2.0 * cutoff * cutoff)).exp()];
    }
    let step = cutoff / (num_gaussians - 1) as f64;
    (0..num_gaussians)
        .map(|k| {
            let mu = k as f64 * step;
            (-(d - mu).powi(2) / (2.0 * step * step)).exp()
        })
        .collect()
}

#[derive(Clone, Copy, Debug)]
struct Linear {
    w: usize,
    b: Option<usize>,
}

#[derive(Clone, Debug)]
struct Layer {
    filter: Option<Linear>,
    node: usize,
    update: Linear,
}

#[derive(Clone, Debug)]
struct Layout {
    embedding: usize,
    property: Option<Linear>,
    edge: [Linear; 2],
    layers: Vec<Layer>,
    alpha: Option<[Linear; 2]>,
    value: [Linear; 2],
    force: Option<[Linear; 2]>,
}

struct Builder<'a> {
    params: ParamStore,
    rng: &'a mut dyn RngCore,
}

impl Builder<'_> {
    fn linear(&mut self, name: &str, fan_in: usize, fan_out: usize, bias: bool) -> Linear {
        let w = self.params.insert(format!("{name}.weight"), glorot_uniform(fan_in, fan_out, self.rng));
        let b = bias.then(|| self.params.insert(format!("{name}.bias"), Tensor::zeros(&[fan_out])));
        Linear { w, b }
    }

    fn mlp(&mut self, name: &str, dims: [usize; 3]) -> [Linear; 2] {
        [
            self.linear(&format!("{name}.0"), dims[0], dims[1], true),
            self.linear(&format!("{name}.1"), dims[1], dims[2], true),
        ]
    }
}

/// Graph tensors for one view, shared by every layer.
#[derive(Clone, Debug)]
pub struct GraphInputs {
    pub num_nodes: usize,
    /// Embedding rows (`Z − 1`).
    pub species: Arc<[usize]>,
    pub src: Arc<[usize]>,
    pub dst: Arc<[usize]>,
    /// Edges × 3 relative vectors `x_dst − x_src` (with cell offset).
    pub rel: Tensor,
    /// Edges × num_gaussians.
    pub rbf: Tensor,
}

/// Energy (rank 0) and canonical-space forces (n × 3) on a tape.
#[derive(Clone, Copy, Debug)]
pub struct ViewOutput {
    pub energy: Var,
    pub forces: Option<Var>,
}

/// FAENet: learned element embedding, edge MLP over `rel ‖ RBF(d)`,
/// continuous-filter interactions and a gated energy readout.
#[derive(Clone, Debug)]
pub struct FAENet {
    config: FAENetConfig,
    params: ParamStore,
    layout: Layout,
    property_table: Option<Arc<Tensor>>,
}

impl FAENet {
    pub fn new(config: FAENetConfig, rng: &mut dyn RngCore) -> Result<Self> {
        config.validate()?;
        let h = config.hidden_channels;
        let f = config.num_filters;
        let g = config.num_gaussians;
        let hh = config.head_channels();
        let mut b = Builder {
            params: ParamStore::new(),
            rng,
        };
        let embedding = b.params.insert(
            "embedding",
            glorot_uniform(NUM_ELEMENTS, config.embedding_channels(), b.rng),
        );
        let property_table = match &config.property_table {
            Some(rows) => Some(Arc::new(Tensor::from_rows(rows)?)),
            None => None,
        };
        let property = property_table
            .as_ref()
            .map(|t| b.linear("property", t.shape()[1], config.property_channels, true));
        let edge = b.mlp("edge", [3 + g, f, f]);
        let layers = (0..config.num_interactions)
            .map(|l| {
                let filter = match config.mp_variant {
                    MpVariant::Standard => Some(b.linear(&format!("interaction{l}.filter"), f + 2 * h, f, true)),
                    MpVariant::Simple => Some(b.linear(&format!("interaction{l}.filter"), f, f, true)),
                    MpVariant::Basic => None,
                };
                let node = b.linear(&format!("interaction{l}.node"), h, f, false).w;
                let update = b.linear(&format!("interaction{l}.update"), f, h, true);
                Layer { filter, node, update }
            })
            .collect();
        let alpha = (config.energy_head == EnergyHead::Weighted).then(|| b.mlp("energy.alpha", [h, hh, 1]));
        let value = b.mlp("energy.value", [h, hh, 1]);
        let force = config
            .predict_forces
            .then(|| b.mlp("force", [h, config.force_hidden_channels, 3]));
        Ok(Self {
            config,
            params: b.params,
            layout: Layout {
                embedding,
                property,
                edge,
                layers,
                alpha,
                value,
                force,
            },
            property_table,
        })
    }

    pub fn config(&self) -> &FAENetConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn num_parameters(&self) -> usize {
        self.params.num_scalars()
    }

    /// Store indices of the force-head tensors (empty when forces are off).
    pub fn force_head_params(&self) -> Vec<usize> {
        self.layout
            .force
            .iter()
            .flatten()
            .flat_map(|l| std::iter::once(l.w).chain(l.b))
            .collect()
    }

    /// Radius graph and edge features of `system`, in its own coordinates.
    pub fn prepare(&self, system: &AtomicSystem) -> Result<GraphInputs> {
        let species = system
            .atomic_numbers()
            .iter()
            .map(|&z| {
                if (z as usize) <= NUM_ELEMENTS {
                    Ok(z as usize - 1)
                } else {
                    Err(Error::UnknownElement(format!("Z={z}")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let graph = build_radius_graph(system, self.config.cutoff, self.config.max_neighbors)?;
        let e = graph.len();
        let g = self.config.num_gaussians;
        let mut rel = Vec::with_capacity(e * 3);
        let mut basis = Vec::with_capacity(e * g);
        for (v, &d) in graph.rel_vectors.iter().zip(&graph.distances) {
            rel.extend_from_slice(v.as_slice());
            basis.extend(rbf(d, g, self.config.cutoff));
        }
        Ok(GraphInputs {
            num_nodes: system.len(),
            species: species.into(),
            src: graph.sources().into(),
            dst: graph.destinations().into(),
            rel: Tensor::matrix(e, 3, rel)?,
            rbf: Tensor::matrix(e, g, basis)?,
        })
    }

    fn apply(&self, tape: &mut Tape, p: &[Var], lin: Linear, x: Var) -> Result<Var> {
        let y = tape.matmul(x, p[lin.w])?;
        match lin.b {
            Some(b) => tape.add(y, p[b]),
            None => Ok(y),
        }
    }

    fn mlp(&self, tape: &mut Tape, p: &[Var], layers: [Linear; 2], x: Var) -> Result<Var> {
        let hidden = self.apply(tape, p, layers[0], x)?;
        let hidden = tape.swish(hidden);
        self.apply(tape, p, layers[1], hidden)
    }

    /// `h⁰`: embedding rows of each atom's element, with projected element
    /// properties appended when a property table is configured.
    pub fn embed_nodes(&self, tape: &mut Tape, p: &[Var], inputs: &GraphInputs) -> Result<Var> {
        let h = tape.gather_rows(p[self.layout.embedding], inputs.species.clone())?;
        match (self.layout.property, &self.property_table) {
            (Some(lin), Some(table)) => {
                let t = tape.constant_shared(table.clone());
                let proj = self.apply(tape, p, lin, t)?;
                let proj = tape.gather_rows(proj, inputs.species.clone())?;
                tape.concat(&[h, proj], 1)
            }
            _ => Ok(h),
        }
    }

    /// `e_ij = swish(MLP(rel ‖ RBF(d)))`, edges × num_filters.
    pub fn embed_edges(&self, tape: &mut Tape, p: &[Var], inputs: &GraphInputs) -> Result<Var> {
        let rel = tape.constant(inputs.rel.clone());
        let basis = tape.constant(inputs.rbf.clone());
        let x = tape.concat(&[rel, basis], 1)?;
        let hidden = self.apply(tape, p, self.layout.edge[0], x)?;
        let hidden = tape.swish(hidden);
        let out = self.apply(tape, p, self.layout.edge[1], hidden)?;
        Ok(tape.swish(out))
    }

    /// One interaction block: `h + swish(Linear(Σ_j f_ij ⊙ W h_j))`.
    pub fn interaction(
        &self,
        tape: &mut Tape,
        p: &[Var],
        layer: usize,
        h: Var,
        e: Var,
        inputs: &GraphInputs,
    ) -> Result<Var> {
        let spec = &self.layout.layers[layer];
        let filter = match (self.config.mp_variant, spec.filter) {
            (MpVariant::Standard, Some(lin)) => {
                let hi = tape.gather_rows(h, inputs.dst.clone())?;
                let hj = tape.gather_rows(h, inputs.src.clone())?;
                let x = tape.concat(&[e, hi, hj], 1)?;
                let y = self.apply(tape, p, lin, x)?;
                tape.swish(y)
            }
            (MpVariant::Simple, Some(lin)) => {
                let y = self.apply(tape, p, lin, e)?;
                tape.swish(y)
            }
            _ => e,
        };
        let wh = tape.matmul(h, p[spec.node])?;
        let wh_src = tape.gather_rows(wh, inputs.src.clone())?;
        let messages = tape.mul(filter, wh_src)?;
        let agg = tape.segment_sum(messages, inputs.dst.clone(), inputs.num_nodes)?;
        let upd = self.apply(tape, p, spec.update, agg)?;
        let upd = tape.swish(upd);
        tape.add(h, upd)
    }

    /// Energy and force heads on the output representation.
    pub fn readout(&self, tape: &mut Tape, p: &[Var], h_out: Var) -> Result<ViewOutput> {
        let value = self.mlp(tape, p, self.layout.value, h_out)?;
        let per_atom = match self.layout.alpha {
            Some(alpha) => {
                let a = self.mlp(tape, p, alpha, h_out)?;
                let a = tape.sigmoid(a);
                tape.mul(a, value)?
            }
            None => value,
        };
        let energy = tape.sum(per_atom);
        let forces = match self.layout.force {
            Some(layers) => Some(self.mlp(tape, p, layers, h_out)?),
            None => None,
        };
        Ok(ViewOutput { energy, forces })
    }

    /// Full network on one view, in that view's coordinates.
    pub fn forward_view(&self, tape: &mut Tape, p: &[Var], inputs: &GraphInputs) -> Result<ViewOutput> {
        let mut h = self.embed_nodes(tape, p, inputs)?;
        let e = self.embed_edges(tape, p, inputs)?;
        let mut jump: Option<Var> = None;
        for layer in 0..self.layout.layers.len() {
            h = self.interaction(tape, p, layer, h, e, inputs)?;
            if self.config.jumping_connections {
                jump = Some(match jump {
                    Some(acc) => tape.add(acc, h)?,
                    None => h,
                });
            }
        }
        self.readout(tape, p, jump.unwrap_or(h))
    }

    /// Prediction under a symmetry strategy (full / stochastic FA, data
    /// augmentation or none).
    pub fn forward(
        &self,
        system: &AtomicSystem,
        strategy: &dyn SymmetryStrategy,
        rng: &mut dyn RngCore,
    ) -> Result<Prediction> {
        strategy.predict(self, system, rng)
    }
}

impl StructureModel for FAENet {
    fn predict(&self, system: &AtomicSystem) -> Result<Prediction> {
        let inputs = self.prepare(system)?;
        let mut tape = Tape::new();
        let p = self.params.bind_constant(&mut tape);
        let out = self.forward_view(&mut tape, &p, &inputs)?;
        let energy = tape.value(out.energy).data()[0];
        let forces = out.forces.map(|f| {
            tape.value(f)
                .data()
                .chunks_exact(3)
                .map(|c| Vector3::new(c[0], c[1], c[2]))
                .collect()
        });
        Ok(Prediction { energy, forces })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;

    #[test]
    fn rbf_endpoints() {
        let v = rbf(0.0, 10, 6.0);
        assert_eq!(v.len(), 10);
        assert_eq!(v[0], 1.0);
        let w = rbf(6.0, 10, 6.0);
        assert!((w[9] - 1.0).abs() < 1e-15);
        assert!(w.iter().all(|&x| x > 0.0 && x <= 1.0));
    }

    #[test]
    fn default_parameter_count() {
        let m = FAENet::new(FAENetConfig::default(), &mut seeded_rng(0)).unwrap();
        // 118·384 + edge MLP + 5 interactions + two energy heads, by hand:
        // 45312 + 282720 + 5·968544 + 148226
        assert_eq!(m.num_parameters(), 5_318_978);
    }

    #[test]
    fn single_atom_is_finite() {
        let m = FAENet::new(FAENetConfig::desk(), &mut seeded_rng(1)).unwrap();
        let s = AtomicSystem::new(vec![Vector3::new(0.3, 0.1, -2.0)], vec![8]).unwrap();
        let p = m.predict(&s).unwrap();
        assert!(p.energy.is_finite());
        assert_eq!(p.forces.unwrap().len(), 1);
    }

    #[test]
    fn unknown_element() {
        let m = FAENet::new(FAENetConfig::desk(), &mut seeded_rng(1)).unwrap();
        let s = AtomicSystem::new(vec![Vector3::zeros()], vec![119]).unwrap();
        assert!(matches!(m.predict(&s), Err(Error::UnknownElement(_))));
    }
}
