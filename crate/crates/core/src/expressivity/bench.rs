use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::generators::{BenchmarkInstance, Family};
use crate::diffmath::AdamW;
use crate::faenet::{train_step, FAENet, FAENetConfig, Objective, Sample};
use crate::frames::StructureModel;
use crate::geometry::{random_transform, Group};
use crate::parallel::pool;
use crate::strategy::{StrategyRegistry, SymmetryStrategy};
use crate::{seeded_rng, Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub model: FAENetConfig,
    /// Strategy registry name.
    pub fa_mode: String,
    pub num_layers: usize,
    pub seeds: usize,
    /// Seed of the first run; run `s` uses `base_seed + s`.
    pub base_seed: u64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    /// Random E(3) copies of each class per training epoch.
    pub train_transforms: usize,
    /// Random E(3) copies of each class at test time.
    pub test_transforms: usize,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            // A fine radial basis: the L-fold ring classes differ by a few
            // hundredths of an ångström in their anchor distances for L = 7.
            model: FAENetConfig {
                num_gaussians: 64,
                cutoff: 5.0,
                predict_forces: false,
                ..FAENetConfig::desk()
            },
            fa_mode: "stochastic".into(),
            num_layers: 1,
            seeds: 10,
            base_seed: 0,
            epochs: 30,
            learning_rate: 3e-3,
            weight_decay: 0.0,
            batch_size: 8,
            train_transforms: 20,
            test_transforms: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkResult {
    pub family: Family,
    pub param: usize,
    pub angle: Option<f64>,
    pub layers: usize,
    pub fa_mode: String,
    /// Percent, one per seed.
    pub accuracies: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

fn copies(instance: &BenchmarkInstance, per_class: usize, rng: &mut dyn RngCore) -> Vec<Sample> {
    let mut out = Vec::with_capacity(2 * per_class);
    for (label, system) in [(0.0, &instance.system_a), (1.0, &instance.system_b)] {
        for _ in 0..per_class {
            let g = random_transform(Group::E3, rng);
            out.push(Sample::energy_only(system.transformed(&g), label));
        }
    }
    out
}

/// Percent of `samples` whose logit sign matches the label.
pub fn accuracy(
    model: &dyn StructureModel,
    strategy: &dyn SymmetryStrategy,
    samples: &[Sample],
    rng: &mut dyn RngCore,
) -> Result<f64> {
    let mut correct = 0usize;
    for s in samples {
        let logit = strategy.predict(model, &s.system, rng)?.energy;
        if (logit > 0.0) == (s.energy > 0.5) {
            correct += 1;
        }
    }
    Ok(100.0 * correct as f64 / samples.len() as f64)
}

fn run_seed(
    instance: &BenchmarkInstance,
    cfg: &BenchmarkConfig,
    strategy: &dyn SymmetryStrategy,
    seed: u64,
) -> Result<f64> {
    let mut rng = seeded_rng(seed);
    let model_cfg = FAENetConfig {
        num_interactions: cfg.num_layers,
        predict_forces: false,
        ..cfg.model.clone()
    };
    let mut model = FAENet::new(model_cfg, &mut rng)?;
    let mut opt = AdamW::new(cfg.learning_rate, cfg.weight_decay);
    for _ in 0..cfg.epochs {
        let mut data = copies(instance, cfg.train_transforms, &mut rng);
        data.shuffle(&mut rng);
        for batch in data.chunks(cfg.batch_size) {
            train_step(&mut model, batch, Objective::Classification, strategy, &mut opt, &mut rng)?;
        }
    }
    let test = copies(instance, cfg.test_transforms, &mut rng);
    accuracy(&model, strategy, &test, &mut rng)
}

/// Train a fresh model per seed on random rigid copies of the two classes and
/// report held-out accuracy.
pub fn run_benchmark(instance: &BenchmarkInstance, cfg: &BenchmarkConfig) -> Result<BenchmarkResult> {
    if cfg.seeds == 0 {
        return Err(Error::InvalidConfig("benchmark needs at least one seed".into()));
    }
    if cfg.num_layers == 0 || cfg.batch_size == 0 || cfg.test_transforms == 0 {
        return Err(Error::InvalidConfig(
            "num_layers, batch_size and test_transforms must be positive".into(),
        ));
    }
    let strategy = StrategyRegistry::builtin().get(&cfg.fa_mode)?;
    let accuracies: Vec<f64> = pool().install(|| {
        (0..cfg.seeds as u64)
            .into_par_iter()
            .map(|s| run_seed(instance, cfg, strategy.as_ref(), cfg.base_seed + s))
            .collect::<Result<_>>()
    })?;
    let n = accuracies.len() as f64;
    let mean = accuracies.iter().sum::<f64>() / n;
    let std = (accuracies.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n).sqrt();
    Ok(BenchmarkResult {
        family: instance.family,
        param: instance.param,
        angle: instance.angle,
        layers: cfg.num_layers,
        fa_mode: cfg.fa_mode.clone(),
        accuracies,
        mean,
        std,
    })
}

/// Aligned text table, one row per result.
pub fn format_results(results: &[BenchmarkResult]) -> String {
    let header = ["Family", "Param", "Layers", "Method", "Accuracy", "Seeds"];
    let rows: Vec<[String; 6]> = results
        .iter()
        .map(|r| {
            [
                r.family.to_string(),
                r.param.to_string(),
                r.layers.to_string(),
                r.fa_mode.clone(),
                format!("{:.1} ± {:.1}", r.mean, r.std),
                r.accuracies.len().to_string(),
            ]
        })
        .collect();
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in &rows {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    let mut line = |cells: Vec<&str>| {
        let parts: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, &w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
            .collect();
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(header.to_vec());
    for row in &rows {
        line(row.iter().map(String::as_str).collect());
    }
    out
}
