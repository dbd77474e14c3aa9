//! Symmetry metrics for a model under a symmetry strategy.
//!
//! Energies are reported in meV and forces in meV/Å (internal eV × 1000).

use std::fmt::Write as _;

use nalgebra::Vector3;
use rand::{RngCore, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::frames::{same_view_multiset, StructureModel};
use crate::geometry::{random_reflection, random_transform, AtomicSystem, EuclideanTransform, Group};
use crate::parallel::pool;
use crate::strategy::{StrategyRegistry, SymmetryStrategy};
use crate::{seeded_rng, Error, Result, Rng};

pub const SCHEMA_VERSION: u32 = 1;
/// Per-coordinate tolerance for deciding that two views coincide.
pub const POS_TOLERANCE: f64 = 1e-8;
pub const POS_NOTE: &str = "pos=1 means the canonical views of D and g(D) coincide for every sampled g. \
The published results table lists the opposite polarity for full frame averaging; this report follows the written definition.";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub method: String,
    pub pos: u8,
    pub rot_i: f64,
    pub refl_i: f64,
    pub pct_diff: Option<f64>,
    pub f_rot_e: Option<f64>,
    pub f_refl_e: Option<f64>,
    pub num_systems: usize,
    pub num_transforms: usize,
    pub degenerate_count: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AuditOptions {
    /// Rotations and, separately, reflections sampled per system.
    pub num_transforms: usize,
    /// Compute force metrics; errors if the model predicts no forces.
    pub forces: bool,
}

impl Default for AuditOptions {
    fn default() -> Self {
        Self {
            num_transforms: 10,
            forces: false,
        }
    }
}

struct PairJob {
    system: usize,
    g: EuclideanTransform,
    reflection: bool,
    seed: u64,
}

struct PairResult {
    system: usize,
    reflection: bool,
    de: f64,
    df: Option<f64>,
    same_views: bool,
}

fn force_residual(base: &[Vector3<f64>], moved: &[Vector3<f64>], g: &EuclideanTransform) -> f64 {
    base.iter()
        .zip(moved)
        .map(|(f, fg)| (fg - g.rotation() * f).amax())
        .fold(0.0, f64::max)
}

fn run_pair(
    model: &dyn StructureModel,
    strategy: &dyn SymmetryStrategy,
    system: &AtomicSystem,
    job: &PairJob,
    forces: bool,
) -> Result<PairResult> {
    let mut rng = Rng::seed_from_u64(job.seed);
    let moved = system.transformed(&job.g);
    let base_views = strategy.views(system, &mut rng);
    let moved_views = strategy.views(&moved, &mut rng);
    let same_views = same_view_multiset(&base_views.views, &moved_views.views, POS_TOLERANCE);
    let p = crate::frames::average_over_views(model, &base_views.views)?;
    let q = crate::frames::average_over_views(model, &moved_views.views)?;
    let de = (p.energy - q.energy).abs();
    let df = if forces {
        match (&p.forces, &q.forces) {
            (Some(f), Some(fg)) => Some(force_residual(f, fg, &job.g)),
            _ => return Err(Error::NoForcesRequested),
        }
    } else {
        None
    };
    Ok(PairResult {
        system: job.system,
        reflection: job.reflection,
        de,
        df,
        same_views,
    })
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Rot-I / Refl-I / %-diff / F-Rot-E / F-Refl-E and Pos for `strategy`
/// wrapped around `model`. Stochastic strategies redraw their view for both
/// members of every pair.
pub fn audit_model(
    model: &dyn StructureModel,
    strategy: &dyn SymmetryStrategy,
    systems: &[AtomicSystem],
    targets: Option<&[f64]>,
    opts: &AuditOptions,
    rng: &mut dyn RngCore,
) -> Result<SymmetryReport> {
    if systems.is_empty() {
        return Err(Error::InvalidSystem("audit needs at least one system".into()));
    }
    if let Some(t) = targets {
        if t.len() != systems.len() {
            return Err(Error::ShapeMismatch {
                op: "audit_model",
                lhs: vec![systems.len()],
                rhs: vec![t.len()],
            });
        }
    }
    let mut degenerate = vec![false; systems.len()];
    let mut jobs = Vec::new();
    for (i, s) in systems.iter().enumerate() {
        degenerate[i] = crate::frames::compute_frame(s, strategy.frame_group()).degenerate;
        for reflection in [false, true] {
            for _ in 0..opts.num_transforms {
                let g = if reflection {
                    random_reflection(rng)
                } else {
                    random_transform(Group::SO3, rng)
                };
                debug_assert_eq!(g.determinant() < 0.0, reflection);
                let seed = rng.next_u64();
                if !degenerate[i] {
                    jobs.push(PairJob {
                        system: i,
                        g,
                        reflection,
                        seed,
                    });
                }
            }
        }
    }
    let results: Vec<PairResult> = pool().install(|| {
        jobs.par_iter()
            .map(|job| run_pair(model, strategy, &systems[job.system], job, opts.forces))
            .collect::<Result<_>>()
    })?;

    let pick = |refl: bool| -> Vec<&PairResult> { results.iter().filter(|r| r.reflection == refl).collect() };
    let (rot, refl) = (pick(false), pick(true));
    let energy = |rs: &[&PairResult]| 1000.0 * mean(&rs.iter().map(|r| r.de).collect::<Vec<_>>());
    let force = |rs: &[&PairResult]| {
        opts.forces
            .then(|| 1000.0 * mean(&rs.iter().filter_map(|r| r.df).collect::<Vec<_>>()))
    };
    let pct_diff = targets.map(|t| {
        let v: Vec<f64> = rot
            .iter()
            .filter(|r| t[r.system] != 0.0)
            .map(|r| 100.0 * r.de / t[r.system].abs())
            .collect();
        mean(&v)
    });
    let evaluated = degenerate.iter().filter(|d| !**d).count();
    let pos = u8::from(evaluated > 0 && results.iter().all(|r| r.same_views));
    Ok(SymmetryReport {
        method: strategy.name().to_string(),
        pos,
        rot_i: energy(&rot),
        refl_i: energy(&refl),
        pct_diff,
        f_rot_e: force(&rot),
        f_refl_e: force(&refl),
        num_systems: systems.len(),
        num_transforms: opts.num_transforms,
        degenerate_count: systems.len() - evaluated,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub schema_version: u32,
    pub seed: u64,
    pub note: String,
    pub reports: Vec<SymmetryReport>,
}

/// [`audit_model`] per method, each starting from `seeded_rng(seed)`.
pub fn compare_methods(
    model: &dyn StructureModel,
    registry: &StrategyRegistry,
    methods: &[&str],
    systems: &[AtomicSystem],
    targets: Option<&[f64]>,
    opts: &AuditOptions,
    seed: u64,
) -> Result<Comparison> {
    let mut reports = Vec::with_capacity(methods.len());
    for name in methods {
        let strategy = registry.get(name)?;
        let mut rng = seeded_rng(seed);
        reports.push(audit_model(model, strategy.as_ref(), systems, targets, opts, &mut rng)?);
    }
    Ok(Comparison {
        schema_version: SCHEMA_VERSION,
        seed,
        note: POS_NOTE.to_string(),
        reports,
    })
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"))
}

/// Aligned text table, one row per report.
pub fn format_table(reports: &[SymmetryReport]) -> String {
    let header = [
        "Method", "Pos", "Rot-I", "Refl-I", "%-diff", "F-Rot-E", "F-Refl-E", "Systems", "Degenerate",
    ];
    let rows: Vec<[String; 9]> = reports
        .iter()
        .map(|r| {
            [
                r.method.clone(),
                r.pos.to_string(),
                format!("{:.4}", r.rot_i),
                format!("{:.4}", r.refl_i),
                cell(r.pct_diff),
                cell(r.f_rot_e),
                cell(r.f_refl_e),
                r.num_systems.to_string(),
                r.degenerate_count.to_string(),
            ]
        })
        .collect();
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in &rows {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, cells: &[&str]| {
        let parts: Vec<String> = cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(k, (c, w))| if k == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(&mut out, &header);
    for row in &rows {
        let cells: Vec<&str> = row.iter().map(String::as_str).collect();
        line(&mut out, &cells);
    }
    out
}
