use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use faframe::audit::{compare_methods, format_table, AuditOptions, SymmetryReport, POS_NOTE};
use faframe::diffmath::{BackwardFault, GradcheckOptions, OpKind, TOLERANCE};
use faframe::expressivity::{default_angle, format_results, gen_k_chain, gen_rot_sym, run_benchmark, BenchmarkConfig};
use faframe::faenet::{gradcheck_model, FAENet, FAENetConfig, ModelGradcheck};
use faframe::frames::{compute_frame, frame_views, sample_view};
use faframe::geometry::{build_radius_graph, AtomicSystem};
use faframe::xyz::{read_frames, to_string, XyzFrame};
use faframe::{seeded_rng, StrategyRegistry};
use serde::Serialize;

use crate::args::{AuditArgs, BenchArgs, BenchCommon, BenchFamily, CanonicalizeArgs, GradcheckArgs, ModelArgs};
use crate::report::{to_json, Header};
use crate::{CliError, EXIT_CHECK_FAILED, EXIT_DEGENERATE, EXIT_OK};

type Result<T> = std::result::Result<T, CliError>;

/// What a command produced; `run` prints it and returns `exit_code`.
#[derive(Debug, Default)]
pub struct Outcome {
    pub stdout: String,
    pub warnings: Vec<String>,
    pub exit_code: i32,
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Defaults, then the config file, then individual flags.
fn resolve_model(args: &ModelArgs, defaults: FAENetConfig) -> Result<FAENetConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|source| CliError::Io {
                path: path.display().to_string(),
                source,
            })?;
            let mut value: serde_json::Value = serde_json::to_value(&defaults).expect("config serializes");
            let file: serde_json::Value = serde_json::from_str(&text).map_err(faframe::Error::from)?;
            let serde_json::Value::Object(fields) = file else {
                return Err(CliError::Usage(format!("{}: config must be a JSON object", path.display())));
            };
            for (k, v) in fields {
                value[k] = v;
            }
            serde_json::from_value(value).map_err(faframe::Error::from)?
        }
        None => defaults,
    };
    if let Some(v) = args.hidden_channels {
        cfg.hidden_channels = v;
    }
    if let Some(v) = args.num_filters {
        cfg.num_filters = v;
    }
    if let Some(v) = args.num_gaussians {
        cfg.num_gaussians = v;
    }
    if let Some(v) = args.num_interactions {
        cfg.num_interactions = v;
    }
    if let Some(v) = args.cutoff {
        cfg.cutoff = v;
    }
    if let Some(v) = args.max_neighbors {
        cfg.max_neighbors = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn flag(b: bool) -> String {
    if b { "T" } else { "F" }.to_string()
}

pub fn cmd_canonicalize(args: &CanonicalizeArgs) -> Result<Outcome> {
    let frames = read_frames(&args.input)?;
    let mut rng = args.sample.map(seeded_rng);
    let mut out = Vec::new();
    let mut warnings = Vec::new();
    for (index, input) in frames.iter().enumerate() {
        let frame = compute_frame(&input.system, args.group);
        if frame.degenerate {
            warnings.push(format!(
                "structure {index} of {} has a degenerate frame; emitting the identity view",
                args.input.display()
            ));
        }
        let views = match rng.as_mut() {
            Some(r) => vec![sample_view(&input.system, &frame, r)],
            None => frame_views(&input.system, &frame),
        };
        for (k, view) in views.iter().enumerate() {
            let mut info: BTreeMap<String, String> = input.info.clone();
            info.insert("structure".into(), index.to_string());
            info.insert("group".into(), args.group.to_string());
            info.insert("degenerate".into(), flag(frame.degenerate));
            info.insert("frame_size".into(), frame.len().to_string());
            if let Some(seed) = args.sample {
                info.insert("sample_seed".into(), seed.to_string());
            } else {
                info.insert("frame_element".into(), k.to_string());
            }
            let d = view.transform.rotation().determinant().round();
            info.insert("frame_det".into(), format!("{d}"));
            if let Some(cutoff) = args.cutoff {
                let g = build_radius_graph(&view.system, cutoff, args.max_neighbors)?;
                info.insert("edges".into(), g.len().to_string());
            }
            out.push(XyzFrame {
                system: view.system.clone(),
                info,
            });
        }
    }
    let text = to_string(&out);
    let exit_code = if warnings.is_empty() { EXIT_OK } else { EXIT_DEGENERATE };
    let stdout = match &args.output {
        Some(path) => {
            write_file(path, &text)?;
            String::new()
        }
        None => text,
    };
    Ok(Outcome {
        stdout,
        warnings,
        exit_code,
    })
}

fn system_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|source| CliError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && matches!(p.extension().and_then(|e| e.to_str()), Some("xyz" | "extxyz")))
        .collect();
    files.sort();
    Ok(files)
}

#[derive(Serialize)]
struct AuditRun<'a> {
    model: &'a FAENetConfig,
    fa_modes: &'a [String],
    num_transforms: usize,
    forces: bool,
    systems: &'a [String],
    checkpoint: Option<String>,
}

#[derive(Serialize)]
struct AuditReport<'a> {
    #[serde(flatten)]
    header: Header<'a>,
    #[serde(flatten)]
    run: &'a AuditRun<'a>,
    note: &'static str,
    reports: Vec<SymmetryReport>,
}

pub fn cmd_audit(args: &AuditArgs) -> Result<Outcome> {
    let files = system_files(&args.systems)?;
    if files.is_empty() {
        return Err(CliError::Usage(format!("no .xyz files in {}", args.systems.display())));
    }
    if args.transforms == 0 {
        return Err(CliError::Usage("--transforms must be positive".into()));
    }
    let registry = StrategyRegistry::builtin();
    for m in &args.fa_mode {
        registry.get(m)?;
    }
    let mut systems: Vec<AtomicSystem> = Vec::new();
    let mut targets: Vec<Option<f64>> = Vec::new();
    let mut labels = Vec::new();
    for path in &files {
        let name = path.file_name().unwrap().to_string_lossy().to_string();
        for (i, frame) in read_frames(path)?.into_iter().enumerate() {
            labels.push(format!("{name}:{i}"));
            targets.push(frame.info_f64("energy"));
            systems.push(frame.system);
        }
    }
    let targets: Option<Vec<f64>> = targets.into_iter().collect();
    let model_cfg = resolve_model(&args.model, FAENetConfig::default())?;
    let model_cfg = FAENetConfig {
        predict_forces: model_cfg.predict_forces || args.forces,
        ..model_cfg
    };
    let mut model = FAENet::new(model_cfg.clone(), &mut seeded_rng(args.seed))?;
    if let Some(ck) = &args.checkpoint {
        model.params_mut().load(ck)?;
    }
    let opts = AuditOptions {
        num_transforms: args.transforms,
        forces: args.forces,
    };
    let methods: Vec<&str> = args.fa_mode.iter().map(String::as_str).collect();
    let table = compare_methods(&model, &registry, &methods, &systems, targets.as_deref(), &opts, args.seed)?;
    let run = AuditRun {
        model: &model_cfg,
        fa_modes: &args.fa_mode,
        num_transforms: args.transforms,
        forces: args.forces,
        systems: &labels,
        checkpoint: args.checkpoint.as_ref().map(|p| p.display().to_string()),
    };
    let mut warnings = Vec::new();
    for r in &table.reports {
        if r.degenerate_count > 0 {
            warnings.push(format!(
                "{}: {} of {} systems have degenerate frames and were excluded from the means",
                r.method, r.degenerate_count, r.num_systems
            ));
        }
    }
    let report = AuditReport {
        header: Header::new("audit", args.seed, &run),
        run: &run,
        note: POS_NOTE,
        reports: table.reports,
    };
    write_file(&args.output, &to_json(&report))?;
    let mut stdout = format_table(&report.reports);
    let _ = writeln!(stdout, "report written to {}", args.output.display());
    let exit_code = if warnings.is_empty() { EXIT_OK } else { EXIT_DEGENERATE };
    Ok(Outcome {
        stdout,
        warnings,
        exit_code,
    })
}

fn bench_config(common: &BenchCommon, layers: usize) -> Result<BenchmarkConfig> {
    let defaults = BenchmarkConfig::default();
    Ok(BenchmarkConfig {
        model: resolve_model(&common.model, defaults.model.clone())?,
        fa_mode: common.fa_mode.clone(),
        num_layers: layers,
        seeds: common.seeds,
        base_seed: common.seed,
        epochs: common.epochs.unwrap_or(defaults.epochs),
        learning_rate: common.learning_rate.unwrap_or(defaults.learning_rate),
        ..defaults
    })
}

#[derive(Serialize)]
struct BenchReport<'a> {
    #[serde(flatten)]
    header: Header<'a>,
    configs: &'a [BenchmarkConfig],
    results: Vec<faframe::expressivity::BenchmarkResult>,
}

pub fn cmd_bench(args: &BenchArgs) -> Result<Outcome> {
    let (instances, common) = match &args.family {
        BenchFamily::Kchains { k, common } => (vec![gen_k_chain(*k)?], common),
        BenchFamily::Rotsym {
            orders,
            angle,
            common,
        } => {
            if orders.is_empty() {
                return Err(CliError::Usage("--L needs at least one order".into()));
            }
            let inst = orders
                .iter()
                .map(|&l| {
                    if l < 2 {
                        return Err(CliError::Usage(format!("--L must be >= 2, got {l}")));
                    }
                    Ok(gen_rot_sym(l, angle.unwrap_or_else(|| default_angle(l)))?)
                })
                .collect::<Result<Vec<_>>>()?;
            (inst, common)
        }
    };
    if common.seeds == 0 {
        return Err(CliError::Usage("--seeds must be positive".into()));
    }
    if common.layers.is_empty() || common.layers.contains(&0) {
        return Err(CliError::Usage("--layers must be positive".into()));
    }
    let configs = common
        .layers
        .iter()
        .map(|&l| bench_config(common, l))
        .collect::<Result<Vec<_>>>()?;
    StrategyRegistry::builtin().get(&common.fa_mode)?;
    let mut results = Vec::new();
    for inst in &instances {
        for cfg in &configs {
            results.push(run_benchmark(inst, cfg)?);
        }
    }
    let report = BenchReport {
        header: Header::new("bench", common.seed, &(&args.family_name(), &configs)),
        configs: &configs,
        results,
    };
    write_file(&common.output, &to_json(&report))?;
    let mut stdout = format_results(&report.results);
    let _ = writeln!(stdout, "results written to {}", common.output.display());
    Ok(Outcome {
        stdout,
        ..Outcome::default()
    })
}

impl BenchArgs {
    fn family_name(&self) -> String {
        match &self.family {
            BenchFamily::Kchains { k, .. } => format!("kchains k={k}"),
            BenchFamily::Rotsym { orders, angle, .. } => format!("rotsym L={orders:?} angle={angle:?}"),
        }
    }
}

#[derive(Serialize)]
struct GradcheckRun<'a> {
    model: &'a FAENetConfig,
    samples_per_tensor: usize,
    step: f64,
    floor: f64,
    corrupt_op: Option<&'a str>,
    corrupt_factor: Option<f64>,
}

#[derive(Serialize)]
struct GradcheckReportJson<'a> {
    #[serde(flatten)]
    header: Header<'a>,
    #[serde(flatten)]
    run: &'a GradcheckRun<'a>,
    status: &'static str,
    #[serde(flatten)]
    result: &'a ModelGradcheck,
}

pub fn cmd_gradcheck(args: &GradcheckArgs) -> Result<Outcome> {
    let cfg = resolve_model(&args.model, FAENetConfig::default())?;
    let fault = match &args.corrupt_op {
        Some(name) => Some(BackwardFault {
            op: OpKind::from_name(name).ok_or_else(|| CliError::Usage(format!("unknown op {name}")))?,
            factor: args.corrupt_factor,
        }),
        None => None,
    };
    let opts = GradcheckOptions {
        samples_per_tensor: args.samples,
        fault,
        ..GradcheckOptions::default()
    };
    let result = gradcheck_model(&cfg, args.seed, &opts, TOLERANCE)?;
    let run = GradcheckRun {
        model: &cfg,
        samples_per_tensor: args.samples,
        step: opts.step,
        floor: opts.floor,
        corrupt_op: args.corrupt_op.as_deref(),
        corrupt_factor: fault.map(|f| f.factor),
    };
    let status = if result.passed { "PASS" } else { "FAIL" };
    let report = GradcheckReportJson {
        header: Header::new("gradcheck", args.seed, &run),
        run: &run,
        status,
        result: &result,
    };
    write_file(&args.output, &to_json(&report))?;
    let mut stdout = String::new();
    let width = result.checks.iter().map(|c| c.label.len()).max().unwrap_or(0);
    for c in &result.checks {
        let mark = if c.passed(TOLERANCE) { "ok" } else { "FAIL" };
        let _ = writeln!(stdout, "{:<width$}  {:.3e}  {:<4}  worst tensor {}", c.label, c.max_rel_err, mark, c.worst);
    }
    let _ = writeln!(
        stdout,
        "{status} max relative error {:.3e} (tolerance {TOLERANCE:e}), worst check {}",
        result.max_rel_err, result.worst_check
    );
    Ok(Outcome {
        stdout,
        warnings: Vec::new(),
        exit_code: if result.passed { EXIT_OK } else { EXIT_CHECK_FAILED },
    })
}
