use std::fs;
use std::path::{Path, PathBuf};

use actmap_core::baselines::{build_variant, Variant, VariantInputs, VariantModel};
use actmap_core::evaluation::{
    act_recovery, collect_target_dialogues, export_mapping, greedy, learning_curve, live_eval,
    summarize_curve, write_curve_csv, Domains, Metrics,
};
use actmap_core::gp::{train_source_policy, GpSnapshot, QFunction};
use actmap_core::transfer::{MappingSnapshot, Mat, TransferQ};
use actmap_core::user_sim::{logs_from_jsonl, logs_to_jsonl, rng_for, RandomPolicy};
use actmap_core::{load_alias, load_ontology, GpModel, OraclePolicy, Ontology, SummaryLayout};
use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use log::info;
use serde_json::{json, Value};

use crate::config::FileConfig;
use crate::{Common, UsageError};

const GP_FILE: &str = "gp.json";
const DIALOGUES_FILE: &str = "dialogues.jsonl";
const MAPPING_FILE: &str = "mapping.json";
const METRICS_FILE: &str = "metrics.json";
const SOURCE_STREAM: u64 = 1;

#[derive(Debug, Args)]
pub struct TrainSourceArgs {
    /// Source-domain ontology.
    #[arg(long)]
    pub ontology: Option<PathBuf>,
    /// Number of training dialogues.
    #[arg(long, default_value_t = 300)]
    pub dialogues: usize,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TransferArgs {
    /// Source-domain ontology.
    #[arg(long)]
    pub source: Option<PathBuf>,
    /// Directory written by `train-source`.
    #[arg(long)]
    pub source_run: PathBuf,
    /// Target-domain ontology.
    #[arg(long)]
    pub target: Option<PathBuf>,
    /// Target dialogues as JSONL.
    #[arg(long, conflicts_with = "collect")]
    pub target_logs: Option<PathBuf>,
    /// Collect this many target dialogues with a noisy oracle instead.
    #[arg(long)]
    pub collect: Option<usize>,
    /// Comparison system to build.
    #[arg(long, default_value = "promise")]
    pub variant: String,
    /// Ground-truth alias file, required by some variants.
    #[arg(long)]
    pub alias: Option<PathBuf>,
    /// Evaluation episodes for the live metrics.
    #[arg(long, default_value_t = 100)]
    pub eval_episodes: usize,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Output directory for the CSV, cache and heatmaps.
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated variants, overriding the config.
    #[arg(long, value_delimiter = ',')]
    pub variant: Option<Vec<String>>,
    /// Comma-separated target sizes, overriding the config.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    /// Number of seeds, counted up from `--seed` (default 0).
    #[arg(long)]
    pub seeds: Option<u64>,
    #[arg(long)]
    pub source: Option<PathBuf>,
    #[arg(long)]
    pub target: Option<PathBuf>,
    #[arg(long)]
    pub alias: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FixedPolicy {
    Oracle,
    Random,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Domain the dialogues run in.
    #[arg(long)]
    pub ontology: PathBuf,
    /// Built-in policy to evaluate.
    #[arg(long, conflicts_with = "gp")]
    pub policy: Option<FixedPolicy>,
    /// GP snapshot to act greedily on.
    #[arg(long)]
    pub gp: Option<PathBuf>,
    /// Mapping snapshot; the GP is then read through it from the source domain.
    #[arg(long, requires = "gp", requires = "source")]
    pub mapping: Option<PathBuf>,
    /// Source ontology, needed with `--mapping`.
    #[arg(long)]
    pub source: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub episodes: usize,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// Mapping snapshot written by `transfer`.
    #[arg(long)]
    pub mapping: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

fn required(flag: Option<&PathBuf>, file: Option<&PathBuf>, name: &str) -> Result<PathBuf> {
    flag.or(file)
        .cloned()
        .ok_or_else(|| UsageError(format!("--{name} is required (or set `{name}` in the config)")).into())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| UsageError(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| UsageError(format!("bad JSON in {}: {e}", path.display())).into())
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))
}

fn load_gp(path: &Path) -> Result<GpModel> {
    let snap: GpSnapshot = read_json(path)?;
    Ok(GpModel::from_snapshot(snap)?)
}

fn parse_variant(s: &str) -> Result<Variant> {
    s.parse::<Variant>().map_err(|e| UsageError(e.to_string()).into())
}

pub fn train_source(common: &Common, args: &TrainSourceArgs) -> Result<Value> {
    let cfg = FileConfig::load(common.config.as_deref())?;
    let path = required(args.ontology.as_ref(), cfg.source.as_ref(), "ontology")?;
    let ontology = load_ontology(&path)?;
    let seed = common.seed.unwrap_or(0);
    info!("training on {} for {} dialogues (seed {seed})", ontology.name(), args.dialogues);
    let (model, logs) = train_source_policy(
        &ontology,
        args.dialogues,
        &mut rng_for(seed, SOURCE_STREAM),
        &cfg.schedule,
    )?;
    create_dir(&args.out)?;
    write_json(&args.out.join(GP_FILE), &model.snapshot())?;
    let dialogues = args.out.join(DIALOGUES_FILE);
    fs::write(&dialogues, logs_to_jsonl(&logs)).with_context(|| format!("writing {}", dialogues.display()))?;
    let metrics = Metrics::from_logs(&logs, seed)?;
    Ok(json!({
        "command": "train-source",
        "ontology": ontology.name(),
        "seed": seed,
        "dialogues": args.dialogues,
        "gp_points": model.len(),
        "training_metrics": metrics,
        "out": args.out,
    }))
}

fn matrix_labels(ontology: &Ontology) -> (Vec<String>, Vec<String>) {
    (
        (0..ontology.n_acts()).map(|i| ontology.act_name(i).to_string()).collect(),
        ontology.slot_names().map(str::to_string).collect(),
    )
}

pub fn transfer(common: &Common, args: &TransferArgs) -> Result<Value> {
    let cfg = FileConfig::load(common.config.as_deref())?;
    let variant = parse_variant(&args.variant)?;
    let source = load_ontology(required(args.source.as_ref(), cfg.source.as_ref(), "source")?)?;
    let target = load_ontology(required(args.target.as_ref(), cfg.target.as_ref(), "target")?)?;
    let alias = args.alias.as_ref().or(cfg.alias.as_ref()).map(load_alias).transpose()?;
    let seed = common.seed.unwrap_or(cfg.transfer.seed);
    let source_model = load_gp(&args.source_run.join(GP_FILE))?;
    let source_logs = read_logs(&args.source_run.join(DIALOGUES_FILE), &source)?;
    let target_logs = match (&args.target_logs, args.collect) {
        (Some(p), _) => read_logs(p, &target)?,
        (None, Some(n)) => collect_target_dialogues(&target, n, cfg.curve.collect_epsilon, seed)?,
        (None, None) => return Err(UsageError("either --target-logs or --collect is required".into()).into()),
    };
    let transfer = actmap_core::transfer::TransferConfig { seed, ..cfg.transfer };
    let inputs = VariantInputs {
        source_model: &source_model,
        source_logs: &source_logs,
        target_logs: &target_logs,
        source: &source,
        target: &target,
        alias: alias.as_ref(),
        transfer: &transfer,
        gp: &cfg.schedule.gp,
    };
    info!("building {variant} from {} target dialogues", target_logs.len());
    let built = build_variant(variant, &inputs)?;
    let q = built.q_function(&source_model, &source, &target)?;
    let metrics = live_eval(&greedy(&q), &target, args.eval_episodes, seed)?;

    create_dir(&args.out)?;
    write_json(&args.out.join(METRICS_FILE), &metrics)?;
    let mut out = json!({
        "command": "transfer",
        "variant": variant,
        "seed": seed,
        "target_dialogues": target_logs.len(),
        "metrics": metrics,
    });
    match &built.model {
        VariantModel::Native(gp) => {
            write_json(&args.out.join(GP_FILE), &gp.snapshot())?;
            out["gp"] = json!(args.out.join(GP_FILE));
        }
        VariantModel::Transfer(outcome) => {
            let snap = MappingSnapshot::new(outcome, &source, &target, Some(transfer))?;
            write_json(&args.out.join(MAPPING_FILE), &snap)?;
            out["mapping"] = json!(args.out.join(MAPPING_FILE));
            out["loss_epochs"] = json!(outcome.loss_trace.len());
            if let Some(a) = &alias {
                let (hit, total) = act_recovery(&snap.matrices.act_t2s, a, &source, &target)?;
                out["act_recovery"] = json!({ "matched": hit, "total": total });
            }
        }
    }
    Ok(out)
}

fn read_logs(path: &Path, ontology: &Ontology) -> Result<Vec<actmap_core::EpisodeLog>> {
    let text = fs::read_to_string(path)
        .map_err(|e| UsageError(format!("cannot read {}: {e}", path.display())))?;
    Ok(logs_from_jsonl(&text, ontology)?)
}

pub fn experiment(common: &Common, args: &ExperimentArgs) -> Result<Value> {
    let mut cfg = FileConfig::load(common.config.as_deref())?;
    cfg.sync_curve();
    let spec = &mut cfg.curve;
    if let Some(vs) = &args.variant {
        spec.variants = vs.iter().map(|v| parse_variant(v)).collect::<Result<_>>()?;
    }
    if let Some(sizes) = &args.sizes {
        spec.target_sizes = sizes.clone();
    }
    match (common.seed, args.seeds) {
        (Some(s), n) => spec.seeds = (s..s + n.unwrap_or(1)).collect(),
        (None, Some(n)) => spec.seeds = (0..n).collect(),
        (None, None) => {}
    }
    let source = load_ontology(required(args.source.as_ref(), cfg.source.as_ref(), "source")?)?;
    let target = load_ontology(required(args.target.as_ref(), cfg.target.as_ref(), "target")?)?;
    let alias = args.alias.as_ref().or(cfg.alias.as_ref()).map(load_alias).transpose()?;
    let domains = Domains {
        source: &source,
        target: &target,
        alias: alias.as_ref(),
    };

    create_dir(&args.out)?;
    let cache = args.out.join("cache.jsonl");
    let result = learning_curve(&cfg.curve, &domains, Some(&cache), common.jobs)?;
    let csv_path = args.out.join("curve.csv");
    write_curve_csv(&result.rows, &csv_path)?;
    let summary = summarize_curve(&result.rows);
    write_json(&args.out.join("summary.json"), &summary)?;

    // One heatmap pair per learned variant, from its largest size and first seed.
    let heat_dir = args.out.join("heatmaps");
    create_dir(&heat_dir)?;
    let (t_acts, t_slots) = matrix_labels(&target);
    let (s_acts, s_slots) = matrix_labels(&source);
    let mut heatmaps = Vec::new();
    for &variant in &cfg.curve.variants {
        let best = result
            .cells
            .iter()
            .filter(|c| c.row.variant == variant && c.act_t2s.is_some())
            .max_by_key(|c| (c.row.size, std::cmp::Reverse(c.row.seed)));
        let Some(cell) = best else { continue };
        let mut write = |m: &Mat, kind: &str, rows: &[String], cols: &[String]| -> Result<()> {
            let stem = format!("{variant}_{kind}");
            export_mapping(
                m,
                rows,
                cols,
                &heat_dir.join(format!("{stem}.csv")),
                &heat_dir.join(format!("{stem}.svg")),
            )?;
            heatmaps.push(heat_dir.join(format!("{stem}.svg")));
            Ok(())
        };
        if let Some(m) = &cell.act_t2s {
            write(m, "acts", &t_acts, &s_acts)?;
        }
        if let Some(m) = &cell.slot_t2s {
            write(m, "slots", &t_slots, &s_slots)?;
        }
    }
    Ok(json!({
        "command": "experiment",
        "csv": csv_path,
        "rows": result.rows.len(),
        "computed": result.computed,
        "cached": result.rows.len() - result.computed,
        "summary": summary,
        "heatmaps": heatmaps,
    }))
}

pub fn eval(common: &Common, args: &EvalArgs) -> Result<Value> {
    let ontology = load_ontology(&args.ontology)?;
    let seed = common.seed.unwrap_or(0);
    let (kind, metrics) = match (&args.policy, &args.gp, &args.mapping) {
        (Some(FixedPolicy::Oracle), _, _) => ("oracle", live_eval(&OraclePolicy::new(&ontology)?, &ontology, args.episodes, seed)?),
        (Some(FixedPolicy::Random), _, _) => ("random", live_eval(&RandomPolicy, &ontology, args.episodes, seed)?),
        (None, Some(gp), None) => {
            let model = load_gp(gp)?;
            ("gp", evaluate_q(&model, &ontology, args.episodes, seed)?)
        }
        (None, Some(gp), Some(mapping)) => {
            let model = load_gp(gp)?;
            let source = load_ontology(args.source.as_ref().expect("clap enforces --source"))?;
            let snap: MappingSnapshot = read_json(mapping)?;
            let q = TransferQ::from_matrices(
                &model,
                snap.matrices,
                SummaryLayout::of(&ontology),
                SummaryLayout::of(&source),
            )?;
            ("transfer", evaluate_q(&q, &ontology, args.episodes, seed)?)
        }
        (None, None, _) => return Err(UsageError("one of --policy or --gp is required".into()).into()),
    };
    Ok(json!({
        "command": "eval",
        "policy": kind,
        "ontology": ontology.name(),
        "metrics": metrics,
    }))
}

fn evaluate_q<Q: QFunction>(q: Q, ontology: &Ontology, episodes: usize, seed: u64) -> Result<Metrics> {
    Ok(live_eval(&greedy(q), ontology, episodes, seed)?)
}

pub fn export(_common: &Common, args: &ExportArgs) -> Result<Value> {
    let snap: MappingSnapshot = read_json(&args.mapping)?;
    create_dir(&args.out)?;
    let m = &snap.matrices;
    let mut files = Vec::new();
    for (name, mat, rows, cols) in [
        ("acts_t2s", &m.act_t2s, &snap.target_acts, &snap.source_acts),
        ("slots_t2s", &m.slot_t2s, &snap.target_slots, &snap.source_slots),
        ("acts_s2t", &m.act_s2t, &snap.source_acts, &snap.target_acts),
        ("slots_s2t", &m.slot_s2t, &snap.source_slots, &snap.target_slots),
    ] {
        let csv = args.out.join(format!("{name}.csv"));
        let svg = args.out.join(format!("{name}.svg"));
        export_mapping(mat, rows, cols, &csv, &svg)?;
        files.push(csv);
        files.push(svg);
    }
    Ok(json!({ "command": "export-mapping", "files": files }))
}
