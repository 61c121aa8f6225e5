//! Live and static evaluation, learning curves, and mapping heatmaps.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Mutex;

use log::info;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::{build_variant, ground_truth_mappings, Variant, VariantInputs};
use crate::dialog::{candidate_actions, Candidate};
use crate::error::{Error, Result};
use crate::gp::{train_source_policy, QFunction, QPolicy, SelectMode, SourceSchedule};
use crate::ontology::{AliasTable, Ontology};
use crate::transfer::{Mat, TransferConfig};
use crate::user_sim::{
    rng_for, run_episode, EpisodeLog, EpsilonPolicy, OraclePolicy, Policy, RewardMode,
    DEFAULT_MAX_TURNS,
};

/// Stream ids for [`rng_for`], so each stage draws independent randomness.
pub mod streams {
    pub const SOURCE: u64 = 1;
    pub const COLLECT: u64 = 2;
    pub const EXPERT: u64 = 3;
    pub const EVAL: u64 = 4;
    pub const AUC: u64 = 5;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub avg_reward: f64,
    pub success_rate: f64,
    pub avg_length: f64,
    pub n_episodes: usize,
    pub seed: u64,
}

impl Metrics {
    pub fn from_logs(logs: &[EpisodeLog], seed: u64) -> Result<Self> {
        if logs.is_empty() {
            return Err(Error::Empty("evaluation episodes"));
        }
        let n = logs.len() as f64;
        Ok(Metrics {
            avg_reward: logs.iter().map(|l| l.total_reward).sum::<f64>() / n,
            success_rate: logs.iter().filter(|l| l.success).count() as f64 / n,
            avg_length: logs.iter().map(|l| l.length as f64).sum::<f64>() / n,
            n_episodes: logs.len(),
            seed,
        })
    }
}

/// Run `n` episodes of `policy` on the evaluation stream of `seed`.
pub fn live_eval<P: Policy + ?Sized>(policy: &P, ontology: &Ontology, n: usize, seed: u64) -> Result<Metrics> {
    let mut rng = rng_for(seed, streams::EVAL);
    let logs = (0..n)
        .map(|_| run_episode(policy, ontology, &mut rng, DEFAULT_MAX_TURNS, RewardMode::TerminalOnly))
        .collect::<Result<Vec<_>>>()?;
    Metrics::from_logs(&logs, seed)
}

pub fn greedy<Q: QFunction>(q: Q) -> QPolicy<Q> {
    QPolicy {
        q,
        mode: SelectMode::GreedyMean,
    }
}

/// Rank AUC with midranks for ties; `None` without both classes.
pub fn auc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    let n_pos = labels.iter().filter(|l| **l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut ranks = vec![0.0; scores.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = mid;
        }
        i = j + 1;
    }
    let pos_rank_sum: f64 = ranks.iter().zip(labels).filter(|(_, l)| **l).map(|(r, _)| r).sum();
    let u = pos_rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos * n_neg) as f64)
}

/// Mean per-turn AUC of posterior samples against the expert's choice,
/// micro-averaged over every `(turn, sample)` pair.
pub fn static_auc_eval<Q: QFunction + ?Sized>(
    q: &Q,
    expert: &[EpisodeLog],
    candidates: &[Candidate],
    samples: usize,
    rng: &mut impl Rng,
) -> Result<f64> {
    if candidates.len() < 2 {
        return Err(Error::Empty("candidate list for ranking"));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for log in expert {
        for turn in &log.turns {
            let moments = candidates
                .iter()
                .map(|c| q.q_mean_var(&turn.state, &c.action))
                .collect::<Result<Vec<_>>>()?;
            let labels: Vec<bool> = (0..candidates.len()).map(|i| i == turn.candidate).collect();
            for _ in 0..samples {
                let scores: Vec<f64> = moments
                    .iter()
                    .map(|(m, v)| {
                        let z: f64 = StandardNormal.sample(rng);
                        m + v.max(0.0).sqrt() * z
                    })
                    .collect();
                total += auc(&scores, &labels).expect("one positive among several candidates");
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(Error::Empty("expert turns"));
    }
    Ok(total / count as f64)
}

/// Oracle-played dialogues standing in for expert demonstrations.
pub fn expert_episodes(ontology: &Ontology, n: usize, seed: u64) -> Result<Vec<EpisodeLog>> {
    let oracle = OraclePolicy::new(ontology)?;
    let mut rng = rng_for(seed, streams::EXPERT);
    (0..n)
        .map(|_| run_episode(&oracle, ontology, &mut rng, DEFAULT_MAX_TURNS, RewardMode::TerminalOnly))
        .collect()
}

/// Target-domain training dialogues from an epsilon-noisy oracle. The first
/// `k` dialogues do not depend on `n`.
pub fn collect_target_dialogues(ontology: &Ontology, n: usize, epsilon: f64, seed: u64) -> Result<Vec<EpisodeLog>> {
    let policy = EpsilonPolicy {
        inner: OraclePolicy::new(ontology)?,
        epsilon,
    };
    let mut rng = rng_for(seed, streams::COLLECT);
    (0..n)
        .map(|_| run_episode(&policy, ontology, &mut rng, DEFAULT_MAX_TURNS, RewardMode::TerminalOnly))
        .collect()
}

/// Everything that determines a learning-curve cell apart from the domains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CurveSpec {
    pub variants: Vec<Variant>,
    pub target_sizes: Vec<usize>,
    pub seeds: Vec<u64>,
    pub source_dialogues: usize,
    pub eval_episodes: usize,
    pub auc_episodes: usize,
    pub auc_samples: usize,
    pub collect_epsilon: f64,
    pub schedule: SourceSchedule,
    pub transfer: TransferConfig,
}

impl Default for CurveSpec {
    fn default() -> Self {
        CurveSpec {
            variants: Variant::ALL.to_vec(),
            target_sizes: vec![1, 5, 10, 20],
            seeds: (0..5).collect(),
            source_dialogues: 300,
            eval_episodes: 100,
            auc_episodes: 20,
            auc_samples: 10,
            collect_epsilon: 0.3,
            schedule: SourceSchedule::default(),
            transfer: TransferConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Domains<'a> {
    pub source: &'a Ontology,
    pub target: &'a Ontology,
    pub alias: Option<&'a AliasTable>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub variant: Variant,
    pub size: usize,
    pub seed: u64,
    pub avg_reward: f64,
    pub success_rate: f64,
    pub avg_length: f64,
    pub auc: f64,
}

/// A finished cell plus the learned target-to-source matrices, if any.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub key: String,
    pub row: CurveRow,
    pub act_t2s: Option<Mat>,
    pub slot_t2s: Option<Mat>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveResult {
    pub rows: Vec<CurveRow>,
    pub cells: Vec<CellRecord>,
    pub computed: usize,
}

/// Stable hash of everything a cell depends on.
pub fn cell_key(spec: &CurveSpec, domains: &Domains, variant: Variant, size: usize, seed: u64) -> Result<String> {
    #[derive(Serialize)]
    struct KeyParts<'a> {
        source_dialogues: usize,
        eval_episodes: usize,
        auc_episodes: usize,
        auc_samples: usize,
        collect_epsilon: f64,
        schedule: &'a SourceSchedule,
        transfer: &'a TransferConfig,
        source: String,
        target: String,
        alias: Option<&'a AliasTable>,
        variant: Variant,
        size: usize,
        seed: u64,
    }
    let parts = KeyParts {
        source_dialogues: spec.source_dialogues,
        eval_episodes: spec.eval_episodes,
        auc_episodes: spec.auc_episodes,
        auc_samples: spec.auc_samples,
        collect_epsilon: spec.collect_epsilon,
        schedule: &spec.schedule,
        transfer: &spec.transfer,
        source: domains.source.to_json(),
        target: domains.target.to_json(),
        alias: domains.alias,
        variant,
        size,
        seed,
    };
    let bytes = serde_json::to_vec(&parts).map_err(|e| Error::parse("cell key", e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn read_cache(path: &Path) -> Result<HashMap<String, CellRecord>> {
    let mut out = HashMap::new();
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(out),
        Err(e) => return Err(Error::io(path, e)),
    };
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        // A torn final line from an interrupted run is skipped and recomputed.
        if let Ok(rec) = serde_json::from_str::<CellRecord>(&line) {
            out.insert(rec.key.clone(), rec);
        }
    }
    Ok(out)
}

/// Train and evaluate every `(variant, size, seed)` cell, reusing cached
/// cells and appending new ones to `cache` as they finish. Rows come back
/// ordered by variant (as listed), size, then seed.
pub fn learning_curve(spec: &CurveSpec, domains: &Domains, cache: Option<&Path>, jobs: usize) -> Result<CurveResult> {
    spec.transfer.validate()?;
    if spec.variants.is_empty() || spec.target_sizes.is_empty() || spec.seeds.is_empty() {
        return Err(Error::Config("variants, target_sizes and seeds must be nonempty".into()));
    }
    if spec.variants.iter().any(|v| v.needs_alias()) && domains.alias.is_none() {
        return Err(Error::Config("fafs and fals need an alias table".into()));
    }
    let cached = match cache {
        Some(p) => read_cache(p)?,
        None => HashMap::new(),
    };
    let writer = match cache {
        Some(p) => Some(Mutex::new(
            OpenOptions::new()
                .create(true)
                .append(true)
                .open(p)
                .map_err(|e| Error::io(p, e))?,
        )),
        None => None,
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let per_seed: Vec<Result<(Vec<CellRecord>, usize)>> = pool.install(|| {
        spec.seeds
            .par_iter()
            .map(|&seed| run_seed(spec, domains, seed, &cached, writer.as_ref(), cache))
            .collect()
    });

    let mut by_key = BTreeMap::new();
    let mut computed = 0;
    for r in per_seed {
        let (cells, n) = r?;
        computed += n;
        for c in cells {
            let order = (
                spec.variants.iter().position(|v| *v == c.row.variant).unwrap_or(usize::MAX),
                spec.target_sizes.iter().position(|s| *s == c.row.size).unwrap_or(usize::MAX),
                spec.seeds.iter().position(|s| *s == c.row.seed).unwrap_or(usize::MAX),
            );
            by_key.insert(order, c);
        }
    }
    let cells: Vec<CellRecord> = by_key.into_values().collect();
    Ok(CurveResult {
        rows: cells.iter().map(|c| c.row.clone()).collect(),
        cells,
        computed,
    })
}

fn run_seed(
    spec: &CurveSpec,
    domains: &Domains,
    seed: u64,
    cached: &HashMap<String, CellRecord>,
    writer: Option<&Mutex<File>>,
    cache_path: Option<&Path>,
) -> Result<(Vec<CellRecord>, usize)> {
    let mut todo = Vec::new();
    let mut done = Vec::new();
    for &variant in &spec.variants {
        for &size in &spec.target_sizes {
            let key = cell_key(spec, domains, variant, size, seed)?;
            match cached.get(&key) {
                Some(rec) => done.push(rec.clone()),
                None => todo.push((variant, size, key)),
            }
        }
    }
    if todo.is_empty() {
        return Ok((done, 0));
    }

    info!("seed {seed}: training source policy on {} dialogues", spec.source_dialogues);
    let (source_model, source_logs) = train_source_policy(
        domains.source,
        spec.source_dialogues,
        &mut rng_for(seed, streams::SOURCE),
        &spec.schedule,
    )?;
    let max_size = todo.iter().map(|t| t.1).max().unwrap_or(0);
    let target_pool = collect_target_dialogues(domains.target, max_size, spec.collect_epsilon, seed)?;
    let expert = expert_episodes(domains.target, spec.auc_episodes, seed)?;
    let candidates = candidate_actions(domains.target);
    let transfer = TransferConfig {
        seed,
        ..spec.transfer
    };
    let n_new = todo.len();
    for (variant, size, key) in todo {
        let inputs = VariantInputs {
            source_model: &source_model,
            source_logs: &source_logs,
            target_logs: &target_pool[..size],
            source: domains.source,
            target: domains.target,
            alias: domains.alias,
            transfer: &transfer,
            gp: &spec.schedule.gp,
        };
        let built = build_variant(variant, &inputs)?;
        let q = built.q_function(&source_model, domains.source, domains.target)?;
        let metrics = live_eval(&greedy(&q), domains.target, spec.eval_episodes, seed)?;
        let auc = if spec.auc_episodes > 0 {
            static_auc_eval(&q, &expert, &candidates, spec.auc_samples, &mut rng_for(seed, streams::AUC))?
        } else {
            f64::NAN
        };
        let (act_t2s, slot_t2s) = match built.transfer() {
            Some(o) => {
                let m = o.mapping.matrices()?;
                (Some(m.act_t2s), Some(m.slot_t2s))
            }
            None => (None, None),
        };
        let rec = CellRecord {
            key,
            row: CurveRow {
                variant,
                size,
                seed,
                avg_reward: metrics.avg_reward,
                success_rate: metrics.success_rate,
                avg_length: metrics.avg_length,
                auc,
            },
            act_t2s,
            slot_t2s,
        };
        info!(
            "{variant} size {size} seed {seed}: reward {:.2} success {:.2} auc {:.3}",
            rec.row.avg_reward, rec.row.success_rate, rec.row.auc
        );
        if let (Some(w), Some(p)) = (writer, cache_path) {
            let mut line = serde_json::to_string(&rec).map_err(|e| Error::parse("cache record", e))?;
            line.push('\n');
            let mut f = w.lock().expect("cache writer poisoned");
            f.write_all(line.as_bytes()).map_err(|e| Error::io(p, e))?;
            f.flush().map_err(|e| Error::io(p, e))?;
        }
        done.push(rec);
    }
    Ok((done, n_new))
}

pub fn write_curve_csv(rows: &[CurveRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_curve_csv(path: &Path) -> Result<Vec<CurveRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    r.deserialize()
        .map(|row| row.map_err(|e| Error::csv(path, e)))
        .collect()
}

/// Mean and standard error of one metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanErr {
    pub mean: f64,
    pub stderr: f64,
}

impl MeanErr {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let stderr = if values.len() > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        MeanErr { mean, stderr }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub variant: Variant,
    pub size: usize,
    pub n_seeds: usize,
    pub avg_reward: MeanErr,
    pub success_rate: MeanErr,
    pub avg_length: MeanErr,
    pub auc: MeanErr,
}

/// Aggregate rows over seeds, keeping first-seen `(variant, size)` order.
pub fn summarize_curve(rows: &[CurveRow]) -> Vec<CurvePoint> {
    let mut groups: Vec<((Variant, usize), Vec<&CurveRow>)> = Vec::new();
    for r in rows {
        let k = (r.variant, r.size);
        match groups.iter_mut().find(|g| g.0 == k) {
            Some(g) => g.1.push(r),
            None => groups.push((k, vec![r])),
        }
    }
    groups
        .into_iter()
        .map(|((variant, size), rs)| {
            let col = |f: fn(&CurveRow) -> f64| MeanErr::of(&rs.iter().map(|r| f(r)).collect::<Vec<_>>());
            CurvePoint {
                variant,
                size,
                n_seeds: rs.len(),
                avg_reward: col(|r| r.avg_reward),
                success_rate: col(|r| r.success_rate),
                avg_length: col(|r| r.avg_length),
                auc: col(|r| r.auc),
            }
        })
        .collect()
}

/// Rows of `m` whose argmax agrees with the single 1 in the matching row of
/// `truth`, over rows of `truth` that have a counterpart.
pub fn argmax_recovery(m: &Mat, truth: &Mat) -> (usize, usize) {
    let mut hit = 0;
    let mut total = 0;
    for i in 0..truth.rows {
        if truth.row(i).iter().all(|v| *v == 0.0) {
            continue;
        }
        total += 1;
        if m.row_argmax(i) == truth.row_argmax(i) {
            hit += 1;
        }
    }
    (hit, total)
}

/// Ground-truth act-matrix argmax recovery for a learned act matrix.
pub fn act_recovery(m: &Mat, alias: &AliasTable, source: &Ontology, target: &Ontology) -> Result<(usize, usize)> {
    let (acts, _) = ground_truth_mappings(alias, source, target)?;
    Ok(argmax_recovery(m, &acts))
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Self-contained SVG heatmap; darker cells mean larger values, with the
/// intensity of each cell stored in a `data-intensity` attribute.
pub fn mapping_svg(m: &Mat, row_labels: &[String], col_labels: &[String]) -> String {
    const CELL: usize = 28;
    const LEFT: usize = 120;
    const TOP: usize = 110;
    let max = m.data.iter().copied().fold(0.0f64, f64::max);
    let width = LEFT + CELL * m.cols + 10;
    let height = TOP + CELL * m.rows + 10;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#
    );
    for (j, label) in col_labels.iter().enumerate() {
        let x = LEFT + CELL * j + CELL / 2;
        let _ = writeln!(
            s,
            r#"<text x="{x}" y="{}" transform="rotate(-60 {x} {})">{}</text>"#,
            TOP - 6,
            TOP - 6,
            xml_escape(label)
        );
    }
    for i in 0..m.rows {
        let y = TOP + CELL * i;
        let label = row_labels.get(i).map(String::as_str).unwrap_or("");
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            LEFT - 6,
            y + CELL / 2 + 4,
            xml_escape(label)
        );
        for j in 0..m.cols {
            let v = m[(i, j)];
            let intensity = if max > 0.0 { (v / max).clamp(0.0, 1.0) } else { 0.0 };
            let grey = (255.0 * (1.0 - intensity)).round() as u8;
            let _ = writeln!(
                s,
                r##"<rect x="{}" y="{y}" width="{CELL}" height="{CELL}" fill="#{grey:02x}{grey:02x}{grey:02x}" stroke="#999" data-intensity="{intensity}"><title>{v}</title></rect>"##,
                LEFT + CELL * j
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Write `m` as a labeled CSV and an SVG heatmap.
pub fn export_mapping(
    m: &Mat,
    row_labels: &[String],
    col_labels: &[String],
    csv_path: &Path,
    svg_path: &Path,
) -> Result<()> {
    if !m.is_finite() {
        return Err(Error::NonFinite("mapping matrix"));
    }
    if row_labels.len() != m.rows || col_labels.len() != m.cols {
        return Err(Error::Dimension {
            expected: m.rows + m.cols,
            actual: row_labels.len() + col_labels.len(),
        });
    }
    let mut w = csv::Writer::from_path(csv_path).map_err(|e| Error::csv(csv_path, e))?;
    let header: Vec<&str> = std::iter::once("target")
        .chain(col_labels.iter().map(String::as_str))
        .collect();
    w.write_record(&header).map_err(|e| Error::csv(csv_path, e))?;
    for (i, label) in row_labels.iter().enumerate() {
        let rec: Vec<String> = std::iter::once(label.clone())
            .chain(m.row(i).iter().map(|v| v.to_string()))
            .collect();
        w.write_record(&rec).map_err(|e| Error::csv(csv_path, e))?;
    }
    w.flush().map_err(|e| Error::io(csv_path, e))?;
    std::fs::write(svg_path, mapping_svg(m, row_labels, col_labels)).map_err(|e| Error::io(svg_path, e))
}

/// Inverse of the CSV half of [`export_mapping`].
pub fn read_mapping_csv(path: &Path) -> Result<(Mat, Vec<String>, Vec<String>)> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let cols: Vec<String> = r
        .headers()
        .map_err(|e| Error::csv(path, e))?
        .iter()
        .skip(1)
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    let mut data = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        rows.push(rec.get(0).unwrap_or_default().to_string());
        for v in rec.iter().skip(1) {
            data.push(
                v.parse::<f64>()
                    .map_err(|e| Error::Schema(format!("{}: bad number `{v}`: {e}", path.display())))?,
            );
        }
    }
    if data.len() != rows.len() * cols.len() {
        return Err(Error::Dimension {
            expected: rows.len() * cols.len(),
            actual: data.len(),
        });
    }
    Ok((
        Mat {
            rows: rows.len(),
            cols: cols.len(),
            data,
        },
        rows,
        cols,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auc_hand_values() {
        assert_eq!(auc(&[0.9, 0.5, 0.1], &[true, false, false]), Some(1.0));
        assert_eq!(auc(&[0.3, 0.3, 0.3], &[true, false, false]), Some(0.5));
        assert_eq!(auc(&[0.1, 0.5, 0.9], &[true, false, false]), Some(0.0));
        assert_eq!(auc(&[0.5, 0.9, 0.1], &[true, false, false]), Some(0.5));
        assert_eq!(auc(&[1.0], &[true]), None);
    }

    #[test]
    fn mean_err_hand_values() {
        let m = MeanErr::of(&[1.0, 3.0]);
        assert_eq!(m.mean, 2.0);
        // sample sd = sqrt(2), stderr = sqrt(2)/sqrt(2) = 1
        assert!((m.stderr - 1.0).abs() < 1e-15);
        assert_eq!(MeanErr::of(&[4.0]).stderr, 0.0);
    }

    #[test]
    fn argmax_recovery_skips_unmapped_rows() {
        let truth = Mat::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 0.0]]);
        let m = Mat::from_rows(&[vec![0.8, 0.2], vec![0.6, 0.4], vec![0.5, 0.5]]);
        assert_eq!(argmax_recovery(&m, &truth), (1, 2));
    }
}
