//! Evaluation: query recall, Tavg, Err@k and ablation comparison counts.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::{Serialize, Serializer};

use crate::aggregate::{aggregate_view, entity_demand, view_satisfies};
use crate::graph::{NodeIx, PropertyGraph};
use crate::matchers::{GroundTruth, Matcher};
use crate::pattern::{candidate_pairs, enumerate_matches, Pair, PatternError};
use crate::pps::{run_collect, CurvePoint, EmittedEntity, Feature, RunConfig, RunError, RunStats};
use crate::rules::Query;

/// `|found ∩ gt| / |gt|`, or 1 when `gt` is empty.
pub fn query_recall(found: &BTreeSet<Pair>, gt: &BTreeSet<Pair>) -> f64 {
    if gt.is_empty() {
        return 1.0;
    }
    found.intersection(gt).count() as f64 / gt.len() as f64
}

/// Mean time per emitted true match; infinite when nothing true was emitted.
pub fn tavg(total_ms: f64, emitted_true_matches: usize) -> f64 {
    if emitted_true_matches == 0 {
        f64::INFINITY
    } else {
        total_ms / emitted_true_matches as f64
    }
}

pub fn format_tavg(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.3}")
    } else {
        "n/a".into()
    }
}

/// Ground-truth duplicate pairs that are also Stage-1 candidates under the
/// query's demand.
pub fn query_ground_truth(g: &PropertyGraph, q: &Query, gt: &GroundTruth) -> Result<BTreeSet<Pair>, PatternError> {
    let matches = enumerate_matches(g, &q.pattern, &q.demand)?;
    let dups = gt.duplicate_pairs(g);
    Ok(candidate_pairs(&matches, &q.pattern)
        .into_iter()
        .filter(|p| dups.contains(p))
        .collect())
}

fn member_ixs(members: &[String], g: &PropertyGraph) -> Vec<NodeIx> {
    members.iter().filter_map(|m| g.try_ix(m)).collect()
}

/// All pairs inside the given clusters.
pub fn co_clustered_pairs(clusters: &[Vec<String>], g: &PropertyGraph) -> BTreeSet<Pair> {
    let mut out = BTreeSet::new();
    for c in clusters {
        let ixs = member_ixs(c, g);
        for (i, &a) in ixs.iter().enumerate() {
            for &b in &ixs[i + 1..] {
                out.insert(Pair::new(a, b));
            }
        }
    }
    out
}

/// An emission is wrong if it mixes ground-truth entities or if its
/// aggregate misses an entity-level demand predicate.
pub fn emission_is_error(e: &EmittedEntity, g: &PropertyGraph, q: &Query, gt: &GroundTruth) -> bool {
    let eids: BTreeSet<Option<&str>> = e.members.iter().map(|m| gt.eid(m)).collect();
    if eids.len() != 1 || eids.contains(&None) {
        return true;
    }
    let view = aggregate_view(&member_ixs(&e.members, g), &q.aggregation, g);
    !view_satisfies(&view, &entity_demand(&q.pattern, &q.demand))
}

/// Error rate over the first `k` emissions for each requested `k`. A `k`
/// beyond the stream length is clipped; `k = 0` or an empty stream gives 0.
pub fn err_at_k(
    emissions: &[EmittedEntity],
    g: &PropertyGraph,
    q: &Query,
    gt: &GroundTruth,
    ks: &[usize],
) -> BTreeMap<usize, f64> {
    let errors: Vec<bool> = emissions.iter().map(|e| emission_is_error(e, g, q, gt)).collect();
    ks.iter()
        .map(|&k| {
            let eff = k.min(errors.len());
            if eff < k {
                log::warn!("Err@{k} clipped to {eff}: only {} emissions", errors.len());
            }
            let rate = if eff == 0 {
                0.0
            } else {
                errors[..eff].iter().filter(|&&e| e).count() as f64 / eff as f64
            };
            (k, rate)
        })
        .collect()
}

fn ser_tavg<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_str("n/a")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub query_recall: f64,
    #[serde(serialize_with = "ser_tavg")]
    pub tavg_ms: f64,
    pub err_at_k: BTreeMap<usize, f64>,
    pub comparisons: u64,
    pub relative_comparisons: BTreeMap<String, f64>,
    pub recall_curve: Vec<CurvePoint>,
    /// size of the demand-restricted ground truth
    pub query_ground_truth_pairs: usize,
    pub emitted_true_matches: usize,
}

#[derive(Debug, Clone)]
pub struct BenchRun {
    pub stats: RunStats,
    pub emissions: Vec<EmittedEntity>,
    pub report: MetricsReport,
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Run(#[from] RunError),
    #[error(transparent)]
    Pattern(#[from] PatternError),
}

/// Runs the pipeline once with the recall curve measured against the
/// demand-restricted ground truth, then scores it.
pub fn bench(
    g: &PropertyGraph,
    q: &Query,
    matcher: &dyn Matcher,
    cfg: &RunConfig,
    gt: &GroundTruth,
    ks: &[usize],
) -> Result<BenchRun, BenchError> {
    let m_query = query_ground_truth(g, q, gt)?;
    let cfg = RunConfig {
        recall_reference: Some(m_query.clone()),
        ..cfg.clone()
    };
    let (stats, emissions) = run_collect(g, q, matcher, &cfg)?;
    let found = co_clustered_pairs(&stats.clusters, g);
    let dups = gt.duplicate_pairs(g);
    let emitted: Vec<Vec<String>> = emissions.iter().map(|e| e.members.clone()).collect();
    let emitted_true = co_clustered_pairs(&emitted, g).intersection(&dups).count();
    let report = MetricsReport {
        query_recall: query_recall(&found, &m_query),
        tavg_ms: tavg(stats.elapsed_ms, emitted_true),
        err_at_k: err_at_k(&emissions, g, q, gt, ks),
        comparisons: stats.comparisons,
        relative_comparisons: BTreeMap::from([(AblationMode::Full.to_string(), 1.0)]),
        recall_curve: stats.recall_curve.clone(),
        query_ground_truth_pairs: m_query.len(),
        emitted_true_matches: emitted_true,
    };
    Ok(BenchRun {
        stats,
        emissions,
        report,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum AblationMode {
    Full,
    NoRf,
    NoB,
    NoPps,
    NoT,
}

impl AblationMode {
    pub const ALL: [AblationMode; 5] = [
        AblationMode::Full,
        AblationMode::NoRf,
        AblationMode::NoB,
        AblationMode::NoPps,
        AblationMode::NoT,
    ];

    pub fn disabled(self) -> &'static [Feature] {
        match self {
            AblationMode::Full => &[],
            AblationMode::NoRf => &[Feature::RuleFilter],
            AblationMode::NoB => &[Feature::Blocking],
            AblationMode::NoPps => &[Feature::Scheduling],
            AblationMode::NoT => &[Feature::Transitivity],
        }
    }
}

impl std::fmt::Display for AblationMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AblationMode::Full => "full",
            AblationMode::NoRf => "no-rf",
            AblationMode::NoB => "no-b",
            AblationMode::NoPps => "no-pps",
            AblationMode::NoT => "no-t",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationRow {
    pub mode: String,
    pub comparisons: u64,
    /// comparisons relative to the full pipeline
    pub relative: f64,
    pub recall: f64,
}

fn ratio(n: u64, d: u64) -> f64 {
    match (n, d) {
        (0, 0) => 1.0,
        (_, 0) => f64::INFINITY,
        _ => n as f64 / d as f64,
    }
}

/// Runs every mode in [`AblationMode::ALL`] with the `base` settings plus the
/// mode's disabled stages.
pub fn ablation_suite(
    g: &PropertyGraph,
    q: &Query,
    matcher: &dyn Matcher,
    base: &RunConfig,
    gt: &GroundTruth,
) -> Result<Vec<AblationRow>, BenchError> {
    let m_query = query_ground_truth(g, q, gt)?;
    let mut raw = Vec::new();
    for mode in AblationMode::ALL {
        let mut cfg = base.clone();
        cfg.disable.extend(mode.disabled());
        let (stats, _) = run_collect(g, q, matcher, &cfg)?;
        let recall = query_recall(&co_clustered_pairs(&stats.clusters, g), &m_query);
        log::info!("{mode}: {} comparisons, recall {recall:.4}", stats.comparisons);
        raw.push((mode, stats.comparisons, recall));
    }
    let full = raw[0].1;
    Ok(raw
        .into_iter()
        .map(|(mode, comparisons, recall)| AblationRow {
            mode: mode.to_string(),
            comparisons,
            relative: ratio(comparisons, full),
            recall,
        })
        .collect())
}

pub fn write_ablation_csv<W: Write>(rows: &[AblationRow], w: W) -> Result<(), csv::Error> {
    let mut wr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w);
    wr.write_record(["mode", "comparisons", "relative", "recall"])?;
    for r in rows {
        let rel = if r.relative.is_finite() {
            format!("{:.4}", r.relative)
        } else {
            "inf".into()
        };
        wr.write_record([
            r.mode.clone(),
            r.comparisons.to_string(),
            rel,
            format!("{:.4}", r.recall),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_recall_curve_csv<W: Write>(curve: &[CurvePoint], w: W) -> Result<(), csv::Error> {
    let mut wr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w);
    wr.write_record(["comparisons", "recall"])?;
    for p in curve {
        wr.write_record([p.comparisons.to_string(), format!("{:.6}", p.recall)])?;
    }
    wr.flush()?;
    Ok(())
}
