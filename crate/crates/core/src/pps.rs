//! Progressive profile scheduling: runs both filtering stages, orders the
//! surviving pairs, compares them with a matcher, keeps transitive clusters
//! and emits entities as they form.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregate::{aggregate_view, entity_demand, view_satisfies};
use crate::blocking::{build_blocking_graph, meets_threshold, sorted_profiles, BlockingGraph};
use crate::dsu::DisjointSet;
use crate::graph::{EntityProfile, NodeIx, PropertyGraph};
use crate::matchers::{Matcher, MatcherError};
use crate::pattern::{candidate_pairs, enumerate_matches, Pair, PatternError};
use crate::rules::{filter_matches, FilteredPair, Query};

/// Pipeline stages that can be switched off for ablation runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Feature {
    /// rule filtering (Stage 2)
    #[serde(rename = "RF")]
    RuleFilter,
    /// weighted blocking
    #[serde(rename = "B")]
    Blocking,
    /// sorted scheduling with threshold pruning
    #[serde(rename = "PPS")]
    Scheduling,
    /// transitive skipping
    #[serde(rename = "T")]
    Transitivity,
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Feature::RuleFilter => "RF",
            Feature::Blocking => "B",
            Feature::Scheduling => "PPS",
            Feature::Transitivity => "T",
        })
    }
}

impl FromStr for Feature {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "RF" => Ok(Feature::RuleFilter),
            "B" => Ok(Feature::Blocking),
            "PPS" => Ok(Feature::Scheduling),
            "T" => Ok(Feature::Transitivity),
            other => Err(format!("unknown stage {other:?} (expected RF, B, PPS or T)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// overrides the query's threshold
    pub threshold: Option<f64>,
    pub disable: BTreeSet<Feature>,
    /// `false` emits clusters without re-checking demand on the aggregate
    pub validate_demand: bool,
    pub max_comparisons: Option<u64>,
    pub max_results: Option<usize>,
    /// pairs the recall curve is measured against
    pub recall_reference: Option<BTreeSet<Pair>>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            threshold: None,
            disable: BTreeSet::new(),
            validate_demand: true,
            max_comparisons: None,
            max_results: None,
            recall_reference: None,
        }
    }
}

impl RunConfig {
    pub fn disabling(features: &[Feature]) -> Self {
        Self {
            disable: features.iter().copied().collect(),
            ..Self::default()
        }
    }

    /// Blocking needs rule-filtered pairs, so turning off RF turns off B too.
    pub fn effective_disable(&self) -> BTreeSet<Feature> {
        let mut d = self.disable.clone();
        if d.contains(&Feature::RuleFilter) {
            d.insert(Feature::Blocking);
        }
        d
    }

    pub fn is_enabled(&self, f: Feature) -> bool {
        !self.effective_disable().contains(&f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmittedEntity {
    /// sorted node ids
    pub members: Vec<String>,
    /// comparisons performed when the entity was emitted
    pub comparisons: u64,
    pub elapsed_ms: f64,
    /// the aggregate satisfied every entity-level demand predicate
    pub demand_ok: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub comparisons: u64,
    pub recall: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct StageTimes {
    pub matching_ms: f64,
    pub filtering_ms: f64,
    pub blocking_ms: f64,
    pub scheduling_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunStats {
    pub threshold: f64,
    pub disabled: Vec<String>,
    pub pattern_matches: usize,
    pub candidate_pairs: usize,
    pub filtered_pairs: usize,
    /// profiles in the blocking graph
    pub profiles: usize,
    pub comparisons: u64,
    pub pruned: u64,
    pub skipped_transitive: u64,
    /// mean comparisons per profile
    pub comparisons_per_profile: f64,
    pub emissions: usize,
    pub first_emission_at: Option<u64>,
    pub matched_pairs: Vec<(String, String)>,
    /// final clusters with two or more members, sorted
    pub clusters: Vec<Vec<String>>,
    pub recall_curve: Vec<CurvePoint>,
    pub stopped_early: bool,
    pub elapsed_ms: f64,
    pub stages: StageTimes,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("matcher failed on ({a}, {b}): {source}")]
    MatcherFailure {
        a: String,
        b: String,
        #[source]
        source: MatcherError,
    },
    #[error(transparent)]
    Pattern(#[from] PatternError),
}

/// Output of the two filtering stages plus the blocking graph.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub pattern_matches: usize,
    pub candidates: Vec<Pair>,
    pub filtered: Vec<FilteredPair>,
    pub blocking: BlockingGraph,
    pub stages: StageTimes,
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

pub fn prepare(g: &PropertyGraph, q: &Query, cfg: &RunConfig) -> Result<Prepared, RunError> {
    let mut stages = StageTimes::default();
    let t = Instant::now();
    let matches = enumerate_matches(g, &q.pattern, &q.demand)?;
    let candidates = candidate_pairs(&matches, &q.pattern);
    stages.matching_ms = ms_since(t);

    let t = Instant::now();
    let filtered = if cfg.is_enabled(Feature::RuleFilter) {
        filter_matches(&matches, &q.rules, g)
    } else {
        Vec::new()
    };
    stages.filtering_ms = ms_since(t);

    let t = Instant::now();
    let blocking = if cfg.is_enabled(Feature::RuleFilter) {
        build_blocking_graph(&filtered, q.weighting)
    } else {
        BlockingGraph::uniform(&candidates)
    };
    stages.blocking_ms = ms_since(t);
    Ok(Prepared {
        pattern_matches: matches.len(),
        candidates,
        filtered,
        blocking,
        stages,
    })
}

/// Effective threshold: the override or the query's, capped at 1 without rule filtering.
pub fn effective_threshold(q: &Query, cfg: &RunConfig) -> f64 {
    let t = cfg.threshold.unwrap_or(q.threshold);
    if cfg.is_enabled(Feature::RuleFilter) {
        t
    } else {
        t.min(1.0)
    }
}

/// The comparison order and the number of pruned pairs.
///
/// Full mode walks profiles by descending average weight and takes each
/// neighbor (heaviest first) once per unordered pair, pruning pairs under the
/// threshold. Without blocking, pairs go profile by profile in id order;
/// without scheduling they go in the order the filter produced them. Neither
/// of those prunes.
pub fn schedule(bg: &BlockingGraph, cfg: &RunConfig, threshold: f64) -> (Vec<Pair>, u64) {
    let disabled = cfg.effective_disable();
    if disabled.contains(&Feature::Scheduling) {
        return (bg.edges.keys().copied().collect(), 0);
    }
    let mut order = Vec::with_capacity(bg.edges.len());
    let mut seen: HashSet<Pair> = HashSet::with_capacity(bg.edges.len());
    let mut pruned = 0;
    if disabled.contains(&Feature::Blocking) {
        for &v in &bg.nodes {
            let mut nbrs: Vec<NodeIx> = bg.candidates_of(v).unwrap_or(&[]).iter().map(|&(n, _)| n).collect();
            nbrs.sort_unstable();
            for n in nbrs {
                let p = Pair::new(v, n);
                if seen.insert(p) {
                    order.push(p);
                }
            }
        }
        return (order, 0);
    }
    for entry in sorted_profiles(bg).entries {
        for &(n, w) in bg.candidates_of(entry.pid).unwrap_or(&[]) {
            let p = Pair::new(entry.pid, n);
            if !seen.insert(p) {
                continue;
            }
            if meets_threshold(w, threshold, bg.weighting) {
                order.push(p);
            } else {
                pruned += 1;
            }
        }
    }
    (order, pruned)
}

struct Clusters {
    dsu: DisjointSet,
    members: Vec<Vec<NodeIx>>,
}

impl Clusters {
    fn new(n: usize) -> Self {
        Self {
            dsu: DisjointSet::new(n),
            members: (0..n).map(|i| vec![NodeIx(i as u32)]).collect(),
        }
    }

    fn same(&mut self, p: Pair) -> bool {
        self.dsu.same(p.0.index(), p.1.index())
    }

    /// Merges and returns the cross pairs that became co-clustered, or `None`.
    fn union(&mut self, p: Pair) -> Option<(usize, Vec<NodeIx>, Vec<NodeIx>)> {
        let (ra, rb) = (self.dsu.find(p.0.index()), self.dsu.find(p.1.index()));
        let root = self.dsu.union(ra, rb)?;
        let other = if root == ra { rb } else { ra };
        let moved = std::mem::take(&mut self.members[other]);
        let kept = self.members[root].clone();
        self.members[root].extend_from_slice(&moved);
        Some((root, kept, moved))
    }
}

/// Runs the whole pipeline, handing each emitted entity to `sink` as soon as it exists.
pub fn run_pipeline(
    g: &PropertyGraph,
    q: &Query,
    matcher: &dyn Matcher,
    cfg: &RunConfig,
    sink: &mut dyn FnMut(&EmittedEntity),
) -> Result<RunStats, RunError> {
    let start = Instant::now();
    let prepared = prepare(g, q, cfg)?;
    let mut stages = prepared.stages.clone();
    let threshold = effective_threshold(q, cfg);
    let t_sched = Instant::now();
    let (order, pruned) = schedule(&prepared.blocking, cfg, threshold);
    let transitive = cfg.is_enabled(Feature::Transitivity);
    let demand = entity_demand(&q.pattern, &q.demand);

    let mut clusters = Clusters::new(g.node_count());
    let mut profiles: Vec<Option<EntityProfile>> = vec![None; g.node_count()];
    let mut stats = RunStats {
        threshold,
        disabled: cfg.effective_disable().iter().map(|f| f.to_string()).collect(),
        pattern_matches: prepared.pattern_matches,
        candidate_pairs: prepared.candidates.len(),
        filtered_pairs: prepared.filtered.len(),
        profiles: prepared.blocking.nodes.len(),
        comparisons: 0,
        pruned,
        skipped_transitive: 0,
        comparisons_per_profile: 0.0,
        emissions: 0,
        first_emission_at: None,
        matched_pairs: Vec::new(),
        clusters: Vec::new(),
        recall_curve: Vec::new(),
        stopped_early: false,
        elapsed_ms: 0.0,
        stages: StageTimes::default(),
    };
    let reference = cfg.recall_reference.as_ref();
    let mut found = 0usize;
    let recall = |found: usize| match reference {
        Some(r) if !r.is_empty() => found as f64 / r.len() as f64,
        _ => 1.0,
    };
    if reference.is_some() {
        stats.recall_curve.push(CurvePoint {
            comparisons: 0,
            recall: recall(0),
        });
    }

    for (i, &p) in order.iter().enumerate() {
        if transitive && clusters.same(p) {
            stats.skipped_transitive += 1;
            continue;
        }
        if cfg.max_comparisons.is_some_and(|m| stats.comparisons >= m) {
            stats.stopped_early = true;
            break;
        }
        for ix in [p.0, p.1] {
            if profiles[ix.index()].is_none() {
                profiles[ix.index()] = Some(g.profile_of_ix(ix));
            }
        }
        let (pa, pb) = (
            profiles[p.0.index()].as_ref().expect("cached"),
            profiles[p.1.index()].as_ref().expect("cached"),
        );
        stats.comparisons += 1;
        let decision = matcher.compare(pa, pb).map_err(|source| RunError::MatcherFailure {
            a: g.id(p.0).to_string(),
            b: g.id(p.1).to_string(),
            source,
        })?;
        if !decision.is_match {
            continue;
        }
        stats.matched_pairs.push((g.id(p.0).to_string(), g.id(p.1).to_string()));
        let Some((root, left, right)) = clusters.union(p) else {
            continue;
        };
        if let Some(r) = reference {
            let before = found;
            for &a in &left {
                for &b in &right {
                    found += usize::from(r.contains(&Pair::new(a, b)));
                }
            }
            if found != before {
                stats.recall_curve.push(CurvePoint {
                    comparisons: stats.comparisons,
                    recall: recall(found),
                });
            }
        }
        let members = &clusters.members[root];
        let view = aggregate_view(members, &q.aggregation, g);
        let demand_ok = view_satisfies(&view, &demand);
        if cfg.validate_demand && !demand_ok {
            log::debug!(
                "holding back cluster of {} members: demand fails on aggregate",
                members.len()
            );
            continue;
        }
        let mut ids: Vec<NodeIx> = members.clone();
        ids.sort_unstable();
        let event = EmittedEntity {
            members: ids.iter().map(|&m| g.id(m).to_string()).collect(),
            comparisons: stats.comparisons,
            elapsed_ms: ms_since(start),
            demand_ok,
        };
        sink(&event);
        stats.emissions += 1;
        stats.first_emission_at.get_or_insert(stats.comparisons);
        if cfg.max_results.is_some_and(|m| stats.emissions >= m) {
            stats.stopped_early = i + 1 < order.len();
            break;
        }
    }

    let mut groups: Vec<Vec<String>> = clusters
        .dsu
        .groups()
        .into_iter()
        .filter(|grp| grp.len() > 1)
        .map(|grp| grp.into_iter().map(|i| g.id(NodeIx(i as u32)).to_string()).collect())
        .collect();
    groups.sort();
    stats.clusters = groups;
    if reference.is_some() {
        let last = CurvePoint {
            comparisons: stats.comparisons,
            recall: recall(found),
        };
        if stats.recall_curve.last() != Some(&last) {
            stats.recall_curve.push(last);
        }
    }
    if stats.profiles > 0 {
        stats.comparisons_per_profile = stats.comparisons as f64 / stats.profiles as f64;
    }
    stages.scheduling_ms = ms_since(t_sched);
    stats.stages = stages;
    stats.elapsed_ms = ms_since(start);
    Ok(stats)
}

/// [`run_pipeline`] collecting emissions into a vector.
pub fn run_collect(
    g: &PropertyGraph,
    q: &Query,
    matcher: &dyn Matcher,
    cfg: &RunConfig,
) -> Result<(RunStats, Vec<EmittedEntity>), RunError> {
    let mut out = Vec::new();
    let stats = run_pipeline(g, q, matcher, cfg, &mut |e| out.push(e.clone()))?;
    Ok((stats, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matchers::{GroundTruth, MatchDecision, OracleMatcher};
    use crate::rules::parse_query_str;

    // a-b-c share one entity, d is alone; every pair is a candidate
    fn setup() -> (PropertyGraph, Query, OracleMatcher) {
        let g = PropertyGraph::from_csv_str(
            "id,label,attrs\n\
             a,user,\"{\"\"N\"\":\"\"Ann\"\",\"\"Age\"\":30}\"\n\
             b,user,\"{\"\"N\"\":\"\"Ann\"\",\"\"Age\"\":30}\"\n\
             c,user,\"{\"\"N\"\":\"\"Ann\"\",\"\"Age\"\":30}\"\n\
             d,user,\"{\"\"N\"\":\"\"Anne\"\",\"\"Age\"\":31}\"\n\
             p,platform,{}\n",
            "src,label,dst\na,watched,p\nb,watched,p\nc,watched,p\nd,watched,p\n",
        )
        .unwrap();
        let q = parse_query_str(
            r#"{
              "pattern": {
                "nodes": [{"var": "x", "label": "user"}, {"var": "y", "label": "platform"}, {"var": "x'", "label": "user"}],
                "edges": [{"src": "x", "label": "watched", "dst": "y"}, {"src": "x'", "label": "watched", "dst": "y"}],
                "duplicates": ["x", "x'"]
              },
              "demand": [{"var": "x", "attr": "Age", "op": ">", "value": 18}],
              "rules": [
                {"id": "name", "lhs": [{"kind": "attr_attr", "vars": ["x", "x'"], "attrs": ["N", "N"], "metric": "edit", "threshold": 1}],
                 "rhs": [{"kind": "eid_eid", "vars": ["x", "x'"]}]},
                {"id": "age", "lhs": [{"kind": "attr_attr", "vars": ["x", "x'"], "attrs": ["Age", "Age"], "metric": "exact", "threshold": 0}],
                 "rhs": [{"kind": "eid_eid", "vars": ["x", "x'"]}]}
              ],
              "threshold": 2
            }"#,
        )
        .unwrap();
        let gt = GroundTruth::from_pairs([("a", "E"), ("b", "E"), ("c", "E"), ("d", "F")]);
        (g, q, OracleMatcher::new(gt))
    }

    #[test]
    fn rf_implies_b() {
        let cfg = RunConfig::disabling(&[Feature::RuleFilter]);
        assert!(!cfg.is_enabled(Feature::Blocking));
        assert_eq!("pps".parse::<Feature>(), Ok(Feature::Scheduling));
        assert!("X".parse::<Feature>().is_err());
    }

    #[test]
    fn prunes_and_skips() {
        let (g, q, m) = setup();
        let (stats, out) = run_collect(&g, &q, &m, &RunConfig::default()).unwrap();
        // a,b,c pairwise weight 2; d pairs weight 1 (name only)
        assert_eq!(stats.filtered_pairs, 6);
        assert_eq!(stats.pruned, 3);
        assert_eq!(stats.comparisons, 2);
        assert_eq!(stats.skipped_transitive, 1);
        assert_eq!(stats.clusters, vec![vec!["a", "b", "c"]]);
        assert_eq!(out.len(), 2);
        assert_eq!(out[1].members, vec!["a", "b", "c"]);
        assert!(out[0].members.iter().all(|m| out[1].members.contains(m)));

        let no_t = RunConfig::disabling(&[Feature::Transitivity]);
        let (s2, _) = run_collect(&g, &q, &m, &no_t).unwrap();
        assert_eq!(s2.comparisons, 3);
        assert_eq!(s2.clusters, stats.clusters);
    }

    #[test]
    fn ablation_schedules_ignore_threshold() {
        let (g, q, m) = setup();
        for f in [Feature::Blocking, Feature::Scheduling] {
            let (s, _) = run_collect(&g, &q, &m, &RunConfig::disabling(&[f, Feature::Transitivity])).unwrap();
            assert_eq!((s.comparisons, s.pruned), (6, 0), "{f}");
        }
        let (s, _) = run_collect(&g, &q, &m, &RunConfig::disabling(&[Feature::RuleFilter])).unwrap();
        assert_eq!(s.threshold, 1.0);
        assert_eq!(s.filtered_pairs, 0);
        assert_eq!(s.comparisons, 5);
    }

    #[test]
    fn budgets_stop_early() {
        let (g, q, m) = setup();
        let cfg = RunConfig {
            max_results: Some(1),
            ..RunConfig::default()
        };
        let (s, out) = run_collect(&g, &q, &m, &cfg).unwrap();
        assert_eq!(out.len(), 1);
        assert!(s.stopped_early);
        assert_eq!(s.comparisons, 1);
        let cfg = RunConfig {
            max_comparisons: Some(0),
            threshold: Some(0.0),
            ..RunConfig::default()
        };
        let (s, out) = run_collect(&g, &q, &m, &cfg).unwrap();
        assert_eq!((s.comparisons, out.len()), (0, 0));
        assert!(s.stopped_early);
    }

    #[test]
    fn matcher_errors_name_the_pair() {
        let (g, q, _) = setup();
        let failing = |_: &EntityProfile, _: &EntityProfile| -> Result<MatchDecision, MatcherError> {
            Err(MatcherError::Failed("boom".into()))
        };
        match run_collect(&g, &q, &failing, &RunConfig::default()) {
            Err(RunError::MatcherFailure { a, b, .. }) => assert_eq!((a.as_str(), b.as_str()), ("a", "b")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn recall_curve_tracks_reference() {
        let (g, q, m) = setup();
        let reference: BTreeSet<Pair> = [("a", "b"), ("a", "c"), ("b", "c")]
            .iter()
            .map(|(x, y)| Pair::from_ids(&g, x, y).unwrap())
            .collect();
        let cfg = RunConfig {
            recall_reference: Some(reference),
            ..RunConfig::default()
        };
        let (s, _) = run_collect(&g, &q, &m, &cfg).unwrap();
        let pts: Vec<(u64, f64)> = s.recall_curve.iter().map(|p| (p.comparisons, p.recall)).collect();
        assert_eq!(pts, vec![(0, 0.0), (1, 1.0 / 3.0), (2, 1.0)]);
    }
}
