//! `faster`: run, benchmark and inspect query-driven entity resolution from the shell.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use er_core::blocking::Weighting;
use er_core::graph::PropertyGraph;
use er_core::matchers::{GroundTruth, Matcher, OracleMatcher, SimilarityMatcher};
use er_core::metrics::{ablation_suite, bench, write_ablation_csv, write_recall_curve_csv};
use er_core::pps::{prepare, run_pipeline, Feature, RunConfig};
use er_core::rules::{parse_query, rule_selectivity_report, Query};
use er_core::synth::gen_synthetic;

#[derive(Parser)]
#[command(
    name = "faster",
    version,
    about = "Query-driven progressive entity resolution over property graphs"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Resolve the entities a query asks for, streaming NDJSON as clusters form.
    Query(QueryCmd),
    /// Run once and score the result against ground truth.
    Bench(BenchCmd),
    /// Compare comparison counts with each pipeline stage switched off.
    Ablate(AblateCmd),
    /// Write a synthetic user/platform dataset with ground truth and a query.
    Gen(GenCmd),
    /// Check a graph and query for schema problems without running anything.
    Validate(ValidateCmd),
}

#[derive(Args)]
struct Inputs {
    #[arg(long)]
    graph_nodes: PathBuf,
    #[arg(long)]
    graph_edges: PathBuf,
    #[arg(long)]
    query: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum MatcherKind {
    Oracle,
    Similarity,
}

#[derive(Args)]
struct MatcherArgs {
    #[arg(long, value_enum, default_value = "oracle")]
    matcher: MatcherKind,
    /// pid,eid CSV; required by the oracle matcher and for scoring
    #[arg(long)]
    ground_truth: Option<PathBuf>,
    /// attributes the similarity matcher averages over
    #[arg(long, value_delimiter = ',')]
    matcher_attrs: Vec<String>,
    #[arg(long, default_value_t = 0.8)]
    tau: f64,
}

#[derive(Args)]
struct RunArgs {
    /// overrides the query's threshold
    #[arg(long)]
    threshold: Option<f64>,
    /// overrides the query's weighting
    #[arg(long, value_enum)]
    weighting: Option<WeightingArg>,
    /// comma-separated stages to switch off: RF, B, PPS, T
    #[arg(long, value_delimiter = ',', value_parser = parse_feature)]
    disable: Vec<Feature>,
    #[arg(long)]
    max_results: Option<usize>,
    #[arg(long)]
    max_comparisons: Option<u64>,
    /// emit clusters without checking demand on their aggregate
    #[arg(long)]
    no_validate: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum WeightingArg {
    Count,
    Arcs,
}

fn parse_feature(s: &str) -> Result<Feature, String> {
    s.parse()
}

#[derive(Args)]
struct QueryCmd {
    #[command(flatten)]
    inputs: Inputs,
    #[command(flatten)]
    matcher: MatcherArgs,
    #[command(flatten)]
    run: RunArgs,
    /// where the final run statistics go
    #[arg(long, default_value = "faster-stats.json")]
    stats: PathBuf,
    /// also write the blocking graph as pid_a,pid_b,weight,rules
    #[arg(long)]
    dump_blocking: Option<PathBuf>,
}

#[derive(Args)]
struct BenchCmd {
    #[command(flatten)]
    inputs: Inputs,
    #[command(flatten)]
    matcher: MatcherArgs,
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, value_delimiter = ',', default_value = "1,5,10,20")]
    ks: Vec<usize>,
    /// directory for metrics.json, stats.json and recall_curve.csv
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AblateCmd {
    #[command(flatten)]
    inputs: Inputs,
    #[command(flatten)]
    matcher: MatcherArgs,
    #[command(flatten)]
    run: RunArgs,
    /// CSV destination; stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenCmd {
    #[arg(long)]
    entities: usize,
    #[arg(long, default_value_t = 0.3)]
    dup_rate: f64,
    #[arg(long, default_value_t = 0.2)]
    attr_noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ValidateCmd {
    #[arg(long)]
    graph_nodes: PathBuf,
    #[arg(long)]
    graph_edges: PathBuf,
    #[arg(long)]
    query: PathBuf,
    #[arg(long)]
    ground_truth: Option<PathBuf>,
    /// print per-rule retention over the candidate pairs
    #[arg(long)]
    selectivity: bool,
}

/// Bad input (exit 2) versus something failing mid-run (exit 3).
enum Failure {
    Schema(anyhow::Error),
    Runtime(anyhow::Error),
}

trait Classify<T> {
    fn schema(self) -> Result<T, Failure>;
    fn runtime(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn schema(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Schema(e.into()))
    }
    fn runtime(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Runtime(e.into()))
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let res = match cli.cmd {
        Cmd::Query(c) => cmd_query(c),
        Cmd::Bench(c) => cmd_bench(c),
        Cmd::Ablate(c) => cmd_ablate(c),
        Cmd::Gen(c) => cmd_gen(c),
        Cmd::Validate(c) => cmd_validate(c),
    };
    match res {
        Ok(code) => code,
        Err(Failure::Schema(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}

fn load_inputs(i: &Inputs) -> Result<(PropertyGraph, Query), Failure> {
    let g = PropertyGraph::load(&i.graph_nodes, &i.graph_edges).schema()?;
    let q = parse_query(&i.query).schema()?;
    Ok((g, q))
}

fn load_gt(path: &Option<PathBuf>) -> Result<Option<GroundTruth>, Failure> {
    path.as_ref()
        .map(|p| GroundTruth::load(p).with_context(|| format!("ground truth {}", p.display())))
        .transpose()
        .schema()
}

fn require_gt(gt: Option<GroundTruth>, why: &str) -> Result<GroundTruth, Failure> {
    gt.ok_or_else(|| Failure::Schema(anyhow!("--ground-truth is required {why}")))
}

fn build_matcher(a: &MatcherArgs, gt: Option<&GroundTruth>) -> Result<Box<dyn Matcher>, Failure> {
    match a.matcher {
        MatcherKind::Oracle => {
            let gt = require_gt(gt.cloned(), "by the oracle matcher")?;
            Ok(Box::new(OracleMatcher::new(gt)))
        }
        MatcherKind::Similarity => {
            if a.matcher_attrs.is_empty() {
                return Err(Failure::Schema(anyhow!(
                    "--matcher-attrs is required by the similarity matcher"
                )));
            }
            let m = SimilarityMatcher::new(a.matcher_attrs.clone(), a.tau).schema()?;
            Ok(Box::new(m))
        }
    }
}

fn run_config(r: &RunArgs, q: &mut Query) -> RunConfig {
    if let Some(w) = r.weighting {
        q.weighting = match w {
            WeightingArg::Count => Weighting::Count,
            WeightingArg::Arcs => Weighting::Arcs,
        };
    }
    RunConfig {
        threshold: r.threshold,
        disable: r.disable.iter().copied().collect(),
        validate_demand: !r.no_validate,
        max_comparisons: r.max_comparisons,
        max_results: r.max_results,
        recall_reference: None,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .with_context(|| format!("cannot create {}", path.display()))
        .runtime()
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    let mut w = create(path)?;
    writeln!(w, "{text}").and_then(|_| w.flush()).runtime()
}

fn cmd_query(c: QueryCmd) -> Result<ExitCode, Failure> {
    let (g, mut q) = load_inputs(&c.inputs)?;
    let gt = load_gt(&c.matcher.ground_truth)?;
    let matcher = build_matcher(&c.matcher, gt.as_ref())?;
    let cfg = run_config(&c.run, &mut q);

    if let Some(path) = &c.dump_blocking {
        let prepared = prepare(&g, &q, &cfg).runtime()?;
        let mut w = create(path)?;
        prepared.blocking.write_csv(&g, &mut w).runtime()?;
        w.flush().runtime()?;
    }

    let stdout = io::stdout();
    let mut out = stdout.lock();
    let mut write_err: Option<io::Error> = None;
    let mut sink = |e: &er_core::pps::EmittedEntity| {
        if write_err.is_some() {
            return;
        }
        let line = serde_json::to_string(e).expect("emission serializes");
        if let Err(err) = writeln!(out, "{line}").and_then(|_| out.flush()) {
            write_err = Some(err);
        }
    };
    let stats = run_pipeline(&g, &q, matcher.as_ref(), &cfg, &mut sink).runtime()?;
    match write_err {
        // reader went away (`| head`): not our failure
        Some(e) if e.kind() == io::ErrorKind::BrokenPipe => {}
        Some(e) => return Err(Failure::Runtime(anyhow!(e).context("writing to stdout"))),
        None => {}
    }
    write_text(&c.stats, &serde_json::to_string_pretty(&stats).runtime()?)?;
    log::info!(
        "{} comparisons, {} emissions, stats in {}",
        stats.comparisons,
        stats.emissions,
        c.stats.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_bench(c: BenchCmd) -> Result<ExitCode, Failure> {
    let (g, mut q) = load_inputs(&c.inputs)?;
    let gt = require_gt(load_gt(&c.matcher.ground_truth)?, "for scoring")?;
    let matcher = build_matcher(&c.matcher, Some(&gt))?;
    let cfg = run_config(&c.run, &mut q);
    let run = bench(&g, &q, matcher.as_ref(), &cfg, &gt, &c.ks).runtime()?;

    std::fs::create_dir_all(&c.out)
        .with_context(|| format!("cannot create {}", c.out.display()))
        .runtime()?;
    let report = serde_json::to_string_pretty(&run.report).runtime()?;
    write_text(&c.out.join("metrics.json"), &report)?;
    write_text(
        &c.out.join("stats.json"),
        &serde_json::to_string_pretty(&run.stats).runtime()?,
    )?;
    let mut w = create(&c.out.join("recall_curve.csv"))?;
    write_recall_curve_csv(&run.report.recall_curve, &mut w).runtime()?;
    w.flush().runtime()?;

    println!("{report}");
    Ok(ExitCode::SUCCESS)
}

fn cmd_ablate(c: AblateCmd) -> Result<ExitCode, Failure> {
    let (g, mut q) = load_inputs(&c.inputs)?;
    let gt = require_gt(load_gt(&c.matcher.ground_truth)?, "for recall")?;
    let matcher = build_matcher(&c.matcher, Some(&gt))?;
    let cfg = run_config(&c.run, &mut q);
    let rows = ablation_suite(&g, &q, matcher.as_ref(), &cfg, &gt).runtime()?;
    match &c.out {
        Some(path) => {
            let mut w = create(path)?;
            write_ablation_csv(&rows, &mut w).runtime()?;
            w.flush().runtime()?;
        }
        None => write_ablation_csv(&rows, io::stdout().lock()).runtime()?,
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_gen(c: GenCmd) -> Result<ExitCode, Failure> {
    let data = gen_synthetic(c.entities, c.dup_rate, c.attr_noise, c.seed).schema()?;
    data.write_to(&c.out).runtime()?;
    eprintln!(
        "wrote {} nodes, {} edges, {} duplicated entities to {}",
        data.graph.node_count(),
        data.graph.edge_count(),
        data.duplicate_entities,
        c.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_validate(c: ValidateCmd) -> Result<ExitCode, Failure> {
    let mut problems = Vec::new();
    let g = match PropertyGraph::load(&c.graph_nodes, &c.graph_edges) {
        Ok(g) => Some(g),
        Err(e) => {
            problems.push(format!("graph: {e}"));
            None
        }
    };
    let q = match parse_query(&c.query) {
        Ok(q) => Some(q),
        Err(e) => {
            problems.push(format!("query: {e}"));
            None
        }
    };
    if let Some(path) = &c.ground_truth {
        match GroundTruth::load(path) {
            Ok(gt) => {
                if let Some(g) = &g {
                    let mut unknown: Vec<&str> = gt.iter().map(|(p, _)| p).filter(|p| g.try_ix(p).is_none()).collect();
                    unknown.sort_unstable();
                    if let Some(first) = unknown.first() {
                        problems.push(format!(
                            "ground truth: {} pid(s) not in the graph, first {first:?}",
                            unknown.len()
                        ));
                    }
                }
            }
            Err(e) => problems.push(format!("ground truth: {e}")),
        }
    }

    for p in &problems {
        eprintln!("{p}");
    }
    if !problems.is_empty() {
        return Ok(ExitCode::from(2));
    }
    let (g, q) = (g.expect("checked"), q.expect("checked"));
    println!(
        "ok: {} nodes, {} edges, {} pattern vars, {} rules",
        g.node_count(),
        g.edge_count(),
        q.pattern.nodes.len(),
        q.rules.len()
    );
    if c.selectivity {
        let report = rule_selectivity_report(&q, &g).runtime()?;
        println!("{}", serde_json::to_string_pretty(&report).runtime()?);
    }
    Ok(ExitCode::SUCCESS)
}
