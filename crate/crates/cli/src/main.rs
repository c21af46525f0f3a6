//! `primalfix` command-line front end.
//!
//! Exit codes: 0 success; 1 a statistical failure the user should look at
//! (TMLE did not converge, positivity violation, treatment not primal
//! fixable); 2 bad input (unparseable files, graph/data mismatch, invalid
//! configuration).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use primalfix::data::{Binding, ColumnKind, Dataset};
use primalfix::estimators::{
    ace, brute_force_psi, estimate_many, EstimateError, EstimateReport, EstimatorConfig, EstimatorKind, JointTable,
};
use primalfix::graph::{Admg, CausalPartition, GraphError, GraphSpec};
use primalfix::learn::Basis;
use primalfix::nuisance::{NuisanceConfig, Strategy};
use primalfix::simulation::{run_experiment, ExperimentConfig};

#[derive(Parser, Debug)]
#[command(name = "primalfix", version, about = "Causal effects of a binary treatment in hidden-variable graphs")]
struct Cli {
    /// Worker threads for simulations (0 = all cores).
    #[arg(long, global = true, env = "PF_THREADS", default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print districts, order, fixability and the mediator partition of a graph.
    Graph(GraphArgs),
    /// Estimate E[Y(a0)] (or the ACE) from a CSV file.
    Estimate(EstimateArgs),
    /// Run a replication experiment described by a JSON config.
    Simulate(SimulateArgs),
    /// Exact identification functional of a discrete joint table.
    Oracle(OracleArgs),
}

#[derive(Args, Debug)]
struct Query {
    /// Graph JSON file.
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, default_value = "A")]
    treatment: String,
    #[arg(long, default_value = "Y")]
    outcome: String,
}

#[derive(Args, Debug)]
struct GraphArgs {
    #[command(flatten)]
    query: Query,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    #[command(flatten)]
    query: Query,
    /// CSV data file with a header row.
    #[arg(long)]
    data: PathBuf,
    /// Column binding `VERTEX=col1,col2`; repeatable. Unbound vertices of
    /// arity 1 use the column of the same name, arity k uses NAME1..NAMEk.
    #[arg(long = "bind")]
    bind: Vec<String>,
    /// Treatment level of the counterfactual mean.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(0..=1))]
    a0: u8,
    /// Estimate both levels and their difference.
    #[arg(long)]
    ace: bool,
    #[arg(long, default_value = "tmle")]
    estimator: EstimatorKind,
    #[arg(long, default_value = "bayes")]
    strategy: Strategy,
    #[arg(long, default_value = "main_terms")]
    basis: Basis,
    /// Cross-fitting folds.
    #[arg(long)]
    crossfit: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report JSON path.
    #[arg(long, default_value = "report.json")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Experiment JSON file.
    config: PathBuf,
    /// Overrides the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the number of replications.
    #[arg(long)]
    replications: Option<usize>,
    /// Output prefix; writes `<out>.csv`, `<out>.json` and `<out>.records.json`.
    #[arg(long, default_value = "metrics")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct OracleArgs {
    #[command(flatten)]
    query: Query,
    /// CSV joint table: one column per vertex plus a probability column `p`.
    #[arg(long)]
    table: PathBuf,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(0..=1))]
    a0: u8,
}

/// Error paired with the exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn bad_input(error: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: 2,
        error: error.into(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        // a second initialisation only happens in tests and is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global();
    }
    let result = match cli.command {
        Command::Graph(args) => cmd_graph(&args),
        Command::Estimate(args) => cmd_estimate(&args),
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Oracle(args) => cmd_oracle(&args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn load_graph(path: &Path) -> Result<Admg, Failure> {
    GraphSpec::read(path)
        .and_then(|spec| spec.to_admg())
        .with_context(|| format!("reading graph {}", path.display()))
        .map_err(bad_input)
}

fn braces<'a>(items: impl IntoIterator<Item = &'a String>) -> String {
    let v: Vec<&str> = items.into_iter().map(String::as_str).collect();
    format!("{{{}}}", v.join(", "))
}

fn cmd_graph(args: &GraphArgs) -> Result<u8, Failure> {
    let g = load_graph(&args.query.graph)?;
    let (a, y) = (args.query.treatment.as_str(), args.query.outcome.as_str());
    for v in [a, y] {
        if !g.contains(v) {
            return Err(bad_input(anyhow!("vertex `{v}` is not in the graph")));
        }
    }
    let mut out = String::new();
    let districts: Vec<String> = g.districts().iter().map(braces).collect();
    writeln!(out, "districts: {}", districts.join(" ")).unwrap();
    let fixable = g.primal_fixable(a).map_err(bad_input)?;
    match g.topological_order(a, y) {
        Ok(order) => writeln!(out, "topological order: {}", order.as_slice().join(" < ")).unwrap(),
        Err(e) => writeln!(out, "topological order: unavailable ({e})").unwrap(),
    }
    if fixable {
        writeln!(out, "primal fixable: yes").unwrap();
    } else {
        let conflicts = g.fixability_conflicts(a).map_err(bad_input)?;
        writeln!(out, "primal fixable: no (children of {a} in its district: {})", braces(&conflicts)).unwrap();
    }
    writeln!(out, "mb-shielded: {}", if g.mb_shielded() { "yes" } else { "no" }).unwrap();
    if fixable {
        match CausalPartition::new(&g, a, y) {
            Ok(p) => {
                let order = p.order().as_slice();
                let l: Vec<&String> = order
                    .iter()
                    .filter(|v| v.as_str() == a || p.district_post().contains(*v))
                    .collect();
                let m: Vec<&String> = order.iter().filter(|v| p.outside_post().contains(*v)).collect();
                writeln!(out, "X = {}", braces(order.iter().filter(|v| p.pre_treatment().contains(*v)))).unwrap();
                writeln!(out, "L = {}; M = {}", braces(l), braces(m)).unwrap();
                let labels: Vec<String> = p
                    .mediators()
                    .iter()
                    .zip(p.labels())
                    .map(|(z, lv)| format!("{z}:{}", format!("{lv:?}").to_lowercase()))
                    .collect();
                writeln!(out, "mediators: {}", labels.join(" ")).unwrap();
            }
            Err(e) => writeln!(out, "partition: unavailable ({e})").unwrap(),
        }
    }
    print!("{out}");
    Ok(if fixable { 0 } else { 1 })
}

fn parse_binding(g: &Admg, bind: &[String]) -> Result<Binding, Failure> {
    let mut explicit: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for b in bind {
        let (v, cols) = b
            .split_once('=')
            .ok_or_else(|| bad_input(anyhow!("binding `{b}` is not of the form VERTEX=col1,col2")))?;
        let cols: Vec<String> = cols.split(',').map(|c| c.trim().to_string()).filter(|c| !c.is_empty()).collect();
        explicit.insert(v.trim().to_string(), cols);
    }
    for v in explicit.keys() {
        if !g.contains(v) {
            return Err(bad_input(anyhow!("binding names unknown vertex `{v}`")));
        }
    }
    Ok(g.vertices()
        .iter()
        .map(|v| {
            let cols = explicit.remove(&v.name).unwrap_or_else(|| {
                if v.arity == 1 {
                    vec![v.name.clone()]
                } else {
                    (1..=v.arity).map(|i| format!("{}{i}", v.name)).collect()
                }
            });
            (v.name.clone(), cols)
        })
        .collect())
}

#[derive(Serialize)]
struct EstimateOutput<'a> {
    treatment: &'a str,
    outcome: &'a str,
    n: usize,
    reports: Vec<EstimateReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ace: Option<EstimateReport>,
}

fn cmd_estimate(args: &EstimateArgs) -> Result<u8, Failure> {
    let g = load_graph(&args.query.graph)?;
    let (a, y) = (args.query.treatment.as_str(), args.query.outcome.as_str());
    let partition = CausalPartition::new(&g, a, y).map_err(|e| match e {
        GraphError::NotPrimalFixable { .. } => Failure {
            code: 1,
            error: e.into(),
        },
        other => bad_input(other),
    })?;
    let binding = parse_binding(&g, &args.bind)?;
    let mut kinds = BTreeMap::new();
    if let Some((_, cols)) = binding.iter().find(|(v, _)| v == a) {
        for c in cols {
            kinds.insert(c.clone(), ColumnKind::Binary);
        }
    }
    let data = Dataset::load_csv(&args.data, binding, &kinds)
        .with_context(|| format!("reading data {}", args.data.display()))
        .map_err(bad_input)?;
    let issues = data.validate_query(&g, a, y);
    if !issues.is_empty() {
        let text: Vec<String> = issues.iter().map(|i| i.to_string()).collect();
        return Err(bad_input(anyhow!("data do not match the graph: {}", text.join("; "))));
    }
    let mut nuisance = NuisanceConfig::new(args.strategy).with_basis(args.basis);
    nuisance.seed = args.seed;
    let config = EstimatorConfig {
        nuisance,
        crossfit: args.crossfit,
        ..EstimatorConfig::default()
    };
    let levels: Vec<f64> = if args.ace { vec![1.0, 0.0] } else { vec![f64::from(args.a0)] };
    let mut reports = Vec::new();
    for &lv in &levels {
        let rep = estimate_many(&data, &partition, &config, &[args.estimator], lv)
            .map_err(estimate_failure)?
            .remove(0);
        reports.push(rep);
    }
    let contrast = if args.ace {
        Some(ace(&reports[0], &reports[1], &data).map_err(estimate_failure)?)
    } else {
        None
    };
    let all_converged = reports.iter().all(|r| r.converged);
    for r in reports.iter().chain(contrast.iter()) {
        let target = r.a0.map_or("ACE".to_string(), |v| format!("E[{y}({v})]"));
        let ci = match (r.ci_lower, r.ci_upper) {
            (Some(lo), Some(hi)) => format!(" 95% CI [{lo:.4}, {hi:.4}]"),
            _ => String::new(),
        };
        println!(
            "{} {} {target} = {:.4}{ci}{}",
            r.estimator,
            r.strategy,
            r.psi,
            if r.converged { "" } else { " (not converged)" }
        );
    }
    let output = EstimateOutput {
        treatment: a,
        outcome: y,
        n: data.n(),
        reports,
        ace: contrast,
    };
    let text = serde_json::to_string_pretty(&output).map_err(bad_input)?;
    std::fs::write(&args.out, text)
        .with_context(|| format!("writing {}", args.out.display()))
        .map_err(bad_input)?;
    Ok(if all_converged { 0 } else { 1 })
}

fn estimate_failure(e: EstimateError) -> Failure {
    let code = if matches!(e, EstimateError::Positivity(_)) { 1 } else { 2 };
    Failure { code, error: e.into() }
}

fn cmd_simulate(args: &SimulateArgs) -> Result<u8, Failure> {
    let text = std::fs::read_to_string(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))
        .map_err(bad_input)?;
    let mut config: ExperimentConfig = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", args.config.display()))
        .map_err(bad_input)?;
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if let Some(r) = args.replications {
        config.replications = r;
    }
    config.validate().map_err(bad_input)?;
    let result = run_experiment(&config).map_err(bad_input)?;
    let prefix = args.out.to_string_lossy().to_string();
    result
        .table
        .write_csv(format!("{prefix}.csv"))
        .map_err(bad_input)?;
    result
        .table
        .write_json(format!("{prefix}.json"))
        .map_err(bad_input)?;
    let records = serde_json::to_string_pretty(&result.records).map_err(bad_input)?;
    std::fs::write(format!("{prefix}.records.json"), records).map_err(bad_input)?;
    println!("{} a0={} truth={:.4}", result.dgp, result.a0, result.truth);
    println!(
        "{:>6} {:<14} {:<8} {:>8} {:>8} {:>8} {:>6} {:>9} {:>5}",
        "n", "arm", "est", "bias", "sd", "mse", "cover", "sqrtn*b", "fail"
    );
    let opt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.3}"));
    for r in &result.table.rows {
        println!(
            "{:>6} {:<14} {:<8} {:>8.3} {:>8} {:>8.3} {:>6} {:>9.3} {:>5}",
            r.n,
            r.arm,
            r.estimator.tag(),
            r.bias,
            opt(r.sd),
            r.mse,
            opt(r.coverage),
            r.sqrt_n_bias,
            r.failures
        );
    }
    for d in &result.table.diagnostics {
        println!("note: {d}");
    }
    Ok(0)
}

fn cmd_oracle(args: &OracleArgs) -> Result<u8, Failure> {
    let g = load_graph(&args.query.graph)?;
    let partition = CausalPartition::new(&g, &args.query.treatment, &args.query.outcome).map_err(bad_input)?;
    let table = JointTable::read_csv(&args.table).map_err(estimate_failure)?;
    let names: BTreeSet<&str> = g.names().collect();
    for v in table.vertices() {
        if !names.contains(v.as_str()) {
            return Err(bad_input(anyhow!("table column `{v}` is not a graph vertex")));
        }
    }
    let psi = brute_force_psi(&table, &partition, f64::from(args.a0)).map_err(estimate_failure)?;
    println!("psi({}) = {psi:.12}", args.a0);
    Ok(0)
}
