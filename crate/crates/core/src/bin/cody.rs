use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};

use cody::explainer::cody::{DEFAULT_ALPHA, DEFAULT_IT_MAX};
use cody::explainer::greedy::DEFAULT_L;
use cody::explainer::DEFAULT_M_MAX;
use cody::harness::{
    compare_runs, dataset_stats, load_jodie_csv, run_experiment, ExperimentConfig, OracleSpec,
    ReferenceOverrides,
};
use cody::{cody_explain, greedy_explain, CodyConfig, ExplainerKind, GreedyConfig, PolicyKind, PredictorSession};

#[derive(Parser)]
#[command(name = "cody", version, about = "Counterfactual explanations for temporal link prediction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Explain one prediction and print the result as JSON.
    Explain(ExplainArgs),
    /// Run a full experiment from a TOML config.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Compare the explanations and metrics of two runs.
    Compare {
        #[arg(long, num_args = 2, value_names = ["DIR_A", "DIR_B"])]
        runs: Vec<PathBuf>,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Load a dataset and check its node and event counts.
    ValidateDataset {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        bipartite: bool,
        #[arg(long)]
        expect_nodes: Option<usize>,
        #[arg(long)]
        expect_edges: Option<usize>,
    },
}

#[derive(Args)]
struct ExplainArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    bipartite: bool,
    #[arg(long, default_value = "cody")]
    explainer: ExplainerKind,
    #[arg(long, default_value = "temporal")]
    policy: String,
    /// Event id of the prediction to explain.
    #[arg(long)]
    target: u64,
    /// Explain a link to this destination instead of the event's own.
    #[arg(long)]
    dst: Option<u32>,
    #[arg(long)]
    k: Option<u32>,
    #[arg(long, default_value_t = DEFAULT_M_MAX)]
    m_max: usize,
    #[arg(long, default_value_t = DEFAULT_IT_MAX)]
    it_max: u64,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = DEFAULT_L)]
    l: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "reference")]
    oracle: String,
}

fn explain(args: ExplainArgs) -> Result<()> {
    let graph = load_jodie_csv(&args.dataset, args.bipartite)?;
    let mut target = graph
        .event(args.target)
        .cloned()
        .ok_or_else(|| anyhow!("event {} not in {}", args.target, args.dataset.display()))?;
    if let Some(dst) = args.dst {
        target.dst = dst;
    }
    let policy = PolicyKind::parse_with_seed(&args.policy, args.seed)?;
    let oracle: OracleSpec = args.oracle.parse()?;
    let mut session = PredictorSession::from_boxed(oracle.build(&graph, &ReferenceOverrides::default())?);
    let result = match args.explainer {
        ExplainerKind::Greedy => greedy_explain(
            &mut session,
            &graph,
            &target,
            policy,
            &GreedyConfig {
                l: args.l,
                k: args.k,
                m_max: args.m_max,
            },
        )?,
        ExplainerKind::Cody => cody_explain(
            &mut session,
            &graph,
            &target,
            policy,
            &CodyConfig {
                it_max: args.it_max,
                alpha: args.alpha,
                m_max: args.m_max,
                k: args.k,
                ..CodyConfig::default()
            },
        )?,
    };
    println!("{}", serde_json::to_string_pretty(&result)?);
    Ok(())
}

fn run() -> Result<ExitCode> {
    match Cli::parse().command {
        Command::Explain(args) => explain(args)?,
        Command::Evaluate { config } => {
            let cfg = ExperimentConfig::load(&config)
                .with_context(|| format!("reading {}", config.display()))?;
            let out = run_experiment(&cfg)?;
            for w in &out.manifest.warnings {
                eprintln!("warning: {w}");
            }
            if !out.manifest.skipped.is_empty() {
                eprintln!("{} jobs skipped (see manifest)", out.manifest.skipped.len());
            }
            println!(
                "{} records from {} instances written to {}",
                out.records.len(),
                out.manifest.instances.len(),
                out.dir.display()
            );
        }
        Command::Compare { runs, json } => {
            let report = compare_runs(&runs[0], &runs[1])?;
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                print!("{report}");
            }
        }
        Command::ValidateDataset {
            dataset,
            bipartite,
            expect_nodes,
            expect_edges,
        } => {
            let graph = load_jodie_csv(&dataset, bipartite)?;
            let stats = dataset_stats(&graph);
            println!("{}", serde_json::to_string_pretty(&stats)?);
            let mut ok = true;
            for (what, expect, got) in [
                ("nodes", expect_nodes, stats.nodes),
                ("events", expect_edges, stats.events),
            ] {
                if let Some(n) = expect.filter(|&n| n != got) {
                    eprintln!("mismatch: expected {n} {what}, found {got}");
                    ok = false;
                }
            }
            if !ok {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

