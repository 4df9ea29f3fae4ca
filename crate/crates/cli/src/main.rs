//! `agent-trust` command-line front end.
//!
//! Every command writes one JSON document to stdout (or JSON lines for
//! `generate` without `--out`). Diagnostics go to stderr. Exit status is 0
//! on success, 1 on bad input or usage, 2 when an internal invariant fails.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use agent_trust::composite::{evaluate_with_model, Query};
use agent_trust::config::TrustConfig;
use agent_trust::error::TrustError;
use agent_trust::indirect::{aggregate, find_paths};
use agent_trust::ingest::{self, IngestError};
use agent_trust::model::{AgentId, AgentProfile, Environment, Interaction, TaskCategory};
use agent_trust::oracle::{run_indirect_suite, run_reputation_suite, SuiteParams};
use agent_trust::reputation::ReputationModel;
use agent_trust::simgen::{self, GenParams, RatingModel};
use agent_trust::snapshot;

#[derive(Parser)]
#[command(name = "agent-trust", version, about = "Trust evaluation for multi-agent interaction logs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the trust of a trustee on a task category.
    Eval(QueryArgs),
    /// Dump the propagation table of the indirect path search.
    Paths(QueryArgs),
    /// Emit the normalized reputation vector.
    Reputation {
        #[command(flatten)]
        input: InputArgs,
        /// Snapshot time.
        #[arg(long)]
        time: f64,
        /// Include the propagation matrix as (row, col, weight) triples.
        #[arg(long)]
        matrix: bool,
    },
    /// Write a seeded synthetic interaction log.
    Generate(GenerateArgs),
    /// Save or inspect environment snapshots.
    #[command(subcommand)]
    Snapshot(SnapshotCommand),
    /// Compare the engine with the brute-force oracles on seeded instances.
    Oracle(OracleArgs),
}

#[derive(Args)]
struct InputArgs {
    /// Interaction log (JSON lines).
    #[arg(long)]
    log: PathBuf,
    /// Agent profiles (JSON lines).
    #[arg(long)]
    profiles: Option<PathBuf>,
    /// Engine configuration (flat JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Skip malformed log lines (reported on stderr) instead of failing.
    #[arg(long)]
    lenient: bool,
}

#[derive(Args)]
struct QueryArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    trustor: String,
    #[arg(long)]
    trustee: String,
    #[arg(long)]
    category: String,
    /// Evaluation (snapshot) time.
    #[arg(long)]
    time: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum RatingModelArg {
    Uniform,
    PerAgentQuality,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    agents: usize,
    #[arg(long, default_value_t = 3)]
    categories: usize,
    #[arg(long, default_value_t = 200)]
    interactions: usize,
    #[arg(long, value_enum, default_value_t = RatingModelArg::PerAgentQuality)]
    rating_model: RatingModelArg,
    #[arg(long, default_value_t = 100.0)]
    horizon: f64,
    #[arg(long, default_value_t = 0.0)]
    newcomer_fraction: f64,
    /// Only emit interactions from lower- to higher-numbered agents.
    #[arg(long)]
    acyclic: bool,
    /// Log destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Profile destination.
    #[arg(long)]
    profiles_out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum SnapshotCommand {
    /// Build an environment (and its reputation model) and save it.
    Save {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        time: f64,
        #[arg(long)]
        out: PathBuf,
        /// Leave out the reputation block.
        #[arg(long)]
        no_reputation: bool,
    },
    /// Load a snapshot and summarize it.
    Show {
        #[arg(long)]
        file: PathBuf,
    },
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    instances: usize,
    #[arg(long, default_value_t = 8)]
    max_agents: usize,
    #[arg(long, default_value_t = 3)]
    max_categories: usize,
    #[arg(long, default_value_t = 1e-9)]
    tolerance: f64,
    /// Reputation instances (2 to 50 agents each).
    #[arg(long, default_value_t = 50)]
    reputation_instances: usize,
    #[arg(long)]
    config: Option<PathBuf>,
}

enum Failure {
    Input(String),
    Invariant(String),
}

impl From<TrustError> for Failure {
    fn from(e: TrustError) -> Self {
        match e {
            TrustError::InvariantViolation(_) => Failure::Invariant(e.to_string()),
            _ => Failure::Input(e.to_string()),
        }
    }
}

impl From<IngestError> for Failure {
    fn from(e: IngestError) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Invariant(m)) => {
            eprintln!("internal error: {m}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Outcome {
    match command {
        Command::Eval(q) => eval(&q),
        Command::Paths(q) => paths(&q),
        Command::Reputation {
            input,
            time,
            matrix,
        } => reputation(&input, time, matrix),
        Command::Generate(g) => generate(&g),
        Command::Snapshot(SnapshotCommand::Save {
            input,
            time,
            out,
            no_reputation,
        }) => snapshot_save(&input, time, &out, !no_reputation),
        Command::Snapshot(SnapshotCommand::Show { file }) => snapshot_show(&file),
        Command::Oracle(o) => oracle(&o),
    }
}

fn emit(value: &Value) -> Outcome {
    let mut out = io::stdout().lock();
    serde_json::to_writer(&mut out, value).map_err(|e| Failure::Input(e.to_string()))?;
    writeln!(out)?;
    Ok(())
}

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn load_config(path: Option<&Path>) -> Result<TrustConfig, Failure> {
    match path {
        Some(p) => ingest::load_config(p).map_err(|e| Failure::Input(e.to_string())),
        None => Ok(TrustConfig::default()),
    }
}

struct Inputs {
    log: Vec<Interaction>,
    profiles: Vec<AgentProfile>,
    config: TrustConfig,
}

fn load_inputs(args: &InputArgs) -> Result<Inputs, Failure> {
    let parsed = ingest::parse_log(open(&args.log)?, !args.lenient)?;
    for e in &parsed.errors {
        eprintln!("skipped {}: {e}", args.log.display());
    }
    let profiles = match &args.profiles {
        Some(p) => ingest::parse_profiles(open(p)?)?,
        None => Vec::new(),
    };
    Ok(Inputs {
        log: parsed.interactions,
        profiles,
        config: load_config(args.config.as_deref())?,
    })
}

fn environment(inputs: &Inputs, time: f64) -> Result<Environment, Failure> {
    Ok(Environment::build_with_profiles(
        &inputs.log,
        &inputs.profiles,
        time,
        inputs.config.direct_decay_rate,
    )?)
}

fn eval(q: &QueryArgs) -> Outcome {
    let inputs = load_inputs(&q.input)?;
    let env = environment(&inputs, q.time)?;
    let model = ReputationModel::build(&env, &inputs.config)?;
    let query = Query {
        trustor: AgentId::new(&q.trustor),
        trustee: AgentId::new(&q.trustee),
        category: TaskCategory::new(&q.category),
        time: q.time,
    };
    let report = evaluate_with_model(&env, &inputs.log, &model, &query, &inputs.config)?;
    emit(&serde_json::to_value(&report).expect("report serializes"))
}

fn paths(q: &QueryArgs) -> Outcome {
    let inputs = load_inputs(&q.input)?;
    let env = environment(&inputs, q.time)?;
    let config = &inputs.config;
    let table = find_paths(
        &env,
        &AgentId::new(&q.trustor),
        &AgentId::new(&q.trustee),
        &TaskCategory::new(&q.category),
        config,
    )?;
    table.check_invariants(&env, config.trust_threshold)?;
    let indirect = aggregate(&table, config.path_trust_threshold, config.path_decay);
    emit(&json!({ "table": table, "indirect": indirect }))
}

fn reputation(input: &InputArgs, time: f64, with_matrix: bool) -> Outcome {
    let inputs = load_inputs(input)?;
    let env = environment(&inputs, time)?;
    let model = ReputationModel::build(&env, &inputs.config)?;
    let mut out = json!({
        "nodes": model.nodes,
        "reputation": model.normalized,
        "raw": model.raw,
        "mean_reputation": model.mean_reputation,
        "iterations": model.iterations,
        "converged": model.converged,
    });
    if with_matrix {
        out["matrix"] = json!(model.matrix.triples());
    }
    emit(&out)
}

fn generate(args: &GenerateArgs) -> Outcome {
    let params = GenParams {
        seed: args.seed,
        n_agents: args.agents,
        n_categories: args.categories,
        n_interactions: args.interactions,
        rating_model: match args.rating_model {
            RatingModelArg::Uniform => RatingModel::Uniform,
            RatingModelArg::PerAgentQuality => RatingModel::PerAgentQuality,
        },
        time_horizon: args.horizon,
        newcomer_fraction: args.newcomer_fraction,
        acyclic: args.acyclic,
    };
    let generated = simgen::generate(&params)?;
    if let Some(path) = &args.profiles_out {
        let mut w = BufWriter::new(File::create(path)?);
        ingest::write_profiles(&mut w, &generated.profiles)?;
        w.flush()?;
    }
    match &args.out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            ingest::write_log(&mut w, &generated.log)?;
            w.flush()?;
            emit(&json!({
                "params": params,
                "agents": generated.profiles.len(),
                "interactions": generated.log.len(),
                "log": path,
                "profiles": args.profiles_out,
            }))
        }
        None => {
            let mut w = BufWriter::new(io::stdout().lock());
            ingest::write_log(&mut w, &generated.log)?;
            w.flush()?;
            Ok(())
        }
    }
}

fn snapshot_save(input: &InputArgs, time: f64, out: &Path, with_reputation: bool) -> Outcome {
    let inputs = load_inputs(input)?;
    let env = environment(&inputs, time)?;
    let model = if with_reputation {
        Some(ReputationModel::build(&env, &inputs.config)?)
    } else {
        None
    };
    snapshot::save_snapshot(out, &env, model.as_ref(), &inputs.config)
        .map_err(|e| Failure::Input(e.to_string()))?;
    emit(&json!({
        "file": out,
        "agents": env.agent_count(),
        "edges": env.edge_count(),
        "reputation": with_reputation,
        "config_digest": inputs.config.digest(),
    }))
}

fn snapshot_show(file: &Path) -> Outcome {
    let snap = snapshot::load_snapshot(file).map_err(|e| Failure::Input(e.to_string()))?;
    let env = &snap.environment;
    emit(&json!({
        "version": snapshot::FORMAT_VERSION,
        "snapshot_time": env.snapshot_time(),
        "decay_rate": env.decay_rate(),
        "config_digest": snap.config_digest,
        "agents": env.agent_count(),
        "edges": env.edge_count(),
        "reputation": snap.reputation.as_ref().map(|m| json!({
            "nodes": m.nodes,
            "reputation": m.normalized,
            "iterations": m.iterations,
            "converged": m.converged,
        })),
    }))
}

fn oracle(args: &OracleArgs) -> Outcome {
    let config = load_config(args.config.as_deref())?;
    let params = SuiteParams {
        seed: args.seed,
        instances: args.instances,
        max_agents: args.max_agents,
        max_categories: args.max_categories,
        tolerance: args.tolerance,
    };
    if args.max_agents > agent_trust::oracle::INDIRECT_AGENT_LIMIT {
        return Err(Failure::Input(format!(
            "--max-agents must not exceed {}",
            agent_trust::oracle::INDIRECT_AGENT_LIMIT
        )));
    }
    let indirect = run_indirect_suite(&params, &config)?;
    let reputation = run_reputation_suite(args.seed, args.reputation_instances, 50, &config)?;
    let ok = indirect.passed()
        && reputation.max_entry_gap <= 1e-8
        && reputation.max_row_error <= 1e-9
        && reputation.unconverged == 0;
    emit(&json!({ "passed": ok, "indirect": indirect, "reputation": reputation }))?;
    if ok {
        Ok(())
    } else {
        Err(Failure::Invariant(
            "engine disagrees with the oracle (see report)".into(),
        ))
    }
}
