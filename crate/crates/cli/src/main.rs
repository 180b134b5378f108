use std::error::Error;
use std::fs;
use std::io::{self, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::AtomicBool;
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use pmresched::bench::{self, BenchPlan};
use pmresched::disruption::{self, Event};
use pmresched::generator::{self, GeneratorParams, Preset};
use pmresched::heuristics::construct;
use pmresched::recommend::{self, RepairProfile, DEFAULT_SUGGESTION_COUNT};
use pmresched::scoring::evaluate_full;
use pmresched::search::{self, Algorithm, SearchConfig, DEFAULT_LATE_ACCEPTANCE_LENGTH};
use pmresched::{HeuristicConfig, Instance, Schedule};
use serde_json::{json, Value};
use tracing_subscriber::EnvFilter;

type CliResult<T = ()> = Result<T, Box<dyn Error>>;

#[derive(Debug, Parser)]
#[command(
    name = "pmresched",
    version,
    about = "Preventive-maintenance scheduling and rescheduling"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate an instance from a preset or a parameter file.
    Generate(GenerateArgs),
    /// Build a schedule with a construction heuristic, then improve it.
    Solve(SolveArgs),
    /// Apply a disruption event to a schedule.
    Disturb(DisturbArgs),
    /// Print the repair options available for a schedule.
    Options(InputArgs),
    /// Print the score and per-constraint breakdown of a schedule.
    Score(InputArgs),
    /// List ranked assignments for one unassigned task.
    Suggest(SuggestArgs),
    /// Assign every unassigned task with a repair profile.
    Auto(AutoArgs),
    /// Complete and improve a schedule (full recovery).
    Recover(RecoverArgs),
    /// Pin tasks and improve the rest of the schedule.
    Reschedule(RescheduleArgs),
    /// Run the construction-heuristic benchmark.
    Bench(BenchArgs),
    /// Serve the HTTP/JSON session API.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// One of S1, S2, S3, M1, M2, M3, L1, L2, L3.
    #[arg(long, conflicts_with = "params", required_unless_present = "params")]
    preset: Option<Preset>,
    /// Generator parameters as JSON.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SearchArgs {
    /// Search time limit in milliseconds.
    #[arg(long = "time-limit", value_name = "MS", conflicts_with = "unimproved")]
    time_limit: Option<u64>,
    /// Stop after this many steps without a new best score.
    #[arg(long, value_name = "STEPS")]
    unimproved: Option<u64>,
    /// `late_acceptance` or `hill_climb`.
    #[arg(long, default_value = "late_acceptance")]
    algo: Algorithm,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "laa-length", default_value_t = DEFAULT_LATE_ACCEPTANCE_LENGTH)]
    laa_length: usize,
}

impl SearchArgs {
    fn config(&self, default_millis: u64) -> SearchConfig {
        let mut config = match (self.time_limit, self.unimproved) {
            (_, Some(steps)) => SearchConfig::step_limited(steps, self.seed),
            (Some(ms), None) => SearchConfig::time_limited(Duration::from_millis(ms), self.seed),
            (None, None) => SearchConfig::time_limited(Duration::from_millis(default_millis), self.seed),
        };
        config.algorithm = self.algo;
        config.late_acceptance_length = self.laa_length;
        config
    }
}

#[derive(Debug, Args)]
struct SolveArgs {
    /// Instance or partially assigned schedule.
    #[arg(long = "in")]
    input: PathBuf,
    /// Construction heuristic, e.g. `EQ/ND/EN/VI`.
    #[arg(long, default_value = "EQ/ND/EN/VI")]
    config: HeuristicConfig,
    /// Skip local search and keep the constructed schedule.
    #[arg(long)]
    construct_only: bool,
    #[command(flatten)]
    search: SearchArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DisturbArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Event JSON such as `{"kind":"E4","task_ids":["task-0003"]}`.
    #[arg(long)]
    event: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Where to write the impact report; standard error when omitted.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct InputArgs {
    #[arg(long = "in")]
    input: PathBuf,
}

#[derive(Debug, Args)]
struct SuggestArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    task: String,
    /// Number of suggestions; 0 lists every candidate.
    #[arg(short, long, default_value_t = DEFAULT_SUGGESTION_COUNT)]
    k: usize,
    /// `quality`, `fast` or a configuration string.
    #[arg(long, default_value = "quality")]
    profile: RepairProfile,
}

#[derive(Debug, Args)]
struct AutoArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value = "quality")]
    profile: RepairProfile,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RecoverArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[command(flatten)]
    search: SearchArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RescheduleArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Task ids to pin; replaces the schedule's pin set.
    #[arg(long, value_delimiter = ',')]
    pin: Vec<String>,
    #[command(flatten)]
    search: SearchArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Plan JSON; every field is optional.
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Results CSV.
    #[arg(long)]
    out: PathBuf,
    /// Use all 36 configurations instead of the default 24.
    #[arg(long)]
    full_grid: bool,
    /// Include the L presets.
    #[arg(long)]
    large: bool,
    /// Run configurations on worker threads (timings become non-comparable).
    #[arg(long)]
    parallel: bool,
    /// Summary and plot data; defaults to the CSV path with `.summary.json`.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, env = "PMRESCHED_PORT", default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: std::net::IpAddr,
    /// Directory for JSON snapshots of instances and sessions.
    #[arg(long)]
    persist: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let default_level = if matches!(cli.command, Command::Serve(_)) {
        "info"
    } else {
        "warn"
    };
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new(default_level)))
        .with_writer(io::stderr)
        .init();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> CliResult {
    match command {
        Command::Generate(args) => generate(args),
        Command::Solve(args) => solve(args),
        Command::Disturb(args) => disturb(args),
        Command::Options(args) => {
            let schedule = read_schedule(&args.input)?;
            let options = recommend::available_options(&schedule);
            let view: Vec<Value> = options.iter().map(|&o| json!({"id": o, "name": o.name()})).collect();
            write_json(None, &view)
        }
        Command::Score(args) => {
            let schedule = read_schedule(&args.input)?;
            let (score, breakdown) = evaluate_full(&schedule)?;
            write_json(
                None,
                &json!({
                    "score": score,
                    "breakdown": breakdown,
                    "initialized": schedule.is_initialized(),
                    "unassigned": schedule.unassigned_ids(),
                }),
            )
        }
        Command::Suggest(args) => {
            let schedule = read_schedule(&args.input)?;
            let list = recommend::suggest(&schedule, &args.task, args.k, &args.profile)?;
            write_json(None, &list)
        }
        Command::Auto(args) => {
            let schedule = read_schedule(&args.input)?;
            let auto = recommend::auto_assign(&schedule, &args.profile)?;
            eprintln!("placed {} task(s)", auto.log.len());
            write_json(args.out.as_deref(), &auto.schedule)
        }
        Command::Recover(args) => {
            let schedule = read_schedule(&args.input)?;
            let recovery = recommend::full_recovery(&schedule, &args.search.config(5_000), &AtomicBool::new(false))?;
            eprintln!("score {}", recovery.score);
            write_json(args.out.as_deref(), &recovery.schedule)
        }
        Command::Reschedule(args) => {
            let schedule = read_schedule(&args.input)?;
            let improved = recommend::dynamic_reschedule(
                &schedule,
                &args.pin,
                &args.search.config(5_000),
                &AtomicBool::new(false),
            )?;
            eprintln!("score {}", improved.score);
            write_json(args.out.as_deref(), &improved.schedule)
        }
        Command::Bench(args) => run_bench(args),
        Command::Serve(args) => serve(args),
    }
}

fn generate(args: GenerateArgs) -> CliResult {
    let params = match (&args.preset, &args.params) {
        (Some(preset), _) => preset.params(args.seed),
        (None, Some(path)) => read_json::<GeneratorParams>(path)?.with_seed(args.seed),
        (None, None) => unreachable!("clap requires one of --preset and --params"),
    };
    let instance = generator::generate(&params)?;
    eprintln!(
        "{} tasks, {} technicians, occupancy {:.2}%",
        instance.tasks().len(),
        instance.technicians().len(),
        100.0 * instance.measured_occupancy()
    );
    write_json(args.out.as_deref(), &instance)
}

fn solve(args: SolveArgs) -> CliResult {
    let start = read_schedule(&args.input)?;
    let built = construct(&start, &args.config, None)?;
    let mut schedule = built.schedule;
    if !args.construct_only {
        schedule = search::improve(&schedule, &args.search.config(5_000))?.schedule;
    }
    eprintln!("score {}", schedule.score()?);
    write_json(args.out.as_deref(), &schedule)
}

fn disturb(args: DisturbArgs) -> CliResult {
    let schedule = read_schedule(&args.input)?;
    let event: Event = read_json(&args.event)?;
    let (disturbed, report) = disruption::apply_event(&schedule, &event)?;
    match &args.report {
        Some(path) => write_json(Some(path), &report)?,
        None => eprintln!("{}", serde_json::to_string_pretty(&report)?),
    }
    write_json(args.out.as_deref(), &disturbed)
}

fn run_bench(args: BenchArgs) -> CliResult {
    let mut plan = match &args.plan {
        Some(path) => read_json::<BenchPlan>(path)?,
        None => BenchPlan::default(),
    };
    plan.full_grid |= args.full_grid;
    plan.large |= args.large;
    plan.parallel |= args.parallel;
    eprintln!("{} runs", plan.run_count());
    let records = bench::run_bench(&plan)?;
    let timed_out = records.iter().filter(|r| r.timed_out).count();
    if timed_out > 0 {
        eprintln!("{timed_out} run(s) hit the timeout");
    }
    bench::write_csv(fs::File::create(&args.out)?, &records)?;

    let summary = bench::summarize(&records);
    let summary_path = args.summary.unwrap_or_else(|| args.out.with_extension("summary.json"));
    write_json(Some(&summary_path), &summary)?;
    let meta = json!({
        "plan": plan,
        "records": records.len(),
        "timed_out": timed_out,
        "timings_comparable": !plan.parallel,
    });
    write_json(Some(&args.out.with_extension("meta.json")), &meta)
}

fn serve(args: ServeArgs) -> CliResult {
    let state = match &args.persist {
        Some(dir) => pmresched_service::AppState::persistent(dir)?,
        None => pmresched_service::AppState::in_memory(),
    };
    let addr = SocketAddr::new(args.host, args.port);
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        pmresched_service::serve(listener, state, async {
            let _ = tokio::signal::ctrl_c().await;
            tracing::info!("shutting down");
        })
        .await
    })?;
    Ok(())
}

/// Reads a schedule, or an instance as an empty schedule.
fn read_schedule(path: &Path) -> CliResult<Schedule> {
    let value: Value = read_json(path)?;
    if value.get("assignments").is_some() {
        Ok(serde_json::from_value(value)?)
    } else {
        let instance: Instance = serde_json::from_value(value)?;
        Ok(Schedule::new(Arc::new(instance)))
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let bytes = fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_slice(&bytes).map_err(|e| format!("{}: {e}", path.display()).into())
}

fn write_json<T: serde::Serialize + ?Sized>(path: Option<&Path>, value: &T) -> CliResult {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match path {
        Some(path) => fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))?,
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}
