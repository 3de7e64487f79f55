//! Command-line front end: instance generation, scenario execution with
//! artifact output, cross-strategy comparison, and instance validation.
//!
//! Everything is controlled from the command line; no environment
//! variables are read, so an invocation fully determines its result.
//! On failure a machine-readable error record (one JSON object) goes to
//! stderr and the exit code is nonzero.

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use maintsched::cuts::{CutKind, CutStrategy};
use maintsched::generator::{generate_instance, GeneratorSpec};
use maintsched::instance::Instance;
use maintsched::scenario::{
    self, InstanceSource, ScenarioConfig, ScenarioReport, ScenarioScope,
};

#[derive(Parser)]
#[command(
    name = "maintsched",
    version,
    about = "Exact maintenance scheduling and location choice via decomposition"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic instance file.
    Generate(GenerateArgs),
    /// Solve one instance and write run artifacts.
    Solve(SolveArgs),
    /// Run several cut strategies on the same instance and compare.
    Compare(CompareArgs),
    /// Check an instance file and report structural violations.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Start from a named preset (`toy3` or `ns-like`), then apply
    /// the explicit knobs below.
    #[arg(long, default_value = "toy3")]
    preset: String,
    #[arg(long)]
    units: Option<u32>,
    #[arg(long)]
    locations: Option<u32>,
    #[arg(long)]
    days: Option<u32>,
    /// Target fraction of daytime shifts engineered to need two teams.
    #[arg(long)]
    pressure: Option<f64>,
    /// Probability of an extra decorative MO per unit and day.
    #[arg(long)]
    extra_rate: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Destination instance file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// Instance file to solve.
    #[arg(long, conflicts_with = "preset")]
    instance: Option<PathBuf>,
    /// Generate the instance from a preset instead of loading a file.
    #[arg(long)]
    preset: Option<String>,
    /// Constrain capacity on one shift only, as `location:window:day`
    /// (e.g. `loc0:day:1`). Default: all daytime shifts.
    #[arg(long)]
    shift: Option<String>,
    /// Wall-clock limit with unit suffix: `30s`, `90m`, `2h`, `1h30m`.
    #[arg(long, default_value = "2h")]
    time_limit: String,
    /// Heuristic draws per violated shift and iteration.
    #[arg(long, default_value_t = 1)]
    cuts_per_call: u32,
    /// Base seed for randomized cut generation.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for run artifacts.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Cut strategy: naive, basic-heuristic, binary-search-heuristic, min-cut.
    #[arg(long, default_value = "min-cut")]
    strategy: String,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Comma-separated strategies to run.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "naive,basic-heuristic,binary-search-heuristic,min-cut"
    )]
    strategies: Vec<String>,
}

#[derive(Args)]
struct ValidateArgs {
    /// Instance file to check.
    #[arg(long)]
    instance: PathBuf,
}

fn fail(kind: &str, message: impl std::fmt::Display) -> ExitCode {
    let record = serde_json::json!({ "error": { "kind": kind, "message": message.to_string() } });
    eprintln!("{record}");
    ExitCode::FAILURE
}

fn preset_spec(name: &str) -> Result<GeneratorSpec, String> {
    match name {
        "toy3" => Ok(GeneratorSpec::toy3()),
        "ns-like" | "ns_like" => Ok(GeneratorSpec::ns_like()),
        other => Err(format!("unknown preset {other:?}; expected toy3 or ns-like")),
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Generate(args) => generate(args),
        Command::Solve(args) => solve(args),
        Command::Compare(args) => compare(args),
        Command::Validate(args) => validate(args),
    }
}

fn generate(args: GenerateArgs) -> ExitCode {
    let mut spec = match preset_spec(&args.preset) {
        Ok(spec) => spec,
        Err(e) => return fail("usage", e),
    };
    if let Some(v) = args.units {
        spec.units = v;
    }
    if let Some(v) = args.locations {
        spec.locations = v;
    }
    if let Some(v) = args.days {
        spec.days = v;
    }
    if let Some(v) = args.pressure {
        spec.conflict_pressure = v;
    }
    if let Some(v) = args.extra_rate {
        spec.extra_mo_rate = v;
    }
    if let Some(v) = args.seed {
        spec.seed = v;
    }
    let inst = match generate_instance(&spec) {
        Ok(inst) => inst,
        Err(e) => return fail("generation", e),
    };
    if let Err(e) = inst.save(&args.out) {
        return fail("io", e);
    }
    println!(
        "wrote {} ({} units, {} locations, {:.0} h horizon)",
        args.out.display(),
        inst.units.len(),
        inst.locations.len(),
        inst.horizon_hr
    );
    ExitCode::SUCCESS
}

fn build_config(
    run: &RunArgs,
    strategy: CutStrategy,
    out: PathBuf,
) -> Result<ScenarioConfig, ExitCode> {
    let source = match (&run.instance, &run.preset) {
        (Some(path), None) => InstanceSource::File(path.clone()),
        (None, Some(name)) => match preset_spec(name) {
            Ok(spec) => InstanceSource::Generated(spec),
            Err(e) => return Err(fail("usage", e)),
        },
        (None, None) => {
            return Err(fail("usage", "one of --instance or --preset is required"))
        }
        (Some(_), Some(_)) => unreachable!("clap rejects the combination"),
    };
    let time_limit = match scenario::parse_duration(&run.time_limit) {
        Ok(d) => d,
        Err(e) => return Err(fail("usage", e)),
    };
    let scope = match &run.shift {
        None => ScenarioScope::AllDayShifts,
        Some(text) => {
            // Parsing needs location names, so materialize the instance once.
            let inst = match scenario::obtain_instance(&source) {
                Ok(inst) => inst,
                Err(e) => return Err(fail("instance", e)),
            };
            match scenario::parse_shift_key(&inst, text) {
                Ok(key) => ScenarioScope::SingleShift(key),
                Err(e) => return Err(fail("usage", e)),
            }
        }
    };
    Ok(ScenarioConfig { source, scope, strategy, time_limit, output_dir: out })
}

fn parse_strategy(name: &str, cuts_per_call: u32, seed: u64) -> Result<CutStrategy, String> {
    let kind = CutKind::from_str(name)?;
    Ok(CutStrategy::new(kind, cuts_per_call.max(1), seed))
}

fn print_report(label: &str, report: &ScenarioReport) {
    let s = &report.summary;
    println!(
        "{label}: {} objective {:.3} ({} night / {} total) in {} iteration(s), \
         {} cut(s), {:.3} s -> {}",
        s.status,
        s.objective,
        s.night_count,
        s.total_count,
        s.iterations,
        s.total_cuts,
        s.elapsed_secs,
        report.paths.summary_toml.display()
    );
}

fn solve(args: SolveArgs) -> ExitCode {
    let strategy = match parse_strategy(&args.strategy, args.run.cuts_per_call, args.run.seed)
    {
        Ok(s) => s,
        Err(e) => return fail("usage", e),
    };
    let cfg = match build_config(&args.run, strategy, args.run.out.clone()) {
        Ok(cfg) => cfg,
        Err(code) => return code,
    };
    match scenario::run_scenario(&cfg) {
        Ok(report) => {
            print_report(&strategy.to_string(), &report);
            ExitCode::SUCCESS
        }
        Err(e) => fail(error_kind(&e), e),
    }
}

fn compare(args: CompareArgs) -> ExitCode {
    if args.strategies.is_empty() {
        return fail("usage", "at least one strategy is required");
    }
    let mut rows: Vec<(String, ScenarioReport)> = Vec::new();
    for name in &args.strategies {
        let strategy =
            match parse_strategy(name, args.run.cuts_per_call, args.run.seed) {
                Ok(s) => s,
                Err(e) => return fail("usage", e),
            };
        let slug = format!("{}-x{}", strategy.kind, strategy.cuts_per_call);
        let cfg = match build_config(&args.run, strategy, args.run.out.join(&slug)) {
            Ok(cfg) => cfg,
            Err(code) => return code,
        };
        match scenario::run_scenario(&cfg) {
            Ok(report) => {
                print_report(&strategy.to_string(), &report);
                rows.push((strategy.to_string(), report));
            }
            Err(e) => return fail(error_kind(&e), e),
        }
    }
    let optimal: Vec<&(String, ScenarioReport)> =
        rows.iter().filter(|(_, r)| r.summary.status == "OPTIMAL").collect();
    if let Some(((_, first), rest)) = optimal.split_first() {
        let agreed = rest
            .iter()
            .all(|(_, r)| (r.summary.objective - first.summary.objective).abs() < 1e-9);
        if agreed {
            println!(
                "all {} optimal run(s) agree on objective {:.3}",
                optimal.len(),
                first.summary.objective
            );
        } else {
            return fail(
                "solver",
                "strategies reached OPTIMAL with different objectives; \
                 this indicates a bug — please report the instance",
            );
        }
    }
    ExitCode::SUCCESS
}

fn validate(args: ValidateArgs) -> ExitCode {
    // Load without the implicit validity gate so every violation is shown.
    let text = match std::fs::read_to_string(&args.instance) {
        Ok(text) => text,
        Err(e) => return fail("io", e),
    };
    match Instance::from_toml_str(&text) {
        Ok(inst) => {
            let violations = inst.validate();
            if violations.is_empty() {
                println!(
                    "{}: ok ({} units, {} locations, {} types)",
                    args.instance.display(),
                    inst.units.len(),
                    inst.locations.len(),
                    inst.types.len()
                );
                ExitCode::SUCCESS
            } else {
                for v in &violations {
                    println!("violation: {v}");
                }
                fail("invalid-instance", format!("{} violation(s)", violations.len()))
            }
        }
        Err(e) => fail("format", e),
    }
}

fn error_kind(e: &scenario::ScenarioError) -> &'static str {
    use scenario::ScenarioError::*;
    match e {
        Format(_) => "format",
        Generation(_) => "generation",
        Run(_) => "solver",
        Io { .. } => "io",
        UnknownShift(_) => "usage",
        BadShiftSyntax { .. } => "usage",
    }
}
