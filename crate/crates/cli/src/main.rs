//! `fleetplan` command line.
//!
//! Exit codes:
//!
//! | code | meaning                                             |
//! |------|-----------------------------------------------------|
//! | 0    | success                                             |
//! | 2    | usage: bad flags, unknown scenario, bad config file |
//! | 3    | input: missing or malformed files, invalid case     |
//! | 4    | solver failure or infeasible model                  |
//! | 5    | audit found violated constraints                    |

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use fleetplan_core::config::{parse_pairs, resolve_config, ConfigPairs, ScenarioConfig};
use fleetplan_core::domain::{validate_case, CaseBundle};
use fleetplan_core::io::{case_hash, load_case_dir, write_case_dir};
use fleetplan_core::oracle::verify_solution;
use fleetplan_core::report::{compare_scenarios, emit_comparison, emit_report, ReportFormat};
use fleetplan_core::results::{load_outcome_parts, read_scenario_document, write_outcome};
use fleetplan_core::scenario::ScenarioRunner;
use fleetplan_core::synth::{
    generate_synthetic_case, generate_tiny_case, SyntheticCaseParams, TinyCaseParams,
};
use fleetplan_core::CoreError;

pub const BACKEND_ENV: &str = "FLEETPLAN_BACKEND";

const EXIT_USAGE: u8 = 2;
const EXIT_INPUT: u8 = 3;
const EXIT_SOLVER: u8 = 4;
const EXIT_AUDIT: u8 = 5;

#[derive(Parser, Debug)]
#[command(name = "fleetplan", version, about = "Size a shared EV fleet and its charging stations in an energy community")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Md,
    Csv,
}

impl Format {
    fn report(self) -> ReportFormat {
        match self {
            Self::Md => ReportFormat::Markdown,
            Self::Csv => ReportFormat::Csv,
        }
    }

    fn ext(self) -> &'static str {
        match self {
            Self::Md => "md",
            Self::Csv => "csv",
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Size {
    /// 20 members, 4 representative weeks.
    Full,
    /// Two representative days, 2 EV slots.
    Desk,
    /// A few buses and one day; for smoke tests.
    Tiny,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic case directory.
    Generate {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, value_enum, default_value = "full")]
        size: Size,
    },
    /// Check a case directory and list violations.
    Validate {
        #[arg(long)]
        case_dir: PathBuf,
    },
    /// Solve one scenario and write its results and KPI report.
    Run(RunArgs),
    /// Side-by-side table of stored scenario results.
    Compare {
        #[arg(required = true, num_args = 2..)]
        results: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "md")]
        format: Format,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Re-check stored results against the constraints.
    Audit {
        result: PathBuf,
        /// Defaults to `case/` next to the result file.
        #[arg(long)]
        case_dir: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

#[derive(clap::Args, Debug)]
struct RunArgs {
    /// 1 to 5, or `custom` (needs --config).
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Without one, a synthetic case is generated from --seed.
    #[arg(long)]
    case_dir: Option<PathBuf>,
    #[arg(long, default_value = "results")]
    out_dir: PathBuf,
    #[arg(long, value_enum, default_value = "md")]
    format: Format,
    #[arg(long)]
    seed: Option<u64>,
    /// Size of the generated case when no case directory is given.
    #[arg(long, value_enum, default_value = "full")]
    size: Size,
    #[arg(long)]
    time_limit: Option<f64>,
    #[arg(long)]
    mip_gap: Option<f64>,
    #[arg(long)]
    cone_tol: Option<f64>,
    #[arg(long, env = BACKEND_ENV)]
    backend: Option<String>,
}

#[derive(Debug)]
struct AuditFailed(String);

impl std::fmt::Display for AuditFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "audit failed:\n{}", self.0)
    }
}

impl std::error::Error for AuditFailed {}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<AuditFailed>().is_some() {
        return EXIT_AUDIT;
    }
    match e.chain().find_map(|c| c.downcast_ref::<CoreError>()) {
        Some(CoreError::Config(_) | CoreError::InvalidParameter(_)) => EXIT_USAGE,
        Some(CoreError::Engine(_) | CoreError::Infeasible(_) | CoreError::Oracle(_)) => EXIT_SOLVER,
        Some(_) => EXIT_INPUT,
        None if e.chain().any(|c| c.downcast_ref::<std::io::Error>().is_some()) => EXIT_INPUT,
        None => EXIT_USAGE,
    }
}

fn dispatch(cmd: Command) -> anyhow::Result<()> {
    match cmd {
        Command::Generate { out_dir, seed, size } => {
            let case = synthesize(size, seed);
            write_case_dir(&case, &out_dir)?;
            println!("wrote case {} to {}", case_hash(&case), out_dir.display());
            Ok(())
        }
        Command::Validate { case_dir } => validate(&case_dir),
        Command::Run(args) => run(args),
        Command::Compare { results, format, out_dir } => compare(&results, format, out_dir.as_deref()),
        Command::Audit { result, case_dir, tol, out_dir } => audit(&result, case_dir, tol, out_dir.as_deref()),
    }
}

fn synthesize(size: Size, seed: u64) -> CaseBundle {
    match size {
        Size::Full => generate_synthetic_case(&SyntheticCaseParams { seed, ..SyntheticCaseParams::default() }),
        Size::Desk => generate_synthetic_case(&SyntheticCaseParams { seed, ..SyntheticCaseParams::desk() }),
        Size::Tiny => generate_tiny_case(&TinyCaseParams::random(seed)),
    }
}

fn validate(dir: &Path) -> anyhow::Result<()> {
    match load_case_dir(dir) {
        Ok(case) => {
            let rep = validate_case(&case);
            print!("{rep}");
            println!(
                "valid: {} buses, {} periods, {} members, {} rides ({} warnings)",
                case.network.bus_count(),
                case.periods(),
                case.members.len(),
                case.rides.len(),
                rep.warnings.len()
            );
            Ok(())
        }
        Err(CoreError::Invalid(rep)) => {
            print!("{rep}");
            Err(CoreError::Invalid(rep)).context(format!("{} is not a valid case", dir.display()))
        }
        Err(e) => Err(e.into()),
    }
}

/// Flags win over the config file.
fn overrides(args: &RunArgs) -> ConfigPairs {
    let mut o = BTreeMap::new();
    let mut put = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            o.insert(k.to_owned(), (v, 0));
        }
    };
    put("scenario", args.scenario.clone());
    put("seed", args.seed.map(|s| s.to_string()));
    put("time_limit", args.time_limit.map(|s| s.to_string()));
    put("mip_gap", args.mip_gap.map(|s| s.to_string()));
    put("cone_tol", args.cone_tol.map(|s| s.to_string()));
    put("backend", args.backend.clone());
    o
}

fn resolve(args: &RunArgs) -> anyhow::Result<ScenarioConfig> {
    let (pairs, base) = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            (parse_pairs(&text)?, path.parent().map(Path::to_path_buf))
        }
        None => (ConfigPairs::new(), None),
    };
    if args.scenario.is_none() && !pairs.contains_key("scenario") {
        return Err(CoreError::Config("--scenario or a config file with `scenario` is required".into()).into());
    }
    let mut cfg = resolve_config(pairs, &overrides(args))?;
    cfg.case_dir = match (&args.case_dir, cfg.case_dir.take(), base) {
        (Some(d), _, _) => Some(d.clone()),
        (None, Some(d), Some(base)) if d.is_relative() => Some(base.join(d)),
        (None, d, _) => d,
    };
    Ok(cfg)
}

fn run(args: RunArgs) -> anyhow::Result<()> {
    let cfg = resolve(&args)?;
    let case = match &cfg.case_dir {
        Some(dir) => load_case_dir(dir)?,
        None => {
            let seed = cfg.seed.unwrap_or(7);
            log::info!("no case directory given; generating a synthetic case with seed {seed}");
            let case = synthesize(args.size, seed);
            let dir = args.out_dir.join("case");
            write_case_dir(&case, &dir)?;
            case
        }
    };
    log::info!(
        "{}: {} buses, {} periods, {} rides, backend {}",
        cfg.label(),
        case.network.bus_count(),
        case.periods(),
        case.rides.len(),
        cfg.solver.backend
    );
    let outcome = ScenarioRunner::new(&cfg.solver)?.run_scenario(&case, &cfg)?;
    let written = write_outcome(&args.out_dir, &case, &outcome)?;
    let report = emit_report(std::slice::from_ref(&outcome.kpis), args.format.report());
    let report_path = args.out_dir.join(format!("{}_report.{}", cfg.label(), args.format.ext()));
    fs::write(&report_path, &report).with_context(|| format!("writing {}", report_path.display()))?;
    print!("{report}");
    for p in written.iter().chain([&report_path]) {
        log::info!("wrote {}", p.display());
    }
    Ok(())
}

fn compare(results: &[PathBuf], format: Format, out_dir: Option<&Path>) -> anyhow::Result<()> {
    let records = results
        .iter()
        .map(|p| read_scenario_document(p).map(|d| d.kpis))
        .collect::<Result<Vec<_>, _>>()?;
    let table = emit_comparison(&compare_scenarios(&records)?, format.report());
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join(format!("comparison.{}", format.ext()));
        fs::write(&path, &table).with_context(|| format!("writing {}", path.display()))?;
    }
    print!("{table}");
    Ok(())
}

fn audit(result: &Path, case_dir: Option<PathBuf>, tol: f64, out_dir: Option<&Path>) -> anyhow::Result<()> {
    let case_dir = case_dir.unwrap_or_else(|| result.parent().unwrap_or(Path::new(".")).join("case"));
    let case = load_case_dir(&case_dir)?;
    let (doc, parts) = load_outcome_parts(&case, result)?;
    let mut reports = BTreeMap::new();
    let mut failed = Vec::new();
    for part in &parts {
        let rep = verify_solution(&case, part, tol);
        let role = part.role.as_str();
        for (tag, f) in rep.failures() {
            failed.push(format!("{role} {tag}: residual {:.3e} at {}", f.max_residual, f.worst));
        }
        if !rep.unserved_identity_exact {
            failed.push(format!("{role}: unserved-energy identity broken"));
        }
        reports.insert(role, rep);
    }
    let json = serde_json::to_string_pretty(&reports)?;
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join(format!("{}_audit.json", doc.scenario));
        fs::write(&path, &json).with_context(|| format!("writing {}", path.display()))?;
    }
    println!("{json}");
    if !failed.is_empty() {
        bail!(AuditFailed(failed.join("\n")));
    }
    eprintln!("{}: all constraint families within {tol:e}", doc.scenario);
    Ok(())
}
