use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gap_sbm::harness::cantilever::run_cantilever;
use gap_sbm::harness::config::{parse_rotations, Settings};
use gap_sbm::harness::csv::{emit_csv, to_csv};
use gap_sbm::harness::patch::{run_patch, PATCH_TOL};
use gap_sbm::harness::study::{check_study, run_convergence, Check};
use gap_sbm::harness::{Case, Variant};
use gap_sbm::{Error, Result};

#[derive(Parser)]
#[command(name = "gap-sbm", version, about = "Gap shifted boundary method studies")]
struct Cli {
    /// Worker threads for independent solves.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Exit nonzero if an acceptance check fails.
    #[arg(long, global = true)]
    check: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Manufactured-solution convergence study.
    Run(RunArgs),
    /// Affine patch test.
    Patch {
        #[arg(long)]
        case: Case,
    },
    /// Embedded cantilever beam.
    Beam {
        #[arg(long, default_value_t = 5)]
        levels: usize,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Flat key = value file; flags win over its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    case: Option<Case>,
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(long)]
    levels: Option<usize>,
    /// Comma separated angles in degrees.
    #[arg(long)]
    rotations: Option<String>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Record wall-clock times in the CSV.
    #[arg(long)]
    timings: bool,
    /// Skip condition numbers.
    #[arg(long)]
    no_kappa: bool,
}

fn report(checks: &[Check]) -> bool {
    for c in checks {
        println!("{}", c.line());
    }
    checks.iter().all(|c| c.passed)
}

fn run_study(args: RunArgs, threads: Option<usize>, check: bool) -> Result<bool> {
    let base = match &args.config {
        Some(path) => Settings::from_text(&std::fs::read_to_string(path)?)?,
        None => Settings::default(),
    };
    let flags = Settings {
        case: args.case,
        variant: args.variant,
        levels: args.levels,
        rotations: args.rotations.as_deref().map(parse_rotations).transpose()?,
        gamma: args.gamma,
        theta: args.theta,
        out: args.out,
        threads,
        timings: args.timings.then_some(true),
        condition: args.no_kappa.then_some(false),
    };
    let settings = flags.over(base);
    if let Some(t) = settings.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    let cfg = settings.study()?;
    let result = run_convergence(&cfg)?;
    match &cfg.out {
        Some(path) => emit_csv(&result, path)?,
        None => print!("{}", to_csv(&result)),
    }
    for s in &result.slopes {
        eprintln!(
            "rotation {:>7.3}: L2 slope {:.3}  H1 slope {:.3}  kappa slope {:.3}",
            s.rotation_deg, s.l2, s.h1, s.kappa
        );
    }
    Ok(!check || report(&check_study(&cfg, &result)))
}

fn run() -> Result<bool> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => run_study(args, cli.threads, cli.check),
        Command::Patch { case } => {
            let err = run_patch(case)?;
            println!("{case}: max nodal error {err:.3e}");
            Ok(!cli.check || report(&[Check::new(case.name(), err <= PATCH_TOL, format!("{err:.3e}"))]))
        }
        Command::Beam { levels } => {
            let r = run_cantilever(levels)?;
            println!("level,cells_per_unit,segments,dofs,tip,ratio");
            for l in &r.levels {
                println!(
                    "{},{},{},{},{:.9e},{:.6}",
                    l.level, l.cells_per_unit, l.segments, l.dofs, l.tip, l.ratio
                );
            }
            println!("reference {:.6e}", r.reference);
            if !cli.check {
                return Ok(true);
            }
            let last = r.levels.last().expect("at least three levels");
            let tail: Vec<f64> = r.levels[r.levels.len() - 3..]
                .iter()
                .map(|l| (1.0 - l.ratio).abs())
                .collect();
            Ok(report(&[
                Check::new(
                    "beam tip within 1%",
                    (last.ratio - 1.0).abs() <= 0.01,
                    format!("{:.5}", last.ratio),
                ),
                Check::new(
                    "beam monotone approach",
                    tail[0] > tail[1] && tail[1] > tail[2],
                    format!("{tail:?}"),
                ),
            ]))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
