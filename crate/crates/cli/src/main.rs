//! `poisfam`: verification, reduction and integration runs for Poisson family members.

mod report;
mod runner;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use scenario::{Action, Resolved, Scenario, SchemaError};

#[derive(Parser)]
#[command(name = "poisfam", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an action on a catalog system or a scenario file.
    Run(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    action: Option<Action>,
    /// lv3, qp-lv3, circle-maps or nlv.
    system: Option<String>,
    /// TOML scenario; flags override its values.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    a: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    b: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    c: Option<Vec<f64>>,
    #[arg(long, allow_hyphen_values = true)]
    k: Option<f64>,
    /// Domain box as `lo:hi,lo:hi,...`.
    #[arg(long = "box", value_name = "BOX")]
    domain: Option<String>,
    /// Hamiltonian in prefix notation, e.g. `(add x1 (mul 2 x2))`.
    #[arg(long)]
    hamiltonian: Option<String>,
    /// Point for `reduce`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x: Option<Vec<f64>>,
    /// Initial state for `integrate`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x0: Option<Vec<f64>>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    rtol: Option<f64>,
    #[arg(long)]
    atol: Option<f64>,
    /// Output directory.
    #[arg(long, env = "POISFAM_OUT_DIR")]
    out: Option<PathBuf>,
}

fn parse_box(text: &str) -> Result<Vec<[f64; 2]>, SchemaError> {
    text.split(',')
        .map(|pair| {
            let (lo, hi) = pair
                .split_once(':')
                .ok_or_else(|| SchemaError(format!("box entry `{pair}` is not lo:hi")))?;
            let num = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| SchemaError(format!("box entry `{pair}`: {e}")))
            };
            Ok([num(lo)?, num(hi)?])
        })
        .collect()
}

fn merge(args: RunArgs) -> Result<Scenario, SchemaError> {
    let mut s = match &args.scenario {
        Some(path) => Scenario::load(path)?,
        None => Scenario::default(),
    };
    macro_rules! set {
        ($dst:expr, $src:expr) => {
            if let Some(v) = $src {
                $dst = Some(v);
            }
        };
    }
    set!(s.action, args.action);
    set!(s.system.catalog, args.system);
    set!(s.points, args.points);
    set!(s.seed, args.seed);
    set!(s.system.n, args.n);
    set!(s.system.a, args.a);
    set!(s.system.b, args.b);
    set!(s.system.c, args.c);
    set!(s.system.k, args.k);
    set!(s.system.hamiltonian, args.hamiltonian);
    set!(s.system.domain, args.domain.as_deref().map(parse_box).transpose()?);
    set!(s.reduce.x, args.x);
    set!(s.integrate.x0, args.x0);
    set!(s.integrate.t_end, args.t_end);
    set!(s.integrate.rtol, args.rtol);
    set!(s.integrate.atol, args.atol);
    set!(s.out, args.out);
    Ok(s)
}

fn main() -> ExitCode {
    let Command::Run(args) = Cli::parse().command;
    let prepared = merge(args).and_then(Resolved::new).and_then(|r| {
        let built = scenario::build(&r.system)?;
        runner::precheck(&r, &built)?;
        Ok((r, built))
    });
    let (resolved, built) = match prepared {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let outcome = runner::run(&resolved, &built).and_then(|report| {
        report.write(&resolved.out)?;
        Ok(report)
    });
    match outcome {
        Ok(report) => {
            for c in &report.checks {
                let value = c.value.map_or_else(|| "n/a".to_string(), |v| format!("{v:.3e}"));
                let status = if c.pass { "ok  " } else { "FAIL" };
                match &c.error {
                    Some(err) => println!("{status} {:<28} {err}", c.name),
                    None => println!("{status} {:<28} {value} (tol {:.0e})", c.name, c.tolerance),
                }
            }
            println!("report: {}", resolved.out.join(report::REPORT_FILE).display());
            if report.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
