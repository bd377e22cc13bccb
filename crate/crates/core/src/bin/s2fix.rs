use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use s2fix::harness::{load_scenario, render_svg, run, Projection};

#[derive(Parser)]
#[command(
    name = "s2fix",
    version,
    about = "Common fixed points of nilpotent actions near the identity on S²"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// C¹ distance to the identity for each generator.
    Norm(Common),
    /// V_k membership of each generator.
    CheckVk(Common),
    /// Forward orbit and recurrence scan.
    Orbit(Common),
    /// Character curve, loop partition and ball exclusion.
    Curve(Common),
    /// Common fixed point of the action.
    Fix(Common),
    /// Two fixed points from a finite orbit.
    Fix2(Common),
    /// Lower-central-series identities on a unitriangular group.
    VerifyAlgebra(Common),
    /// Commutator inequality, ball exclusion and curve-pair checks.
    VerifyLemmas(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Report path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
    /// stereographic_north, stereographic_south or orthographic(x,y,z).
    #[arg(long, default_value = "stereographic_north")]
    projection: String,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    mesh_level: Option<u32>,
    /// Budget for orbit iterates and curve segments.
    #[arg(long)]
    max_steps: Option<usize>,
}

const INPUT_ERROR: u8 = 4;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, opts) = match &cli.command {
        Command::Norm(c) => ("norm", c),
        Command::CheckVk(c) => ("check-vk", c),
        Command::Orbit(c) => ("orbit", c),
        Command::Curve(c) => ("curve", c),
        Command::Fix(c) => ("fix", c),
        Command::Fix2(c) => ("fix2", c),
        Command::VerifyAlgebra(c) => ("verify-algebra", c),
        Command::VerifyLemmas(c) => ("verify-lemmas", c),
    };
    let fail = |msg: String| {
        eprintln!("error: {msg}");
        ExitCode::from(INPUT_ERROR)
    };

    let projection = match Projection::parse(&opts.projection) {
        Some(p) => p,
        None => return fail(format!("unknown projection `{}`", opts.projection)),
    };
    let origin = opts.scenario.display().to_string();
    let mut scenario = match load_scenario(&opts.scenario) {
        Ok(p) => p.scenario,
        Err(e) => return fail(e.to_string()),
    };
    if scenario.task.kind() != kind {
        return fail(format!(
            "{origin}: scenario task is `{}`, not `{kind}`",
            scenario.task.kind()
        ));
    }
    if let Some(s) = opts.seed {
        scenario.seed = s;
    }
    if let Some(t) = opts.tol {
        scenario.config.tol = Some(t);
    }
    if let Some(l) = opts.mesh_level {
        scenario.config.mesh_level = Some(l);
    }
    if let Some(n) = opts.max_steps {
        scenario.config.max_segments = Some(n);
        scenario.config.orbit_length = Some(n);
    }
    let prepared = match scenario.prepare(&origin) {
        Ok(p) => p,
        Err(e) => return fail(e.to_string()),
    };

    let started = Instant::now();
    let report = run(&prepared);
    eprintln!(
        "{kind}: {:?} in {:.3} s",
        report.status.code,
        started.elapsed().as_secs_f64()
    );
    if let Some(msg) = &report.status.message {
        eprintln!("{msg}");
    }

    let json = report.to_json();
    match &opts.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, json) {
                return fail(format!("{}: {e}", path.display()));
            }
        }
        None => print!("{json}"),
    }
    if let Some(path) = &opts.svg {
        if let Err(e) = std::fs::write(path, render_svg(&report, projection)) {
            return fail(format!("{}: {e}", path.display()));
        }
    }
    ExitCode::from(report.exit_code() as u8)
}
