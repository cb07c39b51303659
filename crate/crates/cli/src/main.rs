mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;
use fsfgw::{FsFgwError, Result};
use serde_json::json;

use args::{Cli, Command, RedistrictCommand, SolverArgs, SyntheticCommand};

const EXIT_VALIDATION: u8 = 2;
const EXIT_SOLVER: u8 = 3;

fn solver_args(cmd: &Command) -> &SolverArgs {
    match cmd {
        Command::Solve { solver, .. } | Command::Pairwise { solver, .. } => solver,
        Command::Synthetic(SyntheticCommand::Recover { solver, .. })
        | Command::Synthetic(SyntheticCommand::DeltaSweep { solver, .. })
        | Command::Synthetic(SyntheticCommand::Roc { solver, .. }) => solver,
        Command::Redistrict(RedistrictCommand::Compare { solver, .. })
        | Command::Redistrict(RedistrictCommand::Matrix { solver, .. })
        | Command::Redistrict(RedistrictCommand::Cluster { solver, .. }) => solver,
    }
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Solve { x, y, solver } => commands::solve(x, y, solver),
        Command::Synthetic(SyntheticCommand::Recover { spec, solver }) => commands::synthetic_recover(spec, solver),
        Command::Synthetic(SyntheticCommand::DeltaSweep {
            spec,
            deltas,
            modes,
            reps,
            solver,
        }) => commands::synthetic_delta_sweep(spec, deltas, modes, *reps, solver),
        Command::Synthetic(SyntheticCommand::Roc { spec, fracs, solver }) => commands::synthetic_roc(spec, fracs, solver),
        Command::Pairwise { dir, solver } => commands::pairwise(dir, solver),
        Command::Redistrict(RedistrictCommand::Compare { graph, a, b, solver }) => {
            commands::redistrict_compare(graph, a, b, solver)
        }
        Command::Redistrict(RedistrictCommand::Matrix { graph, plans, solver }) => {
            commands::redistrict_matrix(graph, plans, solver, false)
        }
        Command::Redistrict(RedistrictCommand::Cluster { graph, plans, solver }) => {
            commands::redistrict_matrix(graph, plans, solver, true)
        }
    }
}

fn report(err: &FsFgwError) -> ExitCode {
    let code = if err.is_validation() { EXIT_VALIDATION } else { EXIT_SOLVER };
    let mut body = json!({
        "error": err.kind(),
        "message": err.to_string(),
        "exit_code": code,
    });
    match err {
        FsFgwError::PairFailed { i, j, source } => {
            body["pair"] = json!([i, j]);
            body["cause"] = json!(source.kind());
        }
        FsFgwError::DisconnectedDistrict { district, components } => {
            body["district"] = json!(district);
            body["components"] = json!(components);
        }
        _ => {}
    }
    eprintln!("{body}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("FSFGW_LOG", "warn")).init();
    let cli = Cli::parse();
    let workers = solver_args(&cli.command).workers;
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(workers.unwrap_or(0)).build() {
        Ok(pool) => pool,
        Err(e) => return report(&FsFgwError::InvalidConfig(format!("cannot start {workers:?} workers: {e}"))),
    };
    match pool.install(|| run(&cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(&e),
    }
}
