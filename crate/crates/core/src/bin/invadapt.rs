use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use invadapt::harness::{self, compute_eoc, emit_outputs, fmt_opt, execute, read_csv, run_verification, ConvergenceRow, RunConfig};
use invadapt::Error;

#[derive(Parser)]
#[command(name = "invadapt", version, about = "Adaptive finite element runs for a tumour invasion model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a `key = value` config file.
    /// `INVADAPT_<KEY>` environment variables override file entries.
    Run { config: PathBuf },
    /// Convergence orders of a CSV with columns dofs, l2_error, wall_seconds.
    Eoc { csv: PathBuf },
    /// Quick self-checks.
    Verify {
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

fn usage_error(e: &Error) -> bool {
    matches!(e, Error::Config(_) | Error::Parse(_) | Error::Io { .. } | Error::UnknownCase(_))
}

fn fail(e: Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(if usage_error(&e) { 2 } else { 1 })
}

fn run(path: PathBuf) -> ExitCode {
    let text = match std::fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) => return fail(Error::Io { path, source: e }),
    };
    let mut config = match RunConfig::parse(&text) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    if let Err(e) = config.apply_env(std::env::vars()) {
        return fail(e);
    }
    if config.threads > 0 {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(config.threads).build_global();
    }
    let art = match execute(&config) {
        Ok(a) => a,
        Err(e) => return fail(e),
    };
    for r in art.uniform_rows.iter().map(|r| ("uniform", r)).chain(art.rows.iter().map(|r| ("result", r))) {
        println!("{:<8} dofs {:>8}  error {:.6e}  wall {:.2}s", r.0, r.1.dofs, r.1.l2_error, r.1.wall_seconds);
    }
    for r in &art.temporal_rows {
        println!("tau {:<10} error {:.6e}  wall {:.2}s", r.tau, r.l2_error, r.wall_seconds);
    }
    if let Some(eoc) = &art.eoc {
        let pairs: Vec<String> = eoc.pairs.iter().map(|p| fmt_opt(*p)).collect();
        println!("EOC_h pairs [{}], aggregate {}", pairs.join(", "), fmt_opt(eoc.aggregate));
    }
    if !art.temporal_eoc.is_empty() {
        let pairs: Vec<String> = art.temporal_eoc.iter().map(|p| fmt_opt(*p)).collect();
        println!("temporal EOC [{}]", pairs.join(", "));
    }
    match emit_outputs(&config.output_dir, &art) {
        Ok(files) => println!("wrote {} files to {}", files.len(), config.output_dir.display()),
        Err(e) => return fail(e),
    }
    report_checks(&art.checks)
}

fn report_checks(checks: &[harness::Check]) -> ExitCode {
    for c in checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    if checks.iter().all(|c| c.passed) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn eoc(path: PathBuf) -> ExitCode {
    let rows: Vec<ConvergenceRow> = match read_csv(&path) {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    let eoc = match compute_eoc(&rows) {
        Ok(e) => e,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    println!("{:>10} {:>14} {:>10} {:>10}", "dofs", "l2_error", "EOC_h", "EOC_N");
    for (i, r) in rows.iter().enumerate() {
        let p = i.checked_sub(1).and_then(|j| eoc.pairs[j]);
        println!("{:>10} {:>14.6e} {:>10} {:>10}", r.dofs, r.l2_error, fmt_opt(p), fmt_opt(p.map(|v| v / 3.0)));
    }
    println!("aggregate EOC_h {} (EOC_N {})", fmt_opt(eoc.aggregate), fmt_opt(eoc.aggregate.map(|v| v / 3.0)));
    for n in &eoc.notices {
        println!("note: {n}");
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config } => run(config),
        Command::Eoc { csv } => eoc(csv),
        Command::Verify { seed } => match run_verification(seed) {
            Ok(checks) => report_checks(&checks),
            Err(e) => fail(e),
        },
    }
}
