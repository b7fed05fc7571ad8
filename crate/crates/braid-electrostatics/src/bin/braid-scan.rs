use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use braid_electrostatics::error::{Error, Result};
use braid_electrostatics::scan_cli::*;
use clap::{Parser, Subcommand};

/// Energy scans of two screened, helically charged rods in a braid.
#[derive(Parser)]
#[command(name = "braid-scan", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the energy along the configured sweep axis.
    Sweep { config: PathBuf },
    /// Minimise the total energy over a subset of eta, R, xi_phase.
    Minimize {
        config: PathBuf,
        /// Comma-separated free parameters, e.g. `eta,R`.
        #[arg(long)]
        free: String,
    },
    /// Compare the no-core mode sum with the real-space Yukawa sum.
    Oracle { config: PathBuf },
    /// Dressed surface response curves l = 0..3 against a k_z.
    Fig1 {
        #[arg(long = "a-kappa", default_value_t = 2.0)]
        a_kappa: f64,
        #[arg(long)]
        out: PathBuf,
        /// Grid points on [-10, 10].
        #[arg(long, default_value_t = 401)]
        points: usize,
    },
    /// Print residuals of the Bessel and mode-sum identities.
    Identities,
}

fn main() -> ExitCode {
    match run(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("braid-scan: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Sweep { config } => {
            let cfg = load_config(&config)?;
            let record = run_sweep(&cfg)?;
            let dir = persist_sweep(&cfg, &record)?;
            for p in &record.points {
                println!("{} = {:.10e}  total = {:.10e}", record.parameter, p.value, p.breakdown.total());
            }
            println!("wrote {}", dir.display());
        }
        Command::Minimize { config, free } => {
            let cfg = load_config(&config)?;
            let free = parse_free(&free)?;
            let res = minimize(&cfg, &free)?;
            let dir = persist_minimize(&cfg, &res)?;
            for (p, x) in res.free.iter().zip(&res.argmin) {
                println!("{p} = {x:.10e}");
            }
            println!("total = {:.10e}", res.value);
            println!("iterations = {}, evaluations = {}", res.iterations, res.evaluations);
            if res.flat {
                println!("landscape is flat: energies vary by {:.3e}", res.spread);
            }
            if !res.converged {
                println!("wrote {}", dir.display());
                return Err(Error::NonConvergence(format!(
                    "minimiser stopped after {} iterations; best point reported above",
                    res.iterations
                )));
            }
            println!("wrote {}", dir.display());
        }
        Command::Oracle { config } => {
            let cfg = load_config(&config)?;
            let rows = oracle_comparison(&cfg)?;
            let dir = create_run_dir(&cfg)?;
            fs::write(dir.join("oracle.csv"), oracle_csv(cfg.sweep.parameter, &rows))?;
            let worst = rows.iter().map(|r| r.relative_difference).fold(0.0, f64::max);
            for r in &rows {
                println!(
                    "{} = {:.6e}  modes = {:.10e}  oracle = {:.10e}  rel = {:.3e}",
                    cfg.sweep.parameter, r.value, r.mode_sum, r.oracle, r.relative_difference
                );
            }
            let verdict = if worst <= cfg.oracle.tolerance { "within" } else { "outside" };
            println!("max relative difference {worst:.3e} ({verdict} tolerance {})", cfg.oracle.tolerance);
            println!("wrote {}", dir.display());
        }
        Command::Fig1 { a_kappa, out, points } => {
            let fig = fig1_curves(a_kappa, 10.0, points)?;
            fs::create_dir_all(&out)?;
            fs::write(out.join("fig1.csv"), fig1_csv(&fig))?;
            fs::write(out.join("fig1.dat"), fig1_dat(&fig))?;
            let tail = fig1_curves(a_kappa, 50.0, 2)?;
            for l in 0..4 {
                let centre = braid_electrostatics::surface_response::zeta_surf0(l as i32, 0.0, 1.0, a_kappa);
                println!("l = {l}: zeta(0) = {centre:.12}  zeta(ak_z = 50) = {:.8}", tail.curves[l][1]);
            }
            println!("wrote {}", out.display());
        }
        Command::Identities => {
            let checks = identity_suite()?;
            let mut failed = 0;
            for c in &checks {
                let tag = if c.passed() { "ok  " } else { "FAIL" };
                println!("{tag} {:<52} cases = {:>4}  max residual = {:.3e}", c.name, c.cases, c.max_residual);
                failed += usize::from(!c.passed());
            }
            if failed > 0 {
                return Err(Error::Identity(format!("{failed} identity checks above tolerance")));
            }
        }
    }
    Ok(())
}
