use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use iph_schwarz::config::parse_levels;
use iph_schwarz::{run_experiment, write_outputs, BenchError, ExperimentConfig, ExperimentId};

const SCHEMAS: &str = "\
CSV schemas (first line is a '# generated' comment):
  eigc                   level,n,h,n_gamma,sigma_min,sigma_max,half_minus_sigma_max
  two-subdomain-scaling  level,n,h,p_hat,classical_iterations,optimized_iterations,classical_rho,optimized_rho
  four-subdomain         level,n,h,p_hat,n_subdomains,iterations,ratio,rho
  osm-vs-pcg             level,n,h,p_hat,n_u,n_ell,gmres_iterations,pcg_iterations
  convergence-order      level,n,h,l2_error

Config file: one 'key = value' per line, '#' comments. Keys: experiment, domain,
levels, alpha_c, eta, p_hat (ansatz | ansatz(g) | fixed(v)), tol, krylov_tol,
max_iter, seed, perturb, partition, out, gate.<name> = lo, hi.

Exit codes: 0 ok, 1 bad config, 2 gate violation, 3 internal error.";

#[derive(Parser)]
#[command(name = "iph-schwarz", version, about = "IPH Schwarz experiments", after_help = SCHEMAS)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its CSV and summary.
    #[command(after_help = SCHEMAS)]
    Run {
        #[arg(long)]
        experiment: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated cells per side, coarse to fine.
        #[arg(long)]
        levels: Option<String>,
        #[arg(long)]
        alpha_c: Option<f64>,
        #[arg(long)]
        domain: Option<String>,
        /// Exit with code 2 if any acceptance range is violated.
        #[arg(long)]
        gate: bool,
    },
}

fn build_config(cmd: &Command) -> Result<(ExperimentConfig, bool), BenchError> {
    let Command::Run {
        experiment,
        config,
        out,
        seed,
        levels,
        alpha_c,
        domain,
        gate,
    } = cmd;
    let id: ExperimentId = experiment.parse()?;
    let mut cfg = match config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| BenchError::Config(format!("cannot read {}: {e}", path.display())))?;
            ExperimentConfig::parse(&text, Some(id))?
        }
        None => ExperimentConfig::defaults(id),
    };
    if let Some(o) = out {
        cfg.out = o.clone();
    }
    if let Some(s) = seed {
        cfg.seed = *s;
    }
    if let Some(l) = levels {
        cfg.levels = parse_levels(l)?;
    }
    if let Some(c) = alpha_c {
        cfg.alpha_c = *c;
    }
    if let Some(d) = domain {
        cfg.set("domain", d)?;
    }
    cfg.validate()?;
    Ok((cfg, *gate))
}

fn main() -> ExitCode {
    // usage errors are configuration errors; 2 is reserved for gates
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let (cfg, gate) = match build_config(&cli.command) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let result = run_experiment(&cfg).and_then(|out| write_outputs(&cfg, &out).map(|p| (out, p)));
    match result {
        Ok((out, (csv, summary))) => {
            print!("{}", out.summary());
            println!("wrote {} and {}", csv.display(), summary.display());
            let failed = out.failed_gates();
            if gate && !failed.is_empty() {
                for g in failed {
                    eprintln!("gate violated: {} = {} outside [{}, {}]", g.name, g.value, g.lo, g.hi);
                }
                return ExitCode::from(2);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
