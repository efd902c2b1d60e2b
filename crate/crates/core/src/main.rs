use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rydberg_dephasing::cli;
use rydberg_dephasing::config::{RunConfig, SweepSpec};
use rydberg_dephasing::{Error, Result};

#[derive(Parser)]
#[command(
    version,
    about = "Motional dephasing of a driven Rydberg atom near a pinned neighbour"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Propagate one configuration and fit the coherence maxima.
    Simulate(Common),
    /// Print the perturbative dephasing rate; with --out also write the analytic trace.
    Analytic(AnalyticArgs),
    /// Overlay numeric and perturbative coherence traces.
    Compare(Common),
    /// Run a Δ/Ω × ξ/Ω parameter sweep.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Use the 2^17-point production grid.
    #[arg(long)]
    paper_scale: bool,
}

#[derive(Args)]
struct AnalyticArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Worker threads; overrides `workers` in the sweep file.
    #[arg(long)]
    workers: Option<usize>,
}

fn load(common: &Common) -> Result<RunConfig> {
    let cfg = RunConfig::read(&common.config)?;
    Ok(if common.paper_scale {
        cfg.paper_scale()
    } else {
        cfg
    })
}

fn warn(cfg: &RunConfig) {
    for w in cfg.params.validity_warnings(cfg.propagator.t_final) {
        eprintln!("warning: {w}");
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Simulate(c) => {
            let cfg = load(&c)?;
            warn(&cfg);
            let outcome = cli::simulate(&cfg, &c.out)?;
            if outcome.output.degraded {
                eprintln!(
                    "warning: boundary leak {:.3e} exceeds the monitor limit; run flagged degraded",
                    outcome.output.max_boundary_leak
                );
            }
            match &outcome.fit {
                Ok(f) => println!(
                    "gamma_perp={:.6e} r_squared={:.6} exponential_flag={} n_peaks={}",
                    f.gamma_perp, f.r_squared, f.exponential_flag, f.n_peaks
                ),
                Err(e) => println!("fit unavailable: {e}"),
            }
            println!("wrote {}", c.out.display());
        }
        Command::Analytic(a) => {
            let cfg = RunConfig::read(&a.config)?;
            warn(&cfg);
            let gamma = match &a.out {
                Some(dir) => {
                    let (g, _) = cli::write_analytic(&cfg, dir)?;
                    println!("wrote {}", dir.display());
                    g
                }
                None => cli::analytic(&cfg).0,
            };
            println!("gamma_perp={gamma:.6e}");
        }
        Command::Compare(c) => {
            let cfg = load(&c)?;
            warn(&cfg);
            let report = cli::compare(&cfg, &c.out)?;
            println!(
                "max_deviation={:.6e} (re {:.6e}, im {:.6e}) over t <= {}{}",
                report.max_deviation(),
                report.max_dev_re,
                report.max_dev_im,
                report.window,
                if report.resampled {
                    "; analytic trace resampled linearly"
                } else {
                    ""
                }
            );
            println!("wrote {}", c.out.display());
        }
        Command::Sweep(s) => {
            let mut spec = SweepSpec::read(&s.common.config)?;
            if s.common.paper_scale {
                spec.template = spec.template.paper_scale();
            }
            let workers = s.workers.unwrap_or(spec.workers);
            if workers == 0 {
                return Err(Error::Config("--workers must be at least 1".into()));
            }
            let rows = cli::sweep(&spec, &s.common.out, workers)?;
            let failed = rows.iter().filter(|r| r.outcome.is_err()).count();
            println!(
                "{} jobs, {failed} failed; wrote {}",
                rows.len(),
                s.common.out.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 1 })
        }
    }
}
