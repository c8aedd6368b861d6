//! Command-line front end: `run`, `sweep-eigen` and `converge`.

pub mod config;
pub mod run;
pub mod scenario;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
pub use config::{load_config, load_config_str, Overrides, ScenarioKind, SimulationConfig};
pub use run::{convergence_study, run, run_with, RunResult, RunStats, Snapshot};
pub use scenario::{build_scenario, Scenario};

#[derive(Debug, Parser)]
#[command(name = "twolayer", version, about = "Two-layer shallow-water flows in channels of arbitrary cross-section")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario and write snapshot and diagnostics CSVs.
    Run(RunArgs),
    /// Tabulate exact and approximate wave speeds over the density-ratio sweep.
    SweepEigen {
        #[arg(long, default_value_t = 10)]
        steps: usize,
        #[arg(long, default_value = ".")]
        output: PathBuf,
    },
    /// Self-convergence study against a fine reference run.
    Converge {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated cell counts.
        #[arg(long, value_delimiter = ',', required = true)]
        resolutions: Vec<usize>,
        #[arg(long)]
        reference: usize,
    },
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub scenario: Option<String>,
    #[arg(long)]
    pub cells: Option<usize>,
    #[arg(long)]
    pub cfl: Option<f64>,
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub no_well_balance: bool,
    #[arg(long)]
    pub no_friction: bool,
    #[arg(long)]
    pub no_entrainment: bool,
}

impl RunArgs {
    pub fn to_config(&self) -> Result<SimulationConfig> {
        let overrides = Overrides {
            scenario: self.scenario.as_deref().map(str::parse).transpose()?,
            n_cells: self.cells,
            nu: self.cfl,
            t_end: self.t_end,
            output_dir: self.output.clone(),
            no_well_balance: self.no_well_balance,
            no_friction: self.no_friction,
            no_entrainment: self.no_entrainment,
        };
        load_config(self.config.as_deref(), &overrides)
    }
}

/// Executes a parsed command, printing a short summary to `out`.
pub fn execute(cli: &Cli, out: &mut impl Write) -> Result<()> {
    match &cli.command {
        Command::Run(args) => {
            let cfg = args.to_config()?;
            let res = run(&cfg)?;
            let s = &res.stats;
            let r = &s.last_report;
            writeln!(out, "scenario {} cells {} t {:.6e} steps {}", cfg.scenario, cfg.n_cells, res.final_state.time, s.steps)?;
            writeln!(
                out,
                "last dt {:.6e} cfl {:.4} tau_e {:.3e} tau_f {:.3e} min area {:.3e} {:.3e} hyperbolicity losses {}",
                r.dt, r.cfl, r.tau_e, r.tau_f, s.min_area[0], s.min_area[1], s.max_hyperbolic_loss
            )?;
            if cfg.steady_tol.is_some() {
                writeln!(out, "rhs norm {:.3e} converged {}", s.last_rhs_norm, s.converged)?;
            }
        }
        Command::SweepEigen { steps, output } => {
            let points = run::sweep(*steps, crate::state::PhysicalParams::default().g)?;
            fs::create_dir_all(output)?;
            let path = output.join("eigen_sweep.csv");
            let mut w = BufWriter::new(File::create(&path)?);
            run::write_sweep(&mut w, &points)?;
            w.flush()?;
            writeln!(out, "wrote {} rows to {}", points.len(), path.display())?;
        }
        Command::Converge { run: args, resolutions, reference } => {
            let cfg = args.to_config()?;
            let study = convergence_study(&cfg, resolutions, *reference)?;
            let dir = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("."));
            fs::create_dir_all(&dir)?;
            let path = dir.join(format!("{}_convergence.csv", cfg.scenario));
            let mut w = BufWriter::new(File::create(&path)?);
            run::write_convergence(&mut w, &study.rows)?;
            w.flush()?;
            run::write_convergence(out, &study.rows)?;
        }
    }
    Ok(())
}

/// Maps errors onto process exit codes.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Usage(_) | Error::Config { .. } | Error::UnknownScenario(_) | Error::Parameter(_) => 2,
        _ => 1,
    }
}
