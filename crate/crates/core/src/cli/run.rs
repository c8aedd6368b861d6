//! Time loop, CSV output, convergence studies and the eigenvalue sweep.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::config::SimulationConfig;
use super::scenario::{build_scenario, Scenario};
use crate::diagnostics::{self, DiagnosticsRecord};
use crate::eigen::{eigen_sweep, SweepPoint};
use crate::error::{Error, Result};
use crate::state::FlowState;
use crate::stepper::{Solver, StepReport};

/// A solution stored at an output time.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub state: FlowState,
}

/// Extremes accumulated over all steps of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunStats {
    pub steps: usize,
    pub min_area: [f64; 2],
    pub min_interface_depth: [f64; 2],
    pub max_conservation_residual: f64,
    pub max_hyperbolic_loss: usize,
    pub dt_fallbacks: usize,
    pub correction_fallbacks: usize,
    pub retries: usize,
    pub clamped_cells: usize,
    /// Max norm of the right-hand side at the start of the last step.
    pub last_rhs_norm: f64,
    pub converged: bool,
    pub last_report: StepReport,
}

impl Default for RunStats {
    fn default() -> Self {
        Self {
            steps: 0,
            min_area: [f64::INFINITY; 2],
            min_interface_depth: [f64::INFINITY; 2],
            max_conservation_residual: 0.0,
            max_hyperbolic_loss: 0,
            dt_fallbacks: 0,
            correction_fallbacks: 0,
            retries: 0,
            clamped_cells: 0,
            last_rhs_norm: f64::NAN,
            converged: false,
            last_report: StepReport::default(),
        }
    }
}

impl RunStats {
    fn absorb(&mut self, report: &StepReport) {
        self.steps += 1;
        for k in 0..2 {
            self.min_area[k] = self.min_area[k].min(report.min_area[k]);
            self.min_interface_depth[k] = self.min_interface_depth[k].min(report.min_interface_depth[k]);
        }
        self.max_conservation_residual = self.max_conservation_residual.max(report.conservation_residual);
        self.max_hyperbolic_loss = self.max_hyperbolic_loss.max(report.hyperbolic_loss_count);
        self.dt_fallbacks += usize::from(report.dt_fallback);
        self.correction_fallbacks += report.correction_fallbacks;
        self.retries += report.retries;
        self.clamped_cells += report.clamped_cells;
        self.last_rhs_norm = report.rhs_norm;
        self.last_report = *report;
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub solver: Solver,
    pub snapshots: Vec<Snapshot>,
    pub diagnostics: Vec<DiagnosticsRecord>,
    pub final_state: FlowState,
    pub stats: RunStats,
}

pub fn make_solver(cfg: &SimulationConfig, scenario: &Scenario) -> Result<Solver> {
    let mut solver = Solver::new(scenario.geometry.clone(), cfg.physics, cfg.scheme, scenario.boundary)?;
    solver.well_balanced = cfg.well_balanced;
    solver.strict_hyperbolicity = cfg.strict_hyperbolicity;
    solver.check_conservation = cfg.check_conservation;
    Ok(solver)
}

/// Runs a configuration, calling `on_step` after every step, and writes CSVs
/// when an output directory is configured.
pub fn run_with(cfg: &SimulationConfig, mut on_step: impl FnMut(&FlowState, &StepReport)) -> Result<RunResult> {
    cfg.validate()?;
    let scenario = build_scenario(cfg)?;
    let solver = make_solver(cfg, &scenario)?;
    let mut writer = match &cfg.output_dir {
        Some(dir) => Some(OutputWriter::new(dir, cfg.scenario.name())?),
        None => None,
    };

    let mut state = scenario.initial.clone();
    let mut stats = RunStats::default();
    let mut snapshots = Vec::new();
    let mut records = Vec::new();
    let mut pending = cfg.output_times.iter().copied().peekable();
    let tol = 1e-12 * cfg.t_end.max(1.0);

    let outcome = (|| -> Result<()> {
        loop {
            while let Some(&t) = pending.peek() {
                if t > state.time + tol {
                    break;
                }
                pending.next();
                emit(&solver, &state, &mut snapshots, &mut records, writer.as_mut())?;
            }
            if state.time >= cfg.t_end - tol || stats.converged {
                break;
            }
            let target = pending.peek().copied().unwrap_or(cfg.t_end).min(cfg.t_end);
            let (next, report) = solver.step_ssprk2(&state, target - state.time)?;
            let mut next = next;
            if (next.time - target).abs() <= tol {
                next.time = target;
            }
            stats.absorb(&report);
            on_step(&next, &report);
            if let Some(steady) = cfg.steady_tol {
                if report.rhs_norm < steady {
                    stats.converged = true;
                }
            }
            state = next;
        }
        if stats.converged && snapshots.last().is_none_or(|s| s.time < state.time) {
            emit(&solver, &state, &mut snapshots, &mut records, writer.as_mut())?;
        }
        Ok(())
    })();
    if let Some(w) = writer.as_mut() {
        w.flush()?;
    }
    outcome?;
    Ok(RunResult { solver, snapshots, diagnostics: records, final_state: state, stats })
}

pub fn run(cfg: &SimulationConfig) -> Result<RunResult> {
    run_with(cfg, |_, _| {})
}

fn emit(
    solver: &Solver,
    state: &FlowState,
    snapshots: &mut Vec<Snapshot>,
    records: &mut Vec<DiagnosticsRecord>,
    writer: Option<&mut OutputWriter>,
) -> Result<()> {
    let derived = solver.derive(state)?;
    let rec = diagnostics::record(state, &derived, &solver.geometry, &solver.params)?;
    if let Some(w) = writer {
        w.snapshot(solver, state)?;
        w.diagnostics(&rec)?;
    }
    snapshots.push(Snapshot { time: state.time, state: state.clone() });
    records.push(rec);
    Ok(())
}

/// Header of the snapshot CSVs.
pub const SNAPSHOT_HEADER: &str = "x,B,w1,w2,h1,h2,u1,u2,Q1,Q2,A1,A2";

pub fn write_snapshot(out: &mut impl Write, solver: &Solver, state: &FlowState) -> Result<()> {
    let derived = solver.derive(state)?;
    let g = &solver.geometry;
    writeln!(out, "{SNAPSHOT_HEADER}")?;
    for (j, d) in derived.iter().enumerate() {
        let row = [
            g.cell_center(j),
            g.bottom_cell()[j],
            d.w1,
            d.w2,
            d.h1,
            d.h2,
            d.u1,
            d.u2,
            state.q1[j],
            state.q2[j],
            state.a1[j],
            state.a2[j],
        ];
        let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

struct OutputWriter {
    dir: PathBuf,
    prefix: String,
    diagnostics: BufWriter<File>,
}

impl OutputWriter {
    fn new(dir: &Path, prefix: &str) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let mut diagnostics = BufWriter::new(File::create(dir.join(format!("{prefix}_diagnostics.csv")))?);
        writeln!(diagnostics, "{}", DiagnosticsRecord::CSV_HEADER)?;
        Ok(Self { dir: dir.to_path_buf(), prefix: prefix.to_string(), diagnostics })
    }

    fn snapshot(&mut self, solver: &Solver, state: &FlowState) -> Result<()> {
        let path = self.dir.join(format!("{}_t{:.6}.csv", self.prefix, state.time));
        let mut out = BufWriter::new(File::create(path)?);
        write_snapshot(&mut out, solver, state)?;
        out.flush()?;
        Ok(())
    }

    fn diagnostics(&mut self, rec: &DiagnosticsRecord) -> Result<()> {
        writeln!(self.diagnostics, "{}", rec.csv_row())?;
        Ok(())
    }

    fn flush(&mut self) -> Result<()> {
        self.diagnostics.flush()?;
        Ok(())
    }
}

/// Per-cell `(w1, w2, u1, u2)` of a state.
pub fn primitive_fields(solver: &Solver, state: &FlowState) -> Result<[Vec<f64>; 4]> {
    let d = solver.derive(state)?;
    Ok([
        d.iter().map(|c| c.w1).collect(),
        d.iter().map(|c| c.w2).collect(),
        d.iter().map(|c| c.u1).collect(),
        d.iter().map(|c| c.u2).collect(),
    ])
}

/// One row of a convergence table.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub cells: usize,
    /// L1 errors of `(w1, w2, u1, u2)`.
    pub errors: [f64; 4],
}

#[derive(Debug, Clone)]
pub struct ConvergenceStudy {
    pub rows: Vec<ConvergenceRow>,
    pub reference: RunResult,
}

/// Runs `cfg` at each resolution and at `reference`, concurrently, and
/// compares the final states.
pub fn convergence_study(cfg: &SimulationConfig, resolutions: &[usize], reference: usize) -> Result<ConvergenceStudy> {
    if resolutions.is_empty() {
        return Err(Error::Usage("convergence study needs at least one resolution".into()));
    }
    if let Some(&bad) = resolutions.iter().find(|&&n| n > reference) {
        return Err(Error::Usage(format!("resolution {bad} is finer than the reference {reference}")));
    }
    let quiet = |n: usize| SimulationConfig { n_cells: n, output_dir: None, ..cfg.clone() };
    let (reference_run, coarse_runs) = std::thread::scope(|s| {
        let handles: Vec<_> = resolutions.iter().map(|&n| {
            let c = quiet(n);
            s.spawn(move || run(&c))
        }).collect();
        let reference_run = run(&quiet(reference));
        let coarse: Vec<Result<RunResult>> =
            handles.into_iter().map(|h| h.join().expect("convergence worker panicked")).collect();
        (reference_run, coarse)
    });
    let reference_run = reference_run?;
    let ref_fields = primitive_fields(&reference_run.solver, &reference_run.final_state)?;
    let length = {
        let x = reference_run.solver.geometry.x_interfaces();
        x[x.len() - 1] - x[0]
    };
    let mut rows = Vec::with_capacity(resolutions.len());
    for (res, &n) in coarse_runs.into_iter().zip(resolutions) {
        let res = res?;
        let fields = primitive_fields(&res.solver, &res.final_state)?;
        let coarse: Vec<&[f64]> = fields.iter().map(Vec::as_slice).collect();
        let fine: Vec<&[f64]> = ref_fields.iter().map(Vec::as_slice).collect();
        let e = diagnostics::convergence_norms(&coarse, &fine, length)?;
        rows.push(ConvergenceRow { cells: n, errors: [e[0], e[1], e[2], e[3]] });
    }
    Ok(ConvergenceStudy { rows, reference: reference_run })
}

pub fn write_convergence(out: &mut impl Write, rows: &[ConvergenceRow]) -> Result<()> {
    writeln!(out, "cells,l1_w1,l1_w2,l1_u1,l1_u2")?;
    for r in rows {
        writeln!(
            out,
            "{},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.cells, r.errors[0], r.errors[1], r.errors[2], r.errors[3]
        )?;
    }
    Ok(())
}

pub const SWEEP_HEADER: &str =
    "eps,root1,root2,root3,root4,int_minus,int_plus,ext_minus,ext_plus,gamma1_minus,gamma1_plus,gamma2_minus,gamma2_plus,max_imag";

pub fn write_sweep(out: &mut impl Write, points: &[SweepPoint]) -> Result<()> {
    writeln!(out, "{SWEEP_HEADER}")?;
    for p in points {
        let max_imag = p.roots.iter().fold(0.0f64, |m, z| m.max(z.im.abs()));
        let vals = [
            p.eps,
            p.roots[0].re,
            p.roots[1].re,
            p.roots[2].re,
            p.roots[3].re,
            p.internal.minus,
            p.internal.plus,
            p.external.0,
            p.external.1,
            p.bounds.gamma1_minus,
            p.bounds.gamma1_plus,
            p.bounds.gamma2_minus,
            p.bounds.gamma2_plus,
            max_imag,
        ];
        let line: Vec<String> = vals.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

pub fn sweep(steps: usize, g: f64) -> Result<Vec<SweepPoint>> {
    eigen_sweep(steps, g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli::config::ScenarioKind;

    #[test]
    fn rest_run_hits_output_times() {
        let cfg = SimulationConfig {
            n_cells: 40,
            perturbation: 0.0,
            output_times: vec![0.0, 0.01, 0.02],
            t_end: 0.02,
            ..SimulationConfig::for_scenario(ScenarioKind::RestPerturbation)
        };
        let res = run(&cfg).unwrap();
        let times: Vec<f64> = res.snapshots.iter().map(|s| s.time).collect();
        assert_eq!(times, vec![0.0, 0.01, 0.02]);
        assert!(res.diagnostics.iter().all(|r| r.max_u1 <= 1e-12 && r.max_u2 <= 1e-12));
    }

    #[test]
    fn convergence_row_for_reference_is_zero() {
        let cfg = SimulationConfig { t_end: 0.01, output_times: vec![0.01], ..SimulationConfig::for_scenario(ScenarioKind::Riemann) };
        let study = convergence_study(&cfg, &[50], 50).unwrap();
        assert_eq!(study.rows[0].errors, [0.0; 4]);
        assert!(convergence_study(&cfg, &[], 50).is_err());
    }

    #[test]
    fn sweep_csv_layout() {
        let pts = sweep(4, 9.81).unwrap();
        let mut buf = Vec::new();
        write_sweep(&mut buf, &pts).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 6);
        assert_eq!(text.lines().nth(1).unwrap().split(',').count(), 14);
    }
}
