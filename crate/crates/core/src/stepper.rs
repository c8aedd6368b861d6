//! Right-hand side assembly, time-step selection and SSP-RK2 integration.

use crate::diagnostics;
use crate::eigen::{composite_froude, eigenvalue_bounds, hyperbolicity_ok};
use crate::error::{Error, Result};
use crate::flux::{
    entrainment_source, entrainment_velocity, friction_source, interface_areas, numerical_flux, physical_flux,
    pressure_exchange_source, SourceTerms, ENTRAINMENT_MIN_A2,
};
use crate::geometry::{hydraulic_radius, ChannelGeometry};
use crate::reconstruction::{reconstruct_interfaces, ExtendedCells, InterfaceData, SchemeParams};
use crate::state::{derive_cell, DerivedCellState, FlowState, PhysicalParams};

/// How a boundary chooses between prescribed and extrapolated ghost values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundaryMode {
    /// Outflow when both layer bounds point out of the domain, inflow otherwise.
    #[default]
    Auto,
    Inflow,
    Outflow,
}

/// Prescribed inflow values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryValues {
    pub w1: f64,
    pub w2: f64,
    pub q1: f64,
    pub q2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BoundaryCondition {
    pub mode: BoundaryMode,
    pub values: Option<BoundaryValues>,
}

impl BoundaryCondition {
    pub fn auto(values: Option<BoundaryValues>) -> Self {
        Self { mode: BoundaryMode::Auto, values }
    }

    pub fn inflow(values: BoundaryValues) -> Self {
        Self { mode: BoundaryMode::Inflow, values: Some(values) }
    }

    pub fn outflow() -> Self {
        Self { mode: BoundaryMode::Outflow, values: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BoundarySpec {
    pub left: BoundaryCondition,
    pub right: BoundaryCondition,
}

impl BoundarySpec {
    pub fn validate(&self, geometry: &ChannelGeometry) -> Result<()> {
        let n = geometry.n_cells();
        for (name, bc, base) in [
            ("left", &self.left, geometry.bottom_interface()[0]),
            ("right", &self.right, geometry.bottom_interface()[n]),
        ] {
            if bc.mode == BoundaryMode::Inflow && bc.values.is_none() {
                return Err(Error::Boundary(format!("{name} inflow boundary needs prescribed values")));
            }
            if let Some(v) = bc.values {
                if !(v.w1 >= base && v.w2 >= v.w1) {
                    return Err(Error::Boundary(format!(
                        "{name} boundary values must satisfy w2 >= w1 >= B = {base} (w1 = {}, w2 = {})",
                        v.w1, v.w2
                    )));
                }
                if !(v.w2 <= geometry.z_top()) {
                    return Err(Error::Boundary(format!("{name} boundary elevation {} above the channel top", v.w2)));
                }
            }
        }
        Ok(())
    }
}

/// Ghost values `(A1, Q1, A2, Q2)` and elevations on each side.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GhostCells {
    pub left: [f64; 4],
    pub right: [f64; 4],
    pub left_w: (f64, f64),
    pub right_w: (f64, f64),
    /// Whether each side was treated as outflow.
    pub outflow: [bool; 2],
}

fn classify(bc: &BoundaryCondition, derived: &DerivedCellState, a1: f64, left: bool, params: &PhysicalParams) -> bool {
    match bc.mode {
        BoundaryMode::Outflow => true,
        BoundaryMode::Inflow => false,
        BoundaryMode::Auto => {
            let b = eigenvalue_bounds(derived.u1, derived.u2, derived.c2, a1, derived.sigma1, derived.sigma2, params);
            let out = if left {
                b.gamma1_minus < 0.0 && b.gamma2_minus < 0.0
            } else {
                b.gamma1_plus > 0.0 && b.gamma2_plus > 0.0
            };
            out || bc.values.is_none()
        }
    }
}

/// Fills one ghost cell per side. Ghost geometry is the boundary interface column.
pub fn apply_boundaries(
    state: &FlowState,
    derived: &[DerivedCellState],
    geometry: &ChannelGeometry,
    spec: &BoundarySpec,
    params: &PhysicalParams,
) -> Result<GhostCells> {
    let n = geometry.n_cells();
    let mut ghosts = GhostCells::default();
    for (side, bc, cell, iface) in [(0usize, &spec.left, 0usize, 0usize), (1, &spec.right, n - 1, n)] {
        let out = classify(bc, &derived[cell], state.a1[cell], side == 0, params);
        let d = &derived[cell];
        let (w1, w2, q1, q2) = if out {
            (d.w1, d.w2, state.q1[cell], state.q2[cell])
        } else {
            let v = bc
                .values
                .ok_or_else(|| Error::Boundary("inflow boundary without prescribed values".into()))?;
            (v.w1, v.w2, v.q1, v.q2)
        };
        let col = geometry.interface_column(iface);
        let base = geometry.bottom_interface()[iface];
        let w1 = w1.max(base);
        let w2 = w2.max(w1);
        let a1 = col.wetted_area(base, w1)?;
        let a2 = col.wetted_area(w1, w2)?;
        let values = [a1, q1, a2, q2];
        if side == 0 {
            ghosts.left = values;
            ghosts.left_w = (w1, w2);
        } else {
            ghosts.right = values;
            ghosts.right_w = (w1, w2);
        }
        ghosts.outflow[side] = out;
    }
    Ok(ghosts)
}

/// Everything produced by one evaluation of the semi-discrete operator.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RhsEvaluation {
    /// `d/dt` of `(A1, Q1, A2, Q2)` per cell.
    pub tendency: [Vec<f64>; 4],
    pub derived: Vec<DerivedCellState>,
    pub cells: ExtendedCells,
    pub interfaces: InterfaceData,
    /// Numerical flux per interface.
    pub fluxes: Vec<[f64; 4]>,
    pub sources: SourceTerms,
    pub ghosts: GhostCells,
    /// Entrainment velocity per cell (zero where inactive).
    pub entrainment_velocity: Vec<f64>,
    /// Hydraulic radius per cell (zero where friction is inactive).
    pub radius: Vec<f64>,
    /// Cells failing the approximate hyperbolicity condition.
    pub hyperbolic_loss: Vec<usize>,
}

impl RhsEvaluation {
    pub fn max_norm(&self) -> f64 {
        self.tendency.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Summary of one time step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepReport {
    pub dt: f64,
    /// Achieved `Δt · max(...)`, at most the requested CFL number.
    pub cfl: f64,
    pub tau_e: f64,
    pub tau_f: f64,
    /// Largest one-sided speed magnitude.
    pub max_speed: f64,
    /// Largest interface-to-average area ratio entering the CFL law.
    pub area_ratio: f64,
    /// Per-layer minimum cell area after the step.
    pub min_area: [f64; 2],
    /// Per-layer minimum reconstructed interface depth over both stages.
    pub min_interface_depth: [f64; 2],
    pub hyperbolic_loss_count: usize,
    /// The denominator of the CFL law vanished and `Δt = ν Δx` was used.
    pub dt_fallback: bool,
    /// Cells left out of the area ratio because they are nearly dry.
    pub skipped_cells: usize,
    pub boundary_outflow: [bool; 2],
    /// Zero-slope fallbacks of the positivity correction over both stages.
    pub correction_fallbacks: usize,
    /// Largest relative mismatch between the interior mass change and the boundary fluxes.
    pub conservation_residual: f64,
    /// Max norm of the right-hand side at the start of the step.
    pub rhs_norm: f64,
    /// Step retries after a second stage lost positivity.
    pub retries: usize,
    /// Roundoff-sized negative areas set to zero.
    pub clamped_cells: usize,
}

/// Semi-discrete solver for one channel configuration.
#[derive(Debug, Clone)]
pub struct Solver {
    pub geometry: ChannelGeometry,
    pub params: PhysicalParams,
    pub scheme: SchemeParams,
    pub boundary: BoundarySpec,
    pub well_balanced: bool,
    /// Treat loss of hyperbolicity as fatal.
    pub strict_hyperbolicity: bool,
    /// Assert per-step mass balance (entrainment off only).
    pub check_conservation: bool,
}

/// Relative tolerance of the per-step mass balance check.
pub const CONSERVATION_TOLERANCE: f64 = 1e-12;

/// Retries of a step before a positivity loss is reported.
pub const MAX_RETRIES: usize = 8;

/// Negative areas above `-ROUNDOFF_AREA · max A` of the layer count as zero.
pub const ROUNDOFF_AREA: f64 = 64.0 * f64::EPSILON;

impl Solver {
    pub fn new(geometry: ChannelGeometry, params: PhysicalParams, scheme: SchemeParams, boundary: BoundarySpec) -> Result<Self> {
        params.validate()?;
        scheme.validate()?;
        boundary.validate(&geometry)?;
        Ok(Self {
            geometry,
            params,
            scheme,
            boundary,
            well_balanced: true,
            strict_hyperbolicity: false,
            check_conservation: false,
        })
    }

    pub fn derive(&self, state: &FlowState) -> Result<Vec<DerivedCellState>> {
        (0..self.geometry.n_cells())
            .map(|j| derive_cell(state, &self.geometry, &self.params, &self.scheme, j))
            .collect()
    }

    fn extend(&self, state: &FlowState, derived: &[DerivedCellState], ghosts: &GhostCells) -> ExtendedCells {
        let n = state.len();
        let mut cells = ExtendedCells::default();
        let push = |cells: &mut ExtendedCells, v: [f64; 4], w: (f64, f64)| {
            cells.a1.push(v[0]);
            cells.q1.push(v[1]);
            cells.a2.push(v[2]);
            cells.q2.push(v[3]);
            cells.w1.push(w.0);
            cells.w2.push(w.1);
        };
        push(&mut cells, ghosts.left, ghosts.left_w);
        for j in 0..n {
            push(&mut cells, state.cell(j), (derived[j].w1, derived[j].w2));
        }
        push(&mut cells, ghosts.right, ghosts.right_w);
        cells
    }

    /// Evaluates `C[W] = -(H_{j+1/2} - H_{j-1/2})/Δx + S_j`.
    pub fn rhs(&self, state: &FlowState) -> Result<RhsEvaluation> {
        let g = &self.geometry;
        let n = g.n_cells();
        state.check_lengths(n)?;
        let p = &self.params;
        let derived = self.derive(state)?;
        let ghosts = apply_boundaries(state, &derived, g, &self.boundary, p)?;
        let cells = self.extend(state, &derived, &ghosts);
        let interfaces = reconstruct_interfaces(&cells, g, p, &self.scheme, self.well_balanced)?;

        let fluxes: Vec<[f64; 4]> = (0..=n)
            .map(|i| {
                let (m, pl) = (&interfaces.minus[i], &interfaces.plus[i]);
                numerical_flux(
                    &physical_flux(m, p),
                    &physical_flux(pl, p),
                    &m.conserved(),
                    &pl.conserved(),
                    &interfaces.speeds[i],
                )
            })
            .collect();
        let areas: Vec<(f64, f64)> = (0..=n)
            .map(|i| interface_areas(&interfaces.minus[i], &interfaces.plus[i], &interfaces.speeds[i]))
            .collect();

        let dx = g.dx();
        let mut sources = SourceTerms::zeros(n);
        let mut ve = vec![0.0; n];
        let mut radius = vec![0.0; n];
        let mut hyperbolic_loss = Vec::new();
        let friction = p.friction_active();
        let entrainment = p.entrainment_active();
        for j in 0..n {
            let d = &derived[j];
            let [a1, q1, a2, q2] = state.cell(j);
            let (s1, s2) = pressure_exchange_source(d.w2_hat, d.w2, areas[j], areas[j + 1], dx, p);
            sources.add(j, [0.0, s1, 0.0, s2]);
            if friction {
                let col = g.cell_column(j);
                let base = g.bottom_cell()[j];
                let perimeter = col.wetted_perimeter(col.width_at(base)?, base, d.w2)?;
                if a1 + a2 > 0.0 {
                    radius[j] = hydraulic_radius(a1 + a2, perimeter)?;
                }
                let (f1, f2) = friction_source(a1, q1, a2, q2, d.u1, d.u2, radius[j], p, self.scheme.delta_a);
                sources.add(j, [0.0, f1, 0.0, f2]);
            }
            if entrainment && a1 > 0.0 && a2 > ENTRAINMENT_MIN_A2 {
                let g2 = composite_froude(d.u1, d.u2, d.c1, d.c2, a1, d.sigma1, p);
                ve[j] = entrainment_velocity(g2, d.u1, p);
                sources.add(j, entrainment_source(a1, a2, d.u1, d.u2, d.sigma1, g2, p));
            }
            if !hyperbolicity_ok(d.u1, d.u2, d.c1, d.c2, a1, d.sigma1, p) {
                hyperbolic_loss.push(j);
            }
        }
        if self.strict_hyperbolicity && !hyperbolic_loss.is_empty() {
            return Err(Error::HyperbolicityLoss { count: hyperbolic_loss.len(), time: state.time });
        }

        let mut tendency = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        for j in 0..n {
            let s = sources.cell(j);
            for k in 0..4 {
                tendency[k][j] = -(fluxes[j + 1][k] - fluxes[j][k]) / dx + s[k];
            }
        }
        Ok(RhsEvaluation {
            tendency,
            derived,
            cells,
            interfaces,
            fluxes,
            sources,
            ghosts,
            entrainment_velocity: ve,
            radius,
            hyperbolic_loss,
        })
    }

    /// Time step from the CFL law for a state whose operator was evaluated as `eval`.
    pub fn compute_dt(&self, state: &FlowState, eval: &RhsEvaluation) -> StepReport {
        let n = state.len();
        let dx = self.geometry.dx();
        let p = &self.params;
        let cutoff = self.scheme.delta_a.powf(0.25);
        let max_speed = eval.interfaces.speeds.iter().fold(0.0f64, |m, s| m.max(s.max_abs()));

        let mut ratio: f64 = 0.0;
        let mut skipped = 0;
        for j in 0..n {
            let (left, right) = (&eval.interfaces.plus[j], &eval.interfaces.minus[j + 1]);
            for (mean, edges) in [(state.a1[j], left.a1 + right.a1), (state.a2[j], left.a2 + right.a2)] {
                if mean < cutoff {
                    skipped += 1;
                } else {
                    ratio = ratio.max(edges / (2.0 * mean));
                }
            }
        }
        if ratio == 0.0 {
            ratio = 1.0;
        }

        let mut tau_e: f64 = 0.0;
        if p.entrainment_active() {
            for j in 0..n {
                let v = eval.entrainment_velocity[j];
                if v != 0.0 {
                    let rate = v / eval.derived[j].sigma1;
                    tau_e = tau_e.min(rate).min(state.a1[j] / state.a2[j] * rate);
                }
            }
        }

        let mut tau_f: f64 = 0.0;
        if p.friction_active() {
            let nmax = p.n_i.max(p.n_b);
            for j in 0..n {
                let total = state.a1[j] + state.a2[j];
                let r = eval.radius[j];
                if total < cutoff || r <= 0.0 {
                    continue;
                }
                let phi = (state.q1[j] * state.a1[j] + state.q2[j] * state.a2[j]) / (total * total);
                tau_f = tau_f.max(phi.abs() / r.powf(4.0 / 3.0));
            }
            tau_f *= p.r * p.g * nmax * nmax;
        }

        let denom = (max_speed / dx * ratio + tau_e).max(5.0 * tau_f);
        let (dt, fallback) = if denom > 0.0 && denom.is_finite() {
            (self.scheme.nu / denom, false)
        } else {
            (dx * self.scheme.nu, true)
        };
        StepReport {
            dt,
            cfl: if fallback { 0.0 } else { self.scheme.nu },
            tau_e,
            tau_f,
            max_speed,
            area_ratio: ratio,
            hyperbolic_loss_count: eval.hyperbolic_loss.len(),
            dt_fallback: fallback,
            skipped_cells: skipped,
            boundary_outflow: eval.ghosts.outflow,
            ..StepReport::default()
        }
    }

    /// Advances one SSP-RK2 step with `Δt = min(CFL step, dt_cap)`. A step
    /// whose second stage loses positivity is retried with the CFL step of the
    /// first stage, or half the step if that is not smaller.
    pub fn step_ssprk2(&self, state: &FlowState, dt_cap: f64) -> Result<(FlowState, StepReport)> {
        let eval0 = self.rhs(state)?;
        let mut report = self.compute_dt(state, &eval0);
        let mut dt = report.dt.min(dt_cap);
        if !(dt > 0.0) {
            return Err(Error::Parameter(format!("non-positive time step {dt}")));
        }
        let denom = if report.dt_fallback { 0.0 } else { self.scheme.nu / report.dt };
        report.rhs_norm = eval0.max_norm();
        let scale = [layer_scale(&state.a1), layer_scale(&state.a2)];

        let (next, eval1) = loop {
            let mut stage1 = state.clone();
            axpy(&mut stage1, dt, &eval0.tendency);
            stage1.time = state.time + dt;
            report.clamped_cells += clamp_roundoff(&mut stage1, scale);
            check_areas(&stage1, 1)?;
            let eval1 = self.rhs(&stage1)?;

            let mut next = stage1.clone();
            axpy(&mut next, dt, &eval1.tendency);
            for (dst, src) in fields_mut(&mut next).into_iter().zip(fields(state)) {
                for (x, &w) in dst.iter_mut().zip(src) {
                    *x = 0.5 * w + 0.5 * *x;
                }
            }
            next.time = state.time + dt;
            report.clamped_cells += clamp_roundoff(&mut next, scale);
            match check_areas(&next, 2) {
                Ok(()) => break (next, eval1),
                Err(e) if report.retries >= MAX_RETRIES => return Err(e),
                Err(_) => {
                    let limit = self.compute_dt(&stage1, &eval1).dt;
                    dt = if limit < dt { limit } else { 0.5 * dt };
                    report.retries += 1;
                }
            }
        };
        report.dt = dt;
        report.cfl = dt * denom;

        report.min_area = [
            next.a1.iter().copied().fold(f64::INFINITY, f64::min),
            next.a2.iter().copied().fold(f64::INFINITY, f64::min),
        ];
        let depth = |data: &InterfaceData, pick: fn(&crate::reconstruction::InterfaceSide) -> f64| {
            data.minus.iter().chain(&data.plus).map(pick).fold(f64::INFINITY, f64::min)
        };
        report.min_interface_depth = [
            depth(&eval0.interfaces, |s| s.h1).min(depth(&eval1.interfaces, |s| s.h1)),
            depth(&eval0.interfaces, |s| s.h2).min(depth(&eval1.interfaces, |s| s.h2)),
        ];
        report.correction_fallbacks = eval0.interfaces.fallbacks + eval1.interfaces.fallbacks;
        report.hyperbolic_loss_count = eval0.hyperbolic_loss.len();

        if !self.params.entrainment_active() {
            let residual = mass_balance_residual(&self.geometry, state, &next, dt, &eval0, &eval1);
            report.conservation_residual = residual.iter().copied().fold(0.0, f64::max);
            if self.check_conservation {
                for (layer, &res) in residual.iter().enumerate() {
                    if res > CONSERVATION_TOLERANCE {
                        return Err(Error::Conservation { layer: layer + 1, change: res, flux: 0.0 });
                    }
                }
            }
        }
        Ok((next, report))
    }
}

/// Relative mismatch per layer between the interior mass change of a step and
/// `-Δt/2 Σ_stages (H_N - H_0)`.
pub fn mass_balance_residual(
    geometry: &ChannelGeometry,
    before: &FlowState,
    after: &FlowState,
    dt: f64,
    eval0: &RhsEvaluation,
    eval1: &RhsEvaluation,
) -> [f64; 2] {
    let n = geometry.n_cells();
    let dx = geometry.dx();
    let mut out = [0.0; 2];
    for (layer, (k, old, new)) in [(0, &before.a1, &after.a1), (2, &before.a2, &after.a2)].into_iter().enumerate() {
        let change = diagnostics::total(new, dx) - diagnostics::total(old, dx);
        let boundary = -0.5
            * dt
            * ((eval0.fluxes[n][k] - eval0.fluxes[0][k]) + (eval1.fluxes[n][k] - eval1.fluxes[0][k]));
        let scale = diagnostics::total(old, dx).abs().max(boundary.abs()).max(f64::MIN_POSITIVE);
        out[layer] = (change - boundary).abs() / scale;
    }
    out
}

fn fields(s: &FlowState) -> [&Vec<f64>; 4] {
    [&s.a1, &s.q1, &s.a2, &s.q2]
}

fn fields_mut(s: &mut FlowState) -> [&mut Vec<f64>; 4] {
    [&mut s.a1, &mut s.q1, &mut s.a2, &mut s.q2]
}

fn axpy(state: &mut FlowState, dt: f64, tendency: &[Vec<f64>; 4]) {
    for (dst, t) in fields_mut(state).into_iter().zip(tendency) {
        for (x, v) in dst.iter_mut().zip(t) {
            *x += dt * v;
        }
    }
}

fn layer_scale(a: &[f64]) -> f64 {
    a.iter().copied().fold(0.0, f64::max)
}

fn clamp_roundoff(state: &mut FlowState, scale: [f64; 2]) -> usize {
    let mut count = 0;
    for (a, s) in [&mut state.a1, &mut state.a2].into_iter().zip(scale) {
        let tol = ROUNDOFF_AREA * s;
        for v in a.iter_mut().filter(|v| **v < 0.0 && **v >= -tol) {
            *v = 0.0;
            count += 1;
        }
    }
    count
}

fn check_areas(state: &FlowState, stage: usize) -> Result<()> {
    for (layer, a) in [(1, &state.a1), (2, &state.a2)] {
        if let Some((cell, &value)) = a.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
            return Err(Error::NegativeArea { layer, cell, stage, value });
        }
    }
    Ok(())
}

/// Two-stage SSP Runge-Kutta update of a plain vector under `rhs`.
pub fn ssprk2(w: &[f64], dt: f64, mut rhs: impl FnMut(&[f64]) -> Result<Vec<f64>>) -> Result<Vec<f64>> {
    let c0 = rhs(w)?;
    let w1: Vec<f64> = w.iter().zip(&c0).map(|(x, c)| x + dt * c).collect();
    let c1 = rhs(&w1)?;
    Ok(w.iter().zip(w1.iter().zip(&c1)).map(|(x, (y, c))| 0.5 * x + 0.5 * (y + dt * c)).collect())
}
