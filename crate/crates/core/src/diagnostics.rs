//! Invariants, entropy, mass totals and error norms of solution snapshots.

use crate::eigen::hyperbolicity_ok;
use crate::error::{Error, Result};
use crate::geometry::ChannelGeometry;
use crate::state::{pressure_terms, DerivedCellState, FlowState, PhysicalParams};

/// Midpoint-rule integral of cell averages.
pub fn total(values: &[f64], dx: f64) -> f64 {
    values.iter().sum::<f64>() * dx
}

pub fn max_abs(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Per-cell `Q1, Q2, E1, E2` with `E1 = ½u1² + g ŵ2` and `E2 = ½u2² + g w2`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SteadyInvariants {
    pub q1: Vec<f64>,
    pub q2: Vec<f64>,
    pub e1: Vec<f64>,
    pub e2: Vec<f64>,
}

pub fn steady_invariants(state: &FlowState, derived: &[DerivedCellState], params: &PhysicalParams) -> SteadyInvariants {
    let g = params.g;
    SteadyInvariants {
        q1: state.q1.clone(),
        q2: state.q2.clone(),
        e1: derived.iter().map(|d| 0.5 * d.u1 * d.u1 + g * (d.w1 + params.r * d.h2)).collect(),
        e2: derived.iter().map(|d| 0.5 * d.u2 * d.u2 + g * d.w2).collect(),
    }
}

/// Per-cell pressures `(p1, p2)`.
pub fn cell_pressures(
    derived: &[DerivedCellState],
    geometry: &ChannelGeometry,
    params: &PhysicalParams,
) -> Result<Vec<(f64, f64)>> {
    derived.iter().enumerate().map(|(j, d)| pressure_terms(d, geometry, params, j)).collect()
}

/// Entropy `𝓔 = (A1 E1 - p1) + r (A2 E2 - p2)` and its flux
/// `u1 (𝓔1 + p1) + r u2 (𝓔2 + p2)` per cell.
pub fn entropy(
    state: &FlowState,
    derived: &[DerivedCellState],
    pressures: &[(f64, f64)],
    params: &PhysicalParams,
) -> (Vec<f64>, Vec<f64>) {
    let inv = steady_invariants(state, derived, params);
    let r = params.r;
    let mut density = Vec::with_capacity(derived.len());
    let mut flux = Vec::with_capacity(derived.len());
    for (j, d) in derived.iter().enumerate() {
        let (p1, p2) = pressures[j];
        let e1 = state.a1[j] * inv.e1[j] - p1;
        let e2 = state.a2[j] * inv.e2[j] - p2;
        density.push(e1 + r * e2);
        flux.push(d.u1 * (e1 + p1) + r * d.u2 * (e2 + p2));
    }
    (density, flux)
}

/// Cells failing the approximate hyperbolicity condition.
pub fn hyperbolicity_map(state: &FlowState, derived: &[DerivedCellState], params: &PhysicalParams) -> Vec<usize> {
    derived
        .iter()
        .enumerate()
        .filter(|(j, d)| !hyperbolicity_ok(d.u1, d.u2, d.c1, d.c2, state.a1[*j], d.sigma1, params))
        .map(|(j, _)| j)
        .collect()
}

/// One row of the diagnostics table.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DiagnosticsRecord {
    pub time: f64,
    pub mass1: f64,
    pub mass2: f64,
    pub max_u1: f64,
    pub max_u2: f64,
    pub max_du: f64,
    pub invariants: SteadyInvariants,
    pub entropy_total: f64,
    pub hyperbolic_loss: Vec<usize>,
}

impl DiagnosticsRecord {
    pub const CSV_HEADER: &'static str =
        "time,mass1,mass2,max_u1,max_u2,max_du,entropy_total,hyperbolic_loss_count";

    pub fn csv_row(&self) -> String {
        format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
            self.time,
            self.mass1,
            self.mass2,
            self.max_u1,
            self.max_u2,
            self.max_du,
            self.entropy_total,
            self.hyperbolic_loss.len()
        )
    }
}

pub fn record(
    state: &FlowState,
    derived: &[DerivedCellState],
    geometry: &ChannelGeometry,
    params: &PhysicalParams,
) -> Result<DiagnosticsRecord> {
    let dx = geometry.dx();
    let pressures = cell_pressures(derived, geometry, params)?;
    let (density, _) = entropy(state, derived, &pressures, params);
    Ok(DiagnosticsRecord {
        time: state.time,
        mass1: total(&state.a1, dx),
        mass2: total(&state.a2, dx),
        max_u1: max_abs(derived.iter().map(|d| d.u1)),
        max_u2: max_abs(derived.iter().map(|d| d.u2)),
        max_du: max_abs(derived.iter().map(|d| d.u2 - d.u1)),
        invariants: steady_invariants(state, derived, params),
        entropy_total: total(&density, dx),
        hyperbolic_loss: hyperbolicity_map(state, derived, params),
    })
}

/// Residual norms of a candidate internal-wave state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct InternalWaveResidual {
    /// Max over cells of the energy relation, relative to `½Q1² + |E1| A1²`.
    pub relation: f64,
    /// `max |w2 - w2_ref|`.
    pub w2_flatness: f64,
    /// `max |Q1 - Q1_ref| / |Q1_ref|`.
    pub q1_spread: f64,
    /// `max |E1 - E1_ref| / |E1_ref|`.
    pub e1_spread: f64,
    pub max_u2: f64,
    /// False when the external layer moves.
    pub internal_wave: bool,
}

/// Velocity below which the external layer counts as still.
pub const STILL_EXTERNAL: f64 = 1e-6;

/// Evaluates `g(1-r) h1 A1² + (g(1-r)B + g r w2 - E1) A1² + ½Q1²` per cell,
/// the energy relation of a flow with constant `Q1`, `E1` and flat `w2`
/// (for unit-width rectangles it is the familiar cubic in `h1`). Cells in
/// `exclude` are skipped.
#[allow(clippy::too_many_arguments)]
pub fn internal_wave_residual(
    state: &FlowState,
    derived: &[DerivedCellState],
    geometry: &ChannelGeometry,
    params: &PhysicalParams,
    e1_ref: f64,
    q1_ref: f64,
    w2_ref: f64,
    exclude: &[usize],
) -> InternalWaveResidual {
    let g = params.g;
    let eps = params.eps();
    let inv = steady_invariants(state, derived, params);
    let mut out = InternalWaveResidual::default();
    for (j, d) in derived.iter().enumerate() {
        out.max_u2 = out.max_u2.max(d.u2.abs());
        if exclude.contains(&j) {
            continue;
        }
        let a1 = state.a1[j];
        let b = geometry.bottom_cell()[j];
        let a1s = a1 * a1;
        let rel = g * eps * d.h1 * a1s + (g * eps * b + g * params.r * d.w2 - e1_ref) * a1s + 0.5 * q1_ref * q1_ref;
        let scale = 0.5 * q1_ref * q1_ref + e1_ref.abs() * a1s;
        if scale > 0.0 {
            out.relation = out.relation.max(rel.abs() / scale);
        }
        out.w2_flatness = out.w2_flatness.max((d.w2 - w2_ref).abs());
        if q1_ref != 0.0 {
            out.q1_spread = out.q1_spread.max((inv.q1[j] - q1_ref).abs() / q1_ref.abs());
        }
        if e1_ref != 0.0 {
            out.e1_spread = out.e1_spread.max((inv.e1[j] - e1_ref).abs() / e1_ref.abs());
        }
    }
    out.internal_wave = out.max_u2 <= STILL_EXTERNAL;
    out
}

/// Total variation of `values` ignoring increments larger than `threshold`.
pub fn jump_filtered_variation(values: &[f64], threshold: f64) -> f64 {
    values
        .windows(2)
        .map(|w| (w[1] - w[0]).abs())
        .filter(|d| *d <= threshold)
        .sum()
}

/// Cell averages of a fine uniform profile over a coarse uniform grid on the
/// same interval, weighting partially covered fine cells by overlap.
pub fn restrict(fine: &[f64], coarse_cells: usize) -> Result<Vec<f64>> {
    let nf = fine.len();
    if nf == 0 || coarse_cells == 0 {
        return Err(Error::Parameter("restriction needs non-empty grids".into()));
    }
    if coarse_cells > nf {
        return Err(Error::Parameter(format!("cannot restrict {nf} cells onto {coarse_cells}")));
    }
    if nf % coarse_cells == 0 {
        let ratio = nf / coarse_cells;
        return Ok(fine.chunks(ratio).map(|c| if ratio == 1 { c[0] } else { c.iter().sum::<f64>() / ratio as f64 }).collect());
    }
    let mut out = vec![0.0; coarse_cells];
    // work in units of 1/(nf * nc) so cell edges are integers
    let (nf_u, nc_u) = (nf as u128, coarse_cells as u128);
    for (c, slot) in out.iter_mut().enumerate() {
        let lo = c as u128 * nf_u;
        let hi = lo + nf_u;
        let mut acc = 0.0;
        let first = (lo / nc_u) as usize;
        let last = (hi.div_ceil(nc_u) as usize).min(nf);
        for (f, &v) in fine.iter().enumerate().take(last).skip(first) {
            let f_lo = f as u128 * nc_u;
            let f_hi = f_lo + nc_u;
            let overlap = hi.min(f_hi).saturating_sub(lo.max(f_lo));
            acc += v * overlap as f64;
        }
        *slot = acc / nf as f64;
    }
    Ok(out)
}

/// `Σ |coarse - restrict(reference)| Δx` over a domain of length `length`.
pub fn l1_error(coarse: &[f64], reference: &[f64], length: f64) -> Result<f64> {
    let restricted = restrict(reference, coarse.len())?;
    let dx = length / coarse.len() as f64;
    Ok(coarse.iter().zip(&restricted).map(|(a, b)| (a - b).abs()).sum::<f64>() * dx)
}

/// L1 errors of several fields at once.
pub fn convergence_norms(coarse: &[&[f64]], reference: &[&[f64]], length: f64) -> Result<Vec<f64>> {
    if coarse.len() != reference.len() {
        return Err(Error::Parameter("field counts differ".into()));
    }
    coarse.iter().zip(reference).map(|(c, r)| l1_error(c, r, length)).collect()
}

/// Locations of jumps: runs of consecutive increments above `threshold` are
/// merged and reported at the interface with the largest increment.
pub fn detect_jumps(x: &[f64], values: &[f64], threshold: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut best: Option<(usize, f64)> = None;
    for (j, w) in values.windows(2).enumerate() {
        let d = (w[1] - w[0]).abs();
        if d > threshold {
            match best {
                Some((_, m)) if m >= d => {}
                _ => best = Some((j, d)),
            }
        } else if let Some((k, _)) = best.take() {
            out.push(0.5 * (x[k] + x[k + 1]));
        }
    }
    if let Some((k, _)) = best {
        out.push(0.5 * (x[k] + x[k + 1]));
    }
    out
}
