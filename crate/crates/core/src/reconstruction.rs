//! Piecewise-linear reconstruction of interface values.
//!
//! Elevations `w1`, `w2` and discharges are reconstructed with limited
//! slopes; areas follow by integrating the interface width columns, so lakes
//! at rest produce identical values on both sides of every interface.

use crate::eigen::{eigenvalue_bounds, one_sided_speeds, sound_speeds, EigenBounds, LocalSpeeds};
use crate::error::{Error, Result};
use crate::geometry::{ChannelGeometry, Column, GeometryError};
use crate::state::PhysicalParams;

/// Numerical parameters of the scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeParams {
    /// CFL number.
    pub nu: f64,
    /// Minmod parameter in `[1, 2)`.
    pub alpha: f64,
    /// Positivity margin for reconstructed depths.
    pub delta_b: f64,
    /// Velocity regularization threshold.
    pub delta_a: f64,
}

impl Default for SchemeParams {
    fn default() -> Self {
        Self { nu: 0.45, alpha: 1.3, delta_b: 1e-3, delta_a: 1e-12 }
    }
}

impl SchemeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0 && self.nu <= 0.5) {
            return Err(Error::Parameter(format!("CFL number must lie in (0, 0.5], got {}", self.nu)));
        }
        if !(self.alpha >= 1.0 && self.alpha < 2.0) {
            return Err(Error::Parameter(format!("minmod parameter must lie in [1, 2), got {}", self.alpha)));
        }
        if !(self.delta_b > 0.0) || !(self.delta_a > 0.0) {
            return Err(Error::Parameter("positivity and regularization thresholds must be positive".into()));
        }
        Ok(())
    }
}

/// Smallest argument if all are positive, largest if all are negative, else zero.
pub fn minmod(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    if values.iter().all(|&v| v > 0.0) {
        values.iter().copied().fold(f64::INFINITY, f64::min)
    } else if values.iter().all(|&v| v < 0.0) {
        values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    } else {
        0.0
    }
}

/// Limited slopes of the interior entries of `field`, which carries one ghost
/// value on each side. Returns `field.len() - 2` derivatives.
pub fn limited_slopes(field: &[f64], dx: f64, alpha: f64) -> Vec<f64> {
    field
        .windows(3)
        .map(|w| {
            let back = w[1] - w[0];
            let fwd = w[2] - w[1];
            minmod(&[alpha * back, 0.5 * (w[2] - w[0]), alpha * fwd]) / dx
        })
        .collect()
}

/// `u = √2 q a / √(a⁴ + max(a⁴, δ_A))`, equal to `q/a` once `a⁴ ≥ δ_A`.
#[inline]
pub fn regularize_velocity(q: f64, a: f64, delta_a: f64) -> f64 {
    let a4 = a.powi(4);
    if a4 >= delta_a {
        return q / a;
    }
    let den = (a4 + a4.max(delta_a)).sqrt();
    if den == 0.0 {
        0.0
    } else {
        std::f64::consts::SQRT_2 * q * a / den
    }
}

/// Cell values including one ghost cell per side (length `n + 2`).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExtendedCells {
    pub a1: Vec<f64>,
    pub q1: Vec<f64>,
    pub a2: Vec<f64>,
    pub q2: Vec<f64>,
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
}

impl ExtendedCells {
    pub fn len(&self) -> usize {
        self.a1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a1.is_empty()
    }
}

/// Reconstructed values on one side of an interface.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct InterfaceSide {
    pub w1: f64,
    pub w2: f64,
    pub a1: f64,
    pub a2: f64,
    pub q1: f64,
    pub q2: f64,
    pub u1: f64,
    pub u2: f64,
    pub h1: f64,
    pub h2: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub w2_hat: f64,
    pub bounds: EigenBounds,
}

impl InterfaceSide {
    #[inline]
    pub fn conserved(&self) -> [f64; 4] {
        [self.a1, self.q1, self.a2, self.q2]
    }
}

/// Interface `i` separates extended cells `i` and `i + 1`; `minus` is the
/// value from the left cell, `plus` from the right one.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct InterfaceData {
    pub minus: Vec<InterfaceSide>,
    pub plus: Vec<InterfaceSide>,
    pub speeds: Vec<LocalSpeeds>,
    /// Cells where the zero-slope fallback of the positivity correction fired.
    pub fallbacks: usize,
}

impl InterfaceData {
    pub fn len(&self) -> usize {
        self.speeds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.speeds.is_empty()
    }
}

/// Lifts `(left, right)` above the floors while keeping their mean.
/// Returns the corrected pair and whether a fallback was needed: a dry mean
/// puts both edges on their floors, otherwise roundoff is clamped away.
pub fn correct_pair(mean: f64, left: f64, right: f64, floor_l: f64, floor_r: f64, delta_b: f64) -> (f64, f64, bool) {
    let floor_mean = 0.5 * (floor_l + floor_r);
    let margin = delta_b.min(mean - floor_mean).max(0.0);
    let (mut l, mut r) = (left, right);
    if l < floor_l {
        l = floor_l + margin;
        r = 2.0 * mean - l;
    } else if r < floor_r {
        r = floor_r + margin;
        l = 2.0 * mean - r;
    }
    if l < floor_l || r < floor_r {
        if mean <= floor_mean {
            return (floor_l, floor_r, true);
        }
        return (l.max(floor_l), r.max(floor_r), true);
    }
    (l, r, false)
}

#[allow(clippy::too_many_arguments)]
fn side_from_elevations(
    col: Column<'_>,
    base: f64,
    w1: f64,
    w2: f64,
    q1: f64,
    q2: f64,
    params: &PhysicalParams,
    scheme: &SchemeParams,
) -> Result<InterfaceSide> {
    if base > w1 {
        return Err(GeometryError::InvertedBounds { base, top: w1 }.into());
    }
    if w1 > w2 {
        return Err(GeometryError::InvertedBounds { base: w1, top: w2 }.into());
    }
    let below = col.area_below(base)?;
    let (at1, sigma1) = col.area_and_width(w1)?;
    let (at2, sigma2) = col.area_and_width(w2)?;
    let (a1, a2) = ((at1 - below).max(0.0), (at2 - at1).max(0.0));
    side_with_widths(base, w1, w2, a1, a2, q1, q2, sigma1, sigma2, params, scheme)
}

#[allow(clippy::too_many_arguments)]
fn side_from_parts(
    col: Column<'_>,
    base: f64,
    w1: f64,
    w2: f64,
    a1: f64,
    a2: f64,
    q1: f64,
    q2: f64,
    params: &PhysicalParams,
    scheme: &SchemeParams,
) -> Result<InterfaceSide> {
    let sigma1 = col.width_at(w1)?;
    let sigma2 = col.width_at(w2)?;
    side_with_widths(base, w1, w2, a1, a2, q1, q2, sigma1, sigma2, params, scheme)
}

#[allow(clippy::too_many_arguments)]
fn side_with_widths(
    base: f64,
    w1: f64,
    w2: f64,
    a1: f64,
    a2: f64,
    q1: f64,
    q2: f64,
    sigma1: f64,
    sigma2: f64,
    params: &PhysicalParams,
    scheme: &SchemeParams,
) -> Result<InterfaceSide> {
    let u1 = regularize_velocity(q1, a1, scheme.delta_a);
    let u2 = regularize_velocity(q2, a2, scheme.delta_a);
    let (_, c2) = sound_speeds(a1, a2, sigma1, sigma2, params)?;
    let h2 = w2 - w1;
    Ok(InterfaceSide {
        w1,
        w2,
        a1,
        a2,
        q1: a1 * u1,
        q2: a2 * u2,
        u1,
        u2,
        h1: w1 - base,
        h2,
        sigma1,
        sigma2,
        w2_hat: w1 + params.r * h2,
        bounds: eigenvalue_bounds(u1, u2, c2, a1, sigma1, sigma2, params),
    })
}

/// Left and right reconstructed values of every extended cell.
struct Edges {
    left: Vec<f64>,
    right: Vec<f64>,
}

fn linear_edges(field: &[f64], dx: f64, alpha: f64) -> Edges {
    let n_ext = field.len();
    let mut left = field.to_vec();
    let mut right = field.to_vec();
    for (k, s) in limited_slopes(field, dx, alpha).into_iter().enumerate() {
        let half = 0.5 * dx * s;
        left[k + 1] = field[k + 1] - half;
        right[k + 1] = field[k + 1] + half;
    }
    debug_assert_eq!(left.len(), n_ext);
    Edges { left, right }
}

/// Interface indices bounding extended cell `k` in a grid of `n` cells.
#[inline]
fn bounding_interfaces(k: usize, n: usize) -> (usize, usize) {
    (k.saturating_sub(1), k.min(n))
}

/// Interface values, local speeds and positivity corrections for all `n + 1`
/// interfaces of the grid.
pub fn reconstruct_interfaces(
    cells: &ExtendedCells,
    geometry: &ChannelGeometry,
    params: &PhysicalParams,
    scheme: &SchemeParams,
    well_balanced: bool,
) -> Result<InterfaceData> {
    let n = geometry.n_cells();
    if cells.len() != n + 2 {
        return Err(Error::Parameter(format!("expected {} extended cells, got {}", n + 2, cells.len())));
    }
    let dx = geometry.dx();
    let bottoms = geometry.bottom_interface();
    let q1 = linear_edges(&cells.q1, dx, scheme.alpha);
    let q2 = linear_edges(&cells.q2, dx, scheme.alpha);
    let mut fallbacks = 0;

    let mut minus = Vec::with_capacity(n + 1);
    let mut plus = Vec::with_capacity(n + 1);
    if well_balanced {
        let mut w1 = linear_edges(&cells.w1, dx, scheme.alpha);
        let mut w2 = linear_edges(&cells.w2, dx, scheme.alpha);
        for k in 0..n + 2 {
            let (il, ir) = bounding_interfaces(k, n);
            let (l, r, fb) =
                correct_pair(cells.w1[k], w1.left[k], w1.right[k], bottoms[il], bottoms[ir], scheme.delta_b);
            w1.left[k] = l;
            w1.right[k] = r;
            let (l2, r2, fb2) = correct_pair(cells.w2[k], w2.left[k], w2.right[k], l, r, scheme.delta_b);
            w2.left[k] = l2;
            w2.right[k] = r2;
            fallbacks += usize::from(fb) + usize::from(fb2);
        }
        for i in 0..=n {
            let col = geometry.interface_column(i);
            let base = bottoms[i];
            minus.push(side_from_elevations(
                col, base, w1.right[i], w2.right[i], q1.right[i], q2.right[i], params, scheme,
            )?);
            plus.push(side_from_elevations(
                col, base, w1.left[i + 1], w2.left[i + 1], q1.left[i + 1], q2.left[i + 1], params, scheme,
            )?);
        }
    } else {
        let a1 = linear_edges(&cells.a1, dx, scheme.alpha);
        let a2 = linear_edges(&cells.a2, dx, scheme.alpha);
        let side = |i: usize, k: usize, right: bool| -> Result<InterfaceSide> {
            let pick = |e: &Edges| if right { e.right[k] } else { e.left[k] };
            let col = geometry.interface_column(i);
            let base = bottoms[i];
            let (s1, s2) = (pick(&a1).max(0.0), pick(&a2).max(0.0));
            let e1 = col.area_to_elevation(base, s1)?;
            let e2 = col.area_to_elevation(base, s1 + s2)?.max(e1);
            side_from_parts(col, base, e1, e2, s1, s2, pick(&q1), pick(&q2), params, scheme)
        };
        for i in 0..=n {
            minus.push(side(i, i, true)?);
            plus.push(side(i, i + 1, false)?);
        }
    }
    let speeds = minus.iter().zip(&plus).map(|(m, p)| one_sided_speeds(&m.bounds, &p.bounds)).collect();
    Ok(InterfaceData { minus, plus, speeds, fallbacks })
}
