//! Conserved cell averages and the quantities recovered from them.

use crate::eigen::sound_speeds;
use crate::error::{Error, Result};
use crate::geometry::{ChannelGeometry, Column};
use crate::reconstruction::{regularize_velocity, SchemeParams};

/// Physical constants of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    /// Gravity (m/s²).
    pub g: f64,
    /// Density ratio ρ2/ρ1 of the external over the internal layer.
    pub r: f64,
    /// Interface Manning coefficient (s·m^-1/3).
    pub n_i: f64,
    /// Bottom Manning coefficient (s·m^-1/3).
    pub n_b: f64,
    /// Entrainment constant `k` in `V_e = k G²/(G² + 5) u1`.
    pub entrain_k: f64,
    pub friction_enabled: bool,
    pub entrainment_enabled: bool,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        Self {
            g: 9.81,
            r: 0.98,
            n_i: 0.0,
            n_b: 0.0,
            entrain_k: 0.0,
            friction_enabled: false,
            entrainment_enabled: false,
        }
    }
}

impl PhysicalParams {
    pub fn with_ratio(r: f64) -> Self {
        Self { r, ..Self::default() }
    }

    /// `ε = 1 - r`.
    #[inline]
    pub fn eps(&self) -> f64 {
        1.0 - self.r
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.g > 0.0) {
            return Err(Error::Parameter(format!("gravity must be positive, got {}", self.g)));
        }
        if !(self.r > 0.0 && self.r <= 1.0) {
            return Err(Error::Parameter(format!("density ratio must lie in (0, 1], got {}", self.r)));
        }
        if !(self.n_i >= 0.0 && self.n_b >= 0.0) {
            return Err(Error::Parameter("Manning coefficients must be non-negative".into()));
        }
        if !(self.entrain_k >= 0.0) {
            return Err(Error::Parameter(format!("entrainment constant must be non-negative, got {}", self.entrain_k)));
        }
        Ok(())
    }

    pub(crate) fn friction_active(&self) -> bool {
        self.friction_enabled && (self.n_i > 0.0 || self.n_b > 0.0)
    }

    pub(crate) fn entrainment_active(&self) -> bool {
        self.entrainment_enabled && self.entrain_k > 0.0
    }
}

/// Cell averages of `(A1, Q1, A2, Q2)` at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub a1: Vec<f64>,
    pub q1: Vec<f64>,
    pub a2: Vec<f64>,
    pub q2: Vec<f64>,
    pub time: f64,
}

impl FlowState {
    pub fn zeros(n: usize) -> Self {
        Self { a1: vec![0.0; n], q1: vec![0.0; n], a2: vec![0.0; n], q2: vec![0.0; n], time: 0.0 }
    }

    pub fn len(&self) -> usize {
        self.a1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a1.is_empty()
    }

    /// Builds a state from elevations and discharges given per cell, integrating
    /// the cell columns. `w1` is clamped to the cell bottom and `w2` to `w1`.
    pub fn from_elevations(
        geometry: &ChannelGeometry,
        w1: impl Fn(usize) -> f64,
        w2: impl Fn(usize) -> f64,
        discharge: impl Fn(usize, f64, f64) -> (f64, f64),
    ) -> Result<Self> {
        let n = geometry.n_cells();
        let mut state = Self::zeros(n);
        for j in 0..n {
            let col = geometry.cell_column(j);
            let base = geometry.bottom_cell()[j];
            let e1 = w1(j).max(base);
            let e2 = w2(j).max(e1);
            state.a1[j] = col.wetted_area(base, e1)?;
            state.a2[j] = col.wetted_area(e1, e2)?;
            let (q1, q2) = discharge(j, state.a1[j], state.a2[j]);
            state.q1[j] = q1;
            state.q2[j] = q2;
        }
        Ok(state)
    }

    #[inline]
    pub fn cell(&self, j: usize) -> [f64; 4] {
        [self.a1[j], self.q1[j], self.a2[j], self.q2[j]]
    }

    #[inline]
    pub fn set_cell(&mut self, j: usize, w: [f64; 4]) {
        self.a1[j] = w[0];
        self.q1[j] = w[1];
        self.a2[j] = w[2];
        self.q2[j] = w[3];
    }

    pub fn check_lengths(&self, n: usize) -> Result<()> {
        if [self.a1.len(), self.q1.len(), self.a2.len(), self.q2.len()].iter().any(|&l| l != n) {
            return Err(Error::Parameter(format!("state arrays must all have length {n}")));
        }
        Ok(())
    }
}

/// Per-cell recovered elevations, depths, velocities, widths and sound speeds.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DerivedCellState {
    pub w1: f64,
    pub w2: f64,
    /// `B + h1 + r h2`.
    pub w2_hat: f64,
    pub h1: f64,
    pub h2: f64,
    pub u1: f64,
    pub u2: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub c1: f64,
    pub c2: f64,
}

/// Deconvolves the areas of cell `j` into elevations and derived quantities.
pub fn derive_cell(
    state: &FlowState,
    geometry: &ChannelGeometry,
    params: &PhysicalParams,
    scheme: &SchemeParams,
    j: usize,
) -> Result<DerivedCellState> {
    derive_column(
        geometry.cell_column(j),
        geometry.bottom_cell()[j],
        state.cell(j),
        params,
        scheme.delta_a,
    )
}

pub(crate) fn derive_column(
    col: Column<'_>,
    base: f64,
    [a1, q1, a2, q2]: [f64; 4],
    params: &PhysicalParams,
    delta_a: f64,
) -> Result<DerivedCellState> {
    let w1 = col.area_to_elevation(base, a1)?;
    let w2 = col.area_to_elevation(base, a1 + a2)?.max(w1);
    let h1 = w1 - base;
    let h2 = w2 - w1;
    let sigma1 = col.width_at(w1)?;
    let sigma2 = col.width_at(w2)?;
    let (c1, c2) = sound_speeds(a1, a2, sigma1, sigma2, params)?;
    Ok(DerivedCellState {
        w1,
        w2,
        w2_hat: w1 + params.r * h2,
        h1,
        h2,
        u1: regularize_velocity(q1, a1, delta_a),
        u2: regularize_velocity(q2, a2, delta_a),
        sigma1,
        sigma2,
        c1,
        c2,
    })
}

/// Hydrostatic pressures `(p1, p2)` of cell `j`, integrated over its column.
pub fn pressure_terms(
    derived: &DerivedCellState,
    geometry: &ChannelGeometry,
    params: &PhysicalParams,
    j: usize,
) -> Result<(f64, f64)> {
    let col = geometry.cell_column(j);
    let base = geometry.bottom_cell()[j];
    pressures_on_column(col, base, derived, params)
}

pub(crate) fn pressures_on_column(
    col: Column<'_>,
    base: f64,
    d: &DerivedCellState,
    params: &PhysicalParams,
) -> Result<(f64, f64)> {
    let p2 = params.g * col.moment(d.w1, d.w2, d.w2)?;
    let p1 = params.g * col.moment(base, d.w1, d.w1 + params.r * d.h2)?;
    Ok((p1, p2))
}
