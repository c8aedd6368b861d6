//! Wave-speed analysis of the two-layer system.
//!
//! The scheme itself only needs the real, always-defined bounds
//! [`eigenvalue_bounds`]. The exact quartic roots, the asymptotic internal and
//! external approximations, the composite Froude number and the
//! hyperbolicity checks serve as diagnostics and test oracles.

use nalgebra::Matrix4;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::state::PhysicalParams;

/// Layer sound speeds `(c1, c2)`:
/// `c2 = sqrt(g A2/σ2)`, `c1 = sqrt(g (r A1/σ2 + ε A1/σ1))`.
pub fn sound_speeds(a1: f64, a2: f64, sigma1: f64, sigma2: f64, params: &PhysicalParams) -> Result<(f64, f64)> {
    let g = params.g;
    let rad2 = g * a2 / sigma2;
    let rad1 = g * (params.r * a1 / sigma2 + params.eps() * a1 / sigma1);
    if rad1 < 0.0 || rad2 < 0.0 || rad1.is_nan() || rad2.is_nan() {
        return Err(Error::Eigen(format!("negative sound-speed radicand ({rad1}, {rad2})")));
    }
    Ok((rad1.sqrt(), rad2.sqrt()))
}

/// Characteristic polynomial of the quasilinear coefficient matrix.
#[allow(clippy::too_many_arguments)]
pub fn char_poly(lambda: f64, u1: f64, u2: f64, c1: f64, c2: f64, a1: f64, sigma2: f64, params: &PhysicalParams) -> f64 {
    let p1 = (lambda - u1).powi(2) - c1 * c1;
    let p2 = (lambda - u2).powi(2) - c2 * c2;
    p1 * p2 - params.r * (params.g * a1 / sigma2) * c2 * c2
}

/// The quasilinear coefficient matrix acting on `(A1, Q1, A2, Q2)`.
pub fn coefficient_matrix(u1: f64, u2: f64, c1: f64, c2: f64, a1: f64, sigma2: f64, params: &PhysicalParams) -> Matrix4<f64> {
    let coupling = params.r * params.g * a1 / sigma2;
    Matrix4::new(
        0.0, 1.0, 0.0, 0.0,
        c1 * c1 - u1 * u1, 2.0 * u1, coupling, 0.0,
        0.0, 0.0, 0.0, 1.0,
        c2 * c2, 0.0, c2 * c2 - u2 * u2, 2.0 * u2,
    )
}

/// The four eigenvalues of the coefficient matrix, sorted by real part.
pub fn eigenvalues_numeric(
    u1: f64,
    u2: f64,
    c1: f64,
    c2: f64,
    a1: f64,
    sigma2: f64,
    params: &PhysicalParams,
) -> Result<[Complex64; 4]> {
    let m = coefficient_matrix(u1, u2, c1, c2, a1, sigma2, params);
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Eigen("non-finite coefficient matrix".into()));
    }
    let eig = m
        .try_schur(1e-15, 10_000)
        .ok_or_else(|| Error::Eigen("Schur decomposition did not converge".into()))?
        .complex_eigenvalues();
    let mut roots = [eig[0], eig[1], eig[2], eig[3]];
    roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    Ok(roots)
}

/// Internal eigenvalue approximation; `valid` is false when the radicand is
/// negative, in which case both values collapse to the convective velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InternalApprox {
    pub minus: f64,
    pub plus: f64,
    pub valid: bool,
}

#[allow(clippy::too_many_arguments)]
pub fn internal_eig_approx(u1: f64, u2: f64, c1: f64, c2: f64, a1: f64, sigma1: f64, params: &PhysicalParams) -> InternalApprox {
    let eps = params.eps();
    let c1s = c1 * c1;
    let c2s = c2 * c2;
    let sum = c1s + c2s;
    if sum <= 0.0 {
        return InternalApprox { minus: 0.5 * (u1 + u2), plus: 0.5 * (u1 + u2), valid: u1 == u2 };
    }
    let u_hat = (c2s * u1 + c1s * u2) / sum;
    let reduced = params.g * a1 / sigma1;
    // ε q c2²/(c1²+c2²) · (1 - c1²/q · Δu²/(ε (c1²+c2²))) expanded to stay finite at ε = 0
    let du2 = (u2 - u1).powi(2);
    let radicand = (eps * reduced * c2s - c1s * c2s * du2 / sum) / sum;
    if radicand >= 0.0 {
        let s = radicand.sqrt();
        InternalApprox { minus: u_hat - s, plus: u_hat + s, valid: true }
    } else {
        InternalApprox { minus: u_hat, plus: u_hat, valid: false }
    }
}

/// External eigenvalue approximation `(λ_ext-, λ_ext+)` including the O(ε) correction.
pub fn external_eig_approx(u1: f64, u2: f64, a1: f64, a2: f64, sigma1: f64, sigma2: f64, params: &PhysicalParams) -> (f64, f64) {
    let g = params.g;
    let total = a1 + a2;
    let u_bar = (a1 * u1 + a2 * u2) / total;
    let c_bar = (g * total / sigma2).sqrt();
    let correction = if c_bar > 0.0 {
        0.5 * params.eps() * (g * a1 / sigma2) / c_bar * (1.0 - (g * a1 / sigma1) / (g * total / sigma2))
    } else {
        0.0
    };
    (u_bar - c_bar + correction, u_bar + c_bar - correction)
}

/// Composite Froude number `G²`; zero when the internal layer is dry or `c2 = 0`.
pub fn composite_froude(u1: f64, u2: f64, c1: f64, c2: f64, a1: f64, sigma1: f64, params: &PhysicalParams) -> f64 {
    if a1 <= 0.0 || c2 <= 0.0 {
        return 0.0;
    }
    let eps = params.eps();
    let reduced = params.g * a1 / sigma1;
    if eps <= 0.0 {
        return if u1 == 0.0 && u2 == 0.0 { 0.0 } else { f64::INFINITY };
    }
    let f1 = u1 * u1 / (eps * reduced);
    let f2 = u2 * u2 / (eps * c2 * c2);
    f1 + (c1 * c1 / reduced) * f2 - eps * f1 * f2
}

/// Approximate hyperbolicity condition `(u2-u1)² ≤ (g A1/σ1)/c1² · ε (c1² + c2²)`.
pub fn hyperbolicity_ok(u1: f64, u2: f64, c1: f64, c2: f64, a1: f64, sigma1: f64, params: &PhysicalParams) -> bool {
    let du2 = (u2 - u1).powi(2);
    if du2 == 0.0 || a1 <= 0.0 || c1 <= 0.0 {
        return true;
    }
    let reduced = params.g * a1 / sigma1;
    du2 * c1 * c1 <= reduced * params.eps() * (c1 * c1 + c2 * c2)
}

/// Exact variant: all roots of the quartic are real up to `1e-9 (1 + |λ|)`.
pub fn hyperbolicity_exact(u1: f64, u2: f64, c1: f64, c2: f64, a1: f64, sigma2: f64, params: &PhysicalParams) -> Result<bool> {
    let roots = eigenvalues_numeric(u1, u2, c1, c2, a1, sigma2, params)?;
    Ok(roots.iter().all(|z| z.im.abs() <= 1e-9 * (1.0 + z.norm())))
}

/// `(γ1-, γ1+, γ2-, γ2+)`, real for every admissible state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EigenBounds {
    pub gamma1_minus: f64,
    pub gamma1_plus: f64,
    pub gamma2_minus: f64,
    pub gamma2_plus: f64,
}

impl EigenBounds {
    pub fn min(&self) -> f64 {
        self.gamma1_minus.min(self.gamma2_minus)
    }

    pub fn max(&self) -> f64 {
        self.gamma1_plus.max(self.gamma2_plus)
    }
}

pub fn eigenvalue_bounds(u1: f64, u2: f64, c2: f64, a1: f64, sigma1: f64, sigma2: f64, params: &PhysicalParams) -> EigenBounds {
    let sr = params.r.sqrt();
    let g = params.g;
    let s1 = (sr * (1.0 + sr) * g * a1 / sigma2 + params.eps() * g * a1 / sigma1).max(0.0).sqrt();
    let s2 = (1.0 + sr).sqrt() * c2;
    EigenBounds {
        gamma1_minus: u1 - s1,
        gamma1_plus: u1 + s1,
        gamma2_minus: u2 - s2,
        gamma2_plus: u2 + s2,
    }
}

/// One-sided local speeds at an interface.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LocalSpeeds {
    pub a_plus: f64,
    pub a_minus: f64,
    pub gamma1_plus: f64,
    pub gamma1_minus: f64,
    pub gamma2_plus: f64,
    pub gamma2_minus: f64,
}

impl LocalSpeeds {
    pub fn max_abs(&self) -> f64 {
        self.a_plus.max(-self.a_minus)
    }

    /// `a+ - a-` below this is treated as a motionless dry interface.
    pub const DEGENERATE: f64 = 1e-14;

    pub fn is_degenerate(&self) -> bool {
        self.a_plus - self.a_minus < Self::DEGENERATE
    }

    /// Speed-weighted interface average `(a+ v- - a- v+)/(a+ - a-)`.
    pub fn blend(&self, minus: f64, plus: f64) -> f64 {
        if self.is_degenerate() {
            0.5 * (minus + plus)
        } else {
            (self.a_plus * minus - self.a_minus * plus) / (self.a_plus - self.a_minus)
        }
    }
}

/// `a+ = max(γ1+, γ2+, 0)` and `a- = min(γ1-, γ2-, 0)` over both sides.
pub fn one_sided_speeds(left: &EigenBounds, right: &EigenBounds) -> LocalSpeeds {
    let gamma1_plus = left.gamma1_plus.max(right.gamma1_plus);
    let gamma2_plus = left.gamma2_plus.max(right.gamma2_plus);
    let gamma1_minus = left.gamma1_minus.min(right.gamma1_minus);
    let gamma2_minus = left.gamma2_minus.min(right.gamma2_minus);
    LocalSpeeds {
        a_plus: gamma1_plus.max(gamma2_plus).max(0.0),
        a_minus: gamma1_minus.min(gamma2_minus).min(0.0),
        gamma1_plus,
        gamma1_minus,
        gamma2_plus,
        gamma2_minus,
    }
}

/// Parameters of the reference sweep: `A1 = 1.5, A2 = 2, u1 = 1, σ1 = 1.4, σ2 = 2`,
/// with `r = 1 - ε` and `u2 = u1 + δ c̄`, `δ = ε`.
#[derive(Debug, Clone, Copy)]
pub struct SweepPoint {
    pub eps: f64,
    pub roots: [Complex64; 4],
    pub internal: InternalApprox,
    pub external: (f64, f64),
    pub bounds: EigenBounds,
}

pub const SWEEP_A1: f64 = 1.5;
pub const SWEEP_A2: f64 = 2.0;
pub const SWEEP_U1: f64 = 1.0;
pub const SWEEP_SIGMA1: f64 = 1.4;
pub const SWEEP_SIGMA2: f64 = 2.0;

pub fn sweep_point(eps: f64, g: f64) -> Result<SweepPoint> {
    let params = PhysicalParams { g, r: 1.0 - eps, ..PhysicalParams::default() };
    let (a1, a2, u1, s1, s2) = (SWEEP_A1, SWEEP_A2, SWEEP_U1, SWEEP_SIGMA1, SWEEP_SIGMA2);
    let c_bar = (g * (a1 + a2) / s2).sqrt();
    let u2 = u1 + eps * c_bar;
    let (c1, c2) = sound_speeds(a1, a2, s1, s2, &params)?;
    Ok(SweepPoint {
        eps,
        roots: eigenvalues_numeric(u1, u2, c1, c2, a1, s2, &params)?,
        internal: internal_eig_approx(u1, u2, c1, c2, a1, s1, &params),
        external: external_eig_approx(u1, u2, a1, a2, s1, s2, &params),
        bounds: eigenvalue_bounds(u1, u2, c2, a1, s1, s2, &params),
    })
}

/// Sweep over `ε = δ ∈ {0, 1/steps · 0.5, …, 0.5}`.
pub fn eigen_sweep(steps: usize, g: f64) -> Result<Vec<SweepPoint>> {
    if steps == 0 {
        return Err(Error::Parameter("sweep needs at least one step".into()));
    }
    (0..=steps).map(|k| sweep_point(0.5 * k as f64 / steps as f64, g)).collect()
}
