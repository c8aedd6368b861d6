//! Central-upwind fluxes and the cell source terms.

use crate::eigen::LocalSpeeds;
use crate::reconstruction::InterfaceSide;
use crate::state::PhysicalParams;

/// Flux `(Q1, Q1 u1 + g ŵ2 A1, Q2, Q2 u2 + g w2 A2)` with `Q²/A` taken as `Q u`.
pub fn physical_flux(side: &InterfaceSide, params: &PhysicalParams) -> [f64; 4] {
    let g = params.g;
    [
        side.q1,
        side.q1 * side.u1 + g * side.w2_hat * side.a1,
        side.q2,
        side.q2 * side.u2 + g * side.w2 * side.a2,
    ]
}

/// Central-upwind combination of the two one-sided fluxes.
pub fn numerical_flux(
    f_minus: &[f64; 4],
    f_plus: &[f64; 4],
    w_minus: &[f64; 4],
    w_plus: &[f64; 4],
    speeds: &LocalSpeeds,
) -> [f64; 4] {
    let mut h = [0.0; 4];
    if speeds.is_degenerate() {
        for k in 0..4 {
            h[k] = 0.5 * (f_minus[k] + f_plus[k]);
        }
        return h;
    }
    let (ap, am) = (speeds.a_plus, speeds.a_minus);
    let span = ap - am;
    let diffusion = ap * am / span;
    for k in 0..4 {
        h[k] = (ap * f_minus[k] - am * f_plus[k]) / span + diffusion * (w_plus[k] - w_minus[k]);
    }
    h
}

/// Speed-weighted interface areas `(A1, A2)` used by the pressure-exchange terms.
pub fn interface_areas(minus: &InterfaceSide, plus: &InterfaceSide, speeds: &LocalSpeeds) -> (f64, f64) {
    (speeds.blend(minus.a1, plus.a1), speeds.blend(minus.a2, plus.a2))
}

/// Pressure-exchange sources of a cell bounded by interface areas
/// `left = (A1, A2)_{j-1/2}` and `right = (A1, A2)_{j+1/2}`.
pub fn pressure_exchange_source(
    w2_hat: f64,
    w2: f64,
    left: (f64, f64),
    right: (f64, f64),
    dx: f64,
    params: &PhysicalParams,
) -> (f64, f64) {
    let g = params.g;
    (g * w2_hat * (right.0 - left.0) / dx, g * w2 * (right.1 - left.1) / dx)
}

/// Manning friction `(S_f1, S_f2)` for cell averages with hydraulic radius `radius`.
pub fn friction_source(
    a1: f64,
    q1: f64,
    a2: f64,
    q2: f64,
    u1: f64,
    u2: f64,
    radius: f64,
    params: &PhysicalParams,
    delta_a: f64,
) -> (f64, f64) {
    let total = a1 + a2;
    if !params.friction_active() || total < delta_a.powf(0.25) || !(radius > 0.0) {
        return (0.0, 0.0);
    }
    let g = params.g;
    let phi = (q1 * a1 + q2 * a2) / total;
    let scale = g * phi.abs() / radius.powf(4.0 / 3.0);
    let ni2 = params.n_i * params.n_i;
    let nb2 = params.n_b * params.n_b;
    let s1 = -params.r * ni2 * scale * (u1 - u2) - nb2 * scale * u1;
    let s2 = -ni2 * scale * (u2 - u1);
    (s1, s2)
}

/// Entrainment velocity `V_e = k G²/(G² + 5) u1` (negative `G²` is clamped to zero).
pub fn entrainment_velocity(froude2: f64, u1: f64, params: &PhysicalParams) -> f64 {
    let g2 = froude2.max(0.0);
    if !g2.is_finite() {
        return params.entrain_k * u1;
    }
    params.entrain_k * g2 / (g2 + 5.0) * u1
}

/// External layers thinner than this are not entrained.
pub const ENTRAINMENT_MIN_A2: f64 = 1e-6;

/// Entrainment contributions `(S_e, S_e u1, -r S_e, -r S_e u2)`.
pub fn entrainment_source(
    a1: f64,
    a2: f64,
    u1: f64,
    u2: f64,
    sigma1: f64,
    froude2: f64,
    params: &PhysicalParams,
) -> [f64; 4] {
    if !params.entrainment_active() || a1 <= 0.0 || a2 <= ENTRAINMENT_MIN_A2 || !(sigma1 > 0.0) {
        return [0.0; 4];
    }
    let se = a1 / sigma1 * entrainment_velocity(froude2, u1, params);
    [se, se * u1, -params.r * se, -params.r * se * u2]
}

/// Per-cell source contributions to `d/dt (A1, Q1, A2, Q2)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SourceTerms {
    pub s_a1: Vec<f64>,
    pub s_q1: Vec<f64>,
    pub s_a2: Vec<f64>,
    pub s_q2: Vec<f64>,
}

impl SourceTerms {
    pub fn zeros(n: usize) -> Self {
        Self { s_a1: vec![0.0; n], s_q1: vec![0.0; n], s_a2: vec![0.0; n], s_q2: vec![0.0; n] }
    }

    pub fn add(&mut self, j: usize, s: [f64; 4]) {
        self.s_a1[j] += s[0];
        self.s_q1[j] += s[1];
        self.s_a2[j] += s[2];
        self.s_q2[j] += s[3];
    }

    pub fn cell(&self, j: usize) -> [f64; 4] {
        [self.s_a1[j], self.s_q1[j], self.s_a2[j], self.s_q2[j]]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigen::{eigenvalue_bounds, one_sided_speeds};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn params() -> PhysicalParams {
        PhysicalParams { r: 0.98, ..PhysicalParams::default() }
    }

    fn side(a1: f64, q1: f64, a2: f64, q2: f64, w1: f64, w2: f64) -> InterfaceSide {
        let p = params();
        let u1 = if a1 > 0.0 { q1 / a1 } else { 0.0 };
        let u2 = if a2 > 0.0 { q2 / a2 } else { 0.0 };
        InterfaceSide {
            w1,
            w2,
            a1,
            a2,
            q1,
            q2,
            u1,
            u2,
            h1: w1,
            h2: w2 - w1,
            sigma1: 1.0,
            sigma2: 1.0,
            w2_hat: w1 + p.r * (w2 - w1),
            bounds: eigenvalue_bounds(u1, u2, (p.g * a2).sqrt(), a1, 1.0, 1.0, &p),
        }
    }

    #[test]
    fn physical_flux_examples() {
        let p = params();
        let rest = side(0.4, 0.0, 0.6, 0.0, 0.4, 1.0);
        let f = physical_flux(&rest, &p);
        assert_eq!(f[0], 0.0);
        assert_eq!(f[2], 0.0);
        assert_relative_eq!(f[1], p.g * rest.w2_hat * 0.4, epsilon = 1e-14);
        assert_relative_eq!(f[3], p.g * 1.0 * 0.6, epsilon = 1e-14);

        let riem = side(0.5, 1.25, 0.5, 1.25, 0.5, 1.0);
        let f = physical_flux(&riem, &p);
        assert_eq!(f[0], 1.25);
        assert_relative_eq!(f[1], 3.125 + 9.81 * riem.w2_hat * 0.5, epsilon = 1e-13);

        let dry = InterfaceSide::default();
        assert_eq!(physical_flux(&dry, &p), [0.0; 4]);
    }

    #[test]
    fn numerical_flux_examples() {
        let p = params();
        let l = side(0.5, 1.25, 0.5, 1.25, 0.5, 1.0);
        let r = side(0.55, 1.3, 0.45, 1.1, 0.55, 1.0);
        let (fl, fr) = (physical_flux(&l, &p), physical_flux(&r, &p));
        let s = one_sided_speeds(&l.bounds, &l.bounds);
        let h = numerical_flux(&fl, &fl, &l.conserved(), &l.conserved(), &s);
        for k in 0..4 {
            assert_relative_eq!(h[k], fl[k], epsilon = 1e-13);
        }
        let upwind = LocalSpeeds { a_plus: 3.0, a_minus: 0.0, ..Default::default() };
        assert_eq!(numerical_flux(&fl, &fr, &l.conserved(), &r.conserved(), &upwind), fl);
        let sym = LocalSpeeds { a_plus: 2.0, a_minus: -2.0, ..Default::default() };
        let h = numerical_flux(&fl, &fr, &l.conserved(), &r.conserved(), &sym);
        let (wl, wr) = (l.conserved(), r.conserved());
        for k in 0..4 {
            assert_relative_eq!(h[k], 0.5 * (fl[k] + fr[k]) - (wr[k] - wl[k]), epsilon = 1e-13);
        }
        let still = LocalSpeeds::default();
        let h = numerical_flux(&fl, &fr, &wl, &wr, &still);
        assert_relative_eq!(h[1], 0.5 * (fl[1] + fr[1]), epsilon = 1e-15);
    }

    #[test]
    fn pressure_exchange_examples() {
        let p = params();
        let (s1, s2) = pressure_exchange_source(1.0, 1.2, (0.5, 0.7), (0.5, 0.7), 0.1, &p);
        assert_eq!((s1, s2), (0.0, 0.0));
        // linear A1 with constant ŵ2
        let (s1, _) = pressure_exchange_source(0.9, 1.2, (0.50, 0.7), (0.53, 0.7), 0.01, &p);
        assert_relative_eq!(s1, p.g * 0.9 * 3.0, max_relative = 1e-12);
        // rest: source cancels the flux difference of g ŵ2 A1
        let (l, r) = (side(0.3, 0.0, 0.5, 0.0, 0.3, 0.8), side(0.35, 0.0, 0.45, 0.0, 0.3, 0.8));
        let (fl, fr) = (physical_flux(&l, &p), physical_flux(&r, &p));
        let (sq1, sq2) = pressure_exchange_source(l.w2_hat, 0.8, (l.a1, l.a2), (r.a1, r.a2), 0.25, &p);
        assert_relative_eq!((fr[1] - fl[1]) / 0.25, sq1, max_relative = 1e-14);
        assert_relative_eq!((fr[3] - fl[3]) / 0.25, sq2, max_relative = 1e-14);
    }

    fn friction_params() -> PhysicalParams {
        PhysicalParams { n_i: 0.009, n_b: 0.012, friction_enabled: true, ..params() }
    }

    #[test]
    fn friction_examples() {
        let p = friction_params();
        assert_eq!(friction_source(1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.4, &p, 1e-12), (0.0, 0.0));
        let off = PhysicalParams { n_i: 0.0, n_b: 0.0, ..p };
        assert_eq!(friction_source(1.0, 0.5, 1.0, 0.5, 0.5, 0.5, 0.4, &off, 1e-12), (0.0, 0.0));
        let (u, a1, a2, radius) = (0.7, 0.8, 1.1, 0.35);
        let (s1, s2) = friction_source(a1, u * a1, a2, u * a2, u, u, radius, &p, 1e-12);
        let phi = (u * a1 * a1 + u * a2 * a2) / (a1 + a2);
        assert_relative_eq!(s1, -p.g * p.n_b * p.n_b * phi / radius.powf(4.0 / 3.0) * u, max_relative = 1e-13);
        assert_eq!(s2, 0.0);
        assert_eq!(friction_source(1e-4, 1e-5, 0.0, 0.0, 0.1, 0.0, 1e-4, &p, 1e-12), (0.0, 0.0));
    }

    fn entrain_params() -> PhysicalParams {
        PhysicalParams { entrain_k: 0.1, entrainment_enabled: true, r: 0.95, ..PhysicalParams::default() }
    }

    #[test]
    fn entrainment_examples() {
        let p = entrain_params();
        assert_eq!(entrainment_source(0.0, 1.0, 1.0, 0.0, 1.0, 5.0, &p), [0.0; 4]);
        assert_eq!(entrainment_source(1.0, 1.0, 1.0, 0.0, 1.0, 0.0, &p), [0.0; 4]);
        assert_relative_eq!(entrainment_velocity(5.0, 1.0, &p), 0.05, epsilon = 1e-15);
        let s = entrainment_source(0.7, 1.0, 1.0, 0.2, 0.7, 5.0, &p);
        assert_relative_eq!(s[0], 0.05, epsilon = 1e-15);
        assert_relative_eq!(s[1], 0.05, epsilon = 1e-15);
        assert_relative_eq!(s[2], -0.95 * 0.05, epsilon = 1e-15);
        assert_relative_eq!(s[3], -0.95 * 0.05 * 0.2, epsilon = 1e-15);
        assert_eq!(entrainment_source(0.7, 1e-7, 1.0, 0.2, 0.7, 5.0, &p), [0.0; 4]);
    }

    proptest! {
        #[test]
        fn consistency(a1 in 0.0f64..2.0, a2 in 0.0f64..2.0, u1 in -2.0f64..2.0, u2 in -2.0f64..2.0) {
            let p = params();
            let s = side(a1, a1 * u1, a2, a2 * u2, a1, a1 + a2);
            let f = physical_flux(&s, &p);
            let speeds = one_sided_speeds(&s.bounds, &s.bounds);
            let h = numerical_flux(&f, &f, &s.conserved(), &s.conserved(), &speeds);
            for k in 0..4 {
                prop_assert!((h[k] - f[k]).abs() <= 1e-12 * (1.0 + f[k].abs()));
            }
        }
    }
}
