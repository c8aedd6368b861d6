//! Built-in test problems.

use std::f64::consts::PI;

use super::config::{ScenarioKind, SimulationConfig};
use crate::error::Result;
use crate::geometry::{build_channel, ChannelGeometry};
use crate::state::FlowState;
use crate::stepper::{BoundaryCondition, BoundarySpec, BoundaryValues};

/// Geometry, initial state and boundaries of a run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub geometry: ChannelGeometry,
    pub initial: FlowState,
    pub boundary: BoundarySpec,
}

/// Highest elevation of the width tables of the built-in channels.
const Z_TOP: f64 = 2.5;

pub fn riemann_width(_x: f64, _z: f64) -> f64 {
    1.0
}

pub fn rest_width(x: f64, z: f64) -> f64 {
    let z = z.max(0.0);
    if (0.4..0.8).contains(&x) {
        0.5 + 0.5 * z.sqrt() * (1.0 - 0.25 * (1.0 + (PI * (x - 0.6) / 0.2).cos()))
    } else {
        0.5 * (1.0 + z.sqrt())
    }
}

pub fn rest_bottom(x: f64) -> f64 {
    if x <= 0.15 {
        0.0
    } else if x < 0.4 {
        0.25 * (1.0 + (4.0 * PI * (x - 0.4)).cos())
    } else {
        0.25
    }
}

/// Bump of the channels shared by the last three problems.
pub fn bump_bottom(x: f64) -> f64 {
    0.3 * (0.5 - 2.0 * (x - 0.75).powi(2)).max(0.0)
}

pub fn bump_width(x: f64, z: f64) -> f64 {
    1.0 - 0.5 * (0.5 - 2.0 * (x - 1.25).powi(2)).max(0.0) + z / 10.0
        - 1.5 * (0.5 - 0.5 * (x - 1.0).powi(2) - (z - 1.5).powi(2)).max(0.0)
}

fn builtin_geometry(cfg: &SimulationConfig) -> Result<ChannelGeometry> {
    let n = cfg.n_cells;
    let g = match cfg.scenario {
        ScenarioKind::Riemann => build_channel(riemann_width, |_| 0.0, (0.0, 1.0), n, cfg.dz, Z_TOP)?,
        ScenarioKind::RestPerturbation => build_channel(rest_width, rest_bottom, (0.0, 1.0), n, cfg.dz, Z_TOP)?,
        ScenarioKind::InternalWave | ScenarioKind::LockExchange | ScenarioKind::GravityCurrent => {
            build_channel(bump_width, bump_bottom, (0.0, 2.0), n, cfg.dz, Z_TOP)?
        }
    };
    Ok(g)
}

fn rest(w1: f64, w2: f64) -> BoundaryValues {
    BoundaryValues { w1, w2, q1: 0.0, q2: 0.0 }
}

/// Builds the scenario selected by `cfg`, reading a tabulated channel when
/// `geometry_file` is set.
pub fn build_scenario(cfg: &SimulationConfig) -> Result<Scenario> {
    let geometry = match &cfg.geometry_file {
        Some(path) => ChannelGeometry::from_table_file(path)?,
        None => builtin_geometry(cfg)?,
    };
    let n = geometry.n_cells();
    let x = geometry.cell_centers();
    let b_cell = geometry.bottom_cell().to_vec();
    let b_left = geometry.bottom_interface()[0];
    let b_right = geometry.bottom_interface()[n];
    let delta_b = cfg.scheme.delta_b;

    let (initial, boundary) = match cfg.scenario {
        ScenarioKind::Riemann => {
            // on a unit-width flat channel areas equal depths
            let left = |j: usize| x[j] <= 0.2;
            let state = FlowState::from_elevations(
                &geometry,
                |j| if left(j) { 0.5 } else { 0.55 },
                |_| 1.0,
                |_, a1, a2| (2.5 * a1, 2.5 * a2),
            )?;
            let boundary = BoundarySpec {
                left: BoundaryCondition::auto(Some(BoundaryValues { w1: 0.5, w2: 1.0, q1: 1.25, q2: 1.25 })),
                right: BoundaryCondition::auto(Some(BoundaryValues { w1: 0.55, w2: 1.0, q1: 1.375, q2: 1.125 })),
            };
            (state, boundary)
        }
        ScenarioKind::RestPerturbation => {
            let amp = cfg.perturbation;
            let state = FlowState::from_elevations(
                &geometry,
                |_| 0.7,
                |j| if (0.1..=0.2).contains(&x[j]) { 1.2 + amp } else { 1.2 },
                |_, _, _| (0.0, 0.0),
            )?;
            let boundary = BoundarySpec {
                left: BoundaryCondition::auto(Some(rest(0.7, 1.2))),
                right: BoundaryCondition::auto(Some(rest(0.7, 1.2))),
            };
            (state, boundary)
        }
        ScenarioKind::InternalWave => {
            let (w1, w2, u1) = (0.9, 1.5, 0.3);
            let state = FlowState::from_elevations(&geometry, |_| w1, |_| w2, |_, a1, _| (u1 * a1, 0.0))?;
            let q_at = |i: usize, base: f64| -> Result<f64> {
                Ok(u1 * geometry.interface_column(i).wetted_area(base, w1.max(base))?)
            };
            let boundary = BoundarySpec {
                left: BoundaryCondition::inflow(BoundaryValues { w1, w2, q1: q_at(0, b_left)?, q2: 0.0 }),
                right: BoundaryCondition::auto(Some(BoundaryValues { w1, w2, q1: q_at(n, b_right)?, q2: 0.0 })),
            };
            (state, boundary)
        }
        ScenarioKind::LockExchange => {
            let left = |j: usize| x[j] <= 0.75;
            let state = FlowState::from_elevations(
                &geometry,
                |j| if left(j) { b_cell[j] + delta_b } else { 1.5 },
                |j| if left(j) { 1.5 } else { 1.5 + delta_b },
                |_, _, _| (0.0, 0.0),
            )?;
            let boundary = BoundarySpec {
                left: BoundaryCondition::auto(Some(rest(b_left + delta_b, 1.5))),
                right: BoundaryCondition::auto(Some(rest(1.5, 1.5 + delta_b))),
            };
            (state, boundary)
        }
        ScenarioKind::GravityCurrent => {
            let state =
                FlowState::from_elevations(&geometry, |j| b_cell[j] + delta_b, |_| 1.5, |_, _, _| (0.0, 0.0))?;
            let boundary = BoundarySpec {
                left: BoundaryCondition::inflow(BoundaryValues { w1: 0.6, w2: 1.5, q1: 0.1, q2: 0.0 }),
                right: BoundaryCondition::auto(Some(rest(b_right + delta_b, 1.5))),
            };
            (state, boundary)
        }
    };
    Ok(Scenario { geometry, initial, boundary })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reconstruction::SchemeParams;
    use crate::state::derive_cell;
    use approx::assert_relative_eq;

    fn cfg(kind: ScenarioKind, n: usize) -> SimulationConfig {
        SimulationConfig { n_cells: n, ..SimulationConfig::for_scenario(kind) }
    }

    #[test]
    fn riemann_initial_states() {
        let c = cfg(ScenarioKind::Riemann, 100);
        let s = build_scenario(&c).unwrap();
        let st = &s.initial;
        assert_relative_eq!(st.a1[0], 0.5, epsilon = 1e-14);
        assert_relative_eq!(st.q1[0], 1.25, epsilon = 1e-14);
        assert_relative_eq!(st.a2[0], 0.5, epsilon = 1e-14);
        assert_relative_eq!(st.q2[0], 1.25, epsilon = 1e-14);
        assert_relative_eq!(st.a1[99], 0.55, epsilon = 1e-14);
        assert_relative_eq!(st.q1[99], 1.375, epsilon = 1e-14);
        assert_relative_eq!(st.a2[99], 0.45, epsilon = 1e-14);
        assert_relative_eq!(st.q2[99], 1.125, epsilon = 1e-14);
        let sp = SchemeParams::default();
        for j in [0, 99] {
            let d = derive_cell(st, &s.geometry, &c.physics, &sp, j).unwrap();
            assert_relative_eq!(d.u1, 2.5, epsilon = 1e-13);
            assert_relative_eq!(d.u2, 2.5, epsilon = 1e-13);
        }
    }

    #[test]
    fn lock_exchange_right_side() {
        let c = cfg(ScenarioKind::LockExchange, 200);
        let s = build_scenario(&c).unwrap();
        let sp = SchemeParams::default();
        let d = derive_cell(&s.initial, &s.geometry, &c.physics, &sp, 199).unwrap();
        assert_relative_eq!(d.w1, 1.5, epsilon = 1e-12);
        assert_relative_eq!(d.w2, 1.5 + 1e-3, epsilon = 1e-12);
        let d = derive_cell(&s.initial, &s.geometry, &c.physics, &sp, 0).unwrap();
        assert_relative_eq!(d.h1, 1e-3, epsilon = 1e-12);
    }

    #[test]
    fn shared_channel_is_valid() {
        for kind in ScenarioKind::ALL {
            let s = build_scenario(&cfg(kind, 50)).unwrap();
            assert_eq!(s.initial.len(), 50);
            assert!(s.boundary.validate(&s.geometry).is_ok());
        }
        assert!(bump_width(1.0, 1.5) > 0.0);
    }

    #[test]
    fn rest_topography_pieces() {
        assert_eq!(rest_bottom(0.1), 0.0);
        assert_relative_eq!(rest_bottom(0.15), 0.0, epsilon = 1e-15);
        assert_relative_eq!(rest_bottom(0.3), 0.25 * (1.0 + (-0.4 * PI).cos()), epsilon = 1e-15);
        assert_eq!(rest_bottom(0.5), 0.25);
        assert_relative_eq!(rest_width(0.6, 1.0), 0.5 + 0.5 * 0.5, epsilon = 1e-15);
        assert_relative_eq!(rest_width(0.2, 4.0), 1.5, epsilon = 1e-15);
    }

    #[test]
    fn perturbation_amplitude() {
        let mut c = cfg(ScenarioKind::RestPerturbation, 100);
        c.perturbation = 0.0;
        let flat = build_scenario(&c).unwrap();
        c.perturbation = 1e-2;
        let bumped = build_scenario(&c).unwrap();
        let sp = SchemeParams::default();
        let d = derive_cell(&bumped.initial, &bumped.geometry, &c.physics, &sp, 15).unwrap();
        assert_relative_eq!(d.w2, 1.21, epsilon = 1e-12);
        assert_eq!(flat.initial.a1, bumped.initial.a1);
    }
}
