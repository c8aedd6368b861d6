//! Two-layer shallow-water flows along channels with arbitrary cross-sections.
//!
//! The solver evolves the wet areas and discharges `(A1, Q1, A2, Q2)` of a
//! dense internal layer and a light external layer with a semi-discrete
//! central-upwind scheme. Free-surface elevations rather than areas are
//! reconstructed so that lakes at rest are preserved exactly, interface
//! depths are kept positive, and friction and entrainment enter as cell
//! sources.

pub mod cli;
pub mod diagnostics;
pub mod eigen;
pub mod error;
pub mod flux;
pub mod geometry;
pub mod reconstruction;
pub mod state;
pub mod stepper;

pub use error::{Error, Result};
pub use geometry::{build_channel, ChannelGeometry, Column, ColumnData};
pub use reconstruction::SchemeParams;
pub use state::{DerivedCellState, FlowState, PhysicalParams};
pub use stepper::{BoundaryCondition, BoundaryMode, BoundarySpec, BoundaryValues, Solver, StepReport};
