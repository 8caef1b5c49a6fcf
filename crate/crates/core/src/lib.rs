//! Pseudo-spectral solver for the rod equation
//! `u_t + γ u u_x = -∂ₓ G∗((3-γ)/2 u² + γ/2 u_x²)` on a periodic box,
//! with wave-breaking and norm-inflation diagnostics.

pub mod error;
pub mod evolution;
pub mod flow_map;
pub mod grid;
pub mod inflation;
pub mod initial_data;
pub mod norms;
pub mod quad;
pub mod riccati;
pub mod spectral;

pub use error::{RodError, RodResult};
pub use evolution::{
    conserved_e, conserved_f, negate_transform, reduce_parameters, rhs, rhs_with, simulate,
    simulate_with_particles, step, BlowupReport, BlowupVerdict, RodModel, RunStatus, Snapshot,
    SolverControls, Trajectory,
};
pub use flow_map::{advance_particles, interpolate, ParticleSet};
pub use grid::{make_grid, Field, Grid, Symmetry};
pub use initial_data::{build_u0, choose_params, plateau_lp, RodParams};
pub use riccati::{blowup_criterion, lifespan_bounds, riccati_bound, sandwich_bounds, LifespanWindow};
