//! Grid solver for the coupled Volterra system linking the six
//! fluctuation functions to the renewal pair `(H_q, H̄_q)`.

pub mod grid;
pub mod march;
pub mod matrix;
pub mod renewal;
pub mod solution;
pub mod spatial;

pub use grid::Grid;
pub use march::Side;
pub use matrix::{assemble_matrix, check_rh_jump, sc_residual};
pub use renewal::RenewalPair;
pub use solution::{
    solve_backward, solve_forward, BackwardSolution, FluctuationGrid, ForwardSolution,
};
pub use spatial::{solve_spatial, SpatialMeasureGrid};
