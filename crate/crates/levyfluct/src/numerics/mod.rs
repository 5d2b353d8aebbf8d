//! Numerical building blocks shared by the closed forms and the solver.

pub mod cmath;
pub mod laplace;
pub mod quadrature;
pub mod roots;
