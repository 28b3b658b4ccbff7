//! Discretized fractional p-Laplacian with exterior Dirichlet data.
//!
//! The crate assembles the nonlocal energy
//! `∬ K(x, y) |u(x) - u(y)|^p dx dy` of zero-extended grid functions on
//! intervals and masked planar lattices, minimizes the associated Rayleigh
//! quotient to obtain the first eigenpair, and provides checks for the
//! structural properties of that energy (hidden convexity along
//! `p`-geodesics, positivity and uniqueness of the first eigenfunction,
//! truncation inequalities) together with boundedness diagnostics.
//!
//! Pipeline: [`Kernel`] and [`Grid`] → [`assemble`] → [`energy`],
//! [`rayleigh`] → [`minimize_rayleigh`] → [`properties`].

// `!(x > 0.0)` is the NaN-rejecting form of these checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod energy;
pub mod error;
pub mod grid;
pub mod kernel;
pub mod oracle;
pub mod properties;
pub mod rng;
pub mod solver;

pub use assembly::{assemble, assemble_tails, Assembly, AssemblyOptions, Scheme};
pub use energy::{
    apply_operator, energy, form, lp_norm_p, rayleigh, rayleigh_gradient, EnergyValue,
    GridFunction, PowerMap,
};
pub use error::{Error, Result};
pub use grid::{build_grid_1d, build_grid_2d, reflect, Domain, Grid, Mask, Rect};
pub use kernel::{EllipticityReport, Kernel, Multiplier, Point};
pub use oracle::{dense_oracle_p2, OracleResult};
pub use properties::PropertyReport;
pub use solver::{
    minimize_rayleigh, residual, solve_odd, EigenResult, SolveMode, SolveOptions, Symmetrize,
    Termination,
};
