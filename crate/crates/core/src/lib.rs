//! Constrained polynomial approximation of boundary data on circle arcs.
//!
//! Given samples of a function `f` on a union of arcs `I` of the unit
//! circle, find the polynomial `g` of degree `n` closest to `f` in `L²(I)`
//! subject to `|g| <= ρ` on a grid of the complementary arcs `J`. The
//! problem is solved through its Lagrangian dual and the result is checked
//! against the first-order optimality conditions.

pub mod arcgeom;
pub mod certifier;
pub mod cli;
pub mod config;
pub mod dualsolver;
pub mod ingest;
pub mod instance;
pub mod linalg;
pub mod moments;
pub mod output;
pub mod sweep;
