//! Approximating the log Bethe partition function of binary pairwise Markov
//! random fields to additive accuracy ε.
//!
//! The pipeline bounds the location of all minima of the Bethe free energy
//! in a box, lays a sufficient discretization mesh over that box, and solves
//! the induced multi-label MAP problem. When every pairwise cost table is
//! submodular (always the case for attractive models) the discrete problem
//! is solved exactly with a graph cut and the returned estimate lies in
//! `[log Z_B - ε, log Z_B]`.
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`model`] | input parsing, reparameterization, flipping, components |
//! | [`energy`] | ξ, pairwise terms, Bethe free energy, gradient, Hessian |
//! | [`bounds`] | Bethe box, derivative envelopes, bound propagation |
//! | [`mesh`] | sufficient meshes (uniform, minsum, adaptive, second order) |
//! | [`discrete`] | cost tables, max-flow, graph cut, brute force, local search |
//! | [`exact`] | enumeration, variable elimination, grid and descent oracles, LBP |
//! | [`generate`] | seeded synthetic model generators |
//! | [`pipeline`] | end-to-end solve and reports |

pub mod bounds;
pub mod discrete;
pub mod energy;
mod error;
pub mod exact;
pub mod generate;
pub mod mesh;
pub mod model;
pub mod pipeline;

pub use error::{Error, Result};
pub use model::{InputModel, Model};
