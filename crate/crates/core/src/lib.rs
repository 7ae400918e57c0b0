//! Event-driven simulation of the spatial Λ-Fleming-Viot process with a
//! dispersal interface at `x₁ = 0`, its coalescing ancestral-lineage dual,
//! exact samplers for the two-speed skew Brownian limit and a finite-difference
//! solver for the interface heat equation.
//!
//! Events centred in `H⁺ = {x₁ > 0}` have radius `r₊`, events centred in
//! `H⁻ = {x₁ < 0}` have radius `r₋ ≤ r₊`. Under diffusive rescaling, lineages
//! converge to skew Brownian motion with
//! `σ±² = u·2r±²/(d+2)` and `β = (r₊² − r₋²)/(r₊² + r₋²)`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dual;
pub mod error;
pub mod event_engine;
pub mod forward;
pub mod geometry;
pub mod harness;
pub mod params;
pub mod pde;
pub mod point;
pub mod profile;
pub mod rng;
pub mod skew;
pub mod stats;

pub use error::{Result, SlfvError};
pub use params::ModelParams;
pub use point::{Point, Side, MAX_DIM};
