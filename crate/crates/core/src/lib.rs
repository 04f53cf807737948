//! Equilibria and information design for symmetric Bayesian nonatomic
//! congestion games.
//!
//! The crate models a continuum of cost-minimizing players who distribute
//! over a finite action set, where each action is a subset of resources with
//! state-dependent piecewise-polynomial cost curves. On top of that it
//! provides:
//!
//! - per-state and average-game Wardrop equilibria via conditional-gradient
//!   minimization of the congestion potential ([`solver`]);
//! - verification and linear-programming optimization of Bayes correlated
//!   Wardrop equilibria over a rational flow grid ([`bcwe`]);
//! - synthesis of direct (recommendation-based) information structures that
//!   implement a given correlated equilibrium, with rational approximation
//!   and an explicit suboptimality bound ([`design`]);
//! - the complete-information auxiliary game of a basic game plus an
//!   information structure, with Bayesian Wardrop equilibrium solving,
//!   verification, and outcome projection ([`bwe`]);
//! - full-implementation certificates: multi-start evidence that every
//!   equilibrium of the extended game induces the designed outcome or its
//!   expected social cost ([`certify`]);
//! - JSON document parsing and emission for all of the above ([`io`]).

pub mod bcwe;
pub mod bwe;
pub mod certify;
pub mod curve;
pub mod descent;
pub mod design;
pub mod error;
pub mod fixtures;
pub mod grid;
pub mod io;
pub mod model;
pub mod simplex;
pub mod solver;

pub use curve::PiecewiseCostCurve;
pub use error::{Error, Result};
pub use model::{CongestionGame, ConvexityClass, FiniteOutcome, FlowProfile, OutcomeAtom};
