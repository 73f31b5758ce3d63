//! Game-theoretic decision making for autonomous vehicles at a single-lane
//! roundabout.
//!
//! Each vehicle repeatedly plays a one-round sequential game with its
//! neighbours over a short horizon, picks the first acceleration of its
//! subgame-perfect strategy, and refines its estimate of every neighbour's
//! aggressiveness from the accelerations it actually observes.
//!
//! ```
//! use roundabout::geometry::{build_roundabout, RoundaboutSpec};
//!
//! let g = build_roundabout(RoundaboutSpec::default()).unwrap();
//! assert_eq!(g.ways(), 4);
//! ```

// `!(x >= 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agent;
pub mod cost;
pub mod dynamics;
pub mod error;
pub mod game;
pub mod geometry;
pub mod sim;
pub mod trace;

use std::fmt;

pub use dynamics::{Acceleration, Configuration};
pub use error::{Error, Result};

/// Identifier of a vehicle within one run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VehicleId(pub u32);

impl fmt::Display for VehicleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

// Guide chapters, compiled so their examples run as doctests.
#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/geometry.md")]
    mod geometry {}
    #[doc = include_str!("../../../book/src/dynamics.md")]
    mod dynamics {}
    #[doc = include_str!("../../../book/src/costs.md")]
    mod costs {}
    #[doc = include_str!("../../../book/src/games.md")]
    mod games {}
    #[doc = include_str!("../../../book/src/agents.md")]
    mod agents {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
}
