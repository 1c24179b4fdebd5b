//! Random-geometry toolkit.
//!
//! The crate simulates the discrete and continuous sides of the same picture:
//! uniform plane trees and their image quadrangulations under the labeled-tree
//! bijection on the discrete side; Brownian snakes, the map/disk pseudo-metrics
//! built from them, and the growth-fragmentation cascade of boundary sizes on
//! the continuous side. A statistics layer compares the two at desk scale.
//!
//! Everything stochastic takes an explicit 64-bit seed and is bit-reproducible
//! for a fixed seed, independently of thread count (see [`rng`]).

pub mod error;
pub mod growth_frag;
pub mod metric;
pub mod numeric;
pub mod planar_map;
pub mod plane_tree;
pub mod rng;
pub mod snake;
pub mod stats;

pub use error::{BgError, Result};
