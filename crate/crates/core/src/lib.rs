//! Membership and boundary oracles for H-polytopes, reduced to nearest-neighbor
//! search over the polytope's Voronoi site set.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ann;
pub mod bench;
pub mod cli;
pub mod datagen;
pub mod error;
pub mod geom;
pub mod io;
pub mod lp;
pub mod oracle;
pub mod rng;
pub mod sites;

pub use error::{Error, Result};
