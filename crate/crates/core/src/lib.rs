//! Exact solvers for the reverse shortest path problem in unweighted
//! unit-disk graphs.
//!
//! Given points `P`, vertices `s, t` and a hop budget `lambda`, the problem
//! asks for the smallest radius `r*` such that the graph with edges between
//! points at distance `<= r*` contains an s-to-t path with at most `lambda`
//! edges. Equivalently: the minimum bottleneck of any s-t path with at most
//! `lambda` links.
//!
//! The crate provides four solvers that must agree exactly:
//!
//! * [`model::rstar_exact`] — brute force over all pairwise distances,
//!   the ground truth for everything else;
//! * [`pipelines::solve_distsel_binary`] — binary search over distance
//!   ranks with a pluggable selection oracle;
//! * [`pipelines::solve_generic`] — randomized interval shrinking followed
//!   by a bifurcation simulation of the grid BFS decision procedure;
//! * [`pipelines::solve_fast`] — the heavy/light-cell variant: shrinking
//!   restricted to light-pair distances, a contracted-graph BFS producing
//!   banded hop estimates, and a band dynamic program recovering `r*`.
//!
//! All distance arithmetic is carried out on squared values. Generated
//! instances use integer coordinates with |coord| <= 2^20, so every squared
//! distance is an exact integer below 2^43 and comparisons are exact in f64.

pub mod bifurcate;
pub mod contraction;
pub mod decision;
pub mod error;
pub mod geom;
pub mod machine;
pub mod model;
pub mod pipelines;
pub mod recovery;
pub mod selection;
pub mod shrink;

pub use error::{Error, Result};
pub use geom::{sq_dist, Point, SqDist};
pub use model::{CandidateValue, Instance, Interval};
