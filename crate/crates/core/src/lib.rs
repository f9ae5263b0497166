//! Extremal selections of polytope-valued multifunctions.
//!
//! Given a multifunction `F(t, x) = co{v_1(t, x), ..., v_m(t, x)}` with Lipschitz
//! vertex maps, this crate builds piecewise-Lipschitz selections `f(t, x)` whose
//! values sit on the vertices of `F(t, x)` while the Cauchy problems
//! `x' = f(t, x)` stay well posed and track a prescribed relaxed flow. The same
//! machinery turns a chattering (relaxed) feedback into a bang-bang feedback.
//!
//! Module map:
//! - [`polytope`]: V-represented polytopes, membership, Carathéodory
//!   decomposition, smallest enclosing ball, Hausdorff distance.
//! - [`lp`]: dense two-phase simplex with Bland's rule.
//! - [`variance`]: the maximal-variance functional `h(y, K)` and affine majorants.
//! - [`multimap`]: vertex-map multifunctions and Lipschitz sample paths.
//! - [`extremal`]: cone covers and the strip-splitting selection constructor.
//! - [`flow`]: switching-aware integration, Picard distances, the level
//!   iteration, stability probes and the null homotopy.
//! - [`control`]: bang-bang synthesis from chattering feedback.
//! - [`control`]: bang-bang synthesis from chattering feedback.
//! - [`scenario`] / [`cli`]: JSON scenarios and the command-line front end.
//!
//! [`expr`], [`linalg`], [`quadrature`] and [`selection`] hold the shared plumbing.

// NaN must fall through these guards, so `!(a <= b)` is kept.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod control;
pub mod expr;
pub mod extremal;
pub mod flow;
pub mod linalg;
pub mod lp;
pub mod multimap;
pub mod polytope;
pub mod quadrature;
pub mod scenario;
pub mod selection;
pub mod variance;

mod error;

pub use error::{Error, Result};
pub use extremal::{ConeCell, ConeCover, PiecewiseSelection};
pub use flow::{IterationState, Trajectory};
pub use multimap::{LipschitzPath, StateBox, VertexMultiMap};
pub use polytope::{BarycentricDecomposition, Polytope};
pub use selection::Selection;
pub use variance::{AffineMajorant, HValue};
