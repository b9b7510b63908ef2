//! Random walk loop soups on finite graphs.
//!
//! The crate covers the loop measure of a killed random walk, exact
//! characteristic functionals of loop-soup one-form integrals through
//! determinant ratios, their high-intensity Gaussian limits, exact Monte Carlo
//! sampling of soups, winding fields on planar maps, loop holonomies for
//! matrix-valued connections, and the Cauchy limit of Brownian loop-soup
//! windings.
//!
//! Module map:
//!
//! - [`linalg`]: dense complex matrices with pivoted LU, determinants and
//!   log-determinants.
//! - [`graph`]: weighted graphs with killing, transition matrices, Green's
//!   functions and one-forms.
//! - [`loops`]: rooted/unrooted loops, the loop measure, determinant
//!   functionals, Gaussian limit forms and the brute-force enumeration oracle.
//! - [`sampler`]: Poisson loop-soup sampling by Markov bridges.
//! - [`planar`]: planar maps, cuts, winding numbers and the winding kernel.
//! - [`holonomy`]: unitary connections and holonomy expectations.
//! - [`spitzer`]: closed-form Brownian loop-soup winding laws.

pub mod corpus;
pub mod error;
pub mod graph;
pub mod holonomy;
pub mod linalg;
pub mod loops;
pub mod planar;
pub mod sampler;
pub mod spitzer;

pub use error::{Result, SoupError};
pub use graph::{GreensFunction, OneForm, TransitionMatrix, WeightedGraph};
pub use linalg::{ComplexSquareMatrix, LogDet};
pub use loops::{RootedLoop, UnrootedLoop};
pub use num_complex::Complex64;
