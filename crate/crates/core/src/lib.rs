//! Explicit non-asymptotic error bounds for the multivariate normal
//! approximation of maximum likelihood estimators.
//!
//! The library targets models whose MLE can be written through a smooth
//! transform of a mean of per-observation statistics,
//! q(th_hat) = (1/n) sum_i g(x_i). For such models it computes explicit
//! bounds on |E h(W_n) - E h(Z)|, where W_n is the standardized MLE,
//! Z is standard multivariate normal, and h ranges over smooth bounded test
//! functions with declared seminorms. The built-in normal model
//! (unknown mean and variance) ships with exact moment values, a
//! parameter-free closed-form bound, and a seeded simulation harness that
//! reproduces the benchmark table comparing the bound to the empirically
//! measured distance.
//!
//! Organization:
//! - [`matrix`]: small symmetric linear algebra (Jacobi eigensolver,
//!   principal square roots, inverses);
//! - [`model`]: the model contract and the normal model;
//! - [`testfn`]: test functions and the seminorm audit;
//! - [`bound`]: moment sets and the bound assembly;
//! - [`mc`]: the trial harness, E[h(Z)] references and the benchmark table;
//! - [`quad`], [`seed`], [`par`]: quadrature, seed derivation, and
//!   deterministic parallel dispatch.
//!
//! Monte Carlo results are bit-reproducible: trials derive their seeds from
//! (master seed, n, trial index) and reductions run in trial order, so the
//! worker count never changes an output. The `parallel` feature (default on)
//! enables the rayon dispatch; disabling it selects a sequential fallback
//! with identical results.

pub mod bound;
pub mod matrix;
pub mod mc;
pub mod model;
pub mod par;
pub mod quad;
pub mod seed;
pub mod testfn;

pub use bound::{closed_form_normal, general_bound, BoundBreakdown, BoundMode, McConfig};
pub use matrix::{SquareMatrix, SymMatrix};
pub use mc::{table1, SimConfig, SimReport};
pub use model::{ModelSpec, NormalModel, NormalParams};
pub use testfn::TestFunction;
