//! Numerical machinery for rates of convergence in the multivariate weak
//! invariance principle.
//!
//! - [`rates`]: closed-form exponents κ(γ, r), the optimal block
//!   exponents and the Prokhorov conversion, in exact arithmetic.
//! - [`dynamics`]: LSV, intermittent baker and doubling maps, observables
//!   and seeded orbit ensembles.
//! - [`paths`]: Birkhoff sums, the processes `W_n`, sup-norm geometry and
//!   covariance estimation.
//! - [`blocks`]: big-block / small-block decompositions and the
//!   independent-block surrogate.
//! - [`transport`]: empirical Wasserstein distances on path space.
//! - [`gaussian`]: Brownian and iid partial-sum comparison ensembles.
//!
//! Data-parallel loops run on rayon when the `parallel` feature is on
//! (the default); see [`exec::Exec`].

pub mod blocks;
pub mod dynamics;
pub mod error;
pub mod exec;
pub mod gaussian;
pub mod io;
pub mod numeric;
pub mod paths;
pub mod rates;
pub mod transport;

pub use error::{Error, Result};
pub use exec::Exec;
