//! Exact computation of bagged statistical functionals.
//!
//! A statistic `θ(x_1, …, x_M)` bagged with resample size `M` becomes the
//! functional `θ_M^B(F) = E_F θ(X_1, …, X_M)`. For finitely supported `F`
//! every such expectation is a finite sum, which [`Engine`] evaluates exactly
//! by enumerating multisets of draws. On top of that the crate provides the
//! ANOVA decomposition of `θ` into interaction functions `α_k^M`
//! ([`anova`]), the influence functions and finite von Mises expansion of
//! the bagged functional together with a finite-difference oracle for them
//! ([`vonmises`]), and a seeded Monte Carlo bagging estimate
//! ([`montecarlo`]) as a stochastic cross-check.

pub mod anova;
pub mod engine;
pub mod error;
pub mod format;
pub mod model;
pub mod montecarlo;
pub mod numeric;
pub mod statistics;
pub mod stencil;
pub mod verify;
pub mod vonmises;

pub use anova::{AnovaReport, Decomposition};
pub use engine::{enumerate_compositions, Composition, Engine, DEFAULT_BUDGET};
pub use error::{Error, Result};
pub use model::{make_empirical, realize_mixture, DiscreteDistribution, MixtureSpec, MultisetKey, Point};
pub use montecarlo::{mc_bagged, McEstimate};
pub use statistics::{check_symmetry, evaluate, StatisticSpec};
pub use vonmises::{ExpansionReport, InfluenceQuery, PathCurve, SupersetReport};
