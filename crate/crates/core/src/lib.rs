//! Energy-minimizing secure computation offloading over uplink NOMA.
//!
//! `K` users split their computation tasks between local execution and
//! offloading to a base station that decodes them with successive
//! interference cancellation, while a passive eavesdropper listens. The
//! crate minimizes the sum energy subject to per-user secrecy-outage limits
//! with a penalty-dual-decomposition outer loop over a successive convex
//! approximation inner loop, and ships the benchmarks and brute-force /
//! Monte-Carlo oracles used to validate it.
//!
//! The closed-form model ([`model`]) is generic over [`Scalar`]; the
//! optimizer stack and the oracles work in `f64`. The aliases below pin the
//! generic types to `f64`.

pub mod benchmarks;
pub mod error;
pub mod model;
pub mod oracle;
pub mod pair;
pub mod pdd;
pub mod scalar;
pub mod subsolver;
pub mod transform;

pub use error::{Error, Result};
pub use pair::PairMatrix;
pub use scalar::Scalar;

pub type SystemConfig = model::SystemConfig<f64>;
pub type UserParams = model::UserParams<f64>;
pub type ChannelRealization = model::ChannelRealization<f64>;
pub type Allocation = model::Allocation<f64>;
pub type LinkMetrics = model::LinkMetrics<f64>;
pub type EnergyBreakdown = model::EnergyBreakdown<f64>;
pub type FeasibilityReport = model::FeasibilityReport<f64>;
pub type OrderMatrix = PairMatrix<f64>;
