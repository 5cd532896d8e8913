//! Maximum balanced SINR and rate-region boundaries for `n`-user Gaussian
//! interference channels whose transmit powers obey subset-sum constraints
//! `sum_{i in Omega} p_i <= p_Omega`.
//!
//! The solver computes, for a direction `mu >= 0`, the largest `gamma` such
//! that every user reaches SINR `mu_i * gamma`. With one constraint the answer
//! is the inverse Perron root of `diag(mu) A` with `eta / p_Omega` added to the
//! columns in `Omega`; with several it is the minimum over constraints.
//! Time-varying channels with an average-power budget reduce to the same
//! form on a block-diagonal expanded system.
//!
//! ```
//! use sinr_region::{ChannelModel, Direction, PowerConstraint, Solver};
//!
//! let ch = ChannelModel::new(vec![vec![0.6791, 0.0999], vec![0.0411, 0.6864]], vec![0.1, 0.1])?;
//! let total = PowerConstraint::total(1.4, 2)?;
//! let report = Solver::default().multi_constrained_max_sinr(&ch, &Direction::uniform(2)?, &[total])?;
//! assert!(report.gamma_star > 1.0 && !report.unbounded);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod cli;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod random;
pub mod static_region;
pub mod time_varying;
mod tolerances;

pub use model::{
    load_channel_spec, parse_channel_spec, ChannelModel, ChannelSource, ChannelSpec, Direction, ModelError,
    NormalizedGain, PowerConstraint, SpecError, TimeVaryingChannel,
};
pub use static_region::{Binding, BoundaryPoint, Directions, SolveError, SolveReport, Solver, SweepPoint};
pub use time_varying::ExpandedSystem;
pub use tolerances::Tolerances;
