//! Kernel log-rank test of independence between right-censored survival
//! times and (possibly multivariate) covariates.
//!
//! The statistic is the squared RKHS norm of the difference between the
//! embedded event measure and the embedded risk-weighted measure, equal to
//! the supremum of weighted log-rank statistics over the unit ball of the
//! RKHS. It is computed in O(n²) from a product kernel, and calibrated by a
//! Wild Bootstrap with Rademacher multipliers.
//!
//! Modules follow the pipeline: [`data`] ingests and canonicalizes datasets,
//! [`kernels`] builds Gram matrices, [`statistic`] evaluates Ψ²ₙ and the
//! classical survival primitives, [`bootstrap`] runs the calibrated test, and
//! [`simulate`] generates synthetic scenarios and Monte Carlo rejection
//! studies.
//!
//! ```
//! use kernel_logrank::{canonicalize, run_test, BootstrapConfig, KernelSpec};
//! use ndarray::array;
//!
//! let times = [2.0, 1.0, 3.0, 2.5];
//! let events = [true, false, true, true];
//! let covariates = array![[0.5], [-0.3], [1.1], [0.2]];
//! let ds = canonicalize(&times, &events, &covariates)?;
//! let spec = KernelSpec::from_label("gaugau")?;
//! let cfg = BootstrapConfig { m_replicates: 199, alpha: 0.05, seed: 7 };
//! let result = run_test(&ds, &spec, &cfg)?;
//! assert!(result.statistic >= 0.0);
//! assert_eq!(result.reject, result.statistic > result.quantile);
//! # Ok::<(), kernel_logrank::Error>(())
//! ```

pub mod bootstrap;
pub mod data;
pub mod error;
pub mod kernels;
mod rng;
pub mod simulate;
pub mod statistic;

pub use bootstrap::{run_test, BootstrapConfig, TestResult};
pub use data::{canonicalize, load_csv, standardize_covariates, CsvSchema, SurvivalDataset};
pub use error::{Error, Result};
pub use kernels::{gram_pair, median_heuristic_bandwidth, KernelSpec};
pub use statistic::{psi_squared_direct, psi_squared_trace, Statistic};
