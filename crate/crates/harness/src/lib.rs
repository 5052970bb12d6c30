//! Batch driver for `ieqsim` experiments.
//!
//! An [`ExperimentConfig`] picks a model (`fpu`, `string`, `plate`), a
//! scheme and the run parameters. [`run`] writes an energy trace, [`reference`]
//! a fine Störmer–Verlet trajectory, [`converge`] error-versus-step tables,
//! [`bench`] median timings and [`scan`] stability maps. All tables are CSV
//! with round-trip float formatting.
//!
//! ```
//! use ieqsim_harness::{run, ExperimentConfig};
//!
//! let cfg = ExperimentConfig::parse("model = fpu\nscheme = ieq\nalpha = 100\ndt = 1e-3\nduration = 0.5").unwrap();
//! let mut csv = Vec::new();
//! let summary = run(&cfg, &mut csv).unwrap();
//! assert_eq!(summary.steps, 500);
//! assert!(summary.max_abs_h_rel < 1e-12);
//! assert!(String::from_utf8(csv).unwrap().starts_with("step,t,probe_q,probe_p,H,H_rel\n"));
//! ```

pub mod checkpoint;
pub mod config;
pub mod error;
pub mod sim;
pub mod study;
pub mod table;

pub use config::{ExperimentConfig, Method, Model};
pub use error::{HarnessError, Result};
pub use sim::{read_trajectory, reference, run, write_trajectory, RunSummary, Setup, Trajectory};
pub use study::{bench, converge, scan, BenchRow, ConvergenceReport, ScanReport};

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/harness.md")]
mod book {}
