//! Continuous-time marginal structural models with treatment acceleration.
//!
//! The crate fits an additive hazards model for the observational treatment
//! intensity, turns its martingale increments into per-subject likelihood-ratio
//! weights for a chosen acceleration `g`, and estimates survival in the
//! hypothetical world where the treatment intensity is `g` times the observed
//! one. A synthetic data generator simulates that world directly so the whole
//! pipeline can be checked against ground truth.
//!
//! ```no_run
//! use accel_msm::{AccelerationSpec, DesignSpec, DgpConfig};
//! use accel_msm::{estimators, simulation};
//!
//! # fn main() -> accel_msm::Result<()> {
//! let cfg = DgpConfig::default();
//! let cohort = simulation::simulate_cohort(&cfg, 2000, 7)?;
//! let design = DesignSpec::parse(simulation::DEFAULT_DESIGN)?;
//! let accel = AccelerationSpec::constant(2.0)?;
//! let grid: Vec<f64> = (0..=16).map(|k| 0.5 * k as f64).collect();
//! let curve = estimators::estimate_survival(&cohort, &design, &accel, &grid)?;
//! println!("{:?}", curve.estimate);
//! # Ok(())
//! # }
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceleration;
pub mod additive;
pub mod cohort;
pub mod design;
pub mod error;
pub mod estimators;
mod linalg;
pub mod reweighting;
pub mod simulation;
pub mod step;
pub mod time_change;

pub use acceleration::{AccelerationFactor, AccelerationSpec, Comparison};
pub use additive::CumulativeCoefficients;
pub use cohort::{Cohort, CovariateKind, CovariateSchema, Event, EventKind, SubjectPath};
pub use design::{DesignSpec, Term};
pub use error::{Error, Result};
pub use estimators::{CumulativeHazard, SurvivalCurve};
pub use reweighting::LikelihoodRatioPath;
pub use simulation::DgpConfig;
pub use step::StepFunction;
pub use time_change::TimeChange;
