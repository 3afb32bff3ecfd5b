//! Random time changes `Γ(t) = ∫₀ᵗ g(Γ(s)) ds` for piecewise-constant rates.
//!
//! `Γ` maps hypothetical time to observational time. With a rate that only
//! changes when a driving covariate changes, `Γ` is piecewise linear and is
//! built exactly by walking segments: inside a segment of slope `c` the next
//! driving change at observational time `u` is reached at hypothetical time
//! `t + (u - Γ(t)) / c`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;

use crate::acceleration::AccelerationSpec;
use crate::cohort::{CovariateSchema, SubjectPath};
use crate::error::{Error, Result};
use crate::step::StepFunction;

/// Strictly increasing, continuous, piecewise-linear map with `Γ(0) = 0`.
///
/// Segment `k` starts at `knots[k] = (t_k, Γ(t_k))` and has slope `slopes[k]`;
/// the last segment extends to infinity.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeChange {
    knots: Vec<(f64, f64)>,
    slopes: Vec<f64>,
}

impl TimeChange {
    pub fn identity() -> Self {
        TimeChange {
            knots: vec![(0.0, 0.0)],
            slopes: vec![1.0],
        }
    }

    pub fn linear(slope: f64) -> Result<Self> {
        if !(slope > 0.0 && slope.is_finite()) {
            return Err(Error::NonpositiveRate(slope));
        }
        Ok(TimeChange {
            knots: vec![(0.0, 0.0)],
            slopes: vec![slope],
        })
    }

    /// Builds `Γ` from the slope on `[0, breaks[0])` followed by `(break, slope)` pairs
    /// given on the hypothetical clock.
    pub fn from_slopes(initial_slope: f64, breaks: &[(f64, f64)]) -> Result<Self> {
        let mut gamma = TimeChange::linear(initial_slope)?;
        for &(t, slope) in breaks {
            gamma.push_break(t, slope)?;
        }
        Ok(gamma)
    }

    fn push_break(&mut self, t: f64, slope: f64) -> Result<()> {
        if !(slope > 0.0 && slope.is_finite()) {
            return Err(Error::NonpositiveRate(slope));
        }
        let (t0, _) = *self.knots.last().unwrap();
        if !(t > t0) {
            return Err(Error::InvalidArgument(format!(
                "time-change breaks must increase ({t} after {t0})"
            )));
        }
        let value = self.eval(t);
        self.knots.push((t, value));
        self.slopes.push(slope);
        Ok(())
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    /// `Γ(t)` for `t ≥ 0`.
    pub fn eval(&self, t: f64) -> f64 {
        let k = self.knots.partition_point(|&(s, _)| s <= t).saturating_sub(1);
        let (tk, gk) = self.knots[k];
        gk + self.slopes[k] * (t - tk)
    }

    /// `Γ⁻¹(u)` for `u ≥ 0`.
    pub fn eval_inverse(&self, u: f64) -> f64 {
        let k = self.knots.partition_point(|&(_, g)| g <= u).saturating_sub(1);
        let (tk, gk) = self.knots[k];
        tk + (u - gk) / self.slopes[k]
    }

    /// Left-hand derivative `ǧ(t) = g(Γ(t))`.
    pub fn slope_before(&self, t: f64) -> f64 {
        let k = self.knots.partition_point(|&(s, _)| s < t).saturating_sub(1);
        self.slopes[k]
    }

    /// The exact inverse map `Γ⁻¹(u) = ∫₀ᵘ 1/g(s) ds`.
    pub fn inverse(&self) -> TimeChange {
        TimeChange {
            knots: self.knots.iter().map(|&(t, g)| (g, t)).collect(),
            slopes: self.slopes.iter().map(|s| 1.0 / s).collect(),
        }
    }
}

/// Solves `Γ(t) = ∫₀ᵗ g(Γ(s)) ds` exactly for one subject.
///
/// `g` is evaluated on the observational clock from the subject's state; the
/// rate switches right after each change of a driving process.
pub fn gamma_from_rate(spec: &AccelerationSpec, subject: &SubjectPath) -> Result<TimeChange> {
    let mut gamma = TimeChange::linear(spec.rate_after(subject, 0.0)?)?;
    let changes = subject.change_times(spec.driving_processes());
    for u in changes {
        let slope = spec.rate_after(subject, u)?;
        if slope == *gamma.slopes.last().unwrap() {
            continue;
        }
        let (tk, gk) = *gamma.knots.last().unwrap();
        let t = tk + (u - gk) / gamma.slopes.last().unwrap();
        gamma.push_break(t, slope)?;
    }
    Ok(gamma)
}

pub fn gamma_inverse(gamma: &TimeChange) -> TimeChange {
    gamma.inverse()
}

/// `Ž(t) = Z(Γ(t))`: a jump of `path` at observational time `s` moves to `Γ⁻¹(s)`.
pub fn shift_path(path: &StepFunction, gamma: &TimeChange) -> StepFunction {
    let times: Vec<f64> = path.times().iter().map(|&s| gamma.eval_inverse(s)).collect();
    StepFunction::from_parts(path.initial(), times, path.values().to_vec())
}

/// Outcome of the Monte-Carlo intensity check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntensityCheck {
    pub lambda: f64,
    pub horizon: f64,
    pub paths: usize,
    /// Mean of `Ň(τ)` over paths.
    pub empirical_mean: f64,
    /// Mean of `∫₀^τ ǧ λ ds = λ Γ(τ)` over paths.
    pub predicted: f64,
    pub std_error: f64,
    pub z: f64,
}

impl IntensityCheck {
    pub const MAX_Z: f64 = 4.0;

    pub fn passed(&self) -> bool {
        self.z.abs() <= Self::MAX_Z
    }
}

/// Simulates homogeneous Poisson paths with rate `lambda`, time-changes them
/// with `spec` and compares the mean count on `[0, horizon]` to `λ Γ(horizon)`.
///
/// The rate is evaluated for `subject`, which supplies any covariates the
/// spec reads. Path `i` uses ChaCha stream `i` of `seed`.
pub fn mc_check_intensity(
    lambda: f64,
    spec: &AccelerationSpec,
    subject: &SubjectPath,
    horizon: f64,
    n_paths: usize,
    seed: u64,
) -> Result<IntensityCheck> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("lambda must be positive, got {lambda}")));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidArgument(format!("horizon must be positive, got {horizon}")));
    }
    if n_paths < 100 {
        return Err(Error::InvalidArgument(format!("need at least 100 paths, got {n_paths}")));
    }
    let gamma = gamma_from_rate(spec, subject)?;
    let observational_end = gamma.eval(horizon);
    let inter_arrival = Exp::new(lambda).expect("lambda checked positive");

    let counts: Vec<usize> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let mut jumps = Vec::new();
            let mut s = 0.0;
            loop {
                s += inter_arrival.sample(&mut rng);
                // draw one past the end so the observational path covers Γ(τ)
                jumps.push(s);
                if s > observational_end {
                    break;
                }
            }
            let shifted = shift_path(&StepFunction::counting(&jumps), &gamma);
            shifted.value_at(horizon) as usize
        })
        .collect();

    let n = n_paths as f64;
    let empirical_mean = counts.iter().sum::<usize>() as f64 / n;
    let predicted = lambda * observational_end;
    let std_error = (predicted / n).sqrt();
    Ok(IntensityCheck {
        lambda,
        horizon,
        paths: n_paths,
        empirical_mean,
        predicted,
        std_error,
        z: (empirical_mean - predicted) / std_error,
    })
}

/// A covariate-free subject, for specs that read no covariates.
pub fn blank_subject() -> SubjectPath {
    SubjectPath::new("blank", Default::default(), Vec::new(), &CovariateSchema::new())
        .expect("empty subject is valid")
}
