//! Weighted Nelson–Aalen, the product-limit survival transform and the full
//! estimation pipeline with subject-level bootstrap bands.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::acceleration::AccelerationSpec;
use crate::additive::{fit_aalen_subjects, CumulativeCoefficients};
use crate::cohort::{Cohort, CovariateSchema, SubjectPath};
use crate::design::DesignSpec;
use crate::error::{Error, Result};
use crate::reweighting::{likelihood_ratios, LikelihoodRatioPath, DEFAULT_FLOOR};

/// `Ĥ^g` at the pooled outcome times.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CumulativeHazard {
    pub times: Vec<f64>,
    pub increments: Vec<f64>,
    pub cumulative: Vec<f64>,
}

/// Survival on a time grid, optionally with a pointwise band.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalCurve {
    pub grid: Vec<f64>,
    pub estimate: Vec<f64>,
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
    pub scenario: String,
}

impl SurvivalCurve {
    /// Right-continuous step value at `t`; 1 before the first grid point.
    pub fn value_at(&self, t: f64) -> f64 {
        let idx = self.grid.partition_point(|&s| s <= t);
        if idx == 0 {
            1.0
        } else {
            self.estimate[idx - 1]
        }
    }

    /// Re-evaluates a curve stored at its jump times on another grid.
    pub fn on_grid(&self, grid: &[f64]) -> SurvivalCurve {
        SurvivalCurve {
            grid: grid.to_vec(),
            estimate: grid.iter().map(|&t| self.value_at(t)).collect(),
            lower: None,
            upper: None,
            scenario: self.scenario.clone(),
        }
    }

    pub fn max_abs_diff(&self, other: &SurvivalCurve) -> f64 {
        self.estimate
            .iter()
            .zip(&other.estimate)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// `ΔĤ^g(s) = Σ R̂_i(s-) ΔN_i(s) / Σ R̂_j(s-) Y_j(s)` at every pooled outcome time.
pub fn weighted_nelson_aalen(cohort: &Cohort, weights: &[LikelihoodRatioPath]) -> Result<CumulativeHazard> {
    if weights.len() != cohort.len() {
        return Err(Error::InvalidArgument(format!(
            "{} weight paths for {} subjects",
            weights.len(),
            cohort.len()
        )));
    }
    weighted_nelson_aalen_subjects(&cohort.subject_refs(), weights)
}

pub(crate) fn weighted_nelson_aalen_subjects(
    subjects: &[&SubjectPath],
    weights: &[LikelihoodRatioPath],
) -> Result<CumulativeHazard> {
    // denominator changes: weight jumps before exit, then removal at exit
    let mut changes: Vec<(f64, f64)> = Vec::new();
    let mut outcomes: Vec<(f64, usize)> = Vec::new();
    let mut denominator = 0.0;
    for (i, (s, w)) in subjects.iter().zip(weights).enumerate() {
        let exit = s.outcome_exit();
        denominator += w.path.initial();
        for (t, d) in w.path.jumps() {
            if t <= exit {
                changes.push((t, d));
            }
        }
        if exit.is_finite() {
            changes.push((exit, -w.value_at(exit)));
        }
        if let Some(t) = s.outcome_time() {
            outcomes.push((t, i));
        }
    }
    changes.sort_by(|a, b| a.0.total_cmp(&b.0));
    outcomes.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut haz = CumulativeHazard::default();
    let mut cumulative = 0.0;
    let mut next_change = 0;
    let mut k = 0;
    while k < outcomes.len() {
        let t = outcomes[k].0;
        while next_change < changes.len() && changes[next_change].0 < t {
            denominator += changes[next_change].1;
            next_change += 1;
        }
        let mut numerator = 0.0;
        while k < outcomes.len() && outcomes[k].0 == t {
            numerator += weights[outcomes[k].1].left_limit(t);
            k += 1;
        }
        if !(denominator > 0.0) {
            return Err(Error::EmptyRiskSet { time: t });
        }
        // the running denominator carries rounding error; when everyone at risk fails the ratio is 1
        let inc = if numerator >= denominator { 1.0 } else { numerator / denominator };
        cumulative += inc;
        haz.times.push(t);
        haz.increments.push(inc);
        haz.cumulative.push(cumulative);
    }
    Ok(haz)
}

/// Product-limit transform `Ŝ(t) = Π_{s ≤ t} (1 - ΔĤ(s))`, stored at the hazard's jump times.
pub fn survival_from_cumhaz(haz: &CumulativeHazard) -> Result<SurvivalCurve> {
    let mut s = 1.0;
    let mut estimate = Vec::with_capacity(haz.increments.len());
    for (&t, &inc) in haz.times.iter().zip(&haz.increments) {
        if inc > 1.0 {
            return Err(Error::IncrementAboveOne { time: t, increment: inc });
        }
        s *= 1.0 - inc;
        estimate.push(s);
    }
    Ok(SurvivalCurve {
        grid: haz.times.clone(),
        estimate,
        lower: None,
        upper: None,
        scenario: String::new(),
    })
}

/// Everything produced by one run of the estimation pipeline.
#[derive(Debug, Clone)]
pub struct Estimate {
    /// Absent for the identity scenario, where every weight is 1 regardless of the fit.
    pub coefficients: Option<CumulativeCoefficients>,
    pub weights: Vec<LikelihoodRatioPath>,
    pub hazard: CumulativeHazard,
    /// Survival at the outcome event times.
    pub at_events: SurvivalCurve,
    pub curve: SurvivalCurve,
}

pub fn estimate_survival(
    cohort: &Cohort,
    design: &DesignSpec,
    accel: &AccelerationSpec,
    grid: &[f64],
) -> Result<SurvivalCurve> {
    Ok(estimate_detailed(cohort, design, accel, grid, DEFAULT_FLOOR)?.curve)
}

pub fn estimate_detailed(
    cohort: &Cohort,
    design: &DesignSpec,
    accel: &AccelerationSpec,
    grid: &[f64],
    floor: f64,
) -> Result<Estimate> {
    check_grid(grid)?;
    pipeline(&cohort.subject_refs(), cohort.schema(), design, accel, grid, floor)
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.iter().any(|t| !(t.is_finite() && *t >= 0.0)) || grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidArgument(
            "grid must be finite, nonnegative and non-decreasing".into(),
        ));
    }
    Ok(())
}

fn pipeline(
    subjects: &[&SubjectPath],
    schema: &CovariateSchema,
    design: &DesignSpec,
    accel: &AccelerationSpec,
    grid: &[f64],
    floor: f64,
) -> Result<Estimate> {
    design.validate(schema)?;
    accel.validate(schema)?;
    let (coefficients, weights) = if accel.is_identity() {
        (None, vec![LikelihoodRatioPath::unit(); subjects.len()])
    } else {
        let coeffs = fit_aalen_subjects(subjects, schema, design)?;
        let weights = likelihood_ratios(subjects, &coeffs, design, accel, floor)?;
        (Some(coeffs), weights)
    };
    let hazard = weighted_nelson_aalen_subjects(subjects, &weights)?;
    let mut at_events = survival_from_cumhaz(&hazard)?;
    at_events.scenario = accel.label();
    let curve = at_events.on_grid(grid);
    Ok(Estimate {
        coefficients,
        weights,
        hazard,
        at_events,
        curve,
    })
}

/// Type-7 sample quantile of sorted data.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Point estimate with a pointwise percentile band from `reps` subject-level
/// resamples. Replicate `r` draws from `ChaCha8Rng::seed_from_u64(seed + r)`.
pub fn bootstrap_ci(
    cohort: &Cohort,
    design: &DesignSpec,
    accel: &AccelerationSpec,
    grid: &[f64],
    reps: usize,
    level: f64,
    seed: u64,
) -> Result<SurvivalCurve> {
    bootstrap_with_floor(cohort, design, accel, grid, reps, level, seed, DEFAULT_FLOOR)
}

#[allow(clippy::too_many_arguments)]
pub fn bootstrap_with_floor(
    cohort: &Cohort,
    design: &DesignSpec,
    accel: &AccelerationSpec,
    grid: &[f64],
    reps: usize,
    level: f64,
    seed: u64,
    floor: f64,
) -> Result<SurvivalCurve> {
    if reps < 2 {
        return Err(Error::InvalidArgument(format!("bootstrap needs at least 2 replicates, got {reps}")));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!("level must lie in (0, 1), got {level}")));
    }
    let mut curve = estimate_detailed(cohort, design, accel, grid, floor)?.curve;
    let all = cohort.subject_refs();
    let n = all.len();
    let replicates: Vec<Option<Vec<f64>>> = (0..reps as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(r));
            let sample: Vec<&SubjectPath> = (0..n).map(|_| all[rng.random_range(0..n)]).collect();
            pipeline(&sample, cohort.schema(), design, accel, grid, floor)
                .ok()
                .map(|e| e.curve.estimate)
        })
        .collect();
    let failed = replicates.iter().filter(|r| r.is_none()).count();
    if failed * 10 > reps {
        return Err(Error::TooManyFailedReplicates { failed, reps });
    }
    let good: Vec<&Vec<f64>> = replicates.iter().flatten().collect();
    let alpha = (1.0 - level) / 2.0;
    let mut lower = Vec::with_capacity(grid.len());
    let mut upper = Vec::with_capacity(grid.len());
    let mut column = Vec::with_capacity(good.len());
    for (j, &est) in curve.estimate.iter().enumerate() {
        column.clear();
        column.extend(good.iter().map(|c| c[j]));
        column.sort_by(f64::total_cmp);
        lower.push(quantile_sorted(&column, alpha).min(est));
        upper.push(quantile_sorted(&column, 1.0 - alpha).max(est));
    }
    curve.lower = Some(lower);
    curve.upper = Some(upper);
    Ok(curve)
}
