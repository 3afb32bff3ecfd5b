//! Aalen's additive hazards model for the treatment intensity
//! `λ_i(t) = Y_i(t) L_i(t-)ᵀ β(t)`, fitted on the cumulative scale `B(t)`.
//!
//! At every pooled treatment time the increment `ΔB̂` is the least-squares
//! solution with one row per subject at risk for treatment and the 0/1
//! treatment indicator as response. Rank-deficient risk sets give a zero
//! increment and set a flag.

use rayon::prelude::*;

use crate::cohort::{
    covariate_row, pooled_times_of, Cohort, CovariateSchema, EventSelector, RowSchedule, SubjectPath,
};
use crate::design::{DesignSpec, Term};
use crate::error::{Error, Result};
use crate::linalg::{least_squares, RANK_TOLERANCE};
use crate::step::StepFunction;

/// Fitted increments `ΔB̂(t_k)` at the pooled treatment times.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulativeCoefficients {
    terms: Vec<String>,
    times: Vec<f64>,
    at_risk: Vec<usize>,
    increments: Vec<Vec<f64>>,
    rank_skipped: Vec<bool>,
}

impl CumulativeCoefficients {
    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn dim(&self) -> usize {
        self.terms.len()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Size of the treatment risk set at each time.
    pub fn at_risk(&self) -> &[usize] {
        &self.at_risk
    }

    pub fn increments(&self) -> &[Vec<f64>] {
        &self.increments
    }

    pub fn rank_skipped(&self) -> &[bool] {
        &self.rank_skipped
    }

    pub fn skipped_count(&self) -> usize {
        self.rank_skipped.iter().filter(|&&s| s).count()
    }

    /// `B̂(t_k)` after each pooled time.
    pub fn cumulative(&self) -> Vec<Vec<f64>> {
        let mut acc = vec![0.0; self.dim()];
        self.increments
            .iter()
            .map(|inc| {
                for (a, d) in acc.iter_mut().zip(inc) {
                    *a += d;
                }
                acc.clone()
            })
            .collect()
    }

    /// `B̂(t)`, right-continuous.
    pub fn cumulative_at(&self, t: f64) -> Vec<f64> {
        let upto = self.times.partition_point(|&s| s <= t);
        let mut acc = vec![0.0; self.dim()];
        for inc in &self.increments[..upto] {
            for (a, d) in acc.iter_mut().zip(inc) {
                *a += d;
            }
        }
        acc
    }
}

pub fn fit_aalen(cohort: &Cohort, design: &DesignSpec) -> Result<CumulativeCoefficients> {
    fit_aalen_subjects(&cohort.subject_refs(), cohort.schema(), design)
}

pub(crate) fn fit_aalen_subjects(
    subjects: &[&SubjectPath],
    schema: &CovariateSchema,
    design: &DesignSpec,
) -> Result<CumulativeCoefficients> {
    design.validate(schema)?;
    let pooled = pooled_times_of(subjects.iter().copied(), &EventSelector::Treatment);
    if pooled.is_empty() {
        return Err(Error::NoTreatmentEvents);
    }
    let p = design.len();
    let schedules = subjects
        .iter()
        .map(|s| RowSchedule::build(s, design))
        .collect::<Result<Vec<_>>>()?;
    let exits: Vec<f64> = subjects.iter().map(|s| s.treatment_exit()).collect();

    // risk set = prefix of `order` (latest exit first)
    let mut order: Vec<usize> = (0..subjects.len()).collect();
    order.sort_by(|&a, &b| exits[b].total_cmp(&exits[a]));
    let mut active = order.len();
    let mut cursors = vec![0usize; subjects.len()];

    let mut out = CumulativeCoefficients {
        terms: design.labels(),
        times: pooled.times.clone(),
        at_risk: Vec::with_capacity(pooled.len()),
        increments: Vec::with_capacity(pooled.len()),
        rank_skipped: Vec::with_capacity(pooled.len()),
    };
    let mut x = Vec::new();
    let mut y = Vec::new();
    for &t in &pooled.times {
        while active > 0 && exits[order[active - 1]] < t {
            active -= 1;
        }
        let m = active;
        x.clear();
        x.resize(m * p, 0.0);
        y.clear();
        y.resize(m, 0.0);
        for (r, &i) in order[..m].iter().enumerate() {
            let row = &schedules[i].rows[schedules[i].advance(&mut cursors[i], t)];
            for (j, v) in row.iter().enumerate() {
                x[j * m + r] = *v;
            }
            if subjects[i].treatment_time() == Some(t) {
                y[r] = 1.0;
            }
        }
        out.at_risk.push(m);
        match least_squares(&mut x, m, p, &mut y, RANK_TOLERANCE) {
            Some(inc) => {
                out.increments.push(inc);
                out.rank_skipped.push(false);
            }
            None => {
                out.increments.push(vec![0.0; p]);
                out.rank_skipped.push(true);
            }
        }
    }
    Ok(out)
}

/// `Λ̂_i(t) = Σ_{t_k ≤ t} Y_i(t_k) L_i(t_k-)ᵀ ΔB̂(t_k)`.
///
/// Negative increments are kept as they are.
pub fn predict_cum_intensity(
    coeffs: &CumulativeCoefficients,
    subject: &SubjectPath,
    design: &DesignSpec,
) -> Result<StepFunction> {
    if coeffs.dim() != design.len() {
        return Err(Error::DesignMismatch {
            coefficients: coeffs.dim(),
            design: design.len(),
        });
    }
    let schedule = RowSchedule::build(subject, design)?;
    let exit = subject.treatment_exit();
    let mut path = StepFunction::constant(0.0);
    let mut cumulative = 0.0;
    let mut cursor = 0;
    for (k, &t) in coeffs.times.iter().enumerate() {
        if t > exit {
            break;
        }
        if coeffs.rank_skipped[k] {
            continue;
        }
        let row = &schedule.rows[schedule.advance(&mut cursor, t)];
        let inc: f64 = row.iter().zip(&coeffs.increments[k]).map(|(a, b)| a * b).sum();
        if inc != 0.0 {
            cumulative += inc;
            path.set(t, cumulative);
        }
    }
    Ok(path)
}

/// Predicted paths for every subject, in cohort order.
pub fn predict_all(
    coeffs: &CumulativeCoefficients,
    cohort: &Cohort,
    design: &DesignSpec,
) -> Result<Vec<StepFunction>> {
    cohort
        .subjects()
        .par_iter()
        .map(|s| predict_cum_intensity(coeffs, s, design))
        .collect()
}

/// Number of strictly negative predicted increments across paths.
pub fn negative_increments(paths: &[StepFunction]) -> usize {
    paths
        .iter()
        .flat_map(|p| p.jumps())
        .filter(|&(_, d)| d < 0.0)
        .count()
}

/// `M̂_i(t) = Σ_{t_k ≤ t} Y_i(t_k) (ΔN_i(t_k) − ΔΛ̂_i(t_k))` for one subject.
pub fn martingale_residual(
    coeffs: &CumulativeCoefficients,
    subject: &SubjectPath,
    design: &DesignSpec,
) -> Result<StepFunction> {
    let predicted = predict_cum_intensity(coeffs, subject, design)?;
    let treated = subject.treatment_time();
    let mut path = StepFunction::constant(0.0);
    let mut pending_treatment = treated;
    for (t, d) in predicted.jumps() {
        if let Some(a) = pending_treatment {
            if a < t {
                path.add_jump(a, 1.0);
                pending_treatment = None;
            } else if a == t {
                path.add_jump(t, 1.0 - d);
                pending_treatment = None;
                continue;
            }
        }
        path.add_jump(t, -d);
    }
    if let Some(a) = pending_treatment {
        path.add_jump(a, 1.0);
    }
    Ok(path)
}

pub fn martingale_residuals(
    cohort: &Cohort,
    coeffs: &CumulativeCoefficients,
    design: &DesignSpec,
) -> Result<Vec<StepFunction>> {
    cohort
        .subjects()
        .par_iter()
        .map(|s| martingale_residual(coeffs, s, design))
        .collect()
}

/// Largest `|Σ_i L_i(t_k-) ΔM̂_i(t_k)|` component over non-skipped pooled
/// times, evaluated through `covariate_row` and the residual paths.
pub fn orthogonality_defect(
    cohort: &Cohort,
    coeffs: &CumulativeCoefficients,
    design: &DesignSpec,
    residuals: &[StepFunction],
) -> Result<f64> {
    let mut worst = 0.0f64;
    for (k, &t) in coeffs.times().iter().enumerate() {
        if coeffs.rank_skipped()[k] {
            continue;
        }
        let mut sum = vec![0.0; design.len()];
        for (s, m) in cohort.subjects().iter().zip(residuals) {
            let dm = m.value_at(t) - m.left_limit(t);
            if dm == 0.0 {
                continue;
            }
            for (acc, l) in sum.iter_mut().zip(covariate_row(s, design, t)?) {
                *acc += l * dm;
            }
        }
        worst = sum.iter().fold(worst, |w, v| w.max(v.abs()));
    }
    Ok(worst)
}

/// One row of a stratified residual summary.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupMean {
    pub time: f64,
    pub stratum: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroupMeans {
    pub rows: Vec<GroupMean>,
    /// Expected strata (0/1 for indicators) that contain no subject.
    pub empty_strata: Vec<f64>,
}

/// Mean residual path per stratum on `times`.
///
/// Strata are the values of `strata` at baseline (time 0); indicator
/// expressions always have strata 0 and 1, raw covariates their observed values.
pub fn residual_group_means(
    cohort: &Cohort,
    residuals: &[StepFunction],
    strata: &Term,
    times: &[f64],
) -> Result<GroupMeans> {
    if cohort.is_empty() {
        return Ok(GroupMeans::default());
    }
    let labels = cohort
        .subjects()
        .iter()
        .map(|s| {
            strata
                .evaluate(|name| s.value_before(name, 0.0))
                .ok_or_else(|| Error::UnknownCovariate {
                    name: strata.covariate().unwrap_or_default().to_string(),
                    subject: Some(s.id().to_string()),
                    line: None,
                })
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut levels: Vec<f64> = match strata {
        Term::Indicator { .. } => vec![0.0, 1.0],
        _ => labels.clone(),
    };
    levels.sort_by(f64::total_cmp);
    levels.dedup();

    let mut out = GroupMeans::default();
    let mut members: Vec<Vec<usize>> = Vec::new();
    for &level in &levels {
        let idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == level).collect();
        if idx.is_empty() {
            out.empty_strata.push(level);
        }
        members.push(idx);
    }
    for &t in times {
        for (level, idx) in levels.iter().zip(&members) {
            if idx.is_empty() {
                continue;
            }
            let total: f64 = idx.iter().map(|&i| residuals[i].value_at(t)).sum();
            out.rows.push(GroupMean {
                time: t,
                stratum: *level,
                mean: total / idx.len() as f64,
            });
        }
    }
    Ok(out)
}
