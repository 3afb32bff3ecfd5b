//! Per-subject likelihood-ratio weights `R̂_i` for an acceleration `g`.

use rayon::prelude::*;

use crate::acceleration::AccelerationSpec;
use crate::additive::{predict_cum_intensity, CumulativeCoefficients};
use crate::cohort::SubjectPath;
use crate::design::DesignSpec;
use crate::error::{Error, Result};
use crate::step::StepFunction;

pub const DEFAULT_FLOOR: f64 = 1e-6;

/// `R̂_i` as a step function starting at 1, together with the number of
/// times the floor was applied.
#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodRatioPath {
    pub path: StepFunction,
    pub floor_hits: usize,
}

impl LikelihoodRatioPath {
    pub fn unit() -> Self {
        LikelihoodRatioPath {
            path: StepFunction::constant(1.0),
            floor_hits: 0,
        }
    }

    pub fn value_at(&self, t: f64) -> f64 {
        self.path.value_at(t)
    }

    pub fn left_limit(&self, t: f64) -> f64 {
        self.path.left_limit(t)
    }
}

/// Product-form solution of the likelihood-ratio equation along one path.
///
/// At every jump of `cum_intensity` and at the subject's own treatment time,
/// `R̂(t) = R̂(t-) (1 + (g(t) - 1)(ΔN(t) - ΔΛ̂(t)))`, with values below
/// `floor` replaced by `floor`.
pub fn likelihood_ratio_path(
    subject: &SubjectPath,
    cum_intensity: &StepFunction,
    spec: &AccelerationSpec,
    floor: f64,
) -> Result<LikelihoodRatioPath> {
    if !(floor > 0.0 && floor.is_finite()) {
        return Err(Error::InvalidArgument(format!("weight floor must be positive, got {floor}")));
    }
    if spec.is_identity() {
        return Ok(LikelihoodRatioPath::unit());
    }
    let rates = spec.rate_path(subject)?;
    let treated = subject.treatment_time();
    let exit = subject.treatment_exit();

    let mut out = LikelihoodRatioPath::unit();
    let mut value = 1.0;
    let mut rate_cursor = 0;
    let mut step = |t: f64, d_lambda: f64, d_n: f64, out: &mut LikelihoodRatioPath| {
        while rate_cursor < rates.len() && rates.times()[rate_cursor] < t {
            rate_cursor += 1;
        }
        let g = if rate_cursor == 0 {
            rates.initial()
        } else {
            rates.values()[rate_cursor - 1]
        };
        let mut next = value * (1.0 + (g - 1.0) * (d_n - d_lambda));
        if next < floor {
            next = floor;
            out.floor_hits += 1;
        }
        if next != value {
            value = next;
            out.path.set(t, value);
        }
    };

    let mut pending = treated;
    for (t, d_lambda) in cum_intensity.jumps() {
        if t > exit {
            break;
        }
        if let Some(a) = pending {
            if a < t {
                step(a, 0.0, 1.0, &mut out);
                pending = None;
            } else if a == t {
                step(t, d_lambda, 1.0, &mut out);
                pending = None;
                continue;
            }
        }
        step(t, d_lambda, 0.0, &mut out);
    }
    if let Some(a) = pending {
        step(a, 0.0, 1.0, &mut out);
    }
    Ok(out)
}

/// Weights for a set of subjects under a fitted treatment model.
pub fn likelihood_ratios(
    subjects: &[&SubjectPath],
    coeffs: &CumulativeCoefficients,
    design: &DesignSpec,
    spec: &AccelerationSpec,
    floor: f64,
) -> Result<Vec<LikelihoodRatioPath>> {
    subjects
        .par_iter()
        .map(|s| {
            let lambda = predict_cum_intensity(coeffs, s, design)?;
            likelihood_ratio_path(s, &lambda, spec, floor)
        })
        .collect()
}

/// Cross-subject summary of `R̂_i(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSummary {
    pub mean: f64,
    pub max: f64,
    pub min: f64,
    pub floor_hit_count: usize,
    /// Standard error of the mean.
    pub std_error: f64,
}

pub fn weight_diagnostics(paths: &[LikelihoodRatioPath], t: f64) -> Result<WeightSummary> {
    if paths.is_empty() {
        return Err(Error::EmptyCollection);
    }
    let values: Vec<f64> = paths.iter().map(|p| p.value_at(t)).collect();
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok(WeightSummary {
        mean,
        max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        min: values.iter().copied().fold(f64::INFINITY, f64::min),
        floor_hit_count: paths.iter().map(|p| p.floor_hits).sum(),
        std_error: (var / n).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::{CovariateKind, CovariateSchema, Event};
    use approx::assert_abs_diff_eq;
    use std::collections::BTreeMap;

    fn subject(events: Vec<Event>) -> SubjectPath {
        let schema = CovariateSchema::new().with("dialysis_2yr", CovariateKind::Process);
        SubjectPath::new("s", BTreeMap::new(), events, &schema).unwrap()
    }

    fn lambda(jumps: &[(f64, f64)]) -> StepFunction {
        let mut path = StepFunction::constant(0.0);
        for &(t, d) in jumps {
            path.add_jump(t, d);
        }
        path
    }

    #[test]
    fn identity_is_exactly_one() {
        let s = subject(vec![Event::treatment(2.0)]);
        let r = likelihood_ratio_path(&s, &lambda(&[(1.0, 0.7), (2.0, 5.0)]), &AccelerationSpec::identity(), DEFAULT_FLOOR)
            .unwrap();
        assert!(r.path.is_empty());
        assert_eq!(r.value_at(10.0), 1.0);
        let b1 = AccelerationSpec::constant(1.0).unwrap();
        let r = likelihood_ratio_path(&s, &lambda(&[(1.0, 0.7)]), &b1, DEFAULT_FLOOR).unwrap();
        assert_eq!(r.value_at(10.0).to_bits(), 1.0f64.to_bits());
    }

    #[test]
    fn treated_subject_hand_example() {
        let s = subject(vec![Event::treatment(2.0), Event::censor(5.0)]);
        let g = AccelerationSpec::constant(2.0).unwrap();
        let r = likelihood_ratio_path(&s, &lambda(&[(1.0, 0.1), (2.0, 0.2)]), &g, DEFAULT_FLOOR).unwrap();
        assert_abs_diff_eq!(r.value_at(1.0), 0.9, epsilon = 1e-15);
        assert_abs_diff_eq!(r.value_at(2.0), 1.62, epsilon = 1e-15);
        assert_abs_diff_eq!(r.value_at(5.0), 1.62, epsilon = 1e-15);
        assert_eq!(r.left_limit(1.0), 1.0);
    }

    #[test]
    fn untreated_subject_hand_example() {
        let s = subject(vec![Event::censor(5.0)]);
        let g = AccelerationSpec::constant(2.0).unwrap();
        let r = likelihood_ratio_path(&s, &lambda(&[(1.0, 0.1), (2.0, 0.1), (3.0, 0.1)]), &g, DEFAULT_FLOOR)
            .unwrap();
        assert_abs_diff_eq!(r.value_at(5.0), 0.729, epsilon = 1e-15);
    }

    #[test]
    fn diagnostics() {
        let g = AccelerationSpec::constant(2.0).unwrap();
        let a = likelihood_ratio_path(
            &subject(vec![Event::treatment(2.0), Event::censor(5.0)]),
            &lambda(&[(1.0, 0.1), (2.0, 0.2)]),
            &g,
            DEFAULT_FLOOR,
        )
        .unwrap();
        let b = likelihood_ratio_path(
            &subject(vec![Event::censor(5.0)]),
            &lambda(&[(1.0, 0.1), (2.0, 0.1), (3.0, 0.1)]),
            &g,
            DEFAULT_FLOOR,
        )
        .unwrap();
        let d = weight_diagnostics(&[a, b], 5.0).unwrap();
        assert_abs_diff_eq!(d.mean, 1.1745, epsilon = 1e-14);
        assert_abs_diff_eq!(d.max, 1.62, epsilon = 1e-14);
        assert_abs_diff_eq!(d.min, 0.729, epsilon = 1e-14);

        let ones = weight_diagnostics(&[LikelihoodRatioPath::unit(), LikelihoodRatioPath::unit()], 3.0).unwrap();
        assert_eq!((ones.mean, ones.max, ones.floor_hit_count), (1.0, 1.0, 0));
        assert!(matches!(weight_diagnostics(&[], 1.0), Err(Error::EmptyCollection)));
    }

    #[test]
    fn floor_is_applied_and_counted() {
        let s = subject(vec![Event::censor(5.0)]);
        let g = AccelerationSpec::constant(3.0).unwrap();
        let r = likelihood_ratio_path(&s, &lambda(&[(1.0, 0.6), (2.0, 0.1)]), &g, 1e-3).unwrap();
        assert_eq!(r.floor_hits, 2);
        assert_eq!(r.value_at(1.0), 1e-3);
        assert_eq!(r.value_at(2.0), 1e-3);
    }

    #[test]
    fn process_indicator_reads_left_limit() {
        // g switches on after the crossing at t=1.5; increments at 1.5 still use g=1
        let s = subject(vec![Event::covariate(1.5, "dialysis_2yr", 1.0), Event::censor(5.0)]);
        let g = AccelerationSpec::process_indicator("dialysis_2yr", crate::Comparison::Ne, 0.0, 2.0).unwrap();
        let r = likelihood_ratio_path(&s, &lambda(&[(1.0, 0.1), (1.5, 0.1), (2.0, 0.1)]), &g, DEFAULT_FLOOR).unwrap();
        assert_eq!(r.value_at(1.5), 1.0);
        assert_abs_diff_eq!(r.value_at(2.0), 0.9, epsilon = 1e-15);
    }
}
