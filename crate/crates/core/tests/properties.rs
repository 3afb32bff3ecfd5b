use std::collections::BTreeMap;

use accel_msm::cohort::{parse_cohort, write_cohort};
use accel_msm::estimators::{survival_from_cumhaz, weighted_nelson_aalen};
use accel_msm::reweighting::LikelihoodRatioPath;
use accel_msm::time_change::{gamma_from_rate, shift_path};
use accel_msm::{
    AccelerationSpec, Cohort, Comparison, CovariateKind, CovariateSchema, Event, StepFunction, SubjectPath,
    TimeChange,
};
use proptest::prelude::*;

fn schema() -> CovariateSchema {
    CovariateSchema::new()
        .with("x", CovariateKind::Baseline)
        .with("z", CovariateKind::Process)
}

/// A subject with baseline `x`, process `z` changing at `changes`, an optional
/// treatment and a terminal event at `end`.
fn subject(id: usize, x: f64, changes: &[(f64, f64)], treat: Option<f64>, end: f64, died: bool) -> SubjectPath {
    let mut events: Vec<Event> = changes
        .iter()
        .filter(|(t, _)| *t < end)
        .map(|&(t, v)| Event::covariate(t, "z", v))
        .collect();
    if let Some(a) = treat.filter(|a| *a < end) {
        events.push(Event::treatment(a));
    }
    events.push(if died { Event::outcome(end) } else { Event::censor(end) });
    let baseline = BTreeMap::from([("x".to_string(), x), ("z".to_string(), 0.0)]);
    SubjectPath::new(&format!("p{id}"), baseline, events, &schema()).unwrap()
}

fn increasing(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..3.0, 0..max_len).prop_map(|gaps| {
        let mut t = 0.0;
        gaps.into_iter()
            .map(|g| {
                t += g;
                t
            })
            .collect()
    })
}

prop_compose! {
    fn arb_subject(id: usize)(
        x in 0.0f64..10.0,
        change_times in increasing(4),
        levels in prop::collection::vec(0.0f64..3.0, 4),
        treat in prop::option::of(0.05f64..8.0),
        end in 0.5f64..10.0,
        died in any::<bool>(),
    ) -> SubjectPath {
        let changes: Vec<(f64, f64)> = change_times.iter().zip(&levels).map(|(&t, &v)| (t, v.round())).collect();
        subject(id, x, &changes, treat, end, died)
    }
}

fn arb_cohort(max: usize) -> impl Strategy<Value = Cohort> {
    (1..max)
        .prop_flat_map(|n| (0..n).map(arb_subject).collect::<Vec<_>>())
        .prop_map(|subjects| Cohort::new(subjects, 10.0, schema()).unwrap())
}

fn arb_spec() -> impl Strategy<Value = (AccelerationSpec, f64)> {
    let b = prop_oneof![0.1f64..0.99, 1.01f64..5.0];
    (0usize..3, b, 0.0f64..10.0).prop_map(|(form, b, thr)| {
        let spec = match form {
            0 => AccelerationSpec::constant(b),
            1 => AccelerationSpec::baseline_indicator("x", Comparison::Gt, thr, b),
            _ => AccelerationSpec::process_indicator("z", Comparison::Ne, 0.0, b),
        };
        (spec.unwrap(), b)
    })
}

fn arb_time_change() -> impl Strategy<Value = TimeChange> {
    (0.05f64..5.0, increasing(12), prop::collection::vec(0.05f64..5.0, 12)).prop_map(|(first, breaks, slopes)| {
        let pairs: Vec<(f64, f64)> = breaks.into_iter().zip(slopes).collect();
        TimeChange::from_slopes(first, &pairs).unwrap()
    })
}

proptest! {
    #[test]
    fn time_change_inverse_round_trip(gamma in arb_time_change(), us in prop::collection::vec(0.0f64..50.0, 1..40)) {
        let inv = gamma.inverse();
        for u in us {
            prop_assert!((gamma.eval(gamma.eval_inverse(u)) - u).abs() <= 1e-12 * (1.0 + u));
            prop_assert!((inv.eval(u) - gamma.eval_inverse(u)).abs() <= 1e-12 * (1.0 + u));
        }
    }

    #[test]
    fn time_change_is_increasing(gamma in arb_time_change(), mut ts in prop::collection::vec(0.0f64..30.0, 2..30)) {
        ts.sort_by(f64::total_cmp);
        for w in ts.windows(2) {
            prop_assert!(gamma.eval(w[0]) <= gamma.eval(w[1]));
        }
    }

    #[test]
    fn shift_preserves_jumps(gamma in arb_time_change(), jumps in prop::collection::vec(0.01f64..20.0, 0..30), horizon in 0.5f64..20.0) {
        let path = StepFunction::counting(&jumps);
        let shifted = shift_path(&path, &gamma);
        prop_assert_eq!(shifted.len(), path.len());
        prop_assert_eq!(shifted.values(), path.values());
        let u = gamma.eval_inverse(horizon);
        prop_assert_eq!(shifted.value_at(u), path.value_at(horizon));
    }

    #[test]
    fn step_function_limits(jumps in prop::collection::vec(0.01f64..10.0, 0..20), t in 0.0f64..12.0) {
        let path = StepFunction::counting(&jumps);
        let expected_at = jumps.iter().filter(|&&s| s <= t).count() as f64;
        let expected_before = jumps.iter().filter(|&&s| s < t).count() as f64;
        prop_assert_eq!(path.value_at(t), expected_at);
        prop_assert_eq!(path.left_limit(t), expected_before);
    }

    #[test]
    fn rate_stays_between_one_and_b(s in arb_subject(0), (spec, b) in arb_spec(), t in 0.01f64..12.0) {
        let g = spec.evaluate_g(&s, t).unwrap();
        prop_assert!(g >= b.min(1.0) && g <= b.max(1.0));
    }

    #[test]
    fn rate_is_left_continuous(s in arb_subject(0), (spec, _) in arb_spec()) {
        for t in s.change_times(["z"]) {
            let before = spec.evaluate_g(&s, t - 1e-9).unwrap();
            prop_assert_eq!(spec.evaluate_g(&s, t).unwrap(), before);
        }
    }

    #[test]
    fn gamma_slope_follows_rate(s in arb_subject(0), (spec, _) in arb_spec()) {
        let gamma = gamma_from_rate(&spec, &s).unwrap();
        let rates = spec.rate_path(&s).unwrap();
        let changes = s.change_times(["z"]);
        for (k, &(tk, gk)) in gamma.knots().iter().enumerate().skip(1) {
            // every break sits at the image of a driving change
            let u = changes.iter().copied().min_by(|a, b| (a - gk).abs().total_cmp(&(b - gk).abs())).unwrap();
            prop_assert!((u - gk).abs() <= 1e-12 * (1.0 + u));
            prop_assert_eq!(gamma.slopes()[k], rates.value_at(u));
            prop_assert!(tk > gamma.knots()[k - 1].0);
        }
        prop_assert_eq!(gamma.slopes()[0], rates.initial());
    }

    #[test]
    fn cohort_csv_round_trip(cohort in arb_cohort(8)) {
        let (mut base, mut events) = (Vec::new(), Vec::new());
        write_cohort(&cohort, &mut base, &mut events).unwrap();
        let back = parse_cohort(base.as_slice(), events.as_slice(), &schema(), Some(10.0)).unwrap();
        prop_assert_eq!(back, cohort);
    }

    #[test]
    fn weight_scale_invariance_and_monotonicity(
        cohort in arb_cohort(12),
        raw in prop::collection::vec(prop::collection::vec((0.05f64..5.0, 0.1f64..4.0), 0..4), 12),
        scale in 0.01f64..100.0,
    ) {
        let weights: Vec<LikelihoodRatioPath> = raw
            .iter()
            .take(cohort.len())
            .map(|steps| {
                let mut path = StepFunction::constant(1.0);
                let mut t = 0.0;
                for &(gap, v) in steps {
                    t += gap;
                    path.set(t, v);
                }
                LikelihoodRatioPath { path, floor_hits: 0 }
            })
            .collect();
        let scaled: Vec<LikelihoodRatioPath> = weights
            .iter()
            .map(|w| LikelihoodRatioPath { path: w.path.scaled(scale), floor_hits: 0 })
            .collect();
        let h = weighted_nelson_aalen(&cohort, &weights).unwrap();
        let hs = weighted_nelson_aalen(&cohort, &scaled).unwrap();
        prop_assert_eq!(h.times.len(), hs.times.len());
        for (a, b) in h.increments.iter().zip(&hs.increments) {
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
        prop_assert!(h.increments.iter().all(|&d| (0.0..=1.0 + 1e-12).contains(&d)));
        prop_assert!(h.cumulative.windows(2).all(|w| w[0] <= w[1]));
        let s = survival_from_cumhaz(&h).unwrap();
        prop_assert!(s.estimate.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(s.estimate.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }
}
