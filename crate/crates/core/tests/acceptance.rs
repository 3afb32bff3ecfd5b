//! End-to-end acceptance checks. Run with `cargo test --test acceptance`;
//! prints one PASS/FAIL line per criterion and exits nonzero if any fails.

use std::time::{Duration, Instant};

use accel_msm::additive::{fit_aalen, martingale_residuals, orthogonality_defect};
use accel_msm::estimators::{bootstrap_ci, estimate_detailed, estimate_survival};
use accel_msm::reweighting::{weight_diagnostics, DEFAULT_FLOOR};
use accel_msm::simulation::{
    oracle_survival, simulate_cohort, simulate_hypothetical, Intensity, DEFAULT_DESIGN, DIALYSIS, LCI,
};
use accel_msm::time_change::{blank_subject, mc_check_intensity, shift_path};
use accel_msm::{AccelerationSpec, Comparison, DesignSpec, DgpConfig, StepFunction, TimeChange};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const KM_TOLERANCE: f64 = 1e-12;
const IDENTITY_RUNTIME: Duration = Duration::from_secs(1);
const MAX_Z: f64 = 4.0;
const RECOVERY_SUP: f64 = 0.15;
const RECOVERY_SHARE: f64 = 0.95;
const ORTHOGONALITY: f64 = 1e-10;
const ORACLE_ACCURACY: f64 = 0.03;
const NAIVE_GAP: f64 = 0.05;
const COVERAGE: (f64, f64) = (0.88, 0.99);
const INVERSE_TOLERANCE: f64 = 1e-12;

const ORACLE_N: usize = 200_000;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    passed: bool,
    detail: String,
}

fn default_grid() -> Vec<f64> {
    (1..=20).map(|k| 0.4 * k as f64).collect()
}

fn design() -> DesignSpec {
    DesignSpec::parse(DEFAULT_DESIGN).unwrap()
}

fn identity_collapse() -> Outcome {
    let cohort = simulate_cohort(&DgpConfig::default(), 1000, 101).unwrap();
    let start = Instant::now();
    let identity = AccelerationSpec::identity();
    let est = estimate_detailed(&cohort, &design(), &identity, &[0.0], DEFAULT_FLOOR).unwrap();
    let elapsed = start.elapsed();

    // weights from the fitted model itself, not only the shortcut inside the pipeline
    let fit = fit_aalen(&cohort, &design()).unwrap();
    let mut all_one = est.weights.iter().all(|w| w.path.is_empty() && w.path.initial() == 1.0);
    for s in cohort.subjects() {
        let lambda = accel_msm::additive::predict_cum_intensity(&fit, s, &design()).unwrap();
        let r = accel_msm::reweighting::likelihood_ratio_path(s, &lambda, &identity, DEFAULT_FLOOR).unwrap();
        all_one &= r.path.values().iter().chain([r.path.initial()].iter()).all(|v| v.to_bits() == 1f64.to_bits());
    }

    let event_times = est.at_events.grid.clone();
    let km = oracle_survival(&cohort, &event_times);
    let diff = km.max_abs_diff(&est.at_events);
    Outcome {
        passed: all_one && diff <= KM_TOLERANCE && elapsed < IDENTITY_RUNTIME,
        detail: format!(
            "weights all exactly 1: {all_one}; max |S - KM| over {} event times = {diff:.2e}; runtime {elapsed:.2?}",
            event_times.len()
        ),
    }
}

fn time_change_monte_carlo() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut passed = true;
    for (i, lambda) in [0.5, 1.0, 2.0].into_iter().enumerate() {
        for (j, b) in [0.5, 1.0, 2.0].into_iter().enumerate() {
            let spec = AccelerationSpec::constant(b).unwrap();
            let check =
                mc_check_intensity(lambda, &spec, &blank_subject(), 1.0, 10_000, 500 + (3 * i + j) as u64).unwrap();
            passed &= check.z.abs() <= MAX_Z && (check.predicted - lambda * b).abs() < 1e-12;
            worst = worst.max(check.z.abs());
        }
    }
    Outcome {
        passed,
        detail: format!("9 (lambda, b) pairs, 10^4 paths each, max |z| = {worst:.2}"),
    }
}

/// The calibrated generator treats 73% of subjects within a few years, which
/// leaves too few at risk near t = 5 to pin down B(t). Recovery is checked on
/// the same covariate structure with all intensities scaled down.
fn recovery_config() -> DgpConfig {
    let scale = |i: Intensity| Intensity {
        intercept: i.intercept / 8.0,
        severe: i.severe / 8.0,
        disease: i.disease / 8.0,
        physical: i.physical / 8.0,
        dialysis: i.dialysis / 8.0,
    };
    let base = DgpConfig::default();
    DgpConfig {
        treatment: scale(base.treatment),
        withdrawal: scale(base.withdrawal),
        death: scale(base.death),
        ..base
    }
}

fn aalen_recovery() -> Outcome {
    let cfg = recovery_config();
    let t = cfg.treatment;
    let beta = [t.intercept, t.severe, t.disease, t.physical, t.dialysis];
    let reps = 50;
    let mut good = 0;
    let mut worst: f64 = 0.0;
    for r in 0..reps {
        let cohort = simulate_cohort(&cfg, 5000, 3000 + r).unwrap();
        let fit = fit_aalen(&cohort, &design()).unwrap();
        let cumulative = fit.cumulative();
        let mut sup: f64 = 0.0;
        let mut previous = vec![0.0; beta.len()];
        for (k, &tk) in fit.times().iter().enumerate() {
            if tk > 5.0 {
                break;
            }
            for j in 0..beta.len() {
                // a step path against a line is furthest apart just before or at a jump
                sup = sup.max((previous[j] - beta[j] * tk).abs());
                sup = sup.max((cumulative[k][j] - beta[j] * tk).abs());
            }
            previous = cumulative[k].clone();
        }
        for j in 0..beta.len() {
            sup = sup.max((previous[j] - beta[j] * 5.0).abs());
        }
        worst = worst.max(sup);
        if sup < RECOVERY_SUP {
            good += 1;
        }
    }
    let share = good as f64 / reps as f64;
    Outcome {
        passed: share >= RECOVERY_SHARE,
        detail: format!("{good}/{reps} fits with sup-norm error < {RECOVERY_SUP} on [0, 5]; worst {worst:.3}"),
    }
}

fn orthogonality() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for (seed, n) in [(41u64, 2000usize), (42, 300), (43, 5000)] {
        let cohort = simulate_cohort(&DgpConfig::default(), n, seed).unwrap();
        for d in [design(), DesignSpec::intercept_only(), DesignSpec::parse("physical\nI(x_lci > 6)").unwrap()] {
            let fit = fit_aalen(&cohort, &d).unwrap();
            let residuals = martingale_residuals(&cohort, &fit, &d).unwrap();
            worst = worst.max(orthogonality_defect(&cohort, &fit, &d, &residuals).unwrap());
            checked += fit.times().len() - fit.skipped_count();
        }
    }
    Outcome {
        passed: worst <= ORTHOGONALITY,
        detail: format!("max |sum L dM| = {worst:.2e} over {checked} fitted event times"),
    }
}

fn scenarios() -> Vec<(&'static str, AccelerationSpec)> {
    vec![
        ("g1", AccelerationSpec::baseline_indicator(LCI, Comparison::Le, 6.0, 2.0).unwrap()),
        ("g2", AccelerationSpec::baseline_indicator(LCI, Comparison::Gt, 6.0, 2.0).unwrap()),
        ("g3", AccelerationSpec::process_indicator(DIALYSIS, Comparison::Eq, 0.0, 2.0).unwrap()),
        ("g4", AccelerationSpec::process_indicator(DIALYSIS, Comparison::Ne, 0.0, 2.0).unwrap()),
        ("b=1/2", AccelerationSpec::constant(0.5).unwrap()),
        ("b=2", AccelerationSpec::constant(2.0).unwrap()),
    ]
}

fn oracle_consistency() -> Outcome {
    let cfg = DgpConfig::default();
    let grid = default_grid();
    let cohort = simulate_cohort(&cfg, 5000, 7001).unwrap();
    let naive = oracle_survival(&cohort, &grid);
    let mut passed = true;
    let mut parts = Vec::new();
    for (k, (name, spec)) in scenarios().into_iter().enumerate() {
        let truth = oracle_survival(&simulate_hypothetical(&cfg, &spec, ORACLE_N, 9000 + k as u64).unwrap(), &grid);
        let estimate = estimate_survival(&cohort, &design(), &spec, &grid).unwrap();
        let error = estimate.max_abs_diff(&truth);
        let gap = naive.max_abs_diff(&truth);
        let ok = error <= ORACLE_ACCURACY && gap > NAIVE_GAP;
        passed &= ok;
        parts.push(format!(
            "{name}: error {error:.4}, naive gap {gap:.4}{}",
            if ok { "" } else { " (miss)" }
        ));
    }
    Outcome {
        passed,
        detail: parts.join("; "),
    }
}

fn mean_one_weights() -> Outcome {
    let cohort = simulate_cohort(&DgpConfig::default(), 5000, 6001).unwrap();
    let spec = AccelerationSpec::constant(2.0).unwrap();
    let est = estimate_detailed(&cohort, &design(), &spec, &[1.0], DEFAULT_FLOOR).unwrap();
    let mut worst: f64 = 0.0;
    for k in 1..=10 {
        let t = 0.5 * k as f64;
        let d = weight_diagnostics(&est.weights, t).unwrap();
        worst = worst.max(((d.mean - 1.0) / d.std_error).abs());
    }
    Outcome {
        passed: worst <= MAX_Z,
        detail: format!("max |mean - 1| / SE over t = 0.5..5 is {worst:.4}"),
    }
}

fn qualitative_shape() -> Outcome {
    let cfg = DgpConfig::default();
    let grid = default_grid();
    let cohort = simulate_cohort(&cfg, 5000, 8001).unwrap();
    let first_event = cohort
        .subjects()
        .iter()
        .filter_map(|s| s.outcome_time())
        .fold(f64::INFINITY, f64::min);
    let observational = estimate_survival(&cohort, &design(), &AccelerationSpec::identity(), &grid).unwrap();
    let faster = estimate_survival(&cohort, &design(), &AccelerationSpec::constant(2.0).unwrap(), &grid).unwrap();
    let slower = estimate_survival(&cohort, &design(), &AccelerationSpec::constant(0.5).unwrap(), &grid).unwrap();

    let truth = |spec: &AccelerationSpec, seed| oracle_survival(&simulate_hypothetical(&cfg, spec, ORACLE_N, seed).unwrap(), &grid);
    let o_obs = truth(&AccelerationSpec::identity(), 8101);
    let o_fast = truth(&AccelerationSpec::constant(2.0).unwrap(), 8102);
    let o_slow = truth(&AccelerationSpec::constant(0.5).unwrap(), 8103);

    let mut passed = true;
    for (j, &t) in grid.iter().enumerate() {
        if t <= first_event {
            continue;
        }
        passed &= faster.estimate[j] > observational.estimate[j] && slower.estimate[j] < observational.estimate[j];
        passed &= o_fast.estimate[j] > o_obs.estimate[j] && o_slow.estimate[j] < o_obs.estimate[j];
    }
    let last = grid.len() - 1;
    Outcome {
        passed,
        detail: format!(
            "S(8): b=2 {:.3} > observational {:.3} > b=1/2 {:.3} (oracle {:.3} / {:.3} / {:.3})",
            faster.estimate[last],
            observational.estimate[last],
            slower.estimate[last],
            o_fast.estimate[last],
            o_obs.estimate[last],
            o_slow.estimate[last]
        ),
    }
}

fn bootstrap_coverage() -> Outcome {
    let cfg = DgpConfig::default();
    let identity = AccelerationSpec::identity();
    let truth = oracle_survival(&simulate_cohort(&cfg, ORACLE_N, 4242).unwrap(), &[2.0]).estimate[0];
    let outer = 100;
    let mut covered = 0;
    for r in 0..outer {
        let cohort = simulate_cohort(&cfg, 500, 10_000 + r).unwrap();
        let band = bootstrap_ci(&cohort, &design(), &identity, &[2.0], 200, 0.95, 77 * r).unwrap();
        let (lo, hi) = (band.lower.unwrap()[0], band.upper.unwrap()[0]);
        if lo <= truth && truth <= hi {
            covered += 1;
        }
    }
    let coverage = covered as f64 / outer as f64;
    Outcome {
        passed: (COVERAGE.0..=COVERAGE.1).contains(&coverage),
        detail: format!("coverage of S(2) = {truth:.4}: {covered}/{outer}"),
    }
}

fn time_change_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst: f64 = 0.0;
    let mut counts_ok = true;
    for _ in 0..20 {
        let mut breaks = Vec::new();
        let mut t = 0.0;
        for _ in 0..rng.random_range(0..15) {
            t += rng.random_range(0.01..2.0);
            breaks.push((t, rng.random_range(0.05..5.0)));
        }
        let gamma = TimeChange::from_slopes(rng.random_range(0.05..5.0), &breaks).unwrap();
        for _ in 0..1000 {
            let u: f64 = rng.random_range(0.0..40.0);
            worst = worst.max((gamma.eval(gamma.eval_inverse(u)) - u).abs());
        }
        let jumps: Vec<f64> = (0..rng.random_range(0..50)).map(|_| rng.random_range(0.001..30.0)).collect();
        let path = StepFunction::counting(&jumps);
        let shifted = shift_path(&path, &gamma);
        counts_ok &= shifted.len() == path.len() && shifted.last_value() == jumps.len() as f64;
    }
    Outcome {
        passed: worst <= INVERSE_TOLERANCE && counts_ok,
        detail: format!("20 random maps x 1000 points, max |G(G^-1(u)) - u| = {worst:.2e}; jump counts preserved: {counts_ok}"),
    }
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("identity collapse", identity_collapse),
        ("accelerated intensity Monte Carlo", time_change_monte_carlo),
        ("additive model recovery", aalen_recovery),
        ("residual orthogonality", orthogonality),
        ("oracle consistency", oracle_consistency),
        ("mean-one weights", mean_one_weights),
        ("scenario ordering", qualitative_shape),
        ("bootstrap coverage", bootstrap_coverage),
        ("time-change exactness", time_change_exactness),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let label = format!("criterion {} {name}", i + 1);
        if !filter.is_empty() && !filter.iter().any(|f| label.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = check();
        let status = if outcome.passed { "PASS" } else { "FAIL" };
        println!("{status} {label}: {} [{:.1?}]", outcome.detail, start.elapsed());
        if !outcome.passed {
            failures += 1;
        }
    }
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
