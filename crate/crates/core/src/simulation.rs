//! Synthetic waiting-list cohorts with known causal structure, and the
//! directly simulated hypothetical world used as ground truth.
//!
//! Each subject enters the list at time 0 with a comorbidity score `x_lci`,
//! a disease code `x_disease` (0 other, 1 vascular, 2 diabetes), a physical
//! function score `physical` reported every half year, and the indicator
//! `dialysis_2yr` of having been on dialysis for two years. Treatment,
//! withdrawal and death intensities are additive in these covariates, so
//! [`DEFAULT_DESIGN`] specifies the treatment model correctly. Covariates
//! stop being updated once a subject is treated.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::acceleration::AccelerationSpec;
use crate::cohort::{Cohort, CovariateKind, CovariateSchema, Event, SubjectPath, OUTCOME_DEATH, OUTCOME_WITHDRAWAL};
use crate::error::{Error, Result};
use crate::estimators::SurvivalCurve;

pub const LCI: &str = "x_lci";
pub const DISEASE: &str = "x_disease";
pub const PHYSICAL: &str = "physical";
pub const DIALYSIS: &str = "dialysis_2yr";

/// Treatment model matching the generator's treatment intensity.
pub const DEFAULT_DESIGN: &str = "I(x_lci > 6)\nx_disease\nphysical\nI(dialysis_2yr != 0)\n";

/// Comorbidity score above which a subject counts as severe.
pub const SEVERE_THRESHOLD: f64 = 6.0;

/// Additive intensity `intercept + severe·I(x_lci > 6) + disease·x_disease
/// + physical·physical + dialysis·dialysis_2yr`, per year.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Intensity {
    pub intercept: f64,
    #[serde(default)]
    pub severe: f64,
    #[serde(default)]
    pub disease: f64,
    #[serde(default)]
    pub physical: f64,
    #[serde(default)]
    pub dialysis: f64,
}

impl Intensity {
    pub fn constant(rate: f64) -> Self {
        Intensity {
            intercept: rate,
            severe: 0.0,
            disease: 0.0,
            physical: 0.0,
            dialysis: 0.0,
        }
    }

    fn at(&self, s: &State) -> f64 {
        self.intercept
            + self.severe * s.severe
            + self.disease * s.disease
            + self.physical * s.physical
            + self.dialysis * s.dialysis
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicalConfig {
    pub mean: f64,
    pub sd: f64,
    pub update_interval: f64,
    /// Mean change per update.
    pub drift: f64,
    pub noise_sd: f64,
}

impl Default for PhysicalConfig {
    fn default() -> Self {
        PhysicalConfig {
            mean: 70.0,
            sd: 25.0,
            update_interval: 0.5,
            drift: -2.5,
            noise_sd: 8.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DialysisConfig {
    /// Probability of already being on dialysis at listing.
    pub on_at_entry: f64,
    /// Time already spent on dialysis at listing is uniform on `[0, max_prior_years]`.
    pub max_prior_years: f64,
    /// Rate of starting dialysis for those not yet on it.
    pub start_rate: f64,
}

impl Default for DialysisConfig {
    fn default() -> Self {
        DialysisConfig {
            on_at_entry: 0.9,
            max_prior_years: 2.7,
            start_rate: 0.1,
        }
    }
}

/// Generator parameters. Any field may be omitted from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DgpConfig {
    /// Administrative end of the study on the calendar scale.
    pub horizon: f64,
    /// Listing dates are uniform on `[0, entry_window]`; follow-up ends at `horizon - entry`.
    pub entry_window: f64,
    pub p_severe: f64,
    /// Probabilities of disease codes 0, 1 and 2.
    pub disease_probs: [f64; 3],
    pub physical: PhysicalConfig,
    pub dialysis: DialysisConfig,
    pub treatment: Intensity,
    pub withdrawal: Intensity,
    pub death: Intensity,
    pub death_treated: Intensity,
}

impl Default for DgpConfig {
    fn default() -> Self {
        DgpConfig {
            horizon: 10.0,
            entry_window: 4.0,
            p_severe: 0.112,
            disease_probs: [0.546, 0.359, 0.095],
            physical: PhysicalConfig::default(),
            dialysis: DialysisConfig::default(),
            treatment: Intensity {
                intercept: 0.74,
                severe: -0.10,
                disease: -0.02,
                physical: 0.003,
                dialysis: -0.03,
            },
            withdrawal: Intensity {
                intercept: 0.16,
                severe: 0.08,
                disease: 0.01,
                physical: -0.0004,
                dialysis: 0.10,
            },
            death: Intensity {
                intercept: 0.10,
                severe: 0.08,
                disease: 0.02,
                physical: -0.0003,
                dialysis: 0.07,
            },
            death_treated: Intensity {
                intercept: 0.005,
                severe: 0.03,
                disease: 0.005,
                physical: 0.0,
                dialysis: 0.0,
            },
        }
    }
}

impl DgpConfig {
    pub fn from_toml_str(src: &str) -> Result<Self> {
        let cfg: DgpConfig = toml::from_str(src).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let src = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&src)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad(format!("horizon must be positive, got {}", self.horizon));
        }
        if !(self.entry_window >= 0.0 && self.entry_window < self.horizon) {
            return bad(format!("entry_window must lie in [0, horizon), got {}", self.entry_window));
        }
        for (name, p) in [("p_severe", self.p_severe), ("dialysis.on_at_entry", self.dialysis.on_at_entry)]
            .into_iter()
            .chain(self.disease_probs.iter().map(|&p| ("disease_probs", p)))
        {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must be a probability, got {p}"));
            }
        }
        let total: f64 = self.disease_probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return bad(format!("disease_probs must sum to 1, got {total}"));
        }
        let ph = &self.physical;
        if !(ph.update_interval > 0.0) || !(ph.sd >= 0.0) || !(ph.noise_sd >= 0.0) {
            return bad("physical: update_interval must be positive and sd values nonnegative".into());
        }
        if !(self.dialysis.max_prior_years >= 0.0) || !(self.dialysis.start_rate >= 0.0) {
            return bad("dialysis: max_prior_years and start_rate must be nonnegative".into());
        }
        for (name, rate) in [
            ("treatment", &self.treatment),
            ("withdrawal", &self.withdrawal),
            ("death", &self.death),
            ("death_treated", &self.death_treated),
        ] {
            for severe in [0.0, 1.0] {
                for disease in [0.0, 1.0, 2.0] {
                    for physical in [0.0, 100.0] {
                        for dialysis in [0.0, 1.0] {
                            let s = State {
                                severe,
                                disease,
                                physical,
                                dialysis,
                            };
                            let v = rate.at(&s);
                            if !(v >= 0.0 && v.is_finite()) {
                                return bad(format!(
                                    "{name} intensity {v} is negative at severe={severe} disease={disease} \
                                     physical={physical} dialysis={dialysis}"
                                ));
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Covariate declarations of generated cohorts.
pub fn schema() -> CovariateSchema {
    CovariateSchema::new()
        .with(LCI, CovariateKind::Baseline)
        .with(DISEASE, CovariateKind::Baseline)
        .with(PHYSICAL, CovariateKind::Process)
        .with(DIALYSIS, CovariateKind::Process)
}

#[derive(Debug, Clone, Copy)]
struct State {
    severe: f64,
    disease: f64,
    physical: f64,
    dialysis: f64,
}

/// Observational cohort of `n` subjects.
pub fn simulate_cohort(cfg: &DgpConfig, n: usize, seed: u64) -> Result<Cohort> {
    simulate_hypothetical(cfg, &AccelerationSpec::identity(), n, seed)
}

/// Cohort drawn from the world in which the treatment intensity is multiplied
/// by `g`. Subject `i` uses its own ChaCha8 stream, so results do not depend
/// on thread count.
pub fn simulate_hypothetical(cfg: &DgpConfig, accel: &AccelerationSpec, n: usize, seed: u64) -> Result<Cohort> {
    cfg.validate()?;
    let schema = schema();
    accel.validate(&schema)?;
    let subjects = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            simulate_subject(cfg, accel, &schema, i, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Cohort::new(subjects, cfg.horizon, schema)
}

fn exp1(rng: &mut ChaCha8Rng) -> f64 {
    Exp1.sample(rng)
}

fn clamp_score(v: f64) -> f64 {
    v.clamp(0.0, 100.0).round()
}

fn simulate_subject(
    cfg: &DgpConfig,
    accel: &AccelerationSpec,
    schema: &CovariateSchema,
    index: usize,
    rng: &mut ChaCha8Rng,
) -> Result<SubjectPath> {
    let follow_up = cfg.horizon - cfg.entry_window * rng.random::<f64>();

    let severe = rng.random::<f64>() < cfg.p_severe;
    let lci = if severe {
        rng.random_range(7..=12) as f64
    } else {
        rng.random_range(0..=6) as f64
    };
    let u = rng.random::<f64>();
    let disease = if u < cfg.disease_probs[0] {
        0.0
    } else if u < cfg.disease_probs[0] + cfg.disease_probs[1] {
        1.0
    } else {
        2.0
    };
    let z: f64 = StandardNormal.sample(rng);
    let physical = clamp_score(cfg.physical.mean + cfg.physical.sd * z);

    // time at which two years on dialysis is reached (0 = already reached)
    let dial = &cfg.dialysis;
    let crossing = if rng.random::<f64>() < dial.on_at_entry {
        let prior = dial.max_prior_years * rng.random::<f64>();
        (2.0 - prior).max(0.0)
    } else if dial.start_rate > 0.0 {
        exp1(rng) / dial.start_rate + 2.0
    } else {
        f64::INFINITY
    };

    let mut state = State {
        severe: if severe { 1.0 } else { 0.0 },
        disease,
        physical,
        dialysis: if crossing == 0.0 { 1.0 } else { 0.0 },
    };
    let baseline = BTreeMap::from([
        (LCI.to_string(), lci),
        (DISEASE.to_string(), disease),
        (PHYSICAL.to_string(), physical),
        (DIALYSIS.to_string(), state.dialysis),
    ]);

    let mut events = Vec::new();
    let mut t = 0.0;
    let mut treated = false;
    let mut next_report = cfg.physical.update_interval;
    let mut pending_crossing = if crossing > 0.0 { crossing } else { f64::INFINITY };
    loop {
        let g = if treated {
            0.0
        } else {
            accel.evaluate_with(|name| match name {
                LCI => Some(lci),
                DISEASE => Some(state.disease),
                PHYSICAL => Some(state.physical),
                DIALYSIS => Some(state.dialysis),
                _ => None,
            })?
        };
        let rates = if treated {
            [0.0, 0.0, cfg.death_treated.at(&state)]
        } else {
            [
                cfg.treatment.at(&state) * g,
                cfg.withdrawal.at(&state),
                cfg.death.at(&state),
            ]
        };
        let total: f64 = rates.iter().sum();
        let next_change = if treated {
            follow_up
        } else {
            next_report.min(pending_crossing).min(follow_up)
        };
        let wait = if total > 0.0 { exp1(rng) / total } else { f64::INFINITY };

        if t + wait < next_change {
            t += wait;
            let pick = rng.random::<f64>() * total;
            if pick < rates[0] {
                events.push(Event::treatment(t));
                treated = true;
            } else if pick < rates[0] + rates[1] {
                events.push(Event::labelled_outcome(t, OUTCOME_WITHDRAWAL));
                break;
            } else {
                events.push(Event::labelled_outcome(t, OUTCOME_DEATH));
                break;
            }
            continue;
        }

        t = next_change;
        if t >= follow_up {
            events.push(Event::censor(follow_up));
            break;
        }
        if t == pending_crossing {
            state.dialysis = 1.0;
            events.push(Event::covariate(t, DIALYSIS, 1.0));
            pending_crossing = f64::INFINITY;
        }
        if t == next_report {
            let z: f64 = StandardNormal.sample(rng);
            let updated = clamp_score(state.physical + cfg.physical.drift + cfg.physical.noise_sd * z);
            if updated != state.physical {
                state.physical = updated;
                events.push(Event::covariate(t, PHYSICAL, updated));
            }
            next_report += cfg.physical.update_interval;
        }
    }
    SubjectPath::new(&format!("S{index}"), baseline, events, schema)
}

/// Kaplan–Meier estimate of the outcome survival on `grid`, coded directly
/// from the terminal events.
pub fn oracle_survival(cohort: &Cohort, grid: &[f64]) -> SurvivalCurve {
    let mut exits: Vec<(f64, bool)> = cohort
        .subjects()
        .iter()
        .filter_map(|s| s.terminal_time().map(|t| (t, s.outcome_time().is_some())))
        .collect();
    let never_exit = cohort.len() - exits.len();
    exits.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut steps: Vec<(f64, f64)> = Vec::new();
    let mut s = 1.0;
    let mut i = 0;
    while i < exits.len() {
        let t = exits[i].0;
        let at_risk = exits.len() - i + never_exit;
        let mut deaths = 0;
        while i < exits.len() && exits[i].0 == t {
            deaths += exits[i].1 as usize;
            i += 1;
        }
        if deaths > 0 {
            s *= 1.0 - deaths as f64 / at_risk as f64;
            steps.push((t, s));
        }
    }
    let estimate = grid
        .iter()
        .map(|&t| {
            let k = steps.partition_point(|&(u, _)| u <= t);
            if k == 0 {
                1.0
            } else {
                steps[k - 1].1
            }
        })
        .collect();
    SurvivalCurve {
        grid: grid.to_vec(),
        estimate,
        lower: None,
        upper: None,
        scenario: "oracle".to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::EventKind;

    #[test]
    fn deterministic_and_identity_matches_observational() {
        let cfg = DgpConfig::default();
        let a = simulate_cohort(&cfg, 300, 11).unwrap();
        let b = simulate_cohort(&cfg, 300, 11).unwrap();
        assert_eq!(a, b);
        let c = simulate_hypothetical(&cfg, &AccelerationSpec::constant(1.0).unwrap(), 300, 11).unwrap();
        assert_eq!(a, c);
        let d = simulate_cohort(&cfg, 300, 12).unwrap();
        assert_ne!(a, d);
    }

    #[test]
    fn covariates_stop_at_treatment() {
        let cohort = simulate_cohort(&DgpConfig::default(), 500, 3).unwrap();
        for s in cohort.subjects() {
            if let Some(a) = s.treatment_time() {
                assert!(s
                    .events()
                    .iter()
                    .all(|e| !matches!(e.kind, EventKind::CovariateChange(_)) || e.time < a));
            }
        }
    }

    #[test]
    fn config_validation() {
        let mut cfg = DgpConfig::default();
        cfg.treatment.physical = -0.01;
        assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))));
        let cfg = DgpConfig {
            disease_probs: [0.5, 0.5, 0.5],
            ..DgpConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = DgpConfig::from_toml_str("p_severe = 0.2\n[treatment]\nintercept = 0.3\n").unwrap();
        assert_eq!(cfg.p_severe, 0.2);
        assert_eq!(cfg.treatment, Intensity::constant(0.3));
        assert!(DgpConfig::from_toml_str("unknown = 1").is_err());
        let round = DgpConfig::from_toml_str(&DgpConfig::default().to_toml_string()).unwrap();
        assert_eq!(round, DgpConfig::default());
    }

    #[test]
    fn oracle_trivial_cases() {
        let schema = schema();
        let base = BTreeMap::from([
            (LCI.to_string(), 0.0),
            (DISEASE.to_string(), 0.0),
            (PHYSICAL.to_string(), 70.0),
            (DIALYSIS.to_string(), 0.0),
        ]);
        let one = SubjectPath::new("a", base.clone(), vec![Event::outcome(1.0)], &schema).unwrap();
        let cohort = Cohort::new(vec![one], 2.0, schema.clone()).unwrap();
        let s = oracle_survival(&cohort, &[0.0, 0.5, 1.0, 2.0]);
        assert_eq!(s.estimate, vec![1.0, 1.0, 0.0, 0.0]);

        let alive = SubjectPath::new("b", base, vec![Event::censor(2.0)], &schema).unwrap();
        let cohort = Cohort::new(vec![alive], 2.0, schema).unwrap();
        assert_eq!(oracle_survival(&cohort, &[1.0, 2.0]).estimate, vec![1.0, 1.0]);
    }
}
