//! Treatment-acceleration specifications `g`.
//!
//! A spec is a product of factors. Each factor is either a constant rate
//! `b`, or `1 + (b - 1) * I(...)` where the indicator reads a baseline
//! covariate or the left limit of a time-varying covariate. Config text has
//! one factor per line:
//!
//! ```text
//! form=constant b=2
//! form=baseline_indicator cov=x_lci op=gt threshold=6 b=2
//! form=process_indicator process=dialysis_2yr op=ne threshold=0 b=2
//! ```
//!
//! A `form=product` line may precede the factors; several factor lines
//! always multiply.

use std::fmt;

use crate::cohort::{CovariateKind, CovariateSchema, SubjectPath};
use crate::error::{Error, Result};
use crate::step::StepFunction;

pub use crate::design::Comparison;

#[derive(Debug, Clone, PartialEq)]
pub enum AccelerationFactor {
    Constant {
        b: f64,
    },
    BaselineIndicator {
        covariate: String,
        op: Comparison,
        threshold: f64,
        b: f64,
    },
    ProcessIndicator {
        process: String,
        op: Comparison,
        threshold: f64,
        b: f64,
    },
}

impl AccelerationFactor {
    pub fn b(&self) -> f64 {
        match self {
            AccelerationFactor::Constant { b }
            | AccelerationFactor::BaselineIndicator { b, .. }
            | AccelerationFactor::ProcessIndicator { b, .. } => *b,
        }
    }

    fn evaluate_with(&self, lookup: &impl Fn(&str) -> Option<f64>) -> Result<f64> {
        let (name, op, threshold, b) = match self {
            AccelerationFactor::Constant { b } => return Ok(*b),
            AccelerationFactor::BaselineIndicator {
                covariate,
                op,
                threshold,
                b,
            } => (covariate, op, threshold, b),
            AccelerationFactor::ProcessIndicator {
                process,
                op,
                threshold,
                b,
            } => (process, op, threshold, b),
        };
        let value = lookup(name).ok_or_else(|| Error::UnknownCovariate {
            name: name.clone(),
            subject: None,
            line: None,
        })?;
        Ok(if op.holds(value, *threshold) { *b } else { 1.0 })
    }
}

impl fmt::Display for AccelerationFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AccelerationFactor::Constant { b } => write!(f, "form=constant b={b}"),
            AccelerationFactor::BaselineIndicator {
                covariate,
                op,
                threshold,
                b,
            } => write!(
                f,
                "form=baseline_indicator cov={covariate} op={} threshold={threshold} b={b}",
                op.word()
            ),
            AccelerationFactor::ProcessIndicator {
                process,
                op,
                threshold,
                b,
            } => write!(
                f,
                "form=process_indicator process={process} op={} threshold={threshold} b={b}",
                op.word()
            ),
        }
    }
}

/// Product of acceleration factors; the empty product is the observational scenario.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AccelerationSpec {
    factors: Vec<AccelerationFactor>,
}

impl AccelerationSpec {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn constant(b: f64) -> Result<Self> {
        Self::from_factors(vec![AccelerationFactor::Constant { b }])
    }

    pub fn baseline_indicator(covariate: &str, op: Comparison, threshold: f64, b: f64) -> Result<Self> {
        Self::from_factors(vec![AccelerationFactor::BaselineIndicator {
            covariate: covariate.to_string(),
            op,
            threshold,
            b,
        }])
    }

    pub fn process_indicator(process: &str, op: Comparison, threshold: f64, b: f64) -> Result<Self> {
        Self::from_factors(vec![AccelerationFactor::ProcessIndicator {
            process: process.to_string(),
            op,
            threshold,
            b,
        }])
    }

    pub fn from_factors(factors: Vec<AccelerationFactor>) -> Result<Self> {
        for f in &factors {
            let b = f.b();
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::NonpositiveRate(b));
            }
            match f {
                AccelerationFactor::BaselineIndicator { threshold, .. }
                | AccelerationFactor::ProcessIndicator { threshold, .. }
                    if !threshold.is_finite() =>
                {
                    return Err(Error::InvalidSpec("threshold must be finite".into()))
                }
                _ => {}
            }
        }
        Ok(AccelerationSpec { factors })
    }

    /// Multiplies two specs.
    pub fn product(mut self, other: AccelerationSpec) -> Self {
        self.factors.extend(other.factors);
        self
    }

    pub fn factors(&self) -> &[AccelerationFactor] {
        &self.factors
    }

    /// True when every factor has `b == 1`, i.e. `g ≡ 1`.
    pub fn is_identity(&self) -> bool {
        self.factors.iter().all(|f| f.b() == 1.0)
    }

    /// Time-varying covariates that can change the rate.
    pub fn driving_processes(&self) -> Vec<&str> {
        self.factors
            .iter()
            .filter_map(|f| match f {
                AccelerationFactor::ProcessIndicator { process, .. } => Some(process.as_str()),
                _ => None,
            })
            .collect()
    }

    pub fn parse(src: &str) -> Result<Self> {
        let mut factors = Vec::new();
        for line in src.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(factor) = parse_factor(line)? {
                factors.push(factor);
            }
        }
        if factors.is_empty() {
            return Err(Error::InvalidSpec("no acceleration factors".into()));
        }
        Self::from_factors(factors)
    }

    /// Checks covariate and process names against a cohort schema.
    pub fn validate(&self, schema: &CovariateSchema) -> Result<()> {
        for f in &self.factors {
            let (name, wanted) = match f {
                AccelerationFactor::Constant { .. } => continue,
                AccelerationFactor::BaselineIndicator { covariate, .. } => {
                    (covariate, CovariateKind::Baseline)
                }
                AccelerationFactor::ProcessIndicator { process, .. } => {
                    (process, CovariateKind::Process)
                }
            };
            if schema.kind(name) != Some(wanted) {
                return Err(Error::UnknownCovariate {
                    name: name.clone(),
                    subject: None,
                    line: None,
                });
            }
        }
        Ok(())
    }

    /// Rate given a covariate lookup describing the state just before the time of interest.
    pub fn evaluate_with(&self, lookup: impl Fn(&str) -> Option<f64>) -> Result<f64> {
        self.factors
            .iter()
            .try_fold(1.0, |acc, f| Ok(acc * f.evaluate_with(&lookup)?))
    }

    /// `g_i(t)` on the observational clock, reading the subject's state at `t-`.
    pub fn evaluate_g(&self, subject: &SubjectPath, t: f64) -> Result<f64> {
        self.evaluate_with(|name| subject.value_before(name, t))
            .map_err(|e| with_subject(e, subject))
    }

    /// The rate in force on `(t, t + ε)` for small ε, i.e. after any change at `t`.
    pub fn rate_after(&self, subject: &SubjectPath, t: f64) -> Result<f64> {
        self.evaluate_with(|name| subject.value_at(name, t))
            .map_err(|e| with_subject(e, subject))
    }

    /// `g_i` as a step function `r` with `g_i(t) = r.left_limit(t)`.
    pub fn rate_path(&self, subject: &SubjectPath) -> Result<StepFunction> {
        let mut path = StepFunction::constant(self.rate_after(subject, 0.0)?);
        for c in subject.change_times(self.driving_processes()) {
            let rate = self.rate_after(subject, c)?;
            if rate != path.last_value() {
                path.set(c, rate);
            }
        }
        Ok(path)
    }

    /// Short human-readable description used as a scenario label.
    pub fn label(&self) -> String {
        if self.is_identity() {
            return "observational".to_string();
        }
        self.factors
            .iter()
            .map(|f| match f {
                AccelerationFactor::Constant { b } => format!("g={b}"),
                AccelerationFactor::BaselineIndicator {
                    covariate,
                    op,
                    threshold,
                    b,
                } => format!("g=1+({b}-1)*I({covariate} {} {threshold})", op.symbol()),
                AccelerationFactor::ProcessIndicator {
                    process,
                    op,
                    threshold,
                    b,
                } => format!("g=1+({b}-1)*I({process}(t-) {} {threshold})", op.symbol()),
            })
            .collect::<Vec<_>>()
            .join(" * ")
    }
}

fn with_subject(err: Error, subject: &SubjectPath) -> Error {
    match err {
        Error::UnknownCovariate { name, line, .. } => Error::UnknownCovariate {
            name,
            subject: Some(subject.id().to_string()),
            line,
        },
        other => other,
    }
}

fn parse_factor(line: &str) -> Result<Option<AccelerationFactor>> {
    let mut form = None;
    let mut b = None;
    let mut name = None;
    let mut threshold = None;
    let mut op = None;
    let mut process = None;
    for token in line.split_whitespace() {
        let (key, value) = token
            .split_once('=')
            .ok_or_else(|| Error::InvalidSpec(format!("expected key=value, got `{token}`")))?;
        let number = || {
            value
                .parse::<f64>()
                .map_err(|_| Error::InvalidSpec(format!("cannot parse `{value}` for `{key}`")))
        };
        match key {
            "form" => form = Some(value),
            "b" => b = Some(number()?),
            "cov" => name = Some(value.to_string()),
            "process" => process = Some(value.to_string()),
            "threshold" => threshold = Some(number()?),
            "op" => {
                op = Some(
                    Comparison::parse(value)
                        .ok_or_else(|| Error::InvalidSpec(format!("unknown op `{value}`")))?,
                )
            }
            other => return Err(Error::InvalidSpec(format!("unknown key `{other}`"))),
        }
    }
    let form = form.ok_or_else(|| Error::InvalidSpec(format!("missing form in `{line}`")))?;
    if form == "product" {
        if b.is_some() || name.is_some() || process.is_some() || threshold.is_some() {
            return Err(Error::InvalidSpec(
                "form=product takes no parameters; list its factors on separate lines".into(),
            ));
        }
        return Ok(None);
    }
    let b = b.ok_or_else(|| Error::InvalidSpec(format!("missing b in `{line}`")))?;
    if !(b > 0.0) {
        return Err(Error::NonpositiveRate(b));
    }
    let factor = match form {
        "constant" => AccelerationFactor::Constant { b },
        "baseline_indicator" => AccelerationFactor::BaselineIndicator {
            covariate: name
                .ok_or_else(|| Error::InvalidSpec("baseline_indicator needs cov=".into()))?,
            op: op.unwrap_or(Comparison::Gt),
            threshold: threshold
                .ok_or_else(|| Error::InvalidSpec("baseline_indicator needs threshold=".into()))?,
            b,
        },
        "process_indicator" => AccelerationFactor::ProcessIndicator {
            process: process
                .ok_or_else(|| Error::InvalidSpec("process_indicator needs process=".into()))?,
            op: op.unwrap_or(Comparison::Ne),
            threshold: threshold.unwrap_or(0.0),
            b,
        },
        other => return Err(Error::UnknownForm(other.to_string())),
    };
    Ok(Some(factor))
}

/// Parses a config and checks its names against `schema`.
pub fn parse_accel_spec(src: &str, schema: &CovariateSchema) -> Result<AccelerationSpec> {
    let spec = AccelerationSpec::parse(src)?;
    spec.validate(schema)?;
    Ok(spec)
}

impl fmt::Display for AccelerationSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.factors.is_empty() {
            return writeln!(f, "form=constant b=1");
        }
        for factor in &self.factors {
            writeln!(f, "{factor}")?;
        }
        Ok(())
    }
}
