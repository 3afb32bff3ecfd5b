//! Covariate expressions and regression designs.
//!
//! A design is an ordered list of terms, one per line in its text form:
//!
//! ```text
//! # treatment model
//! I(x_lci > 6)
//! x_disease
//! physical
//! I(dialysis_2yr != 0)
//! ```
//!
//! The intercept `1` is always the first term unless a `-1` line disables it.

use std::fmt;

use crate::cohort::CovariateSchema;
use crate::error::{Error, Result};

/// Comparison operator used by indicator terms and indicator accelerations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparison {
    Gt,
    Ge,
    Lt,
    Le,
    Eq,
    Ne,
}

impl Comparison {
    pub fn holds(self, lhs: f64, rhs: f64) -> bool {
        match self {
            Comparison::Gt => lhs > rhs,
            Comparison::Ge => lhs >= rhs,
            Comparison::Lt => lhs < rhs,
            Comparison::Le => lhs <= rhs,
            Comparison::Eq => lhs == rhs,
            Comparison::Ne => lhs != rhs,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Comparison::Gt => ">",
            Comparison::Ge => ">=",
            Comparison::Lt => "<",
            Comparison::Le => "<=",
            Comparison::Eq => "==",
            Comparison::Ne => "!=",
        }
    }

    pub fn word(self) -> &'static str {
        match self {
            Comparison::Gt => "gt",
            Comparison::Ge => "ge",
            Comparison::Lt => "lt",
            Comparison::Le => "le",
            Comparison::Eq => "eq",
            Comparison::Ne => "ne",
        }
    }

    /// Accepts either the symbol (`>=`) or the word form (`ge`).
    pub fn parse(s: &str) -> Option<Self> {
        let op = match s.trim() {
            ">" | "gt" => Comparison::Gt,
            ">=" | "ge" => Comparison::Ge,
            "<" | "lt" => Comparison::Lt,
            "<=" | "le" => Comparison::Le,
            "==" | "=" | "eq" => Comparison::Eq,
            "!=" | "ne" => Comparison::Ne,
            _ => return None,
        };
        Some(op)
    }
}

/// One column of a design matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum Term {
    Intercept,
    Covariate(String),
    Indicator {
        name: String,
        op: Comparison,
        threshold: f64,
    },
}

impl Term {
    pub fn covariate(&self) -> Option<&str> {
        match self {
            Term::Intercept => None,
            Term::Covariate(name) | Term::Indicator { name, .. } => Some(name),
        }
    }

    /// Evaluates the term given a covariate lookup; `None` if the covariate is missing.
    pub fn evaluate(&self, lookup: impl Fn(&str) -> Option<f64>) -> Option<f64> {
        match self {
            Term::Intercept => Some(1.0),
            Term::Covariate(name) => lookup(name),
            Term::Indicator {
                name,
                op,
                threshold,
            } => lookup(name).map(|v| if op.holds(v, *threshold) { 1.0 } else { 0.0 }),
        }
    }

    pub fn parse(src: &str) -> Result<Term> {
        let s = src.trim();
        if s == "1" {
            return Ok(Term::Intercept);
        }
        if let Some(inner) = s.strip_prefix("I(").and_then(|r| r.strip_suffix(')')) {
            return parse_indicator(inner)
                .ok_or_else(|| Error::InvalidDesign(format!("cannot parse indicator `{s}`")));
        }
        if is_identifier(s) {
            return Ok(Term::Covariate(s.to_string()));
        }
        Err(Error::InvalidDesign(format!("cannot parse term `{s}`")))
    }
}

fn parse_indicator(inner: &str) -> Option<Term> {
    // two-character operators first so `>=` is not read as `>`
    for sym in [">=", "<=", "==", "!=", ">", "<"] {
        if let Some(pos) = inner.find(sym) {
            let name = inner[..pos].trim();
            let threshold: f64 = inner[pos + sym.len()..].trim().parse().ok()?;
            if !is_identifier(name) || !threshold.is_finite() {
                return None;
            }
            return Some(Term::Indicator {
                name: name.to_string(),
                op: Comparison::parse(sym)?,
                threshold,
            });
        }
    }
    None
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Intercept => write!(f, "1"),
            Term::Covariate(name) => write!(f, "{name}"),
            Term::Indicator {
                name,
                op,
                threshold,
            } => write!(f, "I({name} {} {threshold})", op.symbol()),
        }
    }
}

/// Ordered regressor list for the additive treatment model.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignSpec {
    terms: Vec<Term>,
}

impl DesignSpec {
    /// Builds a design; the intercept is prepended unless `intercept` is false.
    pub fn new(terms: Vec<Term>, intercept: bool) -> Result<Self> {
        let mut out: Vec<Term> = terms.into_iter().filter(|t| *t != Term::Intercept).collect();
        if intercept {
            out.insert(0, Term::Intercept);
        }
        if out.is_empty() {
            return Err(Error::InvalidDesign("design has no terms".into()));
        }
        Ok(DesignSpec { terms: out })
    }

    pub fn intercept_only() -> Self {
        DesignSpec {
            terms: vec![Term::Intercept],
        }
    }

    /// Parses the line-oriented design format; `#` starts a comment.
    pub fn parse(src: &str) -> Result<Self> {
        let mut terms = Vec::new();
        let mut intercept = true;
        for line in src.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            match line {
                "-1" | "0" => intercept = false,
                _ => terms.push(Term::parse(line)?),
            }
        }
        DesignSpec::new(terms, intercept)
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn has_intercept(&self) -> bool {
        self.terms.first() == Some(&Term::Intercept)
    }

    pub fn labels(&self) -> Vec<String> {
        self.terms.iter().map(|t| t.to_string()).collect()
    }

    /// Checks that every referenced covariate is declared.
    pub fn validate(&self, schema: &CovariateSchema) -> Result<()> {
        for name in self.terms.iter().filter_map(Term::covariate) {
            if schema.kind(name).is_none() {
                return Err(Error::UnknownCovariate {
                    name: name.to_string(),
                    subject: None,
                    line: None,
                });
            }
        }
        Ok(())
    }
}

impl fmt::Display for DesignSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for term in &self.terms {
            writeln!(f, "{term}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_terms() {
        assert_eq!(Term::parse("1").unwrap(), Term::Intercept);
        assert_eq!(
            Term::parse(" I( x_lci >6 ) ").unwrap(),
            Term::Indicator {
                name: "x_lci".into(),
                op: Comparison::Gt,
                threshold: 6.0
            }
        );
        assert_eq!(
            Term::parse("I(dialysis_2yr != 0)").unwrap(),
            Term::Indicator {
                name: "dialysis_2yr".into(),
                op: Comparison::Ne,
                threshold: 0.0
            }
        );
        assert!(matches!(
            Term::parse("I(a >= 1.5)").unwrap(),
            Term::Indicator {
                op: Comparison::Ge,
                ..
            }
        ));
        assert!(Term::parse("I(x > )").is_err());
        assert!(Term::parse("2x").is_err());
    }

    #[test]
    fn display_round_trips() {
        for src in ["1", "physical", "I(x_lci > 6)", "I(d <= 0.5)"] {
            let t = Term::parse(src).unwrap();
            assert_eq!(Term::parse(&t.to_string()).unwrap(), t);
        }
    }

    #[test]
    fn intercept_is_first_unless_disabled() {
        let d = DesignSpec::parse("x\n1\n# comment\nI(y > 0)\n").unwrap();
        assert_eq!(d.labels(), vec!["1", "x", "I(y > 0)"]);
        let d = DesignSpec::parse("-1\nx\n").unwrap();
        assert!(!d.has_intercept());
        assert_eq!(d.len(), 1);
        assert!(DesignSpec::parse("-1\n").is_err());
    }
}
