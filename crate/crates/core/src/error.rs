use std::fmt;

/// Errors raised by the models, the engine and the study drivers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument lies outside the domain of a physical law.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("index {index} out of range 1..={max} for {what}")]
    Index {
        what: &'static str,
        index: usize,
        max: usize,
    },

    /// Every violated invariant of a configuration, in declaration order.
    #[error("{}", Violations(.0))]
    Validation(Vec<String>),

    #[error("numeric abort at t = {t} s: {reason}")]
    NumericAbort { t: f64, reason: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

struct Violations<'a>(&'a [String]);

impl fmt::Display for Violations<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} validation error(s)", self.0.len())?;
        for v in self.0 {
            write!(f, "\n  - {v}")?;
        }
        Ok(())
    }
}

/// Collects invariant violations under a dotted field prefix.
#[derive(Debug, Default)]
pub struct Checker {
    prefix: String,
    violations: Vec<String>,
}

impl Checker {
    pub fn new(prefix: impl Into<String>) -> Self {
        Self {
            prefix: prefix.into(),
            violations: Vec::new(),
        }
    }

    pub fn check(&mut self, ok: bool, field: &str, msg: impl FnOnce() -> String) {
        if !ok {
            let path = if self.prefix.is_empty() {
                field.to_string()
            } else {
                format!("{}.{}", self.prefix, field)
            };
            self.violations.push(format!("{path}: {}", msg()));
        }
    }

    pub fn finite(&mut self, field: &str, value: f64) {
        self.check(value.is_finite(), field, || format!("must be finite, got {value}"));
    }

    pub fn positive(&mut self, field: &str, value: f64) {
        self.check(value > 0.0 && value.is_finite(), field, || {
            format!("must be > 0, got {value}")
        });
    }

    pub fn non_negative(&mut self, field: &str, value: f64) {
        self.check(value >= 0.0 && value.is_finite(), field, || {
            format!("must be >= 0, got {value}")
        });
    }

    pub fn extend(&mut self, other: Vec<String>) {
        self.violations.extend(other);
    }

    pub fn into_violations(self) -> Vec<String> {
        self.violations
    }

    pub fn finish(self) -> Result<()> {
        if self.violations.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(self.violations))
        }
    }
}
