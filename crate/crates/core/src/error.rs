use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: duplicate subject_id `{subject}`")]
    DuplicateSubject { subject: String, line: usize },

    #[error("{}negative time {time} for subject `{subject}`", line_prefix(*.line))]
    NegativeTime {
        subject: String,
        time: f64,
        line: Option<usize>,
    },

    #[error("{}event at time {time} after terminal event for subject `{subject}`", line_prefix(*.line))]
    EventAfterTerminal {
        subject: String,
        time: f64,
        line: Option<usize>,
    },

    #[error("{}unknown covariate `{name}`{}", line_prefix(*.line), subject_suffix(.subject))]
    UnknownCovariate {
        name: String,
        subject: Option<String>,
        line: Option<usize>,
    },

    #[error("{}invalid event for subject `{subject}`: {message}", line_prefix(*.line))]
    InvalidEvent {
        subject: String,
        message: String,
        line: Option<usize>,
    },

    #[error("{}unknown subject `{subject}`", line_prefix(*.line))]
    UnknownSubject { subject: String, line: Option<usize> },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid cohort: {0}")]
    InvalidCohort(String),

    #[error("invalid design: {0}")]
    InvalidDesign(String),

    #[error("design mismatch: coefficients have {coefficients} terms, design has {design}")]
    DesignMismatch { coefficients: usize, design: usize },

    #[error("no treatment events in cohort")]
    NoTreatmentEvents,

    #[error("unknown acceleration form `{0}`")]
    UnknownForm(String),

    #[error("nonpositive rate {0}")]
    NonpositiveRate(f64),

    #[error("invalid acceleration spec: {0}")]
    InvalidSpec(String),

    #[error("empty weighted risk set at time {time}")]
    EmptyRiskSet { time: f64 },

    #[error("cumulative hazard increment {increment} > 1 at time {time}")]
    IncrementAboveOne { time: f64, increment: f64 },

    #[error("empty collection")]
    EmptyCollection,

    #[error("bootstrap: {failed} of {reps} replicates failed")]
    TooManyFailedReplicates { failed: usize, reps: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn line_prefix(line: Option<usize>) -> String {
    match line {
        Some(l) => format!("line {l}: "),
        None => String::new(),
    }
}

fn subject_suffix(subject: &Option<String>) -> String {
    match subject {
        Some(s) => format!(" for subject `{s}`"),
        None => String::new(),
    }
}
