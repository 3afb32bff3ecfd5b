//! Longitudinal counting-process data: subjects, events, risk sets and
//! left-limit covariate evaluation, plus the baseline/events CSV formats.
//!
//! Every subject enters at time 0 on the waiting-list clock. Time-varying
//! covariates are step functions whose initial value comes from the baseline
//! table (0 when absent) and which change at `cov` events.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::design::{is_identifier, DesignSpec};
use crate::error::{Error, Result};
use crate::step::StepFunction;

pub const OUTCOME_WITHDRAWAL: &str = "withdrawal";
pub const OUTCOME_DEATH: &str = "death";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovariateKind {
    /// Fixed at baseline.
    Baseline,
    /// Piecewise constant in time, changed by `cov` events.
    Process,
}

impl CovariateKind {
    fn as_str(self) -> &'static str {
        match self {
            CovariateKind::Baseline => "baseline",
            CovariateKind::Process => "process",
        }
    }
}

/// Declared covariate names and whether each is fixed or time-varying.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CovariateSchema {
    entries: Vec<(String, CovariateKind)>,
}

impl CovariateSchema {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, kind: CovariateKind) -> Self {
        self.declare(name, kind);
        self
    }

    pub fn declare(&mut self, name: &str, kind: CovariateKind) {
        match self.entries.iter_mut().find(|(n, _)| n == name) {
            Some(entry) => entry.1 = kind,
            None => self.entries.push((name.to_string(), kind)),
        }
    }

    pub fn kind(&self, name: &str) -> Option<CovariateKind> {
        self.entries
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, k)| *k)
    }

    pub fn entries(&self) -> &[(String, CovariateKind)] {
        &self.entries
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    /// Parses a `name,kind` CSV with `kind` in {baseline, process}.
    pub fn parse_csv<R: Read>(source: R) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
        let headers = reader.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["name", "kind"] {
            return Err(Error::Parse("schema header must be `name,kind`".into()));
        }
        let mut schema = CovariateSchema::new();
        for record in reader.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line() as usize);
            let name = &record[0];
            if !is_identifier(name) {
                return Err(Error::Parse(format!("line {line}: invalid covariate name `{name}`")));
            }
            let kind = match &record[1] {
                "baseline" => CovariateKind::Baseline,
                "process" => CovariateKind::Process,
                other => {
                    return Err(Error::Parse(format!(
                        "line {line}: unknown covariate kind `{other}`"
                    )))
                }
            };
            schema.declare(name, kind);
        }
        Ok(schema)
    }

    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(sink);
        writer.write_record(["name", "kind"])?;
        for (name, kind) in &self.entries {
            writer.write_record([name.as_str(), kind.as_str()])?;
        }
        writer.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    Treatment,
    Outcome,
    Censor,
    CovariateChange(String),
}

impl EventKind {
    fn csv_kind(&self) -> &'static str {
        match self {
            EventKind::Treatment => "treat",
            EventKind::Outcome => "outcome",
            EventKind::Censor => "censor",
            EventKind::CovariateChange(_) => "cov",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
    /// New covariate value for covariate changes.
    pub value: Option<f64>,
    /// Reporting-only sub-label of an outcome (e.g. `withdrawal`).
    pub label: Option<String>,
}

impl Event {
    pub fn treatment(time: f64) -> Self {
        Event {
            time,
            kind: EventKind::Treatment,
            value: None,
            label: None,
        }
    }

    pub fn outcome(time: f64) -> Self {
        Event {
            time,
            kind: EventKind::Outcome,
            value: None,
            label: None,
        }
    }

    pub fn labelled_outcome(time: f64, label: &str) -> Self {
        Event {
            label: Some(label.to_string()),
            ..Event::outcome(time)
        }
    }

    pub fn censor(time: f64) -> Self {
        Event {
            time,
            kind: EventKind::Censor,
            value: None,
            label: None,
        }
    }

    pub fn covariate(time: f64, name: &str, value: f64) -> Self {
        Event {
            time,
            kind: EventKind::CovariateChange(name.to_string()),
            value: Some(value),
            label: None,
        }
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self.kind, EventKind::Outcome | EventKind::Censor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Terminal {
    Outcome,
    Censor,
}

/// Which at-risk indicator to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RiskTarget {
    Treatment,
    Outcome,
}

/// One subject's baseline covariates and time-ordered event stream.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectPath {
    id: String,
    baseline: BTreeMap<String, f64>,
    events: Vec<Event>,
    treatment: Option<f64>,
    terminal: Option<(f64, Terminal)>,
    processes: BTreeMap<String, StepFunction>,
}

impl SubjectPath {
    /// Validates and builds a subject. Events are sorted stably by time.
    pub fn new(
        id: &str,
        baseline: BTreeMap<String, f64>,
        events: Vec<Event>,
        schema: &CovariateSchema,
    ) -> Result<Self> {
        let located = events.into_iter().map(|e| (e, None)).collect();
        Self::build(id, baseline, located, schema, None)
    }

    fn build(
        id: &str,
        baseline: BTreeMap<String, f64>,
        mut events: Vec<(Event, Option<usize>)>,
        schema: &CovariateSchema,
        baseline_line: Option<usize>,
    ) -> Result<Self> {
        for (name, value) in &baseline {
            if schema.kind(name).is_none() {
                return Err(Error::UnknownCovariate {
                    name: name.clone(),
                    subject: Some(id.to_string()),
                    line: baseline_line,
                });
            }
            if !value.is_finite() {
                return Err(Error::Parse(format!(
                    "non-finite baseline value for `{name}` of subject `{id}`"
                )));
            }
        }

        let invalid = |message: &str, line: Option<usize>| Error::InvalidEvent {
            subject: id.to_string(),
            message: message.to_string(),
            line,
        };

        for (event, line) in &events {
            if event.time < 0.0 {
                return Err(Error::NegativeTime {
                    subject: id.to_string(),
                    time: event.time,
                    line: *line,
                });
            }
            if !(event.time > 0.0 && event.time.is_finite()) {
                return Err(invalid("event time must be positive and finite", *line));
            }
            if let EventKind::CovariateChange(name) = &event.kind {
                if schema.kind(name) != Some(CovariateKind::Process) {
                    return Err(Error::UnknownCovariate {
                        name: name.clone(),
                        subject: Some(id.to_string()),
                        line: *line,
                    });
                }
                if !event.value.is_some_and(f64::is_finite) {
                    return Err(invalid("covariate change without a finite value", *line));
                }
            }
        }

        events.sort_by(|a, b| a.0.time.total_cmp(&b.0.time));

        let mut treatment = None;
        let mut terminal: Option<(f64, Terminal)> = None;
        for (event, line) in &events {
            if let Some((end, _)) = terminal {
                if event.time > end {
                    return Err(Error::EventAfterTerminal {
                        subject: id.to_string(),
                        time: event.time,
                        line: *line,
                    });
                }
            }
            match event.kind {
                EventKind::Treatment => {
                    if treatment.replace(event.time).is_some() {
                        return Err(invalid("more than one treatment event", *line));
                    }
                }
                EventKind::Outcome | EventKind::Censor => {
                    if terminal.is_some() {
                        return Err(invalid(
                            "more than one terminal event (outcome and censor are exclusive)",
                            *line,
                        ));
                    }
                    let which = if event.kind == EventKind::Outcome {
                        Terminal::Outcome
                    } else {
                        Terminal::Censor
                    };
                    terminal = Some((event.time, which));
                }
                EventKind::CovariateChange(_) => {}
            }
        }

        let mut processes = BTreeMap::new();
        for (name, kind) in schema.entries() {
            if *kind != CovariateKind::Process {
                continue;
            }
            let mut path = StepFunction::constant(baseline.get(name).copied().unwrap_or(0.0));
            for (event, _) in &events {
                if matches!(&event.kind, EventKind::CovariateChange(n) if n == name) {
                    path.set(event.time, event.value.unwrap());
                }
            }
            processes.insert(name.clone(), path);
        }

        Ok(SubjectPath {
            id: id.to_string(),
            baseline,
            events: events.into_iter().map(|(e, _)| e).collect(),
            treatment,
            terminal,
            processes,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn baseline(&self) -> &BTreeMap<String, f64> {
        &self.baseline
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn treatment_time(&self) -> Option<f64> {
        self.treatment
    }

    pub fn terminal(&self) -> Option<(f64, Terminal)> {
        self.terminal
    }

    pub fn terminal_time(&self) -> Option<f64> {
        self.terminal.map(|(t, _)| t)
    }

    pub fn outcome_time(&self) -> Option<f64> {
        match self.terminal {
            Some((t, Terminal::Outcome)) => Some(t),
            _ => None,
        }
    }

    pub fn outcome_label(&self) -> Option<&str> {
        self.events
            .iter()
            .find(|e| e.kind == EventKind::Outcome)
            .and_then(|e| e.label.as_deref())
    }

    /// Last time at which the subject is at risk for treatment.
    pub fn treatment_exit(&self) -> f64 {
        let end = self.terminal_time().unwrap_or(f64::INFINITY);
        self.treatment.map_or(end, |a| a.min(end))
    }

    /// Last time at which the subject is at risk for the outcome.
    pub fn outcome_exit(&self) -> f64 {
        self.terminal_time().unwrap_or(f64::INFINITY)
    }

    pub fn process(&self, name: &str) -> Option<&StepFunction> {
        self.processes.get(name)
    }

    /// Covariate value on the open interval just before `t`.
    pub fn value_before(&self, name: &str, t: f64) -> Option<f64> {
        match self.processes.get(name) {
            Some(path) => Some(path.left_limit(t)),
            None => self.baseline.get(name).copied(),
        }
    }

    /// Covariate value at `t` including any change at `t`.
    pub fn value_at(&self, name: &str, t: f64) -> Option<f64> {
        match self.processes.get(name) {
            Some(path) => Some(path.value_at(t)),
            None => self.baseline.get(name).copied(),
        }
    }

    /// Sorted distinct change times of the named time-varying covariates.
    pub fn change_times<'a>(&self, names: impl IntoIterator<Item = &'a str>) -> Vec<f64> {
        let mut times: Vec<f64> = names
            .into_iter()
            .filter_map(|n| self.processes.get(n))
            .flat_map(|p| p.times().iter().copied())
            .collect();
        times.sort_by(f64::total_cmp);
        times.dedup();
        times
    }
}

/// Left-continuous at-risk indicator: a subject is at risk at its own jump time.
pub fn at_risk(subject: &SubjectPath, target: RiskTarget, t: f64) -> bool {
    match target {
        RiskTarget::Treatment => t <= subject.treatment_exit(),
        RiskTarget::Outcome => t <= subject.outcome_exit(),
    }
}

/// Design row `L(t-)`: every covariate evaluated strictly before `t`.
pub fn covariate_row(subject: &SubjectPath, design: &DesignSpec, t: f64) -> Result<Vec<f64>> {
    design
        .terms()
        .iter()
        .map(|term| {
            term.evaluate(|name| subject.value_before(name, t))
                .ok_or_else(|| Error::UnknownCovariate {
                    name: term.covariate().unwrap_or_default().to_string(),
                    subject: Some(subject.id().to_string()),
                    line: None,
                })
        })
        .collect()
}

/// Design rows of one subject as a step schedule: `rows[k]` applies on
/// `(times[k - 1], times[k]]`, with `rows[0]` applying from time 0.
#[derive(Debug, Clone)]
pub(crate) struct RowSchedule {
    pub times: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
}

impl RowSchedule {
    pub fn build(subject: &SubjectPath, design: &DesignSpec) -> Result<Self> {
        let names: Vec<&str> = design.terms().iter().filter_map(|t| t.covariate()).collect();
        let times = subject.change_times(names);
        let mut rows = Vec::with_capacity(times.len() + 1);
        rows.push(covariate_row(subject, design, 0.0)?);
        for &c in &times {
            rows.push(
                design
                    .terms()
                    .iter()
                    .map(|term| term.evaluate(|name| subject.value_at(name, c)).unwrap_or(f64::NAN))
                    .collect(),
            );
        }
        Ok(RowSchedule { times, rows })
    }

    /// Index of the row in force just before `t`, advancing a cursor monotonically.
    pub fn advance(&self, cursor: &mut usize, t: f64) -> usize {
        while *cursor < self.times.len() && self.times[*cursor] < t {
            *cursor += 1;
        }
        *cursor
    }

    #[cfg(test)]
    pub fn row_before(&self, t: f64) -> &[f64] {
        &self.rows[self.times.partition_point(|&c| c < t)]
    }
}

/// Study population over `[0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    subjects: Vec<SubjectPath>,
    horizon: f64,
    schema: CovariateSchema,
}

impl Cohort {
    pub fn new(subjects: Vec<SubjectPath>, horizon: f64, schema: CovariateSchema) -> Result<Self> {
        if !(horizon >= 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidCohort(format!("invalid horizon {horizon}")));
        }
        let mut seen = HashSet::new();
        for s in &subjects {
            if !seen.insert(s.id()) {
                return Err(Error::InvalidCohort(format!(
                    "duplicate subject_id `{}`",
                    s.id()
                )));
            }
            if let Some(e) = s.events().iter().find(|e| e.time > horizon) {
                return Err(Error::InvalidCohort(format!(
                    "subject `{}` has an event at {} beyond horizon {horizon}",
                    s.id(),
                    e.time
                )));
            }
        }
        Ok(Cohort {
            subjects,
            horizon,
            schema,
        })
    }

    pub fn subjects(&self) -> &[SubjectPath] {
        &self.subjects
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn schema(&self) -> &CovariateSchema {
        &self.schema
    }

    pub fn len(&self) -> usize {
        self.subjects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subjects.is_empty()
    }

    pub(crate) fn subject_refs(&self) -> Vec<&SubjectPath> {
        self.subjects.iter().collect()
    }

    pub fn summary(&self) -> CohortSummary {
        let mut summary = CohortSummary {
            subjects: self.subjects.len(),
            ..Default::default()
        };
        for s in &self.subjects {
            if s.treatment_time().is_some() {
                summary.treated += 1;
            }
            match s.terminal() {
                Some((_, Terminal::Outcome)) => {
                    summary.outcomes += 1;
                    if s.outcome_label() == Some(OUTCOME_WITHDRAWAL) {
                        summary.withdrawals += 1;
                    }
                }
                Some((_, Terminal::Censor)) => summary.censored += 1,
                None => {}
            }
        }
        summary
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CohortSummary {
    pub subjects: usize,
    pub treated: usize,
    pub outcomes: usize,
    pub withdrawals: usize,
    pub censored: usize,
}

impl fmt::Display for CohortSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "subjects={} treated={} outcomes={} withdrawals={} censored={}",
            self.subjects, self.treated, self.outcomes, self.withdrawals, self.censored
        )
    }
}

/// Which event stream to pool across subjects.
#[derive(Debug, Clone, PartialEq)]
pub enum EventSelector {
    Treatment,
    Outcome,
    Censor,
    Covariate(String),
}

impl EventSelector {
    fn matches(&self, kind: &EventKind) -> bool {
        match (self, kind) {
            (EventSelector::Treatment, EventKind::Treatment)
            | (EventSelector::Outcome, EventKind::Outcome)
            | (EventSelector::Censor, EventKind::Censor) => true,
            (EventSelector::Covariate(a), EventKind::CovariateChange(b)) => a == b,
            _ => false,
        }
    }
}

/// Distinct event times across subjects with tie multiplicities.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PooledTimes {
    pub times: Vec<f64>,
    pub counts: Vec<usize>,
}

impl PooledTimes {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

pub fn pooled_event_times(cohort: &Cohort, selector: &EventSelector) -> PooledTimes {
    pooled_times_of(cohort.subjects.iter(), selector)
}

pub(crate) fn pooled_times_of<'a>(
    subjects: impl IntoIterator<Item = &'a SubjectPath>,
    selector: &EventSelector,
) -> PooledTimes {
    let mut all: Vec<f64> = subjects
        .into_iter()
        .flat_map(|s| s.events().iter())
        .filter(|e| selector.matches(&e.kind))
        .map(|e| e.time)
        .collect();
    all.sort_by(f64::total_cmp);
    let mut pooled = PooledTimes::default();
    for t in all {
        if pooled.times.last() == Some(&t) {
            *pooled.counts.last_mut().unwrap() += 1;
        } else {
            pooled.times.push(t);
            pooled.counts.push(1);
        }
    }
    pooled
}

/// Reads a cohort from the baseline and events CSV formats.
///
/// When `horizon` is `None` it defaults to the latest event time.
pub fn parse_cohort<B: Read, E: Read>(
    baseline_source: B,
    events_source: E,
    schema: &CovariateSchema,
    horizon: Option<f64>,
) -> Result<Cohort> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(baseline_source);
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if headers.first().map(String::as_str) != Some("subject_id") {
        return Err(Error::Parse(
            "baseline header must start with `subject_id`".into(),
        ));
    }
    for name in &headers[1..] {
        if schema.kind(name).is_none() {
            return Err(Error::UnknownCovariate {
                name: name.clone(),
                subject: None,
                line: Some(1),
            });
        }
    }

    struct Pending {
        id: String,
        line: usize,
        baseline: BTreeMap<String, f64>,
        events: Vec<(Event, Option<usize>)>,
    }

    let mut pending: Vec<Pending> = Vec::new();
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let id = record[0].to_string();
        if index.contains_key(&id) {
            return Err(Error::DuplicateSubject { subject: id, line });
        }
        let mut baseline = BTreeMap::new();
        for (name, cell) in headers[1..].iter().zip(record.iter().skip(1)) {
            if cell.is_empty() {
                continue;
            }
            let value: f64 = cell.parse().map_err(|_| {
                Error::Parse(format!(
                    "line {line}: subject `{id}`: cannot parse `{cell}` for `{name}`"
                ))
            })?;
            baseline.insert(name.clone(), value);
        }
        index.insert(id.clone(), pending.len());
        pending.push(Pending {
            id,
            line,
            baseline,
            events: Vec::new(),
        });
    }

    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(events_source);
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if headers != ["subject_id", "time", "kind", "name", "value"] {
        return Err(Error::Parse(
            "events header must be `subject_id,time,kind,name,value`".into(),
        ));
    }
    let mut latest = 0.0f64;
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let id = &record[0];
        let slot = *index.get(id).ok_or_else(|| Error::UnknownSubject {
            subject: id.to_string(),
            line: Some(line),
        })?;
        let time: f64 = record[1].parse().map_err(|_| {
            Error::Parse(format!(
                "line {line}: subject `{id}`: cannot parse time `{}`",
                &record[1]
            ))
        })?;
        let name = &record[3];
        let value = &record[4];
        let event = match &record[2] {
            "treat" => Event::treatment(time),
            "censor" => Event::censor(time),
            "outcome" if name.is_empty() => Event::outcome(time),
            "outcome" => Event::labelled_outcome(time, name),
            "cov" => {
                let v: f64 = value.parse().map_err(|_| {
                    Error::Parse(format!(
                        "line {line}: subject `{id}`: cannot parse value `{value}`"
                    ))
                })?;
                Event::covariate(time, name, v)
            }
            other => {
                return Err(Error::Parse(format!(
                    "line {line}: subject `{id}`: unknown event kind `{other}`"
                )))
            }
        };
        if time.is_finite() {
            latest = latest.max(time);
        }
        pending[slot].events.push((event, Some(line)));
    }

    let subjects = pending
        .into_iter()
        .map(|p| SubjectPath::build(&p.id, p.baseline, p.events, schema, Some(p.line)))
        .collect::<Result<Vec<_>>>()?;
    Cohort::new(subjects, horizon.unwrap_or(latest), schema.clone())
}

/// Writes the baseline and events CSVs; floats use round-trip formatting.
pub fn write_cohort<B: Write, E: Write>(cohort: &Cohort, baseline_sink: B, events_sink: E) -> Result<()> {
    let columns: Vec<&str> = cohort
        .schema()
        .names()
        .filter(|name| cohort.subjects.iter().any(|s| s.baseline.contains_key(*name)))
        .collect();

    let mut writer = csv::Writer::from_writer(baseline_sink);
    let mut header = vec!["subject_id"];
    header.extend(columns.iter().copied());
    writer.write_record(&header)?;
    for s in &cohort.subjects {
        let mut row = vec![s.id.clone()];
        row.extend(
            columns
                .iter()
                .map(|c| s.baseline.get(*c).map_or(String::new(), |v| v.to_string())),
        );
        writer.write_record(&row)?;
    }
    writer.flush()?;

    let mut writer = csv::Writer::from_writer(events_sink);
    writer.write_record(["subject_id", "time", "kind", "name", "value"])?;
    for s in &cohort.subjects {
        for e in &s.events {
            let name = match &e.kind {
                EventKind::CovariateChange(n) => n.clone(),
                _ => e.label.clone().unwrap_or_default(),
            };
            let value = e.value.map_or(String::new(), |v| v.to_string());
            writer.write_record([
                s.id.as_str(),
                &e.time.to_string(),
                e.kind.csv_kind(),
                &name,
                &value,
            ])?;
        }
    }
    writer.flush()?;
    Ok(())
}

pub const BASELINE_FILE: &str = "baseline.csv";
pub const EVENTS_FILE: &str = "events.csv";
pub const SCHEMA_FILE: &str = "schema.csv";

/// Reads a cohort directory holding `baseline.csv`, `events.csv` and `schema.csv`.
///
/// Without `schema.csv`, every baseline column is declared fixed and every
/// `cov` name is declared time-varying.
pub fn read_cohort_dir(dir: &Path, horizon: Option<f64>) -> Result<Cohort> {
    let open = |name: &str| {
        let path = dir.join(name);
        File::open(&path).map_err(|e| {
            Error::Io(std::io::Error::new(
                e.kind(),
                format!("{}: {e}", path.display()),
            ))
        })
    };
    let schema_path = dir.join(SCHEMA_FILE);
    let schema = if schema_path.exists() {
        CovariateSchema::parse_csv(open(SCHEMA_FILE)?)?
    } else {
        infer_schema(open(BASELINE_FILE)?, open(EVENTS_FILE)?)?
    };
    parse_cohort(open(BASELINE_FILE)?, open(EVENTS_FILE)?, &schema, horizon)
}

fn infer_schema<B: Read, E: Read>(baseline: B, events: E) -> Result<CovariateSchema> {
    let mut schema = CovariateSchema::new();
    let mut reader = csv::Reader::from_reader(baseline);
    for name in reader.headers()?.iter().skip(1) {
        schema.declare(name.trim(), CovariateKind::Baseline);
    }
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(events);
    for record in reader.records() {
        let record = record?;
        if record.get(2) == Some("cov") {
            if let Some(name) = record.get(3) {
                schema.declare(name, CovariateKind::Process);
            }
        }
    }
    Ok(schema)
}

pub fn write_cohort_dir(cohort: &Cohort, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_cohort(
        cohort,
        File::create(dir.join(BASELINE_FILE))?,
        File::create(dir.join(EVENTS_FILE))?,
    )?;
    cohort.schema().write_csv(File::create(dir.join(SCHEMA_FILE))?)
}
