//! Scenario runner behind the `ruinkit` binary.
//!
//! Each command takes a [`Scenario`] and renders either a CSV table or a
//! JSON document. Failures carry the process exit code: 1 for bad
//! configuration, 2 when the model is in neither asymptotic regime, 3 when a
//! sampling budget ran out (partial output is still produced).

use std::fmt;

use ruinkit::analytic::{
    asymptotic_report, limit_overshoot_tail, p_infinity_df, AnalyticError, GammaKind,
};
use ruinkit::claims::{classify_regime, RegimeTag};
use ruinkit::numerics::Tolerance;
use ruinkit::simulate::{estimate_deficit_distribution, run_study, EmpiricalDf, SimError};
use serde::Serialize;

mod scenario;

pub use scenario::{Outputs, Scenario};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    RegimeUnavailable(String),
    /// A sampling budget ran out; `partial` holds what was produced anyway.
    BudgetExceeded { message: String, partial: String },
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Failed(_) => 1,
            Self::RegimeUnavailable(_) => 2,
            Self::BudgetExceeded { .. } => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(m) => write!(f, "configuration error: {m}"),
            Self::RegimeUnavailable(m) => write!(f, "regime unavailable: {m}"),
            Self::BudgetExceeded { message, .. } => write!(f, "sampling budget exceeded: {message}"),
            Self::Failed(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<AnalyticError> for CliError {
    fn from(e: AnalyticError) -> Self {
        match e {
            AnalyticError::RegimeUnavailable(m) => Self::RegimeUnavailable(m),
            AnalyticError::InvalidArgument(m) => Self::Config(m),
            other => Self::Failed(other.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(m) => Self::Config(m),
            SimError::RegimeUnavailable(m) => Self::RegimeUnavailable(m),
            SimError::Mechanism(m) => Self::Config(m.to_string()),
            other => Self::Failed(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    SolveR,
    Asymptotics,
    Overshoot,
    Simulate,
    Constant,
}

/// Runs `cmd` and returns the rendered output.
pub fn run(cmd: Command, scenario: &Scenario) -> Result<String, CliError> {
    match cmd {
        Command::SolveR => solve_r(scenario),
        Command::Asymptotics => asymptotics(scenario),
        Command::Overshoot => overshoot(scenario),
        Command::Simulate => simulate(scenario),
        Command::Constant => constant(scenario),
    }
}

/// Worker count from `RUINKIT_THREADS`, defaulting to the available cores.
pub fn worker_count(var: Option<&str>) -> Result<usize, CliError> {
    match var {
        None => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
        Some(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(CliError::Config(format!("RUINKIT_THREADS must be a positive integer, got {v:?}"))),
        },
    }
}

fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        "NA".into()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), num)
}

fn csv_writer(header: &[&str]) -> Result<csv::Writer<Vec<u8>>, CliError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header).map_err(|e| CliError::Failed(e.to_string()))?;
    Ok(w)
}

fn push(w: &mut csv::Writer<Vec<u8>>, row: &[String]) -> Result<(), CliError> {
    w.write_record(row).map_err(|e| CliError::Failed(e.to_string()))
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String, CliError> {
    let bytes = w.into_inner().map_err(|e| CliError::Failed(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Failed(e.to_string()))
}

#[derive(Serialize)]
struct RegimeLine {
    regime: &'static str,
    #[serde(rename = "R", skip_serializing_if = "Option::is_none")]
    r: Option<f64>,
}

fn solve_r(s: &Scenario) -> Result<String, CliError> {
    let line = match classify_regime(&s.model, Tolerance::default()) {
        RegimeTag::CramerLight { r } => RegimeLine { regime: "cramer", r: Some(r) },
        RegimeTag::SubexponentialHeavy => RegimeLine { regime: "heavy", r: None },
        RegimeTag::Neither { diagnostic } => return Err(CliError::RegimeUnavailable(diagnostic)),
    };
    let text = serde_json::to_string(&line).map_err(|e| CliError::Failed(e.to_string()))?;
    Ok(text + "\n")
}

fn constant(s: &Scenario) -> Result<String, CliError> {
    let report = asymptotic_report(&s.model, &s.mechanism, &s.u_grid)?;
    let text = serde_json::to_string_pretty(&report).map_err(|e| CliError::Failed(e.to_string()))?;
    Ok(text + "\n")
}

fn asymptotics(s: &Scenario) -> Result<String, CliError> {
    let report = asymptotic_report(&s.model, &s.mechanism, &s.u_grid)?;
    let mut w = csv_writer(&[
        "u",
        "psi_cl_analytic",
        "psi_modified_analytic",
        "psi_mc",
        "psi_mc_ci_lo",
        "psi_mc_ci_hi",
        "ratio_mc",
        "ratio_mc_ci_lo",
        "ratio_mc_ci_hi",
        "C_predicted",
    ])?;
    let mut exceeded = 0;
    for row in &report.rows {
        let study = run_study(&s.model, &s.mechanism, row.u, &s.sim)?;
        let est = study.modified();
        exceeded += est.budget_exceeded;
        let ratio = study.ratio().ok();
        push(
            &mut w,
            &[
                num(row.u),
                num(row.psi_cl),
                opt(row.psi_modified),
                num(est.p_hat),
                num(est.ci95.0),
                num(est.ci95.1),
                opt(ratio.map(|r| r.ratio)),
                opt(ratio.map(|r| r.ci95.0)),
                opt(ratio.map(|r| r.ci95.1)),
                opt(report.c_constant),
            ],
        )?;
    }
    let out = finish(w)?;
    budget_check(exceeded, out)
}

fn simulate(s: &Scenario) -> Result<String, CliError> {
    let mut w = csv_writer(&[
        "u",
        "p_hat",
        "stderr",
        "ci_lo",
        "ci_hi",
        "n",
        "barrier",
        "truncation_bias_bound",
        "budget_exceeded",
    ])?;
    let mut exceeded = 0;
    for &u in &s.u_grid {
        let study = run_study(&s.model, &s.mechanism, u, &s.sim)?;
        let est = study.modified();
        exceeded += est.budget_exceeded;
        push(
            &mut w,
            &[
                num(u),
                num(est.p_hat),
                num(est.stderr),
                num(est.ci95.0),
                num(est.ci95.1),
                est.n.to_string(),
                num(study.barrier.m),
                num(est.truncation_bias_bound),
                est.budget_exceeded.to_string(),
            ],
        )?;
    }
    let out = finish(w)?;
    budget_check(exceeded, out)
}

fn budget_check(exceeded: u64, out: String) -> Result<String, CliError> {
    if exceeded == 0 {
        Ok(out)
    } else {
        Err(CliError::BudgetExceeded {
            message: format!("{exceeded} paths hit max_events_per_path"),
            partial: out,
        })
    }
}

fn overshoot(s: &Scenario) -> Result<String, CliError> {
    let u = *s.u_grid.last().expect("validated non-empty");
    let regime = classify_regime(&s.model, Tolerance::default());
    if let RegimeTag::Neither { diagnostic } = &regime {
        return Err(CliError::RegimeUnavailable(diagnostic.clone()));
    }
    let (sample, shortfall) = match estimate_deficit_distribution(&s.model, u, s.outputs.n_conditional, &s.sim) {
        Ok(df) => (df, None),
        Err(SimError::SampleBudgetExceeded { partial, wanted, paths }) => {
            let msg = format!("{} of {wanted} conditional deficits from {paths} paths at u = {u}", partial.len());
            (partial, Some(msg))
        }
        Err(e) => return Err(e.into()),
    };
    let model = &s.model;
    let (limit_tail, ks): (TailFn<'_>, Option<f64>) = match regime {
        RegimeTag::CramerLight { r } => {
            let ks = ks_against(&sample, |x| p_infinity_df(model, r, x))?;
            (Box::new(move |x| p_infinity_df(model, r, x).map(|d| 1.0 - d)), ks)
        }
        _ => (Box::new(|x| limit_overshoot_tail(GammaKind::HeavyTail, model, x)), None),
    };
    let mut w = csv_writer(&["x", "empirical_tail_at_u", "p_infinity_tail", "ks_stat"])?;
    for x in s.x_grid() {
        let emp = (!sample.is_empty()).then(|| sample.tail(x));
        push(&mut w, &[num(x), opt(emp), num(limit_tail(x)?), opt(ks)])?;
    }
    let out = finish(w)?;
    match shortfall {
        None => Ok(out),
        Some(message) => Err(CliError::BudgetExceeded { message, partial: out }),
    }
}

type TailFn<'a> = Box<dyn Fn(f64) -> Result<f64, AnalyticError> + 'a>;

fn ks_against<F>(sample: &EmpiricalDf, df: F) -> Result<Option<f64>, CliError>
where
    F: Fn(f64) -> Result<f64, AnalyticError>,
{
    if sample.is_empty() {
        return Ok(None);
    }
    let mut failure = None;
    let ks = sample.ks_distance(|x| {
        df(x).unwrap_or_else(|e| {
            failure.get_or_insert(e);
            f64::NAN
        })
    });
    match failure {
        Some(e) => Err(e.into()),
        None => Ok(Some(ks)),
    }
}


#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
mod book_cli {}
