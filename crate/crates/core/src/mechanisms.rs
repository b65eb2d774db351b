//! Modified-ruin mechanisms.
//!
//! A mechanism only acts while the surplus is negative. Because the surplus
//! can enter `(-∞, 0)` only through a claim, every excursion starts at a
//! strictly negative level `-d` and, if the mechanism lets it live, ends
//! exactly at zero (the drift is continuous). [`resolve_excursion`] plays
//! out one such excursion claim by claim and reports whether the path was
//! ruined or recovered.
//!
//! Clock conventions:
//!
//! * Parisian clocks measure the time spent below zero in the current
//!   excursion and reset at every recovery.
//! * Cumulative Parisian clocks spend a budget carried in [`MechanismState`]
//!   across excursions; the exponential variant draws its budget once.
//! * Omega draws a fresh `Exp(1)` hazard budget per excursion. The exponential
//!   clock is memoryless, so this has the same law as a single path-wide draw.
//! * Investor rescue is decided by one Bernoulli draw at entry; a rescued
//!   path restarts at zero.
//! * Debit interest follows `U' = c + βU` below zero. Below `-c/β` the
//!   drift is non-positive and recovery is impossible.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::claims::ModelParams;
use crate::rng::exponential;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MechanismError {
    #[error("invalid mechanism: {0}")]
    Invalid(String),
    #[error("rescue probability is only defined for negative surplus, got {0}")]
    Domain(f64),
    #[error("mechanism state does not match {0}")]
    InvalidState(&'static str),
    #[error("entry deficit must be positive and finite, got {0}")]
    InvalidDeficit(f64),
    #[error("excursion exceeded {0} claims")]
    ClaimBudgetExceeded(u64),
}

/// Bankruptcy rate `ω(y)` for `y < 0`; zero on `[0, ∞)`.
///
/// `StepFunction` breakpoints are strictly descending negative surplus
/// levels `b_1 > b_2 > ... > b_m`. `levels[0]` applies on `[b_1, 0)`,
/// `levels[i]` on `[b_{i+1}, b_i)` and `levels[m]` on `(-∞, b_m)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RateSpec", into = "RateSpec")]
pub enum RateFunction {
    ConstantBelowZero { level: f64 },
    StepFunction { breakpoints: Vec<f64>, levels: Vec<f64> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RateSpec {
    Constant { level: f64 },
    Step { breakpoints: Vec<f64>, levels: Vec<f64> },
}

impl TryFrom<RateSpec> for RateFunction {
    type Error = MechanismError;

    fn try_from(s: RateSpec) -> Result<Self, Self::Error> {
        match s {
            RateSpec::Constant { level } => RateFunction::constant(level),
            RateSpec::Step { breakpoints, levels } => RateFunction::step(breakpoints, levels),
        }
    }
}

impl From<RateFunction> for RateSpec {
    fn from(r: RateFunction) -> Self {
        match r {
            RateFunction::ConstantBelowZero { level } => RateSpec::Constant { level },
            RateFunction::StepFunction { breakpoints, levels } => RateSpec::Step { breakpoints, levels },
        }
    }
}

impl RateFunction {
    pub fn constant(level: f64) -> Result<Self, MechanismError> {
        if !(level > 0.0 && level.is_finite()) {
            return Err(MechanismError::Invalid(format!(
                "constant bankruptcy rate must be positive, got {level}"
            )));
        }
        Ok(Self::ConstantBelowZero { level })
    }

    pub fn step(breakpoints: Vec<f64>, levels: Vec<f64>) -> Result<Self, MechanismError> {
        if levels.len() != breakpoints.len() + 1 {
            return Err(MechanismError::Invalid(format!(
                "step rate needs {} levels for {} breakpoints, got {}",
                breakpoints.len() + 1,
                breakpoints.len(),
                levels.len()
            )));
        }
        if breakpoints.iter().any(|b| !(b.is_finite() && *b < 0.0)) {
            return Err(MechanismError::Invalid("breakpoints must be finite and negative".into()));
        }
        if breakpoints.windows(2).any(|w| w[1] >= w[0]) {
            return Err(MechanismError::Invalid("breakpoints must be strictly descending".into()));
        }
        if levels.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(MechanismError::Invalid("levels must be finite and non-negative".into()));
        }
        if levels.windows(2).any(|w| w[1] < w[0]) {
            return Err(MechanismError::Invalid(
                "bankruptcy rate must not decrease as the surplus decreases".into(),
            ));
        }
        Ok(Self::StepFunction { breakpoints, levels })
    }

    pub fn rate(&self, y: f64) -> f64 {
        if y >= 0.0 {
            return 0.0;
        }
        match self {
            Self::ConstantBelowZero { level } => *level,
            Self::StepFunction { breakpoints, levels } => {
                let idx = breakpoints.iter().take_while(|b| y < **b).count();
                levels[idx]
            }
        }
    }

    fn breakpoints(&self) -> &[f64] {
        match self {
            Self::ConstantBelowZero { .. } => &[],
            Self::StepFunction { breakpoints, .. } => breakpoints,
        }
    }
}

/// Probability `p_y` of finding an investor who carries the surplus from
/// `y < 0` back to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RescueSpec", into = "RescueSpec")]
pub enum RescueFunction {
    ConstantP { p: f64 },
    /// `p_y = e^{κy}`.
    ExponentialDecay { kappa: f64 },
    /// Piecewise-linear through `(y, p)` points, held flat beyond the ends.
    Table { points: Vec<(f64, f64)> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RescueSpec {
    Constant { p: f64 },
    ExpDecay { kappa: f64 },
    Table { points: Vec<(f64, f64)> },
}

impl TryFrom<RescueSpec> for RescueFunction {
    type Error = MechanismError;

    fn try_from(s: RescueSpec) -> Result<Self, Self::Error> {
        match s {
            RescueSpec::Constant { p } => RescueFunction::constant(p),
            RescueSpec::ExpDecay { kappa } => RescueFunction::exp_decay(kappa),
            RescueSpec::Table { points } => RescueFunction::table(points),
        }
    }
}

impl From<RescueFunction> for RescueSpec {
    fn from(r: RescueFunction) -> Self {
        match r {
            RescueFunction::ConstantP { p } => RescueSpec::Constant { p },
            RescueFunction::ExponentialDecay { kappa } => RescueSpec::ExpDecay { kappa },
            RescueFunction::Table { points } => RescueSpec::Table { points },
        }
    }
}

impl RescueFunction {
    pub fn constant(p: f64) -> Result<Self, MechanismError> {
        if !(0.0..=1.0).contains(&p) {
            return Err(MechanismError::Invalid(format!("rescue probability {p} outside [0, 1]")));
        }
        Ok(Self::ConstantP { p })
    }

    pub fn exp_decay(kappa: f64) -> Result<Self, MechanismError> {
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(MechanismError::Invalid(format!("kappa must be positive, got {kappa}")));
        }
        Ok(Self::ExponentialDecay { kappa })
    }

    pub fn table(points: Vec<(f64, f64)>) -> Result<Self, MechanismError> {
        if points.is_empty() {
            return Err(MechanismError::Invalid("rescue table is empty".into()));
        }
        if points.iter().any(|(y, p)| !y.is_finite() || !p.is_finite()) {
            return Err(MechanismError::Invalid("rescue table entries must be finite".into()));
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(MechanismError::Invalid(
                "rescue table surplus values must be strictly ascending".into(),
            ));
        }
        Ok(Self::Table { points })
    }

    /// `p_y` without the domain check; callers guarantee `y < 0`.
    pub(crate) fn at(&self, y: f64) -> f64 {
        match self {
            Self::ConstantP { p } => *p,
            Self::ExponentialDecay { kappa } => (kappa * y).exp(),
            Self::Table { points } => {
                let idx = points.partition_point(|(py, _)| *py <= y);
                let v = if idx == 0 {
                    points[0].1
                } else if idx == points.len() {
                    points[points.len() - 1].1
                } else {
                    let (y0, p0) = points[idx - 1];
                    let (y1, p1) = points[idx];
                    p0 + (p1 - p0) * (y - y0) / (y1 - y0)
                };
                v.clamp(0.0, 1.0)
            }
        }
    }
}

pub fn rescue_probability(p: &RescueFunction, y: f64) -> Result<f64, MechanismError> {
    if !(y < 0.0) {
        return Err(MechanismError::Domain(y));
    }
    Ok(p.at(y))
}

/// A modified definition of ruin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MechanismSpec", into = "MechanismSpec")]
pub enum Mechanism {
    Classical,
    ParisianFixed { r: f64 },
    ParisianExponential { rate: f64 },
    CumulativeParisianFixed { r: f64 },
    CumulativeParisianExponential { rate: f64 },
    Omega { omega: RateFunction },
    DebitInterest { debit_rate: f64 },
    Investor { p: RescueFunction },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum MechanismSpec {
    Classical,
    ParisianFixed { r: f64 },
    ParisianExponential { rate: f64 },
    CumulativeParisianFixed { r: f64 },
    CumulativeParisianExponential { rate: f64 },
    Omega { rate_function: RateFunction },
    DebitInterest { debit_rate: f64 },
    Investor { p: RescueFunction },
}

impl TryFrom<MechanismSpec> for Mechanism {
    type Error = MechanismError;

    fn try_from(s: MechanismSpec) -> Result<Self, Self::Error> {
        let m = match s {
            MechanismSpec::Classical => Mechanism::Classical,
            MechanismSpec::ParisianFixed { r } => Mechanism::ParisianFixed { r },
            MechanismSpec::ParisianExponential { rate } => Mechanism::ParisianExponential { rate },
            MechanismSpec::CumulativeParisianFixed { r } => Mechanism::CumulativeParisianFixed { r },
            MechanismSpec::CumulativeParisianExponential { rate } => {
                Mechanism::CumulativeParisianExponential { rate }
            }
            MechanismSpec::Omega { rate_function } => Mechanism::Omega { omega: rate_function },
            MechanismSpec::DebitInterest { debit_rate } => Mechanism::DebitInterest { debit_rate },
            MechanismSpec::Investor { p } => Mechanism::Investor { p },
        };
        m.validate()?;
        Ok(m)
    }
}

impl From<Mechanism> for MechanismSpec {
    fn from(m: Mechanism) -> Self {
        match m {
            Mechanism::Classical => MechanismSpec::Classical,
            Mechanism::ParisianFixed { r } => MechanismSpec::ParisianFixed { r },
            Mechanism::ParisianExponential { rate } => MechanismSpec::ParisianExponential { rate },
            Mechanism::CumulativeParisianFixed { r } => MechanismSpec::CumulativeParisianFixed { r },
            Mechanism::CumulativeParisianExponential { rate } => {
                MechanismSpec::CumulativeParisianExponential { rate }
            }
            Mechanism::Omega { omega } => MechanismSpec::Omega { rate_function: omega },
            Mechanism::DebitInterest { debit_rate } => MechanismSpec::DebitInterest { debit_rate },
            Mechanism::Investor { p } => MechanismSpec::Investor { p },
        }
    }
}

impl Mechanism {
    pub fn validate(&self) -> Result<(), MechanismError> {
        let check = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(MechanismError::Invalid(format!("{name} must be positive, got {v}")))
            }
        };
        match self {
            Self::Classical | Self::Omega { .. } | Self::Investor { .. } => Ok(()),
            Self::ParisianFixed { r } | Self::CumulativeParisianFixed { r } => check("r", *r),
            Self::ParisianExponential { rate } | Self::CumulativeParisianExponential { rate } => {
                check("rate", *rate)
            }
            Self::DebitInterest { debit_rate } => check("debit_rate", *debit_rate),
        }
    }

    /// True when surviving an excursion restarts the process afresh at zero.
    pub fn is_renewal(&self) -> bool {
        !self.is_cumulative()
    }

    pub fn is_cumulative(&self) -> bool {
        matches!(
            self,
            Self::CumulativeParisianFixed { .. } | Self::CumulativeParisianExponential { .. }
        )
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Classical => "classical",
            Self::ParisianFixed { .. } => "parisian_fixed",
            Self::ParisianExponential { .. } => "parisian_exponential",
            Self::CumulativeParisianFixed { .. } => "cumulative_parisian_fixed",
            Self::CumulativeParisianExponential { .. } => "cumulative_parisian_exponential",
            Self::Omega { .. } => "omega",
            Self::DebitInterest { .. } => "debit_interest",
            Self::Investor { .. } => "investor",
        }
    }
}

/// Per-path memory of a mechanism.
#[derive(Debug, Clone, PartialEq)]
pub struct MechanismState {
    /// Remaining cumulative sojourn budget. `None` for non-cumulative
    /// mechanisms, and for the exponential cumulative variant until the
    /// first excursion draws it.
    pub remaining_budget: Option<f64>,
    /// Total omega hazard consumed along the path so far.
    pub accumulated_hazard: f64,
    /// Whether an investor has rescued this path at least once.
    pub rescue_consumed: bool,
}

impl MechanismState {
    pub fn new(mech: &Mechanism) -> Self {
        let remaining_budget = match mech {
            Mechanism::CumulativeParisianFixed { r } => Some(*r),
            _ => None,
        };
        Self {
            remaining_budget,
            accumulated_hazard: 0.0,
            rescue_consumed: false,
        }
    }

    fn check(&self, mech: &Mechanism) -> Result<(), MechanismError> {
        match (mech, self.remaining_budget) {
            (Mechanism::CumulativeParisianFixed { .. }, None) => {
                Err(MechanismError::InvalidState("cumulative budget missing"))
            }
            (m, Some(_)) if !m.is_cumulative() => {
                Err(MechanismError::InvalidState("budget on a non-cumulative mechanism"))
            }
            (_, Some(b)) if !(b >= 0.0) => Err(MechanismError::InvalidState("negative budget")),
            _ if !(self.accumulated_hazard >= 0.0) => {
                Err(MechanismError::InvalidState("negative accumulated hazard"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExcursionVerdict {
    RecoveredAtZero { state: MechanismState },
    Ruined,
}

/// Outcome of one negative excursion together with the number of claims
/// that arrived while it lasted.
#[derive(Debug, Clone, PartialEq)]
pub struct Excursion {
    pub verdict: ExcursionVerdict,
    pub claims: u64,
}

/// Hazard picked up along a linear surplus segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HazardSegment {
    pub consumed: f64,
    /// Offset into the segment at which the hazard budget ran out.
    pub trigger_offset: Option<f64>,
}

/// Integrates `ω` along `U(s) = start + drift·s`, `0 <= s <= duration`,
/// exactly (piece by piece), stopping where the accumulated hazard first
/// reaches `hazard_budget`.
pub fn trigger_time_omega(
    omega: &RateFunction,
    segment_start_surplus: f64,
    drift: f64,
    duration: f64,
    hazard_budget: f64,
) -> HazardSegment {
    let start = segment_start_surplus;
    let mut cuts: Vec<f64> = Vec::with_capacity(omega.breakpoints().len() + 3);
    cuts.push(0.0);
    if drift != 0.0 {
        for level in omega.breakpoints().iter().chain(std::iter::once(&0.0)) {
            let s = (level - start) / drift;
            if s > 0.0 && s < duration {
                cuts.push(s);
            }
        }
    }
    cuts.push(duration);
    cuts.sort_by(f64::total_cmp);

    let mut consumed = 0.0;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let level = omega.rate(start + drift * 0.5 * (a + b));
        let piece = level * (b - a);
        if level > 0.0 && consumed + piece >= hazard_budget {
            return HazardSegment {
                consumed: hazard_budget,
                trigger_offset: Some(a + (hazard_budget - consumed) / level),
            };
        }
        consumed += piece;
    }
    HazardSegment {
        consumed,
        trigger_offset: None,
    }
}

/// Time for `U' = c + βU` to climb from `-deficit` to zero, or `None` when
/// `deficit >= c/β` and the surplus can never recover.
pub fn debit_recovery_time(deficit: f64, premium_rate: f64, debit_rate: f64) -> Option<f64> {
    let level = premium_rate / debit_rate;
    if deficit >= level {
        return None;
    }
    Some(-(-deficit / level).ln_1p() / debit_rate)
}

enum Clock<'a> {
    /// Ruin once time spent in this excursion exceeds the limit.
    Sojourn(f64),
    Hazard { omega: &'a RateFunction, budget: f64 },
}

/// Plays out one negative excursion that starts at `-entry_deficit`.
///
/// The excursion ends at the first return to zero or when the mechanism
/// declares ruin. Claims arriving meanwhile deepen the deficit; more than
/// `max_claims` of them is reported as an error.
pub fn resolve_excursion<R: Rng + ?Sized>(
    mech: &Mechanism,
    mut state: MechanismState,
    entry_deficit: f64,
    model: &ModelParams,
    rng: &mut R,
    max_claims: u64,
) -> Result<Excursion, MechanismError> {
    state.check(mech)?;
    if !(entry_deficit > 0.0 && entry_deficit.is_finite()) {
        return Err(MechanismError::InvalidDeficit(entry_deficit));
    }
    let ruined = |claims| {
        Ok(Excursion {
            verdict: ExcursionVerdict::Ruined,
            claims,
        })
    };

    let mut clock = match mech {
        Mechanism::Classical => return ruined(0),
        Mechanism::Investor { p } => {
            if rng.random::<f64>() < p.at(-entry_deficit) {
                state.rescue_consumed = true;
                return Ok(Excursion {
                    verdict: ExcursionVerdict::RecoveredAtZero { state },
                    claims: 0,
                });
            }
            return ruined(0);
        }
        Mechanism::DebitInterest { debit_rate } => {
            return debit_excursion(*debit_rate, state, entry_deficit, model, rng, max_claims)
        }
        Mechanism::ParisianFixed { r } => Clock::Sojourn(*r),
        Mechanism::ParisianExponential { rate } => Clock::Sojourn(exponential(rng, *rate)),
        Mechanism::CumulativeParisianFixed { .. } => {
            Clock::Sojourn(state.remaining_budget.unwrap_or(0.0))
        }
        Mechanism::CumulativeParisianExponential { rate } => {
            let budget = match state.remaining_budget {
                Some(b) => b,
                None => exponential(rng, *rate),
            };
            state.remaining_budget = Some(budget);
            Clock::Sojourn(budget)
        }
        Mechanism::Omega { omega } => Clock::Hazard {
            omega,
            budget: exponential(rng, 1.0),
        },
    };

    let c = model.premium_rate();
    let lambda = model.claim_intensity();
    let claims = model.claims();
    let mut deficit = entry_deficit;
    let mut elapsed = 0.0;
    let mut n_claims = 0u64;
    loop {
        let wait = exponential(rng, lambda);
        let to_zero = deficit / c;
        let seg = wait.min(to_zero);
        match &mut clock {
            Clock::Sojourn(limit) => {
                if elapsed + seg > *limit {
                    return ruined(n_claims);
                }
            }
            Clock::Hazard { omega, budget } => {
                let h = trigger_time_omega(omega, -deficit, c, seg, *budget);
                state.accumulated_hazard += h.consumed;
                if h.trigger_offset.is_some() {
                    return ruined(n_claims);
                }
                *budget -= h.consumed;
            }
        }
        elapsed += seg;
        if wait >= to_zero {
            if mech.is_cumulative() {
                let left = state.remaining_budget.map(|b| (b - elapsed).max(0.0));
                state.remaining_budget = left;
            }
            return Ok(Excursion {
                verdict: ExcursionVerdict::RecoveredAtZero { state },
                claims: n_claims,
            });
        }
        deficit += claims.sample(rng) - c * wait;
        n_claims += 1;
        if n_claims > max_claims {
            return Err(MechanismError::ClaimBudgetExceeded(max_claims));
        }
    }
}

fn debit_excursion<R: Rng + ?Sized>(
    debit_rate: f64,
    state: MechanismState,
    entry_deficit: f64,
    model: &ModelParams,
    rng: &mut R,
    max_claims: u64,
) -> Result<Excursion, MechanismError> {
    let c = model.premium_rate();
    let level = c / debit_rate;
    let mut deficit = entry_deficit;
    let mut n_claims = 0u64;
    loop {
        let Some(to_zero) = debit_recovery_time(deficit, c, debit_rate) else {
            return Ok(Excursion {
                verdict: ExcursionVerdict::Ruined,
                claims: n_claims,
            });
        };
        let wait = exponential(rng, model.claim_intensity());
        if wait >= to_zero {
            return Ok(Excursion {
                verdict: ExcursionVerdict::RecoveredAtZero { state },
                claims: n_claims,
            });
        }
        // U(t) = -c/β + (U(0) + c/β) e^{βt}
        deficit = level - (level - deficit) * (debit_rate * wait).exp();
        deficit += model.claims().sample(rng);
        n_claims += 1;
        if n_claims > max_claims {
            return Err(MechanismError::ClaimBudgetExceeded(max_claims));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::claims::ClaimDistribution;
    use crate::numerics::{integrate_finite, Tolerance};
    use crate::rng::RandomStream;
    use proptest::prelude::*;

    fn model() -> ModelParams {
        ModelParams::new(2.0, 1.0, ClaimDistribution::exponential(1.0).unwrap()).unwrap()
    }

    fn resolve(mech: &Mechanism, deficit: f64, seed: u64) -> Excursion {
        let mut rng = RandomStream::new(seed, 0);
        resolve_excursion(mech, MechanismState::new(mech), deficit, &model(), &mut rng, 1_000_000).unwrap()
    }

    #[test]
    fn classical_always_ruins() {
        for d in [1e-6, 0.5, 30.0] {
            assert_eq!(resolve(&Mechanism::Classical, d, 1).verdict, ExcursionVerdict::Ruined);
        }
    }

    #[test]
    fn certain_rescue_always_recovers() {
        let m = Mechanism::Investor { p: RescueFunction::constant(1.0).unwrap() };
        for seed in 0..100 {
            let e = resolve(&m, 5.0, seed);
            assert!(matches!(e.verdict, ExcursionVerdict::RecoveredAtZero { ref state } if state.rescue_consumed));
        }
    }

    #[test]
    fn debit_interest_below_level_is_ruin() {
        // c/β = 2/0.5 = 4
        let m = Mechanism::DebitInterest { debit_rate: 0.5 };
        for seed in 0..50 {
            let e = resolve(&m, 4.0 + 1e-9 + seed as f64 * 0.1, seed);
            assert_eq!(e.verdict, ExcursionVerdict::Ruined);
            assert_eq!(e.claims, 0);
        }
    }

    #[test]
    fn debit_recovery_time_matches_ode() {
        // dt/dU = 1 / (c + βU), integrated from -d to 0 with RK4
        let (c, beta) = (2.0, 0.5);
        for d in [0.1, 1.0, 3.0, 3.9] {
            let n = 20_000;
            let h = d / n as f64;
            let f = |u: f64| 1.0 / (c + beta * u);
            let mut t = 0.0;
            let mut u = -d;
            for _ in 0..n {
                t += h / 6.0 * (f(u) + 4.0 * f(u + 0.5 * h) + f(u + h));
                u += h;
            }
            let closed = debit_recovery_time(d, c, beta).unwrap();
            assert!((closed - t).abs() < 1e-8, "d={d}: {closed} vs {t}");
        }
        assert!(debit_recovery_time(4.0, c, beta).is_none());
    }

    #[test]
    fn omega_constant_segments() {
        let q = 0.7;
        let omega = RateFunction::constant(q).unwrap();
        let h = trigger_time_omega(&omega, -1.0, 2.0, 0.3, f64::INFINITY);
        assert!((h.consumed - q * 0.3).abs() < 1e-15);
        assert!(h.trigger_offset.is_none());
        let h = trigger_time_omega(&omega, -1.0, 2.0, 0.3, 0.1);
        assert!((h.trigger_offset.unwrap() - 0.1 / q).abs() < 1e-15);
        assert_eq!(h.consumed, 0.1);
    }

    #[test]
    fn omega_step_segment() {
        let (q1, q2) = (1.5, 0.4);
        let omega = RateFunction::step(vec![-1.0], vec![q2, q1]).unwrap();
        let h = trigger_time_omega(&omega, -2.0, 1.0, 2.0, f64::INFINITY);
        assert!((h.consumed - (q1 + q2)).abs() < 1e-14);
        let fine = integrate_finite(|s| omega.rate(-2.0 + s), 0.0, 2.0, Tolerance::default()).unwrap();
        assert!((fine - h.consumed).abs() < 1e-9);
        // budget runs out inside the second piece
        let h = trigger_time_omega(&omega, -2.0, 1.0, 2.0, q1 + 0.2);
        assert!((h.trigger_offset.unwrap() - (1.0 + 0.2 / q2)).abs() < 1e-14);
    }

    #[test]
    fn rescue_values() {
        let c = RescueFunction::constant(0.5).unwrap();
        assert_eq!(rescue_probability(&c, -3.0).unwrap(), 0.5);
        let e = RescueFunction::exp_decay(1.0).unwrap();
        assert!((rescue_probability(&e, -1.0).unwrap() - 0.367_879_441_2).abs() < 1e-10);
        assert!(rescue_probability(&e, -800.0).unwrap() < 1e-300);
        assert!(matches!(rescue_probability(&e, 0.0), Err(MechanismError::Domain(_))));
        let t = RescueFunction::table(vec![(-2.0, 0.0), (-1.0, 0.5), (-0.5, 1.5)]).unwrap();
        assert_eq!(t.at(-3.0), 0.0);
        assert!((t.at(-1.5) - 0.25).abs() < 1e-15);
        assert_eq!(t.at(-0.6), 1.0);
        assert_eq!(t.at(-0.1), 1.0);
    }

    #[test]
    fn state_mismatch_is_rejected() {
        let mut rng = RandomStream::new(0, 0);
        let m = Mechanism::CumulativeParisianFixed { r: 1.0 };
        let bad = MechanismState::new(&Mechanism::Classical);
        let err = resolve_excursion(&m, bad, 1.0, &model(), &mut rng, 10).unwrap_err();
        assert!(matches!(err, MechanismError::InvalidState(_)));
        let bad = MechanismState::new(&m);
        let err = resolve_excursion(&Mechanism::ParisianFixed { r: 1.0 }, bad, 1.0, &model(), &mut rng, 10)
            .unwrap_err();
        assert!(matches!(err, MechanismError::InvalidState(_)));
        let err = resolve_excursion(&m, MechanismState::new(&m), -1.0, &model(), &mut rng, 10).unwrap_err();
        assert!(matches!(err, MechanismError::InvalidDeficit(_)));
    }

    #[test]
    fn parisian_fixed_first_excursion_matches_cumulative() {
        // On the first excursion the two fixed clocks are the same rule.
        let n = 20_000;
        let count = |m: &Mechanism| (0..n).filter(|s| resolve(m, 1.0, *s).verdict == ExcursionVerdict::Ruined).count();
        let a = count(&Mechanism::ParisianFixed { r: 0.4 });
        let b = count(&Mechanism::CumulativeParisianFixed { r: 0.4 });
        assert_eq!(a, b);
        // with deficit 1 and c = 2 the excursion lasts at least 0.5 > 0.4
        assert_eq!(a, n as usize);
    }

    #[test]
    fn parisian_clock_longer_than_recovery_survives_without_claims() {
        // ruin needs at least one claim to push the sojourn past r
        let m = Mechanism::ParisianFixed { r: 10.0 };
        let ruined = (0..2000).filter(|s| resolve(&m, 0.01, *s).verdict == ExcursionVerdict::Ruined).count();
        assert!(ruined < 20, "{ruined}");
    }

    #[test]
    fn serde_specs() {
        let m: Mechanism = serde_json::from_str(r#"{"kind":"parisian_fixed","r":1.0}"#).unwrap();
        assert_eq!(m, Mechanism::ParisianFixed { r: 1.0 });
        let m: Mechanism =
            serde_json::from_str(r#"{"kind":"omega","rate_function":{"kind":"constant","level":0.5}}"#).unwrap();
        assert_eq!(m, Mechanism::Omega { omega: RateFunction::constant(0.5).unwrap() });
        let m: Mechanism = serde_json::from_str(r#"{"kind":"investor","p":{"kind":"exp_decay","kappa":1.0}}"#).unwrap();
        assert_eq!(m, Mechanism::Investor { p: RescueFunction::exp_decay(1.0).unwrap() });
        let back: Mechanism = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back, m);
        assert!(serde_json::from_str::<Mechanism>(r#"{"kind":"parisian_fixed","r":-1.0}"#).is_err());
        assert!(serde_json::from_str::<Mechanism>(
            r#"{"kind":"omega","rate_function":{"kind":"step","breakpoints":[-1.0],"levels":[2.0,1.0]}}"#
        )
        .is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn cumulative_budget_never_grows(seed in 0u64..10_000, r in 0.1f64..5.0, d in 0.01f64..3.0) {
            let m = Mechanism::CumulativeParisianFixed { r };
            let mut state = MechanismState::new(&m);
            let mut rng = RandomStream::new(seed, 0);
            for _ in 0..5 {
                let before = state.remaining_budget.unwrap();
                match resolve_excursion(&m, state.clone(), d, &model(), &mut rng, 100_000).unwrap().verdict {
                    ExcursionVerdict::RecoveredAtZero { state: s } => {
                        prop_assert!(s.remaining_budget.unwrap() <= before);
                        prop_assert!(s.remaining_budget.unwrap() >= 0.0);
                        state = s;
                    }
                    ExcursionVerdict::Ruined => break,
                }
            }
        }

        #[test]
        fn exp_decay_is_monotone(kappa in 0.01f64..5.0, y in -20.0f64..-0.001, dy in 0.0f64..5.0) {
            let p = RescueFunction::exp_decay(kappa).unwrap();
            let lo = rescue_probability(&p, y - dy).unwrap();
            let hi = rescue_probability(&p, y).unwrap();
            prop_assert!(lo <= hi && (0.0..=1.0).contains(&lo) && hi <= 1.0);
        }

        #[test]
        fn omega_hazard_matches_fine_sum(start in -4.0f64..-0.5, dur in 0.0f64..0.25, q0 in 0.0f64..1.0, dq in 0.0f64..2.0) {
            let omega = RateFunction::step(vec![-1.0, -2.5], vec![q0, q0 + dq, q0 + 2.0 * dq]).unwrap();
            let h = trigger_time_omega(&omega, start, 2.0, dur, f64::INFINITY);
            // midpoint sum; each of the two jumps costs at most jump * step
            let n = 2_000_000;
            let step = dur / n as f64;
            let fine: f64 = (0..n).map(|i| omega.rate(start + 2.0 * (i as f64 + 0.5) * step)).sum::<f64>() * step;
            prop_assert!((fine - h.consumed).abs() <= 4.0 * dq * step + 1e-12);
        }
    }
}
