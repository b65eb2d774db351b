//! Monte Carlo engine for the compound-Poisson surplus.
//!
//! Each path `i` draws from its own stream `RandomStream::new(seed, i)`, and
//! paths are grouped into fixed-size chunks whose partial results are merged
//! in path order. Estimates are therefore identical for any worker count.
//!
//! A path runs until the mechanism declares ruin or the surplus reaches the
//! truncation barrier `M`, above which it is counted as surviving. The bias
//! this introduces is bounded by the classical ruin probability from `M`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::claims::{classify_regime, ModelParams, RegimeTag};
use crate::mechanisms::{
    resolve_excursion, Excursion, ExcursionVerdict, Mechanism, MechanismError, MechanismState,
};
use crate::numerics::Tolerance;
use crate::rng::{exponential, RandomStream};

const CHUNK: u64 = 4096;
const DEFICIT_BATCH: u64 = 65_536;
const Z95: f64 = 1.959963984540054;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("regime unavailable: {0}")]
    RegimeUnavailable(String),
    #[error(transparent)]
    Mechanism(#[from] MechanismError),
    #[error("no classical ruins observed; ratio undefined")]
    ZeroDenominator,
    #[error("collected {} of {wanted} conditional samples in {paths} paths", partial.len())]
    SampleBudgetExceeded {
        partial: EmpiricalDf,
        wanted: usize,
        paths: u64,
    },
}

/// How the survival barrier `M` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum BarrierMode {
    /// Pick `M` so that the truncation bias is about `eps_trunc`.
    Auto { eps_trunc: f64 },
    Fixed { m: f64 },
}

impl Default for BarrierMode {
    fn default() -> Self {
        Self::Auto { eps_trunc: 1e-4 }
    }
}

fn default_max_events() -> u64 {
    10_000_000
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub n_paths: u64,
    pub seed: u64,
    #[serde(default)]
    pub barrier: BarrierMode,
    #[serde(default = "default_max_events")]
    pub max_events_per_path: u64,
}

impl SimConfig {
    pub fn new(n_paths: u64, seed: u64) -> Self {
        Self {
            n_paths,
            seed,
            barrier: BarrierMode::default(),
            max_events_per_path: default_max_events(),
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.n_paths == 0 {
            return Err(SimError::Config("n_paths must be at least 1".into()));
        }
        if self.max_events_per_path == 0 {
            return Err(SimError::Config("max_events_per_path must be at least 1".into()));
        }
        match self.barrier {
            BarrierMode::Auto { eps_trunc } if !(eps_trunc > 0.0 && eps_trunc <= 0.1) => Err(
                SimError::Config(format!("eps_trunc must lie in (0, 0.1], got {eps_trunc}")),
            ),
            BarrierMode::Fixed { m } if !(m.is_finite()) => {
                Err(SimError::Config(format!("barrier must be finite, got {m}")))
            }
            _ => Ok(()),
        }
    }
}

/// The barrier actually used for a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Barrier {
    pub m: f64,
    /// Upper bound on `|E p_hat - ψ(u)|` caused by truncation.
    pub bias_bound: f64,
    /// The heavy-tailed bound rests on the asymptotic form of `ψ_cl`.
    pub heuristic: bool,
}

/// Chooses `M` for initial capital `u`.
///
/// Cramér regime: bias at most `e^{-R(M-u)}`. Heavy regime: bias about
/// `ρ/(1-ρ) F̄_I(M-u)` with `ρ = λμ/c`, the factor taken as at least 1.
pub fn resolve_barrier(model: &ModelParams, u: f64, mode: BarrierMode) -> Result<Barrier, SimError> {
    let regime = classify_regime(model, Tolerance::default());
    let d = model.claims();
    let rho = model.loading_ratio();
    let factor = (rho / (1.0 - rho)).max(1.0);
    match (mode, &regime) {
        (BarrierMode::Auto { eps_trunc }, RegimeTag::CramerLight { r }) => Ok(Barrier {
            m: u + (1.0 / eps_trunc).ln() / r,
            bias_bound: eps_trunc,
            heuristic: false,
        }),
        (BarrierMode::Auto { eps_trunc }, RegimeTag::SubexponentialHeavy) => Ok(Barrier {
            m: u + d.integrated_tail_quantile(eps_trunc / factor),
            bias_bound: eps_trunc,
            heuristic: true,
        }),
        (BarrierMode::Auto { .. }, RegimeTag::Neither { diagnostic }) => {
            Err(SimError::RegimeUnavailable(diagnostic.clone()))
        }
        (BarrierMode::Fixed { m }, _) if !(m > u) => Err(SimError::Config(format!(
            "barrier {m} must exceed the initial capital {u}"
        ))),
        (BarrierMode::Fixed { m }, RegimeTag::CramerLight { r }) => Ok(Barrier {
            m,
            bias_bound: (-r * (m - u)).exp(),
            heuristic: false,
        }),
        (BarrierMode::Fixed { m }, RegimeTag::SubexponentialHeavy) => Ok(Barrier {
            m,
            bias_bound: (factor * d.integrated_tail_complement(m - u)).min(1.0),
            heuristic: true,
        }),
        (BarrierMode::Fixed { m }, RegimeTag::Neither { .. }) => Ok(Barrier {
            m,
            bias_bound: 1.0,
            heuristic: true,
        }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PathVerdict {
    Ruined,
    SurvivedToBarrier,
    /// The path hit `max_events_per_path` before a verdict.
    BudgetExceeded,
}

/// One simulated trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathOutcome {
    pub verdict: PathVerdict,
    /// `-U_T` at the first passage below zero.
    pub first_passage_deficit: Option<f64>,
    pub classical_ruin: bool,
    pub n_excursions: u32,
    pub events: u64,
}

/// Simulates path `index` of the run keyed by `seed`.
///
/// The classical verdict is read off the same trajectory: classical ruin is
/// the first passage below zero, which always precedes mechanism ruin.
pub fn simulate_path(
    model: &ModelParams,
    mech: &Mechanism,
    u: f64,
    barrier: f64,
    seed: u64,
    index: u64,
    max_events: u64,
) -> Result<PathOutcome, SimError> {
    let mut rng = RandomStream::new(seed, index);
    let c = model.premium_rate();
    let lambda = model.claim_intensity();
    let claims = model.claims();
    let mut state = MechanismState::new(mech);
    let mut out = PathOutcome {
        verdict: PathVerdict::SurvivedToBarrier,
        first_passage_deficit: None,
        classical_ruin: false,
        n_excursions: 0,
        events: 0,
    };
    let mut x = u;
    loop {
        let wait = exponential(&mut rng, lambda);
        if x + c * wait >= barrier {
            return Ok(out);
        }
        x += c * wait - claims.sample(&mut rng);
        out.events += 1;
        if out.events > max_events {
            out.verdict = PathVerdict::BudgetExceeded;
            return Ok(out);
        }
        if x >= 0.0 {
            continue;
        }
        if !out.classical_ruin {
            out.classical_ruin = true;
            out.first_passage_deficit = Some(-x);
        }
        out.n_excursions += 1;
        match resolve_excursion(mech, state, -x, model, &mut rng, max_events - out.events) {
            Ok(Excursion {
                verdict: ExcursionVerdict::Ruined,
                claims,
            }) => {
                out.events += claims;
                out.verdict = PathVerdict::Ruined;
                return Ok(out);
            }
            Ok(Excursion {
                verdict: ExcursionVerdict::RecoveredAtZero { state: s },
                claims,
            }) => {
                out.events += claims;
                state = s;
                x = 0.0;
            }
            Err(MechanismError::ClaimBudgetExceeded(_)) => {
                out.events = max_events;
                out.verdict = PathVerdict::BudgetExceeded;
                return Ok(out);
            }
            Err(e) => return Err(e.into()),
        }
    }
}

/// Runs `f` on a pool of `workers` threads.
pub fn with_workers<T, F>(workers: usize, f: F) -> T
where
    T: Send,
    F: FnOnce() -> T + Send,
{
    match rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

// Maps `f` over path chunks `[start, end)` in parallel, results in path order.
fn over_chunks<T, F>(first: u64, n: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, u64) -> T + Sync,
{
    let n_chunks = n.div_ceil(CHUNK);
    (0..n_chunks)
        .into_par_iter()
        .map(|k| {
            let start = first + k * CHUNK;
            f(start, (start + CHUNK).min(first + n))
        })
        .collect()
}

/// All path outcomes of a run, in path order.
pub fn path_outcomes(
    model: &ModelParams,
    mech: &Mechanism,
    u: f64,
    cfg: &SimConfig,
) -> Result<Vec<PathOutcome>, SimError> {
    cfg.validate()?;
    mech.validate()?;
    let barrier = resolve_barrier(model, u, cfg.barrier)?;
    let chunks = over_chunks(0, cfg.n_paths, |a, b| {
        (a..b)
            .map(|i| simulate_path(model, mech, u, barrier.m, cfg.seed, i, cfg.max_events_per_path))
            .collect::<Result<Vec<_>, _>>()
    });
    let mut all = Vec::with_capacity(cfg.n_paths as usize);
    for chunk in chunks {
        all.extend(chunk?);
    }
    Ok(all)
}

/// Path counts from one run, shared by the modified and classical estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct RuinCounts {
    pub n: u64,
    pub ruined: u64,
    pub classical_ruined: u64,
    pub budget_exceeded: u64,
}

impl RuinCounts {
    fn add(mut self, o: &PathOutcome) -> Self {
        self.n += 1;
        self.ruined += (o.verdict == PathVerdict::Ruined) as u64;
        self.classical_ruined += o.classical_ruin as u64;
        self.budget_exceeded += (o.verdict == PathVerdict::BudgetExceeded) as u64;
        self
    }

    fn merge(self, o: Self) -> Self {
        Self {
            n: self.n + o.n,
            ruined: self.ruined + o.ruined,
            classical_ruined: self.classical_ruined + o.classical_ruined,
            budget_exceeded: self.budget_exceeded + o.budget_exceeded,
        }
    }
}

/// Binomial proportion with a normal-approximation 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub p_hat: f64,
    pub stderr: f64,
    pub ci95: (f64, f64),
    pub n: u64,
    pub truncation_bias_bound: f64,
    pub bias_bound_heuristic: bool,
    pub budget_exceeded: u64,
}

impl Estimate {
    fn from_counts(hits: u64, n: u64, barrier: &Barrier, budget_exceeded: u64) -> Self {
        let p = if n == 0 { 0.0 } else { hits as f64 / n as f64 };
        let stderr = if n == 0 { 0.0 } else { (p * (1.0 - p) / n as f64).sqrt() };
        Self {
            p_hat: p,
            stderr,
            ci95: ((p - Z95 * stderr).max(0.0), (p + Z95 * stderr).min(1.0)),
            n,
            truncation_bias_bound: barrier.bias_bound,
            bias_bound_heuristic: barrier.heuristic,
            budget_exceeded,
        }
    }
}

/// `ψ(u) / ψ_cl(u)` estimated as the share of classically ruined paths
/// that the mechanism also ruins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioEstimate {
    pub ratio: f64,
    pub ci95: (f64, f64),
    pub n_classical: u64,
    pub n_ruined: u64,
}

/// Counts from a run together with the barrier that produced them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RuinStudy {
    pub counts: RuinCounts,
    pub barrier: Barrier,
}

impl RuinStudy {
    pub fn modified(&self) -> Estimate {
        let c = &self.counts;
        Estimate::from_counts(c.ruined, c.n, &self.barrier, c.budget_exceeded)
    }

    pub fn classical(&self) -> Estimate {
        let c = &self.counts;
        Estimate::from_counts(c.classical_ruined, c.n, &self.barrier, c.budget_exceeded)
    }

    /// Ratio on common random numbers. Mechanism ruin implies classical
    /// ruin, so this is a conditional proportion.
    pub fn ratio(&self) -> Result<RatioEstimate, SimError> {
        let c = &self.counts;
        if c.classical_ruined == 0 {
            return Err(SimError::ZeroDenominator);
        }
        let n = c.classical_ruined as f64;
        let ratio = c.ruined as f64 / n;
        let half = Z95 * (ratio * (1.0 - ratio) / n).sqrt();
        Ok(RatioEstimate {
            ratio,
            ci95: ((ratio - half).max(0.0), (ratio + half).min(1.0)),
            n_classical: c.classical_ruined,
            n_ruined: c.ruined,
        })
    }
}

/// Simulates `cfg.n_paths` paths and tallies both verdicts.
pub fn run_study(model: &ModelParams, mech: &Mechanism, u: f64, cfg: &SimConfig) -> Result<RuinStudy, SimError> {
    cfg.validate()?;
    mech.validate()?;
    if !(u >= 0.0 && u.is_finite()) {
        return Err(SimError::Config(format!("initial capital must be >= 0, got {u}")));
    }
    let barrier = resolve_barrier(model, u, cfg.barrier)?;
    let partials = over_chunks(0, cfg.n_paths, |a, b| {
        let mut acc = RuinCounts::default();
        for i in a..b {
            acc = acc.add(&simulate_path(model, mech, u, barrier.m, cfg.seed, i, cfg.max_events_per_path)?);
        }
        Ok::<_, SimError>(acc)
    });
    let mut counts = RuinCounts::default();
    for p in partials {
        counts = counts.merge(p?);
    }
    Ok(RuinStudy { counts, barrier })
}

/// Monte Carlo estimate of the modified ruin probability `ψ(u)`.
pub fn estimate_ruin(model: &ModelParams, mech: &Mechanism, u: f64, cfg: &SimConfig) -> Result<Estimate, SimError> {
    Ok(run_study(model, mech, u, cfg)?.modified())
}

/// Monte Carlo estimate of `ψ(u) / ψ_cl(u)` on common random numbers.
pub fn estimate_ratio_crn(
    model: &ModelParams,
    mech: &Mechanism,
    u: f64,
    cfg: &SimConfig,
) -> Result<RatioEstimate, SimError> {
    run_study(model, mech, u, cfg)?.ratio()
}

/// Empirical distribution function over a sorted sample.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct EmpiricalDf {
    sorted: Vec<f64>,
}

impl EmpiricalDf {
    pub fn new(mut sample: Vec<f64>) -> Self {
        sample.sort_by(f64::total_cmp);
        Self { sorted: sample }
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.sorted
    }

    /// Share of the sample `<= x`; zero for an empty sample.
    pub fn cdf(&self, x: f64) -> f64 {
        if self.sorted.is_empty() {
            return 0.0;
        }
        self.sorted.partition_point(|v| *v <= x) as f64 / self.sorted.len() as f64
    }

    pub fn tail(&self, x: f64) -> f64 {
        1.0 - self.cdf(x)
    }

    /// Kolmogorov–Smirnov distance to a continuous distribution function.
    pub fn ks_distance<F: FnMut(f64) -> f64>(&self, mut df: F) -> f64 {
        let n = self.sorted.len() as f64;
        self.sorted
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = df(x);
                ((i + 1) as f64 / n - f).max(f - i as f64 / n)
            })
            .fold(0.0, f64::max)
    }
}

/// Samples the deficit `-U_T` given `T < ∞`, starting from `u`.
///
/// Paths are simulated in batches until `n_conditional` ruins are collected
/// or `cfg.n_paths` paths are spent. The sample keeps the first
/// `n_conditional` ruins in path order.
pub fn estimate_deficit_distribution(
    model: &ModelParams,
    u: f64,
    n_conditional: usize,
    cfg: &SimConfig,
) -> Result<EmpiricalDf, SimError> {
    cfg.validate()?;
    if n_conditional == 0 {
        return Ok(EmpiricalDf::default());
    }
    let barrier = resolve_barrier(model, u, cfg.barrier)?;
    let mech = Mechanism::Classical;
    let mut deficits = Vec::with_capacity(n_conditional);
    let mut used = 0u64;
    while deficits.len() < n_conditional && used < cfg.n_paths {
        let batch = DEFICIT_BATCH.min(cfg.n_paths - used);
        let chunks = over_chunks(used, batch, |a, b| {
            let mut found = Vec::new();
            for i in a..b {
                let o = simulate_path(model, &mech, u, barrier.m, cfg.seed, i, cfg.max_events_per_path)?;
                found.extend(o.first_passage_deficit);
            }
            Ok::<_, SimError>(found)
        });
        for chunk in chunks {
            deficits.extend(chunk?);
        }
        used += batch;
    }
    if deficits.len() < n_conditional {
        return Err(SimError::SampleBudgetExceeded {
            partial: EmpiricalDf::new(deficits),
            wanted: n_conditional,
            paths: used,
        });
    }
    deficits.truncate(n_conditional);
    Ok(EmpiricalDf::new(deficits))
}

/// Share of `n` independent excursions from `-entry_deficit` that return to
/// zero under `mech`, each starting with a fresh mechanism state.
pub fn estimate_recovery_probability(
    model: &ModelParams,
    mech: &Mechanism,
    entry_deficit: f64,
    n: u64,
    seed: u64,
) -> Result<Estimate, SimError> {
    mech.validate()?;
    let partials = over_chunks(0, n, |a, b| {
        let mut hits = 0u64;
        for i in a..b {
            let mut rng = RandomStream::new(seed, i);
            let e = resolve_excursion(mech, MechanismState::new(mech), entry_deficit, model, &mut rng, u64::MAX)?;
            hits += matches!(e.verdict, ExcursionVerdict::RecoveredAtZero { .. }) as u64;
        }
        Ok::<_, SimError>(hits)
    });
    let mut hits = 0;
    for p in partials {
        hits += p?;
    }
    let exact = Barrier {
        m: f64::INFINITY,
        bias_bound: 0.0,
        heuristic: false,
    };
    Ok(Estimate::from_counts(hits, n, &exact, 0))
}

/// Least-squares fit of `ln y = intercept + slope x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogLinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Fits `ln y` against `x`; needs two or more points with `y > 0`.
pub fn fit_log_linear(xs: &[f64], ys: &[f64]) -> Option<LogLinearFit> {
    if xs.len() != ys.len() || xs.len() < 2 || ys.iter().any(|y| !(*y > 0.0)) {
        return None;
    }
    let n = xs.len() as f64;
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some(LogLinearFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}
