//! Claim-size laws and Cramér–Lundberg model parameters.
//!
//! A [`ClaimDistribution`] carries everything the rest of the crate needs
//! about the claim size `Y`: the tail `F̄`, the mean `μ`, the integrated-tail
//! law `F_I` (density `F̄/μ`), the moment generating function and a sampler.
//! [`ModelParams`] adds the premium rate `c` and claim intensity `λ` and
//! refuses to exist unless the net profit condition `c > λμ` holds.

use rand::Rng;
use rand_distr::{Distribution, Gamma as GammaSampler};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_ur, ln_gamma};
use thiserror::Error;

use crate::numerics::{find_root_bracketed, Tolerance};
use crate::rng::open_unit;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid claim distribution: {0}")]
    InvalidDistribution(String),
    #[error("invalid model parameter: {0}")]
    InvalidParameter(String),
    #[error("net profit condition violated: c = {c} <= lambda * mu = {lambda_mu}")]
    NetProfitViolated { c: f64, lambda_mu: f64 },
}

/// Claim-size law `Y`.
///
/// Pareto is the Lomax form `F̄(t) = (1 + t/θ)^(-α)` supported on `[0, ∞)`;
/// `α > 1` is required for a finite mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ClaimSpec", into = "ClaimSpec")]
pub enum ClaimDistribution {
    Exponential { rate: f64 },
    Pareto { shape: f64, scale: f64 },
    Gamma { shape: f64, rate: f64 },
}

// Wire form of a claim distribution; validated on the way in.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
enum ClaimSpec {
    Exponential { rate: f64 },
    Pareto { shape: f64, scale: f64 },
    Gamma { shape: f64, rate: f64 },
}

impl TryFrom<ClaimSpec> for ClaimDistribution {
    type Error = ModelError;

    fn try_from(spec: ClaimSpec) -> Result<Self, Self::Error> {
        match spec {
            ClaimSpec::Exponential { rate } => Self::exponential(rate),
            ClaimSpec::Pareto { shape, scale } => Self::pareto(shape, scale),
            ClaimSpec::Gamma { shape, rate } => Self::gamma(shape, rate),
        }
    }
}

impl From<ClaimDistribution> for ClaimSpec {
    fn from(d: ClaimDistribution) -> Self {
        match d {
            ClaimDistribution::Exponential { rate } => ClaimSpec::Exponential { rate },
            ClaimDistribution::Pareto { shape, scale } => ClaimSpec::Pareto { shape, scale },
            ClaimDistribution::Gamma { shape, rate } => ClaimSpec::Gamma { shape, rate },
        }
    }
}

fn positive(name: &str, v: f64) -> Result<(), ModelError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ModelError::InvalidDistribution(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

impl ClaimDistribution {
    pub fn exponential(rate: f64) -> Result<Self, ModelError> {
        positive("rate", rate)?;
        Ok(Self::Exponential { rate })
    }

    pub fn pareto(shape: f64, scale: f64) -> Result<Self, ModelError> {
        positive("shape", shape)?;
        positive("scale", scale)?;
        if shape <= 1.0 {
            return Err(ModelError::InvalidDistribution(format!(
                "pareto shape must exceed 1 for a finite mean, got {shape}"
            )));
        }
        Ok(Self::Pareto { shape, scale })
    }

    pub fn gamma(shape: f64, rate: f64) -> Result<Self, ModelError> {
        positive("shape", shape)?;
        positive("rate", rate)?;
        Ok(Self::Gamma { shape, rate })
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::Exponential { rate } => 1.0 / rate,
            Self::Pareto { shape, scale } => scale / (shape - 1.0),
            Self::Gamma { shape, rate } => shape / rate,
        }
    }

    /// `F̄(t) = P(Y > t)`; equals 1 for `t <= 0`.
    pub fn tail(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        match *self {
            Self::Exponential { rate } => (-rate * t).exp(),
            Self::Pareto { shape, scale } => (-shape * (t / scale).ln_1p()).exp(),
            Self::Gamma { shape, rate } => gamma_ur(shape, rate * t),
        }
    }

    pub fn cdf(&self, t: f64) -> f64 {
        1.0 - self.tail(t)
    }

    /// Lebesgue density of `Y`; zero for `t < 0`.
    pub fn density(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        match *self {
            Self::Exponential { rate } => rate * (-rate * t).exp(),
            Self::Pareto { shape, scale } => {
                shape / scale * (-(shape + 1.0) * (t / scale).ln_1p()).exp()
            }
            Self::Gamma { shape, rate } => {
                if t == 0.0 {
                    return match shape {
                        s if s < 1.0 => f64::INFINITY,
                        1.0 => rate,
                        _ => 0.0,
                    };
                }
                (shape * rate.ln() + (shape - 1.0) * t.ln() - rate * t - ln_gamma(shape)).exp()
            }
        }
    }

    /// `F̄_I(u) = (1/μ) ∫_u^∞ F̄(z) dz`, in closed form for every family.
    pub fn integrated_tail_complement(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 1.0;
        }
        match *self {
            Self::Exponential { rate } => (-rate * u).exp(),
            Self::Pareto { shape, scale } => (-(shape - 1.0) * (u / scale).ln_1p()).exp(),
            Self::Gamma { shape, rate } => {
                // E[(Y - u)^+] / μ = Q(k+1, βu) - (βu/k) Q(k, βu)
                let x = rate * u;
                let v = gamma_ur(shape + 1.0, x) - x / shape * gamma_ur(shape, x);
                v.clamp(0.0, 1.0)
            }
        }
    }

    /// Smallest `u` with `F̄_I(u) <= q`, for `q` in `(0, 1]`.
    pub fn integrated_tail_quantile(&self, q: f64) -> f64 {
        if q >= 1.0 {
            return 0.0;
        }
        match *self {
            Self::Exponential { rate } => -q.ln() / rate,
            Self::Pareto { shape, scale } => scale * (q.powf(-1.0 / (shape - 1.0)) - 1.0),
            Self::Gamma { .. } => {
                let mut hi = self.mean().max(1.0);
                while self.integrated_tail_complement(hi) > q {
                    hi *= 2.0;
                }
                find_root_bracketed(
                    |u| self.integrated_tail_complement(u) - q,
                    0.0,
                    hi,
                    Tolerance::default(),
                )
                .unwrap_or(hi)
            }
        }
    }

    /// Supremum of the MGF domain: `E[e^{sY}] < ∞` iff `s < bound`.
    pub fn mgf_domain_bound(&self) -> f64 {
        match *self {
            Self::Exponential { rate } => rate,
            Self::Pareto { .. } => 0.0,
            Self::Gamma { rate, .. } => rate,
        }
    }

    /// `E[e^{sY}] - 1`, or `+∞` outside the MGF domain.
    pub fn mgf_minus_one(&self, s: f64) -> f64 {
        if s == 0.0 {
            return 0.0;
        }
        if s >= self.mgf_domain_bound() {
            return f64::INFINITY;
        }
        match *self {
            Self::Exponential { rate } => s / (rate - s),
            Self::Pareto { .. } => f64::INFINITY,
            Self::Gamma { shape, rate } => (-shape * (-s / rate).ln_1p()).exp_m1(),
        }
    }

    /// `E[Y e^{sY}]`, the derivative of the MGF at `s`.
    pub fn tilted_mean(&self, s: f64) -> f64 {
        if s > 0.0 && s >= self.mgf_domain_bound() {
            return f64::INFINITY;
        }
        match *self {
            Self::Exponential { rate } => rate / (rate - s).powi(2),
            Self::Pareto { .. } => self.mean(),
            Self::Gamma { shape, rate } => shape / (rate - s) * (rate / (rate - s)).powf(shape),
        }
    }

    /// Draws one claim: inversion for Exponential and Pareto, Marsaglia–Tsang
    /// for Gamma.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Exponential { rate } => -open_unit(rng).ln() / rate,
            Self::Pareto { shape, scale } => {
                scale * ((-open_unit(rng).ln() / shape).exp() - 1.0)
            }
            Self::Gamma { shape, rate } => GammaSampler::new(shape, 1.0 / rate)
                .expect("validated gamma parameters")
                .sample(rng),
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            Self::Exponential { .. } => "exponential",
            Self::Pareto { .. } => "pareto",
            Self::Gamma { .. } => "gamma",
        }
    }
}

/// Premium rate, Poisson claim intensity and claim law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelSpec", into = "ModelSpec")]
pub struct ModelParams {
    c: f64,
    lambda: f64,
    claims: ClaimDistribution,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelSpec {
    c: f64,
    lambda: f64,
    claims: ClaimDistribution,
}

impl TryFrom<ModelSpec> for ModelParams {
    type Error = ModelError;

    fn try_from(s: ModelSpec) -> Result<Self, Self::Error> {
        ModelParams::new(s.c, s.lambda, s.claims)
    }
}

impl From<ModelParams> for ModelSpec {
    fn from(m: ModelParams) -> Self {
        ModelSpec {
            c: m.c,
            lambda: m.lambda,
            claims: m.claims,
        }
    }
}

impl ModelParams {
    pub fn new(c: f64, lambda: f64, claims: ClaimDistribution) -> Result<Self, ModelError> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(ModelError::InvalidParameter(format!(
                "premium rate c must be positive, got {c}"
            )));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(ModelError::InvalidParameter(format!(
                "claim intensity lambda must be positive, got {lambda}"
            )));
        }
        let lambda_mu = lambda * claims.mean();
        if c <= lambda_mu {
            return Err(ModelError::NetProfitViolated { c, lambda_mu });
        }
        Ok(Self { c, lambda, claims })
    }

    pub fn premium_rate(&self) -> f64 {
        self.c
    }

    pub fn claim_intensity(&self) -> f64 {
        self.lambda
    }

    pub fn claims(&self) -> &ClaimDistribution {
        &self.claims
    }

    /// `c - λμ`, the expected surplus gain per unit time.
    pub fn safety_margin(&self) -> f64 {
        self.c - self.lambda * self.claims.mean()
    }

    /// `λμ / c`, which is also the classical ruin probability from zero.
    pub fn loading_ratio(&self) -> f64 {
        self.lambda * self.claims.mean() / self.c
    }

    /// Cramér–Lundberg function `λ(E[e^{sY}] - 1) - cs`.
    pub fn lundberg(&self, s: f64) -> f64 {
        self.lambda * self.claims.mgf_minus_one(s) - self.c * s
    }
}

/// Which asymptotic regime governs the classical ruin probability.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "regime", rename_all = "snake_case")]
pub enum RegimeTag {
    /// Cramér condition holds with adjustment coefficient `r`.
    CramerLight { r: f64 },
    /// Integrated tail is subexponential (decided by family).
    SubexponentialHeavy,
    Neither { diagnostic: String },
}

impl RegimeTag {
    pub fn adjustment_coefficient(&self) -> Option<f64> {
        match self {
            Self::CramerLight { r } => Some(*r),
            _ => None,
        }
    }
}

const BRACKET_EPS: f64 = 1e-12;

/// Solves the Cramér condition `λE[e^{RY} - 1] = cR` for `R > 0`, or tags
/// the model as heavy-tailed.
///
/// Membership of `F_I` in the subexponential class is decided by family:
/// Pareto claims are heavy, everything else must pass the root solve.
pub fn classify_regime(model: &ModelParams, tol: Tolerance) -> RegimeTag {
    let bound = model.claims.mgf_domain_bound();
    if matches!(model.claims, ClaimDistribution::Pareto { .. }) {
        return RegimeTag::SubexponentialHeavy;
    }
    if !(bound > 0.0) {
        return RegimeTag::Neither {
            diagnostic: "claim law has no exponential moments".into(),
        };
    }
    let lo = BRACKET_EPS;
    let hi = (1.0 - BRACKET_EPS) * bound;
    let mut r = match find_root_bracketed(|s| model.lundberg(s), lo, hi, tol) {
        Ok(r) => r,
        Err(e) => {
            return RegimeTag::Neither {
                diagnostic: format!("adjustment coefficient solve failed: {e}"),
            }
        }
    };
    // Newton polish: the bracket width leaves a residual proportional to c
    for _ in 0..3 {
        let slope = model.lambda * model.claims.tilted_mean(r) - model.c;
        let next = r - model.lundberg(r) / slope;
        if !(slope > 0.0) || !(next > lo && next < hi) {
            break;
        }
        r = next;
    }
    let residual = model.lundberg(r);
    if !(r > 0.0 && r < bound) || residual.abs() > 1e-9 * (model.c * r).max(1.0) {
        return RegimeTag::Neither {
            diagnostic: format!("root {r} has residual {residual}"),
        };
    }
    RegimeTag::CramerLight { r }
}
