//! Closed-form and quadrature evaluations: classical ruin probabilities,
//! the limiting overshoot law, `P∞`, and the renewal constants `p0`, `q0`
//! and `C`.
//!
//! Signs follow the surplus: a deficit `x >= 0` corresponds to the surplus
//! level `y = -x`, so rescue probabilities are evaluated at `p(-x)`.

use std::cell::RefCell;

use serde::Serialize;
use thiserror::Error;

use crate::claims::{classify_regime, ClaimDistribution, ModelParams, RegimeTag};
use crate::mechanisms::{Mechanism, RescueFunction};
use crate::numerics::{integrate_finite, integrate_semi_infinite, NumericsError, Tolerance};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticError {
    #[error("regime unavailable: {0}")]
    RegimeUnavailable(String),
    #[error("p0 = {0} leaves no room for survival (need p0 < 1)")]
    DegenerateP0(f64),
    #[error("closed form needs exponential claims, got {0}")]
    NotExponential(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Limit `γ(z)` of `ψ_cl(u + z) / ψ_cl(u)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaKind {
    /// `γ(z) = e^{-Rz}`.
    Cramer { r: f64 },
    /// `γ ≡ 1`.
    HeavyTail,
}

impl GammaKind {
    fn at(&self, z: f64) -> f64 {
        match *self {
            Self::Cramer { r } => (-r * z).exp(),
            Self::HeavyTail => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PsiMethod {
    Exact,
    CramerAsymptotic,
    HeavyAsymptotic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PsiValue {
    pub value: f64,
    pub method: PsiMethod,
}

/// Prefactor `k` in `ψ_cl(u) ~ k e^{-Ru}`.
pub fn cramer_prefactor(model: &ModelParams, r: f64) -> f64 {
    let c = model.premium_rate();
    model.safety_margin() / (model.claim_intensity() * model.claims().tilted_mean(r) - c)
}

/// Classical ruin probability: exact for exponential claims, otherwise the
/// regime's asymptotic form.
///
/// The heavy-tailed form is `λ/(c - λμ) ∫_u^∞ F̄ = λμ/(c - λμ) F̄_I(u)`,
/// capped at 1.
pub fn psi_classical(model: &ModelParams, u: f64) -> Result<PsiValue, AnalyticError> {
    if !(u >= 0.0) {
        return Err(AnalyticError::InvalidArgument(format!("u must be >= 0, got {u}")));
    }
    let (c, lambda) = (model.premium_rate(), model.claim_intensity());
    if let ClaimDistribution::Exponential { rate } = *model.claims() {
        let value = lambda / (c * rate) * (-(rate - lambda / c) * u).exp();
        return Ok(PsiValue { value, method: PsiMethod::Exact });
    }
    match classify_regime(model, Tolerance::default()) {
        RegimeTag::CramerLight { r } => Ok(PsiValue {
            value: (cramer_prefactor(model, r) * (-r * u).exp()).min(1.0),
            method: PsiMethod::CramerAsymptotic,
        }),
        RegimeTag::SubexponentialHeavy => {
            let d = model.claims();
            let value = lambda * d.mean() / model.safety_margin() * d.integrated_tail_complement(u);
            Ok(PsiValue { value: value.min(1.0), method: PsiMethod::HeavyAsymptotic })
        }
        RegimeTag::Neither { diagnostic } => Err(AnalyticError::RegimeUnavailable(diagnostic)),
    }
}

/// `lim_u P_u(-U_T > x | T < ∞)` from the limit `γ` of the ruin function.
pub fn limit_overshoot_tail(gamma: GammaKind, model: &ModelParams, x: f64) -> Result<f64, AnalyticError> {
    if !(x >= 0.0) {
        return Err(AnalyticError::InvalidArgument(format!("x must be >= 0, got {x}")));
    }
    let (c, lambda) = (model.premium_rate(), model.claim_intensity());
    let d = model.claims();
    let convolution = integrate_finite(|z| gamma.at(x - z) * d.tail(z), 0.0, x, Tolerance::default())?;
    let beyond = d.mean() * d.integrated_tail_complement(x);
    let value = (c * gamma.at(x) - lambda * convolution - lambda * beyond) / model.safety_margin();
    Ok(value.clamp(0.0, 1.0))
}

// (e^{Rz} - 1) g(z), with the product forced to zero once g has underflowed.
fn tilted(r: f64, z: f64, g: f64) -> f64 {
    if g == 0.0 {
        return 0.0;
    }
    let w = (r * z).exp_m1();
    if w.is_finite() {
        w * g
    } else {
        0.0
    }
}

fn check_r(r: f64) -> Result<(), AnalyticError> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(AnalyticError::InvalidArgument(format!("R must be positive, got {r}")))
    }
}

/// Distribution function of the limiting deficit law `P∞` at `x >= 0`.
pub fn p_infinity_df(model: &ModelParams, r: f64, x: f64) -> Result<f64, AnalyticError> {
    check_r(r)?;
    if !(x >= 0.0) {
        return Err(AnalyticError::InvalidArgument(format!("x must be >= 0, got {x}")));
    }
    let d = model.claims();
    let integral = integrate_semi_infinite(|z| tilted(r, z, d.tail(z + x)), 0.0, Tolerance::default())?;
    let value = 1.0 - model.claim_intensity() / model.safety_margin() * integral;
    Ok(value.clamp(0.0, 1.0))
}

/// Density of `P∞` at `x >= 0`.
pub fn p_infinity_density(model: &ModelParams, r: f64, x: f64) -> Result<f64, AnalyticError> {
    check_r(r)?;
    let d = model.claims();
    let integral = integrate_semi_infinite(|z| tilted(r, z, d.density(z + x)), 0.0, Tolerance::default())?;
    Ok((model.claim_intensity() / model.safety_margin() * integral).max(0.0))
}

// ∫_0^∞ g(x) dx split at the deficits where a rescue table has kinks.
fn integrate_against_rescue<F>(p: &RescueFunction, g: F, tol: Tolerance) -> Result<f64, NumericsError>
where
    F: Fn(f64) -> f64,
{
    let mut cuts: Vec<f64> = match p {
        RescueFunction::Table { points } => {
            points.iter().map(|(y, _)| -y).filter(|x| *x > 0.0).collect()
        }
        _ => Vec::new(),
    };
    cuts.sort_by(f64::total_cmp);
    let mut total = 0.0;
    let mut a = 0.0;
    for b in cuts {
        total += integrate_finite(&g, a, b, tol)?;
        a = b;
    }
    Ok(total + integrate_semi_infinite(&g, a, tol)?)
}

/// `p0 = P_0(rescued at the first excursion, T < ∞) = (λ/c) ∫_0^∞ p(-x) F̄(x) dx`.
pub fn p0_renewal(p: &RescueFunction, model: &ModelParams) -> Result<f64, AnalyticError> {
    let (c, lambda) = (model.premium_rate(), model.claim_intensity());
    if let RescueFunction::ConstantP { p } = p {
        return Ok(p * model.loading_ratio());
    }
    let d = model.claims();
    let integral = integrate_against_rescue(p, |x| p.at(-x) * d.tail(x), Tolerance::default())?;
    Ok((lambda / c * integral).clamp(0.0, model.loading_ratio()))
}

/// `q0 = 1 - ψ(0) = (1 - ψ_cl(0)) / (1 - p0)`.
pub fn q0_renewal(p0: f64, model: &ModelParams) -> Result<f64, AnalyticError> {
    if !(p0 < 1.0) || !(p0 >= 0.0) {
        return Err(AnalyticError::DegenerateP0(p0));
    }
    Ok(((1.0 - model.loading_ratio()) / (1.0 - p0)).min(1.0))
}

/// Exact investor-rescue ruin probability for exponential claims:
/// `ψ(u) = ψ_cl(u) (1 - cδ p0/λ) / (1 - p0)`.
pub fn psi_modified_exact_exponential(
    p: &RescueFunction,
    model: &ModelParams,
    u: f64,
) -> Result<f64, AnalyticError> {
    let delta = match *model.claims() {
        ClaimDistribution::Exponential { rate } => rate,
        other => return Err(AnalyticError::NotExponential(other.family())),
    };
    let (c, lambda) = (model.premium_rate(), model.claim_intensity());
    // E[p(-X)] for X ~ Exp(δ), the deficit law from any starting point
    let mean_rescue = match p {
        RescueFunction::ConstantP { p } => *p,
        RescueFunction::ExponentialDecay { kappa } => delta / (delta + kappa),
        RescueFunction::Table { .. } => integrate_against_rescue(
            p,
            |x| p.at(-x) * delta * (-delta * x).exp(),
            Tolerance::default(),
        )?,
    };
    let p0 = lambda / (c * delta) * mean_rescue;
    if p0 >= 1.0 {
        return Err(AnalyticError::DegenerateP0(p0));
    }
    let psi_cl = psi_classical(model, u)?.value;
    Ok(psi_cl * (1.0 - mean_rescue) / (1.0 - p0))
}

// Outer integrals average nested quadratures, so they get a looser target.
fn outer_tolerance() -> Tolerance {
    Tolerance::with_abs(1e-10)
}

/// `C = ∫ ψ(y) P∞(dy)` for a caller-supplied `ψ` on `y < 0`.
///
/// Theorem-level hypothesis: `ψ` is continuous or monotone. This is assumed,
/// not checked.
pub fn cramer_constant_general<F>(psi_neg: F, model: &ModelParams, r: f64) -> Result<f64, AnalyticError>
where
    F: Fn(f64) -> f64,
{
    check_r(r)?;
    let failure = RefCell::new(None);
    let value = integrate_semi_infinite(
        |x| match p_infinity_density(model, r, x) {
            Ok(f) => psi_neg(-x) * f,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                0.0
            }
        },
        0.0,
        outer_tolerance(),
    )?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(value.clamp(0.0, 1.0))
}

/// `C = 1 - q0 ∫ p_y P∞(dy)` for investor rescue.
pub fn cramer_constant_renewal(p: &RescueFunction, model: &ModelParams, r: f64) -> Result<f64, AnalyticError> {
    check_r(r)?;
    let q0 = q0_renewal(p0_renewal(p, model)?, model)?;
    let failure = RefCell::new(None);
    let rescued = integrate_against_rescue(
        p,
        |x| match p_infinity_density(model, r, x) {
            Ok(f) => p.at(-x) * f,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                0.0
            }
        },
        outer_tolerance(),
    )?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok((1.0 - q0 * rescued).clamp(0.0, 1.0))
}

/// One `u` of an [`AsymptoticReport`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalyticRow {
    pub u: f64,
    pub psi_cl: f64,
    pub psi_cl_method: PsiMethod,
    /// Modified ruin probability where it is known exactly.
    pub psi_modified: Option<f64>,
}

/// Everything the analytic side can say about a model and mechanism.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticReport {
    pub regime: RegimeTag,
    #[serde(rename = "R")]
    pub r: Option<f64>,
    pub k: Option<f64>,
    #[serde(rename = "C")]
    pub c_constant: Option<f64>,
    pub p0: Option<f64>,
    pub q0: Option<f64>,
    pub notes: Vec<String>,
    pub rows: Vec<AnalyticRow>,
}

/// Builds the analytic report for `mech` on the given `u` grid.
pub fn asymptotic_report(
    model: &ModelParams,
    mech: &Mechanism,
    u_grid: &[f64],
) -> Result<AsymptoticReport, AnalyticError> {
    let regime = classify_regime(model, Tolerance::default());
    if let RegimeTag::Neither { diagnostic } = &regime {
        return Err(AnalyticError::RegimeUnavailable(diagnostic.clone()));
    }
    let r = regime.adjustment_coefficient();
    let k = r.map(|r| cramer_prefactor(model, r));
    let mut notes = Vec::new();
    let exponential = matches!(model.claims(), ClaimDistribution::Exponential { .. });

    let (p0, q0) = match mech {
        Mechanism::Classical => (Some(0.0), Some(1.0 - model.loading_ratio())),
        Mechanism::Investor { p } => {
            let p0 = p0_renewal(p, model)?;
            (Some(p0), Some(q0_renewal(p0, model)?))
        }
        _ => (None, None),
    };
    let c_constant = match (mech, r) {
        (Mechanism::Classical, Some(_)) => Some(1.0),
        (Mechanism::Investor { p }, Some(r)) => Some(cramer_constant_renewal(p, model, r)?),
        (m, Some(_)) if m.is_cumulative() => {
            notes.push("psi(y) depends on the remaining budget; C is estimated by Monte Carlo only".into());
            None
        }
        (_, Some(_)) => {
            notes.push("psi(y) for y < 0 has no closed form for this mechanism; C is estimated by Monte Carlo only".into());
            None
        }
        (_, None) => {
            notes.push(
                "heavy-tailed regime: psi(u)/psi_cl(u) -> 1 whenever psi(y) -> 1 as y -> -inf".into(),
            );
            None
        }
    };
    if !exponential {
        notes.push(match r {
            Some(_) => "psi_cl is the Cramer asymptotic k exp(-Ru); finite-u accuracy is not asserted".into(),
            None => "psi_cl is the heavy-tail asymptotic; finite-u accuracy is not asserted".into(),
        });
    }
    if let Some(c) = c_constant {
        if matches!(mech, Mechanism::Investor { .. }) {
            notes.push(format!("C = {c} assumes p_y continuous or monotone on y < 0"));
        }
    }

    let mut rows = Vec::with_capacity(u_grid.len());
    for &u in u_grid {
        let psi = psi_classical(model, u)?;
        let psi_modified = match mech {
            Mechanism::Classical if psi.method == PsiMethod::Exact => Some(psi.value),
            Mechanism::Investor { p } if exponential => Some(psi_modified_exact_exponential(p, model, u)?),
            // ψ(0) = 1 - q0 holds for every claim law
            Mechanism::Investor { .. } | Mechanism::Classical if u == 0.0 => q0.map(|q| 1.0 - q),
            _ => None,
        };
        rows.push(AnalyticRow {
            u,
            psi_cl: psi.value,
            psi_cl_method: psi.method,
            psi_modified,
        });
    }

    Ok(AsymptoticReport {
        regime,
        r,
        k,
        c_constant,
        p0,
        q0,
        notes,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn classic() -> ModelParams {
        ModelParams::new(2.0, 1.0, ClaimDistribution::exponential(1.0).unwrap()).unwrap()
    }

    fn gamma_model() -> ModelParams {
        ModelParams::new(3.0, 1.0, ClaimDistribution::gamma(2.0, 1.5).unwrap()).unwrap()
    }

    fn r_of(m: &ModelParams) -> f64 {
        classify_regime(m, Tolerance::default()).adjustment_coefficient().unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn classical_exact_values() {
        let m = classic();
        let v = psi_classical(&m, 0.0).unwrap();
        assert_eq!(v.method, PsiMethod::Exact);
        assert!(close(v.value, 0.5, 1e-15));
        assert!(close(psi_classical(&m, 2.0).unwrap().value, 0.1839397206, 1e-10));
        assert!(psi_classical(&m, 200.0).unwrap().value < 1e-40);
        assert!(psi_classical(&m, -1.0).is_err());
    }

    #[test]
    fn prefactor_matches_exponential_closed_form() {
        let m = classic();
        assert!(close(cramer_prefactor(&m, 0.5), 0.5, 1e-12));
        let m = ModelParams::new(1.5, 1.0, ClaimDistribution::exponential(2.0).unwrap()).unwrap();
        assert!(close(cramer_prefactor(&m, 4.0 / 3.0), 1.0 / 3.0, 1e-12));
    }

    #[test]
    fn heavy_asymptotic_normalisation() {
        let d = ClaimDistribution::pareto(2.5, 1.5).unwrap();
        let m = ModelParams::new(2.0, 1.0, d).unwrap();
        let v = psi_classical(&m, 10.0).unwrap();
        assert_eq!(v.method, PsiMethod::HeavyAsymptotic);
        // λμ/(c-λμ) = 1 here, so the value is F̄_I(10)
        assert!(close(v.value, d.integrated_tail_complement(10.0), 1e-15));
    }

    #[test]
    fn overshoot_examples() {
        let m = classic();
        for x in [0.0, 0.5, 3.0, 12.0] {
            assert!(close(limit_overshoot_tail(GammaKind::HeavyTail, &m, x).unwrap(), 1.0, 1e-8));
        }
        let heavy = ModelParams::new(2.0, 1.0, ClaimDistribution::pareto(2.5, 1.5).unwrap()).unwrap();
        assert!(close(limit_overshoot_tail(GammaKind::HeavyTail, &heavy, 7.0).unwrap(), 1.0, 1e-8));
        let cr = GammaKind::Cramer { r: 0.5 };
        assert!(close(limit_overshoot_tail(cr, &m, 0.0).unwrap(), 1.0, 1e-12));
        assert!(close(limit_overshoot_tail(cr, &m, 1.0).unwrap(), 0.3678794412, 1e-10));
    }

    #[test]
    fn p_infinity_examples() {
        let m = classic();
        assert!(p_infinity_df(&m, 0.5, 0.0).unwrap() <= 1e-8);
        assert!(close(p_infinity_df(&m, 0.5, 1.0).unwrap(), 0.6321205588, 1e-9));
        assert!(close(p_infinity_df(&m, 0.5, 50.0).unwrap(), 1.0, 1e-8));
        assert!(close(p_infinity_density(&m, 0.5, 1.0).unwrap(), (-1.0f64).exp(), 1e-9));
        let g = gamma_model();
        assert!(p_infinity_df(&g, r_of(&g), 0.0).unwrap() <= 1e-8);
        assert!(p_infinity_df(&m, -0.5, 1.0).is_err());
    }

    #[test]
    fn p0_examples() {
        let m = classic();
        let p = RescueFunction::constant(0.4).unwrap();
        assert!(close(p0_renewal(&p, &m).unwrap(), 0.4 * 0.5, 1e-15));
        let p = RescueFunction::exp_decay(1.0).unwrap();
        assert!(close(p0_renewal(&p, &m).unwrap(), 0.25, 1e-10));
        let p = RescueFunction::constant(0.0).unwrap();
        assert_eq!(p0_renewal(&p, &m).unwrap(), 0.0);
    }

    #[test]
    fn q0_examples() {
        let m = classic();
        assert!(close(q0_renewal(0.0, &m).unwrap(), 0.5, 1e-15));
        assert!(close(q0_renewal(0.25, &m).unwrap(), 2.0 / 3.0, 1e-12));
        assert!(close(q0_renewal(0.125, &m).unwrap(), 0.5 / 0.875, 1e-12));
        assert_eq!(q0_renewal(1.0, &m), Err(AnalyticError::DegenerateP0(1.0)));
    }

    #[test]
    fn exact_exponential_examples() {
        let m = classic();
        for u in [0.0, 1.0, 4.0] {
            let cl = psi_classical(&m, u).unwrap().value;
            let half = psi_modified_exact_exponential(&RescueFunction::constant(0.5).unwrap(), &m, u).unwrap();
            assert!(close(half, cl * 2.0 / 3.0, 1e-12));
            let decay = psi_modified_exact_exponential(&RescueFunction::exp_decay(1.0).unwrap(), &m, u).unwrap();
            assert!(close(decay, cl * 2.0 / 3.0, 1e-12));
            let none = psi_modified_exact_exponential(&RescueFunction::constant(0.0).unwrap(), &m, u).unwrap();
            assert!(close(none, cl, 1e-15));
        }
        let g = gamma_model();
        assert!(matches!(
            psi_modified_exact_exponential(&RescueFunction::constant(0.5).unwrap(), &g, 1.0),
            Err(AnalyticError::NotExponential("gamma"))
        ));
    }

    #[test]
    fn renewal_constant_examples() {
        let m = classic();
        let c = cramer_constant_renewal(&RescueFunction::exp_decay(1.0).unwrap(), &m, 0.5).unwrap();
        assert!(close(c, 2.0 / 3.0, 1e-8), "{c}");
        let c = cramer_constant_renewal(&RescueFunction::constant(0.0).unwrap(), &m, 0.5).unwrap();
        assert!(close(c, 1.0, 1e-8));
        let c = cramer_constant_renewal(&RescueFunction::constant(1.0).unwrap(), &m, 0.5).unwrap();
        assert!(close(c, 0.0, 1e-8));
    }

    #[test]
    fn general_constant_examples() {
        let m = classic();
        assert!(close(cramer_constant_general(|_| 1.0, &m, 0.5).unwrap(), 1.0, 1e-8));
        assert!(close(cramer_constant_general(|_| 0.0, &m, 0.5).unwrap(), 0.0, 1e-12));
        let p = RescueFunction::exp_decay(1.0).unwrap();
        let psi0 = 1.0 - q0_renewal(p0_renewal(&p, &m).unwrap(), &m).unwrap();
        let general = cramer_constant_general(|y| 1.0 - (1.0 * y).exp() * (1.0 - psi0), &m, 0.5).unwrap();
        let renewal = cramer_constant_renewal(&p, &m, 0.5).unwrap();
        assert!(close(general, renewal, 1e-8));
    }

    #[test]
    fn table_rescue_agrees_with_exponential_shortcut() {
        // a table that is exactly constant is handled by the quadrature path
        let m = classic();
        let p = RescueFunction::table(vec![(-3.0, 0.5), (-1.0, 0.5)]).unwrap();
        assert!(close(p0_renewal(&p, &m).unwrap(), 0.25, 1e-10));
        let v = psi_modified_exact_exponential(&p, &m, 2.0).unwrap();
        assert!(close(v, psi_classical(&m, 2.0).unwrap().value * 2.0 / 3.0, 1e-10));
    }

    #[test]
    fn renewal_identity_and_fixed_point() {
        let m = classic();
        for p in [
            RescueFunction::exp_decay(0.3).unwrap(),
            RescueFunction::constant(0.7).unwrap(),
            RescueFunction::table(vec![(-4.0, 0.0), (-0.5, 0.9)]).unwrap(),
        ] {
            let c = cramer_constant_renewal(&p, &m, 0.5).unwrap();
            for u in [0.0, 1.5, 6.0] {
                let ratio = psi_modified_exact_exponential(&p, &m, u).unwrap() / psi_classical(&m, u).unwrap().value;
                assert!(close(ratio, c, 1e-8), "{p:?} u={u} ratio={ratio} C={c}");
            }
            let q0 = q0_renewal(p0_renewal(&p, &m).unwrap(), &m).unwrap();
            let psi0 = psi_modified_exact_exponential(&p, &m, 0.0).unwrap();
            assert!(close(1.0 - psi0, q0, 1e-10));
        }
    }

    #[test]
    fn report_fields() {
        let m = classic();
        let mech = Mechanism::Investor { p: RescueFunction::exp_decay(1.0).unwrap() };
        let rep = asymptotic_report(&m, &mech, &[0.0, 2.0]).unwrap();
        assert!(close(rep.r.unwrap(), 0.5, 1e-10));
        assert!(close(rep.k.unwrap(), 0.5, 1e-10));
        assert!(close(rep.c_constant.unwrap(), 2.0 / 3.0, 1e-8));
        assert!(close(rep.p0.unwrap(), 0.25, 1e-10));
        assert!(close(rep.rows[1].psi_modified.unwrap(), 0.1839397206 * 2.0 / 3.0, 1e-9));
        let json = serde_json::to_value(&rep).unwrap();
        assert_eq!(json["regime"]["regime"], "cramer_light");
        assert!(json["C"].is_number());

        let heavy = ModelParams::new(2.0, 1.0, ClaimDistribution::pareto(2.5, 1.5).unwrap()).unwrap();
        let rep = asymptotic_report(&heavy, &Mechanism::CumulativeParisianFixed { r: 1.0 }, &[2.0]).unwrap();
        assert_eq!(rep.c_constant, None);
        assert_eq!(rep.r, None);
        assert_eq!(rep.rows[0].psi_modified, None);

        let cum = asymptotic_report(&m, &Mechanism::CumulativeParisianFixed { r: 1.0 }, &[1.0]).unwrap();
        assert_eq!(cum.c_constant, None);
    }

    fn grid() -> Vec<f64> {
        (0..20).map(|i| 0.4 * i as f64).collect()
    }

    #[test]
    fn p_infinity_matches_overshoot_on_grid() {
        for m in [classic(), gamma_model()] {
            let r = r_of(&m);
            let mut last = 0.0;
            for x in grid() {
                let df = p_infinity_df(&m, r, x).unwrap();
                let tail = limit_overshoot_tail(GammaKind::Cramer { r }, &m, x).unwrap();
                assert!(close(1.0 - df, tail, 1e-8), "{m:?} x={x} df={df} tail={tail}");
                assert!(df + 1e-12 >= last);
                last = df;
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn stronger_rescue_lowers_constant(k1 in 0.1f64..3.0, dk in 0.0f64..3.0, delta in 0.5f64..3.0, load in 0.1f64..1.5) {
            // smaller κ means p_y = e^{κy} is pointwise larger
            let d = ClaimDistribution::exponential(delta).unwrap();
            let m = ModelParams::new((1.0 + load) / delta, 1.0, d).unwrap();
            let r = r_of(&m);
            let strong = cramer_constant_renewal(&RescueFunction::exp_decay(k1).unwrap(), &m, r).unwrap();
            let weak = cramer_constant_renewal(&RescueFunction::exp_decay(k1 + dk).unwrap(), &m, r).unwrap();
            prop_assert!(strong <= weak + 1e-9);
            prop_assert!(strong > 0.0 && weak <= 1.0);
        }

        #[test]
        fn gamma_p_infinity_is_proper(k in 0.8f64..4.0, beta in 0.5f64..3.0, load in 0.2f64..1.5) {
            let d = ClaimDistribution::gamma(k, beta).unwrap();
            let m = ModelParams::new((1.0 + load) * d.mean(), 1.0, d).unwrap();
            let r = r_of(&m);
            prop_assert!(p_infinity_df(&m, r, 0.0).unwrap() <= 1e-8);
            let far = 60.0 * d.mean() + 40.0 / (beta - r);
            prop_assert!(p_infinity_df(&m, r, far).unwrap() >= 1.0 - 1e-8);
        }
    }
}
