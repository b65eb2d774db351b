use ruinkit::analytic::{psi_classical, psi_modified_exact_exponential};
use ruinkit::claims::{ClaimDistribution, ModelParams};
use ruinkit::mechanisms::{Mechanism, RateFunction, RescueFunction};
use ruinkit::simulate::{
    estimate_recovery_probability, estimate_ruin, path_outcomes, run_study, BarrierMode, PathVerdict,
    SimConfig,
};

fn base() -> ModelParams {
    ModelParams::new(2.0, 1.0, ClaimDistribution::exponential(1.0).unwrap()).unwrap()
}

#[test]
fn classical_estimates_match_closed_form() {
    let m = base();
    for (i, u) in [0.0, 1.0, 2.0, 5.0].into_iter().enumerate() {
        let est = estimate_ruin(&m, &Mechanism::Classical, u, &SimConfig::new(200_000, i as u64)).unwrap();
        let exact = psi_classical(&m, u).unwrap().value;
        assert!((est.p_hat - exact).abs() <= 3.0 * est.stderr, "u={u} {est:?} vs {exact}");
    }
}

#[test]
fn constant_rescue_matches_closed_form() {
    let m = base();
    let p = RescueFunction::constant(0.5).unwrap();
    let exact = psi_modified_exact_exponential(&p, &m, 2.0).unwrap();
    assert!((exact - 0.1226264804).abs() < 1e-9);
    let est = estimate_ruin(&m, &Mechanism::Investor { p }, 2.0, &SimConfig::new(300_000, 9)).unwrap();
    assert!((est.p_hat - exact).abs() <= 3.0 * est.stderr, "{est:?}");
}

#[test]
fn gamma_claims_follow_cramer_asymptotic() {
    // k e^{-Ru} is asymptotic only, so allow 5% on top of the noise
    let m = ModelParams::new(2.4, 1.0, ClaimDistribution::gamma(2.0, 2.0).unwrap()).unwrap();
    let u = 6.0;
    let est = estimate_ruin(&m, &Mechanism::Classical, u, &SimConfig::new(400_000, 5)).unwrap();
    let approx = psi_classical(&m, u).unwrap().value;
    assert!((est.p_hat - approx).abs() <= 3.0 * est.stderr + 0.05 * approx, "{} vs {approx}", est.p_hat);
}

#[test]
fn heavy_normalisation_tracks_monte_carlo() {
    // ρ/(1-ρ) = 2 here, so the two readings of the heavy-tail formula differ
    // by a factor of two and MC must side with λ/(c-λμ) ∫_u^∞ F̄.
    let d = ClaimDistribution::pareto(2.5, 1.5).unwrap();
    let m = ModelParams::new(1.5, 1.0, d).unwrap();
    let u = 30.0;
    let mut cfg = SimConfig::new(100_000, 17);
    cfg.barrier = BarrierMode::Auto { eps_trunc: 1e-3 };
    let est = estimate_ruin(&m, &Mechanism::Classical, u, &cfg).unwrap();
    let formula = psi_classical(&m, u).unwrap().value;
    let bare = d.integrated_tail_complement(u);
    assert!((formula / bare - 2.0).abs() < 1e-12);
    let miss = |v: f64| (est.p_hat / v).ln().abs();
    assert!(miss(formula) < miss(bare), "mc {} formula {formula} bare {bare}", est.p_hat);
}

#[test]
fn raising_the_barrier_stays_within_bias_bound() {
    let m = base();
    let mech = Mechanism::ParisianFixed { r: 0.5 };
    let mut low = SimConfig::new(200_000, 4);
    low.barrier = BarrierMode::Auto { eps_trunc: 1e-2 };
    let mut high = low;
    high.barrier = BarrierMode::Auto { eps_trunc: 1e-6 };
    let a = estimate_ruin(&m, &mech, 1.0, &low).unwrap();
    let b = estimate_ruin(&m, &mech, 1.0, &high).unwrap();
    assert!((a.p_hat - b.p_hat).abs() <= a.truncation_bias_bound + 3.0 * a.stderr.max(b.stderr));
}

#[test]
fn mechanism_ruin_implies_classical_ruin_pathwise() {
    let m = base();
    let mechs = [
        Mechanism::ParisianFixed { r: 0.3 },
        Mechanism::CumulativeParisianFixed { r: 0.3 },
        Mechanism::Omega { omega: RateFunction::step(vec![-1.0], vec![0.5, 2.0]).unwrap() },
        Mechanism::DebitInterest { debit_rate: 0.8 },
        Mechanism::Investor { p: RescueFunction::exp_decay(0.5).unwrap() },
    ];
    for mech in &mechs {
        for o in path_outcomes(&m, mech, 0.5, &SimConfig::new(20_000, 3)).unwrap() {
            if o.verdict == PathVerdict::Ruined {
                assert!(o.classical_ruin, "{mech:?}");
            }
            assert_eq!(o.classical_ruin, o.first_passage_deficit.is_some());
        }
    }
}

#[test]
fn stricter_clocks_ruin_more_often() {
    let m = base();
    let cfg = SimConfig::new(50_000, 21);
    let short = run_study(&m, &Mechanism::ParisianFixed { r: 0.2 }, 1.0, &cfg).unwrap();
    let long = run_study(&m, &Mechanism::ParisianFixed { r: 2.0 }, 1.0, &cfg).unwrap();
    let cumulative = run_study(&m, &Mechanism::CumulativeParisianFixed { r: 0.2 }, 1.0, &cfg).unwrap();
    // same streams: a longer clock can only save paths, a shared budget only lose them
    assert!(long.counts.ruined <= short.counts.ruined);
    assert!(cumulative.counts.ruined >= short.counts.ruined);
    assert_eq!(short.counts.classical_ruined, long.counts.classical_ruined);
}

#[test]
fn omega_recovery_is_exponential_in_deficit() {
    // p_y = E[e^{-ω τ}] = e^{θ y} with cθ - λθ/(δ+θ) = ω
    let m = base();
    let omega = 0.5;
    let theta = (-0.5 + (0.25f64 + 4.0).sqrt()) / 4.0;
    let mech = Mechanism::Omega { omega: RateFunction::constant(omega).unwrap() };
    for (k, y) in [-0.5f64, -1.5, -2.5].into_iter().enumerate() {
        let est = estimate_recovery_probability(&m, &mech, -y, 100_000, k as u64).unwrap();
        let exact = (theta * y).exp();
        assert!((est.p_hat - exact).abs() <= 3.0 * est.stderr, "y={y} {} vs {exact}", est.p_hat);
    }
}
