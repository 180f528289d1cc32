//! Cross-module checks that need the simulator, the fit machinery and the
//! selection layers together.

use bivsurv::brbvs::{run_brbvs, BrbvsConfig};
use bivsurv::copula::{self, CopulaId};
use bivsurv::fit::{fit_model, summarize};
use bivsurv::likelihood::{BaselineConfig, ModelSpec};
use bivsurv::margins::{link_eval, link_inverse, LinkKind};
use bivsurv::ranking::{abs_measure, fim_measure, rank_margin};
use bivsurv::simulator::{baseline_survival, generate, transformed_survival, Scenario, SimConfig};
use bivsurv::stats;

/// The PH/PO survival composition used by the margins matches the
/// generator's transformed value: S = G(g(S0(t)) + x'beta).
#[test]
fn margin_link_composition_matches_generator_transform() {
    for link in [LinkKind::Ph, LinkKind::Po] {
        for &shift in &[-1.2, 0.0, 0.9] {
            for i in 1..60 {
                let t = 0.1 * i as f64;
                let s0 = baseline_survival(t);
                let direct = link_inverse(link, link_eval(link, s0).unwrap() + shift);
                let gen = transformed_survival(link, shift, t);
                assert!(
                    (direct - gen).abs() < 1e-8,
                    "{link:?} shift={shift} t={t}: {direct} vs {gen}"
                );
            }
        }
    }
}

/// Fitting uncensored Clayton-coupled pairs recovers a dependence level
/// matching the sample Kendall tau.
#[test]
fn clayton_theta_matches_empirical_kendall_tau() {
    // Zero covariate effects: the times are then monotone transforms of
    // the coupled uniforms, so their sample Kendall tau estimates the
    // copula's tau directly.
    let mut cfg = SimConfig::new(1500, 3, Scenario::A, 31);
    cfg.beta11 = 0.0;
    cfg.beta12 = 0.0;
    cfg.beta21 = 0.0;
    cfg.beta22 = 0.0;
    let sim = generate(&cfg).unwrap();
    // Build an uncensored copy from the true times.
    let d = bivsurv::data::Dataset::new(
        sim.truth.t_true1.clone(),
        vec![None; sim.dataset.n],
        sim.truth.t_true2.clone(),
        vec![None; sim.dataset.n],
        vec![bivsurv::data::CensorCode::Uncensored; sim.dataset.n],
        vec![bivsurv::data::CensorCode::Uncensored; sim.dataset.n],
        sim.dataset.x.clone(),
        sim.dataset.names.clone(),
    )
    .unwrap();
    let spec = ModelSpec::new(
        CopulaId::Clayton,
        LinkKind::Ph,
        LinkKind::Po,
        vec![],
        vec![],
        vec![],
    );
    let fm = fit_model(&spec, &d).unwrap();
    assert!(fm.converged());
    let sample_tau = stats::kendall_tau(&sim.truth.t_true1, &sim.truth.t_true2);
    let fitted_tau = copula::kendall_tau(CopulaId::Clayton, fm.theta_hat.estimate).unwrap();
    assert!(
        (fitted_tau - sample_tau).abs() < 0.05,
        "fitted tau {fitted_tau} vs sample tau {sample_tau}"
    );
}

/// Rescaling a covariate column roughly halves its coefficient and
/// quadruples the matching information diagonal, leaving the
/// information-based ranking unchanged.
#[test]
fn fim_ranking_invariant_under_column_rescaling() {
    let sim = generate(&SimConfig::new(700, 3, Scenario::A, 77)).unwrap();
    let spec = ModelSpec::new(
        CopulaId::Clayton,
        LinkKind::Ph,
        LinkKind::Po,
        vec![0, 1, 2],
        vec![0, 1, 2],
        vec![],
    );
    let base = fit_model(&spec, &sim.dataset).unwrap();
    assert!(base.converged());

    let mut scaled = sim.dataset.clone();
    for i in 0..scaled.n {
        scaled.x[i * scaled.p] *= 2.0;
    }
    let refit = fit_model(&spec, &scaled).unwrap();
    assert!(refit.converged());

    let b0 = base.delta_hat[base.layout.beta_index(1, 0)];
    let b1 = refit.delta_hat[refit.layout.beta_index(1, 0)];
    assert!((b1 - b0 / 2.0).abs() < 0.05, "beta {b0} -> {b1}");

    for margin in [1u8, 2u8] {
        let r0 = rank_margin(margin, &fim_measure(&base, margin).unwrap());
        let r1 = rank_margin(margin, &fim_measure(&refit, margin).unwrap());
        assert_eq!(r0.order, r1.order, "margin {margin} ranking changed");
        // Sign flips leave the scores unchanged too.
        let mut flipped = sim.dataset.clone();
        for i in 0..flipped.n {
            flipped.x[i * flipped.p + 1] = -flipped.x[i * flipped.p + 1];
        }
        let refl = fit_model(&spec, &flipped).unwrap();
        let s0 = fim_measure(&base, margin).unwrap();
        let s1 = fim_measure(&refl, margin).unwrap();
        assert!(
            (s0[1] - s1[1]).abs() < 0.15 * (1.0 + s0[1].abs()),
            "margin {margin} sign-flip moved the score {} -> {}",
            s0[1],
            s1[1]
        );
        let a0 = abs_measure(&base, margin);
        let a1 = abs_measure(&refl, margin);
        assert!((a0[1] - a1[1]).abs() < 0.1 * (1.0 + a0[1]));
    }
}

/// Deterministic end-to-end selection: identical dataset, config and seed
/// reproduce the serialized result bit for bit, in serial or threaded
/// execution.
#[test]
fn brbvs_deterministic_and_thread_invariant() {
    let sim = generate(&SimConfig::new(220, 4, Scenario::A, 55)).unwrap();
    let mut cfg = BrbvsConfig::new(3, CopulaId::Fgm, (LinkKind::Po, LinkKind::Po), 110);
    cfg.b_reps = 3;
    cfg.seed = 99;
    cfg.baseline = BaselineConfig { interior_knots: 4 };
    let a = run_brbvs(&sim.dataset, &cfg).unwrap();
    let b = run_brbvs(&sim.dataset, &cfg).unwrap();
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let c = pool.install(|| run_brbvs(&sim.dataset, &cfg)).unwrap();
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&c).unwrap()
    );
}

/// Selection probabilities sum to at most one per size and the selected
/// set always sits inside the argmax table.
#[test]
fn brbvs_probability_invariants() {
    let sim = generate(&SimConfig::new(260, 5, Scenario::A, 13)).unwrap();
    let mut cfg = BrbvsConfig::new(4, CopulaId::Clayton, (LinkKind::Ph, LinkKind::Po), 130);
    cfg.b_reps = 4;
    cfg.seed = 5;
    cfg.baseline = BaselineConfig { interior_knots: 4 };
    let res = run_brbvs(&sim.dataset, &cfg).unwrap();
    for sel in [&res.margin1, &res.margin2] {
        for (k, table) in sel.pi_hat.iter().enumerate() {
            let total: f64 = table.iter().map(|s| s.probability).sum();
            assert!(total <= 1.0 + 1e-12, "k={} total={total}", k + 1);
            let max = table
                .iter()
                .map(|s| s.probability)
                .fold(0.0f64, f64::max);
            let eff = (res.subsamples_total - res.subsamples_failed) as f64;
            assert!(max >= 1.0 / eff - 1e-12);
            assert_eq!(sel.a_hat[k].probability, max);
        }
        assert!(sel.selected_size <= cfg.kmax - 1 || sel.selected_size == cfg.kmax.saturating_sub(1).max(sel.selected_size));
        assert!(sel.selected_size < cfg.kmax, "selected size must stay below kmax");
        if sel.selected_size > 0 {
            assert_eq!(sel.selected_indices, sel.a_hat[sel.selected_size - 1].indices);
        }
        for (_, f) in &sel.frequencies {
            assert!(*f > 0.0 && *f <= 1.0);
        }
    }
}

/// The fitted marginal model evaluates to a proper survival curve.
#[test]
fn fitted_margin_model_is_proper() {
    let sim = generate(&SimConfig::new(500, 3, Scenario::A, 19)).unwrap();
    let spec = ModelSpec::new(
        CopulaId::Clayton,
        LinkKind::Ph,
        LinkKind::Po,
        vec![0, 1, 2],
        vec![0, 1, 2],
        vec![],
    );
    let fm = fit_model(&spec, &sim.dataset).unwrap();
    assert!(fm.converged());
    for margin in [1u8, 2u8] {
        let mm = fm.margin_model(&sim.dataset, margin).unwrap();
        let x = [0.2, -0.4, 0.1];
        let mut prev = 1.0f64;
        for i in 1..40 {
            let t = 0.1 * i as f64;
            let s = mm.survival(t, &x).unwrap();
            assert!(s > 0.0 && s < 1.0);
            assert!(s < prev);
            assert!(mm.density(t, &x).unwrap() >= 0.0);
            prev = s;
        }
    }
}

/// The fit summary JSON round-trips and the human rendering carries the
/// headline fields.
#[test]
fn summary_roundtrip_on_simulated_fit() {
    let sim = generate(&SimConfig::new(400, 3, Scenario::A, 3)).unwrap();
    let mut spec = ModelSpec::new(
        CopulaId::Clayton,
        LinkKind::Ph,
        LinkKind::Po,
        vec![0, 1, 2],
        vec![0, 1, 2],
        vec![0],
    );
    spec.baseline = BaselineConfig { interior_knots: 5 };
    let fm = fit_model(&spec, &sim.dataset).unwrap();
    let report = summarize(&fm);
    let json = serde_json::to_string_pretty(&report).unwrap();
    let back: bivsurv::fit::SummaryReport = serde_json::from_str(&json).unwrap();
    assert_eq!(report, back);
    let text = format!("{report}");
    assert!(text.contains("EQUATION 3"));
    assert!(text.contains("(Intercept)"));
}
