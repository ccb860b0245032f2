//! Distributional checks of the alive filter against independent oracles.

use alive_smc::models::{compile_abc_hmm, AbcHmm, LgFamily, LgParam, LinearGaussianParams, UniformIidModel};
use alive_smc::oracles::grid_abc_log_likelihood;
use alive_smc::stats::{chi_square_uniform_pvalue, ks_two_sample, mean_se};
use alive_smc::{
    filter_estimate, gamma_estimate, predictor_estimate, run_filter, FilterOptions, TestFunction, Variant,
};

#[test]
fn stopping_time_is_negative_binomial() {
    // T - N is a sum of N geometric failure counts: mean N(1-p)/p,
    // variance N(1-p)/p^2
    let (p, n) = (0.3, 6);
    let model = UniformIidModel::new(p, 3);
    let opts = FilterOptions::new(n);
    let mut firsts = Vec::new();
    let mut thirds = Vec::new();
    for seed in 0..20_000 {
        let run = run_filter(&model, &opts, seed).unwrap();
        let t = run.stopping_times();
        firsts.push(t[0] as f64);
        thirds.push(t[2] as f64);
    }
    let mean = n as f64 / p;
    let sd = (n as f64 * (1.0 - p)).sqrt() / p;
    for xs in [&firsts, &thirds] {
        let (m, se) = mean_se(xs);
        assert!((m - mean).abs() < 3.0 * se, "{m} vs {mean}");
        let (_, v) = alive_smc::stats::mean_var(xs);
        assert!((v.sqrt() - sd).abs() / sd < 0.03, "sd {} vs {sd}", v.sqrt());
    }
}

fn ancestor_slot_counts(variant: Variant) -> Vec<u64> {
    // slot k = rank of the ancestor among the admissible parents
    let model = UniformIidModel::new(0.5, 2);
    let n = 4;
    let slots = if variant == Variant::Lgo { n } else { n - 1 };
    let mut counts = vec![0u64; slots];
    let opts = FilterOptions::new(n).with_variant(variant);
    for seed in 0..20_000 {
        let run = run_filter(&model, &opts, seed).unwrap();
        let prev = &run.steps[0];
        let mut admissible = prev.alive_indices().to_vec();
        if variant == Variant::Lgo {
            admissible.push(prev.final_index());
        }
        for &a in run.steps[1].ancestors() {
            counts[admissible.iter().position(|&x| x == a).unwrap()] += 1;
        }
    }
    counts
}

#[test]
fn ancestors_uniform_over_admissible_parents() {
    for variant in [Variant::Alive, Variant::Lgo] {
        let counts = ancestor_slot_counts(variant);
        let p = chi_square_uniform_pvalue(&counts);
        assert!(p > 1e-3, "{variant}: counts {counts:?} p = {p}");
    }
}

#[test]
fn lgo_and_alive_agree_in_law_on_iid_model() {
    // every kernel ignores its parent, so the ancestor rule cannot change
    // the law of the final-step estimates
    let model = UniformIidModel::new(0.4, 4);
    let phi = TestFunction::bounded(1.0, |x: &f64| *x);
    let sample = |variant: Variant, offset: u64| -> Vec<f64> {
        let opts = FilterOptions::new(8).with_variant(variant);
        (0..5000).map(|s| filter_estimate(run_filter(&model, &opts, offset + s).unwrap().final_step(), &phi)).collect()
    };
    let (_, p) = ks_two_sample(&sample(Variant::Alive, 0), &sample(Variant::Lgo, 1_000_000));
    assert!(p > 1e-3, "KS p = {p}");
}

#[test]
fn gamma_estimate_of_test_function_is_unbiased() {
    // gamma_n(phi) = p0^(n-1) * E[phi(U)] with phi(x) = x
    let (p0, n) = (0.5, 4);
    let model = UniformIidModel::new(p0, n);
    let phi = TestFunction::bounded(1.0, |x: &f64| *x);
    let opts = FilterOptions::new(3);
    let xs: Vec<f64> =
        (0..100_000).map(|s| gamma_estimate(&run_filter(&model, &opts, s).unwrap(), &phi).unwrap().value()).collect();
    let (m, se) = mean_se(&xs);
    let target = p0.powi(n as i32 - 1) * 0.5;
    assert!((m - target).abs() < 3.0 * se, "{m} vs {target} (se {se})");
}

#[test]
fn evidence_unbiased_against_grid_quadrature() {
    // the alive filter estimates P(|U_p - y_p| < eps for all p), which is
    // (2 eps)^n times the ABC likelihood computed by the grid oracle
    let params = LinearGaussianParams::new(0.8, 1.0).unwrap();
    let family = LgFamily { base: params.clone(), free: vec![LgParam::SigmaV2] };
    let obs = vec![0.7, -0.4, 1.5];
    let eps = 0.6;
    let hmm = AbcHmm::new(family, eps, obs.clone(), 0.0).unwrap();
    let model = compile_abc_hmm(&hmm, &[0.8]).unwrap();
    let exact = grid_abc_log_likelihood(&params, &obs, eps, 1200, 8.0).unwrap().exp() * (2.0 * eps).powi(3);
    for n in [2, 10] {
        let opts = FilterOptions::new(n);
        let xs: Vec<f64> = (0..40_000).map(|s| run_filter(&model, &opts, s).unwrap().log_evidence().exp()).collect();
        let (m, se) = mean_se(&xs);
        assert!((m - exact).abs() < 3.5 * se, "N={n}: {m} vs {exact} (se {se})");
    }
}

#[test]
fn lean_runs_match_full_runs() {
    let model = UniformIidModel::new(0.2, 6);
    let phi = TestFunction::bounded(1.0, |x: &f64| *x);
    for seed in 0..50 {
        let full = run_filter(&model, &FilterOptions::new(5), seed).unwrap();
        let lean = run_filter(&model, &FilterOptions::new(5).lean(true), seed).unwrap();
        assert_eq!(full.log_gamma, lean.log_gamma);
        assert_eq!(full.stopping_times(), lean.stopping_times());
        assert_eq!(filter_estimate(full.final_step(), &phi), filter_estimate(lean.final_step(), &phi));
        assert!(predictor_estimate(lean.final_step(), &phi).is_err());
    }
}
