use gazeval_core::stats::{
    binom_half_cdf, chi2_survival, f_survival, ln_gamma, one_way_anova, reg_inc_beta, t_quantile, tukey_kramer,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{Binomial, ChiSquared, ContinuousCDF, DiscreteCDF, FisherSnedecor, StudentsT};
use statrs::function::beta::beta_reg;

#[test]
fn special_functions_agree_with_statrs() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..500 {
        let x = rng.random_range(0.1..50.0);
        assert!((ln_gamma(x) - statrs::function::gamma::ln_gamma(x)).abs() < 1e-10 * (1.0 + x));
        let (a, b, t) = (rng.random_range(0.2..40.0), rng.random_range(0.2..40.0), rng.random::<f64>());
        assert!((reg_inc_beta(a, b, t) - beta_reg(a, b, t)).abs() < 1e-10, "I({a},{b},{t})");
        let (d1, d2, f) = (rng.random_range(1..8) as f64, rng.random_range(2..400) as f64, rng.random_range(0.0..15.0));
        let want = FisherSnedecor::new(d1, d2).unwrap().sf(f);
        assert!((f_survival(f, d1, d2) - want).abs() < 1e-10, "F({d1},{d2}) at {f}");
        let (k, c) = (rng.random_range(1..6) as f64, rng.random_range(0.0..30.0));
        assert!((chi2_survival(c, k) - ChiSquared::new(k).unwrap().sf(c)).abs() < 1e-10);
        let nu = rng.random_range(1..60) as f64;
        let want = StudentsT::new(0.0, 1.0, nu).unwrap().inverse_cdf(0.975);
        assert!((t_quantile(0.975, nu) - want).abs() < 1e-8, "t({nu})");
    }
    for n in 1..80u64 {
        let bin = Binomial::new(0.5, n).unwrap();
        for k in 0..=n {
            assert!((binom_half_cdf(k, n) - bin.cdf(k)).abs() < 1e-12, "B({k}; {n})");
        }
    }
}

#[test]
fn anova_matches_direct_sums() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    for _ in 0..100 {
        let k = rng.random_range(2..6);
        let groups: Vec<Vec<f64>> = (0..k)
            .map(|g| {
                let shift = rng.random_range(-1.0..1.0) * g as f64;
                (0..rng.random_range(2..25)).map(|_| shift + rng.random_range(-3.0..3.0)).collect()
            })
            .collect();
        let all: Vec<f64> = groups.iter().flatten().copied().collect();
        let n = all.len() as f64;
        let grand = all.iter().rev().sum::<f64>() / n;
        let ss_total: f64 = all.iter().map(|v| (v - grand).powi(2)).sum();
        let ss_within: f64 = groups
            .iter()
            .map(|g| {
                let m = g.iter().sum::<f64>() / g.len() as f64;
                g.iter().map(|v| (v - m).powi(2)).sum::<f64>()
            })
            .sum();
        let f = ((ss_total - ss_within) / (k - 1) as f64) / (ss_within / (n - k as f64));
        let r = one_way_anova(&groups).unwrap();
        assert!((r.f - f).abs() <= 1e-10 * f.max(1.0), "{} vs {f}", r.f);
        let p = FisherSnedecor::new((k - 1) as f64, n - k as f64).unwrap().sf(f);
        assert!((r.p - p).abs() < 1e-6);
    }
}

#[test]
fn tukey_flags_only_the_shifted_group() {
    let base = [1.0, 2.0, 3.0, 2.5, 1.5];
    let shifted: Vec<f64> = base.iter().map(|v| v + 20.0).collect();
    let t = tukey_kramer(&[base.to_vec(), base.iter().map(|v| v + 0.1).collect(), shifted]).unwrap();
    let sig: Vec<(usize, usize)> = t.significant_pairs().map(|p| (p.group_a, p.group_b)).collect();
    assert_eq!(sig, vec![(0, 2), (1, 2)]);
}
