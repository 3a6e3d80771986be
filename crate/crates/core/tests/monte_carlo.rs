use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use otrank::are::{kappa_d, kappa_monte_carlo};
use otrank::rng::substream;
use otrank::special::chi_d_quantile;

#[test]
fn kappa_agrees_with_ten_million_draws() {
    for d in 2..=10 {
        let exact = kappa_d(d).unwrap().value();
        let mc = kappa_monte_carlo(d, 10_000_000, 40 + d as u64).unwrap();
        let z = (mc.value - exact).abs() / mc.error_estimate;
        assert!(z <= 3.0, "d={d}: mc {} ± {} vs {exact}", mc.value, mc.error_estimate);
    }
}

#[test]
fn chi3_quantiles_match_sampled_radii() {
    let n = 10_000_000usize;
    let chunks = 100;
    let mut radii: Vec<f64> = (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = substream(77, c as u64);
            (0..n / chunks)
                .map(|_| {
                    let s: f64 = (0..3).map(|_| rng.sample::<f64, _>(StandardNormal).powi(2)).sum();
                    s.sqrt()
                })
                .collect::<Vec<_>>()
        })
        .collect();
    radii.sort_unstable_by(f64::total_cmp);
    // beyond p = 0.9 the sampling error of the order statistic alone exceeds 1e-3
    for p in [0.01, 0.1, 0.25, 0.5, 0.75, 0.9] {
        let emp = radii[(p * n as f64) as usize];
        let q = chi_d_quantile(3, p).unwrap();
        assert!((emp - q).abs() < 1e-3, "p={p}: {emp} vs {q}");
    }
}

#[test]
fn chi3_quantiles_invert_the_closed_form_cdf() {
    let cdf = |r: f64| libm::erf(r / 2f64.sqrt()) - (2.0 / std::f64::consts::PI).sqrt() * r * (-r * r / 2.0).exp();
    for p in [1e-6, 0.01, 0.1, 0.25, 0.5, 0.75, 0.9, 0.99, 0.999999] {
        let q = chi_d_quantile(3, p).unwrap();
        assert!((cdf(q) - p).abs() < 1e-10, "p={p}: F(q) = {}", cdf(q));
    }
}
