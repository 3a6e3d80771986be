//! Asymptotic relative efficiencies of the rank Hotelling test against
//! Hotelling's `T²`: exact constants, the spherical-uniform `κ_d` in closed
//! form and by quadrature, and a Monte Carlo estimate under contamination.

use std::f64::consts::{LN_2, PI};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::spd_inverse;
use crate::quadrature::integrate;
use crate::reference::{ErdSpec, ScoreFunction};
use crate::rng::{substream, StreamRng};
use crate::special::{
    abs_normal_moment, chi_d_cdf, chi_d_pdf, double_factorial_odd, hyp2f1_at_minus_one, ln_gamma,
};
use crate::transport::PopulationMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AreMethod {
    ClosedForm,
    Quadrature,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AreResult {
    pub value: f64,
    pub method: AreMethod,
    pub error_estimate: f64,
}

/// Gaussian data, `Unif[0,1]^d` ERD: `3/π`.
pub fn are_gaussian_uniform_erd() -> f64 {
    3.0 / PI
}

/// `108/125`, the product-family bound for the uniform ERD.
pub fn hodges_lehmann_bound() -> f64 {
    108.0 / 125.0
}

/// `1`, the product-family bound for the Gaussian ERD.
pub fn chernoff_savage_bound() -> f64 {
    1.0
}

/// Limit of [`elliptical_bound`] as `d → ∞`.
pub fn elliptical_limit() -> f64 {
    81.0 / 125.0
}

/// `(81/500)(√(2d−1)+1)⁵ / (d²(√(2d−1)+5))`: lower bound over elliptical
/// families for the spherical-uniform ERD.
pub fn elliptical_bound(d: usize) -> Result<f64> {
    if d == 0 {
        return Err(Error::domain("elliptical_bound", "d must be at least 1"));
    }
    if d == 1 {
        // s = 1: (81/500)·32/6 reduces to 108/125
        return Ok(hodges_lehmann_bound());
    }
    let df = d as f64;
    let s = (2.0 * df - 1.0).sqrt();
    Ok(81.0 / 500.0 * (s + 1.0).powi(5) / (df * df * (s + 5.0)))
}

/// Ratio of non-centrality parameters, rank test over Hotelling.
pub fn are_general(noncentrality_rank: f64, noncentrality_hotelling: f64) -> Result<f64> {
    if !(noncentrality_rank > 0.0 && noncentrality_rank.is_finite()) {
        return Err(Error::domain("are_general", format!("rank non-centrality {noncentrality_rank}")));
    }
    if !(noncentrality_hotelling > 0.0 && noncentrality_hotelling.is_finite()) {
        return Err(Error::domain(
            "are_general",
            format!("Hotelling non-centrality {noncentrality_hotelling}"),
        ));
    }
    Ok(noncentrality_rank / noncentrality_hotelling)
}

/// `κ_d` from the hypergeometric closed form.
///
/// Evaluated with the stated conventions (`(2d−2)!!` as the odd product
/// `1·3⋯(2d−3)`); at `d = 1` this does not reproduce the quadrature value.
/// Returns `None` past `d = 100` where the two terms of `ω_d` cancel to
/// working precision.
pub fn kappa_closed_form(d: usize) -> Result<Option<f64>> {
    if d == 0 {
        return Err(Error::domain("kappa_d", "d must be at least 1"));
    }
    if d > KAPPA_CLOSED_FORM_MAX_D {
        return Ok(None);
    }
    let k = d as f64;
    let ln_g_half = ln_gamma(0.5 * k)?;
    let lead = (ln_gamma(k - 0.5)? - (k - 1.0) * LN_2 - 2.0 * ln_g_half).exp();
    let sqrt_2pi = (2.0 * PI).sqrt();
    let omega_a = if d == 1 {
        0.0
    } else {
        sqrt_2pi * (k - 1.0) * abs_normal_moment(k - 2.0)? / (0.5 * k * LN_2 + ln_g_half).exp()
    };
    let omega_b = sqrt_2pi * double_factorial_odd(d)? / ((k - 1.0) * LN_2 + 2.0 * ln_g_half).exp()
        * hyp2f1_at_minus_one(k - 0.5, 0.5 * k - 0.5, 0.5 * k + 0.5)?;
    let inner = lead + omega_a - omega_b;
    Ok(Some(3.0 / k * inner * inner))
}

pub const KAPPA_CLOSED_FORM_MAX_D: usize = 100;

const QUAD_ABS_TOL: f64 = 1e-10;
const QUAD_HALF_WIDTH: f64 = 40.0;

/// `(3/d)(E h(‖G‖) + (d−1) E[H(‖G‖)/‖G‖])²` with `H`, `h` the `χ_d`
/// distribution function and density and `G ~ N(0, I_d)`.
pub fn are_noncentrality_spherical(d: usize) -> Result<AreResult> {
    if d == 0 {
        return Err(Error::domain("are_noncentrality_spherical", "d must be at least 1"));
    }
    let k = d as f64;
    // χ_d mass sits within a few units of √(d − 1)
    let center = (k - 1.0).sqrt();
    let (a, b) = ((center - QUAD_HALF_WIDTH).max(0.0), center + QUAD_HALF_WIDTH);
    let density = integrate(|r| chi_d_pdf(d, r).powi(2), a, b, QUAD_ABS_TOL, 1e-13)?;
    let (ratio_value, ratio_error) = if d == 1 {
        (0.0, 0.0)
    } else {
        let cdf_err = std::cell::Cell::new(None);
        let ratio = integrate(
            |r| {
                if r <= 0.0 {
                    return 0.0;
                }
                match chi_d_cdf(d, r) {
                    Ok(h) => chi_d_pdf(d, r) * h / r,
                    Err(e) => {
                        cdf_err.set(Some(e));
                        0.0
                    }
                }
            },
            a,
            b,
            QUAD_ABS_TOL,
            1e-13,
        )?;
        if let Some(e) = cdf_err.take() {
            return Err(e);
        }
        (ratio.value, ratio.error)
    };
    let inner = density.value + (k - 1.0) * ratio_value;
    let inner_err = density.error + (k - 1.0) * ratio_error;
    Ok(AreResult {
        value: 3.0 / k * inner * inner,
        method: AreMethod::Quadrature,
        error_estimate: 6.0 / k * inner.abs() * inner_err,
    })
}

/// Both evaluations of `κ_d`; `value` is the quadrature one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kappa {
    pub d: usize,
    pub closed_form: Option<f64>,
    pub quadrature: AreResult,
    /// `|closed_form − quadrature|` when the closed form is available.
    pub discrepancy: Option<f64>,
}

impl Kappa {
    pub fn value(&self) -> f64 {
        self.quadrature.value
    }

    /// Whether the two evaluations agree within `tol`.
    pub fn agrees(&self, tol: f64) -> bool {
        self.discrepancy.is_some_and(|x| x <= tol)
    }
}

pub fn kappa_d(d: usize) -> Result<Kappa> {
    let closed_form = kappa_closed_form(d)?;
    let quadrature = are_noncentrality_spherical(d)?;
    Ok(Kappa {
        d,
        closed_form,
        quadrature,
        discrepancy: closed_form.map(|c| (c - quadrature.value).abs()),
    })
}

/// Monte Carlo estimate of the quadrature target, drawing `‖G‖` directly.
pub fn kappa_monte_carlo(d: usize, draws: usize, seed: u64) -> Result<AreResult> {
    use rand_distr::{ChiSquared, Distribution};
    use rayon::prelude::*;
    if d == 0 || draws < 2 {
        return Err(Error::invalid("kappa_monte_carlo needs d ≥ 1 and at least 2 draws"));
    }
    let chi2 = ChiSquared::new(d as f64).map_err(|e| Error::invalid(e.to_string()))?;
    const CHUNK: usize = 1 << 16;
    let k = d as f64;
    let chunks = draws.div_ceil(CHUNK);
    let sums = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = substream(seed, c as u64);
            let len = CHUNK.min(draws - c * CHUNK);
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..len {
                let r = chi2.sample(&mut rng).sqrt();
                let mut y = chi_d_pdf(d, r);
                if d > 1 {
                    y += (k - 1.0) * chi_d_cdf(d, r)? / r;
                }
                s += y;
                s2 += y * y;
            }
            Ok((s, s2))
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let (s, s2) = sums.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let n = draws as f64;
    let mean = s / n;
    let se = ((s2 / n - mean * mean).max(0.0) / (n - 1.0)).sqrt();
    Ok(AreResult {
        value: 3.0 / k * mean * mean,
        method: AreMethod::MonteCarlo,
        error_estimate: 6.0 / k * mean.abs() * se,
    })
}

/// Inputs for [`are_contamination`].
pub struct Contamination<'a> {
    /// Draws one observation from `f₁` into the buffer.
    pub sample_f1: &'a (dyn Fn(&mut StreamRng, &mut [f64]) + Sync),
    /// Draws one observation from the contaminating density `g`.
    pub sample_g: &'a (dyn Fn(&mut StreamRng, &mut [f64]) + Sync),
    /// Population rank map of `f₁`.
    pub rank_map: &'a PopulationMap,
    pub score: ScoreFunction,
    pub erd: &'a ErdSpec,
}

/// Contamination ARE with its parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContaminationAre {
    pub result: AreResult,
    /// `‖Σ_ERD^{-1/2} E[J(R(X))(g/f₁ − 1)]‖²`.
    pub numerator: f64,
    /// `‖Σ^{-1/2}(E W − E X)‖²`.
    pub denominator: f64,
}

const CONTAMINATION_BATCHES: usize = 20;

/// Monte Carlo contamination ARE.
///
/// The numerator expectation is rewritten as `E J(R(W)) − E J(R(X))` with
/// `W ~ g`, which avoids likelihood-ratio weights. `X` and `W` draws share
/// a stream so `g = f₁` gives exactly zero in both parts, which is reported
/// as [`Error::Degenerate`]. The error estimate is the standard error of the
/// ratio over 20 batches.
pub fn are_contamination(c: &Contamination<'_>, draws: usize, seed: u64) -> Result<ContaminationAre> {
    use rayon::prelude::*;
    let d = c.rank_map.dim();
    if c.erd.dim() != d || c.score.dim != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: c.erd.dim(),
        });
    }
    if draws < 10 * CONTAMINATION_BATCHES {
        return Err(Error::invalid(format!("need at least {} draws", 10 * CONTAMINATION_BATCHES)));
    }
    let per_batch = draws / CONTAMINATION_BATCHES;
    // per batch: Σ J(R(W)) − J(R(X)), Σ (W − X), Σ X, Σ X Xᵀ
    struct Acc {
        jdiff: DVector<f64>,
        wdiff: DVector<f64>,
        xsum: DVector<f64>,
        xx: DMatrix<f64>,
    }
    let batches = (0..CONTAMINATION_BATCHES)
        .into_par_iter()
        .map(|bi| {
            let mut acc = Acc {
                jdiff: DVector::zeros(d),
                wdiff: DVector::zeros(d),
                xsum: DVector::zeros(d),
                xx: DMatrix::zeros(d, d),
            };
            let (mut x, mut w) = (vec![0.0; d], vec![0.0; d]);
            for i in 0..per_batch {
                let stream = (bi * per_batch + i) as u64;
                (c.sample_f1)(&mut substream(seed, stream), &mut x);
                (c.sample_g)(&mut substream(seed, stream), &mut w);
                let jx = c.score.apply(&c.rank_map.apply(&x)?)?;
                let jw = c.score.apply(&c.rank_map.apply(&w)?)?;
                let xv = DVector::from_column_slice(&x);
                for k in 0..d {
                    acc.jdiff[k] += jw[k] - jx[k];
                    acc.wdiff[k] += w[k] - x[k];
                }
                acc.xx += &xv * xv.transpose();
                acc.xsum += xv;
            }
            Ok(acc)
        })
        .collect::<Result<Vec<Acc>>>()?;

    let sigma_erd_inv = spd_inverse(&c.erd.sigma_erd)?;
    let ratio_parts = |jd: &DVector<f64>, wd: &DVector<f64>, xs: &DVector<f64>, xx: &DMatrix<f64>, n: f64| -> Result<(f64, f64)> {
        let jd = jd / n;
        let wd = wd / n;
        let mean = xs / n;
        let cov = (xx - &mean * mean.transpose() * n) / (n - 1.0);
        let num = (jd.transpose() * &sigma_erd_inv * &jd)[(0, 0)];
        let den = (wd.transpose() * spd_inverse(&cov)? * &wd)[(0, 0)];
        Ok((num, den))
    };

    let mut total = Acc {
        jdiff: DVector::zeros(d),
        wdiff: DVector::zeros(d),
        xsum: DVector::zeros(d),
        xx: DMatrix::zeros(d, d),
    };
    let mut batch_ratios = Vec::with_capacity(CONTAMINATION_BATCHES);
    for b in &batches {
        total.jdiff += &b.jdiff;
        total.wdiff += &b.wdiff;
        total.xsum += &b.xsum;
        total.xx += &b.xx;
        let (num, den) = ratio_parts(&b.jdiff, &b.wdiff, &b.xsum, &b.xx, per_batch as f64)?;
        if den > 0.0 {
            batch_ratios.push(num / den);
        }
    }
    let n = (per_batch * CONTAMINATION_BATCHES) as f64;
    let (numerator, denominator) = ratio_parts(&total.jdiff, &total.wdiff, &total.xsum, &total.xx, n)?;
    if !(denominator > 0.0) || batch_ratios.len() < CONTAMINATION_BATCHES {
        return Err(Error::Degenerate(
            "contamination leaves the mean unchanged; ARE is 0/0".into(),
        ));
    }
    let nb = batch_ratios.len() as f64;
    let bm = batch_ratios.iter().sum::<f64>() / nb;
    let bvar = batch_ratios.iter().map(|r| (r - bm).powi(2)).sum::<f64>() / (nb - 1.0);
    Ok(ContaminationAre {
        result: AreResult {
            value: numerator / denominator,
            method: AreMethod::MonteCarlo,
            error_estimate: (bvar / nb).sqrt(),
        },
        numerator,
        denominator,
    })
}

/// One row of the κ_d / elliptical bound table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AreTableRow {
    pub d: usize,
    pub kappa_closed: Option<f64>,
    pub kappa_quadrature: f64,
    pub elliptical_bound: f64,
}

pub fn are_table(dmax: usize) -> Result<Vec<AreTableRow>> {
    (1..=dmax)
        .map(|d| {
            let k = kappa_d(d)?;
            Ok(AreTableRow {
                d,
                kappa_closed: k.closed_form,
                kappa_quadrature: k.value(),
                elliptical_bound: elliptical_bound(d)?,
            })
        })
        .collect()
}

/// CSV rendering of [`are_table`] followed by a constants row.
pub fn are_table_csv(rows: &[AreTableRow]) -> String {
    let mut out = String::from("d,kappa_closed,kappa_quadrature,elliptical_bound\n");
    for r in rows {
        let closed = r.kappa_closed.map(|v| format!("{v:.12}")).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{:.12},{:.12}\n",
            r.d, closed, r.kappa_quadrature, r.elliptical_bound
        ));
    }
    out.push_str(&format!(
        "# constants: three_over_pi={:.12},hodges_lehmann={},chernoff_savage={},elliptical_limit={}\n",
        are_gaussian_uniform_erd(),
        hodges_lehmann_bound(),
        chernoff_savage_bound(),
        elliptical_limit()
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference::ScoreKind;
    use crate::special::std_normal_cdf;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn constants() {
        assert!((are_gaussian_uniform_erd() - 0.954_929_7).abs() < 1e-6);
        assert_eq!(hodges_lehmann_bound(), 0.864);
        assert_eq!(chernoff_savage_bound(), 1.0);
        assert!(hodges_lehmann_bound() < are_gaussian_uniform_erd());
        assert!(are_gaussian_uniform_erd() < chernoff_savage_bound());
    }

    #[test]
    fn elliptical_bound_shape() {
        assert_eq!(elliptical_bound(1).unwrap(), 0.864);
        // the general expression at d = 1 agrees with the exact branch
        let s: f64 = 1.0;
        assert!((81.0 / 500.0 * (s + 1.0).powi(5) / (s + 5.0) - 0.864).abs() < 1e-15);
        let mut prev = elliptical_bound(2).unwrap();
        for d in 3..2000 {
            let v = elliptical_bound(d).unwrap();
            assert!(v < prev && v >= 0.648, "d = {d}");
            prev = v;
        }
        assert!((elliptical_bound(1_000_000).unwrap() - 0.648).abs() < 1e-3);
        assert!(elliptical_bound(0).is_err());
    }

    #[test]
    fn uniform_erd_quadrature_oracle() {
        // d = 1 spherical uniform is Unif[−1, 1], a location-scale image of Unif[0, 1]
        let k1 = are_noncentrality_spherical(1).unwrap();
        assert!((k1.value - 3.0 / PI).abs() < 1e-6);
    }

    #[test]
    fn kappa_cross_validation() {
        for d in 2..=10 {
            let k = kappa_d(d).unwrap();
            assert!(k.agrees(1e-5), "d = {d}: {k:?}");
        }
        let k1 = kappa_d(1).unwrap();
        assert!((k1.closed_form.unwrap() - 0.163_84).abs() < 1e-6);
        assert!((k1.value() - 3.0 / PI).abs() < 1e-6);
        assert!(!k1.agrees(1e-5));
    }

    #[test]
    fn kappa_ordering() {
        let three_pi = 3.0 / PI;
        let values: Vec<f64> = (2..=10).map(|d| kappa_d(d).unwrap().value()).collect();
        for (i, v) in values.iter().enumerate() {
            let d = i + 2;
            if d <= 4 {
                assert!(*v > three_pi, "d = {d}");
            } else {
                assert!(*v < three_pi, "d = {d}");
            }
        }
        assert!(values.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn kappa_large_d() {
        let mut d = 1.0_f64;
        while d <= 1e6 {
            let v = are_noncentrality_spherical(d.round() as usize).unwrap().value;
            assert!(v >= 0.648 && v > 0.0, "d = {d}: {v}");
            d *= 10f64.powf(0.25);
        }
        assert!(kappa_closed_form(KAPPA_CLOSED_FORM_MAX_D + 1).unwrap().is_none());
    }

    #[test]
    fn kappa_monte_carlo_agrees() {
        for d in [2, 5] {
            let mc = kappa_monte_carlo(d, 200_000, 3).unwrap();
            let q = kappa_d(d).unwrap().value();
            assert!((mc.value - q).abs() < 3.0 * mc.error_estimate, "d = {d}: {mc:?} vs {q}");
        }
    }

    #[test]
    fn are_general_cases() {
        assert_eq!(are_general(2.5, 2.5).unwrap(), 1.0);
        assert_eq!(are_general(3.0, 2.0).unwrap(), are_general(300.0, 200.0).unwrap());
        assert!(are_general(1.0, 0.0).is_err());
        assert!(are_general(0.0, 1.0).is_err());
        // Gaussian data, Gaussian ERD: both non-centralities are 1ᵀΣ⁻¹1
        let sigma = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let one = DVector::from_element(2, 1.0);
        let nc = (one.transpose() * spd_inverse(&sigma).unwrap() * &one)[(0, 0)];
        assert_eq!(are_general(nc, nc).unwrap(), 1.0);
    }

    fn gaussian_1d(shift: f64) -> impl Fn(&mut StreamRng, &mut [f64]) + Sync {
        move |rng, out| {
            let z: f64 = StandardNormal.sample(rng);
            out[0] = z + shift;
        }
    }

    fn contamination_are(mu: f64, draws: usize, seed: u64) -> Result<ContaminationAre> {
        let map = PopulationMap::gaussian(vec![0.0], &DMatrix::from_element(1, 1, 1.0)).unwrap();
        let score = ScoreFunction::new(ScoreKind::CoordGaussianCdf, 1);
        let erd = ErdSpec::isotropic(1, 1.0 / 12.0);
        let f1 = gaussian_1d(0.0);
        let g = gaussian_1d(mu);
        are_contamination(
            &Contamination {
                sample_f1: &f1,
                sample_g: &g,
                rank_map: &map,
                score,
                erd: &erd,
            },
            draws,
            seed,
        )
    }

    #[test]
    fn contamination_degenerate_when_g_equals_f1() {
        assert!(matches!(contamination_are(0.0, 1000, 1), Err(Error::Degenerate(_))));
    }

    #[test]
    fn contamination_trend_and_oracle() {
        // exact: 12 (Φ(μ/√2) − 1/2)² / μ²
        let mut prev = f64::INFINITY;
        for mu in [1.0, 2.0, 4.0, 8.0] {
            let r = contamination_are(mu, 100_000, 7).unwrap();
            let exact = 12.0 * (std_normal_cdf(mu / 2f64.sqrt()) - 0.5).powi(2) / (mu * mu);
            assert!((r.result.value - exact).abs() < 0.02 * exact + 4.0 * r.result.error_estimate, "μ = {mu}");
            assert!(r.result.value < prev);
            prev = r.result.value;
        }
        assert!(prev < 0.05);
    }

    #[test]
    fn contamination_reproducible() {
        let a = contamination_are(0.5, 50_000, 11).unwrap();
        let b = contamination_are(0.5, 50_000, 12).unwrap();
        assert_eq!(a, contamination_are(0.5, 50_000, 11).unwrap());
        let se = a.result.error_estimate.hypot(b.result.error_estimate);
        assert!((a.result.value - b.result.value).abs() < 2.0 * se);
    }

    #[test]
    fn table_csv() {
        let rows = are_table(3).unwrap();
        let csv = are_table_csv(&rows);
        assert!(csv.starts_with("d,kappa_closed,kappa_quadrature,elliptical_bound\n1,"));
        assert_eq!(csv.lines().count(), 5);
        assert_eq!(rows[0].elliptical_bound, 0.864);
        assert_eq!(rows[1].kappa_quadrature, kappa_d(2).unwrap().value());
    }
}
