//! Population rank maps with explicit forms.
//!
//! For Gaussian, elliptical and independent-component laws the optimal
//! transport map onto a reference law is known in closed or
//! one-dimensional-integral form. These maps serve as ground truth for the
//! empirical ranks computed by [`crate::lap`].

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::lap::empirical_rank_map;
use crate::linalg::{mat_vec, sym_inv_sqrt};
use crate::quadrature::integrate;
use crate::reference::{NuTag, ReferenceGrid};
use crate::sample::SampleMatrix;
use crate::special::{
    chi_d_cdf, chi_d_pdf, chi_d_quantile, ln_gamma, std_normal_cdf, std_normal_quantile,
};

const QUAD_TOL: f64 = 1e-10;

/// Law of the radius `‖Σ^{-1/2}(X − θ)‖` of a spherical or elliptical vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadialLaw {
    /// `√χ²_d`, the Gaussian radius.
    Chi { d: usize },
    /// `Unif[0, 1]`, the radius of the spherical uniform law.
    Uniform,
    /// Radius of the multivariate t with `nu` degrees of freedom.
    StudentT { d: usize, nu: f64 },
    /// Radius of `√W · Z`, `W ~ Exp(1)`, `Z ~ N(0, I_d)` (elliptical Laplace).
    Laplace { d: usize },
}

impl RadialLaw {
    pub fn validate(&self) -> Result<()> {
        match *self {
            RadialLaw::Chi { d } | RadialLaw::Laplace { d } if d == 0 => {
                Err(Error::invalid("radial law needs d ≥ 1"))
            }
            RadialLaw::StudentT { d, nu } if d == 0 || !(nu > 0.0) => {
                Err(Error::invalid(format!("student-t radius needs d ≥ 1, ν > 0 (ν = {nu})")))
            }
            _ => Ok(()),
        }
    }

    pub fn pdf(&self, r: f64) -> f64 {
        if r < 0.0 {
            return 0.0;
        }
        match *self {
            RadialLaw::Chi { d } => chi_d_pdf(d, r),
            RadialLaw::Uniform => {
                if r <= 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            RadialLaw::StudentT { d, nu } => {
                let k = d as f64;
                let log_norm = std::f64::consts::LN_2 + lg(0.5 * (nu + k))
                    - lg(0.5 * nu)
                    - lg(0.5 * k)
                    - 0.5 * k * nu.ln();
                if r == 0.0 {
                    return if d == 1 { log_norm.exp() } else { 0.0 };
                }
                (log_norm + (k - 1.0) * r.ln() - 0.5 * (nu + k) * (1.0 + r * r / nu).ln()).exp()
            }
            RadialLaw::Laplace { d } => {
                // mixture over w of the scaled chi density
                integrate(
                    |w: f64| {
                        if w <= 0.0 {
                            0.0
                        } else {
                            let s = w.sqrt();
                            (-w).exp() * chi_d_pdf(d, r / s) / s
                        }
                    },
                    0.0,
                    60.0,
                    QUAD_TOL,
                    QUAD_TOL,
                )
                .map(|i| i.value)
                .unwrap_or(f64::NAN)
            }
        }
    }

    pub fn cdf(&self, r: f64) -> Result<f64> {
        if r.is_nan() {
            return Err(Error::NonFinite("radius"));
        }
        if r <= 0.0 {
            return Ok(0.0);
        }
        match *self {
            RadialLaw::Chi { d } => chi_d_cdf(d, r),
            RadialLaw::Uniform => Ok(r.min(1.0)),
            RadialLaw::StudentT { .. } => {
                if r.is_infinite() {
                    return Ok(1.0);
                }
                // integrate over the shorter side for accuracy in the tails
                let law = *self;
                let head = integrate(|t| law.pdf(t), 0.0, r.min(1.0), QUAD_TOL, QUAD_TOL)?.value;
                if r <= 1.0 {
                    return Ok(head.clamp(0.0, 1.0));
                }
                // substitute t = 1/s on [1, r]
                let tail = integrate(
                    |s: f64| if s <= 0.0 { 0.0 } else { law.pdf(1.0 / s) / (s * s) },
                    1.0 / r,
                    1.0,
                    QUAD_TOL,
                    QUAD_TOL,
                )?
                .value;
                Ok((head + tail).clamp(0.0, 1.0))
            }
            RadialLaw::Laplace { d } => {
                if r.is_infinite() {
                    return Ok(1.0);
                }
                let v = integrate(
                    |w: f64| {
                        if w <= 0.0 {
                            (-w).exp()
                        } else {
                            (-w).exp() * chi_d_cdf(d, r / w.sqrt()).unwrap_or(1.0)
                        }
                    },
                    0.0,
                    60.0,
                    QUAD_TOL,
                    QUAD_TOL,
                )?
                .value;
                Ok(v.clamp(0.0, 1.0))
            }
        }
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::domain("radial quantile", format!("p = {p}")));
        }
        match *self {
            RadialLaw::Chi { d } => chi_d_quantile(d, p),
            RadialLaw::Uniform => Ok(p),
            _ => {
                if p == 0.0 {
                    return Ok(0.0);
                }
                if p == 1.0 {
                    return Ok(f64::INFINITY);
                }
                let mut hi = 1.0;
                while self.cdf(hi)? < p {
                    hi *= 2.0;
                    if hi > 1e12 {
                        return Err(Error::Convergence("radial quantile bracket".into()));
                    }
                }
                let mut lo = 0.0;
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if self.cdf(mid)? < p {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo <= 1e-13 * hi {
                        break;
                    }
                }
                Ok(0.5 * (lo + hi))
            }
        }
    }
}

fn lg(x: f64) -> f64 {
    ln_gamma(x).unwrap_or(f64::NAN)
}

/// Named univariate law with a continuous, strictly increasing CDF.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Marginal {
    Normal { mean: f64, sd: f64 },
    Logistic { location: f64, scale: f64 },
    Exponential { rate: f64 },
    /// Epanechnikov kernel law with mean `location` and variance `scale²`.
    Epanechnikov { location: f64, scale: f64 },
    LogNormal { mu: f64, sigma: f64 },
}

impl Marginal {
    pub fn validate(&self) -> Result<()> {
        let scale = match *self {
            Marginal::Normal { sd, .. } => sd,
            Marginal::Logistic { scale, .. } => scale,
            Marginal::Exponential { rate } => rate,
            Marginal::Epanechnikov { scale, .. } => scale,
            Marginal::LogNormal { sigma, .. } => sigma,
        };
        if scale > 0.0 && scale.is_finite() {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "{self:?}: scale must be positive, otherwise the CDF is not strictly increasing"
            )))
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Marginal::Normal { mean, sd } => std_normal_cdf((x - mean) / sd),
            Marginal::Logistic { location, scale } => 1.0 / (1.0 + (-(x - location) / scale).exp()),
            Marginal::Exponential { rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-rate * x).exp_m1()
                }
            }
            Marginal::Epanechnikov { location, scale } => {
                let t = ((x - location) / (5f64.sqrt() * scale)).clamp(-1.0, 1.0);
                (2.0 + 3.0 * t - t * t * t) / 4.0
            }
            Marginal::LogNormal { mu, sigma } => {
                if x <= 0.0 {
                    0.0
                } else {
                    std_normal_cdf((x.ln() - mu) / sigma)
                }
            }
        }
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            if let (Marginal::Epanechnikov { location, scale }, true) = (*self, (0.0..=1.0).contains(&p)) {
                return Ok(location + 5f64.sqrt() * scale * (2.0 * p - 1.0));
            }
            return Err(Error::domain("marginal quantile", format!("p = {p}")));
        }
        Ok(match *self {
            Marginal::Normal { mean, sd } => mean + sd * std_normal_quantile(p)?,
            Marginal::Logistic { location, scale } => location + scale * (p / (1.0 - p)).ln(),
            Marginal::Exponential { rate } => -(-p).ln_1p() / rate,
            Marginal::Epanechnikov { location, scale } => {
                let t = 2.0 * ((2.0 * p - 1.0).asin() / 3.0).sin();
                location + 5f64.sqrt() * scale * t
            }
            Marginal::LogNormal { mu, sigma } => (mu + sigma * std_normal_quantile(p)?).exp(),
        })
    }
}

/// Population rank map `R` pushing a law forward to a reference law.
#[derive(Debug, Clone, PartialEq)]
pub enum PopulationMap {
    /// `Σ^{-1/2}(x − θ)`, onto the standard Gaussian.
    Gaussian {
        theta: Vec<f64>,
        sigma_inv_sqrt: DMatrix<f64>,
    },
    /// `u/‖u‖ · H₂⁻¹(H₁(‖u‖))` with `u = Σ^{-1/2}(x − θ)`.
    Elliptical {
        theta: Vec<f64>,
        sigma_inv_sqrt: DMatrix<f64>,
        source: RadialLaw,
        target: RadialLaw,
        target_nu: NuTag,
    },
    /// Coordinatewise `F_i` (uniform cube) or `Φ⁻¹ ∘ F_i` (Gaussian).
    Independent {
        marginals: Vec<Marginal>,
        target_nu: NuTag,
    },
}

fn whitening(theta: &[f64], sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if sigma.nrows() != theta.len() {
        return Err(Error::DimensionMismatch {
            expected: theta.len(),
            found: sigma.nrows(),
        });
    }
    sym_inv_sqrt(sigma)
}

/// Radius law of the named spherical reference law in dimension `d`.
pub fn reference_radial_law(nu: NuTag, d: usize) -> Result<RadialLaw> {
    match nu {
        NuTag::Gaussian => Ok(RadialLaw::Chi { d }),
        NuTag::SphericalUniform => Ok(RadialLaw::Uniform),
        other => Err(Error::UnsupportedReference(format!(
            "{other} is not spherically symmetric"
        ))),
    }
}

impl PopulationMap {
    pub fn gaussian(theta: Vec<f64>, sigma: &DMatrix<f64>) -> Result<Self> {
        let sigma_inv_sqrt = whitening(&theta, sigma)?;
        Ok(PopulationMap::Gaussian {
            theta,
            sigma_inv_sqrt,
        })
    }

    pub fn elliptical(
        theta: Vec<f64>,
        sigma: &DMatrix<f64>,
        source: RadialLaw,
        target_nu: NuTag,
    ) -> Result<Self> {
        source.validate()?;
        let sigma_inv_sqrt = whitening(&theta, sigma)?;
        let target = reference_radial_law(target_nu, theta.len())?;
        Ok(PopulationMap::Elliptical {
            theta,
            sigma_inv_sqrt,
            source,
            target,
            target_nu,
        })
    }

    pub fn independent(marginals: Vec<Marginal>, target_nu: NuTag) -> Result<Self> {
        if marginals.is_empty() {
            return Err(Error::invalid("need at least one marginal"));
        }
        for m in &marginals {
            m.validate()?;
        }
        if !matches!(target_nu, NuTag::UniformCube | NuTag::Gaussian) {
            return Err(Error::UnsupportedReference(format!(
                "independent components map to uniform_cube or gaussian, not {target_nu}"
            )));
        }
        Ok(PopulationMap::Independent {
            marginals,
            target_nu,
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            PopulationMap::Gaussian { theta, .. } | PopulationMap::Elliptical { theta, .. } => {
                theta.len()
            }
            PopulationMap::Independent { marginals, .. } => marginals.len(),
        }
    }

    pub fn target_nu(&self) -> NuTag {
        match self {
            PopulationMap::Gaussian { .. } => NuTag::Gaussian,
            PopulationMap::Elliptical { target_nu, .. }
            | PopulationMap::Independent { target_nu, .. } => *target_nu,
        }
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        match self {
            PopulationMap::Gaussian {
                theta,
                sigma_inv_sqrt,
            } => {
                let centered: Vec<f64> = x.iter().zip(theta).map(|(a, b)| a - b).collect();
                Ok(mat_vec(sigma_inv_sqrt, &centered))
            }
            PopulationMap::Elliptical {
                theta,
                sigma_inv_sqrt,
                source,
                target,
                ..
            } => {
                let centered: Vec<f64> = x.iter().zip(theta).map(|(a, b)| a - b).collect();
                let u = mat_vec(sigma_inv_sqrt, &centered);
                let r = u.iter().map(|v| v * v).sum::<f64>().sqrt();
                if r == 0.0 {
                    return Ok(vec![0.0; u.len()]);
                }
                if source == target {
                    return Ok(u);
                }
                let p = source.cdf(r)?;
                let s = target.quantile(p)?;
                Ok(u.iter().map(|v| v * (s / r)).collect())
            }
            PopulationMap::Independent {
                marginals,
                target_nu,
            } => x
                .iter()
                .zip(marginals)
                .map(|(&v, m)| {
                    let p = m.cdf(v);
                    match target_nu {
                        NuTag::Gaussian => std_normal_quantile(p),
                        _ => Ok(p),
                    }
                })
                .collect(),
        }
    }

    pub fn apply_all(&self, sample: &SampleMatrix) -> Result<SampleMatrix> {
        sample.map_rows(self.dim(), |r| self.apply(r))
    }
}

/// `(1/N) Σ ‖R̂(Z_i) − R(Z_i)‖` for the empirical ranks of `sample` on `grid`.
pub fn rank_convergence_error(
    sample: &SampleMatrix,
    grid: &ReferenceGrid,
    map: &PopulationMap,
) -> Result<f64> {
    if map.target_nu() != grid.nu() {
        return Err(Error::UnsupportedReference(format!(
            "map targets {} but the grid discretizes {}",
            map.target_nu(),
            grid.nu()
        )));
    }
    let ranked = empirical_rank_map(sample, grid)?;
    let mut acc = 0.0;
    for (i, z) in sample.rows().enumerate() {
        let pop = map.apply(z)?;
        let emp = ranked.ranks.row(i);
        acc += emp
            .iter()
            .zip(&pop)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
    }
    Ok(acc / sample.nrows() as f64)
}

/// `Σ^{-1/2}` as a plain function of a row-major covariance.
pub fn whitening_matrix(sigma_row_major: &[f64], d: usize) -> Result<DMatrix<f64>> {
    sym_inv_sqrt(&DMatrix::from_row_slice(d, d, sigma_row_major))
}
