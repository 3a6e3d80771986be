//! Reference grids, score functions and effective reference covariances.
//!
//! A [`ReferenceGrid`] is the fixed point set the observations are matched
//! against. Its empirical measure discretizes a reference law `ν`
//! ([`NuTag`]). A [`ScoreFunction`] is applied to the matched grid points
//! before statistics are formed, and [`ErdSpec`] holds the covariance of the
//! scored reference law, which whitens the rank statistics.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{substream, StreamRng};
use crate::sample::SampleMatrix;
use crate::special::{chi_d_quantile, std_normal_cdf, std_normal_quantile};

/// First 64 primes, the Halton bases.
pub const PRIMES: [u32; 64] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97,
    101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173, 179, 181, 191, 193,
    197, 199, 211, 223, 227, 229, 233, 239, 241, 251, 257, 263, 269, 271, 277, 281, 283, 293, 307,
    311,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NuTag {
    UniformCube,
    SphericalUniform,
    Gaussian,
    CustomIid,
}

impl NuTag {
    pub fn as_str(self) -> &'static str {
        match self {
            NuTag::UniformCube => "uniform_cube",
            NuTag::SphericalUniform => "spherical_uniform",
            NuTag::Gaussian => "gaussian",
            NuTag::CustomIid => "custom_iid",
        }
    }
}

impl fmt::Display for NuTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NuTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform_cube" | "uniform" => Ok(NuTag::UniformCube),
            "spherical_uniform" | "spherical" => Ok(NuTag::SphericalUniform),
            "gaussian" | "normal" => Ok(NuTag::Gaussian),
            "custom_iid" => Ok(NuTag::CustomIid),
            other => Err(Error::UnsupportedReference(other.to_string())),
        }
    }
}

/// `N` fixed points in `R^d` discretizing a reference law.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceGrid {
    points: SampleMatrix,
    nu: NuTag,
    seed: Option<u64>,
}

impl ReferenceGrid {
    pub fn new(points: SampleMatrix, nu: NuTag, seed: Option<u64>) -> Result<Self> {
        points.require_finite("reference grid")?;
        Ok(Self { points, nu, seed })
    }

    pub fn points(&self) -> &SampleMatrix {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.dim()
    }

    pub fn nu(&self) -> NuTag {
        self.nu
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Shifts the grid so that its points sum to zero.
    pub fn centered(&self) -> ReferenceGrid {
        let mean = self.points.column_means();
        let mut points = self.points.clone();
        for i in 0..points.nrows() {
            for (v, m) in points.row_mut(i).iter_mut().zip(&mean) {
                *v -= m;
            }
        }
        ReferenceGrid {
            points,
            nu: self.nu,
            seed: self.seed,
        }
    }

    /// Serializes as `dim=d,nu=<tag>,seed=<s>` followed by one point per row.
    ///
    /// Floats are printed in shortest round-trip form so that
    /// [`ReferenceGrid::from_csv`] restores the grid bit for bit.
    pub fn to_csv(&self) -> String {
        let seed = self.seed.map_or_else(|| "none".to_string(), |s| s.to_string());
        let mut out = format!("dim={},nu={},seed={}\n", self.dim(), self.nu, seed);
        for r in self.points.rows() {
            let line: Vec<String> = r.iter().map(|v| format!("{v:?}")).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<ReferenceGrid> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "empty grid file".into(),
        })?;
        let mut dim = None;
        let mut nu = None;
        let mut seed = None;
        for field in header.trim().split(',') {
            let (k, v) = field.split_once('=').ok_or_else(|| Error::Parse {
                line: 1,
                msg: format!("malformed header field '{field}'"),
            })?;
            match k.trim() {
                "dim" => {
                    dim = Some(v.trim().parse::<usize>().map_err(|e| Error::Parse {
                        line: 1,
                        msg: format!("dim: {e}"),
                    })?)
                }
                "nu" => nu = Some(v.trim().parse::<NuTag>()?),
                "seed" => {
                    seed = match v.trim() {
                        "none" | "" => None,
                        s => Some(s.parse::<u64>().map_err(|e| Error::Parse {
                            line: 1,
                            msg: format!("seed: {e}"),
                        })?),
                    }
                }
                other => {
                    return Err(Error::Parse {
                        line: 1,
                        msg: format!("unknown header key '{other}'"),
                    })
                }
            }
        }
        let dim = dim.ok_or(Error::Parse {
            line: 1,
            msg: "missing dim".into(),
        })?;
        let nu = nu.ok_or(Error::Parse {
            line: 1,
            msg: "missing nu".into(),
        })?;
        let mut data = Vec::new();
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let before = data.len();
            for tok in line.split(',') {
                let v: f64 = tok.trim().parse().map_err(|_| Error::Parse {
                    line: idx + 1,
                    msg: format!("not a number: '{tok}'"),
                })?;
                data.push(v);
            }
            if data.len() - before != dim {
                return Err(Error::Parse {
                    line: idx + 1,
                    msg: format!("expected {dim} values, found {}", data.len() - before),
                });
            }
        }
        ReferenceGrid::new(SampleMatrix::from_flat(data, dim)?, nu, seed)
    }

    /// Mean and mean squared norm, the weak-convergence diagnostics.
    pub fn moment_summary(&self) -> (Vec<f64>, f64) {
        let mean = self.points.column_means();
        let sq = self
            .points
            .rows()
            .map(|r| r.iter().map(|v| v * v).sum::<f64>())
            .sum::<f64>()
            / self.len() as f64;
        (mean, sq)
    }
}

/// Radical inverse of `index` in base `base`.
pub fn radical_inverse(mut index: u64, base: u32) -> f64 {
    let b = base as u64;
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut acc = 0.0;
    while index > 0 {
        acc += (index % b) as f64 * f;
        index /= b;
        f *= inv;
    }
    acc
}

fn check_size(n: usize, d: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("grid size must be at least 1"));
    }
    if d == 0 {
        return Err(Error::invalid("dimension must be at least 1"));
    }
    if d > PRIMES.len() {
        return Err(Error::invalid(format!(
            "Halton bases only tabulated up to d = {}",
            PRIMES.len()
        )));
    }
    Ok(())
}

fn halton_points(n: usize, d: usize, offset: &[f64]) -> SampleMatrix {
    let mut pts = SampleMatrix::zeros(n, d);
    for i in 0..n {
        let row = pts.row_mut(i);
        for (j, v) in row.iter_mut().enumerate() {
            let u = radical_inverse(i as u64 + 1, PRIMES[j]) + offset.get(j).copied().unwrap_or(0.0);
            *v = u - u.floor();
        }
    }
    pts
}

/// First `n` Halton points in `[0,1]^d` (bases = first `d` primes, index from 1).
pub fn halton_grid(n: usize, d: usize) -> Result<ReferenceGrid> {
    check_size(n, d)?;
    ReferenceGrid::new(halton_points(n, d, &[]), NuTag::UniformCube, None)
}

/// `{1/N, 2/N, …, N/N}`.
pub fn regular_grid_1d(n: usize) -> Result<ReferenceGrid> {
    if n == 0 {
        return Err(Error::invalid("grid size must be at least 1"));
    }
    let pts: Vec<f64> = (1..=n).map(|i| i as f64 / n as f64).collect();
    ReferenceGrid::new(SampleMatrix::from_column(&pts), NuTag::UniformCube, None)
}

/// Coordinatewise `Φ⁻¹` of the Halton points.
pub fn gaussian_grid(n: usize, d: usize) -> Result<ReferenceGrid> {
    check_size(n, d)?;
    let h = halton_points(n, d, &[]);
    let pts = h.map_rows(d, |r| r.iter().map(|&u| std_normal_quantile(u)).collect())?;
    ReferenceGrid::new(pts, NuTag::Gaussian, None)
}

/// `∫_0^φ sin^m(t) dt` by the reduction formula.
fn sin_power_integral(m: u32, phi: f64) -> f64 {
    match m {
        0 => phi,
        1 => 1.0 - phi.cos(),
        _ => {
            let mf = m as f64;
            -phi.sin().powi(m as i32 - 1) * phi.cos() / mf
                + (mf - 1.0) / mf * sin_power_integral(m - 2, phi)
        }
    }
}

/// Inverse distribution function of the angle with density `∝ sin^m` on `[0, π]`.
fn sin_power_angle(m: u32, u: f64) -> f64 {
    let total = sin_power_integral(m, std::f64::consts::PI);
    let target = u * total;
    let (mut lo, mut hi) = (0.0, std::f64::consts::PI);
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        if sin_power_integral(m, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Maps a point of `[0,1]^{d-1}` to the unit sphere `S^{d-1}` through the
/// inverse distribution functions of the hyperspherical angles, so that
/// uniform inputs give uniform directions.
pub fn cube_to_sphere(u: &[f64], d: usize) -> Vec<f64> {
    debug_assert_eq!(u.len(), d.saturating_sub(1));
    match d {
        1 => vec![if u.is_empty() || u[0] < 0.5 { -1.0 } else { 1.0 }],
        _ => {
            // angles φ_1..φ_{d-2} on [0, π] with density ∝ sin^{d-1-k}, φ_{d-1} uniform on [0, 2π)
            let mut out = vec![0.0; d];
            let mut sin_prod = 1.0;
            for k in 0..d - 2 {
                let phi = sin_power_angle((d - 2 - k) as u32, u[k]);
                out[k] = sin_prod * phi.cos();
                sin_prod *= phi.sin();
            }
            let theta = 2.0 * std::f64::consts::PI * u[d - 2];
            out[d - 2] = sin_prod * theta.cos();
            out[d - 1] = sin_prod * theta.sin();
            out
        }
    }
}

/// Layout of the spherical-uniform grid: `N = n_radii · n_dirs + n_extra`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SphericalLayout {
    pub n_radii: usize,
    pub n_dirs: usize,
    pub n_extra: usize,
}

pub fn spherical_layout(n: usize, d: usize) -> SphericalLayout {
    if d == 1 {
        return SphericalLayout {
            n_radii: n / 2,
            n_dirs: 2,
            n_extra: n % 2,
        };
    }
    let mut n_radii = ((n as f64).sqrt().floor() as usize).max(1);
    loop {
        let n_dirs = n / n_radii;
        let n_extra = n - n_radii * n_dirs;
        if n_extra <= n_radii.min(n_dirs) || n_radii == 1 {
            return SphericalLayout {
                n_radii,
                n_dirs,
                n_extra,
            };
        }
        n_radii -= 1;
    }
}

/// Discretization of the spherical uniform law (radius `U₁ ~ Unif[0,1]`
/// times an independent uniform direction).
///
/// Radii `j/(n_R+1)` are crossed with `n_S` low-discrepancy directions; the
/// `n_0` leftover points sit at radius `1/(2(n_R+1))` on the first `n_0`
/// directions so every grid point is distinct. `seed` applies a random
/// shift (mod 1) to the Halton block that generates the directions.
pub fn spherical_uniform_grid(n: usize, d: usize, seed: u64) -> Result<ReferenceGrid> {
    if d == 0 || d > PRIMES.len() + 1 {
        return Err(Error::invalid(format!("unsupported dimension {d}")));
    }
    if n < d + 1 {
        return Err(Error::invalid(format!(
            "spherical grid needs N ≥ d + 1 (N = {n}, d = {d})"
        )));
    }
    let layout = spherical_layout(n, d);
    let dirs: Vec<Vec<f64>> = if d == 1 {
        vec![vec![-1.0], vec![1.0]]
    } else {
        let mut rng = substream(seed, 0);
        let shift: Vec<f64> = (0..d - 1).map(|_| rng.random::<f64>()).collect();
        let block = halton_points(layout.n_dirs, d - 1, &shift);
        block.rows().map(|u| cube_to_sphere(u, d)).collect()
    };
    let step = 1.0 / (layout.n_radii as f64 + 1.0);
    let mut data = Vec::with_capacity(n * d);
    for j in 1..=layout.n_radii {
        let r = j as f64 * step;
        for dir in &dirs {
            data.extend(dir.iter().map(|v| r * v));
        }
    }
    for dir in dirs.iter().take(layout.n_extra) {
        data.extend(dir.iter().map(|v| 0.5 * step * v));
    }
    ReferenceGrid::new(
        SampleMatrix::from_flat(data, d)?,
        NuTag::SphericalUniform,
        Some(seed),
    )
}

/// Draws one point of the named reference law.
pub fn sample_reference<R: Rng>(nu: NuTag, rng: &mut R, out: &mut [f64]) -> Result<()> {
    match nu {
        NuTag::UniformCube => out.iter_mut().for_each(|v| *v = rng.random::<f64>()),
        NuTag::Gaussian => out
            .iter_mut()
            .for_each(|v| *v = StandardNormal.sample(rng)),
        NuTag::SphericalUniform => {
            let mut norm = 0.0;
            while norm == 0.0 {
                for v in out.iter_mut() {
                    *v = StandardNormal.sample(rng);
                }
                norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
            }
            let r: f64 = rng.random();
            out.iter_mut().for_each(|v| *v *= r / norm);
        }
        NuTag::CustomIid => {
            return Err(Error::UnsupportedReference(
                "custom_iid needs an explicit sampler".into(),
            ))
        }
    }
    Ok(())
}

/// `N` seeded iid draws from `ν`.
pub fn iid_grid(n: usize, d: usize, nu: NuTag, seed: u64) -> Result<ReferenceGrid> {
    if n == 0 || d == 0 {
        return Err(Error::invalid("grid size and dimension must be positive"));
    }
    let mut rng = substream(seed, 0);
    let mut pts = SampleMatrix::zeros(n, d);
    for i in 0..n {
        sample_reference(nu, &mut rng, pts.row_mut(i))?;
    }
    ReferenceGrid::new(pts, nu, Some(seed))
}

/// iid grid from a user sampler, tagged `custom_iid`.
pub fn iid_grid_from_sampler<F>(n: usize, d: usize, seed: u64, mut draw: F) -> Result<ReferenceGrid>
where
    F: FnMut(&mut StreamRng, &mut [f64]),
{
    let mut rng = substream(seed, 0);
    let pts = SampleMatrix::from_sampler(n, d, &mut rng, |r, row| draw(r, row));
    ReferenceGrid::new(pts, NuTag::CustomIid, Some(seed))
}

/// How a grid of a requested size is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    /// Halton for the cube, `Φ⁻¹`-Halton for the Gaussian, the factorized
    /// construction for the spherical law, `{i/N}` for the cube when `d = 1`.
    Deterministic,
    Iid,
}

/// Recipe for building a grid once the pooled size is known.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nu: NuTag,
    pub kind: GridKind,
    pub seed: u64,
    pub center: bool,
}

impl GridSpec {
    pub fn new(nu: NuTag) -> Self {
        Self {
            nu,
            kind: GridKind::Deterministic,
            seed: 0,
            center: false,
        }
    }

    pub fn build(&self, n: usize, d: usize) -> Result<ReferenceGrid> {
        let grid = match (self.kind, self.nu) {
            (GridKind::Iid, nu) => iid_grid(n, d, nu, self.seed)?,
            (GridKind::Deterministic, NuTag::UniformCube) if d == 1 => regular_grid_1d(n)?,
            (GridKind::Deterministic, NuTag::UniformCube) => halton_grid(n, d)?,
            (GridKind::Deterministic, NuTag::Gaussian) => gaussian_grid(n, d)?,
            (GridKind::Deterministic, NuTag::SphericalUniform) => {
                spherical_uniform_grid(n, d, self.seed)?
            }
            (GridKind::Deterministic, NuTag::CustomIid) => {
                return Err(Error::UnsupportedReference(
                    "custom reference laws are only available as iid samplers".into(),
                ))
            }
        };
        Ok(if self.center { grid.centered() } else { grid })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    Identity,
    CoordGaussianCdf,
    CoordGaussianQuantile,
    VanDerWaerden,
}

impl ScoreKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScoreKind::Identity => "identity",
            ScoreKind::CoordGaussianCdf => "coord_gaussian_cdf",
            ScoreKind::CoordGaussianQuantile => "coord_gaussian_quantile",
            ScoreKind::VanDerWaerden => "van_der_waerden",
        }
    }
}

impl fmt::Display for ScoreKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScoreKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(ScoreKind::Identity),
            "coord_gaussian_cdf" => Ok(ScoreKind::CoordGaussianCdf),
            "coord_gaussian_quantile" => Ok(ScoreKind::CoordGaussianQuantile),
            "van_der_waerden" | "vdw" => Ok(ScoreKind::VanDerWaerden),
            other => Err(Error::invalid(format!("unknown score '{other}'"))),
        }
    }
}

/// Injective map applied to ranks before statistics are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScoreFunction {
    pub kind: ScoreKind,
    pub dim: usize,
}

impl ScoreFunction {
    pub fn new(kind: ScoreKind, dim: usize) -> Self {
        Self { kind, dim }
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(ScoreKind::Identity, dim)
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("score input"));
        }
        match self.kind {
            ScoreKind::Identity => Ok(x.to_vec()),
            ScoreKind::CoordGaussianCdf => Ok(x.iter().map(|&v| std_normal_cdf(v)).collect()),
            ScoreKind::CoordGaussianQuantile => x.iter().map(|&v| std_normal_quantile(v)).collect(),
            ScoreKind::VanDerWaerden => {
                let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm == 0.0 {
                    return Ok(vec![0.0; self.dim]);
                }
                if norm >= 1.0 {
                    return Err(Error::domain(
                        "van_der_waerden score",
                        format!("‖x‖ = {norm} must lie in [0, 1)"),
                    ));
                }
                let r = chi_d_quantile(self.dim, norm)?;
                Ok(x.iter().map(|v| r * v / norm).collect())
            }
        }
    }

    pub fn apply_all(&self, pts: &SampleMatrix) -> Result<SampleMatrix> {
        if self.kind == ScoreKind::Identity {
            if pts.dim() != self.dim {
                return Err(Error::DimensionMismatch {
                    expected: self.dim,
                    found: pts.dim(),
                });
            }
            return Ok(pts.clone());
        }
        pts.map_rows(self.dim, |r| self.apply(r))
    }
}

/// Covariance of the scored reference law `J#ν`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErdSpec {
    pub sigma_erd: DMatrix<f64>,
    pub closed_form: bool,
    /// Largest Monte Carlo standard error across entries (estimated ERDs only).
    pub std_error: Option<f64>,
}

impl ErdSpec {
    pub fn isotropic(d: usize, variance: f64) -> Self {
        Self {
            sigma_erd: DMatrix::identity(d, d) * variance,
            closed_form: true,
            std_error: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.sigma_erd.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let min = crate::linalg::min_eigenvalue(&self.sigma_erd);
        if !(min > 0.0) {
            return Err(Error::Degenerate(format!(
                "ERD covariance is not positive definite (smallest eigenvalue {min:e})"
            )));
        }
        Ok(())
    }
}

/// Closed-form ERD covariance for the named `(ν, J)` pairs.
///
/// Every named pair pushes `ν` to one of the uniform cube (`σ² = 1/12`),
/// the spherical uniform law (`σ² = 1/(3d)`) or the standard Gaussian
/// (`σ² = 1`). Other pairs need [`erd_covariance_mc`].
pub fn erd_covariance(nu: NuTag, score: ScoreFunction) -> Result<ErdSpec> {
    let d = score.dim;
    let variance = match (nu, score.kind) {
        (NuTag::UniformCube, ScoreKind::Identity) => 1.0 / 12.0,
        (NuTag::Gaussian, ScoreKind::CoordGaussianCdf) => 1.0 / 12.0,
        (NuTag::Gaussian, ScoreKind::Identity) => 1.0,
        (NuTag::UniformCube, ScoreKind::CoordGaussianQuantile) => 1.0,
        (NuTag::SphericalUniform, ScoreKind::Identity) => 1.0 / (3.0 * d as f64),
        (NuTag::SphericalUniform, ScoreKind::VanDerWaerden) => 1.0,
        (nu, kind) => {
            return Err(Error::UnsupportedReference(format!(
                "no closed-form ERD for ν = {nu}, J = {kind}; request a Monte Carlo estimate"
            )))
        }
    };
    Ok(ErdSpec::isotropic(d, variance))
}

/// Seeded Monte Carlo estimate of `Cov(J(V))`, `V ~ ν`.
pub fn erd_covariance_mc(nu: NuTag, score: ScoreFunction, draws: usize, seed: u64) -> Result<ErdSpec> {
    if draws < 2 {
        return Err(Error::invalid("need at least two draws"));
    }
    let d = score.dim;
    let mut rng = substream(seed, 1);
    let mut buf = vec![0.0; d];
    let mut scored = Vec::with_capacity(draws * d);
    for _ in 0..draws {
        sample_reference(nu, &mut rng, &mut buf)?;
        scored.extend(score.apply(&buf)?);
    }
    let m = SampleMatrix::from_flat(scored, d)?;
    let cov = m.covariance();
    let mean = m.column_means();
    // standard error of each covariance entry from the fourth-moment products
    let mut max_se: f64 = 0.0;
    for a in 0..d {
        for b in 0..d {
            let vals: Vec<f64> = m
                .rows()
                .map(|r| (r[a] - mean[a]) * (r[b] - mean[b]))
                .collect();
            let mu = vals.iter().sum::<f64>() / draws as f64;
            let var = vals.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (draws as f64 - 1.0);
            max_se = max_se.max((var / draws as f64).sqrt());
        }
    }
    let spec = ErdSpec {
        sigma_erd: DMatrix::from_row_slice(d, d, &cov),
        closed_form: false,
        std_error: Some(max_se),
    };
    spec.validate()?;
    Ok(spec)
}
