//! Samplers for the simulation families and the Monte Carlo power harness.
//!
//! Replication `r` at alternative index `t` always draws from
//! `substream(seed, stream_index(t, r))` and results are reduced in
//! replication order, so output does not depend on the thread count.
//!
//! Rank tests are calibrated with one universal null table per sample size,
//! shared by every replication; Hotelling and Wilks use χ² cutoffs.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Exp1, Open01, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::{
    run_independence, run_two_sample, simulate_null, CalibrationMode, NullProblem, NullRoute, TestOptions,
};
use crate::error::{Error, Result};
use crate::linalg::sym_sqrt;
use crate::reference::{GridSpec, NuTag, ScoreKind};
use crate::rng::{stream_index, substream, StreamRng};
use crate::sample::SampleMatrix;
use crate::statistics::{IndependenceInput, TestKind, TwoSampleInput};
use crate::transport::Marginal;

/// Distribution families; the location shift is applied along `1_d`.
#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    Gaussian,
    /// Independent logistic coordinates with unit scale.
    Logistic,
    /// Elliptical Laplace `√W · S^{1/2} Z`, `W ~ Exp(1)`, with scale matrix `S`.
    Laplace { scale: DMatrix<f64> },
    /// `exp(N(θ1, I))`.
    LogNormal,
    /// Independent Epanechnikov coordinates with standard deviation `sigma`.
    Epanechnikov { sigma: f64 },
    /// Uniform on the unit ball.
    SphericalUniform,
}

impl Family {
    /// `0.5 I + 0.5 11ᵀ`.
    pub fn correlated_laplace(d: usize) -> Self {
        let scale = DMatrix::from_fn(d, d, |i, j| if i == j { 1.0 } else { 0.5 });
        Family::Laplace { scale }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::Logistic => "logistic",
            Family::Laplace { .. } => "laplace",
            Family::LogNormal => "lognormal",
            Family::Epanechnikov { .. } => "epanechnikov",
            Family::SphericalUniform => "spherical_uniform",
        }
    }

    fn validate(&self, d: usize) -> Result<()> {
        match self {
            Family::Laplace { scale } => {
                if scale.nrows() != d || scale.ncols() != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        found: scale.nrows(),
                    });
                }
                sym_sqrt(scale).map(|_| ())
            }
            Family::Epanechnikov { sigma } if !(*sigma > 0.0 && sigma.is_finite()) => {
                Err(Error::invalid(format!("Epanechnikov σ = {sigma} must be positive")))
            }
            _ => Ok(()),
        }
    }
}

/// Draws `n` rows of `family` shifted by `theta · 1_d`.
pub fn sample_family(family: &Family, theta: f64, n: usize, d: usize, rng: &mut StreamRng) -> Result<SampleMatrix> {
    if d == 0 {
        return Err(Error::invalid("dimension must be positive"));
    }
    family.validate(d)?;
    let root = match family {
        Family::Laplace { scale } => Some(sym_sqrt(scale)?),
        _ => None,
    };
    let mut out = SampleMatrix::zeros(n, d);
    let mut z = vec![0.0; d];
    for i in 0..n {
        let row = out.row_mut(i);
        match family {
            Family::Gaussian => {
                for v in row.iter_mut() {
                    *v = theta + rng.sample::<f64, _>(StandardNormal);
                }
            }
            Family::Logistic => {
                for v in row.iter_mut() {
                    let p: f64 = rng.sample(Open01);
                    *v = theta + (p / (1.0 - p)).ln();
                }
            }
            Family::Laplace { .. } => {
                let root = root.as_ref().expect("computed above");
                let w: f64 = rng.sample(Exp1);
                for v in z.iter_mut() {
                    *v = rng.sample(StandardNormal);
                }
                let s = w.sqrt();
                for (r, v) in row.iter_mut().enumerate() {
                    *v = theta + s * (0..d).map(|c| root[(r, c)] * z[c]).sum::<f64>();
                }
            }
            Family::LogNormal => {
                for v in row.iter_mut() {
                    *v = (theta + rng.sample::<f64, _>(StandardNormal)).exp();
                }
            }
            Family::Epanechnikov { sigma } => {
                let law = Marginal::Epanechnikov {
                    location: theta,
                    scale: *sigma,
                };
                for v in row.iter_mut() {
                    *v = law.quantile(rng.sample(Open01))?;
                }
            }
            Family::SphericalUniform => {
                for v in z.iter_mut() {
                    *v = rng.sample(StandardNormal);
                }
                let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
                let radius = rng.random::<f64>().powf(1.0 / d as f64);
                for (v, zc) in row.iter_mut().zip(&z) {
                    *v = theta + radius * zc / norm;
                }
            }
        }
    }
    Ok(out)
}

/// Konijn mixing: `X = (1−c)X' + cMY'`, `Y = cMᵀX' + (1−c)Y'` with
/// `c = δ/√n`.
pub fn konijn_mix(
    x0: &SampleMatrix,
    y0: &SampleMatrix,
    m: &DMatrix<f64>,
    delta: f64,
) -> Result<(SampleMatrix, SampleMatrix)> {
    let n = x0.nrows();
    if y0.nrows() != n {
        return Err(Error::SizeMismatch {
            left: n,
            right: y0.nrows(),
        });
    }
    let (d1, d2) = (x0.dim(), y0.dim());
    if m.nrows() != d1 || m.ncols() != d2 {
        return Err(Error::DimensionMismatch {
            expected: d1 * d2,
            found: m.nrows() * m.ncols(),
        });
    }
    let c = delta / (n as f64).sqrt();
    let mut x = SampleMatrix::zeros(n, d1);
    let mut y = SampleMatrix::zeros(n, d2);
    for i in 0..n {
        let (xi, yi) = (x0.row(i), y0.row(i));
        for a in 0..d1 {
            x.row_mut(i)[a] = (1.0 - c) * xi[a] + c * (0..d2).map(|b| m[(a, b)] * yi[b]).sum::<f64>();
        }
        for b in 0..d2 {
            y.row_mut(i)[b] = (1.0 - c) * yi[b] + c * (0..d1).map(|a| m[(a, b)] * xi[a]).sum::<f64>();
        }
    }
    Ok((x, y))
}

/// `d₁ × d₂` matrix with ones on the leading diagonal.
pub fn rectangular_identity(d1: usize, d2: usize) -> DMatrix<f64> {
    DMatrix::from_fn(d1, d2, |i, j| if i == j { 1.0 } else { 0.0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Setting {
    H1,
    H2,
    A1,
    A2,
    A3,
    A4,
    Konijn,
}

impl Setting {
    pub fn as_str(self) -> &'static str {
        match self {
            Setting::H1 => "H1",
            Setting::H2 => "H2",
            Setting::A1 => "A1",
            Setting::A2 => "A2",
            Setting::A3 => "A3",
            Setting::A4 => "A4",
            Setting::Konijn => "konijn",
        }
    }

    pub fn family(self, d: usize) -> Family {
        match self {
            Setting::H1 => Family::Epanechnikov { sigma: 1.0 },
            Setting::H2 | Setting::A1 | Setting::Konijn => Family::Gaussian,
            Setting::A2 => Family::Logistic,
            Setting::A3 => Family::correlated_laplace(d),
            Setting::A4 => Family::LogNormal,
        }
    }

    /// Alternatives plotted for the setting.
    pub fn default_thetas(self) -> Vec<f64> {
        let span = |a: f64, b: f64, k: usize| -> Vec<f64> {
            (0..k).map(|i| a + (b - a) * i as f64 / (k - 1) as f64).collect()
        };
        match self {
            Setting::H1 | Setting::H2 => vec![0.1],
            Setting::A1 | Setting::A2 | Setting::A3 => span(0.01, 0.2, 6),
            Setting::A4 => span(-0.25, -0.01, 6),
            Setting::Konijn => KONIJN_DELTAS.to_vec(),
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Setting {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "h1" => Setting::H1,
            "h2" => Setting::H2,
            "a1" => Setting::A1,
            "a2" => Setting::A2,
            "a3" => Setting::A3,
            "a4" => Setting::A4,
            "konijn" => Setting::Konijn,
            other => return Err(Error::invalid(format!("unknown setting `{other}`"))),
        })
    }
}

/// Default Konijn `δ` grid.
pub const KONIJN_DELTAS: [f64; 7] = [0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5];

/// One test in a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct TestConfig {
    pub label: String,
    pub kind: TestKind,
    pub grid: GridSpec,
    pub score: ScoreKind,
}

impl TestConfig {
    pub fn new(label: &str, kind: TestKind, nu: NuTag, score: ScoreKind) -> Self {
        Self {
            label: label.to_string(),
            kind,
            grid: GridSpec::new(nu),
            score,
        }
    }

    pub fn hotelling() -> Self {
        Self::new("hotelling", TestKind::Hotelling, NuTag::Gaussian, ScoreKind::Identity)
    }

    pub fn rank_uniform() -> Self {
        Self::new("rank_uniform", TestKind::RankHotelling, NuTag::UniformCube, ScoreKind::Identity)
    }

    pub fn rank_gaussian() -> Self {
        Self::new("rank_gaussian", TestKind::RankHotelling, NuTag::Gaussian, ScoreKind::Identity)
    }

    pub fn rank_spearman() -> Self {
        Self::new("rank_spearman", TestKind::RankSpearman, NuTag::Gaussian, ScoreKind::Identity)
    }

    pub fn wilks() -> Self {
        Self::new("wilks", TestKind::Wilks, NuTag::Gaussian, ScoreKind::Identity)
    }

    pub fn rank_dcov() -> Self {
        Self::new("rank_dcov", TestKind::RankDcov, NuTag::Gaussian, ScoreKind::Identity)
    }
}

/// A power simulation. Two-sample settings shift `Y` by `θ·1`; the Konijn
/// setting mixes independent `(X', Y')` with strength `δ = θ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub setting: Setting,
    /// Data family (defaults to the setting's family; Konijn uses it for both blocks).
    pub family: Family,
    /// `d`, or `d₁` for Konijn.
    pub d: usize,
    /// `d₂` for Konijn.
    pub d2: usize,
    /// First sample size (ignored for Konijn).
    pub m: usize,
    pub n: usize,
    pub thetas: Vec<f64>,
    pub replications: usize,
    pub alpha: f64,
    pub tests: Vec<TestConfig>,
    pub seed: u64,
    /// Konijn mixing matrix (defaults to the rectangular identity).
    pub mixing: Option<DMatrix<f64>>,
    /// Size of the universal null tables of the rank tests; `None` uses
    /// χ² cutoffs for every test.
    pub null_replications: Option<usize>,
}

impl ScenarioSpec {
    /// Setting defaults: `m = n = 300`, `B = 500`, `α = 0.05`, Hotelling
    /// plus both rank tests (Wilks and rank Spearman for Konijn).
    pub fn new(setting: Setting, d: usize, seed: u64) -> Self {
        let tests = if setting == Setting::Konijn {
            vec![TestConfig::rank_spearman(), TestConfig::wilks()]
        } else {
            vec![TestConfig::hotelling(), TestConfig::rank_uniform(), TestConfig::rank_gaussian()]
        };
        Self {
            setting,
            family: setting.family(d),
            d,
            d2: d,
            m: 300,
            n: 300,
            thetas: setting.default_thetas(),
            replications: 500,
            alpha: 0.05,
            tests,
            seed,
            mixing: None,
            null_replications: Some(DEFAULT_NULL_REPLICATIONS),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::invalid("replications must be at least 1"));
        }
        if self.thetas.is_empty() {
            return Err(Error::invalid("alternative grid is empty"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::domain("scenario", format!("α = {} not in (0, 1)", self.alpha)));
        }
        if self.tests.is_empty() {
            return Err(Error::invalid("no tests selected"));
        }
        check_null_replications(self.null_replications)?;
        let konijn = self.setting == Setting::Konijn;
        for t in &self.tests {
            if t.kind.is_two_sample() == konijn {
                return Err(Error::invalid(format!(
                    "{} does not apply to setting {}",
                    t.kind, self.setting
                )));
            }
        }
        if self.n < 3 || (!konijn && self.m < 2) {
            return Err(Error::invalid("sample sizes too small"));
        }
        self.family.validate(self.d)
    }
}

/// Rejection rate of one test at one alternative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerPoint {
    pub theta: f64,
    pub test: String,
    pub power: f64,
    /// `√(p(1−p)/B)`.
    pub se: f64,
    pub replications: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerCurve {
    pub setting: Setting,
    pub points: Vec<PowerPoint>,
    pub runtime_secs: f64,
}

impl PowerCurve {
    pub fn rates(&self, test: &str) -> Vec<f64> {
        self.points.iter().filter(|p| p.test == test).map(|p| p.power).collect()
    }

    pub fn tests(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for p in &self.points {
            if !out.contains(&p.test) {
                out.push(p.test.clone());
            }
        }
        out
    }

    /// `theta,test,power,se,B,seed` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("theta,test,power,se,B,seed\n");
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                p.theta, p.test, p.power, p.se, p.replications, p.seed
            ));
        }
        out
    }

    /// Whitespace-separated blocks, one per test, separated by blank lines.
    pub fn to_gnuplot(&self) -> String {
        let mut out = String::new();
        for test in self.tests() {
            out.push_str(&format!("# test {test}\n# theta power se\n"));
            for p in self.points.iter().filter(|p| p.test == test) {
                out.push_str(&format!("{} {} {}\n", p.theta, p.power, p.se));
            }
            out.push_str("\n\n");
        }
        out
    }

    /// Largest isotonic-regression residual of each test's curve.
    pub fn monotonicity_residual(&self) -> f64 {
        self.tests()
            .iter()
            .map(|t| isotonic_residual(&self.rates(t)))
            .fold(0.0, f64::max)
    }

    pub fn max_se(&self) -> f64 {
        self.points.iter().map(|p| p.se).fold(0.0, f64::max)
    }
}

/// Least-squares non-decreasing fit (pool adjacent violators).
pub fn isotonic_fit(values: &[f64]) -> Vec<f64> {
    let mut blocks: Vec<(f64, usize)> = Vec::new();
    for &v in values {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (m2, w2) = blocks[blocks.len() - 1];
            let (m1, w1) = blocks[blocks.len() - 2];
            if m1 <= m2 {
                break;
            }
            blocks.pop();
            let w = w1 + w2;
            *blocks.last_mut().expect("non-empty") = ((m1 * w1 as f64 + m2 * w2 as f64) / w as f64, w);
        }
    }
    blocks.into_iter().flat_map(|(m, w)| std::iter::repeat_n(m, w)).collect()
}

/// `max |v − isotonic_fit(v)|`.
pub fn isotonic_residual(values: &[f64]) -> f64 {
    isotonic_fit(values)
        .iter()
        .zip(values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

fn binomial_se(p: f64, b: usize) -> f64 {
    (p * (1.0 - p) / b as f64).sqrt()
}

fn run_test(
    config: &TestConfig,
    x: &SampleMatrix,
    y: &SampleMatrix,
    opts: &TestOptions,
) -> Result<bool> {
    let report = if config.kind.is_two_sample() {
        let input = TwoSampleInput::new(x.clone(), y.clone(), config.grid.clone(), config.score)?;
        run_two_sample(config.kind, &input, opts)?
    } else {
        let input = IndependenceInput::symmetric(x.clone(), y.clone(), config.grid.clone(), config.score)?;
        run_independence(config.kind, &input, opts)?
    };
    Ok(report.decision)
}

/// Draws the data of one replication.
fn scenario_data(spec: &ScenarioSpec, theta: f64, rng: &mut StreamRng) -> Result<(SampleMatrix, SampleMatrix)> {
    if spec.setting == Setting::Konijn {
        let x0 = sample_family(&spec.family, 0.0, spec.n, spec.d, rng)?;
        let y0 = sample_family(&spec.family, 0.0, spec.n, spec.d2, rng)?;
        let m = spec
            .mixing
            .clone()
            .unwrap_or_else(|| rectangular_identity(spec.d, spec.d2));
        konijn_mix(&x0, &y0, &m, theta)
    } else {
        let x = sample_family(&spec.family, 0.0, spec.m, spec.d, rng)?;
        let y = sample_family(&spec.family, theta, spec.n, spec.d, rng)?;
        Ok((x, y))
    }
}

pub const DEFAULT_NULL_REPLICATIONS: usize = 2000;
const NULL_SEED_SALT: u64 = 0x6e75_6c6c;

fn check_null_replications(b: Option<usize>) -> Result<()> {
    match b {
        Some(b) if b < 100 => Err(Error::invalid(format!("null tables need at least 100 draws, got {b}"))),
        _ => Ok(()),
    }
}

/// Calibration of `config` for data of the given shape: a universal null
/// table for rank tests when `null_replications` is set, χ² otherwise.
fn calibrate(
    config: &TestConfig,
    sizes: (usize, usize),
    dims: (usize, usize),
    alpha: f64,
    null_replications: Option<usize>,
    seed: u64,
) -> Result<TestOptions> {
    let b = match null_replications {
        Some(b) if config.kind.is_rank_based() => b,
        _ => return Ok(TestOptions::asymptotic(alpha)),
    };
    let problem = if config.kind.is_two_sample() {
        NullProblem::two_sample_shape(config.grid, config.score, sizes.0, sizes.1, dims.0)?
    } else {
        NullProblem::independence_shape(config.kind, config.grid, config.score, sizes.1, dims)?
    };
    let table = simulate_null(&problem, b, seed ^ NULL_SEED_SALT, NullRoute::LabelPermutation)?;
    Ok(TestOptions {
        alpha,
        mode: CalibrationMode::Table(Arc::new(table)),
    })
}

/// Rejection rates of every test at every alternative.
pub fn power_curve(spec: &ScenarioSpec) -> Result<PowerCurve> {
    spec.validate()?;
    let start = Instant::now();
    let opts = spec
        .tests
        .iter()
        .map(|c| calibrate(c, (spec.m, spec.n), (spec.d, spec.d2), spec.alpha, spec.null_replications, spec.seed))
        .collect::<Result<Vec<_>>>()?;
    let mut points = Vec::new();
    for (t, &theta) in spec.thetas.iter().enumerate() {
        let decisions = (0..spec.replications)
            .into_par_iter()
            .map(|r| {
                let mut rng = substream(spec.seed, stream_index(t, r));
                let (x, y) = scenario_data(spec, theta, &mut rng)?;
                spec.tests
                    .iter()
                    .zip(&opts)
                    .map(|(c, o)| run_test(c, &x, &y, o))
                    .collect::<Result<Vec<bool>>>()
            })
            .collect::<Result<Vec<Vec<bool>>>>()?;
        for (k, config) in spec.tests.iter().enumerate() {
            let hits = decisions.iter().filter(|d| d[k]).count();
            let power = hits as f64 / spec.replications as f64;
            points.push(PowerPoint {
                theta,
                test: config.label.clone(),
                power,
                se: binomial_se(power, spec.replications),
                replications: spec.replications,
                seed: spec.seed,
            });
        }
    }
    Ok(PowerCurve {
        setting: spec.setting,
        points,
        runtime_secs: start.elapsed().as_secs_f64(),
    })
}

/// Konijn independence power; `spec.setting` must be `Konijn`.
pub fn konijn_power(spec: &ScenarioSpec) -> Result<PowerCurve> {
    if spec.setting != Setting::Konijn {
        return Err(Error::invalid("konijn_power needs the Konijn setting"));
    }
    power_curve(spec)
}

/// Sample-size matching run: the rank-uniform test at `n` against Hotelling
/// and the rank-Gaussian test at `⌊ratio · n⌋`.
#[derive(Debug, Clone, PartialEq)]
pub struct HlSpec {
    pub setting: Setting,
    pub d: usize,
    pub ns: Vec<usize>,
    /// `0.864` for H1, `0.95` for H2.
    pub ratio: f64,
    pub theta: f64,
    pub replications: usize,
    pub alpha: f64,
    pub seed: u64,
    /// As in [`ScenarioSpec::null_replications`].
    pub null_replications: Option<usize>,
}

impl HlSpec {
    /// `n ∈ {100, 300, …, 1100}`, shift `0.1`, `B = 500`.
    pub fn new(setting: Setting, seed: u64) -> Result<Self> {
        let ratio = match setting {
            Setting::H1 => 0.864,
            Setting::H2 => 0.95,
            other => return Err(Error::invalid(format!("sample-size matching needs H1 or H2, not {other}"))),
        };
        Ok(Self {
            setting,
            d: 2,
            ns: (100..=1100).step_by(200).collect(),
            ratio,
            theta: 0.1,
            replications: 500,
            alpha: 0.05,
            seed,
            null_replications: Some(DEFAULT_NULL_REPLICATIONS),
        })
    }

    pub fn matched(&self, n: usize) -> usize {
        (self.ratio * n as f64).floor() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HlRow {
    pub n: usize,
    pub n_matched: usize,
    pub rank_uniform: f64,
    pub hotelling: f64,
    pub rank_gaussian: f64,
    pub se_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HlReport {
    pub setting: Setting,
    pub replications: usize,
    pub rows: Vec<HlRow>,
    /// `max |rank_uniform(n) − hotelling(⌊ratio·n⌋)|`.
    pub max_gap: f64,
    /// `min (rank_gaussian − hotelling)` at the matched sizes.
    pub min_gaussian_advantage: f64,
    /// Largest pairwise spread among the three curves at any `n`.
    pub max_spread: f64,
}

impl HlReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,n_matched,rank_uniform,hotelling,rank_gaussian,se_max\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.n, r.n_matched, r.rank_uniform, r.hotelling, r.rank_gaussian, r.se_max
            ));
        }
        out
    }
}

/// Runs the matching protocol. Each replication draws `n` observations per
/// sample; the matched tests use the first `⌊ratio·n⌋` rows of the same draws.
pub fn hl_sample_size_match(spec: &HlSpec) -> Result<HlReport> {
    if !matches!(spec.setting, Setting::H1 | Setting::H2) {
        return Err(Error::invalid("sample-size matching needs H1 or H2"));
    }
    if spec.replications == 0 || spec.ns.is_empty() {
        return Err(Error::invalid("need at least one replication and one sample size"));
    }
    check_null_replications(spec.null_replications)?;
    let family = spec.setting.family(spec.d);
    let hotelling_opts = TestOptions::asymptotic(spec.alpha);
    let uniform = TestConfig::rank_uniform();
    let gaussian = TestConfig::rank_gaussian();
    let hotelling = TestConfig::hotelling();
    let mut rows = Vec::new();
    for (t, &n) in spec.ns.iter().enumerate() {
        let k = spec.matched(n);
        if k < 3 {
            return Err(Error::invalid(format!("matched size for n = {n} is too small")));
        }
        let dims = (spec.d, spec.d);
        let uniform_opts = calibrate(&uniform, (n, n), dims, spec.alpha, spec.null_replications, spec.seed)?;
        let gaussian_opts = calibrate(&gaussian, (k, k), dims, spec.alpha, spec.null_replications, spec.seed)?;
        let decisions = (0..spec.replications)
            .into_par_iter()
            .map(|r| {
                let mut rng = substream(spec.seed, stream_index(t, r));
                let x = sample_family(&family, 0.0, n, spec.d, &mut rng)?;
                let y = sample_family(&family, spec.theta, n, spec.d, &mut rng)?;
                let (xk, yk) = (x.head(k), y.head(k));
                Ok([
                    run_test(&uniform, &x, &y, &uniform_opts)?,
                    run_test(&hotelling, &xk, &yk, &hotelling_opts)?,
                    run_test(&gaussian, &xk, &yk, &gaussian_opts)?,
                ])
            })
            .collect::<Result<Vec<[bool; 3]>>>()?;
        let b = spec.replications as f64;
        let rate = |i: usize| decisions.iter().filter(|d| d[i]).count() as f64 / b;
        let (u, h, g) = (rate(0), rate(1), rate(2));
        let se_max = [u, h, g]
            .iter()
            .map(|&p| binomial_se(p, spec.replications))
            .fold(0.0, f64::max);
        rows.push(HlRow {
            n,
            n_matched: k,
            rank_uniform: u,
            hotelling: h,
            rank_gaussian: g,
            se_max,
        });
    }
    let max_gap = rows.iter().map(|r| (r.rank_uniform - r.hotelling).abs()).fold(0.0, f64::max);
    let min_gaussian_advantage = rows
        .iter()
        .map(|r| r.rank_gaussian - r.hotelling)
        .fold(f64::INFINITY, f64::min);
    let max_spread = rows
        .iter()
        .map(|r| {
            let v = [r.rank_uniform, r.hotelling, r.rank_gaussian];
            v.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - v.iter().cloned().fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max);
    Ok(HlReport {
        setting: spec.setting,
        replications: spec.replications,
        rows,
        max_gap,
        min_gaussian_advantage,
        max_spread,
    })
}
