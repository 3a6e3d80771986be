//! Null calibration: χ² cutoffs, simulated null tables and their cache.
//!
//! Rank statistics have the same null law for every continuous data
//! distribution, so a null table depends only on the grid, the score and
//! the sample sizes. Tables can therefore be simulated from convenient
//! data, or by shuffling labels on the grid directly, and cached on disk.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::lap::empirical_rank_map;
use crate::linalg::{spd_inverse, sym_inv_sqrt};
use crate::reference::{sample_reference, GridSpec, NuTag, ReferenceGrid, ScoreFunction, ScoreKind};
use crate::rng::{substream, StreamRng};
use crate::sample::SampleMatrix;
use crate::special::{chi2_quantile, chi2_sf};
use crate::statistics::{
    hotelling_from_labels, hotelling_from_scores, hotelling_t2, rank_hotelling_on,
    rank_spearman_on, rdcov_from_scores, spearman_from_pairing, spearman_from_scores, wilks,
    IndependenceInput, TestKind, TwoSampleInput,
};

pub const DEFAULT_REPLICATIONS: usize = 2000;
/// Tables with fewer draws are never written to the cache.
pub const MIN_CACHED_REPLICATIONS: usize = 1000;
pub const CACHE_ENV: &str = "OTRANK_CACHE";

/// `chi2_quantile(df, 1 − α)`.
pub fn asymptotic_cutoff(df: usize, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain("asymptotic_cutoff", format!("α = {alpha} not in (0, 1)")));
    }
    chi2_quantile(df, 1.0 - alpha)
}

/// How a simulated null is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NullRoute {
    /// Shuffle sample labels over the scored grid (two-sample) or pair
    /// the two scored grids at random (independence). No assignment
    /// problem is solved.
    LabelPermutation,
    /// Draw fresh iid data from `Unif[0,1]^d` and rank it.
    FreshUniform,
    /// Draw fresh iid data from `N(0, I_d)` and rank it.
    FreshGaussian,
}

impl NullRoute {
    pub fn as_str(self) -> &'static str {
        match self {
            NullRoute::LabelPermutation => "label_permutation",
            NullRoute::FreshUniform => "fresh_uniform",
            NullRoute::FreshGaussian => "fresh_gaussian",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationSource {
    Asymptotic,
    Permutation,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CalibrationMode {
    Asymptotic,
    Permutation {
        replications: usize,
        seed: u64,
        route: NullRoute,
        /// Cache directory; `None` disables caching.
        cache: Option<PathBuf>,
    },
    /// A precomputed universal null table (rank tests only); its key must
    /// match the test's sizes, grid and score.
    Table(Arc<NullTable>),
}

impl CalibrationMode {
    pub fn permutation(replications: usize, seed: u64) -> Self {
        CalibrationMode::Permutation {
            replications,
            seed,
            route: NullRoute::LabelPermutation,
            cache: None,
        }
    }
}

/// Outcome of one test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub test: TestKind,
    pub statistic: f64,
    /// χ² degrees of freedom (`None` for tests without a χ² limit).
    pub df: Option<usize>,
    pub cutoff: f64,
    pub p_value: f64,
    pub alpha: f64,
    pub calibration: CalibrationSource,
    pub decision: bool,
    pub diagnostics: BTreeMap<String, f64>,
}

/// Identifies a universal null table.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NullTableKey {
    pub test: TestKind,
    /// `[m, n]` for two-sample tests, `[n]` for independence tests.
    pub sizes: Vec<usize>,
    /// `[d]` or `[d₁, d₂]`.
    pub dims: Vec<usize>,
    pub grid_fingerprint: String,
    pub score: String,
    pub replications: usize,
    pub seed: u64,
    pub route: NullRoute,
}

impl NullTableKey {
    /// One-line canonical text form, used as the cache header.
    pub fn canonical(&self) -> String {
        serde_json::to_string(self).expect("key serializes")
    }

    pub fn file_name(&self) -> String {
        format!("{}.null", &hex_digest(self.canonical().as_bytes())[..24])
    }
}

fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// SHA-256 of the grid's CSV export.
pub fn grid_fingerprint(grid: &ReferenceGrid) -> String {
    hex_digest(grid.to_csv().as_bytes())
}

/// Sorted null draws.
#[derive(Debug, Clone, PartialEq)]
pub struct NullTable {
    pub key: NullTableKey,
    draws: Vec<f64>,
}

impl NullTable {
    pub fn new(key: NullTableKey, mut draws: Vec<f64>) -> Result<Self> {
        if draws.is_empty() {
            return Err(Error::invalid("null table needs at least one draw"));
        }
        if draws.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("null draws"));
        }
        draws.sort_by(f64::total_cmp);
        Ok(Self { key, draws })
    }

    pub fn draws(&self) -> &[f64] {
        &self.draws
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    /// Empirical `p`-quantile (type 1, inverse of the empirical CDF).
    pub fn quantile(&self, p: f64) -> f64 {
        let b = self.draws.len();
        let k = ((p * b as f64).ceil() as usize).clamp(1, b);
        self.draws[k - 1]
    }

    /// `(1 + #{draws ≥ observed}) / (B + 1)`.
    pub fn p_value(&self, observed: f64) -> f64 {
        let below = self.draws.partition_point(|&v| v < observed);
        let at_least = self.draws.len() - below;
        (1 + at_least) as f64 / (self.draws.len() + 1) as f64
    }

    /// Smallest `c` with `statistic ≥ c ⇔ p_value(statistic) ≤ α`.
    pub fn cutoff(&self, alpha: f64) -> f64 {
        let b = self.draws.len();
        let k = (alpha * (b + 1) as f64).floor() as usize;
        if k == 0 {
            return f64::INFINITY;
        }
        self.draws[b - k.min(b)].next_up()
    }
}

/// Everything a null simulation needs, with the data removed.
#[derive(Debug, Clone)]
pub enum NullProblem {
    TwoSample {
        grid: ReferenceGrid,
        score: ScoreFunction,
        sigma_inv: DMatrix<f64>,
        m: usize,
    },
    Independence {
        test: TestKind,
        grid_x: ReferenceGrid,
        grid_y: ReferenceGrid,
        score_x: ScoreFunction,
        score_y: ScoreFunction,
        w_x: DMatrix<f64>,
        w_y: DMatrix<f64>,
    },
}

impl NullProblem {
    pub fn two_sample(input: &TwoSampleInput, grid: ReferenceGrid) -> Result<Self> {
        Ok(NullProblem::TwoSample {
            grid,
            score: input.score_fn(),
            sigma_inv: spd_inverse(&input.erd.sigma_erd)?,
            m: input.m(),
        })
    }

    /// The two-sample problem for sizes `(m, n)` in dimension `d`, no data needed.
    pub fn two_sample_shape(grid: GridSpec, score: ScoreKind, m: usize, n: usize, d: usize) -> Result<Self> {
        let input = TwoSampleInput::new(SampleMatrix::zeros(m, d), SampleMatrix::zeros(n, d), grid, score)?;
        Self::two_sample(&input, input.build_grid()?)
    }

    /// The independence problem for `n` pairs with block dimensions `(d1, d2)`,
    /// both blocks sharing one grid recipe and score.
    pub fn independence_shape(
        test: TestKind,
        grid: GridSpec,
        score: ScoreKind,
        n: usize,
        dims: (usize, usize),
    ) -> Result<Self> {
        let input = IndependenceInput::symmetric(SampleMatrix::zeros(n, dims.0), SampleMatrix::zeros(n, dims.1), grid, score)?;
        Self::independence(test, &input, input.build_grids()?)
    }

    pub fn independence(test: TestKind, input: &IndependenceInput, grids: (ReferenceGrid, ReferenceGrid)) -> Result<Self> {
        if !matches!(test, TestKind::RankSpearman | TestKind::RankDcov) {
            return Err(Error::invalid(format!("{test} is not a rank independence test")));
        }
        let (dx, dy) = input.dims();
        Ok(NullProblem::Independence {
            test,
            grid_x: grids.0,
            grid_y: grids.1,
            score_x: ScoreFunction::new(input.score_x, dx),
            score_y: ScoreFunction::new(input.score_y, dy),
            w_x: sym_inv_sqrt(&input.erd_x.sigma_erd)?,
            w_y: sym_inv_sqrt(&input.erd_y.sigma_erd)?,
        })
    }

    pub fn key(&self, replications: usize, seed: u64, route: NullRoute) -> NullTableKey {
        match self {
            NullProblem::TwoSample { grid, score, m, .. } => NullTableKey {
                test: TestKind::RankHotelling,
                sizes: vec![*m, grid.len() - m],
                dims: vec![grid.dim()],
                grid_fingerprint: grid_fingerprint(grid),
                score: score.kind.as_str().to_string(),
                replications,
                seed,
                route,
            },
            NullProblem::Independence {
                test,
                grid_x,
                grid_y,
                score_x,
                score_y,
                ..
            } => NullTableKey {
                test: *test,
                sizes: vec![grid_x.len()],
                dims: vec![grid_x.dim(), grid_y.dim()],
                grid_fingerprint: hex_digest(format!("{}{}", grid_x.to_csv(), grid_y.to_csv()).as_bytes()),
                score: format!("{}|{}", score_x.kind, score_y.kind),
                replications,
                seed,
                route,
            },
        }
    }

    fn fresh_ranks(grid: &ReferenceGrid, route: NullRoute, rng: &mut StreamRng) -> Result<SampleMatrix> {
        let nu = match route {
            NullRoute::FreshGaussian => NuTag::Gaussian,
            _ => NuTag::UniformCube,
        };
        let mut data = SampleMatrix::zeros(grid.len(), grid.dim());
        for i in 0..grid.len() {
            sample_reference(nu, rng, data.row_mut(i))?;
        }
        Ok(empirical_rank_map(&data, grid)?.ranks)
    }

    /// One null draw from replication stream `rng`.
    pub fn draw(&self, route: NullRoute, scored_grids: &[SampleMatrix], rng: &mut StreamRng) -> Result<f64> {
        match self {
            NullProblem::TwoSample {
                grid,
                score,
                sigma_inv,
                m,
            } => match route {
                NullRoute::LabelPermutation => {
                    let n_total = grid.len();
                    let mut labels: Vec<bool> = (0..n_total).map(|i| i < *m).collect();
                    labels.shuffle(rng);
                    Ok(hotelling_from_labels(&scored_grids[0], &labels, sigma_inv))
                }
                _ => {
                    let ranks = Self::fresh_ranks(grid, route, rng)?;
                    let scores = score.apply_all(&ranks)?;
                    Ok(hotelling_from_scores(&scores, *m, sigma_inv).statistic)
                }
            },
            NullProblem::Independence {
                test,
                grid_x,
                grid_y,
                score_x,
                score_y,
                w_x,
                w_y,
            } => {
                let (jx, jy) = match route {
                    NullRoute::LabelPermutation => {
                        let mut pair: Vec<usize> = (0..grid_x.len()).collect();
                        pair.shuffle(rng);
                        if *test == TestKind::RankSpearman {
                            return Ok(spearman_from_pairing(&scored_grids[0], &scored_grids[1], Some(&pair), w_x, w_y));
                        }
                        (scored_grids[0].clone(), scored_grids[1].select_rows(&pair))
                    }
                    _ => {
                        let rx = Self::fresh_ranks(grid_x, route, rng)?;
                        let ry = Self::fresh_ranks(grid_y, route, rng)?;
                        (score_x.apply_all(&rx)?, score_y.apply_all(&ry)?)
                    }
                };
                Ok(match test {
                    TestKind::RankSpearman => spearman_from_scores(&jx, &jy, w_x, w_y),
                    _ => rdcov_from_scores(&jx, &jy),
                })
            }
        }
    }

    fn scored_grids(&self) -> Result<Vec<SampleMatrix>> {
        match self {
            NullProblem::TwoSample { grid, score, .. } => Ok(vec![score.apply_all(grid.points())?]),
            NullProblem::Independence {
                grid_x,
                grid_y,
                score_x,
                score_y,
                ..
            } => Ok(vec![
                score_x.apply_all(grid_x.points())?,
                score_y.apply_all(grid_y.points())?,
            ]),
        }
    }
}

/// Simulates `replications` null draws; draw `r` uses substream `r` of `seed`.
pub fn simulate_null(problem: &NullProblem, replications: usize, seed: u64, route: NullRoute) -> Result<NullTable> {
    if replications < 100 {
        return Err(Error::invalid(format!(
            "null tables need at least 100 replications (got {replications})"
        )));
    }
    let scored = problem.scored_grids()?;
    let draws: Vec<f64> = (0..replications)
        .into_par_iter()
        .map(|r| {
            let mut rng = substream(seed, r as u64);
            problem.draw(route, &scored, &mut rng)
        })
        .collect::<Result<_>>()?;
    NullTable::new(problem.key(replications, seed, route), draws)
}

/// [`simulate_null`] backed by the on-disk cache when `cache` is set.
pub fn permutation_null(
    problem: &NullProblem,
    replications: usize,
    seed: u64,
    route: NullRoute,
    cache: Option<&Path>,
) -> Result<NullTable> {
    let key = problem.key(replications, seed, route);
    let cache = cache.filter(|_| replications >= MIN_CACHED_REPLICATIONS);
    if let Some(dir) = cache {
        if let Some(table) = NullCache::new(dir).load(&key)? {
            return Ok(table);
        }
    }
    let table = simulate_null(problem, replications, seed, route)?;
    if let Some(dir) = cache {
        NullCache::new(dir).store(&table)?;
    }
    Ok(table)
}

/// Default cache location: `$OTRANK_CACHE`, else `$XDG_CACHE_HOME/otrank`,
/// else `$HOME/.cache/otrank`.
pub fn default_cache_dir() -> Option<PathBuf> {
    if let Some(p) = std::env::var_os(CACHE_ENV) {
        return Some(PathBuf::from(p));
    }
    if let Some(p) = std::env::var_os("XDG_CACHE_HOME") {
        return Some(PathBuf::from(p).join("otrank"));
    }
    std::env::var_os("HOME").map(|h| PathBuf::from(h).join(".cache").join("otrank"))
}

/// Directory of null tables.
///
/// Each table is a file whose first line is the canonical key, followed by
/// the sorted draws as little-endian `f64`. `index.tsv` lists
/// `fingerprint<TAB>file` pairs.
#[derive(Debug, Clone)]
pub struct NullCache {
    dir: PathBuf,
}

impl NullCache {
    pub const INDEX: &'static str = "index.tsv";

    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn load(&self, key: &NullTableKey) -> Result<Option<NullTable>> {
        let path = self.dir.join(key.file_name());
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        let Some(nl) = bytes.iter().position(|&b| b == b'\n') else {
            return Ok(None);
        };
        if &bytes[..nl] != key.canonical().as_bytes() {
            return Ok(None);
        }
        let body = &bytes[nl + 1..];
        if body.len() != 8 * key.replications {
            return Ok(None);
        }
        let draws: Vec<f64> = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        NullTable::new(key.clone(), draws).map(Some)
    }

    pub fn store(&self, table: &NullTable) -> Result<PathBuf> {
        fs::create_dir_all(&self.dir)?;
        let name = table.key.file_name();
        let mut body = Vec::with_capacity(table.len() * 8 + 256);
        body.extend_from_slice(table.key.canonical().as_bytes());
        body.push(b'\n');
        for v in table.draws() {
            body.extend_from_slice(&v.to_le_bytes());
        }
        let path = self.dir.join(&name);
        self.write_atomic(&path, &body)?;

        let index_path = self.dir.join(Self::INDEX);
        let mut index = fs::read_to_string(&index_path).unwrap_or_default();
        let line = format!("{}\t{}", table.key.grid_fingerprint, name);
        if !index.lines().any(|l| l == line) {
            index.push_str(&line);
            index.push('\n');
            self.write_atomic(&index_path, index.as_bytes())?;
        }
        Ok(path)
    }

    /// Files recorded for a grid fingerprint.
    pub fn lookup(&self, fingerprint: &str) -> Vec<String> {
        fs::read_to_string(self.dir.join(Self::INDEX))
            .unwrap_or_default()
            .lines()
            .filter_map(|l| l.split_once('\t'))
            .filter(|(f, _)| *f == fingerprint)
            .map(|(_, name)| name.to_string())
            .collect()
    }

    fn write_atomic(&self, path: &Path, bytes: &[u8]) -> Result<()> {
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)?;
        tmp.write_all(bytes)?;
        tmp.as_file().sync_all()?;
        tmp.persist(path).map_err(|e| Error::Io(e.error))?;
        Ok(())
    }
}

/// Significance level and calibration for [`run_two_sample`] and [`run_independence`].
#[derive(Debug, Clone, PartialEq)]
pub struct TestOptions {
    pub alpha: f64,
    pub mode: CalibrationMode,
}

impl TestOptions {
    pub fn asymptotic(alpha: f64) -> Self {
        Self {
            alpha,
            mode: CalibrationMode::Asymptotic,
        }
    }

    pub fn permutation(alpha: f64, replications: usize, seed: u64) -> Self {
        Self {
            alpha,
            mode: CalibrationMode::permutation(replications, seed),
        }
    }
}

fn asymptotic_report(test: TestKind, statistic: f64, df: Option<usize>, alpha: f64) -> Result<TestReport> {
    let df = df.ok_or_else(|| {
        Error::invalid(format!("{test} has no χ² limit; use permutation calibration"))
    })?;
    let cutoff = asymptotic_cutoff(df, alpha)?;
    let p_value = chi2_sf(df, statistic.max(0.0))?;
    Ok(TestReport {
        test,
        statistic,
        df: Some(df),
        cutoff,
        p_value,
        alpha,
        calibration: CalibrationSource::Asymptotic,
        decision: statistic >= cutoff,
        diagnostics: BTreeMap::new(),
    })
}

fn table_report(test: TestKind, statistic: f64, df: Option<usize>, alpha: f64, table: &NullTable) -> TestReport {
    let cutoff = table.cutoff(alpha);
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("replications".to_string(), table.len() as f64);
    diagnostics.insert("null_q95".to_string(), table.quantile(0.95));
    TestReport {
        test,
        statistic,
        df,
        cutoff,
        p_value: table.p_value(statistic),
        alpha,
        calibration: CalibrationSource::Permutation,
        decision: statistic >= cutoff,
        diagnostics,
    }
}

fn check_table(problem: &NullProblem, table: &NullTable) -> Result<()> {
    let k = &table.key;
    if problem.key(k.replications, k.seed, k.route) == *k {
        Ok(())
    } else {
        Err(Error::invalid("null table was built for different sizes, grid or score"))
    }
}

fn not_distribution_free(test: TestKind) -> Error {
    Error::invalid(format!("{test} is not distribution-free; a universal null table does not apply"))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::domain("test level", format!("α = {alpha} not in (0, 1)")))
    }
}

/// Runs a two-sample test (`RankHotelling` or `Hotelling`).
pub fn run_two_sample(test: TestKind, input: &TwoSampleInput, opts: &TestOptions) -> Result<TestReport> {
    check_alpha(opts.alpha)?;
    let d = input.dim();
    let df = test.chi2_df(d, 1);
    let mut report = match test {
        TestKind::RankHotelling => {
            let grid = input.build_grid()?;
            let statistic = rank_hotelling_on(input, &grid)?.statistic;
            match &opts.mode {
                CalibrationMode::Asymptotic => asymptotic_report(test, statistic, df, opts.alpha)?,
                CalibrationMode::Permutation {
                    replications,
                    seed,
                    route,
                    cache,
                } => {
                    let problem = NullProblem::two_sample(input, grid)?;
                    let table = permutation_null(&problem, *replications, *seed, *route, cache.as_deref())?;
                    table_report(test, statistic, df, opts.alpha, &table)
                }
                CalibrationMode::Table(table) => {
                    check_table(&NullProblem::two_sample(input, grid)?, table)?;
                    table_report(test, statistic, df, opts.alpha, table)
                }
            }
        }
        TestKind::Hotelling => {
            let statistic = hotelling_t2(&input.x, &input.y)?;
            match &opts.mode {
                CalibrationMode::Asymptotic => asymptotic_report(test, statistic, df, opts.alpha)?,
                CalibrationMode::Permutation {
                    replications, seed, ..
                } => {
                    let pooled = input.x.vstack(&input.y)?;
                    let m = input.m();
                    let draws = (0..*replications)
                        .into_par_iter()
                        .map(|r| {
                            let mut rng = substream(*seed, r as u64);
                            let mut idx: Vec<usize> = (0..pooled.nrows()).collect();
                            idx.shuffle(&mut rng);
                            hotelling_t2(&pooled.select_rows(&idx[..m]), &pooled.select_rows(&idx[m..]))
                        })
                        .collect::<Result<Vec<f64>>>()?;
                    let key = data_permutation_key(test, vec![m, input.n()], vec![d], *replications, *seed);
                    table_report(test, statistic, df, opts.alpha, &NullTable::new(key, draws)?)
                }
                CalibrationMode::Table(_) => return Err(not_distribution_free(test)),
            }
        }
        other => return Err(Error::invalid(format!("{other} is not a two-sample test"))),
    };
    report.diagnostics.insert("m".into(), input.m() as f64);
    report.diagnostics.insert("n".into(), input.n() as f64);
    report.diagnostics.insert("d".into(), d as f64);
    Ok(report)
}

fn data_permutation_key(test: TestKind, sizes: Vec<usize>, dims: Vec<usize>, replications: usize, seed: u64) -> NullTableKey {
    NullTableKey {
        test,
        sizes,
        dims,
        grid_fingerprint: String::new(),
        score: String::new(),
        replications,
        seed,
        route: NullRoute::LabelPermutation,
    }
}

/// Runs an independence test (`RankSpearman`, `Wilks` or `RankDcov`).
pub fn run_independence(test: TestKind, input: &IndependenceInput, opts: &TestOptions) -> Result<TestReport> {
    check_alpha(opts.alpha)?;
    let (d1, d2) = input.dims();
    let df = test.chi2_df(d1, d2);
    let mut report = match test {
        TestKind::RankSpearman | TestKind::RankDcov => {
            let grids = input.build_grids()?;
            let statistic = if test == TestKind::RankSpearman {
                rank_spearman_on(input, &grids)?
            } else {
                let (jx, jy) = crate::statistics::block_scores(input, &grids)?;
                rdcov_from_scores(&jx, &jy)
            };
            match &opts.mode {
                CalibrationMode::Asymptotic => asymptotic_report(test, statistic, df, opts.alpha)?,
                CalibrationMode::Permutation {
                    replications,
                    seed,
                    route,
                    cache,
                } => {
                    let problem = NullProblem::independence(test, input, grids)?;
                    let table = permutation_null(&problem, *replications, *seed, *route, cache.as_deref())?;
                    table_report(test, statistic, df, opts.alpha, &table)
                }
                CalibrationMode::Table(table) => {
                    check_table(&NullProblem::independence(test, input, grids)?, table)?;
                    table_report(test, statistic, df, opts.alpha, table)
                }
            }
        }
        TestKind::Wilks => {
            let statistic = wilks(&input.x, &input.y)?;
            match &opts.mode {
                CalibrationMode::Asymptotic => asymptotic_report(test, statistic, df, opts.alpha)?,
                CalibrationMode::Permutation {
                    replications, seed, ..
                } => {
                    let draws = (0..*replications)
                        .into_par_iter()
                        .map(|r| {
                            let mut rng = substream(*seed, r as u64);
                            let mut idx: Vec<usize> = (0..input.n()).collect();
                            idx.shuffle(&mut rng);
                            wilks(&input.x, &input.y.select_rows(&idx))
                        })
                        .collect::<Result<Vec<f64>>>()?;
                    let key = data_permutation_key(test, vec![input.n()], vec![d1, d2], *replications, *seed);
                    table_report(test, statistic, df, opts.alpha, &NullTable::new(key, draws)?)
                }
                CalibrationMode::Table(_) => return Err(not_distribution_free(test)),
            }
        }
        other => return Err(Error::invalid(format!("{other} is not an independence test"))),
    };
    report.diagnostics.insert("n".into(), input.n() as f64);
    report.diagnostics.insert("d1".into(), d1 as f64);
    report.diagnostics.insert("d2".into(), d2 as f64);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference::{GridSpec, ScoreKind};
    use rand_distr::{Distribution, StandardNormal};

    fn normals(n: usize, d: usize, seed: u64, shift: f64) -> SampleMatrix {
        let mut rng = substream(seed, 0);
        let data: Vec<f64> = (0..n * d)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z + shift
            })
            .collect();
        SampleMatrix::from_flat(data, d).unwrap()
    }

    fn gaussian_input(m: usize, n: usize, d: usize, seed: u64, shift: f64) -> TwoSampleInput {
        TwoSampleInput::new(
            normals(m, d, seed, 0.0),
            normals(n, d, seed + 1_000_000, shift),
            GridSpec::new(NuTag::Gaussian),
            ScoreKind::Identity,
        )
        .unwrap()
    }

    #[test]
    fn asymptotic_cutoffs() {
        assert!((asymptotic_cutoff(2, 0.05).unwrap() - 5.991465).abs() < 1e-5);
        assert!(asymptotic_cutoff(3, 1.0 - 1e-12).unwrap() < 1e-6);
        assert_eq!(TestKind::RankSpearman.chi2_df(2, 2), Some(4));
        assert!(asymptotic_cutoff(2, 0.0).is_err());
        assert!(asymptotic_cutoff(2, 1.0).is_err());
    }

    #[test]
    fn table_accessors() {
        let key = data_permutation_key(TestKind::Hotelling, vec![1, 1], vec![1], 4, 0);
        let t = NullTable::new(key, vec![3.0, 1.0, 4.0, 2.0]).unwrap();
        assert_eq!(t.draws(), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(t.p_value(2.5), 3.0 / 5.0);
        assert_eq!(t.p_value(10.0), 1.0 / 5.0);
        assert_eq!(t.p_value(0.0), 1.0);
        assert_eq!(t.quantile(0.5), 2.0);
        // B = 4: α(B+1) < 1 means no statistic can reach p ≤ α
        assert_eq!(t.cutoff(0.05), f64::INFINITY);
        assert_eq!(t.p_value(3f64.next_up()), 0.4);
        assert_eq!(t.cutoff(0.4), 3f64.next_up());
    }

    #[test]
    fn cutoff_matches_p_value_rule() {
        let key = data_permutation_key(TestKind::Hotelling, vec![1, 1], vec![1], 200, 0);
        let draws: Vec<f64> = (0..200).map(|i| ((i * 37) % 101) as f64 / 7.0).collect();
        let t = NullTable::new(key, draws.clone()).unwrap();
        for alpha in [0.01, 0.05, 0.1, 0.5] {
            let c = t.cutoff(alpha);
            for &x in draws.iter().chain(&[100.0, -1.0, c, c.next_down()]) {
                assert_eq!(x >= c, t.p_value(x) <= alpha, "α = {alpha}, x = {x}");
            }
        }
    }

    #[test]
    fn null_tables_are_deterministic() {
        let input = gaussian_input(20, 20, 2, 1, 0.0);
        let problem = NullProblem::two_sample(&input, input.build_grid().unwrap()).unwrap();
        for route in [NullRoute::LabelPermutation, NullRoute::FreshUniform] {
            let a = simulate_null(&problem, 100, 9, route).unwrap();
            let b = simulate_null(&problem, 100, 9, route).unwrap();
            assert_eq!(a, b);
        }
        assert!(simulate_null(&problem, 99, 9, NullRoute::LabelPermutation).is_err());
    }

    #[test]
    fn determinism_across_thread_counts() {
        let input = gaussian_input(15, 15, 2, 2, 0.0);
        let problem = NullProblem::two_sample(&input, input.build_grid().unwrap()).unwrap();
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| simulate_null(&problem, 200, 4, NullRoute::FreshGaussian).unwrap())
        };
        assert_eq!(run(1), run(3));
    }

    #[test]
    fn cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let input = gaussian_input(10, 12, 2, 3, 0.0);
        let problem = NullProblem::two_sample(&input, input.build_grid().unwrap()).unwrap();
        let fresh = permutation_null(&problem, 1000, 5, NullRoute::LabelPermutation, Some(dir.path())).unwrap();
        let key = problem.key(1000, 5, NullRoute::LabelPermutation);
        let cache = NullCache::new(dir.path());
        let hit = cache.load(&key).unwrap().expect("cached");
        assert_eq!(hit, fresh);
        assert_eq!(cache.lookup(&key.grid_fingerprint), vec![key.file_name()]);
        let again = permutation_null(&problem, 1000, 5, NullRoute::LabelPermutation, Some(dir.path())).unwrap();
        assert_eq!(again, fresh);
        let mut other = key.clone();
        other.seed = 6;
        assert!(cache.load(&other).unwrap().is_none());
    }

    #[test]
    fn small_tables_are_not_cached() {
        let dir = tempfile::tempdir().unwrap();
        let input = gaussian_input(10, 12, 2, 3, 0.0);
        let problem = NullProblem::two_sample(&input, input.build_grid().unwrap()).unwrap();
        permutation_null(&problem, 200, 5, NullRoute::LabelPermutation, Some(dir.path())).unwrap();
        assert!(fs::read_dir(dir.path()).unwrap().next().is_none());
    }

    #[test]
    fn shared_table_matches_permutation_mode() {
        let input = gaussian_input(20, 25, 2, 8, 0.4);
        let perm = run_two_sample(TestKind::RankHotelling, &input, &TestOptions::permutation(0.05, 300, 4)).unwrap();
        let problem = NullProblem::two_sample_shape(input.grid, input.score, 20, 25, 2).unwrap();
        let table = simulate_null(&problem, 300, 4, NullRoute::LabelPermutation).unwrap();
        let opts = TestOptions {
            alpha: 0.05,
            mode: CalibrationMode::Table(Arc::new(table)),
        };
        let shared = run_two_sample(TestKind::RankHotelling, &input, &opts).unwrap();
        assert_eq!(shared.p_value, perm.p_value);
        assert_eq!(shared.cutoff, perm.cutoff);

        let other = gaussian_input(21, 24, 2, 8, 0.4);
        assert!(run_two_sample(TestKind::RankHotelling, &other, &opts).is_err());
        assert!(run_two_sample(TestKind::Hotelling, &input, &opts).is_err());
    }

    #[test]
    fn zero_statistic_has_unit_p_value() {
        let r = asymptotic_report(TestKind::RankHotelling, 0.0, Some(2), 0.05).unwrap();
        assert_eq!(r.p_value, 1.0);
        assert!(!r.decision);
    }

    #[test]
    fn large_shift_rejects() {
        let input = gaussian_input(100, 100, 2, 5, 2.0);
        let r = run_two_sample(TestKind::RankHotelling, &input, &TestOptions::asymptotic(0.05)).unwrap();
        assert!(r.decision && r.p_value < 1e-3);
        let p = run_two_sample(TestKind::RankHotelling, &input, &TestOptions::permutation(0.05, 500, 1)).unwrap();
        assert!(p.decision);
        assert_eq!(p.p_value, 1.0 / 501.0);
        let h = run_two_sample(TestKind::Hotelling, &input, &TestOptions::permutation(0.05, 200, 1)).unwrap();
        assert!(h.decision);
    }

    #[test]
    fn independence_reports() {
        let x = normals(60, 2, 7, 0.0);
        let y = normals(60, 2, 8, 0.0);
        let input = IndependenceInput::symmetric(x, y, GridSpec::new(NuTag::Gaussian), ScoreKind::Identity).unwrap();
        let s = run_independence(TestKind::RankSpearman, &input, &TestOptions::asymptotic(0.05)).unwrap();
        assert_eq!(s.df, Some(4));
        assert!(run_independence(TestKind::RankDcov, &input, &TestOptions::asymptotic(0.05)).is_err());
        let d = run_independence(TestKind::RankDcov, &input, &TestOptions::permutation(0.05, 200, 2)).unwrap();
        assert!((0.0..=1.0).contains(&d.p_value));
        let w = run_independence(TestKind::Wilks, &input, &TestOptions::permutation(0.05, 200, 2)).unwrap();
        assert_eq!(w.decision, w.statistic >= w.cutoff);
        assert!(run_independence(TestKind::RankHotelling, &input, &TestOptions::asymptotic(0.05)).is_err());
    }

    #[test]
    fn report_serializes() {
        let input = gaussian_input(10, 10, 2, 9, 0.0);
        let r = run_two_sample(TestKind::RankHotelling, &input, &TestOptions::asymptotic(0.1)).unwrap();
        let json = serde_json::to_string(&r).unwrap();
        let back: TestReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
    }
}
