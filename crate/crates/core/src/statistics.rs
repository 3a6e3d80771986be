//! Rank-based and classical test statistics.
//!
//! Two-sample statistics compare `x` (`m × d`) and `y` (`n × d`):
//! [`rank_hotelling`] and the Gaussian-theory [`hotelling_t2`].
//! Independence statistics compare the paired blocks `x` (`n × d₁`) and
//! `y` (`n × d₂`): [`rank_spearman`], [`wilks`] and [`rdcov`].
//!
//! The rank statistics are split into a ranking step (`*_scores`) and a
//! pure function of the scored ranks (`*_from_scores`), which lets null
//! calibration reuse the second half without solving assignments.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lap::{empirical_rank_map_with, TiePolicy};
use crate::linalg::{quadratic_form, spd_inverse, sym_inv_sqrt};
use crate::reference::{erd_covariance, ErdSpec, GridSpec, ReferenceGrid, ScoreFunction, ScoreKind};
use crate::sample::SampleMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    RankHotelling,
    Hotelling,
    RankSpearman,
    Wilks,
    RankDcov,
}

impl TestKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TestKind::RankHotelling => "rank_hotelling",
            TestKind::Hotelling => "hotelling",
            TestKind::RankSpearman => "rank_spearman",
            TestKind::Wilks => "wilks",
            TestKind::RankDcov => "rdcov",
        }
    }

    pub fn is_two_sample(self) -> bool {
        matches!(self, TestKind::RankHotelling | TestKind::Hotelling)
    }

    pub fn is_rank_based(self) -> bool {
        matches!(
            self,
            TestKind::RankHotelling | TestKind::RankSpearman | TestKind::RankDcov
        )
    }

    /// Degrees of freedom of the limiting χ² law, if there is one.
    pub fn chi2_df(self, d1: usize, d2: usize) -> Option<usize> {
        match self {
            TestKind::RankHotelling | TestKind::Hotelling => Some(d1),
            TestKind::RankSpearman | TestKind::Wilks => Some(d1 * d2),
            TestKind::RankDcov => None,
        }
    }
}

impl fmt::Display for TestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TestKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rank_hotelling" | "rank-hotelling" => Ok(TestKind::RankHotelling),
            "hotelling" => Ok(TestKind::Hotelling),
            "rank_spearman" | "rank-spearman" | "spearman" => Ok(TestKind::RankSpearman),
            "wilks" => Ok(TestKind::Wilks),
            "rdcov" => Ok(TestKind::RankDcov),
            other => Err(Error::invalid(format!("unknown test '{other}'"))),
        }
    }
}

/// Two samples to compare, with the reference grid recipe and score.
#[derive(Debug, Clone)]
pub struct TwoSampleInput {
    pub x: SampleMatrix,
    pub y: SampleMatrix,
    pub grid: GridSpec,
    pub score: ScoreKind,
    pub erd: ErdSpec,
    pub ties: TiePolicy,
}

impl TwoSampleInput {
    /// Uses the closed-form ERD covariance of `(grid.nu, score)`.
    pub fn new(x: SampleMatrix, y: SampleMatrix, grid: GridSpec, score: ScoreKind) -> Result<Self> {
        let erd = erd_covariance(grid.nu, ScoreFunction::new(score, x.dim()))?;
        Self::with_erd(x, y, grid, score, erd)
    }

    pub fn with_erd(
        x: SampleMatrix,
        y: SampleMatrix,
        grid: GridSpec,
        score: ScoreKind,
        erd: ErdSpec,
    ) -> Result<Self> {
        if x.dim() != y.dim() {
            return Err(Error::DimensionMismatch {
                expected: x.dim(),
                found: y.dim(),
            });
        }
        if x.nrows() < 2 || y.nrows() < 2 {
            return Err(Error::invalid("each sample needs at least two observations"));
        }
        if erd.dim() != x.dim() {
            return Err(Error::DimensionMismatch {
                expected: x.dim(),
                found: erd.dim(),
            });
        }
        erd.validate()?;
        Ok(Self {
            x,
            y,
            grid,
            score,
            erd,
            ties: TiePolicy::Reject,
        })
    }

    pub fn with_ties(mut self, ties: TiePolicy) -> Self {
        self.ties = ties;
        self
    }

    pub fn m(&self) -> usize {
        self.x.nrows()
    }

    pub fn n(&self) -> usize {
        self.y.nrows()
    }

    pub fn dim(&self) -> usize {
        self.x.dim()
    }

    pub fn build_grid(&self) -> Result<ReferenceGrid> {
        self.grid.build(self.m() + self.n(), self.dim())
    }

    pub fn score_fn(&self) -> ScoreFunction {
        ScoreFunction::new(self.score, self.dim())
    }
}

/// Paired blocks to test for independence.
#[derive(Debug, Clone)]
pub struct IndependenceInput {
    pub x: SampleMatrix,
    pub y: SampleMatrix,
    pub grid_x: GridSpec,
    pub grid_y: GridSpec,
    pub score_x: ScoreKind,
    pub score_y: ScoreKind,
    pub erd_x: ErdSpec,
    pub erd_y: ErdSpec,
    pub ties: TiePolicy,
}

impl IndependenceInput {
    pub fn new(
        x: SampleMatrix,
        y: SampleMatrix,
        grid_x: GridSpec,
        grid_y: GridSpec,
        score_x: ScoreKind,
        score_y: ScoreKind,
    ) -> Result<Self> {
        let erd_x = erd_covariance(grid_x.nu, ScoreFunction::new(score_x, x.dim()))?;
        let erd_y = erd_covariance(grid_y.nu, ScoreFunction::new(score_y, y.dim()))?;
        Self::with_erds(x, y, grid_x, grid_y, score_x, score_y, erd_x, erd_y)
    }

    /// Same grid recipe and score for both blocks.
    pub fn symmetric(x: SampleMatrix, y: SampleMatrix, grid: GridSpec, score: ScoreKind) -> Result<Self> {
        Self::new(x, y, grid, grid, score, score)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn with_erds(
        x: SampleMatrix,
        y: SampleMatrix,
        grid_x: GridSpec,
        grid_y: GridSpec,
        score_x: ScoreKind,
        score_y: ScoreKind,
        erd_x: ErdSpec,
        erd_y: ErdSpec,
    ) -> Result<Self> {
        if x.nrows() != y.nrows() {
            return Err(Error::SizeMismatch {
                left: x.nrows(),
                right: y.nrows(),
            });
        }
        if x.nrows() < 3 {
            return Err(Error::invalid("independence tests need at least three pairs"));
        }
        if erd_x.dim() != x.dim() || erd_y.dim() != y.dim() {
            return Err(Error::invalid("ERD dimensions do not match the blocks"));
        }
        erd_x.validate()?;
        erd_y.validate()?;
        Ok(Self {
            x,
            y,
            grid_x,
            grid_y,
            score_x,
            score_y,
            erd_x,
            erd_y,
            ties: TiePolicy::Reject,
        })
    }

    pub fn with_ties(mut self, ties: TiePolicy) -> Self {
        self.ties = ties;
        self
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.x.dim(), self.y.dim())
    }

    pub fn build_grids(&self) -> Result<(ReferenceGrid, ReferenceGrid)> {
        Ok((
            self.grid_x.build(self.n(), self.x.dim())?,
            self.grid_y.build(self.n(), self.y.dim())?,
        ))
    }
}

/// Rank Hotelling statistic with the rank-mean difference it is built from.
#[derive(Debug, Clone, PartialEq)]
pub struct RankHotelling {
    pub statistic: f64,
    pub delta: Vec<f64>,
}

/// Scores `J(R̂(Z_i))` of the pooled sample, `x` rows first.
pub fn pooled_scores(input: &TwoSampleInput, grid: &ReferenceGrid) -> Result<SampleMatrix> {
    let pooled = input.x.vstack(&input.y)?;
    let ranked = empirical_rank_map_with(&pooled, grid, input.ties)?;
    input.score_fn().apply_all(&ranked.ranks)
}

/// `(mn/N) ΔᵀΣ⁻¹Δ` with `Δ` the difference of the mean scores of rows
/// `[0, m)` and `[m, N)`.
pub fn hotelling_from_scores(scores: &SampleMatrix, m: usize, sigma_inv: &DMatrix<f64>) -> RankHotelling {
    let n_total = scores.nrows();
    let n = n_total - m;
    let d = scores.dim();
    let mut sx = vec![0.0; d];
    let mut sy = vec![0.0; d];
    for (i, r) in scores.rows().enumerate() {
        let acc = if i < m { &mut sx } else { &mut sy };
        for (a, v) in acc.iter_mut().zip(r) {
            *a += v;
        }
    }
    let delta: Vec<f64> = sx
        .iter()
        .zip(&sy)
        .map(|(a, b)| a / m as f64 - b / n as f64)
        .collect();
    let scale = m as f64 * n as f64 / n_total as f64;
    RankHotelling {
        statistic: scale * quadratic_form(sigma_inv, &delta),
        delta,
    }
}

/// Same as [`hotelling_from_scores`] for the rows picked out by `is_x`.
pub fn hotelling_from_labels(scores: &SampleMatrix, is_x: &[bool], sigma_inv: &DMatrix<f64>) -> f64 {
    let d = scores.dim();
    let mut sx = vec![0.0; d];
    let mut sy = vec![0.0; d];
    let mut m = 0usize;
    for (r, &lab) in scores.rows().zip(is_x) {
        let acc = if lab {
            m += 1;
            &mut sx
        } else {
            &mut sy
        };
        for (a, v) in acc.iter_mut().zip(r) {
            *a += v;
        }
    }
    let n_total = scores.nrows();
    let n = n_total - m;
    let delta: Vec<f64> = sx
        .iter()
        .zip(&sy)
        .map(|(a, b)| a / m as f64 - b / n as f64)
        .collect();
    m as f64 * n as f64 / n_total as f64 * quadratic_form(sigma_inv, &delta)
}

pub fn rank_hotelling(input: &TwoSampleInput) -> Result<RankHotelling> {
    let grid = input.build_grid()?;
    rank_hotelling_on(input, &grid)
}

/// [`rank_hotelling`] on a grid that was built beforehand.
pub fn rank_hotelling_on(input: &TwoSampleInput, grid: &ReferenceGrid) -> Result<RankHotelling> {
    let scores = pooled_scores(input, grid)?;
    let inv = spd_inverse(&input.erd.sigma_erd)?;
    Ok(hotelling_from_scores(&scores, input.m(), &inv))
}

/// Hotelling's `T² = (mn/N)(x̄ − ȳ)ᵀ S⁻¹ (x̄ − ȳ)` with the pooled covariance
/// `S = ((m−1)S_x + (n−1)S_y)/(m+n−2)`.
pub fn hotelling_t2(x: &SampleMatrix, y: &SampleMatrix) -> Result<f64> {
    let d = x.dim();
    if y.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: y.dim(),
        });
    }
    let (m, n) = (x.nrows(), y.nrows());
    if m < 2 || n < 2 || m + n - 2 < d {
        return Err(Error::invalid(format!(
            "need m + n − 2 ≥ d (m = {m}, n = {n}, d = {d})"
        )));
    }
    x.require_finite("x")?;
    y.require_finite("y")?;
    let (cx, cy) = (x.covariance(), y.covariance());
    let w = 1.0 / (m + n - 2) as f64;
    let pooled: Vec<f64> = cx
        .iter()
        .zip(&cy)
        .map(|(a, b)| w * ((m - 1) as f64 * a + (n - 1) as f64 * b))
        .collect();
    let s = DMatrix::from_row_slice(d, d, &pooled);
    let inv = spd_inverse(&s).map_err(|e| Error::Singular(format!("pooled covariance: {e}")))?;
    let (mx, my) = (x.column_means(), y.column_means());
    let delta: Vec<f64> = mx.iter().zip(&my).map(|(a, b)| a - b).collect();
    Ok(m as f64 * n as f64 / (m + n) as f64 * quadratic_form(&inv, &delta))
}

/// Scored ranks of each block on its own grid.
pub fn block_scores(
    input: &IndependenceInput,
    grids: &(ReferenceGrid, ReferenceGrid),
) -> Result<(SampleMatrix, SampleMatrix)> {
    let rx = empirical_rank_map_with(&input.x, &grids.0, input.ties)?;
    let ry = empirical_rank_map_with(&input.y, &grids.1, input.ties)?;
    let jx = ScoreFunction::new(input.score_x, input.x.dim()).apply_all(&rx.ranks)?;
    let jy = ScoreFunction::new(input.score_y, input.y.dim()).apply_all(&ry.ranks)?;
    Ok((jx, jy))
}

/// `‖Σ₁^{-1/2} C Σ₂^{-1/2}‖_F²` where `C = n^{-1/2} Σ_i (J₁ᵢ − J̄₁)(J₂ᵢ − J̄₂)ᵀ`.
///
/// This equals the squared norm of `(Σ₁ ⊗ Σ₂)^{-1/2} vec(C)` for the
/// row-wise vectorization of `C`. `w1` and `w2` are the inverse square
/// roots of the two ERD covariances.
pub fn spearman_from_scores(
    j1: &SampleMatrix,
    j2: &SampleMatrix,
    w1: &DMatrix<f64>,
    w2: &DMatrix<f64>,
) -> f64 {
    spearman_from_pairing(j1, j2, None, w1, w2)
}

/// As [`spearman_from_scores`] with row `i` of `j1` paired to row `pair[i]` of `j2`.
pub fn spearman_from_pairing(
    j1: &SampleMatrix,
    j2: &SampleMatrix,
    pair: Option<&[usize]>,
    w1: &DMatrix<f64>,
    w2: &DMatrix<f64>,
) -> f64 {
    let c = cross_moment(j1, j2, pair);
    let white = w1 * c * w2;
    white.iter().map(|v| v * v).sum()
}

fn cross_moment(j1: &SampleMatrix, j2: &SampleMatrix, pair: Option<&[usize]>) -> DMatrix<f64> {
    let n = j1.nrows();
    let (d1, d2) = (j1.dim(), j2.dim());
    let (m1, m2) = (j1.column_means(), j2.column_means());
    let mut c = DMatrix::zeros(d1, d2);
    for i in 0..n {
        let a = j1.row(i);
        let b = j2.row(pair.map_or(i, |p| p[i]));
        for p in 0..d1 {
            let ap = a[p] - m1[p];
            for q in 0..d2 {
                c[(p, q)] += ap * (b[q] - m2[q]);
            }
        }
    }
    c / (n as f64).sqrt()
}

pub fn rank_spearman(input: &IndependenceInput) -> Result<f64> {
    let grids = input.build_grids()?;
    rank_spearman_on(input, &grids)
}

pub fn rank_spearman_on(input: &IndependenceInput, grids: &(ReferenceGrid, ReferenceGrid)) -> Result<f64> {
    let (jx, jy) = block_scores(input, grids)?;
    let w1 = sym_inv_sqrt(&input.erd_x.sigma_erd)?;
    let w2 = sym_inv_sqrt(&input.erd_y.sigma_erd)?;
    Ok(spearman_from_scores(&jx, &jy, &w1, &w2))
}

fn ln_det_spd(m: &DMatrix<f64>, what: &str) -> Result<f64> {
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Singular(format!("{what} is not positive definite")))?;
    Ok(2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>())
}

/// Wilks' likelihood-ratio statistic `n log(det Q₁₁ det Q₂₂ / det Q)`
/// with `Q` the centered joint second-moment matrix divided by `n`.
pub fn wilks(x: &SampleMatrix, y: &SampleMatrix) -> Result<f64> {
    if x.nrows() != y.nrows() {
        return Err(Error::SizeMismatch {
            left: x.nrows(),
            right: y.nrows(),
        });
    }
    let n = x.nrows();
    let (d1, d2) = (x.dim(), y.dim());
    if n < d1 + d2 + 1 {
        return Err(Error::invalid(format!(
            "need n > d₁ + d₂ (n = {n}, d₁ = {d1}, d₂ = {d2})"
        )));
    }
    x.require_finite("x")?;
    y.require_finite("y")?;
    let d = d1 + d2;
    let (mx, my) = (x.column_means(), y.column_means());
    let mut q = DMatrix::<f64>::zeros(d, d);
    let mut z = vec![0.0; d];
    for i in 0..n {
        for (k, v) in x.row(i).iter().enumerate() {
            z[k] = v - mx[k];
        }
        for (k, v) in y.row(i).iter().enumerate() {
            z[d1 + k] = v - my[k];
        }
        for a in 0..d {
            for b in 0..d {
                q[(a, b)] += z[a] * z[b];
            }
        }
    }
    q /= n as f64;
    let q11 = q.view((0, 0), (d1, d1)).into_owned();
    let q22 = q.view((d1, d1), (d2, d2)).into_owned();
    let stat = n as f64
        * (ln_det_spd(&q11, "Q₁₁")? + ln_det_spd(&q22, "Q₂₂")? - ln_det_spd(&q, "Q")?);
    Ok(stat.max(0.0))
}

fn distance_matrix(j: &SampleMatrix) -> Vec<f64> {
    let n = j.nrows();
    let mut out = vec![0.0; n * n];
    for a in 0..n {
        for b in a + 1..n {
            let dist = j
                .row(a)
                .iter()
                .zip(j.row(b))
                .map(|(u, v)| (u - v) * (u - v))
                .sum::<f64>()
                .sqrt();
            out[a * n + b] = dist;
            out[b * n + a] = dist;
        }
    }
    out
}

/// Distance-covariance V-statistic of the scored ranks.
///
/// `n⁻² Σ Δ¹ᵢⱼΔ²ᵢⱼ + n⁻⁴ (Σ Δ¹ᵢⱼ)(Σ Δ²ᵢⱼ) − 2n⁻³ Σᵢ (Σⱼ Δ¹ᵢⱼ)(Σₖ Δ²ᵢₖ)`.
pub fn rdcov_from_scores(j1: &SampleMatrix, j2: &SampleMatrix) -> f64 {
    let n = j1.nrows();
    let a = distance_matrix(j1);
    let b = distance_matrix(j2);
    let nf = n as f64;
    let mut cross = 0.0;
    let mut rows = 0.0;
    let (mut sa, mut sb) = (0.0, 0.0);
    for i in 0..n {
        let ra = &a[i * n..(i + 1) * n];
        let rb = &b[i * n..(i + 1) * n];
        let (mut row_a, mut row_b) = (0.0, 0.0);
        for k in 0..n {
            cross += ra[k] * rb[k];
            row_a += ra[k];
            row_b += rb[k];
        }
        rows += row_a * row_b;
        sa += row_a;
        sb += row_b;
    }
    cross / (nf * nf) + sa * sb / nf.powi(4) - 2.0 * rows / nf.powi(3)
}

pub fn rdcov(input: &IndependenceInput) -> Result<f64> {
    let grids = input.build_grids()?;
    let (jx, jy) = block_scores(input, &grids)?;
    Ok(rdcov_from_scores(&jx, &jy))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference::{regular_grid_1d, NuTag};
    use crate::rng::substream;
    use rand::seq::SliceRandom;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn normals(n: usize, d: usize, seed: u64) -> SampleMatrix {
        let mut rng = substream(seed, 0);
        let data: Vec<f64> = (0..n * d).map(|_| StandardNormal.sample(&mut rng)).collect();
        SampleMatrix::from_flat(data, d).unwrap()
    }

    fn classical_ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        for (k, &i) in idx.iter().enumerate() {
            r[i] = (k + 1) as f64;
        }
        r
    }

    fn pearson(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let sab: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let saa: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let sbb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        sab / (saa * sbb).sqrt()
    }

    fn cube() -> GridSpec {
        GridSpec::new(NuTag::UniformCube)
    }

    #[test]
    fn rank_hotelling_zero_for_balanced_split() {
        // x and y interleave the same order statistics, so both rank means agree
        let data: Vec<f64> = (0..8).map(|i| i as f64 * 0.37).collect();
        let x = SampleMatrix::from_column(&[data[0], data[3], data[4], data[7]]);
        let y = SampleMatrix::from_column(&[data[1], data[2], data[5], data[6]]);
        let input = TwoSampleInput::new(x, y, cube(), ScoreKind::Identity).unwrap();
        let r = rank_hotelling(&input).unwrap();
        assert!(r.statistic.abs() < 1e-12);
    }

    #[test]
    fn rank_hotelling_is_scaled_wilcoxon() {
        for t in 0..100u64 {
            let mut rng = substream(t, 1);
            let m = rng.random_range(3..15);
            let n = rng.random_range(3..15);
            let xs: Vec<f64> = (0..m).map(|_| rng.random::<f64>() + 0.2).collect();
            let ys: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let pooled: Vec<f64> = xs.iter().chain(&ys).copied().collect();
            let ranks = classical_ranks(&pooled);
            let w: f64 = ranks[..m].iter().sum();
            let nn = (m + n) as f64;
            let (mf, nf) = (m as f64, n as f64);
            let z2 = (w - mf * (nn + 1.0) / 2.0).powi(2) / (mf * nf * (nn + 1.0) / 12.0);
            let input = TwoSampleInput::new(
                SampleMatrix::from_column(&xs),
                SampleMatrix::from_column(&ys),
                cube(),
                ScoreKind::Identity,
            )
            .unwrap();
            let stat = rank_hotelling(&input).unwrap().statistic;
            let expect = z2 * (nn + 1.0) / nn;
            assert!((stat - expect).abs() < 1e-10 * expect.max(1.0), "{t}: {stat} vs {expect}");
        }
    }

    #[test]
    fn pooled_rank_sum_equals_grid_sum() {
        let input = TwoSampleInput::new(normals(30, 2, 1), normals(20, 2, 2), GridSpec::new(NuTag::Gaussian), ScoreKind::Identity).unwrap();
        let grid = input.build_grid().unwrap();
        let s = pooled_scores(&input, &grid).unwrap();
        let mut a: Vec<u64> = s.as_slice().iter().map(|v| v.to_bits()).collect();
        let mut b: Vec<u64> = grid.points().as_slice().iter().map(|v| v.to_bits()).collect();
        a.sort();
        b.sort();
        assert_eq!(a, b);
    }

    #[test]
    fn rank_hotelling_relabel_invariant() {
        let x = normals(15, 2, 3);
        let y = normals(12, 2, 4);
        let spec = GridSpec::new(NuTag::Gaussian);
        let a = rank_hotelling(&TwoSampleInput::new(x.clone(), y.clone(), spec, ScoreKind::Identity).unwrap()).unwrap();
        let mut idx: Vec<usize> = (0..15).collect();
        idx.reverse();
        let b = rank_hotelling(&TwoSampleInput::new(x.select_rows(&idx), y, spec, ScoreKind::Identity).unwrap()).unwrap();
        assert!((a.statistic - b.statistic).abs() < 1e-12);
    }

    #[test]
    fn hotelling_equal_means_is_zero() {
        let x = normals(20, 3, 5);
        let y = x.clone();
        assert!(hotelling_t2(&x, &y).unwrap().abs() < 1e-20);
    }

    #[test]
    fn hotelling_is_squared_t() {
        for t in 0..100u64 {
            let mut rng = substream(t, 2);
            let m = rng.random_range(2..20);
            let n = rng.random_range(2..20);
            let xs: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
            let ys: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0).collect();
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            let (mx, my) = (mean(&xs), mean(&ys));
            let ss: f64 = xs.iter().map(|v| (v - mx).powi(2)).sum::<f64>()
                + ys.iter().map(|v| (v - my).powi(2)).sum::<f64>();
            let sp2 = ss / (m + n - 2) as f64;
            let tt = (mx - my) / (sp2 * (1.0 / m as f64 + 1.0 / n as f64)).sqrt();
            let h = hotelling_t2(&SampleMatrix::from_column(&xs), &SampleMatrix::from_column(&ys)).unwrap();
            assert!((h - tt * tt).abs() < 1e-10 * (tt * tt).max(1.0));
        }
    }

    #[test]
    fn hotelling_affine_invariant() {
        let x = normals(25, 3, 6);
        let y = normals(30, 3, 7);
        let mut rng = substream(8, 0);
        let a: Vec<f64> = (0..9).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let b = [3.0, -1.0, 0.5];
        let f = |r: &[f64]| -> Result<Vec<f64>> {
            Ok((0..3).map(|i| (0..3).map(|j| a[i * 3 + j] * r[j]).sum::<f64>() + b[i]).collect())
        };
        let h0 = hotelling_t2(&x, &y).unwrap();
        let h1 = hotelling_t2(&x.map_rows(3, f).unwrap(), &y.map_rows(3, f).unwrap()).unwrap();
        assert!((h0 - h1).abs() < 1e-8 * h0.max(1.0));
    }

    #[test]
    fn hotelling_singular() {
        let x = SampleMatrix::from_rows(&[[0.0, 0.0], [1.0, 1.0]]).unwrap();
        let y = SampleMatrix::from_rows(&[[2.0, 2.0], [3.0, 3.0]]).unwrap();
        assert!(hotelling_t2(&x, &y).is_err());
    }

    #[test]
    fn spearman_one_dimensional_scale() {
        for t in 0..50u64 {
            let mut rng = substream(t, 3);
            let n = rng.random_range(5..40);
            let xs: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let ys: Vec<f64> = xs.iter().map(|v| v + rng.random::<f64>()).collect();
            let rho = pearson(&classical_ranks(&xs), &classical_ranks(&ys));
            let input = IndependenceInput::symmetric(SampleMatrix::from_column(&xs), SampleMatrix::from_column(&ys), cube(), ScoreKind::Identity).unwrap();
            let stat = rank_spearman(&input).unwrap();
            let nf = n as f64;
            let expect = rho * rho * (nf * nf - 1.0).powi(2) / nf.powi(3);
            assert!((stat - expect).abs() < 1e-10 * expect.max(1.0), "{stat} vs {expect}");
        }
    }

    #[test]
    fn spearman_perfect_dependence() {
        let x = normals(100, 1, 9);
        let input = IndependenceInput::symmetric(x.clone(), x, cube(), ScoreKind::Identity).unwrap();
        let stat = rank_spearman(&input).unwrap();
        assert!(stat > 90.0, "{stat}");
    }

    #[test]
    fn spearman_kronecker_form() {
        // direct (Σ₁ ⊗ Σ₂)^{-1/2} vec_r(C) route
        let j1 = normals(30, 2, 10);
        let j2 = normals(30, 3, 11);
        let s1 = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 2.0]);
        let s2 = DMatrix::from_row_slice(3, 3, &[1.0, 0.1, 0.0, 0.1, 0.5, 0.2, 0.0, 0.2, 1.5]);
        let w1 = sym_inv_sqrt(&s1).unwrap();
        let w2 = sym_inv_sqrt(&s2).unwrap();
        let stat = spearman_from_scores(&j1, &j2, &w1, &w2);
        let c = cross_moment(&j1, &j2, None);
        let vec_r: Vec<f64> = (0..2).flat_map(|p| (0..3).map(move |q| (p, q))).map(|(p, q)| c[(p, q)]).collect();
        let w = sym_inv_sqrt(&crate::linalg::kronecker(&s1, &s2)).unwrap();
        let v = crate::linalg::mat_vec(&w, &vec_r);
        let direct: f64 = v.iter().map(|a| a * a).sum();
        assert!((stat - direct).abs() < 1e-10 * direct);
    }

    #[test]
    fn wilks_pearson_identity() {
        for t in 0..100u64 {
            let mut rng = substream(t, 4);
            let n = rng.random_range(5..50);
            let xs: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            let ys: Vec<f64> = xs
                .iter()
                .map(|v| {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    0.5 * v + e
                })
                .collect();
            let r = pearson(&xs, &ys);
            let w = wilks(&SampleMatrix::from_column(&xs), &SampleMatrix::from_column(&ys)).unwrap();
            let expect = -(n as f64) * (1.0 - r * r).ln();
            assert!((w - expect).abs() < 1e-9 * expect.max(1.0), "{w} vs {expect}");
        }
    }

    #[test]
    fn wilks_uncorrelated_blocks() {
        // columns of a centered orthogonal design
        let x = SampleMatrix::from_column(&[1.0, -1.0, 1.0, -1.0]);
        let y = SampleMatrix::from_column(&[1.0, 1.0, -1.0, -1.0]);
        assert!(wilks(&x, &y).unwrap().abs() < 1e-12);
        let z = SampleMatrix::from_column(&[1.0, 2.0, 3.0, 4.0]);
        assert!(wilks(&z, &z).is_err());
    }

    #[test]
    fn rdcov_matches_triple_loop() {
        let j1 = SampleMatrix::from_rows(&[[0.1, 0.3], [0.9, 0.2], [0.4, 0.8]]).unwrap();
        let j2 = SampleMatrix::from_column(&[0.5, -1.0, 2.0]);
        let n = 3;
        let d = |m: &SampleMatrix, i: usize, j: usize| {
            m.row(i).iter().zip(m.row(j)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
        };
        let (mut t1, mut s1, mut s2, mut t3) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                t1 += d(&j1, i, j) * d(&j2, i, j);
                s1 += d(&j1, i, j);
                s2 += d(&j2, i, j);
                for k in 0..n {
                    t3 += d(&j1, i, j) * d(&j2, i, k);
                }
            }
        }
        let nf = n as f64;
        let direct = t1 / (nf * nf) + s1 * s2 / nf.powi(4) - 2.0 * t3 / nf.powi(3);
        let fast = rdcov_from_scores(&j1, &j2);
        assert!((direct - fast).abs() < 1e-14, "{direct} vs {fast}");
    }

    #[test]
    fn rdcov_detects_identity_coupling() {
        let x = normals(300, 1, 12);
        let input = IndependenceInput::symmetric(x.clone(), x, GridSpec::new(NuTag::Gaussian), ScoreKind::Identity).unwrap();
        assert!(rdcov(&input).unwrap() >= 0.1);
    }

    #[test]
    fn statistics_are_non_negative() {
        let grid = regular_grid_1d(40).unwrap();
        let inv = DMatrix::from_element(1, 1, 12.0);
        let w = DMatrix::from_element(1, 1, 12f64.sqrt());
        let mut rng = substream(13, 0);
        for _ in 0..200 {
            let mut perm: Vec<usize> = (0..40).collect();
            perm.shuffle(&mut rng);
            let s = grid.points().select_rows(&perm);
            assert!(hotelling_from_scores(&s, 17, &inv).statistic >= -1e-10);
            assert!(spearman_from_scores(&s, grid.points(), &w, &w) >= -1e-10);
            assert!(rdcov_from_scores(&s, grid.points()) >= -1e-10);
        }
    }

    #[test]
    fn labels_and_blocks_agree() {
        let s = normals(20, 2, 14);
        let inv = DMatrix::identity(2, 2);
        let labels: Vec<bool> = (0..20).map(|i| i < 8).collect();
        let a = hotelling_from_scores(&s, 8, &inv).statistic;
        let b = hotelling_from_labels(&s, &labels, &inv);
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn input_validation() {
        let x = normals(5, 2, 1);
        assert!(TwoSampleInput::new(x.clone(), normals(5, 3, 2), cube(), ScoreKind::Identity).is_err());
        assert!(TwoSampleInput::new(x.clone(), normals(1, 2, 2), cube(), ScoreKind::Identity).is_err());
        assert!(TwoSampleInput::new(x.clone(), normals(5, 2, 2), cube(), ScoreKind::CoordGaussianCdf).is_err());
        assert!(IndependenceInput::symmetric(x.clone(), normals(4, 2, 2), cube(), ScoreKind::Identity).is_err());
        assert!(IndependenceInput::symmetric(x.head(2), normals(2, 2, 2), cube(), ScoreKind::Identity).is_err());
        assert_eq!("rank-hotelling".parse::<TestKind>().unwrap(), TestKind::RankHotelling);
        assert_eq!(TestKind::RankSpearman.chi2_df(2, 3), Some(6));
    }

    #[test]
    fn ties_are_reported() {
        let x = SampleMatrix::from_column(&[0.1, 0.2, 0.3]);
        let y = SampleMatrix::from_column(&[0.2, 0.5]);
        let input = TwoSampleInput::new(x, y, cube(), ScoreKind::Identity).unwrap();
        assert!(matches!(rank_hotelling(&input), Err(Error::TiedObservations { .. })));
        let jittered = input.with_ties(TiePolicy::Jitter { seed: 3 });
        assert!(rank_hotelling(&jittered).is_ok());
    }
}
