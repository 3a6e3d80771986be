//! Exact linear assignment and the empirical rank map.
//!
//! Observations are matched one-to-one to the points of a [`ReferenceGrid`]
//! so that the summed squared distance is minimal. The grid point matched to
//! an observation is its rank.
//!
//! The solver follows Jonker and Volgenant: column reduction, reduction
//! transfer, two rounds of augmenting row reduction, then shortest
//! augmenting paths for the rows that are still free.

use crate::error::{Error, Result};
use crate::reference::ReferenceGrid;
use crate::sample::SampleMatrix;

/// Reduced costs above this (relative to the largest cost) are accepted
/// as floating-point noise when optimality is checked.
pub const SLACKNESS_TOL: f64 = 1e-6;
/// Reduced costs are clamped at this value before sign checks.
pub const REDUCED_COST_CLAMP: f64 = -1e-9;
/// Reductions per free row allowed in one augmenting row reduction pass.
/// Geometric costs otherwise make this phase cubic; rows left over are
/// handled by the shortest-path phase.
const ARR_BUDGET: usize = 4;
pub const BRUTE_FORCE_MAX: usize = 10;

/// Square matrix of non-negative assignment costs, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    n: usize,
    costs: Vec<f64>,
}

impl CostMatrix {
    pub fn new(n: usize, costs: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("cost matrix must be non-empty"));
        }
        if costs.len() != n * n {
            return Err(Error::SizeMismatch {
                left: n * n,
                right: costs.len(),
            });
        }
        if costs.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("cost matrix"));
        }
        if costs.iter().any(|&c| c < 0.0) {
            return Err(Error::invalid("costs must be non-negative"));
        }
        Ok(Self { n, costs })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        let mut costs = Vec::with_capacity(n * n);
        for r in rows {
            let r = r.as_ref();
            if r.len() != n {
                return Err(Error::invalid("cost matrix must be square"));
            }
            costs.extend_from_slice(r);
        }
        Self::new(n, costs)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.costs[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.costs[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.costs
    }

    /// `Σ_i c[i][sigma[i]]`, summed in row order.
    pub fn assignment_cost(&self, sigma: &[usize]) -> f64 {
        sigma
            .iter()
            .enumerate()
            .map(|(i, &j)| self.get(i, j))
            .sum()
    }
}

/// Matrix of exact squared Euclidean distances `‖Z_i − h_j‖²`.
pub fn build_squared_cost(sample: &SampleMatrix, grid: &ReferenceGrid) -> Result<CostMatrix> {
    let pts = grid.points();
    if sample.dim() != pts.dim() {
        return Err(Error::DimensionMismatch {
            expected: pts.dim(),
            found: sample.dim(),
        });
    }
    if sample.nrows() != pts.nrows() {
        return Err(Error::SizeMismatch {
            left: sample.nrows(),
            right: pts.nrows(),
        });
    }
    sample.require_finite("sample")?;
    let n = sample.nrows();
    let mut costs = Vec::with_capacity(n * n);
    for z in sample.rows() {
        for h in pts.rows() {
            costs.push(z.iter().zip(h).map(|(a, b)| (a - b) * (a - b)).sum());
        }
    }
    CostMatrix::new(n, costs)
}

/// Optimal matching: `sigma[i]` is the grid index of observation `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct RankAssignment {
    pub sigma: Vec<usize>,
    pub total_cost: f64,
}

impl RankAssignment {
    pub fn is_permutation(&self) -> bool {
        let mut seen = vec![false; self.sigma.len()];
        self.sigma.iter().all(|&j| {
            j < seen.len() && !std::mem::replace(&mut seen[j], true)
        })
    }

    /// `inverse()[j]` is the observation assigned to grid point `j`.
    pub fn inverse(&self) -> Vec<usize> {
        let mut inv = vec![0; self.sigma.len()];
        for (i, &j) in self.sigma.iter().enumerate() {
            inv[j] = i;
        }
        inv
    }
}

const NONE: usize = usize::MAX;

struct Jv<'a> {
    c: &'a CostMatrix,
    n: usize,
    x: Vec<usize>,
    y: Vec<usize>,
    v: Vec<f64>,
}

impl<'a> Jv<'a> {
    fn new(c: &'a CostMatrix) -> Self {
        let n = c.n();
        Self {
            c,
            n,
            x: vec![NONE; n],
            y: vec![NONE; n],
            v: vec![0.0; n],
        }
    }

    /// Column reduction and reduction transfer. Returns the free rows.
    fn column_reduction(&mut self) -> Vec<usize> {
        let n = self.n;
        let mut col_min_row = vec![0; n];
        for j in (0..n).rev() {
            let mut best = 0;
            let mut min = self.c.get(0, j);
            for i in 1..n {
                let c = self.c.get(i, j);
                if c < min {
                    min = c;
                    best = i;
                }
            }
            self.v[j] = min;
            col_min_row[j] = best;
        }
        let mut matches = vec![0usize; n];
        for j in (0..n).rev() {
            let i = col_min_row[j];
            matches[i] += 1;
            if matches[i] == 1 {
                self.x[i] = j;
                self.y[j] = i;
            }
        }
        let mut free = Vec::new();
        for i in 0..n {
            if self.x[i] == NONE {
                free.push(i);
            } else if matches[i] == 1 {
                let j1 = self.x[i];
                let mut min = f64::INFINITY;
                for j in 0..n {
                    if j != j1 {
                        min = min.min(self.c.get(i, j) - self.v[j]);
                    }
                }
                if min.is_finite() {
                    self.v[j1] -= min;
                }
            }
        }
        free
    }

    fn augmenting_row_reduction(&mut self, mut free: Vec<usize>) -> Vec<usize> {
        let n = self.n;
        let count = free.len();
        let mut next_free = Vec::new();
        let mut current = 0;
        let mut rr_cnt = 0usize;
        while current < count {
            rr_cnt += 1;
            let i = free[current];
            current += 1;
            let (mut u1, mut u2) = (self.c.get(i, 0) - self.v[0], f64::INFINITY);
            let (mut j1, mut j2) = (0usize, NONE);
            for j in 1..n {
                let h = self.c.get(i, j) - self.v[j];
                if h < u2 {
                    if h >= u1 {
                        u2 = h;
                        j2 = j;
                    } else {
                        u2 = u1;
                        u1 = h;
                        j2 = j1;
                        j1 = j;
                    }
                }
            }
            let mut i0 = self.y[j1];
            let v1_new = self.v[j1] - (u2 - u1);
            let lowers = v1_new < self.v[j1];
            if rr_cnt < current * n && rr_cnt < ARR_BUDGET * count {
                if lowers {
                    self.v[j1] = v1_new;
                } else if i0 != NONE && j2 != NONE {
                    j1 = j2;
                    i0 = self.y[j2];
                }
                if i0 != NONE {
                    if lowers {
                        current -= 1;
                        free[current] = i0;
                    } else {
                        next_free.push(i0);
                    }
                }
            } else if i0 != NONE {
                next_free.push(i0);
            }
            if i0 != NONE {
                self.x[i0] = NONE;
            }
            self.x[i] = j1;
            self.y[j1] = i;
        }
        next_free
    }

    /// Dijkstra over reduced costs from free row `start`; returns the free
    /// column reached and fills `pred`.
    fn shortest_path(&mut self, start: usize, pred: &mut [usize]) -> usize {
        let n = self.n;
        let mut d: Vec<f64> = (0..n).map(|j| self.c.get(start, j) - self.v[j]).collect();
        pred.fill(start);
        let mut cols: Vec<usize> = (0..n).collect();
        // cols[..ready] are settled, cols[lo..hi] sit at the current minimum distance
        let (mut lo, mut hi, mut ready) = (0usize, 0usize, 0usize);
        let end = 'search: loop {
            if lo == hi {
                ready = lo;
                hi = lo + 1;
                let mut min = d[cols[lo]];
                for k in lo + 1..n {
                    let j = cols[k];
                    if d[j] <= min {
                        if d[j] < min {
                            hi = lo;
                            min = d[j];
                        }
                        cols.swap(k, hi);
                        hi += 1;
                    }
                }
                if let Some(&j) = cols[lo..hi].iter().find(|&&j| self.y[j] == NONE) {
                    break j;
                }
            }
            let (mut scan, mut top) = (lo, hi);
            while scan != top {
                let j1 = cols[scan];
                scan += 1;
                let i = self.y[j1];
                let min = d[j1];
                let row = self.c.row(i);
                let v = &self.v[..n];
                let h = row[j1] - v[j1] - min;
                for k in top..n {
                    let j = cols[k];
                    let red = row[j] - v[j] - h;
                    if red < d[j] {
                        d[j] = red;
                        pred[j] = i;
                        if red == min {
                            if self.y[j] == NONE {
                                break 'search j;
                            }
                            cols.swap(k, top);
                            top += 1;
                        }
                    }
                }
            }
            lo = scan;
            hi = top;
        };
        let min = d[cols[lo]];
        for &j in &cols[..ready] {
            self.v[j] += d[j] - min;
        }
        end
    }

    fn augment(&mut self, free: &[usize]) {
        let mut pred = vec![0; self.n];
        for &f in free {
            let mut j = self.shortest_path(f, &mut pred);
            loop {
                let i = pred[j];
                self.y[j] = i;
                let prev = std::mem::replace(&mut self.x[i], j);
                if i == f {
                    break;
                }
                j = prev;
            }
        }
    }

    fn check_slackness(&self) -> Result<()> {
        let n = self.n;
        let scale = self.c.as_slice().iter().fold(1.0_f64, |m, &c| m.max(c));
        let tol = SLACKNESS_TOL * scale;
        for i in 0..n {
            let u = self.c.get(i, self.x[i]) - self.v[self.x[i]];
            for j in 0..n {
                let red = (self.c.get(i, j) - u - self.v[j]).max(REDUCED_COST_CLAMP * scale);
                if red < -tol {
                    return Err(Error::Convergence(format!(
                        "assignment not optimal: reduced cost {red:e} at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Exact minimum-cost assignment.
pub fn solve(costs: &CostMatrix) -> Result<RankAssignment> {
    let n = costs.n();
    if n == 1 {
        return Ok(RankAssignment {
            sigma: vec![0],
            total_cost: costs.get(0, 0),
        });
    }
    let mut jv = Jv::new(costs);
    let mut free = jv.column_reduction();
    for _ in 0..2 {
        if free.is_empty() {
            break;
        }
        free = jv.augmenting_row_reduction(free);
    }
    jv.augment(&free);
    let out = RankAssignment {
        total_cost: costs.assignment_cost(&jv.x),
        sigma: jv.x.clone(),
    };
    if !out.is_permutation() {
        return Err(Error::Convergence("solver returned a non-bijective assignment".into()));
    }
    jv.check_slackness()?;
    Ok(out)
}

/// Exhaustive minimum over all `N!` permutations (`N ≤ 10`).
///
/// Among equal-cost optima the lexicographically smallest permutation wins.
pub fn brute_force_solve(costs: &CostMatrix) -> Result<RankAssignment> {
    let n = costs.n();
    if n > BRUTE_FORCE_MAX {
        return Err(Error::TooLarge {
            n,
            max: BRUTE_FORCE_MAX,
        });
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = perm.clone();
    let mut best_cost = costs.assignment_cost(&perm);
    // permutations in lexicographic order, so strict improvement keeps the first optimum
    while next_permutation(&mut perm) {
        let c = costs.assignment_cost(&perm);
        if c < best_cost {
            best_cost = c;
            best.copy_from_slice(&perm);
        }
    }
    Ok(RankAssignment {
        sigma: best,
        total_cost: best_cost,
    })
}

fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// What to do when two observations coincide.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TiePolicy {
    #[default]
    Reject,
    /// Add seeded noise of size `1e-10 × range` per coordinate.
    Jitter { seed: u64 },
}

/// Observations together with their empirical ranks.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedSample {
    /// Row `i` is the grid point matched to observation `i`.
    pub ranks: SampleMatrix,
    pub assignment: RankAssignment,
}

/// Matches `sample` to `grid` and returns `R̂(Z_i) = h_{σ̂(i)}`.
pub fn empirical_rank_map(sample: &SampleMatrix, grid: &ReferenceGrid) -> Result<RankedSample> {
    empirical_rank_map_with(sample, grid, TiePolicy::Reject)
}

pub fn empirical_rank_map_with(
    sample: &SampleMatrix,
    grid: &ReferenceGrid,
    ties: TiePolicy,
) -> Result<RankedSample> {
    sample.require_finite("sample")?;
    let jittered;
    let data = match (sample.find_duplicate_rows(), ties) {
        (None, _) => sample,
        (Some((first, second)), TiePolicy::Reject) => {
            return Err(Error::TiedObservations { first, second })
        }
        (Some(_), TiePolicy::Jitter { seed }) => {
            jittered = sample.jittered(seed);
            if let Some((first, second)) = jittered.find_duplicate_rows() {
                return Err(Error::TiedObservations { first, second });
            }
            &jittered
        }
    };
    let costs = build_squared_cost(&moved_onto(data, grid.points()), grid)?;
    let mut assignment = solve(&costs)?;
    let ranks = grid.points().select_rows(&assignment.sigma);
    assignment.total_cost = data
        .rows()
        .zip(ranks.rows())
        .map(|(x, h)| x.iter().zip(h).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        .sum();
    Ok(RankedSample { ranks, assignment })
}

/// `a(x − x̄) + h̄` with `a > 0` matching total variances. Row and column
/// constants absorb the change, so the optimal matching is the same, but
/// the solver converges much faster when the two clouds overlap.
fn moved_onto(data: &SampleMatrix, target: &SampleMatrix) -> SampleMatrix {
    let spread = |m: &SampleMatrix, mean: &[f64]| -> f64 {
        m.rows()
            .map(|r| r.iter().zip(mean).map(|(v, c)| (v - c) * (v - c)).sum::<f64>())
            .sum::<f64>()
    };
    let (xm, hm) = (data.column_means(), target.column_means());
    let (sx, sh) = (spread(data, &xm), spread(target, &hm));
    let a = (sh * data.nrows() as f64 / (sx * target.nrows() as f64)).sqrt();
    if !(a.is_finite() && a > 0.0) {
        return data.clone();
    }
    let mut out = data.clone();
    for i in 0..out.nrows() {
        for ((v, c), h) in out.row_mut(i).iter_mut().zip(&xm).zip(&hm) {
            *v = a * (*v - c) + h;
        }
    }
    out
}
