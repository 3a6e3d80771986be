//! Row-major observation matrices.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::substream;

/// An `n × d` block of observations; rows are observations, columns coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    data: Vec<f64>,
    rows: usize,
    dim: usize,
}

impl SampleMatrix {
    /// Parses comma-separated rows. A first row that is not entirely numeric
    /// is taken as a header and skipped; blank lines are ignored.
    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut data = Vec::new();
        let mut dim = None;
        let mut first = true;
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let parsed: Vec<Option<f64>> = fields.iter().map(|f| f.parse::<f64>().ok()).collect();
            if first {
                first = false;
                if parsed.iter().any(Option::is_none) {
                    dim = Some(fields.len());
                    continue;
                }
            }
            let want = *dim.get_or_insert(fields.len());
            if fields.len() != want {
                return Err(Error::Parse {
                    line: idx + 1,
                    msg: format!("expected {want} columns, found {}", fields.len()),
                });
            }
            for (f, v) in fields.iter().zip(parsed) {
                match v {
                    Some(v) if v.is_finite() => data.push(v),
                    _ => {
                        return Err(Error::Parse {
                            line: idx + 1,
                            msg: format!("not a finite number: '{f}'"),
                        })
                    }
                }
            }
        }
        match dim {
            Some(d) if !data.is_empty() => Self::from_flat(data, d),
            _ => Err(Error::Parse {
                line: text.lines().count().max(1),
                msg: "no data rows".into(),
            }),
        }
    }

    /// Rows with `{:?}` formatting, which round-trips through [`parse_csv`](Self::parse_csv).
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in self.rows() {
            let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    /// Wraps row-major data. `data.len()` must be a multiple of `dim`.
    pub fn from_flat(data: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        if data.len() % dim != 0 {
            return Err(Error::invalid(format!(
                "{} values cannot be split into rows of length {dim}",
                data.len()
            )));
        }
        let rows = data.len() / dim;
        Ok(Self { data, rows, dim })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows
            .first()
            .map(|r| r.as_ref().len())
            .ok_or_else(|| Error::invalid("no rows"))?;
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::from_flat(data, dim)
    }

    /// Univariate sample as an `n × 1` matrix.
    pub fn from_column(values: &[f64]) -> Self {
        Self {
            data: values.to_vec(),
            rows: values.len(),
            dim: 1,
        }
    }

    pub fn zeros(rows: usize, dim: usize) -> Self {
        Self {
            data: vec![0.0; rows * dim],
            rows,
            dim,
        }
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub(crate) fn require_finite(&self, what: &'static str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite(what))
        }
    }

    /// Stacks `self` on top of `other`.
    pub fn vstack(&self, other: &SampleMatrix) -> Result<SampleMatrix> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        let mut data = Vec::with_capacity(self.data.len() + other.data.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        Ok(SampleMatrix {
            data,
            rows: self.rows + other.rows,
            dim: self.dim,
        })
    }

    /// First `k` rows.
    pub fn head(&self, k: usize) -> SampleMatrix {
        let k = k.min(self.rows);
        SampleMatrix {
            data: self.data[..k * self.dim].to_vec(),
            rows: k,
            dim: self.dim,
        }
    }

    /// Rows `[start, end)`.
    pub fn slice_rows(&self, start: usize, end: usize) -> SampleMatrix {
        SampleMatrix {
            data: self.data[start * self.dim..end * self.dim].to_vec(),
            rows: end - start,
            dim: self.dim,
        }
    }

    pub fn select_rows(&self, idx: &[usize]) -> SampleMatrix {
        let mut data = Vec::with_capacity(idx.len() * self.dim);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        SampleMatrix {
            data,
            rows: idx.len(),
            dim: self.dim,
        }
    }

    /// Splits columns into `[0, left)` and `[left, d)`.
    pub fn split_columns(&self, left: usize) -> Result<(SampleMatrix, SampleMatrix)> {
        if left == 0 || left >= self.dim {
            return Err(Error::invalid(format!(
                "cannot split {} columns at {left}",
                self.dim
            )));
        }
        let right = self.dim - left;
        let mut a = Vec::with_capacity(self.rows * left);
        let mut b = Vec::with_capacity(self.rows * right);
        for r in self.rows() {
            a.extend_from_slice(&r[..left]);
            b.extend_from_slice(&r[left..]);
        }
        Ok((
            SampleMatrix::from_flat(a, left)?,
            SampleMatrix::from_flat(b, right)?,
        ))
    }

    /// Applies `f` to every row.
    pub fn map_rows<F>(&self, out_dim: usize, mut f: F) -> Result<SampleMatrix>
    where
        F: FnMut(&[f64]) -> Result<Vec<f64>>,
    {
        let mut data = Vec::with_capacity(self.rows * out_dim);
        for r in self.rows() {
            let v = f(r)?;
            if v.len() != out_dim {
                return Err(Error::DimensionMismatch {
                    expected: out_dim,
                    found: v.len(),
                });
            }
            data.extend_from_slice(&v);
        }
        SampleMatrix::from_flat(data, out_dim)
    }

    pub fn column_means(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for r in self.rows() {
            for (acc, v) in m.iter_mut().zip(r) {
                *acc += v;
            }
        }
        let n = self.rows as f64;
        m.iter_mut().for_each(|v| *v /= n);
        m
    }

    /// Sample covariance with divisor `n - 1`, row-major `d × d`.
    pub fn covariance(&self) -> Vec<f64> {
        let d = self.dim;
        let mean = self.column_means();
        let mut c = vec![0.0; d * d];
        for r in self.rows() {
            for a in 0..d {
                let da = r[a] - mean[a];
                for b in a..d {
                    c[a * d + b] += da * (r[b] - mean[b]);
                }
            }
        }
        let denom = (self.rows as f64 - 1.0).max(1.0);
        for a in 0..d {
            for b in a..d {
                c[a * d + b] /= denom;
                c[b * d + a] = c[a * d + b];
            }
        }
        c
    }

    /// Indices of the first pair of identical rows, if any.
    pub fn find_duplicate_rows(&self) -> Option<(usize, usize)> {
        let mut order: Vec<usize> = (0..self.rows).collect();
        order.sort_by(|&a, &b| {
            self.row(a)
                .iter()
                .zip(self.row(b))
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        order.windows(2).find_map(|w| {
            // total_cmp distinguishes -0.0 and 0.0; compare numerically here
            (self.row(w[0]) == self.row(w[1])).then(|| (w[0].min(w[1]), w[0].max(w[1])))
        })
    }

    /// Adds seeded Gaussian noise of size `1e-10 × (max − min)` per coordinate.
    ///
    /// Breaks exact ties in real data without moving points measurably.
    pub fn jittered(&self, seed: u64) -> SampleMatrix {
        let mut out = self.clone();
        let mut rng = substream(seed, u64::MAX);
        for j in 0..self.dim {
            let col = self.column(j);
            let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let range = if hi > lo { hi - lo } else { lo.abs().max(1.0) };
            let scale = 1e-10 * range;
            for i in 0..self.rows {
                let z: f64 = StandardNormal.sample(&mut rng);
                out.data[i * self.dim + j] += scale * z;
            }
        }
        out
    }

    /// Fills a new matrix row by row from a sampler.
    pub fn from_sampler<R: Rng, F>(rows: usize, dim: usize, rng: &mut R, mut f: F) -> SampleMatrix
    where
        F: FnMut(&mut R, &mut [f64]),
    {
        let mut out = SampleMatrix::zeros(rows, dim);
        for i in 0..rows {
            f(rng, out.row_mut(i));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construction_checks_shape() {
        assert!(SampleMatrix::from_flat(vec![1.0, 2.0, 3.0], 2).is_err());
        assert!(SampleMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0]]).is_err());
        let m = SampleMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        assert_eq!(m.row(1), &[3.0, 4.0]);
        assert_eq!(m.column(0), vec![1.0, 3.0]);
    }

    #[test]
    fn duplicates_found() {
        let m = SampleMatrix::from_rows(&[[1.0, 2.0], [0.0, 1.0], [1.0, 2.0]]).unwrap();
        assert_eq!(m.find_duplicate_rows(), Some((0, 2)));
        let j = m.jittered(3);
        assert_eq!(j.find_duplicate_rows(), None);
        assert!((j.get(0, 0) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn covariance_of_simple_data() {
        let m = SampleMatrix::from_rows(&[[0.0, 0.0], [2.0, 2.0]]).unwrap();
        assert_eq!(m.covariance(), vec![2.0, 2.0, 2.0, 2.0]);
    }

    #[test]
    fn split_and_stack() {
        let m = SampleMatrix::from_rows(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]).unwrap();
        let (a, b) = m.split_columns(1).unwrap();
        assert_eq!(a.as_slice(), &[1.0, 4.0]);
        assert_eq!(b.row(1), &[5.0, 6.0]);
        let s = a.vstack(&a).unwrap();
        assert_eq!(s.nrows(), 4);
        assert!(a.vstack(&b).is_err());
    }

    #[test]
    fn csv_parsing() {
        let m = SampleMatrix::parse_csv("x,y\n1,2\n\n3.5, -4e-1\n").unwrap();
        assert_eq!(m.as_slice(), &[1.0, 2.0, 3.5, -0.4]);
        let back = SampleMatrix::parse_csv(&m.to_csv()).unwrap();
        assert_eq!(back, m);
        match SampleMatrix::parse_csv("1,2\n3\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        match SampleMatrix::parse_csv("a,b\n1,2\n1,oops\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(SampleMatrix::parse_csv("a,b\n").is_err());
        assert!(SampleMatrix::parse_csv("1,NaN\n").is_err());
    }
}
