//! Compressed sparse row matrices and CGLS (conjugate gradients on the
//! normal equations) for rectangular least-squares problems.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Row-major sparse matrix with a stored transpose, so that both `A x` and
/// `A^T y` parallelize over rows with a fixed summation order.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    pub rows: usize,
    pub cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
    t_indptr: Vec<usize>,
    t_indices: Vec<usize>,
    t_values: Vec<f64>,
}

fn compress(n_rows: usize, triplets: &[(usize, usize, f64)]) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
    let mut counts = vec![0usize; n_rows + 1];
    for &(r, _, _) in triplets {
        counts[r + 1] += 1;
    }
    for r in 0..n_rows {
        counts[r + 1] += counts[r];
    }
    let mut next = counts.clone();
    let mut indices = vec![0; triplets.len()];
    let mut values = vec![0.0; triplets.len()];
    for &(r, c, v) in triplets {
        let k = next[r];
        indices[k] = c;
        values[k] = v;
        next[r] += 1;
    }
    // Merge duplicates within each row, keeping column order.
    let mut out_ptr = vec![0usize; n_rows + 1];
    let mut out_idx = Vec::with_capacity(indices.len());
    let mut out_val = Vec::with_capacity(values.len());
    for r in 0..n_rows {
        let mut row: Vec<(usize, f64)> = (counts[r]..counts[r + 1]).map(|k| (indices[k], values[k])).collect();
        row.sort_by_key(|e| e.0);
        for (c, v) in row {
            if out_idx.len() > out_ptr[r] && *out_idx.last().unwrap() == c {
                *out_val.last_mut().unwrap() += v;
            } else {
                out_idx.push(c);
                out_val.push(v);
            }
        }
        out_ptr[r + 1] = out_idx.len();
    }
    (out_ptr, out_idx, out_val)
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let (indptr, indices, values) = compress(rows, triplets);
        let transposed: Vec<(usize, usize, f64)> = triplets.iter().map(|&(r, c, v)| (c, r, v)).collect();
        let (t_indptr, t_indices, t_values) = compress(cols, &transposed);
        Self {
            rows,
            cols,
            indptr,
            indices,
            values,
            t_indptr,
            t_indices,
            t_values,
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    fn product(indptr: &[usize], indices: &[usize], values: &[f64], x: &[f64]) -> Vec<f64> {
        (0..indptr.len() - 1)
            .into_par_iter()
            .map(|r| (indptr[r]..indptr[r + 1]).map(|k| values[k] * x[indices[k]]).sum())
            .collect()
    }

    /// `A x`.
    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        Self::product(&self.indptr, &self.indices, &self.values, x)
    }

    /// `A^T y`.
    pub fn mul_t(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.rows);
        Self::product(&self.t_indptr, &self.t_indices, &self.t_values, y)
    }

    /// Columns without any nonzero entry.
    pub fn empty_columns(&self) -> Vec<usize> {
        (0..self.cols)
            .filter(|&c| {
                self.t_values[self.t_indptr[c]..self.t_indptr[c + 1]]
                    .iter()
                    .all(|v| *v == 0.0)
            })
            .collect()
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Outcome of a CGLS run.
#[derive(Clone, Debug, PartialEq)]
pub struct CglsResult {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// `‖b - A x‖` after each iteration, starting with the initial iterate.
    pub residual_history: Vec<f64>,
    /// Final `‖A^T (b - A x)‖ / reference`.
    pub relative_normal_residual: f64,
}

/// Minimizes `‖b - A x‖` starting from `x0`, stopping when
/// `‖A^T r‖ <= tol ‖A^T b‖` (or relative to the initial normal residual
/// when `A^T b = 0`) or after `max_iter` iterations.
pub fn cgls(a: &CsrMatrix, b: &[f64], x0: Option<&[f64]>, tol: f64, max_iter: usize) -> Result<CglsResult> {
    let empty = a.empty_columns();
    if !empty.is_empty() {
        return Err(Error::RankDeficient(format!(
            "{} unknown(s) do not enter any equation (first: column {})",
            empty.len(),
            empty[0]
        )));
    }
    let mut x = x0.map(|v| v.to_vec()).unwrap_or_else(|| vec![0.0; a.cols]);
    let ax = a.mul(&x);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let mut s = a.mul_t(&r);
    let reference = {
        let atb = norm(&a.mul_t(b));
        if atb > 0.0 {
            atb
        } else {
            norm(&s)
        }
    };
    let mut gamma = dot(&s, &s);
    let mut history = vec![norm(&r)];
    let mut p = s.clone();
    let mut iterations = 0;
    let stop = |g: f64| reference == 0.0 || g.sqrt() <= tol * reference;
    let mut converged = stop(gamma);
    while !converged && iterations < max_iter {
        let q = a.mul(&p);
        let qq = dot(&q, &q);
        if qq == 0.0 {
            return Err(Error::RankDeficient(
                "search direction lies in the null space of the discrete operator".into(),
            ));
        }
        let alpha = gamma / qq;
        x.par_iter_mut().zip(&p).for_each(|(xi, pi)| *xi += alpha * pi);
        r.par_iter_mut().zip(&q).for_each(|(ri, qi)| *ri -= alpha * qi);
        s = a.mul_t(&r);
        let gamma_new = dot(&s, &s);
        iterations += 1;
        history.push(norm(&r));
        converged = stop(gamma_new);
        let beta = gamma_new / gamma;
        gamma = gamma_new;
        p.par_iter_mut().zip(&s).for_each(|(pi, si)| *pi = si + beta * *pi);
    }
    let relative = if reference == 0.0 {
        0.0
    } else {
        gamma.sqrt() / reference
    };
    Ok(CglsResult {
        x,
        iterations,
        converged,
        residual_history: history,
        relative_normal_residual: relative,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn products_and_duplicates() {
        let m = CsrMatrix::from_triplets(2, 3, &[(0, 0, 1.0), (0, 2, 2.0), (1, 1, 3.0), (0, 0, 1.0)]);
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.mul(&[1.0, 1.0, 1.0]), vec![4.0, 3.0]);
        assert_eq!(m.mul_t(&[1.0, 2.0]), vec![2.0, 6.0, 2.0]);
    }

    #[test]
    fn overdetermined_least_squares() {
        // Fit y = c0 + c1 t to four points; normal equations solved by hand.
        let t = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 2.0, 2.0, 4.0];
        let trip: Vec<_> = t
            .iter()
            .enumerate()
            .flat_map(|(i, ti)| [(i, 0, 1.0), (i, 1, *ti)])
            .collect();
        let a = CsrMatrix::from_triplets(4, 2, &trip);
        let res = cgls(&a, &y, None, 1e-14, 50).unwrap();
        assert!(res.converged);
        // Slope 0.9, intercept 0.9.
        assert!((res.x[0] - 0.9).abs() < 1e-12 && (res.x[1] - 0.9).abs() < 1e-12);
        assert!(res.residual_history.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
    }

    #[test]
    fn zero_rhs_and_empty_column() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 1, 2.0)]);
        let res = cgls(&a, &[0.0, 0.0], None, 1e-10, 10).unwrap();
        assert_eq!(res.iterations, 0);
        assert_eq!(res.x, vec![0.0, 0.0]);
        let bad = CsrMatrix::from_triplets(2, 3, &[(0, 0, 1.0), (1, 1, 2.0)]);
        assert!(matches!(
            cgls(&bad, &[1.0, 1.0], None, 1e-10, 10),
            Err(Error::RankDeficient(_))
        ));
    }
}
