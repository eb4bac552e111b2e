use faer::Mat;

use super::DenseMatrix;
use crate::error::{Error, Result};

/// Thin singular value decomposition `a = left · diag(singular_values) · right_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdResult {
    pub left: DenseMatrix,
    pub singular_values: Vec<f64>,
    pub right_t: DenseMatrix,
}

impl SvdResult {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    /// `left · diag(s) · right_t`, optionally keeping only the leading `k` triplets.
    pub fn reconstruct(&self, k: Option<usize>) -> DenseMatrix {
        let k = k.unwrap_or(self.rank()).min(self.rank());
        let scaled = scale_rows(&self.right_t.leading_rows(k), &self.singular_values[..k]);
        self.left
            .leading_cols(k)
            .matmul(&scaled)
            .expect("svd factors conform")
    }
}

/// Multiplies row `i` of `m` by `s[i]`, i.e. `diag(s) · m`.
pub(crate) fn scale_rows(m: &DenseMatrix, s: &[f64]) -> DenseMatrix {
    debug_assert_eq!(m.rows(), s.len());
    DenseMatrix::from_fn(m.rows(), m.cols(), |i, j| s[i] * m.get(i, j))
}

/// Thin SVD with singular values sorted non-increasing.
///
/// Signs are normalised so that, within each left singular vector, the entry
/// of largest magnitude (lowest index on ties) is non-negative; the matching
/// right vector is flipped with it.
pub fn svd(a: &DenseMatrix) -> Result<SvdResult> {
    if a.is_empty() {
        return Err(Error::Empty("svd"));
    }
    if let Some((row, col)) = a.find_non_finite() {
        return Err(Error::NonFinite { row, col });
    }
    let (m, n) = a.shape();
    let values = a.as_slice();
    let dm = Mat::from_fn(m, n, |i, j| values[i * n + j]);
    let decomp = dm
        .thin_svd()
        .map_err(|_| Error::SvdNoConvergence { rows: m, cols: n })?;
    let (u, v) = (decomp.U(), decomp.V());
    let sv: Vec<f64> = decomp.S().column_vector().iter().copied().collect();
    let r = sv.len();

    let mut order: Vec<usize> = (0..r).collect();
    // stable: equal singular values keep the solver's order
    order.sort_by(|&x, &y| sv[y].total_cmp(&sv[x]));

    let mut left = DenseMatrix::zeros(m, r);
    let mut right_t = DenseMatrix::zeros(r, n);
    let mut singular_values = Vec::with_capacity(r);
    for (dst, &src) in order.iter().enumerate() {
        let mut pivot = 0usize;
        let mut best = -1.0f64;
        for i in 0..m {
            let mag = u[(i, src)].abs();
            if mag > best {
                best = mag;
                pivot = i;
            }
        }
        let sign = if u[(pivot, src)] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..m {
            left.set(i, dst, sign * u[(i, src)]);
        }
        for j in 0..n {
            right_t.set(dst, j, sign * v[(j, src)]);
        }
        singular_values.push(sv[src].max(0.0));
    }

    Ok(SvdResult {
        left,
        singular_values,
        right_t,
    })
}

/// Moore-Penrose pseudo-inverse through the SVD.
///
/// Singular values at or below `tol` are treated as zero. `None` selects the
/// usual numerical-rank cutoff `eps · max(rows, cols) · σ_max`.
pub fn pinv(a: &DenseMatrix, tol: Option<f64>) -> Result<DenseMatrix> {
    let (m, n) = a.shape();
    if a.is_empty() {
        return Ok(DenseMatrix::zeros(n, m));
    }
    if a.max_abs() == 0.0 {
        return Ok(DenseMatrix::zeros(n, m));
    }
    let dec = svd(a)?;
    let sigma_max = dec.singular_values.first().copied().unwrap_or(0.0);
    let tol = match tol {
        Some(t) if t >= 0.0 => t,
        Some(t) => return Err(Error::invalid(format!("pinv tolerance {t} is negative"))),
        None => f64::EPSILON * m.max(n) as f64 * sigma_max,
    };
    let kept = dec.singular_values.iter().take_while(|&&s| s > tol).count();
    if kept == 0 {
        return Ok(DenseMatrix::zeros(n, m));
    }
    let inv: Vec<f64> = dec.singular_values[..kept]
        .iter()
        .map(|s| 1.0 / s)
        .collect();
    // pinv = V_k · diag(1/s) · U_kᵀ
    let scaled_ut = scale_rows(&dec.left.leading_cols(kept).transpose(), &inv);
    dec.right_t
        .leading_rows(kept)
        .transpose()
        .matmul(&scaled_ut)
}
