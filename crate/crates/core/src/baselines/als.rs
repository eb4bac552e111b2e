use faer::linalg::solvers::Solve;
use faer::{Mat, Side};

use crate::data::MaskedRatings;
use crate::error::{Error, Result};
use crate::linalg::{pinv, svd, DenseMatrix};
use crate::solver::fill_missing;

/// Shallow factorization `X ≈ U·V` with ridge penalty `lambda`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShallowFactors {
    pub u: DenseMatrix,
    pub v: DenseMatrix,
    pub lambda: f64,
}

impl ShallowFactors {
    pub fn predict(&self, row: usize, col: usize) -> f64 {
        (0..self.u.cols())
            .map(|k| self.u.get(row, k) * self.v.get(k, col))
            .sum()
    }

    /// `‖mask ⊙ (Y − UV)‖² + λ(‖U‖² + ‖V‖²)`.
    pub fn objective(&self, data: &MaskedRatings) -> f64 {
        let fit: f64 = data
            .observed()
            .map(|(i, j, r)| {
                let d = r - self.predict(i, j);
                d * d
            })
            .sum();
        let u2 = self.u.frobenius_norm().powi(2);
        let v2 = self.v.frobenius_norm().powi(2);
        fit + self.lambda * (u2 + v2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlsConfig {
    pub rank: usize,
    pub lambda: f64,
    pub iters: usize,
}

impl Default for AlsConfig {
    fn default() -> Self {
        AlsConfig {
            rank: 40,
            lambda: 10.0,
            iters: 20,
        }
    }
}

impl AlsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rank == 0 {
            return Err(Error::invalid("ALS rank must be at least 1"));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid(format!(
                "lambda {} must be >= 0",
                self.lambda
            )));
        }
        if self.iters == 0 {
            return Err(Error::invalid("ALS iters must be at least 1"));
        }
        Ok(())
    }
}

/// Alternating ridge regression for the masked factorization.
///
/// Starts from the truncated SVD of the mean-filled matrix (`U = U_k√Σ`,
/// `V = √Σ·V_kᵀ`), then alternates exact row solves for `U` and column solves
/// for `V`.
pub fn als_solve(
    data: &MaskedRatings,
    k: usize,
    lambda: f64,
    iters: usize,
) -> Result<ShallowFactors> {
    als_solve_traced(
        data,
        &AlsConfig {
            rank: k,
            lambda,
            iters,
        },
    )
    .map(|(f, _)| f)
}

/// Like [`als_solve`], also returning the objective after every half-step
/// (`2 · iters` values).
pub fn als_solve_traced(
    data: &MaskedRatings,
    config: &AlsConfig,
) -> Result<(ShallowFactors, Vec<f64>)> {
    config.validate()?;
    let (m, n) = data.shape();
    let k = config.rank;
    if k > m.min(n) {
        return Err(Error::invalid(format!(
            "ALS rank {k} exceeds min({m}, {n})"
        )));
    }
    let filled = fill_missing(data)?;
    let dec = svd(&filled)?;
    let root: Vec<f64> = dec.singular_values[..k].iter().map(|s| s.sqrt()).collect();
    let u = DenseMatrix::from_fn(m, k, |i, c| dec.left.get(i, c) * root[c]);
    let v = DenseMatrix::from_fn(k, n, |c, j| root[c] * dec.right_t.get(c, j));
    let mut factors = ShallowFactors {
        u,
        v,
        lambda: config.lambda,
    };

    let rows: Vec<Vec<(usize, f64)>> = (0..m)
        .map(|i| {
            (0..n)
                .filter(|&j| data.is_observed(i, j))
                .map(|j| (j, data.y().get(i, j)))
                .collect()
        })
        .collect();
    let cols: Vec<Vec<(usize, f64)>> = (0..n)
        .map(|j| {
            (0..m)
                .filter(|&i| data.is_observed(i, j))
                .map(|i| (i, data.y().get(i, j)))
                .collect()
        })
        .collect();

    let mut trace = Vec::with_capacity(2 * config.iters);
    for _ in 0..config.iters {
        let vt = factors.v.transpose();
        factors.u = solve_side(&rows, &vt, config.lambda)?;
        trace.push(factors.objective(data));
        factors.v = solve_side(&cols, &factors.u, config.lambda)?.transpose();
        trace.push(factors.objective(data));
    }
    Ok((factors, trace))
}

/// For every entity with observations `(other, rating)`, solves
/// `(Fᵀ F + λI) w = Fᵀ r` over the rows `F` of `other_factors` it touches.
fn solve_side(
    observations: &[Vec<(usize, f64)>],
    other_factors: &DenseMatrix,
    lambda: f64,
) -> Result<DenseMatrix> {
    let k = other_factors.cols();
    let mut out = DenseMatrix::zeros(observations.len(), k);
    for (e, obs) in observations.iter().enumerate() {
        if obs.is_empty() {
            continue;
        }
        let mut gram = vec![0.0; k * k];
        let mut rhs = vec![0.0; k];
        for &(o, r) in obs {
            let f = other_factors.row(o);
            for a in 0..k {
                rhs[a] += f[a] * r;
                for b in a..k {
                    gram[a * k + b] += f[a] * f[b];
                }
            }
        }
        for a in 0..k {
            gram[a * k + a] += lambda;
            for b in 0..a {
                gram[a * k + b] = gram[b * k + a];
            }
        }
        let gram_mat = Mat::from_fn(k, k, |a, b| gram[a * k + b]);
        let w: Vec<f64> = match gram_mat.llt(Side::Lower) {
            Ok(ch) => {
                let sol = ch.solve(Mat::from_fn(k, 1, |a, _| rhs[a]));
                (0..k).map(|a| sol[(a, 0)]).collect()
            }
            Err(_) => {
                let gp = pinv(&DenseMatrix::new(k, k, gram)?, None)?;
                gp.matmul(&DenseMatrix::new(k, 1, rhs)?)?.into_vec()
            }
        };
        for (a, value) in w.into_iter().enumerate() {
            out.set(e, a, value);
        }
    }
    Ok(out)
}
