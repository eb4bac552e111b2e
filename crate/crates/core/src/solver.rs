//! Deep latent factor model: masked non-negative factorization
//! `X ≈ U₁U₂…U_N·V` solved by projected gradient on `X` with an inner loop of
//! alternating projections onto the coupling constraint.
//!
//! The `U` layers live on the user side (`U₁` is `M×k₁`) and `V` is the
//! `k_N×N` item factor.

use std::fmt;
use std::str::FromStr;

use crate::data::MaskedRatings;
use crate::error::{Error, Result};
use crate::linalg::{self, matmul_chain, pinv, project_nonneg, svd, DenseMatrix};

/// Layer widths `k₁, …, k_N` of the user-side factor chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Architecture(Vec<usize>);

impl Architecture {
    pub fn new(widths: Vec<usize>) -> Result<Self> {
        if widths.is_empty() {
            return Err(Error::invalid("architecture needs at least one layer"));
        }
        if let Some(pos) = widths.iter().position(|&w| w == 0) {
            return Err(Error::invalid(format!("layer {} has width 0", pos + 1)));
        }
        if widths.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::invalid(format!(
                "layer widths must not increase: {}",
                Architecture(widths)
            )));
        }
        Ok(Architecture(widths))
    }

    pub fn widths(&self) -> &[usize] {
        &self.0
    }

    pub fn depth(&self) -> usize {
        self.0.len()
    }

    /// Checks `k₁ ≤ min(rows, cols)`.
    pub fn check_fits(&self, rows: usize, cols: usize) -> Result<()> {
        let k1 = self.0[0];
        if k1 > rows.min(cols) {
            return Err(Error::invalid(format!(
                "first layer width {k1} exceeds min({rows}, {cols})"
            )));
        }
        Ok(())
    }
}

impl FromStr for Architecture {
    type Err = Error;

    /// Parses `"40-20-10"`; commas are accepted as separators too.
    fn from_str(s: &str) -> Result<Self> {
        let widths = s
            .split(['-', ','])
            .map(|w| {
                w.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::invalid(format!("bad layer width {w:?} in {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Architecture::new(widths)
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|w| w.to_string()).collect();
        f.write_str(&parts.join("-"))
    }
}

/// Factor chain plus the completion estimate it is coupled to.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorStack {
    pub u_layers: Vec<DenseMatrix>,
    pub v: DenseMatrix,
    pub x: DenseMatrix,
}

impl FactorStack {
    pub fn new(u_layers: Vec<DenseMatrix>, v: DenseMatrix, x: DenseMatrix) -> Result<Self> {
        let stack = FactorStack { u_layers, v, x };
        let p = stack.product()?;
        if p.shape() != stack.x.shape() {
            return Err(Error::Shape {
                op: "FactorStack",
                left: p.shape(),
                right: stack.x.shape(),
            });
        }
        Ok(stack)
    }

    pub fn depth(&self) -> usize {
        self.u_layers.len()
    }

    fn chain(&self) -> Vec<&DenseMatrix> {
        self.u_layers
            .iter()
            .chain(std::iter::once(&self.v))
            .collect()
    }

    /// `U₁U₂…U_N·V`.
    pub fn product(&self) -> Result<DenseMatrix> {
        matmul_chain(&self.chain())
    }

    /// Smallest entry over every factor and `x`.
    pub fn min_entry(&self) -> f64 {
        self.chain()
            .into_iter()
            .chain(std::iter::once(&self.x))
            .map(DenseMatrix::min_value)
            .fold(f64::INFINITY, f64::min)
    }

    /// Entry `(row, col)` of the chain product, clamped to `[lo, hi]`.
    pub fn predict(&self, row: usize, col: usize, clamp: (f64, f64)) -> Result<f64> {
        let (m, n) = (self.u_layers[0].rows(), self.v.cols());
        if row >= m || col >= n {
            return Err(Error::Bounds {
                what: if row >= m { "row" } else { "column" },
                id: if row >= m { row } else { col } as u64,
                bound: if row >= m { m } else { n },
            });
        }
        let mut acc: Vec<f64> = self.u_layers[0].row(row).to_vec();
        for layer in self.u_layers[1..].iter().chain(std::iter::once(&self.v)) {
            let mut next = vec![0.0; layer.cols()];
            for (k, &a) in acc.iter().enumerate() {
                for (o, &b) in next.iter_mut().zip(layer.row(k)) {
                    *o += a * b;
                }
            }
            acc = next;
        }
        Ok(acc[col].clamp(clamp.0, clamp.1))
    }
}

/// How the completion estimate `X` relates to the factor product between outer
/// iterations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coupling {
    /// After each outer iteration `X` is reset to `U₁…U_N·V`, so the next
    /// gradient step starts from the coupled (feasible) point.
    Product,
    /// `X` is only ever `P₊` of the gradient step; factors track it through
    /// the projection residuals.
    Independent,
}

impl FromStr for Coupling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "product" => Ok(Coupling::Product),
            "independent" => Ok(Coupling::Independent),
            other => Err(Error::invalid(format!(
                "coupling must be product or independent, got {other:?}"
            ))),
        }
    }
}

impl fmt::Display for Coupling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Coupling::Product => "product",
            Coupling::Independent => "independent",
        })
    }
}

/// How each factor is updated inside a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateRule {
    /// The pseudo-inverse projection step, kept only when it does not raise the
    /// block residual `‖prefix·U·suffix − x‖`; otherwise a projected gradient
    /// step with step size `1 / (σ_max(prefix)² σ_max(suffix)²)` is taken.
    Guarded,
    /// The pseudo-inverse projection step, always accepted.
    Exact,
}

impl FromStr for UpdateRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "guarded" => Ok(UpdateRule::Guarded),
            "exact" => Ok(UpdateRule::Exact),
            other => Err(Error::invalid(format!(
                "update rule must be guarded or exact, got {other:?}"
            ))),
        }
    }
}

impl fmt::Display for UpdateRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UpdateRule::Guarded => "guarded",
            UpdateRule::Exact => "exact",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub gamma: f64,
    pub outer_iters: usize,
    pub inner_sweeps: usize,
    /// Stop once the relative objective change falls below this.
    pub rel_tol: f64,
    /// `None` uses the numerical-rank default of [`pinv`].
    pub pinv_tol: Option<f64>,
    pub coupling: Coupling,
    pub update: UpdateRule,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            gamma: 0.1,
            outer_iters: 300,
            inner_sweeps: 1,
            rel_tol: 1e-6,
            pinv_tol: None,
            coupling: Coupling::Product,
            update: UpdateRule::Guarded,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 2.0) {
            return Err(Error::invalid(format!(
                "gamma {} not in (0, 2)",
                self.gamma
            )));
        }
        if self.outer_iters == 0 {
            return Err(Error::invalid("outer_iters must be positive"));
        }
        if self.inner_sweeps == 0 {
            return Err(Error::invalid("inner_sweeps must be positive"));
        }
        if !(self.rel_tol >= 0.0 && self.rel_tol.is_finite()) {
            return Err(Error::invalid(format!(
                "rel_tol {} must be >= 0",
                self.rel_tol
            )));
        }
        if let Some(t) = self.pinv_tol {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::invalid(format!("pinv_tol {t} must be >= 0")));
            }
        }
        Ok(())
    }
}

/// Masked objective recorded after each outer iteration.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConvergenceTrace {
    pub objective: Vec<f64>,
}

impl ConvergenceTrace {
    pub fn len(&self) -> usize {
        self.objective.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objective.is_empty()
    }

    /// Fraction of consecutive pairs with `f[t+1] <= f[t]`; 1 for traces shorter than 2.
    pub fn non_increasing_fraction(&self) -> f64 {
        let pairs = self.objective.len().saturating_sub(1);
        if pairs == 0 {
            return 1.0;
        }
        let ok = self.objective.windows(2).filter(|w| w[1] <= w[0]).count();
        ok as f64 / pairs as f64
    }

    /// `iteration,objective` with 1-based iterations.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,objective\n");
        for (i, f) in self.objective.iter().enumerate() {
            out.push_str(&format!("{},{}\n", i + 1, f));
        }
        out
    }
}

/// Fills unobserved entries with the mean of their row and column averages.
///
/// When only one of the two averages exists it is used alone; with neither,
/// the global mean is used.
pub fn fill_missing(data: &MaskedRatings) -> Result<DenseMatrix> {
    let (m, n) = data.shape();
    let mut row_sum = vec![0.0; m];
    let mut row_cnt = vec![0usize; m];
    let mut col_sum = vec![0.0; n];
    let mut col_cnt = vec![0usize; n];
    for (i, j, r) in data.observed() {
        row_sum[i] += r;
        row_cnt[i] += 1;
        col_sum[j] += r;
        col_cnt[j] += 1;
    }
    let global = data
        .global_mean()
        .ok_or_else(|| Error::invalid("cannot fill a matrix with no observed entries"))?;
    let mean = |s: f64, c: usize| (c > 0).then(|| s / c as f64);
    let row_mean: Vec<Option<f64>> = (0..m).map(|i| mean(row_sum[i], row_cnt[i])).collect();
    let col_mean: Vec<Option<f64>> = (0..n).map(|j| mean(col_sum[j], col_cnt[j])).collect();
    Ok(DenseMatrix::from_fn(m, n, |i, j| {
        if data.is_observed(i, j) {
            return data.y().get(i, j);
        }
        match (row_mean[i], col_mean[j]) {
            (Some(r), Some(c)) => 0.5 * (r + c),
            (Some(r), None) => r,
            (None, Some(c)) => c,
            (None, None) => global,
        }
    }))
}

/// Sequential-SVD initialisation.
///
/// `U₁` takes the leading `k₁` left singular vectors of `filled`; the
/// remainder `Σ·Vᵀ` is decomposed again for `U₂`, and so on. `V` is the last
/// remainder. Nothing is projected here; `x` starts as `filled`.
pub fn init_factors(filled: &DenseMatrix, arch: &Architecture) -> Result<FactorStack> {
    let (m, n) = filled.shape();
    arch.check_fits(m, n)?;
    let mut u_layers = Vec::with_capacity(arch.depth());
    let mut remainder = filled.clone();
    for &k in arch.widths() {
        let dec = svd(&remainder)?;
        u_layers.push(dec.left.leading_cols(k));
        remainder = linalg::scale_rows(&dec.right_t.leading_rows(k), &dec.singular_values[..k]);
    }
    FactorStack::new(u_layers, remainder, filled.clone())
}

/// `½ Σ_{observed} (y − product)²`.
pub fn masked_objective(data: &MaskedRatings, product: &DenseMatrix) -> Result<f64> {
    if product.shape() != data.shape() {
        return Err(Error::Shape {
            op: "objective",
            left: data.shape(),
            right: product.shape(),
        });
    }
    let sum: f64 = data
        .observed()
        .map(|(i, j, r)| {
            let d = r - product.get(i, j);
            d * d
        })
        .sum();
    Ok(0.5 * sum)
}

pub fn objective(data: &MaskedRatings, stack: &FactorStack) -> Result<f64> {
    masked_objective(data, &stack.product()?)
}

/// `x − γ · mask ⊙ (mask ⊙ x − y)`.
///
/// The mask acts elementwise, so its adjoint is itself and the transposed
/// mask of the update rule is a second elementwise masking.
pub fn gradient_step(x: &DenseMatrix, data: &MaskedRatings, gamma: f64) -> Result<DenseMatrix> {
    if x.shape() != data.shape() {
        return Err(Error::Shape {
            op: "gradient_step",
            left: x.shape(),
            right: data.shape(),
        });
    }
    let (m, n) = x.shape();
    Ok(DenseMatrix::from_fn(m, n, |i, j| {
        let xv = x.get(i, j);
        if data.is_observed(i, j) {
            xv - gamma * (xv - data.y().get(i, j))
        } else {
            xv
        }
    }))
}

/// Projects `u` onto `{U : prefix·U·suffix = x}` and then onto `U ≥ 0`:
/// `P₊(u − prefix† (prefix·u·suffix − x) suffix†)`.
///
/// `None` stands for an identity of the right size.
pub fn project_factor(
    u: &DenseMatrix,
    prefix: Option<&DenseMatrix>,
    suffix: Option<&DenseMatrix>,
    x: &DenseMatrix,
    pinv_tol: Option<f64>,
) -> Result<DenseMatrix> {
    let mut correction = block_residual(u, prefix, suffix, x)?;
    if let Some(p) = prefix {
        correction = pinv(p, pinv_tol)?.matmul(&correction)?;
    }
    if let Some(s) = suffix {
        correction = correction.matmul(&pinv(s, pinv_tol)?)?;
    }
    Ok(project_nonneg(&u.sub(&correction)?))
}

/// `prefix·u·suffix − x`.
fn block_residual(
    u: &DenseMatrix,
    prefix: Option<&DenseMatrix>,
    suffix: Option<&DenseMatrix>,
    x: &DenseMatrix,
) -> Result<DenseMatrix> {
    let mut fitted = u.clone();
    if let Some(p) = prefix {
        fitted = p.matmul(&fitted)?;
    }
    if let Some(s) = suffix {
        fitted = fitted.matmul(s)?;
    }
    fitted.sub(x)
}

fn spectral_norm(a: Option<&DenseMatrix>) -> Result<f64> {
    match a {
        None => Ok(1.0),
        Some(a) if a.max_abs() == 0.0 => Ok(0.0),
        Some(a) => Ok(svd(a)?.singular_values[0]),
    }
}

/// [`project_factor`] under [`UpdateRule::Guarded`].
///
/// `‖prefix·U·suffix − x‖²` has a gradient that is Lipschitz in `U` with
/// constant `σ_max(prefix)² σ_max(suffix)²`, so the fallback projected gradient
/// step never increases the residual. Of the two candidates the one with the
/// smaller residual is returned.
pub fn guarded_project_factor(
    u: &DenseMatrix,
    prefix: Option<&DenseMatrix>,
    suffix: Option<&DenseMatrix>,
    x: &DenseMatrix,
    pinv_tol: Option<f64>,
) -> Result<DenseMatrix> {
    let residual = block_residual(u, prefix, suffix, x)?;
    let current = residual.frobenius_norm();
    let candidate = project_factor(u, prefix, suffix, x, pinv_tol)?;
    let candidate_norm = block_residual(&candidate, prefix, suffix, x)?.frobenius_norm();
    if candidate_norm <= current {
        return Ok(candidate);
    }
    let lipschitz = (spectral_norm(prefix)? * spectral_norm(suffix)?).powi(2);
    if lipschitz == 0.0 {
        return Ok(candidate);
    }
    let mut grad = residual;
    if let Some(p) = prefix {
        grad = p.transpose().matmul(&grad)?;
    }
    if let Some(s) = suffix {
        grad = grad.matmul(&s.transpose())?;
    }
    let stepped = project_nonneg(&u.sub(&grad.scale(1.0 / lipschitz))?);
    let stepped_norm = block_residual(&stepped, prefix, suffix, x)?.frobenius_norm();
    log::trace!("projection step rejected ({candidate_norm} > {current}), gradient step gives {stepped_norm}");
    Ok(if stepped_norm <= candidate_norm {
        stepped
    } else {
        candidate
    })
}

/// One alternating-projection pass: `x ← P₊(x̄)`, then each `Uᵢ` in order and
/// finally `V`, every update seeing the freshest values of the layers before it.
pub fn inner_sweep(
    x_bar: &DenseMatrix,
    stack: &FactorStack,
    pinv_tol: Option<f64>,
) -> Result<FactorStack> {
    inner_sweep_with(x_bar, stack, pinv_tol, UpdateRule::Exact)
}

/// [`inner_sweep`] with a choice of factor update.
pub fn inner_sweep_with(
    x_bar: &DenseMatrix,
    stack: &FactorStack,
    pinv_tol: Option<f64>,
    rule: UpdateRule,
) -> Result<FactorStack> {
    let update = match rule {
        UpdateRule::Exact => project_factor,
        UpdateRule::Guarded => guarded_project_factor,
    };
    let x = project_nonneg(x_bar);
    let depth = stack.depth();

    // suffixes[i] = U_{i+1} … U_N · V, from the values entering the sweep
    let mut suffixes: Vec<DenseMatrix> = Vec::with_capacity(depth);
    suffixes.push(stack.v.clone());
    for layer in stack.u_layers[1..].iter().rev() {
        let next = layer.matmul(suffixes.last().expect("non-empty"))?;
        suffixes.push(next);
    }
    suffixes.reverse();

    let mut u_layers = Vec::with_capacity(depth);
    let mut prefix: Option<DenseMatrix> = None;
    for (u, suffix) in stack.u_layers.iter().zip(&suffixes) {
        let updated = update(u, prefix.as_ref(), Some(suffix), &x, pinv_tol)?;
        prefix = Some(match prefix {
            None => updated.clone(),
            Some(p) => p.matmul(&updated)?,
        });
        u_layers.push(updated);
    }
    let v = update(&stack.v, prefix.as_ref(), None, &x, pinv_tol)?;
    Ok(FactorStack { u_layers, v, x })
}

/// Full solve: mean fill, sequential-SVD init, then up to `outer_iters` rounds
/// of gradient step plus `inner_sweeps` alternating-projection sweeps.
pub fn solve(
    data: &MaskedRatings,
    arch: &Architecture,
    config: &SolverConfig,
) -> Result<(FactorStack, ConvergenceTrace)> {
    config.validate()?;
    let (m, n) = data.shape();
    arch.check_fits(m, n)?;
    let filled = fill_missing(data)?;
    let mut stack = init_factors(&filled, arch)?;
    let mut previous = objective(data, &stack)?;
    let mut trace = ConvergenceTrace::default();

    for iteration in 1..=config.outer_iters {
        let x_bar = gradient_step(&stack.x, data, config.gamma)?;
        for _ in 0..config.inner_sweeps {
            stack = inner_sweep_with(&x_bar, &stack, config.pinv_tol, config.update)?;
        }
        let product = stack.product()?;
        let f = masked_objective(data, &product)?;
        if !f.is_finite() {
            return Err(Error::Divergence { iteration });
        }
        if config.coupling == Coupling::Product {
            stack.x = product;
        }
        trace.objective.push(f);
        log::debug!("outer iteration {iteration}: objective {f}");

        let change = (previous - f).abs() / previous.abs().max(f64::MIN_POSITIVE);
        if f == 0.0 || change < config.rel_tol {
            break;
        }
        previous = f;
    }
    Ok((stack, trace))
}
