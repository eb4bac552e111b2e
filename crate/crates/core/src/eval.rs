//! Accuracy and ranking metrics, fitted-model dispatch and k-fold evaluation.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::baselines::{als_solve_traced, AlsConfig, NeighborModel, ShallowFactors};
use crate::data::{FoldSplit, MaskedRatings, RatingScale, RatingTriple};
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::solver::{solve, Architecture, ConvergenceTrace, FactorStack, SolverConfig};

/// Cut-offs reported for precision and recall.
pub const RANK_CUTOFFS: [usize; 2] = [10, 20];

fn check_pair(predicted: &[f64], actual: &[f64]) -> Result<()> {
    if predicted.len() != actual.len() {
        return Err(Error::invalid(format!(
            "{} predictions for {} ratings",
            predicted.len(),
            actual.len()
        )));
    }
    if predicted.is_empty() {
        return Err(Error::Empty("metric"));
    }
    Ok(())
}

/// Mean absolute error.
pub fn mae(predicted: &[f64], actual: &[f64]) -> Result<f64> {
    check_pair(predicted, actual)?;
    let sum: f64 = predicted
        .iter()
        .zip(actual)
        .map(|(p, a)| (p - a).abs())
        .sum();
    Ok(sum / predicted.len() as f64)
}

/// Root mean squared error.
pub fn rmse(predicted: &[f64], actual: &[f64]) -> Result<f64> {
    check_pair(predicted, actual)?;
    let sum: f64 = predicted
        .iter()
        .zip(actual)
        .map(|(p, a)| (p - a).powi(2))
        .sum();
    Ok((sum / predicted.len() as f64).sqrt())
}

/// Precision and recall at `k` over held-out ratings.
///
/// Each user's test items are ranked by predicted score (higher first, ties by
/// lower item id). An item is relevant when its true rating is at least
/// `threshold`. Per user, precision is `hits / k` and recall `hits / relevant`;
/// both are averaged over users with at least one relevant test item. Returns
/// `(0, 0)` when no user has a relevant item.
pub fn precision_recall_at_k(
    test: &[RatingTriple],
    scores: &[f64],
    k: usize,
    threshold: f64,
) -> Result<(f64, f64)> {
    if k == 0 {
        return Err(Error::invalid("cut-off k must be positive"));
    }
    if test.len() != scores.len() {
        return Err(Error::invalid(format!(
            "{} scores for {} test ratings",
            scores.len(),
            test.len()
        )));
    }
    let mut by_user: BTreeMap<u32, Vec<(u32, f64, bool)>> = BTreeMap::new();
    for (t, &s) in test.iter().zip(scores) {
        by_user
            .entry(t.user_id)
            .or_default()
            .push((t.item_id, s, t.rating >= threshold));
    }
    let (mut precision, mut recall, mut users) = (0.0, 0.0, 0usize);
    for items in by_user.values_mut() {
        let relevant = items.iter().filter(|e| e.2).count();
        if relevant == 0 {
            continue;
        }
        items.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let hits = items.iter().take(k).filter(|e| e.2).count();
        precision += hits as f64 / k as f64;
        recall += hits as f64 / relevant as f64;
        users += 1;
    }
    if users == 0 {
        return Ok((0.0, 0.0));
    }
    Ok((precision / users as f64, recall / users as f64))
}

/// A rating-prediction method with its hyper-parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    DeepLfm {
        arch: Architecture,
        config: SolverConfig,
    },
    Als(AlsConfig),
    Knn {
        k_neighbors: usize,
    },
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::DeepLfm { .. } => "deep_lfm",
            Method::Als(_) => "als",
            Method::Knn { .. } => "knn",
        }
    }

    /// Trains on `train`; predictions are clamped to `scale`.
    pub fn fit(&self, train: &MaskedRatings, scale: RatingScale) -> Result<Fitted> {
        let model = match self {
            Method::DeepLfm { arch, config } => {
                let (stack, trace) = solve(train, arch, config)?;
                let product = stack.product()?;
                FittedModel::Deep {
                    stack,
                    product,
                    trace,
                }
            }
            Method::Als(config) => {
                let (factors, half_steps) = als_solve_traced(train, config)?;
                FittedModel::Als {
                    factors,
                    half_steps,
                }
            }
            Method::Knn { k_neighbors } => {
                FittedModel::Knn(NeighborModel::new(train, *k_neighbors, scale))
            }
        };
        Ok(Fitted {
            model,
            train: train.clone(),
            scale,
        })
    }
}

#[derive(Debug)]
pub enum FittedModel {
    Deep {
        stack: FactorStack,
        product: DenseMatrix,
        trace: ConvergenceTrace,
    },
    Als {
        factors: ShallowFactors,
        half_steps: Vec<f64>,
    },
    Knn(NeighborModel),
}

/// A trained model bound to the id index of its training matrix.
#[derive(Debug)]
pub struct Fitted {
    pub model: FittedModel,
    train: MaskedRatings,
    scale: RatingScale,
}

impl Fitted {
    /// Clamped prediction for raw ids. Ids unknown to the training matrix get
    /// the training mean.
    pub fn predict_ids(&self, user_id: u32, item_id: u32) -> f64 {
        let position = (
            self.train.users().position(user_id),
            self.train.items().position(item_id),
        );
        let raw = match position {
            (Some(row), Some(col)) => self.predict_raw(row, col),
            _ => self
                .train
                .global_mean()
                .unwrap_or(0.5 * (self.scale.lo + self.scale.hi)),
        };
        self.scale.clamp(raw)
    }

    fn predict_raw(&self, row: usize, col: usize) -> f64 {
        match &self.model {
            FittedModel::Deep { product, .. } => product.get(row, col),
            FittedModel::Als { factors, .. } => factors.predict(row, col),
            FittedModel::Knn(model) => model.predict(row, col),
        }
    }

    /// Outer-iteration objective trace of a deep model.
    pub fn trace(&self) -> Option<&ConvergenceTrace> {
        match &self.model {
            FittedModel::Deep { trace, .. } => Some(trace),
            _ => None,
        }
    }

    pub fn stack(&self) -> Option<&FactorStack> {
        match &self.model {
            FittedModel::Deep { stack, .. } => Some(stack),
            _ => None,
        }
    }

    pub fn predict_all(&self, test: &[RatingTriple]) -> Vec<f64> {
        test.iter()
            .map(|t| self.predict_ids(t.user_id, t.item_id))
            .collect()
    }
}

/// Metrics of one fold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoldMetrics {
    pub fold: usize,
    pub mae: f64,
    pub rmse: f64,
    pub p10: f64,
    pub p20: f64,
    pub r10: f64,
    pub r20: f64,
}

impl FoldMetrics {
    pub fn compute(
        fold: usize,
        test: &[RatingTriple],
        predicted: &[f64],
        threshold: f64,
    ) -> Result<Self> {
        let actual: Vec<f64> = test.iter().map(|t| t.rating).collect();
        let (p10, r10) = precision_recall_at_k(test, predicted, RANK_CUTOFFS[0], threshold)?;
        let (p20, r20) = precision_recall_at_k(test, predicted, RANK_CUTOFFS[1], threshold)?;
        Ok(FoldMetrics {
            fold,
            mae: mae(predicted, &actual)?,
            rmse: rmse(predicted, &actual)?,
            p10,
            p20,
            r10,
            r20,
        })
    }

    fn values(&self) -> [f64; 6] {
        [self.mae, self.rmse, self.p10, self.p20, self.r10, self.r20]
    }
}

pub const REPORT_HEADER: &str = "fold,mae,rmse,p10,p20,r10,r20";

/// Per-fold metrics of one method.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub method: String,
    pub folds: Vec<FoldMetrics>,
}

impl EvalReport {
    /// Unweighted mean of every metric over folds.
    pub fn mean(&self) -> Option<[f64; 6]> {
        if self.folds.is_empty() {
            return None;
        }
        let mut acc = [0.0; 6];
        for f in &self.folds {
            for (a, v) in acc.iter_mut().zip(f.values()) {
                *a += v;
            }
        }
        Some(acc.map(|a| a / self.folds.len() as f64))
    }

    /// Header, one row per fold and a final `mean` row; six decimals.
    pub fn to_csv(&self) -> String {
        let mut out = format!("{REPORT_HEADER}\n");
        let row = |out: &mut String, label: &str, v: [f64; 6]| {
            let _ = writeln!(
                out,
                "{label},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
                v[0], v[1], v[2], v[3], v[4], v[5]
            );
        };
        for f in &self.folds {
            row(&mut out, &f.fold.to_string(), f.values());
        }
        if let Some(m) = self.mean() {
            row(&mut out, "mean", m);
        }
        out
    }

    /// Fixed-width summary table.
    pub fn table(&self) -> String {
        let mut out = format!(
            "{:<8} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6}\n",
            self.method, "MAE", "RMSE", "P@10", "P@20", "R@10", "R@20"
        );
        let line = |out: &mut String, label: &str, v: [f64; 6]| {
            let _ = writeln!(
                out,
                "{label:<8} {:>6.4} {:>6.4} {:>6.4} {:>6.4} {:>6.4} {:>6.4}",
                v[0], v[1], v[2], v[3], v[4], v[5]
            );
        };
        for f in &self.folds {
            line(&mut out, &format!("fold {}", f.fold), f.values());
        }
        if let Some(m) = self.mean() {
            line(&mut out, "mean", m);
        }
        out
    }
}

/// Outcome of evaluating one fold.
#[derive(Debug)]
pub struct FoldOutcome {
    pub metrics: FoldMetrics,
    pub fitted: Fitted,
}

pub fn evaluate_fold(
    split: &FoldSplit,
    method: &Method,
    scale: RatingScale,
    threshold: f64,
) -> Result<FoldOutcome> {
    let wrap = |e: Error| Error::Fold {
        fold: split.fold_id,
        source: Box::new(e),
    };
    let fitted = method.fit(&split.train, scale).map_err(wrap)?;
    let predicted = fitted.predict_all(&split.test);
    let metrics =
        FoldMetrics::compute(split.fold_id, &split.test, &predicted, threshold).map_err(wrap)?;
    log::info!(
        "{} fold {}: MAE {:.4} RMSE {:.4}",
        method.name(),
        split.fold_id,
        metrics.mae,
        metrics.rmse
    );
    Ok(FoldOutcome { metrics, fitted })
}

/// Evaluates `method` on every fold, in fold order. `on_fold` sees each
/// outcome before its model is dropped.
pub fn cross_validate(
    folds: &[FoldSplit],
    method: &Method,
    scale: RatingScale,
    threshold: f64,
    mut on_fold: impl FnMut(&FoldOutcome) -> Result<()>,
) -> Result<EvalReport> {
    if folds.is_empty() {
        return Err(Error::invalid("no folds to evaluate"));
    }
    let mut metrics = Vec::with_capacity(folds.len());
    for split in folds {
        let outcome = evaluate_fold(split, method, scale, threshold)?;
        on_fold(&outcome)?;
        metrics.push(outcome.metrics);
    }
    Ok(EvalReport {
        method: method.name().to_string(),
        folds: metrics,
    })
}
