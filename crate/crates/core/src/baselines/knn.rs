use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::data::{MaskedRatings, RatingScale};

/// Co-rated items required before a Pearson correlation is trusted.
pub const MIN_OVERLAP: usize = 2;

/// User-user neighbourhood model over a training matrix.
///
/// Similarity rows are computed per active user on first use and cached.
#[derive(Debug)]
pub struct NeighborModel {
    data: MaskedRatings,
    pub k_neighbors: usize,
    scale: RatingScale,
    item_means: Vec<Option<f64>>,
    global_mean: f64,
    cache: Mutex<HashMap<usize, Arc<Vec<f64>>>>,
}

impl NeighborModel {
    pub fn new(data: &MaskedRatings, k_neighbors: usize, scale: RatingScale) -> Self {
        let (_, n) = data.shape();
        let mut sum = vec![0.0; n];
        let mut cnt = vec![0usize; n];
        for (_, j, r) in data.observed() {
            sum[j] += r;
            cnt[j] += 1;
        }
        let item_means = sum
            .iter()
            .zip(&cnt)
            .map(|(&s, &c)| (c > 0).then(|| s / c as f64))
            .collect();
        NeighborModel {
            data: data.clone(),
            k_neighbors: k_neighbors.max(1),
            scale,
            item_means,
            global_mean: data.global_mean().unwrap_or(0.5 * (scale.lo + scale.hi)),
            cache: Mutex::new(HashMap::new()),
        }
    }

    /// Pearson correlation of two users over their co-rated items, in [-1, 1].
    /// Fewer than [`MIN_OVERLAP`] co-rated items or zero variance gives 0.
    pub fn pearson(&self, a: usize, b: usize) -> f64 {
        pearson(&self.data, a, b)
    }

    fn similarities(&self, user: usize) -> Arc<Vec<f64>> {
        if let Some(row) = self.cache.lock().expect("cache lock").get(&user) {
            return Arc::clone(row);
        }
        let (m, _) = self.data.shape();
        let row: Arc<Vec<f64>> = Arc::new(
            (0..m)
                .map(|o| {
                    if o == user {
                        0.0
                    } else {
                        self.pearson(user, o)
                    }
                })
                .collect(),
        );
        self.cache
            .lock()
            .expect("cache lock")
            .entry(user)
            .or_insert_with(|| Arc::clone(&row));
        row
    }

    /// Predicted rating of `item` for `active_user`.
    ///
    /// Neighbours are the `k_neighbors` most similar users that rated the item
    /// (ties by lower index). Negative similarities count as 0 and the rest are
    /// normalised to sum to 1. Without any usable weight, the item mean (or the
    /// global mean for an unrated item) is returned. Always inside the scale.
    pub fn predict(&self, active_user: usize, item: usize) -> f64 {
        let (m, _) = self.data.shape();
        let raters: Vec<usize> = (0..m)
            .filter(|&u| u != active_user && self.data.is_observed(u, item))
            .collect();
        let fallback = self.item_means[item].unwrap_or(self.global_mean);
        if raters.is_empty() {
            return self.scale.clamp(fallback);
        }
        let sims = self.similarities(active_user);
        let mut ranked: Vec<(usize, f64)> = raters.into_iter().map(|u| (u, sims[u])).collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        ranked.truncate(self.k_neighbors);

        let total: f64 = ranked.iter().map(|&(_, s)| s.max(0.0)).sum();
        if total <= 0.0 {
            return self.scale.clamp(fallback);
        }
        let value: f64 = ranked
            .iter()
            .map(|&(u, s)| s.max(0.0) / total * self.data.y().get(u, item))
            .sum();
        self.scale.clamp(value)
    }
}

/// Convenience wrapper building a throwaway model.
pub fn knn_predict(
    data: &MaskedRatings,
    active_user: usize,
    item: usize,
    k_neighbors: usize,
    scale: RatingScale,
) -> f64 {
    NeighborModel::new(data, k_neighbors, scale).predict(active_user, item)
}

fn pearson(data: &MaskedRatings, a: usize, b: usize) -> f64 {
    let (_, n) = data.shape();
    let y = data.y();
    let common: Vec<(f64, f64)> = (0..n)
        .filter(|&j| data.is_observed(a, j) && data.is_observed(b, j))
        .map(|j| (y.get(a, j), y.get(b, j)))
        .collect();
    if common.len() < MIN_OVERLAP {
        return 0.0;
    }
    let len = common.len() as f64;
    let ma = common.iter().map(|p| p.0).sum::<f64>() / len;
    let mb = common.iter().map(|p| p.1).sum::<f64>() / len;
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for &(x, z) in &common {
        cov += (x - ma) * (z - mb);
        va += (x - ma).powi(2);
        vb += (z - mb).powi(2);
    }
    if va <= 0.0 || vb <= 0.0 {
        return 0.0;
    }
    (cov / (va.sqrt() * vb.sqrt())).clamp(-1.0, 1.0)
}
