//! Seeded rating generators for tests and offline demos.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};

use crate::data::RatingTriple;
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// Shape of a MovieLens-like synthetic dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub users: usize,
    pub items: usize,
    pub ratings: usize,
    pub latent_dim: usize,
    pub noise: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    /// 943 users, 1682 items, 100000 ratings.
    pub fn ml100k_like(seed: u64) -> Self {
        SyntheticSpec {
            users: 943,
            items: 1682,
            ratings: 100_000,
            latent_dim: 8,
            noise: 0.8,
            seed,
        }
    }
}

/// Integer 1–5 ratings from `mean + user bias + item bias + ⟨p_u, q_i⟩ + noise`.
///
/// Item popularity is Zipf-like and user activity log-normal, with every user
/// and item receiving at least one rating. Ids are 1-based and contiguous.
pub fn movielens_like(spec: &SyntheticSpec) -> Result<Vec<RatingTriple>> {
    let SyntheticSpec {
        users,
        items,
        ratings,
        latent_dim,
        noise,
        seed,
    } = *spec;
    if users == 0 || items == 0 || ratings < users.max(items) || ratings > users * items / 2 {
        return Err(Error::invalid(format!(
            "cannot place {ratings} ratings in a {users}x{items} catalog"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = |sd: f64| Normal::new(0.0, sd).expect("positive sd");

    let user_bias: Vec<f64> = (0..users).map(|_| normal(0.35).sample(&mut rng)).collect();
    let item_bias: Vec<f64> = (0..items).map(|_| normal(0.5).sample(&mut rng)).collect();
    let factor_sd = (0.6 / latent_dim.max(1) as f64).sqrt();
    let p: Vec<Vec<f64>> = (0..users)
        .map(|_| {
            (0..latent_dim)
                .map(|_| normal(factor_sd).sample(&mut rng))
                .collect()
        })
        .collect();
    let q: Vec<Vec<f64>> = (0..items)
        .map(|_| {
            (0..latent_dim)
                .map(|_| normal(1.0).sample(&mut rng))
                .collect()
        })
        .collect();

    // popular items are also slightly better liked
    let mut popularity: Vec<f64> = (0..items)
        .map(|i| 1.0 / (1.0 + i as f64).powf(0.9))
        .collect();
    for (w, b) in popularity.iter_mut().zip(&item_bias) {
        *w *= (0.5 * b).exp();
    }
    let activity_dist = LogNormal::new(0.0, 0.9).expect("valid lognormal");
    let activity: Vec<f64> = (0..users).map(|_| activity_dist.sample(&mut rng)).collect();
    let cumulative = |w: &[f64]| -> Vec<f64> {
        let mut acc = 0.0;
        w.iter()
            .map(|x| {
                acc += x;
                acc
            })
            .collect()
    };
    let item_cdf = cumulative(&popularity);
    let user_cdf = cumulative(&activity);
    let draw = |cdf: &[f64], rng: &mut ChaCha8Rng| -> usize {
        let u = rng.random::<f64>() * cdf[cdf.len() - 1];
        cdf.partition_point(|&c| c < u).min(cdf.len() - 1)
    };

    let mut pairs: HashSet<(usize, usize)> = HashSet::with_capacity(ratings);
    let mut order: Vec<(usize, usize)> = Vec::with_capacity(ratings);
    let mut push = |pair: (usize, usize), pairs: &mut HashSet<(usize, usize)>| {
        if pairs.insert(pair) {
            order.push(pair);
        }
    };
    for u in 0..users {
        let i = draw(&item_cdf, &mut rng);
        push((u, i), &mut pairs);
    }
    for i in 0..items {
        let u = draw(&user_cdf, &mut rng);
        push((u, i), &mut pairs);
    }
    while pairs.len() < ratings {
        let pair = (draw(&user_cdf, &mut rng), draw(&item_cdf, &mut rng));
        push(pair, &mut pairs);
    }

    let noise = normal(noise.max(1e-12));
    Ok(order
        .into_iter()
        .enumerate()
        .map(|(t, (u, i))| {
            let dot: f64 = p[u].iter().zip(&q[i]).map(|(a, b)| a * b).sum();
            let raw = 3.53 + user_bias[u] + item_bias[i] + dot + noise.sample(&mut rng);
            RatingTriple {
                user_id: u as u32 + 1,
                item_id: i as u32 + 1,
                rating: raw.round().clamp(1.0, 5.0),
                timestamp: 880_000_000 + t as i64,
            }
        })
        .collect())
}

/// `rows×rank` and `rank×cols` factors with entries uniform in `[lo, hi)`; their
/// product is an exactly low-rank non-negative matrix.
pub fn nonneg_low_rank(
    rows: usize,
    cols: usize,
    rank: usize,
    (lo, hi): (f64, f64),
    seed: u64,
) -> (DenseMatrix, DenseMatrix) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = DenseMatrix::from_fn(rows, rank, |_, _| rng.random_range(lo..hi));
    let b = DenseMatrix::from_fn(rank, cols, |_, _| rng.random_range(lo..hi));
    (a, b)
}

/// Seeded Bernoulli(`p`) 0/1 mask.
pub fn bernoulli_mask(rows: usize, cols: usize, p: f64, seed: u64) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DenseMatrix::from_fn(
        rows,
        cols,
        |_, _| if rng.random::<f64>() < p { 1.0 } else { 0.0 },
    )
}
