//! Classical comparison methods: ridge-regularised ALS and user-user kNN.

mod als;
mod knn;

pub use als::{als_solve, als_solve_traced, AlsConfig, ShallowFactors};
pub use knn::{knn_predict, NeighborModel, MIN_OVERLAP};
