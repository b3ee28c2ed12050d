//! Random graphs and two-class node datasets for tests and experiments.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dataset::Split;
use crate::{Graph, Matrix, NodeDataset, Result};

/// `G(n, p)`.
pub fn erdos_renyi<R: Rng>(n: usize, p: f64, rng: &mut R) -> Graph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            if rng.random_bool(p) {
                edges.push((u, v));
            }
        }
    }
    Graph::new(n, edges).expect("generated edges are valid")
}

/// `G(n, p)` plus a uniformly random spanning tree, hence connected.
pub fn random_connected<R: Rng>(n: usize, p: f64, rng: &mut R) -> Graph {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut edges: Vec<(usize, usize)> = erdos_renyi(n, p, rng).edges().to_vec();
    for i in 1..n {
        let parent = order[rng.random_range(0..i)];
        edges.push((order[i], parent));
    }
    Graph::new(n, edges).expect("generated edges are valid")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EdgeModel {
    /// Stochastic block model with in-class and cross-class edge probabilities.
    Blocks { p_in: f64, p_out: f64 },
    /// Edges independent of the labels.
    Uniform { p: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoClassConfig {
    pub n: usize,
    pub edges: EdgeModel,
    pub feature_dim: usize,
    /// Mean shift `±signal` on the first feature coordinate.
    pub feature_signal: f64,
    pub feature_noise: f64,
    pub train_size: usize,
}

impl TwoClassConfig {
    /// 100 nodes, two dense blocks and weakly informative features.
    pub fn two_block(n: usize) -> Self {
        Self {
            n,
            edges: EdgeModel::Blocks {
                p_in: 0.15,
                p_out: 0.02,
            },
            feature_dim: 8,
            feature_signal: 1.0,
            feature_noise: 1.0,
            train_size: n / 5,
        }
    }
}

/// Nodes `0..n/2` carry label `+1` and the rest `-1`; the split is a random
/// permutation with `train_size` labeled nodes.
pub fn two_class_dataset(config: &TwoClassConfig, seed: u64) -> Result<(Graph, NodeDataset)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = config.n;
    let half = n / 2;
    let label = |v: usize| if v < half { 1.0 } else { -1.0 };
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            let p = match config.edges {
                EdgeModel::Blocks { p_in, p_out } => {
                    if label(u) == label(v) {
                        p_in
                    } else {
                        p_out
                    }
                }
                EdgeModel::Uniform { p } => p,
            };
            if rng.random_bool(p) {
                edges.push((u, v));
            }
        }
    }
    let graph = Graph::new(n, edges)?;
    let features = Matrix::from_fn(n, config.feature_dim, |v, c| {
        let noise: f64 = StandardNormal.sample(&mut rng);
        let shift = if c == 0 {
            config.feature_signal * label(v)
        } else {
            0.0
        };
        shift + config.feature_noise * noise
    });
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let split = Split {
        train: order[..config.train_size].to_vec(),
        test: order[config.train_size..].to_vec(),
    };
    let labels = (0..n).map(|v| Some(label(v))).collect();
    let data = NodeDataset::new(features, labels, split)?;
    Ok((graph, data))
}
