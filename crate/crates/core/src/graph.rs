//! Undirected graphs and the self-loop augmented, symmetric-normalized
//! diffusion operator `S = (D + I)^{-1/2} (A + I) (D + I)^{-1/2}`.

use std::collections::BTreeSet;

use crate::{Error, Matrix, Result};

/// Simple undirected graph on nodes `0..n`.
///
/// Edges are stored once each as `(min, max)` pairs in sorted order. Self-loops
/// are rejected: the only self-loops are the ones the diffusion operator adds.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Matrix,
    degrees: Vec<usize>,
}

impl Graph {
    /// Builds a graph from an edge list. `(u, v)` and `(v, u)` describe the
    /// same edge and repeated edges are merged.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (u, v) in edges {
            for id in [u, v] {
                if id >= n {
                    return Err(Error::IdOutOfRange {
                        id,
                        n,
                        context: "edge list",
                    });
                }
            }
            if u == v {
                return Err(Error::InvalidGraph(format!("self-loop on node {u}")));
            }
            set.insert((u.min(v), u.max(v)));
        }
        let edges: Vec<_> = set.into_iter().collect();
        let mut adjacency = Matrix::zeros(n, n);
        let mut degrees = vec![0; n];
        for &(u, v) in &edges {
            adjacency[(u, v)] = 1.0;
            adjacency[(v, u)] = 1.0;
            degrees[u] += 1;
            degrees[v] += 1;
        }
        Ok(Self {
            n,
            edges,
            adjacency,
            degrees,
        })
    }

    /// Graph with `n` isolated nodes; its diffusion operator is the identity.
    pub fn edgeless(n: usize) -> Self {
        Self::new(n, std::iter::empty()).expect("edgeless graph is always valid")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn adjacency(&self) -> &Matrix {
        &self.adjacency
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn is_connected(&self) -> bool {
        if self.n == 0 {
            return true;
        }
        let mut neighbors = vec![Vec::new(); self.n];
        for &(u, v) in &self.edges {
            neighbors[u].push(v);
            neighbors[v].push(u);
        }
        let mut seen = vec![false; self.n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for &v in &neighbors[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

/// The diffusion operator `S` together with the cached product `S Sᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionOperator {
    s: Matrix,
    sst: Matrix,
}

impl DiffusionOperator {
    /// Wraps an arbitrary square operator. Used for `S = I` norm checks and
    /// for tests with hand-written operators.
    pub fn from_matrix(s: Matrix) -> Result<Self> {
        crate::linalg::ensure_square(&s, "diffusion operator")?;
        let mut sst = &s * s.transpose();
        crate::linalg::symmetrize(&mut sst);
        Ok(Self { s, sst })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            s: Matrix::identity(n, n),
            sst: Matrix::identity(n, n),
        }
    }

    pub fn n(&self) -> usize {
        self.s.nrows()
    }

    pub fn s(&self) -> &Matrix {
        &self.s
    }

    pub fn sst(&self) -> &Matrix {
        &self.sst
    }
}

/// `S_pq = (A + I)_pq / sqrt((deg_p + 1)(deg_q + 1))`.
pub fn build_diffusion(g: &Graph) -> DiffusionOperator {
    let n = g.n();
    let inv_sqrt: Vec<f64> = g
        .degrees()
        .iter()
        .map(|&d| 1.0 / ((d + 1) as f64).sqrt())
        .collect();
    let mut s = Matrix::zeros(n, n);
    for p in 0..n {
        s[(p, p)] = inv_sqrt[p] * inv_sqrt[p];
    }
    for &(u, v) in g.edges() {
        let w = inv_sqrt[u] * inv_sqrt[v];
        s[(u, v)] = w;
        s[(v, u)] = w;
    }
    DiffusionOperator::from_matrix(s).expect("diffusion operator is square")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_node() {
        let s = build_diffusion(&Graph::edgeless(1));
        assert_eq!(s.s()[(0, 0)], 1.0);
    }

    #[test]
    fn single_edge() {
        let s = build_diffusion(&Graph::new(2, [(0, 1)]).unwrap());
        for v in s.s().iter() {
            assert!((v - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn path_of_three() {
        let s = build_diffusion(&Graph::new(3, [(0, 1), (1, 2)]).unwrap());
        let s = s.s();
        assert!((s[(0, 0)] - 0.5).abs() < 1e-15);
        assert!((s[(0, 1)] - 1.0 / 6f64.sqrt()).abs() < 1e-15);
        assert!((s[(0, 1)] - 0.40825).abs() < 1e-5);
        assert!((s[(1, 1)] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(s[(0, 2)], 0.0);
    }

    #[test]
    fn isolated_node_has_unit_self_entry() {
        let g = Graph::new(3, [(0, 1)]).unwrap();
        let s = build_diffusion(&g);
        assert_eq!(s.s()[(2, 2)], 1.0);
        assert_eq!(s.s()[(2, 0)], 0.0);
        assert_eq!(g.degrees(), &[1, 1, 0]);
    }

    #[test]
    fn rejects_self_loops_and_bad_ids() {
        assert!(matches!(
            Graph::new(3, [(1, 1)]),
            Err(Error::InvalidGraph(_))
        ));
        assert!(matches!(
            Graph::new(3, [(0, 3)]),
            Err(Error::IdOutOfRange { id: 3, .. })
        ));
    }

    #[test]
    fn duplicate_and_reversed_edges_merge() {
        let g = Graph::new(3, [(0, 1), (1, 0), (0, 1), (2, 1)]).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
        assert_eq!(g.degrees(), &[1, 2, 1]);
    }

    fn naive_diffusion(g: &Graph) -> Matrix {
        let n = g.n();
        let mut a = g.adjacency().clone();
        for i in 0..n {
            a[(i, i)] += 1.0;
        }
        let mut d = Matrix::zeros(n, n);
        for i in 0..n {
            let deg: f64 = (0..n).map(|j| g.adjacency()[(i, j)]).sum();
            d[(i, i)] = 1.0 / (deg + 1.0).sqrt();
        }
        &d * a * &d
    }

    fn random_graph() -> impl Strategy<Value = Graph> {
        (1usize..40).prop_flat_map(|n| {
            proptest::collection::vec((0..n, 0..n), 0..(3 * n)).prop_map(move |pairs| {
                Graph::new(n, pairs.into_iter().filter(|(u, v)| u != v)).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn matches_naive_construction(g in random_graph()) {
            let s = build_diffusion(&g);
            let reference = naive_diffusion(&g);
            let n = g.n();
            for p in 0..n {
                for q in 0..n {
                    prop_assert!((s.s()[(p, q)] - reference[(p, q)]).abs() < 1e-14);
                    prop_assert_eq!(s.s()[(p, q)], s.s()[(q, p)]);
                    let v = s.s()[(p, q)];
                    prop_assert!((0.0..=1.0).contains(&v));
                    prop_assert_eq!(v > 0.0, p == q || g.adjacency()[(p, q)] == 1.0);
                }
                let row: f64 = (0..n).map(|q| s.s()[(p, q)]).sum();
                let expected: f64 = (0..n)
                    .map(|q| {
                        let a = g.adjacency()[(p, q)] + if p == q { 1.0 } else { 0.0 };
                        a / (((g.degrees()[p] + 1) * (g.degrees()[q] + 1)) as f64).sqrt()
                    })
                    .sum();
                prop_assert!((row - expected).abs() < 1e-12);
            }
            for (p, &deg) in g.degrees().iter().enumerate() {
                let count = (0..n).filter(|&q| g.adjacency()[(p, q)] == 1.0).count();
                prop_assert_eq!(deg, count);
                prop_assert_eq!(g.adjacency()[(p, p)], 0.0);
            }
        }
    }

    #[test]
    fn sst_is_psd_on_random_graphs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for trial in 0..12 {
            let n = 20 + trial * 15;
            let p = rng.random_range(0.02..0.2);
            let mut edges = Vec::new();
            for u in 0..n {
                for v in (u + 1)..n {
                    if rng.random_bool(p) {
                        edges.push((u, v));
                    }
                }
            }
            let s = build_diffusion(&Graph::new(n, edges).unwrap());
            let (vals, _) = crate::linalg::sorted_eigen(s.sst()).unwrap();
            assert!(
                *vals.last().unwrap() >= -1e-10,
                "n={n}: {}",
                vals.last().unwrap()
            );
        }
    }
}
