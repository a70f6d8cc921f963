//! Site neighborhood structure backing the ICAR spatial prior.
//!
//! The graph is stored as a flat edge list plus degree table. The ICAR
//! precision `D - W` is never materialized for likelihood work; the quadratic
//! form is evaluated as a sum of squared differences over edges.

use std::collections::{HashSet, VecDeque};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct NeighborhoodGraph {
    n_sites: usize,
    edges: Vec<(usize, usize)>,
    degrees: Vec<usize>,
    neighbors: Vec<Vec<usize>>,
}

impl NeighborhoodGraph {
    /// Validates an undirected edge list over `n_sites` sites.
    ///
    /// Pairs are unordered: `(1, 0)` and `(0, 1)` denote the same edge and
    /// supplying both is a [`Error::DuplicateEdge`]. The graph must form a
    /// single connected component.
    pub fn new(n_sites: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n_sites == 0 {
            return Err(Error::RangeError("graph needs at least one site".into()));
        }
        let mut seen = HashSet::with_capacity(edges.len());
        let mut normalized = Vec::with_capacity(edges.len());
        let mut degrees = vec![0usize; n_sites];
        let mut neighbors = vec![Vec::new(); n_sites];
        for &(a, b) in edges {
            for idx in [a, b] {
                if idx >= n_sites {
                    return Err(Error::IndexOutOfRange { index: idx, size: n_sites });
                }
            }
            if a == b {
                return Err(Error::SelfLoop(a));
            }
            let key = (a.min(b), a.max(b));
            if !seen.insert(key) {
                return Err(Error::DuplicateEdge(key.0, key.1));
            }
            normalized.push(key);
            degrees[a] += 1;
            degrees[b] += 1;
            neighbors[a].push(b);
            neighbors[b].push(a);
        }

        let mut visited = vec![false; n_sites];
        let mut queue = VecDeque::from([0usize]);
        visited[0] = true;
        while let Some(i) = queue.pop_front() {
            for &j in &neighbors[i] {
                if !visited[j] {
                    visited[j] = true;
                    queue.push_back(j);
                }
            }
        }
        if let Some(isolated) = visited.iter().position(|v| !v) {
            return Err(Error::DisconnectedGraph(isolated));
        }

        Ok(Self { n_sites, edges: normalized, degrees, neighbors })
    }

    /// Path graph `0 - 1 - ... - (n-1)`.
    pub fn path(n_sites: usize) -> Result<Self> {
        let edges: Vec<_> = (1..n_sites).map(|i| (i - 1, i)).collect();
        Self::new(n_sites, &edges)
    }

    /// Rook-adjacency lattice with `rows * cols` sites in row-major order.
    pub fn grid(rows: usize, cols: usize) -> Result<Self> {
        let mut edges = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                let i = r * cols + c;
                if c + 1 < cols {
                    edges.push((i, i + 1));
                }
                if r + 1 < rows {
                    edges.push((i, i + cols));
                }
            }
        }
        Self::new(rows * cols, &edges)
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn neighbors(&self, site: usize) -> &[usize] {
        &self.neighbors[site]
    }

    /// `phi' (D - W) phi`, computed as the sum of squared differences over edges.
    pub fn quadratic_form(&self, phi: &[f64]) -> Result<f64> {
        self.check_len(phi)?;
        Ok(self.edges.iter().map(|&(i, j)| (phi[i] - phi[j]).powi(2)).sum())
    }

    /// `(D - W) phi`, the gradient of half the quadratic form.
    pub fn laplacian_mul(&self, phi: &[f64]) -> Result<Vec<f64>> {
        self.check_len(phi)?;
        let mut out = vec![0.0; self.n_sites];
        for &(i, j) in &self.edges {
            let d = phi[i] - phi[j];
            out[i] += d;
            out[j] -= d;
        }
        Ok(out)
    }

    /// Dense `D - W`. Only used for eigendecomposition on moderate graphs.
    pub fn dense_laplacian(&self) -> DMatrix<f64> {
        let n = self.n_sites;
        let mut m = DMatrix::zeros(n, n);
        for (i, &d) in self.degrees.iter().enumerate() {
            m[(i, i)] = d as f64;
        }
        for &(i, j) in &self.edges {
            m[(i, j)] -= 1.0;
            m[(j, i)] -= 1.0;
        }
        m
    }

    fn check_len(&self, phi: &[f64]) -> Result<()> {
        if phi.len() != self.n_sites {
            return Err(Error::LengthMismatch { expected: self.n_sites, got: phi.len() });
        }
        Ok(())
    }
}

/// Relabels sites: new index of old site `i` is `perm[i]`.
pub fn permute_graph(graph: &NeighborhoodGraph, perm: &[usize]) -> Result<NeighborhoodGraph> {
    let edges: Vec<_> = graph.edges().iter().map(|&(a, b)| (perm[a], perm[b])).collect();
    NeighborhoodGraph::new(graph.n_sites(), &edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dense_quadratic(g: &NeighborhoodGraph, phi: &[f64]) -> f64 {
        let n = g.n_sites();
        let mut w = vec![vec![0.0; n]; n];
        for &(i, j) in g.edges() {
            w[i][j] = 1.0;
            w[j][i] = 1.0;
        }
        let mut total = 0.0;
        for i in 0..n {
            let d: f64 = w[i].iter().sum();
            for j in 0..n {
                let q = if i == j { d } else { 0.0 } - w[i][j];
                total += phi[i] * q * phi[j];
            }
        }
        total
    }

    #[test]
    fn degrees_of_small_graphs() {
        let g = NeighborhoodGraph::new(2, &[(0, 1)]).unwrap();
        assert_eq!(g.degrees(), &[1, 1]);
        let g = NeighborhoodGraph::new(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        assert_eq!(g.degrees(), &[1, 2, 2, 1]);
    }

    #[test]
    fn rejects_invalid_edge_lists() {
        assert!(matches!(
            NeighborhoodGraph::new(3, &[(0, 1)]),
            Err(Error::DisconnectedGraph(2))
        ));
        assert!(matches!(NeighborhoodGraph::new(3, &[(1, 1)]), Err(Error::SelfLoop(1))));
        assert!(matches!(
            NeighborhoodGraph::new(3, &[(0, 1), (1, 2), (1, 0)]),
            Err(Error::DuplicateEdge(0, 1))
        ));
        assert!(matches!(
            NeighborhoodGraph::new(2, &[(0, 2)]),
            Err(Error::IndexOutOfRange { index: 2, size: 2 })
        ));
    }

    #[test]
    fn quadratic_form_examples() {
        let g = NeighborhoodGraph::new(2, &[(0, 1)]).unwrap();
        assert_eq!(g.quadratic_form(&[1.0, -1.0]).unwrap(), 4.0);
        assert!(matches!(g.quadratic_form(&[1.0]), Err(Error::LengthMismatch { .. })));

        let tri = NeighborhoodGraph::new(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        let phi = [0.3, -0.5, 0.2];
        // D - W = [[2,-1,-1],[-1,2,-1],[-1,-1,2]]
        let oracle = 2.0 * (0.09 + 0.25 + 0.04) - 2.0 * (0.3 * -0.5 + 0.3 * 0.2 + -0.5 * 0.2);
        assert!((tri.quadratic_form(&phi).unwrap() - oracle).abs() < 1e-14);
        assert_eq!(tri.quadratic_form(&[0.7, 0.7, 0.7]).unwrap(), 0.0);
    }

    #[test]
    fn grid_and_path_constructors() {
        let g = NeighborhoodGraph::grid(2, 3).unwrap();
        assert_eq!(g.edges().len(), 7);
        assert_eq!(g.degrees(), &[2, 3, 2, 2, 3, 2]);
        let p = NeighborhoodGraph::path(5).unwrap();
        assert_eq!(p.degrees(), &[1, 2, 2, 2, 1]);
        assert!(NeighborhoodGraph::path(1).is_ok());
    }

    #[test]
    fn laplacian_mul_matches_dense() {
        let g = NeighborhoodGraph::grid(3, 3).unwrap();
        let phi: Vec<f64> = (0..9).map(|i| (i as f64 * 0.7).sin()).collect();
        let lap = g.dense_laplacian();
        let dense = &lap * nalgebra::DVector::from_vec(phi.clone());
        let sparse = g.laplacian_mul(&phi).unwrap();
        for i in 0..9 {
            assert!((dense[i] - sparse[i]).abs() < 1e-13);
        }
    }

    fn random_connected_graph() -> impl Strategy<Value = (usize, Vec<(usize, usize)>, Vec<f64>)> {
        (2usize..=10).prop_flat_map(|n| {
            let extra = proptest::collection::vec((0..n, 0..n), 0..15);
            let parents = proptest::collection::vec(0usize..1000, n - 1);
            let phi = proptest::collection::vec(-3.0f64..3.0, n);
            (Just(n), parents, extra, phi).prop_map(|(n, parents, extra, phi)| {
                // random spanning tree, then extra chords
                let mut set = std::collections::BTreeSet::new();
                for (k, p) in parents.into_iter().enumerate() {
                    let child = k + 1;
                    let parent = p % child;
                    set.insert((parent, child));
                }
                for (a, b) in extra {
                    if a != b {
                        set.insert((a.min(b), a.max(b)));
                    }
                }
                (n, set.into_iter().collect(), phi)
            })
        })
    }

    proptest! {
        #[test]
        fn edge_sum_equals_dense_form((n, edges, phi) in random_connected_graph()) {
            let g = NeighborhoodGraph::new(n, &edges).unwrap();
            let sparse = g.quadratic_form(&phi).unwrap();
            let dense = dense_quadratic(&g, &phi);
            prop_assert!((sparse - dense).abs() <= 1e-12 * (1.0 + dense.abs()));
        }

        #[test]
        fn translation_invariant((n, edges, phi) in random_connected_graph(), c in -5.0f64..5.0) {
            let g = NeighborhoodGraph::new(n, &edges).unwrap();
            let shifted: Vec<f64> = phi.iter().map(|v| v + c).collect();
            let a = g.quadratic_form(&phi).unwrap();
            let b = g.quadratic_form(&shifted).unwrap();
            prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a));
            prop_assert!(a >= 0.0);
        }

        #[test]
        fn zero_only_for_constant_fields((n, edges, phi) in random_connected_graph()) {
            let g = NeighborhoodGraph::new(n, &edges).unwrap();
            let spread = phi.iter().cloned().fold(f64::MIN, f64::max)
                - phi.iter().cloned().fold(f64::MAX, f64::min);
            let q = g.quadratic_form(&phi).unwrap();
            if spread > 1e-6 {
                prop_assert!(q > 0.0);
            }
        }
    }
}
