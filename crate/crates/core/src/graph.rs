//! Leader-follower communication digraphs.
//!
//! Node 0 is the leader (the exosystem); nodes `1..=N` are followers. An edge
//! `from -> to` with weight `a` means follower `to` receives the signal of
//! node `from`, i.e. `a_{to,from} = a`.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{eigenvalues, Matrix};

/// Tolerance on `Re λ(H)` used by [`Digraph::connectivity_spectral_check`].
pub const HURWITZ_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Digraph {
    n_followers: usize,
    edges: Vec<Edge>,
}

impl Digraph {
    pub fn new(n_followers: usize, edges: Vec<Edge>) -> Result<Self> {
        if n_followers == 0 {
            return Err(Error::config("graph.followers", "at least one follower is required"));
        }
        for (k, e) in edges.iter().enumerate() {
            let path = format!("graph.edges[{k}]");
            if e.from > n_followers || e.to > n_followers {
                return Err(Error::config(
                    path,
                    format!("node out of range 0..={n_followers}: {} -> {}", e.from, e.to),
                ));
            }
            if e.from == e.to {
                return Err(Error::config(path, format!("self-loop on node {}", e.to)));
            }
            if e.to == 0 {
                return Err(Error::config(path, "the leader (node 0) cannot receive edges"));
            }
            if !(e.weight.is_finite() && e.weight > 0.0) {
                return Err(Error::config(path, format!("weight must be positive, got {}", e.weight)));
            }
            if edges[..k].iter().any(|o| o.from == e.from && o.to == e.to) {
                return Err(Error::config(path, format!("duplicate edge {} -> {}", e.from, e.to)));
            }
        }
        Ok(Digraph { n_followers, edges })
    }

    /// Builds from unit-weight `(from, to)` pairs.
    pub fn from_pairs(n_followers: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let edges = pairs
            .iter()
            .map(|&(from, to)| Edge { from, to, weight: 1.0 })
            .collect();
        Self::new(n_followers, edges)
    }

    pub fn n_followers(&self) -> usize {
        self.n_followers
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Neighbours of node `i` with their weights `a_ij`.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.edges
            .iter()
            .filter(move |e| e.to == i)
            .map(|e| (e.from, e.weight))
    }

    /// `(N+1)×(N+1)` weighted adjacency `[a_ij]`.
    pub fn adjacency(&self) -> Matrix {
        let mut a = Matrix::zeros(self.n_followers + 1, self.n_followers + 1);
        for e in &self.edges {
            a.set(e.to, e.from, e.weight);
        }
        a
    }

    pub fn laplacian(&self) -> Matrix {
        let adj = self.adjacency();
        let n = adj.rows();
        let mut lap = -&adj;
        for i in 0..n {
            let deg: f64 = (0..n).map(|j| adj.get(i, j)).sum();
            lap.set(i, i, deg);
        }
        lap
    }

    /// Leader weights `(a_10, …, a_N0)`.
    pub fn leader_weights(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.n_followers];
        for e in self.edges.iter().filter(|e| e.from == 0) {
            w[e.to - 1] = e.weight;
        }
        w
    }

    /// `H`, the follower block of the Laplacian, and `Δ = diag(a_i0)`.
    pub fn h_matrix(&self) -> (Matrix, Matrix) {
        let n = self.n_followers;
        let h = self.laplacian().sub_block(1, 1, n, n);
        let weights = self.leader_weights();
        let delta = Matrix::diag(&weights).expect("weights are finite");
        debug_assert!((0..n).all(|i| {
            let row: f64 = (0..n).map(|j| h.get(i, j)).sum();
            (row - weights[i]).abs() <= 1e-12 * (1.0 + weights[i].abs())
        }));
        (h, delta)
    }

    /// True iff every follower is reachable from node 0.
    pub fn has_leader_spanning_tree(&self) -> bool {
        let mut seen = vec![false; self.n_followers + 1];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(node) = queue.pop_front() {
            for e in self.edges.iter().filter(|e| e.from == node) {
                if !seen[e.to] {
                    seen[e.to] = true;
                    queue.push_back(e.to);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// True iff every eigenvalue of `H` has real part above [`HURWITZ_TOL`].
    pub fn connectivity_spectral_check(&self) -> Result<bool> {
        let (h, _) = self.h_matrix();
        Ok(eigenvalues(&h)?.values.iter().all(|&(re, _)| re > HURWITZ_TOL))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn example_graph() -> Digraph {
        Digraph::from_pairs(4, &[(0, 1), (0, 2), (1, 3), (1, 4)]).unwrap()
    }

    #[test]
    fn empty_graph_laplacian_is_zero() {
        let g = Digraph::new(3, vec![]).unwrap();
        assert_eq!(g.laplacian(), Matrix::zeros(4, 4));
        assert!(!g.has_leader_spanning_tree());
    }

    #[test]
    fn single_edge_laplacian() {
        let g = Digraph::from_pairs(1, &[(0, 1)]).unwrap();
        assert_eq!(g.laplacian().to_rows(), vec![vec![0.0, 0.0], vec![-1.0, 1.0]]);
    }

    #[test]
    fn example_h_matrix() {
        let g = example_graph();
        let (h, delta) = g.h_matrix();
        assert_eq!(
            h.to_rows(),
            vec![
                vec![1.0, 0.0, 0.0, 0.0],
                vec![0.0, 1.0, 0.0, 0.0],
                vec![-1.0, 0.0, 1.0, 0.0],
                vec![-1.0, 0.0, 0.0, 1.0],
            ]
        );
        assert_eq!(delta, Matrix::diag(&[1.0, 1.0, 0.0, 0.0]).unwrap());
        assert_eq!(g.laplacian().sub_block(1, 1, 4, 4), h);
        let spec = eigenvalues(&h).unwrap();
        assert!(spec.values.iter().all(|&(re, im)| (re - 1.0).abs() < 1e-12 && im == 0.0));
        assert!(g.has_leader_spanning_tree());
        assert!(g.connectivity_spectral_check().unwrap());
    }

    #[test]
    fn star_graph() {
        let w = 0.7;
        let edges = (1..=3).map(|i| Edge { from: 0, to: i, weight: w }).collect();
        let (h, delta) = Digraph::new(3, edges).unwrap().h_matrix();
        assert_eq!(h, Matrix::identity(3).scale(w));
        assert_eq!(delta, Matrix::identity(3).scale(w));
    }

    #[test]
    fn leaderless_graph_fails_both_checks() {
        let g = Digraph::from_pairs(3, &[(1, 2), (2, 1), (2, 3), (3, 2), (1, 3), (3, 1)]).unwrap();
        let (_, delta) = g.h_matrix();
        assert_eq!(delta, Matrix::zeros(3, 3));
        assert!(!g.has_leader_spanning_tree());
        assert!(!g.connectivity_spectral_check().unwrap());
    }

    #[test]
    fn chain_is_spanning() {
        let pairs: Vec<_> = (0..5).map(|i| (i, i + 1)).collect();
        let g = Digraph::from_pairs(5, &pairs).unwrap();
        assert!(g.has_leader_spanning_tree());
        assert!(g.connectivity_spectral_check().unwrap());
    }

    #[test]
    fn isolated_follower() {
        let g = Digraph::from_pairs(3, &[(0, 1), (1, 2)]).unwrap();
        assert!(!g.has_leader_spanning_tree());
        assert!(!g.connectivity_spectral_check().unwrap());
    }

    #[test]
    fn rejects_invalid_edges() {
        assert!(Digraph::from_pairs(2, &[(1, 1)]).is_err());
        assert!(Digraph::from_pairs(2, &[(1, 0)]).is_err());
        assert!(Digraph::from_pairs(2, &[(0, 3)]).is_err());
        assert!(Digraph::new(2, vec![Edge { from: 0, to: 1, weight: 0.0 }]).is_err());
        assert!(Digraph::from_pairs(2, &[(0, 1), (0, 1)]).is_err());
    }
}
