//! Ground truth for the largest-component law, computed from actual graphs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exploration::ComponentStats;
use crate::sampler::RngStream;

/// Largest `n` accepted by [`sample_graph`].
pub const MAX_SAMPLE_N: usize = 10_000;
/// Largest `n` accepted by [`enumerate_pmf`] (2²⁸ edge subsets).
pub const MAX_ENUM_N: usize = 8;

/// Disjoint sets with path compression and union by size.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut v: usize) -> usize {
        let mut root = v;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        while self.parent[v] != root {
            let next = self.parent[v];
            self.parent[v] = root;
            v = next;
        }
        root
    }

    /// Merge the sets of `a` and `b`; false if they were already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }

    /// Sizes of all sets, largest first.
    pub fn set_sizes(&mut self) -> Vec<u64> {
        let roots: Vec<usize> = (0..self.parent.len())
            .filter(|&v| self.find(v) == v)
            .collect();
        let mut sizes: Vec<u64> = roots.iter().map(|&v| self.size[v] as u64).collect();
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        sizes
    }
}

/// Sample `G(n, p)` edge by edge and measure its components.
pub fn sample_graph(n: usize, p: f64, stream: &mut RngStream) -> Result<ComponentStats> {
    if n > MAX_SAMPLE_N {
        return Err(Error::Size(format!(
            "direct graph sampling is limited to n <= {MAX_SAMPLE_N}, got {n}"
        )));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::domain(format!("p must lie in [0, 1], got {p}")));
    }
    let mut uf = UnionFind::new(n);
    for i in 0..n {
        for j in i + 1..n {
            if stream.uniform() < p {
                uf.union(i, j);
            }
        }
    }
    let sizes = uf.set_sizes();
    Ok(ComponentStats::from_sorted_sizes(&sizes))
}

/// Exact distribution of the largest component size. Sizes with zero
/// probability are omitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactPmf {
    pub n: usize,
    pub p: f64,
    #[serde(rename = "pmf")]
    pub mass: BTreeMap<usize, f64>,
}

impl ExactPmf {
    pub fn prob(&self, k: usize) -> f64 {
        self.mass.get(&k).copied().unwrap_or(0.0)
    }

    /// Masses for sizes `1..=n`, index `k - 1`.
    pub fn dense(&self) -> Vec<f64> {
        (1..=self.n).map(|k| self.prob(k)).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// Largest component of the graph on `n` vertices whose adjacency rows are
/// given as bitmasks.
fn largest_component(adj: &[u32]) -> usize {
    let n = adj.len();
    let all = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
    let mut unvisited = all;
    let mut best = 0;
    while unvisited != 0 {
        let start = unvisited.trailing_zeros() as usize;
        let mut comp = 1u32 << start;
        let mut frontier = comp;
        while frontier != 0 {
            let v = frontier.trailing_zeros() as usize;
            frontier &= frontier - 1;
            let fresh = adj[v] & !comp;
            comp |= fresh;
            frontier |= fresh;
        }
        unvisited &= !comp;
        best = best.max(comp.count_ones() as usize);
    }
    best
}

/// Enumerate every labeled graph on `n ≤ 8` vertices.
///
/// Graphs are tallied by `(largest component, edge count)` in integers, and
/// each tally is weighted by `p^e (1-p)^{N-e}` at the end.
pub fn enumerate_pmf(n: usize, p: f64) -> Result<ExactPmf> {
    if n == 0 || n > MAX_ENUM_N {
        return Err(Error::Size(format!(
            "enumeration needs 1 <= n <= {MAX_ENUM_N}, got {n}"
        )));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::domain(format!("p must lie in [0, 1], got {p}")));
    }
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let edges = pairs.len();
    let mut tally = vec![vec![0u64; edges + 1]; n + 1];
    let mut adj = vec![0u32; n];
    for mask in 0u64..(1u64 << edges) {
        adj.iter_mut().for_each(|row| *row = 0);
        for (e, &(i, j)) in pairs.iter().enumerate() {
            if mask >> e & 1 == 1 {
                adj[i] |= 1 << j;
                adj[j] |= 1 << i;
            }
        }
        tally[largest_component(&adj)][mask.count_ones() as usize] += 1;
    }
    let weight = |e: usize| p.powi(e as i32) * (1.0 - p).powi((edges - e) as i32);
    let mass = (1..=n)
        .filter_map(|k| {
            let m: f64 = tally[k]
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(e, &c)| c as f64 * weight(e))
                .sum();
            (m > 0.0).then_some((k, m))
        })
        .collect();
    Ok(ExactPmf { n, p, mass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::seed_stream;

    #[test]
    fn union_find_basics() {
        let mut uf = UnionFind::new(6);
        assert!(uf.union(0, 1));
        assert!(uf.union(1, 2));
        assert!(!uf.union(0, 2));
        assert!(uf.union(4, 5));
        assert_eq!(uf.set_sizes(), vec![3, 2, 1]);
    }

    #[test]
    fn sample_graph_extremes() {
        let mut s = seed_stream(0, 0);
        let full = sample_graph(30, 1.0, &mut s).unwrap();
        assert_eq!((full.l1, full.l2, full.component_count), (30, 0, 1));
        let empty = sample_graph(30, 0.0, &mut s).unwrap();
        assert_eq!((empty.l1, empty.l2, empty.component_count), (1, 1, 30));
        let single = sample_graph(1, 0.0, &mut s).unwrap();
        assert_eq!((single.l1, single.l2, single.component_count), (1, 0, 1));
        assert!(matches!(
            sample_graph(10_001, 0.1, &mut s),
            Err(Error::Size(_))
        ));
    }

    #[test]
    fn enumeration_small_cases() {
        let pmf = enumerate_pmf(3, 0.5).unwrap();
        assert!((pmf.prob(3) - 0.5).abs() < 1e-15);

        let pmf = enumerate_pmf(4, 0.5).unwrap();
        for (k, count) in [(1, 1.0), (2, 9.0), (3, 16.0), (4, 38.0)] {
            assert!((pmf.prob(k) - count / 64.0).abs() < 1e-15, "k = {k}");
        }

        for p in [0.0, 0.3, 1.0] {
            let pmf = enumerate_pmf(2, p).unwrap();
            assert!((pmf.prob(2) - p).abs() < 1e-15);
        }
        assert!(enumerate_pmf(9, 0.5).is_err());
    }

    #[test]
    fn enumeration_masses_sum_to_one() {
        for n in 1..=6 {
            for p in [0.1, 0.5, 0.9] {
                let total: f64 = enumerate_pmf(n, p).unwrap().mass.values().sum();
                assert!((total - 1.0).abs() <= 1e-12, "n = {n}, p = {p}");
            }
        }
    }

    #[test]
    fn connected_graph_counts() {
        // Connected labeled graphs on n vertices: 1, 1, 4, 38, 728, 26704.
        let expected = [1.0, 1.0, 4.0, 38.0, 728.0, 26704.0];
        for n in 1..=6 {
            let all = 2f64.powi((n * (n - 1) / 2) as i32);
            let pmf = enumerate_pmf(n, 0.5).unwrap();
            assert!((pmf.prob(n) * all - expected[n - 1]).abs() < 1e-6, "n = {n}");
        }
    }

    #[test]
    fn json_shape() {
        let json = enumerate_pmf(2, 1.0).unwrap().to_json().unwrap();
        assert_eq!(json, r#"{"n":2,"p":1.0,"pmf":{"2":1.0}}"#);
    }

    #[test]
    fn graph_mean_component_count_matches_enumeration() {
        // E[#components] for n = 4, p = 1/2 by direct enumeration over masks.
        let pairs = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
        let mut total = 0usize;
        for mask in 0..64u32 {
            let mut uf = UnionFind::new(4);
            for (e, &(i, j)) in pairs.iter().enumerate() {
                if mask >> e & 1 == 1 {
                    uf.union(i, j);
                }
            }
            total += uf.set_sizes().len();
        }
        let expect = total as f64 / 64.0;

        let reps = 100_000;
        let mut s = seed_stream(8, 0);
        let (mut sum, mut sum2) = (0.0, 0.0);
        for _ in 0..reps {
            let c = sample_graph(4, 0.5, &mut s).unwrap().component_count as f64;
            sum += c;
            sum2 += c * c;
        }
        let mean = sum / reps as f64;
        let sd = (sum2 / reps as f64 - mean * mean).sqrt();
        assert!((mean - expect).abs() < 4.0 * sd / (reps as f64).sqrt());
    }
}
