//! Relabeling communities layer by layer so that identified node-layers agree
//! across layers wherever the within-layer groupings allow it.
//!
//! The mismatch between layers `x` and `y` under a relabeling `pi` of layer
//! `x` is `sum C_ij [pi(c_i) != c_j]` over coupled pairs `i` in `x`, `j` in
//! `y`. Each step solves the optimal bipartite matching between labels and
//! only applies it if it strictly lowers the mismatch, so the coupling part
//! of the modularity can only grow while the intralayer part is untouched.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::MultilayerNetwork;
use crate::metrics::{Marginals, Partition};

/// Minimum-cost perfect matching of a square cost matrix. Entry `k` of the
/// result is the column assigned to row `k`.
pub fn optimal_label_matching(cost: &[Vec<f64>]) -> Result<Vec<usize>> {
    let n = cost.len();
    if let Some(row) = cost.iter().find(|r| r.len() != n) {
        return Err(Error::NotSquare {
            rows: n,
            cols: row.len(),
        });
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    // Shortest augmenting paths with row/column potentials, 1-based with a
    // virtual column 0.
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        assignment[owner[j] - 1] = j - 1;
    }
    Ok(assignment)
}

/// Result of an alignment: the relabeled partition and, for every layer, the
/// map from original to final label (defined on `0..label_bound`).
#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    pub partition: Partition,
    pub permutations: Vec<Vec<usize>>,
}

impl Alignment {
    /// Permutes the marginal columns of each layer the same way as its labels.
    /// Columns beyond the permutation length are left in place.
    pub fn apply_to_marginals(&self, net: &MultilayerNetwork, marg: &Marginals) -> Marginals {
        let q = marg.q();
        let mut out = marg.clone();
        for (layer, perm) in self.permutations.iter().enumerate() {
            for i in net.layer_range(layer) {
                let src = marg.row(i);
                let dst = out.row_mut(i);
                for (s, &p) in src.iter().enumerate() {
                    let t = if s < perm.len() { perm[s] } else { s };
                    if t < q {
                        dst[t] = p;
                    }
                }
            }
        }
        out
    }
}

struct Aligner<'a> {
    net: &'a MultilayerNetwork,
    labels: Vec<usize>,
    bound: usize,
    perms: Vec<Vec<usize>>,
}

impl<'a> Aligner<'a> {
    fn new(net: &'a MultilayerNetwork, part: &Partition) -> Result<Self> {
        if part.len() != net.n_node_layers() {
            return Err(Error::LengthMismatch {
                expected: net.n_node_layers(),
                got: part.len(),
            });
        }
        let bound = part.label_bound();
        Ok(Self {
            net,
            labels: part.labels().to_vec(),
            bound,
            perms: vec![(0..bound).collect(); net.n_layers()],
        })
    }

    /// Coupled pairs `(i, j, C_ij)` with `i` in `layer` and `j` in a layer
    /// accepted by `other`.
    fn pairs(&self, layer: usize, other: impl Fn(usize) -> bool) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for i in self.net.layer_range(layer) {
            for (j, c) in self.net.inter().row(i) {
                if other(self.net.layer_of(j)) {
                    out.push((i, j, c));
                }
            }
        }
        out
    }

    /// Best strictly improving relabeling of `layer` against the given pairs,
    /// as a full map on `0..bound`.
    fn best_relabeling(&self, layer: usize, pairs: &[(usize, usize, f64)]) -> Result<Option<Vec<usize>>> {
        let mut present = vec![false; self.bound];
        for i in self.net.layer_range(layer) {
            present[self.labels[i]] = true;
        }
        for &(_, j, _) in pairs {
            present[self.labels[j]] = true;
        }
        let support: Vec<usize> = (0..self.bound).filter(|&a| present[a]).collect();
        let mut index = vec![usize::MAX; self.bound];
        for (k, &a) in support.iter().enumerate() {
            index[a] = k;
        }
        let k = support.len();
        // agree[a][b]: weight of pairs with c_i = a, c_j = b
        let mut agree = vec![vec![0.0; k]; k];
        let mut total = 0.0;
        for &(i, j, c) in pairs {
            agree[index[self.labels[i]]][index[self.labels[j]]] += c;
            total += c;
        }
        let cost: Vec<Vec<f64>> = agree
            .iter()
            .map(|row| row.iter().map(|&w| total - w).collect::<Vec<_>>())
            .collect();
        let assignment = optimal_label_matching(&cost)?;
        let gain: f64 = (0..k).map(|a| agree[a][assignment[a]] - agree[a][a]).sum();
        if gain <= 1e-9 * total.max(1.0) {
            return Ok(None);
        }
        let mut map: Vec<usize> = (0..self.bound).collect();
        for (a, &b) in assignment.iter().enumerate() {
            map[support[a]] = support[b];
        }
        Ok(Some(map))
    }

    fn relabel_layer(&mut self, layer: usize, map: &[usize]) {
        for i in self.net.layer_range(layer) {
            self.labels[i] = map[self.labels[i]];
        }
        for p in self.perms[layer].iter_mut() {
            *p = map[*p];
        }
    }

    fn finish(self) -> Alignment {
        Alignment {
            partition: Partition::new(self.labels),
            permutations: self.perms,
        }
    }
}

/// Alignment for ordered layers: repeatedly repair the layer boundary with the
/// most label changes, relabeling that layer and every later one.
pub fn align_temporal(net: &MultilayerNetwork, part: &Partition) -> Result<Alignment> {
    let mut al = Aligner::new(net, part)?;
    let n_layers = net.n_layers();
    // Each applied relabeling strictly lowers an objective bounded below,
    // so this cap only guards against floating-point cycling.
    let max_rounds = 10 * n_layers * al.bound.max(1) * al.bound.max(1) + 10;
    for _ in 0..max_rounds {
        let mut worst = None;
        let mut worst_count = 0;
        for x in 1..n_layers {
            let changed = al
                .pairs(x, |l| l + 1 == x)
                .iter()
                .filter(|&&(i, j, _)| al.labels[i] != al.labels[j])
                .count();
            if changed > worst_count {
                worst_count = changed;
                worst = Some(x);
            }
        }
        let Some(x) = worst else { break };
        let pairs = al.pairs(x, |l| l + 1 == x);
        let Some(map) = al.best_relabeling(x, &pairs)? else { break };
        for layer in x..n_layers {
            al.relabel_layer(layer, &map);
        }
    }
    Ok(al.finish())
}

/// Alignment for unordered layers: visit layers in seeded random order,
/// matching each against all layers it is coupled to, until a full pass
/// changes nothing.
pub fn align_multiplex(net: &MultilayerNetwork, part: &Partition, seed: u64) -> Result<Alignment> {
    let mut al = Aligner::new(net, part)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..net.n_layers()).collect();
    let max_cycles = 10 * net.n_layers() * al.bound.max(1) * al.bound.max(1) + 10;
    for _ in 0..max_cycles {
        order.shuffle(&mut rng);
        let mut changed = false;
        for &x in &order {
            let pairs = al.pairs(x, |l| l != x);
            if let Some(map) = al.best_relabeling(x, &pairs)? {
                al.relabel_layer(x, &map);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    Ok(al.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_network, CouplingPreset, InterSpec, IntraEdge};

    fn layered(n: usize, l: usize, preset: CouplingPreset) -> MultilayerNetwork {
        let edges: Vec<IntraEdge> = (0..l)
            .flat_map(|layer| (1..n).map(move |u| IntraEdge::new(layer, u - 1, u, 1.0)))
            .collect();
        build_network(&edges, &InterSpec::Preset(preset), n, l).unwrap()
    }

    #[test]
    fn matching_examples() {
        let c = vec![vec![0.0, 1.0, 2.0], vec![3.0, 0.0, 1.0], vec![1.0, 1.0, 0.0]];
        assert_eq!(optimal_label_matching(&c).unwrap(), vec![0, 1, 2]);
        let c = vec![vec![1.0, 1.0, 0.0], vec![1.0, 0.0, 1.0], vec![0.0, 1.0, 1.0]];
        assert_eq!(optimal_label_matching(&c).unwrap(), vec![2, 1, 0]);
        assert!(matches!(
            optimal_label_matching(&[vec![1.0, 2.0], vec![1.0]]),
            Err(Error::NotSquare { .. })
        ));
    }

    #[test]
    fn temporal_flip_is_repaired() {
        let net = layered(4, 2, CouplingPreset::Temporal);
        let part = Partition::new(vec![0, 0, 1, 1, 1, 1, 0, 0]);
        let al = align_temporal(&net, &part).unwrap();
        assert_eq!(al.partition.labels(), &[0, 0, 1, 1, 0, 0, 1, 1]);
        assert_eq!(al.permutations[1], vec![1, 0]);
    }

    #[test]
    fn aligned_partition_is_fixed() {
        let net = layered(4, 3, CouplingPreset::Temporal);
        let part = Partition::new(vec![0, 0, 1, 1, 0, 0, 1, 1, 0, 1, 1, 1]);
        assert_eq!(align_temporal(&net, &part).unwrap().partition, part);
        assert_eq!(align_multiplex(&net, &part, 3).unwrap().partition, part);
    }

    #[test]
    fn multiplex_flipped_layer_returns() {
        let net = layered(4, 3, CouplingPreset::Multiplex);
        let part = Partition::new(vec![0, 0, 1, 1, 1, 1, 0, 0, 0, 0, 1, 1]);
        let al = align_multiplex(&net, &part, 11).unwrap();
        assert_eq!(al.partition.labels(), &[0, 0, 1, 1, 0, 0, 1, 1, 0, 0, 1, 1]);
    }

    #[test]
    fn marginal_columns_follow_labels() {
        let net = layered(2, 2, CouplingPreset::Temporal);
        let al = Alignment {
            partition: Partition::new(vec![0, 1, 0, 1]),
            permutations: vec![vec![0, 1], vec![1, 0]],
        };
        let m = Marginals::from_rows(&[vec![0.9, 0.1], vec![0.2, 0.8], vec![0.3, 0.7], vec![0.6, 0.4]])
            .unwrap();
        let out = al.apply_to_marginals(&net, &m);
        assert_eq!(out.row(0), &[0.9, 0.1]);
        assert_eq!(out.row(2), &[0.7, 0.3]);
    }
}
