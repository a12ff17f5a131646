#![allow(dead_code)]

pub mod oracle;

use multilayer_bp::graph::build_network;
use multilayer_bp::{CouplingPreset, InterEdge, InterSpec, IntraEdge, MultilayerNetwork, Partition};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn single_layer(n: usize, edges: &[(usize, usize)]) -> MultilayerNetwork {
    let intra: Vec<IntraEdge> = edges.iter().map(|&(u, v)| IntraEdge::new(0, u, v, 1.0)).collect();
    build_network(&intra, &InterSpec::Preset(CouplingPreset::None), n, 1).unwrap()
}

pub fn triangle() -> MultilayerNetwork {
    single_layer(3, &[(0, 1), (1, 2), (0, 2)])
}

pub fn two_triangles() -> MultilayerNetwork {
    single_layer(6, &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (2, 3)])
}

/// Two layers of three nodes: a weighted path and a triangle, joined by
/// coupling edges of unequal weight.
pub fn small_multilayer() -> MultilayerNetwork {
    let intra = [
        IntraEdge::new(0, 0, 1, 1.0),
        IntraEdge::new(0, 1, 2, 2.0),
        IntraEdge::new(1, 0, 1, 1.0),
        IntraEdge::new(1, 1, 2, 1.0),
        IntraEdge::new(1, 0, 2, 0.5),
    ];
    let inter = InterSpec::Edges(vec![InterEdge::new(0, 0, 1, 1.0), InterEdge::new(2, 0, 1, 0.5)]);
    build_network(&intra, &inter, 3, 2).unwrap()
}

/// Random graph with `layers` layers of `n` nodes, each pair present with
/// probability `p`, weights drawn from `{1, 2}` if `weighted`.
pub fn random_net(n: usize, layers: usize, p: f64, weighted: bool, coupling: CouplingPreset, seed: u64) -> MultilayerNetwork {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut intra = Vec::new();
    for l in 0..layers {
        for u in 0..n {
            for v in u + 1..n {
                if rng.random::<f64>() < p {
                    let w = if weighted { rng.random_range(1..=2) as f64 } else { 1.0 };
                    intra.push(IntraEdge::new(l, u, v, w));
                }
            }
        }
    }
    if intra.is_empty() {
        intra.push(IntraEdge::new(0, 0, 1, 1.0));
    }
    build_network(&intra, &InterSpec::Preset(coupling), n, layers).unwrap()
}

/// Dense modularity straight from the definition, diagonal included.
pub fn dense_modularity(net: &MultilayerNetwork, labels: &[usize], gamma: f64, omega: f64) -> f64 {
    let n = net.n_node_layers();
    let mut two_mu = 0.0;
    for i in 0..n {
        for j in 0..n {
            two_mu += net.intra().get(i, j) + omega * net.inter().get(i, j);
        }
    }
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            if labels[i] != labels[j] {
                continue;
            }
            let mut b = net.intra().get(i, j) + omega * net.inter().get(i, j);
            if net.layer_of(i) == net.layer_of(j) {
                let m = net.layer_mass(net.layer_of(i));
                if m > 0.0 {
                    b -= gamma * net.strength(i) * net.strength(j) / (2.0 * m);
                }
            }
            q += b;
        }
    }
    q / two_mu
}

/// Every set partition of `0..n` as restricted growth strings.
pub fn all_partitions(n: usize) -> Vec<Vec<usize>> {
    fn rec(labels: &mut Vec<usize>, n: usize, max: usize, out: &mut Vec<Vec<usize>>) {
        if labels.len() == n {
            out.push(labels.clone());
            return;
        }
        for l in 0..=max + 1 {
            labels.push(l);
            let next = if l > max { l } else { max };
            rec(labels, n, next, out);
            labels.pop();
        }
    }
    let mut out = Vec::new();
    if n == 0 {
        return out;
    }
    let mut labels = vec![0];
    rec(&mut labels, n, 0, &mut out);
    out
}

/// Best modularity over all partitions (small networks only).
pub fn brute_force_optimum(net: &MultilayerNetwork, gamma: f64, omega: f64) -> (Vec<usize>, f64) {
    all_partitions(net.n_node_layers())
        .into_iter()
        .map(|p| {
            let q = dense_modularity(net, &p, gamma, omega);
            (p, q)
        })
        .fold((Vec::new(), f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best })
}

pub fn same_partition(a: &[usize], b: &[usize]) -> bool {
    Partition::new(a.to_vec()).canonicalize() == Partition::new(b.to_vec()).canonicalize()
}
