//! Scalar reference implementations shared by the oracle tests.

use std::collections::HashMap;

use multilayer_bp::bp::{BeliefState, BpParams};
use multilayer_bp::{MultilayerNetwork, Partition};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

pub type Messages = HashMap<(usize, usize), Vec<f64>>;

pub fn snapshot(state: &BeliefState) -> Messages {
    let edges = state.edges();
    (0..edges.n_directed())
        .map(|e| ((edges.source(e), edges.target(e)), state.message(e).to_vec()))
        .collect()
}

/// Effective coupling weights `A_ij + omega C_ij` from the stored matrices.
pub fn neighbours(net: &MultilayerNetwork, omega: f64, i: usize) -> Vec<(usize, f64)> {
    (0..net.n_node_layers())
        .filter_map(|j| {
            let w = net.intra().get(i, j) + omega * net.inter().get(i, j);
            (w > 0.0).then_some((j, w))
        })
        .collect()
}

/// Unnormalized belief of `i` over `q` labels, optionally leaving out one neighbour.
pub fn belief(
    net: &MultilayerNetwork,
    msgs: &Messages,
    theta: &[Vec<f64>],
    p: BpParams,
    i: usize,
    skip: Option<usize>,
) -> Vec<f64> {
    let layer = net.layer_of(i);
    let m = net.layer_mass(layer);
    (0..p.q)
        .map(|t| {
            let field = if m > 0.0 {
                (-p.gamma * p.beta * net.strength(i) * theta[layer][t] / (2.0 * m)).exp()
            } else {
                1.0
            };
            let mut prod = field;
            for (j, w) in neighbours(net, p.omega, i) {
                if Some(j) == skip {
                    continue;
                }
                let psi = msgs[&(j, i)][t];
                prod *= 1.0 + psi * ((p.beta * w).exp() - 1.0);
            }
            prod
        })
        .collect()
}

pub fn normalized(v: Vec<f64>) -> Vec<f64> {
    let z: f64 = v.iter().sum();
    v.into_iter().map(|x| x / z).collect()
}

pub fn theta_from(net: &MultilayerNetwork, marg: &[Vec<f64>], q: usize) -> Vec<Vec<f64>> {
    let mut theta = vec![vec![0.0; q]; net.n_layers()];
    for (i, row) in marg.iter().enumerate() {
        for t in 0..q {
            theta[net.layer_of(i)][t] += net.strength(i) * row[t];
        }
    }
    theta
}

pub fn uniform_theta(net: &MultilayerNetwork, q: usize) -> Vec<Vec<f64>> {
    (0..net.n_layers()).map(|l| vec![2.0 * net.layer_mass(l) / q as f64; q]).collect()
}

/// One synchronous sweep evaluated entry by entry: fields from the marginals
/// implied by the starting messages, then every message recomputed.
pub fn oracle_sweep(net: &MultilayerNetwork, msgs: &Messages, p: BpParams) -> Messages {
    let n = net.n_node_layers();
    let marg0: Vec<Vec<f64>> = (0..n)
        .map(|i| normalized(belief(net, msgs, &uniform_theta(net, p.q), p, i, None)))
        .collect();
    let theta = theta_from(net, &marg0, p.q);
    msgs.keys()
        .map(|&(i, k)| ((i, k), normalized(belief(net, msgs, &theta, p, i, Some(k)))))
        .collect()
}

pub fn max_diff(a: &Messages, b: &Messages) -> f64 {
    a.iter()
        .flat_map(|(key, v)| v.iter().zip(&b[key]).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max)
}

/// `f` evaluated directly from the messages and stored fields.
pub fn oracle_bethe(net: &MultilayerNetwork, state: &BeliefState) -> f64 {
    let p = state.params();
    let msgs = snapshot(state);
    let theta: Vec<Vec<f64>> = (0..net.n_layers()).map(|l| state.theta(l).to_vec()).collect();
    let n = net.n_node_layers();
    let mut node = 0.0;
    for i in 0..n {
        node += belief(net, &msgs, &theta, p, i, None).iter().sum::<f64>().ln();
    }
    let mut edge = 0.0;
    for i in 0..n {
        for (j, w) in neighbours(net, p.omega, i) {
            if j < i {
                continue;
            }
            let mut z = 0.0;
            for s in 0..p.q {
                for t in 0..p.q {
                    let b = if s == t { (p.beta * w).exp() } else { 1.0 };
                    z += b * msgs[&(i, j)][s] * msgs[&(j, i)][t];
                }
            }
            edge += z.ln();
        }
    }
    let mut field = 0.0;
    for l in 0..net.n_layers() {
        let m = net.layer_mass(l);
        if m > 0.0 {
            field += p.beta / (4.0 * m) * theta[l].iter().map(|x| x * x).sum::<f64>();
        }
    }
    -(node - edge + field) / (n as f64 * p.beta)
}

pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..n {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

pub fn assignment_cost(cost: &[Vec<f64>], perm: &[usize]) -> f64 {
    perm.iter().enumerate().map(|(r, &c)| cost[r][c]).sum()
}

pub fn brute_force_matching(cost: &[Vec<f64>]) -> f64 {
    permutations(cost.len())
        .iter()
        .map(|p| assignment_cost(cost, p))
        .fold(f64::INFINITY, f64::min)
}

pub fn is_permutation(p: &[usize]) -> bool {
    let mut seen = vec![false; p.len()];
    p.iter().all(|&c| c < p.len() && !std::mem::replace(&mut seen[c], true))
}

/// Scrambles the labels of every layer of `truth` independently.
pub fn fragment(net: &MultilayerNetwork, truth: &Partition, q: usize, rng: &mut ChaCha8Rng) -> Partition {
    let maps: Vec<Vec<usize>> = (0..net.n_layers())
        .map(|_| {
            let mut m: Vec<usize> = (0..q).collect();
            m.shuffle(rng);
            m
        })
        .collect();
    Partition::new(truth.labels().iter().enumerate().map(|(i, &c)| maps[net.layer_of(i)][c]).collect())
}
