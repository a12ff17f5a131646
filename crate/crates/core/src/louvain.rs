//! Greedy multilayer modularity maximization in the Louvain style: local
//! moves of node-layers between neighboring communities, then aggregation of
//! communities into super-nodes, repeated until nothing moves.
//!
//! Super-nodes keep one degree total per layer, so the null-model penalty of
//! a move is always taken against the right `m_l`.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::MultilayerNetwork;
use crate::metrics::{self, Partition};

const MOVE_EPS: f64 = 1e-10;
const ITERATE_TOL: f64 = 1e-10;

/// Whole-partition re-evaluation of each move is done only below this size.
const CHECK_LIMIT: usize = 64;

/// Options of [`greedy_multilayer_louvain`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LouvainOptions {
    pub gamma: f64,
    pub omega: f64,
    pub seed: u64,
    /// Restart from the previous output until the modularity stops improving.
    pub iterate: bool,
    /// Pick uniformly among improving moves instead of the best one.
    pub random_moves: bool,
}

impl LouvainOptions {
    pub fn new(gamma: f64, omega: f64, seed: u64) -> Self {
        Self {
            gamma,
            omega,
            seed,
            iterate: false,
            random_moves: false,
        }
    }
}

/// Aggregated graph: symmetric weights between distinct super-nodes and
/// per-layer degree totals.
struct Level {
    adj: Vec<Vec<(usize, f64)>>,
    deg: Vec<Vec<(usize, f64)>>,
}

impl Level {
    fn base(net: &MultilayerNetwork, omega: f64) -> Self {
        let n = net.n_node_layers();
        let adj = (0..n)
            .map(|i| {
                let mut row: Vec<(usize, f64)> = net.intra().row(i).collect();
                if omega > 0.0 {
                    row.extend(net.inter().row(i).map(|(j, c)| (j, omega * c)));
                }
                row
            })
            .collect();
        let deg = (0..n)
            .map(|i| {
                let d = net.strength(i);
                if d > 0.0 {
                    vec![(net.layer_of(i), d)]
                } else {
                    Vec::new()
                }
            })
            .collect();
        Self { adj, deg }
    }

    fn len(&self) -> usize {
        self.adj.len()
    }

    /// Collapses communities (dense labels `0..k`) into super-nodes.
    fn aggregate(&self, comm: &[usize], k: usize) -> Self {
        let mut adj_maps: Vec<std::collections::BTreeMap<usize, f64>> = vec![Default::default(); k];
        let mut deg_maps: Vec<std::collections::BTreeMap<usize, f64>> = vec![Default::default(); k];
        for u in 0..self.len() {
            let cu = comm[u];
            for &(v, w) in &self.adj[u] {
                let cv = comm[v];
                if cu != cv {
                    *adj_maps[cu].entry(cv).or_insert(0.0) += w;
                }
            }
            for &(l, d) in &self.deg[u] {
                *deg_maps[cu].entry(l).or_insert(0.0) += d;
            }
        }
        Self {
            adj: adj_maps.into_iter().map(|m| m.into_iter().collect()).collect(),
            deg: deg_maps.into_iter().map(|m| m.into_iter().collect()).collect(),
        }
    }
}

struct Mover<'a> {
    level: &'a Level,
    gamma: f64,
    /// `1 / (2 m_l)`, zero for empty layers.
    inv_mass: Vec<f64>,
    n_layers: usize,
    comm: Vec<usize>,
    totals: Vec<f64>,
}

impl Mover<'_> {
    fn total(&self, c: usize, l: usize) -> f64 {
        self.totals[c * self.n_layers + l]
    }

    fn shift(&mut self, u: usize, c: usize, sign: f64) {
        for &(l, d) in &self.level.deg[u] {
            self.totals[c * self.n_layers + l] += sign * d;
        }
    }

    /// Penalty `2 gamma sum_l D_u,l T_c,l / (2 m_l)` with `u` removed from its
    /// own community.
    fn penalty(&self, u: usize, c: usize) -> f64 {
        let own = self.comm[u] == c;
        let mut s = 0.0;
        for &(l, d) in &self.level.deg[u] {
            let t = self.total(c, l) - if own { d } else { 0.0 };
            s += d * t * self.inv_mass[l];
        }
        2.0 * self.gamma * s
    }
}

#[allow(clippy::too_many_arguments)]
fn local_moves(
    net: &MultilayerNetwork,
    level: &Level,
    start: Vec<usize>,
    gamma: f64,
    omega: f64,
    random_moves: bool,
    rng: &mut ChaCha8Rng,
    check: bool,
) -> (Vec<usize>, bool) {
    let n = level.len();
    let n_layers = net.n_layers();
    let inv_mass = net
        .layer_masses()
        .iter()
        .map(|&m| if m > 0.0 { 1.0 / (2.0 * m) } else { 0.0 })
        .collect();
    let mut mv = Mover {
        level,
        gamma,
        inv_mass,
        n_layers,
        comm: start,
        totals: vec![0.0; n * n_layers],
    };
    for u in 0..n {
        mv.shift(u, mv.comm[u], 1.0);
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut weight_to = vec![0.0; n];
    let mut touched: Vec<usize> = Vec::new();
    let mut options: Vec<(usize, f64)> = Vec::new();
    let mut any = false;
    loop {
        order.shuffle(rng);
        let mut moved = false;
        for &u in &order {
            let a = mv.comm[u];
            touched.clear();
            touched.push(a);
            weight_to[a] = 0.0;
            for &(v, w) in &level.adj[u] {
                let c = mv.comm[v];
                if !touched.contains(&c) {
                    touched.push(c);
                }
                weight_to[c] += w;
            }
            let stay = 2.0 * weight_to[a] - mv.penalty(u, a);
            options.clear();
            for &c in &touched {
                if c != a {
                    let gain = 2.0 * weight_to[c] - mv.penalty(u, c) - stay;
                    if gain > MOVE_EPS {
                        options.push((c, gain));
                    }
                }
            }
            for &c in &touched {
                weight_to[c] = 0.0;
            }
            let choice = if random_moves && !options.is_empty() {
                Some(options[rng.random_range(0..options.len())])
            } else {
                options
                    .iter()
                    .copied()
                    .fold(None, |best: Option<(usize, f64)>, o| match best {
                        Some(b) if b.1 >= o.1 => Some(b),
                        _ => Some(o),
                    })
            };
            if let Some((c, gain)) = choice {
                let before = check.then(|| raw(net, &mv.comm, gamma, omega));
                mv.shift(u, a, -1.0);
                mv.shift(u, c, 1.0);
                mv.comm[u] = c;
                if let Some(before) = before {
                    let after = raw(net, &mv.comm, gamma, omega);
                    debug_assert!(
                        ((after - before) - gain).abs() <= 1e-9 * (1.0 + after.abs()),
                        "move gain {gain} disagrees with re-evaluation {}",
                        after - before
                    );
                }
                moved = true;
                any = true;
            }
        }
        if !moved {
            break;
        }
    }
    (mv.comm, any)
}

fn raw(net: &MultilayerNetwork, labels: &[usize], gamma: f64, omega: f64) -> f64 {
    metrics::modularity_raw(net, &Partition::new(labels.to_vec()), gamma, omega)
        .expect("labels cover every node-layer")
}

fn dense(labels: &mut [usize]) -> usize {
    let mut map = std::collections::HashMap::new();
    for l in labels.iter_mut() {
        let next = map.len();
        *l = *map.entry(*l).or_insert(next);
    }
    map.len()
}

/// One full Louvain run starting from `start` (one label per node-layer).
fn single_run(
    net: &MultilayerNetwork,
    opts: &LouvainOptions,
    mut comm: Vec<usize>,
    rng: &mut ChaCha8Rng,
) -> Vec<usize> {
    dense(&mut comm);
    let mut level = Level::base(net, opts.omega);
    // node-layer -> super-node of the current level
    let mut membership: Vec<usize> = (0..net.n_node_layers()).collect();
    let mut first = true;
    loop {
        let check = first && cfg!(debug_assertions) && net.n_node_layers() <= CHECK_LIMIT;
        let (mut moved, any) =
            local_moves(net, &level, comm, opts.gamma, opts.omega, opts.random_moves, rng, check);
        let k = dense(&mut moved);
        for m in membership.iter_mut() {
            *m = moved[*m];
        }
        if !any && k == level.len() {
            return membership;
        }
        level = level.aggregate(&moved, k);
        comm = (0..k).collect();
        first = false;
    }
}

/// Greedy maximization of the multilayer modularity. Returns the partition
/// and its normalized modularity.
pub fn greedy_multilayer_louvain(net: &MultilayerNetwork, opts: &LouvainOptions) -> Result<(Partition, f64)> {
    for (name, v) in [("gamma", opts.gamma), ("omega", opts.omega)] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::InvalidParameter(format!("{name} = {v}")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let n = net.n_node_layers();
    let mut labels = single_run(net, opts, (0..n).collect(), &mut rng);
    let mut best = raw(net, &labels, opts.gamma, opts.omega);
    if opts.iterate {
        loop {
            let next = single_run(net, opts, labels.clone(), &mut rng);
            let value = raw(net, &next, opts.gamma, opts.omega);
            if value - best < ITERATE_TOL * best.abs().max(1.0) {
                if value > best {
                    labels = next;
                }
                break;
            }
            labels = next;
            best = value;
        }
    }
    let part = Partition::new(labels).canonicalize();
    let q = metrics::modularity(net, &part, opts.gamma, opts.omega)?;
    Ok((part, q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_network, CouplingPreset, InterSpec, IntraEdge};

    fn two_triangles() -> MultilayerNetwork {
        let e = |u, v| IntraEdge::new(0, u, v, 1.0);
        build_network(
            &[e(0, 1), e(1, 2), e(0, 2), e(3, 4), e(4, 5), e(3, 5), e(2, 3)],
            &InterSpec::Preset(CouplingPreset::None),
            6,
            1,
        )
        .unwrap()
    }

    #[test]
    fn splits_two_triangles() {
        let (p, q) = greedy_multilayer_louvain(&two_triangles(), &LouvainOptions::new(1.0, 0.0, 3)).unwrap();
        assert_eq!(p.labels(), &[0, 0, 0, 1, 1, 1]);
        assert!((q - 5.0 / 14.0).abs() < 1e-12);
    }

    #[test]
    fn zero_resolution_finds_components() {
        let e = |u, v| IntraEdge::new(0, u, v, 1.0);
        let net = build_network(
            &[e(0, 1), e(1, 2), e(3, 4)],
            &InterSpec::Preset(CouplingPreset::None),
            6,
            1,
        )
        .unwrap();
        let (p, _) = greedy_multilayer_louvain(&net, &LouvainOptions::new(0.0, 0.0, 1)).unwrap();
        assert_eq!(p.labels(), &[0, 0, 0, 1, 1, 2]);
    }

    #[test]
    fn iterated_and_random_variants_run() {
        let net = two_triangles();
        let mut opts = LouvainOptions::new(1.0, 0.0, 5);
        opts.iterate = true;
        opts.random_moves = true;
        let (p, _) = greedy_multilayer_louvain(&net, &opts).unwrap();
        assert_eq!(p.labels(), &[0, 0, 0, 1, 1, 1]);
    }
}
