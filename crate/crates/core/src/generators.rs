//! Synthetic benchmarks: planted-partition SBM, the dynamic SBM with label
//! persistence, and a Dirichlet-null multilayer partition with
//! degree-corrected intralayer edges.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};
use crate::graph::{build_network, CouplingPreset, InterSpec, IntraEdge, MultilayerNetwork};
use crate::metrics::Partition;

fn probability(name: &str, p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return Err(Error::Infeasible(format!("{name} = {p} is not a probability")));
    }
    Ok(p)
}

/// Bernoulli edges for one layer given labels and `p_in`/`p_out`.
fn sample_sbm_layer(
    rng: &mut ChaCha8Rng,
    layer: usize,
    labels: &[usize],
    p_in: f64,
    p_out: f64,
    out: &mut Vec<IntraEdge>,
) {
    let n = labels.len();
    for u in 0..n {
        for v in u + 1..n {
            let p = if labels[u] == labels[v] { p_in } else { p_out };
            if rng.random::<f64>() < p {
                out.push(IntraEdge::new(layer, u, v, 1.0));
            }
        }
    }
}

/// Single-layer planted-partition SBM with mean degree `c_avg` and
/// `p_out = epsilon * p_in`. Communities are contiguous blocks of `sizes`
/// (equal sizes by default).
pub fn planted_partition_sbm(
    n: usize,
    q: usize,
    c_avg: f64,
    epsilon: f64,
    sizes: Option<&[usize]>,
    seed: u64,
) -> Result<(MultilayerNetwork, Partition)> {
    if q == 0 || n < q {
        return Err(Error::Infeasible(format!("{q} communities on {n} nodes")));
    }
    probability("epsilon", epsilon)?;
    let sizes: Vec<usize> = match sizes {
        Some(s) => {
            if s.len() != q || s.iter().sum::<usize>() != n {
                return Err(Error::Infeasible(format!(
                    "sizes {s:?} do not split {n} nodes into {q} communities"
                )));
            }
            s.to_vec()
        }
        None => (0..q).map(|r| n / q + usize::from(r < n % q)).collect(),
    };
    let within: f64 = sizes.iter().map(|&s| (s * s.saturating_sub(1)) as f64).sum();
    let total: f64 = sizes.iter().map(|&s| s as f64).sum::<f64>().powi(2)
        - sizes.iter().map(|&s| (s * s) as f64).sum::<f64>();
    let p_in = probability("p_in", c_avg * n as f64 / (within + epsilon * total))?;
    let p_out = epsilon * p_in;
    let labels: Vec<usize> = sizes
        .iter()
        .enumerate()
        .flat_map(|(r, &s)| std::iter::repeat_n(r, s))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    sample_sbm_layer(&mut rng, 0, &labels, p_in, p_out, &mut edges);
    let net = build_network(&edges, &InterSpec::Preset(CouplingPreset::None), n, 1)?;
    Ok((net, Partition::new(labels)))
}

/// Parameters of the dynamic SBM.
#[derive(Debug, Clone, PartialEq)]
pub struct DsbmParams {
    pub n: usize,
    pub layers: usize,
    pub q_true: usize,
    pub c_avg: f64,
    pub epsilon: f64,
    pub eta: f64,
    pub seed: u64,
}

/// Within-community probability of the dynamic SBM, from
/// `c = p_in n (1 + (q - 1) epsilon) / q`.
pub fn dsbm_p_in(p: &DsbmParams) -> f64 {
    let q = p.q_true as f64;
    p.c_avg * q / (1.0 + (q - 1.0) * p.epsilon) / p.n as f64
}

/// Per-layer SBMs on temporally coupled layers. Layer 0 labels are uniform;
/// each later layer keeps a node's label with probability `eta` and otherwise
/// redraws it uniformly.
pub fn dsbm(params: &DsbmParams) -> Result<(MultilayerNetwork, Partition)> {
    let DsbmParams {
        n,
        layers,
        q_true,
        c_avg,
        epsilon,
        eta,
        seed,
    } = *params;
    if n == 0 || layers == 0 || q_true == 0 {
        return Err(Error::Infeasible("empty dynamic SBM".into()));
    }
    if !(c_avg >= 0.0 && c_avg < n as f64) {
        return Err(Error::Infeasible(format!("mean degree {c_avg} with {n} nodes")));
    }
    probability("epsilon", epsilon)?;
    probability("eta", eta)?;
    let p_in = probability("p_in", dsbm_p_in(params))?;
    let p_out = epsilon * p_in;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels: Vec<usize> = Vec::with_capacity(n * layers);
    for layer in 0..layers {
        for v in 0..n {
            let label = if layer > 0 && rng.random::<f64>() < eta {
                labels[v + n * (layer - 1)]
            } else {
                rng.random_range(0..q_true)
            };
            labels.push(label);
        }
    }
    let mut edges = Vec::new();
    for layer in 0..layers {
        sample_sbm_layer(
            &mut rng,
            layer,
            &labels[layer * n..(layer + 1) * n],
            p_in,
            p_out,
            &mut edges,
        );
    }
    let net = build_network(&edges, &InterSpec::Preset(CouplingPreset::Temporal), n, layers)?;
    Ok((net, Partition::new(labels)))
}

/// Interlayer topology for the Dirichlet-null generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NullCoupling {
    /// Labels copied from the previous layer.
    Temporal,
    /// Labels copied from one uniformly chosen anchor layer.
    Multiplex,
    /// Layers split into this many contiguous blocks; copying stays inside a
    /// block while every layer stays coupled to every other.
    Block(usize),
}

/// Parameters of the Dirichlet-null multilayer partition with DCSBM edges.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletDcsbmParams {
    pub n: usize,
    pub layers: usize,
    pub q: usize,
    pub theta: f64,
    pub p: f64,
    pub mu: f64,
    pub eta_k: f64,
    pub k_min: f64,
    pub k_max: f64,
    pub coupling: NullCoupling,
    pub seed: u64,
}

/// Continuous power law `k^eta` truncated to `[k_min, k_max]`, sampled by
/// inverting its CDF.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedPowerLaw {
    eta: f64,
    k_min: f64,
    k_max: f64,
}

impl TruncatedPowerLaw {
    pub fn new(eta: f64, k_min: f64, k_max: f64) -> Result<Self> {
        if !(k_min > 0.0 && k_min <= k_max && k_max.is_finite() && eta.is_finite()) {
            return Err(Error::Infeasible(format!(
                "power law on [{k_min}, {k_max}] with exponent {eta}"
            )));
        }
        Ok(Self { eta, k_min, k_max })
    }

    /// Value at CDF level `u` in `[0, 1]`.
    pub fn quantile(&self, u: f64) -> f64 {
        let a = self.eta + 1.0;
        if a.abs() < 1e-12 {
            self.k_min * (self.k_max / self.k_min).powf(u)
        } else {
            let lo = self.k_min.powf(a);
            let hi = self.k_max.powf(a);
            (lo + u * (hi - lo)).powf(1.0 / a)
        }
    }

    /// `E[k^r]`.
    pub fn moment(&self, r: f64) -> f64 {
        let integral = |s: f64| {
            if s.abs() < 1e-12 {
                (self.k_max / self.k_min).ln()
            } else {
                (self.k_max.powf(s) - self.k_min.powf(s)) / s
            }
        };
        integral(self.eta + 1.0 + r) / integral(self.eta + 1.0)
    }
}

impl Distribution<f64> for TruncatedPowerLaw {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile(rng.random())
    }
}

fn categorical(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let mut u = rng.random::<f64>();
    for (t, &w) in weights.iter().enumerate() {
        if u < w {
            return t;
        }
        u -= w;
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// Community weights drawn from a symmetric Dirichlet via normalized gammas.
fn dirichlet(rng: &mut ChaCha8Rng, q: usize, theta: f64) -> Result<Vec<f64>> {
    let gamma = Gamma::new(theta, 1.0)
        .map_err(|e| Error::Infeasible(format!("Dirichlet concentration {theta}: {e}")))?;
    let mut w: Vec<f64> = (0..q).map(|_| gamma.sample(rng)).collect();
    let z: f64 = w.iter().sum();
    if z > 0.0 {
        w.iter_mut().for_each(|x| *x /= z);
    } else {
        // every draw underflowed: all mass on one community
        let t = rng.random_range(0..q);
        w.iter_mut().enumerate().for_each(|(s, x)| *x = f64::from(u8::from(s == t)));
    }
    Ok(w)
}

/// Dirichlet-null multilayer partition with degree-corrected intralayer
/// edges. A node-layer keeps the label of its source layer with probability
/// `p` and otherwise redraws from the Dirichlet weights. Edges between `i`
/// and `j` in one layer appear with probability `1 - exp(-lambda_ij)` where
/// `lambda_ij = (1 - mu) k_i k_j / kappa_g [same group g] + mu k_i k_j / (2M)`.
pub fn dirichlet_dcsbm(params: &DirichletDcsbmParams) -> Result<(MultilayerNetwork, Partition)> {
    let p = params;
    if p.n == 0 || p.layers == 0 || p.q == 0 {
        return Err(Error::Infeasible("empty Dirichlet-null network".into()));
    }
    if p.theta.is_nan() || p.theta <= 0.0 {
        return Err(Error::Infeasible(format!("concentration {}", p.theta)));
    }
    probability("p", p.p)?;
    probability("mu", p.mu)?;
    if p.k_max >= p.n as f64 {
        return Err(Error::Infeasible(format!(
            "k_max {} must be below n = {}",
            p.k_max, p.n
        )));
    }
    let degrees = TruncatedPowerLaw::new(p.eta_k, p.k_min, p.k_max)?;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let weights = dirichlet(&mut rng, p.q, p.theta)?;
    let n = p.n;

    let (blocks, preset) = match p.coupling {
        NullCoupling::Temporal => (1, CouplingPreset::Temporal),
        NullCoupling::Multiplex => (1, CouplingPreset::Multiplex),
        NullCoupling::Block(b) => {
            if b == 0 || b > p.layers {
                return Err(Error::Infeasible(format!(
                    "{b} blocks over {} layers",
                    p.layers
                )));
            }
            (b, CouplingPreset::Multiplex)
        }
    };

    let mut labels = vec![0usize; n * p.layers];
    match p.coupling {
        NullCoupling::Temporal => {
            for layer in 0..p.layers {
                for v in 0..n {
                    labels[v + n * layer] = if layer > 0 && rng.random::<f64>() < p.p {
                        labels[v + n * (layer - 1)]
                    } else {
                        categorical(&mut rng, &weights)
                    };
                }
            }
        }
        NullCoupling::Multiplex | NullCoupling::Block(_) => {
            for b in 0..blocks {
                let lo = b * p.layers / blocks;
                let hi = (b + 1) * p.layers / blocks;
                let anchor = rng.random_range(lo..hi);
                for v in 0..n {
                    labels[v + n * anchor] = categorical(&mut rng, &weights);
                }
                for layer in (lo..hi).filter(|&l| l != anchor) {
                    for v in 0..n {
                        labels[v + n * layer] = if rng.random::<f64>() < p.p {
                            labels[v + n * anchor]
                        } else {
                            categorical(&mut rng, &weights)
                        };
                    }
                }
            }
        }
    }

    let mut edges = Vec::new();
    let mut k = vec![0.0; n];
    let mut kappa = vec![0.0; p.q];
    for layer in 0..p.layers {
        let lab = &labels[layer * n..(layer + 1) * n];
        k.iter_mut().for_each(|x| *x = degrees.sample(&mut rng));
        kappa.iter_mut().for_each(|x| *x = 0.0);
        for v in 0..n {
            kappa[lab[v]] += k[v];
        }
        let two_m: f64 = k.iter().sum();
        for u in 0..n {
            for v in u + 1..n {
                let kk = k[u] * k[v];
                let mut lambda = p.mu * kk / two_m;
                if lab[u] == lab[v] {
                    lambda += (1.0 - p.mu) * kk / kappa[lab[u]];
                }
                if rng.random::<f64>() < -(-lambda).exp_m1() {
                    edges.push(IntraEdge::new(layer, u, v, 1.0));
                }
            }
        }
    }
    let net = build_network(&edges, &InterSpec::Preset(preset), n, p.layers)?;
    Ok((net, Partition::new(labels)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_epsilon_has_no_cross_edges() {
        let (net, part) = planted_partition_sbm(60, 3, 5.0, 0.0, None, 1).unwrap();
        for e in net.intra_edges() {
            assert_eq!(part.labels()[e.u], part.labels()[e.v]);
        }
    }

    #[test]
    fn infeasible_density_is_rejected() {
        assert!(matches!(
            planted_partition_sbm(10, 2, 9.5, 0.0, None, 1),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn full_persistence_keeps_labels() {
        let params = DsbmParams {
            n: 30,
            layers: 4,
            q_true: 3,
            c_avg: 4.0,
            epsilon: 0.2,
            eta: 1.0,
            seed: 9,
        };
        let (net, part) = dsbm(&params).unwrap();
        assert_eq!(net.n_layers(), 4);
        for layer in 1..4 {
            assert_eq!(part.slice(0..30), part.slice(layer * 30..(layer + 1) * 30));
        }
        assert_eq!(dsbm(&params).unwrap().0, net);
    }

    #[test]
    fn power_law_mean() {
        let d = TruncatedPowerLaw::new(-2.0, 3.0, 30.0).unwrap();
        assert!((d.moment(1.0) - 10f64.ln() / 0.3).abs() < 1e-12);
        assert_eq!(d.quantile(0.0), 3.0);
        assert!((d.quantile(1.0) - 30.0).abs() < 1e-12);
    }

    #[test]
    fn no_mixing_keeps_edges_inside_groups() {
        let params = DirichletDcsbmParams {
            n: 80,
            layers: 3,
            q: 3,
            theta: 1.0,
            p: 0.5,
            mu: 0.0,
            eta_k: -2.0,
            k_min: 3.0,
            k_max: 30.0,
            coupling: NullCoupling::Block(2),
            seed: 4,
        };
        let (net, part) = dirichlet_dcsbm(&params).unwrap();
        for e in net.intra_edges() {
            let base = e.layer * 80;
            assert_eq!(part.labels()[base + e.u], part.labels()[base + e.v]);
        }
    }
}
