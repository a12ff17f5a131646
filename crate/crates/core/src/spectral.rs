//! Spectral partition of the supra-modularity matrix `B = A - gamma P + omega C`,
//! used to seed belief propagation when the coupling is strong.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::graph::MultilayerNetwork;
use crate::metrics::Partition;

/// Below this many node-layers the matrix is materialized and diagonalized
/// directly.
pub const DENSE_LIMIT: usize = 400;

const RESIDUAL_TOL: f64 = 1e-6;

/// Largest Krylov basis Lanczos will build before giving up.
const MAX_KRYLOV: usize = 1000;

/// Matrix-free supra-modularity operator. The per-layer null model is applied
/// as the rank-one update `d (d^T x) / (2 m_l)`.
#[derive(Debug, Clone, Copy)]
pub struct SupraModularity<'a> {
    net: &'a MultilayerNetwork,
    gamma: f64,
    omega: f64,
}

impl<'a> SupraModularity<'a> {
    pub fn new(net: &'a MultilayerNetwork, gamma: f64, omega: f64) -> Result<Self> {
        for (name, v) in [("gamma", gamma), ("omega", omega)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter(format!("{name} = {v}")));
            }
        }
        Ok(Self { net, gamma, omega })
    }

    pub fn dim(&self) -> usize {
        self.net.n_node_layers()
    }

    /// `y = B x`.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        self.net.intra().mul_add(x, 1.0, y);
        if self.omega != 0.0 {
            self.net.inter().mul_add(x, self.omega, y);
        }
        if self.gamma != 0.0 {
            let d = self.net.strengths();
            for layer in 0..self.net.n_layers() {
                let m = self.net.layer_mass(layer);
                if m <= 0.0 {
                    continue;
                }
                let r = self.net.layer_range(layer);
                let dot: f64 = r.clone().map(|i| d[i] * x[i]).sum();
                let s = self.gamma * dot / (2.0 * m);
                for i in r {
                    y[i] -= s * d[i];
                }
            }
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut b = DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            self.apply(&e, &mut col);
            b.column_mut(j).copy_from_slice(&col);
            e[j] = 0.0;
        }
        b
    }
}

/// Eigenpairs sorted by non-increasing eigenvalue.
#[derive(Debug, Clone)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    /// Unit eigenvectors, one per value.
    pub vectors: Vec<Vec<f64>>,
}

fn top_of_symmetric(m: DMatrix<f64>, k: usize) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    order.truncate(k);
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_columns(
        &order
            .iter()
            .map(|&i| eig.eigenvectors.column(i).into_owned())
            .collect::<Vec<_>>(),
    );
    (values, vectors)
}

/// Leading `k` eigenpairs by dense diagonalization.
pub fn dense_leading(op: &SupraModularity<'_>, k: usize) -> EigenPairs {
    let (values, vecs) = top_of_symmetric(op.to_dense(), k);
    EigenPairs {
        values,
        vectors: vecs.column_iter().map(|c| c.iter().copied().collect()).collect(),
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Orthogonalizes `v` against `basis` twice and returns the remaining norm.
fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) -> f64 {
    for _ in 0..2 {
        for b in basis {
            let c = dot(v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
    }
    norm(v)
}

/// Leading `k` eigenpairs by Lanczos with full reorthogonalization. The
/// Krylov dimension doubles until every wanted Ritz pair has residual
/// `||Bv - lambda v|| <= 1e-6`.
pub fn lanczos_leading(op: &SupraModularity<'_>, k: usize, seed: u64) -> Result<EigenPairs> {
    let n = op.dim();
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!(
            "cannot extract {k} eigenpairs of a {n}-dimensional operator"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut random_unit = |basis: &[Vec<f64>]| -> Option<Vec<f64>> {
        for _ in 0..5 {
            let mut v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let r = orthogonalize(&mut v, basis);
            if r > 1e-8 {
                v.iter_mut().for_each(|x| *x /= r);
                return Some(v);
            }
        }
        None
    };

    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![0.0; n];
    let cap = n.min(MAX_KRYLOV.max(k + 1));
    let mut target = (2 * k + 20).max(40).min(cap);
    let mut next = random_unit(&basis);
    let mut worst: f64;
    loop {
        while basis.len() < target {
            let Some(v) = next.take() else { break };
            op.apply(&v, &mut w);
            let a = dot(&w, &v);
            basis.push(v);
            alpha.push(a);
            let r = orthogonalize(&mut w, &basis);
            let scale = alpha.iter().fold(1.0f64, |m, x| m.max(x.abs()));
            if r > 1e-10 * scale {
                beta.push(r);
                next = Some(w.iter().map(|x| x / r).collect());
            } else {
                // invariant subspace found; restart in its complement
                beta.push(0.0);
                next = random_unit(&basis);
            }
        }
        let m = basis.len();
        let mut t = DMatrix::zeros(m, m);
        for i in 0..m {
            t[(i, i)] = alpha[i];
            if i + 1 < m {
                t[(i, i + 1)] = beta[i];
                t[(i + 1, i)] = beta[i];
            }
        }
        let want = k.min(m);
        let (values, s) = top_of_symmetric(t, want);
        let mut vectors = Vec::with_capacity(want);
        worst = 0.0;
        let mut bv = vec![0.0; n];
        for (j, &lambda) in values.iter().enumerate() {
            let mut v = vec![0.0; n];
            for (i, b) in basis.iter().enumerate() {
                let c = s[(i, j)];
                v.iter_mut().zip(b).for_each(|(x, y)| *x += c * y);
            }
            let nv = norm(&v);
            v.iter_mut().for_each(|x| *x /= nv);
            op.apply(&v, &mut bv);
            let res = bv.iter().zip(&v).map(|(a, b)| (a - lambda * b).powi(2)).sum::<f64>().sqrt();
            worst = worst.max(res);
            vectors.push(v);
        }
        if want == k && worst <= RESIDUAL_TOL {
            return Ok(EigenPairs { values, vectors });
        }
        if m >= cap || next.is_none() {
            break;
        }
        target = (2 * target).min(cap);
    }
    Err(Error::NoConvergence {
        what: "Lanczos eigensolver",
        iterations: basis.len(),
        residual: worst,
    })
}

/// Leading `k` eigenpairs, dense for small operators and Lanczos otherwise.
pub fn leading_eigenpairs(op: &SupraModularity<'_>, k: usize, seed: u64) -> Result<EigenPairs> {
    if op.dim() <= DENSE_LIMIT {
        if k == 0 || k > op.dim() {
            return Err(Error::InvalidParameter(format!(
                "cannot extract {k} eigenpairs of a {}-dimensional operator",
                op.dim()
            )));
        }
        Ok(dense_leading(op, k))
    } else {
        lanczos_leading(op, k, seed)
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Seeded k-means (k-means++ seeding, Lloyd iterations, best inertia over
/// `restarts`). Returns labels and the inertia.
pub fn kmeans(points: &[Vec<f64>], k: usize, restarts: usize, seed: u64) -> (Vec<usize>, f64) {
    let n = points.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(Vec<usize>, f64)> = None;
    for _ in 0..restarts.max(1) {
        let mut centers: Vec<Vec<f64>> = vec![points[rng.random_range(0..n)].clone()];
        let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
        while centers.len() < k.min(n) {
            let total: f64 = d2.iter().sum();
            let pick = if total > 0.0 {
                let mut r = rng.random::<f64>() * total;
                let mut idx = n - 1;
                for (i, &d) in d2.iter().enumerate() {
                    if r < d {
                        idx = i;
                        break;
                    }
                    r -= d;
                }
                idx
            } else {
                rng.random_range(0..n)
            };
            centers.push(points[pick].clone());
            let c = centers.last().unwrap();
            for (d, p) in d2.iter_mut().zip(points) {
                *d = d.min(sq_dist(p, c));
            }
        }
        let mut labels = vec![usize::MAX; n];
        for _ in 0..300 {
            let mut moved = false;
            for (i, p) in points.iter().enumerate() {
                let mut arg = 0;
                let mut min = f64::INFINITY;
                for (c, center) in centers.iter().enumerate() {
                    let d = sq_dist(p, center);
                    if d < min {
                        min = d;
                        arg = c;
                    }
                }
                if labels[i] != arg {
                    labels[i] = arg;
                    moved = true;
                }
            }
            if !moved {
                break;
            }
            let dim = points[0].len();
            let mut sums = vec![vec![0.0; dim]; centers.len()];
            let mut counts = vec![0usize; centers.len()];
            for (p, &l) in points.iter().zip(&labels) {
                counts[l] += 1;
                sums[l].iter_mut().zip(p).for_each(|(s, x)| *s += x);
            }
            for (c, (s, &cnt)) in sums.into_iter().zip(&counts).enumerate() {
                if cnt > 0 {
                    centers[c] = s.into_iter().map(|x| x / cnt as f64).collect();
                }
            }
        }
        let inertia: f64 = points
            .iter()
            .zip(&labels)
            .map(|(p, &l)| sq_dist(p, &centers[l]))
            .sum();
        if best.as_ref().is_none_or(|(_, b)| inertia < *b) {
            best = Some((labels, inertia));
        }
    }
    best.expect("at least one restart")
}

/// K-means on the `q_max - 1` leading eigenvectors of `B`, with `q_max`
/// clusters. Labels are renumbered densely.
pub fn spectral_partition(
    net: &MultilayerNetwork,
    gamma: f64,
    omega: f64,
    q_max: usize,
    seed: u64,
) -> Result<Partition> {
    if q_max < 2 {
        return Err(Error::InvalidParameter(format!(
            "q_max must be at least 2, got {q_max}"
        )));
    }
    let op = SupraModularity::new(net, gamma, omega)?;
    let n = op.dim();
    let k = (q_max - 1).min(n);
    let pairs = leading_eigenpairs(&op, k, seed)?;
    let points: Vec<Vec<f64>> = (0..n)
        .map(|i| pairs.vectors.iter().map(|v| v[i]).collect())
        .collect();
    let (labels, _) = kmeans(&points, q_max, 10, seed);
    Ok(Partition::new(labels).canonicalize())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_network, CouplingPreset, InterSpec, IntraEdge};

    fn two_cliques() -> MultilayerNetwork {
        let mut edges = Vec::new();
        for base in [0, 5] {
            for u in 0..5 {
                for v in u + 1..5 {
                    edges.push(IntraEdge::new(0, base + u, base + v, 1.0));
                }
            }
        }
        build_network(&edges, &InterSpec::Preset(CouplingPreset::None), 10, 1).unwrap()
    }

    #[test]
    fn single_layer_rows_sum_to_zero() {
        let net = two_cliques();
        let op = SupraModularity::new(&net, 1.0, 0.0).unwrap();
        let ones = vec![1.0; 10];
        let mut y = vec![0.0; 10];
        op.apply(&ones, &mut y);
        assert!(y.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn cliques_split() {
        let net = two_cliques();
        let p = spectral_partition(&net, 1.0, 0.0, 2, 1).unwrap();
        assert_eq!(p.labels(), &[0, 0, 0, 0, 0, 1, 1, 1, 1, 1]);
    }

    #[test]
    fn kmeans_separates_obvious_clusters() {
        let pts = vec![vec![0.0], vec![0.1], vec![10.0], vec![10.2]];
        let (labels, inertia) = kmeans(&pts, 2, 10, 0);
        assert_eq!(labels[0], labels[1]);
        assert_ne!(labels[1], labels[2]);
        assert!((inertia - (0.005 + 0.02)).abs() < 1e-12);
    }
}
