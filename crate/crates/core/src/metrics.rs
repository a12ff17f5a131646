//! Partition scoring: multilayer modularity, adjusted mutual information and
//! marginal entropies.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::graph::MultilayerNetwork;

/// Hard community label per node-layer.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Partition {
    labels: Vec<usize>,
}

impl Partition {
    pub fn new(labels: Vec<usize>) -> Self {
        Self { labels }
    }

    /// Every node-layer in community 0.
    pub fn single(n: usize) -> Self {
        Self::new(vec![0; n])
    }

    /// Every node-layer in its own community.
    pub fn singletons(n: usize) -> Self {
        Self::new((0..n).collect())
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn into_labels(self) -> Vec<usize> {
        self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Number of distinct labels present.
    pub fn q_effective(&self) -> usize {
        let mut seen = vec![false; self.label_bound()];
        let mut count = 0;
        for &l in &self.labels {
            if !seen[l] {
                seen[l] = true;
                count += 1;
            }
        }
        count
    }

    /// One past the largest label.
    pub fn label_bound(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    /// Relabels densely in order of first appearance.
    pub fn canonicalize(&self) -> Self {
        let mut map = BTreeMap::new();
        let labels = self
            .labels
            .iter()
            .map(|&l| {
                let next = map.len();
                *map.entry(l).or_insert(next)
            })
            .collect();
        Self::new(labels)
    }

    /// Labels restricted to a node-layer range.
    pub fn slice(&self, range: std::ops::Range<usize>) -> &[usize] {
        &self.labels[range]
    }
}

/// Per node-layer probability vectors over `q` communities, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Marginals {
    q: usize,
    data: Vec<f64>,
}

impl Marginals {
    pub fn new(q: usize, data: Vec<f64>) -> Result<Self> {
        if q == 0 || !data.len().is_multiple_of(q) {
            return Err(Error::InvalidParameter(format!(
                "{} entries do not form rows of length {q}",
                data.len()
            )));
        }
        Ok(Self { q, data })
    }

    pub fn uniform(n: usize, q: usize) -> Self {
        Self {
            q,
            data: vec![1.0 / q as f64; n * q],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let q = rows.first().map_or(0, Vec::len);
        if q == 0 {
            return Err(Error::EmptyInput);
        }
        let mut data = Vec::with_capacity(rows.len() * q);
        for r in rows {
            if r.len() != q {
                return Err(Error::LengthMismatch {
                    expected: q,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self { q, data })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn n_rows(&self) -> usize {
        self.data.len() / self.q
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.q..(i + 1) * self.q]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.q..(i + 1) * self.q]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.q)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Largest deviation of any entry from `1/q`.
    pub fn max_deviation_from_uniform(&self) -> f64 {
        let u = 1.0 / self.q as f64;
        self.data.iter().fold(0.0, |m, &p| m.max((p - u).abs()))
    }
}

/// Unnormalized multilayer modularity
/// `sum_{i,j} (A_ij - gamma P_ij + omega C_ij) delta(c_i, c_j)` over ordered
/// pairs, diagonal included. Layers without edges carry no null-model term.
pub fn modularity_raw(
    net: &MultilayerNetwork,
    part: &Partition,
    gamma: f64,
    omega: f64,
) -> Result<f64> {
    let n = net.n_node_layers();
    if part.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: part.len(),
        });
    }
    let labels = part.labels();
    let mut edge_term = 0.0;
    for (i, j, w) in net.intra().upper_triangle() {
        if labels[i] == labels[j] {
            edge_term += 2.0 * w;
        }
    }
    let mut coupling_term = 0.0;
    for (i, j, w) in net.inter().upper_triangle() {
        if labels[i] == labels[j] {
            coupling_term += 2.0 * w;
        }
    }
    let mut null_term = 0.0;
    let mut totals: BTreeMap<usize, f64> = BTreeMap::new();
    for layer in 0..net.n_layers() {
        let m = net.layer_mass(layer);
        if m <= 0.0 {
            continue;
        }
        totals.clear();
        for i in net.layer_range(layer) {
            *totals.entry(labels[i]).or_insert(0.0) += net.strength(i);
        }
        let mut keys: Vec<_> = totals.keys().copied().collect();
        keys.sort_unstable();
        let sq: f64 = keys.iter().map(|k| totals[k] * totals[k]).sum();
        null_term += sq / (2.0 * m);
    }
    Ok(edge_term - gamma * null_term + omega * coupling_term)
}

/// Total supra strength `2 mu = sum_i (d_i + omega sum_j C_ij)`.
pub fn total_supra_strength(net: &MultilayerNetwork, omega: f64) -> f64 {
    2.0 * net.total_intra_weight() + omega * 2.0 * net.inter().upper_triangle().map(|e| e.2).sum::<f64>()
}

/// Multilayer modularity normalized by the total supra strength.
pub fn modularity(
    net: &MultilayerNetwork,
    part: &Partition,
    gamma: f64,
    omega: f64,
) -> Result<f64> {
    let raw = modularity_raw(net, part, gamma, omega)?;
    let two_mu = total_supra_strength(net, omega);
    if two_mu <= 0.0 {
        return Ok(0.0);
    }
    Ok(raw / two_mu)
}

fn log_factorials(n: usize) -> Vec<f64> {
    let mut table = Vec::with_capacity(n + 1);
    table.push(0.0);
    let mut acc = 0.0;
    for k in 1..=n {
        acc += (k as f64).ln();
        table.push(acc);
    }
    table
}

fn counts(labels: &[usize]) -> BTreeMap<usize, usize> {
    let mut c = BTreeMap::new();
    for &l in labels {
        *c.entry(l).or_insert(0) += 1;
    }
    c
}

fn entropy_of_counts(counts: impl Iterator<Item = usize>, n: f64) -> f64 {
    counts
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

fn same_up_to_relabeling(a: &[usize], b: &[usize]) -> bool {
    let mut fwd = BTreeMap::new();
    let mut bwd = BTreeMap::new();
    a.iter().zip(b).all(|(&x, &y)| {
        *fwd.entry(x).or_insert(y) == y && *bwd.entry(y).or_insert(x) == x
    })
}

/// Adjusted mutual information of two labelings (natural log, permutation
/// model expectation, max-entropy normalization).
pub fn ami_labels(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::EmptyInput);
    }
    if same_up_to_relabeling(a, b) {
        return Ok(1.0);
    }
    let n = a.len();
    let nf = n as f64;
    let ca = counts(a);
    let cb = counts(b);
    let mut joint: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *joint.entry((x, y)).or_insert(0) += 1;
    }

    let mut mi = 0.0;
    for (&(x, y), &nij) in &joint {
        let nij = nij as f64;
        mi += nij / nf * (nf * nij / (ca[&x] as f64 * cb[&y] as f64)).ln();
    }

    let lf = log_factorials(n);
    let mut emi = 0.0;
    for &ai in ca.values() {
        for &bj in cb.values() {
            let lo = (ai + bj).saturating_sub(n).max(1);
            let hi = ai.min(bj);
            let base = lf[ai] + lf[bj] + lf[n - ai] + lf[n - bj] - lf[n];
            for nij in lo..=hi {
                let log_p = base - lf[nij] - lf[ai - nij] - lf[bj - nij] - lf[n + nij - ai - bj];
                let nijf = nij as f64;
                emi += nijf / nf * (nf * nijf / (ai as f64 * bj as f64)).ln() * log_p.exp();
            }
        }
    }

    let ha = entropy_of_counts(ca.values().copied(), nf);
    let hb = entropy_of_counts(cb.values().copied(), nf);
    let mut denom = ha.max(hb) - emi;
    if denom.abs() < f64::EPSILON {
        denom = f64::EPSILON.copysign(denom);
    }
    Ok((mi - emi) / denom)
}

/// Adjusted mutual information over all node-layers.
pub fn ami(a: &Partition, b: &Partition) -> Result<f64> {
    ami_labels(a.labels(), b.labels())
}

/// Layer-size weighted average of per-layer AMI.
pub fn layer_averaged_ami(net: &MultilayerNetwork, a: &Partition, b: &Partition) -> Result<f64> {
    let n = net.n_node_layers();
    for p in [a, b] {
        if p.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: p.len(),
            });
        }
    }
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let mut total = 0.0;
    for layer in 0..net.n_layers() {
        let r = net.layer_range(layer);
        let weight = r.len() as f64 / n as f64;
        total += weight * ami_labels(a.slice(r.clone()), b.slice(r))?;
    }
    Ok(total)
}

/// Shannon entropy (nats) of each marginal row and their mean.
pub fn marginal_entropy(marg: &Marginals) -> Result<(Vec<f64>, f64)> {
    let mut per_row = Vec::with_capacity(marg.n_rows());
    for (row, probs) in marg.rows().enumerate() {
        let mut h = 0.0;
        for &p in probs {
            if p < 0.0 {
                return Err(Error::NegativeProbability { row, value: p });
            }
            if p > 0.0 {
                h -= p * p.ln();
            }
        }
        per_row.push(h);
    }
    let mean = if per_row.is_empty() {
        0.0
    } else {
        per_row.iter().sum::<f64>() / per_row.len() as f64
    };
    Ok((per_row, mean))
}
