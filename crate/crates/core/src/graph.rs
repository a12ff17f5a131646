//! Multilayer networks in supra form.
//!
//! Node-layers are indexed `i = node + n_nodes * layer`, so the copies of a
//! node are `node, node + N, ..., node + N (L - 1)`. Intralayer edges live in
//! the supra-adjacency `A` (block diagonal), interlayer coupling in `C`
//! (unscaled by the coupling strength). A node missing from a layer is just
//! an isolated node-layer.

use crate::error::{Error, Result};

/// Compressed sparse row storage of a symmetric weighted matrix.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Csr {
    offsets: Vec<usize>,
    targets: Vec<usize>,
    weights: Vec<f64>,
}

impl Csr {
    /// Builds a symmetric matrix from undirected `(i, j, w)` triples with `i != j`.
    /// Duplicates are summed; the result does not depend on triple order.
    fn from_undirected(dim: usize, mut triples: Vec<(usize, usize, f64)>) -> Self {
        for t in &mut triples {
            if t.0 > t.1 {
                std::mem::swap(&mut t.0, &mut t.1);
            }
        }
        triples.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)).then(a.2.total_cmp(&b.2)));

        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(triples.len());
        for (i, j, w) in triples {
            match merged.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += w,
                _ => merged.push((i, j, w)),
            }
        }

        let mut counts = vec![0usize; dim];
        for &(i, j, _) in &merged {
            counts[i] += 1;
            counts[j] += 1;
        }
        let mut offsets = Vec::with_capacity(dim + 1);
        offsets.push(0);
        for c in &counts {
            offsets.push(offsets.last().unwrap() + c);
        }
        let nnz = *offsets.last().unwrap();
        let mut targets = vec![0usize; nnz];
        let mut weights = vec![0.0; nnz];
        let mut cursor = offsets[..dim].to_vec();
        for &(i, j, w) in &merged {
            targets[cursor[i]] = j;
            weights[cursor[i]] = w;
            cursor[i] += 1;
            targets[cursor[j]] = i;
            weights[cursor[j]] = w;
            cursor[j] += 1;
        }
        let mut csr = Self {
            offsets,
            targets,
            weights,
        };
        csr.sort_rows();
        csr
    }

    fn sort_rows(&mut self) {
        for r in 0..self.dim() {
            let (lo, hi) = (self.offsets[r], self.offsets[r + 1]);
            let mut row: Vec<(usize, f64)> = (lo..hi)
                .map(|e| (self.targets[e], self.weights[e]))
                .collect();
            row.sort_by_key(|p| p.0);
            for (k, (t, w)) in row.into_iter().enumerate() {
                self.targets[lo + k] = t;
                self.weights[lo + k] = w;
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.offsets.len().saturating_sub(1)
    }

    /// Number of stored (directed) entries; twice the number of undirected edges.
    pub fn nnz(&self) -> usize {
        self.targets.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (lo, hi) = (self.offsets[i], self.offsets[i + 1]);
        self.targets[lo..hi]
            .iter()
            .copied()
            .zip(self.weights[lo..hi].iter().copied())
    }

    pub fn row_len(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.weights[self.offsets[i]..self.offsets[i + 1]].iter().sum()
    }

    /// Value at `(i, j)`, zero when absent.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (lo, hi) = (self.offsets[i], self.offsets[i + 1]);
        match self.targets[lo..hi].binary_search(&j) {
            Ok(k) => self.weights[lo + k],
            Err(_) => 0.0,
        }
    }

    /// Undirected edges `(i, j, w)` with `i < j`, in row order.
    pub fn upper_triangle(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.dim()).flat_map(move |i| {
            self.row(i)
                .filter(move |&(j, _)| j > i)
                .map(move |(j, w)| (i, j, w))
        })
    }

    /// `y += scale * M x`.
    pub fn mul_add(&self, x: &[f64], scale: f64, y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let s: f64 = self.row(i).map(|(j, w)| w * x[j]).sum();
            *yi += scale * s;
        }
    }
}

/// Interlayer topology of a network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Coupling {
    /// No interlayer edges.
    None,
    /// Identified node-layers in adjacent layers are joined.
    Temporal,
    /// All identified node-layers are joined.
    Multiplex,
    /// Anything else.
    Custom,
}

/// Preset interlayer topologies with unit weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CouplingPreset {
    None,
    Temporal,
    Multiplex,
}

/// An intralayer edge `u -- v` inside `layer`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntraEdge {
    pub layer: usize,
    pub u: usize,
    pub v: usize,
    pub weight: f64,
}

impl IntraEdge {
    pub fn new(layer: usize, u: usize, v: usize, weight: f64) -> Self {
        Self {
            layer,
            u,
            v,
            weight,
        }
    }
}

/// Coupling between the copies of `node` in `layer_a` and `layer_b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterEdge {
    pub node: usize,
    pub layer_a: usize,
    pub layer_b: usize,
    pub weight: f64,
}

impl InterEdge {
    pub fn new(node: usize, layer_a: usize, layer_b: usize, weight: f64) -> Self {
        Self {
            node,
            layer_a,
            layer_b,
            weight,
        }
    }
}

/// How interlayer coupling is specified when building a network.
#[derive(Debug, Clone, PartialEq)]
pub enum InterSpec {
    Preset(CouplingPreset),
    Edges(Vec<InterEdge>),
}

/// Immutable sparse multilayer network.
#[derive(Debug, Clone, PartialEq)]
pub struct MultilayerNetwork {
    n_nodes: usize,
    n_layers: usize,
    intra: Csr,
    inter: Csr,
    strengths: Vec<f64>,
    layer_mass: Vec<f64>,
    coupling: Coupling,
}

fn check_index(what: &'static str, index: usize, limit: usize) -> Result<()> {
    if index >= limit {
        return Err(Error::IndexOutOfRange { what, index, limit });
    }
    Ok(())
}

fn check_weight(w: f64) -> Result<()> {
    if !(w.is_finite() && w > 0.0) {
        return Err(Error::InvalidWeight(w));
    }
    Ok(())
}

/// Builds and validates a network from edge lists.
pub fn build_network(
    intra_edges: &[IntraEdge],
    inter: &InterSpec,
    n_nodes: usize,
    n_layers: usize,
) -> Result<MultilayerNetwork> {
    if n_nodes == 0 || n_layers == 0 {
        return Err(Error::EmptyInput);
    }
    let mut intra = Vec::with_capacity(intra_edges.len());
    for e in intra_edges {
        check_index("layer", e.layer, n_layers)?;
        check_index("node", e.u, n_nodes)?;
        check_index("node", e.v, n_nodes)?;
        intra.push((e.u + n_nodes * e.layer, e.v + n_nodes * e.layer, e.weight));
    }
    let coupling = match inter {
        InterSpec::Preset(p) => preset_pairs(*p, n_nodes, n_layers),
        InterSpec::Edges(edges) => {
            let mut out = Vec::with_capacity(edges.len());
            for e in edges {
                check_index("node", e.node, n_nodes)?;
                check_index("layer", e.layer_a, n_layers)?;
                check_index("layer", e.layer_b, n_layers)?;
                out.push((
                    e.node + n_nodes * e.layer_a,
                    e.node + n_nodes * e.layer_b,
                    e.weight,
                ));
            }
            out
        }
    };
    MultilayerNetwork::from_supra(n_nodes, n_layers, intra, coupling)
}

fn preset_pairs(
    preset: CouplingPreset,
    n_nodes: usize,
    n_layers: usize,
) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::new();
    match preset {
        CouplingPreset::None => {}
        CouplingPreset::Temporal => {
            for l in 1..n_layers {
                for v in 0..n_nodes {
                    out.push((v + n_nodes * (l - 1), v + n_nodes * l, 1.0));
                }
            }
        }
        CouplingPreset::Multiplex => {
            for a in 0..n_layers {
                for b in a + 1..n_layers {
                    for v in 0..n_nodes {
                        out.push((v + n_nodes * a, v + n_nodes * b, 1.0));
                    }
                }
            }
        }
    }
    out
}

impl MultilayerNetwork {
    /// Builds a network from supra-index triples. Intralayer triples must join
    /// node-layers of one layer, coupling triples node-layers of different layers.
    pub fn from_supra(
        n_nodes: usize,
        n_layers: usize,
        intra: Vec<(usize, usize, f64)>,
        coupling: Vec<(usize, usize, f64)>,
    ) -> Result<Self> {
        if n_nodes == 0 || n_layers == 0 {
            return Err(Error::EmptyInput);
        }
        let dim = n_nodes * n_layers;
        for &(i, j, w) in &intra {
            check_index("node-layer", i, dim)?;
            check_index("node-layer", j, dim)?;
            check_weight(w)?;
            if i == j {
                return Err(Error::SelfLoop(i));
            }
            if i / n_nodes != j / n_nodes {
                return Err(Error::CrossLayerIntraEdge(i, j));
            }
        }
        for &(i, j, w) in &coupling {
            check_index("node-layer", i, dim)?;
            check_index("node-layer", j, dim)?;
            check_weight(w)?;
            if i / n_nodes == j / n_nodes {
                return Err(Error::SameLayerInterEdge(i, j));
            }
        }

        let intra = Csr::from_undirected(dim, intra);
        let inter = Csr::from_undirected(dim, coupling);
        let strengths: Vec<f64> = (0..dim).map(|i| intra.row_sum(i)).collect();
        let mut layer_mass = vec![0.0; n_layers];
        for (i, j, w) in intra.upper_triangle() {
            debug_assert_eq!(i / n_nodes, j / n_nodes);
            layer_mass[i / n_nodes] += w;
        }
        let mut net = Self {
            n_nodes,
            n_layers,
            intra,
            inter,
            strengths,
            layer_mass,
            coupling: Coupling::Custom,
        };
        net.coupling = net.classify_coupling();
        Ok(net)
    }

    fn classify_coupling(&self) -> Coupling {
        let pairs = self.inter.nnz() / 2;
        if pairs == 0 {
            return Coupling::None;
        }
        let (n, l) = (self.n_nodes, self.n_layers);
        let identified = self
            .inter
            .upper_triangle()
            .all(|(i, j, _)| i % n == j % n);
        if !identified {
            return Coupling::Custom;
        }
        let adjacent = self
            .inter
            .upper_triangle()
            .all(|(i, j, _)| j / n == i / n + 1);
        if adjacent && pairs == n * (l - 1) {
            Coupling::Temporal
        } else if pairs == n * l * (l - 1) / 2 {
            Coupling::Multiplex
        } else {
            Coupling::Custom
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_layers(&self) -> usize {
        self.n_layers
    }

    /// Total node-layer count `N * L`.
    pub fn n_node_layers(&self) -> usize {
        self.n_nodes * self.n_layers
    }

    pub fn layer_of(&self, i: usize) -> usize {
        i / self.n_nodes
    }

    pub fn node_of(&self, i: usize) -> usize {
        i % self.n_nodes
    }

    pub fn node_layer(&self, node: usize, layer: usize) -> usize {
        node + self.n_nodes * layer
    }

    /// Node-layer index range of `layer`.
    pub fn layer_range(&self, layer: usize) -> std::ops::Range<usize> {
        layer * self.n_nodes..(layer + 1) * self.n_nodes
    }

    pub fn intra(&self) -> &Csr {
        &self.intra
    }

    pub fn inter(&self) -> &Csr {
        &self.inter
    }

    pub fn coupling(&self) -> Coupling {
        self.coupling
    }

    /// Intralayer strength `d_i`.
    pub fn strength(&self, i: usize) -> f64 {
        self.strengths[i]
    }

    pub fn strengths(&self) -> &[f64] {
        &self.strengths
    }

    /// Total intralayer weight of `layer`, each undirected edge counted once.
    pub fn layer_mass(&self, layer: usize) -> f64 {
        self.layer_mass[layer]
    }

    pub fn layer_masses(&self) -> &[f64] {
        &self.layer_mass
    }

    pub fn total_intra_weight(&self) -> f64 {
        self.layer_mass.iter().sum()
    }

    pub fn n_intra_edges(&self) -> usize {
        self.intra.nnz() / 2
    }

    pub fn n_inter_edges(&self) -> usize {
        self.inter.nnz() / 2
    }

    /// Number of intralayer neighbours of `i`.
    pub fn degree(&self, i: usize) -> usize {
        self.intra.row_len(i)
    }

    /// `d_i + omega * sum_j C_ij`.
    pub fn supra_strength(&self, i: usize, omega: f64) -> f64 {
        self.strengths[i] + omega * self.inter.row_sum(i)
    }

    /// Intralayer edges as `(layer, u, v, weight)` with `u < v`.
    pub fn intra_edges(&self) -> Vec<IntraEdge> {
        self.intra
            .upper_triangle()
            .map(|(i, j, w)| IntraEdge::new(self.layer_of(i), self.node_of(i), self.node_of(j), w))
            .collect()
    }

    /// Interlayer edges as `(node, layer_a, layer_b, weight)` with `layer_a < layer_b`.
    /// Coupling between different nodes cannot be expressed this way and is skipped.
    pub fn inter_edges(&self) -> Vec<InterEdge> {
        self.inter
            .upper_triangle()
            .filter(|&(i, j, _)| self.node_of(i) == self.node_of(j))
            .map(|(i, j, w)| InterEdge::new(self.node_of(i), self.layer_of(i), self.layer_of(j), w))
            .collect()
    }

    /// Copy of the network with the intralayer edges of `layer` only, as a
    /// single-layer network.
    pub fn layer_subnetwork(&self, layer: usize) -> Result<Self> {
        let off = layer * self.n_nodes;
        let intra: Vec<_> = self
            .intra
            .upper_triangle()
            .filter(|&(i, _, _)| self.layer_of(i) == layer)
            .map(|(i, j, w)| (i - off, j - off, w))
            .collect();
        Self::from_supra(self.n_nodes, 1, intra, Vec::new())
    }
}

/// Average excess degree `<d^2>/<d> - 1` over all node-layers, including
/// isolated placeholders. `d` counts intralayer neighbours.
pub fn excess_degree(net: &MultilayerNetwork) -> Result<f64> {
    if net.n_intra_edges() == 0 {
        return Err(Error::EmptyNetwork);
    }
    let n = net.n_node_layers() as f64;
    let (mut s1, mut s2) = (0.0, 0.0);
    for i in 0..net.n_node_layers() {
        let d = net.degree(i) as f64;
        s1 += d;
        s2 += d * d;
    }
    let c = s1 / n;
    Ok((s2 / n) / c - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_edge() -> MultilayerNetwork {
        build_network(
            &[IntraEdge::new(0, 0, 1, 1.0)],
            &InterSpec::Preset(CouplingPreset::None),
            2,
            1,
        )
        .unwrap()
    }

    #[test]
    fn single_edge_strengths_and_mass() {
        let net = single_edge();
        assert_eq!(net.strengths(), &[1.0, 1.0]);
        assert_eq!(net.layer_mass(0), 1.0);
        assert_eq!(net.coupling(), Coupling::None);
    }

    #[test]
    fn temporal_preset_two_layers() {
        let net = build_network(&[], &InterSpec::Preset(CouplingPreset::Temporal), 2, 2).unwrap();
        let pairs: Vec<_> = net.inter().upper_triangle().collect();
        assert_eq!(pairs, vec![(0, 2, 1.0), (1, 3, 1.0)]);
        assert_eq!(net.coupling(), Coupling::Temporal);
    }

    #[test]
    fn multiplex_preset_three_layers_one_node() {
        let net = build_network(&[], &InterSpec::Preset(CouplingPreset::Multiplex), 1, 3).unwrap();
        let pairs: Vec<_> = net.inter().upper_triangle().map(|(i, j, _)| (i, j)).collect();
        assert_eq!(pairs, vec![(0, 1), (0, 2), (1, 2)]);
        assert_eq!(net.coupling(), Coupling::Multiplex);
    }

    #[test]
    fn preset_pair_counts() {
        for (n, l) in [(3, 4), (5, 2), (1, 6)] {
            let t = build_network(&[], &InterSpec::Preset(CouplingPreset::Temporal), n, l).unwrap();
            assert_eq!(t.n_inter_edges(), n * (l - 1));
            let m = build_network(&[], &InterSpec::Preset(CouplingPreset::Multiplex), n, l).unwrap();
            assert_eq!(m.n_inter_edges(), n * l * (l - 1) / 2);
        }
    }

    #[test]
    fn duplicates_are_summed() {
        let net = build_network(
            &[IntraEdge::new(0, 0, 1, 1.0), IntraEdge::new(0, 1, 0, 2.5)],
            &InterSpec::Preset(CouplingPreset::None),
            2,
            1,
        )
        .unwrap();
        assert_eq!(net.intra().get(0, 1), 3.5);
        assert_eq!(net.layer_mass(0), 3.5);
    }

    #[test]
    fn rejects_bad_input() {
        let none = InterSpec::Preset(CouplingPreset::None);
        assert!(matches!(
            build_network(&[IntraEdge::new(0, 0, 0, 1.0)], &none, 2, 1),
            Err(Error::SelfLoop(0))
        ));
        assert!(matches!(
            build_network(&[IntraEdge::new(1, 0, 1, 1.0)], &none, 2, 1),
            Err(Error::IndexOutOfRange { what: "layer", .. })
        ));
        assert!(matches!(
            build_network(&[IntraEdge::new(0, 0, 2, 1.0)], &none, 2, 1),
            Err(Error::IndexOutOfRange { what: "node", .. })
        ));
        assert!(matches!(
            build_network(&[IntraEdge::new(0, 0, 1, 0.0)], &none, 2, 1),
            Err(Error::InvalidWeight(_))
        ));
        let same = InterSpec::Edges(vec![InterEdge::new(0, 1, 1, 1.0)]);
        assert!(matches!(
            build_network(&[], &same, 2, 2),
            Err(Error::SameLayerInterEdge(2, 2))
        ));
        assert!(matches!(
            MultilayerNetwork::from_supra(2, 2, vec![(0, 3, 1.0)], vec![]),
            Err(Error::CrossLayerIntraEdge(0, 3))
        ));
    }

    #[test]
    fn excess_degree_examples() {
        let none = InterSpec::Preset(CouplingPreset::None);
        // path 0-1-2: degrees [1, 2, 1]
        let path = build_network(
            &[IntraEdge::new(0, 0, 1, 1.0), IntraEdge::new(0, 1, 2, 1.0)],
            &none,
            3,
            1,
        )
        .unwrap();
        assert!((excess_degree(&path).unwrap() - 0.5).abs() < 1e-15);

        // K4 is 3-regular, K6 is 5-regular
        for (k, expected) in [(4usize, 2.0), (6, 4.0)] {
            let mut edges = Vec::new();
            for u in 0..k {
                for v in u + 1..k {
                    edges.push(IntraEdge::new(0, u, v, 1.0));
                }
            }
            let net = build_network(&edges, &none, k, 1).unwrap();
            assert!((excess_degree(&net).unwrap() - expected).abs() < 1e-15);
        }

        let empty = build_network(&[], &none, 3, 1).unwrap();
        assert!(matches!(excess_degree(&empty), Err(Error::EmptyNetwork)));
    }

    #[test]
    fn layer_subnetwork_extracts_one_layer() {
        let net = build_network(
            &[IntraEdge::new(0, 0, 1, 1.0), IntraEdge::new(1, 1, 2, 2.0)],
            &InterSpec::Preset(CouplingPreset::Temporal),
            3,
            2,
        )
        .unwrap();
        let sub = net.layer_subnetwork(1).unwrap();
        assert_eq!(sub.n_node_layers(), 3);
        assert_eq!(sub.intra().get(1, 2), 2.0);
        assert_eq!(sub.n_inter_edges(), 0);
    }
}
