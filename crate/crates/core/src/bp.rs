//! Multilayer modularity belief propagation.
//!
//! Messages `psi^{i->k}` live on every directed supra-edge with nonzero
//! combined weight (intralayer `A_ij`, interlayer `omega * C_ij`). One update
//! of the message out of node-layer `i` is
//!
//! ```text
//! log psi^{i->k}_t = -gamma * beta * d_i * theta^{l_i}_t / (2 m_{l_i})
//!                    + sum_{j in N(i) \ k} log(1 + psi^{j->i}_t (exp(beta w_ij) - 1)) + const
//! ```
//!
//! where `theta^l_t = sum_{j in layer l} d_j psi^j_t` is a per-layer field that
//! stands in for the dense null-model interactions. Synchronous sweeps hold
//! the field fixed and refresh marginals and field once the sweep is done;
//! with damping the refreshed marginals keep the same share of their old
//! values as the messages do.
//! Asynchronous sweeps recompute a node-layer's marginal right after its
//! messages and shift the field by the change, then re-sum the field at the
//! end of the sweep to shed rounding drift.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::MultilayerNetwork;
use crate::metrics::{self, Marginals, Partition};

/// Directed supra-edges grouped by source node-layer.
#[derive(Debug, Clone, PartialEq)]
pub struct SupraEdges {
    offsets: Vec<usize>,
    targets: Vec<usize>,
    weights: Vec<f64>,
    reverse: Vec<usize>,
}

impl SupraEdges {
    /// Directed edges over the nonzeros of `A + omega C`.
    pub fn new(net: &MultilayerNetwork, omega: f64) -> Self {
        let n = net.n_node_layers();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut targets = Vec::new();
        let mut weights = Vec::new();
        offsets.push(0);
        let mut row: Vec<(usize, f64)> = Vec::new();
        for i in 0..n {
            row.clear();
            row.extend(net.intra().row(i));
            if omega > 0.0 {
                row.extend(net.inter().row(i).map(|(j, c)| (j, omega * c)));
            }
            row.sort_by_key(|p| p.0);
            for &(j, w) in &row {
                targets.push(j);
                weights.push(w);
            }
            offsets.push(targets.len());
        }
        let mut reverse = vec![0; targets.len()];
        for i in 0..n {
            for e in offsets[i]..offsets[i + 1] {
                let k = targets[e];
                let slice = &targets[offsets[k]..offsets[k + 1]];
                let pos = slice
                    .binary_search(&i)
                    .expect("supra adjacency is symmetric");
                reverse[e] = offsets[k] + pos;
            }
        }
        Self {
            offsets,
            targets,
            weights,
            reverse,
        }
    }

    pub fn n_directed(&self) -> usize {
        self.targets.len()
    }

    pub fn n_sources(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Directed edge ids leaving `i`.
    pub fn out(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    /// Source node-layer of every edge, expanded.
    pub fn source(&self, e: usize) -> usize {
        self.offsets.partition_point(|&o| o <= e) - 1
    }

    pub fn target(&self, e: usize) -> usize {
        self.targets[e]
    }

    pub fn weight(&self, e: usize) -> f64 {
        self.weights[e]
    }

    /// Id of the opposite direction of `e`.
    pub fn reverse(&self, e: usize) -> usize {
        self.reverse[e]
    }
}

/// Order in which messages are refreshed during a sweep.
#[derive(Debug, Clone)]
pub enum Schedule {
    /// Every message is computed from the previous sweep's messages.
    Synchronous,
    /// Same as `Synchronous`, with node-layers split across worker threads.
    /// Results are bit-identical to the serial synchronous sweep.
    ParallelSynchronous,
    /// Node-layers are visited in a fresh random order each sweep and their
    /// outgoing messages overwritten in place.
    RandomAsync(Box<ChaCha8Rng>),
}

impl Schedule {
    pub fn random_async(seed: u64) -> Self {
        Schedule::RandomAsync(Box::new(ChaCha8Rng::seed_from_u64(seed)))
    }
}

/// Messages, marginals and per-layer fields for one community count and one
/// set of `(beta, gamma, omega)`.
#[derive(Debug, Clone)]
pub struct BeliefState {
    q: usize,
    beta: f64,
    gamma: f64,
    omega: f64,
    edges: SupraEdges,
    /// `beta * w_e`
    scaled: Vec<f64>,
    /// `exp(beta * w_e) - 1`
    boost: Vec<f64>,
    messages: Vec<f64>,
    marginals: Marginals,
    theta: Vec<f64>,
    iter_count: usize,
    converged: bool,
    last_delta: f64,
}

/// Parameters fixed for one belief-propagation run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BpParams {
    pub q: usize,
    pub beta: f64,
    pub gamma: f64,
    pub omega: f64,
}

impl BpParams {
    pub fn new(q: usize, beta: f64, gamma: f64, omega: f64) -> Self {
        Self {
            q,
            beta,
            gamma,
            omega,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.q < 2 {
            return Err(Error::InvalidParameter(format!(
                "community count must be at least 2, got {}",
                self.q
            )));
        }
        for (name, v) in [("beta", self.beta), ("gamma", self.gamma), ("omega", self.omega)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter(format!("{name} = {v}")));
            }
        }
        Ok(())
    }
}

#[inline]
fn log_edge_factor(psi: f64, scaled: f64, boost: f64) -> f64 {
    if scaled <= 30.0 {
        (psi * boost).ln_1p()
    } else {
        // log((1 - psi) + psi e^x) as a log-sum-exp
        let a = psi.ln() + scaled;
        let b = (-psi).ln_1p();
        let hi = a.max(b);
        if hi == f64::NEG_INFINITY {
            return hi;
        }
        hi + ((a - hi).exp() + (b - hi).exp()).ln()
    }
}

/// Normalizes `exp(logits)` into `out`; returns `log sum exp(logits)`.
#[inline]
fn softmax_into(logits: &[f64], out: &mut [f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for (o, &x) in out.iter_mut().zip(logits) {
        *o = (x - max).exp();
        z += *o;
    }
    for o in out.iter_mut() {
        *o /= z;
    }
    max + z.ln()
}

impl BeliefState {
    fn empty(net: &MultilayerNetwork, params: BpParams) -> Result<Self> {
        params.validate()?;
        let edges = SupraEdges::new(net, params.omega);
        let scaled: Vec<f64> = edges.weights.iter().map(|w| params.beta * w).collect();
        let boost = scaled.iter().map(|x| x.exp_m1()).collect();
        let q = params.q;
        let n_dir = edges.n_directed();
        Ok(Self {
            q,
            beta: params.beta,
            gamma: params.gamma,
            omega: params.omega,
            edges,
            scaled,
            boost,
            messages: vec![1.0 / q as f64; n_dir * q],
            marginals: Marginals::uniform(net.n_node_layers(), q),
            theta: net
                .layer_masses()
                .iter()
                .flat_map(|m| std::iter::repeat_n(2.0 * m / q as f64, q))
                .collect(),
            iter_count: 0,
            converged: false,
            last_delta: f64::INFINITY,
        })
    }

    pub fn params(&self) -> BpParams {
        BpParams::new(self.q, self.beta, self.gamma, self.omega)
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn edges(&self) -> &SupraEdges {
        &self.edges
    }

    /// Message on directed edge `e`.
    pub fn message(&self, e: usize) -> &[f64] {
        &self.messages[e * self.q..(e + 1) * self.q]
    }

    pub fn messages(&self) -> &[f64] {
        &self.messages
    }

    /// Overwrites the message on `e` (normalized by the caller). Marginals
    /// and fields are not refreshed until [`BeliefState::refresh`].
    pub fn set_message(&mut self, e: usize, values: &[f64]) {
        self.messages[e * self.q..(e + 1) * self.q].copy_from_slice(values);
    }

    pub fn marginals(&self) -> &Marginals {
        &self.marginals
    }

    /// Field `theta^l` of `layer`.
    pub fn theta(&self, layer: usize) -> &[f64] {
        &self.theta[layer * self.q..(layer + 1) * self.q]
    }

    pub fn iterations(&self) -> usize {
        self.iter_count
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn last_delta(&self) -> f64 {
        self.last_delta
    }

    /// Recomputes marginals from the current messages and fields, then the
    /// fields from the new marginals.
    pub fn refresh(&mut self, net: &MultilayerNetwork) {
        self.refresh_marginals(net);
        self.refresh_theta(net);
    }

    fn field_coefficient(&self, net: &MultilayerNetwork, i: usize) -> f64 {
        let m = net.layer_mass(net.layer_of(i));
        if m > 0.0 {
            -self.gamma * self.beta * net.strength(i) / (2.0 * m)
        } else {
            0.0
        }
    }

    /// Fills `full` with the unnormalized marginal log-weights of `i` and
    /// `terms` with the per-incoming-edge log factors (row-major by out edge).
    fn node_logits(
        &self,
        net: &MultilayerNetwork,
        messages: &[f64],
        i: usize,
        terms: &mut Vec<f64>,
        full: &mut [f64],
    ) {
        let q = self.q;
        let layer = net.layer_of(i);
        let fc = self.field_coefficient(net, i);
        let theta = &self.theta[layer * q..(layer + 1) * q];
        for t in 0..q {
            full[t] = fc * theta[t];
        }
        terms.clear();
        for e in self.edges.out(i) {
            let incoming = self.edges.reverse[e];
            let psi = &messages[incoming * q..(incoming + 1) * q];
            let (x, b) = (self.scaled[incoming], self.boost[incoming]);
            for t in 0..q {
                let v = log_edge_factor(psi[t], x, b);
                terms.push(v);
                full[t] += v;
            }
        }
    }

    /// Writes the new outgoing messages of `i` into `out` (length `deg * q`)
    /// and returns the largest entry change versus `old`.
    #[allow(clippy::too_many_arguments)]
    fn update_node(
        &self,
        net: &MultilayerNetwork,
        read: &[f64],
        i: usize,
        old: &[f64],
        out: &mut [f64],
        damping: f64,
        terms: &mut Vec<f64>,
        scratch: &mut [f64],
    ) -> Result<f64> {
        let q = self.q;
        let (full, logits) = scratch.split_at_mut(q);
        self.node_logits(net, read, i, terms, full);
        let mut delta: f64 = 0.0;
        let start = self.edges.offsets[i];
        for k in 0..self.edges.out(i).len() {
            for t in 0..q {
                logits[t] = full[t] - terms[k * q + t];
            }
            let slot = &mut out[k * q..(k + 1) * q];
            softmax_into(logits, slot);
            let prev = &old[k * q..(k + 1) * q];
            if damping > 0.0 {
                for t in 0..q {
                    slot[t] = (1.0 - damping) * slot[t] + damping * prev[t];
                }
            }
            for t in 0..q {
                if !slot[t].is_finite() {
                    return Err(Error::NonFinite { edge: start + k });
                }
                delta = delta.max((slot[t] - prev[t]).abs());
            }
        }
        Ok(delta)
    }

    /// Replaces the marginal of `i` by the softmax of the logits left in
    /// `scratch[..q]` by [`Self::update_node`] and moves the field of its
    /// layer accordingly.
    fn absorb_marginal(&mut self, net: &MultilayerNetwork, i: usize, scratch: &mut [f64]) {
        let q = self.q;
        let (full, row) = scratch.split_at_mut(q);
        softmax_into(full, row);
        let d = net.strength(i);
        let layer = net.layer_of(i);
        let old = self.marginals.row_mut(i);
        for t in 0..q {
            self.theta[layer * q + t] += d * (row[t] - old[t]);
        }
        old.copy_from_slice(row);
    }

    fn refresh_marginals(&mut self, net: &MultilayerNetwork) {
        self.blend_marginals(net, 0.0);
    }

    /// Recomputes marginals, keeping a `damping` share of the old ones.
    fn blend_marginals(&mut self, net: &MultilayerNetwork, damping: f64) {
        let q = self.q;
        let mut terms = Vec::new();
        let mut full = vec![0.0; q];
        let mut row = vec![0.0; q];
        for i in 0..net.n_node_layers() {
            self.node_logits(net, &self.messages, i, &mut terms, &mut full);
            softmax_into(&full, &mut row);
            let old = self.marginals.row_mut(i);
            if damping > 0.0 {
                for t in 0..q {
                    old[t] = (1.0 - damping) * row[t] + damping * old[t];
                }
            } else {
                old.copy_from_slice(&row);
            }
        }
    }

    fn refresh_theta(&mut self, net: &MultilayerNetwork) {
        let q = self.q;
        self.theta.iter_mut().for_each(|x| *x = 0.0);
        for i in 0..net.n_node_layers() {
            let d = net.strength(i);
            if d == 0.0 {
                continue;
            }
            let layer = net.layer_of(i);
            let row = self.marginals.row(i);
            for t in 0..q {
                self.theta[layer * q + t] += d * row[t];
            }
        }
    }

    /// `log Z_i` of the marginal of every node-layer.
    fn log_partition_functions(&self, net: &MultilayerNetwork) -> Vec<f64> {
        let mut terms = Vec::new();
        let mut full = vec![0.0; self.q];
        let mut row = vec![0.0; self.q];
        (0..net.n_node_layers())
            .map(|i| {
                self.node_logits(net, &self.messages, i, &mut terms, &mut full);
                softmax_into(&full, &mut row)
            })
            .collect()
    }

    /// Merges community columns according to `mapping` (old label to new
    /// dense label): messages are summed per new label, then marginals and
    /// fields are refreshed.
    pub fn merge_communities(&mut self, net: &MultilayerNetwork, mapping: &[usize]) -> Result<()> {
        if mapping.len() != self.q {
            return Err(Error::LengthMismatch {
                expected: self.q,
                got: mapping.len(),
            });
        }
        let k = mapping.iter().max().map_or(0, |m| m + 1);
        if k == self.q && mapping.iter().enumerate().all(|(s, &t)| s == t) {
            return Ok(());
        }
        if k == 0 {
            return Err(Error::EmptyInput);
        }
        let mut merged = vec![0.0; self.edges.n_directed() * k];
        for (old, new) in self.messages.chunks_exact(self.q).zip(merged.chunks_exact_mut(k)) {
            for (s, &p) in old.iter().enumerate() {
                new[mapping[s]] += p;
            }
        }
        self.q = k;
        self.messages = merged;
        self.marginals = Marginals::uniform(net.n_node_layers(), k);
        self.theta = vec![0.0; net.n_layers() * k];
        self.refresh_theta_from_messages(net);
        self.refresh(net);
        self.converged = false;
        Ok(())
    }

    /// Fields from marginals implied by the current messages, ignoring the
    /// (stale) fields themselves.
    fn refresh_theta_from_messages(&mut self, net: &MultilayerNetwork) {
        let gamma = self.gamma;
        self.gamma = 0.0;
        self.refresh(net);
        self.gamma = gamma;
    }

    /// Per node-layer argmax of the marginals, ties broken uniformly at random.
    pub fn retrieval_partition(&self, seed: u64) -> Partition {
        argmax_partition(&self.marginals, seed)
    }
}

/// Argmax of each marginal row with seeded uniform tie-breaking.
pub fn argmax_partition(marg: &Marginals, seed: u64) -> Partition {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ties = Vec::with_capacity(marg.q());
    let labels = marg
        .rows()
        .map(|row| {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            ties.clear();
            ties.extend((0..row.len()).filter(|&t| max - row[t] <= 1e-12));
            if ties.len() == 1 {
                ties[0]
            } else {
                ties[rng.random_range(0..ties.len())]
            }
        })
        .collect();
    Partition::new(labels)
}

/// Factorized start: every message `1/q`, multiplied by `1 + noise * u` with
/// `u` uniform on `[-1, 1]` and renormalized.
pub fn init_uniform(
    net: &MultilayerNetwork,
    params: BpParams,
    noise: f64,
    seed: u64,
) -> Result<BeliefState> {
    if !(0.0..0.5).contains(&noise) {
        return Err(Error::InvalidParameter(format!(
            "noise must lie in [0, 0.5), got {noise}"
        )));
    }
    let mut state = BeliefState::empty(net, params)?;
    if noise > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for msg in state.messages.chunks_exact_mut(params.q) {
            for p in msg.iter_mut() {
                *p *= 1.0 + noise * rng.random_range(-1.0..=1.0);
            }
            let z: f64 = msg.iter().sum();
            msg.iter_mut().for_each(|p| *p /= z);
        }
    }
    state.refresh(net);
    Ok(state)
}

/// Start biased toward a given partition: every message into node-layer `k`
/// is proportional to 1 off and `strength_factor` on `k`'s community.
pub fn init_from_partition(
    net: &MultilayerNetwork,
    params: BpParams,
    part: &Partition,
    strength_factor: f64,
) -> Result<BeliefState> {
    if part.len() != net.n_node_layers() {
        return Err(Error::LengthMismatch {
            expected: net.n_node_layers(),
            got: part.len(),
        });
    }
    if !(strength_factor > 1.0 && strength_factor.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "strength factor must exceed 1, got {strength_factor}"
        )));
    }
    let q = params.q;
    if let Some(&label) = part.labels().iter().find(|&&l| l >= q) {
        return Err(Error::LabelOutOfRange { label, q });
    }
    let mut state = BeliefState::empty(net, params)?;
    let z = strength_factor + (q - 1) as f64;
    for e in 0..state.edges.n_directed() {
        let label = part.labels()[state.edges.targets[e]];
        let msg = &mut state.messages[e * q..(e + 1) * q];
        msg.iter_mut().for_each(|p| *p = 1.0 / z);
        msg[label] = strength_factor / z;
    }
    state.refresh(net);
    Ok(state)
}

/// One pass over all messages. Returns the largest absolute change of any
/// message entry.
pub fn sweep(
    state: &mut BeliefState,
    net: &MultilayerNetwork,
    schedule: &mut Schedule,
    damping: f64,
) -> Result<f64> {
    let q = state.q;
    let n = net.n_node_layers();
    let delta = match schedule {
        Schedule::Synchronous => {
            let mut next = vec![0.0; state.messages.len()];
            let mut terms = Vec::new();
            let mut scratch = vec![0.0; 2 * q];
            let mut delta: f64 = 0.0;
            for i in 0..n {
                let r = state.edges.offsets[i] * q..state.edges.offsets[i + 1] * q;
                let d = state.update_node(
                    net,
                    &state.messages,
                    i,
                    &state.messages[r.clone()],
                    &mut next[r],
                    damping,
                    &mut terms,
                    &mut scratch,
                )?;
                delta = delta.max(d);
            }
            state.messages = next;
            delta
        }
        Schedule::ParallelSynchronous => {
            let mut next = vec![0.0; state.messages.len()];
            let mut chunks: Vec<(usize, &mut [f64])> = Vec::with_capacity(n);
            let mut rest: &mut [f64] = &mut next;
            for i in 0..n {
                let len = state.edges.out(i).len() * q;
                let (head, tail) = rest.split_at_mut(len);
                chunks.push((i, head));
                rest = tail;
            }
            let st = &*state;
            let deltas: Result<Vec<f64>> = chunks
                .into_par_iter()
                .map_init(
                    || (Vec::new(), vec![0.0; 2 * q]),
                    |(terms, scratch), (i, out)| {
                        let r = st.edges.offsets[i] * q..st.edges.offsets[i + 1] * q;
                        st.update_node(net, &st.messages, i, &st.messages[r], out, damping, terms, scratch)
                    },
                )
                .collect();
            let delta = deltas?.into_iter().fold(0.0, f64::max);
            state.messages = next;
            delta
        }
        Schedule::RandomAsync(rng) => {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(rng);
            let mut terms = Vec::new();
            let mut scratch = vec![0.0; 2 * q];
            let mut buf = Vec::new();
            let mut delta: f64 = 0.0;
            for i in order {
                let r = state.edges.offsets[i] * q..state.edges.offsets[i + 1] * q;
                buf.clear();
                buf.resize(r.len(), 0.0);
                let d = state.update_node(
                    net,
                    &state.messages,
                    i,
                    &state.messages[r.clone()],
                    &mut buf,
                    damping,
                    &mut terms,
                    &mut scratch,
                )?;
                state.messages[r].copy_from_slice(&buf);
                delta = delta.max(d);
                state.absorb_marginal(net, i, &mut scratch);
            }
            delta
        }
    };
    if matches!(schedule, Schedule::RandomAsync(_)) {
        // marginals were absorbed node by node; only re-sum the fields
        state.refresh_theta(net);
    } else {
        state.blend_marginals(net, damping);
        state.refresh_theta(net);
    }
    state.iter_count += 1;
    state.last_delta = delta;
    Ok(delta)
}

/// Stopping rule and schedule for [`run`].
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub tol: f64,
    pub max_iters: usize,
    pub damping: f64,
    /// Seeds the sweep order (asynchronous schedule) and argmax tie-breaking.
    pub seed: u64,
    pub synchronous: bool,
    pub parallel: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iters: 2000,
            damping: 0.0,
            seed: 0,
            synchronous: false,
            parallel: false,
        }
    }
}

impl RunConfig {
    pub fn schedule(&self) -> Schedule {
        match (self.synchronous, self.parallel) {
            (true, false) => Schedule::Synchronous,
            (true, true) => Schedule::ParallelSynchronous,
            (false, _) => Schedule::random_async(self.seed),
        }
    }
}

/// Parameters recorded with a result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunParams {
    pub beta: f64,
    pub gamma: f64,
    pub omega: f64,
    pub q: usize,
    pub seed: u64,
}

/// Outcome of a belief-propagation run, populated whether or not it converged.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub converged: bool,
    pub iterations: usize,
    pub retrieval_partition: Partition,
    pub retrieval_modularity: f64,
    pub bethe_free_energy: f64,
    pub q_effective: usize,
    pub mean_entropy: f64,
    pub params: RunParams,
    pub marginals: Marginals,
    pub last_delta: f64,
}

impl RunResult {
    /// Scores `partition` and `marginals` for the given network and parameters.
    #[allow(clippy::too_many_arguments)]
    pub fn assemble(
        net: &MultilayerNetwork,
        params: RunParams,
        converged: bool,
        iterations: usize,
        last_delta: f64,
        bethe_free_energy: f64,
        marginals: Marginals,
        partition: Partition,
    ) -> Result<Self> {
        let retrieval_modularity =
            metrics::modularity(net, &partition, params.gamma, params.omega)?;
        let (_, mean_entropy) = metrics::marginal_entropy(&marginals)?;
        Ok(Self {
            converged,
            iterations,
            q_effective: partition.q_effective(),
            retrieval_partition: partition,
            retrieval_modularity,
            bethe_free_energy,
            mean_entropy,
            params,
            marginals,
            last_delta,
        })
    }
}

/// Sweeps until the largest message change drops below `tol` or `max_iters`
/// sweeps have run. Non-convergence is reported in the result, not as an error.
pub fn run(state: &mut BeliefState, net: &MultilayerNetwork, cfg: &RunConfig) -> Result<RunResult> {
    if cfg.tol.is_nan() || cfg.tol <= 0.0 {
        return Err(Error::InvalidParameter(format!("tol must be positive, got {}", cfg.tol)));
    }
    if !(0.0..1.0).contains(&cfg.damping) {
        return Err(Error::InvalidParameter(format!("damping must lie in [0, 1), got {}", cfg.damping)));
    }
    let mut schedule = cfg.schedule();
    state.converged = false;
    for _ in 0..cfg.max_iters {
        let delta = sweep(state, net, &mut schedule, cfg.damping)?;
        if delta < cfg.tol {
            state.converged = true;
            break;
        }
    }
    let params = RunParams {
        beta: state.beta,
        gamma: state.gamma,
        omega: state.omega,
        q: state.q,
        seed: cfg.seed,
    };
    let f = bethe_free_energy(state, net);
    let partition = state.retrieval_partition(cfg.seed);
    RunResult::assemble(
        net,
        params,
        state.converged,
        state.iter_count,
        state.last_delta,
        f,
        state.marginals.clone(),
        partition,
    )
}

/// Bethe free energy of the current state,
/// `-(1/(N beta)) (sum_i log Z_i - sum_edges log Z_ij + sum_l beta/(4 m_l) sum_t (theta^l_t)^2)`.
pub fn bethe_free_energy(state: &BeliefState, net: &MultilayerNetwork) -> f64 {
    let q = state.q;
    let n = net.n_node_layers() as f64;
    let node_term: f64 = state.log_partition_functions(net).iter().sum();
    let mut edge_term = 0.0;
    for i in 0..state.edges.n_sources() {
        for e in state.edges.out(i) {
            if state.edges.targets[e] < i {
                continue;
            }
            let back = state.edges.reverse[e];
            let a = state.message(e);
            let b = state.message(back);
            let overlap: f64 = (0..q).map(|t| a[t] * b[t]).sum();
            edge_term += (overlap * state.boost[e]).ln_1p();
        }
    }
    let mut field_term = 0.0;
    for layer in 0..net.n_layers() {
        let m = net.layer_mass(layer);
        if m <= 0.0 {
            continue;
        }
        let sq: f64 = state.theta(layer).iter().map(|x| x * x).sum();
        field_term += state.beta / (4.0 * m) * sq;
    }
    -(node_term - edge_term + field_term) / (n * state.beta)
}
