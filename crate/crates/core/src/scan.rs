//! End-to-end pipeline (initialize, propagate, collapse, align, score) over
//! the `beta*` grid, and sweeps of the pipeline over resolution and coupling.

use std::collections::hash_map::{Entry, HashMap};

use rayon::prelude::*;

use crate::alignment::{align_multiplex, align_temporal};
use crate::beta_star::beta_grid;
use crate::bp::{self, argmax_partition, BpParams, RunConfig, RunParams, RunResult};
use crate::error::{Error, Result};
use crate::graph::{Coupling, MultilayerNetwork};
use crate::metrics::Partition;
use crate::model_selection::{collapse_communities, DEFAULT_THRESHOLD};
use crate::spectral::spectral_partition;

/// How beliefs are initialized before each run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitMode {
    /// Uniform messages with multiplicative noise of this amplitude.
    Uniform { noise: f64 },
    /// Messages biased toward the spectral partition by this factor.
    Spectral { strength_factor: f64 },
}

/// Which cross-layer label alignment to apply after collapsing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlignMode {
    /// Temporal for temporal coupling, multiplex for any other coupling,
    /// nothing for uncoupled layers.
    Auto,
    Temporal,
    Multiplex,
    Off,
}

/// Inverse temperatures to try.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BetaChoice {
    /// `{beta*(2), ..., beta*(q_max)}`.
    Auto,
    /// The `beta*` grid multiplied by `{0.5, 0.75, 1, 1.5, 2}`.
    Wide,
    Fixed(f64),
}

/// Community count used for the run at each inverse temperature.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommunityCount {
    /// `beta*(q)` runs with `q` communities, for `q = 2..=q_max`.
    Paired,
    /// Every run starts from `q_max` communities.
    Max,
}

/// Options shared by every run of a pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOptions {
    pub seed: u64,
    pub tol: f64,
    /// `None` selects the trivial-convergence based policy.
    pub max_iters: Option<usize>,
    pub damping: f64,
    pub synchronous: bool,
    pub parallel: bool,
    pub init: InitMode,
    pub align: AlignMode,
    pub beta: BetaChoice,
    pub communities: CommunityCount,
    pub collapse_threshold: f64,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            tol: 1e-6,
            max_iters: None,
            damping: 0.0,
            synchronous: false,
            parallel: false,
            init: InitMode::Uniform { noise: 0.1 },
            align: AlignMode::Auto,
            beta: BetaChoice::Auto,
            communities: CommunityCount::Paired,
            collapse_threshold: DEFAULT_THRESHOLD,
        }
    }
}

/// Multiplier applied to the trivial-convergence iteration count.
const TRIVIAL_MULTIPLIER: usize = 300;
/// Upper bound on the derived iteration budget.
const MAX_ITERS_CAP: usize = 50_000;

/// Sweeps needed to converge to the factorized point at `0.2 beta*(2)`,
/// times 300, capped at 50000.
pub fn default_max_iters(net: &MultilayerNetwork, gamma: f64, omega: f64, opts: &PipelineOptions) -> Result<usize> {
    let beta = 0.2 * beta_grid(net, omega, 2)?[0];
    let noise = match opts.init {
        InitMode::Uniform { noise } => noise,
        InitMode::Spectral { .. } => 0.1,
    };
    let mut state = bp::init_uniform(net, BpParams::new(2, beta, gamma, omega), noise, opts.seed)?;
    let cfg = RunConfig {
        tol: opts.tol,
        max_iters: MAX_ITERS_CAP,
        damping: opts.damping,
        seed: opts.seed,
        synchronous: opts.synchronous,
        parallel: opts.parallel,
    };
    let res = bp::run(&mut state, net, &cfg)?;
    Ok((TRIVIAL_MULTIPLIER * res.iterations.max(1)).min(MAX_ITERS_CAP))
}

/// Every run of a pipeline plus the selected one.
#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub best: RunResult,
    pub candidates: Vec<RunResult>,
    pub max_iters: usize,
}

impl PipelineOutcome {
    pub fn n_converged(&self) -> usize {
        self.candidates.iter().filter(|r| r.converged).count()
    }

    pub fn n_converged_nontrivial(&self) -> usize {
        self.candidates.iter().filter(|r| is_retrieval(r)).count()
    }
}

/// Converged with more than one community after collapsing.
pub fn is_retrieval(r: &RunResult) -> bool {
    r.converged && r.q_effective > 1
}

/// Picks the converged non-trivial run with the highest retrieval modularity;
/// failing that, the non-converged run with the lowest Bethe free energy;
/// failing that, the first run.
pub fn select_best(candidates: &[RunResult]) -> Option<usize> {
    let by = |pred: &dyn Fn(&RunResult) -> bool, key: &dyn Fn(&RunResult) -> f64| {
        candidates
            .iter()
            .enumerate()
            .filter(|(_, r)| pred(r))
            .fold(None, |best: Option<(usize, f64)>, (i, r)| {
                let k = key(r);
                match best {
                    Some((_, bk)) if bk >= k => best,
                    _ => Some((i, k)),
                }
            })
            .map(|(i, _)| i)
    };
    by(&is_retrieval, &|r| r.retrieval_modularity)
        .or_else(|| by(&|r| !r.converged, &|r| -r.bethe_free_energy))
        .or(if candidates.is_empty() { None } else { Some(0) })
}

fn mix_seed(seed: u64, k: u64) -> u64 {
    // splitmix64 step
    let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(k + 1));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Collapses, re-derives the retrieval partition, aligns and scores a finished
/// belief-propagation state.
pub fn postprocess(
    net: &MultilayerNetwork,
    raw: RunResult,
    opts: &PipelineOptions,
) -> Result<RunResult> {
    let (_, collapsed) = collapse_communities(&raw.marginals, opts.collapse_threshold)?;
    let mut marginals = collapsed;
    let mut partition = argmax_partition(&marginals, raw.params.seed);
    let mode = match opts.align {
        AlignMode::Auto => match net.coupling() {
            Coupling::None => AlignMode::Off,
            Coupling::Temporal => AlignMode::Temporal,
            Coupling::Multiplex | Coupling::Custom => AlignMode::Multiplex,
        },
        m => m,
    };
    let aligned = match mode {
        AlignMode::Temporal => Some(align_temporal(net, &partition)?),
        AlignMode::Multiplex => Some(align_multiplex(net, &partition, raw.params.seed)?),
        AlignMode::Off | AlignMode::Auto => None,
    };
    if let Some(al) = aligned {
        marginals = al.apply_to_marginals(net, &marginals);
        partition = al.partition;
    }
    RunResult::assemble(
        net,
        raw.params,
        raw.converged,
        raw.iterations,
        raw.last_delta,
        raw.bethe_free_energy,
        marginals,
        partition,
    )
}

/// Runs belief propagation to convergence; whenever the converged marginals
/// have redundant communities, merges them and continues with the smaller
/// `q`. Stops at non-convergence, at a single community, or when nothing
/// merges.
pub fn run_floating(
    state: &mut bp::BeliefState,
    net: &MultilayerNetwork,
    cfg: &RunConfig,
    threshold: f64,
) -> Result<RunResult> {
    let mut res = bp::run(state, net, cfg)?;
    while res.converged {
        let (mapping, reduced) = collapse_communities(&res.marginals, threshold)?;
        if reduced.q() == state.q() || reduced.q() == 1 {
            break;
        }
        state.merge_communities(net, &mapping)?;
        res = bp::run(state, net, cfg)?;
    }
    Ok(res)
}

/// `(beta, q)` of every run of a pipeline.
pub fn run_plan(net: &MultilayerNetwork, omega: f64, q_max: usize, opts: &PipelineOptions) -> Result<Vec<(f64, usize)>> {
    if q_max < 2 {
        return Err(Error::InvalidParameter(format!(
            "q_max must be at least 2, got {q_max}"
        )));
    }
    let q_of = |q: usize| match opts.communities {
        CommunityCount::Paired => q,
        CommunityCount::Max => q_max,
    };
    let plan = match opts.beta {
        BetaChoice::Fixed(b) => vec![(b, q_max)],
        BetaChoice::Auto => beta_grid(net, omega, q_max)?
            .into_iter()
            .zip(2..)
            .map(|(b, q)| (b, q_of(q)))
            .collect(),
        BetaChoice::Wide => {
            let base = beta_grid(net, omega, q_max)?;
            let mut all: Vec<(f64, usize)> = [0.5, 0.75, 1.0, 1.5, 2.0]
                .iter()
                .flat_map(|s| base.iter().zip(2..).map(move |(b, q)| (s * b, q)))
                .map(|(b, q)| (b, q_of(q)))
                .collect();
            all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            all.dedup();
            all
        }
    };
    Ok(plan)
}

/// Runs belief propagation at each `(beta, q)` of [`run_plan`] and returns
/// every post-processed run with the selected one.
pub fn run_pipeline_detailed(
    net: &MultilayerNetwork,
    gamma: f64,
    omega: f64,
    q_max: usize,
    opts: &PipelineOptions,
) -> Result<PipelineOutcome> {
    let plan = run_plan(net, omega, q_max, opts)?;
    let max_iters = match opts.max_iters {
        Some(m) => m,
        None => default_max_iters(net, gamma, omega, opts)?,
    };
    let mut spectral: HashMap<usize, Partition> = HashMap::new();
    let mut candidates = Vec::with_capacity(plan.len());
    for (k, &(beta, q)) in plan.iter().enumerate() {
        let run_seed = mix_seed(opts.seed, k as u64);
        let params = BpParams::new(q, beta, gamma, omega);
        let mut state = match opts.init {
            InitMode::Spectral { strength_factor } => {
                let part = match spectral.entry(q) {
                    Entry::Occupied(e) => e.into_mut(),
                    Entry::Vacant(e) => e.insert(spectral_partition(net, gamma, omega, q, opts.seed)?),
                };
                bp::init_from_partition(net, params, part, strength_factor)?
            }
            InitMode::Uniform { noise } => bp::init_uniform(net, params, noise, run_seed)?,
        };
        let cfg = RunConfig {
            tol: opts.tol,
            max_iters,
            damping: opts.damping,
            seed: run_seed,
            synchronous: opts.synchronous,
            parallel: opts.parallel,
        };
        let raw = run_floating(&mut state, net, &cfg, opts.collapse_threshold)?;
        let mut res = postprocess(net, raw, opts)?;
        res.params = RunParams { seed: opts.seed, ..res.params };
        candidates.push(res);
    }
    let best = select_best(&candidates).expect("beta grid is nonempty");
    Ok(PipelineOutcome {
        best: candidates[best].clone(),
        candidates,
        max_iters,
    })
}

/// Selected run of [`run_pipeline_detailed`].
pub fn run_pipeline(
    net: &MultilayerNetwork,
    gamma: f64,
    omega: f64,
    q_max: usize,
    opts: &PipelineOptions,
) -> Result<RunResult> {
    Ok(run_pipeline_detailed(net, gamma, omega, q_max, opts)?.best)
}

/// One `(gamma, omega)` cell of a grid.
#[derive(Debug)]
pub struct GridCell {
    pub gamma: f64,
    pub omega: f64,
    pub outcome: Result<PipelineOutcome>,
}

/// Runs the pipeline on every `(gamma, omega)` pair, cells in parallel.
/// Cells are returned gamma-major in input order; a failing cell keeps its
/// error and does not stop the others.
pub fn run_grid(
    net: &MultilayerNetwork,
    gammas: &[f64],
    omegas: &[f64],
    q_max: usize,
    opts: &PipelineOptions,
) -> Result<Vec<GridCell>> {
    if gammas.is_empty() || omegas.is_empty() {
        return Err(Error::EmptyInput);
    }
    let cells: Vec<(f64, f64)> = gammas
        .iter()
        .flat_map(|&g| omegas.iter().map(move |&w| (g, w)))
        .collect();
    Ok(cells
        .into_par_iter()
        .map(|(gamma, omega)| GridCell {
            gamma,
            omega,
            outcome: run_pipeline_detailed(net, gamma, omega, q_max, opts),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{Marginals, Partition};

    fn fake(converged: bool, q_eff: usize, modularity: f64, f: f64) -> RunResult {
        RunResult {
            converged,
            iterations: 1,
            retrieval_partition: Partition::single(1),
            retrieval_modularity: modularity,
            bethe_free_energy: f,
            q_effective: q_eff,
            mean_entropy: 0.0,
            params: RunParams {
                beta: 1.0,
                gamma: 1.0,
                omega: 0.0,
                q: 2,
                seed: 0,
            },
            marginals: Marginals::uniform(1, 2),
            last_delta: 0.0,
        }
    }

    #[test]
    fn selection_prefers_converged_nontrivial() {
        let c = vec![
            fake(true, 1, 0.0, -1.0),
            fake(true, 3, 0.4, -0.5),
            fake(false, 4, 0.9, -3.0),
            fake(true, 2, 0.5, -0.2),
        ];
        assert_eq!(select_best(&c), Some(3));
    }

    #[test]
    fn selection_falls_back_to_lowest_free_energy() {
        let c = vec![fake(true, 1, 0.0, -1.0), fake(false, 4, 0.3, -2.0), fake(false, 3, 0.2, -2.5)];
        assert_eq!(select_best(&c), Some(2));
        assert_eq!(select_best(&[fake(true, 1, 0.0, -1.0)]), Some(0));
        assert_eq!(select_best(&[]), None);
    }
}
