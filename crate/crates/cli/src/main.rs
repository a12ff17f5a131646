//! `mlbp`: run multilayer modularity belief propagation from the command line.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use multilayer_bp::bp::RunResult;
use multilayer_bp::generators::{
    dirichlet_dcsbm, dsbm, planted_partition_sbm, DirichletDcsbmParams, DsbmParams, NullCoupling,
};
use multilayer_bp::io::{self, format_entropies, format_inter, format_intra, format_marginals, format_partition};
use multilayer_bp::louvain::{greedy_multilayer_louvain, LouvainOptions};
use multilayer_bp::metrics::{self, marginal_entropy};
use multilayer_bp::model_selection::DEFAULT_THRESHOLD;
use multilayer_bp::scan::{
    run_grid, run_pipeline_detailed, AlignMode, BetaChoice, CommunityCount, InitMode, PipelineOptions,
};
use multilayer_bp::{CouplingPreset, Error, MultilayerNetwork, Partition};
use serde::Serialize;
use serde_json::json;

#[derive(Parser)]
#[command(name = "mlbp", version, about = "Community detection in multilayer networks by modularity belief propagation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipeline at one (gamma, omega) point.
    Run(RunArgs),
    /// Run the pipeline over a gamma/omega grid.
    Scan(ScanArgs),
    /// Write a synthetic benchmark network and its planted partition.
    Generate {
        #[command(subcommand)]
        model: Model,
    },
    /// Compare partitions or score one against a network.
    Score(ScoreArgs),
    /// Greedy Louvain-style baseline.
    Baseline {
        #[command(subcommand)]
        method: Baseline,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum CouplingArg {
    None,
    Temporal,
    Multiplex,
}

impl From<CouplingArg> for CouplingPreset {
    fn from(c: CouplingArg) -> Self {
        match c {
            CouplingArg::None => CouplingPreset::None,
            CouplingArg::Temporal => CouplingPreset::Temporal,
            CouplingArg::Multiplex => CouplingPreset::Multiplex,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AlignArg {
    Auto,
    Temporal,
    Multiplex,
    Off,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum CommunitiesArg {
    Paired,
    Max,
}

/// `auto`, `wide` or a number.
#[derive(Clone, Copy)]
struct BetaArg(BetaChoice);

impl FromStr for BetaArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "auto" => Ok(Self(BetaChoice::Auto)),
            "wide" => Ok(Self(BetaChoice::Wide)),
            _ => match s.parse::<f64>() {
                Ok(b) if b.is_finite() && b > 0.0 => Ok(Self(BetaChoice::Fixed(b))),
                _ => Err(format!("expected `auto`, `wide` or a positive number, got {s:?}")),
            },
        }
    }
}

#[derive(Args)]
struct NetworkArgs {
    /// Intralayer edges `layer,u,v[,weight]`.
    #[arg(long, value_name = "FILE")]
    intra: PathBuf,
    /// Interlayer edges `node,layer_a,layer_b[,weight]`.
    #[arg(long, value_name = "FILE", conflicts_with = "coupling")]
    inter: Option<PathBuf>,
    /// Interlayer coupling preset when no interlayer file is given.
    #[arg(long, value_enum, default_value = "none")]
    coupling: CouplingArg,
}

impl NetworkArgs {
    fn load(&self) -> Result<MultilayerNetwork, Error> {
        io::load_network(&self.intra, self.inter.as_deref(), self.coupling.into(), None, None)
    }
}

#[derive(Args)]
struct PipelineArgs {
    #[command(flatten)]
    network: NetworkArgs,
    /// Inverse temperature: `auto` for the beta* grid, `wide` for a scaled grid, or a value.
    #[arg(long, default_value = "auto")]
    beta: BetaArg,
    /// Largest number of communities.
    #[arg(long, default_value_t = 4)]
    qmax: usize,
    /// Convergence tolerance on the largest message change.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Sweep budget per run; derived from the network when omitted.
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Start from a soft spectral partition instead of uniform messages.
    #[arg(long)]
    spectral_init: bool,
    /// Share of the previous message kept at each update.
    #[arg(long, default_value_t = 0.0)]
    damping: f64,
    /// Update every message from the previous sweep instead of in random order.
    #[arg(long)]
    synchronous: bool,
    #[arg(long, value_enum, default_value = "auto")]
    align: AlignArg,
    /// Mean column distance below which communities merge.
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    collapse_threshold: f64,
    /// Community count per inverse temperature.
    #[arg(long, value_enum, default_value = "paired")]
    communities: CommunitiesArg,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

impl PipelineArgs {
    fn options(&self) -> PipelineOptions {
        PipelineOptions {
            seed: self.seed,
            tol: self.tol,
            max_iters: self.max_iters,
            damping: self.damping,
            synchronous: self.synchronous,
            init: if self.spectral_init {
                InitMode::Spectral { strength_factor: 5.0 }
            } else {
                PipelineOptions::default().init
            },
            align: match self.align {
                AlignArg::Auto => AlignMode::Auto,
                AlignArg::Temporal => AlignMode::Temporal,
                AlignArg::Multiplex => AlignMode::Multiplex,
                AlignArg::Off => AlignMode::Off,
            },
            beta: self.beta.0,
            communities: match self.communities {
                CommunitiesArg::Paired => CommunityCount::Paired,
                CommunitiesArg::Max => CommunityCount::Max,
            },
            collapse_threshold: self.collapse_threshold,
            ..PipelineOptions::default()
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    pipeline: PipelineArgs,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long, default_value_t = 0.0)]
    omega: f64,
}

#[derive(Args)]
struct ScanArgs {
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Resolution values, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    gamma: Vec<f64>,
    /// Coupling values, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    omega: Vec<f64>,
}

#[derive(Subcommand)]
enum Model {
    /// Single-layer planted-partition SBM.
    Sbm {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        q: usize,
        #[arg(long)]
        c: f64,
        #[arg(long)]
        epsilon: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Dynamic SBM on temporally coupled layers.
    Dsbm {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        layers: usize,
        #[arg(long)]
        q: usize,
        #[arg(long)]
        c: f64,
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        eta: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Dirichlet-null partition with degree-corrected edges.
    DirichletDcsbm {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        layers: usize,
        #[arg(long)]
        q: usize,
        #[arg(long, default_value_t = 1.0)]
        theta: f64,
        /// Probability of copying a label across layers.
        #[arg(long)]
        p: f64,
        /// Mixing parameter.
        #[arg(long)]
        mu: f64,
        #[arg(long, default_value_t = -2.0, allow_hyphen_values = true)]
        eta_k: f64,
        #[arg(long, default_value_t = 3.0)]
        k_min: f64,
        #[arg(long, default_value_t = 30.0)]
        k_max: f64,
        /// `temporal`, `multiplex` or `block:K`.
        #[arg(long, default_value = "temporal")]
        coupling: NullCouplingArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy)]
struct NullCouplingArg(NullCoupling);

impl FromStr for NullCouplingArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "temporal" => Ok(Self(NullCoupling::Temporal)),
            "multiplex" => Ok(Self(NullCoupling::Multiplex)),
            _ => s
                .strip_prefix("block:")
                .and_then(|k| k.parse().ok())
                .map(|k| Self(NullCoupling::Block(k)))
                .ok_or_else(|| format!("expected `temporal`, `multiplex` or `block:K`, got {s:?}")),
        }
    }
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct ScoreTarget {
    /// AMI over all node-layers between two partition files.
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    ami: Option<Vec<PathBuf>>,
    /// Layer-averaged AMI between two partition files.
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    layer_ami: Option<Vec<PathBuf>>,
    /// Multilayer modularity of a partition file (needs --intra).
    #[arg(long, value_name = "FILE", requires = "intra")]
    modularity: Option<PathBuf>,
}

#[derive(Args)]
struct ScoreArgs {
    #[command(flatten)]
    target: ScoreTarget,
    #[arg(long, value_name = "FILE")]
    intra: Option<PathBuf>,
    #[arg(long, value_name = "FILE", conflicts_with = "coupling")]
    inter: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "none")]
    coupling: CouplingArg,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long, default_value_t = 0.0)]
    omega: f64,
}

#[derive(Subcommand)]
enum Baseline {
    /// Greedy multilayer Louvain.
    Louvain {
        #[command(flatten)]
        network: NetworkArgs,
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        #[arg(long, default_value_t = 0.0)]
        omega: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Restart from the previous output until modularity stops improving.
        #[arg(long)]
        iterate: bool,
        /// Pick a random improving move instead of the best one.
        #[arg(long)]
        random_moves: bool,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
}

#[derive(Serialize)]
struct Summary {
    converged: bool,
    iterations: usize,
    beta: f64,
    gamma: f64,
    omega: f64,
    q_effective: usize,
    retrieval_modularity: f64,
    bethe_free_energy: f64,
    mean_entropy: f64,
    seed: u64,
}

impl Summary {
    fn new(r: &RunResult, seed: u64) -> Self {
        Self {
            converged: r.converged,
            iterations: r.iterations,
            beta: r.params.beta,
            gamma: r.params.gamma,
            omega: r.params.omega,
            q_effective: r.q_effective,
            retrieval_modularity: r.retrieval_modularity,
            bethe_free_energy: r.bethe_free_energy,
            mean_entropy: r.mean_entropy,
            seed,
        }
    }
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), Error> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), contents)?;
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

fn node_layer_rows(net: &MultilayerNetwork, part: &Partition) -> Vec<serde_json::Value> {
    part.labels()
        .iter()
        .enumerate()
        .map(|(i, &c)| json!({"node": net.node_of(i), "layer": net.layer_of(i), "community": c}))
        .collect()
}

/// Partition, marginals and entropies of one run.
fn write_run(net: &MultilayerNetwork, r: &RunResult, dir: &Path, format: Format) -> Result<(), Error> {
    let (entropies, _) = marginal_entropy(&r.marginals)?;
    match format {
        Format::Csv => {
            write(dir, "partition.csv", &format_partition(net, &r.retrieval_partition))?;
            write(dir, "marginals.csv", &format_marginals(net, &r.marginals))?;
            write(dir, "entropies.csv", &format_entropies(net, &entropies))?;
        }
        Format::Json => {
            let marginals: Vec<&[f64]> = r.marginals.rows().collect();
            let doc = json!({
                "partition": node_layer_rows(net, &r.retrieval_partition),
                "marginals": marginals,
                "entropies": entropies,
            });
            write(dir, "results.json", &to_json(&doc))?;
        }
    }
    Ok(())
}

fn cmd_run(args: &RunArgs) -> Result<(), Error> {
    let p = &args.pipeline;
    let net = p.network.load()?;
    let out = run_pipeline_detailed(&net, args.gamma, args.omega, p.qmax, &p.options())?;
    let summary = to_json(&Summary::new(&out.best, p.seed));
    write(&p.out, "summary.json", &summary)?;
    write_run(&net, &out.best, &p.out, p.format)?;
    print!("{summary}");
    Ok(())
}

fn candidate_rows(gamma: f64, omega: f64, runs: &[RunResult], s: &mut String) {
    for r in runs {
        let _ = writeln!(
            s,
            "{gamma},{omega},{},{},{},{},{},{},{}",
            r.params.beta,
            r.params.q,
            r.converged,
            r.iterations,
            r.q_effective,
            r.retrieval_modularity,
            r.bethe_free_energy
        );
    }
}

fn cmd_scan(args: &ScanArgs) -> Result<(), Error> {
    let p = &args.pipeline;
    let net = p.network.load()?;
    let cells = run_grid(&net, &args.gamma, &args.omega, p.qmax, &p.options())?;
    let mut summaries = Vec::new();
    let mut runs = String::from("gamma,omega,beta,q,converged,iterations,q_effective,retrieval_modularity,bethe_free_energy\n");
    for cell in cells {
        let out = cell.outcome?;
        candidate_rows(cell.gamma, cell.omega, &out.candidates, &mut runs);
        let dir = p.out.join(format!("gamma{}_omega{}", cell.gamma, cell.omega));
        write_run(&net, &out.best, &dir, p.format)?;
        summaries.push(Summary::new(&out.best, p.seed));
    }
    let summary = to_json(&summaries);
    write(&p.out, "scan.json", &summary)?;
    write(&p.out, "runs.csv", &runs)?;
    print!("{summary}");
    Ok(())
}

fn write_benchmark(dir: &Path, net: &MultilayerNetwork, planted: &Partition) -> Result<(), Error> {
    write(dir, "intra.csv", &format_intra(net))?;
    write(dir, "inter.csv", &format_inter(net))?;
    write(dir, "planted.csv", &format_partition(net, planted))?;
    Ok(())
}

fn cmd_generate(model: &Model) -> Result<(), Error> {
    let ((net, planted), out) = match model {
        Model::Sbm { n, q, c, epsilon, seed, out } => (planted_partition_sbm(*n, *q, *c, *epsilon, None, *seed)?, out),
        Model::Dsbm { n, layers, q, c, epsilon, eta, seed, out } => {
            let params = DsbmParams {
                n: *n,
                layers: *layers,
                q_true: *q,
                c_avg: *c,
                epsilon: *epsilon,
                eta: *eta,
                seed: *seed,
            };
            (dsbm(&params)?, out)
        }
        Model::DirichletDcsbm { n, layers, q, theta, p, mu, eta_k, k_min, k_max, coupling, seed, out } => {
            let params = DirichletDcsbmParams {
                n: *n,
                layers: *layers,
                q: *q,
                theta: *theta,
                p: *p,
                mu: *mu,
                eta_k: *eta_k,
                k_min: *k_min,
                k_max: *k_max,
                coupling: coupling.0,
                seed: *seed,
            };
            (dirichlet_dcsbm(&params)?, out)
        }
    };
    write_benchmark(out, &net, &planted)?;
    println!("{}", json!({"nodes": net.n_nodes(), "layers": net.n_layers(), "intra_edges": net.n_intra_edges(), "inter_edges": net.n_inter_edges()}));
    Ok(())
}

/// Reads two partition files over the same node-layers.
fn read_pair(files: &[PathBuf]) -> Result<(Partition, Partition, io::Shape), Error> {
    let a = fs::read_to_string(&files[0])?;
    let b = fs::read_to_string(&files[1])?;
    let shape = io::partition_shape(&a)?;
    let other = io::partition_shape(&b)?;
    if shape != other {
        return Err(Error::LengthMismatch {
            expected: shape.nodes * shape.layers,
            got: other.nodes * other.layers,
        });
    }
    Ok((
        io::parse_partition(&a, shape.nodes, shape.layers)?,
        io::parse_partition(&b, shape.nodes, shape.layers)?,
        shape,
    ))
}

fn cmd_score(args: &ScoreArgs) -> Result<(), Error> {
    let t = &args.target;
    let value = if let Some(files) = &t.ami {
        let (a, b, _) = read_pair(files)?;
        metrics::ami(&a, &b)?
    } else if let Some(files) = &t.layer_ami {
        let (a, b, shape) = read_pair(files)?;
        let layout = multilayer_bp::graph::build_network(
            &[],
            &multilayer_bp::InterSpec::Preset(CouplingPreset::None),
            shape.nodes,
            shape.layers,
        )?;
        metrics::layer_averaged_ami(&layout, &a, &b)?
    } else {
        let file = t.modularity.as_ref().expect("argument group requires one target");
        let intra = args.intra.as_ref().expect("clap enforces --intra");
        let net = io::load_network(intra, args.inter.as_deref(), args.coupling.into(), None, None)?;
        let part = io::parse_partition(&fs::read_to_string(file)?, net.n_nodes(), net.n_layers())?;
        metrics::modularity(&net, &part, args.gamma, args.omega)?
    };
    println!("{value}");
    Ok(())
}

fn cmd_baseline(method: &Baseline) -> Result<(), Error> {
    let Baseline::Louvain { network, gamma, omega, seed, iterate, random_moves, out, format } = method;
    let net = network.load()?;
    let mut opts = LouvainOptions::new(*gamma, *omega, *seed);
    opts.iterate = *iterate;
    opts.random_moves = *random_moves;
    let (part, q) = greedy_multilayer_louvain(&net, &opts)?;
    let summary = to_json(&json!({
        "modularity": q,
        "q_effective": part.q_effective(),
        "gamma": gamma,
        "omega": omega,
        "seed": seed,
    }));
    write(out, "louvain.json", &summary)?;
    match format {
        Format::Csv => write(out, "partition.csv", &format_partition(&net, &part))?,
        Format::Json => write(out, "partition.json", &to_json(&node_layer_rows(&net, &part)))?,
    }
    print!("{summary}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Scan(args) => cmd_scan(args),
        Command::Generate { model } => cmd_generate(model),
        Command::Score(args) => cmd_score(args),
        Command::Baseline { method } => cmd_baseline(method),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
