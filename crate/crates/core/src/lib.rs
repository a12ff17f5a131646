//! Community detection in multilayer networks by belief propagation on the
//! multilayer modularity Hamiltonian.
//!
//! The crate is organized bottom-up: [`graph`] stores the supra-adjacency
//! structure, [`metrics`] scores partitions, [`bp`] runs message passing,
//! [`beta_star`] picks inverse temperatures, [`model_selection`] collapses and
//! selects solutions, [`alignment`] relabels communities across layers, and
//! [`scan`] drives everything over a resolution/coupling grid. [`spectral`],
//! [`louvain`] and [`generators`] supply initializations, a baseline and
//! synthetic benchmarks.

pub mod error;
pub mod graph;
pub mod metrics;
pub mod bp;
pub mod beta_star;
pub mod model_selection;
pub mod alignment;
pub mod spectral;
pub mod generators;
pub mod louvain;
pub mod scan;
pub mod io;

pub use error::{Error, Result};
pub use graph::{Coupling, CouplingPreset, InterEdge, InterSpec, IntraEdge, MultilayerNetwork};
pub use metrics::{Marginals, Partition};
