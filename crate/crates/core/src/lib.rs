//! Sensing-matrix design for block-sparse recovery.
//!
//! The crate designs `M×N` sensing matrices `A` for a block-structured
//! dictionary `D` by minimizing a weighted sum of the inter-block and
//! sub-block coherence of the equivalent dictionary `E = A·D`
//! ([`wcm::run_wcm`]), alongside the closed-form `‖E'E − I‖²` minimizer
//! ([`ds::design_ds`]), coherence diagnostics ([`coherence`]), a Block-OMP
//! decoder ([`bomp`]) and a Monte Carlo harness ([`experiment`]).

pub mod block_model;
pub mod bomp;
pub mod coherence;
pub mod ds;
pub mod error;
pub mod experiment;
pub mod io;
pub mod wcm;

pub use block_model::{
    equivalent_dictionary, gram, sym_eig, BlockSparseVec, BlockStructure, Dict,
    EquivalentDictionary, GramParts, SensingMatrix, SymEig,
};
pub use bomp::{bomp_decode, BompConfig};
pub use coherence::{Alpha, CoherenceReport, MaskKind};
pub use ds::{design_ds, ds_objective};
pub use error::{Error, Result};
pub use wcm::{run_wcm, wcm_step, Init, WcmConfig, WcmReport};
