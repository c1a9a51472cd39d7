//! Mass-preserving crossmaps between classification key sets, with exact
//! rational weights.
//!
//! A crossmap assigns each source key a set of weighted links to target
//! keys whose weights sum to exactly one. Applying it to a shared mass
//! array redistributes every source value across its targets without
//! creating or losing mass.

pub mod algebra;
pub mod extraction;
pub mod graph;
pub mod io;
mod key;
mod model;
mod rational;
pub mod transform;
pub mod validation;

pub use algebra::{
    compose, compose_all, matvec_dense, reverse, to_matrix, AlgebraError, MatrixEncoding,
};
pub use extraction::{
    probe_blackbox, rationalize, Blackbox, ExternalCommand, ExtractionResult, InProcess,
    ProbeError, ProbeOptions,
};
pub use graph::{
    components, imputation_metrics, summarize, Component, ImputationMetrics, RelationType, Summary,
};
pub use key::{EmptyKey, Key};
pub use model::{
    build_crossmap, identity_crossmap, Crossmap, DuplicateKey, Edge, EdgeListDraft, EmptyKeySet,
    Finding, FindingCode, MassValue, Severity, SharedMassArray, Subject, ValidationReport,
};
pub use rational::{parse_rational, ParseRationalError, Rational};
pub use transform::{
    apply_transform, OnUncovered, TransformError, TransformOptions, TransformReceipt,
};
pub use validation::{check_coverage, check_mass_preserving, CoverageReport};
