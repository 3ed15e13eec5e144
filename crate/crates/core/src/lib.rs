//! Semantic generalization of model explanations.
//!
//! Per-instance feature attributions are averaged per class, the top features
//! of each class are mapped onto ontology terms, and those terms are
//! generalized over the ontology into compact class-specific conjunctions.
//! Generalization quality is scored with GenQ against the ungeneralized
//! direct mapping.
//!
//! ```text
//! explanations ─▶ aggregate ─▶ dynamic threshold ─▶ starting terms
//!                                                       │
//!           ontology + annotation map ─────────────────▶ reasoning ─▶ GenQ report
//! ```

pub mod explanations;
pub mod mapping;
pub mod metrics;
pub mod ontology;
pub mod pipeline;
pub mod reasoning;

use std::path::PathBuf;

pub use explanations::{
    AggregateOptions, AggregatedImportance, ExplanationSet, Explanations, Selection,
    StartingTermSets,
};
pub use mapping::{AnnotationMap, FeatureId};
pub use metrics::{GenQReport, IcTable, OutputFormat};
pub use ontology::{Ontology, OntologyBuilder, RelationKind, TermId};
pub use pipeline::{Inputs, RunConfig, RunParams, SweepGrid};
pub use reasoning::{Algorithm, ClassTermSets, ReasoningConfig};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Ontology {
        path: PathBuf,
        source: ontology::OntologyError,
    },
    #[error("{}: {source}", path.display())]
    Mapping {
        path: PathBuf,
        source: mapping::MappingError,
    },
    #[error("{}: {source}", path.display())]
    Explanations {
        path: PathBuf,
        source: explanations::ExplanationError,
    },
    #[error(transparent)]
    Threshold(#[from] explanations::ExplanationError),
    #[error(transparent)]
    Reasoning(#[from] reasoning::ReasonError),
    #[error(transparent)]
    Metrics(#[from] metrics::MetricsError),
    #[error("{0}")]
    Argument(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
