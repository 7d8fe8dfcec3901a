//! Training-set reduction for bug triage.
//!
//! Bug reports are labeled with the developer who fixed them, turned into a
//! word-count matrix, reduced by CHI word selection and ICF instance
//! selection (in either order), and used to train a multinomial Naive Bayes
//! recommender. [`harness`] runs the whole chain under cross-validation.

pub mod chi;
pub mod classifier;
pub mod corpus;
pub mod error;
pub mod harness;
pub mod icf;
pub mod io;
pub mod neighbors;
pub mod reduce;
pub mod synth;
pub mod vectorize;

pub use chi::ChiVariant;
pub use classifier::{train, RecommendationList, TrainedModel};
pub use corpus::{ingest, BugReport, Corpus, LabeledReport, Status};
pub use error::{Error, Result};
pub use harness::{run_experiment, ExperimentConfig, MetricsReport};
pub use icf::{icf_reduce, IcfLog, IcfParams};
pub use neighbors::{Metric, NeighborQuery};
pub use reduce::{reduce, Order, ReductionConfig, ReductionSummary};
pub use vectorize::{build_matrix, Stoplist, TextMatrix, Vocabulary};
