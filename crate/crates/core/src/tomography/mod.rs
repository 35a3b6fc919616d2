//! Tomography: turn ad logs into per-advertiser blocking experiments and
//! infer which trackers feed each advertiser.

mod blocking;
mod h1;
mod infer;
mod records;

use thiserror::Error;

use crate::forest::ForestError;
use crate::ids::{AdvertiserId, PersonaId};
use crate::stattest::StatError;
use crate::textvec::TextError;

pub use blocking::{enumerate_blocking_configs, BlockingConfig};
pub use h1::{group_documents, h1_similarity_matrix, SimilarityMatrix};
pub use infer::{
    evaluate, infer_relationships, inferred_edges, run_inference, AdvertiserReport, Evaluation,
    InferenceSettings, TrackerGain,
};
pub use records::{
    adlog_corpus, collate, differs_from_control, fill_missing, flag_changes, pool_controls,
    records_from_lines, segment_records, RecordLine, Segmentation, VectorRecord,
};

#[derive(Debug, Error)]
pub enum TomographyError {
    #[error("ad log mentions unknown persona {0}")]
    UnknownPersona(PersonaId),
    #[error("no control vector for advertiser {advertiser} in run {run}")]
    MissingControl { advertiser: AdvertiserId, run: u32 },
    #[error("flag stage required: record ({advertiser}, {persona}, run {run}) has no change flag")]
    MissingFlag {
        advertiser: AdvertiserId,
        persona: PersonaId,
        run: u32,
    },
    #[error("advertiser {advertiser}: persona {persona} has {records} records, fewer than {folds} folds")]
    TooFewRecords {
        advertiser: AdvertiserId,
        persona: String,
        records: usize,
        folds: usize,
    },
    #[error("group {group} has {runs} run(s); at least 2 are needed")]
    TooFewRuns { group: String, runs: usize },
    #[error("segmentation: {0}")]
    Segmentation(String),
    #[error(transparent)]
    Text(#[from] TextError),
    #[error(transparent)]
    Stat(#[from] StatError),
    #[error(transparent)]
    Forest(#[from] ForestError),
}
