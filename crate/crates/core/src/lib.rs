//! Deterministic ad-ecosystem simulator and the tomography pipeline that
//! recovers tracker-to-advertiser data sharing from what ads a persona sees.

pub mod artifacts;
pub mod ecosim;
pub mod forest;
pub mod ids;
pub mod pipeline;
pub mod rng;
pub mod stattest;
pub mod syncdetect;
pub mod textvec;
pub mod tomography;

pub use ids::{AdvertiserId, GroupId, PersonaId, SiteId, TrackerId};
pub use pipeline::{run_pipeline, PipelineConfig, PipelineError};
