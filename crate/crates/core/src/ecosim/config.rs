//! Simulator configuration (the `SimConfig` JSON file) and its validation.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{AdvertiserId, GroupId, PersonaId, SiteId, TrackerId};
use crate::tomography::BlockingConfig;

/// Validation failure. `path` points at the offending field, e.g.
/// `world.edges[3].reliability`.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{path}: unknown {kind} id {id:?}")]
    Dangling {
        path: String,
        kind: &'static str,
        id: String,
    },
    #[error("{path}: probability {value} is outside [0, 1]")]
    Probability { path: String, value: f64 },
    #[error("{path}: duplicate {kind} id {id:?}")]
    Duplicate {
        path: String,
        kind: &'static str,
        id: String,
    },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

impl ConfigError {
    pub fn path(&self) -> &str {
        match self {
            ConfigError::Dangling { path, .. }
            | ConfigError::Probability { path, .. }
            | ConfigError::Duplicate { path, .. }
            | ConfigError::Invalid { path, .. } => path,
        }
    }

    pub fn invalid(path: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError::Invalid {
            path: path.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub world: WorldConfig,
    pub run: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    pub groups: Vec<InterestGroup>,
    /// Untargeted ad language used when an advertiser knows nothing.
    pub generic_pool: Vec<String>,
    pub websites: Vec<Website>,
    pub trackers: Vec<TrackerOrg>,
    pub advertisers: Vec<Advertiser>,
    #[serde(default)]
    pub edges: Vec<SharingEdge>,
    #[serde(default)]
    pub slots: Vec<AuctionSlot>,
    #[serde(default)]
    pub sync_pairs: Vec<SyncPairConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterestGroup {
    pub id: GroupId,
    pub vocabulary: Vec<String>,
    /// Probability that a targeted token is drawn from the generic pool
    /// instead of the group vocabulary.
    #[serde(default)]
    pub generic_overlap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Website {
    pub id: SiteId,
    /// Interest sites carry their group; personas of that group browse them
    /// during training. Sites without a group only host ad slots.
    #[serde(default)]
    pub group: Option<GroupId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackerOrg {
    pub id: TrackerId,
    pub site_coverage: Vec<SiteId>,
    pub observe_prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Advertiser {
    pub id: AdvertiserId,
    pub base_bid: f64,
    pub knowledge_boost: f64,
    pub bid_noise_sd: f64,
    pub creative_length: usize,
    /// Mean bid-response latency in milliseconds (header bidding only).
    #[serde(default)]
    pub latency: f64,
    /// Uniform extra latency in `[0, latency_jitter)`.
    #[serde(default)]
    pub latency_jitter: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharingEdge {
    pub tracker: TrackerId,
    pub advertiser: AdvertiserId,
    pub reliability: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mechanism {
    RtbWaterfall,
    HbClient,
    HbServer,
}

fn default_timeout() -> f64 {
    300.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuctionSlot {
    pub id: String,
    pub website: SiteId,
    pub floor_price: f64,
    pub mechanism: Mechanism,
    /// SSP tiers in publisher preference order. For header bidding the tiers
    /// are flattened into one simultaneous auction. Empty means one tier
    /// holding every advertiser.
    #[serde(default)]
    pub tiers: Vec<Vec<AdvertiserId>>,
    /// Header-bidding timeout in milliseconds.
    #[serde(default = "default_timeout")]
    pub timeout: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SyncPairConfig {
    pub initiator: String,
    pub receiver: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub personas: PersonaSpec,
    pub runs: u32,
    #[serde(default)]
    pub seed: u64,
}

/// Either an explicit persona list or a generated population: one persona
/// per blocking configuration of the listed trackers (all trackers when
/// omitted) plus `controls` control personas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PersonaSpec {
    Explicit(Vec<Persona>),
    Generated(GeneratedPersonas),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedPersonas {
    pub group: GroupId,
    pub controls: usize,
    #[serde(default)]
    pub trackers: Option<Vec<TrackerId>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Persona {
    pub id: PersonaId,
    pub group: GroupId,
    #[serde(default)]
    pub blocking: BlockingConfig,
    #[serde(default)]
    pub is_control: bool,
}

impl Persona {
    pub fn new(id: impl Into<PersonaId>, group: impl Into<GroupId>, blocking: BlockingConfig) -> Self {
        Self {
            id: id.into(),
            group: group.into(),
            blocking,
            is_control: false,
        }
    }

    pub fn control(id: impl Into<PersonaId>, group: impl Into<GroupId>) -> Self {
        Self {
            id: id.into(),
            group: group.into(),
            blocking: BlockingConfig::none(),
            is_control: true,
        }
    }
}

pub(crate) fn check_prob(path: String, value: f64) -> Result<(), ConfigError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(ConfigError::Probability { path, value })
    }
}

pub(crate) fn check_non_negative(path: String, value: f64) -> Result<(), ConfigError> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::invalid(path, format!("must be a non-negative number, got {value}")))
    }
}

pub(crate) fn unique<'a, I>(path: &str, kind: &'static str, ids: I) -> Result<BTreeSet<&'a str>, ConfigError>
where
    I: IntoIterator<Item = &'a str>,
{
    let mut seen = BTreeSet::new();
    for (i, id) in ids.into_iter().enumerate() {
        if !seen.insert(id) {
            return Err(ConfigError::Duplicate {
                path: format!("{path}[{i}].id"),
                kind,
                id: id.to_owned(),
            });
        }
    }
    Ok(seen)
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.runs == 0 {
            return Err(ConfigError::invalid("run.runs", "must be at least 1"));
        }
        Ok(())
    }
}
