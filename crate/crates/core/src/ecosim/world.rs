use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::*;
use crate::ids::{AdvertiserId, GroupId, PersonaId, TrackerId};
use crate::rng::Stream;
use crate::tomography::enumerate_blocking_configs;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("unknown {kind} {id:?}")]
    Unknown { kind: &'static str, id: String },
    #[error("no ad-collection slots configured")]
    NoSlots,
    #[error("empty {0}")]
    EmptyPool(String),
    #[error(transparent)]
    Auction(#[from] super::auction::AuctionError),
}

/// Ground-truth data-sharing edges, sorted by (tracker, advertiser).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SharingGraph {
    pub edges: Vec<SharingEdge>,
}

impl SharingGraph {
    pub fn new(mut edges: Vec<SharingEdge>) -> Self {
        edges.sort_by(|a, b| (&a.tracker, &a.advertiser).cmp(&(&b.tracker, &b.advertiser)));
        Self { edges }
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn edge_set(&self) -> BTreeSet<(TrackerId, AdvertiserId)> {
        self.edges
            .iter()
            .map(|e| (e.tracker.clone(), e.advertiser.clone()))
            .collect()
    }
}

/// Static description of a validated world; independent of the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldLayout {
    pub groups: Vec<InterestGroup>,
    pub generic_pool: Vec<String>,
    pub websites: Vec<Website>,
    /// Sorted by id; this order defines blocking bitmasks and forest features.
    pub trackers: Vec<TrackerOrg>,
    /// Sorted by id.
    pub advertisers: Vec<Advertiser>,
    pub graph: SharingGraph,
    pub slots: Vec<AuctionSlot>,
    pub sync_pairs: Vec<SyncPairConfig>,
}

#[derive(Debug, Clone)]
struct GroupIndex {
    vocabulary: Vec<String>,
    generic_overlap: f64,
    /// number of this group's interest sites each tracker covers
    coverage: Vec<usize>,
}

/// An immutable simulated world. `seed` names the stream state handed to
/// anything that draws from the world; the layout never depends on it.
#[derive(Debug, Clone)]
pub struct World {
    pub layout: WorldLayout,
    pub seed: u64,
    tracker_index: BTreeMap<TrackerId, usize>,
    advertiser_index: BTreeMap<AdvertiserId, usize>,
    groups: BTreeMap<GroupId, GroupIndex>,
    /// per advertiser: (tracker index, reliability), ascending tracker order
    incoming: Vec<Vec<(usize, f64)>>,
    /// per slot: bidding tiers as advertiser indices
    slot_tiers: Vec<Vec<Vec<usize>>>,
}

pub fn build_world(config: &SimConfig, seed: u64) -> Result<World, ConfigError> {
    let w = &config.world;

    let group_ids = unique("world.groups", "group", w.groups.iter().map(|g| g.id.as_str()))?;
    for (i, g) in w.groups.iter().enumerate() {
        if g.vocabulary.is_empty() {
            return Err(ConfigError::invalid(
                format!("world.groups[{i}].vocabulary"),
                "must not be empty",
            ));
        }
        check_prob(format!("world.groups[{i}].generic_overlap"), g.generic_overlap)?;
    }
    if w.generic_pool.is_empty() {
        return Err(ConfigError::invalid("world.generic_pool", "must not be empty"));
    }

    let site_ids = unique("world.websites", "website", w.websites.iter().map(|s| s.id.as_str()))?;
    for (i, s) in w.websites.iter().enumerate() {
        if let Some(g) = &s.group {
            if !group_ids.contains(g.as_str()) {
                return Err(dangling(format!("world.websites[{i}].group"), "group", g.as_str()));
            }
        }
    }

    let tracker_ids = unique("world.trackers", "tracker", w.trackers.iter().map(|t| t.id.as_str()))?;
    if w.trackers.len() >= 64 {
        return Err(ConfigError::invalid("world.trackers", "at most 63 trackers are supported"));
    }
    for (i, t) in w.trackers.iter().enumerate() {
        check_prob(format!("world.trackers[{i}].observe_prob"), t.observe_prob)?;
        for (j, s) in t.site_coverage.iter().enumerate() {
            if !site_ids.contains(s.as_str()) {
                return Err(dangling(
                    format!("world.trackers[{i}].site_coverage[{j}]"),
                    "website",
                    s.as_str(),
                ));
            }
        }
    }

    let adv_ids = unique(
        "world.advertisers",
        "advertiser",
        w.advertisers.iter().map(|a| a.id.as_str()),
    )?;
    for (i, a) in w.advertisers.iter().enumerate() {
        let p = |f: &str| format!("world.advertisers[{i}].{f}");
        check_non_negative(p("base_bid"), a.base_bid)?;
        check_non_negative(p("knowledge_boost"), a.knowledge_boost)?;
        check_non_negative(p("bid_noise_sd"), a.bid_noise_sd)?;
        check_non_negative(p("latency"), a.latency)?;
        check_non_negative(p("latency_jitter"), a.latency_jitter)?;
        if a.creative_length == 0 {
            return Err(ConfigError::invalid(p("creative_length"), "must be at least 1"));
        }
    }

    let mut seen_edges = BTreeSet::new();
    for (i, e) in w.edges.iter().enumerate() {
        if !tracker_ids.contains(e.tracker.as_str()) {
            return Err(dangling(format!("world.edges[{i}].tracker"), "tracker", e.tracker.as_str()));
        }
        if !adv_ids.contains(e.advertiser.as_str()) {
            return Err(dangling(
                format!("world.edges[{i}].advertiser"),
                "advertiser",
                e.advertiser.as_str(),
            ));
        }
        check_prob(format!("world.edges[{i}].reliability"), e.reliability)?;
        if !seen_edges.insert((&e.tracker, &e.advertiser)) {
            return Err(ConfigError::Duplicate {
                path: format!("world.edges[{i}]"),
                kind: "edge",
                id: format!("{}->{}", e.tracker, e.advertiser),
            });
        }
    }

    unique("world.slots", "slot", w.slots.iter().map(|s| s.id.as_str()))?;
    for (i, s) in w.slots.iter().enumerate() {
        if !site_ids.contains(s.website.as_str()) {
            return Err(dangling(format!("world.slots[{i}].website"), "website", s.website.as_str()));
        }
        check_non_negative(format!("world.slots[{i}].floor_price"), s.floor_price)?;
        if s.mechanism != Mechanism::RtbWaterfall && !(s.timeout > 0.0) {
            return Err(ConfigError::invalid(
                format!("world.slots[{i}].timeout"),
                "header-bidding timeout must be positive",
            ));
        }
        let mut in_slot = BTreeSet::new();
        for (j, tier) in s.tiers.iter().enumerate() {
            for (k, a) in tier.iter().enumerate() {
                let path = format!("world.slots[{i}].tiers[{j}][{k}]");
                if !adv_ids.contains(a.as_str()) {
                    return Err(dangling(path, "advertiser", a.as_str()));
                }
                if !in_slot.insert(a) {
                    return Err(ConfigError::Duplicate {
                        path,
                        kind: "advertiser",
                        id: a.to_string(),
                    });
                }
            }
        }
    }

    let mut seen_pairs = BTreeSet::new();
    for (i, p) in w.sync_pairs.iter().enumerate() {
        for (field, d) in [("initiator", &p.initiator), ("receiver", &p.receiver)] {
            if !tracker_ids.contains(d.as_str()) && !site_ids.contains(d.as_str()) {
                return Err(dangling(format!("world.sync_pairs[{i}].{field}"), "domain", d));
            }
        }
        if p.initiator == p.receiver {
            return Err(ConfigError::invalid(
                format!("world.sync_pairs[{i}]"),
                "initiator and receiver must differ",
            ));
        }
        if !seen_pairs.insert(p) {
            return Err(ConfigError::Duplicate {
                path: format!("world.sync_pairs[{i}]"),
                kind: "sync pair",
                id: format!("{}->{}", p.initiator, p.receiver),
            });
        }
    }

    let mut trackers = w.trackers.clone();
    trackers.sort_by(|a, b| a.id.cmp(&b.id));
    let mut advertisers = w.advertisers.clone();
    advertisers.sort_by(|a, b| a.id.cmp(&b.id));
    let mut sync_pairs = w.sync_pairs.clone();
    sync_pairs.sort();

    let layout = WorldLayout {
        groups: w.groups.clone(),
        generic_pool: w.generic_pool.clone(),
        websites: w.websites.clone(),
        trackers,
        advertisers,
        graph: SharingGraph::new(w.edges.clone()),
        slots: w.slots.clone(),
        sync_pairs,
    };
    Ok(World::index(layout, seed))
}

fn dangling(path: String, kind: &'static str, id: &str) -> ConfigError {
    ConfigError::Dangling {
        path,
        kind,
        id: id.to_owned(),
    }
}

impl World {
    fn index(layout: WorldLayout, seed: u64) -> Self {
        let tracker_index: BTreeMap<_, _> = layout
            .trackers
            .iter()
            .enumerate()
            .map(|(i, t)| (t.id.clone(), i))
            .collect();
        let advertiser_index: BTreeMap<_, _> = layout
            .advertisers
            .iter()
            .enumerate()
            .map(|(i, a)| (a.id.clone(), i))
            .collect();
        let groups = layout
            .groups
            .iter()
            .map(|g| {
                let sites: BTreeSet<_> = layout
                    .websites
                    .iter()
                    .filter(|s| s.group.as_ref() == Some(&g.id))
                    .map(|s| &s.id)
                    .collect();
                let coverage = layout
                    .trackers
                    .iter()
                    .map(|t| t.site_coverage.iter().filter(|s| sites.contains(s)).count())
                    .collect();
                (
                    g.id.clone(),
                    GroupIndex {
                        vocabulary: g.vocabulary.clone(),
                        generic_overlap: g.generic_overlap,
                        coverage,
                    },
                )
            })
            .collect();
        let mut incoming = vec![Vec::new(); layout.advertisers.len()];
        for e in &layout.graph.edges {
            incoming[advertiser_index[&e.advertiser]].push((tracker_index[&e.tracker], e.reliability));
        }
        let slot_tiers = layout
            .slots
            .iter()
            .map(|s| {
                if s.tiers.is_empty() {
                    vec![(0..layout.advertisers.len()).collect()]
                } else {
                    s.tiers
                        .iter()
                        .map(|tier| tier.iter().map(|a| advertiser_index[a]).collect())
                        .collect()
                }
            })
            .collect();
        Self {
            layout,
            seed,
            tracker_index,
            advertiser_index,
            groups,
            incoming,
            slot_tiers,
        }
    }

    pub fn graph(&self) -> &SharingGraph {
        &self.layout.graph
    }

    pub fn tracker_ids(&self) -> Vec<TrackerId> {
        self.layout.trackers.iter().map(|t| t.id.clone()).collect()
    }

    pub fn advertiser_ids(&self) -> Vec<AdvertiserId> {
        self.layout.advertisers.iter().map(|a| a.id.clone()).collect()
    }

    pub fn advertiser(&self, id: &AdvertiserId) -> Result<&Advertiser, SimError> {
        self.advertiser_index
            .get(id)
            .map(|&i| &self.layout.advertisers[i])
            .ok_or_else(|| unknown("advertiser", id.as_str()))
    }

    pub fn group(&self, id: &GroupId) -> Result<&InterestGroup, SimError> {
        self.layout
            .groups
            .iter()
            .find(|g| &g.id == id)
            .ok_or_else(|| unknown("group", id.as_str()))
    }

    pub(crate) fn advertiser_idx(&self, id: &AdvertiserId) -> Option<usize> {
        self.advertiser_index.get(id).copied()
    }

    pub(crate) fn tiers(&self, slot: usize) -> &[Vec<usize>] {
        &self.slot_tiers[slot]
    }

    /// Group-exclusive vocabulary: group tokens that are not in the generic pool.
    pub fn exclusive_vocabulary(&self, group: &GroupId) -> Result<BTreeSet<String>, SimError> {
        let g = self.group(group)?;
        let generic: BTreeSet<&String> = self.layout.generic_pool.iter().collect();
        Ok(g.vocabulary
            .iter()
            .filter(|t| !generic.contains(t))
            .cloned()
            .collect())
    }

    /// Check a persona list against the world.
    pub fn validate_personas(&self, personas: &[Persona]) -> Result<(), ConfigError> {
        if personas.is_empty() {
            return Err(ConfigError::invalid("run.personas", "must not be empty"));
        }
        unique("run.personas", "persona", personas.iter().map(|p| p.id.as_str()))?;
        for (i, p) in personas.iter().enumerate() {
            if !self.groups.contains_key(&p.group) {
                return Err(dangling(format!("run.personas[{i}].group"), "group", p.group.as_str()));
            }
            for t in &p.blocking.blocked {
                if !self.tracker_index.contains_key(t) {
                    return Err(dangling(format!("run.personas[{i}].blocking"), "tracker", t.as_str()));
                }
            }
            if p.is_control && !p.blocking.is_empty() {
                return Err(ConfigError::invalid(
                    format!("run.personas[{i}].blocking"),
                    "control personas must not block trackers",
                ));
            }
        }
        Ok(())
    }

    /// Resolve the run section into concrete personas, sorted by id.
    pub fn personas(&self, spec: &PersonaSpec) -> Result<Vec<Persona>, ConfigError> {
        let mut out = match spec {
            PersonaSpec::Explicit(list) => list.clone(),
            PersonaSpec::Generated(g) => {
                let trackers = match &g.trackers {
                    Some(t) => t.clone(),
                    None => self.tracker_ids(),
                };
                let configs = enumerate_blocking_configs(&trackers);
                let width = digits(configs.len());
                let cwidth = digits(g.controls);
                let mut v: Vec<Persona> = configs
                    .into_iter()
                    .enumerate()
                    .map(|(i, b)| Persona::new(format!("p{i:0width$}"), g.group.clone(), b))
                    .collect();
                v.extend(
                    (0..g.controls).map(|i| Persona::control(format!("c{i:0cwidth$}"), g.group.clone())),
                );
                v
            }
        };
        self.validate_personas(&out)?;
        out.sort_by(|a, b| a.id.cmp(&b.id));
        Ok(out)
    }

    /// Whether `advertiser` knows the persona's interest for one impression.
    ///
    /// Incoming edges are tried in tracker order. An edge fires when its
    /// tracker is not blocked, covers at least one of the persona's interest
    /// sites, observed at least one of those visits, and the edge's
    /// reliability draw succeeds.
    pub fn knowledge_state(
        &self,
        advertiser: &AdvertiserId,
        persona: &Persona,
        rng: &mut Stream,
    ) -> Result<bool, SimError> {
        let a = self
            .advertiser_idx(advertiser)
            .ok_or_else(|| unknown("advertiser", advertiser.as_str()))?;
        let group = self
            .groups
            .get(&persona.group)
            .ok_or_else(|| unknown("group", persona.group.as_str()))?;
        Ok(self.knows(a, persona, group, rng))
    }

    pub(crate) fn knows_idx(&self, a: usize, persona: &Persona, rng: &mut Stream) -> bool {
        self.knows(a, persona, &self.groups[&persona.group], rng)
    }

    fn knows(&self, a: usize, persona: &Persona, group: &GroupIndex, rng: &mut Stream) -> bool {
        for &(t, reliability) in &self.incoming[a] {
            let tracker = &self.layout.trackers[t];
            if persona.blocking.blocks(&tracker.id) {
                continue;
            }
            let visits = group.coverage[t];
            if visits == 0 {
                continue;
            }
            // at least one of `visits` independent observations succeeds
            let p_seen = 1.0 - (1.0 - tracker.observe_prob).powi(visits as i32);
            if rng.random_bool(p_seen.clamp(0.0, 1.0)) && rng.random_bool(reliability) {
                return true;
            }
        }
        false
    }

    /// Draw a creative for `advertiser`. A targeted creative takes each
    /// token from the group vocabulary, except that with probability
    /// `generic_overlap` a token comes from the generic pool; an untargeted
    /// creative draws every token from the generic pool.
    pub fn generate_creative(
        &self,
        advertiser: &AdvertiserId,
        known: bool,
        group: &GroupId,
        rng: &mut Stream,
    ) -> Result<Vec<String>, SimError> {
        let adv = self.advertiser(advertiser)?;
        let g = self.groups.get(group).ok_or_else(|| unknown("group", group.as_str()))?;
        if g.vocabulary.is_empty() {
            return Err(SimError::EmptyPool(format!("vocabulary of group {group}")));
        }
        Ok(self.creative_tokens(adv.creative_length, known, g, rng))
    }

    pub(crate) fn creative_idx(&self, a: usize, known: bool, group: &GroupId, rng: &mut Stream) -> Vec<String> {
        let len = self.layout.advertisers[a].creative_length;
        self.creative_tokens(len, known, &self.groups[group], rng)
    }

    fn creative_tokens(&self, len: usize, known: bool, g: &GroupIndex, rng: &mut Stream) -> Vec<String> {
        let pool = &self.layout.generic_pool;
        (0..len)
            .map(|_| {
                let generic = !known || rng.random_bool(g.generic_overlap);
                let src = if generic { pool } else { &g.vocabulary };
                src[rng.random_range(0..src.len())].clone()
            })
            .collect()
    }
}

fn unknown(kind: &'static str, id: &str) -> SimError {
    SimError::Unknown {
        kind,
        id: id.to_owned(),
    }
}

fn digits(n: usize) -> usize {
    n.saturating_sub(1).max(1).to_string().len()
}

/// Persona ids for lookups.
pub fn persona_index(personas: &[Persona]) -> BTreeMap<PersonaId, &Persona> {
    personas.iter().map(|p| (p.id.clone(), p)).collect()
}
