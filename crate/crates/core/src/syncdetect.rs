//! Cookie-sync detection over redirect logs.
//!
//! A hop `a -> b` is a sync event when the browser sends `b` its own cookie
//! and the request carries `a`'s uid. Redirect hops that carry a cookie but
//! no uid are reported as weak candidates only.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ecosim::RequestLogEntry;
use crate::ids::PersonaId;

#[derive(Debug, Error, PartialEq)]
pub enum SyncError {
    #[error("chain {chain} of persona {persona} in run {run}: expected position {expected}, found {found}")]
    MalformedChain {
        run: u32,
        persona: PersonaId,
        chain: u32,
        expected: u32,
        found: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Evidence {
    pub run: u32,
    pub persona: PersonaId,
    pub chain: u32,
    pub chain_position: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyncPair {
    pub initiator: String,
    pub receiver: String,
    /// Sorted, non-empty.
    pub evidence: Vec<Evidence>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyncReport {
    /// Sorted by (initiator, receiver).
    pub pairs: Vec<SyncPair>,
    /// Cookie-only redirect hops whose pair is not already in `pairs`.
    pub weak: Vec<SyncPair>,
}

impl SyncReport {
    pub fn pair_set(&self) -> BTreeSet<(String, String)> {
        self.pairs
            .iter()
            .map(|p| (p.initiator.clone(), p.receiver.clone()))
            .collect()
    }
}

type PairMap = BTreeMap<(String, String), Vec<Evidence>>;

fn into_pairs(map: PairMap) -> Vec<SyncPair> {
    map.into_iter()
        .map(|((initiator, receiver), mut evidence)| {
            evidence.sort();
            SyncPair {
                initiator,
                receiver,
                evidence,
            }
        })
        .collect()
}

/// Detect sync pairs. The result does not depend on the order of `log`.
pub fn detect_cookie_sync(log: &[RequestLogEntry]) -> Result<SyncReport, SyncError> {
    let mut hops: Vec<&RequestLogEntry> = log.iter().collect();
    hops.sort_by(|a, b| {
        (a.run, &a.persona, a.chain, a.chain_position).cmp(&(b.run, &b.persona, b.chain, b.chain_position))
    });

    let mut strict = PairMap::new();
    let mut weak = PairMap::new();
    let mut prev: Option<(u32, &PersonaId, u32, u32)> = None;
    for h in hops {
        let expected = match prev {
            Some((r, p, c, pos)) if (r, p, c) == (h.run, &h.persona, h.chain) => pos + 1,
            _ => 0,
        };
        if h.chain_position != expected {
            return Err(SyncError::MalformedChain {
                run: h.run,
                persona: h.persona.clone(),
                chain: h.chain,
                expected,
                found: h.chain_position,
            });
        }
        prev = Some((h.run, &h.persona, h.chain, h.chain_position));

        if h.source_domain == h.destination_domain || h.cookie_sent.is_none() {
            continue;
        }
        let target = match (&h.uid_param, h.chain_position) {
            (Some(_), _) => &mut strict,
            (None, p) if p > 0 => &mut weak,
            (None, _) => continue,
        };
        target
            .entry((h.source_domain.clone(), h.destination_domain.clone()))
            .or_default()
            .push(Evidence {
                run: h.run,
                persona: h.persona.clone(),
                chain: h.chain,
                chain_position: h.chain_position,
            });
    }
    weak.retain(|k, _| !strict.contains_key(k));
    Ok(SyncReport {
        pairs: into_pairs(strict),
        weak: into_pairs(weak),
    })
}
