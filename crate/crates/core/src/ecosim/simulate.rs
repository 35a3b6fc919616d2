use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::auction::{auction_hb, auction_rtb, Bid, Outcome, TimedBid};
use super::config::{Mechanism, Persona};
use super::world::{SimError, World};
use crate::ids::{AdvertiserId, PersonaId};
use crate::rng::Stream;

/// Probability that a (run, persona) also produces a redirect carrying a uid
/// but no cookie, which must not count as a sync.
const DECOY_RATE: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdLogEntry {
    pub run: u32,
    pub persona: PersonaId,
    pub slot: String,
    pub advertiser: AdvertiserId,
    pub tokens: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestLogEntry {
    pub run: u32,
    pub persona: PersonaId,
    /// Chain number within (run, persona).
    pub chain: u32,
    pub chain_position: u32,
    pub source_domain: String,
    pub destination_domain: String,
    pub cookie_sent: Option<String>,
    pub uid_param: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BidLogEntry {
    pub run: u32,
    pub persona: PersonaId,
    pub slot: String,
    pub advertiser: AdvertiserId,
    pub bid: f64,
    pub latency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeEntry {
    pub run: u32,
    pub persona: PersonaId,
    pub slot: String,
    pub mechanism: Mechanism,
    pub winner: Option<AdvertiserId>,
    pub price: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimOutput {
    pub ad_log: Vec<AdLogEntry>,
    pub request_log: Vec<RequestLogEntry>,
    pub bid_log: Vec<BidLogEntry>,
    /// One entry per (run, persona, slot).
    pub outcomes: Vec<OutcomeEntry>,
}

pub fn cookie_for(domain: &str, persona: &PersonaId) -> String {
    format!("c-{domain}-{persona}")
}

pub fn uid_for(domain: &str, persona: &PersonaId) -> String {
    format!("u-{domain}-{persona}")
}

/// Simulate `runs` collection runs for every persona. Each (run, persona)
/// draws from its own substreams of `seed`, so the logs do not depend on
/// persona order or scheduling; they come out sorted by (run, persona) with
/// slots in configuration order.
pub fn run_simulation(
    world: &World,
    personas: &[Persona],
    runs: u32,
    seed: u64,
) -> Result<SimOutput, SimError> {
    if world.layout.slots.is_empty() {
        return Err(SimError::NoSlots);
    }
    if runs == 0 {
        return Err(super::config::ConfigError::invalid("run.runs", "must be at least 1").into());
    }
    world.validate_personas(personas)?;
    let mut sorted: Vec<&Persona> = personas.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));

    let jobs: Vec<(u32, &Persona)> = (0..runs)
        .flat_map(|r| sorted.iter().map(move |p| (r, *p)))
        .collect();
    let parts: Vec<Result<SimOutput, SimError>> = jobs
        .par_iter()
        .map(|&(run, p)| simulate_visit(world, p, run, seed))
        .collect();

    let mut out = SimOutput::default();
    for part in parts {
        let part = part?;
        out.ad_log.extend(part.ad_log);
        out.request_log.extend(part.request_log);
        out.bid_log.extend(part.bid_log);
        out.outcomes.extend(part.outcomes);
    }
    Ok(out)
}

fn simulate_visit(world: &World, persona: &Persona, run: u32, seed: u64) -> Result<SimOutput, SimError> {
    let mut rng: Stream = crate::substream!(seed, "sim", run, persona.id.as_str());
    let mut out = SimOutput::default();
    let advertisers = &world.layout.advertisers;

    for (s, slot) in world.layout.slots.iter().enumerate() {
        let tiers = world.tiers(s);
        let mut known = vec![false; advertisers.len()];
        let mut value = vec![0.0; advertisers.len()];
        for &a in tiers.iter().flatten() {
            let adv = &advertisers[a];
            known[a] = world.knows_idx(a, persona, &mut rng);
            let mut bid = adv.base_bid + if known[a] { adv.knowledge_boost } else { 0.0 };
            if adv.bid_noise_sd > 0.0 {
                let noise = Normal::new(0.0, adv.bid_noise_sd).expect("validated sd");
                bid += noise.sample(&mut rng);
            }
            value[a] = bid.max(0.0);
        }

        let outcome = match slot.mechanism {
            Mechanism::RtbWaterfall => {
                let bids: Vec<Vec<Bid>> = tiers
                    .iter()
                    .map(|tier| {
                        tier.iter()
                            .map(|&a| Bid {
                                advertiser: advertisers[a].id.clone(),
                                value: value[a],
                            })
                            .collect()
                    })
                    .collect();
                auction_rtb(slot, &bids)?
            }
            Mechanism::HbClient | Mechanism::HbServer => {
                let mut bids = Vec::new();
                for &a in tiers.iter().flatten() {
                    let adv = &advertisers[a];
                    let jitter = if adv.latency_jitter > 0.0 {
                        rng.random_range(0.0..adv.latency_jitter)
                    } else {
                        0.0
                    };
                    bids.push(TimedBid {
                        advertiser: adv.id.clone(),
                        value: value[a],
                        latency: adv.latency + jitter,
                    });
                }
                let (outcome, on_time) = auction_hb(slot, &bids, slot.timeout)?;
                // server-side wrappers hide the bids from the browser
                if slot.mechanism == Mechanism::HbClient {
                    out.bid_log.extend(on_time.into_iter().map(|b| BidLogEntry {
                        run,
                        persona: persona.id.clone(),
                        slot: slot.id.clone(),
                        advertiser: b.advertiser,
                        bid: b.value,
                        latency: b.latency,
                    }));
                }
                outcome
            }
        };

        if let Outcome::Filled { winner, .. } = &outcome {
            let a = world.advertiser_idx(winner).expect("winner is a world advertiser");
            let tokens = world.creative_idx(a, known[a], &persona.group, &mut rng);
            out.ad_log.push(AdLogEntry {
                run,
                persona: persona.id.clone(),
                slot: slot.id.clone(),
                advertiser: winner.clone(),
                tokens,
            });
        }
        let (winner, price) = match outcome {
            Outcome::Filled { winner, price } => (Some(winner), Some(price)),
            Outcome::Unfilled => (None, None),
        };
        out.outcomes.push(OutcomeEntry {
            run,
            persona: persona.id.clone(),
            slot: slot.id.clone(),
            mechanism: slot.mechanism,
            winner,
            price,
        });
    }

    out.request_log = request_chains(world, persona, run, seed);
    Ok(out)
}

/// (source, destination, cookie, uid)
type Hop = (String, String, Option<String>, Option<String>);

/// Synthetic redirect traffic for one (run, persona):
/// - each unblocked tracker present on a slot's page gets a one-hop request
///   carrying its own cookie;
/// - each sync pair with an unblocked initiator produces `page -> initiator`,
///   then `initiator -> receiver` carrying the receiver's cookie and the
///   initiator's uid unless the receiver is blocked;
/// - occasionally a tracker-to-tracker redirect carries a uid but no cookie.
fn request_chains(world: &World, persona: &Persona, run: u32, seed: u64) -> Vec<RequestLogEntry> {
    let mut rng: Stream = crate::substream!(seed, "requests", run, persona.id.as_str());
    let pid = &persona.id;
    let blocked = |d: &str| persona.blocking.blocked.iter().any(|t| t.as_str() == d);
    let mut chains: Vec<Vec<Hop>> = Vec::new();

    for slot in &world.layout.slots {
        for t in &world.layout.trackers {
            if !blocked(t.id.as_str()) && t.site_coverage.contains(&slot.website) {
                chains.push(vec![(
                    slot.website.to_string(),
                    t.id.to_string(),
                    Some(cookie_for(t.id.as_str(), pid)),
                    None,
                )]);
            }
        }
    }

    let page = world.layout.slots[0].website.to_string();
    for pair in &world.layout.sync_pairs {
        let (i, r) = (&pair.initiator, &pair.receiver);
        if blocked(i) {
            continue;
        }
        let mut chain = vec![(page.clone(), i.clone(), Some(cookie_for(i, pid)), None)];
        if !blocked(r) {
            chain.push((i.clone(), r.clone(), Some(cookie_for(r, pid)), Some(uid_for(i, pid))));
        }
        chains.push(chain);
    }

    let open: Vec<&str> = world
        .layout
        .trackers
        .iter()
        .map(|t| t.id.as_str())
        .filter(|t| !blocked(t))
        .collect();
    if open.len() >= 2 && rng.random_bool(DECOY_RATE) {
        let picked: Vec<&&str> = open.choose_multiple(&mut rng, 2).collect();
        let (a, b) = (picked[0].to_string(), picked[1].to_string());
        chains.push(vec![
            (page.clone(), a.clone(), Some(cookie_for(&a, pid)), None),
            (a.clone(), b, None, Some(uid_for(&a, pid))),
        ]);
    }

    chains
        .into_iter()
        .enumerate()
        .flat_map(|(c, hops)| {
            hops.into_iter()
                .enumerate()
                .map(move |(pos, (src, dst, cookie, uid))| RequestLogEntry {
                    run,
                    persona: pid.clone(),
                    chain: c as u32,
                    chain_position: pos as u32,
                    source_domain: src,
                    destination_domain: dst,
                    cookie_sent: cookie,
                    uid_param: uid,
                })
        })
        .collect()
}
