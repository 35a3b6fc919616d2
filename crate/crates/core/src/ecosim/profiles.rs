//! Ready-made world configurations.
//!
//! * [`small`]: 6 trackers, 5 advertisers, 4 planted edges, 64 + 20 personas,
//!   10 runs. Sized for CI.
//! * [`paper_scale`]: 10 tracker organizations, 9 advertisers, 11 edges,
//!   1,024 + 100 personas, 10 runs.
//! * [`single_edge`]: one tracker feeds the only bidder; everything else is
//!   deterministic.
//! * [`empty_graph`]: [`small`] without edges.
//! * [`three_groups`]: three interest groups with partially overlapping
//!   vocabularies and no blocking, for the interest-similarity experiment.
//! * [`random_world`]: a seeded random valid world for property tests.

use rand::Rng;

use super::config::*;
use crate::ids::{GroupId, SiteId, TrackerId};
use crate::tomography::BlockingConfig;

const GAMES: [&str; 8] = [
    "console", "controller", "esports", "fantasy", "gamepad", "headset", "quest", "rpg",
];
const GENERIC: [&str; 8] = [
    "bank", "car", "deal", "insurance", "loan", "phone", "sale", "travel",
];

fn strings(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

fn interest_sites(group: &str, n: usize) -> Vec<Website> {
    (0..n)
        .map(|i| Website {
            id: SiteId::new(format!("{group}-site-{i}")),
            group: Some(GroupId::from(group)),
        })
        .collect()
}

fn news_sites(n: usize) -> Vec<Website> {
    (0..n)
        .map(|i| Website {
            id: SiteId::new(format!("news-{i}")),
            group: None,
        })
        .collect()
}

/// Tracker `k` covers three of the six interest sites (a rotating window)
/// and every collection site.
fn trackers(names: &[&str], group: &str, observe_prob: f64, news: usize) -> Vec<TrackerOrg> {
    names
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let mut cov: Vec<SiteId> = (0..3)
                .map(|j| SiteId::new(format!("{group}-site-{}", (k + j) % 6)))
                .collect();
            cov.extend((0..news).map(|i| SiteId::new(format!("news-{i}"))));
            TrackerOrg {
                id: TrackerId::from(*name),
                site_coverage: cov,
                observe_prob,
            }
        })
        .collect()
}

fn advertiser(id: &str, latency: f64) -> Advertiser {
    Advertiser {
        id: id.into(),
        base_bid: 1.0,
        // small next to the noise: a large boost lets one advertiser's knowledge
        // reshape which of its rivals' ads win
        knowledge_boost: 0.2,
        bid_noise_sd: 0.3,
        creative_length: 16,
        latency,
        latency_jitter: 150.0,
    }
}

fn edge(t: &str, a: &str, reliability: f64) -> SharingEdge {
    SharingEdge {
        tracker: t.into(),
        advertiser: a.into(),
        reliability,
    }
}

/// `n_client` client-side HB slots, `n_server` server-side HB slots and
/// `n_rtb` waterfall slots, spread over the collection sites.
fn slots(n_client: usize, n_server: usize, n_rtb: usize, news: usize, rtb_tiers: Vec<Vec<&str>>) -> Vec<AuctionSlot> {
    let tiers: Vec<Vec<_>> = rtb_tiers
        .into_iter()
        .map(|t| t.into_iter().map(Into::into).collect())
        .collect();
    let kinds = std::iter::repeat_n(Mechanism::HbClient, n_client)
        .chain(std::iter::repeat_n(Mechanism::HbServer, n_server))
        .chain(std::iter::repeat_n(Mechanism::RtbWaterfall, n_rtb));
    kinds
        .enumerate()
        .map(|(i, mechanism)| AuctionSlot {
            id: format!("slot-{i:02}"),
            website: SiteId::new(format!("news-{}", i % news)),
            floor_price: 0.5,
            mechanism,
            tiers: if mechanism == Mechanism::RtbWaterfall {
                tiers.clone()
            } else {
                Vec::new()
            },
            timeout: 300.0,
        })
        .collect()
}

fn sync(i: &str, r: &str) -> SyncPairConfig {
    SyncPairConfig {
        initiator: i.into(),
        receiver: r.into(),
    }
}

pub fn small() -> SimConfig {
    let news = 4;
    let mut websites = interest_sites("games", 6);
    websites.extend(news_sites(news));
    SimConfig {
        world: WorldConfig {
            groups: vec![InterestGroup {
                id: "games".into(),
                vocabulary: strings(&GAMES),
                generic_overlap: 0.1,
            }],
            generic_pool: strings(&GENERIC),
            websites,
            trackers: trackers(
                &["adobe", "alphabet", "gumgum", "openx", "pubmatic", "rubicon"],
                "games",
                0.9,
                news,
            ),
            advertisers: vec![
                advertiser("adform", 80.0),
                advertiser("amazon", 60.0),
                advertiser("criteo", 100.0),
                advertiser("mediamath", 120.0),
                advertiser("tradedesk", 200.0),
            ],
            edges: vec![
                edge("alphabet", "criteo", 1.0),
                edge("rubicon", "amazon", 0.95),
                edge("openx", "adform", 0.9),
                edge("adobe", "adform", 0.95),
            ],
            slots: slots(
                8,
                6,
                6,
                news,
                vec![vec!["adform", "amazon", "criteo"], vec!["mediamath", "tradedesk"]],
            ),
            sync_pairs: vec![
                sync("alphabet", "rubicon"),
                sync("openx", "pubmatic"),
                sync("news-0", "gumgum"),
            ],
        },
        run: RunConfig {
            personas: PersonaSpec::Generated(GeneratedPersonas {
                group: "games".into(),
                controls: 20,
                trackers: None,
            }),
            runs: 10,
            seed: 0,
        },
    }
}

pub fn empty_graph() -> SimConfig {
    let mut c = small();
    c.world.edges.clear();
    c
}

pub fn paper_scale() -> SimConfig {
    let news = 4;
    let mut websites = interest_sites("games", 6);
    websites.extend(news_sites(news));
    let names = [
        "33across", "adobe", "alphabet", "facebook", "gumgum", "indexexchange", "openx", "oracle",
        "pubmatic", "rubicon",
    ];
    let advertisers = [
        "adform", "amazon", "criteo", "expadintel", "flashtalking", "mediamath", "openx-dsp",
        "pubmatic-dsp", "tradedesk",
    ];
    SimConfig {
        world: WorldConfig {
            groups: vec![InterestGroup {
                id: "games".into(),
                vocabulary: strings(&GAMES),
                generic_overlap: 0.1,
            }],
            generic_pool: strings(&GENERIC),
            websites,
            trackers: trackers(&names, "games", 0.9, news),
            advertisers: advertisers
                .iter()
                .enumerate()
                .map(|(i, a)| advertiser(a, 60.0 + 20.0 * i as f64))
                .collect(),
            edges: vec![
                edge("oracle", "openx-dsp", 0.9),
                edge("alphabet", "openx-dsp", 0.9),
                edge("openx", "expadintel", 0.95),
                edge("gumgum", "tradedesk", 0.95),
                edge("alphabet", "adform", 0.95),
                edge("alphabet", "pubmatic-dsp", 0.95),
                edge("openx", "mediamath", 0.9),
                edge("facebook", "mediamath", 0.9),
                edge("alphabet", "amazon", 1.0),
                edge("alphabet", "flashtalking", 1.0),
                edge("alphabet", "criteo", 1.0),
            ],
            slots: slots(
                12,
                8,
                10,
                news,
                vec![
                    vec!["adform", "amazon", "criteo", "expadintel", "flashtalking"],
                    vec!["mediamath", "openx-dsp", "pubmatic-dsp", "tradedesk"],
                ],
            ),
            sync_pairs: vec![
                sync("alphabet", "rubicon"),
                sync("alphabet", "openx"),
                sync("openx", "pubmatic"),
                sync("indexexchange", "33across"),
            ],
        },
        run: RunConfig {
            personas: PersonaSpec::Generated(GeneratedPersonas {
                group: "games".into(),
                controls: 100,
                trackers: None,
            }),
            runs: 10,
            seed: 0,
        },
    }
}

/// Tracker `t0` is the only path to `a0`, which is the only bidder and always
/// clears the floor. Observation and sharing are certain and the targeted and
/// generic vocabularies are disjoint, so a persona sees targeted ads exactly
/// when it leaves `t0` unblocked.
pub fn single_edge() -> SimConfig {
    let news = 2;
    let mut websites = interest_sites("games", 6);
    websites.extend(news_sites(news));
    let mut ts = trackers(&["t0", "t1", "t2"], "games", 1.0, news);
    ts[0].site_coverage = websites.iter().map(|w| w.id.clone()).collect();
    SimConfig {
        world: WorldConfig {
            groups: vec![InterestGroup {
                id: "games".into(),
                vocabulary: strings(&GAMES),
                generic_overlap: 0.0,
            }],
            generic_pool: strings(&GENERIC),
            websites,
            trackers: ts,
            advertisers: vec![Advertiser {
                id: "a0".into(),
                base_bid: 1.0,
                knowledge_boost: 0.5,
                bid_noise_sd: 0.0,
                creative_length: 16,
                latency: 0.0,
                latency_jitter: 0.0,
            }],
            edges: vec![edge("t0", "a0", 1.0)],
            slots: slots(8, 0, 0, news, vec![]),
            sync_pairs: vec![sync("t0", "t1")],
        },
        run: RunConfig {
            personas: PersonaSpec::Generated(GeneratedPersonas {
                group: "games".into(),
                controls: 4,
                trackers: None,
            }),
            runs: 10,
            seed: 0,
        },
    }
}

/// Three interest groups whose vocabularies share two tokens with each
/// neighbour. Every advertiser hears from every tracker, and no persona
/// blocks anything.
pub fn three_groups() -> SimConfig {
    let groups = ["adult", "games", "health"];
    let vocab = |g: usize| -> Vec<String> {
        let mut v: Vec<String> = (0..8).map(|i| format!("{}{i}", groups[g])).collect();
        v.push(format!("shared{g}a"));
        v.push(format!("shared{g}b"));
        let prev = (g + 2) % 3;
        v.push(format!("shared{prev}a"));
        v.push(format!("shared{prev}b"));
        v
    };
    let news = 3;
    let mut websites: Vec<Website> = groups.iter().flat_map(|g| interest_sites(g, 6)).collect();
    websites.extend(news_sites(news));
    let all_sites: Vec<SiteId> = websites.iter().map(|w| w.id.clone()).collect();
    let tracker_names = ["t0", "t1", "t2"];
    let advertisers = ["a0", "a1", "a2"];
    let mut personas = Vec::new();
    for g in groups {
        for i in 0..10 {
            personas.push(Persona::new(format!("{g}-{i:02}"), g, BlockingConfig::none()));
        }
    }
    SimConfig {
        world: WorldConfig {
            groups: (0..3)
                .map(|g| InterestGroup {
                    id: groups[g].into(),
                    vocabulary: vocab(g),
                    generic_overlap: 0.3,
                })
                .collect(),
            generic_pool: strings(&GENERIC),
            websites,
            trackers: tracker_names
                .iter()
                .map(|t| TrackerOrg {
                    id: (*t).into(),
                    site_coverage: all_sites.clone(),
                    observe_prob: 0.9,
                })
                .collect(),
            advertisers: advertisers.iter().map(|a| advertiser(a, 50.0)).collect(),
            edges: tracker_names
                .iter()
                .flat_map(|t| advertisers.iter().map(move |a| edge(t, a, 0.9)))
                .collect(),
            slots: slots(10, 0, 0, news, vec![]),
            sync_pairs: vec![],
        },
        run: RunConfig {
            personas: PersonaSpec::Explicit(personas),
            runs: 9,
            seed: 0,
        },
    }
}

/// Look a profile up by name.
pub fn by_name(name: &str) -> Option<SimConfig> {
    Some(match name {
        "small" => small(),
        "paper" | "paper-scale" => paper_scale(),
        "single-edge" => single_edge(),
        "empty" | "empty-graph" => empty_graph(),
        "three-groups" | "h1" => three_groups(),
        _ => return None,
    })
}

pub const NAMES: [&str; 5] = ["small", "paper-scale", "single-edge", "empty-graph", "three-groups"];

/// A random but valid world, for property tests. Trackers `t0..`, advertisers
/// `a0..`, random coverage, edges and sync pairs (tracker-to-tracker plus,
/// sometimes, one site-to-tracker pair); a generated population with two
/// controls over two runs.
pub fn random_world(seed: u64) -> SimConfig {
    let mut rng = crate::substream!(seed, "random-world");
    let news = 2;
    let mut websites = interest_sites("games", 6);
    websites.extend(news_sites(news));

    let n_trackers = rng.random_range(2..=6usize);
    let tracker_ids: Vec<String> = (0..n_trackers).map(|i| format!("t{i}")).collect();
    let trackers = tracker_ids
        .iter()
        .map(|id| {
            let mut cov: Vec<SiteId> = (0..6)
                .filter(|_| rng.random_bool(0.5))
                .map(|i| SiteId::new(format!("games-site-{i}")))
                .collect();
            if cov.is_empty() {
                cov.push(SiteId::new("games-site-0"));
            }
            cov.extend((0..news).map(|i| SiteId::new(format!("news-{i}"))));
            TrackerOrg {
                id: id.as_str().into(),
                site_coverage: cov,
                observe_prob: rng.random_range(0.5..=1.0),
            }
        })
        .collect();

    let n_adv = rng.random_range(1..=4usize);
    let adv_ids: Vec<String> = (0..n_adv).map(|i| format!("a{i}")).collect();
    let advertisers = adv_ids
        .iter()
        .map(|id| Advertiser {
            id: id.as_str().into(),
            base_bid: rng.random_range(0.8..1.5),
            knowledge_boost: rng.random_range(0.0..0.5),
            bid_noise_sd: rng.random_range(0.0..0.3),
            creative_length: rng.random_range(4..=12),
            latency: rng.random_range(0.0..200.0),
            latency_jitter: rng.random_range(0.0..150.0),
        })
        .collect();

    let mut edges = Vec::new();
    for t in &tracker_ids {
        for a in &adv_ids {
            if rng.random_bool(0.4) {
                edges.push(edge(t, a, rng.random_range(0.5..=1.0)));
            }
        }
    }

    let mut sync_pairs = Vec::new();
    for i in &tracker_ids {
        for r in &tracker_ids {
            if i != r && rng.random_bool(0.2) {
                sync_pairs.push(sync(i, r));
            }
        }
    }
    if rng.random_bool(0.5) {
        let r = &tracker_ids[rng.random_range(0..n_trackers)];
        sync_pairs.push(sync("news-0", r));
    }

    let tier: Vec<&str> = adv_ids.iter().map(String::as_str).collect();
    SimConfig {
        world: WorldConfig {
            groups: vec![InterestGroup {
                id: "games".into(),
                vocabulary: strings(&GAMES),
                generic_overlap: rng.random_range(0.0..0.5),
            }],
            generic_pool: strings(&GENERIC),
            websites,
            trackers,
            advertisers,
            edges,
            slots: slots(2, 1, 1, news, vec![tier]),
            sync_pairs,
        },
        run: RunConfig {
            personas: PersonaSpec::Generated(GeneratedPersonas {
                group: "games".into(),
                controls: 2,
                trackers: None,
            }),
            runs: 2,
            seed,
        },
    }
}
