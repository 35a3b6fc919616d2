//! Deterministic simulator of behavioral ad delivery.
//!
//! A [`World`] holds interest groups, websites, tracker organizations,
//! advertisers, a ground-truth [`SharingGraph`] and auction slots. For each
//! (run, persona, slot) the simulator decides which advertisers know the
//! persona's interest, runs the slot's auction, and logs the winning
//! creative. It also emits redirect chains with cookie-sync hops and, for
//! client-side header bidding, the visible bids.

pub mod auction;
pub mod config;
pub mod profiles;
mod simulate;
mod world;

pub use auction::{auction_hb, auction_rtb, AuctionError, Bid, Outcome, TimedBid};
pub use config::{
    Advertiser, AuctionSlot, ConfigError, GeneratedPersonas, InterestGroup, Mechanism, Persona,
    PersonaSpec, RunConfig, SharingEdge, SimConfig, SyncPairConfig, TrackerOrg, Website,
    WorldConfig,
};
pub use simulate::{
    cookie_for, run_simulation, uid_for, AdLogEntry, BidLogEntry, OutcomeEntry, RequestLogEntry,
    SimOutput,
};
pub use world::{build_world, persona_index, SharingGraph, SimError, World, WorldLayout};
