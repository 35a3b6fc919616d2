//! Waterfall (RTB) and simultaneous (header bidding) first-price auctions.
//! Ties go to the lowest advertiser id.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::AuctionSlot;
use crate::ids::AdvertiserId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AuctionError {
    #[error("bid from {advertiser} is negative ({value})")]
    NegativeBid { advertiser: AdvertiserId, value: f64 },
    #[error("bid from {advertiser} has negative latency ({latency})")]
    NegativeLatency { advertiser: AdvertiserId, latency: f64 },
    #[error("timeout must be positive, got {0}")]
    Timeout(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bid {
    pub advertiser: AdvertiserId,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedBid {
    pub advertiser: AdvertiserId,
    pub value: f64,
    pub latency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Filled { winner: AdvertiserId, price: f64 },
    Unfilled,
}

impl Outcome {
    pub fn winner(&self) -> Option<&AdvertiserId> {
        match self {
            Outcome::Filled { winner, .. } => Some(winner),
            Outcome::Unfilled => None,
        }
    }
}

/// Highest bid, lowest id among equals.
fn best<'a, I>(bids: I) -> Option<(&'a AdvertiserId, f64)>
where
    I: IntoIterator<Item = (&'a AdvertiserId, f64)>,
{
    bids.into_iter().fold(None, |acc, (a, v)| match acc {
        Some((ba, bv)) if bv > v || (bv == v && ba <= a) => Some((ba, bv)),
        _ => Some((a, v)),
    })
}

/// Scan tiers in order; the first tier whose best bid reaches the floor sells
/// to that bidder at its bid.
pub fn auction_rtb(slot: &AuctionSlot, tiers: &[Vec<Bid>]) -> Result<Outcome, AuctionError> {
    for b in tiers.iter().flatten() {
        if b.value < 0.0 || b.value.is_nan() {
            return Err(AuctionError::NegativeBid {
                advertiser: b.advertiser.clone(),
                value: b.value,
            });
        }
    }
    for tier in tiers {
        if let Some((winner, price)) = best(tier.iter().map(|b| (&b.advertiser, b.value))) {
            if price >= slot.floor_price {
                return Ok(Outcome::Filled {
                    winner: winner.clone(),
                    price,
                });
            }
        }
    }
    Ok(Outcome::Unfilled)
}

/// Simultaneous auction over the bids that arrive within `timeout`. Returns
/// the outcome and the on-time bids, which a client-side wrapper can see.
pub fn auction_hb(
    slot: &AuctionSlot,
    bids: &[TimedBid],
    timeout: f64,
) -> Result<(Outcome, Vec<TimedBid>), AuctionError> {
    if !(timeout > 0.0) {
        return Err(AuctionError::Timeout(timeout));
    }
    for b in bids {
        if b.latency < 0.0 || b.latency.is_nan() {
            return Err(AuctionError::NegativeLatency {
                advertiser: b.advertiser.clone(),
                latency: b.latency,
            });
        }
        if b.value < 0.0 || b.value.is_nan() {
            return Err(AuctionError::NegativeBid {
                advertiser: b.advertiser.clone(),
                value: b.value,
            });
        }
    }
    let on_time: Vec<TimedBid> = bids.iter().filter(|b| b.latency <= timeout).cloned().collect();
    let outcome = match best(on_time.iter().map(|b| (&b.advertiser, b.value))) {
        Some((winner, price)) if price >= slot.floor_price => Outcome::Filled {
            winner: winner.clone(),
            price,
        },
        _ => Outcome::Unfilled,
    };
    Ok((outcome, on_time))
}
