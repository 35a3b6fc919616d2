use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::ids::TrackerId;

/// The set of tracker organizations a persona blocks. Serialized as a
/// sorted list of tracker ids; as a bitmask, bit `i` is the `i`-th tracker
/// in lexicographic id order.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BlockingConfig {
    pub blocked: BTreeSet<TrackerId>,
}

impl BlockingConfig {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn of<I, T>(ids: I) -> Self
    where
        I: IntoIterator<Item = T>,
        T: Into<TrackerId>,
    {
        Self {
            blocked: ids.into_iter().map(Into::into).collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.blocked.is_empty()
    }

    pub fn blocks(&self, tracker: &TrackerId) -> bool {
        self.blocked.contains(tracker)
    }

    /// `trackers` must be sorted; ids outside it are ignored.
    pub fn mask(&self, trackers: &[TrackerId]) -> u64 {
        trackers
            .iter()
            .enumerate()
            .filter(|(_, t)| self.blocked.contains(*t))
            .fold(0, |m, (i, _)| m | (1 << i))
    }

    pub fn from_mask(mask: u64, trackers: &[TrackerId]) -> Self {
        Self {
            blocked: trackers
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, t)| t.clone())
                .collect(),
        }
    }

    /// One flag per tracker in `trackers` order.
    pub fn features(&self, trackers: &[TrackerId]) -> Vec<bool> {
        trackers.iter().map(|t| self.blocked.contains(t)).collect()
    }
}

/// All 2^k subsets of `trackers`, in ascending bitmask order over the
/// lexicographically sorted ids. Index 0 is the empty configuration.
pub fn enumerate_blocking_configs(trackers: &[TrackerId]) -> Vec<BlockingConfig> {
    let mut sorted = trackers.to_vec();
    sorted.sort();
    sorted.dedup();
    assert!(sorted.len() < 64, "too many trackers to enumerate");
    (0..1u64 << sorted.len())
        .map(|m| BlockingConfig::from_mask(m, &sorted))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(names: &[&str]) -> Vec<TrackerId> {
        names.iter().map(|&n| TrackerId::from(n)).collect()
    }

    #[test]
    fn small_power_sets() {
        assert_eq!(enumerate_blocking_configs(&[]), vec![BlockingConfig::none()]);
        let t = ids(&["t2", "t1"]);
        let got = enumerate_blocking_configs(&t);
        assert_eq!(
            got,
            vec![
                BlockingConfig::none(),
                BlockingConfig::of(["t1"]),
                BlockingConfig::of(["t2"]),
                BlockingConfig::of(["t1", "t2"]),
            ]
        );
    }

    #[test]
    fn ten_trackers_give_1024_distinct_configs() {
        let t: Vec<TrackerId> = (0..10).map(|i| TrackerId::new(format!("t{i}"))).collect();
        let all = enumerate_blocking_configs(&t);
        assert_eq!(all.len(), 1024);
        let distinct: BTreeSet<_> = all.iter().collect();
        assert_eq!(distinct.len(), 1024);
    }

    #[test]
    fn mask_roundtrip_and_features() {
        let t = ids(&["a", "b", "c"]);
        let cfg = BlockingConfig::of(["c", "a"]);
        assert_eq!(cfg.mask(&t), 0b101);
        assert_eq!(BlockingConfig::from_mask(0b101, &t), cfg);
        assert_eq!(cfg.features(&t), vec![true, false, true]);
        assert_eq!(serde_json::to_string(&cfg).unwrap(), r#"["a","c"]"#);
    }
}
