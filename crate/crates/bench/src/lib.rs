//! Fixtures shared by the benchmarks.

use adtomo_core::ecosim::{build_world, profiles, Persona, World};
use adtomo_core::forest::Sample;
use adtomo_core::tomography::BlockingConfig;
use adtomo_core::TrackerId;

/// One sample per blocking configuration of `k` trackers, repeated `reps`
/// times; the label is "tracker 0 blocked", flipped on every seventh row.
pub fn blocking_samples(k: usize, reps: usize) -> Vec<Sample> {
    let trackers: Vec<TrackerId> = (0..k).map(|i| TrackerId::new(format!("t{i:02}"))).collect();
    let mut out = Vec::new();
    for mask in 0..(1u64 << k) {
        let features = BlockingConfig::from_mask(mask, &trackers).features(&trackers);
        for r in 0..reps {
            let label = features[0] ^ (mask as usize + r).is_multiple_of(7);
            out.push(Sample::new(features.clone(), label, format!("p{mask}")));
        }
    }
    out
}

/// Two rows of `width` counts with a mild shift between them.
pub fn count_table(width: usize) -> (Vec<u64>, Vec<u64>) {
    let a = (0..width).map(|i| 20 + (i as u64 * 7) % 31).collect();
    let b = (0..width).map(|i| 20 + (i as u64 * 11) % 29).collect();
    (a, b)
}

/// A built-in profile with its generated persona population.
pub fn world(profile: &str) -> (World, Vec<Persona>, u32) {
    let cfg = profiles::by_name(profile).expect("known profile");
    let world = build_world(&cfg, 0).expect("profile is valid");
    let personas = world.personas(&cfg.run.personas).expect("profile personas are valid");
    (world, personas, cfg.run.runs)
}
