//! Seed fan-out.
//!
//! Every random draw in the crate comes from a ChaCha8 stream whose seed is
//! derived from the master seed and a path of labels, for example
//! `("sim", run, persona)`. The derivation mixes each component into a 64-bit
//! state with the SplitMix64 finalizer; string labels are first folded with
//! FNV-1a. The scheme is fixed so artifacts stay reproducible across builds.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// One component of a substream path.
#[derive(Debug, Clone, Copy)]
pub enum Label<'a> {
    Str(&'a str),
    Num(u64),
}

impl<'a> From<&'a str> for Label<'a> {
    fn from(s: &'a str) -> Self {
        Label::Str(s)
    }
}

impl From<u64> for Label<'_> {
    fn from(n: u64) -> Self {
        Label::Num(n)
    }
}

impl From<usize> for Label<'_> {
    fn from(n: usize) -> Self {
        Label::Num(n as u64)
    }
}

impl From<u32> for Label<'_> {
    fn from(n: u32) -> Self {
        Label::Num(u64::from(n))
    }
}

fn fnv1a(s: &str) -> u64 {
    s.bytes()
        .fold(FNV_OFFSET, |h, b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive the 64-bit seed of the substream at `path` under `seed`.
pub fn derive_seed(seed: u64, path: &[Label<'_>]) -> u64 {
    path.iter().fold(splitmix(seed), |state, label| {
        let v = match *label {
            // tag strings and numbers differently so "1" and 1 never collide
            Label::Str(s) => fnv1a(s) ^ 0x5354_5200_0000_0000,
            Label::Num(n) => n,
        };
        splitmix(state ^ splitmix(v))
    })
}

pub fn substream(seed: u64, path: &[Label<'_>]) -> Stream {
    Stream::seed_from_u64(derive_seed(seed, path))
}

/// Build a substream from a heterogeneous label list.
#[macro_export]
macro_rules! substream {
    ($seed:expr $(, $label:expr)* $(,)?) => {
        $crate::rng::substream($seed, &[$($crate::rng::Label::from($label)),*])
    };
}
