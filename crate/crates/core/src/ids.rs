//! Identifier newtypes for the entities of a simulated world.
//!
//! Trackers and advertisers live in disjoint id spaces, so an edge can never
//! be a self-loop even when two entities share a display name.

use std::borrow::Borrow;
use std::fmt;

use serde::{Deserialize, Serialize};

macro_rules! id_newtype {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }

        impl Borrow<str> for $name {
            fn borrow(&self) -> &str {
                &self.0
            }
        }
    };
}

id_newtype!(
    /// Interest group (e.g. "games", "adult").
    GroupId
);
id_newtype!(
    /// Website, either an interest site used for training or an ad-collection site.
    SiteId
);
id_newtype!(
    /// Tracker organization (parent company of a set of tracking domains).
    TrackerId
);
id_newtype!(
    /// Advertiser, i.e. the bidding DSP.
    AdvertiserId
);
id_newtype!(PersonaId);
