//! Reference methods compared against the coverage-based engine.

mod growing_spheres;
mod nice;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

pub use growing_spheres::{growing_spheres, GrowingSpheresConfig};
pub use nice::{nice_counterfactual, NiceConfig};

/// Methods known to the benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    OnbMacf,
    GrowingSpheres,
    Nice,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::OnbMacf, Method::GrowingSpheres, Method::Nice];

    pub fn name(self) -> &'static str {
        match self {
            Method::OnbMacf => "onb-macf",
            Method::GrowingSpheres => "growing-spheres",
            Method::Nice => "nice",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method {s:?} (expected onb-macf, growing-spheres or nice)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub gs: GrowingSpheresConfig,
    pub nice: NiceConfig,
}
