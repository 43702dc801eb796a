//! TOML experiment configuration.
//!
//! ```toml
//! seed = 7
//!
//! [field]
//! kind = "time-space-periodic"   # homogeneous | time-periodic | space-periodic | time-only
//! period = 1.0
//! space_period = 2
//! d0 = 1.0
//! d_amp = 0.25
//! r0 = 1.0
//! r_amp_t = 0.5
//! r_amp_j = 0.3
//! a = 1.0
//!
//! [sim]
//! dt = 0.01
//!
//! [wave]
//! speed_offset = 0.5
//! ```
//!
//! Every section is optional except `[field]`; missing keys take the
//! defaults of the corresponding struct.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::coeffs::FamilyParams;
use crate::error::{Error, Result};
use crate::floquet::FloquetOptions;
use crate::lattice::{EntireOptions, SimOptions};
use crate::waves_periodic::WaveOptions;
use crate::waves_timehet::TimeHetOptions;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditSection {
    pub horizon: f64,
    pub dt: f64,
}

impl Default for AuditSection {
    fn default() -> Self {
        AuditSection { horizon: 10.0, dt: 0.01 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub t_end: f64,
    /// Window of sites `[-sites/2, sites/2)`.
    pub sites: usize,
    /// Initial data: `step` (u+ level left of 0, zero right) or `random` in `[0, M0]`.
    pub initial: String,
}

impl Default for SimulateSection {
    fn default() -> Self {
        SimulateSection { t_end: 10.0, sites: 201, initial: "step".into() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FloquetSection {
    pub dt: f64,
    pub mu_lo: f64,
    pub mu_hi: f64,
    /// Tilts tabulated by the `floquet` command.
    pub mus: Vec<f64>,
}

impl Default for FloquetSection {
    fn default() -> Self {
        FloquetSection { dt: 1e-3, mu_lo: 0.05, mu_hi: 5.0, mus: vec![0.25, 0.5, 1.0, 2.0] }
    }
}

impl FloquetSection {
    pub fn options(&self) -> FloquetOptions {
        FloquetOptions { dt: self.dt, ..Default::default() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PartMetricSection {
    pub pairs: usize,
    pub sites: usize,
    pub t_end: f64,
    pub lo: f64,
    pub hi: f64,
    pub sigma: f64,
    pub tau: f64,
}

impl Default for PartMetricSection {
    fn default() -> Self {
        PartMetricSection { pairs: 100, sites: 51, t_end: 5.0, lo: 0.1, hi: 2.0, sigma: 0.5, tau: 1.0 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilitySection {
    pub t_end: f64,
    pub burn_in: f64,
    pub noise_lo: f64,
    pub noise_hi: f64,
    /// Pass threshold for the final ratio norm.
    pub target: f64,
    pub slack: f64,
}

impl Default for StabilitySection {
    fn default() -> Self {
        StabilitySection { t_end: 40.0, burn_in: 5.0, noise_lo: 0.8, noise_hi: 1.25, target: 0.01, slack: 1e-6 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub seed: u64,
    pub field: FamilyParams,
    #[serde(default)]
    pub sim: SimOptions,
    #[serde(default)]
    pub audit: AuditSection,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub entire: EntireOptions,
    #[serde(default)]
    pub floquet: FloquetSection,
    #[serde(default)]
    pub wave: WaveOptions,
    #[serde(default)]
    pub timehet: TimeHetOptions,
    #[serde(default)]
    pub partmetric: PartMetricSection,
    #[serde(default)]
    pub stability: StabilitySection,
}

impl Config {
    pub fn from_field(field: FamilyParams) -> Self {
        Config {
            seed: 0,
            field,
            sim: SimOptions::default(),
            audit: AuditSection::default(),
            simulate: SimulateSection::default(),
            entire: EntireOptions::default(),
            floquet: FloquetSection::default(),
            wave: WaveOptions::default(),
            timehet: TimeHetOptions::default(),
            partmetric: PartMetricSection::default(),
            stability: StabilitySection::default(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).unwrap_or(serde_json::Value::Null)
    }

    /// Multiply every convergence tolerance by `scale`.
    pub fn scale_tolerances(&mut self, scale: f64) {
        self.entire.tol *= scale;
        self.wave.tol *= scale;
        self.timehet.tol *= scale;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let c = Config::parse("[field]\nkind = \"homogeneous\"\n").unwrap();
        assert_eq!(c.field, FamilyParams::Homogeneous { d: 1.0, r: 1.0, a: 1.0 });
        assert_eq!(c.sim.dt, 0.01);
    }

    #[test]
    fn unknown_keys_are_reported_with_location() {
        let e = Config::parse("[field]\nkind = \"homogeneous\"\n\n[sim]\ndtt = 0.1\n").unwrap_err();
        let m = e.to_string();
        assert!(m.contains("dtt") && m.contains("line 5"), "{m}");
        let e = Config::parse("[field]\nkind = \"homogeneous\"\nrr = 2.0\n").unwrap_err();
        assert!(e.to_string().contains("rr"), "{e}");
    }

    #[test]
    fn round_trips_through_toml() {
        let c = Config::from_field(FamilyParams::shipped_time_space_periodic());
        let text = toml::to_string(&c).unwrap();
        let back = Config::parse(&text).unwrap();
        assert_eq!(back.field, c.field);
    }
}
