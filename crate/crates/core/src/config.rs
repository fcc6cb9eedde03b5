//! Network and run configuration.
//!
//! Field names on the wire follow the physical-layer symbols (`antennas_M`,
//! `power_PT`, ...) so a JSON profile reads like the parameter table it was
//! taken from.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Convert a power in dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Convert a power in watts to dBm.
pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PowerMode {
    /// One budget of `F * P_T` per BS shared across all bands.
    #[default]
    Joint,
    /// `P_T` enforced on every band separately.
    PerBand,
}

impl std::str::FromStr for PowerMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "joint" => Ok(PowerMode::Joint),
            "perband" | "per-band" => Ok(PowerMode::PerBand),
            other => Err(Error::InvalidConfig(format!(
                "unknown power mode '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub num_cells: usize,
    #[serde(rename = "antennas_M")]
    pub antennas: usize,
    #[serde(rename = "users_per_cell_K")]
    pub users_per_cell: usize,
    #[serde(rename = "bands_F")]
    pub bands: usize,
    /// Hz per band.
    #[serde(rename = "bandwidth_W")]
    pub bandwidth_hz: f64,
    /// Average per-band BS budget, watts.
    #[serde(rename = "power_PT")]
    pub power_watts: f64,
    /// dB.
    pub noise_figure: f64,
    pub pathloss_exponent: f64,
    /// Meters.
    pub reference_distance: f64,
    /// BS-to-vertex hexagon radius, meters.
    pub cell_radius: f64,
    pub wraparound: bool,
    pub rng_seed: u64,
}

impl Default for NetworkConfig {
    /// The desk-scale profile: 7 wrapped cells, M=2, K=5, F=1, 43 dBm.
    fn default() -> Self {
        NetworkConfig {
            num_cells: 7,
            antennas: 2,
            users_per_cell: 5,
            bands: 1,
            bandwidth_hz: 20e6,
            power_watts: dbm_to_watts(43.0),
            noise_figure: 9.0,
            pathloss_exponent: 3.76,
            reference_distance: 0.392,
            cell_radius: 400.0,
            wraparound: true,
            rng_seed: 1,
        }
    }
}

impl NetworkConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: NetworkConfig = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Number of hexagonal rings around the center cell, if `num_cells`
    /// is a centered hexagonal number (1, 7, 19, 37, ...).
    pub fn rings(&self) -> Option<usize> {
        (0..64).find(|r| 1 + 3 * r * (r + 1) == self.num_cells)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.rings().is_none() {
            return bad(format!(
                "num_cells = {} is not a hexagonal layout size (1, 7, 19, ...)",
                self.num_cells
            ));
        }
        if self.antennas == 0 {
            return bad("antennas_M must be at least 1".into());
        }
        if self.users_per_cell < self.antennas {
            return bad(format!(
                "users_per_cell_K = {} is below antennas_M = {}",
                self.users_per_cell, self.antennas
            ));
        }
        if self.bands == 0 {
            return bad("bands_F must be at least 1".into());
        }
        for (name, v) in [
            ("bandwidth_W", self.bandwidth_hz),
            ("power_PT", self.power_watts),
            ("pathloss_exponent", self.pathloss_exponent),
            ("reference_distance", self.reference_distance),
            ("cell_radius", self.cell_radius),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!(
                    "{name} must be finite and strictly positive, got {v}"
                ));
            }
        }
        if !self.noise_figure.is_finite() {
            return bad("noise_figure must be finite".into());
        }
        if self.users_per_cell < 2 * self.antennas {
            log::warn!(
                "users_per_cell_K = {} is below 2 * antennas_M; scheduling has little choice",
                self.users_per_cell
            );
        }
        Ok(())
    }
}
