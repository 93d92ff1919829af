//! Simulation configuration and the flat `section.key = value` config file
//! format. Unknown keys are a startup error.

use std::path::PathBuf;

use crate::dfpav_baseline::DfpavParams;
use crate::error::{Error, Result};
use crate::mac_broadcast::MacConfig;
use crate::mobility::MobilityConfig;
use crate::phy_channel::PhyConfig;
use crate::pso_power::PsoParams;

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Protocol {
    /// PSO-driven beacon power control.
    Pbpc,
    /// Fair water-filling power ramp baseline.
    Dfpav,
    /// No control: fixed transmit power.
    None,
}

impl Protocol {
    pub fn label(&self) -> &'static str {
        match self {
            Protocol::Pbpc => "pbpc",
            Protocol::Dfpav => "dfpav",
            Protocol::None => "none",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub protocol: Protocol,
    pub duration_s: u32,
    pub seed: u64,
    /// Power used by the `none` arm, dBm.
    pub fixed_power_dbm: f64,
    pub epoch_s: u32,
    pub beacon_rate_hz: u32,
    pub phy: PhyConfig,
    pub mac: MacConfig,
    pub mobility: MobilityConfig,
    pub pso: PsoParams,
    pub dfpav: DfpavParams,
    /// Optional per-reception trace CSV.
    pub trace_path: Option<PathBuf>,
    /// Optional per-vehicle channel-analysis debug CSV.
    pub analysis_debug_path: Option<PathBuf>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            protocol: Protocol::Pbpc,
            duration_s: 10,
            seed: DEFAULT_SEED,
            fixed_power_dbm: 33.0,
            epoch_s: 1,
            beacon_rate_hz: 10,
            phy: PhyConfig::default(),
            mac: MacConfig::default(),
            mobility: MobilityConfig::default(),
            pso: PsoParams::default(),
            dfpav: DfpavParams::default(),
            trace_path: None,
            analysis_debug_path: None,
        }
    }
}

impl SimConfig {
    /// Apply a config file's contents on top of the current values.
    pub fn apply_file_contents(&mut self, contents: &str) -> Result<()> {
        for (lineno, raw) in contents.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `section.key = value`", lineno + 1))
            })?;
            self.set_key(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {}", lineno + 1, e)))?;
        }
        self.validate()
    }

    fn set_key(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn f(v: &str) -> std::result::Result<f64, String> {
            v.parse::<f64>().map_err(|_| format!("`{v}` is not a number"))
        }
        fn u(v: &str) -> std::result::Result<u64, String> {
            v.parse::<u64>().map_err(|_| format!("`{v}` is not an integer"))
        }
        match key {
            "sim.duration_s" => self.duration_s = u(value)? as u32,
            "sim.seed" => self.seed = u(value)?,
            "sim.fixed_power_dbm" => self.fixed_power_dbm = f(value)?,
            "sim.epoch_s" => self.epoch_s = u(value)? as u32,
            "sim.beacon_rate_hz" => self.beacon_rate_hz = u(value)? as u32,

            "phy.nakagami_m" => self.phy.nakagami_m = f(value)?,
            "phy.path_loss_exp" => self.phy.path_loss_exp = f(value)?,
            "phy.ref_loss_db" => self.phy.ref_loss_db = f(value)?,
            "phy.noise_floor_dbm" => self.phy.noise_floor_dbm = f(value)?,
            "phy.snr_threshold_db" => self.phy.snr_threshold_db = f(value)?,
            "phy.capture_margin_db" => self.phy.capture_margin_db = f(value)?,

            "mac.slot_us" => self.mac.slot_us = u(value)?,
            "mac.sifs_us" => self.mac.sifs_us = u(value)?,
            "mac.difs_us" => self.mac.difs_us = u(value)?,
            "mac.cw_min" => self.mac.cw_min = u(value)? as u32,
            "mac.cw_max" => self.mac.cw_max = u(value)? as u32,
            "mac.plcp_us" => self.mac.plcp_us = u(value)?,
            "mac.symbol_us" => self.mac.symbol_us = u(value)?,
            "mac.data_rate_bps" => self.mac.data_rate_bps = u(value)?,
            "mac.msg_bytes" => self.mac.msg_bytes = u(value)?,
            "mac.cs_threshold_dbm" => self.mac.cs_threshold_dbm = f(value)?,

            "mobility.n_vehicles" => self.mobility.n_vehicles = u(value)? as u32,
            "mobility.road_length_m" => self.mobility.road_length_m = f(value)?,
            "mobility.lanes" => self.mobility.lanes = u(value)? as u8,
            "mobility.lane_width_m" => self.mobility.lane_width_m = f(value)?,
            "mobility.v_min_kmh" => self.mobility.v_min_kmh = f(value)?,
            "mobility.v_max_kmh" => self.mobility.v_max_kmh = f(value)?,

            "pso.w_min" => self.pso.w_min = f(value)?,
            "pso.w_max" => self.pso.w_max = f(value)?,
            "pso.c1" => self.pso.c1 = f(value)?,
            "pso.c2" => self.pso.c2 = f(value)?,
            "pso.rand_min" => self.pso.rand_min = f(value)?,
            "pso.rand_max" => self.pso.rand_max = f(value)?,

            "dfpav.mbl_bps" => self.dfpav.mbl_bps = f(value)?,
            "dfpav.step_dbm" => self.dfpav.step_dbm = f(value)?,
            "dfpav.epsilon" => self.dfpav.epsilon = f(value)?,
            "dfpav.cs_max_m" => self.dfpav.cs_max_m = f(value)?,
            "dfpav.p_start_dbm" => self.dfpav.p_start_dbm = f(value)?,

            other => return Err(format!("unknown config key `{other}`")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.duration_s == 0 {
            problems.push("sim.duration_s must be positive".to_string());
        }
        if self.epoch_s == 0 {
            problems.push("sim.epoch_s must be positive".to_string());
        }
        if self.beacon_rate_hz == 0 {
            problems.push("sim.beacon_rate_hz must be positive".to_string());
        }
        if self.mobility.n_vehicles == 0 {
            problems.push("mobility.n_vehicles must be positive".to_string());
        }
        if self.mobility.lanes == 0 {
            problems.push("mobility.lanes must be positive".to_string());
        }
        if self.mobility.v_min_kmh > self.mobility.v_max_kmh {
            problems.push("mobility.v_min_kmh exceeds mobility.v_max_kmh".to_string());
        }
        if self.phy.nakagami_m < 0.5 {
            problems.push("phy.nakagami_m must be at least 0.5".to_string());
        }
        if self.mac.cw_min > self.mac.cw_max {
            problems.push("mac.cw_min exceeds mac.cw_max".to_string());
        }
        if !(self.pso.w_min > 0.0 && self.pso.w_min <= self.pso.w_max) {
            problems.push("pso inertia range is invalid".to_string());
        }
        if !(self.pso.rand_min > 0.0
            && self.pso.rand_min <= self.pso.rand_max
            && self.pso.rand_max <= 1.0)
        {
            problems.push("pso rand range is invalid".to_string());
        }
        if self.dfpav.mbl_bps <= 0.0 || self.dfpav.cs_max_m <= 0.0 || self.dfpav.step_dbm <= 0.0 {
            problems.push("dfpav parameters must be positive".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }
}
