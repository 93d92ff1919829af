//! Radio propagation and reception decisions: log-distance path loss,
//! Nakagami-m small-scale fading, and SINR-threshold decodability.

use rand::Rng;
use rand_distr::{Distribution, Gamma};

#[derive(Debug, Clone)]
pub struct PhyConfig {
    /// Nakagami shape parameter; 3.0 models milder-than-Rayleigh highway fading.
    pub nakagami_m: f64,
    pub path_loss_exp: f64,
    /// Reference loss at 1 m, dB.
    pub ref_loss_db: f64,
    pub noise_floor_dbm: f64,
    pub snr_threshold_db: f64,
    /// Extra margin folded into the SINR threshold for capture decisions.
    pub capture_margin_db: f64,
}

impl Default for PhyConfig {
    fn default() -> Self {
        Self {
            nakagami_m: 3.0,
            path_loss_exp: 2.75,
            ref_loss_db: 47.0,
            noise_floor_dbm: -99.0,
            snr_threshold_db: 10.0,
            capture_margin_db: 0.0,
        }
    }
}

/// Distances below this are clamped before the path-loss log.
pub const MIN_PROPAGATION_DISTANCE_M: f64 = 1.0;

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

/// Log-distance path loss in dB at distance `d` meters.
pub fn path_loss_db(d: f64, cfg: &PhyConfig) -> f64 {
    let d = d.max(MIN_PROPAGATION_DISTANCE_M);
    cfg.ref_loss_db + 10.0 * cfg.path_loss_exp * d.log10()
}

/// One unit-mean Nakagami-m power-fading gain: a Gamma(m, 1/m) draw.
pub fn nakagami_gain<R: Rng>(m: f64, rng: &mut R) -> f64 {
    let gamma = Gamma::new(m, 1.0 / m).expect("nakagami shape must be >= 0.5");
    gamma.sample(rng)
}

/// Received power after path loss and a linear fading gain.
pub fn received_power_dbm(tx_dbm: f64, d: f64, gain: f64, cfg: &PhyConfig) -> f64 {
    tx_dbm - path_loss_db(d, cfg) + 10.0 * gain.log10()
}

/// SINR-threshold reception test: the frame decodes when its power clears
/// noise plus the summed interferer power by the configured threshold.
pub fn is_decodable(signal_dbm: f64, interferers_dbm: &[f64], cfg: &PhyConfig) -> bool {
    let mut denom_mw = dbm_to_mw(cfg.noise_floor_dbm);
    for &i in interferers_dbm {
        denom_mw += dbm_to_mw(i);
    }
    let sinr_db = signal_dbm - mw_to_dbm(denom_mw);
    sinr_db >= cfg.snr_threshold_db + cfg.capture_margin_db
}
