//! Per-epoch channel-status analysis: collision probability, per-neighbor
//! fail rates, overall fault, success fraction, and the locally best
//! transmit power derived from them.

use crate::core_model::{DistanceRow, VehicleState};
use crate::error::{Error, Result};
use crate::mobility::{ring_distance, RoadGeometry};

/// Distance floor for the per-meter fail-rate division.
pub const D_FLOOR_M: f64 = 1.0;

/// Everything one vehicle derives from one window of received beacons.
#[derive(Debug, Clone)]
pub struct ChannelAnalysis {
    /// Collision probability for the window, fraction in [0, 1].
    pub cp: f64,
    pub rows: Vec<DistanceRow>,
    /// Mean per-meter fail rate over all neighbors.
    pub overall_fault: f64,
    pub mean_distance_m: f64,
    /// Reception success fraction in [0, 1]; the optimizer's fitness view
    /// of the channel.
    pub success: f64,
    pub min_p_dbm: f64,
    pub max_p_dbm: f64,
    pub power_diff_dbm: f64,
    /// Best transmit power suggested by this window alone, dBm.
    pub local_best_power_dbm: f64,
}

/// Fraction of expected beacons lost this window across all neighbors.
pub fn collision_probability(
    total_beacons_received: u32,
    n_neighbors: u32,
    rate: u32,
) -> Result<f64> {
    if n_neighbors == 0 {
        return Err(Error::NoNeighbors);
    }
    let expected = n_neighbors * rate;
    let received = total_beacons_received.min(expected);
    Ok((expected - received) as f64 / expected as f64)
}

/// Beacons lost per meter for one neighbor: (100 - p) / d.
pub fn fail_rate(reception_percent: f64, distance_m: f64) -> f64 {
    (100.0 - reception_percent) / distance_m.max(D_FLOOR_M)
}

/// One row per neighbor: reception percentage, current distance, fail rate.
pub fn build_distance_table(
    v: &VehicleState,
    rate: u32,
    geom: &RoadGeometry,
) -> Vec<DistanceRow> {
    v.neighbors_by_distance(geom)
        .into_iter()
        .map(|n| {
            let p = 100.0 * n.sequence_list.len().min(rate as usize) as f64 / rate as f64;
            let d = ring_distance(v.position, n.last_position, geom);
            DistanceRow {
                id: n.id,
                reception_percent: p,
                distance_m: d,
                fail_rate: fail_rate(p, d),
            }
        })
        .collect()
}

/// Spread of the transmit powers heard this window: (min, max, max - min).
pub fn power_difference(abl_powers: &[f64]) -> Result<(f64, f64, f64)> {
    if abl_powers.is_empty() {
        return Err(Error::NoNeighbors);
    }
    let min = abl_powers.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = abl_powers.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok((min, max, max - min))
}

/// Mean per-meter fail rate over the distance table.
pub fn overall_fault(rows: &[DistanceRow]) -> Result<f64> {
    if rows.is_empty() {
        return Err(Error::NoNeighbors);
    }
    Ok(rows.iter().map(|r| r.fail_rate).sum::<f64>() / rows.len() as f64)
}

/// Reception success fraction: (100 - meanD * F) / 100, clamped to [0, 1].
pub fn success_fraction(rows: &[DistanceRow], f_overall: f64) -> Result<f64> {
    if rows.is_empty() {
        return Err(Error::NoNeighbors);
    }
    let mean_d = rows.iter().map(|r| r.distance_m).sum::<f64>() / rows.len() as f64;
    Ok(((100.0 - mean_d * f_overall) / 100.0).clamp(0.0, 1.0))
}

/// Power suggested by the window: min heard power plus the success-scaled
/// share of the heard spread. Lands in [min_p, min_p + pd] by construction.
pub fn local_best_power(min_p_dbm: f64, pd_dbm: f64, s: f64) -> f64 {
    min_p_dbm + pd_dbm * s
}

/// Run the whole analysis pipeline over the just-ended window.
pub fn analyze(v: &VehicleState, rate: u32, geom: &RoadGeometry) -> Result<ChannelAnalysis> {
    let n = v.neighbors.len() as u32;
    let cp = collision_probability(v.window_reception_total(), n, rate)?;
    let rows = build_distance_table(v, rate, geom);
    let powers: Vec<f64> = v.neighbors.values().map(|n| n.last_pow_u_dbm).collect();
    let (min_p, max_p, pd) = power_difference(&powers)?;
    let f = overall_fault(&rows)?;
    let s = success_fraction(&rows, f)?;
    let mean_d = rows.iter().map(|r| r.distance_m).sum::<f64>() / rows.len() as f64;
    Ok(ChannelAnalysis {
        cp,
        overall_fault: f,
        mean_distance_m: mean_d,
        success: s,
        min_p_dbm: min_p,
        max_p_dbm: max_p,
        power_diff_dbm: pd,
        local_best_power_dbm: local_best_power(min_p, pd, s),
        rows,
    })
}
