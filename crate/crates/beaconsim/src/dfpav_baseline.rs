//! Fair-power baseline: a synchronized water-filling ramp bounded by a
//! maximum beaconing load, plus the diagnostic power-adjustment formula.

use crate::core_model::clamp_power;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct DfpavParams {
    /// Beaconing-load ceiling the ramp must not violate, bits/s.
    pub mbl_bps: f64,
    /// Maximum carrier-sense/communication range, meters.
    pub cs_max_m: f64,
    /// Safety back-off subtracted from the power-adjustment quotient.
    pub epsilon: f64,
    /// Per-epoch ramp increment, dBm.
    pub step_dbm: f64,
    /// Common starting power, dBm.
    pub p_start_dbm: f64,
}

impl Default for DfpavParams {
    fn default() -> Self {
        Self {
            mbl_bps: 2_500_000.0,
            cs_max_m: 1000.0,
            epsilon: 0.1,
            step_dbm: 0.5,
            p_start_dbm: 25.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DfpavState {
    pub current_power_dbm: f64,
    /// Highest power advertised by any neighbor this epoch.
    pub neighbor_max_power_dbm: f64,
}

impl DfpavState {
    pub fn new(params: &DfpavParams) -> Self {
        Self {
            current_power_dbm: params.p_start_dbm,
            neighbor_max_power_dbm: params.p_start_dbm,
        }
    }
}

/// Diagnostic power-adjustment value:
/// MBL / (2 * CS_max * density * per-vehicle load) - epsilon.
///
/// Exported for inspection only; the operative controller is the ramp.
pub fn dfpav_power_adjust(
    params: &DfpavParams,
    vehicle_density_per_km: f64,
    load_vehicle_bps: f64,
) -> Result<f64> {
    if vehicle_density_per_km <= 0.0 {
        return Err(Error::DegenerateInput("vehicle density must be positive"));
    }
    if load_vehicle_bps <= 0.0 {
        return Err(Error::DegenerateInput("vehicle load must be positive"));
    }
    Ok(params.mbl_bps / (2.0 * params.cs_max_m * vehicle_density_per_km * load_vehicle_bps)
        - params.epsilon)
}

/// Offered beacon load observable at one vehicle: everyone in carrier-sense
/// range plus the vehicle itself.
pub fn beaconing_load(neighbors_in_cs: u32, rate: u32, msg_bits: u32) -> f64 {
    (neighbors_in_cs as f64 + 1.0) * rate as f64 * msg_bits as f64
}

/// One synchronized ramp step: up while the load constraint holds, down
/// once it is violated, clamped to the regulatory range either way.
pub fn water_filling_step(
    state: &mut DfpavState,
    observed_load_bps: f64,
    params: &DfpavParams,
) -> f64 {
    let next = if observed_load_bps < params.mbl_bps {
        state.current_power_dbm + params.step_dbm
    } else {
        state.current_power_dbm - params.step_dbm
    };
    state.current_power_dbm = clamp_power(next);
    state.current_power_dbm
}

/// Full per-epoch selection: ramp, then outbid the loudest neighbor by one
/// step when the load constraint still holds.
pub fn dfpav_select_power(
    state: &mut DfpavState,
    observed_load_bps: f64,
    neighbor_powers_dbm: &[f64],
    params: &DfpavParams,
) -> f64 {
    let ramped = water_filling_step(state, observed_load_bps, params);
    let neighbor_max = neighbor_powers_dbm
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    if neighbor_max.is_finite() {
        state.neighbor_max_power_dbm = neighbor_max;
        if observed_load_bps < params.mbl_bps {
            state.current_power_dbm = clamp_power(ramped.max(neighbor_max + params.step_dbm));
        }
    }
    state.current_power_dbm
}
