//! Single-particle PSO power selection: one velocity step from the local
//! analysis, the vehicle's own history, and the best value advertised by
//! its neighbors.

use rand::Rng;

use crate::channel_analysis::ChannelAnalysis;
use crate::core_model::{clamp_power, NeighborState, P_INIT_DBM};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct PsoParams {
    pub w_min: f64,
    pub w_max: f64,
    /// Cognitive (own-history) coefficient.
    pub c1: f64,
    /// Social (neighborhood) coefficient.
    pub c2: f64,
    pub rand_min: f64,
    pub rand_max: f64,
}

impl Default for PsoParams {
    fn default() -> Self {
        Self {
            w_min: 0.1,
            w_max: 0.5,
            c1: 2.0,
            c2: 2.0,
            rand_min: 0.1,
            rand_max: 1.0,
        }
    }
}

/// Per-vehicle optimizer memory.
#[derive(Debug, Clone)]
pub struct PsoState {
    /// Previous epoch's locally best power, dBm.
    pub p_best_dbm: f64,
    /// Best neighbor-advertised personal best this epoch, dBm.
    pub g_best_dbm: f64,
    pub initialized: bool,
}

impl Default for PsoState {
    fn default() -> Self {
        Self {
            p_best_dbm: P_INIT_DBM,
            g_best_dbm: P_INIT_DBM,
            initialized: false,
        }
    }
}

/// One epoch's coefficient draws.
#[derive(Debug, Clone, Copy)]
pub struct PsoDraws {
    pub w: f64,
    pub r1: f64,
    pub r2: f64,
}

impl PsoDraws {
    pub fn sample<R: Rng>(params: &PsoParams, rng: &mut R) -> Self {
        Self {
            w: rng.gen_range(params.w_min..=params.w_max),
            r1: rng.gen_range(params.rand_min..=params.rand_max),
            r2: rng.gen_range(params.rand_min..=params.rand_max),
        }
    }
}

/// Highest personal-best power advertised by any current neighbor.
pub fn extract_gbest<'a>(
    neighbors: impl IntoIterator<Item = &'a NeighborState>,
) -> Result<f64> {
    neighbors
        .into_iter()
        .map(|n| n.last_pop_best_dbm)
        .fold(None, |acc: Option<f64>, p| {
            Some(acc.map_or(p, |a| a.max(p)))
        })
        .ok_or(Error::NoNeighbors)
}

/// Velocity step: inertia on the current local best plus attraction toward
/// the personal and neighborhood bests. All terms operate on dBm values.
pub fn pso_velocity(
    lbest_p: f64,
    pbest_p: f64,
    gbest_p: f64,
    w: f64,
    r1: f64,
    r2: f64,
    params: &PsoParams,
) -> f64 {
    lbest_p * w + params.c1 * r1 * (pbest_p - lbest_p) + params.c2 * r2 * (gbest_p - lbest_p)
}

/// Final transmit power: personal best plus the velocity, clamped to the
/// regulatory range.
pub fn optimal_power(pbest_p: f64, sv: f64) -> f64 {
    clamp_power(pbest_p + sv)
}

/// Deterministic power selection given explicit coefficient draws.
///
/// Updates `state.p_best_dbm` to this epoch's local best afterwards. The
/// first call returns the common starting power and only seeds the history.
pub fn select_power_with_draws(
    analysis: &ChannelAnalysis,
    state: &mut PsoState,
    params: &PsoParams,
    draws: PsoDraws,
) -> f64 {
    if !state.initialized {
        state.p_best_dbm = analysis.local_best_power_dbm;
        state.initialized = true;
        return P_INIT_DBM;
    }
    let sv = pso_velocity(
        analysis.local_best_power_dbm,
        state.p_best_dbm,
        state.g_best_dbm,
        draws.w,
        draws.r1,
        draws.r2,
        params,
    );
    let power = optimal_power(state.p_best_dbm, sv);
    state.p_best_dbm = analysis.local_best_power_dbm;
    power
}

/// Draw fresh coefficients from the vehicle's stream and select the power.
pub fn select_power<R: Rng>(
    analysis: &ChannelAnalysis,
    state: &mut PsoState,
    params: &PsoParams,
    rng: &mut R,
) -> f64 {
    if !state.initialized {
        // No draws consumed on the seeding call.
        return select_power_with_draws(
            analysis,
            state,
            params,
            PsoDraws {
                w: params.w_min,
                r1: params.rand_min,
                r2: params.rand_min,
            },
        );
    }
    let draws = PsoDraws::sample(params, rng);
    select_power_with_draws(analysis, state, params, draws)
}
