//! Highway mobility: uniform placement and constant-speed motion on a
//! multi-lane ring road.

use rand::Rng;

use crate::core_model::{Direction, Position, VehicleId, VehicleState};

#[derive(Debug, Clone)]
pub struct MobilityConfig {
    pub n_vehicles: u32,
    pub road_length_m: f64,
    pub lanes: u8,
    pub lane_width_m: f64,
    pub v_min_kmh: f64,
    pub v_max_kmh: f64,
}

impl Default for MobilityConfig {
    fn default() -> Self {
        Self {
            n_vehicles: 200,
            road_length_m: 2000.0,
            lanes: 3,
            lane_width_m: 3.5,
            v_min_kmh: 20.0,
            v_max_kmh: 120.0,
        }
    }
}

/// The distance-relevant slice of the mobility configuration.
#[derive(Debug, Clone, Copy)]
pub struct RoadGeometry {
    pub road_length_m: f64,
    pub lane_width_m: f64,
}

impl MobilityConfig {
    pub fn geometry(&self) -> RoadGeometry {
        RoadGeometry {
            road_length_m: self.road_length_m,
            lane_width_m: self.lane_width_m,
        }
    }
}

/// Place vehicles uniformly along the ring, round-robin across lanes, with
/// per-vehicle speeds drawn uniformly from the configured range.
pub fn init_vehicles<R: Rng>(cfg: &MobilityConfig, rng: &mut R) -> Vec<VehicleState> {
    (0..cfg.n_vehicles)
        .map(|i| {
            let x = rng.gen_range(0.0..cfg.road_length_m);
            let lane = (i % cfg.lanes as u32) as u8;
            let speed = rng.gen_range(cfg.v_min_kmh..=cfg.v_max_kmh);
            VehicleState::new(VehicleId(i), Position { x_m: x, lane }, speed, Direction::East)
        })
        .collect()
}

/// Advance every vehicle by `dt_s` seconds, wrapping at the ring length.
pub fn advance(vehicles: &mut [VehicleState], dt_s: f64, geom: &RoadGeometry) {
    for v in vehicles {
        let mps = v.speed_kmh / 3.6;
        v.position.x_m = (v.position.x_m + mps * dt_s).rem_euclid(geom.road_length_m);
    }
}

/// Shortest-path distance between two positions on the ring, including the
/// lateral lane offset.
pub fn ring_distance(a: Position, b: Position, geom: &RoadGeometry) -> f64 {
    let dx = (a.x_m - b.x_m).abs();
    let ring_dx = dx.min(geom.road_length_m - dx);
    let dy = (a.lane as f64 - b.lane as f64) * geom.lane_width_m;
    (ring_dx * ring_dx + dy * dy).sqrt()
}

/// Distance between two vehicles under the ring geometry.
pub fn distance(a: &VehicleState, b: &VehicleState, cfg: &MobilityConfig) -> f64 {
    ring_distance(a.position, b.position, &cfg.geometry())
}
