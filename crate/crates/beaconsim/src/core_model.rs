//! Domain types shared by every subsystem: beacons, per-vehicle state and
//! the per-neighbor bookkeeping a vehicle maintains from received beacons.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::mobility::{ring_distance, RoadGeometry};
use crate::pso_power::PsoState;

/// Regulatory transmit-power floor, dBm.
pub const P_REG_MIN_DBM: f64 = 10.0;
/// Regulatory transmit-power ceiling, dBm (DSRC EIRP limit).
pub const P_REG_MAX_DBM: f64 = 33.0;
/// Common starting transmit power for all protocol arms, dBm.
pub const P_INIT_DBM: f64 = 25.0;
/// Neighbors silent for longer than this are evicted at window reset.
pub const STALE_TIMEOUT_US: u64 = 2_000_000;

/// Clamp a power value into the regulatory range.
pub fn clamp_power(dbm: f64) -> f64 {
    dbm.clamp(P_REG_MIN_DBM, P_REG_MAX_DBM)
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
pub struct VehicleId(pub u32);

impl std::fmt::Display for VehicleId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Direction {
    #[default]
    East,
    West,
}

/// Along-road position: scalar distance from the road origin plus lane index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct Position {
    pub x_m: f64,
    pub lane: u8,
}

/// One over-the-air periodic safety message with piggybacked power fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Beacon {
    /// Monotonically increasing per-sender sequence number.
    pub seq: u64,
    /// Beaconing interval in milliseconds.
    pub interval_ms: u32,
    /// Generation time, simulation microseconds.
    pub timestamp_us: u64,
    pub sender_id: VehicleId,
    pub position: Position,
    pub speed_kmh: f64,
    pub direction: Direction,
    /// Sender's personal-best power, dBm.
    pub pop_best_dbm: f64,
    /// Power the sender used for this beacon, dBm.
    pub pow_u_dbm: f64,
}

/// Per-neighbor bookkeeping row: the sequence numbers heard in the current
/// one-second window plus the latest advertised state.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborState {
    pub id: VehicleId,
    pub last_position: Position,
    pub last_speed_kmh: f64,
    pub last_direction: Direction,
    pub sequence_list: BTreeSet<u64>,
    pub last_pop_best_dbm: f64,
    pub last_pow_u_dbm: f64,
    pub last_rx_time_us: u64,
}

/// Per-neighbor reception summary derived at a window boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceRow {
    pub id: VehicleId,
    /// Share of expected beacons received this window, percent in [0, 100].
    pub reception_percent: f64,
    /// Current distance to the neighbor, meters.
    pub distance_m: f64,
    /// Beacons lost per meter of separation.
    pub fail_rate: f64,
}

/// Full per-vehicle simulation state.
#[derive(Debug, Clone)]
pub struct VehicleState {
    pub id: VehicleId,
    pub position: Position,
    pub speed_kmh: f64,
    pub direction: Direction,
    pub current_tx_power_dbm: f64,
    pub pso: PsoState,
    pub neighbors: BTreeMap<VehicleId, NeighborState>,
    pub next_beacon_time_us: u64,
    next_seq: u64,
}

impl VehicleState {
    pub fn new(id: VehicleId, position: Position, speed_kmh: f64, direction: Direction) -> Self {
        Self {
            id,
            position,
            speed_kmh,
            direction,
            current_tx_power_dbm: P_INIT_DBM,
            pso: PsoState::default(),
            neighbors: BTreeMap::new(),
            next_beacon_time_us: 0,
            next_seq: 0,
        }
    }

    /// Build the next beacon from current state. Consumes one sequence number.
    pub fn make_beacon(&mut self, now_us: u64, interval_ms: u32) -> Beacon {
        self.next_seq += 1;
        Beacon {
            seq: self.next_seq,
            interval_ms,
            timestamp_us: now_us,
            sender_id: self.id,
            position: self.position,
            speed_kmh: self.speed_kmh,
            direction: self.direction,
            pop_best_dbm: self.pso.p_best_dbm,
            pow_u_dbm: self.current_tx_power_dbm,
        }
    }

    /// Fold a received beacon into the neighbor table.
    ///
    /// Duplicate sequence numbers within a window are recorded once. The
    /// sequence list saturates at `window_cap` entries per window so late
    /// boundary stragglers cannot push the count past the nominal rate;
    /// the advertised fields are refreshed regardless.
    pub fn record_beacon(&mut self, b: &Beacon, rx_time_us: u64, window_cap: u32) {
        debug_assert_ne!(b.sender_id, self.id, "a vehicle never records its own beacon");
        let entry = self
            .neighbors
            .entry(b.sender_id)
            .or_insert_with(|| NeighborState {
                id: b.sender_id,
                last_position: b.position,
                last_speed_kmh: b.speed_kmh,
                last_direction: b.direction,
                sequence_list: BTreeSet::new(),
                last_pop_best_dbm: b.pop_best_dbm,
                last_pow_u_dbm: b.pow_u_dbm,
                last_rx_time_us: rx_time_us,
            });
        if entry.sequence_list.len() < window_cap as usize
            || entry.sequence_list.contains(&b.seq)
        {
            entry.sequence_list.insert(b.seq);
        }
        entry.last_position = b.position;
        entry.last_speed_kmh = b.speed_kmh;
        entry.last_direction = b.direction;
        entry.last_pop_best_dbm = b.pop_best_dbm;
        entry.last_pow_u_dbm = b.pow_u_dbm;
        entry.last_rx_time_us = rx_time_us;
    }

    /// Close the current one-second window: clear every sequence list and
    /// evict neighbors silent for longer than `stale_timeout_us`.
    pub fn reset_window(&mut self, now_us: u64, stale_timeout_us: u64) {
        self.neighbors
            .retain(|_, n| now_us.saturating_sub(n.last_rx_time_us) <= stale_timeout_us);
        for n in self.neighbors.values_mut() {
            n.sequence_list.clear();
        }
    }

    /// Neighbors ordered by current distance, closest first, ties broken by id.
    pub fn neighbors_by_distance(&self, geom: &RoadGeometry) -> Vec<&NeighborState> {
        let mut out: Vec<&NeighborState> = self.neighbors.values().collect();
        out.sort_by(|a, b| {
            let da = ring_distance(self.position, a.last_position, geom);
            let db = ring_distance(self.position, b.last_position, geom);
            da.partial_cmp(&db)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.id.cmp(&b.id))
        });
        out
    }

    /// Total beacons heard across all neighbors in the current window.
    pub fn window_reception_total(&self) -> u32 {
        self.neighbors
            .values()
            .map(|n| n.sequence_list.len() as u32)
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vehicle(id: u32, x: f64) -> VehicleState {
        VehicleState::new(
            VehicleId(id),
            Position { x_m: x, lane: 0 },
            60.0,
            Direction::East,
        )
    }

    fn beacon_from(sender: u32, seq: u64, x: f64) -> Beacon {
        Beacon {
            seq,
            interval_ms: 100,
            timestamp_us: 0,
            sender_id: VehicleId(sender),
            position: Position { x_m: x, lane: 0 },
            speed_kmh: 60.0,
            direction: Direction::East,
            pop_best_dbm: 28.0,
            pow_u_dbm: 25.0,
        }
    }

    #[test]
    fn make_beacon_copies_fields_and_increments_seq() {
        let mut v = vehicle(1, 100.0);
        v.pso.p_best_dbm = 28.0;
        v.current_tx_power_dbm = 25.0;
        let b1 = v.make_beacon(5_000, 100);
        assert_eq!(b1.pop_best_dbm, 28.0);
        assert_eq!(b1.pow_u_dbm, 25.0);
        assert_eq!(b1.position.x_m, 100.0);
        assert_eq!(b1.speed_kmh, 60.0);
        assert_eq!(b1.timestamp_us, 5_000);
        let b2 = v.make_beacon(105_000, 100);
        assert_eq!(b2.seq, b1.seq + 1);
    }

    #[test]
    fn active_list_row_is_representable() {
        // Seq 15, speed 60, PopBest 28 dBm, PowU 25 dBm.
        let b = Beacon {
            seq: 15,
            interval_ms: 50,
            timestamp_us: 1_020_000,
            sender_id: VehicleId(10),
            position: Position { x_m: 13.0, lane: 0 },
            speed_kmh: 60.0,
            direction: Direction::East,
            pop_best_dbm: 28.0,
            pow_u_dbm: 25.0,
        };
        assert_eq!(b.seq, 15);
        assert_eq!(b.pop_best_dbm, 28.0);
        assert_eq!(b.pow_u_dbm, 25.0);
    }

    #[test]
    fn record_beacon_creates_neighbor_row() {
        let mut v = vehicle(1, 0.0);
        let b = beacon_from(2, 7, 13.0);
        v.record_beacon(&b, 1_000, 10);
        let n = v.neighbors.get(&VehicleId(2)).unwrap();
        assert_eq!(n.sequence_list.len(), 1);
        assert!(n.sequence_list.contains(&7));
        assert_eq!(n.last_pow_u_dbm, 25.0);
    }

    #[test]
    fn record_beacon_is_idempotent_per_seq() {
        let mut v = vehicle(1, 0.0);
        let b = beacon_from(2, 7, 13.0);
        v.record_beacon(&b, 1_000, 10);
        v.record_beacon(&b, 2_000, 10);
        assert_eq!(v.neighbors[&VehicleId(2)].sequence_list.len(), 1);
    }

    /// The five-neighbor window: 32 receptions across senders A..E.
    pub(crate) fn five_neighbor_window() -> VehicleState {
        let mut v = vehicle(0, 0.0);
        let lists: [(u32, f64, &[u64]); 5] = [
            (1, 13.0, &[15, 16, 17, 18, 20, 21, 23, 24]),
            (2, 18.0, &[71, 72, 75, 78, 79, 80]),
            (3, 23.0, &[89, 90, 96, 97]),
            (4, 18.0, &[22, 23, 24, 25, 26, 27, 29, 30]),
            (5, 15.0, &[61, 62, 63, 67, 69, 70]),
        ];
        for (id, x, seqs) in lists {
            for &s in seqs {
                let b = beacon_from(id, s, x);
                v.record_beacon(&b, 900_000, 10);
            }
        }
        v
    }

    #[test]
    fn five_neighbor_window_reconstructs_from_32_calls() {
        let v = five_neighbor_window();
        assert_eq!(v.neighbors.len(), 5);
        assert_eq!(v.window_reception_total(), 32);
    }

    #[test]
    fn sequence_list_caps_at_window_rate() {
        let mut v = vehicle(1, 0.0);
        for s in 0..15 {
            v.record_beacon(&beacon_from(2, s, 10.0), 1_000 + s, 10);
        }
        let n = &v.neighbors[&VehicleId(2)];
        assert_eq!(n.sequence_list.len(), 10);
        // Latest advertised fields still refreshed past the cap.
        assert_eq!(n.last_rx_time_us, 1_014);
    }

    #[test]
    fn reset_window_clears_lists_and_keeps_fresh_neighbors() {
        let mut v = five_neighbor_window();
        v.reset_window(1_000_000, STALE_TIMEOUT_US);
        assert_eq!(v.neighbors.len(), 5);
        assert!(v.neighbors.values().all(|n| n.sequence_list.is_empty()));
    }

    #[test]
    fn reset_window_evicts_stale_neighbors() {
        let mut v = vehicle(1, 0.0);
        v.record_beacon(&beacon_from(2, 1, 10.0), 500_000, 10);
        v.record_beacon(&beacon_from(3, 1, 20.0), 500_000, 10);
        // Neighbor 3 keeps talking, neighbor 2 goes silent for three windows.
        v.reset_window(1_000_000, STALE_TIMEOUT_US);
        v.record_beacon(&beacon_from(3, 11, 20.0), 1_500_000, 10);
        v.reset_window(2_000_000, STALE_TIMEOUT_US);
        v.record_beacon(&beacon_from(3, 21, 20.0), 2_500_000, 10);
        v.reset_window(3_000_000, STALE_TIMEOUT_US);
        assert!(!v.neighbors.contains_key(&VehicleId(2)));
        assert!(v.neighbors.contains_key(&VehicleId(3)));
    }

    #[test]
    fn reset_window_on_empty_table_is_a_noop() {
        let mut v = vehicle(1, 0.0);
        v.reset_window(1_000_000, STALE_TIMEOUT_US);
        assert!(v.neighbors.is_empty());
    }

    #[test]
    fn neighbor_order_breaks_distance_ties_by_id() {
        let geom = RoadGeometry {
            road_length_m: 2000.0,
            lane_width_m: 3.5,
        };
        let mut v = vehicle(1, 0.0);
        v.record_beacon(&beacon_from(5, 1, 18.0), 1_000, 10);
        v.record_beacon(&beacon_from(3, 1, 18.0), 1_000, 10);
        v.record_beacon(&beacon_from(4, 1, 13.0), 1_000, 10);
        let order: Vec<u32> = v
            .neighbors_by_distance(&geom)
            .iter()
            .map(|n| n.id.0)
            .collect();
        assert_eq!(order, vec![4, 3, 5]);
    }

    #[test]
    fn beacon_roundtrips_bit_exactly_through_serialization() {
        let b = Beacon {
            seq: 42,
            interval_ms: 100,
            timestamp_us: 123_456_789,
            sender_id: VehicleId(7),
            position: Position {
                x_m: 1234.567_891_234,
                lane: 2,
            },
            speed_kmh: 87.654_321,
            direction: Direction::East,
            pop_best_dbm: 27.599_999_999_9,
            pow_u_dbm: 25.000_000_000_1,
        };
        let json = serde_json::to_string(&b).unwrap();
        let back: Beacon = serde_json::from_str(&json).unwrap();
        assert_eq!(back, b);
        assert_eq!(back.position.x_m.to_bits(), b.position.x_m.to_bits());
        assert_eq!(back.pop_best_dbm.to_bits(), b.pop_best_dbm.to_bits());
    }

    #[test]
    fn window_totals_respect_rate_bound() {
        let v = five_neighbor_window();
        let total: usize = v.neighbors.values().map(|n| n.sequence_list.len()).sum();
        assert!(total <= 10 * v.neighbors.len());
    }
}
