//! Simplified 802.11p broadcast MAC: carrier sensing, uniform backoff,
//! frame airtime, and the per-receiver reception-resolution sweep.

use rand::Rng;

use crate::core_model::{Beacon, Position, VehicleId, VehicleState};
use crate::mobility::{ring_distance, RoadGeometry};
use crate::phy_channel::{is_decodable, received_power_dbm, PhyConfig};

#[derive(Debug, Clone)]
pub struct MacConfig {
    pub slot_us: u64,
    pub sifs_us: u64,
    pub difs_us: u64,
    /// Contention window in slots. Broadcast frames are never retried, so the
    /// window stays at `cw_min`; `cw_max` is carried for completeness only.
    pub cw_min: u32,
    pub cw_max: u32,
    pub plcp_us: u64,
    pub symbol_us: u64,
    pub data_rate_bps: u64,
    pub msg_bytes: u64,
    /// Received power above this means the medium is sensed busy.
    pub cs_threshold_dbm: f64,
}

impl Default for MacConfig {
    fn default() -> Self {
        Self {
            slot_us: 16,
            sifs_us: 32,
            difs_us: 64,
            cw_min: 15,
            cw_max: 1023,
            plcp_us: 8,
            symbol_us: 8,
            data_rate_bps: 6_000_000,
            msg_bytes: 512,
            cs_threshold_dbm: -85.0,
        }
    }
}

/// One frame on the air.
#[derive(Debug, Clone)]
pub struct TransmissionEvent {
    pub sender_id: VehicleId,
    pub start_us: u64,
    pub end_us: u64,
    pub tx_power_dbm: f64,
    pub beacon: Beacon,
}

impl TransmissionEvent {
    pub fn overlaps(&self, other: &TransmissionEvent) -> bool {
        self.start_us < other.end_us && other.start_us < self.end_us
    }
}

/// A successful beacon decode at one receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct Reception {
    pub receiver_id: VehicleId,
    pub sender_id: VehicleId,
    pub beacon: Beacon,
    pub rx_time_us: u64,
}

/// Per-(frame, receiver) small-scale fading source. Implementations must be
/// pure in their arguments so the reception sweep stays order-independent.
pub trait FadingModel {
    fn power_gain(&self, sender: VehicleId, seq: u64, receiver: VehicleId) -> f64;
}

/// No fading: every link sees unit gain. Useful for deterministic tests.
pub struct UnitGain;

impl FadingModel for UnitGain {
    fn power_gain(&self, _: VehicleId, _: u64, _: VehicleId) -> f64 {
        1.0
    }
}

/// Frame airtime: PLCP preamble plus the payload rounded up to whole OFDM
/// symbols at the configured rate.
pub fn frame_airtime_us(cfg: &MacConfig) -> u64 {
    let payload_bits = cfg.msg_bytes * 8;
    let bits_per_symbol = cfg.data_rate_bps * cfg.symbol_us / 1_000_000;
    let symbols = payload_bits.div_ceil(bits_per_symbol);
    cfg.plcp_us + symbols * cfg.symbol_us
}

/// DIFS plus `slot` backoff slots.
pub fn backoff_from_slot(slot: u32, cfg: &MacConfig) -> u64 {
    cfg.difs_us + slot as u64 * cfg.slot_us
}

/// DIFS plus a uniform draw over the fixed broadcast contention window.
pub fn backoff_delay_us<R: Rng>(rng: &mut R, cfg: &MacConfig) -> u64 {
    backoff_from_slot(rng.gen_range(0..=cfg.cw_min), cfg)
}

/// Defer-then-backoff: the frame starts one backoff interval after the later
/// of `now` and the sensed busy-until point.
pub fn schedule_transmission<R: Rng>(
    v: &VehicleState,
    beacon: Beacon,
    now_us: u64,
    medium_busy_until_us: u64,
    rng: &mut R,
    cfg: &MacConfig,
) -> TransmissionEvent {
    let start = now_us.max(medium_busy_until_us) + backoff_delay_us(rng, cfg);
    let end = start + frame_airtime_us(cfg);
    TransmissionEvent {
        sender_id: v.id,
        start_us: start,
        end_us: end,
        tx_power_dbm: beacon.pow_u_dbm,
        beacon,
    }
}

fn rx_power(
    event: &TransmissionEvent,
    receiver_pos: Position,
    geom: &RoadGeometry,
    phy: &PhyConfig,
    fading: &impl FadingModel,
    receiver_id: VehicleId,
) -> f64 {
    let d = ring_distance(event.beacon.position, receiver_pos, geom);
    let gain = fading.power_gain(event.sender_id, event.beacon.seq, receiver_id);
    received_power_dbm(event.tx_power_dbm, d, gain, phy)
}

/// Decide whether one receiver decodes one frame given every frame that
/// overlaps it in time.
///
/// All overlapping frames act as interferers; only the strongest frame of
/// the overlap set can be decoded, and only when its SINR clears the
/// threshold. A receiver transmitting any overlapping frame (or the frame
/// itself) hears nothing.
pub fn decode_frame(
    event: &TransmissionEvent,
    overlapping: &[&TransmissionEvent],
    receiver_id: VehicleId,
    receiver_pos: Position,
    geom: &RoadGeometry,
    phy: &PhyConfig,
    fading: &impl FadingModel,
) -> bool {
    if receiver_id == event.sender_id {
        return false;
    }
    if overlapping.iter().any(|f| f.sender_id == receiver_id) {
        return false; // half duplex: busy transmitting during this frame
    }
    let signal = rx_power(event, receiver_pos, geom, phy, fading, receiver_id);
    let interferers: Vec<f64> = overlapping
        .iter()
        .map(|f| rx_power(f, receiver_pos, geom, phy, fading, receiver_id))
        .collect();
    let strongest = interferers.iter().all(|&p| signal > p);
    strongest && is_decodable(signal, &interferers, phy)
}

/// Resolve which receivers decode which frames across a batch of events.
pub fn resolve_receptions(
    events: &[TransmissionEvent],
    receivers: &[&VehicleState],
    geom: &RoadGeometry,
    phy: &PhyConfig,
    fading: &impl FadingModel,
) -> Vec<Reception> {
    let mut out = Vec::new();
    for (i, e) in events.iter().enumerate() {
        let overlapping: Vec<&TransmissionEvent> = events
            .iter()
            .enumerate()
            .filter(|(j, f)| *j != i && e.overlaps(f))
            .map(|(_, f)| f)
            .collect();
        for r in receivers {
            if decode_frame(e, &overlapping, r.id, r.position, geom, phy, fading) {
                out.push(Reception {
                    receiver_id: r.id,
                    sender_id: e.sender_id,
                    beacon: e.beacon.clone(),
                    rx_time_us: e.end_us,
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core_model::{Direction, Position};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn veh(id: u32, x: f64) -> VehicleState {
        VehicleState::new(
            VehicleId(id),
            Position { x_m: x, lane: 0 },
            60.0,
            Direction::East,
        )
    }

    fn beacon(sender: &mut VehicleState, now: u64) -> Beacon {
        sender.make_beacon(now, 100)
    }

    fn geom() -> RoadGeometry {
        RoadGeometry {
            road_length_m: 2000.0,
            lane_width_m: 3.5,
        }
    }

    #[test]
    fn airtime_matches_defaults() {
        assert_eq!(frame_airtime_us(&MacConfig::default()), 696);
    }

    #[test]
    fn airtime_single_symbol_payload() {
        let cfg = MacConfig {
            msg_bytes: 6, // 48 bits, exactly one symbol
            ..Default::default()
        };
        assert_eq!(frame_airtime_us(&cfg), 16);
    }

    #[test]
    fn airtime_doubled_payload() {
        let cfg = MacConfig {
            msg_bytes: 1024,
            ..Default::default()
        };
        assert_eq!(frame_airtime_us(&cfg), 8 + 171 * 8);
    }

    #[test]
    fn backoff_bounds() {
        let cfg = MacConfig::default();
        assert_eq!(backoff_from_slot(0, &cfg), 64);
        assert_eq!(backoff_from_slot(15, &cfg), 304);
    }

    #[test]
    fn backoff_mean_is_uniform_over_window() {
        let cfg = MacConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 100_000;
        let mean: f64 =
            (0..n).map(|_| backoff_delay_us(&mut rng, &cfg) as f64).sum::<f64>() / n as f64;
        assert!((mean - 184.0).abs() < 2.0, "mean = {mean}");
    }

    /// Rng that always draws the lowest value of any range.
    struct ZeroRng;
    impl rand::RngCore for ZeroRng {
        fn next_u32(&mut self) -> u32 {
            0
        }
        fn next_u64(&mut self) -> u64 {
            0
        }
        fn fill_bytes(&mut self, dest: &mut [u8]) {
            dest.fill(0);
        }
        fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
            dest.fill(0);
            Ok(())
        }
    }

    #[test]
    fn schedule_on_idle_medium_starts_after_difs() {
        let cfg = MacConfig::default();
        let mut v = veh(1, 0.0);
        let b = beacon(&mut v, 1_000);
        let ev = schedule_transmission(&v, b, 1_000, 0, &mut ZeroRng, &cfg);
        assert_eq!(ev.start_us, 1_064);
        assert_eq!(ev.end_us, 1_064 + 696);
    }

    #[test]
    fn schedule_defers_behind_busy_medium() {
        let cfg = MacConfig::default();
        let mut v = veh(1, 0.0);
        let b = beacon(&mut v, 1_000);
        let ev = schedule_transmission(&v, b, 1_000, 1_500, &mut ZeroRng, &cfg);
        assert_eq!(ev.start_us, 1_500 + 64);
    }

    #[test]
    fn equal_draws_produce_overlapping_events() {
        let cfg = MacConfig::default();
        let mut a = veh(1, 0.0);
        let mut b = veh(2, 500.0);
        let ba = beacon(&mut a, 1_000);
        let bb = beacon(&mut b, 1_000);
        let ea = schedule_transmission(&a, ba, 1_000, 0, &mut ZeroRng, &cfg);
        let eb = schedule_transmission(&b, bb, 1_000, 0, &mut ZeroRng, &cfg);
        assert!(ea.overlaps(&eb));
    }

    #[test]
    fn single_event_near_receiver_is_received() {
        let cfg = MacConfig::default();
        let phy = PhyConfig::default();
        let mut s = veh(1, 0.0);
        let r = veh(2, 20.0);
        let b = beacon(&mut s, 0);
        let ev = schedule_transmission(&s, b, 0, 0, &mut ZeroRng, &cfg);
        let got = resolve_receptions(&[ev], &[&r], &geom(), &phy, &UnitGain);
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].receiver_id, VehicleId(2));
        assert_eq!(got[0].rx_time_us, 760);
    }

    #[test]
    fn symmetric_equal_power_overlap_destroys_both() {
        let cfg = MacConfig::default();
        let phy = PhyConfig::default();
        let mut s1 = veh(1, 0.0);
        let mut s2 = veh(2, 100.0);
        let r = veh(3, 50.0); // equidistant midpoint
        let b1 = beacon(&mut s1, 0);
        let b2 = beacon(&mut s2, 0);
        let e1 = schedule_transmission(&s1, b1, 0, 0, &mut ZeroRng, &cfg);
        let e2 = schedule_transmission(&s2, b2, 0, 0, &mut ZeroRng, &cfg);
        let got = resolve_receptions(&[e1, e2], &[&r], &geom(), &phy, &UnitGain);
        assert!(got.is_empty());
    }

    #[test]
    fn sender_never_receives_own_frame() {
        let cfg = MacConfig::default();
        let phy = PhyConfig::default();
        let mut s = veh(1, 0.0);
        let b = beacon(&mut s, 0);
        let ev = schedule_transmission(&s, b, 0, 0, &mut ZeroRng, &cfg);
        let got = resolve_receptions(&[ev], &[&s], &geom(), &phy, &UnitGain);
        assert!(got.is_empty());
    }

    #[test]
    fn transmitting_receiver_misses_overlapping_frame() {
        let cfg = MacConfig::default();
        let phy = PhyConfig::default();
        let mut s1 = veh(1, 0.0);
        let mut s2 = veh(2, 1000.0); // far: no interference at r, but r is busy
        let r_idx = 2;
        let mut r = veh(r_idx, 10.0);
        let b1 = beacon(&mut s1, 0);
        let e1 = schedule_transmission(&s1, b1, 0, 0, &mut ZeroRng, &cfg);
        let b2 = beacon(&mut s2, 0);
        let mut e2 = schedule_transmission(&s2, b2, 0, 0, &mut ZeroRng, &cfg);
        // Make the second frame belong to the receiver itself.
        e2.sender_id = r.id;
        e2.beacon.sender_id = r.id;
        r = veh(r_idx, 10.0);
        let got = resolve_receptions(&[e1, e2.clone()], &[&r], &geom(), &phy, &UnitGain);
        assert!(got.iter().all(|rx| rx.receiver_id != r.id || rx.sender_id == e2.sender_id));
        assert!(!got
            .iter()
            .any(|rx| rx.receiver_id == r.id && rx.sender_id == VehicleId(1)));
    }

    #[test]
    fn reception_count_monotone_under_added_interference() {
        let cfg = MacConfig::default();
        let phy = PhyConfig::default();
        let g = geom();
        let mut s1 = veh(1, 0.0);
        let mut s2 = veh(2, 120.0);
        let receivers: Vec<VehicleState> = (10..20).map(|i| veh(i, 10.0 * i as f64)).collect();
        let refs: Vec<&VehicleState> = receivers.iter().collect();
        let b1 = beacon(&mut s1, 0);
        let e1 = schedule_transmission(&s1, b1, 0, 0, &mut ZeroRng, &cfg);
        let solo = resolve_receptions(std::slice::from_ref(&e1), &refs, &g, &phy, &UnitGain);
        let b2 = beacon(&mut s2, 0);
        let e2 = schedule_transmission(&s2, b2, 0, 0, &mut ZeroRng, &cfg);
        let both = resolve_receptions(&[e1, e2], &refs, &g, &phy, &UnitGain);
        let from_s1 = |rs: &[Reception]| {
            rs.iter().filter(|r| r.sender_id == VehicleId(1)).count()
        };
        assert!(from_s1(&both) <= from_s1(&solo));
    }
}
