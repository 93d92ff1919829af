//! Deterministic discrete-event engine: jittered beacon generation, CSMA
//! scheduling with defers, SINR reception resolution, per-second protocol
//! epochs, and metrics collection.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet, VecDeque};
use std::fs::File;
use std::io::{BufWriter, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel_analysis::analyze;
use crate::config::{Protocol, SimConfig};
use crate::core_model::{Beacon, VehicleId, VehicleState, P_INIT_DBM, STALE_TIMEOUT_US};
use crate::dfpav_baseline::{
    beaconing_load, dfpav_power_adjust, dfpav_select_power, DfpavState,
};
use crate::error::Result;
use crate::mac_broadcast::{
    decode_frame, schedule_transmission, FadingModel, TransmissionEvent,
};
use crate::metrics::{MetricsRow, TraceRecord, TRACE_HEADER};
use crate::mobility::{advance, init_vehicles, ring_distance, RoadGeometry};
use crate::phy_channel::{nakagami_gain, path_loss_db};
use crate::pso_power::{extract_gbest, select_power};

const MOBILITY_STEP_US: u64 = 100_000;

const STREAM_MAC: u64 = 0x4d41_43;
const STREAM_PSO: u64 = 0x50_534f;
const STREAM_FADING: u64 = 0x4641_4445;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn stream_seed(run_seed: u64, tag: u64, id: u64) -> u64 {
    splitmix64(run_seed ^ splitmix64(tag ^ splitmix64(id)))
}

/// Nakagami fading drawn from a stream keyed by (run seed, sender, seq,
/// receiver): independent per frame/receiver pair and independent of the
/// order the engine evaluates links in.
pub struct SeededNakagami {
    pub run_seed: u64,
    pub m: f64,
}

impl FadingModel for SeededNakagami {
    fn power_gain(&self, sender: VehicleId, seq: u64, receiver: VehicleId) -> f64 {
        let key = splitmix64(
            stream_seed(self.run_seed, STREAM_FADING, sender.0 as u64)
                ^ splitmix64(seq ^ splitmix64((receiver.0 as u64) << 20)),
        );
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        nakagami_gain(self.m, &mut rng)
    }
}

/// Generation-to-first-successful-reception delay in microseconds.
pub fn measure_delay(generation_us: u64, first_rx_us: u64) -> u64 {
    first_rx_us - generation_us
}

#[derive(Debug, PartialEq, Eq)]
enum EvPayload {
    Mobility,
    EpochBoundary,
    BeaconDue,
    TxAttempt { serial: u64 },
    TxEnd { idx: usize },
}

impl EvPayload {
    fn rank(&self) -> u8 {
        match self {
            EvPayload::Mobility => 0,
            EvPayload::EpochBoundary => 1,
            EvPayload::BeaconDue => 2,
            EvPayload::TxAttempt { .. } => 3,
            EvPayload::TxEnd { .. } => 4,
        }
    }
}

#[derive(PartialEq, Eq)]
struct Ev {
    time_us: u64,
    vid: u32,
    order: u64,
    payload: EvPayload,
}

impl Ord for Ev {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed: the binary heap is a max-heap and we want earliest first.
        (other.time_us, other.payload.rank(), other.vid, other.order).cmp(&(
            self.time_us,
            self.payload.rank(),
            self.vid,
            self.order,
        ))
    }
}

impl PartialOrd for Ev {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct RtVehicle {
    state: VehicleState,
    dfpav: DfpavState,
    queue: VecDeque<Beacon>,
    pending: Option<TransmissionEvent>,
    attempt_serial: u64,
    tx_busy_until_us: u64,
    mac_rng: ChaCha8Rng,
    pso_rng: ChaCha8Rng,
}

struct Engine<'a> {
    cfg: &'a SimConfig,
    geom: RoadGeometry,
    interval_us: u64,
    epoch_us: u64,
    duration_us: u64,
    n_epochs: usize,
    vehicles: Vec<RtVehicle>,
    heap: BinaryHeap<Ev>,
    next_order: u64,
    committed: Vec<TransmissionEvent>,
    /// Prune pointer: committed[..lo] can no longer overlap anything new.
    lo: usize,
    fading: SeededNakagami,
    // accumulators
    epoch_power: Vec<f64>,
    epoch_cp: Vec<f64>,
    sent: Vec<u64>,
    received: Vec<u64>,
    delay_sum: Vec<f64>,
    delay_count: Vec<u64>,
    delivered: HashSet<(u32, u64)>,
    trace: Option<BufWriter<File>>,
    analysis_debug: Option<BufWriter<File>>,
}

impl<'a> Engine<'a> {
    fn new(cfg: &'a SimConfig) -> Result<Self> {
        let geom = cfg.mobility.geometry();
        let mut placement_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let states = init_vehicles(&cfg.mobility, &mut placement_rng);
        let interval_us = 1_000_000 / cfg.beacon_rate_hz as u64;
        let duration_us = cfg.duration_s as u64 * 1_000_000;
        let epoch_us = cfg.epoch_s as u64 * 1_000_000;
        let n_epochs = (cfg.duration_s / cfg.epoch_s) as usize;

        let vehicles: Vec<RtVehicle> = states
            .into_iter()
            .map(|mut state| {
                state.current_tx_power_dbm = match cfg.protocol {
                    Protocol::Pbpc => P_INIT_DBM,
                    Protocol::Dfpav => cfg.dfpav.p_start_dbm,
                    Protocol::None => cfg.fixed_power_dbm,
                };
                let id = state.id.0 as u64;
                RtVehicle {
                    state,
                    dfpav: DfpavState::new(&cfg.dfpav),
                    queue: VecDeque::new(),
                    pending: None,
                    attempt_serial: 0,
                    tx_busy_until_us: 0,
                    mac_rng: ChaCha8Rng::seed_from_u64(stream_seed(cfg.seed, STREAM_MAC, id)),
                    pso_rng: ChaCha8Rng::seed_from_u64(stream_seed(cfg.seed, STREAM_PSO, id)),
                }
            })
            .collect();

        let trace = match &cfg.trace_path {
            Some(p) => {
                let mut w = BufWriter::new(File::create(p)?);
                writeln!(w, "{TRACE_HEADER}")?;
                Some(w)
            }
            None => None,
        };
        let analysis_debug = match &cfg.analysis_debug_path {
            Some(p) => {
                let mut w = BufWriter::new(File::create(p)?);
                writeln!(w, "epoch,vehicle_id,cp,F,S,minp,maxp,pd,lbest_power")?;
                Some(w)
            }
            None => None,
        };

        let mut engine = Engine {
            cfg,
            geom,
            interval_us,
            epoch_us,
            duration_us,
            n_epochs,
            vehicles,
            heap: BinaryHeap::new(),
            next_order: 0,
            committed: Vec::new(),
            lo: 0,
            fading: SeededNakagami {
                run_seed: cfg.seed,
                m: cfg.phy.nakagami_m,
            },
            epoch_power: vec![0.0; n_epochs],
            epoch_cp: vec![0.0; n_epochs],
            sent: vec![0; n_epochs],
            received: vec![0; n_epochs],
            delay_sum: vec![0.0; n_epochs],
            delay_count: vec![0; n_epochs],
            delivered: HashSet::new(),
            trace,
            analysis_debug,
        };

        engine.epoch_power[0] = engine.mean_power();

        // Jittered beacon phase per vehicle, then chained dues.
        let mut phase_rng =
            ChaCha8Rng::seed_from_u64(stream_seed(cfg.seed, STREAM_MAC, u64::MAX));
        for i in 0..engine.vehicles.len() {
            let phase = phase_rng.gen_range(0..engine.interval_us);
            engine.vehicles[i].state.next_beacon_time_us = phase;
            engine.push(phase, i as u32, EvPayload::BeaconDue);
        }
        for k in 1..=(duration_us / MOBILITY_STEP_US) {
            engine.push(k * MOBILITY_STEP_US, 0, EvPayload::Mobility);
        }
        for k in 1..=engine.n_epochs as u64 {
            engine.push(k * epoch_us, 0, EvPayload::EpochBoundary);
        }
        Ok(engine)
    }

    fn push(&mut self, time_us: u64, vid: u32, payload: EvPayload) {
        self.next_order += 1;
        self.heap.push(Ev {
            time_us,
            vid,
            order: self.next_order,
            payload,
        });
    }

    fn mean_power(&self) -> f64 {
        self.vehicles
            .iter()
            .map(|v| v.state.current_tx_power_dbm)
            .sum::<f64>()
            / self.vehicles.len() as f64
    }

    fn gen_epoch(&self, timestamp_us: u64) -> usize {
        ((timestamp_us / self.epoch_us) as usize).min(self.n_epochs - 1)
    }

    /// Does `v` sense frame `f` on the air? Energy detection over the mean
    /// link budget, no fading.
    fn senses(&self, v_idx: usize, f: &TransmissionEvent) -> bool {
        let d = ring_distance(
            f.beacon.position,
            self.vehicles[v_idx].state.position,
            &self.geom,
        );
        f.tx_power_dbm - path_loss_db(d, &self.cfg.phy) >= self.cfg.mac.cs_threshold_dbm
    }

    /// Latest end among sensed frames on the air at `now`.
    fn sensed_busy_until(&self, v_idx: usize, now_us: u64) -> u64 {
        let mut busy = now_us;
        for f in &self.committed[self.lo..] {
            if f.start_us <= now_us && f.end_us > now_us && self.senses(v_idx, f) {
                busy = busy.max(f.end_us);
            }
        }
        busy
    }

    fn start_attempt(&mut self, v_idx: usize, beacon: Beacon, now_us: u64) {
        let sensed = self.sensed_busy_until(v_idx, now_us);
        let base = sensed.max(self.vehicles[v_idx].tx_busy_until_us);
        let v = &mut self.vehicles[v_idx];
        let ev = schedule_transmission(&v.state, beacon, now_us, base, &mut v.mac_rng, &self.cfg.mac);
        let start = ev.start_us;
        v.attempt_serial += 1;
        let serial = v.attempt_serial;
        v.pending = Some(ev);
        self.push(start, v_idx as u32, EvPayload::TxAttempt { serial });
    }

    fn on_beacon_due(&mut self, v_idx: usize, now_us: u64) {
        let interval_ms = (self.interval_us / 1000) as u32;
        let beacon = self.vehicles[v_idx].state.make_beacon(now_us, interval_ms);
        let idle = self.vehicles[v_idx].pending.is_none()
            && self.vehicles[v_idx].queue.is_empty()
            && self.vehicles[v_idx].tx_busy_until_us <= now_us;
        if idle {
            self.start_attempt(v_idx, beacon, now_us);
        } else {
            self.vehicles[v_idx].queue.push_back(beacon);
        }
        let next = now_us + self.interval_us;
        if next < self.duration_us {
            self.vehicles[v_idx].state.next_beacon_time_us = next;
            self.push(next, v_idx as u32, EvPayload::BeaconDue);
        }
    }

    fn on_tx_attempt(&mut self, v_idx: usize, serial: u64, now_us: u64) {
        if self.vehicles[v_idx].attempt_serial != serial || self.vehicles[v_idx].pending.is_none()
        {
            return; // superseded by a defer
        }
        // A sensed frame already on the air forces another defer-and-backoff.
        let mut busy = now_us;
        for f in &self.committed[self.lo..] {
            if f.start_us < now_us && f.end_us > now_us && self.senses(v_idx, f) {
                busy = busy.max(f.end_us);
            }
        }
        if busy > now_us {
            let beacon = self.vehicles[v_idx].pending.take().unwrap().beacon;
            let v = &mut self.vehicles[v_idx];
            let ev =
                schedule_transmission(&v.state, beacon, now_us, busy, &mut v.mac_rng, &self.cfg.mac);
            let start = ev.start_us;
            v.attempt_serial += 1;
            let serial = v.attempt_serial;
            v.pending = Some(ev);
            self.push(start, v_idx as u32, EvPayload::TxAttempt { serial });
            return;
        }
        let ev = self.vehicles[v_idx].pending.take().unwrap();
        let epoch = self.gen_epoch(ev.beacon.timestamp_us);
        self.sent[epoch] += 1;
        self.vehicles[v_idx].tx_busy_until_us = ev.end_us;
        let end = ev.end_us;
        let idx = self.committed.len();
        self.committed.push(ev);
        self.push(end, v_idx as u32, EvPayload::TxEnd { idx });
    }

    fn on_tx_end(&mut self, idx: usize, now_us: u64) {
        let e_start = self.committed[idx].start_us;
        let e_end = self.committed[idx].end_us;
        let sender = self.committed[idx].sender_id;
        while self.lo < self.committed.len() && self.committed[self.lo].end_us <= e_start {
            self.lo += 1;
        }
        let overlapping: Vec<usize> = (self.lo..self.committed.len())
            .filter(|&j| {
                j != idx
                    && self.committed[j].start_us < e_end
                    && self.committed[j].end_us > e_start
            })
            .collect();

        let rate = self.cfg.beacon_rate_hz;
        for r_idx in 0..self.vehicles.len() {
            let receiver_id = self.vehicles[r_idx].state.id;
            if receiver_id == sender {
                continue;
            }
            let decoded = {
                let event = &self.committed[idx];
                let interferers: Vec<&TransmissionEvent> =
                    overlapping.iter().map(|&j| &self.committed[j]).collect();
                decode_frame(
                    event,
                    &interferers,
                    receiver_id,
                    self.vehicles[r_idx].state.position,
                    &self.geom,
                    &self.cfg.phy,
                    &self.fading,
                )
            };
            if decoded {
                let beacon = self.committed[idx].beacon.clone();
                let epoch = self.gen_epoch(beacon.timestamp_us);
                self.received[epoch] += 1;
                if self.delivered.insert((sender.0, beacon.seq)) {
                    self.delay_sum[epoch] +=
                        measure_delay(beacon.timestamp_us, now_us) as f64;
                    self.delay_count[epoch] += 1;
                }
                if let Some(w) = &mut self.trace {
                    let rec = TraceRecord::from_reception(receiver_id, &beacon, now_us);
                    let _ = writeln!(w, "{}", rec.csv_line());
                }
                self.vehicles[r_idx]
                    .state
                    .record_beacon(&beacon, now_us, rate);
            }
        }

        if self.vehicles[sender.0 as usize].pending.is_none() {
            if let Some(b) = self.vehicles[sender.0 as usize].queue.pop_front() {
                self.start_attempt(sender.0 as usize, b, now_us);
            }
        }
    }

    fn on_epoch_boundary(&mut self, now_us: u64) {
        let k = (now_us / self.epoch_us) as usize; // 1-based boundary index
        let finished = k - 1;
        let rate = self.cfg.beacon_rate_hz;
        let mut cp_sum = 0.0;
        let mut cp_count = 0u32;
        let run_updates = k < self.n_epochs;

        for v_idx in 0..self.vehicles.len() {
            let analysis = analyze(&self.vehicles[v_idx].state, rate, &self.geom);
            if let Ok(a) = &analysis {
                cp_sum += a.cp;
                cp_count += 1;
                if let Some(w) = &mut self.analysis_debug {
                    let id = self.vehicles[v_idx].state.id;
                    let _ = writeln!(
                        w,
                        "{},{},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4}",
                        finished,
                        id,
                        a.cp,
                        a.overall_fault,
                        a.success,
                        a.min_p_dbm,
                        a.max_p_dbm,
                        a.power_diff_dbm,
                        a.local_best_power_dbm
                    );
                }
            }
            if run_updates {
                match self.cfg.protocol {
                    Protocol::Pbpc => {
                        let v = &mut self.vehicles[v_idx];
                        if let Ok(g) = extract_gbest(v.state.neighbors.values()) {
                            v.state.pso.g_best_dbm = g;
                        }
                        if let Ok(a) = &analysis {
                            let p =
                                select_power(a, &mut v.state.pso, &self.cfg.pso, &mut v.pso_rng);
                            v.state.current_tx_power_dbm = p;
                        }
                        // No analysis possible: hold the previous power.
                    }
                    Protocol::Dfpav => {
                        let params = &self.cfg.dfpav;
                        let v = &self.vehicles[v_idx];
                        let mut in_cs = 0u32;
                        let mut neighbor_powers = Vec::with_capacity(v.state.neighbors.len());
                        for n in v.state.neighbors.values() {
                            let d =
                                ring_distance(v.state.position, n.last_position, &self.geom);
                            if d <= params.cs_max_m {
                                in_cs += 1;
                            }
                            neighbor_powers.push(n.last_pow_u_dbm);
                        }
                        let msg_bits = (self.cfg.mac.msg_bytes * 8) as u32;
                        let load = beaconing_load(in_cs, rate, msg_bits);
                        let density_per_km = in_cs as f64 * 1000.0 / (2.0 * params.cs_max_m);
                        if let Ok(pa) = dfpav_power_adjust(
                            params,
                            density_per_km,
                            rate as f64 * msg_bits as f64,
                        ) {
                            log::debug!(
                                "epoch {finished} vehicle {} power-adjust diagnostic {pa:.3}",
                                v.state.id
                            );
                        }
                        let v = &mut self.vehicles[v_idx];
                        let p =
                            dfpav_select_power(&mut v.dfpav, load, &neighbor_powers, params);
                        v.state.current_tx_power_dbm = p;
                    }
                    Protocol::None => {}
                }
            }
            self.vehicles[v_idx]
                .state
                .reset_window(now_us, STALE_TIMEOUT_US);
        }

        self.epoch_cp[finished] = if cp_count > 0 {
            cp_sum / cp_count as f64
        } else {
            0.0
        };
        if run_updates {
            self.epoch_power[k] = self.mean_power();
        }
    }

    fn run(mut self) -> Result<Vec<MetricsRow>> {
        while let Some(ev) = self.heap.pop() {
            match ev.payload {
                EvPayload::Mobility => {
                    let dt = MOBILITY_STEP_US as f64 / 1e6;
                    for v in &mut self.vehicles {
                        advance(std::slice::from_mut(&mut v.state), dt, &self.geom);
                    }
                }
                EvPayload::EpochBoundary => self.on_epoch_boundary(ev.time_us),
                EvPayload::BeaconDue => self.on_beacon_due(ev.vid as usize, ev.time_us),
                EvPayload::TxAttempt { serial } => {
                    self.on_tx_attempt(ev.vid as usize, serial, ev.time_us)
                }
                EvPayload::TxEnd { idx } => self.on_tx_end(idx, ev.time_us),
            }
        }
        if let Some(w) = &mut self.trace {
            w.flush()?;
        }
        if let Some(w) = &mut self.analysis_debug {
            w.flush()?;
        }

        let rows = (0..self.n_epochs)
            .map(|e| MetricsRow {
                epoch_index: e as u32,
                protocol: self.cfg.protocol,
                mean_tx_power_dbm: self.epoch_power[e],
                mean_collision_probability: self.epoch_cp[e],
                mean_beacon_delay_us: if self.delay_count[e] > 0 {
                    self.delay_sum[e] / self.delay_count[e] as f64
                } else {
                    0.0
                },
                beacons_sent: self.sent[e],
                beacons_received: self.received[e],
            })
            .collect();
        Ok(rows)
    }
}

/// Run one scenario to completion and return one metrics row per epoch.
pub fn run(cfg: &SimConfig) -> Result<Vec<MetricsRow>> {
    cfg.validate()?;
    Engine::new(cfg)?.run()
}
