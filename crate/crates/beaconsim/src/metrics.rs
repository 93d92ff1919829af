//! Per-epoch metrics rows, the metrics CSV format, the per-reception trace
//! record, and run-to-run comparison.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::config::Protocol;
use crate::core_model::{Beacon, VehicleId};
use crate::error::{Error, Result};

pub const METRICS_HEADER: &str =
    "epoch,protocol,mean_tx_power_dbm,mean_cp,mean_delay_us,sent,received";

/// One per-second, per-protocol record.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub epoch_index: u32,
    pub protocol: Protocol,
    pub mean_tx_power_dbm: f64,
    /// Collision probability averaged over vehicles, fraction in [0, 1].
    pub mean_collision_probability: f64,
    /// Mean generation-to-first-reception delay over delivered beacons, µs.
    pub mean_beacon_delay_us: f64,
    pub beacons_sent: u64,
    pub beacons_received: u64,
}

impl MetricsRow {
    fn csv_line(&self) -> String {
        format!(
            "{},{},{:.4},{:.4},{:.4},{},{}",
            self.epoch_index,
            self.protocol.label(),
            self.mean_tx_power_dbm,
            self.mean_collision_probability,
            self.mean_beacon_delay_us,
            self.beacons_sent,
            self.beacons_received,
        )
    }
}

/// Render the rows with the fixed four-decimal format.
pub fn metrics_csv_string(rows: &[MetricsRow]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for row in rows {
        let _ = writeln!(out, "{}", row.csv_line());
    }
    out
}

/// Write the metrics CSV. Rows must be non-empty.
pub fn write_metrics_csv(rows: &[MetricsRow], path: &Path) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::Config("no metrics rows to write".into()));
    }
    fs::write(path, metrics_csv_string(rows))?;
    Ok(())
}

/// One reception-trace line: the receiving context plus the beacon fields.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub rx_time_us: u64,
    pub receiver_id: VehicleId,
    pub sender_id: VehicleId,
    pub seq: u64,
    pub pos_x: f64,
    pub lane: u8,
    pub speed_kmh: f64,
    pub pop_best_dbm: f64,
    pub pow_u_dbm: f64,
}

pub const TRACE_HEADER: &str =
    "rx_time_us,receiver_id,sender_id,seq,pos_x,lane,speed_kmh,pop_best_dbm,pow_u_dbm";

impl TraceRecord {
    pub fn from_reception(receiver: VehicleId, beacon: &Beacon, rx_time_us: u64) -> Self {
        Self {
            rx_time_us,
            receiver_id: receiver,
            sender_id: beacon.sender_id,
            seq: beacon.seq,
            pos_x: beacon.position.x_m,
            lane: beacon.position.lane,
            speed_kmh: beacon.speed_kmh,
            pop_best_dbm: beacon.pop_best_dbm,
            pow_u_dbm: beacon.pow_u_dbm,
        }
    }

    /// Floats use the shortest round-trip representation so a parsed line
    /// reproduces the record bit-exactly.
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.rx_time_us,
            self.receiver_id,
            self.sender_id,
            self.seq,
            self.pos_x,
            self.lane,
            self.speed_kmh,
            self.pop_best_dbm,
            self.pow_u_dbm,
        )
    }

    pub fn parse_csv_line(line: &str) -> Result<Self> {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(Error::Schema(format!(
                "trace line has {} fields, expected 9",
                fields.len()
            )));
        }
        let bad = |name: &str| Error::Schema(format!("bad trace field `{name}`"));
        Ok(Self {
            rx_time_us: fields[0].parse().map_err(|_| bad("rx_time_us"))?,
            receiver_id: VehicleId(fields[1].parse().map_err(|_| bad("receiver_id"))?),
            sender_id: VehicleId(fields[2].parse().map_err(|_| bad("sender_id"))?),
            seq: fields[3].parse().map_err(|_| bad("seq"))?,
            pos_x: fields[4].parse().map_err(|_| bad("pos_x"))?,
            lane: fields[5].parse().map_err(|_| bad("lane"))?,
            speed_kmh: fields[6].parse().map_err(|_| bad("speed_kmh"))?,
            pop_best_dbm: fields[7].parse().map_err(|_| bad("pop_best_dbm"))?,
            pow_u_dbm: fields[8].parse().map_err(|_| bad("pow_u_dbm"))?,
        })
    }
}

/// Column means of one metrics CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvSummary {
    pub epochs: usize,
    pub mean_tx_power_dbm: f64,
    pub mean_cp: f64,
    pub mean_delay_us: f64,
    pub total_sent: u64,
    pub total_received: u64,
}

fn read_summary(path: &Path) -> Result<CsvSummary> {
    let contents = fs::read_to_string(path)?;
    let mut lines = contents.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Schema(format!("{}: empty file", path.display())))?;
    if header != METRICS_HEADER {
        return Err(Error::Schema(format!(
            "{}: unexpected header `{header}`",
            path.display()
        )));
    }
    let mut n = 0usize;
    let mut power = 0.0;
    let mut cp = 0.0;
    let mut delay = 0.0;
    let mut sent = 0u64;
    let mut received = 0u64;
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(Error::Schema(format!(
                "{}: row has {} fields, expected 7",
                path.display(),
                fields.len()
            )));
        }
        let num = |i: usize| -> Result<f64> {
            fields[i]
                .parse::<f64>()
                .map_err(|_| Error::Schema(format!("{}: bad number `{}`", path.display(), fields[i])))
        };
        power += num(2)?;
        cp += num(3)?;
        delay += num(4)?;
        sent += num(5)? as u64;
        received += num(6)? as u64;
        n += 1;
    }
    if n == 0 {
        return Err(Error::Schema(format!("{}: no data rows", path.display())));
    }
    Ok(CsvSummary {
        epochs: n,
        mean_tx_power_dbm: power / n as f64,
        mean_cp: cp / n as f64,
        mean_delay_us: delay / n as f64,
        total_sent: sent,
        total_received: received,
    })
}

/// Per-metric means of two runs plus their b/a ratios.
#[derive(Debug, Clone)]
pub struct CompareSummary {
    pub a: CsvSummary,
    pub b: CsvSummary,
}

impl CompareSummary {
    pub fn power_ratio(&self) -> f64 {
        self.b.mean_tx_power_dbm / self.a.mean_tx_power_dbm
    }
    pub fn cp_ratio(&self) -> f64 {
        self.b.mean_cp / self.a.mean_cp
    }
    pub fn delay_ratio(&self) -> f64 {
        self.b.mean_delay_us / self.a.mean_delay_us
    }
}

impl std::fmt::Display for CompareSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "metric                a            b        b/a")?;
        writeln!(
            f,
            "mean_tx_power_dbm  {:>10.4} {:>12.4} {:>10.4}",
            self.a.mean_tx_power_dbm,
            self.b.mean_tx_power_dbm,
            self.power_ratio()
        )?;
        writeln!(
            f,
            "mean_cp            {:>10.4} {:>12.4} {:>10.4}",
            self.a.mean_cp,
            self.b.mean_cp,
            self.cp_ratio()
        )?;
        writeln!(
            f,
            "mean_delay_us      {:>10.4} {:>12.4} {:>10.4}",
            self.a.mean_delay_us,
            self.b.mean_delay_us,
            self.delay_ratio()
        )
    }
}

/// Compare two metrics CSVs that share the schema and epoch count.
pub fn compare_runs(csv_a: &Path, csv_b: &Path) -> Result<CompareSummary> {
    let a = read_summary(csv_a)?;
    let b = read_summary(csv_b)?;
    if a.epochs != b.epochs {
        return Err(Error::Schema(format!(
            "epoch count mismatch: {} vs {}",
            a.epochs, b.epochs
        )));
    }
    Ok(CompareSummary { a, b })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core_model::{Direction, Position};

    fn row(epoch: u32, delay: f64) -> MetricsRow {
        MetricsRow {
            epoch_index: epoch,
            protocol: Protocol::Pbpc,
            mean_tx_power_dbm: 25.0,
            mean_collision_probability: 0.36,
            mean_beacon_delay_us: delay,
            beacons_sent: 2000,
            beacons_received: 90_000,
        }
    }

    #[test]
    fn csv_has_header_plus_one_line_per_epoch() {
        let rows: Vec<MetricsRow> = (0..10).map(|e| row(e, 760.0)).collect();
        let text = metrics_csv_string(&rows);
        assert_eq!(text.lines().count(), 11);
        assert_eq!(text.lines().next().unwrap(), METRICS_HEADER);
    }

    #[test]
    fn csv_formatting_is_deterministic() {
        let rows: Vec<MetricsRow> = (0..3).map(|e| row(e, 760.123_456)).collect();
        assert_eq!(metrics_csv_string(&rows), metrics_csv_string(&rows));
        assert!(metrics_csv_string(&rows).contains("760.1235"));
    }

    #[test]
    fn cp_column_stays_in_unit_interval() {
        let rows: Vec<MetricsRow> = (0..10).map(|e| row(e, 1.0)).collect();
        for line in metrics_csv_string(&rows).lines().skip(1) {
            let cp: f64 = line.split(',').nth(3).unwrap().parse().unwrap();
            assert!((0.0..=1.0).contains(&cp));
        }
    }

    #[test]
    fn empty_rows_refuse_to_write() {
        let dir = tempfile::tempdir().unwrap();
        assert!(write_metrics_csv(&[], &dir.path().join("m.csv")).is_err());
    }

    #[test]
    fn identical_files_compare_at_unit_ratios() {
        let dir = tempfile::tempdir().unwrap();
        let rows: Vec<MetricsRow> = (0..5).map(|e| row(e, 500.0)).collect();
        let pa = dir.path().join("a.csv");
        let pb = dir.path().join("b.csv");
        write_metrics_csv(&rows, &pa).unwrap();
        write_metrics_csv(&rows, &pb).unwrap();
        let cmp = compare_runs(&pa, &pb).unwrap();
        assert!((cmp.delay_ratio() - 1.0).abs() < 1e-12);
        assert!((cmp.cp_ratio() - 1.0).abs() < 1e-12);
        assert!((cmp.power_ratio() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn delay_ratio_reflects_column_means() {
        let dir = tempfile::tempdir().unwrap();
        let a: Vec<MetricsRow> = (0..4).map(|e| row(e, 100.0)).collect();
        let b: Vec<MetricsRow> = (0..4).map(|e| row(e, 55.0)).collect();
        let pa = dir.path().join("a.csv");
        let pb = dir.path().join("b.csv");
        write_metrics_csv(&a, &pa).unwrap();
        write_metrics_csv(&b, &pb).unwrap();
        let cmp = compare_runs(&pa, &pb).unwrap();
        assert!((cmp.delay_ratio() - 0.55).abs() < 1e-12);
    }

    #[test]
    fn epoch_count_mismatch_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let a: Vec<MetricsRow> = (0..4).map(|e| row(e, 100.0)).collect();
        let b: Vec<MetricsRow> = (0..5).map(|e| row(e, 100.0)).collect();
        let pa = dir.path().join("a.csv");
        let pb = dir.path().join("b.csv");
        write_metrics_csv(&a, &pa).unwrap();
        write_metrics_csv(&b, &pb).unwrap();
        assert!(compare_runs(&pa, &pb).is_err());
    }

    #[test]
    fn foreign_header_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let pa = dir.path().join("a.csv");
        std::fs::write(&pa, "time,stuff\n1,2\n").unwrap();
        let rows: Vec<MetricsRow> = (0..1).map(|e| row(e, 1.0)).collect();
        let pb = dir.path().join("b.csv");
        write_metrics_csv(&rows, &pb).unwrap();
        assert!(compare_runs(&pa, &pb).is_err());
    }

    #[test]
    fn trace_record_roundtrips_bit_exactly() {
        let beacon = Beacon {
            seq: 17,
            interval_ms: 100,
            timestamp_us: 3_141_592,
            sender_id: VehicleId(8),
            position: Position {
                x_m: 123.456_789_012_345,
                lane: 2,
            },
            speed_kmh: 88.800_000_000_01,
            direction: Direction::East,
            pop_best_dbm: 27.6,
            pow_u_dbm: 28.2,
        };
        let rec = TraceRecord::from_reception(VehicleId(3), &beacon, 3_142_352);
        let back = TraceRecord::parse_csv_line(&rec.csv_line()).unwrap();
        assert_eq!(back, rec);
        assert_eq!(back.pos_x.to_bits(), rec.pos_x.to_bits());
        assert_eq!(back.speed_kmh.to_bits(), rec.speed_kmh.to_bits());
    }
}
