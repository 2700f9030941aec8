//! QPU access-time model and external timing logs.
//!
//! Access time for `R` reads is `T_p + R (T_a + T_r + T_d)`; the access
//! overhead `Δ` is reported separately by the vendor and only added on
//! request.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{format_number, BenchError};

/// Worst-case access overhead, 20 ms.
pub const DEFAULT_OVERHEAD_US: f64 = 20_000.0;

/// Per-configuration timing parameters, all in microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QpuTimingModel {
    /// One-off programming time `T_p`.
    pub t_programming: f64,
    /// Access overhead `Δ`, outside the reported access time.
    pub overhead_delta: f64,
    /// Anneal time per sample `T_a`.
    pub t_anneal: f64,
    /// Readout time per sample `T_r`.
    pub t_readout: f64,
    /// Delay (thermalization) time per sample `T_d`.
    pub t_delay: f64,
}

impl QpuTimingModel {
    pub fn new(
        t_programming: f64,
        overhead_delta: f64,
        t_anneal: f64,
        t_readout: f64,
        t_delay: f64,
    ) -> Result<Self, BenchError> {
        let m = QpuTimingModel { t_programming, overhead_delta, t_anneal, t_readout, t_delay };
        for (name, v) in [
            ("programming", t_programming),
            ("overhead", overhead_delta),
            ("anneal", t_anneal),
            ("readout", t_readout),
            ("delay", t_delay),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(BenchError::InvalidTiming(format!("{name} time must be >= 0, got {v}")));
            }
        }
        Ok(m)
    }

    pub fn per_sample(&self) -> f64 {
        self.t_anneal + self.t_readout + self.t_delay
    }

    /// `T_s = R (T_a + T_r + T_d)`.
    pub fn sampling_time(&self, num_reads: usize) -> f64 {
        num_reads as f64 * self.per_sample()
    }
}

/// `T_p + T_s`, plus `Δ` when `include_overhead`.
pub fn qpu_access_time(model: &QpuTimingModel, num_reads: usize, include_overhead: bool) -> f64 {
    let base = model.t_programming + model.sampling_time(num_reads);
    if include_overhead {
        base + model.overhead_delta
    } else {
        base
    }
}

/// Adds the access overhead to an observed access time.
pub fn with_overhead(observed_us: f64, overhead_delta: f64) -> f64 {
    observed_us + overhead_delta
}

/// One column of a measured access-time breakdown at `anneal_time = 50`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceTiming {
    pub num_reads: usize,
    pub qpu_access_time: f64,
    pub qpu_sampling_time: f64,
    pub qpu_programming_time: f64,
    pub qpu_readout_time_per_sample: f64,
    pub qpu_delay_time_per_sample: f64,
}

pub const REFERENCE_ANNEAL_TIME_US: f64 = 50.0;

/// Measured timing fields for 1, 10, 100 and 500 reads.
pub const REFERENCE_TIMINGS: [ReferenceTiming; 4] = [
    ReferenceTiming {
        num_reads: 1,
        qpu_access_time: 15900.0,
        qpu_sampling_time: 117.0,
        qpu_programming_time: 15782.0,
        qpu_readout_time_per_sample: 47.0,
        qpu_delay_time_per_sample: 20.0,
    },
    ReferenceTiming {
        num_reads: 10,
        qpu_access_time: 17133.0,
        qpu_sampling_time: 1370.0,
        qpu_programming_time: 15762.0,
        qpu_readout_time_per_sample: 66.0,
        qpu_delay_time_per_sample: 20.0,
    },
    ReferenceTiming {
        num_reads: 100,
        qpu_access_time: 34145.0,
        qpu_sampling_time: 18384.0,
        qpu_programming_time: 15761.0,
        qpu_readout_time_per_sample: 113.0,
        qpu_delay_time_per_sample: 20.0,
    },
    ReferenceTiming {
        num_reads: 500,
        qpu_access_time: 91141.0,
        qpu_sampling_time: 75380.0,
        qpu_programming_time: 15761.0,
        qpu_readout_time_per_sample: 80.0,
        qpu_delay_time_per_sample: 20.0,
    },
];

impl ReferenceTiming {
    /// Model built from this column's own fields.
    pub fn model(&self, overhead_delta: f64) -> QpuTimingModel {
        QpuTimingModel {
            t_programming: self.qpu_programming_time,
            overhead_delta,
            t_anneal: REFERENCE_ANNEAL_TIME_US,
            t_readout: self.qpu_readout_time_per_sample,
            t_delay: self.qpu_delay_time_per_sample,
        }
    }

    pub fn lookup(num_reads: usize) -> Option<&'static ReferenceTiming> {
        REFERENCE_TIMINGS.iter().find(|r| r.num_reads == num_reads)
    }
}

/// One execution in an external timing log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingLogEntry {
    pub system: String,
    pub num_reads: usize,
    pub batch: usize,
    pub qpu_access_time_us: f64,
}

/// Mean access time of one (system, num_reads, batch) group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingMean {
    pub system: String,
    pub num_reads: usize,
    pub batch: usize,
    pub executions: usize,
    pub mean_qpu_access_time_us: f64,
}

/// Reads `system,num_reads,batch,qpu_access_time_us` rows.
pub fn load_timing_log<R: Read>(source: R) -> Result<Vec<TimingLogEntry>, BenchError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let mut entries = Vec::new();
    for row in reader.deserialize() {
        let entry: TimingLogEntry = row?;
        if !(entry.qpu_access_time_us.is_finite() && entry.qpu_access_time_us >= 0.0) {
            return Err(BenchError::InvalidTiming(format!(
                "negative or non-finite access time {}",
                entry.qpu_access_time_us
            )));
        }
        entries.push(entry);
    }
    Ok(entries)
}

/// Arithmetic mean per (num_reads, batch, system), in that sort order.
pub fn aggregate_timing_log(entries: &[TimingLogEntry]) -> Vec<TimingMean> {
    let mut groups: BTreeMap<(usize, usize, &str), (usize, f64)> = BTreeMap::new();
    for e in entries {
        let slot = groups.entry((e.num_reads, e.batch, e.system.as_str())).or_default();
        slot.0 += 1;
        slot.1 += e.qpu_access_time_us;
    }
    groups
        .into_iter()
        .map(|((num_reads, batch, system), (count, sum))| TimingMean {
            system: system.to_owned(),
            num_reads,
            batch,
            executions: count,
            mean_qpu_access_time_us: sum / count as f64,
        })
        .collect()
}

/// CSV header `system,num_reads,batch,executions,mean_qpu_access_time_us`.
/// Integral means print without a fractional part.
pub fn emit_timing_means<W: Write>(means: &[TimingMean], sink: W) -> Result<(), BenchError> {
    let mut writer = csv::Writer::from_writer(sink);
    writer.write_record(["system", "num_reads", "batch", "executions", "mean_qpu_access_time_us"])?;
    for m in means {
        writer.write_record([
            m.system.clone(),
            m.num_reads.to_string(),
            m.batch.to_string(),
            m.executions.to_string(),
            format_number(m.mean_qpu_access_time_us),
        ])?;
    }
    writer.flush()?;
    Ok(())
}
