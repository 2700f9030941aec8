use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{format_number, BenchError};

pub const REPORT_COLUMNS: [&str; 7] = [
    "solver",
    "num_reads",
    "batch",
    "total_time_us",
    "first_optimum_read",
    "best_energy",
    "optimal_energy",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

/// One sampler call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub solver: String,
    pub num_reads: usize,
    /// 1-based.
    pub batch: usize,
    pub total_time_us: f64,
    pub first_optimum_read: Option<usize>,
    pub best_energy: f64,
    pub optimal_energy: f64,
}

/// Means over the batches of one (solver, num_reads) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchAggregate {
    pub solver: String,
    pub num_reads: usize,
    pub batches: usize,
    pub mean_total_time_us: f64,
    pub mean_best_energy: f64,
    /// Batches that reached the optimum at all.
    pub optimum_hits: usize,
    /// Mean over the batches that reached the optimum.
    pub mean_first_optimum_read: Option<f64>,
    /// Median over all batches, a miss counting as larger than any read;
    /// `None` when the median lands on a miss.
    pub median_first_optimum_read: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BenchReport {
    rows: Vec<BenchRow>,
}

impl BenchReport {
    /// Sorts rows by (solver, num_reads, batch).
    pub fn from_rows(mut rows: Vec<BenchRow>) -> Self {
        rows.sort_by(|a, b| {
            (a.solver.as_str(), a.num_reads, a.batch).cmp(&(b.solver.as_str(), b.num_reads, b.batch))
        });
        BenchReport { rows }
    }

    pub fn rows(&self) -> &[BenchRow] {
        &self.rows
    }

    pub fn merge(self, other: BenchReport) -> Self {
        let mut rows = self.rows;
        rows.extend(other.rows);
        BenchReport::from_rows(rows)
    }

    pub fn aggregates(&self) -> Vec<BenchAggregate> {
        self.rows
            .chunk_by(|a, b| a.solver == b.solver && a.num_reads == b.num_reads)
            .map(aggregate)
            .collect()
    }
}

fn aggregate(group: &[BenchRow]) -> BenchAggregate {
    let count = group.len() as f64;
    let hits: Vec<usize> = group.iter().filter_map(|r| r.first_optimum_read).collect();
    let mut ranked: Vec<Option<usize>> = group.iter().map(|r| r.first_optimum_read).collect();
    // None sorts after every Some
    ranked.sort_by_key(|r| r.map_or((1, 0), |v| (0, v)));
    let mid = ranked.len() / 2;
    let median = if ranked.len() % 2 == 1 {
        ranked[mid].map(|v| v as f64)
    } else {
        match (ranked[mid - 1], ranked[mid]) {
            (Some(a), Some(b)) => Some((a + b) as f64 / 2.0),
            _ => None,
        }
    };
    BenchAggregate {
        solver: group[0].solver.clone(),
        num_reads: group[0].num_reads,
        batches: group.len(),
        mean_total_time_us: group.iter().map(|r| r.total_time_us).sum::<f64>() / count,
        mean_best_energy: group.iter().map(|r| r.best_energy).sum::<f64>() / count,
        optimum_hits: hits.len(),
        mean_first_optimum_read: (!hits.is_empty())
            .then(|| hits.iter().sum::<usize>() as f64 / hits.len() as f64),
        median_first_optimum_read: median,
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ReportDocument {
    rows: Vec<BenchRow>,
    aggregates: Vec<BenchAggregate>,
}

/// CSV carries the rows only (aggregates are recomputed on load); JSON
/// carries rows and aggregates.
pub fn emit_report<W: Write>(report: &BenchReport, format: ReportFormat, sink: W) -> Result<(), BenchError> {
    match format {
        ReportFormat::Csv => {
            let mut writer = csv::Writer::from_writer(sink);
            writer.write_record(REPORT_COLUMNS)?;
            for r in &report.rows {
                writer.write_record([
                    r.solver.clone(),
                    r.num_reads.to_string(),
                    r.batch.to_string(),
                    format_number(r.total_time_us),
                    r.first_optimum_read.map(|v| v.to_string()).unwrap_or_default(),
                    format_number(r.best_energy),
                    format_number(r.optimal_energy),
                ])?;
            }
            writer.flush()?;
        }
        ReportFormat::Json => {
            let doc = ReportDocument { rows: report.rows.clone(), aggregates: report.aggregates() };
            serde_json::to_writer_pretty(sink, &doc).map_err(|e| BenchError::Parse(e.to_string()))?;
        }
    }
    Ok(())
}

pub fn load_report<R: Read>(source: R, format: ReportFormat) -> Result<BenchReport, BenchError> {
    match format {
        ReportFormat::Csv => {
            let mut reader = csv::Reader::from_reader(source);
            let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
            if header != REPORT_COLUMNS {
                return Err(BenchError::Parse(format!("unexpected report header {header:?}")));
            }
            let rows = reader.deserialize().collect::<Result<Vec<BenchRow>, _>>()?;
            Ok(BenchReport::from_rows(rows))
        }
        ReportFormat::Json => {
            let doc: ReportDocument =
                serde_json::from_reader(source).map_err(|e| BenchError::Parse(e.to_string()))?;
            Ok(BenchReport::from_rows(doc.rows))
        }
    }
}
