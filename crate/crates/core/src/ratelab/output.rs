//! CSV rows and gnuplot scripts shared by the experiments.

use crate::error::Result;
use crate::qmoments::fmt_f64;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// One output row; absent values are written as empty cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub seed: u64,
    pub n: u64,
    pub statistic: Option<f64>,
    pub normalized_statistic: Option<f64>,
    pub distance: Option<f64>,
    pub bound: Option<f64>,
}

pub const ROW_HEADER: [&str; 6] = ["seed", "n", "statistic", "normalized_statistic", "distance", "bound"];

fn cell(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn write_rows<W: Write>(out: W, rows: &[ExperimentRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(ROW_HEADER)?;
    for r in rows {
        w.write_record(&[
            r.seed.to_string(),
            r.n.to_string(),
            cell(r.statistic),
            cell(r.normalized_statistic),
            cell(r.distance),
            cell(r.bound),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Log-log scatter of `column` (1-based CSV column) against `n` from
/// `data_file`, rendered to `<stem>.png`.
pub fn gnuplot_script(data_file: &str, stem: &str, column: usize, ylabel: &str) -> String {
    format!(
        "set terminal pngcairo size 900,600\n\
         set output '{stem}.png'\n\
         set datafile separator ','\n\
         set logscale xy\n\
         set key off\n\
         set grid\n\
         set xlabel 'n'\n\
         set ylabel '{ylabel}'\n\
         plot '{data_file}' every ::1 using 2:{column} with points pt 7 ps 0.6\n"
    )
}
