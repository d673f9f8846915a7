use crate::error::{Error, Result};
use crate::stats::{mean, sample_std};
use crate::Side;

use super::{FitResult, SideFit};

/// Mean and sample standard deviation of rates and utilities over the valid
/// points of one side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SideSummary {
    pub mean_r: f64,
    pub std_r: f64,
    pub mean_u: f64,
    pub std_u: f64,
}

impl SideSummary {
    pub fn from_side(side: &SideFit) -> Option<Self> {
        let idx: Vec<usize> = (0..side.valid.len()).filter(|&i| side.valid[i]).collect();
        if idx.is_empty() {
            return None;
        }
        let r: Vec<f64> = idx.iter().map(|&i| side.r[i]).collect();
        let u: Vec<f64> = idx.iter().map(|&i| side.u[i]).collect();
        Some(SideSummary { mean_r: mean(&r), std_r: sample_std(&r), mean_u: mean(&u), std_u: sample_std(&u) })
    }

    fn values(&self) -> [f64; 4] {
        [self.mean_r, self.std_r, self.mean_u, self.std_u]
    }
}

/// One row of the per-day table: diffusion bid/ask, then jump-diffusion
/// bid/ask.
#[derive(Debug, Clone, PartialEq)]
pub struct DailySummary {
    pub date: String,
    pub gbm: [Option<SideSummary>; 2],
    pub dejd: [Option<SideSummary>; 2],
}

pub const SUMMARY_HEADER: &str = "date,\
gbm_bid_r_mean,gbm_bid_r_std,gbm_bid_u_mean,gbm_bid_u_std,\
gbm_ask_r_mean,gbm_ask_r_std,gbm_ask_u_mean,gbm_ask_u_std,\
dejd_bid_r_mean,dejd_bid_r_std,dejd_bid_u_mean,dejd_bid_u_std,\
dejd_ask_r_mean,dejd_ask_r_std,dejd_ask_u_mean,dejd_ask_u_std";

fn side_pair(fit: Option<&FitResult>) -> [Option<SideSummary>; 2] {
    match fit {
        Some(f) => [SideSummary::from_side(f.side(Side::Bid)), SideSummary::from_side(f.side(Side::Ask))],
        None => [None, None],
    }
}

pub fn daily_summary(date: &str, gbm: Option<&FitResult>, dejd: Option<&FitResult>) -> DailySummary {
    DailySummary { date: date.to_string(), gbm: side_pair(gbm), dejd: side_pair(dejd) }
}

/// Four decimals with trailing zeros removed.
fn fmt4(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

impl DailySummary {
    fn cells(&self) -> Vec<String> {
        let mut cells = vec![self.date.clone()];
        for s in self.gbm.iter().chain(&self.dejd) {
            match s {
                Some(s) => cells.extend(s.values().iter().map(|&v| fmt4(v))),
                None => cells.extend(std::iter::repeat_n(String::new(), 4)),
            }
        }
        cells
    }

    fn from_cells(cells: &[&str]) -> Result<Self> {
        if cells.len() != 17 {
            return Err(Error::Data(format!("summary row needs 17 cells, found {}", cells.len())));
        }
        let mut sides = Vec::with_capacity(4);
        for chunk in cells[1..].chunks(4) {
            if chunk.iter().all(|c| c.trim().is_empty()) {
                sides.push(None);
                continue;
            }
            let mut v = [0.0; 4];
            for (slot, c) in v.iter_mut().zip(chunk) {
                *slot = c.trim().parse().map_err(|_| Error::Data(format!("bad summary value `{c}`")))?;
            }
            sides.push(Some(SideSummary { mean_r: v[0], std_r: v[1], mean_u: v[2], std_u: v[3] }));
        }
        Ok(DailySummary { date: cells[0].trim().to_string(), gbm: [sides[0], sides[1]], dejd: [sides[2], sides[3]] })
    }

    pub fn to_csv_row(&self) -> String {
        self.cells().join(",")
    }

    pub fn from_csv_row(line: &str) -> Result<Self> {
        Self::from_cells(&line.split(',').collect::<Vec<_>>())
    }

    /// Table row in `a&b&...\\` form.
    pub fn to_latex_row(&self) -> String {
        format!("{}\\\\", self.cells().join("&"))
    }

    pub fn from_latex_row(line: &str) -> Result<Self> {
        let body = line.trim().trim_end_matches("\\\\");
        Self::from_cells(&body.split('&').collect::<Vec<_>>())
    }
}
