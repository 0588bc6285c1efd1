//! Time-grid resampling, confidence bands and CSV tables.

use std::fmt::Write as _;

use crate::error::{IppError, Result};
use crate::fmt::sig9;
use crate::planner::MissionEvent;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Trace,
    Rmse,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Trace => "trace",
            Metric::Rmse => "rmse",
        }
    }

    fn of(self, e: &MissionEvent) -> f64 {
        match self {
            Metric::Trace => e.trace,
            Metric::Rmse => e.rmse,
        }
    }
}

/// `0, dt, 2dt, …` up to and including `budget`.
pub fn time_grid(budget: f64, dt: f64) -> Vec<f64> {
    let n = (budget / dt + 1e-9).floor() as usize;
    let mut g: Vec<f64> = (0..=n).map(|k| k as f64 * dt).collect();
    if g.last().is_some_and(|&t| budget - t > 1e-9) {
        g.push(budget);
    }
    g
}

/// Linear interpolation of a logged metric onto `grid`; the last value is
/// held after the final event.
pub fn resample(events: &[MissionEvent], grid: &[f64], metric: Metric) -> Vec<f64> {
    grid.iter()
        .map(|&t| {
            let k = events.partition_point(|e| e.t <= t);
            if k == 0 {
                return metric.of(&events[0]);
            }
            if k == events.len() {
                return metric.of(&events[k - 1]);
            }
            let (a, b) = (&events[k - 1], &events[k]);
            let w = (t - a.t) / (b.t - a.t);
            metric.of(a) + (metric.of(b) - metric.of(a)) * w
        })
        .collect()
}

/// Mean and normal-approximation 95% band `mean ± 1.96·sd/√k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    pub mean: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

pub fn band(curves: &[Vec<f64>]) -> Band {
    let k = curves.len();
    let len = curves.first().map_or(0, Vec::len);
    let mut out = Band {
        mean: Vec::with_capacity(len),
        lo: Vec::with_capacity(len),
        hi: Vec::with_capacity(len),
    };
    for i in 0..len {
        let mean = curves.iter().map(|c| c[i]).sum::<f64>() / k as f64;
        let half = if k > 1 {
            let var = curves.iter().map(|c| (c[i] - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
            1.96 * var.sqrt() / (k as f64).sqrt()
        } else {
            0.0
        };
        out.mean.push(mean);
        out.lo.push(mean - half);
        out.hi.push(mean + half);
    }
    out
}

/// Columns `t, <label>_mean, <label>_lo, <label>_hi, …`.
pub fn bands_csv(grid: &[f64], columns: &[(&str, &Band)]) -> String {
    let mut out = String::from("t");
    for (label, _) in columns {
        let _ = write!(out, ",{label}_mean,{label}_lo,{label}_hi");
    }
    out.push('\n');
    for (i, t) in grid.iter().enumerate() {
        out.push_str(&sig9(*t));
        for (_, b) in columns {
            let _ = write!(out, ",{},{},{}", sig9(b.mean[i]), sig9(b.lo[i]), sig9(b.hi[i]));
        }
        out.push('\n');
    }
    out
}

/// Time grid plus labelled bands, as read back from a band table.
pub type BandTable = (Vec<f64>, Vec<(String, Band)>);

/// Inverse of [`bands_csv`].
pub fn parse_bands_csv(text: &str) -> Result<BandTable> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| IppError::MissingInput("empty CSV".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.first() != Some(&"t") || !(cols.len() - 1).is_multiple_of(3) {
        return Err(IppError::Parse {
            line: 1,
            msg: format!("unexpected band header `{header}`"),
        });
    }
    let labels: Vec<String> = cols[1..]
        .chunks(3)
        .map(|c| c[0].strip_suffix("_mean").unwrap_or(c[0]).to_string())
        .collect();
    let mut grid = Vec::new();
    let mut bands: Vec<Band> = labels
        .iter()
        .map(|_| Band {
            mean: vec![],
            lo: vec![],
            hi: vec![],
        })
        .collect();
    for (lineno, line) in lines.enumerate() {
        let vals: Vec<f64> = line
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| IppError::Parse {
                line: lineno + 2,
                msg: e.to_string(),
            })?;
        if vals.len() != cols.len() {
            return Err(IppError::Parse {
                line: lineno + 2,
                msg: format!("expected {} fields, got {}", cols.len(), vals.len()),
            });
        }
        grid.push(vals[0]);
        for (b, v) in bands.iter_mut().zip(vals[1..].chunks(3)) {
            b.mean.push(v[0]);
            b.lo.push(v[1]);
            b.hi.push(v[2]);
        }
    }
    Ok((grid, labels.into_iter().zip(bands).collect()))
}
