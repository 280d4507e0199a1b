//! Frequency-response metrics of a recorded run.

use serde::Serialize;

use crate::engine::SimResult;
use crate::error::{Error, Result};

/// First under-frequency load-shedding stage, below nominal [Hz].
pub const UFLS_MARGIN_HZ: f64 = 0.8;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Metrics {
    pub nadir_hz: f64,
    pub nadir_time_s: f64,
    /// `(f(t0 + W) - f(t0)) / W` from the disturbance onset `t0`.
    pub avg_rocof_hz_per_s: f64,
    pub rocof_window_s: f64,
    pub onset_s: f64,
    /// Onset to the first discharge-gate disable; `None` if it never happens.
    pub time_to_discharge_s: Option<f64>,
    pub final_frequency_hz: f64,
    pub max_deviation_hz: f64,
    pub final_soc: f64,
    pub min_soc: f64,
    pub ufls_threshold_hz: f64,
    pub ufls_crossed: bool,
}

fn interpolate(time: &[f64], values: &[f64], t: f64) -> f64 {
    if t <= time[0] {
        return values[0];
    }
    let last = time.len() - 1;
    if t >= time[last] {
        return values[last];
    }
    let hi = time.partition_point(|&x| x < t);
    let lo = hi - 1;
    let w = (t - time[lo]) / (time[hi] - time[lo]);
    values[lo] + w * (values[hi] - values[lo])
}

/// Nadir, average RoCoF over `window` seconds, time-to-discharge and
/// settling statistics.
pub fn metrics(series: &SimResult, window: f64) -> Result<Metrics> {
    let ch = &series.channels;
    if ch.time.is_empty() {
        return Err(Error::Domain("empty series".into()));
    }
    if window <= 0.0 {
        return Err(Error::Domain(format!("RoCoF window must be > 0, got {window}")));
    }
    let onset = series.onset.unwrap_or(ch.time[0]);
    let f = &ch.frequency_hz;
    let (nadir_idx, nadir) = f
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
    let f0 = interpolate(&ch.time, f, onset);
    let f1 = interpolate(&ch.time, f, onset + window);
    let f_nom = series.f_nom;
    let max_dev = f.iter().map(|v| (v - f_nom).abs()).fold(0.0, f64::max);

    let time_to_discharge = series
        .discharge_disabled_at(onset)
        .map(|t| t - onset);

    let soc = &ch.soc;
    let ufls = f_nom - UFLS_MARGIN_HZ;
    Ok(Metrics {
        nadir_hz: nadir,
        nadir_time_s: ch.time[nadir_idx],
        avg_rocof_hz_per_s: (f1 - f0) / window,
        rocof_window_s: window,
        onset_s: onset,
        time_to_discharge_s: time_to_discharge,
        final_frequency_hz: *f.last().unwrap(),
        max_deviation_hz: max_dev,
        final_soc: soc.last().copied().unwrap_or(f64::NAN),
        min_soc: soc.iter().copied().fold(f64::INFINITY, f64::min),
        ufls_threshold_hz: ufls,
        ufls_crossed: nadir < ufls,
    })
}
