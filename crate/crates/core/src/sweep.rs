//! Cartesian parameter sweeps over a base scenario.
//!
//! ```toml
//! [[axis]]
//! path = "bank.initial_voltage"
//! range = { start = 1.1, stop = 2.7, step = 0.1 }
//!
//! [[axis]]
//! path = "model"
//! values = ["nonlinear", "ideal:at-zero-volts", "ideal:at-half-rated", "ideal:at-rated"]
//! ```
//!
//! Any scenario field can be an axis; `grid.disturbances[0].magnitude`
//! indexes into arrays.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cell::CellModel;
use crate::engine::run;
use crate::error::{Error, Result};
use crate::grid::Metrics;
use crate::scenario::{ModelVariant, Scenario};

/// A point is inaccurate when its nadir error exceeds this share of the
/// reference frequency dip.
pub const NADIR_ERROR_THRESHOLD: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Range {
    /// Inclusive grid `start, start + step, ..., stop`, rounded to the step.
    pub fn values(&self) -> Result<Vec<f64>> {
        if !(self.step > 0.0) || !(self.stop >= self.start) {
            return Err(Error::Validation(vec![format!(
                "range: need step > 0 and stop >= start, got {self:?}"
            )]));
        }
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        Ok((0..=n)
            .map(|k| {
                let v = self.start + k as f64 * self.step;
                // Strip the accumulated binary noise, e.g. 1.2000000000000002.
                (v * 1e9).round() / 1e9
            })
            .collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<toml::Value>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<Range>,
}

impl Axis {
    pub fn points(&self) -> Result<Vec<toml::Value>> {
        match (&self.values, &self.range) {
            (Some(v), None) => Ok(v.clone()),
            (None, Some(r)) => Ok(r.values()?.into_iter().map(toml::Value::Float).collect()),
            _ => Err(Error::Validation(vec![format!(
                "axis `{}`: exactly one of values / range is required",
                self.path
            )])),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub axis: Vec<Axis>,
}

impl SweepSpec {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }

    /// All grid points in row-major order (last axis fastest).
    pub fn grid(&self) -> Result<Vec<Vec<toml::Value>>> {
        let axes = self.axis.iter().map(Axis::points).collect::<Result<Vec<_>>>()?;
        if axes.is_empty() || axes.iter().any(Vec::is_empty) {
            return Err(Error::Validation(vec!["sweep: the grid is empty".into()]));
        }
        let mut out = vec![Vec::new()];
        for pts in &axes {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    pts.iter().map(move |p| {
                        let mut row = prefix.clone();
                        row.push(p.clone());
                        row
                    })
                })
                .collect();
        }
        Ok(out)
    }
}

fn parse_segment(seg: &str) -> (&str, Option<usize>) {
    match seg.split_once('[') {
        Some((name, rest)) => (name, rest.trim_end_matches(']').parse().ok()),
        None => (seg, None),
    }
}

/// Sets the field at dotted `path` inside a TOML document.
pub fn set_path(doc: &mut toml::Value, path: &str, value: toml::Value) -> Result<()> {
    let bad = |why: &str| Error::Validation(vec![format!("{path}: {why}")]);
    let segs: Vec<&str> = path.split('.').collect();
    let mut cur = doc;
    for (k, seg) in segs.iter().enumerate() {
        let last = k + 1 == segs.len();
        let (name, index) = parse_segment(seg);
        let table = cur.as_table_mut().ok_or_else(|| bad("parent is not a table"))?;
        if last && index.is_none() {
            // Initial voltage and initial SoC are mutually exclusive.
            let sibling = match name {
                "initial_voltage" => Some("initial_soc"),
                "initial_soc" => Some("initial_voltage"),
                _ => None,
            };
            if let Some(s) = sibling {
                table.remove(s);
            }
            table.insert(name.to_string(), value);
            return Ok(());
        }
        let child = table
            .entry(name.to_string())
            .or_insert_with(|| toml::Value::Table(Default::default()));
        cur = match index {
            Some(i) => {
                let arr = child.as_array_mut().ok_or_else(|| bad("not an array"))?;
                let len = arr.len();
                let item = arr
                    .get_mut(i)
                    .ok_or_else(|| bad(&format!("index {i} out of range (length {len})")))?;
                if last {
                    *item = value;
                    return Ok(());
                }
                item
            }
            None => child,
        };
    }
    Ok(())
}

/// One grid point with its scenario.
#[derive(Clone, Debug)]
pub struct Cell {
    pub index: usize,
    pub values: Vec<toml::Value>,
    pub scenario: Scenario,
}

/// Expands `spec` over `base` and validates every resulting scenario.
pub fn expand(base: &Scenario, spec: &SweepSpec) -> Result<Vec<Cell>> {
    let doc: toml::Value = toml::Value::try_from(base).map_err(|e| Error::Parse(e.to_string()))?;
    let mut cells = Vec::new();
    let mut violations = Vec::new();
    for (index, values) in spec.grid()?.into_iter().enumerate() {
        let mut d = doc.clone();
        for (axis, v) in spec.axis.iter().zip(&values) {
            set_path(&mut d, &axis.path, v.clone())?;
        }
        let scenario: Scenario = d
            .try_into()
            .map_err(|e: toml::de::Error| Error::Parse(format!("sweep point {index}: {e}")))?;
        if let Err(Error::Validation(v)) = scenario.validate() {
            violations.extend(v.into_iter().map(|m| format!("sweep point {index}: {m}")));
        }
        cells.push(Cell { index, values, scenario });
    }
    if violations.is_empty() {
        Ok(cells)
    } else {
        Err(Error::Validation(violations))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Row {
    pub index: usize,
    pub values: Vec<String>,
    pub model: ModelVariant,
    /// Initial SoC of the nonlinear cell at the initial voltage.
    pub initial_soc: f64,
    pub initial_voltage: f64,
    pub metrics: Option<Metrics>,
    pub abort: Option<String>,
}

fn display_value(v: &toml::Value) -> String {
    match v {
        toml::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn run_cell(cell: &Cell, window: f64) -> Result<Row> {
    let s = &cell.scenario;
    let u0 = s.bank.initial_cell_voltage()?;
    let initial_soc = CellModel::Nonlinear(s.bank.cell.clone()).soc(&[u0]);
    let r = run(s)?;
    let (metrics, abort) = match &r.abort {
        Some(a) => (None, Some(format!("t = {}: {}", a.t, a.reason))),
        None => (Some(r.metrics(window)?), None),
    };
    Ok(Row {
        index: cell.index,
        values: cell.values.iter().map(display_value).collect(),
        model: s.model,
        initial_soc,
        initial_voltage: u0,
        metrics,
        abort,
    })
}

/// Runs every grid point on `workers` threads; rows keep grid order.
pub fn run_sweep(base: &Scenario, spec: &SweepSpec, workers: usize, window: f64) -> Result<Vec<Row>> {
    let cells = expand(base, spec)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Domain(e.to_string()))?;
    pool.install(|| cells.par_iter().map(|c| run_cell(c, window)).collect())
}

/// Interval of initial SoC.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SocRange {
    pub lo: f64,
    pub hi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VariantSummary {
    pub model: String,
    pub points: usize,
    pub inaccurate_points: usize,
    /// Maximal runs of inaccurate points; each point covers the SoC
    /// interval between the midpoints to its neighbours.
    pub inaccurate_ranges: Vec<SocRange>,
    pub inaccurate_width: f64,
    /// Mean absolute relative time-to-discharge error over points where both
    /// models discharge fully.
    pub discharge_time_error: Option<f64>,
    pub discharge_time_points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GroupSummary {
    /// Values of the axes other than the model and the initial charge.
    pub key: BTreeMap<String, String>,
    pub reference: String,
    pub variants: Vec<VariantSummary>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Summary {
    pub threshold: f64,
    pub groups: Vec<GroupSummary>,
}

fn is_soc_axis(path: &str) -> bool {
    path.ends_with("initial_voltage") || path.ends_with("initial_soc")
}

/// SoC cells between neighbour midpoints, merged over flagged runs.
fn ranges(points: &[(f64, bool)]) -> Vec<SocRange> {
    let n = points.len();
    let edge = |k: usize| -> (f64, f64) {
        let s = points[k].0;
        let lo = if k == 0 { s } else { 0.5 * (points[k - 1].0 + s) };
        let hi = if k + 1 == n { s } else { 0.5 * (s + points[k + 1].0) };
        (lo, hi)
    };
    let mut out: Vec<SocRange> = Vec::new();
    let mut open = false;
    for k in 0..n {
        if !points[k].1 {
            open = false;
            continue;
        }
        let (lo, hi) = edge(k);
        if open {
            out.last_mut().unwrap().hi = hi;
        } else {
            out.push(SocRange { lo, hi });
            open = true;
        }
    }
    out
}

/// Compares every ideal variant with the nonlinear model at each initial
/// charge, within each combination of the remaining axes.
pub fn summarize(spec: &SweepSpec, rows: &[Row], f_nom: f64) -> Summary {
    let other: Vec<usize> = spec
        .axis
        .iter()
        .enumerate()
        .filter(|(_, a)| a.path != "model" && !is_soc_axis(&a.path))
        .map(|(k, _)| k)
        .collect();
    let mut groups: BTreeMap<Vec<String>, Vec<&Row>> = BTreeMap::new();
    for r in rows {
        let key = other.iter().map(|&k| r.values[k].clone()).collect();
        groups.entry(key).or_default().push(r);
    }
    let mut summary = Summary {
        threshold: NADIR_ERROR_THRESHOLD,
        groups: Vec::new(),
    };
    for (key, rows) in groups {
        let Some(reference) = rows.iter().map(|r| r.model).find(|m| !m.is_ideal()) else {
            continue;
        };
        let at_soc = |model: ModelVariant| -> Vec<&Row> {
            let mut v: Vec<&Row> = rows.iter().copied().filter(|r| r.model == model).collect();
            v.sort_by(|a, b| a.initial_soc.total_cmp(&b.initial_soc));
            v
        };
        let nl = at_soc(reference);
        let mut ideals: Vec<ModelVariant> = rows.iter().map(|r| r.model).filter(|m| m.is_ideal()).collect();
        ideals.dedup();
        ideals.sort_by_key(|m| m.to_string());
        ideals.dedup();
        let mut variants = Vec::new();
        for model in ideals {
            let id = at_soc(model);
            let mut flags = Vec::new();
            let mut errs = Vec::new();
            for (a, b) in nl.iter().zip(&id) {
                let (Some(ma), Some(mb)) = (&a.metrics, &b.metrics) else {
                    continue;
                };
                let dip = (f_nom - ma.nadir_hz).abs();
                let err = if dip > 0.0 {
                    (mb.nadir_hz - ma.nadir_hz).abs() / dip
                } else {
                    0.0
                };
                flags.push((a.initial_soc, err > NADIR_ERROR_THRESHOLD));
                if let (Some(ta), Some(tb)) = (ma.time_to_discharge_s, mb.time_to_discharge_s) {
                    if ta > 0.0 {
                        errs.push(((tb - ta) / ta).abs());
                    }
                }
            }
            let inaccurate_ranges = ranges(&flags);
            variants.push(VariantSummary {
                model: model.to_string(),
                points: flags.len(),
                inaccurate_points: flags.iter().filter(|f| f.1).count(),
                inaccurate_width: inaccurate_ranges.iter().fold(0.0, |w, r| w + (r.hi - r.lo)),
                inaccurate_ranges,
                discharge_time_error: (!errs.is_empty()).then(|| errs.iter().sum::<f64>() / errs.len() as f64),
                discharge_time_points: errs.len(),
            });
        }
        summary.groups.push(GroupSummary {
            key: other
                .iter()
                .zip(&key)
                .map(|(&k, v)| (spec.axis[k].path.clone(), v.clone()))
                .collect(),
            reference: reference.to_string(),
            variants,
        });
    }
    summary
}
