//! Cell-level studies: a single cell under a piecewise-constant test current,
//! and the model-reduction comparison built on it.

use serde::{Deserialize, Serialize};

use crate::cell::{CellModel, CellParams, IdealVariant, SlowBranch, MAX_GROUPS};
use crate::error::{Checker, Error, Result};
use crate::ode::{Method, Stepper};

/// Points whose reference magnitude is below this share of the peak are left
/// out of a percentage error.
pub const MAPE_FLOOR: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    /// Cell current [A]; positive charges.
    pub current: f64,
    pub duration: f64,
}

fn default_study_dt() -> f64 {
    1e-3
}

fn default_record_every() -> usize {
    10
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurrentProfile {
    /// Initial cell voltage [V]; defaults to half the rated voltage.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_voltage: Option<f64>,
    #[serde(default = "default_study_dt")]
    pub dt: f64,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    pub segments: Vec<Segment>,
}

impl Default for CurrentProfile {
    /// 30 A charge, rest, 30 A discharge, rest.
    fn default() -> Self {
        let seg = |current, duration| Segment { current, duration };
        Self {
            initial_voltage: None,
            dt: default_study_dt(),
            record_every: default_record_every(),
            segments: vec![seg(30.0, 10.0), seg(0.0, 5.0), seg(-30.0, 10.0), seg(0.0, 5.0)],
        }
    }
}

impl CurrentProfile {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let mut c = Checker::new("");
        c.positive("dt", self.dt);
        c.check(self.record_every >= 1, "record_every", || "must be >= 1".into());
        c.check(!self.segments.is_empty(), "segments", || "at least one segment is required".into());
        for (k, s) in self.segments.iter().enumerate() {
            c.finite(&format!("segments[{k}].current"), s.current);
            c.positive(&format!("segments[{k}].duration"), s.duration);
        }
        if let Some(u) = self.initial_voltage {
            c.non_negative("initial_voltage", u);
        }
        c.finish()
    }

    pub fn duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    /// Current at `t`, right-continuous at segment boundaries; zero after the end.
    pub fn current_at(&self, t: f64) -> f64 {
        let mut end = 0.0;
        for s in &self.segments {
            end += s.duration;
            if t + 1e-9 < end {
                return s.current;
            }
        }
        0.0
    }
}

/// Recorded response of one cell.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct CellTrace {
    pub time: Vec<f64>,
    pub current: Vec<f64>,
    pub u_terminal: Vec<f64>,
    pub u_c: Vec<f64>,
    /// Energy a terminal-voltage based estimate would report [J].
    pub energy: Vec<f64>,
}

/// Simulates `model` from rest at `u0` under `profile`.
pub fn simulate_cell(model: &CellModel, u0: f64, profile: &CurrentProfile, method: Method) -> Result<CellTrace> {
    profile.validate()?;
    let dt = profile.dt;
    let steps = (profile.duration() / dt).round() as usize;
    let mut x = model.rest_state(u0);
    let mut stepper = Stepper::new(method, x.len());
    let energy_of = |u: f64| match model {
        CellModel::Nonlinear(p) => p.stored_energy(u.max(0.0)),
        CellModel::Ideal(p) => Ok(p.stored_energy(u)),
    };
    let mut tr = CellTrace::default();
    for n in 0..=steps {
        let t = n as f64 * dt;
        let i = profile.current_at(t);
        if n % profile.record_every == 0 || n == steps {
            let u = model.terminal_voltage(&x, i);
            tr.time.push(t);
            tr.current.push(i);
            tr.u_terminal.push(u);
            tr.u_c.push(x[0]);
            tr.energy.push(energy_of(u)?);
        }
        if n == steps {
            break;
        }
        let f = |_t: f64, x: &[f64], dx: &mut [f64]| model.derivatives(x, i, dx);
        stepper.step(&f, t, &mut x, dt);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericAbort {
                t: t + dt,
                reason: "non-finite cell state".into(),
            });
        }
    }
    Ok(tr)
}

/// Mean absolute percentage error of `x` against `reference`, skipping
/// points where the reference is below [`MAPE_FLOOR`] of its peak.
pub fn mape(x: &[f64], reference: &[f64]) -> Result<f64> {
    if x.len() != reference.len() || x.is_empty() {
        return Err(Error::Domain(format!(
            "MAPE needs equal non-empty series, got {} and {}",
            x.len(),
            reference.len()
        )));
    }
    let peak = reference.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let floor = MAPE_FLOOR * peak;
    let (sum, n) = x
        .iter()
        .zip(reference)
        .filter(|(_, r)| r.abs() >= floor && r.abs() > 0.0)
        .fold((0.0, 0usize), |(s, n), (v, r)| (s + ((v - r) / r).abs(), n + 1));
    if n == 0 {
        return Err(Error::Domain("reference is identically zero".into()));
    }
    Ok(100.0 * sum / n as f64)
}

/// One model in the reduction study.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(into = "String")]
pub enum ReducedVariant {
    /// All branches: groups, slow branches and leakage.
    Full,
    /// Fast branch only with the given number of RC groups.
    FastBranch(usize),
    Ideal(IdealVariant),
}

impl ReducedVariant {
    pub const ALL: [ReducedVariant; 7] = [
        Self::Full,
        Self::FastBranch(5),
        Self::FastBranch(1),
        Self::FastBranch(0),
        Self::Ideal(IdealVariant::AtZeroVolts),
        Self::Ideal(IdealVariant::AtHalfRated),
        Self::Ideal(IdealVariant::AtRated),
    ];

    pub fn name(self) -> String {
        match self {
            Self::Full => "full".into(),
            Self::FastBranch(n) => format!("m1-{n}"),
            Self::Ideal(v) => format!("ideal-{v}"),
        }
    }

    pub fn model(self, full: &CellParams) -> CellModel {
        match self {
            Self::Full => CellModel::Nonlinear(full.clone()),
            Self::FastBranch(n) => CellModel::Nonlinear(full.fast_branch_only(n)),
            Self::Ideal(v) => CellModel::Ideal(crate::cell::ideal_from(full, v)),
        }
    }
}

impl From<ReducedVariant> for String {
    fn from(v: ReducedVariant) -> String {
        v.name()
    }
}

/// Slow branches added when the cell file has none: time constants of 100 s
/// and 1000 s, far beyond the test window.
pub fn default_slow_branches() -> Vec<SlowBranch> {
    vec![SlowBranch { r: 1.0, c: 100.0 }, SlowBranch { r: 10.0, c: 100.0 }]
}

/// Leakage added when the cell file has none [Ω].
pub const DEFAULT_LEAK_RESISTANCE: f64 = 1e3;

/// The "full" model of a study: the given cell with five groups, plus default
/// slow branches and leakage when the file specifies none.
pub fn full_model(cell: &CellParams) -> CellParams {
    let mut p = cell.clone();
    p.n_groups = MAX_GROUPS;
    if p.slow_branches.is_empty() {
        p.slow_branches = default_slow_branches();
    }
    if p.leak_resistance.is_none() {
        p.leak_resistance = Some(DEFAULT_LEAK_RESISTANCE);
    }
    p
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MapeRow {
    pub variant: String,
    pub reference: String,
    pub voltage_mape_pct: f64,
    pub energy_mape_pct: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ReduceStudy {
    pub full: CellParams,
    pub initial_voltage: f64,
    pub profile: CurrentProfile,
    pub rows: Vec<MapeRow>,
    #[serde(skip)]
    pub traces: Vec<(ReducedVariant, CellTrace)>,
}

impl ReduceStudy {
    pub fn trace(&self, v: ReducedVariant) -> Option<&CellTrace> {
        self.traces.iter().find(|(k, _)| *k == v).map(|(_, t)| t)
    }

    pub fn row(&self, variant: ReducedVariant, reference: ReducedVariant) -> Option<&MapeRow> {
        let (a, b) = (variant.name(), reference.name());
        self.rows.iter().find(|r| r.variant == a && r.reference == b)
    }
}

/// Comparisons reported by [`reduce_study`]: slow-branch effect, group count,
/// and the ideal capacitors against the one-group model.
pub const COMPARISONS: [(ReducedVariant, ReducedVariant); 7] = [
    (ReducedVariant::Full, ReducedVariant::FastBranch(5)),
    (ReducedVariant::FastBranch(1), ReducedVariant::FastBranch(5)),
    (ReducedVariant::FastBranch(0), ReducedVariant::FastBranch(5)),
    (ReducedVariant::FastBranch(0), ReducedVariant::FastBranch(1)),
    (ReducedVariant::Ideal(IdealVariant::AtZeroVolts), ReducedVariant::FastBranch(1)),
    (ReducedVariant::Ideal(IdealVariant::AtHalfRated), ReducedVariant::FastBranch(1)),
    (ReducedVariant::Ideal(IdealVariant::AtRated), ReducedVariant::FastBranch(1)),
];

/// Runs every reduced variant of `cell` under `profile` and tabulates the
/// voltage and energy errors.
pub fn reduce_study(cell: &CellParams, profile: &CurrentProfile) -> Result<ReduceStudy> {
    let full = full_model(cell);
    let violations = full.validate("cell");
    if !violations.is_empty() {
        return Err(Error::Validation(violations));
    }
    let u0 = profile.initial_voltage.unwrap_or(0.5 * full.u_rated);
    let mut traces = Vec::new();
    for v in ReducedVariant::ALL {
        // The stiffest groups of the full model favour the implicit method.
        traces.push((v, simulate_cell(&v.model(&full), u0, profile, Method::Trapezoidal)?));
    }
    let get = |v: ReducedVariant| &traces.iter().find(|(k, _)| *k == v).unwrap().1;
    let mut rows = Vec::new();
    for (a, b) in COMPARISONS {
        let (ta, tb) = (get(a), get(b));
        rows.push(MapeRow {
            variant: a.name(),
            reference: b.name(),
            voltage_mape_pct: mape(&ta.u_terminal, &tb.u_terminal)?,
            energy_mape_pct: mape(&ta.energy, &tb.energy)?,
        });
    }
    Ok(ReduceStudy {
        full,
        initial_voltage: u0,
        profile: profile.clone(),
        rows,
        traces,
    })
}
