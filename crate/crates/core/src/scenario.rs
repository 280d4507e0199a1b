//! Declarative experiment description, stored as TOML.
//!
//! ```toml
//! schema_version = 1
//! model = "nonlinear"            # or "nonlinear:5", "ideal:at-rated", ...
//!
//! [bank]
//! n_s = 370
//! n_p = 400
//! p_rated = 100e6
//! initial_voltage = 2.7          # or initial_soc = 0.8
//! [bank.cell]
//! c0 = 600.0
//! kv = 150.0
//! rs = 0.25e-3
//! rdc = 0.5e-3
//! u_rated = 2.7
//!
//! [control.freq]                 # omit to disable frequency support
//! k_vir = 100.0
//! k_qd = 0.0
//!
//! [[grid.disturbances]]
//! kind = "loss-of-generation"
//! t_start = 1.0
//! magnitude = 0.2375             # p.u. on grid.sfr.s_base
//!
//! [sim]
//! dt = 1e-3
//! t_end = 30.0
//! ```
//!
//! Unknown keys are rejected everywhere.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bank::BankConfig;
use crate::cell::{ideal_from, CellModel, CellParams, IdealVariant};
use crate::control::{FreqCtrlParams, GateParams, LvrtParams, PqParams, QMode};
use crate::error::{Checker, Error, Result};
use crate::grid::{Disturbance, SfrParams};
use crate::ode::Method;

pub const SCHEMA_VERSION: u32 = 1;

/// Largest accepted integration step [s].
pub const MAX_DT: f64 = 0.01;

/// Which cell representation a run uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ModelVariant {
    /// Nonlinear cell; `groups` overrides `bank.cell.n_groups`.
    Nonlinear { groups: Option<usize> },
    Ideal(IdealVariant),
}

impl ModelVariant {
    pub const NONLINEAR: Self = Self::Nonlinear { groups: None };

    pub fn is_ideal(&self) -> bool {
        matches!(self, Self::Ideal(_))
    }

    pub fn cell_model(&self, cell: &CellParams) -> CellModel {
        match *self {
            Self::Nonlinear { groups } => {
                let mut p = cell.clone();
                if let Some(n) = groups {
                    p.n_groups = n;
                }
                CellModel::Nonlinear(p)
            }
            Self::Ideal(v) => CellModel::Ideal(ideal_from(cell, v)),
        }
    }
}

impl fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Nonlinear { groups: None } => f.write_str("nonlinear"),
            Self::Nonlinear { groups: Some(n) } => write!(f, "nonlinear:{n}"),
            Self::Ideal(v) => write!(f, "ideal:{v}"),
        }
    }
}

impl FromStr for ModelVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "nonlinear" {
            return Ok(Self::NONLINEAR);
        }
        if let Some(n) = s.strip_prefix("nonlinear:") {
            let groups = n
                .parse()
                .map_err(|_| Error::Parse(format!("bad group count in model `{s}`")))?;
            return Ok(Self::Nonlinear { groups: Some(groups) });
        }
        if let Some(v) = s.strip_prefix("ideal:") {
            return Ok(Self::Ideal(v.parse()?));
        }
        Err(Error::Parse(format!(
            "unknown model `{s}` (expected nonlinear, nonlinear:<n> or ideal:<variant>)"
        )))
    }
}

impl TryFrom<String> for ModelVariant {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ModelVariant> for String {
    fn from(m: ModelVariant) -> String {
        m.to_string()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BankSection {
    pub n_s: u32,
    pub n_p: u32,
    pub p_rated: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_voltage: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_soc: Option<f64>,
    pub cell: CellParams,
}

impl BankSection {
    pub fn config(&self) -> BankConfig {
        BankConfig {
            n_s: self.n_s,
            n_p: self.n_p,
            p_rated: self.p_rated,
            cell: self.cell.clone(),
        }
    }

    /// Initial cell voltage; an initial SoC maps through the nonlinear cell so
    /// every model variant starts from the same voltage.
    pub fn initial_cell_voltage(&self) -> Result<f64> {
        match (self.initial_voltage, self.initial_soc) {
            (Some(u), None) => Ok(u),
            (None, Some(s)) => self.cell.voltage_at_soc(s),
            _ => Err(Error::Validation(vec![
                "bank: exactly one of initial_voltage / initial_soc is required".into(),
            ])),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSection {
    /// Base active-power set-point [p.u. of bank rating].
    #[serde(default)]
    pub p_setpoint: f64,
    /// Reactive-power set-point, or voltage set-point in terminal-voltage mode.
    #[serde(default)]
    pub q_setpoint: f64,
    #[serde(default)]
    pub gate: GateParams,
    #[serde(default)]
    pub pq: PqParams,
    #[serde(default)]
    pub lvrt: LvrtParams,
    /// Frequency support; absent means the bank does not respond to frequency.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub freq: Option<FreqCtrlParams>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default)]
    pub sfr: SfrParams,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub disturbances: Vec<Disturbance>,
}

fn default_decimation() -> usize {
    1
}

fn default_window() -> f64 {
    0.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub dt: f64,
    pub t_end: f64,
    #[serde(default)]
    pub method: Method,
    #[serde(default = "default_decimation")]
    pub record_decimation: usize,
    /// Average-RoCoF window [s].
    #[serde(default = "default_window")]
    pub rocof_window: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_end: 30.0,
            method: Method::Rk4,
            record_decimation: 10,
            rocof_window: 0.5,
        }
    }
}

impl SimConfig {
    pub fn validate(&self, prefix: &str) -> Vec<String> {
        let mut c = Checker::new(prefix);
        c.check(self.dt > 0.0 && self.dt <= MAX_DT, "dt", || {
            format!("must be in (0, {MAX_DT}] s (1-10 ms electromechanical step), got {}", self.dt)
        });
        c.positive("t_end", self.t_end);
        c.check(self.record_decimation >= 1, "record_decimation", || "must be >= 1".into());
        c.positive("rocof_window", self.rocof_window);
        c.into_violations()
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub model: ModelVariant,
    pub bank: BankSection,
    #[serde(default)]
    pub control: ControlSection,
    #[serde(default)]
    pub grid: GridSection,
    pub sim: SimConfig,
}

impl Scenario {
    /// The reference 100 MW bank (`C = 600 + 150u`) at full charge with no
    /// frequency support and no disturbance.
    pub fn reference() -> Self {
        let bank = BankConfig::default();
        Self {
            schema_version: SCHEMA_VERSION,
            name: None,
            model: ModelVariant::NONLINEAR,
            bank: BankSection {
                n_s: bank.n_s,
                n_p: bank.n_p,
                p_rated: bank.p_rated,
                initial_voltage: Some(2.7),
                initial_soc: None,
                cell: bank.cell,
            },
            control: ControlSection::default(),
            grid: GridSection::default(),
            sim: SimConfig::default(),
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Reads and validates a scenario file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        let s = Self::from_toml_str(&text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn cell_model(&self) -> CellModel {
        self.model.cell_model(&self.bank.cell)
    }

    /// Start of the first disturbance, if any.
    pub fn onset(&self) -> Option<f64> {
        self.grid
            .disturbances
            .iter()
            .map(|d| d.t_start)
            .reduce(f64::min)
    }

    /// Checks every invariant and reports all violations at once.
    pub fn validate(&self) -> Result<()> {
        let mut c = Checker::new("");
        c.check(self.schema_version == SCHEMA_VERSION, "schema_version", || {
            format!("unsupported version {} (expected {SCHEMA_VERSION})", self.schema_version)
        });
        if let ModelVariant::Nonlinear { groups: Some(n) } = self.model {
            c.check(n <= crate::cell::MAX_GROUPS, "model", || {
                format!("group count must be <= {}, got {n}", crate::cell::MAX_GROUPS)
            });
        }
        c.extend(self.bank.config().validate("bank"));
        let gate = &self.control.gate;
        match (self.bank.initial_voltage, self.bank.initial_soc) {
            (Some(u), None) => c.check((0.0..=gate.u_ch_max).contains(&u), "bank.initial_voltage", || {
                format!("must be in [0, u_ch_max = {}], got {u}", gate.u_ch_max)
            }),
            (None, Some(s)) => c.check((0.0..=1.0).contains(&s), "bank.initial_soc", || {
                format!("must be in [0, 1], got {s}")
            }),
            _ => c.check(false, "bank", || {
                "exactly one of initial_voltage / initial_soc is required".into()
            }),
        }
        c.extend(gate.validate("control.gate"));
        c.extend(self.control.pq.validate("control.pq"));
        c.extend(self.control.lvrt.validate("control.lvrt"));
        c.finite("control.p_setpoint", self.control.p_setpoint);
        c.finite("control.q_setpoint", self.control.q_setpoint);
        if self.control.pq.q_mode == QMode::TerminalVoltage {
            c.positive("control.q_setpoint", self.control.q_setpoint);
        }
        if let Some(f) = &self.control.freq {
            c.extend(f.validate("control.freq"));
        }
        c.extend(self.grid.sfr.validate("grid.sfr"));
        for (k, d) in self.grid.disturbances.iter().enumerate() {
            c.extend(d.validate(&format!("grid.disturbances[{k}]")));
        }
        c.extend(self.sim.validate("sim"));
        self.check_explicit_stability(&mut c);
        c.finish()
    }

    /// Explicit methods need every time constant to be resolved by the step.
    fn check_explicit_stability(&self, c: &mut Checker) {
        let dt = self.sim.dt;
        if !self.sim.method.is_explicit() || !(dt > 0.0) {
            return;
        }
        let limit = 0.5 * dt;
        let mut taus = vec![("control.pq.tau_c", self.control.pq.tau_c)];
        if let Some(f) = &self.control.freq {
            taus.push(("control.freq.tau_pll", f.tau_pll));
            taus.push(("control.freq.tau_w_i", f.tau_w_i));
        }
        taus.push(("grid.sfr.tau_g", self.grid.sfr.tau_g));
        if let CellModel::Nonlinear(p) = self.cell_model() {
            if let Some(tau) = p.fastest_group_time_constant(self.control.gate.u_ch_max) {
                taus.push(("bank.cell", tau));
            }
        }
        for (field, tau) in taus {
            c.check(!(tau > 0.0) || tau >= limit, field, || {
                format!(
                    "time constant {tau} s is below dt/2 = {limit} s; reduce sim.dt or use method = \"trapezoidal\""
                )
            });
        }
    }
}
