//! Supercapacitor cell models.
//!
//! The nonlinear cell is the fast branch of the detailed RC circuit: a
//! voltage-dependent main capacitance `C(u) = c0 + kv*u` in series with the
//! ESR `rs` and `n_groups` parallel RC groups whose parameters are
//! re-evaluated from the instantaneous main-capacitor voltage. Optional slow
//! RC branches and a leakage resistor sit in parallel behind the ESR.
//!
//! Sign convention: positive cell current charges the cell.
//!
//! Charge and energy use `dQ = C(u) du`, so
//! `Q(u) = c0*u + kv*u^2/2` and `E(u) = c0*u^2/2 + kv*u^3/3`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Checker, Error, Result};

/// Maximum supported number of RC groups in the fast branch.
pub const MAX_GROUPS: usize = 5;

fn default_groups() -> usize {
    1
}

/// Slow recombination branch: a series RC placed in parallel with the fast branch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlowBranch {
    pub r: f64,
    pub c: f64,
}

impl SlowBranch {
    pub fn time_constant(&self) -> f64 {
        self.r * self.c
    }
}

/// Optional linear law `tau(u) = tau0 + k_tau*u` replacing the datasheet
/// approximation `tau(u) = 3*C(u)*(rdc - rs)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TauLaw {
    pub tau0: f64,
    pub k_tau: f64,
}

/// Electrical constants of one cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellParams {
    /// Capacitance at 0 V [F].
    pub c0: f64,
    /// Capacitance slope [F/V].
    pub kv: f64,
    /// High-frequency series resistance [ohm].
    pub rs: f64,
    /// DC resistance [ohm].
    pub rdc: f64,
    #[serde(default = "default_groups")]
    pub n_groups: usize,
    /// Rated cell voltage [V].
    pub u_rated: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub slow_branches: Vec<SlowBranch>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leak_resistance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_law: Option<TauLaw>,
}

impl Default for CellParams {
    /// The 40 % variable-capacitance cell, `C = 600 + 150u`, with the
    /// grid-scale bank resistances.
    fn default() -> Self {
        Self {
            c0: 600.0,
            kv: 150.0,
            rs: 0.25e-3,
            rdc: 0.5e-3,
            n_groups: 1,
            u_rated: 2.7,
            slow_branches: Vec::new(),
            leak_resistance: None,
            tau_law: None,
        }
    }
}

/// Dynamic state of the nonlinear cell.
#[derive(Clone, Debug, PartialEq)]
pub struct CellState {
    pub u_c: f64,
    pub u_groups: Vec<f64>,
    pub u_slow: Vec<f64>,
}

impl CellState {
    /// Rest state at voltage `u`: groups discharged, slow branches equalised.
    pub fn at_rest(params: &CellParams, u: f64) -> Self {
        Self {
            u_c: u,
            u_groups: vec![0.0; params.n_groups],
            u_slow: vec![u; params.slow_branches.len()],
        }
    }

    pub fn len(&self) -> usize {
        1 + self.u_groups.len() + self.u_slow.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len());
        v.push(self.u_c);
        v.extend_from_slice(&self.u_groups);
        v.extend_from_slice(&self.u_slow);
        v
    }

    pub fn from_slice(params: &CellParams, x: &[f64]) -> Self {
        let n = params.n_groups;
        Self {
            u_c: x[0],
            u_groups: x[1..1 + n].to_vec(),
            u_slow: x[1 + n..1 + n + params.slow_branches.len()].to_vec(),
        }
    }

    fn check_shape(&self, params: &CellParams) -> Result<()> {
        if self.u_groups.len() != params.n_groups
            || self.u_slow.len() != params.slow_branches.len()
        {
            return Err(Error::Domain(format!(
                "cell state has {} groups / {} slow branches, parameters declare {} / {}",
                self.u_groups.len(),
                self.u_slow.len(),
                params.n_groups,
                params.slow_branches.len()
            )));
        }
        Ok(())
    }
}

fn check_voltage(u: f64) -> Result<()> {
    if u >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("voltage must be >= 0 V, got {u}")))
    }
}

/// Energy-based state of charge. `above_rated` flags a clamped value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Soc {
    pub fraction: f64,
    pub above_rated: bool,
}

impl CellParams {
    pub fn validate(&self, prefix: &str) -> Vec<String> {
        let mut c = Checker::new(prefix);
        c.positive("c0", self.c0);
        c.non_negative("kv", self.kv);
        c.positive("u_rated", self.u_rated);
        c.non_negative("rs", self.rs);
        c.check(self.rdc >= self.rs && self.rdc.is_finite(), "rdc", || {
            format!("must satisfy rdc >= rs ({} >= {})", self.rdc, self.rs)
        });
        c.check(self.n_groups <= MAX_GROUPS, "n_groups", || {
            format!("must be in 0..={MAX_GROUPS}, got {}", self.n_groups)
        });
        for (k, b) in self.slow_branches.iter().enumerate() {
            c.positive(&format!("slow_branches[{k}].r"), b.r);
            c.positive(&format!("slow_branches[{k}].c"), b.c);
        }
        if let Some(r) = self.leak_resistance {
            c.positive("leak_resistance", r);
        }
        if let Some(law) = self.tau_law {
            c.non_negative("tau_law.tau0", law.tau0);
            c.finite("tau_law.k_tau", law.k_tau);
            let at_rated = law.tau0 + law.k_tau * self.u_rated;
            c.check(at_rated >= 0.0, "tau_law", || {
                format!("tau(u_rated) must be >= 0, got {at_rated}")
            });
        }
        c.into_violations()
    }

    /// Same cell truncated to the fast branch with `n` RC groups.
    pub fn fast_branch_only(&self, n: usize) -> Self {
        Self {
            n_groups: n,
            slow_branches: Vec::new(),
            leak_resistance: None,
            ..self.clone()
        }
    }

    pub fn state_len(&self) -> usize {
        1 + self.n_groups + self.slow_branches.len()
    }

    /// `C(u) = c0 + kv*u`.
    pub fn capacitance(&self, u: f64) -> Result<f64> {
        check_voltage(u)?;
        Ok(self.capacitance_unchecked(u))
    }

    #[inline]
    fn capacitance_unchecked(&self, u: f64) -> f64 {
        self.c0 + self.kv * u.max(0.0)
    }

    /// Group time-scale parameter `tau(u)`.
    pub fn tau_of_voltage(&self, u: f64) -> Result<f64> {
        check_voltage(u)?;
        Ok(self.tau_unchecked(u))
    }

    #[inline]
    fn tau_unchecked(&self, u: f64) -> f64 {
        match self.tau_law {
            Some(law) => (law.tau0 + law.k_tau * u.max(0.0)).max(0.0),
            None => 3.0 * self.capacitance_unchecked(u) * (self.rdc - self.rs),
        }
    }

    /// `(R_k, C_k)` of RC group `k` (1-based) at voltage `u`.
    pub fn group_params(&self, u: f64, k: usize) -> Result<(f64, f64)> {
        check_voltage(u)?;
        if k == 0 || k > self.n_groups {
            return Err(Error::Index {
                what: "RC group",
                index: k,
                max: self.n_groups,
            });
        }
        Ok(self.group_params_unchecked(u, k))
    }

    #[inline]
    fn group_params_unchecked(&self, u: f64, k: usize) -> (f64, f64) {
        let c_sc = self.capacitance_unchecked(u);
        let kk = (k * k) as f64;
        let r = 2.0 * self.tau_unchecked(u) / (kk * PI * PI * c_sc);
        (r, 0.5 * c_sc)
    }

    /// True when the groups collapse to short circuits (`tau = 0`).
    fn groups_shorted(&self, u: f64) -> bool {
        self.tau_unchecked(u) <= 0.0
    }

    /// Smallest group time constant `R_k*C_k` over `[0, u_max]`, ignoring shorted groups.
    pub fn fastest_group_time_constant(&self, u_max: f64) -> Option<f64> {
        if self.n_groups == 0 {
            return None;
        }
        let k = self.n_groups;
        [0.0, u_max]
            .iter()
            .filter(|&&u| !self.groups_shorted(u))
            .map(|&u| {
                let (r, c) = self.group_params_unchecked(u, k);
                r * c
            })
            .reduce(f64::min)
    }

    /// Voltage of the internal node behind the ESR.
    #[inline]
    fn node_voltage(&self, x: &[f64]) -> f64 {
        let u_c = x[0];
        if self.groups_shorted(u_c) {
            u_c
        } else {
            u_c + x[1..1 + self.n_groups].iter().sum::<f64>()
        }
    }

    /// Current entering the fast branch after the slow and leak branches take their share.
    #[inline]
    fn fast_branch_current(&self, x: &[f64], i: f64) -> f64 {
        if self.slow_branches.is_empty() && self.leak_resistance.is_none() {
            return i;
        }
        let v = self.node_voltage(x);
        let slow = &x[1 + self.n_groups..];
        let diverted: f64 = self
            .slow_branches
            .iter()
            .zip(slow)
            .map(|(b, &u)| (v - u) / b.r)
            .sum();
        let leak = self.leak_resistance.map_or(0.0, |r| v / r);
        i - diverted - leak
    }

    /// Slice form of [`cell_derivatives`], used by the integrators.
    pub(crate) fn derivatives_into(&self, x: &[f64], i: f64, dx: &mut [f64]) {
        let u_c = x[0];
        let i1 = self.fast_branch_current(x, i);
        dx[0] = i1 / self.capacitance_unchecked(u_c);
        let n = self.n_groups;
        let shorted = self.groups_shorted(u_c);
        for k in 1..=n {
            dx[k] = if shorted {
                0.0
            } else {
                let (r, c) = self.group_params_unchecked(u_c, k);
                -x[k] / (r * c) + i1 / c
            };
        }
        if !self.slow_branches.is_empty() {
            let v = self.node_voltage(x);
            for (j, b) in self.slow_branches.iter().enumerate() {
                let idx = 1 + n + j;
                dx[idx] = (v - x[idx]) / b.time_constant();
            }
        }
    }

    pub(crate) fn terminal_voltage_slice(&self, x: &[f64], i: f64) -> f64 {
        i * self.rs + self.node_voltage(x)
    }

    /// `Q(u) = c0*u + kv*u^2/2`.
    pub fn stored_charge(&self, u: f64) -> Result<f64> {
        check_voltage(u)?;
        Ok(self.c0 * u + 0.5 * self.kv * u * u)
    }

    /// `E(u) = c0*u^2/2 + kv*u^3/3`.
    pub fn stored_energy(&self, u: f64) -> Result<f64> {
        check_voltage(u)?;
        Ok(self.energy_unchecked(u))
    }

    #[inline]
    pub(crate) fn energy_unchecked(&self, u: f64) -> f64 {
        let u = u.max(0.0);
        0.5 * self.c0 * u * u + self.kv * u * u * u / 3.0
    }

    /// Energy fraction relative to the rated-voltage energy.
    pub fn soc(&self, u: f64) -> Result<Soc> {
        check_voltage(u)?;
        Ok(if u > self.u_rated {
            Soc {
                fraction: 1.0,
                above_rated: true,
            }
        } else {
            Soc {
                fraction: self.energy_unchecked(u) / self.energy_unchecked(self.u_rated),
                above_rated: false,
            }
        })
    }

    /// Inverse of [`CellParams::soc`] on `[0, u_rated]`.
    pub fn voltage_at_soc(&self, soc: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&soc) {
            return Err(Error::Domain(format!("soc must be in [0, 1], got {soc}")));
        }
        // E(u) is strictly increasing, so bisection is exact to rounding.
        let target = soc * self.energy_unchecked(self.u_rated);
        let (mut lo, mut hi) = (0.0, self.u_rated);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.energy_unchecked(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// `C(u)` as a free function.
pub fn capacitance(params: &CellParams, u: f64) -> Result<f64> {
    params.capacitance(u)
}

pub fn tau_of_voltage(params: &CellParams, u: f64) -> Result<f64> {
    params.tau_of_voltage(u)
}

pub fn group_params(params: &CellParams, u: f64, k: usize) -> Result<(f64, f64)> {
    params.group_params(u, k)
}

/// Time derivative of the cell state under current `i`.
pub fn cell_derivatives(params: &CellParams, state: &CellState, i: f64) -> Result<CellState> {
    state.check_shape(params)?;
    let x = state.to_vec();
    let mut dx = vec![0.0; x.len()];
    params.derivatives_into(&x, i, &mut dx);
    Ok(CellState::from_slice(params, &dx))
}

/// `u_sc = i*rs + u_c + sum(u_Ck)`.
pub fn terminal_voltage(params: &CellParams, state: &CellState, i: f64) -> Result<f64> {
    state.check_shape(params)?;
    Ok(params.terminal_voltage_slice(&state.to_vec(), i))
}

pub fn stored_energy(params: &CellParams, u: f64) -> Result<f64> {
    params.stored_energy(u)
}

pub fn stored_charge(params: &CellParams, u: f64) -> Result<f64> {
    params.stored_charge(u)
}

pub fn soc(params: &CellParams, u: f64) -> Result<Soc> {
    params.soc(u)
}

/// Voltage at which the constant capacitance of an ideal model is taken.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IdealVariant {
    AtZeroVolts,
    AtHalfRated,
    AtRated,
}

impl IdealVariant {
    pub const ALL: [IdealVariant; 3] = [Self::AtZeroVolts, Self::AtHalfRated, Self::AtRated];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::AtZeroVolts => "at-zero-volts",
            Self::AtHalfRated => "at-half-rated",
            Self::AtRated => "at-rated",
        }
    }
}

impl fmt::Display for IdealVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for IdealVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::Parse(format!("unknown ideal variant `{s}`")))
    }
}

/// Constant-capacitance cell without ESR or RC groups.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdealCellParams {
    pub c: f64,
    pub u_rated: f64,
    pub variant: IdealVariant,
}

impl IdealCellParams {
    pub fn stored_energy(&self, u: f64) -> f64 {
        0.5 * self.c * u * u
    }

    pub fn soc(&self, u: f64) -> f64 {
        (u / self.u_rated).powi(2).min(1.0)
    }
}

pub fn ideal_from(params: &CellParams, variant: IdealVariant) -> IdealCellParams {
    let u = match variant {
        IdealVariant::AtZeroVolts => 0.0,
        IdealVariant::AtHalfRated => 0.5 * params.u_rated,
        IdealVariant::AtRated => params.u_rated,
    };
    IdealCellParams {
        c: params.capacitance_unchecked(u),
        u_rated: params.u_rated,
        variant,
    }
}

/// Either cell representation behind one slice-based interface.
#[derive(Clone, Debug, PartialEq)]
pub enum CellModel {
    Nonlinear(CellParams),
    Ideal(IdealCellParams),
}

impl CellModel {
    pub fn state_len(&self) -> usize {
        match self {
            Self::Nonlinear(p) => p.state_len(),
            Self::Ideal(_) => 1,
        }
    }

    pub fn rest_state(&self, u: f64) -> Vec<f64> {
        match self {
            Self::Nonlinear(p) => CellState::at_rest(p, u).to_vec(),
            Self::Ideal(_) => vec![u],
        }
    }

    pub fn u_rated(&self) -> f64 {
        match self {
            Self::Nonlinear(p) => p.u_rated,
            Self::Ideal(p) => p.u_rated,
        }
    }

    pub fn derivatives(&self, x: &[f64], i: f64, dx: &mut [f64]) {
        match self {
            Self::Nonlinear(p) => p.derivatives_into(x, i, dx),
            Self::Ideal(p) => dx[0] = i / p.c,
        }
    }

    pub fn terminal_voltage(&self, x: &[f64], i: f64) -> f64 {
        match self {
            Self::Nonlinear(p) => p.terminal_voltage_slice(x, i),
            Self::Ideal(_) => x[0],
        }
    }

    /// Energy held by the main capacitance.
    pub fn stored_energy(&self, x: &[f64]) -> f64 {
        match self {
            Self::Nonlinear(p) => p.energy_unchecked(x[0]),
            Self::Ideal(p) => p.stored_energy(x[0]),
        }
    }

    pub fn soc(&self, x: &[f64]) -> f64 {
        match self {
            Self::Nonlinear(p) => {
                (p.energy_unchecked(x[0]) / p.energy_unchecked(p.u_rated)).min(1.0)
            }
            Self::Ideal(p) => p.soc(x[0]),
        }
    }

    /// Instantaneous resistive loss [W] at current `i`.
    pub fn resistive_loss(&self, x: &[f64], i: f64) -> f64 {
        match self {
            Self::Ideal(_) => 0.0,
            Self::Nonlinear(p) => {
                let mut loss = i * i * p.rs;
                let u_c = x[0];
                if !p.groups_shorted(u_c) {
                    for k in 1..=p.n_groups {
                        let (r, _) = p.group_params_unchecked(u_c, k);
                        loss += x[k] * x[k] / r;
                    }
                }
                let v = p.node_voltage(x);
                for (b, &u) in p.slow_branches.iter().zip(&x[1 + p.n_groups..]) {
                    loss += (v - u).powi(2) / b.r;
                }
                if let Some(r) = p.leak_resistance {
                    loss += v * v / r;
                }
                loss
            }
        }
    }
}
