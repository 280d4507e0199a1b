//! Reduced grid: one aggregate system-frequency-response bus with a reheat
//! governor, plus exogenous bus-voltage profiles for ride-through events.
//!
//! Frequency and power are deviations in p.u. on `s_base` and `f_nom`.

pub mod metrics;

use serde::{Deserialize, Serialize};

use crate::error::{Checker, Error, Result};

pub use metrics::{metrics, Metrics};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SfrParams {
    /// Nominal frequency [Hz].
    pub f_nom: f64,
    /// Aggregate inertia constant [s].
    pub h: f64,
    /// Load damping [p.u./p.u.].
    pub d: f64,
    /// Governor droop [p.u.].
    pub r: f64,
    pub tau_g: f64,
    pub tau_r: f64,
    /// Fraction of power from the high-pressure stage.
    pub k_r: f64,
    /// System base power [VA].
    pub s_base: f64,
    /// Load near the disturbed bus that follows its voltage [p.u.]; zero
    /// decouples voltage dips from frequency.
    pub load: f64,
    /// Load exponent: `P = load * v^exponent`.
    pub load_voltage_exponent: f64,
}

impl Default for SfrParams {
    fn default() -> Self {
        Self {
            f_nom: 60.0,
            h: 4.0,
            d: 1.0,
            r: 0.05,
            tau_g: 0.2,
            tau_r: 7.0,
            k_r: 0.3,
            s_base: 400e6,
            load: 0.0,
            load_voltage_exponent: 2.0,
        }
    }
}

impl SfrParams {
    pub fn validate(&self, prefix: &str) -> Vec<String> {
        let mut c = Checker::new(prefix);
        c.positive("f_nom", self.f_nom);
        c.positive("h", self.h);
        c.non_negative("d", self.d);
        c.positive("r", self.r);
        c.positive("tau_g", self.tau_g);
        c.positive("tau_r", self.tau_r);
        c.check((0.0..=1.0).contains(&self.k_r), "k_r", || {
            format!("must be in [0, 1], got {}", self.k_r)
        });
        c.positive("s_base", self.s_base);
        c.non_negative("load", self.load);
        c.non_negative("load_voltage_exponent", self.load_voltage_exponent);
        c.into_violations()
    }

    pub fn mechanical_power(&self, s: &GridState) -> f64 {
        self.k_r * s.p_gov + (1.0 - self.k_r) * s.p_reheat
    }

    /// Load change caused by a bus-voltage deviation [p.u.]; negative in a dip.
    pub fn load_change(&self, v_ac: f64) -> f64 {
        self.load * (v_ac.max(0.0).powf(self.load_voltage_exponent) - 1.0)
    }

    /// Frequency deviation the governor settles to for a sustained deficit.
    pub fn steady_state_deviation(&self, p_deficit: f64) -> f64 {
        -p_deficit / (self.d + 1.0 / self.r)
    }

    pub fn mw_to_pu(&self, mw: f64) -> f64 {
        mw * 1e6 / self.s_base
    }

    pub(crate) fn derivatives_into(&self, x: &[f64], p_sc: f64, p_dist: f64, dx: &mut [f64]) {
        let s = GridState::from_slice(x, 1.0);
        let p_m = self.mechanical_power(&s);
        dx[0] = (p_m + p_sc - p_dist - self.d * s.delta_f) / (2.0 * self.h);
        dx[1] = (-s.delta_f / self.r - s.p_gov) / self.tau_g;
        dx[2] = (s.p_gov - s.p_reheat) / self.tau_r;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GridState {
    /// Frequency deviation [p.u.].
    pub delta_f: f64,
    /// Governor valve output [p.u.].
    pub p_gov: f64,
    /// Reheater output [p.u.].
    pub p_reheat: f64,
    /// Bus voltage magnitude [p.u.].
    pub v_ac: f64,
}

impl Default for GridState {
    fn default() -> Self {
        Self {
            delta_f: 0.0,
            p_gov: 0.0,
            p_reheat: 0.0,
            v_ac: 1.0,
        }
    }
}

impl GridState {
    /// Number of integrated states (the bus voltage is exogenous).
    pub const LEN: usize = 3;

    pub fn to_array(self) -> [f64; 3] {
        [self.delta_f, self.p_gov, self.p_reheat]
    }

    pub fn from_slice(x: &[f64], v_ac: f64) -> Self {
        Self {
            delta_f: x[0],
            p_gov: x[1],
            p_reheat: x[2],
            v_ac,
        }
    }
}

/// Time derivative of the grid state; `p_sc` is the storage injection and
/// `p_dist` the power deficit, both in p.u. on `s_base`.
pub fn sfr_derivatives(p: &SfrParams, s: &GridState, p_sc: f64, p_dist: f64) -> GridState {
    let mut dx = [0.0; 3];
    p.derivatives_into(&s.to_array(), p_sc, p_dist, &mut dx);
    GridState {
        delta_f: dx[0],
        p_gov: dx[1],
        p_reheat: dx[2],
        v_ac: 0.0,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DisturbanceKind {
    LossOfGeneration,
    LoadStep,
    VoltageDip,
}

/// Event applied to the grid. For power kinds `magnitude` is the deficit in
/// p.u. on `s_base`; for a voltage dip it is the dip depth and `duration`
/// the fault duration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Disturbance {
    pub kind: DisturbanceKind,
    pub t_start: f64,
    pub magnitude: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration: Option<f64>,
}

/// Slack for comparing simulation times against event times.
const TIME_EPS: f64 = 1e-9;

impl Disturbance {
    pub fn loss_of_generation(t_start: f64, magnitude: f64) -> Self {
        Self {
            kind: DisturbanceKind::LossOfGeneration,
            t_start,
            magnitude,
            duration: None,
        }
    }

    pub fn voltage_dip(t_start: f64, depth: f64, duration: f64) -> Self {
        Self {
            kind: DisturbanceKind::VoltageDip,
            t_start,
            magnitude: depth,
            duration: Some(duration),
        }
    }

    pub fn is_power(&self) -> bool {
        !matches!(self.kind, DisturbanceKind::VoltageDip)
    }

    pub fn validate(&self, prefix: &str) -> Vec<String> {
        let mut c = Checker::new(prefix);
        c.non_negative("t_start", self.t_start);
        match self.kind {
            DisturbanceKind::VoltageDip => {
                c.check(self.magnitude > 0.0 && self.magnitude < 1.0, "magnitude", || {
                    format!("dip depth must be in (0, 1), got {}", self.magnitude)
                });
                match self.duration {
                    Some(d) => c.positive("duration", d),
                    None => c.check(false, "duration", || "required for a voltage dip".into()),
                }
            }
            _ => {
                c.finite("magnitude", self.magnitude);
                c.check(self.duration.is_none(), "duration", || {
                    "only valid for a voltage dip".into()
                });
            }
        }
        c.into_violations()
    }

    /// Power deficit contributed at time `t` [p.u.].
    pub fn power_deficit(&self, t: f64) -> f64 {
        if self.is_power() && t + TIME_EPS >= self.t_start {
            self.magnitude
        } else {
            0.0
        }
    }
}

/// Rectangular dip: `1 - depth` inside `[t_start, t_start + duration)`.
pub fn voltage_profile(d: &Disturbance, t: f64) -> Result<f64> {
    if d.kind != DisturbanceKind::VoltageDip {
        return Err(Error::Domain(format!("{:?} has no voltage profile", d.kind)));
    }
    let duration = d
        .duration
        .ok_or_else(|| Error::Domain("voltage dip without duration".into()))?;
    let inside = t + TIME_EPS >= d.t_start && t + TIME_EPS < d.t_start + duration;
    Ok(if inside { 1.0 - d.magnitude } else { 1.0 })
}

/// Bus voltage from all dips active at `t`; overlapping dips take the deepest.
pub fn bus_voltage(disturbances: &[Disturbance], t: f64) -> f64 {
    disturbances
        .iter()
        .filter_map(|d| voltage_profile(d, t).ok())
        .fold(1.0, f64::min)
}

pub fn power_deficit(disturbances: &[Disturbance], t: f64) -> f64 {
    disturbances.iter().map(|d| d.power_deficit(t)).sum()
}
