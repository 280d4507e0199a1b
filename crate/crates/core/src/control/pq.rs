//! Inverter PQ control: lagged power measurements feeding d/q PI loops.

use serde::{Deserialize, Serialize};

use crate::error::Checker;
use crate::ode::rk4_substepped;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QMode {
    /// The q loop regulates reactive power.
    #[default]
    ReactivePower,
    /// The q loop regulates the bus voltage; `q_ref` is the voltage set-point
    /// and `q_meas` the lagged voltage.
    TerminalVoltage,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PqParams {
    pub kp_d: f64,
    pub ki_d: f64,
    pub kp_q: f64,
    pub ki_q: f64,
    /// Measurement/control lag [s].
    pub tau_c: f64,
    /// Converter current magnitude limit [p.u.].
    pub i_max: f64,
    pub q_mode: QMode,
}

impl Default for PqParams {
    fn default() -> Self {
        Self {
            kp_d: 1.0,
            ki_d: 100.0,
            kp_q: 1.0,
            ki_q: 100.0,
            tau_c: 0.05,
            i_max: 1.1,
            q_mode: QMode::ReactivePower,
        }
    }
}

impl PqParams {
    pub fn validate(&self, prefix: &str) -> Vec<String> {
        let mut c = Checker::new(prefix);
        c.non_negative("kp_d", self.kp_d);
        c.non_negative("ki_d", self.ki_d);
        c.non_negative("kp_q", self.kp_q);
        c.non_negative("ki_q", self.ki_q);
        c.positive("tau_c", self.tau_c);
        c.positive("i_max", self.i_max);
        c.into_violations()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct PqState {
    pub integ_d: f64,
    pub integ_q: f64,
    pub p_meas: f64,
    pub q_meas: f64,
}

impl PqState {
    pub const LEN: usize = 4;

    pub fn to_array(self) -> [f64; 4] {
        [self.integ_d, self.integ_q, self.p_meas, self.q_meas]
    }

    pub fn from_slice(x: &[f64]) -> Self {
        Self {
            integ_d: x[0],
            integ_q: x[1],
            p_meas: x[2],
            q_meas: x[3],
        }
    }
}

/// Inputs of one PQ evaluation.
///
/// `clip_d`/`clip_q` are the differences applied − requested downstream of
/// the PI outputs (LVRT priority, current limit, gate, DC limit); a non-zero
/// clip freezes the integrator while the error pushes further into the limit.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PqInputs {
    pub p_ref: f64,
    pub q_ref: f64,
    pub p_act: f64,
    /// Reactive power, or bus voltage in terminal-voltage mode.
    pub q_act: f64,
    pub clip_d: f64,
    pub clip_q: f64,
}

impl PqParams {
    /// `(i_d0, i_q0)` for the given state and references.
    pub fn output(&self, s: &PqState, p_ref: f64, q_ref: f64) -> (f64, f64) {
        (
            self.kp_d * (p_ref - s.p_meas) + s.integ_d,
            self.kp_q * (q_ref - s.q_meas) + s.integ_q,
        )
    }

    pub(crate) fn derivatives_into(&self, x: &[f64], u: &PqInputs, dx: &mut [f64]) {
        let s = PqState::from_slice(x);
        let e_d = u.p_ref - s.p_meas;
        let e_q = u.q_ref - s.q_meas;
        dx[0] = self.integrator_rate(s.integ_d, self.ki_d * e_d, u.clip_d);
        dx[1] = self.integrator_rate(s.integ_q, self.ki_q * e_q, u.clip_q);
        dx[2] = (u.p_act - s.p_meas) / self.tau_c;
        dx[3] = (u.q_act - s.q_meas) / self.tau_c;
    }

    fn integrator_rate(&self, integ: f64, rate: f64, clip: f64) -> f64 {
        let pushing_into_clip = (clip < 0.0 && rate > 0.0) || (clip > 0.0 && rate < 0.0);
        let at_bound = (integ >= self.i_max && rate > 0.0) || (integ <= -self.i_max && rate < 0.0);
        if pushing_into_clip || at_bound {
            0.0
        } else {
            rate
        }
    }

    /// Keeps both integrators within the converter current limit.
    pub(crate) fn clamp_integrators(&self, x: &mut [f64]) {
        x[0] = x[0].clamp(-self.i_max, self.i_max);
        x[1] = x[1].clamp(-self.i_max, self.i_max);
    }
}

/// Advances the PQ controller by `dt` with the inputs held, then returns the
/// updated `(i_d0, i_q0)`.
pub fn pq_step(p: &PqParams, s: PqState, inputs: PqInputs, dt: f64) -> (f64, f64, PqState) {
    assert!(dt > 0.0, "dt must be positive");
    let mut x = s.to_array();
    let f = |_t: f64, x: &[f64], dx: &mut [f64]| p.derivatives_into(x, &inputs, dx);
    rk4_substepped(&f, 0.0, &mut x, dt, 0.1 * p.tau_c);
    p.clamp_integrators(&mut x);
    let next = PqState::from_slice(&x);
    let (i_d0, i_q0) = p.output(&next, inputs.p_ref, inputs.q_ref);
    (i_d0, i_q0, next)
}
