//! Grid frequency control: virtual inertial response (VIR) and quasi-droop.
//!
//! Both loops act on the PLL-lagged frequency deviation `df`:
//!
//! * VIR: `k_vir * s / (tau_w_i*s + 1)`, a smoothed derivative;
//! * quasi-droop: `k_qd * tau_w_d*s / (tau_w_d*s + 1)`, a droop whose
//!   contribution washes out.
//!
//! The requested power change is `-(vir + quasi_droop)` in p.u. of the bank
//! rating, saturated to ±1. Positive output means injection into the grid.

use serde::{Deserialize, Serialize};

use crate::error::Checker;
use crate::ode::rk4_substepped;

/// Required ratio between the quasi-droop and VIR washout time constants.
pub const WASHOUT_RATIO: f64 = 10.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FreqCtrlParams {
    /// Inertial gain [p.u.*s]; zero disables the loop.
    pub k_vir: f64,
    pub tau_w_i: f64,
    /// Quasi-droop gain [p.u.]; zero disables the loop.
    pub k_qd: f64,
    pub tau_w_d: f64,
    /// PLL frequency-estimate lag [s].
    pub tau_pll: f64,
    pub deadband: f64,
}

impl Default for FreqCtrlParams {
    fn default() -> Self {
        Self {
            k_vir: 100.0,
            tau_w_i: 1.0,
            k_qd: 150.0,
            tau_w_d: 30.0,
            tau_pll: 0.02,
            deadband: 0.0,
        }
    }
}

impl FreqCtrlParams {
    pub fn vir_only(k_vir: f64) -> Self {
        Self {
            k_vir,
            k_qd: 0.0,
            ..Self::default()
        }
    }

    pub fn quasi_droop_only(k_qd: f64) -> Self {
        Self {
            k_vir: 0.0,
            k_qd,
            ..Self::default()
        }
    }

    pub fn validate(&self, prefix: &str) -> Vec<String> {
        let mut c = Checker::new(prefix);
        c.non_negative("k_vir", self.k_vir);
        c.non_negative("k_qd", self.k_qd);
        c.positive("tau_w_i", self.tau_w_i);
        c.positive("tau_w_d", self.tau_w_d);
        c.positive("tau_pll", self.tau_pll);
        c.non_negative("deadband", self.deadband);
        if self.k_vir > 0.0 && self.k_qd > 0.0 {
            c.check(self.tau_w_d >= WASHOUT_RATIO * self.tau_w_i, "tau_w_d", || {
                format!(
                    "must be >= {WASHOUT_RATIO} * tau_w_i when both loops are active, got {} vs {}",
                    self.tau_w_d, self.tau_w_i
                )
            });
        }
        c.into_violations()
    }

    fn apply_deadband(&self, df: f64) -> f64 {
        if df.abs() <= self.deadband {
            0.0
        } else {
            df - self.deadband.copysign(df)
        }
    }

    /// Frequency deviation seen by the loops.
    fn deviation(&self, s: &FreqCtrlState) -> f64 {
        self.apply_deadband(s.f_meas - 1.0)
    }

    /// Loop outputs `(vir, quasi_droop)` before sign inversion and saturation.
    pub fn branch_outputs(&self, s: &FreqCtrlState) -> (f64, f64) {
        let df = self.deviation(s);
        let vir = self.k_vir * (df - s.washout_vir) / self.tau_w_i;
        let qd = self.k_qd * (df - s.washout_qd);
        (vir, qd)
    }

    /// Requested power change [p.u. of bank rating].
    pub fn output(&self, s: &FreqCtrlState) -> f64 {
        let (vir, qd) = self.branch_outputs(s);
        (-(vir + qd)).clamp(-1.0, 1.0)
    }

    pub(crate) fn derivatives_into(&self, x: &[f64], f_grid: f64, dx: &mut [f64]) {
        let s = FreqCtrlState::from_slice(x);
        let df = self.deviation(&s);
        dx[0] = (f_grid - s.f_meas) / self.tau_pll;
        dx[1] = (df - s.washout_vir) / self.tau_w_i;
        dx[2] = (df - s.washout_qd) / self.tau_w_d;
    }

    fn fastest_time_constant(&self) -> f64 {
        self.tau_pll.min(self.tau_w_i).min(self.tau_w_d)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FreqCtrlState {
    /// Lagged frequency [p.u.].
    pub f_meas: f64,
    /// Low-pass state of the VIR washout.
    pub washout_vir: f64,
    /// Low-pass state of the quasi-droop washout.
    pub washout_qd: f64,
}

impl Default for FreqCtrlState {
    fn default() -> Self {
        Self {
            f_meas: 1.0,
            washout_vir: 0.0,
            washout_qd: 0.0,
        }
    }
}

impl FreqCtrlState {
    pub const LEN: usize = 3;

    pub fn to_array(self) -> [f64; 3] {
        [self.f_meas, self.washout_vir, self.washout_qd]
    }

    pub fn from_slice(x: &[f64]) -> Self {
        Self {
            f_meas: x[0],
            washout_vir: x[1],
            washout_qd: x[2],
        }
    }
}

/// Advances the controller by `dt` with `f_grid` [p.u.] held and returns the
/// updated requested power change.
pub fn freq_ctrl_step(p: &FreqCtrlParams, s: FreqCtrlState, f_grid: f64, dt: f64) -> (f64, FreqCtrlState) {
    assert!(dt > 0.0, "dt must be positive");
    let mut x = s.to_array();
    let f = |_t: f64, x: &[f64], dx: &mut [f64]| p.derivatives_into(x, f_grid, dx);
    rk4_substepped(&f, 0.0, &mut x, dt, 0.1 * p.fastest_time_constant());
    let next = FreqCtrlState::from_slice(&x);
    (p.output(&next), next)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quasi_droop_step_matches_closed_form() {
        let p = FreqCtrlParams::quasi_droop_only(150.0);
        let df = -0.002;
        let (tp, tw) = (p.tau_pll, p.tau_w_d);
        let dt = 1e-3;
        let mut s = FreqCtrlState::default();
        let mut worst = 0.0_f64;
        for k in 1..=60_000 {
            let (out, next) = freq_ctrl_step(&p, s, 1.0 + df, dt);
            s = next;
            let t = k as f64 * dt;
            // Lag followed by a unity washout, driven by a step.
            let y = 150.0 * df * tw / (tw - tp) * ((-t / tw).exp() - (-t / tp).exp());
            worst = worst.max((out - (-y)).abs());
        }
        assert!(worst < 1e-6, "max deviation {worst}");
    }

    #[test]
    fn quasi_droop_initial_response_is_proportional() {
        let p = FreqCtrlParams {
            tau_pll: 1e-4,
            ..FreqCtrlParams::quasi_droop_only(150.0)
        };
        let mut s = FreqCtrlState::default();
        let mut out = 0.0;
        for _ in 0..2 {
            (out, s) = freq_ctrl_step(&p, s, 0.998, 1e-3);
        }
        assert!((out - 0.3).abs() < 1e-4, "{out}");
        for _ in 0..30_000 {
            (out, s) = freq_ctrl_step(&p, s, 0.998, 1e-3);
        }
        // One washout time constant later.
        assert!((out - 0.3 * (-30.002f64 / 30.0).exp()).abs() < 1e-4, "{out}");
    }

    #[test]
    fn vir_ramp_response_reaches_gain_times_slope() {
        let p = FreqCtrlParams::vir_only(100.0);
        let dt = 1e-3;
        let mut s = FreqCtrlState::default();
        let mut out = 0.0;
        for k in 1..=20_000 {
            let t = k as f64 * dt;
            (out, s) = freq_ctrl_step(&p, s, 1.0 - 0.001 * (t - 0.5 * dt), dt);
            if k == 5_000 {
                assert!((out - 0.1).abs() < 0.01 * 0.1, "{out}");
            }
        }
        assert!((out - 0.1).abs() < 1e-4, "{out}");
    }

    #[test]
    fn washouts_decay_under_constant_input() {
        let p = FreqCtrlParams::default();
        let mut s = FreqCtrlState::default();
        let mut out = 0.0;
        for _ in 0..1_000 {
            (out, s) = freq_ctrl_step(&p, s, 0.995, 1.0);
        }
        let (vir, qd) = p.branch_outputs(&s);
        assert!(vir.abs() < 1e-6 && qd.abs() < 1e-6 && out.abs() < 1e-6);
    }

    #[test]
    fn output_saturates() {
        let p = FreqCtrlParams::quasi_droop_only(150.0);
        let s = FreqCtrlState {
            f_meas: 0.98,
            ..FreqCtrlState::default()
        };
        assert_eq!(p.output(&s), 1.0);
    }

    #[test]
    fn deadband_suppresses_small_deviations() {
        let p = FreqCtrlParams {
            deadband: 0.001,
            ..FreqCtrlParams::quasi_droop_only(100.0)
        };
        let small = FreqCtrlState {
            f_meas: 0.9995,
            ..FreqCtrlState::default()
        };
        assert_eq!(p.output(&small), 0.0);
        let large = FreqCtrlState {
            f_meas: 0.997,
            ..FreqCtrlState::default()
        };
        assert!((p.output(&large) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn washout_ratio_enforced() {
        let p = FreqCtrlParams {
            tau_w_d: 5.0,
            ..FreqCtrlParams::default()
        };
        assert_eq!(p.validate("control.freq").len(), 1);
        let single = FreqCtrlParams {
            tau_w_d: 5.0,
            ..FreqCtrlParams::quasi_droop_only(150.0)
        };
        assert!(single.validate("control.freq").is_empty());
    }
}
