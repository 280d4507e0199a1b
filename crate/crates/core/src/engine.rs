//! Fixed-step simulation of the coupled bank, control chain and grid.
//!
//! All continuous states live in one vector `[cell | grid | freq | pq]` and
//! are advanced together by the configured [`Method`]. Discrete quantities are
//! held over a step: the bus voltage and power deficit are sampled at the step
//! start, and the gate flags, ride-through mode and the measured string
//! voltage come from the end of the previous step. Holding the measured
//! voltage breaks the algebraic loop between terminal voltage and current.

use serde::Serialize;

use crate::bank::BankConfig;
use crate::cell::CellModel;
use crate::control::{dc_current, FreqCtrlParams, FreqCtrlState, GateState, PqInputs, PqState, QMode};
use crate::error::{Error, Result};
use crate::grid::{bus_voltage, metrics, power_deficit, GridState, Metrics};
use crate::ode::{Method, Stepper};
use crate::scenario::{ControlSection, Scenario};

/// Discrete inputs held constant over one step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Held {
    pub v_ac: f64,
    pub p_dist: f64,
    pub gate: GateState,
    pub in_lvrt: bool,
    /// String voltage measured at the end of the previous step [V].
    pub u_string_meas: f64,
}

/// Algebraic quantities at one point of the trajectory.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Signals {
    pub delta_f: f64,
    /// Requested change from frequency control [p.u. of bank rating].
    pub dp_ref: f64,
    pub i_d: f64,
    pub i_q: f64,
    /// Cell current [A]; positive charges.
    pub i_cell: f64,
    pub u_terminal: f64,
    /// Power delivered to the grid [p.u. of bank rating].
    pub p_bank: f64,
    pub clip_d: f64,
    pub clip_q: f64,
    pub q_act: f64,
}

/// The coupled system assembled from a scenario.
#[derive(Clone, Debug)]
pub struct System {
    pub model: CellModel,
    pub bank: BankConfig,
    pub control: ControlSection,
    pub sfr: crate::grid::SfrParams,
    pub disturbances: Vec<crate::grid::Disturbance>,
    cell_len: usize,
}

impl System {
    pub fn from_scenario(s: &Scenario) -> Self {
        let model = s.cell_model();
        Self {
            cell_len: model.state_len(),
            model,
            bank: s.bank.config(),
            control: s.control.clone(),
            sfr: s.grid.sfr.clone(),
            disturbances: s.grid.disturbances.clone(),
        }
    }

    pub fn dim(&self) -> usize {
        self.cell_len + GridState::LEN + FreqCtrlState::LEN + PqState::LEN
    }

    fn grid_at(&self) -> usize {
        self.cell_len
    }

    fn freq_at(&self) -> usize {
        self.cell_len + GridState::LEN
    }

    fn pq_at(&self) -> usize {
        self.freq_at() + FreqCtrlState::LEN
    }

    /// Equilibrium at cell voltage `u0` with the set-points already tracked.
    pub fn initial_state(&self, u0: f64) -> Vec<f64> {
        let mut x = self.model.rest_state(u0);
        x.extend(GridState::default().to_array());
        x.extend(FreqCtrlState::default().to_array());
        let c = &self.control;
        let pq = match c.pq.q_mode {
            QMode::ReactivePower => PqState {
                integ_d: c.p_setpoint,
                integ_q: c.q_setpoint,
                p_meas: c.p_setpoint,
                q_meas: c.q_setpoint,
            },
            QMode::TerminalVoltage => PqState {
                integ_d: c.p_setpoint,
                integ_q: 0.0,
                p_meas: c.p_setpoint,
                q_meas: 1.0,
            },
        };
        x.extend(pq.to_array());
        x
    }

    pub fn initial_held(&self, u0: f64) -> Held {
        let v_ac = bus_voltage(&self.disturbances, 0.0);
        Held {
            v_ac,
            p_dist: self.p_dist(0.0, v_ac),
            gate: GateState::initial(&self.control.gate, u0),
            in_lvrt: self.control.lvrt.next_mode(false, v_ac),
            u_string_meas: self.bank.string_voltage(u0),
        }
    }

    /// Net power deficit [p.u. on s_base], including the load relief of a dip.
    fn p_dist(&self, t: f64, v_ac: f64) -> f64 {
        power_deficit(&self.disturbances, t) + self.sfr.load_change(v_ac)
    }

    fn freq(&self) -> Option<&FreqCtrlParams> {
        self.control.freq.as_ref()
    }

    /// Evaluates the algebraic control chain at state `x`.
    pub fn signals(&self, x: &[f64], h: &Held) -> Signals {
        let c = &self.control;
        let delta_f = x[self.grid_at()];
        let dp_ref = self
            .freq()
            .map_or(0.0, |f| f.output(&FreqCtrlState::from_slice(&x[self.freq_at()..])));
        let pq = PqState::from_slice(&x[self.pq_at()..]);
        let (i_d0, i_q0) = c.pq.output(&pq, c.p_setpoint + dp_ref, c.q_setpoint);
        let (i_d1, i_q1) = c.lvrt.limit_currents(c.pq.i_max, i_d0, i_q0, h.v_ac, h.in_lvrt);

        let p_rated = self.bank.p_rated;
        let p_dc = -h.v_ac * i_d1 * p_rated;
        let dc = dc_current(&self.bank, p_dc, h.u_string_meas, &c.gate, h.gate);
        let i_cell = dc.cell_current;
        let u_terminal = self.model.terminal_voltage(&x[..self.cell_len], i_cell);
        let cells = f64::from(self.bank.n_p) * f64::from(self.bank.n_s);
        let p_bank = -i_cell * cells * u_terminal / p_rated;

        let i_d = if dc.limited() && h.v_ac > 0.0 {
            -i_cell * f64::from(self.bank.n_p) * h.u_string_meas / (p_rated * h.v_ac)
        } else {
            i_d1
        };
        let q_act = match c.pq.q_mode {
            QMode::ReactivePower => h.v_ac * i_q1,
            QMode::TerminalVoltage => h.v_ac,
        };
        Signals {
            delta_f,
            dp_ref,
            i_d,
            i_q: i_q1,
            i_cell,
            u_terminal,
            p_bank,
            clip_d: i_d - i_d0,
            clip_q: i_q1 - i_q0,
            q_act,
        }
    }

    /// Grid-side injection [p.u. on s_base]. The scheduled set-point is
    /// assumed balanced by dispatch, so only the deviation from it counts.
    fn grid_injection(&self, sig: &Signals) -> f64 {
        (sig.p_bank - self.control.p_setpoint) * self.bank.p_rated / self.sfr.s_base
    }

    pub fn derivatives(&self, x: &[f64], h: &Held, dx: &mut [f64]) {
        let sig = self.signals(x, h);
        let (g, f, q) = (self.grid_at(), self.freq_at(), self.pq_at());
        self.model.derivatives(&x[..g], sig.i_cell, &mut dx[..g]);
        self.sfr
            .derivatives_into(&x[g..f], self.grid_injection(&sig), h.p_dist, &mut dx[g..f]);
        match self.freq() {
            Some(fp) => fp.derivatives_into(&x[f..q], 1.0 + sig.delta_f, &mut dx[f..q]),
            None => dx[f..q].fill(0.0),
        }
        let c = &self.control;
        let inputs = PqInputs {
            p_ref: c.p_setpoint + sig.dp_ref,
            q_ref: c.q_setpoint,
            p_act: sig.p_bank,
            q_act: sig.q_act,
            clip_d: sig.clip_d,
            clip_q: sig.clip_q,
        };
        c.pq.derivatives_into(&x[q..], &inputs, &mut dx[q..]);
    }

    /// Name of the block owning state index `i`.
    fn block_of(&self, i: usize) -> &'static str {
        if i < self.grid_at() {
            "cell"
        } else if i < self.freq_at() {
            "grid"
        } else if i < self.pq_at() {
            "frequency control"
        } else {
            "pq control"
        }
    }
}

/// A gate transition, stamped at the step boundary where it takes effect.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GateEvent {
    pub t: f64,
    pub charge_enabled: bool,
    pub discharge_enabled: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Abort {
    pub t: f64,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct EngineMeta {
    pub method: Method,
    pub dt: f64,
    pub steps: usize,
    pub state_dim: usize,
    pub version: String,
}

/// Uniformly sampled output channels, all of equal length.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Channels {
    pub time: Vec<f64>,
    pub frequency_hz: Vec<f64>,
    pub frequency_pu: Vec<f64>,
    pub delta_f_pu: Vec<f64>,
    /// Bank power delivered to the grid [MW].
    pub p_sc_mw: Vec<f64>,
    /// Same, in p.u. of the bank rating.
    pub p_sc_pu: Vec<f64>,
    pub i_cell: Vec<f64>,
    /// Cell terminal voltage [V].
    pub u_cell: Vec<f64>,
    /// Main-capacitor voltage [V].
    pub u_c: Vec<f64>,
    pub u_string: Vec<f64>,
    pub soc: Vec<f64>,
    pub charge_enabled: Vec<bool>,
    pub discharge_enabled: Vec<bool>,
    pub i_d: Vec<f64>,
    pub i_q: Vec<f64>,
    pub v_ac: Vec<f64>,
    pub in_lvrt: Vec<bool>,
}

impl Channels {
    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    /// Every channel as `(name, values)`, flags as 0/1.
    pub fn columns(&self) -> Vec<(&'static str, Vec<f64>)> {
        let flags = |v: &[bool]| v.iter().map(|&b| f64::from(u8::from(b))).collect();
        vec![
            ("time", self.time.clone()),
            ("frequency_hz", self.frequency_hz.clone()),
            ("frequency_pu", self.frequency_pu.clone()),
            ("delta_f_pu", self.delta_f_pu.clone()),
            ("p_sc_mw", self.p_sc_mw.clone()),
            ("p_sc_pu", self.p_sc_pu.clone()),
            ("i_cell", self.i_cell.clone()),
            ("u_cell", self.u_cell.clone()),
            ("u_c", self.u_c.clone()),
            ("u_string", self.u_string.clone()),
            ("soc", self.soc.clone()),
            ("charge_enabled", flags(&self.charge_enabled)),
            ("discharge_enabled", flags(&self.discharge_enabled)),
            ("i_d", self.i_d.clone()),
            ("i_q", self.i_q.clone()),
            ("v_ac", self.v_ac.clone()),
            ("in_lvrt", flags(&self.in_lvrt)),
        ]
    }

    fn push(&mut self, sys: &System, t: f64, x: &[f64], h: &Held, sig: &Signals) {
        let f_nom = sys.sfr.f_nom;
        let cell = &x[..sys.cell_len];
        self.time.push(t);
        self.frequency_hz.push(f_nom * (1.0 + sig.delta_f));
        self.frequency_pu.push(1.0 + sig.delta_f);
        self.delta_f_pu.push(sig.delta_f);
        self.p_sc_mw.push(sig.p_bank * sys.bank.p_rated / 1e6);
        self.p_sc_pu.push(sig.p_bank);
        self.i_cell.push(sig.i_cell);
        self.u_cell.push(sig.u_terminal);
        self.u_c.push(cell[0]);
        self.u_string.push(sys.bank.string_voltage(sig.u_terminal));
        self.soc.push(sys.model.soc(cell));
        self.charge_enabled.push(h.gate.charge_enabled);
        self.discharge_enabled.push(h.gate.discharge_enabled);
        self.i_d.push(sig.i_d);
        self.i_q.push(sig.i_q);
        self.v_ac.push(h.v_ac);
        self.in_lvrt.push(h.in_lvrt);
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SimResult {
    pub scenario: Option<Scenario>,
    pub meta: EngineMeta,
    pub channels: Channels,
    pub gate_events: Vec<GateEvent>,
    /// First disturbance start.
    pub onset: Option<f64>,
    pub f_nom: f64,
    pub abort: Option<Abort>,
}

impl SimResult {
    /// First time at or after `from` where discharging gets disabled.
    pub fn discharge_disabled_at(&self, from: f64) -> Option<f64> {
        let eps = 1e-9;
        let mut prev = true;
        for e in &self.gate_events {
            if prev && !e.discharge_enabled && e.t + eps >= from {
                return Some(e.t);
            }
            prev = e.discharge_enabled;
        }
        if !self.gate_events.is_empty() {
            return None;
        }
        let ch = &self.channels;
        ch.time
            .iter()
            .zip(&ch.discharge_enabled)
            .zip(std::iter::once(&true).chain(&ch.discharge_enabled))
            .find(|((&t, &now), &before)| before && !now && t + eps >= from)
            .map(|((&t, _), _)| t)
    }

    pub fn metrics(&self, window: f64) -> Result<Metrics> {
        metrics(self, window)
    }
}

/// Stateful simulation that can be advanced one step at a time.
pub struct Simulation {
    system: System,
    stepper: Stepper,
    x: Vec<f64>,
    held: Held,
    n: usize,
    dt: f64,
}

impl Simulation {
    pub fn new(scenario: &Scenario) -> Result<Self> {
        scenario.validate()?;
        let system = System::from_scenario(scenario);
        let u0 = scenario.bank.initial_cell_voltage()?;
        let x = system.initial_state(u0);
        let held = system.initial_held(u0);
        Ok(Self {
            stepper: Stepper::new(scenario.sim.method, system.dim()),
            system,
            x,
            held,
            n: 0,
            dt: scenario.sim.dt,
        })
    }

    pub fn time(&self) -> f64 {
        self.n as f64 * self.dt
    }

    pub fn state(&self) -> &[f64] {
        &self.x
    }

    pub fn held(&self) -> &Held {
        &self.held
    }

    pub fn system(&self) -> &System {
        &self.system
    }

    pub fn signals(&self) -> Signals {
        self.system.signals(&self.x, &self.held)
    }

    /// Integrates one step, then updates the gate, the measured string voltage
    /// and the held grid inputs for the next step.
    pub fn step(&mut self) -> Result<()> {
        let t = self.time();
        let sys = &self.system;
        let held = self.held;
        let f = |_t: f64, x: &[f64], dx: &mut [f64]| sys.derivatives(x, &held, dx);
        self.stepper.step(&f, t, &mut self.x, self.dt);
        sys.control.pq.clamp_integrators(&mut self.x[sys.pq_at()..]);
        self.n += 1;
        if let Some(i) = self.x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NumericAbort {
                t: self.time(),
                reason: format!("non-finite {} state (index {i})", sys.block_of(i)),
            });
        }

        let sig = sys.signals(&self.x, &held);
        let gate = crate::control::gate_step(&sys.control.gate, held.gate, sig.u_terminal);
        let t1 = self.time();
        let v_ac = bus_voltage(&sys.disturbances, t1);
        self.held = Held {
            v_ac,
            p_dist: sys.p_dist(t1, v_ac),
            gate,
            in_lvrt: sys.control.lvrt.next_mode(held.in_lvrt, v_ac),
            u_string_meas: sys.bank.string_voltage(sig.u_terminal),
        };
        Ok(())
    }
}

/// Runs a scenario to completion, or until a numeric abort.
pub fn run(scenario: &Scenario) -> Result<SimResult> {
    let mut sim = Simulation::new(scenario)?;
    let cfg = &scenario.sim;
    let steps = cfg.steps();
    let mut out = SimResult {
        scenario: Some(scenario.clone()),
        meta: EngineMeta {
            method: cfg.method,
            dt: cfg.dt,
            steps,
            state_dim: sim.system.dim(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        },
        onset: scenario.onset(),
        f_nom: scenario.grid.sfr.f_nom,
        ..SimResult::default()
    };
    for n in 0..=steps {
        if n % cfg.record_decimation == 0 || n == steps {
            let sig = sim.signals();
            out.channels.push(&sim.system, sim.time(), &sim.x, &sim.held, &sig);
        }
        if n == steps {
            break;
        }
        let before = sim.held.gate;
        if let Err(e) = sim.step() {
            let Error::NumericAbort { t, reason } = e else {
                return Err(e);
            };
            out.abort = Some(Abort { t, reason });
            break;
        }
        let after = sim.held.gate;
        if after != before {
            out.gate_events.push(GateEvent {
                t: sim.time(),
                charge_enabled: after.charge_enabled,
                discharge_enabled: after.discharge_enabled,
            });
        }
    }
    Ok(out)
}
