//! State-of-voltage charge/discharge gate with hysteresis.

use serde::{Deserialize, Serialize};

use crate::bank::BankConfig;
use crate::error::Checker;

/// Gate thresholds [V] and per-cell current limits [A].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GateParams {
    pub u_ch_max: f64,
    pub u_ch_start: f64,
    pub u_dch_min: f64,
    pub u_dch_start: f64,
    pub i_ch_max: f64,
    pub i_dch_max: f64,
}

impl Default for GateParams {
    fn default() -> Self {
        Self {
            u_ch_max: 2.71,
            u_ch_start: 2.4,
            u_dch_min: 1.1,
            u_dch_start: 1.4,
            i_ch_max: 615.0,
            i_dch_max: 615.0,
        }
    }
}

impl GateParams {
    pub fn validate(&self, prefix: &str) -> Vec<String> {
        let mut c = Checker::new(prefix);
        c.check(
            self.u_dch_min < self.u_dch_start
                && self.u_dch_start < self.u_ch_start
                && self.u_ch_start < self.u_ch_max,
            "thresholds",
            || {
                format!(
                    "must satisfy u_dch_min < u_dch_start < u_ch_start < u_ch_max, got {} / {} / {} / {}",
                    self.u_dch_min, self.u_dch_start, self.u_ch_start, self.u_ch_max
                )
            },
        );
        c.positive("i_ch_max", self.i_ch_max);
        c.positive("i_dch_max", self.i_dch_max);
        c.into_violations()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct GateState {
    pub charge_enabled: bool,
    pub discharge_enabled: bool,
}

impl GateState {
    /// Both directions enabled unless the voltage already sits at a cut-off.
    pub fn initial(p: &GateParams, u_cell: f64) -> Self {
        Self {
            charge_enabled: u_cell < p.u_ch_max,
            discharge_enabled: u_cell > p.u_dch_min,
        }
    }
}

pub fn gate_step(p: &GateParams, s: GateState, u_cell: f64) -> GateState {
    let charge_enabled = if s.charge_enabled {
        u_cell < p.u_ch_max
    } else {
        u_cell <= p.u_ch_start
    };
    let discharge_enabled = if s.discharge_enabled {
        u_cell > p.u_dch_min
    } else {
        u_cell >= p.u_dch_start
    };
    GateState {
        charge_enabled,
        discharge_enabled,
    }
}

/// Zeroes a disabled direction and clamps to `[-i_dch_max, i_ch_max]`.
pub fn apply_gate(p: &GateParams, s: GateState, i_cell_request: f64) -> f64 {
    if (i_cell_request > 0.0 && !s.charge_enabled) || (i_cell_request < 0.0 && !s.discharge_enabled)
    {
        return 0.0;
    }
    i_cell_request.clamp(-p.i_dch_max, p.i_ch_max)
}

/// Smallest string voltage accepted by [`dc_current`] [V].
pub const MIN_STRING_VOLTAGE: f64 = 1.0;

/// Result of the DC current calculation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DcCurrent {
    /// Gated, limited cell current [A]; positive charges.
    pub cell_current: f64,
    /// Cell current before gating and limiting [A].
    pub raw: f64,
    /// Measured string voltage was below [`MIN_STRING_VOLTAGE`].
    pub saturated: bool,
}

impl DcCurrent {
    pub fn limited(&self) -> bool {
        self.saturated || self.cell_current != self.raw
    }
}

/// Cell current realising DC-side power `p_dc` [W] (positive charges the bank)
/// at the measured string voltage.
pub fn dc_current(
    cfg: &BankConfig,
    p_dc: f64,
    u_string_meas: f64,
    gate: &GateParams,
    state: GateState,
) -> DcCurrent {
    if u_string_meas <= MIN_STRING_VOLTAGE {
        return DcCurrent {
            cell_current: 0.0,
            raw: 0.0,
            saturated: true,
        };
    }
    let raw = p_dc / (f64::from(cfg.n_p) * u_string_meas);
    DcCurrent {
        cell_current: apply_gate(gate, state, raw),
        raw,
        saturated: false,
    }
}
