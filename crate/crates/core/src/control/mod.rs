//! The bank control chain: frequency control, PQ control, LVRT and current
//! limiting, the state-of-voltage gate and the DC current calculation.

pub mod freq;
pub mod gate;
pub mod lvrt;
pub mod pq;

pub use freq::{freq_ctrl_step, FreqCtrlParams, FreqCtrlState};
pub use gate::{apply_gate, dc_current, gate_step, DcCurrent, GateParams, GateState};
pub use lvrt::{lvrt_limit, LvrtParams};
pub use pq::{pq_step, PqInputs, PqParams, PqState, QMode};
