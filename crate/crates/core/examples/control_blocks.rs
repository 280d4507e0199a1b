//! The control blocks on their own: frequency support, PQ current control,
//! ride-through limiting and the charge/discharge gate.

use scbank::bank::BankConfig;
use scbank::control::*;

fn main() {
    // Frequency controller after a 0.2 Hz drop at 60 Hz.
    let fc = FreqCtrlParams::default();
    let mut s = FreqCtrlState::default();
    let f = 1.0 - 0.2 / 60.0;
    for k in 1..=5 {
        let (dp, next) = freq_ctrl_step(&fc, s, f, 0.1);
        s = next;
        println!("t = {:.1} s  Δp_ref = {dp:+.3} p.u.", 0.1 * f64::from(k));
    }

    // PQ loop closed at unity voltage.
    let pq = PqParams::default();
    let mut st = PqState::default();
    let (mut i_d, mut i_q) = (0.0, 0.0);
    for _ in 0..500 {
        let inputs = PqInputs { p_ref: 0.5, q_ref: 0.2, p_act: i_d, q_act: i_q, ..Default::default() };
        (i_d, i_q, st) = pq_step(&pq, st, inputs, 1e-3);
    }
    println!("PQ after 0.5 s: i_d = {i_d:.3}, i_q = {i_q:.3}");

    // Reactive priority during a 40 % dip.
    let lv = LvrtParams::default();
    let (d, q, mode) = lvrt_limit(&lv, pq.i_max, 1.0, 0.0, 0.6, false);
    println!("dip to 0.6 p.u.: i_d* = {d:.3}, i_q* = {q:.3}, ride-through {mode}");

    // Gate hysteresis while the cell discharges to the cut-off and recovers.
    let gp = GateParams::default();
    let mut g = GateState::initial(&gp, 2.7);
    for u in [1.5, 1.1, 1.2, 1.39, 1.4] {
        g = gate_step(&gp, g, u);
        println!("u = {u:.2} V  discharge enabled {}", g.discharge_enabled);
    }

    let bank = BankConfig::default();
    let dc = dc_current(&bank, -1e8, 388.5, &gp, GateState::initial(&gp, 2.0));
    println!("100 MW from a 388.5 V string: {:.1} A requested, {:.1} A after limits", dc.raw, dc.cell_current);
}
