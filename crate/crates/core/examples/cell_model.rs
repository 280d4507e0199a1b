//! Stored energy, charge and SoC of one cell under the nonlinear and the
//! three constant-capacitance models.

use scbank::cell::{ideal_from, CellParams, IdealVariant};

fn main() -> scbank::Result<()> {
    let cell = CellParams::default();
    println!("C(u) = {} + {}·u F, rs = {} Ω, rated {} V", cell.c0, cell.kv, cell.rs, cell.u_rated);
    println!("{:>6} {:>9} {:>10} {:>10} {:>8} {:>8} {:>8}", "u [V]", "C [F]", "Q [C]", "E [J]", "E0 [J]", "Eh [J]", "Er [J]");
    let ideals = IdealVariant::ALL.map(|v| ideal_from(&cell, v));
    for k in 0..=9 {
        let u = 0.3 * f64::from(k);
        print!(
            "{u:>6.1} {:>9.1} {:>10.1} {:>10.1}",
            cell.capacitance(u)?,
            cell.stored_charge(u)?,
            cell.stored_energy(u)?
        );
        for i in &ideals {
            print!(" {:>8.0}", i.stored_energy(u));
        }
        println!();
    }

    // A voltage gauge reads SoC from u²; the real cell stores energy faster
    // than that at high voltage.
    for soc in [0.25, 0.5, 0.75] {
        let u = cell.voltage_at_soc(soc)?;
        println!("SoC {soc:.2} at {u:.3} V, u²/u_rated² = {:.3}", (u / cell.u_rated).powi(2));
    }

    let cell = CellParams { n_groups: 3, ..cell };
    for k in 1..=3 {
        let (r, c) = cell.group_params(cell.u_rated, k)?;
        println!("RC group {k}: R = {r:.3e} Ω, C = {c:.0} F, τ = {:.3} ms", r * c * 1e3);
    }
    Ok(())
}
