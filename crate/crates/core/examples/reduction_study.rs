//! Compares reduced cell models against the detailed one under a ±30 A
//! charge/discharge profile and writes every trace as CSV.
//!
//! `cargo run --example reduction_study -- [out_dir]`

use std::path::PathBuf;

use scbank::cell::CellParams;
use scbank::study::{reduce_study, CurrentProfile};

fn main() -> scbank::Result<()> {
    let out: PathBuf = std::env::args().nth(1).unwrap_or_else(|| "out/reduction".into()).into();
    let study = reduce_study(&CellParams::default(), &CurrentProfile::default())?;
    println!("{:<20} {:<8} {:>10} {:>10}", "variant", "vs", "V MAPE %", "E MAPE %");
    for r in &study.rows {
        println!(
            "{:<20} {:<8} {:>10.3} {:>10.3}",
            r.variant, r.reference, r.voltage_mape_pct, r.energy_mape_pct
        );
    }

    std::fs::create_dir_all(&out)?;
    for (v, tr) in &study.traces {
        scbank::output::write_columns(
            &out.join(format!("trace_{}.csv", v.name())),
            &[
                ("time", tr.time.clone()),
                ("current", tr.current.clone()),
                ("u_terminal", tr.u_terminal.clone()),
            ],
        )?;
    }
    println!("traces in {}", out.display());
    Ok(())
}
