//! Sweeps initial charge against the four cell models and reports where a
//! constant-capacitance model misjudges the nadir by more than 5 %.
//!
//! `cargo run --release --example soc_sweep -- [scenario.toml]`

use scbank::sweep::{run_sweep, summarize, SweepSpec};
use scbank::Scenario;

const ROOT: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios");

fn main() -> scbank::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| format!("{ROOT}/large_disturbance.toml"));
    let base = Scenario::load(&path)?;
    let spec = SweepSpec::from_toml_str(&std::fs::read_to_string(format!("{ROOT}/soc_sweep.toml"))?)?;
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let rows = run_sweep(&base, &spec, workers, base.sim.rocof_window)?;

    println!("{:<22} {:>6} {:>10} {:>8}", "model", "SoC", "nadir Hz", "ttd s");
    for r in &rows {
        let Some(m) = &r.metrics else { continue };
        let ttd = m.time_to_discharge_s.map_or("-".into(), |t| format!("{t:.2}"));
        println!("{:<22} {:>6.3} {:>10.3} {ttd:>8}", r.model.to_string(), r.initial_soc, m.nadir_hz);
    }

    for g in summarize(&spec, &rows, base.grid.sfr.f_nom).groups {
        for v in g.variants {
            let ranges: Vec<String> = v.inaccurate_ranges.iter().map(|r| format!("[{:.2}, {:.2}]", r.lo, r.hi)).collect();
            let err = v.discharge_time_error.map_or("-".into(), |e| format!("{:.1} %", 100.0 * e));
            println!("{:<22} inaccurate SoC {} (width {:.3}), discharge-time error {err}", v.model, ranges.join(" "), v.inaccurate_width);
        }
    }
    Ok(())
}
