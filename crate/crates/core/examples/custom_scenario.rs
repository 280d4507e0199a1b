//! Builds a scenario in code, saves it as TOML, runs it and writes the same
//! outputs as `scbank run`.
//!
//! `cargo run --example custom_scenario -- [out_dir]`

use std::path::PathBuf;

use scbank::control::FreqCtrlParams;
use scbank::grid::Disturbance;
use scbank::ode::Method;
use scbank::{run, Scenario};

fn main() -> scbank::Result<()> {
    let out: PathBuf = std::env::args().nth(1).unwrap_or_else(|| "out/custom".into()).into();
    let mut s = Scenario::reference();
    s.name = Some("half-charged bank, 50 MW loss".into());
    s.bank.initial_voltage = None;
    s.bank.initial_soc = Some(0.5);
    s.control.freq = Some(FreqCtrlParams::default());
    s.grid.disturbances = vec![Disturbance::loss_of_generation(1.0, s.grid.sfr.mw_to_pu(50.0))];
    s.sim.t_end = 20.0;
    s.sim.method = Method::Trapezoidal;
    s.validate()?;

    std::fs::create_dir_all(&out)?;
    std::fs::write(out.join("scenario.toml"), s.to_toml_string()?)?;
    let r = run(&s)?;
    scbank::output::write_timeseries(&out.join("timeseries.csv"), &r.channels)?;
    let m = r.metrics(s.sim.rocof_window)?;
    scbank::output::write_json(&out.join("metrics.json"), &m)?;
    println!("nadir {:.3} Hz at {:.2} s, final SoC {:.3}", m.nadir_hz, m.nadir_time_s, m.final_soc);
    println!("wrote {}", out.display());
    Ok(())
}
