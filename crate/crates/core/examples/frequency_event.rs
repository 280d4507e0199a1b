//! A 95 MW loss of generation with no support, virtual inertia, and
//! quasi-droop from a fully charged bank.

use scbank::control::FreqCtrlParams;
use scbank::{run, Scenario};

const SCENARIO: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/frequency_event.toml");

fn main() -> scbank::Result<()> {
    let base = Scenario::load(SCENARIO)?;
    let cases = [
        ("no support", None),
        ("virtual inertia", Some(FreqCtrlParams::vir_only(100.0))),
        ("quasi-droop", Some(FreqCtrlParams::quasi_droop_only(150.0))),
        ("both", Some(FreqCtrlParams::default())),
    ];
    println!("{:<16} {:>10} {:>8} {:>14} {:>10}", "control", "nadir Hz", "at s", "RoCoF Hz/s", "ttd s");
    for (label, freq) in cases {
        let mut s = base.clone();
        s.control.freq = freq;
        let r = run(&s)?;
        let m = r.metrics(s.sim.rocof_window)?;
        let ttd = m.time_to_discharge_s.map_or("-".into(), |t| format!("{t:.2}"));
        println!(
            "{label:<16} {:>10.3} {:>8.2} {:>14.3} {ttd:>10}",
            m.nadir_hz, m.nadir_time_s, m.avg_rocof_hz_per_s
        );
    }
    Ok(())
}
