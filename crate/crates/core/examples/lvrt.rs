//! Voltage dips of several depths and durations: DC string voltage of the
//! nonlinear bank against the constant-capacitance models.

use scbank::cell::IdealVariant;
use scbank::grid::Disturbance;
use scbank::{run, ModelVariant, Scenario};

const SCENARIO: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/lvrt.toml");

fn main() -> scbank::Result<()> {
    let base = Scenario::load(SCENARIO)?;
    println!("{:>5} {:>6} {:>9} {:>9} {:>9} {:>9}", "depth", "ms", "spike V", "Δ zero", "Δ half", "Δ rated");
    for depth in [0.2, 0.37, 0.5, 0.8] {
        for duration in [0.1, 0.2, 0.3] {
            let mut s = base.clone();
            s.grid.disturbances = vec![Disturbance::voltage_dip(1.0, depth, duration)];
            let nl = run(&s)?.channels;
            let pre = nl.u_string[nl.time.partition_point(|&t| t < 1.0) - 1];
            let clear = nl.time.partition_point(|&t| t < 1.0 + duration);
            let spike = nl.u_string[clear..].iter().map(|u| (u - pre).abs()).fold(0.0, f64::max);
            print!("{:>5.0}% {:>6.0} {spike:>9.2}", depth * 100.0, duration * 1e3);
            for v in IdealVariant::ALL {
                s.model = ModelVariant::Ideal(v);
                let id = run(&s)?.channels;
                let diff = id.u_string.iter().zip(&nl.u_string).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                print!(" {diff:>9.2}");
            }
            println!();
        }
    }
    Ok(())
}
