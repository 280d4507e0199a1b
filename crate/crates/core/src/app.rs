//! Command implementations behind the `scbank` binary. Each returns a process
//! exit code: 0 on success, 2 on invalid input, 3 on a numeric abort.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::engine::run;
use crate::error::{Error, Result};
use crate::grid::Metrics;
use crate::output::{format_f64, write_columns, write_json, write_timeseries};
use crate::scenario::Scenario;
use crate::study::{reduce_study, CurrentProfile};
use crate::sweep::{run_sweep, summarize, SweepSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_ABORT: i32 = 3;

/// Run-wide options shared by the commands.
#[derive(Clone, Debug, Default)]
pub struct Options {
    /// Average-RoCoF window overriding the scenario value [s].
    pub window: Option<f64>,
    /// Echoed into the outputs; the simulation itself is deterministic.
    pub seed_echo: Option<u64>,
    pub workers: Option<usize>,
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NumericAbort { .. } => EXIT_ABORT,
        _ => EXIT_INVALID,
    }
}

fn report(r: Result<()>) -> i32 {
    match r {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn window(opts: &Options, s: &Scenario) -> Result<f64> {
    let w = opts.window.unwrap_or(s.sim.rocof_window);
    if w > 0.0 && w.is_finite() {
        Ok(w)
    } else {
        Err(Error::Validation(vec![format!("--window: must be > 0, got {w}")]))
    }
}

#[derive(Serialize)]
struct RunReport<'a> {
    metrics: &'a Metrics,
    scenario: &'a Scenario,
    seed_echo: Option<u64>,
    engine: &'a crate::engine::EngineMeta,
    gate_events: &'a [crate::engine::GateEvent],
}

/// Simulates one scenario; writes `timeseries.csv` and `metrics.json`.
pub fn cmd_run(scenario: &Path, out: &Path, opts: &Options) -> i32 {
    report((|| {
        let s = Scenario::load(scenario)?;
        let w = window(opts, &s)?;
        let r = run(&s)?;
        fs::create_dir_all(out)?;
        write_timeseries(&out.join("timeseries.csv"), &r.channels)?;
        if let Some(a) = &r.abort {
            return Err(Error::NumericAbort {
                t: a.t,
                reason: a.reason.clone(),
            });
        }
        let m = r.metrics(w)?;
        write_json(
            &out.join("metrics.json"),
            &RunReport {
                metrics: &m,
                scenario: &s,
                seed_echo: opts.seed_echo,
                engine: &r.meta,
                gate_events: &r.gate_events,
            },
        )
    })())
}

/// Runs the Cartesian product of a sweep; writes `sweep.csv` and `summary.json`.
pub fn cmd_sweep(scenario: &Path, spec: &Path, out: &Path, opts: &Options) -> i32 {
    report((|| {
        let base = Scenario::load(scenario)?;
        let w = window(opts, &base)?;
        let spec = SweepSpec::from_toml_str(&fs::read_to_string(spec)?)?;
        let workers = opts.workers.unwrap_or_else(|| {
            std::thread::available_parallelism().map_or(1, |n| n.get())
        });
        let rows = run_sweep(&base, &spec, workers, w)?;
        fs::create_dir_all(out)?;

        let mut wtr = csv::Writer::from_path(out.join("sweep.csv"))?;
        let mut header: Vec<String> = vec!["index".into()];
        header.extend(spec.axis.iter().map(|a| a.path.clone()));
        header.extend(
            [
                "initial_voltage",
                "initial_soc",
                "nadir_hz",
                "nadir_time_s",
                "avg_rocof_hz_per_s",
                "time_to_discharge_s",
                "final_frequency_hz",
                "final_soc",
                "min_soc",
                "ufls_crossed",
                "abort",
            ]
            .map(String::from),
        );
        wtr.write_record(&header)?;
        for r in &rows {
            let mut rec = vec![r.index.to_string()];
            rec.extend(r.values.iter().cloned());
            rec.push(format_f64(r.initial_voltage));
            rec.push(format_f64(r.initial_soc));
            match &r.metrics {
                Some(m) => {
                    for v in [m.nadir_hz, m.nadir_time_s, m.avg_rocof_hz_per_s] {
                        rec.push(format_f64(v));
                    }
                    rec.push(m.time_to_discharge_s.map(format_f64).unwrap_or_default());
                    for v in [m.final_frequency_hz, m.final_soc, m.min_soc] {
                        rec.push(format_f64(v));
                    }
                    rec.push(u8::from(m.ufls_crossed).to_string());
                }
                None => rec.extend(std::iter::repeat_n(String::new(), 8)),
            }
            rec.push(r.abort.clone().unwrap_or_default());
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;

        #[derive(Serialize)]
        struct SweepReport {
            summary: crate::sweep::Summary,
            points: usize,
            aborted: usize,
            seed_echo: Option<u64>,
        }
        write_json(
            &out.join("summary.json"),
            &SweepReport {
                summary: summarize(&spec, &rows, base.grid.sfr.f_nom),
                points: rows.len(),
                aborted: rows.iter().filter(|r| r.abort.is_some()).count(),
                seed_echo: opts.seed_echo,
            },
        )
    })())
}

/// Model-reduction study of one cell; writes `mape.csv`, `mape.json` and one
/// `trace_<variant>.csv` per variant.
pub fn cmd_reduce_study(cell: &Path, current: Option<&Path>, out: &Path, opts: &Options) -> i32 {
    report((|| {
        let text = fs::read_to_string(cell)?;
        let params: crate::cell::CellParams =
            toml::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", cell.display())))?;
        let profile = match current {
            Some(p) => CurrentProfile::from_toml_str(&fs::read_to_string(p)?)?,
            None => CurrentProfile::default(),
        };
        let study = reduce_study(&params, &profile)?;
        fs::create_dir_all(out)?;
        let mut wtr = csv::Writer::from_path(out.join("mape.csv"))?;
        wtr.write_record(["variant", "reference", "voltage_mape_pct", "energy_mape_pct"])?;
        for r in &study.rows {
            wtr.write_record([
                r.variant.clone(),
                r.reference.clone(),
                format_f64(r.voltage_mape_pct),
                format_f64(r.energy_mape_pct),
            ])?;
        }
        wtr.flush()?;
        #[derive(Serialize)]
        struct StudyReport<'a> {
            #[serde(flatten)]
            study: &'a crate::study::ReduceStudy,
            seed_echo: Option<u64>,
        }
        write_json(
            &out.join("mape.json"),
            &StudyReport {
                study: &study,
                seed_echo: opts.seed_echo,
            },
        )?;
        for (v, tr) in &study.traces {
            write_columns(
                &out.join(format!("trace_{}.csv", v.name())),
                &[
                    ("time", tr.time.clone()),
                    ("current", tr.current.clone()),
                    ("u_terminal", tr.u_terminal.clone()),
                    ("u_c", tr.u_c.clone()),
                    ("energy", tr.energy.clone()),
                ],
            )?;
        }
        Ok(())
    })())
}

/// Loads and validates a scenario, listing every violation.
pub fn cmd_validate(scenario: &Path) -> i32 {
    report(Scenario::load(scenario).map(|s| {
        println!(
            "ok: {} ({}, {} s at dt = {} s)",
            scenario.display(),
            s.model,
            s.sim.t_end,
            s.sim.dt
        );
    }))
}
