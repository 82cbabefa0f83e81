//! Runs a validated spec and writes its CSV and manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rabi_core::dynamics::pulse_timing;
use rabi_core::spectral::HamiltonianFamily;
use rabi_core::{
    calibrate_pi_pulse, compare_with_exact, diagonalize, find_anticrossing, full_protocol,
    ghz_fidelity, joint_absorption, locate_resonance, static_hamiltonian, sweep_spectrum,
    CalibrationOptions, EvolveOptions, ProtocolOptions, SweepOptions, TrajectoryRecord,
};
use rayon::prelude::*;
use thiserror::Error;

use crate::config::{render, ConfigError, ExperimentParams, ExperimentSpec, StartState};
use crate::output::{
    format_float, Cell, Table, ANTICROSSING_HEADER, CALIBRATION_HEADER, COUPLING_HEADER,
    DYNAMICS_HEADER, GHZ_HEADER, SPECTRUM_HEADER,
};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] rabi_core::Error),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Result table plus headline numbers for the manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub table: Table,
    pub summary: Vec<(&'static str, String)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub csv_path: PathBuf,
    pub manifest_path: PathBuf,
    pub rows: usize,
    pub wall_time: Duration,
}

/// `<out>.manifest`, next to the CSV.
pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest");
    PathBuf::from(name)
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            if i + 1 == n {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        })
        .collect()
}

fn dynamics_table(record: &TrajectoryRecord, omega_eff: f64, omega_q: f64) -> Table {
    let mut table = Table::new(DYNAMICS_HEADER);
    for i in 0..record.len() {
        let t = record.times[i];
        table.push(vec![
            Cell::Float(t * omega_q),
            Cell::Float(omega_eff * t / std::f64::consts::PI),
            Cell::Float(record.photon_xx[i]),
            Cell::Float(record.qubit_excitations[0][i]),
            Cell::Float(record.qubit_excitations[1][i]),
            Cell::Float(record.gq2[i]),
            Cell::Float(record.gc2[i]),
            Cell::Float(record.gqc2[i]),
        ]);
    }
    table
}

fn peak(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Computes the experiment without touching the filesystem. Rows follow the
/// input grid order whatever the thread count.
pub fn execute(spec: &ExperimentSpec) -> Result<RunOutput, RunError> {
    spec.validate()?;
    let system = &spec.system;
    let wq = system.omega_q;
    let f = format_float;
    let mut summary = Vec::new();
    let table = match &spec.params {
        ExperimentParams::SpectrumSweep {
            omega_c_min,
            omega_c_max,
            n_points,
            n_levels,
            track,
        } => {
            let grid = linspace(*omega_c_min, *omega_c_max, *n_points);
            let levels: Vec<Vec<f64>> = if *track {
                sweep_spectrum(system, &grid, *n_levels, SweepOptions::default())?
                    .branch_transitions
            } else {
                let family = HamiltonianFamily::new(system)?;
                grid.par_iter()
                    .map(|&w| {
                        let spec = family.spectrum(w)?;
                        Ok((0..*n_levels).map(|i| spec.transition(i)).collect())
                    })
                    .collect::<rabi_core::Result<_>>()?
            };
            let mut table = Table::new(SPECTRUM_HEADER);
            for (w, row) in grid.iter().zip(&levels) {
                for (i, e) in row.iter().enumerate() {
                    table.push(vec![Cell::Float(w / wq), Cell::Int(i), Cell::Float(e / wq)]);
                }
            }
            summary.push(("points", grid.len().to_string()));
            summary.push(("levels", n_levels.to_string()));
            table
        }
        ExperimentParams::Anticrossing {
            bracket,
            state_a,
            state_b,
        } => {
            let r = find_anticrossing(system, state_a, state_b, *bracket)?;
            let mut table = Table::new(ANTICROSSING_HEADER);
            for overlaps in &r.hybridized_overlaps {
                table.push(vec![
                    Cell::Float(r.omega_c_star / wq),
                    Cell::Float(r.gap / wq),
                    Cell::Float(overlaps[0]),
                    Cell::Float(overlaps[1]),
                ]);
            }
            summary.push((
                "level_pair",
                format!("{}, {}", r.level_pair.0, r.level_pair.1),
            ));
            summary.push(("omega_c_star_over_wq", f(r.omega_c_star / wq)));
            summary.push(("gap_over_wq", f(r.gap / wq)));
            table
        }
        ExperimentParams::EffectiveCoupling { lambda_grid } => {
            let rows = compare_with_exact(system, lambda_grid)?;
            let mut table = Table::new(COUPLING_HEADER);
            for r in &rows {
                table.push(vec![
                    Cell::Float(r.lambda / wq),
                    Cell::Float(r.two_omega_analytic / wq),
                    Cell::Float(r.two_omega_exact / wq),
                ]);
            }
            let worst = rows
                .iter()
                .map(|r| r.relative_deviation())
                .fold(0.0, f64::max);
            summary.push(("max_relative_deviation", f(worst)));
            table
        }
        ExperimentParams::Dynamics {
            start,
            bracket,
            duration_pi,
            n_samples,
            numerics,
        } => {
            let evolve = numerics.evolve_options();
            match start {
                StartState::Hybrid => {
                    let run = joint_absorption(
                        system,
                        Some(*bracket),
                        *duration_pi,
                        *n_samples,
                        &evolve,
                    )?;
                    let omega = run.resonance.omega_eff();
                    summary.push(("omega_c_star_over_wq", f(run.resonance.config.omega_c / wq)));
                    summary.push(("omega_eff_over_wq", f(omega / wq)));
                    summary.push(("peak_qubit1_CC", f(peak(run.record.qubit_excitation(0)))));
                    summary.push(("accepted_steps", run.record.stats.accepted.to_string()));
                    dynamics_table(&run.record, omega, wq)
                }
                StartState::Ground => {
                    let options = ProtocolOptions {
                        bracket: Some(*bracket),
                        after_pulse_pi: *duration_pi,
                        n_samples: *n_samples,
                        calibration: CalibrationOptions {
                            evolve: EvolveOptions {
                                check_invariants: false,
                                ..evolve.clone()
                            },
                            ..CalibrationOptions::default()
                        },
                        evolve,
                    };
                    let run = full_protocol(system, &options)?;
                    let omega = run.resonance.omega_eff();
                    let pulse = &run.calibration.pulse;
                    summary.push(("omega_c_star_over_wq", f(run.resonance.config.omega_c / wq)));
                    summary.push(("omega_eff_over_wq", f(omega / wq)));
                    summary.push(("pulse_amplitude", f(pulse.amplitude)));
                    summary.push(("pulse_width_wq", f(pulse.width * wq)));
                    summary.push(("pulse_center_wq", f(pulse.center_time * wq)));
                    summary.push(("pulse_carrier_over_wq", f(pulse.carrier_frequency / wq)));
                    summary.push(("pulse_transfer", f(run.calibration.transfer)));
                    summary.push(("pulse_leakage", f(run.calibration.leakage)));
                    summary.push(("pulse_end_wq", f(run.pulse_end * wq)));
                    summary.push(("peak_qubit1_CC", f(peak(run.record.qubit_excitation(0)))));
                    summary.push(("accepted_steps", run.record.stats.accepted.to_string()));
                    dynamics_table(&run.record, omega, wq)
                }
            }
        }
        ExperimentParams::Calibrate {
            bracket,
            scan,
            numerics,
        } => {
            let resonance = locate_resonance(system, Some(*bracket))?;
            let cfg = &resonance.config;
            let spectrum = diagonalize(&static_hamiltonian(cfg)?)?;
            let pair = resonance.anticrossing.level_pair;
            let (tau, omega_d, _) = pulse_timing(&spectrum, pair);
            let options = CalibrationOptions {
                scan: scan.clone(),
                evolve: EvolveOptions {
                    check_invariants: false,
                    ..numerics.evolve_options()
                },
                ..CalibrationOptions::default()
            };
            let cal = calibrate_pi_pulse(cfg, pair, tau, omega_d, &options)?;
            let mut table = Table::new(CALIBRATION_HEADER);
            for &(a, transfer) in &cal.scan {
                table.push(vec![Cell::Float(a), Cell::Float(transfer), Cell::Int(0)]);
            }
            table.push(vec![
                Cell::Float(cal.pulse.amplitude),
                Cell::Float(cal.transfer),
                Cell::Int(1),
            ]);
            summary.push(("omega_c_star_over_wq", f(cfg.omega_c / wq)));
            summary.push(("pulse_width_wq", f(tau * wq)));
            summary.push(("pulse_carrier_over_wq", f(omega_d / wq)));
            summary.push(("pulse_amplitude", f(cal.pulse.amplitude)));
            summary.push(("pulse_transfer", f(cal.transfer)));
            summary.push(("pulse_leakage", f(cal.leakage)));
            summary.push(("leakage_level", cal.leakage_level.to_string()));
            table
        }
        ExperimentParams::Ghz { bracket, numerics } => {
            let r = ghz_fidelity(system, Some(*bracket), &numerics.evolve_options())?;
            let omega = r.resonance.omega_eff();
            let mut table = Table::new(GHZ_HEADER);
            table.push(vec![
                Cell::Float(r.fidelity),
                Cell::Float(r.phase),
                Cell::Float(r.time * wq),
                Cell::Float(omega / wq),
            ]);
            summary.push(("fidelity", f(r.fidelity)));
            table
        }
    };
    Ok(RunOutput { table, summary })
}

fn write(path: &Path, text: &str) -> Result<(), RunError> {
    fs::write(path, text).map_err(|source| RunError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Runs `spec`, writing the CSV to `out` and the manifest next to it.
pub fn run(spec: &ExperimentSpec, out: &Path) -> Result<RunReport, RunError> {
    let started = Instant::now();
    let output = execute(spec)?;
    let wall_time = started.elapsed();
    write(out, &output.table.to_csv())?;

    let resolved = ExperimentSpec {
        output_path: Some(out.to_path_buf()),
        ..spec.clone()
    };
    let mut manifest = String::from("# run manifest\n[run]\n");
    let run_keys = [
        ("kind", spec.kind().to_string()),
        ("library_version", rabi_core::VERSION.to_string()),
        ("threads", rayon::current_num_threads().to_string()),
        ("wall_time_s", format_float(wall_time.as_secs_f64())),
        ("rows", output.table.rows.len().to_string()),
    ];
    for (k, v) in run_keys {
        manifest.push_str(&format!("{k} = {v}\n"));
    }
    manifest.push_str("\n[result]\n");
    for (k, v) in &output.summary {
        manifest.push_str(&format!("{k} = {v}\n"));
    }
    manifest.push('\n');
    manifest.push_str(&render(&resolved));
    let manifest_path = manifest_path(out);
    write(&manifest_path, &manifest)?;

    Ok(RunReport {
        csv_path: out.to_path_buf(),
        manifest_path,
        rows: output.table.rows.len(),
        wall_time,
    })
}
