// Copyright 2026 coldsqueeze Contributors
// SPDX-License-Identifier: Apache-2.0

//! `coldsqueeze`: command-line front end.
//!
//! Settings come from built-in defaults, then `--config FILE`, then
//! `--section.key=value` flags. Results are CSV on stdout or in `--out FILE`;
//! warnings and diagnostics go to stderr. Exit status is 0 on success, 1 for
//! invalid configuration or input, 2 when a computation fails.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use coldsqueeze_core::cloud::{cooperativity_decay, fit_cooperativity, mc_cooperativity_with};
use coldsqueeze_core::config::{ConfigErrors, RunConfig};
use coldsqueeze_core::experiment::{free_release_scan, piezo_scan, ScanMode};
use coldsqueeze_core::io::{fmt_f64, read_samples_file, write_spectra, write_table, write_trace};
use coldsqueeze_core::model::{
    solve_steady_states, turning_points, Branch, ModelParams, SteadyState,
};
use coldsqueeze_core::noise::{
    build_fluctuation_system, drive_amplitude, me_oracle_spectrum, output_spectrum,
};
use coldsqueeze_core::Error;

#[derive(Parser, Debug)]
#[command(
    name = "coldsqueeze",
    version,
    about = "Cavity squeezing by cold two-level atoms",
    after_help = "Any setting can be given as --section.key=value, e.g. --model.C=20 --scan.drive_Y=140."
)]
struct Cli {
    /// Configuration file of `section.key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file (default: stdout). Same as --output.file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Steady states at drive scan.drive_Y.
    Steady,
    /// Turning points of the state equation.
    Turning,
    /// Output noise spectrum of the selected steady state.
    Spectrum,
    /// Free-release scan of the cavity by a falling cloud.
    Release,
    /// Piezo sweep of the cavity detuning at fixed cooperativity.
    Piezo,
    /// Fit the cooperativity decay law to `t_s,c[,sigma_c]` samples.
    Fitc { data: PathBuf },
    /// Ballistic Monte Carlo of the cooperativity decay.
    McCloud,
    /// Single-atom master-equation spectrum at drive scan.drive_Y.
    Oracle,
}

enum Failure {
    Invalid(String),
    Runtime(String),
}

impl From<ConfigErrors> for Failure {
    fn from(e: ConfigErrors) -> Self {
        Failure::Invalid(e.to_string())
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParam { .. } | Error::Domain(_) | Error::Config(_) => {
                Failure::Invalid(e.to_string())
            }
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

const SECTIONS: [&str; 5] = ["model", "cloud", "scan", "detection", "output"];

/// Separates `--section.key=value` flags from the arguments clap handles.
fn split_overrides(args: impl Iterator<Item = String>) -> (Vec<String>, Vec<String>) {
    let mut rest = Vec::new();
    let mut overrides = Vec::new();
    for a in args {
        let is_override = a
            .strip_prefix("--")
            .and_then(|s| s.split_once('.'))
            .is_some_and(|(sec, _)| SECTIONS.contains(&sec));
        if is_override {
            overrides.push(a[2..].to_string());
        } else {
            rest.push(a);
        }
    }
    (rest, overrides)
}

fn main() -> ExitCode {
    let (args, mut overrides) = split_overrides(std::env::args());
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(out) = &cli.out {
        overrides.push(format!("output.file={}", out.display()));
    }
    match run(&cli, &overrides) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}

fn emit(
    cfg: &RunConfig,
    write: impl FnOnce(&mut Vec<u8>) -> coldsqueeze_core::Result<()>,
) -> Result<(), Failure> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    if cfg.output == "-" {
        std::io::stdout()
            .write_all(&buf)
            .map_err(|e| Failure::Runtime(format!("writing stdout: {e}")))
    } else {
        std::fs::write(&cfg.output, &buf)
            .map_err(|e| Failure::Runtime(format!("writing {}: {e}", cfg.output)))
    }
}

fn drive(cfg: &RunConfig) -> Result<f64, Failure> {
    cfg.scan
        .drive_y
        .ok_or_else(|| Failure::Invalid("scan.drive_Y (or scan.power_w) is required".into()))
}

fn selected_state(y: f64, p: &ModelParams, branch: Branch) -> Result<SteadyState, Failure> {
    let roots = solve_steady_states(y, p)?;
    let mut stable = roots.into_iter().filter(|s| s.stable);
    let pick = if branch == Branch::Upper {
        stable.next_back()
    } else {
        stable.next()
    };
    pick.ok_or_else(|| Failure::Runtime(format!("no stable steady state at Y={y}")))
}

fn warn_all(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn run(cli: &Cli, overrides: &[String]) -> Result<(), Failure> {
    let cfg = RunConfig::load(cli.config.as_deref(), overrides)?;
    let p = &cfg.model;
    match &cli.command {
        Command::Steady => {
            let y = drive(&cfg)?;
            let rows: Vec<Vec<String>> = solve_steady_states(y, p)?
                .iter()
                .map(|s| {
                    vec![
                        fmt_f64(y),
                        fmt_f64(s.intensity),
                        fmt_f64(s.x.re),
                        fmt_f64(s.x.im),
                        s.branch.as_str().to_string(),
                        s.stable.to_string(),
                        fmt_f64(s.slope),
                    ]
                })
                .collect();
            emit(&cfg, |w| {
                write_table(
                    w,
                    &["Y", "X", "x_re", "x_im", "branch", "stable", "slope"],
                    &rows,
                )
            })
        }
        Command::Turning => {
            let tp = turning_points(p, cfg.x_max.unwrap_or_else(|| p.default_x_max()));
            let mut rows = Vec::new();
            for &x in &tp.points {
                let y = coldsqueeze_core::state_equation(x, p)?;
                rows.push(vec![fmt_f64(x), fmt_f64(y), tp.bistable.to_string()]);
            }
            emit(&cfg, |w| write_table(w, &["X", "Y", "bistable"], &rows))
        }
        Command::Spectrum => {
            let ss = selected_state(drive(&cfg)?, p, cfg.branch)?;
            let fs = build_fluctuation_system(&ss, p)?;
            if fs.max_growth_rate() > 0.0 {
                eprintln!(
                    "warning: steady state is dynamically unstable; spectrum is not physical"
                );
            }
            let spectra = cfg
                .spectrum
                .frequencies()
                .iter()
                .map(|&om| output_spectrum(&fs, om).map(|q| cfg.detection.apply(&q)))
                .collect::<Result<Vec<_>, _>>()?;
            emit(&cfg, |w| write_spectra(w, &spectra))
        }
        Command::Release => {
            let trace = free_release_scan(&cfg.scan_for(ScanMode::FreeRelease), &cfg.cloud, p)?;
            eprintln!("drive Y = {}", trace.drive_y);
            warn_all(&trace.warnings);
            emit(&cfg, |w| write_trace(w, &trace))
        }
        Command::Piezo => {
            let trace = piezo_scan(&cfg.scan_for(ScanMode::PiezoSweep), p)?;
            for j in &trace.jumps {
                eprintln!(
                    "jump at sample {}: θ {} → {}, X {} → {}",
                    j.index, j.theta_from, j.theta_to, j.x_from, j.x_to
                );
            }
            warn_all(&trace.warnings);
            emit(&cfg, |w| write_trace(w, &trace))
        }
        Command::Fitc { data } => {
            let samples = read_samples_file(data).map_err(|e| match e {
                Error::Io(io) => Failure::Invalid(format!("cannot read {}: {io}", data.display())),
                other => Failure::from(other),
            })?;
            let rep = fit_cooperativity(&samples, cfg.cloud.mass_kg, cfg.cloud.g_grav)?;
            warn_all(&rep.warnings);
            let u = rep.rel_err;
            let row = vec![
                fmt_f64(rep.c0),
                fmt_f64(rep.tau_r),
                fmt_f64(rep.tau_g),
                fmt_f64(rep.cloud.sigma_r),
                fmt_f64(rep.cloud.temp_k),
                fmt_f64(u.c0),
                fmt_f64(u.tau_r),
                fmt_f64(u.tau_g),
                fmt_f64(u.sigma_r),
                fmt_f64(u.temp_k),
                fmt_f64(rep.rms),
                rep.iterations.to_string(),
            ];
            let header = [
                "c0",
                "tau_r",
                "tau_g",
                "sigma_r",
                "temp_k",
                "rel_err_c0",
                "rel_err_tau_r",
                "rel_err_tau_g",
                "rel_err_sigma_r",
                "rel_err_temp_k",
                "rms",
                "iterations",
            ];
            emit(&cfg, |w| write_table(w, &header, &[row]))
        }
        Command::McCloud => {
            let mc = &cfg.mc;
            let waist = mc.waist_m.unwrap_or(cfg.cloud.sigma_r / 15.0);
            let run = mc_cooperativity_with(
                &cfg.cloud,
                waist,
                &mc.times(),
                mc.samples,
                mc.seed,
                mc.estimator,
            )?;
            warn_all(&run.warnings);
            let rows: Vec<Vec<String>> = run
                .points
                .iter()
                .map(|pt| {
                    vec![
                        fmt_f64(pt.t_s),
                        fmt_f64(pt.c),
                        fmt_f64(pt.std_err),
                        fmt_f64(cooperativity_decay(pt.t_s, &cfg.cloud)),
                    ]
                })
                .collect();
            emit(&cfg, |w| {
                write_table(w, &["t_s", "c_mc", "std_err", "c_model"], &rows)
            })
        }
        Command::Oracle => {
            let single = ModelParams {
                n_atoms: 1.0,
                ..p.clone()
            };
            let eps = drive_amplitude(drive(&cfg)?, &single)?;
            let spectra =
                me_oracle_spectrum(&single, eps, &cfg.spectrum.frequencies(), cfg.fock_cutoff)?
                    .iter()
                    .map(|q| cfg.detection.apply(q))
                    .collect::<Vec<_>>();
            emit(&cfg, |w| write_spectra(w, &spectra))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_are_separated() {
        let args = [
            "coldsqueeze",
            "steady",
            "--model.C=0",
            "--out",
            "x.csv",
            "--scan.drive_Y=5",
        ];
        let (rest, ov) = split_overrides(args.iter().map(|s| s.to_string()));
        assert_eq!(rest, ["coldsqueeze", "steady", "--out", "x.csv"]);
        assert_eq!(ov, ["model.C=0", "scan.drive_Y=5"]);
    }

    #[test]
    fn cli_parses() {
        let cli =
            Cli::try_parse_from(["coldsqueeze", "--config", "a.conf", "fitc", "d.csv"]).unwrap();
        assert!(matches!(cli.command, Command::Fitc { .. }));
        assert!(Cli::try_parse_from(["coldsqueeze", "bogus"]).is_err());
    }
}
