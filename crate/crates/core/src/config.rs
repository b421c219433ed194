// Copyright 2026 coldsqueeze Contributors
// SPDX-License-Identifier: Apache-2.0

//! Run configuration: `section.key = value` lines with `#` comments, merged as
//! defaults < file < command-line overrides.
//!
//! Every value is checked when the configuration is built and all problems are
//! reported together, each with its key and the line (or flag) that set it.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use crate::cloud::{CloudParams, McEstimator};
use crate::error::Error;
use crate::experiment::{ScanConfig, ScanMode};
use crate::model::{Branch, ModelParams, Transverse};
use crate::noise::DetectionChain;

/// Where a value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Line(usize),
    Flag,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub key: Option<String>,
    pub origin: Option<Origin>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.origin, &self.key) {
            (Some(Origin::Line(n)), Some(k)) => write!(f, "line {n}: {k}: ")?,
            (Some(Origin::Line(n)), None) => write!(f, "line {n}: ")?,
            (Some(Origin::Flag), Some(k)) => write!(f, "--{k}: ")?,
            (Some(Origin::Flag), None) => write!(f, "flag: ")?,
            (None, Some(k)) => write!(f, "{k}: ")?,
            (None, None) => {}
        }
        f.write_str(&self.message)
    }
}

/// All errors found while reading or building a configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigErrors(pub Vec<ConfigError>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

impl ConfigErrors {
    fn single(key: Option<&str>, origin: Option<Origin>, message: impl Into<String>) -> Self {
        ConfigErrors(vec![ConfigError {
            key: key.map(str::to_owned),
            origin,
            message: message.into(),
        }])
    }
}

/// Unvalidated key–value pairs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<String, (String, Origin)>,
}

const SECTIONS: [&str; 5] = ["model", "cloud", "scan", "detection", "output"];

fn split_pair(s: &str) -> Result<(String, String), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| "expected `key = value`".to_string())?;
    let (k, v) = (k.trim(), v.trim());
    match k.split_once('.') {
        Some((sec, name)) if SECTIONS.contains(&sec) && !name.is_empty() => {}
        _ => {
            return Err(format!(
                "key `{k}` must be `section.name` with section one of {}",
                SECTIONS.join(", ")
            ))
        }
    }
    if v.is_empty() {
        return Err(format!("no value for `{k}`"));
    }
    Ok((k.to_string(), v.to_string()))
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigErrors> {
        let mut raw = RawConfig::default();
        let mut errors = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let n = i + 1;
            let body = line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            match split_pair(body) {
                Ok((k, v)) => {
                    if let Some((_, Origin::Line(first))) = raw.entries.get(&k) {
                        errors.push(ConfigError {
                            key: Some(k),
                            origin: Some(Origin::Line(n)),
                            message: format!("duplicate key, first set on line {first}"),
                        });
                    } else {
                        raw.entries.insert(k, (v, Origin::Line(n)));
                    }
                }
                Err(message) => errors.push(ConfigError {
                    key: None,
                    origin: Some(Origin::Line(n)),
                    message,
                }),
            }
        }
        if errors.is_empty() {
            Ok(raw)
        } else {
            Err(ConfigErrors(errors))
        }
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigErrors> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            ConfigErrors::single(None, None, format!("cannot read {}: {e}", path.display()))
        })?;
        RawConfig::parse(&text)
    }

    /// Applies `section.key=value`, replacing any file value.
    pub fn set_override(&mut self, arg: &str) -> Result<(), ConfigError> {
        let (k, v) = split_pair(arg).map_err(|message| ConfigError {
            key: None,
            origin: Some(Origin::Flag),
            message,
        })?;
        self.entries.insert(k, (v, Origin::Flag));
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(v, _)| v.as_str())
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

/// Monte Carlo settings for the ballistic cloud oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct McSettings {
    /// Beam waist; `None` means `sigma_r / 15`.
    pub waist_m: Option<f64>,
    pub samples: usize,
    pub t_max_s: f64,
    pub t_points: usize,
    pub estimator: McEstimator,
    pub seed: u64,
}

impl McSettings {
    pub fn times(&self) -> Vec<f64> {
        if self.t_points == 1 {
            return vec![0.0];
        }
        (0..self.t_points)
            .map(|i| self.t_max_s * i as f64 / (self.t_points - 1) as f64)
            .collect()
    }
}

/// Analysis-frequency grid `[0, max_hz]` for spectrum output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumGrid {
    pub max_hz: f64,
    pub points: usize,
}

impl SpectrumGrid {
    pub fn frequencies(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![0.0];
        }
        (0..self.points)
            .map(|i| self.max_hz * i as f64 / (self.points - 1) as f64)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelParams,
    /// Upper end of the turning-point search; `None` uses the model default.
    pub x_max: Option<f64>,
    /// Stable branch reported when several coexist.
    pub branch: Branch,
    pub fock_cutoff: usize,
    /// Drive intensity (saturation units) per watt of probe power.
    pub power_to_y: f64,
    pub cloud: CloudParams,
    pub mc: McSettings,
    /// Release-scan settings; piezo defaults are applied by [`RunConfig::scan_for`].
    pub scan: ScanConfig,
    duration_s: Option<f64>,
    pub spectrum: SpectrumGrid,
    pub detection: DetectionChain,
    /// Output path; `-` is stdout.
    pub output: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::build(&RawConfig::default()).expect("defaults are valid")
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, ConfigErrors> {
        let mut raw = match path {
            Some(p) => RawConfig::from_file(p)?,
            None => RawConfig::default(),
        };
        let errors: Vec<_> = overrides
            .iter()
            .filter_map(|o| raw.set_override(o).err())
            .collect();
        if !errors.is_empty() {
            return Err(ConfigErrors(errors));
        }
        RunConfig::build(&raw)
    }

    pub fn build(raw: &RawConfig) -> Result<Self, ConfigErrors> {
        let mut b = Builder {
            raw,
            seen: BTreeSet::new(),
            errors: Vec::new(),
        };
        let dm = ModelParams::default();
        let transverse = b.choice("model.transverse", "plane", &["plane", "gaussian"]);
        let bins = b.count("model.bins", 16, 1);
        let model = ModelParams {
            c: b.real("model.C", dm.c, Range::NonNeg),
            delta: b.real("model.delta", dm.delta, Range::Any),
            theta: b.real("model.theta", dm.theta, Range::Any),
            kappa_hz: b.real("model.kappa_hz", dm.kappa_hz, Range::Pos),
            gamma_hz: b.real("model.gamma_hz", dm.gamma_hz, Range::Pos),
            gamma_par_ratio: b.real("model.gamma_par_ratio", dm.gamma_par_ratio, Range::Pos),
            n_atoms: b.real("model.n_atoms", dm.n_atoms, Range::AtLeastOne),
            loss_fraction: b.real("model.loss_fraction", dm.loss_fraction, Range::Fraction),
            transverse: if transverse == "gaussian" {
                Transverse::GaussianBins(bins)
            } else {
                Transverse::PlaneWave
            },
        };
        let x_max = b.opt_real("model.x_max", Range::Pos);
        let branch = match b
            .choice("model.branch", "lower", &["lower", "upper"])
            .as_str()
        {
            "upper" => Branch::Upper,
            _ => Branch::Lower,
        };
        let fock_cutoff = b.count("model.fock_cutoff", 15, 1);
        let power_to_y = b.real("model.power_to_y", 8.9e6, Range::Pos);

        let dc = CloudParams::default();
        let cloud = CloudParams {
            sigma_r: b.real("cloud.sigma_r", dc.sigma_r, Range::Pos),
            temp_k: b.real("cloud.temp_k", dc.temp_k, Range::Pos),
            mass_kg: b.real("cloud.mass_kg", dc.mass_kg, Range::Pos),
            c0: b.real("cloud.c0", dc.c0, Range::NonNeg),
            g_grav: b.real("cloud.g_grav", dc.g_grav, Range::NonNeg),
        };
        let mc = McSettings {
            waist_m: b.opt_real("cloud.waist_m", Range::Pos),
            samples: b.count("cloud.mc_samples", 1_000_000, 10_000),
            t_max_s: b.real("cloud.t_max_s", 30e-3, Range::Pos),
            t_points: b.count("cloud.t_points", 31, 1),
            estimator: match b
                .choice("cloud.estimator", "conditional", &["conditional", "direct"])
                .as_str()
            {
                "direct" => McEstimator::Direct,
                _ => McEstimator::Conditional,
            },
            seed: b.seed("cloud.seed", 1),
        };

        let ds = ScanConfig::release();
        let dd = DetectionChain::default();
        let detection = DetectionChain {
            eta: b.real("detection.eta", dd.eta, Range::Efficiency),
            photodiode_qe: b.real(
                "detection.photodiode_qe",
                dd.photodiode_qe,
                Range::Efficiency,
            ),
            mode_overlap: b.real("detection.mode_overlap", dd.mode_overlap, Range::Efficiency),
        };
        let drive = b.opt_real("scan.drive_Y", Range::NonNeg);
        let power = b.opt_real("scan.power_w", Range::NonNeg);
        let drive_y = match (drive, power) {
            (Some(_), Some(_)) => {
                b.error(
                    "scan.power_w",
                    "give either scan.drive_Y or scan.power_w, not both",
                );
                None
            }
            (Some(y), None) => Some(y),
            (None, Some(w)) => Some(w * power_to_y),
            (None, None) => None,
        };
        let duration_s = b.opt_real("scan.duration_s", Range::Pos);
        let scan = ScanConfig {
            mode: ScanMode::FreeRelease,
            duration_s: duration_s.unwrap_or(ds.duration_s),
            dt_s: b.real("scan.dt_s", ds.dt_s, Range::Pos),
            drive_y,
            threshold_fraction: b.real(
                "scan.threshold_fraction",
                ds.threshold_fraction,
                Range::Pos,
            ),
            theta0: b.real("scan.theta0", ds.theta0, Range::Any),
            theta_rate: b.real(
                "scan.theta_rate",
                ScanConfig::piezo().theta_rate,
                Range::Any,
            ),
            lo_freq_hz: b.real("scan.lo_freq_hz", ds.lo_freq_hz, Range::Pos),
            lo_phase0: b.real("scan.lo_phase0", ds.lo_phase0, Range::Any),
            omega_hz: b.real("scan.omega_hz", ds.omega_hz, Range::NonNeg),
            rel_noise: b.real("scan.rel_noise", ds.rel_noise, Range::Fraction),
            vbw_hz: b.real("scan.vbw_hz", ds.vbw_hz, Range::Pos),
            elec_floor: b.real("scan.elec_floor", ds.elec_floor, Range::NonNeg),
            eta: detection.eta,
            seed: b.seed("scan.seed", ds.seed),
        };
        let spectrum = SpectrumGrid {
            max_hz: b.real("scan.omega_max_hz", 10.0 * model.kappa_hz, Range::Pos),
            points: b.count("scan.omega_points", 201, 1),
        };
        let output = b.text("output.file", "-");

        for k in raw.keys() {
            if !b.seen.contains(k) {
                let origin = raw.entries[k].1;
                b.errors.push(ConfigError {
                    key: Some(k.to_string()),
                    origin: Some(origin),
                    message: "unknown key".into(),
                });
            }
        }
        if !b.errors.is_empty() {
            return Err(ConfigErrors(b.errors));
        }

        let cfg = RunConfig {
            model,
            x_max,
            branch,
            fock_cutoff,
            power_to_y,
            cloud,
            mc,
            scan,
            duration_s,
            spectrum,
            detection,
            output,
        };
        // Cross-field checks of the target types.
        let mut errors = Vec::new();
        let checks: [(&str, Result<(), Error>); 4] = [
            ("model", cfg.model.validate()),
            ("cloud", cfg.cloud.validate()),
            ("scan", cfg.scan_for(ScanMode::FreeRelease).validate()),
            ("detection", cfg.detection.validate()),
        ];
        for (section, r) in checks {
            if let Err(e) = r {
                errors.push(cfg.describe(raw, section, e));
            }
        }
        if errors.is_empty() {
            Ok(cfg)
        } else {
            Err(ConfigErrors(errors))
        }
    }

    /// Scan settings for `mode`, with that mode's default duration unless one was set.
    pub fn scan_for(&self, mode: ScanMode) -> ScanConfig {
        let base = match mode {
            ScanMode::FreeRelease => ScanConfig::release(),
            ScanMode::PiezoSweep => ScanConfig::piezo(),
        };
        ScanConfig {
            mode,
            duration_s: self.duration_s.unwrap_or(base.duration_s),
            ..self.scan.clone()
        }
    }

    fn describe(&self, raw: &RawConfig, section: &str, e: Error) -> ConfigError {
        let key = match &e {
            Error::InvalidParam { name, .. } => Some(match (section, *name) {
                ("model", "c") => "model.C".to_string(),
                ("model", "transverse") => "model.bins".to_string(),
                ("scan", "drive_y") => "scan.drive_Y".to_string(),
                ("scan", "eta") => "detection.eta".to_string(),
                (s, n) => format!("{s}.{n}"),
            }),
            _ => None,
        };
        let origin = key
            .as_ref()
            .and_then(|k| raw.entries.get(k))
            .map(|(_, o)| *o);
        let message = match e {
            Error::InvalidParam { reason, .. } => reason,
            other => other.to_string(),
        };
        ConfigError {
            key,
            origin,
            message,
        }
    }
}

#[derive(Clone, Copy)]
enum Range {
    Any,
    NonNeg,
    Pos,
    AtLeastOne,
    /// `[0, 1)`
    Fraction,
    /// `(0, 1]`
    Efficiency,
}

impl Range {
    fn check(self, v: f64) -> Result<(), &'static str> {
        let ok = v.is_finite()
            && match self {
                Range::Any => true,
                Range::NonNeg => v >= 0.0,
                Range::Pos => v > 0.0,
                Range::AtLeastOne => v >= 1.0,
                Range::Fraction => (0.0..1.0).contains(&v),
                Range::Efficiency => v > 0.0 && v <= 1.0,
            };
        if ok {
            return Ok(());
        }
        Err(match self {
            Range::Any => "must be finite",
            Range::NonNeg => "must be finite and >= 0",
            Range::Pos => "must be finite and > 0",
            Range::AtLeastOne => "must be finite and >= 1",
            Range::Fraction => "must lie in [0, 1)",
            Range::Efficiency => "must lie in (0, 1]",
        })
    }
}

struct Builder<'a> {
    raw: &'a RawConfig,
    seen: BTreeSet<String>,
    errors: Vec<ConfigError>,
}

impl<'a> Builder<'a> {
    fn lookup(&mut self, key: &str) -> Option<(&'a str, Origin)> {
        self.seen.insert(key.to_string());
        let raw: &'a RawConfig = self.raw;
        raw.entries.get(key).map(|(v, o)| (v.as_str(), *o))
    }

    fn push(&mut self, key: &str, origin: Origin, message: impl Into<String>) {
        self.errors.push(ConfigError {
            key: Some(key.to_string()),
            origin: Some(origin),
            message: message.into(),
        });
    }

    fn error(&mut self, key: &str, message: &str) {
        let origin = self.raw.entries.get(key).map(|(_, o)| *o);
        self.errors.push(ConfigError {
            key: Some(key.to_string()),
            origin,
            message: message.into(),
        });
    }

    fn opt_real(&mut self, key: &str, range: Range) -> Option<f64> {
        let (v, origin) = self.lookup(key)?;
        match v.parse::<f64>() {
            Ok(x) => match range.check(x) {
                Ok(()) => Some(x),
                Err(msg) => {
                    self.push(key, origin, format!("{msg}, got {v}"));
                    None
                }
            },
            Err(_) => {
                let msg = format!("expected a number, got `{v}`");
                self.push(key, origin, msg);
                None
            }
        }
    }

    fn real(&mut self, key: &str, default: f64, range: Range) -> f64 {
        self.opt_real(key, range).unwrap_or(default)
    }

    fn count(&mut self, key: &str, default: usize, min: usize) -> usize {
        let Some((v, origin)) = self.lookup(key) else {
            return default;
        };
        match v.parse::<usize>() {
            Ok(n) if n >= min => n,
            Ok(_) => {
                self.push(key, origin, format!("must be >= {min}, got {v}"));
                default
            }
            Err(_) => {
                let msg = format!("expected a non-negative integer, got `{v}`");
                self.push(key, origin, msg);
                default
            }
        }
    }

    fn seed(&mut self, key: &str, default: u64) -> u64 {
        let Some((v, origin)) = self.lookup(key) else {
            return default;
        };
        v.parse().unwrap_or_else(|_| {
            let msg = format!("expected an unsigned 64-bit integer, got `{v}`");
            self.push(key, origin, msg);
            default
        })
    }

    fn choice(&mut self, key: &str, default: &str, options: &[&str]) -> String {
        let Some((v, origin)) = self.lookup(key) else {
            return default.to_string();
        };
        if options.contains(&v) {
            return v.to_string();
        }
        let msg = format!("expected one of {}, got `{v}`", options.join(", "));
        self.push(key, origin, msg);
        default.to_string()
    }

    fn text(&mut self, key: &str, default: &str) -> String {
        self.lookup(key)
            .map_or(default.to_string(), |(v, _)| v.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn build(text: &str) -> Result<RunConfig, ConfigErrors> {
        RunConfig::build(&RawConfig::parse(text)?)
    }

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = build("").unwrap();
        assert_eq!(cfg.model.c, 220.0);
        assert_eq!(cfg.model.delta, -20.0);
        assert_eq!(cfg.model.gamma_hz, 2.6e6);
        assert_eq!(cfg.detection.eta, 0.9);
        assert_eq!(cfg.scan.omega_hz, 5e6);
        assert_eq!(cfg.scan.drive_y, None);
        assert_eq!(cfg, RunConfig::default());
    }

    #[test]
    fn comments_and_whitespace() {
        let cfg = build("# header\n\n  model.C = 12.5   # trailing\nscan.seed=7\n").unwrap();
        assert_eq!(cfg.model.c, 12.5);
        assert_eq!(cfg.scan.seed, 7);
    }

    #[test]
    fn negative_cooperativity_names_key_and_line() {
        let err = build("model.delta = 1\nmodel.C = -1\n").unwrap_err();
        assert_eq!(err.0.len(), 1);
        assert_eq!(err.0[0].key.as_deref(), Some("model.C"));
        assert_eq!(err.0[0].origin, Some(Origin::Line(2)));
        assert!(err.to_string().starts_with("line 2: model.C:"));
    }

    #[test]
    fn all_errors_are_reported() {
        let text = "model.C = abc\nmodel.colour = red\nscan.rel_noise = 1.5\nnot a pair\ndetection.eta = 0\n";
        let err = RawConfig::parse(text).unwrap_err();
        assert_eq!(err.0.len(), 1);
        assert_eq!(err.0[0].origin, Some(Origin::Line(4)));

        let err =
            build("model.C = abc\nmodel.colour = red\nscan.rel_noise = 1.5\ndetection.eta = 0\n")
                .unwrap_err();
        let keys: Vec<_> = err.0.iter().map(|e| e.key.clone().unwrap()).collect();
        assert_eq!(keys.len(), 4, "{err}");
        for k in ["model.C", "model.colour", "scan.rel_noise", "detection.eta"] {
            assert!(keys.iter().any(|x| x == k), "{k} missing from {keys:?}");
        }
    }

    #[test]
    fn flags_override_file() {
        let mut raw = RawConfig::parse("model.delta = -5\nmodel.C = 3\n").unwrap();
        raw.set_override("model.delta=-20").unwrap();
        let cfg = RunConfig::build(&raw).unwrap();
        assert_eq!(cfg.model.delta, -20.0);
        assert_eq!(cfg.model.c, 3.0);
        assert!(raw.set_override("delta=-20").is_err());
    }

    #[test]
    fn duplicate_keys_rejected() {
        let err = RawConfig::parse("model.C = 1\nmodel.C = 2\n").unwrap_err();
        assert!(err.0[0].message.contains("line 1"));
    }

    #[test]
    fn cross_field_checks_name_the_key() {
        let err = build("scan.vbw_hz = 400e3\n").unwrap_err();
        assert_eq!(err.0[0].key.as_deref(), Some("scan.vbw_hz"));
        assert_eq!(err.0[0].origin, Some(Origin::Line(1)));
        let err = build("model.gamma_par_ratio = 3\n").unwrap_err();
        assert_eq!(err.0[0].key.as_deref(), Some("model.gamma_par_ratio"));
    }

    #[test]
    fn drive_from_power() {
        let cfg = build("scan.power_w = 16e-6\n").unwrap();
        assert!((cfg.scan.drive_y.unwrap() - 16e-6 * 8.9e6).abs() < 1e-9);
        assert!(build("scan.power_w = 1e-6\nscan.drive_Y = 3\n").is_err());
    }

    #[test]
    fn mode_defaults() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.scan_for(ScanMode::PiezoSweep).duration_s, 20e-3);
        assert_eq!(cfg.scan_for(ScanMode::FreeRelease).duration_s, 30e-3);
        let cfg = build("scan.duration_s = 1e-3").unwrap();
        assert_eq!(cfg.scan_for(ScanMode::PiezoSweep).duration_s, 1e-3);
    }
}
