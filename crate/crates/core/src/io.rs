// Copyright 2026 coldsqueeze Contributors
// SPDX-License-Identifier: Apache-2.0

//! CSV formats.
//!
//! * trace: `t_s,c,theta_eff,X,branch,s_meas,s_min,s_max,shot_ref`
//! * spectrum: `omega_hz,v11,v12,v22,s_min,s_max,theta_min`
//! * cooperativity samples (input): `t_s,c[,sigma_c]`
//!
//! Floats are written in shortest round-trip form, so reading a file back gives
//! the exact values and identical inputs give byte-identical files.

use std::io::{Read, Write};
use std::path::Path;

use crate::cloud::CooperativitySample;
use crate::error::{Error, Result};
use crate::experiment::Trace;
use crate::noise::QuadratureSpectrum;

pub const TRACE_HEADER: [&str; 9] = [
    "t_s",
    "c",
    "theta_eff",
    "X",
    "branch",
    "s_meas",
    "s_min",
    "s_max",
    "shot_ref",
];
pub const SPECTRUM_HEADER: [&str; 7] = [
    "omega_hz",
    "v11",
    "v12",
    "v22",
    "s_min",
    "s_max",
    "theta_min",
];

/// Shortest decimal representation that parses back to `v`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:?}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Writes a header and rows of already formatted fields.
pub fn write_table<W: Write>(w: W, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header)?;
    for r in rows {
        out.write_record(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_trace<W: Write>(w: W, trace: &Trace) -> Result<()> {
    let rows: Vec<Vec<String>> = trace
        .samples
        .iter()
        .map(|s| {
            vec![
                fmt_f64(s.t_s),
                fmt_f64(s.c),
                fmt_f64(s.theta_eff),
                fmt_f64(s.x),
                s.branch.as_str().to_string(),
                fmt_f64(s.s_meas),
                fmt_f64(s.s_min),
                fmt_f64(s.s_max),
                fmt_f64(s.shot_ref),
            ]
        })
        .collect();
    write_table(w, &TRACE_HEADER, &rows)
}

pub fn write_spectra<W: Write>(w: W, spectra: &[QuadratureSpectrum]) -> Result<()> {
    let rows: Vec<Vec<String>> = spectra
        .iter()
        .map(|q| {
            [
                q.omega_hz,
                q.v[0][0],
                q.v[0][1],
                q.v[1][1],
                q.s_min,
                q.s_max,
                q.theta_min,
            ]
            .map(fmt_f64)
            .to_vec()
        })
        .collect();
    write_table(w, &SPECTRUM_HEADER, &rows)
}

/// Reads `t_s,c[,sigma_c]` samples.
pub fn read_samples<R: Read>(r: R) -> Result<Vec<CooperativitySample>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(r);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let with_sigma = match header
        .iter()
        .map(String::as_str)
        .collect::<Vec<_>>()
        .as_slice()
    {
        ["t_s", "c"] => false,
        ["t_s", "c", "sigma_c"] => true,
        _ => {
            return Err(Error::Domain(format!(
                "expected header `t_s,c[,sigma_c]`, got `{}`",
                header.join(",")
            )))
        }
    };
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 2;
        let field = |j: usize| -> Result<f64> {
            let s = rec.get(j).unwrap_or("");
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Domain(format!("line {row}: `{}` is not a finite number", s)))
        };
        let t_s = field(0)?;
        let c = field(1)?;
        let sigma_c = if with_sigma { Some(field(2)?) } else { None };
        if t_s < 0.0 || c < 0.0 || sigma_c.is_some_and(|s| s <= 0.0) {
            return Err(Error::Domain(format!(
                "line {row}: need t_s >= 0, c >= 0 and sigma_c > 0"
            )));
        }
        out.push(CooperativitySample { t_s, c, sigma_c });
    }
    Ok(out)
}

pub fn read_samples_file(path: &Path) -> Result<Vec<CooperativitySample>> {
    read_samples(std::fs::File::open(path)?)
}
