//! Byte-deterministic CSV and JSON persistence for Monte Carlo studies.
//!
//! Timing is measured per replication but written as zero unless explicitly
//! requested: repeat executions must produce identical bytes.

use std::path::Path;

use crate::error::Result;

use super::{McStudy, RunResult};

/// Stable CSV header; one row per (replication, probe).
pub const CSV_HEADER: &str =
    "rep,n,link,beta,tau,sigma,seed,sup_ratio,an_event,probe_x,probe_err,runtime_ms";

fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{v}")
    }
}

/// Render the study as CSV text.
pub fn csv_text(study: &McStudy, include_timing: bool) -> String {
    let mut out = String::with_capacity(64 * (study.results.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    let cfg = &study.config;
    for r in &study.results {
        let probes: Vec<(String, String)> = if r.probe_errors.is_empty() {
            vec![(String::new(), String::new())]
        } else {
            r.probe_errors
                .iter()
                .map(|(x, e)| (fmt_f64(*x), fmt_f64(*e)))
                .collect()
        };
        for (px, pe) in probes {
            let runtime = if include_timing { r.runtime_ms } else { 0.0 };
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{}\n",
                r.rep,
                r.n,
                cfg.link.name(),
                fmt_f64(cfg.beta),
                fmt_f64(cfg.tau),
                fmt_f64(cfg.sigma),
                cfg.seed,
                fmt_f64(r.sup_ratio),
                u8::from(r.an_event),
                px,
                pe,
                fmt_f64(runtime),
            ));
        }
    }
    out
}

/// Render the study as a JSON mirror with the config embedded.
pub fn json_text(study: &McStudy, include_timing: bool) -> Result<String> {
    let sanitized: Vec<RunResult> = study
        .results
        .iter()
        .map(|r| RunResult {
            runtime_ms: if include_timing { r.runtime_ms } else { 0.0 },
            ..r.clone()
        })
        .collect();
    let doc = serde_json::json!({
        "config": study.config,
        "results": sanitized,
        "summaries": study.summaries,
        "failures": study.failures,
    });
    serde_json::to_string_pretty(&doc).map_err(|e| crate::error::Error::Io(e.to_string()))
}

/// Write the configured outputs; returns the paths written.
pub fn write_outputs(
    study: &McStudy,
    csv: Option<&Path>,
    json: Option<&Path>,
    include_timing: bool,
) -> Result<Vec<std::path::PathBuf>> {
    let mut written = Vec::new();
    if let Some(path) = csv {
        std::fs::write(path, csv_text(study, include_timing))?;
        written.push(path.to_path_buf());
    }
    if let Some(path) = json {
        std::fs::write(path, json_text(study, include_timing)?)?;
        written.push(path.to_path_buf());
    }
    Ok(written)
}

/// A parsed CSV row (re-import side of the round trip).
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub rep: u64,
    pub n: u64,
    pub link: String,
    pub sup_ratio: f64,
    pub an_event: bool,
    pub probe_x: Option<f64>,
    pub probe_err: Option<f64>,
}

/// Parse exported CSV text back into rows.
pub fn import_csv(text: &str) -> Result<Vec<CsvRow>> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| crate::error::Error::Parse("empty CSV".into()))?;
    if header != CSV_HEADER {
        return Err(crate::error::Error::Parse(format!(
            "unexpected CSV header '{header}'"
        )));
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 12 {
            return Err(crate::error::Error::Parse(format!(
                "line {}: expected 12 fields, found {}",
                lineno + 2,
                fields.len()
            )));
        }
        let parse_f64 = |s: &str| -> Result<f64> {
            match s {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                _ => s
                    .parse()
                    .map_err(|_| crate::error::Error::Parse(format!("bad float '{s}'"))),
            }
        };
        rows.push(CsvRow {
            rep: fields[0]
                .parse()
                .map_err(|_| crate::error::Error::Parse("bad rep".into()))?,
            n: fields[1]
                .parse()
                .map_err(|_| crate::error::Error::Parse("bad n".into()))?,
            link: fields[2].to_string(),
            sup_ratio: parse_f64(fields[7])?,
            an_event: fields[8] == "1",
            probe_x: if fields[9].is_empty() {
                None
            } else {
                Some(parse_f64(fields[9])?)
            },
            probe_err: if fields[10].is_empty() {
                None
            } else {
                Some(parse_f64(fields[10])?)
            },
        });
    }
    Ok(rows)
}
