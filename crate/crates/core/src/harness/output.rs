//! CSV/JSON artifact writers.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::runner::RunResult;
use crate::{Error, Result};

pub const STEP_CSV_HEADER: &str = "step,agent,transmitted,success,reward,buffer,interference";
pub const NETWORK_CSV_HEADER: &str = "step,throughput_raw,throughput_smoothed,fairness";

/// `%.6g`-style formatting: six significant digits, trailing zeros trimmed,
/// exponent form outside `[1e-4, 1e6)`.
pub fn format_g6(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    // Rounding to 6 significant digits decides the exponent.
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Tracks files written for one operation so they can be removed if a
/// later write fails.
#[derive(Debug, Default)]
pub struct ArtifactSet {
    written: Vec<PathBuf>,
}

impl ArtifactSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn paths(&self) -> &[PathBuf] {
        &self.written
    }

    pub fn write_with<F>(&mut self, path: PathBuf, body: F) -> Result<PathBuf>
    where
        F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
    {
        self.written.push(path.clone());
        let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = BufWriter::new(file);
        body(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, path: PathBuf, value: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_with(path, |w| w.write_all(text.as_bytes()))
    }

    /// Deletes everything written so far.
    pub fn remove_all(&mut self) {
        for p in self.written.drain(..) {
            if p.exists() {
                if let Err(e) = fs::remove_file(&p) {
                    log::warn!("could not remove partial artifact {}: {e}", p.display());
                }
            }
        }
    }
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn write_step_csv(w: &mut dyn Write, run: &RunResult) -> std::io::Result<()> {
    writeln!(w, "{STEP_CSV_HEADER}")?;
    for (step, agents) in run.trace.chunks(run.num_agents).enumerate() {
        for (agent, r) in agents.iter().enumerate() {
            writeln!(
                w,
                "{step},{agent},{},{},{},{},{}",
                u8::from(r.transmitted),
                u8::from(r.success),
                r.reward,
                r.buffer,
                format_g6(r.interference)
            )?;
        }
    }
    Ok(())
}

/// Network time series; `raw`, `smoothed` and `fairness` share one length.
pub fn write_network_csv(w: &mut dyn Write, raw: &[f64], smoothed: &[f64], fairness: &[f64]) -> std::io::Result<()> {
    writeln!(w, "{NETWORK_CSV_HEADER}")?;
    for (step, ((r, s), f)) in raw.iter().zip(smoothed).zip(fairness).enumerate() {
        writeln!(w, "{step},{},{},{}", format_g6(*r), format_g6(*s), format_g6(*f))?;
    }
    Ok(())
}

pub fn write_buffer_csv(w: &mut dyn Write, buffers: &[Vec<f64>]) -> std::io::Result<()> {
    let header: Vec<String> = (0..buffers.len()).map(|a| format!("buffer_{a}")).collect();
    writeln!(w, "step,{}", header.join(","))?;
    let steps = buffers.first().map_or(0, Vec::len);
    for step in 0..steps {
        let row: Vec<String> = buffers.iter().map(|b| format_g6(b[step])).collect();
        writeln!(w, "{step},{}", row.join(","))?;
    }
    Ok(())
}

/// One column per named series, aligned by step.
pub fn write_columns_csv(w: &mut dyn Write, names: &[&str], columns: &[Vec<f64>]) -> std::io::Result<()> {
    writeln!(w, "step,{}", names.join(","))?;
    let steps = columns.iter().map(Vec::len).min().unwrap_or(0);
    for step in 0..steps {
        let row: Vec<String> = columns.iter().map(|c| format_g6(c[step])).collect();
        writeln!(w, "{step},{}", row.join(","))?;
    }
    Ok(())
}
