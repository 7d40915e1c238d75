//! Report rows with CSV and aligned-text rendering.
//!
//! CSV output starts with a `# seed=N` comment line when a seed applies.
//! Floats are written in shortest round-trip form, so parsing a report
//! reproduces the in-memory rows exactly.

use std::io::Write;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::BenchError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Text,
    Csv,
}

/// A row that can be printed as a text table.
pub trait Row: Serialize {
    const HEADERS: &'static [&'static str];
    fn cells(&self) -> Vec<String>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRow {
    pub layer: String,
    pub algo: String,
    pub precision: String,
    pub max_abs_err: f64,
}

impl Row for AccuracyRow {
    const HEADERS: &'static [&'static str] = &["layer", "algo", "precision", "max_abs_err"];

    fn cells(&self) -> Vec<String> {
        vec![
            self.layer.clone(),
            self.algo.clone(),
            self.precision.clone(),
            format!("{:.2E}", self.max_abs_err),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub layer: String,
    pub algo: String,
    pub batch: usize,
    pub msec: f64,
    pub effective_gflops: f64,
}

impl Row for BenchRow {
    const HEADERS: &'static [&'static str] = &["layer", "algo", "batch", "msec", "effective_gflops"];

    fn cells(&self) -> Vec<String> {
        vec![
            self.layer.clone(),
            self.algo.clone(),
            self.batch.to_string(),
            format!("{:.3}", self.msec),
            format!("{:.2}", self.effective_gflops),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityRow {
    pub method: String,
    pub tile: usize,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub source: String,
}

impl Row for ComplexityRow {
    const HEADERS: &'static [&'static str] = &["method", "tile", "alpha'", "beta'", "gamma'", "delta'", "source"];

    fn cells(&self) -> Vec<String> {
        vec![
            self.method.clone(),
            self.tile.to_string(),
            format!("{:.2}", self.alpha),
            format!("{:.2}", self.beta),
            format!("{:.2}", self.gamma),
            format!("{:.2}", self.delta),
            self.source.clone(),
        ]
    }
}

/// Per-layer cost: direct GFLOPs (2 per multiply-add, depth-weighted) and
/// modelled speedups of the two Winograd variants over direct.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerCostRow {
    pub layer: String,
    pub c: usize,
    pub hw: usize,
    pub k: usize,
    pub depth: usize,
    pub gflops: f64,
    pub speedup_f2x2: f64,
    pub speedup_f4x4: f64,
}

impl Row for LayerCostRow {
    const HEADERS: &'static [&'static str] = &["layer", "C", "HxW", "K", "depth", "gflops", "speedup_f2x2", "speedup_f4x4"];

    fn cells(&self) -> Vec<String> {
        let blank = |v: usize| if v == 0 { String::new() } else { v.to_string() };
        vec![
            self.layer.clone(),
            blank(self.c),
            blank(self.hw),
            blank(self.k),
            self.depth.to_string(),
            format!("{:.2}", self.gflops),
            format!("{:.2}", self.speedup_f2x2),
            format!("{:.2}", self.speedup_f4x4),
        ]
    }
}

pub fn write_csv<R: Serialize>(rows: &[R], seed: Option<u64>, out: &mut dyn Write) -> Result<(), BenchError> {
    if let Some(seed) = seed {
        writeln!(out, "# seed={seed}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Parses CSV written by [`write_csv`], returning the seed if present.
pub fn read_csv<R: DeserializeOwned>(text: &str) -> Result<(Option<u64>, Vec<R>), BenchError> {
    let seed = text
        .lines()
        .next()
        .and_then(|l| l.strip_prefix("# seed="))
        .and_then(|s| s.trim().parse().ok());
    let mut rd = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let rows = rd.deserialize().collect::<Result<Vec<R>, _>>()?;
    Ok((seed, rows))
}

pub fn render_text<R: Row>(rows: &[R], seed: Option<u64>) -> String {
    let cells: Vec<Vec<String>> = rows.iter().map(Row::cells).collect();
    let mut widths: Vec<usize> = R::HEADERS.iter().map(|h| h.len()).collect();
    for row in &cells {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |items: Vec<&str>| {
        let mut s = String::new();
        for (i, (c, w)) in items.iter().zip(&widths).enumerate() {
            if i == 0 {
                s += &format!("{c:<w$}");
            } else {
                s += &format!("  {c:>w$}");
            }
        }
        s.trim_end().to_string() + "\n"
    };
    let mut out = String::new();
    if let Some(seed) = seed {
        out += &format!("# seed={seed}\n");
    }
    out += &line(R::HEADERS.to_vec());
    for row in &cells {
        out += &line(row.iter().map(String::as_str).collect());
    }
    out
}

pub fn emit<R: Row>(rows: &[R], seed: Option<u64>, format: Format, out: &mut dyn Write) -> Result<(), BenchError> {
    match format {
        Format::Csv => write_csv(rows, seed, out),
        Format::Text => Ok(out.write_all(render_text(rows, seed).as_bytes())?),
    }
}
