//! Versioned JSON report and its plain-text rendering.

use std::fmt::Write as _;

use clusterperm::missing::Biclique;
use clusterperm::sim::McSummary;
use clusterperm::TestReport;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::args::RunConfig;

pub const SCHEMA_VERSION: u32 = 1;

/// A float that serializes infinities and NaN as the strings `"inf"`,
/// `"-inf"` and `"nan"`, since JSON numbers cannot carry them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Real(pub f64);

impl Serialize for Real {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.0 {
            v if v.is_finite() => s.serialize_f64(v),
            v if v.is_nan() => s.serialize_str("nan"),
            v if v > 0.0 => s.serialize_str("inf"),
            _ => s.serialize_str("-inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Real {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(Real(v)),
            Repr::Str(s) => match s.as_str() {
                "inf" => Ok(Real(f64::INFINITY)),
                "-inf" => Ok(Real(f64::NEG_INFINITY)),
                "nan" => Ok(Real(f64::NAN)),
                other => Err(serde::de::Error::custom(format!("not a number: {other:?}"))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Software {
    pub name: String,
    pub version: String,
}

impl Software {
    pub fn current() -> Self {
        Software { name: "clusterperm".into(), version: env!("CARGO_PKG_VERSION").into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub software: Software,
    pub config: RunConfig,
    /// SHA-256 of the configuration with output-only knobs cleared.
    pub config_digest: String,
    pub result: Payload,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Payload {
    Test(TestResult),
    Ci(CiResult),
    Missing(MissingResult),
    Irregular(IrregularResult),
    Simulation(SimulationResult),
    Biclique(BicliqueResult),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub design: String,
    pub pval: f64,
    pub reject: bool,
    pub alpha: f64,
    pub num_perms: usize,
    pub alpha_floor: f64,
    pub n_obs: usize,
    pub b0: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub min_a: Real,
    pub degenerate: bool,
    pub seed: u64,
}

impl TestResult {
    pub fn from_report(design: &str, report: &TestReport, alpha: f64, n_obs: usize, b0: Vec<f64>, seed: u64) -> Self {
        TestResult {
            design: design.into(),
            pval: report.pval,
            reject: report.pval <= alpha,
            alpha,
            num_perms: report.num_perms,
            alpha_floor: report.alpha_floor,
            n_obs,
            b0,
            a: report.a.clone(),
            b: report.b.clone(),
            min_a: Real(report.min_a),
            degenerate: report.degenerate,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CiResult {
    pub lower: Real,
    pub upper: Real,
    pub alpha: f64,
    pub num_perms: usize,
    pub open_lower: bool,
    pub open_upper: bool,
    pub empty: bool,
    pub estimate: Real,
    pub scale: Real,
    pub grid_half_width: Real,
    pub grid_points: usize,
    pub expansions: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissingResult {
    pub test: TestResult,
    pub blocks: Vec<Biclique>,
    pub cell_count: usize,
    pub observed_cells: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrregularResult {
    pub median_pval: f64,
    pub reject: bool,
    pub alpha: f64,
    pub l0: usize,
    pub num_perms: usize,
    pub repeats: usize,
    pub pvals: Vec<f64>,
    pub blocks: Vec<Biclique>,
    pub eligible_cells: usize,
    pub retained_obs: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimRow {
    pub label: String,
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub phi2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rho: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub summary: Option<McSummary>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub median_side: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub panel: String,
    pub num_perms: Option<usize>,
    pub rows: Vec<SimRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BicliqueResult {
    pub n_rows: usize,
    pub n_cols: usize,
    pub observed_cells: usize,
    pub largest: Biclique,
    pub blocks: Vec<Biclique>,
    pub cell_count: usize,
}

fn real(v: Real) -> String {
    match v.0 {
        x if x.is_finite() => format!("{x:.6}"),
        x if x.is_nan() => "nan".into(),
        x if x > 0.0 => "inf".into(),
        _ => "-inf".into(),
    }
}

fn sides(blocks: &[Biclique]) -> String {
    blocks
        .iter()
        .map(|b| format!("{}x{}", b.rows.len(), b.cols.len()))
        .collect::<Vec<_>>()
        .join(", ")
}

fn test_lines(out: &mut String, t: &TestResult) {
    let _ = writeln!(out, "design      {}", t.design);
    let _ = writeln!(out, "N           {}", t.n_obs);
    let _ = writeln!(out, "K           {}", t.num_perms);
    let _ = writeln!(out, "pval        {:.6}", t.pval);
    let _ = writeln!(out, "reject      {} at alpha = {}", t.reject, t.alpha);
    if t.degenerate {
        let _ = writeln!(out, "degenerate  true");
    }
}

/// Plain-text view of a report.
pub fn render_text(report: &Report) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} {}  (config {})", report.software.name, report.software.version, &report.config_digest[..12]);
    match &report.result {
        Payload::Test(t) => test_lines(&mut out, t),
        Payload::Ci(c) => {
            let _ = writeln!(out, "K           {}", c.num_perms);
            let _ = writeln!(out, "estimate    {}", real(c.estimate));
            if c.empty {
                let _ = writeln!(out, "interval    empty on the evaluated grid");
            } else {
                let _ = writeln!(out, "interval    [{}, {}] at level {}", real(c.lower), real(c.upper), 1.0 - c.alpha);
            }
        }
        Payload::Missing(m) => {
            test_lines(&mut out, &m.test);
            let _ = writeln!(out, "blocks      {}", sides(&m.blocks));
            let _ = writeln!(out, "cells used  {} of {}", m.cell_count, m.observed_cells);
        }
        Payload::Irregular(r) => {
            let _ = writeln!(out, "L0          {}", r.l0);
            let _ = writeln!(out, "K           {}", r.num_perms);
            let _ = writeln!(out, "blocks      {}", sides(&r.blocks));
            let _ = writeln!(out, "median pval {:.6} over {} repeats", r.median_pval, r.repeats);
            let _ = writeln!(out, "reject      {} at alpha = {}", r.reject, r.alpha);
        }
        Payload::Simulation(s) => {
            let _ = writeln!(out, "panel {}", s.panel);
            let _ = writeln!(out, "{:<28} {:>4} {:>9} {:>8} {:>7}", "setting", "n", "rate (%)", "se (%)", "reps");
            for row in &s.rows {
                match (&row.summary, row.median_side) {
                    (Some(m), _) => {
                        let _ = writeln!(
                            out,
                            "{:<28} {:>4} {:>9.2} {:>8.2} {:>7}",
                            row.label,
                            row.n,
                            100.0 * m.rate,
                            100.0 * m.mc_se,
                            m.reps
                        );
                    }
                    (None, Some(side)) => {
                        let _ = writeln!(out, "{:<28} {:>4} median side {side}", row.label, row.n);
                    }
                    _ => {}
                }
            }
        }
        Payload::Biclique(b) => {
            let _ = writeln!(out, "mask        {}x{} with {} observed cells", b.n_rows, b.n_cols, b.observed_cells);
            let _ = writeln!(out, "largest     {}x{} rows {:?} cols {:?}", b.largest.rows.len(), b.largest.cols.len(), b.largest.rows, b.largest.cols);
            let _ = writeln!(out, "blocks      {}", sides(&b.blocks));
            let _ = writeln!(out, "cells used  {}", b.cell_count);
        }
    }
    for note in &report.notes {
        let _ = writeln!(out, "note: {note}");
    }
    out
}
