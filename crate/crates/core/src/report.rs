//! Report types and writers. The JSON report carries a `schema_version`;
//! wall-clock timings live in a single `timings` object so that everything
//! else is reproducible byte for byte. CSV floats use 17 significant digits.

use crate::catalog::CatalogParams;
use crate::error::Result;
use crate::family::FamilyClassification;
use crate::flags::GatedFlag;
use crate::hodge::{AngleSample, Harmonicity};
use crate::hopf::{AuditRecord, IsothermalCheck, LegendrianScan};
use crate::search::{SnapResult, Target, TraceEntry};
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::Path;

pub const SCHEMA_VERSION: u32 = 1;

/// A value, or the reason it was not computed (`"gated: …"`).
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Gated<T> {
    Value(T),
    Gated(String),
}

impl<T> Gated<T> {
    pub fn blocked(reason: &str) -> Self {
        Gated::Gated(format!("gated: {reason}"))
    }

    pub fn value(&self) -> Option<&T> {
        match self {
            Gated::Value(v) => Some(v),
            Gated::Gated(_) => None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ImmersionMeta {
    pub name: String,
    pub complex_dim: usize,
    pub link_dim: usize,
    pub genus: Option<u32>,
    pub domain: String,
    pub params: CatalogParams,
    /// Extra charts sampled alongside the primary one (sphere poles).
    pub audit_charts: Vec<String>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct InvariantsSection {
    pub samples: usize,
    pub max_isotropy: f64,
    pub min_f: f64,
    pub max_f: f64,
    pub max_hbar_norm: f64,
    pub min_hbar_norm2: f64,
    pub max_hbar_norm2: f64,
    pub max_hbar_dot_u: f64,
    pub max_jh_dot_h: f64,
    pub max_trace_a_defect: f64,
    pub max_unit_defect: f64,
    pub max_tangency_defect: f64,
    pub max_div_ju: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StationaritySection {
    pub max_abs_s1: f64,
    pub max_abs_s2: f64,
    /// `"exact"` or `"finite_difference"`.
    pub s1_source: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct HopfSection {
    pub isothermal: IsothermalCheck,
    pub max_abs_w: f64,
    pub min_abs_w: f64,
    pub max_cr_residual: Gated<f64>,
    pub legendrian_points: Gated<LegendrianScan>,
    pub audit: Gated<AuditRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AngleSection {
    /// Spread of the unwrapped angle over the grid.
    pub theta_range: f64,
    /// `max |∂_i θ − ⟨JH, u_i⟩|`
    pub gradient_check: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct HodgeSection {
    pub max_d_alpha: f64,
    /// `max |dα residual − 2·isotropy residual|`
    pub max_d_alpha_identity_defect: f64,
    pub max_abs_delta_alpha_coordinate: f64,
    pub max_abs_delta_alpha_closed_form: f64,
    pub max_delta_alpha_difference: f64,
    pub harmonicity: Harmonicity,
    pub period_nodes: usize,
    pub angle: Gated<AngleSection>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrialSummary {
    pub trial: usize,
    pub init_q: [f64; 3],
    pub q: [f64; 3],
    pub a: [f64; 3],
    pub b: [f64; 3],
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SearchSection {
    pub targets: Vec<Target>,
    pub trials: usize,
    pub free_weights: bool,
    pub max_iterations: usize,
    pub converged: usize,
    pub best_trial: usize,
    pub best_residual: f64,
    pub best_snapped: SnapResult,
    pub results: Vec<TrialSummary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AuditEntry {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub tool_version: &'static str,
    pub seed: u64,
    pub immersion: ImmersionMeta,
    pub grid: Vec<usize>,
    pub tolerances: BTreeMap<String, f64>,
    pub analyses: Vec<&'static str>,
    /// Every flag records the residual and tolerance it was derived from.
    pub flags: BTreeMap<&'static str, GatedFlag>,
    pub invariants: Option<InvariantsSection>,
    pub stationarity: Option<StationaritySection>,
    pub hopf: Option<HopfSection>,
    pub hodge: Option<HodgeSection>,
    pub classification: Option<FamilyClassification>,
    pub search: Option<SearchSection>,
    pub skipped: Vec<String>,
    pub audits: Vec<AuditEntry>,
    pub files: Vec<String>,
    /// Seconds per stage; excluded from reproducibility comparisons.
    pub timings: BTreeMap<&'static str, f64>,
}

impl Report {
    pub fn all_audits_pass(&self) -> bool {
        self.audits.iter().all(|a| a.pass)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

/// The report as JSON with the `timings` object removed.
pub fn without_timings(json: &str) -> serde_json::Result<serde_json::Value> {
    let mut v: serde_json::Value = serde_json::from_str(json)?;
    if let Some(obj) = v.as_object_mut() {
        obj.remove("timings");
    }
    Ok(v)
}

/// Locale-independent float with 17 significant digits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes a header and rows of floats.
pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn theta_rows(samples: &[AngleSample]) -> impl Iterator<Item = Vec<String>> + '_ {
    samples.iter().map(|s| {
        let mut row: Vec<String> = s.t.iter().map(|x| fmt_float(*x)).collect();
        row.push(fmt_float(s.theta));
        row.push(s.branch.to_string());
        row.push(fmt_float(s.unwrapped()));
        row
    })
}

pub fn trace_rows(traces: &[(usize, Vec<TraceEntry>)]) -> impl Iterator<Item = Vec<String>> + '_ {
    traces.iter().flat_map(|(trial, trace)| {
        trace.iter().map(move |e| {
            vec![
                trial.to_string(),
                e.iteration.to_string(),
                fmt_float(e.residual),
                fmt_float(e.damping),
            ]
        })
    })
}
