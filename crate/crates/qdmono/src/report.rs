//! The JSON verification report.

use std::collections::BTreeMap;

use qdmono_core::numerics::CMat;
use qdmono_core::stokes::{MonodromyData, Residual};
use serde::{Deserialize, Serialize};

use crate::model_file::{cx, matrix_rows, Cx};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualRow {
    pub label: String,
    /// `None` when the computed value was not finite.
    pub value: Option<f64>,
    pub tol: f64,
    pub pass: bool,
    /// The identity holds by construction for the data it was evaluated on.
    #[serde(default)]
    pub tautology: bool,
}

impl ResidualRow {
    pub fn new(label: impl Into<String>, value: f64, tol: f64) -> Self {
        ResidualRow {
            label: label.into(),
            value: value.is_finite().then_some(value),
            tol,
            pass: value.is_finite() && value <= tol,
            tautology: false,
        }
    }

    pub fn from_core(prefix: &str, r: &Residual) -> Self {
        let mut row = ResidualRow::new(format!("{prefix}{}", r.label), r.value, r.tol);
        row.tautology = r.tautology;
        row
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonodromyJson {
    pub v_plus: Vec<Vec<Cx>>,
    pub v_minus: Vec<Vec<Cx>>,
    pub c_matrix: Vec<Vec<Cx>>,
}

impl From<&MonodromyData> for MonodromyJson {
    fn from(d: &MonodromyData) -> Self {
        MonodromyJson { v_plus: matrix_rows(&d.v_plus), v_minus: matrix_rows(&d.v_minus), c_matrix: matrix_rows(&d.c_matrix) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BraidedMatch {
    /// Mutation word such as `["L1", "R2"]`, applied left to right.
    pub word: Vec<String>,
    /// Matched classes after the braid, rows in the basis `[O], …, [O(n)]`.
    pub classes: Vec<Vec<i64>>,
    pub rounding: Vec<f64>,
    /// First twist `a` and signs `s_k` with `F_k = s_k [O(a + k)]`.
    pub twist: i64,
    pub signs: Vec<i64>,
    /// Euler Gram of the sign-normalised re-extracted vectors.
    pub euler_gram: Vec<Vec<Cx>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum KTheorySection {
    NotApplicable,
    NoMatch {
        reason: String,
    },
    Matched {
        /// Integer coordinates of `F_i` with `β_i = Ψ_Q(F_i)`.
        classes: Vec<Vec<i64>>,
        rounding: Vec<f64>,
        chi_gram: Vec<Vec<i64>>,
        #[serde(skip_serializing_if = "Option::is_none")]
        beilinson: Option<BraidedMatch>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub schema_version: u32,
    pub engine_version: String,
    pub model: String,
    pub dim: usize,
    pub eta_angle: f64,
    pub m: Cx,
    pub canonical_coordinates: Vec<Cx>,
    /// `lex_order[k]` is the canonical index in slot `k`.
    pub lex_order: Vec<usize>,
    /// `betas[k]` is the reflection vector of slot `k`, flat coordinates.
    pub betas: Vec<Vec<Cx>>,
    pub euler_gram: Vec<Vec<Cx>>,
    pub analytic: Option<MonodromyJson>,
    pub reflection: Option<MonodromyJson>,
    pub residuals: Vec<ResidualRow>,
    pub ktheory: KTheorySection,
    /// Failures of pipeline stages; the stages after a failure run where possible.
    pub errors: Vec<String>,
    /// Wall-clock seconds per stage; not part of the deterministic content.
    pub timings: BTreeMap<String, f64>,
}

impl VerificationReport {
    pub fn all_pass(&self) -> bool {
        self.errors.is_empty() && self.residuals.iter().all(|r| r.pass)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// The report with timings removed, for comparisons between runs.
    pub fn without_timings(&self) -> Self {
        VerificationReport { timings: BTreeMap::new(), ..self.clone() }
    }

    pub fn residual(&self, label: &str) -> Option<&ResidualRow> {
        self.residuals.iter().find(|r| r.label == label)
    }
}

pub fn vec_json(v: &[qdmono_core::numerics::C64]) -> Vec<Cx> {
    v.iter().map(|z| cx(*z)).collect()
}

pub fn cmat_json(a: &CMat) -> Vec<Vec<Cx>> {
    matrix_rows(a)
}

/// Plain-text residual table.
pub fn residual_table(rows: &[ResidualRow]) -> String {
    let mut out = String::new();
    for r in rows {
        let v = r.value.map_or_else(|| "nan".to_string(), |v| format!("{v:.3e}"));
        let flag = if r.pass { "pass" } else { "FAIL" };
        let taut = if r.tautology { " (by construction)" } else { "" };
        out.push_str(&format!("{flag}  {v:>10} <= {:.0e}  {}{taut}\n", r.tol, r.label));
    }
    out
}
