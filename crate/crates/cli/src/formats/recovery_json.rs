//! Recovery result documents.

use serde_json::{json, Map, Value};
use tui_core::recover::{GraphComparison, RecoveryResult, TestKind, TestRecord};

/// Run settings echoed into the document.
#[derive(Debug, Clone, PartialEq)]
pub struct RunInfo {
    pub mode: &'static str,
    pub latent_levels: usize,
    pub tol_rel: f64,
    pub marginal_order: Option<usize>,
    /// Sample count for empirical runs.
    pub n: Option<u64>,
    pub rank_rule: Option<String>,
}

fn finite_or_null(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

fn record(r: &TestRecord) -> Value {
    let mut m = Map::new();
    match r.kind {
        TestKind::Pair { first, second } => {
            m.insert("stage".into(), json!(1));
            m.insert("pair".into(), json!([first, second]));
        }
        TestKind::Membership { observed, latent } => {
            m.insert("stage".into(), json!(2));
            m.insert("observed".into(), json!(observed));
            m.insert("latent".into(), json!(latent));
        }
    }
    m.insert("row_group".into(), json!(r.row_group));
    m.insert("col_group".into(), json!(r.col_group));
    m.insert("singular_values".into(), json!(r.singular_values));
    m.insert("rank".into(), json!(r.rank));
    m.insert("bound".into(), json!(r.bound));
    m.insert("gap_ratio".into(), finite_or_null(r.gap_ratio));
    m.insert("passed".into(), json!(r.passed));
    Value::Object(m)
}

pub fn comparison_value(c: &GraphComparison) -> Value {
    json!({
        "exact_match": c.exact_match,
        "column_map": c.column_map,
        "row_hamming": c.row_hamming,
    })
}

pub fn to_value(r: &RecoveryResult, info: &RunInfo, comparison: Option<&GraphComparison>) -> Value {
    let diagnostics: Vec<Value> = r.stage1_records.iter().chain(&r.stage2_records).map(record).collect();
    let mut doc = json!({
        "K_hat": r.k_hat,
        "G_hat": r.g_hat,
        "pure_groups": r.pure_groups,
        "diagnostics": diagnostics,
        "warnings": r.warnings,
        "run": {
            "mode": info.mode,
            "H": info.latent_levels,
            "tol_rel": info.tol_rel,
            "marginal_order": info.marginal_order,
            "n": info.n,
            "rank_rule": info.rank_rule,
        },
    });
    if let Some(c) = comparison {
        doc["comparison"] = comparison_value(c);
    }
    doc
}

pub fn to_string(r: &RecoveryResult, info: &RunInfo, comparison: Option<&GraphComparison>) -> String {
    let mut s = serde_json::to_string_pretty(&to_value(r, info, comparison)).expect("JSON values always serialize");
    s.push('\n');
    s
}
