//! Checks over a recorded trace, read from a criteria file.

use serde::{Deserialize, Serialize};

use super::engine::StepRecord;
use crate::error::{Result, VfError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Check {
    TimeMonotone,
    Finite,
    FinalPosition { target: [f64; 3], tol: f64 },
    ProgressMonotone { fixture: String, #[serde(default)] final_min: Option<f64> },
    MaxFusedForce { max: f64 },
    FinalSpeedBelow { max: f64 },
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Criteria {
    #[serde(default)]
    pub check: Vec<Check>,
}

impl Criteria {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| VfError::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub check: String,
    pub pass: bool,
    pub detail: String,
}

fn result(check: &Check, pass: bool, detail: String) -> CheckResult {
    let name = serde_json::to_value(check)
        .ok()
        .and_then(|v| v.get("kind").and_then(|k| k.as_str()).map(String::from))
        .unwrap_or_default();
    CheckResult { check: name, pass, detail }
}

pub fn run_check(check: &Check, trace: &[StepRecord]) -> CheckResult {
    let Some(last) = trace.last() else {
        return result(check, false, "empty trace".into());
    };
    match check {
        Check::TimeMonotone => {
            let bad = trace.windows(2).position(|w| !(w[1].t > w[0].t));
            result(check, bad.is_none(), bad.map(|i| format!("t not increasing at line {}", i + 2)).unwrap_or_default())
        }
        Check::Finite => {
            let bad = trace.iter().position(|r| {
                !(r.pose.iter().chain(&r.twist).chain(&r.fused.mean).all(|v| v.is_finite()))
            });
            result(check, bad.is_none(), bad.map(|i| format!("non-finite state at line {}", i + 1)).unwrap_or_default())
        }
        Check::FinalPosition { target, tol } => {
            let d = (0..3).map(|i| (last.pose[i] - target[i]).powi(2)).sum::<f64>().sqrt();
            result(check, d <= *tol, format!("distance {d:.4e} (tol {tol:e})"))
        }
        Check::ProgressMonotone { fixture, final_min } => {
            let prog: Vec<f64> = trace
                .iter()
                .filter_map(|r| r.fixtures.iter().find(|f| &f.id == fixture).and_then(|f| f.progress))
                .collect();
            if prog.is_empty() {
                return result(check, false, format!("no progress recorded for '{fixture}'"));
            }
            let mono = prog.windows(2).all(|w| w[1] >= w[0] - 1e-9);
            let fin = *prog.last().unwrap();
            let ok = mono && final_min.is_none_or(|m| fin >= m);
            result(check, ok, format!("monotone {mono}, final {fin:.4}"))
        }
        Check::MaxFusedForce { max } => {
            let peak = trace.iter().map(|r| r.fused.mean[..3].iter().map(|v| v * v).sum::<f64>().sqrt()).fold(0.0, f64::max);
            result(check, peak <= *max, format!("peak {peak:.4e}"))
        }
        Check::FinalSpeedBelow { max } => {
            let s = last.twist[..3].iter().map(|v| v * v).sum::<f64>().sqrt();
            result(check, s <= *max, format!("speed {s:.4e}"))
        }
    }
}

pub fn evaluate(criteria: &Criteria, trace: &[StepRecord]) -> Vec<CheckResult> {
    criteria.check.iter().map(|c| run_check(c, trace)).collect()
}
