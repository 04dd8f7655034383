//! Run reports: JSON on disk, plain-text tables for people. Nothing here
//! depends on wall-clock time, so identical runs give identical files.

use std::fmt::Write as _;

use pproj_core::{LureCertificate, Termination};
use serde::{Deserialize, Serialize};

use crate::config::{Rows, SCHEMA_VERSION};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Pass => 0,
            Verdict::Fail => 1,
            Verdict::Inconclusive => 3,
        }
    }

    /// Fail dominates inconclusive, which dominates pass.
    pub fn combine(self, other: Verdict) -> Verdict {
        use Verdict::*;
        match (self, other) {
            (Fail, _) | (_, Fail) => Fail,
            (Inconclusive, _) | (_, Inconclusive) => Inconclusive,
            _ => Pass,
        }
    }

    fn label(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "FAIL",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantRecord {
    #[serde(rename = "A")]
    pub a: Rows,
    #[serde(rename = "B")]
    pub b: Rows,
    #[serde(rename = "K")]
    pub k: Rows,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CertStatus {
    Certified,
    Infeasible,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub valid: bool,
    pub lmi_max_eig: f64,
    pub p_min_eig: f64,
    pub tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certification {
    pub status: CertStatus,
    pub rho: f64,
    pub eta_star: Option<f64>,
    /// Smallest LMI eigenvalue bound reached when no certificate was found.
    pub best_max_eig: Option<f64>,
    pub verification: Option<Verification>,
}

impl Certification {
    pub fn verdict(&self) -> Verdict {
        match self.status {
            CertStatus::Certified if self.verification.as_ref().is_some_and(|v| v.valid) => {
                Verdict::Pass
            }
            CertStatus::Certified | CertStatus::Infeasible => Verdict::Fail,
            CertStatus::Inconclusive => Verdict::Inconclusive,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeSummary {
    pub pass: bool,
    pub max_violation: f64,
    pub allowed: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovSummary {
    pub pass: bool,
    pub worst_slack: f64,
    pub fd_tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSummary {
    pub point: Vec<f64>,
    pub is_origin: bool,
    pub input_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFitSummary {
    pub eta: f64,
    pub m_fit: f64,
    /// `M_fit·‖x₀‖₂`.
    pub scaled: f64,
    pub bound: Option<f64>,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SafetySummary {
    pub safe: bool,
    pub min_h: f64,
    pub tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub index: usize,
    pub x0: Vec<f64>,
    pub csv: Option<String>,
    pub error: Option<String>,
    pub termination: Option<Termination>,
    pub samples: usize,
    pub final_state: Option<Vec<f64>>,
    /// `min_t ‖u*(x(t))‖₂`.
    pub min_input_norm: Option<f64>,
    pub envelope: Option<EnvelopeSummary>,
    pub lyapunov: Option<LyapunovSummary>,
    pub equilibrium: Option<EquilibriumSummary>,
    pub rate_fit: Option<RateFitSummary>,
    pub safety: Option<SafetySummary>,
    pub pass: bool,
}

impl TrajectorySummary {
    /// Pass iff the run completed and every check that ran passed.
    pub fn derive_pass(&self) -> bool {
        self.error.is_none()
            && self.termination == Some(Termination::Completed)
            && self.envelope.as_ref().is_none_or(|e| e.pass)
            && self.lyapunov.as_ref().is_none_or(|l| l.pass)
            && self.rate_fit.as_ref().is_none_or(|r| r.pass)
            && self.safety.as_ref().is_none_or(|s| s.safe)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema: u32,
    pub command: String,
    pub system: String,
    pub plant: Option<PlantRecord>,
    pub certification: Option<Certification>,
    pub certificate: Option<LureCertificate>,
    pub trajectories: Vec<TrajectorySummary>,
    pub verdict: Verdict,
}

impl RunReport {
    pub fn new(command: &str, system: String) -> Self {
        Self {
            schema: SCHEMA_VERSION,
            command: command.into(),
            system,
            plant: None,
            certification: None,
            certificate: None,
            trajectories: Vec::new(),
            verdict: Verdict::Pass,
        }
    }

    /// Verdict recomputed from the stored margins only.
    pub fn derive_verdict(&self) -> Verdict {
        let mut v = Verdict::Pass;
        if let Some(c) = &self.certification {
            v = v.combine(c.verdict());
        }
        for t in &self.trajectories {
            if !t.derive_pass() {
                v = Verdict::Fail;
            }
        }
        v
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports are plain data");
        s.push('\n');
        s
    }

    pub fn table(&self, source: &str) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "== {source}: {} [{}] verdict {}",
            self.command,
            self.system,
            self.verdict.label()
        )
        .unwrap();
        if let Some(c) = &self.certification {
            let eta = c.eta_star.map_or("-".into(), |e| format!("{e:.6}"));
            let lmi = c
                .verification
                .as_ref()
                .map_or("-".into(), |v| format!("{:.3e}", v.lmi_max_eig));
            writeln!(
                out,
                "certificate: status {:?}, eta* {eta}, rho {}, lmi max eig {lmi}",
                c.status, c.rho
            )
            .unwrap();
        }
        if self.trajectories.is_empty() {
            return out;
        }
        writeln!(
            out,
            "{:>4}  {:<18} {:>11} {:>11} {:>10} {:>11} {:>11} {:>11}  pass",
            "idx",
            "termination",
            "env margin",
            "lyap slack",
            "eq",
            "min |u*|",
            "M_fit|x0|",
            "min h"
        )
        .unwrap();
        for t in &self.trajectories {
            let term = match (&t.error, t.termination) {
                (Some(_), _) => "error".to_string(),
                (None, Some(term)) => format!("{term:?}"),
                (None, None) => "-".into(),
            };
            let env = t.envelope.as_ref().map_or("-".into(), |e| {
                format!("{:.3e}", e.max_violation - e.allowed)
            });
            let lyap = t
                .lyapunov
                .as_ref()
                .map_or("-".into(), |l| format!("{:.3e}", l.worst_slack));
            let eq =
                t.equilibrium
                    .as_ref()
                    .map_or("-", |e| if e.is_origin { "origin" } else { "other" });
            let umin = t.min_input_norm.map_or("-".into(), |u| format!("{u:.3e}"));
            let m = t
                .rate_fit
                .as_ref()
                .map_or("-".into(), |r| format!("{:.3e}", r.scaled));
            let h = t
                .safety
                .as_ref()
                .map_or("-".into(), |s| format!("{:.3e}", s.min_h));
            writeln!(
                out,
                "{:>4}  {:<18} {:>11} {:>11} {:>10} {:>11} {:>11} {:>11}  {}",
                t.index,
                term,
                env,
                lyap,
                eq,
                umin,
                m,
                h,
                if t.pass { "pass" } else { "FAIL" }
            )
            .unwrap();
            if let Some(e) = &t.error {
                writeln!(out, "      error: {e}").unwrap();
            }
        }
        out
    }
}
