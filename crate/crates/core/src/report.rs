//! Self-describing run reports in text and structured (JSON) form.

use std::fmt::Write as _;

use serde::Serialize;

use crate::attacks::{AttackOutcome, Scheme};
use crate::netsim::BoardEntry;
use crate::stats::Interval;
use crate::verdict::Verdict;

pub const SCHEMA: &str = "qbsig-report/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Ok,
    InvariantViolation,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::InvariantViolation => 2,
        }
    }
}

/// Echo of the run parameters. Worker count is deliberately absent so that
/// reports do not depend on it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConfigEcho {
    pub scheme: Scheme,
    pub scenario: String,
    pub n: usize,
    pub t: usize,
    pub l: usize,
    pub b: f64,
    pub c: f64,
    pub trials: u64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HonestSummary {
    pub runs: u64,
    pub accepted: u64,
    pub acceptance_rate: f64,
    pub acceptance_ci: Interval,
    /// Individual verdicts of the first run.
    pub first_individual: Vec<Verdict>,
    pub first_combined: Verdict,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub config: ConfigEcho,
    pub status: Status,
    pub violations: Vec<String>,
    pub honest: Option<HonestSummary>,
    pub outcomes: Vec<AttackOutcome>,
    /// Transcript digest of the first world, when the scenario runs honest
    /// worlds.
    pub transcript_digest: Option<String>,
    /// Public board of the first improved-scheme world.
    pub board: Option<Vec<BoardEntry>>,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is serializable")
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let c = &self.config;
        let _ = writeln!(
            s,
            "scheme={} scenario={} n={} t={} l={} b={:.6} trials={} seed={}",
            c.scheme, c.scenario, c.n, c.t, c.l, c.b, c.trials, c.seed
        );
        if let Some(h) = &self.honest {
            let verdicts: Vec<String> = h.first_individual.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(
                s,
                "honest: {}/{} accepted (rate {:.4}, 95% CI [{:.4}, {:.4}])",
                h.accepted, h.runs, h.acceptance_rate, h.acceptance_ci.lo, h.acceptance_ci.hi
            );
            let _ = writeln!(
                s,
                "first run: individual [{}], combined {}",
                verdicts.join(", "),
                h.first_combined
            );
        }
        for o in &self.outcomes {
            let name = match &o.variant {
                Some(v) => format!("{}/{}", o.id, v),
                None => o.id.clone(),
            };
            let _ = write!(
                s,
                "{:<34} success {:.4} [{:.4}, {:.4}]  detection {:.4} [{:.4}, {:.4}]",
                name,
                o.success_rate,
                o.success_ci.lo,
                o.success_ci.hi,
                o.detection_rate,
                o.detection_ci.lo,
                o.detection_ci.hi
            );
            if let Some(e) = o.expected_detection {
                let _ = write!(s, "  expected detection {e:.4}");
            }
            if let Some(bd) = o.board_detection_rate {
                let _ = write!(s, "  any-stage detection {bd:.4}");
            }
            s.push('\n');
        }
        if let Some(d) = &self.transcript_digest {
            let _ = writeln!(s, "transcript {d}");
        }
        if let Some(board) = &self.board {
            let _ = writeln!(s, "board: {} entries", board.len());
            for e in board {
                let _ = writeln!(s, "  {} {} {}", e.who, e.label, e.value);
            }
        }
        match self.status {
            Status::Ok => s.push_str("status: ok\n"),
            Status::InvariantViolation => {
                s.push_str("status: invariant violation\n");
                for v in &self.violations {
                    let _ = writeln!(s, "  {v}");
                }
            }
        }
        s
    }
}
