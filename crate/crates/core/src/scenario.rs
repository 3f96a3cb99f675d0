//! Scenario configuration, catalog and runner behind the command-line tool.

use std::fmt;
use std::str::FromStr;

use qbsig_qsim::EncodingBasis;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::attacks::{
    attack_suite, exact_violations, run_attack, trial_seed, Attack, AttackParams, Scheme,
};
use crate::error::ProtocolError;
use crate::improved::{ImpConfig, ImpWorld, DEFAULT_DECOYS};
use crate::original::{OrigConfig, OrigWorld};
use crate::report::{ConfigEcho, HonestSummary, Report, Status, SCHEMA};
use crate::stats::Proportion;
use crate::verdict::Verdict;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

impl ScenarioError {
    pub fn exit_code(&self) -> i32 {
        match self {
            ScenarioError::Usage(_) => 1,
            ScenarioError::Protocol(_) => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Text,
    Structured,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" => Ok(Format::Text),
            "structured" | "json" => Ok(Format::Structured),
            other => Err(format!(
                "unknown format {other:?} (expected text or structured)"
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScenarioKind {
    Honest,
    Attack(Attack),
    DefenseSuite,
}

impl ScenarioKind {
    pub fn id(self) -> &'static str {
        match self {
            ScenarioKind::Honest => "honest",
            ScenarioKind::Attack(a) => a.id(),
            ScenarioKind::DefenseSuite => "defense-suite",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for ScenarioKind {
    type Err = ScenarioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "honest" => Ok(ScenarioKind::Honest),
            "defense-suite" => Ok(ScenarioKind::DefenseSuite),
            other => other
                .parse::<Attack>()
                .map(ScenarioKind::Attack)
                .map_err(|_| {
                    let ids: Vec<&str> = list_scenarios().iter().map(|e| e.id).collect();
                    ScenarioError::Usage(format!(
                        "unknown scenario {other:?}; available: {}",
                        ids.join(", ")
                    ))
                }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CatalogEntry {
    pub id: &'static str,
    pub kind: &'static str,
    pub description: &'static str,
}

/// Every runnable scenario: the honest run, each attack, and the suite.
pub fn list_scenarios() -> Vec<CatalogEntry> {
    let mut v = vec![CatalogEntry {
        id: "honest",
        kind: "protocol",
        description: "honest run of the selected scheme",
    }];
    v.extend(Attack::ALL.into_iter().map(|a| CatalogEntry {
        id: a.id(),
        kind: "attack",
        description: a.description(),
    }));
    v.push(CatalogEntry {
        id: "defense-suite",
        kind: "suite",
        description: "every attack replayed with detection statistics",
    });
    v
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub scheme: Scheme,
    pub scenario: ScenarioKind,
    pub n: usize,
    pub t: usize,
    pub l: usize,
    pub b: f64,
    pub trials: u64,
    pub seed: u64,
    pub format: Format,
    /// Worker threads; `None` uses every available core.
    pub workers: Option<usize>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::Original,
            scenario: ScenarioKind::Honest,
            n: 8,
            t: 3,
            l: DEFAULT_DECOYS,
            b: std::f64::consts::FRAC_PI_8.cos(),
            trials: 1000,
            seed: 0,
            format: Format::Text,
            workers: None,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let usage = |m: String| Err(ScenarioError::Usage(m));
        if self.n == 0 {
            return usage("--n must be at least 1".into());
        }
        if self.t == 0 {
            return usage("--t must be at least 1".into());
        }
        if self.trials == 0 {
            return usage("--trials must be at least 1".into());
        }
        if self.workers == Some(0) {
            return usage("--workers must be at least 1".into());
        }
        if self.scheme == Scheme::Improved {
            if self.l == 0 {
                return usage("--l must be at least 1".into());
            }
            if !(self.b > 0.0 && self.b < 1.0) {
                return usage(format!("--b must lie in (0, 1), got {}", self.b));
            }
            if (self.b - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12 {
                return usage("--b = 1/sqrt(2) makes the encoding balanced and is rejected".into());
            }
        }
        let check = match self.scheme {
            Scheme::Original => OrigConfig::new(self.n, self.t, self.seed).validate(),
            Scheme::Improved => ImpConfig::new(self.n, self.t, self.seed)
                .with_decoys(self.l)
                .validate(),
        };
        check.map_err(|e| ScenarioError::Usage(e.to_string()))
    }

    pub fn basis(&self) -> Result<EncodingBasis, ScenarioError> {
        EncodingBasis::from_b(self.b).map_err(|e| ScenarioError::Usage(e.to_string()))
    }

    fn params(&self) -> Result<AttackParams, ScenarioError> {
        Ok(AttackParams {
            n: self.n,
            t: self.t,
            l: self.l,
            basis: match self.scheme {
                Scheme::Improved => self.basis()?,
                Scheme::Original => EncodingBasis::default(),
            },
            trials: self.trials,
            seed: self.seed,
        })
    }

    fn echo(&self) -> ConfigEcho {
        ConfigEcho {
            scheme: self.scheme,
            scenario: self.scenario.id().to_string(),
            n: self.n,
            t: self.t,
            l: self.l,
            b: self.b,
            c: (1.0 - self.b * self.b).max(0.0).sqrt(),
            trials: self.trials,
            seed: self.seed,
        }
    }
}

struct HonestRun {
    individual: Vec<Verdict>,
    combined: Verdict,
    transcript: String,
    board: Option<Vec<crate::netsim::BoardEntry>>,
}

fn honest_world(
    config: &ScenarioConfig,
    params: &AttackParams,
    seed: u64,
) -> Result<HonestRun, ProtocolError> {
    match config.scheme {
        Scheme::Original => {
            let out = OrigWorld::new(OrigConfig::new(config.n, config.t, seed))?
                .run(&mut crate::original::Honest)?;
            Ok(HonestRun {
                individual: out.signatories.iter().map(|s| s.verdict).collect(),
                combined: out.combined,
                transcript: out.transcript_digest,
                board: None,
            })
        }
        Scheme::Improved => {
            let out = ImpWorld::new(
                ImpConfig::new(config.n, config.t, seed)
                    .with_decoys(config.l)
                    .with_basis(params.basis),
            )?
            .run(&mut crate::improved::Honest)?;
            Ok(HonestRun {
                individual: out.signatories.iter().map(|s| s.verdict).collect(),
                combined: out.combined,
                transcript: out.transcript_digest,
                board: Some(out.board),
            })
        }
    }
}

fn run_inner(config: &ScenarioConfig) -> Result<Report, ScenarioError> {
    let params = config.params()?;
    let mut report = Report {
        schema: SCHEMA,
        config: config.echo(),
        status: Status::Ok,
        violations: Vec::new(),
        honest: None,
        outcomes: Vec::new(),
        transcript_digest: None,
        board: None,
    };
    match config.scenario {
        ScenarioKind::Honest => {
            let runs: Vec<HonestRun> = (0..config.trials)
                .into_par_iter()
                .map(|i| honest_world(config, &params, trial_seed(config.seed, i)))
                .collect::<Result<_, _>>()?;
            let accepted = runs
                .iter()
                .filter(|r| {
                    r.combined.is_accepted() && r.individual.iter().all(|v| v.is_accepted())
                })
                .count() as u64;
            let p = Proportion::new(accepted, config.trials);
            let first = runs.into_iter().next().expect("at least one trial");
            if accepted != config.trials {
                report.violations.push(format!(
                    "honest acceptance {accepted}/{} is not exactly 1",
                    config.trials
                ));
            }
            report.honest = Some(HonestSummary {
                runs: config.trials,
                accepted,
                acceptance_rate: p.rate(),
                acceptance_ci: p.wilson95(),
                first_individual: first.individual,
                first_combined: first.combined,
            });
            report.transcript_digest = Some(first.transcript);
            report.board = first.board;
        }
        ScenarioKind::Attack(a) => report.outcomes = run_attack(a, config.scheme, &params)?,
        ScenarioKind::DefenseSuite => report.outcomes = attack_suite(config.scheme, &params)?,
    }
    for o in &report.outcomes {
        report.violations.extend(exact_violations(o));
    }
    if !report.violations.is_empty() {
        report.status = Status::InvariantViolation;
    }
    Ok(report)
}

/// Validates and runs a scenario on a pool of `config.workers` threads.
pub fn run(config: &ScenarioConfig) -> Result<Report, ScenarioError> {
    config.validate()?;
    match config.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| ScenarioError::Usage(format!("cannot start {w} workers: {e}")))?
            .install(|| run_inner(config)),
        None => run_inner(config),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_shape() {
        let c = list_scenarios();
        assert_eq!(c.len(), 8);
        assert_eq!(c.iter().filter(|e| e.kind == "attack").count(), 6);
        assert_eq!(c[0].id, "honest");
        assert_eq!(c[7].id, "defense-suite");
    }

    #[test]
    fn unknown_scenario_lists_catalog() {
        let err = "bogus".parse::<ScenarioKind>().unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains("eve-forge") && msg.contains("defense-suite"),
            "{msg}"
        );
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn validation() {
        let ok = ScenarioConfig::default();
        assert!(ok.validate().is_ok());
        for bad in [
            ScenarioConfig { n: 0, ..ok.clone() },
            ScenarioConfig { t: 0, ..ok.clone() },
            ScenarioConfig {
                trials: 0,
                ..ok.clone()
            },
            ScenarioConfig {
                scheme: Scheme::Improved,
                b: 1.0,
                ..ok.clone()
            },
            ScenarioConfig {
                scheme: Scheme::Improved,
                b: 0.0,
                ..ok.clone()
            },
            ScenarioConfig {
                scheme: Scheme::Improved,
                b: std::f64::consts::FRAC_1_SQRT_2,
                ..ok.clone()
            },
            ScenarioConfig {
                scheme: Scheme::Improved,
                l: 0,
                ..ok.clone()
            },
        ] {
            assert!(
                matches!(bad.validate(), Err(ScenarioError::Usage(_))),
                "{bad:?}"
            );
        }
        // The basis parameter is irrelevant to the original scheme.
        assert!(ScenarioConfig { b: 1.0, ..ok }.validate().is_ok());
    }

    #[test]
    fn honest_original_seed_42() {
        let config = ScenarioConfig {
            seed: 42,
            trials: 1,
            ..ScenarioConfig::default()
        };
        let report = run(&config).unwrap();
        assert_eq!(report.status, Status::Ok);
        assert_eq!(
            report.honest.as_ref().unwrap().first_combined,
            Verdict::Accepted
        );
        assert!(report.transcript_digest.is_some());
    }

    #[test]
    fn format_parse() {
        assert_eq!("json".parse::<Format>().unwrap(), Format::Structured);
        assert!("xml".parse::<Format>().is_err());
    }
}
