//! Executes an [`ExperimentConfig`]: the seeded ensemble, the configured
//! checks, and the CSV/JSON artifacts.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::analysis::{
    self, boundedness_certificate, check_norms_bounded, digest_run, fact11_from_digests,
    fact14_from_digests, gap_decay_from_digests, BoundCertificate, Report, RunDigest,
};
use crate::config::{log_grid, Check, ExperimentConfig};
use crate::engine::{par_seeds, run_spec, RunSummary, Trajectory};
use crate::error::{Error, Result};
use crate::problems::{CaseLabel, FiniteSumProblem};
use crate::stepsize::{surrogate_constant, StepRule, Surrogate};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckOutcome {
    #[serde(flatten)]
    pub report: Report,
    pub expect_fail: bool,
    /// `pass` unless the check is a negative control, in which case `!pass`.
    pub ok: bool,
}

impl CheckOutcome {
    pub fn line(&self, experiment: &str) -> String {
        let mut line = format!("{experiment}: {}", self.report.line());
        if self.expect_fail {
            line.push_str(if self.ok {
                " (negative control, failure expected)"
            } else {
                " (negative control UNEXPECTEDLY PASSED)"
            });
        }
        line
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunRecord {
    pub seed: u64,
    #[serde(flatten)]
    pub summary: RunSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentOutcome {
    pub name: String,
    pub anchor: String,
    pub config: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub case: Option<CaseLabel>,
    pub surrogate: Surrogate,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<BoundCertificate>,
    pub runs: Vec<RunRecord>,
    pub checks: Vec<CheckOutcome>,
    pub notes: Vec<String>,
    pub ok: bool,
    /// `(file name, contents)` of trajectory CSVs.
    #[serde(skip)]
    pub csv: Vec<(String, String)>,
}

impl ExperimentOutcome {
    pub fn lines(&self) -> Vec<String> {
        self.checks.iter().map(|c| c.line(&self.name)).collect()
    }

    pub fn summary_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Writes the CSVs and `<name>.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut written = Vec::new();
        for (file, body) in &self.csv {
            let path = dir.join(file);
            std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
            written.push(path);
        }
        let path = dir.join(format!("{}.json", self.name));
        std::fs::write(&path, self.summary_json()? + "\n").map_err(|e| Error::io(&path, e))?;
        written.push(path);
        Ok(written)
    }
}

struct PerRun {
    record: RunRecord,
    reports: Vec<Option<Report>>,
    digest: Option<RunDigest>,
    csv: Option<(String, String)>,
}

struct Shared<'a> {
    config: &'a ExperimentConfig,
    problem: &'a FiniteSumProblem,
    surrogate: &'a Surrogate,
    certificate: Option<&'a BoundCertificate>,
    optimum: Option<&'a (Vec<f64>, f64)>,
    digest_ks: &'a [usize],
}

fn check_error(check: &Check, e: Error) -> Error {
    match e {
        Error::Contract(r) | Error::InsufficientMetadata(r) | Error::InvalidArgument(r) => {
            Error::config(format!("verify.{}", check.name()), r)
        }
        other => other,
    }
}

fn per_run_report(check: &Check, traj: &Trajectory, s: &Shared<'_>) -> Result<Report> {
    let rule = &s.config.stepsize;
    Ok(match check {
        Check::Condition31 { m } => analysis::verify_condition_31(traj, m.unwrap_or(s.surrogate.m)),
        Check::DescentRecursion { m } => {
            analysis::verify_descent_recursion(traj, s.problem, m.unwrap_or(s.surrogate.m))?
        }
        Check::MonotoneStepsize => analysis::verify_monotone(traj),
        Check::StepsizeSandwich => analysis::verify_sandwich(traj, rule, s.problem.l_max())?,
        Check::Bounded { bound } => {
            let b = match (bound, s.certificate) {
                (Some(b), _) => *b,
                (None, Some(c)) => c.bound,
                (None, None) => unreachable!("certificate computed up front"),
            };
            let mut r = check_norms_bounded(traj.xnorms().map(|n| n * n).enumerate(), b);
            r.parameters["max_xnorm_sq"] = json!(traj.max_xnorm_sq());
            r.parameters["source"] = json!(if bound.is_some() {
                "given"
            } else {
                "certificate"
            });
            r
        }
        Check::ProjectionEquivalence => {
            analysis::verify_projection_equivalence(traj, s.problem, rule)?
        }
        Check::Escape { radius } => analysis::verify_escape(traj, *radius),
        Check::Diverged => analysis::verify_diverged(traj, s.config.policy.divergence_threshold),
        Check::GradsqDecay { ratio } => analysis::verify_gradsq_decay(traj, *ratio),
        Check::NormGrowth { checkpoints } => analysis::verify_norm_growth(traj, checkpoints)?,
        Check::Fact11Envelope { .. } | Check::Fact14Envelope { .. } | Check::GapDecay { .. } => {
            unreachable!("ensemble checks are evaluated after all runs")
        }
    })
}

fn one_run(index: usize, seed: u64, s: &Shared<'_>) -> Result<PerRun> {
    let c = s.config;
    let traj = run_spec(
        s.problem,
        &c.stepsize,
        &c.sampler.with_seed(seed),
        &c.x0,
        c.iterations,
        &c.policy,
    )?;
    let mut reports = Vec::with_capacity(c.verify.len());
    for v in &c.verify {
        reports.push(if v.check.is_ensemble() {
            None
        } else {
            Some(per_run_report(&v.check, &traj, s).map_err(|e| check_error(&v.check, e))?)
        });
    }
    let digest = s
        .optimum
        .map(|(xstar, mu)| digest_run(&traj, s.problem, xstar, *mu, s.digest_ks));
    let csv = (index < c.output.csv_runs).then(|| {
        (
            format!("{}.seed{}.csv", c.name, seed),
            traj.to_csv(c.output.iterates, c.output.csv_stride),
        )
    });
    Ok(PerRun {
        record: RunRecord {
            seed,
            summary: traj.summary(),
        },
        reports,
        digest,
        csv,
    })
}

/// Worst report across runs; passes only if every run passes.
fn aggregate(name: &str, runs: &[(u64, &Report)]) -> Report {
    let (seed, worst) = runs
        .iter()
        .copied()
        .min_by(|a, b| {
            let (x, y) = (a.1.worst_slack, b.1.worst_slack);
            // NaN sorts first.
            x.partial_cmp(&y).unwrap_or(if x.is_nan() {
                std::cmp::Ordering::Less
            } else {
                std::cmp::Ordering::Greater
            })
        })
        .expect("at least one run");
    let passed = runs.iter().filter(|(_, r)| r.pass).count();
    let mut parameters = worst.parameters.clone();
    if let Value::Object(map) = &mut parameters {
        map.insert("worst_seed".into(), json!(seed));
        map.insert("runs".into(), json!(runs.len()));
        map.insert("passed_runs".into(), json!(passed));
        if name == "bounded" {
            let max = runs
                .iter()
                .filter_map(|(_, r)| r.parameters["max_xnorm_sq"].as_f64())
                .fold(0.0, f64::max);
            map.insert("max_xnorm_sq".into(), json!(max));
        }
    }
    Report {
        check: worst.check.clone(),
        pass: passed == runs.len(),
        worst_slack: worst.worst_slack,
        location_k: worst.location_k,
        parameters,
    }
}

fn positions(all: &[usize], wanted: &[usize]) -> Vec<usize> {
    wanted
        .iter()
        .map(|k| {
            all.binary_search(k)
                .expect("digest grid covers every requested k")
        })
        .collect()
}

fn select(digests: &[RunDigest], pos: &[usize]) -> Vec<RunDigest> {
    digests
        .iter()
        .map(|d| RunDigest {
            x0: d.x0.clone(),
            max_dist_sq: d.max_dist_sq,
            gaps: pos.iter().map(|&p| d.gaps[p]).collect(),
        })
        .collect()
}

fn notes_for(
    config: &ExperimentConfig,
    problem: &FiniteSumProblem,
    sur: &Surrogate,
) -> Vec<String> {
    let mut notes = Vec::new();
    if let StepRule::Sps { lambda, .. } = &config.stepsize {
        if problem.batch_size() > 1 {
            notes.push("sps on batches of size > 1 extends the single-sample rule".into());
        }
        if *lambda != 1.0 {
            notes.push(format!(
                "sps with lambda = {lambda}: the rate envelope assumes lambda = 1"
            ));
        }
    }
    if !sur.admissible {
        notes.push(format!(
            "surrogate constant m = {} is not below 2: the boundedness certificate does not apply",
            sur.m
        ));
    }
    notes
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let problem = config.validate()?;
    let surrogate = surrogate_constant(&config.stepsize, problem.l_max())?;
    let case = problem.classify_case().ok();
    let mut notes = notes_for(config, &problem, &surrogate);

    let certificate = if config
        .verify
        .iter()
        .any(|v| matches!(v.check, Check::Bounded { bound: None }))
    {
        Some(
            boundedness_certificate(&problem, surrogate.gamma_cap, surrogate.m, &config.x0)
                .map_err(|e| check_error(&Check::Bounded { bound: None }, e))?,
        )
    } else {
        None
    };
    if certificate.as_ref().is_some_and(|c| c.approximate) {
        notes.push("certificate radii include numerical searches".into());
    }

    let ensemble_ks = |check: &Check| -> Vec<usize> {
        match check {
            Check::Fact11Envelope { ks } | Check::Fact14Envelope { ks, .. } => {
                ks.clone().unwrap_or_else(|| log_grid(config.iterations))
            }
            Check::GapDecay { from, to, .. } => vec![*from, *to],
            _ => Vec::new(),
        }
    };
    let mut digest_ks: Vec<usize> = config
        .verify
        .iter()
        .flat_map(|v| ensemble_ks(&v.check))
        .collect();
    digest_ks.sort_unstable();
    digest_ks.dedup();
    let optimum = if digest_ks.is_empty() {
        None
    } else {
        Some(analysis::global_optimum(&problem).map_err(|e| {
            check_error(
                &Check::Fact14Envelope {
                    ks: None,
                    sigma_b_sq: None,
                },
                e,
            )
        })?)
    };

    let shared = Shared {
        config,
        problem: &problem,
        surrogate: &surrogate,
        certificate: certificate.as_ref(),
        optimum: optimum.as_ref(),
        digest_ks: &digest_ks,
    };
    let base = config.sampler.seed();
    let results = par_seeds(base, config.runs, config.workers, |seed| {
        one_run(seed.wrapping_sub(base) as usize, seed, &shared)
    });
    let per_run = results.into_iter().collect::<Result<Vec<_>>>()?;

    let mut checks = Vec::with_capacity(config.verify.len());
    let digests: Vec<RunDigest> = per_run.iter().filter_map(|r| r.digest.clone()).collect();
    for (j, v) in config.verify.iter().enumerate() {
        let report = if v.check.is_ensemble() {
            let ks = ensemble_ks(&v.check);
            let sub = select(&digests, &positions(&digest_ks, &ks));
            let r = match &v.check {
                Check::Fact11Envelope { .. } => {
                    fact11_from_digests(&problem, &sub, &config.stepsize, &ks).map(|e| e.report)
                }
                Check::Fact14Envelope { sigma_b_sq, .. } => {
                    fact14_from_digests(&problem, &sub, &config.stepsize, *sigma_b_sq, &ks)
                        .map(|e| e.report)
                }
                Check::GapDecay { factor, .. } => gap_decay_from_digests(&sub, &ks, *factor),
                _ => unreachable!(),
            };
            r.map_err(|e| check_error(&v.check, e))?
        } else {
            let rows: Vec<(u64, &Report)> = per_run
                .iter()
                .map(|r| {
                    (
                        r.record.seed,
                        r.reports[j].as_ref().expect("per-run report"),
                    )
                })
                .collect();
            aggregate(v.check.name(), &rows)
        };
        checks.push(CheckOutcome {
            ok: report.pass != v.expect_fail,
            expect_fail: v.expect_fail,
            report,
        });
    }

    let mut csv = Vec::new();
    let mut runs = Vec::with_capacity(per_run.len());
    for r in per_run {
        csv.extend(r.csv);
        runs.push(r.record);
    }
    Ok(ExperimentOutcome {
        name: config.name.clone(),
        anchor: config.anchor.clone(),
        config: serde_json::to_value(config)?,
        case,
        surrogate,
        certificate,
        runs,
        ok: checks.iter().all(|c| c.ok),
        checks,
        notes,
        csv,
    })
}
