//! Experiment configuration, read from TOML.
//!
//! ```toml
//! name = "two-quadratics-decsps"
//! x0 = [3.0]
//! iterations = 100000
//! runs = 50
//!
//! [problem]
//! library = "two-quadratics"
//!
//! [stepsize]
//! rule = "decsps"
//! gamma_init = 0.5
//! schedule = { kind = "inv_sqrt", scale = 1.0 }
//!
//! [sampler]
//! kind = "uniform"
//! seed = 7
//!
//! [policy]
//! divergence_threshold = 1e8
//!
//! [output]
//! csv_stride = 100
//!
//! [[verify]]
//! check = "bounded"
//!
//! [[verify]]
//! check = "condition-31"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::engine::{RunPolicy, Sampler, SamplerSpec};
use crate::error::{Error, Result};
use crate::problems::{FiniteSumProblem, ProblemSpec};
use crate::stepsize::StepRule;

fn one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    /// Defaults to the CLI `--out` directory.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    /// Trajectory CSVs are written for the first `csv_runs` seeds.
    pub csv_runs: usize,
    pub csv_stride: usize,
    /// Adds `x0..x{d-1}` columns when `dim <= 4`.
    pub iterates: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            dir: None,
            csv_runs: 1,
            csv_stride: 1,
            iterates: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Check {
    /// Surrogate inequality; `m` defaults to the rule's certified constant.
    #[serde(rename = "condition-31")]
    Condition31 {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        m: Option<f64>,
    },
    DescentRecursion {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        m: Option<f64>,
    },
    MonotoneStepsize,
    StepsizeSandwich,
    /// `max_k ‖x_k‖² <= bound`; without `bound` the C2 certificate is used.
    Bounded {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bound: Option<f64>,
    },
    ProjectionEquivalence,
    Escape {
        radius: f64,
    },
    Diverged,
    GradsqDecay {
        ratio: f64,
    },
    NormGrowth {
        checkpoints: Vec<usize>,
    },
    Fact11Envelope {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ks: Option<Vec<usize>>,
    },
    Fact14Envelope {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ks: Option<Vec<usize>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sigma_b_sq: Option<f64>,
    },
    GapDecay {
        from: usize,
        to: usize,
        factor: f64,
    },
}

impl Check {
    pub fn name(&self) -> &'static str {
        match self {
            Check::Condition31 { .. } => "condition-31",
            Check::DescentRecursion { .. } => "descent-recursion",
            Check::MonotoneStepsize => "monotone-stepsize",
            Check::StepsizeSandwich => "stepsize-sandwich",
            Check::Bounded { .. } => "bounded",
            Check::ProjectionEquivalence => "projection-equivalence",
            Check::Escape { .. } => "escape",
            Check::Diverged => "diverged",
            Check::GradsqDecay { .. } => "gradsq-decay",
            Check::NormGrowth { .. } => "norm-growth",
            Check::Fact11Envelope { .. } => "fact11-envelope",
            Check::Fact14Envelope { .. } => "fact14-envelope",
            Check::GapDecay { .. } => "gap-decay",
        }
    }

    /// Evaluated on the whole ensemble rather than per run.
    pub fn is_ensemble(&self) -> bool {
        matches!(
            self,
            Check::Fact11Envelope { .. } | Check::Fact14Envelope { .. } | Check::GapDecay { .. }
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifySpec {
    #[serde(flatten)]
    pub check: Check,
    /// Negative control: the check is expected to fail.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub expect_fail: bool,
}

impl VerifySpec {
    pub fn new(check: Check) -> Self {
        VerifySpec {
            check,
            expect_fail: false,
        }
    }

    pub fn negative(check: Check) -> Self {
        VerifySpec {
            check,
            expect_fail: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    /// Statement the experiment exercises, echoed into the summary.
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub anchor: String,
    pub problem: ProblemSpec,
    pub stepsize: StepRule,
    pub sampler: SamplerSpec,
    /// Ensemble size; run `i` uses seed `sampler.seed + i`.
    #[serde(default = "one")]
    pub runs: usize,
    pub x0: Vec<f64>,
    pub iterations: usize,
    #[serde(default)]
    pub policy: RunPolicy,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub verify: Vec<VerifySpec>,
    /// Worker threads for the ensemble; 0 picks the machine default.
    #[serde(default)]
    pub workers: usize,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let field = e
                .span()
                .map(|s| format!("bytes {}..{}", s.start, s.end))
                .unwrap_or_else(|| "config".into());
            Error::config(field, e.message().to_string())
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config("config", e.to_string()))
    }

    /// Checks every field and builds the problem.
    pub fn validate(&self) -> Result<FiniteSumProblem> {
        if self.name.is_empty()
            || !self
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.')
        {
            return Err(Error::config(
                "name",
                format!("`{}` must be nonempty and use [A-Za-z0-9._-]", self.name),
            ));
        }
        let problem = self.problem.build().map_err(|e| as_config("problem", e))?;
        self.stepsize
            .validate()
            .map_err(|e| as_config("stepsize", e))?;
        Sampler::new(&self.sampler, problem.n(), problem.batch_size())
            .map_err(|e| as_config("sampler", e))?;
        if self.x0.len() != problem.dim() {
            return Err(Error::config(
                "x0",
                format!(
                    "has {} entries, problem dimension is {}",
                    self.x0.len(),
                    problem.dim()
                ),
            ));
        }
        if !self.x0.iter().all(|v| v.is_finite()) {
            return Err(Error::config("x0", "entries must be finite"));
        }
        if self.iterations == 0 {
            return Err(Error::config("iterations", "must be at least 1"));
        }
        if self.runs == 0 {
            return Err(Error::config("runs", "must be at least 1"));
        }
        let p = &self.policy;
        if !(p.grad_tol >= 0.0) {
            return Err(Error::config("policy.grad_tol", "must be nonnegative"));
        }
        if !(p.divergence_threshold > 0.0) {
            return Err(Error::config(
                "policy.divergence_threshold",
                "must be positive",
            ));
        }
        if self.output.csv_stride == 0 {
            return Err(Error::config("output.csv_stride", "must be at least 1"));
        }
        for v in &self.verify {
            self.validate_check(&v.check)?;
        }
        Ok(problem)
    }

    fn validate_check(&self, check: &Check) -> Result<()> {
        let field = format!("verify.{}", check.name());
        let bad = |reason: String| Err(Error::config(field.clone(), reason));
        match check {
            Check::NormGrowth { checkpoints } => {
                if checkpoints.len() < 2 || checkpoints.windows(2).any(|w| w[0] >= w[1]) {
                    return bad("checkpoints must be at least two increasing indices".into());
                }
                if checkpoints.last().copied().unwrap_or(0) > self.iterations {
                    return bad(format!(
                        "checkpoints exceed iterations = {}",
                        self.iterations
                    ));
                }
            }
            Check::GapDecay { from, to, factor } => {
                if !(*from >= 1 && from < to && *to <= self.iterations && *factor > 0.0) {
                    return bad("needs 1 <= from < to <= iterations and factor > 0".into());
                }
            }
            Check::Fact11Envelope { ks: Some(ks) } | Check::Fact14Envelope { ks: Some(ks), .. } => {
                if ks.is_empty() || ks.iter().any(|&k| k == 0 || k > self.iterations) {
                    return bad("ks must lie in 1..=iterations".into());
                }
            }
            Check::Escape { radius } if !(*radius >= 0.0) => {
                return bad("radius must be nonnegative".into());
            }
            Check::GradsqDecay { ratio } if !(*ratio > 0.0) => {
                return bad("ratio must be positive".into());
            }
            _ => {}
        }
        Ok(())
    }

    /// Replaces the iteration budget and shrinks index-based checks to fit.
    pub fn with_iterations(mut self, iterations: usize) -> Self {
        let iterations = iterations.max(1);
        self.iterations = iterations;
        for v in &mut self.verify {
            match &mut v.check {
                Check::NormGrowth { checkpoints } => {
                    checkpoints.retain(|&c| c <= iterations);
                    if checkpoints.len() < 2 {
                        *checkpoints = vec![(iterations / 10).max(1), iterations];
                        checkpoints.dedup();
                    }
                }
                Check::GapDecay { from, to, .. } => {
                    if *to > iterations {
                        *to = iterations;
                        *from = (*from).min((iterations / 100).max(1));
                    }
                }
                Check::Fact11Envelope { ks: Some(ks) }
                | Check::Fact14Envelope { ks: Some(ks), .. } => {
                    ks.retain(|&k| k <= iterations);
                    if ks.is_empty() {
                        ks.push(iterations);
                    }
                }
                _ => {}
            }
        }
        self
    }

    /// Shifts the seed base of the ensemble.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.sampler = self.sampler.with_seed(seed);
        self
    }
}

fn as_config(field: &str, e: Error) -> Error {
    match e {
        Error::Config { .. } => e,
        other => Error::config(field, other.to_string()),
    }
}

/// Default `k` grid for envelopes: `1, 2, 5, 10, 20, 50, ...` up to and including `iterations`.
pub fn log_grid(iterations: usize) -> Vec<usize> {
    let mut ks = Vec::new();
    let mut decade = 1usize;
    'outer: loop {
        for m in [1, 2, 5] {
            let k = m * decade;
            if k > iterations {
                break 'outer;
            }
            ks.push(k);
        }
        decade = match decade.checked_mul(10) {
            Some(d) => d,
            None => break,
        };
    }
    if ks.last() != Some(&iterations) {
        ks.push(iterations);
    }
    ks
}
