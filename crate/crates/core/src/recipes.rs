//! Named experiments. Each recipe is a list of configs run in order.

use std::path::Path;

use serde::Serialize;

use crate::config::{Check, ExperimentConfig, OutputSpec, VerifySpec};
use crate::engine::{RunPolicy, SamplerSpec};
use crate::error::{Error, Result};
use crate::experiment::{run_experiment, ExperimentOutcome};
use crate::problems::ProblemSpec;
use crate::stepsize::{LambdaSchedule, StepRule};

pub const DEFAULT_SEED: u64 = 20240601;

/// Scale of the logistic tail in `softplus-escape`.
const ESCAPE_SCALE: f64 = 0.005;

#[derive(Clone, Copy, Debug)]
pub struct Recipe {
    pub name: &'static str,
    pub anchor: &'static str,
    pub expected: &'static str,
    build: fn(u64) -> Vec<ExperimentConfig>,
}

impl Recipe {
    /// Configs with the given seed base and optional iteration override.
    pub fn configs(&self, seed: u64, iterations: Option<usize>) -> Vec<ExperimentConfig> {
        (self.build)(seed)
            .into_iter()
            .map(|c| match iterations {
                Some(k) => c.with_iterations(k),
                None => c,
            })
            .collect()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RecipeOutcome {
    pub recipe: String,
    pub anchor: String,
    pub expected: String,
    pub experiments: Vec<ExperimentOutcome>,
    pub ok: bool,
}

impl RecipeOutcome {
    pub fn lines(&self) -> Vec<String> {
        self.experiments.iter().flat_map(|e| e.lines()).collect()
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let dir = dir.join(&self.recipe);
        for e in &self.experiments {
            e.write(&dir)?;
        }
        let path = dir.join("summary.json");
        let body = serde_json::to_string_pretty(&serde_json::json!({
            "recipe": self.recipe,
            "anchor": self.anchor,
            "expected": self.expected,
            "ok": self.ok,
            "experiments": self.experiments.iter().map(|e| serde_json::json!({
                "name": e.name,
                "ok": e.ok,
                "checks": e.checks,
            })).collect::<Vec<_>>(),
        }))?;
        std::fs::write(&path, body + "\n").map_err(|e| Error::io(&path, e))
    }
}

pub fn run_recipe(recipe: &Recipe, seed: u64, iterations: Option<usize>) -> Result<RecipeOutcome> {
    let experiments = recipe
        .configs(seed, iterations)
        .iter()
        .map(run_experiment)
        .collect::<Result<Vec<_>>>()?;
    Ok(RecipeOutcome {
        recipe: recipe.name.into(),
        anchor: recipe.anchor.into(),
        expected: recipe.expected.into(),
        ok: experiments.iter().all(|e| e.ok),
        experiments,
    })
}

pub fn find(name: &str) -> Result<&'static Recipe> {
    RECIPES.iter().find(|r| r.name == name).ok_or_else(|| {
        Error::config(
            "recipe",
            format!(
                "unknown recipe `{name}`; known: {}",
                RECIPES
                    .iter()
                    .map(|r| r.name)
                    .collect::<Vec<_>>()
                    .join(", ")
            ),
        )
    })
}

pub static RECIPES: &[Recipe] = &[
    Recipe {
        name: "c1-divergence",
        anchor: "there exists a sequence of batches with lim ‖x_k‖ = ∞",
        expected: "diverged status; ‖x_k‖ > 1e3, gradsq -> 0, growth across decades",
        build: c1_divergence,
    },
    Recipe {
        name: "c2-boundedness",
        anchor: "(x_k) is bounded when γ_k‖∇f_B‖² <= m(f_B − ℓ_B) with m < 2 and γ_k <= γ",
        expected: "every seed stays within the explicit certificate",
        build: c2_boundedness,
    },
    Recipe {
        name: "c3-polyhedral-monitor",
        anchor: "polyhedral sets with min{λ_0, 2γ_-1} < 4 give bounded iterates",
        expected: "all seeds inside the recorded ball",
        build: c3_polyhedral,
    },
    Recipe {
        name: "projection-equivalence",
        anchor: "relaxed random projection algorithm",
        expected: "max coordinate deviation <= 1e-12",
        build: projection_equivalence,
    },
    Recipe {
        name: "fact11-envelope",
        anchor: "E[f(x̄_k) − μ] <= ‖x_0 − x*‖²/(αk) + 2σ²γ_-1/α",
        expected: "ensemble mean below the envelope plus 3 standard errors",
        build: fact11_envelope,
    },
    Recipe {
        name: "fact14-envelope",
        anchor: "E[f(x̄_k)] − μ <= M/(α λ_{k−1} k) + σ_b² Σλ_i/k",
        expected: "ensemble mean below the envelope plus 3 standard errors",
        build: fact14_envelope,
    },
    Recipe {
        name: "stepsize-invariants",
        anchor: "min{1/(2L_max), γ_-1/λ_0} λ_k <= γ_k <= (γ_-1/λ_0) λ_k",
        expected: "sandwich, monotonicity and the surrogate inequality on every step",
        build: stepsize_invariants,
    },
    Recipe {
        name: "negative-controls",
        anchor: "verifiers must be able to fail",
        expected: "every check flagged expect_fail fails",
        build: negative_controls,
    },
];

fn library(name: &str) -> ProblemSpec {
    ProblemSpec {
        library: Some(name.into()),
        components: Vec::new(),
        batch_size: None,
    }
}

fn decsps(schedule: LambdaSchedule, gamma_init: f64) -> StepRule {
    StepRule::Decsps {
        schedule,
        gamma_init,
    }
}

fn inv_sqrt(scale: f64) -> LambdaSchedule {
    LambdaSchedule::InvSqrt { scale }
}

fn checks(list: Vec<Check>) -> Vec<VerifySpec> {
    list.into_iter().map(VerifySpec::new).collect()
}

#[allow(clippy::too_many_arguments)]
fn config(
    name: &str,
    anchor: &str,
    problem: &str,
    stepsize: StepRule,
    sampler: SamplerSpec,
    runs: usize,
    x0: Vec<f64>,
    iterations: usize,
    verify: Vec<VerifySpec>,
) -> ExperimentConfig {
    ExperimentConfig {
        name: name.into(),
        anchor: anchor.into(),
        problem: library(problem),
        stepsize,
        sampler,
        runs,
        x0,
        iterations,
        policy: RunPolicy::default(),
        output: OutputSpec::default(),
        verify,
        workers: 0,
    }
}

fn escape_rule() -> StepRule {
    // γ_-1 large enough that the Polyak ratio is active from the first step.
    decsps(inv_sqrt(1.0), 10.0 / (ESCAPE_SCALE * ESCAPE_SCALE))
}

fn c1_divergence(seed: u64) -> Vec<ExperimentConfig> {
    let anchor = "fixed batch without minimizer: lim ‖x_k‖ = ∞";
    let fixed = SamplerSpec::Fixed {
        batch: vec![0],
        seed,
    };
    let mut threshold = config(
        "escape-threshold",
        anchor,
        "softplus-escape",
        escape_rule(),
        fixed.clone(),
        1,
        vec![0.0],
        1_000_000,
        checks(vec![Check::Diverged]),
    );
    threshold.policy.divergence_threshold = 1e3;
    let mut decades = config(
        "escape-decades",
        anchor,
        "softplus-escape",
        escape_rule(),
        fixed,
        1,
        vec![0.0],
        1_000_000,
        checks(vec![
            Check::Escape { radius: 1e3 },
            Check::GradsqDecay { ratio: 1e-6 },
            Check::NormGrowth {
                checkpoints: vec![1_000, 10_000, 100_000, 1_000_000],
            },
            Check::Condition31 { m: None },
            Check::DescentRecursion { m: None },
        ]),
    );
    decades.output.csv_stride = 1000;
    vec![threshold, decades]
}

fn c2_boundedness(seed: u64) -> Vec<ExperimentConfig> {
    let anchor = "(x_k) is bounded";
    let verify = || {
        checks(vec![
            Check::Bounded { bound: None },
            Check::Condition31 { m: None },
            Check::DescentRecursion { m: None },
        ])
    };
    let uniform = SamplerSpec::Uniform { seed };
    let mut out = Vec::new();
    for (tag, scale) in [("0.5", 0.5), ("1", 1.0), ("1.9", 1.9)] {
        out.push(config(
            &format!("two-quadratics-decsps-lambda{tag}"),
            anchor,
            "two-quadratics",
            decsps(inv_sqrt(scale), 0.5),
            uniform.clone(),
            50,
            vec![3.0],
            100_000,
            verify(),
        ));
    }
    out.push(config(
        "two-quadratics-constant",
        anchor,
        "two-quadratics",
        StepRule::Constant { gamma: 0.4 },
        uniform.clone(),
        50,
        vec![3.0],
        100_000,
        verify(),
    ));
    for (problem, x0) in [
        ("one-sided", vec![3.0]),
        ("interpolation", vec![3.0, 3.0]),
        ("balls", vec![4.0, -3.0]),
        ("mixed", vec![3.0, 3.0]),
    ] {
        out.push(config(
            &format!("{problem}-decsps"),
            anchor,
            problem,
            decsps(inv_sqrt(1.0), 0.5),
            uniform.clone(),
            50,
            x0,
            100_000,
            verify(),
        ));
    }
    for c in &mut out {
        c.output.csv_stride = 100;
    }
    out
}

fn c3_polyhedral(seed: u64) -> Vec<ExperimentConfig> {
    let anchor = "polyhedral sets: bounded iterates when min{λ_0, 2γ_-1} < 4";
    let uniform = SamplerSpec::Uniform { seed };
    let mut out = Vec::new();
    for problem in ["halfspaces", "orthant-slab"] {
        for (tag, scale, gamma_init) in [("a", 1.0, 1.0), ("b", 1.9, 1.5)] {
            out.push(config(
                &format!("{problem}-{tag}"),
                anchor,
                problem,
                decsps(inv_sqrt(scale), gamma_init),
                uniform.clone(),
                50,
                vec![5.0, 5.0],
                100_000,
                checks(vec![Check::Bounded { bound: Some(1e3) }]),
            ));
        }
    }
    // λ_k = γ_-1 = 2: exposed for experimentation, nothing asserted.
    out.push(config(
        "halfspaces-lambda2",
        "λ_k = γ_-1 = 2",
        "halfspaces",
        decsps(LambdaSchedule::Constant { value: 2.0 }, 2.0),
        uniform,
        10,
        vec![5.0, 5.0],
        100_000,
        Vec::new(),
    ));
    for c in &mut out {
        c.output.csv_stride = 100;
    }
    out
}

fn projection_equivalence(seed: u64) -> Vec<ExperimentConfig> {
    let anchor = "γ_k = λ_k min{1/2, γ_-1/λ_0}";
    let mut out = Vec::new();
    for problem in ["balls", "halfspaces", "orthant-slab"] {
        for (regime, gamma_init) in [("cap", 0.3), ("ratio", 2.0)] {
            out.push(config(
                &format!("{problem}-{regime}"),
                anchor,
                problem,
                decsps(inv_sqrt(1.0), gamma_init),
                SamplerSpec::Uniform { seed },
                5,
                vec![4.0, -3.0],
                10_000,
                checks(vec![Check::ProjectionEquivalence]),
            ));
        }
    }
    out
}

fn fact11_envelope(seed: u64) -> Vec<ExperimentConfig> {
    let anchor = "convergence to a neighborhood of the solution";
    let sps = StepRule::Sps {
        lambda: 1.0,
        gamma_init: 0.5,
    };
    vec![
        config(
            "two-quadratics-sps",
            anchor,
            "two-quadratics",
            sps.clone(),
            SamplerSpec::Uniform { seed },
            30,
            vec![3.0],
            10_000,
            checks(vec![Check::Fact11Envelope { ks: None }]),
        ),
        config(
            "interpolation-sps",
            anchor,
            "interpolation",
            sps,
            SamplerSpec::Uniform { seed },
            30,
            vec![3.0, 3.0],
            10_000,
            checks(vec![
                Check::Fact11Envelope { ks: None },
                Check::GapDecay {
                    from: 100,
                    to: 10_000,
                    factor: 10.0,
                },
            ]),
        ),
    ]
}

fn fact14_envelope(seed: u64) -> Vec<ExperimentConfig> {
    let anchor = "decreasing Polyak stepsize rate in expectation";
    let env = || Check::Fact14Envelope {
        ks: None,
        sigma_b_sq: None,
    };
    vec![
        config(
            "two-quadratics-decsps",
            anchor,
            "two-quadratics",
            decsps(inv_sqrt(1.0), 0.5),
            SamplerSpec::Uniform { seed },
            30,
            vec![3.0],
            10_000,
            checks(vec![env()]),
        ),
        config(
            "two-quadratics-decsps-constant-lambda",
            anchor,
            "two-quadratics",
            decsps(LambdaSchedule::Constant { value: 1.0 }, 0.5),
            SamplerSpec::Uniform { seed },
            30,
            vec![3.0],
            10_000,
            checks(vec![env()]),
        ),
        config(
            "interpolation-decsps",
            anchor,
            "interpolation",
            decsps(inv_sqrt(1.0), 0.5),
            SamplerSpec::Uniform { seed },
            30,
            vec![3.0, 3.0],
            10_000,
            checks(vec![
                env(),
                Check::GapDecay {
                    from: 100,
                    to: 10_000,
                    factor: 10.0,
                },
            ]),
        ),
    ]
}

/// Starting point used for a library instance in invariant sweeps.
pub fn default_x0(problem: &str) -> Vec<f64> {
    match problem {
        "interpolation" | "balls" | "halfspaces" | "orthant-slab" | "mixed" => vec![3.0, -2.0],
        "softplus-escape" => vec![0.0],
        _ => vec![3.0],
    }
}

fn stepsize_invariants(seed: u64) -> Vec<ExperimentConfig> {
    let anchor = "γ_k is a decreasing stepsize within the sandwich";
    let verify = || {
        checks(vec![
            Check::StepsizeSandwich,
            Check::MonotoneStepsize,
            Check::Condition31 { m: None },
            Check::DescentRecursion { m: None },
        ])
    };
    let mut out: Vec<ExperimentConfig> = crate::problems::library::NAMES
        .iter()
        .map(|&p| {
            config(
                &format!("{p}-decsps"),
                anchor,
                p,
                decsps(inv_sqrt(1.0), 0.5),
                SamplerSpec::Uniform { seed },
                20,
                default_x0(p),
                10_000,
                verify(),
            )
        })
        .collect();
    for (tag, schedule) in [
        (
            "power",
            LambdaSchedule::Power {
                theta: 0.7,
                scale: 1.0,
            },
        ),
        (
            "log-power",
            LambdaSchedule::LogPower {
                theta: 0.5,
                scale: 0.5,
                shift: None,
            },
        ),
    ] {
        out.push(config(
            &format!("mixed-decsps-{tag}"),
            anchor,
            "mixed",
            decsps(schedule, 0.8),
            SamplerSpec::Uniform { seed },
            20,
            default_x0("mixed"),
            10_000,
            verify(),
        ));
    }
    for c in &mut out {
        c.output.csv_stride = 10;
    }
    out
}

fn negative_controls(seed: u64) -> Vec<ExperimentConfig> {
    let uniform = SamplerSpec::Uniform { seed };
    vec![
        config(
            "halved-m",
            "m = 2 L_max γ is tight on quadratics",
            "two-quadratics",
            StepRule::Constant { gamma: 0.4 },
            uniform,
            5,
            vec![3.0],
            1_000,
            vec![
                VerifySpec::new(Check::Condition31 { m: None }),
                VerifySpec::negative(Check::Condition31 { m: Some(0.4) }),
                VerifySpec::negative(Check::DescentRecursion { m: Some(0.4) }),
            ],
        ),
        config(
            "c1-against-finite-bound",
            "no finite bound holds along a fixed batch without minimizer",
            "softplus-escape",
            escape_rule(),
            SamplerSpec::Fixed {
                batch: vec![0],
                seed,
            },
            1,
            vec![0.0],
            10_000,
            vec![VerifySpec::negative(Check::Bounded { bound: Some(1e4) })],
        ),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry() {
        assert!(RECIPES.len() >= 6);
        for name in ["c1-divergence", "fact14-envelope"] {
            assert!(find(name).is_ok());
        }
        assert!(matches!(find("nope"), Err(Error::Config { .. })));
    }

    #[test]
    fn every_recipe_config_validates() {
        for r in RECIPES {
            for c in r.configs(DEFAULT_SEED, None) {
                c.validate()
                    .unwrap_or_else(|e| panic!("{}/{}: {e}", r.name, c.name));
                let text = c.to_toml_string().unwrap();
                assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), c);
            }
        }
    }

    #[test]
    fn short_negative_controls() {
        let out = run_recipe(find("negative-controls").unwrap(), 1, Some(500)).unwrap();
        assert!(out.ok, "{:#?}", out.lines());
    }
}
