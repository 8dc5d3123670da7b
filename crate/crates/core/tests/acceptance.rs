//! End-to-end acceptance run: one PASS/FAIL line per criterion.

mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use common::{random_set, KINDS, SET_PARAMS};
use polyak_core::analysis::global_optimum;
use polyak_core::config::ExperimentConfig;
use polyak_core::engine::{par_seeds, run_spec, RunPolicy, RunStatus, SamplerSpec, Trajectory};
use polyak_core::problems::{library, ComponentKind};
use polyak_core::recipes::{self, default_x0, RecipeOutcome, DEFAULT_SEED, RECIPES};
use polyak_core::rng::SplitMix64;
use polyak_core::stepsize::{LambdaSchedule, StepRule};

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Verdict {
            pass,
            detail: detail.into(),
        }
    }
}

fn within(limit_s: u64, elapsed: Duration, v: Verdict) -> Verdict {
    let fast = elapsed <= Duration::from_secs(limit_s);
    Verdict::new(
        v.pass && fast,
        format!(
            "{} ({:.2}s, limit {limit_s}s)",
            v.detail,
            elapsed.as_secs_f64()
        ),
    )
}

fn recipe(name: &str) -> RecipeOutcome {
    recipes::run_recipe(recipes::find(name).unwrap(), DEFAULT_SEED, None).unwrap()
}

fn failing_lines(o: &RecipeOutcome) -> Vec<String> {
    o.experiments
        .iter()
        .flat_map(|e| e.checks.iter().filter(|c| !c.ok).map(|c| c.line(&e.name)))
        .collect()
}

fn experiment_config(recipe: &str, name: &str) -> ExperimentConfig {
    recipes::find(recipe)
        .unwrap()
        .configs(DEFAULT_SEED, None)
        .into_iter()
        .find(|c| c.name == name)
        .unwrap()
}

struct StepStats {
    sandwich: f64,
    monotone: f64,
    surrogate: f64,
    trajectories: usize,
    steps: usize,
}

/// DecSPS on every library problem, with bounds recomputed from their formulas.
fn decsps_invariants() -> StepStats {
    let variants = [(1.0, 0.5), (1.9, 2.0), (0.5, 0.1)];
    let mut st = StepStats {
        sandwich: f64::INFINITY,
        monotone: f64::INFINITY,
        surrogate: f64::INFINITY,
        trajectories: 0,
        steps: 0,
    };
    for name in library::NAMES {
        let p = library::instance(name).unwrap();
        let l_max = p
            .components()
            .iter()
            .map(|c| c.smoothness())
            .fold(0.0, f64::max);
        for (scale, gamma_init) in variants {
            let rule = StepRule::Decsps {
                schedule: LambdaSchedule::InvSqrt { scale },
                gamma_init,
            };
            let x0 = default_x0(name);
            let trajs: Vec<Trajectory> = par_seeds(1000, 20, 0, |seed| {
                run_spec(
                    &p,
                    &rule,
                    &SamplerSpec::Uniform { seed },
                    &x0,
                    10_000,
                    &RunPolicy::default(),
                )
                .unwrap()
            });
            let lambda0 = scale;
            let ratio = gamma_init / lambda0;
            let lo_c = (1.0 / (2.0 * l_max)).min(ratio);
            for t in &trajs {
                st.trajectories += 1;
                st.steps += t.len();
                for k in 0..t.len() {
                    let lam = scale / ((k + 1) as f64).sqrt();
                    let g = t.gammas[k];
                    st.sandwich = st
                        .sandwich
                        .min(g - lo_c * lam + 1e-12)
                        .min(ratio * lam - g + 1e-12);
                    if k + 1 < t.len() {
                        st.monotone = st.monotone.min(g + 1e-15 - t.gammas[k + 1]);
                    }
                    let slack = lambda0 * (t.fvals[k] - t.lowers[k]) - g * t.gradsqs[k];
                    st.surrogate = st.surrogate.min(slack);
                }
            }
        }
    }
    st
}

fn criterion_1_2(stats: &mut Option<StepStats>) -> (Verdict, Verdict) {
    let start = Instant::now();
    let st = decsps_invariants();
    let elapsed = start.elapsed();
    let one = within(
        10,
        elapsed,
        Verdict::new(
            st.sandwich >= 0.0,
            format!(
                "{} trajectories, {} steps, worst sandwich margin {:.3e}",
                st.trajectories, st.steps, st.sandwich
            ),
        ),
    );
    let two = Verdict::new(
        st.monotone >= 0.0,
        format!("worst γ_k + 1e-15 − γ_(k+1) = {:.3e}", st.monotone),
    );
    *stats = Some(st);
    (one, two)
}

fn criterion_3(stats: &StepStats, runs: &mut BTreeMap<String, RecipeOutcome>) -> Verdict {
    let start = Instant::now();
    let inv = recipe("stepsize-invariants");
    let neg = recipe("negative-controls");
    let elapsed = start.elapsed();
    let mut bad = failing_lines(&inv);
    bad.extend(failing_lines(&neg));
    let halved = neg
        .experiments
        .iter()
        .find(|e| e.name == "halved-m")
        .unwrap()
        .checks
        .iter()
        .any(|c| c.expect_fail && c.report.check == "condition-31" && !c.report.pass);
    let verified = inv
        .experiments
        .iter()
        .map(|e| e.checks.len())
        .sum::<usize>();
    let v = Verdict::new(
        bad.is_empty() && halved && stats.surrogate >= -1e-10,
        format!(
            "{verified} recipe checks, recomputed surrogate slack {:.3e}, halved-m rejected: {halved}{}",
            stats.surrogate,
            if bad.is_empty() { String::new() } else { format!("; failing: {bad:?}") }
        ),
    );
    runs.insert(inv.recipe.clone(), inv);
    runs.insert(neg.recipe.clone(), neg);
    within(10, elapsed, v)
}

fn criterion_4(runs: &mut BTreeMap<String, RecipeOutcome>) -> Verdict {
    let start = Instant::now();
    let o = recipe("c2-boundedness");
    let elapsed = start.elapsed();
    let bad = failing_lines(&o);
    // D = ½, c = M = 1 + √2, bound = 4c²(1 + γL)² with γ = ½, L = 1
    let expected = 9.0 * (1.0 + 2f64.sqrt()).powi(2);
    let cert = o
        .experiments
        .iter()
        .find(|e| e.name == "two-quadratics-decsps-lambda1")
        .and_then(|e| e.certificate.clone())
        .unwrap();
    let cert_ok = (cert.bound - expected).abs() <= 1e-9 * expected && (cert.d - 0.5).abs() <= 1e-15;
    let mut worst = 0.0f64;
    for e in &o.experiments {
        for r in &e.runs {
            worst = worst.max(r.summary.max_xnorm * r.summary.max_xnorm);
        }
    }
    let shape_ok = o.experiments.iter().all(|e| e.runs.len() == 50)
        && ["lambda0.5", "lambda1", "lambda1.9", "constant"]
            .iter()
            .all(|s| {
                o.experiments.iter().any(|e| {
                    e.name
                        == format!(
                            "two-quadratics-{}",
                            if *s == "constant" {
                                "constant".to_string()
                            } else {
                                format!("decsps-{s}")
                            }
                        )
                })
            });
    let v = Verdict::new(
        bad.is_empty() && cert_ok && shape_ok,
        format!(
            "{} experiments x 50 seeds x 1e5 steps, two-quadratics bound {:.6} (expected {:.6}), largest max ‖x_k‖² {:.3}{}",
            o.experiments.len(),
            cert.bound,
            expected,
            worst,
            if bad.is_empty() { String::new() } else { format!("; failing: {bad:?}") }
        ),
    );
    runs.insert(o.recipe.clone(), o);
    within(60, elapsed, v)
}

fn criterion_5(runs: &mut BTreeMap<String, RecipeOutcome>) -> Verdict {
    let start = Instant::now();
    let o = recipe("c1-divergence");
    let c = experiment_config("c1-divergence", "escape-decades");
    let p = c.validate().unwrap();
    let t = run_spec(&p, &c.stepsize, &c.sampler, &c.x0, 1_000_000, &c.policy).unwrap();
    let elapsed = start.elapsed();
    let norm = |k: usize| t.x(k).iter().map(|v| v * v).sum::<f64>().sqrt();
    let first_escape = (0..=t.len()).find(|&k| norm(k) > 1e3);
    let g_ratio = t.gradsqs[t.len() - 1] / t.gradsqs[0];
    let (n5, n6) = (norm(100_000), norm(1_000_000));
    let bad = failing_lines(&o);
    let v = Verdict::new(
        bad.is_empty() && first_escape.is_some() && g_ratio < 1e-6 && n6 > n5 && t.len() == 1_000_000,
        format!(
            "‖x_k‖ > 1e3 first at k={first_escape:?}, gradsq ratio {g_ratio:.3e}, ‖x_1e5‖={n5:.2}, ‖x_1e6‖={n6:.2}{}",
            if bad.is_empty() { String::new() } else { format!("; failing: {bad:?}") }
        ),
    );
    runs.insert(o.recipe.clone(), o);
    within(60, elapsed, v)
}

fn criterion_6(runs: &mut BTreeMap<String, RecipeOutcome>) -> Verdict {
    let start = Instant::now();
    let o = recipe("projection-equivalence");
    let mut worst = 0.0f64;
    let mut regimes = (false, false);
    let mut exhausted = 0;
    for c in recipes::find("projection-equivalence")
        .unwrap()
        .configs(DEFAULT_SEED, None)
    {
        let p = c.validate().unwrap();
        let StepRule::Decsps {
            schedule,
            gamma_init,
        } = &c.stepsize
        else {
            unreachable!()
        };
        let ratio = gamma_init / schedule.lambda0();
        if ratio < 0.5 {
            regimes.0 = true;
        } else {
            regimes.1 = true;
        }
        let t = run_spec(&p, &c.stepsize, &c.sampler, &c.x0, c.iterations, &c.policy).unwrap();
        let steps = c.iterations;
        assert_eq!(steps, 10_000);
        match t.status {
            RunStatus::Completed => assert_eq!(t.len(), steps),
            // every set contains x_k: the remaining relaxed steps must leave it in place
            RunStatus::ResampleExhausted {
                exhaustive: true, ..
            } => exhausted += 1,
            other => panic!("{}: {other:?}", c.name),
        }
        let mut z = c.x0.clone();
        for k in 0..steps {
            let i = if k < t.len() {
                t.batch(k)[0]
            } else {
                k % p.n()
            };
            let ComponentKind::SqDist { set } = p.components()[i].kind() else {
                unreachable!()
            };
            let relax = schedule.at(k as u64) * ratio.min(0.5);
            let pz = set.project(&z).unwrap();
            for (zi, pi) in z.iter_mut().zip(&pz) {
                *zi += relax * (pi - *zi);
            }
            let x = t.x((k + 1).min(t.len()));
            for (a, b) in z.iter().zip(x) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    let elapsed = start.elapsed();
    let bad = failing_lines(&o);
    let v = Verdict::new(
        bad.is_empty() && worst <= 1e-12 && regimes == (true, true),
        format!(
            "{} runs, worst coordinate deviation {worst:.3e} over 1e4 steps ({exhausted} replayed runs reached the intersection early), cap and ratio regimes covered: {}",
            o.experiments.iter().map(|e| e.runs.len()).sum::<usize>(),
            regimes == (true, true)
        ),
    );
    runs.insert(o.recipe.clone(), o);
    within(5, elapsed, v)
}

fn criterion_7(runs: &mut BTreeMap<String, RecipeOutcome>) -> Verdict {
    let start = Instant::now();
    let f11 = recipe("fact11-envelope");
    let f14 = recipe("fact14-envelope");
    let elapsed = start.elapsed();
    // f = ½x² + ½ on two-quadratics; both interpolation components vanish at (1, −½)
    let (_, mu_two) = global_optimum(&library::instance("two-quadratics").unwrap()).unwrap();
    let (x_int, mu_int) = global_optimum(&library::instance("interpolation").unwrap()).unwrap();
    let oracle_ok = (mu_two - 0.5).abs() <= 1e-15
        && mu_int.abs() <= 1e-15
        && (x_int[0] - 1.0).abs() <= 1e-12
        && (x_int[1] + 0.5).abs() <= 1e-12;
    let mut bad = failing_lines(&f11);
    bad.extend(failing_lines(&f14));
    let ensembles = f11
        .experiments
        .iter()
        .chain(&f14.experiments)
        .all(|e| e.runs.len() >= 30);
    let decays = f11
        .experiments
        .iter()
        .chain(&f14.experiments)
        .flat_map(|e| &e.checks)
        .filter(|c| c.report.check == "gap-decay" && c.report.pass)
        .count();
    let lines: Vec<String> = f11.lines().into_iter().chain(f14.lines()).collect();
    let v = Verdict::new(
        bad.is_empty() && oracle_ok && ensembles && decays >= 2,
        format!(
            "{} envelope/decay checks over >=30 seeds, optimal values match ({oracle_ok}){}",
            lines.len(),
            if bad.is_empty() {
                String::new()
            } else {
                format!("; failing: {bad:?}")
            }
        ),
    );
    runs.insert(f11.recipe.clone(), f11);
    runs.insert(f14.recipe.clone(), f14);
    within(60, elapsed, v)
}

fn criterion_8() -> Verdict {
    let start = Instant::now();
    let mut rng = SplitMix64::new(DEFAULT_SEED);
    let mut unit = || (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
    let mut worst = [0.0f64; 3];
    let mut misclassified = 0usize;
    let pairs = 10_000;
    for kind in KINDS {
        for _ in 0..pairs {
            let params: Vec<f64> = (0..SET_PARAMS).map(|_| unit()).collect();
            let t = random_set(kind, &params);
            let x: Vec<f64> = (0..3).map(|_| 10.0 * unit() - 5.0).collect();
            let y: Vec<f64> = (0..3).map(|_| 10.0 * unit() - 5.0).collect();
            let px = t.set.project(&x).unwrap();
            let py = t.set.project(&y).unwrap();
            let ppx = t.set.project(&px).unwrap();
            let idem = ppx
                .iter()
                .zip(&px)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            let dp: Vec<f64> = px.iter().zip(&py).map(|(a, b)| a - b).collect();
            let lhs: f64 = dp.iter().map(|v| v * v).sum();
            let rhs: f64 = dp
                .iter()
                .zip(x.iter().zip(&y))
                .map(|(d, (a, b))| d * (a - b))
                .sum();
            worst[0] = worst[0].max(idem);
            worst[1] = worst[1].max(lhs - rhs);
            for z in [&x, &y] {
                let v = (t.violation)(z);
                let moved = t
                    .set
                    .project(z)
                    .unwrap()
                    .iter()
                    .zip(z.iter())
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                if v <= 0.0 {
                    worst[2] = worst[2].max(moved);
                } else if v > 1e-9 && moved <= 1e-12 {
                    misclassified += 1;
                }
            }
        }
    }
    let elapsed = start.elapsed();
    let v = Verdict::new(
        worst.iter().all(|w| *w <= 1e-12) && misclassified == 0,
        format!(
            "{pairs} pairs x {} kinds: idempotence {:.2e}, firm nonexpansiveness {:.2e}, fixed points moved {:.2e}, outside points left fixed {misclassified}",
            KINDS.len(),
            worst[0],
            worst[1],
            worst[2]
        ),
    );
    within(5, elapsed, v)
}

fn read_tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            for (k, v) in read_tree(&path) {
                out.insert(
                    format!("{}/{k}", path.file_name().unwrap().to_string_lossy()),
                    v,
                );
            }
        } else {
            out.insert(
                path.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&path).unwrap(),
            );
        }
    }
    out
}

fn criterion_9(runs: &mut BTreeMap<String, RecipeOutcome>) -> Verdict {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut csvs = 0;
    let mut differing = Vec::new();
    for r in RECIPES {
        let first = runs.remove(r.name).unwrap_or_else(|| recipe(r.name));
        let second = recipe(r.name);
        first.write(a.path()).unwrap();
        second.write(b.path()).unwrap();
    }
    let (ta, tb) = (read_tree(a.path()), read_tree(b.path()));
    for (k, v) in &ta {
        if k.ends_with(".csv") {
            csvs += 1;
        }
        if tb.get(k) != Some(v) {
            differing.push(k.clone());
        }
    }
    let same_set = ta.keys().eq(tb.keys());
    Verdict::new(
        differing.is_empty() && same_set && csvs > 0,
        format!(
            "{} recipes run twice, {csvs} CSV and {} JSON files byte-identical{}",
            RECIPES.len(),
            ta.len() - csvs,
            if differing.is_empty() {
                String::new()
            } else {
                format!("; differing: {differing:?}")
            }
        ),
    )
}

fn main() {
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let names = [
        "stepsize sandwich",
        "monotone stepsize",
        "surrogate inequality and descent recursion",
        "bounded iterates under the certificate",
        "divergence on a batch without minimizer",
        "SGD matches relaxed random projections",
        "convergence envelopes",
        "projector properties",
        "determinism",
    ];
    let mut runs = BTreeMap::new();
    let mut stats = None;
    let (v1, v2) = criterion_1_2(&mut stats);
    let verdicts = vec![
        v1,
        v2,
        criterion_3(stats.as_ref().unwrap(), &mut runs),
        criterion_4(&mut runs),
        criterion_5(&mut runs),
        criterion_6(&mut runs),
        criterion_7(&mut runs),
        criterion_8(),
        criterion_9(&mut runs),
    ];
    let mut failed = 0;
    for (i, (name, v)) in names.iter().zip(&verdicts).enumerate() {
        println!(
            "{} criterion {} {name}: {}",
            if v.pass { "PASS" } else { "FAIL" },
            i + 1,
            v.detail
        );
        failed += usize::from(!v.pass);
    }
    println!(
        "acceptance: {}/{} criteria pass",
        verdicts.len() - failed,
        verdicts.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
