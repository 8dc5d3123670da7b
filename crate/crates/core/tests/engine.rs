use std::collections::HashMap;
use std::path::Path;

use polyak_core::analysis::verify_descent_recursion;
use polyak_core::config::ExperimentConfig;
use polyak_core::engine::{
    par_seeds, parse_csv, run, run_spec, RunPolicy, RunStatus, Sampler, SamplerSpec, Trajectory,
};
use polyak_core::experiment::run_experiment;
use polyak_core::problems::{library, ConvexComponent, FiniteSumProblem};
use polyak_core::recipes::default_x0;
use polyak_core::stepsize::{LambdaSchedule, StepRule};

fn rules() -> Vec<StepRule> {
    vec![
        StepRule::Constant { gamma: 0.3 },
        StepRule::Sps {
            lambda: 1.0,
            gamma_init: 0.7,
        },
        StepRule::Decsps {
            schedule: LambdaSchedule::inv_sqrt(),
            gamma_init: 0.5,
        },
    ]
}

#[test]
fn records_replay_to_the_iterates() {
    for name in library::NAMES {
        let p = library::instance(name).unwrap();
        for rule in rules() {
            let t = run_spec(
                &p,
                &rule,
                &SamplerSpec::Uniform { seed: 3 },
                &default_x0(name),
                2000,
                &RunPolicy::default(),
            )
            .unwrap();
            let dev = t.replay_deviation(&p);
            assert!(
                dev <= 1e-12,
                "{name} {}: replay deviation {dev}",
                rule.name()
            );
        }
    }
}

#[test]
fn running_average_recursion_matches_direct_average() {
    let p = library::instance("mixed").unwrap();
    let t = run_spec(
        &p,
        &rules()[2],
        &SamplerSpec::Uniform { seed: 5 },
        &[4.0, -3.0],
        500,
        &RunPolicy::default(),
    )
    .unwrap();
    let mut avg = t.x(0).to_vec();
    for k in 1..=t.len() + 1 {
        let direct = t.running_average(k).unwrap();
        for (a, d) in avg.iter().zip(&direct) {
            assert!((a - d).abs() <= 1e-12 * (1.0 + d.abs()));
        }
        if k <= t.len() {
            let x = t.x(k);
            for (a, xi) in avg.iter_mut().zip(x) {
                *a += (xi - *a) / (k as f64 + 1.0);
            }
        }
    }
    assert!(t.running_average(0).is_err());
    assert!(t.running_average(t.len() + 2).is_err());
}

#[test]
fn uniform_sampler_covers_all_subsets_evenly() {
    let mut s = Sampler::new(&SamplerSpec::Uniform { seed: 99 }, 5, 2).unwrap();
    let draws = 100_000;
    let mut counts: HashMap<Vec<usize>, usize> = HashMap::new();
    for _ in 0..draws {
        *counts.entry(s.sample()).or_default() += 1;
    }
    assert_eq!(counts.len(), 10);
    let expected = draws as f64 / 10.0;
    let chi2: f64 = counts
        .values()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    // 9 degrees of freedom, 99.9% quantile
    assert!(chi2 < 27.88, "chi-square {chi2}");
}

#[test]
fn resampling_avoids_flat_batches() {
    // x0 = 1 minimizes f_0 and f_1 but not f_2
    let q = ConvexComponent::quadratic;
    let p = FiniteSumProblem::new(
        vec![
            q(vec![1.0], 1.0).unwrap(),
            q(vec![1.0], 2.0).unwrap(),
            q(vec![-1.0], 1.0).unwrap(),
        ],
        1,
    )
    .unwrap();
    let mut sampler = Sampler::new(
        &SamplerSpec::Fixed {
            batch: vec![0],
            seed: 8,
        },
        3,
        1,
    )
    .unwrap();
    let t = run(
        &p,
        &rules()[0],
        &mut sampler,
        &[1.0],
        1,
        &RunPolicy::default(),
    )
    .unwrap();
    assert_eq!(t.batch(0), &[2]);
    assert_eq!(t.resamples, 2);
    assert_eq!(t.status, RunStatus::Completed);
}

#[test]
fn ensembles_do_not_depend_on_worker_count() {
    let p = library::instance("balls").unwrap();
    let go = |workers| {
        par_seeds(10, 8, workers, |seed| {
            run_spec(
                &p,
                &rules()[2],
                &SamplerSpec::Uniform { seed },
                &[4.0, -3.0],
                300,
                &RunPolicy::default(),
            )
            .unwrap()
            .to_csv(true, 1)
        })
    };
    assert_eq!(go(1), go(4));
}

#[test]
fn written_csv_supports_offline_checks() {
    let config = ExperimentConfig::from_toml_str(
        r#"
name = "offline"
x0 = [2.5, -1.0]
iterations = 400

[problem]
library = "halfspaces"

[stepsize]
rule = "decsps"
gamma_init = 1.0
schedule = { kind = "inv_sqrt" }

[sampler]
kind = "uniform"
seed = 4
"#,
    )
    .unwrap();
    let problem = config.validate().unwrap();
    let outcome = run_experiment(&config).unwrap();
    let dir = tempfile::tempdir().unwrap();
    outcome.write(dir.path()).unwrap();
    let path = dir.path().join("offline.seed4.csv");
    let text = std::fs::read_to_string(&path).unwrap();
    let rows = parse_csv(&text, &path).unwrap();
    assert_eq!(rows.len(), 400);
    let t = Trajectory::from_csv_rows(&rows, &path).unwrap();
    assert_eq!(t.len(), 399);
    let r = verify_descent_recursion(&t, &problem, 1.0).unwrap();
    assert!(r.pass, "{}", r.line());
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("offline.json")).unwrap())
            .unwrap();
    assert_eq!(json["runs"][0]["status"], "completed");
    assert_eq!(json["runs"][0]["iterations"], 400);
}

#[test]
fn malformed_csv_is_rejected() {
    let path = Path::new("bad.csv");
    assert!(parse_csv("k,batch\n0,1\n", path).is_err());
    assert!(parse_csv("", path).is_err());
}
