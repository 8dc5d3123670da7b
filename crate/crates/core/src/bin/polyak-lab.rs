use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::info;

use polyak_core::analysis::{self, Report};
use polyak_core::config::ExperimentConfig;
use polyak_core::engine::{parse_csv, CsvRow, Trajectory};
use polyak_core::experiment::run_experiment;
use polyak_core::recipes::{self, DEFAULT_SEED, RECIPES};
use polyak_core::stepsize::{surrogate_constant, StepRule};
use polyak_core::{Error, Result};

#[derive(Parser)]
#[command(
    name = "polyak-lab",
    version,
    about = "SGD with Polyak stepsizes: runs, recipes and trajectory checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        iters: Option<usize>,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        workers: Option<usize>,
        /// Output directory [env: POLYAK_LAB_OUT, default: polyak-out]
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a named recipe.
    Recipe {
        name: String,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        iters: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print the recipe configs as TOML instead of running them.
        #[arg(long)]
        print_config: bool,
    },
    /// List recipes.
    List,
    /// Check a trajectory CSV.
    Verify {
        csv: PathBuf,
        #[arg(long, value_enum)]
        check: CsvCheck,
        /// Surrogate constant; defaults to the one certified for the config's rule.
        #[arg(long)]
        m: Option<f64>,
        /// Bound on ‖x_k‖²; defaults to the certificate of the config.
        #[arg(long)]
        bound: Option<f64>,
        /// Config the trajectory was produced with.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Also print the report as JSON.
        #[arg(long)]
        json: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum CsvCheck {
    #[value(name = "condition-31")]
    Condition31,
    DescentRecursion,
    MonotoneStepsize,
    StepsizeSandwich,
    Bounded,
}

const EXIT_FAIL: u8 = 1;

fn out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os("POLYAK_LAB_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("polyak-out"))
}

fn verdict(ok: bool) -> ExitCode {
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAIL)
    }
}

fn cmd_run(
    path: &Path,
    seed: Option<u64>,
    iters: Option<usize>,
    runs: Option<usize>,
    workers: Option<usize>,
    out: Option<PathBuf>,
) -> Result<ExitCode> {
    let mut config = ExperimentConfig::load(path)?;
    if let Some(s) = seed {
        config = config.with_seed(s);
    }
    if let Some(k) = iters {
        config = config.with_iterations(k);
    }
    if let Some(r) = runs {
        config.runs = r;
    }
    if let Some(w) = workers {
        config.workers = w;
    }
    let dir = config.output.dir.clone().unwrap_or_else(|| out_dir(out));
    info!(
        "running {} ({} runs x {} iterations)",
        config.name, config.runs, config.iterations
    );
    let outcome = run_experiment(&config)?;
    for line in outcome.lines() {
        println!("{line}");
    }
    for note in &outcome.notes {
        println!("note: {note}");
    }
    for p in outcome.write(&dir)? {
        info!("wrote {}", p.display());
    }
    Ok(verdict(outcome.ok))
}

fn cmd_recipe(
    name: &str,
    seed: u64,
    iters: Option<usize>,
    out: Option<PathBuf>,
    print_config: bool,
) -> Result<ExitCode> {
    let recipe = recipes::find(name)?;
    if print_config {
        for c in recipe.configs(seed, iters) {
            println!("# --- {}\n{}", c.name, c.to_toml_string()?);
        }
        return Ok(ExitCode::SUCCESS);
    }
    let outcome = recipes::run_recipe(recipe, seed, iters)?;
    for line in outcome.lines() {
        println!("{line}");
    }
    let dir = out_dir(out);
    outcome.write(&dir)?;
    info!("artifacts in {}", dir.join(recipe.name).display());
    println!(
        "{} recipe {}",
        if outcome.ok { "PASS" } else { "FAIL" },
        recipe.name
    );
    Ok(verdict(outcome.ok))
}

fn cmd_list() {
    println!("{:<24} {:<62} expected", "recipe", "anchor");
    for r in RECIPES {
        println!("{:<24} {:<62} {}", r.name, r.anchor, r.expected);
    }
}

fn config_rule(config: &Option<ExperimentConfig>, what: &str) -> Result<(StepRule, f64)> {
    let c = config
        .as_ref()
        .ok_or_else(|| Error::config("--config", format!("{what} needs the run config")))?;
    let problem = c.validate()?;
    Ok((c.stepsize.clone(), problem.l_max()))
}

fn cmd_verify(
    csv: &Path,
    check: CsvCheck,
    m: Option<f64>,
    bound: Option<f64>,
    config: Option<PathBuf>,
    json: bool,
) -> Result<ExitCode> {
    let text = std::fs::read_to_string(csv).map_err(|e| Error::Io {
        path: csv.to_path_buf(),
        source: e,
    })?;
    let rows = parse_csv(&text, csv)?;
    let config = config.map(|p| ExperimentConfig::load(&p)).transpose()?;
    let surrogate_m = |m: Option<f64>| -> Result<f64> {
        match m {
            Some(m) => Ok(m),
            None => {
                let (rule, l_max) = config_rule(&config, "the default m")?;
                Ok(surrogate_constant(&rule, l_max)?.m)
            }
        }
    };
    let col = |f: fn(&CsvRow) -> f64| rows.iter().map(f).collect::<Vec<f64>>();
    let ks: Vec<usize> = rows.iter().map(|r| r.k).collect();
    let report: Report = match check {
        CsvCheck::Condition31 => analysis::condition_31_columns(
            ks.iter().copied(),
            &col(|r| r.gamma),
            &col(|r| r.fval),
            &col(|r| r.gradsq),
            &col(|r| r.lower),
            surrogate_m(m)?,
        ),
        CsvCheck::MonotoneStepsize => analysis::monotone_columns(&ks, &col(|r| r.gamma)),
        CsvCheck::StepsizeSandwich => {
            let (rule, l_max) = config_rule(&config, "stepsize-sandwich")?;
            let StepRule::Decsps {
                schedule,
                gamma_init,
            } = &rule
            else {
                return Err(Error::config("stepsize", "sandwich bounds apply to decsps"));
            };
            analysis::sandwich_columns(&ks, &col(|r| r.gamma), schedule, *gamma_init, l_max)?
        }
        CsvCheck::Bounded => {
            let b = match bound {
                Some(b) => b,
                None => {
                    let c = config.as_ref().ok_or_else(|| {
                        Error::config("--bound", "give --bound or --config for the certificate")
                    })?;
                    let problem = c.validate()?;
                    let sur = surrogate_constant(&c.stepsize, problem.l_max())?;
                    analysis::boundedness_certificate(&problem, sur.gamma_cap, sur.m, &c.x0)?.bound
                }
            };
            analysis::check_norms_bounded(rows.iter().map(|r| (r.k, r.xnorm * r.xnorm)), b)
        }
        CsvCheck::DescentRecursion => {
            let c = config.as_ref().ok_or_else(|| {
                Error::config("--config", "descent-recursion needs the run config")
            })?;
            let problem = c.validate()?;
            let traj = Trajectory::from_csv_rows(&rows, csv)?;
            analysis::verify_descent_recursion(&traj, &problem, surrogate_m(m)?)?
        }
    };
    println!("{}", report.line());
    if json {
        println!("{}", serde_json::to_string(&report)?);
    }
    Ok(verdict(report.pass))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            seed,
            iters,
            runs,
            workers,
            out,
        } => cmd_run(&config, seed, iters, runs, workers, out),
        Command::Recipe {
            name,
            seed,
            iters,
            out,
            print_config,
        } => cmd_recipe(&name, seed, iters, out, print_config),
        Command::List => {
            cmd_list();
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify {
            csv,
            check,
            m,
            bound,
            config,
            json,
        } => cmd_verify(&csv, check, m, bound, config, json),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
