//! Batch samplers and the SGD loop `x_{k+1} = x_k − γ_k ∇f_{B_k}(x_k)`.
//!
//! When the sampled batch has a vanishing gradient the loop resamples a
//! different batch, never repeating one already rejected in the same
//! iteration. The stepsize state is held fixed while resampling and advances
//! once per accepted step.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{axpy, is_finite, norm, norm_sq};
use crate::problems::{Batch, FiniteSumProblem};
use crate::rng::{binomial, rank_combination, unrank_combination, SplitMix64};
use crate::stepsize::StepRule;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SamplerSpec {
    Uniform {
        seed: u64,
    },
    /// Always the same batch; `seed` only drives resampling.
    Fixed {
        batch: Batch,
        #[serde(default)]
        seed: u64,
    },
    Cyclic {
        batches: Vec<Batch>,
        #[serde(default)]
        seed: u64,
    },
}

impl SamplerSpec {
    pub fn seed(&self) -> u64 {
        match self {
            SamplerSpec::Uniform { seed }
            | SamplerSpec::Fixed { seed, .. }
            | SamplerSpec::Cyclic { seed, .. } => *seed,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut s = self.clone();
        match &mut s {
            SamplerSpec::Uniform { seed: s }
            | SamplerSpec::Fixed { seed: s, .. }
            | SamplerSpec::Cyclic { seed: s, .. } => *s = seed,
        }
        s
    }
}

#[derive(Clone, Debug)]
enum SamplerKind {
    Uniform,
    Fixed(Batch),
    Cyclic { batches: Vec<Batch>, cursor: usize },
}

/// Stateful batch source for one run.
#[derive(Clone, Debug)]
pub struct Sampler {
    kind: SamplerKind,
    n: usize,
    b: usize,
    total: u64,
    rng: SplitMix64,
}

fn normalize_batch(batch: &[usize], n: usize, b: usize) -> Result<Batch> {
    let mut sorted = batch.to_vec();
    sorted.sort_unstable();
    if sorted.len() != b {
        return Err(Error::config(
            "sampler",
            format!("batch {batch:?} has size {}, expected {b}", batch.len()),
        ));
    }
    rank_combination(n, &sorted).map_err(|e| Error::config("sampler", e.to_string()))?;
    Ok(sorted)
}

impl Sampler {
    pub fn new(spec: &SamplerSpec, n: usize, b: usize) -> Result<Self> {
        if b == 0 || b > n {
            return Err(Error::invalid(format!(
                "batch size {b} must lie in 1..={n}"
            )));
        }
        let total = binomial(n, b)?;
        let kind = match spec {
            SamplerSpec::Uniform { .. } => SamplerKind::Uniform,
            SamplerSpec::Fixed { batch, .. } => SamplerKind::Fixed(normalize_batch(batch, n, b)?),
            SamplerSpec::Cyclic { batches, .. } => {
                if batches.is_empty() {
                    return Err(Error::config(
                        "sampler.batches",
                        "cyclic sampler needs batches",
                    ));
                }
                SamplerKind::Cyclic {
                    batches: batches
                        .iter()
                        .map(|bt| normalize_batch(bt, n, b))
                        .collect::<Result<_>>()?,
                    cursor: 0,
                }
            }
        };
        Ok(Sampler {
            kind,
            n,
            b,
            total,
            rng: SplitMix64::new(spec.seed()),
        })
    }

    pub fn num_batches(&self) -> u64 {
        self.total
    }

    pub fn sample(&mut self) -> Batch {
        match &mut self.kind {
            SamplerKind::Uniform => {
                let r = self.rng.below(self.total);
                unrank_combination(self.n, self.b, r).expect("rank below total")
            }
            SamplerKind::Fixed(batch) => batch.clone(),
            SamplerKind::Cyclic { batches, cursor } => {
                let bt = batches[*cursor].clone();
                *cursor = (*cursor + 1) % batches.len();
                bt
            }
        }
    }

    /// Uniform draw among batches whose ranks are not in `rejected` (sorted).
    pub fn resample(&mut self, rejected: &[u64]) -> Option<Batch> {
        let remaining = self.total - rejected.len() as u64;
        if remaining == 0 {
            return None;
        }
        let mut r = self.rng.below(remaining);
        // Map r to the r-th rank not in `rejected`.
        for &bad in rejected {
            if bad <= r {
                r += 1;
            } else {
                break;
            }
        }
        Some(unrank_combination(self.n, self.b, r).expect("rank below total"))
    }

    fn rank(&self, batch: &[usize]) -> u64 {
        rank_combination(self.n, batch).expect("sampler batches are valid")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunPolicy {
    /// Resample when `‖∇f_B(x)‖² <= grad_tol`.
    pub grad_tol: f64,
    /// Resamples allowed per iteration; `None` tries every other batch.
    pub max_resamples: Option<u64>,
    /// The run stops as diverged at the first `k` with `‖x_k‖ > divergence_threshold`.
    pub divergence_threshold: f64,
}

impl Default for RunPolicy {
    fn default() -> Self {
        RunPolicy {
            grad_tol: 1e-24,
            max_resamples: None,
            divergence_threshold: 1e8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Diverged {
        k: usize,
    },
    /// Every batch tried at `x_k` had a vanishing gradient. When `exhaustive`,
    /// `x_k` minimizes every batch function.
    ResampleExhausted {
        k: usize,
        exhaustive: bool,
    },
}

/// One recorded SGD iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct Record<'a> {
    pub k: usize,
    pub batch: &'a [usize],
    pub x: &'a [f64],
    pub gamma: f64,
    pub fval: f64,
    pub gradsq: f64,
    pub lower: f64,
    /// `f(x̄_{k+1})` with `x̄_{k+1}` the mean of `x_0..=x_k`.
    pub avg_fval: f64,
}

/// Column-oriented run record.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub dim: usize,
    pub batch_size: usize,
    /// `x_0, .., x_len` flattened; one more iterate than records.
    pub iterates: Vec<f64>,
    pub batches: Vec<usize>,
    pub gammas: Vec<f64>,
    pub fvals: Vec<f64>,
    pub gradsqs: Vec<f64>,
    pub lowers: Vec<f64>,
    pub avg_fvals: Vec<f64>,
    pub resamples: u64,
    pub status: RunStatus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    #[serde(flatten)]
    pub status: RunStatus,
    pub final_xnorm: f64,
    pub max_xnorm: f64,
    pub iterations: usize,
    pub resamples: u64,
    pub final_x: Vec<f64>,
}

impl Trajectory {
    fn new(dim: usize, batch_size: usize, x0: &[f64]) -> Self {
        Trajectory {
            dim,
            batch_size,
            iterates: x0.to_vec(),
            batches: Vec::new(),
            gammas: Vec::new(),
            fvals: Vec::new(),
            gradsqs: Vec::new(),
            lowers: Vec::new(),
            avg_fvals: Vec::new(),
            resamples: 0,
            status: RunStatus::Completed,
        }
    }

    /// Number of recorded steps.
    pub fn len(&self) -> usize {
        self.gammas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gammas.is_empty()
    }

    /// Iterate `x_k`, `0 <= k <= len()`.
    pub fn x(&self, k: usize) -> &[f64] {
        &self.iterates[k * self.dim..(k + 1) * self.dim]
    }

    pub fn last_x(&self) -> &[f64] {
        self.x(self.len())
    }

    pub fn batch(&self, k: usize) -> &[usize] {
        &self.batches[k * self.batch_size..(k + 1) * self.batch_size]
    }

    pub fn record(&self, k: usize) -> Record<'_> {
        Record {
            k,
            batch: self.batch(k),
            x: self.x(k),
            gamma: self.gammas[k],
            fval: self.fvals[k],
            gradsq: self.gradsqs[k],
            lower: self.lowers[k],
            avg_fval: self.avg_fvals[k],
        }
    }

    pub fn records(&self) -> impl Iterator<Item = Record<'_>> {
        (0..self.len()).map(move |k| self.record(k))
    }

    pub fn xnorms(&self) -> impl Iterator<Item = f64> + '_ {
        self.iterates.chunks(self.dim).map(norm)
    }

    pub fn max_xnorm_sq(&self) -> f64 {
        self.iterates
            .chunks(self.dim)
            .map(norm_sq)
            .fold(0.0, f64::max)
    }

    /// Exact mean of `x_0, .., x_{k-1}`.
    pub fn running_average(&self, k: usize) -> Result<Vec<f64>> {
        if k == 0 || k > self.len() + 1 {
            return Err(Error::invalid(format!(
                "running average needs 1 <= k <= {}, got {k}",
                self.len() + 1
            )));
        }
        let mut avg = vec![0.0; self.dim];
        for i in 0..k {
            axpy(1.0, self.x(i), &mut avg);
        }
        avg.iter_mut().for_each(|v| *v /= k as f64);
        Ok(avg)
    }

    /// Largest coordinate deviation between recorded `x_{k+1}` and
    /// `x_k − γ_k ∇f_{B_k}(x_k)` recomputed from the problem.
    pub fn replay_deviation(&self, problem: &FiniteSumProblem) -> f64 {
        let mut g = vec![0.0; self.dim];
        let mut worst: f64 = 0.0;
        for k in 0..self.len() {
            problem.grad_subset_into(self.batch(k), self.x(k), &mut g);
            for ((xj, gj), yj) in self.x(k).iter().zip(&g).zip(self.x(k + 1)) {
                worst = worst.max((xj - self.gammas[k] * gj - yj).abs());
            }
        }
        worst
    }

    pub fn summary(&self) -> RunSummary {
        RunSummary {
            status: self.status,
            final_xnorm: norm(self.last_x()),
            max_xnorm: self.max_xnorm_sq().sqrt(),
            iterations: self.len(),
            resamples: self.resamples,
            final_x: self.last_x().to_vec(),
        }
    }

    /// CSV with header `k,batch,gamma,fval,gradsq,lower,xnorm,avg_fval`, plus
    /// `x0..x{d-1}` when `with_iterates` and `dim <= 4`. Every `stride`-th row
    /// and the last row are written.
    pub fn to_csv(&self, with_iterates: bool, stride: usize) -> String {
        let stride = stride.max(1);
        let full = with_iterates && self.dim <= 4;
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> = CSV_COLUMNS.iter().map(|c| c.to_string()).collect();
        if full {
            header.extend((0..self.dim).map(|j| format!("x{j}")));
        }
        w.write_record(&header).expect("in-memory csv");
        for k in 0..self.len() {
            if k % stride != 0 && k + 1 != self.len() {
                continue;
            }
            let r = self.record(k);
            let batch = r
                .batch
                .iter()
                .map(|i| i.to_string())
                .collect::<Vec<_>>()
                .join(";");
            let mut row = vec![
                k.to_string(),
                batch,
                fmt_f64(r.gamma),
                fmt_f64(r.fval),
                fmt_f64(r.gradsq),
                fmt_f64(r.lower),
                fmt_f64(norm(r.x)),
                fmt_f64(r.avg_fval),
            ];
            if full {
                row.extend(r.x.iter().map(|v| fmt_f64(*v)));
            }
            w.write_record(&row).expect("in-memory csv");
        }
        let bytes = w.into_inner().expect("in-memory csv");
        String::from_utf8(bytes).expect("csv fields are ascii")
    }
}

/// 17 significant digits, which round-trips every `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Runs `iterations` SGD steps.
pub fn run(
    problem: &FiniteSumProblem,
    rule: &StepRule,
    sampler: &mut Sampler,
    x0: &[f64],
    iterations: usize,
    policy: &RunPolicy,
) -> Result<Trajectory> {
    let dim = problem.dim();
    if x0.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: x0.len(),
        });
    }
    if iterations == 0 {
        return Err(Error::invalid("iteration budget must be at least 1"));
    }
    if sampler.n != problem.n() || sampler.b != problem.batch_size() {
        return Err(Error::invalid(
            "sampler was built for a different problem shape",
        ));
    }
    if !is_finite(x0) {
        return Err(Error::invalid("x0 must be finite"));
    }
    let mut stepper = rule.stepper()?;
    let all: Vec<usize> = (0..problem.n()).collect();
    let b = problem.batch_size();
    let mut traj = Trajectory::new(dim, b, x0);
    traj.iterates.reserve(iterations * dim);
    traj.batches.reserve(iterations * b);
    for v in [
        &mut traj.gammas,
        &mut traj.fvals,
        &mut traj.gradsqs,
        &mut traj.lowers,
        &mut traj.avg_fvals,
    ] {
        v.reserve(iterations);
    }

    let mut x = x0.to_vec();
    let mut g = vec![0.0; dim];
    let mut avg = vec![0.0; dim];
    let mut rejected: Vec<u64> = Vec::new();
    let max_resamples = policy.max_resamples.unwrap_or(u64::MAX);

    for k in 0..iterations {
        if norm(&x) > policy.divergence_threshold {
            traj.status = RunStatus::Diverged { k };
            return Ok(traj);
        }
        let mut batch = sampler.sample();
        problem.grad_subset_into(&batch, &x, &mut g);
        let mut gradsq = norm_sq(&g);
        rejected.clear();
        while gradsq <= policy.grad_tol {
            let rank = sampler.rank(&batch);
            let pos = rejected.binary_search(&rank).unwrap_err();
            rejected.insert(pos, rank);
            let exhaustive = rejected.len() as u64 == sampler.num_batches();
            if exhaustive || rejected.len() as u64 > max_resamples {
                traj.status = RunStatus::ResampleExhausted { k, exhaustive };
                return Ok(traj);
            }
            traj.resamples += 1;
            batch = sampler.resample(&rejected).expect("batches remain");
            problem.grad_subset_into(&batch, &x, &mut g);
            gradsq = norm_sq(&g);
        }
        let fval = problem.eval_subset(&batch, &x);
        let lower = problem.lower_subset(&batch);
        let gamma = stepper.step(fval, lower, gradsq).map_err(|e| match e {
            Error::Contract(d) => Error::NumericalFailure { k, detail: d },
            other => other,
        })?;

        for (a, xi) in avg.iter_mut().zip(&x) {
            *a += (xi - *a) / (k + 1) as f64;
        }
        let avg_fval = problem.eval_subset(&all, &avg);

        axpy(-gamma, &g, &mut x);
        if !is_finite(&x) || !gamma.is_finite() || !fval.is_finite() {
            return Err(Error::NumericalFailure {
                k,
                detail: format!(
                    "non-finite update: batch={batch:?} gamma={gamma:e} fval={fval:e} \
                     gradsq={gradsq:e} lower={lower:e} x_next={x:?}"
                ),
            });
        }
        traj.batches.extend_from_slice(&batch);
        traj.gammas.push(gamma);
        traj.fvals.push(fval);
        traj.gradsqs.push(gradsq);
        traj.lowers.push(lower);
        traj.avg_fvals.push(avg_fval);
        traj.iterates.extend_from_slice(&x);
    }
    if norm(&x) > policy.divergence_threshold {
        traj.status = RunStatus::Diverged { k: iterations };
    }
    Ok(traj)
}

/// Convenience wrapper building the sampler from its spec.
pub fn run_spec(
    problem: &FiniteSumProblem,
    rule: &StepRule,
    sampler: &SamplerSpec,
    x0: &[f64],
    iterations: usize,
    policy: &RunPolicy,
) -> Result<Trajectory> {
    let mut s = Sampler::new(sampler, problem.n(), problem.batch_size())?;
    run(problem, rule, &mut s, x0, iterations, policy)
}

/// Maps `f` over `seed, seed+1, .., seed+runs-1` on up to `workers` threads;
/// results keep seed order.
pub fn par_seeds<T, F>(seed: u64, runs: usize, workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    let seeds: Vec<u64> = (0..runs as u64).map(|i| seed.wrapping_add(i)).collect();
    let go = || seeds.par_iter().map(|&s| f(s)).collect::<Vec<T>>();
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) if workers > 0 => pool.install(go),
        _ => go(),
    }
}

/// One row of a trajectory CSV read back from disk.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvRow {
    pub k: usize,
    pub batch: Batch,
    pub gamma: f64,
    pub fval: f64,
    pub gradsq: f64,
    pub lower: f64,
    pub xnorm: f64,
    pub avg_fval: f64,
    pub x: Option<Vec<f64>>,
}

const CSV_COLUMNS: [&str; 8] = [
    "k", "batch", "gamma", "fval", "gradsq", "lower", "xnorm", "avg_fval",
];

pub fn parse_csv(text: &str, path: &Path) -> Result<Vec<CsvRow>> {
    let bad = |reason: String| Error::MalformedTrajectory {
        path: path.to_path_buf(),
        reason,
    };
    if text.trim().is_empty() {
        return Err(bad("empty file".into()));
    }
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let cols = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    if cols.len() < CSV_COLUMNS.len() || cols.iter().take(CSV_COLUMNS.len()).ne(CSV_COLUMNS) {
        return Err(bad(format!(
            "unexpected header `{}`",
            cols.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let extra = cols.len() - CSV_COLUMNS.len();
    let mut rows = Vec::new();
    for (ln, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| bad(format!("line {}: {e}", ln + 2)))?;
        let f: Vec<&str> = rec.iter().collect();
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|e| bad(format!("line {}: `{s}`: {e}", ln + 2)))
        };
        let batch = f[1]
            .split(';')
            .map(|s| {
                s.parse::<usize>()
                    .map_err(|e| bad(format!("line {}: batch: {e}", ln + 2)))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(CsvRow {
            k: f[0]
                .parse()
                .map_err(|e| bad(format!("line {}: k: {e}", ln + 2)))?,
            batch,
            gamma: num(f[2])?,
            fval: num(f[3])?,
            gradsq: num(f[4])?,
            lower: num(f[5])?,
            xnorm: num(f[6])?,
            avg_fval: num(f[7])?,
            x: if extra > 0 {
                Some(f[8..].iter().map(|s| num(s)).collect::<Result<Vec<_>>>()?)
            } else {
                None
            },
        });
    }
    Ok(rows)
}

impl Trajectory {
    /// Rebuilds a trajectory from CSV rows written with stride 1 and iterate
    /// columns. The CSV has no `x_K`, so the last row only contributes its
    /// iterate and the result has one record fewer than `rows`.
    pub fn from_csv_rows(rows: &[CsvRow], path: &Path) -> Result<Trajectory> {
        let bad = |reason: String| Error::MalformedTrajectory {
            path: path.to_path_buf(),
            reason,
        };
        let first = rows.first().ok_or_else(|| bad("no rows".into()))?;
        let dim = first
            .x
            .as_ref()
            .ok_or_else(|| bad("iterate columns x0.. are required".into()))?
            .len();
        let b = first.batch.len();
        let mut t = Trajectory::new(dim, b, first.x.as_ref().unwrap());
        for (i, r) in rows.iter().enumerate() {
            if r.k != i {
                return Err(bad(format!(
                    "row {i} has k = {}; a stride-1 export is required",
                    r.k
                )));
            }
            if r.batch.len() != b {
                return Err(bad(format!("row {i}: batch size changes")));
            }
            if i == 0 {
                continue;
            }
            let prev = &rows[i - 1];
            t.batches.extend_from_slice(&prev.batch);
            t.gammas.push(prev.gamma);
            t.fvals.push(prev.fval);
            t.gradsqs.push(prev.gradsq);
            t.lowers.push(prev.lower);
            t.avg_fvals.push(prev.avg_fval);
            t.iterates
                .extend_from_slice(r.x.as_ref().expect("uniform columns"));
        }
        Ok(t)
    }
}
