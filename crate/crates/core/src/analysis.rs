//! Checkers for the inequalities satisfied along SGD trajectories, the
//! explicit boundedness certificate for C2 problems, and in-expectation rate
//! envelopes evaluated over seeded ensembles.
//!
//! Every check reports `worst_slack = min_k (rhs_k − lhs_k)` so a negative
//! value is a violation.

use serde::Serialize;
use serde_json::{json, Value};

use crate::engine::{RunStatus, Trajectory};
use crate::error::{Error, Result};
use crate::linalg::{dist_sq, dot, norm_sq};
use crate::problems::{Batch, Case, ComponentKind, ConvexComponent, FiniteSumProblem, LevelGap};
use crate::projections::{relaxation, relaxed_projection_step};
use crate::stepsize::{sandwich_bounds, LambdaSchedule, StepRule};

/// Slack tolerance of the per-step inequality checks.
pub const SLACK_TOL: f64 = 1e-10;
/// Slack tolerance of the stepsize sandwich.
pub const SANDWICH_TOL: f64 = 1e-12;
/// Slack tolerance of stepsize monotonicity.
pub const MONOTONE_TOL: f64 = 1e-15;
/// Per-coordinate agreement of the two projection iterations.
pub const EQUIVALENCE_TOL: f64 = 1e-12;
/// Slack added to a boundedness certificate.
pub const BOUND_TOL: f64 = 1e-8;
/// Minimum ensemble size for in-expectation checks.
pub const MIN_ENSEMBLE: usize = 30;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub check: String,
    pub pass: bool,
    pub worst_slack: f64,
    pub location_k: Option<usize>,
    pub parameters: Value,
}

impl Report {
    fn from_slacks(
        check: &str,
        tol: f64,
        parameters: Value,
        slacks: impl Iterator<Item = (usize, f64)>,
    ) -> Self {
        let mut worst = f64::INFINITY;
        let mut at = None;
        for (k, s) in slacks {
            // NaN slack counts as a violation.
            if !(s >= worst) {
                worst = s;
                at = Some(k);
            }
        }
        Report {
            check: check.to_string(),
            pass: !(worst < -tol) && !worst.is_nan(),
            worst_slack: worst,
            location_k: at,
            parameters,
        }
    }

    /// `PASS name (worst slack ...)` or `FAIL ...`.
    pub fn line(&self) -> String {
        let at = self
            .location_k
            .map(|k| format!(" at k={k}"))
            .unwrap_or_default();
        format!(
            "{} {} worst_slack={:.3e}{}",
            if self.pass { "PASS" } else { "FAIL" },
            self.check,
            self.worst_slack,
            at
        )
    }
}

/// `γ_k ‖∇f_{B_k}(x_k)‖² <= m (f_{B_k}(x_k) − ℓ_{B_k})` on each row.
pub fn condition_31_columns(
    ks: impl Iterator<Item = usize>,
    gammas: &[f64],
    fvals: &[f64],
    gradsqs: &[f64],
    lowers: &[f64],
    m: f64,
) -> Report {
    let slacks = ks
        .enumerate()
        .map(|(r, k)| (k, m * (fvals[r] - lowers[r]) - gammas[r] * gradsqs[r]));
    Report::from_slacks("condition-31", SLACK_TOL, json!({ "m": m }), slacks)
}

pub fn verify_condition_31(traj: &Trajectory, m: f64) -> Report {
    condition_31_columns(
        0..traj.len(),
        &traj.gammas,
        &traj.fvals,
        &traj.gradsqs,
        &traj.lowers,
        m,
    )
}

/// `‖x_{k+1}‖² <= ‖x_k‖² − (2−m)γ_k(f_{B_k}(x_k) − ℓ) + 2γ_k(f_{B_k}(0) − ℓ)`.
///
/// The difference `‖x_{k+1}‖² − ‖x_k‖²` is formed as `<x_{k+1}−x_k, x_{k+1}+x_k>`
/// so far-away iterates do not lose the slack to cancellation.
pub fn verify_descent_recursion(
    traj: &Trajectory,
    problem: &FiniteSumProblem,
    m: f64,
) -> Result<Report> {
    if traj.dim != problem.dim() {
        return Err(Error::DimensionMismatch {
            expected: problem.dim(),
            got: traj.dim,
        });
    }
    let zero = vec![0.0; traj.dim];
    let mut diff = vec![0.0; traj.dim];
    let mut sum = vec![0.0; traj.dim];
    let mut slacks = Vec::with_capacity(traj.len());
    for k in 0..traj.len() {
        let (x, y) = (traj.x(k), traj.x(k + 1));
        for j in 0..traj.dim {
            diff[j] = y[j] - x[j];
            sum[j] = y[j] + x[j];
        }
        let growth = dot(&diff, &sum);
        let gamma = traj.gammas[k];
        let lower = traj.lowers[k];
        let f0 = problem.eval_subset(traj.batch(k), &zero);
        let rhs = -(2.0 - m) * gamma * (traj.fvals[k] - lower) + 2.0 * gamma * (f0 - lower);
        slacks.push((k, rhs - growth));
    }
    Ok(Report::from_slacks(
        "descent-recursion",
        SLACK_TOL,
        json!({ "m": m }),
        slacks.into_iter(),
    ))
}

/// `γ_{k+1} <= γ_k`.
pub fn monotone_columns(ks: &[usize], gammas: &[f64]) -> Report {
    let slacks = gammas
        .windows(2)
        .zip(ks.iter().skip(1))
        .map(|(w, &k)| (k, w[0] - w[1]));
    Report::from_slacks("monotone-stepsize", MONOTONE_TOL, json!({}), slacks)
}

pub fn verify_monotone(traj: &Trajectory) -> Report {
    let ks: Vec<usize> = (0..traj.len()).collect();
    monotone_columns(&ks, &traj.gammas)
}

/// `min{1/(2L_max), γ_{-1}/λ_0} λ_k <= γ_k <= (γ_{-1}/λ_0) λ_k` on each row.
pub fn sandwich_columns(
    ks: &[usize],
    gammas: &[f64],
    schedule: &LambdaSchedule,
    gamma_init: f64,
    l_max: f64,
) -> Result<Report> {
    let lambda0 = schedule.lambda0();
    let mut slacks = Vec::with_capacity(ks.len());
    for (&k, &g) in ks.iter().zip(gammas) {
        let (lo, hi) = sandwich_bounds(k as u64, schedule, gamma_init, lambda0, l_max)?;
        slacks.push((k, (g - lo).min(hi - g)));
    }
    Ok(Report::from_slacks(
        "stepsize-sandwich",
        SANDWICH_TOL,
        json!({ "gamma_init": gamma_init, "lambda0": lambda0, "l_max": l_max }),
        slacks.into_iter(),
    ))
}

pub fn verify_sandwich(traj: &Trajectory, rule: &StepRule, l_max: f64) -> Result<Report> {
    let StepRule::Decsps {
        schedule,
        gamma_init,
    } = rule
    else {
        return Err(Error::Contract(format!(
            "sandwich bounds apply to decsps, not {}",
            rule.name()
        )));
    };
    let ks: Vec<usize> = (0..traj.len()).collect();
    sandwich_columns(&ks, &traj.gammas, schedule, *gamma_init, l_max)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CertificateRow {
    pub batch: Batch,
    pub lower: f64,
    pub f_at_zero: f64,
    /// `ℓ_B + 2D/(2−m)`.
    pub level: f64,
    /// Norm bound on `lev_level f_B \ argmin f_B`; `None` when that set is empty.
    pub radius: Option<f64>,
    pub minimizer_norm: f64,
    pub approximate: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundCertificate {
    pub gamma: f64,
    pub m: f64,
    pub l_max: f64,
    pub x0_norm_sq: f64,
    pub d: f64,
    #[serde(rename = "M")]
    pub big_m: f64,
    pub c: f64,
    /// Bound on `‖x_k‖²` for every `k`.
    pub bound: f64,
    /// True when any radius or minimizer came from numerical search.
    pub approximate: bool,
    pub per_batch: Vec<CertificateRow>,
}

/// Explicit bound on `‖x_k‖²` for a C2 problem and stepsizes with
/// `0 < γ_k <= gamma` satisfying the surrogate inequality with `m < 2`.
pub fn boundedness_certificate(
    problem: &FiniteSumProblem,
    gamma: f64,
    m: f64,
    x0: &[f64],
) -> Result<BoundCertificate> {
    if !(m < 2.0) {
        return Err(Error::Contract(format!("certificate needs m < 2, got {m}")));
    }
    if !(gamma > 0.0 && m > 0.0) {
        return Err(Error::invalid("certificate needs gamma > 0 and m > 0"));
    }
    if x0.len() != problem.dim() {
        return Err(Error::DimensionMismatch {
            expected: problem.dim(),
            got: x0.len(),
        });
    }
    let label = problem.classify_case()?;
    if label.case != Case::C2 {
        return Err(Error::Contract(format!(
            "certificate needs case C2, problem is {:?} (witness {:?})",
            label.case, label.witness
        )));
    }
    let batches = problem.all_batches()?;
    let zero = vec![0.0; problem.dim()];
    let d = batches
        .iter()
        .map(|b| problem.eval_subset(b, &zero) - problem.lower_subset(b))
        .fold(f64::NEG_INFINITY, f64::max);
    let l_max = problem.l_max();
    let mut rows = Vec::with_capacity(batches.len());
    for b in batches {
        let geom = problem.batch_geometry(&b)?;
        let lower = problem.lower_subset(&b);
        let level = lower + 2.0 * d / (2.0 - m);
        let radius = match problem.batch_level_gap(&b, &geom, level) {
            LevelGap::Empty => None,
            LevelGap::Bounded(r) => Some(r),
            LevelGap::Unbounded => {
                return Err(Error::Contract(format!(
                    "batch {b:?} has unbounded lev∖argmin at level {level}"
                )))
            }
        };
        rows.push(CertificateRow {
            f_at_zero: problem.eval_subset(&b, &zero),
            batch: b,
            lower,
            level,
            radius,
            minimizer_norm: norm_sq(&geom.minimizer).sqrt(),
            approximate: geom.approximate,
        });
    }
    let big_m = rows.iter().filter_map(|r| r.radius).fold(0.0, f64::max);
    let max_min = rows.iter().map(|r| r.minimizer_norm).fold(0.0, f64::max);
    let gl = gamma * l_max;
    let c = big_m.max(gl / (1.0 + gl) * max_min);
    let x0_norm_sq = norm_sq(x0);
    let bound = (4.0 * c * c * (1.0 + gl) * (1.0 + gl)).max(x0_norm_sq);
    Ok(BoundCertificate {
        gamma,
        m,
        l_max,
        x0_norm_sq,
        d,
        big_m,
        c,
        bound,
        approximate: rows.iter().any(|r| r.approximate),
        per_batch: rows,
    })
}

/// Recorded `max_k ‖x_k‖² <= bound + 1e-8`.
pub fn check_trajectory_bounded(traj: &Trajectory, cert: &BoundCertificate) -> Report {
    check_norms_bounded(traj.xnorms().map(|n| n * n).enumerate(), cert.bound)
}

/// Same check over `(k, ‖x_k‖²)` pairs.
pub fn check_norms_bounded(norms_sq: impl Iterator<Item = (usize, f64)>, bound: f64) -> Report {
    Report::from_slacks(
        "bounded-by-certificate",
        BOUND_TOL,
        json!({ "bound": bound }),
        norms_sq.map(|(k, n)| (k, bound - n)),
    )
}

/// `(1/k) Σ_{i<k} seq_i`.
pub fn cesaro_mean(seq: &[f64], k: usize) -> Result<f64> {
    if k == 0 || k > seq.len() {
        return Err(Error::invalid(format!(
            "cesaro mean needs 1 <= k <= {}, got {k}",
            seq.len()
        )));
    }
    Ok(seq[..k].iter().sum::<f64>() / k as f64)
}

/// `f(x) − ℓ − ‖∇f(x)‖²/(2L)`, nonnegative for convex `L`-smooth `f`.
pub fn lemma26_gap(component: &ConvexComponent, x: &[f64]) -> Result<f64> {
    let l = component.smoothness();
    if !(l > 0.0) {
        return Err(Error::invalid("gap needs a positive smoothness constant"));
    }
    let g = component.grad(x)?;
    Ok(component.eval(x)? - component.lower_bound() - norm_sq(&g) / (2.0 * l))
}

/// Minimizer and optimal value of the full objective `f`.
pub fn global_optimum(problem: &FiniteSumProblem) -> Result<(Vec<f64>, f64)> {
    let all: Vec<usize> = (0..problem.n()).collect();
    let geom = problem.batch_geometry(&all).map_err(|e| match e {
        Error::Contract(r) | Error::InsufficientMetadata(r) => {
            Error::InsufficientMetadata(format!("optimal value of f unavailable: {r}"))
        }
        other => other,
    })?;
    Ok((geom.minimizer, geom.infimum))
}

/// `μ − mean over batches of ℓ_B`.
pub fn sigma_b_sq(problem: &FiniteSumProblem, mu: f64) -> Result<f64> {
    let batches = problem.all_batches()?;
    let mean = batches.iter().map(|b| problem.lower_subset(b)).sum::<f64>() / batches.len() as f64;
    Ok(mu - mean)
}

/// `f(x̄_k)` for `k >= 1`. Past the end of a stopped run the last iterate is
/// repeated.
pub fn avg_fval_at(traj: &Trajectory, problem: &FiniteSumProblem, k: usize) -> f64 {
    if k == 0 {
        return f64::NAN;
    }
    if k <= traj.len() {
        return traj.avg_fvals[k - 1];
    }
    let mut s = vec![0.0; traj.dim];
    for i in 0..=traj.len() {
        crate::linalg::axpy(1.0, traj.x(i), &mut s);
    }
    let extra = (k - traj.len() - 1) as f64;
    crate::linalg::axpy(extra, traj.last_x(), &mut s);
    s.iter_mut().for_each(|v| *v /= k as f64);
    let all: Vec<usize> = (0..problem.n()).collect();
    problem.eval_subset(&all, &s)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnvelopePoint {
    pub k: usize,
    pub mean: f64,
    pub std_err: f64,
    pub envelope: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnvelopeReport {
    pub report: Report,
    pub points: Vec<EnvelopePoint>,
}

impl EnvelopeReport {
    pub fn at(&self, k: usize) -> Option<&EnvelopePoint> {
        self.points.iter().find(|p| p.k == k)
    }
}

/// What the envelope checks need from one run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunDigest {
    pub x0: Vec<f64>,
    /// `max_k ‖x_k − x*‖²` over recorded iterates.
    pub max_dist_sq: f64,
    /// `f(x̄_k) − μ` at each requested `k`.
    pub gaps: Vec<f64>,
}

pub fn digest_run(
    traj: &Trajectory,
    problem: &FiniteSumProblem,
    xstar: &[f64],
    mu: f64,
    ks: &[usize],
) -> RunDigest {
    RunDigest {
        x0: traj.x(0).to_vec(),
        max_dist_sq: traj
            .iterates
            .chunks(traj.dim)
            .map(|x| dist_sq(x, xstar))
            .fold(0.0, f64::max),
        gaps: ks
            .iter()
            .map(|&k| avg_fval_at(traj, problem, k) - mu)
            .collect(),
    }
}

fn envelope_report(
    check: &str,
    digests: &[RunDigest],
    ks: &[usize],
    parameters: Value,
    envelope: impl Fn(usize) -> f64,
) -> Result<EnvelopeReport> {
    if digests.len() < MIN_ENSEMBLE {
        return Err(Error::Contract(format!(
            "in-expectation checks need at least {MIN_ENSEMBLE} runs, got {}",
            digests.len()
        )));
    }
    if ks.is_empty() || ks.contains(&0) {
        return Err(Error::invalid(
            "envelope indices must be nonempty and start at k = 1",
        ));
    }
    if digests.iter().any(|d| d.gaps.len() != ks.len()) {
        return Err(Error::invalid(
            "run digests were taken at different indices",
        ));
    }
    let n = digests.len() as f64;
    let mut points = Vec::with_capacity(ks.len());
    for (j, &k) in ks.iter().enumerate() {
        let mean = digests.iter().map(|d| d.gaps[j]).sum::<f64>() / n;
        let var = digests
            .iter()
            .map(|d| (d.gaps[j] - mean).powi(2))
            .sum::<f64>()
            / (n - 1.0);
        points.push(EnvelopePoint {
            k,
            mean,
            std_err: (var / n).sqrt(),
            envelope: envelope(k),
        });
    }
    let report = Report::from_slacks(
        check,
        0.0,
        parameters,
        points
            .iter()
            .map(|p| (p.k, p.envelope + 3.0 * p.std_err - p.mean)),
    );
    Ok(EnvelopeReport { report, points })
}

fn common_x0(digests: &[RunDigest]) -> Result<Vec<f64>> {
    let x0 = digests
        .first()
        .ok_or_else(|| Error::invalid("empty ensemble"))?
        .x0
        .clone();
    if digests.iter().any(|d| d.x0 != x0) {
        return Err(Error::Contract("ensemble runs must share x0".into()));
    }
    Ok(x0)
}

fn digest_all(
    problem: &FiniteSumProblem,
    ensemble: &[Trajectory],
    ks: &[usize],
) -> Result<Vec<RunDigest>> {
    let (xstar, mu) = global_optimum(problem)?;
    Ok(ensemble
        .iter()
        .map(|t| digest_run(t, problem, &xstar, mu, ks))
        .collect())
}

/// `E f(x̄_k) − μ <= M/(α λ_{k−1} k) + σ_b² Σ_{i<k} λ_i / k` for DecSPS, with
/// `M` the ensemble maximum of `‖x_k − x*‖²` and `σ_b²` defaulting to
/// [`sigma_b_sq`].
pub fn rate_envelope_fact14(
    problem: &FiniteSumProblem,
    ensemble: &[Trajectory],
    rule: &StepRule,
    sigma_b2: Option<f64>,
    ks: &[usize],
) -> Result<EnvelopeReport> {
    fact14_from_digests(
        problem,
        &digest_all(problem, ensemble, ks)?,
        rule,
        sigma_b2,
        ks,
    )
}

pub fn fact14_from_digests(
    problem: &FiniteSumProblem,
    digests: &[RunDigest],
    rule: &StepRule,
    sigma_b2: Option<f64>,
    ks: &[usize],
) -> Result<EnvelopeReport> {
    let StepRule::Decsps {
        schedule,
        gamma_init,
    } = rule
    else {
        return Err(Error::Contract(format!(
            "this envelope is for decsps, not {}",
            rule.name()
        )));
    };
    let lambda0 = schedule.lambda0();
    if lambda0 > 1.0 {
        return Err(Error::Contract(format!(
            "envelope needs λ_k <= 1, λ_0 = {lambda0}"
        )));
    }
    let (_, mu) = global_optimum(problem)?;
    let sigma = match sigma_b2 {
        Some(s) => s,
        None => sigma_b_sq(problem, mu)?,
    };
    let m_emp = digests.iter().map(|d| d.max_dist_sq).fold(0.0, f64::max);
    let alpha = (1.0 / (2.0 * problem.l_max())).min(gamma_init / lambda0);
    let kmax = ks.iter().copied().max().unwrap_or(0);
    let mut partial = Vec::with_capacity(kmax + 1);
    let mut acc = 0.0;
    partial.push(0.0);
    for i in 0..kmax {
        acc += schedule.at(i as u64);
        partial.push(acc);
    }
    let params = json!({
        "alpha": alpha, "M_emp": m_emp, "mu": mu, "sigma_b_sq": sigma,
        "sigma_b_sq_source": if sigma_b2.is_some() { "given" } else { "mu minus mean batch lower bound" },
        "runs": digests.len(),
    });
    envelope_report("fact14-envelope", digests, ks, params, |k| {
        m_emp / (alpha * schedule.at(k as u64 - 1) * k as f64) + sigma * partial[k] / k as f64
    })
}

/// `E f(x̄_k) − μ <= ‖x_0 − x*‖²/(α k) + 2σ²γ_{−1}/α` for SPS with `λ = 1`
/// and `b = 1`, where `σ² = μ − mean_i inf f_i`.
pub fn rate_envelope_fact11(
    problem: &FiniteSumProblem,
    ensemble: &[Trajectory],
    rule: &StepRule,
    ks: &[usize],
) -> Result<EnvelopeReport> {
    fact11_from_digests(problem, &digest_all(problem, ensemble, ks)?, rule, ks)
}

pub fn fact11_from_digests(
    problem: &FiniteSumProblem,
    digests: &[RunDigest],
    rule: &StepRule,
    ks: &[usize],
) -> Result<EnvelopeReport> {
    let StepRule::Sps { lambda, gamma_init } = rule else {
        return Err(Error::Contract(format!(
            "this envelope is for sps, not {}",
            rule.name()
        )));
    };
    if *lambda != 1.0 {
        return Err(Error::Contract(format!(
            "envelope needs λ = 1, got {lambda}"
        )));
    }
    if problem.batch_size() != 1 {
        return Err(Error::Contract("envelope needs batch size 1".into()));
    }
    let mut mean_inf = 0.0;
    for c in problem.components() {
        if c.lower_bound() != c.meta().infimum {
            return Err(Error::Contract(
                "envelope needs exact component lower bounds".into(),
            ));
        }
        mean_inf += c.meta().infimum;
    }
    mean_inf /= problem.n() as f64;
    let (xstar, mu) = global_optimum(problem)?;
    let sigma = mu - mean_inf;
    let x0 = common_x0(digests)?;
    let r0 = dist_sq(&x0, &xstar);
    let alpha = (1.0 / (2.0 * problem.l_max())).min(*gamma_init);
    let params = json!({
        "alpha": alpha, "mu": mu, "sigma_sq": sigma, "x0_dist_sq": r0,
        "gamma_init": gamma_init, "runs": digests.len(),
    });
    envelope_report("fact11-envelope", digests, ks, params, |k| {
        r0 / (alpha * k as f64) + 2.0 * sigma * gamma_init / alpha
    })
}

/// Ensemble mean of `f(x̄_k) − μ` must drop by `factor` between the first
/// and last digest index.
pub fn gap_decay_from_digests(digests: &[RunDigest], ks: &[usize], factor: f64) -> Result<Report> {
    if digests.is_empty() || ks.len() < 2 {
        return Err(Error::invalid("gap decay needs runs and two indices"));
    }
    let n = digests.len() as f64;
    let mean = |j: usize| digests.iter().map(|d| d.gaps[j]).sum::<f64>() / n;
    let (first, last) = (mean(0), mean(ks.len() - 1));
    Ok(Report::from_slacks(
        "gap-decay",
        0.0,
        json!({ "factor": factor, "from_k": ks[0], "to_k": ks[ks.len() - 1],
                "mean_from": first, "mean_to": last }),
        std::iter::once((ks[ks.len() - 1], first / factor - last)),
    ))
}

/// Replays the relaxed projection iteration along the recorded set sequence
/// and compares it with the SGD iterates.
pub fn verify_projection_equivalence(
    traj: &Trajectory,
    problem: &FiniteSumProblem,
    rule: &StepRule,
) -> Result<Report> {
    let StepRule::Decsps {
        schedule,
        gamma_init,
    } = rule
    else {
        return Err(Error::Contract(
            "projection equivalence needs decsps".into(),
        ));
    };
    if problem.batch_size() != 1 {
        return Err(Error::Contract(
            "projection equivalence needs batch size 1".into(),
        ));
    }
    let mut sets = Vec::with_capacity(problem.n());
    for c in problem.components() {
        match c.kind() {
            ComponentKind::SqDist { set } if c.lower_bound() == 0.0 => sets.push(set),
            _ => {
                return Err(Error::Contract(
                    "projection equivalence needs ½d² components with lower bound 0".into(),
                ))
            }
        }
    }
    let lambda0 = schedule.lambda0();
    let mut z = traj.x(0).to_vec();
    let mut slacks = Vec::with_capacity(traj.len());
    for k in 0..traj.len() {
        let set = sets[traj.batch(k)[0]];
        z = relaxed_projection_step(set, &z, schedule.at(k as u64), lambda0, *gamma_init)?;
        let dev = z
            .iter()
            .zip(traj.x(k + 1))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        slacks.push((k + 1, EQUIVALENCE_TOL - dev));
    }
    Ok(Report::from_slacks(
        "projection-equivalence",
        0.0,
        json!({ "tolerance": EQUIVALENCE_TOL, "relaxation_0": relaxation(lambda0, lambda0, *gamma_init) }),
        slacks.into_iter(),
    ))
}

/// Some recorded `‖x_k‖` exceeds `radius`.
pub fn verify_escape(traj: &Trajectory, radius: f64) -> Report {
    let (k, best) = traj
        .xnorms()
        .enumerate()
        .fold(
            (0, f64::NEG_INFINITY),
            |acc, (k, n)| if n > acc.1 { (k, n) } else { acc },
        );
    Report::from_slacks(
        "escape",
        0.0,
        json!({ "radius": radius, "max_xnorm": best }),
        std::iter::once((k, best - radius)),
    )
}

/// Run stopped with `‖x_k‖ > threshold`.
pub fn verify_diverged(traj: &Trajectory, threshold: f64) -> Report {
    let (status_k, slack) = match traj.status {
        RunStatus::Diverged { k } => (k, traj.xnorms().nth(k).unwrap_or(f64::NAN) - threshold),
        _ => (traj.len(), traj.max_xnorm_sq().sqrt() - threshold),
    };
    let pass = matches!(traj.status, RunStatus::Diverged { .. });
    Report {
        check: "diverged".into(),
        pass,
        worst_slack: if pass {
            slack
        } else {
            slack.min(-f64::MIN_POSITIVE)
        },
        location_k: Some(status_k),
        parameters: json!({ "threshold": threshold }),
    }
}

/// Last recorded `‖∇f_B(x_k)‖²` is below `ratio` times the first.
pub fn verify_gradsq_decay(traj: &Trajectory, ratio: f64) -> Report {
    let (first, last) = match (traj.gradsqs.first(), traj.gradsqs.last()) {
        (Some(a), Some(b)) => (*a, *b),
        _ => (0.0, 0.0),
    };
    Report::from_slacks(
        "gradsq-decay",
        0.0,
        json!({ "ratio": ratio, "first": first, "last": last }),
        std::iter::once((traj.len().saturating_sub(1), ratio * first - last)),
    )
}

/// Across increasing `checkpoints`, both `‖x_c‖` and the minimum of `‖x_k‖`
/// over `(c/10, c]` strictly increase.
pub fn verify_norm_growth(traj: &Trajectory, checkpoints: &[usize]) -> Result<Report> {
    if checkpoints.len() < 2 || checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid(
            "norm growth needs at least two increasing checkpoints",
        ));
    }
    let last = *checkpoints.last().unwrap();
    if last > traj.len() {
        return Err(Error::invalid(format!(
            "checkpoint {last} beyond recorded length {}",
            traj.len()
        )));
    }
    let norms: Vec<f64> = traj.xnorms().collect();
    let window_min = |c: usize| {
        norms[c / 10 + 1..=c]
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    };
    let slacks: Vec<(usize, f64)> = checkpoints
        .windows(2)
        .map(|w| {
            let at = norms[w[1]] - norms[w[0]];
            let win = window_min(w[1]) - window_min(w[0]);
            (
                w[1],
                if at > 0.0 && win > 0.0 {
                    at.min(win)
                } else {
                    at.min(win).min(-f64::MIN_POSITIVE)
                },
            )
        })
        .collect();
    Ok(Report::from_slacks(
        "norm-growth",
        0.0,
        json!({
            "checkpoints": checkpoints,
            "xnorm_at": checkpoints.iter().map(|&c| norms[c]).collect::<Vec<_>>(),
        }),
        slacks.into_iter(),
    ))
}

/// Level radius of a quadratic component by bisection along rays; the
/// brute-force counterpart of the analytic oracle.
pub fn quadratic_radius_by_bisection(component: &ConvexComponent, xi: f64) -> Result<f64> {
    let ComponentKind::Quadratic { center, .. } = component.kind() else {
        return Err(Error::invalid("expected a quadratic component"));
    };
    let problem = FiniteSumProblem::new(vec![component.clone()], 1)?;
    Ok(problem.numeric_level_radius(&[0], center, xi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{run_spec, RunPolicy, SamplerSpec};
    use crate::problems::library;

    fn two_quads() -> FiniteSumProblem {
        library::instance("two-quadratics").unwrap()
    }

    fn decsps(gamma_init: f64) -> StepRule {
        StepRule::Decsps {
            schedule: LambdaSchedule::inv_sqrt(),
            gamma_init,
        }
    }

    #[test]
    fn certificate_two_quadratics() {
        let cert = boundedness_certificate(&two_quads(), 0.5, 1.0, &[0.0]).unwrap();
        assert_eq!(cert.d, 0.5);
        for row in &cert.per_batch {
            assert_eq!(row.level, 1.0);
            assert!((row.radius.unwrap() - (1.0 + 2f64.sqrt())).abs() < 1e-12);
        }
        assert!((cert.c - (1.0 + 2f64.sqrt())).abs() < 1e-12);
        let expect = 9.0 * (1.0 + 2f64.sqrt()).powi(2);
        assert!((cert.bound - expect).abs() < 1e-10);
        assert!((cert.bound - 52.456).abs() < 1e-3);
    }

    #[test]
    fn certificate_degenerate_cases() {
        let p = FiniteSumProblem::new(vec![ConvexComponent::quadratic(vec![0.0], 1.0).unwrap()], 1)
            .unwrap();
        let cert = boundedness_certificate(&p, 0.5, 1.0, &[0.0]).unwrap();
        assert_eq!(
            (cert.d, cert.big_m, cert.c, cert.bound),
            (0.0, 0.0, 0.0, 0.0)
        );

        let p = FiniteSumProblem::new(vec![ConvexComponent::one_sided_quadratic()], 1).unwrap();
        let cert = boundedness_certificate(&p, 0.5, 1.0, &[-3.0]).unwrap();
        assert_eq!(cert.d, 0.0);
        assert_eq!(cert.per_batch[0].radius, None);
        assert_eq!(cert.bound, 9.0);
    }

    #[test]
    fn certificate_contracts() {
        let err = boundedness_certificate(&two_quads(), 0.5, 2.0, &[0.0]).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
        let c1 = library::instance("softplus-quadratic").unwrap();
        assert!(matches!(
            boundedness_certificate(&c1, 0.5, 1.0, &[0.0]),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn decsps_run_passes_all_checks() {
        let p = two_quads();
        let rule = decsps(0.5);
        let t = run_spec(
            &p,
            &rule,
            &SamplerSpec::Uniform { seed: 11 },
            &[3.0],
            2000,
            &RunPolicy::default(),
        )
        .unwrap();
        assert!(verify_condition_31(&t, 1.0).pass);
        assert!(verify_descent_recursion(&t, &p, 1.0).unwrap().pass);
        assert!(verify_monotone(&t).pass);
        assert!(verify_sandwich(&t, &rule, p.l_max()).unwrap().pass);
        let cert = boundedness_certificate(&p, 0.5, 1.0, &[3.0]).unwrap();
        assert!(check_trajectory_bounded(&t, &cert).pass);
    }

    #[test]
    fn halved_m_fails_on_tight_quadratic() {
        let p = two_quads();
        let t = run_spec(
            &p,
            &StepRule::Constant { gamma: 0.4 },
            &SamplerSpec::Uniform { seed: 2 },
            &[3.0],
            50,
            &RunPolicy::default(),
        )
        .unwrap();
        assert!(verify_condition_31(&t, 0.8).pass);
        let bad = verify_condition_31(&t, 0.4);
        assert!(!bad.pass);
        // m(f − ℓ) − γ‖g‖² = (0.4·½ − 0.4)(x_0 − c)² at the first step.
        let c = if t.batch(0) == [0] { 1.0 } else { -1.0 };
        let first = (0.4 * 0.5 - 0.4) * (3.0f64 - c).powi(2);
        assert!(bad.worst_slack <= first + 1e-12);
    }

    #[test]
    fn inflated_gammas_break_recursion() {
        let p = two_quads();
        let mut t = run_spec(
            &p,
            &decsps(0.5),
            &SamplerSpec::Uniform { seed: 4 },
            &[3.0],
            20,
            &RunPolicy::default(),
        )
        .unwrap();
        t.gammas.iter_mut().for_each(|g| *g *= 10.0);
        let mut x = t.x(0).to_vec();
        for k in 0..t.len() {
            let g = p.grad_batch(t.batch(k), &x).unwrap();
            x[0] -= t.gammas[k] * g[0];
            t.iterates[k + 1] = x[0];
        }
        assert!(!verify_condition_31(&t, 1.0).pass);
        assert!(!verify_descent_recursion(&t, &p, 1.0).unwrap().pass);
    }

    #[test]
    fn single_step_from_origin() {
        // ‖x_1‖² <= m γ_0 (f(0) − ℓ) with x_0 = 0.
        let p = two_quads();
        let t = run_spec(
            &p,
            &decsps(0.5),
            &SamplerSpec::Uniform { seed: 0 },
            &[0.0],
            1,
            &RunPolicy::default(),
        )
        .unwrap();
        let r = verify_descent_recursion(&t, &p, 1.0).unwrap();
        assert!(r.pass);
        let rhs = 1.0 * t.gammas[0] * 0.5;
        assert!((r.worst_slack - (rhs - t.x(1)[0].powi(2))).abs() < 1e-15);
    }

    #[test]
    fn cesaro_examples() {
        assert_eq!(cesaro_mean(&[2.5; 7], 7).unwrap(), 2.5);
        let h = [1.0, 0.5, 1.0 / 3.0, 0.25];
        assert!((cesaro_mean(&h, 4).unwrap() - 25.0 / 48.0).abs() < 1e-15);
        let inv: Vec<f64> = (0..1_000_000)
            .map(|i| 1.0 / ((i + 1) as f64).sqrt())
            .collect();
        assert!(cesaro_mean(&inv, inv.len()).unwrap() <= 0.01);
        assert!(cesaro_mean(&[], 1).is_err());
        assert!(cesaro_mean(&[1.0], 0).is_err());
    }

    #[test]
    fn lemma26_examples() {
        let q = ConvexComponent::quadratic(vec![0.0], 3.0).unwrap();
        assert!(lemma26_gap(&q, &[1.7]).unwrap().abs() < 1e-15);
        let s = ConvexComponent::softplus(vec![1.0]).unwrap();
        let gap = lemma26_gap(&s, &[0.0]).unwrap();
        assert!((gap - (2f64.ln() - 0.5)).abs() < 1e-15);
        assert!(lemma26_gap(&q, &[0.0]).unwrap() >= 0.0);
    }

    #[test]
    fn radius_bisection_matches_formula() {
        let q = ConvexComponent::quadratic(vec![1.0, -2.0], 2.0).unwrap();
        let exact = (5f64).sqrt() + (2.0 * 3.0 / 2.0f64).sqrt();
        assert!((quadratic_radius_by_bisection(&q, 3.0).unwrap() - exact).abs() < 1e-8);
    }

    #[test]
    fn sigma_interpretation() {
        let p = two_quads();
        let (xstar, mu) = global_optimum(&p).unwrap();
        assert_eq!(xstar, vec![0.0]);
        assert_eq!(mu, 0.5);
        assert_eq!(sigma_b_sq(&p, mu).unwrap(), 0.5);
    }

    #[test]
    fn projection_equivalence_both_regimes() {
        let p = library::instance("balls").unwrap();
        for gi in [0.3, 2.0] {
            let rule = decsps(gi);
            let t = run_spec(
                &p,
                &rule,
                &SamplerSpec::Uniform { seed: 8 },
                &[4.0, 4.0],
                500,
                &RunPolicy::default(),
            )
            .unwrap();
            let r = verify_projection_equivalence(&t, &p, &rule).unwrap();
            assert!(r.pass, "{r:?}");
        }
    }

    #[test]
    fn softplus_escape_checks() {
        let p = library::instance("softplus-escape").unwrap();
        let rule = decsps(10.0 / 0.005f64.powi(2));
        let t = run_spec(
            &p,
            &rule,
            &SamplerSpec::Fixed {
                batch: vec![0],
                seed: 0,
            },
            &[0.0],
            20_000,
            &RunPolicy::default(),
        )
        .unwrap();
        assert!(verify_escape(&t, 1000.0).pass);
        assert!(!verify_escape(&t, 1e6).pass);
        assert!(
            verify_norm_growth(&t, &[1000, 10_000, 20_000])
                .unwrap()
                .pass
        );
        assert!(verify_gradsq_decay(&t, 0.5).pass);
        assert!(verify_condition_31(&t, 1.0).pass);
        assert!(verify_descent_recursion(&t, &p, 1.0).unwrap().pass);
        assert!(!verify_diverged(&t, 1e8).pass);
        assert!(
            verify_diverged(
                &run_spec(
                    &p,
                    &rule,
                    &SamplerSpec::Fixed {
                        batch: vec![0],
                        seed: 0
                    },
                    &[0.0],
                    20_000,
                    &RunPolicy {
                        divergence_threshold: 1000.0,
                        ..RunPolicy::default()
                    }
                )
                .unwrap(),
                1000.0
            )
            .pass
        );
    }

    #[test]
    fn envelope_contracts() {
        let p = two_quads();
        let few: Vec<Trajectory> = (0..3)
            .map(|s| {
                run_spec(
                    &p,
                    &decsps(0.5),
                    &SamplerSpec::Uniform { seed: s },
                    &[1.0],
                    10,
                    &RunPolicy::default(),
                )
                .unwrap()
            })
            .collect();
        assert!(matches!(
            rate_envelope_fact14(&p, &few, &decsps(0.5), None, &[1]),
            Err(Error::Contract(_))
        ));
        let sps = StepRule::Sps {
            lambda: 0.5,
            gamma_init: 1.0,
        };
        assert!(matches!(
            rate_envelope_fact11(&p, &few, &sps, &[1]),
            Err(Error::Contract(_))
        ));
    }
}
