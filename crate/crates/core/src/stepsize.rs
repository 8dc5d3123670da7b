//! Stepsize rules: constant, stochastic Polyak (SPS) and its decreasing
//! variant (DecSPS), plus the λ-schedules that drive DecSPS.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn default_scale() -> f64 {
    1.0
}

/// Positive, non-increasing sequence `λ_k`, `k = 0, 1, ...`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LambdaSchedule {
    /// `λ_k = value`
    Constant { value: f64 },
    /// `λ_k = scale / (k+1)^θ`, `θ ∈ (0, 1)`
    Power {
        theta: f64,
        #[serde(default = "default_scale")]
        scale: f64,
    },
    /// `λ_k = scale · ln(k+s) / (k+s)^θ`, `θ ∈ (0, 1]`.
    ///
    /// `ln(t)/t^θ` only decreases for `t >= e^{1/θ}`, so the shift `s` defaults
    /// to `max(2, ⌈e^{1/θ}⌉)`; smaller shifts are rejected.
    LogPower {
        theta: f64,
        #[serde(default = "default_scale")]
        scale: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        shift: Option<u64>,
    },
    /// `λ_k = scale / sqrt(k+1)`
    InvSqrt {
        #[serde(default = "default_scale")]
        scale: f64,
    },
}

impl LambdaSchedule {
    pub fn inv_sqrt() -> Self {
        LambdaSchedule::InvSqrt { scale: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::config("stepsize.schedule", msg));
        let check_scale = |s: f64| s > 0.0 && s.is_finite();
        match *self {
            LambdaSchedule::Constant { value } if !check_scale(value) => {
                bad(format!("constant λ must be positive, got {value}"))
            }
            LambdaSchedule::Power { theta, .. } if !(theta > 0.0 && theta < 1.0) => {
                bad(format!("power schedule needs θ in (0, 1), got {theta}"))
            }
            LambdaSchedule::LogPower { theta, .. } if !(theta > 0.0 && theta <= 1.0) => {
                bad(format!("log-power schedule needs θ in (0, 1], got {theta}"))
            }
            LambdaSchedule::LogPower {
                theta,
                shift: Some(s),
                ..
            } if (s as f64) < Self::min_log_shift(theta) => bad(format!(
                "log-power shift {s} is below ⌈e^(1/θ)⌉ = {}; the schedule would increase",
                Self::min_log_shift(theta)
            )),
            LambdaSchedule::Power { scale, .. }
            | LambdaSchedule::LogPower { scale, .. }
            | LambdaSchedule::InvSqrt { scale }
                if !check_scale(scale) =>
            {
                bad(format!("schedule scale must be positive, got {scale}"))
            }
            _ => Ok(()),
        }
    }

    fn min_log_shift(theta: f64) -> f64 {
        (1.0 / theta).exp().ceil().max(2.0)
    }

    pub fn at(&self, k: u64) -> f64 {
        let t = k as f64;
        match *self {
            LambdaSchedule::Constant { value } => value,
            LambdaSchedule::Power { theta, scale } => scale / (t + 1.0).powf(theta),
            LambdaSchedule::LogPower {
                theta,
                scale,
                shift,
            } => {
                let s = shift.map_or_else(|| Self::min_log_shift(theta), |s| s as f64);
                scale * (t + s).ln() / (t + s).powf(theta)
            }
            LambdaSchedule::InvSqrt { scale } => scale / (t + 1.0).sqrt(),
        }
    }

    pub fn lambda0(&self) -> f64 {
        self.at(0)
    }

    /// Whether `λ_k → 0` (and hence, for these families, `Σ λ_k = ∞`).
    pub fn vanishes(&self) -> bool {
        !matches!(self, LambdaSchedule::Constant { .. })
    }
}

/// SPS: `λ · min{(f − ℓ)/‖g‖², γ_{-1}/λ}`.
pub fn sps(fval: f64, lower: f64, gradsq: f64, lambda: f64, gamma_init: f64) -> Result<f64> {
    if !(lambda > 0.0 && gamma_init > 0.0) {
        return Err(Error::invalid("SPS needs λ > 0 and γ_{-1} > 0"));
    }
    let ratio = polyak_ratio(fval, lower, gradsq)?;
    Ok(lambda * ratio.min(gamma_init / lambda))
}

fn polyak_ratio(fval: f64, lower: f64, gradsq: f64) -> Result<f64> {
    if !(gradsq > 0.0) {
        return Err(Error::ZeroGradient { gradsq });
    }
    if fval < lower {
        return Err(Error::Contract(format!(
            "lower bound {lower} exceeds the batch value {fval}"
        )));
    }
    Ok((fval - lower) / gradsq)
}

/// DecSPS recursion state `(γ_{k-1}, λ_{k-1}, k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct StepsizeState {
    pub prev_gamma: f64,
    pub prev_lambda: f64,
    pub schedule: LambdaSchedule,
    pub k: u64,
}

impl StepsizeState {
    /// Starts with `λ_{-1} := λ_0` and the user-supplied `γ_{-1}`.
    pub fn new(schedule: LambdaSchedule, gamma_init: f64) -> Result<Self> {
        schedule.validate()?;
        if !(gamma_init > 0.0 && gamma_init.is_finite()) {
            return Err(Error::config(
                "stepsize.gamma_init",
                format!("γ_{{-1}} must be positive, got {gamma_init}"),
            ));
        }
        Ok(StepsizeState {
            prev_gamma: gamma_init,
            prev_lambda: schedule.lambda0(),
            schedule,
            k: 0,
        })
    }

    pub fn current_lambda(&self) -> f64 {
        self.schedule.at(self.k)
    }

    /// `γ_k = λ_k · min{(f − ℓ)/‖g‖², γ_{k-1}/λ_{k-1}}` and the advanced state.
    pub fn decsps_next(&self, fval: f64, lower: f64, gradsq: f64) -> Result<(f64, StepsizeState)> {
        let ratio = polyak_ratio(fval, lower, gradsq)?;
        let lambda = self.current_lambda();
        let gamma = lambda * ratio.min(self.prev_gamma / self.prev_lambda);
        let next = StepsizeState {
            prev_gamma: gamma,
            prev_lambda: lambda,
            schedule: self.schedule.clone(),
            k: self.k + 1,
        };
        Ok((gamma, next))
    }
}

/// `(min{1/(2L_max), γ_{-1}/λ_0} λ_k, (γ_{-1}/λ_0) λ_k)`
pub fn sandwich_bounds(
    k: u64,
    schedule: &LambdaSchedule,
    gamma_init: f64,
    lambda0: f64,
    l_max: f64,
) -> Result<(f64, f64)> {
    if l_max < 0.0 || lambda0 <= 0.0 {
        return Err(Error::invalid(
            "sandwich bounds need L_max >= 0 and λ_0 > 0",
        ));
    }
    let lam = schedule.at(k);
    let cap = gamma_init / lambda0;
    let lo = (1.0 / (2.0 * l_max)).min(cap) * lam;
    Ok((lo, cap * lam))
}

/// Stepsize rule as declared in an experiment config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum StepRule {
    Constant {
        gamma: f64,
    },
    Sps {
        #[serde(default = "default_scale")]
        lambda: f64,
        gamma_init: f64,
    },
    Decsps {
        schedule: LambdaSchedule,
        gamma_init: f64,
    },
}

impl StepRule {
    pub fn name(&self) -> &'static str {
        match self {
            StepRule::Constant { .. } => "constant",
            StepRule::Sps { .. } => "sps",
            StepRule::Decsps { .. } => "decsps",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            StepRule::Constant { gamma } if !(*gamma > 0.0 && gamma.is_finite()) => Err(
                Error::config("stepsize.gamma", format!("must be positive, got {gamma}")),
            ),
            StepRule::Sps { lambda, gamma_init } if !(*lambda > 0.0 && *gamma_init > 0.0) => Err(
                Error::config("stepsize", "SPS needs positive `lambda` and `gamma_init`"),
            ),
            StepRule::Decsps {
                schedule,
                gamma_init,
            } => StepsizeState::new(schedule.clone(), *gamma_init).map(|_| ()),
            _ => Ok(()),
        }
    }

    /// Uniform upper bound `γ` with `γ_k <= γ` for every `k`.
    pub fn gamma_cap(&self) -> f64 {
        match self {
            StepRule::Constant { gamma } => *gamma,
            StepRule::Sps { gamma_init, .. } => *gamma_init,
            StepRule::Decsps { gamma_init, .. } => *gamma_init,
        }
    }

    pub fn schedule(&self) -> Option<&LambdaSchedule> {
        match self {
            StepRule::Decsps { schedule, .. } => Some(schedule),
            _ => None,
        }
    }

    pub fn stepper(&self) -> Result<Stepper> {
        self.validate()?;
        Ok(match self {
            StepRule::Constant { gamma } => Stepper::Constant { gamma: *gamma },
            StepRule::Sps { lambda, gamma_init } => Stepper::Sps {
                lambda: *lambda,
                gamma_init: *gamma_init,
            },
            StepRule::Decsps {
                schedule,
                gamma_init,
            } => Stepper::DecSps(StepsizeState::new(schedule.clone(), *gamma_init)?),
        })
    }
}

/// The constant `m` for which `γ_k ‖∇f_{B_k}(x_k)‖² <= m (f_{B_k}(x_k) − ℓ_{B_k})`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Surrogate {
    pub m: f64,
    /// Uniform stepsize bound `γ`.
    pub gamma_cap: f64,
    /// `m < 2`, the regime where iterates stay bounded on C2 problems.
    pub admissible: bool,
}

pub fn surrogate_constant(rule: &StepRule, l_max: f64) -> Result<Surrogate> {
    rule.validate()?;
    let gamma_cap = rule.gamma_cap();
    let m = match rule {
        StepRule::Constant { gamma } => 2.0 * l_max * gamma,
        // γ_k <= λ (f − ℓ)/‖g‖² and γ_k <= γ_{-1}
        StepRule::Sps { lambda, gamma_init } => lambda.min(2.0 * l_max * gamma_init),
        StepRule::Decsps { schedule, .. } => schedule.lambda0(),
    };
    Ok(Surrogate {
        m,
        gamma_cap,
        admissible: m < 2.0,
    })
}

/// Runtime stepsize state owned by one run.
#[derive(Clone, Debug, PartialEq)]
pub enum Stepper {
    Constant { gamma: f64 },
    Sps { lambda: f64, gamma_init: f64 },
    DecSps(StepsizeState),
}

impl Stepper {
    /// Stepsize for the accepted measurement; the state advances only on success.
    pub fn step(&mut self, fval: f64, lower: f64, gradsq: f64) -> Result<f64> {
        match self {
            Stepper::Constant { gamma } => {
                if !(gradsq > 0.0) {
                    return Err(Error::ZeroGradient { gradsq });
                }
                Ok(*gamma)
            }
            Stepper::Sps { lambda, gamma_init } => sps(fval, lower, gradsq, *lambda, *gamma_init),
            Stepper::DecSps(state) => {
                let (gamma, next) = state.decsps_next(fval, lower, gradsq)?;
                *state = next;
                Ok(gamma)
            }
        }
    }
}
