//! Closed convex sets with exact orthogonal projectors.
//!
//! Every set here has a closed-form projector. General polyhedra are accepted
//! only when their facet normals split into mutually orthogonal directions
//! (orthant, slab and box products in a rotated frame); anything else would
//! need an iterative QP and is rejected with [`Error::UnsupportedSet`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm, norm_sq};

const PARALLEL_TOL: f64 = 1e-12;

/// Serializable description of a set, as written in experiment configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SetSpec {
    /// `{x : <normal, x> <= offset}`
    Halfspace {
        normal: Vec<f64>,
        offset: f64,
    },
    /// `{x : <normal, x> = offset}`
    Hyperplane {
        normal: Vec<f64>,
        offset: f64,
    },
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    /// Intersection of half-spaces `<normal_j, x> <= offset_j`.
    Polyhedron {
        halfspaces: Vec<HalfspaceSpec>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HalfspaceSpec {
    pub normal: Vec<f64>,
    pub offset: f64,
}

/// `lo <= <dir, x> <= hi` with a unit `dir`; either bound may be infinite.
#[derive(Clone, Debug, PartialEq)]
pub struct Slab {
    pub dir: Vec<f64>,
    pub lo: f64,
    pub hi: f64,
}

impl Slab {
    fn project_in_place(&self, x: &mut [f64]) {
        let t = dot(&self.dir, x);
        let clamped = t.clamp(self.lo, self.hi);
        if clamped != t {
            axpy(clamped - t, &self.dir, x);
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ConvexSet {
    Halfspace {
        normal: Vec<f64>,
        offset: f64,
    },
    Hyperplane {
        normal: Vec<f64>,
        offset: f64,
    },
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    /// Product of mutually orthogonal slabs.
    Polyhedron {
        dim: usize,
        slabs: Vec<Slab>,
    },
}

/// Directions of non-increase of `d_C`: `{v : ineq·v <= 0, eq·v = 0}`.
#[derive(Clone, Debug, PartialEq)]
pub enum Recession {
    /// Bounded set; only `v = 0`.
    Trivial,
    Cone {
        ineq: Vec<Vec<f64>>,
        eq: Vec<Vec<f64>>,
    },
}

fn check_normal(normal: &[f64]) -> Result<f64> {
    if normal.is_empty() {
        return Err(Error::invalid("normal vector has no entries"));
    }
    let nsq = norm_sq(normal);
    if !(nsq > 0.0 && nsq.is_finite()) {
        return Err(Error::invalid("normal vector must be nonzero and finite"));
    }
    Ok(nsq)
}

impl ConvexSet {
    pub fn from_spec(spec: &SetSpec) -> Result<Self> {
        match spec {
            SetSpec::Halfspace { normal, offset } => Self::halfspace(normal.clone(), *offset),
            SetSpec::Hyperplane { normal, offset } => Self::hyperplane(normal.clone(), *offset),
            SetSpec::Ball { center, radius } => Self::ball(center.clone(), *radius),
            SetSpec::Box { lo, hi } => Self::boxed(lo.clone(), hi.clone()),
            SetSpec::Polyhedron { halfspaces } => Self::polyhedron(
                &halfspaces
                    .iter()
                    .map(|h| (h.normal.clone(), h.offset))
                    .collect::<Vec<_>>(),
            ),
        }
    }

    pub fn to_spec(&self) -> SetSpec {
        match self {
            ConvexSet::Halfspace { normal, offset } => SetSpec::Halfspace {
                normal: normal.clone(),
                offset: *offset,
            },
            ConvexSet::Hyperplane { normal, offset } => SetSpec::Hyperplane {
                normal: normal.clone(),
                offset: *offset,
            },
            ConvexSet::Ball { center, radius } => SetSpec::Ball {
                center: center.clone(),
                radius: *radius,
            },
            ConvexSet::Box { lo, hi } => SetSpec::Box {
                lo: lo.clone(),
                hi: hi.clone(),
            },
            ConvexSet::Polyhedron { slabs, .. } => {
                let mut halfspaces = Vec::new();
                for s in slabs {
                    if s.hi.is_finite() {
                        halfspaces.push(HalfspaceSpec {
                            normal: s.dir.clone(),
                            offset: s.hi,
                        });
                    }
                    if s.lo.is_finite() {
                        halfspaces.push(HalfspaceSpec {
                            normal: s.dir.iter().map(|v| -v).collect(),
                            offset: -s.lo,
                        });
                    }
                }
                SetSpec::Polyhedron { halfspaces }
            }
        }
    }

    pub fn halfspace(normal: Vec<f64>, offset: f64) -> Result<Self> {
        check_normal(&normal)?;
        if !offset.is_finite() {
            return Err(Error::invalid("half-space offset must be finite"));
        }
        Ok(ConvexSet::Halfspace { normal, offset })
    }

    pub fn hyperplane(normal: Vec<f64>, offset: f64) -> Result<Self> {
        check_normal(&normal)?;
        if !offset.is_finite() {
            return Err(Error::invalid("hyperplane offset must be finite"));
        }
        Ok(ConvexSet::Hyperplane { normal, offset })
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() {
            return Err(Error::invalid("ball center has no entries"));
        }
        if !(radius >= 0.0 && radius.is_finite()) {
            return Err(Error::invalid(format!(
                "ball radius must be >= 0, got {radius}"
            )));
        }
        Ok(ConvexSet::Ball { center, radius })
    }

    pub fn boxed(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::invalid(
                "box bounds must be nonempty and of equal length",
            ));
        }
        if lo
            .iter()
            .zip(&hi)
            .any(|(l, h)| !(l <= h) || !l.is_finite() || !h.is_finite())
        {
            return Err(Error::invalid(
                "box requires finite lo <= hi in every coordinate",
            ));
        }
        Ok(ConvexSet::Box { lo, hi })
    }

    /// Builds `{x : <a_j, x> <= b_j}`; normals must be pairwise parallel or orthogonal.
    pub fn polyhedron(halfspaces: &[(Vec<f64>, f64)]) -> Result<Self> {
        let dim = match halfspaces.first() {
            Some((a, _)) => a.len(),
            None => return Err(Error::invalid("polyhedron needs at least one half-space")),
        };
        let mut slabs: Vec<Slab> = Vec::new();
        for (a, b) in halfspaces {
            if a.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: a.len(),
                });
            }
            let n = check_normal(a)?.sqrt();
            if !b.is_finite() {
                return Err(Error::invalid("polyhedron offsets must be finite"));
            }
            let u: Vec<f64> = a.iter().map(|v| v / n).collect();
            let bound = b / n;
            let mut placed = false;
            for s in slabs.iter_mut() {
                let c = dot(&s.dir, &u);
                if c >= 1.0 - PARALLEL_TOL {
                    s.hi = s.hi.min(bound);
                    placed = true;
                    break;
                } else if c <= -1.0 + PARALLEL_TOL {
                    s.lo = s.lo.max(-bound);
                    placed = true;
                    break;
                } else if c.abs() > PARALLEL_TOL {
                    return Err(Error::UnsupportedSet(format!(
                        "facet normals {:?} and {:?} are neither parallel nor orthogonal; \
                         exact projection needs an orthogonal slab decomposition",
                        s.dir, a
                    )));
                }
            }
            if !placed {
                slabs.push(Slab {
                    dir: u,
                    lo: f64::NEG_INFINITY,
                    hi: bound,
                });
            }
        }
        if let Some(s) = slabs.iter().find(|s| s.lo > s.hi) {
            return Err(Error::invalid(format!(
                "polyhedron is empty along direction {:?}",
                s.dir
            )));
        }
        Ok(ConvexSet::Polyhedron { dim, slabs })
    }

    pub fn dim(&self) -> usize {
        match self {
            ConvexSet::Halfspace { normal, .. } | ConvexSet::Hyperplane { normal, .. } => {
                normal.len()
            }
            ConvexSet::Ball { center, .. } => center.len(),
            ConvexSet::Box { lo, .. } => lo.len(),
            ConvexSet::Polyhedron { dim, .. } => *dim,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            ConvexSet::Halfspace { .. } => "halfspace",
            ConvexSet::Hyperplane { .. } => "hyperplane",
            ConvexSet::Ball { .. } => "ball",
            ConvexSet::Box { .. } => "box",
            ConvexSet::Polyhedron { .. } => "polyhedron",
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Nearest point of the set to `x`.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        Ok(self.project_unchecked(x))
    }

    pub(crate) fn project_unchecked(&self, x: &[f64]) -> Vec<f64> {
        let mut p = x.to_vec();
        match self {
            ConvexSet::Halfspace { normal, offset } => {
                let excess = dot(normal, x) - offset;
                if excess > 0.0 {
                    axpy(-excess / norm_sq(normal), normal, &mut p);
                }
            }
            ConvexSet::Hyperplane { normal, offset } => {
                let excess = dot(normal, x) - offset;
                axpy(-excess / norm_sq(normal), normal, &mut p);
            }
            ConvexSet::Ball { center, radius } => {
                let d: Vec<f64> = x.iter().zip(center).map(|(a, c)| a - c).collect();
                let n = norm(&d);
                if n > *radius {
                    for ((pi, ci), di) in p.iter_mut().zip(center).zip(&d) {
                        *pi = ci + radius * di / n;
                    }
                }
            }
            ConvexSet::Box { lo, hi } => {
                for ((pi, l), h) in p.iter_mut().zip(lo).zip(hi) {
                    *pi = pi.clamp(*l, *h);
                }
            }
            ConvexSet::Polyhedron { slabs, .. } => {
                for s in slabs {
                    s.project_in_place(&mut p);
                }
            }
        }
        p
    }

    /// `x - P(x)`, the gradient of `½ d²(x)`.
    pub fn residual(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        Ok(self.residual_unchecked(x))
    }

    pub(crate) fn residual_unchecked(&self, x: &[f64]) -> Vec<f64> {
        let p = self.project_unchecked(x);
        x.iter().zip(&p).map(|(a, b)| a - b).collect()
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> Result<bool> {
        self.check_dim(x)?;
        let r = self.residual_unchecked(x);
        Ok(norm(&r) <= tol)
    }

    pub fn is_bounded(&self) -> bool {
        matches!(self.recession(), Recession::Trivial)
    }

    pub fn recession(&self) -> Recession {
        match self {
            ConvexSet::Ball { .. } | ConvexSet::Box { .. } => Recession::Trivial,
            ConvexSet::Halfspace { normal, .. } => Recession::Cone {
                ineq: vec![normal.clone()],
                eq: vec![],
            },
            ConvexSet::Hyperplane { normal, .. } => Recession::Cone {
                ineq: vec![],
                eq: vec![normal.clone()],
            },
            ConvexSet::Polyhedron { dim, slabs } => {
                let mut ineq = Vec::new();
                let mut eq = Vec::new();
                for s in slabs {
                    match (s.lo.is_finite(), s.hi.is_finite()) {
                        (true, true) => eq.push(s.dir.clone()),
                        (false, true) => ineq.push(s.dir.clone()),
                        (true, false) => ineq.push(s.dir.iter().map(|v| -v).collect()),
                        (false, false) => {}
                    }
                }
                let spanned = crate::linalg::null_space(&eq, *dim, 1e-12).is_empty();
                if spanned {
                    Recession::Trivial
                } else {
                    Recession::Cone { ineq, eq }
                }
            }
        }
    }

    /// Largest norm of a point in the set, when it is bounded.
    pub fn max_norm(&self) -> Option<f64> {
        match self {
            ConvexSet::Ball { center, radius } => Some(norm(center) + radius),
            ConvexSet::Box { lo, hi } => Some(
                lo.iter()
                    .zip(hi)
                    .map(|(l, h)| l.abs().max(h.abs()).powi(2))
                    .sum::<f64>()
                    .sqrt(),
            ),
            _ => None,
        }
    }
}

/// Relaxed projection `(1 - t) x + t P(x)` with `t = λ_k min{1/2, γ_{-1}/λ_0}`.
pub fn relaxed_projection_step(
    set: &ConvexSet,
    x: &[f64],
    lambda_k: f64,
    lambda_0: f64,
    gamma_init: f64,
) -> Result<Vec<f64>> {
    if !(lambda_k > 0.0 && lambda_0 > 0.0 && gamma_init > 0.0) {
        return Err(Error::invalid(
            "relaxed projection needs positive lambda_k, lambda_0 and gamma_init",
        ));
    }
    if lambda_k > lambda_0 {
        return Err(Error::invalid(format!(
            "lambda_k = {lambda_k} exceeds lambda_0 = {lambda_0}"
        )));
    }
    let p = set.project(x)?;
    let t = relaxation(lambda_k, lambda_0, gamma_init);
    Ok(x.iter()
        .zip(&p)
        .map(|(xi, pi)| (1.0 - t) * xi + t * pi)
        .collect())
}

pub fn relaxation(lambda_k: f64, lambda_0: f64, gamma_init: f64) -> f64 {
    lambda_k * (0.5f64).min(gamma_init / lambda_0)
}
