//! Smooth convex components, finite-sum problems and batch functions.
//!
//! A problem is `f = (1/N) Σ f_i`; a batch `B` of fixed size `b` defines
//! `f_B = (1/b) Σ_{i∈B} f_i`. Each library component certifies its own
//! smoothness constant, a lower bound on its infimum, and the structural
//! metadata used to place a problem in one of the cases C1/C2/C3.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm, norm_sq};
use crate::projections::{ConvexSet, Recession, SetSpec};
use crate::rng::{binomial, unrank_combination, SplitMix64};

/// Batches are index sets into `0..N`, kept sorted.
pub type Batch = Vec<usize>;

/// Largest number of batches the exhaustive classifiers will enumerate.
pub const MAX_ENUMERATED_BATCHES: u64 = 1 << 20;

#[derive(Clone, Debug, PartialEq)]
pub enum ComponentKind {
    /// `(scale/2) ‖x − center‖²`
    Quadratic { center: Vec<f64>, scale: f64 },
    /// `ln(1 + exp(−⟨direction, x⟩))`
    Softplus { direction: Vec<f64> },
    /// `½ d_C(x)²`
    SqDist { set: ConvexSet },
    /// `½ max(0, x)²` on the real line.
    OneSidedQuadratic,
}

/// Structural facts certified by the constructor.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComponentMeta {
    pub has_minimizer: bool,
    /// Norm of the minimum-norm minimizer.
    pub minimizer_norm: Option<f64>,
    pub coercive: bool,
    /// Exact `inf f_i`.
    pub infimum: f64,
}

/// Shape of `lev_ξ f \ argmin f`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LevelGap {
    Empty,
    /// Every point of the set has norm at most this value.
    Bounded(f64),
    Unbounded,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvexComponent {
    kind: ComponentKind,
    dim: usize,
    smoothness: f64,
    lower_bound: f64,
    meta: ComponentMeta,
}

fn softplus_value(t: f64) -> f64 {
    // ln(1 + e^{-t})
    if t > 0.0 {
        (-t).exp().ln_1p()
    } else {
        -t + t.exp().ln_1p()
    }
}

fn logistic_neg(t: f64) -> f64 {
    // 1 / (1 + e^{t})
    if t >= 0.0 {
        let e = (-t).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + t.exp())
    }
}

impl ConvexComponent {
    pub fn quadratic(center: Vec<f64>, scale: f64) -> Result<Self> {
        if center.is_empty() {
            return Err(Error::invalid("quadratic center has no entries"));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::invalid(format!(
                "quadratic scale must be > 0, got {scale}"
            )));
        }
        let meta = ComponentMeta {
            has_minimizer: true,
            minimizer_norm: Some(norm(&center)),
            coercive: true,
            infimum: 0.0,
        };
        Ok(ConvexComponent {
            dim: center.len(),
            kind: ComponentKind::Quadratic { center, scale },
            smoothness: scale,
            lower_bound: 0.0,
            meta,
        })
    }

    pub fn softplus(direction: Vec<f64>) -> Result<Self> {
        if direction.is_empty() {
            return Err(Error::invalid("softplus direction has no entries"));
        }
        let nsq = norm_sq(&direction);
        if !(nsq > 0.0 && nsq.is_finite()) {
            return Err(Error::invalid("softplus direction must be nonzero"));
        }
        let meta = ComponentMeta {
            has_minimizer: false,
            minimizer_norm: None,
            coercive: false,
            infimum: 0.0,
        };
        Ok(ConvexComponent {
            dim: direction.len(),
            kind: ComponentKind::Softplus { direction },
            smoothness: nsq / 4.0,
            lower_bound: 0.0,
            meta,
        })
    }

    pub fn sq_dist(set: ConvexSet) -> Self {
        let min_norm = norm(&set.project_unchecked(&vec![0.0; set.dim()]));
        let meta = ComponentMeta {
            has_minimizer: true,
            minimizer_norm: Some(min_norm),
            coercive: set.is_bounded(),
            infimum: 0.0,
        };
        ConvexComponent {
            dim: set.dim(),
            kind: ComponentKind::SqDist { set },
            smoothness: 1.0,
            lower_bound: 0.0,
            meta,
        }
    }

    pub fn one_sided_quadratic() -> Self {
        ConvexComponent {
            dim: 1,
            kind: ComponentKind::OneSidedQuadratic,
            smoothness: 1.0,
            lower_bound: 0.0,
            meta: ComponentMeta {
                has_minimizer: true,
                minimizer_norm: Some(0.0),
                coercive: false,
                infimum: 0.0,
            },
        }
    }

    /// Replaces the certified lower bound with a looser one.
    pub fn with_lower_bound(mut self, lower: f64) -> Result<Self> {
        if !lower.is_finite() || lower > self.meta.infimum {
            return Err(Error::invalid(format!(
                "lower bound {lower} exceeds the infimum {}",
                self.meta.infimum
            )));
        }
        self.lower_bound = lower;
        Ok(self)
    }

    pub fn kind(&self) -> &ComponentKind {
        &self.kind
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            ComponentKind::Quadratic { .. } => "quadratic",
            ComponentKind::Softplus { .. } => "softplus",
            ComponentKind::SqDist { .. } => "sq_dist",
            ComponentKind::OneSidedQuadratic => "one_sided_quadratic",
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn smoothness(&self) -> f64 {
        self.smoothness
    }

    pub fn lower_bound(&self) -> f64 {
        self.lower_bound
    }

    pub fn meta(&self) -> &ComponentMeta {
        &self.meta
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.eval_unchecked(x))
    }

    pub fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let mut g = vec![0.0; self.dim];
        self.add_grad(x, 1.0, &mut g);
        Ok(g)
    }

    pub(crate) fn eval_unchecked(&self, x: &[f64]) -> f64 {
        match &self.kind {
            ComponentKind::Quadratic { center, scale } => {
                0.5 * scale * crate::linalg::dist_sq(x, center)
            }
            ComponentKind::Softplus { direction } => softplus_value(dot(direction, x)),
            ComponentKind::SqDist { set } => 0.5 * norm_sq(&set.residual_unchecked(x)),
            ComponentKind::OneSidedQuadratic => {
                let p = x[0].max(0.0);
                0.5 * p * p
            }
        }
    }

    /// `out += weight * ∇f(x)`
    pub(crate) fn add_grad(&self, x: &[f64], weight: f64, out: &mut [f64]) {
        match &self.kind {
            ComponentKind::Quadratic { center, scale } => {
                for ((o, xi), ci) in out.iter_mut().zip(x).zip(center) {
                    *o += weight * scale * (xi - ci);
                }
            }
            ComponentKind::Softplus { direction } => {
                let s = logistic_neg(dot(direction, x));
                axpy(-weight * s, direction, out);
            }
            ComponentKind::SqDist { set } => {
                let r = set.residual_unchecked(x);
                axpy(weight, &r, out);
            }
            ComponentKind::OneSidedQuadratic => {
                out[0] += weight * x[0].max(0.0);
            }
        }
    }

    /// Minimum-norm minimizer, when one exists.
    pub fn min_norm_minimizer(&self) -> Option<Vec<f64>> {
        match &self.kind {
            ComponentKind::Quadratic { center, .. } => Some(center.clone()),
            ComponentKind::Softplus { .. } => None,
            ComponentKind::SqDist { set } => Some(set.project_unchecked(&vec![0.0; self.dim])),
            ComponentKind::OneSidedQuadratic => Some(vec![0.0]),
        }
    }

    /// Norm bound for `lev_ξ f \ argmin f`.
    pub fn level_gap(&self, xi: f64) -> LevelGap {
        if xi <= self.meta.infimum && self.meta.has_minimizer {
            return LevelGap::Empty;
        }
        match &self.kind {
            ComponentKind::Quadratic { center, scale } => {
                LevelGap::Bounded(norm(center) + (2.0 * xi / scale).sqrt())
            }
            ComponentKind::Softplus { .. } => LevelGap::Unbounded,
            ComponentKind::SqDist { set } => {
                let grow = (2.0 * xi).sqrt();
                if let Some(r) = set.max_norm() {
                    return LevelGap::Bounded(r + grow);
                }
                if self.dim == 1 {
                    // On the real line lev∖argmin lies within `grow` of the finite
                    // endpoints of the interval C.
                    let edge = match set {
                        ConvexSet::Halfspace { normal, offset }
                        | ConvexSet::Hyperplane { normal, offset } => (offset / normal[0]).abs(),
                        ConvexSet::Polyhedron { slabs, .. } => [slabs[0].lo, slabs[0].hi]
                            .iter()
                            .filter(|v| v.is_finite())
                            .fold(0.0, |m: f64, v| m.max(v.abs())),
                        _ => return LevelGap::Unbounded,
                    };
                    return LevelGap::Bounded(edge + grow);
                }
                LevelGap::Unbounded
            }
            ComponentKind::OneSidedQuadratic => LevelGap::Bounded((2.0 * xi).sqrt()),
        }
    }

    /// Recession directions `v` along which `f` never increases.
    fn recession(&self) -> Recession {
        match &self.kind {
            ComponentKind::Quadratic { .. } => Recession::Trivial,
            ComponentKind::Softplus { direction } => Recession::Cone {
                ineq: vec![direction.iter().map(|v| -v).collect()],
                eq: vec![],
            },
            ComponentKind::SqDist { set } => set.recession(),
            ComponentKind::OneSidedQuadratic => Recession::Cone {
                ineq: vec![vec![1.0]],
                eq: vec![],
            },
        }
    }
}

/// The three batch-level cases.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Case {
    /// Some batch function has no minimizer.
    C1,
    /// Every batch has a minimizer and bounded `lev_ξ f_B \ argmin f_B`.
    C2,
    /// Every batch has a minimizer but some `lev_ξ f_B \ argmin f_B` is unbounded.
    C3,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CaseLabel {
    pub case: Case,
    pub witness: Option<Batch>,
}

/// Per-batch verdict of the metadata classifier.
#[derive(Clone, Debug, PartialEq)]
pub enum BatchClass {
    NoMinimizer,
    GapBounded,
    GapUnbounded,
    Undecided(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct FiniteSumProblem {
    components: Vec<ConvexComponent>,
    batch_size: usize,
    dim: usize,
}

impl FiniteSumProblem {
    pub fn new(components: Vec<ConvexComponent>, batch_size: usize) -> Result<Self> {
        let dim = match components.first() {
            Some(c) => c.dim(),
            None => return Err(Error::invalid("a problem needs at least one component")),
        };
        if let Some(c) = components.iter().find(|c| c.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: c.dim(),
            });
        }
        if batch_size == 0 || batch_size > components.len() {
            return Err(Error::invalid(format!(
                "batch size {batch_size} must lie in 1..={}",
                components.len()
            )));
        }
        Ok(FiniteSumProblem {
            components,
            batch_size,
            dim,
        })
    }

    pub fn components(&self) -> &[ConvexComponent] {
        &self.components
    }

    pub fn n(&self) -> usize {
        self.components.len()
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn l_max(&self) -> f64 {
        self.components
            .iter()
            .map(|c| c.smoothness())
            .fold(0.0, f64::max)
    }

    pub fn num_batches(&self) -> Result<u64> {
        binomial(self.n(), self.batch_size)
    }

    /// All batches in lexicographic order.
    pub fn all_batches(&self) -> Result<Vec<Batch>> {
        let total = self.num_batches()?;
        if total > MAX_ENUMERATED_BATCHES {
            return Err(Error::invalid(format!(
                "{total} batches are too many to enumerate"
            )));
        }
        (0..total)
            .map(|r| unrank_combination(self.n(), self.batch_size, r))
            .collect()
    }

    pub fn check_batch(&self, batch: &[usize]) -> Result<()> {
        if batch.len() != self.batch_size {
            return Err(Error::invalid(format!(
                "batch {batch:?} has size {}, expected {}",
                batch.len(),
                self.batch_size
            )));
        }
        self.check_index_set(batch)
    }

    fn check_index_set(&self, idx: &[usize]) -> Result<()> {
        let mut sorted = idx.to_vec();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid(format!("batch {idx:?} repeats an index")));
        }
        if let Some(&i) = sorted.last().filter(|&&i| i >= self.n()) {
            return Err(Error::invalid(format!(
                "batch index {i} out of range 0..{}",
                self.n()
            )));
        }
        Ok(())
    }

    fn check_x(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// `f_B(x) = (1/b) Σ_{i∈B} f_i(x)`
    pub fn eval_batch(&self, batch: &[usize], x: &[f64]) -> Result<f64> {
        self.check_batch(batch)?;
        self.check_x(x)?;
        Ok(self.eval_subset(batch, x))
    }

    pub fn grad_batch(&self, batch: &[usize], x: &[f64]) -> Result<Vec<f64>> {
        self.check_batch(batch)?;
        self.check_x(x)?;
        let mut g = vec![0.0; self.dim];
        self.grad_subset_into(batch, x, &mut g);
        Ok(g)
    }

    /// Average of the component lower bounds; never above `inf f_B`.
    pub fn batch_lower_bound(&self, batch: &[usize]) -> Result<f64> {
        self.check_batch(batch)?;
        Ok(self.lower_subset(batch))
    }

    /// `min(L_max, mean of L_i over the batch)`.
    pub fn batch_smoothness(&self, batch: &[usize]) -> Result<f64> {
        self.check_batch(batch)?;
        Ok(self.smoothness_subset(batch))
    }

    /// Full objective `f = (1/N) Σ f_i`.
    pub fn eval_full(&self, x: &[f64]) -> Result<f64> {
        self.check_x(x)?;
        Ok(self.eval_subset(&(0..self.n()).collect::<Vec<_>>(), x))
    }

    pub(crate) fn eval_subset(&self, idx: &[usize], x: &[f64]) -> f64 {
        let s: f64 = idx
            .iter()
            .map(|&i| self.components[i].eval_unchecked(x))
            .sum();
        s / idx.len() as f64
    }

    pub(crate) fn grad_subset_into(&self, idx: &[usize], x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let w = 1.0 / idx.len() as f64;
        for &i in idx {
            self.components[i].add_grad(x, w, out);
        }
    }

    pub(crate) fn lower_subset(&self, idx: &[usize]) -> f64 {
        let s: f64 = idx.iter().map(|&i| self.components[i].lower_bound()).sum();
        s / idx.len() as f64
    }

    pub(crate) fn smoothness_subset(&self, idx: &[usize]) -> f64 {
        let s: f64 = idx.iter().map(|&i| self.components[i].smoothness()).sum();
        (s / idx.len() as f64).min(self.l_max())
    }

    /// Classifies one batch (any index set) from component metadata.
    pub fn classify_batch(&self, idx: &[usize]) -> Result<BatchClass> {
        self.check_index_set(idx)?;
        let mut ineq = Vec::new();
        let mut eq = Vec::new();
        for &i in idx {
            match self.components[i].recession() {
                Recession::Trivial => return Ok(BatchClass::GapBounded),
                Recession::Cone { ineq: gi, eq: ge } => {
                    ineq.extend(gi);
                    eq.extend(ge);
                }
            }
        }
        let gens = cone_generators(&ineq, &eq, self.dim)?;
        if gens.is_empty() {
            // Trivial recession cone: f_B is coercive.
            return Ok(BatchClass::GapBounded);
        }
        let softplus: Vec<&Vec<f64>> = idx
            .iter()
            .filter_map(|&i| match &self.components[i].kind {
                ComponentKind::Softplus { direction } => Some(direction),
                _ => None,
            })
            .collect();
        if softplus.is_empty() {
            // Polyhedral squared distances attain their infimum; in one dimension
            // lev∖argmin is always bounded, otherwise an unbounded argmin with a
            // proper subset of the space leaves lev∖argmin unbounded.
            return Ok(if self.dim == 1 {
                BatchClass::GapBounded
            } else {
                BatchClass::GapUnbounded
            });
        }
        let strictly_decreasing = gens.iter().any(|v| {
            let nv = norm(v);
            softplus.iter().any(|a| dot(a, v) > 1e-12 * nv * norm(a))
        });
        if strictly_decreasing {
            Ok(BatchClass::NoMinimizer)
        } else {
            Ok(BatchClass::Undecided(format!(
                "batch {idx:?}: softplus terms are flat along every recession direction"
            )))
        }
    }

    /// Places the problem in C1, C2 or C3.
    pub fn classify_case(&self) -> Result<CaseLabel> {
        let coercive = self.components.iter().filter(|c| c.meta().coercive).count();
        if coercive + self.batch_size > self.n() {
            // At least N − b + 1 coercive components: every batch contains one.
            return Ok(CaseLabel {
                case: Case::C2,
                witness: None,
            });
        }
        let mut c3_witness = None;
        let mut undecided = None;
        for batch in self.all_batches()? {
            match self.classify_batch(&batch)? {
                BatchClass::NoMinimizer => {
                    return Ok(CaseLabel {
                        case: Case::C1,
                        witness: Some(batch),
                    })
                }
                BatchClass::GapUnbounded => {
                    c3_witness.get_or_insert(batch);
                }
                BatchClass::Undecided(reason) => {
                    undecided.get_or_insert(reason);
                }
                BatchClass::GapBounded => {}
            }
        }
        if let Some(reason) = undecided {
            return Err(Error::InsufficientMetadata(reason));
        }
        Ok(match c3_witness {
            Some(w) => CaseLabel {
                case: Case::C3,
                witness: Some(w),
            },
            None => CaseLabel {
                case: Case::C2,
                witness: None,
            },
        })
    }

    /// Minimizer, infimum and level-gap oracle of `f_B` for a C2 batch.
    pub fn batch_geometry(&self, idx: &[usize]) -> Result<BatchGeometry> {
        match self.classify_batch(idx)? {
            BatchClass::GapBounded => {}
            BatchClass::NoMinimizer => {
                return Err(Error::Contract(format!("batch {idx:?} has no minimizer")))
            }
            BatchClass::GapUnbounded => {
                return Err(Error::Contract(format!(
                    "batch {idx:?} has unbounded lev∖argmin"
                )))
            }
            BatchClass::Undecided(r) => return Err(Error::InsufficientMetadata(r)),
        }
        let comps: Vec<&ConvexComponent> = idx.iter().map(|&i| &self.components[i]).collect();
        if idx.len() == 1 {
            let c = comps[0];
            let minimizer = c
                .min_norm_minimizer()
                .ok_or_else(|| Error::InsufficientMetadata("component has no minimizer".into()))?;
            return Ok(BatchGeometry {
                minimizer,
                infimum: c.meta().infimum,
                approximate: false,
                oracle: GapOracle::Component(idx[0]),
            });
        }
        if comps
            .iter()
            .all(|c| matches!(c.kind, ComponentKind::Quadratic { .. }))
        {
            let mut total = 0.0;
            let mut center = vec![0.0; self.dim];
            for c in &comps {
                if let ComponentKind::Quadratic { center: ci, scale } = &c.kind {
                    total += scale;
                    axpy(*scale, ci, &mut center);
                }
            }
            center.iter_mut().for_each(|v| *v /= total);
            let infimum = self.eval_subset(idx, &center);
            return Ok(BatchGeometry {
                infimum,
                approximate: false,
                oracle: GapOracle::Quadratic {
                    center: center.clone(),
                    scale: total / idx.len() as f64,
                },
                minimizer: center,
            });
        }
        if comps
            .iter()
            .all(|c| matches!(c.kind, ComponentKind::OneSidedQuadratic))
        {
            return Ok(BatchGeometry {
                minimizer: vec![0.0],
                infimum: 0.0,
                approximate: false,
                oracle: GapOracle::OneSided,
            });
        }
        let (minimizer, infimum) = self.minimize_subset(idx)?;
        Ok(BatchGeometry {
            minimizer,
            infimum,
            approximate: true,
            oracle: GapOracle::Numeric,
        })
    }

    /// Gradient descent with step `1/L_B` on a coercive batch function.
    fn minimize_subset(&self, idx: &[usize]) -> Result<(Vec<f64>, f64)> {
        let step = 1.0 / self.smoothness_subset(idx);
        let mut x = vec![0.0; self.dim];
        let mut g = vec![0.0; self.dim];
        for _ in 0..2_000_000 {
            self.grad_subset_into(idx, &x, &mut g);
            if norm_sq(&g) <= 1e-26 {
                break;
            }
            axpy(-step, &g, &mut x);
        }
        self.grad_subset_into(idx, &x, &mut g);
        if norm_sq(&g) > 1e-16 {
            return Err(Error::NumericalFailure {
                k: 0,
                detail: format!(
                    "batch {idx:?}: minimizer search stalled at ‖∇‖² = {:e}",
                    norm_sq(&g)
                ),
            });
        }
        let inf = self.eval_subset(idx, &x);
        Ok((x, inf))
    }

    /// Norm bound on `lev_ξ f_B \ argmin f_B`.
    pub fn batch_level_gap(&self, idx: &[usize], geom: &BatchGeometry, xi: f64) -> LevelGap {
        match &geom.oracle {
            GapOracle::Component(i) => self.components[*i].level_gap(xi),
            GapOracle::Quadratic { center, scale } => {
                if xi <= geom.infimum {
                    LevelGap::Empty
                } else {
                    LevelGap::Bounded(norm(center) + (2.0 * (xi - geom.infimum) / scale).sqrt())
                }
            }
            GapOracle::OneSided => {
                if xi <= 0.0 {
                    LevelGap::Empty
                } else {
                    LevelGap::Bounded((2.0 * xi).sqrt())
                }
            }
            GapOracle::Numeric => {
                if xi < geom.infimum - 1e-9 {
                    LevelGap::Empty
                } else {
                    LevelGap::Bounded(self.numeric_level_radius(idx, &geom.minimizer, xi))
                }
            }
        }
    }

    /// Largest norm in `lev_ξ f_B`, by bisection along rays from a minimizer
    /// plus a grid sweep when `dim <= 3`.
    pub fn numeric_level_radius(&self, idx: &[usize], minimizer: &[f64], xi: f64) -> f64 {
        let d = self.dim;
        let mut dirs: Vec<Vec<f64>> = Vec::new();
        for i in 0..d {
            let mut e = vec![0.0; d];
            e[i] = 1.0;
            dirs.push(e.clone());
            e[i] = -1.0;
            dirs.push(e);
        }
        let mn = norm(minimizer);
        if mn > 0.0 {
            dirs.push(minimizer.iter().map(|v| v / mn).collect());
        }
        let mut rng = SplitMix64::new(0x05EE_D0F1_E7E1);
        for _ in 0..64 {
            let v: Vec<f64> = (0..d)
                .map(|_| (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0)
                .collect();
            let n = norm(&v);
            if n > 1e-9 {
                dirs.push(v.iter().map(|c| c / n).collect());
            }
        }
        let f = |x: &[f64]| self.eval_subset(idx, x);
        let mut best = mn;
        for u in &dirs {
            let point = |t: f64| -> Vec<f64> {
                minimizer.iter().zip(u).map(|(m, ui)| m + t * ui).collect()
            };
            let mut hi = 1.0;
            while f(&point(hi)) <= xi && hi < 1e12 {
                hi *= 2.0;
            }
            let mut lo = 0.0;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if f(&point(mid)) <= xi {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            best = best.max(norm(&point(lo)));
        }
        if d <= 3 {
            let per_axis = match d {
                1 => 2001,
                2 => 201,
                _ => 41,
            };
            let reach = best * 1.25 + 1.0;
            let mut idxs = vec![0usize; d];
            let mut x = vec![0.0; d];
            loop {
                for (xj, &k) in x.iter_mut().zip(&idxs) {
                    *xj = -reach + 2.0 * reach * k as f64 / (per_axis - 1) as f64;
                }
                if f(&x) <= xi {
                    best = best.max(norm(&x));
                }
                let mut j = 0;
                while j < d {
                    idxs[j] += 1;
                    if idxs[j] < per_axis {
                        break;
                    }
                    idxs[j] = 0;
                    j += 1;
                }
                if j == d {
                    break;
                }
            }
        }
        best
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum GapOracle {
    Component(usize),
    Quadratic { center: Vec<f64>, scale: f64 },
    OneSided,
    Numeric,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatchGeometry {
    pub minimizer: Vec<f64>,
    pub infimum: f64,
    /// True when the minimizer and radius come from numerical search.
    pub approximate: bool,
    pub oracle: GapOracle,
}

/// Nonzero vectors generating the cone `{v : ineq·v <= 0, eq·v = 0}`;
/// empty iff the cone is `{0}`.
///
/// Returns the lineality directions (both signs) followed by the extreme
/// rays of the pointed remainder.
pub fn cone_generators(ineq: &[Vec<f64>], eq: &[Vec<f64>], dim: usize) -> Result<Vec<Vec<f64>>> {
    const TOL: f64 = 1e-12;
    let lift = |basis: &[Vec<f64>], w: &[f64]| -> Vec<f64> {
        let mut v = vec![0.0; basis.first().map_or(0, |b| b.len())];
        for (b, wi) in basis.iter().zip(w) {
            axpy(*wi, b, &mut v);
        }
        v
    };
    let eq_space = crate::linalg::null_space(eq, dim, TOL);
    if eq_space.is_empty() {
        return Ok(vec![]);
    }
    let rows: Vec<Vec<f64>> = ineq
        .iter()
        .map(|g| {
            let n = norm(g);
            eq_space.iter().map(|q| dot(g, q) / n).collect::<Vec<f64>>()
        })
        .filter(|r: &Vec<f64>| norm(r) > TOL)
        .collect();
    let r = eq_space.len();
    let lineality = crate::linalg::null_space(&rows, r, TOL);
    let mut gens = Vec::new();
    for b in &lineality {
        let v = lift(&eq_space, b);
        gens.push(v.iter().map(|c| -c).collect());
        gens.push(v);
    }
    let pointed = crate::linalg::null_space(&lineality, r, TOL);
    let p = pointed.len();
    if p == 0 {
        return Ok(gens);
    }
    let prow: Vec<Vec<f64>> = rows
        .iter()
        .map(|row| pointed.iter().map(|q| dot(row, q)).collect::<Vec<f64>>())
        .filter(|row: &Vec<f64>| norm(row) > TOL)
        .collect();
    let m = prow.len();
    let k = p - 1;
    if binomial(m, k)? > 1_000_000 {
        return Err(Error::InsufficientMetadata(format!(
            "recession cone with {m} facets in dimension {p} is too large to enumerate"
        )));
    }
    let in_cone = |u: &[f64]| prow.iter().all(|row| dot(row, u) <= TOL);
    let mut subset: Vec<usize> = (0..k).collect();
    loop {
        let chosen: Vec<Vec<f64>> = subset.iter().map(|&i| prow[i].clone()).collect();
        let ns = crate::linalg::null_space(&chosen, p, 1e-10);
        if ns.len() == 1 {
            for sign in [1.0, -1.0] {
                let u: Vec<f64> = ns[0].iter().map(|c| sign * c).collect();
                if in_cone(&u) {
                    let v = lift(&eq_space, &lift(&pointed, &u));
                    gens.push(v);
                }
            }
        }
        // next k-subset of 0..m
        let mut i = k;
        loop {
            if i == 0 {
                return Ok(gens);
            }
            i -= 1;
            if subset[i] < m - k + i {
                subset[i] += 1;
                for j in i + 1..k {
                    subset[j] = subset[j - 1] + 1;
                }
                break;
            }
        }
        if k == 0 {
            return Ok(gens);
        }
    }
}

/// Serializable component description used by experiment configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ComponentSpec {
    Quadratic {
        center: Vec<f64>,
        scale: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lower_bound: Option<f64>,
    },
    Softplus {
        direction: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lower_bound: Option<f64>,
    },
    SqDist {
        set: SetSpec,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lower_bound: Option<f64>,
    },
    OneSidedQuadratic {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lower_bound: Option<f64>,
    },
}

impl ComponentSpec {
    pub fn build(&self) -> Result<ConvexComponent> {
        let (c, lower) = match self {
            ComponentSpec::Quadratic {
                center,
                scale,
                lower_bound,
            } => (
                ConvexComponent::quadratic(center.clone(), *scale)?,
                lower_bound,
            ),
            ComponentSpec::Softplus {
                direction,
                lower_bound,
            } => (ConvexComponent::softplus(direction.clone())?, lower_bound),
            ComponentSpec::SqDist { set, lower_bound } => (
                ConvexComponent::sq_dist(ConvexSet::from_spec(set)?),
                lower_bound,
            ),
            ComponentSpec::OneSidedQuadratic { lower_bound } => {
                (ConvexComponent::one_sided_quadratic(), lower_bound)
            }
        };
        match lower {
            Some(l) => c.with_lower_bound(*l),
            None => Ok(c),
        }
    }
}

/// Problem description: either a named library instance or explicit components.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub library: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub components: Vec<ComponentSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
}

impl ProblemSpec {
    pub fn build(&self) -> Result<FiniteSumProblem> {
        match (&self.library, self.components.is_empty()) {
            (Some(name), true) => {
                let p = library::instance(name)?;
                match self.batch_size {
                    Some(b) => FiniteSumProblem::new(p.components, b),
                    None => Ok(p),
                }
            }
            (None, false) => {
                let comps = self
                    .components
                    .iter()
                    .map(ComponentSpec::build)
                    .collect::<Result<Vec<_>>>()?;
                FiniteSumProblem::new(comps, self.batch_size.unwrap_or(1))
            }
            (Some(_), false) => Err(Error::config(
                "problem",
                "give either `library` or `components`, not both",
            )),
            (None, true) => Err(Error::config(
                "problem",
                "needs a `library` name or a `components` list",
            )),
        }
    }
}

/// Named desk-scale instances.
pub mod library {
    use super::*;

    pub const NAMES: &[&str] = &[
        "two-quadratics",
        "interpolation",
        "softplus-quadratic",
        "softplus-escape",
        "one-sided",
        "balls",
        "halfspaces",
        "orthant-slab",
        "mixed",
    ];

    pub fn instance(name: &str) -> Result<FiniteSumProblem> {
        let q = ConvexComponent::quadratic;
        match name {
            // f_1 = ½(x−1)², f_2 = ½(x+1)²
            "two-quadratics" => {
                FiniteSumProblem::new(vec![q(vec![1.0], 1.0)?, q(vec![-1.0], 1.0)?], 1)
            }
            // shared minimizer x* = (1, −0.5)
            "interpolation" => {
                FiniteSumProblem::new(vec![q(vec![1.0, -0.5], 1.0)?, q(vec![1.0, -0.5], 3.0)?], 1)
            }
            "softplus-quadratic" => FiniteSumProblem::new(
                vec![ConvexComponent::softplus(vec![1.0])?, q(vec![0.0], 1.0)?],
                1,
            ),
            // A slowly varying logistic tail: ‖x‖ escapes to the thousands within 10^6 steps.
            "softplus-escape" => {
                FiniteSumProblem::new(vec![ConvexComponent::softplus(vec![0.005])?], 1)
            }
            "one-sided" => FiniteSumProblem::new(
                vec![ConvexComponent::one_sided_quadratic(), q(vec![0.5], 2.0)?],
                1,
            ),
            "balls" => FiniteSumProblem::new(
                vec![
                    ConvexComponent::sq_dist(ConvexSet::ball(vec![2.0, 0.0], 1.0)?),
                    ConvexComponent::sq_dist(ConvexSet::ball(vec![-1.0, 1.5], 0.5)?),
                    ConvexComponent::sq_dist(ConvexSet::boxed(vec![-0.5, -2.0], vec![0.5, -1.0])?),
                ],
                1,
            ),
            "halfspaces" => FiniteSumProblem::new(
                vec![
                    ConvexComponent::sq_dist(ConvexSet::halfspace(vec![1.0, 0.0], 1.0)?),
                    ConvexComponent::sq_dist(ConvexSet::halfspace(vec![-1.0, 1.0], 0.0)?),
                    ConvexComponent::sq_dist(ConvexSet::hyperplane(vec![0.0, 1.0], -2.0)?),
                ],
                1,
            ),
            "orthant-slab" => FiniteSumProblem::new(
                vec![
                    ConvexComponent::sq_dist(ConvexSet::polyhedron(&[
                        (vec![1.0, 0.0], 0.0),
                        (vec![0.0, 1.0], 0.0),
                    ])?),
                    ConvexComponent::sq_dist(ConvexSet::polyhedron(&[
                        (vec![1.0, 1.0], 3.0),
                        (vec![-1.0, -1.0], -1.0),
                    ])?),
                ],
                1,
            ),
            "mixed" => FiniteSumProblem::new(
                vec![
                    q(vec![1.0, 1.0], 1.0)?,
                    ConvexComponent::softplus(vec![1.0, -2.0])?,
                    ConvexComponent::sq_dist(ConvexSet::ball(vec![0.0, -1.0], 0.5)?),
                ],
                2,
            ),
            other => Err(Error::config(
                "problem.library",
                format!("unknown instance `{other}`; known: {}", NAMES.join(", ")),
            )),
        }
    }
}
