//! Stochastic average gradient.
//!
//! A [`GradientTable`] keeps the most recent gradient `y_i` of every
//! component together with their running sum `d`. Each step refreshes the
//! slots of the sampled indices and moves along the table average:
//!
//! ```text
//! d ← d − y_i + ∇f_i(x);  y_i ← ∇f_i(x);  x ← x − (α/n) d
//! ```
//!
//! Variants change what goes into a slot (momentum velocities, Adam-scaled
//! gradients, one scalar per example for linear models) or how `d` is
//! normalized (by the number of components seen so far, with the ℓ2 term
//! applied exactly outside the table).

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg;
use crate::optimizers::HyperParams;
use crate::problems::FiniteSum;
use crate::schedule::schedule_lr;

/// Default number of table updates between exact recomputations of `d`.
pub const DEFAULT_RECOMPUTE_EVERY: u64 = 10_000;

/// Initial content of the gradient slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum InitMode {
    /// `y_i = 0`; nothing counts as seen yet.
    #[default]
    Zeros,
    /// `y_i = ∇f_i(x⁰) − ∇g(x⁰)`, so `d = 0` and every index counts as seen.
    Centered,
}

/// Result of a step that completed without error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepStatus {
    Ok,
    /// Exact regularization with `αλ ≥ 1`: the shrink factor `1 − αλ` is
    /// not positive.
    NonPositiveContraction,
}

/// Stored per-component slots and their running sum.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientTable {
    n: usize,
    dim: usize,
    /// `dim` for dense tables, 1 for scalar (just-in-time) tables.
    width: usize,
    slots: Vec<f64>,
    sum: Vec<f64>,
    seen: Vec<bool>,
    m_seen: usize,
    init: InitMode,
    updates: u64,
    recompute_every: u64,
}

impl GradientTable {
    /// Dense table with every slot at zero.
    pub fn zeros(n: usize, dim: usize) -> Result<Self> {
        Self::with_width(n, dim, dim)
    }

    /// Scalar table for linearly parameterized components: slot `i` holds
    /// `h_i'(a_iᵀx)` and `d` has dimension `dim`.
    pub fn scalar(n: usize, dim: usize) -> Result<Self> {
        Self::with_width(n, dim, 1)
    }

    fn with_width(n: usize, dim: usize, width: usize) -> Result<Self> {
        if n == 0 || dim == 0 {
            return Err(Error::Config("gradient table needs n >= 1 and p >= 1".into()));
        }
        Ok(Self {
            n,
            dim,
            width,
            slots: vec![0.0; n * width],
            sum: vec![0.0; dim],
            seen: vec![false; n],
            m_seen: 0,
            init: InitMode::Zeros,
            updates: 0,
            recompute_every: DEFAULT_RECOMPUTE_EVERY,
        })
    }

    pub fn components(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of stored reals per component.
    pub fn slot_width(&self) -> usize {
        self.width
    }

    pub fn is_scalar(&self) -> bool {
        self.width == 1 && self.dim != 1
    }

    pub fn init_mode(&self) -> InitMode {
        self.init
    }

    pub fn slot(&self, i: usize) -> &[f64] {
        &self.slots[i * self.width..(i + 1) * self.width]
    }

    pub fn slots(&self) -> &[f64] {
        &self.slots
    }

    /// The running sum `d`.
    pub fn sum(&self) -> &[f64] {
        &self.sum
    }

    /// Number of distinct components refreshed at least once (all of them
    /// for a centered table).
    pub fn seen(&self) -> usize {
        self.m_seen
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn set_recompute_every(&mut self, every: u64) {
        self.recompute_every = every.max(1);
    }

    /// `Σ y_i` summed from scratch in index order (dense tables).
    pub fn exact_sum(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.dim];
        if self.is_scalar() {
            return s;
        }
        for slot in self.slots.chunks_exact(self.width) {
            linalg::axpy(1.0, slot, &mut s);
        }
        s
    }

    /// `‖d − Σ y_i‖` for a dense table.
    pub fn drift(&self) -> f64 {
        linalg::distance(&self.sum, &self.exact_sum())
    }

    fn recompute(&mut self) {
        let mut s = vec![0.0; self.dim];
        for slot in self.slots.chunks_exact(self.width) {
            for (sj, yj) in s.iter_mut().zip(slot) {
                *sj += *yj;
            }
        }
        self.sum = s;
    }

    fn mark_seen(&mut self, i: usize) {
        if !self.seen[i] {
            self.seen[i] = true;
            self.m_seen += 1;
        }
    }

    /// `d ← d − y_i + new; y_i ← new` for a dense slot.
    fn replace(&mut self, i: usize, new: &[f64]) {
        let w = self.width;
        let slot = &mut self.slots[i * w..(i + 1) * w];
        for ((dj, yj), gj) in self.sum.iter_mut().zip(slot.iter_mut()).zip(new) {
            *dj = *dj - *yj + *gj;
            *yj = *gj;
        }
        self.mark_seen(i);
    }

    fn after_step(&mut self) {
        self.updates += 1;
        if self.updates.is_multiple_of(self.recompute_every) && !self.is_scalar() {
            self.recompute();
        }
    }

    fn check_batch(&self, batch: &[usize]) -> Result<()> {
        if batch.is_empty() {
            return Err(Error::Config("empty batch".into()));
        }
        for &i in batch {
            if i >= self.n {
                return Err(Error::IndexOutOfRange { index: i, n: self.n });
            }
        }
        if batch.len() > 1 {
            let mut sorted = batch.to_vec();
            sorted.sort_unstable();
            if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
                return Err(Error::DuplicateIndex(w[0]));
            }
        }
        Ok(())
    }
}

/// Builds a dense table for `problem` at `x0`.
pub fn init_table<P: FiniteSum + ?Sized>(problem: &P, x0: &[f64], mode: InitMode) -> Result<GradientTable> {
    linalg::check_dim(problem.dim(), x0.len())?;
    let mut table = GradientTable::zeros(problem.components(), problem.dim())?;
    if mode == InitMode::Centered {
        let p = problem.dim();
        let mut full = vec![0.0; p];
        problem.full_gradient_into(x0, &mut full);
        for i in 0..problem.components() {
            let slot = &mut table.slots[i * p..(i + 1) * p];
            problem.component_gradient_into(i, x0, slot);
            linalg::axpy(-1.0, &full, slot);
            table.seen[i] = true;
        }
        table.m_seen = table.n;
        table.init = InitMode::Centered;
    }
    Ok(table)
}

/// How `d` moves the iterate.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Move {
    /// `x ← x − (α/n) d`
    Mean,
    /// `x ← x − (α/m) d`, no-op while `m = 0`
    SeenMean,
    /// `x ← (1 − αλ) x − (α/m) d`
    Shrink(f64),
    /// `x ← x + d/n`; slots already carry the step size.
    Velocity,
}

fn apply_move(table: &GradientTable, x: &mut [f64], alpha: f64, mv: Move) -> StepStatus {
    let n = table.n as f64;
    let m = table.m_seen as f64;
    match mv {
        Move::Mean => linalg::axpy(-alpha / n, &table.sum, x),
        Move::SeenMean => {
            if table.m_seen > 0 {
                linalg::axpy(-alpha / m, &table.sum, x);
            }
        }
        Move::Shrink(lambda) => {
            linalg::scale(1.0 - alpha * lambda, x);
            if table.m_seen > 0 {
                linalg::axpy(-alpha / m, &table.sum, x);
            }
            if alpha * lambda >= 1.0 {
                return StepStatus::NonPositiveContraction;
            }
        }
        Move::Velocity => linalg::axpy(1.0 / n, &table.sum, x),
    }
    StepStatus::Ok
}

fn check_dense<P: FiniteSum + ?Sized>(table: &GradientTable, problem: &P, x: &[f64]) -> Result<()> {
    if table.is_scalar() {
        return Err(Error::Config("scalar table used with a dense SAG step".into()));
    }
    linalg::check_dim(table.n, problem.components())?;
    linalg::check_dim(table.dim, problem.dim())?;
    linalg::check_dim(table.dim, x.len())
}

fn finish(table: &mut GradientTable, x: &[f64]) -> Result<()> {
    table.after_step();
    if linalg::all_finite(x) && linalg::all_finite(&table.sum) {
        Ok(())
    } else {
        Err(Error::Diverged { iteration: table.updates })
    }
}

fn gradient_step<P: FiniteSum + ?Sized>(
    table: &mut GradientTable,
    problem: &P,
    x: &mut [f64],
    batch: &[usize],
    alpha: f64,
    mv: Move,
) -> Result<StepStatus> {
    check_dense(table, problem, x)?;
    table.check_batch(batch)?;
    let mut g = vec![0.0; table.dim];
    for &i in batch {
        problem.component_gradient_into(i, x, &mut g);
        table.replace(i, &g);
    }
    let status = apply_move(table, x, alpha, mv);
    finish(table, x)?;
    Ok(status)
}

/// One basic SAG step on component `i`.
pub fn sag_step<P: FiniteSum + ?Sized>(
    table: &mut GradientTable,
    problem: &P,
    x: &mut [f64],
    i: usize,
    alpha: f64,
) -> Result<()> {
    gradient_step(table, problem, x, &[i], alpha, Move::Mean).map(|_| ())
}

/// Refreshes every slot in `batch` at the same `x`, then takes one step
/// along `d/n`.
pub fn sag_minibatch_step<P: FiniteSum + ?Sized>(
    table: &mut GradientTable,
    problem: &P,
    x: &mut [f64],
    batch: &[usize],
    alpha: f64,
) -> Result<()> {
    gradient_step(table, problem, x, batch, alpha, Move::Mean).map(|_| ())
}

/// SAG step normalized by the number of components seen so far.
pub fn sag_reweighted_step<P: FiniteSum + ?Sized>(
    table: &mut GradientTable,
    problem: &P,
    x: &mut [f64],
    i: usize,
    alpha: f64,
) -> Result<()> {
    gradient_step(table, problem, x, &[i], alpha, Move::SeenMean).map(|_| ())
}

/// Re-weighted SAG on an unregularized problem with the `(λ/2)‖x‖²` term
/// applied exactly: `x ← (1 − αλ)x − (α/m) d`.
pub fn sag_regularized_step<P: FiniteSum + ?Sized>(
    table: &mut GradientTable,
    problem: &P,
    x: &mut [f64],
    i: usize,
    alpha: f64,
    lambda: f64,
) -> Result<StepStatus> {
    if !(lambda >= 0.0) {
        return Err(Error::Config("lambda must be non-negative".into()));
    }
    gradient_step(table, problem, x, &[i], alpha, Move::Shrink(lambda))
}

/// SAG + momentum: slot `i` holds a per-component velocity
/// `v_i ← β₁v_i − α∇f_i(x)` and the iterate moves by `x ← x + d/n`.
pub fn sag_sgd_step<P: FiniteSum + ?Sized>(
    table: &mut GradientTable,
    problem: &P,
    x: &mut [f64],
    i: usize,
    alpha: f64,
    beta1: f64,
) -> Result<()> {
    sag_sgd_batch(table, problem, x, &[i], alpha, beta1)
}

fn sag_sgd_batch<P: FiniteSum + ?Sized>(
    table: &mut GradientTable,
    problem: &P,
    x: &mut [f64],
    batch: &[usize],
    alpha: f64,
    beta1: f64,
) -> Result<()> {
    check_dense(table, problem, x)?;
    table.check_batch(batch)?;
    let p = table.dim;
    let mut g = vec![0.0; p];
    let mut v = vec![0.0; p];
    for &i in batch {
        problem.component_gradient_into(i, x, &mut g);
        for ((vj, yj), gj) in v.iter_mut().zip(table.slot(i)).zip(&g) {
            *vj = beta1 * yj - alpha * gj;
        }
        table.replace(i, &v);
    }
    apply_move(table, x, alpha, Move::Velocity);
    finish(table, x)
}

/// Per-component Adam moments for the SAG + Adam hybrid.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSlots {
    dim: usize,
    first: Vec<f64>,
    second: Vec<f64>,
}

impl MomentSlots {
    pub fn zeros(n: usize, dim: usize) -> Self {
        Self { dim, first: vec![0.0; n * dim], second: vec![0.0; n * dim] }
    }

    pub fn first(&self, i: usize) -> &[f64] {
        &self.first[i * self.dim..(i + 1) * self.dim]
    }

    pub fn second(&self, i: usize) -> &[f64] {
        &self.second[i * self.dim..(i + 1) * self.dim]
    }
}

/// SAG + Adam: `m_i ← β₁m_i + (1−β₁)∇f_i(x)`,
/// `r_i ← β₂r_i + (1−β₂)∇f_i(x)⊙∇f_i(x)`, slot `y_i ← m_i/(√r_i + ε)`, then
/// `x ← x − (α/n) d`. Moments of unsampled components are left alone.
#[allow(clippy::too_many_arguments)]
pub fn sag_adam_step<P: FiniteSum + ?Sized>(
    table: &mut GradientTable,
    moments: &mut MomentSlots,
    problem: &P,
    x: &mut [f64],
    i: usize,
    alpha: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
) -> Result<()> {
    sag_adam_batch(table, moments, problem, x, &[i], alpha, (beta1, beta2, epsilon))
}

fn sag_adam_batch<P: FiniteSum + ?Sized>(
    table: &mut GradientTable,
    moments: &mut MomentSlots,
    problem: &P,
    x: &mut [f64],
    batch: &[usize],
    alpha: f64,
    (beta1, beta2, epsilon): (f64, f64, f64),
) -> Result<()> {
    check_dense(table, problem, x)?;
    table.check_batch(batch)?;
    linalg::check_dim(table.n * table.dim, moments.first.len())?;
    let p = table.dim;
    let mut g = vec![0.0; p];
    let mut y = vec![0.0; p];
    for &i in batch {
        problem.component_gradient_into(i, x, &mut g);
        let m = &mut moments.first[i * p..(i + 1) * p];
        let r = &mut moments.second[i * p..(i + 1) * p];
        for j in 0..p {
            m[j] = beta1 * m[j] + (1.0 - beta1) * g[j];
            r[j] = beta2 * r[j] + (1.0 - beta2) * g[j] * g[j];
            y[j] = m[j] / (libm::sqrt(r[j]) + epsilon);
        }
        table.replace(i, &y);
    }
    apply_move(table, x, alpha, Move::Mean);
    finish(table, x)
}

/// Components of the form `f_i(x) = h_i(a_iᵀx)`, whose gradient is the
/// scalar `h_i'(a_iᵀx)` times the fixed vector `a_i`.
///
/// Implementors must compute their dense gradient as exactly
/// `h_i'(linalg::dot(a_i, x)) * a_i[j]` so that scalar and dense tables
/// stay bit-identical.
pub trait LinearModel {
    fn components(&self) -> usize;
    fn dim(&self) -> usize;
    fn features(&self, i: usize) -> &[f64];
    /// `h_i'(z)`.
    fn scalar_derivative(&self, i: usize, z: f64) -> f64;
}

/// SAG step on a scalar table: slot `i` stores `h_i'(a_iᵀx)` and `d` is
/// updated with `a_i` scaled by the old and new scalars. With the same index
/// sequence the iterates are bit-identical to dense [`sag_step`].
pub fn sag_jit_step<M: LinearModel + ?Sized>(
    model: &M,
    table: &mut GradientTable,
    x: &mut [f64],
    i: usize,
    alpha: f64,
) -> Result<()> {
    jit_batch(model, table, x, &[i], alpha, Move::Mean).map(|_| ())
}

fn jit_batch<M: LinearModel + ?Sized>(
    model: &M,
    table: &mut GradientTable,
    x: &mut [f64],
    batch: &[usize],
    alpha: f64,
    mv: Move,
) -> Result<StepStatus> {
    if table.width != 1 {
        return Err(Error::Config("just-in-time step needs a scalar table".into()));
    }
    linalg::check_dim(table.n, model.components())?;
    linalg::check_dim(table.dim, model.dim())?;
    linalg::check_dim(table.dim, x.len())?;
    table.check_batch(batch)?;
    for &i in batch {
        let a = model.features(i);
        let s = model.scalar_derivative(i, linalg::dot(a, x));
        let old = table.slots[i];
        for (dj, aj) in table.sum.iter_mut().zip(a) {
            *dj = *dj - old * aj + s * aj;
        }
        table.slots[i] = s;
        table.mark_seen(i);
    }
    let status = apply_move(table, x, alpha, mv);
    table.updates += 1;
    if table.updates.is_multiple_of(table.recompute_every) {
        let mut s = vec![0.0; table.dim];
        for k in 0..table.n {
            let sk = table.slots[k];
            for (sj, aj) in s.iter_mut().zip(model.features(k)) {
                *sj += sk * aj;
            }
        }
        table.sum = s;
    }
    if linalg::all_finite(x) && linalg::all_finite(&table.sum) {
        Ok(status)
    } else {
        Err(Error::Diverged { iteration: table.updates })
    }
}

/// `‖d − Σ s_i a_i‖` for a scalar table.
pub fn jit_drift<M: LinearModel + ?Sized>(model: &M, table: &GradientTable) -> f64 {
    let mut s = vec![0.0; table.dim];
    for k in 0..table.n {
        linalg::axpy(table.slots[k], model.features(k), &mut s);
    }
    linalg::distance(&s, &table.sum)
}

/// Which SAG update a [`SagOptimizer`] runs.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum SagVariant {
    /// Normalize by `n`.
    Basic,
    /// Normalize by the number of components seen.
    Reweighted,
    /// Re-weighted, with `(λ/2)‖x‖²` applied outside the table.
    ExactRegularized { lambda: f64 },
    /// SAG + momentum (`sag_sgd`), using `beta1`.
    Momentum,
    /// SAG + Adam (`sag_adam`), using `beta1`, `beta2` and `epsilon`.
    Adam,
}

impl SagVariant {
    fn movement(self) -> Move {
        match self {
            SagVariant::Basic | SagVariant::Adam => Move::Mean,
            SagVariant::Reweighted => Move::SeenMean,
            SagVariant::ExactRegularized { lambda } => Move::Shrink(lambda),
            SagVariant::Momentum => Move::Velocity,
        }
    }
}

/// A SAG-family method bundled with its iterate, table and step-size
/// schedule.
#[derive(Debug, Clone)]
pub struct SagOptimizer {
    variant: SagVariant,
    hyper: HyperParams,
    table: GradientTable,
    moments: Option<MomentSlots>,
    x: Vec<f64>,
    k: u64,
}

impl SagOptimizer {
    /// Dense optimizer for `problem` starting at `x0`.
    pub fn new<P: FiniteSum + ?Sized>(
        variant: SagVariant,
        hyper: HyperParams,
        init: InitMode,
        problem: &P,
        x0: Vec<f64>,
    ) -> Result<Self> {
        hyper.validate()?;
        if init == InitMode::Centered && matches!(variant, SagVariant::Momentum | SagVariant::Adam) {
            return Err(Error::Config("SAG hybrids start from zero slots".into()));
        }
        let table = init_table(problem, &x0, init)?;
        let moments = (variant == SagVariant::Adam).then(|| MomentSlots::zeros(problem.components(), problem.dim()));
        Ok(Self { variant, hyper, table, moments, x: x0, k: 0 })
    }

    /// Scalar-table optimizer for a linear model. Only the plain,
    /// re-weighted and exactly regularized variants apply.
    pub fn new_jit<M: LinearModel + ?Sized>(
        variant: SagVariant,
        hyper: HyperParams,
        model: &M,
        x0: Vec<f64>,
    ) -> Result<Self> {
        hyper.validate()?;
        if matches!(variant, SagVariant::Momentum | SagVariant::Adam) {
            return Err(Error::Config("just-in-time updates support only plain SAG variants".into()));
        }
        linalg::check_dim(model.dim(), x0.len())?;
        let table = GradientTable::scalar(model.components(), model.dim())?;
        Ok(Self { variant, hyper, table, moments: None, x: x0, k: 0 })
    }

    pub fn variant(&self) -> SagVariant {
        self.variant
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn table(&self) -> &GradientTable {
        &self.table
    }

    pub fn table_mut(&mut self) -> &mut GradientTable {
        &mut self.table
    }

    pub fn moments(&self) -> Option<&MomentSlots> {
        self.moments.as_ref()
    }

    pub fn iteration(&self) -> u64 {
        self.k
    }

    pub fn current_lr(&self) -> f64 {
        schedule_lr(&self.hyper.schedule, self.hyper.alpha, self.k)
    }

    /// One step on the sampled `batch` of component indices.
    pub fn step<P: FiniteSum + ?Sized>(&mut self, problem: &P, batch: &[usize]) -> Result<StepStatus> {
        let alpha = self.current_lr();
        let h = self.hyper;
        let status = match self.variant {
            SagVariant::Momentum => {
                sag_sgd_batch(&mut self.table, problem, &mut self.x, batch, alpha, h.beta1).map(|_| StepStatus::Ok)
            }
            SagVariant::Adam => {
                let moments = self.moments.as_mut().ok_or_else(|| Error::Config("missing moment slots".into()))?;
                sag_adam_batch(&mut self.table, moments, problem, &mut self.x, batch, alpha, (h.beta1, h.beta2, h.epsilon))
                    .map(|_| StepStatus::Ok)
            }
            v => gradient_step(&mut self.table, problem, &mut self.x, batch, alpha, v.movement()),
        }?;
        self.k += 1;
        Ok(status)
    }

    /// One step on a scalar table.
    pub fn step_jit<M: LinearModel + ?Sized>(&mut self, model: &M, batch: &[usize]) -> Result<StepStatus> {
        let alpha = self.current_lr();
        let status = jit_batch(model, &mut self.table, &mut self.x, batch, alpha, self.variant.movement())?;
        self.k += 1;
        Ok(status)
    }
}

const SNAPSHOT_MAGIC: &[u8; 4] = b"SAGT";
const SNAPSHOT_VERSION: u16 = 1;

impl GradientTable {
    /// Serializes the table into a versioned little-endian blob:
    ///
    /// ```text
    /// "SAGT" | version: u16 | init: u8 (0 zeros, 1 centered) | 0u8
    /// n: u64 | dim: u64 | width: u64 | seen count: u64 | updates: u64
    /// recompute_every: u64 | seen bitmap: ceil(n/8) bytes, LSB first
    /// slots: n*width f64 | sum: dim f64
    /// ```
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(60 + self.n / 8 + 8 * (self.slots.len() + self.dim));
        out.extend_from_slice(SNAPSHOT_MAGIC);
        out.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
        out.push(match self.init {
            InitMode::Zeros => 0,
            InitMode::Centered => 1,
        });
        out.push(0);
        for v in [self.n, self.dim, self.width, self.m_seen] {
            out.extend_from_slice(&(v as u64).to_le_bytes());
        }
        out.extend_from_slice(&self.updates.to_le_bytes());
        out.extend_from_slice(&self.recompute_every.to_le_bytes());
        let mut bits = vec![0u8; self.n.div_ceil(8)];
        for (i, &s) in self.seen.iter().enumerate() {
            if s {
                bits[i / 8] |= 1 << (i % 8);
            }
        }
        out.extend_from_slice(&bits);
        for v in self.slots.iter().chain(&self.sum) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != SNAPSHOT_MAGIC {
            return Err(Error::Snapshot("bad magic".into()));
        }
        let version = u16::from_le_bytes(r.take(2)?.try_into().unwrap());
        if version != SNAPSHOT_VERSION {
            return Err(Error::Snapshot(alloc::format!("unsupported version {version}")));
        }
        let init = match r.take(2)?[0] {
            0 => InitMode::Zeros,
            1 => InitMode::Centered,
            other => return Err(Error::Snapshot(alloc::format!("unknown init mode {other}"))),
        };
        let n = r.u64()? as usize;
        let dim = r.u64()? as usize;
        let width = r.u64()? as usize;
        let m_seen = r.u64()? as usize;
        let updates = r.u64()?;
        let recompute_every = r.u64()?;
        if n == 0 || dim == 0 || !(width == dim || width == 1) || recompute_every == 0 {
            return Err(Error::Snapshot("inconsistent header".into()));
        }
        let bits = r.take(n.div_ceil(8))?;
        let seen: Vec<bool> = (0..n).map(|i| bits[i / 8] & (1 << (i % 8)) != 0).collect();
        if seen.iter().filter(|&&s| s).count() != m_seen {
            return Err(Error::Snapshot("seen count does not match bitmap".into()));
        }
        let slots = r.f64s(n.checked_mul(width).ok_or_else(|| Error::Snapshot("size overflow".into()))?)?;
        let sum = r.f64s(dim)?;
        if r.pos != bytes.len() {
            return Err(Error::Snapshot("trailing bytes".into()));
        }
        Ok(Self { n, dim, width, slots, sum, seen, m_seen, init, updates, recompute_every })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(len).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Snapshot("truncated".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, count: usize) -> Result<Vec<f64>> {
        let raw = self.take(count.checked_mul(8).ok_or_else(|| Error::Snapshot("size overflow".into()))?)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }
}
