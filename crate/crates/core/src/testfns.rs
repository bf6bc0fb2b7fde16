//! Rosenbrock and Rastrigin benchmark surfaces, their log-scaled ravine
//! versions, and a wrapper that turns any of them into a finite sum.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg;
use crate::problems::FiniteSum;

/// Default offset inside `log(f(x) + δ)`.
pub const DEFAULT_LOG_DELTA: f64 = 1e-8;

/// Default Rastrigin amplitude.
pub const DEFAULT_RASTRIGIN_A: f64 = 10.0;

/// A deterministic smooth function with an analytic gradient.
pub trait Objective {
    fn dim(&self) -> usize;

    /// Returns `f(x)` and writes `∇f(x)` into `grad`. Dimensions are not
    /// checked.
    fn eval_grad_into(&self, x: &[f64], grad: &mut [f64]) -> f64;

    fn value(&self, x: &[f64]) -> f64 {
        let mut g = vec![0.0; self.dim()];
        self.eval_grad_into(x, &mut g)
    }

    fn eval_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        linalg::check_dim(self.dim(), x.len())?;
        let mut g = vec![0.0; self.dim()];
        let v = self.eval_grad_into(x, &mut g);
        Ok((v, g))
    }

    /// Points verified to be global minimizers.
    fn known_minimizers(&self) -> Vec<Vec<f64>>;

    fn minimum_value(&self) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Variant {
    /// Independent `(x_{2i-1}, x_{2i})` pairs; even dimension only.
    RosenbrockVanilla,
    /// Overlapping consecutive pairs.
    RosenbrockChained,
    Rastrigin,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestFunction {
    variant: Variant,
    dim: usize,
    a: f64,
}

impl TestFunction {
    pub fn new(variant: Variant, dim: usize, a: f64) -> Result<Self> {
        match variant {
            Variant::RosenbrockVanilla if dim < 2 || !dim.is_multiple_of(2) => Err(Error::Config(
                alloc::format!("vanilla Rosenbrock needs an even dimension >= 2, got {dim}"),
            )),
            Variant::RosenbrockChained if dim < 2 => Err(Error::Config(alloc::format!(
                "chained Rosenbrock needs dimension >= 2, got {dim}"
            ))),
            Variant::Rastrigin if dim < 1 => Err(Error::Config("Rastrigin needs dimension >= 1".into())),
            _ => Ok(Self { variant, dim, a }),
        }
    }

    pub fn rosenbrock(dim: usize) -> Result<Self> {
        Self::new(Variant::RosenbrockVanilla, dim, 0.0)
    }

    pub fn rosenbrock_chained(dim: usize) -> Result<Self> {
        Self::new(Variant::RosenbrockChained, dim, 0.0)
    }

    pub fn rastrigin(dim: usize, a: f64) -> Result<Self> {
        Self::new(Variant::Rastrigin, dim, a)
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn name(&self) -> &'static str {
        match self.variant {
            Variant::RosenbrockVanilla => "rosenbrock",
            Variant::RosenbrockChained => "rosenbrock_chained",
            Variant::Rastrigin => "rastrigin",
        }
    }
}

impl Objective for TestFunction {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval_grad_into(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        match self.variant {
            Variant::RosenbrockVanilla => vanilla_rosenbrock(x, grad),
            Variant::RosenbrockChained => chained_rosenbrock(x, grad),
            Variant::Rastrigin => rastrigin(x, self.a, grad),
        }
    }

    fn known_minimizers(&self) -> Vec<Vec<f64>> {
        match self.variant {
            // (-1, 1, ..., 1) is sometimes listed for the vanilla form but its
            // gradient there is (-4, 0, ...), so it is not included.
            Variant::RosenbrockVanilla | Variant::RosenbrockChained => vec![vec![1.0; self.dim]],
            Variant::Rastrigin => vec![vec![0.0; self.dim]],
        }
    }

    fn minimum_value(&self) -> f64 {
        0.0
    }
}

fn vanilla_rosenbrock(x: &[f64], grad: &mut [f64]) -> f64 {
    let mut value = 0.0;
    for (xs, gs) in x.chunks_exact(2).zip(grad.chunks_exact_mut(2)) {
        let t = xs[1] - xs[0] * xs[0];
        let u = xs[0] - 1.0;
        value += 100.0 * t * t + u * u;
        gs[0] = -400.0 * xs[0] * t + 2.0 * u;
        gs[1] = 200.0 * t;
    }
    value
}

fn chained_rosenbrock(x: &[f64], grad: &mut [f64]) -> f64 {
    grad.iter_mut().for_each(|g| *g = 0.0);
    let mut value = 0.0;
    for i in 0..x.len() - 1 {
        let t = x[i + 1] - x[i] * x[i];
        let u = x[i] - 1.0;
        value += 100.0 * t * t + u * u;
        grad[i] += -400.0 * x[i] * t + 2.0 * u;
        grad[i + 1] += 200.0 * t;
    }
    value
}

fn rastrigin(x: &[f64], a: f64, grad: &mut [f64]) -> f64 {
    let mut value = a * x.len() as f64;
    for (xi, gi) in x.iter().zip(grad.iter_mut()) {
        let w = 2.0 * PI * xi;
        value += xi * xi - a * libm::cos(w);
        *gi = 2.0 * xi + 2.0 * PI * a * libm::sin(w);
    }
    value
}

/// Rosenbrock value and gradient for either variant.
pub fn rosenbrock_eval_grad(x: &[f64], variant: Variant) -> Result<(f64, Vec<f64>)> {
    if variant == Variant::Rastrigin {
        return Err(Error::Config("not a Rosenbrock variant".into()));
    }
    TestFunction::new(variant, x.len(), 0.0)?.eval_grad(x)
}

pub fn rastrigin_eval_grad(x: &[f64], a: f64) -> Result<(f64, Vec<f64>)> {
    TestFunction::rastrigin(x.len(), a)?.eval_grad(x)
}

/// `h(x) = log(f(x) + δ)`, a monotone transform that keeps the minimizers
/// of `f` and turns its basin into a sharp ravine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogScale<F> {
    inner: F,
    delta: f64,
}

impl<F: Objective> LogScale<F> {
    pub fn new(inner: F, delta: f64) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(Error::Config("log-scale delta must be positive".into()));
        }
        Ok(Self { inner, delta })
    }

    pub fn inner(&self) -> &F {
        &self.inner
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

impl<F: Objective> Objective for LogScale<F> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn eval_grad_into(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let shifted = self.inner.eval_grad_into(x, grad) + self.delta;
        linalg::scale(1.0 / shifted, grad);
        libm::log(shifted)
    }

    fn known_minimizers(&self) -> Vec<Vec<f64>> {
        self.inner.known_minimizers()
    }

    fn minimum_value(&self) -> f64 {
        libm::log(self.inner.minimum_value() + self.delta)
    }
}

/// Either a plain or a log-scaled test function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Surface {
    Plain(TestFunction),
    Log(LogScale<TestFunction>),
}

impl Objective for Surface {
    fn dim(&self) -> usize {
        match self {
            Surface::Plain(f) => f.dim(),
            Surface::Log(f) => f.dim(),
        }
    }
    fn eval_grad_into(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        match self {
            Surface::Plain(f) => f.eval_grad_into(x, grad),
            Surface::Log(f) => f.eval_grad_into(x, grad),
        }
    }
    fn known_minimizers(&self) -> Vec<Vec<f64>> {
        match self {
            Surface::Plain(f) => f.known_minimizers(),
            Surface::Log(f) => f.known_minimizers(),
        }
    }
    fn minimum_value(&self) -> f64 {
        match self {
            Surface::Plain(f) => f.minimum_value(),
            Surface::Log(f) => f.minimum_value(),
        }
    }
}

/// `n` copies of a deterministic function, component `i` perturbed by a
/// linear term `c_iᵀx` with `Σ c_i = 0`, so the average is the function
/// itself.
#[derive(Debug, Clone)]
pub struct FunctionSum<F> {
    function: F,
    copies: usize,
    /// Row-major `copies x dim`; empty when there is no perturbation.
    offsets: Vec<f64>,
    minimizer: Vec<f64>,
}

impl<F: Objective> FunctionSum<F> {
    pub fn function(&self) -> &F {
        &self.function
    }

    /// Linear perturbation of component `i`, or `None` for identical copies.
    pub fn offset(&self, i: usize) -> Option<&[f64]> {
        if self.offsets.is_empty() {
            None
        } else {
            let p = self.function.dim();
            Some(&self.offsets[i * p..(i + 1) * p])
        }
    }
}

/// Replicates `function` into a finite sum of `copies` components.
///
/// With `noise_seed == 0` or `noise_scale == 0` every component equals the
/// function. Otherwise the offsets come in `(r, −r)` pairs (plus a zero
/// offset when `copies` is odd), so their running sum returns to exactly
/// zero after every pair.
pub fn as_finite_sum<F: Objective>(
    function: F,
    copies: usize,
    noise_seed: u64,
    noise_scale: f64,
) -> Result<FunctionSum<F>> {
    if copies == 0 {
        return Err(Error::Config("need at least one copy".into()));
    }
    let p = function.dim();
    let mut offsets = Vec::new();
    if noise_seed != 0 && noise_scale != 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
        offsets = vec![0.0; copies * p];
        for pair in 0..copies / 2 {
            for j in 0..p {
                let r: f64 = StandardNormal.sample(&mut rng);
                offsets[2 * pair * p + j] = noise_scale * r;
                offsets[(2 * pair + 1) * p + j] = -noise_scale * r;
            }
        }
    }
    let minimizer = function.known_minimizers().into_iter().next().unwrap_or_default();
    Ok(FunctionSum { function, copies, offsets, minimizer })
}

impl<F: Objective> FiniteSum for FunctionSum<F> {
    fn components(&self) -> usize {
        self.copies
    }
    fn dim(&self) -> usize {
        self.function.dim()
    }
    fn component_value(&self, i: usize, x: &[f64]) -> f64 {
        let v = self.function.value(x);
        match self.offset(i) {
            Some(c) => v + linalg::dot(c, x),
            None => v,
        }
    }
    fn component_gradient_into(&self, i: usize, x: &[f64], out: &mut [f64]) {
        self.function.eval_grad_into(x, out);
        if let Some(c) = self.offset(i) {
            linalg::axpy(1.0, c, out);
        }
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.function.value(x)
    }
    /// The offsets cancel, so this is the function's own gradient.
    fn full_gradient_into(&self, x: &[f64], out: &mut [f64]) {
        self.function.eval_grad_into(x, out);
    }
    fn minimizer(&self) -> Option<&[f64]> {
        if self.minimizer.is_empty() {
            None
        } else {
            Some(&self.minimizer)
        }
    }
    fn optimal_value(&self) -> Option<f64> {
        Some(self.function.minimum_value())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock_at_ones_is_zero() {
        for v in [Variant::RosenbrockVanilla, Variant::RosenbrockChained] {
            let (f, g) = rosenbrock_eval_grad(&[1.0, 1.0], v).unwrap();
            assert_eq!(f, 0.0);
            assert_eq!(g, vec![0.0, 0.0]);
        }
    }

    #[test]
    fn chained_rosenbrock_at_origin() {
        let (f, g) = rosenbrock_eval_grad(&[0.0, 0.0], Variant::RosenbrockChained).unwrap();
        assert_eq!(f, 1.0);
        assert_eq!(g, vec![-2.0, 0.0]);
    }

    #[test]
    fn vanilla_point_minus_one_one_is_not_stationary() {
        let (f, g) = rosenbrock_eval_grad(&[-1.0, 1.0], Variant::RosenbrockVanilla).unwrap();
        assert_eq!(f, 4.0);
        assert_eq!(g, vec![-4.0, 0.0]);
        let (_, g) = rosenbrock_eval_grad(&[-1.0, 1.0, 1.0, 1.0], Variant::RosenbrockVanilla).unwrap();
        assert!(linalg::norm(&g) > 1.0);
    }

    #[test]
    fn odd_dimension_vanilla_is_rejected() {
        assert!(matches!(
            rosenbrock_eval_grad(&[0.0, 0.0, 0.0], Variant::RosenbrockVanilla),
            Err(Error::Config(_))
        ));
        assert!(rosenbrock_eval_grad(&[0.0, 0.0, 0.0], Variant::RosenbrockChained).is_ok());
        assert!(rosenbrock_eval_grad(&[0.0], Variant::RosenbrockChained).is_err());
    }

    #[test]
    fn rastrigin_hand_values() {
        for a in [0.0, 1.0, 10.0, 3.5] {
            let (f, g) = rastrigin_eval_grad(&[0.0, 0.0, 0.0], a).unwrap();
            assert_eq!(f, 0.0);
            assert_eq!(g, vec![0.0; 3]);
        }
        let (f, g) = rastrigin_eval_grad(&[0.5, 0.5], 10.0).unwrap();
        assert!((f - 40.5).abs() < 1e-12);
        for gi in g {
            assert!((gi - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn log_scale_value_and_minimum() {
        let f = TestFunction::rastrigin(2, 10.0).unwrap();
        let h = LogScale::new(f, 1e-8).unwrap();
        let (v, g) = h.eval_grad(&[0.5, 0.5]).unwrap();
        assert!((v - libm::log(40.5 + 1e-8)).abs() < 1e-12);
        assert!((g[0] - 1.0 / (40.5 + 1e-8)).abs() < 1e-12);
        let (v0, g0) = h.eval_grad(&[0.0, 0.0]).unwrap();
        assert_eq!(v0, h.minimum_value());
        assert_eq!(g0, vec![0.0, 0.0]);
        assert!(LogScale::new(f, 0.0).is_err());
    }

    #[test]
    fn identical_copies_have_no_offsets() {
        let f = TestFunction::rosenbrock(2).unwrap();
        let s = as_finite_sum(f, 4, 0, 1.0).unwrap();
        assert!(s.offset(0).is_none());
        let x = [0.3, -0.2];
        assert_eq!(s.component_gradient(3, &x).unwrap(), f.eval_grad(&x).unwrap().1);
        assert!(as_finite_sum(f, 0, 0, 0.0).is_err());
    }

    #[test]
    fn offsets_sum_to_exactly_zero() {
        let f = TestFunction::rastrigin(3, 10.0).unwrap();
        for copies in [1, 2, 5, 8] {
            let s = as_finite_sum(f, copies, 17, 0.7).unwrap();
            let mut total = [0.0f64; 3];
            for i in 0..copies {
                for (t, c) in total.iter_mut().zip(s.offset(i).unwrap()) {
                    *t += c;
                }
            }
            assert_eq!(total, [0.0; 3]);
        }
    }
}
