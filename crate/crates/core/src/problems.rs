//! Finite-sum objectives `g(x) = (1/n) Σ f_i(x)` and the index sampler that
//! feeds stochastic methods.
//!
//! Component indices are zero-based in this crate. Output files written by
//! the harness translate them to the 1-based convention.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg;

/// A finite sum of `n` differentiable components over `R^p`.
///
/// Implementors supply the per-component value and gradient. The `_into`
/// methods assume valid indices and dimensions; the checked wrappers
/// [`FiniteSum::full_gradient`] and [`FiniteSum::component_gradient`]
/// validate their inputs first.
pub trait FiniteSum {
    /// Number of components `n`.
    fn components(&self) -> usize;

    /// Dimension `p` of the parameter vector.
    fn dim(&self) -> usize;

    fn component_value(&self, i: usize, x: &[f64]) -> f64;

    /// Writes `∇f_i(x)` into `out`, overwriting it.
    fn component_gradient_into(&self, i: usize, x: &[f64], out: &mut [f64]);

    /// `g(x)`, the mean of the component values.
    fn value(&self, x: &[f64]) -> f64 {
        let n = self.components();
        (0..n).map(|i| self.component_value(i, x)).sum::<f64>() / n as f64
    }

    /// Writes `∇g(x) = (1/n) Σ ∇f_i(x)` into `out`.
    fn full_gradient_into(&self, x: &[f64], out: &mut [f64]) {
        mean_of_component_gradients(self, x, out);
    }

    /// Strength of the `(λ/2)‖x‖²` term carried by every component.
    fn lambda(&self) -> f64 {
        0.0
    }

    fn minimizer(&self) -> Option<&[f64]> {
        None
    }

    fn optimal_value(&self) -> Option<f64> {
        None
    }

    /// `g(x) − g(x*)` when the optimum is known.
    fn suboptimality(&self, x: &[f64]) -> Option<f64> {
        self.optimal_value().map(|v| self.value(x) - v)
    }

    /// A Lipschitz constant shared by every `∇f_i`, when one is known.
    fn lipschitz(&self) -> Option<f64> {
        None
    }

    fn full_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        linalg::check_dim(self.dim(), x.len())?;
        let mut out = vec![0.0; self.dim()];
        self.full_gradient_into(x, &mut out);
        Ok(out)
    }

    fn component_gradient(&self, i: usize, x: &[f64]) -> Result<Vec<f64>> {
        if i >= self.components() {
            return Err(Error::IndexOutOfRange { index: i, n: self.components() });
        }
        linalg::check_dim(self.dim(), x.len())?;
        let mut out = vec![0.0; self.dim()];
        self.component_gradient_into(i, x, &mut out);
        Ok(out)
    }

    /// Mean gradient over a batch of component indices.
    fn batch_gradient_into(&self, batch: &[usize], x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let mut g = vec![0.0; self.dim()];
        for &i in batch {
            self.component_gradient_into(i, x, &mut g);
            linalg::axpy(1.0, &g, out);
        }
        linalg::scale(1.0 / batch.len() as f64, out);
    }
}

/// The reference averaging used by [`FiniteSum::full_gradient_into`]: sum in
/// index order, then divide by `n`.
pub fn mean_of_component_gradients<P: FiniteSum + ?Sized>(problem: &P, x: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    let mut g = vec![0.0; problem.dim()];
    for i in 0..problem.components() {
        problem.component_gradient_into(i, x, &mut g);
        linalg::axpy(1.0, &g, out);
    }
    linalg::scale(1.0 / problem.components() as f64, out);
}

macro_rules! forward_finite_sum {
    ($($ty:ty),*) => {$(
        impl<P: FiniteSum + ?Sized> FiniteSum for $ty {
            fn components(&self) -> usize {
                (**self).components()
            }
            fn dim(&self) -> usize {
                (**self).dim()
            }
            fn component_value(&self, i: usize, x: &[f64]) -> f64 {
                (**self).component_value(i, x)
            }
            fn component_gradient_into(&self, i: usize, x: &[f64], out: &mut [f64]) {
                (**self).component_gradient_into(i, x, out)
            }
            fn value(&self, x: &[f64]) -> f64 {
                (**self).value(x)
            }
            fn full_gradient_into(&self, x: &[f64], out: &mut [f64]) {
                (**self).full_gradient_into(x, out)
            }
            fn lambda(&self) -> f64 {
                (**self).lambda()
            }
            fn minimizer(&self) -> Option<&[f64]> {
                (**self).minimizer()
            }
            fn optimal_value(&self) -> Option<f64> {
                (**self).optimal_value()
            }
            fn suboptimality(&self, x: &[f64]) -> Option<f64> {
                (**self).suboptimality(x)
            }
            fn lipschitz(&self) -> Option<f64> {
                (**self).lipschitz()
            }
        }
    )*};
}

forward_finite_sum!(&P, alloc::boxed::Box<P>);

/// Adds `(λ/2)‖x‖²` to every component of an inner problem, so that
/// `g(x) = (λ/2)‖x‖² + (1/n) Σ f_i(x)` with the regularizer split evenly.
#[derive(Debug, Clone)]
pub struct Regularized<P> {
    inner: P,
    lambda: f64,
}

impl<P: FiniteSum> Regularized<P> {
    pub fn new(inner: P, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) {
            return Err(Error::Config("lambda must be non-negative".into()));
        }
        Ok(Self { inner, lambda })
    }

    pub fn inner(&self) -> &P {
        &self.inner
    }
}

impl<P: FiniteSum> FiniteSum for Regularized<P> {
    fn components(&self) -> usize {
        self.inner.components()
    }
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn component_value(&self, i: usize, x: &[f64]) -> f64 {
        self.inner.component_value(i, x) + 0.5 * self.lambda * linalg::dot(x, x)
    }
    fn component_gradient_into(&self, i: usize, x: &[f64], out: &mut [f64]) {
        self.inner.component_gradient_into(i, x, out);
        linalg::axpy(self.lambda, x, out);
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.inner.value(x) + 0.5 * self.lambda * linalg::dot(x, x)
    }
    fn full_gradient_into(&self, x: &[f64], out: &mut [f64]) {
        self.inner.full_gradient_into(x, out);
        linalg::axpy(self.lambda, x, out);
    }
    fn lambda(&self) -> f64 {
        self.lambda + self.inner.lambda()
    }
    fn lipschitz(&self) -> Option<f64> {
        self.inner.lipschitz().map(|l| l + self.lambda)
    }
    /// Known only when no regularization is added.
    fn minimizer(&self) -> Option<&[f64]> {
        if self.lambda == 0.0 {
            self.inner.minimizer()
        } else {
            None
        }
    }
    fn optimal_value(&self) -> Option<f64> {
        if self.lambda == 0.0 {
            self.inner.optimal_value()
        } else {
            None
        }
    }
    fn suboptimality(&self, x: &[f64]) -> Option<f64> {
        if self.lambda == 0.0 {
            self.inner.suboptimality(x)
        } else {
            None
        }
    }
}

/// One quadratic component `f(x) = ½ xᵀHx − bᵀx + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticComponent {
    /// Row-major symmetric `p x p` Hessian.
    pub hessian: Vec<f64>,
    pub linear: Vec<f64>,
    pub constant: f64,
}

/// A finite sum of convex quadratics with a closed-form minimizer.
#[derive(Debug, Clone)]
pub struct Quadratic {
    dim: usize,
    parts: Vec<QuadraticComponent>,
    lambda: f64,
    mean_hessian: Vec<f64>,
    minimizer: Vec<f64>,
    optimal_value: f64,
    lipschitz: f64,
    strong_convexity: f64,
}

impl Quadratic {
    /// Builds the problem and solves for its minimizer. The mean Hessian
    /// must be positive definite.
    pub fn new(dim: usize, parts: Vec<QuadraticComponent>) -> Result<Self> {
        if parts.is_empty() || dim == 0 {
            return Err(Error::Config("quadratic problem needs n >= 1 and p >= 1".into()));
        }
        let n = parts.len() as f64;
        let mut mean_hessian = vec![0.0; dim * dim];
        let mut mean_linear = vec![0.0; dim];
        let mut lipschitz: f64 = 0.0;
        for part in &parts {
            linalg::check_dim(dim * dim, part.hessian.len())?;
            linalg::check_dim(dim, part.linear.len())?;
            linalg::axpy(1.0 / n, &part.hessian, &mut mean_hessian);
            linalg::axpy(1.0 / n, &part.linear, &mut mean_linear);
            let eig = linalg::symmetric_eigenvalues(&part.hessian, dim);
            lipschitz = lipschitz.max(eig[dim - 1]);
        }
        let minimizer = linalg::cholesky_solve(&mean_hessian, dim, &mean_linear)?;
        let strong_convexity = linalg::symmetric_eigenvalues(&mean_hessian, dim)[0];
        let mut problem = Self {
            dim,
            parts,
            lambda: 0.0,
            mean_hessian,
            minimizer,
            optimal_value: 0.0,
            lipschitz,
            strong_convexity,
        };
        problem.optimal_value = problem.value(&problem.minimizer.clone());
        Ok(problem)
    }

    /// Scalar components `f_i(x) = (x − c_i)²/2`.
    pub fn scalar(centers: &[f64]) -> Result<Self> {
        let parts = centers
            .iter()
            .map(|&c| QuadraticComponent { hessian: vec![1.0], linear: vec![c], constant: 0.5 * c * c })
            .collect();
        Self::new(1, parts)
    }

    /// Regularized least squares `f_i(x) = ½(a_iᵀx − b_i)² + (λ/2)‖x‖²` with
    /// Gaussian features and noisy targets. `λ` is chosen so that `μ/L`
    /// equals `target_ratio` when that is reachable with `λ ≥ 0`.
    pub fn random_least_squares(n: usize, p: usize, target_ratio: f64, seed: u64) -> Result<Self> {
        if n == 0 || p == 0 {
            return Err(Error::Config("quadratic problem needs n >= 1 and p >= 1".into()));
        }
        if !(0.0..1.0).contains(&target_ratio) {
            return Err(Error::Config("target condition ratio must lie in [0, 1)".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
        let truth: Vec<f64> = (0..p).map(|_| normal()).collect();
        let rows: Vec<(Vec<f64>, f64)> = (0..n)
            .map(|_| {
                let a: Vec<f64> = (0..p).map(|_| normal()).collect();
                let b = linalg::dot(&a, &truth) + 0.5 * normal();
                (a, b)
            })
            .collect();

        let outer = |a: &[f64]| -> Vec<f64> {
            let mut h = vec![0.0; p * p];
            for r in 0..p {
                for c in 0..p {
                    h[r * p + c] = a[r] * a[c];
                }
            }
            h
        };
        let mut mean = vec![0.0; p * p];
        let mut l0: f64 = 0.0;
        for (a, _) in &rows {
            linalg::axpy(1.0 / n as f64, &outer(a), &mut mean);
            l0 = l0.max(linalg::dot(a, a));
        }
        let mu0 = linalg::symmetric_eigenvalues(&mean, p)[0].max(0.0);
        let lambda = ((target_ratio * l0 - mu0) / (1.0 - target_ratio)).max(0.0);

        let parts = rows
            .iter()
            .map(|(a, b)| {
                let mut h = outer(a);
                for d in 0..p {
                    h[d * p + d] += lambda;
                }
                QuadraticComponent {
                    hessian: h,
                    linear: a.iter().map(|v| v * b).collect(),
                    constant: 0.5 * b * b,
                }
            })
            .collect();
        let mut q = Self::new(p, parts)?;
        q.lambda = lambda;
        Ok(q)
    }

    /// Smallest eigenvalue of the mean Hessian.
    pub fn strong_convexity(&self) -> f64 {
        self.strong_convexity
    }

    pub fn parts(&self) -> &[QuadraticComponent] {
        &self.parts
    }

    /// `σ² = (1/n) Σ ‖∇f_i(x*)‖²`.
    pub fn gradient_variance_at_optimum(&self) -> f64 {
        let mut g = vec![0.0; self.dim];
        let mut total = 0.0;
        for i in 0..self.parts.len() {
            self.component_gradient_into(i, &self.minimizer, &mut g);
            total += linalg::dot(&g, &g);
        }
        total / self.parts.len() as f64
    }
}

impl FiniteSum for Quadratic {
    fn components(&self) -> usize {
        self.parts.len()
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn component_value(&self, i: usize, x: &[f64]) -> f64 {
        let part = &self.parts[i];
        let mut hx = vec![0.0; self.dim];
        linalg::matvec(&part.hessian, self.dim, x, &mut hx);
        0.5 * linalg::dot(x, &hx) - linalg::dot(&part.linear, x) + part.constant
    }
    fn component_gradient_into(&self, i: usize, x: &[f64], out: &mut [f64]) {
        let part = &self.parts[i];
        linalg::matvec(&part.hessian, self.dim, x, out);
        linalg::axpy(-1.0, &part.linear, out);
    }
    fn lambda(&self) -> f64 {
        self.lambda
    }
    fn minimizer(&self) -> Option<&[f64]> {
        Some(&self.minimizer)
    }
    fn optimal_value(&self) -> Option<f64> {
        Some(self.optimal_value)
    }
    /// Evaluated as `½(x − x*)ᵀ H̄ (x − x*)`, which avoids cancellation near
    /// the optimum.
    fn suboptimality(&self, x: &[f64]) -> Option<f64> {
        let e: Vec<f64> = x.iter().zip(&self.minimizer).map(|(a, b)| a - b).collect();
        let mut he = vec![0.0; self.dim];
        linalg::matvec(&self.mean_hessian, self.dim, &e, &mut he);
        Some(0.5 * linalg::dot(&e, &he))
    }
    fn lipschitz(&self) -> Option<f64> {
        Some(self.lipschitz)
    }
}

/// How many indices each draw produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SamplingMode {
    UniformSingle,
    /// `b` distinct indices per draw; draws are independent of each other.
    MinibatchWithoutReplacement(usize),
}

/// Seeded source of component indices.
///
/// The same seed always yields the same sequence of draws.
#[derive(Debug, Clone)]
pub struct IndexSampler {
    n: usize,
    mode: SamplingMode,
    rng: ChaCha8Rng,
    batch: Vec<usize>,
}

impl IndexSampler {
    pub fn new(n: usize, mode: SamplingMode, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("sampler needs n >= 1".into()));
        }
        if let SamplingMode::MinibatchWithoutReplacement(b) = mode {
            if b == 0 || b > n {
                return Err(Error::Config(alloc::format!("batch size {b} must lie in 1..={n}")));
            }
        }
        Ok(Self { n, mode, rng: ChaCha8Rng::seed_from_u64(seed), batch: Vec::new() })
    }

    pub fn uniform(n: usize, seed: u64) -> Result<Self> {
        Self::new(n, SamplingMode::UniformSingle, seed)
    }

    pub fn mode(&self) -> SamplingMode {
        self.mode
    }

    /// A single uniformly drawn index in `0..n`.
    pub fn sample_index(&mut self) -> usize {
        self.rng.random_range(0..self.n)
    }

    /// The next draw: one index in uniform mode, `b` distinct indices in
    /// mini-batch mode.
    pub fn sample(&mut self) -> &[usize] {
        self.batch.clear();
        match self.mode {
            SamplingMode::UniformSingle => {
                let i = self.rng.random_range(0..self.n);
                self.batch.push(i);
            }
            SamplingMode::MinibatchWithoutReplacement(b) => {
                let picked = rand::seq::index::sample(&mut self.rng, self.n, b);
                self.batch.extend(picked.iter());
            }
        }
        &self.batch
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_quadratic_gradients() {
        let q = Quadratic::scalar(&[0.0, 2.0]).unwrap();
        assert_eq!(q.full_gradient(&[1.0]).unwrap(), vec![0.0]);
        assert_eq!(q.full_gradient(&[0.0]).unwrap(), vec![-1.0]);
        assert_eq!(q.minimizer().unwrap(), &[1.0]);
        assert_eq!(q.optimal_value().unwrap(), 0.5);
    }

    #[test]
    fn checked_oracles_reject_bad_input() {
        let q = Quadratic::scalar(&[0.0, 2.0]).unwrap();
        assert_eq!(
            q.full_gradient(&[1.0, 2.0]),
            Err(Error::DimensionMismatch { expected: 1, found: 2 })
        );
        assert_eq!(q.component_gradient(2, &[0.0]), Err(Error::IndexOutOfRange { index: 2, n: 2 }));
    }

    #[test]
    fn single_component_gradient_is_full_gradient() {
        let q = Quadratic::random_least_squares(1, 3, 0.1, 4).unwrap();
        let x = [0.3, -1.0, 2.0];
        assert_eq!(q.component_gradient(0, &x).unwrap(), q.full_gradient(&x).unwrap());
    }

    #[test]
    fn random_least_squares_hits_condition_target() {
        let q = Quadratic::random_least_squares(20, 5, 0.1, 7).unwrap();
        let ratio = q.strong_convexity() / q.lipschitz().unwrap();
        assert!((ratio - 0.1).abs() < 1e-9, "ratio {ratio}");
        let g = q.full_gradient(q.minimizer().unwrap()).unwrap();
        assert!(linalg::norm(&g) <= 1e-6);
    }

    #[test]
    fn regularized_split_adds_lambda_x() {
        let inner = Quadratic::scalar(&[1.0, 3.0, -2.0]).unwrap();
        let reg = Regularized::new(inner.clone(), 0.25).unwrap();
        let x = [1.5];
        for i in 0..3 {
            let a = reg.component_gradient(i, &x).unwrap()[0] - 0.25 * x[0];
            let b = inner.component_gradient(i, &x).unwrap()[0];
            assert!((a - b).abs() <= 1e-15);
        }
        assert!(Regularized::new(inner, -1.0).is_err());
    }

    #[test]
    fn sampler_config_errors() {
        assert!(IndexSampler::new(3, SamplingMode::MinibatchWithoutReplacement(4), 0).is_err());
        assert!(IndexSampler::new(3, SamplingMode::MinibatchWithoutReplacement(0), 0).is_err());
        assert!(IndexSampler::new(0, SamplingMode::UniformSingle, 0).is_err());
    }

    #[test]
    fn n_one_always_zero() {
        let mut s = IndexSampler::uniform(1, 99).unwrap();
        for _ in 0..100 {
            assert_eq!(s.sample(), &[0]);
        }
    }

    #[test]
    fn minibatch_has_no_duplicates() {
        let mut s = IndexSampler::new(10, SamplingMode::MinibatchWithoutReplacement(7), 3).unwrap();
        for _ in 0..200 {
            let mut b = s.sample().to_vec();
            assert_eq!(b.len(), 7);
            b.sort_unstable();
            b.dedup();
            assert_eq!(b.len(), 7);
            assert!(b.iter().all(|&i| i < 10));
        }
    }
}
