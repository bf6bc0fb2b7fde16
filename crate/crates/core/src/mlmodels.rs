//! Small supervised-learning problems: least squares, binary logistic
//! regression and a one-hidden-layer Leaky-ReLU network, plus the in-memory
//! dataset type with its 80/20 split and standardization.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg;
use crate::problems::FiniteSum;
use crate::sag::LinearModel;

/// Default hidden width of [`Mlp`].
pub const DEFAULT_HIDDEN: usize = 50;

/// Default negative slope of the Leaky-ReLU activation.
pub const DEFAULT_LEAKY_SLOPE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    /// Class indices in `0..classes`.
    Classes { labels: Vec<usize>, classes: usize },
    /// Row-major `n x outputs` real targets.
    Real { values: Vec<f64>, outputs: usize },
}

impl Targets {
    fn len(&self) -> usize {
        match self {
            Targets::Classes { labels, .. } => labels.len(),
            Targets::Real { values, outputs } => values.len() / outputs,
        }
    }

    fn select(&self, rows: &[usize]) -> Targets {
        match self {
            Targets::Classes { labels, classes } => {
                Targets::Classes { labels: rows.iter().map(|&i| labels[i]).collect(), classes: *classes }
            }
            Targets::Real { values, outputs } => Targets::Real {
                values: rows.iter().flat_map(|&i| values[i * outputs..(i + 1) * outputs].iter().copied()).collect(),
                outputs: *outputs,
            },
        }
    }

    /// Width of a model output that fits these targets.
    pub fn output_dim(&self) -> usize {
        match self {
            Targets::Classes { classes, .. } => *classes,
            Targets::Real { outputs, .. } => *outputs,
        }
    }
}

/// A labelled table of samples. Features are stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    features: Vec<f64>,
    p: usize,
    targets: Targets,
    split_seed: u64,
}

impl Dataset {
    pub fn new(name: impl Into<String>, features: Vec<f64>, p: usize, targets: Targets) -> Result<Self> {
        if p == 0 || !features.len().is_multiple_of(p) {
            return Err(Error::Config("feature matrix does not have p columns".into()));
        }
        let n = features.len() / p;
        match &targets {
            Targets::Classes { labels, classes } => {
                if let Some(&bad) = labels.iter().find(|&&l| l >= *classes) {
                    return Err(Error::Config(alloc::format!("label {bad} outside 0..{classes}")));
                }
            }
            Targets::Real { values, outputs } => {
                if *outputs == 0 || values.len() % outputs != 0 {
                    return Err(Error::Config("target matrix has the wrong shape".into()));
                }
            }
        }
        if targets.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: targets.len() });
        }
        Ok(Self { name: name.into(), features, p, targets, split_seed: 0 })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.features.len() / self.p
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn features_dim(&self) -> usize {
        self.p
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.p..(i + 1) * self.p]
    }

    pub fn targets(&self) -> &Targets {
        &self.targets
    }

    /// Seed of the split this dataset came from, 0 for unsplit data.
    pub fn split_seed(&self) -> u64 {
        self.split_seed
    }

    /// Rows `rows`, in that order.
    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            name: self.name.clone(),
            features: rows.iter().flat_map(|&i| self.row(i).iter().copied()).collect(),
            p: self.p,
            targets: self.targets.select(rows),
            split_seed: self.split_seed,
        }
    }
}

/// Shuffles the rows with `seed` and cuts them into a training part of
/// `floor(0.8 n)` rows and a validation part with the rest.
pub fn split_80_20(ds: &Dataset, seed: u64) -> Result<(Dataset, Dataset)> {
    let n = ds.len();
    if n < 5 {
        return Err(Error::Config(alloc::format!("cannot split {n} rows; need at least 5")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let cut = n * 4 / 5;
    let mut train = ds.subset(&order[..cut]);
    let mut val = ds.subset(&order[cut..]);
    train.split_seed = seed;
    val.split_seed = seed;
    Ok((train, val))
}

/// Per-column affine map to zero mean and unit (population) variance,
/// fitted on one matrix and applied to others. Constant columns are only
/// centered.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    /// Fits on a row-major matrix with `cols` columns.
    pub fn fit(values: &[f64], cols: usize) -> Self {
        let rows = values.len() / cols;
        let mut mean = vec![0.0; cols];
        for row in values.chunks_exact(cols) {
            linalg::axpy(1.0, row, &mut mean);
        }
        linalg::scale(1.0 / rows as f64, &mut mean);
        let mut var = vec![0.0; cols];
        for row in values.chunks_exact(cols) {
            for ((v, x), m) in var.iter_mut().zip(row).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let scale = var
            .iter()
            .map(|v| {
                let s = libm::sqrt(v / rows as f64);
                if s > 0.0 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, scale }
    }

    pub fn apply(&self, values: &mut [f64]) {
        let cols = self.mean.len();
        for row in values.chunks_exact_mut(cols) {
            for ((x, m), s) in row.iter_mut().zip(&self.mean).zip(&self.scale) {
                *x = (*x - m) / s;
            }
        }
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn scale(&self) -> &[f64] {
        &self.scale
    }
}

/// Standardizes features (and real targets) of `train` and `val` with
/// statistics of `train`.
pub fn standardize(train: &mut Dataset, val: &mut Dataset) {
    let fs = Standardizer::fit(&train.features, train.p);
    fs.apply(&mut train.features);
    fs.apply(&mut val.features);
    if let (Targets::Real { values, outputs }, Targets::Real { values: vv, .. }) = (&mut train.targets, &mut val.targets) {
        let ts = Standardizer::fit(values, *outputs);
        ts.apply(values);
        ts.apply(vv);
    }
}

/// `f_i(θ) = (a_iᵀθ − y_i)²`.
#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquares {
    features: Vec<f64>,
    targets: Vec<f64>,
    p: usize,
}

impl LeastSquares {
    pub fn new(features: Vec<f64>, targets: Vec<f64>, p: usize) -> Result<Self> {
        if p == 0 || features.len() != targets.len() * p || targets.is_empty() {
            return Err(Error::DimensionMismatch { expected: targets.len() * p, found: features.len() });
        }
        Ok(Self { features, targets, p })
    }

    /// Uses target column `output` of a regression dataset.
    pub fn from_dataset(ds: &Dataset, output: usize) -> Result<Self> {
        match ds.targets() {
            Targets::Real { values, outputs } if output < *outputs => {
                let t = values.chunks_exact(*outputs).map(|r| r[output]).collect();
                Self::new(ds.features.clone(), t, ds.p)
            }
            _ => Err(Error::Config("least squares needs a real-valued target column".into())),
        }
    }
}

impl LinearModel for LeastSquares {
    fn components(&self) -> usize {
        self.targets.len()
    }
    fn dim(&self) -> usize {
        self.p
    }
    fn features(&self, i: usize) -> &[f64] {
        &self.features[i * self.p..(i + 1) * self.p]
    }
    fn scalar_derivative(&self, i: usize, z: f64) -> f64 {
        2.0 * (z - self.targets[i])
    }
}

impl FiniteSum for LeastSquares {
    fn components(&self) -> usize {
        self.targets.len()
    }
    fn dim(&self) -> usize {
        self.p
    }
    fn component_value(&self, i: usize, x: &[f64]) -> f64 {
        let r = linalg::dot(LinearModel::features(self, i), x) - self.targets[i];
        r * r
    }
    fn component_gradient_into(&self, i: usize, x: &[f64], out: &mut [f64]) {
        linear_gradient(self, i, x, out);
    }
    /// `2 maxᵢ ‖aᵢ‖²`.
    fn lipschitz(&self) -> Option<f64> {
        Some(2.0 * max_row_norm_sq(&self.features, self.p))
    }
}

fn max_row_norm_sq(features: &[f64], p: usize) -> f64 {
    features.chunks_exact(p).map(|a| linalg::dot(a, a)).fold(0.0, f64::max)
}

fn linear_gradient<M: LinearModel>(model: &M, i: usize, x: &[f64], out: &mut [f64]) {
    let a = model.features(i);
    let s = model.scalar_derivative(i, linalg::dot(a, x));
    for (o, aj) in out.iter_mut().zip(a) {
        *o = s * aj;
    }
}

/// `log(1 + e^t)` without overflow.
pub fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + libm::log1p(libm::exp(-t))
    } else {
        libm::log1p(libm::exp(t))
    }
}

/// `1 / (1 + e^{−t})` without overflow.
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + libm::exp(-t))
    } else {
        let e = libm::exp(t);
        e / (1.0 + e)
    }
}

/// `f_i(θ) = log(1 + exp(−y_i a_iᵀθ))` with labels `y_i ∈ {−1, +1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Logistic {
    features: Vec<f64>,
    labels: Vec<f64>,
    p: usize,
}

impl Logistic {
    pub fn new(features: Vec<f64>, labels: Vec<f64>, p: usize) -> Result<Self> {
        if p == 0 || features.len() != labels.len() * p || labels.is_empty() {
            return Err(Error::DimensionMismatch { expected: labels.len() * p, found: features.len() });
        }
        if labels.iter().any(|&y| y != 1.0 && y != -1.0) {
            return Err(Error::Config("logistic labels must be -1 or +1".into()));
        }
        Ok(Self { features, labels, p })
    }

    /// Binary problem "class `positive` versus the rest".
    pub fn one_vs_rest(ds: &Dataset, positive: usize) -> Result<Self> {
        match ds.targets() {
            Targets::Classes { labels, classes } if positive < *classes => {
                let y = labels.iter().map(|&l| if l == positive { 1.0 } else { -1.0 }).collect();
                Self::new(ds.features.clone(), y, ds.p)
            }
            _ => Err(Error::Config("one-vs-rest needs a classification dataset and a valid class".into())),
        }
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }
}

impl LinearModel for Logistic {
    fn components(&self) -> usize {
        self.labels.len()
    }
    fn dim(&self) -> usize {
        self.p
    }
    fn features(&self, i: usize) -> &[f64] {
        &self.features[i * self.p..(i + 1) * self.p]
    }
    fn scalar_derivative(&self, i: usize, z: f64) -> f64 {
        let y = self.labels[i];
        -y * sigmoid(-y * z)
    }
}

impl FiniteSum for Logistic {
    fn components(&self) -> usize {
        self.labels.len()
    }
    fn dim(&self) -> usize {
        self.p
    }
    fn component_value(&self, i: usize, x: &[f64]) -> f64 {
        softplus(-self.labels[i] * linalg::dot(LinearModel::features(self, i), x))
    }
    fn component_gradient_into(&self, i: usize, x: &[f64], out: &mut [f64]) {
        linear_gradient(self, i, x, out);
    }
    /// `0.25 maxᵢ ‖aᵢ‖²`.
    fn lipschitz(&self) -> Option<f64> {
        Some(0.25 * max_row_norm_sq(&self.features, self.p))
    }
}

/// One-vs-rest predictions: the class whose score `θ_cᵀa` is largest.
pub fn one_vs_rest_predict(weights: &[Vec<f64>], row: &[f64]) -> usize {
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (c, w) in weights.iter().enumerate() {
        let s = linalg::dot(w, row);
        if s > best_score {
            best = c;
            best_score = s;
        }
    }
    best
}

pub fn leaky_relu(z: f64, slope: f64) -> f64 {
    if z >= 0.0 {
        z
    } else {
        slope * z
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum MlpLoss {
    /// Softmax followed by negative log-likelihood.
    CrossEntropy,
    /// Mean over outputs of the squared error.
    MeanSquared,
}

/// Target of a single sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target<'a> {
    Class(usize),
    Real(&'a [f64]),
}

/// Shape of a `p → hidden → out` perceptron with a Leaky-ReLU hidden layer.
///
/// Parameters live in one flat vector, in this order: `W1` (hidden x p,
/// row-major), `b1` (hidden), `W2` (out x hidden, row-major), `b2` (out).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mlp {
    pub inputs: usize,
    pub hidden: usize,
    pub outputs: usize,
    pub leaky_slope: f64,
}

/// The four parameter blocks of an [`Mlp`].
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl Mlp {
    pub fn new(inputs: usize, hidden: usize, outputs: usize) -> Result<Self> {
        if inputs == 0 || hidden == 0 || outputs == 0 {
            return Err(Error::Config("network layers must be non-empty".into()));
        }
        Ok(Self { inputs, hidden, outputs, leaky_slope: DEFAULT_LEAKY_SLOPE })
    }

    pub fn param_count(&self) -> usize {
        self.hidden * self.inputs + self.hidden + self.outputs * self.hidden + self.outputs
    }

    pub fn flatten(&self, params: &MlpParams) -> Result<Vec<f64>> {
        linalg::check_dim(self.hidden * self.inputs, params.w1.len())?;
        linalg::check_dim(self.hidden, params.b1.len())?;
        linalg::check_dim(self.outputs * self.hidden, params.w2.len())?;
        linalg::check_dim(self.outputs, params.b2.len())?;
        let mut v = Vec::with_capacity(self.param_count());
        v.extend_from_slice(&params.w1);
        v.extend_from_slice(&params.b1);
        v.extend_from_slice(&params.w2);
        v.extend_from_slice(&params.b2);
        Ok(v)
    }

    pub fn unflatten(&self, theta: &[f64]) -> Result<MlpParams> {
        linalg::check_dim(self.param_count(), theta.len())?;
        let (w1, rest) = theta.split_at(self.hidden * self.inputs);
        let (b1, rest) = rest.split_at(self.hidden);
        let (w2, b2) = rest.split_at(self.outputs * self.hidden);
        Ok(MlpParams { w1: w1.to_vec(), b1: b1.to_vec(), w2: w2.to_vec(), b2: b2.to_vec() })
    }

    /// Weights uniform in `±1/√fan_in`, biases zero.
    pub fn init(&self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut theta = vec![0.0; self.param_count()];
        let w1 = self.hidden * self.inputs;
        let b1 = w1 + self.hidden;
        let w2 = b1 + self.outputs * self.hidden;
        let r1 = 1.0 / libm::sqrt(self.inputs as f64);
        let r2 = 1.0 / libm::sqrt(self.hidden as f64);
        for v in &mut theta[..w1] {
            *v = rng.random_range(-r1..r1);
        }
        for v in &mut theta[b1..w2] {
            *v = rng.random_range(-r2..r2);
        }
        theta
    }

    /// Loss of one sample; adds its gradient into `grad` when given.
    fn sample(
        &self,
        theta: &[f64],
        a: &[f64],
        target: Target<'_>,
        loss: MlpLoss,
        grad: Option<&mut [f64]>,
        scratch: &mut Vec<f64>,
    ) -> f64 {
        let (p, h, o) = (self.inputs, self.hidden, self.outputs);
        let (w1, rest) = theta.split_at(h * p);
        let (b1, rest) = rest.split_at(h);
        let (w2, b2) = rest.split_at(o * h);

        scratch.clear();
        scratch.resize(2 * h + 2 * o, 0.0);
        let (pre, rest) = scratch.split_at_mut(h);
        let (act, rest) = rest.split_at_mut(h);
        let (out, delta) = rest.split_at_mut(o);

        linalg::matvec(w1, p, a, pre);
        for ((z, b), y) in pre.iter_mut().zip(b1).zip(act.iter_mut()) {
            *z += b;
            *y = leaky_relu(*z, self.leaky_slope);
        }
        linalg::matvec(w2, h, act, out);
        linalg::axpy(1.0, b2, out);

        let value = match (loss, target) {
            (MlpLoss::CrossEntropy, Target::Class(c)) => {
                let max = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut total = 0.0;
                for (d, z) in delta.iter_mut().zip(out.iter()) {
                    *d = libm::exp(z - max);
                    total += *d;
                }
                for d in delta.iter_mut() {
                    *d /= total;
                }
                delta[c] -= 1.0;
                max + libm::log(total) - out[c]
            }
            (MlpLoss::MeanSquared, Target::Real(t)) => {
                let mut s = 0.0;
                for ((d, z), y) in delta.iter_mut().zip(out.iter()).zip(t) {
                    let r = z - y;
                    s += r * r;
                    *d = 2.0 * r / o as f64;
                }
                s / o as f64
            }
            (MlpLoss::MeanSquared, Target::Class(c)) => {
                let mut s = 0.0;
                for (k, (d, z)) in delta.iter_mut().zip(out.iter()).enumerate() {
                    let r = z - if k == c { 1.0 } else { 0.0 };
                    s += r * r;
                    *d = 2.0 * r / o as f64;
                }
                s / o as f64
            }
            (MlpLoss::CrossEntropy, Target::Real(_)) => f64::NAN,
        };

        if let Some(grad) = grad {
            let (gw1, rest) = grad.split_at_mut(h * p);
            let (gb1, rest) = rest.split_at_mut(h);
            let (gw2, gb2) = rest.split_at_mut(o * h);
            for k in 0..o {
                gb2[k] += delta[k];
                linalg::axpy(delta[k], act, &mut gw2[k * h..(k + 1) * h]);
            }
            for j in 0..h {
                let mut back = 0.0;
                for k in 0..o {
                    back += w2[k * h + j] * delta[k];
                }
                let dz = if pre[j] >= 0.0 { back } else { self.leaky_slope * back };
                gb1[j] += dz;
                linalg::axpy(dz, a, &mut gw1[j * p..(j + 1) * p]);
            }
        }
        value
    }

    /// Mean loss over `batch` and its gradient with respect to every
    /// parameter, written into `grad`.
    pub fn forward_backward(
        &self,
        theta: &[f64],
        batch: &[(&[f64], Target<'_>)],
        loss: MlpLoss,
        grad: &mut [f64],
    ) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::Config("empty batch".into()));
        }
        linalg::check_dim(self.param_count(), theta.len())?;
        linalg::check_dim(self.param_count(), grad.len())?;
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut scratch = Vec::new();
        let mut total = 0.0;
        for (a, t) in batch {
            linalg::check_dim(self.inputs, a.len())?;
            self.check_target(*t)?;
            total += self.sample(theta, a, *t, loss, Some(grad), &mut scratch);
        }
        let scale = 1.0 / batch.len() as f64;
        linalg::scale(scale, grad);
        let value = total * scale;
        if value.is_finite() && linalg::all_finite(grad) {
            Ok(value)
        } else {
            Err(Error::Diverged { iteration: 0 })
        }
    }

    fn check_target(&self, t: Target<'_>) -> Result<()> {
        match t {
            Target::Class(c) if c >= self.outputs => Err(Error::IndexOutOfRange { index: c, n: self.outputs }),
            Target::Real(v) => linalg::check_dim(self.outputs, v.len()),
            _ => Ok(()),
        }
    }
}

/// A network trained on a dataset, as a finite sum over its samples.
#[derive(Debug, Clone)]
pub struct MlpProblem {
    mlp: Mlp,
    data: Dataset,
    loss: MlpLoss,
}

impl MlpProblem {
    /// Cross-entropy for class targets, mean squared error for real ones.
    pub fn new(data: Dataset, hidden: usize) -> Result<Self> {
        let loss = match data.targets() {
            Targets::Classes { .. } => MlpLoss::CrossEntropy,
            Targets::Real { .. } => MlpLoss::MeanSquared,
        };
        let mlp = Mlp::new(data.p, hidden, data.targets().output_dim())?;
        Ok(Self { mlp, data, loss })
    }

    pub fn mlp(&self) -> &Mlp {
        &self.mlp
    }

    pub fn loss(&self) -> MlpLoss {
        self.loss
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    fn target(&self, i: usize) -> Target<'_> {
        match &self.data.targets {
            Targets::Classes { labels, .. } => Target::Class(labels[i]),
            Targets::Real { values, outputs } => Target::Real(&values[i * outputs..(i + 1) * outputs]),
        }
    }

    /// Fraction of samples of `data` whose arg-max output is the label.
    pub fn accuracy(&self, theta: &[f64], data: &Dataset) -> Option<f64> {
        let Targets::Classes { labels, .. } = data.targets() else {
            return None;
        };
        let m = &self.mlp;
        let mut scratch = Vec::new();
        let mut hits = 0;
        for (i, &label) in labels.iter().enumerate() {
            m.sample(theta, data.row(i), Target::Class(label), self.loss, None, &mut scratch);
            let out = &scratch[2 * m.hidden..2 * m.hidden + m.outputs];
            let pred = (0..m.outputs).fold(0, |b, k| if out[k] > out[b] { k } else { b });
            hits += usize::from(pred == label);
        }
        Some(hits as f64 / labels.len() as f64)
    }
}

impl FiniteSum for MlpProblem {
    fn components(&self) -> usize {
        self.data.len()
    }
    fn dim(&self) -> usize {
        self.mlp.param_count()
    }
    fn component_value(&self, i: usize, x: &[f64]) -> f64 {
        self.mlp.sample(x, self.data.row(i), self.target(i), self.loss, None, &mut Vec::new())
    }
    fn component_gradient_into(&self, i: usize, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|g| *g = 0.0);
        self.mlp.sample(x, self.data.row(i), self.target(i), self.loss, Some(out), &mut Vec::new());
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n: usize) -> Dataset {
        let features = (0..n * 2).map(|v| v as f64).collect();
        let labels = (0..n).map(|i| i % 3).collect();
        Dataset::new("toy", features, 2, Targets::Classes { labels, classes: 3 }).unwrap()
    }

    #[test]
    fn least_squares_hand_values() {
        let ls = LeastSquares::new(vec![1.0, 0.0, 1.0, 2.0], vec![0.0, 0.0], 2).unwrap();
        assert_eq!(ls.component_value(0, &[0.0, 0.0]), 0.0);
        assert_eq!(ls.component_gradient(0, &[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(ls.component_value(1, &[1.0, 1.0]), 9.0);
        assert_eq!(ls.component_gradient(1, &[1.0, 1.0]).unwrap(), vec![6.0, 12.0]);
    }

    #[test]
    fn logistic_at_zero_is_log_two() {
        let lg = Logistic::new(vec![3.0, -1.0, 0.5, 2.0], vec![1.0, -1.0], 2).unwrap();
        for i in 0..2 {
            assert!((lg.component_value(i, &[0.0, 0.0]) - core::f64::consts::LN_2).abs() < 1e-15);
        }
    }

    #[test]
    fn logistic_extreme_margins() {
        let lg = Logistic::new(vec![1.0], vec![1.0], 1).unwrap();
        let small = lg.component_value(0, &[50.0]);
        assert!(small > 0.0 && small < 1e-21);
        assert!((lg.component_value(0, &[-50.0]) - 50.0).abs() < 1e-12);
        assert!(lg.component_value(0, &[-1000.0]).is_finite());
        let g = lg.component_gradient(0, &[-1000.0]).unwrap();
        assert_eq!(g, vec![-1.0]);
        assert!(Logistic::new(vec![1.0], vec![0.0], 1).is_err());
    }

    #[test]
    fn leaky_relu_values() {
        assert_eq!(leaky_relu(-1.0, DEFAULT_LEAKY_SLOPE), -0.01);
        assert_eq!(leaky_relu(2.0, DEFAULT_LEAKY_SLOPE), 2.0);
    }

    #[test]
    fn zero_network_gives_log_classes() {
        let ds = toy(6);
        let prob = MlpProblem::new(ds, 4).unwrap();
        let theta = vec![0.0; prob.dim()];
        assert!((prob.value(&theta) - libm::log(3.0)).abs() < 1e-15);
    }

    #[test]
    fn flatten_order() {
        let m = Mlp::new(2, 3, 1).unwrap();
        let theta: Vec<f64> = (0..m.param_count()).map(|v| v as f64).collect();
        let p = m.unflatten(&theta).unwrap();
        assert_eq!(p.w1, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(p.b1, vec![6.0, 7.0, 8.0]);
        assert_eq!(p.w2, vec![9.0, 10.0, 11.0]);
        assert_eq!(p.b2, vec![12.0]);
        assert_eq!(m.flatten(&p).unwrap(), theta);
        assert!(m.unflatten(&theta[1..]).is_err());
    }

    #[test]
    fn forward_backward_contract() {
        let m = Mlp::new(2, 3, 2).unwrap();
        let theta = m.init(1);
        let mut g = vec![0.0; m.param_count()];
        assert!(m.forward_backward(&theta, &[], MlpLoss::CrossEntropy, &mut g).is_err());
        let a = [1.0, 2.0];
        let bad = [(&a[..], Target::Class(2))];
        assert!(m.forward_backward(&theta, &bad, MlpLoss::CrossEntropy, &mut g).is_err());
        let huge = vec![1e300; m.param_count()];
        let ok = [(&a[..], Target::Class(1))];
        assert_eq!(m.forward_backward(&huge, &ok, MlpLoss::CrossEntropy, &mut g), Err(Error::Diverged { iteration: 0 }));
    }

    #[test]
    fn split_sizes() {
        for (n, train) in [(150, 120), (178, 142), (5, 4), (442, 353)] {
            let (a, b) = split_80_20(&toy(n), 3).unwrap();
            assert_eq!((a.len(), b.len()), (train, n - train));
        }
        assert!(split_80_20(&toy(4), 0).is_err());
    }

    #[test]
    fn split_is_deterministic_and_a_partition() {
        let ds = toy(50);
        let (a, b) = split_80_20(&ds, 9).unwrap();
        assert_eq!(split_80_20(&ds, 9).unwrap(), (a.clone(), b.clone()));
        let mut firsts: Vec<f64> = a.features().chunks(2).chain(b.features().chunks(2)).map(|r| r[0]).collect();
        firsts.sort_by(f64::total_cmp);
        let expected: Vec<f64> = (0..50).map(|i| (2 * i) as f64).collect();
        assert_eq!(firsts, expected);
        assert_ne!(split_80_20(&ds, 10).unwrap().0, a);
    }

    #[test]
    fn standardization_moments() {
        let values: Vec<f64> = (0..40).map(|i| libm::sin(i as f64) * 7.0 + 3.0 * (i % 2) as f64).collect();
        let mut train = Dataset::new("t", values.clone(), 4, Targets::Real { values: vec![1.0; 10], outputs: 1 }).unwrap();
        let mut val = train.clone();
        standardize(&mut train, &mut val);
        let s = Standardizer::fit(train.features(), 4);
        for (m, sd) in s.mean().iter().zip(s.scale()) {
            assert!(m.abs() < 1e-10);
            assert!((sd * sd - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn dataset_validation() {
        assert!(Dataset::new("x", vec![1.0; 5], 2, Targets::Classes { labels: vec![0, 0], classes: 1 }).is_err());
        assert!(Dataset::new("x", vec![1.0; 4], 2, Targets::Classes { labels: vec![0, 2], classes: 2 }).is_err());
        assert!(Dataset::new("x", vec![1.0; 4], 2, Targets::Classes { labels: vec![0], classes: 2 }).is_err());
    }
}
