//! Experiment configuration.
//!
//! A config file (TOML) names a problem, a list of methods and a budget.
//! Everything left out is filled in by [`ExperimentConfig::resolve`], and
//! the resolved form is what gets hashed and embedded in outputs.
//!
//! ```toml
//! name = "demo"
//! iterations = 5000
//! seeds = [1, 2, 3]
//! record_every = 10
//!
//! [problem]
//! kind = "test_function"
//! function = "rosenbrock"
//! dim = 2
//! log_scale = true
//!
//! [[methods]]
//! method = "sag"
//! alpha = 0.001
//!
//! [[methods]]
//! method = "adam"
//! ```

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use sagkit_core::metrics::{DEFAULT_TOL, DEFAULT_WINDOW};
use sagkit_core::testfns::{DEFAULT_LOG_DELTA, DEFAULT_RASTRIGIN_A};
use sagkit_core::{HyperParams, InitMode, OptimizerKind, SagVariant, ScheduleSpec};

use crate::data::CsvSchema;
use crate::error::{HarnessError, Result};

pub const DEFAULT_RECORD_EVERY: u64 = 10;
pub const DEFAULT_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];
/// `|g|` or `‖x‖` beyond this marks a run as diverged.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

/// Starting point of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum X0Spec {
    Zeros,
    Fixed { values: Vec<f64> },
    /// Each coordinate uniform in `[low, high)`, drawn from the run seed.
    Uniform { low: f64, high: f64 },
    /// Network weights drawn from the run seed.
    ModelInit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionName {
    Rosenbrock,
    RosenbrockChained,
    Rastrigin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    LeastSquares,
    Logistic,
    Mlp,
}

/// Where a dataset comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DataSource {
    Bundled { bundled: String },
    File { path: PathBuf, schema: CsvSchema },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemSpec {
    /// A benchmark surface replicated into a finite sum.
    TestFunction {
        function: FunctionName,
        dim: usize,
        #[serde(default)]
        a: Option<f64>,
        #[serde(default)]
        log_scale: Option<bool>,
        #[serde(default)]
        delta: Option<f64>,
        #[serde(default)]
        copies: Option<usize>,
        #[serde(default)]
        noise_scale: Option<f64>,
        #[serde(default)]
        noise_seed: Option<u64>,
        #[serde(default)]
        x0: Option<X0Spec>,
    },
    /// Random strongly convex least-squares sum with a target `μ/L`.
    Quadratic {
        n: usize,
        p: usize,
        condition_ratio: f64,
        #[serde(default)]
        problem_seed: Option<u64>,
        #[serde(default)]
        x0: Option<X0Spec>,
    },
    /// `f_i(x) = (x − c_i)²/2` in one dimension.
    ScalarQuadratic {
        centers: Vec<f64>,
        #[serde(default)]
        x0: Option<X0Spec>,
    },
    /// A model trained on the training part of an 80/20 split.
    Dataset {
        #[serde(flatten)]
        source: DataSource,
        model: ModelKind,
        /// Positive class for one-vs-rest logistic regression.
        #[serde(default)]
        class: Option<usize>,
        /// Target column for least squares.
        #[serde(default)]
        output: Option<usize>,
        #[serde(default)]
        hidden: Option<usize>,
        #[serde(default)]
        lambda: Option<f64>,
        #[serde(default)]
        standardize: Option<bool>,
        #[serde(default)]
        split_seed: Option<u64>,
        #[serde(default)]
        x0: Option<X0Spec>,
    },
}

/// One method of the grid, with optional overrides of its defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSpec {
    /// A classical rule (`sgd`, `adam`, ...), `fg` (full-gradient descent),
    /// or one of `sag`, `sag_reweighted`, `sag_regularized`, `sag_sgd`,
    /// `sag_adam`.
    pub method: String,
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub beta1: Option<f64>,
    #[serde(default)]
    pub beta2: Option<f64>,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub rprop_eta_plus: Option<f64>,
    #[serde(default)]
    pub rprop_eta_minus: Option<f64>,
    #[serde(default)]
    pub rprop_step_min: Option<f64>,
    #[serde(default)]
    pub rprop_step_max: Option<f64>,
    #[serde(default)]
    pub asgd_t0: Option<u64>,
    #[serde(default)]
    pub schedule: Option<ScheduleSpec>,
    /// Mini-batch size; 1 samples a single index.
    #[serde(default)]
    pub batch: Option<usize>,
    /// Classical rules only: use `∇g` instead of sampled gradients.
    #[serde(default)]
    pub full_gradient: Option<bool>,
    /// SAG table initialization.
    #[serde(default)]
    pub init: Option<InitMode>,
    /// Scalar-slot updates for linear models.
    #[serde(default)]
    pub jit: Option<bool>,
    /// `sag_regularized` only; defaults to the problem's `lambda`.
    #[serde(default)]
    pub lambda: Option<f64>,
}

impl MethodSpec {
    pub fn named(method: &str) -> Self {
        Self { method: method.to_string(), ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsSpec {
    #[serde(default)]
    pub window: Option<usize>,
    #[serde(default)]
    pub tol: Option<f64>,
}

/// The file format, as written by users.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub problem: ProblemSpec,
    pub methods: Vec<MethodSpec>,
    /// Steps per run. Exactly one of `iterations` and `epochs` is needed.
    #[serde(default)]
    pub iterations: Option<u64>,
    /// Passes over the data; a pass is `ceil(n/b)` steps, or one step for
    /// full-gradient rules.
    #[serde(default)]
    pub epochs: Option<u64>,
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
    #[serde(default)]
    pub record_every: Option<u64>,
    #[serde(default)]
    pub metrics: Option<MetricsSpec>,
    /// Output directory; not part of the hash.
    #[serde(default)]
    pub output: Option<PathBuf>,
}

/// How a run steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Method {
    Classical { kind: OptimizerKind, full_gradient: bool },
    Sag { variant: SagVariant, init: InitMode, jit: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedMethod {
    pub label: String,
    /// Name as written in the config.
    pub method: String,
    #[serde(flatten)]
    pub rule: Method,
    pub hyper: HyperParams,
    pub batch: usize,
    pub iterations: u64,
}

/// A config with every default filled in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub name: String,
    pub problem: ResolvedProblem,
    pub methods: Vec<ResolvedMethod>,
    pub seeds: Vec<u64>,
    pub record_every: u64,
    pub window: usize,
    pub tol: f64,
    pub divergence_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ResolvedProblem {
    TestFunction {
        function: FunctionName,
        dim: usize,
        a: f64,
        log_scale: bool,
        delta: f64,
        copies: usize,
        noise_scale: f64,
        noise_seed: u64,
        x0: X0Spec,
    },
    Quadratic { n: usize, p: usize, condition_ratio: f64, problem_seed: u64, x0: X0Spec },
    ScalarQuadratic { centers: Vec<f64>, x0: X0Spec },
    Dataset {
        #[serde(flatten)]
        source: DataSource,
        model: ModelKind,
        class: usize,
        output: usize,
        hidden: usize,
        lambda: f64,
        standardize: bool,
        split_seed: u64,
        x0: X0Spec,
    },
}

impl ResolvedProblem {
    pub fn x0(&self) -> &X0Spec {
        match self {
            ResolvedProblem::TestFunction { x0, .. }
            | ResolvedProblem::Quadratic { x0, .. }
            | ResolvedProblem::ScalarQuadratic { x0, .. }
            | ResolvedProblem::Dataset { x0, .. } => x0,
        }
    }

    /// `λ` of the exactly known `(λ/2)‖x‖²` term, if any.
    pub fn lambda(&self) -> f64 {
        match self {
            ResolvedProblem::Dataset { lambda, .. } => *lambda,
            _ => 0.0,
        }
    }
}

/// Facts about the built problem that defaults depend on.
#[derive(Debug, Clone, Copy)]
pub struct ProblemFacts {
    pub n: usize,
    pub lipschitz: Option<f64>,
    pub linear: bool,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn resolve_problem(&self) -> Result<ResolvedProblem> {
        Ok(match self.problem.clone() {
            ProblemSpec::TestFunction { function, dim, a, log_scale, delta, copies, noise_scale, noise_seed, x0 } => {
                let half = match function {
                    FunctionName::Rastrigin => 5.12,
                    _ => 2.0,
                };
                ResolvedProblem::TestFunction {
                    function,
                    dim,
                    a: a.unwrap_or(DEFAULT_RASTRIGIN_A),
                    log_scale: log_scale.unwrap_or(false),
                    delta: delta.unwrap_or(DEFAULT_LOG_DELTA),
                    copies: copies.unwrap_or(1),
                    noise_scale: noise_scale.unwrap_or(0.0),
                    noise_seed: noise_seed.unwrap_or(0),
                    x0: x0.unwrap_or(X0Spec::Uniform { low: -half, high: half }),
                }
            }
            ProblemSpec::Quadratic { n, p, condition_ratio, problem_seed, x0 } => ResolvedProblem::Quadratic {
                n,
                p,
                condition_ratio,
                problem_seed: problem_seed.unwrap_or(0),
                x0: x0.unwrap_or(X0Spec::Uniform { low: -1.0, high: 1.0 }),
            },
            ProblemSpec::ScalarQuadratic { centers, x0 } => {
                ResolvedProblem::ScalarQuadratic { centers, x0: x0.unwrap_or(X0Spec::Zeros) }
            }
            ProblemSpec::Dataset { source, model, class, output, hidden, lambda, standardize, split_seed, x0 } => {
                ResolvedProblem::Dataset {
                    source,
                    model,
                    class: class.unwrap_or(0),
                    output: output.unwrap_or(0),
                    hidden: hidden.unwrap_or(sagkit_core::mlmodels::DEFAULT_HIDDEN),
                    lambda: lambda.unwrap_or(0.0),
                    standardize: standardize.unwrap_or(true),
                    split_seed: split_seed.unwrap_or(0),
                    x0: x0.unwrap_or(if model == ModelKind::Mlp { X0Spec::ModelInit } else { X0Spec::Zeros }),
                }
            }
        })
    }

    /// Fills every default. `facts` describe the problem built from
    /// [`ExperimentConfig::resolve_problem`].
    pub fn resolve(&self, facts: ProblemFacts) -> Result<ResolvedConfig> {
        if self.methods.is_empty() {
            return Err(HarnessError::Config("no methods listed".into()));
        }
        let problem = self.resolve_problem()?;
        let mut methods = Vec::new();
        for spec in &self.methods {
            methods.push(resolve_method(spec, self, &problem, facts)?);
        }
        let mut labels: Vec<&str> = methods.iter().map(|m| m.label.as_str()).collect();
        labels.sort_unstable();
        if let Some(w) = labels.windows(2).find(|w| w[0] == w[1]) {
            return Err(HarnessError::Config(format!("duplicate method label `{}`", w[0])));
        }
        let seeds = self.seeds.clone().unwrap_or_else(|| DEFAULT_SEEDS.to_vec());
        if seeds.is_empty() {
            return Err(HarnessError::Config("no seeds listed".into()));
        }
        let metrics = self.metrics.clone().unwrap_or(MetricsSpec { window: None, tol: None });
        let record_every = self.record_every.unwrap_or(DEFAULT_RECORD_EVERY);
        if record_every == 0 {
            return Err(HarnessError::Config("record_every must be at least 1".into()));
        }
        Ok(ResolvedConfig {
            name: self.name.clone(),
            problem,
            methods,
            seeds,
            record_every,
            window: metrics.window.unwrap_or(DEFAULT_WINDOW),
            tol: metrics.tol.unwrap_or(DEFAULT_TOL),
            divergence_threshold: DIVERGENCE_THRESHOLD,
        })
    }
}

fn resolve_method(
    spec: &MethodSpec,
    cfg: &ExperimentConfig,
    problem: &ResolvedProblem,
    facts: ProblemFacts,
) -> Result<ResolvedMethod> {
    let sag_variant = match spec.method.as_str() {
        "sag" => Some(SagVariant::Basic),
        "sag_reweighted" => Some(SagVariant::Reweighted),
        "sag_regularized" => {
            Some(SagVariant::ExactRegularized { lambda: spec.lambda.unwrap_or_else(|| problem.lambda()) })
        }
        "sag_sgd" => Some(SagVariant::Momentum),
        "sag_adam" => Some(SagVariant::Adam),
        _ => None,
    };
    let (rule, mut hyper) = match sag_variant {
        Some(variant) => {
            let mut hyper = HyperParams::default();
            match variant {
                SagVariant::Adam => hyper.alpha = 1e-3,
                _ => {
                    if let Some(l) = facts.lipschitz {
                        hyper.alpha = 1.0 / (16.0 * l);
                    }
                }
            }
            let jit = spec.jit.unwrap_or(false);
            if jit && !facts.linear {
                return Err(HarnessError::Config("jit needs a least-squares or logistic problem".into()));
            }
            if jit && problem.lambda() > 0.0 && !matches!(variant, SagVariant::ExactRegularized { .. }) {
                return Err(HarnessError::Config("jit with lambda > 0 needs sag_regularized".into()));
            }
            let init = spec.init.unwrap_or_default();
            (Method::Sag { variant, init, jit }, hyper)
        }
        None => {
            let (kind, full) = if spec.method == "fg" {
                (OptimizerKind::Sgd, true)
            } else {
                let kind = OptimizerKind::from_name(&spec.method)
                    .ok_or_else(|| HarnessError::Config(format!("unknown method `{}`", spec.method)))?;
                (kind, spec.full_gradient.unwrap_or(false))
            };
            if spec.init.is_some() || spec.jit.is_some() || spec.lambda.is_some() {
                return Err(HarnessError::Config(format!("`{}` takes no SAG options", spec.method)));
            }
            let mut hyper = HyperParams::for_kind(kind);
            if spec.method == "fg" {
                if let Some(l) = facts.lipschitz {
                    hyper.alpha = 1.0 / l;
                }
            }
            (Method::Classical { kind, full_gradient: full }, hyper)
        }
    };
    macro_rules! apply {
        ($($field:ident),*) => {$(
            if let Some(v) = spec.$field {
                hyper.$field = v;
            }
        )*};
    }
    apply!(alpha, beta1, beta2, epsilon, rprop_eta_plus, rprop_eta_minus, rprop_step_min, rprop_step_max, asgd_t0);
    if let Some(s) = spec.schedule {
        hyper.schedule = s;
    }
    hyper.validate()?;

    let batch = spec.batch.unwrap_or(1);
    if batch == 0 || batch > facts.n {
        return Err(HarnessError::Config(format!("batch {batch} must lie in 1..={}", facts.n)));
    }
    let full = matches!(rule, Method::Classical { full_gradient: true, .. });
    let iterations = match (cfg.iterations, cfg.epochs) {
        (Some(it), None) => it,
        (None, Some(ep)) => {
            if full {
                ep
            } else {
                ep * facts.n.div_ceil(batch) as u64
            }
        }
        _ => return Err(HarnessError::Config("set exactly one of `iterations` and `epochs`".into())),
    };
    Ok(ResolvedMethod {
        label: spec.label.clone().unwrap_or_else(|| spec.method.clone()),
        method: spec.method.clone(),
        rule,
        hyper,
        batch,
        iterations,
    })
}

impl ResolvedConfig {
    /// First 16 hex digits of the SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json).iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn method(&self, label: &str) -> Option<&ResolvedMethod> {
        self.methods.iter().find(|m| m.label == label)
    }
}
