//! Seeded execution of a resolved config.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use sagkit_core::linalg;
use sagkit_core::mlmodels::{split_80_20, standardize, LeastSquares, Logistic, MlpProblem};
use sagkit_core::testfns::{as_finite_sum, LogScale, Surface, TestFunction};
use sagkit_core::{
    Error, FiniteSum, IndexSampler, LinearModel, OptimizerState, Quadratic, Regularized, SagOptimizer, SamplingMode,
};

use crate::config::{
    DataSource, ExperimentConfig, FunctionName, Method, ModelKind, ProblemFacts, ResolvedConfig, ResolvedMethod,
    ResolvedProblem, X0Spec,
};
use crate::data::{bundled, load_csv};
use crate::error::{HarnessError, Result};

type DynProblem = Box<dyn FiniteSum + Send + Sync>;
type DynLinear = Box<dyn LinearModel + Send + Sync>;

/// A problem instance built from its resolved description.
pub struct BuiltProblem {
    /// Objective without the exactly known `(λ/2)‖x‖²` term.
    pub base: DynProblem,
    /// The same data as a linear model, for scalar-slot SAG.
    pub linear: Option<DynLinear>,
    pub lambda: f64,
    /// Parameter count of the network, for seeded initialization.
    mlp_init: Option<sagkit_core::mlmodels::Mlp>,
}

impl BuiltProblem {
    pub fn build(problem: &ResolvedProblem) -> Result<Self> {
        let plain = |base: DynProblem| Self { base, linear: None, lambda: 0.0, mlp_init: None };
        Ok(match problem {
            ResolvedProblem::TestFunction { function, dim, a, log_scale, delta, copies, noise_scale, noise_seed, .. } => {
                let f = match function {
                    FunctionName::Rosenbrock => TestFunction::rosenbrock(*dim)?,
                    FunctionName::RosenbrockChained => TestFunction::rosenbrock_chained(*dim)?,
                    FunctionName::Rastrigin => TestFunction::rastrigin(*dim, *a)?,
                };
                let surface = if *log_scale { Surface::Log(LogScale::new(f, *delta)?) } else { Surface::Plain(f) };
                plain(Box::new(as_finite_sum(surface, *copies, *noise_seed, *noise_scale)?))
            }
            ResolvedProblem::Quadratic { n, p, condition_ratio, problem_seed, .. } => {
                plain(Box::new(Quadratic::random_least_squares(*n, *p, *condition_ratio, *problem_seed)?))
            }
            ResolvedProblem::ScalarQuadratic { centers, .. } => plain(Box::new(Quadratic::scalar(centers)?)),
            ResolvedProblem::Dataset { source, model, class, output, hidden, lambda, standardize: std, split_seed, .. } => {
                let ds = match source {
                    DataSource::Bundled { bundled: name } => bundled(name)?,
                    DataSource::File { path, schema } => load_csv(path, schema)?,
                };
                let (mut train, mut val) = split_80_20(&ds, *split_seed)?;
                if *std {
                    standardize(&mut train, &mut val);
                }
                let (base, linear, mlp_init): (DynProblem, Option<DynLinear>, _) = match model {
                    ModelKind::LeastSquares => {
                        let m = LeastSquares::from_dataset(&train, *output)?;
                        (Box::new(m.clone()), Some(Box::new(m)), None)
                    }
                    ModelKind::Logistic => {
                        let m = Logistic::one_vs_rest(&train, *class)?;
                        (Box::new(m.clone()), Some(Box::new(m)), None)
                    }
                    ModelKind::Mlp => {
                        let m = MlpProblem::new(train, *hidden)?;
                        let mlp = *m.mlp();
                        (Box::new(m), None, Some(mlp))
                    }
                };
                Self { base, linear, lambda: *lambda, mlp_init }
            }
        })
    }

    pub fn facts(&self) -> ProblemFacts {
        ProblemFacts {
            n: self.base.components(),
            lipschitz: self.base.lipschitz().map(|l| l + self.lambda),
            linear: self.linear.is_some(),
        }
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    /// Starting point for `seed`.
    pub fn x0(&self, spec: &X0Spec, seed: u64) -> Result<Vec<f64>> {
        let p = self.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        Ok(match spec {
            X0Spec::Zeros => vec![0.0; p],
            X0Spec::Fixed { values } => {
                linalg::check_dim(p, values.len())?;
                values.clone()
            }
            X0Spec::Uniform { low, high } => {
                if low.partial_cmp(high) != Some(std::cmp::Ordering::Less) {
                    return Err(HarnessError::Config("x0 range needs low < high".into()));
                }
                (0..p).map(|_| rng.random_range(*low..*high)).collect()
            }
            X0Spec::ModelInit => match &self.mlp_init {
                Some(m) => m.init(seed),
                None => return Err(HarnessError::Config("model_init applies to networks only".into())),
            },
        })
    }
}

/// Deterministic sampler seed for a run seed.
pub fn sampler_seed(seed: u64) -> u64 {
    seed
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    /// Non-finite values or a magnitude above the divergence threshold
    /// after update `iteration`.
    Diverged { iteration: u64 },
}

impl RunStatus {
    pub fn label(&self) -> String {
        match self {
            RunStatus::Completed => "completed".into(),
            RunStatus::Diverged { iteration } => format!("diverged@{iteration}"),
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        if s == "completed" {
            return Some(RunStatus::Completed);
        }
        s.strip_prefix("diverged@")?.parse().ok().map(|iteration| RunStatus::Diverged { iteration })
    }
}

/// One recorded point of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub k: u64,
    pub loss: f64,
    pub dist_to_opt: Option<f64>,
    /// Step size of the next update.
    pub lr: f64,
    /// Seconds since the start of the run; never written to trajectory
    /// files.
    pub wall_clock: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub label: String,
    pub seed: u64,
    pub config_hash: String,
    pub rows: Vec<Row>,
    pub status: RunStatus,
    pub final_x: Vec<f64>,
    /// Non-fatal notices, e.g. a non-positive shrink factor.
    pub notices: Vec<String>,
}

enum Driver {
    Classical { state: OptimizerState, full: bool },
    Sag { opt: SagOptimizer, jit: bool },
}

impl Driver {
    fn iterate(&self) -> &[f64] {
        match self {
            Driver::Classical { state, .. } => state.iterate(),
            Driver::Sag { opt, .. } => opt.x(),
        }
    }

    fn lr(&self) -> f64 {
        match self {
            Driver::Classical { state, .. } => state.current_lr(),
            Driver::Sag { opt, .. } => opt.current_lr(),
        }
    }
}

/// Runs one (method, seed) cell.
pub fn run_cell(cfg: &ResolvedConfig, method: &ResolvedMethod, seed: u64, hash: &str) -> Result<RunRecord> {
    let built = BuiltProblem::build(&cfg.problem)?;
    let objective = Regularized::new(&*built.base, built.lambda)?;
    let n = built.base.components();
    let p = built.dim();
    let x0 = built.x0(cfg.problem.x0(), seed)?;
    let mode = if method.batch == 1 {
        SamplingMode::UniformSingle
    } else {
        SamplingMode::MinibatchWithoutReplacement(method.batch)
    };
    let mut sampler = IndexSampler::new(n, mode, sampler_seed(seed))?;
    let mut driver = match method.rule {
        Method::Classical { kind, full_gradient } => {
            Driver::Classical { state: OptimizerState::new(kind, method.hyper, x0)?, full: full_gradient }
        }
        Method::Sag { variant, init, jit } => {
            if jit {
                let linear = built.linear.as_deref().ok_or_else(|| HarnessError::Config("jit needs a linear model".into()))?;
                Driver::Sag { opt: SagOptimizer::new_jit(variant, method.hyper, linear, x0)?, jit: true }
            } else if matches!(variant, sagkit_core::SagVariant::ExactRegularized { .. }) {
                Driver::Sag { opt: SagOptimizer::new(variant, method.hyper, init, &*built.base, x0)?, jit: false }
            } else {
                Driver::Sag { opt: SagOptimizer::new(variant, method.hyper, init, &objective, x0)?, jit: false }
            }
        }
    };

    let minimizer = objective.minimizer().map(<[f64]>::to_vec);
    let start = Instant::now();
    let mut rows = Vec::new();
    let mut notices = Vec::new();
    let threshold = cfg.divergence_threshold;
    let record = |k: u64, driver: &Driver, rows: &mut Vec<Row>| -> bool {
        let x = driver.iterate();
        let loss = objective.value(x);
        if !loss.is_finite() || loss.abs() > threshold {
            return false;
        }
        rows.push(Row {
            k,
            loss,
            dist_to_opt: minimizer.as_ref().map(|m| linalg::distance(x, m)),
            lr: driver.lr(),
            wall_clock: start.elapsed().as_secs_f64(),
        });
        true
    };

    let mut status = RunStatus::Completed;
    if !record(0, &driver, &mut rows) {
        status = RunStatus::Diverged { iteration: 0 };
    }
    let mut grad = vec![0.0; p];
    let mut k = 0;
    while status == RunStatus::Completed && k < method.iterations {
        let stepped = match &mut driver {
            Driver::Classical { state, full } => {
                let point = state.lookahead();
                if *full {
                    objective.full_gradient_into(&point, &mut grad);
                } else {
                    objective.batch_gradient_into(sampler.sample(), &point, &mut grad);
                }
                state.step(&grad).map(|_| ())
            }
            Driver::Sag { opt, jit } => {
                let batch = sampler.sample();
                let result = if *jit {
                    opt.step_jit(built.linear.as_deref().expect("checked above"), batch)
                } else if matches!(opt.variant(), sagkit_core::SagVariant::ExactRegularized { .. }) {
                    opt.step(&*built.base, batch)
                } else {
                    opt.step(&objective, batch)
                };
                result.map(|s| {
                    if s != sagkit_core::StepStatus::Ok && notices.is_empty() {
                        notices.push(format!("non-positive shrink factor at update {k}"));
                    }
                })
            }
        };
        k += 1;
        match stepped {
            Ok(()) => {}
            Err(Error::Diverged { .. }) => {
                status = RunStatus::Diverged { iteration: k };
                break;
            }
            Err(e) => return Err(e.into()),
        }
        if linalg::norm(driver.iterate()) > threshold {
            status = RunStatus::Diverged { iteration: k };
            break;
        }
        if (k % cfg.record_every == 0 || k == method.iterations) && !record(k, &driver, &mut rows) {
            status = RunStatus::Diverged { iteration: k };
        }
    }

    Ok(RunRecord {
        label: method.label.clone(),
        seed,
        config_hash: hash.to_string(),
        rows,
        status,
        final_x: driver.iterate().to_vec(),
        notices,
    })
}

/// Resolves `config` against its problem.
pub fn resolve(config: &ExperimentConfig) -> Result<ResolvedConfig> {
    let problem = config.resolve_problem()?;
    let built = BuiltProblem::build(&problem)?;
    config.resolve(built.facts())
}

/// Runs every (method, seed) cell of a resolved config, in parallel.
/// Records come back in method-major, seed-minor order.
pub fn run_resolved(cfg: &ResolvedConfig) -> Result<Vec<RunRecord>> {
    let hash = cfg.hash();
    let cells: Vec<(&ResolvedMethod, u64)> =
        cfg.methods.iter().flat_map(|m| cfg.seeds.iter().map(move |&s| (m, s))).collect();
    cells.into_par_iter().map(|(m, s)| run_cell(cfg, m, s, &hash)).collect()
}

/// Resolves and runs a config.
pub fn run_experiment(config: &ExperimentConfig) -> Result<(ResolvedConfig, Vec<RunRecord>)> {
    let resolved = resolve(config)?;
    let records = run_resolved(&resolved)?;
    Ok((resolved, records))
}
