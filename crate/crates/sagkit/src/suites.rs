//! Named experiment presets.
//!
//! * `theorem1`: SAG with `α = 1/(16L)` on a random strongly convex
//!   quadratic sum (`n = 20`, `p = 5`, `μ/L = 0.1`), zero and centered
//!   tables, 20 seeds.
//! * `rosenbrock`, `rastrigin`: every method on the 2-D surface under
//!   `log(f + 1)`, split into two components with a zero-sum linear
//!   perturbation so that SAG has a real finite sum to work with. The
//!   methods use the defaults listed in [`surface_methods`].
//! * `sklearn-toys`: the network on every bundled dataset for 2000 epochs.

use crate::config::{DataSource, ExperimentConfig, MethodSpec, MetricsSpec, ModelKind, ProblemSpec};
use crate::data::BUNDLED;
use crate::error::{HarnessError, Result};
use sagkit_core::{InitMode, OptimizerKind};

pub const SUITES: [&str; 4] = ["theorem1", "rosenbrock", "rastrigin", "sklearn-toys"];

/// Step budget of the surface presets.
pub const SURFACE_ITERATIONS: u64 = 100_000;

/// Step size of plain SAG on the surfaces, where no Lipschitz constant is
/// available.
pub const SURFACE_SAG_ALPHA: f64 = 0.001;

/// Offset inside the logarithm of the surface presets. With the library
/// default of `1e-8` no method settles on log-Rosenbrock within the budget.
pub const SURFACE_LOG_DELTA: f64 = 1.0;

/// Component count and perturbation of the surface presets.
pub const SURFACE_COPIES: usize = 2;
pub const SURFACE_NOISE_SCALE: f64 = 2.0;
pub const SURFACE_NOISE_SEED: u64 = 1;

pub fn theorem1() -> ExperimentConfig {
    let centered = MethodSpec { label: Some("sag_centered".into()), init: Some(InitMode::Centered), ..MethodSpec::named("sag") };
    ExperimentConfig {
        name: "theorem1".into(),
        problem: ProblemSpec::Quadratic { n: 20, p: 5, condition_ratio: 0.1, problem_seed: Some(7), x0: None },
        methods: vec![MethodSpec::named("sag"), centered],
        iterations: Some(2000),
        epochs: None,
        seeds: Some((1..=20).collect()),
        record_every: Some(1),
        metrics: None,
        output: None,
    }
}

/// Every classical rule plus `sag`, `sag_sgd` and `sag_adam`.
pub fn surface_methods() -> Vec<MethodSpec> {
    let mut methods: Vec<MethodSpec> = OptimizerKind::ALL.iter().map(|k| MethodSpec::named(k.name())).collect();
    methods.push(MethodSpec { alpha: Some(SURFACE_SAG_ALPHA), ..MethodSpec::named("sag") });
    methods.push(MethodSpec { alpha: Some(0.01), ..MethodSpec::named("sag_sgd") });
    methods.push(MethodSpec::named("sag_adam"));
    methods
}

fn surface(name: &str, function: crate::config::FunctionName) -> ExperimentConfig {
    ExperimentConfig {
        name: name.into(),
        problem: ProblemSpec::TestFunction {
            function,
            dim: 2,
            a: None,
            log_scale: Some(true),
            delta: Some(SURFACE_LOG_DELTA),
            copies: Some(SURFACE_COPIES),
            noise_scale: Some(SURFACE_NOISE_SCALE),
            noise_seed: Some(SURFACE_NOISE_SEED),
            x0: None,
        },
        methods: surface_methods(),
        iterations: Some(SURFACE_ITERATIONS),
        epochs: None,
        seeds: None,
        record_every: Some(10),
        metrics: Some(MetricsSpec { window: None, tol: None }),
        output: None,
    }
}

pub fn rosenbrock() -> ExperimentConfig {
    surface("rosenbrock", crate::config::FunctionName::Rosenbrock)
}

pub fn rastrigin() -> ExperimentConfig {
    surface("rastrigin", crate::config::FunctionName::Rastrigin)
}

/// One config per bundled dataset.
pub fn sklearn_toys() -> Vec<ExperimentConfig> {
    BUNDLED
        .iter()
        .map(|name| ExperimentConfig {
            name: format!("sklearn-{name}"),
            problem: ProblemSpec::Dataset {
                source: DataSource::Bundled { bundled: name.to_string() },
                model: ModelKind::Mlp,
                class: None,
                output: None,
                hidden: None,
                lambda: None,
                standardize: None,
                split_seed: None,
                x0: None,
            },
            methods: ["sgd", "momentum", "adagrad", "adadelta", "adam", "sag", "sag_sgd", "sag_adam"]
                .iter()
                .map(|m| MethodSpec::named(m))
                .collect(),
            iterations: None,
            epochs: Some(2000),
            seeds: Some(vec![1]),
            record_every: Some(100),
            metrics: None,
            output: None,
        })
        .collect()
}

pub fn suite(name: &str) -> Result<Vec<ExperimentConfig>> {
    Ok(match name {
        "theorem1" => vec![theorem1()],
        "rosenbrock" => vec![rosenbrock()],
        "rastrigin" => vec![rastrigin()],
        "sklearn-toys" => sklearn_toys(),
        other => return Err(HarnessError::Config(format!("unknown suite `{other}`; expected one of {SUITES:?}"))),
    })
}
