//! End-to-end solve: apply a configuration and scenario to an instance,
//! build PRA lists and waves, and run OFFICE one or more times.

use thiserror::Error;

use crate::anneal::{best_run, build_waves, run_many, AnnealError, RunResult, WavePlan};
use crate::config::{ConfigError, SolverConfig};
use crate::model::{Instance, ModelError, Scenario};
use crate::pra::{PraError, PraTable};

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Pra(#[from] PraError),
    #[error(transparent)]
    Anneal(#[from] AnnealError),
}

/// An instance ready for annealing.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub instance: Instance,
    pub pras: PraTable,
    pub plan: WavePlan,
    /// Caps relaxed to honor initial rooms under scenario R.
    pub warnings: Vec<String>,
}

/// Applies the config weights and MinFraction, then the scenario.
pub fn configure(instance: &Instance, config: &SolverConfig, scenario: Scenario) -> Result<(Instance, Vec<String>), SolveError> {
    config.validate()?;
    let mut inst = instance.with_weights(config.weights.clone())?;
    if let Some(f) = config.min_fraction {
        inst = inst.with_min_fraction(f)?;
    }
    Ok(inst.for_scenario(scenario))
}

pub fn prepare(instance: &Instance, config: &SolverConfig, scenario: Scenario) -> Result<Prepared, SolveError> {
    let (instance, warnings) = configure(instance, config, scenario)?;
    let pras = PraTable::build_limited(&instance, config.max_pras_per_section)?;
    let plan = build_waves(&instance, &config.anneal.waves)?;
    Ok(Prepared {
        instance,
        pras,
        plan,
        warnings,
    })
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub prepared: Prepared,
    pub runs: Vec<RunResult>,
    pub best: usize,
}

impl SolveOutcome {
    pub fn best_run(&self) -> &RunResult {
        &self.runs[self.best]
    }
}

pub fn solve(instance: &Instance, config: &SolverConfig, scenario: Scenario) -> Result<SolveOutcome, SolveError> {
    let prepared = prepare(instance, config, scenario)?;
    let runs = run_many(&prepared.instance, &prepared.pras, &prepared.plan, &config.anneal);
    let best = best_run(&runs).expect("at least one run");
    Ok(SolveOutcome { prepared, runs, best })
}
