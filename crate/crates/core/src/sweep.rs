//! MinFraction × scenario grid of independent solves.

use serde::{Deserialize, Serialize};

use crate::config::SolverConfig;
use crate::model::{Instance, Scenario};
use crate::solve::{solve, SolveError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub min_fraction: f64,
    pub scenario: Scenario,
    pub totals: Vec<f64>,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// Share of runs whose best schedule met every section's MinFraction.
    pub fairness_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub runs: usize,
    pub seed: u64,
    pub cells: Vec<SweepCell>,
}

impl SweepTable {
    pub fn cell(&self, min_fraction: f64, scenario: Scenario) -> Option<&SweepCell> {
        self.cells
            .iter()
            .find(|c| c.min_fraction == min_fraction && c.scenario == scenario)
    }

    /// Tab-separated, one row per cell.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("min_fraction\tscenario\tmean\tmin\tmax\tfairness_rate\n");
        for c in &self.cells {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\n",
                c.min_fraction, c.scenario, c.mean, c.min, c.max, c.fairness_rate
            ));
        }
        out
    }
}

/// Runs `config.anneal.runs` seeds for every (fraction, scenario) pair. The
/// same seeds are reused in every cell.
pub fn run_sweep(
    instance: &Instance,
    config: &SolverConfig,
    fractions: &[f64],
    scenarios: &[Scenario],
) -> Result<SweepTable, SolveError> {
    let mut cells = Vec::with_capacity(fractions.len() * scenarios.len());
    for &f in fractions {
        for &scenario in scenarios {
            let cfg = SolverConfig {
                min_fraction: Some(f),
                ..config.clone()
            };
            let outcome = solve(instance, &cfg, scenario)?;
            let totals: Vec<f64> = outcome.runs.iter().map(|r| r.breakdown.total).collect();
            let met = outcome.runs.iter().filter(|r| r.breakdown.components[6] == 0.0).count();
            cells.push(SweepCell {
                min_fraction: f,
                scenario,
                mean: totals.iter().sum::<f64>() / totals.len() as f64,
                min: totals.iter().copied().fold(f64::INFINITY, f64::min),
                max: totals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                fairness_rate: met as f64 / totals.len() as f64,
                totals,
            });
        }
    }
    Ok(SweepTable {
        runs: config.anneal.runs,
        seed: config.anneal.seed,
        cells,
    })
}
