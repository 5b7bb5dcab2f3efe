//! The full acceptance matrix, run on a bounded worker pool.

use rayon::prelude::*;

use crate::config::{Evolution, ExperimentConfig, ExperimentKind, TheoryKind};
use crate::experiments::run_experiment;
use crate::report::Report;

pub const THREADS_VAR: &str = "COVLAB_THREADS";

/// Every experiment for both theories at default settings; evolution runs once
/// per integrator.
pub fn suite_configs(seed: u64) -> Vec<ExperimentConfig> {
    let mut configs = Vec::new();
    for theory in [TheoryKind::Kg, TheoryKind::Schrodinger] {
        for evolution in [Evolution::Spectral, Evolution::Stepped] {
            let mut cfg = ExperimentConfig::new(theory, ExperimentKind::Evolve);
            cfg.evolution = evolution;
            configs.push(cfg);
        }
        for experiment in [
            ExperimentKind::OmegaCheck,
            ExperimentKind::DarbouxCheck,
            ExperimentKind::BracketCheck,
            ExperimentKind::ActionResidual,
        ] {
            configs.push(ExperimentConfig::new(theory, experiment));
        }
    }
    for cfg in &mut configs {
        cfg.seed = seed;
    }
    configs
}

/// Worker count from `COVLAB_THREADS`; `None` lets rayon decide.
pub fn thread_limit() -> anyhow::Result<Option<usize>> {
    match std::env::var(THREADS_VAR) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => anyhow::bail!("{THREADS_VAR} must be a positive integer, got {v:?}"),
        },
        Err(_) => Ok(None),
    }
}

/// Runs the configs concurrently and concatenates the reports in input order.
pub fn run_all(configs: &[ExperimentConfig], threads: Option<usize>) -> anyhow::Result<Report> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build()?;
    let reports: Vec<Report> = pool.install(|| configs.par_iter().map(run_experiment).collect());
    let mut out = Report::default();
    for r in reports {
        out.extend(r);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_covers_every_experiment_for_both_theories() {
        let configs = suite_configs(7);
        assert_eq!(configs.len(), 12);
        assert!(configs.iter().all(|c| c.seed == 7 && c.validate().is_ok()));
        let labels: std::collections::HashSet<String> = configs.iter().map(|c| c.label()).collect();
        assert_eq!(labels.len(), configs.len());
    }

    #[test]
    fn order_is_independent_of_worker_count() {
        let configs: Vec<ExperimentConfig> = suite_configs(42)
            .into_iter()
            .filter(|c| c.experiment == ExperimentKind::OmegaCheck || c.experiment == ExperimentKind::Evolve)
            .collect();
        let strip = |r: Report| r.records.into_iter().map(|x| x.timed(0.0)).collect::<Vec<_>>();
        let one = strip(run_all(&configs, Some(1)).unwrap());
        let four = strip(run_all(&configs, Some(4)).unwrap());
        assert_eq!(one, four);
    }
}
