//! Stochastic steepest-weights optimizer.
//!
//! A population of `N` particles starts uniformly in the box. Each
//! generation every particle takes one Euler-Maruyama step along the
//! min-norm common descent direction plus Gaussian noise, is clamped back
//! into the box, and the new population is evaluated and offered to an
//! external Pareto archive. The run stops when the next generation would
//! exceed the evaluation budget.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::archive::ParetoArchive;
use crate::descent::descent_direction;
use crate::dynamics::{em_step_in_place, project_box_in_place, StepParams};
use crate::error::{Error, Result};
use crate::model::{DecisionVector, EvaluationBudget, ObjectiveVector, Problem};
use crate::rng::RngStream;

const SSW_INIT_TAG: u64 = 0;
const SSW_NOISE_TAG: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SswConfig {
    pub population: usize,
    pub sigma: f64,
    pub eps: f64,
    pub budget: u64,
    pub seed: u64,
    /// Finite-difference step; `None` uses `max(1e-6, 1e-6 * ||x||_inf)`.
    pub fd_step: Option<f64>,
    pub use_analytic_jacobian: bool,
    /// Caps the generation count below what the budget allows.
    pub max_generations: Option<usize>,
    pub archive_cap: Option<usize>,
}

impl Default for SswConfig {
    fn default() -> Self {
        Self {
            population: 100,
            sigma: 0.05,
            eps: 0.15,
            budget: 30_000,
            seed: 0,
            fd_step: None,
            use_analytic_jacobian: false,
            max_generations: None,
            archive_cap: None,
        }
    }
}

/// Archive snapshot at the end of a generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub generation: usize,
    pub evaluations_used: u64,
    pub archive_size: usize,
    /// Componentwise minimum over the archive.
    pub ideal_point: Vec<f64>,
}

impl GenerationRecord {
    pub(crate) fn new(generation: usize, evaluations_used: u64, archive: &ParetoArchive) -> Self {
        let m = archive.entries().first().map_or(0, |e| e.f.len());
        let mut ideal = vec![f64::INFINITY; m];
        for e in archive.entries() {
            for (best, v) in ideal.iter_mut().zip(e.f.iter()) {
                *best = best.min(*v);
            }
        }
        Self {
            generation,
            evaluations_used,
            archive_size: archive.len(),
            ideal_point: ideal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub archive: ParetoArchive,
    pub final_population: Vec<ObjectiveVector>,
    pub generations_completed: usize,
    pub evaluations_used: u64,
    pub wall_time_s: f64,
    pub per_generation: Vec<GenerationRecord>,
}

/// Cost of one generation in evaluations.
pub fn cost_per_generation(population: usize, n_var: usize, analytic: bool) -> u64 {
    let per_particle = if analytic { 1 } else { 2 * n_var as u64 + 1 };
    population as u64 * per_particle
}

/// Generations that fit in `budget` after the `N` initial evaluations.
pub fn generations_for_budget(budget: u64, population: usize, n_var: usize, analytic: bool) -> Result<usize> {
    if population == 0 || n_var == 0 {
        return Err(Error::invalid("population and dimension must be positive"));
    }
    let init = population as u64;
    if budget < init {
        return Err(Error::BudgetTooSmall {
            budget,
            required: init,
        });
    }
    Ok(((budget - init) / cost_per_generation(population, n_var, analytic)) as usize)
}

impl SswConfig {
    pub fn validate<P: Problem + ?Sized>(&self, problem: &P) -> Result<()> {
        if self.population == 0 {
            return Err(Error::invalid("population must be at least 1"));
        }
        StepParams::new(self.sigma, self.eps)?;
        if let Some(h) = self.fd_step {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::invalid(format!("fd_step must be positive, got {h}")));
            }
        }
        if self.use_analytic_jacobian {
            let probe = problem.bounds().lower().to_vec();
            if problem.analytic_jacobian(&probe).is_none() {
                return Err(Error::invalid(format!(
                    "{} has no analytic jacobian",
                    problem.name()
                )));
            }
        }
        Ok(())
    }
}

fn noise_stream(seed: u64, generation: usize, particle: usize) -> RngStream {
    RngStream::keyed(seed, &[SSW_NOISE_TAG, generation as u64, particle as u64])
}

/// One particle update: descent direction, noise, step, projection.
fn advance_particle<P: Problem + ?Sized>(
    problem: &P,
    x: &[f64],
    config: &SswConfig,
    params: StepParams,
    budget: &EvaluationBudget,
    generation: usize,
    particle: usize,
) -> Result<Vec<f64>> {
    let d = descent_direction(problem, x, config.fd_step, budget, config.use_analytic_jacobian)?;
    let eta = noise_stream(config.seed, generation, particle).gaussian_draw(x.len());
    let mut next = x.to_vec();
    em_step_in_place(&mut next, &d.q, params, &eta).map_err(|e| match e {
        Error::NumericalOverflow { context, partial } => Error::NumericalOverflow {
            context: format!("{context} (generation {generation}, particle {particle})"),
            partial,
        },
        other => other,
    })?;
    project_box_in_place(&mut next, problem.bounds());
    Ok(next)
}

fn with_context(e: Error, generation: usize) -> Error {
    match e {
        Error::Evaluation(msg) => Error::Evaluation(format!("generation {generation}: {msg}")),
        other => other,
    }
}

pub fn run_ssw<P: Problem + ?Sized>(problem: &P, config: &SswConfig) -> Result<RunResult> {
    let start = Instant::now();
    config.validate(problem)?;
    let params = StepParams::new(config.sigma, config.eps)?;
    let n_var = problem.n_var();
    let mut generations = generations_for_budget(
        config.budget,
        config.population,
        n_var,
        config.use_analytic_jacobian,
    )?;
    if let Some(cap) = config.max_generations {
        generations = generations.min(cap);
    }

    let budget = EvaluationBudget::new(config.budget);
    let mut archive = match config.archive_cap {
        Some(cap) => ParetoArchive::with_capacity_limit(cap),
        None => ParetoArchive::new(),
    };

    let bounds = problem.bounds();
    let mut init = RngStream::keyed(config.seed, &[SSW_INIT_TAG]);
    let mut population: Vec<Vec<f64>> = (0..config.population)
        .map(|_| {
            bounds
                .lower()
                .iter()
                .zip(bounds.upper())
                .map(|(lo, hi)| lo + init.uniform() * (hi - lo))
                .collect()
        })
        .collect();

    let evaluate_population = |pop: &[Vec<f64>]| -> Result<Vec<ObjectiveVector>> {
        pop.par_iter().map(|x| budget.evaluate(problem, x)).collect()
    };

    let mut objectives = evaluate_population(&population).map_err(|e| with_context(e, 0))?;
    for (x, f) in population.iter().zip(&objectives) {
        archive.insert(DecisionVector::from_vec_unchecked(x.clone()), f.clone());
    }

    let mut history = Vec::with_capacity(generations);
    for g in 0..generations {
        population = population
            .par_iter()
            .enumerate()
            .map(|(i, x)| advance_particle(problem, x, config, params, &budget, g, i))
            .collect::<Result<_>>()
            .map_err(|e| with_context(e, g + 1))?;
        objectives = evaluate_population(&population).map_err(|e| with_context(e, g + 1))?;
        for (x, f) in population.iter().zip(&objectives) {
            archive.insert(DecisionVector::from_vec_unchecked(x.clone()), f.clone());
        }
        history.push(GenerationRecord::new(g + 1, budget.used(), &archive));
    }

    Ok(RunResult {
        archive,
        final_population: objectives,
        generations_completed: generations,
        evaluations_used: budget.used(),
        wall_time_s: start.elapsed().as_secs_f64(),
        per_generation: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::archive::dominates_unchecked;
    use crate::problems::{Dtlz2, QuadraticFamily};

    #[test]
    fn generation_counts() {
        assert_eq!(generations_for_budget(30_000, 100, 12, false).unwrap(), 11);
        assert_eq!(generations_for_budget(100, 100, 12, false).unwrap(), 0);
        assert_eq!(generations_for_budget(30_000, 100, 12, true).unwrap(), 299);
        assert!(matches!(
            generations_for_budget(99, 100, 12, false),
            Err(Error::BudgetTooSmall { budget: 99, required: 100 })
        ));
    }

    #[test]
    fn budget_exactness_and_box_containment() {
        let p = Dtlz2::new(3, 4).unwrap();
        let config = SswConfig { population: 10, budget: 1_000, seed: 5, ..Default::default() };
        let r = run_ssw(&p, &config).unwrap();
        // n = 6: each generation costs 10 * 13.
        assert_eq!(r.generations_completed, 7);
        assert_eq!(r.evaluations_used, 10 + 7 * 10 * 13);
        assert!(r.evaluations_used <= 1_000);
        for e in r.archive.entries() {
            assert!(p.bounds().contains(&e.x));
        }
        assert!(r.archive.is_mutually_nondominated());
    }

    #[test]
    fn analytic_budget_counts_only_population_evaluations() {
        let p = Dtlz2::new(3, 4).unwrap();
        let config = SswConfig {
            population: 10,
            budget: 1_000,
            use_analytic_jacobian: true,
            ..Default::default()
        };
        let r = run_ssw(&p, &config).unwrap();
        assert_eq!(r.generations_completed, 99);
        assert_eq!(r.evaluations_used, 1_000);
    }

    #[test]
    fn initialization_only_when_budget_equals_population() {
        let p = Dtlz2::new(3, 4).unwrap();
        let r = run_ssw(&p, &SswConfig { population: 10, budget: 10, ..Default::default() }).unwrap();
        assert_eq!(r.generations_completed, 0);
        assert_eq!(r.evaluations_used, 10);
        assert!(!r.archive.is_empty());
        assert!(matches!(
            run_ssw(&p, &SswConfig { population: 10, budget: 9, ..Default::default() }),
            Err(Error::BudgetTooSmall { .. })
        ));
    }

    #[test]
    fn seeded_runs_are_identical() {
        let p = Dtlz2::new(3, 4).unwrap();
        let config = SswConfig { population: 16, budget: 3_000, seed: 77, ..Default::default() };
        let a = run_ssw(&p, &config).unwrap();
        let b = run_ssw(&p, &config).unwrap();
        assert_eq!(a.archive, b.archive);
        assert_eq!(a.final_population, b.final_population);
        let c = run_ssw(&p, &SswConfig { seed: 78, ..config }).unwrap();
        assert_ne!(a.archive, c.archive);
    }

    #[test]
    fn results_do_not_depend_on_thread_count() {
        let p = Dtlz2::new(3, 4).unwrap();
        let config = SswConfig { population: 16, budget: 3_000, seed: 1, ..Default::default() };
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| run_ssw(&p, &config)).unwrap();
        let b = four.install(|| run_ssw(&p, &config)).unwrap();
        assert_eq!(a.archive, b.archive);
    }

    #[test]
    fn noise_free_descent_on_convex_quadratic() {
        let q = QuadraticFamily::new(vec![vec![0.5, -0.5, 0.25]], vec![1.0], None).unwrap();
        let config = SswConfig {
            population: 8,
            sigma: 0.1,
            eps: 0.0,
            budget: 8 + 30 * 8 * 7,
            seed: 3,
            ..Default::default()
        };
        let r = run_ssw(&q, &config).unwrap();
        assert_eq!(r.generations_completed, 30);
        let best: Vec<f64> = r.per_generation.iter().map(|g| g.ideal_point[0]).collect();
        for w in best.windows(2) {
            assert!(w[1] <= w[0]);
        }
        assert!(*best.last().unwrap() < 1e-3);
    }

    #[test]
    fn archive_never_loses_ground() {
        let p = Dtlz2::new(3, 4).unwrap();
        let config = SswConfig { population: 12, budget: 2_000, seed: 4, ..Default::default() };
        let mut snapshots = Vec::new();
        for g in 0..=5 {
            let r = run_ssw(&p, &SswConfig { max_generations: Some(g), ..config.clone() }).unwrap();
            snapshots.push(r.archive);
        }
        for w in snapshots.windows(2) {
            for old in w[0].entries() {
                let covered = w[1]
                    .entries()
                    .iter()
                    .any(|e| e.f == old.f || dominates_unchecked(&e.f, &old.f));
                assert!(covered);
            }
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let p = Dtlz2::new(3, 4).unwrap();
        assert!(run_ssw(&p, &SswConfig { population: 0, ..Default::default() }).is_err());
        assert!(run_ssw(&p, &SswConfig { sigma: 0.0, ..Default::default() }).is_err());
        assert!(run_ssw(&p, &SswConfig { eps: -1.0, ..Default::default() }).is_err());
    }
}
