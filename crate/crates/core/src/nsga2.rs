//! NSGA-II baseline: fast non-dominated sorting, crowding distance, binary
//! tournament, simulated binary crossover, polynomial mutation and elitist
//! (mu + lambda) survival.

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::archive::{dominates_unchecked, ParetoArchive};
use crate::error::{Error, Result};
use crate::model::{DecisionVector, EvaluationBudget, ObjectiveVector, Problem};
use crate::rng::RngStream;
use crate::ssw::{GenerationRecord, RunResult};

const NSGA2_STREAM_TAG: u64 = 0x6e73_6761;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Nsga2Config {
    pub population: usize,
    pub crossover_prob: f64,
    pub crossover_eta: f64,
    /// Per-variable mutation probability; `None` means `1/n`.
    pub mutation_prob: Option<f64>,
    pub mutation_eta: f64,
    pub budget: u64,
    pub seed: u64,
    /// Caps the generation count below what the budget allows.
    pub max_generations: Option<usize>,
    pub archive_cap: Option<usize>,
}

impl Default for Nsga2Config {
    fn default() -> Self {
        Self {
            population: 100,
            crossover_prob: 0.9,
            crossover_eta: 15.0,
            mutation_prob: None,
            mutation_eta: 20.0,
            budget: 30_000,
            seed: 0,
            max_generations: None,
            archive_cap: None,
        }
    }
}

impl Nsga2Config {
    pub fn validate(&self) -> Result<()> {
        if self.population < 4 || !self.population.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "NSGA-II population must be even and >= 4, got {}",
                self.population
            )));
        }
        let probs = [Some(self.crossover_prob), self.mutation_prob];
        if probs.iter().flatten().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::invalid("NSGA-II probabilities must lie in [0, 1]"));
        }
        if !(self.crossover_eta > 0.0 && self.mutation_eta > 0.0) {
            return Err(Error::invalid("NSGA-II distribution indices must be positive"));
        }
        Ok(())
    }

    /// Generations affordable after the initial population: `(budget - N) / N`.
    pub fn generations_for_budget(&self) -> Result<usize> {
        let n = self.population as u64;
        if self.budget < n {
            return Err(Error::BudgetTooSmall {
                budget: self.budget,
                required: n,
            });
        }
        let g = ((self.budget - n) / n) as usize;
        Ok(self.max_generations.map_or(g, |cap| g.min(cap)))
    }
}

/// Partition into successive non-dominated fronts (indices into `fs`).
pub fn nondominated_fronts<A: AsRef<[f64]>>(fs: &[A]) -> Vec<Vec<usize>> {
    let n = fs.len();
    let mut dominated_by_count = vec![0usize; n];
    let mut dominates_list: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (fs[i].as_ref(), fs[j].as_ref());
            if dominates_unchecked(a, b) {
                dominates_list[i].push(j);
                dominated_by_count[j] += 1;
            } else if dominates_unchecked(b, a) {
                dominates_list[j].push(i);
                dominated_by_count[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| dominated_by_count[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominates_list[i] {
                dominated_by_count[j] -= 1;
                if dominated_by_count[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(std::mem::replace(&mut current, next));
    }
    fronts
}

/// Non-domination rank of each point; rank 0 is the non-dominated set.
pub fn fast_nondominated_sort<A: AsRef<[f64]>>(fs: &[A]) -> Vec<usize> {
    let mut ranks = vec![0; fs.len()];
    for (r, front) in nondominated_fronts(fs).iter().enumerate() {
        for &i in front {
            ranks[i] = r;
        }
    }
    ranks
}

/// Crowding distance within one front. Boundary points get `+inf`; an
/// objective with zero range contributes nothing. Fronts of one or two
/// points are all boundary.
pub fn crowding_distance<A: AsRef<[f64]>>(front: &[A]) -> Vec<f64> {
    let n = front.len();
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    let m = front[0].as_ref().len();
    let mut dist = vec![0.0; n];
    let mut order: Vec<usize> = (0..n).collect();
    for k in 0..m {
        let value = |i: usize| front[i].as_ref()[k];
        order.sort_by(|&a, &b| value(a).total_cmp(&value(b)).then(a.cmp(&b)));
        let (lo, hi) = (value(order[0]), value(order[n - 1]));
        let range = hi - lo;
        if range <= 0.0 {
            continue;
        }
        dist[order[0]] = f64::INFINITY;
        dist[order[n - 1]] = f64::INFINITY;
        for w in 1..n - 1 {
            dist[order[w]] += (value(order[w + 1]) - value(order[w - 1])) / range;
        }
    }
    dist
}

#[derive(Debug, Clone)]
pub(crate) struct Individual {
    x: Vec<f64>,
    f: ObjectiveVector,
    rank: usize,
    crowding: f64,
}

/// Assigns rank and crowding to the whole pool and returns it ordered by
/// survival preference (rank ascending, crowding descending, index).
fn rank_and_order(pool: &mut [Individual]) -> Vec<usize> {
    let fronts = nondominated_fronts(&pool.iter().map(|ind| ind.f.as_slice()).collect::<Vec<_>>());
    let mut order = Vec::with_capacity(pool.len());
    for (r, front) in fronts.iter().enumerate() {
        let cd = crowding_distance(&front.iter().map(|&i| pool[i].f.as_slice()).collect::<Vec<_>>());
        for (&i, &d) in front.iter().zip(&cd) {
            pool[i].rank = r;
            pool[i].crowding = d;
        }
        let mut sorted = front.clone();
        sorted.sort_by(|&a, &b| pool[b].crowding.total_cmp(&pool[a].crowding).then(a.cmp(&b)));
        order.extend(sorted);
    }
    order
}

fn sbx_pair(
    p1: &[f64],
    p2: &[f64],
    lower: &[f64],
    upper: &[f64],
    eta: f64,
    rng: &mut RngStream,
) -> (Vec<f64>, Vec<f64>) {
    let mut c1 = p1.to_vec();
    let mut c2 = p2.to_vec();
    for i in 0..p1.len() {
        if rng.uniform() > 0.5 || (p1[i] - p2[i]).abs() <= 1e-14 {
            continue;
        }
        let (y1, y2) = if p1[i] < p2[i] { (p1[i], p2[i]) } else { (p2[i], p1[i]) };
        let (yl, yu) = (lower[i], upper[i]);
        let u = rng.uniform();
        let spread = |beta: f64| {
            let alpha = 2.0 - beta.powf(-(eta + 1.0));
            if u <= 1.0 / alpha {
                (u * alpha).powf(1.0 / (eta + 1.0))
            } else {
                (1.0 / (2.0 - u * alpha)).powf(1.0 / (eta + 1.0))
            }
        };
        let betaq = spread(1.0 + 2.0 * (y1 - yl) / (y2 - y1));
        let mut a = 0.5 * ((y1 + y2) - betaq * (y2 - y1));
        let betaq = spread(1.0 + 2.0 * (yu - y2) / (y2 - y1));
        let mut b = 0.5 * ((y1 + y2) + betaq * (y2 - y1));
        a = a.clamp(yl, yu);
        b = b.clamp(yl, yu);
        if rng.uniform() <= 0.5 {
            std::mem::swap(&mut a, &mut b);
        }
        c1[i] = a;
        c2[i] = b;
    }
    (c1, c2)
}

fn polynomial_mutation(x: &mut [f64], lower: &[f64], upper: &[f64], prob: f64, eta: f64, rng: &mut RngStream) {
    let pow = 1.0 / (eta + 1.0);
    for i in 0..x.len() {
        if rng.uniform() > prob {
            continue;
        }
        let (yl, yu) = (lower[i], upper[i]);
        let y = x[i];
        let d1 = (y - yl) / (yu - yl);
        let d2 = (yu - y) / (yu - yl);
        let r = rng.uniform();
        let deltaq = if r < 0.5 {
            let v = 2.0 * r + (1.0 - 2.0 * r) * (1.0 - d1).powf(eta + 1.0);
            v.powf(pow) - 1.0
        } else {
            let v = 2.0 * (1.0 - r) + 2.0 * (r - 0.5) * (1.0 - d2).powf(eta + 1.0);
            1.0 - v.powf(pow)
        };
        x[i] = (y + deltaq * (yu - yl)).clamp(yl, yu);
    }
}

/// Generation-by-generation NSGA-II state.
pub(crate) struct Nsga2State<'a, P: Problem + ?Sized> {
    problem: &'a P,
    config: Nsga2Config,
    rng: RngStream,
    pub(crate) population: Vec<Individual>,
    pub(crate) archive: ParetoArchive,
    pub(crate) budget: EvaluationBudget,
}

impl<'a, P: Problem + ?Sized> Nsga2State<'a, P> {
    pub(crate) fn init(problem: &'a P, config: &Nsga2Config) -> Result<Self> {
        config.validate()?;
        let budget = EvaluationBudget::new(config.budget);
        let mut rng = RngStream::keyed(config.seed, &[NSGA2_STREAM_TAG]);
        let archive = match config.archive_cap {
            Some(cap) => ParetoArchive::with_capacity_limit(cap),
            None => ParetoArchive::new(),
        };
        let bounds = problem.bounds();
        let xs: Vec<Vec<f64>> = (0..config.population)
            .map(|_| {
                bounds
                    .lower()
                    .iter()
                    .zip(bounds.upper())
                    .map(|(lo, hi)| lo + rng.uniform() * (hi - lo))
                    .collect()
            })
            .collect();
        let mut state = Self {
            problem,
            config: config.clone(),
            rng,
            population: Vec::new(),
            archive,
            budget,
        };
        state.population = state.evaluate_all(xs)?;
        let mut pool = std::mem::take(&mut state.population);
        rank_and_order(&mut pool);
        state.population = pool;
        Ok(state)
    }

    fn evaluate_all(&mut self, xs: Vec<Vec<f64>>) -> Result<Vec<Individual>> {
        let mut out = Vec::with_capacity(xs.len());
        for x in xs {
            let f = self.budget.evaluate(self.problem, &x)?;
            self.archive
                .insert(DecisionVector::from_vec_unchecked(x.clone()), f.clone());
            out.push(Individual {
                x,
                f,
                rank: 0,
                crowding: 0.0,
            });
        }
        Ok(out)
    }

    fn tournament(&mut self) -> usize {
        let n = self.population.len();
        let a = self.rng.random_range(0..n);
        let b = self.rng.random_range(0..n);
        let (pa, pb) = (&self.population[a], &self.population[b]);
        if pa.rank != pb.rank {
            return if pa.rank < pb.rank { a } else { b };
        }
        if pa.crowding != pb.crowding {
            return if pa.crowding > pb.crowding { a } else { b };
        }
        if self.rng.uniform() < 0.5 {
            a
        } else {
            b
        }
    }

    pub(crate) fn step(&mut self) -> Result<()> {
        let n_pop = self.config.population;
        let n_var = self.problem.n_var();
        let bounds = self.problem.bounds().clone();
        let (lower, upper) = (bounds.lower(), bounds.upper());
        let pm = self.config.mutation_prob.unwrap_or(1.0 / n_var as f64);

        let mut offspring = Vec::with_capacity(n_pop);
        while offspring.len() < n_pop {
            let i = self.tournament();
            let j = self.tournament();
            let (mut c1, mut c2) = if self.rng.uniform() <= self.config.crossover_prob {
                let (p1, p2) = (self.population[i].x.clone(), self.population[j].x.clone());
                sbx_pair(&p1, &p2, lower, upper, self.config.crossover_eta, &mut self.rng)
            } else {
                (self.population[i].x.clone(), self.population[j].x.clone())
            };
            polynomial_mutation(&mut c1, lower, upper, pm, self.config.mutation_eta, &mut self.rng);
            polynomial_mutation(&mut c2, lower, upper, pm, self.config.mutation_eta, &mut self.rng);
            offspring.push(c1);
            offspring.push(c2);
        }
        let children = self.evaluate_all(offspring)?;

        let mut pool = std::mem::take(&mut self.population);
        pool.extend(children);
        let order = rank_and_order(&mut pool);
        let keep: Vec<usize> = order.into_iter().take(n_pop).collect();
        let mut survivors: Vec<Individual> = keep.iter().map(|&i| pool[i].clone()).collect();
        // Re-rank within the survivors so tournament sees the new population.
        rank_and_order(&mut survivors);
        self.population = survivors;
        Ok(())
    }

    #[cfg(test)]
    fn rank_zero(&self) -> Vec<Vec<f64>> {
        self.population
            .iter()
            .filter(|ind| ind.rank == 0)
            .map(|ind| ind.f.to_vec())
            .collect()
    }
}

/// Runs NSGA-II until the next generation would exceed the budget.
///
/// Every evaluated point is offered to a Pareto archive, the same way SSW
/// maintains its archive, so indicators are computed on comparable sets.
pub fn run_nsga2<P: Problem + ?Sized>(problem: &P, config: &Nsga2Config) -> Result<RunResult> {
    let start = Instant::now();
    let generations = config.generations_for_budget()?;
    let mut state = Nsga2State::init(problem, config)?;
    let mut history = Vec::with_capacity(generations);
    for g in 0..generations {
        state.step()?;
        history.push(GenerationRecord::new(g + 1, state.budget.used(), &state.archive));
    }
    Ok(RunResult {
        archive: state.archive,
        final_population: state.population.iter().map(|ind| ind.f.clone()).collect(),
        generations_completed: generations,
        evaluations_used: state.budget.used(),
        wall_time_s: start.elapsed().as_secs_f64(),
        per_generation: history,
    })
}
