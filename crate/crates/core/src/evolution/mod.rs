//! The generational loop.
//!
//! Each generation is ranked, the top unique solutions are copied forward
//! unchanged, and the rest of the next generation is bred by roulette
//! selection, crossover, mutation and stage compression. The loop halts on an
//! iteration cap, a stalled best solution, or (with no population growth) when
//! every member is a distinct non-dominated solution.

mod operators;
mod ranking;

pub use operators::{
    increment_probability, map_stage, mutate, mutate_genes, mutation_pmf,
    new_stage_probability, recombine, RouletteWheel,
};
pub use ranking::{
    dominates, elite_count, fitness, non_domination_levels, pareto_rank, RankedMember,
    RankedPopulation,
};

use std::collections::{BTreeSet, HashMap};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chromosome::Chromosome;
use crate::error::{Error, Result};
use crate::objectives::{Evaluate, Measurement};

/// Search parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaConfig {
    pub population_size: usize,
    pub mutation_rate: f64,
    pub crossover_rate: f64,
    pub elitism_fraction: f64,
    pub mutation_bias: f64,
    pub epsilon: f64,
    /// Population growth step when every slot holds an elite.
    pub inc: usize,
    pub max_iter: usize,
    /// Halt once the best solution is unchanged for this many generations.
    pub stall_generations: usize,
    pub max_stages: usize,
    pub seed: u64,
}

/// `min(round(n / 2), 10)`, at least 1.
pub fn default_max_stages(n: usize) -> usize {
    ((n as f64 / 2.0).round() as usize).clamp(1, 10)
}

impl GaConfig {
    /// Defaults for an `n`-feature problem.
    pub fn for_features(n: usize) -> Self {
        Self {
            population_size: 300,
            mutation_rate: 1.0 / n.max(1) as f64,
            crossover_rate: 0.8,
            elitism_fraction: 0.2,
            mutation_bias: 2.0,
            epsilon: 0.01,
            inc: 0,
            max_iter: 150,
            stall_generations: 20,
            max_stages: default_max_stages(n),
            seed: 0,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if n < 2 {
            return bad(format!("need at least 2 features for a two-stage start, got {n}"));
        }
        if self.population_size == 0 {
            return bad("population_size must be positive".into());
        }
        if !(self.mutation_rate > 0.0 && self.mutation_rate <= 1.0) {
            return bad(format!("mutation_rate must lie in (0, 1], got {}", self.mutation_rate));
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) {
            return bad(format!("crossover_rate must lie in [0, 1], got {}", self.crossover_rate));
        }
        if !(0.0..=1.0).contains(&self.elitism_fraction) {
            return bad(format!(
                "elitism_fraction must lie in [0, 1], got {}",
                self.elitism_fraction
            ));
        }
        if !(self.mutation_bias > 1.0 && self.mutation_bias.is_finite()) {
            return bad(format!("mutation_bias must exceed 1, got {}", self.mutation_bias));
        }
        if !(self.epsilon > 0.0) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if self.stall_generations == 0 {
            return bad("stall_generations must be positive".into());
        }
        if self.max_stages < 2 || self.max_stages > n {
            return bad(format!(
                "max_stages must lie in 2..={n}, got {}",
                self.max_stages
            ));
        }
        Ok(())
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

fn child_stream(generation: usize, index: usize) -> u64 {
    ((generation as u64) << 32) | index as u64
}

/// `population_size` two-stage chromosomes, each a mutation of the
/// one-stage solution, redrawn until it has exactly two stages.
pub fn init_population(cfg: &GaConfig, n: usize) -> Result<Vec<Chromosome>> {
    cfg.validate(n)?;
    let start = Chromosome::single_stage(n)?;
    Ok((0..cfg.population_size)
        .into_par_iter()
        .map(|i| {
            let mut rng = cfg.rng(child_stream(0, i));
            loop {
                let c = mutate(&start, cfg.mutation_rate, cfg.mutation_bias, cfg.max_stages, &mut rng);
                if c.stage_count() == 2 {
                    return c;
                }
            }
        })
        .collect())
}

/// Next target population size given this generation's elite count.
pub fn adjust_population_size(current: usize, elite_size: usize, inc: usize, initial: usize) -> usize {
    let mut size = current;
    if elite_size == size {
        size += inc;
    }
    if elite_size + inc < size && size > initial {
        size -= inc;
    }
    size
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HaltReason {
    MaxIterations,
    Stalled,
    FrontFillsPopulation,
}

/// What one generation looked like.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRecord {
    pub generation: usize,
    /// Target size `|G|` in force while this generation was bred.
    pub population_target: usize,
    pub members: usize,
    /// Distinct chromosomes, sorted.
    pub unique: Vec<Chromosome>,
    pub nondominated_unique: usize,
    /// Elites carried into the next generation (0 on the final generation).
    pub elite_size: usize,
    pub best: Chromosome,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    /// Distinct non-dominated members of the final generation, best fitness
    /// first.
    pub front: Vec<RankedMember>,
    pub generations: Vec<GenerationRecord>,
    pub halt: HaltReason,
}

impl RunOutcome {
    pub fn best(&self) -> &RankedMember {
        &self.front[0]
    }
}

fn evaluate_population(
    population: &[Chromosome],
    evaluator: &dyn Evaluate,
    memo: &mut HashMap<Chromosome, Measurement>,
) -> Result<Vec<(Chromosome, Measurement)>> {
    let fresh: Vec<&Chromosome> = population
        .iter()
        .filter(|c| !memo.contains_key(*c))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let measured = fresh
        .par_iter()
        .map(|c| evaluator.measure(c).map(|m| ((*c).clone(), m)))
        .collect::<Result<Vec<_>>>()?;
    memo.extend(measured);
    Ok(population
        .iter()
        .map(|c| (c.clone(), memo[c]))
        .collect())
}

/// Runs the search from a fresh initial population.
pub fn run(cfg: &GaConfig, n: usize, evaluator: &dyn Evaluate) -> Result<RunOutcome> {
    let population = init_population(cfg, n)?;
    run_from(cfg, population, evaluator)
}

/// Runs the search from a given starting population.
pub fn run_from(
    cfg: &GaConfig,
    mut population: Vec<Chromosome>,
    evaluator: &dyn Evaluate,
) -> Result<RunOutcome> {
    let n = population
        .first()
        .ok_or_else(|| Error::Config("empty starting population".into()))?
        .len();
    cfg.validate(n)?;
    if let Some(c) = population.iter().find(|c| c.len() != n || c.has_gaps()) {
        return Err(Error::InvalidChromosome(format!("{c} is not a canonical {n}-gene chromosome")));
    }

    let initial_size = cfg.population_size;
    let mut target = initial_size;
    let mut memo = HashMap::new();
    let mut generations = Vec::new();
    let mut stall = 0usize;
    let mut previous_best: Option<Chromosome> = None;
    let mut h = 0usize;

    loop {
        let measured = evaluate_population(&population, evaluator, &mut memo)?;
        let ranked = RankedPopulation::from_measurements(measured, cfg.epsilon)?;
        let unique = ranked.unique_by_fitness();
        let nondominated = unique.iter().filter(|m| m.rank == ranked.top_rank()).count();
        let best = unique[0].chromosome.clone();
        if previous_best.as_ref() == Some(&best) {
            stall += 1;
        } else {
            stall = 0;
        }
        previous_best = Some(best.clone());

        let halt = if h >= cfg.max_iter {
            Some(HaltReason::MaxIterations)
        } else if stall >= cfg.stall_generations {
            Some(HaltReason::Stalled)
        } else if cfg.inc == 0 && nondominated == target {
            Some(HaltReason::FrontFillsPopulation)
        } else {
            None
        };

        let mut sorted_unique: Vec<Chromosome> = unique.iter().map(|m| m.chromosome.clone()).collect();
        sorted_unique.sort();
        let mut record = GenerationRecord {
            generation: h,
            population_target: target,
            members: population.len(),
            unique: sorted_unique,
            nondominated_unique: nondominated,
            elite_size: 0,
            best,
        };

        if let Some(halt) = halt {
            generations.push(record);
            let front = ranked
                .nondominated_unique()
                .into_iter()
                .cloned()
                .collect();
            return Ok(RunOutcome {
                front,
                generations,
                halt,
            });
        }

        let elites = elite_count(unique.len(), cfg.elitism_fraction, nondominated);
        record.elite_size = elites;
        generations.push(record);
        let mut next: Vec<Chromosome> = unique[..elites]
            .iter()
            .map(|m| m.chromosome.clone())
            .collect();
        target = adjust_population_size(target, elites, cfg.inc, initial_size);

        let wheel = RouletteWheel::new(&ranked.fitness())?;
        let members = ranked.members();
        let children: Vec<Chromosome> = (0..target.saturating_sub(next.len()))
            .into_par_iter()
            .map(|i| {
                let mut rng = cfg.rng(child_stream(h + 1, i));
                let (a, b) = wheel.select_pair(&mut rng);
                let child = recombine(
                    &members[a].chromosome,
                    &members[b].chromosome,
                    cfg.crossover_rate,
                    &mut rng,
                );
                mutate(&child, cfg.mutation_rate, cfg.mutation_bias, cfg.max_stages, &mut rng)
            })
            .collect();
        next.extend(children);
        population = next;
        h += 1;
    }
}
