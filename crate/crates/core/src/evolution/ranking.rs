//! Non-domination levels and the rank-exponent fitness.

use crate::chromosome::Chromosome;
use crate::error::{Error, Result};
use crate::objectives::{normalize_costs, Measurement, ObjectiveVector};

/// `a` dominates `b`: no worse in every objective, better in at least one.
/// All objectives are maximized.
pub fn dominates(a: &[f64; 3], b: &[f64; 3]) -> bool {
    let mut better = false;
    for i in 0..3 {
        if a[i] < b[i] {
            return false;
        }
        if a[i] > b[i] {
            better = true;
        }
    }
    better
}

/// Peel index of each vector: 0 for the first non-dominated set, 1 for the
/// set that becomes non-dominated once that one is removed, and so on.
pub fn non_domination_levels(vectors: &[[f64; 3]]) -> Vec<usize> {
    let n = vectors.len();
    // dominated_by[i]: how many live vectors dominate i
    let mut dominated_by = vec![0usize; n];
    let mut dominates_list: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in 0..n {
            if i != j && dominates(&vectors[i], &vectors[j]) {
                dominates_list[i].push(j);
                dominated_by[j] += 1;
            }
        }
    }
    let mut level = vec![usize::MAX; n];
    let mut current: Vec<usize> = (0..n).filter(|&i| dominated_by[i] == 0).collect();
    let mut t = 0;
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            level[i] = t;
            for &j in &dominates_list[i] {
                dominated_by[j] -= 1;
                if dominated_by[j] == 0 {
                    next.push(j);
                }
            }
        }
        current = next;
        t += 1;
    }
    level
}

/// Flipped levels: `rank = t* - t`, so the first front carries the largest
/// value and the last peeled set carries 0.
pub fn pareto_rank(vectors: &[[f64; 3]]) -> Vec<usize> {
    let levels = non_domination_levels(vectors);
    let t_star = levels.iter().copied().max().unwrap_or(0);
    levels.into_iter().map(|t| t_star - t).collect()
}

/// `gamma = max(norm)/min(norm) + epsilon` and `f = gamma^rank * norm`.
pub fn fitness(ranks: &[usize], norms: &[f64], epsilon: f64) -> Result<(f64, Vec<f64>)> {
    let lo = norms.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = norms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(lo > 0.0) {
        return Err(Error::Internal(format!(
            "aggregate objective must be positive, smallest is {lo}"
        )));
    }
    let gamma = hi / lo + epsilon;
    let f = ranks
        .iter()
        .zip(norms)
        .map(|(&r, &e)| gamma.powi(r as i32) * e)
        .collect();
    Ok((gamma, f))
}

/// Number of unique solutions copied unchanged into the next generation.
pub fn elite_count(unique: usize, fraction: f64, nondominated_unique: usize) -> usize {
    ((fraction * unique as f64).round() as usize).max(nondominated_unique)
}

/// One member of a ranked generation.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedMember {
    pub chromosome: Chromosome,
    pub objectives: ObjectiveVector,
    pub rank: usize,
    pub fitness: f64,
}

/// A generation with ranks and fitness filled in.
#[derive(Debug, Clone)]
pub struct RankedPopulation {
    members: Vec<RankedMember>,
    lower_norm: f64,
    upper_norm: f64,
    gamma: f64,
    top_rank: usize,
}

impl RankedPopulation {
    /// Normalizes costs against this population, then ranks.
    pub fn from_measurements(
        members: Vec<(Chromosome, Measurement)>,
        epsilon: f64,
    ) -> Result<Self> {
        let raw: Vec<f64> = members.iter().map(|(_, m)| m.raw_cost).collect();
        let inverse = normalize_costs(&raw)?;
        let objs = members
            .into_iter()
            .zip(inverse)
            .map(|((c, m), g3)| (c, ObjectiveVector::new(m, g3)))
            .collect();
        Self::from_objectives(objs, epsilon)
    }

    pub fn from_objectives(members: Vec<(Chromosome, ObjectiveVector)>, epsilon: f64) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::Domain("cannot rank an empty population".into()));
        }
        let vectors: Vec<[f64; 3]> = members.iter().map(|(_, o)| o.maximized()).collect();
        let ranks = pareto_rank(&vectors);
        let norms: Vec<f64> = members.iter().map(|(_, o)| o.norm()).collect();
        let (gamma, fit) = fitness(&ranks, &norms, epsilon)?;
        let lower_norm = norms.iter().copied().fold(f64::INFINITY, f64::min);
        let upper_norm = norms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let top_rank = ranks.iter().copied().max().unwrap_or(0);
        let members = members
            .into_iter()
            .zip(ranks)
            .zip(fit)
            .map(|(((chromosome, objectives), rank), fitness)| RankedMember {
                chromosome,
                objectives,
                rank,
                fitness,
            })
            .collect();
        Ok(Self {
            members,
            lower_norm,
            upper_norm,
            gamma,
            top_rank,
        })
    }

    pub fn members(&self) -> &[RankedMember] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn norm_bounds(&self) -> (f64, f64) {
        (self.lower_norm, self.upper_norm)
    }

    /// Rank carried by the first non-dominated set (`t*`).
    pub fn top_rank(&self) -> usize {
        self.top_rank
    }

    pub fn fitness(&self) -> Vec<f64> {
        self.members.iter().map(|m| m.fitness).collect()
    }

    /// Distinct chromosomes, best fitness first; ties by gene vector.
    pub fn unique_by_fitness(&self) -> Vec<&RankedMember> {
        let mut seen = std::collections::HashSet::new();
        let mut out: Vec<&RankedMember> = self
            .members
            .iter()
            .filter(|m| seen.insert(&m.chromosome))
            .collect();
        out.sort_by(|a, b| {
            b.fitness
                .total_cmp(&a.fitness)
                .then_with(|| a.chromosome.cmp(&b.chromosome))
        });
        out
    }

    /// Distinct members of the first non-dominated set, best fitness first.
    pub fn nondominated_unique(&self) -> Vec<&RankedMember> {
        self.unique_by_fitness()
            .into_iter()
            .filter(|m| m.rank == self.top_rank)
            .collect()
    }
}
