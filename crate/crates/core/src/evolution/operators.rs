//! Selection, mutation and recombination.

use rand::Rng;
use statrs::function::gamma::ln_gamma;

use crate::chromosome::Chromosome;
use crate::error::{Error, Result};

/// Beta-binomial(`stages`, 1, `beta`) mass over stage assignments
/// `0..=stages`; assigning `stages` opens a new stage.
///
/// `P(j) = C(m, j) B(j + 1, m - j + beta) / B(1, beta)`, with mean
/// `m / (beta + 1)`. Decreasing in `j` whenever `beta > 1`.
pub fn mutation_pmf(stages: usize, beta: f64) -> Vec<f64> {
    let m = stages as f64;
    let ln_b = |a: f64, b: f64| ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b);
    let ln_b1 = -beta.ln(); // B(1, beta) = 1 / beta
    (0..=stages)
        .map(|j| {
            let j = j as f64;
            let ln_choose = ln_gamma(m + 1.0) - ln_gamma(j + 1.0) - ln_gamma(m - j + 1.0);
            (ln_choose + ln_b(j + 1.0, m - j + beta) - ln_b1).exp()
        })
        .collect()
}

/// Probability of a single gene being sent to the new stage `stages`:
/// `beta * Gamma(m + 1) Gamma(beta) / Gamma(m + beta + 1)`.
pub fn new_stage_probability(stages: usize, beta: f64) -> f64 {
    let m = stages as f64;
    beta * (ln_gamma(m + 1.0) + ln_gamma(beta) - ln_gamma(m + beta + 1.0)).exp()
}

/// Probability that one mutation pass over `n` genes opens a new stage.
pub fn increment_probability(stages: usize, beta: f64, rate: f64, n: usize) -> f64 {
    1.0 - (1.0 - rate * new_stage_probability(stages, beta)).powi(n as i32)
}

/// Mass over the stages a gene may move to when at most `max_stages` are
/// allowed: the plain law below the cap, and the law conditioned on not
/// opening a new stage at the cap.
fn capped_pmf(stages: usize, beta: f64, max_stages: usize) -> Vec<f64> {
    let mut pmf = mutation_pmf(stages, beta);
    if stages >= max_stages {
        pmf.truncate(max_stages);
        let total: f64 = pmf.iter().sum();
        pmf.iter_mut().for_each(|p| *p /= total);
    }
    pmf
}

fn sample_index<R: Rng + ?Sized>(pmf: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (j, &p) in pmf.iter().enumerate() {
        acc += p;
        if u < acc {
            return j;
        }
    }
    pmf.len() - 1
}

/// Resamples each gene with probability `rate` from the capped mutation law.
/// Returns the genes before compression.
pub fn mutate_genes<R: Rng + ?Sized>(
    c: &Chromosome,
    rate: f64,
    beta: f64,
    max_stages: usize,
    rng: &mut R,
) -> Vec<usize> {
    let pmf = capped_pmf(c.stage_count(), beta, max_stages);
    c.genes()
        .iter()
        .map(|&g| {
            if rng.random::<f64>() < rate {
                sample_index(&pmf, rng)
            } else {
                g
            }
        })
        .collect()
}

pub fn mutate<R: Rng + ?Sized>(
    c: &Chromosome,
    rate: f64,
    beta: f64,
    max_stages: usize,
    rng: &mut R,
) -> Chromosome {
    Chromosome::new(mutate_genes(c, rate, beta, max_stages, rng))
        .expect("mutation preserves length")
        .compress()
}

/// Zero-based stage in a `child_stages`-stage child standing in for stage
/// `s` of a `parent_stages`-stage parent.
pub fn map_stage(s: usize, parent_stages: usize, child_stages: usize) -> usize {
    let scaled = ((s + 1) as f64 / parent_stages as f64 * child_stages as f64).round() as i64 - 1;
    scaled.clamp(0, child_stages as i64 - 1) as usize
}

/// Stage-count-aware uniform crossover. With probability `1 - rate` one
/// parent is returned unchanged by a fair coin.
pub fn recombine<R: Rng + ?Sized>(
    a: &Chromosome,
    b: &Chromosome,
    rate: f64,
    rng: &mut R,
) -> Chromosome {
    if rng.random::<f64>() >= rate {
        return if rng.random::<bool>() { a.clone() } else { b.clone() };
    }
    let (sa, sb) = (a.stage_count(), b.stage_count());
    let child_stages = match rng.random_range(0..3) {
        0 => sa,
        1 => sb,
        _ => ((sa + sb) as f64 / 2.0).round() as usize,
    };
    let genes = a
        .genes()
        .iter()
        .zip(b.genes())
        .map(|(&ga, &gb)| {
            if rng.random::<bool>() {
                map_stage(ga, sa, child_stages)
            } else {
                map_stage(gb, sb, child_stages)
            }
        })
        .collect();
    Chromosome::new(genes)
        .expect("crossover preserves length")
        .compress()
}

/// Fitness-proportionate sampler.
#[derive(Debug, Clone)]
pub struct RouletteWheel {
    cumulative: Vec<f64>,
}

impl RouletteWheel {
    pub fn new(fitness: &[f64]) -> Result<Self> {
        if fitness.iter().any(|f| !(f.is_finite() && *f >= 0.0)) {
            return Err(Error::Internal("fitness must be finite and non-negative".into()));
        }
        let mut acc = 0.0;
        let cumulative: Vec<f64> = fitness
            .iter()
            .map(|f| {
                acc += f;
                acc
            })
            .collect();
        if !(acc > 0.0) {
            return Err(Error::Internal("total fitness must be positive".into()));
        }
        Ok(Self { cumulative })
    }

    pub fn spin<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total = *self.cumulative.last().unwrap();
        let u = rng.random::<f64>() * total;
        let i = self.cumulative.partition_point(|&c| c <= u);
        i.min(self.cumulative.len() - 1)
    }

    /// Two independent draws.
    pub fn select_pair<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, usize) {
        (self.spin(rng), self.spin(rng))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(g: &[usize]) -> Chromosome {
        Chromosome::new(g.to_vec()).unwrap()
    }

    #[test]
    fn pmf_two_stages_beta_two() {
        let p = mutation_pmf(2, 2.0);
        let want = [0.5, 1.0 / 3.0, 1.0 / 6.0];
        for (a, b) in p.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
        let mean: f64 = p.iter().enumerate().map(|(j, q)| j as f64 * q).sum();
        assert!((mean - 2.0 / 3.0).abs() < 1e-12);
        assert!((new_stage_probability(2, 2.0) - 1.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn increment_probability_example() {
        let p = increment_probability(2, 2.0, 0.5, 4);
        let want = 1.0 - (1.0 - 0.5 / 6.0f64).powi(4);
        assert!((p - want).abs() < 1e-12);
        assert!((p - 0.2939).abs() < 1e-4);
    }

    #[test]
    fn zero_rate_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = c(&[0, 1, 1, 2, 0]);
        for _ in 0..100 {
            assert_eq!(mutate(&x, 0.0, 2.0, 5, &mut rng), x);
        }
    }

    #[test]
    fn cap_blocks_new_stages() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = c(&[0, 1, 2, 0, 1, 2]);
        for _ in 0..500 {
            assert!(mutate_genes(&x, 1.0, 1.5, 3, &mut rng).iter().all(|&g| g < 3));
        }
    }

    #[test]
    fn stage_mapping_examples() {
        assert_eq!(map_stage(3, 4, 2), 1);
        assert_eq!(map_stage(0, 4, 2), 0);
        assert_eq!(map_stage(0, 1, 3), 2);
        assert_eq!(map_stage(1, 2, 2), 1);
    }

    #[test]
    fn no_crossover_returns_a_parent() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = c(&[0, 1, 0]);
        for _ in 0..50 {
            assert_eq!(recombine(&x, &x, 0.0, &mut rng), x);
        }
        let y = c(&[1, 0, 2]);
        for _ in 0..50 {
            let z = recombine(&x, &y, 0.0, &mut rng);
            assert!(z == x || z == y);
        }
    }

    #[test]
    fn crossover_children_are_canonical_and_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = c(&[0, 1, 2, 3, 0, 1]);
        let y = c(&[1, 0, 1, 0, 0, 1]);
        for _ in 0..500 {
            let z = recombine(&x, &y, 1.0, &mut rng);
            assert!(!z.has_gaps());
            assert!(z.stage_count() <= 4);
        }
    }

    #[test]
    fn roulette_frequencies() {
        let wheel = RouletteWheel::new(&[3.0, 1.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let draws = 100_000;
        let first = (0..draws).filter(|_| wheel.spin(&mut rng) == 0).count();
        assert!((first as f64 / draws as f64 - 0.75).abs() < 0.01);

        let single = RouletteWheel::new(&[2.5]).unwrap();
        assert_eq!(single.select_pair(&mut rng), (0, 0));
        assert!(RouletteWheel::new(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn uniform_roulette_chi_square() {
        let k = 10;
        let wheel = RouletteWheel::new(&vec![1.0; k]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let draws = 100_000;
        let mut counts = vec![0usize; k];
        for _ in 0..draws {
            counts[wheel.spin(&mut rng)] += 1;
        }
        let expected = draws as f64 / k as f64;
        let chi2: f64 = counts
            .iter()
            .map(|&o| (o as f64 - expected).powi(2) / expected)
            .sum();
        // 99th percentile of chi-square with 9 degrees of freedom
        assert!(chi2 < 21.666, "chi2 = {chi2}");
    }
}
