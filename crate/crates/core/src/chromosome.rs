//! Integer stage-assignment vectors and the size of the space they span.
//!
//! Gene `i` holds the zero-based stage that first acquires feature `i`. A
//! chromosome is *canonical* when no stage between 0 and its maximum gene is
//! empty; canonical gene vectors are in one-to-one correspondence with ordered
//! partitions of the feature set.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::{One, Zero};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Chromosome {
    genes: Vec<usize>,
}

impl Chromosome {
    pub fn new(genes: Vec<usize>) -> Result<Self> {
        if genes.is_empty() {
            return Err(Error::InvalidChromosome("empty gene vector".into()));
        }
        Ok(Self { genes })
    }

    /// The one-stage solution: every feature acquired up front.
    pub fn single_stage(n: usize) -> Result<Self> {
        Self::new(vec![0; n])
    }

    pub fn genes(&self) -> &[usize] {
        &self.genes
    }

    pub fn len(&self) -> usize {
        self.genes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.genes.is_empty()
    }

    pub fn into_genes(self) -> Vec<usize> {
        self.genes
    }

    /// Maximum gene plus one.
    pub fn stage_count(&self) -> usize {
        self.genes.iter().copied().max().map_or(0, |m| m + 1)
    }

    /// True when some stage index below the maximum gene is unused.
    pub fn has_gaps(&self) -> bool {
        let mut seen = vec![false; self.stage_count()];
        for &g in &self.genes {
            seen[g] = true;
        }
        seen.iter().any(|s| !s)
    }

    /// Relabels the used stages as `0..distinct` in ascending order.
    ///
    /// Features that shared a stage still share one, and the relative order
    /// of any two stages is preserved. Gap-free input is returned unchanged.
    pub fn compress(&self) -> Chromosome {
        if !self.has_gaps() {
            return self.clone();
        }
        let mut used = vec![false; self.stage_count()];
        for &g in &self.genes {
            used[g] = true;
        }
        let mut relabel = vec![0usize; used.len()];
        let mut next = 0;
        for (stage, &u) in used.iter().enumerate() {
            if u {
                relabel[stage] = next;
                next += 1;
            }
        }
        Chromosome {
            genes: self.genes.iter().map(|&g| relabel[g]).collect(),
        }
    }

    /// Feature indices grouped per stage, in stage order.
    pub fn stages(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.stage_count()];
        for (feature, &g) in self.genes.iter().enumerate() {
            out[g].push(feature);
        }
        out
    }
}

impl fmt::Display for Chromosome {
    /// Dash-joined genes, e.g. `0-0-2-1`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, g) in self.genes.iter().enumerate() {
            if i > 0 {
                f.write_str("-")?;
            }
            write!(f, "{g}")?;
        }
        Ok(())
    }
}

impl FromStr for Chromosome {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let genes = s
            .trim()
            .split('-')
            .map(|t| {
                t.parse::<usize>()
                    .map_err(|_| Error::InvalidChromosome(format!("bad gene {t:?} in {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Chromosome::new(genes)
    }
}

/// Bounds of the search space: `n` features, at most `k` stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchSpaceParams {
    pub n: usize,
    pub k: usize,
}

impl SearchSpaceParams {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        if k < 1 || k > n {
            return Err(Error::Domain(format!(
                "stage bound k={k} must satisfy 1 <= k <= n={n}"
            )));
        }
        Ok(Self { n, k })
    }

    pub fn size(&self) -> BigUint {
        (1..=self.k)
            .map(|j| ordered_partition_count_unchecked(self.n, j))
            .fold(BigUint::zero(), |a, b| a + b)
    }
}

fn binomial(n: usize, k: usize) -> BigUint {
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}

fn ordered_partition_count_unchecked(n: usize, k: usize) -> BigUint {
    // Inclusion-exclusion over surjections: sum_i (-1)^(k-i) C(k,i) i^n.
    let mut pos = BigUint::zero();
    let mut neg = BigUint::zero();
    for i in 0..=k {
        let term = binomial(k, i) * BigUint::from(i).pow(n as u32);
        if (k - i).is_multiple_of(2) {
            pos += term;
        } else {
            neg += term;
        }
    }
    pos - neg
}

/// Number of ordered partitions of an `n`-set into exactly `k` non-empty
/// blocks, `k! * S2(n, k)`.
pub fn ordered_partition_count(n: usize, k: usize) -> Result<BigUint> {
    SearchSpaceParams::new(n, k)?;
    Ok(ordered_partition_count_unchecked(n, k))
}

/// Number of ordered partitions with 1 to `k` blocks.
pub fn search_space_size(n: usize, k: usize) -> Result<BigUint> {
    Ok(SearchSpaceParams::new(n, k)?.size())
}
