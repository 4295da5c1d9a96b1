//! Exhaustive enumeration of every canonical chromosome with at most `k`
//! stages, and the exact Pareto front over them.

use std::collections::HashSet;
use std::io::{BufRead, Write};

use num_traits::ToPrimitive;
use rayon::prelude::*;

use crate::chromosome::{search_space_size, Chromosome};
use crate::error::{Error, Result};
use crate::evolution::{dominates, GenerationRecord};
use crate::objectives::{normalize_costs, Evaluate, Measurement, ObjectiveVector};

pub const DEFAULT_CAP: u64 = 1_000_000;

/// Restricted-growth strings of length `n` with exactly `blocks` distinct
/// values: each set partition of `0..n` into `blocks` blocks, once.
fn restricted_growth_strings(n: usize, blocks: usize) -> Vec<Vec<usize>> {
    fn extend(prefix: &mut Vec<usize>, max: usize, n: usize, blocks: usize, out: &mut Vec<Vec<usize>>) {
        let used = if prefix.is_empty() { 0 } else { max + 1 };
        let remaining = n - prefix.len();
        if remaining == 0 {
            if used == blocks {
                out.push(prefix.clone());
            }
            return;
        }
        // not enough positions left to open the missing blocks
        if used + remaining < blocks {
            return;
        }
        let limit = if prefix.is_empty() { 0 } else { (max + 1).min(blocks - 1) };
        for v in 0..=limit {
            prefix.push(v);
            extend(prefix, max.max(v), n, blocks, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    extend(&mut Vec::with_capacity(n), 0, n, blocks, &mut out);
    out
}

/// All orderings of `0..k` in lexicographic order.
fn permutations(k: usize) -> Vec<Vec<usize>> {
    let mut perm: Vec<usize> = (0..k).collect();
    let mut out = vec![perm.clone()];
    loop {
        let Some(i) = (1..k).rev().find(|&i| perm[i - 1] < perm[i]) else {
            return out;
        };
        let j = (i..k).rev().find(|&j| perm[j] > perm[i - 1]).unwrap();
        perm.swap(i - 1, j);
        perm[i..].reverse();
        out.push(perm.clone());
    }
}

/// Every canonical chromosome over `n` features with 1 to `k` stages, each
/// exactly once: set partitions crossed with block orderings.
pub fn enumerate_solutions(n: usize, k: usize, cap: u64) -> Result<Vec<Chromosome>> {
    let size = search_space_size(n, k)?;
    match size.to_u64() {
        Some(s) if s <= cap => {}
        _ => {
            return Err(Error::EnumerationCap {
                size: size.to_string(),
                cap,
            })
        }
    }
    let mut out = Vec::with_capacity(size.to_usize().unwrap_or(0));
    for blocks in 1..=k {
        let perms = permutations(blocks);
        for rgs in restricted_growth_strings(n, blocks) {
            for perm in &perms {
                let genes = rgs.iter().map(|&b| perm[b]).collect();
                out.push(Chromosome::new(genes)?);
            }
        }
    }
    Ok(out)
}

/// Identifies the instance a front was computed on.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontParams {
    pub n: usize,
    pub k: usize,
    pub threshold: f64,
    pub description: String,
}

/// A front member with its raw measurements and the inverse cost relative to
/// the cheapest solution in the whole space.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontMember {
    pub chromosome: Chromosome,
    pub objectives: ObjectiveVector,
}

#[derive(Debug, Clone)]
pub struct GlobalFront {
    pub params: FrontParams,
    pub evaluated: usize,
    pub solutions: Vec<FrontMember>,
}

/// Non-dominated subset on (coverage, accuracy, -raw cost).
pub fn pareto_filter(members: &[(Chromosome, Measurement)]) -> Vec<usize> {
    let key = |m: &Measurement| [m.coverage, m.accuracy, -m.raw_cost];
    let keys: Vec<[f64; 3]> = members.iter().map(|(_, m)| key(m)).collect();
    (0..members.len())
        .into_par_iter()
        .filter(|&i| !keys.iter().any(|k| dominates(k, &keys[i])))
        .collect()
}

/// Measures every solution and keeps the non-dominated ones.
pub fn global_front(
    evaluator: &dyn Evaluate,
    params: FrontParams,
    cap: u64,
) -> Result<GlobalFront> {
    let all = enumerate_solutions(params.n, params.k, cap)?;
    let measured = all
        .par_iter()
        .map(|c| evaluator.measure(c).map(|m| (c.clone(), m)))
        .collect::<Result<Vec<_>>>()?;
    let inverse = normalize_costs(&measured.iter().map(|(_, m)| m.raw_cost).collect::<Vec<_>>())?;
    let mut solutions: Vec<FrontMember> = pareto_filter(&measured)
        .into_iter()
        .map(|i| FrontMember {
            chromosome: measured[i].0.clone(),
            objectives: ObjectiveVector::new(measured[i].1, inverse[i]),
        })
        .collect();
    solutions.sort_by(|a, b| a.chromosome.cmp(&b.chromosome));
    Ok(GlobalFront {
        params,
        evaluated: measured.len(),
        solutions,
    })
}

impl GlobalFront {
    pub fn len(&self) -> usize {
        self.solutions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.solutions.is_empty()
    }

    pub fn chromosomes(&self) -> HashSet<&Chromosome> {
        self.solutions.iter().map(|m| &m.chromosome).collect()
    }

    pub fn contains(&self, c: &Chromosome) -> bool {
        self.solutions.iter().any(|m| &m.chromosome == c)
    }

    /// Writes one line per member after a commented header:
    /// `chromosome,coverage,accuracy,raw_cost,inverse_cost`.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# format_version=1")?;
        writeln!(
            w,
            "# n={} k={} threshold={} evaluated={} instance={}",
            self.params.n, self.params.k, self.params.threshold, self.evaluated, self.params.description
        )?;
        writeln!(w, "chromosome,coverage,accuracy,raw_cost,inverse_cost")?;
        for m in &self.solutions {
            let o = &m.objectives;
            writeln!(
                w,
                "{},{},{},{},{}",
                m.chromosome, o.coverage, o.accuracy, o.raw_cost, o.inverse_cost
            )?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut params = FrontParams {
            n: 0,
            k: 0,
            threshold: 0.0,
            description: String::new(),
        };
        let mut evaluated = 0;
        let mut solutions = Vec::new();
        let mut saw_columns = false;
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let bad = |what: &str| Error::Data(format!("front file line {}: {what}", lineno + 1));
            if let Some(meta) = line.strip_prefix("# ") {
                for kv in meta.split(' ') {
                    let Some((k, v)) = kv.split_once('=') else { continue };
                    match k {
                        "n" => params.n = v.parse().map_err(|_| bad("bad n"))?,
                        "k" => params.k = v.parse().map_err(|_| bad("bad k"))?,
                        "threshold" => params.threshold = v.parse().map_err(|_| bad("bad threshold"))?,
                        "evaluated" => evaluated = v.parse().map_err(|_| bad("bad count"))?,
                        "instance" => params.description = meta[meta.find("instance=").unwrap() + 9..].to_string(),
                        _ => {}
                    }
                }
                continue;
            }
            if !saw_columns {
                saw_columns = true;
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 5 {
                return Err(bad("expected 5 columns"));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad("bad number"));
            solutions.push(FrontMember {
                chromosome: cols[0].parse()?,
                objectives: ObjectiveVector {
                    coverage: num(cols[1])?,
                    accuracy: num(cols[2])?,
                    raw_cost: num(cols[3])?,
                    inverse_cost: num(cols[4])?,
                },
            });
        }
        Ok(Self {
            params,
            evaluated,
            solutions,
        })
    }
}

/// Number of distinct front members present in each generation.
pub fn track_recovery(generations: &[GenerationRecord], front: &GlobalFront) -> Vec<usize> {
    let set = front.chromosomes();
    generations
        .iter()
        .map(|g| g.unique.iter().filter(|c| set.contains(c)).count())
        .collect()
}

/// Per-generation mean over runs. Runs that halted early contribute their
/// final count to later generations.
pub fn mean_recovery(runs: &[Vec<usize>]) -> Vec<f64> {
    let len = runs.iter().map(Vec::len).max().unwrap_or(0);
    (0..len)
        .map(|h| {
            let sum: usize = runs
                .iter()
                .map(|r| r.get(h).or(r.last()).copied().unwrap_or(0))
                .sum();
            sum as f64 / runs.len() as f64
        })
        .collect()
}
