//! The five subcommands.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Result};
use statrs::distribution::{ContinuousCDF, StudentsT};

use seqbudget::classifier::{train_chain, StagePlan};
use seqbudget::data::SplitKind;
use seqbudget::evolution::{run, GaConfig};
use seqbudget::objectives::{measure, ChainEvaluator, Evaluate, Measurement};
use seqbudget::oracle::{global_front, mean_recovery, track_recovery, FrontParams, GlobalFront};
use seqbudget::{search_space_size, Chromosome};

use crate::config::{config_hash, load_problem, usage, Config, Problem, Source};
use crate::output::{header, write_file, write_front, Manifest, RunRecord, FORMAT_VERSION};

/// Everything resolved from the command line before any work starts.
pub struct Job {
    pub command: &'static str,
    pub variant: Option<String>,
    pub source: Source,
    pub config: Config,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
}

impl Job {
    fn hash(&self) -> String {
        config_hash(
            &self.source.text,
            &self.seeds,
            &format!("{}:{}", self.command, self.variant.as_deref().unwrap_or("")),
        )
    }

    fn evaluator(&self, problem: &Problem, split: SplitKind) -> Result<ChainEvaluator> {
        ChainEvaluator::new(
            problem.dataset.clone(),
            self.config.lambda,
            self.config.threshold,
            split,
        )
        .map_err(|e| usage(e.to_string()))
    }

    /// Writes every output at once so a failed run leaves nothing behind.
    fn finish(
        &self,
        files: Vec<(String, Vec<u8>)>,
        runs: Vec<RunRecord>,
        effective_ga: Option<&GaConfig>,
        started: Instant,
    ) -> Result<()> {
        for (name, bytes) in &files {
            write_file(&self.out.join(name), bytes)?;
        }
        let manifest = Manifest {
            format_version: FORMAT_VERSION,
            command: self.command.to_string(),
            config_hash: self.hash(),
            config_origin: self.source.origin.clone(),
            config_base_dir: self.source.base_dir.clone(),
            config_text: self.source.text.clone(),
            seeds: self.seeds.clone(),
            variant: self.variant.clone(),
            effective_ga: effective_ga.map(serde_json::to_value).transpose()?,
            runs,
            outputs: files.into_iter().map(|(name, _)| name).collect(),
            wall_time_secs: started.elapsed().as_secs_f64(),
        };
        manifest.write(&self.out)
    }
}

fn halt_name(h: seqbudget::evolution::HaltReason) -> String {
    format!("{h:?}")
}

/// Mean and 95% margin of error (Student t) of `values`; the margin is NaN
/// for fewer than two values.
pub fn mean_and_margin(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let t = StudentsT::new(0.0, 1.0, n - 1.0)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.975);
    (mean, t * (var / n).sqrt())
}

pub fn evolve(job: &Job) -> Result<()> {
    let started = Instant::now();
    let problem = load_problem(&job.config, &job.source)?;
    let n = problem.n_features();
    let ga = job.config.ga(n)?;
    let validation = job.evaluator(&problem, SplitKind::Validation)?;
    let test = validation
        .sibling(job.config.threshold, SplitKind::Test)
        .map_err(|e| usage(e.to_string()))?;
    let hash = job.hash();

    let mut files = Vec::new();
    let mut runs = Vec::new();
    let mut tops = Vec::new();
    for &seed in &job.seeds {
        let t0 = Instant::now();
        let cfg = GaConfig { seed, ..ga.clone() };
        let outcome = run(&cfg, n, &validation)?;
        let name = format!("front_seed{seed}.csv");
        let mut buf = Vec::new();
        write_front(
            &mut buf,
            &hash,
            &[format!(
                "seed={seed} generations={} halt={:?} split=validation",
                outcome.generations.len(),
                outcome.halt
            )],
            &outcome.front,
        )?;
        files.push((name.clone(), buf));
        let best = outcome.best().chromosome.clone();
        tops.push((seed, best.clone(), test.measure(&best)?));
        log::info!("seed {seed}: {} generations, top {best}", outcome.generations.len());
        runs.push(RunRecord {
            seed,
            front_file: Some(name),
            generations: outcome.generations.len(),
            halt: halt_name(outcome.halt),
            recovery: None,
            wall_time_secs: t0.elapsed().as_secs_f64(),
        });
    }

    let mut top_file = Vec::new();
    header(&mut top_file, &hash, &["top-fitness chromosome of each seed, test split".into()])?;
    top_file.extend_from_slice(b"seed,chromosome,g1,g2,g3_star\n");
    for (seed, c, m) in &tops {
        top_file.extend(format!("{seed},{c},{},{},{}\n", m.coverage, m.accuracy, m.raw_cost).bytes());
    }
    files.push(("top_solutions.csv".into(), top_file));

    let mut agg = Vec::new();
    header(&mut agg, &hash, &[format!("runs={} split=test", tops.len())])?;
    agg.extend_from_slice(b"metric,mean,margin95\n");
    let columns: [(&str, fn(&Measurement) -> f64); 3] = [
        ("g1", |m| m.coverage),
        ("g2", |m| m.accuracy),
        ("g3_star", |m| m.raw_cost),
    ];
    println!("metric   mean        margin95 (test split, {} runs)", tops.len());
    for (name, get) in columns {
        let values: Vec<f64> = tops.iter().map(|(_, _, m)| get(m)).collect();
        let (mean, margin) = mean_and_margin(&values);
        agg.extend(format!("{name},{mean},{margin}\n").bytes());
        println!("{name:<8} {mean:<11.6} {margin:.6}");
    }
    files.push(("aggregate.csv".into(), agg));
    job.finish(files, runs, Some(&ga), started)
}

fn oracle_k(job: &Job, n: usize) -> Result<usize> {
    let k = match job.config.oracle.max_stages {
        Some(k) => k,
        None => job.config.ga(n)?.max_stages,
    };
    if k == 0 || k > n {
        bail!(usage(format!("[oracle] max_stages must lie in 1..={n}, got {k}")));
    }
    Ok(k)
}

pub fn oracle(job: &Job) -> Result<()> {
    let started = Instant::now();
    let problem = load_problem(&job.config, &job.source)?;
    let n = problem.n_features();
    let k = oracle_k(job, n)?;
    let size = search_space_size(n, k)?;
    let cap = job.config.oracle_cap();
    if size > cap.into() {
        bail!(usage(format!(
            "search space for n={n}, k={k} holds {size} solutions, above the enumeration cap of {cap}"
        )));
    }
    let evaluator = job.evaluator(&problem, SplitKind::Validation)?;
    let params = FrontParams {
        n,
        k,
        threshold: job.config.threshold,
        description: problem.description.clone(),
    };
    let front = global_front(&evaluator, params, cap)?;
    println!(
        "search space: {size} solutions (n={n}, k={k}); evaluated {}; front: {} members",
        front.evaluated,
        front.len()
    );
    let mut buf = Vec::new();
    std::io::Write::write_all(&mut buf, format!("# config_hash={}\n", job.hash()).as_bytes())?;
    front.write_to(&mut buf)?;
    job.finish(vec![("front.csv".into(), buf)], Vec::new(), None, started)
}

fn read_front(path: &Path) -> Result<GlobalFront> {
    let file = std::fs::File::open(path)
        .map_err(|e| usage(format!("cannot open front file {}: {e}", path.display())))?;
    GlobalFront::read_from(std::io::BufReader::new(file))
        .map_err(|e| usage(format!("{}: {e}", path.display())))
}

pub fn recovery(job: &Job) -> Result<()> {
    let started = Instant::now();
    let problem = load_problem(&job.config, &job.source)?;
    let n = problem.n_features();
    let ga = job.config.ga(n)?;
    let front_path = match &job.config.recovery.front {
        Some(p) => job.source.resolve_path(p),
        None => job.out.join("front.csv"),
    };
    let front = read_front(&front_path)?;
    let p = &front.params;
    if p.n != n || p.k != ga.max_stages || p.threshold != job.config.threshold {
        bail!(usage(format!(
            "{} was computed for n={} k={} threshold={}, but this run has n={n} k={} threshold={}",
            front_path.display(),
            p.n,
            p.k,
            p.threshold,
            ga.max_stages,
            job.config.threshold
        )));
    }
    let evaluator = job.evaluator(&problem, SplitKind::Validation)?;
    let hash = job.hash();

    let mut curves = Vec::new();
    let mut runs = Vec::new();
    for &seed in &job.seeds {
        let t0 = Instant::now();
        let outcome = run(&GaConfig { seed, ..ga.clone() }, n, &evaluator)?;
        let x = track_recovery(&outcome.generations, &front);
        runs.push(RunRecord {
            seed,
            front_file: None,
            generations: outcome.generations.len(),
            halt: halt_name(outcome.halt),
            recovery: Some(x.clone()),
            wall_time_secs: t0.elapsed().as_secs_f64(),
        });
        curves.push(x);
    }
    let mean = mean_recovery(&curves);
    let mut table = Vec::new();
    header(
        &mut table,
        &hash,
        &[format!(
            "front={} size={}; runs that halt early repeat their last count",
            front_path.display(),
            front.len()
        )],
    )?;
    let mut cols = vec!["h".to_string(), "mean".to_string()];
    cols.extend(job.seeds.iter().map(|s| format!("seed_{s}")));
    table.extend(cols.join(",").bytes());
    table.push(b'\n');
    for (h, m) in mean.iter().enumerate() {
        let mut row = vec![h.to_string(), m.to_string()];
        row.extend(
            curves
                .iter()
                .map(|c| c.get(h).or(c.last()).copied().unwrap_or(0).to_string()),
        );
        table.extend(row.join(",").bytes());
        table.push(b'\n');
    }
    let full = curves
        .iter()
        .filter(|c| c.last().copied() == Some(front.len()))
        .count();
    println!(
        "front size {}; final mean recovery {:.3}; full recovery in {full}/{} runs",
        front.len(),
        mean.last().copied().unwrap_or(0.0),
        curves.len()
    );
    job.finish(vec![("recovery.csv".into(), table)], runs, Some(&ga), started)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Baseline {
    /// One stage per cost class, cheapest class first.
    CostOrdered,
    /// All features in a single stage.
    SingleStage,
}

impl Baseline {
    pub fn name(self) -> &'static str {
        match self {
            Baseline::CostOrdered => "cost-ordered",
            Baseline::SingleStage => "single-stage",
        }
    }
}

/// Stage sets of the baseline plan.
pub fn baseline_stages(which: Baseline, problem: &Problem) -> Result<Vec<Vec<usize>>> {
    let n = problem.n_features();
    match which {
        Baseline::SingleStage => Ok(vec![(0..n).collect()]),
        Baseline::CostOrdered => {
            let classes = problem.schedule.classes().ok_or_else(|| {
                usage("the cost-ordered baseline needs cost classes; explicit costs are unsupported")
            })?;
            let distinct: BTreeSet<u32> = classes.iter().copied().collect();
            Ok(distinct
                .into_iter()
                .map(|t| (0..n).filter(|&f| classes[f] == t).collect())
                .collect())
        }
    }
}

pub fn baseline(job: &Job, which: Baseline) -> Result<()> {
    let started = Instant::now();
    let problem = load_problem(&job.config, &job.source)?;
    let n = problem.n_features();
    let stages = baseline_stages(which, &problem)?;
    let mut genes = vec![0; n];
    for (s, set) in stages.iter().enumerate() {
        for &f in set {
            genes[f] = s;
        }
    }
    let chromosome = Chromosome::new(genes)?;
    let plan = StagePlan::new(stages, n)?;
    let chain = train_chain(plan, &problem.dataset, job.config.lambda, job.config.threshold)?;
    let m = measure(&chain, &problem.dataset, SplitKind::Test)?;
    println!(
        "{} baseline on test split: chromosome {chromosome}, g1 {:.6}, g2 {:.6}, g3* {:.6}",
        which.name(),
        m.coverage,
        m.accuracy,
        m.raw_cost
    );
    let mut buf = Vec::new();
    header(&mut buf, &job.hash(), &[format!("baseline={} split=test", which.name())])?;
    buf.extend_from_slice(b"chromosome,g1,g2,g3_star\n");
    buf.extend(format!("{chromosome},{},{},{}\n", m.coverage, m.accuracy, m.raw_cost).bytes());
    let name = format!("baseline_{}.csv", which.name());
    job.finish(vec![(name, buf)], Vec::new(), None, started)
}

/// `sqrt(g1^2 + g2^2 + (1 - g3*/total)^2)`.
pub fn sweep_score(m: &Measurement, total_cost: f64) -> f64 {
    let c = 1.0 - m.raw_cost / total_cost;
    (m.coverage * m.coverage + m.accuracy * m.accuracy + c * c).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub population_size: usize,
    pub mutation_rate: f64,
    pub crossover_rate: f64,
    pub mutation_bias: f64,
    pub elitism_fraction: f64,
    pub mean: Measurement,
    pub score: f64,
}

/// Highest score; ties go to the smaller population, then the
/// lexicographically smaller parameter tuple.
pub fn best_row(rows: &[SweepRow]) -> Option<&SweepRow> {
    rows.iter().min_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.population_size.cmp(&b.population_size))
            .then(a.mutation_rate.total_cmp(&b.mutation_rate))
            .then(a.crossover_rate.total_cmp(&b.crossover_rate))
            .then(a.mutation_bias.total_cmp(&b.mutation_bias))
            .then(a.elitism_fraction.total_cmp(&b.elitism_fraction))
            .then(Ordering::Equal)
    })
}

fn grid<T: Copy>(name: &str, list: &Option<Vec<T>>, default: T) -> Result<Vec<T>> {
    match list {
        None => Ok(vec![default]),
        Some(v) if v.is_empty() => bail!(usage(format!("empty sweep grid: `{name}` has no values"))),
        Some(v) => Ok(v.clone()),
    }
}

pub fn sweep(job: &Job) -> Result<()> {
    let started = Instant::now();
    let grid_cfg = job
        .config
        .sweep
        .clone()
        .ok_or_else(|| usage("empty sweep grid: no [sweep] section"))?;
    let problem = load_problem(&job.config, &job.source)?;
    let n = problem.n_features();
    let base = GaConfig {
        max_iter: grid_cfg.max_iter.unwrap_or(30),
        ..job.config.ga(n)?
    };
    let pops = grid("population_size", &grid_cfg.population_size, base.population_size)?;
    let rates = grid("mutation_rate", &grid_cfg.mutation_rate, base.mutation_rate)?;
    let crosses = grid("crossover_rate", &grid_cfg.crossover_rate, base.crossover_rate)?;
    let biases = grid("mutation_bias", &grid_cfg.mutation_bias, base.mutation_bias)?;
    let elites = grid("elitism_fraction", &grid_cfg.elitism_fraction, base.elitism_fraction)?;
    let mut combos = Vec::new();
    for &population_size in &pops {
        for &mutation_rate in &rates {
            for &crossover_rate in &crosses {
                for &mutation_bias in &biases {
                    for &elitism_fraction in &elites {
                        let cfg = GaConfig {
                            population_size,
                            mutation_rate,
                            crossover_rate,
                            mutation_bias,
                            elitism_fraction,
                            ..base.clone()
                        };
                        cfg.validate(n).map_err(|e| usage(format!("[sweep]: {e}")))?;
                        combos.push(cfg);
                    }
                }
            }
        }
    }
    let evaluator = job.evaluator(&problem, SplitKind::Validation)?;
    let total = problem.dataset.total_cost();

    let mut rows = Vec::new();
    for cfg in &combos {
        let mut ms = Vec::new();
        for &seed in &job.seeds {
            let outcome = run(&GaConfig { seed, ..cfg.clone() }, n, &evaluator)?;
            ms.push(evaluator.measure(&outcome.best().chromosome)?);
        }
        let k = ms.len() as f64;
        let mean = Measurement {
            coverage: ms.iter().map(|m| m.coverage).sum::<f64>() / k,
            accuracy: ms.iter().map(|m| m.accuracy).sum::<f64>() / k,
            raw_cost: ms.iter().map(|m| m.raw_cost).sum::<f64>() / k,
        };
        let score = ms.iter().map(|m| sweep_score(m, total)).sum::<f64>() / k;
        rows.push(SweepRow {
            population_size: cfg.population_size,
            mutation_rate: cfg.mutation_rate,
            crossover_rate: cfg.crossover_rate,
            mutation_bias: cfg.mutation_bias,
            elitism_fraction: cfg.elitism_fraction,
            mean,
            score,
        });
    }
    let best = best_row(&rows).expect("grid is non-empty").clone();
    println!(
        "best: population_size={} mutation_rate={} crossover_rate={} mutation_bias={} \
         elitism_fraction={} score={:.6}",
        best.population_size,
        best.mutation_rate,
        best.crossover_rate,
        best.mutation_bias,
        best.elitism_fraction,
        best.score
    );
    let mut buf = Vec::new();
    header(
        &mut buf,
        &job.hash(),
        &[format!("max_iter={} split=validation", base.max_iter)],
    )?;
    buf.extend_from_slice(
        b"population_size,mutation_rate,crossover_rate,mutation_bias,elitism_fraction,g1,g2,g3_star,score,best\n",
    );
    for r in &rows {
        buf.extend(
            format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                r.population_size,
                r.mutation_rate,
                r.crossover_rate,
                r.mutation_bias,
                r.elitism_fraction,
                r.mean.coverage,
                r.mean.accuracy,
                r.mean.raw_cost,
                r.score,
                *r == best
            )
            .bytes(),
        );
    }
    job.finish(vec![("sweep.csv".into(), buf)], Vec::new(), Some(&base), started)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(pop: usize, rate: f64, score: f64) -> SweepRow {
        SweepRow {
            population_size: pop,
            mutation_rate: rate,
            crossover_rate: 0.8,
            mutation_bias: 2.0,
            elitism_fraction: 0.2,
            mean: Measurement {
                coverage: 1.0,
                accuracy: 1.0,
                raw_cost: 0.0,
            },
            score,
        }
    }

    #[test]
    fn cheaper_wins_on_cost_term() {
        let m = |c| Measurement {
            coverage: 0.8,
            accuracy: 0.9,
            raw_cost: c,
        };
        let (a, b) = (sweep_score(&m(10.0), 100.0), sweep_score(&m(20.0), 100.0));
        assert!((a - (0.64f64 + 0.81 + 0.81).sqrt()).abs() < 1e-12);
        assert!((b - (0.64f64 + 0.81 + 0.64).sqrt()).abs() < 1e-12);
        assert!(a > b);
    }

    #[test]
    fn ties_prefer_small_populations_then_lexicographic() {
        let rows = vec![row(300, 0.1, 1.5), row(100, 0.2, 1.5), row(100, 0.1, 1.5), row(50, 0.1, 1.4)];
        let best = best_row(&rows).unwrap();
        assert_eq!((best.population_size, best.mutation_rate), (100, 0.1));
        assert!(best_row(&[]).is_none());
        assert_eq!(best_row(&rows[..1]).unwrap(), &rows[0]);
    }

    #[test]
    fn margin_uses_student_t() {
        let (mean, margin) = mean_and_margin(&[1.0, 2.0, 3.0]);
        assert_eq!(mean, 2.0);
        // t(0.975, 2) = 4.302653, sample sd 1, n = 3
        assert!((margin - 4.302653 / 3f64.sqrt()).abs() < 1e-5);
        assert!(mean_and_margin(&[5.0]).1.is_nan());
    }
}
