//! Coverage, selective accuracy and acquisition cost of a chain on a split.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use crate::chromosome::Chromosome;
use crate::classifier::{
    check_threshold, fit_stage, fit_standardizer, ClassifierChain, EvaluationTrace,
    LogisticModel, Prediction, StageModel, StagePlan, Standardizer,
};
use crate::data::{CostedDataset, SplitKind};
use crate::error::{Error, Result};

/// Population-independent measurements of one solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    /// Fraction of inputs accepted.
    pub coverage: f64,
    /// Fraction of accepted inputs labeled correctly; 0 when none accepted.
    pub accuracy: f64,
    /// Mean acquisition cost per input, rejected inputs included.
    pub raw_cost: f64,
}

/// Running totals in input order. Both the replay and the batch path feed
/// this so their floating-point sums agree bit for bit.
#[derive(Debug, Default)]
struct Tally {
    n: usize,
    accepted: usize,
    correct: usize,
    cost: f64,
}

impl Tally {
    fn push(&mut self, accepted: bool, correct: bool, cost: f64) {
        self.n += 1;
        self.accepted += accepted as usize;
        self.correct += (accepted && correct) as usize;
        self.cost += cost;
    }

    fn finish(self) -> Result<Measurement> {
        if self.n == 0 {
            return Err(Error::Domain("cannot measure on an empty split".into()));
        }
        let n = self.n as f64;
        Ok(Measurement {
            coverage: self.accepted as f64 / n,
            accuracy: if self.accepted == 0 {
                0.0
            } else {
                self.correct as f64 / self.accepted as f64
            },
            raw_cost: self.cost / n,
        })
    }
}

impl Measurement {
    /// Aggregates `(trace, true label)` pairs.
    pub fn from_traces<'a>(
        traces: impl IntoIterator<Item = (&'a EvaluationTrace, usize)>,
    ) -> Result<Self> {
        let mut tally = Tally::default();
        for (t, y) in traces {
            tally.push(t.accepted, t.predicted_label == Some(y), t.incurred_cost);
        }
        tally.finish()
    }
}

/// Measurements plus the population-relative inverse cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveVector {
    pub coverage: f64,
    pub accuracy: f64,
    pub raw_cost: f64,
    pub inverse_cost: f64,
}

impl ObjectiveVector {
    pub fn new(m: Measurement, inverse_cost: f64) -> Self {
        Self {
            coverage: m.coverage,
            accuracy: m.accuracy,
            raw_cost: m.raw_cost,
            inverse_cost,
        }
    }

    /// The three maximized objectives.
    pub fn maximized(&self) -> [f64; 3] {
        [self.coverage, self.accuracy, self.inverse_cost]
    }

    /// Euclidean norm of the maximized objectives.
    pub fn norm(&self) -> f64 {
        let [a, b, c] = self.maximized();
        (a * a + b * b + c * c).sqrt()
    }
}

/// Runs every row of `split` through the chain one at a time.
pub fn measure(
    chain: &ClassifierChain,
    dataset: &CostedDataset,
    split: SplitKind,
) -> Result<Measurement> {
    let rows = dataset.split(split);
    let traces = rows
        .iter()
        .map(|&i| chain.evaluate_input(dataset.row(i)))
        .collect::<Result<Vec<_>>>()?;
    Measurement::from_traces(traces.iter().zip(rows.iter().map(|&i| dataset.label(i))))
}

/// Inverse cost relative to the cheapest member: `min(raw) / raw`.
pub fn normalize_costs(raw_costs: &[f64]) -> Result<Vec<f64>> {
    if let Some(c) = raw_costs.iter().find(|c| !(**c > 0.0 && c.is_finite())) {
        return Err(Error::Domain(format!("raw cost must be positive, got {c}")));
    }
    let min = raw_costs.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(raw_costs.iter().map(|&c| min / c).collect())
}

/// Maps a canonical chromosome to its measurements.
pub trait Evaluate: Sync {
    fn measure(&self, chromosome: &Chromosome) -> Result<Measurement>;
}

impl<F> Evaluate for F
where
    F: Fn(&Chromosome) -> Result<Measurement> + Sync,
{
    fn measure(&self, chromosome: &Chromosome) -> Result<Measurement> {
        self(chromosome)
    }
}

/// Stage models keyed by cumulative feature set, fitted on demand.
///
/// A model depends only on its feature set, so every chromosome sharing a
/// stage prefix reuses the same fit.
#[derive(Debug)]
pub struct ModelCache {
    dataset: Arc<CostedDataset>,
    standardizer: Arc<Standardizer>,
    lambda: f64,
    models: RwLock<HashMap<Vec<usize>, Arc<LogisticModel>>>,
}

impl ModelCache {
    pub fn new(dataset: Arc<CostedDataset>, lambda: f64) -> Self {
        let standardizer = Arc::new(fit_standardizer(&dataset));
        Self {
            dataset,
            standardizer,
            lambda,
            models: RwLock::new(HashMap::new()),
        }
    }

    pub fn dataset(&self) -> &Arc<CostedDataset> {
        &self.dataset
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn model(&self, features: &[usize]) -> Result<Arc<LogisticModel>> {
        if let Some(m) = self.models.read().unwrap().get(features) {
            return Ok(m.clone());
        }
        let fitted = Arc::new(fit_stage(
            &self.dataset,
            features,
            self.lambda,
            self.standardizer.clone(),
        )?);
        Ok(self
            .models
            .write()
            .unwrap()
            .entry(features.to_vec())
            .or_insert(fitted)
            .clone())
    }

    pub fn len(&self) -> usize {
        self.models.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Batch evaluator: caches each stage model's predictions over one split and
/// memoizes measurements per canonical chromosome.
#[derive(Debug)]
pub struct ChainEvaluator {
    models: Arc<ModelCache>,
    split: SplitKind,
    threshold: f64,
    predictions: RwLock<HashMap<Vec<usize>, Arc<Vec<Prediction>>>>,
    memo: RwLock<HashMap<Chromosome, Measurement>>,
}

impl ChainEvaluator {
    pub fn new(
        dataset: Arc<CostedDataset>,
        lambda: f64,
        threshold: f64,
        split: SplitKind,
    ) -> Result<Self> {
        Self::with_models(Arc::new(ModelCache::new(dataset, lambda)), threshold, split)
    }

    /// Shares already-fitted models with other evaluators.
    pub fn with_models(models: Arc<ModelCache>, threshold: f64, split: SplitKind) -> Result<Self> {
        check_threshold(threshold)?;
        if models.dataset().split(split).is_empty() {
            return Err(Error::Domain(format!("{split:?} split is empty")));
        }
        Ok(Self {
            models,
            split,
            threshold,
            predictions: RwLock::new(HashMap::new()),
            memo: RwLock::new(HashMap::new()),
        })
    }

    /// A sibling evaluator on another split or threshold, reusing the models.
    pub fn sibling(&self, threshold: f64, split: SplitKind) -> Result<Self> {
        Self::with_models(self.models.clone(), threshold, split)
    }

    pub fn models(&self) -> &Arc<ModelCache> {
        &self.models
    }

    pub fn dataset(&self) -> &CostedDataset {
        self.models.dataset()
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn split(&self) -> SplitKind {
        self.split
    }

    fn stage_predictions(&self, features: &[usize]) -> Result<Arc<Vec<Prediction>>> {
        if let Some(p) = self.predictions.read().unwrap().get(features) {
            return Ok(p.clone());
        }
        let model = self.models.model(features)?;
        let ds = self.dataset();
        let preds: Vec<Prediction> = ds
            .split(self.split)
            .iter()
            .map(|&i| model.predict(ds.row(i)))
            .collect();
        Ok(self
            .predictions
            .write()
            .unwrap()
            .entry(features.to_vec())
            .or_insert_with(|| Arc::new(preds))
            .clone())
    }

    /// The chain a chromosome stands for, built from cached models.
    pub fn chain(&self, chromosome: &Chromosome) -> Result<ClassifierChain> {
        let plan = StagePlan::from_chromosome(chromosome)?;
        let models = plan
            .cumulative_sets()
            .iter()
            .map(|s| self.models.model(s).map(|m| m as Arc<dyn StageModel>))
            .collect::<Result<Vec<_>>>()?;
        ClassifierChain::from_parts(plan, models, self.dataset().costs(), self.threshold)
    }

    fn compute(&self, chromosome: &Chromosome) -> Result<Measurement> {
        let plan = StagePlan::from_chromosome(chromosome)?;
        let stage_costs = plan.stage_costs(self.dataset().costs());
        let stage_preds = plan
            .cumulative_sets()
            .iter()
            .map(|s| self.stage_predictions(s))
            .collect::<Result<Vec<_>>>()?;
        // Cost of exiting at stage j, accumulated in stage order.
        let mut exit_cost = Vec::with_capacity(stage_costs.len());
        let mut acc = 0.0;
        for &c in &stage_costs {
            acc += c;
            exit_cost.push(acc);
        }
        let last = stage_preds.len() - 1;
        let ds = self.dataset();
        let mut tally = Tally::default();
        for (r, &i) in ds.split(self.split).iter().enumerate() {
            let exit = (0..=last)
                .find(|&j| stage_preds[j][r].confidence >= self.threshold)
                .unwrap_or(last);
            let p = stage_preds[exit][r];
            let accepted = p.confidence >= self.threshold;
            tally.push(accepted, p.label == ds.label(i), exit_cost[exit]);
        }
        tally.finish()
    }
}

impl Evaluate for ChainEvaluator {
    fn measure(&self, chromosome: &Chromosome) -> Result<Measurement> {
        if let Some(m) = self.memo.read().unwrap().get(chromosome) {
            return Ok(*m);
        }
        let m = self.compute(chromosome)?;
        self.memo.write().unwrap().insert(chromosome.clone(), m);
        Ok(m)
    }
}
