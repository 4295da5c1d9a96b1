//! Per-stage classifiers and the sequential early-exit pipeline.
//!
//! Stage `j` sees every feature acquired in stages `1..=j`. An input leaves
//! the pipeline at the first stage whose top class probability reaches the
//! confidence threshold; if the last stage is still below it the input is
//! rejected with no label. Costs are charged once per feature, at the stage
//! that first acquires it.

mod logistic;

pub use logistic::{LogisticModel, Standardizer, GRAD_TOL, MAX_ITER};

use std::sync::Arc;

use crate::chromosome::Chromosome;
use crate::data::{CostedDataset, SplitKind};
use crate::error::{Error, Result};

/// Ordered, disjoint, non-empty feature groups covering every feature.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StagePlan {
    stages: Vec<Vec<usize>>,
    cumulative: Vec<Vec<usize>>,
}

impl StagePlan {
    pub fn new(stages: Vec<Vec<usize>>, n_features: usize) -> Result<Self> {
        if stages.is_empty() {
            return Err(Error::Domain("a stage plan needs at least one stage".into()));
        }
        let mut owner = vec![None; n_features];
        for (s, stage) in stages.iter().enumerate() {
            if stage.is_empty() {
                return Err(Error::Domain(format!("stage {} is empty", s + 1)));
            }
            for &f in stage {
                if f >= n_features {
                    return Err(Error::Domain(format!("feature {f} out of range")));
                }
                if let Some(prev) = owner[f] {
                    return Err(Error::Domain(format!(
                        "feature {f} assigned to stages {} and {}",
                        prev + 1,
                        s + 1
                    )));
                }
                owner[f] = Some(s);
            }
        }
        if let Some(f) = owner.iter().position(Option::is_none) {
            return Err(Error::Domain(format!("feature {f} belongs to no stage")));
        }
        let mut stages = stages;
        for s in &mut stages {
            s.sort_unstable();
        }
        let mut cumulative: Vec<Vec<usize>> = Vec::with_capacity(stages.len());
        let mut acc: Vec<usize> = Vec::new();
        for s in &stages {
            acc.extend_from_slice(s);
            acc.sort_unstable();
            cumulative.push(acc.clone());
        }
        Ok(Self { stages, cumulative })
    }

    /// Plan for a canonical chromosome.
    pub fn from_chromosome(c: &Chromosome) -> Result<Self> {
        if c.has_gaps() {
            return Err(Error::InvalidChromosome(format!(
                "{c} has an empty stage; compress it first"
            )));
        }
        Self::new(c.stages(), c.len())
    }

    pub fn n_stages(&self) -> usize {
        self.stages.len()
    }

    pub fn stages(&self) -> &[Vec<usize>] {
        &self.stages
    }

    pub fn cumulative_sets(&self) -> &[Vec<usize>] {
        &self.cumulative
    }

    /// Cost of the features first acquired at each stage.
    pub fn stage_costs(&self, costs: &[f64]) -> Vec<f64> {
        self.stages
            .iter()
            .map(|s| s.iter().map(|&f| costs[f]).sum())
            .collect()
    }
}

/// Top-class decision of one stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub label: usize,
    pub confidence: f64,
}

impl Prediction {
    /// Argmax with ties to the lowest class index.
    pub fn from_probabilities(p: &[f64]) -> Self {
        let mut label = 0;
        for (c, &v) in p.iter().enumerate().skip(1) {
            if v > p[label] {
                label = c;
            }
        }
        Self {
            label,
            confidence: p[label],
        }
    }
}

/// Anything that can score a full dataset row at one stage.
pub trait StageModel: Send + Sync + std::fmt::Debug {
    fn predict(&self, row: &[f64]) -> Prediction;
}

impl StageModel for LogisticModel {
    fn predict(&self, row: &[f64]) -> Prediction {
        Prediction::from_probabilities(&self.predict_proba(row))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvaluationTrace {
    /// 1-based index of the last stage that processed the input.
    pub exit_stage: usize,
    pub accepted: bool,
    pub predicted_label: Option<usize>,
    pub confidence: f64,
    pub incurred_cost: f64,
}

/// Walks the stages in order, calling `predict(j)` for stage `j` (0-based).
pub(crate) fn run_pipeline(
    stage_costs: &[f64],
    threshold: f64,
    mut predict: impl FnMut(usize) -> Result<Prediction>,
) -> Result<EvaluationTrace> {
    let last = stage_costs.len() - 1;
    let mut cost = 0.0;
    for (j, &stage_cost) in stage_costs.iter().enumerate() {
        cost += stage_cost;
        let p = predict(j)?;
        if p.confidence >= threshold {
            return Ok(EvaluationTrace {
                exit_stage: j + 1,
                accepted: true,
                predicted_label: Some(p.label),
                confidence: p.confidence,
                incurred_cost: cost,
            });
        }
        if j == last {
            return Ok(EvaluationTrace {
                exit_stage: j + 1,
                accepted: false,
                predicted_label: None,
                confidence: p.confidence,
                incurred_cost: cost,
            });
        }
    }
    unreachable!("plans have at least one stage")
}

pub fn check_threshold(threshold: f64) -> Result<()> {
    if (0.5..1.0).contains(&threshold) {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "confidence threshold must lie in [0.5, 1), got {threshold}"
        )))
    }
}

/// Trained stage models plus the exit rule.
#[derive(Debug, Clone)]
pub struct ClassifierChain {
    plan: StagePlan,
    models: Vec<Arc<dyn StageModel>>,
    stage_costs: Vec<f64>,
    threshold: f64,
}

impl ClassifierChain {
    /// Assembles a chain from already-built stage models.
    pub fn from_parts(
        plan: StagePlan,
        models: Vec<Arc<dyn StageModel>>,
        feature_costs: &[f64],
        threshold: f64,
    ) -> Result<Self> {
        check_threshold(threshold)?;
        if models.len() != plan.n_stages() {
            return Err(Error::Domain(format!(
                "{} models for {} stages",
                models.len(),
                plan.n_stages()
            )));
        }
        let stage_costs = plan.stage_costs(feature_costs);
        Ok(Self {
            plan,
            models,
            stage_costs,
            threshold,
        })
    }

    pub fn plan(&self) -> &StagePlan {
        &self.plan
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn stage_costs(&self) -> &[f64] {
        &self.stage_costs
    }

    pub fn evaluate_input(&self, row: &[f64]) -> Result<EvaluationTrace> {
        run_pipeline(&self.stage_costs, self.threshold, |j| {
            for &f in &self.plan.stages[j] {
                if !row.get(f).is_some_and(|v| v.is_finite()) {
                    return Err(Error::Data(format!("feature {f} missing at evaluation")));
                }
            }
            Ok(self.models[j].predict(row))
        })
    }
}

/// Fits one model per stage on the dataset's training split, each over the
/// stage's cumulative feature set, with z-scoring fitted on the same split.
pub fn train_chain(
    plan: StagePlan,
    dataset: &CostedDataset,
    lambda: f64,
    threshold: f64,
) -> Result<ClassifierChain> {
    let standardizer = Arc::new(fit_standardizer(dataset));
    let models = plan
        .cumulative_sets()
        .iter()
        .map(|set| {
            fit_stage(dataset, set, lambda, standardizer.clone())
                .map(|m| Arc::new(m) as Arc<dyn StageModel>)
        })
        .collect::<Result<Vec<_>>>()?;
    ClassifierChain::from_parts(plan, models, dataset.costs(), threshold)
}

pub fn fit_standardizer(dataset: &CostedDataset) -> Standardizer {
    let train = dataset.split(SplitKind::Train);
    Standardizer::fit(dataset.n_features(), train.iter().map(|&i| dataset.row(i)))
}

/// Fits a single model over `features` on the training split.
pub fn fit_stage(
    dataset: &CostedDataset,
    features: &[usize],
    lambda: f64,
    standardizer: Arc<Standardizer>,
) -> Result<LogisticModel> {
    let train = dataset.split(SplitKind::Train);
    let rows: Vec<&[f64]> = train.iter().map(|&i| dataset.row(i)).collect();
    let labels: Vec<usize> = train.iter().map(|&i| dataset.label(i)).collect();
    LogisticModel::fit(
        features,
        &rows,
        &labels,
        dataset.n_classes().max(2),
        lambda,
        standardizer,
    )
}
