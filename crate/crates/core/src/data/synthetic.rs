//! Gaussian-cluster classification data.
//!
//! A simplified take on the familiar hypercube generator: each class owns
//! `clusters_per_class` clusters whose centroids sit on distinct vertices of
//! the `[-class_sep, class_sep]` hypercube over the informative features.
//! Points are centroid plus unit Gaussian noise. Remaining features are pure
//! unit Gaussian noise. Informative features occupy the first columns. There
//! is no redundant-feature mixing.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Deserialize;

use super::Table;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_features: usize,
    pub n_informative: usize,
    pub n_records: usize,
    #[serde(default = "default_class_sep")]
    pub class_sep: f64,
    #[serde(default)]
    pub label_noise_fraction: f64,
    #[serde(default = "default_clusters")]
    pub clusters_per_class: usize,
    /// Class proportions; normalized internally. Defaults to two equal classes.
    #[serde(default = "default_balance")]
    pub class_balance: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
}

fn default_class_sep() -> f64 {
    1.0
}
fn default_clusters() -> usize {
    2
}
fn default_balance() -> Vec<f64> {
    vec![0.5, 0.5]
}

impl SyntheticSpec {
    pub fn new(n_features: usize, n_informative: usize, n_records: usize) -> Self {
        Self {
            n_features,
            n_informative,
            n_records,
            class_sep: default_class_sep(),
            label_noise_fraction: 0.0,
            clusters_per_class: default_clusters(),
            class_balance: default_balance(),
            seed: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_features == 0 || self.n_records == 0 {
            return Err(Error::Config("synthetic data needs features and records".into()));
        }
        if self.n_informative == 0 || self.n_informative > self.n_features {
            return Err(Error::Config(format!(
                "n_informative={} must be in 1..={}",
                self.n_informative, self.n_features
            )));
        }
        if !(0.0..1.0).contains(&self.label_noise_fraction) {
            return Err(Error::Config("label_noise_fraction must lie in [0, 1)".into()));
        }
        if self.class_balance.len() < 2 || self.class_balance.iter().any(|&w| w <= 0.0) {
            return Err(Error::Config(
                "class_balance needs at least two positive weights".into(),
            ));
        }
        if self.clusters_per_class == 0 {
            return Err(Error::Config("clusters_per_class must be positive".into()));
        }
        let vertices = 2f64.powi(self.n_informative.min(60) as i32);
        if vertices < (self.class_balance.len() * self.clusters_per_class) as f64 {
            return Err(Error::Config(
                "too few informative features for distinct cluster centroids".into(),
            ));
        }
        Ok(())
    }

    /// Rows per class, summing exactly to `n_records`.
    fn class_counts(&self) -> Vec<usize> {
        let total: f64 = self.class_balance.iter().sum();
        let mut counts: Vec<usize> = self
            .class_balance
            .iter()
            .map(|w| (w / total * self.n_records as f64).floor() as usize)
            .collect();
        let mut short = self.n_records - counts.iter().sum::<usize>();
        let k = counts.len();
        let mut c = 0;
        while short > 0 {
            counts[c % k] += 1;
            short -= 1;
            c += 1;
        }
        counts
    }
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Table> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n_classes = spec.class_balance.len();
    let n = spec.n_features;
    let inf = spec.n_informative;

    let mut used = HashSet::new();
    let mut centroids: Vec<Vec<Vec<f64>>> = Vec::with_capacity(n_classes);
    for _ in 0..n_classes {
        let mut per_class = Vec::with_capacity(spec.clusters_per_class);
        for _ in 0..spec.clusters_per_class {
            let vertex = loop {
                let v: Vec<bool> = (0..inf).map(|_| rng.random::<bool>()).collect();
                if used.insert(v.clone()) {
                    break v;
                }
            };
            per_class.push(
                vertex
                    .iter()
                    .map(|&hi| if hi { spec.class_sep } else { -spec.class_sep })
                    .collect::<Vec<f64>>(),
            );
        }
        centroids.push(per_class);
    }

    let mut rows: Vec<(Vec<f64>, usize)> = Vec::with_capacity(spec.n_records);
    for (class, count) in spec.class_counts().into_iter().enumerate() {
        for r in 0..count {
            let centroid = &centroids[class][r % spec.clusters_per_class];
            let row: Vec<f64> = (0..n)
                .map(|j| {
                    let z: f64 = rng.sample(StandardNormal);
                    if j < inf {
                        centroid[j] + z
                    } else {
                        z
                    }
                })
                .collect();
            rows.push((row, class));
        }
    }

    let n_flip = (spec.label_noise_fraction * spec.n_records as f64).round() as usize;
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.shuffle(&mut rng);
    for &i in &order[..n_flip] {
        let old = rows[i].1;
        let shift = rng.random_range(1..n_classes);
        rows[i].1 = (old + shift) % n_classes;
    }
    rows.shuffle(&mut rng);

    let mut values = Vec::with_capacity(spec.n_records * n);
    let mut labels = Vec::with_capacity(spec.n_records);
    for (row, y) in rows {
        values.extend(row);
        labels.push(y);
    }
    Ok(Table {
        feature_names: (0..n).map(|j| format!("f{j}")).collect(),
        class_names: (0..n_classes).map(|c| c.to_string()).collect(),
        values,
        labels,
        categorical: vec![false; n],
    })
}
