//! Datasets with per-feature acquisition costs and fixed train/validation/test
//! splits.

mod costs;
mod load;
mod split;
mod synthetic;

pub use costs::{CostMode, CostSchedule, CostSpec};
pub use load::{load_dataset, read_table};
pub use split::split_50_25_25;
pub use synthetic::{generate_synthetic, SyntheticSpec};

use crate::error::{Error, Result};

/// A labeled numeric matrix without costs or splits.
#[derive(Debug, Clone)]
pub struct Table {
    pub feature_names: Vec<String>,
    pub class_names: Vec<String>,
    /// Row-major, `labels.len() * feature_names.len()` values; `NaN` marks a
    /// missing cell.
    pub values: Vec<f64>,
    pub labels: Vec<usize>,
    /// Features that were integer-coded from text.
    pub categorical: Vec<bool>,
}

impl Table {
    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.n_features();
        &self.values[i * n..(i + 1) * n]
    }

    /// Fills missing cells with the training-split median (numeric) or mode
    /// (categorical) of each column.
    pub fn impute(&mut self, train: &[usize]) -> Result<()> {
        let n = self.n_features();
        for j in 0..n {
            let mut observed: Vec<f64> = train
                .iter()
                .map(|&i| self.values[i * n + j])
                .filter(|v| !v.is_nan())
                .collect();
            if (0..self.n_rows()).all(|i| !self.values[i * n + j].is_nan()) {
                continue;
            }
            if observed.is_empty() {
                return Err(Error::Data(format!(
                    "feature {:?} has no observed values in the training split",
                    self.feature_names[j]
                )));
            }
            let fill = if self.categorical[j] {
                mode(&mut observed)
            } else {
                median(&mut observed)
            };
            for i in 0..self.n_rows() {
                let cell = &mut self.values[i * n + j];
                if cell.is_nan() {
                    *cell = fill;
                }
            }
        }
        Ok(())
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

// Ties go to the smallest code.
fn mode(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let mut best = v[0];
    let mut best_run = 0;
    let mut i = 0;
    while i < v.len() {
        let mut j = i;
        while j < v.len() && v[j] == v[i] {
            j += 1;
        }
        if j - i > best_run {
            best_run = j - i;
            best = v[i];
        }
        i = j;
    }
    best
}

/// Index sets of the three disjoint splits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Splits {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

impl Splits {
    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.validation.len(), self.test.len())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SplitKind {
    Train,
    Validation,
    Test,
}

/// Feature matrix, labels, acquisition costs and splits.
#[derive(Debug, Clone)]
pub struct CostedDataset {
    table: Table,
    costs: Vec<f64>,
    splits: Splits,
}

impl CostedDataset {
    pub fn new(table: Table, costs: Vec<f64>, splits: Splits) -> Result<Self> {
        let n = table.n_features();
        if n == 0 || table.n_rows() == 0 {
            return Err(Error::Data("dataset has no rows or no features".into()));
        }
        if table.values.len() != n * table.n_rows() {
            return Err(Error::Data("feature matrix shape does not match labels".into()));
        }
        if costs.len() != n {
            return Err(Error::Data(format!(
                "{} costs supplied for {n} features",
                costs.len()
            )));
        }
        if let Some((i, c)) = costs
            .iter()
            .enumerate()
            .find(|(_, c)| !(c.is_finite() && **c > 0.0))
        {
            return Err(Error::Data(format!(
                "cost of feature {:?} must be positive, got {c}",
                table.feature_names[i]
            )));
        }
        if let Some(pos) = table.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!(
                "non-finite value in row {}, feature {:?}",
                pos / n,
                table.feature_names[pos % n]
            )));
        }
        let mut seen = vec![false; table.n_rows()];
        for &i in splits
            .train
            .iter()
            .chain(&splits.validation)
            .chain(&splits.test)
        {
            if i >= seen.len() || seen[i] {
                return Err(Error::Data(format!(
                    "split index {i} out of range or repeated"
                )));
            }
            seen[i] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Data("splits do not cover every row".into()));
        }
        Ok(Self {
            table,
            costs,
            splits,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.table.n_rows()
    }

    pub fn n_features(&self) -> usize {
        self.table.n_features()
    }

    pub fn n_classes(&self) -> usize {
        self.table.class_names.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.table.feature_names
    }

    pub fn class_names(&self) -> &[String] {
        &self.table.class_names
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn total_cost(&self) -> f64 {
        self.costs.iter().sum()
    }

    pub fn splits(&self) -> &Splits {
        &self.splits
    }

    pub fn split(&self, kind: SplitKind) -> &[usize] {
        match kind {
            SplitKind::Train => &self.splits.train,
            SplitKind::Validation => &self.splits.validation,
            SplitKind::Test => &self.splits.test,
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.table.row(i)
    }

    pub fn label(&self, i: usize) -> usize {
        self.table.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.table.labels
    }

    pub fn table(&self) -> &Table {
        &self.table
    }

    /// Same data with every cost multiplied by `factor`.
    pub fn with_scaled_costs(&self, factor: f64) -> Result<Self> {
        let costs = self.costs.iter().map(|c| c * factor).collect();
        Self::new(self.table.clone(), costs, self.splits.clone())
    }

    /// Builds a dataset from a complete table, splitting it 50-25-25 and
    /// imputing with training statistics.
    pub fn from_table(mut table: Table, costs: Vec<f64>, split_seed: u64) -> Result<Self> {
        let splits = split_50_25_25(&table.labels, split_seed)?;
        table.impute(&splits.train)?;
        Self::new(table, costs, splits)
    }
}
