use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Splits;
use crate::error::{Error, Result};

/// Stratified 50/25/25 train/validation/test split.
///
/// Within each class the shuffled rows are cut at `round(m/2)` and
/// `round(m/2) + round(m/4)`. If any class has fewer than three rows the split
/// falls back to treating all rows as one stratum.
pub fn split_50_25_25(labels: &[usize], seed: u64) -> Result<Splits> {
    let n = labels.len();
    if n < 4 {
        return Err(Error::Domain(format!(
            "need at least 4 rows to split, got {n}"
        )));
    }
    let n_classes = labels.iter().copied().max().unwrap() + 1;
    let mut strata: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &y) in labels.iter().enumerate() {
        strata[y].push(i);
    }
    strata.retain(|s| !s.is_empty());
    if strata.iter().any(|s| s.len() < 3) {
        log::warn!("a class has fewer than 3 rows; splitting without stratification");
        strata = vec![(0..n).collect()];
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Splits {
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
    };
    for mut stratum in strata {
        stratum.shuffle(&mut rng);
        let m = stratum.len() as f64;
        let n_train = (0.5 * m).round() as usize;
        let n_val = (0.25 * m).round() as usize;
        out.train.extend_from_slice(&stratum[..n_train]);
        out.validation
            .extend_from_slice(&stratum[n_train..n_train + n_val]);
        out.test.extend_from_slice(&stratum[n_train + n_val..]);
    }
    out.train.sort_unstable();
    out.validation.sort_unstable();
    out.test.sort_unstable();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_eight() {
        let labels = [0, 1, 0, 1, 0, 1, 0, 1];
        assert_eq!(split_50_25_25(&labels, 1).unwrap().sizes(), (4, 2, 2));
    }

    #[test]
    fn pima_sized() {
        let mut labels = vec![0; 500];
        labels.extend(vec![1; 268]);
        let s = split_50_25_25(&labels, 9).unwrap();
        assert_eq!(s.sizes(), (384, 192, 192));
        let pos_train = s.train.iter().filter(|&&i| labels[i] == 1).count();
        assert_eq!(pos_train, 134);
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let labels: Vec<usize> = (0..100).map(|i| i % 3).collect();
        let a = split_50_25_25(&labels, 5).unwrap();
        assert_eq!(a, split_50_25_25(&labels, 5).unwrap());
        assert_ne!(a, split_50_25_25(&labels, 6).unwrap());
    }

    #[test]
    fn tiny_class_falls_back() {
        let labels = [0, 0, 0, 0, 0, 0, 0, 1];
        let s = split_50_25_25(&labels, 2).unwrap();
        assert_eq!(s.sizes(), (4, 2, 2));
    }

    #[test]
    fn too_few_rows() {
        assert!(split_50_25_25(&[0, 1, 0], 0).is_err());
    }
}
