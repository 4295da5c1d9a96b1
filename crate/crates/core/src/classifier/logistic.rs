//! L2-regularized logistic regression fitted by damped Newton iterations.
//!
//! Two classes use the usual single-logit model; more classes use a softmax
//! over one weight vector per class. The objective is the summed negative
//! log-likelihood plus `lambda / 2 * |w|^2`; intercepts are not penalized.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Newton iteration cap.
pub const MAX_ITER: usize = 100;
/// Convergence threshold on the gradient's Euclidean norm.
pub const GRAD_TOL: f64 = 1e-6;

/// Per-feature z-score parameters fitted on the training split.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    /// Fits column means and standard deviations over `rows`. Constant
    /// columns get unit scale.
    pub fn fit<'a>(n_features: usize, rows: impl Iterator<Item = &'a [f64]>) -> Self {
        let mut count = 0usize;
        let mut mean = vec![0.0; n_features];
        let mut m2 = vec![0.0; n_features];
        for row in rows {
            count += 1;
            for j in 0..n_features {
                let delta = row[j] - mean[j];
                mean[j] += delta / count as f64;
                m2[j] += delta * (row[j] - mean[j]);
            }
        }
        let scale = m2
            .iter()
            .map(|&s| {
                let sd = if count > 0 { (s / count as f64).sqrt() } else { 0.0 };
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, scale }
    }

    pub fn identity(n_features: usize) -> Self {
        Self {
            mean: vec![0.0; n_features],
            scale: vec![1.0; n_features],
        }
    }

    #[inline]
    pub fn apply(&self, feature: usize, value: f64) -> f64 {
        (value - self.mean[feature]) / self.scale[feature]
    }
}

/// A fitted model over a fixed subset of the dataset's columns.
#[derive(Debug, Clone)]
pub struct LogisticModel {
    features: Vec<usize>,
    n_classes: usize,
    /// Binary: one row `[b, w...]` for the positive class. Multiclass: one
    /// row per class.
    coef: Vec<Vec<f64>>,
    standardizer: Arc<Standardizer>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

// log(1 + exp(z))
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

impl LogisticModel {
    /// Fits on the given rows using columns `features`. `labels[i]` must be
    /// below `n_classes`, and at least two distinct labels must occur.
    pub fn fit(
        features: &[usize],
        rows: &[&[f64]],
        labels: &[usize],
        n_classes: usize,
        lambda: f64,
        standardizer: Arc<Standardizer>,
    ) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::Domain("stage model needs at least one feature".into()));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::Config(format!("regularization must be >= 0, got {lambda}")));
        }
        let first = *labels
            .first()
            .ok_or_else(|| Error::Data("empty training split".into()))?;
        if labels.iter().all(|&y| y == first) {
            return Err(Error::DegenerateLabels(first));
        }
        let d = features.len() + 1;
        let mut x = DMatrix::<f64>::zeros(rows.len(), d);
        for (i, row) in rows.iter().enumerate() {
            x[(i, 0)] = 1.0;
            for (j, &f) in features.iter().enumerate() {
                let v = standardizer.apply(f, row[f]);
                if !v.is_finite() {
                    return Err(Error::Data(format!(
                        "non-finite training value in feature {f}"
                    )));
                }
                x[(i, j + 1)] = v;
            }
        }
        let coef = if n_classes == 2 {
            vec![fit_binary(&x, labels, lambda)?]
        } else {
            fit_multinomial(&x, labels, n_classes, lambda)?
        };
        Ok(Self {
            features: features.to_vec(),
            n_classes,
            coef,
            standardizer,
        })
    }

    pub fn features(&self) -> &[usize] {
        &self.features
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// Weights excluding intercepts, one vector per logit.
    pub fn weights(&self) -> Vec<&[f64]> {
        self.coef.iter().map(|c| &c[1..]).collect()
    }

    /// Class probabilities for a full (unstandardized) dataset row.
    pub fn predict_proba(&self, row: &[f64]) -> Vec<f64> {
        let logit = |c: &[f64]| {
            let mut z = c[0];
            for (j, &f) in self.features.iter().enumerate() {
                z += c[j + 1] * self.standardizer.apply(f, row[f]);
            }
            z
        };
        if self.n_classes == 2 {
            let p1 = sigmoid(logit(&self.coef[0]));
            vec![1.0 - p1, p1]
        } else {
            let mut z: Vec<f64> = self.coef.iter().map(|c| logit(c)).collect();
            softmax_in_place(&mut z);
            z
        }
    }
}

/// Minimizes a smooth convex objective by Newton steps with backtracking.
/// `eval` returns (value, gradient, hessian) at a point.
fn newton<F>(mut theta: DVector<f64>, mut eval: F) -> Result<DVector<f64>>
where
    F: FnMut(&DVector<f64>, bool) -> (f64, Option<(DVector<f64>, DMatrix<f64>)>),
{
    for _ in 0..MAX_ITER {
        let (value, derivs) = eval(&theta, true);
        let (grad, mut hess) = derivs.expect("derivatives requested");
        if grad.norm() <= GRAD_TOL {
            return Ok(theta);
        }
        for i in 0..hess.nrows() {
            hess[(i, i)] += 1e-10;
        }
        let step = match hess.clone().cholesky() {
            Some(ch) => ch.solve(&grad),
            None => hess
                .lu()
                .solve(&grad)
                .ok_or_else(|| Error::Internal("singular Newton system".into()))?,
        };
        let slope = grad.dot(&step);
        if slope <= f64::EPSILON * value.abs().max(1.0) {
            // Predicted decrease is below the objective's rounding.
            return Ok(theta);
        }
        let mut t = 1.0;
        loop {
            let candidate = &theta - t * &step;
            let (v, _) = eval(&candidate, false);
            if v < value && v <= value - 1e-4 * t * slope {
                theta = candidate;
                break;
            }
            t *= 0.5;
            if t < 1e-10 {
                // No representable decrease left: at the optimum up to rounding.
                return Ok(theta);
            }
        }
    }
    Ok(theta)
}

fn fit_binary(x: &DMatrix<f64>, labels: &[usize], lambda: f64) -> Result<Vec<f64>> {
    let d = x.ncols();
    let y: Vec<f64> = labels.iter().map(|&l| if l == 1 { 1.0 } else { 0.0 }).collect();
    let theta = newton(DVector::zeros(d), |theta, derivs| {
        let z = x * theta;
        let mut value = 0.0;
        for i in 0..z.len() {
            // -[y log p + (1-y) log(1-p)] = softplus(z) - y z
            value += softplus(z[i]) - y[i] * z[i];
        }
        let w2: f64 = theta.iter().skip(1).map(|w| w * w).sum();
        value += 0.5 * lambda * w2;
        if !derivs {
            return (value, None);
        }
        let mut resid = DVector::zeros(z.len());
        let mut xw = x.clone();
        for i in 0..z.len() {
            let p = sigmoid(z[i]);
            resid[i] = p - y[i];
            let s = p * (1.0 - p);
            for j in 0..d {
                xw[(i, j)] *= s;
            }
        }
        let mut grad = x.transpose() * resid;
        let mut hess = x.transpose() * xw;
        for j in 1..d {
            grad[j] += lambda * theta[j];
            hess[(j, j)] += lambda;
        }
        (value, Some((grad, hess)))
    })?;
    Ok(theta.iter().copied().collect())
}

fn fit_multinomial(
    x: &DMatrix<f64>,
    labels: &[usize],
    n_classes: usize,
    lambda: f64,
) -> Result<Vec<Vec<f64>>> {
    let (n, d) = (x.nrows(), x.ncols());
    let k = n_classes;
    let dim = k * d;
    let theta = newton(DVector::zeros(dim), |theta, derivs| {
        let mut value = 0.0;
        let mut probs = vec![vec![0.0; k]; n];
        for i in 0..n {
            let mut z: Vec<f64> = (0..k)
                .map(|c| (0..d).map(|j| theta[c * d + j] * x[(i, j)]).sum())
                .collect();
            let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            value += lse - z[labels[i]];
            softmax_in_place(&mut z);
            probs[i] = z;
        }
        for c in 0..k {
            for j in 1..d {
                value += 0.5 * lambda * theta[c * d + j].powi(2);
            }
        }
        if !derivs {
            return (value, None);
        }
        let mut grad = DVector::zeros(dim);
        let mut hess = DMatrix::zeros(dim, dim);
        for i in 0..n {
            let p = &probs[i];
            for c in 0..k {
                let r = p[c] - if labels[i] == c { 1.0 } else { 0.0 };
                for j in 0..d {
                    grad[c * d + j] += r * x[(i, j)];
                }
                for c2 in 0..k {
                    let w = p[c] * (if c == c2 { 1.0 } else { 0.0 } - p[c2]);
                    if w == 0.0 {
                        continue;
                    }
                    for j in 0..d {
                        let a = w * x[(i, j)];
                        for j2 in 0..d {
                            hess[(c * d + j, c2 * d + j2)] += a * x[(i, j2)];
                        }
                    }
                }
            }
        }
        for c in 0..k {
            for j in 1..d {
                grad[c * d + j] += lambda * theta[c * d + j];
                hess[(c * d + j, c * d + j)] += lambda;
            }
            // Softmax intercepts are shift-invariant; a small ridge keeps
            // the system definite without moving the optimum of interest.
            hess[(c * d, c * d)] += 1e-8;
        }
        (value, Some((grad, hess)))
    })?;
    Ok((0..k)
        .map(|c| theta.rows(c * d, d).iter().copied().collect())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(data: &[Vec<f64>]) -> Vec<&[f64]> {
        data.iter().map(|r| r.as_slice()).collect()
    }

    #[test]
    fn separable_binary_fits_perfectly() {
        let data: Vec<Vec<f64>> = vec![
            vec![-2.0, 1.0],
            vec![-1.5, -1.0],
            vec![-1.0, 0.5],
            vec![1.0, -0.5],
            vec![1.5, 1.0],
            vec![2.0, -1.0],
        ];
        let labels = [0, 0, 0, 1, 1, 1];
        let st = Arc::new(Standardizer::fit(2, data.iter().map(|r| r.as_slice())));
        let m = LogisticModel::fit(&[0, 1], &rows(&data), &labels, 2, 1.0, st).unwrap();
        for (r, &y) in data.iter().zip(&labels) {
            let p = m.predict_proba(r);
            assert!((p[0] + p[1] - 1.0).abs() < 1e-12);
            let pred = if p[1] > p[0] { 1 } else { 0 };
            assert_eq!(pred, y);
        }
    }

    #[test]
    fn gradient_vanishes_at_solution() {
        let data: Vec<Vec<f64>> = (0..40)
            .map(|i| vec![(i as f64 * 0.37).sin() * 3.0, (i as f64 * 0.11).cos()])
            .collect();
        let labels: Vec<usize> = (0..40).map(|i| ((i * 7) % 3 == 0) as usize).collect();
        let st = Arc::new(Standardizer::identity(2));
        let m = LogisticModel::fit(&[0, 1], &rows(&data), &labels, 2, 1.0, st).unwrap();
        // finite-difference check of stationarity on the penalized objective
        let obj = |c: &[f64]| -> f64 {
            let mut v = 0.0;
            for (r, &y) in data.iter().zip(&labels) {
                let z = c[0] + c[1] * r[0] + c[2] * r[1];
                v += softplus(z) - y as f64 * z;
            }
            v + 0.5 * (c[1] * c[1] + c[2] * c[2])
        };
        let c = m.coef[0].clone();
        for j in 0..3 {
            let h = 1e-5;
            let mut up = c.clone();
            up[j] += h;
            let mut dn = c.clone();
            dn[j] -= h;
            let g = (obj(&up) - obj(&dn)) / (2.0 * h);
            assert!(g.abs() < 1e-5, "component {j}: {g}");
        }
    }

    #[test]
    fn huge_penalty_recovers_class_prior() {
        let data: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64, (i % 4) as f64]).collect();
        let labels: Vec<usize> = (0..30).map(|i| (i % 3 == 0) as usize).collect();
        let st = Arc::new(Standardizer::fit(2, data.iter().map(|r| r.as_slice())));
        let m = LogisticModel::fit(&[0, 1], &rows(&data), &labels, 2, 1e6, st).unwrap();
        let prior = 10.0 / 30.0;
        for r in &data {
            assert!((m.predict_proba(r)[1] - prior).abs() < 1e-3);
        }
        assert!(m.weights()[0].iter().all(|w| w.abs() < 1e-3));
    }

    #[test]
    fn multinomial_probabilities_sum_to_one() {
        let data: Vec<Vec<f64>> = (0..60)
            .map(|i| vec![(i % 3) as f64 + 0.3 * ((i as f64) * 0.7).sin()])
            .collect();
        let labels: Vec<usize> = (0..60).map(|i| i % 3).collect();
        let st = Arc::new(Standardizer::fit(1, data.iter().map(|r| r.as_slice())));
        let m = LogisticModel::fit(&[0], &rows(&data), &labels, 3, 1.0, st).unwrap();
        let mut correct = 0;
        for (r, &y) in data.iter().zip(&labels) {
            let p = m.predict_proba(r);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            let arg = (0..3).fold(0, |b, c| if p[c] > p[b] { c } else { b });
            correct += (arg == y) as usize;
        }
        assert!(correct >= 55);
    }

    #[test]
    fn single_class_is_degenerate() {
        let data = vec![vec![1.0], vec![2.0]];
        let st = Arc::new(Standardizer::identity(1));
        assert!(matches!(
            LogisticModel::fit(&[0], &rows(&data), &[1, 1], 2, 1.0, st),
            Err(Error::DegenerateLabels(1))
        ));
    }
}
