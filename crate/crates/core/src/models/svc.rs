//! One-vs-rest linear SVC.
//!
//! Each binary problem minimizes `1/2 |w|^2 + C sum max(0, 1 - y (w.x + b))`
//! with an unregularized bias. The dual is solved by SMO with second-order
//! working-set selection on a precomputed Gram matrix, which lets grid
//! search share one matrix across folds and C values. Training stops when
//! the relative duality gap falls below the tolerance.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    check_rows, class_labels, dot, rows, Hyperparams, ModelError, ModelKind, Params, Scaler,
    SensorModel, MODEL_FORMAT_VERSION,
};
use crate::features::{FeatureSet, Target};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvcOptions {
    /// Relative duality gap at which training stops.
    pub tolerance: f64,
    /// One epoch is as many SMO steps as there are training samples.
    pub max_epochs: usize,
    /// Standardize features with training-set statistics. Off by default.
    pub standardize: bool,
}

impl Default for SvcOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-3,
            max_epochs: 1000,
            standardize: false,
        }
    }
}

/// Solver outcome over all one-vs-rest problems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvcDiagnostics {
    pub converged: bool,
    /// Largest epoch count over the binary problems.
    pub epochs: usize,
    /// Largest final relative duality gap.
    pub relative_gap: f64,
    /// Per class, the primal objective of the returned iterate after each
    /// epoch (index 0 is the starting point).
    pub loss_traces: Vec<Vec<f64>>,
}

/// Linear SVC with default options.
pub fn svc_train(data: &FeatureSet, target: Target, c: f64) -> Result<SensorModel, ModelError> {
    svc_train_with(data, target, c, &SvcOptions::default())
}

pub fn svc_train_with(
    data: &FeatureSet,
    target: Target,
    c: f64,
    options: &SvcOptions,
) -> Result<SensorModel, ModelError> {
    check_options(c, options)?;
    let dim = check_rows(data)?;
    let labels = class_labels(data, target)?;
    let mut x = rows(data);
    let scaler = options.standardize.then(|| Scaler::fit(&x));
    if let Some(s) = &scaler {
        x = x.iter().map(|r| s.apply(r)).collect();
    }
    let gram = Gram::new(&x);
    let all: Vec<usize> = (0..x.len()).collect();
    let fit = fit_gram(&gram, &all, &labels, c, options)?;

    let weights = fit
        .alphas
        .iter()
        .map(|coef| {
            let mut w = vec![0.0; dim];
            for (row, &a) in x.iter().zip(coef) {
                if a != 0.0 {
                    w.iter_mut().zip(row).for_each(|(wi, xi)| *wi += a * xi);
                }
            }
            w
        })
        .collect();
    if !fit.diagnostics.converged {
        log::warn!(
            "linear SVC did not converge: gap {:.3e} after {} epochs",
            fit.diagnostics.relative_gap,
            fit.diagnostics.epochs
        );
    }
    Ok(SensorModel {
        version: MODEL_FORMAT_VERSION,
        kind: ModelKind::LinearSvc,
        target,
        feature_dim: dim,
        hyperparams: Hyperparams::Svc {
            c,
            tolerance: options.tolerance,
            max_epochs: options.max_epochs,
        },
        params: Params::Svc {
            classes: fit.classes,
            weights,
            biases: fit.biases,
            scaler,
            diagnostics: fit.diagnostics,
        },
    })
}

pub(super) fn check_options(c: f64, options: &SvcOptions) -> Result<(), ModelError> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(ModelError::InvalidHyperparameter(format!("C must be positive, got {c}")));
    }
    if !(options.tolerance > 0.0) || options.max_epochs == 0 {
        return Err(ModelError::InvalidHyperparameter(
            "tolerance and max_epochs must be positive".into(),
        ));
    }
    Ok(())
}

/// Highest score; ties go to the first (lexicographically smallest) class.
pub(super) fn argmax(scores: &[(String, f64)]) -> &str {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if s.1 > scores[best].1 {
            best = i;
        }
    }
    &scores[best].0
}

/// Symmetric matrix of inner products between training rows.
pub(crate) struct Gram {
    n: usize,
    k: Vec<f64>,
}

impl Gram {
    pub fn new(x: &[Vec<f64>]) -> Self {
        let n = x.len();
        let upper: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| (i..n).map(|j| dot(&x[i], &x[j])).collect())
            .collect();
        let mut k = vec![0.0; n * n];
        for (i, row) in upper.iter().enumerate() {
            for (off, &v) in row.iter().enumerate() {
                let j = i + off;
                k[i * n + j] = v;
                k[j * n + i] = v;
            }
        }
        Self { n, k }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.k[i * self.n + j]
    }
}

/// Dual solution for the rows `index` of a Gram matrix.
pub(crate) struct GramFit {
    pub classes: Vec<String>,
    /// Per class, the signed dual coefficients `alpha_i y_i`.
    pub alphas: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    pub diagnostics: SvcDiagnostics,
}

impl GramFit {
    /// Predicted class of Gram row `row`, scored against training rows `index`.
    pub fn predict(&self, gram: &Gram, index: &[usize], row: usize) -> &str {
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for (c, (coef, b)) in self.alphas.iter().zip(&self.biases).enumerate() {
            let s = index
                .iter()
                .zip(coef)
                .filter(|(_, &a)| a != 0.0)
                .map(|(&i, &a)| a * gram.get(i, row))
                .sum::<f64>()
                + b;
            if s > best_score {
                best_score = s;
                best = c;
            }
        }
        &self.classes[best]
    }
}

/// Trains one binary problem per class on the Gram rows `index` whose
/// labels are `labels` (parallel to `index`).
pub(crate) fn fit_gram(
    gram: &Gram,
    index: &[usize],
    labels: &[String],
    c: f64,
    options: &SvcOptions,
) -> Result<GramFit, ModelError> {
    let classes: Vec<String> = labels.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    if classes.len() < 2 {
        return Err(classes
            .into_iter()
            .next()
            .map_or(ModelError::EmptyData, ModelError::SingleClass));
    }
    let n = index.len();
    let mut local = vec![0.0; n * n];
    for (a, &i) in index.iter().enumerate() {
        for (b, &j) in index.iter().enumerate() {
            local[a * n + b] = gram.get(i, j);
        }
    }
    let fits: Vec<BinaryFit> = classes
        .par_iter()
        .map(|class| {
            let y: Vec<f64> = labels.iter().map(|l| if l == class { 1.0 } else { -1.0 }).collect();
            solve_binary(&local, &y, c, options)
        })
        .collect();
    let diagnostics = SvcDiagnostics {
        converged: fits.iter().all(|f| f.converged),
        epochs: fits.iter().map(|f| f.epochs).max().unwrap_or(0),
        relative_gap: fits.iter().map(|f| f.gap).fold(0.0, f64::max),
        loss_traces: fits.iter().map(|f| f.trace.clone()).collect(),
    };
    Ok(GramFit {
        classes,
        alphas: fits.iter().map(|f| f.coef.clone()).collect(),
        biases: fits.iter().map(|f| f.b).collect(),
        diagnostics,
    })
}

struct BinaryFit {
    coef: Vec<f64>,
    b: f64,
    converged: bool,
    epochs: usize,
    gap: f64,
    trace: Vec<f64>,
}

/// Primal objective at the bias minimizing the hinge sum, given the
/// margins `f` (without bias) and `|w|^2`.
fn primal(f: &[f64], y: &[f64], w_sq: f64, c: f64) -> (f64, f64) {
    let hinge = |b: f64| -> f64 {
        f.iter()
            .zip(y)
            .map(|(fi, yi)| (1.0 - yi * (fi + b)).max(0.0))
            .sum()
    };
    // The hinge sum is convex and piecewise linear with kinks at y_i - f_i.
    let mut best_b = 0.0;
    let mut best = hinge(0.0);
    for (fi, yi) in f.iter().zip(y) {
        let b = yi - fi;
        let h = hinge(b);
        if h < best {
            best = h;
            best_b = b;
        }
    }
    (0.5 * w_sq + c * best, best_b)
}

const TAU: f64 = 1e-12;

fn solve_binary(k: &[f64], y: &[f64], c: f64, options: &SvcOptions) -> BinaryFit {
    let n = y.len();
    let kk = |i: usize, j: usize| k[i * n + j];
    let mut alpha = vec![0.0; n];
    // Gradient of 1/2 a'Qa - e'a with Q_ij = y_i y_j K_ij.
    let mut grad = vec![-1.0; n];

    let evaluate = |alpha: &[f64], grad: &[f64]| -> (f64, f64, f64) {
        // y_i f_i = (Q alpha)_i = grad_i + 1
        let f: Vec<f64> = grad.iter().zip(y).map(|(g, yi)| yi * (g + 1.0)).collect();
        let w_sq: f64 = alpha.iter().zip(grad).map(|(a, g)| a * (g + 1.0)).sum();
        let dual = alpha.iter().sum::<f64>() - 0.5 * w_sq;
        let (p, b) = primal(&f, y, w_sq, c);
        (p, dual, b)
    };

    let (p0, _, b0) = evaluate(&alpha, &grad);
    let mut best = (p0, alpha.clone(), b0);
    let mut trace = vec![p0];
    let mut gap = f64::INFINITY;
    let mut converged = false;
    let mut epochs = 0;

    while epochs < options.max_epochs {
        epochs += 1;
        let mut optimal = false;
        for _ in 0..n {
            let Some((i, j)) = select_working_set(&alpha, &grad, y, c, &kk) else {
                optimal = true;
                break;
            };
            let (old_i, old_j) = (alpha[i], alpha[j]);
            if y[i] != y[j] {
                let quad = (kk(i, i) + kk(j, j) - 2.0 * kk(i, j)).max(TAU);
                let delta = (-grad[i] - grad[j]) / quad;
                let diff = alpha[i] - alpha[j];
                alpha[i] += delta;
                alpha[j] += delta;
                if diff > 0.0 {
                    if alpha[j] < 0.0 {
                        alpha[j] = 0.0;
                        alpha[i] = diff;
                    }
                } else if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = -diff;
                }
                if diff > 0.0 {
                    if alpha[i] > c {
                        alpha[i] = c;
                        alpha[j] = c - diff;
                    }
                } else if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = c + diff;
                }
            } else {
                let quad = (kk(i, i) + kk(j, j) - 2.0 * kk(i, j)).max(TAU);
                let delta = (grad[i] - grad[j]) / quad;
                let sum = alpha[i] + alpha[j];
                alpha[i] -= delta;
                alpha[j] += delta;
                if sum > c {
                    if alpha[i] > c {
                        alpha[i] = c;
                        alpha[j] = sum - c;
                    }
                    if alpha[j] > c {
                        alpha[j] = c;
                        alpha[i] = sum - c;
                    }
                } else {
                    if alpha[j] < 0.0 {
                        alpha[j] = 0.0;
                        alpha[i] = sum;
                    }
                    if alpha[i] < 0.0 {
                        alpha[i] = 0.0;
                        alpha[j] = sum;
                    }
                }
            }
            let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
            for t in 0..n {
                grad[t] += y[t] * (y[i] * kk(i, t) * di + y[j] * kk(j, t) * dj);
            }
        }

        let (p, d, b) = evaluate(&alpha, &grad);
        if p < best.0 {
            best = (p, alpha.clone(), b);
        }
        trace.push(best.0);
        gap = (best.0 - d).max(0.0) / best.0.abs().max(f64::MIN_POSITIVE);
        if optimal || gap <= options.tolerance {
            converged = true;
            break;
        }
    }

    let (_, alpha, b) = best;
    BinaryFit {
        coef: alpha.iter().zip(y).map(|(a, yi)| a * yi).collect(),
        b,
        converged,
        epochs,
        gap,
        trace,
    }
}

/// Maximal-violating `i` and second-order `j`; `None` once KKT holds.
fn select_working_set(
    alpha: &[f64],
    grad: &[f64],
    y: &[f64],
    c: f64,
    kk: &impl Fn(usize, usize) -> f64,
) -> Option<(usize, usize)> {
    let mut gmax = f64::NEG_INFINITY;
    let mut i = None;
    for t in 0..y.len() {
        let up = if y[t] > 0.0 { alpha[t] < c } else { alpha[t] > 0.0 };
        if up && -y[t] * grad[t] >= gmax {
            gmax = -y[t] * grad[t];
            i = Some(t);
        }
    }
    let i = i?;
    let mut gmax2 = f64::NEG_INFINITY;
    let mut j = None;
    let mut best_obj = f64::INFINITY;
    for t in 0..y.len() {
        let low = if y[t] > 0.0 { alpha[t] > 0.0 } else { alpha[t] < c };
        if !low {
            continue;
        }
        let v = y[t] * grad[t];
        gmax2 = gmax2.max(v);
        let grad_diff = gmax + v;
        if grad_diff > 0.0 {
            let quad = (kk(i, i) + kk(t, t) - 2.0 * kk(i, t)).max(TAU);
            let obj = -(grad_diff * grad_diff) / quad;
            if obj <= best_obj {
                best_obj = obj;
                j = Some(t);
            }
        }
    }
    if gmax + gmax2 < 1e-12 {
        return None;
    }
    j.map(|j| (i, j))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::testutil::{feature, set};
    use crate::models::Predictor;

    fn train_acc(m: &SensorModel, data: &FeatureSet) -> f64 {
        let hits = data
            .features
            .iter()
            .zip(&data.labels)
            .filter(|(x, l)| m.predict(x).unwrap().label() == Target::Force.class_label(l).as_deref())
            .count();
        hits as f64 / data.len() as f64
    }

    #[test]
    fn separable_pair_of_points() {
        let mut pts = vec![vec![0.0, 0.0]; 5];
        pts.extend(vec![vec![10.0, 10.0]; 5]);
        let mut ys = vec![1.0; 5];
        ys.extend(vec![2.0; 5]);
        let data = set(&pts, &ys);
        let m = svc_train(&data, Target::Force, 100.0).unwrap();
        assert_eq!(train_acc(&m, &data), 1.0);
        let a = m.class_scores(&feature(vec![0.0, 0.0])).unwrap();
        assert!(a[0].1 > 0.0 && a[0].1 > a[1].1, "{a:?}");
        let b = m.class_scores(&feature(vec![10.0, 10.0])).unwrap();
        assert!(b[1].1 > 0.0 && b[1].1 > b[0].1, "{b:?}");
    }

    #[test]
    fn closed_form_two_point_margin() {
        // x = +-1 with labels +-1: optimum is w = min(1, 2C), b = 0.
        for c in [0.1, 0.25, 0.5, 2.0, 100.0] {
            let data = set(&[vec![1.0], vec![-1.0]], &[1.0, 2.0]);
            let m = svc_train_with(
                &data,
                Target::Force,
                c,
                &SvcOptions {
                    tolerance: 1e-9,
                    ..SvcOptions::default()
                },
            )
            .unwrap();
            let Params::Svc { weights, biases, .. } = &m.params else {
                panic!()
            };
            let expect = (2.0 * c).min(1.0);
            assert!((weights[0][0] - expect).abs() < 1e-6, "C={c}: {:?}", weights);
            assert!(biases[0].abs() < 1e-6);
        }
    }

    #[test]
    fn xor_is_not_separable() {
        let data = set(
            &[vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]],
            &[1.0, 1.0, 2.0, 2.0],
        );
        let m = svc_train(&data, Target::Force, 100.0).unwrap();
        assert!(train_acc(&m, &data) <= 0.75);
    }

    #[test]
    fn single_class_is_rejected() {
        let data = set(&[vec![0.0], vec![1.0]], &[1.0, 1.0]);
        assert_eq!(
            svc_train(&data, Target::Force, 1.0),
            Err(ModelError::SingleClass("1N".into()))
        );
        assert!(matches!(
            svc_train(&data, Target::Force, 0.0),
            Err(ModelError::InvalidHyperparameter(_))
        ));
    }

    #[test]
    fn epoch_limit_is_reported_not_fatal() {
        let pts: Vec<Vec<f64>> = (0..40).map(|i| vec![(i as f64 * 0.37).sin(), (i as f64 * 1.3).cos()]).collect();
        let ys: Vec<f64> = (0..40).map(|i| (i % 3) as f64).collect();
        let m = svc_train_with(
            &set(&pts, &ys),
            Target::Force,
            1e6,
            &SvcOptions {
                tolerance: 1e-12,
                max_epochs: 1,
                standardize: false,
            },
        )
        .unwrap();
        assert!(matches!(m.require_converged(), Err(ModelError::NotConverged { epochs: 1, .. })));
    }

    #[test]
    fn argmax_ties_go_to_first_class() {
        let s = vec![("a".to_string(), 1.0), ("b".to_string(), 1.0)];
        assert_eq!(argmax(&s), "a");
    }
}
