use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::actuator::Recording;
use crate::features::{FeatureSet, Target};
use crate::models::{Prediction, Predictor};
use crate::signal_gen::Waveform;

/// Test-set outcome of one sensor model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub target: Target,
    /// Row and column labels of `confusion`, sorted.
    pub labels: Vec<String>,
    /// Row-normalized: entry `[t][p]` is the share of class `t` predicted
    /// as `p`. Rows of classes without test samples are all zero.
    pub confusion: Vec<Vec<f64>>,
    pub acr: Option<f64>,
    pub rmse: Option<f64>,
    pub n_test: usize,
    pub per_class_counts: BTreeMap<String, usize>,
}

impl EvalReport {
    /// Primary score: ACR for classifiers, RMSE for regressors.
    pub fn score(&self) -> f64 {
        self.acr.or(self.rmse).unwrap_or(f64::NAN)
    }

    /// Per-class recall, in `labels` order, for classes with test samples.
    pub fn recalls(&self) -> Vec<(String, f64)> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, l)| self.per_class_counts.get(*l).copied().unwrap_or(0) > 0)
            .map(|(i, l)| (l.clone(), self.confusion[i][i]))
            .collect()
    }

    /// Tab-separated table with one row per class (or one summary row for
    /// regression).
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        if let Some(rmse) = self.rmse {
            out.push_str("target\tn_test\trmse\n");
            out.push_str(&format!("{}\t{}\t{}\n", self.target, self.n_test, rmse));
            return out;
        }
        out.push_str("class\tcount\trecall");
        for l in &self.labels {
            out.push('\t');
            out.push_str(l);
        }
        out.push('\n');
        for (i, l) in self.labels.iter().enumerate() {
            let count = self.per_class_counts.get(l).copied().unwrap_or(0);
            out.push_str(&format!("{l}\t{count}\t{}", self.confusion[i][i]));
            for v in &self.confusion[i] {
                out.push_str(&format!("\t{v}"));
            }
            out.push('\n');
        }
        if let Some(acr) = self.acr {
            out.push_str(&format!("acr\t{}\t{acr}\n", self.n_test));
        }
        out
    }
}

/// Row-normalized confusion matrix and macro recall for label pairs.
pub fn confusion(truth: &[String], pred: &[String]) -> (Vec<String>, Vec<Vec<f64>>, BTreeMap<String, usize>) {
    let labels: Vec<String> = truth
        .iter()
        .chain(pred)
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let pos: BTreeMap<&str, usize> = labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let mut counts = vec![vec![0usize; labels.len()]; labels.len()];
    for (t, p) in truth.iter().zip(pred) {
        counts[pos[t.as_str()]][pos[p.as_str()]] += 1;
    }
    let mut per_class = BTreeMap::new();
    let matrix = counts
        .iter()
        .zip(&labels)
        .map(|(row, l)| {
            let n: usize = row.iter().sum();
            per_class.insert(l.clone(), n);
            row.iter()
                .map(|&c| if n == 0 { 0.0 } else { c as f64 / n as f64 })
                .collect()
        })
        .collect();
    (labels, matrix, per_class)
}

/// Mean recall over the classes present in `truth`.
pub fn macro_recall(truth: &[String], pred: &[String]) -> f64 {
    let (labels, matrix, per_class) = confusion(truth, pred);
    let recalls: Vec<f64> = labels
        .iter()
        .enumerate()
        .filter(|(_, l)| per_class[*l] > 0)
        .map(|(i, _)| matrix[i][i])
        .collect();
    if recalls.is_empty() {
        return 0.0;
    }
    recalls.iter().sum::<f64>() / recalls.len() as f64
}

pub fn rmse(truth: &[f64], pred: &[f64]) -> f64 {
    let n = truth.len().max(1) as f64;
    (truth.iter().zip(pred).map(|(t, p)| (p - t).powi(2)).sum::<f64>() / n).sqrt()
}

/// Scores `model` on `test`. Label predictions give a confusion matrix and
/// ACR; numeric predictions give RMSE.
pub fn evaluate(model: &dyn Predictor, test: &FeatureSet) -> Result<EvalReport, EvalError> {
    let target = model.target();
    let preds = model.predict_all(&test.features)?;
    let numeric = preds.first().is_some_and(|p| matches!(p, Prediction::Value(_)));
    if numeric {
        let truth = test.values(target).ok_or(EvalError::MissingTarget(target))?;
        let values: Vec<f64> = preds.iter().map(|p| p.value().unwrap_or(f64::NAN)).collect();
        return Ok(EvalReport {
            target,
            labels: Vec::new(),
            confusion: Vec::new(),
            acr: None,
            rmse: Some(rmse(&truth, &values)),
            n_test: test.len(),
            per_class_counts: BTreeMap::new(),
        });
    }
    let truth = test.class_labels(target).ok_or(EvalError::MissingTarget(target))?;
    let labels: Vec<String> = preds.iter().map(|p| p.to_string()).collect();
    Ok(report_from_labels(target, &truth, &labels))
}

pub fn report_from_labels(target: Target, truth: &[String], pred: &[String]) -> EvalReport {
    let (labels, confusion, per_class_counts) = confusion(truth, pred);
    EvalReport {
        target,
        acr: Some(macro_recall(truth, pred)),
        rmse: None,
        n_test: truth.len(),
        labels,
        confusion,
        per_class_counts,
    }
}

/// `10 log10(P_active / P_passive)` with `P` the mean square over the
/// common length. Returns `+inf` when the passive recording is silent.
pub fn snr_estimate(active: &Recording, passive: &Recording) -> Result<f64, EvalError> {
    snr_db(&active.waveform, &passive.waveform)
}

/// [`snr_estimate`] on bare waveforms.
pub fn snr_db(a: &Waveform, p: &Waveform) -> Result<f64, EvalError> {
    if a.sample_rate_hz != p.sample_rate_hz {
        return Err(EvalError::RateMismatch(a.sample_rate_hz, p.sample_rate_hz));
    }
    let n = a.len().min(p.len());
    if n == 0 {
        return Err(EvalError::EmptyRecording);
    }
    let power = |x: &[f64]| x[..n].iter().map(|v| v * v).sum::<f64>() / n as f64;
    let pn = power(&p.samples);
    if pn == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (power(&a.samples) / pn).log10())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn hand_computed_three_class_example() {
        // a: 3 of 4 right, b: 1 of 2, c: 2 of 2
        let truth = s(&["a", "a", "a", "a", "b", "b", "c", "c"]);
        let pred = s(&["a", "a", "a", "b", "b", "c", "c", "c"]);
        let r = report_from_labels(Target::Location, &truth, &pred);
        assert_eq!(r.labels, s(&["a", "b", "c"]));
        assert_eq!(r.confusion[0], vec![0.75, 0.25, 0.0]);
        assert_eq!(r.confusion[1], vec![0.0, 0.5, 0.5]);
        assert_eq!(r.confusion[2], vec![0.0, 0.0, 1.0]);
        assert!((r.acr.unwrap() - (0.75 + 0.5 + 1.0) / 3.0).abs() < 1e-15);
        for row in &r.confusion {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_predictor_is_chance() {
        let truth: Vec<String> = (0..60).map(|i| format!("c{}", i % 6)).collect();
        let pred = vec!["c0".to_string(); 60];
        assert!((macro_recall(&truth, &pred) - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn predicted_label_outside_truth_gets_a_zero_row() {
        let r = report_from_labels(Target::Location, &s(&["a", "a"]), &s(&["a", "z"]));
        assert_eq!(r.labels, s(&["a", "z"]));
        assert_eq!(r.confusion[1], vec![0.0, 0.0]);
        assert_eq!(r.acr, Some(0.5));
        assert_eq!(r.recalls(), vec![("a".to_string(), 0.5)]);
    }

    #[test]
    fn rmse_closed_form() {
        assert_eq!(rmse(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]), 3.0);
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
    }
}
