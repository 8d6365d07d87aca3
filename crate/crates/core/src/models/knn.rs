use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{
    check_rows, class_labels, rows, Hyperparams, KnnTargets, Metric, ModelError, ModelKind, Params,
    Prediction, SensorModel, Weighting, MODEL_FORMAT_VERSION,
};
use crate::features::{FeatureSet, Target};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KnnMode {
    #[default]
    Classify,
    Regress,
}

/// Memorizes `data` for k-nearest-neighbor prediction of `target`.
pub fn knn_train(
    data: &FeatureSet,
    target: Target,
    k: usize,
    metric: Metric,
    mode: KnnMode,
) -> Result<SensorModel, ModelError> {
    if k == 0 {
        return Err(ModelError::InvalidHyperparameter("k must be at least 1".into()));
    }
    let dim = check_rows(data)?;
    if k > data.len() {
        return Err(ModelError::KTooLarge { k, n: data.len() });
    }
    let (kind, targets) = match mode {
        KnnMode::Classify => (ModelKind::KnnClassifier, KnnTargets::Labels(class_labels(data, target)?)),
        KnnMode::Regress => {
            if !target.is_numeric() {
                return Err(ModelError::WrongTargetType {
                    target,
                    task: "regression",
                });
            }
            let values = data.values(target).ok_or(ModelError::WrongTargetType {
                target,
                task: "regression",
            })?;
            (ModelKind::KnnRegressor, KnnTargets::Values(values))
        }
    };
    Ok(SensorModel {
        version: MODEL_FORMAT_VERSION,
        kind,
        target,
        feature_dim: dim,
        hyperparams: Hyperparams::Knn {
            k,
            metric,
            weighting: Weighting::Uniform,
        },
        params: Params::Knn {
            points: rows(data),
            targets,
        },
    })
}

/// Neighbors are ordered by distance, then by their target, so the
/// selected multiset does not depend on training-set order.
pub(super) fn predict(
    points: &[Vec<f64>],
    targets: &KnnTargets,
    k: usize,
    metric: Metric,
    x: &[f64],
) -> Prediction {
    let dist = points.iter().map(|p| metric.distance(p, x));
    match targets {
        KnnTargets::Labels(labels) => {
            let neighbors = dist.zip(labels.iter().map(String::as_str)).collect();
            Prediction::Label(vote(neighbors, k).to_string())
        }
        KnnTargets::Values(values) => {
            let mut neighbors: Vec<(f64, f64)> = dist.zip(values.iter().copied()).collect();
            neighbors.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.total_cmp(&b.1)));
            let mean = neighbors[..k].iter().map(|n| n.1).sum::<f64>() / k as f64;
            Prediction::Value(mean)
        }
    }
}

/// Majority label among the `k` nearest `(distance, label)` pairs. Ties
/// go to the smaller summed distance, then to the smaller label.
pub(super) fn vote<'a>(mut neighbors: Vec<(f64, &'a str)>, k: usize) -> &'a str {
    neighbors.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));
    let mut votes: BTreeMap<&str, (usize, f64)> = BTreeMap::new();
    for &(d, label) in &neighbors[..k] {
        let e = votes.entry(label).or_insert((0, 0.0));
        e.0 += 1;
        e.1 += d;
    }
    // Labels iterate in lexicographic order; only a strictly better entry replaces.
    let mut best: Option<(&str, usize, f64)> = None;
    for (label, (count, sum)) in votes {
        let better = match best {
            None => true,
            Some((_, bc, bs)) => match count.cmp(&bc) {
                Ordering::Greater => true,
                Ordering::Equal => sum < bs,
                Ordering::Less => false,
            },
        };
        if better {
            best = Some((label, count, sum));
        }
    }
    best.map_or("", |b| b.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::testutil::{feature, set};
    use crate::models::Predictor;

    #[test]
    fn stores_training_set() {
        let pts: Vec<Vec<f64>> = (0..90).map(|i| vec![i as f64, 0.0]).collect();
        let labels: Vec<f64> = (0..90).map(|i| (i % 6) as f64).collect();
        let m = knn_train(&set(&pts, &labels), Target::Force, 5, Metric::L2, KnnMode::Classify).unwrap();
        match &m.params {
            Params::Knn { points, .. } => assert_eq!(points.len(), 90),
            _ => panic!(),
        }
        assert_eq!(m.kind, ModelKind::KnnClassifier);
        assert_eq!(
            knn_train(&set(&pts, &labels), Target::Force, 91, Metric::L2, KnnMode::Classify),
            Err(ModelError::KTooLarge { k: 91, n: 90 })
        );
    }

    #[test]
    fn rejects_bad_inputs() {
        let data = set(&[vec![0.0]], &[1.0]);
        assert_eq!(
            knn_train(&data, Target::Material, 1, Metric::L2, KnnMode::Regress),
            Err(ModelError::WrongTargetType {
                target: Target::Material,
                task: "regression"
            })
        );
        assert_eq!(
            knn_train(&set(&[], &[]), Target::Force, 1, Metric::L2, KnnMode::Classify),
            Err(ModelError::EmptyData)
        );
        let m = knn_train(&data, Target::Force, 1, Metric::L2, KnnMode::Classify).unwrap();
        assert_eq!(
            m.predict(&feature(vec![0.0, 1.0])),
            Err(ModelError::DimMismatch { expected: 1, found: 2 })
        );
    }

    #[test]
    fn exact_match_with_k1() {
        let data = set(&[vec![0.0, 0.0], vec![1.0, 1.0], vec![5.0, 5.0]], &[1.0, 2.0, 3.0]);
        let m = knn_train(&data, Target::Force, 1, Metric::L1, KnnMode::Classify).unwrap();
        assert_eq!(m.predict(&feature(vec![1.0, 1.0])).unwrap().label(), Some("2N"));
    }

    #[test]
    fn regression_of_identical_neighbors() {
        let mut pts = vec![vec![0.0]; 5];
        pts.extend(vec![vec![10.0]; 5]);
        let mut ys = vec![0.0; 5];
        ys.extend(vec![30.0; 5]);
        let m = knn_train(&set(&pts, &ys), Target::Force, 5, Metric::L2, KnnMode::Regress).unwrap();
        assert_eq!(m.predict(&feature(vec![0.0])).unwrap().value(), Some(0.0));
    }

    #[test]
    fn regression_mean_of_three() {
        let pts: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64]).collect();
        let ys = [0.0, 3.0, 6.0, 9.0, 12.0];
        let m = knn_train(&set(&pts, &ys), Target::Force, 3, Metric::L2, KnnMode::Regress).unwrap();
        assert_eq!(m.predict(&feature(vec![2.0])).unwrap().value(), Some(6.0));
    }

    #[test]
    fn vote_ties_break_on_distance_then_label() {
        // Two votes each.
        let data = set(
            &[vec![1.0], vec![-1.0], vec![1.5], vec![-1.5]],
            &[2.0, 1.0, 2.0, 1.0],
        );
        let m = knn_train(&data, Target::Force, 4, Metric::L2, KnnMode::Classify).unwrap();
        // Distances from 0: symmetric, so sums tie and the lexicographic label wins.
        assert_eq!(m.predict(&feature(vec![0.0])).unwrap().label(), Some("1N"));
        // Shift the query so the "2N" side is closer.
        assert_eq!(m.predict(&feature(vec![0.1])).unwrap().label(), Some("2N"));
    }
}
