use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::knn::vote;
use super::svc::{check_options, fit_gram, Gram};
use super::{check_rows, class_labels, rows, Hyperparams, Metric, ModelError, SvcOptions};
use crate::eval::macro_recall;
use crate::features::{FeatureSet, Target};
use crate::rng;

pub const DEFAULT_FOLDS: usize = 5;

/// Candidate hyperparameters for one learner family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum ParamGrid {
    Knn { k: Vec<usize>, metric: Vec<Metric> },
    Svc { c: Vec<f64> },
}

impl ParamGrid {
    /// k in {1, 2, 3, 5, 10} crossed with L1 and L2.
    pub fn knn_default() -> Self {
        ParamGrid::Knn {
            k: vec![1, 2, 3, 5, 10],
            metric: vec![Metric::L1, Metric::L2],
        }
    }

    /// C = 10^-2 .. 10^10 in decades.
    pub fn svc_default() -> Self {
        ParamGrid::Svc {
            c: (-2..=10).map(|e| format!("1e{e}").parse().unwrap()).collect(),
        }
    }

    /// Grid points in search order; for KNN, k varies slowest.
    pub fn points(&self) -> Vec<Hyperparams> {
        match self {
            ParamGrid::Knn { k, metric } => k
                .iter()
                .flat_map(|&k| metric.iter().map(move |&m| Hyperparams::knn(k, m)))
                .collect(),
            ParamGrid::Svc { c } => c.iter().map(|&c| Hyperparams::svc(c)).collect(),
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let empty = match self {
            ParamGrid::Knn { k, metric } => k.is_empty() || metric.is_empty(),
            ParamGrid::Svc { c } => c.is_empty(),
        };
        if empty {
            return Err(ModelError::InvalidHyperparameter("grid has an empty parameter list".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvScore {
    pub params: Hyperparams,
    pub fold_scores: Vec<f64>,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub best: Hyperparams,
    pub best_score: f64,
    pub table: Vec<CvScore>,
}

/// Test-fold indices for stratified k-fold cross-validation. Each class is
/// shuffled with `seed` and dealt round-robin over the folds, continuing
/// where the previous class stopped so fold sizes stay balanced.
pub fn stratified_folds(labels: &[String], folds: usize, seed: u64) -> Result<Vec<Vec<usize>>, ModelError> {
    if folds < 2 {
        return Err(ModelError::InvalidHyperparameter("need at least 2 folds".into()));
    }
    let mut by_class: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    let mut out = vec![Vec::new(); folds];
    let mut next = 0;
    for (class, mut members) in by_class {
        if members.len() < folds {
            return Err(ModelError::TooFewPerClass {
                class: class.to_string(),
                count: members.len(),
                folds,
            });
        }
        members.shuffle(&mut rng::stream(rng::derive(seed, &[rng::hash_str(class)])));
        for i in members {
            out[next % folds].push(i);
            next += 1;
        }
    }
    for f in &mut out {
        f.sort_unstable();
    }
    Ok(out)
}

/// Cross-validated search over `grid` for a classifier of `target`.
/// Scores are mean macro recall over folds; the first grid point with the
/// highest mean wins.
pub fn grid_search(
    data: &FeatureSet,
    target: Target,
    grid: &ParamGrid,
    folds: usize,
    seed: u64,
) -> Result<GridResult, ModelError> {
    grid.validate()?;
    check_rows(data)?;
    let labels = class_labels(data, target)?;
    let test_folds = stratified_folds(&labels, folds, seed)?;
    let splits: Vec<(Vec<usize>, Vec<usize>)> = test_folds
        .iter()
        .map(|test| {
            let train = (0..labels.len()).filter(|i| test.binary_search(i).is_err()).collect();
            (train, test.clone())
        })
        .collect();
    let x = rows(data);
    let points = grid.points();

    let fold_scores: Vec<Vec<f64>> = match grid {
        ParamGrid::Knn { metric, k } => {
            if let Some(&k) = k.iter().find(|&&k| k == 0) {
                return Err(ModelError::InvalidHyperparameter(format!("k = {k}")));
            }
            let max_k = *k.iter().max().unwrap_or(&1);
            let min_train = splits.iter().map(|s| s.0.len()).min().unwrap_or(0);
            if max_k > min_train {
                return Err(ModelError::KTooLarge { k: max_k, n: min_train });
            }
            let mut dist: BTreeMap<Metric, Vec<Vec<f64>>> = BTreeMap::new();
            for &m in metric {
                dist.entry(m).or_insert_with(|| pairwise(&x, m));
            }
            points
                .par_iter()
                .map(|p| {
                    let Hyperparams::Knn { k, metric, .. } = *p else {
                        unreachable!()
                    };
                    let d = &dist[&metric];
                    splits
                        .iter()
                        .map(|(train, test)| {
                            let pred: Vec<String> = test
                                .iter()
                                .map(|&t| {
                                    let nb = train.iter().map(|&i| (d[t][i], labels[i].as_str())).collect();
                                    vote(nb, k).to_string()
                                })
                                .collect();
                            let truth: Vec<String> = test.iter().map(|&t| labels[t].clone()).collect();
                            macro_recall(&truth, &pred)
                        })
                        .collect()
                })
                .collect()
        }
        ParamGrid::Svc { .. } => {
            let gram = Gram::new(&x);
            let jobs: Vec<(usize, usize)> = (0..points.len())
                .flat_map(|p| (0..splits.len()).map(move |f| (p, f)))
                .collect();
            let scores: Vec<Result<f64, ModelError>> = jobs
                .par_iter()
                .map(|&(p, f)| {
                    let Hyperparams::Svc {
                        c,
                        tolerance,
                        max_epochs,
                    } = points[p]
                    else {
                        unreachable!()
                    };
                    let options = SvcOptions {
                        tolerance,
                        max_epochs,
                        standardize: false,
                    };
                    check_options(c, &options)?;
                    let (train, test) = &splits[f];
                    let train_labels: Vec<String> = train.iter().map(|&i| labels[i].clone()).collect();
                    let fit = fit_gram(&gram, train, &train_labels, c, &options)?;
                    let pred: Vec<String> = test
                        .iter()
                        .map(|&t| fit.predict(&gram, train, t).to_string())
                        .collect();
                    let truth: Vec<String> = test.iter().map(|&t| labels[t].clone()).collect();
                    Ok(macro_recall(&truth, &pred))
                })
                .collect();
            let scores = scores.into_iter().collect::<Result<Vec<_>, _>>()?;
            scores.chunks(splits.len()).map(<[f64]>::to_vec).collect()
        }
    };

    let table: Vec<CvScore> = points
        .into_iter()
        .zip(fold_scores)
        .map(|(params, fold_scores)| CvScore {
            mean: fold_scores.iter().sum::<f64>() / fold_scores.len() as f64,
            params,
            fold_scores,
        })
        .collect();
    let mut best = 0;
    for (i, row) in table.iter().enumerate() {
        if row.mean > table[best].mean {
            best = i;
        }
    }
    Ok(GridResult {
        best: table[best].params,
        best_score: table[best].mean,
        table,
    })
}

fn pairwise(x: &[Vec<f64>], metric: Metric) -> Vec<Vec<f64>> {
    let n = x.len();
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (i..n).map(|j| metric.distance(&x[i], &x[j])).collect())
        .collect();
    let mut d = vec![vec![0.0; n]; n];
    for (i, row) in upper.iter().enumerate() {
        for (off, &v) in row.iter().enumerate() {
            d[i][i + off] = v;
            d[i + off][i] = v;
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::testutil::set;
    use crate::models::{knn_train, KnnMode, Predictor};

    fn clusters(per_class: usize) -> FeatureSet {
        let mut pts = Vec::new();
        let mut ys = Vec::new();
        for c in 0..3 {
            for i in 0..per_class {
                pts.push(vec![100.0 * c as f64 + 0.01 * i as f64, -50.0 * c as f64]);
                ys.push(c as f64);
            }
        }
        set(&pts, &ys)
    }

    #[test]
    fn folds_are_stratified_and_exhaustive() {
        let labels: Vec<String> = (0..30).map(|i| format!("c{}", i % 3)).collect();
        let folds = stratified_folds(&labels, 5, 7).unwrap();
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..30).collect::<Vec<_>>());
        for f in &folds {
            assert_eq!(f.len(), 6);
            for c in 0..3 {
                assert_eq!(f.iter().filter(|&&i| i % 3 == c).count(), 2);
            }
        }
        assert_eq!(folds, stratified_folds(&labels, 5, 7).unwrap());
    }

    #[test]
    fn too_few_per_class() {
        let labels: Vec<String> = ["a", "a", "a", "b", "b"].iter().map(|s| s.to_string()).collect();
        assert_eq!(
            stratified_folds(&labels, 3, 0),
            Err(ModelError::TooFewPerClass {
                class: "b".into(),
                count: 2,
                folds: 3
            })
        );
    }

    #[test]
    fn singleton_grid_returns_its_point() {
        let data = clusters(10);
        let grid = ParamGrid::Knn {
            k: vec![3],
            metric: vec![Metric::L1],
        };
        let r = grid_search(&data, Target::Force, &grid, 5, 1).unwrap();
        assert_eq!(r.best, Hyperparams::knn(3, Metric::L1));
        assert_eq!(r.table.len(), 1);
        assert_eq!(r.best_score, r.table[0].mean);
    }

    #[test]
    fn separable_clusters_tie_to_first_point() {
        let data = clusters(10);
        let grid = ParamGrid::Knn {
            k: vec![1, 5],
            metric: vec![Metric::L2],
        };
        let r = grid_search(&data, Target::Force, &grid, 5, 3).unwrap();
        assert!(r.table.iter().all(|row| row.mean == 1.0));
        assert_eq!(r.best, Hyperparams::knn(1, Metric::L2));
    }

    /// Fold scores from the precomputed-distance path agree with training
    /// a fresh model per fold.
    #[test]
    fn knn_cv_matches_direct_training() {
        let pts: Vec<Vec<f64>> = (0..30).map(|i| vec![(i as f64 * 0.7).sin(), (i as f64 * 0.3).cos()]).collect();
        let ys: Vec<f64> = (0..30).map(|i| (i % 3) as f64).collect();
        let data = set(&pts, &ys);
        let grid = ParamGrid::Knn {
            k: vec![3],
            metric: vec![Metric::L2],
        };
        let r = grid_search(&data, Target::Force, &grid, 3, 11).unwrap();
        let labels = data.class_labels(Target::Force).unwrap();
        let folds = stratified_folds(&labels, 3, 11).unwrap();
        for (f, test) in folds.iter().enumerate() {
            let train: Vec<usize> = (0..30).filter(|i| !test.contains(i)).collect();
            let m = knn_train(&data.subset(&train), Target::Force, 3, Metric::L2, KnnMode::Classify).unwrap();
            let pred: Vec<String> = test
                .iter()
                .map(|&t| m.predict(&data.features[t]).unwrap().to_string())
                .collect();
            let truth: Vec<String> = test.iter().map(|&t| labels[t].clone()).collect();
            assert_eq!(r.table[0].fold_scores[f], macro_recall(&truth, &pred));
        }
    }

    #[test]
    fn svc_grid_runs_in_order() {
        let data = clusters(6);
        let grid = ParamGrid::Svc { c: vec![0.01, 1.0] };
        let r = grid_search(&data, Target::Force, &grid, 3, 0).unwrap();
        assert_eq!(r.table.len(), 2);
        assert_eq!(r.table[0].params, Hyperparams::svc(0.01));
    }

    #[test]
    fn default_grids() {
        assert_eq!(ParamGrid::knn_default().points().len(), 10);
        assert_eq!(ParamGrid::knn_default().points()[1], Hyperparams::knn(1, Metric::L2));
        let c = ParamGrid::svc_default().points();
        assert_eq!(c.len(), 13);
        assert_eq!(c[0], Hyperparams::svc(0.01));
        assert!(ParamGrid::Svc { c: vec![] }.validate().is_err());
    }
}
