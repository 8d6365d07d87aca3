use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use super::EvalError;
use crate::features::{FeatureSet, Target};
use crate::rng;

/// Train fraction used throughout: a 3:2 split.
pub const DEFAULT_RATIO: f64 = 0.6;

/// Train and test indices with class proportions kept. Each class
/// contributes `round(ratio * n_c)` training samples, clamped so both sides
/// get at least one. Indices are returned in ascending order.
pub fn stratified_indices(labels: &[String], ratio: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>), EvalError> {
    check_ratio(ratio)?;
    let mut by_class: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (class, mut members) in by_class {
        let n = members.len();
        if n < 2 {
            return Err(EvalError::ClassTooSmall {
                class: class.to_string(),
                count: n,
            });
        }
        members.shuffle(&mut rng::stream(rng::derive(seed, &[rng::hash_str(class)])));
        let n_train = ((ratio * n as f64).round() as usize).clamp(1, n - 1);
        train.extend_from_slice(&members[..n_train]);
        test.extend_from_slice(&members[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Stratified split of `data` by the class label of `target`.
pub fn stratified_split(
    data: &FeatureSet,
    target: Target,
    ratio: f64,
    seed: u64,
) -> Result<(FeatureSet, FeatureSet), EvalError> {
    let labels = data.class_labels(target).ok_or(EvalError::MissingTarget(target))?;
    let (train, test) = stratified_indices(&labels, ratio, seed)?;
    Ok((data.subset(&train), data.subset(&test)))
}

/// Shuffled split without stratification; `round(ratio * n)` samples train.
pub fn random_split(data: &FeatureSet, ratio: f64, seed: u64) -> Result<(FeatureSet, FeatureSet), EvalError> {
    check_ratio(ratio)?;
    let n = data.len();
    if n < 2 {
        return Err(EvalError::ClassTooSmall {
            class: "*".into(),
            count: n,
        });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::stream(seed));
    let n_train = ((ratio * n as f64).round() as usize).clamp(1, n - 1);
    let (mut train, mut test) = (idx[..n_train].to_vec(), idx[n_train..].to_vec());
    train.sort_unstable();
    test.sort_unstable();
    Ok((data.subset(&train), data.subset(&test)))
}

fn check_ratio(ratio: f64) -> Result<(), EvalError> {
    if ratio > 0.0 && ratio < 1.0 {
        Ok(())
    } else {
        Err(EvalError::InvalidRatio(ratio))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(classes: usize, per: usize) -> Vec<String> {
        (0..classes * per).map(|i| format!("c{}", i % classes)).collect()
    }

    #[test]
    fn six_by_twentyfive() {
        let l = labels(6, 25);
        let (train, test) = stratified_indices(&l, 0.6, 1).unwrap();
        assert_eq!((train.len(), test.len()), (90, 60));
        for c in 0..6 {
            let name = format!("c{c}");
            assert_eq!(train.iter().filter(|&&i| l[i] == name).count(), 15);
        }
    }

    #[test]
    fn minimal_split() {
        let (train, test) = stratified_indices(&labels(3, 2), 0.5, 0).unwrap();
        assert_eq!((train.len(), test.len()), (3, 3));
        // Clamping keeps one test sample even for ratios near 1.
        let (train, test) = stratified_indices(&labels(3, 2), 0.99, 0).unwrap();
        assert_eq!((train.len(), test.len()), (3, 3));
    }

    #[test]
    fn singleton_class_is_rejected() {
        let l: Vec<String> = vec!["a".into(), "a".into(), "b".into()];
        assert_eq!(
            stratified_indices(&l, 0.6, 0),
            Err(EvalError::ClassTooSmall {
                class: "b".into(),
                count: 1
            })
        );
        assert_eq!(stratified_indices(&l, 1.0, 0), Err(EvalError::InvalidRatio(1.0)));
    }

    #[test]
    fn seeded_and_disjoint() {
        let l = labels(4, 10);
        let a = stratified_indices(&l, 0.6, 9).unwrap();
        assert_eq!(a, stratified_indices(&l, 0.6, 9).unwrap());
        assert_ne!(a, stratified_indices(&l, 0.6, 10).unwrap());
        let mut all = [a.0.clone(), a.1.clone()].concat();
        all.sort_unstable();
        assert_eq!(all, (0..40).collect::<Vec<_>>());
    }
}
