//! Seeded stratified fold assignment and train/eval splits.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Rows of each class, in first-seen class order.
fn by_class(labels: &[usize]) -> Vec<Vec<usize>> {
    let mut classes: Vec<(usize, Vec<usize>)> = Vec::new();
    for (i, &l) in labels.iter().enumerate() {
        match classes.iter_mut().find(|(c, _)| *c == l) {
            Some((_, rows)) => rows.push(i),
            None => classes.push((l, vec![i])),
        }
    }
    classes.sort_by_key(|(c, _)| *c);
    classes.into_iter().map(|(_, rows)| rows).collect()
}

/// Fold index in `0..k` for every row. Each class is shuffled and dealt
/// round-robin, continuing from where the previous class stopped so fold
/// sizes differ by at most one. Classes smaller than `k` leave some folds
/// without that class.
pub fn stratified_folds(labels: &[usize], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::param(format!("need at least 2 folds, got {k}")));
    }
    if labels.len() < k {
        return Err(Error::param(format!(
            "{} rows cannot fill {k} folds",
            labels.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold = vec![0; labels.len()];
    let mut next = 0;
    for mut rows in by_class(labels) {
        rows.shuffle(&mut rng);
        for r in rows {
            fold[r] = next % k;
            next += 1;
        }
    }
    Ok(fold)
}

/// Stratified split into `(train, eval)` row indices, each sorted. Every
/// class contributes `round(train_fraction * size)` rows to the training
/// side.
pub fn stratified_split(
    labels: &[usize],
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::param(format!(
            "train fraction must be in (0, 1), got {train_fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut eval) = (Vec::new(), Vec::new());
    for mut rows in by_class(labels) {
        rows.shuffle(&mut rng);
        let cut = (train_fraction * rows.len() as f64).round() as usize;
        train.extend_from_slice(&rows[..cut]);
        eval.extend_from_slice(&rows[cut..]);
    }
    if train.is_empty() || eval.is_empty() {
        return Err(Error::param(format!(
            "train fraction {train_fraction} leaves an empty side for {} rows",
            labels.len()
        )));
    }
    train.sort_unstable();
    eval.sort_unstable();
    Ok((train, eval))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn split_sizes() {
        let labels: Vec<usize> = (0..50).map(|i| usize::from(i >= 25)).collect();
        let (tr, ev) = stratified_split(&labels, 0.8, 1).unwrap();
        assert_eq!((tr.len(), ev.len()), (40, 10));
        let ev_ones = ev.iter().filter(|&&i| labels[i] == 1).count();
        assert_eq!(ev_ones, 5);
        assert_eq!(stratified_split(&labels, 0.8, 1).unwrap(), (tr, ev));
    }

    #[test]
    fn split_rejects_empty_side() {
        let labels: Vec<usize> = (0..10).map(|i| i % 2).collect();
        assert!(stratified_split(&labels, 0.999, 0).is_err());
        assert!(stratified_split(&labels, 0.0, 0).is_err());
        assert!(stratified_split(&labels, 1.0, 0).is_err());
    }

    proptest! {
        #[test]
        fn folds_partition(labels in prop::collection::vec(0usize..3, 5..80), k in 2usize..6, seed in any::<u64>()) {
            prop_assume!(labels.len() >= k);
            let f = stratified_folds(&labels, k, seed).unwrap();
            prop_assert_eq!(f.len(), labels.len());
            prop_assert!(f.iter().all(|&x| x < k));
            let mut sizes = vec![0usize; k];
            for &x in &f { sizes[x] += 1; }
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            // Per class, fold counts differ by at most one.
            for c in 0..3 {
                let mut per = vec![0usize; k];
                for (i, &l) in labels.iter().enumerate() { if l == c { per[f[i]] += 1; } }
                prop_assert!(per.iter().max().unwrap() - per.iter().min().unwrap() <= 1);
            }
            prop_assert_eq!(stratified_folds(&labels, k, seed).unwrap(), f);
        }

        #[test]
        fn split_partition(labels in prop::collection::vec(0usize..2, 4..60), seed in any::<u64>()) {
            if let Ok((tr, ev)) = stratified_split(&labels, 0.8, seed) {
                let mut all: Vec<usize> = tr.iter().chain(&ev).cloned().collect();
                all.sort_unstable();
                prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
            }
        }
    }
}
