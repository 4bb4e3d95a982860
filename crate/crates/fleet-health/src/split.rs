//! Train/test partitioning: a railcar-grouped stratified split (every
//! sample of a car lands on the same side) and sample-level stratified
//! k-folds for cross-validation.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Split railcars into train/test sets, stratified by the car-level label
/// (1 when any of the car's samples is positive). Returns sorted id lists.
pub fn split_railcars(
    car_labels: &BTreeMap<String, u8>,
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<String>, Vec<String>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidArgument(
            "test fraction must be in (0, 1)".into(),
        ));
    }
    if car_labels.len() < 2 {
        return Err(Error::InvalidArgument(
            "need at least 2 railcars to split".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in [0u8, 1u8] {
        // BTreeMap iteration gives a deterministic base order.
        let mut stratum: Vec<&String> = car_labels
            .iter()
            .filter(|(_, &label)| label == class)
            .map(|(id, _)| id)
            .collect();
        if stratum.is_empty() {
            continue;
        }
        stratum.shuffle(&mut rng);
        let mut n_test = (stratum.len() as f64 * test_fraction).round() as usize;
        if stratum.len() >= 2 {
            n_test = n_test.clamp(1, stratum.len() - 1);
        }
        for (i, id) in stratum.into_iter().enumerate() {
            if i < n_test {
                test.push(id.clone());
            } else {
                train.push(id.clone());
            }
        }
    }
    train.sort();
    test.sort();
    Ok((train, test))
}

/// Fold index per row for stratified k-fold cross-validation: each class
/// is shuffled and dealt round-robin, so fold class balance tracks the
/// dataset's.
pub fn stratified_folds(targets: &[u8], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::InvalidArgument("fold count must be >= 2".into()));
    }
    if targets.len() < k {
        return Err(Error::InvalidArgument(format!(
            "{} rows cannot fill {k} folds",
            targets.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![0usize; targets.len()];
    for class in [0u8, 1u8] {
        let mut rows: Vec<usize> = (0..targets.len())
            .filter(|&i| targets[i] == class)
            .collect();
        rows.shuffle(&mut rng);
        for (i, row) in rows.into_iter().enumerate() {
            folds[row] = i % k;
        }
    }
    Ok(folds)
}
