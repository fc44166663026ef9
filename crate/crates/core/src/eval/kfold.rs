use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::label::ClassLabel;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    /// Sorted corpus positions.
    pub train: Vec<usize>,
    /// Sorted corpus positions.
    pub test: Vec<usize>,
}

/// Seeded partition of `0..labels.len()` into `k` folds whose sizes differ
/// by at most one. With `stratified`, each class is spread evenly too.
pub fn kfold_indices(
    labels: &[ClassLabel],
    k: usize,
    seed: u64,
    stratified: bool,
) -> Result<Vec<Fold>> {
    let n = labels.len();
    if k < 2 {
        return Err(Error::InvalidArgument(format!(
            "k must be at least 2, got {k}"
        )));
    }
    if k > n {
        return Err(Error::InvalidArgument(format!(
            "k = {k} exceeds the corpus size {n}"
        )));
    }
    let mut rng = seed::stream(seed, "folds", &[]);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    if stratified {
        // Stable sort keeps the shuffled order within each class.
        order.sort_by_key(|&i| labels[i]);
    }
    let mut tests: Vec<Vec<usize>> = vec![Vec::with_capacity(n / k + 1); k];
    for (pos, &i) in order.iter().enumerate() {
        tests[pos % k].push(i);
    }
    Ok(tests
        .into_iter()
        .map(|mut test| {
            test.sort_unstable();
            let mut in_test = vec![false; n];
            for &i in &test {
                in_test[i] = true;
            }
            let train = (0..n).filter(|&i| !in_test[i]).collect();
            Fold { train, test }
        })
        .collect())
}

/// Folds over a resolved corpus.
pub fn kfold_split(corpus: &Corpus, k: usize, seed: u64, stratified: bool) -> Result<Vec<Fold>> {
    if !corpus.is_resolved() {
        return Err(Error::Validation(
            "corpus has multi-label tweets; resolve dual labels first".into(),
        ));
    }
    let labels: Vec<ClassLabel> = corpus.tweets().iter().map(|t| t.label()).collect();
    kfold_indices(&labels, k, seed, stratified)
}
