mod common;

use hatespeech::eval::kfold_split;
use hatespeech::features::TendencyMode;
use hatespeech::pipeline::{prepare_fold, FoldData, TextSettings};
use hatespeech::text::TokenizerConfig;
use hatespeech::ClassLabel;

fn settings() -> TextSettings {
    TextSettings {
        vocab_size: 500,
        max_len: 12,
        tokenizer: TokenizerConfig::default(),
    }
}

fn profiles(f: &FoldData) -> Vec<[f64; 3]> {
    f.train
        .iter()
        .chain(&f.test)
        .map(|e| e.profile.as_array())
        .collect()
}

fn scrambled_pair(mode: TendencyMode) -> (FoldData, FoldData) {
    let corpus = common::fixture_corpus(100, 8);
    let folds = kfold_split(&corpus, 4, 1, false).unwrap();
    let fold = &folds[1];
    let swaps: Vec<(usize, ClassLabel)> = fold
        .test
        .iter()
        .map(|&i| {
            (
                i,
                ClassLabel::from_index((corpus.get(i).label().index() + 2) % 3).unwrap(),
            )
        })
        .collect();
    let scrambled = corpus.with_labels_replaced(&swaps);
    (
        prepare_fold(&corpus, &fold.train, &fold.test, &settings(), mode).unwrap(),
        prepare_fold(&scrambled, &fold.train, &fold.test, &settings(), mode).unwrap(),
    )
}

#[test]
fn fold_local_profiles_ignore_test_labels() {
    let (a, b) = scrambled_pair(TendencyMode::FoldLocal);
    assert_eq!(profiles(&a), profiles(&b));
    assert_eq!(a.vocab, b.vocab);
    assert_eq!(a.tendency, b.tendency);
}

#[test]
fn corpus_wide_profiles_do_see_test_labels() {
    // Negative control: the leaky mode must be detectably leaky.
    let (a, b) = scrambled_pair(TendencyMode::CorpusWide);
    assert_ne!(profiles(&a), profiles(&b));
}

#[test]
fn every_profile_is_a_distribution() {
    let (a, _) = scrambled_pair(TendencyMode::FoldLocal);
    for p in profiles(&a) {
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
