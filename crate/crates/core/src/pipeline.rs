//! Turns corpus partitions into classifier examples without letting test
//! labels leak into vocabulary or tendency features.

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::features::{TendencyIndex, TendencyMode, TendencyProfile};
use crate::label::ClassLabel;
use crate::text::{tokenize_with, vectorize, IndexVector, TokenizerConfig, Vocabulary};

/// One encoded tweet: token indices, author tendency and gold label.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    /// Position of the tweet in its corpus.
    pub tweet: usize,
    pub indices: IndexVector,
    pub profile: TendencyProfile,
    pub label: ClassLabel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TextSettings {
    pub vocab_size: usize,
    pub max_len: usize,
    pub tokenizer: TokenizerConfig,
}

#[derive(Debug, Clone)]
pub struct FoldData {
    pub vocab: Vocabulary,
    pub tendency: TendencyIndex,
    pub train: Vec<Example>,
    pub test: Vec<Example>,
}

/// Builds the vocabulary from `train` texts and tendency counts according to
/// `mode`, then encodes both partitions. Training tweets never count toward
/// their own author profile.
pub fn prepare_fold(
    corpus: &Corpus,
    train: &[usize],
    test: &[usize],
    text: &TextSettings,
    mode: TendencyMode,
) -> Result<FoldData> {
    if train.is_empty() {
        return Err(Error::InvalidArgument("training partition is empty".into()));
    }
    let token_lists: Vec<Vec<String>> = train
        .iter()
        .map(|&i| tokenize_with(&corpus.get(i).text, &text.tokenizer))
        .collect();
    let vocab = Vocabulary::build(&token_lists, text.vocab_size)?;
    let tendency = match mode {
        TendencyMode::FoldLocal => TendencyIndex::from_partition(corpus, train)?,
        TendencyMode::CorpusWide => TendencyIndex::from_corpus(corpus)?,
    };

    let train_examples = train
        .iter()
        .zip(&token_lists)
        .map(|(&i, toks)| {
            let t = corpus.get(i);
            Example {
                tweet: i,
                indices: vectorize(toks, &vocab, text.max_len),
                profile: tendency.profile(&t.user_id, Some(t.label())),
                label: t.label(),
            }
        })
        .collect();
    let test_examples = test
        .iter()
        .map(|&i| {
            let t = corpus.get(i);
            let toks = tokenize_with(&t.text, &text.tokenizer);
            // Fold-local counts never contain test tweets; corpus-wide ones do.
            let exclude = (mode == TendencyMode::CorpusWide).then(|| t.label());
            Example {
                tweet: i,
                indices: vectorize(&toks, &vocab, text.max_len),
                profile: tendency.profile(&t.user_id, exclude),
                label: t.label(),
            }
        })
        .collect();
    Ok(FoldData {
        vocab,
        tendency,
        train: train_examples,
        test: test_examples,
    })
}
