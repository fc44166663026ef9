#![allow(dead_code)]

use hatespeech::corpus::{Corpus, LabeledTweet};
use hatespeech::ClassLabel;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FILLER: [&str; 24] = [
    "the", "a", "is", "it", "this", "that", "today", "really", "just", "so", "what", "people",
    "think", "about", "all", "they", "we", "you", "know", "time", "again", "here", "very", "more",
];

fn keywords(label: ClassLabel) -> [&'static str; 4] {
    match label {
        ClassLabel::Neutral => ["football", "coffee", "weather", "music"],
        ClassLabel::Racism => ["invaders", "savages", "deport", "tribe"],
        ClassLabel::Sexism => ["kitchen", "bossy", "hysterical", "sandwich"],
    }
}

fn filler(rng: &mut ChaCha8Rng, lo: usize, hi: usize) -> Vec<&'static str> {
    let n = rng.gen_range(lo..hi);
    (0..n).map(|_| *FILLER.choose(rng).unwrap()).collect()
}

/// `per_class` tweets of each class; every tweet carries one keyword unique
/// to its class among shared filler words. Each tweet has its own author.
pub fn separable_corpus(per_class: usize, seed: u64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tweets = Vec::new();
    for label in ClassLabel::ALL {
        for k in 0..per_class {
            let mut words = filler(&mut rng, 2, 5);
            let pos = rng.gen_range(0..=words.len());
            words.insert(pos, keywords(label)[k % 2]);
            let id = format!("{}{k}", label.name());
            tweets.push(LabeledTweet::new(
                id.clone(),
                format!("u{id}"),
                label,
                words.join(" "),
            ));
        }
    }
    tweets.shuffle(&mut rng);
    Corpus::new(tweets).unwrap()
}

/// `n` tweets by `users` authors. Each author mostly writes one class; the
/// text only carries a class keyword with probability `keyword_rate`.
pub fn skewed_corpus(n: usize, users: usize, keyword_rate: f64, seed: u64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dominant: Vec<ClassLabel> = (0..users)
        .map(|u| match u % 5 {
            0 | 1 | 2 => ClassLabel::Neutral,
            3 => ClassLabel::Racism,
            _ => ClassLabel::Sexism,
        })
        .collect();
    let tweets = (0..n)
        .map(|i| {
            let u = rng.gen_range(0..users);
            let label = if rng.gen_bool(0.85) {
                dominant[u]
            } else {
                *ClassLabel::ALL.choose(&mut rng).unwrap()
            };
            let mut words = filler(&mut rng, 4, 9);
            if rng.gen_bool(keyword_rate) {
                let pos = rng.gen_range(0..=words.len());
                words.insert(pos, keywords(label)[rng.gen_range(0..4)]);
            }
            LabeledTweet::new(format!("t{i}"), format!("user{u}"), label, words.join(" "))
        })
        .collect();
    Corpus::new(tweets).unwrap()
}

/// Small mixed corpus with repeat authors.
pub fn fixture_corpus(n: usize, seed: u64) -> Corpus {
    skewed_corpus(n, (n / 4).max(2), 0.7, seed)
}
