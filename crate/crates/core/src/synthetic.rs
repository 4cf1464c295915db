//! Seeded stand-ins for a movie-review corpus and a word-embedding table.
//!
//! Reviews mix function words, neutral content words, invented character
//! names and a small polar lexicon. Each review has its own "clarity": the
//! chance that a polar word agrees with its label, drawn uniformly from
//! `clarity_range`. Low-clarity reviews are what make the reference model
//! wrong on both classes.
//!
//! Embeddings are random Gaussian vectors. Polar words additionally share a
//! common "sentiment" direction plus a signed polarity direction, which gives
//! the word-level belief model something to generalise from. Character names
//! get no vector at all.

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::belief::{EmbeddingTable, EMBEDDING_DIM};
use crate::corpus::{Document, Label};
use crate::seed::rng_for;

pub const POSITIVE_WORDS: [&str; 25] = [
    "great", "excellent", "wonderful", "brilliant", "masterpiece", "superb", "beautiful", "amazing", "outstanding",
    "delightful", "touching", "hilarious", "charming", "fantastic", "moving", "enjoyable", "stunning", "gripping",
    "perfect", "best", "loved", "fun", "good", "memorable", "powerful",
];

pub const NEGATIVE_WORDS: [&str; 25] = [
    "bad", "awful", "terrible", "boring", "dull", "worst", "horrible", "poor", "stupid", "waste", "mess", "lame",
    "weak", "pointless", "tedious", "annoying", "disappointing", "ridiculous", "bland", "predictable", "mediocre",
    "painful", "forgettable", "clumsy", "hated",
];

const FUNCTION_WORDS: &[&str] = &[
    "the", "a", "an", "this", "is", "was", "it", "of", "and", "to", "in", "that", "with", "for", "as", "but", "on",
    "by", "at", "from", "i", "you", "he", "she", "they", "his", "her", "its", "be", "are", "were", "has", "have",
    "had", "not", "so", "very", "just", "there", "what", "all", "about", "who", "when",
];

const NEUTRAL_WORDS: &[&str] = &[
    "movie", "film", "plot", "story", "character", "characters", "actor", "actors", "actress", "scene", "scenes",
    "director", "ending", "beginning", "script", "camera", "music", "score", "dialogue", "cast", "role", "roles",
    "time", "minutes", "hour", "year", "years", "life", "world", "city", "town", "house", "family", "father",
    "mother", "son", "daughter", "brother", "sister", "friend", "friends", "wife", "husband", "man", "woman",
    "girl", "boy", "child", "people", "night", "day", "war", "love", "school", "police", "money", "car", "game",
    "book", "novel", "series", "episode", "sequel", "version", "original", "production", "studio", "budget",
    "effects", "action", "drama", "comedy", "horror", "thriller", "romance", "western", "documentary", "audience",
    "theater", "screen", "television", "show", "part", "end", "start", "way", "thing", "things", "point", "idea",
    "set", "sets", "costume", "costumes", "location", "setting", "style", "tone", "pace", "look", "sound", "light",
    "color", "black", "white", "old", "new", "young", "first", "last", "second", "other", "another", "same",
    "many", "some", "few", "more", "most", "little", "long", "short", "big", "small", "real", "whole", "main",
    "own", "next", "early", "late", "then", "now", "still", "also", "even", "again", "never", "always", "really",
    "watch", "watched", "see", "saw", "seen", "make", "made", "get", "got", "go", "went", "come", "came", "think",
    "thought", "know", "knew", "say", "said", "tell", "told", "find", "found",
];

const NAMES: &[&str] = &[
    "marlowe", "vexley", "quinlan", "ardith", "corvane", "elspeth", "thornbury", "halvard", "brisco", "lunetta",
    "osgood", "perrin", "sallow", "tamsin", "wexford", "zebulon",
];

/// The 50 polar words; the relevance lexicon for simulated annotators.
pub fn sentiment_lexicon() -> Vec<&'static str> {
    let mut all: Vec<_> = POSITIVE_WORDS.iter().chain(&NEGATIVE_WORDS).copied().collect();
    all.sort_unstable();
    all
}

/// Every word the generator can emit, sorted. Names are included.
pub fn vocabulary() -> Vec<&'static str> {
    let mut all: Vec<_> = POSITIVE_WORDS
        .iter()
        .chain(&NEGATIVE_WORDS)
        .chain(FUNCTION_WORDS)
        .chain(NEUTRAL_WORDS)
        .chain(NAMES)
        .copied()
        .collect();
    all.sort_unstable();
    all.dedup();
    all
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub n_docs: usize,
    pub min_words: usize,
    pub max_words: usize,
    /// Probability that a word slot holds a polar word.
    pub polar_rate: f64,
    /// Probability that a non-polar slot holds a function word.
    pub function_rate: f64,
    /// Probability that a remaining slot holds a character name.
    pub name_rate: f64,
    /// Per-review chance that a polar word matches the label, drawn uniformly.
    pub clarity_range: (f64, f64),
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            n_docs: 2000,
            min_words: 60,
            max_words: 180,
            polar_rate: 0.1,
            function_rate: 0.5,
            name_rate: 0.04,
            clarity_range: (0.55, 0.95),
        }
    }
}

/// Balanced labelled reviews with ids `syn-00000`, `syn-00001`, ...
pub fn generate_corpus(config: &CorpusConfig, seed: u64) -> Vec<Document> {
    assert!(config.min_words >= 1 && config.min_words <= config.max_words);
    let mut rng = rng_for(seed, "synthetic-corpus");
    (0..config.n_docs)
        .map(|i| {
            let label = if i % 2 == 0 { Label::Positive } else { Label::Negative };
            let (own, other): (&[&str], &[&str]) = match label {
                Label::Positive => (&POSITIVE_WORDS, &NEGATIVE_WORDS),
                Label::Negative => (&NEGATIVE_WORDS, &POSITIVE_WORDS),
            };
            let clarity = rng.random_range(config.clarity_range.0..=config.clarity_range.1);
            let n = rng.random_range(config.min_words..=config.max_words);
            let mut text = String::new();
            let mut sentence_left = 0usize;
            for _ in 0..n {
                let word = if rng.random_bool(config.polar_rate) {
                    let pool = if rng.random_bool(clarity) { own } else { other };
                    *pool.choose(&mut rng).expect("non-empty")
                } else if rng.random_bool(config.function_rate) {
                    *FUNCTION_WORDS.choose(&mut rng).expect("non-empty")
                } else if rng.random_bool(config.name_rate) {
                    *NAMES.choose(&mut rng).expect("non-empty")
                } else {
                    *NEUTRAL_WORDS.choose(&mut rng).expect("non-empty")
                };
                if sentence_left == 0 {
                    if !text.is_empty() {
                        text.push_str(". ");
                    }
                    sentence_left = rng.random_range(6..=18);
                    let mut chars = word.chars();
                    let first = chars.next().expect("non-empty word");
                    text.extend(first.to_uppercase());
                    text.push_str(chars.as_str());
                } else {
                    text.push(' ');
                    text.push_str(word);
                }
                sentence_left -= 1;
            }
            text.push('.');
            Document {
                id: format!("syn-{i:05}"),
                text,
                label,
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingConfig {
    /// Length of the shared sentiment direction added to polar words,
    /// relative to the expected norm (1) of a random vector.
    pub sentiment_strength: f64,
    /// Length of the signed polarity direction.
    pub polarity_strength: f64,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig {
            sentiment_strength: 0.8,
            polarity_strength: 0.5,
        }
    }
}

/// 100-d vectors for every vocabulary word except character names.
pub fn generate_embeddings(config: &EmbeddingConfig, seed: u64) -> EmbeddingTable {
    let mut rng = rng_for(seed, "synthetic-embeddings");
    let dim = EMBEDDING_DIM;
    let scale = 1.0 / (dim as f64).sqrt();
    let unit = |rng: &mut rand_chacha::ChaCha8Rng| {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.into_iter().map(|x| x / norm).collect::<Vec<f64>>()
    };
    let sentiment = unit(&mut rng);
    let polarity = unit(&mut rng);
    let mut table = EmbeddingTable::new(dim);
    for word in vocabulary() {
        if NAMES.contains(&word) {
            continue;
        }
        let mut v: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal) * scale).collect();
        let sign = if POSITIVE_WORDS.contains(&word) {
            1.0
        } else if NEGATIVE_WORDS.contains(&word) {
            -1.0
        } else {
            0.0
        };
        if sign != 0.0 {
            for (i, x) in v.iter_mut().enumerate() {
                *x += config.sentiment_strength * sentiment[i] + sign * config.polarity_strength * polarity[i];
            }
        }
        table.insert(word, v);
    }
    table
}
