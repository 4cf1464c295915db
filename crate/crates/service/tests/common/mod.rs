#![allow(dead_code)]

use std::path::Path;
use std::sync::{Arc, OnceLock};

use selex::config::Config;
use selex::engine::{Engine, ManualClock};
use selex::pipeline::StudyData;
use selex_core::corpus::SplitSizes;
use selex_core::explainer::LimeParams;
use selex_core::study::OracleAnnotator;
use selex_core::synthetic::{generate_corpus, generate_embeddings, sentiment_lexicon, CorpusConfig, EmbeddingConfig};

pub const SEED: u64 = 7;

/// A small study: 500 synthetic reviews, cheaper LIME.
pub fn config(store: &Path) -> Config {
    let mut c = Config::with_seed(SEED);
    c.splits = SplitSizes { train: 200, dev: 100, test: 200 };
    c.lime = LimeParams { n_samples: 200, ..LimeParams::default() };
    c.server.store_dir = store.to_path_buf();
    c
}

pub fn data() -> Arc<StudyData> {
    static DATA: OnceLock<Arc<StudyData>> = OnceLock::new();
    DATA.get_or_init(|| {
        let docs = generate_corpus(&CorpusConfig { n_docs: 500, ..CorpusConfig::default() }, SEED);
        let emb = generate_embeddings(&EmbeddingConfig::default(), SEED);
        let (data, _) = StudyData::build(&docs, emb, &config(Path::new("unused"))).expect("fixture pipeline");
        Arc::new(data)
    })
    .clone()
}

pub fn engine(store: &Path) -> (Engine, Arc<ManualClock>) {
    let clock = Arc::new(ManualClock::new(1_000_000));
    let engine = Engine::open(config(store), data(), clock.clone()).expect("engine opens");
    (engine, clock)
}

pub fn oracle() -> OracleAnnotator {
    OracleAnnotator::new(sentiment_lexicon().into_iter().map(String::from), 0.0, SEED)
}
