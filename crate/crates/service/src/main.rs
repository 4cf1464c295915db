use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};
use log::info;
use selex::config::Config;
use selex::engine::{Engine, ManualClock, SystemClock};
use selex::export::build_bundle;
use selex::pipeline::{
    evaluate, explain_step, input_sample_step, read_json, split_step, train_step, write_json, StudyData,
};
use selex::simulate::{self, SimulationPlan};
use selex::store::Store;
use selex_core::classifier::{BlackBoxClassifier, ReferenceClassifier, RemoteClassifier};
use selex_core::corpus::{load_corpus, SplitManifest, Splits};
use selex_core::explainer::ExplanationCache;
use selex_core::study::{Condition, OracleAnnotator};
use selex_core::synthetic::{generate_corpus, generate_embeddings, sentiment_lexicon, CorpusConfig, EmbeddingConfig};

#[derive(Parser)]
#[command(name = "selex", version, about = "Selective explanations study toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a seeded synthetic corpus, embedding table and sentiment lexicon.
    Synth {
        #[arg(long, default_value = "data/corpus.jsonl")]
        corpus_out: PathBuf,
        #[arg(long, default_value = "data/embeddings.txt")]
        embeddings_out: PathBuf,
        #[arg(long, default_value = "data/lexicon.txt")]
        lexicon_out: PathBuf,
        #[arg(long, default_value_t = 2000)]
        n_docs: usize,
        #[arg(long, env = "SELEX_SEED", default_value_t = 42)]
        seed: u64,
    },
    /// Split the corpus into train/dev/test.
    Split {
        #[arg(long)]
        config: PathBuf,
    },
    /// Train the reference classifier and report test accuracy.
    TrainClf {
        #[arg(long)]
        config: PathBuf,
    },
    /// Explain every dev and test review.
    Explain {
        #[arg(long)]
        config: PathBuf,
    },
    /// Pick the input-phase reviews from the dev explanations.
    SelectInputSample {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run split, train-clf, explain and select-input-sample in order.
    Prepare {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run sessions with simulated participants, then export.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// One relevant word per line.
        #[arg(long)]
        oracle_lexicon: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        /// Repeatable; run in the given order.
        #[arg(long = "condition", required = true)]
        conditions: Vec<String>,
        #[arg(long, default_value_t = 1)]
        n_sessions: usize,
        #[arg(long, default_value = "export")]
        export_dir: PathBuf,
    },
    /// Run the study server.
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Write decisions, surveys, metrics and input records from the store.
    Export {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "export")]
        out: PathBuf,
    },
}

type CliResult = Result<(), Box<dyn std::error::Error>>;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn load_splits(config: &Config) -> Result<Splits, Box<dyn std::error::Error>> {
    let docs = load_corpus(&config.corpus.path, config.corpus.format)?;
    let manifest: SplitManifest = read_json(&config.artifacts.splits)?;
    Ok(Splits::from_manifest(&docs, &manifest)?)
}

fn classifier(config: &Config) -> Result<Box<dyn BlackBoxClassifier>, Box<dyn std::error::Error>> {
    Ok(match &config.classifier.remote_url {
        Some(url) => Box::new(RemoteClassifier::new(url)?),
        None => Box::new(ReferenceClassifier::load(&config.artifacts.model)?),
    })
}

fn ensure_parent(path: &Path) -> std::io::Result<()> {
    match path.parent().filter(|p| !p.as_os_str().is_empty()) {
        Some(p) => std::fs::create_dir_all(p),
        None => Ok(()),
    }
}

fn split(config: &Config) -> CliResult {
    let docs = load_corpus(&config.corpus.path, config.corpus.format)?;
    let splits = split_step(&docs, config)?;
    write_json(&config.artifacts.splits, &splits.manifest(config.split_seed()))?;
    info!(
        "split {} documents into {}/{}/{}",
        docs.len(),
        splits.train.len(),
        splits.dev.len(),
        splits.test.len()
    );
    Ok(())
}

fn train(config: &Config) -> CliResult {
    let splits = load_splits(config)?;
    let clf = train_step(&splits, config)?;
    ensure_parent(&config.artifacts.model)?;
    clf.save(&config.artifacts.model)?;
    let eval = evaluate(&clf, &splits.test)?;
    println!("{}", serde_json::to_string(&eval)?);
    Ok(())
}

fn explain(config: &Config) -> CliResult {
    let splits = load_splits(config)?;
    let clf = classifier(config)?;
    for (docs, path) in [
        (&splits.dev, &config.artifacts.dev_explanations),
        (&splits.test, &config.artifacts.test_explanations),
    ] {
        let cache = explain_step(clf.as_ref(), docs, &config.lime, config)?;
        ensure_parent(path)?;
        cache.save(path)?;
        info!("wrote {} explanations to {}", cache.len(), path.display());
    }
    Ok(())
}

fn select_input(config: &Config) -> CliResult {
    let splits = load_splits(config)?;
    let dev = ExplanationCache::load(&config.artifacts.dev_explanations)?;
    let sample = input_sample_step(&dev, &splits.dev)?;
    write_json(&config.artifacts.input_sample, &sample)?;
    println!("{}", serde_json::to_string(&sample)?);
    Ok(())
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Synth {
            corpus_out,
            embeddings_out,
            lexicon_out,
            n_docs,
            seed,
        } => {
            let docs = generate_corpus(&CorpusConfig { n_docs, ..CorpusConfig::default() }, seed);
            for p in [&corpus_out, &embeddings_out, &lexicon_out] {
                ensure_parent(p)?;
            }
            let mut out = std::io::BufWriter::new(std::fs::File::create(&corpus_out)?);
            for d in &docs {
                writeln!(out, "{}", serde_json::to_string(d)?)?;
            }
            out.flush()?;
            generate_embeddings(&EmbeddingConfig::default(), seed).save(&embeddings_out)?;
            std::fs::write(&lexicon_out, sentiment_lexicon().join("\n") + "\n")?;
            info!("wrote {} documents", docs.len());
        }
        Command::Split { config } => split(&Config::load(&config)?)?,
        Command::TrainClf { config } => train(&Config::load(&config)?)?,
        Command::Explain { config } => explain(&Config::load(&config)?)?,
        Command::SelectInputSample { config } => select_input(&Config::load(&config)?)?,
        Command::Prepare { config } => {
            let config = Config::load(&config)?;
            split(&config)?;
            train(&config)?;
            explain(&config)?;
            select_input(&config)?;
        }
        Command::Simulate {
            config,
            oracle_lexicon,
            noise,
            conditions,
            n_sessions,
            export_dir,
        } => {
            let config = Config::load(&config)?;
            if !(0.0..1.0).contains(&noise) {
                return Err(format!("--noise must be in [0, 1), got {noise}").into());
            }
            let lexicon: Vec<String> = std::fs::read_to_string(&oracle_lexicon)?
                .lines()
                .map(|l| l.trim().to_lowercase())
                .filter(|l| !l.is_empty())
                .collect();
            let conditions = conditions
                .iter()
                .map(|c| c.parse::<Condition>())
                .collect::<Result<Vec<_>, _>>()?;
            let data = Arc::new(StudyData::load(&config)?);
            let clock = Arc::new(ManualClock::new(0));
            let engine = Engine::open(config.clone(), data, clock.clone())?;
            let plan = SimulationPlan {
                conditions,
                sessions_per_condition: n_sessions,
                oracle: OracleAnnotator::new(lexicon, noise, config.seed),
            };
            let ids = simulate::run(&engine, &clock, &plan)?;
            engine.export()?.write_to(&export_dir)?;
            info!("simulated {} sessions; exported to {}", ids.len(), export_dir.display());
        }
        Command::Serve { config } => {
            let config = Config::load(&config)?;
            let data = Arc::new(StudyData::load(&config)?);
            let bind = config.server.bind.clone();
            let engine = Arc::new(Engine::open(config, data, Arc::new(SystemClock))?);
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(async move {
                let listener = tokio::net::TcpListener::bind(&bind).await?;
                info!("listening on {bind}");
                axum::serve(listener, selex::http::router(engine))
                    .with_graceful_shutdown(async {
                        let _ = tokio::signal::ctrl_c().await;
                    })
                    .await
            })?;
        }
        Command::Export { config, out } => {
            let config = Config::load(&config)?;
            let (store, _) = Store::open(&config.server.store_dir)?;
            build_bundle(&store.entries()?, &config.hash()).write_to(&out)?;
            info!("exported to {}", out.display());
        }
    }
    Ok(())
}
