use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use selex_core::belief::{BeliefModel, Elicitation, EmbeddingTable, Signal, TrainingMeta};
use selex_core::classifier::Prediction;
use selex_core::corpus::{Document, Label, TokenizedReview};
use selex_core::explainer::{Attribution, Explanation};
use selex_core::selector::{render_states, supporting_fraction, DisplayState, RenderMode, RenderOptions, SelectiveExplanation};
use selex_core::study::{
    compute_metrics, ranking_auc, sample_task_reviews, simulate_input, Decision, OracleAnnotator, Sampling, TaskCandidate, TASK_PER_CELL,
    TASK_SAMPLE_SIZE,
};

const VOCAB: usize = 12;

fn label(b: bool) -> Label {
    if b {
        Label::Positive
    } else {
        Label::Negative
    }
}

fn review(words: &[usize]) -> TokenizedReview {
    let text: Vec<String> = words.iter().map(|i| format!("v{i}")).collect();
    TokenizedReview::new(Document {
        id: "doc".into(),
        text: text.join(" "),
        label: Label::Positive,
    })
}

fn explanation(weights: &BTreeMap<usize, f64>) -> Explanation {
    Explanation {
        doc_id: "doc".into(),
        prediction: Prediction::from_prob(0.7),
        attributions: weights.iter().map(|(i, w)| Attribution { word: format!("v{i}"), weight: *w }).collect(),
        surrogate_r2: 1.0,
        seed: 0,
    }
}

fn embeddings(vectors: &[(f64, f64)]) -> EmbeddingTable {
    let mut emb = EmbeddingTable::new(2);
    for (i, (a, b)) in vectors.iter().enumerate() {
        emb.insert(format!("v{i}"), vec![*a, *b]);
    }
    emb
}

fn belief(w: (f64, f64), bias: f64) -> BeliefModel {
    BeliefModel {
        weights: vec![w.0, w.1],
        bias,
        threshold: 0.5,
        training_meta: TrainingMeta {
            seed: 0,
            reg_strength: 1.0,
            n_pos: 1,
            n_neg: 1,
            iterations: 0,
            converged: true,
        },
    }
}

fn rendering_inputs() -> impl Strategy<Value = (Vec<usize>, BTreeMap<usize, f64>, Vec<(f64, f64)>, (f64, f64), f64)> {
    (
        prop::collection::vec(0..VOCAB, 1..30),
        prop::collection::btree_map(0..VOCAB, -3.0f64..3.0, 0..10),
        prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), VOCAB),
        (-3.0f64..3.0, -3.0f64..3.0),
        -1.0f64..1.0,
    )
}

proptest! {
    #[test]
    fn graying_only_removes_highlights((words, weights, vectors, w, bias) in rendering_inputs(), gray_unknown: bool) {
        let r = review(&words);
        let e = explanation(&weights);
        // half the vocabulary has no embedding
        let emb = embeddings(&vectors[..VOCAB / 2]);
        let opts = RenderOptions { gray_unknown };
        let original = render_states(&e, &r, None, &emb, opts).unwrap();
        let selective = render_states(&e, &r, Some(&belief(w, bias)), &emb, opts).unwrap();
        prop_assert_eq!(original.mode, RenderMode::Original);
        prop_assert_eq!(selective.mode, RenderMode::Selective);
        prop_assert_eq!(original.states.len(), r.tokens.len());
        for (a, b) in original.states.iter().zip(&selective.states) {
            prop_assert!(a == b || *b == DisplayState::Grayed, "{:?} -> {:?}", a, b);
            prop_assert_eq!(*a == DisplayState::Plain, *b == DisplayState::Plain);
        }
        // one state per word
        let mut seen: BTreeMap<&str, DisplayState> = BTreeMap::new();
        for (t, s) in r.tokens.iter().zip(&selective.states) {
            prop_assert_eq!(*seen.entry(t.word.as_str()).or_insert(*s), *s);
        }
        for (t, s) in r.tokens.iter().zip(&original.states) {
            let keyword = e.weight_of(&t.word);
            prop_assert_eq!(keyword.is_some(), *s != DisplayState::Plain);
            if let (Some(x), DisplayState::Highlighted { direction, intensity }) = (keyword, s) {
                prop_assert_eq!(*direction, label(x >= 0.0));
                prop_assert!((1..=3).contains(intensity));
            }
        }
        let wire = selective.to_wire(&r);
        prop_assert_eq!(wire.tokens.len(), r.tokens.len());
        prop_assert_eq!(wire.tokens.iter().filter(|t| t.direction.is_some()).count(), selective.states.iter().filter(|s| matches!(s, DisplayState::Highlighted { .. })).count());
    }

    #[test]
    fn supporting_fraction_ignores_order_and_duplication(
        states in prop::collection::vec((0u8..3, any::<bool>()), 1..40),
        shift in 0usize..40,
        truth: bool,
    ) {
        let states: Vec<DisplayState> = states
            .iter()
            .map(|(kind, dir)| match kind {
                0 => DisplayState::Plain,
                1 => DisplayState::Grayed,
                _ => DisplayState::Highlighted { direction: label(*dir), intensity: 2 },
            })
            .collect();
        let make = |states: Vec<DisplayState>| SelectiveExplanation { doc_id: "doc".into(), mode: RenderMode::Selective, states };
        let base = supporting_fraction(&make(states.clone()), label(truth));
        let mut rotated = states.clone();
        rotated.rotate_left(shift % states.len());
        let doubled = [states.clone(), states.clone()].concat();
        prop_assert_eq!(supporting_fraction(&make(rotated), label(truth)), base);
        prop_assert_eq!(supporting_fraction(&make(doubled), label(truth)), base);
        if let Some(f) = base {
            let flipped = supporting_fraction(&make(states), label(!truth)).unwrap();
            prop_assert!((f + flipped - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn metric_identities(raw in prop::collection::vec((any::<bool>(), any::<bool>(), any::<bool>(), 0u64..10_000), 1..60)) {
        let decisions: Vec<Decision> = raw
            .iter()
            .enumerate()
            .map(|(i, (h, a, g, ms))| Decision {
                session_id: "s".into(),
                doc_id: format!("d{i}"),
                human_label: label(*h),
                ai_label: label(*a),
                groundtruth: label(*g),
                elapsed_ms: *ms,
            })
            .collect();
        let m = compute_metrics(&decisions).unwrap();
        let n = decisions.len() as f64;
        let c = m.cells;
        prop_assert_eq!(c.total(), decisions.len());
        // a binary human is right exactly when agreeing with a right AI or rejecting a wrong one
        prop_assert!((m.accuracy - (m.appropriate_agreement + m.appropriate_disagreement)).abs() < 1e-12);
        prop_assert!((m.reliance - (c.agree_ai_correct + c.agree_ai_wrong) as f64 / n).abs() < 1e-12);
        prop_assert_eq!(m.over_reliance.is_some(), c.ai_wrong() > 0);
        prop_assert_eq!(m.under_reliance.is_some(), c.ai_correct() > 0);
        if let (Some(o), Some(u)) = (m.over_reliance, m.under_reliance) {
            let reliance = (o * c.ai_wrong() as f64 + (1.0 - u) * c.ai_correct() as f64) / n;
            prop_assert!((reliance - m.reliance).abs() < 1e-12);
        }
        prop_assert_eq!(m.total_task_ms, raw.iter().map(|r| r.3).sum::<u64>());
    }

    #[test]
    fn auc_is_symmetric(pos in prop::collection::vec(0u8..10, 1..20), neg in prop::collection::vec(0u8..10, 1..20)) {
        let p: Vec<f64> = pos.iter().map(|x| *x as f64).collect();
        let q: Vec<f64> = neg.iter().map(|x| *x as f64).collect();
        let forward = ranking_auc(&p, &q).unwrap();
        let backward = ranking_auc(&q, &p).unwrap();
        prop_assert!((forward + backward - 1.0).abs() < 1e-12);
        let shifted: Vec<f64> = p.iter().map(|x| x + 100.0).collect();
        prop_assert_eq!(ranking_auc(&shifted, &q), Some(1.0));
        prop_assert_eq!(ranking_auc(&p, &p), Some(0.5));
    }

    #[test]
    fn task_samples_fill_every_cell(sizes in prop::array::uniform4(TASK_PER_CELL..15usize), fixed in 0u64..100, a in 0u64..100, b in 0u64..100) {
        let cells = [(true, true), (true, false), (false, false), (false, true)];
        let mut candidates = Vec::new();
        for (cell, (g, ai)) in cells.iter().enumerate() {
            for i in 0..sizes[cell] {
                candidates.push(TaskCandidate { doc_id: format!("c{cell}-{i}"), groundtruth: label(*g), ai_label: label(*ai) });
            }
        }
        let by_id: BTreeMap<&str, &TaskCandidate> = candidates.iter().map(|c| (c.doc_id.as_str(), c)).collect();
        for mode in [Sampling::Fixed, Sampling::Random] {
            let ids = sample_task_reviews(&candidates, mode, fixed, a).unwrap();
            prop_assert_eq!(ids.len(), TASK_SAMPLE_SIZE);
            prop_assert_eq!(ids.iter().collect::<BTreeSet<_>>().len(), ids.len());
            let mut per_cell: BTreeMap<(Label, bool), usize> = BTreeMap::new();
            for id in &ids {
                let c = by_id[id.as_str()];
                *per_cell.entry((c.groundtruth, c.ai_label == c.groundtruth)).or_default() += 1;
            }
            prop_assert_eq!(per_cell.len(), 4);
            prop_assert!(per_cell.values().all(|n| *n == TASK_PER_CELL));
        }
        prop_assert_eq!(
            sample_task_reviews(&candidates, Sampling::Fixed, fixed, a).unwrap(),
            sample_task_reviews(&candidates, Sampling::Fixed, fixed, b).unwrap()
        );
    }
}

#[test]
fn graying_is_uniform_per_word() {
    let r = review(&[0, 1, 0, 2, 1, 0]);
    let weights = BTreeMap::from([(0, 1.0), (1, -0.5), (2, 0.2)]);
    let emb = embeddings(&[(1.0, 0.0), (-1.0, 0.0), (1.0, 0.0)]);
    let s = render_states(&explanation(&weights), &r, Some(&belief((5.0, 0.0), 0.0)), &emb, RenderOptions::default()).unwrap();
    assert_eq!(s.states[0], s.states[2]);
    assert_eq!(s.states[0], s.states[5]);
    assert_eq!(s.states[1], DisplayState::Grayed);
    assert_eq!(s.states[4], DisplayState::Grayed);
    assert_eq!(s.grayed_count(), 2);
}

#[test]
fn oracle_noise_flips_at_the_configured_rate() {
    let lexicon: Vec<String> = (0..50).map(|i| format!("v{i}")).collect();
    let oracle = OracleAnnotator::new(lexicon.iter().cloned(), 0.2, 9);
    let reviews: Vec<TokenizedReview> = (0..40)
        .map(|d| {
            let text: Vec<String> = (0..100).map(|i| format!("v{i}")).collect();
            TokenizedReview::new(Document { id: format!("r{d}"), text: text.join(" "), label: Label::Positive })
        })
        .collect();
    let refs: Vec<&TokenizedReview> = reviews.iter().collect();
    let records = simulate_input(&oracle, &refs, &BTreeMap::new(), Elicitation::OpenEnded, "s", 0).unwrap();
    assert!(records.iter().all(|r| r.signal == Signal::Selected));
    let in_lexicon = |w: &str| w[1..].parse::<usize>().unwrap() < 50;
    let judgements = (reviews.len() * 100) as f64;
    let missed = reviews.len() * 50 - records.iter().filter(|r| in_lexicon(&r.word)).count();
    let added = records.iter().filter(|r| !in_lexicon(&r.word)).count();
    let rate = (missed + added) as f64 / judgements;
    assert!((rate - 0.2).abs() <= 0.05, "flip rate {rate}");

    let clean = OracleAnnotator::new(lexicon, 0.0, 9);
    let records = simulate_input(&clean, &refs, &BTreeMap::new(), Elicitation::OpenEnded, "s", 0).unwrap();
    assert_eq!(records.len(), reviews.len() * 50);
}
