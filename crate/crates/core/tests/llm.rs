mod common;

use std::collections::{HashMap, HashSet};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use proptest::prelude::*;

use ctlens::corpus::Document;
use ctlens::embedding::MockEmbeddingProvider;
use ctlens::llm::{
    aggregate_runs, demonstration_answer, parse_verdict, run_prompts, ChatMessage, ChatProvider, ChatRequest,
    ChatResponse, HttpChatProvider, MockChatProvider, ParsedVerdict, Role, RunConfig, Strategy,
};
use ctlens::provider::{ProviderError, RetryPolicy};
use ctlens::store::{LabeledSample, Origin, PredictionOutput, Store};
use ctlens::types::PhaseKind;
use ctlens::Label;

/// A store with `n` labeled documents (every third is CT and mentions a
/// keyword), hash embeddings and, from 15 documents on, a 5-fold split.
fn labeled_store(dir: &std::path::Path, n: usize) -> Store {
    let mut store = Store::create(dir.join("store")).unwrap();
    let docs: Vec<Document> = (0..n)
        .map(|i| {
            let text = if i % 3 == 0 {
                format!("Post {i:04}: the chemtrails are a cover-up by the elites")
            } else {
                format!("Post {i:04}: local council approves a new bicycle lane")
            };
            Document {
                post_id: format!("d{i:04}"),
                subreddit: "conspiracy".into(),
                char_len: text.chars().count(),
                text,
                num_comments: i as u64,
                karma: 1,
            }
        })
        .collect();
    store.put_documents(&docs).unwrap();
    let labels: Vec<LabeledSample> = docs
        .iter()
        .enumerate()
        .map(|(i, d)| LabeledSample {
            post_id: d.post_id.clone(),
            label: Label::from_positive(i % 3 == 0),
            origin: Origin::Import,
            phase: PhaseKind::External,
        })
        .collect();
    store.put_labels(&labels, false).unwrap();
    let mock = MockEmbeddingProvider::new(16);
    let rows: Vec<(String, Vec<f64>)> = docs
        .iter()
        .map(|d| (d.post_id.clone(), mock.embed_text(&d.text)))
        .collect();
    store.put_embeddings("mock/hash/16", 16, &rows).unwrap();
    if n >= 15 {
        store.make_split("default", 5, 3).unwrap();
    }
    store
}

fn quick(strategy: Strategy, shots: usize, runs: u32) -> RunConfig {
    RunConfig {
        runs,
        retry: RetryPolicy::no_delay(3),
        ..RunConfig::new(strategy, shots, "mock-chat")
    }
}

#[test]
fn failures_are_recorded_not_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let mut store = labeled_store(dir.path(), 750);
    let provider = MockChatProvider::keyword()
        .failing_on("Post 0007")
        .failing_on("Post 0100")
        .failing_on("Post 0555");
    let s = run_prompts(&mut store, &provider, &quick(Strategy::Simple, 0, 1)).unwrap();
    assert_eq!((s.requested, s.answered, s.failed, s.unparseable), (750, 747, 3, 0));
    let failed: HashSet<&str> = store
        .predictions_for("llm:simple:0")
        .into_iter()
        .filter(|r| matches!(r.output, PredictionOutput::Failed { .. }))
        .map(|r| r.post_id.as_str())
        .collect();
    assert_eq!(failed, HashSet::from(["d0007", "d0100", "d0555"]));

    // failed pairs are retried on the next invocation, completed ones skipped
    let s = run_prompts(&mut store, &MockChatProvider::keyword(), &quick(Strategy::Simple, 0, 1)).unwrap();
    assert_eq!((s.skipped_existing, s.answered, s.failed), (747, 3, 0));
    let report = aggregate_runs(&store, "llm:simple:0", None).unwrap();
    assert_eq!(report.mean.recall, 1.0);
    assert_eq!(report.mean.precision, 1.0);
}

#[test]
fn resume_skips_completed_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let mut store = labeled_store(dir.path(), 20);
    let provider = MockChatProvider::keyword();
    let mut cfg = quick(Strategy::Justification, 0, 2);
    run_prompts(&mut store, &provider, &cfg).unwrap();
    assert_eq!(provider.calls(), 40);
    cfg.runs = 3;
    let s = run_prompts(&mut store, &provider, &cfg).unwrap();
    assert_eq!((s.skipped_existing, s.answered), (40, 20));
    assert_eq!(provider.calls(), 60);
    let r = store.predictions_for("llm:justification:0");
    assert_eq!(r.len(), 60);
    let with_reason = r.iter().filter(|p| p.justification.is_some()).count();
    assert!(with_reason > 0);

    // reopen from disk: nothing left to do
    drop(store);
    let mut store = Store::open(dir.path().join("store"), ctlens::store::Mode::ReadWrite).unwrap();
    let s = run_prompts(&mut store, &provider, &cfg).unwrap();
    assert_eq!((s.skipped_existing, s.answered), (60, 0));
}

#[test]
fn rate_limits_are_retried() {
    let dir = tempfile::tempdir().unwrap();
    let mut store = labeled_store(dir.path(), 6);
    let provider = MockChatProvider::keyword().rate_limited_first(2);
    let s = run_prompts(&mut store, &provider, &quick(Strategy::Sbs, 0, 1)).unwrap();
    assert_eq!((s.answered, s.failed, s.retries), (6, 0, 2));
    assert_eq!(provider.calls(), 8);
}

/// Records the demonstrations sent for each target.
#[derive(Default)]
struct Recorder {
    seen: Mutex<Vec<(String, Vec<ChatMessage>)>>,
}

impl ChatProvider for Recorder {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        let last = req.messages.last().unwrap().content.clone();
        self.seen.lock().unwrap().push((last, req.messages.clone()));
        Ok(ChatResponse::from_text("No."))
    }
}

#[test]
fn examples_come_from_training_folds() {
    let dir = tempfile::tempdir().unwrap();
    let mut store = labeled_store(dir.path(), 60);
    let fold: HashMap<String, usize> = store
        .split("default")
        .unwrap()
        .assignments
        .iter()
        .map(|a| (a.post_id.clone(), a.fold))
        .collect();
    let text_fold: HashMap<String, usize> = store
        .documents()
        .iter()
        .map(|d| (d.text.clone(), fold[&d.post_id]))
        .collect();
    let rec = Recorder::default();
    let mut cfg = quick(Strategy::Simple, 3, 1);
    cfg.split_id = Some("default".into());
    run_prompts(&mut store, &rec, &cfg).unwrap();
    let seen = rec.seen.lock().unwrap();
    assert_eq!(seen.len(), 60);
    for (_, messages) in seen.iter() {
        assert_eq!(messages.len(), 13);
        let target_fold = text_fold
            .iter()
            .find(|(t, _)| messages[12].content.contains(t.as_str()))
            .map(|(_, f)| *f)
            .unwrap();
        let mut answers = Vec::new();
        for pair in messages[..12].chunks(2) {
            let demo = text_fold
                .iter()
                .find(|(t, _)| pair[0].content.contains(t.as_str()))
                .unwrap();
            assert_ne!(*demo.1, target_fold, "demonstration from the test fold");
            assert_eq!(pair[1].role, Role::Assistant);
            answers.push(pair[1].content.clone());
        }
        assert_eq!(answers.iter().filter(|a| *a == "yes").count(), 3);
    }
}

#[test]
fn http_provider_against_mock_server() {
    let chat = Arc::new(MockChatProvider::keyword().rate_limited_first(1));
    let base = common::spawn_server(ctlens::mock_server::router(
        Arc::new(MockEmbeddingProvider::new(8)),
        Arc::clone(&chat),
    ));
    let provider = HttpChatProvider::new(&base, None, Duration::from_secs(10)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut store = labeled_store(dir.path(), 9);
    let s = run_prompts(&mut store, &provider, &quick(Strategy::Simple, 0, 1)).unwrap();
    assert_eq!((s.answered, s.retries), (9, 1));
    let report = aggregate_runs(&store, "llm:simple:0", None).unwrap();
    assert_eq!(report.mean.f1, 1.0);
}

proptest! {
    #[test]
    fn demonstration_answers_parse_back(positive in any::<bool>(), strategy in prop::sample::select(Strategy::ALL.to_vec())) {
        let label = Label::from_positive(positive);
        let parsed = parse_verdict(demonstration_answer(label), strategy).verdict;
        let want = if positive { ParsedVerdict::Yes } else { ParsedVerdict::No };
        prop_assert_eq!(parsed, want);
    }
}
