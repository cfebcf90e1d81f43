mod common;

use std::sync::Arc;
use std::time::Duration;

use ctlens::corpus::Document;
use ctlens::embedding::{embed_batch, EmbedOptions, HttpEmbeddingProvider, MockEmbeddingProvider, MOCK_MODEL};
use ctlens::llm::MockChatProvider;
use ctlens::provider::RetryPolicy;
use ctlens::store::{Mode, Store};
use ctlens::Error;

fn docs(n: usize) -> Vec<Document> {
    (0..n)
        .map(|i| Document {
            post_id: format!("e{i:03}"),
            subreddit: "s".into(),
            text: format!("document {i} about topic {}", i % 4),
            char_len: 30,
            num_comments: 0,
            karma: 0,
        })
        .collect()
}

fn opts(batch_size: usize) -> EmbedOptions {
    EmbedOptions {
        batch_size,
        parallel: 3,
        retry: RetryPolicy::no_delay(4),
    }
}

#[test]
fn cached_vectors_are_not_requested_again() {
    let dir = tempfile::tempdir().unwrap();
    let mut store = Store::create(dir.path().join("s")).unwrap();
    let all = docs(25);
    store.put_documents(&all).unwrap();
    let mock = MockEmbeddingProvider::new(12);

    let (_, r) = embed_batch(&mut store, &all[..10], &mock, &opts(4)).unwrap();
    assert_eq!((r.cached, r.embedded, r.provider_batches), (0, 10, 3));
    let (vectors, r) = embed_batch(&mut store, &all, &mock, &opts(4)).unwrap();
    assert_eq!((r.requested, r.cached, r.embedded, r.provider_batches), (25, 10, 15, 4));
    assert_eq!(mock.calls(), 7);
    assert_eq!(vectors.len(), 25);
    assert!(vectors
        .iter()
        .zip(&all)
        .all(|(v, d)| v.post_id == d.post_id && v.dim == 12));

    // survives a reopen
    drop(store);
    let mut store = Store::open(dir.path().join("s"), Mode::ReadWrite).unwrap();
    let (_, r) = embed_batch(&mut store, &all, &mock, &opts(4)).unwrap();
    assert_eq!((r.cached, r.embedded), (25, 0));
    assert_eq!(mock.calls(), 7);
}

#[test]
fn fingerprint_mismatch_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut store = Store::create(dir.path().join("s")).unwrap();
    let all = docs(3);
    store.put_documents(&all).unwrap();
    embed_batch(&mut store, &all[..1], &MockEmbeddingProvider::new(8), &opts(8)).unwrap();
    let err = embed_batch(&mut store, &all, &MockEmbeddingProvider::new(16), &opts(8)).unwrap_err();
    assert!(matches!(err, Error::Integrity(_)), "{err}");
}

#[test]
fn transient_failures_are_retried() {
    let dir = tempfile::tempdir().unwrap();
    let mut store = Store::create(dir.path().join("s")).unwrap();
    let all = docs(5);
    store.put_documents(&all).unwrap();
    let mock = MockEmbeddingProvider::new(8).failing_first(2);
    let (_, r) = embed_batch(&mut store, &all, &mock, &opts(5)).unwrap();
    assert_eq!((r.embedded, r.retries), (5, 2));
}

#[test]
fn http_wire_matches_in_process_mock() {
    let base = common::spawn_server(ctlens::mock_server::router(
        Arc::new(MockEmbeddingProvider::new(10)),
        Arc::new(MockChatProvider::keyword()),
    ));
    let http = HttpEmbeddingProvider::new(&base, Some("secret".into()), Duration::from_secs(10))
        .unwrap()
        .with_name("mock")
        .expecting(MOCK_MODEL, 10);
    let all = docs(7);

    let dir = tempfile::tempdir().unwrap();
    let mut a = Store::create(dir.path().join("a")).unwrap();
    let mut b = Store::create(dir.path().join("b")).unwrap();
    a.put_documents(&all).unwrap();
    b.put_documents(&all).unwrap();
    let (va, _) = embed_batch(&mut a, &all, &http, &opts(3)).unwrap();
    let (vb, _) = embed_batch(&mut b, &all, &MockEmbeddingProvider::new(10), &opts(3)).unwrap();
    assert_eq!(va, vb);
    assert_eq!(a.embedding_header(), b.embedding_header());
}
