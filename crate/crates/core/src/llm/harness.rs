use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::parse::parse_verdict;
use super::prompt::{render_prompt, ChatMessage, PromptSpec, Strategy};
use super::provider::{ChatProvider, ChatRequest, DEFAULT_MAX_TOKENS, DEFAULT_TEMPERATURE};
use crate::embedding::{select_examples, Candidate};
use crate::error::{Error, Result};
use crate::evaluation::{summarize, MetricSummary, Metrics};
use crate::provider::{with_retry, RetryPolicy};
use crate::store::{PredictionOutput, PredictionRecord, Store};
use crate::types::Label;

pub const DEFAULT_RUNS: u32 = 10;

pub fn model_id(strategy: Strategy, n_shots: usize) -> String {
    format!("llm:{strategy}:{n_shots}")
}

/// Inverse of [`model_id`].
pub fn parse_model_id(id: &str) -> Result<(Strategy, usize)> {
    let mut parts = id.split(':');
    match (parts.next(), parts.next(), parts.next(), parts.next()) {
        (Some("llm"), Some(s), Some(n), None) => Ok((
            s.parse()?,
            n.parse()
                .map_err(|_| Error::Parameter(format!("bad shot count in model id {id:?}")))?,
        )),
        _ => Err(Error::Parameter(format!("not an LLM model id: {id:?}"))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub strategy: Strategy,
    pub n_shots: usize,
    pub runs: u32,
    /// Model name sent to the provider.
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub parallel: usize,
    pub retry: RetryPolicy,
    /// Split used to keep demonstrations out of the target's test fold.
    pub split_id: Option<String>,
    pub restrict_pool_to_training_folds: bool,
    pub allow_any_shots: bool,
    /// Posts to classify; all labeled posts when `None`.
    pub targets: Option<Vec<String>>,
}

impl RunConfig {
    pub fn new(strategy: Strategy, n_shots: usize, model: impl Into<String>) -> Self {
        Self {
            strategy,
            n_shots,
            runs: DEFAULT_RUNS,
            model: model.into(),
            temperature: DEFAULT_TEMPERATURE,
            max_tokens: DEFAULT_MAX_TOKENS,
            parallel: 4,
            retry: RetryPolicy::default(),
            split_id: None,
            restrict_pool_to_training_folds: true,
            allow_any_shots: false,
            targets: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSummary {
    pub model_id: String,
    /// (post, run) pairs requested.
    pub requested: usize,
    /// Pairs already completed by an earlier invocation.
    pub skipped_existing: usize,
    pub answered: usize,
    pub unparseable: usize,
    pub failed: usize,
    pub retries: usize,
}

struct Job {
    post_id: String,
    run_index: u32,
    messages: Vec<ChatMessage>,
}

struct PoolEntry {
    id: String,
    label: Label,
    vector: Vec<f64>,
}

/// Per-target demonstrations: n_shots nearest CT and n_shots nearest non-CT
/// labeled posts, drawn from outside the target's test fold when a split is
/// configured.
fn demonstrations(
    store: &Store,
    cfg: &RunConfig,
    target: &str,
    pool: &[PoolEntry],
    fold_of: &HashMap<String, usize>,
) -> Result<Vec<(String, Label)>> {
    if cfg.n_shots == 0 {
        return Ok(Vec::new());
    }
    let query = store
        .embedding(target)
        .ok_or_else(|| Error::Integrity(format!("post {target} has no embedding for example selection")))?;
    let excluded_fold = if cfg.restrict_pool_to_training_folds {
        fold_of.get(target).copied()
    } else {
        None
    };
    let admissible = |e: &&PoolEntry| excluded_fold.is_none() || fold_of.get(&e.id).copied() != excluded_fold;
    let cands = |positive: bool| -> Vec<Candidate<'_>> {
        pool.iter()
            .filter(|e| e.label.is_positive() == positive)
            .filter(admissible)
            .map(|e| Candidate {
                id: &e.id,
                vector: &e.vector,
            })
            .collect()
    };
    let (pos, neg) = select_examples(target, &query, cfg.n_shots, &cands(true), &cands(false))?;
    let text = |id: &str| -> Result<String> {
        store
            .document(id)
            .map(|d| d.text.clone())
            .ok_or_else(|| Error::Integrity(format!("example {id} has no document")))
    };
    let mut out = Vec::with_capacity(2 * cfg.n_shots);
    for (id, _) in &pos.neighbors {
        out.push((text(id)?, Label::Ct));
    }
    for (id, _) in &neg.neighbors {
        out.push((text(id)?, Label::NonCt));
    }
    Ok(out)
}

fn record_for(
    job: &Job,
    model_id: &str,
    strategy: Strategy,
    reply: std::result::Result<String, String>,
) -> PredictionRecord {
    let (output, raw_response, justification) = match reply {
        Ok(text) => {
            let parsed = parse_verdict(&text, strategy);
            let output = match parsed.verdict.verdict() {
                Some(v) => PredictionOutput::Label { label: v.label() },
                None => PredictionOutput::Unparseable,
            };
            (output, Some(text), parsed.justification)
        }
        Err(error) => (PredictionOutput::Failed { error }, None, None),
    };
    PredictionRecord {
        post_id: job.post_id.clone(),
        model_id: model_id.to_string(),
        run_index: job.run_index,
        output,
        raw_response,
        justification,
    }
}

/// Classify every target `runs` times and append the results to the store.
///
/// Pairs that already have a completed record are skipped, so an interrupted
/// invocation can be rerun. Provider failures become `failed` records rather
/// than aborting the run; records are persisted in chunks, in job order.
pub fn run_prompts<P: ChatProvider + ?Sized>(store: &mut Store, provider: &P, cfg: &RunConfig) -> Result<RunSummary> {
    if cfg.runs == 0 {
        return Err(Error::Parameter("runs must be at least 1".into()));
    }
    let id = model_id(cfg.strategy, cfg.n_shots);
    let targets: Vec<String> = match &cfg.targets {
        Some(t) => t.clone(),
        None => store.labels().iter().map(|s| s.post_id.clone()).collect(),
    };
    let done: HashSet<(String, u32)> = store
        .predictions_for(&id)
        .into_iter()
        .filter(|r| r.is_completed())
        .map(|r| (r.post_id.clone(), r.run_index))
        .collect();

    let fold_of: HashMap<String, usize> = match &cfg.split_id {
        Some(s) => store
            .split(s)?
            .assignments
            .iter()
            .map(|a| (a.post_id.clone(), a.fold))
            .collect(),
        None => HashMap::new(),
    };
    let pool: Vec<PoolEntry> = if cfg.n_shots > 0 {
        store
            .labels()
            .iter()
            .filter_map(|s| {
                store.embedding(&s.post_id).map(|vector| PoolEntry {
                    id: s.post_id.clone(),
                    label: s.label,
                    vector,
                })
            })
            .collect()
    } else {
        Vec::new()
    };

    let mut summary = RunSummary {
        model_id: id.clone(),
        ..Default::default()
    };
    let mut jobs = Vec::new();
    for target in &targets {
        let pending: Vec<u32> = (0..cfg.runs)
            .filter(|r| !done.contains(&(target.clone(), *r)))
            .collect();
        summary.requested += cfg.runs as usize;
        summary.skipped_existing += (cfg.runs as usize) - pending.len();
        if pending.is_empty() {
            continue;
        }
        let text = store
            .document(target)
            .ok_or_else(|| Error::NotFound(format!("no document {target}")))?
            .text
            .clone();
        let examples = demonstrations(store, cfg, target, &pool, &fold_of)?;
        for run_index in pending {
            let spec = PromptSpec {
                strategy: cfg.strategy,
                n_shots: cfg.n_shots,
                examples: examples.clone(),
                target_text: text.clone(),
                seed: u64::from(run_index),
                allow_any_shots: cfg.allow_any_shots,
            };
            jobs.push(Job {
                post_id: target.clone(),
                run_index,
                messages: render_prompt(&spec)?,
            });
        }
    }

    let workers = cfg.parallel.max(1);
    let retries = AtomicUsize::new(0);
    for chunk in jobs.chunks(workers * 16) {
        let replies: Vec<Mutex<Option<std::result::Result<String, String>>>> =
            chunk.iter().map(|_| Mutex::new(None)).collect();
        let next = AtomicUsize::new(0);
        std::thread::scope(|scope| {
            for _ in 0..workers.min(chunk.len()) {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    let Some(job) = chunk.get(i) else { break };
                    let req = ChatRequest {
                        model: cfg.model.clone(),
                        messages: job.messages.clone(),
                        temperature: cfg.temperature,
                        max_tokens: cfg.max_tokens,
                    };
                    let out = with_retry(&cfg.retry, || {
                        provider.complete(&req).and_then(|r| r.content().map(str::to_string))
                    });
                    retries.fetch_add(out.retries.len(), Ordering::SeqCst);
                    *replies[i].lock().expect("reply slot poisoned") = Some(out.result.map_err(|e| e.to_string()));
                });
            }
        });
        let records: Vec<PredictionRecord> = chunk
            .iter()
            .zip(replies)
            .map(|(job, slot)| {
                let reply = slot
                    .into_inner()
                    .expect("reply slot poisoned")
                    .expect("every job answered");
                record_for(job, &id, cfg.strategy, reply)
            })
            .collect();
        for r in &records {
            match r.output {
                PredictionOutput::Failed { .. } => summary.failed += 1,
                PredictionOutput::Unparseable => summary.unparseable += 1,
                _ => summary.answered += 1,
            }
        }
        store.put_predictions(&records)?;
        tracing::info!(model_id = %id, persisted = records.len(), "prompt chunk done");
    }
    summary.retries = retries.into_inner();
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub run_index: u32,
    pub metrics: Metrics,
    pub unparseable: u64,
    pub failed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmReport {
    pub model_id: String,
    pub strategy: Strategy,
    pub n_shots: usize,
    pub runs: Vec<RunMetrics>,
    pub mean: MetricSummary,
    pub std: MetricSummary,
    /// Mean number of unparseable responses per run.
    pub unparseable_mean: f64,
    pub failed_total: u64,
}

/// Per-run metrics over labeled posts and their mean/std across runs.
///
/// Unparseable and failed responses are counted separately and excluded from
/// the metric arithmetic. `eval_ids` restricts the evaluated posts.
pub fn aggregate_runs(store: &Store, model_id: &str, eval_ids: Option<&HashSet<String>>) -> Result<LlmReport> {
    let (strategy, n_shots) = parse_model_id(model_id)?;
    let mut by_run: std::collections::BTreeMap<u32, (Vec<f64>, Vec<Label>, u64, u64)> = Default::default();
    for r in store.predictions_for(model_id) {
        if eval_ids.is_some_and(|ids| !ids.contains(&r.post_id)) {
            continue;
        }
        let Some(label) = store.label(&r.post_id) else { continue };
        let e = by_run.entry(r.run_index).or_default();
        match &r.output {
            PredictionOutput::Unparseable => e.2 += 1,
            PredictionOutput::Failed { .. } => e.3 += 1,
            _ => {
                e.0.push(r.score().expect("completed prediction has a score"));
                e.1.push(label);
            }
        }
    }
    if by_run.is_empty() {
        return Err(Error::NotFound(format!("no labeled predictions for {model_id}")));
    }
    let runs: Vec<RunMetrics> = by_run
        .into_iter()
        .map(|(run_index, (scores, labels, unparseable, failed))| {
            Ok(RunMetrics {
                run_index,
                metrics: Metrics::from_scores(&scores, &labels)?,
                unparseable,
                failed,
            })
        })
        .collect::<Result<_>>()?;
    let units: Vec<Metrics> = runs.iter().map(|r| r.metrics.clone()).collect();
    let (mean, std) = summarize(&units);
    Ok(LlmReport {
        model_id: model_id.to_string(),
        strategy,
        n_shots,
        unparseable_mean: runs.iter().map(|r| r.unparseable as f64).sum::<f64>() / runs.len() as f64,
        failed_total: runs.iter().map(|r| r.failed).sum(),
        runs,
        mean,
        std,
    })
}

/// One row per (strategy, shots), mean ± std over runs.
pub fn reports_markdown(reports: &[LlmReport]) -> String {
    let mut sorted: Vec<&LlmReport> = reports.iter().collect();
    sorted.sort_by_key(|r| (r.strategy, r.n_shots));
    let mut out =
        String::from("| Strategy | Shots | Precision | Recall | F1 | Unparseable/run |\n|---|---|---|---|---|---|\n");
    for r in sorted {
        let _ = writeln!(
            out,
            "| {} | {} | {:.1}% ± {:.1} | {:.1}% ± {:.1} | {:.3} ± {:.3} | {:.1} |",
            r.strategy,
            r.n_shots,
            r.mean.precision * 100.0,
            r.std.precision * 100.0,
            r.mean.recall * 100.0,
            r.std.recall * 100.0,
            r.mean.f1,
            r.std.f1,
            r.unparseable_mean
        );
    }
    out
}
