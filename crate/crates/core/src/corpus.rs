//! Post-dump ingestion: streaming NDJSON (optionally zstd) archives, removal
//! filtering and conversion into classification [`Document`]s.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// Body placeholders left in dumps for moderator-removed and self-deleted posts.
pub const REMOVED_BODY_SENTINELS: [&str; 2] = ["[removed]", "[deleted]"];
/// Author placeholder for deleted accounts.
pub const DELETED_AUTHOR_SENTINEL: &str = "[deleted]";
pub const DEFAULT_MIN_CHARS: usize = 30;

const ZSTD_MAGIC: [u8; 4] = [0x28, 0xB5, 0x2F, 0xFD];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Post {
    pub id: String,
    pub subreddit: String,
    pub author: String,
    pub title: String,
    pub body: String,
    pub created_utc: i64,
    pub num_comments: u64,
    pub score: i64,
    pub retrieved_removed: bool,
}

impl Post {
    pub fn is_removed(&self) -> bool {
        REMOVED_BODY_SENTINELS.contains(&self.body.as_str()) || self.author == DELETED_AUTHOR_SENTINEL
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub post_id: String,
    pub subreddit: String,
    pub text: String,
    pub char_len: usize,
    pub num_comments: u64,
    pub karma: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rejected {
    TooShort { char_len: usize, min_chars: usize },
}

/// Shared, thread-safe counters for one ingest run.
#[derive(Debug, Default)]
pub struct SkipCounter {
    malformed: AtomicU64,
    missing_field: AtomicU64,
}

impl SkipCounter {
    pub fn malformed(&self) -> u64 {
        self.malformed.load(Ordering::Relaxed)
    }

    pub fn missing_field(&self) -> u64 {
        self.missing_field.load(Ordering::Relaxed)
    }

    pub fn total(&self) -> u64 {
        self.malformed() + self.missing_field()
    }
}

/// Iterator over the posts of one dump stream.
///
/// Malformed lines and lines missing `id`/`subreddit` are skipped and counted;
/// only read failures on the underlying stream are yielded as errors.
pub struct DumpStream<R> {
    reader: R,
    skips: Arc<SkipCounter>,
    buf: Vec<u8>,
    failed: bool,
}

impl<R: BufRead> DumpStream<R> {
    pub fn new(reader: R) -> Self {
        Self::with_counter(reader, Arc::new(SkipCounter::default()))
    }

    pub fn with_counter(reader: R, skips: Arc<SkipCounter>) -> Self {
        Self {
            reader,
            skips,
            buf: Vec::new(),
            failed: false,
        }
    }

    pub fn skips(&self) -> Arc<SkipCounter> {
        Arc::clone(&self.skips)
    }
}

impl<R: BufRead> Iterator for DumpStream<R> {
    type Item = Result<Post>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        loop {
            self.buf.clear();
            match self.reader.read_until(b'\n', &mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => {
                    self.failed = true;
                    return Some(Err(Error::Ingest(format!("unreadable stream: {e}"))));
                }
            }
            let line = match std::str::from_utf8(&self.buf) {
                Ok(s) => s.trim(),
                Err(_) => {
                    self.skips.malformed.fetch_add(1, Ordering::Relaxed);
                    continue;
                }
            };
            if line.is_empty() {
                continue;
            }
            match parse_post_line(line) {
                Ok(post) => return Some(Ok(post)),
                Err(LineError::Malformed) => {
                    self.skips.malformed.fetch_add(1, Ordering::Relaxed);
                }
                Err(LineError::MissingField) => {
                    self.skips.missing_field.fetch_add(1, Ordering::Relaxed);
                }
            }
        }
    }
}

enum LineError {
    Malformed,
    MissingField,
}

fn parse_post_line(line: &str) -> std::result::Result<Post, LineError> {
    let value: Value = serde_json::from_str(line).map_err(|_| LineError::Malformed)?;
    let obj = value.as_object().ok_or(LineError::Malformed)?;

    let required = |key: &str| -> std::result::Result<String, LineError> {
        match obj.get(key) {
            Some(Value::String(s)) if !s.is_empty() => Ok(s.clone()),
            _ => Err(LineError::MissingField),
        }
    };
    let id = required("id")?;
    let subreddit = required("subreddit")?;

    let text = |key: &str| -> String {
        match obj.get(key) {
            Some(Value::String(s)) => s.clone(),
            _ => String::new(),
        }
    };
    let body = text("selftext");
    let retrieved_removed = REMOVED_BODY_SENTINELS.contains(&body.as_str());

    Ok(Post {
        id,
        subreddit,
        author: text("author"),
        title: text("title"),
        body,
        created_utc: lenient_int(obj.get("created_utc")).unwrap_or(0),
        num_comments: lenient_int(obj.get("num_comments")).unwrap_or(0).max(0) as u64,
        score: lenient_int(obj.get("score")).unwrap_or(0),
        retrieved_removed,
    })
}

// Older dumps store some counters as strings or floats.
fn lenient_int(v: Option<&Value>) -> Option<i64> {
    match v? {
        Value::Number(n) => n.as_i64().or_else(|| n.as_f64().map(|f| f as i64)),
        Value::String(s) => s
            .parse::<i64>()
            .ok()
            .or_else(|| s.parse::<f64>().ok().map(|f| f as i64)),
        _ => None,
    }
}

/// Wrap a byte stream, decompressing when `zstd` is set or the zstd magic
/// number is present.
pub fn open_reader<R: Read + 'static>(source: R, zstd: bool) -> Result<Box<dyn BufRead>> {
    let mut buffered = BufReader::new(source);
    let detected = {
        let head = buffered
            .fill_buf()
            .map_err(|e| Error::Ingest(format!("unreadable stream: {e}")))?;
        head.starts_with(&ZSTD_MAGIC)
    };
    if zstd || detected {
        let decoder = zstd::stream::read::Decoder::with_buffer(buffered)
            .map_err(|e| Error::Ingest(format!("zstd init failed: {e}")))?;
        Ok(Box::new(BufReader::new(decoder)))
    } else {
        Ok(Box::new(buffered))
    }
}

pub fn stream_dump<R: Read + 'static>(
    source: R,
    zstd: bool,
    skips: Arc<SkipCounter>,
) -> Result<DumpStream<Box<dyn BufRead>>> {
    Ok(DumpStream::with_counter(open_reader(source, zstd)?, skips))
}

pub fn stream_file(path: &Path, zstd: bool, skips: Arc<SkipCounter>) -> Result<DumpStream<Box<dyn BufRead>>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    stream_dump(file, zstd, skips)
}

/// Read every file fully, one thread per file, and concatenate the posts in
/// argument order.
pub fn read_files(paths: &[PathBuf], zstd: bool, skips: &Arc<SkipCounter>) -> Result<Vec<Post>> {
    let per_file: Vec<Result<Vec<Post>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = paths
            .iter()
            .map(|p| {
                let skips = Arc::clone(skips);
                scope.spawn(move || stream_file(p, zstd, skips)?.collect::<Result<Vec<_>>>())
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("ingest worker panicked"))
            .collect()
    });
    let mut out = Vec::new();
    for posts in per_file {
        out.extend(posts?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterReport {
    pub full_count: u64,
    pub clean_count: u64,
    /// subreddit -> (full, clean)
    pub per_subreddit: BTreeMap<String, (u64, u64)>,
}

/// Drop removed and self-deleted posts, preserving order.
pub fn filter_posts(posts: Vec<Post>) -> (Vec<Post>, FilterReport) {
    let mut report = FilterReport::default();
    let mut kept = Vec::with_capacity(posts.len());
    for post in posts {
        let entry = report.per_subreddit.entry(post.subreddit.clone()).or_default();
        entry.0 += 1;
        report.full_count += 1;
        if post.is_removed() {
            continue;
        }
        entry.1 += 1;
        report.clean_count += 1;
        kept.push(post);
    }
    (kept, report)
}

/// Inclusive `created_utc` window; `None` bounds are open.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TimeWindow {
    pub since: Option<i64>,
    pub until: Option<i64>,
}

impl TimeWindow {
    pub fn contains(&self, t: i64) -> bool {
        self.since.is_none_or(|s| t >= s) && self.until.is_none_or(|u| t <= u)
    }
}

pub fn join_text(title: &str, body: &str) -> String {
    let title = title.trim();
    let body = body.trim();
    match (title.is_empty(), body.is_empty()) {
        (_, true) => title.to_string(),
        (true, false) => body.to_string(),
        (false, false) => format!("{title}\n{body}"),
    }
}

pub fn to_document(post: &Post, min_chars: usize) -> std::result::Result<Document, Rejected> {
    let text = join_text(&post.title, &post.body);
    let char_len = text.chars().count();
    if char_len < min_chars {
        return Err(Rejected::TooShort { char_len, min_chars });
    }
    Ok(Document {
        post_id: post.id.clone(),
        subreddit: post.subreddit.clone(),
        text,
        char_len,
        num_comments: post.num_comments,
        karma: post.score.max(0) as u64,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub parsed: u64,
    pub skipped_malformed: u64,
    pub skipped_missing_field: u64,
    pub outside_window: u64,
    pub filter: FilterReport,
    pub too_short: u64,
    pub documents: u64,
}

#[derive(Debug, Clone, Copy)]
pub struct IngestOptions {
    pub zstd: bool,
    pub min_chars: usize,
    pub window: TimeWindow,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            zstd: false,
            min_chars: DEFAULT_MIN_CHARS,
            window: TimeWindow::default(),
        }
    }
}

/// Full ingest path: read, window, filter removed, drop short texts.
pub fn ingest_files(paths: &[PathBuf], opts: IngestOptions) -> Result<(Vec<Document>, IngestSummary)> {
    let skips = Arc::new(SkipCounter::default());
    let posts = read_files(paths, opts.zstd, &skips)?;
    let mut summary = IngestSummary {
        parsed: posts.len() as u64,
        skipped_malformed: skips.malformed(),
        skipped_missing_field: skips.missing_field(),
        ..Default::default()
    };
    let (in_window, outside): (Vec<Post>, Vec<Post>) =
        posts.into_iter().partition(|p| opts.window.contains(p.created_utc));
    summary.outside_window = outside.len() as u64;

    let (clean, report) = filter_posts(in_window);
    summary.filter = report;

    let mut docs = Vec::with_capacity(clean.len());
    for post in &clean {
        match to_document(post, opts.min_chars) {
            Ok(doc) => docs.push(doc),
            Err(Rejected::TooShort { .. }) => summary.too_short += 1,
        }
    }
    summary.documents = docs.len() as u64;
    Ok((docs, summary))
}
