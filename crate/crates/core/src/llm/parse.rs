use serde::{Deserialize, Serialize};

use super::prompt::Strategy;
use crate::types::Verdict;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParsedVerdict {
    Yes,
    No,
    Unparseable,
}

impl ParsedVerdict {
    pub fn verdict(self) -> Option<Verdict> {
        match self {
            ParsedVerdict::Yes => Some(Verdict::Yes),
            ParsedVerdict::No => Some(Verdict::No),
            ParsedVerdict::Unparseable => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedResponse {
    pub verdict: ParsedVerdict,
    /// Text of the response other than the part the verdict was read from.
    pub justification: Option<String>,
}

/// Which of the standalone words "yes" / "no" occur in `s`, case-insensitive.
fn tokens(s: &str) -> (bool, bool) {
    let (mut yes, mut no) = (false, false);
    for word in s.split(|c: char| !c.is_alphanumeric()) {
        if word.eq_ignore_ascii_case("yes") {
            yes = true;
        } else if word.eq_ignore_ascii_case("no") {
            no = true;
        }
    }
    (yes, no)
}

fn decide(segment: &str) -> ParsedVerdict {
    match tokens(segment) {
        (true, false) => ParsedVerdict::Yes,
        (false, true) => ParsedVerdict::No,
        _ => ParsedVerdict::Unparseable,
    }
}

fn non_empty(s: &str) -> Option<String> {
    let t = s.trim();
    (!t.is_empty()).then(|| t.to_string())
}

/// Split off the first sentence, ending at `.`, `!`, `?` or a newline.
fn first_sentence(s: &str) -> (&str, &str) {
    let s = s.trim_start();
    match s.find(['.', '!', '?', '\n']) {
        Some(i) => s.split_at(i + 1),
        None => (s, ""),
    }
}

/// Extract the yes/no verdict from a raw model response.
///
/// The verdict is a standalone "yes" or "no" in the first sentence; for the
/// step-by-step strategy the last non-empty line is consulted first, since
/// that is where the final answer lands. A segment containing both words, or
/// neither, is unparseable.
pub fn parse_verdict(raw: &str, strategy: Strategy) -> ParsedResponse {
    if strategy == Strategy::Sbs {
        let trimmed = raw.trim_end();
        let (head, last) = match trimmed.rfind('\n') {
            Some(i) => (&trimmed[..i], &trimmed[i + 1..]),
            None => ("", trimmed),
        };
        let v = decide(last);
        if v != ParsedVerdict::Unparseable {
            return ParsedResponse {
                verdict: v,
                justification: non_empty(head),
            };
        }
    }
    let (first, rest) = first_sentence(raw);
    ParsedResponse {
        verdict: decide(first),
        justification: non_empty(rest),
    }
}
