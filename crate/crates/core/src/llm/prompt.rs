use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::types::Label;

pub const ALLOWED_SHOTS: [usize; 4] = [0, 1, 3, 5];

const QUESTION: &str = "Decide whether the following text describes a conspiracy theory or not (yes/no).";
const JUSTIFY: &str = "Justify your answer.";
const STEPS: &str = "First, extract the narrative or claim from the text. \
Second, decide if the claim is a known conspiracy theory or suggests a hidden plan. \
Third, decide if the text agrees with or supports the conspiracy theory or plan. \
Fourth, answer the question (yes/no).";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Simple,
    Justification,
    Sbs,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Simple, Strategy::Justification, Strategy::Sbs];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Simple => "simple",
            Strategy::Justification => "justification",
            Strategy::Sbs => "sbs",
        }
    }

    /// The instruction for this strategy with `text` quoted at the end.
    pub fn instruction(self, text: &str) -> String {
        match self {
            Strategy::Simple => format!("{QUESTION} \"{text}\""),
            Strategy::Justification => format!("{QUESTION} {JUSTIFY} \"{text}\""),
            Strategy::Sbs => format!("{QUESTION} {STEPS} \"{text}\""),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "simple" => Ok(Strategy::Simple),
            "justification" => Ok(Strategy::Justification),
            "sbs" | "step-by-step" => Ok(Strategy::Sbs),
            other => Err(Error::Parameter(format!("unknown strategy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub strategy: Strategy,
    pub n_shots: usize,
    /// `n_shots` positive and `n_shots` negative (text, label) pairs.
    pub examples: Vec<(String, Label)>,
    pub target_text: String,
    /// Seed for the order of the demonstrations.
    pub seed: u64,
    /// Permit shot counts outside {0, 1, 3, 5}.
    #[serde(default)]
    pub allow_any_shots: bool,
}

impl PromptSpec {
    pub fn validate(&self) -> Result<()> {
        if !self.allow_any_shots && !ALLOWED_SHOTS.contains(&self.n_shots) {
            return Err(Error::Parameter(format!(
                "n_shots must be one of {ALLOWED_SHOTS:?}, got {}",
                self.n_shots
            )));
        }
        let pos = self.examples.iter().filter(|(_, l)| l.is_positive()).count();
        let neg = self.examples.len() - pos;
        if pos != self.n_shots || neg != self.n_shots {
            return Err(Error::Parameter(format!(
                "{}-shot prompt needs {} examples per class, got {pos} CT and {neg} non-CT",
                self.n_shots, self.n_shots
            )));
        }
        Ok(())
    }
}

pub fn demonstration_answer(label: Label) -> &'static str {
    if label.is_positive() {
        "yes"
    } else {
        "no"
    }
}

/// Messages for one query: each demonstration is a user turn (the simple
/// instruction around the example text) followed by an assistant turn
/// "yes"/"no"; demonstrations are shuffled by the spec's seed; the final user
/// turn is the strategy's instruction around the target text.
pub fn render_prompt(spec: &PromptSpec) -> Result<Vec<ChatMessage>> {
    spec.validate()?;
    let mut examples: Vec<&(String, Label)> = spec.examples.iter().collect();
    rng::shuffle(&mut examples, &mut rng::seeded(spec.seed));
    let mut messages = Vec::with_capacity(examples.len() * 2 + 1);
    for (text, label) in examples {
        messages.push(ChatMessage::user(Strategy::Simple.instruction(text)));
        messages.push(ChatMessage::assistant(demonstration_answer(*label)));
    }
    messages.push(ChatMessage::user(spec.strategy.instruction(&spec.target_text)));
    Ok(messages)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(strategy: Strategy, n: usize) -> PromptSpec {
        let mut examples = Vec::new();
        for i in 0..n {
            examples.push((format!("ct example {i}"), Label::Ct));
            examples.push((format!("plain example {i}"), Label::NonCt));
        }
        PromptSpec {
            strategy,
            n_shots: n,
            examples,
            target_text: "T".into(),
            seed: 3,
            allow_any_shots: false,
        }
    }

    #[test]
    fn simple_zero_shot() {
        let msgs = render_prompt(&spec(Strategy::Simple, 0)).unwrap();
        assert_eq!(
            msgs,
            vec![ChatMessage::user(
                "Decide whether the following text describes a conspiracy theory or not (yes/no). \"T\""
            )]
        );
    }

    #[test]
    fn shot_counts() {
        for n in [1, 3, 5] {
            let msgs = render_prompt(&spec(Strategy::Sbs, n)).unwrap();
            assert_eq!(msgs.iter().filter(|m| m.role == Role::Assistant).count(), 2 * n);
            assert_eq!(msgs.len(), 4 * n + 1);
        }
    }

    #[test]
    fn rejects_unlisted_shot_counts() {
        assert!(matches!(
            render_prompt(&spec(Strategy::Simple, 2)),
            Err(Error::Parameter(_))
        ));
        let mut s = spec(Strategy::Simple, 2);
        s.allow_any_shots = true;
        assert!(render_prompt(&s).is_ok());
    }

    #[test]
    fn unbalanced_examples_rejected() {
        let mut s = spec(Strategy::Simple, 1);
        s.examples[1].1 = Label::Ct;
        assert!(render_prompt(&s).is_err());
    }

    #[test]
    fn order_follows_seed() {
        let a = render_prompt(&spec(Strategy::Simple, 5)).unwrap();
        let b = render_prompt(&spec(Strategy::Simple, 5)).unwrap();
        assert_eq!(a, b);
        let mut other = spec(Strategy::Simple, 5);
        other.seed = 4;
        assert_ne!(a, render_prompt(&other).unwrap());
    }
}
