use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Binary ground-truth class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "CT")]
    Ct,
    #[serde(rename = "NonCT")]
    NonCt,
}

impl Label {
    pub fn is_positive(self) -> bool {
        self == Label::Ct
    }

    pub fn from_positive(positive: bool) -> Self {
        if positive {
            Label::Ct
        } else {
            Label::NonCt
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Ct => "CT",
            Label::NonCt => "NonCT",
        })
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ct" | "yes" | "1" | "true" => Ok(Label::Ct),
            "nonct" | "non-ct" | "no" | "0" | "false" => Ok(Label::NonCt),
            other => Err(Error::Parameter(format!("unknown label {other:?}"))),
        }
    }
}

/// A coder's (or model's) yes/no answer to "is this a conspiracy theory?".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(alias = "yes", alias = "YES")]
    Yes,
    #[serde(alias = "no", alias = "NO")]
    No,
}

impl Verdict {
    pub fn label(self) -> Label {
        match self {
            Verdict::Yes => Label::Ct,
            Verdict::No => Label::NonCt,
        }
    }
}

impl From<Label> for Verdict {
    fn from(l: Label) -> Self {
        match l {
            Label::Ct => Verdict::Yes,
            Label::NonCt => Verdict::No,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Yes => "Yes",
            Verdict::No => "No",
        })
    }
}

/// Annotation phase a label or verdict belongs to; `External` marks imported
/// labels that never went through a campaign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseKind {
    Pilot,
    Consolidation,
    Conclusion,
    External,
}

impl FromStr for PhaseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "pilot" => Ok(PhaseKind::Pilot),
            "consolidation" => Ok(PhaseKind::Consolidation),
            "conclusion" => Ok(PhaseKind::Conclusion),
            "external" => Ok(PhaseKind::External),
            other => Err(Error::Parameter(format!("unknown phase kind {other:?}"))),
        }
    }
}
