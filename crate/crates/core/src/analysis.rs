//! Corpus-level analyses over classified posts: CT prevalence bounds per
//! subreddit and the engagement comparison between CT and non-CT posts.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{mann_whitney_u, Ecdf, UTestResult};
use crate::types::Label;

/// One classified post with the engagement fields needed downstream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifiedPost {
    pub post_id: String,
    pub subreddit: String,
    pub predicted: Label,
    pub score: f64,
    pub num_comments: u64,
    pub karma: u64,
}

/// Bounds on the true CT share given the observed predicted-CT ratio and the
/// classifier's precision and recall: upper = min(1, ratio / recall),
/// lower = ratio * precision.
pub fn prevalence_bounds(ratio: f64, precision: f64, recall: f64) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(Error::Domain(format!("ratio {ratio} outside [0, 1]")));
    }
    if !(0.0..=1.0).contains(&precision) {
        return Err(Error::Domain(format!("precision {precision} outside [0, 1]")));
    }
    if !(recall > 0.0 && recall <= 1.0) {
        return Err(Error::Domain(format!("recall {recall} must lie in (0, 1]")));
    }
    Ok(((ratio / recall).min(1.0), ratio * precision))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrevalenceRow {
    pub subreddit: String,
    pub posts: u64,
    pub predicted_ct: u64,
    pub ratio: f64,
    pub upper: f64,
    pub lower: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrevalenceReport {
    pub precision: f64,
    pub recall: f64,
    /// Sorted by subreddit name.
    pub rows: Vec<PrevalenceRow>,
    pub overall: PrevalenceRow,
}

impl PrevalenceReport {
    pub fn to_markdown(&self) -> String {
        let mut out = String::from("| Subreddit | Posts | CT ratio | Upper | Lower |\n|---|---|---|---|---|\n");
        for r in self.rows.iter().chain(std::iter::once(&self.overall)) {
            let _ = writeln!(
                out,
                "| {} | {} | {:.3} | {:.3} | {:.3} |",
                r.subreddit, r.posts, r.ratio, r.upper, r.lower
            );
        }
        out
    }
}

fn row(subreddit: String, posts: u64, predicted_ct: u64, precision: f64, recall: f64) -> Result<PrevalenceRow> {
    let ratio = predicted_ct as f64 / posts as f64;
    let (upper, lower) = prevalence_bounds(ratio, precision, recall)?;
    Ok(PrevalenceRow {
        subreddit,
        posts,
        predicted_ct,
        ratio,
        upper,
        lower,
    })
}

pub fn prevalence(posts: &[ClassifiedPost], precision: f64, recall: f64) -> Result<PrevalenceReport> {
    if posts.is_empty() {
        return Err(Error::Domain("no classified posts".into()));
    }
    let mut counts: BTreeMap<&str, (u64, u64)> = BTreeMap::new();
    for p in posts {
        let e = counts.entry(&p.subreddit).or_default();
        e.0 += 1;
        e.1 += u64::from(p.predicted.is_positive());
    }
    let rows = counts
        .iter()
        .map(|(s, (n, ct))| row(s.to_string(), *n, *ct, precision, recall))
        .collect::<Result<Vec<_>>>()?;
    let total = posts.len() as u64;
    let ct = counts.values().map(|c| c.1).sum();
    Ok(PrevalenceReport {
        precision,
        recall,
        rows,
        overall: row("Overall".into(), total, ct, precision, recall)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    Comments,
    Karma,
}

impl Measure {
    pub const ALL: [Measure; 2] = [Measure::Comments, Measure::Karma];

    pub fn as_str(self) -> &'static str {
        match self {
            Measure::Comments => "comments",
            Measure::Karma => "karma",
        }
    }

    fn of(self, p: &ClassifiedPost) -> f64 {
        match self {
            Measure::Comments => p.num_comments as f64,
            Measure::Karma => p.karma as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    CtHigher,
    NonCtHigher,
    Equal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureComparison {
    pub measure: Measure,
    /// First sample is the CT group.
    pub test: UTestResult,
    pub direction: Direction,
    pub median_ct: f64,
    pub median_non_ct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngagementReport {
    pub n_ct: usize,
    pub n_non_ct: usize,
    pub comparisons: Vec<MeasureComparison>,
    #[serde(skip)]
    pub ecdfs: Vec<(Label, Measure, Ecdf)>,
}

impl EngagementReport {
    /// Long-format eCDF table with columns group, measure, x, F.
    pub fn ecdf_csv(&self) -> String {
        let mut out = String::from("group,measure,x,F\n");
        for (label, measure, ecdf) in &self.ecdfs {
            for (x, f) in ecdf.points() {
                let _ = writeln!(out, "{label},{},{x},{f}", measure.as_str());
            }
        }
        out
    }
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Compare comment counts and karma of CT against non-CT posts with
/// two-sided Mann-Whitney U tests, plus per-group eCDFs.
pub fn engagement_compare(posts: &[ClassifiedPost]) -> Result<EngagementReport> {
    let (ct, non): (Vec<&ClassifiedPost>, Vec<&ClassifiedPost>) = posts.iter().partition(|p| p.predicted.is_positive());
    if ct.is_empty() || non.is_empty() {
        return Err(Error::Domain(format!(
            "engagement comparison needs both groups, got {} CT and {} non-CT",
            ct.len(),
            non.len()
        )));
    }
    let mut comparisons = Vec::new();
    let mut ecdfs = Vec::new();
    for m in Measure::ALL {
        let x: Vec<f64> = ct.iter().map(|p| m.of(p)).collect();
        let y: Vec<f64> = non.iter().map(|p| m.of(p)).collect();
        let test = mann_whitney_u(&x, &y)?;
        let direction = if test.u_statistic > test.u_other {
            Direction::CtHigher
        } else if test.u_statistic < test.u_other {
            Direction::NonCtHigher
        } else {
            Direction::Equal
        };
        comparisons.push(MeasureComparison {
            measure: m,
            test,
            direction,
            median_ct: median(&x),
            median_non_ct: median(&y),
        });
        ecdfs.push((Label::Ct, m, Ecdf::new(&x)?));
        ecdfs.push((Label::NonCt, m, Ecdf::new(&y)?));
    }
    Ok(EngagementReport {
        n_ct: ct.len(),
        n_non_ct: non.len(),
        comparisons,
        ecdfs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn post(sub: &str, ct: bool, comments: u64) -> ClassifiedPost {
        ClassifiedPost {
            post_id: format!("{sub}{comments}{ct}"),
            subreddit: sub.into(),
            predicted: Label::from_positive(ct),
            score: if ct { 1.0 } else { 0.0 },
            num_comments: comments,
            karma: comments * 2,
        }
    }

    #[test]
    fn bounds() {
        let (u, l) = prevalence_bounds(0.5, 0.7, 0.5).unwrap();
        assert_eq!((u, l), (1.0, 0.35));
        assert!(matches!(prevalence_bounds(0.5, 0.7, 0.0), Err(Error::Domain(_))));
        assert!(prevalence_bounds(1.2, 0.7, 0.5).is_err());
    }

    #[test]
    fn per_subreddit_rows() {
        let posts = vec![
            post("b", true, 1),
            post("b", false, 2),
            post("a", true, 3),
            post("a", true, 4),
        ];
        let r = prevalence(&posts, 0.8, 0.5).unwrap();
        assert_eq!(
            r.rows.iter().map(|r| r.subreddit.as_str()).collect::<Vec<_>>(),
            ["a", "b"]
        );
        assert_eq!(r.rows[0].ratio, 1.0);
        assert_eq!(r.rows[1].upper, 1.0);
        assert_eq!(r.overall.ratio, 0.75);
        assert_eq!(r.overall.lower, 0.75 * 0.8);
        assert!(r.to_markdown().ends_with("| Overall | 4 | 0.750 | 1.000 | 0.600 |\n"));
    }

    #[test]
    fn engagement_direction() {
        let mut posts: Vec<ClassifiedPost> = (0..30).map(|i| post("s", true, 100 + i)).collect();
        posts.extend((0..30).map(|i| post("s", false, i)));
        let r = engagement_compare(&posts).unwrap();
        for c in &r.comparisons {
            assert_eq!(c.direction, Direction::CtHigher);
            assert!(c.test.p_two_sided < 1e-6);
        }
        let csv = r.ecdf_csv();
        assert!(csv.starts_with("group,measure,x,F\nCT,comments,100,"));
        assert_eq!(csv.lines().count(), 1 + 4 * 30);
    }

    #[test]
    fn engagement_needs_both_groups() {
        let posts = vec![post("s", true, 1)];
        assert!(engagement_compare(&posts).is_err());
    }
}
