//! Multi-phase annotation campaigns, stored as an append-only event log in
//! the dataset store and folded into in-memory state on load.

mod server;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{cohen_kappa, fleiss_kappa, KappaResult};
use crate::store::{LabeledSample, Origin, Store};
use crate::types::{Label, PhaseKind, Verdict};

pub use server::{router, serve, AppState, Principal, Role, TokenEntry, TokenFile};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Group {
    pub name: String,
    pub members: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseSpec {
    pub phase_id: String,
    pub kind: PhaseKind,
    pub round: u32,
    pub post_ids: Vec<String>,
    /// Individual coders; empty in group mode.
    #[serde(default)]
    pub coders: Vec<String>,
    /// In group mode each group submits one verdict per post.
    #[serde(default)]
    pub groups: Vec<Group>,
    pub moderators: Vec<String>,
    /// Close unanimous items without a moderator.
    #[serde(default)]
    pub auto_consensus: bool,
}

impl PhaseSpec {
    /// The identities that submit verdicts: coders, or group names.
    pub fn raters(&self) -> Vec<String> {
        if self.groups.is_empty() {
            self.coders.clone()
        } else {
            self.groups.iter().map(|g| g.name.clone()).collect()
        }
    }

    /// The rater identity `user` submits under.
    pub fn rater_for(&self, user: &str) -> Option<String> {
        if self.groups.is_empty() {
            self.coders.iter().find(|c| *c == user).cloned()
        } else {
            self.groups
                .iter()
                .find(|g| g.members.iter().any(|m| m == user))
                .map(|g| g.name.clone())
        }
    }

    fn validate(&self) -> Result<()> {
        let raters = self.raters();
        if raters.len() < 2 {
            return Err(Error::Parameter(format!(
                "phase {} needs at least two coders or groups",
                self.phase_id
            )));
        }
        if !self.coders.is_empty() && !self.groups.is_empty() {
            return Err(Error::Parameter("a phase has either coders or groups, not both".into()));
        }
        if raters.iter().collect::<BTreeSet<_>>().len() != raters.len() {
            return Err(Error::Parameter("duplicate coder or group names".into()));
        }
        let mut members = BTreeSet::new();
        for m in self.groups.iter().flat_map(|g| &g.members) {
            if !members.insert(m) {
                return Err(Error::Parameter(format!("{m} belongs to more than one group")));
            }
        }
        if self.moderators.is_empty() {
            return Err(Error::Parameter("a phase needs at least one moderator".into()));
        }
        if self.post_ids.is_empty() {
            return Err(Error::Parameter("a phase needs at least one post".into()));
        }
        if self.post_ids.iter().collect::<BTreeSet<_>>().len() != self.post_ids.len() {
            return Err(Error::Parameter("duplicate posts in phase".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    PhaseCreated {
        seq: u64,
        spec: PhaseSpec,
    },
    VerdictSubmitted {
        seq: u64,
        phase_id: String,
        post_id: String,
        /// Rater identity (coder or group).
        rater: String,
        /// Authenticated user who submitted.
        submitted_by: String,
        verdict: Verdict,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        note: Option<String>,
    },
    ConsensusRecorded {
        seq: u64,
        phase_id: String,
        post_id: String,
        label: Label,
        /// Moderator, or "auto" for unanimous items.
        by: String,
        overridden: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemStatus {
    Open,
    InDiscussion,
    Closed,
}

#[derive(Debug, Clone, Default)]
struct Item {
    verdicts: BTreeMap<String, Verdict>,
    consensus: Option<Label>,
}

#[derive(Debug, Clone)]
struct Phase {
    spec: PhaseSpec,
    items: BTreeMap<String, Item>,
}

impl Phase {
    fn status(&self, item: &Item) -> ItemStatus {
        if item.consensus.is_some() {
            ItemStatus::Closed
        } else if item.verdicts.len() < self.spec.raters().len() {
            ItemStatus::Open
        } else {
            ItemStatus::InDiscussion
        }
    }

    fn item(&self, post_id: &str) -> Result<&Item> {
        self.items
            .get(post_id)
            .ok_or_else(|| Error::NotFound(format!("post {post_id} is not part of phase {}", self.spec.phase_id)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSummary {
    pub phase_id: String,
    pub kind: PhaseKind,
    pub round: u32,
    pub raters: Vec<String>,
    pub moderators: Vec<String>,
    pub auto_consensus: bool,
    pub progress: Progress,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub total: usize,
    pub open: usize,
    pub in_discussion: usize,
    pub closed: usize,
    /// Verdicts submitted per rater.
    pub submitted: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchItem {
    pub post_id: String,
    pub text: String,
    pub subreddit: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Disagreement {
    pub post_id: String,
    pub text: String,
    pub verdicts: BTreeMap<String, Verdict>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairAgreement {
    pub a: String,
    pub b: String,
    pub n_items: usize,
    /// `None` when kappa is undefined or there are no shared items.
    pub kappa: Option<f64>,
    pub observed_agreement: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub phase_id: String,
    pub pairwise: Vec<PairAgreement>,
    /// Over items rated by every rater.
    pub fleiss: Option<KappaResult>,
    /// Share of each rater's verdicts on closed items matching consensus.
    pub agreement_with_consensus: BTreeMap<String, f64>,
    pub progress: Progress,
    pub notes: Vec<String>,
}

/// Folded campaign state.
#[derive(Debug, Clone, Default)]
pub struct Campaign {
    phases: BTreeMap<String, Phase>,
    next_seq: u64,
}

impl Campaign {
    pub fn load(store: &Store) -> Result<Self> {
        let mut c = Campaign::default();
        for e in store.annotation_events::<Event>()? {
            c.apply(e)?;
        }
        Ok(c)
    }

    fn apply(&mut self, e: Event) -> Result<()> {
        match e {
            Event::PhaseCreated { seq, spec } => {
                self.next_seq = seq + 1;
                let items = spec.post_ids.iter().map(|p| (p.clone(), Item::default())).collect();
                self.phases.insert(spec.phase_id.clone(), Phase { spec, items });
            }
            Event::VerdictSubmitted {
                seq,
                phase_id,
                post_id,
                rater,
                verdict,
                ..
            } => {
                self.next_seq = seq + 1;
                self.item_mut(&phase_id, &post_id)?.verdicts.insert(rater, verdict);
            }
            Event::ConsensusRecorded {
                seq,
                phase_id,
                post_id,
                label,
                ..
            } => {
                self.next_seq = seq + 1;
                self.item_mut(&phase_id, &post_id)?.consensus = Some(label);
            }
        }
        Ok(())
    }

    fn item_mut(&mut self, phase_id: &str, post_id: &str) -> Result<&mut Item> {
        self.phases
            .get_mut(phase_id)
            .and_then(|p| p.items.get_mut(post_id))
            .ok_or_else(|| Error::Integrity(format!("event refers to unknown item {phase_id}/{post_id}")))
    }

    fn record(&mut self, store: &mut Store, e: Event) -> Result<()> {
        store.append_annotation_events(std::slice::from_ref(&e))?;
        self.apply(e)
    }

    fn phase(&self, phase_id: &str) -> Result<&Phase> {
        self.phases
            .get(phase_id)
            .ok_or_else(|| Error::NotFound(format!("no phase {phase_id}")))
    }

    pub fn phase_spec(&self, phase_id: &str) -> Result<&PhaseSpec> {
        self.phase(phase_id).map(|p| &p.spec)
    }

    /// Posts already assigned to some phase.
    pub fn assigned_posts(&self) -> BTreeSet<String> {
        self.phases.values().flat_map(|p| p.items.keys().cloned()).collect()
    }

    pub fn create_phase(&mut self, store: &mut Store, spec: PhaseSpec) -> Result<()> {
        spec.validate()?;
        if self.phases.contains_key(&spec.phase_id) {
            return Err(Error::Conflict(format!("phase {} already exists", spec.phase_id)));
        }
        for p in &spec.post_ids {
            if store.document(p).is_none() {
                return Err(Error::NotFound(format!("document {p}")));
            }
        }
        let seq = self.next_seq;
        self.record(store, Event::PhaseCreated { seq, spec })
    }

    pub fn phases(&self) -> Vec<PhaseSummary> {
        self.phases
            .values()
            .map(|p| PhaseSummary {
                phase_id: p.spec.phase_id.clone(),
                kind: p.spec.kind,
                round: p.spec.round,
                raters: p.spec.raters(),
                moderators: p.spec.moderators.clone(),
                auto_consensus: p.spec.auto_consensus,
                progress: progress(p),
            })
            .collect()
    }

    pub fn status(&self, phase_id: &str, post_id: &str) -> Result<ItemStatus> {
        let p = self.phase(phase_id)?;
        Ok(p.status(p.item(post_id)?))
    }

    pub fn verdicts(&self, phase_id: &str, post_id: &str) -> Result<BTreeMap<String, Verdict>> {
        Ok(self.phase(phase_id)?.item(post_id)?.verdicts.clone())
    }

    /// Up to `n` posts `user` has not yet rated, in phase order.
    pub fn next_batch(&self, store: &Store, phase_id: &str, user: &str, n: usize) -> Result<Vec<BatchItem>> {
        let p = self.phase(phase_id)?;
        let rater = p
            .spec
            .rater_for(user)
            .ok_or_else(|| Error::Forbidden(format!("{user} is not a coder in phase {phase_id}")))?;
        let mut out = Vec::new();
        for post_id in &p.spec.post_ids {
            if out.len() == n {
                break;
            }
            let item = &p.items[post_id];
            if item.consensus.is_some() || item.verdicts.contains_key(&rater) {
                continue;
            }
            let doc = store
                .document(post_id)
                .ok_or_else(|| Error::Integrity(format!("phase post {post_id} has no document")))?;
            out.push(BatchItem {
                post_id: post_id.clone(),
                text: doc.text.clone(),
                subreddit: doc.subreddit.clone(),
            });
        }
        Ok(out)
    }

    /// Record `user`'s verdict. Resubmission replaces the earlier verdict
    /// (both stay in the log); closed items reject new verdicts.
    pub fn submit_verdict(
        &mut self,
        store: &mut Store,
        phase_id: &str,
        post_id: &str,
        user: &str,
        verdict: Verdict,
        note: Option<String>,
    ) -> Result<ItemStatus> {
        let p = self.phase(phase_id)?;
        let rater = p
            .spec
            .rater_for(user)
            .ok_or_else(|| Error::Forbidden(format!("{user} is not a coder in phase {phase_id}")))?;
        if p.item(post_id)?.consensus.is_some() {
            return Err(Error::State(format!("item {post_id} in {phase_id} is closed")));
        }
        let seq = self.next_seq;
        self.record(
            store,
            Event::VerdictSubmitted {
                seq,
                phase_id: phase_id.into(),
                post_id: post_id.into(),
                rater,
                submitted_by: user.into(),
                verdict,
                note,
            },
        )?;

        let p = self.phase(phase_id)?;
        let item = p.item(post_id)?;
        let unanimous = if p.spec.auto_consensus && p.status(item) == ItemStatus::InDiscussion {
            let distinct: BTreeSet<Verdict> = item.verdicts.values().copied().collect();
            (distinct.len() == 1).then(|| distinct.into_iter().next().expect("one verdict"))
        } else {
            None
        };
        if let Some(v) = unanimous {
            self.close(store, phase_id, post_id, v.label(), "auto", false)?;
        }
        self.status(phase_id, post_id)
    }

    /// Items every rater has answered but that are not unanimous and not yet
    /// resolved.
    pub fn disagreement_queue(&self, store: &Store, phase_id: &str) -> Result<Vec<Disagreement>> {
        let p = self.phase(phase_id)?;
        let mut out = Vec::new();
        for post_id in &p.spec.post_ids {
            let item = &p.items[post_id];
            if p.status(item) != ItemStatus::InDiscussion {
                continue;
            }
            if item.verdicts.values().collect::<BTreeSet<_>>().len() < 2 {
                continue;
            }
            out.push(Disagreement {
                post_id: post_id.clone(),
                text: store.document(post_id).map(|d| d.text.clone()).unwrap_or_default(),
                verdicts: item.verdicts.clone(),
            });
        }
        Ok(out)
    }

    /// Moderator decision. Closed items need `allow_override`; every
    /// decision is propagated to the store's labels.
    pub fn record_consensus(
        &mut self,
        store: &mut Store,
        phase_id: &str,
        post_id: &str,
        label: Label,
        moderator: &str,
        allow_override: bool,
    ) -> Result<()> {
        let p = self.phase(phase_id)?;
        if !p.spec.moderators.iter().any(|m| m == moderator) {
            return Err(Error::Permission(format!(
                "{moderator} is not a moderator of {phase_id}"
            )));
        }
        let item = p.item(post_id)?;
        match p.status(item) {
            ItemStatus::Closed if !allow_override => {
                return Err(Error::Conflict(format!(
                    "item {post_id} already has consensus {}; pass override to replace it",
                    item.consensus.expect("closed item has consensus")
                )))
            }
            ItemStatus::Open if !allow_override => {
                return Err(Error::State(format!("item {post_id} still awaits verdicts")))
            }
            _ => {}
        }
        self.close(store, phase_id, post_id, label, moderator, allow_override)
    }

    fn close(
        &mut self,
        store: &mut Store,
        phase_id: &str,
        post_id: &str,
        label: Label,
        by: &str,
        overridden: bool,
    ) -> Result<()> {
        let kind = self.phase(phase_id)?.spec.kind;
        let replace = overridden || store.label(post_id).is_some();
        let seq = self.next_seq;
        self.record(
            store,
            Event::ConsensusRecorded {
                seq,
                phase_id: phase_id.into(),
                post_id: post_id.into(),
                label,
                by: by.into(),
                overridden,
            },
        )?;
        store.put_labels(
            &[LabeledSample {
                post_id: post_id.into(),
                label,
                origin: Origin::Consensus,
                phase: kind,
            }],
            replace,
        )
    }

    pub fn agreement(&self, phase_id: &str) -> Result<AgreementReport> {
        let p = self.phase(phase_id)?;
        let raters = p.spec.raters();
        let mut notes = Vec::new();
        let mut pairwise = Vec::new();
        for (i, a) in raters.iter().enumerate() {
            for b in &raters[i + 1..] {
                let (va, vb): (Vec<Verdict>, Vec<Verdict>) = p
                    .items
                    .values()
                    .filter_map(|it| Some((*it.verdicts.get(a)?, *it.verdicts.get(b)?)))
                    .unzip();
                let k = if va.is_empty() {
                    None
                } else {
                    defined(cohen_kappa(&va, &vb), &mut notes, a, b)?
                };
                pairwise.push(PairAgreement {
                    a: a.clone(),
                    b: b.clone(),
                    n_items: va.len(),
                    kappa: k.map(|k| k.kappa),
                    observed_agreement: k.map(|k| k.observed_agreement),
                });
            }
        }

        let complete: Vec<&Item> = p
            .items
            .values()
            .filter(|it| it.verdicts.len() == raters.len())
            .collect();
        let fleiss = if complete.is_empty() {
            None
        } else {
            let matrix: Vec<Vec<u32>> = complete
                .iter()
                .map(|it| {
                    let yes = it.verdicts.values().filter(|v| **v == Verdict::Yes).count() as u32;
                    vec![yes, raters.len() as u32 - yes]
                })
                .collect();
            match fleiss_kappa(&matrix, raters.len() as u32) {
                Ok(k) => Some(k),
                Err(Error::Undefined(m)) => {
                    notes.push(format!("Fleiss' kappa undefined: {m}"));
                    None
                }
                Err(e) => return Err(e),
            }
        };

        let mut agreement_with_consensus = BTreeMap::new();
        for r in &raters {
            let (mut hit, mut n) = (0usize, 0usize);
            for it in p.items.values() {
                if let (Some(c), Some(v)) = (it.consensus, it.verdicts.get(r)) {
                    n += 1;
                    hit += usize::from(v.label() == c);
                }
            }
            if n > 0 {
                agreement_with_consensus.insert(r.clone(), hit as f64 / n as f64);
            }
        }
        Ok(AgreementReport {
            phase_id: phase_id.into(),
            pairwise,
            fleiss,
            agreement_with_consensus,
            progress: progress(p),
            notes,
        })
    }
}

fn defined(r: Result<KappaResult>, notes: &mut Vec<String>, a: &str, b: &str) -> Result<Option<KappaResult>> {
    match r {
        Ok(k) => Ok(Some(k)),
        Err(Error::Undefined(m)) => {
            notes.push(format!("kappa({a}, {b}) undefined: {m}"));
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

fn progress(p: &Phase) -> Progress {
    let mut pr = Progress {
        total: p.items.len(),
        ..Default::default()
    };
    for r in p.spec.raters() {
        pr.submitted.insert(r, 0);
    }
    for it in p.items.values() {
        match p.status(it) {
            ItemStatus::Open => pr.open += 1,
            ItemStatus::InDiscussion => pr.in_discussion += 1,
            ItemStatus::Closed => pr.closed += 1,
        }
        for r in it.verdicts.keys() {
            *pr.submitted.entry(r.clone()).or_default() += 1;
        }
    }
    pr
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;
    use crate::store::Mode;

    fn store_with(n: usize) -> (tempfile::TempDir, Store) {
        let dir = tempfile::tempdir().unwrap();
        let mut s = Store::create(dir.path().join("s")).unwrap();
        let docs: Vec<Document> = (0..n)
            .map(|i| Document {
                post_id: format!("p{i}"),
                subreddit: "conspiracy".into(),
                text: format!("post number {i} with enough characters"),
                char_len: 36,
                num_comments: 0,
                karma: 0,
            })
            .collect();
        s.put_documents(&docs).unwrap();
        (dir, s)
    }

    fn spec(n: usize, auto: bool) -> PhaseSpec {
        PhaseSpec {
            phase_id: "pilot-1".into(),
            kind: PhaseKind::Pilot,
            round: 1,
            post_ids: (0..n).map(|i| format!("p{i}")).collect(),
            coders: vec!["ann".into(), "bo".into()],
            groups: vec![],
            moderators: vec!["mod".into()],
            auto_consensus: auto,
        }
    }

    #[test]
    fn lifecycle() {
        let (_d, mut s) = store_with(3);
        let mut c = Campaign::default();
        c.create_phase(&mut s, spec(3, false)).unwrap();
        assert_eq!(c.next_batch(&s, "pilot-1", "ann", 10).unwrap().len(), 3);

        use Verdict::*;
        c.submit_verdict(&mut s, "pilot-1", "p0", "ann", Yes, None).unwrap();
        assert_eq!(c.status("pilot-1", "p0").unwrap(), ItemStatus::Open);
        c.submit_verdict(&mut s, "pilot-1", "p0", "bo", No, None).unwrap();
        assert_eq!(c.status("pilot-1", "p0").unwrap(), ItemStatus::InDiscussion);
        assert_eq!(c.disagreement_queue(&s, "pilot-1").unwrap().len(), 1);

        assert!(matches!(
            c.record_consensus(&mut s, "pilot-1", "p0", Label::Ct, "ann", false),
            Err(Error::Permission(_))
        ));
        c.record_consensus(&mut s, "pilot-1", "p0", Label::Ct, "mod", false)
            .unwrap();
        assert_eq!(s.label("p0"), Some(Label::Ct));
        assert!(matches!(
            c.record_consensus(&mut s, "pilot-1", "p0", Label::NonCt, "mod", false),
            Err(Error::Conflict(_))
        ));
        c.record_consensus(&mut s, "pilot-1", "p0", Label::NonCt, "mod", true)
            .unwrap();
        assert_eq!(s.label("p0"), Some(Label::NonCt));
        assert!(matches!(
            c.submit_verdict(&mut s, "pilot-1", "p0", "ann", No, None),
            Err(Error::State(_))
        ));

        // reload from the log reproduces the state
        let reloaded = Campaign::load(&s).unwrap();
        assert_eq!(reloaded.phases(), c.phases());
        drop(s);
        let s = Store::open(_d.path().join("s"), Mode::ReadOnly).unwrap();
        assert_eq!(Campaign::load(&s).unwrap().phases(), c.phases());
    }

    #[test]
    fn last_write_wins() {
        let (_d, mut s) = store_with(1);
        let mut c = Campaign::default();
        c.create_phase(&mut s, spec(1, false)).unwrap();
        c.submit_verdict(&mut s, "pilot-1", "p0", "ann", Verdict::Yes, None)
            .unwrap();
        c.submit_verdict(&mut s, "pilot-1", "p0", "ann", Verdict::No, None)
            .unwrap();
        assert_eq!(c.verdicts("pilot-1", "p0").unwrap()["ann"], Verdict::No);
        assert_eq!(s.annotation_events::<Event>().unwrap().len(), 3);
    }

    #[test]
    fn auto_consensus_closes_unanimous_items() {
        let (_d, mut s) = store_with(1);
        let mut c = Campaign::default();
        c.create_phase(&mut s, spec(1, true)).unwrap();
        c.submit_verdict(&mut s, "pilot-1", "p0", "ann", Verdict::No, None)
            .unwrap();
        let st = c
            .submit_verdict(&mut s, "pilot-1", "p0", "bo", Verdict::No, None)
            .unwrap();
        assert_eq!(st, ItemStatus::Closed);
        assert_eq!(s.label("p0"), Some(Label::NonCt));
    }

    #[test]
    fn unanimous_items_wait_without_auto_consensus() {
        let (_d, mut s) = store_with(1);
        let mut c = Campaign::default();
        c.create_phase(&mut s, spec(1, false)).unwrap();
        c.submit_verdict(&mut s, "pilot-1", "p0", "ann", Verdict::No, None)
            .unwrap();
        let st = c
            .submit_verdict(&mut s, "pilot-1", "p0", "bo", Verdict::No, None)
            .unwrap();
        assert_eq!(st, ItemStatus::InDiscussion);
        assert!(c.disagreement_queue(&s, "pilot-1").unwrap().is_empty());
        assert_eq!(s.label("p0"), None);
    }

    #[test]
    fn group_mode() {
        let (_d, mut s) = store_with(2);
        let mut c = Campaign::default();
        let mut sp = spec(2, false);
        sp.phase_id = "cons-1".into();
        sp.kind = PhaseKind::Consolidation;
        sp.coders.clear();
        sp.groups = vec![
            Group {
                name: "g1".into(),
                members: vec!["ann".into(), "bo".into()],
            },
            Group {
                name: "g2".into(),
                members: vec!["cy".into()],
            },
        ];
        c.create_phase(&mut s, sp).unwrap();
        c.submit_verdict(&mut s, "cons-1", "p0", "bo", Verdict::Yes, None)
            .unwrap();
        // a group answers once for all members
        assert_eq!(c.next_batch(&s, "cons-1", "ann", 5).unwrap().len(), 1);
        assert!(matches!(
            c.submit_verdict(&mut s, "cons-1", "p0", "zed", Verdict::Yes, None),
            Err(Error::Forbidden(_))
        ));
    }

    #[test]
    fn agreement_report() {
        let (_d, mut s) = store_with(4);
        let mut c = Campaign::default();
        c.create_phase(&mut s, spec(4, false)).unwrap();
        use Verdict::*;
        let a = [Yes, Yes, No, No];
        let b = [Yes, No, No, No];
        for i in 0..4 {
            let p = format!("p{i}");
            c.submit_verdict(&mut s, "pilot-1", &p, "ann", a[i], None).unwrap();
            c.submit_verdict(&mut s, "pilot-1", &p, "bo", b[i], None).unwrap();
        }
        c.record_consensus(&mut s, "pilot-1", "p1", Label::Ct, "mod", false)
            .unwrap();
        let r = c.agreement("pilot-1").unwrap();
        let expected = cohen_kappa(&a, &b).unwrap().kappa;
        assert_eq!(r.pairwise[0].kappa, Some(expected));
        assert_eq!(r.agreement_with_consensus["ann"], 1.0);
        assert_eq!(r.agreement_with_consensus["bo"], 0.0);
        assert_eq!(r.progress.closed, 1);
        assert_eq!(r.progress.in_discussion, 3);
        assert!(r.fleiss.is_some());
    }
}
