//! Seeded annotation sampling and stratified k-fold assignment.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::types::Label;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub post_id: String,
    pub fold: usize,
}

/// Draw `n` distinct ids uniformly without replacement.
///
/// The candidates are sorted first so the result depends only on the set of
/// eligible ids and the seed, never on storage order.
pub fn sample_ids(eligible: &[String], n: usize, seed: u64) -> Result<Vec<String>> {
    if n > eligible.len() {
        return Err(Error::Size(format!(
            "requested {n} samples but only {} eligible documents (short by {})",
            eligible.len(),
            n - eligible.len()
        )));
    }
    let mut ids = eligible.to_vec();
    ids.sort();
    ids.dedup();
    if ids.len() != eligible.len() {
        return Err(Error::Integrity("duplicate ids among eligible documents".into()));
    }
    rng::shuffle(&mut ids, &mut rng::seeded(seed));
    ids.truncate(n);
    Ok(ids)
}

/// Shuffled, stratified k-fold partition.
///
/// Within each class the ids are sorted, shuffled with the seed and dealt
/// round-robin over the folds; each class continues dealing where the
/// previous one stopped, so fold sizes also differ by at most one.
pub fn make_stratified_folds(labels: &[(String, Label)], k: usize, seed: u64) -> Result<Vec<SplitAssignment>> {
    if k < 2 {
        return Err(Error::Parameter(format!("k must be at least 2, got {k}")));
    }
    let mut by_class: BTreeMap<Label, Vec<&str>> = BTreeMap::new();
    for (id, label) in labels {
        by_class.entry(*label).or_default().push(id);
    }
    for (label, ids) in &by_class {
        if ids.len() < k {
            return Err(Error::Stratification(format!(
                "class {label} has {} members, fewer than k = {k}",
                ids.len()
            )));
        }
    }
    if by_class.len() < 2 {
        return Err(Error::Stratification("labels contain a single class".into()));
    }

    let mut rng = rng::seeded(seed);
    let mut offset = 0usize;
    let mut assignment: BTreeMap<&str, usize> = BTreeMap::new();
    for ids in by_class.values_mut() {
        ids.sort_unstable();
        rng::shuffle(ids, &mut rng);
        for (j, id) in ids.iter().enumerate() {
            if assignment.insert(id, (offset + j) % k).is_some() {
                return Err(Error::Integrity(format!("post {id} labeled more than once")));
            }
        }
        offset = (offset + ids.len()) % k;
    }

    Ok(labels
        .iter()
        .map(|(id, _)| SplitAssignment {
            post_id: id.clone(),
            fold: assignment[id.as_str()],
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(pos: usize, neg: usize) -> Vec<(String, Label)> {
        (0..pos)
            .map(|i| (format!("p{i:04}"), Label::Ct))
            .chain((0..neg).map(|i| (format!("n{i:04}"), Label::NonCt)))
            .collect()
    }

    #[test]
    fn table_two_counts() {
        let l = labels(248, 502);
        let folds = make_stratified_folds(&l, 5, 42).unwrap();
        let mut sizes = [0usize; 5];
        let mut pos = [0usize; 5];
        for (a, (_, label)) in folds.iter().zip(&l) {
            sizes[a.fold] += 1;
            if label.is_positive() {
                pos[a.fold] += 1;
            }
        }
        assert_eq!(sizes, [150; 5]);
        assert!(pos.iter().all(|&p| p == 49 || p == 50));
        assert_eq!(pos.iter().sum::<usize>(), 248);
    }

    #[test]
    fn two_folds_of_four() {
        let l = labels(2, 2);
        let folds = make_stratified_folds(&l, 2, 0).unwrap();
        for f in 0..2 {
            let members: Vec<_> = folds.iter().zip(&l).filter(|(a, _)| a.fold == f).collect();
            assert_eq!(members.len(), 2);
            assert_eq!(members.iter().filter(|(_, (_, lab))| lab.is_positive()).count(), 1);
        }
    }

    #[test]
    fn too_few_members() {
        let l = labels(3, 10);
        assert!(matches!(make_stratified_folds(&l, 5, 0), Err(Error::Stratification(_))));
    }

    #[test]
    fn insertion_order_does_not_matter() {
        let l = labels(20, 31);
        let mut rev = l.clone();
        rev.reverse();
        let a = make_stratified_folds(&l, 4, 9).unwrap();
        let b = make_stratified_folds(&rev, 4, 9).unwrap();
        let as_map = |v: Vec<SplitAssignment>| v.into_iter().map(|s| (s.post_id, s.fold)).collect::<BTreeMap<_, _>>();
        assert_eq!(as_map(a), as_map(b));
    }

    #[test]
    fn sampling() {
        let ids: Vec<String> = (0..30).map(|i| format!("id{i}")).collect();
        assert!(sample_ids(&ids, 0, 1).unwrap().is_empty());
        assert_eq!(sample_ids(&ids, 10, 5).unwrap(), sample_ids(&ids, 10, 5).unwrap());
        let mut all = sample_ids(&ids, 30, 3).unwrap();
        all.sort();
        let mut expected = ids.clone();
        expected.sort();
        assert_eq!(all, expected);
        assert!(matches!(sample_ids(&ids, 31, 1), Err(Error::Size(_))));
    }
}
