use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::Verdict;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaResult {
    pub kappa: f64,
    pub observed_agreement: f64,
    pub expected_agreement: f64,
    pub n_items: usize,
}

fn finish(po: f64, pe: f64, n_items: usize) -> Result<KappaResult> {
    let kappa = if pe < 1.0 {
        (po - pe) / (1.0 - pe)
    } else if po >= 1.0 {
        1.0
    } else {
        return Err(Error::Undefined(
            "expected agreement is 1 but observed agreement is not".into(),
        ));
    };
    Ok(KappaResult {
        kappa,
        observed_agreement: po,
        expected_agreement: pe,
        n_items,
    })
}

/// Cohen's kappa for two raters over the same items, from the 2x2 table.
pub fn cohen_kappa(a: &[Verdict], b: &[Verdict]) -> Result<KappaResult> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!(
            "rater vectors have lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::Dimension("no items to compare".into()));
    }
    // [a][b] with index 0 = Yes, 1 = No
    let mut table = [[0u64; 2]; 2];
    let idx = |v: Verdict| match v {
        Verdict::Yes => 0,
        Verdict::No => 1,
    };
    for (&x, &y) in a.iter().zip(b) {
        table[idx(x)][idx(y)] += 1;
    }
    let n = a.len() as f64;
    let po = (table[0][0] + table[1][1]) as f64 / n;
    let a_yes = (table[0][0] + table[0][1]) as f64 / n;
    let b_yes = (table[0][0] + table[1][0]) as f64 / n;
    let pe = a_yes * b_yes + (1.0 - a_yes) * (1.0 - b_yes);
    finish(po, pe, a.len())
}

/// Fleiss' kappa over an items x categories count matrix where every row
/// sums to `raters`.
pub fn fleiss_kappa(matrix: &[Vec<u32>], raters: u32) -> Result<KappaResult> {
    if matrix.is_empty() {
        return Err(Error::Dimension("no items".into()));
    }
    if raters < 2 {
        return Err(Error::Dimension("Fleiss' kappa needs at least two raters".into()));
    }
    let categories = matrix[0].len();
    let mut column_totals = vec![0u64; categories];
    let mut agreement_sum = 0.0;
    let n = raters as f64;
    for (i, row) in matrix.iter().enumerate() {
        if row.len() != categories {
            return Err(Error::Dimension(format!(
                "row {i} has {} categories, expected {categories}",
                row.len()
            )));
        }
        let sum: u64 = row.iter().map(|&c| c as u64).sum();
        if sum != raters as u64 {
            return Err(Error::Dimension(format!(
                "row {i} sums to {sum}, expected {raters} raters"
            )));
        }
        let sq: f64 = row.iter().map(|&c| (c as f64) * (c as f64)).sum();
        agreement_sum += (sq - n) / (n * (n - 1.0));
        for (total, &c) in column_totals.iter_mut().zip(row) {
            *total += c as u64;
        }
    }
    let items = matrix.len() as f64;
    let po = agreement_sum / items;
    let pe: f64 = column_totals
        .iter()
        .map(|&t| {
            let p = t as f64 / (items * n);
            p * p
        })
        .sum();
    if pe >= 1.0 {
        return Err(Error::Undefined(
            "only one category was ever used, chance agreement is 1".into(),
        ));
    }
    finish(po, pe, matrix.len())
}
