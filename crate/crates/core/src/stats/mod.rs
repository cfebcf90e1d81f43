//! Pure statistical routines: agreement coefficients, rank AUC, the
//! Mann-Whitney U test and empirical CDFs. Everything here is reentrant.

mod auc;
mod ecdf;
mod kappa;
mod utest;

pub use auc::rank_auc;
pub use ecdf::Ecdf;
pub use kappa::{cohen_kappa, fleiss_kappa, KappaResult};
pub use utest::{
    mann_whitney_u, mann_whitney_u_with, normal_approx_p, UMethod, UTestOptions, UTestResult, DEFAULT_EXACT_CAP,
};

/// Midranks (1-based, ties share their average rank) of `values`, returned in
/// input order.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // positions i..=j share rank (i+1 + j+1)/2
        let rank = (i + j + 2) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Sizes of every tie group in `values`.
pub(crate) fn tie_groups(values: &[f64]) -> Vec<usize> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut groups = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        groups.push(j - i + 1);
        i = j + 1;
    }
    groups
}

pub(crate) fn check_finite(name: &str, values: &[f64]) -> crate::Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(crate::Error::Domain(format!("{name} contains non-finite values")));
    }
    Ok(())
}
