use serde::{Deserialize, Serialize};

use super::check_finite;
use crate::error::{Error, Result};

/// Right-continuous empirical CDF: `eval(t)` is the share of values `<= t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ecdf {
    /// Distinct sorted support points.
    pub support: Vec<f64>,
    /// F at each support point; the last entry is 1.
    pub cumulative: Vec<f64>,
    pub n: usize,
}

impl Ecdf {
    pub fn new(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Domain("eCDF of an empty sample".into()));
        }
        check_finite("eCDF values", values)?;
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let mut support = Vec::new();
        let mut cumulative = Vec::new();
        for (i, &v) in sorted.iter().enumerate() {
            if i + 1 < n && sorted[i + 1] == v {
                continue;
            }
            support.push(v);
            cumulative.push((i + 1) as f64 / n as f64);
        }
        Ok(Self { support, cumulative, n })
    }

    pub fn eval(&self, t: f64) -> f64 {
        let idx = self.support.partition_point(|&x| x <= t);
        if idx == 0 {
            0.0
        } else {
            self.cumulative[idx - 1]
        }
    }

    pub fn min(&self) -> f64 {
        self.support[0]
    }

    pub fn max(&self) -> f64 {
        self.support[self.support.len() - 1]
    }

    /// (x, F(x)) at every support point.
    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.support.iter().copied().zip(self.cumulative.iter().copied())
    }
}
