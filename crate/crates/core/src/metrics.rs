//! Support recovery rate, NMSE and support thresholding.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{JuiceError, Result};
use crate::linalg::{self, CMat};

/// Which set difference sits in the SRR denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SrrConvention {
    /// `|S ∩ Ŝ| / (|S \ Ŝ| + K)`, penalizing misses.
    #[default]
    Missed,
    /// `|S ∩ Ŝ| / (|Ŝ \ S| + K)`, penalizing false alarms.
    FalseAlarm,
}

pub fn srr(truth: &[usize], estimate: &[usize], convention: SrrConvention) -> Result<f64> {
    let s: BTreeSet<usize> = truth.iter().copied().collect();
    let s_hat: BTreeSet<usize> = estimate.iter().copied().collect();
    let k = s.len();
    if k == 0 {
        return Err(JuiceError::UndefinedMetric("SRR needs at least one active UE".into()));
    }
    let hits = s.intersection(&s_hat).count();
    let extra = match convention {
        SrrConvention::Missed => s.difference(&s_hat).count(),
        SrrConvention::FalseAlarm => s_hat.difference(&s).count(),
    };
    Ok(hits as f64 / (extra + k) as f64)
}

/// `(‖X − X̂‖², ‖X‖²)` for one trial.
pub fn nmse_terms(x_true: &CMat, x_hat: &CMat) -> Result<(f64, f64)> {
    if x_true.shape() != x_hat.shape() {
        return Err(JuiceError::dim(
            "nmse: channel matrix shape",
            format!("{:?}", x_true.shape()),
            format!("{:?}", x_hat.shape()),
        ));
    }
    Ok((linalg::fro_sq(&(x_true - x_hat)), linalg::fro_sq(x_true)))
}

/// Running NMSE: ratio of summed errors to summed energies, plus the mean of
/// per-trial ratios for comparison.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NmseAccumulator {
    pub num: f64,
    pub den: f64,
    ratio_sum: f64,
    ratio_count: usize,
    pub trials: usize,
}

impl NmseAccumulator {
    pub fn push(&mut self, num: f64, den: f64) {
        self.num += num;
        self.den += den;
        self.trials += 1;
        if den > 0.0 {
            self.ratio_sum += num / den;
            self.ratio_count += 1;
        }
    }

    pub fn merge(&mut self, other: &NmseAccumulator) {
        self.num += other.num;
        self.den += other.den;
        self.ratio_sum += other.ratio_sum;
        self.ratio_count += other.ratio_count;
        self.trials += other.trials;
    }

    pub fn nmse(&self) -> Result<f64> {
        if self.den > 0.0 {
            Ok(self.num / self.den)
        } else {
            Err(JuiceError::UndefinedMetric("NMSE with zero total channel energy".into()))
        }
    }

    pub fn mean_of_ratios(&self) -> Result<f64> {
        if self.ratio_count > 0 {
            Ok(self.ratio_sum / self.ratio_count as f64)
        } else {
            Err(JuiceError::UndefinedMetric("no trial with nonzero channel energy".into()))
        }
    }
}

pub fn to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Columns whose norm reaches `theta_rel` times the largest column norm.
pub fn detect_support(x_hat: &CMat, theta_rel: f64) -> Vec<usize> {
    let norms = linalg::col_norms(x_hat);
    let max = norms.iter().cloned().fold(0.0, f64::max);
    if max <= 0.0 {
        return Vec::new();
    }
    norms
        .iter()
        .enumerate()
        .filter(|&(_, &v)| v > 0.0 && v >= theta_rel * max)
        .map(|(i, _)| i)
        .collect()
}
