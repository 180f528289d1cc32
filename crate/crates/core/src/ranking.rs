//! Per-covariate importance scores and per-margin rankings.
//!
//! Two measures: the information-based score beta^2 times the matching
//! diagonal entry of the observed information, and the absolute value of
//! the coefficient.

use crate::error::{Error, Result};
use crate::fit::FittedModel;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    Fim,
    Abs,
}

impl Metric {
    pub fn code(&self) -> &'static str {
        match self {
            Metric::Fim => "FIM",
            Metric::Abs => "Abs",
        }
    }

    pub fn from_code(code: &str) -> Option<Metric> {
        match code {
            "FIM" => Some(Metric::Fim),
            "Abs" => Some(Metric::Abs),
            _ => None,
        }
    }
}

/// Ranking of one margin's covariates: `order[r]` is the covariate index
/// holding rank r, with `scores` aligned to `order` (nonincreasing).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginRanking {
    pub margin: u8,
    pub order: Vec<usize>,
    pub scores: Vec<f64>,
}

impl MarginRanking {
    /// The top-k covariate indices as a sorted set.
    pub fn top_set(&self, k: usize) -> Vec<usize> {
        let mut s: Vec<usize> = self.order[..k.min(self.order.len())].to_vec();
        s.sort_unstable();
        s
    }
}

/// beta_j^2 times the corresponding diagonal information entry, per
/// covariate of one margin.
pub fn fim_measure(fm: &FittedModel, margin: u8) -> Result<Vec<f64>> {
    if !fm.converged() {
        return Err(Error::InvalidData(
            "importance scores require a converged fit".into(),
        ));
    }
    let cols = if margin == 1 { &fm.spec.cols1 } else { &fm.spec.cols2 };
    Ok((0..cols.len())
        .map(|j| {
            let idx = fm.layout.beta_index(margin, j);
            let beta = fm.delta_hat[idx];
            beta * beta * fm.info[(idx, idx)]
        })
        .collect())
}

/// |beta_j| per covariate of one margin.
pub fn abs_measure(fm: &FittedModel, margin: u8) -> Vec<f64> {
    let cols = if margin == 1 { &fm.spec.cols1 } else { &fm.spec.cols2 };
    (0..cols.len())
        .map(|j| fm.delta_hat[fm.layout.beta_index(margin, j)].abs())
        .collect()
}

pub fn measure(fm: &FittedModel, margin: u8, metric: Metric) -> Result<Vec<f64>> {
    match metric {
        Metric::Fim => fim_measure(fm, margin),
        Metric::Abs => Ok(abs_measure(fm, margin)),
    }
}

/// Stable descending sort of scores; ties break by ascending covariate
/// index so rankings are deterministic.
pub fn rank_margin(margin: u8, scores: &[f64]) -> MarginRanking {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    MarginRanking {
        margin,
        order: order.clone(),
        scores: order.iter().map(|&j| scores[j]).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fim_formula_examples() {
        // score = beta^2 * I_jj: 0.5^2 * 4 = 1, and zero beta kills it.
        assert_eq!(0.5f64 * 0.5 * 4.0, 1.0);
        assert_eq!(0.0f64 * 0.0 * 7.3, 0.0);
    }

    #[test]
    fn abs_ranking_example() {
        let scores: Vec<f64> = [-1.5f64, 1.7, 0.1].iter().map(|b| b.abs()).collect();
        let r = rank_margin(1, &scores);
        assert_eq!(r.order, vec![1, 0, 2]);
        assert_eq!(r.scores, vec![1.7, 1.5, 0.1]);
        assert_eq!(r.top_set(2), vec![0, 1]);
    }

    #[test]
    fn rank_sorting_and_ties() {
        let r = rank_margin(1, &[3.0, 1.0, 2.0]);
        assert_eq!(r.order, vec![0, 2, 1]);
        // Equal scores break by ascending index.
        let r = rank_margin(2, &[1.0, 1.0]);
        assert_eq!(r.order, vec![0, 1]);
        // All-tied scores keep index order.
        let r = rank_margin(1, &[0.0, 0.0, 0.0]);
        assert_eq!(r.order, vec![0, 1, 2]);
    }

    #[test]
    fn ranking_idempotent() {
        let r = rank_margin(1, &[0.4, 2.2, 1.1, 0.9]);
        let again = rank_margin(1, &r.scores);
        assert_eq!(again.order, vec![0, 1, 2, 3]);
        assert_eq!(again.scores, r.scores);
    }

    proptest! {
        /// Permuting the score vector permutes the ranking accordingly.
        #[test]
        fn permutation_equivariance(scores in proptest::collection::vec(0.0f64..10.0, 2..8)) {
            let base = rank_margin(1, &scores);
            let mut rev: Vec<f64> = scores.clone();
            rev.reverse();
            let r = rank_margin(1, &rev);
            let n = scores.len();
            // Map ranked indices back through the reversal.
            let mapped: Vec<usize> = r.order.iter().map(|&j| n - 1 - j).collect();
            // With distinct scores the orders must agree exactly.
            let distinct = {
                let mut s = scores.clone();
                s.sort_by(|a, b| a.partial_cmp(b).unwrap());
                s.windows(2).all(|w| w[0] != w[1])
            };
            if distinct {
                prop_assert_eq!(mapped, base.order);
            }
        }
    }
}
