//! Bivariate ranking-based variable selection: bootstrap subsample
//! fitting, set-probability estimation, per-size argmax sets, ratio-based
//! size selection and selection-frequency reporting.
//!
//! Each bootstrap replicate draws r = floor(n/m) disjoint subsamples,
//! fits the joint model with all covariates in both margins and an
//! intercept-only dependence predictor, and ranks the covariates per
//! margin. Top-k set probabilities are the fraction of subsamples whose
//! top-k ranked set equals the candidate set; the selected size minimizes
//! the tau-powered probability ratio across sizes.

use crate::copula::CopulaId;
use crate::data::{draw_subsamples, Dataset};
use crate::error::{Error, Result};
use crate::fit::fit_model_with;
use crate::likelihood::{BaselineConfig, ModelSpec};
use crate::margins::LinkKind;
use crate::optimizer::OptimOptions;
use crate::ranking::{measure, rank_margin, MarginRanking, Metric};
use crate::seeds::child_seed;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrbvsConfig {
    /// Maximum candidate set size (must be at least 1 and below p).
    pub kmax: usize,
    pub copula: CopulaId,
    pub links: (LinkKind, LinkKind),
    /// Subsample size, typically n/2.
    pub m: usize,
    /// Ratio decay exponent in (0, 1].
    pub tau: f64,
    /// Bootstrap replicate count.
    pub b_reps: usize,
    pub metric: Metric,
    pub seed: u64,
    pub baseline: BaselineConfig,
    pub ridge: f64,
}

impl BrbvsConfig {
    pub fn new(kmax: usize, copula: CopulaId, links: (LinkKind, LinkKind), m: usize) -> Self {
        BrbvsConfig {
            kmax,
            copula,
            links,
            m,
            tau: 0.5,
            b_reps: 50,
            metric: Metric::Fim,
            seed: 1,
            baseline: BaselineConfig::default(),
            ridge: 1e-4,
        }
    }

    pub fn validate(&self, d: &Dataset) -> Result<()> {
        if self.kmax == 0 || self.kmax >= d.p {
            return Err(Error::Config(format!(
                "kmax={} must satisfy 1 <= kmax < p={}",
                self.kmax, d.p
            )));
        }
        if self.m == 0 || self.m > d.n {
            return Err(Error::Config(format!(
                "subsample size m={} must satisfy 1 <= m <= n={}",
                self.m, d.n
            )));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::Config(format!("tau={} must lie in (0,1]", self.tau)));
        }
        if self.b_reps == 0 {
            return Err(Error::Config("B must be positive".into()));
        }
        Ok(())
    }
}

/// One candidate covariate set with its estimated probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetProbability {
    pub set: Vec<String>,
    pub indices: Vec<usize>,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginSelection {
    pub margin: u8,
    /// For each k = 1..=kmax, the observed top-k sets with probabilities,
    /// sorted by descending probability then lexicographically.
    pub pi_hat: Vec<Vec<SetProbability>>,
    /// Argmax set per k (lexicographic tie-break).
    pub a_hat: Vec<SetProbability>,
    /// Selected size (may be zero) and the selected set.
    pub selected_size: usize,
    pub selected: Vec<String>,
    pub selected_indices: Vec<usize>,
    /// Relative frequency with which each selected covariate appears in
    /// the top selected_size ranks, over the effective subsamples.
    pub frequencies: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrbvsResult {
    pub config: BrbvsConfig,
    pub margin1: MarginSelection,
    pub margin2: MarginSelection,
    pub subsamples_total: usize,
    pub subsamples_failed: usize,
    /// Set when more than 20% of the subsample fits failed.
    pub high_failure_warning: bool,
}

/// Per-subsample snapshot sufficient to rank under any metric.
struct SubsampleScores {
    margin1: Vec<f64>,
    margin2: Vec<f64>,
}

/// Estimated probability of each observed top-k set over the effective
/// subsample rankings; k = 0 maps the empty set to probability one.
pub fn estimate_pi(rankings: &[MarginRanking], k: usize) -> BTreeMap<Vec<usize>, f64> {
    let mut counts: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
    if k == 0 {
        let mut m = BTreeMap::new();
        m.insert(Vec::new(), 1.0);
        return m;
    }
    for r in rankings {
        *counts.entry(r.top_set(k)).or_insert(0) += 1;
    }
    let total = rankings.len() as f64;
    counts
        .into_iter()
        .map(|(set, c)| (set, c as f64 / total))
        .collect()
}

fn argmax_set(pi: &BTreeMap<Vec<usize>, f64>) -> (Vec<usize>, f64) {
    let mut best: Option<(&Vec<usize>, f64)> = None;
    for (set, &p) in pi {
        match best {
            // BTreeMap iterates keys in ascending (lexicographic) order,
            // so the first maximum already carries the tie-break.
            Some((_, bp)) if p <= bp => {}
            _ => best = Some((set, p)),
        }
    }
    let (set, p) = best.expect("nonempty probability map");
    (set.clone(), p)
}

/// Selected size: the argmin over k of pi(A_{k+1})^tau / pi(A_k), with
/// ties broken toward the smaller size and zero probabilities treated as
/// an infinite ratio from that size on.
pub fn select_size(pi_max_by_k: &[f64], tau: f64) -> usize {
    let kmax = pi_max_by_k.len() - 1;
    let mut best_k = 0;
    let mut best_ratio = f64::INFINITY;
    let mut dead = false;
    for k in 0..kmax {
        let denom = pi_max_by_k[k];
        if denom <= 0.0 {
            dead = true;
        }
        let ratio = if dead {
            f64::INFINITY
        } else {
            pi_max_by_k[k + 1].powf(tau) / denom
        };
        if ratio < best_ratio {
            best_ratio = ratio;
            best_k = k;
        }
    }
    best_k
}

/// Fraction of subsamples in which each covariate of `selected` appears
/// among the top `size` ranked positions.
pub fn selection_frequencies(
    rankings: &[MarginRanking],
    selected: &[usize],
    size: usize,
) -> Vec<(usize, f64)> {
    let total = rankings.len() as f64;
    selected
        .iter()
        .map(|&j| {
            let c = rankings
                .iter()
                .filter(|r| r.order[..size.min(r.order.len())].contains(&j))
                .count();
            (j, c as f64 / total)
        })
        .collect()
}

fn select_margin(
    margin: u8,
    rankings: &[MarginRanking],
    cfg: &BrbvsConfig,
    names: &[String],
) -> MarginSelection {
    let mut pi_hat = Vec::with_capacity(cfg.kmax);
    let mut a_hat = Vec::with_capacity(cfg.kmax);
    let mut pi_max = vec![1.0]; // k = 0: the empty set has probability one
    for k in 1..=cfg.kmax {
        let pi = estimate_pi(rankings, k);
        let (best_set, best_p) = argmax_set(&pi);
        let mut table: Vec<SetProbability> = pi
            .into_iter()
            .map(|(indices, probability)| SetProbability {
                set: indices.iter().map(|&j| names[j].clone()).collect(),
                indices,
                probability,
            })
            .collect();
        table.sort_by(|a, b| {
            b.probability
                .partial_cmp(&a.probability)
                .unwrap()
                .then_with(|| a.indices.cmp(&b.indices))
        });
        pi_hat.push(table);
        pi_max.push(best_p);
        a_hat.push(SetProbability {
            set: best_set.iter().map(|&j| names[j].clone()).collect(),
            indices: best_set,
            probability: best_p,
        });
    }
    let selected_size = select_size(&pi_max, cfg.tau);
    let selected_indices = if selected_size == 0 {
        Vec::new()
    } else {
        a_hat[selected_size - 1].indices.clone()
    };
    let freqs = selection_frequencies(rankings, &selected_indices, selected_size);
    MarginSelection {
        margin,
        pi_hat,
        a_hat,
        selected_size,
        selected: selected_indices.iter().map(|&j| names[j].clone()).collect(),
        selected_indices,
        frequencies: freqs
            .into_iter()
            .map(|(j, f)| (names[j].clone(), f))
            .collect(),
    }
}

/// Runs the full selection under one metric.
pub fn run_brbvs(d: &Dataset, cfg: &BrbvsConfig) -> Result<BrbvsResult> {
    Ok(run_brbvs_multi(d, cfg, &[cfg.metric])?
        .pop()
        .expect("one metric requested"))
}

/// Runs the selection for several metrics while fitting each subsample
/// only once. The fits do not depend on the metric; only the rankings do.
pub fn run_brbvs_multi(
    d: &Dataset,
    cfg: &BrbvsConfig,
    metrics: &[Metric],
) -> Result<Vec<BrbvsResult>> {
    cfg.validate(d)?;
    // Scores are metric-specific, but every metric reuses the same fit;
    // fit once under the first metric's extraction and re-derive.
    // fim and abs both derive from (beta, info diagonal), captured here
    // as the two score vectors per metric in one pass.
    let mut results = Vec::with_capacity(metrics.len());
    let all_scores: Vec<Vec<Option<SubsampleScores>>> = {
        // Single pass over subsamples computing scores for every metric.
        let cols: Vec<usize> = (0..d.p).collect();
        let mut spec = ModelSpec::new(
            cfg.copula,
            cfg.links.0,
            cfg.links.1,
            cols.clone(),
            cols,
            vec![],
        );
        spec.baseline = cfg.baseline;
        spec.ridge = cfg.ridge;
        let opts = OptimOptions::default();
        let per_rep: Vec<Vec<Vec<Option<SubsampleScores>>>> = (0..cfg.b_reps)
            .into_par_iter()
            .map(|b| {
                let mut rng = ChaCha12Rng::seed_from_u64(child_seed(cfg.seed, b as u64));
                let subs = draw_subsamples(d, cfg.m, &mut rng).expect("validated m");
                subs.iter()
                    .map(|idx| {
                        let sub = d.subset(idx);
                        let Ok(fm) = fit_model_with(&spec, &sub, &opts) else {
                            return metrics.iter().map(|_| None).collect();
                        };
                        if !fm.converged() {
                            return metrics.iter().map(|_| None).collect();
                        }
                        metrics
                            .iter()
                            .map(|&metric| {
                                let s1 = measure(&fm, 1, metric).ok()?;
                                let s2 = measure(&fm, 2, metric).ok()?;
                                Some(SubsampleScores {
                                    margin1: s1,
                                    margin2: s2,
                                })
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        // Transpose to per-metric lists in deterministic (b, q) order.
        let flat: Vec<Vec<Option<SubsampleScores>>> = per_rep.into_iter().flatten().collect();
        (0..metrics.len())
            .map(|mi| {
                flat.iter()
                    .map(|per_metric| {
                        per_metric[mi].as_ref().map(|s| SubsampleScores {
                            margin1: s.margin1.clone(),
                            margin2: s.margin2.clone(),
                        })
                    })
                    .collect()
            })
            .collect()
    };

    for (mi, &metric) in metrics.iter().enumerate() {
        let scores = &all_scores[mi];
        let total = scores.len();
        let effective: Vec<&SubsampleScores> = scores.iter().flatten().collect();
        let failed = total - effective.len();
        if effective.is_empty() {
            return Err(Error::AllFitsFailed(format!(
                "all {total} subsample fits failed"
            )));
        }
        let rank1: Vec<MarginRanking> = effective
            .iter()
            .map(|s| rank_margin(1, &s.margin1))
            .collect();
        let rank2: Vec<MarginRanking> = effective
            .iter()
            .map(|s| rank_margin(2, &s.margin2))
            .collect();
        let mut cfg_m = cfg.clone();
        cfg_m.metric = metric;
        results.push(BrbvsResult {
            margin1: select_margin(1, &rank1, &cfg_m, &d.names),
            margin2: select_margin(2, &rank2, &cfg_m, &d.names),
            subsamples_total: total,
            subsamples_failed: failed,
            high_failure_warning: (failed as f64) > 0.2 * total as f64,
            config: cfg_m,
        });
    }
    Ok(results)
}
