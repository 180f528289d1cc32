//! Censoring-aware joint log-likelihood of the bivariate copula survival
//! model, its gradient and the observed information.
//!
//! Per-unit contributions are assembled from the joint survival
//! S(t1,t2|x) = C(S1, S2; theta_i) by censoring case: densities for
//! uncensored margins, h-functions for one-sided censoring, copula values
//! for doubly right-censored units and rectangle masses for intervals.
//! theta_i is the per-unit value m(x3'beta3).
//!
//! Gradients chain analytically through the linear and spline structure;
//! the handful of copula-level partials per unit are taken by fourth-order
//! central differences in the unconstrained predictor scale, which keeps
//! every finite-difference evaluation inside the parameter domain.

use crate::copula::{self, CopulaId};
use crate::data::{CensorCode, Dataset};
use crate::error::{Error, Result};
use crate::margins::{dlog_neg_gprime, link_inverse, link_inverse_deriv, LinkKind, TIME_FLOOR};
use crate::spline::{monotone_coefficients, SplineBasis};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::ops::Range;

/// Survival values are clamped this far inside (0,1) before copula calls;
/// censoring bounds can otherwise push them onto the boundary.
pub const SURVIVAL_CLAMP: f64 = 1e-10;
/// Probability masses are floored here before taking logs.
const MASS_FLOOR: f64 = 1e-300;
/// Rectangle masses below this are treated as a copula defect.
const NEGATIVE_MASS_TOL: f64 = -1e-12;
/// Step scale for the copula-level predictor derivatives. Small enough
/// that the fourth-order truncation stays below the Hessian symmetry
/// tolerance, large enough to keep roundoff out of the gradient.
const ETA_FD_STEP: f64 = 3e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    /// Interior knot count of the monotone baseline spline (log-time,
    /// knots at observed-time quantiles).
    pub interior_knots: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig { interior_knots: 8 }
    }
}

/// Model layout: copula family, per-margin link and covariate subsets, and
/// the eta3 covariate subset (always with an intercept).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub copula: CopulaId,
    pub link1: LinkKind,
    pub link2: LinkKind,
    pub cols1: Vec<usize>,
    pub cols2: Vec<usize>,
    pub cols3: Vec<usize>,
    pub baseline: BaselineConfig,
    /// Fixed ridge penalty applied to the baseline raw coefficients.
    pub ridge: f64,
}

impl ModelSpec {
    pub fn new(
        copula: CopulaId,
        link1: LinkKind,
        link2: LinkKind,
        cols1: Vec<usize>,
        cols2: Vec<usize>,
        cols3: Vec<usize>,
    ) -> ModelSpec {
        ModelSpec {
            copula,
            link1,
            link2,
            cols1,
            cols2,
            cols3,
            baseline: BaselineConfig::default(),
            ridge: 1e-4,
        }
    }

    pub fn validate(&self, d: &Dataset) -> Result<()> {
        for &c in self.cols1.iter().chain(&self.cols2).chain(&self.cols3) {
            if c >= d.p {
                return Err(Error::Config(format!(
                    "covariate index {c} out of range for p={}",
                    d.p
                )));
            }
        }
        Ok(())
    }
}

/// Index map for the concatenated parameter vector
/// delta = (baseline1 raw, beta1, baseline2 raw, beta2, beta3).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamLayout {
    pub base1: Range<usize>,
    pub beta1: Range<usize>,
    pub base2: Range<usize>,
    pub beta2: Range<usize>,
    /// Intercept first, then one entry per eta3 covariate.
    pub eta3: Range<usize>,
    pub total: usize,
}

impl ParamLayout {
    fn build(k1: usize, p1: usize, k2: usize, p2: usize, p3: usize) -> ParamLayout {
        let base1 = 0..k1;
        let beta1 = k1..k1 + p1;
        let base2 = beta1.end..beta1.end + k2;
        let beta2 = base2.end..base2.end + p2;
        let eta3 = beta2.end..beta2.end + 1 + p3;
        let total = eta3.end;
        ParamLayout {
            base1,
            beta1,
            base2,
            beta2,
            eta3,
            total,
        }
    }

    /// delta index of the beta coefficient for `cols[j]` of a margin.
    pub fn beta_index(&self, margin: u8, j: usize) -> usize {
        match margin {
            1 => self.beta1.start + j,
            2 => self.beta2.start + j,
            _ => panic!("margin must be 1 or 2"),
        }
    }
}

/// Precomputed basis rows for one time point.
#[derive(Debug, Clone)]
struct PointPre {
    row: Vec<f64>,
    drow: Vec<f64>,
    suffix: Vec<f64>,
    dsuffix: Vec<f64>,
    ln_t: f64,
}

fn point_pre(basis: &SplineBasis, t: f64) -> PointPre {
    let x = t.max(TIME_FLOOR).ln();
    let (row, drow) = basis.row(x);
    let k = row.len();
    let mut suffix = vec![0.0; k];
    let mut dsuffix = vec![0.0; k];
    let mut s = 0.0;
    let mut ds = 0.0;
    for j in (0..k).rev() {
        s += row[j];
        ds += drow[j];
        suffix[j] = s;
        dsuffix[j] = ds;
    }
    PointPre {
        row,
        drow,
        suffix,
        dsuffix,
        ln_t: x,
    }
}

/// Prepared per-margin structures shared by the joint and univariate
/// likelihoods.
#[derive(Debug, Clone)]
pub(crate) struct MarginPre {
    pub link: LinkKind,
    pub basis: SplineBasis,
    pub k: usize,
    pub cols: Vec<usize>,
    lower: Vec<PointPre>,
    upper: Vec<Option<PointPre>>,
    codes: Vec<CensorCode>,
    /// Gathered covariates, row-major n x cols.len().
    x: Vec<f64>,
}

pub(crate) fn prepare_margin(
    d: &Dataset,
    margin: u8,
    cols: &[usize],
    cfg: &BaselineConfig,
) -> Result<MarginPre> {
    let (lower_t, upper_t, codes, link) = match margin {
        1 => (&d.t1_lower, &d.t1_upper, d.cens1.clone(), LinkKind::Ph),
        _ => (&d.t2_lower, &d.t2_upper, d.cens2.clone(), LinkKind::Ph),
    };
    let mut log_times: Vec<f64> = lower_t.iter().map(|t| t.max(TIME_FLOOR).ln()).collect();
    log_times.extend(upper_t.iter().flatten().map(|t| t.max(TIME_FLOOR).ln()));
    let basis = SplineBasis::from_sample(&log_times, cfg.interior_knots)?;
    let k = basis.n_basis;
    let lower: Vec<PointPre> = lower_t.iter().map(|&t| point_pre(&basis, t)).collect();
    let upper: Vec<Option<PointPre>> = upper_t
        .iter()
        .map(|t| t.map(|t| point_pre(&basis, t)))
        .collect();
    let mut x = Vec::with_capacity(d.n * cols.len());
    for i in 0..d.n {
        for &c in cols {
            x.push(d.xij(i, c));
        }
    }
    Ok(MarginPre {
        link, // placeholder; caller overwrites
        basis,
        k,
        cols: cols.to_vec(),
        lower,
        upper,
        codes,
        x,
    })
}

impl MarginPre {
    #[inline]
    fn xrow(&self, i: usize) -> &[f64] {
        let p = self.cols.len();
        &self.x[i * p..(i + 1) * p]
    }

    #[inline]
    fn eta_at(&self, pt: &PointPre, gammas: &[f64], beta: &[f64], i: usize) -> f64 {
        let mut eta = 0.0;
        for (b, g) in pt.row.iter().zip(gammas) {
            eta += b * g;
        }
        for (x, b) in self.xrow(i).iter().zip(beta) {
            eta += x * b;
        }
        eta
    }

    // Univariate-layout helpers (baseline block at 0..k, betas after).

    pub(crate) fn code(&self, i: usize) -> CensorCode {
        self.codes[i]
    }

    pub(crate) fn eta_lower(&self, i: usize, gammas: &[f64], beta: &[f64]) -> f64 {
        self.eta_at(&self.lower[i], gammas, beta, i)
    }

    pub(crate) fn eta_upper(&self, i: usize, gammas: &[f64], beta: &[f64]) -> Option<f64> {
        self.upper[i].as_ref().map(|pt| self.eta_at(pt, gammas, beta, i))
    }

    pub(crate) fn slope_lower(&self, i: usize, gammas: &[f64]) -> f64 {
        self.lower[i]
            .drow
            .iter()
            .zip(gammas)
            .map(|(b, g)| b * g)
            .sum()
    }

    pub(crate) fn ln_t_lower(&self, i: usize) -> f64 {
        self.lower[i].ln_t
    }

    fn chain_point(&self, pt: &PointPre, i: usize, d: f64, exp_raw: &[f64], out: &mut [f64], k: usize) {
        out[0] += d;
        for j in 1..k {
            out[j] += d * exp_raw[j] * pt.suffix[j];
        }
        for (j, x) in self.xrow(i).iter().enumerate() {
            out[k + j] += d * x;
        }
    }

    pub(crate) fn chain_lower(&self, i: usize, d: f64, exp_raw: &[f64], out: &mut [f64], k: usize) {
        self.chain_point(&self.lower[i], i, d, exp_raw, out, k);
    }

    pub(crate) fn chain_upper(&self, i: usize, d: f64, exp_raw: &[f64], out: &mut [f64], k: usize) {
        let pt = self.upper[i].as_ref().expect("upper point exists");
        self.chain_point(pt, i, d, exp_raw, out, k);
    }

    pub(crate) fn chain_slope_lower(
        &self,
        i: usize,
        gammas: &[f64],
        exp_raw: &[f64],
        out: &mut [f64],
    ) {
        let pt = &self.lower[i];
        let slope = self.slope_lower(i, gammas);
        if slope <= 1e-300 {
            return;
        }
        for j in 1..self.k {
            out[j] += exp_raw[j] * pt.dsuffix[j] / slope;
        }
    }
}

/// Scratch values per parameter block, recomputed once per evaluation.
struct EvalCtx {
    g1: Vec<f64>,
    g2: Vec<f64>,
    exp_raw1: Vec<f64>,
    exp_raw2: Vec<f64>,
    delta: Vec<f64>,
}

/// Prepared joint model over one dataset.
pub struct ModelWorkspace<'a> {
    pub spec: ModelSpec,
    pub layout: ParamLayout,
    pub d: &'a Dataset,
    pub(crate) m1: MarginPre,
    pub(crate) m2: MarginPre,
    /// Gathered eta3 covariates, row-major n x cols3.len().
    x3: Vec<f64>,
}

impl<'a> ModelWorkspace<'a> {
    pub fn new(spec: ModelSpec, d: &'a Dataset) -> Result<ModelWorkspace<'a>> {
        spec.validate(d)?;
        if d.n == 0 {
            return Err(Error::InvalidData("empty dataset".into()));
        }
        let mut m1 = prepare_margin(d, 1, &spec.cols1, &spec.baseline)?;
        m1.link = spec.link1;
        let mut m2 = prepare_margin(d, 2, &spec.cols2, &spec.baseline)?;
        m2.link = spec.link2;
        let mut x3 = Vec::with_capacity(d.n * spec.cols3.len());
        for i in 0..d.n {
            for &c in &spec.cols3 {
                x3.push(d.xij(i, c));
            }
        }
        let layout = ParamLayout::build(
            m1.k,
            spec.cols1.len(),
            m2.k,
            spec.cols2.len(),
            spec.cols3.len(),
        );
        Ok(ModelWorkspace {
            spec,
            layout,
            d,
            m1,
            m2,
            x3,
        })
    }

    pub fn n_params(&self) -> usize {
        self.layout.total
    }

    fn ctx(&self, delta: &[f64]) -> EvalCtx {
        let raw1 = &delta[self.layout.base1.clone()];
        let raw2 = &delta[self.layout.base2.clone()];
        EvalCtx {
            g1: monotone_coefficients(raw1),
            g2: monotone_coefficients(raw2),
            exp_raw1: raw1.iter().map(|r| r.exp()).collect(),
            exp_raw2: raw2.iter().map(|r| r.exp()).collect(),
            delta: delta.to_vec(),
        }
    }

    #[inline]
    fn eta3_at(&self, delta: &[f64], i: usize) -> f64 {
        let p3 = self.spec.cols3.len();
        let mut eta = delta[self.layout.eta3.start];
        for (x, b) in self.x3[i * p3..(i + 1) * p3]
            .iter()
            .zip(&delta[self.layout.eta3.start + 1..self.layout.eta3.end])
        {
            eta += x * b;
        }
        eta
    }

    /// Joint log-likelihood; numeric defects are reported with the unit
    /// index and censoring case.
    pub fn loglik(&self, delta: &[f64]) -> Result<f64> {
        assert_eq!(delta.len(), self.layout.total);
        let ctx = self.ctx(delta);
        sum_pairwise(0, self.d.n, &mut |i| self.unit_loglik(&ctx, i))
    }

    /// Log-likelihood as a plain value; -inf marks invalid parameters.
    pub fn loglik_value(&self, delta: &[f64]) -> f64 {
        self.loglik(delta).unwrap_or(f64::NEG_INFINITY)
    }

    fn unit_loglik(&self, ctx: &EvalCtx, i: usize) -> Result<f64> {
        let delta = &ctx.delta;
        let beta1 = &delta[self.layout.beta1.clone()];
        let beta2 = &delta[self.layout.beta2.clone()];

        let eta1l = self.m1.eta_at(&self.m1.lower[i], &ctx.g1, beta1, i);
        let eta2l = self.m2.eta_at(&self.m2.lower[i], &ctx.g2, beta2, i);
        let eta1u = self.m1.upper[i]
            .as_ref()
            .map(|pt| self.m1.eta_at(pt, &ctx.g1, beta1, i));
        let eta2u = self.m2.upper[i]
            .as_ref()
            .map(|pt| self.m2.eta_at(pt, &ctx.g2, beta2, i));
        let eta3 = self.eta3_at(delta, i);

        let mut total = self.log_psi(i, eta1l, eta1u, eta2l, eta2u, eta3)?;

        if self.m1.codes[i] == CensorCode::Uncensored {
            total += self.log_density_term(&self.m1, &ctx.g1, i, eta1l);
        }
        if self.m2.codes[i] == CensorCode::Uncensored {
            total += self.log_density_term(&self.m2, &ctx.g2, i, eta2l);
        }
        if !total.is_finite() && !total.is_infinite() {
            return Err(Error::Numeric(format!(
                "non-finite contribution at unit {} (case {})",
                i + 1,
                self.d.combined_code(i)
            )));
        }
        Ok(total)
    }

    /// log f at the lower point: log(-G'(eta)) + log(d eta/d x) - log t.
    fn log_density_term(&self, m: &MarginPre, gammas: &[f64], i: usize, eta: f64) -> f64 {
        let pt = &m.lower[i];
        let mut slope = 0.0;
        for (b, g) in pt.drow.iter().zip(gammas) {
            slope += b * g;
        }
        let neg_gp = (-link_inverse_deriv(m.link, eta)).max(MASS_FLOOR);
        neg_gp.ln() + slope.max(MASS_FLOOR).ln() - pt.ln_t
    }

    /// Copula-coupled part of the unit contribution, as a function of the
    /// additive predictors.
    fn log_psi(
        &self,
        i: usize,
        eta1l: f64,
        eta1u: Option<f64>,
        eta2l: f64,
        eta2u: Option<f64>,
        eta3: f64,
    ) -> Result<f64> {
        let cop = self.spec.copula;
        let to_u = |l: LinkKind, eta: f64| {
            link_inverse(l, eta).clamp(SURVIVAL_CLAMP, 1.0 - SURVIVAL_CLAMP)
        };
        let u1l = to_u(self.spec.link1, eta1l);
        let u2l = to_u(self.spec.link2, eta2l);
        let u1u = eta1u.map(|e| to_u(self.spec.link1, e));
        let u2u = eta2u.map(|e| to_u(self.spec.link2, e));
        let theta = cop.theta_from_eta(eta3);

        use CensorCode::*;
        let mass = match (self.m1.codes[i], self.m2.codes[i]) {
            (Uncensored, Uncensored) => copula::density_raw(cop, u1l, u2l, theta),
            (Uncensored, Right) => copula::h1_raw(cop, u1l, u2l, theta),
            (Right, Uncensored) => copula::h2_raw(cop, u1l, u2l, theta),
            (Right, Right) => copula::cdf_raw(cop, u1l, u2l, theta),
            (Interval, Interval) => {
                let (a, b) = (u1u.unwrap(), u2u.unwrap());
                copula::cdf_raw(cop, u1l, u2l, theta) - copula::cdf_raw(cop, a, u2l, theta)
                    - copula::cdf_raw(cop, u1l, b, theta)
                    + copula::cdf_raw(cop, a, b, theta)
            }
            (Interval, Right) => {
                copula::cdf_raw(cop, u1l, u2l, theta)
                    - copula::cdf_raw(cop, u1u.unwrap(), u2l, theta)
            }
            (Right, Interval) => {
                copula::cdf_raw(cop, u1l, u2l, theta)
                    - copula::cdf_raw(cop, u1l, u2u.unwrap(), theta)
            }
            (Interval, Uncensored) => {
                copula::h2_raw(cop, u1l, u2l, theta)
                    - copula::h2_raw(cop, u1u.unwrap(), u2l, theta)
            }
            (Uncensored, Interval) => {
                copula::h1_raw(cop, u1l, u2l, theta)
                    - copula::h1_raw(cop, u1l, u2u.unwrap(), theta)
            }
        };

        if mass.is_nan() {
            return Err(Error::Numeric(format!(
                "non-finite contribution at unit {} (case {})",
                i + 1,
                self.d.combined_code(i)
            )));
        }
        if mass < NEGATIVE_MASS_TOL {
            return Err(Error::Numeric(format!(
                "negative probability mass {mass:e} at unit {} (case {})",
                i + 1,
                self.d.combined_code(i)
            )));
        }
        Ok(mass.max(MASS_FLOOR).ln())
    }

    /// Analytic-chain gradient of the log-likelihood.
    pub fn gradient(&self, delta: &[f64]) -> Vec<f64> {
        assert_eq!(delta.len(), self.layout.total);
        let ctx = self.ctx(delta);
        sum_pairwise_vec(0, self.d.n, self.layout.total, &mut |i, out| {
            self.unit_gradient(&ctx, i, out)
        })
    }

    fn unit_gradient(&self, ctx: &EvalCtx, i: usize, out: &mut [f64]) {
        let delta = &ctx.delta;
        let beta1 = &delta[self.layout.beta1.clone()];
        let beta2 = &delta[self.layout.beta2.clone()];

        let eta1l = self.m1.eta_at(&self.m1.lower[i], &ctx.g1, beta1, i);
        let eta2l = self.m2.eta_at(&self.m2.lower[i], &ctx.g2, beta2, i);
        let eta1u = self.m1.upper[i]
            .as_ref()
            .map(|pt| self.m1.eta_at(pt, &ctx.g1, beta1, i));
        let eta2u = self.m2.upper[i]
            .as_ref()
            .map(|pt| self.m2.eta_at(pt, &ctx.g2, beta2, i));
        let eta3 = self.eta3_at(delta, i);

        let psi = |e1l: f64, e1u: Option<f64>, e2l: f64, e2u: Option<f64>, e3: f64| {
            self.log_psi(i, e1l, e1u, e2l, e2u, e3)
                .unwrap_or(f64::NEG_INFINITY)
        };

        // Margin-1 lower predictor.
        let d_1l = fd_slot(|e| psi(e, eta1u, eta2l, eta2u, eta3), eta1l);
        self.chain_margin(ctx, 1, i, LowerUpper::Lower, d_1l, out);
        // Margin-1 upper predictor (interval case).
        if let Some(e) = eta1u {
            let d = fd_slot(|x| psi(eta1l, Some(x), eta2l, eta2u, eta3), e);
            self.chain_margin(ctx, 1, i, LowerUpper::Upper, d, out);
        }
        // Margin-2 predictors.
        let d_2l = fd_slot(|e| psi(eta1l, eta1u, e, eta2u, eta3), eta2l);
        self.chain_margin(ctx, 2, i, LowerUpper::Lower, d_2l, out);
        if let Some(e) = eta2u {
            let d = fd_slot(|x| psi(eta1l, eta1u, eta2l, Some(x), eta3), e);
            self.chain_margin(ctx, 2, i, LowerUpper::Upper, d, out);
        }
        // Dependence predictor.
        let d_3 = fd_slot(|e| psi(eta1l, eta1u, eta2l, eta2u, e), eta3);
        let p3 = self.spec.cols3.len();
        out[self.layout.eta3.start] += d_3;
        for (j, x) in self.x3[i * p3..(i + 1) * p3].iter().enumerate() {
            out[self.layout.eta3.start + 1 + j] += d_3 * x;
        }

        // Analytic density terms for uncensored margins.
        if self.m1.codes[i] == CensorCode::Uncensored {
            let a = dlog_neg_gprime(self.spec.link1, eta1l);
            self.chain_margin(ctx, 1, i, LowerUpper::Lower, a, out);
            self.chain_slope(ctx, 1, i, out);
        }
        if self.m2.codes[i] == CensorCode::Uncensored {
            let a = dlog_neg_gprime(self.spec.link2, eta2l);
            self.chain_margin(ctx, 2, i, LowerUpper::Lower, a, out);
            self.chain_slope(ctx, 2, i, out);
        }
    }

    /// Adds d * (d eta / d delta_j) for one margin predictor.
    fn chain_margin(
        &self,
        ctx: &EvalCtx,
        margin: u8,
        i: usize,
        which: LowerUpper,
        d: f64,
        out: &mut [f64],
    ) {
        if d == 0.0 {
            return;
        }
        let (m, base, beta, exp_raw) = if margin == 1 {
            (&self.m1, &self.layout.base1, &self.layout.beta1, &ctx.exp_raw1)
        } else {
            (&self.m2, &self.layout.base2, &self.layout.beta2, &ctx.exp_raw2)
        };
        let pt = match which {
            LowerUpper::Lower => &m.lower[i],
            LowerUpper::Upper => m.upper[i].as_ref().expect("upper point exists"),
        };
        out[base.start] += d; // level coefficient: basis rows sum to one
        for j in 1..m.k {
            out[base.start + j] += d * exp_raw[j] * pt.suffix[j];
        }
        for (j, x) in m.xrow(i).iter().enumerate() {
            out[beta.start + j] += d * x;
        }
    }

    /// d log(d eta/d x) / d raw_j at the lower point of an uncensored
    /// margin; the level coefficient drops out since the derivative rows
    /// sum to zero.
    fn chain_slope(&self, ctx: &EvalCtx, margin: u8, i: usize, out: &mut [f64]) {
        let (m, g, base, exp_raw) = if margin == 1 {
            (&self.m1, &ctx.g1, &self.layout.base1, &ctx.exp_raw1)
        } else {
            (&self.m2, &ctx.g2, &self.layout.base2, &ctx.exp_raw2)
        };
        let pt = &m.lower[i];
        let mut slope = 0.0;
        for (b, c) in pt.drow.iter().zip(g) {
            slope += b * c;
        }
        if slope <= MASS_FLOOR {
            return;
        }
        for j in 1..m.k {
            out[base.start + j] += exp_raw[j] * pt.dsuffix[j] / slope;
        }
    }

    /// Observed information: negative Hessian of the (unpenalized)
    /// log-likelihood, by central differences of the analytic gradient.
    pub fn observed_information(&self, delta: &[f64]) -> Result<DMatrix<f64>> {
        let h = crate::optimizer::fd_hessian(|x| self.gradient(x), delta)?;
        Ok(-h)
    }

    /// Ridge penalty on the baseline raw coefficients.
    pub fn penalty(&self, delta: &[f64]) -> f64 {
        let r = self.spec.ridge;
        let mut acc = 0.0;
        for j in self.layout.base1.clone().chain(self.layout.base2.clone()) {
            acc += delta[j] * delta[j];
        }
        0.5 * r * acc
    }

    pub fn penalized_value(&self, delta: &[f64]) -> f64 {
        self.loglik_value(delta) - self.penalty(delta)
    }

    pub fn penalized_gradient(&self, delta: &[f64]) -> Vec<f64> {
        let mut g = self.gradient(delta);
        let r = self.spec.ridge;
        for j in self.layout.base1.clone().chain(self.layout.base2.clone()) {
            g[j] -= r * delta[j];
        }
        g
    }

    /// Diagonal 0/1 mask of penalized (baseline) coordinates.
    pub fn penalty_mask(&self) -> Vec<f64> {
        let mut mask = vec![0.0; self.layout.total];
        for j in self.layout.base1.clone().chain(self.layout.base2.clone()) {
            mask[j] = 1.0;
        }
        mask
    }

    /// Per-unit dependence predictors eta3.
    pub fn eta3_values(&self, delta: &[f64]) -> Vec<f64> {
        (0..self.d.n).map(|i| self.eta3_at(delta, i)).collect()
    }

    pub fn m1_basis(&self) -> &SplineBasis {
        &self.m1.basis
    }

    pub fn m2_basis(&self) -> &SplineBasis {
        &self.m2.basis
    }
}

#[derive(Clone, Copy)]
enum LowerUpper {
    Lower,
    Upper,
}

/// Fourth-order central difference in one predictor coordinate, with a
/// conservative fallback when a stencil point is invalid.
fn fd_slot<F: Fn(f64) -> f64>(f: F, x: f64) -> f64 {
    let h = ETA_FD_STEP * (1.0 + x.abs());
    let fm2 = f(x - 2.0 * h);
    let fm1 = f(x - h);
    let fp1 = f(x + h);
    let fp2 = f(x + 2.0 * h);
    let d = (fm2 - 8.0 * fm1 + 8.0 * fp1 - fp2) / (12.0 * h);
    if d.is_finite() {
        return d;
    }
    let h = h / 16.0;
    let (a, b) = (f(x - h), f(x + h));
    let d = (b - a) / (2.0 * h);
    if d.is_finite() {
        d
    } else {
        0.0
    }
}

/// Recursive midpoint pairwise summation. The reduction tree depends only
/// on index ranges, so results are deterministic and a dataset
/// concatenated with itself sums to exactly twice the original.
fn sum_pairwise(lo: usize, hi: usize, f: &mut impl FnMut(usize) -> Result<f64>) -> Result<f64> {
    if hi - lo <= 32 {
        let mut acc = 0.0;
        for i in lo..hi {
            acc += f(i)?;
        }
        return Ok(acc);
    }
    let mid = lo + (hi - lo) / 2;
    Ok(sum_pairwise(lo, mid, f)? + sum_pairwise(mid, hi, f)?)
}

fn sum_pairwise_vec(
    lo: usize,
    hi: usize,
    dim: usize,
    f: &mut impl FnMut(usize, &mut [f64]),
) -> Vec<f64> {
    if hi - lo <= 32 {
        let mut acc = vec![0.0; dim];
        for i in lo..hi {
            f(i, &mut acc);
        }
        return acc;
    }
    let mid = lo + (hi - lo) / 2;
    let mut left = sum_pairwise_vec(lo, mid, dim, f);
    let right = sum_pairwise_vec(mid, hi, dim, f);
    for (a, b) in left.iter_mut().zip(&right) {
        *a += b;
    }
    left
}

/// Synthetic-data helpers shared by unit, integration and acceptance
/// tests.
#[doc(hidden)]
pub mod test_support {
    use super::*;
    use crate::data::Dataset;
    use rand::Rng;

    /// Random mixed-censoring dataset for gradient and invariance tests.
    pub fn random_mixed_dataset<R: Rng>(n: usize, p: usize, rng: &mut R) -> Dataset {
        let mut t1l = Vec::new();
        let mut t1u = Vec::new();
        let mut t2l = Vec::new();
        let mut t2u = Vec::new();
        let mut c1 = Vec::new();
        let mut c2 = Vec::new();
        let mut x = Vec::new();
        for _ in 0..n {
            for _ in 0..p {
                x.push(rng.random::<f64>() * 2.0 - 1.0);
            }
            for (tl, tu, cc) in [(&mut t1l, &mut t1u, &mut c1), (&mut t2l, &mut t2u, &mut c2)] {
                let t = 0.05 + 3.0 * rng.random::<f64>();
                match rng.random_range(0..3) {
                    0 => {
                        tl.push(t);
                        tu.push(None);
                        cc.push(CensorCode::Uncensored);
                    }
                    1 => {
                        tl.push(t);
                        tu.push(None);
                        cc.push(CensorCode::Right);
                    }
                    _ => {
                        tl.push(t);
                        tu.push(Some(t + 0.2 + rng.random::<f64>()));
                        cc.push(CensorCode::Interval);
                    }
                }
            }
        }
        let names = (0..p).map(|j| format!("x{}", j + 1)).collect();
        Dataset::new(t1l, t1u, t2l, t2u, c1, c2, x, names).unwrap()
    }

    /// Parameter vector keeping every survival value well inside (0,1),
    /// away from the clamp kinks.
    pub fn tame_delta<R: Rng>(w: &ModelWorkspace<'_>, rng: &mut R) -> Vec<f64> {
        let mut delta = vec![0.0; w.layout.total];
        for (j, v) in delta.iter_mut().enumerate() {
            *v = if w.layout.base1.contains(&j) || w.layout.base2.contains(&j) {
                -2.5 + 0.5 * rng.random::<f64>()
            } else {
                0.2 * (rng.random::<f64>() - 0.5)
            };
        }
        delta[w.layout.base1.start] = -0.3 + 0.3 * rng.random::<f64>();
        delta[w.layout.base2.start] = -0.3 + 0.3 * rng.random::<f64>();
        delta
    }

    /// Random but valid parameter vector for a workspace.
    pub fn random_delta<R: Rng>(w: &ModelWorkspace<'_>, rng: &mut R) -> Vec<f64> {
        let mut delta = vec![0.0; w.layout.total];
        for (j, v) in delta.iter_mut().enumerate() {
            *v = if w.layout.base1.contains(&j) || w.layout.base2.contains(&j) {
                -1.0 + 0.8 * rng.random::<f64>()
            } else {
                0.4 * (rng.random::<f64>() - 0.5)
            };
        }
        delta[w.layout.base1.start] = -0.5 + rng.random::<f64>();
        delta[w.layout.base2.start] = -0.5 + rng.random::<f64>();
        delta
    }
}
