//! Marginal survival models g{S(t|x)} = baseline(t) + x'beta with the link
//! functions PH, PO and probit, and a monotone baseline spline in log-time.

use crate::error::{Error, Result};
use crate::prob;
use crate::spline::{monotone_coefficients, SplineBasis};
use serde::{Deserialize, Serialize};

/// Floor applied to times before the log-time transform.
pub const TIME_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LinkKind {
    /// Proportional hazards: g(S) = log(-log S), G(eta) = exp(-exp(eta)).
    Ph,
    /// Proportional odds: g(S) = -log(S/(1-S)), G(eta) = 1/(1+exp(eta)).
    Po,
    /// Probit: g(S) = -Phi^{-1}(S), G(eta) = Phi(-eta).
    Probit,
}

pub const ALL_LINKS: [LinkKind; 3] = [LinkKind::Ph, LinkKind::Po, LinkKind::Probit];

impl LinkKind {
    pub fn code(&self) -> &'static str {
        match self {
            LinkKind::Ph => "PH",
            LinkKind::Po => "PO",
            LinkKind::Probit => "probit",
        }
    }

    pub fn from_code(code: &str) -> Option<LinkKind> {
        match code {
            "PH" => Some(LinkKind::Ph),
            "PO" => Some(LinkKind::Po),
            "probit" | "Probit" => Some(LinkKind::Probit),
            _ => None,
        }
    }

    /// Display string for fit summaries. The stored g maps survival to the
    /// predictor scale, so PO prints as a negated logit.
    pub fn summary_label(&self) -> &'static str {
        match self {
            LinkKind::Ph => "survival with -cloglog link",
            LinkKind::Po => "survival with -logit link",
            LinkKind::Probit => "survival with -probit link",
        }
    }
}

/// g(s): survival probability to predictor scale.
pub fn link_eval(l: LinkKind, s: f64) -> Result<f64> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::Domain(format!(
            "link argument must be in (0,1), got {s}"
        )));
    }
    Ok(match l {
        LinkKind::Ph => (-s.ln()).ln(),
        LinkKind::Po => -(s / (1.0 - s)).ln(),
        LinkKind::Probit => -prob::norm_inv_cdf(s),
    })
}

/// G(eta) = g^{-1}(eta): predictor to survival probability.
#[inline]
pub fn link_inverse(l: LinkKind, eta: f64) -> f64 {
    match l {
        LinkKind::Ph => (-eta.exp()).exp(),
        LinkKind::Po => {
            // exp(-eta)/(1+exp(-eta)) evaluated stably on both tails
            if eta >= 0.0 {
                let e = (-eta).exp();
                e / (1.0 + e)
            } else {
                1.0 / (1.0 + eta.exp())
            }
        }
        LinkKind::Probit => prob::norm_cdf(-eta),
    }
}

/// G'(eta).
#[inline]
pub fn link_inverse_deriv(l: LinkKind, eta: f64) -> f64 {
    match l {
        LinkKind::Ph => {
            let g = link_inverse(l, eta);
            -g * eta.exp()
        }
        LinkKind::Po => {
            let g = link_inverse(l, eta);
            -g * (1.0 - g)
        }
        LinkKind::Probit => -prob::norm_pdf(-eta),
    }
}

/// d/d eta of log(-G'(eta)); used by density contributions.
#[inline]
pub fn dlog_neg_gprime(l: LinkKind, eta: f64) -> f64 {
    match l {
        LinkKind::Ph => 1.0 - eta.exp(),
        LinkKind::Po => 2.0 * link_inverse(l, eta) - 1.0,
        LinkKind::Probit => -eta,
    }
}

/// Monotone baseline: eta0(t) = sum_j gamma_j B_j(log t) with gamma the
/// cumulative-exponential reparameterization of the raw coefficients, so
/// the curve is nondecreasing for any raw vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneBaseline {
    pub basis: SplineBasis,
    pub raw: Vec<f64>,
}

impl MonotoneBaseline {
    pub fn new(basis: SplineBasis, raw: Vec<f64>) -> Result<MonotoneBaseline> {
        if raw.len() != basis.n_basis {
            return Err(Error::Dimension(format!(
                "baseline raw coefficient count {} does not match basis size {}",
                raw.len(),
                basis.n_basis
            )));
        }
        Ok(MonotoneBaseline { basis, raw })
    }

    pub fn n_params(&self) -> usize {
        self.basis.n_basis
    }

    pub fn gammas(&self) -> Vec<f64> {
        monotone_coefficients(&self.raw)
    }

    /// Baseline predictor at time t.
    pub fn eta(&self, t: f64) -> f64 {
        let g = self.gammas();
        let (row, _) = self.basis.row(t.max(TIME_FLOOR).ln());
        row.iter().zip(&g).map(|(b, c)| b * c).sum()
    }

    /// d eta / d t (nonnegative by construction).
    pub fn deta_dt(&self, t: f64) -> f64 {
        let t = t.max(TIME_FLOOR);
        let g = self.gammas();
        let (_, drow) = self.basis.row(t.ln());
        let dx: f64 = drow.iter().zip(&g).map(|(b, c)| b * c).sum();
        dx / t
    }

    /// Shifts the level so that eta(t_ref) equals the given value.
    pub fn calibrated_to(mut self, t_ref: f64, eta_ref: f64) -> MonotoneBaseline {
        let delta = eta_ref - self.eta(t_ref);
        self.raw[0] += delta;
        self
    }
}

/// One marginal survival model over a named covariate subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginModel {
    pub link: LinkKind,
    pub baseline: MonotoneBaseline,
    /// Coefficients aligned with `covariates`.
    pub beta: Vec<f64>,
    pub covariates: Vec<String>,
}

impl MarginModel {
    /// S(t | x) = G(eta0(t) + x'beta); strictly decreasing in t.
    pub fn survival(&self, t: f64, x: &[f64]) -> Result<f64> {
        if x.len() != self.beta.len() {
            return Err(Error::Dimension(format!(
                "covariate row length {} does not match beta length {}",
                x.len(),
                self.beta.len()
            )));
        }
        let lin: f64 = x.iter().zip(&self.beta).map(|(a, b)| a * b).sum();
        Ok(link_inverse(self.link, self.baseline.eta(t) + lin))
    }

    /// f(t | x) = -dS/dt = -G'(eta) * d eta/d t.
    pub fn density(&self, t: f64, x: &[f64]) -> Result<f64> {
        let lin: f64 = x.iter().zip(&self.beta).map(|(a, b)| a * b).sum();
        let eta = self.baseline.eta(t) + lin;
        Ok((-link_inverse_deriv(self.link, eta) * self.baseline.deta_dt(t)).max(0.0))
    }
}
