//! Sample storage and every sample-based estimator: the four standard
//! risk-measure estimators, the ratio (tail-index) estimator with its
//! data-driven threshold, and the peaks-over-threshold extrapolations.
//!
//! All exceedance tests use the strict inequality `L > threshold`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sorted per-alternative sample history. Values are kept ascending together
/// with their natural logs so tail sums are a slice reduction.
#[derive(Debug, Clone, Default)]
pub struct SampleStore {
    alts: Vec<SortedSamples>,
}

#[derive(Debug, Clone, Default)]
struct SortedSamples {
    values: Vec<f64>,
    logs: Vec<f64>,
}

impl SortedSamples {
    fn insert(&mut self, x: f64) {
        let pos = self.values.partition_point(|&v| v <= x);
        self.values.insert(pos, x);
        self.logs.insert(pos, x.ln());
    }

    /// Merges an arbitrary batch in O(n + m log m).
    fn extend(&mut self, batch: &[f64]) {
        if batch.len() < 8 {
            batch.iter().for_each(|&x| self.insert(x));
            return;
        }
        let mut b = batch.to_vec();
        b.sort_by(f64::total_cmp);
        let old = std::mem::take(&mut self.values);
        let mut merged = Vec::with_capacity(old.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < old.len() && j < b.len() {
            if old[i] <= b[j] {
                merged.push(old[i]);
                i += 1;
            } else {
                merged.push(b[j]);
                j += 1;
            }
        }
        merged.extend_from_slice(&old[i..]);
        merged.extend_from_slice(&b[j..]);
        self.logs = merged.iter().map(|v| v.ln()).collect();
        self.values = merged;
    }

    /// Number of stored values strictly greater than `x`.
    fn count_above(&self, x: f64) -> usize {
        self.values.len() - self.values.partition_point(|&v| v <= x)
    }
}

impl SampleStore {
    pub fn new(k: usize) -> Self {
        Self { alts: vec![SortedSamples::default(); k] }
    }

    /// Builds a store from raw per-alternative samples.
    pub fn from_samples(samples: &[Vec<f64>]) -> Self {
        let mut s = Self::new(samples.len());
        for (i, xs) in samples.iter().enumerate() {
            s.extend(i, xs);
        }
        s
    }

    pub fn k(&self) -> usize {
        self.alts.len()
    }

    pub fn count(&self, i: usize) -> usize {
        self.alts[i].values.len()
    }

    pub fn counts(&self) -> Vec<usize> {
        self.alts.iter().map(|a| a.values.len()).collect()
    }

    pub fn total(&self) -> usize {
        self.alts.iter().map(|a| a.values.len()).sum()
    }

    pub fn push(&mut self, i: usize, x: f64) {
        self.alts[i].insert(x);
    }

    pub fn extend(&mut self, i: usize, xs: &[f64]) {
        self.alts[i].extend(xs);
    }

    /// Stored values of alternative `i`, ascending.
    pub fn sorted(&self, i: usize) -> &[f64] {
        &self.alts[i].values
    }

    /// The `r`-th largest value (`r` is 1-based).
    pub fn order_statistic(&self, i: usize, r: usize) -> Option<f64> {
        let v = &self.alts[i].values;
        if r == 0 || r > v.len() {
            None
        } else {
            Some(v[v.len() - r])
        }
    }

    fn nonempty(&self, i: usize) -> Result<&SortedSamples> {
        let a = &self.alts[i];
        if a.values.is_empty() {
            Err(Error::NoSamples(i))
        } else {
            Ok(a)
        }
    }

    /// Fraction of samples strictly exceeding `nu`.
    pub fn tail_prob(&self, i: usize, nu: f64) -> Result<f64> {
        let a = self.nonempty(i)?;
        Ok(a.count_above(nu) as f64 / a.values.len() as f64)
    }

    /// Sample mean of `max{h(L) − h(nu), 0}` for a nondecreasing `h`.
    pub fn excess_loss_with<H: Fn(f64) -> f64>(&self, i: usize, nu: f64, h: H) -> Result<f64> {
        let a = self.nonempty(i)?;
        let hn = h(nu);
        let start = a.values.partition_point(|&v| v <= nu);
        let sum: f64 = a.values[start..].iter().map(|&v| (h(v) - hn).max(0.0)).sum();
        Ok(sum / a.values.len() as f64)
    }

    /// Expected excess loss with `h` the identity.
    pub fn excess_loss(&self, i: usize, nu: f64) -> Result<f64> {
        self.excess_loss_with(i, nu, |x| x)
    }

    /// Empirical `p`-quantile: the smallest stored `x` whose empirical CDF
    /// reaches `p`, i.e. the `⌈N p⌉`-th smallest value.
    pub fn var(&self, i: usize, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidParameter(format!("level must lie in (0,1), got {p}")));
        }
        let a = self.nonempty(i)?;
        Ok(a.values[quantile_rank(a.values.len(), p) - 1])
    }

    /// Rockafellar–Uryasev CVaR with rarity `nu > 1`, evaluated at its
    /// minimiser `x* = VaR_{1−1/nu}`.
    pub fn cvar(&self, i: usize, nu: f64) -> Result<f64> {
        if !(nu > 1.0) {
            return Err(Error::InvalidParameter(format!("rarity must exceed 1, got {nu}")));
        }
        let x = self.var(i, 1.0 - 1.0 / nu)?;
        Ok(x + nu * self.excess_loss(i, x)?)
    }

    /// Standard estimator of a risk measure. For tail probability and excess
    /// loss `nu` is the loss threshold; for VaR/CVaR it is the rarity, so the
    /// level is `1 − 1/nu`.
    pub fn standard_estimate(&self, i: usize, kind: RiskKind, nu: f64) -> Result<f64> {
        match kind {
            RiskKind::TailProb => self.tail_prob(i, nu),
            RiskKind::ExcessLoss => self.excess_loss(i, nu),
            RiskKind::ValueAtRisk => {
                if !(nu > 1.0) {
                    return Err(Error::InvalidParameter(format!("rarity must exceed 1, got {nu}")));
                }
                self.var(i, 1.0 - 1.0 / nu)
            }
            RiskKind::ConditionalValueAtRisk => self.cvar(i, nu),
        }
    }

    /// Picks the ratio-estimator threshold for alternative `i` at stage `t`:
    /// `k = clamp(⌈N t^(δ−1)⌉, min_exceedances, N − 1)` and γ is the
    /// `(k+1)`-th largest value.
    pub fn select_threshold(&self, i: usize, rule: &ThresholdRule, t: usize) -> Result<Threshold> {
        let n = self.count(i);
        let need = rule.min_exceedances + 1;
        if n < need {
            return Err(Error::InsufficientSamples { index: i, have: n, need });
        }
        let raw = (n as f64 * (t as f64).powf(rule.delta - 1.0)).ceil() as usize;
        let k = raw.clamp(rule.min_exceedances, n - 1);
        let gamma = self.alts[i].values[n - k - 1];
        Ok(Threshold { gamma, target_exceedances: k })
    }

    /// Ratio estimator: mean of `ln L − ln γ` over samples with `L > γ`.
    pub fn tail_index(&self, i: usize, gamma: f64) -> Result<TailIndexEstimate> {
        if !(gamma > 0.0) {
            return Err(Error::InvalidParameter(format!("threshold must be positive, got {gamma}")));
        }
        let a = &self.alts[i];
        let start = a.values.partition_point(|&v| v <= gamma);
        let n_exc = a.values.len() - start;
        if n_exc == 0 {
            return Err(Error::NoExceedances { index: i, gamma });
        }
        let log_gamma = gamma.ln();
        let sum: f64 = a.logs[start..].iter().map(|&l| l - log_gamma).sum();
        Ok(TailIndexEstimate { beta_hat: sum / n_exc as f64, gamma, exceedance_count: n_exc })
    }

    /// Threshold selection followed by the ratio estimator.
    pub fn tail_index_by_rule(&self, i: usize, rule: &ThresholdRule, t: usize) -> Result<TailIndexEstimate> {
        let th = self.select_threshold(i, rule, t)?;
        self.tail_index(i, th.gamma)
    }

    /// Ratio estimates for every alternative.
    pub fn tail_indices(&self, rule: &ThresholdRule, t: usize) -> Result<Vec<f64>> {
        (0..self.k()).map(|i| self.tail_index_by_rule(i, rule, t).map(|e| e.beta_hat)).collect()
    }

    /// Extreme tail probability `P(L > nu)` extrapolated from the level-`u`
    /// quantile: `(1 − u) (VaR_u / nu)^(1/β̂)`.
    pub fn pot_prob(&self, i: usize, nu: f64, u: f64, beta_hat: f64) -> Result<f64> {
        if !(nu > 0.0) {
            return Err(Error::InvalidParameter(format!("threshold must be positive, got {nu}")));
        }
        if !(beta_hat > 0.0) {
            return Err(Error::InvalidParameter(format!("tail index must be positive, got {beta_hat}")));
        }
        let q = self.var(i, u)?;
        Ok((1.0 - u) * (q / nu).powf(1.0 / beta_hat))
    }

    /// Extreme quantile `VaR_{1−1/nu}` extrapolated from the level-`u`
    /// quantile: `VaR_u (nu (1 − u))^β̂`.
    pub fn pot_quantile(&self, i: usize, nu: f64, u: f64, beta_hat: f64) -> Result<f64> {
        if !(nu > 0.0) {
            return Err(Error::InvalidParameter(format!("rarity must be positive, got {nu}")));
        }
        if !(beta_hat >= 0.0) {
            return Err(Error::InvalidParameter(format!("tail index must be nonnegative, got {beta_hat}")));
        }
        let q = self.var(i, u)?;
        Ok(q * (nu * (1.0 - u)).powf(beta_hat))
    }
}

/// Smallest 1-based rank `r` with `r / n ≥ p`.
fn quantile_rank(n: usize, p: f64) -> usize {
    let nf = n as f64;
    let mut r = ((nf * p).ceil() as usize).clamp(1, n);
    // guard against `n * p` rounding up past an exact multiple
    while r > 1 && (r - 1) as f64 / nf >= p {
        r -= 1;
    }
    while r < n && (r as f64 / nf) < p {
        r += 1;
    }
    r
}

/// The four tail-risk measures alternatives can be ranked by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskKind {
    TailProb,
    ExcessLoss,
    #[serde(rename = "var")]
    ValueAtRisk,
    #[serde(rename = "cvar")]
    ConditionalValueAtRisk,
}

impl RiskKind {
    /// Whether the measure is threshold-based (tail probability / excess loss)
    /// as opposed to quantile-based (VaR / CVaR).
    pub fn is_threshold_based(self) -> bool {
        matches!(self, RiskKind::TailProb | RiskKind::ExcessLoss)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RiskKind::TailProb => "tail_prob",
            RiskKind::ExcessLoss => "excess_loss",
            RiskKind::ValueAtRisk => "var",
            RiskKind::ConditionalValueAtRisk => "cvar",
        }
    }
}

impl std::str::FromStr for RiskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [RiskKind::TailProb, RiskKind::ExcessLoss, RiskKind::ValueAtRisk, RiskKind::ConditionalValueAtRisk]
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| {
                Error::InvalidParameter(format!("unknown risk measure `{s}` (tail_prob, excess_loss, var, cvar)"))
            })
    }
}

/// How many order statistics feed the ratio estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRule {
    pub delta: f64,
    pub min_exceedances: usize,
}

impl ThresholdRule {
    pub const DEFAULT_MIN_EXCEEDANCES: usize = 5;

    pub fn new(delta: f64, min_exceedances: usize) -> Result<Self> {
        if !(delta > 0.5 && delta < 1.0) {
            return Err(Error::InvalidParameter(format!("delta must lie in (1/2, 1), got {delta}")));
        }
        if min_exceedances < 2 {
            return Err(Error::InvalidParameter("min_exceedances must be at least 2".into()));
        }
        Ok(Self { delta, min_exceedances })
    }

    pub fn with_delta(delta: f64) -> Result<Self> {
        Self::new(delta, Self::DEFAULT_MIN_EXCEEDANCES)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Threshold {
    pub gamma: f64,
    /// Requested exceedance count; fewer values exceed γ only when γ is tied.
    pub target_exceedances: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailIndexEstimate {
    pub beta_hat: f64,
    pub gamma: f64,
    pub exceedance_count: usize,
}
