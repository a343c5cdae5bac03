//! Large-deviations rate functions for tail-index selection and for the
//! Bernoulli exceedance benchmark, their maximisation over the simplex, and
//! Euclidean projection onto the simplex.
//!
//! Both rate functions have the form `G(α) = min_{i≠b} F_i(α_b, α_i)` where
//! each `F_i` is concave, positively homogeneous of degree one and increasing
//! in both arguments. Writing `F_i(1, r) = h_i(r)`, every level `c` below
//! `c_max = min_i sup_r h_i(r)` is reached by a unique ratio `r_i(c)`, and
//! the maximum of `G` over the simplex equals
//! `max_c c / (1 + Σ_i r_i(c))`, a unimodal scalar problem.

use crate::error::{Error, Result};

/// Weights on the standard simplex: nonnegative and summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationVector(Vec<f64>);

impl AllocationVector {
    pub const SUM_TOLERANCE: f64 = 1e-12;

    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidParameter("empty allocation".into()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidParameter(format!("allocation weights must be nonnegative: {weights:?}")));
        }
        let s: f64 = weights.iter().sum();
        if (s - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(Error::InvalidParameter(format!("allocation sums to {s}, not 1")));
        }
        Ok(Self(weights))
    }

    pub fn equal(k: usize) -> Self {
        Self(vec![1.0 / k as f64; k])
    }

    /// Normalises nonnegative counts into sampling ratios.
    pub fn from_counts(counts: &[usize]) -> Self {
        let total: usize = counts.iter().sum();
        Self(counts.iter().map(|&c| c as f64 / total as f64).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Largest absolute componentwise difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

impl std::ops::Index<usize> for AllocationVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Tail indices (true or estimated) with the designated best alternative.
#[derive(Debug, Clone, PartialEq)]
pub struct RateInstance {
    betas: Vec<f64>,
    best: usize,
}

impl RateInstance {
    /// The best alternative is the smallest index attaining the minimum.
    pub fn new(betas: Vec<f64>) -> Result<Self> {
        if betas.len() < 2 {
            return Err(Error::InvalidParameter("need at least two alternatives".into()));
        }
        if betas.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
            return Err(Error::InvalidParameter(format!("tail indices must be positive: {betas:?}")));
        }
        let best = argmin(&betas);
        Ok(Self { betas, best })
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn best(&self) -> usize {
        self.best
    }

    pub fn k(&self) -> usize {
        self.betas.len()
    }

    /// True when some competitor has exactly the best tail index, which makes
    /// the rate identically zero.
    pub fn is_degenerate(&self) -> bool {
        let bb = self.betas[self.best];
        self.betas.iter().enumerate().any(|(i, &b)| i != self.best && b == bb)
    }
}

/// Index of the smallest value; ties go to the smallest index.
pub fn argmin(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x < xs[best] {
            best = i;
        }
    }
    best
}

/// KL divergence between exponential laws with means `theta` and `vartheta`.
pub fn kl_exp(theta: f64, vartheta: f64) -> Result<f64> {
    if !(theta > 0.0 && vartheta > 0.0) {
        return Err(Error::InvalidParameter(format!("kl_exp needs positive means, got ({theta}, {vartheta})")));
    }
    Ok(kl_exp_raw(theta, vartheta))
}

#[inline]
fn kl_exp_raw(theta: f64, vartheta: f64) -> f64 {
    let r = theta / vartheta;
    // r - ln r - 1 loses everything to cancellation near r = 1
    let d = r - 1.0;
    if d.abs() < 1e-4 {
        d * d * (0.5 - d / 3.0 + d * d / 4.0)
    } else {
        d - r.ln()
    }
}

/// Minimising mean of the pair's tilted exponential laws.
#[inline]
fn balance_point(ab: f64, ai: f64, bb: f64, bi: f64) -> f64 {
    (ab + ai) / (ab / bb + ai / bi)
}

/// Rate at which the pair (b, i) is confused under allocation `(ab, ai)`.
pub fn pairwise_rate(ab: f64, ai: f64, bb: f64, bi: f64) -> Result<f64> {
    if ab < 0.0 || ai < 0.0 {
        return Err(Error::InvalidParameter(format!("negative allocation ({ab}, {ai})")));
    }
    if !(bb > 0.0 && bi > 0.0) {
        return Err(Error::InvalidParameter(format!("tail indices must be positive, got ({bb}, {bi})")));
    }
    Ok(pairwise_rate_raw(ab, ai, bb, bi))
}

#[inline]
fn pairwise_rate_raw(ab: f64, ai: f64, bb: f64, bi: f64) -> f64 {
    if ab == 0.0 || ai == 0.0 {
        return 0.0;
    }
    let th = balance_point(ab, ai, bb, bi);
    ab * kl_exp_raw(th, bb) + ai * kl_exp_raw(th, bi)
}

/// `G(α) = min_{i≠b} pairwise_rate(α_b, α_i, β_b, β_i)`.
pub fn rate_g(alpha: &[f64], inst: &RateInstance) -> Result<f64> {
    if alpha.len() != inst.k() {
        return Err(Error::DimensionMismatch { expected: inst.k(), got: alpha.len() });
    }
    if alpha.iter().any(|a| *a < 0.0) {
        return Err(Error::InvalidParameter("negative allocation".into()));
    }
    Ok(TailIndexRates(inst).min_rate(alpha))
}

/// Bernoulli (exceedance indicator) rate used by the Glynn–Juneja benchmark.
pub fn gj_rate(alpha: &[f64], rho_hats: &[f64], best: usize) -> Result<f64> {
    if alpha.len() != rho_hats.len() {
        return Err(Error::DimensionMismatch { expected: rho_hats.len(), got: alpha.len() });
    }
    if best >= rho_hats.len() {
        return Err(Error::InvalidParameter(format!("best index {best} out of range")));
    }
    if rho_hats.iter().any(|p| !(*p > 0.0 && *p < 1.0)) {
        return Err(Error::InvalidParameter(format!("probabilities must lie in (0,1): {rho_hats:?}")));
    }
    Ok(BernoulliRates { rho: rho_hats, best }.min_rate(alpha))
}

#[inline]
fn bernoulli_pair(ab: f64, ai: f64, pb: f64, pi: f64) -> f64 {
    if ab == 0.0 || ai == 0.0 {
        return 0.0;
    }
    let s = ab + ai;
    let w = ab / s;
    let m = (w * (1.0 - pb).ln() + (1.0 - w) * (1.0 - pi).ln()).exp() + (w * pb.ln() + (1.0 - w) * pi.ln()).exp();
    (-s * m.ln()).max(0.0)
}

/// d/d(ai) of [`bernoulli_pair`].
#[inline]
fn bernoulli_pair_d_other(ab: f64, ai: f64, pb: f64, pi: f64) -> f64 {
    let s = ab + ai;
    let w = ab / s;
    let m0 = (w * (1.0 - pb).ln() + (1.0 - w) * (1.0 - pi).ln()).exp();
    let m1 = (w * pb.ln() + (1.0 - w) * pi.ln()).exp();
    let m = m0 + m1;
    let dm = m0 * ((1.0 - pb) / (1.0 - pi)).ln() + m1 * (pb / pi).ln();
    -m.ln() + w * dm / m
}

fn bernoulli_kl(p: f64, q: f64) -> f64 {
    p * (p / q).ln() + (1.0 - p) * ((1.0 - p) / (1.0 - q)).ln()
}

/// A min-of-pairs rate function against a designated best alternative.
trait PairRates {
    fn k(&self) -> usize;
    fn best(&self) -> usize;
    /// `F_i(ab, ai)`.
    fn value(&self, i: usize, ab: f64, ai: f64) -> f64;
    /// `∂F_i/∂ai`.
    fn d_other(&self, i: usize, ab: f64, ai: f64) -> f64;
    /// `lim_{r→∞} F_i(1, r)`.
    fn ceiling(&self, i: usize) -> f64;

    fn min_rate(&self, alpha: &[f64]) -> f64 {
        let b = self.best();
        (0..self.k()).filter(|&i| i != b).map(|i| self.value(i, alpha[b], alpha[i])).fold(f64::INFINITY, f64::min)
    }
}

struct TailIndexRates<'a>(&'a RateInstance);

impl PairRates for TailIndexRates<'_> {
    fn k(&self) -> usize {
        self.0.k()
    }
    fn best(&self) -> usize {
        self.0.best
    }
    fn value(&self, i: usize, ab: f64, ai: f64) -> f64 {
        pairwise_rate_raw(ab, ai, self.0.betas[self.0.best], self.0.betas[i])
    }
    fn d_other(&self, i: usize, ab: f64, ai: f64) -> f64 {
        // envelope theorem: the minimising mean is stationary
        let (bb, bi) = (self.0.betas[self.0.best], self.0.betas[i]);
        kl_exp_raw(balance_point(ab, ai, bb, bi), bi)
    }
    fn ceiling(&self, i: usize) -> f64 {
        kl_exp_raw(self.0.betas[i], self.0.betas[self.0.best])
    }
}

struct BernoulliRates<'a> {
    rho: &'a [f64],
    best: usize,
}

impl PairRates for BernoulliRates<'_> {
    fn k(&self) -> usize {
        self.rho.len()
    }
    fn best(&self) -> usize {
        self.best
    }
    fn value(&self, i: usize, ab: f64, ai: f64) -> f64 {
        bernoulli_pair(ab, ai, self.rho[self.best], self.rho[i])
    }
    fn d_other(&self, i: usize, ab: f64, ai: f64) -> f64 {
        bernoulli_pair_d_other(ab, ai, self.rho[self.best], self.rho[i])
    }
    fn ceiling(&self, i: usize) -> f64 {
        bernoulli_kl(self.rho[i], self.rho[self.best])
    }
}

/// Result of maximising a rate function over the simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct RateOptimum {
    pub alpha: AllocationVector,
    pub value: f64,
    pub iterations: usize,
    /// False when `max_iter` ran out before the level bracket closed.
    pub converged: bool,
    /// The rate is identically zero; `alpha` is the equal allocation.
    pub degenerate: bool,
}

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 200;

/// Rate-optimal allocation for the tail-index selection rule.
pub fn maximize_rate(inst: &RateInstance, tol: f64, max_iter: usize) -> RateOptimum {
    maximize(&TailIndexRates(inst), tol, max_iter)
}

/// Rate-optimal allocation for the Bernoulli exceedance rule with the given
/// best alternative.
pub fn maximize_gj_rate(rho_hats: &[f64], best: usize, tol: f64, max_iter: usize) -> Result<RateOptimum> {
    if rho_hats.iter().any(|p| !(*p > 0.0 && *p < 1.0)) {
        return Err(Error::InvalidParameter(format!("probabilities must lie in (0,1): {rho_hats:?}")));
    }
    if best >= rho_hats.len() || rho_hats.len() < 2 {
        return Err(Error::InvalidParameter("bad best index or too few alternatives".into()));
    }
    Ok(maximize(&BernoulliRates { rho: rho_hats, best }, tol, max_iter))
}

fn maximize<R: PairRates>(rates: &R, tol: f64, max_iter: usize) -> RateOptimum {
    let k = rates.k();
    let b = rates.best();
    let others: Vec<usize> = (0..k).filter(|&i| i != b).collect();
    let c_max = others.iter().map(|&i| rates.ceiling(i)).fold(f64::INFINITY, f64::min);
    if !(c_max > 0.0) || !c_max.is_finite() {
        let alpha = AllocationVector::equal(k);
        let value = rates.min_rate(alpha.as_slice());
        return RateOptimum { alpha, value, iterations: 0, converged: true, degenerate: true };
    }

    let mut ratios = vec![0.0; k];
    // objective c / (1 + Σ r_i(c)); fills `ratios`
    let level_value = |c: f64, ratios: &mut [f64]| -> f64 {
        let mut mass = 1.0;
        for &i in &others {
            let r = solve_ratio(rates, i, c);
            ratios[i] = r;
            mass += r;
        }
        c / mass
    };

    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let (mut lo, mut hi) = (0.0, c_max);
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = level_value(x1, &mut ratios);
    let mut f2 = level_value(x2, &mut ratios);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        if hi - lo <= tol * c_max {
            converged = true;
            break;
        }
        iterations += 1;
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = level_value(x2, &mut ratios);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = level_value(x1, &mut ratios);
        }
    }
    let c = if f1 >= f2 { x1 } else { x2 };
    level_value(c, &mut ratios);
    ratios[b] = 1.0;
    let mass: f64 = ratios.iter().sum();
    let weights: Vec<f64> = ratios.iter().map(|r| r / mass).collect();
    let value = rates.min_rate(&weights);
    RateOptimum { alpha: AllocationVector(weights), value, iterations, converged, degenerate: false }
}

/// Solves `F_i(1, r) = c` for `r ≥ 0` (requires `0 ≤ c < ceiling(i)`).
/// `F_i(1, ·)` is concave and increasing, so Newton iterates started left of
/// the root never overshoot; bisection guards the remaining cases.
fn solve_ratio<R: PairRates>(rates: &R, i: usize, c: f64) -> f64 {
    if c <= 0.0 {
        return 0.0;
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while rates.value(i, 1.0, hi) < c {
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            return hi;
        }
    }
    let mut r = lo;
    for _ in 0..200 {
        let f = rates.value(i, 1.0, r) - c;
        if f.abs() <= 1e-15 * c {
            return r;
        }
        if f < 0.0 {
            lo = r;
        } else {
            hi = r;
        }
        let d = rates.d_other(i, 1.0, r);
        let newton = r - f / d;
        r = if d > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    r
}

/// Threshold κ with `Σ_j (v_j − κ)^+ = 1`.
pub fn simplex_threshold(v: &[f64]) -> f64 {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut kappa = u[0] - 1.0;
    for (j, &uj) in u.iter().enumerate() {
        cum += uj;
        let cand = (cum - 1.0) / (j + 1) as f64;
        if uj - cand > 0.0 {
            kappa = cand;
        } else {
            break;
        }
    }
    kappa
}

/// Euclidean projection onto the probability simplex: `(v − κ 1)^+`.
pub fn project_simplex(v: &[f64]) -> AllocationVector {
    assert!(!v.is_empty(), "cannot project an empty vector");
    let kappa = simplex_threshold(v);
    let mut w: Vec<f64> = v.iter().map(|x| (x - kappa).max(0.0)).collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    AllocationVector(w)
}
