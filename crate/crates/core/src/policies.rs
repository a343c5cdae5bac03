//! Fixed-budget sequential sampling policies: static allocation, TIRO,
//! I-TIRO (tie-robust selection plus adaptive threshold exponent) and the
//! Bernoulli large-deviations benchmark (GJ).
//!
//! All batched policies share one skeleton: `n0` round-robin warm-up draws per
//! alternative, then batches of `m` draws split so that the post-batch counts
//! land as close as possible to `(t + m) α̂_t`, where `α̂_t` maximises the
//! current pseudo rate function.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distmodel::Scenario;
use crate::error::{Error, Result};
use crate::estimators::{RiskKind, SampleStore, ThresholdRule};
use crate::rateopt::{
    argmin, gj_rate, maximize_gj_rate, maximize_rate, project_simplex, rate_g, AllocationVector, RateInstance,
};

/// Tuning parameters shared by every policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyParams {
    /// Warm-up draws per alternative.
    pub n0: usize,
    /// Batch size.
    pub m: usize,
    /// Fixed threshold exponent (TIRO, GJ, static rules).
    pub delta: f64,
    /// Starting threshold exponent for I-TIRO.
    pub delta0: f64,
    /// I-TIRO local-search step.
    pub delta_step: f64,
    pub delta_lo: f64,
    pub delta_hi: f64,
    /// Base level of the peaks-over-threshold extrapolations.
    pub u: f64,
    pub min_exceedances: usize,
    pub solver_tol: f64,
    pub solver_max_iter: usize,
}

impl Default for PolicyParams {
    fn default() -> Self {
        Self {
            n0: 100,
            m: 100,
            delta: 0.8,
            delta0: 0.8,
            delta_step: 0.05,
            delta_lo: 0.55,
            delta_hi: 0.95,
            u: 0.9,
            min_exceedances: ThresholdRule::DEFAULT_MIN_EXCEEDANCES,
            solver_tol: 1e-9,
            solver_max_iter: 200,
        }
    }
}

impl PolicyParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.m == 0 {
            return bad("batch size m must be positive".into());
        }
        if self.n0 < self.min_exceedances + 1 {
            return bad(format!(
                "n0 = {} must be at least min_exceedances + 1 = {}",
                self.n0,
                self.min_exceedances + 1
            ));
        }
        ThresholdRule::new(self.delta, self.min_exceedances)?;
        if !(self.delta_lo > 0.5 && self.delta_lo <= self.delta_hi && self.delta_hi < 1.0) {
            return bad(format!("delta bounds [{}, {}] must lie inside (1/2, 1)", self.delta_lo, self.delta_hi));
        }
        if !(self.delta0 >= self.delta_lo && self.delta0 <= self.delta_hi) {
            return bad(format!("delta0 = {} outside its bounds", self.delta0));
        }
        if !(self.delta_step >= 0.0) {
            return bad("delta_step must be nonnegative".into());
        }
        if !(self.u > 0.0 && self.u < 1.0) {
            return bad(format!("u must lie in (0,1), got {}", self.u));
        }
        Ok(())
    }

    fn threshold_rule(&self, delta: f64) -> ThresholdRule {
        ThresholdRule { delta, min_exceedances: self.min_exceedances }
    }

    fn check_budget(&self, k: usize, budget: usize) -> Result<()> {
        self.validate()?;
        if budget < k * self.n0 {
            return Err(Error::Config(format!("budget {budget} is below the warm-up size k·n0 = {}", k * self.n0)));
        }
        Ok(())
    }
}

/// How the final selection is made from the collected samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SelectionRule {
    /// Smallest ratio estimate β̂.
    MinTailIndex,
    /// Smallest extrapolated tail probability p̂ at loss threshold `nu`.
    MinPotProb { nu: f64 },
    /// Smallest extrapolated quantile q̂ at rarity `nu`.
    MinPotQuantile { nu: f64 },
    /// Smallest standard estimate of the given risk measure.
    MinStandard { risk: RiskKind, nu: f64 },
}

impl SelectionRule {
    pub fn label(&self) -> &'static str {
        match self {
            SelectionRule::MinTailIndex => "beta_hat",
            SelectionRule::MinPotProb { .. } => "p_hat",
            SelectionRule::MinPotQuantile { .. } => "q_hat",
            SelectionRule::MinStandard { risk, .. } => risk.as_str(),
        }
    }
}

/// Per-alternative scores whose argmin is the selection. Tail indices use
/// the threshold exponent `delta` at budget `t`.
pub fn selection_scores(
    store: &SampleStore,
    rule: &SelectionRule,
    params: &PolicyParams,
    delta: f64,
    t: usize,
) -> Result<Vec<f64>> {
    let th = params.threshold_rule(delta);
    let k = store.k();
    match *rule {
        SelectionRule::MinTailIndex => store.tail_indices(&th, t),
        SelectionRule::MinPotProb { nu } => {
            let betas = store.tail_indices(&th, t)?;
            (0..k).map(|i| store.pot_prob(i, nu, params.u, betas[i])).collect()
        }
        SelectionRule::MinPotQuantile { nu } => {
            let betas = store.tail_indices(&th, t)?;
            (0..k).map(|i| store.pot_quantile(i, nu, params.u, betas[i])).collect()
        }
        SelectionRule::MinStandard { risk, nu } => (0..k).map(|i| store.standard_estimate(i, risk, nu)).collect(),
    }
}

/// One batch decision, as written to trace files.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchRecord {
    /// Samples taken before the batch.
    pub t: usize,
    /// Sampling ratios before the batch.
    pub alpha: Vec<f64>,
    /// Estimates driving the allocation (β̂, or ρ̂ for GJ).
    pub estimates: Vec<f64>,
    pub delta: f64,
    /// Pseudo rate at the current sampling ratios.
    pub g_hat: f64,
    /// Integer batch split.
    pub batch: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub selected: usize,
    pub false_selection: bool,
    pub counts: Vec<usize>,
    pub trajectory: Option<Vec<BatchRecord>>,
}

impl RunResult {
    /// Final sampling ratios.
    pub fn final_alpha(&self) -> AllocationVector {
        AllocationVector::from_counts(&self.counts)
    }
}

/// Options that do not change a policy's definition.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOptions {
    pub record_trace: bool,
    /// Test hook: drive the allocation with these tail indices instead of
    /// the running estimates.
    pub forced_betas: Option<Vec<f64>>,
}

/// Splits `total` into nonnegative integers proportional to `weights` with
/// the largest-remainder method; leftover units go to the largest
/// fractional parts, earlier indices first on ties.
pub fn largest_remainder(weights: &[f64], total: usize) -> Vec<usize> {
    let raw: Vec<f64> = weights.iter().map(|w| w.max(0.0) * total as f64).collect();
    let mut out: Vec<usize> = raw.iter().map(|x| x.floor() as usize).collect();
    let assigned: usize = out.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| (raw[b] - raw[b].floor()).total_cmp(&(raw[a] - raw[a].floor())).then(a.cmp(&b)));
    if assigned <= total {
        for &i in order.iter().cycle().take(total - assigned) {
            out[i] += 1;
        }
    } else {
        // only reachable when weights sum above one
        let mut excess = assigned - total;
        for &i in order.iter().rev() {
            while excess > 0 && out[i] > 0 {
                out[i] -= 1;
                excess -= 1;
            }
        }
    }
    out
}

/// Draws `counts[i]` samples from each alternative in index order.
pub fn draw_static<R: Rng + ?Sized>(scenario: &Scenario, counts: &[usize], rng: &mut R) -> SampleStore {
    let mut store = SampleStore::new(scenario.k());
    let mut buf = Vec::new();
    for (i, &n) in counts.iter().enumerate() {
        buf.clear();
        buf.extend((0..n).map(|_| scenario.alternatives[i].sample(rng)));
        store.extend(i, &buf);
    }
    store
}

/// Static policy: `α_i T` samples per alternative (largest-remainder rounding),
/// then the selection rule at budget `T`.
pub fn run_static<R: Rng + ?Sized>(
    scenario: &Scenario,
    alpha: &AllocationVector,
    budget: usize,
    rule: &SelectionRule,
    params: &PolicyParams,
    rng: &mut R,
) -> Result<RunResult> {
    if alpha.len() != scenario.k() {
        return Err(Error::DimensionMismatch { expected: scenario.k(), got: alpha.len() });
    }
    let counts = largest_remainder(alpha.as_slice(), budget);
    if let Some(i) = counts.iter().position(|&c| c == 0) {
        return Err(Error::InvalidParameter(format!("alternative {i} receives no samples but the rule needs it")));
    }
    let store = draw_static(scenario, &counts, rng);
    let scores = selection_scores(&store, rule, params, params.delta, budget)?;
    let selected = argmin(&scores);
    Ok(RunResult { selected, false_selection: selected != scenario.best_index, counts, trajectory: None })
}

/// Per-batch target computation for a batched policy.
trait BatchTarget {
    /// Returns `(α̂_t, estimates, δ used, Ĝ_t(α_t))`.
    fn target(
        &mut self,
        store: &SampleStore,
        t: usize,
        alpha_t: &[f64],
    ) -> Result<(AllocationVector, Vec<f64>, f64, f64)>;
}

struct TiroTarget<'a> {
    params: &'a PolicyParams,
    forced: Option<&'a [f64]>,
}

impl BatchTarget for TiroTarget<'_> {
    fn target(
        &mut self,
        store: &SampleStore,
        t: usize,
        alpha_t: &[f64],
    ) -> Result<(AllocationVector, Vec<f64>, f64, f64)> {
        let delta = self.params.delta;
        let betas = match self.forced {
            Some(b) => b.to_vec(),
            None => store.tail_indices(&self.params.threshold_rule(delta), t)?,
        };
        let inst = RateInstance::new(betas.clone())?;
        let g = rate_g(alpha_t, &inst)?;
        let opt = maximize_rate(&inst, self.params.solver_tol, self.params.solver_max_iter);
        Ok((opt.alpha, betas, delta, g))
    }
}

struct ItiroTarget<'a> {
    params: &'a PolicyParams,
    budget: usize,
    delta: f64,
}

impl BatchTarget for ItiroTarget<'_> {
    fn target(
        &mut self,
        store: &SampleStore,
        t: usize,
        alpha_t: &[f64],
    ) -> Result<(AllocationVector, Vec<f64>, f64, f64)> {
        let p = self.params;
        let score_at = |delta: f64| -> Result<(f64, RateInstance, f64)> {
            let betas = store.tail_indices(&p.threshold_rule(delta), t)?;
            let inst = RateInstance::new(betas)?;
            let g = rate_g(alpha_t, &inst)?;
            Ok(((self.budget as f64).powf(delta) * g, inst, g))
        };
        let clamp = |d: f64| d.clamp(p.delta_lo, p.delta_hi);
        let mut best_delta = self.delta;
        let (mut best_score, mut best_inst, mut best_g) = score_at(best_delta)?;
        for cand in [clamp(self.delta - p.delta_step), clamp(self.delta + p.delta_step)] {
            if cand == self.delta {
                continue;
            }
            let (score, inst, g) = score_at(cand)?;
            if score > best_score {
                best_delta = cand;
                best_score = score;
                best_inst = inst;
                best_g = g;
            }
        }
        self.delta = best_delta;
        let opt = maximize_rate(&best_inst, p.solver_tol, p.solver_max_iter);
        Ok((opt.alpha, best_inst.betas().to_vec(), best_delta, best_g))
    }
}

struct GjTarget<'a> {
    params: &'a PolicyParams,
    nu: f64,
}

/// Exceedance frequencies clamped into `[1/(2N), 1 − 1/(2N)]`.
pub fn clamped_exceedance_probs(store: &SampleStore, nu: f64) -> Result<Vec<f64>> {
    (0..store.k())
        .map(|i| {
            let n = store.count(i) as f64;
            let lo = 0.5 / n;
            store.tail_prob(i, nu).map(|p| p.clamp(lo, 1.0 - lo))
        })
        .collect()
}

impl BatchTarget for GjTarget<'_> {
    fn target(
        &mut self,
        store: &SampleStore,
        _t: usize,
        alpha_t: &[f64],
    ) -> Result<(AllocationVector, Vec<f64>, f64, f64)> {
        let rho = clamped_exceedance_probs(store, self.nu)?;
        let best = argmin(&rho);
        let g = gj_rate(alpha_t, &rho, best)?;
        let opt = maximize_gj_rate(&rho, best, self.params.solver_tol, self.params.solver_max_iter)?;
        Ok((opt.alpha, rho, self.params.delta, g))
    }
}

/// Shared warm-up plus batch loop. Returns the final store and trajectory.
fn run_batched<R: Rng + ?Sized>(
    scenario: &Scenario,
    budget: usize,
    params: &PolicyParams,
    target: &mut dyn BatchTarget,
    record: bool,
    rng: &mut R,
) -> Result<(SampleStore, Option<Vec<BatchRecord>>)> {
    let k = scenario.k();
    params.check_budget(k, budget)?;
    let mut store = SampleStore::new(k);
    for _ in 0..params.n0 {
        for (i, alt) in scenario.alternatives.iter().enumerate() {
            store.push(i, alt.sample(rng));
        }
    }
    let mut t = k * params.n0;
    let mut trajectory = record.then(Vec::new);
    let mut buf = Vec::with_capacity(params.m);
    while t < budget {
        let m = params.m.min(budget - t);
        let counts = store.counts();
        let alpha_t: Vec<f64> = counts.iter().map(|&c| c as f64 / t as f64).collect();
        let (alpha_hat, estimates, delta, g_hat) = target.target(&store, t, &alpha_t)?;
        let (tf, mf) = (t as f64, m as f64);
        let desired: Vec<f64> = (0..k).map(|i| ((tf + mf) * alpha_hat[i] - tf * alpha_t[i]) / mf).collect();
        let alpha_bar = project_simplex(&desired);
        let split = largest_remainder(alpha_bar.as_slice(), m);
        for (i, &mi) in split.iter().enumerate() {
            if mi == 0 {
                continue;
            }
            buf.clear();
            buf.extend((0..mi).map(|_| scenario.alternatives[i].sample(rng)));
            store.extend(i, &buf);
        }
        if let Some(tr) = trajectory.as_mut() {
            tr.push(BatchRecord { t, alpha: alpha_t, estimates, delta, g_hat, batch: split });
        }
        t += m;
    }
    Ok((store, trajectory))
}

fn finish(
    scenario: &Scenario,
    selected: usize,
    store: &SampleStore,
    trajectory: Option<Vec<BatchRecord>>,
) -> RunResult {
    RunResult { selected, false_selection: selected != scenario.best_index, counts: store.counts(), trajectory }
}

/// TIRO: rate-optimal tracking with selection by the smallest ratio estimate.
pub fn run_tiro<R: Rng + ?Sized>(
    scenario: &Scenario,
    budget: usize,
    params: &PolicyParams,
    opts: &RunOptions,
    rng: &mut R,
) -> Result<RunResult> {
    if let Some(b) = &opts.forced_betas {
        if b.len() != scenario.k() {
            return Err(Error::DimensionMismatch { expected: scenario.k(), got: b.len() });
        }
    }
    let mut target = TiroTarget { params, forced: opts.forced_betas.as_deref() };
    let (store, trajectory) = run_batched(scenario, budget, params, &mut target, opts.record_trace, rng)?;
    let betas = store.tail_indices(&params.threshold_rule(params.delta), budget)?;
    Ok(finish(scenario, argmin(&betas), &store, trajectory))
}

/// I-TIRO: TIRO allocation with the threshold exponent chosen each batch by a
/// three-point local search on `T^δ Ĝ_t(α_t)`, and selection by p̂ (threshold
/// measures) or q̂ (quantile measures) at `nu`.
pub fn run_itiro<R: Rng + ?Sized>(
    scenario: &Scenario,
    budget: usize,
    nu: f64,
    risk: RiskKind,
    params: &PolicyParams,
    opts: &RunOptions,
    rng: &mut R,
) -> Result<RunResult> {
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(Error::InvalidParameter(format!("nu must be positive, got {nu}")));
    }
    let mut target = ItiroTarget { params, budget, delta: params.delta0 };
    let (store, trajectory) = run_batched(scenario, budget, params, &mut target, opts.record_trace, rng)?;
    let rule =
        if risk.is_threshold_based() { SelectionRule::MinPotProb { nu } } else { SelectionRule::MinPotQuantile { nu } };
    let scores = selection_scores(&store, &rule, params, target.delta, budget)?;
    Ok(finish(scenario, argmin(&scores), &store, trajectory))
}

/// GJ benchmark: the batch skeleton driven by the Bernoulli exceedance rate,
/// selection by the smallest raw exceedance frequency at `nu`.
pub fn run_gj<R: Rng + ?Sized>(
    scenario: &Scenario,
    budget: usize,
    nu: f64,
    params: &PolicyParams,
    opts: &RunOptions,
    rng: &mut R,
) -> Result<RunResult> {
    let mut target = GjTarget { params, nu };
    let (store, trajectory) = run_batched(scenario, budget, params, &mut target, opts.record_trace, rng)?;
    let rho = (0..store.k()).map(|i| store.tail_prob(i, nu)).collect::<Result<Vec<_>>>()?;
    Ok(finish(scenario, argmin(&rho), &store, trajectory))
}
