//! Monte Carlo estimation of the probability of false selection (PFS):
//! method × budget sweeps over independent seeded trials, aggregated into
//! curves and persisted as CSV.
//!
//! Every trial owns a ChaCha stream seeded from `(base_seed, stream key, T,
//! trial)`, so a cell can be reproduced in isolation and results never depend
//! on the worker count.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distmodel::{find_scenario, Scenario};
use crate::error::{Error, Result};
use crate::estimators::RiskKind;
use crate::policies::{
    draw_static, largest_remainder, run_gj, run_itiro, run_static, run_tiro, selection_scores, PolicyParams,
    RunOptions, SelectionRule,
};
use crate::rateopt::AllocationVector;

pub const CSV_HEADER: &str = "method,T,trials,false_count,pfs,stderr";

/// How the rarity parameter ν is obtained for a scenario and budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NuSpec {
    /// `coeff · T^exponent`.
    PowerOfT {
        coeff: f64,
        exponent: f64,
    },
    /// `μ₁ + c σ₁` from the first alternative's mean and standard deviation.
    MeanPlusSigmas {
        c: f64,
    },
    /// A confidence level `p`, mapped to the rarity `1/(1 − p)`.
    QuantileLevel {
        p: f64,
    },
    Fixed {
        value: f64,
    },
}

impl NuSpec {
    /// Parses the compact CLI form: `pow:COEFF:EXP`, `mu+Cs`, `q:P` or a number.
    pub fn parse(s: &str) -> Result<Self> {
        let num =
            |t: &str| t.trim().parse::<f64>().map_err(|_| Error::Config(format!("bad number `{t}` in nu spec `{s}`")));
        if let Some(rest) = s.strip_prefix("pow:") {
            let (c, e) =
                rest.split_once(':').ok_or_else(|| Error::Config(format!("expected pow:COEFF:EXP, got `{s}`")))?;
            Ok(NuSpec::PowerOfT { coeff: num(c)?, exponent: num(e)? })
        } else if let Some(rest) = s.strip_prefix("mu+") {
            Ok(NuSpec::MeanPlusSigmas { c: num(rest.trim_end_matches('s'))? })
        } else if let Some(rest) = s.strip_prefix("q:") {
            Ok(NuSpec::QuantileLevel { p: num(rest)? })
        } else {
            Ok(NuSpec::Fixed { value: num(s)? })
        }
    }

    pub fn describe(&self) -> String {
        match self {
            NuSpec::PowerOfT { coeff, exponent } => format!("nu = {coeff} * T^{exponent}"),
            NuSpec::MeanPlusSigmas { c } => format!("nu = mu1 + {c} sigma1"),
            NuSpec::QuantileLevel { p } => format!("confidence level {p}, rarity nu = 1/(1-{p})"),
            NuSpec::Fixed { value } => format!("nu = {value}"),
        }
    }
}

/// Numeric ν for a scenario at budget `budget`.
pub fn resolve_nu(spec: &NuSpec, scenario: &Scenario, budget: usize) -> Result<f64> {
    let nu = match *spec {
        NuSpec::PowerOfT { coeff, exponent } => coeff * (budget as f64).powf(exponent),
        NuSpec::MeanPlusSigmas { c } => {
            let first = &scenario.alternatives[0];
            let sd = first.std_dev().map_err(|e| Error::Config(format!("{}: {e}", scenario.name)))?;
            first.mean()? + c * sd
        }
        NuSpec::QuantileLevel { p } => {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::Config(format!("quantile level must lie in (0,1), got {p}")));
            }
            1.0 / (1.0 - p)
        }
        NuSpec::Fixed { value } => value,
    };
    if nu > 0.0 && nu.is_finite() {
        Ok(nu)
    } else {
        Err(Error::Config(format!("resolved nu = {nu} is not a positive number")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Tiro,
    Itiro,
    Gj,
    /// Static allocation (equal unless `alpha` is given) with a chosen rule.
    Static,
}

/// Selection rules addressable from configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    BetaHat,
    PHat,
    QHat,
    TailProb,
    ExcessLoss,
    Var,
    Cvar,
}

impl RuleKind {
    pub const ALL: [RuleKind; 7] = [
        RuleKind::BetaHat,
        RuleKind::PHat,
        RuleKind::QHat,
        RuleKind::TailProb,
        RuleKind::ExcessLoss,
        RuleKind::Var,
        RuleKind::Cvar,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RuleKind::BetaHat => "beta_hat",
            RuleKind::PHat => "p_hat",
            RuleKind::QHat => "q_hat",
            RuleKind::TailProb => "tail_prob",
            RuleKind::ExcessLoss => "excess_loss",
            RuleKind::Var => "var",
            RuleKind::Cvar => "cvar",
        }
    }

    pub fn needs_nu(self) -> bool {
        !matches!(self, RuleKind::BetaHat)
    }

    pub fn to_rule(self, nu: f64) -> SelectionRule {
        match self {
            RuleKind::BetaHat => SelectionRule::MinTailIndex,
            RuleKind::PHat => SelectionRule::MinPotProb { nu },
            RuleKind::QHat => SelectionRule::MinPotQuantile { nu },
            RuleKind::TailProb => SelectionRule::MinStandard { risk: RiskKind::TailProb, nu },
            RuleKind::ExcessLoss => SelectionRule::MinStandard { risk: RiskKind::ExcessLoss, nu },
            RuleKind::Var => SelectionRule::MinStandard { risk: RiskKind::ValueAtRisk, nu },
            RuleKind::Cvar => SelectionRule::MinStandard { risk: RiskKind::ConditionalValueAtRisk, nu },
        }
    }
}

impl std::str::FromStr for RuleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RuleKind::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown selection rule `{s}`")))
    }
}

impl std::str::FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tiro" => Ok(PolicyKind::Tiro),
            "itiro" => Ok(PolicyKind::Itiro),
            "gj" => Ok(PolicyKind::Gj),
            "static" => Ok(PolicyKind::Static),
            _ => Err(Error::InvalidParameter(format!("unknown policy `{s}` (tiro, itiro, gj, static)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSpec {
    pub id: String,
    pub policy: PolicyKind,
    /// Selection rule for static methods.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule: Option<RuleKind>,
    /// Risk measure family for I-TIRO's final selection.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub risk: Option<RiskKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<NuSpec>,
    /// Static allocation; equal when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentMode {
    /// Independent runs per method.
    #[default]
    Policies,
    /// One static sampling pass per trial shared by every (static) method.
    SharedSamples,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scenario: String,
    pub methods: Vec<MethodSpec>,
    pub budgets: Vec<usize>,
    pub trials: usize,
    pub base_seed: u64,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    /// CSV output path; a `.meta.json` sidecar is written next to it.
    pub output: String,
    #[serde(default)]
    pub mode: ExperimentMode,
    #[serde(default)]
    pub params: PolicyParams,
}

fn default_parallelism() -> usize {
    1
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let scenario = find_scenario(&self.scenario)?;
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.budgets.is_empty() || self.budgets.windows(2).any(|w| w[0] >= w[1]) {
            return bad("budgets must be nonempty and strictly increasing".into());
        }
        if self.methods.is_empty() {
            return bad("no methods configured".into());
        }
        if self.parallelism == 0 {
            return bad("parallelism must be at least 1".into());
        }
        self.params.validate()?;
        let mut seen = HashSet::new();
        for m in &self.methods {
            if m.id.is_empty() || m.id.contains([',', '\n', '"']) {
                return bad(format!("method id `{}` must be nonempty and CSV-safe", m.id));
            }
            if !seen.insert(m.id.as_str()) {
                return bad(format!("duplicate method id `{}`", m.id));
            }
            let needs_nu = match m.policy {
                PolicyKind::Tiro => false,
                PolicyKind::Itiro | PolicyKind::Gj => true,
                PolicyKind::Static => {
                    let rule = m.rule.ok_or_else(|| Error::Config(format!("static method `{}` needs a rule", m.id)))?;
                    rule.needs_nu()
                }
            };
            if needs_nu && m.nu.is_none() {
                return bad(format!("method `{}` needs a nu spec", m.id));
            }
            if m.policy == PolicyKind::Itiro && m.risk.is_none() {
                return bad(format!("method `{}` needs a risk measure", m.id));
            }
            if let Some(a) = &m.alpha {
                AllocationVector::new(a.clone())?;
                if a.len() != scenario.k() {
                    return bad(format!("method `{}` allocation has the wrong length", m.id));
                }
            }
            if self.mode == ExperimentMode::SharedSamples && m.policy != PolicyKind::Static {
                return bad(format!("shared-sample mode only supports static methods, `{}` is not", m.id));
            }
            if let Some(nu) = &m.nu {
                for &t in &self.budgets {
                    resolve_nu(nu, &scenario, t)?;
                }
            }
            if m.policy != PolicyKind::Static {
                for &t in &self.budgets {
                    if t < scenario.k() * self.params.n0 {
                        return bad(format!("budget {t} is below the warm-up size for `{}`", m.id));
                    }
                }
            }
        }
        if self.mode == ExperimentMode::SharedSamples {
            let first = &self.methods[0].alpha;
            if self.methods.iter().any(|m| &m.alpha != first) {
                return bad("shared-sample methods must use the same allocation".into());
            }
        }
        Ok(())
    }

    pub fn output_path(&self) -> PathBuf {
        PathBuf::from(&self.output)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PfsRow {
    #[serde(rename = "T")]
    pub budget: usize,
    /// Successful trials.
    pub trials: usize,
    pub false_count: usize,
    pub pfs: f64,
    pub stderr: f64,
    pub failed: usize,
    /// Standard error is at least ten times smaller than the estimate.
    pub precise: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub errors: Vec<String>,
}

impl PfsRow {
    pub fn new(budget: usize, trials: usize, false_count: usize, failed: usize, errors: Vec<String>) -> Self {
        let (pfs, stderr) = pfs_and_stderr(false_count, trials);
        Self { budget, trials, false_count, pfs, stderr, failed, precise: 10.0 * stderr <= pfs, errors }
    }
}

/// Frequency estimate and its binomial standard error.
pub fn pfs_and_stderr(false_count: usize, trials: usize) -> (f64, f64) {
    if trials == 0 {
        return (f64::NAN, f64::NAN);
    }
    let p = false_count as f64 / trials as f64;
    (p, (p * (1.0 - p) / trials as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PfsCurve {
    pub method: String,
    pub rows: Vec<PfsRow>,
    /// False when some cell lost at least 1% of its trials to errors.
    pub valid: bool,
}

impl PfsCurve {
    pub fn row(&self, budget: usize) -> Option<&PfsRow> {
        self.rows.iter().find(|r| r.budget == budget)
    }
}

const MAX_RECORDED_ERRORS: usize = 5;

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of one trial's random stream.
pub fn trial_seed(base_seed: u64, stream: &str, budget: usize, trial: usize) -> u64 {
    [fnv1a(stream), budget as u64, trial as u64]
        .iter()
        .fold(splitmix64(base_seed), |h, &x| splitmix64(h ^ splitmix64(x)))
}

pub fn trial_rng(base_seed: u64, stream: &str, budget: usize, trial: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(trial_seed(base_seed, stream, budget, trial))
}

const SHARED_STREAM: &str = "__shared__";

fn run_one(
    scenario: &Scenario,
    method: &MethodSpec,
    budget: usize,
    params: &PolicyParams,
    rng: &mut ChaCha8Rng,
) -> Result<bool> {
    let nu = method.nu.as_ref().map(|n| resolve_nu(n, scenario, budget)).transpose()?;
    let opts = RunOptions::default();
    let res = match method.policy {
        PolicyKind::Tiro => run_tiro(scenario, budget, params, &opts, rng)?,
        PolicyKind::Itiro => {
            let risk = method.risk.ok_or_else(|| Error::Config("missing risk".into()))?;
            run_itiro(scenario, budget, nu.expect("validated"), risk, params, &opts, rng)?
        }
        PolicyKind::Gj => run_gj(scenario, budget, nu.expect("validated"), params, &opts, rng)?,
        PolicyKind::Static => {
            let alpha = static_alpha(method, scenario.k())?;
            let rule = method.rule.expect("validated").to_rule(nu.unwrap_or(f64::NAN));
            run_static(scenario, &alpha, budget, &rule, params, rng)?
        }
    };
    Ok(res.false_selection)
}

fn static_alpha(method: &MethodSpec, k: usize) -> Result<AllocationVector> {
    match &method.alpha {
        Some(a) => AllocationVector::new(a.clone()),
        None => Ok(AllocationVector::equal(k)),
    }
}

fn build_pool(parallelism: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))
}

fn aggregate(budget: usize, requested: usize, outcomes: impl Iterator<Item = Result<bool>>) -> (PfsRow, bool) {
    let (mut ok, mut fals, mut failed) = (0, 0, 0);
    let mut errors = Vec::new();
    for o in outcomes {
        match o {
            Ok(f) => {
                ok += 1;
                fals += f as usize;
            }
            Err(e) => {
                failed += 1;
                if errors.len() < MAX_RECORDED_ERRORS {
                    errors.push(e.to_string());
                }
            }
        }
    }
    let valid = (failed as f64) < 0.01 * requested as f64;
    (PfsRow::new(budget, ok, fals, failed, errors), valid)
}

/// Runs every configured method at every budget.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<PfsCurve>> {
    cfg.validate()?;
    if cfg.mode == ExperimentMode::SharedSamples {
        return compare_selection_criteria(cfg);
    }
    let scenario = find_scenario(&cfg.scenario)?;
    let pool = build_pool(cfg.parallelism)?;
    let mut curves = Vec::with_capacity(cfg.methods.len());
    for method in &cfg.methods {
        let mut rows = Vec::with_capacity(cfg.budgets.len());
        let mut valid = true;
        for &budget in &cfg.budgets {
            let outcomes: Vec<Result<bool>> = pool.install(|| {
                (0..cfg.trials)
                    .into_par_iter()
                    .map(|trial| {
                        let mut rng = trial_rng(cfg.base_seed, &method.id, budget, trial);
                        run_one(&scenario, method, budget, &cfg.params, &mut rng)
                    })
                    .collect()
            });
            let (row, ok) = aggregate(budget, cfg.trials, outcomes.into_iter());
            valid &= ok;
            rows.push(row);
        }
        curves.push(PfsCurve { method: method.id.clone(), rows, valid });
    }
    Ok(curves)
}

/// False-selection event in the `≥` sense: the best alternative's score is
/// not strictly below every competitor's.
pub fn is_false_selection(scores: &[f64], best: usize) -> bool {
    let sb = scores[best];
    scores.iter().enumerate().any(|(i, &s)| i != best && sb >= s)
}

/// Evaluates every (static) method's selection rule on one shared sampling
/// pass per trial. A trial counts as a false selection for a rule when the
/// true best alternative's estimate is not strictly the smallest.
pub fn compare_selection_criteria(cfg: &ExperimentConfig) -> Result<Vec<PfsCurve>> {
    let scenario = find_scenario(&cfg.scenario)?;
    if cfg.methods.iter().any(|m| m.policy != PolicyKind::Static) {
        return Err(Error::Config("shared-sample comparison needs static methods".into()));
    }
    let alpha = static_alpha(&cfg.methods[0], scenario.k())?;
    let pool = build_pool(cfg.parallelism)?;
    let nm = cfg.methods.len();
    let mut rows: Vec<Vec<PfsRow>> = vec![Vec::new(); nm];
    let mut valid = vec![true; nm];
    for &budget in &cfg.budgets {
        let counts = largest_remainder(alpha.as_slice(), budget);
        let rules = cfg
            .methods
            .iter()
            .map(|m| {
                let nu = m.nu.as_ref().map(|n| resolve_nu(n, &scenario, budget)).transpose()?;
                Ok(m.rule.expect("validated").to_rule(nu.unwrap_or(f64::NAN)))
            })
            .collect::<Result<Vec<_>>>()?;
        let outcomes: Vec<Vec<Result<bool>>> = pool.install(|| {
            (0..cfg.trials)
                .into_par_iter()
                .map(|trial| {
                    let mut rng = trial_rng(cfg.base_seed, SHARED_STREAM, budget, trial);
                    let store = draw_static(&scenario, &counts, &mut rng);
                    rules
                        .iter()
                        .map(|rule| {
                            selection_scores(&store, rule, &cfg.params, cfg.params.delta, budget)
                                .map(|s| is_false_selection(&s, scenario.best_index))
                        })
                        .collect()
                })
                .collect()
        });
        for j in 0..nm {
            let (row, ok) = aggregate(budget, cfg.trials, outcomes.iter().map(|o| o[j].clone()));
            valid[j] &= ok;
            rows[j].push(row);
        }
    }
    Ok(cfg
        .methods
        .iter()
        .zip(rows)
        .zip(valid)
        .map(|((m, rows), valid)| PfsCurve { method: m.id.clone(), rows, valid })
        .collect())
}

/// CSV body with header `method,T,trials,false_count,pfs,stderr`.
pub fn curves_to_csv(curves: &[PfsCurve]) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for c in curves {
        for r in &c.rows {
            let _ = writeln!(out, "{},{},{},{},{},{}", c.method, r.budget, r.trials, r.false_count, r.pfs, r.stderr);
        }
    }
    out
}

#[derive(Debug, Serialize)]
struct MethodMeta<'a> {
    id: &'a str,
    policy: PolicyKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    nu_spec: Option<String>,
    resolved_nu: Vec<(usize, f64)>,
    valid: bool,
    rows: &'a [PfsRow],
}

#[derive(Debug, Serialize)]
struct ExperimentMeta<'a> {
    scenario: &'a str,
    mode: ExperimentMode,
    trials: usize,
    base_seed: u64,
    params: &'a PolicyParams,
    methods: Vec<MethodMeta<'a>>,
}

/// Metadata sidecar: resolved ν values and their interpretation, per-row
/// precision flags and failure messages.
pub fn curves_meta_json(cfg: &ExperimentConfig, curves: &[PfsCurve]) -> Result<String> {
    let scenario = find_scenario(&cfg.scenario)?;
    let methods = cfg
        .methods
        .iter()
        .zip(curves)
        .map(|(m, c)| {
            let resolved_nu = match &m.nu {
                Some(n) => cfg
                    .budgets
                    .iter()
                    .map(|&t| resolve_nu(n, &scenario, t).map(|v| (t, v)))
                    .collect::<Result<Vec<_>>>()?,
                None => Vec::new(),
            };
            Ok(MethodMeta {
                id: &m.id,
                policy: m.policy,
                nu_spec: m.nu.map(|n| n.describe()),
                resolved_nu,
                valid: c.valid,
                rows: &c.rows,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let meta = ExperimentMeta {
        scenario: &cfg.scenario,
        mode: cfg.mode,
        trials: cfg.trials,
        base_seed: cfg.base_seed,
        params: &cfg.params,
        methods,
    };
    Ok(serde_json::to_string_pretty(&meta)? + "\n")
}

/// Writes the CSV and its `.meta.json` sidecar; returns the CSV path.
pub fn write_outputs(cfg: &ExperimentConfig, curves: &[PfsCurve], csv_path: &Path) -> Result<PathBuf> {
    if let Some(dir) = csv_path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    std::fs::write(csv_path, curves_to_csv(curves))?;
    let meta_path = csv_path.with_extension("meta.json");
    std::fs::write(meta_path, curves_meta_json(cfg, curves)?)?;
    Ok(csv_path.to_path_buf())
}

/// One parsed CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub method: String,
    pub budget: usize,
    pub trials: usize,
    pub false_count: usize,
    pub pfs: f64,
    pub stderr: f64,
}

/// Parses a harness CSV, checking the header and every field.
pub fn parse_curves_csv(text: &str) -> Result<Vec<CsvRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == CSV_HEADER => {}
        other => return Err(Error::Config(format!("unexpected CSV header {other:?}"))),
    }
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(Error::Config(format!("line {}: expected 6 fields, got {}", n + 2, f.len())));
        }
        let err = |what: &str| Error::Config(format!("line {}: bad {what}", n + 2));
        rows.push(CsvRow {
            method: f[0].to_string(),
            budget: f[1].parse().map_err(|_| err("T"))?,
            trials: f[2].parse().map_err(|_| err("trials"))?,
            false_count: f[3].parse().map_err(|_| err("false_count"))?,
            pfs: f[4].parse().map_err(|_| err("pfs"))?,
            stderr: f[5].parse().map_err(|_| err("stderr"))?,
        });
    }
    if rows.is_empty() {
        return Err(Error::Config("CSV has no data rows".into()));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(methods: Vec<MethodSpec>) -> ExperimentConfig {
        ExperimentConfig {
            scenario: "setup1_pareto".into(),
            methods,
            budgets: vec![1000, 2000],
            trials: 4,
            base_seed: 1,
            parallelism: 1,
            output: "out.csv".into(),
            mode: ExperimentMode::Policies,
            params: PolicyParams::default(),
        }
    }

    fn tiro() -> MethodSpec {
        MethodSpec { id: "tiro".into(), policy: PolicyKind::Tiro, rule: None, risk: None, nu: None, alpha: None }
    }

    #[test]
    fn resolve_nu_examples() {
        let sc = find_scenario("setup1_pareto").unwrap();
        let nu = resolve_nu(&NuSpec::PowerOfT { coeff: 0.2, exponent: 0.375 }, &sc, 10_000).unwrap();
        assert!((nu - 6.32456).abs() < 1e-5);
        assert!((resolve_nu(&NuSpec::QuantileLevel { p: 0.99 }, &sc, 1).unwrap() - 100.0).abs() < 1e-9);
        let kappa: f64 = 1.0 / 0.225;
        let tau = 0.775;
        let sd = (kappa * tau * tau / ((kappa - 1.0).powi(2) * (kappa - 2.0))).sqrt();
        let nu = resolve_nu(&NuSpec::MeanPlusSigmas { c: 2.0 }, &sc, 1).unwrap();
        assert!((nu - (1.0 + 2.0 * sd)).abs() < 1e-12);
        let t = find_scenario("setup1_student_t").unwrap();
        assert!(resolve_nu(&NuSpec::MeanPlusSigmas { c: 2.0 }, &t, 1).is_ok());
        assert!(resolve_nu(&NuSpec::QuantileLevel { p: 1.0 }, &sc, 1).is_err());
        assert!(resolve_nu(&NuSpec::Fixed { value: -1.0 }, &sc, 1).is_err());
    }

    #[test]
    fn infinite_sigma_is_a_config_error() {
        use crate::distmodel::DistributionSpec;
        let sc = Scenario::new(
            "x",
            vec![DistributionSpec::pareto(1.5, 1.0).unwrap(), DistributionSpec::pareto(1.2, 1.0).unwrap()],
        )
        .unwrap();
        assert!(matches!(resolve_nu(&NuSpec::MeanPlusSigmas { c: 2.0 }, &sc, 1), Err(Error::Config(_))));
    }

    #[test]
    fn names_parse_back() {
        for r in RuleKind::ALL {
            assert_eq!(r.as_str().parse::<RuleKind>().unwrap(), r);
            assert_eq!(serde_json::to_string(&r).unwrap(), format!("\"{}\"", r.as_str()));
        }
        assert_eq!("gj".parse::<PolicyKind>().unwrap(), PolicyKind::Gj);
        assert!("x".parse::<PolicyKind>().is_err());
        assert_eq!("cvar".parse::<RiskKind>().unwrap(), RiskKind::ConditionalValueAtRisk);
    }

    #[test]
    fn nu_spec_parse() {
        assert_eq!(NuSpec::parse("pow:0.2:0.375").unwrap(), NuSpec::PowerOfT { coeff: 0.2, exponent: 0.375 });
        assert_eq!(NuSpec::parse("mu+3s").unwrap(), NuSpec::MeanPlusSigmas { c: 3.0 });
        assert_eq!(NuSpec::parse("q:0.99").unwrap(), NuSpec::QuantileLevel { p: 0.99 });
        assert_eq!(NuSpec::parse("12.5").unwrap(), NuSpec::Fixed { value: 12.5 });
        assert!(NuSpec::parse("pow:x").is_err());
    }

    #[test]
    fn pfs_arithmetic() {
        let (p, se) = pfs_and_stderr(100, 1000);
        assert_eq!(p, 0.1);
        assert!((se - 0.009486833).abs() < 1e-9);
        assert_eq!(pfs_and_stderr(1, 1).0, 1.0);
        assert_eq!(pfs_and_stderr(0, 1), (0.0, 0.0));
    }

    #[test]
    fn false_selection_counts_ties() {
        assert!(is_false_selection(&[0.0, 0.0, 0.1], 0));
        assert!(!is_false_selection(&[0.0, 0.01, 0.1], 0));
        assert!(is_false_selection(&[0.2, 0.1], 0));
    }

    #[test]
    fn config_validation() {
        assert!(cfg(vec![tiro()]).validate().is_ok());
        let mut c = cfg(vec![tiro()]);
        c.trials = 0;
        assert!(c.validate().is_err());
        let mut c = cfg(vec![tiro()]);
        c.budgets = vec![2000, 1000];
        assert!(c.validate().is_err());
        assert!(cfg(vec![tiro(), tiro()]).validate().is_err());
        let gj = MethodSpec { id: "gj".into(), policy: PolicyKind::Gj, ..tiro() };
        assert!(cfg(vec![gj]).validate().is_err());
        let mut c = cfg(vec![tiro()]);
        c.budgets = vec![999];
        assert!(c.validate().is_err());
        let mut c = cfg(vec![tiro()]);
        c.scenario = "nope".into();
        assert!(c.validate().is_err());
    }

    #[test]
    fn config_json_field_names() {
        let text = r#"{
            "scenario": "setup1_pareto",
            "methods": [
                {"id": "tiro", "policy": "tiro"},
                {"id": "gj", "policy": "gj", "nu": {"kind": "mean_plus_sigmas", "c": 2}},
                {"id": "itiro", "policy": "itiro", "risk": "tail_prob", "nu": {"kind": "mean_plus_sigmas", "c": 3}}
            ],
            "budgets": [1000, 2000],
            "trials": 10,
            "base_seed": 42,
            "parallelism": 2,
            "output": "x.csv"
        }"#;
        let c = ExperimentConfig::from_json(text).unwrap();
        assert_eq!(c.params, PolicyParams::default());
        assert_eq!(c.mode, ExperimentMode::Policies);
        assert!(ExperimentConfig::from_json(&text.replace("\"trials\": 10", "\"trials\": 0")).is_err());
    }

    #[test]
    fn seeds_are_distinct_and_stable() {
        let a = trial_seed(1, "tiro", 1000, 0);
        assert_eq!(a, trial_seed(1, "tiro", 1000, 0));
        assert_ne!(a, trial_seed(1, "tiro", 1000, 1));
        assert_ne!(a, trial_seed(1, "gj", 1000, 0));
        assert_ne!(a, trial_seed(1, "tiro", 2000, 0));
        assert_ne!(a, trial_seed(2, "tiro", 1000, 0));
    }

    #[test]
    fn single_trial_pfs_is_binary() {
        let mut c = cfg(vec![tiro()]);
        c.trials = 1;
        c.budgets = vec![1000];
        let curves = run_experiment(&c).unwrap();
        assert!(curves[0].rows[0].pfs == 0.0 || curves[0].rows[0].pfs == 1.0);
    }

    #[test]
    fn csv_round_trip_and_schema_errors() {
        let curves = vec![PfsCurve { method: "m".into(), rows: vec![PfsRow::new(100, 10, 3, 0, vec![])], valid: true }];
        let text = curves_to_csv(&curves);
        assert!(text.starts_with("method,T,trials,false_count,pfs,stderr\n"));
        let rows = parse_curves_csv(&text).unwrap();
        assert_eq!(rows[0].false_count, 3);
        assert_eq!(rows[0].pfs, 0.3);
        assert!(parse_curves_csv(CSV_HEADER).is_err());
        assert!(parse_curves_csv("a,b\n1,2\n").is_err());
        assert!(parse_curves_csv(&format!("{CSV_HEADER}\nm,1,2,3\n")).is_err());
    }

    #[test]
    fn failed_cells_mark_curve_invalid() {
        let outcomes = (0..100).map(|i| if i == 0 { Err(Error::NoSamples(0)) } else { Ok(false) });
        let (row, valid) = aggregate(10, 100, outcomes);
        assert!(!valid);
        assert_eq!(row.failed, 1);
        assert_eq!(row.trials, 99);
        assert_eq!(row.errors.len(), 1);
        let (_, valid) = aggregate(10, 200, (0..200).map(|i| if i == 0 { Err(Error::NoSamples(0)) } else { Ok(true) }));
        assert!(valid);
    }
}
