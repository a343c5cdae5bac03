use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use tailselect::distmodel::{catalog_to_json, find_scenario, scenario_catalog};
use tailselect::harness::{
    parse_curves_csv, resolve_nu, run_experiment, write_outputs, ExperimentConfig, NuSpec, PolicyKind, RuleKind,
};
use tailselect::policies::{run_gj, run_itiro, run_static, run_tiro, PolicyParams, RunOptions, RunResult};
use tailselect::rateopt::{maximize_rate, pairwise_rate, RateInstance, DEFAULT_MAX_ITER, DEFAULT_TOL};
use tailselect::{AllocationVector, RiskKind};

use crate::plot::render_svg;
use crate::CliError;

pub const SEED_ENV: &str = "TAILSELECT_SEED";

type CmdResult = Result<u8, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn runtime(msg: impl Into<String>) -> CliError {
    CliError::Runtime(msg.into())
}

fn env_seed() -> Result<Option<u64>, CliError> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| usage(format!("{SEED_ENV}=`{v}` is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

pub fn scenarios(json: bool) -> CmdResult {
    let catalog = scenario_catalog();
    if json {
        print!("{}", catalog_to_json(&catalog)?);
        return Ok(0);
    }
    println!("{:<18} {:>3} {:>5} {:>6}  tail indices", "name", "k", "best", "tie");
    for sc in &catalog {
        let betas: Vec<String> = sc.tail_indices().iter().map(|b| format!("{b:.4}")).collect();
        let tie: Vec<String> = sc.tie_indices.iter().map(|i| i.to_string()).collect();
        println!("{:<18} {:>3} {:>5} {:>6}  {}", sc.name, sc.k(), sc.best_index, tie.join("/"), betas.join(" "));
    }
    Ok(0)
}

fn parse_betas(text: &str) -> Result<Vec<f64>, CliError> {
    let betas = text
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| usage(format!("`{t}` is not a number"))))
        .collect::<Result<Vec<_>, _>>()?;
    if betas.len() < 2 {
        return Err(usage("need at least two tail indices"));
    }
    if let Some(b) = betas.iter().find(|b| !(**b > 0.0 && b.is_finite())) {
        return Err(usage(format!("tail indices must be positive, got {b}")));
    }
    Ok(betas)
}

pub fn rateopt(betas: Option<&str>, scenario: Option<&str>) -> CmdResult {
    let betas = match (betas, scenario) {
        (Some(b), _) => parse_betas(b)?,
        (None, Some(name)) => find_scenario(name)?.tail_indices(),
        (None, None) => return Err(usage("give --betas or --scenario")),
    };
    let inst = RateInstance::new(betas.clone())?;
    let opt = maximize_rate(&inst, DEFAULT_TOL, DEFAULT_MAX_ITER);
    let alpha = opt.alpha.as_slice();
    let b = inst.best();
    println!("best alternative: {b} (beta = {})", betas[b]);
    println!("{:>4} {:>12} {:>14} {:>16}", "i", "beta", "alpha*", "pair rate");
    for (i, (&beta, &a)) in betas.iter().zip(alpha).enumerate() {
        let rate =
            if i == b { "-".to_string() } else { format!("{:.10}", pairwise_rate(alpha[b], a, betas[b], beta)?) };
        println!("{i:>4} {beta:>12.6} {a:>14.10} {rate:>16}");
    }
    println!("G* = {:.12}", opt.value);
    if opt.degenerate {
        eprintln!(
            "warning: several alternatives share the smallest tail index; the rate is zero and the allocation is equal"
        );
    } else if !opt.converged {
        eprintln!("warning: solver stopped after {} iterations without meeting the tolerance", opt.iterations);
    }
    Ok(0)
}

pub struct TraceArgs {
    pub scenario: String,
    pub policy: String,
    pub budget: usize,
    pub seed: Option<u64>,
    pub trace_out: Option<PathBuf>,
    pub nu: Option<String>,
    pub risk: String,
    pub rule: String,
    pub n0: Option<usize>,
    pub m: Option<usize>,
}

pub fn trace(args: TraceArgs) -> CmdResult {
    use rand::SeedableRng;

    let scenario = find_scenario(&args.scenario)?;
    let policy: PolicyKind = args.policy.parse()?;
    let risk: RiskKind = args.risk.parse()?;
    let rule: RuleKind = args.rule.parse()?;
    let mut params = PolicyParams::default();
    params.n0 = args.n0.unwrap_or(params.n0);
    params.m = args.m.unwrap_or(params.m);
    params.validate()?;
    let nu_spec = args.nu.as_deref().map(NuSpec::parse).transpose()?;
    let needs_nu = match policy {
        PolicyKind::Itiro | PolicyKind::Gj => true,
        PolicyKind::Static => rule.needs_nu(),
        PolicyKind::Tiro => false,
    };
    let nu = match (&nu_spec, needs_nu) {
        (Some(spec), _) => Some(resolve_nu(spec, &scenario, args.budget)?),
        (None, true) => return Err(usage(format!("policy `{}` needs --nu", args.policy))),
        (None, false) => None,
    };
    if let Some(out) = &args.trace_out {
        check_writable(out)?;
    }
    let seed = match args.seed {
        Some(s) => s,
        None => env_seed()?.unwrap_or(0),
    };
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let opts = RunOptions { record_trace: true, forced_betas: None };
    let res: RunResult = match policy {
        PolicyKind::Tiro => run_tiro(&scenario, args.budget, &params, &opts, &mut rng)?,
        PolicyKind::Itiro => run_itiro(&scenario, args.budget, nu.unwrap(), risk, &params, &opts, &mut rng)?,
        PolicyKind::Gj => run_gj(&scenario, args.budget, nu.unwrap(), &params, &opts, &mut rng)?,
        PolicyKind::Static => {
            let r = rule.to_rule(nu.unwrap_or(f64::NAN));
            run_static(&scenario, &AllocationVector::equal(scenario.k()), args.budget, &r, &params, &mut rng)?
        }
    };
    println!("scenario {} policy {} T {} seed {seed}", scenario.name, args.policy, args.budget);
    if let Some(v) = nu {
        println!("nu = {v}");
    }
    println!(
        "selected {} (best {}): {}",
        res.selected,
        scenario.best_index,
        if res.false_selection { "false selection" } else { "correct" }
    );
    let counts: Vec<String> = res.counts.iter().map(|c| c.to_string()).collect();
    println!("counts {}", counts.join(","));
    if let Some(out) = &args.trace_out {
        std::fs::write(out, trace_csv(&res, scenario.k())).map_err(|e| runtime(format!("{}: {e}", out.display())))?;
        println!("trace written to {}", out.display());
    }
    Ok(0)
}

fn trace_csv(res: &RunResult, k: usize) -> String {
    let mut out = String::from("t,delta,g_hat");
    for prefix in ["alpha", "estimate", "batch"] {
        for i in 0..k {
            let _ = write!(out, ",{prefix}_{i}");
        }
    }
    out.push('\n');
    for rec in res.trajectory.as_deref().unwrap_or_default() {
        let _ = write!(out, "{},{},{}", rec.t, rec.delta, rec.g_hat);
        for v in rec.alpha.iter().chain(&rec.estimates) {
            let _ = write!(out, ",{v}");
        }
        for v in &rec.batch {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

fn check_writable(path: &Path) -> Result<(), CliError> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() && !dir.is_dir() => {
            Err(usage(format!("output directory {} does not exist", dir.display())))
        }
        _ => Ok(()),
    }
}

pub fn experiment(config: &Path, out: Option<&Path>, workers: Option<usize>) -> CmdResult {
    let mut cfg = ExperimentConfig::load(config)?;
    if let Some(w) = workers {
        cfg.parallelism = w;
    }
    if let Some(seed) = env_seed()? {
        cfg.base_seed = seed;
    }
    let csv_path = match out {
        Some(dir) => {
            let name = cfg.output_path().file_name().map(PathBuf::from).unwrap_or_else(|| "pfs.csv".into());
            dir.join(name)
        }
        None => cfg.output_path(),
    };
    cfg.output = csv_path.to_string_lossy().into_owned();
    cfg.validate()?;
    eprintln!(
        "running {} method(s) x {} budget(s) x {} trials on {} worker(s)",
        cfg.methods.len(),
        cfg.budgets.len(),
        cfg.trials,
        cfg.parallelism
    );
    let curves = run_experiment(&cfg).map_err(|e| runtime(e.to_string()))?;
    write_outputs(&cfg, &curves, &csv_path).map_err(|e| runtime(e.to_string()))?;
    let last = *cfg.budgets.last().expect("validated");
    println!("{:<20} {:>8} {:>10} {:>10}", "method", "T", "pfs", "stderr");
    let mut all_valid = true;
    for c in &curves {
        let row = c.row(last).expect("every budget has a row");
        let flag = if c.valid { "" } else { "  INVALID (too many failed trials)" };
        println!("{:<20} {:>8} {:>10.5} {:>10.5}{flag}", c.method, last, row.pfs, row.stderr);
        all_valid &= c.valid;
    }
    println!("wrote {}", csv_path.display());
    Ok(if all_valid { 0 } else { 1 })
}

pub fn plot(input: &Path, out: &Path, logy: bool, logx: bool) -> CmdResult {
    let text = std::fs::read_to_string(input).map_err(|e| usage(format!("{}: {e}", input.display())))?;
    let rows = parse_curves_csv(&text)?;
    check_writable(out)?;
    let svg = render_svg(&rows, logy, logx).map_err(usage)?;
    std::fs::write(out, svg).map_err(|e| runtime(format!("{}: {e}", out.display())))?;
    Ok(0)
}
