use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use langevin_dp::dynamics::{final_states, sample_initial, stream_rng, DynamicsConfig, InitialDistribution, SamplingMethod};
use langevin_dp::planner::{check_plan, plan_sampling, MixingStatus, PlanRequest, ProcessKind, SamplingPlan};
use langevin_dp::potentials::{canonicalize, load_dataset, make_builtin, LabeledDataset, Potential};
use langevin_dp::privacy::{private_posterior_sample, GibbsLoss, GibbsSpec, PrivacyReport};
use langevin_dp::validation::{run_suite, write_summary_csv, SuiteOptions, SuiteReport, SUITES};
use serde::Serialize;

use crate::config::{
    base_dir, plan_request, read_config, require_seed, resolve, Dynamics, PlanConfig, PlanSettings, PosteriorConfig,
    SampleConfig, Target, ValidateConfig,
};
use crate::error::{CliError, CliResult};
use crate::output::{json_bytes, samples_csv, sha256_hex, write_atomic};

fn plan_bytes(plan: &SamplingPlan) -> CliResult<Vec<u8>> {
    json_bytes(plan)
}

fn summary(plan: &SamplingPlan, hash: &str) -> String {
    let r = &plan.request;
    let mut s = String::new();
    let _ = writeln!(s, "plan_sha256 {hash}");
    let _ = writeln!(s, "process     {:?}, mode {:?}", r.process, r.mode);
    let _ = writeln!(
        s,
        "target      alpha {} (planned at {}), eps {}, d {}, canonical L {}, c {}",
        r.alpha, plan.plan_alpha, r.eps, r.dim, r.smoothness, r.c
    );
    match plan.eta {
        Some(eta) => {
            let _ = writeln!(s, "schedule    eta {eta:e}, T {}, tau {}", plan.steps, plan.tau);
        }
        None => {
            let _ = writeln!(s, "schedule    T 0 (the initial law already meets the budget)");
        }
    }
    match &plan.mixing {
        MixingStatus::Certified(m) => {
            let _ = writeln!(s, "mixing      certified, tau {} at order {}", m.tau, m.order);
        }
        MixingStatus::Uncertified { reason } => {
            let _ = writeln!(s, "mixing      UNCERTIFIED: {reason}");
        }
    }
    for c in &plan.certificates {
        let _ = writeln!(
            s,
            "certificate {:<18} {:e} at order {} ({:?})",
            c.name, c.bound.value, c.bound.alpha, c.bound.direction
        );
    }
    match &plan.combined {
        Some(b) => {
            let _ = writeln!(s, "combined    {:e} at order {} ({:?})", b.value, b.alpha, b.direction);
        }
        None => {
            let _ = writeln!(s, "combined    none");
        }
    }
    for p in &plan.preconditions {
        let _ = writeln!(s, "precondition {} [{:?}] {}", p.name, p.status, p.detail);
    }
    s
}

fn target_curvature(target: &Target, base: &Path) -> CliResult<(usize, langevin_dp::potentials::Curvature)> {
    match target {
        Target::Potential { potential } => {
            let p = make_builtin(potential, Some(base))?;
            Ok((p.dim(), p.curvature()))
        }
        Target::Declared { dim, curvature } => Ok((*dim, *curvature)),
    }
}

pub fn plan(config: &Path, out: &Path, c: Option<f64>) -> CliResult<()> {
    let cfg: PlanConfig = read_config(config)?;
    let (dim, curv) = target_curvature(&cfg.target, &base_dir(config))?;
    let plan = plan_sampling(&plan_request(dim, curv, &cfg.plan, c)?)?;
    let bytes = plan_bytes(&plan)?;
    let hash = sha256_hex(&bytes);
    let text = summary(&plan, &hash);
    write_atomic(out, "plan.json", &bytes)?;
    write_atomic(out, "plan_summary.txt", text.as_bytes())?;
    print!("{text}");
    Ok(())
}

fn settings_of(req: &PlanRequest) -> PlanSettings {
    PlanSettings {
        alpha: req.alpha,
        eps: req.eps,
        mode: req.mode,
        dynamics: match req.process {
            ProcessKind::Underdamped { gamma, mu } => Dynamics::Underdamped { gamma, mu },
            _ => Dynamics::Overdamped,
        },
        tau: req.tau,
        c: Some(req.c),
    }
}

#[derive(Serialize)]
struct SampleManifest {
    seed: u64,
    n_chains: usize,
    plan_sha256: String,
    method: SamplingMethod,
    #[serde(skip_serializing_if = "Option::is_none")]
    dynamics: Option<DynamicsConfig>,
    initial: InitialDistribution,
    canonical: bool,
    rng: &'static str,
    version: &'static str,
}

fn draw(
    p: &dyn Potential,
    plan: &SamplingPlan,
    n: usize,
    seed: u64,
) -> CliResult<(Vec<Vec<f64>>, SamplingMethod, Option<DynamicsConfig>)> {
    match plan.dynamics_config(seed) {
        Some(dc) => {
            let (states, method) = final_states(p, &dc, &plan.initial, n)?;
            Ok((states.into_iter().map(|s| s.x).collect(), method, Some(dc)))
        }
        None => {
            let xs = (0..n)
                .map(|i| sample_initial(&plan.initial, p, &mut stream_rng(seed, i as u64)).map(|s| s.x))
                .collect::<langevin_dp::Result<Vec<_>>>()?;
            Ok((xs, SamplingMethod::ExactLaw, None))
        }
    }
}

pub fn sample(config: &Path, seed: Option<u64>, out: &Path) -> CliResult<()> {
    let cfg: SampleConfig = read_config(config)?;
    let seed = require_seed(seed, cfg.seed)?;
    let base = base_dir(config);
    let plan_path = resolve(&base, &cfg.plan);
    let bytes = std::fs::read(&plan_path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", plan_path.display())))?;
    let plan = SamplingPlan::from_json(std::str::from_utf8(&bytes).map_err(|e| CliError::Config(e.to_string()))?)?;
    let potential = make_builtin(&cfg.potential, Some(&base))?;
    let expected = plan_sampling(&plan_request(
        potential.dim(),
        potential.curvature(),
        &settings_of(&plan.request),
        None,
    )?)?;
    let hash = sha256_hex(&bytes);
    let expected_hash = sha256_hex(&plan_bytes(&expected)?);
    if hash != expected_hash {
        return Err(CliError::Config(format!(
            "plan/potential mismatch: {} has sha256 {hash}, but the potential yields a plan with sha256 {expected_hash}",
            plan_path.display()
        )));
    }
    let canonical = potential.curvature().strong_convexity > 0.0;
    let (rows, method, dynamics) = if canonical {
        let cp = canonicalize(Arc::clone(&potential))?;
        let (ys, method, dc) = draw(&cp, &plan, cfg.n_chains, seed)?;
        (ys.iter().map(|y| cp.from_canonical(y)).collect(), method, dc)
    } else {
        draw(potential.as_ref(), &plan, cfg.n_chains, seed)?
    };
    let manifest = SampleManifest {
        seed,
        n_chains: cfg.n_chains,
        plan_sha256: hash,
        method,
        dynamics,
        initial: plan.initial.clone(),
        canonical,
        rng: "chacha8, stream = chain index",
        version: env!("CARGO_PKG_VERSION"),
    };
    write_atomic(out, "samples.csv", &samples_csv(potential.dim(), &rows)?)?;
    write_atomic(out, "manifest.json", &json_bytes(&manifest)?)?;
    println!("wrote {} samples ({:?}) to {}", rows.len(), method, out.display());
    Ok(())
}

pub fn validate(config: &Path, seed: Option<u64>, out: &Path, c: Option<f64>) -> CliResult<()> {
    let cfg: ValidateConfig = read_config(config)?;
    if cfg.suites.is_empty() {
        return Err(CliError::Config(format!("suite list is empty; choose from {}", SUITES.join(", "))));
    }
    if let Some(bad) = cfg.suites.iter().find(|s| !SUITES.contains(&s.as_str())) {
        return Err(CliError::Config(format!("unknown suite `{bad}`; choose from {}", SUITES.join(", "))));
    }
    let mut opts = SuiteOptions::new(require_seed(seed, cfg.seed)?);
    opts.trials = cfg.trials;
    if let Some(k) = cfg.sub_resolution {
        opts.sub_resolution = k;
    }
    if let Some(d) = cfg.deltas {
        opts.deltas = d;
    }
    if let Some(c) = c.or(cfg.c) {
        opts.c = c;
    }
    let reports: Vec<SuiteReport> = cfg
        .suites
        .iter()
        .map(|s| run_suite(s, &opts))
        .collect::<langevin_dp::Result<_>>()?;
    let rows: Vec<_> = reports.iter().flat_map(|r| r.rows.iter().cloned()).collect();
    let mut csv = Vec::new();
    write_summary_csv(&rows, &mut csv)?;
    write_atomic(out, "report.json", &json_bytes(&reports)?)?;
    write_atomic(out, "summary.csv", &csv)?;
    let failed: Vec<&str> = reports.iter().filter(|r| !r.pass).map(|r| r.suite.as_str()).collect();
    for r in &reports {
        println!("{:<18} {}", r.suite, if r.pass { "PASS" } else { "FAIL" });
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Validation(format!("suites {} failed", failed.join(", "))))
    }
}

#[derive(Serialize)]
struct PosteriorOutput<'a> {
    samples: &'a [Vec<f64>],
    report: &'a PrivacyReport,
    method: SamplingMethod,
    plan_sha256: String,
    plan: &'a SamplingPlan,
    seed: u64,
}

pub fn posterior(config: &Path, seed: Option<u64>, out: &Path, c: Option<f64>) -> CliResult<()> {
    let mut cfg: PosteriorConfig = read_config(config)?;
    let seed = require_seed(seed, cfg.seed)?;
    let rows = match (&cfg.dataset_csv, &cfg.records) {
        (Some(p), None) => load_dataset(&resolve(&base_dir(config), p))?,
        (None, Some(r)) => r.clone(),
        (None, None) => Vec::new(),
        (Some(_), Some(_)) => {
            return Err(CliError::Config("give either `dataset_csv` or `records`, not both".into()))
        }
    };
    let (records, labels) = match cfg.loss {
        GibbsLoss::SquaredDistance => (rows, Vec::new()),
        GibbsLoss::Logistic => {
            let ds = LabeledDataset::from_rows(rows)?;
            (ds.features, ds.labels)
        }
    };
    let dim = match (cfg.dim, records.first()) {
        (Some(d), _) => d,
        (None, Some(r)) => r.len(),
        (None, None) => return Err(CliError::Config("empty dataset: set `dim`".into())),
    };
    let spec = GibbsSpec {
        dim,
        records,
        labels,
        loss: cfg.loss,
        beta: cfg.beta,
        lambda: cfg.lambda,
        norm_bound: cfg.norm_bound,
    };
    if let Some(c) = c {
        cfg.mechanism.c = c;
    }
    let result = private_posterior_sample(&spec, &cfg.mechanism, cfg.runs, seed)?;
    let hash = sha256_hex(&plan_bytes(&result.plan)?);
    let output = PosteriorOutput {
        samples: &result.samples,
        report: &result.report,
        method: result.method,
        plan_sha256: hash.clone(),
        plan: &result.plan,
        seed,
    };
    write_atomic(out, "output.json", &json_bytes(&output)?)?;
    let t = result.report.total;
    println!("released {} sample(s); total privacy ({}, {}); plan_sha256 {hash}", cfg.runs, t.zeta, t.delta);
    Ok(())
}

pub fn check(plan_path: &Path, out: Option<&Path>) -> CliResult<()> {
    let text = std::fs::read_to_string(plan_path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", plan_path.display())))?;
    let plan = SamplingPlan::from_json(&text)?;
    let report = check_plan(&plan);
    if let Some(dir) = out {
        write_atomic(dir, "check.json", &json_bytes(&report)?)?;
    }
    println!(
        "{} ({} checks, {} failures)",
        if report.accepted { "ACCEPT" } else { "REJECT" },
        report.checks,
        report.failures.len()
    );
    for f in &report.failures {
        println!("  {f}");
    }
    if report.accepted {
        Ok(())
    } else {
        Err(CliError::Validation("plan rejected by the independent checker".into()))
    }
}
