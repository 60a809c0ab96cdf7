use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use resde::analysis::{extreme_ratio, lemma_mc_study, GapRow, LemmaRow, RateStudy};
use resde::optim::{trajectory_stream_id, DIVERGENCE_NORM};
use resde::{
    estimate_strong_error, gap_study, run_benchmark, BenchmarkRow, BenchmarkSpec, DriftSampling, ErrorEstimate,
    EstimatorOptions, OptimizerKind, RateFit,
};

use crate::config::{BenchConfig, ConvergenceConfig, LemmaConfig};
use crate::CliError;

pub struct RunContext {
    pub seed: u64,
    pub out: PathBuf,
    pub dry_run: bool,
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn csv<I: IntoIterator<Item = String>>(header: &str, rows: I) -> String {
    let mut s = String::from(header);
    s.push('\n');
    for r in rows {
        s.push_str(&r);
        s.push('\n');
    }
    s
}

fn fit_json(fit: &RateFit) -> Value {
    json!({
        "slope": fit.slope,
        "intercept": fit.intercept,
        "r2": fit.r_squared,
        "points": fit.points.iter().map(|(x, y)| [*x, *y]).collect::<Vec<_>>(),
    })
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}

pub fn convergence(cfg: &ConvergenceConfig, ctx: &RunContext) -> Result<(), CliError> {
    let problem = cfg.validate()?;
    if ctx.dry_run {
        println!(
            "convergence: problem {} with {} schedule points x {} replicates = {} coupled pairs (ratio {})",
            problem.name,
            cfg.schedule.len(),
            cfg.replicates,
            cfg.schedule.len() as u64 * cfg.replicates,
            cfg.ratio
        );
        return Ok(());
    }
    let opts = EstimatorOptions {
        ratio: cfg.ratio,
        replicates: cfg.replicates,
        p: cfg.p,
        seed: ctx.seed,
        couple_xi: cfg.couple_xi,
        sampling: cfg.sampling.into(),
    };
    let mut table = Vec::with_capacity(cfg.schedule.len());
    for (i, &(n, m)) in cfg.schedule.iter().enumerate() {
        let e = estimate_strong_error(&problem, n, m, &opts)?;
        eprintln!(
            "[{}/{}] n={n} M={m} epsilon={:.6e} stderr={:.2e}",
            i + 1,
            cfg.schedule.len(),
            e.epsilon,
            e.stderr
        );
        table.push(e);
    }
    write_file(
        &ctx.out,
        "convergence.csv",
        &csv(ErrorEstimate::CSV_HEADER, table.iter().map(ErrorEstimate::csv_row)),
    )?;
    let study = RateStudy::from_table(table)?;
    let mut doc = fit_json(&study.cost_fit);
    doc["ordinate"] = json!("log10 cost");
    doc["abscissa"] = json!("log10 epsilon");
    doc["epsilon_vs_nm"] = fit_json(&study.nm_fit);
    doc["epsilon_vs_n"] = study.n_fit.as_ref().map_or(Value::Null, fit_json);
    doc["epsilon_vs_m"] = study.m_fit.as_ref().map_or(Value::Null, fit_json);
    write_file(&ctx.out, "ratefit.json", &pretty(&doc))?;
    eprintln!("cost-on-error slope {:.4} (r2 {:.4})", study.cost_fit.slope, study.cost_fit.r_squared);
    Ok(())
}

pub fn lemma_check(cfg: &LemmaConfig, ctx: &RunContext) -> Result<(), CliError> {
    let (mc_problem, gap_problem, x) = cfg.validate()?;
    if ctx.dry_run {
        println!(
            "lemma-check: {} drift-error points x {} replicates on {}, {} gap points x {} replicates on {}",
            cfg.ms.len(),
            cfg.replicates,
            mc_problem.name,
            cfg.gap_ms.len(),
            cfg.gap_replicates,
            gap_problem.name
        );
        return Ok(());
    }
    let rows = lemma_mc_study(&mc_problem, &x, &cfg.ms, cfg.p, cfg.replicates, ctx.seed)?;
    for r in &rows {
        eprintln!("M={} lp_error={:.6e} scaled={:.4}", r.m, r.lp_error, r.sqrt_m_scaled);
    }
    write_file(&ctx.out, "lemma_mc.csv", &csv(LemmaRow::CSV_HEADER, rows.iter().map(LemmaRow::csv_row)))?;
    let opts = EstimatorOptions {
        ratio: 1,
        replicates: cfg.gap_replicates,
        p: cfg.p,
        seed: ctx.seed,
        couple_xi: false,
        sampling: DriftSampling::Direct,
    };
    let gap = gap_study(&gap_problem, cfg.gap_n, &cfg.gap_ms, &opts)?;
    for r in &gap.rows {
        eprintln!("gap M={} {:.6e}", r.m, r.gap);
    }
    write_file(&ctx.out, "lemma_gap.csv", &csv(GapRow::CSV_HEADER, gap.rows.iter().map(GapRow::csv_row)))?;
    let doc = json!({
        "mc_problem": mc_problem.name,
        "x": x,
        "sqrt_m_extreme_ratio": extreme_ratio(&rows),
        "gap_problem": gap_problem.name,
        "gap_n": cfg.gap_n,
        "gap_vs_m": gap.fit.as_ref().map_or(Value::Null, fit_json),
    });
    write_file(&ctx.out, "lemma.json", &pretty(&doc))?;
    Ok(())
}

fn optimizer_json(k: &OptimizerKind) -> Value {
    let mut v = json!({ "name": k.name(), "lr": k.lr() });
    match *k {
        OptimizerKind::Mbgd { batch, .. } => v["batch"] = json!(batch),
        OptimizerKind::Psgd { batch, sigma, .. } => {
            v["batch"] = json!(batch);
            v["sigma"] = json!(sigma);
        }
        OptimizerKind::Nag { momentum, .. } => v["momentum"] = json!(momentum),
        OptimizerKind::AdaGrad { eps, .. } => v["eps"] = json!(eps),
        OptimizerKind::Adam { beta1, beta2, eps, .. } => {
            v["beta1"] = json!(beta1);
            v["beta2"] = json!(beta2);
            v["eps"] = json!(eps);
        }
        OptimizerKind::Gd { .. } | OptimizerKind::Sgd { .. } => {}
    }
    v
}

pub fn optimize_bench(cfg: &BenchConfig, ctx: &RunContext) -> Result<(), CliError> {
    let (problems, kinds) = cfg.validate()?;
    if ctx.dry_run {
        println!(
            "optimize-bench: {} problems x {} optimizers x {} points = {} trajectories of {} steps",
            problems.len(),
            kinds.len(),
            cfg.count,
            problems.len() * kinds.len() * cfg.count,
            cfg.steps
        );
        return Ok(());
    }
    let spec = BenchmarkSpec {
        problems: problems.clone(),
        kinds: kinds.clone(),
        count: cfg.count,
        steps: cfg.steps,
        d_min: cfg.d_min,
        d_max: cfg.d_max,
        seed: ctx.seed,
        allow_stochastic: cfg.allow_stochastic,
    };
    eprintln!(
        "running {} trajectories",
        problems.len() * kinds.len() * cfg.count
    );
    let report = run_benchmark(&spec)?;
    write_file(
        &ctx.out,
        "bench.csv",
        &csv(BenchmarkRow::CSV_HEADER, report.rows.iter().map(BenchmarkRow::csv_row)),
    )?;
    let mut summary = String::new();
    for p in &problems {
        for k in &kinds {
            if let Some(last) = report.series(&p.name, k.name()).last() {
                let _ = write!(summary, "{}/{}={:.3} ", p.name, k.name(), last.mean_log10_err);
            }
        }
    }
    eprintln!("final mean log10 errors: {}", summary.trim_end());
    let doc = json!({
        "seed": ctx.seed,
        "count": cfg.count,
        "steps": cfg.steps,
        "d_min": cfg.d_min,
        "d_max": cfg.d_max,
        "allow_stochastic": cfg.allow_stochastic,
        "divergence_norm": DIVERGENCE_NORM,
        "problems": problems.iter().map(|p| p.name.clone()).collect::<Vec<_>>(),
        "optimizers": kinds.iter().map(optimizer_json).collect::<Vec<_>>(),
        "stream_id_example": trajectory_stream_id(1, 2, 3),
        "stream_id_layout": "(problem << 40) | (optimizer << 24) | point",
    });
    write_file(&ctx.out, "bench_meta.json", &pretty(&doc))?;
    Ok(())
}
