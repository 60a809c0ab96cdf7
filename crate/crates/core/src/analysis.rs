//! Strong-error estimation on coupled coarse/fine pairs, cost accounting,
//! log-log rate fits and direct checks of the Monte Carlo drift error.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{euclid, sample_xi_mean, SdeProblem};
use crate::rng::make_stream;
use crate::schemes::{coupled_pair, em_re_pair, randomized_euler, DriftSampling, SchemeConfig};

/// Scalar evaluations of `H`, `b` and `W` used by one randomized Euler run: `2n + nM`.
pub fn info_cost(n: u64, m: u64) -> u128 {
    let (n, m) = (n as u128, m as u128);
    2 * n + n * m
}

/// Evaluate `f(0..count)` in parallel and return the results in index order.
/// The error of the lowest failing index wins, independent of scheduling.
pub fn par_collect<T, F>(count: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync,
{
    let results: Vec<Result<T>> = (0..count).into_par_iter().map(&f).collect();
    results.into_iter().collect()
}

fn lp_mean(values: &[f64], p: f64) -> f64 {
    let s: f64 = values.iter().map(|v| v.powf(p)).sum();
    (s / values.len() as f64).powf(1.0 / p)
}

/// Jackknife standard error of `((1/K) Σ y_i)^{1/p}` from the summands `y_i`.
pub fn jackknife_stderr(y: &[f64], p: f64) -> f64 {
    let k = y.len();
    if k < 2 {
        return f64::NAN;
    }
    let total: f64 = y.iter().sum();
    let loo: Vec<f64> = y
        .iter()
        .map(|yi| ((total - yi).max(0.0) / (k - 1) as f64).powf(1.0 / p))
        .collect();
    let mean = loo.iter().sum::<f64>() / k as f64;
    let ss: f64 = loo.iter().map(|e| (e - mean) * (e - mean)).sum();
    ((k - 1) as f64 / k as f64 * ss).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorOptions {
    pub ratio: usize,
    pub replicates: u64,
    pub p: f64,
    pub seed: u64,
    pub couple_xi: bool,
    pub sampling: DriftSampling,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        EstimatorOptions {
            ratio: 100,
            replicates: 2000,
            p: 2.0,
            seed: 0,
            couple_xi: false,
            sampling: DriftSampling::Direct,
        }
    }
}

impl EstimatorOptions {
    fn validate(&self) -> Result<()> {
        if self.replicates < 2 {
            return Err(Error::config("the estimator needs K >= 2 replicates"));
        }
        if self.ratio == 0 {
            return Err(Error::config("coupling ratio must be >= 1"));
        }
        if !(self.p >= 1.0 && self.p.is_finite()) {
            return Err(Error::config(format!("moment order p must be finite and >= 1, got {}", self.p)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorEstimate {
    pub epsilon: f64,
    pub stderr: f64,
    pub replicates: u64,
    pub n: usize,
    pub m: usize,
    pub ratio: usize,
    pub cost: u128,
    pub p: f64,
    pub seed: u64,
}

impl ErrorEstimate {
    pub const CSV_HEADER: &'static str = "n,M,ratio,K,p,epsilon,stderr,cost,seed";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.n,
            self.m,
            self.ratio,
            self.replicates,
            fmt_f64(self.p),
            fmt_f64(self.epsilon),
            fmt_f64(self.stderr),
            self.cost,
            self.seed
        )
    }
}

/// Lossless float text: 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".to_string()
    } else if v > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

/// `ε_K = ((1/K) Σ_j ‖X_{n,M}(T) − X_{Rn,RM}(T)‖^p)^{1/p}`, replicate `j` on stream `(seed, j)`.
pub fn estimate_strong_error(problem: &SdeProblem, n: usize, m: usize, opts: &EstimatorOptions) -> Result<ErrorEstimate> {
    opts.validate()?;
    let cfg = SchemeConfig::for_problem(problem, n, m)?.with_sampling(opts.sampling);
    let y = par_collect(opts.replicates, |j| {
        let pair = coupled_pair(problem, &cfg, opts.ratio, &make_stream(opts.seed, j), opts.couple_xi)
            .map_err(|e| e.in_replicate(j))?;
        Ok(euclid(&pair.coarse_terminal, &pair.fine_terminal).powf(opts.p))
    })?;
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    Ok(ErrorEstimate {
        epsilon: mean.powf(1.0 / opts.p),
        stderr: jackknife_stderr(&y, opts.p),
        replicates: opts.replicates,
        n,
        m,
        ratio: opts.ratio,
        cost: info_cost(n as u64, m as u64),
        p: opts.p,
        seed: opts.seed,
    })
}

/// Ordinary least squares of `log10 y` on `log10 x`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// `(log10 x, log10 y)`
    pub points: Vec<(f64, f64)>,
}

pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 3 {
        return Err(Error::input(format!("a rate fit needs >= 3 points, got {}", points.len())));
    }
    if let Some(bad) = points.iter().find(|(x, y)| !(*x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite())) {
        return Err(Error::input(format!("rate fit coordinates must be positive and finite, got {bad:?}")));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|(x, y)| (x.log10(), y.log10())).collect();
    let k = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / k;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = logs.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::input("rate fit abscissae are all equal"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = logs.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r_squared = if syy == 0.0 { 1.0 } else { (1.0 - ss_res / syy).clamp(0.0, 1.0) };
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
        points: logs,
    })
}

/// Schedule results and the fits derived from them.
#[derive(Debug, Clone, PartialEq)]
pub struct RateStudy {
    pub table: Vec<ErrorEstimate>,
    /// log cost on log ε
    pub cost_fit: RateFit,
    /// log ε on log nM
    pub nm_fit: RateFit,
    /// log ε on log n, over rows sharing the largest M (when at least 3 distinct n)
    pub n_fit: Option<RateFit>,
    /// log ε on log M, over rows sharing the largest n (when at least 3 distinct M)
    pub m_fit: Option<RateFit>,
}

fn sub_fit(rows: Vec<(f64, f64)>) -> Result<Option<RateFit>> {
    let mut xs: Vec<f64> = rows.iter().map(|r| r.0).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    if xs.len() < 3 {
        return Ok(None);
    }
    fit_loglog_slope(&rows).map(Some)
}

impl RateStudy {
    pub fn from_table(table: Vec<ErrorEstimate>) -> Result<Self> {
        if table.len() < 3 {
            return Err(Error::config(format!("a rate study needs >= 3 schedule points, got {}", table.len())));
        }
        if let Some(e) = table.iter().find(|e| e.epsilon == 0.0) {
            return Err(Error::Degenerate(format!(
                "degenerate zero-error at n={} M={}: the log-log fit is undefined",
                e.n, e.m
            )));
        }
        let cost_fit = fit_loglog_slope(&table.iter().map(|e| (e.epsilon, e.cost as f64)).collect::<Vec<_>>())?;
        let nm_fit = fit_loglog_slope(
            &table
                .iter()
                .map(|e| ((e.n as f64) * (e.m as f64), e.epsilon))
                .collect::<Vec<_>>(),
        )?;
        let max_m = table.iter().map(|e| e.m).max().unwrap_or(0);
        let max_n = table.iter().map(|e| e.n).max().unwrap_or(0);
        let n_fit = sub_fit(table.iter().filter(|e| e.m == max_m).map(|e| (e.n as f64, e.epsilon)).collect())?;
        let m_fit = sub_fit(table.iter().filter(|e| e.n == max_n).map(|e| (e.m as f64, e.epsilon)).collect())?;
        Ok(RateStudy {
            table,
            cost_fit,
            nm_fit,
            n_fit,
            m_fit,
        })
    }
}

/// Run the estimator at every `(n, M)` of `schedule` and fit the rates.
pub fn rate_study(problem: &SdeProblem, schedule: &[(usize, usize)], opts: &EstimatorOptions) -> Result<RateStudy> {
    if schedule.len() < 3 {
        return Err(Error::config(format!("a rate study needs >= 3 schedule points, got {}", schedule.len())));
    }
    let table = schedule
        .iter()
        .map(|&(n, m)| estimate_strong_error(problem, n, m, opts))
        .collect::<Result<Vec<_>>>()?;
    RateStudy::from_table(table)
}

fn reference_drift(problem: &SdeProblem, x: &[f64], seed: u64) -> Result<Vec<f64>> {
    if let Some(a) = problem.exact_drift_at(x) {
        return Ok(a);
    }
    // One-off approximation at M₀ = 10⁶ on a stream no replicate uses.
    let mut sub = make_stream(seed, u64::MAX).xi();
    sample_xi_mean(&problem.drift, x, 1_000_000, &mut sub)
}

/// Empirical `L^p` norm over `replicates` of `‖a(x) − (1/M) Σ_j H(ξ_j, x)‖`, sampling every `ξ_j`.
pub fn mc_drift_error(problem: &SdeProblem, x: &[f64], m: usize, p: f64, replicates: u64, seed: u64) -> Result<f64> {
    if m == 0 || replicates == 0 {
        return Err(Error::input("mc_drift_error needs M >= 1 and replicates >= 1"));
    }
    if x.len() != problem.d {
        return Err(Error::input("state dimension mismatch"));
    }
    let a = reference_drift(problem, x, seed)?;
    let dist = par_collect(replicates, |r| {
        let mut sub = make_stream(seed, r).xi();
        let est = sample_xi_mean(&problem.drift, x, m, &mut sub).map_err(|e| e.in_replicate(r))?;
        Ok(euclid(&est, &a))
    })?;
    Ok(lp_mean(&dist, p))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LemmaRow {
    pub m: usize,
    pub lp_error: f64,
    pub sqrt_m_scaled: f64,
}

impl LemmaRow {
    pub const CSV_HEADER: &'static str = "M,lp_error,sqrt_m_scaled";

    pub fn csv_row(&self) -> String {
        format!("{},{},{}", self.m, fmt_f64(self.lp_error), fmt_f64(self.sqrt_m_scaled))
    }
}

/// `mc_drift_error` and its `√M`-scaled value for each `M`. Each `M` uses its own seed block.
pub fn lemma_mc_study(problem: &SdeProblem, x: &[f64], ms: &[usize], p: f64, replicates: u64, seed: u64) -> Result<Vec<LemmaRow>> {
    ms.iter()
        .enumerate()
        .map(|(i, &m)| {
            let e = mc_drift_error(problem, x, m, p, replicates, seed.wrapping_add(i as u64))?;
            Ok(LemmaRow {
                m,
                lp_error: e,
                sqrt_m_scaled: e * (m as f64).sqrt(),
            })
        })
        .collect()
}

/// `max / min` of the `√M`-scaled column.
pub fn extreme_ratio(rows: &[LemmaRow]) -> f64 {
    let hi = rows.iter().map(|r| r.sqrt_m_scaled).fold(f64::NEG_INFINITY, f64::max);
    let lo = rows.iter().map(|r| r.sqrt_m_scaled).fold(f64::INFINITY, f64::min);
    hi / lo
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapRow {
    pub m: usize,
    pub gap: f64,
    pub stderr: f64,
}

impl GapRow {
    pub const CSV_HEADER: &'static str = "M,gap";

    pub fn csv_row(&self) -> String {
        format!("{},{}", self.m, fmt_f64(self.gap))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapStudy {
    pub rows: Vec<GapRow>,
    /// log gap on log M; `None` when some gap is exactly zero
    pub fit: Option<RateFit>,
}

/// `(E‖X^E_n(T) − X^{RE}_{n,M}(T)‖^p)^{1/p}` on shared Wiener paths, for each `M`.
pub fn gap_study(problem: &SdeProblem, n: usize, ms: &[usize], opts: &EstimatorOptions) -> Result<GapStudy> {
    opts.validate()?;
    if problem.exact_drift.is_none() {
        return Err(Error::config(format!("gap study needs an exact drift for '{}'", problem.name)));
    }
    let rows = ms
        .iter()
        .map(|&m| {
            let cfg = SchemeConfig::for_problem(problem, n, m)?.with_sampling(opts.sampling);
            let y = par_collect(opts.replicates, |j| {
                let (e, r) = em_re_pair(problem, &cfg, &make_stream(opts.seed, j)).map_err(|e| e.in_replicate(j))?;
                Ok(euclid(&e, &r).powf(opts.p))
            })?;
            let mean = y.iter().sum::<f64>() / y.len() as f64;
            Ok(GapRow {
                m,
                gap: mean.powf(1.0 / opts.p),
                stderr: jackknife_stderr(&y, opts.p),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let fit = if rows.iter().any(|r| r.gap == 0.0) {
        None
    } else {
        Some(fit_loglog_slope(&rows.iter().map(|r| (r.m as f64, r.gap)).collect::<Vec<_>>())?)
    };
    Ok(GapStudy { rows, fit })
}

/// `E‖X(t_k)‖²` at every grid point `k = 0..=n`, averaged over replicates.
pub fn second_moment_profile(
    problem: &SdeProblem,
    n: usize,
    m: usize,
    replicates: u64,
    seed: u64,
    sampling: DriftSampling,
) -> Result<Vec<f64>> {
    if replicates == 0 {
        return Err(Error::input("second_moment_profile needs replicates >= 1"));
    }
    let cfg = SchemeConfig::for_problem(problem, n, m)?.full_path().with_sampling(sampling);
    let paths = par_collect(replicates, |j| {
        let t = randomized_euler(problem, &cfg, &make_stream(seed, j)).map_err(|e| e.in_replicate(j))?;
        Ok(t.states.iter().map(|x| x.iter().map(|v| v * v).sum::<f64>()).collect::<Vec<f64>>())
    })?;
    let mut acc = vec![0.0; n + 1];
    for path in &paths {
        for (a, v) in acc.iter_mut().zip(path) {
            *a += v;
        }
    }
    Ok(acc.into_iter().map(|s| s / replicates as f64).collect())
}

/// Sample quantile with linear interpolation between order statistics (type 7).
/// `sorted` must be ascending and may end in `+∞`.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    let a = sorted[lo];
    if frac == 0.0 || lo + 1 >= sorted.len() {
        return a;
    }
    let b = sorted[lo + 1];
    if a == b {
        a
    } else {
        a + (b - a) * frac
    }
}
