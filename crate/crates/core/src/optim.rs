//! Gradient optimizers on the catalog problems and the benchmark protocol.
//!
//! Optimization problems store `H = −∇g`, so a gradient sample is `−H(ξ, x)`.
//! SGD, MBGD and PSGD draw `ξ` from the Xi substream and PSGD draws its noise
//! from the Wiener substream with `ΔW ~ N(0, h I)`; a PSGD run with batch `M`
//! and step `h` is the randomized Euler run with `n = T/h` on the same stream.

use crate::analysis::{fmt_f64, par_collect, quantile};
use crate::error::{all_finite, Error, NumericError, Result};
use crate::model::{mean_update, norm, SdeProblem, XiSampler};
use crate::rng::{make_stream, RandomStream, SubstreamTag};

/// Iterates with `‖x‖` above this are treated as diverged.
pub const DIVERGENCE_NORM: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerKind {
    /// Exact gradient.
    Gd { lr: f64 },
    /// One gradient sample per step.
    Sgd { lr: f64 },
    Mbgd { lr: f64, batch: usize },
    /// Mini-batch step plus `σ ΔW`.
    Psgd { lr: f64, batch: usize, sigma: f64 },
    /// Nesterov momentum with look-ahead gradient.
    Nag { lr: f64, momentum: f64 },
    AdaGrad { lr: f64, eps: f64 },
    Adam { lr: f64, beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerKind {
    pub fn gd(lr: f64) -> Self {
        OptimizerKind::Gd { lr }
    }

    pub fn sgd(lr: f64) -> Self {
        OptimizerKind::Sgd { lr }
    }

    pub fn psgd(lr: f64, batch: usize, sigma: f64) -> Self {
        OptimizerKind::Psgd { lr, batch, sigma }
    }

    pub fn nag(lr: f64) -> Self {
        OptimizerKind::Nag { lr, momentum: 0.9 }
    }

    pub fn adagrad(lr: f64) -> Self {
        OptimizerKind::AdaGrad { lr, eps: 1e-8 }
    }

    pub fn adam(lr: f64) -> Self {
        OptimizerKind::Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// The five optimizers of the comparison with their default hyperparameters.
    pub fn comparison_set() -> Vec<OptimizerKind> {
        vec![
            OptimizerKind::sgd(0.01),
            OptimizerKind::psgd(0.01, 1, 0.3),
            OptimizerKind::nag(0.005),
            OptimizerKind::adagrad(0.1),
            OptimizerKind::adam(0.05),
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            OptimizerKind::Gd { .. } => "GD",
            OptimizerKind::Sgd { .. } => "SGD",
            OptimizerKind::Mbgd { .. } => "MBGD",
            OptimizerKind::Psgd { .. } => "PSGD",
            OptimizerKind::Nag { .. } => "NAG",
            OptimizerKind::AdaGrad { .. } => "AdaGrad",
            OptimizerKind::Adam { .. } => "ADAM",
        }
    }

    pub fn lr(&self) -> f64 {
        match *self {
            OptimizerKind::Gd { lr }
            | OptimizerKind::Sgd { lr }
            | OptimizerKind::Mbgd { lr, .. }
            | OptimizerKind::Psgd { lr, .. }
            | OptimizerKind::Nag { lr, .. }
            | OptimizerKind::AdaGrad { lr, .. }
            | OptimizerKind::Adam { lr, .. } => lr,
        }
    }

    /// Gradient samples per step; `None` means the exact gradient.
    pub fn batch(&self) -> Option<usize> {
        match *self {
            OptimizerKind::Gd { .. } => None,
            OptimizerKind::Mbgd { batch, .. } | OptimizerKind::Psgd { batch, .. } => Some(batch),
            _ => Some(1),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |b: f64| (0.0..1.0).contains(&b);
        let lr = self.lr();
        let ok = lr > 0.0
            && lr.is_finite()
            && match *self {
                OptimizerKind::Mbgd { batch, .. } => batch >= 1,
                OptimizerKind::Psgd { batch, sigma, .. } => batch >= 1 && sigma >= 0.0 && sigma.is_finite(),
                OptimizerKind::Nag { momentum, .. } => unit(momentum),
                OptimizerKind::AdaGrad { eps, .. } => eps > 0.0,
                OptimizerKind::Adam { beta1, beta2, eps, .. } => unit(beta1) && unit(beta2) && eps > 0.0,
                _ => true,
            };
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("invalid optimizer hyperparameters {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub x: Vec<f64>,
    pub k: usize,
    /// NAG velocity, ADAM first moment.
    pub momentum: Vec<f64>,
    /// AdaGrad sum of squares, ADAM second moment.
    pub accumulator: Vec<f64>,
}

impl OptimizerState {
    pub fn new(x0: &[f64]) -> Self {
        OptimizerState {
            x: x0.to_vec(),
            k: 0,
            momentum: vec![0.0; x0.len()],
            accumulator: vec![0.0; x0.len()],
        }
    }

    /// Where the next gradient is evaluated: the look-ahead point for NAG, else `x`.
    pub fn gradient_point(&self, kind: &OptimizerKind) -> Vec<f64> {
        match *kind {
            OptimizerKind::Nag { momentum, .. } => {
                self.x.iter().zip(&self.momentum).map(|(x, v)| x + momentum * v).collect()
            }
            _ => self.x.clone(),
        }
    }
}

/// Apply one update from `grads` (flattened `count × d` gradient samples taken
/// at [`OptimizerState::gradient_point`]). `dw` is read by PSGD only.
pub fn optimizer_step(kind: &OptimizerKind, state: &mut OptimizerState, grads: &[f64], dw: &[f64]) -> Result<()> {
    let d = state.x.len();
    if grads.is_empty() || grads.len() % d != 0 {
        return Err(Error::input(format!("expected a nonempty multiple of {d} gradient values")));
    }
    if !all_finite(grads) {
        return Err(NumericError::new("gradient", &state.x).at_step(state.k).into());
    }
    let mut g = vec![0.0; d];
    for (j, row) in grads.chunks_exact(d).enumerate() {
        mean_update(&mut g, row, j + 1);
    }
    let x = &mut state.x;
    match *kind {
        OptimizerKind::Gd { lr } | OptimizerKind::Sgd { lr } | OptimizerKind::Mbgd { lr, .. } => {
            for i in 0..d {
                x[i] -= g[i] * lr;
            }
        }
        OptimizerKind::Psgd { lr, sigma, .. } => {
            if dw.len() != d {
                return Err(Error::input("PSGD needs one noise increment per coordinate"));
            }
            for i in 0..d {
                x[i] = x[i] - g[i] * lr + sigma * dw[i];
            }
        }
        OptimizerKind::Nag { lr, momentum } => {
            for i in 0..d {
                state.momentum[i] = momentum * state.momentum[i] - lr * g[i];
                x[i] += state.momentum[i];
            }
        }
        OptimizerKind::AdaGrad { lr, eps } => {
            for i in 0..d {
                state.accumulator[i] += g[i] * g[i];
                x[i] -= lr * g[i] / (state.accumulator[i] + eps).sqrt();
            }
        }
        OptimizerKind::Adam { lr, beta1, beta2, eps } => {
            let t = (state.k + 1) as i32;
            let c1 = 1.0 - beta1.powi(t);
            let c2 = 1.0 - beta2.powi(t);
            for i in 0..d {
                state.momentum[i] = beta1 * state.momentum[i] + (1.0 - beta1) * g[i];
                state.accumulator[i] = beta2 * state.accumulator[i] + (1.0 - beta2) * g[i] * g[i];
                let m_hat = state.momentum[i] / c1;
                let v_hat = state.accumulator[i] / c2;
                x[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
    state.k += 1;
    if !all_finite(x) {
        return Err(NumericError::new("optimizer update", x).at_step(state.k).into());
    }
    Ok(())
}

/// Iterates `x0, x1, …` of `kind` on `problem`; `on_step` sees each new iterate
/// and may stop the run early by returning `false`.
fn drive<F>(kind: &OptimizerKind, problem: &SdeProblem, x0: &[f64], steps: usize, stream: &RandomStream, mut on_step: F) -> Result<()>
where
    F: FnMut(&[f64]) -> bool,
{
    kind.validate()?;
    if x0.len() != problem.d {
        return Err(Error::input("initial point dimension mismatch"));
    }
    let d = problem.d;
    let batch = kind.batch();
    if batch.is_none() && problem.exact_drift.is_none() {
        return Err(Error::config(format!("GD needs the exact gradient of '{}'", problem.name)));
    }
    let psgd = matches!(kind, OptimizerKind::Psgd { .. });
    if psgd && problem.diffusion.shape().1 != d {
        return Err(Error::config("PSGD noise needs a square diffusion"));
    }
    let mut xi_sub = stream.xi();
    let mut wiener = stream.wiener();
    let sqrt_h = kind.lr().sqrt();
    let mut state = OptimizerState::new(x0);
    let mut grads = vec![0.0; batch.unwrap_or(1) * d];
    let mut xi = vec![0.0; problem.drift.xi_dim()];
    let mut dw = vec![0.0; d];
    if !on_step(&state.x) {
        return Ok(());
    }
    for _ in 0..steps {
        let at = state.gradient_point(kind);
        match batch {
            None => {
                let a = problem.exact_drift.as_ref().expect("checked above");
                a(&at, &mut grads);
            }
            Some(_) => {
                for row in grads.chunks_exact_mut(d) {
                    problem.drift.xi_dist().sample_into(&mut xi_sub, &mut xi);
                    problem.drift.evaluate(&xi, &at, row);
                }
            }
        }
        for v in grads.iter_mut() {
            *v = -*v;
        }
        if psgd {
            wiener.increment(sqrt_h, &mut dw);
        }
        optimizer_step(kind, &mut state, &grads, &dw)?;
        if !on_step(&state.x) {
            break;
        }
    }
    Ok(())
}

/// The path `x0, …, x_steps`.
pub fn run_optimizer(kind: &OptimizerKind, problem: &SdeProblem, x0: &[f64], steps: usize, stream: &RandomStream) -> Result<Vec<Vec<f64>>> {
    let mut path = Vec::with_capacity(steps + 1);
    drive(kind, problem, x0, steps, stream, |x| {
        path.push(x.to_vec());
        true
    })?;
    Ok(path)
}

pub fn nearest_minimum_distance(problem: &SdeProblem, x: &[f64]) -> Result<f64> {
    problem.nearest_minimum_distance(x)
}

/// Distances to the nearest minimum along a run; `+∞` from the first iterate
/// that leaves the `DIVERGENCE_NORM` ball or turns non-finite.
pub fn distance_profile(kind: &OptimizerKind, problem: &SdeProblem, x0: &[f64], steps: usize, stream: &RandomStream) -> Result<Vec<f64>> {
    let minima = problem
        .minima
        .as_ref()
        .ok_or_else(|| Error::config(format!("problem '{}' has no minima metadata", problem.name)))?;
    let mut out = Vec::with_capacity(steps + 1);
    let res = drive(kind, problem, x0, steps, stream, |x| {
        if norm(x) > DIVERGENCE_NORM {
            return false;
        }
        out.push(minima.distance(x));
        true
    });
    match res {
        Ok(()) | Err(Error::Numeric(_)) => {}
        Err(e) => return Err(e),
    }
    out.resize(steps + 1, f64::INFINITY);
    Ok(out)
}

/// Rejection sampling of `count` points with nearest-minimum distance in
/// `[d_min, d_max]`. Proposals are uniform on the box enclosing the minima
/// (the foot point of a minimum line) inflated by `d_max` on every side.
pub fn sample_initial_points(problem: &SdeProblem, count: usize, d_min: f64, d_max: f64, stream: &RandomStream) -> Result<Vec<Vec<f64>>> {
    if !(d_min >= 0.0 && d_min < d_max && d_max.is_finite()) {
        return Err(Error::input(format!("need 0 <= d_min < d_max, got [{d_min}, {d_max}]")));
    }
    let minima = problem
        .minima
        .as_ref()
        .ok_or_else(|| Error::config(format!("problem '{}' has no minima metadata", problem.name)))?;
    let (lo, hi) = minima.anchor_box();
    let mut aux = stream.substream(SubstreamTag::Aux);
    let mut points = Vec::with_capacity(count);
    let mut proposals = 0usize;
    let mut x = vec![0.0; problem.d];
    while points.len() < count {
        for i in 0..x.len() {
            let (a, b) = (lo[i] - d_max, hi[i] + d_max);
            x[i] = a + (b - a) * aux.uniform();
        }
        proposals += 1;
        let dist = minima.distance(&x);
        if dist >= d_min && dist <= d_max {
            points.push(x.clone());
        }
        if proposals >= 1_000_000 && (points.len() as f64) < 1e-4 * proposals as f64 {
            return Err(Error::SamplingExhausted {
                accepted: points.len(),
                proposals,
            });
        }
    }
    Ok(points)
}

#[derive(Debug, Clone)]
pub struct BenchmarkSpec {
    pub problems: Vec<SdeProblem>,
    pub kinds: Vec<OptimizerKind>,
    pub count: usize,
    pub steps: usize,
    pub d_min: f64,
    pub d_max: f64,
    pub seed: u64,
    /// Admit problems with a random `ξ`.
    pub allow_stochastic: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRow {
    pub problem: String,
    pub optimizer: String,
    pub iteration: usize,
    pub mean_log10_err: f64,
    /// q10, q25, q50, q75, q90 of the log10 distances
    pub quantiles: [f64; 5],
    /// Trajectories diverged by this iteration.
    pub diverged: usize,
}

impl BenchmarkRow {
    pub const CSV_HEADER: &'static str = "problem,optimizer,iteration,mean_log10_err,q10,q25,q50,q75,q90,diverged";

    pub fn csv_row(&self) -> String {
        let q: Vec<String> = self.quantiles.iter().map(|v| fmt_f64(*v)).collect();
        format!(
            "{},{},{},{},{},{}",
            self.problem,
            self.optimizer,
            self.iteration,
            fmt_f64(self.mean_log10_err),
            q.join(","),
            self.diverged
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkReport {
    pub rows: Vec<BenchmarkRow>,
    pub count: usize,
    pub steps: usize,
    pub seed: u64,
    /// Shared initial points, per problem.
    pub initial_points: Vec<Vec<Vec<f64>>>,
}

impl BenchmarkReport {
    pub fn series(&self, problem: &str, optimizer: &str) -> Vec<&BenchmarkRow> {
        self.rows
            .iter()
            .filter(|r| r.problem == problem && r.optimizer == optimizer)
            .collect()
    }
}

/// Stream id of trajectory `point` of optimizer `ki` on problem `pi`.
/// Initial points of problem `pi` come from the Aux substream of id `pi << 40`.
pub fn trajectory_stream_id(pi: usize, ki: usize, point: usize) -> u64 {
    ((pi as u64) << 40) | ((ki as u64) << 24) | point as u64
}

const QUANTILES: [f64; 5] = [0.1, 0.25, 0.5, 0.75, 0.9];

/// Every optimizer runs from the same initial points of each problem.
pub fn run_benchmark(spec: &BenchmarkSpec) -> Result<BenchmarkReport> {
    if spec.count == 0 {
        return Err(Error::config("benchmark needs at least one initial point"));
    }
    if spec.count >= 1 << 24 || spec.kinds.len() >= 1 << 16 {
        return Err(Error::config("benchmark too large for the stream-id layout"));
    }
    for k in &spec.kinds {
        k.validate()?;
    }
    for p in &spec.problems {
        if !spec.allow_stochastic && !p.drift.xi_dist().is_dirac() {
            return Err(Error::config(format!(
                "problem '{}' is stochastic; set allow_stochastic to benchmark it",
                p.name
            )));
        }
    }
    let mut rows = Vec::new();
    let mut initial_points = Vec::new();
    for (pi, problem) in spec.problems.iter().enumerate() {
        let stream = make_stream(spec.seed, trajectory_stream_id(pi, 0, 0));
        let points = sample_initial_points(problem, spec.count, spec.d_min, spec.d_max, &stream)?;
        for (ki, kind) in spec.kinds.iter().enumerate() {
            let profiles = par_collect(spec.count as u64, |j| {
                let s = make_stream(spec.seed, trajectory_stream_id(pi, ki, j as usize));
                distance_profile(kind, problem, &points[j as usize], spec.steps, &s)
            })?;
            let mut logs = vec![0.0; spec.count];
            for it in 0..=spec.steps {
                let mut diverged = 0;
                for (l, prof) in logs.iter_mut().zip(&profiles) {
                    *l = prof[it].log10();
                    if prof[it] == f64::INFINITY {
                        diverged += 1;
                    }
                }
                let mean = logs.iter().sum::<f64>() / spec.count as f64;
                logs.sort_by(f64::total_cmp);
                rows.push(BenchmarkRow {
                    problem: problem.name.clone(),
                    optimizer: kind.name().to_string(),
                    iteration: it,
                    mean_log10_err: mean,
                    quantiles: QUANTILES.map(|q| quantile(&logs, q)),
                    diverged,
                });
            }
        }
        initial_points.push(points);
    }
    Ok(BenchmarkReport {
        rows,
        count: spec.count,
        steps: spec.steps,
        seed: spec.seed,
        initial_points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::lookup;

    #[test]
    fn gd_paraboloid_step() {
        let mut s = OptimizerState::new(&[1.0, 1.0]);
        optimizer_step(&OptimizerKind::gd(0.25), &mut s, &[2.0, 2.0], &[]).unwrap();
        assert_eq!(s.x, vec![0.5, 0.5]);
        assert_eq!(s.k, 1);
    }

    #[test]
    fn gd_paraboloid_path() {
        let p = lookup("paraboloid_det").unwrap();
        let path = run_optimizer(&OptimizerKind::gd(0.25), &p, &[1.0, 1.0], 2, &make_stream(0, 0)).unwrap();
        assert_eq!(path, vec![vec![1.0, 1.0], vec![0.5, 0.5], vec![0.25, 0.25]]);
    }

    #[test]
    fn psgd_without_noise_is_sgd() {
        let g = [0.3, -1.2];
        let mut a = OptimizerState::new(&[1.0, 2.0]);
        let mut b = a.clone();
        optimizer_step(&OptimizerKind::psgd(0.1, 1, 0.0), &mut a, &g, &[0.7, -0.4]).unwrap();
        optimizer_step(&OptimizerKind::sgd(0.1), &mut b, &g, &[]).unwrap();
        assert_eq!(a.x, b.x);
    }

    #[test]
    fn adam_first_step_is_signed_lr() {
        let mut s = OptimizerState::new(&[0.0, 0.0, 0.0]);
        let g = [3.0, -0.5, 1e-3];
        let kind = OptimizerKind::adam(0.1);
        optimizer_step(&kind, &mut s, &g, &[]).unwrap();
        for i in 0..3 {
            let want = -0.1 * g[i] / (g[i].abs() + 1e-8);
            assert!((s.x[i] - want).abs() < 1e-15, "{} vs {}", s.x[i], want);
        }
    }

    #[test]
    fn adagrad_first_step() {
        let mut s = OptimizerState::new(&[0.0]);
        optimizer_step(&OptimizerKind::adagrad(0.5), &mut s, &[2.0], &[]).unwrap();
        assert!((s.x[0] + 0.5 * 2.0 / (4.0f64 + 1e-8).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn nag_uses_look_ahead() {
        let kind = OptimizerKind::nag(0.1);
        let mut s = OptimizerState::new(&[1.0]);
        s.momentum = vec![0.5];
        assert_eq!(s.gradient_point(&kind), vec![1.45]);
        optimizer_step(&kind, &mut s, &[2.0], &[]).unwrap();
        assert!((s.momentum[0] - (0.45 - 0.2)).abs() < 1e-15);
        assert!((s.x[0] - 1.25).abs() < 1e-15);
    }

    #[test]
    fn non_finite_gradient_rejected() {
        let mut s = OptimizerState::new(&[1.0, 2.0]);
        match optimizer_step(&OptimizerKind::sgd(0.1), &mut s, &[f64::NAN, 0.0], &[]) {
            Err(Error::Numeric(e)) => assert_eq!(e.state, vec![1.0, 2.0]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn invalid_hyperparameters() {
        assert!(OptimizerKind::gd(0.0).validate().is_err());
        assert!(OptimizerKind::Nag { lr: 0.1, momentum: 1.0 }.validate().is_err());
        assert!(OptimizerKind::Mbgd { lr: 0.1, batch: 0 }.validate().is_err());
        assert!(OptimizerKind::AdaGrad { lr: 0.1, eps: 0.0 }.validate().is_err());
        for k in OptimizerKind::comparison_set() {
            k.validate().unwrap();
        }
    }

    #[test]
    fn initial_points_respect_radii() {
        for name in ["paraboloid_det", "himmelblau_det", "sigmoid_det"] {
            let p = lookup(name).unwrap();
            let pts = sample_initial_points(&p, 1000, 1.5, 3.0, &make_stream(1, 0)).unwrap();
            assert_eq!(pts.len(), 1000);
            for x in &pts {
                let d = nearest_minimum_distance(&p, x).unwrap();
                assert!((1.5..=3.0).contains(&d), "{name} {x:?} {d}");
            }
        }
    }

    #[test]
    fn initial_points_reject_empty_band() {
        let p = lookup("paraboloid_det").unwrap();
        assert!(matches!(
            sample_initial_points(&p, 1, 2.0, 2.0, &make_stream(1, 0)),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn initial_points_report_exhaustion() {
        // a band of width 1e-9 is essentially never hit
        let p = lookup("paraboloid_det").unwrap();
        assert!(matches!(
            sample_initial_points(&p, 1, 1.0, 1.0 + 1e-9, &make_stream(1, 0)),
            Err(Error::SamplingExhausted { .. })
        ));
    }

    fn spec(problems: &[&str], kinds: Vec<OptimizerKind>, count: usize, steps: usize) -> BenchmarkSpec {
        BenchmarkSpec {
            problems: problems.iter().map(|n| lookup(n).unwrap()).collect(),
            kinds,
            count,
            steps,
            d_min: 1.5,
            d_max: 3.0,
            seed: 4,
            allow_stochastic: false,
        }
    }

    #[test]
    fn zero_steps_report_initial_distance() {
        let r = run_benchmark(&spec(&["paraboloid_det", "sigmoid_det"], OptimizerKind::comparison_set(), 1, 0)).unwrap();
        assert_eq!(r.rows.len(), 2 * 5);
        for (pi, name) in ["paraboloid_det", "sigmoid_det"].iter().enumerate() {
            let p = lookup(name).unwrap();
            let want = nearest_minimum_distance(&p, &r.initial_points[pi][0]).unwrap().log10();
            for row in r.rows.iter().filter(|row| row.problem == *name) {
                assert_eq!(row.mean_log10_err, want);
                assert!(row.quantiles.iter().all(|q| *q == want));
            }
        }
    }

    #[test]
    fn gd_and_sgd_agree_on_deterministic_problems() {
        let r = run_benchmark(&spec(
            &["paraboloid_det", "himmelblau_det", "sigmoid_det"],
            vec![OptimizerKind::gd(0.01), OptimizerKind::sgd(0.01)],
            20,
            30,
        ))
        .unwrap();
        for name in ["paraboloid_det", "himmelblau_det", "sigmoid_det"] {
            let a = r.series(name, "GD");
            let b = r.series(name, "SGD");
            for (x, y) in a.iter().zip(&b) {
                assert_eq!((x.mean_log10_err, x.quantiles), (y.mean_log10_err, y.quantiles));
            }
        }
    }

    #[test]
    fn gd_paraboloid_contraction_rate() {
        let r = run_benchmark(&spec(&["paraboloid_det"], vec![OptimizerKind::gd(0.1)], 50, 10)).unwrap();
        let s = r.series("paraboloid_det", "GD");
        for w in s.windows(2) {
            let drop = w[0].mean_log10_err - w[1].mean_log10_err;
            assert!((drop - (1.0f64 / 0.8).log10()).abs() < 1e-12);
        }
    }

    #[test]
    fn stochastic_problems_need_flag() {
        let mut s = spec(&["parabolic"], vec![OptimizerKind::sgd(0.01)], 2, 2);
        assert!(matches!(run_benchmark(&s), Err(Error::Config(_))));
        s.allow_stochastic = true;
        assert!(run_benchmark(&s).is_ok());
    }

    #[test]
    fn divergence_is_counted() {
        let r = run_benchmark(&spec(&["himmelblau_det"], vec![OptimizerKind::gd(0.5)], 10, 50)).unwrap();
        let last = (*r.series("himmelblau_det", "GD").last().unwrap()).clone();
        assert_eq!(last.diverged, 10);
        assert_eq!(last.mean_log10_err, f64::INFINITY);
    }

    #[test]
    fn csv_row_layout() {
        let row = BenchmarkRow {
            problem: "p".into(),
            optimizer: "GD".into(),
            iteration: 3,
            mean_log10_err: -1.0,
            quantiles: [-2.0, -1.5, -1.0, -0.5, f64::INFINITY],
            diverged: 1,
        };
        assert_eq!(BenchmarkRow::CSV_HEADER.split(',').count(), row.csv_row().split(',').count());
        assert!(row.csv_row().ends_with(",inf,1"));
    }
}
