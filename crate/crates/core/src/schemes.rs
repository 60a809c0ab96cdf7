//! Time stepping: Euler–Maruyama with the exact drift, the randomized Euler
//! scheme with a Monte Carlo drift, and the coupled coarse/fine pair runner.

use crate::error::{all_finite, Error, NumericError, Result};
use crate::model::{mean_update, SdeProblem, XiSampler};
use crate::rng::{walk_coupled, GridEvent, LcmGrid, RandomStream, Substream, SubstreamTag};

/// How the per-step drift average `(1/M) Σ_j H(ξ_j, x)` is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DriftSampling {
    /// Draw every `ξ_j` and evaluate `H` `M` times.
    #[default]
    Direct,
    /// Draw the sample mean of the integrand's feature from its exact law and
    /// evaluate once. Same distribution as `Direct`, cost independent of `M`.
    /// Requires an integrand declared affine in a feature.
    ExactMean,
    /// `ExactMean` when available, otherwise `Direct`.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeConfig {
    pub n: usize,
    pub m: usize,
    pub t_end: f64,
    pub record_full_path: bool,
    pub sampling: DriftSampling,
}

impl SchemeConfig {
    pub fn new(n: usize, m: usize, t_end: f64) -> Result<Self> {
        let cfg = SchemeConfig {
            n,
            m,
            t_end,
            record_full_path: false,
            sampling: DriftSampling::Direct,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn for_problem(problem: &SdeProblem, n: usize, m: usize) -> Result<Self> {
        Self::new(n, m, problem.t_end)
    }

    pub fn full_path(mut self) -> Self {
        self.record_full_path = true;
        self
    }

    pub fn with_sampling(mut self, sampling: DriftSampling) -> Self {
        self.sampling = sampling;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 {
            return Err(Error::config(format!(
                "scheme needs n >= 1 and M >= 1, got n={} M={}",
                self.n, self.m
            )));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::config("scheme horizon must be finite and >= 0"));
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        self.t_end / self.n as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn terminal(&self) -> &[f64] {
        self.states.last().expect("trajectory is never empty")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoupledTerminalPair {
    pub coarse_terminal: Vec<f64>,
    pub fine_terminal: Vec<f64>,
    pub ratio: usize,
}

struct Recorder {
    full: bool,
    n: usize,
    t_end: f64,
    traj: Trajectory,
}

impl Recorder {
    fn new(cfg: &SchemeConfig, eta: &[f64]) -> Self {
        let mut traj = Trajectory {
            times: vec![0.0],
            states: vec![eta.to_vec()],
        };
        if cfg.record_full_path {
            traj.times.reserve(cfg.n);
            traj.states.reserve(cfg.n);
        }
        Recorder {
            full: cfg.record_full_path,
            n: cfg.n,
            t_end: cfg.t_end,
            traj,
        }
    }

    fn time(&self, k: usize) -> f64 {
        if k == self.n {
            self.t_end
        } else {
            self.t_end * k as f64 / self.n as f64
        }
    }

    fn push(&mut self, k: usize, x: &[f64]) {
        if self.full {
            self.traj.times.push(self.time(k));
            self.traj.states.push(x.to_vec());
        }
    }

    fn finish(mut self, x: &[f64]) -> Trajectory {
        if !self.full {
            self.traj.times.push(self.t_end);
            self.traj.states.push(x.to_vec());
        }
        self.traj
    }
}

/// Scratch space and the drift-averaging rule for one run.
struct Stepper<'a> {
    problem: &'a SdeProblem,
    exact_mean: bool,
    m: usize,
    h: f64,
    drift: Vec<f64>,
    val: Vec<f64>,
    xi: Vec<f64>,
    b_scratch: Vec<f64>,
    bdw: Vec<f64>,
}

impl<'a> Stepper<'a> {
    fn new(problem: &'a SdeProblem, cfg: &SchemeConfig) -> Result<Self> {
        cfg.validate()?;
        let has_law = problem.drift.has_mean_law();
        let exact_mean = match cfg.sampling {
            DriftSampling::Direct => false,
            DriftSampling::Auto => has_law,
            DriftSampling::ExactMean if has_law => true,
            DriftSampling::ExactMean => {
                return Err(Error::config(format!(
                    "problem '{}' declares no exact mean law for its integrand",
                    problem.name
                )))
            }
        };
        let d = problem.d;
        Ok(Stepper {
            problem,
            exact_mean,
            m: cfg.m,
            h: cfg.step(),
            drift: vec![0.0; d],
            val: vec![0.0; d],
            xi: vec![0.0; problem.drift.xi_dim()],
            b_scratch: vec![0.0; d * problem.m],
            bdw: vec![0.0; d],
        })
    }

    fn sample_drift(&mut self, x: &[f64], xi_sub: &mut Substream, k: usize) -> Result<()> {
        let h = &self.problem.drift;
        if self.exact_mean {
            let (feature, g) = h.mean_form().expect("checked at construction");
            if !h.xi_dist().sample_feature_mean(feature, self.m, xi_sub, &mut self.xi) {
                return Err(Error::config("xi law has no exact mean sampler for this feature"));
            }
            g(&self.xi, x, &mut self.drift);
            if !all_finite(&self.drift) {
                return Err(NumericError::new("drift integrand", x)
                    .at_step(k)
                    .with_xi(&self.xi)
                    .into());
            }
            return Ok(());
        }
        self.drift.fill(0.0);
        for j in 1..=self.m {
            h.xi_dist().sample_into(xi_sub, &mut self.xi);
            h.evaluate(&self.xi, x, &mut self.val);
            if !all_finite(&self.val) {
                return Err(NumericError::new("drift integrand", x)
                    .at_step(k)
                    .with_xi(&self.xi)
                    .into());
            }
            mean_update(&mut self.drift, &self.val, j);
        }
        Ok(())
    }

    fn exact_drift(&mut self, x: &[f64], k: usize) -> Result<()> {
        let a = self
            .problem
            .exact_drift
            .as_ref()
            .ok_or_else(|| Error::config(format!("problem '{}' has no exact drift", self.problem.name)))?;
        a(x, &mut self.drift);
        if !all_finite(&self.drift) {
            return Err(NumericError::new("exact drift", x).at_step(k).into());
        }
        Ok(())
    }

    /// `x ← x + a·h + b(x)·dw` with the drift currently held in `self.drift`.
    fn advance(&mut self, x: &mut [f64], dw: &[f64], k: usize) -> Result<()> {
        self.problem.diffusion.apply_into(x, dw, &mut self.b_scratch, &mut self.bdw);
        for i in 0..x.len() {
            x[i] = x[i] + self.drift[i] * self.h + self.bdw[i];
        }
        if !all_finite(x) {
            return Err(NumericError::new("state update", x).at_step(k + 1).into());
        }
        Ok(())
    }
}

fn check_increments(problem: &SdeProblem, cfg: &SchemeConfig, increments: &[f64]) -> Result<()> {
    if increments.len() != cfg.n * problem.m {
        return Err(Error::input(format!(
            "expected {}x{} Wiener increments, got {} values",
            cfg.n,
            problem.m,
            increments.len()
        )));
    }
    Ok(())
}

/// Euler–Maruyama with the closed-form drift, driven by given `n × m` increments.
pub fn euler_maruyama(problem: &SdeProblem, cfg: &SchemeConfig, increments: &[f64]) -> Result<Trajectory> {
    if problem.exact_drift.is_none() {
        return Err(Error::config(format!("problem '{}' has no exact drift", problem.name)));
    }
    check_increments(problem, cfg, increments)?;
    let mut st = Stepper::new(problem, cfg)?;
    let mut rec = Recorder::new(cfg, &problem.eta);
    let mut x = problem.eta.clone();
    for (k, dw) in increments.chunks_exact(problem.m).enumerate() {
        st.exact_drift(&x, k)?;
        st.advance(&mut x, dw, k)?;
        rec.push(k + 1, &x);
    }
    Ok(rec.finish(&x))
}

/// Randomized Euler driven by given increments, with `ξ` drawn from `xi_sub`.
pub fn randomized_euler_with(
    problem: &SdeProblem,
    cfg: &SchemeConfig,
    increments: &[f64],
    xi_sub: &mut Substream,
) -> Result<Trajectory> {
    check_increments(problem, cfg, increments)?;
    let mut st = Stepper::new(problem, cfg)?;
    let mut rec = Recorder::new(cfg, &problem.eta);
    let mut x = problem.eta.clone();
    for (k, dw) in increments.chunks_exact(problem.m).enumerate() {
        st.sample_drift(&x, xi_sub, k)?;
        st.advance(&mut x, dw, k)?;
        rec.push(k + 1, &x);
    }
    Ok(rec.finish(&x))
}

/// Randomized Euler with `ξ` from the Xi substream and `ΔW` from the Wiener substream of `stream`.
pub fn randomized_euler(problem: &SdeProblem, cfg: &SchemeConfig, stream: &RandomStream) -> Result<Trajectory> {
    let mut st = Stepper::new(problem, cfg)?;
    let mut rec = Recorder::new(cfg, &problem.eta);
    let mut wiener = stream.wiener();
    let mut xi_sub = stream.xi();
    let sqrt_h = cfg.step().sqrt();
    let mut dw = vec![0.0; problem.m];
    let mut x = problem.eta.clone();
    for k in 0..cfg.n {
        st.sample_drift(&x, &mut xi_sub, k)?;
        wiener.increment(sqrt_h, &mut dw);
        st.advance(&mut x, &dw, k)?;
        rec.push(k + 1, &x);
    }
    Ok(rec.finish(&x))
}

/// Randomized Euler at `(n, M)` and `(ratio·n, ratio·M)` on one Brownian path.
///
/// The fine run draws `ξ` from the XiFine substream, independent of the coarse
/// run, unless `couple_xi` is set, in which case both read the Xi substream
/// from its start. With `ratio == 1` the scheme runs once and both terminals
/// are that single result.
pub fn coupled_pair(
    problem: &SdeProblem,
    cfg: &SchemeConfig,
    ratio: usize,
    stream: &RandomStream,
    couple_xi: bool,
) -> Result<CoupledTerminalPair> {
    if ratio == 0 {
        return Err(Error::config("coupling ratio must be >= 1"));
    }
    if ratio == 1 {
        let t = randomized_euler(problem, &SchemeConfig { record_full_path: false, ..*cfg }, stream)?;
        let x = t.terminal().to_vec();
        return Ok(CoupledTerminalPair {
            coarse_terminal: x.clone(),
            fine_terminal: x,
            ratio,
        });
    }
    let overflow = || Error::Overflow(cfg.n as u64, ratio as u64);
    let fine_cfg = SchemeConfig {
        n: cfg.n.checked_mul(ratio).ok_or_else(overflow)?,
        m: cfg.m.checked_mul(ratio).ok_or_else(overflow)?,
        ..*cfg
    };
    let grid = LcmGrid::new(cfg.n, fine_cfg.n)?;
    let mut coarse = Stepper::new(problem, cfg)?;
    let mut fine = Stepper::new(problem, &fine_cfg)?;
    let mut xi_coarse = stream.xi();
    let mut xi_fine = if couple_xi {
        stream.xi()
    } else {
        stream.substream(SubstreamTag::XiFine)
    };
    let mut x_c = problem.eta.clone();
    let mut x_f = problem.eta.clone();
    let (mut k_c, mut k_f) = (0usize, 0usize);
    let mut wiener = stream.wiener();
    walk_coupled(&mut wiener, cfg.t_end, problem.m, &grid, |ev| {
        match ev {
            GridEvent::Cell(_) => {}
            GridEvent::Fine(dw) => {
                fine.sample_drift(&x_f, &mut xi_fine, k_f)?;
                fine.advance(&mut x_f, dw, k_f)?;
                k_f += 1;
            }
            GridEvent::Coarse(dw) => {
                coarse.sample_drift(&x_c, &mut xi_coarse, k_c)?;
                coarse.advance(&mut x_c, dw, k_c)?;
                k_c += 1;
            }
        }
        Ok(())
    })?;
    Ok(CoupledTerminalPair {
        coarse_terminal: x_c,
        fine_terminal: x_f,
        ratio,
    })
}

/// Terminal states of Euler–Maruyama and randomized Euler on the same Wiener path.
pub fn em_re_pair(problem: &SdeProblem, cfg: &SchemeConfig, stream: &RandomStream) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut em = Stepper::new(problem, cfg)?;
    let mut re = Stepper::new(problem, cfg)?;
    let mut wiener = stream.wiener();
    let mut xi_sub = stream.xi();
    let sqrt_h = cfg.step().sqrt();
    let mut dw = vec![0.0; problem.m];
    let mut x_e = problem.eta.clone();
    let mut x_r = problem.eta.clone();
    for k in 0..cfg.n {
        wiener.increment(sqrt_h, &mut dw);
        em.exact_drift(&x_e, k)?;
        em.advance(&mut x_e, &dw, k)?;
        re.sample_drift(&x_r, &mut xi_sub, k)?;
        re.advance(&mut x_r, &dw, k)?;
    }
    Ok((x_e, x_r))
}
