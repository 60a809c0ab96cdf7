//! SDE problem descriptors: the drift integrand `H(ξ, x)` with the law of `ξ`,
//! the diffusion `b(x)`, the initial state and the horizon.

mod catalog;

use std::fmt;
use std::sync::Arc;

use rand_distr::{ChiSquared, Distribution};

use crate::error::{all_finite, Error, NumericError, Result};
use crate::rng::{RandomStream, Substream, SubstreamTag};

pub use catalog::{catalog, lookup, synthetic, HIMMELBLAU_MINIMA};

/// `H(ξ, x) -> out`
pub type DriftFn = Arc<dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync>;
/// `x -> out`, a vector field on `R^d`.
pub type VectorField = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
/// `x -> value`
pub type ScalarField = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Law of the randomizing element `ξ`.
#[derive(Debug, Clone, PartialEq)]
pub enum XiDistribution {
    Dirac(f64),
    Normal { mean: f64, variance: f64 },
    /// Independent coordinates, each `(mean, variance)`.
    IndependentNormals(Vec<(f64, f64)>),
}

impl XiDistribution {
    pub fn normal(mean: f64, variance: f64) -> Self {
        XiDistribution::Normal { mean, variance }
    }

    pub fn independent_normals(params: &[(f64, f64)]) -> Self {
        XiDistribution::IndependentNormals(params.to_vec())
    }

    pub fn is_dirac(&self) -> bool {
        matches!(self, XiDistribution::Dirac(_))
    }
}

/// Feature map `φ` such that an integrand is affine in `φ(ξ)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XiFeature {
    /// `φ(ξ) = ξ`
    Identity,
    /// `φ(ξ) = ξ²`, coordinate-wise
    Square,
}

/// Sampling interface for `ξ`. Implement it to add new laws.
pub trait XiSampler: Send + Sync {
    fn dim(&self) -> usize;

    fn validate(&self) -> Result<()> {
        Ok(())
    }

    fn sample_into(&self, sub: &mut Substream, out: &mut [f64]);

    /// Draw `(1/m) Σ_j φ(ξ_j)` for `m` i.i.d. `ξ_j` directly from its law.
    /// Returns `false` when the law has no closed form for `feature`.
    fn sample_feature_mean(
        &self,
        _feature: XiFeature,
        _m: usize,
        _sub: &mut Substream,
        _out: &mut [f64],
    ) -> bool {
        false
    }
}

fn normal_feature_mean(
    feature: XiFeature,
    mean: f64,
    variance: f64,
    m: usize,
    sub: &mut Substream,
) -> f64 {
    let sd = variance.sqrt();
    let zbar = sub.gaussian() / (m as f64).sqrt();
    match feature {
        XiFeature::Identity => mean + sd * zbar,
        XiFeature::Square => {
            // Σ z_j² = m·z̄² + S with S ~ χ²(m-1) independent of z̄.
            let rest = if m > 1 {
                ChiSquared::new((m - 1) as f64)
                    .expect("positive degrees of freedom")
                    .sample(sub)
            } else {
                0.0
            };
            mean * mean + 2.0 * mean * sd * zbar + variance * (zbar * zbar + rest / m as f64)
        }
    }
}

impl XiSampler for XiDistribution {
    fn dim(&self) -> usize {
        match self {
            XiDistribution::Dirac(_) | XiDistribution::Normal { .. } => 1,
            XiDistribution::IndependentNormals(p) => p.len(),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = |mean: f64, var: f64| mean.is_finite() && var.is_finite() && var >= 0.0;
        let valid = match self {
            XiDistribution::Dirac(c) => c.is_finite(),
            XiDistribution::Normal { mean, variance } => ok(*mean, *variance),
            XiDistribution::IndependentNormals(p) => {
                !p.is_empty() && p.iter().all(|&(m, v)| ok(m, v))
            }
        };
        if valid {
            Ok(())
        } else {
            Err(Error::config(format!("invalid xi distribution {self:?}")))
        }
    }

    fn sample_into(&self, sub: &mut Substream, out: &mut [f64]) {
        match self {
            XiDistribution::Dirac(c) => out[0] = *c,
            XiDistribution::Normal { mean, variance } => {
                out[0] = mean + variance.sqrt() * sub.gaussian()
            }
            XiDistribution::IndependentNormals(p) => {
                for (o, &(mean, var)) in out.iter_mut().zip(p) {
                    *o = mean + var.sqrt() * sub.gaussian();
                }
            }
        }
    }

    fn sample_feature_mean(
        &self,
        feature: XiFeature,
        m: usize,
        sub: &mut Substream,
        out: &mut [f64],
    ) -> bool {
        match self {
            XiDistribution::Dirac(c) => {
                out[0] = match feature {
                    XiFeature::Identity => *c,
                    XiFeature::Square => c * c,
                }
            }
            XiDistribution::Normal { mean, variance } => {
                out[0] = normal_feature_mean(feature, *mean, *variance, m, sub)
            }
            XiDistribution::IndependentNormals(p) => {
                for (o, &(mean, var)) in out.iter_mut().zip(p) {
                    *o = normal_feature_mean(feature, mean, var, m, sub);
                }
            }
        }
        true
    }
}

/// Argument dependence of `H`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriftClass {
    /// `H(ξ, x) = H(ξ, 0)`
    TimeOnly,
    /// `H(ξ, x) = H(ξ₀, x)`
    SpaceOnly,
    General,
}

/// The integrand `H` with `a(x) = E H(ξ, x)`.
#[derive(Clone)]
pub struct DriftIntegrand {
    dim: usize,
    xi: XiDistribution,
    class: DriftClass,
    lipschitz_hint: Option<f64>,
    growth_hint: Option<f64>,
    eval: DriftFn,
    mean_form: Option<(XiFeature, DriftFn)>,
}

impl fmt::Debug for DriftIntegrand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DriftIntegrand")
            .field("dim", &self.dim)
            .field("xi", &self.xi)
            .field("class", &self.class)
            .field("lipschitz_hint", &self.lipschitz_hint)
            .field("growth_hint", &self.growth_hint)
            .field("mean_form", &self.mean_form.as_ref().map(|(f, _)| f))
            .finish()
    }
}

impl DriftIntegrand {
    pub fn new<F>(dim: usize, xi: XiDistribution, class: DriftClass, eval: F) -> Self
    where
        F: Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        DriftIntegrand {
            dim,
            xi,
            class,
            lipschitz_hint: None,
            growth_hint: None,
            eval: Arc::new(eval),
            mean_form: None,
        }
    }

    pub fn with_lipschitz_hint(mut self, l: f64) -> Self {
        self.lipschitz_hint = Some(l);
        self
    }

    pub fn with_growth_hint(mut self, g: f64) -> Self {
        self.growth_hint = Some(g);
        self
    }

    /// Declare `H` affine in `ξ`, so that the Monte Carlo average equals `H(ξ̄, x)`.
    pub fn affine_in_xi(mut self) -> Self {
        self.mean_form = Some((XiFeature::Identity, self.eval.clone()));
        self
    }

    /// Declare `H(ξ, x) = G(φ(ξ), x)` with `G` affine in its first argument.
    pub fn affine_in_feature<G>(mut self, feature: XiFeature, g: G) -> Self
    where
        G: Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        self.mean_form = Some((feature, Arc::new(g)));
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn xi_dist(&self) -> &XiDistribution {
        &self.xi
    }

    pub fn xi_dim(&self) -> usize {
        self.xi.dim()
    }

    pub fn class(&self) -> DriftClass {
        self.class
    }

    pub fn lipschitz_hint(&self) -> Option<f64> {
        self.lipschitz_hint
    }

    pub fn growth_hint(&self) -> Option<f64> {
        self.growth_hint
    }

    pub fn has_mean_law(&self) -> bool {
        self.mean_form.is_some()
    }

    pub fn mean_form(&self) -> Option<(XiFeature, &DriftFn)> {
        self.mean_form.as_ref().map(|(f, g)| (*f, g))
    }

    #[inline]
    pub fn evaluate(&self, xi: &[f64], x: &[f64], out: &mut [f64]) {
        (self.eval)(xi, x, out)
    }

    pub fn eval_vec(&self, xi: &[f64], x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.evaluate(xi, x, &mut out);
        out
    }
}

/// Running mean `μ_j = μ_{j-1} + (v_j - μ_{j-1}) / j`. Exact when every `v_j` is equal.
#[inline]
pub(crate) fn mean_update(mean: &mut [f64], value: &[f64], j: usize) {
    let inv = j as f64;
    for (m, v) in mean.iter_mut().zip(value) {
        *m += (v - *m) / inv;
    }
}

/// `(1/M) Σ_j H(ξ_j, x)` over flattened samples `M × xi_dim`.
pub fn drift_mc(drift: &DriftIntegrand, xi_samples: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    let q = drift.xi_dim();
    if xi_samples.is_empty() || xi_samples.len() % q != 0 {
        return Err(Error::input(format!(
            "drift_mc needs a nonempty multiple of {q} samples, got {}",
            xi_samples.len()
        )));
    }
    let mut mean = vec![0.0; drift.dim()];
    let mut val = vec![0.0; drift.dim()];
    for (j, xi) in xi_samples.chunks_exact(q).enumerate() {
        drift.evaluate(xi, x, &mut val);
        if !all_finite(&val) {
            return Err(NumericError::new("drift integrand", x).with_xi(xi).into());
        }
        mean_update(&mut mean, &val, j + 1);
    }
    Ok(mean)
}

/// `(1/M) Σ_j H(ξ_j, x)` with `M` fresh draws from `sub`, without storing them.
pub fn sample_xi_mean(drift: &DriftIntegrand, x: &[f64], m: usize, sub: &mut Substream) -> Result<Vec<f64>> {
    if m == 0 {
        return Err(Error::input("sample_xi_mean needs M >= 1"));
    }
    let mut mean = vec![0.0; drift.dim()];
    let mut val = vec![0.0; drift.dim()];
    let mut xi = vec![0.0; drift.xi_dim()];
    for j in 1..=m {
        drift.xi_dist().sample_into(sub, &mut xi);
        drift.evaluate(&xi, x, &mut val);
        if !all_finite(&val) {
            return Err(NumericError::new("drift integrand", x).with_xi(&xi).into());
        }
        mean_update(&mut mean, &val, j);
    }
    Ok(mean)
}

/// Diffusion coefficient `b: R^d -> R^{d×m}`.
#[derive(Clone)]
pub enum Diffusion {
    Zero { d: usize, m: usize },
    /// `σ I_d`
    ScaledIdentity { sigma: f64, dim: usize },
    /// General field, written row-major `d × m`.
    Field { d: usize, m: usize, eval: VectorField },
}

impl fmt::Debug for Diffusion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diffusion::Zero { d, m } => write!(f, "Zero({d}x{m})"),
            Diffusion::ScaledIdentity { sigma, dim } => write!(f, "{sigma}*I_{dim}"),
            Diffusion::Field { d, m, .. } => write!(f, "Field({d}x{m})"),
        }
    }
}

impl Diffusion {
    pub fn field<F>(d: usize, m: usize, eval: F) -> Self
    where
        F: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        Diffusion::Field { d, m, eval: Arc::new(eval) }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Diffusion::Zero { .. })
    }

    pub fn shape(&self) -> (usize, usize) {
        match self {
            Diffusion::Zero { d, m } | Diffusion::Field { d, m, .. } => (*d, *m),
            Diffusion::ScaledIdentity { dim, .. } => (*dim, *dim),
        }
    }

    /// `b(x)` as a row-major `d × m` matrix.
    pub fn evaluate(&self, x: &[f64]) -> Vec<f64> {
        let (d, m) = self.shape();
        let mut out = vec![0.0; d * m];
        match self {
            Diffusion::Zero { .. } => {}
            Diffusion::ScaledIdentity { sigma, dim } => {
                for i in 0..*dim {
                    out[i * dim + i] = *sigma;
                }
            }
            Diffusion::Field { eval, .. } => eval(x, &mut out),
        }
        out
    }

    /// `out = b(x) dw`; `scratch` holds `d·m` entries for general fields.
    #[inline]
    pub(crate) fn apply_into(&self, x: &[f64], dw: &[f64], scratch: &mut [f64], out: &mut [f64]) {
        match self {
            Diffusion::Zero { .. } => out.fill(0.0),
            Diffusion::ScaledIdentity { sigma, .. } => {
                for (o, w) in out.iter_mut().zip(dw) {
                    *o = sigma * w;
                }
            }
            Diffusion::Field { m, eval, .. } => {
                eval(x, scratch);
                for (o, row) in out.iter_mut().zip(scratch.chunks_exact(*m)) {
                    let mut s = 0.0;
                    for (b, w) in row.iter().zip(dw) {
                        s += b * w;
                    }
                    *o = s;
                }
            }
        }
    }

    pub fn apply(&self, x: &[f64], dw: &[f64]) -> Vec<f64> {
        let (d, m) = self.shape();
        let mut scratch = vec![0.0; d * m];
        let mut out = vec![0.0; d];
        self.apply_into(x, dw, &mut scratch, &mut out);
        out
    }
}

/// Known minimizers of an optimization problem.
#[derive(Debug, Clone, PartialEq)]
pub enum Minima {
    Points(Vec<Vec<f64>>),
    /// The hyperplane `{x : normal·x = offset}`.
    Hyperplane { normal: Vec<f64>, offset: f64 },
}

impl Minima {
    pub fn distance(&self, x: &[f64]) -> f64 {
        match self {
            Minima::Points(pts) => pts
                .iter()
                .map(|p| euclid(p, x))
                .fold(f64::INFINITY, f64::min),
            Minima::Hyperplane { normal, offset } => {
                let dot: f64 = normal.iter().zip(x).map(|(a, b)| a * b).sum();
                let norm = normal.iter().map(|a| a * a).sum::<f64>().sqrt();
                (dot - offset).abs() / norm
            }
        }
    }

    /// Axis-aligned box enclosing the anchor points: all points, or the foot of
    /// the perpendicular from the origin for a hyperplane.
    pub fn anchor_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Minima::Points(pts) => {
                let d = pts[0].len();
                let mut lo = vec![f64::INFINITY; d];
                let mut hi = vec![f64::NEG_INFINITY; d];
                for p in pts {
                    for i in 0..d {
                        lo[i] = lo[i].min(p[i]);
                        hi[i] = hi[i].max(p[i]);
                    }
                }
                (lo, hi)
            }
            Minima::Hyperplane { normal, offset } => {
                let nn: f64 = normal.iter().map(|a| a * a).sum();
                let foot: Vec<f64> = normal.iter().map(|a| a * offset / nn).collect();
                (foot.clone(), foot)
            }
        }
    }
}

pub(crate) fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// An SDE `dX = a(X) dt + b(X) dW`, `X(0) = η`, with `a(x) = E H(ξ, x)`.
#[derive(Clone)]
pub struct SdeProblem {
    pub name: String,
    pub d: usize,
    pub m: usize,
    pub eta: Vec<f64>,
    pub t_end: f64,
    pub drift: DriftIntegrand,
    pub diffusion: Diffusion,
    pub exact_drift: Option<VectorField>,
    pub minima: Option<Minima>,
    pub objective: Option<ScalarField>,
    /// Moment order of error norms.
    pub p: f64,
}

impl fmt::Debug for SdeProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SdeProblem")
            .field("name", &self.name)
            .field("d", &self.d)
            .field("m", &self.m)
            .field("eta", &self.eta)
            .field("t_end", &self.t_end)
            .field("drift", &self.drift)
            .field("diffusion", &self.diffusion)
            .field("exact_drift", &self.exact_drift.is_some())
            .field("minima", &self.minima)
            .field("p", &self.p)
            .finish()
    }
}

impl SdeProblem {
    pub fn new(
        name: impl Into<String>,
        eta: Vec<f64>,
        t_end: f64,
        drift: DriftIntegrand,
        diffusion: Diffusion,
    ) -> Result<Self> {
        let (bd, m) = diffusion.shape();
        let d = eta.len();
        if d == 0 || m == 0 {
            return Err(Error::config("problem dimensions d and m must be >= 1"));
        }
        if drift.dim() != d || bd != d {
            return Err(Error::config(format!(
                "dimension mismatch: eta {d}, drift {}, diffusion {bd}",
                drift.dim()
            )));
        }
        if !(t_end >= 0.0 && t_end.is_finite()) {
            return Err(Error::config("horizon T must be finite and >= 0"));
        }
        drift.xi_dist().validate()?;
        Ok(SdeProblem {
            name: name.into(),
            d,
            m,
            eta,
            t_end,
            drift,
            diffusion,
            exact_drift: None,
            minima: None,
            objective: None,
            p: 2.0,
        })
    }

    pub fn with_exact_drift<F>(mut self, a: F) -> Self
    where
        F: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        self.exact_drift = Some(Arc::new(a));
        self
    }

    pub fn with_minima(mut self, minima: Minima) -> Self {
        self.minima = Some(minima);
        self
    }

    pub fn with_objective<F>(mut self, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        self.objective = Some(Arc::new(f));
        self
    }

    pub fn with_eta(mut self, eta: Vec<f64>) -> Result<Self> {
        if eta.len() != self.d {
            return Err(Error::config("eta dimension mismatch"));
        }
        self.eta = eta;
        Ok(self)
    }

    pub fn with_horizon(mut self, t_end: f64) -> Result<Self> {
        if !(t_end >= 0.0 && t_end.is_finite()) {
            return Err(Error::config("horizon T must be finite and >= 0"));
        }
        self.t_end = t_end;
        Ok(self)
    }

    /// Replace `b`, renaming the problem.
    pub fn with_diffusion(mut self, name: impl Into<String>, diffusion: Diffusion) -> Result<Self> {
        let (d, m) = diffusion.shape();
        if d != self.d {
            return Err(Error::config("diffusion dimension mismatch"));
        }
        self.name = name.into();
        self.m = m;
        self.diffusion = diffusion;
        Ok(self)
    }

    pub fn exact_drift_at(&self, x: &[f64]) -> Option<Vec<f64>> {
        self.exact_drift.as_ref().map(|a| {
            let mut out = vec![0.0; self.d];
            a(x, &mut out);
            out
        })
    }

    pub fn nearest_minimum_distance(&self, x: &[f64]) -> Result<f64> {
        self.minima
            .as_ref()
            .map(|m| m.distance(x))
            .ok_or_else(|| Error::config(format!("problem '{}' has no minima metadata", self.name)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthReport {
    pub max_ratio: f64,
    /// `None` when the integrand carries no growth hint.
    pub passed: Option<bool>,
}

/// Max of `‖H(ξ, x)‖ / (1 + ‖x‖)` over `x` uniform in the `radius`-ball and `ξ` from its law.
pub fn verify_linear_growth(
    drift: &DriftIntegrand,
    n_points: usize,
    radius: f64,
    stream: &RandomStream,
) -> Result<GrowthReport> {
    if n_points == 0 {
        return Err(Error::input("verify_linear_growth needs n_points >= 1"));
    }
    let mut aux = stream.substream(SubstreamTag::Aux);
    let mut xi_sub = stream.xi();
    let d = drift.dim();
    let mut x = vec![0.0; d];
    let mut xi = vec![0.0; drift.xi_dim()];
    let mut h = vec![0.0; d];
    let mut max_ratio: f64 = 0.0;
    for _ in 0..n_points {
        uniform_in_ball(&mut aux, radius, &mut x);
        drift.xi_dist().sample_into(&mut xi_sub, &mut xi);
        drift.evaluate(&xi, &x, &mut h);
        if !all_finite(&h) {
            return Err(NumericError::new("drift integrand", &x).with_xi(&xi).into());
        }
        max_ratio = max_ratio.max(norm(&h) / (1.0 + norm(&x)));
    }
    Ok(GrowthReport {
        max_ratio,
        passed: drift.growth_hint().map(|g| max_ratio <= g),
    })
}

pub(crate) fn uniform_in_ball(sub: &mut Substream, radius: f64, out: &mut [f64]) {
    loop {
        sub.fill_gaussian(out);
        let n = norm(out);
        if n > 0.0 {
            let r = radius * sub.uniform().powf(1.0 / out.len() as f64);
            for v in out.iter_mut() {
                *v *= r / n;
            }
            return;
        }
    }
}

/// Check the declared argument dependence on `trials` random `(ξ, x)` pairs.
/// `General` imposes nothing and always passes.
pub fn verify_class_tag(drift: &DriftIntegrand, trials: usize, stream: &RandomStream) -> bool {
    let mut aux = stream.substream(SubstreamTag::Aux);
    let mut xi_sub = stream.xi();
    let d = drift.dim();
    let q = drift.xi_dim();
    let (mut x1, mut x2) = (vec![0.0; d], vec![0.0; d]);
    let (mut xi1, mut xi2) = (vec![0.0; q], vec![0.0; q]);
    let (mut h1, mut h2) = (vec![0.0; d], vec![0.0; d]);
    for _ in 0..trials {
        uniform_in_ball(&mut aux, 5.0, &mut x1);
        uniform_in_ball(&mut aux, 5.0, &mut x2);
        drift.xi_dist().sample_into(&mut xi_sub, &mut xi1);
        drift.xi_dist().sample_into(&mut xi_sub, &mut xi2);
        match drift.class() {
            DriftClass::General => return true,
            DriftClass::SpaceOnly => {
                drift.evaluate(&xi1, &x1, &mut h1);
                drift.evaluate(&xi2, &x1, &mut h2);
            }
            DriftClass::TimeOnly => {
                drift.evaluate(&xi1, &x1, &mut h1);
                drift.evaluate(&xi1, &x2, &mut h2);
            }
        }
        if h1 != h2 {
            return false;
        }
    }
    true
}
