use super::{DriftClass, DriftIntegrand, Diffusion, Minima, SdeProblem, XiDistribution, XiFeature};
use crate::error::{Error, Result};

/// Local minima of Himmelblau's function, Newton-refined to `|∇f| < 1e-12`.
pub const HIMMELBLAU_MINIMA: [[f64; 2]; 4] = [
    [3.0, 2.0],
    [-2.805118086953, 3.131312518251],
    [-3.779310253378, -3.283185991286],
    [3.584428340330, -1.848126526964],
];

fn himmelblau_minima() -> Minima {
    Minima::Points(HIMMELBLAU_MINIMA.iter().map(|p| p.to_vec()).collect())
}

pub(crate) fn himmelblau(x: &[f64]) -> f64 {
    (x[0] * x[0] + x[1] - 11.0).powi(2) + (x[0] + x[1] * x[1] - 7.0).powi(2)
}

/// `∇ [(x₁² + x₂ + s₁)² + (x₁ + x₂² + s₂)²]`
fn shifted_himmelblau_grad(s1: f64, s2: f64, x: &[f64], out: &mut [f64]) {
    let u = x[0] * x[0] + x[1] + s1;
    let v = x[0] + x[1] * x[1] + s2;
    out[0] = 4.0 * u * x[0] + 2.0 * v;
    out[1] = 2.0 * u + 4.0 * v * x[1];
}

fn sigmoid(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

pub(crate) fn sigmoid_loss(x: &[f64]) -> f64 {
    (0.5 - sigmoid(x[0] + x[1])).powi(2)
}

fn sigmoid_loss_descent(x: &[f64], out: &mut [f64]) {
    let s = sigmoid(x[0] + x[1]);
    let g = 2.0 * (0.5 - s) * s * (1.0 - s);
    out[0] = g;
    out[1] = g;
}

fn sin2d() -> SdeProblem {
    let drift = DriftIntegrand::new(2, XiDistribution::normal(0.0, 1.0), DriftClass::General, |xi, x, o| {
        let t2 = xi[0] * xi[0];
        o[0] = 0.4 * t2 * x[1].sin();
        o[1] = 0.8 * t2 * x[0].sin();
    })
    .with_lipschitz_hint(0.8)
    .with_growth_hint(8.0)
    .affine_in_feature(XiFeature::Square, |phi, x, o| {
        o[0] = 0.4 * phi[0] * x[1].sin();
        o[1] = 0.8 * phi[0] * x[0].sin();
    });
    let b = Diffusion::field(2, 2, |x, o| {
        o[0] = 0.16 * x[0];
        o[1] = 0.24 * x[1];
        o[2] = 0.24 * x[0];
        o[3] = 0.32 * x[1];
    });
    SdeProblem::new("sin2d", vec![1.0, 1.0], 1.0, drift, b)
        .expect("valid catalog entry")
        .with_exact_drift(|x, o| {
            o[0] = 0.4 * x[1].sin();
            o[1] = 0.8 * x[0].sin();
        })
}

fn parabolic(name: &str, diffusion: Diffusion) -> SdeProblem {
    let drift = DriftIntegrand::new(
        2,
        XiDistribution::independent_normals(&[(0.0, 1.0), (0.0, 1.0)]),
        DriftClass::General,
        |xi, x, o| {
            o[0] = 2.0 * (xi[0] - x[0]);
            o[1] = 2.0 * (xi[1] - x[1]);
        },
    )
    .with_lipschitz_hint(2.0)
    .affine_in_xi();
    SdeProblem::new(name, vec![-3.0, 3.0], 1.0, drift, diffusion)
        .expect("valid catalog entry")
        .with_exact_drift(|x, o| {
            o[0] = -2.0 * x[0];
            o[1] = -2.0 * x[1];
        })
        .with_minima(Minima::Points(vec![vec![0.0, 0.0]]))
        .with_objective(|x| x[0] * x[0] + x[1] * x[1] + 2.0)
}

fn himmelblau_stoch() -> SdeProblem {
    let drift = DriftIntegrand::new(
        2,
        XiDistribution::independent_normals(&[(-11.0, 16.0), (-7.0, 16.0)]),
        DriftClass::General,
        |xi, x, o| {
            shifted_himmelblau_grad(xi[0], xi[1], x, o);
            o[0] = -o[0];
            o[1] = -o[1];
        },
    )
    .affine_in_xi();
    // E ξ₁² + E ξ₂² - 170 = 137 + 65 - 170
    SdeProblem::new("himmelblau_stoch", vec![1.0, 1.0], 1.0, drift, Diffusion::Zero { d: 2, m: 2 })
        .expect("valid catalog entry")
        .with_exact_drift(|x, o| {
            shifted_himmelblau_grad(-11.0, -7.0, x, o);
            o[0] = -o[0];
            o[1] = -o[1];
        })
        .with_minima(himmelblau_minima())
        .with_objective(|x| himmelblau(x) + 32.0)
}

fn deterministic<F>(name: &str, descent: F) -> SdeProblem
where
    F: Fn(&[f64], &mut [f64]) + Send + Sync + Clone + 'static,
{
    let a = descent.clone();
    let drift = DriftIntegrand::new(2, XiDistribution::Dirac(0.0), DriftClass::SpaceOnly, move |_, x, o| {
        descent(x, o)
    })
    .affine_in_xi();
    SdeProblem::new(name, vec![1.0, 1.0], 1.0, drift, Diffusion::Zero { d: 2, m: 2 })
        .expect("valid catalog entry")
        .with_exact_drift(a)
}

/// The named problems of the reproduction, in a fixed order.
pub fn catalog() -> Vec<SdeProblem> {
    vec![
        sin2d(),
        parabolic("parabolic", Diffusion::ScaledIdentity { sigma: 0.6, dim: 2 }),
        parabolic("parabolic_nodiff", Diffusion::Zero { d: 2, m: 2 }),
        himmelblau_stoch(),
        deterministic("paraboloid_det", |x, o| {
            o[0] = -2.0 * x[0];
            o[1] = -2.0 * x[1];
        })
        .with_minima(Minima::Points(vec![vec![0.0, 0.0]]))
        .with_objective(|x| x[0] * x[0] + x[1] * x[1]),
        deterministic("himmelblau_det", |x, o| {
            shifted_himmelblau_grad(-11.0, -7.0, x, o);
            o[0] = -o[0];
            o[1] = -o[1];
        })
        .with_minima(himmelblau_minima())
        .with_objective(himmelblau),
        deterministic("sigmoid_det", sigmoid_loss_descent)
            .with_minima(Minima::Hyperplane { normal: vec![1.0, 1.0], offset: 0.0 })
            .with_objective(sigmoid_loss),
    ]
}

/// Small problems with closed-form answers, used by the rate checks.
pub fn synthetic() -> Vec<SdeProblem> {
    let gaussian_mean = DriftIntegrand::new(1, XiDistribution::normal(0.0, 1.0), DriftClass::TimeOnly, |xi, _, o| {
        o[0] = xi[0]
    })
    .with_growth_hint(f64::INFINITY)
    .affine_in_xi();
    let linear_decay = DriftIntegrand::new(1, XiDistribution::Dirac(0.0), DriftClass::SpaceOnly, |_, x, o| {
        o[0] = -x[0]
    })
    .with_lipschitz_hint(1.0)
    .with_growth_hint(1.0)
    .affine_in_xi();
    let zero = DriftIntegrand::new(2, XiDistribution::Dirac(0.0), DriftClass::SpaceOnly, |_, _, o| {
        o.fill(0.0)
    })
    .with_lipschitz_hint(0.0)
    .with_growth_hint(0.0)
    .affine_in_xi();
    vec![
        SdeProblem::new("gaussian_mean", vec![0.0], 1.0, gaussian_mean, Diffusion::Zero { d: 1, m: 1 })
            .expect("valid synthetic entry")
            .with_exact_drift(|_, o| o[0] = 0.0),
        SdeProblem::new("linear_decay", vec![1.0], 1.0, linear_decay, Diffusion::Zero { d: 1, m: 1 })
            .expect("valid synthetic entry")
            .with_exact_drift(|x, o| o[0] = -x[0]),
        SdeProblem::new("zero_drift", vec![1.0, 1.0], 1.0, zero, Diffusion::Zero { d: 2, m: 2 })
            .expect("valid synthetic entry")
            .with_exact_drift(|_, o| o.fill(0.0)),
    ]
}

/// Find a catalog or synthetic problem by name.
pub fn lookup(name: &str) -> Result<SdeProblem> {
    catalog()
        .into_iter()
        .chain(synthetic())
        .find(|p| p.name == name)
        .ok_or_else(|| {
            let known: Vec<String> = catalog().into_iter().chain(synthetic()).map(|p| p.name).collect();
            Error::config(format!("unknown problem '{name}' (known: {})", known.join(", ")))
        })
}
