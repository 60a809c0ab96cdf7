//! Experiment configuration, read from a TOML file. Every key is optional;
//! unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use resde::{DriftSampling, OptimizerKind, SdeProblem};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Convergence,
    LemmaCheck,
    OptimizeBench,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Convergence => "convergence",
            Command::LemmaCheck => "lemma-check",
            Command::OptimizeBench => "optimize-bench",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sampling {
    Direct,
    ExactMean,
    #[default]
    Auto,
}

impl From<Sampling> for DriftSampling {
    fn from(s: Sampling) -> Self {
        match s {
            Sampling::Direct => DriftSampling::Direct,
            Sampling::ExactMean => DriftSampling::ExactMean,
            Sampling::Auto => DriftSampling::Auto,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Option<Command>,
    #[serde(default)]
    pub seed: u64,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub convergence: ConvergenceConfig,
    #[serde(default)]
    pub lemma: LemmaConfig,
    #[serde(default)]
    pub bench: BenchConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergenceConfig {
    pub problem: String,
    /// `[n, M]` pairs
    pub schedule: Vec<(usize, usize)>,
    pub ratio: usize,
    pub replicates: u64,
    pub p: f64,
    pub couple_xi: bool,
    pub sampling: Sampling,
    pub t_end: Option<f64>,
    pub eta: Option<Vec<f64>>,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        ConvergenceConfig {
            problem: "sin2d".into(),
            schedule: vec![(50, 50), (100, 100), (200, 200), (400, 400)],
            ratio: 100,
            replicates: 2000,
            p: 2.0,
            couple_xi: false,
            sampling: Sampling::Auto,
            t_end: None,
            eta: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LemmaConfig {
    pub problem: String,
    /// Evaluation point; the problem's initial state when absent.
    pub x: Option<Vec<f64>>,
    pub ms: Vec<usize>,
    pub replicates: u64,
    pub p: f64,
    pub gap_problem: String,
    pub gap_n: usize,
    pub gap_ms: Vec<usize>,
    pub gap_replicates: u64,
    pub t_end: Option<f64>,
}

impl Default for LemmaConfig {
    fn default() -> Self {
        LemmaConfig {
            problem: "gaussian_mean".into(),
            x: None,
            ms: vec![100, 1000, 10000],
            replicates: 10000,
            p: 2.0,
            gap_problem: "parabolic".into(),
            gap_n: 100,
            gap_ms: vec![4, 16, 64, 256, 1024],
            gap_replicates: 2000,
            t_end: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    pub problems: Vec<String>,
    pub count: usize,
    pub steps: usize,
    pub d_min: f64,
    pub d_max: f64,
    pub allow_stochastic: bool,
    /// The comparison set with default hyperparameters when empty.
    pub optimizers: Vec<OptimizerConfig>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            problems: vec!["paraboloid_det".into(), "himmelblau_det".into(), "sigmoid_det".into()],
            count: 1000,
            steps: 200,
            d_min: 1.5,
            d_max: 3.0,
            allow_stochastic: false,
            optimizers: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    pub name: String,
    pub lr: Option<f64>,
    pub batch: Option<usize>,
    pub sigma: Option<f64>,
    pub momentum: Option<f64>,
    pub eps: Option<f64>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
}

impl OptimizerConfig {
    pub fn build(&self) -> Result<OptimizerKind, CliError> {
        let defaults = OptimizerKind::comparison_set();
        let default_lr = |name: &str| {
            defaults
                .iter()
                .find(|k| k.name() == name)
                .map(|k| k.lr())
                .unwrap_or(0.01)
        };
        let extra = |allowed: &[&str]| -> Result<(), CliError> {
            let given = [
                ("batch", self.batch.is_some()),
                ("sigma", self.sigma.is_some()),
                ("momentum", self.momentum.is_some()),
                ("eps", self.eps.is_some()),
                ("beta1", self.beta1.is_some()),
                ("beta2", self.beta2.is_some()),
            ];
            match given.iter().find(|(k, set)| *set && !allowed.contains(k)) {
                Some((k, _)) => Err(CliError::Config(format!("optimizer {} takes no '{k}'", self.name))),
                None => Ok(()),
            }
        };
        let upper = self.name.to_ascii_uppercase();
        let lr = self.lr.unwrap_or_else(|| default_lr(&upper.replace("ADAGRAD", "AdaGrad")));
        let kind = match upper.as_str() {
            "GD" => {
                extra(&[])?;
                OptimizerKind::Gd { lr }
            }
            "SGD" => {
                extra(&[])?;
                OptimizerKind::Sgd { lr }
            }
            "MBGD" => {
                extra(&["batch"])?;
                OptimizerKind::Mbgd { lr, batch: self.batch.unwrap_or(10) }
            }
            "PSGD" => {
                extra(&["batch", "sigma"])?;
                OptimizerKind::Psgd {
                    lr,
                    batch: self.batch.unwrap_or(1),
                    sigma: self.sigma.unwrap_or(0.3),
                }
            }
            "NAG" => {
                extra(&["momentum"])?;
                OptimizerKind::Nag { lr, momentum: self.momentum.unwrap_or(0.9) }
            }
            "ADAGRAD" => {
                extra(&["eps"])?;
                OptimizerKind::AdaGrad { lr, eps: self.eps.unwrap_or(1e-8) }
            }
            "ADAM" => {
                extra(&["eps", "beta1", "beta2"])?;
                OptimizerKind::Adam {
                    lr,
                    beta1: self.beta1.unwrap_or(0.9),
                    beta2: self.beta2.unwrap_or(0.999),
                    eps: self.eps.unwrap_or(1e-8),
                }
            }
            _ => return Err(CliError::Config(format!("unknown optimizer '{}'", self.name))),
        };
        kind.validate()?;
        Ok(kind)
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

pub fn resolve_problem(name: &str, t_end: Option<f64>, eta: Option<&Vec<f64>>) -> Result<SdeProblem, CliError> {
    let mut p = resde::lookup(name)?;
    if let Some(t) = t_end {
        p = p.with_horizon(t)?;
    }
    if let Some(eta) = eta {
        p = p.with_eta(eta.clone())?;
    }
    Ok(p)
}

impl ConvergenceConfig {
    pub fn validate(&self) -> Result<SdeProblem, CliError> {
        if self.schedule.len() < 3 {
            return Err(CliError::Config(format!(
                "convergence schedule needs >= 3 points for the rate fit, got {}",
                self.schedule.len()
            )));
        }
        if let Some((n, m)) = self.schedule.iter().find(|(n, m)| *n == 0 || *m == 0) {
            return Err(CliError::Config(format!("schedule entry [{n}, {m}] must have n, M >= 1")));
        }
        if self.ratio == 0 || self.replicates < 2 {
            return Err(CliError::Config("convergence needs ratio >= 1 and replicates >= 2".into()));
        }
        if !(self.p >= 1.0 && self.p.is_finite()) {
            return Err(CliError::Config(format!("p must be finite and >= 1, got {}", self.p)));
        }
        let problem = resolve_problem(&self.problem, self.t_end, self.eta.as_ref())?;
        if self.sampling == Sampling::ExactMean && !problem.drift.has_mean_law() {
            return Err(CliError::Config(format!(
                "sampling = \"exact-mean\" needs an integrand with a mean law; '{}' has none",
                problem.name
            )));
        }
        Ok(problem)
    }
}

impl LemmaConfig {
    pub fn validate(&self) -> Result<(SdeProblem, SdeProblem, Vec<f64>), CliError> {
        if self.ms.is_empty() || self.ms.contains(&0) {
            return Err(CliError::Config("lemma ms must be nonempty with entries >= 1".into()));
        }
        if self.gap_ms.len() < 3 || self.gap_ms.contains(&0) {
            return Err(CliError::Config("lemma gap_ms needs >= 3 entries, each >= 1".into()));
        }
        if self.gap_n == 0 || self.replicates == 0 || self.gap_replicates < 2 {
            return Err(CliError::Config("lemma needs gap_n >= 1, replicates >= 1, gap_replicates >= 2".into()));
        }
        if !(self.p >= 1.0 && self.p.is_finite()) {
            return Err(CliError::Config(format!("p must be finite and >= 1, got {}", self.p)));
        }
        let mc = resolve_problem(&self.problem, None, None)?;
        let gap = resolve_problem(&self.gap_problem, self.t_end, None)?;
        if gap.exact_drift.is_none() {
            return Err(CliError::Config(format!("gap problem '{}' has no exact drift", gap.name)));
        }
        let x = self.x.clone().unwrap_or_else(|| mc.eta.clone());
        if x.len() != mc.d {
            return Err(CliError::Config(format!("lemma x has dimension {}, problem needs {}", x.len(), mc.d)));
        }
        Ok((mc, gap, x))
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<(Vec<SdeProblem>, Vec<OptimizerKind>), CliError> {
        if self.problems.is_empty() || self.count == 0 {
            return Err(CliError::Config("bench needs at least one problem and count >= 1".into()));
        }
        if !(self.d_min >= 0.0 && self.d_min < self.d_max && self.d_max.is_finite()) {
            return Err(CliError::Config(format!(
                "bench needs 0 <= d_min < d_max, got [{}, {}]",
                self.d_min, self.d_max
            )));
        }
        let problems = self
            .problems
            .iter()
            .map(|n| resolve_problem(n, None, None))
            .collect::<Result<Vec<_>, _>>()?;
        for p in &problems {
            if p.minima.is_none() {
                return Err(CliError::Config(format!("problem '{}' has no minima to measure against", p.name)));
            }
            if !self.allow_stochastic && !p.drift.xi_dist().is_dirac() {
                return Err(CliError::Config(format!(
                    "problem '{}' is stochastic; set allow_stochastic = true",
                    p.name
                )));
            }
        }
        let kinds = if self.optimizers.is_empty() {
            OptimizerKind::comparison_set()
        } else {
            self.optimizers.iter().map(OptimizerConfig::build).collect::<Result<Vec<_>, _>>()?
        };
        Ok((problems, kinds))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<ExperimentConfig, toml::de::Error> {
        toml::from_str(s)
    }

    #[test]
    fn empty_document_uses_defaults() {
        let c = parse("").unwrap();
        assert_eq!(c.convergence.problem, "sin2d");
        assert_eq!(c.bench.steps, 200);
        assert!(c.convergence.validate().is_ok());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(parse("sed = 1").is_err());
        assert!(parse("[convergence]\nratios = 3").is_err());
        assert!(parse("[[bench.optimizers]]\nname = \"SGD\"\nlearning_rate = 0.1").is_err());
    }

    #[test]
    fn full_document() {
        let c = parse(
            r#"
            command = "convergence"
            seed = 7
            [convergence]
            problem = "parabolic_nodiff"
            schedule = [[8, 8], [16, 16], [32, 32]]
            ratio = 4
            replicates = 10
            sampling = "direct"
            [[bench.optimizers]]
            name = "adam"
            lr = 0.1
            beta1 = 0.8
            "#,
        )
        .unwrap();
        assert_eq!(c.command, Some(Command::Convergence));
        assert_eq!(c.convergence.schedule[1], (16, 16));
        assert_eq!(c.convergence.sampling, Sampling::Direct);
        let k = c.bench.optimizers[0].build().unwrap();
        assert_eq!(k, OptimizerKind::Adam { lr: 0.1, beta1: 0.8, beta2: 0.999, eps: 1e-8 });
    }

    #[test]
    fn short_schedule_rejected() {
        let c = parse("[convergence]\nschedule = [[1, 1], [2, 2]]").unwrap();
        assert!(matches!(c.convergence.validate(), Err(CliError::Config(_))));
    }

    #[test]
    fn unknown_optimizer_named_in_error() {
        let c = parse("[[bench.optimizers]]\nname = \"RMSprop\"").unwrap();
        match c.bench.validate() {
            Err(CliError::Config(msg)) => assert!(msg.contains("RMSprop")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn misplaced_hyperparameter_rejected() {
        let c = parse("[[bench.optimizers]]\nname = \"SGD\"\nmomentum = 0.5").unwrap();
        assert!(c.bench.validate().is_err());
    }

    #[test]
    fn default_learning_rates_follow_comparison_set() {
        for (name, lr) in [("SGD", 0.01), ("PSGD", 0.01), ("NAG", 0.005), ("AdaGrad", 0.1), ("ADAM", 0.05)] {
            let c = parse(&format!("[[bench.optimizers]]\nname = \"{name}\"")).unwrap();
            assert_eq!(c.bench.optimizers[0].build().unwrap().lr(), lr, "{name}");
        }
    }
}
