//! Randomized Euler scheme for SDEs whose drift is an expectation,
//! `dX = a(X) dt + b(X) dW` with `a(x) = E H(ξ, x)`.

pub mod analysis;
pub mod error;
pub mod model;
pub mod optim;
pub mod rng;
pub mod schemes;

pub use error::{Error, NumericError, Result};
pub use model::{
    catalog, drift_mc, lookup, synthetic, verify_class_tag, verify_linear_growth, Diffusion, DriftClass,
    DriftIntegrand, GrowthReport, Minima, SdeProblem, XiDistribution, XiFeature, XiSampler,
};
pub use rng::{coupled_wiener, make_stream, sample_xi, wiener_increments, RandomStream, Substream, SubstreamTag};
pub use schemes::{
    coupled_pair, em_re_pair, euler_maruyama, randomized_euler, randomized_euler_with, CoupledTerminalPair,
    DriftSampling, SchemeConfig, Trajectory,
};
pub use analysis::{
    estimate_strong_error, fit_loglog_slope, gap_study, info_cost, mc_drift_error, rate_study, ErrorEstimate,
    EstimatorOptions, GapStudy, RateFit, RateStudy,
};
pub use optim::{
    nearest_minimum_distance, optimizer_step, run_benchmark, run_optimizer, sample_initial_points, BenchmarkReport,
    BenchmarkRow, BenchmarkSpec, OptimizerKind, OptimizerState,
};
