use resde::analysis::second_moment_profile;
use resde::{estimate_strong_error, lookup, DriftSampling, EstimatorOptions};

#[test]
fn sin2d_second_moments_are_stable() {
    let p = lookup("sin2d").unwrap();
    let grid = [50, 100, 200];
    let mut maxima = Vec::new();
    for (i, &n) in grid.iter().enumerate() {
        for (j, &m) in grid.iter().enumerate() {
            let seed = (3 * i + j) as u64;
            let prof = second_moment_profile(&p, n, m, 10_000, seed, DriftSampling::Auto).unwrap();
            maxima.push(prof.into_iter().fold(0.0, f64::max));
        }
    }
    let hi = maxima.iter().cloned().fold(f64::MIN, f64::max);
    let lo = maxima.iter().cloned().fold(f64::MAX, f64::min);
    assert!(hi / lo - 1.0 < 0.10, "{maxima:?}");
}

#[test]
fn sin2d_error_shrinks_under_refinement() {
    let p = lookup("sin2d").unwrap();
    let wins = (0..20u64)
        .filter(|&r| {
            let opts = EstimatorOptions {
                ratio: 20,
                replicates: 2000,
                seed: 1000 + r,
                sampling: DriftSampling::Auto,
                ..Default::default()
            };
            let coarse = estimate_strong_error(&p, 25, 25, &opts).unwrap();
            let fine = estimate_strong_error(&p, 50, 50, &EstimatorOptions { seed: 2000 + r, ..opts }).unwrap();
            fine.epsilon < coarse.epsilon
        })
        .count();
    assert!(wins >= 19, "{wins} of 20");
}
