//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
//!
//! Pass substrings as arguments to run a subset, e.g.
//! `cargo test -p resde-cli --test acceptance -- identities`.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use resde::rng::SubstreamTag;
use resde::{
    coupled_wiener, estimate_strong_error, euler_maruyama, fit_loglog_slope, gap_study, lookup, make_stream,
    optimizer_step, randomized_euler, randomized_euler_with, sample_xi, wiener_increments, Diffusion, DriftClass,
    DriftIntegrand, DriftSampling, EstimatorOptions, OptimizerKind, OptimizerState, SchemeConfig, SdeProblem,
    XiDistribution,
};
use resde::analysis::{extreme_ratio, lemma_mc_study};
use tempfile::TempDir;

type Check = Result<(bool, String), String>;

fn within(v: f64, lo: f64, hi: f64) -> bool {
    (lo..=hi).contains(&v)
}

fn resde_cli(args: &[&str], out: &Path) -> Result<(), String> {
    let o = Command::new(env!("CARGO_BIN_EXE_resde"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .map_err(|e| e.to_string())?;
    if o.status.success() {
        Ok(())
    } else {
        Err(format!("resde {} exited {:?}: {}", args.join(" "), o.status.code(), String::from_utf8_lossy(&o.stderr).trim()))
    }
}

fn read(path: &Path) -> Result<String, String> {
    fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn opts(ratio: usize, replicates: u64, sampling: DriftSampling) -> EstimatorOptions {
    EstimatorOptions {
        ratio,
        replicates,
        p: 2.0,
        seed: 2024,
        couple_xi: false,
        sampling,
    }
}

fn error_slope(problem: &SdeProblem, grid: &[(usize, usize)], x: impl Fn(usize, usize) -> f64, o: &EstimatorOptions) -> Result<f64, String> {
    let pts = grid
        .iter()
        .map(|&(n, m)| estimate_strong_error(problem, n, m, o).map(|e| (x(n, m), e.epsilon)))
        .collect::<resde::Result<Vec<_>>>()
        .map_err(|e| e.to_string())?;
    Ok(fit_loglog_slope(&pts).map_err(|e| e.to_string())?.slope)
}

fn sin2d_cost_slope() -> Check {
    let tmp = TempDir::new().map_err(|e| e.to_string())?;
    resde_cli(&["convergence", "--problem", "sin2d"], tmp.path())?;
    let fit: serde_json::Value =
        serde_json::from_str(&read(&tmp.path().join("ratefit.json"))?).map_err(|e| e.to_string())?;
    let slope = fit["slope"].as_f64().ok_or("ratefit.json has no slope")?;
    Ok((within(slope, -4.6, -3.4), format!("slope {slope:.3}, window [-4.6, -3.4], K=2000, ratio 100")))
}

fn space_only_rate() -> Check {
    let p = lookup("linear_decay").map_err(|e| e.to_string())?;
    let grid: Vec<(usize, usize)> = (4..=10).map(|k| (1 << k, 1)).collect();
    let slope = error_slope(&p, &grid, |n, _| n as f64, &opts(4, 2, DriftSampling::Direct))?;
    let mut worst = 0.0f64;
    for &(n, _) in &grid {
        let cfg = SchemeConfig::for_problem(&p, n, 1).map_err(|e| e.to_string())?;
        let got = randomized_euler(&p, &cfg, &make_stream(0, 0)).map_err(|e| e.to_string())?.terminal()[0];
        let want = p.eta[0] * (1.0 - p.t_end / n as f64).powi(n as i32);
        worst = worst.max(((got - want) / want).abs());
    }
    Ok((
        within(slope, -1.1, -0.9) && worst <= 1e-12,
        format!("slope {slope:.3}, window [-1.1, -0.9]; closed form max rel err {worst:.1e} <= 1e-12"),
    ))
}

fn time_only_rate() -> Check {
    let p = lookup("gaussian_mean").map_err(|e| e.to_string())?;
    let grid: Vec<(usize, usize)> = (2..=6).map(|k| (1 << k, 1 << k)).collect();
    let slope = error_slope(&p, &grid, |n, m| (n * m) as f64, &opts(4, 2000, DriftSampling::ExactMean))?;
    Ok((within(slope, -0.6, -0.4), format!("slope in nM {slope:.3}, window [-0.6, -0.4]")))
}

fn general_rate() -> Check {
    let p = lookup("parabolic_nodiff").map_err(|e| e.to_string())?;
    let o = opts(4, 1000, DriftSampling::ExactMean);
    let by_m: Vec<(usize, usize)> = (4..=10).step_by(2).map(|k| (1 << 12, 1 << k)).collect();
    let m_slope = error_slope(&p, &by_m, |_, m| m as f64, &o)?;
    let by_n: Vec<(usize, usize)> = (2..=6).map(|k| (1 << k, 1 << 14)).collect();
    let n_slope = error_slope(&p, &by_n, |n, _| n as f64, &o)?;
    Ok((
        within(m_slope, -0.6, -0.4) && within(n_slope, -1.15, -0.85),
        format!("M slope {m_slope:.3} (n=4096, window [-0.6, -0.4]); n slope {n_slope:.3} (M=16384, window [-1.15, -0.85])"),
    ))
}

fn em_gap_rate() -> Check {
    let p = lookup("parabolic").map_err(|e| e.to_string())?;
    let study = gap_study(&p, 100, &[4, 16, 64, 256, 1024], &opts(1, 2000, DriftSampling::Direct))
        .map_err(|e| e.to_string())?;
    let slope = study.fit.ok_or("a gap was exactly zero")?.slope;
    Ok((within(slope, -0.6, -0.4), format!("slope in M {slope:.3}, window [-0.6, -0.4], n=100, K=2000")))
}

fn drift_error_law() -> Check {
    let mut ok = true;
    let mut parts = Vec::new();
    for name in ["gaussian_mean", "parabolic"] {
        let p = lookup(name).map_err(|e| e.to_string())?;
        let rows = lemma_mc_study(&p, &p.eta, &[100, 1_000, 10_000], 2.0, 10_000, 7).map_err(|e| e.to_string())?;
        let r = extreme_ratio(&rows);
        ok &= within(r, 0.8, 1.25);
        let scaled: Vec<String> = rows.iter().map(|r| format!("{:.3}", r.sqrt_m_scaled)).collect();
        parts.push(format!("{name} ratio {r:.3} (sqrt(M) err {})", scaled.join("/")));
    }
    Ok((ok, format!("{}; window [0.8, 1.25]", parts.join(", "))))
}

fn himmelblau_minima() -> Check {
    let p = lookup("himmelblau_stoch").map_err(|e| e.to_string())?;
    let cfg = SchemeConfig::for_problem(&p, 100, 100).map_err(|e| e.to_string())?;
    let corners = [[-1.0, -1.0], [-1.0, 1.0], [1.0, -1.0], [1.0, 1.0]];
    let mut good = 0;
    let mut dists = Vec::new();
    for seed in 0..100u64 {
        let mut all = true;
        for (c, eta) in corners.iter().enumerate() {
            let q = p.clone().with_eta(eta.to_vec()).map_err(|e| e.to_string())?;
            let t = randomized_euler(&q, &cfg, &make_stream(seed, c as u64)).map_err(|e| e.to_string())?;
            let d = q.nearest_minimum_distance(t.terminal()).map_err(|e| e.to_string())?;
            all &= d < 1e-3;
            dists.push(d);
        }
        good += all as usize;
    }
    dists.sort_by(f64::total_cmp);
    Ok((
        good >= 95,
        format!("{good}/100 seeds with all four corners within 1e-3 (need 95); median distance {:.3e}", dists[dists.len() / 2]),
    ))
}

fn scheme_identities() -> Check {
    let ignoring = DriftIntegrand::new(2, XiDistribution::normal(0.0, 1.0), DriftClass::SpaceOnly, |_, x, o| {
        o[0] = -x[0] + 0.5 * x[1];
        o[1] = 0.3 - x[1];
    });
    let p = SdeProblem::new("ignores_xi", vec![1.0, -2.0], 1.0, ignoring, Diffusion::ScaledIdentity { sigma: 0.4, dim: 2 })
        .map_err(|e| e.to_string())?
        .with_exact_drift(|x, o| {
            o[0] = -x[0] + 0.5 * x[1];
            o[1] = 0.3 - x[1];
        });
    let mut re_em = 0;
    for seed in 0..20u64 {
        let cfg = SchemeConfig::new(16 + seed as usize, 1 + seed as usize % 5, 1.0).map_err(|e| e.to_string())?;
        let s = make_stream(seed, 0);
        let inc = wiener_increments(&mut s.wiener(), 1.0, 2, cfg.n);
        let em = euler_maruyama(&p, &cfg, &inc).map_err(|e| e.to_string())?;
        let re = randomized_euler_with(&p, &cfg, &inc, &mut s.xi()).map_err(|e| e.to_string())?;
        re_em += (em == re) as usize;
    }

    let base = lookup("parabolic").map_err(|e| e.to_string())?;
    let h: f64 = 0.01;
    let mut tape = 0;
    for r in 0..100u64 {
        let s = make_stream(31, r);
        let mut aux = s.substream(SubstreamTag::Aux);
        let x0 = vec![4.0 * aux.gaussian(), 4.0 * aux.gaussian()];
        let dw = vec![h.sqrt() * aux.gaussian(), h.sqrt() * aux.gaussian()];
        let q = base.clone().with_eta(x0.clone()).and_then(|q| q.with_horizon(h)).map_err(|e| e.to_string())?;
        let cfg = SchemeConfig::new(1, 5, h).map_err(|e| e.to_string())?;
        let re = randomized_euler_with(&q, &cfg, &dw, &mut s.xi()).map_err(|e| e.to_string())?;
        let xi = sample_xi(&mut s.xi(), q.drift.xi_dist(), 5).map_err(|e| e.to_string())?;
        let grads: Vec<f64> = xi.chunks_exact(2).flat_map(|xi| q.drift.eval_vec(xi, &x0).into_iter().map(|v| -v)).collect();
        let mut state = OptimizerState::new(&x0);
        optimizer_step(&OptimizerKind::psgd(h, 5, 0.6), &mut state, &grads, &dw).map_err(|e| e.to_string())?;
        tape += (state.x.as_slice() == re.terminal()) as usize;
    }

    let mut worst = 0.0f64;
    for seed in 0..50u64 {
        let (nc, nf) = (3 + seed as usize % 13, 5 + seed as usize % 29);
        let inc = coupled_wiener(&make_stream(seed, 1), 1.0, 2, nc, nf).map_err(|e| e.to_string())?;
        let cells = inc.lcm_cells();
        for (n, rows) in [(nc, &inc.coarse), (nf, &inc.fine)] {
            let per = cells / n;
            for k in 0..n {
                for i in 0..2 {
                    let parts = (k * per..(k + 1) * per).map(|c| inc.lcm_grid[c * 2 + i]);
                    let (sum, scale) = parts.fold((0.0, 0.0), |(s, a), v: f64| (s + v, a + v.abs()));
                    if scale > 0.0 {
                        worst = worst.max((rows[k * 2 + i] - sum).abs() / scale);
                    }
                }
            }
        }
    }
    Ok((
        re_em == 20 && tape == 100 && worst <= 2f64.powi(-40),
        format!("RE==EM {re_em}/20, PSGD tape {tape}/100, additivity max rel {worst:.1e} <= 2^-40"),
    ))
}

fn cli_determinism() -> Check {
    let cases: [(&str, &str, &[&str]); 3] = [
        (
            "convergence",
            "[convergence]\nschedule = [[8, 8], [16, 16], [32, 32]]\nreplicates = 200\nratio = 4\n",
            &["convergence.csv", "ratefit.json"],
        ),
        (
            "lemma-check",
            "[lemma]\nms = [10, 100, 1000]\nreplicates = 500\ngap_n = 20\ngap_ms = [4, 16, 64]\ngap_replicates = 200\n",
            &["lemma_mc.csv", "lemma_gap.csv", "lemma.json"],
        ),
        ("optimize-bench", "[bench]\ncount = 100\nsteps = 50\n", &["bench.csv", "bench_meta.json"]),
    ];
    let mut identical = 0;
    let mut total = 0;
    for (cmd, toml, files) in cases {
        let tmp = TempDir::new().map_err(|e| e.to_string())?;
        let cfg = tmp.path().join("exp.toml");
        fs::write(&cfg, toml).map_err(|e| e.to_string())?;
        let cfg = cfg.to_str().ok_or("non-utf8 temp path")?;
        for t in ["1", "8"] {
            resde_cli(&[cmd, "--config", cfg, "--threads", t, "--seed", "5"], &tmp.path().join(t))?;
        }
        for f in files {
            total += 1;
            identical += (read(&tmp.path().join("1").join(f))? == read(&tmp.path().join("8").join(f))?) as usize;
        }
    }
    Ok((identical == total, format!("{identical}/{total} output files byte-identical across --threads 1 and 8")))
}

fn optimizer_ordering() -> Check {
    let tmp = TempDir::new().map_err(|e| e.to_string())?;
    resde_cli(&["optimize-bench"], tmp.path())?;
    let csv = read(&tmp.path().join("bench.csv"))?;
    let finals: Vec<(String, String, f64)> = csv
        .lines()
        .skip(1)
        .filter_map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[2] == "200").then(|| (f[0].to_owned(), f[1].to_owned(), f[3].parse().unwrap_or(f64::NAN)))
        })
        .collect();
    let get = |p: &str, o: &str| finals.iter().find(|r| r.0 == p && r.1 == o).map(|r| r.2);
    let mut ok = true;
    let mut parts = Vec::new();
    for p in ["paraboloid_det", "himmelblau_det", "sigmoid_det"] {
        let (ps, ad, na) = match (get(p, "PSGD"), get(p, "ADAM"), get(p, "NAG")) {
            (Some(a), Some(b), Some(c)) => (a, b, c),
            _ => return Err(format!("missing final rows for {p}")),
        };
        ok &= ps > ad && ps > na;
        parts.push(format!("{p} PSGD {ps:.2} ADAM {ad:.2} NAG {na:.2}"));
    }
    Ok((ok, parts.join("; ")))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 10] = [
        ("sin2d_cost_slope", sin2d_cost_slope),
        ("space_only_rate", space_only_rate),
        ("time_only_rate", time_only_rate),
        ("general_rate", general_rate),
        ("em_gap_rate", em_gap_rate),
        ("drift_error_law", drift_error_law),
        ("himmelblau_minima", himmelblau_minima),
        ("scheme_identities", scheme_identities),
        ("cli_determinism", cli_determinism),
        ("optimizer_ordering", optimizer_ordering),
    ];
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        for (name, _) in criteria {
            println!("{name}: test");
        }
        return;
    }
    let filters: Vec<&String> = args.iter().filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, check) in criteria {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let (pass, detail) = check().unwrap_or_else(|e| (false, format!("error: {e}")));
        failed += !pass as usize;
        println!(
            "{} {name:<20} {detail} [{:.1}s]",
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
