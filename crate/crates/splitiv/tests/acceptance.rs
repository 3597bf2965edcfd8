//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits nonzero if any failed.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use splitiv::{run_benchmark, Execution, ExperimentConfig};
use splitiv_core::bounds::{corollary_rate, gamma, ideal_window, mc_check_gamma, GammaParams};
use splitiv_core::estimator::{clip_singular_values, iv_estimate, ls_estimate, IvConfig};
use splitiv_core::polyfilter::{build_filter, FilterSpec};
use splitiv_core::splitfilters::{rho_truncate, DesignMatrices, Mode};
use splitiv_core::DMatrix;

/// Collects named checks for one criterion.
#[derive(Default)]
struct Checks {
    failed: Vec<String>,
    notes: Vec<String>,
}

impl Checks {
    fn check(&mut self, ok: bool, what: impl Into<String>) {
        let what = what.into();
        if !ok {
            self.failed.push(what.clone());
        }
        self.notes.push(what);
    }

    fn note(&mut self, what: impl Into<String>) {
        self.notes.push(what.into());
    }
}

fn within(v: f64, lo: f64, hi: f64) -> bool {
    (lo..=hi).contains(&v)
}

fn experiment(mode: Mode, overrides: &[&str]) -> ExperimentConfig {
    let mut config = ExperimentConfig::default();
    config.pipeline.mode = mode;
    config.apply_overrides(overrides).expect("valid overrides");
    config
}

fn continuous_replication(c: &mut Checks) {
    let config = experiment(Mode::Continuous, &["trials=200"]);
    let b = run_benchmark(&config, Execution::Parallel).expect("benchmark runs");
    let s = &b.summary;
    c.note(format!("p={}", s.effective_p));
    c.check(
        s.trials.failed == 0,
        format!("failed trials {}", s.trials.failed),
    );
    c.check(
        s.iv.bias_pct <= 0.2,
        format!("iv bias {:.4} <= 0.2", s.iv.bias_pct),
    );
    c.check(
        within(s.ls.bias_pct, 1.8, 3.0),
        format!("ls bias {:.4} in [1.8, 3.0]", s.ls.bias_pct),
    );
    c.check(
        s.iv.rmse_pct <= 1.2,
        format!("iv rmse {:.4} <= 1.2", s.iv.rmse_pct),
    );
    c.check(
        within(s.ls.rmse_pct, 1.9, 3.0),
        format!("ls rmse {:.4} in [1.9, 3.0]", s.ls.rmse_pct),
    );
    c.check(
        s.bias_ratio_ls_over_iv >= 20.0,
        format!("bias ratio {:.1} >= 20", s.bias_ratio_ls_over_iv),
    );
}

fn discrete_replication(c: &mut Checks) {
    let config = experiment(Mode::Discrete, &["trials=200", "eta=1"]);
    let b = run_benchmark(&config, Execution::Parallel).expect("benchmark runs");
    let s = &b.summary;
    c.note(format!("p={}", s.effective_p));
    c.check(
        s.trials.failed == 0,
        format!("failed trials {}", s.trials.failed),
    );
    c.check(
        s.iv.bias_pct <= 0.05,
        format!("iv bias {:.5} <= 0.05", s.iv.bias_pct),
    );
    c.check(
        within(s.ls.bias_pct, 1.2, 1.9),
        format!("ls bias {:.4} in [1.2, 1.9]", s.ls.bias_pct),
    );
    c.check(
        s.rmse_ratio_ls_over_iv >= 5.0,
        format!("rmse ratio {:.1} >= 5", s.rmse_ratio_ls_over_iv),
    );
}

fn poly_eval(coef: &[f64], x: f64) -> f64 {
    coef.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

fn filter_exactness(c: &mut Checks) {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);

    let mut worst: f64 = 0.0;
    for spec in [
        FilterSpec::new(10, 0.1, 5.5, 0, 4),
        FilterSpec::new(16, 0.05, 3.25, 1, 6),
        FilterSpec::new(25, 0.02, 12.75, 2, 8),
        FilterSpec::new(100, 0.002, 50.25, 1, 75),
    ] {
        let w = build_filter(&spec).expect("filter builds");
        let x0 = spec.location * spec.step;
        let span = spec.window as f64 * spec.step;
        let d = spec.derivative;
        for _ in 0..100 {
            let coef: Vec<f64> = (0..spec.exactness)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            let samples: Vec<f64> = (1..=spec.window)
                .map(|k| poly_eval(&coef, (k as f64 * spec.step - x0) / span))
                .collect();
            let fact: f64 = (1..=d).map(|v| v as f64).product();
            let exact = coef.get(d).copied().unwrap_or(0.0) * fact / span.powi(d as i32);
            let scale = exact.abs().max(1.0 / span.powi(d as i32));
            let got = w.apply(&samples, d).expect("apply");
            worst = worst.max((got - exact).abs() / scale);
        }
    }
    c.check(
        worst <= 1e-7,
        format!("polynomial exactness worst {worst:.1e}"),
    );

    // Min-norm: no feasible perturbation lowers the norm.
    let spec = FilterSpec::new(12, 0.1, 4.25, 1, 5);
    let w = build_filter(&spec).expect("filter builds");
    let a = DMatrix::from_fn(12, 5, |k, j| {
        ((k + 1) as f64 - spec.location).powi(j as i32) / 12f64.powi(j as i32)
    });
    let projector = DMatrix::identity(12, 12) - &a * a.clone().pseudo_inverse(1e-14).expect("pinv");
    let stencil = DMatrix::from_row_slice(1, 12, &w.stencil());
    let mut optimal = true;
    for _ in 0..200 {
        let p = DMatrix::from_fn(1, 12, |_, _| rng.random_range(-1.0..1.0)) * &projector;
        optimal &= (&stencil + &p).norm() >= stencil.norm() - 1e-12;
    }
    c.check(optimal, "min-norm optimality");

    let delta = build_filter(&FilterSpec::new(7, 0.3, 4.0, 0, 7))
        .expect("filter builds")
        .stencil();
    let is_delta = delta
        .iter()
        .enumerate()
        .all(|(k, v)| (v - if k == 3 { 1.0 } else { 0.0 }).abs() <= 1e-12);
    c.check(is_delta, "delta stencil");

    let h = 0.1;
    let cd = build_filter(&FilterSpec::new(5, h, 3.0, 1, 5))
        .expect("filter builds")
        .stencil();
    let golden = [1.0, -8.0, 0.0, 8.0, -1.0].map(|v| v / (12.0 * h));
    let cd_ok = cd.iter().zip(golden).all(|(a, b)| (a - b).abs() <= 1e-9);
    c.check(cd_ok, "central difference");

    let elapsed = started.elapsed().as_secs_f64();
    c.check(elapsed < 1.0, format!("{elapsed:.3}s < 1s"));
}

fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(0.0, |a: f64, &s| a.max(s))
}

fn clip_and_truncate(c: &mut Checks) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut clip_ok = true;
    let mut floor_ok = true;
    for _ in 0..1000 {
        let rows = rng.random_range(1..8);
        let cols = rng.random_range(1..8);
        let scale = 10f64.powf(rng.random_range(-2.0..2.0));
        let a = DMatrix::from_fn(rows, cols, |_, _| {
            scale * rng.sample::<f64, _>(StandardNormal)
        });
        let lambda = 10f64.powf(rng.random_range(-2.0..1.0));
        let clipped = clip_singular_values(&a, lambda).expect("clip");
        clip_ok &= spectral_norm(&(&clipped - &a)) <= lambda * (1.0 + 1e-9);
        let sv = clipped.svd(false, false).singular_values;
        floor_ok &= sv.iter().all(|&s| s >= lambda * (1.0 - 1e-9));
    }
    c.check(clip_ok, "|A - clip(A)| <= lambda");
    c.check(floor_ok, "sigma_min(clip(A)) >= lambda");

    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut bounded = true;
    let mut contraction = true;
    for _ in 0..1000 {
        let dim = rng.random_range(1..10);
        let scale = 10f64.powf(rng.random_range(-3.0..6.0));
        let mu = 10f64.powf(rng.random_range(-2.0..3.0));
        let x: Vec<f64> = (0..dim)
            .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let y: Vec<f64> = (0..dim)
            .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let (rx, ry) = (rho_truncate(&x, mu), rho_truncate(&y, mu));
        bounded &= norm(&rx) < mu;
        let dx: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
        let dr: Vec<f64> = rx.iter().zip(&ry).map(|(a, b)| a - b).collect();
        contraction &= norm(&dr) <= norm(&dx) * (1.0 + 1e-12);
    }
    c.check(bounded, "|rho(x)| < mu");
    c.check(contraction, "rho is a contraction");
}

fn errors_in_variables(c: &mut Checks) {
    let n = 1_000_000;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut z = Vec::with_capacity(n);
    for _ in 0..n {
        let latent: f64 = rng.sample(StandardNormal);
        x.push(latent + rng.sample::<f64, _>(StandardNormal));
        y.push(latent + rng.sample::<f64, _>(StandardNormal));
        z.push(latent + rng.sample::<f64, _>(StandardNormal));
    }
    let design = DesignMatrices::new(
        DMatrix::from_vec(n, 1, x),
        DMatrix::from_vec(n, 1, y),
        DMatrix::from_vec(n, 1, z),
    )
    .expect("design");
    let ls = ls_estimate(&design).expect("ls").theta[(0, 0)];
    let iv = iv_estimate(&design, &IvConfig::new(1.0, 1e9).expect("config"))
        .expect("iv")
        .theta[(0, 0)];
    c.check(
        (ls / 0.5 - 1.0).abs() <= 0.02,
        format!("ls {ls:.4} within 2% of 0.5"),
    );
    c.check(
        (iv - 1.0).abs() <= 0.02,
        format!("iv {iv:.4} within 2% of 1"),
    );
}

fn gamma_validity(c: &mut Checks) {
    let mut points = 0;
    let mut worst: f64 = 0.0;
    let mut head_exact = true;
    for r in [1.0, 2.0, 4.0] {
        for (a, b) in [(0.1, 1.0), (1.0, 10.0), (1.0, 100.0)] {
            for k in [0.3, 3.0, 30.0] {
                let params = GammaParams { r, a, b, k };
                let check = mc_check_gamma(&params, 100_000, points).expect("mc check");
                worst = worst.max(check.ratio);
                head_exact &= gamma(&params).expect("gamma").head == 2.0 / b;
                points += 1;
            }
        }
    }
    c.check(points >= 27, format!("{points} grid points"));
    c.check(worst <= 1.0, format!("worst ratio {worst:.3} <= 1"));
    c.check(head_exact, "head = 2/b");
}

fn rates(c: &mut Checks) {
    let rate = corollary_rate(100_000, 1e-3, 2, 1).expect("rate");
    let hand = 0.251188643150958 + 0.0501187233627272;
    c.check(
        (rate - hand).abs() <= 1e-12,
        format!("corollary rate {rate:.6}"),
    );
    let window = ideal_window(1e-3, 2).expect("window");
    c.check(
        (window - 251.188643150958).abs() <= 1e-9,
        format!("ideal window {window:.3}"),
    );

    let mut rmse = Vec::new();
    for n in [25_000, 50_000, 100_000] {
        let n = format!("n={n}");
        let config = experiment(Mode::Continuous, &["trials=100", &n]);
        let b = run_benchmark(&config, Execution::Parallel).expect("benchmark runs");
        rmse.push(b.summary.iv.rmse_pct);
    }
    let decreasing = rmse.windows(2).all(|w| w[1] < w[0]);
    c.check(decreasing, format!("iv rmse {rmse:.3?} decreasing in n"));
}

fn determinism(c: &mut Checks) {
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../manifests/smoke.json");
    let dir = tempfile::tempdir().expect("tempdir");
    let run = |name: &str, extra: &[&str]| {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_splitiv"))
            .arg("benchmark")
            .arg("--config")
            .arg(&manifest)
            .arg("--out")
            .arg(&out)
            .args(extra)
            .output()
            .expect("binary runs");
        assert!(
            status.status.success(),
            "{}",
            String::from_utf8_lossy(&status.stderr)
        );
        out
    };
    let (a, b, serial) = (run("a", &[]), run("b", &[]), run("serial", &["--serial"]));
    for file in ["trials.csv", "summary.json", "kde.csv"] {
        let read = |d: &Path| std::fs::read(d.join(file)).expect("output exists");
        c.check(read(&a) == read(&b), format!("{file} identical"));
        c.check(
            read(&a) == read(&serial),
            format!("{file} serial = parallel"),
        );
    }
}

type Criterion = fn(&mut Checks);

fn main() -> ExitCode {
    let criteria: [(&str, Criterion); 8] = [
        ("continuous replication", continuous_replication),
        ("discrete replication", discrete_replication),
        ("filter exactness", filter_exactness),
        ("clip and truncation", clip_and_truncate),
        ("errors-in-variables oracle", errors_in_variables),
        ("gamma bound validity", gamma_validity),
        ("rate formulas and trend", rates),
        ("benchmark determinism", determinism),
    ];
    let mut all_passed = true;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let mut checks = Checks::default();
        let outcome = catch_unwind(AssertUnwindSafe(|| run(&mut checks)));
        let passed = outcome.is_ok() && checks.failed.is_empty();
        all_passed &= passed;
        let detail = match outcome {
            Ok(()) if passed => checks.notes.join("; "),
            Ok(()) => format!("failed: {}", checks.failed.join("; ")),
            Err(e) => format!(
                "panicked: {}",
                e.downcast_ref::<String>()
                    .map(String::as_str)
                    .or(e.downcast_ref::<&str>().copied())
                    .unwrap_or("?")
            ),
        };
        println!(
            "criterion {} {}: {} ({:.1}s) {}",
            i + 1,
            name,
            if passed { "PASS" } else { "FAIL" },
            started.elapsed().as_secs_f64(),
            detail
        );
    }
    if all_passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
