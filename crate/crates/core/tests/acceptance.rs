//! End-to-end acceptance run: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`). Every criterion is evaluated
//! even when an earlier one fails; the process exits non-zero if any failed.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use ddlab::dataset::{noisy_two_class, Dataset};
use ddlab::minnorm::{solve_min_norm, solve_ridge, ThinSvd, DEFAULT_RANK_TOL};
use ddlab::nn::{InitMode, TwoLayerNet};
use ddlab::sweep::{
    self, check_double_descent, compute_risks, Family, RiskMetric, RiskPoint, SweepConfig,
    ThresholdCriterion,
};
use ddlab::theory::{self, ApproxConfig};
use ddlab::trees::{
    fit_forest, fit_l2_boost, BoostParams, ForestParams, RegressionTree, TreeParams,
};
use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

type Outcome = Result<String, String>;

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn require(ok: bool, what: impl Into<String>, failures: &mut Vec<String>) {
    if !ok {
        failures.push(what.into());
    }
}

fn verdict(summary: String, failures: Vec<String>) -> Outcome {
    if failures.is_empty() {
        Ok(summary)
    } else {
        Err(format!("{summary}; failed: {}", failures.join("; ")))
    }
}

fn within(elapsed: Duration, limit_secs: u64, failures: &mut Vec<String>) {
    require(
        elapsed.as_secs() < limit_secs,
        format!("runtime {:.0}s over {limit_secs}s", elapsed.as_secs_f64()),
        failures,
    );
}

fn mean_of(p: &RiskPoint, f: fn(&RiskPoint) -> Option<sweep::Stat>) -> f64 {
    f(p).map_or(f64::NAN, |s| s.mean)
}

fn gaussian(rows: usize, cols: usize, rng: &mut impl rand::Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

fn synthetic_circle() -> Outcome {
    let start = Instant::now();
    let grid = vec![
        16, 32, 64, 128, 192, 224, 256, 288, 320, 384, 512, 1024, 2048,
    ];
    let mut cfg = SweepConfig::new(Family::Synthetic, grid);
    cfg.repeats = Some(20);
    cfg.base_seed = 2019;
    cfg.synthetic.n = 256;
    cfg.synthetic.snr = 20.0;
    let result = sweep::run_sweep(&cfg).map_err(|e| e.to_string())?;
    let curve: Vec<&RiskPoint> = result.curve().collect();
    let excess = |p: &RiskPoint| mean_of(p, |p| p.test_sq);
    let norm = |p: &RiskPoint| mean_of(p, |p| p.norm);
    let argmax = |f: &dyn Fn(&RiskPoint) -> f64| {
        curve
            .iter()
            .max_by(|a, b| f(a).total_cmp(&f(b)))
            .map(|p| p.capacity)
            .unwrap()
    };
    let mut failures = Vec::new();
    let risk_peak = argmax(&excess);
    require(
        risk_peak == 256,
        format!("(a) excess risk peaks at N={risk_peak}"),
        &mut failures,
    );

    let best_under = curve
        .iter()
        .filter(|p| p.capacity < 256)
        .map(|p| excess(p))
        .fold(f64::INFINITY, f64::min);
    let last = excess(curve.last().unwrap());
    require(
        last < best_under,
        format!("(b) excess risk at N=2048 is {last:.4e}, best below N=256 is {best_under:.4e}"),
        &mut failures,
    );

    let norm_peak = argmax(&norm);
    require(
        norm_peak == 256,
        format!("(c) norm peaks at N={norm_peak}"),
        &mut failures,
    );
    let shape = check_double_descent(&result.points, 256, RiskMetric::TestSquared, 1.0)
        .map_err(|e| e.to_string())?;
    require(
        shape.norm_nonincreasing_after,
        "(c) norm rises by more than one trial std beyond N=256",
        &mut failures,
    );
    within(start.elapsed(), 600, &mut failures);
    verdict(
        format!(
            "peak N={risk_peak} ({:.3e}), N=2048 {last:.3e} vs best under {best_under:.3e}, norm peak N={norm_peak}, {:.0}s",
            curve.iter().map(|p| excess(p)).fold(0.0, f64::max),
            start.elapsed().as_secs_f64()
        ),
        failures,
    )
}

/// Criteria 2 and 3 share one sweep.
fn rff_mnist() -> (Outcome, Outcome) {
    let start = Instant::now();
    let run = SweepConfig::load(&root().join("configs/rff_mnist.toml"))
        .and_then(|cfg| sweep::run_sweep(&cfg));
    let result = match run {
        Ok(r) => r,
        Err(e) => return (Err(e.to_string()), Err(e.to_string())),
    };
    let elapsed = start.elapsed();
    let curve: Vec<&RiskPoint> = result.curve().collect();
    let test01 = |p: &RiskPoint| mean_of(p, |p| p.test_01);

    let mut failures = Vec::new();
    let threshold = result.threshold_squared;
    require(
        threshold == Some(1000),
        format!("threshold {threshold:?}"),
        &mut failures,
    );
    let at = curve
        .iter()
        .find(|p| p.capacity == 1000)
        .map(|p| test01(p))
        .unwrap_or(f64::NAN);
    let largest = curve.last().unwrap();
    let end = test01(largest);
    require(
        2.0 * end <= at,
        format!(
            "test 0-1 at N={} is {end:.4}, at threshold {at:.4}",
            largest.capacity
        ),
        &mut failures,
    );
    let norm_peak = curve
        .iter()
        .max_by(|a, b| mean_of(a, |p| p.norm).total_cmp(&mean_of(b, |p| p.norm)))
        .map(|p| p.capacity);
    require(
        norm_peak == Some(1000),
        format!("norm peaks at {norm_peak:?}"),
        &mut failures,
    );
    within(elapsed, 1800, &mut failures);
    let second = verdict(
        format!(
            "threshold {threshold:?}, test 0-1 {at:.3} at threshold -> {end:.3} at N={}, norm peak {norm_peak:?}, {:.0}s",
            largest.capacity,
            elapsed.as_secs_f64()
        ),
        failures,
    );

    let third = (|| {
        let kernel = result
            .references()
            .find(|p| p.family == "rff_inf")
            .ok_or("no kernel reference row")?;
        let n_test = result.metadata.n_test.ok_or("test size not recorded")? as f64;
        let best = curve
            .iter()
            .map(|p| test01(p))
            .fold(f64::INFINITY, f64::min);
        let se = (best * (1.0 - best) / n_test).sqrt();
        let k01 = test01(kernel);
        let summary = format!(
            "kernel test 0-1 {k01:.4} vs best rff {best:.4} + 2 SE ({:.4}), n_test {n_test}",
            best + 2.0 * se
        );
        let mut failures = Vec::new();
        require(
            k01 <= best + 2.0 * se,
            "kernel machine worse than the bound",
            &mut failures,
        );
        verdict(summary, failures)
    })();
    (second, third)
}

fn min_norm_suite() -> Outcome {
    let start = Instant::now();
    let mut rng = ddlab::seed::rng(4);
    let mut failures = Vec::new();
    let mut worst = [0.0f64; 3];
    let instances = 100;
    for i in 0..instances {
        let n = 5 + i % 25;
        let d = n + 1 + (i * 7) % 40;
        let a = gaussian(n, d, &mut rng);
        let y = gaussian(n, 2, &mut rng);
        let fit = solve_min_norm(&a, &y, DEFAULT_RANK_TOL, None).map_err(|e| e.to_string())?;

        // interpolation
        let rel = fit.residual_sq.sqrt() / y.norm();
        worst[0] = worst[0].max(rel);
        require(
            rel <= 1e-10,
            format!("instance {i}: relative residual {rel:e}"),
            &mut failures,
        );

        // null-space perturbations keep the fit and grow the norm
        let svd = ThinSvd::new(&a).map_err(|e| e.to_string())?;
        let z = DVector::from_column_slice(gaussian(d, 1, &mut rng).as_slice());
        let dz = svd.project_to_null_space(&z, DEFAULT_RANK_TOL);
        let a0 = fit.coefficients.column(0).into_owned();
        for scale in [1e-4, 1e-2, 1.0] {
            let p = &a0 + &dz * scale;
            let same_fit = (&a * &p - y.column(0)).norm() <= 1e-8 * (1.0 + y.norm());
            require(
                same_fit && p.norm() > a0.norm(),
                format!("instance {i}: perturbation {scale} lowered the norm or broke the fit"),
                &mut failures,
            );
        }

        // pseudoinverse oracle through the normal equations of the full-rank side
        let at = a.transpose();
        let oracle = match (&a * &at).cholesky() {
            Some(g) => &at * g.solve(&y),
            None => return Err(format!("instance {i}: oracle gram not positive definite")),
        };
        let dev = (&fit.coefficients - &oracle).amax() / (1.0 + oracle.amax());
        worst[1] = worst[1].max(dev);
        require(
            dev <= 1e-8,
            format!("instance {i}: oracle deviation {dev:e}"),
            &mut failures,
        );

        // ridge norm decreases in lambda and stays below the min-norm norm
        let mut prev = fit.coefficient_norm * (1.0 + 1e-12);
        for e in (-8..=2).map(|e| 10f64.powi(e)) {
            let r = solve_ridge(&a, &y, e).map_err(|e| e.to_string())?;
            worst[2] = worst[2].max(r.coefficient_norm - prev);
            require(
                r.coefficient_norm <= prev * (1.0 + 1e-12),
                format!("instance {i}: ridge norm rose at lambda {e:e}"),
                &mut failures,
            );
            prev = r.coefficient_norm;
        }
    }
    failures.truncate(5);
    within(start.elapsed(), 60, &mut failures);
    verdict(
        format!(
            "{instances} instances: max residual {:.1e}, max oracle deviation {:.1e}, max ridge norm increase {:.1e}, {:.1}s",
            worst[0],
            worst[1],
            worst[2],
            start.elapsed().as_secs_f64()
        ),
        failures,
    )
}

fn task(n: usize, seed: u64) -> Result<Dataset, String> {
    noisy_two_class(n, 5, 0.2, seed).map_err(|e| e.to_string())
}

fn trees() -> Outcome {
    let start = Instant::now();
    let mut failures = Vec::new();
    let train = task(500, 1)?;
    let test = task(2000, 2)?;
    let n = train.n();

    let rows: Vec<usize> = (0..n).collect();
    let tree = RegressionTree::fit(
        train.features(),
        train.labels(),
        &rows,
        TreeParams {
            max_leaves: n,
            mtry: None,
        },
        3,
    )
    .map_err(|e| e.to_string())?;
    let (tree_train, _) = compute_risks(
        &tree.predict(train.features()),
        train.labels(),
        train.class_ids(),
    )
    .map_err(|e| e.to_string())?;
    require(
        tree_train <= 1e-20,
        format!("(a) single tree train risk {tree_train:e}"),
        &mut failures,
    );

    let mean_test = |n_tree: usize| -> Result<f64, String> {
        let mut total = 0.0;
        for s in 0..5 {
            let f = fit_forest(
                train.features(),
                train.labels(),
                ForestParams {
                    n_tree,
                    max_leaves: n,
                    mtry: None,
                    bootstrap: false,
                },
                100 + s,
            )
            .map_err(|e| e.to_string())?;
            total += compute_risks(&f.predict(test.features()), test.labels(), test.class_ids())
                .map_err(|e| e.to_string())?
                .0;
        }
        Ok(total / 5.0)
    };
    let (one, fifty) = (mean_test(1)?, mean_test(50)?);
    require(
        fifty < one,
        format!("(b) 50 trees {fifty:.4} vs 1 tree {one:.4}"),
        &mut failures,
    );
    within(start.elapsed(), 300, &mut failures);
    verdict(
        format!(
            "tree train risk {tree_train:.1e}; test sq 1 tree {one:.4} -> 50 trees {fifty:.4}, {:.1}s",
            start.elapsed().as_secs_f64()
        ),
        failures,
    )
}

fn boosting() -> Outcome {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut checked = 0;
    for shrinkage in [0.85, 0.1] {
        for instance in 0..20u64 {
            let ds = noisy_two_class(
                100 + 20 * instance as usize,
                2 + instance as usize % 6,
                0.2,
                50 + instance,
            )
            .map_err(|e| e.to_string())?;
            let b = fit_l2_boost(
                ds.features(),
                ds.labels(),
                BoostParams {
                    n_tree: 30,
                    shrinkage,
                    max_leaves: 10,
                    mtry: None,
                    n_forest: 1,
                },
                instance,
            )
            .map_err(|e| e.to_string())?;
            let h = &b.forests[0].train_history;
            checked += 1;
            require(
                h.windows(2).all(|w| w[1] <= w[0]),
                format!("shrinkage {shrinkage}, instance {instance}: training risk increased"),
                &mut failures,
            );
        }
    }
    let train = task(500, 1)?;
    let test = task(2000, 2)?;
    let test_risk = |n_forest: usize| -> Result<f64, String> {
        let b = fit_l2_boost(
            train.features(),
            train.labels(),
            BoostParams {
                n_tree: 20,
                shrinkage: 0.85,
                max_leaves: 10,
                mtry: None,
                n_forest,
            },
            7,
        )
        .map_err(|e| e.to_string())?;
        Ok(
            compute_risks(&b.predict(test.features()), test.labels(), test.class_ids())
                .map_err(|e| e.to_string())?
                .0,
        )
    };
    let (one, ten) = (test_risk(1)?, test_risk(10)?);
    require(
        ten <= one,
        format!("10 forests {ten:.4} vs 1 forest {one:.4}"),
        &mut failures,
    );
    within(start.elapsed(), 300, &mut failures);
    verdict(
        format!(
            "{checked} monotone histories; test sq 1 forest {one:.4} -> 10 forests {ten:.4}, {:.1}s",
            start.elapsed().as_secs_f64()
        ),
        failures,
    )
}

fn gradient_check() -> Result<f64, String> {
    let mut rng = ddlab::seed::rng(8);
    let (d, h, k, n) = (12, 7, 4, 9);
    let x = gaussian(n, d, &mut rng);
    let y = gaussian(n, k, &mut rng);
    let net = TwoLayerNet::init(d, h, k, InitMode::Glorot, None, 5).map_err(|e| e.to_string())?;
    let (_, grad) = net.loss_and_grad(&x, &y);
    let analytic = grad.to_flat();
    let theta = net.to_flat();
    let mut probe = net.clone();
    let eps = 1e-5;
    let mut numeric = vec![0.0; theta.len()];
    for i in 0..theta.len() {
        let mut p = theta.clone();
        p[i] = theta[i] + eps;
        probe.set_flat(&p);
        let plus = probe.loss_and_grad(&x, &y).0;
        p[i] = theta[i] - eps;
        probe.set_flat(&p);
        let minus = probe.loss_and_grad(&x, &y).0;
        numeric[i] = (plus - minus) / (2.0 * eps);
    }
    let diff: f64 = analytic
        .iter()
        .zip(&numeric)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let scale: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
    Ok(diff / scale)
}

fn neural_net() -> Outcome {
    let start = Instant::now();
    let mut failures = Vec::new();
    let grad_rel = gradient_check()?;
    require(
        grad_rel < 1e-5,
        format!("gradient relative error {grad_rel:e}"),
        &mut failures,
    );

    let cfg =
        SweepConfig::load(&root().join("configs/net_mnist.toml")).map_err(|e| e.to_string())?;
    let result = sweep::run_sweep(&cfg).map_err(|e| e.to_string())?;
    let n = result
        .metadata
        .n_train
        .ok_or("training size not recorded")?;
    let k = 10;
    let nk = (n * k) as i64;
    let curve: Vec<&RiskPoint> = result.curve().collect();
    let zero_at: Vec<i64> = curve
        .iter()
        .filter(|p| p.train_01.is_some_and(|s| s.mean == 0.0))
        .map(|p| p.capacity)
        .collect();
    require(
        !zero_at.is_empty(),
        "training zero-one risk never reaches 0",
        &mut failures,
    );

    let threshold =
        sweep::detect_interpolation_threshold(&result.points, ThresholdCriterion::ZeroOne, 0.0);
    // grid position nearest to n K
    let nearest = (0..curve.len())
        .min_by_key(|&i| (curve[i].capacity - nk).abs())
        .unwrap();
    let ok = threshold
        .and_then(|t| curve.iter().position(|p| p.capacity == t))
        .is_some_and(|i| i.abs_diff(nearest) <= 1);
    require(
        ok,
        format!("threshold {threshold:?} not within one grid step of n K = {nk} (nearest grid point {})", curve[nearest].capacity),
        &mut failures,
    );
    within(start.elapsed(), 7200, &mut failures);
    let h_at = threshold.map(|t| (t as usize - k) / (784 + 1 + k));
    verdict(
        format!(
            "gradient rel. error {grad_rel:.1e}; zero train 0-1 at capacities {zero_at:?}; threshold {threshold:?} (H = {h_at:?}), n K = {nk} = params at H {:.2}; {:.0}s",
            (nk as f64 - k as f64) / (784.0 + 1.0 + k as f64),
            start.elapsed().as_secs_f64()
        ),
        failures,
    )
}

fn theory_checks() -> Outcome {
    let start = Instant::now();
    let mut failures = Vec::new();
    let ns: Vec<usize> = (5..=12).map(|e| 1usize << e).collect();
    let mut slopes = Vec::new();
    for d in [1usize, 2] {
        let rows = theory::fill_scaling(d, &ns, 20, 31 + d as u64).map_err(|e| e.to_string())?;
        let kappas: Vec<f64> = rows.iter().map(|r| r.kappa_geo_mean).collect();
        let slope = theory::scaling_slope(&ns, &kappas);
        let want = -1.0 / d as f64;
        require(
            (slope - want).abs() <= 0.1,
            format!("d={d}: slope {slope:.3}, want {want:.3} +- 0.1"),
            &mut failures,
        );
        slopes.push(slope);
    }

    let mut trend = Vec::new();
    let mut violations = 0;
    for (d, n_grid, probes) in [
        (1usize, vec![8, 16, 32, 64, 128, 256, 512], 4001usize),
        (2, vec![16, 32, 64, 128, 256, 512], 81),
    ] {
        let report = theory::noiseless_approx_experiment(&ApproxConfig {
            d,
            sigma: 0.1,
            centers: 12,
            n_grid,
            trials: 20,
            probes_per_side: probes,
            seed: 3,
        })
        .map_err(|e| e.to_string())?;
        violations += report.rows.iter().map(|r| r.norm_violations).sum::<usize>();
        let errs: Vec<f64> = report.rows.iter().map(|r| r.sup_error_mean).collect();
        let first = errs[0];
        let last = *errs.last().unwrap();
        require(
            last < first,
            format!("d={d}: sup error {last:.3e} at the largest n vs {first:.3e} at the smallest"),
            &mut failures,
        );
        if d == 1 {
            let at = |n: usize| {
                report
                    .rows
                    .iter()
                    .find(|r| r.n == n)
                    .map(|r| r.sup_error_mean)
            };
            let (e32, e512) = (at(32).unwrap(), at(512).unwrap());
            require(
                e512 < e32,
                format!("d=1: sup error at 512 {e512:.3e} vs at 32 {e32:.3e}"),
                &mut failures,
            );
        }
        trend.push(format!("d={d} sup error {first:.2e} -> {last:.2e}"));
    }
    require(
        violations == 0,
        format!("{violations} trials with |h| > |h*|"),
        &mut failures,
    );
    within(start.elapsed(), 600, &mut failures);
    verdict(
        format!(
            "fill slopes {:.3} (d=1), {:.3} (d=2); norm violations {violations}; {}; {:.0}s",
            slopes[0],
            slopes[1],
            trend.join(", "),
            start.elapsed().as_secs_f64()
        ),
        failures,
    )
}

fn determinism() -> Outcome {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut configs = Vec::new();

    let mut rff =
        SweepConfig::load(&root().join("configs/rff_mnist.toml")).map_err(|e| e.to_string())?;
    rff.capacities = vec![50, 200, 400, 1000];
    rff.rff.kernel_reference = true;
    if let Some(ds) = rff.dataset.as_mut() {
        ds.n_train = Some(200);
        ds.n_test = Some(300);
    }
    configs.push(rff);
    let mut forest = SweepConfig::new(Family::TreeForest, vec![10, 100, 500, 1000, 2500]);
    forest.dataset = SweepConfig::load(&root().join("configs/forest.toml"))
        .map_err(|e| e.to_string())?
        .dataset;
    configs.push(forest);
    let mut synthetic = SweepConfig::new(Family::Synthetic, vec![16, 64, 128, 256, 1024]);
    synthetic.repeats = Some(4);
    synthetic.synthetic.n = 128;
    configs.push(synthetic);

    let mut rows = 0;
    for cfg in &configs {
        let csv = |workers: usize| -> Result<Vec<u8>, String> {
            let mut c = cfg.clone();
            c.workers = workers;
            let result = sweep::run_sweep(&c).map_err(|e| e.to_string())?;
            let mut out = Vec::new();
            sweep::write_csv(&result.points, &mut out).map_err(|e| e.to_string())?;
            Ok(out)
        };
        let (a, b, c) = (csv(1)?, csv(1)?, csv(2)?);
        rows += a.iter().filter(|&&b| b == b'\n').count() - 1;
        require(
            a == b && a == c,
            format!("{} sweep CSV differs between reruns", cfg.family.name()),
            &mut failures,
        );
    }
    verdict(
        format!(
            "{} sweeps, {rows} rows, identical bytes across reruns and worker counts, {:.0}s",
            configs.len(),
            start.elapsed().as_secs_f64()
        ),
        failures,
    )
}

fn main() {
    let mut outcomes: Vec<(&str, Outcome)> = Vec::new();
    let mut report = |label: &'static str, outcome: Outcome| {
        match &outcome {
            Ok(msg) => println!("PASS {label}: {msg}"),
            Err(msg) => println!("FAIL {label}: {msg}"),
        }
        outcomes.push((label, outcome));
    };
    report("criterion 4 (min-norm solver properties)", min_norm_suite());
    report("criterion 5 (trees and forests)", trees());
    report("criterion 6 (L2-boosting)", boosting());
    report("criterion 9 (determinism)", determinism());
    report(
        "criterion 8 (fill distance and kernel interpolation)",
        theory_checks(),
    );
    let (c2, c3) = rff_mnist();
    report("criterion 2 (random Fourier features on MNIST)", c2);
    report("criterion 3 (kernel reference)", c3);
    report("criterion 1 (synthetic circle)", synthetic_circle());
    report("criterion 7 (two-layer nets on MNIST)", neural_net());

    let failed: Vec<&str> = outcomes
        .iter()
        .filter(|(_, o)| o.is_err())
        .map(|(l, _)| *l)
        .collect();
    println!(
        "{} of {} criteria passed",
        outcomes.len() - failed.len(),
        outcomes.len()
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
