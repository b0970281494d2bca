//! Acceptance run. Prints one `PASS`/`FAIL` line per criterion and exits
//! non-zero if any criterion fails.
//!
//! The grid criteria simulate and fit the full desk-scale settings, so this
//! target takes several minutes. Set `FACTOR_DEMAND_STRETCH=1` to also run
//! the one-replication minibatch check at I=1000, and
//! `FACTOR_DEMAND_ONLY=determinism,oracles` (step names as printed) to run
//! a subset.

mod common;

use std::path::Path;
use std::time::Instant;

use common::oracles::*;
use common::{close, gaussian_draw, panel};
use factor_demand::cli;
use factor_demand::eval::experiment::{ElasticityPlotRow, RuntimeRow};
use factor_demand::eval::metrics::{predicted_probabilities, rmse};
use factor_demand::eval::{own_price_elasticities, run_experiment, ExperimentConfig, ExperimentOutput, ModelChoice, Setting};
use factor_demand::mixedlogit::{
    predict_mixed_logit, simulate_mixed_logit, simulated_loglik, HaltonDraws, MixedLogitParams, DEFAULT_BURN_IN,
};
use factor_demand::model::{choice_probabilities, grad_log_joint, log_joint, log_likelihood};
use factor_demand::{Block, Dims, Layout, ModelKind, ParamDraw, PriorSpec};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

const BASE_SEED: u64 = 2024;
const PARALLEL: usize = 4;

const SMALL_RMSE: (f64, f64) = (0.163, 0.05);
const SMALL_ACCURACY: (f64, f64) = (0.269, 0.08);
const SECOND_RMSE: (f64, f64) = (0.085, 0.03);
const SECOND_ACCURACY: (f64, f64) = (0.53, 0.08);
const ORDERING_SHARE: f64 = 0.8;
const FACTOR_SLOPE_MAX: f64 = 1.3;
const GRADIENT_INSTANCES: u64 = 50;
const GRADIENT_REL_TOL: f64 = 1e-6;
const LOGLIK_TOL: f64 = 1e-10;
const RMSE_TOL: f64 = 1e-12;
const SIMULATED_LOGLIK_REL_TOL: f64 = 1e-3;
const ELASTICITY_REL_TOL: f64 = 1e-3;
const INVARIANCE_INSTANCES: u64 = 50;
const STRETCH_RMSE: (f64, f64) = (0.0795, 0.04);
const STRETCH_SECONDS: f64 = 7200.0;

struct Tally {
    failed: usize,
}

impl Tally {
    fn record(&mut self, id: &str, pass: bool, what: &str, detail: String) {
        println!("{} [{id}] {what}: {detail}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            self.failed += 1;
        }
    }
}

fn within(value: f64, (target, tol): (f64, f64)) -> bool {
    (value - target).abs() <= tol
}

fn experiment(settings: Vec<Setting>, replications: usize) -> ExperimentOutput {
    let config = ExperimentConfig::new(settings, replications, BASE_SEED);
    run_experiment(&config, PARALLEL).expect("experiment runs")
}

fn model_rmse(out: &ExperimentOutput, setting: usize, model: ModelChoice) -> Vec<f64> {
    out.detail
        .iter()
        .filter(|d| d.setting == setting && d.model == model)
        .filter_map(|d| d.rmse)
        .collect()
}

fn model_accuracy(out: &ExperimentOutput, setting: usize, model: ModelChoice) -> Vec<f64> {
    out.detail
        .iter()
        .filter(|d| d.setting == setting && d.model == model)
        .filter_map(|d| d.accuracy)
        .collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sd(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

fn failures(out: &ExperimentOutput) -> usize {
    out.detail.iter().filter(|d| !d.is_ok()).count()
}

/// Least-squares slope of `ln y` on `ln x`.
fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let (mx, my) = (mean(&xs), mean(&ys));
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn small_and_prior(t: &mut Tally) {
    let small = Setting::new(40, 10, 5, 10, 5).with_models(&[ModelChoice::Dynamic]);
    let out = experiment(vec![small.clone()], 10);
    let r = model_rmse(&out, 0, ModelChoice::Dynamic);
    let a = model_accuracy(&out, 0, ModelChoice::Dynamic);
    t.record(
        "1",
        r.len() == 10 && within(mean(&r), SMALL_RMSE) && within(mean(&a), SMALL_ACCURACY),
        "small setting I=40 J=10 T=5 C=10 K=5, R=10",
        format!(
            "rmse {:.4} (target {} +- {}), accuracy {:.4} (target {} +- {}), {} ok",
            mean(&r),
            SMALL_RMSE.0,
            SMALL_RMSE.1,
            mean(&a),
            SMALL_ACCURACY.0,
            SMALL_ACCURACY.1,
            r.len()
        ),
    );

    let mut config = ExperimentConfig::new(vec![small], 10, BASE_SEED);
    config.fit.prior = PriorSpec::new(10.0).unwrap();
    let wide = run_experiment(&config, PARALLEL).expect("experiment runs");
    let w = model_rmse(&wide, 0, ModelChoice::Dynamic);
    let diff = (mean(&w) - mean(&r)).abs();
    let spread = sd(&r);
    t.record(
        "9",
        w.len() == 10 && diff < spread,
        "prior scale 10 vs 1 at the small setting",
        format!("rmse {:.4} vs {:.4}, |diff| {:.4} < sd {:.4}", mean(&w), mean(&r), diff, spread),
    );
}

fn second_and_ordering(t: &mut Tally) {
    let both = [ModelChoice::Dynamic, ModelChoice::Static];
    let c10 = experiment(vec![Setting::new(40, 10, 20, 10, 5).with_models(&both)], 10);
    let r = model_rmse(&c10, 0, ModelChoice::Dynamic);
    let a = model_accuracy(&c10, 0, ModelChoice::Dynamic);
    t.record(
        "2",
        r.len() == 10 && within(mean(&r), SECOND_RMSE) && within(mean(&a), SECOND_ACCURACY),
        "second setting I=40 J=10 T=20 C=10 K=5, R=10",
        format!(
            "rmse {:.4} (target {} +- {}), accuracy {:.4} (target {} +- {}), {} ok",
            mean(&r),
            SECOND_RMSE.0,
            SECOND_RMSE.1,
            mean(&a),
            SECOND_ACCURACY.0,
            SECOND_ACCURACY.1,
            r.len()
        ),
    );

    let c50 = experiment(vec![Setting::new(40, 10, 20, 50, 5).with_models(&both)], 5);
    let share = |out: &ExperimentOutput| {
        let d = model_rmse(out, 0, ModelChoice::Dynamic);
        let s = model_rmse(out, 0, ModelChoice::Static);
        let wins = d.iter().zip(&s).filter(|(d, s)| d < s).count();
        (wins, d.len().min(s.len()))
    };
    let (w10, n10) = share(&c10);
    let (w50, n50) = share(&c50);
    let d50 = model_rmse(&c50, 0, ModelChoice::Dynamic);
    let ok = failures(&c10) + failures(&c50) == 0
        && w10 as f64 >= ORDERING_SHARE * n10 as f64
        && w50 as f64 >= ORDERING_SHARE * n50 as f64
        && mean(&d50) <= mean(&r);
    t.record(
        "3",
        ok,
        "dynamic beats static and improves with C",
        format!(
            "dynamic wins {w10}/{n10} at C=10 and {w50}/{n50} at C=50; dynamic rmse {:.4} at C=50 vs {:.4} at C=10; static {:.4} / {:.4}",
            mean(&d50),
            mean(&r),
            mean(&model_rmse(&c50, 0, ModelChoice::Static)),
            mean(&model_rmse(&c10, 0, ModelChoice::Static)),
        ),
    );
}

fn runtime_scaling(t: &mut Tally) {
    let models = [ModelChoice::Dynamic, ModelChoice::MixedLogit];
    let settings: Vec<Setting> =
        [10, 25, 50].iter().map(|&c| Setting::new(40, 10, 20, c, 5).with_models(&models)).collect();
    // Serial, so wall times are not distorted by competing jobs.
    let config = ExperimentConfig::new(settings, 1, BASE_SEED);
    let out = run_experiment(&config, 1).expect("experiment runs");
    let points = |model: ModelChoice| -> Vec<(f64, f64)> {
        out.runtime
            .iter()
            .filter(|r: &&RuntimeRow| r.model == model)
            .map(|r| (r.n_categories as f64, r.fit_seconds))
            .collect()
    };
    let factor = points(ModelChoice::Dynamic);
    let mixed = points(ModelChoice::MixedLogit);
    let (sf, sm) = (log_log_slope(&factor), log_log_slope(&mixed));
    let show = |p: &[(f64, f64)]| p.iter().map(|(c, s)| format!("C={c}: {s:.1}s")).collect::<Vec<_>>().join(", ");
    t.record(
        "4",
        factor.len() == 3 && mixed.len() == 3 && sf <= FACTOR_SLOPE_MAX && sm > sf,
        "runtime scaling over C in {10, 25, 50}",
        format!("factor slope {sf:.3} (max {FACTOR_SLOPE_MAX}) [{}], mixed logit slope {sm:.3} [{}]", show(&factor), show(&mixed)),
    );
}

fn elasticity_signs(t: &mut Tally) {
    let mut setting = Setting::new(40, 10, 20, 6, 5).with_models(&[ModelChoice::Dynamic, ModelChoice::Static]);
    setting.elasticities = true;
    let out = experiment(vec![setting], 1);
    let rows = |m: ModelChoice| -> Vec<&ElasticityPlotRow> { out.elasticities.iter().filter(|r| r.model == m).collect() };
    let dynamic = rows(ModelChoice::Dynamic);
    let stat = rows(ModelChoice::Static);
    let negative = dynamic.iter().filter(|r| r.mean < 0.0).count();
    let width = |rs: &[&ElasticityPlotRow]| mean(&rs.iter().map(|r| r.q975 - r.q025).collect::<Vec<_>>());
    let center = |rs: &[&ElasticityPlotRow]| mean(&rs.iter().map(|r| r.mean).collect::<Vec<_>>());
    let (wd, ws) = (width(&dynamic), width(&stat));
    t.record(
        "5",
        dynamic.len() == 60 && negative == 60 && ws > wd,
        "elasticity signs and interval widths at C=6 J=10",
        format!(
            "{negative}/{} dynamic means negative; mean 95% width static {ws:.4} vs dynamic {wd:.4} \
             (average elasticity static {:.3}, dynamic {:.3})",
            dynamic.len(),
            center(&stat),
            center(&dynamic)
        ),
    );
}

fn gradient_suite(t: &mut Tally) {
    let mut worst = 0.0f64;
    let mut ok = true;
    for seed in 0..GRADIENT_INSTANCES {
        let (d, p, kind) = small_instance(seed);
        let prior = PriorSpec::new(if seed % 2 == 0 { 1.0 } else { 10.0 }).unwrap();
        let g = grad_log_joint(&p, &d, prior, kind).unwrap();
        let h = 1e-5;
        for c in 0..p.values.len() {
            let mut plus = p.clone();
            plus.values[c] += h;
            let mut minus = p.clone();
            minus.values[c] -= h;
            let fd = (log_joint(&plus, &d, prior, kind).unwrap() - log_joint(&minus, &d, prior, kind).unwrap()) / (2.0 * h);
            worst = worst.max((g.values[c] - fd).abs() / fd.abs().max(1.0));
            ok &= close(g.values[c], fd, GRADIENT_REL_TOL);
        }
    }
    t.record(
        "6",
        ok,
        "analytic gradient vs central differences",
        format!("{GRADIENT_INSTANCES} instances, worst relative error {worst:.2e} (tol {GRADIENT_REL_TOL:e})"),
    );
}

fn oracle_suite(t: &mut Tally) {
    let mut loglik_err = 0.0f64;
    for seed in 0..20 {
        let d = panel(Dims::uniform(2, 1, 3, 2, 2).unwrap(), seed);
        for kind in [ModelKind::Dynamic, ModelKind::Static] {
            let p = gaussian_draw(Layout::new(&d.dims, kind), 100 + seed, 1.0);
            let ours = log_likelihood(&p, &d, kind).unwrap();
            loglik_err = loglik_err.max((ours - direct_log_likelihood(&p, &d, kind)).abs());
        }
    }

    let mut rmse_err = 0.0f64;
    for seed in 0..20 {
        let d = panel(Dims::new(4, vec![2, 5, 3], 4, 2).unwrap(), seed);
        let layout = Layout::new(&d.dims, ModelKind::Dynamic);
        let draws: Vec<ParamDraw> = (0..3).map(|k| gaussian_draw(layout, seed ^ k, 1.0)).collect();
        let pred = predicted_probabilities(&draws, &d, ModelKind::Dynamic).unwrap();
        let truth = d.true_probs.as_ref().unwrap();
        let (per, _) = rmse(&pred, truth).unwrap();
        for (p, r) in pred.iter().zip(&per) {
            rmse_err = rmse_err.max((naive_rmse(p, truth) - r).abs());
        }
    }

    let ml = MixedLogitParams { alpha: vec![0.0, 0.4, -0.3], eta_mean: 0.7, eta_sd: 0.4, xi_mean: 0.9, xi_sd: 0.6 };
    let md = simulate_mixed_logit(&ml, 3, 3, (0.5, 2.0), 11).unwrap();
    let halton = HaltonDraws::new(3, 100_000, DEFAULT_BURN_IN);
    let sim_ll = simulated_loglik(&ml, &md, &halton).unwrap();
    let quad_ll = quadrature_loglik(&ml, &md);
    let sim_rel = (sim_ll - quad_ll).abs() / quad_ll.abs();
    let mut pred_err = 0.0f64;
    for o in &md.observations {
        let simulated = predict_mixed_logit(&ml, o, halton.consumer(0)).unwrap();
        for (j, s) in simulated.iter().enumerate() {
            let oracle = mixing_expectation(&ml, |eta, xi| logit(&ml.alpha, eta, xi, o)[j]);
            pred_err = pred_err.max((s - oracle).abs());
        }
    }

    let mut el_err = 0.0f64;
    for (seed, kind) in [(1, ModelKind::Dynamic), (2, ModelKind::Static), (3, ModelKind::Dynamic)] {
        let d = panel(Dims::new(6, vec![3, 4], 5, 3).unwrap(), seed);
        let draw = gaussian_draw(Layout::new(&d.dims, kind), seed + 100, 0.8);
        let report = own_price_elasticities([&draw], &d, kind).unwrap();
        let fd = fd_elasticities(&draw, &d, kind);
        let offsets = d.dims.category_offsets();
        for row in &report.rows {
            let oracle = fd[offsets[row.category] + row.product];
            el_err = el_err.max((row.mean - oracle).abs() / oracle.abs().max(1e-8));
        }
    }

    let ok = loglik_err < LOGLIK_TOL
        && rmse_err < RMSE_TOL
        && sim_rel < SIMULATED_LOGLIK_REL_TOL
        && pred_err < SIMULATED_LOGLIK_REL_TOL
        && el_err <= ELASTICITY_REL_TOL;
    t.record(
        "7",
        ok,
        "oracle suite",
        format!(
            "loglik {loglik_err:.1e} (tol {LOGLIK_TOL:e}), rmse {rmse_err:.1e} (tol {RMSE_TOL:e}), simulated loglik rel {sim_rel:.1e} \
             and predictions {pred_err:.1e} (tol {SIMULATED_LOGLIK_REL_TOL:e}), elasticities rel {el_err:.1e} (tol {ELASTICITY_REL_TOL:e})"
        ),
    );
}

fn invariance_suite(t: &mut Tally) {
    let (mut scale, mut sign, mut rotation, mut location, mut shift) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for seed in 0..INVARIANCE_INSTANCES {
        let (d, p, kind) = small_instance(seed);
        let k = p.layout.n_factors;
        let base = log_likelihood(&p, &d, kind).unwrap();
        let ll = |q: &ParamDraw| log_likelihood(q, &d, kind).unwrap();
        let mut r = common::rng(seed ^ 0xacce);

        let a = if r.random_bool(0.5) { r.random_range(0.3..3.0) } else { -r.random_range(0.3..3.0) };
        scale = scale.max((base - ll(&transform(&p, &diag(k, a), &diag(k, 1.0 / a)))).abs());

        let mut s = diag(k, 1.0);
        let f = r.random_range(0..k);
        s[f][f] = -1.0;
        sign = sign.max((base - ll(&transform(&p, &s, &s))).abs());

        let q = random_orthogonal(k, &mut r);
        rotation = rotation.max((base - ll(&transform(&p, &q, &q))).abs());

        let c = r.random_range(0..d.dims.n_categories);
        let v: Vec<f64> = (0..k).map(|_| StandardNormal.sample(&mut r)).collect();
        let mut moved = p.clone();
        let off = d.dims.category_offset(c);
        for j in 0..d.dims.n_products(c) {
            moved.slice_mut(Block::Gamma, off + j).iter_mut().zip(&v).for_each(|(g, x)| *g += x);
        }
        location = location.max((base - ll(&moved)).abs());

        let u: Vec<f64> = (0..8).map(|_| r.random_range(-20.0..20.0)).collect();
        let b = r.random_range(-50.0..50.0);
        let shifted: Vec<f64> = u.iter().map(|x| x + b).collect();
        let (pu, ps) = (choice_probabilities(&u), choice_probabilities(&shifted));
        shift = shift.max(pu.iter().zip(&ps).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max));
    }
    t.record(
        "8",
        scale < 1e-10 && sign < 1e-10 && rotation < 1e-9 && location < 1e-10 && shift < 1e-12,
        "likelihood invariances",
        format!(
            "{INVARIANCE_INSTANCES} instances; scale {scale:.1e}, sign flip {sign:.1e} (tol 1e-10), rotation {rotation:.1e} (tol 1e-9), \
             location {location:.1e} (tol 1e-10), utility shift {shift:.1e} (tol 1e-12)"
        ),
    );
}

fn run_cli(args: &[&str]) -> i32 {
    let mut full = vec!["factor-demand"];
    full.extend_from_slice(args);
    cli::run(full)
}

fn pipeline(dir: &Path, parallel: &str) -> bool {
    let s = |p: &Path| p.to_str().unwrap().to_string();
    let sim = dir.join("sim");
    let csv = sim.join("dataset.csv");
    let fit = dir.join("fit");
    let grid = dir.join("grid.toml");
    std::fs::create_dir_all(dir).unwrap();
    std::fs::write(
        &grid,
        "replications = 3\nbase_seed = 5\nposterior_draws = 50\n\n[fit]\nmax_iterations = 400\n\n\
         [[settings]]\nn_consumers = 8\nn_products = 3\nn_trips = 6\nn_categories = 3\nn_factors = 2\n\
         models = [\"dynamic\", \"static\", \"mixed-logit\"]\nelasticities = true\n",
    )
    .unwrap();
    let runs: Vec<Vec<String>> = vec![
        vec!["simulate".into(), "--out".into(), s(&sim), "--consumers".into(), "10".into(), "--products".into(), "3".into(),
             "--trips".into(), "6".into(), "--categories".into(), "3".into(), "--factors".into(), "2".into(), "--seed".into(), "8".into()],
        vec!["fit".into(), "--data".into(), s(&csv), "--out".into(), s(&fit), "--factors".into(), "2".into(),
             "--max-iterations".into(), "500".into(), "--draws".into(), "100".into(), "--seed".into(), "2".into()],
        vec!["fit".into(), "--data".into(), s(&csv), "--out".into(), s(&dir.join("ml")), "--model".into(), "mixed-logit".into()],
        vec!["evaluate".into(), "--data".into(), s(&csv), "--fit".into(), s(&fit.join("fit.json")),
             "--draws-file".into(), s(&fit.join("draws.bin")), "--out".into(), s(&dir.join("eval"))],
        vec!["elasticity".into(), "--data".into(), s(&csv), "--fit".into(), s(&fit.join("fit.json")),
             "--n-draws".into(), "60".into(), "--out".into(), s(&dir.join("elasticity"))],
        vec!["diagnose-inertia".into(), "--data".into(), s(&csv), "--out".into(), s(&dir.join("diag"))],
        vec!["experiment".into(), "--grid".into(), s(&grid), "--parallel".into(), parallel.into(), "--out".into(), s(&dir.join("grid"))],
    ];
    runs.iter().all(|args| run_cli(&args.iter().map(String::as_str).collect::<Vec<_>>()) == cli::EXIT_OK)
}

/// Blanks wall-clock measurements: JSON values and CSV columns whose name
/// contains `seconds`.
fn mask_timings(name: &str, bytes: Vec<u8>) -> (Vec<u8>, bool) {
    fn mask(v: &mut serde_json::Value) -> bool {
        match v {
            serde_json::Value::Object(map) => {
                let mut hit = false;
                for (k, x) in map.iter_mut() {
                    if k.contains("seconds") {
                        *x = serde_json::Value::Null;
                        hit = true;
                    } else {
                        hit |= mask(x);
                    }
                }
                hit
            }
            serde_json::Value::Array(xs) => xs.iter_mut().fold(false, |h, x| mask(x) | h),
            _ => false,
        }
    }
    let text = String::from_utf8_lossy(&bytes).into_owned();
    if name.ends_with(".json") {
        if let Ok(mut v) = serde_json::from_str::<serde_json::Value>(&text) {
            if mask(&mut v) {
                return (v.to_string().into_bytes(), true);
            }
        }
    } else if name.ends_with(".csv") {
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
        let timed: Vec<usize> = (0..header.len()).filter(|&i| header[i].contains("seconds")).collect();
        if !timed.is_empty() {
            let mut out = header.join(",");
            for line in lines {
                let cells: Vec<&str> =
                    line.split(',').enumerate().map(|(i, c)| if timed.contains(&i) { "-" } else { c }).collect();
                out.push('\n');
                out.push_str(&cells.join(","));
            }
            return (out.into_bytes(), true);
        }
    }
    (bytes, false)
}

/// Every regular file under `root` except run manifests, which carry
/// timestamps, with wall-clock fields masked. Also counts the files that
/// had such fields.
fn result_files(root: &Path) -> (Vec<(String, Vec<u8>)>, usize) {
    let mut out = Vec::new();
    let mut masked = 0;
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else if path.file_name().is_some_and(|n| n != "manifest.json") {
                let rel = path.strip_prefix(root).unwrap().display().to_string();
                let (bytes, hit) = mask_timings(&rel, std::fs::read(&path).unwrap());
                masked += hit as usize;
                out.push((rel, bytes));
            }
        }
    }
    out.sort();
    (out, masked)
}

fn determinism(t: &mut Tally) {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let ran = pipeline(&a, "1") && pipeline(&b, "4");
    let ((fa, masked), (fb, _)) = (result_files(&a), result_files(&b));
    let differing: Vec<&str> = fa
        .iter()
        .zip(&fb)
        .filter(|(x, y)| x != y)
        .map(|(x, _)| x.0.as_str())
        .collect();
    t.record(
        "10",
        ran && fa.len() == fb.len() && differing.is_empty(),
        "byte-identical reruns, experiment at --parallel 1 and 4",
        format!(
            "{} result files compared ({masked} with wall-clock fields masked), {} differ {:?}",
            fa.len(),
            differing.len(),
            differing
        ),
    );
}

fn stretch(t: &mut Tally) {
    if std::env::var_os("FACTOR_DEMAND_STRETCH").is_none() {
        println!("SKIP [stretch] I=1000 minibatch replication: set FACTOR_DEMAND_STRETCH=1 to run");
        return;
    }
    let mut config = ExperimentConfig::new(
        vec![Setting::new(1000, 10, 5, 10, 5).with_models(&[ModelChoice::Dynamic])],
        1,
        BASE_SEED,
    );
    config.fit.minibatch = Some(2000);
    let start = Instant::now();
    let out = run_experiment(&config, 1).expect("experiment runs");
    let seconds = start.elapsed().as_secs_f64();
    let r = model_rmse(&out, 0, ModelChoice::Dynamic);
    t.record(
        "stretch",
        r.len() == 1 && within(r[0], STRETCH_RMSE) && seconds < STRETCH_SECONDS,
        "I=1000 J=10 T=5 C=10 minibatch replication",
        format!("rmse {:.4} (target {} +- {}), {seconds:.0}s (limit {STRETCH_SECONDS}s)", r.first().copied().unwrap_or(f64::NAN), STRETCH_RMSE.0, STRETCH_RMSE.1),
    );
}

fn main() {
    let mut tally = Tally { failed: 0 };
    let start = Instant::now();
    let steps: [(&str, fn(&mut Tally)); 9] = [
        ("gradient", gradient_suite),
        ("oracles", oracle_suite),
        ("invariances", invariance_suite),
        ("determinism", determinism),
        ("elasticities", elasticity_signs),
        ("small setting", small_and_prior),
        ("second setting", second_and_ordering),
        ("runtime", runtime_scaling),
        ("stretch", stretch),
    ];
    let only = std::env::var("FACTOR_DEMAND_ONLY").ok();
    for (name, step) in steps {
        if only.as_deref().is_some_and(|o| !o.split(',').any(|n| n.trim() == name)) {
            continue;
        }
        let t0 = Instant::now();
        step(&mut tally);
        eprintln!("  {name} took {:.1}s", t0.elapsed().as_secs_f64());
    }
    println!(
        "acceptance: {} failing criteria, {:.0}s total",
        tally.failed,
        start.elapsed().as_secs_f64()
    );
    if tally.failed > 0 {
        std::process::exit(1);
    }
}
