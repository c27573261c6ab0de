//! Acceptance suite: one pass/fail line per criterion.
//!
//! Criterion 7 needs the public three-class PMU event dataset, which is not
//! bundled. Point `GRIDSHAP_REAL_DATA` at a CSV of it (header row, `marker`
//! column with Attack / Natural / NoEvents) to run it; without the variable
//! it is reported as skipped. Its accuracy targets are soft and never fail
//! the suite.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use gridshap::dataset::synthetic::{write_csv, SyntheticSpec};
use gridshap::dataset::{load_events, EventClass, EventTable, FeatureName, LoadOptions, Provenance};
use gridshap::eval::{f1_score, report, ConfusionMatrix};
use gridshap::gbt::split::{find_best_split, split_gain, SplitParams};
use gridshap::gbt::{boost, log_loss, Hyperparams, TreeEnsemble, TreeNode};
use gridshap::preprocess::{fit_scaler, split_indices, train_size, transform};
use gridshap::shap::{explain_all, ShapExplanation};
use gridshap::sigmoid;
use gridshap::viz::PlotKind;
use gridshap_cli::pipeline::{PairMetrics, METRICS_FILE};
use gridshap_cli::{pair_name, run, RunConfig};
use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fixture_table(dir: &Path, rows: usize, seed: u64) -> (PathBuf, gridshap::Table) {
    let path = dir.join(format!("synthetic_{rows}_{seed}.csv"));
    let spec = SyntheticSpec {
        rows,
        seed,
        inject_infinities: true,
    };
    write_csv(std::fs::File::create(&path).unwrap(), &spec).unwrap();
    let table = load_events(&path, &LoadOptions::default()).unwrap().table;
    (path, table)
}

fn grid_table(values: Array2<f64>) -> EventTable<f64> {
    let (n, f) = values.dim();
    EventTable::new(
        (0..f).map(|j| FeatureName::column(&format!("f{j}"))).collect(),
        values,
        vec![EventClass::Attack; n],
        Provenance::synthetic(n),
    )
    .unwrap()
}

fn coalition_value(model: &TreeEnsemble<f64>, x: &[f64], background: &EventTable<f64>, mask: u32) -> f64 {
    let mut hybrid = vec![0.0; x.len()];
    let mut total = 0.0;
    for b in 0..background.n_rows() {
        let z = background.row(b);
        for j in 0..x.len() {
            hybrid[j] = if mask >> j & 1 == 1 { x[j] } else { z[j] };
        }
        total += model.predict_margin(&hybrid).unwrap();
    }
    total / background.n_rows() as f64
}

/// Interventional Shapley values by enumerating all `2^F` coalitions.
fn shapley_oracle(model: &TreeEnsemble<f64>, x: &[f64], background: &EventTable<f64>) -> Vec<f64> {
    let f = x.len();
    let v: Vec<f64> = (0..1u32 << f).map(|m| coalition_value(model, x, background, m)).collect();
    let mut fact = vec![1.0f64; f + 1];
    for k in 1..=f {
        fact[k] = fact[k - 1] * k as f64;
    }
    (0..f)
        .map(|i| {
            (0..1u32 << f)
                .filter(|m| m >> i & 1 == 0)
                .map(|m| {
                    let s = m.count_ones() as usize;
                    fact[s] * fact[f - s - 1] / fact[f] * (v[(m | 1 << i) as usize] - v[m as usize])
                })
                .sum()
        })
        .collect()
}

fn grid_value(rng: &mut ChaCha8Rng) -> f64 {
    rng.random_range(-4i32..=4) as f64 * 0.25
}

fn random_tree(rng: &mut ChaCha8Rng, f: usize, depth: usize) -> TreeNode<f64> {
    if depth == 0 || rng.random_bool(0.15) {
        return TreeNode::leaf(rng.random_range(-1.0..1.0));
    }
    let threshold = grid_value(rng) + 0.125 * rng.random_range(0..2) as f64;
    TreeNode::split(
        rng.random_range(0..f),
        threshold,
        random_tree(rng, f, depth - 1),
        random_tree(rng, f, depth - 1),
    )
}

/// Every explanation checked by criterion 2: `(additivity error, |fx|)`.
#[derive(Default)]
struct AdditivityLog {
    worst_ratio: f64,
    count: usize,
}

impl AdditivityLog {
    fn record(&mut self, e: &ShapExplanation<f64>) {
        self.record_raw(e.additivity_error(), e.fx);
    }

    fn record_raw(&mut self, err: f64, fx: f64) {
        self.worst_ratio = self.worst_ratio.max(err / fx.abs().max(1.0));
        self.count += 1;
    }

    /// Rows of `row_ref, base_value, fx, phi...` as written by the pipeline.
    fn record_csv(&mut self, text: &str) {
        for line in text.lines().skip(1) {
            let v: Vec<f64> = line.split(',').skip(1).map(|f| f.parse().unwrap_or(f64::NAN)).collect();
            let err = (v[0] + v[2..].iter().sum::<f64>() - v[1]).abs();
            self.record_raw(if err.is_nan() { f64::INFINITY } else { err }, v[1]);
        }
    }
}

fn criterion_1(log: &mut AdditivityLog) -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut compared = 0usize;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let f = rng.random_range(1..=10);
        let depth = rng.random_range(1..=4);
        let trees = (0..rng.random_range(1..=20)).map(|_| random_tree(&mut rng, f, depth)).collect();
        let model = TreeEnsemble::from_trees(rng.random_range(-1.0..1.0), trees, f);
        let background = grid_table(Array2::from_shape_fn((rng.random_range(1..=16), f), |_| grid_value(&mut rng)));
        let rows = grid_table(Array2::from_shape_fn((3, f), |_| grid_value(&mut rng)));
        for e in explain_all(&model, &background, &rows).map_err(|e| e.to_string())? {
            log.record(&e);
            let oracle = shapley_oracle(&model, rows.row(e.row_ref), &background);
            for (a, b) in e.phi.iter().zip(&oracle) {
                worst = worst.max((a - b).abs());
                compared += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    check(
        worst <= 1e-9 && elapsed < Duration::from_secs(60),
        format!("100 ensembles, {compared} attributions, max |phi - oracle| = {worst:.2e}, {:.2}s", elapsed.as_secs_f64()),
    )
}

fn criterion_2(log: &AdditivityLog) -> Outcome {
    check(
        log.count > 0 && log.worst_ratio <= 1e-6,
        format!(
            "{} explanations, max |base + sum(phi) - fx| / max(1, |fx|) = {:.2e}",
            log.count, log.worst_ratio
        ),
    )
}

fn brute_force_split(x: ArrayView2<'_, f64>, grad: &[f64], hess: &[f64], p: &SplitParams<f64>) -> Option<(usize, f64, f64)> {
    let mut best: Option<(usize, f64, f64)> = None;
    for f in 0..x.ncols() {
        let mut vals = x.column(f).to_vec();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let (mut gl, mut hl, mut gr, mut hr) = (0.0, 0.0, 0.0, 0.0);
            for i in 0..x.nrows() {
                if x[[i, f]] < t {
                    gl += grad[i];
                    hl += hess[i];
                } else {
                    gr += grad[i];
                    hr += hess[i];
                }
            }
            if hl < p.min_child_weight || hr < p.min_child_weight {
                continue;
            }
            let gain = split_gain(gl, hl, gr, hr, p.lambda, p.gamma);
            if best.is_none_or(|b| gain > b.2) {
                best = Some((f, t, gain));
            }
        }
    }
    best
}

fn criterion_3(dir: &Path) -> Outcome {
    let (_, table) = fixture_table(dir, 1000, 3);
    let y: Vec<usize> = table.labels().iter().map(|&l| usize::from(l != EventClass::Attack)).collect();
    let x = table.values();
    let (base, trees) = boost(x.view(), &y, &Hyperparams::default()).map_err(|e| e.to_string())?;
    let mut margins = vec![base; x.nrows()];
    let mut losses = vec![log_loss(&margins, &y)];
    for tree in &trees {
        for (i, m) in margins.iter_mut().enumerate() {
            *m += tree.predict(table.row(i));
        }
        losses.push(log_loss(&margins, &y));
    }
    let increases = losses.windows(2).filter(|w| w[1] > w[0]).count();

    let xa = Array2::from_shape_fn((6, 1), |(i, _)| i as f64);
    let hp = Hyperparams {
        rounds: 1,
        learning_rate: 1.0,
        max_depth: 1,
        lambda: 0.0,
        ..Hyperparams::default()
    };
    let (b0, t0) = boost(xa.view(), &[1; 6], &hp).map_err(|e| e.to_string())?;
    let w = t0[0].predict(&[0.0]);
    let p = sigmoid(b0 + w);
    let analytic_ok = (w - 2.0).abs() <= 1e-12 && (p - 0.880797).abs() <= 1e-6;

    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut mismatches = 0;
    for _ in 0..200 {
        let f = rng.random_range(1..=6);
        let x = Array2::from_shape_fn((50, f), |_| rng.random_range(-3.0..3.0));
        let p: Vec<f64> = (0..50).map(|_| rng.random_range(0.05..0.95)).collect();
        let y: Vec<f64> = (0..50).map(|_| f64::from(u8::from(rng.random_bool(0.5)))).collect();
        let grad: Vec<f64> = p.iter().zip(&y).map(|(p, y)| p - y).collect();
        let hess: Vec<f64> = p.iter().map(|p| p * (1.0 - p)).collect();
        let params = SplitParams {
            lambda: rng.random_range(0.0..2.0),
            gamma: 0.0,
            min_child_weight: rng.random_range(0.0..2.0),
        };
        let rows: Vec<usize> = (0..50).collect();
        let agree = match (find_best_split(x.view(), &grad, &hess, &rows, &params), brute_force_split(x.view(), &grad, &hess, &params)) {
            (None, None) => true,
            (Some(a), Some((f, t, g))) => a.feature == f && (a.threshold - t).abs() < 1e-12 && (a.gain - g).abs() < 1e-9,
            _ => false,
        };
        mismatches += usize::from(!agree);
    }
    check(
        increases == 0 && trees.len() == 200 && analytic_ok && mismatches == 0,
        format!(
            "logloss {:.4} -> {:.4} over 200 rounds ({increases} increases); leaf {w:.12}, p {p:.6}; {mismatches}/200 split mismatches",
            losses[0],
            losses[200]
        ),
    )
}

fn criterion_4() -> Outcome {
    let r = report(&ConfusionMatrix::from_counts(vec![vec![29, 147], vec![0, 783]])).map_err(|e| e.to_string())?;
    let c1 = &r.classes[1];
    let printed = [c1.precision, c1.recall, c1.f1, r.accuracy].map(|v| format!("{v:.2}"));
    let table_ok = printed == ["0.84", "1.00", "0.91", "0.85"];
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let k = rng.random_range(2..=5);
        let counts = (0..k).map(|_| (0..k).map(|_| rng.random_range(0..100)).collect()).collect();
        if let Ok(r) = report(&ConfusionMatrix::from_counts(counts)) {
            for c in &r.classes {
                worst = worst.max((c.f1 - f1_score(c.precision, c.recall)).abs());
                let direct = if c.precision + c.recall > 0.0 {
                    2.0 * c.precision * c.recall / (c.precision + c.recall)
                } else {
                    0.0
                };
                worst = worst.max((c.f1 - direct).abs());
            }
        }
    }
    check(
        table_ok && worst <= 1e-12,
        format!("class 1 P/R/F1 {} / {} / {}, accuracy {}; max F1 identity error {worst:.2e}", printed[0], printed[1], printed[2], printed[3]),
    )
}

fn criterion_5(table: &gridshap::Table) -> Outcome {
    let mut worst_mean = 0.0f64;
    let mut worst_std = 0.0f64;
    let mut sizes_ok = true;
    let config = RunConfig::default();
    let mut detail = Vec::new();
    for pair in &config.pairs {
        let sub = gridshap::dataset::extract_pair(table, pair[0], pair[1]).map_err(|e| e.to_string())?;
        let (train_idx, test_idx) = split_indices(&sub, &config.split_spec()).map_err(|e| e.to_string())?;
        let r = sub.n_rows();
        sizes_ok &= train_idx.len() == train_size(r, 0.8) && train_idx.len() == (r as f64 * 0.8).floor() as usize;
        sizes_ok &= test_idx.len() == r - train_idx.len();
        detail.push(format!("{}:{}/{}", pair_name(*pair), train_idx.len(), test_idx.len()));
        let train = sub.select_rows(&train_idx);
        let params = fit_scaler(&train).map_err(|e| e.to_string())?;
        let scaled = transform(&params, &train).map_err(|e| e.to_string())?;
        let n = scaled.n_rows() as f64;
        for j in 0..scaled.n_features() {
            if params.constant_flags[j] {
                continue;
            }
            let col = scaled.column(j);
            let mean = col.sum() / n;
            let std = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            worst_mean = worst_mean.max(mean.abs());
            worst_std = worst_std.max((std - 1.0).abs());
        }
    }
    check(
        sizes_ok && worst_mean <= 1e-9 && worst_std <= 1e-9,
        format!("max |mean| {worst_mean:.2e}, max |std - 1| {worst_std:.2e}; splits {}", detail.join(", ")),
    )
}

fn all_files(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn run_in_pool(config: &RunConfig, threads: usize) -> Result<(Duration, usize), String> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| e.to_string())?;
    let start = Instant::now();
    let summary = pool.install(|| run(config)).map_err(|e| e.to_string())?;
    Ok((start.elapsed(), summary.failures()))
}

struct EndToEnd {
    elapsed: Duration,
    failures: usize,
    out: PathBuf,
}

fn criterion_6(config: &RunConfig, first: &EndToEnd, snapshot: &Path) -> Outcome {
    let a = all_files(snapshot);
    if config.out_dir.exists() {
        std::fs::remove_dir_all(&config.out_dir).map_err(|e| e.to_string())?;
    }
    let (_, failures) = run_in_pool(config, 4)?;
    let b = all_files(&config.out_dir);
    let differing: Vec<String> = a
        .keys()
        .chain(b.keys())
        .filter(|k| a.get(*k) != b.get(*k))
        .map(|k| k.display().to_string())
        .collect();
    let count = |ext: &str| a.keys().filter(|k| k.extension().is_some_and(|e| e == ext)).count();
    check(
        differing.is_empty() && failures == 0 && first.failures == 0,
        format!(
            "1 thread vs 4 threads: {} files compared ({} json, {} svg), {} differ{}",
            a.len(),
            count("json"),
            count("svg"),
            differing.len(),
            if differing.is_empty() { String::new() } else { format!(": {}", differing.join(", ")) }
        ),
    )
}

fn criterion_7(dir: &Path) -> Outcome {
    let Ok(path) = std::env::var("GRIDSHAP_REAL_DATA") else {
        return Ok("real three-class dataset not bundled (set GRIDSHAP_REAL_DATA to run)".into());
    };
    let config = RunConfig {
        input: PathBuf::from(path),
        out_dir: dir.join("real"),
        ..RunConfig::default()
    };
    let summary = run(&config).map_err(|e| format!("SOFT: could not run on real data: {e}"))?;
    let targets = [("attack_natural", 0.85), ("natural_noevents", 0.99), ("attack_noevents", 0.97)];
    let mut lines = Vec::new();
    let mut within = true;
    for outcome in summary.outcomes.iter().flatten() {
        let acc = outcome.metrics.selected_features.report.accuracy;
        let target = targets.iter().find(|t| t.0 == outcome.name).map_or(f64::NAN, |t| t.1);
        within &= (acc - target).abs() <= 0.05;
        let leader = outcome.metrics.importance.first().map_or("-", |l| l.0.as_str()).to_string();
        lines.push(format!("{} {:.3} (target {:.2}, leader {leader})", outcome.name, acc, target));
    }
    let verdict = if within { "SOFT PASS" } else { "SOFT MISS, see tuning notes" };
    Ok(format!("{verdict}: {}", lines.join("; ")))
}

fn criterion_8(run: &EndToEnd) -> Outcome {
    let mut problems = Vec::new();
    let mut svgs = 0;
    let mut report_sets = 0;
    for pair in RunConfig::default().pairs {
        let name = pair_name(pair);
        let dir = run.out.join(&name);
        let has_reports = ["report.txt", "confusion.txt", METRICS_FILE].iter().all(|f| dir.join(f).is_file());
        if has_reports {
            if let Ok(text) = std::fs::read_to_string(dir.join(METRICS_FILE)) {
                if serde_json::from_str::<PairMetrics>(&text).is_ok() {
                    report_sets += 1;
                }
            }
        }
        for kind in PlotKind::ALL {
            let prefix = format!("{name}_{}", kind.name());
            let found = std::fs::read_dir(&dir)
                .map(|rd| {
                    rd.flatten().any(|e| {
                        let f = e.file_name().to_string_lossy().to_string();
                        f.starts_with(&prefix) && f.ends_with(".svg")
                    })
                })
                .unwrap_or(false);
            if !found {
                problems.push(format!("{name}: no {} plot", kind.name()));
            }
        }
        for entry in std::fs::read_dir(&dir).into_iter().flatten().flatten() {
            let path = entry.path();
            if path.extension().is_some_and(|e| e == "svg") {
                svgs += 1;
                let text = std::fs::read_to_string(&path).unwrap_or_default();
                if let Err(e) = roxmltree::Document::parse(&text) {
                    problems.push(format!("{}: {e}", path.display()));
                }
            }
        }
    }
    check(
        run.elapsed < Duration::from_secs(300) && report_sets == 3 && problems.is_empty() && run.failures == 0,
        format!(
            "{:.1}s, {report_sets} report sets, {svgs} well-formed SVGs{}",
            run.elapsed.as_secs_f64(),
            if problems.is_empty() { String::new() } else { format!("; {}", problems.join("; ")) }
        ),
    )
}

fn main() {
    let dir = tempfile::tempdir().expect("temp dir");
    let (fixture, table) = fixture_table(dir.path(), 2000, 7);
    let config = RunConfig {
        input: fixture,
        out_dir: dir.path().join("out"),
        ..RunConfig::default()
    };

    let mut log = AdditivityLog::default();
    let first = match run_in_pool(&config, 1) {
        Ok((elapsed, failures)) => EndToEnd {
            elapsed,
            failures,
            out: dir.path().join("run1"),
        },
        Err(e) => {
            println!("acceptance: pipeline could not run: {e}");
            std::process::exit(1);
        }
    };
    std::fs::rename(&config.out_dir, &first.out).expect("snapshot first run");
    for pair in &config.pairs {
        let pair_dir = first.out.join(pair_name(*pair));
        for file in ["explanations_full.csv", "explanations_top.csv"] {
            if let Ok(text) = std::fs::read_to_string(pair_dir.join(file)) {
                log.record_csv(&text);
            }
        }
    }

    let c1 = criterion_1(&mut log);
    let results: Vec<(&str, Outcome)> = vec![
        ("SHAP exactness vs subset enumeration", c1),
        ("additivity of every explanation", criterion_2(&log)),
        ("boosting correctness", criterion_3(dir.path())),
        ("metrics oracle", criterion_4()),
        ("scaler and split sizes", criterion_5(&table)),
        ("determinism across thread counts", criterion_6(&config, &first, &first.out)),
        ("published accuracy reproduction (soft)", criterion_7(dir.path())),
        ("end-to-end on synthetic fixture", criterion_8(&first)),
    ];

    let mut failed = 0;
    for (i, (name, outcome)) in results.iter().enumerate() {
        match outcome {
            Ok(detail) if i == 6 && std::env::var_os("GRIDSHAP_REAL_DATA").is_none() => {
                println!("criterion {} SKIP  {name}: {detail}", i + 1)
            }
            Ok(detail) => println!("criterion {} PASS  {name}: {detail}", i + 1),
            Err(detail) if i == 6 => println!("criterion {} SOFT  {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} of 8 criteria passed or skipped", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
