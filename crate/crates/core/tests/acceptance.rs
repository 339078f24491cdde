//! Acceptance suite. Runs every criterion in sequence, prints one
//! `PASS`/`FAIL`/`SKIP` line each and exits nonzero if any criterion fails.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use num_rational::Ratio;
use rand::Rng;
use supsom::dataset::{band_column_names, load_band_mask};
use supsom::metrics::{average_accuracy, cohens_kappa, confusion, overall_accuracy, r_squared};
use supsom::*;

type Q = Ratio<i64>;
type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome {
            pass,
            detail: detail.into(),
        }
    }
}

// oracles

fn oracle_euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn oracle_manhattan(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

fn oracle_mahalanobis(a: &[f64], b: &[f64], m: &Matrix<f64>) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mut q = 0.0;
    for i in 0..d.len() {
        for j in 0..d.len() {
            q += d[i] * m.get(i, j) * d[j];
        }
    }
    q.max(0.0).sqrt()
}

/// Tanimoto dissimilarity of boolean vectors as an exact fraction.
fn oracle_tanimoto(a: &[f64], b: &[f64]) -> Q {
    let (mut tt, mut ff, mut mismatch) = (0i64, 0i64, 0i64);
    for (&x, &y) in a.iter().zip(b) {
        match (x == 1.0, y == 1.0) {
            (true, true) => tt += 1,
            (false, false) => ff += 1,
            _ => mismatch += 1,
        }
    }
    let r = 2 * mismatch;
    Q::new(r, tt + ff + r)
}

/// First node (row-major) whose oracle distance is minimal.
fn oracle_bmu<D: PartialOrd + Copy>(
    grid: &WeightGrid<f64>,
    x: &[f64],
    dist: impl Fn(&[f64], &[f64]) -> D,
) -> GridIndex {
    let shape = grid.shape();
    let mut best: Option<(GridIndex, D)> = None;
    for i in shape.indices() {
        let d = dist(grid.node(i), x);
        if best.is_none_or(|(_, b)| d < b) {
            best = Some((i, d));
        }
    }
    best.unwrap().0
}

fn closed_form(kind: ScheduleKind, start: f64, end: f64, t: usize, t_max: usize) -> f64 {
    let (t, tm) = (t as f64, t_max as f64);
    match kind {
        ScheduleKind::Inverse => start / t.max(1.0),
        ScheduleKind::Linear => start * (1.0 - t / tm),
        ScheduleKind::Power => start.powf(t / tm),
        ScheduleKind::Exponential => start * (-t / tm).exp(),
        ScheduleKind::StartEnd => start * (end / start).powf(t / tm),
    }
}

fn random_spd(n: usize, rng: &mut SomRng) -> Matrix<f64> {
    let a: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            m[i * n + j] = (0..n).map(|k| a[i * n + k] * a[j * n + k]).sum::<f64>();
        }
        m[i * n + i] += 0.1;
    }
    Matrix::new(n, n, m).unwrap()
}

// criteria

fn bmu_oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = rng_from_seed(derive_seed(11, "acceptance-bmu", 0));
    let mut mismatches = 0usize;
    let mut queries = 0usize;
    for g in 0..200 {
        let shape = GridShape::new(rng.random_range(1..=12), rng.random_range(1..=12));
        let n = rng.random_range(1..=8);
        for id in MetricId::ALL {
            let boolean = id == MetricId::Tanimoto;
            let draw = |rng: &mut SomRng| -> f64 {
                if boolean {
                    f64::from(rng.random_bool(0.5) as u8)
                } else {
                    rng.random_range(-2.0..2.0)
                }
            };
            let weights: Vec<f64> = (0..shape.n_nodes() * n).map(|_| draw(&mut rng)).collect();
            let grid = WeightGrid::from_weights(shape, n, weights).unwrap();
            let metric = match id {
                MetricId::Euclidean => Metric::Euclidean,
                MetricId::Manhattan => Metric::Manhattan,
                MetricId::Tanimoto => Metric::Tanimoto,
                MetricId::Mahalanobis if g % 2 == 0 => Metric::Mahalanobis {
                    cov_inv: random_spd(n, &mut rng),
                },
                MetricId::Mahalanobis => {
                    let rows: Vec<f64> = (0..(n + 4) * n).map(|_| draw(&mut rng)).collect();
                    Metric::resolve(id, &Matrix::new(n + 4, n, rows).unwrap()).unwrap()
                }
            };
            for _ in 0..10 {
                let x: Vec<f64> = (0..n).map(|_| draw(&mut rng)).collect();
                let got = find_bmu(&grid, &x, &metric).unwrap();
                let want = match &metric {
                    Metric::Euclidean => oracle_bmu(&grid, &x, oracle_euclidean),
                    Metric::Manhattan => oracle_bmu(&grid, &x, oracle_manhattan),
                    Metric::Tanimoto => oracle_bmu(&grid, &x, oracle_tanimoto),
                    Metric::Mahalanobis { cov_inv } => {
                        oracle_bmu(&grid, &x, |a, b| oracle_mahalanobis(a, b, cov_inv))
                    }
                };
                queries += 1;
                mismatches += usize::from(got != want);
            }
        }
    }
    let elapsed = start.elapsed();
    Outcome::new(
        mismatches == 0 && elapsed < Duration::from_secs(5),
        format!("{mismatches} mismatches in {queries} queries, {elapsed:.2?} (limit 5s)"),
    )
}

fn schedule_conformance() -> Outcome {
    let t_max = 1000;
    let mut worst = 0.0f64;
    let mut increases = 0usize;
    let cases: &[(ScheduleKind, f64, f64)] = &[
        (ScheduleKind::Inverse, 0.5, 0.5),
        (ScheduleKind::Linear, 1.0, 1.0),
        (ScheduleKind::Power, 0.005, 0.005),
        (ScheduleKind::Exponential, 1.0, 1.0),
        (ScheduleKind::StartEnd, 0.5, 0.05),
    ];
    for &(kind, start, end) in cases {
        let spec = ScheduleSpec::new(kind, start, end, t_max);
        for t in [0, t_max / 4, t_max / 2, t_max - 1] {
            let got = learning_rate(t, &spec).unwrap();
            worst = worst.max((got - closed_form(kind, start, end, t, t_max)).abs());
        }
        let values: Vec<f64> = (0..t_max)
            .map(|t| learning_rate(t, &spec).unwrap())
            .collect();
        increases += values.windows(2).filter(|w| w[1] > w[0]).count();
    }
    for &(kind, start, end) in &[
        (ScheduleKind::Linear, 4.0, 1.0),
        (ScheduleKind::Exponential, 4.0, 1.0),
        (ScheduleKind::StartEnd, 4.0, 1.0),
    ] {
        let spec = ScheduleSpec::new(kind, start, end, t_max);
        for t in [0, t_max / 4, t_max / 2, t_max - 1] {
            let want = closed_form(kind, start, end, t, t_max).max(1e-6);
            worst = worst.max((neighborhood_radius(t, &spec).unwrap() - want).abs());
        }
        let values: Vec<f64> = (0..t_max)
            .map(|t| neighborhood_radius(t, &spec).unwrap())
            .collect();
        increases += values.windows(2).filter(|w| w[1] > w[0]).count();
    }
    Outcome::new(
        worst <= 1e-12 && increases == 0,
        format!(
            "max abs error {worst:.3e} (limit 1e-12), {increases} increases over 8 x 1000 points"
        ),
    )
}

fn kernel_conformance() -> Outcome {
    let mut worst = 0.0f64;
    for sigma in [1.0, 2.0, 3.0] {
        let shape = GridShape::new(1, 8);
        let bmu = GridIndex::new(0, 0);
        let at = |k: f64| GridIndex::new(0, (k * sigma) as usize);
        let g = kernel_matrix(bmu, sigma, KernelKind::Gaussian, shape).unwrap();
        let m = kernel_matrix(bmu, sigma, KernelKind::MexicanHat, shape).unwrap();
        let hand = [
            (0.0, 1.0, 1.0),
            (1.0, (-0.5f64).exp(), 0.0),
            (2.0, (-2.0f64).exp(), -3.0 * (-2.0f64).exp()),
        ];
        for (k, gauss, hat) in hand {
            worst = worst.max((g.get(at(k)) - gauss).abs());
            worst = worst.max((m.get(at(k)) - hat).abs());
        }
    }
    let mut rng = rng_from_seed(derive_seed(11, "acceptance-kernel", 0));
    let mut violations = 0usize;
    for _ in 0..100 {
        let shape = GridShape::new(rng.random_range(1..=15), rng.random_range(1..=15));
        let bmu = shape.unflat(rng.random_range(0..shape.n_nodes()));
        let sigma = rng.random_range(0.1..8.0);
        let h = kernel_matrix(bmu, sigma, KernelKind::Gaussian, shape).unwrap();
        let nodes: Vec<(f64, f64)> = shape
            .indices()
            .map(|i| (grid_distance::<f64>(bmu, i), h.get(i)))
            .collect();
        for &(da, ha) in &nodes {
            for &(db, hb) in &nodes {
                if da < db && ha < hb {
                    violations += 1;
                }
            }
        }
    }
    Outcome::new(
        worst <= 1e-12 && violations == 0,
        format!("max abs error {worst:.3e} (limit 1e-12), {violations} monotonicity violations on 100 grids"),
    )
}

fn class_weight_identity() -> Outcome {
    let mut rng = rng_from_seed(derive_seed(11, "acceptance-weights", 0));
    let mut failures = 0usize;
    for _ in 0..50 {
        let n = rng.random_range(1..=500);
        let n_classes = rng.random_range(1..=12u32);
        let y: Vec<u32> = (0..n).map(|_| rng.random_range(0..n_classes)).collect();
        let table: ClassWeightTable<Q, u32> = class_weights(&y, true).unwrap();
        let total = table
            .counts()
            .iter()
            .zip(table.weights())
            .map(|(&c, w)| Q::from_integer(c as i64) * w)
            .fold(Q::from_integer(0), |a, b| a + b);
        failures += usize::from(total != Q::from_integer(n as i64));
    }
    Outcome::new(
        failures == 0,
        format!("{failures} of 50 label vectors violate the identity (exact rationals)"),
    )
}

fn flip_calibration() -> Outcome {
    let shape = GridShape::new(100, 100);
    let mut worst = 0.0f64;
    let mut lines = Vec::new();
    for (k, p) in [0.1, 0.5, 0.9].into_iter().enumerate() {
        let mut head =
            ClassificationHead::from_parts(shape, vec![0u8, 1], vec![0; 10_000]).unwrap();
        let mut rng = rng_from_seed(derive_seed(11, "acceptance-flip", k as u64));
        apply_class_update(
            &mut head,
            &ProbabilityGrid::constant(shape, p),
            &1,
            &mut rng,
        )
        .unwrap();
        let freq = head.node_classes().iter().filter(|&&c| c == 1).count() as f64 / 10_000.0;
        worst = worst.max((freq - p).abs());
        lines.push(format!("P={p}: {freq:.4}"));
    }
    Outcome::new(
        worst <= 0.02,
        format!("{} (tolerance 0.02)", lines.join(", ")),
    )
}

fn desk_regression() -> Outcome {
    let mut passes = 0;
    let mut slowest = Duration::ZERO;
    let mut lines = Vec::new();
    for seed in 0..10u64 {
        let start = Instant::now();
        let data: Dataset =
            synthetic_regression(600, 0.05, &mut rng_from_seed(derive_seed(seed, "data", 0)))
                .unwrap();
        let (train, test) = train_test_split(
            &data,
            0.5,
            &mut rng_from_seed(derive_seed(seed, "split", 0)),
        )
        .unwrap();
        let config = Config::new(20, 20)
            .with_iterations(2500, 2500)
            .with_seed(seed);
        let opts = TrainOptions {
            task: Task::Regression,
            scale: false,
        };
        let model = train_model(&train, &config, opts, 0).unwrap();
        let report = evaluate(&model, Some(&train), Some(&test)).unwrap();
        let r2_train = report.section("train").unwrap().get("r2").unwrap();
        let r2_test = report.section("test").unwrap().get("r2").unwrap();
        let elapsed = start.elapsed();
        slowest = slowest.max(elapsed);
        let ok = r2_test >= 0.85
            && (r2_train - r2_test).abs() <= 0.10
            && elapsed < Duration::from_secs(60);
        passes += usize::from(ok);
        lines.push(format!("{r2_test:.3}/{:.3}", (r2_train - r2_test).abs()));
    }
    Outcome::new(
        passes >= 9,
        format!(
            "{passes}/10 seeds pass (need 9); test R2/gap per seed: {}; slowest run {slowest:.2?} (limit 60s)",
            lines.join(" ")
        ),
    )
}

fn desk_classification() -> Outcome {
    let start = Instant::now();
    let data: Dataset =
        synthetic_blobs(2000, 4, 8.0, &mut rng_from_seed(derive_seed(0, "data", 0))).unwrap();
    let config = Config::new(20, 20).with_iterations(2000, 5000).with_seed(0);
    let opts = TrainOptions {
        task: Task::Classification,
        scale: false,
    };
    let report = cross_validate(&data, &config, opts, 5).unwrap();
    let elapsed = start.elapsed();
    let oa_test = report.fold_mean("test", "oa").unwrap();
    let oa_train = report.fold_mean("train", "oa").unwrap();
    let kappa = report.fold_mean("test", "kappa").unwrap();
    let gap = (oa_train - oa_test).abs();
    Outcome::new(
        oa_test >= 0.95 && gap <= 0.05 && kappa >= 0.90 && elapsed < Duration::from_secs(120),
        format!(
            "mean test OA {oa_test:.4} (>= 0.95), gap {gap:.4} (<= 0.05), kappa {kappa:.4} (>= 0.90), {elapsed:.2?} (limit 120s)"
        ),
    )
}

fn metric_hand_values() -> Outcome {
    let q = |n: i64, d: i64| Q::new(n, d);
    let mut failed = Vec::new();
    let r2: Q = r_squared(&[q(0, 1), q(1, 1), q(2, 1)], &[q(0, 1), q(1, 1), q(1, 1)]).unwrap();
    if r2 != q(1, 2) {
        failed.push(format!("r2 {r2}"));
    }
    let y = [q(3, 1), q(-1, 2), q(7, 3)];
    let perfect: Q = r_squared(&y, &y).unwrap();
    let mean = (y[0] + y[1] + y[2]) / q(3, 1);
    let at_mean: Q = r_squared(&y, &[mean; 3]).unwrap();
    if perfect != q(1, 1) || at_mean != q(0, 1) {
        failed.push(format!("r2 trivial cases {perfect}, {at_mean}"));
    }

    let t = ["A", "A", "B", "B"];
    let p = ["A", "B", "B", "B"];
    let cm = confusion(&t, &p).unwrap();
    if cm.row(0) != [1, 1] || cm.row(1) != [0, 2] {
        failed.push(format!("confusion {:?} {:?}", cm.row(0), cm.row(1)));
    }
    let oa: Q = overall_accuracy(&cm).unwrap();
    let aa: Q = average_accuracy(&cm).unwrap();
    let kappa: Q = cohens_kappa(&cm).unwrap();
    if oa != q(3, 4) || aa != q(3, 4) || kappa != q(1, 2) {
        failed.push(format!("oa {oa} aa {aa} kappa {kappa}"));
    }
    let diag = confusion(&t, &t).unwrap();
    let ones: [Q; 3] = [
        overall_accuracy(&diag).unwrap(),
        average_accuracy(&diag).unwrap(),
        cohens_kappa(&diag).unwrap(),
    ];
    if ones != [q(1, 1); 3] {
        failed.push(format!("diagonal {ones:?}"));
    }
    // OA = theta = 1/2 gives kappa 0
    let chance = ConfusionMatrix::from_counts(vec!["A", "B"], vec![1, 1, 1, 1]).unwrap();
    let k0: Q = cohens_kappa(&chance).unwrap();
    if k0 != q(0, 1) {
        failed.push(format!("chance kappa {k0}"));
    }
    Outcome::new(
        failed.is_empty(),
        if failed.is_empty() {
            "R2 = 1/2, OA = 3/4, AA = 3/4, kappa = 1/2 exactly; trivial cases exact".to_string()
        } else {
            failed.join("; ")
        },
    )
}

fn crossval_determinism() -> Outcome {
    let data: Dataset =
        synthetic_blobs(600, 3, 8.0, &mut rng_from_seed(derive_seed(5, "data", 0))).unwrap();
    let config = Config::new(10, 10).with_iterations(1000, 2000).with_seed(5);
    let opts = TrainOptions {
        task: Task::Classification,
        scale: true,
    };
    let a = cross_validate(&data, &config, opts, 5).unwrap();
    let b = cross_validate(&data, &config, opts, 5).unwrap();
    let (ra, rb) = (a.render(), b.render());
    let mean = a
        .folds
        .iter()
        .map(|f| f.test.get("oa").unwrap())
        .sum::<f64>()
        / 5.0;
    let mean_ok = (a.fold_mean("test", "oa").unwrap() - mean).abs() <= 1e-12;
    Outcome::new(
        ra == rb && a.folds.len() == 5 && mean_ok,
        format!(
            "{} byte reports {}, mean equals fold average: {mean_ok}",
            ra.len(),
            if ra == rb { "identical" } else { "differ" }
        ),
    )
}

fn salinas(path: &Path) -> Outcome {
    let start = Instant::now();
    let label = std::env::var("SALINAS_LABEL").unwrap_or_else(|_| "label".into());
    let mut data: Dataset = match load_csv(path, Some(&label), LabelKind::Categorical) {
        Ok(d) => d,
        Err(e) => return Outcome::new(false, format!("cannot load {}: {e}", path.display())),
    };
    if data
        .class_labels()
        .unwrap()
        .iter()
        .any(|c| c.as_str() == "0")
    {
        data = data.drop_class(&ClassLabel::new("0")).unwrap();
    }
    if data.n_features() == 224 {
        let mask_path =
            PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/salinas_band_mask.txt");
        let mask = load_band_mask(&mask_path).unwrap();
        data = data.drop_features(&band_column_names(&mask)).unwrap();
    }
    let config = Config::new(40, 20)
        .with_iterations(5000, 20000)
        .with_seed(0);
    let opts = TrainOptions {
        task: Task::Classification,
        scale: true,
    };
    let report = match cross_validate(&data, &config, opts, 5) {
        Ok(r) => r,
        Err(e) => return Outcome::new(false, format!("cross-validation failed: {e}")),
    };
    let oa = report.fold_mean("test", "oa").unwrap();
    let kappa = report.fold_mean("test", "kappa").unwrap();
    Outcome::new(
        (oa - 0.716).abs() <= 0.05 && (kappa - 0.684).abs() <= 0.05,
        format!(
            "N={} bands={}: mean test OA {oa:.4} (0.716 +/- 0.05), kappa {kappa:.4} (0.684 +/- 0.05), {:.1?}",
            data.len(),
            data.n_features(),
            start.elapsed()
        ),
    )
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("bmu oracle equivalence", bmu_oracle_equivalence),
        ("schedule conformance", schedule_conformance),
        ("kernel conformance", kernel_conformance),
        ("class weight identity", class_weight_identity),
        ("stochastic update calibration", flip_calibration),
        ("desk-scale regression", desk_regression),
        ("desk-scale classification", desk_classification),
        ("metric hand values", metric_hand_values),
        ("crossval determinism", crossval_determinism),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let outcome = run();
        println!(
            "{} {name}: {}",
            if outcome.pass { "PASS" } else { "FAIL" },
            outcome.detail
        );
        failed += usize::from(!outcome.pass);
    }
    match std::env::var_os("SALINAS_CSV") {
        Some(path) => {
            let outcome = salinas(Path::new(&path));
            println!(
                "{} salinas reference (optional): {}",
                if outcome.pass { "PASS" } else { "FAIL" },
                outcome.detail
            );
            failed += usize::from(!outcome.pass);
        }
        None => {
            println!("SKIP salinas reference (optional): set SALINAS_CSV to a converted scene CSV")
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
