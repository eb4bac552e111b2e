//! Acceptance gate: one verdict line per criterion.
//!
//! Criteria that need the MovieLens corpora run when `MOVIELENS_100K_DIR`
//! (the extracted `ml-100k` directory) or `MOVIELENS_1M_DIR` (`ml-1m`) is set,
//! and report SKIP otherwise. Lines marked `info` are context, not verdicts.

use std::env;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};

use dlfm::baselines::{als_solve_traced, AlsConfig};
use dlfm::config::DatasetKind;
use dlfm::data::{
    build_matrix, load_predefined_folds, random_folds, restrict_ids, DatasetStats, FoldSplit,
    MaskedRatings, RatingScale,
};
use dlfm::eval::{cross_validate, EvalReport, Method};
use dlfm::linalg::{matmul_chain, pinv, project_nonneg, svd, DenseMatrix};
use dlfm::solver::{
    gradient_step, masked_objective, project_factor, solve, Architecture, ConvergenceTrace,
    SolverConfig,
};
use dlfm::synthetic::{bernoulli_mask, movielens_like, nonneg_low_rank, SyntheticSpec};
use dlfm_cli::{load_all, verify};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

struct Gate {
    failed: usize,
}

impl Gate {
    fn report(&mut self, id: &str, title: &str, verdict: Verdict) {
        let (tag, detail) = match verdict {
            Verdict::Pass(d) => ("PASS", d),
            Verdict::Fail(d) => {
                self.failed += 1;
                ("FAIL", d)
            }
            Verdict::Skip(d) => ("SKIP", d),
        };
        println!("[{tag}] {id} {title}: {detail}");
    }

    fn info(&self, id: &str, detail: &str) {
        println!("[info] {id} {detail}");
    }
}

fn verdict(ok: bool, detail: String) -> Verdict {
    if ok {
        Verdict::Pass(detail)
    } else {
        Verdict::Fail(detail)
    }
}

fn dataset_dir(var: &str) -> Option<PathBuf> {
    env::var_os(var).map(PathBuf::from).filter(|p| p.is_dir())
}

fn arch(text: &str) -> Architecture {
    text.parse().expect("valid architecture")
}

fn deep(text: &str) -> Method {
    Method::DeepLfm {
        arch: arch(text),
        config: SolverConfig::default(),
    }
}

/// Runs `method` on every fold, keeping fold 1's trace.
fn run_cv(
    folds: &[FoldSplit],
    method: &Method,
) -> dlfm::Result<(EvalReport, Option<ConvergenceTrace>)> {
    let mut first_trace = None;
    let report = cross_validate(folds, method, RatingScale::STARS, 4.0, |outcome| {
        if outcome.metrics.fold == 1 {
            first_trace = outcome.fitted.trace().cloned();
        }
        Ok(())
    })?;
    Ok((report, first_trace))
}

fn trace_verdict(trace: &ConvergenceTrace) -> (bool, String) {
    let frac = trace.non_increasing_fraction();
    let first = trace.objective.first().copied().unwrap_or(f64::NAN);
    let last = trace.objective.last().copied().unwrap_or(f64::NAN);
    (
        frac >= 0.95 && last < first,
        format!(
            "{} iterations, {:.1}% non-increasing, objective {first:.1} -> {last:.1}",
            trace.len(),
            100.0 * frac
        ),
    )
}

fn accuracy_and_ranking(gate: &mut Gate) {
    let title1 = "ML-100K accuracy of 40-20-10 and 40-20";
    let title2 = "ML-100K P@10 / R@10";
    let title3 = "monotone objective trace on fold u1";
    let title6 = "ALS 5-fold RMSE on ML-100K";
    let Some(dir) = dataset_dir("MOVIELENS_100K_DIR") else {
        let why = "set MOVIELENS_100K_DIR to the extracted ml-100k directory".to_string();
        for (id, t) in [
            ("C1", title1),
            ("C2", title2),
            ("C3", title3),
            ("C6b", title6),
        ] {
            gate.report(id, t, Verdict::Skip(why.clone()));
        }
        surrogate_proxy(gate);
        return;
    };
    let folds = match load_predefined_folds(&dir) {
        Ok(f) => f,
        Err(e) => {
            gate.report(
                "C1",
                title1,
                Verdict::Fail(format!("cannot load folds: {e}")),
            );
            return;
        }
    };
    let runs = (
        run_cv(&folds, &deep("40-20-10")),
        run_cv(&folds, &deep("40-20")),
        run_cv(&folds, &Method::Als(AlsConfig::default())),
    );
    let ((three, trace), (two, _), (als, _)) = match runs {
        (Ok(a), Ok(b), Ok(c)) => (a, b, c),
        (a, b, c) => {
            let errs: Vec<String> = [a.err(), b.err(), c.err()]
                .into_iter()
                .flatten()
                .map(|e| e.to_string())
                .collect();
            gate.report("C1", title1, Verdict::Fail(errs.join("; ")));
            return;
        }
    };
    let m3 = three.mean().expect("folds");
    let m2 = two.mean().expect("folds");
    let ma = als.mean().expect("folds");
    for r in [&three, &two, &als] {
        for line in r.table().lines() {
            gate.info("C1", line);
        }
    }
    let near = |v: f64, target: f64| (v - target).abs() <= 0.04;
    let on_target =
        near(m3[0], 0.717) && near(m3[1], 0.901) && near(m2[0], 0.726) && near(m2[1], 0.939);
    let beats_als = three
        .folds
        .iter()
        .zip(&als.folds)
        .all(|(d, a)| d.mae < a.mae && d.rmse < a.rmse);
    let detail = format!(
        "40-20-10 MAE {:.4} RMSE {:.4}; 40-20 MAE {:.4} RMSE {:.4}; ALS MAE {:.4} RMSE {:.4}; within ±0.04 of the target values: {on_target}; beats ALS on every fold: {beats_als}",
        m3[0], m3[1], m2[0], m2[1], ma[0], ma[1]
    );
    gate.report("C1", title1, verdict(on_target || beats_als, detail));
    gate.report(
        "C2",
        title2,
        verdict(
            (0.40..=0.65).contains(&m3[2]) && (0.55..=0.75).contains(&m3[4]),
            format!(
                "P@10 {:.4} (want 0.40..0.65), R@10 {:.4} (want 0.55..0.75)",
                m3[2], m3[4]
            ),
        ),
    );
    match trace {
        Some(t) => {
            let (ok, d) = trace_verdict(&t);
            gate.report("C3", title3, verdict(ok, d));
        }
        None => gate.report("C3", title3, Verdict::Fail("no trace recorded".into())),
    }
    gate.report(
        "C6b",
        title6,
        verdict(
            ma[1] <= 0.96,
            format!("mean RMSE {:.4} (want <= 0.96)", ma[1]),
        ),
    );
}

/// Without the corpus: the monotonicity check on the first fold of a seeded
/// MovieLens-sized surrogate, reported as information only.
fn surrogate_proxy(gate: &mut Gate) {
    let Ok(triples) = movielens_like(&SyntheticSpec::ml100k_like(3)) else {
        return;
    };
    let Ok(folds) = random_folds(&triples, 5, 1, None) else {
        return;
    };
    let config = SolverConfig {
        outer_iters: 60,
        ..SolverConfig::default()
    };
    match solve(&folds[0].train, &arch("40-20-10"), &config) {
        Ok((_, trace)) => {
            let (ok, d) = trace_verdict(&trace);
            gate.info(
                "C3",
                &format!(
                    "surrogate 943x1682 fold 1, 40-20-10, gamma 0.1: {d} (criterion met: {ok})"
                ),
            );
        }
        Err(e) => gate.info("C3", &format!("surrogate run failed: {e}")),
    }
}

fn heldout_rmse(product: &DenseMatrix, truth: &DenseMatrix, mask: &DenseMatrix) -> f64 {
    let (mut se, mut n) = (0.0, 0usize);
    for i in 0..truth.rows() {
        for j in 0..truth.cols() {
            if mask.get(i, j) == 0.0 {
                se += (product.get(i, j) - truth.get(i, j)).powi(2);
                n += 1;
            }
        }
    }
    (se / n.max(1) as f64).sqrt()
}

fn small_instance(seed: u64) -> (DenseMatrix, DenseMatrix, MaskedRatings) {
    let (a, b) = nonneg_low_rank(6, 6, 2, (0.5, 1.5), seed);
    let truth = a.matmul(&b).unwrap();
    let mask = bernoulli_mask(6, 6, 0.6, seed + 100);
    let data = MaskedRatings::from_parts(truth.hadamard(&mask).unwrap(), mask.clone()).unwrap();
    (truth, mask, data)
}

fn synthetic_recovery(gate: &mut Gate) {
    let config = SolverConfig {
        gamma: 1.0,
        outer_iters: 20_000,
        rel_tol: 0.0,
        ..SolverConfig::default()
    };
    let (truth, mask, data) = small_instance(1);
    let completion = solve(&data, &arch("2"), &config)
        .and_then(|(stack, _)| stack.product())
        .map(|p| heldout_rmse(&p, &truth, &mask));

    let (a, b) = nonneg_low_rank(6, 6, 1, (0.5, 1.5), 4);
    let full = MaskedRatings::from_parts(
        a.matmul(&b).unwrap(),
        DenseMatrix::from_fn(6, 6, |_, _| 1.0),
    )
    .unwrap();
    let exact = solve(&full, &arch("1"), &SolverConfig::default())
        .map(|(_, t)| t.objective.last().copied().unwrap_or(f64::NAN));

    match (completion, exact) {
        (Ok(rmse), Ok(obj)) => gate.report(
            "C4",
            "synthetic recovery",
            verdict(
                rmse <= 1e-2 && obj <= 1e-6,
                format!("6x6 rank-2 at 60% held-out RMSE {rmse:.2e} (want <= 1e-2); fully observed rank-1 objective {obj:.2e} (want <= 1e-6)"),
            ),
        ),
        (c, e) => gate.report(
            "C4",
            "synthetic recovery",
            Verdict::Fail(format!("{:?} / {:?}", c.err(), e.err())),
        ),
    }

    // tally over masks that an unregularised ALS oracle can complete
    let (mut certified, mut recovered) = (0, 0);
    for seed in 0..20u64 {
        let (truth, mask, data) = small_instance(seed);
        let oracle = als_solve_traced(
            &data,
            &AlsConfig {
                rank: 2,
                lambda: 1e-10,
                iters: 3000,
            },
        );
        let Ok((f, _)) = oracle else { continue };
        let als_product = f.u.matmul(&f.v).unwrap();
        if heldout_rmse(&als_product, &truth, &mask) > 1e-6 {
            continue;
        }
        certified += 1;
        let deep_config = SolverConfig {
            outer_iters: 5000,
            ..config.clone()
        };
        if let Ok((stack, _)) = solve(&data, &arch("2"), &deep_config) {
            if heldout_rmse(&stack.product().unwrap(), &truth, &mask) <= 1e-2 {
                recovered += 1;
            }
        }
    }
    gate.info(
        "C4",
        &format!("masks seeded 0..20 completable by the ALS oracle: {certified}; completed by the deep solver: {recovered}"),
    );
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.random_range(-5.0..5.0))
}

fn kernels(gate: &mut Gate) {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut penrose, mut recon) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let (r, c) = (rng.random_range(1..=12), rng.random_range(1..=12));
        let a = random_matrix(&mut rng, r, c);
        let p = pinv(&a, None).unwrap();
        let ap = a.matmul(&p).unwrap();
        let pa = p.matmul(&a).unwrap();
        let rel = |d: DenseMatrix, s: f64| d.frobenius_norm() / s.max(1.0);
        penrose = penrose
            .max(rel(
                ap.matmul(&a).unwrap().sub(&a).unwrap(),
                a.frobenius_norm(),
            ))
            .max(rel(
                pa.matmul(&p).unwrap().sub(&p).unwrap(),
                p.frobenius_norm(),
            ))
            .max(ap.sub(&ap.transpose()).unwrap().frobenius_norm())
            .max(pa.sub(&pa.transpose()).unwrap().frobenius_norm());
        let d = svd(&a).unwrap();
        recon = recon.max(rel(
            d.reconstruct(None).sub(&a).unwrap(),
            a.frobenius_norm(),
        ));
    }

    let mut fixed = 0.0f64;
    for _ in 0..20 {
        let pos = |rng: &mut ChaCha8Rng, r, c| {
            DenseMatrix::from_fn(r, c, |_, _| rng.random_range(0.1..2.0))
        };
        let (a, u, b) = (
            pos(&mut rng, 8, 4),
            pos(&mut rng, 4, 3),
            pos(&mut rng, 3, 9),
        );
        let x = matmul_chain(&[&a, &u, &b]).unwrap();
        let out = project_factor(&u, Some(&a), Some(&b), &x, None).unwrap();
        fixed = fixed.max(out.sub(&u).unwrap().max_abs());
    }

    let mut grad_err = 0.0f64;
    for seed in 0..10u64 {
        let mask = bernoulli_mask(5, 6, 0.5, seed);
        let y = DenseMatrix::from_fn(5, 6, |i, j| {
            mask.get(i, j) * (1.0 + ((i + 2 * j) % 5) as f64)
        });
        let data = MaskedRatings::from_parts(y, mask).unwrap();
        let x = random_matrix(&mut rng, 5, 6);
        let gamma = 0.3;
        let stepped = gradient_step(&x, &data, gamma).unwrap();
        let h = 1e-5;
        for i in 0..5 {
            for j in 0..6 {
                let f = |d: f64| {
                    let s = DenseMatrix::from_fn(5, 6, |r, c| {
                        x.get(r, c) + if (r, c) == (i, j) { d } else { 0.0 }
                    });
                    masked_objective(&data, &s).unwrap()
                };
                let numeric = (f(h) - f(-h)) / (2.0 * h);
                let analytic = (x.get(i, j) - stepped.get(i, j)) / gamma;
                grad_err = grad_err
                    .max((numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1.0));
            }
        }
    }

    let mut idempotent = true;
    for _ in 0..100 {
        let a = random_matrix(&mut rng, 7, 5);
        let once = project_nonneg(&a);
        idempotent &= project_nonneg(&once) == once && once.min_value() >= 0.0;
    }

    gate.report(
        "C5",
        "linear-algebra kernels",
        verdict(
            penrose <= 1e-8 && recon <= 1e-8 && fixed <= 1e-8 && grad_err <= 1e-5 && idempotent,
            format!(
                "Moore-Penrose max residual {penrose:.1e}, SVD reconstruction {recon:.1e}, projection fixed point {fixed:.1e}, gradient vs central differences {grad_err:.1e}, P+ idempotent {idempotent}"
            ),
        ),
    );
}

fn als_monotone(gate: &mut Gate) {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst = f64::NEG_INFINITY;
    let mut instances = 0;
    while instances < 50 {
        let (m, n) = (rng.random_range(5..20), rng.random_range(5..20));
        let mask = bernoulli_mask(m, n, 0.4, rng.random());
        if mask.max_abs() == 0.0 {
            continue;
        }
        let y = DenseMatrix::from_fn(m, n, |i, j| mask.get(i, j) * rng.random_range(1..=5) as f64);
        let data = MaskedRatings::from_parts(y, mask).unwrap();
        let config = AlsConfig {
            rank: rng.random_range(1..=m.min(n).min(6)),
            lambda: rng.random_range(0.01..10.0),
            iters: 10,
        };
        let (_, trace) = als_solve_traced(&data, &config).unwrap();
        for w in trace.windows(2) {
            worst = worst.max((w[1] - w[0]) / w[0].abs().max(1.0));
        }
        instances += 1;
    }
    gate.report(
        "C6a",
        "ALS objective non-increasing per half-step",
        verdict(
            worst <= 1e-12,
            format!("50 instances, largest relative increase {worst:.1e}"),
        ),
    );
}

fn cv_run(dir: &Path) -> std::io::Result<(bool, Vec<u8>)> {
    let status = Command::new(env!("CARGO_BIN_EXE_dlfm"))
        .args([
            "cv",
            "--dataset-kind",
            "synthetic",
            "--arch",
            "6-3",
            "--outer-iters",
            "25",
        ])
        .args(["--set", "synthetic_users=60", "--set", "synthetic_items=80"])
        .args(["--set", "synthetic_ratings=1200", "--seed", "11"])
        .arg("--output-dir")
        .arg(dir)
        .output()?;
    Ok((
        status.status.success(),
        std::fs::read(dir.join("report.csv")).unwrap_or_default(),
    ))
}

fn determinism(gate: &mut Gate) {
    let tmp = tempfile::tempdir().expect("temp dir");
    let runs = (cv_run(&tmp.path().join("a")), cv_run(&tmp.path().join("b")));
    let v = match runs {
        (Ok((true, a)), Ok((true, b))) => verdict(
            !a.is_empty() && a == b,
            format!(
                "two `dlfm cv` runs, report.csv {} bytes, identical: {}",
                a.len(),
                a == b
            ),
        ),
        other => Verdict::Fail(format!(
            "cv run failed: {:?}",
            (other.0.map(|r| r.0), other.1.map(|r| r.0))
        )),
    };
    gate.report("C7", "byte-identical cross-validation reports", v);
}

fn ml1m(gate: &mut Gate) {
    let title = "ML-1M ingestion and one solver iteration";
    let Some(dir) = dataset_dir("MOVIELENS_1M_DIR") else {
        gate.report(
            "C8",
            title,
            Verdict::Skip("set MOVIELENS_1M_DIR to the extracted ml-1m directory".into()),
        );
        return;
    };
    let stats = match verify(&dir, DatasetKind::Ml1m) {
        Ok(s) => s,
        Err(e) => {
            gate.report("C8", title, Verdict::Fail(e.to_string()));
            return;
        }
    };
    let result = load_all(&dir, DatasetKind::Ml1m).and_then(|triples| {
        let slice = restrict_ids(&triples, 600, 800);
        let (data, _) = build_matrix(&slice, None)?;
        let config = SolverConfig {
            outer_iters: 1,
            ..SolverConfig::default()
        };
        let (_, trace) = solve(&data, &arch("40-20-10"), &config)?;
        Ok((DatasetStats::of(&slice), trace))
    });
    match result {
        Ok((slice, trace)) => gate.report(
            "C8",
            title,
            verdict(
                trace.len() == 1 && trace.objective[0].is_finite(),
                format!(
                    "{stats}; slice {slice}: objective after 1 iteration {:.1}",
                    trace.objective[0]
                ),
            ),
        ),
        Err(e) => gate.report("C8", title, Verdict::Fail(e.to_string())),
    }
}

fn main() -> ExitCode {
    let mut gate = Gate { failed: 0 };
    kernels(&mut gate);
    als_monotone(&mut gate);
    synthetic_recovery(&mut gate);
    determinism(&mut gate);
    accuracy_and_ranking(&mut gate);
    ml1m(&mut gate);
    if gate.failed == 0 {
        println!("acceptance: no failing criteria");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {} failing criteria", gate.failed);
        ExitCode::FAILURE
    }
}
