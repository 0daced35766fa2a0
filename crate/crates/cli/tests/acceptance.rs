//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits non-zero if any criterion fails.
//!
//! Criteria 1, 2 and 8 run the six full-scale experiments in
//! `configs/paper_table1.json` (tens of minutes on one core).

use std::cell::Cell;
use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use nalgebra::DMatrix;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use shardpost::combine::{combine_average, combine_consensus, shard_weights, DpeChain};
use shardpost::estimate::{EstimatorKind, EstimatorSpec};
use shardpost::harness::{run_experiment, ConfigFile, ExperimentReport};
use shardpost::metrics::{relative_l2, sample_skewness};
use shardpost::models::{fractionate_prior, partition, presets, simulate_data, FractionatedPrior, ShardData};
use shardpost::numeric::{build_grid, inverse_cdf_sample, lagrange_interpolate, newton_cotes_sum, Cdf, Grid, GriddedDensity};
use shardpost::product::{direct_density_product, product_of_log_densities};
use shardpost::{Draws, GridConfig, Method, PiecewisePolynomial, SubposteriorSamples, WeightMatrix};
use statrs::function::gamma::ln_gamma;

/// Average relative L2 per method: direct, consensus, dpe, average.
const REFERENCE_ERRORS: [(&str, [f64; 4]); 6] = [
    ("binomial_M10", [0.015, 0.288, 0.329, 0.576]),
    ("binomial_M20", [0.054, 0.510, 0.537, 1.015]),
    ("multinomial_M10", [0.029, 0.194, 0.208, 0.581]),
    ("multinomial_M20", [0.039, 0.283, 0.304, 1.030]),
    ("mvn_M10", [0.0037, 1.082, 1.330, 1.081]),
    ("mvn_M20", [0.0032, 1.064, 1.203, 1.064]),
];
const BUDGET_SECONDS: f64 = 1800.0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn shard(id: usize, draws: Draws) -> SubposteriorSamples {
    SubposteriorSamples {
        draws,
        shard_id: id,
        seed: id as u64,
        burnin: 0,
    }
}

fn runner(cases: u32) -> TestRunner {
    TestRunner::new_with_rng(
        Config {
            cases,
            failure_persistence: None,
            ..Config::default()
        },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    )
}

fn beta_ln_pdf(x: f64, a: f64, b: f64) -> f64 {
    ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + (a - 1.0) * x.ln() + (b - 1.0) * (-x).ln_1p()
}

// Criterion 1 and 2 share these full-scale results.
struct FullScale {
    reports: Vec<ExperimentReport>,
    // Criterion 8, from binomial_M10.
    skew: Option<(f64, f64, f64)>,
}

fn run_full_scale() -> Result<FullScale, String> {
    let path = repo_root().join("configs/paper_table1.json");
    let file = ConfigFile::load(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut reports = Vec::new();
    let mut skew = None;
    for config in &file.experiments {
        let run = run_experiment(config).map_err(|e| format!("{}: {e}", config.label()))?;
        println!(
            "  ran {:<16} direct {:.4}  consensus {:.4}  dpe {:.4}  average {:.4}  ({:.0} s)",
            run.report.name,
            avg(&run.report, Method::Direct),
            avg(&run.report, Method::Consensus),
            avg(&run.report, Method::Dpe),
            avg(&run.report, Method::Average),
            run.report.timings.total
        );
        let _ = std::io::stdout().flush();
        if run.report.name == "binomial_M10" {
            let full = sample_skewness(&run.full.draws.column(0));
            let direct = run
                .direct
                .as_ref()
                .and_then(|d| d.first())
                .ok_or("binomial_M10 has no direct estimate")?
                .density
                .skewness()
                .map_err(|e| e.to_string())?;
            let average = run
                .combined
                .iter()
                .find(|c| c.method == Method::Average)
                .map(|c| sample_skewness(&c.draws.column(0)))
                .ok_or("binomial_M10 has no average draws")?;
            skew = Some((full, direct, average));
        }
        reports.push(run.report);
    }
    Ok(FullScale { reports, skew })
}

fn avg(report: &ExperimentReport, m: Method) -> f64 {
    report.method(m).map_or(f64::NAN, |r| r.average)
}

fn criterion_1(full: &FullScale) -> Outcome {
    let mut failures = Vec::new();
    for r in &full.reports {
        let direct = avg(r, Method::Direct);
        let others = [Method::Consensus, Method::Dpe, Method::Average].map(|m| avg(r, m));
        if !others.iter().all(|&o| direct < o) {
            failures.push(format!("{}: direct {direct:.4} not smallest", r.name));
        }
        if r.timings.total >= BUDGET_SECONDS {
            failures.push(format!("{}: {:.0} s over budget", r.name, r.timings.total));
        }
    }
    if full.reports.len() != 6 {
        failures.push(format!("{} of 6 experiments ran", full.reports.len()));
    }
    let pass = failures.is_empty();
    outcome(
        pass,
        if pass {
            "direct smallest in all six rows, each under 30 min".to_string()
        } else {
            failures.join("; ")
        },
    )
}

fn criterion_2(full: &FullScale) -> Outcome {
    let by_name: HashMap<&str, &ExperimentReport> = full.reports.iter().map(|r| (r.name.as_str(), r)).collect();
    let methods = [Method::Direct, Method::Consensus, Method::Dpe, Method::Average];
    let mut failures = Vec::new();
    for (name, reference) in REFERENCE_ERRORS {
        let Some(r) = by_name.get(name) else {
            failures.push(format!("{name}: missing"));
            continue;
        };
        let ours = methods.map(|m| avg(r, m));
        if ours[0].is_nan() || ours[0] >= 0.1 {
            failures.push(format!("{name} direct {:.4} >= 0.1", ours[0]));
        }
        for k in 1..4 {
            let ok = if name.starts_with("mvn") {
                ours[k] > 0.5
            } else {
                ours[k] >= reference[k] / 2.0 && ours[k] <= reference[k] * 2.0
            };
            if !ok {
                failures.push(format!("{name} {} {:.4} (reference {})", methods[k], ours[k], reference[k]));
            }
        }
    }
    let pass = failures.is_empty();
    outcome(
        pass,
        if pass {
            "all rows within their bands".to_string()
        } else {
            format!("outside band: {}", failures.join("; "))
        },
    )
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let spec = presets::binomial();
    let m = 10;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let data = simulate_data(&spec, &mut rng).unwrap();
    let shards = partition(&data, m, &mut rng).unwrap();
    let FractionatedPrior::Beta { alpha, beta, .. } = fractionate_prior(&spec, m).unwrap() else {
        return outcome(false, "binomial prior is not Beta");
    };
    let (mut succ, mut fail) = (0.0, 0.0);
    let params: Vec<(f64, f64)> = shards
        .iter()
        .map(|s| match s.data {
            ShardData::Binomial { trials, successes } => {
                succ += successes as f64;
                fail += (trials - successes) as f64;
                (alpha + successes as f64, beta + (trials - successes) as f64)
            }
            _ => (f64::NAN, f64::NAN),
        })
        .collect();
    let grid = build_grid(1e-6, 0.004, 1e-5, 2).unwrap();
    let logs: Vec<Vec<f64>> = params
        .iter()
        .map(|&(a, b)| grid.points().map(|x| beta_ln_pdf(x, a, b)).collect())
        .collect();
    let product = product_of_log_densities(&grid, &logs).unwrap();
    let interp = lagrange_interpolate(&product);
    let combined = GriddedDensity::from_fn(grid.clone(), |x| interp.eval(x)).unwrap().normalize().unwrap();
    let truth = GriddedDensity::from_fn(grid.clone(), |x| beta_ln_pdf(x, 1.0 + succ, 1.0 + fail).exp())
        .unwrap()
        .normalize()
        .unwrap();
    let err = relative_l2(&truth, &combined).unwrap();
    let secs = start.elapsed().as_secs_f64();
    outcome(err < 1e-3 && secs < 10.0, format!("relative L2 {err:.2e} on dx = 1e-5, {secs:.2} s"))
}

fn criterion_4() -> Outcome {
    let estimator = EstimatorSpec::new(EstimatorKind::LogsplineLike);
    let mut pass = true;
    let mut parts = Vec::new();
    for m in [2usize, 10, 20] {
        let mut rng = ChaCha8Rng::seed_from_u64(40 + m as u64);
        let subs: Vec<_> = (1..=m)
            .map(|id| {
                let xs = (0..50_000).map(|_| StandardNormal.sample(&mut rng)).collect();
                shard(id, Draws::from_column(xs))
            })
            .collect();
        let est = direct_density_product(&subs, &[0], &estimator, &GridConfig::default(), None, 0).unwrap();
        let mean = est[0].density.mean().unwrap();
        let var = est[0].density.variance().unwrap();
        let rel = var * m as f64 - 1.0;
        pass &= mean.abs() < 0.01 && rel.abs() < 0.05;
        parts.push(format!("M={m}: bias {mean:+.4}, variance {:+.2}%", 100.0 * rel));
    }
    outcome(pass, parts.join("; "))
}

fn criterion_5() -> Outcome {
    let s1 = [-0.3, 0.1, 0.25, 0.9, 1.4];
    let s2 = [0.0, 0.35, 0.6, 0.8, 2.0];
    let h = 0.4;
    let subs = vec![
        shard(1, Draws::from_column(s1.to_vec())),
        shard(2, Draws::from_column(s2.to_vec())),
    ];
    let mut exact = [[0.0; 5]; 5];
    let mut total = 0.0;
    for (i, x1) in s1.iter().enumerate() {
        for (j, x2) in s2.iter().enumerate() {
            let xbar = (x1 + x2) / 2.0;
            let w = (-((x1 - xbar).powi(2) + (x2 - xbar).powi(2)) / (2.0 * h * h)).exp();
            exact[i][j] = w;
            total += w;
        }
    }
    let mut chain = DpeChain::new(&subs, h).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let scans = 400_000;
    let mut counts = [[0usize; 5]; 5];
    for _ in 0..scans {
        chain.scan(&mut rng).unwrap();
        counts[chain.indices()[0]][chain.indices()[1]] += 1;
    }
    let mut tv = 0.0;
    for i in 0..5 {
        for j in 0..5 {
            tv += (exact[i][j] / total - counts[i][j] as f64 / scans as f64).abs();
        }
    }
    tv /= 2.0;
    outcome(tv < 0.02, format!("total variation {tv:.4} over 25 components"))
}

fn max_rel_row(a: &Draws, b: &Draws) -> f64 {
    (0..a.rows())
        .map(|t| {
            let scale = b.row(t).iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
            a.row(t).iter().zip(b.row(t)).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
        })
        .fold(0.0, f64::max)
}

fn criterion_6() -> Outcome {
    let worst = Cell::new(0.0f64);
    let identity = runner(100).run(
        &(1usize..4, 4usize..40, any::<u64>()),
        |(d, t, seed)| {
            let t = t.max(d + 2);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let data: Vec<f64> = (0..t * d).map(|_| 3.0 * Distribution::<f64>::sample(&StandardNormal, &mut rng) + 1.0).collect();
            let s = vec![shard(1, Draws::new(t, d, data).unwrap())];
            let w = shard_weights(&s).unwrap();
            let out = combine_consensus(&s, &w).unwrap();
            let err = max_rel_row(&out.draws, &s[0].draws);
            worst.set(worst.get().max(err));
            prop_assert!(err <= 1e-10, "M=1 identity off by {}", err);
            Ok(())
        },
    );
    let worst_eq = Cell::new(0.0f64);
    let equal = runner(100).run(
        &(1usize..4, 2usize..8, 2usize..30, any::<u64>()),
        |(d, m, t, seed)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let subs: Vec<_> = (1..=m)
                .map(|id| {
                    let data = (0..t * d).map(|_| StandardNormal.sample(&mut rng)).collect();
                    shard(id, Draws::new(t, d, data).unwrap())
                })
                .collect();
            let b = DMatrix::<f64>::from_fn(d, d, |_, _| StandardNormal.sample(&mut rng));
            let w = &b * b.transpose() + DMatrix::identity(d, d);
            let weights = WeightMatrix::new(vec![w; m]).unwrap();
            let cons = combine_consensus(&subs, &weights).unwrap();
            let avg = combine_average(&subs).unwrap();
            let err = max_rel_row(&cons.draws, &avg.draws);
            worst_eq.set(worst_eq.get().max(err));
            prop_assert!(err <= 1e-10, "equal weights off by {}", err);
            Ok(())
        },
    );
    let pass = identity.is_ok() && equal.is_ok();
    let mut detail = format!("100 cases each; worst relative error {:.1e} (M=1), {:.1e} (equal weights)", worst.get(), worst_eq.get());
    if let Err(e) = identity {
        detail.push_str(&format!("; {e}"));
    }
    if let Err(e) = equal {
        detail.push_str(&format!("; {e}"));
    }
    outcome(pass, detail)
}

fn criterion_7() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;

    let simpson = runner(100).run(
        &(proptest::collection::vec(-10.0f64..10.0, 4), -5.0f64..5.0, 0.1f64..5.0, 1usize..50),
        |(c, a, w, half)| {
            let b = a + w;
            let grid = Grid::new(a, b, 2 * half, 2).unwrap();
            let f = |x: f64| c[0] + c[1] * x + c[2] * x * x + c[3] * x * x * x;
            let anti = |x: f64| c[0] * x + c[1] * x * x / 2.0 + c[2] * x.powi(3) / 3.0 + c[3] * x.powi(4) / 4.0;
            let values: Vec<f64> = grid.points().map(f).collect();
            let got = newton_cotes_sum(&grid, &values).unwrap();
            let exact = anti(b) - anti(a);
            // Relative to the integral of |f| bound, so near-cancelling cubics are fair.
            let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs())) * w;
            prop_assert!((got - exact).abs() <= 1e-12 * scale.max(exact.abs()), "{} vs {}", got, exact);
            Ok(())
        },
    );
    notes.push(format!("Simpson cubic {}", if simpson.is_ok() { "ok" } else { "FAILED" }));
    pass &= simpson.is_ok();

    let lagrange = runner(100).run(
        &(proptest::collection::vec(-10.0f64..10.0, 3), -5.0f64..5.0, 0.1f64..5.0, 1usize..50, 0.0f64..1.0),
        |(c, a, w, half, u)| {
            let grid = Grid::new(a, a + w, 2 * half, 2).unwrap();
            let f = |x: f64| c[0] + c[1] * x + c[2] * x * x;
            let poly = PiecewisePolynomial::new(grid.clone(), grid.points().map(f).collect());
            let x = a + u * w;
            let scale = grid.points().map(|x| f(x).abs()).fold(1.0f64, f64::max);
            prop_assert!((poly.eval(x) - f(x)).abs() <= 1e-12 * scale);
            Ok(())
        },
    );
    notes.push(format!("quadratic Lagrange {}", if lagrange.is_ok() { "ok" } else { "FAILED" }));
    pass &= lagrange.is_ok();

    let normalize = runner(100).run(
        &(proptest::collection::vec(0.0f64..1e3, 3..200), 1usize..4),
        |(raw, k)| {
            prop_assume!(raw.iter().any(|&v| v > 0.0));
            let n = (raw.len() - 1) / k * k;
            prop_assume!(n > 0);
            let grid = Grid::new(-1.0, 2.0, n, k).unwrap();
            let d = GriddedDensity::new(grid, raw[..=n].to_vec()).unwrap().normalize().unwrap();
            let mass = d.integrate().unwrap();
            prop_assert!((mass - 1.0).abs() <= 1e-8, "mass {}", mass);
            Ok(())
        },
    );
    notes.push(format!("normalization {}", if normalize.is_ok() { "ok" } else { "FAILED" }));
    pass &= normalize.is_ok();

    let worst_ks = Cell::new(0.0f64);
    let ks = runner(20).run(
        &(0.5f64..6.0, 0.5f64..6.0, any::<u64>()),
        |(p, q, seed)| {
            let grid = Grid::new(0.0, 1.0, 2000, 2).unwrap();
            let d = GriddedDensity::from_fn(grid.clone(), |x| {
                let v = x.powf(p - 1.0) * (1.0 - x).powf(q - 1.0);
                if v.is_finite() { v } else { 0.0 }
            })
            .unwrap()
            .normalize()
            .unwrap();
            let cdf = Cdf::new(&d).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut xs = inverse_cdf_sample(&d, 100_000, &mut rng).unwrap();
            xs.sort_by(f64::total_cmp);
            let n = xs.len() as f64;
            let f = |x: f64| {
                let i = (((x - grid.lower()) / grid.spacing()).floor() as usize).min(grid.intervals() - 1);
                let t = (x - grid.point(i)) / grid.spacing();
                cdf.values()[i] + t * (cdf.values()[i + 1] - cdf.values()[i])
            };
            let stat = xs
                .iter()
                .enumerate()
                .map(|(i, &x)| {
                    let fx = f(x);
                    (fx - i as f64 / n).abs().max(((i + 1) as f64 / n - fx).abs())
                })
                .fold(0.0, f64::max);
            worst_ks.set(worst_ks.get().max(stat));
            prop_assert!(stat < 0.01, "KS {}", stat);
            Ok(())
        },
    );
    notes.push(format!("inverse-CDF KS max {:.4} at S=100000", worst_ks.get()));
    pass &= ks.is_ok();
    outcome(pass, notes.join("; "))
}

fn criterion_8(full: &FullScale) -> Outcome {
    match full.skew {
        Some((full_skew, direct, average)) => {
            let sign_ok = full_skew.signum() == direct.signum();
            let shrunk = average.abs() < full_skew.abs();
            outcome(
                sign_ok && shrunk,
                format!("skewness full chain {full_skew:+.4}, direct density {direct:+.4}, average draws {average:+.4}"),
            )
        }
        None => outcome(false, "binomial_M10 did not run"),
    }
}

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let config = repo_root().join("configs/desk_scale.json");
    let mut reports = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let status = Command::new(env!("CARGO_BIN_EXE_shardpost"))
            .args(["run", config.to_str().unwrap(), "--seed", "7", "--threads", "4", "--out", out.to_str().unwrap()])
            .output()
            .unwrap();
        if !status.status.success() {
            return outcome(false, format!("run {run} failed: {}", String::from_utf8_lossy(&status.stderr)));
        }
        reports.push(fs::read(out.join("report.csv")).unwrap());
    }
    let same = reports[0] == reports[1];
    outcome(same, format!("report.csv {} ({} bytes)", if same { "byte-identical" } else { "differs" }, reports[0].len()))
}

fn report(n: usize, name: &str, o: &Outcome) -> bool {
    println!("criterion {n} ({name}): {} - {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    let _ = std::io::stdout().flush();
    o.pass
}

fn main() {
    // `cargo test -- --list` and filters: this target has a single entry.
    let args: Vec<String> = std::env::args().collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let mut all = true;
    all &= report(3, "product-consistency oracle", &criterion_3());
    all &= report(4, "Gaussian-product oracle", &criterion_4());
    all &= report(5, "DPE brute-force equivalence", &criterion_5());
    all &= report(6, "consensus/average identities", &criterion_6());
    all &= report(7, "numerical substrate", &criterion_7());
    all &= report(9, "determinism", &criterion_9());
    println!("  running configs/paper_table1.json at full scale");
    let _ = std::io::stdout().flush();
    match run_full_scale() {
        Ok(full) => {
            all &= report(1, "error ordering", &criterion_1(&full));
            all &= report(2, "error magnitudes", &criterion_2(&full));
            all &= report(8, "skewness preservation", &criterion_8(&full));
        }
        Err(e) => {
            for (n, name) in [(1, "error ordering"), (2, "error magnitudes"), (8, "skewness preservation")] {
                all &= report(n, name, &outcome(false, e.clone()));
            }
        }
    }
    if !all {
        std::process::exit(1);
    }
}
