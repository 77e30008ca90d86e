//! Acceptance checks, one line per criterion. Runs as a plain binary so the
//! verdicts are always printed, and exits non-zero if any check fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use fruler_core::discretize::discretize_variable;
use fruler_core::fuzzy::{apply_displacement, build_partition, FuzzyPartition};
use fruler_core::selection::{build_ccnn_graphs, score};
use fruler_core::synthetic::friedman1;
use fruler_core::{
    crossval, loo_1nn_mse, select_instances, sgd_elastic_net, wang_mendel_antecedents, DataBase, Dataset,
    DensityLabels, Matrix, SgdConfig, TrainConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn normal(r: &mut ChaCha8Rng) -> f64 {
    r.sample(StandardNormal)
}

fn dataset(x: Vec<Vec<f64>>, y: Vec<f64>) -> Dataset {
    let names: Vec<String> = (0..x[0].len()).map(|j| format!("x{j}")).collect();
    let names: Vec<&str> = names.iter().map(String::as_str).collect();
    Dataset::from_examples("acceptance", &names, "y", x, y).unwrap()
}

fn strong_partitions() -> Verdict {
    let mut r = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let g = r.random_range(1..=9);
        let lo = r.random_range(-100.0..100.0);
        let mut splits = vec![lo];
        for _ in 0..g {
            let last = *splits.last().unwrap();
            splits.push(last + r.random_range(0.01..10.0));
        }
        let alphas: Vec<f64> = (0..g - 1).map(|_| r.random_range(-0.499..0.499)).collect();
        let fuzziness = if r.random_bool(0.5) { 1.0 } else { r.random_range(0.0..=1.0) };
        let displaced = apply_displacement(&splits, &alphas).unwrap();
        let p = if g == 1 {
            FuzzyPartition::single(splits[0], splits[1], fuzziness).unwrap()
        } else {
            build_partition(&displaced.splits, fuzziness).unwrap()
        };
        let (a, b) = (splits[0], splits[g]);
        for k in 0..1000 {
            let x = if k < 10 { displaced.splits[k.min(g)] } else { r.random_range(a..=b) };
            let total: f64 = (0..p.granularity()).map(|j| p.membership(j, x).unwrap()).sum();
            worst = worst.max((total - 1.0).abs());
        }
    }
    verdict(worst <= 1e-9, format!("max |sum - 1| = {worst:.3e} (tolerance 1e-9)"))
}

/// Solves `A z = b` for a small dense system by Gaussian elimination with
/// partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut z = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * z[k]).sum();
        z[i] = (b[i] - s) / a[i][i];
    }
    z
}

fn ols(rows: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let p = rows[0].len();
    let mut xtx = vec![vec![0.0; p]; p];
    let mut xty = vec![0.0; p];
    for (row, &t) in rows.iter().zip(y) {
        for i in 0..p {
            xty[i] += row[i] * t;
            for j in 0..p {
                xtx[i][j] += row[i] * row[j];
            }
        }
    }
    solve(xtx, xty)
}

fn sgd_matches_ols() -> Verdict {
    let mut r = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for problem in 0..20 {
        let truth: Vec<f64> = (0..3)
            .map(|_| r.random_range(1.0..3.0) * if r.random_bool(0.5) { 1.0 } else { -1.0 })
            .collect();
        let rows: Vec<Vec<f64>> = (0..50).map(|_| (0..3).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
        let y: Vec<f64> = rows
            .iter()
            .map(|row| row.iter().zip(&truth).map(|(a, b)| a * b).sum::<f64>() + 0.1 * normal(&mut r))
            .collect();
        let oracle = ols(&rows, &y);
        let cfg = SgdConfig {
            lambda: 1e-10,
            alpha: 0.95,
            eta0: 0.01,
            seed: problem,
        };
        let fit = sgd_elastic_net(&Matrix::from_rows(&rows), &y, &cfg).unwrap();
        for (b, o) in fit.beta.iter().zip(&oracle) {
            worst = worst.max(((b - o) / o).abs());
        }
    }
    verdict(worst <= 0.05, format!("max relative deviation from least squares = {:.4} (tolerance 0.05)", worst))
}

fn elastic_net_sparsity() -> Verdict {
    let mut r = ChaCha8Rng::seed_from_u64(3);
    let rows: Vec<Vec<f64>> = (0..200).map(|_| (0..8).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
    let y: Vec<f64> = rows.iter().map(|x| 3.0 * x[0] - 2.0 * x[1] + 0.1 * normal(&mut r)).collect();
    let x = Matrix::from_rows(&rows);
    let fit = |lambda: f64| {
        sgd_elastic_net(
            &x,
            &y,
            &SgdConfig {
                lambda,
                alpha: 0.95,
                eta0: 0.01,
                seed: 3,
            },
        )
        .unwrap()
        .beta
    };
    let zeros = |b: &[f64]| b.iter().filter(|v| **v == 0.0).count();
    let (strong, weak, mid) = (fit(1.0), fit(1e-10), fit(1e-3));
    let survive = mid[0] != 0.0 && mid[1] != 0.0;
    verdict(
        zeros(&strong) > zeros(&weak) && survive,
        format!(
            "zeros at lambda=1: {}, at lambda=1e-10: {}; relevant at lambda=1e-3: ({:.3}, {:.3})",
            zeros(&strong),
            zeros(&weak),
            mid[0],
            mid[1]
        ),
    )
}

fn breakpoint_recovery() -> Verdict {
    let mut r = ChaCha8Rng::seed_from_u64(4);
    let x: Vec<f64> = (0..600).map(|_| r.random_range(-1.0..1.0)).collect();
    let y: Vec<f64> = x.iter().map(|v| v.abs() + 0.05 * normal(&mut r)).collect();
    let ladder = discretize_variable(&x, &y);
    let first = if ladder.splits_per_granularity.len() > 1 {
        ladder.splits(2)[1]
    } else {
        f64::NAN
    };
    let chosen = ladder.bic_trace[ladder.chosen_max - 1];
    let minimal = ladder.bic_trace.iter().all(|&b| chosen <= b);
    verdict(
        first.abs() <= 0.05 && ladder.chosen_max >= 2 && minimal,
        format!(
            "first split {first:.4} (within 0.05 of 0), chosen granularity {}, chosen BIC minimal: {minimal}",
            ladder.chosen_max
        ),
    )
}

/// Leave-one-out 1NN MSE by exhaustive search over min-max scaled inputs.
fn loo_oracle(d: &Dataset) -> f64 {
    let (n, p) = (d.n(), d.p());
    let mut scaled = vec![vec![0.0; p]; n];
    for j in 0..p {
        let lo = d.x.iter().map(|r| r[j]).fold(f64::INFINITY, f64::min);
        let hi = d.x.iter().map(|r| r[j]).fold(f64::NEG_INFINITY, f64::max);
        for i in 0..n {
            scaled[i][j] = if hi > lo { (d.x[i][j] - lo) / (hi - lo) } else { 0.0 };
        }
    }
    let mut total = 0.0;
    for i in 0..n {
        let mut best = f64::INFINITY;
        let mut nn = usize::MAX;
        for k in 0..n {
            if k == i {
                continue;
            }
            let mut dist = 0.0;
            for j in 0..p {
                dist += (scaled[i][j] - scaled[k][j]) * (scaled[i][j] - scaled[k][j]);
            }
            if dist < best {
                best = dist;
                nn = k;
            }
        }
        total += (d.y[nn] - d.y[i]) * (d.y[nn] - d.y[i]);
    }
    total / n as f64
}

fn loo_equivalence() -> Verdict {
    let mut r = ChaCha8Rng::seed_from_u64(5);
    let mut mismatches = 0;
    for _ in 0..50 {
        let n = r.random_range(2..=500);
        let p = r.random_range(1..=6);
        let grid = r.random_bool(0.3);
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..p)
                    .map(|_| if grid { r.random_range(0..5) as f64 } else { r.random_range(-10.0..10.0) })
                    .collect()
            })
            .collect();
        let y: Vec<f64> = (0..n).map(|_| normal(&mut r)).collect();
        let d = dataset(x, y);
        let all: Vec<usize> = (0..n).collect();
        let got = loo_1nn_mse(&all, &all, &d).unwrap();
        if got.to_bits() != loo_oracle(&d).to_bits() {
            mismatches += 1;
        }
    }
    verdict(mismatches == 0, format!("{mismatches} of 50 datasets differ from the exhaustive oracle"))
}

fn selection_on_friedman() -> Verdict {
    let d = friedman1(1200, 1.0, 6);
    let s = select_instances(&d).unwrap();
    let ok = (64.5..=94.5).contains(&s.reduction_pct) && (0.5..=3.0).contains(&s.error_increase);
    verdict(
        ok,
        format!(
            "reduction {:.2}% (band 79.5 +/- 15), error increase {:.3}x (band 0.5-3.0)",
            s.reduction_pct, s.error_increase
        ),
    )
}

fn desk_config(seed: u64) -> TrainConfig {
    let mut cfg = TrainConfig::default().with_seed(seed);
    cfg.evolution.budget = 5000;
    cfg
}

fn end_to_end(models: &mut Vec<String>) -> Verdict {
    let d = friedman1(1200, 1.0, 7);
    let out = crossval(&d, 5, 1, &desk_config(7)).unwrap();
    *models = out.models.iter().map(|m| m.to_json().unwrap()).collect();
    let s = &out.summary;
    let max_evals = out.folds.iter().map(|f| f.run.evaluations).max().unwrap();
    verdict(
        s.test_mse <= 2.0 && s.n_rules <= 20.0 && max_evals <= 5000,
        format!(
            "mean test MSE {:.4} (half form, bar 2.0; plain {:.4}), mean rules {:.1} (bar 20), max evaluations {}",
            s.test_mse, s.test_mse_plain, s.n_rules, max_evals
        ),
    )
}

fn determinism(first: &[String]) -> Verdict {
    let d = friedman1(1200, 1.0, 7);
    let again: Vec<String> = crossval(&d, 5, 1, &desk_config(7))
        .unwrap()
        .models
        .iter()
        .map(|m| m.to_json().unwrap())
        .collect();
    let same = !first.is_empty() && first == again.as_slice();
    verdict(same, format!("{} model files compared byte for byte", again.len()))
}

/// K-divergence score computed from explicitly built nearest-neighbour
/// graphs.
fn score_oracle(x: &[Vec<f64>], labels: &[usize], i: usize) -> f64 {
    let n = x.len();
    let p = x[0].len();
    let lo: Vec<f64> = (0..p).map(|j| x.iter().map(|r| r[j]).fold(f64::INFINITY, f64::min)).collect();
    let hi: Vec<f64> = (0..p).map(|j| x.iter().map(|r| r[j]).fold(f64::NEG_INFINITY, f64::max)).collect();
    let z = |a: usize, j: usize| if hi[j] > lo[j] { (x[a][j] - lo[j]) / (hi[j] - lo[j]) } else { 0.0 };
    let dist = |a: usize, b: usize| (0..p).map(|j| (z(a, j) - z(b, j)).powi(2)).sum::<f64>();
    let mut within = vec![0usize; n];
    let mut between = vec![0usize; n];
    for a in 0..n {
        for (same, counts) in [(true, &mut within), (false, &mut between)] {
            let target = (0..n)
                .filter(|&b| b != a && (labels[b] == labels[a]) == same)
                .min_by(|&b, &c| dist(a, b).total_cmp(&dist(a, c)).then(b.cmp(&c)));
            if let Some(t) = target {
                counts[t] += 1;
            }
        }
    }
    let tw: usize = within.iter().sum();
    let tb: usize = between.iter().sum();
    let pw = if tw > 0 { within[i] as f64 / tw as f64 } else { 0.0 };
    let pb = if tb > 0 { between[i] as f64 / tb as f64 } else { 0.0 };
    if pw + pb == 0.0 {
        return 0.0;
    }
    let m = (pw + pb) / 2.0;
    let a = if pw > 0.0 { pw * (pw / m).ln() } else { 0.0 };
    let b = if pb > 0.0 { pb * (pb / m).ln() } else { 0.0 };
    a - b
}

fn score_oracle_check() -> Verdict {
    let mut r = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0f64;
    let mut equal_cases = 0;
    let mut equal_nonzero = 0;
    for _ in 0..100 {
        let x: Vec<Vec<f64>> = (0..30).map(|_| vec![r.random(), r.random()]).collect();
        let c = r.random_range(2..=4);
        let labels: Vec<usize> = (0..30).map(|_| r.random_range(0..c)).collect();
        let d = dataset(x.clone(), labels.iter().map(|&l| l as f64).collect());
        let dl = DensityLabels {
            split_values: (0..c - 1).map(|k| k as f64 + 0.5).collect(),
            labels: labels.clone(),
            c,
        };
        let all: Vec<usize> = (0..30).collect();
        let g = build_ccnn_graphs(&d, &dl, &all);
        for i in 0..30 {
            let s = score(i, &g);
            worst = worst.max((s - score_oracle(&x, &labels, i)).abs());
            let pw = g.gwc_indegree[i] as f64 / g.total_gwc.max(1) as f64;
            let pb = g.gbc_indegree[i] as f64 / g.total_gbc.max(1) as f64;
            if pw == pb {
                equal_cases += 1;
                if s != 0.0 {
                    equal_nonzero += 1;
                }
            }
        }
    }
    verdict(
        worst <= 1e-12 && equal_nonzero == 0,
        format!("max |score - oracle| = {worst:.3e} (tolerance 1e-12); {equal_nonzero} of {equal_cases} p_w = p_b cases nonzero"),
    )
}

fn wang_mendel_coverage() -> Verdict {
    let mut r = ChaCha8Rng::seed_from_u64(10);
    let mut failures = 0;
    for _ in 0..100 {
        let p = r.random_range(1..=4);
        let partitions: Vec<FuzzyPartition> = (0..p)
            .map(|_| {
                let g = r.random_range(1..=5);
                let mut splits = vec![0.0];
                for _ in 0..g {
                    splits.push(splits.last().unwrap() + r.random_range(0.05..1.0));
                }
                let alphas: Vec<f64> = (0..g - 1).map(|_| r.random_range(-0.49..0.49)).collect();
                let s = apply_displacement(&splits, &alphas).unwrap().splits;
                build_partition(&s, r.random_range(0.0..=1.0)).unwrap()
            })
            .collect();
        let db = DataBase::new(partitions);
        let n = r.random_range(1..=150);
        let xs: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                db.partitions
                    .iter()
                    .map(|part| {
                        let s = part.splits();
                        r.random_range(s[0]..=s[s.len() - 1])
                    })
                    .collect()
            })
            .collect();
        let rules = wang_mendel_antecedents(&db, &xs);
        if rules.len() > n {
            failures += 1;
            continue;
        }
        for x in &xs {
            let own: Vec<Option<usize>> = db
                .partitions
                .iter()
                .enumerate()
                .map(|(j, part)| {
                    if part.granularity() == 1 {
                        return None;
                    }
                    let mut best = 0;
                    for l in 1..part.granularity() {
                        if part.membership(l, x[j]).unwrap() > part.membership(best, x[j]).unwrap() {
                            best = l;
                        }
                    }
                    Some(best)
                })
                .collect();
            if !rules.contains(&own) {
                failures += 1;
                break;
            }
        }
    }
    verdict(failures == 0, format!("{failures} of 100 rule bases miss an example or exceed |E_S| antecedents"))
}

fn main() -> ExitCode {
    let mut models = Vec::new();
    let mut results: Vec<(usize, &str, Verdict, Duration)> = Vec::new();
    let mut run = |id: usize, name: &'static str, f: &mut dyn FnMut() -> Verdict| {
        let start = Instant::now();
        let v = f();
        let elapsed = start.elapsed();
        println!(
            "{} criterion {id:>2}: {name}: {} [{:.1}s]",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            elapsed.as_secs_f64()
        );
        results.push((id, name, v, elapsed));
    };
    run(1, "strong partitions", &mut strong_partitions);
    run(2, "SGD versus least squares", &mut sgd_matches_ols);
    run(3, "Elastic-Net sparsity", &mut elastic_net_sparsity);
    run(4, "breakpoint recovery", &mut breakpoint_recovery);
    run(5, "1NN leave-one-out oracle", &mut loo_equivalence);
    run(6, "instance selection on Friedman #1", &mut selection_on_friedman);
    run(7, "end-to-end 5-fold on Friedman #1", &mut || end_to_end(&mut models));
    run(8, "determinism", &mut || determinism(&models));
    run(9, "score oracle", &mut score_oracle_check);
    run(10, "Wang-Mendel coverage", &mut wang_mendel_coverage);
    let failed = results.iter().filter(|r| !r.2.pass).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
