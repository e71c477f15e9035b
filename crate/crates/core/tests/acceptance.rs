//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fail.
//!
//! Runs as a plain binary (no test harness) so the criteria execute one after
//! another and wall-clock budgets are measured without competing tests.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use connbench::bench::stats::{mean, median, partial_spearman, spearman};
use connbench::bench::{
    build_cohort, records_csv, run_benchmark, threshold_sweep_on, with_pool, BenchOutput, CohortMember, ExperimentConfig,
    Threads,
};
use connbench::chordal::{pair_count, Adjacency, UnionFind};
use connbench::detect::{
    benjamini_yekutieli, bonferroni, graphical_lasso, pearson_pvalues, percolation_threshold, student_t_sf, Sidedness,
};
use connbench::estimators::{cov_to_corr, empirical_cov, ConnectivityMatrix, EstimatorKind};
use connbench::gauss::{sample_mvn, Mode, Rng};
use connbench::metrics::rank_auc;
use connbench::psdgen::DEFAULT_EPSILON;
use connbench::symlin::{eigenvalues, inverse_spd, SymMatrix};
use statrs::function::gamma::ln_gamma;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn minutes(d: Duration) -> String {
    format!("{:.1} min", d.as_secs_f64() / 60.0)
}

// ---------------------------------------------------------------- criterion 1

fn generation_contract() -> Outcome {
    let cfg = ExperimentConfig::from_json(r#"{"p": 51, "cohort_size": 100, "grid_step": 0.05, "master_seed": 11}"#).unwrap();
    let started = Instant::now();
    let cohort = with_pool(&cfg, || build_cohort(&cfg)).unwrap().map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();

    let mut worst = [0.0f64; 4];
    let mut bad = 0;
    for m in &cohort {
        let (p, s) = (51, &m.matrix);
        let mut off = 0.0f64;
        let mut diag = 0.0f64;
        let mut sum = 0.0;
        for i in 0..p {
            diag = diag.max((s.get(i, i) - 1.0).abs());
            for j in 0..p {
                if i == j {
                    continue;
                }
                if m.support.has_edge(i, j) {
                    sum += s.get(i, j);
                } else {
                    off = off.max(s.get(i, j).abs());
                }
            }
        }
        let mean_gap = (m.b_nominal - sum / (2.0 * m.support.n_edges() as f64)).max(0.0);
        let eig_gap = (DEFAULT_EPSILON - eigenvalues(s)[0]).max(0.0);
        worst = [worst[0].max(off), worst[1].max(eig_gap), worst[2].max(mean_gap), worst[3].max(diag)];
        bad += usize::from(off > 1e-8 || eig_gap > 1e-9 || mean_gap > 1e-6 || diag > 1e-9);
    }
    let deciles: std::collections::BTreeSet<usize> = cohort.iter().map(|m| ((m.d * 10.0) as usize).min(9)).collect();
    let detail = format!(
        "{} matrices in {}, {} violations; worst off-support {:.1e}, eigen gap {:.1e}, mean gap {:.1e}, diagonal {:.1e}; {} d-deciles, min b {}",
        cohort.len(),
        minutes(elapsed),
        bad,
        worst[0],
        worst[1],
        worst[2],
        worst[3],
        deciles.len(),
        cohort.iter().map(|m| m.b_nominal).fold(1.0, f64::min)
    );
    check(
        cohort.len() == 100 && bad == 0 && elapsed <= Duration::from_secs(600) && deciles.len() >= 5 && cohort.iter().all(|m| m.b_nominal > 0.2),
        detail,
    )
}

// ------------------------------------------------------- shared desk-scale run

struct Desk {
    cfg: ExperimentConfig,
    out: BenchOutput,
    elapsed: Duration,
}

fn desk_config(threads: Threads) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::from_json(
        r#"{"p": 30, "cohort_size": 60, "grid_step": 0.05, "T_list": [100, 1000], "replicates": 5, "master_seed": 2024}"#,
    )
    .unwrap();
    cfg.threads = threads;
    cfg
}

fn desk_run(threads: Threads) -> Desk {
    let cfg = desk_config(threads);
    let started = Instant::now();
    let out = run_benchmark(&cfg).expect("desk benchmark");
    Desk { cfg, out, elapsed: started.elapsed() }
}

/// Per-matrix mean of `metric` over replicates, for one (T, estimator, method).
fn per_matrix(desk: &Desk, t: usize, estimator: &str, method: &str, metric: impl Fn(&connbench::bench::RunRecord) -> Option<f64>) -> BTreeMap<usize, f64> {
    let mut acc: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in desk.out.records.iter().filter(|r| r.t == t && r.estimator == estimator && r.method == method) {
        if let Some(v) = metric(r) {
            acc.entry(r.matrix_id).or_default().push(v);
        }
    }
    acc.into_iter().map(|(k, v)| (k, mean(&v))).collect()
}

fn member(desk: &Desk, id: usize) -> &CohortMember {
    &desk.out.cohort[id]
}

// ---------------------------------------------------------------- criterion 2

fn sweep_endpoints(desk: &Desk) -> Outcome {
    let mut cfg = desk.cfg.clone();
    cfg.t_list = vec![100, 500, 1000];
    let rows = threshold_sweep_on(&cfg, &desk.out.cohort, &[0.0, 1.0]).map_err(|e| e.to_string())?;
    let m = pair_count(cfg.p);
    let mut bad = 0;
    for r in &rows {
        let edges = member(desk, r.matrix_id).support.n_edges();
        let want = if r.tau == 0.0 { edges } else { m - edges };
        let exact = r.confusion.tp + r.confusion.tn == want && r.accuracy == want as f64 / m as f64;
        let matches_d = if r.tau == 0.0 { r.accuracy == r.d } else { r.accuracy == (m - edges) as f64 / m as f64 };
        bad += usize::from(!(exact && matches_d));
    }
    check(bad == 0 && rows.len() == 2 * 3 * desk.out.cohort.len(), format!("{} rows, {} mismatches", rows.len(), bad))
}

// ---------------------------------------------------------------- criterion 3

fn pair_count_auc(scores: &[f64], positive: &[bool]) -> f64 {
    let mut won = 0.0;
    let mut pairs = 0.0;
    for (&si, _) in scores.iter().zip(positive).filter(|(_, &pos)| pos) {
        for (&sj, _) in scores.iter().zip(positive).filter(|(_, &pos)| !pos) {
            pairs += 1.0;
            won += if si > sj { 1.0 } else if si == sj { 0.5 } else { 0.0 };
        }
    }
    won / pairs
}

fn connected(p: usize, edges: &[(usize, usize)]) -> bool {
    let mut uf = UnionFind::new(p);
    for &(i, j) in edges {
        uf.union(i, j);
    }
    uf.count() == 1
}

/// Largest candidate threshold whose graph `{|c| ≥ τ}` spans one component.
fn brute_force_percolation(c: &SymMatrix) -> (f64, Vec<(usize, usize)>) {
    let p = c.p();
    let mut levels: Vec<f64> = c.upper_entries().map(|(_, _, v)| v.abs()).collect();
    levels.sort_by(|a, b| b.total_cmp(a));
    levels.dedup();
    for tau in levels {
        let edges: Vec<(usize, usize)> = c.upper_entries().filter(|e| e.2.abs() >= tau).map(|(i, j, _)| (i, j)).collect();
        if connected(p, &edges) {
            return (tau, edges);
        }
    }
    unreachable!("the complete graph is connected")
}

/// Adaptive Simpson on `[a, b]`.
fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// `P(T > t)` by integrating the t density over `[t, ∞)` (mapped to `[0, 1)`).
fn t_tail_by_quadrature(t: f64, nu: f64) -> f64 {
    let log_norm = ln_gamma((nu + 1.0) / 2.0) - ln_gamma(nu / 2.0) - 0.5 * (nu * std::f64::consts::PI).ln();
    let density = move |x: f64| (log_norm - (nu + 1.0) / 2.0 * (1.0 + x * x / nu).ln()).exp();
    let mapped = move |u: f64| {
        if u >= 1.0 {
            return 0.0;
        }
        let x = t + u / (1.0 - u);
        density(x) / ((1.0 - u) * (1.0 - u))
    };
    // split so the peak near u = 0 is resolved
    let cuts = [0.0, 0.05, 0.2, 0.5, 0.8, 0.95, 0.99, 1.0];
    cuts.windows(2).map(|w| simpson(&mapped, w[0], w[1], 1e-14)).sum()
}

fn oracles() -> Outcome {
    let mut rng = Rng::new(3);
    let mut notes = Vec::new();

    // AUC: rank formula vs exhaustive pair counting, ties included
    let mut auc_gap = 0.0f64;
    let mut n = 0;
    while n < 1000 {
        let m = 2 + rng.below(49);
        let positive: Vec<bool> = (0..m).map(|_| rng.uniform() < 0.4).collect();
        if positive.iter().all(|&b| b) || positive.iter().all(|&b| !b) {
            continue;
        }
        let levels = 1 + rng.below(20);
        let scores: Vec<f64> = (0..m).map(|_| rng.below(levels) as f64 / levels as f64).collect();
        auc_gap = auc_gap.max((rank_auc(&scores, &positive).unwrap() - pair_count_auc(&scores, &positive)).abs());
        n += 1;
    }
    notes.push(format!("AUC gap {auc_gap:.1e}"));

    // percolation vs brute-force scan
    let mut perc_bad = 0;
    for k in 0..200u64 {
        let p = 2 + (k % 11) as usize;
        let mut r = Rng::new(1000 + k);
        let c = SymMatrix::from_upper_fn(p, |i, j| if i == j { 1.0 } else { (r.uniform_range(-1.0, 1.0) * 50.0).round() / 50.0 });
        let out = percolation_threshold(&ConnectivityMatrix::new(c.clone(), EstimatorKind::EmpiricalCorr));
        let (tau, edges) = brute_force_percolation(&c);
        let want = Adjacency::from_edges(p, &edges).unwrap();
        perc_bad += usize::from(out.chosen_threshold != Some(tau) || out.adjacency != want);
    }
    notes.push(format!("percolation mismatches {perc_bad}/200"));

    // glasso p = 2 closed form
    let mut g2_gap = 0.0f64;
    for _ in 0..200 {
        let s12 = rng.uniform_range(-0.95, 0.95);
        let lambda = rng.uniform_range(0.0, 1.0);
        let s = SymMatrix::from_rows(&[vec![1.0, s12], vec![s12, 1.0]]).unwrap();
        let fit = graphical_lasso(&s, lambda, 1e-10, 1000).map_err(|e| e.to_string())?;
        let w = s12.signum() * (s12.abs() - lambda).max(0.0);
        g2_gap = g2_gap.max((fit.covariance.get(0, 1) - w).abs());
        let theta_zero = fit.precision.get(0, 1).abs() <= 1e-8;
        if theta_zero != (s12.abs() <= lambda) {
            g2_gap = f64::INFINITY;
        }
    }
    notes.push(format!("glasso p=2 gap {g2_gap:.1e}"));

    // glasso λ = 0 vs inverse
    let mut inv_gap = 0.0f64;
    for k in 0..30u64 {
        let p = 2 + (k % 9) as usize;
        let x = sample_mvn(&SymMatrix::identity(p), 4 * p + 20, 500 + k, Mode::Covariance).unwrap();
        let s = empirical_cov(&x);
        let fit = graphical_lasso(&s, 0.0, 1e-8, 2000).map_err(|e| e.to_string())?;
        inv_gap = inv_gap.max(fit.precision.max_abs_diff(&inverse_spd(&s).unwrap()));
    }
    notes.push(format!("glasso λ=0 gap {inv_gap:.1e}"));

    // Student-t tails
    let mut t_gap = 0.0f64;
    for nu in [5.0, 98.0, 998.0] {
        for t in [-3.0, -0.5, 0.0, 0.3, 1.0, 1.96, 2.5, 4.0, 5.7155, 8.0, 12.0] {
            t_gap = t_gap.max((student_t_sf(t, nu) - t_tail_by_quadrature(t, nu)).abs());
        }
    }
    notes.push(format!("t tail gap {t_gap:.1e}"));

    check(auc_gap <= 1e-12 && perc_bad == 0 && g2_gap <= 1e-6 && inv_gap <= 1e-5 && t_gap <= 1e-8, notes.join(", "))
}

// ---------------------------------------------------------------- criterion 4

fn error_control() -> Outcome {
    let started = Instant::now();
    let (p, t, reps, alpha) = (20, 100, 1000, 0.05);
    let sigma = SymMatrix::identity(p);
    let mut any_bonf = 0;
    let mut fdp_sum = 0.0;
    for rep in 0..reps {
        let x = sample_mvn(&sigma, t, 90_000 + rep as u64, Mode::Covariance).unwrap();
        let r = cov_to_corr(&empirical_cov(&x)).unwrap();
        let pv = pearson_pvalues(&r, t, 0, Sidedness::TwoSided).unwrap();
        any_bonf += usize::from(bonferroni(&pv, alpha).adjacency.n_edges() > 0);
        // every discovery is false under the null
        fdp_sum += if benjamini_yekutieli(&pv, alpha).adjacency.n_edges() > 0 { 1.0 } else { 0.0 };
    }
    let bound = alpha + 3.0 * (alpha * (1.0 - alpha) / reps as f64).sqrt();
    let fwer = any_bonf as f64 / reps as f64;
    let fdr = fdp_sum / reps as f64;
    let elapsed = started.elapsed();
    check(
        fwer <= bound && fdr <= bound && elapsed <= Duration::from_secs(120),
        format!("FWER {fwer:.3}, FDR {fdr:.3} (bound {bound:.4}) in {:.1} s", elapsed.as_secs_f64()),
    )
}

// ---------------------------------------------------------------- criterion 5

fn auc_trend(desk: &Desk) -> Outcome {
    let auc = |r: &connbench::bench::RunRecord| r.auc;
    let emp = per_matrix(desk, 100, "empirical_corr", "bonferroni", auc);
    let lw = per_matrix(desk, 100, "lw_pcorr", "bonferroni", auc);
    let b: Vec<f64> = emp.keys().map(|&k| member(desk, k).b).collect();
    let floor: Vec<f64> = emp.keys().map(|&k| member(desk, k).b_nominal).collect();
    let a: Vec<f64> = emp.values().copied().collect();
    let rho = spearman(&b, &a);
    let dense: Vec<usize> = emp.keys().copied().filter(|&k| member(desk, k).d > 0.4).collect();
    let diff = mean(&dense.iter().map(|k| lw[k]).collect::<Vec<_>>()) - mean(&dense.iter().map(|k| emp[k]).collect::<Vec<_>>());
    check(
        rho >= 0.6 && diff < 0.0 && !dense.is_empty() && desk.elapsed <= Duration::from_secs(900),
        format!(
            "Spearman(b, AUC) = {rho:.3} over {} matrices (requested floor instead of b: {:.3}); AUC(lw_pcorr) − AUC(empirical_corr) = {diff:.4} over {} cells with d > 0.4; desk run {}",
            a.len(),
            spearman(&floor, &a),
            dense.len(),
            minutes(desk.elapsed)
        ),
    )
}

// ---------------------------------------------------------------- criterion 6

fn method_sensitivity(desk: &Desk) -> Outcome {
    let tpr = per_matrix(desk, 100, "empirical_corr", "bonferroni", |r| r.tpr());
    let acc = per_matrix(desk, 100, "empirical_corr", "percolation", |r| r.accuracy());
    let ids: Vec<usize> = tpr.keys().copied().filter(|k| acc.contains_key(k)).collect();
    let b: Vec<f64> = ids.iter().map(|&k| member(desk, k).b).collect();
    let d: Vec<f64> = ids.iter().map(|&k| member(desk, k).d).collect();
    let t: Vec<f64> = ids.iter().map(|k| tpr[k]).collect();
    let a: Vec<f64> = ids.iter().map(|k| acc[k]).collect();
    let (tb, td, ad) = (partial_spearman(&t, &b, &d), partial_spearman(&t, &d, &b), partial_spearman(&a, &d, &b));
    check(
        tb >= 0.5 && td.abs() <= 0.3 && ad.abs() >= 0.5,
        format!("Bonferroni TPR ~ b | d: {tb:.3}, ~ d | b: {td:.3}; percolation accuracy ~ d | b: {ad:.3}"),
    )
}

// ---------------------------------------------------------------- criterion 7

fn sample_size_gain(desk: &Desk) -> Outcome {
    let med = |t: usize, method: &str| median(&per_matrix(desk, t, "empirical_corr", method, |r| r.accuracy()).into_values().collect::<Vec<_>>());
    let gain = |method: &str| (med(100, method), med(1000, method));
    let (b0, b1) = gain("bonferroni");
    let (g0, g1) = gain("glasso_cv");
    let (p0, p1) = gain("percolation");
    let (db, dg, dp) = (b1 - b0, g1 - g0, p1 - p0);
    check(
        db > 0.0 && dg > 0.0 && dp < 0.5 * db,
        format!(
            "median accuracy T=100 → 1000: Bonferroni {b0:.4} → {b1:.4} ({db:+.4}), glasso_cv {g0:.4} → {g1:.4} ({dg:+.4}), percolation {p0:.4} → {p1:.4} ({dp:+.4})"
        ),
    )
}

// ---------------------------------------------------------------- criterion 8

fn without_runtime(csv: &str) -> String {
    csv.lines()
        .map(|l| {
            let mut f: Vec<&str> = l.split(',').collect();
            f.remove(18);
            f.join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn determinism(desk: &Desk) -> Outcome {
    let single = desk_run(Threads::Count(1));
    let a = without_runtime(&records_csv(&desk.out.records));
    let b = without_runtime(&records_csv(&single.out.records));
    let threads = desk.cfg.threads.pool_size();
    check(
        a == b && desk.out.cohort == single.out.cohort,
        format!("{} rows compared, {} vs 1 worker threads, {}", desk.out.records.len(), threads, if a == b { "identical" } else { "differ" }),
    )
}

fn main() -> ExitCode {
    let mut failed = 0;
    let mut report = |n: usize, name: &str, outcome: Outcome| {
        match &outcome {
            Ok(detail) => println!("PASS criterion {n} ({name}): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {n} ({name}): {detail}")
            }
        }
    };

    report(1, "generation contract", generation_contract());
    let desk = desk_run(Threads::Count(4));
    report(2, "sweep endpoints", sweep_endpoints(&desk));
    report(3, "oracle equivalences", oracles());
    report(4, "error control", error_control());
    report(5, "AUC trends", auc_trend(&desk));
    report(6, "method sensitivity", method_sensitivity(&desk));
    report(7, "sample size", sample_size_gain(&desk));
    report(8, "determinism", determinism(&desk));

    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
