//! Acceptance suite: one PASS/FAIL line per criterion, run sequentially so
//! the reported wall times are meaningful. Exits non-zero if any fails.

use std::fs;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use tempfile::TempDir;

use wcm_core::block_model::{gram, BlockStructure, Dict, EquivalentDictionary, GramParts};
use wcm_core::bomp::{bomp_decode, BompConfig};
use wcm_core::coherence::{
    bound_block, bound_sparse, decomposition_check, entry_class, mu_block, nu_sub, objective,
    total_inter, total_sub, Alpha, EntryClass,
};
use wcm_core::ds::{design_ds, ds_objective};
use wcm_core::experiment::{
    gen_dictionary, run_sweep, BlockSpec, Designer, DictFamily, ExperimentConfig,
};
use wcm_core::wcm::{
    objective_gradient, run_wcm, surrogate_g, surrogate_gradient, wcm_step, Init, WcmConfig,
};
use wcm_core::SensingMatrix;

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

fn alpha(a: f64) -> Alpha {
    Alpha::new(a).unwrap()
}

fn gaussian(rng: &mut impl Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(rng))
}

fn normalized(mut m: DMatrix<f64>) -> DMatrix<f64> {
    for mut c in m.column_iter_mut() {
        let n = c.norm();
        c /= n;
    }
    m
}

fn unit_dict(rng: &mut impl Rng, n: usize, bs: &BlockStructure) -> Dict {
    Dict::new(normalized(gaussian(rng, n, bs.total())), bs.clone()).unwrap()
}

/// Block sizes drawn from 1..=5 until they cover `total` columns.
fn mixed_blocks(rng: &mut impl Rng, total: usize) -> BlockStructure {
    let mut sizes = Vec::new();
    let mut left = total;
    while left > 0 {
        let s = rng.random_range(1..=5).min(left);
        sizes.push(s);
        left -= s;
    }
    BlockStructure::new(sizes).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

// ---------------------------------------------------------------------------

fn c1_decomposition() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let bs = mixed_blocks(&mut rng, 40);
        let d = Dict::new(gaussian(&mut rng, 20, 40), bs.clone()).unwrap();
        let m = rng.random_range(2..20);
        let a = gaussian(&mut rng, m, 20);
        let e = EquivalentDictionary::new(&a * d.matrix(), bs).unwrap();
        let (lhs, rhs) = decomposition_check(&e);
        worst = worst.max((lhs - rhs).abs() / (1.0 + lhs));
    }
    outcome(
        worst <= 1e-9,
        format!("max |lhs-rhs|/(1+lhs) = {worst:.2e} (tol 1e-9)"),
    )
}

fn c2_ds_optimality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let bs = BlockStructure::uniform(3, 40).unwrap();
    let d = Dict::new(gaussian(&mut rng, 60, 120), bs).unwrap();
    let a = design_ds(&d, 14).unwrap();
    let obj = ds_objective(&a, &d).unwrap();
    let e = a.matrix() * d.matrix();
    let resid = (&e * e.transpose() - DMatrix::<f64>::identity(14, 14)).norm();
    let obj_rel = (obj - 106.0).abs() / 106.0;
    outcome(
        obj_rel <= 1e-6 && resid <= 1e-8,
        format!(
            "objective {obj:.12} vs 106 (rel {obj_rel:.2e}, tol 1e-6); ‖ADD'A'−I‖ = {resid:.2e} (tol 1e-8)"
        ),
    )
}

/// Central differences of `h` with respect to each entry of `g`, one at a time.
fn fd_gradient(g: &GramParts, h: impl Fn(&GramParts) -> f64) -> DMatrix<f64> {
    let step = 1e-6;
    let base = g.gram();
    DMatrix::from_fn(base.nrows(), base.ncols(), |r, c| {
        let mut plus = base.clone();
        let mut minus = base.clone();
        plus[(r, c)] += step;
        minus[(r, c)] -= step;
        let p = GramParts::from_raw(plus, g.structure().clone()).unwrap();
        let m = GramParts::from_raw(minus, g.structure().clone()).unwrap();
        (h(&p) - h(&m)) / (2.0 * step)
    })
}

fn c3_surrogate_conditions() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let bs = BlockStructure::new(vec![3, 2, 4, 1, 2]).unwrap();
    let (mut touch, mut bound, mut grad) = (0.0f64, f64::INFINITY, 0.0f64);
    for i in 0..50 {
        let e = gaussian(&mut rng, 6, bs.total());
        // Odd pairs put G' close to G, where the upper bound is tight.
        let e_prev = if i % 2 == 0 {
            gaussian(&mut rng, 6, bs.total())
        } else {
            &e + gaussian(&mut rng, 6, bs.total()) * 1e-3
        };
        let g = gram(&EquivalentDictionary::new(e, bs.clone()).unwrap());
        let g_prev = gram(&EquivalentDictionary::new(e_prev, bs.clone()).unwrap());
        for a in [0.01, 0.5, 0.99].map(alpha) {
            let f = objective(&g, a);
            touch = touch.max(rel(surrogate_g(&g, &g, a).unwrap(), f));
            bound = bound.min(surrogate_g(&g, &g_prev, a).unwrap() - f);

            let analytic_f = objective_gradient(&g, a);
            let analytic_g = surrogate_gradient(&g, &g, a).unwrap();
            let fd_f = fd_gradient(&g, |x| objective(x, a));
            let fd_g = fd_gradient(&g, |x| surrogate_g(x, &g, a).unwrap());
            let scale = analytic_f.norm().max(1e-12);
            for err in [
                (&fd_f - &analytic_f).norm(),
                (&fd_g - &analytic_g).norm(),
                (&analytic_g - &analytic_f).norm(),
                (&fd_g - &fd_f).norm(),
            ] {
                grad = grad.max(err / scale);
            }
        }
    }
    outcome(
        touch <= 1e-10 && bound >= -1e-12 && grad <= 1e-5,
        format!(
            "max rel |g(G,G)−f| = {touch:.2e} (tol 1e-10); min g(G,G')−f = {bound:.3e} (≥ −1e-12); \
             max rel gradient mismatch incl. finite differences = {grad:.2e} (tol 1e-5)"
        ),
    )
}

fn c4_step_optimality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let bs = BlockStructure::new(vec![3, 3, 2, 4, 3, 5]).unwrap();
    let (n, m) = (10, 4);
    let mut worst_candidate = f64::INFINITY;
    let mut worst_prev = f64::INFINITY;
    for _ in 0..20 {
        let d = unit_dict(&mut rng, n, &bs);
        let a = alpha(rng.random_range(0.01..0.99));
        let a_prev = SensingMatrix::new(gaussian(&mut rng, m, n) / (m as f64).sqrt()).unwrap();
        let g_prev = a_prev.gram(&d).unwrap();
        let a_new = wcm_step(&a_prev, &d, a).unwrap();
        let value = surrogate_g(&a_new.gram(&d).unwrap(), &g_prev, a).unwrap();
        let prev_value = surrogate_g(&g_prev, &g_prev, a).unwrap();
        worst_prev = worst_prev.min(prev_value - value);
        // Half unstructured draws, half small perturbations of the step itself.
        for i in 0..100 {
            let cand = if i < 50 {
                gaussian(&mut rng, m, n) / (m as f64).sqrt()
            } else {
                let scale = 10f64.powi(-(i % 5) as i32 - 1) * a_new.matrix().norm();
                a_new.matrix() + gaussian(&mut rng, m, n) * (scale / ((m * n) as f64).sqrt())
            };
            let cand = SensingMatrix::new(cand).unwrap();
            let cv = surrogate_g(&cand.gram(&d).unwrap(), &g_prev, a).unwrap();
            worst_candidate = worst_candidate.min((cv - value) / value.max(1.0));
        }
    }
    outcome(
        worst_candidate >= -1e-12 && worst_prev >= -1e-12,
        format!(
            "min (g(cand)−g(step))/g = {worst_candidate:.3e}; min g(G',G')−g(step) = {worst_prev:.3e}; \
             2000 candidates"
        ),
    )
}

fn family_dict(family: DictFamily, seed: u64) -> Dict {
    let cfg = ExperimentConfig {
        dict_family: family,
        ..ExperimentConfig::default()
    };
    gen_dictionary(&cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn c5_monotone_descent() -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    let mut iters = Vec::new();
    for (fi, family) in [DictFamily::Gaussian, DictFamily::DctRows]
        .into_iter()
        .enumerate()
    {
        let d = family_dict(family, 500 + fi as u64);
        for a in [0.01, 0.3, 0.7, 0.99] {
            let rep = run_wcm(&d, 14, &WcmConfig::new(alpha(a))).unwrap();
            for w in rep.objective_trace.windows(2) {
                worst = worst.max(w[1] - w[0]);
            }
            iters.push(rep.iterations);
        }
    }
    outcome(
        worst <= 1e-12,
        format!("largest step increase {worst:.3e} (slack 1e-12); iterations per run {iters:?}"),
    )
}

fn c6_half_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let bs = BlockStructure::uniform(3, 40).unwrap();
    let mut worst = 0.0f64;
    let mut iters = Vec::new();
    for i in 0..10 {
        let d = unit_dict(&mut rng, 60, &bs);
        let cfg = WcmConfig::new(alpha(0.5))
            .with_init(Init::Random { seed: 6000 + i })
            .with_max_iters(5000)
            .with_rel_tol(1e-14);
        let rep = run_wcm(&d, 14, &cfg).unwrap();
        let value = ds_objective(&rep.sensing, &d).unwrap();
        worst = worst.max((value - 106.0).abs() / 106.0);
        iters.push(rep.iterations);
    }
    outcome(
        worst <= 1e-6,
        format!("max rel |‖G−I‖² − 106|/106 = {worst:.2e} (tol 1e-6); iterations {iters:?}"),
    )
}

/// (max |within-block off-diagonal|, max |cross-block|, ν^t/μ_B^t).
fn block_profile(g: &GramParts) -> (f64, f64, f64) {
    let (mut within, mut cross) = (0.0f64, 0.0f64);
    let m = g.gram();
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            match entry_class(g.structure(), r, c) {
                EntryClass::WithinBlock => within = within.max(m[(r, c)].abs()),
                EntryClass::CrossBlock => cross = cross.max(m[(r, c)].abs()),
                EntryClass::Diagonal => {}
            }
        }
    }
    (within, cross, total_sub(g) / total_inter(g))
}

fn c7_near_orthonormal_blocks() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let bs = BlockStructure::uniform(3, 6).unwrap();
    let d = unit_dict(&mut rng, 18, &bs);
    let run = |a: f64| {
        let cfg = WcmConfig::new(alpha(a))
            .with_max_iters(20_000)
            .with_rel_tol(1e-12);
        let rep = run_wcm(&d, 12, &cfg).unwrap();
        (
            block_profile(&rep.sensing.gram(&d).unwrap()),
            rep.iterations,
        )
    };
    let ((within, cross, ratio_hi), it_hi) = run(0.99);
    let ((_, _, ratio_half), it_half) = run(0.5);
    outcome(
        within < cross && ratio_hi < ratio_half,
        format!(
            "α=0.99: max within {within:.3e} < max cross {cross:.3e}; ν^t/μ_B^t {ratio_hi:.3e} < {ratio_half:.3e} at α=0.5 \
             ({it_hi}/{it_half} iterations)"
        ),
    )
}

fn c8_desk_trend() -> Outcome {
    let cfg = ExperimentConfig {
        alpha_grid: vec![0.5, 0.99],
        designers: vec![Designer::Wcm],
        block_sizes: BlockSpec::Fixed(3),
        seed: 8,
        ..ExperimentConfig::default()
    }
    .desk();
    let res = run_sweep(&cfg).unwrap();
    let half = res.summary_for(Designer::Wcm, Some(0.5)).unwrap();
    let high = res.summary_for(Designer::Wcm, Some(0.99)).unwrap();
    let se_e = half.e_sem().hypot(high.e_sem());
    let se_r = half.r_sem().hypot(high.r_sem());
    let de = half.e_mean - high.e_mean;
    let dr = high.r_mean - half.r_mean;
    outcome(
        de > se_e && dr > se_r,
        format!(
            "e: {:.4} (α=.5) → {:.4} (α=.99), drop {de:.4} vs SE {se_e:.4}; \
             r: {:.4} → {:.4}, gain {dr:.4} vs SE {se_r:.4}",
            half.e_mean, high.e_mean, half.r_mean, high.r_mean
        ),
    )
}

/// Best pair of blocks by least-squares residual over all pairs.
fn exhaustive_support(e: &EquivalentDictionary, y: &DVector<f64>, k: usize) -> Vec<usize> {
    let bs = e.structure();
    let b = bs.num_blocks();
    let mut best = (f64::INFINITY, Vec::new());
    let mut consider = |blocks: Vec<usize>| {
        let cols: Vec<usize> = blocks.iter().flat_map(|&j| bs.range(j)).collect();
        let sub = e.matrix().select_columns(&cols);
        let x = sub.clone().svd(true, true).solve(y, 1e-12).unwrap();
        let res = (y - sub * x).norm();
        if res < best.0 {
            best = (res, blocks);
        }
    };
    match k {
        1 => (0..b).for_each(|i| consider(vec![i])),
        2 => (0..b).for_each(|i| (i + 1..b).for_each(|j| consider(vec![i, j]))),
        _ => unreachable!(),
    }
    best.1
}

struct BompStats {
    qualifying: usize,
    agree_qualifying: usize,
    agree_all: usize,
    best_bound: f64,
}

fn bomp_trials(k: usize) -> BompStats {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let bs = BlockStructure::uniform(3, 8).unwrap();
    let mut stats = BompStats {
        qualifying: 0,
        agree_qualifying: 0,
        agree_all: 0,
        best_bound: 0.0,
    };
    for i in 0..200 {
        // Even instances: Gaussian E; odd: E designed by WCM at α=0.99.
        let raw = if i % 2 == 0 {
            gaussian(&mut rng, 14, 24)
        } else {
            let d = unit_dict(&mut rng, 20, &bs);
            let rep = run_wcm(&d, 14, &WcmConfig::new(alpha(0.99))).unwrap();
            rep.sensing.matrix() * d.matrix()
        };
        let e = EquivalentDictionary::new(normalized(raw), bs.clone()).unwrap();
        let g = gram(&e);
        let bound = bound_block(mu_block(&g).unwrap(), nu_sub(&g), 3).unwrap();
        stats.best_bound = stats.best_bound.max(bound);

        let mut active: Vec<usize> = rand::seq::index::sample(&mut rng, 8, k).into_vec();
        active.sort_unstable();
        let mut theta = DVector::zeros(24);
        for &j in &active {
            for c in bs.range(j) {
                theta[c] = loop {
                    let v: f64 = rng.random_range(-1.0..1.0);
                    if v != 0.0 {
                        break v;
                    }
                };
            }
        }
        let y = e.matrix() * theta;
        let got = bomp_decode(&e, &y, &BompConfig::new(k)).unwrap();
        let agree = got.support() == exhaustive_support(&e, &y, k).as_slice();
        stats.agree_all += agree as usize;
        if (k as f64) < bound {
            stats.qualifying += 1;
            stats.agree_qualifying += agree as usize;
        }
    }
    stats
}

fn c9_bomp_oracle() -> Outcome {
    let s = bomp_trials(2);
    let supplementary = bomp_trials(1);
    println!(
        "       [info] k=1 on the same generator: bound holds on {}/200, BOMP = oracle on {}/{} of those ({}/200 overall)",
        supplementary.qualifying,
        supplementary.agree_qualifying,
        supplementary.qualifying,
        supplementary.agree_all
    );
    outcome(
        s.qualifying > 0 && s.agree_qualifying == s.qualifying,
        format!(
            "k=2: bound k < bound_block holds on {}/200 instances (largest bound {:.3}); \
             BOMP = oracle on {}/{} of those, {}/200 overall",
            s.qualifying, s.best_bound, s.agree_qualifying, s.qualifying, s.agree_all
        ),
    )
}

fn c10_bounds() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let mu: f64 = rng.random_range(1e-3..=1.0);
        let nu: f64 = rng.random_range(0.0..=1.0);
        let diff = (bound_block(mu, nu, 1).unwrap() - bound_sparse(mu).unwrap()).abs();
        worst = worst.max(diff);
    }
    outcome(
        worst <= 1e-12,
        format!("max |difference| = {worst:.2e} (tol 1e-12)"),
    )
}

fn c11_determinism() -> Outcome {
    let cfg = ExperimentConfig {
        signal_dim: 30,
        atoms: 60,
        measurements: 10,
        signals: 40,
        trials: 8,
        alpha_grid: vec![0.3, 0.8],
        seed: 11,
        max_iters: 200,
        ..ExperimentConfig::default()
    };
    let dir = TempDir::new().unwrap();
    let mut files = Vec::new();
    for (i, threads) in [0usize, 0, 1, 3].into_iter().enumerate() {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        let res = pool.install(|| run_sweep(&cfg)).unwrap();
        let out = dir.path().join(format!("run{i}"));
        res.write_dir(&out, &cfg).unwrap();
        files.push(fs::read(out.join("results.csv")).unwrap());
    }
    let identical = files.windows(2).all(|w| w[0] == w[1]);
    outcome(
        identical,
        format!(
            "results.csv ({} bytes) identical across 4 runs (default pool twice, 1 and 3 threads): {identical}",
            files[0].len()
        ),
    )
}

// ---------------------------------------------------------------------------

type Criterion = (&'static str, &'static str, Duration, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        (
            "1",
            "coherence decomposition identity",
            Duration::from_secs(5),
            c1_decomposition,
        ),
        (
            "2",
            "DS optimality",
            Duration::from_secs(1),
            c2_ds_optimality,
        ),
        (
            "3",
            "surrogate conditions",
            Duration::from_secs(30),
            c3_surrogate_conditions,
        ),
        (
            "4",
            "step optimality",
            Duration::from_secs(30),
            c4_step_optimality,
        ),
        (
            "5",
            "monotone descent",
            Duration::from_secs(60),
            c5_monotone_descent,
        ),
        (
            "6",
            "alpha=0.5 equivalence",
            Duration::from_secs(60),
            c6_half_equivalence,
        ),
        (
            "7",
            "near-orthonormal blocks at alpha->1",
            Duration::from_secs(10),
            c7_near_orthonormal_blocks,
        ),
        (
            "8",
            "desk-scale recovery trend",
            Duration::from_secs(600),
            c8_desk_trend,
        ),
        (
            "9",
            "BOMP oracle equivalence",
            Duration::from_secs(120),
            c9_bomp_oracle,
        ),
        ("10", "bound evaluators", Duration::from_secs(1), c10_bounds),
        (
            "11",
            "determinism",
            Duration::from_secs(60),
            c11_determinism,
        ),
    ];
    let mut failed = Vec::new();
    for (id, name, limit, run) in criteria {
        let start = Instant::now();
        let out = run();
        let took = start.elapsed();
        let in_time = took <= limit;
        let pass = out.pass && in_time;
        println!(
            "[{}] {id:>2} {name}: {}; {:.2}s (limit {}s{})",
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            took.as_secs_f64(),
            limit.as_secs(),
            if in_time { "" } else { ", exceeded" }
        );
        if !pass {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all 11 criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}");
        ExitCode::FAILURE
    }
}
