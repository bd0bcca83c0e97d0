//! End-to-end acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test --test acceptance` (release-grade optimization is
//! enabled for the test profile in the workspace manifest).

mod common;

use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;
use proxtone::datasets::{partition, synth_digits, synth_logistic};
use proxtone::harness::trace::{csv_body_without_wall, RunTrace};
use proxtone::harness::{
    best_eta, compare_traces_with, run_experiment, DatasetSource, ExperimentConfig, NullSink, ObjectiveKind,
};
use proxtone::hessian::{bfgs_rebuild, CurvatureHistory, HessianApprox};
use proxtone::objectives::{LogisticComponent, MlpArchitecture, MlpComponent, Problem, SmoothComponent};
use proxtone::optimizers::{
    run, Optimizer, OptimizerKind, OptimizerSpec, ProxSag, ProxtoneConfig, RunOutcome, SubspaceConfig,
};
use proxtone::prox::{masked_zero_count, shrink, soft_threshold, PenaltyMask, RegularizerConfig};
use proxtone::subproblem::{solve_lasso, SubproblemConfig};
use proxtone::surrogate::{ComponentModel, QuadraticSurrogate};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn e2s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

// 1. Prox / threshold correctness.
fn prox_threshold() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cases = 2000;
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let eps = rng.random_range(0.0..3.0);
        let a: f64 = rng.random_range(-10.0..10.0);
        let b: f64 = rng.random_range(-10.0..10.0);
        let x = DVector::from_vec(vec![a, b, rng.random_range(-eps..=eps)]);
        let s = soft_threshold(&x, eps).map_err(e2s)?;
        // exact in real arithmetic; the subtractions may each round by half an ulp
        let slack = 4.0 * f64::EPSILON * a.abs().max(b.abs()).max(eps);
        ensure(
            (s[0] - s[1]).abs() <= (a - b).abs() + slack,
            format!("contraction fails at {a}, {b}, eps {eps}"),
        )?;
        ensure(s[2] == 0.0 && s[2].to_bits() == 0, format!("band value {} not an exact +0", x[2]))?;
        if a.abs() <= eps {
            ensure(s[0] == 0.0, "value inside the band not zeroed")?;
        }
        let oracle = prox_by_bisection(a, eps);
        worst = worst.max((oracle - shrink(a, eps)).abs());
    }
    ensure(worst <= 1e-10, format!("prox oracle disagreement {worst:e}"))?;
    Ok(format!("{cases} cases, worst oracle deviation {worst:.1e}"))
}

// 2. Gradient fidelity.
fn gradient_fidelity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let draws = 120;
    let mut worst_log = 0.0f64;
    for k in 0..draws {
        let p = rng.random_range(2..20);
        let m = rng.random_range(5..30);
        let data = Arc::new(synth_logistic(p, m, 0.5, k).map_err(e2s)?);
        let comp = LogisticComponent::new(data, (0..m).collect(), rng.random_range(0.0..0.1));
        let x = gaussian_vec(&mut rng, p, 1.0);
        let g = comp.gradient(&x).map_err(e2s)?;
        let fd = central_diff(|v| comp.value(v).unwrap(), &x, 1e-6);
        worst_log = worst_log.max(rel_err(&g, &fd));
    }
    let mut worst_mlp = 0.0f64;
    for k in 0..draws {
        let dim = rng.random_range(2..8);
        let classes = rng.random_range(2..5);
        let hidden = rng.random_range(2..7);
        let m = rng.random_range(3..12);
        let data = Arc::new(synth_digits(dim, classes, m, 0.3, k).map_err(e2s)?);
        let arch = MlpArchitecture::new(dim, hidden, classes).map_err(e2s)?;
        let comp = MlpComponent::new(data, (0..m).collect(), arch, rng.random_range(0.0..0.1)).map_err(e2s)?;
        let x = arch.initial_point(k) + gaussian_vec(&mut rng, arch.dim(), 0.5);
        let g = comp.gradient(&x).map_err(e2s)?;
        let fd = central_diff(|v| comp.value(v).unwrap(), &x, 1e-6);
        worst_mlp = worst_mlp.max(rel_err(&g, &fd));
    }
    ensure(worst_log <= 1e-5, format!("logistic rel. error {worst_log:e}"))?;
    ensure(worst_mlp <= 1e-4, format!("MLP rel. error {worst_mlp:e}"))?;
    Ok(format!("{draws}+{draws} draws, worst rel. error logistic {worst_log:.1e}, MLP {worst_mlp:.1e}"))
}

// 3. BFGS contract.
fn bfgs_contract() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut rebuilds, mut rejected, mut worst_secant, mut worst_sym, mut min_eig) = (0, 0, 0.0f64, 0.0f64, f64::MAX);
    for _ in 0..150 {
        let p = rng.random_range(1..=30);
        let a = random_spd(&mut rng, p, 0.2, 5.0);
        let mut hist = CurvatureHistory::new(1, p, 20).map_err(e2s)?;
        let mut x = gaussian_vec(&mut rng, p, 1.0);
        let mut g = gaussian_vec(&mut rng, p, 1.0);
        hist.init_batch(0, &x, &g).map_err(e2s)?;
        for _ in 0..rng.random_range(1..=30) {
            let s = gaussian_vec(&mut rng, p, 1.0);
            // a quarter of the pairs have negative curvature and must be skipped
            let y = if rng.random_bool(0.25) { -(&a * &s) } else { &a * &s };
            x += &s;
            g += &y;
            hist.record_observation(0, &x, &g).map_err(e2s)?;
            let (h, stats) = bfgs_rebuild(&hist, 0);
            rebuilds += 1;
            rejected += stats.skipped;
            let b = h.to_dense();
            worst_sym = worst_sym.max((&b - b.transpose()).amax());
            let eig = SymmetricEigen::new(b.clone()).eigenvalues.min();
            min_eig = min_eig.min(eig);
            ensure(eig > 0.0, format!("eigenvalue {eig:e} after rebuild"))?;
            if let Some((s, y)) = hist.pairs_newest_first(0).find(|(s, y)| y.dot(s) > 0.0) {
                let r = (&b * s - y).norm() / y.norm().max(1.0);
                worst_secant = worst_secant.max(r);
            }
        }
    }
    ensure(worst_sym <= 1e-10, format!("asymmetry {worst_sym:e}"))?;
    ensure(worst_secant <= 1e-8, format!("secant residual {worst_secant:e}"))?;
    ensure(rejected > 0, "no pair was rejected")?;
    Ok(format!(
        "{rebuilds} rebuilds ({rejected} skipped pairs), asym {worst_sym:.1e}, secant {worst_secant:.1e}, min eig {min_eig:.1e}"
    ))
}

// 4. Subproblem oracle equivalence.
fn subproblem_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let p = rng.random_range(1..=30);
        // condition number <= 10: the |ΔF| < abstol stop leaves a gap of
        // roughly κ·abstol, so ill-conditioned draws need a tighter abstol
        let h = random_spd(&mut rng, p, 0.2, 2.0);
        let anchor = gaussian_vec(&mut rng, p, 1.0);
        let grad = gaussian_vec(&mut rng, p, 1.0);
        let value = rng.random_range(-1.0..1.0);
        let lambda2 = rng.random_range(0.0..1.0);
        let mask: Vec<bool> = (0..p).map(|_| rng.random_bool(0.8)).collect();
        let model = ComponentModel::new(anchor.clone(), value, grad.clone(), HessianApprox::Dense(h.clone()))
            .map_err(e2s)?;
        let sur = QuadraticSurrogate::from_models(vec![model]).map_err(e2s)?;
        let start = gaussian_vec(&mut rng, p, 1.0);
        let sol = solve_lasso(&sur, lambda2, &start, &SubproblemConfig::default(), &PenaltyMask::from_vec(mask.clone()))
            .map_err(e2s)?;
        // same quadratic in standard form for the oracle
        let b = &grad - &h * &anchor;
        let c = value - grad.dot(&anchor) + 0.5 * anchor.dot(&(&h * &anchor));
        let x_cd = cd_lasso(&h, &b, lambda2, &mask, &DVector::zeros(p), 1e-10);
        let f_cd = quad_lasso_objective(&h, &b, c, lambda2, &mask, &x_cd);
        let f_sol = quad_lasso_objective(&h, &b, c, lambda2, &mask, &sol.x);
        worst = worst.max((f_sol - f_cd).abs());
    }
    ensure(worst <= 1e-4, format!("objective gap to oracle {worst:e}"))?;
    Ok(format!("50 quadratics, worst |F - F_cd| = {worst:.1e}"))
}

// 5. Surrogate aggregate consistency.
fn aggregate_consistency() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (n, p) = (6, 10);
    let hess = |rng: &mut ChaCha8Rng| {
        if rng.random_bool(0.3) {
            HessianApprox::ScaledIdentity { dim: p, scale: rng.random_range(0.1..5.0) }
        } else {
            HessianApprox::Dense(random_spd(rng, p, 0.1, 5.0))
        }
    };
    let models = (0..n)
        .map(|_| {
            let h = hess(&mut rng);
            ComponentModel::new(gaussian_vec(&mut rng, p, 3.0), rng.random_range(-5.0..5.0), gaussian_vec(&mut rng, p, 2.0), h)
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(e2s)?;
    let mut sur = QuadraticSurrogate::from_models(models).map_err(e2s)?;
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let i = rng.random_range(0..n);
        let h = hess(&mut rng);
        sur.replace_component(i, &gaussian_vec(&mut rng, p, 3.0), rng.random_range(-5.0..5.0), &gaussian_vec(&mut rng, p, 2.0), h)
            .map_err(e2s)?;
        // from-scratch sums over the stored components
        let mut alpha = 0.0;
        let mut beta = DVector::zeros(p);
        let mut hsum = DMatrix::zeros(p, p);
        for k in 0..n {
            let c = sur.component(k);
            alpha += c.alpha();
            beta += c.beta();
            hsum += c.hessian().to_dense();
        }
        let sums = sur.sums();
        let mut agg_h = DMatrix::identity(p, p) * sums.scale;
        if let Some(d) = &sums.dense {
            agg_h += d;
        }
        let flat = |a: f64, b: &DVector<f64>, h: &DMatrix<f64>| {
            DVector::from_iterator(1 + p + p * p, std::iter::once(a).chain(b.iter().copied()).chain(h.iter().copied()))
        };
        worst = worst.max(rel_err(&flat(sums.alpha, &sums.beta, &agg_h), &flat(alpha, &beta, &hsum)));
    }
    ensure(worst <= 1e-9, format!("aggregate rel. error {worst:e}"))?;
    Ok(format!("100 replacements, worst rel. error {worst:.1e}"))
}

fn logistic_bundle() -> Result<(ExperimentConfig, Problem, LogisticOracle), String> {
    let cfg = ExperimentConfig::default();
    let problem = cfg.build_problem().map_err(e2s)?;
    let DatasetSource::Synthetic { p, m, sparsity } = cfg.dataset else { unreachable!() };
    let data = synth_logistic(p, m, sparsity, cfg.seed).map_err(e2s)?;
    let part = partition(m, cfg.batches, cfg.seed).map_err(e2s)?;
    Ok((cfg.clone(), problem, LogisticOracle::new(&data, &part, cfg.reg.lambda1, cfg.reg.lambda2)))
}

fn proxtone_spec() -> OptimizerSpec {
    OptimizerSpec::Proxtone { config: ProxtoneConfig::default(), inexact: false }
}

// 6. Linear-rate behavior.
fn linear_rate() -> Outcome {
    let (cfg, problem, oracle) = logistic_bundle()?;
    let (_, f_star) = oracle.solve(problem.dim());
    let out = run(&proxtone_spec(), &problem, 50, cfg.seed, 0.0, &mut NullSink).map_err(e2s)?;
    ensure(!out.is_aborted(), "run aborted")?;
    // gaps at rounding level are floored so the log stays finite
    let gaps: Vec<f64> = out.trace.rows().iter().map(|r| (r.objective - f_star).max(1e-15)).collect();
    let epochs: Vec<f64> = (5..=50).map(|e| e as f64).collect();
    let logs: Vec<f64> = (5..=50).map(|e| gaps[e].ln()).collect();
    let s = slope(&epochs, &logs);
    let reached = gaps.iter().position(|&g| g <= 1e-6);
    ensure(reached.is_some(), format!("gap at epoch 50 is {:e}", gaps[50]))?;
    ensure(s < 0.0, format!("log-gap slope {s}"))?;
    Ok(format!(
        "f* = {f_star:.12} (prox-Newton oracle), gap <= 1e-6 at epoch {}, gap(50) = {:.1e}, slope {s:.3}/epoch",
        reached.unwrap(),
        gaps[50]
    ))
}

// 7. Speed claim.
fn speed_claim() -> Outcome {
    let (cfg, problem, oracle) = logistic_bundle()?;
    let (_, f_star) = oracle.solve(problem.dim());
    let budget_proxtone = 50;
    // ProxSGD gets four times the budget to give it every chance to reach the gap
    let budget_sgd = 200;
    let pt = run(&proxtone_spec(), &problem, budget_proxtone, cfg.seed, 0.0, &mut NullSink).map_err(e2s)?;
    let (eta, grid) = best_eta(&problem, budget_sgd, cfg.seed, 0.0).map_err(e2s)?;
    let sgd = run(&OptimizerSpec::ProxSgd { eta }, &problem, budget_sgd, cfg.seed, 0.0, &mut NullSink).map_err(e2s)?;
    let table = compare_traces_with(
        &[("proxtone".to_string(), &pt.trace), ("proxsgd".to_string(), &sgd.trace)],
        f_star,
        1e-4,
    );
    println!("{table}");
    let e_pt = table.row("proxtone").and_then(|r| r.epochs_to_gap).ok_or("PROXTONE did not reach the gap")?;
    // not reached within the budget means "more than budget_sgd epochs"
    let (e_sgd, sgd_label) = match table.row("proxsgd").and_then(|r| r.epochs_to_gap) {
        Some(e) => (e as f64, e.to_string()),
        None => ((budget_sgd + 1) as f64, format!("> {budget_sgd}")),
    };
    ensure(e_pt as f64 <= 0.5 * e_sgd, format!("PROXTONE {e_pt} epochs vs ProxSGD {sgd_label}"))?;
    Ok(format!(
        "epochs to gap 1e-4: PROXTONE {e_pt}, best ProxSGD (eta {eta}, grid {grid:?}) {sgd_label}"
    ))
}

fn mlp_problem() -> Result<(ExperimentConfig, Problem), String> {
    let cfg = ExperimentConfig {
        objective: ObjectiveKind::Mlp,
        dataset: DatasetSource::Digits { dim: 64, classes: 10, m: 1000, noise: 0.3 },
        reg: RegularizerConfig::new(1e-4, 1e-3).map_err(e2s)?,
        ..Default::default()
    };
    let problem = cfg.build_problem().map_err(e2s)?;
    Ok((cfg, problem))
}

/// 1-2-5 grid for PROXTONE⁺'s Lipschitz constant, searched like ProxSGD's η.
const LIPSCHITZ_GRID: [f64; 10] = [0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0];

fn final_objective(out: &RunOutcome) -> f64 {
    match out.trace.last() {
        Some(r) if !out.is_aborted() && r.objective.is_finite() => r.objective,
        _ => f64::INFINITY,
    }
}

// 8. Sparsity claim.
fn sparsity_claim() -> Outcome {
    let (cfg, problem) = mlp_problem()?;
    let mask = problem.mask().clone();
    let epochs = 50;
    // p = 2410 exceeds the dense Hessian cap, so PROXTONE runs in subspace mode
    let config = ProxtoneConfig { subspace: Some(SubspaceConfig::default()), ..Default::default() };

    let (eta, _) = best_eta(&problem, epochs, cfg.seed, 0.0).map_err(e2s)?;
    let sgd = run(&OptimizerSpec::ProxSgd { eta }, &problem, epochs, cfg.seed, 0.0, &mut NullSink).map_err(e2s)?;

    let mut plus: Option<(f64, RunOutcome)> = None;
    for &l in &LIPSCHITZ_GRID {
        let spec = OptimizerSpec::ProxtonePlus { config: config.clone(), switch_epoch: Some(5), lipschitz: l };
        let out = run(&spec, &problem, epochs, cfg.seed, 0.0, &mut NullSink).map_err(e2s)?;
        if plus.as_ref().is_none_or(|(_, best)| final_objective(&out) < final_objective(best)) {
            plus = Some((l, out));
        }
    }
    let (l, plus) = plus.expect("grid is non-empty");

    let inexact = run(&OptimizerSpec::Proxtone { config, inexact: true }, &problem, epochs, cfg.seed, 0.0, &mut NullSink)
        .map_err(e2s)?;

    let z_plus = masked_zero_count(&plus.x, &mask);
    let z_sgd = masked_zero_count(&sgd.x, &mask);
    let z_inexact = masked_zero_count(&inexact.x, &mask);
    let (f_plus, f_sgd) = (final_objective(&plus), final_objective(&sgd));
    let detail = format!(
        "zero weights of {}: PROXTONE+ (L {l}) {z_plus}, ProxSGD (eta {eta}) {z_sgd}, inexact PROXTONE {z_inexact}; \
         objective PROXTONE+ {f_plus:.5} vs ProxSGD {f_sgd:.5} ({:+.2}%)",
        mask.penalized_count(),
        100.0 * (f_plus / f_sgd - 1.0)
    );
    ensure(z_plus > z_sgd && z_plus > z_inexact, detail.clone())?;
    ensure(f_plus <= 1.05 * f_sgd, detail.clone())?;
    Ok(detail)
}

// 9. Determinism.
fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(e2s)?;
    let mut configs: Vec<ExperimentConfig> =
        OptimizerKind::ALL.iter().map(|&k| ExperimentConfig::default().with_optimizer(k)).collect();
    let (mlp, _) = mlp_problem()?;
    configs.push(ExperimentConfig {
        optimizer: OptimizerKind::ProxtonePlus,
        subspace: Some(SubspaceConfig::default()),
        lipschitz: Some(0.05),
        epochs: 10,
        ..mlp
    });
    for (i, cfg) in configs.iter().enumerate() {
        let mut bodies = Vec::new();
        for rep in 0..2 {
            let path = dir.path().join(format!("run{i}-{rep}.csv"));
            let c = ExperimentConfig { trace: Some(path.clone()), ..cfg.clone() };
            run_experiment(&c).map_err(e2s)?;
            bodies.push(csv_body_without_wall(&std::fs::read_to_string(&path).map_err(e2s)?));
        }
        ensure(bodies[0] == bodies[1], format!("{} traces differ", cfg.optimizer))?;
        ensure(bodies[0].lines().count() == cfg.epochs + 1, "wrong row count")?;
    }
    Ok(format!("{} configurations run twice, CSV bodies identical", configs.len()))
}

fn same_rows(a: &RunTrace, b: &RunTrace) -> bool {
    a.rows().len() == b.rows().len()
        && a.rows().iter().zip(b.rows()).all(|(x, y)| {
            x.epoch == y.epoch
                && x.objective.to_bits() == y.objective.to_bits()
                && x.nnz == y.nnz
                && x.grad_evals == y.grad_evals
        })
}

// 10. Degenerate-branch identities.
fn degenerate_branches() -> Outcome {
    let (cfg, problem, _) = logistic_bundle()?;
    let l = problem.lipschitz_estimate().ok_or("no Lipschitz estimate")?;
    let epochs = 20;
    let go = |spec: &OptimizerSpec| run(spec, &problem, epochs, cfg.seed, 0.0, &mut NullSink).map_err(e2s);
    let config = ProxtoneConfig::default();

    let sag = go(&OptimizerSpec::ProxSag { lipschitz: l })?;
    let plus0 = go(&OptimizerSpec::ProxtonePlus { config: config.clone(), switch_epoch: Some(0), lipschitz: l })?;
    ensure(same_rows(&sag.trace, &plus0.trace) && sag.x == plus0.x, "N = 0 differs from ProxSAG")?;

    let inexact = go(&OptimizerSpec::Proxtone { config: config.clone(), inexact: true })?;
    let plus_inf = go(&OptimizerSpec::ProxtonePlus { config, switch_epoch: Some(epochs), lipschitz: l })?;
    ensure(same_rows(&inexact.trace, &plus_inf.trace) && inexact.x == plus_inf.x, "N >= epochs differs from inexact PROXTONE")?;

    // ProxSAG with a single batch against hand-written proximal gradient descent
    let data = Arc::new(synth_logistic(20, 200, 0.3, 11).map_err(e2s)?);
    let reg = RegularizerConfig::new(1e-4, 1e-2).map_err(e2s)?;
    let single = Problem::logistic(data, &partition(200, 1, 11).map_err(e2s)?, reg).map_err(e2s)?;
    let l1 = single.lipschitz_estimate().ok_or("no Lipschitz estimate")?;
    let mut sag = ProxSag::new(DVector::zeros(20), l1).map_err(e2s)?;
    let mut x = DVector::<f64>::zeros(20);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        sag.step_on(&single, 0).map_err(e2s)?;
        let g = single.component(0).gradient(&x).map_err(e2s)?;
        x = (&x - g / l1).map(|v| shrink(v, reg.lambda2 / l1));
        worst = worst.max((sag.x() - &x).amax());
    }
    ensure(worst <= 1e-12, format!("ProxSAG n = 1 deviates from prox-gradient by {worst:e}"))?;
    Ok(format!("N = 0 == ProxSAG, N = {epochs} == inexact PROXTONE (bitwise), n = 1 ProxSAG max deviation {worst:.1e}"))
}

type Criterion = (&'static str, Duration, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("prox/threshold correctness", Duration::from_secs(1), prox_threshold),
        ("gradient fidelity", Duration::from_secs(10), gradient_fidelity),
        ("BFGS contract", Duration::from_secs(5), bfgs_contract),
        ("subproblem oracle equivalence", Duration::from_secs(10), subproblem_oracle),
        ("surrogate aggregate consistency", Duration::from_secs(5), aggregate_consistency),
        ("linear-rate behavior", Duration::from_secs(60), linear_rate),
        ("speed claim (>= 2x vs best ProxSGD)", Duration::from_secs(300), speed_claim),
        ("sparsity claim (MLP)", Duration::from_secs(600), sparsity_claim),
        ("determinism", Duration::from_secs(60), determinism),
        ("degenerate-branch identities", Duration::from_secs(30), degenerate_branches),
    ];
    let mut failed = 0;
    for (i, (name, budget, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let result = match result {
            Ok(detail) if elapsed > *budget => {
                Err(format!("{detail}; took {elapsed:.1?}, budget {budget:?}"))
            }
            other => other,
        };
        match result {
            Ok(detail) => println!("PASS  {:>2}. {name}: {detail} [{elapsed:.2?}]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {:>2}. {name}: {detail} [{elapsed:.2?}]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
