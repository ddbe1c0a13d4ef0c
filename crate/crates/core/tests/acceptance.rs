//! Acceptance gate: twelve criteria at fixed seeds, one PASS/FAIL line each.
//! Runs without the libtest harness so the lines are always printed.

use std::process::ExitCode;
use std::time::Instant;

use nalgebra::DMatrix;
use qsme_core::ensemble::DEFAULT_RANK_TOL;
use qsme_core::linalg::{c, diagonal, operator_norm, pauli_x, pauli_z, trace_re, zeros, Ket, Operator};
use qsme_core::master::{monte_carlo_mean_path, normalize_path, reconstruct_path, record_linear_sme};
use qsme_core::meanfield::{mckean_vlasov_solve, InteractionMap, MeanFieldConfig, MeanFieldMode};
use qsme_core::pure::jacobian_norm_estimate;
use qsme_core::random::{random_density, random_hermitian, random_ket, random_operator};
use qsme_core::validation::bounds::{moment_bound_check, BoundConfig, BoundKind, InitialState};
use qsme_core::validation::continuity::{hamiltonian_continuity_experiment, ContinuityConfig};
use qsme_core::validation::halving::{
    ensemble_equivalence, transform_residual, HalvingConfig, TransformDirection, MAX_HALVING_RATIO,
};
use qsme_core::validation::inequalities::inequality_sweep;
use qsme_core::validation::martingale::trace_samples;
use qsme_core::validation::suite::{girsanov_agreement, mean_vs_lindblad, picard_run, positivity_experiment};
use qsme_core::{Picture, SystemParams, WienerPath};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Outcome = Result<(bool, String), qsme_core::Error>;

fn sys(h: Operator, ls: Vec<Operator>, dt: f64) -> SystemParams {
    SystemParams::new(h, ls, dt, Picture::Schroedinger).unwrap()
}

fn trace_martingale() -> Outcome {
    let p = sys(zeros(2), vec![pauli_x()], 0.01);
    let r = trace_samples(&p, &diagonal(&[0.7, 0.3]), 100, 10_000, 101, 10, 0.0)?.martingale_test()?;
    let z = r.max_abs_z();
    Ok((z <= 3.0, format!("max |z| = {z:.3} (≤ 3)")))
}

fn positivity() -> Outcome {
    let r = positivity_experiment(2024)?;
    Ok((
        r.pass,
        format!(
            "worst λmin {:.3e} / {:.3e} vs bounds {:.1e} / {:.1e}, shrink {:.2} (≥ 1.5)",
            r.worst[0], r.worst[1], r.bounds[0], r.bounds[1], r.shrink
        ),
    ))
}

fn second_moment() -> Outcome {
    let cfg = BoundConfig {
        params: sys(pauli_z() * c(0.3, 0.0), vec![pauli_x()], 0.01),
        initial: InitialState::Operator(diagonal(&[1.0, 0.0])),
        steps: 100,
        trajectories: 10_000,
        seed: 103,
        stride: 10,
    };
    let growth = moment_bound_check(BoundKind::GammaSquaredGrowth, &cfg)?;
    // Without coupling the interaction-picture step is exactly unitary.
    let free = BoundConfig {
        params: SystemParams::new(pauli_x() * c(0.5, 0.0), vec![zeros(2)], 0.01, Picture::Interaction)?,
        initial: InitialState::Operator(diagonal(&[0.6, 0.4])),
        trajectories: 100,
        ..cfg
    };
    let eq = moment_bound_check(BoundKind::GammaSquaredGrowth, &free)?;
    let gap = eq
        .observed
        .iter()
        .zip(&eq.bound)
        .zip(&eq.stderr)
        .map(|((o, b), s)| ((o - b).abs() - 3.0 * s) / b)
        .fold(f64::NEG_INFINITY, f64::max);
    let equal = gap <= 1e-10;
    Ok((
        growth.pass && equal,
        format!("min margin {:.2} stderr; L=0 worst relative excess {gap:.1e}", growth.min_margin()),
    ))
}

fn pure_norm_growth() -> Outcome {
    let cfg = BoundConfig {
        params: sys(pauli_z() * c(0.3, 0.0), vec![pauli_x()], 0.01),
        initial: InitialState::Ket(Ket::from_vec(vec![c(0.6, 0.0), c(0.0, 0.8)])),
        steps: 100,
        trajectories: 10_000,
        seed: 104,
        stride: 10,
    };
    let r = moment_bound_check(BoundKind::PureNormGrowth, &cfg)?;
    Ok((r.pass, format!("min margin {:.2} stderr", r.min_margin())))
}

fn linear_normalized() -> Outcome {
    let p = sys(pauli_x() * c(0.5, 0.0), vec![pauli_z() * c(0.8, 0.0)], 0.01);
    let g0 = diagonal(&[0.7, 0.3]);
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let w = WienerPath::for_trajectory(1, 100, 0.01, 105, i)?;
        let lin = record_linear_sme(&p, &g0, &w)?;
        let back = reconstruct_path(&normalize_path(&lin)?, trace_re(&g0))?;
        for (a, b) in lin.states.iter().zip(&back.states) {
            worst = worst.max((a - b).norm() / a.norm());
        }
    }
    let hc = HalvingConfig { params: p, horizon: 0.5, dt0: 0.01, levels: 3, trajectories: 200, seed: 205 };
    let r = transform_residual(&hc, &g0, TransformDirection::Normalize)?;
    Ok((
        worst <= 1e-9 && r.pass,
        format!("round trip {worst:.1e} (≤ 1e-9); residual ratios {:?} (≤ {MAX_HALVING_RATIO})", rounded(&r.ratios)),
    ))
}

fn ensemble() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let h = random_hermitian(4, &mut rng) * c(0.5, 0.0);
    let l = random_operator(4, &mut rng);
    let l = &l * c(0.7 / operator_norm(&l), 0.0);
    let rho0 = random_density(4, 2, &mut rng);
    let hc = HalvingConfig { params: sys(h, vec![l], 0.01), horizon: 0.5, dt0: 0.01, levels: 3, trajectories: 400, seed: 106 };
    let r = ensemble_equivalence(&hc, &rho0, DEFAULT_RANK_TOL)?;
    Ok((r.pass, format!("d=4 rank 2, ratios {:?} (≤ {MAX_HALVING_RATIO})", rounded(&r.ratios))))
}

fn mean_vs_deterministic() -> Outcome {
    let p = sys(pauli_x() * c(0.5, 0.0), vec![pauli_z() * c(0.8, 0.0)], 0.01);
    let (agree, z) = mean_vs_lindblad(&p, &diagonal(&[0.7, 0.3]), 100, 10_000, 107, 10)?;

    // Dephasing: coherence 0.5·e^{−2t}; the Euler mean follows (1 − 2dt)^k.
    let dt = 0.01;
    let p = sys(zeros(2), vec![pauli_z()], dt);
    let rho0 = Operator::from_element(2, 2, c(0.5, 0.0));
    let mc = monte_carlo_mean_path(&p, &rho0, 100, 10_000, 207, 10)?;
    let mut worst_dephasing: f64 = 0.0;
    for ((t, mean), se) in mc.times.iter().zip(&mc.mean).zip(&mc.entry_stderr) {
        let exact = 0.5 * (-2.0 * t).exp();
        let bias = (0.5 * (1.0 - 2.0 * dt).powi((t / dt).round() as i32) - exact).abs();
        let excess = ((mean[(0, 1)].re - exact).abs() - bias).max(0.0);
        let z = if se[(0, 1)].re > 0.0 { excess / se[(0, 1)].re } else if excess < 1e-12 { 0.0 } else { f64::INFINITY };
        worst_dephasing = worst_dephasing.max(z);
    }
    Ok((
        agree && worst_dephasing <= 3.0,
        format!("worst excess z {z:.2}; dephasing worst excess z {worst_dephasing:.2} (≤ 3)"),
    ))
}

fn continuity() -> Outcome {
    let cfg = ContinuityConfig {
        params: sys(zeros(2), vec![pauli_z()], 0.005),
        h2: pauli_x() * c(0.1, 0.0),
        gamma0: diagonal(&[1.0, 0.0]),
        steps: 100,
        trajectories: 2000,
        seed: 108,
        stride: 20,
        scales: vec![1.0, 0.5, 0.25],
    };
    let r = hamiltonian_continuity_experiment(&cfg)?;
    let t = &r.trace_norm_bound;
    let (obs, bound) = (*t.observed.last().unwrap(), *t.bound.last().unwrap());
    let pass = t.pass && r.nonlinear.fit.r_squared >= 0.95;
    Ok((pass, format!("E tr|Δγ|(0.5) = {obs:.4} ≤ {bound:.3}; nonlinear R² = {:.4}", r.nonlinear.fit.r_squared)))
}

fn lipschitz() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(109);
    let mut worst = f64::NEG_INFINITY;
    for k in 0..100 {
        let d = 1 + k % 8;
        let m = random_operator(d, &mut rng);
        let psi = random_ket(d, &mut rng);
        worst = worst.max(jacobian_norm_estimate(&m, &psi)? - 5.0 * operator_norm(&m));
    }
    Ok((worst <= 1e-6, format!("max (‖J‖ − 5‖M‖) = {worst:.3}")))
}

fn inequalities() -> Outcome {
    let start = Instant::now();
    let mut failures = 0;
    let mut worst: f64 = 0.0;
    for (k, d) in [2usize, 4, 8, 16].into_iter().enumerate() {
        let s = inequality_sweep(d, 10_000, 110 + k as u64)?;
        failures += s.failures;
        worst = worst.max(s.worst_ratio);
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((failures == 0 && secs <= 60.0, format!("{failures} failures, worst lhs/rhs {worst:.6}, {secs:.1} s (≤ 60)")))
}

fn picard() -> Outcome {
    let r = picard_run(111, 1.0)?;
    let d = &r.iteration_distances;
    let decreasing = d.windows(2).all(|w| w[1] < w[0]);
    let ratio = d.windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max);

    let base = sys(pauli_x() * c(0.5, 0.0), vec![pauli_z() * c(0.5, 0.0)], 0.01);
    let rho0 = diagonal(&[0.8, 0.2]) + pauli_x() * c(0.3, 0.0);
    let cfg = MeanFieldConfig {
        base: base.clone(),
        interaction: InteractionMap::Zero,
        rho0: rho0.clone(),
        trajectories: 500,
        horizon: 0.25,
        picard_max_iter: 50,
        picard_tol: 1e-10,
        mode: MeanFieldMode::Normalized,
        seed: 211,
        conjugate: false,
    };
    let zero = mckean_vlasov_solve(&cfg)?;
    let plain = monte_carlo_mean_path(&base, &rho0, cfg.steps(), cfg.trajectories, cfg.seed, 1)?;
    let bitwise = zero.mean_field_path == plain.mean;
    let constant = InteractionMap::potential(DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]))?.constant();
    Ok((
        r.converged && decreasing && ratio < 1.0 && bitwise && constant == 1.0,
        format!("{} iterations, max ratio {ratio:.3e}, converged {}; zero-interaction bitwise {bitwise}", d.len(), r.converged),
    ))
}

fn girsanov() -> Outcome {
    let p = sys(pauli_x() * c(0.5, 0.0), vec![pauli_z()], 0.01);
    let rho0 = diagonal(&[0.5, 0.5]) + pauli_x() * c(0.3, 0.0);
    let (diff, tol, detail) = girsanov_agreement(&p, rho0, &pauli_z(), 50, 10_000, 112)?;
    Ok((diff <= tol, format!("|Δ| = {diff:.2e} ≤ {tol:.2e}, ESS {:.0}", detail["ess"].as_f64().unwrap_or(0.0))))
}

fn rounded(xs: &[f64]) -> Vec<f64> {
    xs.iter().map(|x| (x * 1000.0).round() / 1000.0).collect()
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("trace martingale", trace_martingale),
        ("positivity", positivity),
        ("second-moment growth", second_moment),
        ("pure-norm growth", pure_norm_growth),
        ("linear/normalized correspondence", linear_normalized),
        ("ensemble unraveling equivalence", ensemble),
        ("mean vs deterministic Lindblad", mean_vs_deterministic),
        ("Hamiltonian continuity", continuity),
        ("mean-map Lipschitz bound", lipschitz),
        ("trace inequalities", inequalities),
        ("Picard contraction", picard),
        ("Girsanov reweighting", girsanov),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (pass, detail) = run().unwrap_or_else(|e| (false, format!("error: {e}")));
        failed += usize::from(!pass);
        println!(
            "{} {:>2}. {name}: {detail} [{:.1} s]",
            if pass { "PASS" } else { "FAIL" },
            k + 1,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {}/12 passed", 12 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
