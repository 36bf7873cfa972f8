//! One PASS/FAIL line per acceptance criterion.
//!
//! Runs without the libtest harness so the lines always reach the output.
//! The process fails when any criterion's outcome differs from
//! `EXPECTED_FAIL`. Those criteria are checked at their stated tolerances and
//! reported as FAIL; they are unattainable with the game generator as
//! specified.

use std::process::ExitCode;
use std::time::Instant;

use mmhb::continuous::{delta_n, gamma_n, one_step_deviation, warmup_steps};
use mmhb::discrete::{run, run_adam, run_with, AdamParams, HBParams, RunOptions, Scheme};
use mmhb::experiments::{
    compare_models, rate_race, repro_configs, slope_sweep, Context, ExperimentConfig,
    APPENDIX_H_SEEDS,
};
use mmhb::game::{random_quadratic, BuiltinGame, Game, GamePoint, Matrix, QuadraticGame, Vector};
use mmhb::spectral::{
    alt_rate_prediction, bilinear_eigs, check_assumptions, eigenvalues, hmax_from_eigs,
    jacobian_sim, min_hb_stability, optimal_beta, sim_polynomial, spectral_abscissa,
    stability_heatmap, LocalModel, C64,
};
use nalgebra::dvector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const EXPECTED_FAIL: [&str; 2] = ["theorem-4.1", "theorem-4.4"];

type Check = mmhb::Result<(bool, String)>;

struct Outcome {
    name: &'static str,
    pass: bool,
}

fn criterion(name: &'static str, budget_s: f64, f: impl FnOnce() -> Check) -> Outcome {
    let t0 = Instant::now();
    let res = f();
    let secs = t0.elapsed().as_secs_f64();
    let (ok, detail) = res.unwrap_or_else(|e| (false, format!("error: {e}")));
    let pass = ok && secs < budget_s;
    println!(
        "{} {name}: {detail} [{secs:.2} s, budget {budget_s} s]",
        if pass { "PASS" } else { "FAIL" }
    );
    Outcome { name, pass }
}

fn multiset_distance(a: &[C64], b: &[C64]) -> f64 {
    let mut used = vec![false; b.len()];
    let mut worst = 0.0f64;
    for x in a {
        let (i, d) = b
            .iter()
            .enumerate()
            .filter(|(i, _)| !used[*i])
            .map(|(i, y)| (i, (x - y).norm()))
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .expect("equal sizes");
        used[i] = true;
        worst = worst.max(d);
    }
    worst
}

fn sci(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x:.2e}")).collect();
    format!("[{}]", items.join(", "))
}

// ---------------------------------------------------------------- spectra

fn bilinear_spectra() -> Check {
    let mut worst = 0.0f64;
    let mut min_sim_re = f64::INFINITY;
    let mut max_alt_re = f64::NEG_INFINITY;
    for rho in [0.25f64, 1.0, 4.0] {
        let game = BuiltinGame::bilinear(Matrix::from_element(1, 1, rho.sqrt()));
        let lm = LocalModel::at(&game, &GamePoint::zeros(1, 1))?;
        for h in [0.01, 0.1, 0.5] {
            for beta in [-0.5, 0.0, 0.5] {
                for scheme in Scheme::BOTH {
                    let (a, b) = bilinear_eigs(rho, h, beta, scheme);
                    let num = eigenvalues(&lm.jacobian(h, beta, scheme))?;
                    worst = worst.max(multiset_distance(&[a, b], &num));
                    if scheme == Scheme::Simultaneous {
                        min_sim_re = min_sim_re.min(a.re.min(b.re));
                    }
                    if scheme == Scheme::Alternating && beta == -0.5 && h == 0.01 {
                        max_alt_re = max_alt_re.max(a.re.max(b.re));
                    }
                }
            }
        }
    }
    Ok((
        worst <= 1e-10 && min_sim_re >= -1e-12 && max_alt_re < 0.0,
        format!(
            "max |closed form − eigensolver| {worst:.1e} (≤ 1e-10), min sim Re {min_sim_re:.1e} (≥ −1e-12), \
             max alt Re at β=−0.5,h=0.01 {max_alt_re:.2e} (< 0)"
        ),
    ))
}

// ---------------------------------------------------------------- O(h³)

fn model_fidelity() -> Check {
    let game = BuiltinGame::AppendixA2;
    let start = GamePoint::from_slices(&[0.5], &[0.5]);
    let beta = -0.5;
    let hs = [4e-3, 2e-3, 1e-3];
    let mut devs = Vec::new();
    for h in hs {
        let p = HBParams::new(h, beta, Scheme::Simultaneous)?;
        let w = warmup_steps(h, beta);
        let t = run(&game, &p, &start.x, &start.y, w.max(1))?;
        let from = &t.states[w].point;
        devs.push(one_step_deviation(&game, &p, from, 10)?);
    }
    let (lx, ly): (Vec<f64>, Vec<f64>) =
        hs.iter().zip(&devs).map(|(h, d)| (h.ln(), d.ln())).unzip();
    let slope = ls_slope(&lx, &ly);
    let mut terminal = 0.0f64;
    for scheme in Scheme::BOTH {
        let p = HBParams::new(1e-3, beta, scheme)?;
        terminal =
            terminal.max(compare_models(&game, &p, &start, 10_000, false, 10)?.terminal_o3());
    }
    Ok((
        slope >= 2.5 && terminal <= 1e-3,
        format!(
            "one-step deviations {}, log-log slope {slope:.3} (≥ 2.5); \
             terminal distance at h=1e-3 after 1e4 steps {terminal:.2e} (≤ 1e-3)",
            sci(&devs)
        ),
    ))
}

fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

// ---------------------------------------------------------------- Theorems 4.1 / 4.4

const SEED_SCAN: u64 = 500;

/// First `want` seeds whose random_quadratic(20,20,10,10,α) passes both assumptions.
fn qualifying_games(alpha: f64, want: usize) -> mmhb::Result<(Vec<(u64, QuadraticGame)>, String)> {
    let mut found = Vec::new();
    for seed in 0..SEED_SCAN {
        let q = random_quadratic(20, 20, 10, 10, alpha, seed)?;
        let lm = LocalModel::quadratic(&q);
        let asm = check_assumptions(&lm.j(), &lm.decomposition())?;
        if asm.interaction && asm.generic {
            found.push((seed, q));
            if found.len() == want {
                break;
            }
        }
    }
    let seeds: Vec<u64> = found.iter().map(|(s, _)| *s).collect();
    let note = format!(
        "{} of 10 qualifying α={alpha} games in seeds 0..{SEED_SCAN} {seeds:?}",
        found.len()
    );
    Ok((found, note))
}

fn theorem_41_on(games: &[(u64, QuadraticGame)]) -> Check {
    let betas: Vec<f64> = (0..19).map(|k| -0.9 + 0.1 * k as f64).collect();
    let mut worst = f64::NEG_INFINITY;
    let mut monotone = true;
    for (seed, q) in games {
        let lm = LocalModel::quadratic(q);
        let eigs = eigenvalues(&lm.j())?;
        for beta in [-0.5, 0.0, 0.5] {
            let h = 0.9 * hmax_from_eigs(&eigs, beta);
            worst = worst.max(spectral_abscissa(&jacobian_sim(&lm.j(), h, beta))?);
        }
        // shared geometric h grid spanning three decades around the bound
        let h0 = hmax_from_eigs(&eigs, 0.0);
        let hs: Vec<f64> = (0..240)
            .map(|k| h0 * 10f64.powf(-1.0 + 3.0 * k as f64 / 239.0))
            .collect();
        let cells = stability_heatmap(&lm, &hs, &betas, Scheme::Simultaneous)?;
        let emp: Vec<f64> = cells
            .chunks(hs.len())
            .map(|col| {
                col.iter()
                    .find(|c| c.abscissa >= 0.0)
                    .map_or(f64::INFINITY, |c| c.h)
            })
            .collect();
        if !emp.windows(2).all(|w| w[1] <= w[0]) {
            monotone = false;
            println!(
                "  seed {seed}: empirical boundary not non-increasing: {}",
                sci(&emp)
            );
        }
    }
    Ok((
        !games.is_empty() && worst < 0.0 && monotone,
        format!("max abscissa of J_S at 0.9·hmax {worst:.3e} (< 0), empirical boundary non-increasing in β: {monotone}"),
    ))
}

fn theorem_44_on(games: &[(u64, QuadraticGame)]) -> Check {
    let mut all_positive = true;
    let mut worst_match = 0.0f64;
    let mut unique = Vec::new();
    for (seed, q) in games {
        let j = LocalModel::quadratic(q).j();
        let eigs = eigenvalues(&j)?;
        let h = 0.5
            * eigs
                .iter()
                .map(|l| l.re.abs() / (2.0 * (l.im * l.im - l.re * l.re)))
                .fold(f64::INFINITY, f64::min);
        let ob = optimal_beta(&j, h)?;
        all_positive &= ob.global > 0.0;
        if ob.binding_is_unique() {
            unique.push(*seed);
            worst_match = worst_match.max((ob.global - ob.binding.1).abs());
        }
    }
    Ok((
        !games.is_empty() && all_positive && worst_match <= 5e-3,
        format!(
            "grid β* > 0 for every game: {all_positive}; unique binding on seeds {unique:?}, \
             max |β*_grid − β*_closed| {worst_match:.1e} (≤ 5e-3)"
        ),
    ))
}

fn theorem(alpha: f64, check: fn(&[(u64, QuadraticGame)]) -> Check) -> Check {
    let (games, note) = qualifying_games(alpha, 10)?;
    let (ok, detail) = check(&games)?;
    Ok((ok && games.len() == 10, format!("{note}; {detail}")))
}

fn diagnostic(label: &str, res: Check) {
    match res {
        Ok((ok, d)) => println!(
            "INFO   {label} (would {}): {d}",
            if ok { "pass" } else { "fail" }
        ),
        Err(e) => println!("INFO   {label}: error {e}"),
    }
}

// ---------------------------------------------------------------- Theorem 4.5

fn alt_prediction() -> Check {
    let two_d = QuadraticGame::new(
        Matrix::from_element(1, 1, 0.05),
        Matrix::from_element(1, 1, -0.05),
        Matrix::from_element(1, 1, 1.0),
    )?;
    let games = [
        ("2D", two_d),
        ("20D", random_quadratic(20, 20, 10, 10, 0.05, 3)?),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (label, q) in &games {
        let model = LocalModel::quadratic(q);
        for beta in [0.0, 0.4] {
            let errs = [1e-3, 5e-4, 2.5e-4]
                .iter()
                .map(|&h| {
                    let exact = spectral_abscissa(&model.ja(h, beta))?;
                    let pred = alt_rate_prediction(q, h, beta)?.predicted_abscissa;
                    Ok(((exact - pred) / exact).abs())
                })
                .collect::<mmhb::Result<Vec<f64>>>()?;
            // below 1e-12 relative the prediction is exact up to rounding
            let shrinks =
                errs.windows(2).all(|w| w[1] < w[0]) || errs[1..].iter().all(|&e| e < 1e-12);
            ok &= shrinks && errs[0] < 0.1;
            parts.push(format!("{label} β={beta}: {}", sci(&errs)));
        }
    }
    Ok((
        ok,
        format!(
            "relative errors at h = 1e-3, 5e-4, 2.5e-4 — {}",
            parts.join("; ")
        ),
    ))
}

// ---------------------------------------------------------------- Example I.1

fn example_i1() -> Check {
    let game = BuiltinGame::example_i1();
    let mut d = Vec::new();
    for scheme in Scheme::BOTH {
        let p = HBParams::new(0.4, 0.2, scheme)?;
        let t = run(&game, &p, &dvector![1.0], &dvector![1.0], 1000)?;
        d.push(if t.diverged() {
            f64::INFINITY
        } else {
            t.last().norm()
        });
    }
    Ok((
        d[0] < d[1],
        format!("‖z₁₀₀₀‖ sim {:.3e} < alt {:.3e}", d[0], d[1]),
    ))
}

// ---------------------------------------------------------------- Appendix H

fn appendix_h() -> Check {
    let ctx = Context::default();
    let mut ok = true;
    let mut parts = Vec::new();
    for ((_, cfg), seed) in repro_configs("appendix-h")?
        .into_iter()
        .zip(APPENDIX_H_SEEDS)
    {
        let ExperimentConfig::Rates(cfg) = cfg else {
            unreachable!("appendix-h is a rates bundle")
        };
        let game = cfg.game.build(&ctx)?;
        let start = cfg.init.build(&game, &ctx)?;
        let r = rate_race(
            &game,
            cfg.h,
            cfg.beta,
            &start,
            cfg.steps,
            &cfg.mode,
            cfg.substeps,
        )?;
        let (s, a) = (
            r.rate_sim.unwrap_or(f64::NAN),
            r.rate_alt.unwrap_or(f64::NAN),
        );
        ok &= a > s;
        parts.push(format!("seed {seed}: alt {a:.3} vs sim {s:.3}"));
    }
    Ok((ok, format!("fitted decay rates — {}", parts.join("; "))))
}

// ---------------------------------------------------------------- slopes

fn implicit_regularization() -> Check {
    let ctx = Context::default();
    let mut ok = true;
    let mut parts = Vec::new();
    for (dir, cfg) in repro_configs("figure3")? {
        let ExperimentConfig::Slopes(mut cfg) = cfg else {
            unreachable!("figure3 is a slopes bundle")
        };
        cfg.write_trajectories = false;
        let game = cfg.game.build(&ctx)?;
        let start = cfg.init.build(&game, &ctx)?;
        let rows = slope_sweep(&game, &cfg, &start)?;
        let series = |s: Scheme| -> Vec<f64> {
            rows.iter()
                .filter(|r| r.scheme == s)
                .map(|r| r.avg_slope)
                .collect()
        };
        let (sim, alt) = (series(Scheme::Simultaneous), series(Scheme::Alternating));
        for v in [&sim, &alt] {
            // differences at rounding level (converged runs, slope ~1e-31) are ties
            let floor = 1e-12 * v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let violations: Vec<f64> = v
                .windows(2)
                .filter(|w| w[0] - w[1] > floor)
                .map(|w| (w[0] - w[1]) / w[0].abs())
                .collect();
            ok &= violations.len() <= 1 && violations.iter().all(|&r| r <= 0.02);
        }
        ok &= sim.iter().zip(&alt).all(|(s, a)| *a <= s + 0.05 * s.abs());
        parts.push(format!("{dir} sim {sim:.3?} alt {alt:.3?}"));
    }
    Ok((
        ok,
        format!(
            "avg_slope over β = −0.5, −0.3, 0, 0.3, 0.5 — {}",
            parts.join("; ")
        ),
    ))
}

// ---------------------------------------------------------------- property suites

fn fd_step(v: f64) -> f64 {
    1e-6 * (1.0 + v.abs())
}

fn fd_grad(f: impl Fn(&GamePoint) -> f64, p: &GamePoint) -> Vector {
    let z = p.stacked();
    let n = p.x.len();
    Vector::from_fn(z.len(), |i, _| {
        let e = fd_step(z[i]);
        let shift = |s: f64| {
            let mut w = z.clone();
            w[i] += s;
            GamePoint::new(
                w.rows(0, n).into_owned(),
                w.rows(n, w.len() - n).into_owned(),
            )
        };
        (f(&shift(e)) - f(&shift(-e))) / (2.0 * e)
    })
}

fn rel_err(a: &Vector, b: &Vector) -> f64 {
    (a - b).norm() / a.norm().max(1.0)
}

fn property_suites() -> Check {
    let games = [
        BuiltinGame::XY,
        BuiltinGame::NegXY2,
        BuiltinGame::LimitCycle2D,
        BuiltinGame::AppendixA1,
        BuiltinGame::AppendixA2,
        BuiltinGame::example_i1(),
        BuiltinGame::bilinear(Matrix::from_row_slice(
            2,
            3,
            &[1.0, -2.0, 0.5, 0.3, 0.0, 1.5],
        )),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut g_err, mut h_err) = (0.0f64, 0.0f64);
    for _ in 0..50 {
        let coords: Vec<f64> = (0..5).map(|_| rng.random_range(-2.0..2.0)).collect();
        for g in &games {
            let (n, m) = g.dims();
            let p = GamePoint::from_slices(&coords[..n], &coords[n..n + m]);
            let (gx, gy) = g.grad(&p.x, &p.y);
            let analytic = GamePoint::new(gx, gy).stacked();
            g_err = g_err.max(rel_err(&analytic, &fd_grad(|q| g.value(&q.x, &q.y), &p)));
            let hs = g.second_derivs(&p.x, &p.y);
            for i in 0..n + m {
                let fd = fd_grad(
                    |q| {
                        let (gx, gy) = g.grad(&q.x, &q.y);
                        if i < n {
                            gx[i]
                        } else {
                            gy[i - n]
                        }
                    },
                    &p,
                );
                let row = if i < n {
                    Vector::from_iterator(
                        n + m,
                        hs.hxx.row(i).iter().chain(hs.hxy.row(i).iter()).copied(),
                    )
                } else {
                    let j = i - n;
                    Vector::from_iterator(
                        n + m,
                        hs.hxy.column(j).iter().chain(hs.hyy.row(j).iter()).copied(),
                    )
                };
                h_err = h_err.max(rel_err(&row, &fd));
            }
        }
    }

    let mut spec_err = 0.0f64;
    for (k, d) in [2usize, 5, 10, 20, 40].into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(k as u64);
        let j = Matrix::from_fn(d, d, |_, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z / (d as f64).sqrt()
        });
        let eigs = eigenvalues(&j)?;
        for h in [0.01, 0.1] {
            for beta in [-0.5, 0.0, 0.5] {
                let mapped: Vec<C64> = eigs.iter().map(|&l| sim_polynomial(l, h, beta)).collect();
                let direct = eigenvalues(&jacobian_sim(&j, h, beta))?;
                let scale = mapped.iter().map(|z| z.norm()).fold(1.0, f64::max);
                spec_err = spec_err.max(multiset_distance(&mapped, &direct) / scale);
            }
        }
    }

    let mut lim_err = 0.0f64;
    for beta in [-0.85, -0.5, 0.0, 0.3, 0.6, 0.85] {
        lim_err = lim_err
            .max((gamma_n(beta, 200) - (1.0 + beta) / (1.0 - beta)).abs())
            .max((delta_n(beta, 200) - 2.0).abs());
    }

    let (boundary_ok, checked) = stability_boundary()?;
    Ok((
        g_err < 1e-6 && h_err < 1e-5 && spec_err <= 1e-8 && lim_err < 1e-10 && boundary_ok,
        format!(
            "FD gradient {g_err:.1e} (< 1e-6), FD Hessian {h_err:.1e} (< 1e-5), spectral mapping {spec_err:.1e} (≤ 1e-8), \
             γ/δ limits at n=200 {lim_err:.1e} (< 1e-10), 1-D boundary {checked} cells agree: {boundary_ok}"
        ),
    ))
}

fn stability_boundary() -> mmhb::Result<(bool, usize)> {
    let game = QuadraticGame::new(
        Matrix::from_element(1, 1, 1.0),
        Matrix::zeros(0, 0),
        Matrix::zeros(1, 0),
    )?;
    let opts = RunOptions {
        record_stride: 1_000_000,
        ..Default::default()
    };
    let (mut ok, mut checked) = (true, 0);
    for i in 0..20 {
        let beta = 0.025 + 0.95 * i as f64 / 19.0;
        for k in 0..20 {
            let alpha = 0.1 + 3.9 * k as f64 / 19.0;
            if (alpha - (2.0 + 2.0 * beta)).abs() < 0.05 {
                continue;
            }
            let p = HBParams::new(alpha, beta, Scheme::Simultaneous)?;
            let t = run_with(&game, &p, &dvector![1.0], &Vector::zeros(0), 20_000, &opts)?;
            let converged = !t.diverged() && t.last().norm() < 1e-8;
            ok &= converged == min_hb_stability(alpha, beta, 1.0);
            checked += 1;
        }
    }
    Ok((ok, checked))
}

// ---------------------------------------------------------------- Adam

fn adam_bounded() -> Check {
    let game = BuiltinGame::LimitCycle2D;
    let adam = AdamParams::new(1e-3, -0.5, 0.999, 1e-8)?;
    let mut parts = Vec::new();
    let mut ok = true;
    for scheme in Scheme::BOTH {
        let t = run_adam(
            &game,
            &adam,
            scheme,
            &dvector![1.0],
            &dvector![1.0],
            100_000,
        )?;
        let peak = t.points().map(|p| p.max_abs()).fold(0.0, f64::max);
        ok &= !t.diverged() && t.len() == 100_001;
        parts.push(format!("{scheme} max |coord| {peak:.3}"));
    }
    Ok((
        ok,
        format!(
            "Adam β₁=−0.5, α=1e-3, 1e5 steps, no non-finite state — {}",
            parts.join(", ")
        ),
    ))
}

fn main() -> ExitCode {
    let outcomes = vec![
        criterion("bilinear-spectra", 1.0, bilinear_spectra),
        criterion("model-fidelity-o3", 120.0, model_fidelity),
        criterion("theorem-4.1", 60.0, || theorem(1.0, theorem_41_on)),
        criterion("theorem-4.4", 60.0, || theorem(1.0, theorem_44_on)),
        criterion("theorem-4.5", 10.0, alt_prediction),
        criterion("example-i1", 1.0, example_i1),
        criterion("appendix-h-rate-race", 30.0, appendix_h),
        criterion("implicit-regularization", 300.0, implicit_regularization),
        criterion("property-suites", f64::INFINITY, property_suites),
        criterion("adam-negative-beta1", f64::INFINITY, adam_bounded),
    ];
    // α=1 games never satisfy |Im λ| > |Re λ|; the same checks on α=0.01
    diagnostic("theorem-4.1 on α=0.01 games", theorem(0.01, theorem_41_on));
    diagnostic("theorem-4.4 on α=0.01 games", theorem(0.01, theorem_44_on));

    let passed = outcomes.iter().filter(|o| o.pass).count();
    println!("acceptance: {passed}/{} PASS", outcomes.len());
    let unexpected: Vec<&str> = outcomes
        .iter()
        .filter(|o| o.pass == EXPECTED_FAIL.contains(&o.name))
        .map(|o| o.name)
        .collect();
    if unexpected.is_empty() {
        println!(
            "outcomes match expectation (documented failures: {})",
            EXPECTED_FAIL.join(", ")
        );
        ExitCode::SUCCESS
    } else {
        println!("unexpected outcome for: {}", unexpected.join(", "));
        ExitCode::FAILURE
    }
}
