//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

mod common;

use std::time::Instant;

use common::*;
use fpsched::assignment::{hungarian, ScoreMatrix};
use fpsched::config::PowerMode;
use fpsched::fp::{f_q, f_r, run_proposed, update_gamma, update_y, FpOptions, InitPolicy};
use fpsched::simulator::{joint_vs_perband, power_sweep, run_experiment, ExperimentConfig, Scheme};
use fpsched::Outcome;
use rand::Rng;

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

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// 50 seeds, 7 cells, M=2, K=5, F in {1, 3}, 15 iterations. Returns the
/// outcomes alongside so criterion 4 can inspect the same runs.
fn convergence_runs() -> Vec<(Instance, Outcome, PowerMode)> {
    let mut runs = Vec::new();
    for f in [1, 3] {
        for seed in 0..50u64 {
            let inst = instance(seed, 7, 2, 5, f);
            let w = random_weights(&mut rng(seed), inst.dims());
            let opts = FpOptions {
                iterations: 15,
                rel_tolerance: None,
                mode: PowerMode::Joint,
            };
            let out = run_proposed(
                &inst.channels,
                &inst.noise,
                &w,
                inst.cfg.power_watts,
                InitPolicy::Best,
                &opts,
            );
            let oracle = oracle_f0(&inst, &out.schedule, &out.beams, &w);
            assert!(
                rel_close(oracle, out.trace.last_f0().unwrap(), 1e-12),
                "trace disagrees with oracle f0: {oracle} vs {:?}",
                out.trace.last_f0()
            );
            runs.push((inst, out, PowerMode::Joint));
        }
    }
    runs
}

fn criterion_1(runs: &[(Instance, Outcome, PowerMode)]) -> Verdict {
    let mut worst = f64::INFINITY;
    let mut bad = 0;
    for (_, out, _) in runs {
        let f = out.trace.objectives();
        assert_eq!(f.len(), 16);
        for p in f.windows(2) {
            worst = worst.min((p[1] - p[0]) / p[0].abs());
            if p[1] < p[0] * (1.0 - 1e-9) {
                bad += 1;
            }
        }
    }
    verdict(
        bad == 0,
        format!(
            "{} runs, {bad} decreasing steps, smallest relative step {worst:.2e}",
            runs.len()
        ),
    )
}

fn criterion_2() -> Verdict {
    let mut r = rng(2);
    let mut failures = 0;
    let mut checked = 0;
    for rows in 1..=6 {
        for cols in 1..=rows {
            for trial in 0..1000 {
                let integer = trial % 2 == 0;
                let m: Vec<Vec<f64>> = (0..rows)
                    .map(|_| {
                        (0..cols)
                            .map(|_| {
                                if integer {
                                    r.random_range(0..20) as f64
                                } else {
                                    r.random_range(0.0..10.0)
                                }
                            })
                            .collect()
                    })
                    .collect();
                let (a, v) = hungarian(&ScoreMatrix::from_rows(&m).unwrap()).unwrap();
                let brute = brute_force_lsap(&m);
                let total: f64 = a.row_of_col.iter().enumerate().map(|(j, &i)| m[i][j]).sum();
                let ok = if integer {
                    v == brute && total == brute
                } else {
                    (v - brute).abs() <= 1e-12 * brute.max(1.0)
                        && (total - brute).abs() <= 1e-12 * brute.max(1.0)
                };
                failures += usize::from(!ok);
                checked += 1;
            }
        }
    }
    verdict(failures == 0, format!("{checked} matrices up to 6x6 (500 integer + 500 real per shape), {failures} mismatches"))
}

fn criterion_3() -> Verdict {
    let mut worst: f64 = 0.0;
    for seed in 0..100u64 {
        let f = 1 + (seed as usize % 3);
        let inst = instance(seed, 7, 2, 5, f);
        let mut r = rng(seed + 77);
        let (s, v) = random_state(&mut r, inst.dims(), inst.cfg.power_watts);
        let w = random_weights(&mut r, inst.dims());
        let f0 = oracle_f0(&inst, &s, &v, &w);
        let gamma = update_gamma(&s, &v, &inst.channels, &inst.noise);
        let fr = f_r(&s, &v, &gamma, &inst.channels, &inst.noise, &w);
        let y = update_y(&s, &v, &gamma, &inst.channels, &inst.noise, &w);
        let fq = f_q(&s, &v, &gamma, &y, &inst.channels, &inst.noise, &w);
        worst = worst
            .max((fr - f0).abs() / f0.abs())
            .max((fq - fr).abs() / fr.abs());
    }
    verdict(
        worst <= 1e-9,
        format!("100 random states, worst relative gap {worst:.2e}"),
    )
}

fn criterion_4(runs: &[(Instance, Outcome, PowerMode)]) -> Verdict {
    let mut bad = 0;
    let mut n = 0;
    let mut worst_excess: f64 = 0.0;
    let mut worst_slack: f64 = 0.0;
    for (inst, out, mode) in runs {
        let d = inst.dims();
        for checks in &out.power_checks {
            for c in checks {
                n += 1;
                worst_excess = worst_excess.max(c.used / c.budget - 1.0);
                worst_slack = worst_slack.max(c.mu * c.slack().max(0.0) / c.budget);
                bad += usize::from(!c.satisfied(1e-6, 1e-6));
            }
        }
        for b in 0..d.cells {
            let (band, budget) = match mode {
                PowerMode::Joint => (None, d.bands as f64 * inst.cfg.power_watts),
                PowerMode::PerBand => (Some(0), inst.cfg.power_watts),
            };
            if oracle_bs_power(&out.beams, d, b, band) > budget * (1.0 + 1e-6) {
                bad += 1;
            }
        }
    }
    verdict(
        bad == 0,
        format!("{n} constraint checks, {bad} violations, worst excess {worst_excess:.2e}, worst mu*slack/budget {worst_slack:.2e}"),
    )
}

fn criterion_5() -> Verdict {
    let cfg = ExperimentConfig::default();
    let u: Vec<f64> = Scheme::ALL
        .iter()
        .map(|&s| run_experiment(&cfg, s).unwrap().metrics.sumlog)
        .collect();
    let [mf, zf, greedy, multicell, proposed] = [u[0], u[1], u[2], u[3], u[4]];
    let pass = mf < zf && zf < greedy && greedy <= multicell && multicell <= proposed;
    verdict(
        pass,
        format!(
            "{} drops x {} slots: mf {mf:.3} < zf {zf:.3} < greedy {greedy:.3} <= multicell {multicell:.3} <= proposed {proposed:.3}",
            cfg.drops, cfg.slots
        ),
    )
}

fn criterion_6() -> Verdict {
    let cfg = ExperimentConfig {
        slots: 10,
        ..Default::default()
    };
    let pts = [20.0, 30.0, 40.0, 50.0, 60.0, 70.0];
    let rows = power_sweep(&cfg, &[Scheme::MulticellWmmse, Scheme::Proposed], &pts).unwrap();
    let series = |s: Scheme| {
        rows.iter()
            .filter(|r| r.scheme == s)
            .map(|r| r.sumrate_mbps)
            .collect::<Vec<_>>()
    };
    let prop = series(Scheme::Proposed);
    let wmmse = series(Scheme::MulticellWmmse);
    let monotone = prop.windows(2).all(|w| w[1] >= w[0]);
    let dominates = pts
        .iter()
        .zip(prop.iter().zip(&wmmse))
        .filter(|(p, _)| **p >= 40.0)
        .all(|(_, (a, b))| a >= b);
    let fmt = |v: &[f64]| {
        v.iter()
            .map(|x| format!("{x:.1}"))
            .collect::<Vec<_>>()
            .join("/")
    };
    verdict(
        monotone && dominates,
        format!(
            "proposed {} vs multicell {} Mbps over 20..70 dBm",
            fmt(&prop),
            fmt(&wmmse)
        ),
    )
}

fn criterion_7() -> Verdict {
    let mut cfg = ExperimentConfig::default();
    cfg.network.bands = 3;
    let c = joint_vs_perband(&cfg).unwrap();
    let rel = c.relative_sumlog_delta();
    verdict(
        rel < 0.05,
        format!(
            "F=3 joint {:.3} vs per-band {:.3}, relative delta {rel:.4}",
            c.joint.sumlog, c.per_band.sumlog
        ),
    )
}

fn criterion_8() -> Verdict {
    let mut cfg = ExperimentConfig {
        drops: 1,
        slots: 3,
        ..Default::default()
    };
    cfg.network.antennas = 4;
    cfg.network.users_per_cell = 40;
    let t = |s| run_experiment(&cfg, s).unwrap().timing.mean_iteration_ms;
    let prop = t(Scheme::Proposed);
    let wmmse = t(Scheme::MulticellWmmse);
    let ratio = wmmse / prop;
    verdict(
        ratio > 2.0,
        format!(
            "M=4, K=40: multicell {wmmse:.3} ms / proposed {prop:.3} ms per iteration = {ratio:.2}"
        ),
    )
}

fn criterion_9() -> Verdict {
    let mut worst: f64 = 0.0;
    for seed in 0..100u64 {
        let inst = instance(seed, 7, 3, 6, 2);
        let d = inst.dims();
        let mut r = rng(seed + 9);
        let (s, v) = random_state(&mut r, d, inst.cfg.power_watts);
        let cell = r.random_range(0..d.cells);
        let f = r.random_range(0..d.bands);
        // Move the beams of `cell` onto a random injective choice of users.
        let beams: Vec<Vec<_>> = s
            .users(cell, f)
            .iter()
            .map(|&k| v.get(cell, k, f).to_vec())
            .collect();
        let new_users = rand::seq::index::sample(&mut r, d.users_per_cell, beams.len()).into_vec();
        let mut s2 = s.clone();
        let mut v2 = v.clone();
        for &k in s.users(cell, f) {
            v2.clear(cell, k, f);
        }
        for (k, beam) in new_users.iter().zip(&beams) {
            v2.set(cell, *k, f, beam);
        }
        s2.set(cell, f, new_users).unwrap();
        for b in (0..d.cells).filter(|&b| b != cell) {
            for k in 0..d.users_per_cell {
                let z1 = oracle_zeta(&inst, &s, &v, b, k, f);
                let z2 = oracle_zeta(&inst, &s2, &v2, b, k, f);
                worst = worst.max((z1 - z2).abs() / z1);
                let lib = fpsched::assignment::zeta(b, k, f, &s2, &v2, &inst.channels, &inst.noise);
                worst = worst.max((lib - z1).abs() / z1);
            }
        }
    }
    verdict(
        worst <= 1e-12,
        format!("100 in-cell permutations, worst relative out-of-cell zeta change {worst:.2e}"),
    )
}

fn criterion_10() -> Verdict {
    let readme = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../README.md"))
        .unwrap_or_default();
    let section = readme
        .split("\n## ")
        .find(|s| s.starts_with("Not reproduced"))
        .unwrap_or("")
        .to_ascii_lowercase();
    let needles = ["interior-point", "sqp", "absolute", "sum-log utilit"];
    let missing: Vec<&str> = needles
        .iter()
        .copied()
        .filter(|n| !section.contains(n))
        .collect();
    verdict(
        missing.is_empty(),
        format!("README 'Not reproduced' section; missing topics: {missing:?}"),
    )
}

fn main() {
    let started = Instant::now();
    let runs = convergence_runs();
    type Check<'a> = Box<dyn Fn() -> Verdict + 'a>;
    let criteria: Vec<(&str, Check)> = vec![
        ("monotone convergence", Box::new(|| criterion_1(&runs))),
        ("assignment exactness", Box::new(criterion_2)),
        ("reformulation equivalences", Box::new(criterion_3)),
        (
            "power feasibility and slackness",
            Box::new(|| criterion_4(&runs)),
        ),
        ("scheme ordering", Box::new(criterion_5)),
        ("power sweep", Box::new(criterion_6)),
        ("joint vs per-band", Box::new(criterion_7)),
        ("complexity trend", Box::new(criterion_8)),
        ("fixed out-of-cell interference", Box::new(criterion_9)),
        ("non-reproduced results documented", Box::new(criterion_10)),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let v = run();
        failed += usize::from(!v.pass);
        println!(
            "criterion {:>2} {}: {} ({}; {:.1}s)",
            i + 1,
            if v.pass { "PASS" } else { "FAIL" },
            name,
            v.detail,
            t.elapsed().as_secs_f64()
        );
    }
    println!(
        "{} of {} criteria passed in {:.1}s",
        criteria.len() - failed,
        criteria.len(),
        started.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
