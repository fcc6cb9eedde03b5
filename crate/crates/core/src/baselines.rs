//! Comparison schemes: matched filtering and zero-forcing with round-robin
//! scheduling and equal power, greedy-scheduled WMMSE, and multicell WMMSE
//! over all users.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::assignment::{greedy_assign, reassign};
use crate::config::PowerMode;
use crate::fp::{bs_band_system, solve_power_groups};
use crate::model::{
    inner, link_power, norm_sqr, objective_f0, BeamformerSet, Outcome, Schedule, Weights,
};
use crate::network::{ChannelTensor, NoiseModel};
use crate::trace::Trace;

/// Beam power below this fraction of `P_T` marks a multicell-WMMSE user as
/// implicitly unscheduled.
pub const SURVIVOR_FRACTION: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineKind {
    MatchedFilter,
    ZeroForcing,
    GreedyWmmse,
    MulticellWmmse,
}

/// Users `(slot * M + j) mod K`, `j < M`.
pub fn round_robin_schedule(slot: usize, users_per_cell: usize, antennas: usize) -> Vec<usize> {
    let start = (slot * antennas) % users_per_cell;
    (0..antennas.min(users_per_cell))
        .map(|j| (start + j) % users_per_cell)
        .collect()
}

/// Round-robin schedule for every (b, f); band `f` uses cycle index
/// `slot * F + f` so bands serve different groups.
pub fn round_robin(dims: crate::network::Dims, slot: usize) -> Schedule {
    let mut s = Schedule::empty(dims);
    for b in 0..dims.cells {
        for f in 0..dims.bands {
            let users =
                round_robin_schedule(slot * dims.bands + f, dims.users_per_cell, dims.antennas);
            s.set(b, f, users)
                .expect("round robin picks distinct users");
        }
    }
    s
}

/// `v = sqrt(P_T / M) h / |h|` on the own-cell channel of every scheduled
/// user; a zero channel leaves the user with a zero beam.
pub fn matched_filter_beams(
    schedule: &Schedule,
    channels: &ChannelTensor,
    power_watts: f64,
) -> BeamformerSet {
    let d = channels.dims();
    let amp = (power_watts / d.antennas as f64).sqrt();
    let mut beams = BeamformerSet::zeros(d);
    for b in 0..d.cells {
        for f in 0..d.bands {
            for &k in schedule.users(b, f) {
                let h = channels.get(b, k, b, f);
                let norm = norm_sqr(h).sqrt();
                if norm > 0.0 {
                    let v: Vec<Complex64> = h.iter().map(|z| z * (amp / norm)).collect();
                    beams.set(b, k, f, &v);
                }
            }
        }
    }
    beams
}

/// Own-cell channels of `users` as the columns of an `M x n` matrix.
fn channel_columns(
    channels: &ChannelTensor,
    b: usize,
    f: usize,
    users: &[usize],
) -> DMatrix<Complex64> {
    let m = channels.dims().antennas;
    DMatrix::from_fn(m, users.len(), |a, i| channels.get(b, users[i], b, f)[a])
}

/// Squared residual of each column after projection onto the span of the others.
fn projection_residuals(g: &DMatrix<Complex64>) -> Vec<f64> {
    (0..g.ncols())
        .map(|i| {
            let col = g.column(i).into_owned();
            let others = g.clone().remove_column(i);
            if others.ncols() == 0 {
                return col.norm_squared();
            }
            let eps = 1e-12 * others.norm();
            let pinv = others.clone().pseudo_inverse(eps).expect("svd converges");
            let proj = &others * (&pinv * &col);
            (col - proj).norm_squared()
        })
        .collect()
}

/// Columns of the pseudo-inverse of the stacked own-cell channels, each
/// scaled to power `P_T / M`. A (near) rank-deficient stack loses its most
/// collinear user until the rest have full row rank.
pub fn zero_forcing_beams(
    schedule: &Schedule,
    channels: &ChannelTensor,
    power_watts: f64,
) -> (Schedule, BeamformerSet) {
    let d = channels.dims();
    let amp = (power_watts / d.antennas as f64).sqrt();
    let mut out_schedule = schedule.clone();
    let mut beams = BeamformerSet::zeros(d);
    for b in 0..d.cells {
        for f in 0..d.bands {
            let mut users: Vec<usize> = schedule
                .users(b, f)
                .iter()
                .copied()
                .filter(|&k| norm_sqr(channels.get(b, k, b, f)) > 0.0)
                .collect();
            loop {
                if users.is_empty() {
                    break;
                }
                let g = channel_columns(channels, b, f, &users);
                let residuals = projection_residuals(&g);
                let (worst, &worst_res) = residuals
                    .iter()
                    .enumerate()
                    .min_by(|x, y| x.1.total_cmp(y.1))
                    .expect("non-empty");
                let norm = g.column(worst).norm_squared();
                if users.len() <= d.antennas && worst_res > 1e-10 * norm {
                    break;
                }
                users.remove(worst);
            }
            if !users.is_empty() {
                // pinv(G^H) = G (G^H G)^{-1}
                let g = channel_columns(channels, b, f, &users);
                let inv = (g.adjoint() * &g)
                    .try_inverse()
                    .expect("independent columns");
                let v_all = &g * inv;
                for (j, &k) in users.iter().enumerate() {
                    let col = v_all.column(j);
                    let scale = amp / col.norm();
                    let v: Vec<Complex64> = col.iter().map(|z| z * scale).collect();
                    beams.set(b, k, f, &v);
                }
            }
            out_schedule
                .set(b, f, users)
                .expect("subset of a valid schedule");
        }
    }
    (out_schedule, beams)
}

/// One WMMSE transmit update for a fixed schedule: MMSE receivers
/// `a = h^H v / zeta`, MSE weights `omega = zeta / I`, then
/// `v = w omega a (sum w' omega' |a'|^2 h h^H + mu I)^{-1} h` with `mu` by
/// bisection on the BS budget.
fn wmmse_step(
    schedule: &Schedule,
    beams: &BeamformerSet,
    channels: &ChannelTensor,
    noise: &NoiseModel,
    weights: &Weights,
    power_watts: f64,
    mode: PowerMode,
) -> crate::fp::BeamUpdate {
    let d = channels.dims();
    let n = d.num_users() * d.bands;
    let mut receiver = vec![Complex64::new(0.0, 0.0); n];
    let mut mse_weight = vec![0.0; n];
    for f in 0..d.bands {
        for b in 0..d.cells {
            for &k in schedule.users(b, f) {
                let i = d.user_band(b, k, f);
                let lp = link_power(b, k, f, schedule, beams, channels, noise);
                receiver[i] = inner(channels.get(b, k, b, f), beams.get(b, k, f)) / lp.total();
                mse_weight[i] = lp.total() / lp.interference;
            }
        }
    }
    let systems = (0..d.cells)
        .map(|b| {
            (0..d.bands)
                .map(|f| {
                    bs_band_system(
                        b,
                        f,
                        schedule,
                        channels,
                        |bb, kk| {
                            let i = d.user_band(bb, kk, f);
                            weights.get(bb, kk) * mse_weight[i] * receiver[i].norm_sqr()
                        },
                        |k| {
                            let i = d.user_band(b, k, f);
                            let coeff = receiver[i] * (weights.get(b, k) * mse_weight[i]);
                            channels.get(b, k, b, f).iter().map(|h| h * coeff).collect()
                        },
                    )
                })
                .collect()
        })
        .collect();
    solve_power_groups(systems, schedule, power_watts, mode)
}

/// Run `iterations` WMMSE passes on a fixed schedule. The weighted sum
/// rate never decreases from pass to pass.
#[allow(clippy::too_many_arguments)]
pub fn wmmse_iterate(
    schedule: &Schedule,
    beams: BeamformerSet,
    channels: &ChannelTensor,
    noise: &NoiseModel,
    weights: &Weights,
    power_watts: f64,
    mode: PowerMode,
    iterations: usize,
) -> Outcome {
    let mut beams = beams;
    let mut trace = Trace::default();
    let mut power_checks = Vec::new();
    trace.push(
        0,
        objective_f0(schedule, &beams, channels, noise, weights),
        beams.powers(),
    );
    for it in 1..=iterations {
        let update = wmmse_step(
            schedule,
            &beams,
            channels,
            noise,
            weights,
            power_watts,
            mode,
        );
        beams = update.beams;
        power_checks.push(update.checks);
        trace.push(
            it,
            objective_f0(schedule, &beams, channels, noise, weights),
            beams.powers(),
        );
    }
    Outcome {
        schedule: schedule.clone(),
        beams,
        trace,
        power_checks,
    }
}

/// Multicell WMMSE result plus the implicit-schedule bookkeeping.
#[derive(Debug, Clone)]
pub struct MulticellOutcome {
    /// Schedule and beams after dropping near-zero users and truncating to
    /// `M` per (b, f); the trace is the all-user WMMSE trace.
    pub outcome: Outcome,
    /// Users per (b, f) above the survivor threshold before truncation,
    /// indexed `b * F + f`.
    pub survivors: Vec<usize>,
}

/// WMMSE with every user of every cell scheduled, initialized with equal
/// power `P_T / K` matched filters. Users whose final beam power is below
/// `SURVIVOR_FRACTION * P_T` are reported unscheduled; if more than `M`
/// remain in a (b, f), the `M` strongest are kept.
pub fn multicell_wmmse(
    channels: &ChannelTensor,
    noise: &NoiseModel,
    weights: &Weights,
    power_watts: f64,
    mode: PowerMode,
    iterations: usize,
) -> MulticellOutcome {
    let d = channels.dims();
    let all = Schedule::all_users(d);
    let init = matched_filter_beams(
        &all,
        channels,
        power_watts * d.antennas as f64 / d.users_per_cell as f64,
    );
    let relaxed = wmmse_iterate(
        &all,
        init,
        channels,
        noise,
        weights,
        power_watts,
        mode,
        iterations,
    );

    let threshold = SURVIVOR_FRACTION * power_watts;
    let mut schedule = Schedule::empty(d);
    let mut beams = BeamformerSet::zeros(d);
    let mut survivors = Vec::with_capacity(d.cells * d.bands);
    for b in 0..d.cells {
        for f in 0..d.bands {
            let mut alive: Vec<(usize, f64)> = (0..d.users_per_cell)
                .map(|k| (k, norm_sqr(relaxed.beams.get(b, k, f))))
                .filter(|&(_, p)| p >= threshold)
                .collect();
            survivors.push(alive.len());
            if alive.len() > d.antennas {
                log::debug!(
                    "multicell WMMSE: BS {b} band {f} keeps {} of {} powered users",
                    d.antennas,
                    alive.len()
                );
                alive.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
                alive.truncate(d.antennas);
                alive.sort_by_key(|&(k, _)| k);
            }
            for &(k, _) in &alive {
                beams.set(b, k, f, relaxed.beams.get(b, k, f));
            }
            schedule
                .set(b, f, alive.into_iter().map(|(k, _)| k).collect())
                .expect("at most M users");
        }
    }
    MulticellOutcome {
        outcome: Outcome {
            schedule,
            beams,
            trace: relaxed.trace,
            power_checks: relaxed.power_checks,
        },
        survivors,
    }
}

/// A random set of `M` users per (b, f) with equal-power matched filters.
pub fn random_initialization(
    channels: &ChannelTensor,
    power_watts: f64,
    seed: u64,
) -> (Schedule, BeamformerSet) {
    let d = channels.dims();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut schedule = Schedule::empty(d);
    for b in 0..d.cells {
        for f in 0..d.bands {
            let mut users = sample(&mut rng, d.users_per_cell, d.antennas).into_vec();
            users.sort_unstable();
            schedule.set(b, f, users).expect("distinct sample");
        }
    }
    let beams = matched_filter_beams(&schedule, channels, power_watts);
    (schedule, beams)
}

/// WMMSE alternated with greedy per-beam user selection, one WMMSE pass per
/// scheduling pass. Not monotone in general.
#[allow(clippy::too_many_arguments)]
pub fn greedy_wmmse(
    channels: &ChannelTensor,
    noise: &NoiseModel,
    weights: &Weights,
    power_watts: f64,
    mode: PowerMode,
    iterations: usize,
    seed: u64,
) -> Outcome {
    let (mut schedule, mut beams) = random_initialization(channels, power_watts, seed);
    let mut trace = Trace::default();
    let mut power_checks = Vec::new();
    trace.push(
        0,
        objective_f0(&schedule, &beams, channels, noise, weights),
        beams.powers(),
    );
    for it in 1..=iterations {
        let pass = wmmse_iterate(
            &schedule,
            beams,
            channels,
            noise,
            weights,
            power_watts,
            mode,
            1,
        );
        power_checks.extend(pass.power_checks);
        let (s, v) = reassign(
            &schedule,
            &pass.beams,
            channels,
            noise,
            weights,
            power_watts,
            |m| greedy_assign(m).expect("beams never outnumber users"),
        );
        schedule = s;
        beams = v;
        trace.push(
            it,
            objective_f0(&schedule, &beams, channels, noise, weights),
            beams.powers(),
        );
    }
    Outcome {
        schedule,
        beams,
        trace,
        power_checks,
    }
}
