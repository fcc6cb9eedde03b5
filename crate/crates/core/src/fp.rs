//! Fractional-programming updates for the continuous variables and the
//! full alternating iteration.
//!
//! One iteration runs the SINR-auxiliary update, the quadratic-transform
//! auxiliary update, the beamformer update (multiplier by bisection), and
//! then the joint schedule/beam reassignment from [`crate::assignment`].
//! Every step is a block maximization of an objective that upper-bounds or
//! equals `f0`, so the traced `f0` never decreases.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::assignment::schedule_update;
use crate::config::PowerMode;
use crate::linalg::{bisect_multiplier, HermitianSystem};
use crate::model::{
    inner, link_power, norm_sqr, objective_f0, BeamformerSet, Outcome, PowerCheck, Schedule,
    Weights,
};
use crate::network::{ChannelTensor, NoiseModel};
use crate::trace::Trace;

/// SINR auxiliaries `gamma`, quadratic-transform auxiliaries `y` (both
/// indexed by `Dims::user_band`) and the power multipliers of the last
/// beamformer update.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxState {
    pub gamma: Vec<f64>,
    pub y: Vec<Complex64>,
    pub mu: Vec<f64>,
}

/// `gamma(k, b, f)` set to the current SINR; zero for unscheduled users.
pub fn update_gamma(
    schedule: &Schedule,
    beams: &BeamformerSet,
    channels: &ChannelTensor,
    noise: &NoiseModel,
) -> Vec<f64> {
    crate::model::all_sinr(schedule, beams, channels, noise)
}

/// `y = sqrt(w (1 + gamma)) u v^H h / zeta` with `zeta` the full received
/// power (own signal included) plus noise.
pub fn update_y(
    schedule: &Schedule,
    beams: &BeamformerSet,
    gamma: &[f64],
    channels: &ChannelTensor,
    noise: &NoiseModel,
    weights: &Weights,
) -> Vec<Complex64> {
    let d = channels.dims();
    let mut y = vec![Complex64::new(0.0, 0.0); d.num_users() * d.bands];
    for f in 0..d.bands {
        for b in 0..d.cells {
            for &k in schedule.users(b, f) {
                let i = d.user_band(b, k, f);
                let zeta = link_power(b, k, f, schedule, beams, channels, noise).total();
                let amp = (weights.get(b, k) * (1.0 + gamma[i])).sqrt();
                // v^H h = conj(h^H v)
                let vh = inner(channels.get(b, k, b, f), beams.get(b, k, f)).conj();
                y[i] = vh * (amp / zeta);
            }
        }
    }
    y
}

/// `sum w [log(1 + gamma) - gamma] + sum w (1 + gamma) u |h^H v|^2 / zeta`.
pub fn f_r(
    schedule: &Schedule,
    beams: &BeamformerSet,
    gamma: &[f64],
    channels: &ChannelTensor,
    noise: &NoiseModel,
    weights: &Weights,
) -> f64 {
    let d = channels.dims();
    let mut total = 0.0;
    for f in 0..d.bands {
        for b in 0..d.cells {
            for k in 0..d.users_per_cell {
                let g = gamma[d.user_band(b, k, f)];
                let w = weights.get(b, k);
                total += w * (g.ln_1p() - g);
                if schedule.is_scheduled(b, k, f) {
                    let lp = link_power(b, k, f, schedule, beams, channels, noise);
                    total += w * (1.0 + g) * lp.signal / lp.total();
                }
            }
        }
    }
    total
}

/// Quadratic-transform objective
/// `sum w [log(1 + gamma) - gamma] + 2 Re{y* sqrt(w(1+gamma)) u v^H h} - |y|^2 zeta`.
#[allow(clippy::too_many_arguments)]
pub fn f_q(
    schedule: &Schedule,
    beams: &BeamformerSet,
    gamma: &[f64],
    y: &[Complex64],
    channels: &ChannelTensor,
    noise: &NoiseModel,
    weights: &Weights,
) -> f64 {
    let d = channels.dims();
    let mut total = 0.0;
    for f in 0..d.bands {
        for b in 0..d.cells {
            for k in 0..d.users_per_cell {
                let i = d.user_band(b, k, f);
                let g = gamma[i];
                let w = weights.get(b, k);
                total += w * (g.ln_1p() - g);
                let lp = link_power(b, k, f, schedule, beams, channels, noise);
                total -= y[i].norm_sqr() * lp.total();
                if schedule.is_scheduled(b, k, f) {
                    let vh = inner(channels.get(b, k, b, f), beams.get(b, k, f)).conj();
                    total += 2.0 * (y[i].conj() * vh).re * (w * (1.0 + g)).sqrt();
                }
            }
        }
    }
    total
}

#[derive(Debug, Clone)]
pub struct BeamUpdate {
    pub beams: BeamformerSet,
    pub checks: Vec<PowerCheck>,
}

impl BeamUpdate {
    pub fn multipliers(&self) -> Vec<f64> {
        self.checks.iter().map(|c| c.mu).collect()
    }
}

/// Assemble the regularized system of BS `b` on band `f` shared by all its
/// scheduled users: `A = sum |q|^2 h h^H` over every scheduled user of the
/// network (channel from BS `b`), right-hand sides `c_k` for the users of
/// `b` in schedule order.
pub(crate) fn bs_band_system<Q, R>(
    b: usize,
    f: usize,
    schedule: &Schedule,
    channels: &ChannelTensor,
    quad_weight: Q,
    rhs: R,
) -> HermitianSystem
where
    Q: Fn(usize, usize) -> f64,
    R: Fn(usize) -> Vec<Complex64>,
{
    let d = channels.dims();
    let m = d.antennas;
    let mut a = DMatrix::<Complex64>::zeros(m, m);
    for bb in 0..d.cells {
        for &kk in schedule.users(bb, f) {
            let q = quad_weight(bb, kk);
            if q == 0.0 {
                continue;
            }
            let h = channels.get(bb, kk, b, f);
            for r in 0..m {
                let hr = h[r] * q;
                for c in 0..m {
                    a[(r, c)] += hr * h[c].conj();
                }
            }
        }
    }
    let rhs: Vec<DVector<Complex64>> = schedule
        .users(b, f)
        .iter()
        .map(|&k| DVector::from_vec(rhs(k)))
        .collect();
    HermitianSystem::new(a, &rhs)
}

/// Solve every BS's power-constrained quadratic program given the systems
/// of each (b, f), writing the beams of scheduled users.
pub(crate) fn solve_power_groups(
    systems: Vec<Vec<HermitianSystem>>,
    schedule: &Schedule,
    power_watts: f64,
    mode: PowerMode,
) -> BeamUpdate {
    let d = schedule.dims();
    let mut beams = BeamformerSet::zeros(d);
    let mut checks = Vec::new();
    for (b, per_band) in systems.into_iter().enumerate() {
        let groups: Vec<(Option<usize>, Vec<usize>)> = match mode {
            PowerMode::Joint => vec![(None, (0..d.bands).collect())],
            PowerMode::PerBand => (0..d.bands).map(|f| (Some(f), vec![f])).collect(),
        };
        for (band, members) in groups {
            let budget = power_watts * members.len() as f64;
            let group: Vec<&HermitianSystem> = members.iter().map(|&f| &per_band[f]).collect();
            let mu = bisect_multiplier(&group, budget);
            let mut used = 0.0;
            for (&f, sys) in members.iter().zip(group) {
                for (&k, v) in schedule.users(b, f).iter().zip(sys.solve(mu)) {
                    let v: Vec<Complex64> = v.iter().copied().collect();
                    used += norm_sqr(&v);
                    beams.set(b, k, f, &v);
                }
            }
            checks.push(PowerCheck {
                bs: b,
                band,
                mu,
                used,
                budget,
            });
        }
    }
    BeamUpdate { beams, checks }
}

/// Beamformer update
/// `v = sqrt(w (1 + gamma)) u (sum u' |y'|^2 h'' h''^H + mu_b I)^{-1} y* h`
/// with `mu_b` from bisection on the joint (`F P_T`) or per-band (`P_T`)
/// budget. Unscheduled users get zero beams.
#[allow(clippy::too_many_arguments)]
pub fn update_v(
    schedule: &Schedule,
    gamma: &[f64],
    y: &[Complex64],
    channels: &ChannelTensor,
    weights: &Weights,
    power_watts: f64,
    mode: PowerMode,
) -> BeamUpdate {
    let d = channels.dims();
    let systems: Vec<Vec<HermitianSystem>> = (0..d.cells)
        .map(|b| {
            (0..d.bands)
                .map(|f| {
                    bs_band_system(
                        b,
                        f,
                        schedule,
                        channels,
                        |bb, kk| y[d.user_band(bb, kk, f)].norm_sqr(),
                        |k| {
                            let i = d.user_band(b, k, f);
                            let coeff = y[i].conj() * (weights.get(b, k) * (1.0 + gamma[i])).sqrt();
                            channels.get(b, k, b, f).iter().map(|h| h * coeff).collect()
                        },
                    )
                })
                .collect()
        })
        .collect();
    solve_power_groups(systems, schedule, power_watts, mode)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InitPolicy {
    /// Users with the highest interference-free weighted rate.
    #[default]
    Best,
    /// Users with the lowest interference-free weighted rate.
    Worst,
}

/// Schedule `M` users per (b, f) ranked by `w log(1 + |h|^2 (P_T/M) / sigma^2)`
/// and give each a matched filter with power `P_T / M`.
pub fn initialize(
    channels: &ChannelTensor,
    noise: &NoiseModel,
    weights: &Weights,
    power_watts: f64,
    policy: InitPolicy,
) -> (Schedule, BeamformerSet) {
    let d = channels.dims();
    let per_user = power_watts / d.antennas as f64;
    let mut schedule = Schedule::empty(d);
    for b in 0..d.cells {
        for f in 0..d.bands {
            let mut scored: Vec<(usize, f64)> = (0..d.users_per_cell)
                .map(|k| {
                    let g = norm_sqr(channels.get(b, k, b, f));
                    (
                        k,
                        weights.get(b, k) * (g * per_user / noise.get(b, k, f)).ln_1p(),
                    )
                })
                .collect();
            match policy {
                InitPolicy::Best => scored.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0))),
                InitPolicy::Worst => scored.sort_by(|x, y| x.1.total_cmp(&y.1).then(x.0.cmp(&y.0))),
            }
            let chosen = scored
                .into_iter()
                .take(d.antennas)
                .map(|(k, _)| k)
                .collect();
            schedule
                .set(b, f, chosen)
                .expect("at most M distinct users");
        }
    }
    let beams = crate::baselines::matched_filter_beams(&schedule, channels, power_watts);
    (schedule, beams)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FpOptions {
    pub iterations: usize,
    /// Stop early once the relative `f0` gain of an iteration drops below
    /// this value.
    pub rel_tolerance: Option<f64>,
    pub mode: PowerMode,
}

impl Default for FpOptions {
    fn default() -> Self {
        FpOptions {
            iterations: 15,
            rel_tolerance: Some(1e-4),
            mode: PowerMode::Joint,
        }
    }
}

pub type FpOutcome = Outcome;

/// Alternate the gamma, y and v updates with the optimal per-cell
/// reassignment until the iteration cap (or the relative-gain stop).
#[allow(clippy::too_many_arguments)]
pub fn fp_iterate(
    schedule: Schedule,
    beams: BeamformerSet,
    channels: &ChannelTensor,
    noise: &NoiseModel,
    weights: &Weights,
    power_watts: f64,
    opts: &FpOptions,
) -> FpOutcome {
    let mut schedule = schedule;
    let mut beams = beams;
    let mut trace = Trace::default();
    let mut power_checks = Vec::new();
    let mut prev = objective_f0(&schedule, &beams, channels, noise, weights);
    trace.push(0, prev, beams.powers());
    for it in 1..=opts.iterations {
        let gamma = update_gamma(&schedule, &beams, channels, noise);
        let y = update_y(&schedule, &beams, &gamma, channels, noise, weights);
        let update = update_v(
            &schedule,
            &gamma,
            &y,
            channels,
            weights,
            power_watts,
            opts.mode,
        );
        power_checks.push(update.checks);
        let (s, v) = schedule_update(
            &schedule,
            &update.beams,
            channels,
            noise,
            weights,
            power_watts,
        );
        schedule = s;
        beams = v;
        let f0 = objective_f0(&schedule, &beams, channels, noise, weights);
        trace.push(it, f0, beams.powers());
        let converged = opts
            .rel_tolerance
            .is_some_and(|tol| f0 - prev < tol * prev.abs());
        prev = f0;
        if converged {
            break;
        }
    }
    Outcome {
        schedule,
        beams,
        trace,
        power_checks,
    }
}

/// Initialize with `policy` and run [`fp_iterate`].
pub fn run_proposed(
    channels: &ChannelTensor,
    noise: &NoiseModel,
    weights: &Weights,
    power_watts: f64,
    policy: InitPolicy,
    opts: &FpOptions,
) -> FpOutcome {
    let (s, v) = initialize(channels, noise, weights, power_watts, policy);
    fp_iterate(s, v, channels, noise, weights, power_watts, opts)
}
