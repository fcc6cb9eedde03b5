//! Multi-slot experiments with proportional-fair weights and the metrics
//! built on top of them.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{
    greedy_wmmse, matched_filter_beams, multicell_wmmse, round_robin, zero_forcing_beams,
};
use crate::config::{dbm_to_watts, NetworkConfig, PowerMode};
use crate::error::{Error, Result};
use crate::fp::{run_proposed, FpOptions, InitPolicy};
use crate::model::{objective_f0, user_rates_mbps, Outcome, Weights};
use crate::network::{
    build_topology, generate_channels, noise_power, ChannelTensor, Dims, NoiseModel,
};
use crate::trace::Trace;

/// Forgetting factor of the average-rate filter.
pub const PF_ALPHA: f64 = 0.05;
/// Rate floor (Mbps) used by the weight rule and the utility.
pub const RATE_FLOOR_MBPS: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    MatchedFilter,
    ZeroForcing,
    GreedyWmmse,
    MulticellWmmse,
    Proposed,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [
        Scheme::MatchedFilter,
        Scheme::ZeroForcing,
        Scheme::GreedyWmmse,
        Scheme::MulticellWmmse,
        Scheme::Proposed,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Scheme::MatchedFilter => "mf",
            Scheme::ZeroForcing => "zf",
            Scheme::GreedyWmmse => "greedy-wmmse",
            Scheme::MulticellWmmse => "multicell-wmmse",
            Scheme::Proposed => "proposed",
        }
    }

    pub fn is_iterative(self) -> bool {
        !matches!(self, Scheme::MatchedFilter | Scheme::ZeroForcing)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mf" | "matched-filter" => Ok(Scheme::MatchedFilter),
            "zf" | "zero-forcing" => Ok(Scheme::ZeroForcing),
            "greedy" | "greedy-wmmse" => Ok(Scheme::GreedyWmmse),
            "multicell" | "multicell-wmmse" | "wmmse" => Ok(Scheme::MulticellWmmse),
            "proposed" | "fp" => Ok(Scheme::Proposed),
            other => Err(Error::InvalidConfig(format!("unknown scheme '{other}'"))),
        }
    }
}

/// Splitmix64 finalizer; derives independent stream seeds from the root.
pub fn derive_seed(root: u64, a: u64, b: u64) -> u64 {
    let mut z =
        root ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the user drop `drop`.
pub fn drop_seed(root: u64, drop: usize) -> u64 {
    derive_seed(root, drop as u64, 0)
}

/// Seed of the fading realization of `slot` in `drop`.
pub fn slot_seed(root: u64, drop: usize, slot: usize) -> u64 {
    derive_seed(root, drop as u64, slot as u64 + 1)
}

/// Seed of the random initial schedule of greedy WMMSE.
fn greedy_seed(root: u64, drop: usize, slot: usize) -> u64 {
    derive_seed(root ^ 0x6752_6565_6479, drop as u64, slot as u64 + 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PfState {
    pub alpha: f64,
    /// Average rate per user, Mbps; empty until the first slot.
    pub rbar: Vec<f64>,
}

impl PfState {
    pub fn new(alpha: f64) -> Self {
        assert!(
            alpha > 0.0 && alpha < 1.0,
            "forgetting factor must lie in (0, 1)"
        );
        PfState {
            alpha,
            rbar: Vec::new(),
        }
    }

    pub fn is_initialized(&self) -> bool {
        !self.rbar.is_empty()
    }

    /// `w = 1 / max(Rbar, floor)`; all ones before the first slot.
    pub fn weights(&self, dims: Dims) -> Weights {
        if !self.is_initialized() {
            return Weights::uniform(dims, 1.0);
        }
        let w = self
            .rbar
            .iter()
            .map(|r| 1.0 / r.max(RATE_FLOOR_MBPS))
            .collect();
        Weights::from_vec(dims, w).expect("one average per user")
    }
}

/// `Rbar <- (1 - alpha) Rbar + alpha R`; the first call sets `Rbar = R`.
pub fn pf_update(state: &mut PfState, rates: &[f64]) {
    if !state.is_initialized() {
        state.rbar = rates.to_vec();
        return;
    }
    assert_eq!(state.rbar.len(), rates.len());
    let a = state.alpha;
    for (r, &x) in state.rbar.iter_mut().zip(rates) {
        *r = (1.0 - a) * *r + a * x;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotResult {
    pub slot: usize,
    pub scheme: Scheme,
    /// Per-user rate summed over bands, Mbps, indexed `b * K + k`.
    pub rates: Vec<f64>,
    pub f0: f64,
    pub trace: Trace,
    pub wall_ms: f64,
    /// Optimization passes actually run.
    pub iterations: usize,
}

/// Knobs shared by every experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub network: NetworkConfig,
    pub slots: usize,
    pub iterations: usize,
    pub drops: usize,
    pub power_mode: PowerMode,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            network: NetworkConfig::default(),
            slots: 100,
            iterations: 15,
            drops: 10,
            power_mode: PowerMode::Joint,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        if self.slots == 0 || self.drops == 0 {
            return Err(Error::InvalidConfig(
                "slots and drops must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Run `scheme` once on a single fading realization.
#[allow(clippy::too_many_arguments)]
pub fn run_scheme(
    scheme: Scheme,
    channels: &ChannelTensor,
    noise: &NoiseModel,
    weights: &Weights,
    power_watts: f64,
    iterations: usize,
    mode: PowerMode,
    slot: usize,
    seed: u64,
) -> Outcome {
    let d = channels.dims();
    let single = |schedule: crate::model::Schedule, beams: crate::model::BeamformerSet| {
        let mut trace = Trace::default();
        let f0 = objective_f0(&schedule, &beams, channels, noise, weights);
        trace.push(0, f0, beams.powers());
        Outcome {
            schedule,
            beams,
            trace,
            power_checks: Vec::new(),
        }
    };
    match scheme {
        Scheme::MatchedFilter => {
            let s = round_robin(d, slot);
            let v = matched_filter_beams(&s, channels, power_watts);
            single(s, v)
        }
        Scheme::ZeroForcing => {
            let (s, v) = zero_forcing_beams(&round_robin(d, slot), channels, power_watts);
            single(s, v)
        }
        Scheme::GreedyWmmse => greedy_wmmse(
            channels,
            noise,
            weights,
            power_watts,
            mode,
            iterations,
            seed,
        ),
        Scheme::MulticellWmmse => {
            multicell_wmmse(channels, noise, weights, power_watts, mode, iterations).outcome
        }
        Scheme::Proposed => {
            let opts = FpOptions {
                iterations,
                rel_tolerance: None,
                mode,
            };
            run_proposed(
                channels,
                noise,
                weights,
                power_watts,
                InitPolicy::Best,
                &opts,
            )
        }
    }
}

/// All slots of one drop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropResult {
    pub drop: usize,
    pub slots: Vec<SlotResult>,
    /// Average rates after the final slot, Mbps.
    pub rbar: Vec<f64>,
}

impl DropResult {
    pub fn sumlog(&self) -> f64 {
        sumlog_utility(&self.rbar)
    }
}

/// `sum ln(max(Rbar, floor))` over users, Rbar in Mbps.
pub fn sumlog_utility(rbar: &[f64]) -> f64 {
    rbar.iter().map(|r| r.max(RATE_FLOOR_MBPS).ln()).sum()
}

/// One PF run over `cfg.slots` slots of drop `drop`.
pub fn run_drop(cfg: &ExperimentConfig, scheme: Scheme, drop: usize) -> Result<DropResult> {
    let root = cfg.network.rng_seed;
    let mut net = cfg.network.clone();
    net.rng_seed = drop_seed(root, drop);
    let topo = build_topology(&net)?;
    let noise = noise_power(&net);
    let dims = Dims::from_config(&net);
    let mut pf = PfState::new(PF_ALPHA);
    let mut slots = Vec::with_capacity(cfg.slots);
    for slot in 0..cfg.slots {
        let channels = generate_channels(&topo, &net, slot_seed(root, drop, slot));
        let weights = pf.weights(dims);
        let start = Instant::now();
        let out = run_scheme(
            scheme,
            &channels,
            &noise,
            &weights,
            net.power_watts,
            cfg.iterations,
            cfg.power_mode,
            slot,
            greedy_seed(root, drop, slot),
        );
        let wall_ms = start.elapsed().as_secs_f64() * 1e3;
        let rates = user_rates_mbps(
            &out.schedule,
            &out.beams,
            &channels,
            &noise,
            net.bandwidth_hz,
        );
        pf_update(&mut pf, &rates);
        slots.push(SlotResult {
            slot,
            scheme,
            f0: out.f0(&channels, &noise, &weights),
            iterations: out.trace.len().saturating_sub(1),
            trace: out.trace,
            rates,
            wall_ms,
        });
    }
    Ok(DropResult {
        drop,
        slots,
        rbar: pf.rbar,
    })
}

/// Aggregate metrics of one scheme. Contains no timing, so reruns are
/// bit-identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Mean over drops of the final sum-log utility.
    pub sumlog: f64,
    /// Nearest-rank 10th percentile of the pooled average rates, Mbps.
    pub edge_rate_mbps: f64,
    pub mean_rate_mbps: f64,
    pub sumlog_per_drop: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub mean_slot_ms: f64,
    /// Mean wall clock per optimization pass; equals the slot time for
    /// single-shot schemes.
    pub mean_iteration_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub scheme: Scheme,
    pub drops: Vec<DropResult>,
    pub metrics: Metrics,
    pub timing: Timing,
}

impl ExperimentResult {
    /// Pooled final average rates of every user of every drop.
    pub fn pooled_rates(&self) -> Vec<f64> {
        self.drops
            .iter()
            .flat_map(|d| d.rbar.iter().copied())
            .collect()
    }

    /// Empirical CDF of the pooled average rates: `(rate, i / n)` sorted.
    pub fn rate_cdf(&self) -> Vec<(f64, f64)> {
        empirical_cdf(&self.pooled_rates())
    }
}

/// Nearest-rank percentile: the `ceil(p/100 * n)`-th smallest value.
pub fn percentile_nearest_rank(values: &[f64], p: f64) -> f64 {
    assert!(!values.is_empty(), "percentile of an empty sample");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((p / 100.0) * v.len() as f64).ceil() as usize;
    v[rank.clamp(1, v.len()) - 1]
}

pub fn empirical_cdf(values: &[f64]) -> Vec<(f64, f64)> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.into_iter()
        .enumerate()
        .map(|(i, r)| (r, (i + 1) as f64 / n))
        .collect()
}

fn aggregate(scheme: Scheme, drops: Vec<DropResult>) -> ExperimentResult {
    let sumlog_per_drop: Vec<f64> = drops.iter().map(DropResult::sumlog).collect();
    let sumlog = sumlog_per_drop.iter().sum::<f64>() / drops.len() as f64;
    let pooled: Vec<f64> = drops.iter().flat_map(|d| d.rbar.iter().copied()).collect();
    let mean_rate_mbps = pooled.iter().sum::<f64>() / pooled.len() as f64;
    let edge_rate_mbps = percentile_nearest_rank(&pooled, 10.0);
    let (mut ms, mut iters, mut n) = (0.0, 0usize, 0usize);
    for s in drops.iter().flat_map(|d| &d.slots) {
        ms += s.wall_ms;
        iters += s.iterations.max(1);
        n += 1;
    }
    ExperimentResult {
        scheme,
        metrics: Metrics {
            sumlog,
            edge_rate_mbps,
            mean_rate_mbps,
            sumlog_per_drop,
        },
        timing: Timing {
            mean_slot_ms: ms / n as f64,
            mean_iteration_ms: ms / iters as f64,
        },
        drops,
    }
}

/// PF experiment: drops in parallel, slots sequential within a drop.
pub fn run_experiment(cfg: &ExperimentConfig, scheme: Scheme) -> Result<ExperimentResult> {
    cfg.validate()?;
    let drops = (0..cfg.drops)
        .into_par_iter()
        .map(|d| run_drop(cfg, scheme, d))
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate(scheme, drops))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub scheme: Scheme,
    pub pt_dbm: f64,
    pub sumrate_mbps: f64,
}

/// Mean network sum rate with unit weights, over `cfg.drops` drops and
/// `cfg.slots` fading draws per drop, for every scheme and power level.
pub fn power_sweep(
    cfg: &ExperimentConfig,
    schemes: &[Scheme],
    pt_dbm: &[f64],
) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let root = cfg.network.rng_seed;
    let dims = Dims::from_config(&cfg.network);
    let weights = Weights::uniform(dims, 1.0);
    let noise = noise_power(&cfg.network);
    let topologies = (0..cfg.drops)
        .map(|d| {
            let mut net = cfg.network.clone();
            net.rng_seed = drop_seed(root, d);
            build_topology(&net).map(|t| (net, t))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for &scheme in schemes {
        for &p in pt_dbm {
            let power = dbm_to_watts(p);
            let per_drop: Vec<f64> = topologies
                .par_iter()
                .enumerate()
                .map(|(d, (net, topo))| {
                    (0..cfg.slots)
                        .map(|slot| {
                            let h = generate_channels(topo, net, slot_seed(root, d, slot));
                            let out = run_scheme(
                                scheme,
                                &h,
                                &noise,
                                &weights,
                                power,
                                cfg.iterations,
                                cfg.power_mode,
                                slot,
                                greedy_seed(root, d, slot),
                            );
                            user_rates_mbps(&out.schedule, &out.beams, &h, &noise, net.bandwidth_hz)
                                .iter()
                                .sum::<f64>()
                        })
                        .sum::<f64>()
                })
                .collect();
            let sumrate_mbps = per_drop.iter().sum::<f64>() / (cfg.drops * cfg.slots) as f64;
            rows.push(SweepRow {
                scheme,
                pt_dbm: p,
                sumrate_mbps,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeComparison {
    pub joint: Metrics,
    pub per_band: Metrics,
    pub sumlog_delta: f64,
    pub edge_rate_delta_mbps: f64,
}

impl ModeComparison {
    /// `|delta| / min(|joint|, |per band|)`.
    pub fn relative_sumlog_delta(&self) -> f64 {
        self.sumlog_delta.abs() / self.joint.sumlog.abs().min(self.per_band.sumlog.abs())
    }
}

/// Proposed scheme under joint and per-band budgets on identical seeds.
pub fn joint_vs_perband(cfg: &ExperimentConfig) -> Result<ModeComparison> {
    let mut c = cfg.clone();
    c.power_mode = PowerMode::Joint;
    let joint = run_experiment(&c, Scheme::Proposed)?.metrics;
    c.power_mode = PowerMode::PerBand;
    let per_band = run_experiment(&c, Scheme::Proposed)?.metrics;
    Ok(ModeComparison {
        sumlog_delta: joint.sumlog - per_band.sumlog,
        edge_rate_delta_mbps: joint.edge_rate_mbps - per_band.edge_rate_mbps,
        joint,
        per_band,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pf_constant_rate_converges_geometrically() {
        let mut s = PfState::new(PF_ALPHA);
        pf_update(&mut s, &[1.0]);
        let r = 3.0;
        let mut gap = (s.rbar[0] - r).abs();
        for _ in 0..50 {
            pf_update(&mut s, &[r]);
            let g = (s.rbar[0] - r).abs();
            assert!((g - (1.0 - PF_ALPHA) * gap).abs() < 1e-12);
            gap = g;
        }
    }

    #[test]
    fn pf_zero_rate_decays() {
        let mut s = PfState::new(PF_ALPHA);
        pf_update(&mut s, &[2.0]);
        for _ in 0..10 {
            pf_update(&mut s, &[0.0]);
        }
        assert!((s.rbar[0] - 0.95f64.powi(10) * 2.0).abs() < 1e-12);
    }

    #[test]
    fn weights_floor_zero_rates() {
        let dims = Dims {
            cells: 1,
            users_per_cell: 2,
            antennas: 1,
            bands: 1,
        };
        let mut s = PfState::new(PF_ALPHA);
        assert_eq!(s.weights(dims).as_slice(), &[1.0, 1.0]);
        pf_update(&mut s, &[0.0, 4.0]);
        assert_eq!(s.weights(dims).as_slice(), &[1e3, 0.25]);
    }

    #[test]
    fn nearest_rank() {
        let v: Vec<f64> = (1..=20).map(f64::from).collect();
        assert_eq!(percentile_nearest_rank(&v, 10.0), 2.0);
        assert_eq!(percentile_nearest_rank(&v, 0.0), 1.0);
        assert_eq!(percentile_nearest_rank(&v, 100.0), 20.0);
        assert_eq!(percentile_nearest_rank(&[5.0], 10.0), 5.0);
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in Scheme::ALL {
            assert_eq!(s.tag().parse::<Scheme>().unwrap(), s);
        }
        assert!("ipopt".parse::<Scheme>().is_err());
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(slot_seed(1, 0, 0), slot_seed(1, 0, 1));
        assert_ne!(slot_seed(1, 0, 0), slot_seed(1, 1, 0));
        assert_ne!(drop_seed(1, 0), drop_seed(2, 0));
    }
}
