//! Shared fixtures and independent reference computations.
#![allow(dead_code)]

use fpsched::config::NetworkConfig;
use fpsched::network::{
    build_topology, generate_channels, noise_power, ChannelTensor, Dims, NoiseModel,
};
use fpsched::{BeamformerSet, Schedule, Weights};
use num_complex::Complex64;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

pub struct Instance {
    pub cfg: NetworkConfig,
    pub channels: ChannelTensor,
    pub noise: NoiseModel,
}

impl Instance {
    pub fn dims(&self) -> Dims {
        self.channels.dims()
    }
}

pub fn instance(seed: u64, cells: usize, m: usize, k: usize, f: usize) -> Instance {
    let cfg = NetworkConfig {
        num_cells: cells,
        antennas: m,
        users_per_cell: k,
        bands: f,
        rng_seed: seed,
        ..Default::default()
    };
    let topo = build_topology(&cfg).unwrap();
    let channels = generate_channels(&topo, &cfg, seed.wrapping_add(1000));
    let noise = noise_power(&cfg);
    Instance {
        cfg,
        channels,
        noise,
    }
}

pub fn rng(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

pub fn random_weights(rng: &mut ChaCha12Rng, dims: Dims) -> Weights {
    let w = (0..dims.num_users())
        .map(|_| rng.random_range(0.2..5.0))
        .collect();
    Weights::from_vec(dims, w).unwrap()
}

/// Random subsets of at most `M` users with random complex beams whose
/// per-BS power is at most `F * P_T`.
pub fn random_state(rng: &mut ChaCha12Rng, dims: Dims, power: f64) -> (Schedule, BeamformerSet) {
    let mut s = Schedule::empty(dims);
    let mut v = BeamformerSet::zeros(dims);
    for b in 0..dims.cells {
        for f in 0..dims.bands {
            let n = rng.random_range(0..=dims.antennas);
            let users = sample(rng, dims.users_per_cell, n).into_vec();
            for &k in &users {
                let beam: Vec<Complex64> = (0..dims.antennas)
                    .map(|_| {
                        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                    })
                    .collect();
                let norm: f64 = beam.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                let p = power / dims.antennas as f64 * rng.random_range(0.1..1.0);
                let scaled: Vec<Complex64> = beam.iter().map(|z| z * (p.sqrt() / norm)).collect();
                v.set(b, k, f, &scaled);
            }
            s.set(b, f, users).unwrap();
        }
    }
    (s, v)
}

/// `|sum_a conj(h_a) v_a|^2`, written out longhand.
pub fn gain(h: &[Complex64], v: &[Complex64]) -> f64 {
    let (mut re, mut im) = (0.0, 0.0);
    for (x, y) in h.iter().zip(v) {
        // conj(x) * y
        re += x.re * y.re + x.im * y.im;
        im += x.re * y.im - x.im * y.re;
    }
    re * re + im * im
}

/// Received power from every scheduled beam plus noise.
pub fn oracle_zeta(
    inst: &Instance,
    s: &Schedule,
    v: &BeamformerSet,
    b: usize,
    k: usize,
    f: usize,
) -> f64 {
    let d = inst.dims();
    let mut z = inst.noise.get(b, k, f);
    for src in 0..d.cells {
        for &kk in s.users(src, f) {
            z += gain(inst.channels.get(b, k, src, f), v.get(src, kk, f));
        }
    }
    z
}

pub fn oracle_sinr(
    inst: &Instance,
    s: &Schedule,
    v: &BeamformerSet,
    b: usize,
    k: usize,
    f: usize,
) -> f64 {
    if !s.users(b, f).contains(&k) {
        return 0.0;
    }
    let d = inst.dims();
    let sig = gain(inst.channels.get(b, k, b, f), v.get(b, k, f));
    let mut interference = inst.noise.get(b, k, f);
    for src in 0..d.cells {
        for &kk in s.users(src, f) {
            if (src, kk) != (b, k) {
                interference += gain(inst.channels.get(b, k, src, f), v.get(src, kk, f));
            }
        }
    }
    sig / interference
}

pub fn oracle_f0(inst: &Instance, s: &Schedule, v: &BeamformerSet, w: &Weights) -> f64 {
    let d = inst.dims();
    let mut total = 0.0;
    for b in 0..d.cells {
        for k in 0..d.users_per_cell {
            for f in 0..d.bands {
                total += w.get(b, k) * (1.0 + oracle_sinr(inst, s, v, b, k, f)).ln();
            }
        }
    }
    total
}

/// Per-BS transmit power summed over bands.
pub fn oracle_bs_power(v: &BeamformerSet, dims: Dims, b: usize, band: Option<usize>) -> f64 {
    let bands: Vec<usize> = match band {
        Some(f) => vec![f],
        None => (0..dims.bands).collect(),
    };
    let mut p = 0.0;
    for k in 0..dims.users_per_cell {
        for &f in &bands {
            p += v.get(b, k, f).iter().map(|z| z.norm_sqr()).sum::<f64>();
        }
    }
    p
}

/// Best total over every injective column-to-row map.
pub fn brute_force_lsap(m: &[Vec<f64>]) -> f64 {
    fn go(m: &[Vec<f64>], col: usize, used: &mut Vec<bool>) -> f64 {
        let cols = m[0].len();
        if col == cols {
            return 0.0;
        }
        let mut best = f64::NEG_INFINITY;
        for i in 0..m.len() {
            if !used[i] {
                used[i] = true;
                best = best.max(m[i][col] + go(m, col + 1, used));
                used[i] = false;
            }
        }
        best
    }
    go(m, 0, &mut vec![false; m.len()])
}
