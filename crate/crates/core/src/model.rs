//! Scheduling and beamforming state shared by every scheme, plus the SINR
//! and weighted-sum-rate evaluation.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{ChannelTensor, Dims, NoiseModel};
use crate::trace::Trace;

/// `a^H b`.
#[inline]
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter()
        .zip(b)
        .fold(Complex64::new(0.0, 0.0), |acc, (x, y)| acc + x.conj() * y)
}

#[inline]
pub fn norm_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// Which users each BS serves on each band, in beam order.
///
/// `users(b, f)[n]` is the user carried by beam `n`, so the beam map is
/// injective by construction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    dims: Dims,
    max_streams: usize,
    streams: Vec<Vec<usize>>,
}

impl Schedule {
    /// Nobody scheduled; at most `M` users per (b, f).
    pub fn empty(dims: Dims) -> Self {
        Self::with_limit(dims, dims.antennas)
    }

    /// Nobody scheduled, with a custom per-(b, f) stream limit. The
    /// multicell WMMSE baseline uses `K` here.
    pub fn with_limit(dims: Dims, max_streams: usize) -> Self {
        Schedule {
            dims,
            max_streams,
            streams: vec![Vec::new(); dims.cells * dims.bands],
        }
    }

    /// Every user of every cell scheduled on every band.
    pub fn all_users(dims: Dims) -> Self {
        let mut s = Self::with_limit(dims, dims.users_per_cell);
        for slot in s.streams.iter_mut() {
            *slot = (0..dims.users_per_cell).collect();
        }
        s
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn max_streams(&self) -> usize {
        self.max_streams
    }

    #[inline]
    pub fn users(&self, b: usize, f: usize) -> &[usize] {
        &self.streams[b * self.dims.bands + f]
    }

    pub fn set(&mut self, b: usize, f: usize, users: Vec<usize>) -> Result<()> {
        if users.len() > self.max_streams {
            return Err(Error::Dimension(format!(
                "{} users scheduled on BS {b} band {f}, limit {}",
                users.len(),
                self.max_streams
            )));
        }
        for (i, &k) in users.iter().enumerate() {
            if k >= self.dims.users_per_cell {
                return Err(Error::Dimension(format!("user {k} out of range")));
            }
            if users[..i].contains(&k) {
                return Err(Error::Dimension(format!(
                    "user {k} scheduled twice on BS {b} band {f}"
                )));
            }
        }
        self.streams[b * self.dims.bands + f] = users;
        Ok(())
    }

    #[inline]
    pub fn is_scheduled(&self, b: usize, k: usize, f: usize) -> bool {
        self.users(b, f).contains(&k)
    }

    pub fn beam_of(&self, b: usize, k: usize, f: usize) -> Option<usize> {
        self.users(b, f).iter().position(|&u| u == k)
    }

    pub fn total_scheduled(&self) -> usize {
        self.streams.iter().map(Vec::len).sum()
    }
}

/// Beamforming vectors `v(k, b, f)`, one `M`-vector per user and band.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerSet {
    dims: Dims,
    data: Vec<Complex64>,
}

impl BeamformerSet {
    pub fn zeros(dims: Dims) -> Self {
        BeamformerSet {
            dims,
            data: vec![Complex64::new(0.0, 0.0); dims.num_users() * dims.bands * dims.antennas],
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    #[inline]
    fn offset(&self, b: usize, k: usize, f: usize) -> usize {
        self.dims.user_band(b, k, f) * self.dims.antennas
    }

    #[inline]
    pub fn get(&self, b: usize, k: usize, f: usize) -> &[Complex64] {
        let o = self.offset(b, k, f);
        &self.data[o..o + self.dims.antennas]
    }

    #[inline]
    pub fn get_mut(&mut self, b: usize, k: usize, f: usize) -> &mut [Complex64] {
        let o = self.offset(b, k, f);
        let m = self.dims.antennas;
        &mut self.data[o..o + m]
    }

    pub fn set(&mut self, b: usize, k: usize, f: usize, v: &[Complex64]) {
        self.get_mut(b, k, f).copy_from_slice(v);
    }

    pub fn clear(&mut self, b: usize, k: usize, f: usize) {
        self.get_mut(b, k, f).fill(Complex64::new(0.0, 0.0));
    }

    pub fn power_band(&self, b: usize, f: usize) -> f64 {
        (0..self.dims.users_per_cell)
            .map(|k| norm_sqr(self.get(b, k, f)))
            .sum()
    }

    /// Transmit power of BS `b` summed over bands.
    pub fn power(&self, b: usize) -> f64 {
        (0..self.dims.bands).map(|f| self.power_band(b, f)).sum()
    }

    pub fn powers(&self) -> Vec<f64> {
        (0..self.dims.cells).map(|b| self.power(b)).collect()
    }

    /// Zero every vector whose user is not scheduled.
    pub fn mask(&mut self, schedule: &Schedule) {
        let d = self.dims;
        for b in 0..d.cells {
            for f in 0..d.bands {
                for k in 0..d.users_per_cell {
                    if !schedule.is_scheduled(b, k, f) {
                        self.clear(b, k, f);
                    }
                }
            }
        }
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }
}

/// Per-user weights `w(k, b)`, shared across bands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    users_per_cell: usize,
    values: Vec<f64>,
}

impl Weights {
    pub fn uniform(dims: Dims, value: f64) -> Self {
        Weights {
            users_per_cell: dims.users_per_cell,
            values: vec![value; dims.num_users()],
        }
    }

    pub fn from_vec(dims: Dims, values: Vec<f64>) -> Result<Self> {
        if values.len() != dims.num_users() {
            return Err(Error::Dimension(format!(
                "{} weights for {} users",
                values.len(),
                dims.num_users()
            )));
        }
        if values.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidConfig(
                "weights must be finite and non-negative".into(),
            ));
        }
        Ok(Weights {
            users_per_cell: dims.users_per_cell,
            values,
        })
    }

    #[inline]
    pub fn get(&self, b: usize, k: usize) -> f64 {
        self.values[b * self.users_per_cell + k]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn scaled(&self, c: f64) -> Self {
        Weights {
            users_per_cell: self.users_per_cell,
            values: self.values.iter().map(|w| w * c).collect(),
        }
    }
}

/// Received powers of one user on one band under the current schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkPower {
    /// `u |h^H v|^2` for the user's own beam.
    pub signal: f64,
    /// Every other scheduled beam in the network, plus noise.
    pub interference: f64,
}

impl LinkPower {
    /// The total received power plus noise (`zeta`).
    pub fn total(&self) -> f64 {
        self.signal + self.interference
    }

    pub fn sinr(&self) -> f64 {
        self.signal / self.interference
    }
}

pub fn link_power(
    b: usize,
    k: usize,
    f: usize,
    schedule: &Schedule,
    beams: &BeamformerSet,
    channels: &ChannelTensor,
    noise: &NoiseModel,
) -> LinkPower {
    let d = channels.dims();
    let mut signal = 0.0;
    let mut interference = noise.get(b, k, f);
    for src in 0..d.cells {
        let h = channels.get(b, k, src, f);
        for &kk in schedule.users(src, f) {
            let p = inner(h, beams.get(src, kk, f)).norm_sqr();
            if src == b && kk == k {
                signal = p;
            } else {
                interference += p;
            }
        }
    }
    LinkPower {
        signal,
        interference,
    }
}

/// SINR of user `k` of cell `b` on band `f`; zero when unscheduled.
pub fn sinr(
    k: usize,
    b: usize,
    f: usize,
    schedule: &Schedule,
    beams: &BeamformerSet,
    channels: &ChannelTensor,
    noise: &NoiseModel,
) -> f64 {
    link_power(b, k, f, schedule, beams, channels, noise).sinr()
}

/// SINR of every (user, band), indexed by `Dims::user_band`.
pub fn all_sinr(
    schedule: &Schedule,
    beams: &BeamformerSet,
    channels: &ChannelTensor,
    noise: &NoiseModel,
) -> Vec<f64> {
    let d = channels.dims();
    let mut out = vec![0.0; d.num_users() * d.bands];
    for f in 0..d.bands {
        for b in 0..d.cells {
            for &k in schedule.users(b, f) {
                out[d.user_band(b, k, f)] = sinr(k, b, f, schedule, beams, channels, noise);
            }
        }
    }
    out
}

/// Weighted sum rate `sum w log(1 + sinr)` in nats.
pub fn objective_f0(
    schedule: &Schedule,
    beams: &BeamformerSet,
    channels: &ChannelTensor,
    noise: &NoiseModel,
    weights: &Weights,
) -> f64 {
    let d = channels.dims();
    let mut total = 0.0;
    for f in 0..d.bands {
        for b in 0..d.cells {
            for &k in schedule.users(b, f) {
                let s = sinr(k, b, f, schedule, beams, channels, noise);
                total += weights.get(b, k) * s.ln_1p();
            }
        }
    }
    total
}

/// Per-user achieved rate summed over bands, Mbps.
pub fn user_rates_mbps(
    schedule: &Schedule,
    beams: &BeamformerSet,
    channels: &ChannelTensor,
    noise: &NoiseModel,
    bandwidth_hz: f64,
) -> Vec<f64> {
    let d = channels.dims();
    let s = all_sinr(schedule, beams, channels, noise);
    (0..d.num_users())
        .map(|u| {
            (0..d.bands)
                .map(|f| bandwidth_hz * s[u * d.bands + f].ln_1p() / std::f64::consts::LN_2 / 1e6)
                .sum()
        })
        .collect()
}

/// Multiplier and power bookkeeping for one power-constraint group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerCheck {
    pub bs: usize,
    /// `None` for the joint constraint across all bands.
    pub band: Option<usize>,
    pub mu: f64,
    pub used: f64,
    pub budget: f64,
}

impl PowerCheck {
    pub fn slack(&self) -> f64 {
        self.budget - self.used
    }

    /// Within budget to `rel_tol` and `mu * slack <= slack_tol * budget`.
    pub fn satisfied(&self, rel_tol: f64, slack_tol: f64) -> bool {
        self.used <= self.budget * (1.0 + rel_tol)
            && self.mu * self.slack().max(0.0) <= slack_tol * self.budget
    }
}

/// Final state of one scheme run on one slot.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub schedule: Schedule,
    pub beams: BeamformerSet,
    pub trace: Trace,
    /// Power constraint bookkeeping of every beamformer update, in order.
    pub power_checks: Vec<Vec<PowerCheck>>,
}

impl Outcome {
    pub fn f0(&self, channels: &ChannelTensor, noise: &NoiseModel, weights: &Weights) -> f64 {
        objective_f0(&self.schedule, &self.beams, channels, noise, weights)
    }
}
