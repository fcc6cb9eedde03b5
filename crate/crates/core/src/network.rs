//! Hexagonal multicell topology, user drops and per-band channels.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::config::NetworkConfig;
use crate::error::{Error, Result};

/// Thermal noise floor, dBm/Hz.
pub const THERMAL_NOISE_DBM_PER_HZ: f64 = -174.0;

/// Relative distance tolerance under which two BSs count as equidistant.
const TIE_TOLERANCE: f64 = 1e-9;

/// Problem dimensions shared by every tensor in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub cells: usize,
    pub users_per_cell: usize,
    pub antennas: usize,
    pub bands: usize,
}

impl Dims {
    pub fn from_config(cfg: &NetworkConfig) -> Self {
        Dims {
            cells: cfg.num_cells,
            users_per_cell: cfg.users_per_cell,
            antennas: cfg.antennas,
            bands: cfg.bands,
        }
    }

    #[inline]
    pub fn num_users(&self) -> usize {
        self.cells * self.users_per_cell
    }

    /// Flat index of user `k` of cell `b`.
    #[inline]
    pub fn user(&self, b: usize, k: usize) -> usize {
        b * self.users_per_cell + k
    }

    /// Flat index of the (user, band) pair.
    #[inline]
    pub fn user_band(&self, b: usize, k: usize, f: usize) -> usize {
        self.user(b, k) * self.bands + f
    }
}

pub type Point = [f64; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub bs_positions: Vec<Point>,
    /// Indexed by `Dims::user(b, k)`; every user of cell `b` is associated
    /// with BS `b`.
    pub user_positions: Vec<Point>,
    pub users_per_cell: usize,
    pub cell_radius: f64,
    /// Translations of the periodic layout; empty without wraparound.
    pub wrap_shifts: Vec<Point>,
}

impl Topology {
    pub fn num_cells(&self) -> usize {
        self.bs_positions.len()
    }

    /// Distance from `p` to BS `b`, using the nearest periodic image when
    /// wraparound is enabled.
    pub fn distance(&self, p: Point, b: usize) -> f64 {
        let bs = self.bs_positions[b];
        let direct = planar_distance(p, bs);
        self.wrap_shifts.iter().fold(direct, |best, s| {
            best.min(planar_distance(p, [bs[0] + s[0], bs[1] + s[1]]))
        })
    }

    /// Closest BS to `p`; ties go to the lowest index.
    pub fn associate(&self, p: Point) -> usize {
        let tol = TIE_TOLERANCE * self.cell_radius;
        let mut best = 0;
        let mut best_d = self.distance(p, 0);
        for b in 1..self.num_cells() {
            let d = self.distance(p, b);
            if d < best_d - tol {
                best = b;
                best_d = d;
            }
        }
        best
    }

    pub fn user_position(&self, b: usize, k: usize) -> Point {
        self.user_positions[b * self.users_per_cell + k]
    }
}

fn planar_distance(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// BS centers of a hexagonal layout with `rings` rings around the origin,
/// ordered by ring and then by angle. Neighboring centers sit `spacing`
/// apart along the x axis.
fn hex_centers(rings: usize, spacing: f64) -> Vec<Point> {
    let r = rings as i64;
    let mut axial = Vec::new();
    for q in -r..=r {
        for s in -r..=r {
            let ring = q.abs().max(s.abs()).max((q + s).abs());
            if ring <= r {
                axial.push((ring, q, s));
            }
        }
    }
    let to_xy = |q: i64, s: i64| -> Point {
        [
            spacing * (q as f64 + 0.5 * s as f64),
            spacing * (s as f64) * 3f64.sqrt() / 2.0,
        ]
    };
    axial.sort_by(|a, b| {
        let pa = to_xy(a.1, a.2);
        let pb = to_xy(b.1, b.2);
        let ang = |p: Point| {
            let t = p[1].atan2(p[0]);
            if t < -1e-12 {
                t + 2.0 * PI
            } else {
                t.max(0.0)
            }
        };
        a.0.cmp(&b.0)
            .then(ang(pa).partial_cmp(&ang(pb)).expect("finite angles"))
    });
    axial.into_iter().map(|(_, q, s)| to_xy(q, s)).collect()
}

/// The six translations that tile the plane with copies of a
/// `1 + 3r(r+1)`-cell cluster.
fn wrap_translations(rings: usize, spacing: f64) -> Vec<Point> {
    let r = rings as f64;
    let base = [
        spacing * ((r + 1.0) + 0.5 * r),
        spacing * r * 3f64.sqrt() / 2.0,
    ];
    (0..6)
        .map(|i| {
            let (sn, cs) = (i as f64 * PI / 3.0).sin_cos();
            [cs * base[0] - sn * base[1], sn * base[0] + cs * base[1]]
        })
        .collect()
}

/// Whether `p` lies inside the hexagon centered at the origin whose faces
/// are `apothem` away along 0, 60 and 120 degrees.
fn in_hexagon(p: Point, apothem: f64) -> bool {
    (0..3).all(|i| {
        let (sn, cs) = (i as f64 * PI / 3.0).sin_cos();
        (p[0] * cs + p[1] * sn).abs() <= apothem
    })
}

/// Place BSs at hexagon centers and drop exactly `K` users per cell.
///
/// Users are drawn uniformly over the whole network area and associated
/// with the closest BS; a draw landing in an already full cell is discarded.
pub fn build_topology(cfg: &NetworkConfig) -> Result<Topology> {
    cfg.validate()?;
    let rings = cfg.rings().expect("validated");
    let spacing = cfg.cell_radius * 3f64.sqrt();
    let apothem = spacing / 2.0;
    let bs_positions = hex_centers(rings, spacing);
    let wrap_shifts = if cfg.wraparound {
        wrap_translations(rings, spacing)
    } else {
        Vec::new()
    };
    let n_cells = bs_positions.len();
    let k = cfg.users_per_cell;

    let mut topo = Topology {
        bs_positions,
        user_positions: Vec::new(),
        users_per_cell: k,
        cell_radius: cfg.cell_radius,
        wrap_shifts,
    };

    let mut rng = ChaCha12Rng::seed_from_u64(cfg.rng_seed);
    let mut per_cell: Vec<Vec<Point>> = vec![Vec::with_capacity(k); n_cells];
    let mut filled = 0;
    while filled < n_cells * k {
        let host = rng.random_range(0..n_cells);
        let local = loop {
            let p = [
                rng.random_range(-apothem..apothem),
                rng.random_range(-cfg.cell_radius..cfg.cell_radius),
            ];
            if in_hexagon(p, apothem) {
                break p;
            }
        };
        let c = topo.bs_positions[host];
        let p = [c[0] + local[0], c[1] + local[1]];
        let b = topo.associate(p);
        if per_cell[b].len() < k {
            per_cell[b].push(p);
            filled += 1;
        }
    }
    topo.user_positions = per_cell.into_iter().flatten().collect();
    Ok(topo)
}

/// Large-scale power gain `(d / d_ref)^(-alpha)`, clamped to 1 below `d_ref`.
pub fn pathloss_gain(distance: f64, reference_distance: f64, exponent: f64) -> f64 {
    (distance.max(reference_distance) / reference_distance).powf(-exponent)
}

/// Complex channel vectors for every (user, serving BS, source BS, band).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTensor {
    dims: Dims,
    data: Vec<Complex64>,
}

impl ChannelTensor {
    pub fn zeros(dims: Dims) -> Self {
        let n = dims.num_users() * dims.cells * dims.bands * dims.antennas;
        ChannelTensor {
            dims,
            data: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    #[inline]
    fn offset(&self, b: usize, k: usize, src: usize, f: usize) -> usize {
        let d = &self.dims;
        ((d.user(b, k) * d.cells + src) * d.bands + f) * d.antennas
    }

    /// Channel from BS `src` to user `k` of cell `b` on band `f`.
    #[inline]
    pub fn get(&self, b: usize, k: usize, src: usize, f: usize) -> &[Complex64] {
        let o = self.offset(b, k, src, f);
        &self.data[o..o + self.dims.antennas]
    }

    pub fn get_mut(&mut self, b: usize, k: usize, src: usize, f: usize) -> &mut [Complex64] {
        let o = self.offset(b, k, src, f);
        let m = self.dims.antennas;
        &mut self.data[o..o + m]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn from_raw(dims: Dims, data: Vec<Complex64>) -> Result<Self> {
        let expected = dims.num_users() * dims.cells * dims.bands * dims.antennas;
        if data.len() != expected {
            return Err(Error::Dimension(format!(
                "channel data has {} entries, expected {expected}",
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidConfig(
                "channel tensor has non-finite entries".into(),
            ));
        }
        Ok(ChannelTensor { dims, data })
    }

    /// JSON replay format: dimensions plus split real/imaginary arrays.
    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let dump = ChannelDump {
            dims: self.dims,
            re: self.data.iter().map(|z| z.re).collect(),
            im: self.data.iter().map(|z| z.im).collect(),
        };
        let file = std::fs::File::create(path)?;
        serde_json::to_writer(std::io::BufWriter::new(file), &dump)?;
        Ok(())
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let dump: ChannelDump = serde_json::from_str(&text)?;
        if dump.re.len() != dump.im.len() {
            return Err(Error::Dimension("re/im length mismatch".into()));
        }
        let data = dump
            .re
            .iter()
            .zip(&dump.im)
            .map(|(&r, &i)| Complex64::new(r, i))
            .collect();
        Self::from_raw(dump.dims, data)
    }

    /// Binary replay format: `FPCH`, u32 version, four u64 dims
    /// (cells, users_per_cell, antennas, bands), then little-endian f64
    /// (re, im) pairs in tensor order.
    pub fn write_binary(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        w.write_all(BINARY_MAGIC)?;
        w.write_all(&BINARY_VERSION.to_le_bytes())?;
        let d = self.dims;
        for n in [d.cells, d.users_per_cell, d.antennas, d.bands] {
            w.write_all(&(n as u64).to_le_bytes())?;
        }
        for z in &self.data {
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_binary(path: impl AsRef<Path>) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        let header = 4 + 4 + 4 * 8;
        if bytes.len() < header || &bytes[..4] != BINARY_MAGIC {
            return Err(Error::InvalidConfig("not a channel tensor file".into()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        if version != BINARY_VERSION {
            return Err(Error::InvalidConfig(format!(
                "unsupported channel file version {version}"
            )));
        }
        let word = |i: usize| {
            let o = 8 + 8 * i;
            u64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes")) as usize
        };
        let dims = Dims {
            cells: word(0),
            users_per_cell: word(1),
            antennas: word(2),
            bands: word(3),
        };
        let body = &bytes[header..];
        if body.len() % 16 != 0 {
            return Err(Error::Dimension("truncated channel payload".into()));
        }
        let data = body
            .chunks_exact(16)
            .map(|c| {
                Complex64::new(
                    f64::from_le_bytes(c[..8].try_into().expect("8 bytes")),
                    f64::from_le_bytes(c[8..].try_into().expect("8 bytes")),
                )
            })
            .collect();
        Self::from_raw(dims, data)
    }
}

const BINARY_MAGIC: &[u8; 4] = b"FPCH";
const BINARY_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ChannelDump {
    dims: Dims,
    re: Vec<f64>,
    im: Vec<f64>,
}

/// Draw `h = sqrt(PL(d)) * g` with `g` i.i.d. CN(0, I_M), independent over
/// bands and BS pairs. Bit-exact for a given `seed`.
pub fn generate_channels(topo: &Topology, cfg: &NetworkConfig, seed: u64) -> ChannelTensor {
    let dims = Dims::from_config(cfg);
    let mut out = ChannelTensor::zeros(dims);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    for b in 0..dims.cells {
        for k in 0..dims.users_per_cell {
            let p = topo.user_position(b, k);
            for src in 0..dims.cells {
                let amp = pathloss_gain(
                    topo.distance(p, src),
                    cfg.reference_distance,
                    cfg.pathloss_exponent,
                )
                .sqrt();
                for f in 0..dims.bands {
                    for z in out.get_mut(b, k, src, f) {
                        let re: f64 = rng.sample(StandardNormal);
                        let im: f64 = rng.sample(StandardNormal);
                        *z = Complex64::new(re, im) * (scale * amp);
                    }
                }
            }
        }
    }
    out
}

/// Per (user, band) receiver noise power in watts.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    dims: Dims,
    sigma2: Vec<f64>,
}

impl NoiseModel {
    pub fn uniform(dims: Dims, sigma2: f64) -> Self {
        NoiseModel {
            dims,
            sigma2: vec![sigma2; dims.num_users() * dims.bands],
        }
    }

    #[inline]
    pub fn get(&self, b: usize, k: usize, f: usize) -> f64 {
        self.sigma2[self.dims.user_band(b, k, f)]
    }

    pub fn set(&mut self, b: usize, k: usize, f: usize, value: f64) {
        let i = self.dims.user_band(b, k, f);
        self.sigma2[i] = value;
    }

    pub fn max(&self) -> f64 {
        self.sigma2.iter().copied().fold(0.0, f64::max)
    }
}

/// `sigma^2 = N0 * W * 10^(NF/10)` with `N0` the -174 dBm/Hz floor.
pub fn noise_power_watts(bandwidth_hz: f64, noise_figure_db: f64) -> f64 {
    let psd = 10f64.powf((THERMAL_NOISE_DBM_PER_HZ - 30.0) / 10.0);
    psd * bandwidth_hz * 10f64.powf(noise_figure_db / 10.0)
}

pub fn noise_power(cfg: &NetworkConfig) -> NoiseModel {
    NoiseModel::uniform(
        Dims::from_config(cfg),
        noise_power_watts(cfg.bandwidth_hz, cfg.noise_figure),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::watts_to_dbm;

    fn cfg7() -> NetworkConfig {
        NetworkConfig {
            rng_seed: 11,
            ..Default::default()
        }
    }

    #[test]
    fn single_cell_has_bs_at_origin() {
        let cfg = NetworkConfig {
            num_cells: 1,
            users_per_cell: 1,
            antennas: 1,
            wraparound: false,
            ..Default::default()
        };
        let topo = build_topology(&cfg).unwrap();
        assert_eq!(topo.bs_positions, vec![[0.0, 0.0]]);
        assert_eq!(topo.user_positions.len(), 1);
        let apothem = cfg.cell_radius * 3f64.sqrt() / 2.0;
        assert!(in_hexagon(topo.user_positions[0], apothem + 1e-9));
    }

    #[test]
    fn seven_cell_layout_geometry() {
        let topo = build_topology(&cfg7()).unwrap();
        let d = 400.0 * 3f64.sqrt();
        assert_eq!(topo.bs_positions[0], [0.0, 0.0]);
        for p in &topo.bs_positions[1..] {
            assert!((p[0].hypot(p[1]) - d).abs() < 1e-9);
        }
        for (s, t) in topo.wrap_shifts.iter().zip(topo.wrap_shifts.iter().skip(1)) {
            assert!((s[0].hypot(s[1]) - d * 7f64.sqrt()).abs() < 1e-9);
            assert!((t[0].hypot(t[1]) - d * 7f64.sqrt()).abs() < 1e-9);
        }
    }

    #[test]
    fn exactly_k_users_per_cell_and_partition() {
        let cfg = NetworkConfig {
            users_per_cell: 9,
            ..cfg7()
        };
        let topo = build_topology(&cfg).unwrap();
        assert_eq!(topo.user_positions.len(), 7 * 9);
        for b in 0..7 {
            for k in 0..9 {
                assert_eq!(topo.associate(topo.user_position(b, k)), b);
            }
        }
    }

    #[test]
    fn wraparound_never_increases_distance() {
        let wrapped = build_topology(&cfg7()).unwrap();
        let mut flat = wrapped.clone();
        flat.wrap_shifts.clear();
        let mut max_w: f64 = 0.0;
        let mut max_f: f64 = 0.0;
        for p in &wrapped.user_positions {
            for b in 0..7 {
                let (dw, df) = (wrapped.distance(*p, b), flat.distance(*p, b));
                assert!(dw <= df + 1e-12);
                max_w = max_w.max(dw);
                max_f = max_f.max(df);
            }
        }
        assert!(max_w <= max_f);
        // Under wraparound no BS is farther than the cluster allows.
        assert!(max_w < 400.0 * 3f64.sqrt() * 2.0);
    }

    #[test]
    fn corner_tie_goes_to_lowest_index() {
        let topo = build_topology(&NetworkConfig {
            wraparound: false,
            ..cfg7()
        })
        .unwrap();
        // The vertex at 30 degrees touches cell 0 and its two neighbors at
        // 0 and 60 degrees.
        let r = 400.0;
        let corner = [r * (PI / 6.0).cos(), r * (PI / 6.0).sin()];
        assert_eq!(topo.associate(corner), 0);
        // Midpoint of the BS1-BS2 edge: equidistant to both, nobody closer.
        let (a, b) = (topo.bs_positions[1], topo.bs_positions[2]);
        let mid = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
        assert_eq!(topo.associate(mid), 1);
    }

    #[test]
    fn pathloss_is_monotone_and_clamped() {
        assert_eq!(pathloss_gain(0.1, 0.392, 3.76), 1.0);
        assert_eq!(pathloss_gain(0.392, 0.392, 3.76), 1.0);
        let mut prev = 1.0;
        for i in 1..200 {
            let g = pathloss_gain(i as f64 * 5.0, 0.392, 3.76);
            assert!(g <= prev);
            prev = g;
        }
    }

    #[test]
    fn doubling_distance_scales_gain() {
        let ratio = pathloss_gain(200.0, 0.392, 3.76) / pathloss_gain(100.0, 0.392, 3.76);
        assert!((ratio - 2f64.powf(-3.76)).abs() < 1e-15);
    }

    #[test]
    fn channels_are_bit_exact_under_seed() {
        let cfg = cfg7();
        let topo = build_topology(&cfg).unwrap();
        let a = generate_channels(&topo, &cfg, 99);
        let b = generate_channels(&topo, &cfg, 99);
        assert_eq!(a, b);
        assert!(a
            .as_slice()
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite()));
        let c = generate_channels(&topo, &cfg, 100);
        assert_ne!(a, c);
    }

    #[test]
    fn unit_pathloss_channel_energy_is_m() {
        // One user parked on the BS: pathloss clamps to 1, so E|h|^2 = M.
        let cfg = NetworkConfig {
            num_cells: 1,
            users_per_cell: 4,
            antennas: 4,
            bands: 1,
            wraparound: false,
            ..Default::default()
        };
        let mut topo = build_topology(&cfg).unwrap();
        topo.user_positions[0] = [0.0, 0.0];
        let draws = 20_000;
        let samples: Vec<f64> = (0..draws)
            .map(|s| {
                let h = generate_channels(&topo, &cfg, s);
                h.get(0, 0, 0, 0).iter().map(|z| z.norm_sqr()).sum()
            })
            .collect();
        let mean = samples.iter().sum::<f64>() / draws as f64;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (draws as f64 - 1.0);
        let stderr = (var / draws as f64).sqrt();
        assert!(
            (mean - 4.0).abs() < 3.0 * stderr,
            "mean {mean}, stderr {stderr}"
        );
    }

    #[test]
    fn noise_power_db_arithmetic() {
        // -174 + 10 log10(2e7) + 9 = -91.99 dBm.
        let s = noise_power_watts(20e6, 9.0);
        let expected_dbm = -174.0 + 10.0 * 2e7f64.log10() + 9.0;
        assert!((watts_to_dbm(s) - expected_dbm).abs() < 1e-9);
        assert!((watts_to_dbm(s) - (-91.99)).abs() < 0.01);
        assert!((noise_power_watts(1.0, 0.0) - 10f64.powf(-20.4)).abs() < 1e-35);
        assert!((noise_power_watts(40e6, 9.0) / s - 2.0).abs() < 1e-12);
    }

    #[test]
    fn channel_files_replay() {
        let cfg = NetworkConfig { bands: 2, ..cfg7() };
        let topo = build_topology(&cfg).unwrap();
        let h = generate_channels(&topo, &cfg, 5);
        let dir = tempfile::tempdir().unwrap();
        let bin = dir.path().join("h.bin");
        let json = dir.path().join("h.json");
        h.write_binary(&bin).unwrap();
        h.write_json(&json).unwrap();
        assert_eq!(ChannelTensor::read_binary(&bin).unwrap(), h);
        assert_eq!(ChannelTensor::read_json(&json).unwrap(), h);
    }
}
