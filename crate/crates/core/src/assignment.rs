//! Per-cell user-to-beam assignment under fixed beamformers.
//!
//! With every beam of the network held fixed, a user's total received power
//! `zeta` does not depend on which users of any cell occupy which beams, so
//! the network-wide weighted rate separates into one linear sum assignment
//! problem per (BS, band).

use std::fmt::Write as _;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{inner, link_power, norm_sqr, BeamformerSet, Schedule, Weights};
use crate::network::{ChannelTensor, NoiseModel};

/// Beams with power at or below this fraction of `P_T` count as zero.
pub const NONZERO_BEAM_FRACTION: f64 = 1e-12;

/// Interference floor relative to the noise power.
const DENOMINATOR_FLOOR: f64 = 1e-12;

/// Dense row-major real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl ScoreMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(ScoreMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Dimension("ragged matrix".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        ScoreMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.cols + j] = value;
    }

    /// Rows are users, columns are beams; header `beam0..beamN`.
    pub fn to_csv(&self) -> String {
        let mut out = (0..self.cols)
            .map(|j| format!("beam{j}"))
            .collect::<Vec<_>>()
            .join(",");
        out.push('\n');
        for i in 0..self.rows {
            let row: Vec<String> = (0..self.cols)
                .map(|j| format!("{:e}", self.get(i, j)))
                .collect();
            writeln!(out, "{}", row.join(",")).unwrap();
        }
        out
    }
}

/// One row per column: `row_of_col[j]` is the user placed on beam `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub rows: usize,
    pub row_of_col: Vec<usize>,
}

impl Assignment {
    pub fn cols(&self) -> usize {
        self.row_of_col.len()
    }

    pub fn x(&self, i: usize, j: usize) -> bool {
        self.row_of_col[j] == i
    }

    pub fn row_sums(&self) -> Vec<usize> {
        let mut sums = vec![0; self.rows];
        for &i in &self.row_of_col {
            sums[i] += 1;
        }
        sums
    }

    pub fn col_sums(&self) -> Vec<usize> {
        (0..self.cols())
            .map(|j| (0..self.rows).filter(|&i| self.x(i, j)).count())
            .collect()
    }

    pub fn value(&self, m: &ScoreMatrix) -> f64 {
        self.row_of_col
            .iter()
            .enumerate()
            .map(|(j, &i)| m.get(i, j))
            .sum()
    }
}

/// Minimum-cost assignment of `n` workers to distinct jobs out of `m >= n`
/// by shortest augmenting paths, `O(n^2 m)`. Returns the job of each worker
/// and the final worker/job potentials (1-based, index 0 unused).
fn shortest_augmenting_path(
    n: usize,
    m: usize,
    cost: impl Fn(usize, usize) -> f64,
) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    // p[job] = worker holding it (1-based, 0 = free)
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for worker in 1..=n {
        p[0] = worker;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut job_of_worker = vec![0; n];
    for j in 1..=m {
        if p[j] != 0 {
            job_of_worker[p[j] - 1] = j - 1;
        }
    }
    (job_of_worker, u, v)
}

/// Maximum-sum assignment restricted to the given rows and columns.
fn max_assignment_on(
    m: &ScoreMatrix,
    rows: &[usize],
    cols: &[usize],
) -> (Vec<usize>, f64, Vec<f64>, Vec<f64>) {
    let (job_of_worker, u, v) =
        shortest_augmenting_path(cols.len(), rows.len(), |w, job| -m.get(rows[job], cols[w]));
    let picked: Vec<usize> = job_of_worker.iter().map(|&job| rows[job]).collect();
    let value = picked.iter().zip(cols).map(|(&i, &j)| m.get(i, j)).sum();
    (picked, value, u, v)
}

/// Exact maximum-weight assignment of every column to a distinct row of an
/// `m x n` matrix, `m >= n`. Among optimal assignments the one whose
/// `row_of_col` vector is lexicographically smallest is returned.
pub fn hungarian(m: &ScoreMatrix) -> Result<(Assignment, f64)> {
    let (rows, cols) = (m.rows(), m.cols());
    if cols > rows {
        return Err(Error::TooManyColumns { rows, cols });
    }
    for i in 0..rows {
        for j in 0..cols {
            if !m.get(i, j).is_finite() {
                return Err(Error::NonFinite(i, j));
            }
        }
    }
    if cols == 0 {
        return Ok((
            Assignment {
                rows,
                row_of_col: Vec::new(),
            },
            0.0,
        ));
    }
    let all_rows: Vec<usize> = (0..rows).collect();
    let all_cols: Vec<usize> = (0..cols).collect();
    let (mut current, opt, u, v) = max_assignment_on(m, &all_rows, &all_cols);

    let scale = (0..cols)
        .map(|j| (0..rows).map(|i| m.get(i, j).abs()).fold(0.0, f64::max))
        .sum::<f64>()
        .max(f64::MIN_POSITIVE);
    let value_tol = 1e-13 * scale;
    let reduced_tol = 1e-9 * scale;

    // Lexicographic refinement: an edge with positive reduced cost under the
    // optimal dual is in no optimal assignment, so only zero-reduced-cost
    // edges are probed with an exact sub-problem.
    let mut fixed_sum = 0.0;
    for j in 0..cols {
        let taken: Vec<usize> = current[..j].to_vec();
        let incumbent = current[j];
        for i in 0..incumbent {
            if taken.contains(&i) {
                continue;
            }
            let reduced = -m.get(i, j) - u[j + 1] - v[i + 1];
            if reduced > reduced_tol {
                continue;
            }
            let rest_rows: Vec<usize> = (0..rows)
                .filter(|r| *r != i && !taken.contains(r))
                .collect();
            let rest_cols: Vec<usize> = (j + 1..cols).collect();
            let (sub, sub_value, _, _) = if rest_cols.is_empty() {
                (Vec::new(), 0.0, Vec::new(), Vec::new())
            } else {
                max_assignment_on(m, &rest_rows, &rest_cols)
            };
            if fixed_sum + m.get(i, j) + sub_value >= opt - value_tol {
                current.truncate(j);
                current.push(i);
                current.extend(sub);
                break;
            }
        }
        fixed_sum += m.get(current[j], j);
    }

    let assignment = Assignment {
        rows,
        row_of_col: current,
    };
    let value = assignment.value(m);
    Ok((assignment, value))
}

/// Beams in index order, each taking the best remaining row; ties go to
/// the lowest row index.
pub fn greedy_assign(m: &ScoreMatrix) -> Result<Assignment> {
    let (rows, cols) = (m.rows(), m.cols());
    if cols > rows {
        return Err(Error::TooManyColumns { rows, cols });
    }
    let mut taken = vec![false; rows];
    let mut row_of_col = Vec::with_capacity(cols);
    for j in 0..cols {
        let mut best: Option<usize> = None;
        for (i, &t) in taken.iter().enumerate() {
            if t {
                continue;
            }
            if best.is_none_or(|bi| m.get(i, j) > m.get(bi, j)) {
                best = Some(i);
            }
        }
        let i = best.expect("rows >= cols");
        taken[i] = true;
        row_of_col.push(i);
    }
    Ok(Assignment { rows, row_of_col })
}

/// Weighted rates of every user of one BS on each of its nonzero beams.
#[derive(Debug, Clone)]
pub struct RateMatrix {
    pub bs: usize,
    pub band: usize,
    /// `K x N`: rows are users of the BS, columns its nonzero beams.
    pub rates: ScoreMatrix,
    /// Total received power plus noise of each user of the BS.
    pub zeta: Vec<f64>,
    /// Current occupant of each nonzero beam.
    pub beam_users: Vec<usize>,
    pub beams: Vec<Vec<Complex64>>,
}

/// `zeta(k, b, f)`: power received from every scheduled beam plus noise.
pub fn zeta(
    b: usize,
    k: usize,
    f: usize,
    schedule: &Schedule,
    beams: &BeamformerSet,
    channels: &ChannelTensor,
    noise: &NoiseModel,
) -> f64 {
    link_power(b, k, f, schedule, beams, channels, noise).total()
}

/// `r(i, j) = w_i log(1 + g_ij / (zeta_i - g_ij))` with
/// `g_ij = |h_i^H v_j|^2` over the nonzero beams of BS `b` on band `f`.
#[allow(clippy::too_many_arguments)]
pub fn build_rate_matrix(
    b: usize,
    f: usize,
    beams: &BeamformerSet,
    schedule: &Schedule,
    channels: &ChannelTensor,
    noise: &NoiseModel,
    weights: &Weights,
    power_watts: f64,
) -> RateMatrix {
    let d = channels.dims();
    let threshold = NONZERO_BEAM_FRACTION * power_watts;
    let (beam_users, live): (Vec<usize>, Vec<Vec<Complex64>>) = schedule
        .users(b, f)
        .iter()
        .filter(|&&k| norm_sqr(beams.get(b, k, f)) > threshold)
        .map(|&k| (k, beams.get(b, k, f).to_vec()))
        .unzip();
    let n = live.len();
    let mut rates = ScoreMatrix::zeros(d.users_per_cell, n);
    let mut zetas = Vec::with_capacity(d.users_per_cell);
    for i in 0..d.users_per_cell {
        let sigma2 = noise.get(b, i, f);
        // Everything except the live beams of this BS.
        let mut background = sigma2;
        for src in 0..d.cells {
            let h = channels.get(b, i, src, f);
            for &kk in schedule.users(src, f) {
                if src == b && beam_users.contains(&kk) {
                    continue;
                }
                background += inner(h, beams.get(src, kk, f)).norm_sqr();
            }
        }
        let h_own = channels.get(b, i, b, f);
        let gains: Vec<f64> = live.iter().map(|v| inner(h_own, v).norm_sqr()).collect();
        let own_total: f64 = gains.iter().sum();
        zetas.push(background + own_total);
        let w = weights.get(b, i);
        for (j, &g) in gains.iter().enumerate() {
            let others: f64 = gains
                .iter()
                .enumerate()
                .filter(|&(jj, _)| jj != j)
                .map(|(_, x)| x)
                .sum();
            let interference = (background + others).max(sigma2 * DENOMINATOR_FLOOR);
            rates.set(i, j, w * (g / interference).ln_1p());
        }
    }
    RateMatrix {
        bs: b,
        band: f,
        rates,
        zeta: zetas,
        beam_users,
        beams: live,
    }
}

/// Reassign users to the fixed beams of every (BS, band) by solving the
/// per-cell assignment problems exactly, then move each beam onto its new
/// user. Dead beams are dropped.
pub fn schedule_update(
    schedule: &Schedule,
    beams: &BeamformerSet,
    channels: &ChannelTensor,
    noise: &NoiseModel,
    weights: &Weights,
    power_watts: f64,
) -> (Schedule, BeamformerSet) {
    reassign(
        schedule,
        beams,
        channels,
        noise,
        weights,
        power_watts,
        |m| hungarian(m).expect("beams never outnumber users").0,
    )
}

/// Like [`schedule_update`] but with a caller-supplied assignment rule.
pub fn reassign(
    schedule: &Schedule,
    beams: &BeamformerSet,
    channels: &ChannelTensor,
    noise: &NoiseModel,
    weights: &Weights,
    power_watts: f64,
    solve: impl Fn(&ScoreMatrix) -> Assignment,
) -> (Schedule, BeamformerSet) {
    let d = channels.dims();
    let mut new_schedule = schedule.clone();
    let mut new_beams = BeamformerSet::zeros(d);
    for b in 0..d.cells {
        for f in 0..d.bands {
            let rm =
                build_rate_matrix(b, f, beams, schedule, channels, noise, weights, power_watts);
            let assignment = solve(&rm.rates);
            for (j, &k) in assignment.row_of_col.iter().enumerate() {
                new_beams.set(b, k, f, &rm.beams[j]);
            }
            new_schedule
                .set(b, f, assignment.row_of_col)
                .expect("assignment is injective");
        }
    }
    (new_schedule, new_beams)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: &[&[f64]]) -> ScoreMatrix {
        ScoreMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn identity_gives_diagonal() {
        let m = mat(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]);
        let (a, v) = hungarian(&m).unwrap();
        assert_eq!(a.row_of_col, vec![0, 1, 2]);
        assert_eq!(v, 3.0);
    }

    #[test]
    fn one_by_one() {
        let (a, v) = hungarian(&mat(&[&[-2.5]])).unwrap();
        assert_eq!(a.row_of_col, vec![0]);
        assert_eq!(v, -2.5);
    }

    #[test]
    fn empty_columns_are_valid() {
        let (a, v) = hungarian(&ScoreMatrix::zeros(3, 0)).unwrap();
        assert!(a.row_of_col.is_empty());
        assert_eq!(v, 0.0);
        assert_eq!(a.row_sums(), vec![0, 0, 0]);
    }

    #[test]
    fn rejects_wide_and_non_finite() {
        assert!(matches!(
            hungarian(&ScoreMatrix::zeros(1, 2)),
            Err(Error::TooManyColumns { .. })
        ));
        assert!(matches!(
            hungarian(&mat(&[&[f64::NAN]])),
            Err(Error::NonFinite(0, 0))
        ));
    }

    #[test]
    fn greedy_trap() {
        let m = mat(&[&[10.0, 9.0], &[8.0, 1.0]]);
        let g = greedy_assign(&m).unwrap();
        assert_eq!(g.row_of_col, vec![0, 1]);
        assert_eq!(g.value(&m), 11.0);
        let (h, v) = hungarian(&m).unwrap();
        assert_eq!(h.row_of_col, vec![1, 0]);
        assert_eq!(v, 17.0);
    }

    #[test]
    fn ties_resolve_lexicographically() {
        let m = ScoreMatrix::new(4, 2, vec![1.0; 8]).unwrap();
        assert_eq!(hungarian(&m).unwrap().0.row_of_col, vec![0, 1]);
        // Rows 0 and 2 tie everywhere; row 1 is never useful.
        let m = mat(&[&[5.0, 5.0], &[0.0, 0.0], &[5.0, 5.0]]);
        assert_eq!(hungarian(&m).unwrap().0.row_of_col, vec![0, 2]);
        let m = mat(&[&[1.0, 3.0], &[3.0, 1.0], &[2.0, 2.0]]);
        // [1, 0] is the unique optimum.
        assert_eq!(
            hungarian(&m).unwrap(),
            (
                Assignment {
                    rows: 3,
                    row_of_col: vec![1, 0]
                },
                6.0
            )
        );
    }

    #[test]
    fn greedy_ties_go_to_lowest_row() {
        let m = mat(&[&[1.0], &[1.0]]);
        assert_eq!(greedy_assign(&m).unwrap().row_of_col, vec![0]);
    }

    #[test]
    fn constraint_sums() {
        let m = mat(&[&[0.3, 0.9], &[0.5, 0.2], &[0.8, 0.1]]);
        let (a, _) = hungarian(&m).unwrap();
        assert_eq!(a.col_sums(), vec![1, 1]);
        assert!(a.row_sums().iter().all(|&s| s <= 1));
    }

    #[test]
    fn rate_matrix_csv() {
        let m = mat(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let csv = m.to_csv();
        assert_eq!(csv.lines().next().unwrap(), "beam0,beam1");
        assert_eq!(csv.lines().count(), 3);
    }
}
