//! Python bindings: experiment configs, single-slot scheme runs, PF
//! experiments, power sweeps and the assignment solvers.

use fpsched::assignment::{greedy_assign, hungarian, ScoreMatrix};
use fpsched::config::{dbm_to_watts, watts_to_dbm, PowerMode};
use fpsched::network::{
    build_topology, generate_channels, noise_power, ChannelTensor, Dims, NoiseModel,
};
use fpsched::simulator::{self, drop_seed, slot_seed, ExperimentConfig, Scheme};
use fpsched::Weights;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: fpsched::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn scheme(name: &str) -> PyResult<Scheme> {
    name.parse().map_err(err)
}

/// Network profile plus slot, drop and iteration counts.
#[pyclass(name = "Config", from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: ExperimentConfig,
}

#[pymethods]
impl PyConfig {
    #[new]
    #[pyo3(signature = (
        num_cells=7, antennas=2, users_per_cell=5, bands=1, pt_dbm=43.0,
        slots=100, drops=10, iterations=15, power_mode="joint", seed=1
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        num_cells: usize,
        antennas: usize,
        users_per_cell: usize,
        bands: usize,
        pt_dbm: f64,
        slots: usize,
        drops: usize,
        iterations: usize,
        power_mode: &str,
        seed: u64,
    ) -> PyResult<Self> {
        let mut inner = ExperimentConfig {
            slots,
            drops,
            iterations,
            ..Default::default()
        };
        let n = &mut inner.network;
        n.num_cells = num_cells;
        n.antennas = antennas;
        n.users_per_cell = users_per_cell;
        n.bands = bands;
        n.power_watts = dbm_to_watts(pt_dbm);
        n.rng_seed = seed;
        inner.power_mode = power_mode.parse::<PowerMode>().map_err(err)?;
        inner.validate().map_err(err)?;
        Ok(PyConfig { inner })
    }

    /// Network profile as JSON (same keys as the CLI config files).
    fn network_json(&self) -> String {
        self.inner.network.to_json_string()
    }

    #[getter]
    fn pt_dbm(&self) -> f64 {
        watts_to_dbm(self.inner.network.power_watts)
    }

    #[getter]
    fn num_users(&self) -> usize {
        Dims::from_config(&self.inner.network).num_users()
    }

    fn __repr__(&self) -> String {
        let n = &self.inner.network;
        format!(
            "Config(num_cells={}, antennas={}, users_per_cell={}, bands={}, pt_dbm={:.1}, slots={}, drops={}, iterations={})",
            n.num_cells,
            n.antennas,
            n.users_per_cell,
            n.bands,
            self.pt_dbm(),
            self.inner.slots,
            self.inner.drops,
            self.inner.iterations
        )
    }
}

/// One drop and one fading realization.
#[pyclass(name = "Instance")]
struct PyInstance {
    cfg: ExperimentConfig,
    channels: ChannelTensor,
    noise: NoiseModel,
}

#[pymethods]
impl PyInstance {
    #[new]
    #[pyo3(signature = (config, drop=0, slot=0))]
    fn new(config: &PyConfig, drop: usize, slot: usize) -> PyResult<Self> {
        let cfg = config.inner.clone();
        let root = cfg.network.rng_seed;
        let mut net = cfg.network.clone();
        net.rng_seed = drop_seed(root, drop);
        let topo = build_topology(&net).map_err(err)?;
        let channels = generate_channels(&topo, &net, slot_seed(root, drop, slot));
        let noise = noise_power(&net);
        Ok(PyInstance {
            cfg,
            channels,
            noise,
        })
    }

    /// Own-cell channel gain `|h|^2` of every user on band 0, indexed `b * K + k`.
    fn direct_gains(&self) -> Vec<f64> {
        let d = self.channels.dims();
        (0..d.cells)
            .flat_map(|b| (0..d.users_per_cell).map(move |k| (b, k)))
            .map(|(b, k)| {
                self.channels
                    .get(b, k, b, 0)
                    .iter()
                    .map(|z| z.norm_sqr())
                    .sum()
            })
            .collect()
    }

    /// Run a scheme once. Returns `f0`, the per-iteration `trace`, the
    /// `schedule` as lists per (b, f) and per-user `rates_mbps`.
    #[pyo3(signature = (scheme_name, weights=None))]
    fn run<'py>(
        &self,
        py: Python<'py>,
        scheme_name: &str,
        weights: Option<Vec<f64>>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let d = self.channels.dims();
        let w = match weights {
            Some(v) => Weights::from_vec(d, v).map_err(err)?,
            None => Weights::uniform(d, 1.0),
        };
        let s = scheme(scheme_name)?;
        let cfg = &self.cfg;
        let out = py.detach(|| {
            simulator::run_scheme(
                s,
                &self.channels,
                &self.noise,
                &w,
                cfg.network.power_watts,
                cfg.iterations,
                cfg.power_mode,
                0,
                cfg.network.rng_seed,
            )
        });
        let rates = fpsched::model::user_rates_mbps(
            &out.schedule,
            &out.beams,
            &self.channels,
            &self.noise,
            cfg.network.bandwidth_hz,
        );
        let schedule: Vec<Vec<usize>> = (0..d.cells)
            .flat_map(|b| (0..d.bands).map(move |f| (b, f)))
            .map(|(b, f)| out.schedule.users(b, f).to_vec())
            .collect();
        let dict = PyDict::new(py);
        dict.set_item("f0", out.f0(&self.channels, &self.noise, &w))?;
        dict.set_item("trace", out.trace.objectives())?;
        dict.set_item("schedule", schedule)?;
        dict.set_item("rates_mbps", rates)?;
        dict.set_item("bs_power", out.beams.powers())?;
        Ok(dict)
    }
}

/// Proportional-fair experiment for one scheme.
#[pyfunction]
fn run_experiment<'py>(
    py: Python<'py>,
    config: &PyConfig,
    scheme_name: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let s = scheme(scheme_name)?;
    let cfg = config.inner.clone();
    let r = py
        .detach(|| simulator::run_experiment(&cfg, s))
        .map_err(err)?;
    let dict = PyDict::new(py);
    dict.set_item("sumlog", r.metrics.sumlog)?;
    dict.set_item("edge_rate_mbps", r.metrics.edge_rate_mbps)?;
    dict.set_item("mean_rate_mbps", r.metrics.mean_rate_mbps)?;
    dict.set_item("sumlog_per_drop", r.metrics.sumlog_per_drop.clone())?;
    dict.set_item("mean_slot_ms", r.timing.mean_slot_ms)?;
    dict.set_item("mean_iteration_ms", r.timing.mean_iteration_ms)?;
    dict.set_item("rates_mbps", r.pooled_rates())?;
    Ok(dict)
}

/// `[(scheme, pt_dbm, sumrate_mbps), ...]` with unit weights.
#[pyfunction]
fn power_sweep(
    py: Python<'_>,
    config: &PyConfig,
    schemes: Vec<String>,
    pt_dbm: Vec<f64>,
) -> PyResult<Vec<(String, f64, f64)>> {
    let list = schemes
        .iter()
        .map(|s| scheme(s))
        .collect::<PyResult<Vec<_>>>()?;
    let cfg = config.inner.clone();
    let rows = py
        .detach(|| simulator::power_sweep(&cfg, &list, &pt_dbm))
        .map_err(err)?;
    Ok(rows
        .into_iter()
        .map(|r| (r.scheme.tag().to_string(), r.pt_dbm, r.sumrate_mbps))
        .collect())
}

/// Sum-log utility and edge rate of the proposed scheme under both budgets.
#[pyfunction]
fn joint_vs_perband<'py>(py: Python<'py>, config: &PyConfig) -> PyResult<Bound<'py, PyDict>> {
    let cfg = config.inner.clone();
    let c = py
        .detach(|| simulator::joint_vs_perband(&cfg))
        .map_err(err)?;
    let dict = PyDict::new(py);
    dict.set_item("joint_sumlog", c.joint.sumlog)?;
    dict.set_item("per_band_sumlog", c.per_band.sumlog)?;
    dict.set_item("sumlog_delta", c.sumlog_delta)?;
    dict.set_item("edge_rate_delta_mbps", c.edge_rate_delta_mbps)?;
    dict.set_item("relative_sumlog_delta", c.relative_sumlog_delta())?;
    Ok(dict)
}

fn score_matrix(rows: Vec<Vec<f64>>) -> PyResult<ScoreMatrix> {
    ScoreMatrix::from_rows(&rows).map_err(err)
}

/// Maximum-weight assignment of columns (beams) to distinct rows (users).
/// Returns `(row_of_col, value)`.
#[pyfunction(name = "hungarian")]
fn py_hungarian(rows: Vec<Vec<f64>>) -> PyResult<(Vec<usize>, f64)> {
    let (a, v) = hungarian(&score_matrix(rows)?).map_err(err)?;
    Ok((a.row_of_col, v))
}

/// Columns in order, each taking its best remaining row.
#[pyfunction(name = "greedy_assign")]
fn py_greedy_assign(rows: Vec<Vec<f64>>) -> PyResult<(Vec<usize>, f64)> {
    let m = score_matrix(rows)?;
    let a = greedy_assign(&m).map_err(err)?;
    let v = a.value(&m);
    Ok((a.row_of_col, v))
}

#[pymodule]
fn pyfpsched(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PyInstance>()?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(power_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(joint_vs_perband, m)?)?;
    m.add_function(wrap_pyfunction!(py_hungarian, m)?)?;
    m.add_function(wrap_pyfunction!(py_greedy_assign, m)?)?;
    m.add(
        "SCHEMES",
        Scheme::ALL.iter().map(|s| s.tag()).collect::<Vec<_>>(),
    )?;
    Ok(())
}
