//! Result files: metrics JSON and plot-ready CSVs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::simulator::{ExperimentResult, SweepRow};

#[derive(Debug, Clone, Serialize)]
struct MetricsEntry {
    sumlog: f64,
    edge_rate_mbps: f64,
    mean_rate_mbps: f64,
}

/// `{ scheme: { sumlog, edge_rate_mbps, mean_rate_mbps } }`, pretty printed.
pub fn metrics_json(results: &[ExperimentResult]) -> String {
    let map: BTreeMap<&str, MetricsEntry> = results
        .iter()
        .map(|r| {
            let m = &r.metrics;
            (
                r.scheme.tag(),
                MetricsEntry {
                    sumlog: m.sumlog,
                    edge_rate_mbps: m.edge_rate_mbps,
                    mean_rate_mbps: m.mean_rate_mbps,
                },
            )
        })
        .collect();
    let mut s = serde_json::to_string_pretty(&map).expect("metrics serialize");
    s.push('\n');
    s
}

/// `scheme,rate_mbps,percentile`.
pub fn cdf_csv(results: &[ExperimentResult]) -> String {
    let mut out = String::from("scheme,rate_mbps,percentile\n");
    for r in results {
        for (rate, p) in r.rate_cdf() {
            writeln!(out, "{},{rate},{p}", r.scheme).unwrap();
        }
    }
    out
}

/// `scheme,mean_slot_ms,mean_iteration_ms`.
pub fn timing_csv(results: &[ExperimentResult]) -> String {
    let mut out = String::from("scheme,mean_slot_ms,mean_iteration_ms\n");
    for r in results {
        writeln!(
            out,
            "{},{},{}",
            r.scheme, r.timing.mean_slot_ms, r.timing.mean_iteration_ms
        )
        .unwrap();
    }
    out
}

/// Every slot's trace, prefixed with `drop,slot`: `drop,slot,iter,f0,pow_b0..`.
pub fn slot_traces_csv(result: &ExperimentResult) -> String {
    let mut out = String::new();
    for d in &result.drops {
        for s in &d.slots {
            let csv = s.trace.to_csv();
            let mut lines = csv.lines();
            let header = lines.next().unwrap_or("iter,f0");
            if out.is_empty() {
                writeln!(out, "drop,slot,{header}").unwrap();
            }
            for line in lines {
                writeln!(out, "{},{},{line}", d.drop, s.slot).unwrap();
            }
        }
    }
    out
}

/// `scheme,PT_dBm,sumrate_mbps`.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("scheme,PT_dBm,sumrate_mbps\n");
    for r in rows {
        writeln!(out, "{},{},{}", r.scheme, r.pt_dbm, r.sumrate_mbps).unwrap();
    }
    out
}

pub fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), contents)?;
    Ok(())
}
