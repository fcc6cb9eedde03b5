use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

/// Objective and per-BS transmit power after one iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub f0: f64,
    pub bs_power: Vec<f64>,
}

/// Ordered per-iteration record; entry 0 is the initialization.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub records: Vec<IterationRecord>,
}

impl Trace {
    pub fn push(&mut self, iter: usize, f0: f64, bs_power: Vec<f64>) {
        self.records.push(IterationRecord { iter, f0, bs_power });
    }

    pub fn objectives(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.f0).collect()
    }

    pub fn last_f0(&self) -> Option<f64> {
        self.records.last().map(|r| r.f0)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Whether every consecutive pair satisfies `next >= prev * (1 - rel_tol)`
    /// (with the tolerance taken on `|prev|`).
    pub fn is_monotone(&self, rel_tol: f64) -> bool {
        self.records
            .windows(2)
            .all(|w| w[1].f0 >= w[0].f0 - rel_tol * w[0].f0.abs())
    }

    /// `iter,f0,pow_b0..pow_bB` with a header row.
    pub fn to_csv(&self) -> String {
        let cells = self.records.first().map_or(0, |r| r.bs_power.len());
        let mut out = String::from("iter,f0");
        for b in 0..cells {
            write!(out, ",pow_b{b}").unwrap();
        }
        out.push('\n');
        for r in &self.records {
            write!(out, "{},{:e}", r.iter, r.f0).unwrap();
            for p in &r.bs_power {
                write!(out, ",{p:e}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let mut t = Trace::default();
        t.push(0, 1.5, vec![2.0, 3.0]);
        t.push(1, 2.5, vec![2.0, 3.0]);
        let csv = t.to_csv();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], "iter,f0,pow_b0,pow_b1");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("0,1.5e0,"));
        assert!(t.is_monotone(0.0));
    }

    #[test]
    fn monotone_tolerance() {
        let mut t = Trace::default();
        t.push(0, 100.0, vec![]);
        t.push(1, 100.0 - 1e-8, vec![]);
        assert!(t.is_monotone(1e-9));
        t.push(2, 99.0, vec![]);
        assert!(!t.is_monotone(1e-9));
    }
}
