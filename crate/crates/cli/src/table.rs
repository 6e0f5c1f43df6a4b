//! `solution.csv`: the grid solution as a table, and a feedback policy read
//! back from it.

use qvi_core::simulate::{Policy, ValueFunction};
use qvi_core::solver::DiscretizedSolution;
use qvi_core::ExtValue;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TableError {
    #[error("csv: {0}")]
    Csv(String),
    #[error("bad header: {0}")]
    Header(String),
    #[error("row {row}: {msg}")]
    Row { row: usize, msg: String },
    #[error("need at least two rows, got {0}")]
    TooShort(usize),
}

/// Nodal values, consumption and switch targets per regime.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionTable {
    pub k: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub consumption: Vec<Vec<f64>>,
    pub targets: Vec<Vec<Option<usize>>>,
}

pub fn fmt_f64(x: f64) -> String {
    // Display prints the shortest decimal that parses back to the same bits
    format!("{x}")
}

impl SolutionTable {
    pub fn from_solution(s: &DiscretizedSolution) -> Self {
        Self {
            k: s.grid.nodes(),
            values: s.values.clone(),
            consumption: s.consumption.clone(),
            targets: s.switch_policy.clone(),
        }
    }

    pub fn num_regimes(&self) -> usize {
        self.values.len()
    }

    pub fn header(n: usize) -> Vec<String> {
        let mut h = vec!["k".to_string()];
        for i in 1..=n {
            h.extend([format!("v_{i}"), format!("c_{i}"), format!("switch_target_{i}")]);
        }
        h
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let n = self.num_regimes();
        w.write_record(Self::header(n)).expect("in-memory write");
        for (m, k) in self.k.iter().enumerate() {
            let mut rec = vec![fmt_f64(*k)];
            for i in 0..n {
                rec.push(fmt_f64(self.values[i][m]));
                rec.push(fmt_f64(self.consumption[i][m]));
                rec.push(self.targets[i][m].unwrap_or(0).to_string());
            }
            w.write_record(rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
    }

    pub fn parse(text: &str) -> Result<Self, TableError> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let header = r.headers().map_err(|e| TableError::Csv(e.to_string()))?.clone();
        let cols: Vec<&str> = header.iter().collect();
        if cols.len() < 4 || (cols.len() - 1) % 3 != 0 {
            return Err(TableError::Header(format!("{} columns", cols.len())));
        }
        let n = (cols.len() - 1) / 3;
        if cols != Self::header(n) {
            return Err(TableError::Header(cols.join(",")));
        }
        let mut t = Self {
            k: Vec::new(),
            values: vec![Vec::new(); n],
            consumption: vec![Vec::new(); n],
            targets: vec![Vec::new(); n],
        };
        for (row, rec) in r.records().enumerate() {
            let row = row + 1;
            let rec = rec.map_err(|e| TableError::Csv(e.to_string()))?;
            let bad = |msg: String| TableError::Row { row, msg };
            let num = |j: usize| -> Result<f64, TableError> {
                let s = &rec[j];
                let x: f64 = s.parse().map_err(|_| bad(format!("column {}: not a number: {s:?}", cols[j])))?;
                if !x.is_finite() {
                    return Err(bad(format!("column {}: not finite", cols[j])));
                }
                Ok(x)
            };
            let k = num(0)?;
            if let Some(&prev) = t.k.last() {
                if !(k > prev) {
                    return Err(bad("capital not strictly increasing".into()));
                }
            }
            t.k.push(k);
            for i in 0..n {
                t.values[i].push(num(1 + 3 * i)?);
                let c = num(2 + 3 * i)?;
                if c < 0.0 {
                    return Err(bad(format!("negative consumption in regime {}", i + 1)));
                }
                t.consumption[i].push(c);
                let s = &rec[3 + 3 * i];
                let target: usize = s.parse().map_err(|_| bad(format!("switch target {s:?}")))?;
                if target > n || target == i + 1 {
                    return Err(bad(format!("switch target {target} invalid for regime {}", i + 1)));
                }
                t.targets[i].push((target > 0).then_some(target));
            }
        }
        if t.k.len() < 2 {
            return Err(TableError::TooShort(t.k.len()));
        }
        Ok(t)
    }

    /// Cell `m` and weight with `k = (1 - w) k_m + w k_{m+1}`, clamped.
    fn locate(&self, k: f64) -> (usize, f64) {
        let n = self.k.len();
        let m = self.k.partition_point(|&x| x <= k).saturating_sub(1).min(n - 2);
        let w = ((k - self.k[m]) / (self.k[m + 1] - self.k[m])).clamp(0.0, 1.0);
        (m, w)
    }

    fn interpolate(&self, data: &[f64], k: f64) -> f64 {
        let (m, w) = self.locate(k);
        (1.0 - w) * data[m] + w * data[m + 1]
    }

    /// Nearest node, or `None` beyond half a cell outside the table.
    fn nearest(&self, k: f64) -> Option<usize> {
        let n = self.k.len();
        let half_lo = 0.5 * (self.k[1] - self.k[0]);
        let half_hi = 0.5 * (self.k[n - 1] - self.k[n - 2]);
        if !(k > self.k[0] - half_lo && k < self.k[n - 1] + half_hi) {
            return None;
        }
        let (m, w) = self.locate(k);
        Some(if w < 0.5 { m } else { m + 1 })
    }
}

impl Policy for SolutionTable {
    fn num_regimes(&self) -> usize {
        self.values.len()
    }

    fn consumption(&self, i: usize, k: f64) -> f64 {
        self.interpolate(&self.consumption[i - 1], k)
    }

    fn switch_target(&self, i: usize, k: f64) -> Option<usize> {
        self.targets[i - 1][self.nearest(k)?]
    }

    fn k_max(&self) -> f64 {
        *self.k.last().expect("nonempty table")
    }

    fn resolution(&self) -> Option<f64> {
        Some((self.k[self.k.len() - 1] - self.k[0]) / (self.k.len() - 1) as f64)
    }
}

impl ValueFunction for SolutionTable {
    fn value(&self, i: usize, k: f64) -> ExtValue {
        ExtValue::Finite(self.interpolate(&self.values[i - 1], k))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use qvi_core::solver::{solve_qvi, Grid, SolverConfig};
    use qvi_core::{Preferences, StationaryProblem, SwitchingCostMatrix};

    fn solved() -> DiscretizedSolution {
        let p = StationaryProblem::new(
            [(0.2, 0.0), (0.3, 1.0)],
            Preferences::new(2.0, 0.04, 0.0, 0.05),
            SwitchingCostMatrix::uniform(2, 0.05),
        );
        solve_qvi(&p, &Grid::new(0.01, 6.0, 301).unwrap(), &SolverConfig::default()).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let s = solved();
        let t = SolutionTable::from_solution(&s);
        let text = t.to_csv();
        assert!(text.starts_with("k,v_1,c_1,switch_target_1,v_2,c_2,switch_target_2\n"));
        assert!(!text.contains('\r'));
        let back = SolutionTable::parse(&text).unwrap();
        assert_eq!(back, t);
        for (a, b) in back.values.iter().flatten().zip(s.values.iter().flatten()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(back.to_csv(), text);
    }

    #[test]
    fn policy_matches_the_numeric_policy() {
        use qvi_core::simulate::NumericPolicy;
        let s = solved();
        let t = SolutionTable::from_solution(&s);
        let np = NumericPolicy::new(&s);
        for k in [0.02, 0.5, 1.7, 2.49, 3.3, 5.99] {
            for i in 1..=2 {
                assert!((t.consumption(i, k) - np.consumption(i, k)).abs() <= 1e-12);
                assert_eq!(t.switch_target(i, k), np.switch_target(i, k), "i={i} k={k}");
            }
        }
        assert_eq!(t.switch_target(1, 7.0), None);
    }

    #[test]
    fn rejects_malformed_tables() {
        let ok = "k,v_1,c_1,switch_target_1\n0.1,-1,0.5,0\n0.2,-0.9,0.6,0\n";
        assert!(SolutionTable::parse(ok).is_ok());
        let cases = [
            "",
            "k,v_1,c_1\n0.1,-1,0.5\n0.2,-1,0.5\n",
            "k,v_2,c_2,switch_target_2\n0.1,-1,0.5,0\n0.2,-0.9,0.6,0\n",
            "k,v_1,c_1,switch_target_1\n0.1,-1,0.5,0\n",
            "k,v_1,c_1,switch_target_1\n0.2,-1,0.5,0\n0.1,-0.9,0.6,0\n",
            "k,v_1,c_1,switch_target_1\n0.1,-1,0.5,1\n0.2,-0.9,0.6,0\n",
            "k,v_1,c_1,switch_target_1\n0.1,-1,-0.5,0\n0.2,-0.9,0.6,0\n",
            "k,v_1,c_1,switch_target_1\n0.1,nan,0.5,0\n0.2,-0.9,0.6,0\n",
            "k,v_1,c_1,switch_target_1\n0.1,-1,0.5\n0.2,-0.9,0.6,0\n",
        ];
        for c in cases {
            assert!(SolutionTable::parse(c).is_err(), "{c:?}");
        }
    }
}
