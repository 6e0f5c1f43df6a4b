use serde::{Deserialize, Serialize};

use super::scheme::{equation_residual, Right, Stencil};
use super::{DiscretizedSolution, Discretization, SolutionMode};
use crate::problem::StationaryProblem;

/// A node where neither branch of the QVI holds within the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeFlag {
    pub regime: usize,
    pub node: usize,
    pub k: f64,
    pub residual: f64,
}

/// Residual diagnostics of a grid solution.
///
/// The per-node residual is `max(cont - v, obstacle - v)`, where `cont` is
/// the continuation value the scheme assigns to the node given its
/// neighbours. It is zero exactly at a fixed point and is measured in value
/// units, so it is directly comparable with the sweep tolerance.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    /// Violation threshold, ten times the solver tolerance.
    pub threshold: f64,
    pub max_residual: f64,
    pub max_residual_node: Option<usize>,
    /// Largest `|max_b H_b - rho v|` over continuation nodes.
    pub max_hjb_residual: f64,
    /// Largest `obstacle - v`, clipped at zero.
    pub max_obstacle_violation: f64,
    pub violations: Vec<NodeFlag>,
}

impl ResidualReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Evaluates both branches of the discrete QVI at every node.
pub fn qvi_residual(sol: &DiscretizedSolution, p: &StationaryProblem) -> ResidualReport {
    let d = Discretization::new(p, sol.grid, &sol.config);
    let n = sol.grid.n;
    let all: Vec<usize> = p.regime_ids().collect();
    let mut rep = ResidualReport { threshold: 10.0 * sol.config.tol, ..Default::default() };
    let regimes: Vec<usize> = match sol.mode {
        SolutionMode::Switching => all.clone(),
        SolutionMode::Vanishing => vec![1],
    };
    let top_regime = sol
        .active
        .as_ref()
        .map(|a| a[n.saturating_sub(2)])
        .unwrap_or(p.num_regimes());
    for &i in &regimes {
        let row = &sol.values[i - 1];
        let (set, closure_regime): (&[usize], usize) = match sol.mode {
            SolutionMode::Switching => (std::slice::from_ref(&regimes[i - 1]), i),
            SolutionMode::Vanishing => (&all, top_regime),
        };
        for m in 0..n {
            let v = row[m];
            let cont = d.continuation(row, m, set, closure_regime).value;
            let (r, stay) = match sol.mode {
                SolutionMode::Switching => {
                    let obs = d.obstacle(&sol.values, i, m).0.max_with(f64::NEG_INFINITY);
                    rep.max_obstacle_violation = rep.max_obstacle_violation.max(obs - v);
                    ((cont - v).max(obs - v), cont >= obs)
                }
                SolutionMode::Vanishing => (cont - v, true),
            };
            if stay && m + 1 < n {
                let st = Stencil {
                    k: sol.grid.node(m),
                    h: sol.grid.h(),
                    left: (m > 0).then(|| row[m - 1]),
                    right: Right::Value(row[m + 1]),
                };
                let e = equation_residual(&d.ham, set, d.rho, &st, v).abs();
                rep.max_hjb_residual = rep.max_hjb_residual.max(e);
            }
            if r.abs() > rep.max_residual {
                rep.max_residual = r.abs();
                rep.max_residual_node = Some(m);
            }
            if r.abs() > rep.threshold {
                rep.violations.push(NodeFlag { regime: i, node: m, k: sol.grid.node(m), residual: r });
            }
        }
    }
    rep
}
