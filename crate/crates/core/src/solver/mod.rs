//! Numerical solution of the stationary HJB quasi-variational inequality on a
//! uniform capital grid.
//!
//! The scheme is first-order upwind and monotone. Every sweep visits the
//! nodes in alternating directions and, at each node, solves the implicit
//! local equation for the continuation value of every regime, then couples
//! the regimes through the switching obstacle at that node.

mod extract;
pub mod hamiltonian;
mod residual;
mod scheme;

use serde::{Deserialize, Serialize};

use crate::error::{QviError, Result};
use crate::ext::ExtValue;
use crate::problem::{StationaryProblem, SwitchingCostMatrix};

pub use extract::extract_regions;
pub use hamiltonian::{hamiltonian, switch_obstacle, ConsumptionMode, HamPoint, Hamiltonian};
pub use residual::{qvi_residual, NodeFlag, ResidualReport};

use hamiltonian::switch_obstacle_by;
use scheme::{solve_local, top_closure, Local, Right, Stencil};

/// Uniform capital grid `k_min, k_min + h, ..., k_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub k_min: f64,
    pub k_max: f64,
    pub n: usize,
}

impl Grid {
    pub fn new(k_min: f64, k_max: f64, n: usize) -> Result<Self> {
        if !(k_min > 0.0) || !k_min.is_finite() {
            return Err(QviError::NonPositive { what: "k_min", value: k_min });
        }
        if !(k_max > k_min) || !k_max.is_finite() {
            return Err(QviError::OutOfRange { what: "k_max", value: k_max });
        }
        if n < 3 {
            return Err(QviError::OutOfRange { what: "node count", value: n as f64 });
        }
        Ok(Self { k_min, k_max, n })
    }

    pub fn h(&self) -> f64 {
        (self.k_max - self.k_min) / (self.n - 1) as f64
    }

    pub fn node(&self, m: usize) -> f64 {
        if m + 1 == self.n {
            self.k_max
        } else {
            self.k_min + m as f64 * self.h()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|m| self.node(m)).collect()
    }

    /// Nearest node to `k`, or `None` when `k` lies more than half a cell
    /// outside the grid.
    pub fn nearest(&self, k: f64) -> Option<usize> {
        let s = (k - self.k_min) / self.h();
        if !(s > -0.5 && s < self.n as f64 - 0.5) {
            return None;
        }
        Some((s.round().max(0.0) as usize).min(self.n - 1))
    }

    /// Cell index `m` and weight `w` with `k = (1 - w) k_m + w k_{m+1}`,
    /// clamped to the grid.
    pub fn locate(&self, k: f64) -> (usize, f64) {
        let s = ((k - self.k_min) / self.h()).clamp(0.0, (self.n - 1) as f64);
        let m = (s.floor() as usize).min(self.n - 2);
        (m, s - m as f64)
    }

    /// Linear interpolation of nodal data.
    pub fn interpolate(&self, data: &[f64], k: f64) -> f64 {
        let (m, w) = self.locate(k);
        (1.0 - w) * data[m] + w * data[m + 1]
    }
}

/// Treatment of the upper end of the truncated domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopBoundary {
    /// The last node continues the stay value of the regime active next to
    /// it, `v(k_max) = alpha v(k_max - h) + beta`, from the homogeneity of the
    /// AK value; the pair is solved jointly.
    Homogeneity,
    /// Plain one-sided differences: the last node only sees its left
    /// neighbour (a state constraint at `k_max`).
    OneSided,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub consumption_mode: ConsumptionMode,
    pub c_floor: f64,
    pub damping: f64,
    pub boundary: TopBoundary,
    pub init: InitialGuess,
}

/// Starting iterate of the sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialGuess {
    /// `u(max_i f_i(k_mid)) / rho` at every node.
    Midpoint,
    /// `max_i u(y_i(k)) / rho`: the value of consuming net output forever.
    /// It lies below the solution and is increasing in `k`, so the monotone
    /// sweeps rise towards the fixed point without a transient of spurious
    /// dissaving.
    Autarky,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 10_000,
            consumption_mode: ConsumptionMode::ClosedForm,
            c_floor: 1e-10,
            damping: 1.0,
            boundary: TopBoundary::Homogeneity,
            init: InitialGuess::Autarky,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(QviError::NonPositive { what: "tol", value: self.tol });
        }
        if self.max_iter == 0 {
            return Err(QviError::NonPositive { what: "max_iter", value: 0.0 });
        }
        if !(self.c_floor > 0.0) {
            return Err(QviError::NonPositive { what: "c_floor", value: self.c_floor });
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(QviError::OutOfRange { what: "damping", value: self.damping });
        }
        if let ConsumptionMode::GridSearch { n_c } = self.consumption_mode {
            if n_c < 2 {
                return Err(QviError::OutOfRange { what: "n_c", value: n_c as f64 });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolutionMode {
    /// Coupled system with strictly positive switching costs.
    Switching,
    /// Single value with the regime choice inside the Hamiltonian.
    Vanishing,
}

/// Grid solution of the HJB-QVI system.
///
/// In vanishing mode every regime shares the same value vector and the
/// per-node active regime is recorded in `active`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscretizedSolution {
    pub grid: Grid,
    pub mode: SolutionMode,
    /// `values[i - 1][m]` is `v_i` at node `m`.
    pub values: Vec<Vec<f64>>,
    pub consumption: Vec<Vec<f64>>,
    /// `Some(j)`: switch from `i` to `j` at this node.
    pub switch_policy: Vec<Vec<Option<usize>>>,
    pub active: Option<Vec<usize>>,
    pub costs: SwitchingCostMatrix,
    pub config: SolverConfig,
    pub iterations: usize,
    pub converged: bool,
    /// Sup-norm change of the last sweep.
    pub last_change: f64,
    pub scheme: String,
    pub diagnostics: ResidualReport,
}

impl DiscretizedSolution {
    pub fn num_regimes(&self) -> usize {
        self.values.len()
    }

    /// `v_i` at node `m`.
    pub fn value_at(&self, i: usize, m: usize) -> f64 {
        self.values[i - 1][m]
    }

    /// `v_i` linearly interpolated at `k`.
    pub fn value(&self, i: usize, k: f64) -> f64 {
        self.grid.interpolate(&self.values[i - 1], k)
    }

    /// Largest regime value at each node.
    pub fn envelope(&self) -> Vec<f64> {
        (0..self.grid.n)
            .map(|m| self.values.iter().map(|v| v[m]).fold(f64::NEG_INFINITY, f64::max))
            .collect()
    }
}

const SCHEME: &str = "upwind-monotone/implicit-local-newton/alternating-gauss-seidel";

/// Shared state of one discretized problem.
pub(crate) struct Discretization<'a> {
    pub problem: &'a StationaryProblem,
    pub grid: Grid,
    pub ham: Hamiltonian<'a>,
    pub rho: f64,
    pub boundary: TopBoundary,
    closures: Vec<Option<(f64, f64)>>,
    all: Vec<usize>,
}

impl<'a> Discretization<'a> {
    pub fn new(problem: &'a StationaryProblem, grid: Grid, cfg: &SolverConfig) -> Self {
        let rho = problem.prefs.effective_discount();
        let h = grid.h();
        let closures = problem
            .regimes()
            .iter()
            .map(|r| top_closure(problem.prefs.gamma, rho, r.threshold, grid.k_max, h))
            .collect();
        Self {
            problem,
            grid,
            ham: Hamiltonian {
                problem,
                mode: cfg.consumption_mode,
                c_floor: cfg.c_floor,
                k_max: grid.k_max,
            },
            rho,
            boundary: cfg.boundary,
            closures,
            all: problem.regime_ids().collect(),
        }
    }

    fn closure(&self, i: usize) -> Option<(f64, f64)> {
        match self.boundary {
            // a growing ratio would make the eliminated pair non-monotone;
            // such regimes fall back to one-sided differences
            TopBoundary::Homogeneity => self.closures[i - 1].filter(|&(a, _)| a <= 1.0),
            TopBoundary::OneSided => None,
        }
    }

    fn stencil(&self, row: &[f64], m: usize, right: Right) -> Stencil {
        Stencil {
            k: self.grid.node(m),
            h: self.grid.h(),
            left: (m > 0).then(|| row[m - 1]),
            right,
        }
    }

    fn regular_right(&self, row: &[f64], m: usize) -> Right {
        if m + 1 < self.grid.n {
            Right::Value(row[m + 1])
        } else {
            Right::None
        }
    }

    /// Continuation value of `row` at node `m` for the given regime set, with
    /// all neighbours fixed. `closure_regime` selects the top-node closure.
    pub fn continuation(&self, row: &[f64], m: usize, regimes: &[usize], closure_regime: usize) -> Local {
        let n = self.grid.n;
        if m + 1 == n {
            if let Some((a, b)) = self.closure(closure_regime) {
                let k = self.grid.node(m);
                let slope = (row[m] - row[m - 1]) / self.grid.h();
                let (pt, r) = regimes
                    .iter()
                    .map(|&r| (self.ham.evaluate(r, k, slope), r))
                    .fold(None::<(HamPoint, usize)>, |acc, (pt, r)| match acc {
                        Some((b, _)) if b.value >= pt.value => acc,
                        _ => Some((pt, r)),
                    })
                    .expect("nonempty regime set");
                return Local {
                    value: a * row[m - 1] + b,
                    consumption: pt.consumption,
                    drift: pt.drift,
                    regime: r,
                };
            }
        }
        let st = self.stencil(row, m, self.regular_right(row, m));
        solve_local(&self.ham, regimes, self.rho, &st, row[m])
    }

    fn obstacle(&self, snap: &[Vec<f64>], i: usize, m: usize) -> (ExtValue, Option<usize>) {
        switch_obstacle_by(snap.len(), i, &self.problem.costs, |j| snap[j - 1][m])
    }

    fn order(&self, forward: bool) -> Vec<usize> {
        let n = self.grid.n;
        if forward {
            (0..n).collect()
        } else {
            (0..n).rev().collect()
        }
    }

    /// Node values from per-regime continuation values. With the triangle
    /// inequality a chain of switches never beats a direct one, so
    /// `v_i = max_j (cont_j - eta_ij)` solves `v_i = max(cont_i, M_i v)` at
    /// the node exactly.
    fn couple(&self, cont: &[f64]) -> Vec<f64> {
        (1..=cont.len())
            .map(|i| {
                switch_obstacle_by(cont.len(), i, &self.problem.costs, |j| cont[j - 1])
                    .0
                    .max_with(cont[i - 1])
            })
            .collect()
    }

    fn local(&self, row: &[f64], i: usize, m: usize, right: Right) -> f64 {
        solve_local(&self.ham, &[i], self.rho, &self.stencil(row, m, right), row[m]).value
    }

    /// One sweep of the coupled system; returns the sup-norm change.
    fn sweep_switching(&self, v: &mut [Vec<f64>], forward: bool, omega: f64) -> f64 {
        let n = self.grid.n;
        let ids = 1..=v.len();
        let mut change = 0.0f64;
        for m in self.order(forward) {
            if m + 1 == n {
                continue;
            }
            if m + 2 < n {
                let cont: Vec<f64> =
                    ids.clone().map(|i| self.local(&v[i - 1], i, m, self.regular_right(&v[i - 1], m))).collect();
                for (i, t) in ids.clone().zip(self.couple(&cont)) {
                    change = change.max(relax(&mut v[i - 1][m], t, omega));
                }
                continue;
            }
            // the last two nodes are updated together
            let right = |i: usize, row: &[f64]| match self.closure(i) {
                Some((alpha, beta)) => Right::Closure { alpha, beta },
                None => self.regular_right(row, m),
            };
            let mut cont: Vec<f64> = ids.clone().map(|i| self.local(&v[i - 1], i, m, right(i, &v[i - 1]))).collect();
            let mut below = self.couple(&cont);
            let top_of = |i: usize, lower: f64, row: &[f64]| match self.closure(i) {
                Some((a, b)) => a * lower + b,
                None => {
                    let mut r = row.to_vec();
                    r[m] = lower;
                    self.local(&r, i, m + 1, Right::None)
                }
            };
            let top_cont: Vec<f64> = ids.clone().map(|i| top_of(i, below[i - 1], &v[i - 1])).collect();
            let top = self.couple(&top_cont);
            let mut rebound = false;
            for i in ids.clone() {
                if self.closure(i).is_some() && top[i - 1] > top_cont[i - 1] {
                    let mut r = v[i - 1].clone();
                    r[m + 1] = top[i - 1];
                    cont[i - 1] = self.local(&r, i, m, Right::Value(top[i - 1]));
                    rebound = true;
                }
            }
            if rebound {
                below = self.couple(&cont);
            }
            for i in ids.clone() {
                change = change.max(relax(&mut v[i - 1][m], below[i - 1], omega));
                change = change.max(relax(&mut v[i - 1][m + 1], top[i - 1], omega));
            }
        }
        change
    }

    /// One sweep of the single-value vanishing-cost equation.
    fn sweep_vanishing(&self, v: &mut [f64], top_regime: &mut usize, forward: bool, omega: f64) -> f64 {
        let n = self.grid.n;
        let closure = self.closure(*top_regime);
        let mut change = 0.0f64;
        for m in self.order(forward) {
            if m + 1 == n && closure.is_some() {
                continue;
            }
            let pair = m + 2 == n && closure.is_some();
            let right = match closure {
                Some((alpha, beta)) if pair => Right::Closure { alpha, beta },
                _ => self.regular_right(v, m),
            };
            let loc = solve_local(&self.ham, &self.all, self.rho, &self.stencil(v, m, right), v[m]);
            change = change.max(relax(&mut v[m], loc.value, omega));
            if pair {
                let (a, b) = closure.expect("pair implies closure");
                let t = a * v[m] + b;
                change = change.max(relax(&mut v[m + 1], t, omega));
                *top_regime = loc.regime;
            }
        }
        change
    }

    fn initial_values(&self, regimes: &[usize], cfg: &SolverConfig) -> Vec<f64> {
        let prefs = &self.problem.prefs;
        let k_mid = 0.5 * (self.grid.k_min + self.grid.k_max);
        let best = |c_of: &dyn Fn(usize) -> f64| {
            regimes
                .iter()
                .map(|&i| prefs.u(c_of(i).max(cfg.c_floor)) / self.rho)
                .fold(f64::NEG_INFINITY, f64::max)
        };
        match cfg.init {
            InitialGuess::Midpoint => {
                let v = best(&|i| self.problem.regimes()[i - 1].output(k_mid));
                vec![v; self.grid.n]
            }
            InitialGuess::Autarky => (0..self.grid.n)
                .map(|m| best(&|i| self.problem.net_output_unchecked(i, self.grid.node(m))))
                .collect(),
        }
    }
}

fn relax(slot: &mut f64, target: f64, omega: f64) -> f64 {
    let next = *slot + omega * (target - *slot);
    let d = (next - *slot).abs();
    *slot = next;
    d
}

fn check_inputs(p: &StationaryProblem, cfg: &SolverConfig) -> Result<()> {
    let report = p.validate();
    if !report.is_valid() {
        return Err(QviError::InvalidProblem(report.to_string()));
    }
    if !(p.prefs.effective_discount() > 0.0) {
        return Err(QviError::InvalidProblem("effective discount must be positive".into()));
    }
    cfg.validate()
}

/// Solves the coupled HJB-QVI system. Problems with vanishing switching
/// costs are delegated to [`solve_vanishing`].
pub fn solve_qvi(p: &StationaryProblem, grid: &Grid, cfg: &SolverConfig) -> Result<DiscretizedSolution> {
    if p.costs.is_vanishing() {
        return solve_vanishing(p, grid, cfg);
    }
    check_inputs(p, cfg)?;
    let d = Discretization::new(p, *grid, cfg);
    let n = grid.n;
    let mut v: Vec<Vec<f64>> = p
        .regime_ids()
        .map(|i| d.initial_values(&[i], cfg))
        .collect();
    let mut iterations = 0;
    let mut converged = false;
    let mut last_change = f64::INFINITY;
    while iterations < cfg.max_iter {
        last_change = d.sweep_switching(&mut v, iterations % 2 == 1, cfg.damping);
        iterations += 1;
        if last_change <= cfg.tol {
            converged = true;
            break;
        }
    }

    let mut consumption = vec![vec![0.0; n]; v.len()];
    let mut switch_policy = vec![vec![None; n]; v.len()];
    for i in p.regime_ids() {
        for m in 0..n {
            let loc = d.continuation(&v[i - 1], m, &[i], i);
            consumption[i - 1][m] = loc.consumption;
            let (obs, target) = d.obstacle(&v, i, m);
            if obs.max_with(f64::NEG_INFINITY) >= loc.value - cfg.tol {
                switch_policy[i - 1][m] = target;
            }
        }
    }
    let mut sol = DiscretizedSolution {
        grid: *grid,
        mode: SolutionMode::Switching,
        values: v,
        consumption,
        switch_policy,
        active: None,
        costs: p.costs.clone(),
        config: *cfg,
        iterations,
        converged,
        last_change,
        scheme: SCHEME.into(),
        diagnostics: ResidualReport::default(),
    };
    sol.diagnostics = qvi_residual(&sol, p);
    Ok(sol)
}

/// Solves `-rho v + max_i sup_c [mu_i v' + u(c)] = 0`, the limit of the
/// system as all switching costs vanish.
pub fn solve_vanishing(p: &StationaryProblem, grid: &Grid, cfg: &SolverConfig) -> Result<DiscretizedSolution> {
    check_inputs(p, cfg)?;
    let d = Discretization::new(p, *grid, cfg);
    let n = grid.n;
    let ids: Vec<usize> = p.regime_ids().collect();
    let mut v = d.initial_values(&ids, cfg);
    let mut top_regime = p.num_regimes();
    let mut iterations = 0;
    let mut converged = false;
    let mut last_change = f64::INFINITY;
    while iterations < cfg.max_iter {
        last_change = d.sweep_vanishing(&mut v, &mut top_regime, iterations % 2 == 1, cfg.damping);
        iterations += 1;
        if last_change <= cfg.tol {
            converged = true;
            break;
        }
    }

    let mut active = vec![1; n];
    let mut c = vec![0.0; n];
    for m in 0..n {
        let loc = d.continuation(&v, m, &ids, top_regime);
        active[m] = loc.regime;
        c[m] = loc.consumption;
    }
    let switch_policy = ids
        .iter()
        .map(|&i| active.iter().map(|&a| (a != i).then_some(a)).collect())
        .collect();
    let mut sol = DiscretizedSolution {
        grid: *grid,
        mode: SolutionMode::Vanishing,
        values: vec![v; ids.len()],
        consumption: vec![c; ids.len()],
        switch_policy,
        active: Some(active),
        costs: p.costs.clone(),
        config: *cfg,
        iterations,
        converged,
        last_change,
        scheme: SCHEME.into(),
        diagnostics: ResidualReport::default(),
    };
    sol.diagnostics = qvi_residual(&sol, p);
    Ok(sol)
}

/// Alias of [`solve_qvi`].
pub fn solve(p: &StationaryProblem, grid: &Grid, cfg: &SolverConfig) -> Result<DiscretizedSolution> {
    solve_qvi(p, grid, cfg)
}

/// Comparative structural advantage `H_i^{j,l}(k) = [v_j - eta_ij] - [v_l - eta_il]`
/// at the grid node nearest to `k`.
pub fn comparative_advantage(sol: &DiscretizedSolution, i: usize, j: usize, l: usize, k: f64) -> Result<f64> {
    let n = sol.num_regimes();
    for r in [i, j, l] {
        if r == 0 || r > n {
            return Err(QviError::UnknownRegime(r));
        }
    }
    let m = sol.grid.nearest(k).ok_or(QviError::OutOfRange { what: "capital", value: k })?;
    let eta = |a: usize, b: usize| if a == b { 0.0 } else { sol.costs.cost(a, b) };
    Ok((sol.value_at(j, m) - eta(i, j)) - (sol.value_at(l, m) - eta(i, l)))
}
