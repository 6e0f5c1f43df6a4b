//! Forward simulation of the controlled economy.
//!
//! Capital follows `k' = mu_i(k, c_i(k))` under a feedback policy. Within a
//! regime the ODE is integrated with fixed-step RK4; a step that lands in the
//! transformation set is bisected in time to locate the switch.

use serde::{Deserialize, Serialize};

use crate::analytic::{stay_value, AnalyticSolution};
use crate::error::{QviError, Result};
use crate::ext::ExtValue;
use crate::problem::StationaryProblem;
use crate::solver::DiscretizedSolution;

/// A feedback policy: consumption and switching as functions of the state.
pub trait Policy {
    fn num_regimes(&self) -> usize;
    fn consumption(&self, i: usize, k: f64) -> f64;
    fn switch_target(&self, i: usize, k: f64) -> Option<usize>;
    /// Upper end of the capital domain the policy is defined on.
    fn k_max(&self) -> f64 {
        f64::INFINITY
    }
    /// Spacing of the grid the policy was read from, if any.
    fn resolution(&self) -> Option<f64> {
        None
    }
}

/// Regime value functions `v_i(k)`.
pub trait ValueFunction {
    fn value(&self, i: usize, k: f64) -> ExtValue;
}

impl Policy for AnalyticSolution {
    fn num_regimes(&self) -> usize {
        self.problem().num_regimes()
    }

    fn consumption(&self, i: usize, k: f64) -> f64 {
        AnalyticSolution::consumption(self, i, k)
    }

    fn switch_target(&self, i: usize, k: f64) -> Option<usize> {
        AnalyticSolution::switch_target(self, i, k)
    }
}

impl ValueFunction for AnalyticSolution {
    fn value(&self, _i: usize, k: f64) -> ExtValue {
        AnalyticSolution::value(self, k)
    }
}

/// Policy read off a grid solution: consumption is interpolated linearly
/// between nodes, switching uses the nearest node.
#[derive(Debug, Clone, Copy)]
pub struct NumericPolicy<'a> {
    pub solution: &'a DiscretizedSolution,
}

impl<'a> NumericPolicy<'a> {
    pub fn new(solution: &'a DiscretizedSolution) -> Self {
        Self { solution }
    }
}

impl Policy for NumericPolicy<'_> {
    fn num_regimes(&self) -> usize {
        self.solution.num_regimes()
    }

    fn consumption(&self, i: usize, k: f64) -> f64 {
        self.solution.grid.interpolate(&self.solution.consumption[i - 1], k)
    }

    fn switch_target(&self, i: usize, k: f64) -> Option<usize> {
        let m = self.solution.grid.nearest(k)?;
        self.solution.switch_policy[i - 1][m]
    }

    fn k_max(&self) -> f64 {
        self.solution.grid.k_max
    }

    fn resolution(&self) -> Option<f64> {
        Some(self.solution.grid.h())
    }
}

impl ValueFunction for NumericPolicy<'_> {
    fn value(&self, i: usize, k: f64) -> ExtValue {
        ExtValue::Finite(self.solution.value(i, k))
    }
}

impl ValueFunction for DiscretizedSolution {
    fn value(&self, i: usize, k: f64) -> ExtValue {
        ExtValue::Finite(DiscretizedSolution::value(self, i, k))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailHandling {
    /// Add the discounted stay value of the terminal regime at `t_max`.
    AnalyticTail,
    Truncate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub t_max: f64,
    pub event_tol: f64,
    pub tail: TailHandling,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { dt: 1e-3, t_max: 200.0, event_tol: 1e-10, tail: TailHandling::AnalyticTail }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(QviError::NonPositive { what: "dt", value: self.dt });
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return Err(QviError::NonPositive { what: "t_max", value: self.t_max });
        }
        if !(self.event_tol > 0.0) {
            return Err(QviError::NonPositive { what: "event_tol", value: self.event_tol });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub k: f64,
    pub c: f64,
    pub regime: usize,
    pub u_inst: f64,
    /// Discounted utility accumulated on `[0, t]` net of discounted costs.
    pub u_cum: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchEvent {
    pub time: f64,
    pub from: usize,
    pub to: usize,
    /// Undiscounted cost `eta_{from,to}`.
    pub cost: f64,
    /// Cost discounted to time zero.
    pub discounted_cost: f64,
    pub capital: f64,
    /// Instantaneous utility just before the switch.
    pub u_before: f64,
    /// Index of the sample recorded at the switch.
    pub sample: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Termination {
    Horizon,
    /// Capital left `(0, k_max]` during the step starting at `t`.
    DomainExit { t: f64, k: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub initial_regime: usize,
    pub k0: f64,
    pub samples: Vec<Sample>,
    pub events: Vec<SwitchEvent>,
    pub termination: Termination,
    pub config: SimConfig,
    /// Grid spacing of the policy, when it came from a grid.
    #[serde(default)]
    pub resolution: Option<f64>,
    /// Finite upper end of the policy's capital domain.
    #[serde(default)]
    pub k_max: Option<f64>,
}

impl Trajectory {
    pub fn end_time(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.t)
    }

    /// Discounted integrand at sample `n`, taken as a left limit when the
    /// sample carries a switch.
    fn left_integrand(&self, n: usize, rho: f64) -> f64 {
        let s = &self.samples[n];
        let u = self
            .events
            .iter()
            .find(|e| e.sample == n && e.time > 0.0)
            .map_or(s.u_inst, |e| e.u_before);
        (-rho * s.t).exp() * u
    }

    fn right_integrand(&self, n: usize, rho: f64) -> f64 {
        let s = &self.samples[n];
        (-rho * s.t).exp() * s.u_inst
    }
}

fn rk4(f: impl Fn(f64) -> f64, k: f64, h: f64) -> f64 {
    let a = f(k);
    let b = f(k + 0.5 * h * a);
    let c = f(k + 0.5 * h * b);
    let d = f(k + h * c);
    k + h / 6.0 * (a + 2.0 * b + 2.0 * c + d)
}

fn utility_of(p: &StationaryProblem, c: f64) -> f64 {
    p.prefs.u(c.max(f64::MIN_POSITIVE))
}

/// Integrates the economy from `theta(0-) = i0`, `k(0) = k0` up to `t_max`.
pub fn simulate<P: Policy + ?Sized>(
    p: &StationaryProblem,
    policy: &P,
    i0: usize,
    k0: f64,
    cfg: &SimConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    p.regime(i0)?;
    if policy.num_regimes() != p.num_regimes() {
        return Err(QviError::InvalidConfig(format!(
            "policy has {} regimes, problem has {}",
            policy.num_regimes(),
            p.num_regimes()
        )));
    }
    if !(k0 > 0.0) {
        return Err(QviError::NonPositive { what: "k0", value: k0 });
    }
    if k0 > policy.k_max() {
        return Err(QviError::OutOfRange { what: "k0", value: k0 });
    }
    let rho = p.prefs.effective_discount();
    let cons = |i: usize, k: f64| policy.consumption(i, k).max(0.0);
    let step = |i: usize, k: f64, h: f64| rk4(|x| p.net_output_unchecked(i, x) - cons(i, x), k, h);

    let mut events = Vec::new();
    let mut regime = i0;
    let mut u_cum = 0.0;
    if let Some(j) = policy.switch_target(i0, k0) {
        let cost = p.costs.cost(i0, j);
        u_cum -= cost;
        events.push(SwitchEvent {
            time: 0.0,
            from: i0,
            to: j,
            cost,
            discounted_cost: cost,
            capital: k0,
            u_before: utility_of(p, cons(i0, k0)),
            sample: 0,
        });
        regime = j;
    }
    let c = cons(regime, k0);
    let mut samples = vec![Sample { t: 0.0, k: k0, c, regime, u_inst: utility_of(p, c), u_cum }];
    let mut last = samples[0].u_inst;
    let (mut t, mut k) = (0.0f64, k0);
    let mut just_switched = !events.is_empty();
    let mut termination = Termination::Horizon;
    let t_end = cfg.t_max;
    while t_end - t > 1e-12 * t_end {
        let h = cfg.dt.min(t_end - t);
        let k_full = step(regime, k, h);
        if !(k_full > 0.0) || k_full > policy.k_max() {
            termination = Termination::DomainExit { t, k: k_full };
            break;
        }
        let (h_used, k_new, target) = match policy.switch_target(regime, k_full) {
            Some(j) if just_switched => (h, k_full, Some(j)),
            Some(_) => {
                let (mut a, mut b) = (0.0, h);
                while b - a > cfg.event_tol {
                    let mid = 0.5 * (a + b);
                    if policy.switch_target(regime, step(regime, k, mid)).is_some() {
                        b = mid;
                    } else {
                        a = mid;
                    }
                }
                let kb = step(regime, k, b);
                (b, kb, policy.switch_target(regime, kb))
            }
            None => (h, k_full, None),
        };
        let t_new = t + h_used;
        let disc = (-rho * t_new).exp();
        let u_left = utility_of(p, cons(regime, k_new));
        u_cum += 0.5 * h_used * (last + disc * u_left);
        just_switched = false;
        if let Some(j) = target {
            let cost = p.costs.cost(regime, j);
            u_cum -= disc * cost;
            events.push(SwitchEvent {
                time: t_new,
                from: regime,
                to: j,
                cost,
                discounted_cost: disc * cost,
                capital: k_new,
                u_before: u_left,
                sample: samples.len(),
            });
            regime = j;
            just_switched = true;
        }
        let c = cons(regime, k_new);
        let u = utility_of(p, c);
        samples.push(Sample { t: t_new, k: k_new, c, regime, u_inst: u, u_cum });
        last = disc * u;
        t = t_new;
        k = k_new;
    }
    Ok(Trajectory {
        initial_regime: i0,
        k0,
        samples,
        events,
        termination,
        config: *cfg,
        resolution: policy.resolution(),
        k_max: Some(policy.k_max()).filter(|k| k.is_finite()),
    })
}

/// Components of the discounted utility of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilityBreakdown {
    /// Trapezoid quadrature of `e^(-rho t) u(c(t))`.
    pub integral: f64,
    /// Sum of discounted switching costs.
    pub costs: f64,
    /// Discounted stay value of the terminal regime, when added.
    pub tail: Option<f64>,
    /// Magnitude of the omitted tail when truncating, if computable.
    pub tail_bound: Option<f64>,
    pub total: f64,
}

pub fn utility_breakdown(traj: &Trajectory, p: &StationaryProblem) -> UtilityBreakdown {
    let rho = p.prefs.effective_discount();
    let mut integral = 0.0;
    for n in 1..traj.samples.len() {
        let dt = traj.samples[n].t - traj.samples[n - 1].t;
        integral += 0.5 * dt * (traj.right_integrand(n - 1, rho) + traj.left_integrand(n, rho));
    }
    let costs: f64 = traj.events.iter().map(|e| e.discounted_cost).sum();
    let terminal = traj.samples.last().and_then(|s| {
        let v = stay_value(p, s.regime, s.k).ok()?.finite()?;
        Some((-rho * s.t).exp() * v)
    });
    let (tail, tail_bound) = match (traj.config.tail, traj.samples.len()) {
        (_, 0) => (None, None),
        (TailHandling::AnalyticTail, _) => (terminal, None),
        (TailHandling::Truncate, _) => (None, terminal.map(f64::abs)),
    };
    let total = if traj.samples.is_empty() { 0.0 } else { integral - costs + tail.unwrap_or(0.0) };
    UtilityBreakdown { integral, costs, tail, tail_bound, total }
}

/// Discounted utility of the path net of switching costs, plus the analytic
/// tail when the trajectory asks for it.
pub fn total_utility(traj: &Trajectory, p: &StationaryProblem) -> f64 {
    utility_breakdown(traj, p).total
}

/// Dynamic-programming consistency of a trajectory against a value function
/// at the intermediate time `r`.
pub fn dpp_check<V: ValueFunction + ?Sized>(
    p: &StationaryProblem,
    vf: &V,
    traj: &Trajectory,
    r: f64,
) -> Result<f64> {
    let end = traj.end_time();
    if traj.samples.is_empty() || !(r >= 0.0 && r <= end) {
        return Err(QviError::OutOfRange { what: "dpp time", value: r });
    }
    let rho = p.prefs.effective_discount();
    let v0 = vf
        .value(traj.initial_regime, traj.k0)
        .finite()
        .ok_or(QviError::OutOfRange { what: "initial value", value: traj.k0 })?;
    let mut integral = 0.0;
    let mut regime = traj.initial_regime;
    let mut k_r = traj.k0;
    for n in 1..traj.samples.len() {
        let (a, b) = (&traj.samples[n - 1], &traj.samples[n]);
        if a.t >= r {
            break;
        }
        let fa = traj.right_integrand(n - 1, rho);
        let fb = traj.left_integrand(n, rho);
        regime = a.regime;
        if b.t <= r {
            integral += 0.5 * (b.t - a.t) * (fa + fb);
            k_r = b.k;
        } else {
            let w = (r - a.t) / (b.t - a.t);
            let fr = fa + w * (fb - fa);
            integral += 0.5 * (r - a.t) * (fa + fr);
            k_r = a.k + w * (b.k - a.k);
        }
    }
    let costs: f64 = traj.events.iter().filter(|e| e.time < r).map(|e| e.discounted_cost).sum();
    let v_r = vf
        .value(regime, k_r)
        .finite()
        .ok_or(QviError::OutOfRange { what: "capital at dpp time", value: k_r })?;
    Ok((v0 - (integral - costs + (-rho * r).exp() * v_r)).abs())
}

/// Largest deviation of consumption growth from the Euler rate
/// `(A_i - delta - rho) / gamma` over interior samples of continuation
/// segments. Samples within two steps of a switch are skipped; for a policy
/// read off a grid, so are difference stencils reaching into the cell around
/// a switching capital or the top cell of the domain.
pub fn euler_residual(traj: &Trajectory, p: &StationaryProblem) -> f64 {
    let gap = 2.0 * traj.config.dt;
    let near_edge = |k: f64| match traj.resolution {
        Some(h) => {
            traj.events.iter().any(|e| (k - e.capital).abs() < h) || traj.k_max.map_or(false, |top| k > top - h)
        }
        None => false,
    };
    let mut worst = 0.0f64;
    for n in 1..traj.samples.len().saturating_sub(1) {
        let (a, s, b) = (&traj.samples[n - 1], &traj.samples[n], &traj.samples[n + 1]);
        if a.regime != s.regime || b.regime != s.regime {
            continue;
        }
        if traj.events.iter().any(|e| (e.time - s.t).abs() < gap) || [a.k, s.k, b.k].into_iter().any(near_edge) {
            continue;
        }
        let reg = p.regimes()[s.regime - 1];
        if !(s.k > reg.threshold && a.k > reg.threshold && s.c > 0.0) {
            continue;
        }
        let growth = (b.c - a.c) / (b.t - a.t) / s.c;
        let target = (reg.tech - p.prefs.delta - p.prefs.rho) / p.prefs.gamma;
        worst = worst.max((growth - target).abs());
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeSample {
    pub t: f64,
    pub kx: f64,
    pub ky: f64,
    pub lipschitz_bound: f64,
    pub growth_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub regime: usize,
    /// `D_i = A_i + delta + pi`.
    pub lipschitz_rate: f64,
    /// `M_4 = D_i + 1`.
    pub growth_rate: f64,
    pub samples: Vec<ProbeSample>,
    /// First time either path left `(0, inf)`, if it did.
    pub exit_time: Option<f64>,
    pub holds: bool,
}

/// Integrates two initial conditions under the same constant consumption and
/// checks the stability bound `|k^x - k^y| <= e^{D t} |x - y|` and the growth
/// bound `|k^x| <= (1 + |x|) e^{M_4 t}` at every step.
pub fn dynamics_probes(
    p: &StationaryProblem,
    i: usize,
    x: f64,
    y: f64,
    t_end: f64,
    c: f64,
    dt: f64,
) -> Result<ProbeReport> {
    let reg = *p.regime(i)?;
    for (what, value) in [("x", x), ("y", y), ("dt", dt)] {
        if !(value > 0.0) {
            return Err(QviError::NonPositive { what, value });
        }
    }
    let d = reg.tech + p.prefs.effective_depreciation();
    let m4 = d + 1.0;
    let f = |k: f64| p.net_output_unchecked(i, k) - c;
    let mut samples = Vec::new();
    let (mut t, mut kx, mut ky) = (0.0f64, x, y);
    let mut holds = true;
    let mut exit_time = None;
    let mut check = |t: f64, kx: f64, ky: f64| {
        let lipschitz_bound = (d * t).exp() * (x - y).abs();
        let growth_bound = (1.0 + x.abs()) * (m4 * t).exp();
        let slack = 1e-12 * lipschitz_bound.max(1e-300);
        holds &= (kx - ky).abs() <= lipschitz_bound + slack && kx.abs() <= growth_bound;
        samples.push(ProbeSample { t, kx, ky, lipschitz_bound, growth_bound });
    };
    check(t, kx, ky);
    while t < t_end - 1e-12 * t_end {
        let h = dt.min(t_end - t);
        let (nx, ny) = (rk4(f, kx, h), rk4(f, ky, h));
        t += h;
        if !(nx > 0.0 && ny > 0.0) {
            exit_time = Some(t);
            break;
        }
        kx = nx;
        ky = ny;
        check(t, kx, ky);
    }
    Ok(ProbeReport { regime: i, lipschitz_rate: d, growth_rate: m4, samples, exit_time, holds })
}
