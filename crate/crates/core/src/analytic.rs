//! Closed-form results for the AK economy with CRRA utility (`gamma > 1`).
//!
//! Staying forever in regime `i` from capital `k > x_i` is worth
//! `Q_i (k - x_i)^(1 - gamma)`; consumption is proportional to productive
//! capital, and productive capital grows at the constant rate
//! `(A_i - rho - delta) / gamma`. Comparing stay values of two regimes gives
//! the ratio `a_ij` and the value-matching threshold `k_ij`.
//!
//! With costless switching the region structure for two and three regimes is
//! assembled from these thresholds into an [`AnalyticSolution`], which also
//! acts as a policy for [`crate::simulate`].

use serde::Serialize;

use crate::error::{QviError, Result};
use crate::ext::ExtValue;
use crate::problem::StationaryProblem;
use crate::regions::{Interval, RegionReport};

fn require_closed_form(p: &StationaryProblem) -> Result<()> {
    if !(p.prefs.gamma > 1.0) {
        return Err(QviError::AnalyticPrecondition(format!(
            "closed forms need gamma > 1, got {}",
            p.prefs.gamma
        )));
    }
    Ok(())
}

/// `rho_eff + (A_i - delta_eff)(gamma - 1)`, checked positive.
fn bracket(p: &StationaryProblem, i: usize) -> Result<f64> {
    let b = p.finiteness_margin(i)?;
    if !(b > 0.0) {
        return Err(QviError::AnalyticPrecondition(format!(
            "finiteness condition fails for regime {i} ({b})"
        )));
    }
    Ok(b)
}

/// Value coefficient `Q_i = gamma^gamma / (1 - gamma) * bracket_i^(-gamma)`.
pub fn q_coefficient(p: &StationaryProblem, i: usize) -> Result<f64> {
    require_closed_form(p)?;
    let g = p.prefs.gamma;
    let b = bracket(p, i)?;
    Ok(g.powf(g) / (1.0 - g) * b.powf(-g))
}

/// Value of never leaving regime `i`; `NegInf` at or below the threshold,
/// where consumption would have to vanish forever.
pub fn stay_value(p: &StationaryProblem, i: usize, k: f64) -> Result<ExtValue> {
    let q = q_coefficient(p, i)?;
    let x = p.regime(i)?.threshold;
    if k <= x {
        return Ok(ExtValue::NegInf);
    }
    Ok(ExtValue::Finite(q * (k - x).powf(1.0 - p.prefs.gamma)))
}

/// Marginal propensity to consume out of productive capital, `bracket_i / gamma`.
pub fn consumption_slope(p: &StationaryProblem, i: usize) -> Result<f64> {
    require_closed_form(p)?;
    Ok(bracket(p, i)? / p.prefs.gamma)
}

/// Growth rate of productive capital on the stay path, `(A_i - rho - delta) / gamma`.
pub fn capital_growth_rate(p: &StationaryProblem, i: usize) -> Result<f64> {
    let r = p.regime(i)?;
    Ok((r.tech - p.prefs.rho - p.prefs.delta) / p.prefs.gamma)
}

/// Growth rate of consumption in the interior of regime `i`; the Euler
/// equation with `f' = A_i` makes it independent of capital.
pub fn euler_growth_rate(p: &StationaryProblem, i: usize) -> Result<f64> {
    capital_growth_rate(p, i)
}

pub fn stay_consumption(p: &StationaryProblem, i: usize, k: f64) -> Result<f64> {
    let x = p.regime(i)?.threshold;
    if k <= x {
        return Err(QviError::OutOfRange { what: "capital at or below threshold", value: k });
    }
    Ok(consumption_slope(p, i)? * (k - x))
}

pub fn stay_capital_path(p: &StationaryProblem, i: usize, k0: f64, t: f64) -> Result<f64> {
    require_closed_form(p)?;
    let x = p.regime(i)?.threshold;
    if k0 <= x {
        return Err(QviError::OutOfRange { what: "initial capital at or below threshold", value: k0 });
    }
    if t < 0.0 {
        return Err(QviError::OutOfRange { what: "time", value: t });
    }
    Ok(x + (k0 - x) * (capital_growth_rate(p, i)? * t).exp())
}

/// `a_ij = (Q_j / Q_i)^(1 / (1 - gamma))`.
pub fn a_ratio(p: &StationaryProblem, i: usize, j: usize) -> Result<f64> {
    distinct(i, j)?;
    let (qi, qj) = (q_coefficient(p, i)?, q_coefficient(p, j)?);
    Ok((qj / qi).powf(1.0 / (1.0 - p.prefs.gamma)))
}

/// The same ratio through the technology gap,
/// `(1 + (A_j - A_i)(gamma - 1) / bracket_i)^(gamma / (gamma - 1))`.
pub fn a_ratio_from_gap(p: &StationaryProblem, i: usize, j: usize) -> Result<f64> {
    distinct(i, j)?;
    require_closed_form(p)?;
    let g = p.prefs.gamma;
    let bi = bracket(p, i)?;
    bracket(p, j)?;
    let gap = p.regime(j)?.tech - p.regime(i)?.tech;
    Ok((1.0 + gap * (g - 1.0) / bi).powf(g / (g - 1.0)))
}

/// Value-matching threshold `k_ij = x_j + (x_j - x_i) / (a_ij - 1)` for
/// `i < j`, extended symmetrically.
pub fn k_threshold(p: &StationaryProblem, i: usize, j: usize) -> Result<f64> {
    distinct(i, j)?;
    let (lo, hi) = if i < j { (i, j) } else { (j, i) };
    let a = a_ratio(p, lo, hi)?;
    let (xl, xh) = (p.regime(lo)?.threshold, p.regime(hi)?.threshold);
    if xh == xl {
        return Ok(xh);
    }
    if a == 1.0 {
        return Err(QviError::AnalyticPrecondition(format!(
            "regimes {lo} and {hi} have equal value coefficients"
        )));
    }
    Ok(xh + (xh - xl) / (a - 1.0))
}

fn distinct(i: usize, j: usize) -> Result<()> {
    if i == j {
        return Err(QviError::AnalyticPrecondition(format!("regime pair ({i}, {j}) must be distinct")));
    }
    Ok(())
}

/// Time at which the stay path of regime `i` from `k0` reaches `target`.
pub fn switch_time(p: &StationaryProblem, i: usize, k0: f64, target: f64) -> Result<f64> {
    let x = p.regime(i)?.threshold;
    if k0 <= x || target <= x {
        return Err(QviError::Unreachable { regime: i, start: k0, target });
    }
    if k0 == target {
        return Ok(0.0);
    }
    let g = capital_growth_rate(p, i)?;
    let t = ((target - x) / (k0 - x)).ln() / g;
    if g == 0.0 || !(t >= 0.0) || !t.is_finite() {
        return Err(QviError::Unreachable { regime: i, start: k0, target });
    }
    Ok(t)
}

/// Every closed-form quantity of an AK problem in one place.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AkClosedForm {
    pub q: Vec<f64>,
    /// `a[i-1][j-1]`, with ones on the diagonal.
    pub a: Vec<Vec<f64>>,
    /// `k_thr[i-1][j-1]`, `None` on the diagonal.
    pub k_thr: Vec<Vec<Option<f64>>>,
    pub growth: Vec<f64>,
    pub mpc: Vec<f64>,
}

impl AkClosedForm {
    pub fn new(p: &StationaryProblem) -> Result<Self> {
        require_closed_form(p)?;
        let n = p.num_regimes();
        let ids: Vec<usize> = p.regime_ids().collect();
        let q = ids.iter().map(|&i| q_coefficient(p, i)).collect::<Result<Vec<_>>>()?;
        let mut a = vec![vec![1.0; n]; n];
        let mut k_thr = vec![vec![None; n]; n];
        for &i in &ids {
            for &j in &ids {
                if i != j {
                    a[i - 1][j - 1] = a_ratio(p, i, j)?;
                    k_thr[i - 1][j - 1] = Some(k_threshold(p, i, j)?);
                }
            }
        }
        let growth = ids.iter().map(|&i| capital_growth_rate(p, i)).collect::<Result<_>>()?;
        let mpc = ids.iter().map(|&i| consumption_slope(p, i)).collect::<Result<_>>()?;
        Ok(Self { q, a, k_thr, growth, mpc })
    }

    pub fn threshold(&self, i: usize, j: usize) -> Option<f64> {
        self.k_thr.get(i.wrapping_sub(1))?.get(j.wrapping_sub(1)).copied().flatten()
    }
}

/// One phase of a closed-form equilibrium path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Phase {
    pub regime: usize,
    pub t_start: f64,
    /// `+inf` for the terminal phase.
    pub t_end: f64,
    pub k_start: f64,
    pub threshold: f64,
    pub growth: f64,
    pub mpc: f64,
    /// Rental rate of capital `R = A_i`.
    pub rental_rate: f64,
    /// Wage `w = 0`: AK technologies pay labour nothing.
    pub wage: f64,
}

impl Phase {
    pub fn contains(&self, t: f64) -> bool {
        t >= self.t_start && t < self.t_end
    }

    pub fn capital(&self, t: f64) -> f64 {
        self.threshold + (self.k_start - self.threshold) * (self.growth * (t - self.t_start)).exp()
    }

    pub fn consumption(&self, t: f64) -> f64 {
        self.mpc * (self.capital(t) - self.threshold)
    }
}

/// Piecewise value, regions and policy for costless switching between AK
/// regimes.
///
/// `value_map` lists sorted pieces of `(0, inf)` together with the regime
/// whose stay value the economy attains there. With vanishing costs all
/// regime values coincide, so the same map serves every starting regime.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalyticSolution {
    #[serde(skip)]
    problem: StationaryProblem,
    pub closed: AkClosedForm,
    pub value_map: Vec<(Interval, usize)>,
    pub regions: RegionReport,
}

fn require_vanishing(p: &StationaryProblem, n: usize) -> Result<()> {
    if p.num_regimes() != n {
        return Err(QviError::AnalyticPrecondition(format!(
            "expected {n} regimes, got {}",
            p.num_regimes()
        )));
    }
    p.ensure_valid()?;
    require_closed_form(p)?;
    if !p.costs.is_vanishing() {
        return Err(QviError::AnalyticPrecondition(
            "closed-form regions assume vanishing switching costs".into(),
        ));
    }
    Ok(())
}

impl AnalyticSolution {
    fn from_map(p: &StationaryProblem, closed: AkClosedForm, value_map: Vec<(Interval, usize)>) -> Self {
        let value_map: Vec<(Interval, usize)> =
            value_map.into_iter().filter(|(iv, _)| !iv.is_empty()).collect();
        let labels: Vec<Vec<(Interval, Option<usize>)>> = p
            .regime_ids()
            .map(|r| {
                value_map
                    .iter()
                    .map(|&(iv, a)| (iv, if a == r { None } else { Some(a) }))
                    .collect()
            })
            .collect();
        let regions = RegionReport::from_labels(Interval::new(0.0, f64::INFINITY), &labels);
        Self { problem: p.clone(), closed, value_map, regions }
    }

    /// Single-regime problem: stay everywhere.
    pub fn single_regime(p: &StationaryProblem) -> Result<Self> {
        require_vanishing(p, 1)?;
        let closed = AkClosedForm::new(p)?;
        Ok(Self::from_map(p, closed, vec![(Interval::new(0.0, f64::INFINITY), 1)]))
    }

    pub fn problem(&self) -> &StationaryProblem {
        &self.problem
    }

    fn piece_index(&self, k: f64) -> Option<usize> {
        self.value_map.iter().position(|(iv, _)| iv.contains(k))
    }

    /// Regime attained at capital `k` (the regime whose stay value is `v(k)`).
    pub fn active_regime(&self, k: f64) -> Option<usize> {
        self.piece_index(k).map(|n| self.value_map[n].1)
    }

    pub fn value(&self, k: f64) -> ExtValue {
        match self.active_regime(k) {
            Some(r) => stay_value(&self.problem, r, k).unwrap_or(ExtValue::NegInf),
            None => ExtValue::NegInf,
        }
    }

    pub fn switch_target(&self, i: usize, k: f64) -> Option<usize> {
        self.regions.switch_target(i, k)
    }

    pub fn consumption(&self, i: usize, k: f64) -> f64 {
        let x = self.problem.regimes()[i - 1].threshold;
        self.closed.mpc[i - 1] * (k - x).max(0.0)
    }

    /// Phases of the equilibrium started with `theta(0-) = i0` and `k(0) = k0`.
    /// An immediate switch at time zero shows up as a first phase whose
    /// regime differs from `i0`.
    pub fn equilibrium_path(&self, i0: usize, k0: f64) -> Result<Vec<Phase>> {
        self.problem.regime(i0)?;
        let mut idx = self
            .piece_index(k0)
            .ok_or(QviError::OutOfRange { what: "initial capital", value: k0 })?;
        let p = &self.problem;
        let mut t = 0.0;
        let mut k = k0;
        let mut phases = Vec::new();
        // Each piece is entered at most once in a monotone path.
        for _ in 0..=self.value_map.len() {
            let (piece, r) = self.value_map[idx];
            let reg = p.regimes()[r - 1];
            if k <= reg.threshold {
                return Err(QviError::OutOfRange { what: "capital at or below threshold", value: k });
            }
            let g = self.closed.growth[r - 1];
            let exit = if g > 0.0 && piece.hi.is_finite() {
                Some((switch_time(p, r, k, piece.hi)?, piece.hi, idx + 1))
            } else if g < 0.0 && piece.lo > reg.threshold && idx > 0 {
                Some((switch_time(p, r, k, piece.lo)?, piece.lo, idx - 1))
            } else {
                None
            };
            let mut phase = Phase {
                regime: r,
                t_start: t,
                t_end: f64::INFINITY,
                k_start: k,
                threshold: reg.threshold,
                growth: g,
                mpc: self.closed.mpc[r - 1],
                rental_rate: reg.tech,
                wage: 0.0,
            };
            match exit {
                Some((dt, k_exit, next)) if next < self.value_map.len() => {
                    phase.t_end = t + dt;
                    phases.push(phase);
                    t += dt;
                    k = k_exit;
                    idx = next;
                }
                _ => {
                    phases.push(phase);
                    return Ok(phases);
                }
            }
        }
        Ok(phases)
    }
}

/// A lone AK regime: the stay value everywhere above its threshold.
pub fn single_regime_solution(p: &StationaryProblem) -> Result<AnalyticSolution> {
    require_vanishing(p, 1)?;
    let closed = AkClosedForm::new(p)?;
    let x = p.regimes()[0].threshold;
    Ok(AnalyticSolution::from_map(p, closed, vec![(Interval::new(x, f64::INFINITY), 1)]))
}

/// Dispatches on the number of regimes.
pub fn analytic_solution(p: &StationaryProblem) -> Result<AnalyticSolution> {
    match p.num_regimes() {
        1 => single_regime_solution(p),
        2 => two_regime_solution(p),
        3 => three_regime_regions(p),
        n => Err(QviError::AnalyticPrecondition(format!("no closed form for {n} regimes"))),
    }
}

/// Costless switching between two AK regimes: stay in regime 1 below `k_12`,
/// regime 2 from `k_12` on.
pub fn two_regime_solution(p: &StationaryProblem) -> Result<AnalyticSolution> {
    require_vanishing(p, 2)?;
    let closed = AkClosedForm::new(p)?;
    let k12 = k_threshold(p, 1, 2)?;
    let map = vec![
        (Interval::new(0.0, k12), 1),
        (Interval::new(k12, f64::INFINITY), 2),
    ];
    Ok(AnalyticSolution::from_map(p, closed, map))
}

/// Three AK regimes under the ordering hypothesis `k_12 < min(k_13, k_23)`:
/// `S_12 = [k_12, min)`, `S_13 = [max, inf)`, and regime 1 is kept on
/// `(0, k_12)` and on `[min, max)`.
pub fn three_regime_regions(p: &StationaryProblem) -> Result<AnalyticSolution> {
    require_vanishing(p, 3)?;
    let closed = AkClosedForm::new(p)?;
    let k12 = k_threshold(p, 1, 2)?;
    let k13 = k_threshold(p, 1, 3)?;
    let k23 = k_threshold(p, 2, 3)?;
    let (lo, hi) = (k13.min(k23), k13.max(k23));
    if !(k12 < lo) {
        return Err(QviError::PropositionPrecondition(format!(
            "k_12 = {k12} is not below min(k_13, k_23) = {lo}"
        )));
    }
    let map = vec![
        (Interval::new(0.0, k12), 1),
        (Interval::new(k12, lo), 2),
        (Interval::new(lo, hi), 1),
        (Interval::new(hi, f64::INFINITY), 3),
    ];
    Ok(AnalyticSolution::from_map(p, closed, map))
}

/// Closed-form equilibrium phases for the two-regime economy.
pub fn equilibrium_path(p: &StationaryProblem, i0: usize, k0: f64) -> Result<Vec<Phase>> {
    two_regime_solution(p)?.equilibrium_path(i0, k0)
}
