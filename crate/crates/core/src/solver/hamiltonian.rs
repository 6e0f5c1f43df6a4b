//! Pointwise Hamiltonians `sup_c [ mu_i(k, c) p + u(c) ]`.

use serde::{Deserialize, Serialize};

use crate::ext::ExtValue;
use crate::problem::{crra, StationaryProblem, SwitchingCostMatrix};

/// How the supremum over consumption is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConsumptionMode {
    /// First-order condition `c = p^(-1/gamma)`, clamped to the admissible set.
    ClosedForm,
    /// Brute force over `n_c` log-spaced consumption levels.
    GridSearch { n_c: usize },
}

/// Evaluates Hamiltonians of one problem on a truncated capital domain.
#[derive(Debug, Clone, Copy)]
pub struct Hamiltonian<'a> {
    pub problem: &'a StationaryProblem,
    pub mode: ConsumptionMode,
    pub c_floor: f64,
    pub k_max: f64,
}

/// Value and maximiser of a Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HamPoint {
    pub value: f64,
    pub consumption: f64,
    /// Drift at the maximiser.
    pub drift: f64,
}

impl<'a> Hamiltonian<'a> {
    /// Upper end of the consumption search, `f_i(k) + (delta + pi) k_max + 1`.
    pub fn c_cap(&self, i: usize, k: f64) -> f64 {
        let r = &self.problem.regimes()[i - 1];
        r.output(k) + self.problem.prefs.effective_depreciation() * self.k_max + 1.0
    }

    #[inline]
    fn u(&self, c: f64) -> f64 {
        crra(self.problem.prefs.gamma, c)
    }

    #[inline]
    fn foc(&self, p: f64) -> f64 {
        p.powf(-1.0 / self.problem.prefs.gamma)
    }

    /// Unrestricted Hamiltonian at a single slope. A nonpositive slope has no
    /// interior maximiser; consumption is then held at `c_floor`.
    pub fn evaluate(&self, i: usize, k: f64, slope: f64) -> HamPoint {
        let y = self.problem.net_output_unchecked(i, k);
        match self.mode {
            ConsumptionMode::ClosedForm => {
                let c = if slope > 0.0 {
                    self.foc(slope).max(self.c_floor)
                } else {
                    self.c_floor
                };
                self.point(y, c, slope)
            }
            ConsumptionMode::GridSearch { n_c } => {
                self.search(y, self.c_floor, self.c_cap(i, k), n_c, |_| slope)
            }
        }
    }

    #[inline]
    fn point(&self, y: f64, c: f64, p: f64) -> HamPoint {
        let drift = y - c;
        HamPoint { value: drift * p + self.u(c), consumption: c, drift }
    }

    fn search(&self, y: f64, lo: f64, hi: f64, n_c: usize, slope_for: impl Fn(f64) -> f64) -> HamPoint {
        let n_c = n_c.max(2);
        let (llo, lhi) = (lo.ln(), hi.max(lo).ln());
        let step = (lhi - llo) / (n_c - 1) as f64;
        let mut best: Option<HamPoint> = None;
        let mut consider = |c: f64| {
            let pt = self.point(y, c, slope_for(y - c));
            if best.map_or(true, |b| pt.value > b.value) {
                best = Some(pt);
            }
        };
        for m in 0..n_c {
            consider((llo + step * m as f64).exp());
        }
        if y > lo && y < hi {
            consider(y);
        }
        best.expect("at least two candidates")
    }

    /// Forward branch of the upwind Hamiltonian: consumption restricted to
    /// `c <= y` so the drift is nonnegative and pairs with a forward slope.
    pub fn forward(&self, i: usize, k: f64, p: f64) -> HamPoint {
        let y = self.problem.net_output_unchecked(i, k);
        let top = y.max(self.c_floor);
        match self.mode {
            ConsumptionMode::ClosedForm => {
                let c = if p > 0.0 { self.foc(p).clamp(self.c_floor, top) } else { top };
                let mut pt = self.point(y, c, p);
                if pt.drift < 0.0 {
                    // only when y < c_floor: treat the floor as stationary
                    pt = HamPoint { value: self.u(c), consumption: c, drift: 0.0 };
                }
                pt
            }
            ConsumptionMode::GridSearch { n_c } => {
                let mut pt = self.search(y, self.c_floor, top, n_c, |_| p);
                if pt.drift < 0.0 {
                    pt = HamPoint { value: self.u(pt.consumption), consumption: pt.consumption, drift: 0.0 };
                }
                pt
            }
        }
    }

    /// Backward branch: `c >= y`, nonpositive drift, paired with a backward slope.
    pub fn backward(&self, i: usize, k: f64, p: f64) -> HamPoint {
        let y = self.problem.net_output_unchecked(i, k);
        let bottom = y.max(self.c_floor);
        let cap = self.c_cap(i, k).max(bottom);
        match self.mode {
            ConsumptionMode::ClosedForm => {
                let c = if p > 0.0 { self.foc(p).clamp(bottom, cap) } else { cap };
                self.point(y, c, p)
            }
            ConsumptionMode::GridSearch { n_c } => self.search(y, bottom, cap, n_c, |_| p),
        }
    }
}

/// Free-function form of [`Hamiltonian::evaluate`]: `(value, argmax c)`.
pub fn hamiltonian(
    p: &StationaryProblem,
    i: usize,
    k: f64,
    slope: f64,
    mode: ConsumptionMode,
    c_floor: f64,
    k_max: f64,
) -> (f64, f64) {
    let h = Hamiltonian { problem: p, mode, c_floor, k_max };
    let pt = h.evaluate(i, k, slope);
    (pt.value, pt.consumption)
}

/// `max_{j != i} (v_j - eta_ij)` with smallest-index tie-breaking.
/// `values[j - 1]` is the value of regime `j` at the node.
pub fn switch_obstacle(values: &[f64], i: usize, costs: &SwitchingCostMatrix) -> (ExtValue, Option<usize>) {
    switch_obstacle_by(values.len(), i, costs, |j| values[j - 1])
}

pub(crate) fn switch_obstacle_by(
    n: usize,
    i: usize,
    costs: &SwitchingCostMatrix,
    value: impl Fn(usize) -> f64,
) -> (ExtValue, Option<usize>) {
    let mut best = ExtValue::NegInf;
    let mut target = None;
    for j in 1..=n {
        if j == i {
            continue;
        }
        let cand = ExtValue::Finite(value(j) - costs.cost(i, j));
        if cand > best {
            best = cand;
            target = Some(j);
        }
    }
    (best, target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::Preferences;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn bench() -> StationaryProblem {
        StationaryProblem::new(
            [(0.2, 0.0), (0.3, 1.0)],
            Preferences::new(2.0, 0.04, 0.0, 0.05),
            SwitchingCostMatrix::vanishing(2),
        )
    }

    #[test]
    fn unit_slope_with_zero_output() {
        // regime 2 at its threshold produces nothing
        let p = bench();
        let (v, c) = hamiltonian(&p, 2, 1.0, 1.0, ConsumptionMode::ClosedForm, 1e-10, 6.0);
        assert_relative_eq!(v, -2.0, max_relative = 1e-14);
        assert_relative_eq!(c, 1.0, max_relative = 1e-14);
    }

    #[test]
    fn degenerate_slopes_clamp() {
        let p = bench();
        let h = Hamiltonian { problem: &p, mode: ConsumptionMode::ClosedForm, c_floor: 1e-10, k_max: 6.0 };
        let pt = h.evaluate(1, 1.0, 0.0);
        assert_eq!(pt.consumption, 1e-10);
        let pt = h.evaluate(1, 1.0, -3.0);
        assert_eq!(pt.consumption, 1e-10);
        // tiny slope: the backward branch caps consumption
        let b = h.backward(1, 1.0, 1e-12);
        assert_eq!(b.consumption, h.c_cap(1, 1.0));
        let f = h.forward(1, 1.0, 1e-12);
        assert_relative_eq!(f.consumption, 0.15, max_relative = 1e-14);
        assert!(f.drift >= 0.0 && b.drift <= 0.0);
    }

    #[test]
    fn obstacle_examples() {
        let costs = SwitchingCostMatrix::uniform(2, 1.0);
        assert_eq!(switch_obstacle(&[-10.0, -5.0], 1, &costs), (ExtValue::Finite(-6.0), Some(2)));
        let zero = SwitchingCostMatrix::vanishing(3);
        assert_eq!(switch_obstacle(&[-10.0, -5.0, -5.0], 1, &zero), (ExtValue::Finite(-5.0), Some(2)));
        let one = SwitchingCostMatrix::vanishing(1);
        assert_eq!(switch_obstacle(&[-3.0], 1, &one), (ExtValue::NegInf, None));
    }

    proptest! {
        // The grid search is the brute-force oracle for the first-order condition.
        #[test]
        fn grid_search_matches_closed_form(k in 0.05f64..6.0, slope in 1.0f64..500.0, i in 1usize..=2) {
            let p = bench();
            let (vc, c) = hamiltonian(&p, i, k, slope, ConsumptionMode::ClosedForm, 1e-10, 6.0);
            let (vg, _) = hamiltonian(&p, i, k, slope, ConsumptionMode::GridSearch { n_c: 4000 }, 1e-10, 6.0);
            prop_assert!(vg <= vc + 1e-12 * vc.abs());
            // production and utility terms can cancel, so measure against the
            // larger of the value and the utility at the optimum
            let scale = vc.abs().max(p.utility(c).unwrap().abs());
            prop_assert!((vc - vg).abs() / scale <= 1e-4, "closed {} grid {}", vc, vg);
        }

        #[test]
        fn upwind_branches_bound_the_unrestricted_value(k in 0.05f64..6.0, slope in 0.01f64..100.0) {
            let p = bench();
            let h = Hamiltonian { problem: &p, mode: ConsumptionMode::ClosedForm, c_floor: 1e-10, k_max: 6.0 };
            let full = h.evaluate(1, k, slope).value;
            let best = h.forward(1, k, slope).value.max(h.backward(1, k, slope).value);
            prop_assert!((full - best).abs() <= 1e-12 * full.abs().max(1.0));
        }
    }
}
