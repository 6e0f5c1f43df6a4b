//! Node-level machinery of the monotone upwind scheme.
//!
//! At a node with neighbours held fixed, the discrete equation reads
//! `F(v) = rho v - max_b H_b(p_b(v)) = 0`, where each branch `b` pairs a
//! regime with a one-sided slope `p_b`. Forward slopes decrease and backward
//! slopes increase in `v`, while forward branches have nonnegative drift and
//! backward branches nonpositive drift, so `F` is increasing with `F' >= rho`.
//! Each `H_b` is convex in its slope, hence `F` is concave and Newton's method
//! converges monotonically after at most one step.

use super::hamiltonian::{HamPoint, Hamiltonian};

/// What sits to the right of a node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Right {
    /// No right neighbour: only inflow from the left is admissible.
    None,
    Value(f64),
    /// Right neighbour tied to this node by `v_right = alpha v + beta`.
    Closure { alpha: f64, beta: f64 },
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Stencil {
    pub k: f64,
    pub h: f64,
    pub left: Option<f64>,
    pub right: Right,
}

/// Solution of one local equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Local {
    pub value: f64,
    pub consumption: f64,
    pub drift: f64,
    pub regime: usize,
}

struct Eval {
    f: f64,
    df: f64,
    best: HamPoint,
    regime: usize,
}

fn evaluate(ham: &Hamiltonian<'_>, regimes: &[usize], rho: f64, st: &Stencil, v: f64) -> Eval {
    let mut best: Option<(HamPoint, f64, usize)> = None;
    let mut offer = |pt: HamPoint, dp: f64, r: usize| {
        if best.map_or(true, |(b, _, _)| pt.value > b.value) {
            best = Some((pt, dp, r));
        }
    };
    for &r in regimes {
        match st.right {
            Right::Value(vr) => offer(ham.forward(r, st.k, (vr - v) / st.h), -1.0 / st.h, r),
            Right::Closure { alpha, beta } => {
                let p = ((alpha - 1.0) * v + beta) / st.h;
                offer(ham.forward(r, st.k, p), (alpha - 1.0) / st.h, r)
            }
            Right::None => {}
        }
        if let Some(vl) = st.left {
            offer(ham.backward(r, st.k, (v - vl) / st.h), 1.0 / st.h, r);
        }
    }
    let (pt, dp, regime) = best.unwrap_or_else(|| {
        // no admissible direction at all: hold consumption at the floor
        let c = ham.c_floor;
        let u = crate::problem::crra(ham.problem.prefs.gamma, c);
        (HamPoint { value: u, consumption: c, drift: 0.0 }, 0.0, regimes[0])
    });
    Eval { f: rho * v - pt.value, df: rho - pt.drift * dp, best: pt, regime }
}

/// Solves the local equation by safeguarded Newton iteration from `guess`.
pub(crate) fn solve_local(
    ham: &Hamiltonian<'_>,
    regimes: &[usize],
    rho: f64,
    st: &Stencil,
    guess: f64,
) -> Local {
    let mut v = guess;
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    let mut e = evaluate(ham, regimes, rho, st, v);
    for _ in 0..200 {
        if e.f == 0.0 {
            break;
        }
        if e.f > 0.0 {
            hi = v;
        } else {
            lo = v;
        }
        let mut next = v - e.f / e.df.max(rho);
        if !(next > lo && next < hi) || !next.is_finite() {
            next = if lo.is_finite() && hi.is_finite() {
                0.5 * (lo + hi)
            } else {
                next.clamp(lo, hi)
            };
        }
        let step = (next - v).abs();
        v = next;
        e = evaluate(ham, regimes, rho, st, v);
        if step <= 1e-14 * v.abs().max(1.0) {
            break;
        }
    }
    Local { value: v, consumption: e.best.consumption, drift: e.best.drift, regime: e.regime }
}

/// Discrete equation residual `max_b H_b(p_b(v)) - rho v` at a trial value.
pub(crate) fn equation_residual(ham: &Hamiltonian<'_>, regimes: &[usize], rho: f64, st: &Stencil, v: f64) -> f64 {
    -evaluate(ham, regimes, rho, st, v).f
}

/// Homogeneity closure at the top node for a regime with threshold `x`:
/// the stay value `Q (k - x)^(1 - gamma)` (or its logarithmic analogue)
/// continued from the second-to-last node. `None` when the top cell does not
/// lie strictly above the threshold.
pub(crate) fn top_closure(gamma: f64, rho: f64, x: f64, k_top: f64, h: f64) -> Option<(f64, f64)> {
    let d = k_top - x;
    if d - h <= 0.0 {
        return None;
    }
    let ratio = (d - h) / d;
    if gamma == 1.0 {
        Some((1.0, -ratio.ln() / rho))
    } else {
        Some((ratio.powf(gamma - 1.0), 0.0))
    }
}
