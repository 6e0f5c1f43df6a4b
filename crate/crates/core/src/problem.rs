//! Problem data: AK regimes, CRRA preferences and the switching-cost matrix.
//!
//! Regimes are numbered from 1 as in the model; index 0 is never valid.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{QviError, Result};

/// Household preferences and demographic/depreciation rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Preferences {
    /// Elasticity of marginal utility. `gamma == 1` selects log utility.
    pub gamma: f64,
    /// Pure discount rate.
    pub rho: f64,
    /// Population growth rate.
    pub pi: f64,
    /// Capital depreciation rate.
    pub delta: f64,
}

impl Preferences {
    pub fn new(gamma: f64, rho: f64, pi: f64, delta: f64) -> Self {
        Self { gamma, rho, pi, delta }
    }

    /// Discount rate applied to per-capita utility, `rho - pi`.
    pub fn effective_discount(&self) -> f64 {
        self.rho - self.pi
    }

    /// Rate at which per-capita capital dilutes, `delta + pi`.
    pub fn effective_depreciation(&self) -> f64 {
        self.delta + self.pi
    }

    pub fn is_log(&self) -> bool {
        self.gamma == 1.0
    }

    /// `u(c)`, without domain checks.
    #[inline]
    pub fn u(&self, c: f64) -> f64 {
        crra(self.gamma, c)
    }
}

#[inline]
pub(crate) fn crra(gamma: f64, c: f64) -> f64 {
    if gamma == 1.0 {
        c.ln()
    } else {
        c.powf(1.0 - gamma) / (1.0 - gamma)
    }
}

/// One piecewise-linear technology `f(k) = A (k - x)_+`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AkRegime {
    pub index: usize,
    /// Technology level `A`.
    pub tech: f64,
    /// Production threshold `x`.
    pub threshold: f64,
}

impl AkRegime {
    pub fn output(&self, k: f64) -> f64 {
        self.tech * (k - self.threshold).max(0.0)
    }
}

/// Constant switching costs, indexed `[from - 1][to - 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchingCostMatrix {
    eta: Vec<Vec<f64>>,
}

impl SwitchingCostMatrix {
    pub fn from_rows(eta: Vec<Vec<f64>>) -> Self {
        Self { eta }
    }

    /// All costs zero: the costless-switching limit.
    pub fn vanishing(n: usize) -> Self {
        Self { eta: vec![vec![0.0; n]; n] }
    }

    /// The same cost on every off-diagonal entry.
    pub fn uniform(n: usize, cost: f64) -> Self {
        let eta = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 0.0 } else { cost }).collect())
            .collect();
        Self { eta }
    }

    pub fn dim(&self) -> usize {
        self.eta.len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.eta
    }

    /// Cost of switching from regime `i` to regime `j` (1-based).
    #[inline]
    pub fn cost(&self, i: usize, j: usize) -> f64 {
        self.eta[i - 1][j - 1]
    }

    pub fn is_vanishing(&self) -> bool {
        self.eta.iter().flatten().all(|&v| v == 0.0)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            eta: self
                .eta
                .iter()
                .map(|row| row.iter().map(|v| v * factor).collect())
                .collect(),
        }
    }
}

/// A violated standing assumption.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    NoRegimes,
    NonFinite { field: String },
    TechNotPositive { regime: usize, value: f64 },
    ThresholdNegative { regime: usize, value: f64 },
    TechNotIncreasing { regime: usize },
    ThresholdNotIncreasing { regime: usize },
    GammaNotPositive { value: f64 },
    DeltaNegative { value: f64 },
    PiNegative { value: f64 },
    DiscountNotPositive { value: f64 },
    FinitenessViolated { regime: usize, value: f64 },
    CostShape { expected: usize },
    DiagonalCostNonzero { regime: usize, value: f64 },
    NegativeCost { from: usize, to: usize, value: f64 },
    TriangleInequality { i: usize, j: usize, l: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match self {
            NoRegimes => write!(f, "no regimes"),
            NonFinite { field } => write!(f, "non-finite value in {field}"),
            TechNotPositive { regime, value } => {
                write!(f, "technology level of regime {regime} not positive ({value})")
            }
            ThresholdNegative { regime, value } => {
                write!(f, "threshold of regime {regime} negative ({value})")
            }
            TechNotIncreasing { regime } => {
                write!(f, "technology level not strictly increasing at regime {regime}")
            }
            ThresholdNotIncreasing { regime } => {
                write!(f, "threshold not strictly increasing at regime {regime}")
            }
            GammaNotPositive { value } => write!(f, "gamma not positive ({value})"),
            DeltaNegative { value } => write!(f, "delta negative ({value})"),
            PiNegative { value } => write!(f, "pi negative ({value})"),
            DiscountNotPositive { value } => {
                write!(f, "effective discount rho - pi not positive ({value})")
            }
            FinitenessViolated { regime, value } => write!(
                f,
                "finiteness condition violated for regime {regime}: rho + (A - delta)(gamma - 1) = {value}"
            ),
            CostShape { expected } => write!(f, "cost matrix must be {expected}x{expected}"),
            DiagonalCostNonzero { regime, value } => {
                write!(f, "diagonal cost nonzero for regime {regime} ({value})")
            }
            NegativeCost { from, to, value } => {
                write!(f, "negative switching cost {from}->{to} ({value})")
            }
            TriangleInequality { i, j, l } => write!(
                f,
                "triangle inequality violated: eta[{i}][{j}] + eta[{j}][{l}] <= eta[{i}][{l}]"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    /// `A_i - rho - delta` per regime; positive means the stay path grows.
    pub growth_margins: Vec<f64>,
    pub vanishing_costs: bool,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_valid() {
            return write!(f, "valid");
        }
        let msgs: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", msgs.join("; "))
    }
}

/// Regimes, preferences and costs of a stationary switching problem.
///
/// The drift of regime `i` is `(A_i - delta - pi)(k - x_i)_+ - c`: depreciation
/// and dilution act on productive capital only, which is the accumulation
/// law under which the stay values have the closed form used by
/// [`crate::analytic`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryProblem {
    regimes: Vec<AkRegime>,
    pub prefs: Preferences,
    pub costs: SwitchingCostMatrix,
}

impl StationaryProblem {
    /// Builds a problem from `(A, x)` pairs listed in regime order.
    pub fn new(
        regimes: impl IntoIterator<Item = (f64, f64)>,
        prefs: Preferences,
        costs: SwitchingCostMatrix,
    ) -> Self {
        let regimes = regimes
            .into_iter()
            .enumerate()
            .map(|(n, (tech, threshold))| AkRegime { index: n + 1, tech, threshold })
            .collect();
        Self { regimes, prefs, costs }
    }

    pub fn num_regimes(&self) -> usize {
        self.regimes.len()
    }

    pub fn regimes(&self) -> &[AkRegime] {
        &self.regimes
    }

    pub fn regime(&self, i: usize) -> Result<&AkRegime> {
        if i == 0 {
            return Err(QviError::UnknownRegime(i));
        }
        self.regimes.get(i - 1).ok_or(QviError::UnknownRegime(i))
    }

    pub fn regime_ids(&self) -> std::ops::RangeInclusive<usize> {
        1..=self.regimes.len()
    }

    pub fn with_costs(&self, costs: SwitchingCostMatrix) -> Self {
        Self { costs, ..self.clone() }
    }

    /// Output net of depreciation and dilution, `(A_i - delta - pi)(k - x_i)_+`.
    #[inline]
    pub(crate) fn net_output_unchecked(&self, i: usize, k: f64) -> f64 {
        let r = &self.regimes[i - 1];
        (r.tech - self.prefs.effective_depreciation()) * (k - r.threshold).max(0.0)
    }

    pub fn net_output(&self, i: usize, k: f64) -> Result<f64> {
        self.regime(i)?;
        Ok(self.net_output_unchecked(i, k))
    }

    /// Rate of change of per-capita capital in regime `i`.
    pub fn drift(&self, i: usize, k: f64, c: f64) -> Result<f64> {
        self.regime(i)?;
        if k < 0.0 {
            return Err(QviError::OutOfRange { what: "capital", value: k });
        }
        if c < 0.0 {
            return Err(QviError::OutOfRange { what: "consumption", value: c });
        }
        Ok(self.net_output_unchecked(i, k) - c)
    }

    pub fn utility(&self, c: f64) -> Result<f64> {
        positive("consumption", c)?;
        Ok(self.prefs.u(c))
    }

    pub fn marginal_utility(&self, c: f64) -> Result<f64> {
        positive("consumption", c)?;
        Ok(c.powf(-self.prefs.gamma))
    }

    pub fn inverse_marginal_utility(&self, m: f64) -> Result<f64> {
        positive("marginal utility", m)?;
        Ok(m.powf(-1.0 / self.prefs.gamma))
    }

    /// `rho_eff + (A_i - delta_eff)(gamma - 1)`; must be positive for the
    /// stay value of regime `i` to be finite.
    pub fn finiteness_margin(&self, i: usize) -> Result<f64> {
        let r = self.regime(i)?;
        let p = &self.prefs;
        Ok(p.effective_discount() + (r.tech - p.effective_depreciation()) * (p.gamma - 1.0))
    }

    pub fn validate(&self) -> ValidationReport {
        let mut v = Vec::new();
        let p = &self.prefs;

        if self.regimes.is_empty() {
            v.push(Violation::NoRegimes);
        }
        for (name, val) in [("gamma", p.gamma), ("rho", p.rho), ("pi", p.pi), ("delta", p.delta)] {
            if !val.is_finite() {
                v.push(Violation::NonFinite { field: name.to_string() });
            }
        }
        if !(p.gamma > 0.0) {
            v.push(Violation::GammaNotPositive { value: p.gamma });
        }
        if p.delta < 0.0 {
            v.push(Violation::DeltaNegative { value: p.delta });
        }
        if p.pi < 0.0 {
            v.push(Violation::PiNegative { value: p.pi });
        }
        if !(p.effective_discount() > 0.0) {
            v.push(Violation::DiscountNotPositive { value: p.effective_discount() });
        }

        for (n, r) in self.regimes.iter().enumerate() {
            if !r.tech.is_finite() || !r.threshold.is_finite() {
                v.push(Violation::NonFinite { field: format!("regime {}", r.index) });
                continue;
            }
            if !(r.tech > 0.0) {
                v.push(Violation::TechNotPositive { regime: r.index, value: r.tech });
            }
            if r.threshold < 0.0 {
                v.push(Violation::ThresholdNegative { regime: r.index, value: r.threshold });
            }
            if n > 0 {
                let prev = &self.regimes[n - 1];
                if !(r.tech > prev.tech) {
                    v.push(Violation::TechNotIncreasing { regime: r.index });
                }
                if !(r.threshold > prev.threshold) {
                    v.push(Violation::ThresholdNotIncreasing { regime: r.index });
                }
            }
            let margin = p.effective_discount()
                + (r.tech - p.effective_depreciation()) * (p.gamma - 1.0);
            if !(margin > 0.0) {
                v.push(Violation::FinitenessViolated { regime: r.index, value: margin });
            }
        }

        let n = self.regimes.len();
        let vanishing = self.costs.is_vanishing();
        if self.costs.dim() != n || self.costs.rows().iter().any(|row| row.len() != n) {
            v.push(Violation::CostShape { expected: n });
        } else {
            for i in 1..=n {
                for j in 1..=n {
                    let c = self.costs.cost(i, j);
                    if !c.is_finite() {
                        v.push(Violation::NonFinite { field: format!("eta[{i}][{j}]") });
                    } else if i == j && c != 0.0 {
                        v.push(Violation::DiagonalCostNonzero { regime: i, value: c });
                    } else if c < 0.0 {
                        v.push(Violation::NegativeCost { from: i, to: j, value: c });
                    }
                }
            }
            // Costless switching is the admitted limit case, exempt from the
            // strict inequality.
            if !vanishing {
                for i in 1..=n {
                    for j in 1..=n {
                        for l in 1..=n {
                            if j == i || j == l {
                                continue;
                            }
                            let lhs = self.costs.cost(i, j) + self.costs.cost(j, l);
                            if !(lhs > self.costs.cost(i, l)) {
                                v.push(Violation::TriangleInequality { i, j, l });
                            }
                        }
                    }
                }
            }
        }

        let growth_margins = self
            .regimes
            .iter()
            .map(|r| r.tech - p.rho - p.delta)
            .collect();
        ValidationReport { violations: v, growth_margins, vanishing_costs: vanishing }
    }

    /// Fails with [`QviError::InvalidProblem`] unless [`Self::validate`] is clean.
    pub fn ensure_valid(&self) -> Result<()> {
        let report = self.validate();
        if report.is_valid() {
            Ok(())
        } else {
            Err(QviError::InvalidProblem(report.to_string()))
        }
    }
}

fn positive(what: &'static str, value: f64) -> Result<()> {
    if value > 0.0 {
        Ok(())
    } else {
        Err(QviError::NonPositive { what, value })
    }
}
