use std::fmt;

/// A value on the extended real line bounded below by minus infinity.
///
/// Stay values below a production threshold and the switch obstacle of a
/// single-regime problem are `NegInf`. Keeping the sentinel out of `f64`
/// arithmetic means maxima over obstacles never see an IEEE infinity.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub enum ExtValue {
    NegInf,
    Finite(f64),
}

impl ExtValue {
    pub fn finite(self) -> Option<f64> {
        match self {
            ExtValue::Finite(v) => Some(v),
            ExtValue::NegInf => None,
        }
    }

    /// IEEE view of the value, for output only.
    pub fn to_f64(self) -> f64 {
        self.finite().unwrap_or(f64::NEG_INFINITY)
    }

    pub fn is_neg_inf(self) -> bool {
        matches!(self, ExtValue::NegInf)
    }

    /// Larger of the two; `NegInf` loses against every finite value.
    pub fn max(self, other: ExtValue) -> ExtValue {
        if other > self {
            other
        } else {
            self
        }
    }

    pub fn max_with(self, v: f64) -> f64 {
        match self {
            ExtValue::Finite(o) if o > v => o,
            _ => v,
        }
    }
}

impl From<f64> for ExtValue {
    fn from(v: f64) -> Self {
        ExtValue::Finite(v)
    }
}

impl fmt::Display for ExtValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtValue::NegInf => f.write_str("-inf"),
            ExtValue::Finite(v) => write!(f, "{v}"),
        }
    }
}
