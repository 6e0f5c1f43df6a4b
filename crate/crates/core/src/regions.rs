//! Transformation and continuation regions as sorted interval lists.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Half-open interval `[lo, hi)`; `hi` may be `+inf`, serialized as `null`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    #[serde(serialize_with = "ser_upper", deserialize_with = "de_upper")]
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, k: f64) -> bool {
        k >= self.lo && k < self.hi
    }

    pub fn is_empty(&self) -> bool {
        !(self.hi > self.lo)
    }
}

fn ser_upper<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_none()
    }
}

fn de_upper<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
}

/// A piece of the transformation set `S_ij`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchPiece {
    pub interval: Interval,
    pub target: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeRegions {
    pub regime: usize,
    /// `S_i`, split by switch target.
    pub switch: Vec<SwitchPiece>,
    /// `N_i`.
    pub continuation: Vec<Interval>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionReport {
    pub domain: Interval,
    pub regimes: Vec<RegimeRegions>,
}

impl RegionReport {
    /// Builds the report from a labelling of the domain: `labels[r]` gives,
    /// for each sorted contiguous piece, the regime the economy should be in
    /// when it starts in regime `r + 1`. `None` means stay.
    pub fn from_labels(domain: Interval, labels: &[Vec<(Interval, Option<usize>)>]) -> Self {
        let regimes = labels
            .iter()
            .enumerate()
            .map(|(n, pieces)| {
                let mut switch: Vec<SwitchPiece> = Vec::new();
                let mut continuation: Vec<Interval> = Vec::new();
                for &(iv, target) in pieces {
                    if iv.is_empty() {
                        continue;
                    }
                    match target {
                        Some(t) => match switch.last_mut() {
                            Some(last) if last.target == t && last.interval.hi == iv.lo => {
                                last.interval.hi = iv.hi
                            }
                            _ => switch.push(SwitchPiece { interval: iv, target: t }),
                        },
                        None => match continuation.last_mut() {
                            Some(last) if last.hi == iv.lo => last.hi = iv.hi,
                            _ => continuation.push(iv),
                        },
                    }
                }
                RegimeRegions { regime: n + 1, switch, continuation }
            })
            .collect();
        Self { domain, regimes }
    }

    pub fn regime(&self, i: usize) -> Option<&RegimeRegions> {
        self.regimes.iter().find(|r| r.regime == i)
    }

    /// Regime to jump to when in regime `i` at capital `k`, if any.
    pub fn switch_target(&self, i: usize, k: f64) -> Option<usize> {
        self.regime(i)?
            .switch
            .iter()
            .find(|p| p.interval.contains(k))
            .map(|p| p.target)
    }

    /// Pieces of `S_ij` for a given target `j`.
    pub fn pieces_to(&self, i: usize, j: usize) -> Vec<Interval> {
        self.regime(i)
            .map(|r| {
                r.switch
                    .iter()
                    .filter(|p| p.target == j)
                    .map(|p| p.interval)
                    .collect()
            })
            .unwrap_or_default()
    }

    /// True when, for every regime, the switch pieces and continuation
    /// intervals are disjoint, sorted and together cover the domain.
    pub fn is_partition(&self) -> bool {
        self.regimes.iter().all(|r| {
            let mut all: Vec<Interval> = r
                .switch
                .iter()
                .map(|p| p.interval)
                .chain(r.continuation.iter().copied())
                .collect();
            all.sort_by(|a, b| a.lo.total_cmp(&b.lo));
            let sorted = |v: Vec<Interval>| v.windows(2).all(|w| w[0].hi <= w[1].lo);
            if !sorted(r.switch.iter().map(|p| p.interval).collect())
                || !sorted(r.continuation.clone())
            {
                return false;
            }
            let mut cursor = self.domain.lo;
            for iv in &all {
                if iv.lo != cursor {
                    return false;
                }
                cursor = iv.hi;
            }
            cursor == self.domain.hi
        })
    }
}
