use super::DiscretizedSolution;
use crate::regions::{Interval, RegionReport};

/// Transformation and continuation regions read off the switch policy.
///
/// A run of nodes `a..=b` with the same label becomes `[k_a, k_{b+1})`; the
/// run ending at the last node closes at `k_max`.
pub fn extract_regions(sol: &DiscretizedSolution) -> RegionReport {
    let g = sol.grid;
    let n = g.n;
    let labels: Vec<Vec<(Interval, Option<usize>)>> = sol
        .switch_policy
        .iter()
        .map(|policy| {
            let mut pieces = Vec::new();
            let mut start = 0;
            for m in 1..=n {
                if m == n || policy[m] != policy[start] {
                    pieces.push((Interval::new(g.node(start), g.node(m.min(n - 1))), policy[start]));
                    start = m;
                }
            }
            pieces
        })
        .collect();
    RegionReport::from_labels(Interval::new(g.k_min, g.k_max), &labels)
}
