//! Brute-force reference for the greedy scheduler.

use crate::error::{Error, Result};
use crate::schedule::{greedy_schedule, uniform_indices, DistanceTable};

/// Exact min-max schedule: the smallest achievable largest edge over every
/// choice of `m` interior candidates, with the lexicographically first
/// minimizer.
pub fn brute_force_minmax(table: &DistanceTable, m: usize) -> Result<(f64, Vec<usize>)> {
    let n = table.len();
    if m + 2 > n {
        return Err(Error::invalid(format!("m = {m} needs at least {} candidates, have {n}", m + 2)));
    }
    let mut best = (f64::INFINITY, Vec::new());
    let mut chosen = Vec::with_capacity(m + 2);
    chosen.push(0);
    search(table, m, 1, &mut chosen, &mut best);
    Ok(best)
}

fn search(table: &DistanceTable, m: usize, next: usize, chosen: &mut Vec<usize>, best: &mut (f64, Vec<usize>)) {
    let n = table.len();
    if chosen.len() == m + 1 {
        chosen.push(n - 1);
        let cost = table.max_edge(chosen);
        if cost < best.0 {
            *best = (cost, chosen.clone());
        }
        chosen.pop();
        return;
    }
    let remaining = m + 1 - chosen.len();
    for i in next..n - remaining {
        chosen.push(i);
        search(table, m, i + 1, chosen, best);
        chosen.pop();
    }
}

#[derive(Clone, Debug)]
pub struct SchedulerAudit {
    pub m: usize,
    pub greedy: f64,
    pub uniform: f64,
    /// Brute-force optimum, when computed.
    pub optimum: Option<f64>,
    /// Largest-edge trace never increases across insertions.
    pub monotone: bool,
}

impl SchedulerAudit {
    pub fn greedy_beats_uniform(&self) -> bool {
        self.greedy <= self.uniform
    }

    pub fn matches_optimum(&self) -> Option<bool> {
        self.optimum.map(|o| self.greedy <= o * (1.0 + 1e-12) + 1e-15)
    }

    pub fn pass(&self) -> bool {
        self.greedy_beats_uniform() && self.monotone && self.matches_optimum().unwrap_or(true)
    }
}

/// Compares greedy against the uniform index schedule and, when
/// `brute_force` is set, against the exact optimum.
pub fn audit_scheduler(table: &DistanceTable, m: usize, brute_force: bool) -> Result<SchedulerAudit> {
    let outcome = greedy_schedule(table, m)?;
    let greedy = table.max_edge(&outcome.selected);
    let uniform = table.max_edge(&uniform_indices(table.len(), m));
    let monotone = outcome.max_edge_trace.windows(2).all(|w| w[1] <= w[0]);
    let optimum = if brute_force { Some(brute_force_minmax(table, m)?.0) } else { None };
    Ok(SchedulerAudit { m, greedy, uniform, optimum, monotone })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn additive(n: usize) -> DistanceTable {
        let d = DMatrix::from_fn(n, n, |i, j| (i as f64 - j as f64).abs());
        DistanceTable::new(
            (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
            (0..n).map(|i| i as f64).collect(),
            d,
            "rmse",
        )
        .unwrap()
    }

    #[test]
    fn brute_force_on_additive_table() {
        let t = additive(12);
        let (cost, sel) = brute_force_minmax(&t, 2).unwrap();
        assert_eq!(cost, 4.0);
        assert_eq!(sel.len(), 4);
        assert_eq!((sel[0], sel[3]), (0, 11));
    }

    #[test]
    fn single_split_is_optimal() {
        let t = additive(9);
        let a = audit_scheduler(&t, 1, true).unwrap();
        assert_eq!(a.greedy, 4.0);
        assert_eq!(a.matches_optimum(), Some(true));
    }
}
