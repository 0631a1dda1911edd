//! Severity schedules and greedy min-max degradation scheduling.
//!
//! A table of dataset-averaged distances between `N` candidate severities of
//! an unscheduled process is reduced to `m` interior knots by repeatedly
//! bisecting the edge with the largest distance. The selected candidates are
//! then spread uniformly over `[0, 1]`, so equal steps in the new severity
//! cover roughly equal distances, and the operator parameter is interpolated
//! linearly between knots.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::degrade::DegradationProcess;
use crate::error::{Error, Result};
use crate::metrics::mse;
use crate::signal::Signal;

#[derive(Clone, Debug, PartialEq)]
pub struct SeveritySchedule {
    knots: Vec<(f64, f64)>,
}

impl SeveritySchedule {
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::invalid("a schedule needs at least the two endpoint knots"));
        }
        if knots[0].0 != 0.0 || knots[knots.len() - 1].0 != 1.0 {
            return Err(Error::invalid("schedule knots must start at t = 0 and end at t = 1"));
        }
        for pair in knots.windows(2) {
            let ((t0, w0), (t1, w1)) = (pair[0], pair[1]);
            if !(t1 > t0) {
                return Err(Error::invalid("schedule severities must be strictly increasing"));
            }
            if !(w1 >= w0) {
                return Err(Error::invalid("schedule parameters must be non-decreasing"));
            }
        }
        if knots.iter().any(|(_, w)| !w.is_finite()) {
            return Err(Error::invalid("schedule parameters must be finite"));
        }
        Ok(SeveritySchedule { knots })
    }

    pub fn linear(w_min: f64, w_max: f64) -> Result<Self> {
        Self::new(vec![(0.0, w_min), (1.0, w_max)])
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn w_min(&self) -> f64 {
        self.knots[0].1
    }

    pub fn w_max(&self) -> f64 {
        self.knots[self.knots.len() - 1].1
    }

    /// Piecewise-linear parameter at severity `t`; exact at knots.
    pub fn interpolate(&self, t: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::invalid(format!("severity {t} outside [0, 1]")));
        }
        let k = self.knots.partition_point(|(tk, _)| *tk <= t);
        if k == self.knots.len() {
            return Ok(self.w_max());
        }
        let (t0, w0) = self.knots[k - 1];
        if t == t0 {
            return Ok(w0);
        }
        let (t1, w1) = self.knots[k];
        Ok(w0 + (w1 - w0) * (t - t0) / (t1 - t0))
    }

    /// Every parameter multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0) {
            return Err(Error::invalid("schedule scale factor must be positive"));
        }
        Self::new(self.knots.iter().map(|(t, w)| (*t, w * factor)).collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DistanceMetric {
    Rmse,
}

impl DistanceMetric {
    pub fn name(&self) -> &'static str {
        match self {
            DistanceMetric::Rmse => "rmse",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "rmse" => Ok(DistanceMetric::Rmse),
            other => Err(Error::invalid(format!("unknown distance metric '{other}'"))),
        }
    }

    pub fn eval(&self, a: &Signal, b: &Signal) -> Result<f64> {
        match self {
            DistanceMetric::Rmse => Ok(mse(a, b)?.sqrt()),
        }
    }
}

/// Mean metric value between `A_{t_i}(x)` and `A_{t_j}(x)` over the dataset.
pub fn pairwise_distance<P: DegradationProcess + ?Sized>(
    proc: &P,
    t_i: f64,
    t_j: f64,
    dataset: &[Signal],
    metric: DistanceMetric,
) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::invalid("distance needs a non-empty dataset"));
    }
    let mut total = 0.0;
    for x in dataset {
        total += metric.eval(&proc.apply(t_i, x)?, &proc.apply(t_j, x)?)?;
    }
    Ok(total / dataset.len() as f64)
}

#[derive(Clone, Debug)]
pub struct DistanceTable {
    candidates: Vec<f64>,
    params: Vec<f64>,
    d: DMatrix<f64>,
    metric: String,
}

impl DistanceTable {
    pub fn new(candidates: Vec<f64>, params: Vec<f64>, d: DMatrix<f64>, metric: &str) -> Result<Self> {
        let n = candidates.len();
        if n < 2 || params.len() != n || d.nrows() != n || d.ncols() != n {
            return Err(Error::invalid("distance table dimensions disagree"));
        }
        for i in 0..n {
            if d[(i, i)] != 0.0 {
                return Err(Error::invalid("distance table diagonal must be zero"));
            }
            for j in 0..n {
                if !(d[(i, j)] >= 0.0) || d[(i, j)] != d[(j, i)] {
                    return Err(Error::invalid("distance table must be symmetric and non-negative"));
                }
            }
        }
        Ok(DistanceTable { candidates, params, d, metric: metric.to_string() })
    }

    /// Table over `n` uniform candidates of `proc`, filled in parallel.
    pub fn build<P: DegradationProcess + ?Sized>(
        proc: &P,
        dataset: &[Signal],
        n: usize,
        metric: DistanceMetric,
    ) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("need at least two candidate severities"));
        }
        if dataset.is_empty() {
            return Err(Error::invalid("distance needs a non-empty dataset"));
        }
        let candidates: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let params = candidates.iter().map(|t| proc.param_of(*t)).collect::<Result<Vec<_>>>()?;
        let degraded: Vec<Vec<Signal>> = candidates
            .par_iter()
            .map(|t| dataset.iter().map(|x| proc.apply(*t, x)).collect::<Result<Vec<_>>>())
            .collect::<Result<_>>()?;
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if j <= i {
                            return Ok(0.0);
                        }
                        let mut total = 0.0;
                        for (a, b) in degraded[i].iter().zip(&degraded[j]) {
                            total += metric.eval(a, b)?;
                        }
                        Ok(total / dataset.len() as f64)
                    })
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<_>>()?;
        let d = DMatrix::from_fn(n, n, |i, j| if i < j { rows[i][j] } else { rows[j][i] });
        Self::new(candidates, params, d, metric.name())
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn candidates(&self) -> &[f64] {
        &self.candidates
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn metric_name(&self) -> &str {
        &self.metric
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.d
    }

    /// Largest distance between consecutive entries of sorted `indices`.
    pub fn max_edge(&self, indices: &[usize]) -> f64 {
        indices.windows(2).map(|w| self.get(w[0], w[1])).fold(0.0, f64::max)
    }

    /// Plain-text symmetric matrix, one row per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for i in 0..self.len() {
            let row: Vec<String> = (0..self.len()).map(|j| format!("{:.8e}", self.get(i, j))).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }
}

/// `m` interior candidates spaced as evenly as the grid allows.
pub fn uniform_indices(n: usize, m: usize) -> Vec<usize> {
    (0..m + 2).map(|j| ((j * (n - 1)) as f64 / (m + 1) as f64).round() as usize).collect()
}

#[derive(Clone, Debug)]
pub struct GreedyOutcome {
    pub schedule: SeveritySchedule,
    /// Selected candidate indices, sorted, endpoints included.
    pub selected: Vec<usize>,
    /// Maximum edge distance before the first insertion and after each one.
    pub max_edge_trace: Vec<f64>,
    /// Set when the table is all zeros and uniform knots were returned.
    pub degenerate: bool,
}

pub fn greedy_schedule(table: &DistanceTable, m: usize) -> Result<GreedyOutcome> {
    let n = table.len();
    if m + 2 > n {
        return Err(Error::invalid(format!("m = {m} needs at least {} candidates, have {n}", m + 2)));
    }
    if table.matrix().iter().all(|v| *v == 0.0) {
        let selected = uniform_indices(n, m);
        return Ok(GreedyOutcome {
            schedule: knots_for(table, &selected)?,
            max_edge_trace: vec![0.0; m + 1],
            selected,
            degenerate: true,
        });
    }

    let mut selected = vec![0, n - 1];
    let mut trace = vec![table.get(0, n - 1)];
    for _ in 0..m {
        // First edge holding the maximum among those with an interior candidate.
        let mut edge = None;
        let mut d_max = f64::NEG_INFINITY;
        for w in selected.windows(2) {
            let d = table.get(w[0], w[1]);
            if w[1] - w[0] > 1 && d > d_max {
                d_max = d;
                edge = Some((w[0], w[1]));
            }
        }
        let (a, b) = edge.expect("m <= N - 2 leaves a splittable edge");
        let mut best = (f64::INFINITY, a + 1);
        for j in a + 1..b {
            let cost = table.get(a, j).max(table.get(j, b));
            if cost < best.0 {
                best = (cost, j);
            }
        }
        let pos = selected.partition_point(|s| *s < best.1);
        selected.insert(pos, best.1);
        trace.push(table.max_edge(&selected));
    }
    Ok(GreedyOutcome { schedule: knots_for(table, &selected)?, selected, max_edge_trace: trace, degenerate: false })
}

// Knot j of m + 2 sits at t = j/(m + 1) with the parameter of the selected candidate.
fn knots_for(table: &DistanceTable, selected: &[usize]) -> Result<SeveritySchedule> {
    let last = (selected.len() - 1) as f64;
    SeveritySchedule::new(selected.iter().enumerate().map(|(j, idx)| (j as f64 / last, table.params()[*idx])).collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScheduleHeader {
    pub process: String,
    pub metric: String,
    pub candidates: usize,
    pub knots: usize,
}

pub fn format_schedule(header: &ScheduleHeader, schedule: &SeveritySchedule) -> String {
    let mut out =
        format!("# process={} metric={} N={} m={}\n", header.process, header.metric, header.candidates, header.knots);
    for (t, w) in schedule.knots() {
        let _ = writeln!(out, "{t:.8e} {w:.8e}");
    }
    out
}

pub fn parse_schedule(text: &str) -> Result<(ScheduleHeader, SeveritySchedule)> {
    let mut lines = text.lines();
    let head = lines
        .next()
        .and_then(|l| l.strip_prefix("# "))
        .ok_or_else(|| Error::Format("schedule file lacks a header line".into()))?;
    let mut fields = std::collections::HashMap::new();
    for part in head.split_whitespace() {
        let (k, v) = part.split_once('=').ok_or_else(|| Error::Format(format!("bad header field '{part}'")))?;
        fields.insert(k, v);
    }
    let get = |k: &str| fields.get(k).copied().ok_or_else(|| Error::Format(format!("schedule header lacks '{k}'")));
    let parse_usize =
        |k: &str| -> Result<usize> { get(k)?.parse().map_err(|_| Error::Format(format!("bad value for '{k}'"))) };
    let header = ScheduleHeader {
        process: get("process")?.to_string(),
        metric: get("metric")?.to_string(),
        candidates: parse_usize("N")?,
        knots: parse_usize("m")?,
    };
    let mut knots = Vec::new();
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let mut it = line.split_whitespace().map(str::parse::<f64>);
        match (it.next(), it.next(), it.next()) {
            (Some(Ok(t)), Some(Ok(w)), None) => knots.push((t, w)),
            _ => return Err(Error::Format(format!("bad schedule line '{line}'"))),
        }
    }
    let schedule = SeveritySchedule::new(knots).map_err(|e| Error::Format(e.to_string()))?;
    Ok((header, schedule))
}
