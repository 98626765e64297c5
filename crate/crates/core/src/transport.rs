//! Exact Wasserstein distances between equal-size uniform empirical measures.
//!
//! Samples are flat arrays of points. A point of the product space
//! `(Ω × R^d)^k` is laid out factor by factor as
//! `[x^1, ξ^1, x^2, ξ^2, …, x^k, ξ^k]`.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

/// Default cap on the assignment size `n`.
pub const DEFAULT_ASSIGNMENT_CAP: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MetricKind {
    /// `|x¹ - x²| + |ξ¹ - ξ²|` on a single factor.
    PhaseSpace,
    /// `‖(|x¹_i - x²_i|)_i‖_q + ‖(|ξ¹_i - ξ²_i|)_i‖_q` over `k` factors.
    ProductQ { k: usize, q: f64 },
}

/// Ground metric on (products of) phase space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundMetric {
    pub label_dim: usize,
    pub opinion_dim: usize,
    pub kind: MetricKind,
}

impl GroundMetric {
    pub fn phase_space(label_dim: usize, opinion_dim: usize) -> Self {
        GroundMetric {
            label_dim,
            opinion_dim,
            kind: MetricKind::PhaseSpace,
        }
    }

    /// `q` may be `f64::INFINITY`.
    pub fn product(label_dim: usize, opinion_dim: usize, k: usize, q: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::domain("product metric needs k >= 1 factors"));
        }
        if !(q >= 1.0) {
            return Err(Error::domain(format!("q must lie in [1, inf], got {q}")));
        }
        Ok(GroundMetric {
            label_dim,
            opinion_dim,
            kind: MetricKind::ProductQ { k, q },
        })
    }

    pub fn factors(&self) -> usize {
        match self.kind {
            MetricKind::PhaseSpace => 1,
            MetricKind::ProductQ { k, .. } => k,
        }
    }

    /// Length of one point.
    pub fn point_dim(&self) -> usize {
        self.factors() * (self.label_dim + self.opinion_dim)
    }

    /// Distance without shape checks.
    fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        let (dx, d) = (self.label_dim, self.opinion_dim);
        let w = dx + d;
        let gap = |lo: usize, hi: usize| -> f64 {
            a[lo..hi]
                .iter()
                .zip(&b[lo..hi])
                .map(|(u, v)| (u - v) * (u - v))
                .sum::<f64>()
                .sqrt()
        };
        match self.kind {
            MetricKind::PhaseSpace => gap(0, dx) + gap(dx, w),
            MetricKind::ProductQ { k, q } => {
                let labels = (0..k).map(|i| gap(i * w, i * w + dx));
                let opinions = (0..k).map(|i| gap(i * w + dx, (i + 1) * w));
                lq(labels, q) + lq(opinions, q)
            }
        }
    }
}

fn lq(values: impl Iterator<Item = f64>, q: f64) -> f64 {
    if q.is_infinite() {
        values.fold(0.0, f64::max)
    } else if q == 1.0 {
        values.sum()
    } else {
        values.map(|v| v.powf(q)).sum::<f64>().powf(1.0 / q)
    }
}

pub fn ground_distance(z1: &[f64], z2: &[f64], metric: &GroundMetric) -> Result<f64> {
    let n = metric.point_dim();
    if z1.len() != n || z2.len() != n {
        return Err(Error::domain(format!(
            "points of length {} and {} do not match metric dimension {n}",
            z1.len(),
            z2.len()
        )));
    }
    Ok(metric.eval(z1, z2))
}

fn check_p(p: f64) -> Result<()> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::domain(format!("transport order p must lie in [1, inf), got {p}")));
    }
    Ok(())
}

/// `W_p` between scalar samples of equal size via the sorted coupling.
pub fn wasserstein_1d(a: &[f64], b: &[f64], p: f64) -> Result<f64> {
    check_p(p)?;
    if a.len() != b.len() {
        return Err(Error::domain(format!(
            "unequal sample counts {} and {}; resample to a common count first",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::domain("empty samples"));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::Data("NaN sample".into()));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let n = a.len() as f64;
    let mean: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).abs().powf(p)).sum::<f64>() / n;
    Ok(mean.powf(1.0 / p))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportResult {
    pub distance: f64,
    /// `assignment[i]` is the index in B matched to point `i` of A.
    pub assignment: Vec<usize>,
    /// Statistics of the cost matrix entries `ground_distance^p`.
    pub cost_stats: CostStats,
}

/// Exact `W_p` between uniform empirical measures on equally many points,
/// using the optimal assignment of the `n × n` cost matrix
/// `ground_distance^p`.
pub fn wasserstein_assignment(
    a: &[f64],
    b: &[f64],
    p: f64,
    metric: &GroundMetric,
    cap: usize,
) -> Result<TransportResult> {
    check_p(p)?;
    let dim = metric.point_dim();
    if dim == 0 || a.len() % dim != 0 || b.len() % dim != 0 {
        return Err(Error::domain(format!("sample arrays are not a multiple of point dimension {dim}")));
    }
    let n = a.len() / dim;
    if n != b.len() / dim {
        return Err(Error::domain(format!(
            "unequal sample counts {n} and {}; resample to a common count first",
            b.len() / dim
        )));
    }
    if n == 0 {
        return Err(Error::domain("empty samples"));
    }
    if n > cap {
        return Err(Error::Capacity {
            what: "assignment size n",
            needed: n as f64,
            cap: cap as f64,
            advice: "reduce the sample count or raise assignment_cap",
        });
    }
    let mut cost = vec![0.0; n * n];
    cost.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        let zi = &a[i * dim..(i + 1) * dim];
        for (j, c) in row.iter_mut().enumerate() {
            let dist = metric.eval(zi, &b[j * dim..(j + 1) * dim]);
            *c = if p == 1.0 { dist } else { dist.powf(p) };
        }
    });
    if cost.iter().any(|c| c.is_nan()) {
        return Err(Error::Data("NaN in transport cost matrix".into()));
    }
    let (min, max, sum) = cost
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY, 0.0), |(lo, hi, s), &c| (lo.min(c), hi.max(c), s + c));
    let assignment = lap::solve(&cost, n)?;
    // summing in sorted order makes the value independent of which side is A
    let mut matched: Vec<f64> = assignment.iter().enumerate().map(|(i, &j)| cost[i * n + j]).collect();
    matched.sort_by(f64::total_cmp);
    let total: f64 = matched.iter().sum();
    Ok(TransportResult {
        distance: (total / n as f64).powf(1.0 / p),
        assignment,
        cost_stats: CostStats {
            min,
            max,
            mean: sum / (n * n) as f64,
        },
    })
}

/// `count` points drawn with replacement from `samples` (flat, `dim` per
/// point); the equal-count policy for comparing samples of different sizes.
pub fn resample_with_replacement<R: Rng>(samples: &[f64], dim: usize, count: usize, rng: &mut R) -> Vec<f64> {
    let n = samples.len() / dim;
    let mut out = Vec::with_capacity(count * dim);
    for _ in 0..count {
        let j = rng.random_range(0..n);
        out.extend_from_slice(&samples[j * dim..(j + 1) * dim]);
    }
    out
}

/// Linear sum assignment by shortest augmenting paths with dual potentials
/// (Jonker–Volgenant style, one Dijkstra sweep per row).
pub mod lap {
    use crate::error::{Error, Result};

    /// Minimum-cost perfect matching of a dense `n × n` row-major matrix;
    /// returns the column assigned to each row.
    pub fn solve(cost: &[f64], n: usize) -> Result<Vec<usize>> {
        if cost.len() != n * n {
            return Err(Error::domain("cost matrix is not n × n"));
        }
        const NONE: usize = usize::MAX;
        let mut u = vec![0.0; n];
        let mut v = vec![0.0; n];
        let mut shortest = vec![f64::INFINITY; n];
        let mut path = vec![NONE; n];
        let mut col4row = vec![NONE; n];
        let mut row4col = vec![NONE; n];
        let mut visited_rows = vec![false; n];
        let mut visited_cols = vec![false; n];
        let mut remaining: Vec<usize> = Vec::with_capacity(n);

        for cur_row in 0..n {
            remaining.clear();
            remaining.extend((0..n).rev());
            visited_rows.fill(false);
            visited_cols.fill(false);
            shortest.fill(f64::INFINITY);

            let mut min_val = 0.0;
            let mut i = cur_row;
            let sink = loop {
                visited_rows[i] = true;
                let mut lowest = f64::INFINITY;
                let mut index = NONE;
                let row = &cost[i * n..(i + 1) * n];
                for (it, &j) in remaining.iter().enumerate() {
                    let r = min_val + row[j] - u[i] - v[j];
                    if r < shortest[j] {
                        path[j] = i;
                        shortest[j] = r;
                    }
                    if shortest[j] < lowest || (shortest[j] == lowest && row4col[j] == NONE) {
                        lowest = shortest[j];
                        index = it;
                    }
                }
                min_val = lowest;
                if index == NONE || !min_val.is_finite() {
                    return Err(Error::Data("assignment problem is infeasible".into()));
                }
                let j = remaining.swap_remove(index);
                visited_cols[j] = true;
                if row4col[j] == NONE {
                    break j;
                }
                i = row4col[j];
            };

            u[cur_row] += min_val;
            for r in 0..n {
                if visited_rows[r] && r != cur_row {
                    u[r] += min_val - shortest[col4row[r]];
                }
            }
            for c in 0..n {
                if visited_cols[c] {
                    v[c] -= min_val - shortest[c];
                }
            }

            let mut j = sink;
            loop {
                let r = path[j];
                row4col[j] = r;
                std::mem::swap(&mut col4row[r], &mut j);
                if r == cur_row {
                    break;
                }
            }
        }
        Ok(col4row)
    }
}
