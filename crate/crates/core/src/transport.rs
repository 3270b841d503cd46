//! Exact optimal transport between finite mixing measures.
//!
//! The `K x K'` transportation problem is solved by the primal transportation
//! simplex (north-west corner start, MODI potentials, Bland's rule for both
//! entering and leaving cells), which is exact up to floating-point rounding
//! and cannot cycle.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::hellinger_mixture;
use crate::mixture::MixingMeasure;
use crate::quadrature::QuadratureSpec;

const REDUCED_COST_TOL: f64 = 1e-12;

/// An optimal coupling and its cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportPlan {
    pub rows: usize,
    pub cols: usize,
    /// Row-major `rows x cols` coupling.
    pub plan: Vec<f64>,
    pub objective: f64,
}

/// Minimizes `sum_ij cost_ij x_ij` subject to row sums `a` and column sums
/// `b`. Both marginals must be non-negative with equal totals (within 1e-9).
pub fn solve_transport(cost: &[f64], a: &[f64], b: &[f64]) -> Result<TransportPlan> {
    let (m, n) = (a.len(), b.len());
    if m == 0 || n == 0 {
        return Err(Error::InvalidParameter("empty marginal".into()));
    }
    if cost.len() != m * n {
        return Err(Error::LengthMismatch(cost.len(), m * n));
    }
    if a.iter().chain(b).any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::InvalidWeights("marginals must be finite and non-negative".into()));
    }
    let (sa, sb) = (a.iter().sum::<f64>(), b.iter().sum::<f64>());
    if (sa - sb).abs() > 1e-9 {
        return Err(Error::InvalidWeights(format!("marginal totals differ: {sa} vs {sb}")));
    }

    let mut x = vec![0.0; m * n];
    let mut basic = vec![false; m * n];
    north_west_corner(a, b, &mut x, &mut basic);

    let max_iter = 50 * (m + n) * (m + n) + 100;
    for _ in 0..max_iter {
        let (u, v) = potentials(cost, &basic, m, n);
        // Bland: first improving cell in index order.
        let entering = (0..m * n).find(|&c| !basic[c] && cost[c] - u[c / n] - v[c % n] < -REDUCED_COST_TOL);
        let Some(enter) = entering else {
            // Pivoting leaves rounding residue of order eps on cells that should be
            // empty; under the 1/r root it would dominate a zero distance.
            let flush = 8.0 * f64::EPSILON * sa.max(1.0);
            x.iter_mut().filter(|v| v.abs() <= flush).for_each(|v| *v = 0.0);
            let objective = x.iter().zip(cost).map(|(x, c)| x * c).sum();
            return Ok(TransportPlan {
                rows: m,
                cols: n,
                plan: x,
                objective,
            });
        };
        let cycle = basis_cycle(&basic, m, n, enter);
        // Odd positions of the cycle lose flow; the leaving cell is the
        // smallest such flow, ties going to the lowest cell index.
        let leave = cycle
            .iter()
            .skip(1)
            .step_by(2)
            .copied()
            .min_by(|&p, &q| x[p].total_cmp(&x[q]).then(p.cmp(&q)))
            .expect("cycle has at least four cells");
        let theta = x[leave];
        for (pos, &c) in cycle.iter().enumerate() {
            if pos % 2 == 0 {
                x[c] += theta;
            } else {
                x[c] = (x[c] - theta).max(0.0);
            }
        }
        x[leave] = 0.0;
        basic[leave] = false;
        basic[enter] = true;
    }
    Err(Error::SolverStalled(max_iter))
}

fn north_west_corner(a: &[f64], b: &[f64], x: &mut [f64], basic: &mut [bool]) {
    let (m, n) = (a.len(), b.len());
    let mut supply = a.to_vec();
    let mut demand = b.to_vec();
    let (mut i, mut j) = (0, 0);
    // Exactly m + n - 1 basic cells, some possibly degenerate at zero.
    loop {
        let q = supply[i].min(demand[j]).max(0.0);
        x[i * n + j] = q;
        basic[i * n + j] = true;
        supply[i] -= q;
        demand[j] -= q;
        if i == m - 1 && j == n - 1 {
            break;
        }
        if j == n - 1 || (i < m - 1 && supply[i] <= demand[j]) {
            i += 1;
        } else {
            j += 1;
        }
    }
}

/// Dual potentials with `u[0] = 0`, solved over the spanning tree of basic cells.
fn potentials(cost: &[f64], basic: &[bool], m: usize, n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut u = vec![f64::NAN; m];
    let mut v = vec![f64::NAN; n];
    u[0] = 0.0;
    let mut stack = vec![(true, 0usize)];
    while let Some((is_row, k)) = stack.pop() {
        if is_row {
            for j in 0..n {
                if basic[k * n + j] && v[j].is_nan() {
                    v[j] = cost[k * n + j] - u[k];
                    stack.push((false, j));
                }
            }
        } else {
            for i in 0..m {
                if basic[i * n + k] && u[i].is_nan() {
                    u[i] = cost[i * n + k] - v[k];
                    stack.push((true, i));
                }
            }
        }
    }
    (u, v)
}

/// The unique cycle formed by adding `enter` to the basis tree, starting at
/// `enter` and alternating row/column moves.
fn basis_cycle(basic: &[bool], m: usize, n: usize, enter: usize) -> Vec<usize> {
    let (ei, ej) = (enter / n, enter % n);
    // Tree nodes: rows 0..m, columns m..m+n. Search from column ej to row ei.
    let nodes = m + n;
    let mut prev = vec![usize::MAX; nodes];
    let start = m + ej;
    prev[start] = start;
    let mut queue = std::collections::VecDeque::from([start]);
    while let Some(node) = queue.pop_front() {
        if node == ei {
            break;
        }
        let neighbors: Vec<usize> = if node < m {
            (0..n).filter(|&j| basic[node * n + j]).map(|j| m + j).collect()
        } else {
            let j = node - m;
            (0..m).filter(|&i| basic[i * n + j]).collect()
        };
        for nb in neighbors {
            if prev[nb] == usize::MAX {
                prev[nb] = node;
                queue.push_back(nb);
            }
        }
    }
    // Walk back from row ei to column ej, emitting cells.
    let mut cycle = vec![enter];
    let mut node = ei;
    while node != start {
        let p = prev[node];
        let cell = if node < m { node * n + (p - m) } else { p * n + (node - m) };
        cycle.push(cell);
        node = p;
    }
    cycle
}

/// Matrix of ground costs `rho(gamma_i, gamma'_j)^r` between the atoms.
pub fn cost_matrix(p: &MixingMeasure, q: &MixingMeasure, r: f64, quad: &QuadratureSpec) -> Result<Vec<f64>> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            found: q.dim(),
        });
    }
    let mut cost = Vec::with_capacity(p.len() * q.len());
    for a in p.atoms() {
        for b in q.atoms() {
            let rho = if a == b { 0.0 } else { hellinger_mixture(a, b, quad)?.value };
            cost.push(rho.powf(r));
        }
    }
    Ok(cost)
}

/// `W_r` between two mixing measures with Hellinger ground metric.
pub fn wasserstein(p: &MixingMeasure, q: &MixingMeasure, r: f64, quad: &QuadratureSpec) -> Result<f64> {
    if !(r >= 1.0 && r.is_finite()) {
        return Err(Error::InvalidParameter(format!("r must be a finite value >= 1, got {r}")));
    }
    let cost = cost_matrix(p, q, r, quad)?;
    let plan = solve_transport(&cost, p.weights(), q.weights())?;
    Ok(plan.objective.max(0.0).powf(1.0 / r))
}
