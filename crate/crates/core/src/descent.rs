//! Common descent direction: Jacobian acquisition and the min-norm point of
//! the convex hull of the objective gradients.
//!
//! Given gradient rows `g_1..g_m`, the weights `alpha` minimize
//! `|| sum_i alpha_i g_i ||^2` over the probability simplex and the drift is
//! `q = J^T alpha`. Moving along `-q` does not increase any objective to first
//! order, and `q = 0` exactly at first-order Pareto-stationary points.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{checked_evaluate, dot, EvaluationBudget, Problem};

/// Stopping threshold on the Frank-Wolfe duality gap, relative to the
/// largest squared gradient norm (floored at 1).
pub const QP_GAP_TOL: f64 = 1e-10;
pub const QP_MAX_ITER: usize = 10_000;

/// `||q||_2` at or below this counts as a stationary point.
pub const STATIONARY_TOL: f64 = 1e-8;

/// Row-major `m x n` matrix whose row `i` is the gradient of objective `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Jacobian {
    m: usize,
    n: usize,
    data: Vec<f64>,
}

impl Jacobian {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        if m == 0 || n == 0 {
            return Err(Error::invalid("jacobian must be non-empty"));
        }
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("jacobian rows have unequal lengths"));
        }
        Ok(Self {
            m,
            n,
            data: rows.concat(),
        })
    }

    pub fn zeros(m: usize, n: usize) -> Self {
        Self {
            m,
            n,
            data: vec![0.0; m * n],
        }
    }

    pub fn n_obj(&self) -> usize {
        self.m
    }

    pub fn n_var(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.n + j] = value;
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            m: self.m,
            n: self.n,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `J^T alpha`.
    pub fn combine(&self, alpha: &[f64]) -> Vec<f64> {
        let mut q = vec![0.0; self.n];
        for (row, &a) in self.rows().zip(alpha) {
            if a != 0.0 {
                for (qj, gj) in q.iter_mut().zip(row) {
                    *qj += a * gj;
                }
            }
        }
        q
    }

    fn gram(&self) -> Vec<f64> {
        let m = self.m;
        let mut g = vec![0.0; m * m];
        for i in 0..m {
            for j in i..m {
                let v = dot(self.row(i), self.row(j));
                g[i * m + j] = v;
                g[j * m + i] = v;
            }
        }
        g
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexWeights(Vec<f64>);

impl SimplexWeights {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescentDirection {
    pub q: Vec<f64>,
    pub weights: SimplexWeights,
    pub norm_sq: f64,
    /// Frank-Wolfe duality gap at termination (0 for closed-form cases).
    pub duality_gap: f64,
}

impl DescentDirection {
    pub fn norm(&self) -> f64 {
        self.norm_sq.sqrt()
    }

    pub fn is_stationary(&self) -> bool {
        self.norm() <= STATIONARY_TOL
    }

    fn from_weights(jac: &Jacobian, alpha: Vec<f64>, duality_gap: f64) -> Self {
        let q = jac.combine(&alpha);
        let norm_sq = dot(&q, &q);
        Self {
            q,
            weights: SimplexWeights(alpha),
            norm_sq,
            duality_gap,
        }
    }
}

/// Finite-difference step `max(1e-6, 1e-6 * ||x||_inf)`.
pub fn default_fd_step(x: &[f64]) -> f64 {
    let inf = x.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    (1e-6 * inf).max(1e-6)
}

/// Centered finite-difference Jacobian. Charges exactly `2n` evaluations, or
/// none if the budget cannot cover all of them.
pub fn fd_jacobian<P: Problem + ?Sized>(
    problem: &P,
    x: &[f64],
    h: f64,
    budget: &EvaluationBudget,
) -> Result<Jacobian> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid(format!("finite-difference step must be positive, got {h}")));
    }
    let n = x.len();
    let m = problem.n_obj();
    let cost = 2 * n as u64;
    budget.reserve(cost)?;

    let mut jac = Jacobian::zeros(m, n);
    let mut probe = x.to_vec();
    for j in 0..n {
        probe[j] = x[j] + h;
        let plus = checked_evaluate(problem, &probe);
        probe[j] = x[j] - h;
        let minus = plus.and_then(|p| checked_evaluate(problem, &probe).map(|mi| (p, mi)));
        probe[j] = x[j];
        let (plus, minus) = match minus {
            Ok(pair) => pair,
            Err(e) => {
                // Columns j+1.. were never evaluated.
                budget.refund(2 * (n - j - 1) as u64);
                return Err(e);
            }
        };
        for i in 0..m {
            jac.set(i, j, (plus[i] - minus[i]) / (2.0 * h));
        }
    }
    Ok(jac)
}

/// Min-norm point of the convex hull of the rows of `jac`.
///
/// `m = 1` and `m = 2` are solved in closed form. For `m >= 3` pairwise
/// Frank-Wolfe with exact line search runs on the Gram matrix until the
/// duality gap drops below [`QP_GAP_TOL`] or [`QP_MAX_ITER`] iterations pass.
pub fn solve_min_norm(jac: &Jacobian) -> Result<DescentDirection> {
    if !jac.is_finite() {
        return Err(Error::invalid("jacobian has non-finite entries"));
    }
    let m = jac.n_obj();
    if m == 1 {
        return Ok(DescentDirection::from_weights(jac, vec![1.0], 0.0));
    }
    if jac.data.iter().all(|&v| v == 0.0) {
        return Ok(DescentDirection::from_weights(jac, vec![1.0 / m as f64; m], 0.0));
    }
    if m == 2 {
        return Ok(solve_two(jac));
    }
    Ok(solve_pairwise_frank_wolfe(jac))
}

fn solve_two(jac: &Jacobian) -> DescentDirection {
    let (g1, g2) = (jac.row(0), jac.row(1));
    // q(t) = t g1 + (1 - t) g2 = g2 + t (g1 - g2)
    let diff_sq: f64 = g1.iter().zip(g2).map(|(a, b)| (a - b) * (a - b)).sum();
    let t = if diff_sq == 0.0 {
        0.5
    } else {
        let num: f64 = g2.iter().zip(g1).map(|(b, a)| b * (b - a)).sum();
        (num / diff_sq).clamp(0.0, 1.0)
    };
    DescentDirection::from_weights(jac, vec![t, 1.0 - t], 0.0)
}

fn solve_pairwise_frank_wolfe(jac: &Jacobian) -> DescentDirection {
    let m = jac.n_obj();
    let gram = jac.gram();
    let diag = |i: usize| gram[i * m + i];
    let scale = (0..m).map(diag).fold(1.0_f64, f64::max);
    let tol = QP_GAP_TOL * scale;

    // Start at the vertex with the shortest gradient.
    let start = (0..m)
        .min_by(|&a, &b| diag(a).total_cmp(&diag(b)))
        .unwrap();
    let mut alpha = vec![0.0; m];
    alpha[start] = 1.0;
    let mut g_alpha: Vec<f64> = (0..m).map(|i| gram[i * m + start]).collect();

    let mut gap = f64::INFINITY;
    for iter in 0..QP_MAX_ITER {
        if iter % 64 == 63 {
            // Refresh the incrementally updated product.
            for i in 0..m {
                g_alpha[i] = (0..m).map(|k| gram[i * m + k] * alpha[k]).sum();
            }
        }
        let objective: f64 = alpha.iter().zip(&g_alpha).map(|(a, g)| a * g).sum();
        let (toward, &g_min) = g_alpha
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        gap = 2.0 * (objective - g_min);
        if gap <= tol {
            break;
        }
        let away = (0..m)
            .filter(|&i| alpha[i] > 0.0)
            .max_by(|&a, &b| g_alpha[a].total_cmp(&g_alpha[b]))
            .unwrap();
        if away == toward {
            break;
        }
        // Move weight from `away` to `toward` along d = e_toward - e_away.
        let slope = g_alpha[toward] - g_alpha[away];
        let curvature = diag(toward) + diag(away) - 2.0 * gram[toward * m + away];
        let max_step = alpha[away];
        let step = if curvature > 0.0 {
            (-slope / curvature).clamp(0.0, max_step)
        } else {
            max_step
        };
        if step <= 0.0 {
            break;
        }
        alpha[toward] += step;
        if step == max_step {
            alpha[away] = 0.0;
        } else {
            alpha[away] -= step;
        }
        for i in 0..m {
            g_alpha[i] += step * (gram[i * m + toward] - gram[i * m + away]);
        }
    }

    let total: f64 = alpha.iter().sum();
    for a in &mut alpha {
        *a = a.max(0.0) / total;
    }
    DescentDirection::from_weights(jac, alpha, gap.max(0.0))
}

/// Jacobian acquisition followed by [`solve_min_norm`].
///
/// With `use_analytic` set and an analytic Jacobian available no evaluations
/// are charged; otherwise centered differences with step `fd_step` (or
/// [`default_fd_step`]) cost `2n` evaluations.
pub fn descent_direction<P: Problem + ?Sized>(
    problem: &P,
    x: &[f64],
    fd_step: Option<f64>,
    budget: &EvaluationBudget,
    use_analytic: bool,
) -> Result<DescentDirection> {
    let jac = match use_analytic.then(|| problem.analytic_jacobian(x)).flatten() {
        Some(j) => j,
        None => {
            let h = fd_step.unwrap_or_else(|| default_fd_step(x));
            fd_jacobian(problem, x, h, budget)?
        }
    };
    solve_min_norm(&jac)
}
