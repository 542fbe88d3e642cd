//! Dense primal active-set solver for strictly convex quadratic programs
//!
//! ```text
//! minimize   ½ UᵀHU + UᵀG
//! subject to A_ineq U ≤ b_ineq
//! ```
//!
//! The method maintains a working set of active constraints, solving one
//! equality-constrained subproblem per iteration through a Cholesky
//! factorization of `H` and a Schur complement on the active rows. A
//! feasible starting point is found by trying the unconstrained minimizer,
//! a caller hint, and the origin before falling back to a slack-variable
//! phase-1 run of the same algorithm. Working sets persist across solves in
//! [`ActiveSetQp`], which makes sequences of similar problems (the MPC loop)
//! converge in one or two iterations.
//!
//! Every solution reported as [`QpStatus::Optimal`] has been re-verified by
//! [`check_kkt`], which recomputes all residuals from the problem data.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 200;

/// Step directions smaller than this (relative to the iterate scale) are
/// treated as stationary.
const DIRECTION_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum QpError {
    #[error("H is not positive definite")]
    NotPositiveDefinite,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("problem data contains non-finite entries")]
    NonFinite,
}

/// Dense QP data. `H` is symmetrized on ingestion; callers may assume
/// `‖H - Hᵀ‖ = 0` afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub h: DMatrix<f64>,
    pub g: DVector<f64>,
    pub a_ineq: DMatrix<f64>,
    pub b_ineq: DVector<f64>,
}

impl QpProblem {
    pub fn new(
        h: DMatrix<f64>,
        g: DVector<f64>,
        a_ineq: DMatrix<f64>,
        b_ineq: DVector<f64>,
    ) -> Result<Self, QpError> {
        let n = h.nrows();
        if h.ncols() != n || g.len() != n {
            return Err(QpError::DimensionMismatch(format!(
                "H is {}x{}, G has length {}",
                h.nrows(),
                h.ncols(),
                g.len()
            )));
        }
        if a_ineq.nrows() != b_ineq.len() || (a_ineq.nrows() > 0 && a_ineq.ncols() != n) {
            return Err(QpError::DimensionMismatch(format!(
                "A_ineq is {}x{}, b_ineq has length {}, n = {}",
                a_ineq.nrows(),
                a_ineq.ncols(),
                b_ineq.len(),
                n
            )));
        }
        let finite = h.iter().all(|v| v.is_finite())
            && g.iter().all(|v| v.is_finite())
            && a_ineq.iter().all(|v| v.is_finite())
            && b_ineq.iter().all(|v| v.is_finite());
        if !finite {
            return Err(QpError::NonFinite);
        }
        let h = (&h + h.transpose()) * 0.5;
        Ok(QpProblem { h, g, a_ineq, b_ineq })
    }

    pub fn unconstrained(h: DMatrix<f64>, g: DVector<f64>) -> Result<Self, QpError> {
        let n = h.nrows();
        Self::new(h, g, DMatrix::zeros(0, n), DVector::zeros(0))
    }

    pub fn n_vars(&self) -> usize {
        self.h.nrows()
    }

    pub fn n_constraints(&self) -> usize {
        self.a_ineq.nrows()
    }

    pub fn objective(&self, u: &DVector<f64>) -> f64 {
        0.5 * (u.transpose() * &self.h * u)[(0, 0)] + self.g.dot(u)
    }

    /// Largest constraint violation at `u` (0 when feasible).
    pub fn max_violation(&self, u: &DVector<f64>) -> f64 {
        if self.n_constraints() == 0 {
            return 0.0;
        }
        (&self.a_ineq * u - &self.b_ineq).max().max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QpStatus {
    Optimal,
    MaxIterations,
    Infeasible,
}

/// Residuals of the KKT system, all recomputed from problem data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktResiduals {
    /// `‖HU + G + A_ineqᵀλ‖_∞`
    pub stationarity: f64,
    /// `max(A_ineq U - b_ineq)₊`
    pub primal: f64,
    /// `|λᵀ(A_ineq U - b_ineq)|`
    pub complementarity: f64,
    /// `max(-λ)₊` — dual feasibility defect
    pub dual: f64,
}

impl KktResiduals {
    pub fn within(&self, tol: f64) -> bool {
        self.stationarity <= tol
            && self.primal <= tol
            && self.complementarity <= tol
            && self.dual <= tol
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub u: DVector<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub status: QpStatus,
    pub kkt: KktResiduals,
    /// Multipliers for all constraints; zero off the active set.
    pub lambda: DVector<f64>,
    /// Indices active at the solution, in working-set order.
    pub active_set: Vec<usize>,
}

/// Independent KKT checker. Deliberately recomputes every residual from
/// `(H, G, A, b, U, λ)` so solver bookkeeping cannot vouch for itself.
pub fn check_kkt(qp: &QpProblem, u: &DVector<f64>, lambda: &DVector<f64>) -> KktResiduals {
    let stationarity = if qp.n_constraints() > 0 {
        (&qp.h * u + &qp.g + qp.a_ineq.transpose() * lambda).amax()
    } else {
        (&qp.h * u + &qp.g).amax()
    };
    let (primal, complementarity) = if qp.n_constraints() > 0 {
        let slack = &qp.a_ineq * u - &qp.b_ineq;
        (slack.max().max(0.0), lambda.dot(&slack).abs())
    } else {
        (0.0, 0.0)
    };
    let dual = if lambda.len() > 0 {
        (-lambda.min()).max(0.0)
    } else {
        0.0
    };
    KktResiduals {
        stationarity,
        primal,
        complementarity,
        dual,
    }
}

/// Solve `HU = -G` for positive definite `H`.
pub fn solve_unconstrained(h: &DMatrix<f64>, g: &DVector<f64>) -> Result<DVector<f64>, QpError> {
    let chol = Cholesky::new(h.clone()).ok_or(QpError::NotPositiveDefinite)?;
    Ok(chol.solve(&(-g)))
}

/// One-shot cold solve.
pub fn solve(qp: &QpProblem, tol: f64, max_iter: usize) -> Result<QpSolution, QpError> {
    ActiveSetQp::new(tol, max_iter).solve(qp)
}

/// Active-set solver instance carrying warm-start state. Single-owner by
/// construction; distinct instances never interfere.
#[derive(Debug, Clone)]
pub struct ActiveSetQp {
    pub tol: f64,
    pub max_iter: usize,
    warm_active: Vec<usize>,
}

impl ActiveSetQp {
    pub fn new(tol: f64, max_iter: usize) -> Self {
        assert!(tol > 0.0, "tolerance must be positive");
        ActiveSetQp {
            tol,
            max_iter,
            warm_active: Vec::new(),
        }
    }

    pub fn with_defaults() -> Self {
        Self::new(DEFAULT_TOL, DEFAULT_MAX_ITER)
    }

    /// Drop warm-start state.
    pub fn reset(&mut self) {
        self.warm_active.clear();
    }

    /// Solve, seeding the working set from the previous call when the
    /// constraint geometry allows it.
    pub fn solve(&mut self, qp: &QpProblem) -> Result<QpSolution, QpError> {
        self.solve_with_hint(qp, None)
    }

    /// Solve with an optional starting-point hint (used when feasible).
    pub fn solve_with_hint(
        &mut self,
        qp: &QpProblem,
        hint: Option<&DVector<f64>>,
    ) -> Result<QpSolution, QpError> {
        let chol = Cholesky::new(qp.h.clone()).ok_or(QpError::NotPositiveDefinite)?;
        let n_c = qp.n_constraints();

        // Unconstrained fast path: if the free minimizer is feasible it is
        // globally optimal.
        let u_free = chol.solve(&(-&qp.g));
        if qp.max_violation(&u_free) <= self.tol {
            let lambda = DVector::zeros(n_c);
            let kkt = check_kkt(qp, &u_free, &lambda);
            self.warm_active.clear();
            return Ok(QpSolution {
                objective: qp.objective(&u_free),
                u: u_free,
                iterations: 0,
                status: if kkt.within(self.tol) {
                    QpStatus::Optimal
                } else {
                    QpStatus::MaxIterations
                },
                kkt,
                lambda,
                active_set: Vec::new(),
            })
        }

        // Warm start: equality-solve on the previous active set and keep the
        // point if it is feasible.
        self.warm_active.retain(|&i| i < n_c);
        let mut start: Option<(DVector<f64>, Vec<usize>)> = None;
        if !self.warm_active.is_empty() {
            if let Some(x) = eqp_on_set(qp, &chol, &self.warm_active) {
                if qp.max_violation(&x) <= self.tol {
                    start = Some((x, self.warm_active.clone()));
                }
            }
        }
        if start.is_none() {
            if let Some(h) = hint {
                if h.len() == qp.n_vars() && qp.max_violation(h) <= self.tol {
                    start = Some((h.clone(), Vec::new()));
                }
            }
        }
        if start.is_none() {
            let origin = DVector::zeros(qp.n_vars());
            if qp.max_violation(&origin) <= self.tol {
                start = Some((origin, Vec::new()));
            }
        }
        if start.is_none() {
            match find_feasible_point(qp, self.tol, self.max_iter) {
                Some(x) => start = Some((x, Vec::new())),
                None => {
                    // Keep the certificate-style outcome: no feasible point
                    // exists within tolerance.
                    self.warm_active.clear();
                    let u = DVector::zeros(qp.n_vars());
                    let lambda = DVector::zeros(n_c);
                    let kkt = check_kkt(qp, &u, &lambda);
                    return Ok(QpSolution {
                        objective: qp.objective(&u),
                        u,
                        iterations: 0,
                        status: QpStatus::Infeasible,
                        kkt,
                        lambda,
                        active_set: Vec::new(),
                    });
                }
            }
        }

        let (x0, w0) = start.unwrap();
        let mut sol = active_set_loop(qp, &chol, x0, w0, self.tol, self.max_iter);

        // Independent verification before reporting optimality.
        if sol.status == QpStatus::Optimal && !sol.kkt.within(self.tol) {
            sol.status = QpStatus::MaxIterations;
        }
        self.warm_active = sol.active_set.clone();
        Ok(sol)
    }
}

/// Equality-constrained solve: minimize the QP objective subject to
/// `a_iᵀx = b_i` for `i ∈ set`. Returns `None` when the active rows are
/// numerically dependent.
fn eqp_on_set(qp: &QpProblem, chol: &Cholesky<f64, Dyn>, set: &[usize]) -> Option<DVector<f64>> {
    if set.is_empty() {
        return Some(chol.solve(&(-&qp.g)));
    }
    let m = set.len();
    let n = qp.n_vars();
    let mut a_w_t = DMatrix::zeros(n, m);
    let mut b_w = DVector::zeros(m);
    for (k, &i) in set.iter().enumerate() {
        a_w_t.column_mut(k).copy_from(&qp.a_ineq.row(i).transpose());
        b_w[k] = qp.b_ineq[i];
    }
    let t = chol.solve(&a_w_t);
    let s = a_w_t.transpose() * &t;
    let s_chol = Cholesky::new(s)?;
    let h_inv_g = chol.solve(&qp.g);
    let rhs = -(&b_w + a_w_t.transpose() * &h_inv_g);
    let lambda = s_chol.solve(&rhs);
    Some(-(h_inv_g + t * lambda))
}

/// Phase-1: find a feasible point by minimizing slack violations
/// `min ε/2‖x‖² + ½‖s‖²  s.t.  Ax - s ≤ b`, which has the trivially feasible
/// start `x = 0, s_i = max(-b_i, 0)`. The ε regularizer biases the result
/// but shrinks the residual violation with it, so it is reduced until the
/// point is feasible to tolerance or the violation stops improving.
fn find_feasible_point(qp: &QpProblem, tol: f64, max_iter: usize) -> Option<DVector<f64>> {
    let n = qp.n_vars();
    let n_c = qp.n_constraints();
    let mut best: Option<(f64, DVector<f64>)> = None;

    for &eps in &[1e-6, 1e-10, 1e-13] {
        let mut h_aug = DMatrix::zeros(n + n_c, n + n_c);
        for i in 0..n {
            h_aug[(i, i)] = eps;
        }
        for i in 0..n_c {
            h_aug[(n + i, n + i)] = 1.0;
        }
        let mut a_aug = DMatrix::zeros(n_c, n + n_c);
        a_aug.view_mut((0, 0), (n_c, n)).copy_from(&qp.a_ineq);
        for i in 0..n_c {
            a_aug[(i, n + i)] = -1.0;
        }
        let aug = QpProblem {
            h: h_aug,
            g: DVector::zeros(n + n_c),
            a_ineq: a_aug,
            b_ineq: qp.b_ineq.clone(),
        };

        let mut x0 = DVector::zeros(n + n_c);
        let mut w0 = Vec::new();
        for i in 0..n_c {
            if qp.b_ineq[i] <= 0.0 {
                x0[n + i] = -qp.b_ineq[i];
                w0.push(i);
            }
        }
        let chol = Cholesky::new(aug.h.clone())?;
        let sol = active_set_loop(&aug, &chol, x0, w0, tol, max_iter.max(4 * n_c));
        let x = sol.u.rows(0, n).into_owned();
        let violation = qp.max_violation(&x);
        if violation <= tol {
            return Some(x);
        }
        match &best {
            Some((v, _)) if violation >= 0.5 * v => {
                // Shrinking ε no longer helps: genuine infeasibility.
                return None;
            }
            _ => best = Some((violation, x)),
        }
    }
    None
}

/// Primal active-set iteration from a feasible point `x` with working set
/// `w` (constraints active at `x`, linearly independent).
fn active_set_loop(
    qp: &QpProblem,
    chol: &Cholesky<f64, Dyn>,
    mut x: DVector<f64>,
    mut w: Vec<usize>,
    tol: f64,
    max_iter: usize,
) -> QpSolution {
    let n_c = qp.n_constraints();
    let mut iterations = 0;
    let mut status = QpStatus::MaxIterations;
    let mut lambda_full = DVector::zeros(n_c);
    #[cfg(debug_assertions)]
    let mut prev_objective = qp.objective(&x);

    while iterations < max_iter {
        iterations += 1;

        // Equality-constrained step on the working set.
        let (d, lambda_w) = match eqp_step(qp, chol, &x, &w) {
            Some(dl) => dl,
            None => {
                // Dependent working set; drop the most recent addition.
                w.pop();
                continue;
            }
        };

        let stationary = d.amax() <= DIRECTION_TOL * (1.0 + x.amax());
        if stationary {
            lambda_full.fill(0.0);
            for (k, &i) in w.iter().enumerate() {
                lambda_full[i] = lambda_w[k];
            }
            let (min_lambda, min_pos) = lambda_w
                .iter()
                .enumerate()
                .map(|(k, &l)| (l, k))
                .fold((f64::INFINITY, usize::MAX), |acc, (l, k)| {
                    if l < acc.0 {
                        (l, k)
                    } else {
                        acc
                    }
                });
            if w.is_empty() || min_lambda >= -tol {
                status = QpStatus::Optimal;
                break;
            }
            w.remove(min_pos);
            continue;
        }

        // Ratio test against constraints outside the working set.
        let mut alpha = 1.0;
        let mut blocker = None;
        for i in 0..n_c {
            if w.contains(&i) {
                continue;
            }
            let a_row = qp.a_ineq.row(i);
            let s = (a_row * &d)[(0, 0)];
            if s > 1e-12 * (1.0 + d.amax()) {
                let slack = qp.b_ineq[i] - (a_row * &x)[(0, 0)];
                let ratio = (slack / s).max(0.0);
                if ratio < alpha {
                    alpha = ratio;
                    blocker = Some(i);
                }
            }
        }

        x += alpha * &d;
        if let Some(i) = blocker {
            w.push(i);
        }

        #[cfg(debug_assertions)]
        {
            let obj = qp.objective(&x);
            debug_assert!(
                obj <= prev_objective + 1e-9 * (1.0 + prev_objective.abs()),
                "active-set objective must not increase: {prev_objective} -> {obj}"
            );
            prev_objective = obj;
        }
    }

    let kkt = check_kkt(qp, &x, &lambda_full);
    QpSolution {
        objective: qp.objective(&x),
        u: x,
        iterations,
        status,
        kkt,
        lambda: lambda_full,
        active_set: w,
    }
}

/// KKT step at `x`: direction `d` with `A_W d = 0` and the working-set
/// multipliers. `None` when the Schur complement is not positive definite
/// (dependent active rows).
fn eqp_step(
    qp: &QpProblem,
    chol: &Cholesky<f64, Dyn>,
    x: &DVector<f64>,
    w: &[usize],
) -> Option<(DVector<f64>, DVector<f64>)> {
    let grad = &qp.h * x + &qp.g;
    let h_inv_grad = chol.solve(&grad);
    if w.is_empty() {
        return Some((-h_inv_grad, DVector::zeros(0)));
    }
    let n = qp.n_vars();
    let m = w.len();
    let mut a_w_t = DMatrix::zeros(n, m);
    for (k, &i) in w.iter().enumerate() {
        a_w_t.column_mut(k).copy_from(&qp.a_ineq.row(i).transpose());
    }
    let t = chol.solve(&a_w_t);
    let s = a_w_t.transpose() * &t;
    let s_chol = Cholesky::new(s)?;
    let lambda = s_chol.solve(&(-(a_w_t.transpose() * &h_inv_grad)));
    let d = -(&h_inv_grad + &t * &lambda);
    Some((d, lambda))
}

// --- debug dump --------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct DumpMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct QpDump {
    h: DumpMatrix,
    g: Vec<f64>,
    a_ineq: DumpMatrix,
    b_ineq: Vec<f64>,
    solution: Option<Vec<f64>>,
    status: Option<QpStatus>,
}

fn dump_matrix(m: &DMatrix<f64>) -> DumpMatrix {
    DumpMatrix {
        rows: m.nrows(),
        cols: m.ncols(),
        data: m.transpose().as_slice().to_vec(), // row-major
    }
}

/// Serialize a problem (and optionally its solution) for failure reproduction.
pub fn dump_problem(qp: &QpProblem, solution: Option<&QpSolution>) -> String {
    let dump = QpDump {
        h: dump_matrix(&qp.h),
        g: qp.g.as_slice().to_vec(),
        a_ineq: dump_matrix(&qp.a_ineq),
        b_ineq: qp.b_ineq.as_slice().to_vec(),
        solution: solution.map(|s| s.u.as_slice().to_vec()),
        status: solution.map(|s| s.status),
    };
    serde_json::to_string_pretty(&dump).expect("dump serializes")
}

/// Parse a problem produced by [`dump_problem`].
pub fn load_problem(text: &str) -> Result<QpProblem, QpError> {
    let dump: QpDump = serde_json::from_str(text)
        .map_err(|e| QpError::DimensionMismatch(format!("bad dump: {e}")))?;
    QpProblem::new(
        DMatrix::from_row_slice(dump.h.rows, dump.h.cols, &dump.h.data),
        DVector::from_row_slice(&dump.g),
        DMatrix::from_row_slice(dump.a_ineq.rows, dump.a_ineq.cols, &dump.a_ineq.data),
        DVector::from_row_slice(&dump.b_ineq),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_spd(rng: &mut StdRng, n: usize) -> DMatrix<f64> {
        let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        &m * m.transpose() + DMatrix::identity(n, n) * (0.1 + rng.random_range(0.0..1.0))
    }

    /// Box constraints l ≤ x ≤ u as stacked inequality rows.
    fn box_rows(l: &[f64], u: &[f64]) -> (DMatrix<f64>, DVector<f64>) {
        let n = l.len();
        let mut a = DMatrix::zeros(2 * n, n);
        let mut b = DVector::zeros(2 * n);
        for i in 0..n {
            a[(i, i)] = 1.0;
            b[i] = u[i];
            a[(n + i, i)] = -1.0;
            b[n + i] = -l[i];
        }
        (a, b)
    }

    /// Exhaustive oracle for strictly convex box QPs: enumerate all 3ⁿ
    /// lower/upper/free patterns, solve the free block, and keep the
    /// candidate that is primal and dual feasible.
    fn brute_force_box(
        h: &DMatrix<f64>,
        g: &DVector<f64>,
        l: &[f64],
        u: &[f64],
    ) -> Option<DVector<f64>> {
        let n = g.len();
        let mut pattern = vec![0u8; n];
        let total = 3usize.pow(n as u32);
        for code in 0..total {
            let mut c = code;
            for p in pattern.iter_mut() {
                *p = (c % 3) as u8;
                c /= 3;
            }
            let free: Vec<usize> = (0..n).filter(|&i| pattern[i] == 0).collect();
            let mut x = DVector::zeros(n);
            for i in 0..n {
                x[i] = match pattern[i] {
                    1 => l[i],
                    2 => u[i],
                    _ => 0.0,
                };
            }
            if !free.is_empty() {
                let nf = free.len();
                let mut hff = DMatrix::zeros(nf, nf);
                let mut rhs = DVector::zeros(nf);
                for (a, &i) in free.iter().enumerate() {
                    rhs[a] = -g[i];
                    for (bb, &j) in free.iter().enumerate() {
                        hff[(a, bb)] = h[(i, j)];
                    }
                    for j in 0..n {
                        if pattern[j] != 0 {
                            rhs[a] -= h[(i, j)] * x[j];
                        }
                    }
                }
                let xf = Cholesky::new(hff)?.solve(&rhs);
                for (a, &i) in free.iter().enumerate() {
                    x[i] = xf[a];
                }
            }
            // Primal feasibility of the free block.
            if free
                .iter()
                .any(|&i| x[i] < l[i] - 1e-9 || x[i] > u[i] + 1e-9)
            {
                continue;
            }
            // Dual feasibility of the fixed block.
            let grad = h * &x + g;
            let dual_ok = (0..n).all(|i| match pattern[i] {
                1 => grad[i] >= -1e-9,
                2 => grad[i] <= 1e-9,
                _ => true,
            });
            if dual_ok {
                return Some(x);
            }
        }
        None
    }

    #[test]
    fn unconstrained_minimum() {
        let qp = QpProblem::unconstrained(
            DMatrix::identity(2, 2),
            DVector::from_row_slice(&[-1.0, -1.0]),
        )
        .unwrap();
        let sol = solve(&qp, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert_relative_eq!(sol.u, DVector::from_row_slice(&[1.0, 1.0]), epsilon = 1e-10);
        assert_relative_eq!(sol.objective, -1.0, epsilon = 1e-12);
    }

    #[test]
    fn diagonal_unconstrained_solve() {
        // HU = -G with H = 2I, G = (-2, -4): U = (1, 2).
        let h = DMatrix::identity(2, 2) * 2.0;
        let g = DVector::from_row_slice(&[-2.0, -4.0]);
        let u = solve_unconstrained(&h, &g).unwrap();
        assert_relative_eq!(u, DVector::from_row_slice(&[1.0, 2.0]), epsilon = 1e-12);

        let err = solve_unconstrained(&(-DMatrix::identity(2, 2)), &g).unwrap_err();
        assert!(matches!(err, QpError::NotPositiveDefinite));
    }

    #[test]
    fn residual_of_unconstrained_solution_vanishes() {
        let mut rng = StdRng::seed_from_u64(1);
        for _ in 0..20 {
            let n = rng.random_range(2..8);
            let h = random_spd(&mut rng, n);
            let g = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
            let u = solve_unconstrained(&h, &g).unwrap();
            assert!((h * &u + &g).amax() <= 1e-10);
        }
    }

    #[test]
    fn halfspace_projection_requires_phase1() {
        // min ½‖U‖² s.t. U₁ ≤ -1: the origin is infeasible, so the solver
        // must find a feasible point first. Optimum is (-1, 0).
        let mut a = DMatrix::zeros(1, 2);
        a[(0, 0)] = 1.0;
        let qp = QpProblem::new(
            DMatrix::identity(2, 2),
            DVector::zeros(2),
            a,
            DVector::from_row_slice(&[-1.0]),
        )
        .unwrap();
        let sol = solve(&qp, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert_relative_eq!(sol.u, DVector::from_row_slice(&[-1.0, 0.0]), epsilon = 1e-7);
        assert!(sol.kkt.within(DEFAULT_TOL));
    }

    #[test]
    fn infeasible_constraints_are_detected() {
        // x ≤ -1 and x ≥ 2 cannot both hold.
        let a = DMatrix::from_row_slice(2, 1, &[1.0, -1.0]);
        let b = DVector::from_row_slice(&[-1.0, -2.0]);
        let qp = QpProblem::new(DMatrix::identity(1, 1), DVector::zeros(1), a, b).unwrap();
        let sol = solve(&qp, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(sol.status, QpStatus::Infeasible);
    }

    #[test]
    fn matches_brute_force_on_random_boxes() {
        let mut rng = StdRng::seed_from_u64(2);
        for trial in 0..200 {
            let n = rng.random_range(2..=6);
            let h = random_spd(&mut rng, n);
            let g = DVector::from_fn(n, |_, _| rng.random_range(-3.0..3.0));
            let l: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..-0.1)).collect();
            let u: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..2.0)).collect();
            let (a, b) = box_rows(&l, &u);
            let qp = QpProblem::new(h.clone(), g.clone(), a, b).unwrap();
            let sol = solve(&qp, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
            assert_eq!(sol.status, QpStatus::Optimal, "trial {trial}");
            assert!(sol.kkt.within(DEFAULT_TOL), "trial {trial}: {:?}", sol.kkt);
            let oracle = brute_force_box(&h, &g, &l, &u).expect("oracle finds optimum");
            assert!(
                (&sol.u - &oracle).norm() <= 1e-6,
                "trial {trial}: solver {:?} oracle {:?}",
                sol.u,
                oracle
            );
        }
    }

    #[test]
    fn inactive_constraints_match_unconstrained() {
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..20 {
            let n = rng.random_range(2..=5);
            let h = random_spd(&mut rng, n);
            let g = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            let free = solve_unconstrained(&h, &g).unwrap();
            // Box far outside the unconstrained optimum.
            let l: Vec<f64> = (0..n).map(|i| free[i] - 50.0).collect();
            let u: Vec<f64> = (0..n).map(|i| free[i] + 50.0).collect();
            let (a, b) = box_rows(&l, &u);
            let qp = QpProblem::new(h, g, a, b).unwrap();
            let sol = solve(&qp, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
            assert_eq!(sol.status, QpStatus::Optimal);
            assert!((&sol.u - &free).norm() <= DEFAULT_TOL);
        }
    }

    #[test]
    fn row_scaling_leaves_solution_unchanged() {
        let mut rng = StdRng::seed_from_u64(4);
        let n = 4;
        let h = random_spd(&mut rng, n);
        let g = DVector::from_fn(n, |_, _| rng.random_range(-3.0..3.0));
        let (a, b) = box_rows(&[-0.5; 4], &[0.5; 4]);
        let qp = QpProblem::new(h.clone(), g.clone(), a.clone(), b.clone()).unwrap();
        let base = solve(&qp, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();

        let mut a_scaled = a;
        let mut b_scaled = b;
        for i in 0..a_scaled.nrows() {
            let alpha = 1.0 + i as f64 * 3.7;
            for j in 0..n {
                a_scaled[(i, j)] *= alpha;
            }
            b_scaled[i] *= alpha;
        }
        let qp_scaled = QpProblem::new(h, g, a_scaled, b_scaled).unwrap();
        let scaled = solve(&qp_scaled, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert!((&base.u - &scaled.u).norm() <= 1e-7);
    }

    #[test]
    fn solver_is_deterministic() {
        let mut rng = StdRng::seed_from_u64(5);
        let h = random_spd(&mut rng, 5);
        let g = DVector::from_fn(5, |_, _| rng.random_range(-3.0..3.0));
        let (a, b) = box_rows(&[-0.3; 5], &[0.4; 5]);
        let qp = QpProblem::new(h, g, a, b).unwrap();
        let s1 = solve(&qp, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        let s2 = solve(&qp, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(s1.u, s2.u);
        assert_eq!(s1.iterations, s2.iterations);
    }

    #[test]
    fn warm_start_replays_in_fewer_iterations() {
        let mut rng = StdRng::seed_from_u64(6);
        let n = 6;
        let h = random_spd(&mut rng, n);
        let (a, b) = box_rows(&[-0.2; 6], &[0.2; 6]);
        let g0 = DVector::from_fn(n, |_, _| rng.random_range(-4.0..4.0));
        let qp0 = QpProblem::new(h.clone(), g0.clone(), a.clone(), b.clone()).unwrap();

        let mut warm = ActiveSetQp::with_defaults();
        let cold_sol = warm.solve(&qp0).unwrap();
        assert_eq!(cold_sol.status, QpStatus::Optimal);

        // Slightly perturbed problem with the same active geometry.
        let g1 = &g0 + DVector::from_fn(n, |_, _| rng.random_range(-1e-3..1e-3));
        let qp1 = QpProblem::new(h.clone(), g1.clone(), a.clone(), b.clone()).unwrap();
        let warm_sol = warm.solve(&qp1).unwrap();
        assert_eq!(warm_sol.status, QpStatus::Optimal);

        let mut fresh = ActiveSetQp::with_defaults();
        let cold_again = fresh.solve(&qp1).unwrap();
        assert!((&warm_sol.u - &cold_again.u).norm() <= 1e-7);
        assert!(warm_sol.iterations <= cold_again.iterations);
    }

    #[test]
    fn saturated_solution_sits_on_the_bound() {
        // Strong pull toward +x with a tight upper bound: the optimizer must
        // stop exactly at the boundary.
        let h = DMatrix::identity(2, 2);
        let g = DVector::from_row_slice(&[-10.0, 0.0]);
        let (a, b) = box_rows(&[-1.0, -1.0], &[0.25, 1.0]);
        let qp = QpProblem::new(h, g, a, b).unwrap();
        let sol = solve(&qp, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert_relative_eq!(sol.u[0], 0.25, epsilon = 1e-9);
        assert!(sol.lambda.iter().any(|&l| l > 1.0));
    }

    #[test]
    fn dump_roundtrip() {
        let qp = QpProblem::new(
            DMatrix::identity(2, 2),
            DVector::from_row_slice(&[1.0, -2.0]),
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            DVector::from_row_slice(&[0.5]),
        )
        .unwrap();
        let sol = solve(&qp, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        let text = dump_problem(&qp, Some(&sol));
        let back = load_problem(&text).unwrap();
        assert_eq!(back, qp);
    }

    #[test]
    fn ingestion_symmetrizes_h() {
        let h = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.1, 2.0]);
        let qp = QpProblem::unconstrained(h, DVector::zeros(2)).unwrap();
        assert_eq!(qp.h[(0, 1)], qp.h[(1, 0)]);
        assert_relative_eq!(qp.h[(0, 1)], 0.2, epsilon = 1e-15);
    }

    #[test]
    fn rejects_bad_dimensions_and_nonfinite() {
        let h = DMatrix::identity(2, 2);
        assert!(QpProblem::new(
            h.clone(),
            DVector::zeros(3),
            DMatrix::zeros(0, 2),
            DVector::zeros(0)
        )
        .is_err());
        let mut g = DVector::zeros(2);
        g[0] = f64::NAN;
        assert!(matches!(
            QpProblem::unconstrained(h, g),
            Err(QpError::NonFinite)
        ));
    }
}
