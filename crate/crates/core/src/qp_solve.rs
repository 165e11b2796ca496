//! Dense operator-splitting QP solver.
//!
//! Solves `min x^T Q x + q^T x + c` subject to `A_eq x = b_eq` and
//! `l <= A_ie x <= u` with an ADMM iteration on the stacked form
//! `l <= A x <= u`, Ruiz equilibration, adaptive penalty, a primal
//! infeasibility certificate and an active-set polish.

use std::fmt;

use thiserror::Error;

use crate::linalg::{dot, Cholesky, Lu, Matrix};
use crate::qp_build::{QpProblem, RowOrigin};
use crate::scalar::norm_inf;
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("problem data contains non-finite values")]
    NonFinite,
    #[error("objective is not convex")]
    NotConvex,
    #[error("invalid solver setting: {0}")]
    BadConfig(&'static str),
    #[error("row {0} has lower bound above upper bound")]
    InvertedBounds(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig<T> {
    pub eps_abs: T,
    pub eps_rel: T,
    pub eps_infeasible: T,
    pub max_iter: usize,
    pub rho: T,
    pub sigma: T,
    pub alpha: T,
    pub adaptive_rho_interval: usize,
    pub scaling_iterations: usize,
    pub polish: bool,
    /// Active-set corrections tried per polish attempt.
    pub polish_rounds: usize,
    /// Record the objective at every iterate.
    pub trace: bool,
}

impl<T: Scalar> Default for SolverConfig<T> {
    fn default() -> Self {
        Self {
            eps_abs: T::lit(1e-6),
            eps_rel: T::lit(1e-6),
            eps_infeasible: T::lit(1e-4),
            max_iter: 20_000,
            rho: T::lit(0.1),
            sigma: T::lit(1e-6),
            alpha: T::lit(1.6),
            adaptive_rho_interval: 25,
            scaling_iterations: 1,
            polish: true,
            polish_rounds: 3,
            trace: false,
        }
    }
}

impl<T: Scalar> SolverConfig<T> {
    fn validate(&self) -> Result<(), SolveError> {
        if !(self.eps_abs > T::zero() && self.eps_rel >= T::zero()) {
            return Err(SolveError::BadConfig("tolerances must be positive"));
        }
        if self.max_iter == 0 {
            return Err(SolveError::BadConfig("max_iter must be at least 1"));
        }
        if !(self.rho > T::zero() && self.sigma > T::zero()) {
            return Err(SolveError::BadConfig("rho and sigma must be positive"));
        }
        if !(self.alpha > T::zero() && self.alpha < T::lit(2.0)) {
            return Err(SolveError::BadConfig("alpha must lie in (0, 2)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Solved,
    MaxIter,
    PrimalInfeasible,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Solved => "solved",
            Status::MaxIter => "max-iter",
            Status::PrimalInfeasible => "primal-infeasible",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution<T> {
    pub x: Vec<T>,
    /// Multipliers of the equality rows.
    pub y_eq: Vec<T>,
    /// Multipliers of the inequality rows; positive at an active upper bound.
    pub y_ie: Vec<T>,
    pub objective: T,
    pub status: Status,
    pub iterations: usize,
    pub primal_residual: T,
    pub dual_residual: T,
    pub polished: bool,
    pub trace: Vec<T>,
}

/// Stacked `l <= A x <= u` form in the solver's scaled coordinates.
struct Work<T> {
    n: usize,
    m: usize,
    p: Matrix<T>,
    q: Vec<T>,
    a: Matrix<T>,
    l: Vec<T>,
    u: Vec<T>,
    d: Vec<T>,
    e: Vec<T>,
    c: T,
    is_eq: Vec<bool>,
}

fn stack<T: Scalar>(qp: &QpProblem<T>) -> (Matrix<T>, Vec<T>, Vec<T>, Vec<bool>) {
    let n = qp.dim;
    let m_eq = qp.a_eq.rows();
    let m = m_eq + qp.a_ie.rows();
    let mut a = Matrix::zeros(m, n);
    let mut l = Vec::with_capacity(m);
    let mut u = Vec::with_capacity(m);
    let mut is_eq = Vec::with_capacity(m);
    for i in 0..m_eq {
        a.row_mut(i).copy_from_slice(qp.a_eq.row(i));
        l.push(qp.b_eq[i]);
        u.push(qp.b_eq[i]);
        is_eq.push(true);
    }
    for i in 0..qp.a_ie.rows() {
        a.row_mut(m_eq + i).copy_from_slice(qp.a_ie.row(i));
        l.push(qp.ie_lower[i]);
        u.push(qp.ie_upper[i]);
        is_eq.push(qp.ie_lower[i] == qp.ie_upper[i]);
    }
    (a, l, u, is_eq)
}

impl<T: Scalar> Work<T> {
    fn new(qp: &QpProblem<T>, scaling_iterations: usize) -> Self {
        let n = qp.dim;
        let two = T::lit(2.0);
        let mut p = qp.quad.clone();
        for i in 0..n {
            for j in 0..n {
                p[(i, j)] *= two;
            }
        }
        let mut q = qp.linear.clone();
        let (mut a, mut l, mut u, is_eq) = stack(qp);
        let m = a.rows();

        let mut d = vec![T::one(); n];
        let mut e = vec![T::one(); m];
        let mut c = T::one();
        let clamp = |v: T| {
            if v < T::lit(1e-4) {
                T::one()
            } else {
                v.min(T::lit(1e4))
            }
        };
        for _ in 0..scaling_iterations {
            let mut dd = vec![T::zero(); n];
            for j in 0..n {
                let mut norm = T::zero();
                for i in 0..n {
                    norm = norm.max(p[(i, j)].abs());
                }
                for i in 0..m {
                    norm = norm.max(a[(i, j)].abs());
                }
                dd[j] = T::one() / clamp(norm).sqrt();
            }
            let de: Vec<T> = (0..m)
                .map(|i| T::one() / clamp(norm_inf(a.row(i))).sqrt())
                .collect();
            for i in 0..n {
                for j in 0..n {
                    p[(i, j)] *= dd[i] * dd[j];
                }
                q[i] *= dd[i];
                d[i] *= dd[i];
            }
            for i in 0..m {
                for j in 0..n {
                    a[(i, j)] *= de[i] * dd[j];
                }
                e[i] *= de[i];
            }
            let mean_col = if n == 0 {
                T::one()
            } else {
                (0..n).map(|j| norm_inf(p.row(j))).sum::<T>() / T::of(n)
            };
            let gamma = T::one() / clamp(mean_col.max(norm_inf(&q)));
            for i in 0..n {
                for j in 0..n {
                    p[(i, j)] *= gamma;
                }
                q[i] *= gamma;
            }
            c *= gamma;
        }
        for i in 0..m {
            l[i] *= e[i];
            u[i] *= e[i];
        }
        Self {
            n,
            m,
            p,
            q,
            a,
            l,
            u,
            d,
            e,
            c,
            is_eq,
        }
    }

    fn rho_vec(&self, rho: T) -> Vec<T> {
        (0..self.m)
            .map(|i| {
                if self.is_eq[i] {
                    rho * T::lit(1e3)
                } else if self.l[i] == T::neg_infinity() && self.u[i] == T::infinity() {
                    T::lit(1e-6)
                } else {
                    rho
                }
            })
            .collect()
    }

    fn factor(&self, sigma: T, rho: &[T]) -> Option<Cholesky<T>> {
        let mut k = self.p.clone();
        for i in 0..self.n {
            k[(i, i)] += sigma;
        }
        for r in 0..self.m {
            let row = self.a.row(r);
            for i in 0..self.n {
                let ai = row[i] * rho[r];
                if ai == T::zero() {
                    continue;
                }
                for j in 0..self.n {
                    k[(i, j)] += ai * row[j];
                }
            }
        }
        Cholesky::factor(&k)
    }

    fn unscale_x(&self, x: &[T]) -> Vec<T> {
        x.iter().zip(&self.d).map(|(&v, &d)| v * d).collect()
    }

    fn unscale_y(&self, y: &[T]) -> Vec<T> {
        y.iter()
            .zip(&self.e)
            .map(|(&v, &e)| v * e / self.c)
            .collect()
    }
}

/// Residuals of a candidate in original coordinates.
struct Residuals<T> {
    primal: T,
    dual: T,
    eps_primal: T,
    eps_dual: T,
}

fn residuals<T: Scalar>(
    p: &Matrix<T>,
    q: &[T],
    a: &Matrix<T>,
    x: &[T],
    z: &[T],
    y: &[T],
    cfg: &SolverConfig<T>,
) -> Residuals<T> {
    let ax = a.mul_vec(x);
    let px = p.mul_vec(x);
    let aty = a.tr_mul_vec(y);
    let primal = ax
        .iter()
        .zip(z)
        .fold(T::zero(), |m, (&v, &w)| m.max((v - w).abs()));
    let dual = (0..x.len()).fold(T::zero(), |m, i| m.max((px[i] + q[i] + aty[i]).abs()));
    let eps_primal = cfg.eps_abs + cfg.eps_rel * norm_inf(&ax).max(norm_inf(z));
    let eps_dual = cfg.eps_abs + cfg.eps_rel * norm_inf(&px).max(norm_inf(&aty)).max(norm_inf(q));
    Residuals {
        primal,
        dual,
        eps_primal,
        eps_dual,
    }
}

fn project<T: Scalar>(v: T, l: T, u: T) -> T {
    v.max(l).min(u)
}

/// Solves the QP. Infeasibility and iteration exhaustion are reported in
/// [`Solution::status`]; malformed input is an error.
pub fn solve<T: Scalar>(
    qp: &QpProblem<T>,
    cfg: &SolverConfig<T>,
) -> Result<Solution<T>, SolveError> {
    cfg.validate()?;
    check_input(qp)?;
    let n = qp.dim;
    let w = Work::new(qp, cfg.scaling_iterations);
    let m = w.m;
    let (a_orig, l_orig, u_orig, _) = stack(qp);
    let mut p_orig = qp.quad.clone();
    for i in 0..n {
        for j in 0..n {
            p_orig[(i, j)] *= T::lit(2.0);
        }
    }

    let mut rho = cfg.rho;
    let mut rho_v = w.rho_vec(rho);
    let mut chol = w.factor(cfg.sigma, &rho_v).ok_or(SolveError::NotConvex)?;

    let mut x = vec![T::zero(); n];
    let mut z = vec![T::zero(); m];
    let mut y = vec![T::zero(); m];
    let mut trace = Vec::new();
    let alpha = cfg.alpha;
    let one = T::one();

    let mut status = Status::MaxIter;
    let mut iterations = cfg.max_iter;
    let mut best: Option<(Vec<T>, Vec<T>, Vec<T>)> = None;

    for k in 1..=cfg.max_iter {
        let x_prev = x.clone();
        let y_prev = y.clone();
        let rhs_y: Vec<T> = (0..m).map(|i| rho_v[i] * z[i] - y[i]).collect();
        let aty = w.a.tr_mul_vec(&rhs_y);
        let rhs: Vec<T> = (0..n).map(|i| cfg.sigma * x[i] - w.q[i] + aty[i]).collect();
        let x_tilde = chol.solve(&rhs);
        let z_tilde = w.a.mul_vec(&x_tilde);
        for i in 0..n {
            x[i] = alpha * x_tilde[i] + (one - alpha) * x_prev[i];
        }
        for i in 0..m {
            let relaxed = alpha * z_tilde[i] + (one - alpha) * z[i];
            let z_new = project(relaxed + y[i] / rho_v[i], w.l[i], w.u[i]);
            y[i] += rho_v[i] * (relaxed - z_new);
            z[i] = z_new;
        }

        if cfg.trace {
            let xu = w.unscale_x(&x);
            trace.push(qp.objective(&xu));
        }

        let check = k % cfg.adaptive_rho_interval == 0 || k == cfg.max_iter || k <= 5;
        if !check {
            continue;
        }

        let xu = w.unscale_x(&x);
        let yu = w.unscale_y(&y);
        let zu: Vec<T> = z.iter().zip(&w.e).map(|(&v, &e)| v / e).collect();
        let res = residuals(&p_orig, &qp.linear, &a_orig, &xu, &zu, &yu, cfg);
        if res.primal <= res.eps_primal && res.dual <= res.eps_dual {
            status = Status::Solved;
            iterations = k;
            break;
        }

        let dy: Vec<T> = (0..m).map(|i| y[i] - y_prev[i]).collect();
        if primal_infeasible(&w, &dy, cfg.eps_infeasible) {
            status = Status::PrimalInfeasible;
            iterations = k;
            break;
        }

        if cfg.polish && k % cfg.adaptive_rho_interval == 0 {
            if let Some(cand) = polish(
                &p_orig, &qp.linear, &a_orig, &l_orig, &u_orig, &zu, &yu, cfg,
            ) {
                best = Some(cand);
                status = Status::Solved;
                iterations = k;
                break;
            }
        }

        if k % cfg.adaptive_rho_interval == 0 {
            let ws = residuals(&w.p, &w.q, &w.a, &x, &z, &y, cfg);
            let ax = w.a.mul_vec(&x);
            let px = w.p.mul_vec(&x);
            let aty = w.a.tr_mul_vec(&y);
            let tiny = T::lit(1e-10);
            let pn = ws.primal / norm_inf(&ax).max(norm_inf(&z)).max(tiny);
            let dn = ws.dual
                / norm_inf(&px)
                    .max(norm_inf(&aty))
                    .max(norm_inf(&w.q))
                    .max(tiny);
            let ratio = (pn / dn.max(tiny)).sqrt();
            let candidate = (rho * ratio).max(T::lit(1e-6)).min(T::lit(1e6));
            if candidate > rho * T::lit(5.0) || candidate < rho / T::lit(5.0) {
                rho = candidate;
                rho_v = w.rho_vec(rho);
                chol = w.factor(cfg.sigma, &rho_v).ok_or(SolveError::NotConvex)?;
            }
        }
    }

    let xu = w.unscale_x(&x);
    let yu = w.unscale_y(&y);
    let zu: Vec<T> = z.iter().zip(&w.e).map(|(&v, &e)| v / e).collect();
    let (mut x_out, mut z_out, mut y_out) = (xu, zu, yu);
    let mut polished = false;
    if let Some(cand) = best {
        (x_out, z_out, y_out) = cand;
        polished = true;
    } else if status == Status::Solved && cfg.polish {
        if let Some(cand) = polish(
            &p_orig, &qp.linear, &a_orig, &l_orig, &u_orig, &z_out, &y_out, cfg,
        ) {
            (x_out, z_out, y_out) = cand;
            polished = true;
        }
    }
    let res = residuals(&p_orig, &qp.linear, &a_orig, &x_out, &z_out, &y_out, cfg);
    let m_eq = qp.a_eq.rows();
    let objective = qp.objective(&x_out);
    Ok(Solution {
        x: x_out,
        y_eq: y_out[..m_eq].to_vec(),
        y_ie: y_out[m_eq..].to_vec(),
        objective,
        status,
        iterations,
        primal_residual: res.primal,
        dual_residual: res.dual,
        polished,
        trace,
    })
}

fn check_input<T: Scalar>(qp: &QpProblem<T>) -> Result<(), SolveError> {
    let finite = |v: &[T]| v.iter().all(|x| x.is_finite());
    let rows_finite = |m: &Matrix<T>| (0..m.rows()).all(|i| finite(m.row(i)));
    if !(rows_finite(&qp.quad) && finite(&qp.linear) && qp.constant.is_finite())
        || !(rows_finite(&qp.a_eq) && finite(&qp.b_eq) && rows_finite(&qp.a_ie))
    {
        return Err(SolveError::NonFinite);
    }
    if qp
        .ie_lower
        .iter()
        .any(|v| v.is_nan() || *v == T::infinity())
        || qp
            .ie_upper
            .iter()
            .any(|v| v.is_nan() || *v == T::neg_infinity())
    {
        return Err(SolveError::NonFinite);
    }
    for (i, (l, u)) in qp.ie_lower.iter().zip(&qp.ie_upper).enumerate() {
        if l > u {
            return Err(SolveError::InvertedBounds(qp.a_eq.rows() + i));
        }
    }
    if !qp
        .quad
        .is_symmetric(T::lit(1e-9) * qp.quad.max_abs().max(T::one()))
    {
        return Err(SolveError::NotConvex);
    }
    Ok(())
}

fn primal_infeasible<T: Scalar>(w: &Work<T>, dy: &[T], eps: T) -> bool {
    // certificate in original coordinates: dy_orig = E dy / c
    let dyu: Vec<T> = dy.iter().zip(&w.e).map(|(&v, &e)| v * e).collect();
    let norm = norm_inf(&dyu);
    if norm <= T::lit(1e-12) {
        return false;
    }
    // A^T dy_orig = D^-1 Abar^T dy (up to c)
    let atdy: Vec<T> =
        w.a.tr_mul_vec(dy)
            .iter()
            .zip(&w.d)
            .map(|(&v, &d)| v / d)
            .collect();
    if norm_inf(&atdy) > eps * norm {
        return false;
    }
    let mut support = T::zero();
    for i in 0..w.m {
        let v = dyu[i];
        let (l, u) = (w.l[i] / w.e[i], w.u[i] / w.e[i]);
        if v > T::zero() {
            if u == T::infinity() {
                if v > eps * norm {
                    return false;
                }
                continue;
            }
            support += u * v;
        } else if v < T::zero() {
            if l == T::neg_infinity() {
                if -v > eps * norm {
                    return false;
                }
                continue;
            }
            support += l * v;
        }
    }
    support < -eps * norm
}

/// Guesses the active set from the ADMM iterate, then alternates between
/// solving the equality-constrained KKT system on it and correcting it:
/// violated rows join, rows with wrong-sign multipliers leave. Accepted only
/// if the result is feasible, stationary and sign-consistent.
#[allow(clippy::too_many_arguments)]
fn polish<T: Scalar>(
    p: &Matrix<T>,
    q: &[T],
    a: &Matrix<T>,
    l: &[T],
    u: &[T],
    z: &[T],
    y: &[T],
    cfg: &SolverConfig<T>,
) -> Option<(Vec<T>, Vec<T>, Vec<T>)> {
    let m = z.len();
    // -1 lower active, +1 upper active, 0 inactive, 2 equality
    let mut side = vec![0i8; m];
    for i in 0..m {
        side[i] = if l[i] == u[i] {
            2
        } else if z[i] - l[i] < -y[i] {
            -1
        } else if u[i] - z[i] < y[i] {
            1
        } else {
            0
        };
    }
    let tol = cfg.eps_abs;
    for _ in 0..cfg.polish_rounds.max(1) {
        let active: Vec<usize> = (0..m).filter(|&i| side[i] != 0).collect();
        let rows = independent_rows(a, &active);
        let (xp, yp) = solve_kkt(p, q, a, l, u, &rows, &side)?;
        let ax = a.mul_vec(&xp);
        let mut changed = false;
        for i in 0..m {
            let next = match side[i] {
                -1 if yp[i] > tol => 0,
                1 if yp[i] < -tol => 0,
                0 if ax[i] < l[i] - tol => -1,
                0 if ax[i] > u[i] + tol => 1,
                s => s,
            };
            changed |= next != side[i];
            side[i] = next;
        }
        if changed {
            continue;
        }
        let zp: Vec<T> = (0..m).map(|i| project(ax[i], l[i], u[i])).collect();
        let res = residuals(p, q, a, &xp, &zp, &yp, cfg);
        return (res.primal <= res.eps_primal && res.dual <= res.eps_dual).then_some((xp, zp, yp));
    }
    None
}

#[allow(clippy::too_many_arguments)]
fn solve_kkt<T: Scalar>(
    p: &Matrix<T>,
    q: &[T],
    a: &Matrix<T>,
    l: &[T],
    u: &[T],
    rows: &[usize],
    side: &[i8],
) -> Option<(Vec<T>, Vec<T>)> {
    let n = q.len();
    let k = rows.len();
    let mut kkt = Matrix::zeros(n + k, n + k);
    for i in 0..n {
        kkt.row_mut(i)[..n].copy_from_slice(p.row(i));
    }
    let mut rhs = vec![T::zero(); n + k];
    for i in 0..n {
        rhs[i] = -q[i];
    }
    for (r, &i) in rows.iter().enumerate() {
        for j in 0..n {
            kkt[(n + r, j)] = a[(i, j)];
            kkt[(j, n + r)] = a[(i, j)];
        }
        rhs[n + r] = if side[i] == -1 { l[i] } else { u[i] };
    }
    let lu = Lu::factor(&kkt)?;
    let mut sol = lu.solve(&rhs);
    // one step of iterative refinement
    let r: Vec<T> = kkt
        .mul_vec(&sol)
        .iter()
        .zip(&rhs)
        .map(|(&v, &b)| b - v)
        .collect();
    for (s, c) in sol.iter_mut().zip(lu.solve(&r)) {
        *s += c;
    }
    let mut yp = vec![T::zero(); a.rows()];
    for (r, &i) in rows.iter().enumerate() {
        yp[i] = sol[n + r];
    }
    sol.truncate(n);
    Some((sol, yp))
}

/// Drops active rows that are linear combinations of earlier ones.
fn independent_rows<T: Scalar>(a: &Matrix<T>, candidates: &[usize]) -> Vec<usize> {
    let mut basis: Vec<Vec<T>> = Vec::new();
    let mut kept = Vec::new();
    for &i in candidates {
        let row = a.row(i);
        let norm = dot(row, row).sqrt();
        if norm == T::zero() {
            continue;
        }
        let mut v: Vec<T> = row.iter().map(|&x| x / norm).collect();
        for b in &basis {
            let f = dot(&v, b);
            v.iter_mut().zip(b).for_each(|(x, &bj)| *x -= f * bj);
        }
        let rest = dot(&v, &v).sqrt();
        if rest > T::lit(1e-9) {
            v.iter_mut().for_each(|x| *x /= rest);
            basis.push(v);
            kept.push(i);
        }
    }
    kept
}

/// Residual summary recomputed from the problem data.
#[derive(Debug, Clone, PartialEq)]
pub struct KktReport {
    pub status: Status,
    /// `None` when there is no solution to check.
    pub residuals: Option<KktResiduals>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KktResiduals {
    pub equality: f64,
    pub inequality: f64,
    pub stationarity: f64,
    pub complementarity: f64,
    pub violated: Vec<(RowOrigin, f64)>,
}

impl KktReport {
    pub fn is_clean(&self, tol: f64) -> bool {
        self.residuals.as_ref().is_some_and(|r| {
            r.equality <= tol
                && r.inequality <= tol
                && r.stationarity <= tol
                && r.violated.is_empty()
        })
    }
}

/// Recomputes feasibility, stationarity and complementarity of a solution
/// and lists rows violated by more than `10 * eps_abs`.
pub fn kkt_report<T: Scalar>(qp: &QpProblem<T>, solution: &Solution<T>, eps_abs: T) -> KktReport {
    if solution.status == Status::PrimalInfeasible {
        return KktReport {
            status: solution.status,
            residuals: None,
        };
    }
    let x = &solution.x;
    let f = |v: T| v.to_f64_lossy();
    let limit = f(eps_abs) * 10.0;
    let mut violated = Vec::new();
    let mut equality = 0.0f64;
    for i in 0..qp.a_eq.rows() {
        let r = f((dot(qp.a_eq.row(i), x) - qp.b_eq[i]).abs());
        equality = equality.max(r);
        if r > limit {
            violated.push((qp.eq_origin[i], r));
        }
    }
    let mut inequality = 0.0f64;
    let mut complementarity = 0.0f64;
    for i in 0..qp.a_ie.rows() {
        let ax = dot(qp.a_ie.row(i), x);
        let v = f((qp.ie_lower[i] - ax)
            .max(ax - qp.ie_upper[i])
            .max(T::zero()));
        inequality = inequality.max(v);
        if v > limit {
            violated.push((qp.ie_origin[i], v));
        }
        let yi = solution.y_ie.get(i).copied().unwrap_or_else(T::zero);
        let slack = if yi > T::zero() {
            qp.ie_upper[i] - ax
        } else {
            ax - qp.ie_lower[i]
        };
        if yi != T::zero() {
            complementarity = complementarity.max(f((yi * slack).abs()));
        }
    }
    let mut grad = qp.quad.mul_vec(x);
    for g in grad.iter_mut() {
        *g *= T::lit(2.0);
    }
    let ate = if qp.a_eq.rows() > 0 {
        qp.a_eq.tr_mul_vec(&solution.y_eq)
    } else {
        vec![T::zero(); qp.dim]
    };
    let ati = if qp.a_ie.rows() > 0 {
        qp.a_ie.tr_mul_vec(&solution.y_ie)
    } else {
        vec![T::zero(); qp.dim]
    };
    let stationarity = (0..qp.dim).fold(0.0f64, |m, i| {
        m.max(f((grad[i] + qp.linear[i] + ate[i] + ati[i]).abs()))
    });
    KktReport {
        status: solution.status,
        residuals: Some(KktResiduals {
            equality,
            inequality,
            stationarity,
            complementarity,
            violated,
        }),
    }
}
