//! Assembly of the piecewise Bezier speed QP.
//!
//! Decision variables are the raw control points of every segment stacked
//! segment by segment, `x = [c^0; c^1; ...; c^m]`, each block of length
//! `n + 1`. The objective is `x^T Q x + q^T x + constant` and reproduces the
//! tracking/smoothness cost exactly, constant included.

use std::fmt;
use std::io::{self, Write};

use thiserror::Error;

use crate::bezier::TransitionMatrix;
use crate::corridor::Region;
use crate::dp::{HeuristicProfile, LinearPiece};
use crate::linalg::{rank, Matrix};
use crate::stgraph::InitialState;
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QpBuildError {
    #[error("rectangular corridor infeasible in {} region(s)", .0.len())]
    RectInfeasible(Vec<RectInfeasibility>),
    #[error("dimension mismatch: expected {expected} columns, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("degree {0} too low (need at least 2)")]
    DegreeTooLow(usize),
    #[error("no regions to optimize over")]
    NoRegions,
}

/// A region whose rectangular box is empty: the lower line's maximum over
/// the window exceeds the upper line's minimum.
#[derive(Debug, Clone, PartialEq)]
pub struct RectInfeasibility {
    pub region: usize,
    pub lower: f64,
    pub upper: f64,
    pub duration: f64,
    /// Largest duration for which the box would be nonempty,
    /// `(ubias - lbias) / lskew` (infinite for non-positive skew).
    pub max_duration: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SafetyMode {
    Trapezoidal,
    Rectangular,
}

impl fmt::Display for SafetyMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SafetyMode::Trapezoidal => "TC",
            SafetyMode::Rectangular => "RC",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostWeights<T> {
    pub w1: T,
    pub w2: T,
    pub w3: T,
    pub w4: T,
    pub w5: T,
    pub cruise_speed: T,
    /// Desired station at the end of the horizon.
    pub s_end_ref: T,
}

impl<T: Scalar> CostWeights<T> {
    /// Tracking 0.1, speed 0.1, acceleration 10, jerk 5, terminal 3.
    pub fn standard(cruise_speed: T, s_end_ref: T) -> Self {
        Self {
            w1: T::lit(0.1),
            w2: T::lit(0.1),
            w3: T::lit(10.0),
            w4: T::lit(5.0),
            w5: T::lit(3.0),
            cruise_speed,
            s_end_ref,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalLimits<T> {
    pub v_max: T,
    pub a_min: T,
    pub a_max: T,
    pub j_min: T,
    pub j_max: T,
    /// Maximum centripetal acceleration.
    pub a_cm: T,
    /// Maximum path curvature per segment; the last entry repeats, empty means straight.
    pub kappa: Vec<T>,
}

impl<T: Scalar> PhysicalLimits<T> {
    pub fn curvature(&self, segment: usize) -> T {
        self.kappa
            .get(segment)
            .or(self.kappa.last())
            .copied()
            .unwrap_or_else(T::zero)
    }

    /// Speed cap of a segment: the road limit or the lateral acceleration limit.
    pub fn speed_cap(&self, segment: usize) -> T {
        let kappa = self.curvature(segment);
        if kappa > T::zero() {
            self.v_max.min((self.a_cm / kappa).sqrt())
        } else {
            self.v_max
        }
    }
}

/// Which constraint family produced a row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowOrigin {
    Boundary { order: usize },
    Continuity { junction: usize, order: usize },
    Safety { segment: usize, point: usize },
    Velocity { segment: usize, point: usize },
    Acceleration { segment: usize, point: usize },
    Jerk { segment: usize, point: usize },
}

impl fmt::Display for RowOrigin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RowOrigin::Boundary { order } => write!(f, "boundary[l={order}]"),
            RowOrigin::Continuity { junction, order } => {
                write!(f, "continuity[k={junction},l={order}]")
            }
            RowOrigin::Safety { segment, point } => write!(f, "safety[k={segment},i={point}]"),
            RowOrigin::Velocity { segment, point } => write!(f, "velocity[k={segment},i={point}]"),
            RowOrigin::Acceleration { segment, point } => {
                write!(f, "acceleration[k={segment},i={point}]")
            }
            RowOrigin::Jerk { segment, point } => write!(f, "jerk[k={segment},i={point}]"),
        }
    }
}

/// A set of linear rows `lower <= a x <= upper`; equality blocks have `lower == upper`.
#[derive(Debug, Clone, PartialEq)]
pub struct RowBlock<T> {
    pub equality: bool,
    pub rows: Vec<Vec<T>>,
    pub lower: Vec<T>,
    pub upper: Vec<T>,
    pub origin: Vec<RowOrigin>,
}

impl<T: Scalar> RowBlock<T> {
    fn new(equality: bool) -> Self {
        Self {
            equality,
            rows: Vec::new(),
            lower: Vec::new(),
            upper: Vec::new(),
            origin: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<T>, lower: T, upper: T, origin: RowOrigin) {
        self.rows.push(row);
        self.lower.push(lower);
        self.upper.push(upper);
        self.origin.push(origin);
    }

    fn push_eq(&mut self, row: Vec<T>, rhs: T, origin: RowOrigin) {
        self.push(row, rhs, rhs, origin);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Quadratic objective `x^T Q x + q^T x + constant`.
#[derive(Debug, Clone, PartialEq)]
pub struct Objective<T> {
    pub quad: Matrix<T>,
    pub linear: Vec<T>,
    pub constant: T,
}

impl<T: Scalar> Objective<T> {
    pub fn value(&self, x: &[T]) -> T {
        self.quad.quad_form(x) + crate::linalg::dot(&self.linear, x) + self.constant
    }
}

/// The stacked speed QP.
#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem<T> {
    pub dim: usize,
    pub quad: Matrix<T>,
    pub linear: Vec<T>,
    pub constant: T,
    pub a_eq: Matrix<T>,
    pub b_eq: Vec<T>,
    pub eq_origin: Vec<RowOrigin>,
    pub a_ie: Matrix<T>,
    pub ie_lower: Vec<T>,
    pub ie_upper: Vec<T>,
    pub ie_origin: Vec<RowOrigin>,
}

impl<T: Scalar> QpProblem<T> {
    pub fn objective(&self, x: &[T]) -> T {
        self.quad.quad_form(x) + crate::linalg::dot(&self.linear, x) + self.constant
    }

    /// Inequalities in one-sided form `A x <= b`: each finite upper bound
    /// gives `a x <= u`, each finite lower bound `-a x <= -l`.
    pub fn one_sided(&self) -> (Vec<Vec<T>>, Vec<T>) {
        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        for i in 0..self.a_ie.rows() {
            let a = self.a_ie.row(i);
            if self.ie_upper[i].is_finite() {
                rows.push(a.to_vec());
                rhs.push(self.ie_upper[i]);
            }
            if self.ie_lower[i].is_finite() {
                rows.push(a.iter().map(|&v| -v).collect());
                rhs.push(-self.ie_lower[i]);
            }
        }
        (rows, rhs)
    }

    /// Plain-text listing of every matrix, one row per line.
    pub fn write_dump<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(
            w,
            "# qp dim={} eq={} ie={}",
            self.dim,
            self.a_eq.rows(),
            self.a_ie.rows()
        )?;
        writeln!(w, "constant {:e}", self.constant.to_f64_lossy())?;
        let join = |v: &[T]| {
            v.iter()
                .map(|x| format!("{:e}", x.to_f64_lossy()))
                .collect::<Vec<_>>()
                .join(" ")
        };
        writeln!(w, "[Q]")?;
        for i in 0..self.dim {
            writeln!(w, "{}", join(self.quad.row(i)))?;
        }
        writeln!(w, "[q]")?;
        writeln!(w, "{}", join(&self.linear))?;
        writeln!(w, "[eq] origin | a | b")?;
        for i in 0..self.a_eq.rows() {
            writeln!(
                w,
                "{} | {} | {:e}",
                self.eq_origin[i],
                join(self.a_eq.row(i)),
                self.b_eq[i].to_f64_lossy()
            )?;
        }
        writeln!(w, "[ie] origin | lower | a | upper")?;
        for i in 0..self.a_ie.rows() {
            writeln!(
                w,
                "{} | {:e} | {} | {:e}",
                self.ie_origin[i],
                self.ie_lower[i].to_f64_lossy(),
                join(self.a_ie.row(i)),
                self.ie_upper[i].to_f64_lossy()
            )?;
        }
        Ok(())
    }
}

/// Falling factorial `i (i-1) ... (i-l+1)`.
fn falling<T: Scalar>(i: usize, l: usize) -> T {
    (0..l).fold(T::one(), |acc, k| acc * T::of(i - k))
}

/// Gram matrix of the `l`-th derivative over monomial coefficients of one
/// segment, time-scaled: `p^T G p = h^(3-2l) * int_0^1 (f^(l)(u))^2 du`,
/// which is the integral over the segment of the squared `l`-th time
/// derivative of `s(t) = h f((t - T_k) / h)`.
pub fn derivative_gram<T: Scalar>(n: usize, l: usize, h: T) -> Matrix<T> {
    let mut g = Matrix::zeros(n + 1, n + 1);
    if l > n {
        return g;
    }
    let scale = h.powi(3 - 2 * l as i32);
    for i in l..=n {
        for j in l..=n {
            let num: T = falling::<T>(i, l) * falling::<T>(j, l);
            g[(i, j)] = scale * num / T::of(i + j + 1 - 2 * l);
        }
    }
    g
}

/// Reference line per region: the heuristic's chord between the region's
/// start and end times, anchored at the region start.
pub fn reference_lines<T: Scalar>(
    heuristic: &HeuristicProfile<T>,
    regions: &[Region<T>],
) -> Vec<LinearPiece<T>> {
    regions
        .iter()
        .map(|r| {
            let s0 = heuristic.station_at(r.t_start);
            let s1 = heuristic.station_at(r.t_finish());
            LinearPiece {
                slope: (s1 - s0) / r.duration,
                intercept: s0,
            }
        })
        .collect()
}

fn inverse_matrix<T: Scalar>(n: usize) -> Matrix<T> {
    Matrix::from_rows(&TransitionMatrix::<T>::new(n).inverse())
}

/// Quadratic cost over all segments: reference tracking, speed tracking,
/// acceleration and jerk energy, and terminal station.
pub fn build_objective<T: Scalar>(
    regions: &[Region<T>],
    reference: &[LinearPiece<T>],
    weights: &CostWeights<T>,
    n: usize,
) -> Result<Objective<T>, QpBuildError> {
    if regions.is_empty() {
        return Err(QpBuildError::NoRegions);
    }
    if reference.len() != regions.len() {
        return Err(QpBuildError::DimensionMismatch {
            expected: regions.len(),
            got: reference.len(),
        });
    }
    let block = n + 1;
    let dim = regions.len() * block;
    let mut quad = Matrix::zeros(dim, dim);
    let mut linear = vec![T::zero(); dim];
    let mut constant = T::zero();
    let minv = inverse_matrix::<T>(n);
    let two = T::lit(2.0);

    for (k, (r, line)) in regions.iter().zip(reference).enumerate() {
        let h = r.duration;
        let (a, b) = (line.slope, line.intercept);
        // monomial-space terms of s_k(t) = h f(u)
        let mut qm = Matrix::zeros(block, block);
        let mut lm = vec![T::zero(); block];
        let grams = [
            (weights.w1, derivative_gram::<T>(n, 0, h)),
            (weights.w2, derivative_gram::<T>(n, 1, h)),
            (weights.w3, derivative_gram::<T>(n, 2, h)),
            (weights.w4, derivative_gram::<T>(n, 3, h)),
        ];
        for (w, g) in &grams {
            if *w == T::zero() {
                continue;
            }
            for i in 0..block {
                for j in 0..block {
                    qm[(i, j)] += *w * g[(i, j)];
                }
            }
        }
        if weights.w1 != T::zero() {
            let h2 = h * h;
            let h3 = h2 * h;
            for (i, l) in lm.iter_mut().enumerate() {
                *l -= weights.w1 * two * (h3 * a / T::of(i + 2) + h2 * b / T::of(i + 1));
            }
            constant += weights.w1 * h * (a * a * h2 / T::lit(3.0) + a * b * h + b * b);
        }

        // c-space: Q_c = M^-T Qm M^-1, q_c = M^-T lm
        let qc = minv.transpose().matmul(&qm).matmul(&minv);
        let lc = minv.tr_mul_vec(&lm);
        let off = k * block;
        for i in 0..block {
            linear[off + i] += lc[i];
            for j in 0..block {
                quad[(off + i, off + j)] += qc[(i, j)];
            }
        }

        // speed tracking cross term: -2 v_r * int s' = -2 v_r h (c_n - c_0)
        let w2v = weights.w2 * two * weights.cruise_speed * h;
        linear[off + n] -= w2v;
        linear[off] += w2v;
        constant += weights.w2 * weights.cruise_speed * weights.cruise_speed * h;
    }

    // terminal: w5 (h_m c_n^m - s_ref)^2
    let last = regions.len() - 1;
    let h_m = regions[last].duration;
    let idx = last * block + n;
    quad[(idx, idx)] += weights.w5 * h_m * h_m;
    linear[idx] -= weights.w5 * two * weights.s_end_ref * h_m;
    constant += weights.w5 * weights.s_end_ref * weights.s_end_ref;

    // symmetrize round-off
    for i in 0..dim {
        for j in 0..i {
            let avg = (quad[(i, j)] + quad[(j, i)]) / two;
            quad[(i, j)] = avg;
            quad[(j, i)] = avg;
        }
    }
    Ok(Objective {
        quad,
        linear,
        constant,
    })
}

/// Coefficients of the `order`-th derivative control point `point` of one
/// segment as a combination of its raw control points, scaled to time units.
fn derivative_point_row<T: Scalar>(n: usize, order: usize, point: usize, h: T) -> Vec<T> {
    let mut row = vec![T::zero(); n + 1];
    // order-th forward difference times n!/(n-order)!
    let binom = crate::bezier::pascal_row::<T>(order);
    for (j, c) in binom.iter().enumerate() {
        let sign = if (order - j).is_multiple_of(2) {
            T::one()
        } else {
            -T::one()
        };
        row[point + j] = sign * *c;
    }
    let scale = falling::<T>(n, order) * h.powi(1 - order as i32);
    row.iter_mut().for_each(|v| *v *= scale);
    row
}

fn embed<T: Scalar>(local: &[T], segment: usize, dim: usize) -> Vec<T> {
    let mut row = vec![T::zero(); dim];
    let off = segment * local.len();
    row[off..off + local.len()].copy_from_slice(local);
    row
}

/// Initial station, speed and acceleration on the first segment.
pub fn build_boundary_constraints<T: Scalar>(
    init: &InitialState<T>,
    n: usize,
    regions: &[Region<T>],
) -> Result<RowBlock<T>, QpBuildError> {
    if n < 2 {
        return Err(QpBuildError::DegreeTooLow(n));
    }
    let first = regions.first().ok_or(QpBuildError::NoRegions)?;
    let dim = regions.len() * (n + 1);
    let h0 = first.duration;
    let mut block = RowBlock::new(true);
    for (order, rhs) in [(0, init.s0), (1, init.v0), (2, init.a0)] {
        block.push_eq(
            embed(&derivative_point_row(n, order, 0, h0), 0, dim),
            rhs,
            RowOrigin::Boundary { order },
        );
    }
    Ok(block)
}

/// Station, speed and acceleration continuity at every junction.
pub fn build_continuity_constraints<T: Scalar>(regions: &[Region<T>], n: usize) -> RowBlock<T> {
    let dim = regions.len() * (n + 1);
    let mut block = RowBlock::new(true);
    for (k, w) in regions.windows(2).enumerate() {
        for order in 0..=2.min(n) {
            let left = derivative_point_row(n, order, n - order, w[0].duration);
            let right = derivative_point_row(n, order, 0, w[1].duration);
            let mut row = embed(&left, k, dim);
            for (dst, v) in row[(k + 1) * (n + 1)..(k + 2) * (n + 1)]
                .iter_mut()
                .zip(&right)
            {
                *dst -= *v;
            }
            block.push_eq(row, T::zero(), RowOrigin::Continuity { junction: k, order });
        }
    }
    block
}

/// Per-point station bounds `(lower, upper)` for the scaled control points
/// `h c_i` of one region.
pub fn safety_bounds<T: Scalar>(region: &Region<T>, n: usize, mode: SafetyMode) -> Vec<(T, T)> {
    let h = region.duration;
    let m = TransitionMatrix::<T>::new(n);
    (0..=n)
        .map(|i| match mode {
            SafetyMode::Trapezoidal => {
                let m1 = m.entry(i, 1);
                (
                    region.lbias + h * region.lskew * m1,
                    region.ubias + h * region.uskew * m1,
                )
            }
            SafetyMode::Rectangular => (
                region.lbias + (h * region.lskew).max(T::zero()),
                region.ubias + (h * region.uskew).min(T::zero()),
            ),
        })
        .collect()
}

/// Keeps every segment's scaled control points `h_k c_i^k` inside its
/// corridor: the trapezoid through the region's own boundary lines, or the
/// largest axis-aligned box inside it.
pub fn build_safety_constraints<T: Scalar>(
    regions: &[Region<T>],
    n: usize,
    mode: SafetyMode,
) -> Result<RowBlock<T>, QpBuildError> {
    let dim = regions.len() * (n + 1);
    let mut block = RowBlock::new(false);
    let mut infeasible = Vec::new();
    for (k, r) in regions.iter().enumerate() {
        let bounds = safety_bounds(r, n, mode);
        if mode == SafetyMode::Rectangular && bounds[0].0 > bounds[0].1 {
            let max_duration = if r.lskew > T::zero() {
                ((r.ubias - r.lbias) / r.lskew).to_f64_lossy()
            } else {
                f64::INFINITY
            };
            infeasible.push(RectInfeasibility {
                region: k,
                lower: bounds[0].0.to_f64_lossy(),
                upper: bounds[0].1.to_f64_lossy(),
                duration: r.duration.to_f64_lossy(),
                max_duration,
            });
            continue;
        }
        for (i, (lo, hi)) in bounds.into_iter().enumerate() {
            let mut row = vec![T::zero(); dim];
            row[k * (n + 1) + i] = r.duration;
            block.push(
                row,
                lo,
                hi,
                RowOrigin::Safety {
                    segment: k,
                    point: i,
                },
            );
        }
    }
    if infeasible.is_empty() {
        Ok(block)
    } else {
        Err(QpBuildError::RectInfeasible(infeasible))
    }
}

/// Bounds on the velocity, acceleration and jerk control points.
pub fn build_physical_constraints<T: Scalar>(
    regions: &[Region<T>],
    n: usize,
    limits: &PhysicalLimits<T>,
) -> RowBlock<T> {
    let dim = regions.len() * (n + 1);
    let mut block = RowBlock::new(false);
    for (k, r) in regions.iter().enumerate() {
        let h = r.duration;
        let cap = limits.speed_cap(k);
        for point in 0..n {
            let row = embed(&derivative_point_row(n, 1, point, h), k, dim);
            block.push(
                row,
                T::zero(),
                cap,
                RowOrigin::Velocity { segment: k, point },
            );
        }
        if n >= 2 {
            for point in 0..n - 1 {
                let row = embed(&derivative_point_row(n, 2, point, h), k, dim);
                block.push(
                    row,
                    limits.a_min,
                    limits.a_max,
                    RowOrigin::Acceleration { segment: k, point },
                );
            }
        }
        if n >= 3 {
            for point in 0..n - 2 {
                let row = embed(&derivative_point_row(n, 3, point, h), k, dim);
                block.push(
                    row,
                    limits.j_min,
                    limits.j_max,
                    RowOrigin::Jerk { segment: k, point },
                );
            }
        }
    }
    block
}

/// Stacks objective and constraint blocks into one problem, dropping
/// equality rows that are linear combinations of earlier ones.
pub fn assemble<T: Scalar>(
    objective: Objective<T>,
    blocks: Vec<RowBlock<T>>,
) -> Result<QpProblem<T>, QpBuildError> {
    let dim = objective.linear.len();
    if objective.quad.rows() != dim || objective.quad.cols() != dim {
        return Err(QpBuildError::DimensionMismatch {
            expected: dim,
            got: objective.quad.rows(),
        });
    }
    let mut eq_rows: Vec<Vec<T>> = Vec::new();
    let mut b_eq = Vec::new();
    let mut eq_origin = Vec::new();
    let mut ie_rows: Vec<Vec<T>> = Vec::new();
    let mut ie_lower = Vec::new();
    let mut ie_upper = Vec::new();
    let mut ie_origin = Vec::new();
    let tol = T::lit(1e-10);
    for block in blocks {
        for (i, row) in block.rows.into_iter().enumerate() {
            if row.len() != dim {
                return Err(QpBuildError::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            if block.equality {
                let scale = crate::scalar::norm_inf(&row).max(T::min_positive_value());
                let normalized: Vec<T> = row.iter().map(|&v| v / scale).collect();
                let mut trial: Vec<Vec<T>> = eq_rows
                    .iter()
                    .map(|r: &Vec<T>| {
                        let s = crate::scalar::norm_inf(r).max(T::min_positive_value());
                        r.iter().map(|&v| v / s).collect()
                    })
                    .collect();
                let before = trial.len();
                trial.push(normalized);
                if rank(&trial, tol) <= before {
                    continue;
                }
                eq_rows.push(row);
                b_eq.push(block.lower[i]);
                eq_origin.push(block.origin[i]);
            } else {
                ie_rows.push(row);
                ie_lower.push(block.lower[i]);
                ie_upper.push(block.upper[i]);
                ie_origin.push(block.origin[i]);
            }
        }
    }
    let to_matrix = |rows: &[Vec<T>]| {
        if rows.is_empty() {
            Matrix::zeros(0, dim)
        } else {
            Matrix::from_rows(rows)
        }
    };
    Ok(QpProblem {
        dim,
        quad: objective.quad,
        linear: objective.linear,
        constant: objective.constant,
        a_eq: to_matrix(&eq_rows),
        b_eq,
        eq_origin,
        a_ie: to_matrix(&ie_rows),
        ie_lower,
        ie_upper,
        ie_origin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn region(t_start: f64, h: f64, lb: (f64, f64), ub: (f64, f64)) -> Region<f64> {
        let beg = (t_start * 10.0).round() as usize;
        Region {
            t_beg: beg,
            t_end: beg + (h * 10.0).round() as usize,
            duration: h,
            t_start,
            lbias: lb.0,
            lskew: lb.1,
            ubias: ub.0,
            uskew: ub.1,
        }
    }

    #[test]
    fn gram_examples() {
        let g = derivative_gram::<f64>(1, 0, 1.0);
        assert_eq!(
            g,
            Matrix::from_rows(&[vec![1.0, 0.5], vec![0.5, 1.0 / 3.0]])
        );
        let g1 = derivative_gram::<f64>(4, 1, 1.7);
        assert_eq!(g1.quad_form(&[3.0, 0.0, 0.0, 0.0, 0.0]), 0.0);
        let g2 = derivative_gram::<f64>(2, 2, 1.0);
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == 2 && j == 2 { 4.0 } else { 0.0 };
                assert_eq!(g2[(i, j)], expect);
            }
        }
    }

    #[test]
    fn zero_weights_give_zero_objective() {
        let w = CostWeights {
            w1: 0.0,
            w2: 0.0,
            w3: 0.0,
            w4: 0.0,
            w5: 0.0,
            cruise_speed: 10.0,
            s_end_ref: 70.0,
        };
        let regs = [region(0.0, 1.0, (0.0, 0.0), (50.0, 0.0))];
        let line = [LinearPiece {
            slope: 10.0,
            intercept: 0.0,
        }];
        let obj = build_objective(&regs, &line, &w, 5).unwrap();
        assert_eq!(obj.quad.max_abs(), 0.0);
        assert!(obj.linear.iter().all(|&v| v == 0.0));
        assert_eq!(obj.constant, 0.0);
    }

    #[test]
    fn tracking_term_vanishes_on_reference() {
        let w = CostWeights {
            w1: 1.0,
            w2: 0.0,
            w3: 0.0,
            w4: 0.0,
            w5: 0.0,
            cruise_speed: 0.0,
            s_end_ref: 0.0,
        };
        let h = 0.8;
        let regs = [region(0.0, h, (0.0, 0.0), (50.0, 0.0))];
        let (a, b) = (7.5, 3.0);
        let line = [LinearPiece {
            slope: a,
            intercept: b,
        }];
        let obj = build_objective(&regs, &line, &w, 5).unwrap();
        // s(t) = b + a t = h f(u) with f(u) = b/h + a u
        let c = crate::bezier::monomial_to_bezier(&[b / h, a, 0.0, 0.0, 0.0, 0.0]);
        assert!(obj.value(&c).abs() < 1e-10);
    }

    #[test]
    fn boundary_rows_example() {
        let init = InitialState {
            s0: 0.0,
            v0: 10.0,
            a0: 0.0,
        };
        let regs = [region(0.0, 1.0, (0.0, 0.0), (50.0, 0.0))];
        let block = build_boundary_constraints(&init, 5, &regs).unwrap();
        let c = [0.0, 2.0, 4.0, 6.0, 8.0, 10.0];
        for (row, rhs) in block.rows.iter().zip(&block.lower) {
            assert!((crate::linalg::dot(row, &c) - rhs).abs() < 1e-12);
        }
        // doubling h0 keeps c1 - c0 = v0 / n: no h factor on speed
        let regs2 = [region(0.0, 2.0, (0.0, 0.0), (50.0, 0.0))];
        let b2 = build_boundary_constraints(&init, 5, &regs2).unwrap();
        assert_eq!(block.rows[1], b2.rows[1]);
        assert!((b2.rows[0][0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn continuity_rows_example() {
        let n = 5;
        let regs = [
            region(0.0, 1.0, (0.0, 0.0), (50.0, 0.0)),
            region(1.0, 2.0, (0.0, 0.0), (50.0, 0.0)),
        ];
        let block = build_continuity_constraints(&regs, n);
        assert_eq!(block.len(), 3);
        let l1 = &block.rows[1];
        assert_eq!(&l1[4..8], &[-5.0, 5.0, 5.0, -5.0]);
        let l0 = &block.rows[0];
        assert_eq!((l0[5], l0[6]), (1.0, -2.0));
    }

    #[test]
    fn safety_modes() {
        let flat = region(0.0, 1.0, (1.0, 0.0), (9.0, 0.0));
        assert_eq!(
            safety_bounds(&flat, 5, SafetyMode::Trapezoidal),
            safety_bounds(&flat, 5, SafetyMode::Rectangular)
        );

        let steep = region(0.0, 1.0, (0.0, 2.0), (1.0, 2.0));
        let err = build_safety_constraints(&[steep], 5, SafetyMode::Rectangular).unwrap_err();
        match err {
            QpBuildError::RectInfeasible(v) => {
                assert_eq!(v[0].region, 0);
                assert!((v[0].max_duration - 0.5).abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
        let trap = safety_bounds(&steep, 5, SafetyMode::Trapezoidal);
        for (i, (lo, hi)) in trap.iter().enumerate() {
            assert!((hi - lo - 1.0).abs() < 1e-12);
            assert!((lo - 2.0 * i as f64 / 5.0).abs() < 1e-12);
        }
    }

    #[test]
    fn trapezoid_is_looser_for_rising_bounds() {
        let r = region(0.0, 0.7, (2.0, 1.5), (20.0, 3.0));
        let trap = safety_bounds(&r, 6, SafetyMode::Trapezoidal);
        let rect = safety_bounds(&r, 6, SafetyMode::Rectangular);
        for (t, q) in trap.iter().zip(&rect) {
            assert!(t.0 <= q.0 + 1e-12 && t.1 >= q.1 - 1e-12);
        }
    }

    #[test]
    fn speed_caps() {
        let mut lim = PhysicalLimits {
            v_max: 20.0f64,
            a_min: -4.0,
            a_max: 2.0,
            j_min: -5.0,
            j_max: 5.0,
            a_cm: 1.5,
            kappa: vec![0.0],
        };
        assert_eq!(lim.speed_cap(0), 20.0);
        lim.kappa = vec![0.015];
        assert!((lim.speed_cap(3) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn assembly_counts_and_provenance() {
        let n = 5;
        let init = InitialState {
            s0: 0.0,
            v0: 10.0,
            a0: 0.0,
        };
        let limits = PhysicalLimits {
            v_max: 20.0,
            a_min: -4.0,
            a_max: 2.0,
            j_min: -5.0,
            j_max: 5.0,
            a_cm: 1.5,
            kappa: vec![],
        };
        let weights = CostWeights::standard(10.0, 70.0);
        for count in [1usize, 2] {
            let regs: Vec<_> = (0..count)
                .map(|k| region(k as f64, 1.0, (0.0, 0.0), (50.0, 0.0)))
                .collect();
            let lines = vec![
                LinearPiece {
                    slope: 10.0,
                    intercept: 0.0
                };
                count
            ];
            let obj = build_objective(&regs, &lines, &weights, n).unwrap();
            let blocks = vec![
                build_boundary_constraints(&init, n, &regs).unwrap(),
                build_continuity_constraints(&regs, n),
                build_safety_constraints(&regs, n, SafetyMode::Trapezoidal).unwrap(),
                build_physical_constraints(&regs, n, &limits),
            ];
            let qp = assemble(obj, blocks).unwrap();
            assert_eq!(qp.dim, 6 * count);
            assert_eq!(qp.a_eq.rows(), 3 + 3 * (count - 1));
            assert_eq!(qp.eq_origin.len(), qp.a_eq.rows());
            assert_eq!(qp.ie_origin.len(), qp.a_ie.rows());
            let safety = qp
                .ie_origin
                .iter()
                .filter(|o| matches!(o, RowOrigin::Safety { .. }))
                .count();
            assert_eq!(safety, 6 * count);
            let (rows, _) = qp.one_sided();
            let safety_rows: usize = qp
                .ie_origin
                .iter()
                .filter(|o| matches!(o, RowOrigin::Safety { .. }))
                .count()
                * 2;
            assert_eq!(safety_rows, 12 * count);
            assert_eq!(rows.len(), qp.a_ie.rows() * 2);
            assert_eq!(qp.ie_origin.len(), 6 * count + 12 * count);
        }
    }

    #[test]
    fn duplicate_equalities_dropped() {
        let obj = Objective {
            quad: Matrix::identity(2),
            linear: vec![0.0; 2],
            constant: 0.0,
        };
        let mut b = RowBlock::new(true);
        b.push_eq(vec![1.0, 1.0], 1.0, RowOrigin::Boundary { order: 0 });
        b.push_eq(vec![2.0, 2.0], 2.0, RowOrigin::Boundary { order: 1 });
        let qp = assemble(obj, vec![b]).unwrap();
        assert_eq!(qp.a_eq.rows(), 1);
    }

    #[test]
    fn dump_lists_every_row() {
        let obj = Objective {
            quad: Matrix::identity(2),
            linear: vec![1.0, -1.0],
            constant: 0.5,
        };
        let mut b = RowBlock::new(false);
        b.push(
            vec![1.0, 0.0],
            0.0,
            1.0,
            RowOrigin::Velocity {
                segment: 0,
                point: 0,
            },
        );
        let qp = assemble(obj, vec![b]).unwrap();
        let mut out = Vec::new();
        qp.write_dump(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.contains("velocity[k=0,i=0]"));
        assert!(text.starts_with("# qp dim=2 eq=0 ie=1"));
    }
}
