//! Bernstein basis and Bezier algebra.
//!
//! A segment stores raw control points `c_i` on the unit interval and is
//! evaluated in time as `s(t) = h * B((t - t_start) / h)`, so the `l`-th time
//! derivative is `h^(1-l) * B^(l)(u)`.

use num_traits::Num;
use thiserror::Error;

use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BezierError {
    #[error("parameter {0} outside the unit interval")]
    OutsideUnitInterval(f64),
    #[error("basis index {i} exceeds degree {n}")]
    BadIndex { n: usize, i: usize },
    #[error("derivative order {order} exceeds degree {degree}")]
    OrderTooHigh { order: usize, degree: usize },
    #[error("time {t} outside spline range [0, {total}]")]
    OutOfRange { t: f64, total: f64 },
    #[error("segment needs at least one control point and positive duration")]
    BadSegment,
    #[error("spline segments are not contiguous at segment {0}")]
    NotContiguous(usize),
}

/// Row `n` of Pascal's triangle, built by additions only so it is exact for
/// any numeric type (integers, rationals, floats up to 2^53).
pub fn pascal_row<T: Num + Clone>(n: usize) -> Vec<T> {
    let mut row = vec![T::one()];
    for _ in 0..n {
        let mut next = Vec::with_capacity(row.len() + 1);
        next.push(T::one());
        for w in row.windows(2) {
            next.push(w[0].clone() + w[1].clone());
        }
        next.push(T::one());
        row = next;
    }
    row
}

/// `b_n^i(u) = C(n,i) u^i (1-u)^(n-i)`.
pub fn bernstein_basis<T: Scalar>(n: usize, i: usize, u: T) -> Result<T, BezierError> {
    if i > n {
        return Err(BezierError::BadIndex { n, i });
    }
    if !(u >= T::zero() && u <= T::one()) {
        return Err(BezierError::OutsideUnitInterval(u.to_f64_lossy()));
    }
    let c: T = pascal_row::<T>(n)[i];
    Ok(c * u.powi(i as i32) * (T::one() - u).powi((n - i) as i32))
}

/// Control points of the `order`-th derivative of a degree-`n` Bezier
/// polynomial on the unit interval.
pub fn hodograph<T: Scalar>(points: &[T], order: usize) -> Result<Vec<T>, BezierError> {
    let degree = points.len().saturating_sub(1);
    if points.is_empty() || order > degree {
        return Err(BezierError::OrderTooHigh { order, degree });
    }
    let mut cur = points.to_vec();
    for l in 0..order {
        let factor = T::of(degree - l);
        cur = cur.windows(2).map(|w| factor * (w[1] - w[0])).collect();
    }
    Ok(cur)
}

/// De Casteljau evaluation on the unit interval.
pub fn de_casteljau<T: Scalar>(points: &[T], u: T) -> T {
    let mut work = points.to_vec();
    let one_minus = T::one() - u;
    for level in (1..work.len()).rev() {
        for i in 0..level {
            work[i] = one_minus * work[i] + u * work[i + 1];
        }
    }
    work.first().copied().unwrap_or_else(T::zero)
}

/// `(min c, max c)`; by the convex hull property these bound `B(u)` on `[0, 1]`.
pub fn hull_bounds<T: Scalar>(points: &[T]) -> Option<(T, T)> {
    let first = *points.first()?;
    Some(
        points
            .iter()
            .fold((first, first), |(lo, hi), &c| (lo.min(c), hi.max(c))),
    )
}

/// Change of basis from monomial coefficients `p` to Bernstein control points
/// `c = M p`, with `M[r][i] = C(n-i, n-r) / C(n, n-r)` for `i <= r`.
///
/// Generic over any field so the entries can be checked exactly with
/// rationals.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix<T> {
    n: usize,
    entries: Vec<Vec<T>>,
}

impl<T: Num + Clone> TransitionMatrix<T> {
    pub fn new(n: usize) -> Self {
        let rows: Vec<Vec<T>> = (0..=n).map(pascal_row::<T>).collect();
        let binom = |a: usize, b: usize| rows[a][b].clone();
        let mut entries = vec![vec![T::zero(); n + 1]; n + 1];
        // M[n-j][i] = C(n-i, j) / C(n, j) for i + j <= n
        for i in 0..=n {
            for j in 0..=(n - i) {
                entries[n - j][i] = binom(n - i, j) / binom(n, j);
            }
        }
        Self { n, entries }
    }

    pub fn degree(&self) -> usize {
        self.n
    }

    pub fn entry(&self, row: usize, col: usize) -> T {
        self.entries[row][col].clone()
    }

    pub fn rows(&self) -> &[Vec<T>] {
        &self.entries
    }

    /// Closed-form inverse, Bernstein to monomial:
    /// `M^-1[j][i] = (-1)^(j-i) C(n, j) C(j, i)` for `i <= j`.
    pub fn inverse(&self) -> Vec<Vec<T>> {
        let n = self.n;
        let rows: Vec<Vec<T>> = (0..=n).map(pascal_row::<T>).collect();
        let mut inv = vec![vec![T::zero(); n + 1]; n + 1];
        for j in 0..=n {
            for i in 0..=j {
                let mag = rows[n][j].clone() * rows[j][i].clone();
                inv[j][i] = if (j - i) % 2 == 0 {
                    mag
                } else {
                    T::zero() - mag
                };
            }
        }
        inv
    }

    pub fn apply(&self, p: &[T]) -> Vec<T> {
        mat_vec(&self.entries, p)
    }
}

fn mat_vec<T: Num + Clone>(m: &[Vec<T>], v: &[T]) -> Vec<T> {
    m.iter()
        .map(|row| {
            row.iter()
                .zip(v)
                .fold(T::zero(), |acc, (a, b)| acc + a.clone() * b.clone())
        })
        .collect()
}

pub fn monomial_to_bezier<T: Num + Clone>(p: &[T]) -> Vec<T> {
    assert!(!p.is_empty(), "empty coefficient vector");
    TransitionMatrix::new(p.len() - 1).apply(p)
}

pub fn bezier_to_monomial<T: Num + Clone>(c: &[T]) -> Vec<T> {
    assert!(!c.is_empty(), "empty control point vector");
    mat_vec(&TransitionMatrix::new(c.len() - 1).inverse(), c)
}

/// One polynomial piece of the station curve.
#[derive(Debug, Clone, PartialEq)]
pub struct BezierSegment<T> {
    pub control: Vec<T>,
    pub duration: T,
    pub t_start: T,
}

impl<T: Scalar> BezierSegment<T> {
    pub fn new(control: Vec<T>, duration: T, t_start: T) -> Result<Self, BezierError> {
        if control.is_empty() || !(duration > T::zero()) {
            return Err(BezierError::BadSegment);
        }
        Ok(Self {
            control,
            duration,
            t_start,
        })
    }

    pub fn degree(&self) -> usize {
        self.control.len() - 1
    }

    pub fn t_end(&self) -> T {
        self.t_start + self.duration
    }

    /// `order`-th derivative at local parameter `u` in `[0, 1]`, in time units.
    pub fn eval_unit(&self, u: T, order: usize) -> T {
        if order > self.degree() {
            return T::zero();
        }
        let pts = hodograph(&self.control, order).expect("order checked");
        de_casteljau(&pts, u) * self.duration.powi(1 - order as i32)
    }

    pub fn eval(&self, t: T, order: usize) -> T {
        let u = ((t - self.t_start) / self.duration)
            .max(T::zero())
            .min(T::one());
        self.eval_unit(u, order)
    }

    /// Monomial coefficients of `B(u)` (unscaled).
    pub fn monomial(&self) -> Vec<T> {
        bezier_to_monomial(&self.control)
    }
}

/// Time-contiguous chain of Bezier segments starting at `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct BezierSpline<T> {
    pub segments: Vec<BezierSegment<T>>,
}

impl<T: Scalar> BezierSpline<T> {
    pub fn new(segments: Vec<BezierSegment<T>>) -> Result<Self, BezierError> {
        if segments.is_empty() {
            return Err(BezierError::BadSegment);
        }
        for (k, w) in segments.windows(2).enumerate() {
            let gap = (w[0].t_end() - w[1].t_start).abs();
            if gap > T::lit(1e-9) * (T::one() + w[1].t_start.abs()) {
                return Err(BezierError::NotContiguous(k + 1));
            }
        }
        Ok(Self { segments })
    }

    pub fn start_time(&self) -> T {
        self.segments[0].t_start
    }

    pub fn end_time(&self) -> T {
        self.segments
            .last()
            .map(|s| s.t_end())
            .unwrap_or_else(T::zero)
    }

    pub fn total_duration(&self) -> T {
        self.segments.iter().map(|s| s.duration).sum()
    }

    /// Index of the segment covering `t`: right-continuous at junctions, the
    /// last segment at the final time.
    pub fn segment_index(&self, t: T) -> Option<usize> {
        let tol = T::lit(1e-12) * (T::one() + self.end_time().abs());
        if t < self.start_time() - tol || t > self.end_time() + tol {
            return None;
        }
        let idx = self.segments.partition_point(|s| s.t_start <= t);
        Some(idx.saturating_sub(1))
    }

    /// `order`-th time derivative of the station curve at `t`.
    pub fn evaluate(&self, t: T, order: usize) -> Result<T, BezierError> {
        let k = self.segment_index(t).ok_or(BezierError::OutOfRange {
            t: t.to_f64_lossy(),
            total: self.end_time().to_f64_lossy(),
        })?;
        Ok(self.segments[k].eval(t, order))
    }
}
