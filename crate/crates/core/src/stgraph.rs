//! The station-time plane: obstacle projections and the DP search grid.

use thiserror::Error;

use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StGraphError {
    #[error("obstacle time window [{t_enter}, {t_exit}] is empty or negative")]
    BadWindow { t_enter: f64, t_exit: f64 },
    #[error("obstacle block length must be positive, got {0}")]
    BadBlockLength(f64),
    #[error("non-finite obstacle field")]
    NonFinite,
    #[error("grid parameter {name} must be positive, got {value}")]
    BadGridParameter { name: &'static str, value: f64 },
    #[error("horizon {horizon} is not a multiple of the time step {dt1}")]
    HorizonNotMultiple { horizon: f64, dt1: f64 },
    #[error("boundary samples block the whole station range at t = {t}")]
    FullyBlocked { t: f64 },
    #[error("lower boundary {lower} is not below upper boundary {upper} at t = {t}")]
    InvertedBoundary { t: f64, lower: f64, upper: f64 },
}

/// Closed station interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval<T> {
    pub lo: T,
    pub hi: T,
}

impl<T: Scalar> Interval<T> {
    pub fn contains(&self, s: T) -> bool {
        s >= self.lo && s <= self.hi
    }

    /// Distance from `s` to the interval, zero inside.
    pub fn distance(&self, s: T) -> T {
        if s < self.lo {
            self.lo - s
        } else if s > self.hi {
            s - self.hi
        } else {
            T::zero()
        }
    }
}

/// One predicted obstacle on the S-T plane: a parallelogram whose lower edge
/// moves at constant speed and whose side along the station axis is
/// `block_length`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObstacleTrace<T> {
    pub t_enter: T,
    pub t_exit: T,
    /// Lower edge station at `t_enter`.
    pub s_at_enter: T,
    pub speed: T,
    /// Obstacle length plus half the ego length.
    pub block_length: T,
}

impl<T: Scalar> ObstacleTrace<T> {
    pub fn new(
        t_enter: T,
        t_exit: T,
        s_at_enter: T,
        speed: T,
        block_length: T,
    ) -> Result<Self, StGraphError> {
        let trace = Self {
            t_enter,
            t_exit,
            s_at_enter,
            speed,
            block_length,
        };
        trace.validate()?;
        Ok(trace)
    }

    pub fn validate(&self) -> Result<(), StGraphError> {
        let fields = [
            self.t_enter,
            self.t_exit,
            self.s_at_enter,
            self.speed,
            self.block_length,
        ];
        if fields.iter().any(|x| !x.is_finite()) {
            return Err(StGraphError::NonFinite);
        }
        if self.t_enter < T::zero() || self.t_exit <= self.t_enter {
            return Err(StGraphError::BadWindow {
                t_enter: self.t_enter.to_f64_lossy(),
                t_exit: self.t_exit.to_f64_lossy(),
            });
        }
        if self.block_length <= T::zero() {
            return Err(StGraphError::BadBlockLength(
                self.block_length.to_f64_lossy(),
            ));
        }
        Ok(())
    }

    pub fn s_low(&self, t: T) -> T {
        self.s_at_enter + self.speed * (t - self.t_enter)
    }

    pub fn s_high(&self, t: T) -> T {
        self.s_low(t) + self.block_length
    }

    pub fn is_active(&self, t: T) -> bool {
        t >= self.t_enter && t <= self.t_exit
    }

    /// Blocked station interval at `t`, or `None` outside the time window.
    pub fn blocked_interval(&self, t: T) -> Option<Interval<T>> {
        self.is_active(t).then(|| Interval {
            lo: self.s_low(t),
            hi: self.s_high(t),
        })
    }

    /// Widens the time window outward to the enclosing multiples of `step`,
    /// extrapolating the edges, clipped to `[0, horizon]`.
    ///
    /// Bounds sampled on a `step` grid and joined linearly then never cut
    /// into the original parallelogram between samples.
    pub fn snapped(&self, step: T, horizon: T) -> Self {
        let tol = T::lit(1e-9);
        let enter = ((self.t_enter / step) + tol).floor() * step;
        let exit = ((self.t_exit / step) - tol).ceil() * step;
        let enter = enter.max(T::zero());
        let exit = exit.min(horizon).max(enter + step);
        Self {
            t_enter: enter,
            t_exit: exit,
            s_at_enter: self.s_low(enter),
            ..*self
        }
    }
}

/// Uniform search grid over `[0, horizon] x [0, s_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StGrid<T> {
    pub horizon: T,
    pub dt1: T,
    pub ds: T,
    pub s_max: T,
}

impl<T: Scalar> StGrid<T> {
    pub fn new(horizon: T, dt1: T, ds: T, s_max: T) -> Result<Self, StGraphError> {
        for (name, value) in [
            ("horizon", horizon),
            ("dt1", dt1),
            ("ds", ds),
            ("s_max", s_max),
        ] {
            if !(value > T::zero()) || !value.is_finite() {
                return Err(StGraphError::BadGridParameter {
                    name,
                    value: value.to_f64_lossy(),
                });
            }
        }
        let steps = horizon / dt1;
        if (steps - steps.round()).abs() > T::lit(1e-6) || steps.round() < T::one() {
            return Err(StGraphError::HorizonNotMultiple {
                horizon: horizon.to_f64_lossy(),
                dt1: dt1.to_f64_lossy(),
            });
        }
        Ok(Self {
            horizon,
            dt1,
            ds,
            s_max,
        })
    }

    /// Number of coarse time steps; the grid has `columns() + 1` time columns.
    pub fn columns(&self) -> usize {
        (self.horizon / self.dt1).round().to_usize().unwrap_or(0)
    }

    /// Number of station steps; the grid has `rows() + 1` station rows.
    pub fn rows(&self) -> usize {
        (self.s_max / self.ds + T::lit(1e-9))
            .floor()
            .to_usize()
            .unwrap_or(0)
    }

    pub fn time(&self, column: usize) -> T {
        T::of(column) * self.dt1
    }

    pub fn station(&self, row: usize) -> T {
        T::of(row) * self.ds
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialState<T> {
    pub s0: T,
    pub v0: T,
    pub a0: T,
}

/// Whether grid node `(column, row)` lies inside any obstacle's closed blocked interval.
pub fn node_blocked<T: Scalar>(
    grid: &StGrid<T>,
    obstacles: &[ObstacleTrace<T>],
    column: usize,
    row: usize,
) -> bool {
    let t = grid.time(column);
    let s = grid.station(row);
    obstacles
        .iter()
        .any(|o| o.blocked_interval(t).is_some_and(|iv| iv.contains(s)))
}

/// Conservative piecewise-linear envelope of an obstacle with curved edges.
///
/// `lower` and `upper` are the obstacle's station bounds; they are sampled at
/// `t_start + k * step` and each chord between samples becomes one
/// parallelogram. The chord slope is taken from the lower edge, then the lower
/// line is pushed down and the upper line up until both envelop the curve on a
/// dense sub-sampling of the piece. Adjacent pieces that coincide are fused.
pub fn linearize_boundaries<T, L, U>(
    lower: L,
    upper: U,
    t_start: T,
    t_end: T,
    step: T,
    s_max: T,
) -> Result<Vec<ObstacleTrace<T>>, StGraphError>
where
    T: Scalar,
    L: Fn(T) -> T,
    U: Fn(T) -> T,
{
    const REFINE: usize = 1000;
    if !(step > T::zero()) {
        return Err(StGraphError::BadGridParameter {
            name: "step",
            value: step.to_f64_lossy(),
        });
    }
    if !(t_end > t_start) {
        return Err(StGraphError::BadWindow {
            t_enter: t_start.to_f64_lossy(),
            t_exit: t_end.to_f64_lossy(),
        });
    }
    let pieces = ((t_end - t_start) / step - T::lit(1e-9))
        .ceil()
        .to_usize()
        .unwrap_or(1)
        .max(1);
    let knots: Vec<T> = (0..=pieces)
        .map(|k| (t_start + T::of(k) * step).min(t_end))
        .collect();

    for &t in &knots {
        let (lo, hi) = (lower(t), upper(t));
        if !lo.is_finite() || !hi.is_finite() {
            return Err(StGraphError::NonFinite);
        }
        if lo >= hi {
            return Err(StGraphError::InvertedBoundary {
                t: t.to_f64_lossy(),
                lower: lo.to_f64_lossy(),
                upper: hi.to_f64_lossy(),
            });
        }
        if lo <= T::zero() && hi >= s_max {
            return Err(StGraphError::FullyBlocked {
                t: t.to_f64_lossy(),
            });
        }
    }

    let mut out: Vec<ObstacleTrace<T>> = Vec::with_capacity(pieces);
    for w in knots.windows(2) {
        let (ta, tb) = (w[0], w[1]);
        let slope = (lower(tb) - lower(ta)) / (tb - ta);
        let chord = |t: T| lower(ta) + slope * (t - ta);
        let mut down = T::zero();
        let mut up = T::zero();
        for r in 0..=REFINE {
            let t = ta + (tb - ta) * T::of(r) / T::of(REFINE);
            down = down.max(chord(t) - lower(t));
            up = up.max(upper(t) - chord(t));
        }
        let piece = ObstacleTrace {
            t_enter: ta,
            t_exit: tb,
            s_at_enter: lower(ta) - down,
            speed: slope,
            block_length: up + down,
        };
        match out.last_mut() {
            Some(prev) if same_lines(prev, &piece) => prev.t_exit = tb,
            _ => out.push(piece),
        }
    }
    Ok(out)
}

fn same_lines<T: Scalar>(a: &ObstacleTrace<T>, b: &ObstacleTrace<T>) -> bool {
    let tol = T::lit(1e-9);
    let scale = T::one() + a.s_low(b.t_enter).abs();
    (a.speed - b.speed).abs() <= tol * (T::one() + a.speed.abs())
        && (a.s_low(b.t_enter) - b.s_at_enter).abs() <= tol * scale
        && (a.block_length - b.block_length).abs() <= tol * scale
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moving() -> ObstacleTrace<f64> {
        ObstacleTrace::new(1.0, 5.0, 0.0, 4.0, 6.0).unwrap()
    }

    #[test]
    fn stationary_interval() {
        let o = ObstacleTrace::new(0.0, 7.0, 10.0, 0.0, 5.0).unwrap();
        assert_eq!(
            o.blocked_interval(3.0),
            Some(Interval { lo: 10.0, hi: 15.0 })
        );
    }

    #[test]
    fn interval_outside_window() {
        assert_eq!(moving().blocked_interval(0.5), None);
    }

    #[test]
    fn interval_moving() {
        assert_eq!(
            moving().blocked_interval(3.0),
            Some(Interval { lo: 8.0, hi: 14.0 })
        );
    }

    #[test]
    fn rejects_bad_traces() {
        assert!(ObstacleTrace::new(2.0, 1.0, 0.0, 0.0, 1.0).is_err());
        assert!(ObstacleTrace::new(0.0, 1.0, 0.0, 0.0, 0.0).is_err());
        assert!(ObstacleTrace::new(0.0, f64::NAN, 0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn node_blocking() {
        let grid = StGrid::new(7.0, 1.0, 0.5, 70.0).unwrap();
        assert!(!node_blocked(&grid, &[], 2, 24));
        let wall = ObstacleTrace::new(0.0, 7.0, 10.0, 0.0, 5.0).unwrap();
        assert!(node_blocked(&grid, &[wall], 2, 24));
        // s_high(3) = 14 is on the closed boundary
        assert!(node_blocked(&grid, &[moving()], 3, 28));
        assert!(!node_blocked(&grid, &[moving()], 3, 29));
    }

    #[test]
    fn grid_validation() {
        assert!(StGrid::new(7.0, 1.0, 0.5, 140.0).is_ok());
        assert!(StGrid::new(7.0, 2.0, 0.5, 140.0).is_err());
        assert!(StGrid::new(7.0, 1.0, 0.0, 140.0).is_err());
        let g = StGrid::new(7.0, 1.0, 0.5, 140.0).unwrap();
        assert_eq!(g.columns(), 7);
        assert_eq!(g.rows(), 280);
    }

    #[test]
    fn snapping_widens_window() {
        let o = ObstacleTrace::new(1.25f64, 3.33, 10.0, 2.0, 4.0).unwrap();
        let s = o.snapped(0.1, 7.0);
        assert!((s.t_enter - 1.2).abs() < 1e-12);
        assert!((s.t_exit - 3.4).abs() < 1e-12);
        assert!((s.s_low(2.0) - o.s_low(2.0)).abs() < 1e-12);
        let aligned = ObstacleTrace::new(1.0f64, 3.0, 10.0, 2.0, 4.0)
            .unwrap()
            .snapped(0.1, 7.0);
        assert!((aligned.t_enter - 1.0).abs() < 1e-12 && (aligned.t_exit - 3.0).abs() < 1e-12);
    }

    #[test]
    fn linear_bounds_stay_one_piece() {
        let o = moving();
        let pieces =
            linearize_boundaries(|t| o.s_low(t), |t| o.s_high(t), 1.0, 5.0, 0.5, 100.0).unwrap();
        assert_eq!(pieces.len(), 1);
        let p = pieces[0];
        assert!((p.speed - 4.0).abs() < 1e-12);
        assert!((p.s_at_enter - 0.0).abs() < 1e-9);
        assert!((p.block_length - 6.0).abs() < 1e-9);
        assert!((p.t_exit - 5.0).abs() < 1e-12);
    }

    fn assert_contains(
        pieces: &[ObstacleTrace<f64>],
        lo: impl Fn(f64) -> f64,
        hi: impl Fn(f64) -> f64,
        t0: f64,
        t1: f64,
    ) {
        let n = ((t1 - t0) / 1e-3).round() as usize;
        for k in 0..=n {
            let t = t0 + k as f64 * 1e-3;
            let p = pieces
                .iter()
                .find(|p| t >= p.t_enter - 1e-12 && t <= p.t_exit + 1e-12)
                .expect("covered");
            assert!(p.s_low(t) <= lo(t) + 1e-9, "lower not conservative at {t}");
            assert!(p.s_high(t) >= hi(t) - 1e-9, "upper not conservative at {t}");
        }
    }

    #[test]
    fn parabolic_lower_bound() {
        let lo = |t: f64| t * t;
        let hi = |t: f64| t * t + 4.0;
        let pieces = linearize_boundaries(lo, hi, 0.0, 2.0, 1.0, 100.0).unwrap();
        assert_eq!(pieces.len(), 2);
        assert!((pieces[0].speed - 1.0).abs() < 1e-12);
        // chord 0->1 overshoots t^2 by at most 1/4 at t = 0.5
        assert!((pieces[0].s_at_enter + 0.25).abs() < 1e-9);
        assert_contains(&pieces, lo, hi, 0.0, 2.0);
    }

    #[test]
    fn constant_acceleration_obstacle() {
        let lo = |t: f64| 5.0 + 2.0 * t + 0.5 * t * t;
        let hi = |t: f64| lo(t) + 5.0;
        let pieces = linearize_boundaries(lo, hi, 0.0, 2.0, 1.0, 100.0).unwrap();
        assert_eq!(pieces.len(), 2);
        assert_contains(&pieces, lo, hi, 0.0, 2.0);
    }

    #[test]
    fn rejects_full_blockage() {
        let err = linearize_boundaries(|_| -1.0, |_| 200.0, 0.0, 1.0, 0.5, 100.0).unwrap_err();
        assert!(matches!(err, StGraphError::FullyBlocked { .. }));
    }
}
