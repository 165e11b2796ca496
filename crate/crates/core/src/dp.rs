//! Dynamic-programming search on the S-T grid and extraction of the convex
//! station bounds implied by its yield/overtake decisions.
//!
//! States are grid nodes `(t_i, s_j)` augmented with the row of the parent
//! node, so the acceleration of each transition is known exactly and the
//! recursion returns the true minimum over all admissible paths.

use thiserror::Error;

use crate::stgraph::{InitialState, Interval, ObstacleTrace, StGrid};
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DpError {
    #[error("no feasible path: {0}")]
    NoFeasiblePath(String),
    #[error("invalid search parameter {name} = {value}")]
    BadParameter { name: &'static str, value: f64 },
    #[error("fine step {dt2} does not divide coarse step {dt1}")]
    BadFineStep { dt1: f64, dt2: f64 },
    #[error("heuristic passes through obstacle {obstacle} at t = {t}")]
    CrossesObstacle { obstacle: usize, t: f64 },
    #[error("empty station interval at stamp {index} (t = {t}): lb {lb} >= ub {ub}")]
    EmptyInterval {
        index: usize,
        t: f64,
        lb: f64,
        ub: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpLimits<T> {
    pub v_max: T,
    pub a_max: T,
    /// Number of sub-samples per coarse step used to check that each
    /// transition stays clear of obstacles (the fine step count N).
    pub edge_samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpWeights<T> {
    pub w_obs: T,
    pub w_v: T,
    pub w_a: T,
    pub w_end: T,
    /// Distance below which obstacle proximity is penalized.
    pub d_safe: T,
    /// Cruise speed tracked by the edge cost.
    pub cruise_speed: T,
}

impl<T: Scalar> DpWeights<T> {
    pub fn with_cruise_speed(cruise_speed: T) -> Self {
        Self {
            w_obs: T::one(),
            w_v: T::lit(0.1),
            w_a: T::lit(0.5),
            w_end: T::one(),
            d_safe: T::lit(2.0),
            cruise_speed,
        }
    }
}

/// Linear interpolant `s = slope * (t - t_j) + intercept` on one coarse interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearPiece<T> {
    pub slope: T,
    pub intercept: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeuristicProfile<T> {
    pub dt1: T,
    /// `(t_j, s_j)` at every coarse stamp from 0 to the horizon.
    pub waypoints: Vec<(T, T)>,
    pub segments: Vec<LinearPiece<T>>,
    /// Total DP cost of the path.
    pub cost: T,
}

impl<T: Scalar> HeuristicProfile<T> {
    pub fn from_waypoints(dt1: T, waypoints: Vec<(T, T)>, cost: T) -> Self {
        let segments = waypoints
            .windows(2)
            .map(|w| LinearPiece {
                slope: (w[1].1 - w[0].1) / dt1,
                intercept: w[0].1,
            })
            .collect();
        Self {
            dt1,
            waypoints,
            segments,
            cost,
        }
    }

    pub fn horizon(&self) -> T {
        self.waypoints.last().map_or(T::zero(), |w| w.0)
    }

    /// Interpolated reference station `s^r(t)`, clamped to the horizon.
    pub fn station_at(&self, t: T) -> T {
        if self.segments.is_empty() {
            return self.waypoints[0].1;
        }
        let t = t.max(T::zero()).min(self.horizon());
        let j = (t / self.dt1)
            .floor()
            .to_usize()
            .unwrap_or(0)
            .min(self.segments.len() - 1);
        let piece = self.segments[j];
        piece.intercept + piece.slope * (t - self.waypoints[j].0)
    }
}

/// Station bounds at every fine stamp `i * dt2`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundsProfile<T> {
    pub dt2: T,
    pub lb: Vec<T>,
    pub ub: Vec<T>,
}

impl<T: Scalar> BoundsProfile<T> {
    pub fn nums(&self) -> usize {
        self.lb.len()
    }

    pub fn time(&self, index: usize) -> T {
        T::of(index) * self.dt2
    }
}

fn obstacle_cost<T: Scalar>(
    obstacles: &[ObstacleTrace<T>],
    t: T,
    s: T,
    weights: &DpWeights<T>,
) -> Option<T> {
    let mut cost = T::zero();
    for iv in obstacles.iter().filter_map(|o| o.blocked_interval(t)) {
        if iv.contains(s) {
            return None;
        }
        let gap = (weights.d_safe - iv.distance(s)).max(T::zero());
        cost += weights.w_obs * gap * gap;
    }
    Some(cost)
}

/// Whether the straight transition from `s_a` at coarse column `col` to `s_b`
/// at the next column avoids every obstacle at `samples + 1` evenly spaced stamps and never
/// jumps across one between stamps.
fn transition_clear<T: Scalar>(
    obstacles: &[ObstacleTrace<T>],
    col: usize,
    s_a: T,
    s_b: T,
    dt1: T,
    samples: usize,
) -> bool {
    let dt2 = dt1 / T::of(samples);
    let mut prev: Vec<Option<(T, Interval<T>)>> = vec![None; obstacles.len()];
    for m in 0..=samples {
        let frac = T::of(m) / T::of(samples);
        // Same stamp times as bound extraction, bit for bit.
        let t = T::of(col * samples + m) * dt2;
        let s = s_a + (s_b - s_a) * frac;
        for (o, slot) in obstacles.iter().zip(prev.iter_mut()) {
            let cur = o.blocked_interval(t);
            if let Some(iv) = cur {
                if iv.contains(s) {
                    return false;
                }
                if let Some((sp, ivp)) = *slot {
                    let jumped_up = sp < ivp.lo && s > iv.hi;
                    let jumped_down = sp > ivp.hi && s < iv.lo;
                    if jumped_up || jumped_down {
                        return false;
                    }
                }
            }
            *slot = cur.map(|iv| (s, iv));
        }
    }
    true
}

fn expected_terminal<T: Scalar>(obstacles: &[ObstacleTrace<T>], grid: &StGrid<T>, s: T) -> T {
    let mut s = s.max(T::zero()).min(grid.s_max);
    for iv in obstacles
        .iter()
        .filter_map(|o| o.blocked_interval(grid.horizon))
    {
        if iv.contains(s) {
            s = if s - iv.lo <= iv.hi - s { iv.lo } else { iv.hi };
        }
    }
    s
}

/// Cost of a single path, scored the way [`search`] scores it. `rows[c - 1]`
/// is the grid row at column `c`; the path starts at the exact initial
/// station. `None` if the path breaks a limit or meets an obstacle.
pub fn path_cost<T: Scalar>(
    grid: &StGrid<T>,
    obstacles: &[ObstacleTrace<T>],
    init: &InitialState<T>,
    limits: &DpLimits<T>,
    weights: &DpWeights<T>,
    rows: &[usize],
) -> Option<T> {
    let cols = grid.columns();
    if rows.len() != cols || limits.edge_samples == 0 {
        return None;
    }
    let dt1 = grid.dt1;
    let tol = T::lit(1e-9);
    let s_target = expected_terminal(
        obstacles,
        grid,
        init.s0 + weights.cruise_speed * grid.horizon,
    );
    let mut total = T::zero();
    let mut prev_s = init.s0;
    let mut prev_v: Option<T> = None;
    for (c, &row) in (1..=cols).zip(rows) {
        if row > grid.rows() {
            return None;
        }
        let s = grid.station(row);
        let v = (s - prev_s) / dt1;
        if v < -tol || v > limits.v_max + tol {
            return None;
        }
        let dv = match prev_v {
            None => T::lit(2.0) * (v - init.v0),
            Some(pv) => v - pv,
        };
        if dv.abs() > limits.a_max * dt1 + tol {
            return None;
        }
        if !transition_clear(obstacles, c - 1, prev_s, s, dt1, limits.edge_samples) {
            return None;
        }
        let a = dv / dt1;
        let e = v - weights.cruise_speed;
        total += (weights.w_v * e * e + weights.w_a * a * a) * dt1;
        total += obstacle_cost(obstacles, grid.time(c), s, weights)?;
        if c == cols {
            let e = s - s_target;
            total += weights.w_end * e * e;
        }
        prev_s = s;
        prev_v = Some(v);
    }
    Some(total)
}

/// Minimum-cost monotone path from `(0, s0)` to the last time column.
pub fn search<T: Scalar>(
    grid: &StGrid<T>,
    obstacles: &[ObstacleTrace<T>],
    init: &InitialState<T>,
    limits: &DpLimits<T>,
    weights: &DpWeights<T>,
) -> Result<HeuristicProfile<T>, DpError> {
    for (name, value) in [("v_max", limits.v_max), ("a_max", limits.a_max)] {
        if !(value > T::zero()) {
            return Err(DpError::BadParameter {
                name,
                value: value.to_f64_lossy(),
            });
        }
    }
    if limits.edge_samples == 0 {
        return Err(DpError::BadParameter {
            name: "edge_samples",
            value: 0.0,
        });
    }
    if obstacles.iter().any(|o| {
        o.blocked_interval(T::zero())
            .is_some_and(|iv| iv.contains(init.s0))
    }) {
        return Err(DpError::NoFeasiblePath("start node is blocked".into()));
    }

    let cols = grid.columns();
    let rows = grid.rows() + 1;
    let dt1 = grid.dt1;
    let tol = T::lit(1e-9);
    let max_delta = ((limits.v_max * dt1 / grid.ds) + tol)
        .floor()
        .to_usize()
        .unwrap_or(0);
    let width = max_delta + 1;
    let dv_max = limits.a_max * dt1 + tol;
    let s_target = expected_terminal(
        obstacles,
        grid,
        init.s0 + weights.cruise_speed * grid.horizon,
    );

    let node_cost = |col: usize, row: usize| -> Option<T> {
        let t = grid.time(col);
        let s = grid.station(row);
        let mut c = obstacle_cost(obstacles, t, s, weights)?;
        if col == cols {
            let e = s - s_target;
            c += weights.w_end * e * e;
        }
        Some(c)
    };
    let edge_cost = |v_in: T, v: T| -> T {
        let dv = v - weights.cruise_speed;
        let a = (v - v_in) / dt1;
        (weights.w_v * dv * dv + weights.w_a * a * a) * dt1
    };

    let inf = T::infinity();
    // cost[col][row * width + delta]; delta = row - parent_row, except column 1
    // where the parent is the exact start station and only slot 0 is used.
    let mut cost: Vec<Vec<T>> = vec![vec![inf; rows * width]; cols + 1];
    let mut parent: Vec<Vec<usize>> = vec![vec![usize::MAX; rows * width]; cols + 1];
    let velocity = |col: usize, row: usize, delta: usize| -> T {
        if col == 1 {
            (grid.station(row) - init.s0) / dt1
        } else {
            T::of(delta) * grid.ds / dt1
        }
    };

    if cols == 0 {
        return Err(DpError::NoFeasiblePath("grid has no time steps".into()));
    }
    // Starting at speed v0, constant acceleration a covers v0 dt + a dt^2 / 2,
    // so the first edge's acceleration is twice (v - v0) / dt1.
    let two = T::lit(2.0);
    for row in 0..rows {
        let s = grid.station(row);
        let v = (s - init.s0) / dt1;
        if v < -tol || v > limits.v_max + tol || two * (v - init.v0).abs() > dv_max {
            continue;
        }
        let Some(nc) = node_cost(1, row) else {
            continue;
        };
        if !transition_clear(obstacles, 0, init.s0, s, dt1, limits.edge_samples) {
            continue;
        }
        cost[1][row * width] = nc + edge_cost(init.v0 - (v - init.v0), v);
    }

    for col in 2..=cols {
        let (done, rest) = cost.split_at_mut(col);
        let prev_cost = &done[col - 1];
        let cur_cost = &mut rest[0];
        let cur_parent = &mut parent[col];
        let node_cache: Vec<Option<T>> = (0..rows).map(|r| node_cost(col, r)).collect();
        for k in 0..rows {
            let slots = &prev_cost[k * width..(k + 1) * width];
            if slots.iter().all(|c| c.is_infinite()) {
                continue;
            }
            let s_k = grid.station(k);
            let clear: Vec<bool> = (0..width)
                .map(|d| {
                    k + d < rows
                        && node_cache[k + d].is_some()
                        && transition_clear(
                            obstacles,
                            col - 1,
                            s_k,
                            grid.station(k + d),
                            dt1,
                            limits.edge_samples,
                        )
                })
                .collect();
            for (dp, &c_prev) in slots.iter().enumerate() {
                if c_prev.is_infinite() {
                    continue;
                }
                let v_in = velocity(col - 1, k, dp);
                for (d, _) in clear.iter().enumerate().filter(|(_, &ok)| ok) {
                    let v = T::of(d) * grid.ds / dt1;
                    if (v - v_in).abs() > dv_max {
                        continue;
                    }
                    let j = k + d;
                    let cand = c_prev + edge_cost(v_in, v) + node_cache[j].expect("checked");
                    let slot = j * width + d;
                    if cand <= cur_cost[slot] {
                        cur_cost[slot] = cand;
                        cur_parent[slot] = dp;
                    }
                }
            }
        }
    }

    let last = &cost[cols];
    let mut best: Option<(usize, T)> = None;
    for (slot, &c) in last.iter().enumerate() {
        if c.is_finite() && best.is_none_or(|(_, b)| c <= b) {
            best = Some((slot, c));
        }
    }
    let Some((mut slot, total)) = best else {
        return Err(DpError::NoFeasiblePath(
            "every node at the horizon is unreachable".into(),
        ));
    };

    let mut stations = vec![T::zero(); cols + 1];
    stations[0] = init.s0;
    for col in (1..=cols).rev() {
        let row = slot / width;
        let delta = slot % width;
        stations[col] = grid.station(row);
        if col > 1 {
            let parent_row = row - delta;
            slot = parent_row * width + parent[col][slot];
        }
    }
    let waypoints = stations
        .into_iter()
        .enumerate()
        .map(|(c, s)| (grid.time(c), s))
        .collect();
    Ok(HeuristicProfile::from_waypoints(dt1, waypoints, total))
}

/// Station bounds at every fine stamp, keeping for each obstacle only the
/// side the heuristic chose.
pub fn extract_bounds<T: Scalar>(
    profile: &HeuristicProfile<T>,
    obstacles: &[ObstacleTrace<T>],
    dt2: T,
    s_max: T,
) -> Result<BoundsProfile<T>, DpError> {
    let ratio = profile.dt1 / dt2;
    let n = ratio.round();
    if !(dt2 > T::zero()) || n < T::one() || (ratio - n).abs() > T::lit(1e-6) {
        return Err(DpError::BadFineStep {
            dt1: profile.dt1.to_f64_lossy(),
            dt2: dt2.to_f64_lossy(),
        });
    }
    let per_coarse = n.to_usize().unwrap_or(1);
    let nums = profile.segments.len() * per_coarse + 1;

    #[derive(Clone, Copy, PartialEq)]
    enum Side {
        Above,
        Below,
    }
    let mut sides: Vec<Option<Side>> = vec![None; obstacles.len()];
    let mut lb = vec![T::zero(); nums];
    let mut ub = vec![s_max; nums];
    for i in 0..nums {
        let t = T::of(i) * dt2;
        let s = profile.station_at(t);
        for (idx, o) in obstacles.iter().enumerate() {
            let Some(iv) = o.blocked_interval(t) else {
                continue;
            };
            let side = if s > iv.hi {
                Side::Above
            } else if s < iv.lo {
                Side::Below
            } else {
                return Err(DpError::CrossesObstacle {
                    obstacle: idx,
                    t: t.to_f64_lossy(),
                });
            };
            match sides[idx] {
                Some(prev) if prev != side => {
                    return Err(DpError::CrossesObstacle {
                        obstacle: idx,
                        t: t.to_f64_lossy(),
                    });
                }
                _ => sides[idx] = Some(side),
            }
            match side {
                Side::Above => lb[i] = lb[i].max(iv.hi),
                Side::Below => ub[i] = ub[i].min(iv.lo),
            }
        }
        if lb[i] >= ub[i] {
            return Err(DpError::EmptyInterval {
                index: i,
                t: t.to_f64_lossy(),
                lb: lb[i].to_f64_lossy(),
                ub: ub[i].to_f64_lossy(),
            });
        }
    }
    Ok(BoundsProfile { dt2, lb, ub })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn limits() -> DpLimits<f64> {
        DpLimits {
            v_max: 20.0,
            a_max: 4.0,
            edge_samples: 10,
        }
    }

    #[test]
    fn empty_road_tracks_cruise_speed() {
        let grid = StGrid::new(7.0, 1.0, 0.5, 140.0).unwrap();
        let init = InitialState {
            s0: 0.0,
            v0: 10.0,
            a0: 0.0,
        };
        let p = search(
            &grid,
            &[],
            &init,
            &limits(),
            &DpWeights::with_cruise_speed(10.0),
        )
        .unwrap();
        for (j, &(t, s)) in p.waypoints.iter().enumerate() {
            assert_eq!(t, j as f64);
            assert!((s - 10.0 * j as f64).abs() < 1e-12);
        }
        assert!(p.cost.abs() < 1e-12);
        for seg in &p.segments {
            assert!((seg.slope - 10.0).abs() < 1e-12);
        }
    }

    #[test]
    fn first_step_respects_acceleration_from_v0() {
        let grid = StGrid::new(7.0, 1.0, 0.5, 140.0).unwrap();
        let init = InitialState {
            s0: 0.0,
            v0: 0.0,
            a0: 0.0,
        };
        let p = search(
            &grid,
            &[],
            &init,
            &limits(),
            &DpWeights::with_cruise_speed(10.0),
        )
        .unwrap();
        // a = 4 from rest covers 2 m in the first second
        assert!(p.waypoints[1].1 <= 2.0 + 1e-12, "{:?}", p.waypoints);
        assert!(p.waypoints[1].1 > 0.0);
    }

    #[test]
    fn blocked_start_has_no_path() {
        let grid = StGrid::new(7.0, 1.0, 0.5, 140.0).unwrap();
        let wall = ObstacleTrace::new(0.0, 7.0, -1.0, 0.0, 200.0).unwrap();
        let init = InitialState {
            s0: 0.0,
            v0: 10.0,
            a0: 0.0,
        };
        let err = search(
            &grid,
            &[wall],
            &init,
            &limits(),
            &DpWeights::with_cruise_speed(10.0),
        )
        .unwrap_err();
        assert!(matches!(err, DpError::NoFeasiblePath(_)));
    }

    #[test]
    fn interpolant_matches_waypoints() {
        let p = HeuristicProfile::from_waypoints(
            1.0f64,
            vec![(0.0, 0.0), (1.0, 4.0), (2.0, 10.0)],
            0.0,
        );
        assert_eq!(
            p.segments[1],
            LinearPiece {
                slope: 6.0,
                intercept: 4.0
            }
        );
        assert!((p.station_at(1.5) - 7.0).abs() < 1e-12);
        assert!((p.station_at(2.0) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn bounds_without_obstacles() {
        let p =
            HeuristicProfile::from_waypoints(1.0, vec![(0.0, 0.0), (1.0, 10.0), (2.0, 20.0)], 0.0);
        let b = extract_bounds(&p, &[], 0.1, 50.0).unwrap();
        assert_eq!(b.nums(), 21);
        assert!(b.lb.iter().all(|&x| x == 0.0) && b.ub.iter().all(|&x| x == 50.0));
    }

    #[test]
    fn bounds_below_single_obstacle() {
        let p = HeuristicProfile::from_waypoints(
            1.0f64,
            vec![(0.0, 0.0), (1.0, 5.0), (2.0, 10.0), (3.0, 15.0)],
            0.0,
        );
        let o = ObstacleTrace::new(1.0, 2.0, 20.0, 3.0, 5.0).unwrap();
        let b = extract_bounds(&p, &[o], 0.1, 80.0).unwrap();
        for i in 0..b.nums() {
            let t = b.time(i);
            let expect = o.blocked_interval(t).map_or(80.0, |iv| iv.lo);
            assert!((b.ub[i] - expect).abs() < 1e-12, "stamp {i}");
            assert_eq!(b.lb[i], 0.0);
        }
    }

    #[test]
    fn bounds_between_two_obstacles() {
        let p = HeuristicProfile::from_waypoints(
            1.0f64,
            vec![(0.0, 0.0), (1.0, 10.0), (2.0, 20.0), (3.0, 30.0)],
            0.0,
        );
        let behind = ObstacleTrace::new(0.0, 3.0, -10.0, 9.0, 5.0).unwrap();
        let ahead = ObstacleTrace::new(0.5, 3.0, 12.0, 8.0, 5.0).unwrap();
        let b = extract_bounds(&p, &[behind, ahead], 0.1, 100.0).unwrap();
        for i in 0..b.nums() {
            let t = b.time(i);
            assert!((b.lb[i] - behind.s_high(t).max(0.0)).abs() < 1e-12);
            let expect_ub = ahead.blocked_interval(t).map_or(100.0, |iv| iv.lo);
            assert!((b.ub[i] - expect_ub).abs() < 1e-12);
            assert!(b.lb[i] < b.ub[i]);
        }
    }

    #[test]
    fn crossing_heuristic_is_rejected() {
        let p =
            HeuristicProfile::from_waypoints(1.0, vec![(0.0, 0.0), (1.0, 10.0), (2.0, 20.0)], 0.0);
        let o = ObstacleTrace::new(0.0, 2.0, 8.0, 0.0, 4.0).unwrap();
        assert!(matches!(
            extract_bounds(&p, &[o], 0.1, 50.0),
            Err(DpError::CrossesObstacle { .. })
        ));
    }

    #[test]
    fn fine_step_must_divide() {
        let p = HeuristicProfile::from_waypoints(1.0, vec![(0.0, 0.0), (1.0, 10.0)], 0.0);
        assert!(matches!(
            extract_bounds(&p, &[], 0.3, 50.0),
            Err(DpError::BadFineStep { .. })
        ));
    }
}
