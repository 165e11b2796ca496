//! Planning scenarios and a seeded random generator for benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::qp_build::PhysicalLimits;
use crate::stgraph::{InitialState, ObstacleTrace, StGraphError, StGrid};
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("{field} must be finite")]
    NonFinite { field: &'static str },
    #[error("{field}: {reason}")]
    BadValue {
        field: &'static str,
        reason: &'static str,
    },
    #[error("obstacle {index}: {source}")]
    Obstacle { index: usize, source: StGraphError },
    #[error("obstacle {index} covers the initial station at t = 0")]
    StartBlocked { index: usize },
    #[error("grid: {0}")]
    Grid(StGraphError),
}

/// Search grid resolution: coarse step, station step and fine sub-steps per coarse step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec<T> {
    pub dt1: T,
    pub ds: T,
    pub edge_samples: usize,
}

impl<T: Scalar> Default for GridSpec<T> {
    fn default() -> Self {
        Self {
            dt1: T::one(),
            ds: T::lit(0.5),
            edge_samples: 10,
        }
    }
}

impl<T: Scalar> GridSpec<T> {
    /// Fine step used for bounds and regions.
    pub fn dt2(&self) -> T {
        self.dt1 / T::of(self.edge_samples.max(1))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario<T> {
    pub horizon: T,
    pub initial: InitialState<T>,
    pub cruise_speed: T,
    /// `kappa` holds the path's maximum curvature per coarse interval
    /// `[j dt1, (j+1) dt1]`; the last value repeats, empty means straight.
    pub limits: PhysicalLimits<T>,
    pub obstacles: Vec<ObstacleTrace<T>>,
    pub grid: GridSpec<T>,
}

impl<T: Scalar> Scenario<T> {
    /// Empty road, 7 s horizon, ego at the origin with speed `v0`.
    pub fn open_road(v0: T, cruise_speed: T) -> Self {
        Self {
            horizon: T::lit(7.0),
            initial: InitialState {
                s0: T::zero(),
                v0,
                a0: T::zero(),
            },
            cruise_speed,
            limits: default_limits(),
            obstacles: Vec::new(),
            grid: GridSpec::default(),
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let finite = [
            ("horizon", self.horizon),
            ("initial.s0", self.initial.s0),
            ("initial.v0", self.initial.v0),
            ("initial.a0", self.initial.a0),
            ("cruise_speed", self.cruise_speed),
            ("limits.v_max", self.limits.v_max),
            ("limits.a_min", self.limits.a_min),
            ("limits.a_max", self.limits.a_max),
            ("limits.j_min", self.limits.j_min),
            ("limits.j_max", self.limits.j_max),
            ("limits.a_cm", self.limits.a_cm),
        ];
        for (field, v) in finite {
            if !v.is_finite() {
                return Err(ScenarioError::NonFinite { field });
            }
        }
        let zero = T::zero();
        let checks = [
            ("horizon", self.horizon > zero, "must be positive"),
            ("initial.v0", self.initial.v0 >= zero, "must be nonnegative"),
            (
                "initial.v0",
                self.initial.v0 <= self.limits.v_max,
                "exceeds limits.v_max",
            ),
            (
                "cruise_speed",
                self.cruise_speed >= zero,
                "must be nonnegative",
            ),
            ("limits.v_max", self.limits.v_max > zero, "must be positive"),
            ("limits.a_min", self.limits.a_min < zero, "must be negative"),
            ("limits.a_max", self.limits.a_max > zero, "must be positive"),
            ("limits.j_min", self.limits.j_min < zero, "must be negative"),
            ("limits.j_max", self.limits.j_max > zero, "must be positive"),
            ("limits.a_cm", self.limits.a_cm > zero, "must be positive"),
            (
                "limits.kappa",
                self.limits
                    .kappa
                    .iter()
                    .all(|k| k.is_finite() && *k >= zero),
                "must be finite and nonnegative",
            ),
            (
                "grid.edge_samples",
                self.grid.edge_samples >= 1,
                "must be at least 1",
            ),
        ];
        for (field, ok, reason) in checks {
            if !ok {
                return Err(ScenarioError::BadValue { field, reason });
            }
        }
        StGrid::new(
            self.horizon,
            self.grid.dt1,
            self.grid.ds,
            self.station_limit(),
        )
        .map_err(ScenarioError::Grid)?;
        for (index, o) in self.obstacles.iter().enumerate() {
            o.validate()
                .map_err(|source| ScenarioError::Obstacle { index, source })?;
            if o.blocked_interval(zero)
                .is_some_and(|iv| iv.contains(self.initial.s0))
            {
                return Err(ScenarioError::StartBlocked { index });
            }
        }
        Ok(())
    }

    /// Largest station reachable within the horizon at the speed limit.
    pub fn station_limit(&self) -> T {
        let reach = self.initial.s0 + self.limits.v_max * self.horizon;
        (reach / self.grid.ds).ceil() * self.grid.ds
    }

    /// Maximum curvature over `[t0, t1]` from the per-interval profile.
    pub fn curvature_over(&self, t0: T, t1: T) -> T {
        let k = &self.limits.kappa;
        if k.is_empty() {
            return T::zero();
        }
        let dt1 = self.grid.dt1;
        let tol = T::lit(1e-9);
        let first = ((t0 / dt1) + tol).floor().to_usize().unwrap_or(0);
        let last = ((t1 / dt1) - tol)
            .ceil()
            .to_usize()
            .unwrap_or(0)
            .max(first + 1);
        (first..last)
            .map(|j| k[j.min(k.len() - 1)])
            .fold(T::zero(), T::max)
    }
}

/// Speed limit 20 m/s, acceleration [-6, 4] m/s^2, jerk [-20, 20] m/s^3,
/// lateral acceleration 2 m/s^2, straight path.
pub fn default_limits<T: Scalar>() -> PhysicalLimits<T> {
    PhysicalLimits {
        v_max: T::lit(20.0),
        a_min: T::lit(-6.0),
        a_max: T::lit(4.0),
        j_min: T::lit(-20.0),
        j_max: T::lit(20.0),
        a_cm: T::lit(2.0),
        kappa: Vec::new(),
    }
}

/// Seeded generator of crossing-traffic scenarios: one to three obstacles
/// with speeds in [-5, 15] m/s entering the path in [0, 5] s, none covering
/// the start.
#[derive(Debug, Clone)]
pub struct ScenarioGenerator {
    rng: ChaCha8Rng,
}

impl ScenarioGenerator {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn next_scenario<T: Scalar>(&mut self) -> Scenario<T> {
        let rng = &mut self.rng;
        let v0: f64 = rng.gen_range(5.0..15.0);
        let cruise: f64 = rng.gen_range(8.0..15.0);
        let mut scenario = Scenario::open_road(T::lit(v0), T::lit(cruise));
        let horizon = scenario.horizon.to_f64_lossy();
        let count = rng.gen_range(1..=3);
        while scenario.obstacles.len() < count {
            let t_enter: f64 = rng.gen_range(0.0..5.0);
            let t_exit = (t_enter + rng.gen_range(0.5..4.0)).min(horizon);
            let speed: f64 = rng.gen_range(-5.0..15.0);
            let s_at_enter: f64 = rng.gen_range(5.0..90.0);
            let length: f64 = rng.gen_range(3.0..10.0);
            let o = ObstacleTrace {
                t_enter: T::lit(t_enter),
                t_exit: T::lit(t_exit),
                s_at_enter: T::lit(s_at_enter),
                speed: T::lit(speed),
                block_length: T::lit(length),
            };
            if o.validate().is_err() {
                continue;
            }
            if o.blocked_interval(T::zero())
                .is_some_and(|iv| iv.distance(T::zero()) < T::lit(2.0))
            {
                continue;
            }
            scenario.obstacles.push(o);
        }
        scenario
    }

    pub fn take<T: Scalar>(&mut self, count: usize) -> Vec<Scenario<T>> {
        (0..count).map(|_| self.next_scenario()).collect()
    }
}
