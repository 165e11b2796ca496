//! End-to-end speed planning: search, bounds, regions, QP, spline.

use std::time::Instant;

use thiserror::Error;

use crate::bezier::{bezier_to_monomial, BezierError, BezierSegment, BezierSpline};
use crate::corridor::{
    generate_regions, validate_regions, CorridorConfig, CorridorError, Region, RegionViolation,
};
use crate::dp::{self, BoundsProfile, DpError, DpLimits, DpWeights, HeuristicProfile};
use crate::qp_build::{
    assemble, build_boundary_constraints, build_continuity_constraints, build_objective,
    build_physical_constraints, build_safety_constraints, derivative_gram, reference_lines,
    CostWeights, PhysicalLimits, QpBuildError, QpProblem, RectInfeasibility, SafetyMode,
};
use crate::qp_solve::{solve, Solution, SolveError, SolverConfig, Status};
use crate::scenario::{Scenario, ScenarioError};
use crate::stgraph::{ObstacleTrace, StGraphError, StGrid};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Scenario,
    Dp,
    Bounds,
    Regions,
    Qp,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("invalid scenario: {0}")]
    Scenario(#[from] ScenarioError),
    #[error("invalid grid: {0}")]
    Grid(StGraphError),
    #[error("search failed: {0}")]
    Dp(DpError),
    #[error("bound extraction failed: {0}")]
    Bounds(DpError),
    #[error("region generation failed: {0}")]
    Regions(#[from] CorridorError),
    #[error("regions violate the bounds: {0:?}")]
    RegionValidation(Vec<RegionViolation>),
    #[error("rectangular corridor infeasible: {}", describe_rect(.0))]
    RectInfeasible(Vec<RectInfeasibility>),
    #[error("qp assembly failed: {0}")]
    Build(QpBuildError),
    #[error("qp solver rejected the problem: {0}")]
    Solver(#[from] SolveError),
    #[error("qp infeasible after {iterations} iterations")]
    QpInfeasible { iterations: usize },
    #[error("qp not converged after {iterations} iterations (primal {primal_residual:e}, dual {dual_residual:e})")]
    QpMaxIter {
        iterations: usize,
        primal_residual: f64,
        dual_residual: f64,
    },
    #[error("spline construction failed: {0}")]
    Spline(#[from] BezierError),
}

fn describe_rect(list: &[RectInfeasibility]) -> String {
    list.iter()
        .map(|r| {
            format!(
                "region {} needs h <= {:.3} s, has {:.3} s",
                r.region, r.max_duration, r.duration
            )
        })
        .collect::<Vec<_>>()
        .join("; ")
}

impl PlanError {
    pub fn stage(&self) -> Stage {
        match self {
            PlanError::Scenario(_) | PlanError::Grid(_) => Stage::Scenario,
            PlanError::Dp(_) => Stage::Dp,
            PlanError::Bounds(_) => Stage::Bounds,
            PlanError::Regions(_) | PlanError::RegionValidation(_) => Stage::Regions,
            _ => Stage::Qp,
        }
    }

    /// Whether the failure means the optimization has no solution.
    pub fn is_infeasible(&self) -> bool {
        matches!(
            self,
            PlanError::RectInfeasible(_) | PlanError::QpInfeasible { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannerConfig<T> {
    pub mode: SafetyMode,
    pub degree: usize,
    /// `cruise_speed` and `s_end_ref` are replaced by the scenario's cruise
    /// speed and the heuristic's final station.
    pub weights: CostWeights<T>,
    /// `cruise_speed` is replaced by the scenario's cruise speed.
    pub dp_weights: DpWeights<T>,
    pub corridor: CorridorConfig<T>,
    pub solver: SolverConfig<T>,
}

impl<T: Scalar> Default for PlannerConfig<T> {
    fn default() -> Self {
        Self {
            mode: SafetyMode::Trapezoidal,
            degree: 5,
            weights: CostWeights::standard(T::zero(), T::zero()),
            dp_weights: DpWeights::with_cruise_speed(T::zero()),
            corridor: CorridorConfig::default(),
            solver: SolverConfig::default(),
        }
    }
}

impl<T: Scalar> PlannerConfig<T> {
    pub fn with_mode(mode: SafetyMode) -> Self {
        Self {
            mode,
            ..Self::default()
        }
    }
}

/// Wall-clock time per stage in microseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageTimings {
    pub dp_us: f64,
    pub bounds_us: f64,
    pub regions_us: f64,
    pub build_us: f64,
    pub solve_us: f64,
}

impl StageTimings {
    pub fn total_us(&self) -> f64 {
        self.dp_us + self.bounds_us + self.regions_us + self.build_us + self.solve_us
    }
}

fn elapsed_us(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e6
}

/// Output of the stages shared by both safety modes.
#[derive(Debug, Clone, PartialEq)]
pub struct Corridors<T> {
    pub grid: StGrid<T>,
    /// Obstacles widened to the fine time grid, as used by search and bounds.
    pub snapped: Vec<ObstacleTrace<T>>,
    pub heuristic: HeuristicProfile<T>,
    pub bounds: BoundsProfile<T>,
    pub regions: Vec<Region<T>>,
    pub timings: StageTimings,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanResult<T> {
    pub mode: SafetyMode,
    pub spline: BezierSpline<T>,
    pub regions: Vec<Region<T>>,
    pub heuristic: HeuristicProfile<T>,
    pub bounds: BoundsProfile<T>,
    pub obstacles: Vec<ObstacleTrace<T>>,
    pub objective: T,
    pub solution: Solution<T>,
    pub timings: StageTimings,
}

/// Runs search, bound extraction and region generation.
pub fn prepare<T: Scalar>(
    scenario: &Scenario<T>,
    config: &PlannerConfig<T>,
) -> Result<Corridors<T>, PlanError> {
    scenario.validate()?;
    let mut timings = StageTimings::default();
    let grid = StGrid::new(
        scenario.horizon,
        scenario.grid.dt1,
        scenario.grid.ds,
        scenario.station_limit(),
    )
    .map_err(PlanError::Grid)?;
    let dt2 = scenario.grid.dt2();
    let snapped: Vec<_> = scenario
        .obstacles
        .iter()
        .map(|o| o.snapped(dt2, scenario.horizon))
        .collect();

    let start = Instant::now();
    let limits = DpLimits {
        v_max: scenario.limits.v_max,
        a_max: scenario.limits.a_max.max(-scenario.limits.a_min),
        edge_samples: scenario.grid.edge_samples,
    };
    let dp_weights = DpWeights {
        cruise_speed: scenario.cruise_speed,
        ..config.dp_weights
    };
    let heuristic = dp::search(&grid, &snapped, &scenario.initial, &limits, &dp_weights)
        .map_err(PlanError::Dp)?;
    timings.dp_us = elapsed_us(start);

    let start = Instant::now();
    let bounds =
        dp::extract_bounds(&heuristic, &snapped, dt2, grid.s_max).map_err(PlanError::Bounds)?;
    timings.bounds_us = elapsed_us(start);

    let start = Instant::now();
    let regions = generate_regions(&bounds, &config.corridor)?;
    let violations = validate_regions(&regions, &bounds);
    if !violations.is_empty() {
        return Err(PlanError::RegionValidation(violations));
    }
    timings.regions_us = elapsed_us(start);

    Ok(Corridors {
        grid,
        snapped,
        heuristic,
        bounds,
        regions,
        timings,
    })
}

/// Builds and solves the QP on prepared regions in the given mode.
pub fn optimize<T: Scalar>(
    scenario: &Scenario<T>,
    config: &PlannerConfig<T>,
    corridors: &Corridors<T>,
    mode: SafetyMode,
) -> Result<PlanResult<T>, PlanError> {
    let mut timings = corridors.timings;
    let regions = &corridors.regions;
    let n = config.degree;

    let start = Instant::now();
    let qp = build_qp(scenario, config, corridors, mode)?;
    timings.build_us = elapsed_us(start);

    let start = Instant::now();
    let solution = solve(&qp, &config.solver)?;
    timings.solve_us = elapsed_us(start);
    match solution.status {
        Status::Solved => {}
        Status::PrimalInfeasible => {
            return Err(PlanError::QpInfeasible {
                iterations: solution.iterations,
            })
        }
        Status::MaxIter => {
            return Err(PlanError::QpMaxIter {
                iterations: solution.iterations,
                primal_residual: solution.primal_residual.to_f64_lossy(),
                dual_residual: solution.dual_residual.to_f64_lossy(),
            })
        }
    }

    let segments = regions
        .iter()
        .enumerate()
        .map(|(k, r)| {
            BezierSegment::new(
                solution.x[k * (n + 1)..(k + 1) * (n + 1)].to_vec(),
                r.duration,
                r.t_start,
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    let spline = BezierSpline::new(segments)?;
    Ok(PlanResult {
        mode,
        spline,
        regions: regions.clone(),
        heuristic: corridors.heuristic.clone(),
        bounds: corridors.bounds.clone(),
        obstacles: scenario.obstacles.clone(),
        objective: solution.objective,
        solution,
        timings,
    })
}

/// Assembles the QP for prepared regions without solving it.
pub fn build_qp<T: Scalar>(
    scenario: &Scenario<T>,
    config: &PlannerConfig<T>,
    corridors: &Corridors<T>,
    mode: SafetyMode,
) -> Result<QpProblem<T>, PlanError> {
    let regions = &corridors.regions;
    let n = config.degree;
    let heuristic = &corridors.heuristic;
    let weights = CostWeights {
        cruise_speed: scenario.cruise_speed,
        s_end_ref: heuristic.station_at(scenario.horizon),
        ..config.weights
    };
    let lines = reference_lines(heuristic, regions);
    let limits = PhysicalLimits {
        kappa: regions
            .iter()
            .map(|r| scenario.curvature_over(r.t_start, r.t_finish()))
            .collect(),
        ..scenario.limits.clone()
    };
    let objective = build_objective(regions, &lines, &weights, n).map_err(PlanError::Build)?;
    let safety = build_safety_constraints(regions, n, mode).map_err(|e| match e {
        QpBuildError::RectInfeasible(list) => PlanError::RectInfeasible(list),
        other => PlanError::Build(other),
    })?;
    let blocks = vec![
        build_boundary_constraints(&scenario.initial, n, regions).map_err(PlanError::Build)?,
        build_continuity_constraints(regions, n),
        safety,
        build_physical_constraints(regions, n, &limits),
    ];
    assemble(objective, blocks).map_err(PlanError::Build)
}

/// Full pipeline in the configured mode.
pub fn plan<T: Scalar>(
    scenario: &Scenario<T>,
    config: &PlannerConfig<T>,
) -> Result<PlanResult<T>, PlanError> {
    let corridors = prepare(scenario, config)?;
    optimize(scenario, config, &corridors, config.mode)
}

#[derive(Debug, Clone, PartialEq)]
pub enum SafetyViolation {
    Band {
        t: f64,
        s: f64,
        lower: f64,
        upper: f64,
        region: usize,
    },
    Obstacle {
        t: f64,
        s: f64,
        obstacle: usize,
    },
}

/// Samples the plan every `sample_dt` seconds and lists samples that leave
/// their region band by more than 1e-6 m or lie more than 1e-6 m inside an
/// obstacle.
pub fn verify_safety<T: Scalar>(result: &PlanResult<T>, sample_dt: T) -> Vec<SafetyViolation> {
    let tol = T::lit(1e-6);
    let mut out = Vec::new();
    if !(sample_dt > T::zero()) {
        return out;
    }
    let end = result.spline.end_time();
    let count = (end / sample_dt + T::lit(1e-9))
        .floor()
        .to_usize()
        .unwrap_or(0);
    let mut times: Vec<T> = (0..=count).map(|i| T::of(i) * sample_dt).collect();
    if times.last().is_some_and(|&t| end - t > T::lit(1e-12)) {
        times.push(end);
    }
    for t in times {
        let Some(k) = result.spline.segment_index(t) else {
            continue;
        };
        let s = result.spline.segments[k].eval(t, 0);
        let region = &result.regions[k];
        let (lower, upper) = (region.lower_at(t), region.upper_at(t));
        if s < lower - tol || s > upper + tol {
            out.push(SafetyViolation::Band {
                t: t.to_f64_lossy(),
                s: s.to_f64_lossy(),
                lower: lower.to_f64_lossy(),
                upper: upper.to_f64_lossy(),
                region: k,
            });
        }
        for (i, o) in result.obstacles.iter().enumerate() {
            if let Some(iv) = o.blocked_interval(t) {
                if s > iv.lo + tol && s < iv.hi - tol {
                    out.push(SafetyViolation::Obstacle {
                        t: t.to_f64_lossy(),
                        s: s.to_f64_lossy(),
                        obstacle: i,
                    });
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComfortMetrics<T> {
    pub max_abs_accel: T,
    /// `sqrt((1/T) * integral of acceleration squared)`.
    pub avg_accel: T,
    pub max_abs_jerk: T,
}

/// Largest `|d^order s / dt^order|` on one segment: 1 ms sampling, then a
/// golden-section search around every sampled local maximum.
fn max_abs_derivative<T: Scalar>(seg: &BezierSegment<T>, order: usize) -> T {
    let steps = (seg.duration / T::lit(1e-3))
        .ceil()
        .to_usize()
        .unwrap_or(1)
        .max(1);
    let f = |u: T| seg.eval_unit(u, order).abs();
    let du = T::one() / T::of(steps);
    let vals: Vec<T> = (0..=steps).map(|i| f(T::of(i) * du)).collect();
    let mut best = vals.iter().copied().fold(T::zero(), T::max);
    let phi = T::lit(0.618_033_988_749_895);
    for i in 1..steps {
        if vals[i] >= vals[i - 1] && vals[i] >= vals[i + 1] {
            let (mut a, mut b) = (T::of(i - 1) * du, T::of(i + 1) * du);
            for _ in 0..40 {
                let c = b - phi * (b - a);
                let d = a + phi * (b - a);
                if f(c) > f(d) {
                    b = d;
                } else {
                    a = c;
                }
            }
            best = best.max(f((a + b) / T::lit(2.0)));
        }
    }
    best
}

/// Peak and RMS acceleration and peak jerk of a spline. The RMS uses the
/// exact integral of the squared acceleration.
pub fn comfort_metrics<T: Scalar>(spline: &BezierSpline<T>) -> ComfortMetrics<T> {
    let mut energy = T::zero();
    let mut max_abs_accel = T::zero();
    let mut max_abs_jerk = T::zero();
    for seg in &spline.segments {
        let p = bezier_to_monomial(&seg.control);
        energy += derivative_gram(seg.degree(), 2, seg.duration).quad_form(&p);
        max_abs_accel = max_abs_accel.max(max_abs_derivative(seg, 2));
        max_abs_jerk = max_abs_jerk.max(max_abs_derivative(seg, 3));
    }
    let total = spline.total_duration();
    let avg_accel = (energy.max(T::zero()) / total).sqrt();
    ComfortMetrics {
        max_abs_accel: max_abs_accel.max(avg_accel),
        avg_accel,
        max_abs_jerk,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeOutcome<T> {
    pub mode: SafetyMode,
    pub result: Result<PlanResult<T>, PlanError>,
    pub metrics: Option<ComfortMetrics<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison<T> {
    pub corridors: Corridors<T>,
    pub rectangular: ModeOutcome<T>,
    pub trapezoidal: ModeOutcome<T>,
}

/// Solves both safety modes on one shared set of regions. Fails only if a
/// shared stage fails; per-mode failures are reported in the outcomes.
pub fn compare_modes<T: Scalar>(
    scenario: &Scenario<T>,
    config: &PlannerConfig<T>,
) -> Result<Comparison<T>, PlanError> {
    let corridors = prepare(scenario, config)?;
    let run = |mode| {
        let result = optimize(scenario, config, &corridors, mode);
        let metrics = result.as_ref().ok().map(|r| comfort_metrics(&r.spline));
        ModeOutcome {
            mode,
            result,
            metrics,
        }
    };
    let rectangular = run(SafetyMode::Rectangular);
    let trapezoidal = run(SafetyMode::Trapezoidal);
    Ok(Comparison {
        corridors,
        rectangular,
        trapezoidal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn open_road_cruises() {
        let scenario = Scenario::<f64>::open_road(10.0, 10.0);
        let result = plan(&scenario, &PlannerConfig::default()).unwrap();
        let m = comfort_metrics(&result.spline);
        assert!(m.max_abs_accel < 0.1, "{m:?}");
        assert!(verify_safety(&result, 1e-3).is_empty());
        assert_eq!(result.spline.segments.len(), result.regions.len());
    }

    #[test]
    fn quadratic_metrics() {
        // s(t) = t^2 / 2 * a on one 2 s segment
        let (a, h) = (1.5f64, 2.0);
        let mono_in_u = [0.0, 0.0, a * h / 2.0, 0.0];
        let control = crate::bezier::monomial_to_bezier(&mono_in_u);
        let spline = BezierSpline::new(vec![BezierSegment::new(control, h, 0.0).unwrap()]).unwrap();
        let m = comfort_metrics(&spline);
        assert!((m.avg_accel - a).abs() < 1e-12);
        assert!((m.max_abs_accel - a).abs() < 1e-12);
        assert!(m.max_abs_jerk.abs() < 1e-12);
    }

    #[test]
    fn constant_speed_has_zero_metrics() {
        let control = crate::bezier::monomial_to_bezier(&[0.0f64, 10.0, 0.0, 0.0, 0.0, 0.0]);
        let spline =
            BezierSpline::new(vec![BezierSegment::new(control, 1.0, 0.0).unwrap()]).unwrap();
        let m = comfort_metrics(&spline);
        assert!(
            m.avg_accel.abs() < 1e-12
                && m.max_abs_accel.abs() < 1e-12
                && m.max_abs_jerk.abs() < 1e-12
        );
    }

    #[test]
    fn corrupted_control_point_flagged() {
        let scenario = Scenario::<f64>::open_road(10.0, 10.0);
        let mut result = plan(&scenario, &PlannerConfig::default()).unwrap();
        let seg = &mut result.spline.segments[2];
        let up = result.regions[2].ubias + 500.0;
        for c in seg.control.iter_mut().skip(2).take(2) {
            *c = up / result.regions[2].duration;
        }
        let v = verify_safety(&result, 1e-2);
        assert!(!v.is_empty());
        assert!(
            v.iter()
                .all(|x| matches!(x, SafetyViolation::Band { region: 2, .. })),
            "{v:?}"
        );
    }

    #[test]
    fn start_inside_obstacle_is_scenario_error() {
        let mut scenario = Scenario::<f64>::open_road(10.0, 10.0);
        scenario
            .obstacles
            .push(ObstacleTrace::new(0.0, 3.0, -1.0, 10.0, 4.0).unwrap());
        let err = plan(&scenario, &PlannerConfig::default()).unwrap_err();
        assert_eq!(err.stage(), Stage::Scenario);
    }
}
