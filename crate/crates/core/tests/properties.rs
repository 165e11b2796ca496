use proptest::prelude::*;
use tcplan::bezier::{bernstein_basis, BezierSegment};
use tcplan::corridor::{validate_regions, Region};
use tcplan::dp::LinearPiece;
use tcplan::linalg::Matrix;
use tcplan::planner::{build_qp, compare_modes, prepare, verify_safety, PlannerConfig};
use tcplan::qp_build::{
    build_objective, safety_bounds, CostWeights, QpProblem, RowOrigin, SafetyMode,
};
use tcplan::qp_solve::{solve, SolverConfig};
use tcplan::scenario::{Scenario, ScenarioGenerator};
use tcplan::stgraph::{linearize_boundaries, ObstacleTrace};

fn scenario(seed: u64) -> Scenario<f64> {
    ScenarioGenerator::new(seed).next_scenario()
}

fn trapezoid() -> impl Strategy<Value = Region<f64>> {
    (
        0.1..1.0f64,
        -20.0..60.0f64,
        -20.0..20.0f64,
        0.1..10.0f64,
        0.1..10.0f64,
    )
        .prop_map(|(h, lbias, lskew, gap0, gap1)| {
            let ubias = lbias + gap0;
            Region {
                t_beg: 0,
                t_end: 0,
                duration: h,
                t_start: 0.0,
                lbias,
                lskew,
                ubias,
                uskew: (lbias + lskew * h + gap1 - ubias) / h,
            }
        })
}

fn spline_regions() -> impl Strategy<Value = (Vec<Region<f64>>, Vec<LinearPiece<f64>>)> {
    prop::collection::vec((0.2..1.5f64, 0.0..15.0f64, 0.0..50.0f64), 1..5).prop_map(|pieces| {
        let mut t = 0.0;
        let mut regions = Vec::new();
        let mut lines = Vec::new();
        for (h, slope, intercept) in pieces {
            regions.push(Region {
                t_beg: 0,
                t_end: 0,
                duration: h,
                t_start: t,
                lbias: 0.0,
                lskew: 0.0,
                ubias: 1.0,
                uskew: 0.0,
            });
            lines.push(LinearPiece { slope, intercept });
            t += h;
        }
        (regions, lines)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn parallelogram_side_is_preserved(
        t_enter in 0.0..5.0f64,
        span in 0.1..3.0f64,
        s0 in -10.0..80.0f64,
        speed in -5.0..15.0f64,
        length in 1.0..10.0f64,
        u in 0.0..=1.0f64,
        bump in 0.0..5.0f64,
    ) {
        let o = ObstacleTrace::new(t_enter, t_enter + span, s0, speed, length).unwrap();
        let t = t_enter + u * span;
        let iv = o.blocked_interval(t).unwrap();
        prop_assert!((iv.hi - iv.lo - length).abs() <= 1e-9 * (1.0 + iv.hi.abs()));
        let faster = ObstacleTrace { speed: speed + bump, ..o };
        let shifted = faster.blocked_interval(t).unwrap();
        let d = (shifted.lo - iv.lo, shifted.hi - iv.hi);
        prop_assert!(d.0 >= -1e-12 && (d.0 - d.1).abs() <= 1e-9);
    }

    #[test]
    fn linearized_bounds_envelop_the_curve(
        a in -2.0..2.0f64,
        b in 0.0..10.0f64,
        c in 10.0..40.0f64,
        width in 2.0..8.0f64,
    ) {
        let lower = |t: f64| c + b * t + a * t * t;
        let upper = |t: f64| lower(t) + width;
        let pieces = linearize_boundaries(lower, upper, 0.0, 4.0, 0.5, 500.0).unwrap();
        for k in 0..=400 {
            let t = k as f64 * 0.01;
            let covering: Vec<_> = pieces.iter().filter(|p| p.t_enter <= t && t <= p.t_exit).collect();
            prop_assert!(!covering.is_empty());
            for p in covering {
                prop_assert!(p.s_low(t) <= lower(t) + 1e-9);
                prop_assert!(p.s_high(t) >= upper(t) - 1e-9);
            }
        }
    }

    #[test]
    fn bernstein_partition_of_unity(n in 1usize..=10, u in 0.0..=1.0f64) {
        let sum: f64 = (0..=n).map(|i| bernstein_basis(n, i, u).unwrap()).sum();
        prop_assert!((sum - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn trapezoid_bands_are_nonempty_and_contain_the_box(reg in trapezoid(), n in 3usize..=8) {
        let trap = safety_bounds(&reg, n, SafetyMode::Trapezoidal);
        let rect = safety_bounds(&reg, n, SafetyMode::Rectangular);
        for ((tl, tu), (rl, ru)) in trap.iter().zip(&rect) {
            prop_assert!(tl < tu);
            if rl <= ru {
                prop_assert!(*rl >= tl - 1e-9 && *ru <= tu + 1e-9);
            }
        }
    }

    #[test]
    fn trapezoid_controls_keep_the_curve_inside(
        reg in trapezoid(),
        n in 3usize..=8,
        picks in prop::collection::vec(0.0..=1.0f64, 9),
    ) {
        let h = reg.duration;
        let control: Vec<f64> = safety_bounds(&reg, n, SafetyMode::Trapezoidal)
            .iter()
            .zip(&picks)
            .map(|(&(lo, hi), p)| (lo + p * (hi - lo)) / h)
            .collect();
        let seg = BezierSegment::new(control, h, 0.0).unwrap();
        for j in 0..=200 {
            let u = j as f64 / 200.0;
            let s = seg.eval_unit(u, 0);
            prop_assert!(s >= reg.lower_at(u * h) - 1e-9 && s <= reg.upper_at(u * h) + 1e-9);
        }
    }

    #[test]
    fn objective_is_positive_semidefinite(
        (regions, lines) in spline_regions(),
        n in 3usize..=7,
        w in prop::array::uniform5(0.0..10.0f64),
        x in prop::collection::vec(-50.0..50.0f64, 40),
    ) {
        let weights = CostWeights {
            w1: w[0], w2: w[1], w3: w[2] + 0.01, w4: w[3], w5: w[4],
            cruise_speed: 10.0,
            s_end_ref: 50.0,
        };
        let obj = build_objective(&regions, &lines, &weights, n).unwrap();
        prop_assert!(obj.quad.is_symmetric(0.0));
        let dim = obj.linear.len();
        let x = &x[..dim.min(x.len())];
        let mut v = x.to_vec();
        v.resize(dim, 1.0);
        let norm2: f64 = v.iter().map(|a| a * a).sum();
        prop_assert!(obj.quad.quad_form(&v) / norm2 >= -1e-9);
    }

    #[test]
    fn solver_is_deterministic(
        q in prop::array::uniform3(-2.0..2.0f64),
        lin in prop::array::uniform2(-5.0..5.0f64),
        cap in 0.0..3.0f64,
    ) {
        let quad = Matrix::from_rows(&[vec![3.0 + q[0].abs(), q[1]], vec![q[1], 3.0 + q[2].abs()]]);
        let qp = QpProblem {
            dim: 2,
            quad,
            linear: lin.to_vec(),
            constant: 0.0,
            a_eq: Matrix::zeros(0, 2),
            b_eq: vec![],
            eq_origin: vec![],
            a_ie: Matrix::from_rows(&[vec![1.0, 1.0]]),
            ie_lower: vec![f64::NEG_INFINITY],
            ie_upper: vec![cap],
            ie_origin: vec![RowOrigin::Safety { segment: 0, point: 0 }],
        };
        let cfg = SolverConfig::default();
        prop_assert_eq!(solve(&qp, &cfg).unwrap(), solve(&qp, &cfg).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn regions_partition_the_horizon_inside_the_bounds(seed in any::<u64>()) {
        let s = scenario(seed);
        let config = PlannerConfig::default();
        let Ok(c) = prepare(&s, &config) else { return Ok(()); };
        prop_assert!(c.heuristic.waypoints.windows(2).all(|w| w[1].1 >= w[0].1));
        prop_assert!(validate_regions(&c.regions, &c.bounds).is_empty());
        let total: f64 = c.regions.iter().map(|r| r.duration).sum();
        prop_assert!((total - s.horizon).abs() <= c.bounds.dt2 + 1e-9);
        let (lo, hi) = (config.corridor.min_duration, config.corridor.max_duration);
        if c.regions.len() > 1 {
            for r in &c.regions {
                prop_assert!(r.duration >= lo - 1e-9 && r.duration <= hi + 1e-9);
            }
        }
    }

    #[test]
    fn trapezoidal_cost_never_exceeds_rectangular(seed in any::<u64>()) {
        let s = scenario(seed);
        let config = PlannerConfig::default();
        let Ok(cmp) = compare_modes(&s, &config) else { return Ok(()); };
        if let (Ok(rc), Ok(tc)) = (&cmp.rectangular.result, &cmp.trapezoidal.result) {
            prop_assert!(tc.objective <= rc.objective + 10.0 * config.solver.eps_abs * (1.0 + rc.objective.abs()));
        }
    }

    #[test]
    fn plans_are_safe_continuous_and_start_right(seed in any::<u64>()) {
        let s = scenario(seed);
        let Ok(cmp) = compare_modes(&s, &PlannerConfig::default()) else { return Ok(()); };
        for result in [&cmp.rectangular.result, &cmp.trapezoidal.result].into_iter().flatten() {
            prop_assert!(verify_safety(result, 1e-3).is_empty());
            let sp = &result.spline;
            prop_assert_eq!(sp.segments.len(), result.regions.len());
            for w in sp.segments.windows(2) {
                for order in 0..=2 {
                    let jump = w[0].eval(w[0].t_end(), order) - w[1].eval(w[1].t_start, order);
                    prop_assert!(jump.abs() <= 1e-6);
                }
            }
            prop_assert!((sp.evaluate(0.0, 0).unwrap() - s.initial.s0).abs() <= 1e-8);
            prop_assert!((sp.evaluate(0.0, 1).unwrap() - s.initial.v0).abs() <= 1e-6);
            prop_assert!((sp.evaluate(0.0, 2).unwrap() - s.initial.a0).abs() <= 1e-5);
        }
    }

    #[test]
    fn objective_trace_settles(seed in any::<u64>()) {
        let s = scenario(seed);
        let mut config = PlannerConfig::default();
        let Ok(c) = prepare(&s, &config) else { return Ok(()); };
        let qp = build_qp(&s, &config, &c, SafetyMode::Trapezoidal).unwrap();
        config.solver.polish = false;
        config.solver.trace = true;
        let sol = solve(&qp, &config.solver).unwrap();
        prop_assert_eq!(sol.trace.len(), sol.iterations);
        prop_assert!(sol.trace.iter().all(|v| v.is_finite()));
        let last = *sol.trace.last().unwrap();
        prop_assert_eq!(last, sol.objective);
        let tail = &sol.trace[sol.trace.len().saturating_sub(10)..];
        for v in tail {
            prop_assert!((v - last).abs() <= 1e-2 * (1.0 + last.abs()));
        }
    }
}
