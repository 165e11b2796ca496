//! CSV exports: sampled profile, corridor dump and metrics summary.
//!
//! Numbers are written in shortest round-trip form (switching to exponent
//! notation for very small or large magnitudes), so a parsed value is
//! bit-identical to the evaluated one.

use std::io::{self, Write};

use tcplan::bezier::BezierSpline;
use tcplan::corridor::Region;
use tcplan::planner::{ComfortMetrics, PlanResult};

pub const PROFILE_HEADER: &str = "t,s,v,a,j";
pub const CORRIDOR_HEADER: &str = "k,t_start,h,lbias,lskew,ubias,uskew";
pub const METRICS_HEADER: &str = "key,value";

/// Sample times `0, dt, 2 dt, ...` up to the spline's end time.
pub fn sample_times(spline: &BezierSpline<f64>, dt: f64) -> Vec<f64> {
    let start = spline.start_time();
    let span = spline.total_duration();
    let count = (span / dt + 1e-9).floor() as usize;
    (0..=count).map(|i| start + i as f64 * dt).collect()
}

pub fn write_profile<W: Write>(w: &mut W, spline: &BezierSpline<f64>, dt: f64) -> io::Result<()> {
    writeln!(w, "{PROFILE_HEADER}")?;
    for t in sample_times(spline, dt) {
        let k = spline.segment_index(t).expect("sample inside the spline");
        let seg = &spline.segments[k];
        let [s, v, a, j] = [0, 1, 2, 3].map(|order| seg.eval(t, order));
        writeln!(w, "{t:?},{s:?},{v:?},{a:?},{j:?}")?;
    }
    Ok(())
}

pub fn write_corridors<W: Write>(w: &mut W, regions: &[Region<f64>]) -> io::Result<()> {
    writeln!(w, "{CORRIDOR_HEADER}")?;
    for (k, r) in regions.iter().enumerate() {
        writeln!(
            w,
            "{k},{:?},{:?},{:?},{:?},{:?},{:?}",
            r.t_start, r.duration, r.lbias, r.lskew, r.ubias, r.uskew
        )?;
    }
    Ok(())
}

pub fn write_metrics<W: Write>(
    w: &mut W,
    result: &PlanResult<f64>,
    metrics: &ComfortMetrics<f64>,
) -> io::Result<()> {
    let t = &result.timings;
    writeln!(w, "{METRICS_HEADER}")?;
    writeln!(w, "mode,{}", result.mode)?;
    writeln!(w, "objective,{:?}", result.objective)?;
    writeln!(w, "max_abs_accel,{:?}", metrics.max_abs_accel)?;
    writeln!(w, "avg_accel,{:?}", metrics.avg_accel)?;
    writeln!(w, "max_abs_jerk,{:?}", metrics.max_abs_jerk)?;
    writeln!(w, "segments,{}", result.spline.segments.len())?;
    writeln!(w, "iterations,{}", result.solution.iterations)?;
    writeln!(w, "dp_us,{:?}", t.dp_us)?;
    writeln!(w, "bounds_us,{:?}", t.bounds_us)?;
    writeln!(w, "regions_us,{:?}", t.regions_us)?;
    writeln!(w, "build_us,{:?}", t.build_us)?;
    writeln!(w, "solve_us,{:?}", t.solve_us)?;
    writeln!(w, "total_us,{:?}", t.total_us())?;
    Ok(())
}
