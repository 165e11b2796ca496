//! Trapezoidal safe regions built from fine-grained station bounds.
//!
//! Regions are detected by watching the skew (slope) of the lower and upper
//! bound sequences; each region's boundary lines are then shifted inward just
//! enough to lie inside the sampled bounds, so a region never admits a point
//! the bounds exclude. Long regions are split, short ones are merged into a
//! neighbour.

use thiserror::Error;

use crate::dp::BoundsProfile;
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CorridorError {
    #[error("bounds need at least two samples, got {0}")]
    DegenerateBounds(usize),
    #[error("empty bound interval at stamp {0}")]
    EmptyBounds(usize),
    #[error("skew tolerance must be positive")]
    BadTolerance,
}

/// One convex safe region: the band between two lines over `[t_start, t_start + duration]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region<T> {
    /// First fine-stamp index covered.
    pub t_beg: usize,
    /// Last fine-stamp index covered (shared with the next region's `t_beg`).
    pub t_end: usize,
    pub duration: T,
    pub t_start: T,
    pub lbias: T,
    pub lskew: T,
    pub ubias: T,
    pub uskew: T,
}

impl<T: Scalar> Region<T> {
    pub fn t_finish(&self) -> T {
        self.t_start + self.duration
    }

    pub fn lower_at(&self, t: T) -> T {
        self.lbias + self.lskew * (t - self.t_start)
    }

    pub fn upper_at(&self, t: T) -> T {
        self.ubias + self.uskew * (t - self.t_start)
    }

    pub fn steps(&self) -> usize {
        self.t_end - self.t_beg
    }

    /// Same boundary lines restricted to a sub-window, re-anchored at its start.
    fn restricted(&self, beg: usize, end: usize, dt2: T) -> Self {
        let t_start = T::of(beg) * dt2;
        Self {
            t_beg: beg,
            t_end: end,
            duration: T::of(end - beg) * dt2,
            t_start,
            lbias: self.lower_at(t_start),
            ubias: self.upper_at(t_start),
            ..*self
        }
    }

    fn dt2(&self) -> T {
        self.duration / T::of(self.steps())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorridorConfig<T> {
    /// Skew change (m/s) that starts a new region.
    pub eps: T,
    pub max_duration: T,
    pub min_duration: T,
}

impl<T: Scalar> Default for CorridorConfig<T> {
    fn default() -> Self {
        Self {
            eps: T::lit(1e-3),
            max_duration: T::one(),
            min_duration: T::lit(0.2),
        }
    }
}

fn validate_bounds<T: Scalar>(bounds: &BoundsProfile<T>) -> Result<(), CorridorError> {
    let nums = bounds.nums();
    if nums < 2 || bounds.ub.len() != nums {
        return Err(CorridorError::DegenerateBounds(nums.min(bounds.ub.len())));
    }
    if let Some(i) = (0..nums).find(|&i| !(bounds.lb[i] < bounds.ub[i])) {
        return Err(CorridorError::EmptyBounds(i));
    }
    Ok(())
}

/// Stamp index ranges `[beg, end]` over which neither skew changes by more than `eps`.
///
/// Segment `[i-1, i]` whose skew departs from the current region's skew
/// closes the region at `i - 1` and opens the next one there.
pub fn detect_breakpoints<T: Scalar>(
    bounds: &BoundsProfile<T>,
    eps: T,
) -> Result<Vec<(usize, usize)>, CorridorError> {
    validate_bounds(bounds)?;
    if !(eps > T::zero()) {
        return Err(CorridorError::BadTolerance);
    }
    let dt2 = bounds.dt2;
    let skew = |v: &[T], i: usize| (v[i] - v[i - 1]) / dt2;
    let mut ranges = Vec::new();
    let mut beg = 0;
    let (mut lskew, mut uskew) = (skew(&bounds.lb, 1), skew(&bounds.ub, 1));
    for i in 2..bounds.nums() {
        let (ls, us) = (skew(&bounds.lb, i), skew(&bounds.ub, i));
        if (ls - lskew).abs() > eps || (us - uskew).abs() > eps {
            ranges.push((beg, i - 1));
            beg = i - 1;
            lskew = ls;
            uskew = us;
        }
    }
    ranges.push((beg, bounds.nums() - 1));
    Ok(ranges)
}

/// Lines with the given skews pushed inward until they respect every bound
/// sample in `[beg, end]`. Returns `None` when the band pinches shut.
fn fit_with_skews<T: Scalar>(
    bounds: &BoundsProfile<T>,
    beg: usize,
    end: usize,
    lskew: T,
    uskew: T,
) -> Option<Region<T>> {
    let dt2 = bounds.dt2;
    let t_start = T::of(beg) * dt2;
    let mut lbias = T::neg_infinity();
    let mut ubias = T::infinity();
    for i in beg..=end {
        let dt = T::of(i) * dt2 - t_start;
        lbias = lbias.max(bounds.lb[i] - lskew * dt);
        ubias = ubias.min(bounds.ub[i] - uskew * dt);
    }
    let region = Region {
        t_beg: beg,
        t_end: end,
        duration: T::of(end - beg) * dt2,
        t_start,
        lbias,
        lskew,
        ubias,
        uskew,
    };
    separated(&region).then_some(region)
}

fn separated<T: Scalar>(r: &Region<T>) -> bool {
    r.lower_at(r.t_start) < r.upper_at(r.t_start)
        && r.lower_at(r.t_finish()) < r.upper_at(r.t_finish())
}

fn fit_range<T: Scalar>(
    bounds: &BoundsProfile<T>,
    beg: usize,
    end: usize,
    out: &mut Vec<Region<T>>,
) {
    let dt2 = bounds.dt2;
    let first = |v: &[T]| (v[beg + 1] - v[beg]) / dt2;
    if let Some(r) = fit_with_skews(bounds, beg, end, first(&bounds.lb), first(&bounds.ub)) {
        out.push(r);
        return;
    }
    let span = T::of(end - beg) * dt2;
    let chord = |v: &[T]| (v[end] - v[beg]) / span;
    if let Some(r) = fit_with_skews(bounds, beg, end, chord(&bounds.lb), chord(&bounds.ub)) {
        out.push(r);
        return;
    }
    // A single step always fits: its chords pass through both samples.
    let mid = beg + (end - beg) / 2;
    fit_range(bounds, beg, mid, out);
    fit_range(bounds, mid, end, out);
}

/// Regions straight from skew detection, before splitting and merging.
pub fn detect_regions<T: Scalar>(
    bounds: &BoundsProfile<T>,
    eps: T,
) -> Result<Vec<Region<T>>, CorridorError> {
    let ranges = detect_breakpoints(bounds, eps)?;
    let mut out = Vec::with_capacity(ranges.len());
    for (beg, end) in ranges {
        fit_range(bounds, beg, end, &mut out);
    }
    Ok(out)
}

/// Full corridor generation: detection, then splitting and merging.
pub fn generate_regions<T: Scalar>(
    bounds: &BoundsProfile<T>,
    cfg: &CorridorConfig<T>,
) -> Result<Vec<Region<T>>, CorridorError> {
    let raw = detect_regions(bounds, cfg.eps)?;
    let split = region_split(&raw, cfg.max_duration);
    Ok(region_merge(&split, cfg.min_duration, cfg.max_duration))
}

fn cap_steps<T: Scalar>(dt2: T, max_duration: T) -> usize {
    (max_duration / dt2 + T::lit(1e-9))
        .floor()
        .to_usize()
        .unwrap_or(1)
        .max(1)
}

/// Cuts every region longer than `max_duration` into `max_duration` pieces
/// plus one remainder; the pieces keep the original boundary lines.
pub fn region_split<T: Scalar>(regions: &[Region<T>], max_duration: T) -> Vec<Region<T>> {
    let mut out = Vec::with_capacity(regions.len());
    for r in regions {
        let dt2 = r.dt2();
        let cap = cap_steps(dt2, max_duration);
        if r.steps() <= cap {
            out.push(*r);
            continue;
        }
        let mut beg = r.t_beg;
        while beg < r.t_end {
            let end = (beg + cap).min(r.t_end);
            out.push(r.restricted(beg, end, dt2));
            beg = end;
        }
    }
    out
}

/// Line over `t` in `[0, span]` on one side of every `(t, value)` knot,
/// as close to them as possible: the lower side (`above = true`) minimizes
/// the line's mean, the upper side maximizes it. Returns `(bias, skew)`.
fn tightest_line<T: Scalar>(knots: &[(T, T)], span: T, above: bool) -> (T, T) {
    let sign = if above { T::one() } else { -T::one() };
    let mut slopes = vec![T::zero()];
    for (a, &(ta, va)) in knots.iter().enumerate() {
        for &(tb, vb) in &knots[a + 1..] {
            if tb != ta {
                slopes.push((vb - va) / (tb - ta));
            }
        }
    }
    let half = span / T::lit(2.0);
    let mut best: Option<(T, T, T)> = None;
    for skew in slopes {
        let bias = knots
            .iter()
            .fold(T::neg_infinity(), |b, &(t, v)| b.max(sign * (v - skew * t)));
        let mean = bias + sign * skew * half;
        if best.is_none_or(|(m, _, _)| mean < m) {
            best = Some((mean, sign * bias, skew));
        }
    }
    best.map_or((T::zero(), T::zero()), |(_, bias, skew)| (bias, skew))
}

/// Single line pair over `[beg, end]` lying inside the band of `pieces`
/// (which cover that window) everywhere. The requirement is piecewise linear
/// between piece ends, so honouring it at those knots suffices.
fn fit_over_pieces<T: Scalar>(
    pieces: &[Region<T>],
    beg: usize,
    end: usize,
    dt2: T,
) -> Option<Region<T>> {
    let t0 = T::of(beg) * dt2;
    let inside = |r: &Region<T>, i: usize| r.t_beg <= i && i <= r.t_end;
    let mut knots: Vec<usize> = vec![beg, end];
    knots.extend(
        pieces
            .iter()
            .flat_map(|r| [r.t_beg, r.t_end])
            .filter(|&i| i > beg && i < end),
    );
    knots.sort_unstable();
    knots.dedup();
    let need = |i: usize| -> (T, T) {
        let t = T::of(i) * dt2;
        pieces
            .iter()
            .filter(|r| inside(r, i))
            .fold((T::neg_infinity(), T::infinity()), |(lo, hi), r| {
                (lo.max(r.lower_at(t)), hi.min(r.upper_at(t)))
            })
    };
    let rel = |i: usize| T::of(i - beg) * dt2;
    let lows: Vec<(T, T)> = knots.iter().map(|&i| (rel(i), need(i).0)).collect();
    let highs: Vec<(T, T)> = knots.iter().map(|&i| (rel(i), need(i).1)).collect();
    let span = T::of(end - beg) * dt2;
    let (lbias, lskew) = tightest_line(&lows, span, true);
    let (ubias, uskew) = tightest_line(&highs, span, false);
    let r = Region {
        t_beg: beg,
        t_end: end,
        duration: span,
        t_start: t0,
        lbias,
        lskew,
        ubias,
        uskew,
    };
    separated(&r).then_some(r)
}

/// Replaces `pieces` (adjacent regions) with one region, or two balanced
/// ones when the union would exceed `max_duration`.
fn merge_pieces<T: Scalar>(pieces: &[Region<T>], max_duration: T) -> Option<Vec<Region<T>>> {
    let beg = pieces.first()?.t_beg;
    let end = pieces.last()?.t_end;
    let dt2 = pieces[0].dt2();
    if end - beg <= cap_steps(dt2, max_duration) {
        return fit_over_pieces(pieces, beg, end, dt2).map(|r| vec![r]);
    }
    let mid = beg + (end - beg) / 2;
    let left = fit_over_pieces(pieces, beg, mid, dt2)?;
    let right = fit_over_pieces(pieces, mid, end, dt2)?;
    Some(vec![left, right])
}

/// Absorbs regions shorter than `min_duration` into the temporal neighbour
/// with the closer lower skew (the earlier one on ties). The merged band is
/// contained in the union of the original bands.
pub fn region_merge<T: Scalar>(
    regions: &[Region<T>],
    min_duration: T,
    max_duration: T,
) -> Vec<Region<T>> {
    let mut out = regions.to_vec();
    let tol = T::lit(1e-9);
    let mut stuck = vec![false; out.len()];
    loop {
        if out.len() < 2 {
            return out;
        }
        let Some(k) = (0..out.len()).find(|&k| !stuck[k] && out[k].duration < min_duration - tol)
        else {
            return out;
        };
        let mut neighbours: Vec<usize> = Vec::with_capacity(2);
        if k > 0 {
            neighbours.push(k - 1);
        }
        if k + 1 < out.len() {
            neighbours.push(k + 1);
        }
        let skew_gap = |n: usize| (out[n].lskew - out[k].lskew).abs();
        neighbours.sort_by(|&a, &b| {
            skew_gap(a)
                .partial_cmp(&skew_gap(b))
                .unwrap_or(std::cmp::Ordering::Equal)
        });

        let mut merged = None;
        for n in neighbours {
            let (lo, hi) = if n < k { (n, k) } else { (k, n) };
            if let Some(rep) = merge_pieces(&out[lo..=hi], max_duration) {
                merged = Some((lo, hi, rep));
                break;
            }
        }
        match merged {
            Some((lo, hi, rep)) => {
                let count = rep.len();
                out.splice(lo..=hi, rep);
                stuck.splice(lo..=hi, std::iter::repeat_n(false, count));
            }
            None => stuck[k] = true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RegionViolation {
    /// Lower line below the sampled lower bound.
    BelowLowerBound {
        region: usize,
        stamp: usize,
        by: f64,
    },
    /// Upper line above the sampled upper bound.
    AboveUpperBound {
        region: usize,
        stamp: usize,
        by: f64,
    },
    /// Lower line not strictly below the upper line at a window end.
    NotSeparated { region: usize, t: f64 },
    /// Consecutive regions leave a gap or overlap.
    NotContiguous { region: usize },
    /// Region window leaves the bounds' stamp range.
    OutOfRange { region: usize },
}

/// Checks that every region's band lies inside `[lb, ub]` at the stamps it
/// covers, that its lines are strictly separated at both ends, and that the
/// regions partition the stamp range.
pub fn validate_regions<T: Scalar>(
    regions: &[Region<T>],
    bounds: &BoundsProfile<T>,
) -> Vec<RegionViolation> {
    let mut out = Vec::new();
    let nums = bounds.nums();
    if let Some(first) = regions.first() {
        if first.t_beg != 0 {
            out.push(RegionViolation::NotContiguous { region: 0 });
        }
    }
    if let Some(last) = regions.last() {
        if last.t_end + 1 != nums {
            out.push(RegionViolation::NotContiguous {
                region: regions.len() - 1,
            });
        }
    }
    for (k, r) in regions.iter().enumerate() {
        if k > 0 && regions[k - 1].t_end != r.t_beg {
            out.push(RegionViolation::NotContiguous { region: k });
        }
        if r.t_end >= nums || r.t_beg >= r.t_end {
            out.push(RegionViolation::OutOfRange { region: k });
            continue;
        }
        for t in [r.t_start, r.t_finish()] {
            if !(r.lower_at(t) < r.upper_at(t)) {
                out.push(RegionViolation::NotSeparated {
                    region: k,
                    t: t.to_f64_lossy(),
                });
            }
        }
        for i in r.t_beg..=r.t_end {
            let t = bounds.time(i);
            let (lo, hi) = (r.lower_at(t), r.upper_at(t));
            let tol = T::lit(1e-9) * (T::one() + bounds.lb[i].abs().max(bounds.ub[i].abs()));
            if lo < bounds.lb[i] - tol {
                out.push(RegionViolation::BelowLowerBound {
                    region: k,
                    stamp: i,
                    by: (bounds.lb[i] - lo).to_f64_lossy(),
                });
            }
            if hi > bounds.ub[i] + tol {
                out.push(RegionViolation::AboveUpperBound {
                    region: k,
                    stamp: i,
                    by: (hi - bounds.ub[i]).to_f64_lossy(),
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bounds(
        lb: impl Fn(f64) -> f64,
        ub: impl Fn(f64) -> f64,
        horizon: f64,
        dt2: f64,
    ) -> BoundsProfile<f64> {
        let nums = (horizon / dt2).round() as usize + 1;
        BoundsProfile {
            dt2,
            lb: (0..nums).map(|i| lb(i as f64 * dt2)).collect(),
            ub: (0..nums).map(|i| ub(i as f64 * dt2)).collect(),
        }
    }

    fn ramp_ub(t: f64) -> f64 {
        if t < 3.0 {
            50.0
        } else if t <= 5.0 {
            50.0 - 2.0 * (t - 3.0)
        } else {
            46.0
        }
    }

    #[test]
    fn constant_band_splits_into_unit_regions() {
        let b = bounds(|_| 0.0, |_| 50.0, 7.0, 0.1);
        let raw = detect_regions(&b, 1e-3).unwrap();
        assert_eq!(raw.len(), 1);
        let regions = generate_regions(&b, &CorridorConfig::default()).unwrap();
        assert_eq!(regions.len(), 7);
        for (k, r) in regions.iter().enumerate() {
            assert!((r.duration - 1.0).abs() < 1e-12);
            assert!((r.t_start - k as f64).abs() < 1e-9);
            assert_eq!((r.lbias, r.ubias), (0.0, 50.0));
        }
        assert!(validate_regions(&regions, &b).is_empty());
    }

    #[test]
    fn detects_skew_breakpoints() {
        let b = bounds(|_| 0.0, ramp_ub, 7.0, 0.1);
        let ranges = detect_breakpoints(&b, 1e-3).unwrap();
        assert_eq!(ranges.len(), 3);
        assert!((ranges[0].1 as i64 - 30).abs() <= 1);
        assert!((ranges[1].1 as i64 - 50).abs() <= 1);
        let raw = detect_regions(&b, 1e-3).unwrap();
        assert!((raw[1].uskew + 2.0).abs() < 1e-9);
        assert!(validate_regions(&raw, &b).is_empty());
    }

    #[test]
    fn infinite_tolerance_gives_one_range() {
        let b = bounds(|_| 0.0, ramp_ub, 7.0, 0.1);
        assert_eq!(
            detect_breakpoints(&b, f64::INFINITY).unwrap(),
            vec![(0, 70)]
        );
        let raw = detect_regions(&b, f64::INFINITY).unwrap();
        assert_eq!(raw.len(), 1);
        assert!(validate_regions(&raw, &b).is_empty());
    }

    #[test]
    fn degenerate_bounds() {
        let b = BoundsProfile {
            dt2: 0.1,
            lb: vec![0.0],
            ub: vec![1.0],
        };
        assert_eq!(
            detect_regions(&b, 1e-3),
            Err(CorridorError::DegenerateBounds(1))
        );
    }

    fn region(beg: usize, end: usize, dt2: f64, lb: (f64, f64), ub: (f64, f64)) -> Region<f64> {
        Region {
            t_beg: beg,
            t_end: end,
            duration: (end - beg) as f64 * dt2,
            t_start: beg as f64 * dt2,
            lbias: lb.0,
            lskew: lb.1,
            ubias: ub.0,
            uskew: ub.1,
        }
    }

    #[test]
    fn split_policy() {
        let short = region(0, 8, 0.1, (0.0, 1.0), (10.0, 2.0));
        assert_eq!(region_split(&[short], 1.0), vec![short]);
        let exact = region(0, 10, 0.1, (0.0, 1.0), (10.0, 2.0));
        assert_eq!(region_split(&[exact], 1.0), vec![exact]);

        let long = region(0, 25, 0.1, (0.0, 1.0), (10.0, 2.0));
        let pieces = region_split(&[long], 1.0);
        let durations: Vec<f64> = pieces.iter().map(|r| r.duration).collect();
        assert_eq!(durations.len(), 3);
        for (d, e) in durations.iter().zip([1.0, 1.0, 0.5]) {
            assert!((d - e).abs() < 1e-12);
        }
        for k in 0..=2500 {
            let t = k as f64 * 1e-3;
            let p = pieces.iter().find(|p| t <= p.t_finish() + 1e-12).unwrap();
            assert!((p.lower_at(t) - long.lower_at(t)).abs() < 1e-12);
            assert!((p.upper_at(t) - long.upper_at(t)).abs() < 1e-12);
        }
    }

    #[test]
    fn merge_absorbs_short_region() {
        let dt2 = 0.05;
        let b = bounds(|t| if t < 1.0 { 0.0 } else { t - 1.0 }, |_| 40.0, 2.05, dt2);
        let a = region(0, 20, dt2, (0.0, 0.0), (40.0, 0.0));
        let s = region(20, 21, dt2, (0.0, 1.0), (40.0, 0.0));
        let c = region(21, 41, dt2, (0.05, 1.0), (40.0, 0.0));
        let regions = vec![a, s, c];
        assert!(validate_regions(&regions, &b).is_empty());
        let merged = region_merge(&regions, 0.2, 2.0);
        assert_eq!(merged.len(), 2);
        // lower skew 1.0 matches the later neighbour
        assert_eq!(merged[0], a);
        assert_eq!((merged[1].t_beg, merged[1].t_end), (20, 41));
        assert!(validate_regions(&merged, &b).is_empty());
    }

    #[test]
    fn merge_across_jump_keeps_gentle_slope() {
        let dt2 = 0.1;
        let lb = |t: f64| {
            if t < 0.55 {
                0.0
            } else {
                30.0 + 5.0 * (t - 0.6)
            }
        };
        let b = bounds(lb, |_| 100.0, 1.6, dt2);
        let a = region(0, 5, dt2, (0.0, 0.0), (100.0, 0.0));
        let s = region(5, 6, dt2, (0.0, 300.0), (100.0, 0.0));
        let c = region(6, 16, dt2, (30.0, 5.0), (100.0, 0.0));
        let merged = region_merge(&[a, s, c], 0.2, 2.0);
        assert_eq!(merged.len(), 2);
        let m = merged[1];
        assert_eq!((m.t_beg, m.t_end), (5, 16));
        assert!((m.lskew - 5.0).abs() < 1e-9, "{m:?}");
        assert!((m.lbias - 29.5).abs() < 1e-9, "{m:?}");
        assert!(validate_regions(&merged, &b).is_empty());
    }

    #[test]
    fn merge_keeps_long_regions_and_lone_region() {
        let r = vec![
            region(0, 10, 0.1, (0.0, 0.0), (5.0, 0.0)),
            region(10, 20, 0.1, (0.0, 0.0), (5.0, 0.0)),
        ];
        assert_eq!(region_merge(&r, 0.2, 1.0), r);
        let lone = vec![region(0, 1, 0.01, (0.0, 0.0), (5.0, 0.0))];
        assert_eq!(region_merge(&lone, 0.2, 1.0), lone);
    }

    #[test]
    fn merge_rebalances_when_too_long() {
        let dt2 = 0.1;
        let a = region(0, 10, dt2, (0.0, 0.0), (40.0, 0.0));
        let s = region(10, 11, dt2, (0.0, 0.0), (40.0, -50.0));
        let merged = region_merge(&[a, s], 0.2, 1.0);
        assert_eq!(merged.len(), 2);
        assert!(merged
            .iter()
            .all(|r| r.duration <= 1.0 + 1e-12 && r.duration >= 0.2 - 1e-12));
        assert_eq!((merged[0].t_beg, merged[1].t_end), (0, 11));
        for r in &merged {
            for i in r.t_beg..=r.t_end {
                let t = i as f64 * dt2;
                let orig_hi = if i <= 10 { 40.0 } else { s.upper_at(t) };
                assert!(r.upper_at(t) <= orig_hi + 1e-9);
            }
        }
    }

    #[test]
    fn validation_reports_problems() {
        let b = bounds(|_| 1.0, |_| 10.0, 1.0, 0.1);
        let low = region(0, 10, 0.1, (0.5, 0.0), (10.0, 0.0));
        let v = validate_regions(&[low], &b);
        assert!(v
            .iter()
            .any(|x| matches!(x, RegionViolation::BelowLowerBound { stamp: 0, .. })));

        let crossing = region(0, 10, 0.1, (1.0, 20.0), (10.0, -20.0));
        let v = validate_regions(&[crossing], &b);
        assert!(v
            .iter()
            .any(|x| matches!(x, RegionViolation::NotSeparated { .. })));
    }
}
