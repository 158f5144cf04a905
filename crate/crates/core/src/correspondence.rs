//! Whole-trajectory projection between a curved billiard and its planar
//! partner, and time-parametrization-free comparison of trajectories.

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::conics::WallSet;
use crate::dynamics::{self, Limits, ReflectionEvent, Sample, State, Termination, Tolerances, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::potentials::{self, EnergyPair, LagrangeParams};
use crate::spaces::{self, pairing, Direction, SpaceSpec, TangentVector};

fn swap(e: EnergyPair) -> EnergyPair {
    EnergyPair { e_native: e.e_partner, e_partner: e.e_native }
}

fn renormalize_plane(n: Vector2<f64>, space: &SpaceSpec) -> Vector2<f64> {
    n / spaces::affine_inner(&n, &n, space).sqrt()
}

/// Map a tangent vector to the partner geometry, converting between curved
/// time and planar time.
pub fn map_velocity(tv: &TangentVector, direction: Direction, space: &SpaceSpec) -> Result<TangentVector> {
    match (direction, tv) {
        (Direction::Down, TangentVector::Ambient3 { base, v }) => {
            let (p, w) = potentials::chart_state(base, v, space)?;
            Ok(TangentVector::Gnomonic { base: p, v: w })
        }
        (Direction::Up, TangentVector::Gnomonic { base, v }) => {
            let (q, w) = potentials::lift_state(base, v, space)?;
            Ok(TangentVector::Ambient3 { base: q, v: w })
        }
        _ => spaces::pushforward_velocity(tv, direction, space),
    }
}

/// Wall normal in the partner geometry: push forward and renormalize.
pub fn map_normal(tv: &TangentVector, direction: Direction, space: &SpaceSpec) -> Result<TangentVector> {
    let target = space.partner();
    let mapped = spaces::pushforward_velocity(tv, direction, space)?;
    Ok(match mapped {
        TangentVector::Gnomonic { base, v } => TangentVector::Gnomonic { base, v: renormalize_plane(v, &target) },
        TangentVector::Ambient3 { base, v } => {
            let s = target.sign();
            let v = spaces::tangent_project(&base, &v, &target);
            TangentVector::Ambient3 { base, v: v / pairing(&v, &v, s).sqrt() }
        }
        other => other,
    })
}

/// Relative difference between the planar force of the partner problem and
/// the chart acceleration, in planar time, of the curved motion through
/// `(q, v)`.
pub fn force_correspondence_error(q: &Vector3<f64>, v: &Vector3<f64>, params: &LagrangeParams, space: &SpaceSpec) -> Result<f64> {
    if !space.is_curved() {
        return Err(Error::domain("force correspondence starts from a curved space"));
    }
    let s = space.sign();
    let acc = potentials::force_curved(q, params, space)? + q * (-s * pairing(v, v, s));
    let (x, dx, ddx) = (Vector2::new(q.x, q.y), Vector2::new(v.x, v.y), Vector2::new(acc.x, acc.y));
    let (z, dz, ddz) = (q.z, v.z, acc.z);
    // p = −(x, y)/z and ρ = 1/z², differentiated in curved time.
    let p = -x / z;
    let dp = -dx / z + x * (dz / (z * z));
    let ddp = -ddx / z + dx * (2.0 * dz / (z * z)) + x * (ddz / (z * z)) - x * (2.0 * dz * dz / (z * z * z));
    let rho = 1.0 / (z * z);
    let drho = -2.0 * dz / (z * z * z);
    let planar_acc = (ddp * rho - dp * drho) / (rho * rho * rho);
    let expected = potentials::force_plane(&p, &params.partner(space)?, &space.partner())?;
    Ok((planar_acc - expected).norm() / expected.norm().max(1e-300))
}

/// Rate `d(t_target)/d(t_source)` and its derivative along the motion.
fn time_rate(tv: &TangentVector, direction: Direction, space: &SpaceSpec) -> Result<(f64, f64)> {
    let s = space.curvature().sign();
    match (direction, tv) {
        (Direction::Down, TangentVector::Ambient3 { base, v }) => {
            // dt/dτ = ρ, and dρ/dτ = 2s p·(dp/dτ)
            let p = spaces::central_project_down(base, space)?;
            let rho = spaces::reparametrize_rate(&p, space)?;
            let dp = spaces::pushforward_down(base, v, space)?;
            Ok((rho, 2.0 * s * p.dot(&dp)))
        }
        (Direction::Up, TangentVector::Gnomonic { base, v }) => {
            // dτ/dt = 1/ρ
            let rho = spaces::reparametrize_rate(base, space)?;
            let drho = 2.0 * s * base.dot(v);
            Ok((1.0 / rho, -drho / (rho * rho)))
        }
        (_, other) => Err(Error::ChartMismatch { expected: space.native_chart(), found: other.chart() }),
    }
}

/// Project every sample and event of a record to the partner geometry.
/// Partner time is recomputed by integrating the reparametrization rate
/// along the samples with the end-corrected trapezoidal rule.
pub fn project_trajectory(rec: &TrajectoryRecord, direction: Direction) -> Result<TrajectoryRecord> {
    let space = rec.space;
    let expected = if space.is_curved() { Direction::Down } else { Direction::Up };
    if direction != expected {
        return Err(Error::domain(format!("cannot project a {:?} record {:?}", space.kind, direction)));
    }
    let target = space.partner();
    let mut samples = Vec::with_capacity(rec.samples.len());
    let mut times: Vec<(f64, f64)> = Vec::with_capacity(rec.samples.len());
    let mut prev: Option<(f64, f64, f64, f64)> = None;
    let mut pending = rec.events.iter().peekable();
    for s in &rec.samples {
        let (r, dr) = time_rate(&s.state.vel, direction, &space)?;
        // the rate's derivative jumps at a reflection; close the interval
        // with the incoming velocity
        let mut dr_end = dr;
        while let Some(e) = pending.peek() {
            if e.t < s.state.t {
                pending.next();
            } else {
                if e.t == s.state.t {
                    dr_end = time_rate(&e.v_in, direction, &space)?.1;
                }
                break;
            }
        }
        let t_new = match prev {
            None => s.state.t,
            Some((t0, tn0, r0, dr0)) => {
                let h = s.state.t - t0;
                tn0 + 0.5 * h * (r0 + r) + h * h / 12.0 * (dr0 - dr_end)
            }
        };
        prev = Some((s.state.t, t_new, r, dr));
        times.push((s.state.t, t_new));
        let vel = map_velocity(&s.state.vel, direction, &space)?;
        samples.push(Sample { state: State::new(t_new, vel), energy: swap(s.energy) });
    }
    let time_of = |t: f64| -> Result<f64> {
        let i = times.partition_point(|(ts, _)| *ts < t);
        match times.get(i) {
            Some((ts, tn)) if *ts == t => Ok(*tn),
            _ => Err(Error::Numerical(format!("no sample at event time {t}"))),
        }
    };
    let mut events = Vec::with_capacity(rec.events.len());
    for e in &rec.events {
        let v_in = map_velocity(&e.v_in, direction, &space)?;
        events.push(ReflectionEvent {
            t: time_of(e.t)?,
            pos: v_in.base(),
            v_in,
            v_out: map_velocity(&e.v_out, direction, &space)?,
            wall_index: e.wall_index,
            normal: map_normal(&e.normal, direction, &space)?,
            energy_before: swap(e.energy_before),
            energy_after: swap(e.energy_after),
            grazing: e.grazing,
            corner: e.corner,
        });
    }
    Ok(TrajectoryRecord { space: target, samples, events, termination: rec.termination, message: rec.message.clone() })
}

/// Result of a point-set comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    /// Largest distance between arc-length-matched points.
    pub max_distance: f64,
    pub segments: usize,
    /// Set when the records differ structurally (event counts or wall order).
    pub mismatch: Option<String>,
}

impl Comparison {
    pub fn passes(&self, threshold: f64) -> bool {
        self.mismatch.is_none() && self.max_distance < threshold
    }
}

/// A curve sample: parameter, position and velocity. Planar curves use a
/// zero third component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveNode {
    pub t: f64,
    pub x: Vector3<f64>,
    pub v: Vector3<f64>,
}

impl CurveNode {
    pub fn planar(t: f64, x: Vector2<f64>, v: Vector2<f64>) -> Self {
        CurveNode { t, x: Vector3::new(x.x, x.y, 0.0), v: Vector3::new(v.x, v.y, 0.0) }
    }
}

type Node = CurveNode;

fn node(t: f64, tv: &TangentVector) -> Node {
    let (x, v) = match *tv {
        TangentVector::Ambient3 { base, v } => (base, v),
        TangentVector::Gnomonic { base, v } | TangentVector::Stereographic { base, v } => {
            (Vector3::new(base.x, base.y, 0.0), Vector3::new(v.x, v.y, 0.0))
        }
    };
    Node { t, x, v }
}

const GAUSS_X: [f64; 5] = [-0.906_179_845_938_664, -0.538_469_310_105_683, 0.0, 0.538_469_310_105_683, 0.906_179_845_938_664];
const GAUSS_W: [f64; 5] = [0.236_926_885_056_189, 0.478_628_670_499_366, 0.568_888_888_888_889, 0.478_628_670_499_366, 0.236_926_885_056_189];

/// A piecewise cubic Hermite curve with cumulative arc length.
struct Polyline {
    nodes: Vec<Node>,
    cumulative: Vec<f64>,
}

impl Polyline {
    fn new(nodes: Vec<Node>) -> Self {
        let mut cumulative = vec![0.0];
        for k in 0..nodes.len().saturating_sub(1) {
            let len = Self::piece_length(&nodes[k], &nodes[k + 1], 1.0);
            cumulative.push(cumulative[k] + len);
        }
        Polyline { nodes, cumulative }
    }

    fn length(&self) -> f64 {
        *self.cumulative.last().unwrap_or(&0.0)
    }

    fn derivative(a: &Node, b: &Node, u: f64) -> Vector3<f64> {
        let h = b.t - a.t;
        let d00 = 6.0 * u * u - 6.0 * u;
        let d10 = 3.0 * u * u - 4.0 * u + 1.0;
        let d11 = 3.0 * u * u - 2.0 * u;
        (a.x * d00 - b.x * d00) / h + a.v * d10 + b.v * d11
    }

    fn point(a: &Node, b: &Node, u: f64) -> Vector3<f64> {
        let h = b.t - a.t;
        let u2 = u * u;
        let u3 = u2 * u;
        a.x * (2.0 * u3 - 3.0 * u2 + 1.0) + a.v * (h * (u3 - 2.0 * u2 + u)) + b.x * (3.0 * u2 - 2.0 * u3)
            + b.v * (h * (u3 - u2))
    }

    /// Arc length of the piece from `u = 0` to `u = upto`.
    fn piece_length(a: &Node, b: &Node, upto: f64) -> f64 {
        let h = b.t - a.t;
        let mut sum = 0.0;
        for (x, w) in GAUSS_X.iter().zip(GAUSS_W.iter()) {
            let u = 0.5 * upto * (x + 1.0);
            sum += w * Self::derivative(a, b, u).norm();
        }
        0.5 * upto * sum * h
    }

    /// Point at arc length `s` from the start.
    fn at(&self, s: f64) -> Vector3<f64> {
        if self.nodes.len() == 1 {
            return self.nodes[0].x;
        }
        let k = self.cumulative.partition_point(|&c| c < s).clamp(1, self.nodes.len() - 1) - 1;
        let (a, b) = (&self.nodes[k], &self.nodes[k + 1]);
        let target = s - self.cumulative[k];
        let total = self.cumulative[k + 1] - self.cumulative[k];
        if total <= 0.0 {
            return a.x;
        }
        let h = b.t - a.t;
        let (mut lo, mut hi) = (0.0, 1.0);
        let mut u = (target / total).clamp(0.0, 1.0);
        for _ in 0..60 {
            let g = Self::piece_length(a, b, u) - target;
            if g.abs() < 1e-15 * total.max(1.0) {
                break;
            }
            if g > 0.0 {
                hi = u;
            } else {
                lo = u;
            }
            let speed = Self::derivative(a, b, u).norm() * h;
            let newton = u - g / speed;
            u = if speed > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        }
        Self::point(a, b, u)
    }
}

/// Split a record into bounce segments of Hermite nodes. Each segment runs
/// from the initial or post-reflection state to the next reflection point.
fn segments(rec: &TrajectoryRecord) -> Vec<Vec<Node>> {
    let mut out = Vec::new();
    let mut current = Vec::new();
    let mut events = rec.events.iter().peekable();
    for s in &rec.samples {
        while let Some(e) = events.peek() {
            if e.t <= s.state.t {
                current.push(node(e.t, &e.v_in));
                out.push(std::mem::take(&mut current));
                events.next();
            } else {
                break;
            }
        }
        if current.last().is_some_and(|n: &Node| n.t >= s.state.t) {
            continue;
        }
        current.push(node(s.state.t, &s.state.vel));
    }
    if !current.is_empty() {
        out.push(current);
    }
    out
}

/// Number of arc-length probes per bounce segment.
const PROBES: usize = 400;

/// Compare two records as point sets: each bounce segment is reparametrized
/// by arc length and matched pointwise; the last, open segment is compared
/// over the common length.
pub fn compare_point_sets(a: &TrajectoryRecord, b: &TrajectoryRecord) -> Result<Comparison> {
    let (ca, cb) = (a.samples.first().map(|s| s.state.chart()), b.samples.first().map(|s| s.state.chart()));
    if ca != cb {
        return Err(Error::ChartMismatch {
            expected: ca.unwrap_or(spaces::Chart::Gnomonic),
            found: cb.unwrap_or(spaces::Chart::Gnomonic),
        });
    }
    let mut mismatch = None;
    if a.events.len() != b.events.len() {
        mismatch = Some(format!("event counts differ: {} vs {}", a.events.len(), b.events.len()));
    } else if a.events.iter().zip(&b.events).any(|(x, y)| x.wall_index != y.wall_index) {
        mismatch = Some("wall members hit in a different order".to_string());
    }
    let sa = segments(a);
    let sb = segments(b);
    let n = sa.len().min(sb.len());
    let mut worst: f64 = 0.0;
    for k in 0..n {
        let closed = k < a.events.len() && k < b.events.len();
        worst = worst.max(compare_curves(&sa[k], &sb[k], closed));
    }
    Ok(Comparison { max_distance: worst, segments: n, mismatch })
}

/// Largest distance between two Hermite curves matched by arc length. Closed
/// curves are matched by arc-length fraction; open ones over their common
/// length from the start.
pub fn compare_curves(a: &[CurveNode], b: &[CurveNode], closed: bool) -> f64 {
    if a.is_empty() || b.is_empty() {
        return f64::INFINITY;
    }
    let pa = Polyline::new(a.to_vec());
    let pb = Polyline::new(b.to_vec());
    let (la, lb) = (pa.length(), pb.length());
    let mut worst: f64 = 0.0;
    for j in 0..=PROBES {
        let frac = j as f64 / PROBES as f64;
        let (xa, xb) = if closed {
            (pa.at(frac * la), pb.at(frac * lb))
        } else {
            let l = la.min(lb);
            (pa.at(frac * l), pb.at(frac * l))
        };
        worst = worst.max((xa - xb).norm());
    }
    worst
}

/// Arc length of a Hermite curve.
pub fn curve_length(nodes: &[CurveNode]) -> f64 {
    Polyline::new(nodes.to_vec()).length()
}

/// `|det|` of the velocity Jacobian of the energy pair at a state.
pub fn independence_check(state: &State, space: &SpaceSpec) -> Result<f64> {
    let (p, v) = state.chart_state(space)?;
    let chart_space = if space.is_curved() { space.partner() } else { *space };
    Ok(potentials::independence_det(&p, &v, &chart_space))
}

/// A curved billiard, its projection, and an independently simulated planar
/// twin started from the projected initial state.
#[derive(Debug, Clone)]
pub struct TwinRun {
    pub curved: TrajectoryRecord,
    pub projected: TrajectoryRecord,
    pub planar: TrajectoryRecord,
    pub comparison: Comparison,
}

pub fn twin_run(
    init: &State,
    params: &LagrangeParams,
    space: &SpaceSpec,
    wall: &WallSet,
    limits: &Limits,
    tol: &Tolerances,
) -> Result<TwinRun> {
    if !space.is_curved() {
        return Err(Error::domain("twin runs start from a curved billiard"));
    }
    let curved = dynamics::simulate(init, params, space, wall, limits, tol);
    let projected = project_trajectory(&curved, Direction::Down)?;
    let (p, v) = init.chart_state(space)?;
    let t_end = projected.samples.last().map_or(init.t, |s| s.state.t);
    let span = t_end - init.t;
    let plane_limits = Limits {
        t_max: if curved.termination == Termination::BounceLimit { 1.01 * span + 0.1 } else { span },
        bounce_max: limits.bounce_max,
        sample_dt: limits.sample_dt,
    };
    let planar = dynamics::simulate(
        &State::plane(init.t, p, v),
        &params.partner(space)?,
        &space.partner(),
        &wall.project(Direction::Down),
        &plane_limits,
        tol,
    );
    let comparison = compare_point_sets(&projected, &planar)?;
    Ok(TwinRun { curved, projected, planar, comparison })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conics::ConicSpec;

    fn free_sphere_record() -> TrajectoryRecord {
        let space = SpaceSpec::sphere(0.4).unwrap();
        let wall = WallSet::single(ConicSpec::confocal(space, 0.7).unwrap());
        let init = State::lifted(0.0, Vector2::new(0.1, 0.05), Vector2::new(0.6, 0.5), &space).unwrap();
        dynamics::simulate(&init, &LagrangeParams::default(), &space, &wall, &Limits { t_max: 20.0, bounce_max: 4, sample_dt: 0.02 }, &Tolerances::default())
    }

    #[test]
    fn identical_records_compare_to_zero() {
        let rec = free_sphere_record();
        assert_eq!(rec.termination, Termination::BounceLimit);
        let c = compare_point_sets(&rec, &rec).unwrap();
        assert_eq!(c.max_distance, 0.0);
        assert!(c.mismatch.is_none());
    }

    #[test]
    fn down_then_up_is_identity() {
        let rec = free_sphere_record();
        let down = project_trajectory(&rec, Direction::Down).unwrap();
        let up = project_trajectory(&down, Direction::Up).unwrap();
        for (a, b) in rec.samples.iter().zip(&up.samples) {
            let (x, y) = (Vector3::from_vec(a.state.vel.components()), Vector3::from_vec(b.state.vel.components()));
            assert!((a.state.ambient_position() - b.state.ambient_position()).norm() < 1e-12);
            assert!((x - y).norm() < 1e-12);
            assert!((a.state.t - b.state.t).abs() < 1e-7, "{} vs {}", a.state.t, b.state.t);
        }
        assert!(project_trajectory(&rec, Direction::Up).is_err());
    }

    #[test]
    fn resampled_record_matches() {
        let space = SpaceSpec::sphere(0.4).unwrap();
        let wall = WallSet::single(ConicSpec::confocal(space, 0.7).unwrap());
        let init = State::lifted(0.0, Vector2::new(0.1, 0.05), Vector2::new(0.6, 0.5), &space).unwrap();
        let run = |dt| dynamics::simulate(&init, &LagrangeParams::default(), &space, &wall, &Limits { t_max: 20.0, bounce_max: 4, sample_dt: dt }, &Tolerances::default());
        let c = compare_point_sets(&run(0.02), &run(0.013)).unwrap();
        assert!(c.max_distance < 1e-8, "{}", c.max_distance);
    }

    #[test]
    fn forces_correspond() {
        let params = LagrangeParams::new(0.4, -0.7, 0.3);
        for space in [SpaceSpec::sphere(0.6).unwrap(), SpaceSpec::hyperboloid(0.6).unwrap()] {
            let (q, v) = potentials::lift_state(&Vector2::new(0.3, -0.2), &Vector2::new(0.5, 1.1), &space).unwrap();
            let err = force_correspondence_error(&q, &v, &params, &space).unwrap();
            assert!(err < 1e-12, "{err}");
            let err_fast = force_correspondence_error(&q, &(v * 7.0), &params, &space).unwrap();
            assert!(err_fast < 1e-12, "{err_fast}");
            let static_err = force_correspondence_error(&q, &Vector3::zeros(), &params, &space).unwrap();
            assert!(static_err < 1e-12, "{static_err}");
        }
    }

    #[test]
    fn independence_examples() {
        let plane = SpaceSpec::plane(crate::spaces::Curvature::Positive, 1.0).unwrap();
        let s = State::plane(0.0, Vector2::zeros(), Vector2::new(1.0, 1.0));
        assert_eq!(independence_check(&s, &plane).unwrap(), 0.5);
    }
}
