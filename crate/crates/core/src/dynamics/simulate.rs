use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use super::reflect::{reflect, ON_WALL_TOL};
use super::rk::{error_norm, rk_step, step_factor, Tolerances, Vec6};
use super::{reproject, vector_field, wall_active, wall_rate, wall_value};
use super::{ReflectionEvent, Sample, State, Termination, TrajectoryRecord};
use crate::conics::WallSet;
use crate::error::{Error, Result, SingularKind};
use crate::potentials::{self, LagrangeParams};
use crate::spaces::SpaceSpec;

/// Target accuracy of located crossings, in implicit-function units.
pub const CROSSING_TOL: f64 = 1e-12;
const MAX_BISECTIONS: usize = 200;
/// Distance from a Kepler center below which a step-size collapse is read
/// as a collision.
const COLLAPSE_RADIUS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Limits {
    pub t_max: f64,
    pub bounce_max: usize,
    pub sample_dt: f64,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { t_max: 50.0, bounce_max: 20, sample_dt: 0.01 }
    }
}

/// A located wall crossing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub t: f64,
    pub state: State,
    pub wall_index: usize,
}

struct Flow<'a> {
    params: &'a LagrangeParams,
    space: &'a SpaceSpec,
    tol: &'a Tolerances,
}

impl Flow<'_> {
    fn field(&self, y: &Vec6) -> Result<Vec6> {
        vector_field(y, self.params, self.space)
    }

    /// One Runge–Kutta step with manifold re-projection and its error norm.
    fn advance(&self, y: &Vec6, h: f64) -> Result<(Vec6, f64)> {
        let (high, err) = rk_step(&|z: &Vec6| self.field(z), y, h)?;
        let norm = error_norm(&err, y, &high, self.tol);
        Ok((reproject(&high, self.space)?, norm))
    }

    fn substep(&self, y: &Vec6, h: f64) -> Result<Vec6> {
        if h == 0.0 {
            return Ok(*y);
        }
        Ok(self.advance(y, h)?.0)
    }

    /// Accept-or-shrink loop; returns the accepted step, its size and the
    /// proposal for the next one.
    fn accepted_step(&self, y: &Vec6, mut h: f64) -> Result<(Vec6, f64, f64)> {
        loop {
            let (y1, err) = self.advance(y, h)?;
            if err <= 1.0 {
                return Ok((y1, h, (h * step_factor(err)).min(self.tol.h_max)));
            }
            h *= step_factor(err);
            if h < self.tol.h_min {
                return Err(self.collapse(y));
            }
        }
    }

    fn collapse(&self, y: &Vec6) -> Error {
        let masses = [self.params.m1, self.params.m2];
        if self.space.is_curved() {
            let centers = LagrangeParams::centers_ambient(self.space);
            for i in 0..2 {
                let d = (nalgebra::Vector3::new(y[0], y[1], y[2]) - centers[i]).norm();
                if masses[i] != 0.0 && d < COLLAPSE_RADIUS {
                    return Error::Singularity { kind: SingularKind::KeplerCenter(i), distance: d };
                }
            }
        } else {
            let centers = LagrangeParams::centers_chart(self.space);
            for i in 0..2 {
                let d = (Vector2::new(y[0], y[1]) - centers[i]).norm();
                if masses[i] != 0.0 && d < COLLAPSE_RADIUS {
                    return Error::Singularity { kind: SingularKind::KeplerCenter(i), distance: d };
                }
            }
        }
        Error::Numerical("step size underflow".into())
    }

    /// Bisection on the sub-step length for a crossing of member `index`
    /// inside `(0, h]`; each probe is a fresh Runge–Kutta step from `y`.
    fn locate(&self, wall: &WallSet, index: usize, y: &Vec6, h: f64, side: f64) -> Result<(f64, Vec6)> {
        let member = &wall.conics[index];
        let (mut lo, mut hi) = (0.0, h);
        let mut y_hi = self.substep(y, h)?;
        if wall_value(member, &y_hi).abs() < CROSSING_TOL {
            return Ok((hi, y_hi));
        }
        for _ in 0..MAX_BISECTIONS {
            let mid = 0.5 * (lo + hi);
            let ym = self.substep(y, mid)?;
            let g = wall_value(member, &ym);
            if g.abs() < CROSSING_TOL {
                return Ok((mid, ym));
            }
            if g.signum() == side {
                lo = mid;
            } else {
                hi = mid;
                y_hi = ym;
            }
            if hi - lo <= f64::EPSILON * h {
                break;
            }
        }
        if wall_value(member, &y_hi).abs() < ON_WALL_TOL {
            return Ok((hi, y_hi));
        }
        Err(Error::Numerical(format!("crossing of wall member {index} did not converge")))
    }
}

/// One adaptive step starting with trial size `h`. Returns the new state and
/// the proposed next step size.
pub fn step(state: &State, params: &LagrangeParams, space: &SpaceSpec, h: f64, tol: &Tolerances) -> Result<(State, f64)> {
    if !(h > 0.0) {
        return Err(Error::domain("step size must be positive"));
    }
    let flow = Flow { params, space, tol };
    let y = state.phase(space)?;
    let (y1, taken, next) = flow.accepted_step(&y, h)?;
    Ok((State::from_phase(state.t + taken, &y1, space), next))
}

/// Locate the first crossing of an active wall member between two states of
/// one integration step, re-integrating from `start`.
pub fn locate_crossing(
    start: &State,
    end: &State,
    params: &LagrangeParams,
    space: &SpaceSpec,
    wall: &WallSet,
    tol: &Tolerances,
) -> Result<Option<Crossing>> {
    let flow = Flow { params, space, tol };
    let y0 = start.phase(space)?;
    let y1 = end.phase(space)?;
    let h = end.t - start.t;
    let mut best: Option<Crossing> = None;
    for (i, member) in wall.conics.iter().enumerate() {
        let (g0, g1) = (wall_value(member, &y0), wall_value(member, &y1));
        if g0.signum() == g1.signum() || g1 == 0.0 && g0 == 0.0 {
            continue;
        }
        let (theta, ys) = flow.locate(wall, i, &y0, h, g0.signum())?;
        if !wall_active(member, &ys) {
            continue;
        }
        if best.is_none_or(|b| start.t + theta < b.t) {
            best = Some(Crossing { t: start.t + theta, state: State::from_phase(start.t + theta, &ys, space), wall_index: i });
        }
    }
    Ok(best)
}

fn classify(err: &Error) -> Termination {
    match err {
        Error::Singularity { kind: SingularKind::Equator, .. } => Termination::SingularSet,
        Error::Singularity { .. } => Termination::Collision,
        Error::Domain(_) => Termination::DomainExit,
        _ => Termination::Numerical,
    }
}

fn side_of(member: &crate::conics::ConicSpec, y: &Vec6) -> f64 {
    let g = wall_value(member, y);
    if g.abs() <= ON_WALL_TOL {
        let rate = wall_rate(member, y);
        if rate != 0.0 {
            return rate.signum();
        }
    }
    if g == 0.0 {
        -1.0
    } else {
        g.signum()
    }
}

struct Recorder<'a> {
    params: &'a LagrangeParams,
    space: &'a SpaceSpec,
    samples: Vec<Sample>,
}

impl Recorder<'_> {
    fn push(&mut self, t: f64, y: &Vec6) -> Result<()> {
        if self.samples.last().is_some_and(|s| s.state.t >= t) {
            return Ok(());
        }
        let state = State::from_phase(t, y, self.space);
        let energy = potentials::energy_pair(&state.vel, self.params, self.space)?;
        self.samples.push(Sample { state, energy });
        Ok(())
    }
}

/// Run a billiard: integrate, locate wall crossings, reflect, and record
/// samples and events until a limit or a terminal condition is reached.
pub fn simulate(
    init: &State,
    params: &LagrangeParams,
    space: &SpaceSpec,
    wall: &WallSet,
    limits: &Limits,
    tol: &Tolerances,
) -> TrajectoryRecord {
    let mut rec = Recorder { params, space, samples: Vec::new() };
    let mut events = Vec::new();
    let (termination, message) = match run(init, params, space, wall, limits, tol, &mut rec, &mut events) {
        Ok(t) => (t, None),
        Err(e) => (classify(&e), Some(e.to_string())),
    };
    TrajectoryRecord { space: *space, samples: rec.samples, events, termination, message }
}

#[allow(clippy::too_many_arguments)]
fn run(
    init: &State,
    params: &LagrangeParams,
    space: &SpaceSpec,
    wall: &WallSet,
    limits: &Limits,
    tol: &Tolerances,
    rec: &mut Recorder,
    events: &mut Vec<ReflectionEvent>,
) -> Result<Termination> {
    let flow = Flow { params, space, tol };
    params.validate()?;
    wall.validate()?;
    if !(limits.sample_dt > 0.0) {
        return Err(Error::Config("sample_dt must be positive".into()));
    }
    let mut y = reproject(&init.phase(space)?, space)?;
    let mut t = init.t;
    let t_end = init.t + limits.t_max;
    let mut side: Vec<f64> = wall.conics.iter().map(|m| side_of(m, &y)).collect();
    rec.push(t, &y)?;
    let mut k_sample = 1u64;
    let next_sample = |k: u64| init.t + k as f64 * limits.sample_dt;
    let mut h = tol.h_init.min(tol.h_max);
    let mut bounces = 0usize;

    while t < t_end {
        let trial = h.min(t_end - t);
        let (y1, taken, h_next) = flow.accepted_step(&y, trial)?;
        if space.is_curved() && space.sign() > 0.0 && y1[2] > -1e-9 {
            return Err(if params.f != 0.0 {
                Error::Singularity { kind: SingularKind::Equator, distance: y1[2].abs() }
            } else {
                Error::domain("trajectory left the south hemisphere")
            });
        }

        let mut hit: Option<(f64, Vec6, usize)> = None;
        let mut passed = Vec::new();
        for (i, member) in wall.conics.iter().enumerate() {
            let g1 = wall_value(member, &y1);
            if g1.signum() == side[i] || g1 == 0.0 {
                continue;
            }
            let (theta, ys) = flow.locate(wall, i, &y, taken, side[i])?;
            if wall_active(member, &ys) {
                if hit.is_none_or(|(th, _, _)| theta < th) {
                    hit = Some((theta, ys, i));
                }
            } else {
                passed.push(i);
            }
        }

        let until = hit.map_or(taken, |(theta, _, _)| theta);
        while next_sample(k_sample) < t + until {
            let ts = next_sample(k_sample);
            rec.push(ts, &flow.substep(&y, ts - t)?)?;
            k_sample += 1;
        }

        match hit {
            Some((theta, ys, index)) => {
                t += theta;
                let before = State::from_phase(t, &ys, space);
                let mut member_index = index;
                let mut corner = false;
                let others: Vec<usize> = wall
                    .conics
                    .iter()
                    .enumerate()
                    .filter(|(j, m)| *j != index && wall_value(m, &ys).abs() < ON_WALL_TOL && wall_active(m, &ys))
                    .map(|(j, _)| j)
                    .collect();
                let mut refl = reflect(&before, &wall.conics[index], space)?;
                for j in others {
                    corner = true;
                    let alt = reflect(&before, &wall.conics[j], space)?;
                    if alt.k_normal.abs() > refl.k_normal.abs() {
                        refl = alt;
                        member_index = j;
                    }
                }
                let energy_before = potentials::energy_pair(&before.vel, params, space)?;
                let energy_after = potentials::energy_pair(&refl.state.vel, params, space)?;
                events.push(ReflectionEvent {
                    t,
                    pos: before.pos,
                    v_in: before.vel,
                    v_out: refl.state.vel,
                    wall_index: member_index,
                    normal: refl.normal,
                    energy_before,
                    energy_after,
                    grazing: refl.grazing,
                    corner,
                });
                y = refl.state.phase(space)?;
                rec.push(t, &y)?;
                for (j, m) in wall.conics.iter().enumerate() {
                    side[j] = side_of(m, &y);
                }
                bounces += 1;
                if bounces >= limits.bounce_max {
                    return Ok(Termination::BounceLimit);
                }
            }
            None => {
                t += taken;
                y = y1;
                for i in passed {
                    side[i] = side_of(&wall.conics[i], &y);
                }
                if next_sample(k_sample) <= t {
                    rec.push(t, &y)?;
                    k_sample += 1;
                }
                h = h_next;
            }
        }
    }
    rec.push(t, &y)?;
    Ok(Termination::TimeLimit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conics::ConicSpec;
    use crate::spaces::Curvature;
    use nalgebra::Vector3;

    fn plane0() -> SpaceSpec {
        SpaceSpec::plane(Curvature::Positive, 0.0).unwrap()
    }

    #[test]
    fn free_planar_step_is_exact() {
        let s = State::plane(0.0, Vector2::new(0.1, 0.2), Vector2::new(1.0, -0.5));
        let (next, _) = step(&s, &LagrangeParams::default(), &plane0(), 0.3, &Tolerances::default()).unwrap();
        let p = Vector2::from_vec(next.pos.coords());
        let exact = Vector2::new(0.1, 0.2) + Vector2::new(1.0, -0.5) * (next.t - s.t);
        assert!((p - exact).norm() < 1e-14);
    }

    #[test]
    fn circular_kepler_orbit_closes() {
        let params = LagrangeParams::new(1.0, 0.0, 0.0);
        let rec = simulate(
            &State::plane(0.0, Vector2::new(1.0, 0.0), Vector2::new(0.0, 1.0)),
            &params,
            &plane0(),
            &WallSet { conics: vec![] },
            &Limits { t_max: std::f64::consts::TAU, bounce_max: 10, sample_dt: 0.1 },
            &Tolerances::default(),
        );
        assert_eq!(rec.termination, Termination::TimeLimit);
        let last = rec.samples.last().unwrap();
        assert!((last.state.t - std::f64::consts::TAU).abs() < 1e-12);
        let p = Vector2::from_vec(last.state.pos.coords());
        assert!((p - Vector2::new(1.0, 0.0)).norm() < 1e-8, "{p}");
    }

    #[test]
    fn free_sphere_motion_stays_on_great_circle() {
        let space = SpaceSpec::sphere(0.4).unwrap();
        let q0 = crate::spaces::central_lift_up(&Vector2::new(0.2, -0.1), &space).unwrap();
        let v0 = crate::spaces::tangent_project(&q0, &Vector3::new(0.3, 0.5, 0.1), &space);
        let normal = q0.cross(&v0).normalize();
        let rec = simulate(
            &State::ambient(0.0, q0, v0),
            &LagrangeParams::default(),
            &space,
            &WallSet { conics: vec![] },
            &Limits { t_max: 1.5, bounce_max: 1, sample_dt: 0.05 },
            &Tolerances::default(),
        );
        for s in &rec.samples {
            let q = s.state.ambient_position();
            let v = Vector3::from_vec(s.state.vel.components());
            assert!((q.cross(&v).normalize() - normal).norm() < 1e-9);
        }
    }

    #[test]
    fn straight_line_crosses_unit_circle_at_one() {
        let space = plane0();
        let wall = WallSet::single(ConicSpec::circle(space, [0.0, 0.0], 1.0).unwrap());
        let tol = Tolerances::default();
        let start = State::plane(0.0, Vector2::zeros(), Vector2::new(2.0, 0.0));
        let (end, _) = step(&start, &LagrangeParams::default(), &space, 0.8, &tol).unwrap();
        let c = locate_crossing(&start, &end, &LagrangeParams::default(), &space, &wall, &tol).unwrap().unwrap();
        assert!((Vector2::from_vec(c.state.pos.coords()) - Vector2::new(1.0, 0.0)).norm() < 1e-12);
        let inside = State::plane(0.0, Vector2::zeros(), Vector2::new(0.5, 0.0));
        let (end, _) = step(&inside, &LagrangeParams::default(), &space, 0.5, &tol).unwrap();
        assert!(locate_crossing(&inside, &end, &LagrangeParams::default(), &space, &wall, &tol).unwrap().is_none());
    }

    #[test]
    fn aimed_at_center_collides() {
        let space = SpaceSpec::plane(Curvature::Positive, 0.5).unwrap();
        let rec = simulate(
            &State::plane(0.0, Vector2::new(0.0, 0.0), Vector2::new(0.0, 0.5)),
            &LagrangeParams::new(1.0, 0.0, 0.0),
            &space,
            &WallSet { conics: vec![] },
            &Limits { t_max: 5.0, bounce_max: 5, sample_dt: 0.1 },
            &Tolerances::default(),
        );
        assert_eq!(rec.termination, Termination::Collision);
    }
}
