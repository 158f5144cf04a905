//! Equations of motion, elastic reflection and billiard simulation.
//!
//! Planar systems are integrated in the gnomonic chart, curved ones in
//! ambient 3-space with the position and velocity projected back onto the
//! manifold after every step. Internally both use a six-component phase
//! vector `(q, v)`; planar states keep `z = v_z = 0`.

mod reflect;
pub mod rk;
mod simulate;

pub use reflect::{reflect, reflect_vector, Reflection};
pub use rk::{Tolerances, Vec6};
pub use simulate::{locate_crossing, simulate, step, Crossing, Limits};

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::conics::ConicSpec;
use crate::error::{Error, Result};
use crate::potentials::{self, EnergyPair, LagrangeParams};
use crate::spaces::{self, Chart, ChartPoint, SpaceSpec, TangentVector};

/// Position and velocity in the space's native chart at time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub t: f64,
    pub pos: ChartPoint,
    pub vel: TangentVector,
}

impl State {
    pub fn new(t: f64, vel: TangentVector) -> Self {
        State { t, pos: vel.base(), vel }
    }

    pub fn plane(t: f64, p: Vector2<f64>, v: Vector2<f64>) -> Self {
        Self::new(t, TangentVector::Gnomonic { base: p, v })
    }

    pub fn ambient(t: f64, q: Vector3<f64>, v: Vector3<f64>) -> Self {
        Self::new(t, TangentVector::Ambient3 { base: q, v })
    }

    /// Curved state from gnomonic data: lifts the point and converts the
    /// planar-time chart velocity into a curved velocity.
    pub fn lifted(t: f64, p: Vector2<f64>, v: Vector2<f64>, space: &SpaceSpec) -> Result<Self> {
        let (q, w) = potentials::lift_state(&p, &v, space)?;
        Ok(Self::ambient(t, q, w))
    }

    pub fn chart(&self) -> Chart {
        self.pos.chart()
    }

    pub fn phase(&self, space: &SpaceSpec) -> Result<Vec6> {
        match (self.vel, space.is_curved()) {
            (TangentVector::Ambient3 { base, v }, true) => Ok(Vec6::new(base.x, base.y, base.z, v.x, v.y, v.z)),
            (TangentVector::Gnomonic { base, v }, false) => Ok(Vec6::new(base.x, base.y, 0.0, v.x, v.y, 0.0)),
            (other, curved) => Err(Error::ChartMismatch {
                expected: if curved { Chart::Ambient3 } else { Chart::Gnomonic },
                found: other.chart(),
            }),
        }
    }

    pub fn from_phase(t: f64, y: &Vec6, space: &SpaceSpec) -> Self {
        if space.is_curved() {
            Self::ambient(t, Vector3::new(y[0], y[1], y[2]), Vector3::new(y[3], y[4], y[5]))
        } else {
            Self::plane(t, Vector2::new(y[0], y[1]), Vector2::new(y[3], y[4]))
        }
    }

    /// Gnomonic position and planar-time chart velocity of the state or of
    /// its projection.
    pub fn chart_state(&self, space: &SpaceSpec) -> Result<(Vector2<f64>, Vector2<f64>)> {
        match self.vel {
            TangentVector::Gnomonic { base, v } => Ok((base, v)),
            TangentVector::Ambient3 { base, v } => potentials::chart_state(&base, &v, space),
            TangentVector::Stereographic { .. } => Err(Error::ChartMismatch { expected: Chart::Gnomonic, found: Chart::Stereographic }),
        }
    }

    /// Ambient coordinates of the position; planar states report `(x̃, ỹ, −1)`.
    pub fn ambient_position(&self) -> Vector3<f64> {
        match self.pos {
            ChartPoint::Ambient3(q) => q,
            ChartPoint::Gnomonic(p) | ChartPoint::Stereographic(p) => Vector3::new(p.x, p.y, -1.0),
        }
    }
}

/// Why a simulation stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    TimeLimit,
    BounceLimit,
    Collision,
    SingularSet,
    DomainExit,
    Numerical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub state: State,
    pub energy: EnergyPair,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReflectionEvent {
    pub t: f64,
    pub pos: ChartPoint,
    pub v_in: TangentVector,
    pub v_out: TangentVector,
    pub wall_index: usize,
    pub normal: TangentVector,
    pub energy_before: EnergyPair,
    pub energy_after: EnergyPair,
    /// Incidence so shallow that `|k₂|/|v| < 1e−8`.
    pub grazing: bool,
    /// The point lies on two wall members at once.
    pub corner: bool,
}

impl ReflectionEvent {
    pub fn native_jump(&self) -> f64 {
        (self.energy_after.e_native - self.energy_before.e_native).abs()
    }

    pub fn partner_jump(&self) -> f64 {
        (self.energy_after.e_partner - self.energy_before.e_partner).abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub space: SpaceSpec,
    pub samples: Vec<Sample>,
    pub events: Vec<ReflectionEvent>,
    pub termination: Termination,
    #[serde(default)]
    pub message: Option<String>,
}

impl TrajectoryRecord {
    /// Largest deviation of the native energy from its initial value.
    pub fn native_drift(&self) -> f64 {
        drift(self.samples.iter().map(|s| s.energy.e_native))
    }

    /// Largest deviation of the partner energy from its initial value.
    pub fn partner_drift(&self) -> f64 {
        drift(self.samples.iter().map(|s| s.energy.e_partner))
    }

    /// Largest native-energy drift within any reflection-free stretch.
    pub fn native_drift_between_reflections(&self) -> f64 {
        let mut worst: f64 = 0.0;
        let mut start: Option<f64> = None;
        let mut next_event = self.events.iter().map(|e| e.t).peekable();
        for s in &self.samples {
            while next_event.peek().is_some_and(|&te| te <= s.state.t) {
                next_event.next();
                start = None;
            }
            let e = s.energy.e_native;
            match start {
                None => start = Some(e),
                Some(e0) => worst = worst.max((e - e0).abs()),
            }
        }
        worst
    }

    /// Total variation of the partner energy over the samples.
    pub fn partner_variation(&self) -> f64 {
        self.samples.windows(2).map(|w| (w[1].energy.e_partner - w[0].energy.e_partner).abs()).sum()
    }

    pub fn max_partner_jump(&self) -> f64 {
        self.events.iter().map(ReflectionEvent::partner_jump).fold(0.0, f64::max)
    }

    pub fn max_native_jump(&self) -> f64 {
        self.events.iter().map(ReflectionEvent::native_jump).fold(0.0, f64::max)
    }
}

fn drift(values: impl Iterator<Item = f64>) -> f64 {
    let mut first = None;
    let mut worst: f64 = 0.0;
    for v in values {
        let e0 = *first.get_or_insert(v);
        worst = worst.max((v - e0).abs());
    }
    worst
}

/// Right-hand side `(v, a)` of the equations of motion.
pub(crate) fn vector_field(y: &Vec6, params: &LagrangeParams, space: &SpaceSpec) -> Result<Vec6> {
    if space.is_curved() {
        let s = space.sign();
        let q = Vector3::new(y[0], y[1], y[2]);
        let v = Vector3::new(y[3], y[4], y[5]);
        let f = potentials::force_curved(&q, params, space)?;
        let mu = -s * spaces::pairing(&v, &v, s);
        let acc = f + q * mu;
        Ok(Vec6::new(v.x, v.y, v.z, acc.x, acc.y, acc.z))
    } else {
        let f = potentials::force_plane(&Vector2::new(y[0], y[1]), params, space)?;
        Ok(Vec6::new(y[3], y[4], 0.0, f.x, f.y, 0.0))
    }
}

/// Pull a curved phase vector back onto the manifold and its tangent bundle.
pub(crate) fn reproject(y: &Vec6, space: &SpaceSpec) -> Result<Vec6> {
    if !space.is_curved() {
        return Ok(*y);
    }
    let q = spaces::project_to_manifold(&Vector3::new(y[0], y[1], y[2]), space)?;
    let v = spaces::tangent_project(&q, &Vector3::new(y[3], y[4], y[5]), space);
    Ok(Vec6::new(q.x, q.y, q.z, v.x, v.y, v.z))
}

pub(crate) fn wall_value(member: &ConicSpec, y: &Vec6) -> f64 {
    if member.space.is_curved() {
        member.eval_ambient(&Vector3::new(y[0], y[1], y[2]))
    } else {
        member.eval_plane(&Vector2::new(y[0], y[1]))
    }
}

pub(crate) fn wall_active(member: &ConicSpec, y: &Vec6) -> bool {
    if member.space.is_curved() {
        member.is_active_ambient(&Vector3::new(y[0], y[1], y[2]))
    } else {
        member.is_active_chart(&Vector2::new(y[0], y[1]))
    }
}

/// Rate of change of a member's implicit value along the motion.
pub(crate) fn wall_rate(member: &ConicSpec, y: &Vec6) -> f64 {
    if member.space.is_curved() {
        member.grad_ambient(&Vector3::new(y[0], y[1], y[2])).dot(&Vector3::new(y[3], y[4], y[5]))
    } else {
        member.grad_plane(&Vector2::new(y[0], y[1])).dot(&Vector2::new(y[3], y[4]))
    }
}
