use nalgebra::{Vector2, Vector3};

use super::State;
use crate::conics::{self, ConicSpec};
use crate::error::{Error, Result};
use crate::spaces::{self, pairing, SpaceSpec, TangentVector};

/// Largest implicit value accepted as "on the wall".
pub const ON_WALL_TOL: f64 = 1e-10;
/// Relative normal speed below which an incidence counts as grazing.
pub const GRAZING_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reflection {
    pub state: State,
    pub normal: TangentVector,
    /// Normal component `k₂` of the incoming velocity.
    pub k_normal: f64,
    pub grazing: bool,
}

/// `v − 2⟨v, n⟩ n` for a unit normal `n` in the given inner product.
pub fn reflect_vector<V>(v: &V, n: &V, inner: impl Fn(&V, &V) -> f64) -> (V, f64)
where
    V: Clone + std::ops::Sub<Output = V> + std::ops::Mul<f64, Output = V>,
{
    let k2 = inner(v, n);
    (v.clone() - n.clone() * (2.0 * k2), k2)
}

/// Elastic reflection of the state's velocity at a wall member: the
/// tangential component is kept and the normal component flips sign in the
/// space's metric.
pub fn reflect(state: &State, member: &ConicSpec, space: &SpaceSpec) -> Result<Reflection> {
    let value = conics::implicit_eval(member, &state.pos)?;
    if value.abs() > ON_WALL_TOL {
        return Err(Error::domain(format!("state is not on the wall (implicit value {value:e})")));
    }
    match state.vel {
        TangentVector::Ambient3 { base, v } => {
            let s = space.sign();
            let n = conics::normal_ambient(member, &base)?;
            let (w, k2) = reflect_vector(&v, &n, |a: &Vector3<f64>, b: &Vector3<f64>| pairing(a, b, s));
            let w = spaces::tangent_project(&base, &w, space);
            let speed = pairing(&v, &v, s).sqrt();
            Ok(Reflection {
                state: State::ambient(state.t, base, w),
                normal: TangentVector::Ambient3 { base, v: n },
                k_normal: k2,
                grazing: k2.abs() < GRAZING_TOL * speed,
            })
        }
        TangentVector::Gnomonic { base, v } => {
            let n = conics::normal_plane(member, &base)?;
            let inner = |a: &Vector2<f64>, b: &Vector2<f64>| spaces::affine_inner(a, b, space);
            let (w, k2) = reflect_vector(&v, &n, inner);
            let speed = inner(&v, &v).sqrt();
            Ok(Reflection {
                state: State::plane(state.t, base, w),
                normal: TangentVector::Gnomonic { base, v: n },
                k_normal: k2,
                grazing: k2.abs() < GRAZING_TOL * speed,
            })
        }
        TangentVector::Stereographic { .. } => Err(Error::ChartMismatch {
            expected: space.native_chart(),
            found: spaces::Chart::Stereographic,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::Curvature;

    #[test]
    fn tangential_velocity_unchanged_and_normal_negated() {
        let space = SpaceSpec::plane(Curvature::Positive, 0.0).unwrap();
        let circle = ConicSpec::circle(space, [0.0, 0.0], 1.0).unwrap();
        let along = reflect(&State::plane(0.0, Vector2::new(1.0, 0.0), Vector2::new(0.0, 2.0)), &circle, &space).unwrap();
        assert_eq!(along.state.vel.components(), vec![0.0, 2.0]);
        assert!(along.grazing);
        let head_on = reflect(&State::plane(0.0, Vector2::new(1.0, 0.0), Vector2::new(3.0, 0.0)), &circle, &space).unwrap();
        assert_eq!(head_on.state.vel.components(), vec![-3.0, 0.0]);
    }

    #[test]
    fn off_wall_state_is_rejected() {
        let space = SpaceSpec::plane(Curvature::Positive, 0.0).unwrap();
        let circle = ConicSpec::circle(space, [0.0, 0.0], 1.0).unwrap();
        assert!(reflect(&State::plane(0.0, Vector2::new(0.5, 0.0), Vector2::new(1.0, 0.0)), &circle, &space).is_err());
    }

    #[test]
    fn curved_reflection_preserves_speed() {
        for space in [SpaceSpec::sphere(0.7).unwrap(), SpaceSpec::hyperboloid(0.7).unwrap()] {
            let c = ConicSpec::confocal(space, 0.8).unwrap();
            let q = spaces::central_lift_up(&c.sample_chart(0.9, true), &space).unwrap();
            let v = spaces::tangent_project(&q, &Vector3::new(0.3, -0.8, 0.2), &space);
            let r = reflect(&State::ambient(0.0, q, v), &c, &space).unwrap();
            let w = Vector3::from_vec(r.state.vel.components());
            let s = space.sign();
            assert!((pairing(&v, &v, s) - pairing(&w, &w, s)).abs() < 1e-14);
            let n = Vector3::from_vec(r.normal.components());
            assert!((pairing(&v, &n, s) + pairing(&w, &n, s)).abs() < 1e-14);
        }
    }
}
