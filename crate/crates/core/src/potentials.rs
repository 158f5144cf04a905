//! Kepler, Hooke and Lagrange force fields and energies.
//!
//! Planar systems use the affine metric `dx̃² + dỹ²/κ` with Kepler centers at
//! `Z̃₁ = (0, a)`, `Z̃₂ = (0, −a)` and the Hooke center at the origin. Curved
//! systems place their centers at the central lifts of those points; their
//! mass factors `m̂ᵢ` relate to the planar ones by `m = m̂/√κ`.

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, SingularKind};
use crate::spaces::{self, pairing, SpaceSpec};

/// Guard radius around Kepler centers (chart units for the plane, ambient
/// units on curved spaces) and around the equator for the spherical Hooke term.
pub const SINGULAR_GUARD: f64 = 1e-9;

/// Mass factors and Hooke strength of a Lagrange problem. The masses are the
/// planar `m` for a plane and the curved `m̂` for a sphere or hyperboloid; the
/// center half-separation `a` comes from the [`SpaceSpec`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LagrangeParams {
    #[serde(default)]
    pub m1: f64,
    #[serde(default)]
    pub m2: f64,
    #[serde(default)]
    pub f: f64,
}

/// Energy of a system together with the energy of its projective partner,
/// both evaluated on the same motion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyPair {
    pub e_native: f64,
    pub e_partner: f64,
}

impl LagrangeParams {
    pub fn new(m1: f64, m2: f64, f: f64) -> Self {
        LagrangeParams { m1, m2, f }
    }

    pub fn validate(&self) -> Result<()> {
        if [self.m1, self.m2, self.f].iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::domain("mass factors and Hooke strength must be finite"))
        }
    }

    /// Parameters of the partner system: curved `m̂` become planar `m` and
    /// vice versa. The Hooke strength is shared.
    pub fn partner(&self, space: &SpaceSpec) -> Result<LagrangeParams> {
        let sign = space.curvature().sign();
        let factor = projected_mass(1.0, space.a, sign)?;
        let scale = if space.is_curved() { factor } else { factor.recip() };
        Ok(LagrangeParams { m1: self.m1 * scale, m2: self.m2 * scale, f: self.f })
    }

    /// Kepler centers and Hooke center in the gnomonic chart.
    pub fn centers_chart(space: &SpaceSpec) -> [Vector2<f64>; 3] {
        [Vector2::new(0.0, space.a), Vector2::new(0.0, -space.a), Vector2::zeros()]
    }

    /// Kepler centers and Hooke center on the curved partner.
    pub fn centers_ambient(space: &SpaceSpec) -> [Vector3<f64>; 3] {
        let k = space.kappa().sqrt();
        [
            Vector3::new(0.0, space.a / k, -1.0 / k),
            Vector3::new(0.0, -space.a / k, -1.0 / k),
            Vector3::new(0.0, 0.0, -1.0),
        ]
    }
}

/// `m = m̂ / √(1 + sign·a²)`.
pub fn projected_mass(mhat: f64, a: f64, sign: f64) -> Result<f64> {
    let kappa = 1.0 + sign * a * a;
    if kappa <= 0.0 {
        return Err(Error::domain(format!("projected mass undefined: 1 ± a² = {kappa}")));
    }
    Ok(mhat / kappa.sqrt())
}

fn check_plane(space: &SpaceSpec) -> Result<()> {
    if space.is_curved() {
        Err(Error::domain("planar operation called with a curved space"))
    } else {
        Ok(())
    }
}

fn check_curved(space: &SpaceSpec) -> Result<()> {
    if space.is_curved() {
        Ok(())
    } else {
        Err(Error::domain("curved operation called with a planar space"))
    }
}

fn kepler_distance(p: &Vector2<f64>, center: &Vector2<f64>, index: usize, space: &SpaceSpec) -> Result<f64> {
    let d = spaces::affine_norm(&(p - center), space)?;
    if d < SINGULAR_GUARD {
        return Err(Error::Singularity { kind: SingularKind::KeplerCenter(index), distance: d });
    }
    Ok(d)
}

/// Planar Lagrange force `Σ −mᵢ‖p − Z̃ᵢ‖_a⁻³ (p − Z̃ᵢ) + 2f p`.
pub fn force_plane(p: &Vector2<f64>, params: &LagrangeParams, space: &SpaceSpec) -> Result<Vector2<f64>> {
    let [z1, z2, _] = LagrangeParams::centers_chart(space);
    let mut force = p * (2.0 * params.f);
    for (i, (m, z)) in [(params.m1, z1), (params.m2, z2)].into_iter().enumerate() {
        if m != 0.0 {
            let d = kepler_distance(p, &z, i, space)?;
            force -= (p - z) * (m / (d * d * d));
        }
    }
    Ok(force)
}

/// Ambient acceleration field of the curved Lagrange problem, already
/// projected to the tangent space at `q`.
pub fn force_curved(q: &Vector3<f64>, params: &LagrangeParams, space: &SpaceSpec) -> Result<Vector3<f64>> {
    check_curved(space)?;
    let s = space.sign();
    let [z1, z2, zmid] = LagrangeParams::centers_ambient(space);
    let mut grad = Vector3::zeros();
    for (i, (m, z)) in [(params.m1, z1), (params.m2, z2)].into_iter().enumerate() {
        if m == 0.0 {
            continue;
        }
        let dist = (q - z).norm();
        if dist < SINGULAR_GUARD {
            return Err(Error::Singularity { kind: SingularKind::KeplerCenter(i), distance: dist });
        }
        if s > 0.0 {
            let anti = (q + z).norm();
            if anti < SINGULAR_GUARD {
                return Err(Error::Singularity { kind: SingularKind::Antipode(i), distance: anti });
            }
        }
        let c = s * pairing(q, &z, s);
        let sin2 = s * (1.0 - c * c);
        grad += z * (m / (sin2 * sin2.sqrt()));
    }
    if params.f != 0.0 {
        let c = s * pairing(q, &zmid, s);
        if c.abs() < SINGULAR_GUARD {
            return Err(Error::Singularity { kind: SingularKind::Equator, distance: c.abs() });
        }
        grad -= zmid * (2.0 * params.f / (c * c * c));
    }
    Ok(spaces::tangent_project(q, &grad, space))
}

/// Force function (negative potential) of the curved Lagrange problem:
/// `m̂ cot θ` / `m̂ coth θ` per Kepler center plus `f tan²θ` / `f tanh²θ`.
pub fn force_function_curved(q: &Vector3<f64>, params: &LagrangeParams, space: &SpaceSpec) -> Result<f64> {
    check_curved(space)?;
    let s = space.sign();
    let [z1, z2, zmid] = LagrangeParams::centers_ambient(space);
    let mut u = 0.0;
    for (i, (m, z)) in [(params.m1, z1), (params.m2, z2)].into_iter().enumerate() {
        if m == 0.0 {
            continue;
        }
        let dist = (q - z).norm();
        if dist < SINGULAR_GUARD {
            return Err(Error::Singularity { kind: SingularKind::KeplerCenter(i), distance: dist });
        }
        let c = s * pairing(q, &z, s);
        u += m * c / (s * (1.0 - c * c)).sqrt();
    }
    if params.f != 0.0 {
        let c = s * pairing(q, &zmid, s);
        if c.abs() < SINGULAR_GUARD {
            return Err(Error::Singularity { kind: SingularKind::Equator, distance: c.abs() });
        }
        u += params.f * s * (1.0 / (c * c) - 1.0);
    }
    Ok(u)
}

/// Energy of the curved system from ambient position and velocity.
pub fn energy_curved(q: &Vector3<f64>, v: &Vector3<f64>, params: &LagrangeParams, space: &SpaceSpec) -> Result<f64> {
    Ok(0.5 * pairing(v, v, space.sign()) - force_function_curved(q, params, space)?)
}

/// Planar Lagrange energy in the affine metric.
pub fn energy_plane(p: &Vector2<f64>, v: &Vector2<f64>, params: &LagrangeParams, space: &SpaceSpec) -> Result<f64> {
    let kappa = space.kappa();
    if kappa <= 0.0 {
        return Err(Error::domain("affine metric degenerate"));
    }
    let [z1, z2, _] = LagrangeParams::centers_chart(space);
    let mut e = 0.5 * (v.x * v.x + v.y * v.y / kappa) - params.f * (p.x * p.x + p.y * p.y / kappa);
    for (i, (m, z)) in [(params.m1, z1), (params.m2, z2)].into_iter().enumerate() {
        if m != 0.0 {
            e -= m / kepler_distance(p, &z, i, space)?;
        }
    }
    Ok(e)
}

/// Energy of the curved system written in the gnomonic chart, with `v` the
/// chart velocity in planar time. The space supplies the curvature sign; a
/// planar space evaluates the energy of its curved partner.
pub fn energy_curved_in_chart(p: &Vector2<f64>, v: &Vector2<f64>, params: &LagrangeParams, space: &SpaceSpec) -> Result<f64> {
    let s = space.curvature().sign();
    spaces::reparametrize_rate(p, space)?;
    let kappa = space.kappa();
    let a = space.a;
    let l = p.x * v.y - p.y * v.x;
    let mut e = 0.5 * (v.norm_squared() + s * l * l) - params.f * p.norm_squared();
    for (i, (m, sgn)) in [(params.m1, 1.0), (params.m2, -1.0)].into_iter().enumerate() {
        if m == 0.0 {
            continue;
        }
        let dy = p.y - sgn * a;
        let d = (dy * dy + kappa * p.x * p.x).sqrt();
        if d < SINGULAR_GUARD {
            return Err(Error::Singularity { kind: SingularKind::KeplerCenter(i), distance: d });
        }
        e -= m * (1.0 + s * sgn * a * p.y) / d;
    }
    Ok(e)
}

/// Planar Lagrange energy written in ambient variables of a curved point.
/// On the lower half it agrees with [`energy_plane`] of the projected state
/// (planar masses and planar-time velocity); elsewhere it is its analytic
/// extension.
pub fn extended_integral(q: &Vector3<f64>, v: &Vector3<f64>, params: &LagrangeParams, space: &SpaceSpec) -> Result<f64> {
    check_curved(space)?;
    let kappa = space.kappa();
    let a = space.a;
    let (x, y, z) = (q.x, q.y, q.z);
    let (dx, dy, dz) = (v.x, v.y, v.z);
    let kinetic = ((kappa * dx * dx + dy * dy) * z * z - 2.0 * dz * (kappa * x * dx + y * dy) * z
        + dz * dz * (kappa * x * x + y * y))
        / (2.0 * kappa);
    let planar = params.partner(space)?;
    let mut potential = 0.0;
    for (i, (m, sgn)) in [(planar.m1, 1.0), (planar.m2, -1.0)].into_iter().enumerate() {
        if m == 0.0 {
            continue;
        }
        let w = y + sgn * a * z;
        let r = ((kappa * x * x + w * w) / kappa).sqrt();
        if r < SINGULAR_GUARD {
            return Err(Error::Singularity { kind: SingularKind::KeplerCenter(i), distance: r });
        }
        potential += m * z / r;
    }
    if params.f != 0.0 {
        if z.abs() < SINGULAR_GUARD {
            return Err(Error::Singularity { kind: SingularKind::Equator, distance: z.abs() });
        }
        potential -= params.f * (kappa * x * x + y * y) / (kappa * z * z);
    }
    Ok(kinetic + potential)
}

/// Partner-frame image of a curved state: gnomonic position and the chart
/// velocity in planar time, `Dπ(v)/ρ`.
pub fn chart_state(q: &Vector3<f64>, v: &Vector3<f64>, space: &SpaceSpec) -> Result<(Vector2<f64>, Vector2<f64>)> {
    let p = spaces::central_project_down(q, space)?;
    let rho = spaces::reparametrize_rate(&p, space)?;
    Ok((p, spaces::pushforward_down(q, v, space)? / rho))
}

/// Inverse of [`chart_state`]: lift a planar state to a curved state with
/// velocity in curved time.
pub fn lift_state(p: &Vector2<f64>, v: &Vector2<f64>, space: &SpaceSpec) -> Result<(Vector3<f64>, Vector3<f64>)> {
    let rho = spaces::reparametrize_rate(p, space)?;
    Ok((spaces::central_lift_up(p, space)?, spaces::pushforward_up(p, &(v * rho), space)?))
}

pub fn energy_pair_curved(q: &Vector3<f64>, v: &Vector3<f64>, params: &LagrangeParams, space: &SpaceSpec) -> Result<EnergyPair> {
    let e_native = energy_curved(q, v, params, space)?;
    let (p, w) = chart_state(q, v, space)?;
    let e_partner = energy_plane(&p, &w, &params.partner(space)?, &space.partner())?;
    Ok(EnergyPair { e_native, e_partner })
}

pub fn energy_pair_plane(p: &Vector2<f64>, v: &Vector2<f64>, params: &LagrangeParams, space: &SpaceSpec) -> Result<EnergyPair> {
    check_plane(space)?;
    let e_native = energy_plane(p, v, params, space)?;
    let e_partner = energy_curved_in_chart(p, v, &params.partner(space)?, space)?;
    Ok(EnergyPair { e_native, e_partner })
}

/// Energy pair of a state given as a tangent vector in the space's native chart.
pub fn energy_pair(tv: &spaces::TangentVector, params: &LagrangeParams, space: &SpaceSpec) -> Result<EnergyPair> {
    use spaces::{Chart, TangentVector};
    match (tv, space.is_curved()) {
        (TangentVector::Ambient3 { base, v }, true) => energy_pair_curved(base, v, params, space),
        (TangentVector::Gnomonic { base, v }, false) => energy_pair_plane(base, v, params, space),
        (other, curved) => Err(Error::ChartMismatch {
            expected: if curved { Chart::Ambient3 } else { Chart::Gnomonic },
            found: other.chart(),
        }),
    }
}

/// `|det|` of the velocity Jacobian of the two chart energies, a witness
/// that the pair is functionally independent at the state.
pub fn independence_det(p: &Vector2<f64>, v: &Vector2<f64>, space: &SpaceSpec) -> f64 {
    let s = space.curvature().sign();
    let kappa = space.kappa();
    let (x, y) = (p.x, p.y);
    let r1 = [v.x, v.y / kappa];
    let r2 = [
        (1.0 + s * y * y) * v.x - s * x * y * v.y,
        -s * x * y * v.x + (1.0 + s * x * x) * v.y,
    ];
    (r1[0] * r2[1] - r1[1] * r2[0]).abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::Curvature;

    fn plane(a: f64) -> SpaceSpec {
        SpaceSpec::plane(Curvature::Positive, a).unwrap()
    }

    #[test]
    fn projected_mass_examples() {
        assert_eq!(projected_mass(1.0, 0.0, 1.0).unwrap(), 1.0);
        assert!((projected_mass(2f64.sqrt(), 1.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((projected_mass(0.8, 0.6, -1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(projected_mass(1.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn plane_force_examples() {
        let hooke = LagrangeParams::new(0.0, 0.0, 1.0);
        assert_eq!(force_plane(&Vector2::new(1.0, 0.0), &hooke, &plane(0.7)).unwrap(), Vector2::new(2.0, 0.0));
        let sym = LagrangeParams::new(0.7, 0.7, 0.0);
        let f = force_plane(&Vector2::new(0.9, 0.0), &sym, &plane(0.5)).unwrap();
        assert!(f.y.abs() < 1e-16 && f.x < 0.0);
        let single = LagrangeParams::new(1.0, 0.0, 0.0);
        let f = force_plane(&Vector2::new(0.0, 2.0), &single, &plane(0.0)).unwrap();
        assert!((f - Vector2::new(0.0, -0.25)).norm() < 1e-16);
    }

    #[test]
    fn plane_force_reports_collisions() {
        let p = LagrangeParams::new(0.0, 1.0, 0.0);
        let err = force_plane(&Vector2::new(0.0, -0.4), &p, &plane(0.4)).unwrap_err();
        assert!(matches!(err, Error::Singularity { kind: SingularKind::KeplerCenter(1), .. }));
    }

    #[test]
    fn hooke_force_vanishes_on_axis() {
        let space = SpaceSpec::sphere(0.3).unwrap();
        let f = force_curved(&Vector3::new(0.0, 0.0, -1.0), &LagrangeParams::new(0.0, 0.0, 2.0), &space).unwrap();
        assert!(f.norm() < 1e-16);
    }

    #[test]
    fn energy_examples() {
        let free = LagrangeParams::default();
        assert_eq!(energy_plane(&Vector2::new(0.3, 0.2), &Vector2::new(1.0, 0.0), &free, &plane(0.4)).unwrap(), 0.5);
        let hooke = LagrangeParams::new(0.0, 0.0, -1.0);
        assert_eq!(energy_plane(&Vector2::new(1.0, 0.0), &Vector2::zeros(), &hooke, &plane(0.0)).unwrap(), 1.0);
        let sp = SpaceSpec::sphere(0.4).unwrap();
        assert_eq!(energy_curved_in_chart(&Vector2::zeros(), &Vector2::new(1.0, 0.0), &free, &sp).unwrap(), 0.5);
        assert_eq!(energy_curved_in_chart(&Vector2::new(0.0, 1.0), &Vector2::new(1.0, 0.0), &free, &sp).unwrap(), 1.0);
    }

    #[test]
    fn energy_pair_at_pole_is_symmetric() {
        let cases = [
            (SpaceSpec::sphere(0.5).unwrap(), Vector3::new(1.0, 0.0, 0.0)),
            (SpaceSpec::hyperboloid(0.5).unwrap(), Vector3::new(1.0, 0.0, 0.0)),
            (SpaceSpec::sphere(0.0).unwrap(), Vector3::new(0.6, 0.8, 0.0)),
        ];
        for (space, v) in cases {
            let pair = energy_pair_curved(
                &Vector3::new(0.0, 0.0, -1.0),
                &v,
                &LagrangeParams::default(),
                &space,
            )
            .unwrap();
            assert!((pair.e_native - 0.5).abs() < 1e-15 && (pair.e_partner - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn chart_energy_matches_ambient_energy() {
        let params = LagrangeParams::new(0.7, -0.4, 0.3);
        for space in [SpaceSpec::sphere(0.6).unwrap(), SpaceSpec::hyperboloid(0.6).unwrap()] {
            let q = spaces::central_lift_up(&Vector2::new(0.35, -0.2), &space).unwrap();
            let v = spaces::tangent_project(&q, &Vector3::new(0.4, 0.9, -0.3), &space);
            let (p, w) = chart_state(&q, &v, &space).unwrap();
            let ambient = energy_curved(&q, &v, &params, &space).unwrap();
            let chart = energy_curved_in_chart(&p, &w, &params, &space.partner()).unwrap();
            assert!((ambient - chart).abs() < 1e-13, "{ambient} vs {chart}");
        }
    }

    #[test]
    fn extended_integral_examples() {
        let sp0 = SpaceSpec::sphere(0.0).unwrap();
        let free = LagrangeParams::default();
        let e = extended_integral(&Vector3::new(0.0, 0.0, -1.0), &Vector3::new(1.0, 0.0, 0.0), &free, &sp0).unwrap();
        assert_eq!(e, 0.5);
        let q = Vector3::new(0.6, 0.0, 0.8);
        let e = extended_integral(&q, &Vector3::zeros(), &LagrangeParams::new(0.0, 0.0, 1.0), &sp0).unwrap();
        assert!((e + 0.36 / 0.64).abs() < 1e-15);
    }

    #[test]
    fn independence_examples() {
        let v = Vector2::new(1.0, 1.0);
        assert_eq!(independence_det(&Vector2::zeros(), &v, &plane(0.0)), 0.0);
        assert_eq!(independence_det(&Vector2::zeros(), &v, &plane(1.0)), 0.5);
    }
}
