//! The three model geometries and the charts that tie them together.
//!
//! Curved spaces live in ambient 3-space: the south hemisphere of the unit
//! sphere (`x² + y² + z² = 1`, `z < 0`) and the lower sheet of the hyperboloid
//! (`x² + y² − z² = −1`, `z < 0`) with the Minkowski pairing. Both are tied to
//! the plane `z = −1` by central projection from the origin; on the plane side
//! that plane is the gnomonic chart (Klein disc for the hyperboloid).
//!
//! A single sign `s` (+1 sphere, −1 hyperboloid) drives every formula: the
//! ambient pairing is `x x' + y y' + s z z'`, the manifold is `⟨q, q⟩ = s`, the
//! affine norm on the plane divides `y²` by `κ = 1 + s a²`, and the time
//! reparametrization rate is `ρ = 1 + s (x̃² + ỹ²)`.

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distance from the equator / Klein-disc boundary at which projections fail.
pub const BOUNDARY_GUARD: f64 = 1e-12;

/// Sign of the curvature of a curved space, or of the curved partner of a plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Curvature {
    #[serde(alias = "sphere")]
    Positive,
    #[serde(alias = "hyperbolic", alias = "hyperboloid")]
    Negative,
}

impl Curvature {
    pub fn sign(self) -> f64 {
        match self {
            Curvature::Positive => 1.0,
            Curvature::Negative => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpaceKind {
    /// The plane `z = −1` with the affine norm compatible with a curved partner.
    #[serde(rename = "plane")]
    PlaneAffine { partner: Curvature },
    #[serde(rename = "sphere")]
    SphereSouth,
    #[serde(rename = "hyperboloid")]
    HyperboloidLower,
}

/// A geometry together with the half-distance `a` of the Kepler centers in
/// the gnomonic chart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceSpec {
    #[serde(flatten)]
    pub kind: SpaceKind,
    pub a: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Chart {
    Ambient3,
    Gnomonic,
    Stereographic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// From the plane to the curved space.
    Up,
    /// From the curved space to the plane.
    Down,
}

impl SpaceSpec {
    pub fn new(kind: SpaceKind, a: f64) -> Result<Self> {
        let spec = SpaceSpec { kind, a };
        spec.validate()?;
        Ok(spec)
    }

    pub fn plane(partner: Curvature, a: f64) -> Result<Self> {
        Self::new(SpaceKind::PlaneAffine { partner }, a)
    }

    pub fn sphere(a: f64) -> Result<Self> {
        Self::new(SpaceKind::SphereSouth, a)
    }

    pub fn hyperboloid(a: f64) -> Result<Self> {
        Self::new(SpaceKind::HyperboloidLower, a)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.a.is_finite() {
            return Err(Error::domain("space parameter a must be finite"));
        }
        if self.curvature() == Curvature::Negative && self.a.abs() >= 1.0 {
            return Err(Error::domain(format!(
                "hyperbolic geometry needs |a| < 1 (centers inside the Klein disc), got a = {}",
                self.a
            )));
        }
        Ok(())
    }

    /// `+1` on the sphere, `−1` on the hyperboloid, `0` in the plane.
    pub fn sign(&self) -> f64 {
        match self.kind {
            SpaceKind::PlaneAffine { .. } => 0.0,
            SpaceKind::SphereSouth => 1.0,
            SpaceKind::HyperboloidLower => -1.0,
        }
    }

    /// Curvature of the space itself, or of its curved partner for a plane.
    pub fn curvature(&self) -> Curvature {
        match self.kind {
            SpaceKind::PlaneAffine { partner } => partner,
            SpaceKind::SphereSouth => Curvature::Positive,
            SpaceKind::HyperboloidLower => Curvature::Negative,
        }
    }

    /// `κ = 1 ± a²`, the factor dividing `ỹ²` in the affine norm.
    pub fn kappa(&self) -> f64 {
        1.0 + self.curvature().sign() * self.a * self.a
    }

    pub fn is_curved(&self) -> bool {
        !matches!(self.kind, SpaceKind::PlaneAffine { .. })
    }

    /// The projectively corresponding space sharing the same `a`.
    pub fn partner(&self) -> SpaceSpec {
        let kind = match self.kind {
            SpaceKind::PlaneAffine { partner: Curvature::Positive } => SpaceKind::SphereSouth,
            SpaceKind::PlaneAffine { partner: Curvature::Negative } => SpaceKind::HyperboloidLower,
            SpaceKind::SphereSouth => SpaceKind::PlaneAffine { partner: Curvature::Positive },
            SpaceKind::HyperboloidLower => SpaceKind::PlaneAffine { partner: Curvature::Negative },
        };
        SpaceSpec { kind, a: self.a }
    }

    /// Chart in which states of this space are integrated.
    pub fn native_chart(&self) -> Chart {
        if self.is_curved() {
            Chart::Ambient3
        } else {
            Chart::Gnomonic
        }
    }

    fn curved_sign(&self) -> Result<f64> {
        if self.is_curved() {
            Ok(self.sign())
        } else {
            Err(Error::domain("operation needs a curved space"))
        }
    }
}

/// A point tagged with the chart it is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "chart", content = "coords", rename_all = "snake_case")]
pub enum ChartPoint {
    Ambient3(Vector3<f64>),
    Gnomonic(Vector2<f64>),
    Stereographic(Vector2<f64>),
}

impl ChartPoint {
    pub fn chart(&self) -> Chart {
        match self {
            ChartPoint::Ambient3(_) => Chart::Ambient3,
            ChartPoint::Gnomonic(_) => Chart::Gnomonic,
            ChartPoint::Stereographic(_) => Chart::Stereographic,
        }
    }

    pub fn coords(&self) -> Vec<f64> {
        match self {
            ChartPoint::Ambient3(q) => q.iter().copied().collect(),
            ChartPoint::Gnomonic(p) | ChartPoint::Stereographic(p) => p.iter().copied().collect(),
        }
    }

    pub fn ambient(&self) -> Result<Vector3<f64>> {
        match self {
            ChartPoint::Ambient3(q) => Ok(*q),
            other => Err(Error::ChartMismatch { expected: Chart::Ambient3, found: other.chart() }),
        }
    }

    pub fn gnomonic(&self) -> Result<Vector2<f64>> {
        match self {
            ChartPoint::Gnomonic(p) => Ok(*p),
            other => Err(Error::ChartMismatch { expected: Chart::Gnomonic, found: other.chart() }),
        }
    }
}

/// A tangent vector together with its base point; chart tags always agree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "chart", rename_all = "snake_case")]
pub enum TangentVector {
    Ambient3 { base: Vector3<f64>, v: Vector3<f64> },
    Gnomonic { base: Vector2<f64>, v: Vector2<f64> },
    Stereographic { base: Vector2<f64>, v: Vector2<f64> },
}

impl TangentVector {
    pub fn chart(&self) -> Chart {
        self.base().chart()
    }

    pub fn base(&self) -> ChartPoint {
        match *self {
            TangentVector::Ambient3 { base, .. } => ChartPoint::Ambient3(base),
            TangentVector::Gnomonic { base, .. } => ChartPoint::Gnomonic(base),
            TangentVector::Stereographic { base, .. } => ChartPoint::Stereographic(base),
        }
    }

    pub fn components(&self) -> Vec<f64> {
        match self {
            TangentVector::Ambient3 { v, .. } => v.iter().copied().collect(),
            TangentVector::Gnomonic { v, .. } | TangentVector::Stereographic { v, .. } => {
                v.iter().copied().collect()
            }
        }
    }

    /// Attach a vector to a point; the vector's length must match the chart.
    pub fn at(base: ChartPoint, components: &[f64]) -> Result<Self> {
        let want = if base.chart() == Chart::Ambient3 { 3 } else { 2 };
        if components.len() != want {
            return Err(Error::domain(format!(
                "tangent vector in {:?} chart needs {want} components, got {}",
                base.chart(),
                components.len()
            )));
        }
        Ok(match base {
            ChartPoint::Ambient3(q) => TangentVector::Ambient3 {
                base: q,
                v: Vector3::new(components[0], components[1], components[2]),
            },
            ChartPoint::Gnomonic(p) => TangentVector::Gnomonic {
                base: p,
                v: Vector2::new(components[0], components[1]),
            },
            ChartPoint::Stereographic(p) => TangentVector::Stereographic {
                base: p,
                v: Vector2::new(components[0], components[1]),
            },
        })
    }
}

/// Ambient pairing `x x' + y y' + s z z'`.
#[inline]
pub fn pairing(u: &Vector3<f64>, v: &Vector3<f64>, s: f64) -> f64 {
    u.x * v.x + u.y * v.y + s * u.z * v.z
}

/// Inner product of the affine planar metric `dx̃² + dỹ²/κ`.
#[inline]
pub fn affine_inner(u: &Vector2<f64>, v: &Vector2<f64>, space: &SpaceSpec) -> f64 {
    u.x * v.x + u.y * v.y / space.kappa()
}

/// `‖p‖_a = sqrt(x̃² + ỹ²/(1 ± a²))`, with the sign taken from the curved
/// geometry the plane is paired with.
pub fn affine_norm(p: &Vector2<f64>, space: &SpaceSpec) -> Result<f64> {
    let kappa = space.kappa();
    if kappa <= 0.0 {
        return Err(Error::domain(format!("affine norm undefined: 1 ± a² = {kappa}")));
    }
    Ok((p.x * p.x + p.y * p.y / kappa).sqrt())
}

/// `ρ = ‖q̃‖²`: `1 + x̃² + ỹ²` on the sphere side, `1 − x̃² − ỹ²` on the
/// hyperbolic side. Curved time and planar time are related by `dt = ρ dτ`.
pub fn reparametrize_rate(p: &Vector2<f64>, space: &SpaceSpec) -> Result<f64> {
    let rho = 1.0 + space.curvature().sign() * p.norm_squared();
    if rho <= BOUNDARY_GUARD {
        return Err(Error::domain(format!(
            "point ({}, {}) is outside the Klein disc",
            p.x, p.y
        )));
    }
    Ok(rho)
}

/// Gnomonic coordinates `(−x/z, −y/z)` of a point of the lower hemisphere or
/// lower hyperboloid sheet.
pub fn central_project_down(q: &Vector3<f64>, space: &SpaceSpec) -> Result<Vector2<f64>> {
    space.curved_sign()?;
    if q.z >= -BOUNDARY_GUARD {
        return Err(Error::domain(format!(
            "central projection needs z < 0, got z = {:e}",
            q.z
        )));
    }
    Ok(Vector2::new(-q.x / q.z, -q.y / q.z))
}

/// Inverse of [`central_project_down`]: `q = (x̃, ỹ, −1)/sqrt(ρ)`.
pub fn central_lift_up(p: &Vector2<f64>, space: &SpaceSpec) -> Result<Vector3<f64>> {
    let rho = reparametrize_rate(p, space)?;
    let scale = rho.sqrt().recip();
    Ok(Vector3::new(p.x * scale, p.y * scale, -scale))
}

/// Differential of the central projection at `q`, applied to `v`.
pub fn pushforward_down(q: &Vector3<f64>, v: &Vector3<f64>, space: &SpaceSpec) -> Result<Vector2<f64>> {
    central_project_down(q, space)?;
    let z2 = q.z * q.z;
    Ok(Vector2::new(
        -v.x / q.z + q.x * v.z / z2,
        -v.y / q.z + q.y * v.z / z2,
    ))
}

/// Differential of the central lift at `p`, applied to the chart vector `w`.
pub fn pushforward_up(p: &Vector2<f64>, w: &Vector2<f64>, space: &SpaceSpec) -> Result<Vector3<f64>> {
    let s = space.curvature().sign();
    let rho = reparametrize_rate(p, space)?;
    let sq = rho.sqrt();
    let radial = s * p.dot(w) / (rho * sq);
    Ok(Vector3::new(
        w.x / sq - radial * p.x,
        w.y / sq - radial * p.y,
        radial,
    ))
}

/// Push a tangent vector through the central projection. This is only the
/// geometric differential; partner velocities additionally pick up the
/// factor from [`reparametrize_rate`].
pub fn pushforward_velocity(tv: &TangentVector, direction: Direction, space: &SpaceSpec) -> Result<TangentVector> {
    match (direction, tv) {
        (Direction::Down, TangentVector::Ambient3 { base, v }) => Ok(TangentVector::Gnomonic {
            base: central_project_down(base, space)?,
            v: pushforward_down(base, v, space)?,
        }),
        (Direction::Up, TangentVector::Gnomonic { base, v }) => Ok(TangentVector::Ambient3 {
            base: central_lift_up(base, space)?,
            v: pushforward_up(base, v, space)?,
        }),
        (Direction::Down, other) => Err(Error::ChartMismatch { expected: Chart::Ambient3, found: other.chart() }),
        (Direction::Up, other) => Err(Error::ChartMismatch { expected: Chart::Gnomonic, found: other.chart() }),
    }
}

/// Remove the normal component of `v` at `q`: Euclidean-orthogonal on the
/// sphere, Minkowski-orthogonal on the hyperboloid (normal direction `q`).
pub fn tangent_project(q: &Vector3<f64>, v: &Vector3<f64>, space: &SpaceSpec) -> Vector3<f64> {
    let s = if space.is_curved() { space.sign() } else { space.curvature().sign() };
    v - q * (pairing(v, q, s) / pairing(q, q, s))
}

/// Radial re-projection of an ambient point onto the manifold.
pub fn project_to_manifold(q: &Vector3<f64>, space: &SpaceSpec) -> Result<Vector3<f64>> {
    let s = space.curved_sign()?;
    let n2 = s * pairing(q, q, s);
    if n2 <= 0.0 || q.z >= 0.0 {
        return Err(Error::domain("point cannot be projected onto the lower manifold"));
    }
    Ok(q / n2.sqrt())
}

/// `⟨q, q⟩ − s`; zero on the manifold.
pub fn manifold_residual(q: &Vector3<f64>, space: &SpaceSpec) -> f64 {
    let s = space.sign();
    pairing(q, q, s) - s
}

/// Stereographic projection from the north pole `(0, 0, 1)` onto `z = 0`.
/// On the hyperboloid this is the Poincaré disc model.
pub fn stereographic_chart(q: &Vector3<f64>, space: &SpaceSpec) -> Result<Vector2<f64>> {
    space.curved_sign()?;
    let denom = 1.0 - q.z;
    if denom.abs() <= BOUNDARY_GUARD {
        return Err(Error::domain("stereographic projection is undefined at the north pole"));
    }
    Ok(Vector2::new(q.x / denom, q.y / denom))
}

pub fn stereographic_inverse(w: &Vector2<f64>, space: &SpaceSpec) -> Result<Vector3<f64>> {
    let s = space.curved_sign()?;
    let r2 = w.norm_squared();
    let denom = 1.0 + s * r2;
    if denom <= BOUNDARY_GUARD {
        return Err(Error::domain("point lies outside the Poincaré disc"));
    }
    Ok(Vector3::new(
        2.0 * w.x / denom,
        2.0 * w.y / denom,
        s * (r2 - s) / denom,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sph() -> SpaceSpec {
        SpaceSpec::sphere(0.5).unwrap()
    }

    fn hyp() -> SpaceSpec {
        SpaceSpec::hyperboloid(0.6).unwrap()
    }

    #[test]
    fn affine_norm_examples() {
        let p0 = SpaceSpec::plane(Curvature::Positive, 0.0).unwrap();
        assert_eq!(affine_norm(&Vector2::new(3.0, 4.0), &p0).unwrap(), 5.0);
        let p1 = SpaceSpec::plane(Curvature::Positive, 1.0).unwrap();
        assert!((affine_norm(&Vector2::new(0.0, 2.0), &p1).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        let ph = SpaceSpec::plane(Curvature::Negative, 0.6).unwrap();
        assert!((affine_norm(&Vector2::new(0.0, 0.8), &ph).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn hyperbolic_space_rejects_centers_outside_disc() {
        assert!(SpaceSpec::hyperboloid(1.0).is_err());
        assert!(SpaceSpec::plane(Curvature::Negative, -1.2).is_err());
        // the degenerate norm is still caught if validation is bypassed
        let raw = SpaceSpec { kind: SpaceKind::PlaneAffine { partner: Curvature::Negative }, a: 1.0 };
        assert!(affine_norm(&Vector2::new(1.0, 1.0), &raw).is_err());
    }

    #[test]
    fn projection_examples() {
        let pole = Vector3::new(0.0, 0.0, -1.0);
        assert_eq!(central_project_down(&pole, &sph()).unwrap(), Vector2::zeros());
        let q = Vector3::new(1.0, 1.0, -1.0) / 3f64.sqrt();
        let p = central_project_down(&q, &sph()).unwrap();
        assert!((p - Vector2::new(1.0, 1.0)).norm() < 1e-15);
        let qh = Vector3::new(0.0, 0.75, -1.25);
        assert!(manifold_residual(&qh, &hyp()).abs() < 1e-15);
        let ph = central_project_down(&qh, &hyp()).unwrap();
        assert!((ph - Vector2::new(0.0, 0.6)).norm() < 1e-15);
    }

    #[test]
    fn lift_examples() {
        assert_eq!(central_lift_up(&Vector2::zeros(), &sph()).unwrap(), Vector3::new(0.0, 0.0, -1.0));
        let q = central_lift_up(&Vector2::new(1.0, 1.0), &sph()).unwrap();
        assert!((q - Vector3::new(1.0, 1.0, -1.0) / 3f64.sqrt()).norm() < 1e-15);
        assert!(central_lift_up(&Vector2::new(0.8, 0.7), &hyp()).is_err());
    }

    #[test]
    fn equator_is_a_hard_boundary() {
        let q = Vector3::new(1.0, 0.0, -1e-13);
        assert!(central_project_down(&q, &sph()).is_err());
        assert!(pushforward_down(&q, &Vector3::new(0.0, 1.0, 0.0), &sph()).is_err());
    }

    #[test]
    fn rate_examples() {
        assert_eq!(reparametrize_rate(&Vector2::zeros(), &sph()).unwrap(), 1.0);
        assert_eq!(reparametrize_rate(&Vector2::new(1.0, 1.0), &sph()).unwrap(), 3.0);
        assert!((reparametrize_rate(&Vector2::new(0.0, 0.6), &hyp()).unwrap() - 0.64).abs() < 1e-15);
        assert!(reparametrize_rate(&Vector2::new(1.0, 0.0), &hyp()).is_err());
    }

    #[test]
    fn tangent_projection_examples() {
        let pole = Vector3::new(0.0, 0.0, -1.0);
        let v = Vector3::new(0.3, -0.2, 0.0);
        assert!((tangent_project(&pole, &v, &sph()) - v).norm() < 1e-14);
        assert!(tangent_project(&pole, &Vector3::new(0.0, 0.0, 5.0), &sph()).norm() < 1e-15);
        let w = tangent_project(&pole, &Vector3::new(1.0, 2.0, 7.0), &hyp());
        assert!((w - Vector3::new(1.0, 2.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn velocity_at_pole_is_identity() {
        let tv = TangentVector::Ambient3 { base: Vector3::new(0.0, 0.0, -1.0), v: Vector3::new(0.4, -1.1, 0.0) };
        for space in [sph(), hyp()] {
            let down = pushforward_velocity(&tv, Direction::Down, &space).unwrap();
            assert_eq!(down.components(), vec![0.4, -1.1]);
            let up = pushforward_velocity(&down, Direction::Up, &space).unwrap();
            assert!((Vector3::from_vec(up.components()) - Vector3::new(0.4, -1.1, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn pushforward_rejects_wrong_chart() {
        let tv = TangentVector::Gnomonic { base: Vector2::zeros(), v: Vector2::new(1.0, 0.0) };
        assert!(matches!(
            pushforward_velocity(&tv, Direction::Down, &sph()),
            Err(Error::ChartMismatch { .. })
        ));
    }

    #[test]
    fn pushforward_matches_finite_difference() {
        // curve through the sphere point above gnomonic (1, 0)
        let space = sph();
        let q0 = central_lift_up(&Vector2::new(1.0, 0.0), &space).unwrap();
        let dir = tangent_project(&q0, &Vector3::new(0.2, 0.9, -0.4), &space);
        let curve = |t: f64| project_to_manifold(&(q0 + dir * t), &space).unwrap();
        let h = 1e-6;
        let fd = (central_project_down(&curve(h), &space).unwrap()
            - central_project_down(&curve(-h), &space).unwrap())
            / (2.0 * h);
        let exact = pushforward_down(&q0, &dir, &space).unwrap();
        assert!((fd - exact).norm() / exact.norm() < 1e-6);
    }

    #[test]
    fn stereographic_examples() {
        let pole = Vector3::new(0.0, 0.0, -1.0);
        assert_eq!(stereographic_chart(&pole, &sph()).unwrap(), Vector2::zeros());
        assert_eq!(stereographic_chart(&Vector3::new(1.0, 0.0, 0.0), &sph()).unwrap(), Vector2::new(1.0, 0.0));
        let w = stereographic_chart(&Vector3::new(0.0, 0.75, -1.25), &hyp()).unwrap();
        assert!((w - Vector2::new(0.0, 1.0 / 3.0)).norm() < 1e-15);
        assert!(stereographic_chart(&Vector3::new(0.0, 0.0, 1.0), &sph()).is_err());
        for space in [sph(), hyp()] {
            let q = central_lift_up(&Vector2::new(0.3, -0.4), &space).unwrap();
            let back = stereographic_inverse(&stereographic_chart(&q, &space).unwrap(), &space).unwrap();
            assert!((back - q).norm() < 1e-14);
        }
    }

    #[test]
    fn space_serializes_with_kind_tag() {
        let s = SpaceSpec::plane(Curvature::Negative, 0.3).unwrap();
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(json, r#"{"kind":"plane","partner":"negative","a":0.3}"#);
        let back: SpaceSpec = serde_json::from_str(r#"{"kind":"plane","partner":"sphere","a":0.3}"#).unwrap();
        assert_eq!(back.curvature(), Curvature::Positive);
    }
}
