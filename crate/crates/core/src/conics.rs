//! Confocal conic walls.
//!
//! Every conic is stored by the two squared tangents of its cone
//! `x²/A + y²/B² − z² = 0` (`A = tan²α` signed, negative for hyperbolas), so
//! the planar curve `x̃²/A + ỹ²/B² = 1` and its curved counterpart are the
//! same object cut by different surfaces. Members of the confocal family with
//! foci at the Kepler centers come from [`ConicSpec::confocal`].

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spaces::{self, pairing, ChartPoint, Direction, SpaceSpec, TangentVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Ellipse,
    Hyperbola,
}

/// Which branch of a hyperbola is part of the wall.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    #[default]
    Both,
    /// The branch in `ỹ > 0`.
    Positive,
    /// The branch in `ỹ < 0`.
    Negative,
}

/// Polar-angle window `[from, to]` (radians, chart angle about the origin).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    pub from: f64,
    pub to: f64,
}

impl Arc {
    pub fn contains(&self, angle: f64) -> bool {
        let tau = std::f64::consts::TAU;
        let span = (self.to - self.from).rem_euclid(tau);
        let off = (angle - self.from).rem_euclid(tau);
        off <= span
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConicSpec {
    pub space: SpaceSpec,
    pub family: Family,
    /// Signed `tan²α` (`tanh²α` on the hyperboloid); negative for hyperbolas.
    pub a_sq: f64,
    /// `tan²β`, the squared semi-axis along `ỹ`.
    pub b_sq: f64,
    /// Gnomonic center; zero for every member of a confocal family.
    #[serde(default)]
    pub center: [f64; 2],
    #[serde(default)]
    pub branch: Branch,
    #[serde(default)]
    pub arc: Option<Arc>,
}

/// A wall made of several conics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WallSet {
    pub conics: Vec<ConicSpec>,
}

impl ConicSpec {
    /// Member of the confocal family with foci at the Kepler centers, labeled
    /// by its `ỹ`-intercept `B`: an ellipse for `B > a`, a hyperbola for
    /// `0 < B < a`.
    pub fn confocal(space: SpaceSpec, b: f64) -> Result<Self> {
        let a = space.a.abs();
        if !(b > 0.0) || (b - a).abs() < 1e-12 {
            return Err(Error::domain(format!("confocal parameter B = {b} must be positive and differ from a = {a}")));
        }
        let spec = ConicSpec {
            space,
            family: if b > a { Family::Ellipse } else { Family::Hyperbola },
            a_sq: (b * b - a * a) / space.kappa(),
            b_sq: b * b,
            center: [0.0, 0.0],
            branch: Branch::Both,
            arc: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Centered conic from the half-opening angles of its cone.
    pub fn from_angles(space: SpaceSpec, alpha: f64, beta: f64) -> Result<Self> {
        let spec = ConicSpec {
            space,
            family: Family::Ellipse,
            a_sq: alpha.tan().powi(2),
            b_sq: beta.tan().powi(2),
            center: [0.0, 0.0],
            branch: Branch::Both,
            arc: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Circle of gnomonic radius `r` about an arbitrary gnomonic center. Only
    /// confocal with the Kepler centers when the center is the origin and `a = 0`.
    pub fn circle(space: SpaceSpec, center: [f64; 2], r: f64) -> Result<Self> {
        let spec = ConicSpec {
            space,
            family: Family::Ellipse,
            a_sq: r * r,
            b_sq: r * r,
            center,
            branch: Branch::Both,
            arc: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_branch(mut self, branch: Branch) -> Self {
        self.branch = branch;
        self
    }

    pub fn with_arc(mut self, arc: Arc) -> Self {
        self.arc = Some(arc);
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.space.validate()?;
        if !(self.b_sq > 0.0) || !self.a_sq.is_finite() || self.a_sq == 0.0 || !self.b_sq.is_finite() {
            return Err(Error::domain("conic needs finite nonzero squared semi-axes with B² > 0"));
        }
        match self.family {
            Family::Ellipse if self.a_sq < 0.0 => Err(Error::domain("ellipse needs a positive x-axis coefficient")),
            Family::Hyperbola if self.a_sq > 0.0 => Err(Error::domain("hyperbola needs a negative x-axis coefficient")),
            _ => Ok(()),
        }
    }

    /// The same cone read in the partner geometry.
    pub fn project(&self, _direction: Direction) -> ConicSpec {
        ConicSpec { space: self.space.partner(), ..*self }
    }

    /// `α`, `β` with `tan²α = |A|` and `tan²β = B²` (hyperbolic tangents on
    /// the hyperboloid side).
    pub fn angles(&self) -> (f64, f64) {
        let atan = |t2: f64| {
            if self.space.curvature().sign() > 0.0 {
                t2.sqrt().atan()
            } else {
                t2.sqrt().atanh()
            }
        };
        (atan(self.a_sq.abs()), atan(self.b_sq))
    }

    fn center_vec(&self) -> Vector2<f64> {
        Vector2::new(self.center[0], self.center[1])
    }

    fn is_centered(&self) -> bool {
        self.center == [0.0, 0.0]
    }

    /// `x̃²/A + ỹ²/B² − 1` in the gnomonic chart.
    pub fn eval_plane(&self, p: &Vector2<f64>) -> f64 {
        let d = p - self.center_vec();
        d.x * d.x / self.a_sq + d.y * d.y / self.b_sq - 1.0
    }

    pub fn grad_plane(&self, p: &Vector2<f64>) -> Vector2<f64> {
        let d = p - self.center_vec();
        Vector2::new(2.0 * d.x / self.a_sq, 2.0 * d.y / self.b_sq)
    }

    /// Ambient implicit function; equals `F̃/ρ` on the manifold, so its sign
    /// agrees with the planar one.
    pub fn eval_ambient(&self, q: &Vector3<f64>) -> f64 {
        let s = self.space.curvature().sign();
        if self.is_centered() {
            q.x * q.x * (1.0 + s * self.a_sq) / self.a_sq + q.y * q.y * (1.0 + s * self.b_sq) / self.b_sq - 1.0
        } else {
            let c = self.center_vec();
            let u = q.x + c.x * q.z;
            let w = q.y + c.y * q.z;
            u * u / self.a_sq + w * w / self.b_sq - q.z * q.z
        }
    }

    pub fn grad_ambient(&self, q: &Vector3<f64>) -> Vector3<f64> {
        let s = self.space.curvature().sign();
        if self.is_centered() {
            Vector3::new(
                2.0 * q.x * (1.0 + s * self.a_sq) / self.a_sq,
                2.0 * q.y * (1.0 + s * self.b_sq) / self.b_sq,
                0.0,
            )
        } else {
            let c = self.center_vec();
            let u = 2.0 * (q.x + c.x * q.z) / self.a_sq;
            let w = 2.0 * (q.y + c.y * q.z) / self.b_sq;
            Vector3::new(u, w, u * c.x + w * c.y - 2.0 * q.z)
        }
    }

    /// Whether the chart point belongs to the active branch and arc.
    pub fn is_active_chart(&self, p: &Vector2<f64>) -> bool {
        let branch_ok = match (self.family, self.branch) {
            (Family::Hyperbola, Branch::Positive) => p.y > 0.0,
            (Family::Hyperbola, Branch::Negative) => p.y < 0.0,
            _ => true,
        };
        let arc_ok = self.arc.is_none_or(|arc| {
            let d = p - self.center_vec();
            arc.contains(d.y.atan2(d.x))
        });
        branch_ok && arc_ok
    }

    pub fn is_active_ambient(&self, q: &Vector3<f64>) -> bool {
        if q.z >= 0.0 {
            return false;
        }
        self.is_active_chart(&Vector2::new(-q.x / q.z, -q.y / q.z))
    }

    /// Foci parameter `c²` with foci at `(0, ±c)` in the gnomonic chart,
    /// from the planar affine-metric relation `c² = B² − κA`.
    pub fn focal_sq_plane(&self) -> f64 {
        self.b_sq - self.space.kappa() * self.a_sq
    }

    /// Foci parameter from the curved cone angles: `cos c = cos β / cos α`
    /// on the sphere, `cosh c = cosh β / cosh α` on the hyperboloid, returned
    /// as the squared gnomonic distance `tan² c` (`tanh² c`).
    pub fn focal_sq_curved(&self) -> f64 {
        let s = self.space.curvature().sign();
        let ratio = (1.0 + s * self.b_sq) / (1.0 + s * self.a_sq);
        s * (ratio - 1.0)
    }

    /// Residual of `κ(1 + s tan²α) = 1 + s tan²β`, zero for confocal members.
    pub fn metric_relation_residual(&self) -> f64 {
        let s = self.space.curvature().sign();
        self.space.kappa() * (1.0 + s * self.a_sq) - (1.0 + s * self.b_sq)
    }

    /// Point of the conic at parameter `t` in the gnomonic chart: `(√A cos t,
    /// B sin t)` for ellipses, `(√−A sinh t, ±B cosh t)` for hyperbolas with
    /// the sign picked by `upper`.
    pub fn sample_chart(&self, t: f64, upper: bool) -> Vector2<f64> {
        let c = self.center_vec();
        let b = self.b_sq.sqrt();
        match self.family {
            Family::Ellipse => c + Vector2::new(self.a_sq.sqrt() * t.cos(), b * t.sin()),
            Family::Hyperbola => {
                let sgn = if upper { 1.0 } else { -1.0 };
                c + Vector2::new((-self.a_sq).sqrt() * t.sinh(), sgn * b * t.cosh())
            }
        }
    }
}

/// Signed implicit value at a point given in the space's native chart.
/// Negative inside an ellipse and between the branches of a hyperbola.
pub fn implicit_eval(spec: &ConicSpec, p: &ChartPoint) -> Result<f64> {
    if spec.space.is_curved() {
        Ok(spec.eval_ambient(&p.ambient()?))
    } else {
        Ok(spec.eval_plane(&p.gnomonic()?))
    }
}

/// Unit normal of the conic at `p` in the space's metric, pointing toward
/// increasing implicit value.
pub fn normal_at(spec: &ConicSpec, p: &ChartPoint) -> Result<TangentVector> {
    if spec.space.is_curved() {
        let q = p.ambient()?;
        Ok(TangentVector::Ambient3 { base: q, v: normal_ambient(spec, &q)? })
    } else {
        let x = p.gnomonic()?;
        Ok(TangentVector::Gnomonic { base: x, v: normal_plane(spec, &x)? })
    }
}

pub fn normal_plane(spec: &ConicSpec, p: &Vector2<f64>) -> Result<Vector2<f64>> {
    let g = spec.grad_plane(p);
    let n = Vector2::new(g.x, spec.space.kappa() * g.y);
    let len2 = spaces::affine_inner(&n, &n, &spec.space);
    if !(len2 > 1e-300) {
        return Err(Error::Numerical("degenerate conic gradient".into()));
    }
    Ok(n / len2.sqrt())
}

pub fn normal_ambient(spec: &ConicSpec, q: &Vector3<f64>) -> Result<Vector3<f64>> {
    let s = spec.space.sign();
    let g = spec.grad_ambient(q);
    let n = spaces::tangent_project(q, &Vector3::new(g.x, g.y, s * g.z), &spec.space);
    let len2 = pairing(&n, &n, s);
    if !(len2 > 1e-300) {
        return Err(Error::Numerical("degenerate conic gradient".into()));
    }
    Ok(n / len2.sqrt())
}

/// Unit tangent of the conic, metric-orthogonal to [`normal_at`].
pub fn tangent_at(spec: &ConicSpec, p: &ChartPoint) -> Result<TangentVector> {
    if spec.space.is_curved() {
        let q = p.ambient()?;
        let s = spec.space.sign();
        let n = normal_ambient(spec, &q)?;
        // the tangent plane of the manifold at q is J q-orthogonal; the curve
        // direction is its Euclidean cross product with the metric normal
        let t = (Vector3::new(q.x, q.y, s * q.z)).cross(&Vector3::new(n.x, n.y, s * n.z));
        let t = spaces::tangent_project(&q, &t, &spec.space);
        Ok(TangentVector::Ambient3 { base: q, v: t / pairing(&t, &t, s).sqrt() })
    } else {
        let x = p.gnomonic()?;
        let g = spec.grad_plane(&x);
        let t = Vector2::new(-g.y, g.x);
        Ok(TangentVector::Gnomonic { base: x, v: t / spaces::affine_inner(&t, &t, &spec.space).sqrt() })
    }
}

/// Map a conic to the partner geometry through the shared cone.
pub fn project_conic(spec: &ConicSpec, direction: Direction) -> ConicSpec {
    spec.project(direction)
}

impl WallSet {
    pub fn new(conics: Vec<ConicSpec>) -> Result<Self> {
        let wall = WallSet { conics };
        wall.validate()?;
        Ok(wall)
    }

    pub fn single(conic: ConicSpec) -> Self {
        WallSet { conics: vec![conic] }
    }

    pub fn validate(&self) -> Result<()> {
        let Some(first) = self.conics.first() else {
            return Ok(());
        };
        for c in &self.conics {
            c.validate()?;
            if c.space != first.space {
                return Err(Error::domain("all wall members must live in the same space"));
            }
        }
        Ok(())
    }

    pub fn project(&self, direction: Direction) -> WallSet {
        WallSet { conics: self.conics.iter().map(|c| c.project(direction)).collect() }
    }

    /// Whether every member is centered and satisfies `c² = a²`.
    pub fn is_confocal(&self, tol: f64) -> bool {
        self.conics.iter().all(|c| {
            c.is_centered() && (c.focal_sq_plane() - c.space.a * c.space.a).abs() < tol
        })
    }
}

/// Implicit value of the active member closest to zero, with its index.
pub fn crossing_function(wall: &WallSet, p: &ChartPoint) -> Result<Option<(f64, usize)>> {
    let mut best: Option<(f64, usize)> = None;
    for (i, c) in wall.conics.iter().enumerate() {
        let (value, active) = if c.space.is_curved() {
            let q = p.ambient()?;
            (c.eval_ambient(&q), c.is_active_ambient(&q))
        } else {
            let x = p.gnomonic()?;
            (c.eval_plane(&x), c.is_active_chart(&x))
        };
        if active && best.is_none_or(|(b, _)| value.abs() < b.abs()) {
            best = Some((value, i));
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::Curvature;

    #[test]
    fn circle_on_sphere_vanishes_at_rim() {
        let sp = SpaceSpec::sphere(0.0).unwrap();
        let alpha: f64 = 0.4;
        let c = ConicSpec::from_angles(sp, alpha, alpha).unwrap();
        let q = Vector3::new(alpha.sin(), 0.0, -alpha.cos());
        assert!(implicit_eval(&c, &ChartPoint::Ambient3(q)).unwrap().abs() < 1e-15);
    }

    #[test]
    fn planar_vertex_on_curve() {
        let sp = SpaceSpec::plane(Curvature::Negative, 0.4).unwrap();
        let c = ConicSpec::confocal(sp, 0.7).unwrap();
        assert!(implicit_eval(&c, &ChartPoint::Gnomonic(Vector2::new(0.0, 0.7))).unwrap().abs() < 1e-15);
        assert!(implicit_eval(&c, &ChartPoint::Gnomonic(Vector2::zeros())).unwrap() < 0.0);
    }

    #[test]
    fn confocal_members_have_foci_at_centers() {
        for space in [SpaceSpec::plane(Curvature::Positive, 0.8).unwrap(), SpaceSpec::hyperboloid(0.5).unwrap()] {
            for b in [0.2, 0.45, 0.9, 1.7] {
                let c = ConicSpec::confocal(space, b).unwrap();
                let a2 = space.a * space.a;
                assert!((c.focal_sq_plane() - a2).abs() < 1e-14);
                assert!((c.focal_sq_curved() - a2).abs() < 1e-12);
                assert!(c.metric_relation_residual().abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let sp = SpaceSpec::sphere(0.5).unwrap();
        let c = ConicSpec::circle(sp, [0.2, -0.1], 0.6).unwrap();
        let q = Vector3::new(0.3, -0.2, -0.5);
        let h = 1e-6;
        let g = c.grad_ambient(&q);
        for k in 0..3 {
            let mut e = Vector3::zeros();
            e[k] = h;
            let fd = (c.eval_ambient(&(q + e)) - c.eval_ambient(&(q - e))) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-6);
        }
        let p = Vector2::new(0.3, 0.5);
        let g = c.grad_plane(&p);
        let fd = (c.eval_plane(&(p + Vector2::new(h, 0.0))) - c.eval_plane(&(p - Vector2::new(h, 0.0)))) / (2.0 * h);
        assert!((fd - g.x).abs() < 1e-6);
    }

    #[test]
    fn circle_normal_is_radial() {
        let sp = SpaceSpec::sphere(0.0).unwrap();
        let c = ConicSpec::from_angles(sp, 0.5, 0.5).unwrap();
        let q = spaces::central_lift_up(&Vector2::new(0.5f64.tan() * 0.6, 0.5f64.tan() * 0.8), &sp).unwrap();
        let n = normal_ambient(&c, &q).unwrap();
        // radial direction from the pole is the tangent projection of -e_z
        let radial = spaces::tangent_project(&q, &Vector3::new(0.0, 0.0, 1.0), &sp);
        assert!(n.cross(&radial).norm() < 1e-14);
    }

    #[test]
    fn hyperbola_branches() {
        let sp = SpaceSpec::plane(Curvature::Positive, 0.6).unwrap();
        let h = ConicSpec::confocal(sp, 0.3).unwrap().with_branch(Branch::Positive);
        assert_eq!(h.family, Family::Hyperbola);
        assert!(h.is_active_chart(&h.sample_chart(0.4, true)));
        assert!(!h.is_active_chart(&h.sample_chart(0.4, false)));
    }

    #[test]
    fn crossing_function_picks_closest_member() {
        let sp = SpaceSpec::plane(Curvature::Positive, 0.3).unwrap();
        let wall = WallSet::new(vec![ConicSpec::confocal(sp, 0.5).unwrap(), ConicSpec::confocal(sp, 1.0).unwrap()]).unwrap();
        let p = ChartPoint::Gnomonic(Vector2::new(0.0, 0.9));
        let (v, i) = crossing_function(&wall, &p).unwrap().unwrap();
        let per: Vec<f64> = wall.conics.iter().map(|c| implicit_eval(c, &p).unwrap()).collect();
        assert_eq!(i, 1);
        assert_eq!(v, per[1]);
        assert!(per[1].abs() < per[0].abs());
        let on = ChartPoint::Gnomonic(Vector2::new(0.0, 0.5));
        let (v, i) = crossing_function(&wall, &on).unwrap().unwrap();
        assert_eq!((v, i), (0.0, 0));
    }

    #[test]
    fn arcs_wrap_around() {
        let arc = Arc { from: 3.0, to: -3.0 };
        assert!(arc.contains(std::f64::consts::PI));
        assert!(!arc.contains(0.0));
    }
}
