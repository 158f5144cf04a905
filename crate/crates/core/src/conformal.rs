//! Conformal side of the theory: the stereographic and Poincaré charts, the
//! complex square map relating Hooke and Kepler problems on fixed energy
//! shells, and the image of focused hyperbolic conics under that map.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::{SVector, Vector2, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::conics::{ConicSpec, Family};
use crate::correspondence::{compare_curves, CurveNode};
use crate::dynamics::rk::{error_norm, rk_step, step_factor};
use crate::dynamics::Tolerances;
use crate::error::{Error, Result};
use crate::spaces::{self, SpaceSpec, BOUNDARY_GUARD};

type Vec4 = SVector<f64, 4>;

/// Distance from the blow-up circle `|q| = 1` below which chart formulas
/// are refused.
pub const CIRCLE_GUARD: f64 = 1e-9;

/// Conformal chart of a curved surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChartSystem {
    /// Stereographic chart of the sphere from the north pole.
    SphereStereo,
    /// Poincaré disc of the hyperbolic plane.
    HyperbolicPoincare,
}

impl ChartSystem {
    /// `+1` for the sphere, `−1` for the hyperbolic plane.
    pub fn sign(self) -> f64 {
        match self {
            ChartSystem::SphereStereo => 1.0,
            ChartSystem::HyperbolicPoincare => -1.0,
        }
    }

    pub fn space(self) -> SpaceSpec {
        match self {
            ChartSystem::SphereStereo => SpaceSpec::sphere(0.0),
            ChartSystem::HyperbolicPoincare => SpaceSpec::hyperboloid(0.0),
        }
        .expect("a = 0 is valid")
    }

    /// Factor `4/(1 + s|q|²)²` of the metric relative to the Euclidean one.
    pub fn conformal_factor(self, q: Complex64) -> Result<f64> {
        let d = 1.0 + self.sign() * q.norm_sqr();
        if d <= BOUNDARY_GUARD {
            return Err(Error::domain(format!("{q} lies outside the Poincaré disc")));
        }
        Ok(4.0 / (d * d))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConformalKind {
    SphericalHooke,
    HyperbolicHooke,
    HyperbolicKepler,
}

/// A central problem in a conformal chart with Hamiltonian
/// `H = A(R)|w|² + V(R)`, `R = |z|²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConformalSystem {
    pub which: ConformalKind,
    /// Hooke constant `f`, or the Kepler mass `μ`.
    pub strength: f64,
}

impl ConformalSystem {
    pub fn spherical_hooke(f: f64) -> Self {
        ConformalSystem { which: ConformalKind::SphericalHooke, strength: f }
    }

    pub fn hyperbolic_hooke(f: f64) -> Self {
        ConformalSystem { which: ConformalKind::HyperbolicHooke, strength: f }
    }

    pub fn hyperbolic_kepler(mu: f64) -> Self {
        ConformalSystem { which: ConformalKind::HyperbolicKepler, strength: mu }
    }

    pub fn chart(&self) -> ChartSystem {
        match self.which {
            ConformalKind::SphericalHooke => ChartSystem::SphereStereo,
            _ => ChartSystem::HyperbolicPoincare,
        }
    }

    fn check(&self, r: f64) -> Result<()> {
        if (1.0 - r).abs() < CIRCLE_GUARD || (self.chart() == ChartSystem::HyperbolicPoincare && r >= 1.0) {
            return Err(Error::domain(format!("|z|² = {r} is on or beyond the blow-up circle")));
        }
        if self.which == ConformalKind::HyperbolicKepler && r < CIRCLE_GUARD * CIRCLE_GUARD {
            return Err(Error::Singularity { kind: crate::error::SingularKind::KeplerCenter(0), distance: r.sqrt() });
        }
        Ok(())
    }

    /// Kinetic coefficient `A(R)` and its derivative.
    fn kinetic(&self, r: f64) -> (f64, f64) {
        let s = self.chart().sign();
        let d = 1.0 + s * r;
        (d * d / 8.0, s * d / 4.0)
    }

    /// Potential `V(R)` and its derivative.
    fn potential(&self, r: f64) -> (f64, f64) {
        let k = self.strength;
        match self.which {
            ConformalKind::SphericalHooke => {
                let d = 1.0 - r;
                (4.0 * k * r / (d * d), 4.0 * k * (1.0 + r) / (d * d * d))
            }
            ConformalKind::HyperbolicHooke => {
                let d = 1.0 + r;
                (4.0 * k * r / (d * d), 4.0 * k * (1.0 - r) / (d * d * d))
            }
            ConformalKind::HyperbolicKepler => {
                let sr = r.sqrt();
                (-k * (1.0 + r) / (2.0 * sr), -0.25 * k * (1.0 / sr - 1.0 / (r * sr)))
            }
        }
    }

    /// Force function `U = −V`.
    pub fn force_function(&self, z: Complex64) -> Result<f64> {
        let r = z.norm_sqr();
        self.check(r)?;
        Ok(-self.potential(r).0)
    }

    pub fn hamiltonian(&self, z: Complex64, w: Complex64) -> Result<f64> {
        let r = z.norm_sqr();
        self.check(r)?;
        Ok(self.kinetic(r).0 * w.norm_sqr() + self.potential(r).0)
    }

    /// Hamiltonian vector field on `(Re z, Im z, Re w, Im w)`.
    pub fn vector_field(&self, y: &Vec4) -> Result<Vec4> {
        let r = y[0] * y[0] + y[1] * y[1];
        self.check(r)?;
        let (a, da) = self.kinetic(r);
        let dv = self.potential(r).1;
        let g = 2.0 * (da * (y[2] * y[2] + y[3] * y[3]) + dv);
        Ok(Vec4::new(2.0 * a * y[2], 2.0 * a * y[3], -g * y[0], -g * y[1]))
    }

    /// Chart velocity `ż = 2A(R) w`.
    pub fn velocity(&self, z: Complex64, w: Complex64) -> Complex64 {
        w * (2.0 * self.kinetic(z.norm_sqr()).0)
    }
}

/// `(z, w) ↦ (z², w/(2z̄))`.
pub fn square_map(z: Complex64, w: Complex64) -> Result<(Complex64, Complex64)> {
    if z.norm() <= BOUNDARY_GUARD {
        return Err(Error::domain("the square map is branched at z = 0"));
    }
    Ok((z * z, w / (2.0 * z.conj())))
}

/// Kepler momentum on the image shell for the Hamiltonian normalization of
/// [`ConformalSystem`]: twice the square-map momentum.
pub fn kepler_momentum(z: Complex64, w: Complex64) -> Result<Complex64> {
    Ok(2.0 * square_map(z, w)?.1)
}

/// `(1 ± |z|²)²|w|²/8 + 4f|z|²/(1 ∓ |z|²)² − m̂`: zero on the `m̂`-shell.
pub fn hamiltonian_on_shell(sys: &ConformalSystem, z: Complex64, w: Complex64, level: f64) -> Result<f64> {
    Ok(sys.hamiltonian(z, w)? - level)
}

/// Kepler energy `−(4f + sign·2m̂)` of the square-map images of the Hooke
/// `m̂`-shell; `sign = +1` for the spherical Hooke problem.
pub fn energy_level_relation(f: f64, mhat: f64, sign: f64) -> f64 {
    -(4.0 * f + sign * 2.0 * mhat)
}

fn phase(z: Complex64, w: Complex64) -> Vec4 {
    Vec4::new(z.re, z.im, w.re, w.im)
}

/// Integrated orbit of a conformal system.
#[derive(Debug, Clone, PartialEq)]
pub struct ConformalOrbit {
    pub t: Vec<f64>,
    pub z: Vec<Complex64>,
    pub w: Vec<Complex64>,
}

impl ConformalOrbit {
    pub fn nodes(&self, sys: &ConformalSystem) -> Vec<CurveNode> {
        (0..self.t.len())
            .map(|k| {
                let v = sys.velocity(self.z[k], self.w[k]);
                CurveNode::planar(self.t[k], Vector2::new(self.z[k].re, self.z[k].im), Vector2::new(v.re, v.im))
            })
            .collect()
    }

    /// Largest deviation of the Hamiltonian from its initial value.
    pub fn drift(&self, sys: &ConformalSystem) -> Result<f64> {
        let h0 = sys.hamiltonian(self.z[0], self.w[0])?;
        let mut worst: f64 = 0.0;
        for (z, w) in self.z.iter().zip(&self.w) {
            worst = worst.max((sys.hamiltonian(*z, *w)? - h0).abs());
        }
        Ok(worst)
    }
}

/// When to stop an orbit integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stop {
    /// Fixed time span.
    Time(f64),
    /// Winding angle of `z` about the origin reaches the given value.
    Winding(f64),
}

const MAX_STEPS: usize = 2_000_000;
/// Step cap keeping the Hermite reconstruction of orbits well below the
/// comparison tolerance.
const H_MAX: f64 = 0.01;
const WINDING_TOL: f64 = 1e-13;

/// Adaptive integration of a conformal system. Winding stops are located
/// by bisection on a fresh sub-step so the orbit ends exactly on the angle.
pub fn integrate(sys: &ConformalSystem, z0: Complex64, w0: Complex64, stop: Stop, tol: &Tolerances) -> Result<ConformalOrbit> {
    let f = |y: &Vec4| sys.vector_field(y);
    let tol = &Tolerances { h_max: tol.h_max.min(H_MAX), ..*tol };
    let mut y = phase(z0, w0);
    let mut t = 0.0;
    let mut h = tol.h_init;
    let mut winding = 0.0;
    let mut orbit = ConformalOrbit { t: vec![0.0], z: vec![z0], w: vec![w0] };
    let push = |orbit: &mut ConformalOrbit, t: f64, y: &Vec4| {
        orbit.t.push(t);
        orbit.z.push(Complex64::new(y[0], y[1]));
        orbit.w.push(Complex64::new(y[2], y[3]));
    };
    let angle = |y: &Vec4| y[1].atan2(y[0]);
    let unwrap = |d: f64| (d + PI).rem_euclid(2.0 * PI) - PI;
    for _ in 0..MAX_STEPS {
        if let Stop::Time(t_end) = stop {
            if t >= t_end {
                return Ok(orbit);
            }
            h = h.min(t_end - t);
        }
        let (next, err) = rk_step(&f, &y, h)?;
        let e = error_norm(&err, &y, &next, tol);
        if !e.is_finite() {
            return Err(Error::Numerical(format!("non-finite error estimate at t = {t}")));
        }
        if e > 1.0 {
            h *= step_factor(e);
            if h < tol.h_min {
                return Err(Error::Numerical(format!("step size underflow at t = {t}")));
            }
            continue;
        }
        if let Stop::Winding(target) = stop {
            let turned = winding + unwrap(angle(&next) - angle(&y));
            if (turned - target) * target.signum() >= 0.0 {
                let (mut lo, mut hi) = (0.0, h);
                let mut end = next;
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    let (ym, _) = rk_step(&f, &y, mid)?;
                    let g = winding + unwrap(angle(&ym) - angle(&y)) - target;
                    end = ym;
                    if g.abs() < WINDING_TOL {
                        hi = mid;
                        break;
                    }
                    if g * target.signum() >= 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                push(&mut orbit, t + hi, &end);
                return Ok(orbit);
            }
            winding = turned;
        }
        t += h;
        y = next;
        push(&mut orbit, t, &y);
        h = (h * step_factor(e)).min(tol.h_max);
    }
    Err(Error::Numerical("step budget exhausted".into()))
}

/// The three pairings of conformally corresponding systems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pairing {
    SphericalHookeKepler,
    HyperbolicHookeKepler,
    SphericalHyperbolicHooke,
}

impl Pairing {
    pub const ALL: [Pairing; 3] =
        [Pairing::SphericalHookeKepler, Pairing::HyperbolicHookeKepler, Pairing::SphericalHyperbolicHooke];

    pub fn source(self, f: f64) -> ConformalSystem {
        match self {
            Pairing::HyperbolicHookeKepler => ConformalSystem::hyperbolic_hooke(f),
            _ => ConformalSystem::spherical_hooke(f),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitCorrespondence {
    pub pairing: Pairing,
    /// Energy `m̂` of the source orbit.
    pub mhat: f64,
    pub target: ConformalSystem,
    /// Level predicted by the energy-level relation.
    pub level_expected: f64,
    /// Target Hamiltonian at the mapped initial state.
    pub level_actual: f64,
    pub source_drift: f64,
    pub target_drift: f64,
    /// Largest distance between the mapped source orbit and the target orbit
    /// matched by arc length.
    pub max_distance: f64,
    /// Source time span.
    pub period: f64,
}

impl OrbitCorrespondence {
    pub fn level_error(&self) -> f64 {
        (self.level_actual - self.level_expected).abs()
    }
}

/// Integrate a Hooke orbit, map it to its partner system and compare with an
/// independently integrated partner orbit from the mapped initial state.
/// Without `t_span` the source runs for one turn about the origin.
pub fn verify_orbit_correspondence(
    pairing: Pairing,
    f: f64,
    z0: Complex64,
    w0: Complex64,
    t_span: Option<f64>,
    tol: &Tolerances,
) -> Result<OrbitCorrespondence> {
    let source = pairing.source(f);
    let mhat = source.hamiltonian(z0, w0)?;
    let stop = t_span.map_or(Stop::Winding(2.0 * PI), Stop::Time);
    let orbit = integrate(&source, z0, w0, stop, tol)?;
    let period = *orbit.t.last().unwrap_or(&0.0);
    let source_nodes = orbit.nodes(&source);

    let (target, level_expected, q0, p0, mapped): (_, _, _, _, Vec<CurveNode>) = match pairing {
        Pairing::SphericalHyperbolicHooke => {
            let target = ConformalSystem::hyperbolic_hooke(f + mhat);
            (target, mhat, z0, w0, source_nodes.clone())
        }
        _ => {
            let sign = source.chart().sign();
            let target = ConformalSystem::hyperbolic_kepler(2.0 * mhat);
            let (q0, _) = square_map(z0, w0)?;
            let p0 = kepler_momentum(z0, w0)?;
            let mapped = source_nodes
                .iter()
                .map(|n| {
                    let z = Complex64::new(n.x.x, n.x.y);
                    let dz = Complex64::new(n.v.x, n.v.y);
                    let (q, dq) = (z * z, 2.0 * z * dz);
                    CurveNode::planar(n.t, Vector2::new(q.re, q.im), Vector2::new(dq.re, dq.im))
                })
                .collect();
            (target, energy_level_relation(f, mhat, sign), q0, p0, mapped)
        }
    };
    let level_actual = target.hamiltonian(q0, p0)?;
    let winding = match pairing {
        Pairing::SphericalHyperbolicHooke => 2.0 * PI,
        _ => 4.0 * PI,
    };
    let target_stop = match t_span {
        None => Stop::Winding(winding * mapped_turn_sign(&mapped)),
        Some(_) => {
            // Long enough to cover the mapped arc: run past its length.
            let need = crate::correspondence::curve_length(&mapped);
            let mut span = period;
            loop {
                let trial = integrate(&target, q0, p0, Stop::Time(span), tol)?;
                if crate::correspondence::curve_length(&trial.nodes(&target)) >= need * 1.01 || span > 1e4 {
                    break Stop::Time(span);
                }
                span *= 2.0;
            }
        }
    };
    let target_orbit = integrate(&target, q0, p0, target_stop, tol)?;
    let closed = t_span.is_none();
    let max_distance = compare_curves(&mapped, &target_orbit.nodes(&target), closed);
    Ok(OrbitCorrespondence {
        pairing,
        mhat,
        target,
        level_expected,
        level_actual,
        source_drift: orbit.drift(&source)?,
        target_drift: target_orbit.drift(&target)?,
        max_distance,
        period,
    })
}

/// Orientation of a curve about the origin from its first two nodes.
fn mapped_turn_sign(nodes: &[CurveNode]) -> f64 {
    let n = &nodes[0];
    let cross = n.x.x * n.v.y - n.x.y * n.v.x;
    if cross >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Residual of the centered spherical conic equation at a point `(x, y, z)`
/// of the unit sphere: the square-map image of the focused hyperbolic conic
/// with parameters `a`, `B`.
pub fn sphere_image_residual(p: &Vector3<f64>, a: f64, b: f64) -> f64 {
    let (x, y, z) = (p.x, p.y, p.z);
    let r4 = x.powi(4) + 2.0 * x * x * y * y + y.powi(4);
    let d = z.powi(4) - 4.0 * z.powi(3) + (-4.0 * x * y * a + 6.0) * z * z + (8.0 * x * y * a - 4.0) * z + r4
        - 4.0 * a * x * y
        + 1.0;
    let n2 = z.powi(4) * a - 4.0 * z.powi(3) * a + (-4.0 * x * y + 6.0 * a) * z * z + (8.0 * x * y - 4.0 * a) * z
        + (r4 + 1.0) * a
        - 4.0 * x * y;
    let k = 1.0 - a * a;
    4.0 * k * k * (z - 1.0).powi(4) * (x * x - y * y).powi(2) / ((b + a) * (b - a) * d * d) + n2 * n2 / (b * b * d * d)
        - 1.0
}

/// Coefficients `(P, Q)` of the image conic `X²/P + Y²/Q = 1` in the
/// gnomonic chart rotated by 45°.
pub fn image_conic(a: f64, b: f64) -> (f64, f64) {
    let num = 2.0 * (b * b - a * a);
    (num / ((a - 1.0) * (b - 1.0) * (b - a)), -num / ((a + 1.0) * (b - 1.0) * (b + a)))
}

/// Coefficients of the second factor of the image equation, which carries
/// no real points for ellipse members.
pub fn spurious_conic(a: f64, b: f64) -> (f64, f64) {
    let num = 2.0 * (b * b - a * a);
    (num / ((a - 1.0) * (b + 1.0) * (b + a)), -num / ((a + 1.0) * (b + 1.0) * (b - a)))
}

/// Focal distance `2√a/(1 − a)` of the image family in the rotated
/// gnomonic chart.
pub fn image_focal(a: f64) -> f64 {
    2.0 * a.sqrt() / (1.0 - a)
}

/// Gnomonic focal distance of a centered spherical conic `X²/P + Y²/Q = 1`
/// with foci on the `X` axis.
fn spherical_focal(p: f64, q: f64) -> f64 {
    let family = if p > 0.0 && q > 0.0 { Family::Ellipse } else { Family::Hyperbola };
    let spec = ConicSpec {
        space: ChartSystem::SphereStereo.space(),
        family,
        a_sq: q,
        b_sq: p,
        center: [0.0, 0.0],
        branch: Default::default(),
        arc: None,
    };
    spec.focal_sq_curved().sqrt()
}

/// Which factor of the image equation a sampled branch lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageFactor {
    /// `X²/P + Y²/Q = 1` from [`image_conic`].
    Primary,
    /// `X²/P₁ + Y²/Q₁ = 1` from [`spurious_conic`].
    Secondary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfocalImageReport {
    pub a: f64,
    pub b: f64,
    pub family: Family,
    pub samples: usize,
    /// Largest residual of the centered spherical equation.
    pub sphere_residual: f64,
    /// Largest residual of each branch against the factor it lies on.
    pub gnomonic_residual: f64,
    /// Factor hit by each sampled branch.
    pub factors: Vec<ImageFactor>,
    /// Focal distance of each branch from a least-squares conic fit.
    pub focal_measured: Vec<f64>,
    pub focal_expected: f64,
    /// Whether both coefficients of the secondary factor are negative.
    pub spurious_empty: bool,
    /// Samples where continuity could not pick a square-root branch.
    pub branch_jumps: usize,
}

impl ConfocalImageReport {
    pub fn focal_error(&self) -> f64 {
        self.focal_measured.iter().map(|c| (c - self.focal_expected).abs()).fold(0.0, f64::max)
    }

    /// Spread of the measured focal distances across branches.
    pub fn focal_spread(&self) -> f64 {
        let max = self.focal_measured.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = self.focal_measured.iter().cloned().fold(f64::INFINITY, f64::min);
        max - min
    }
}

/// Smallest admissible distance of a sample from the disc boundary.
const DISC_MARGIN: f64 = 1e-6;

/// Least-squares fit of `X²/P + Y²/Q = 1` to squared coordinates; returns
/// `(P, Q)`.
fn fit_centered(rows: &[(f64, f64)]) -> Result<(f64, f64)> {
    let (mut s11, mut s12, mut s22, mut r1, mut r2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (x2, y2) in rows {
        s11 += x2 * x2;
        s12 += x2 * y2;
        s22 += y2 * y2;
        r1 += x2;
        r2 += y2;
    }
    let det = s11 * s22 - s12 * s12;
    if det.abs() <= 1e-14 * s11 * s22 {
        return Err(Error::Numerical("degenerate image conic fit".into()));
    }
    let (ip, iq) = ((r1 * s22 - r2 * s12) / det, (s11 * r2 - s12 * r1) / det);
    Ok((1.0 / ip, 1.0 / iq))
}

/// Sample the conic with foci over `(0, ±a)` in the Klein disc, carry it
/// through the hyperboloid, a boost moving one focus to the pole, the
/// Poincaré chart, a continuous square root, the inverse stereographic map
/// to the sphere and the gnomonic chart, and check the image against the
/// centered family.
pub fn confocal_image_check(a: f64, b: f64, n_samples: usize) -> Result<ConfocalImageReport> {
    if !(a > 0.0 && a < 1.0) || !(b > 0.0 && b < 1.0) || (b - a).abs() < 1e-9 {
        return Err(Error::domain(format!("need 0 < a < 1, 0 < B < 1, B ≠ a (got a = {a}, B = {b})")));
    }
    if n_samples < 8 {
        return Err(Error::domain("at least 8 samples are needed"));
    }
    let hyper = SpaceSpec::hyperboloid(a)?;
    let sphere = ChartSystem::SphereStereo.space();
    let klein = ConicSpec::confocal(hyper, b)?;
    let k = (1.0 - a * a).sqrt();

    let mut curves: Vec<Vec<Vector2<f64>>> = Vec::new();
    match klein.family {
        Family::Ellipse => {
            curves.push((0..n_samples).map(|j| klein.sample_chart(2.0 * PI * j as f64 / n_samples as f64, true)).collect());
        }
        Family::Hyperbola => {
            let (ma, mb) = (klein.a_sq, klein.b_sq);
            let s_max = ((1.0 - ma) / (mb - ma)).sqrt().acosh() * 0.98;
            for upper in [true, false] {
                curves.push(
                    (0..n_samples)
                        .map(|j| klein.sample_chart(-s_max + 2.0 * s_max * j as f64 / (n_samples - 1) as f64, upper))
                        .collect(),
                );
            }
        }
    }

    let (pp, qq) = image_conic(a, b);
    let (p1, q1) = spurious_conic(a, b);
    let mut sphere_residual: f64 = 0.0;
    let mut gnomonic_residual: f64 = 0.0;
    let mut branch_jumps = 0;
    let mut samples = 0;
    let mut factors = Vec::new();
    let mut focal_measured = Vec::new();
    for curve in &curves {
        let mut prev: Option<Complex64> = None;
        let mut rows: Vec<(f64, f64)> = Vec::new();
        let (mut on_primary, mut on_secondary): (f64, f64) = (0.0, 0.0);
        for u in curve {
            if 1.0 - u.norm_squared() < DISC_MARGIN {
                return Err(Error::domain(format!("sample {u:?} is too close to the disc boundary")));
            }
            let lifted = spaces::central_lift_up(u, &hyper)?;
            let boosted = Vector3::new(lifted.x, (lifted.y - a * lifted.z) / k, (lifted.z - a * lifted.y) / k);
            let q = spaces::stereographic_chart(&boosted, &hyper)?;
            let root = Complex64::new(q.x, q.y).sqrt();
            let w = match prev {
                Some(last) if (root - last).norm() > (root + last).norm() => -root,
                _ => root,
            };
            if let Some(last) = prev {
                if (w - last).norm() > 0.5 * last.norm().max(w.norm()) {
                    branch_jumps += 1;
                }
            }
            prev = Some(w);
            let on_sphere = spaces::stereographic_inverse(&Vector2::new(w.re, w.im), &sphere)?;
            sphere_residual = sphere_residual.max(sphere_image_residual(&on_sphere, a, b).abs());
            let g = spaces::central_project_down(&on_sphere, &sphere)?;
            let (xr, yr) = ((g.x + g.y) * FRAC_1_SQRT_2, (g.x - g.y) * FRAC_1_SQRT_2);
            on_primary = on_primary.max((xr * xr / pp + yr * yr / qq - 1.0).abs());
            on_secondary = on_secondary.max((xr * xr / p1 + yr * yr / q1 - 1.0).abs());
            rows.push((xr * xr, yr * yr));
        }
        samples += rows.len();
        factors.push(if on_primary <= on_secondary { ImageFactor::Primary } else { ImageFactor::Secondary });
        gnomonic_residual = gnomonic_residual.max(on_primary.min(on_secondary));
        let (fp, fq) = fit_centered(&rows)?;
        focal_measured.push(spherical_focal(fp, fq));
    }

    Ok(ConfocalImageReport {
        a,
        b,
        family: klein.family,
        samples,
        sphere_residual,
        gnomonic_residual,
        factors,
        focal_measured,
        focal_expected: image_focal(a),
        spurious_empty: p1 < 0.0 && q1 < 0.0,
        branch_jumps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn square_map_examples() {
        assert_eq!(square_map(c(1.0, 0.0), c(2.0, 0.0)).unwrap(), (c(1.0, 0.0), c(1.0, 0.0)));
        let (q, w) = square_map(c(0.0, 1.0), c(2.0, 0.0)).unwrap();
        assert!((q - c(-1.0, 0.0)).norm() < 1e-15 && (w - c(0.0, 1.0)).norm() < 1e-15);
        assert!(square_map(c(0.0, 0.0), c(1.0, 0.0)).is_err());
    }

    #[test]
    fn level_relation_examples() {
        assert_eq!(energy_level_relation(0.0, 0.0, 1.0), 0.0);
        assert_eq!(energy_level_relation(1.0, 1.0, 1.0), -6.0);
        assert_eq!(energy_level_relation(1.0, 1.0, -1.0), -2.0);
    }

    #[test]
    fn shell_at_rest_at_center() {
        let sys = ConformalSystem::spherical_hooke(0.7);
        assert_eq!(hamiltonian_on_shell(&sys, c(0.0, 0.0), c(0.0, 0.0), 0.4).unwrap(), -0.4);
        let free = ConformalSystem::spherical_hooke(0.0);
        let kin = (1.0f64 + 0.25).powi(2) * 1.0 / 8.0;
        assert!((hamiltonian_on_shell(&free, c(0.5, 0.0), c(1.0, 0.0), 0.0).unwrap() - kin).abs() < 1e-15);
        assert!(sys.hamiltonian(c(1.0, 0.0), c(0.0, 0.0)).is_err());
    }

    #[test]
    fn conformal_factor_matches_chart_metric() {
        let chart = ChartSystem::SphereStereo;
        let q = Vector2::new(0.3, -0.4);
        let dq = Vector2::new(1e-7, 2e-7);
        let space = chart.space();
        let x0 = spaces::stereographic_inverse(&q, &space).unwrap();
        let x1 = spaces::stereographic_inverse(&(q + dq), &space).unwrap();
        let ratio = (x1 - x0).norm_squared() / dq.norm_squared();
        assert!((ratio - chart.conformal_factor(c(0.3, -0.4)).unwrap()).abs() < 1e-6);
        assert!(ChartSystem::HyperbolicPoincare.conformal_factor(c(1.0, 0.0)).is_err());
    }

    #[test]
    fn circular_hooke_maps_to_circular_kepler() {
        let (f, r) = (0.3, 0.4);
        let source = ConformalSystem::spherical_hooke(f);
        let big_r = r * r;
        let (a, da) = source.kinetic(big_r);
        let dv = source.potential(big_r).1;
        let l = (dv / (a / (big_r * big_r) - da / big_r)).sqrt();
        let (z0, w0) = (c(r, 0.0), c(0.0, l / r));
        let tol = Tolerances::default();
        let hooke = integrate(&source, z0, w0, Stop::Winding(2.0 * PI), &tol).unwrap();
        assert!(hooke.z.iter().all(|z| (z.norm() - r).abs() < 1e-10));
        let rep = verify_orbit_correspondence(Pairing::SphericalHookeKepler, f, z0, w0, None, &tol).unwrap();
        let (q0, p0) = (square_map(z0, w0).unwrap().0, kepler_momentum(z0, w0).unwrap());
        let kepler = integrate(&rep.target, q0, p0, Stop::Winding(2.0 * PI), &tol).unwrap();
        assert!(kepler.z.iter().all(|q| (q.norm() - r * r).abs() < 1e-10));
        assert!(rep.max_distance < 1e-8, "{rep:?}");
    }

    #[test]
    fn all_pairings_agree() {
        let tol = Tolerances::default();
        for pairing in Pairing::ALL {
            let rep = verify_orbit_correspondence(pairing, 0.3, c(0.4, 0.05), c(0.1, 0.8), None, &tol).unwrap();
            assert!(rep.max_distance < 1e-6, "{rep:?}");
            assert!(rep.level_error() < 1e-12, "{rep:?}");
            assert!(rep.source_drift < 1e-9 && rep.target_drift < 1e-9, "{rep:?}");
        }
    }

    #[test]
    fn image_focal_example() {
        assert!((image_focal(1.0 / 3.0) - 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn confocal_images() {
        for a in [0.1, 0.3, 0.5] {
            for b in [a + 0.1, a + 0.3, 0.9, 0.5 * a] {
                let rep = confocal_image_check(a, b, 200).unwrap();
                assert!(rep.sphere_residual < 1e-8 && rep.gnomonic_residual < 1e-8, "{rep:?}");
                assert!(rep.focal_error() < 1e-8, "{rep:?}");
                assert_eq!(rep.spurious_empty, rep.family == Family::Ellipse, "{rep:?}");
                assert_eq!(rep.factors[0], ImageFactor::Primary);
                assert_eq!(rep.branch_jumps, 0, "{rep:?}");
            }
        }
    }
}
