use billiards::conformal::{self, ConformalSystem, Pairing};
use billiards::correspondence;
use billiards::dynamics::reflect_vector;
use billiards::potentials::{self, LagrangeParams};
use billiards::spaces::{self, SpaceSpec};
use nalgebra::{Vector2, Vector3};
use num_complex::Complex64;
use proptest::prelude::*;
use std::f64::consts::TAU;

fn space(curved_sphere: bool, a: f64) -> SpaceSpec {
    if curved_sphere {
        SpaceSpec::sphere(a).unwrap()
    } else {
        SpaceSpec::hyperboloid(a).unwrap()
    }
}

/// Chart point inside the valid region: anywhere for the sphere, inside the
/// unit disc for the hyperboloid.
fn chart_point(sphere: bool, r: f64, theta: f64) -> Vector2<f64> {
    let r = if sphere { 3.0 * r } else { 0.95 * r };
    Vector2::new(r * theta.cos(), r * theta.sin())
}

fn angle(u: Complex64, v: Complex64) -> f64 {
    (v / u).arg()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn square_map_is_conformal(r in 0.1f64..0.9, th in 0.0f64..TAU, d1 in 0.0f64..TAU, d2 in 0.0f64..TAU) {
        let z = Complex64::from_polar(r, th);
        let w = Complex64::new(0.3, -0.2);
        let h = 1e-5;
        let image = |d: f64| {
            let e = Complex64::from_polar(h, d);
            conformal::square_map(z + e, w).unwrap().0 - conformal::square_map(z - e, w).unwrap().0
        };
        let before = angle(Complex64::from_polar(1.0, d1), Complex64::from_polar(1.0, d2));
        let after = angle(image(d1), image(d2));
        let diff = (after - before + std::f64::consts::PI).rem_euclid(2.0 * std::f64::consts::PI) - std::f64::consts::PI;
        prop_assert!(diff.abs() < 1e-8, "angle changed by {diff:e}");
    }

    #[test]
    fn square_map_preserves_liouville_form(r in 0.05f64..0.95, th in 0.0f64..TAU, wr in -2.0f64..2.0, wi in -2.0f64..2.0, d in 0.0f64..TAU) {
        let z = Complex64::from_polar(r, th);
        let w = Complex64::new(wr, wi);
        let dz = Complex64::from_polar(1.0, d);
        let (_, p) = conformal::square_map(z, w).unwrap();
        let before = (w.conj() * dz).re;
        let after = (p.conj() * (2.0 * z * dz)).re;
        prop_assert!((before - after).abs() < 1e-12 * (1.0 + before.abs()));
    }

    #[test]
    fn hooke_shells_map_to_kepler_shells(r in 0.1f64..0.7, th in 0.0f64..TAU, wr in -1.0f64..1.0, wi in -1.0f64..1.0, f in 0.05f64..2.0, sphere in any::<bool>()) {
        let z = Complex64::from_polar(r, th);
        let w = Complex64::new(wr, wi);
        let pairing = if sphere { Pairing::SphericalHookeKepler } else { Pairing::HyperbolicHookeKepler };
        let source = pairing.source(f);
        let mhat = source.hamiltonian(z, w).unwrap();
        prop_assert!(conformal::hamiltonian_on_shell(&source, z, w, mhat).unwrap().abs() < 1e-14 * (1.0 + mhat.abs()));
        let kepler = ConformalSystem::hyperbolic_kepler(2.0 * mhat);
        let (q, _) = conformal::square_map(z, w).unwrap();
        let p = conformal::kepler_momentum(z, w).unwrap();
        let level = conformal::energy_level_relation(f, mhat, source.chart().sign());
        let err = (kepler.hamiltonian(q, p).unwrap() - level).abs();
        prop_assert!(err < 1e-11 * (1.0 + level.abs()), "shell error {err:e}");
    }

    #[test]
    fn spherical_hooke_shells_are_hyperbolic_hooke_shells(r in 0.05f64..0.8, th in 0.0f64..TAU, wr in -1.0f64..1.0, wi in -1.0f64..1.0, f in 0.05f64..2.0) {
        let z = Complex64::from_polar(r, th);
        let w = Complex64::new(wr, wi);
        let mhat = ConformalSystem::spherical_hooke(f).hamiltonian(z, w).unwrap();
        let h = ConformalSystem::hyperbolic_hooke(f + mhat).hamiltonian(z, w).unwrap();
        prop_assert!((h - mhat).abs() < 1e-12 * (1.0 + mhat.abs()));
    }

    #[test]
    fn gnomonic_chart_round_trips(sphere in any::<bool>(), a in 0.0f64..0.9, r in 0.0f64..1.0, th in 0.0f64..TAU, vx in -1.0f64..1.0, vy in -1.0f64..1.0) {
        let s = space(sphere, a);
        let p = chart_point(sphere, r, th);
        let q = spaces::central_lift_up(&p, &s).unwrap();
        prop_assert!(spaces::manifold_residual(&q, &s) < 1e-13);
        let back = spaces::central_project_down(&q, &s).unwrap();
        prop_assert!((back - p).norm() < 1e-12 * (1.0 + p.norm()));
        let v = Vector2::new(vx, vy);
        let up = spaces::pushforward_up(&p, &v, &s).unwrap();
        prop_assert!(spaces::pairing(&q, &up, s.sign()).abs() < 1e-12 * (1.0 + up.norm()));
        let down = spaces::pushforward_down(&q, &up, &s).unwrap();
        prop_assert!((down - v).norm() < 1e-11 * (1.0 + v.norm()));
    }

    #[test]
    fn stereographic_chart_round_trips(sphere in any::<bool>(), r in 0.0f64..1.0, th in 0.0f64..TAU) {
        let s = space(sphere, 0.0);
        let p = chart_point(sphere, r, th);
        let q = spaces::central_lift_up(&p, &s).unwrap();
        let w = spaces::stereographic_chart(&q, &s).unwrap();
        let back = spaces::stereographic_inverse(&w, &s).unwrap();
        prop_assert!((back - q).norm() < 1e-11 * (1.0 + q.norm()));
    }

    #[test]
    fn reflection_is_an_isometric_involution(sphere in any::<bool>(), a in 0.0f64..0.9, r in 0.0f64..1.0, th in 0.0f64..TAU,
                                             vx in -2.0f64..2.0, vy in -2.0f64..2.0, nth in 0.0f64..TAU) {
        let s = space(sphere, a);
        let p = chart_point(sphere, r, th);
        let plane = SpaceSpec::plane(s.curvature(), a).unwrap();
        let inner = |u: &Vector2<f64>, v: &Vector2<f64>| spaces::affine_inner(u, v, &plane);
        let n = Vector2::new(nth.cos(), nth.sin());
        let n = n / inner(&n, &n).sqrt();
        let v = Vector2::new(vx, vy);
        let (once, k) = reflect_vector(&v, &n, inner);
        let (twice, k2) = reflect_vector(&once, &n, inner);
        prop_assert!((twice - v).norm() < 1e-12 * (1.0 + v.norm()));
        prop_assert!((k + k2).abs() < 1e-12 * (1.0 + k.abs()));
        prop_assert!((inner(&once, &once) - inner(&v, &v)).abs() < 1e-12 * (1.0 + inner(&v, &v)));

        let q = spaces::central_lift_up(&p, &s).unwrap();
        let t = spaces::tangent_project(&q, &Vector3::new(vx, vy, 0.3), &s);
        let m = spaces::tangent_project(&q, &Vector3::new(nth.cos(), nth.sin(), -0.2), &s);
        let ip = |u: &Vector3<f64>, v: &Vector3<f64>| spaces::pairing(u, v, s.sign());
        let m = m / ip(&m, &m).sqrt();
        let (once, _) = reflect_vector(&t, &m, ip);
        let (twice, _) = reflect_vector(&once, &m, ip);
        prop_assert!((twice - t).norm() < 1e-12 * (1.0 + t.norm()));
        prop_assert!((ip(&once, &once) - ip(&t, &t)).abs() < 1e-12 * (1.0 + ip(&t, &t)));
    }

    #[test]
    fn forces_correspond(sphere in any::<bool>(), a in 0.0f64..0.8, r in 0.0f64..1.0, th in 0.0f64..TAU,
                         m1 in -1.0f64..1.0, m2 in -1.0f64..1.0, f in -1.0f64..1.0, vx in -1.0f64..1.0, vy in -1.0f64..1.0) {
        let s = space(sphere, a);
        let p = chart_point(sphere, r, th);
        let [c1, c2, _] = LagrangeParams::centers_chart(&s);
        prop_assume!((p - c1).norm() > 0.05 && (p - c2).norm() > 0.05);
        let params = LagrangeParams::new(m1, m2, f);
        let (q, v) = potentials::lift_state(&p, &Vector2::new(vx, vy), &s).unwrap();
        let err = correspondence::force_correspondence_error(&q, &v, &params, &s).unwrap();
        prop_assert!(err < 1e-9, "relative force error {err:e}");
    }
}
