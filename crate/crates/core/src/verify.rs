//! Verification suites: each criterion aggregates named checks over random
//! samples or over the shipped presets.

use std::time::Instant;

use nalgebra::{Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conics::{self, ConicSpec};
use crate::correspondence::{self, map_normal, map_velocity};
use crate::dynamics::{self, State, Tolerances};
use crate::error::Result;
use crate::potentials::{self, LagrangeParams};
use crate::report::Check;
use crate::scenario::{self, Outcome, Scenario, ScenarioKind};
use crate::spaces::{self, Curvature, Direction, SpaceSpec, TangentVector};

pub const DEFAULT_SEED: u64 = 20_240_501;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    pub id: u8,
    pub title: String,
    pub checks: Vec<Check>,
    pub seconds: f64,
}

impl Criterion {
    fn new(id: u8, title: &str, checks: Vec<Check>, start: Instant) -> Self {
        Criterion { id, title: title.to_string(), checks, seconds: start.elapsed().as_secs_f64() }
    }

    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(Check::ok)
    }

    /// One-line summary.
    pub fn line(&self) -> String {
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        let parts: Vec<String> = self
            .checks
            .iter()
            .map(|c| {
                let op = match c.bound {
                    crate::report::Bound::Below => "<",
                    crate::report::Bound::Above => ">",
                };
                let flag = if c.ok() { "" } else { " !" };
                format!("{} {:.2e}{op}{:e}{flag}", c.name, c.value, c.threshold)
            })
            .collect();
        format!("criterion {} {verdict}: {} ({:.2} s) | {}", self.id, self.title, self.seconds, parts.join("; "))
    }
}

/// Outcomes of every shipped billiard preset, in preset order.
pub fn billiard_outcomes(tol: &Tolerances) -> Vec<(Scenario, Result<Outcome>, f64)> {
    scenario::presets()
        .into_par_iter()
        .filter(|s| matches!(s.kind, ScenarioKind::Billiard(_)))
        .map(|s| {
            let start = Instant::now();
            let out = scenario::run_scenario(&s, tol);
            (s, out, start.elapsed().as_secs_f64())
        })
        .collect()
}

/// Largest value of a quantity and where it occurred.
struct Worst {
    value: f64,
    at: String,
}

impl Worst {
    fn new() -> Self {
        Worst { value: 0.0, at: String::new() }
    }

    fn update(&mut self, value: f64, at: impl Into<String>) {
        if !(value <= self.value) {
            self.value = value;
            self.at = at.into();
        }
    }

    fn below(&self, name: &str, threshold: f64) -> Check {
        Check::below(name, self.value, threshold).with_detail(self.at.clone())
    }
}

fn random_params(rng: &mut ChaCha8Rng) -> LagrangeParams {
    LagrangeParams::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

/// Random chart point away from the Kepler centers; inside the unit disc
/// for the hyperbolic plane.
fn random_chart_point(rng: &mut ChaCha8Rng, space: &SpaceSpec) -> Vector2<f64> {
    let radius = if space.sign() > 0.0 { 2.0 } else { 0.95 };
    let centers = LagrangeParams::centers_chart(space);
    loop {
        let p = Vector2::new(rng.gen_range(-radius..radius), rng.gen_range(-radius..radius));
        if p.norm() < radius && centers[..2].iter().all(|c| (p - c).norm() > 0.05) {
            return p;
        }
    }
}

fn random_velocity(rng: &mut ChaCha8Rng) -> Vector2<f64> {
    let angle = rng.gen_range(0.0..std::f64::consts::TAU);
    Vector2::new(angle.cos(), angle.sin()) * rng.gen_range(0.2..2.0)
}

/// Pushed-forward curved force against the planar partner force.
pub fn criterion_1(seed: u64) -> Criterion {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();
    for curvature in [Curvature::Positive, Curvature::Negative] {
        let mut worst = Worst::new();
        let mut failures = 0usize;
        for set in 0..10 {
            let a = match curvature {
                Curvature::Positive => rng.gen_range(0.0..1.5),
                Curvature::Negative => rng.gen_range(0.0..0.9),
            };
            let space = match curvature {
                Curvature::Positive => SpaceSpec::sphere(a),
                Curvature::Negative => SpaceSpec::hyperboloid(a),
            }
            .expect("sampled a is valid");
            let params = random_params(&mut rng);
            for _ in 0..100 {
                let p = random_chart_point(&mut rng, &space);
                let v = random_velocity(&mut rng);
                match potentials::lift_state(&p, &v, &space)
                    .and_then(|(q, w)| correspondence::force_correspondence_error(&q, &w, &params, &space))
                {
                    Ok(err) => worst.update(err, format!("set {set}, a = {a:.3}")),
                    Err(_) => failures += 1,
                }
            }
        }
        let name = format!("force_relative_error_{}", geometry(curvature));
        let check = if failures > 0 {
            Check::failed(name, format!("{failures} states could not be evaluated"))
        } else {
            worst.below(&name, 1e-8)
        };
        checks.push(check);
    }
    checks.push(Check::below("runtime_s", start.elapsed().as_secs_f64(), 5.0));
    Criterion::new(1, "projective force correspondence", checks, start)
}

fn geometry(c: Curvature) -> &'static str {
    match c {
        Curvature::Positive => "sphere",
        Curvature::Negative => "hyperbolic",
    }
}

fn is_control(s: &Scenario) -> bool {
    s.checks.iter().any(|c| c.expect_fail)
}

/// Energy and partner energy along 20-bounce runs of every preset, plus the
/// negative control.
pub fn criterion_2(runs: &[(Scenario, Result<Outcome>, f64)]) -> Criterion {
    let start = Instant::now();
    let mut native = Worst::new();
    let mut partner = Worst::new();
    let mut runtime = Worst::new();
    let mut checks = Vec::new();
    let mut control_jump = None;
    let mut bounces = Worst::new();
    for (s, out, secs) in runs {
        runtime.update(*secs, s.name.clone());
        let rec = match out {
            Ok(o) => o.record.as_ref().expect("billiards carry a record"),
            Err(e) => {
                checks.push(Check::failed(format!("run:{}", s.name), e.to_string()));
                continue;
            }
        };
        if is_control(s) {
            control_jump = rec.events.first().map(|e| e.partner_jump());
            continue;
        }
        native.update(rec.native_drift(), s.name.clone());
        partner.update(rec.partner_variation(), s.name.clone());
        if let ScenarioKind::Billiard(b) = &s.kind {
            bounces.update(b.limits.bounce_max as f64 - rec.events.len() as f64, s.name.clone());
        }
    }
    checks.push(native.below("native_drift", 1e-9));
    checks.push(partner.below("partner_variation", 1e-7));
    checks.push(bounces.below("missing_bounces", 0.5));
    checks.push(match control_jump {
        Some(j) => Check::above("control_partner_jump", j, 1e-3),
        None => Check::failed("control_partner_jump", "negative control produced no reflection"),
    });
    checks.push(runtime.below("max_runtime_s", 60.0));
    Criterion::new(2, "energy and partner energy along confocal billiards", checks, start)
}

fn wall_members(space: SpaceSpec) -> Vec<ConicSpec> {
    let a = space.a;
    let mut out = Vec::new();
    // Klein-disc ellipses must stay inside the unit disc.
    let span = if space.sign() > 0.0 { 1.0 } else { 1.0 - a };
    for b in [a + 0.2 * span, a + 0.5 * span, a + 0.8 * span] {
        out.push(ConicSpec::confocal(space, b).expect("ellipse members are valid"));
    }
    out.push(ConicSpec::confocal(space, 0.5 * a).expect("hyperbola members are valid"));
    out
}

/// Line angle between two planar vectors in the affine metric.
fn affine_angle(u: &Vector2<f64>, v: &Vector2<f64>, space: &SpaceSpec) -> f64 {
    let dot = spaces::affine_inner(u, v, space);
    let cross = (u.x * v.y - u.y * v.x) / space.kappa().sqrt();
    cross.abs().atan2(dot.abs())
}

/// Conic, normal and reflection correspondence at sampled wall points.
pub fn criterion_3(seed: u64) -> Criterion {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut on_partner = Worst::new();
    let mut on_curved = Worst::new();
    let mut angle = Worst::new();
    let mut commute = Worst::new();
    let mut errors = Vec::new();
    for a in [0.3, 0.6, 1.0] {
        for space in [SpaceSpec::sphere(a), SpaceSpec::hyperboloid(a)] {
            // The hyperbolic plane needs both centers inside the disc.
            let Ok(space) = space else { continue };
            let plane = space.partner();
            for member in wall_members(space) {
                let partner = member.project(Direction::Down);
                let tag = format!("{:?} a = {a}, B² = {:.3}", space.curvature(), member.b_sq);
                for j in 0..200 {
                    let upper = j % 2 == 0;
                    let t = match member.family {
                        conics::Family::Ellipse => rng.gen_range(0.0..std::f64::consts::TAU),
                        conics::Family::Hyperbola => rng.gen_range(-1.0..1.0),
                    };
                    let p0 = member.sample_chart(t, upper);
                    let result = (|| -> Result<()> {
                        let q = spaces::central_lift_up(&p0, &space)?;
                        on_curved.update(member.eval_ambient(&q).abs(), tag.clone());
                        let p = spaces::central_project_down(&q, &space)?;
                        on_partner.update(conics::implicit_eval(&partner, &spaces::ChartPoint::Gnomonic(p))?.abs(), tag.clone());

                        let n = conics::normal_ambient(&member, &q)?;
                        let mapped = map_normal(&TangentVector::Ambient3 { base: q, v: n }, Direction::Down, &space)?;
                        let planar_n = conics::normal_plane(&partner, &p)?;
                        let m = Vector2::from_vec(mapped.components());
                        angle.update(affine_angle(&m, &planar_n, &plane), tag.clone());

                        let raw = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                        let v = spaces::tangent_project(&q, &raw, &space);
                        let curved = State::ambient(0.0, q, v);
                        let reflected = dynamics::reflect(&curved, &member, &space)?.state;
                        let a_path = map_velocity(&reflected.vel, Direction::Down, &space)?;
                        let down = map_velocity(&curved.vel, Direction::Down, &space)?;
                        let b_path = dynamics::reflect(&State::new(0.0, down), &partner, &plane)?.state.vel;
                        let (wa, wb) = (Vector2::from_vec(a_path.components()), Vector2::from_vec(b_path.components()));
                        commute.update((wa - wb).norm() / wb.norm().max(1e-300), tag.clone());
                        Ok(())
                    })();
                    if let Err(e) = result {
                        errors.push(format!("{tag}: {e}"));
                    }
                }
            }
        }
    }
    let mut checks = vec![
        on_curved.below("curved_implicit", 1e-10),
        on_partner.below("partner_implicit", 1e-10),
        angle.below("normal_angle", 1e-8),
        commute.below("reflect_project_commute", 1e-8),
    ];
    if !errors.is_empty() {
        checks.push(Check::failed("evaluation", format!("{} errors, first: {}", errors.len(), errors[0])));
    }
    Criterion::new(3, "wall, normal and reflection correspondence", checks, start)
}

/// Independence of the energy pair at random states.
pub fn criterion_4(seed: u64) -> Criterion {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();
    for a in [0.3, 0.6, 1.0] {
        let mut worst_fraction: f64 = 1.0;
        for curvature in [Curvature::Positive, Curvature::Negative] {
            let Ok(plane) = SpaceSpec::plane(curvature, a) else { continue };
            let curved = plane.partner();
            let n = 10_000;
            let good = (0..n)
                .filter(|_| {
                    let p = random_chart_point(&mut rng, &curved);
                    let v = random_velocity(&mut rng);
                    potentials::independence_det(&p, &v, &plane) > 1e-8
                })
                .count();
            worst_fraction = worst_fraction.min(good as f64 / n as f64);
        }
        checks.push(Check::above(format!("independent_fraction_a{a}"), worst_fraction, 0.99));
    }
    Criterion::new(4, "functional independence of the energy pair", checks, start)
}

/// Curved billiards against independently simulated planar twins.
pub fn criterion_5(runs: &[(Scenario, Result<Outcome>, f64)]) -> Criterion {
    let start = Instant::now();
    let mut checks = Vec::new();
    for curvature in [Curvature::Positive, Curvature::Negative] {
        let mut worst = Worst::new();
        let mut mismatches = Vec::new();
        let mut count = 0;
        for (s, out, _) in runs {
            let Ok(o) = out else { continue };
            let Some(tw) = &o.twin else { continue };
            if is_control(s) || tw.curved.space.curvature() != curvature {
                continue;
            }
            count += 1;
            worst.update(tw.comparison.max_distance, s.name.clone());
            if let Some(m) = &tw.comparison.mismatch {
                mismatches.push(format!("{}: {m}", s.name));
            }
            if tw.curved.events.len() != tw.planar.events.len() {
                mismatches.push(format!("{}: event counts differ", s.name));
            }
        }
        let name = format!("twin_distance_{}", geometry(curvature));
        checks.push(if count == 0 {
            Check::failed(name, "no twin runs")
        } else if !mismatches.is_empty() {
            Check { pass: false, ..worst.below(&name, 1e-6) }.with_detail(mismatches.join("; "))
        } else {
            worst.below(&name, 1e-6)
        });
    }
    Criterion::new(5, "curved and planar twin billiards agree", checks, start)
}

fn preset_checks(name: &str, tol: &Tolerances) -> Vec<Check> {
    match scenario::preset(name).map(|s| scenario::run_scenario(&s, tol)) {
        Some(Ok(o)) => o.report.checks,
        Some(Err(e)) => vec![Check::failed(name, e.to_string())],
        None => vec![Check::failed(name, "preset missing")],
    }
}

/// Conformal orbit correspondence for the three pairings.
pub fn criterion_6(tol: &Tolerances) -> Criterion {
    let start = Instant::now();
    let checks = preset_checks("conformal-orbit-pairings", tol);
    Criterion::new(6, "conformal orbit correspondence", checks, start)
}

/// Image of the focused hyperbolic confocal family under the square map.
pub fn criterion_7(tol: &Tolerances) -> Criterion {
    let start = Instant::now();
    let checks = preset_checks("conformal-confocal-image", tol);
    Criterion::new(7, "square-map image of a focused confocal family", checks, start)
}

/// Reflection law at every recorded event of every preset.
pub fn criterion_8(runs: &[(Scenario, Result<Outcome>, f64)]) -> Criterion {
    let start = Instant::now();
    let mut kinetic = Worst::new();
    let mut tangential = Worst::new();
    let mut checks = Vec::new();
    let mut events = 0;
    for (s, out, _) in runs {
        let Ok(o) = out else { continue };
        let Some(rec) = &o.record else { continue };
        let records = std::iter::once(rec).chain(o.twin.iter().map(|t| &t.planar));
        for r in records {
            events += r.events.len();
            match scenario::reflection_law_errors(r) {
                Ok((k, t)) => {
                    kinetic.update(k, s.name.clone());
                    tangential.update(t, s.name.clone());
                }
                Err(e) => checks.push(Check::failed(format!("events:{}", s.name), e.to_string())),
            }
        }
    }
    checks.push(kinetic.below("kinetic_jump", 1e-12));
    checks.push(tangential.below("tangential_change", 1e-10));
    checks.push(Check::above("events_checked", events as f64, 0.5));
    Criterion::new(8, "reflection law at every event", checks, start)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Projective,
    Conformal,
    All,
}

/// Run a suite of criteria in order.
pub fn run_suite(suite: Suite, seed: u64, tol: &Tolerances) -> Vec<Criterion> {
    let mut out = Vec::new();
    let projective = matches!(suite, Suite::Projective | Suite::All);
    let conformal = matches!(suite, Suite::Conformal | Suite::All);
    let start = Instant::now();
    let runs = if projective { billiard_outcomes(tol) } else { Vec::new() };
    let shared = start.elapsed().as_secs_f64();
    // Criteria 2, 5 and 8 share the billiard runs; each is charged their time.
    let charged = |mut c: Criterion| {
        c.seconds += shared;
        c
    };
    if projective {
        out.push(criterion_1(seed));
        out.push(charged(criterion_2(&runs)));
        out.push(criterion_3(seed.wrapping_add(1)));
        out.push(criterion_4(seed.wrapping_add(2)));
        out.push(charged(criterion_5(&runs)));
    }
    if conformal {
        out.push(criterion_6(tol));
        out.push(criterion_7(tol));
    }
    if projective {
        out.push(charged(criterion_8(&runs)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conics::Branch;

    #[test]
    fn criterion_lines_mention_verdict() {
        let c = Criterion { id: 9, title: "demo".into(), checks: vec![Check::below("x", 1.0, 2.0)], seconds: 0.0 };
        assert!(c.passed());
        assert!(c.line().starts_with("criterion 9 PASS"));
        let empty = Criterion { checks: Vec::new(), ..c };
        assert!(!empty.passed());
    }

    #[test]
    fn independence_criterion_passes() {
        assert!(criterion_4(1).passed());
    }

    #[test]
    fn hyperbola_branch_members_are_sampled() {
        let space = SpaceSpec::sphere(0.5).unwrap();
        let h = ConicSpec::confocal(space, 0.25).unwrap().with_branch(Branch::Positive);
        assert!(h.is_active_chart(&h.sample_chart(0.3, true)));
    }
}
