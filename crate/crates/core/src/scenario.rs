//! Scenario configuration, shipped presets and their checks.

use nalgebra::{Vector2, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::conformal::{self, Pairing};
use crate::conics::{Branch, ConicSpec, WallSet};
use crate::correspondence::{self, TwinRun};
use crate::dynamics::{self, Limits, ReflectionEvent, State, Tolerances, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::potentials::LagrangeParams;
use crate::report::{Check, Report};
use crate::spaces::{self, pairing, Curvature, SpaceSpec, TangentVector};

/// Initial gnomonic position and planar-time chart velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialState {
    pub p: [f64; 2],
    pub v: [f64; 2],
}

impl InitialState {
    pub fn state(&self, space: &SpaceSpec) -> Result<State> {
        let (p, v) = (Vector2::from(self.p), Vector2::from(self.v));
        if space.is_curved() {
            State::lifted(0.0, p, v, space)
        } else {
            Ok(State::plane(0.0, p, v))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BilliardSetup {
    pub space: SpaceSpec,
    #[serde(default)]
    pub params: LagrangeParams,
    pub wall: WallSet,
    pub init: InitialState,
    #[serde(default)]
    pub limits: Limits,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConformalSetup {
    pub pairings: Vec<Pairing>,
    /// Hooke constant of the source system.
    pub f: f64,
    pub z0: [f64; 2],
    pub w0: [f64; 2],
    /// Source time span; one turn about the origin when absent.
    #[serde(default)]
    pub t_span: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageSetup {
    /// `(a, B)` pairs.
    pub members: Vec<[f64; 2]>,
    #[serde(default = "default_image_samples")]
    pub samples: usize,
}

fn default_image_samples() -> usize {
    400
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ScenarioKind {
    Billiard(BilliardSetup),
    ConformalOrbit(ConformalSetup),
    ConfocalImage(ImageSetup),
}

/// A check to run, optionally overriding its threshold or declaring it a
/// negative control.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(default)]
    pub expect_fail: bool,
}

impl CheckSpec {
    pub fn new(name: &str) -> Self {
        CheckSpec { name: name.to_string(), threshold: None, expect_fail: false }
    }

    pub fn expect_fail(name: &str) -> Self {
        CheckSpec { expect_fail: true, ..Self::new(name) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(flatten)]
    pub kind: ScenarioKind,
    /// Checks to evaluate; every applicable check when empty.
    #[serde(default)]
    pub checks: Vec<CheckSpec>,
}

pub const BILLIARD_CHECKS: [&str; 7] = [
    "native_energy",
    "partner_energy",
    "reflection_kinetic",
    "reflection_tangential",
    "bounce_count",
    "twin",
    "first_partner_jump",
];
pub const CONFORMAL_CHECKS: [&str; 3] = ["orbit_distance", "level", "shell_drift"];
pub const IMAGE_CHECKS: [&str; 5] = ["image_residual", "focal", "focal_spread", "spurious_empty", "branch_continuity"];

fn default_threshold(name: &str) -> f64 {
    match name {
        "native_energy" => 1e-9,
        "partner_energy" => 1e-7,
        "reflection_kinetic" => 1e-12,
        "reflection_tangential" => 1e-10,
        "twin" | "orbit_distance" => 1e-6,
        "first_partner_jump" => 1e-3,
        "level" => 1e-12,
        "shell_drift" => 1e-9,
        "image_residual" | "focal" | "focal_spread" => 1e-8,
        _ => 0.5,
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let known: &[&str] = match &self.kind {
            ScenarioKind::Billiard(b) => {
                b.space.validate()?;
                b.params.validate()?;
                b.wall.validate()?;
                if b.wall.conics.iter().any(|c| c.space != b.space) {
                    return Err(Error::Config(format!("{}: wall members must live in the scenario space", self.name)));
                }
                &BILLIARD_CHECKS
            }
            ScenarioKind::ConformalOrbit(c) => {
                if c.pairings.is_empty() {
                    return Err(Error::Config(format!("{}: no pairings listed", self.name)));
                }
                &CONFORMAL_CHECKS
            }
            ScenarioKind::ConfocalImage(i) => {
                if i.members.is_empty() {
                    return Err(Error::Config(format!("{}: no members listed", self.name)));
                }
                &IMAGE_CHECKS
            }
        };
        for c in &self.checks {
            if !known.contains(&c.name.as_str()) {
                return Err(Error::Config(format!("{}: unknown check '{}'", self.name, c.name)));
            }
        }
        Ok(())
    }

    /// Checks to run, with defaults filled in.
    fn check_specs(&self) -> Vec<CheckSpec> {
        if !self.checks.is_empty() {
            return self.checks.clone();
        }
        match &self.kind {
            ScenarioKind::Billiard(b) => BILLIARD_CHECKS
                .iter()
                .filter(|n| **n != "first_partner_jump" && (**n != "twin" || b.space.is_curved()))
                .map(|n| CheckSpec::new(n))
                .collect(),
            ScenarioKind::ConformalOrbit(_) => CONFORMAL_CHECKS.iter().map(|n| CheckSpec::new(n)).collect(),
            ScenarioKind::ConfocalImage(_) => IMAGE_CHECKS.iter().map(|n| CheckSpec::new(n)).collect(),
        }
    }
}

/// Everything a scenario run produced.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Report,
    pub record: Option<TrajectoryRecord>,
    pub twin: Option<TwinRun>,
    pub orbits: Vec<conformal::OrbitCorrespondence>,
    pub images: Vec<conformal::ConfocalImageReport>,
}

/// Largest kinetic-energy jump and tangential-velocity change over the
/// events of a record.
pub fn reflection_law_errors(rec: &TrajectoryRecord) -> Result<(f64, f64)> {
    let mut kinetic: f64 = 0.0;
    let mut tangential: f64 = 0.0;
    for e in &rec.events {
        let (dk, dt) = event_law_error(e, &rec.space)?;
        kinetic = kinetic.max(dk);
        tangential = tangential.max(dt);
    }
    Ok((kinetic, tangential))
}

fn event_law_error(e: &ReflectionEvent, space: &SpaceSpec) -> Result<(f64, f64)> {
    match (e.v_in, e.v_out, e.normal) {
        (TangentVector::Ambient3 { v: a, .. }, TangentVector::Ambient3 { v: b, .. }, TangentVector::Ambient3 { v: n, .. }) => {
            let s = space.sign();
            let ip = |x: &Vector3<f64>, y: &Vector3<f64>| pairing(x, y, s);
            let ta = a - n * ip(&a, &n);
            let tb = b - n * ip(&b, &n);
            let d = ta - tb;
            Ok(((0.5 * (ip(&a, &a) - ip(&b, &b))).abs(), ip(&d, &d).abs().sqrt()))
        }
        (TangentVector::Gnomonic { v: a, .. }, TangentVector::Gnomonic { v: b, .. }, TangentVector::Gnomonic { v: n, .. }) => {
            let ip = |x: &Vector2<f64>, y: &Vector2<f64>| spaces::affine_inner(x, y, space);
            let ta = a - n * ip(&a, &n);
            let tb = b - n * ip(&b, &n);
            let d = ta - tb;
            Ok(((0.5 * (ip(&a, &a) - ip(&b, &b))).abs(), ip(&d, &d).sqrt()))
        }
        _ => Err(Error::ChartMismatch { expected: space.native_chart(), found: e.v_in.chart() }),
    }
}

/// Run a scenario and evaluate its checks.
pub fn run_scenario(scn: &Scenario, tol: &Tolerances) -> Result<Outcome> {
    scn.validate()?;
    let specs = scn.check_specs();
    let threshold = |c: &CheckSpec| c.threshold.unwrap_or_else(|| default_threshold(&c.name));
    let mut checks = Vec::new();
    let mut outcome = Outcome {
        report: Report::new(&scn.name, Vec::new()),
        record: None,
        twin: None,
        orbits: Vec::new(),
        images: Vec::new(),
    };
    match &scn.kind {
        ScenarioKind::Billiard(b) => {
            let init = b.init.state(&b.space)?;
            let wants_twin = specs.iter().any(|c| c.name == "twin");
            let (rec, twin) = if wants_twin {
                let tw = correspondence::twin_run(&init, &b.params, &b.space, &b.wall, &b.limits, tol)?;
                (tw.curved.clone(), Some(tw))
            } else {
                (dynamics::simulate(&init, &b.params, &b.space, &b.wall, &b.limits, tol), None)
            };
            if rec.termination == dynamics::Termination::Numerical {
                let msg = rec.message.clone().unwrap_or_default();
                let msg = msg.strip_prefix("numerical failure: ").unwrap_or(&msg);
                return Err(Error::Numerical(msg.to_string()));
            }
            let (kinetic, tangential) = reflection_law_errors(&rec)?;
            for c in &specs {
                let th = threshold(c);
                let check = match c.name.as_str() {
                    "native_energy" => Check::below("native_energy", rec.native_drift(), th),
                    "partner_energy" => Check::below("partner_energy", rec.partner_variation(), th),
                    "reflection_kinetic" => Check::below("reflection_kinetic", kinetic, th),
                    "reflection_tangential" => Check::below("reflection_tangential", tangential, th),
                    "bounce_count" => Check::above("bounce_count", rec.events.len() as f64, b.limits.bounce_max as f64 - 0.5),
                    "twin" => match &twin {
                        Some(tw) => {
                            let check = Check::below("twin", tw.comparison.max_distance, th);
                            match &tw.comparison.mismatch {
                                Some(m) => Check { pass: false, ..check }.with_detail(m.clone()),
                                None => check,
                            }
                        }
                        None => Check::failed("twin", "twin runs need a curved space"),
                    },
                    "first_partner_jump" => match rec.events.first() {
                        Some(e) => Check::above("first_partner_jump", e.partner_jump(), th),
                        None => Check::failed("first_partner_jump", "no reflection recorded"),
                    },
                    other => return Err(Error::Config(format!("unknown check '{other}'"))),
                };
                let check = match (&rec.message, check.pass) {
                    (Some(m), false) => check.with_detail(format!("{:?}: {m}", rec.termination)),
                    _ => check,
                };
                checks.push(check.expecting_failure(c.expect_fail));
            }
            outcome.record = Some(rec);
            outcome.twin = twin;
        }
        ScenarioKind::ConformalOrbit(c) => {
            let (z0, w0) = (Complex64::new(c.z0[0], c.z0[1]), Complex64::new(c.w0[0], c.w0[1]));
            for pairing in &c.pairings {
                outcome.orbits.push(conformal::verify_orbit_correspondence(*pairing, c.f, z0, w0, c.t_span, tol)?);
            }
            for spec in &specs {
                let th = threshold(spec);
                for o in &outcome.orbits {
                    let tag = format!("{}:{:?}", spec.name, o.pairing);
                    let check = match spec.name.as_str() {
                        "orbit_distance" => Check::below(tag, o.max_distance, th),
                        "level" => Check::below(tag, o.level_error(), th)
                            .with_detail(format!("expected {:.15e}", o.level_expected)),
                        "shell_drift" => Check::below(tag, o.source_drift.max(o.target_drift), th),
                        other => return Err(Error::Config(format!("unknown check '{other}'"))),
                    };
                    checks.push(check.expecting_failure(spec.expect_fail));
                }
            }
        }
        ScenarioKind::ConfocalImage(img) => {
            for [a, b] in &img.members {
                outcome.images.push(conformal::confocal_image_check(*a, *b, img.samples)?);
            }
            let worst = |f: &dyn Fn(&conformal::ConfocalImageReport) -> f64| outcome.images.iter().map(f).fold(0.0, f64::max);
            for spec in &specs {
                let th = threshold(spec);
                let check = match spec.name.as_str() {
                    "image_residual" => {
                        Check::below("image_residual", worst(&|r| r.sphere_residual.max(r.gnomonic_residual)), th)
                    }
                    "focal" => Check::below("focal", worst(&|r| r.focal_error()), th),
                    "focal_spread" => {
                        let mut by_a: Vec<(f64, f64, f64)> = Vec::new();
                        for r in &outcome.images {
                            for c in &r.focal_measured {
                                match by_a.iter_mut().find(|(a, _, _)| *a == r.a) {
                                    Some(e) => {
                                        e.1 = e.1.min(*c);
                                        e.2 = e.2.max(*c);
                                    }
                                    None => by_a.push((r.a, *c, *c)),
                                }
                            }
                        }
                        Check::below("focal_spread", by_a.iter().map(|(_, lo, hi)| hi - lo).fold(0.0, f64::max), th)
                    }
                    "spurious_empty" => {
                        let nonempty = outcome
                            .images
                            .iter()
                            .filter(|r| r.family == crate::conics::Family::Ellipse && !r.spurious_empty)
                            .count();
                        Check::below("spurious_empty", nonempty as f64, th).with_detail("ellipse members with real points on the second factor")
                    }
                    "branch_continuity" => {
                        Check::below("branch_continuity", outcome.images.iter().map(|r| r.branch_jumps).sum::<usize>() as f64, th)
                    }
                    other => return Err(Error::Config(format!("unknown check '{other}'"))),
                };
                checks.push(check.expecting_failure(spec.expect_fail));
            }
        }
    }
    outcome.report = Report::new(&scn.name, checks);
    Ok(outcome)
}

fn billiard(
    name: &str,
    description: &str,
    space: SpaceSpec,
    params: LagrangeParams,
    wall: Vec<ConicSpec>,
    init: ([f64; 2], [f64; 2]),
) -> Scenario {
    Scenario {
        name: name.to_string(),
        description: description.to_string(),
        kind: ScenarioKind::Billiard(BilliardSetup {
            space,
            params,
            wall: WallSet { conics: wall },
            init: InitialState { p: init.0, v: init.1 },
            limits: Limits { t_max: 200.0, bounce_max: 20, sample_dt: 0.002 },
        }),
        checks: Vec::new(),
    }
}

/// The shipped scenarios.
pub fn presets() -> Vec<Scenario> {
    let a = 0.5;
    let b = 0.8;
    let geometries = [
        ("plane", SpaceSpec::plane(Curvature::Positive, a)),
        ("sphere", SpaceSpec::sphere(a)),
        ("hyperbolic", SpaceSpec::hyperboloid(a)),
    ];
    let slow = ([0.05, 0.02], [0.7, 0.4]);
    let orbiting = ([0.3, 0.0], [0.0, 0.9]);
    let mut out = Vec::new();
    for (geo, space) in geometries {
        let space = space.expect("preset spaces are valid");
        let ellipse = || vec![ConicSpec::confocal(space, b).expect("preset conics are valid")];
        let free_name = if geo == "plane" { "birkhoff-ellipse".to_string() } else { format!("free-ellipse-{geo}") };
        out.push(billiard(&free_name, "free motion in a confocal ellipse", space, LagrangeParams::new(0.0, 0.0, 0.0), ellipse(), slow));
        out.push(billiard(
            &format!("hooke-centered-ellipse-{geo}"),
            "attracting Hooke center inside a centered ellipse",
            space,
            LagrangeParams::new(0.0, 0.0, -0.5),
            ellipse(),
            slow,
        ));
        out.push(billiard(
            &format!("kepler-focused-ellipse-{geo}"),
            "attracting Kepler center at a focus of the ellipse",
            space,
            LagrangeParams::new(0.3, 0.0, 0.0),
            ellipse(),
            orbiting,
        ));
        let two_name = if geo == "plane" { "two-center-confocal".to_string() } else { format!("two-center-confocal-{geo}") };
        out.push(billiard(&two_name, "two repelling centers at the foci", space, LagrangeParams::new(-0.1, -0.15, 0.0), ellipse(), slow));
        out.push(billiard(
            &format!("lagrange-full-{geo}"),
            "two Kepler centers and a Hooke term inside a confocal ellipse",
            space,
            LagrangeParams::new(-0.1, -0.15, -0.3),
            ellipse(),
            slow,
        ));
    }
    let sphere = SpaceSpec::sphere(a).expect("valid");
    out.push(billiard(
        "lagrange-ellipse-hyperbola-sphere",
        "wall made of a confocal ellipse and the upper branch of a confocal hyperbola",
        sphere,
        LagrangeParams::new(-0.1, -0.15, -0.3),
        vec![
            ConicSpec::confocal(sphere, b).expect("valid"),
            ConicSpec::confocal(sphere, 0.3).expect("valid").with_branch(Branch::Positive),
        ],
        ([0.05, -0.1], [0.7, 0.4]),
    ));
    let mut control = billiard(
        "negative-control-offset-circle",
        "circle not confocal with the centers: the partner energy jumps at reflections",
        sphere,
        LagrangeParams::new(-0.1, -0.15, -0.3),
        vec![ConicSpec::circle(sphere, [0.15, 0.1], 0.6).expect("valid")],
        slow,
    );
    control.checks = vec![
        CheckSpec::new("native_energy"),
        CheckSpec::new("reflection_kinetic"),
        CheckSpec::new("reflection_tangential"),
        CheckSpec::expect_fail("partner_energy"),
        CheckSpec::new("first_partner_jump"),
    ];
    out.push(control);
    out.push(Scenario {
        name: "conformal-orbit-pairings".to_string(),
        description: "square-map correspondence of Hooke and Kepler orbits over one period".to_string(),
        kind: ScenarioKind::ConformalOrbit(ConformalSetup {
            pairings: Pairing::ALL.to_vec(),
            f: 0.3,
            z0: [0.4, 0.05],
            w0: [0.1, 0.8],
            t_span: None,
        }),
        checks: Vec::new(),
    });
    let mut members = Vec::new();
    for a in [0.1, 0.3, 0.5] {
        for b in [a + 0.1, a + 0.3, 0.9, 0.5 * a] {
            members.push([a, b]);
        }
    }
    out.push(Scenario {
        name: "conformal-confocal-image".to_string(),
        description: "square-map images of focused hyperbolic conics form a centered confocal family".to_string(),
        kind: ScenarioKind::ConfocalImage(ImageSetup { members, samples: 400 }),
        checks: Vec::new(),
    });
    out
}

pub fn preset(name: &str) -> Option<Scenario> {
    presets().into_iter().find(|s| s.name == name)
}

pub fn preset_names() -> Vec<String> {
    presets().into_iter().map(|s| s.name).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn required_presets_exist() {
        let names = preset_names();
        assert!(names.len() >= 12);
        for n in [
            "birkhoff-ellipse",
            "kepler-focused-ellipse-sphere",
            "lagrange-full-hyperbolic",
            "two-center-confocal",
            "conformal-confocal-image",
            "negative-control-offset-circle",
        ] {
            assert!(names.iter().any(|m| m == n), "{n}");
        }
    }

    #[test]
    fn scenarios_round_trip_through_json() {
        for s in presets() {
            let json = serde_json::to_string(&s).unwrap();
            let back: Scenario = serde_json::from_str(&json).unwrap();
            assert_eq!(back, s);
            s.validate().unwrap();
        }
    }

    #[test]
    fn unknown_check_is_a_config_error() {
        let mut s = preset("birkhoff-ellipse").unwrap();
        s.checks = vec![CheckSpec::new("nonsense")];
        assert!(matches!(s.validate(), Err(Error::Config(_))));
    }
}
