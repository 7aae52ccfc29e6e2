//! Library of parameterized motion-primitive generators.
//!
//! Every primitive compiles its parameters and a per-drone configuration
//! anchor into the same closed form: a constant term plus a sum of
//! sinusoids plus a polynomial in the elapsed segment time,
//!
//! ```text
//! T(c, t) = M(c) + sum_p (A_p(c) sin(w_p tau) + B_p(c) cos(w_p tau))
//!                + sum_q C_q(c) tau^q,        tau = t - t_start.
//! ```
//!
//! The entry-pose convention is uniform: evaluating any primitive at its
//! start time returns the drone's layout anchor, so segment stitching is
//! the safety filter's responsibility, not the generator's.

use crate::core::{PhysicalLimits, Vec3};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::OnceLock;
use thiserror::Error;

/// Per-drone layout anchor instantiating a primitive for that drone.
pub type Configuration = Vec3;

#[derive(Debug, Error)]
pub enum PrimitiveError {
    #[error("unknown primitive `{0}`")]
    UnknownPrimitive(String),
    #[error("unknown parameter `{param}` for primitive `{primitive}`")]
    UnknownParameter { primitive: String, param: String },
    #[error("parameter `{param}` = {value} outside [{min}, {max}]")]
    ParameterOutOfRange { param: String, value: f64, min: f64, max: f64 },
    #[error("time {t} outside segment [{t_start}, {t_end}]")]
    TimeOutOfRange { t: f64, t_start: f64, t_end: f64 },
    #[error("segment must satisfy t_start < t_end, got [{t_start}, {t_end}]")]
    EmptySegment { t_start: f64, t_end: f64 },
}

#[derive(Debug, Error)]
pub enum LayoutError {
    #[error("layout argument invalid: {0}")]
    BadArgument(String),
    #[error("layout too dense: minimum anchor spacing {min_spacing:.3} m below required {required:.3} m")]
    TooSparse { min_spacing: f64, required: f64 },
}

/// A tunable parameter of a primitive, with the range enforced at
/// validation time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: &'static str,
    pub unit: &'static str,
    pub min: f64,
    pub max: f64,
    pub default: f64,
    pub description: &'static str,
}

/// One sinusoidal component: `a sin(omega tau) + b cos(omega tau)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicTerm {
    pub omega: f64,
    pub a: Vec3,
    pub b: Vec3,
}

/// The closed-form generator for one drone: constant + periodic +
/// polynomial terms over the elapsed segment time.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorTerms {
    pub constant: Vec3,
    pub periodic: Vec<PeriodicTerm>,
    /// `(q, C_q)` with q >= 1.
    pub polynomial: Vec<(u32, Vec3)>,
}

impl GeneratorTerms {
    pub fn hover(at: Vec3) -> Self {
        GeneratorTerms { constant: at, periodic: Vec::new(), polynomial: Vec::new() }
    }

    /// Position at elapsed time `tau`.
    pub fn eval(&self, tau: f64) -> Vec3 {
        let mut p = self.constant;
        for term in &self.periodic {
            let phase = term.omega * tau;
            p = p + term.a * phase.sin() + term.b * phase.cos();
        }
        for &(q, c) in &self.polynomial {
            p = p + c * tau.powi(q as i32);
        }
        p
    }

    /// Analytic time derivative at elapsed time `tau`.
    pub fn eval_derivative(&self, tau: f64) -> Vec3 {
        let mut v = Vec3::ZERO;
        for term in &self.periodic {
            let phase = term.omega * tau;
            v = v + term.a * (term.omega * phase.cos()) - term.b * (term.omega * phase.sin());
        }
        for &(q, c) in &self.polynomial {
            v = v + c * (q as f64 * tau.powi(q as i32 - 1));
        }
        v
    }

    /// The same generator with every amplitude zeroed: hover at M(c).
    pub fn zero_amplitudes(&self) -> Self {
        GeneratorTerms::hover(self.constant)
    }
}

/// A primitive selected for a time window with concrete parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimitiveSpec {
    pub name: String,
    pub params: BTreeMap<String, f64>,
    pub t_start: f64,
    pub t_end: f64,
}

impl PrimitiveSpec {
    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }
}

type BuildFn = fn(&BTreeMap<String, f64>, Vec3, f64) -> GeneratorTerms;

/// A named generator family with its parameter schema.
pub struct PrimitiveDefinition {
    pub name: &'static str,
    pub description: &'static str,
    pub params: Vec<ParamSpec>,
    build: BuildFn,
}

impl PrimitiveDefinition {
    /// Fills defaults, rejects unknown names, and range-checks values.
    pub fn resolve_params(
        &self,
        given: &BTreeMap<String, f64>,
    ) -> Result<BTreeMap<String, f64>, PrimitiveError> {
        for name in given.keys() {
            if !self.params.iter().any(|p| p.name == name) {
                return Err(PrimitiveError::UnknownParameter {
                    primitive: self.name.to_string(),
                    param: name.clone(),
                });
            }
        }
        let mut resolved = BTreeMap::new();
        for spec in &self.params {
            let value = given.get(spec.name).copied().unwrap_or(spec.default);
            if !(spec.min..=spec.max).contains(&value) || !value.is_finite() {
                return Err(PrimitiveError::ParameterOutOfRange {
                    param: spec.name.to_string(),
                    value,
                    min: spec.min,
                    max: spec.max,
                });
            }
            resolved.insert(spec.name.to_string(), value);
        }
        Ok(resolved)
    }

    /// Closed-form generator terms for one drone anchor.
    pub fn terms(&self, spec: &PrimitiveSpec, anchor: Configuration) -> Result<GeneratorTerms, PrimitiveError> {
        if !(spec.t_start < spec.t_end) {
            return Err(PrimitiveError::EmptySegment { t_start: spec.t_start, t_end: spec.t_end });
        }
        let resolved = self.resolve_params(&spec.params)?;
        Ok((self.build)(&resolved, anchor, spec.duration()))
    }
}

/// Position of one drone under a primitive at absolute time `t`.
pub fn eval_primitive(
    def: &PrimitiveDefinition,
    spec: &PrimitiveSpec,
    anchor: Configuration,
    t: f64,
) -> Result<Vec3, PrimitiveError> {
    if t < spec.t_start - 1e-9 || t > spec.t_end + 1e-9 {
        return Err(PrimitiveError::TimeOutOfRange { t, t_start: spec.t_start, t_end: spec.t_end });
    }
    Ok(def.terms(spec, anchor)?.eval(t - spec.t_start))
}

/// The built-in generator library.
pub fn catalog() -> &'static [PrimitiveDefinition] {
    static CATALOG: OnceLock<Vec<PrimitiveDefinition>> = OnceLock::new();
    CATALOG.get_or_init(build_catalog)
}

pub fn find(name: &str) -> Result<&'static PrimitiveDefinition, PrimitiveError> {
    catalog()
        .iter()
        .find(|d| d.name == name)
        .ok_or_else(|| PrimitiveError::UnknownPrimitive(name.to_string()))
}

/// Serializable catalog summary; this JSON feeds the prompt builder
/// verbatim.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PrimitiveSummary {
    pub name: String,
    pub description: String,
    pub params: Vec<ParamEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub unit: String,
    pub min: f64,
    pub max: f64,
    pub default: f64,
    pub description: String,
}

pub fn list_primitives() -> Vec<PrimitiveSummary> {
    catalog()
        .iter()
        .map(|d| PrimitiveSummary {
            name: d.name.to_string(),
            description: d.description.to_string(),
            params: d
                .params
                .iter()
                .map(|p| ParamEntry {
                    name: p.name.to_string(),
                    unit: p.unit.to_string(),
                    min: p.min,
                    max: p.max,
                    default: p.default,
                    description: p.description.to_string(),
                })
                .collect(),
        })
        .collect()
}

// ---------------------------------------------------------------------------
// layouts

/// Evenly spaced anchors on a circle, angle 0 first, counter-clockwise.
pub fn layout_circle(
    count: usize,
    radius: f64,
    center: Vec3,
    limits: &PhysicalLimits,
) -> Result<Vec<Configuration>, LayoutError> {
    layout_circle_phased(count, radius, center, 0.0, limits)
}

/// Circle anchors starting at `phase` radians; lets consecutive segments
/// pick up where a rotation or crossing left the formation.
pub fn layout_circle_phased(
    count: usize,
    radius: f64,
    center: Vec3,
    phase: f64,
    limits: &PhysicalLimits,
) -> Result<Vec<Configuration>, LayoutError> {
    if count == 0 {
        return Err(LayoutError::BadArgument("circle needs at least one drone".into()));
    }
    if !(radius > 0.0) {
        return Err(LayoutError::BadArgument(format!("radius must be positive, got {radius}")));
    }
    if count >= 2 {
        let min_spacing = 2.0 * radius * (std::f64::consts::PI / count as f64).sin();
        let required = 2.0 * limits.ellipsoid_radii.x.max(limits.ellipsoid_radii.y);
        if min_spacing < required {
            return Err(LayoutError::TooSparse { min_spacing, required });
        }
    }
    Ok((0..count)
        .map(|i| {
            let angle = phase + 2.0 * std::f64::consts::PI * i as f64 / count as f64;
            center + Vec3::new(radius * angle.cos(), radius * angle.sin(), 0.0)
        })
        .collect())
}

/// Grid anchors centered on `center`, row-major.
pub fn layout_grid(
    rows: usize,
    cols: usize,
    spacing: f64,
    center: Vec3,
    limits: &PhysicalLimits,
) -> Result<Vec<Configuration>, LayoutError> {
    if rows == 0 || cols == 0 {
        return Err(LayoutError::BadArgument("grid needs at least one row and column".into()));
    }
    if !(spacing > 0.0) {
        return Err(LayoutError::BadArgument(format!("spacing must be positive, got {spacing}")));
    }
    if rows * cols >= 2 {
        let required = 2.0 * limits.ellipsoid_radii.x.max(limits.ellipsoid_radii.y);
        if spacing < required {
            return Err(LayoutError::TooSparse { min_spacing: spacing, required });
        }
    }
    let mut anchors = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            anchors.push(
                center
                    + Vec3::new(
                        (c as f64 - (cols as f64 - 1.0) / 2.0) * spacing,
                        (r as f64 - (rows as f64 - 1.0) / 2.0) * spacing,
                        0.0,
                    ),
            );
        }
    }
    Ok(anchors)
}

// ---------------------------------------------------------------------------
// feasibility

/// Sampled kinematic audit of one primitive across all drones.
#[derive(Debug, Clone, Serialize)]
pub struct FeasibilityReport {
    pub max_speed: f64,
    /// Max and min of the mass-normalized thrust demand ||p'' + g||.
    pub max_thrust_demand: f64,
    pub min_thrust_demand: f64,
    pub violations: Vec<String>,
    pub pass: bool,
}

/// Fraction of each kinematic limit held back as sampling margin.
const FEASIBILITY_MARGIN: f64 = 0.10;
const FEASIBILITY_SAMPLES: usize = 240;

/// Samples the generator and its first two finite-difference derivatives,
/// comparing speed, thrust demand, and position against the limits. Speed
/// and thrust checks keep a 10% margin since sampling can straddle
/// extrema; positions are checked against the exact arena box.
pub fn check_feasibility(
    def: &PrimitiveDefinition,
    spec: &PrimitiveSpec,
    anchors: &[Configuration],
    limits: &PhysicalLimits,
) -> FeasibilityReport {
    let mut report = FeasibilityReport {
        max_speed: 0.0,
        max_thrust_demand: f64::NEG_INFINITY,
        min_thrust_demand: f64::INFINITY,
        violations: Vec::new(),
        pass: true,
    };
    let duration = spec.duration();
    if !(duration > 0.0) {
        report.violations.push(format!(
            "segment [{}, {}] has no duration",
            spec.t_start, spec.t_end
        ));
        report.pass = false;
        return report;
    }
    let g = limits.gravity;
    let h = (duration / FEASIBILITY_SAMPLES as f64).min(1e-3);

    for (n, &anchor) in anchors.iter().enumerate() {
        let terms = match def.terms(spec, anchor) {
            Ok(t) => t,
            Err(e) => {
                report.violations.push(format!("drone {n}: {e}"));
                report.pass = false;
                continue;
            }
        };
        let mut out_of_box = false;
        for i in 0..=FEASIBILITY_SAMPLES {
            let tau = duration * i as f64 / FEASIBILITY_SAMPLES as f64;
            let p = terms.eval(tau);
            // central differences, shifted inward at the segment ends
            let tc = tau.clamp(h, duration - h);
            let plus = terms.eval(tc + h);
            let minus = terms.eval(tc - h);
            let mid = terms.eval(tc);
            let speed = ((plus - minus) * (1.0 / (2.0 * h))).norm();
            let accel = (plus + minus - mid * 2.0) * (1.0 / (h * h));
            let demand = (accel + g).norm();

            report.max_speed = report.max_speed.max(speed);
            report.max_thrust_demand = report.max_thrust_demand.max(demand);
            report.min_thrust_demand = report.min_thrust_demand.min(demand);

            if !out_of_box
                && (p.x < limits.p_lo.x
                    || p.y < limits.p_lo.y
                    || p.z < limits.p_lo.z
                    || p.x > limits.p_hi.x
                    || p.y > limits.p_hi.y
                    || p.z > limits.p_hi.z)
            {
                out_of_box = true;
                report
                    .violations
                    .push(format!("drone {n}: position {p} leaves arena at tau={tau:.2}"));
            }
        }
        if out_of_box {
            report.pass = false;
        }
    }

    let v_limit = limits.v_max * (1.0 - FEASIBILITY_MARGIN);
    if report.max_speed > v_limit {
        report.violations.push(format!(
            "max speed {:.3} m/s exceeds limit {:.3} m/s (with margin)",
            report.max_speed, v_limit
        ));
        report.pass = false;
    }
    let f_hi = limits.f_hi * (1.0 - FEASIBILITY_MARGIN);
    let f_lo = limits.f_lo * (1.0 + FEASIBILITY_MARGIN);
    if report.max_thrust_demand > f_hi || report.min_thrust_demand < f_lo {
        report.violations.push(format!(
            "thrust demand [{:.2}, {:.2}] m/s^2 outside envelope [{:.2}, {:.2}] (with margin)",
            report.min_thrust_demand, report.max_thrust_demand, f_lo, f_hi
        ));
        report.pass = false;
    }
    report
}

// ---------------------------------------------------------------------------
// the twelve primitives

fn get(params: &BTreeMap<String, f64>, name: &str) -> f64 {
    params[name]
}

/// Complex amplitude helper: a term `Re(z e^{i w tau})` in x and
/// `Im(z e^{i w tau})` in y becomes `a sin + b cos` with a = (-Im z, Re z)
/// and b = (Re z, Im z).
fn xy_rotation_term(omega: f64, z_re: f64, z_im: f64) -> PeriodicTerm {
    PeriodicTerm {
        omega,
        a: Vec3::new(-z_im, z_re, 0.0),
        b: Vec3::new(z_re, z_im, 0.0),
    }
}

fn center_of(params: &BTreeMap<String, f64>, anchor: Vec3) -> Vec3 {
    Vec3::new(get(params, "center_x"), get(params, "center_y"), anchor.z)
}

fn rotate_terms(params: &BTreeMap<String, f64>, anchor: Vec3, duration: f64) -> GeneratorTerms {
    let center = center_of(params, anchor);
    let omega = get(params, "angular_displacement") / duration;
    let rho = anchor - center;
    GeneratorTerms {
        constant: center,
        periodic: vec![xy_rotation_term(omega, rho.x, rho.y)],
        polynomial: vec![],
    }
}

fn helix_terms(params: &BTreeMap<String, f64>, anchor: Vec3, duration: f64) -> GeneratorTerms {
    let mut terms = rotate_terms(params, anchor, duration);
    terms.polynomial.push((1, Vec3::new(0.0, 0.0, get(params, "climb") / duration)));
    terms
}

fn spiral_terms(params: &BTreeMap<String, f64>, anchor: Vec3, duration: f64) -> GeneratorTerms {
    let center = center_of(params, anchor);
    let omega = get(params, "angular_displacement") / duration;
    let growth = get(params, "radius_growth");
    let rho = anchor - center;
    // radius ramps as sin(pi tau / 2T): zero at entry, exactly `growth`
    // at the segment end, monotone in between
    let omega_s = std::f64::consts::FRAC_PI_2 / duration;
    // growth * sin(ws tau) e^{i(theta0 + w tau)}
    //   = (growth/2i) e^{i theta0} (e^{i(w+ws)tau} - e^{i(w-ws)tau})
    let unit = rho * (1.0 / rho.norm().max(1e-12));
    let half = 0.5 * growth;
    // -i/2 * e^{i theta0}: multiply (cos t0 + i sin t0) by -i/2
    let fast = (half * unit.y, -half * unit.x);
    let slow = (-half * unit.y, half * unit.x);
    GeneratorTerms {
        constant: center,
        periodic: vec![
            xy_rotation_term(omega, rho.x, rho.y),
            xy_rotation_term(omega + omega_s, fast.0, fast.1),
            xy_rotation_term(omega - omega_s, slow.0, slow.1),
        ],
        polynomial: vec![],
    }
}

/// Vertical sinusoid with a per-drone phase; the constant term compensates
/// the phase so every drone enters at its anchor.
fn phased_bounce(anchor: Vec3, amplitude: f64, omega: f64, phase: f64) -> GeneratorTerms {
    GeneratorTerms {
        constant: anchor + Vec3::new(0.0, 0.0, amplitude * phase.sin()),
        periodic: vec![PeriodicTerm {
            omega,
            a: Vec3::new(0.0, 0.0, amplitude * phase.cos()),
            b: Vec3::new(0.0, 0.0, -amplitude * phase.sin()),
        }],
        polynomial: vec![],
    }
}

fn wave_terms(params: &BTreeMap<String, f64>, anchor: Vec3, duration: f64) -> GeneratorTerms {
    let amplitude = get(params, "amplitude");
    let omega = 2.0 * std::f64::consts::PI * get(params, "cycles") / duration;
    let phase = 2.0 * std::f64::consts::PI * (anchor.x + anchor.y) / get(params, "wavelength");
    phased_bounce(anchor, amplitude, omega, phase)
}

fn cascade_terms(params: &BTreeMap<String, f64>, anchor: Vec3, duration: f64) -> GeneratorTerms {
    let amplitude = get(params, "height");
    let omega = 2.0 * std::f64::consts::PI * get(params, "cycles") / duration;
    let center = center_of(params, anchor);
    let radial = (anchor - center).norm();
    let phase = 2.0 * std::f64::consts::PI * radial / get(params, "wavelength");
    phased_bounce(anchor, amplitude, omega, phase)
}

fn hover_terms(_params: &BTreeMap<String, f64>, anchor: Vec3, _duration: f64) -> GeneratorTerms {
    GeneratorTerms::hover(anchor)
}

/// Smoothstep displacement reaching `delta` at the segment end with zero
/// entry/exit velocity: delta * (3 s^2 - 2 s^3), s = tau / T.
fn smoothstep_polynomial(delta: Vec3, duration: f64) -> Vec<(u32, Vec3)> {
    vec![
        (2, delta * (3.0 / (duration * duration))),
        (3, delta * (-2.0 / (duration * duration * duration))),
    ]
}

fn ascend_descend_terms(params: &BTreeMap<String, f64>, anchor: Vec3, duration: f64) -> GeneratorTerms {
    GeneratorTerms {
        constant: anchor,
        periodic: vec![],
        polynomial: smoothstep_polynomial(Vec3::new(0.0, 0.0, get(params, "delta_z")), duration),
    }
}

fn line_sweep_terms(params: &BTreeMap<String, f64>, anchor: Vec3, duration: f64) -> GeneratorTerms {
    let delta = Vec3::new(get(params, "sweep_x"), get(params, "sweep_y"), get(params, "sweep_z"));
    GeneratorTerms {
        constant: anchor,
        periodic: vec![],
        polynomial: smoothstep_polynomial(delta, duration),
    }
}

fn swap_halves_terms(params: &BTreeMap<String, f64>, anchor: Vec3, duration: f64) -> GeneratorTerms {
    let center = center_of(params, anchor);
    // point reflection through the center in the horizontal plane
    let delta = Vec3::new(2.0 * (center.x - anchor.x), 2.0 * (center.y - anchor.y), 0.0);
    GeneratorTerms {
        constant: anchor,
        periodic: vec![],
        polynomial: smoothstep_polynomial(delta, duration),
    }
}

fn expand_contract_terms(params: &BTreeMap<String, f64>, anchor: Vec3, duration: f64) -> GeneratorTerms {
    let center = center_of(params, anchor);
    let omega = 2.0 * std::f64::consts::PI * get(params, "cycles") / duration;
    let rho = anchor - center;
    let unit = rho * (1.0 / rho.norm().max(1e-12));
    let half = 0.5 * get(params, "expansion");
    // r(tau) = r0 + half (1 - cos(w tau)): breathes out to r0 + expansion
    GeneratorTerms {
        constant: center + rho + Vec3::new(unit.x * half, unit.y * half, 0.0),
        periodic: vec![PeriodicTerm {
            omega,
            a: Vec3::ZERO,
            b: Vec3::new(-unit.x * half, -unit.y * half, 0.0),
        }],
        polynomial: vec![],
    }
}

fn figure_eight_terms(params: &BTreeMap<String, f64>, anchor: Vec3, duration: f64) -> GeneratorTerms {
    let width = get(params, "width");
    let omega = 2.0 * std::f64::consts::PI * get(params, "loops") / duration;
    GeneratorTerms {
        constant: anchor,
        periodic: vec![
            PeriodicTerm { omega, a: Vec3::new(width, 0.0, 0.0), b: Vec3::ZERO },
            PeriodicTerm { omega: 2.0 * omega, a: Vec3::new(0.0, 0.5 * width, 0.0), b: Vec3::ZERO },
        ],
        polynomial: vec![],
    }
}

fn pulse_terms(params: &BTreeMap<String, f64>, anchor: Vec3, duration: f64) -> GeneratorTerms {
    let half = 0.5 * get(params, "height");
    let omega = 2.0 * std::f64::consts::PI * get(params, "pulses") / duration;
    GeneratorTerms {
        constant: anchor + Vec3::new(0.0, 0.0, half),
        periodic: vec![PeriodicTerm { omega, a: Vec3::ZERO, b: Vec3::new(0.0, 0.0, -half) }],
        polynomial: vec![],
    }
}

fn center_params() -> [ParamSpec; 2] {
    [
        ParamSpec {
            name: "center_x",
            unit: "m",
            min: -10.0,
            max: 10.0,
            default: 0.0,
            description: "x of the motion center; defaults to the segment layout center",
        },
        ParamSpec {
            name: "center_y",
            unit: "m",
            min: -10.0,
            max: 10.0,
            default: 0.0,
            description: "y of the motion center; defaults to the segment layout center",
        },
    ]
}

fn build_catalog() -> Vec<PrimitiveDefinition> {
    let angular = ParamSpec {
        name: "angular_displacement",
        unit: "rad",
        min: -32.0 * std::f64::consts::PI,
        max: 32.0 * std::f64::consts::PI,
        default: 2.0 * std::f64::consts::PI,
        description: "total rotation over the segment; positive is counter-clockwise",
    };
    let [cx, cy] = center_params();

    vec![
        PrimitiveDefinition {
            name: "hover",
            description: "hold the current layout anchors motionless",
            params: vec![],
            build: hover_terms,
        },
        PrimitiveDefinition {
            name: "rotate",
            description: "rigid rotation of the whole formation about a vertical axis",
            params: vec![angular.clone(), cx.clone(), cy.clone()],
            build: rotate_terms,
        },
        PrimitiveDefinition {
            name: "helix",
            description: "rotate while climbing (or descending) at constant rate",
            params: vec![
                angular.clone(),
                ParamSpec { name: "climb", unit: "m", min: -2.5, max: 2.5, default: 1.0, description: "total altitude change over the segment" },
                cx.clone(),
                cy.clone(),
            ],
            build: helix_terms,
        },
        PrimitiveDefinition {
            name: "spiral",
            description: "rotate about the z-axis while gradually expanding (or shrinking) the radius",
            params: vec![
                angular,
                ParamSpec { name: "radius_growth", unit: "m", min: -3.0, max: 3.0, default: 0.5, description: "radial change reached exactly at the segment end" },
                cx.clone(),
                cy.clone(),
            ],
            build: spiral_terms,
        },
        PrimitiveDefinition {
            name: "wave",
            description: "surface wave across the formation: vertical sinusoid with phase from the anchor position",
            params: vec![
                ParamSpec { name: "amplitude", unit: "m", min: 0.0, max: 1.5, default: 0.3, description: "peak vertical offset" },
                ParamSpec { name: "cycles", unit: "periods", min: 0.25, max: 8.0, default: 1.0, description: "temporal periods over the segment" },
                ParamSpec { name: "wavelength", unit: "m", min: 0.5, max: 20.0, default: 4.0, description: "spatial wavelength across the formation" },
            ],
            build: wave_terms,
        },
        PrimitiveDefinition {
            name: "ascend_descend",
            description: "smooth one-way altitude change for the whole formation",
            params: vec![ParamSpec { name: "delta_z", unit: "m", min: -2.5, max: 2.5, default: 1.0, description: "signed altitude change; negative descends" }],
            build: ascend_descend_terms,
        },
        PrimitiveDefinition {
            name: "expand_contract",
            description: "breathe the formation radially out and back about a center",
            params: vec![
                ParamSpec { name: "expansion", unit: "m", min: -2.0, max: 2.0, default: 0.5, description: "peak radial change; negative contracts" },
                ParamSpec { name: "cycles", unit: "periods", min: 0.5, max: 6.0, default: 1.0, description: "breathe cycles over the segment" },
                cx.clone(),
                cy.clone(),
            ],
            build: expand_contract_terms,
        },
        PrimitiveDefinition {
            name: "figure_eight",
            description: "each drone traces a horizontal figure-eight around its anchor",
            params: vec![
                ParamSpec { name: "width", unit: "m", min: 0.0, max: 2.0, default: 0.8, description: "half-width of the eight along x" },
                ParamSpec { name: "loops", unit: "periods", min: 0.5, max: 4.0, default: 1.0, description: "full figures per segment" },
            ],
            build: figure_eight_terms,
        },
        PrimitiveDefinition {
            name: "line_sweep",
            description: "translate the whole formation along a fixed displacement with smooth ends",
            params: vec![
                ParamSpec { name: "sweep_x", unit: "m", min: -6.0, max: 6.0, default: 2.0, description: "displacement along x" },
                ParamSpec { name: "sweep_y", unit: "m", min: -6.0, max: 6.0, default: 0.0, description: "displacement along y" },
                ParamSpec { name: "sweep_z", unit: "m", min: -2.0, max: 2.0, default: 0.0, description: "displacement along z" },
            ],
            build: line_sweep_terms,
        },
        PrimitiveDefinition {
            name: "cascade",
            description: "radial ripple: vertical bounce whose phase spreads outward from the center",
            params: vec![
                ParamSpec { name: "height", unit: "m", min: -1.5, max: 1.5, default: 0.4, description: "bounce amplitude" },
                ParamSpec { name: "cycles", unit: "periods", min: 0.5, max: 8.0, default: 2.0, description: "bounce cycles over the segment" },
                ParamSpec { name: "wavelength", unit: "m", min: 0.5, max: 20.0, default: 3.0, description: "radial wavelength of the ripple" },
                cx.clone(),
                cy.clone(),
            ],
            build: cascade_terms,
        },
        PrimitiveDefinition {
            name: "pulse",
            description: "uniform rhythmic bob: all drones rise and settle together",
            params: vec![
                ParamSpec { name: "height", unit: "m", min: -1.5, max: 1.5, default: 0.3, description: "peak vertical offset" },
                ParamSpec { name: "pulses", unit: "periods", min: 0.5, max: 8.0, default: 2.0, description: "bobs over the segment" },
            ],
            build: pulse_terms,
        },
        PrimitiveDefinition {
            name: "swap_halves",
            description: "every drone crosses to the point-reflected position through the center",
            params: vec![cx, cy],
            build: swap_halves_terms,
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(name: &str, params: &[(&str, f64)], t_start: f64, t_end: f64) -> PrimitiveSpec {
        PrimitiveSpec {
            name: name.to_string(),
            params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            t_start,
            t_end,
        }
    }

    #[test]
    fn catalog_has_twelve_documented_primitives() {
        let cat = list_primitives();
        assert_eq!(cat.len(), 12);
        for p in &cat {
            assert!(!p.description.is_empty());
            if p.name != "hover" {
                assert!(!p.params.is_empty(), "{} must name at least one tunable parameter", p.name);
            }
        }
        // the four named in the catalog's ancestry must be present
        for name in ["rotate", "helix", "spiral", "wave"] {
            assert!(cat.iter().any(|p| p.name == name));
        }
    }

    #[test]
    fn every_primitive_enters_at_its_anchor() {
        let limits = PhysicalLimits::default();
        let anchors = layout_circle(6, 1.5, Vec3::new(0.0, 0.0, 1.2), &limits).unwrap();
        for def in catalog() {
            let s = spec(def.name, &[], 0.0, 4.0);
            for &anchor in &anchors {
                let entry = eval_primitive(def, &s, anchor, 0.0).unwrap();
                assert!(
                    (entry - anchor).norm() < 1e-9,
                    "{}: entry pose {entry} != anchor {anchor}",
                    def.name
                );
            }
        }
    }

    #[test]
    fn rotate_half_turn_reaches_the_antipode() {
        let def = find("rotate").unwrap();
        let s = spec("rotate", &[("angular_displacement", 2.0 * std::f64::consts::PI)], 0.0, 4.0);
        let anchor = Vec3::new(1.0, 0.0, 1.0);
        let p = eval_primitive(def, &s, anchor, 2.0).unwrap();
        assert!((p - Vec3::new(-1.0, 0.0, 1.0)).norm() < 1e-9, "half rotation lands at {p}");
    }

    #[test]
    fn rotate_is_rigid() {
        let def = find("rotate").unwrap();
        let limits = PhysicalLimits::default();
        let anchors = layout_circle(5, 2.0, Vec3::new(0.0, 0.0, 1.0), &limits).unwrap();
        let s = spec("rotate", &[("angular_displacement", 3.7)], 0.0, 5.0);
        for step in 0..=20 {
            let t = 5.0 * step as f64 / 20.0;
            let positions: Vec<Vec3> =
                anchors.iter().map(|&a| eval_primitive(def, &s, a, t).unwrap()).collect();
            for i in 0..anchors.len() {
                for j in i + 1..anchors.len() {
                    let before = anchors[i].distance(anchors[j]);
                    let after = positions[i].distance(positions[j]);
                    assert!(
                        (before - after).abs() < 1e-9,
                        "pairwise distance changed under rigid rotation at t={t}"
                    );
                }
            }
        }
    }

    #[test]
    fn spiral_radius_grows_exactly_as_requested() {
        let def = find("spiral").unwrap();
        let s = spec(
            "spiral",
            &[("angular_displacement", 4.0 * std::f64::consts::PI), ("radius_growth", 0.5)],
            0.0,
            6.0,
        );
        let anchor = Vec3::new(1.2, 0.0, 1.0);
        let start = eval_primitive(def, &s, anchor, 0.0).unwrap();
        let end = eval_primitive(def, &s, anchor, 6.0).unwrap();
        let r0 = Vec3::new(start.x, start.y, 0.0).norm();
        let r1 = Vec3::new(end.x, end.y, 0.0).norm();
        assert!((r0 - 1.2).abs() < 1e-9);
        assert!((r1 - 1.7).abs() < 1e-9, "final radius {r1}");
        // monotone growth along the way
        let mut prev = r0;
        for i in 1..=60 {
            let p = eval_primitive(def, &s, anchor, 6.0 * i as f64 / 60.0).unwrap();
            let r = Vec3::new(p.x, p.y, 0.0).norm();
            assert!(r >= prev - 1e-9, "radius shrank at sample {i}");
            prev = r;
        }
    }

    #[test]
    fn wave_entry_is_the_grid_anchor_and_bounded() {
        let def = find("wave").unwrap();
        let limits = PhysicalLimits::default();
        let anchors = layout_grid(3, 3, 1.0, Vec3::new(0.0, 0.0, 1.0), &limits).unwrap();
        let s = spec("wave", &[("amplitude", 0.2)], 0.0, 4.0);
        for &a in &anchors {
            let entry = eval_primitive(def, &s, a, 0.0).unwrap();
            assert!((entry - a).norm() < 1e-12);
            for i in 0..=40 {
                let p = eval_primitive(def, &s, a, 4.0 * i as f64 / 40.0).unwrap();
                assert!((p.z - a.z).abs() <= 0.4 + 1e-9);
                assert!((p.x - a.x).abs() < 1e-12 && (p.y - a.y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zeroed_amplitudes_reduce_to_hover() {
        for def in catalog() {
            let s = spec(def.name, &[], 0.0, 4.0);
            let anchor = Vec3::new(0.8, -0.6, 1.1);
            let terms = def.terms(&s, anchor).unwrap();
            let hover = terms.zero_amplitudes();
            for i in 0..=16 {
                let tau = 4.0 * i as f64 / 16.0;
                assert_eq!(hover.eval(tau), terms.constant, "{} with zero amplitudes", def.name);
            }
        }
    }

    #[test]
    fn single_frequency_generators_are_periodic() {
        for name in ["rotate", "pulse", "expand_contract", "wave", "cascade"] {
            let def = find(name).unwrap();
            let s = spec(name, &[], 0.0, 8.0);
            let terms = def.terms(&s, Vec3::new(1.0, 0.4, 1.0)).unwrap();
            assert!(terms.polynomial.is_empty(), "{name} should be purely periodic");
            let omega = terms.periodic[0].omega.abs();
            assert!(omega > 0.0);
            let period = 2.0 * std::f64::consts::PI / omega;
            for i in 0..10 {
                let tau = 0.13 * i as f64;
                let a = terms.eval(tau);
                let b = terms.eval(tau + period);
                assert!((a - b).norm() < 1e-9, "{name} not periodic: {a} vs {b}");
            }
        }
    }

    #[test]
    fn generators_are_c1() {
        // finite differences must converge to the analytic derivative at
        // second order
        for def in catalog() {
            let s = spec(def.name, &[], 0.0, 4.0);
            let terms = def.terms(&s, Vec3::new(1.0, -0.5, 1.3)).unwrap();
            for i in 1..8 {
                let tau = 0.5 * i as f64 - 0.1;
                let exact = terms.eval_derivative(tau);
                let err = |h: f64| {
                    let fd = (terms.eval(tau + h) - terms.eval(tau - h)) * (1.0 / (2.0 * h));
                    (fd - exact).norm()
                };
                let e1 = err(1e-3);
                let e2 = err(5e-4);
                if e1 > 1e-10 {
                    let order = (e1 / e2).log2();
                    assert!(order > 1.7, "{}: fd convergence order {order} at tau={tau}", def.name);
                }
            }
        }
    }

    #[test]
    fn circle_layout_is_symmetric() {
        let limits = PhysicalLimits::default();
        let anchors = layout_circle(4, 1.0, Vec3::new(0.0, 0.0, 1.0), &limits).unwrap();
        let expected = [
            Vec3::new(1.0, 0.0, 1.0),
            Vec3::new(0.0, 1.0, 1.0),
            Vec3::new(-1.0, 0.0, 1.0),
            Vec3::new(0.0, -1.0, 1.0),
        ];
        for (a, e) in anchors.iter().zip(expected.iter()) {
            assert!((*a - *e).norm() < 1e-12);
        }
    }

    #[test]
    fn grid_layout_unit_square() {
        let limits = PhysicalLimits::default();
        let anchors = layout_grid(2, 2, 1.0, Vec3::new(0.0, 0.0, 1.0), &limits).unwrap();
        assert_eq!(anchors.len(), 4);
        for a in &anchors {
            assert!((a.x.abs() - 0.5).abs() < 1e-12);
            assert!((a.y.abs() - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn dense_circle_is_rejected() {
        let limits = PhysicalLimits::default(); // xy radius 0.25 -> need 0.5 m
        // spacing bound 2 * 0.1 * sin(60 deg) = 0.173 < 0.5
        match layout_circle(3, 0.1, Vec3::new(0.0, 0.0, 1.0), &limits) {
            Err(LayoutError::TooSparse { min_spacing, required }) => {
                assert!((min_spacing - 0.173).abs() < 1e-3);
                assert!((required - 0.5).abs() < 1e-12);
            }
            other => panic!("expected rejection, got {other:?}"),
        }
    }

    #[test]
    fn hover_is_trivially_feasible() {
        let def = find("hover").unwrap();
        let limits = PhysicalLimits::default();
        let anchors = layout_grid(2, 2, 1.0, Vec3::new(0.0, 0.0, 1.0), &limits).unwrap();
        let report = check_feasibility(def, &spec("hover", &[], 0.0, 4.0), &anchors, &limits);
        assert!(report.pass, "{:?}", report.violations);
        assert!(report.max_speed < 1e-6);
    }

    #[test]
    fn overdriven_rotate_fails_on_speed() {
        let def = find("rotate").unwrap();
        let limits = PhysicalLimits::default();
        let anchors = vec![Vec3::new(1.0, 0.0, 1.0)];
        // omega = 10 pi rad/s at radius 1 -> top speed 10 pi >> 2 m/s
        let s = spec("rotate", &[("angular_displacement", 20.0 * std::f64::consts::PI)], 0.0, 2.0);
        let report = check_feasibility(def, &s, &anchors, &limits);
        assert!(!report.pass);
        let expected = 10.0 * std::f64::consts::PI;
        assert!(
            (report.max_speed - expected).abs() / expected < 0.01,
            "sampled top speed {} should approach {expected}",
            report.max_speed
        );
    }

    #[test]
    fn gentle_wave_passes_with_predicted_speed() {
        let def = find("wave").unwrap();
        let limits = PhysicalLimits::default();
        let anchors = layout_grid(2, 2, 1.0, Vec3::new(0.0, 0.0, 1.0), &limits).unwrap();
        let s = spec("wave", &[("amplitude", 0.2), ("cycles", 1.0)], 0.0, 4.0);
        let report = check_feasibility(def, &s, &anchors, &limits);
        assert!(report.pass, "{:?}", report.violations);
        // v_max = A * omega = 0.2 * (pi / 2)
        let expected = 0.2 * std::f64::consts::FRAC_PI_2;
        assert!((report.max_speed - expected).abs() < 0.02, "max speed {}", report.max_speed);
    }

    #[test]
    fn unknown_parameters_are_rejected() {
        let def = find("rotate").unwrap();
        let s = spec("rotate", &[("warp_factor", 9.0)], 0.0, 2.0);
        assert!(matches!(
            def.terms(&s, Vec3::new(1.0, 0.0, 1.0)),
            Err(PrimitiveError::UnknownParameter { .. })
        ));
    }

    #[test]
    fn out_of_range_parameters_are_rejected() {
        let def = find("wave").unwrap();
        let s = spec("wave", &[("amplitude", 99.0)], 0.0, 2.0);
        assert!(matches!(
            def.terms(&s, Vec3::ZERO),
            Err(PrimitiveError::ParameterOutOfRange { .. })
        ));
    }
}
