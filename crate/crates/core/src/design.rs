//! Attachment design math: push-lip sizing, the power-law slope cam, the
//! quasi-static moment balance at the wall contact, the exponent sweep and
//! the ramp-radius comparison.
//!
//! Frames: every length is in millimetres, masses in grams, forces in
//! newtons. The side-view body frame has its origin at the pivot `O` (rear
//! bottom edge of the transitioning robot), `+X` toward the wall and `+Z`
//! up. Rotating the robot nose-up by `theta` maps a body point `(X, Z)` to
//! world `(X cos θ - Z sin θ, X sin θ + Z cos θ)`.

use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::DesignError;

/// Standard gravity, m/s².
pub const GRAVITY: f64 = 9.80665;

/// Geometry and mass of the robot body.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RobotDims {
    /// Body height including the attachment shell.
    pub h_robot: f64,
    /// Lateral width.
    pub w_robot: f64,
    /// Depth along the travel direction.
    pub d_robot: f64,
    pub mass_g: f64,
    /// Clearance of the body bottom above the wheel contact.
    pub h_wheel: f64,
    /// Centre of gravity relative to the geometric body centre, `(X, Z)`.
    #[serde(default)]
    pub cg_offset: [f64; 2],
}

impl Default for RobotDims {
    fn default() -> Self {
        Self {
            h_robot: 25.8,
            w_robot: 40.0,
            d_robot: 32.0,
            mass_g: 92.0,
            h_wheel: 0.8,
            cg_offset: [0.0, 0.0],
        }
    }
}

impl RobotDims {
    pub fn validate(&self) -> Result<(), DesignError> {
        for (name, v) in [
            ("h_robot", self.h_robot),
            ("w_robot", self.w_robot),
            ("d_robot", self.d_robot),
            ("h_wheel", self.h_wheel),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(DesignError::Domain(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(self.mass_g >= 0.0) {
            return Err(DesignError::Domain(format!("mass must be >= 0, got {}", self.mass_g)));
        }
        if self.h_wheel >= self.h_robot {
            return Err(DesignError::Domain(format!(
                "h_wheel ({}) must be below h_robot ({})",
                self.h_wheel, self.h_robot
            )));
        }
        Ok(())
    }

    /// Centre of gravity in the body frame.
    pub fn cg(&self) -> [f64; 2] {
        [
            self.d_robot / 2.0 + self.cg_offset[0],
            self.h_robot / 2.0 + self.cg_offset[1],
        ]
    }

    /// Returns a copy with every length multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            h_robot: self.h_robot * k,
            w_robot: self.w_robot * k,
            d_robot: self.d_robot * k,
            mass_g: self.mass_g,
            h_wheel: self.h_wheel * k,
            cg_offset: [self.cg_offset[0] * k, self.cg_offset[1] * k],
        }
    }
}

/// Shape of the push lip and the slope cam.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[serde(default)]
pub struct AttachmentParams {
    pub h_push: f64,
    pub w_push: f64,
    pub w_slope: f64,
    pub h_slope: f64,
    /// Exponent of the slope curve, `>= 1`.
    pub n: f64,
    /// Width of the slope across the travel direction.
    pub lateral_width: f64,
    pub shell_thickness: f64,
    /// Horizontal distance from the pivot to the curve origin. `None` means
    /// `d_robot + w_push`.
    #[serde(default)]
    pub pivot_offset: Option<f64>,
}

impl Default for AttachmentParams {
    fn default() -> Self {
        Self {
            h_push: 5.0,
            w_push: 15.0,
            w_slope: 25.8,
            h_slope: 48.6,
            n: 1.3,
            lateral_width: 62.0,
            shell_thickness: 1.5,
            pivot_offset: None,
        }
    }
}

impl AttachmentParams {
    pub fn with_exponent(mut self, n: f64) -> Self {
        self.n = n;
        self
    }

    pub fn validate(&self) -> Result<(), DesignError> {
        if !(self.n >= 1.0) || !self.n.is_finite() {
            return Err(DesignError::Domain(format!("exponent n must be >= 1.0, got {}", self.n)));
        }
        if !(self.w_slope > 0.0) {
            return Err(DesignError::Domain(format!("w_slope must be > 0, got {}", self.w_slope)));
        }
        if !(self.h_push > 0.0) || !(self.w_push > 0.0) {
            return Err(DesignError::Domain("push lip dimensions must be > 0".into()));
        }
        if !(self.h_slope > self.h_push) {
            return Err(DesignError::Domain(format!(
                "h_slope ({}) must exceed h_push ({})",
                self.h_slope, self.h_push
            )));
        }
        Ok(())
    }

    /// Checks the invariants that tie the attachment to a particular body.
    pub fn validate_for(&self, dims: &RobotDims) -> Result<(), DesignError> {
        self.validate()?;
        dims.validate()?;
        if !(self.lateral_width > dims.w_robot) {
            return Err(DesignError::Domain(format!(
                "lateral_width ({}) must exceed the robot width ({})",
                self.lateral_width, dims.w_robot
            )));
        }
        Ok(())
    }

    /// Horizontal distance from the pivot to the curve origin.
    pub fn cam_origin(&self, dims: &RobotDims) -> f64 {
        self.pivot_offset.unwrap_or(dims.d_robot + self.w_push)
    }

    /// Returns a copy with every length multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            h_push: self.h_push * k,
            w_push: self.w_push * k,
            w_slope: self.w_slope * k,
            h_slope: self.h_slope * k,
            n: self.n,
            lateral_width: self.lateral_width * k,
            shell_thickness: self.shell_thickness * k,
            pivot_offset: self.pivot_offset.map(|p| p * k),
        }
    }

    /// Slope of the cam curve at `x` (no domain check).
    fn slope_derivative(&self, x: f64) -> f64 {
        let ratio = self.h_slope / self.w_slope;
        if self.n == 1.0 {
            ratio
        } else if x <= 0.0 {
            0.0
        } else {
            self.n * ratio * (x / self.w_slope).powf(self.n - 1.0)
        }
    }

    /// Tangent-angle jump where the flat push lip meets the slope, radians.
    /// Non-zero only for the linear cam.
    pub fn boundary_kink(&self) -> f64 {
        self.slope_derivative(0.0).atan()
    }
}

/// A sampled slope curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeProfile {
    pub params: AttachmentParams,
    /// `(x, y)` pairs in mm.
    pub samples: Vec<[f64; 2]>,
    /// Number of intervals; `samples.len() == count + 1`.
    pub count: usize,
}

/// Geometry of a single wall-contact configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactState {
    /// Curve parameter of the wall contact.
    pub x: f64,
    /// Robot rotation.
    pub theta: f64,
    /// Pivot to contact distance.
    pub os: f64,
    /// Angle of the pivot-contact segment against the robot bottom.
    pub theta_s: f64,
    /// Pivot to centre-of-gravity distance.
    pub og: f64,
    /// Angle of the pivot-CG segment against the robot bottom.
    pub theta_g: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForceSample {
    pub x: f64,
    pub theta: f64,
    pub force: f64,
}

/// Required push force at every contact sample of one cam.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForceProfile {
    pub n: f64,
    pub entries: Vec<ForceSample>,
    pub max_force: f64,
    pub argmax_x: f64,
    /// Samples dropped as singular.
    pub skipped: usize,
    /// Samples whose raw moment balance was negative and clamped to zero.
    pub clamped: usize,
}

/// Result of the exponent sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentSweep {
    pub best_n: f64,
    pub best: ForceProfile,
    /// `(n, max_force)` for every grid point.
    pub grid: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RampSpec {
    pub w_robot: f64,
    pub h_wheel: f64,
    pub radius: f64,
}

impl RampSpec {
    pub fn new(w_robot: f64, h_wheel: f64) -> Result<Self, DesignError> {
        Ok(Self { w_robot, h_wheel, radius: ramp_arc_radius(w_robot, h_wheel)? })
    }
}

/// Lateral clearance the push lip needs at tilt `theta` so the tilting
/// robot's top edge stays clear of the helper's slope.
pub fn required_push_width(theta: f64, h_robot: f64, h_push: f64) -> Result<f64, DesignError> {
    if !(0.0..FRAC_PI_2).contains(&theta) {
        return Err(DesignError::Domain(format!("theta must be in [0, pi/2), got {theta}")));
    }
    if !(h_push > 0.0 && h_robot > h_push) {
        return Err(DesignError::Domain(format!(
            "need h_robot > h_push > 0, got h_robot={h_robot} h_push={h_push}"
        )));
    }
    Ok(h_robot * theta.sin() - h_push * theta.tan())
}

/// Tilt at which [`required_push_width`] peaks.
pub fn critical_tilt_angle(h_push: f64, h_robot: f64) -> Result<f64, DesignError> {
    if !(h_push > 0.0 && h_push <= h_robot) {
        return Err(DesignError::Domain(format!(
            "need 0 < h_push <= h_robot, got h_push={h_push} h_robot={h_robot}"
        )));
    }
    Ok((h_push / h_robot).cbrt().acos())
}

/// Smallest lip width that clears the tilting robot for every tilt.
pub fn min_push_width(h_push: f64, h_robot: f64) -> Result<f64, DesignError> {
    if !(h_push > 0.0 && h_push < h_robot) {
        return Err(DesignError::Domain(format!(
            "need 0 < h_push < h_robot, got h_push={h_push} h_robot={h_robot}"
        )));
    }
    required_push_width(critical_tilt_angle(h_push, h_robot)?, h_robot, h_push)
}

/// Height of the slope curve at `x`.
pub fn slope_height(x: f64, params: &AttachmentParams) -> Result<f64, DesignError> {
    if !(0.0..=params.w_slope).contains(&x) {
        return Err(DesignError::Domain(format!(
            "x must lie in [0, {}], got {x}",
            params.w_slope
        )));
    }
    if x == params.w_slope {
        return Ok(params.h_slope);
    }
    Ok(params.h_slope * (x / params.w_slope).powf(params.n))
}

/// Samples the slope curve on `count` equal intervals (`count + 1` points).
pub fn sample_profile(params: &AttachmentParams, count: usize) -> Result<SlopeProfile, DesignError> {
    if count < 2 {
        return Err(DesignError::Argument(format!("sample count must be >= 2, got {count}")));
    }
    params.validate()?;
    let dx = params.w_slope / count as f64;
    let samples = (0..=count)
        .map(|i| {
            let x = if i == count { params.w_slope } else { i as f64 * dx };
            Ok([x, slope_height(x, params)?])
        })
        .collect::<Result<Vec<_>, DesignError>>()?;
    Ok(SlopeProfile { params: *params, samples, count })
}

/// Body rotation at which curve point `x` is the wall contact: the rotated
/// curve tangent is vertical there.
pub fn contact_rotation_angle(x: f64, params: &AttachmentParams) -> Result<f64, DesignError> {
    if x < 0.0 || x > params.w_slope || !x.is_finite() {
        return Err(DesignError::Domain(format!(
            "contact x must lie in [0, {}], got {x}",
            params.w_slope
        )));
    }
    if params.n < 1.0 {
        return Err(DesignError::Domain(format!("exponent n must be >= 1.0, got {}", params.n)));
    }
    Ok(FRAC_PI_2 - params.slope_derivative(x).atan())
}

/// Builds the contact state for body-frame contact point `s` at rotation
/// `theta`.
pub fn contact_from_points(x: f64, theta: f64, s: [f64; 2], g: [f64; 2]) -> ContactState {
    ContactState {
        x,
        theta,
        os: s[0].hypot(s[1]),
        theta_s: s[1].atan2(s[0]),
        og: g[0].hypot(g[1]),
        theta_g: g[1].atan2(g[0]),
    }
}

/// Contact state for curve point `x` under the tangency model.
pub fn contact_state(
    x: f64,
    params: &AttachmentParams,
    dims: &RobotDims,
) -> Result<ContactState, DesignError> {
    let theta = contact_rotation_angle(x, params)?;
    let s = [params.cam_origin(dims) + x, slope_height(x, params)?];
    Ok(contact_from_points(x, theta, s, dims.cg()))
}

/// Signed moment balance: positive when the wall reaction must resist
/// gravity, negative when gravity already carries the rotation.
pub fn moment_balance_force(contact: &ContactState, mass_g: f64) -> Result<f64, DesignError> {
    let lever_s = contact.os * (contact.theta + contact.theta_s).sin();
    if !(lever_s > 0.0) {
        return Err(DesignError::Singular(format!(
            "wall contact at or below the pivot (theta={}, theta_s={})",
            contact.theta, contact.theta_s
        )));
    }
    let weight = mass_g / 1000.0 * GRAVITY;
    Ok(weight * contact.og * (contact.theta + contact.theta_g).cos() / lever_s)
}

/// Push force needed to hold the robot at `contact`, clamped at zero.
pub fn required_force_at(contact: &ContactState, mass_g: f64) -> Result<f64, DesignError> {
    Ok(moment_balance_force(contact, mass_g)?.max(0.0))
}

/// Evaluates the moment balance at every profile sample.
pub fn max_required_force(
    params: &AttachmentParams,
    dims: &RobotDims,
    count: usize,
) -> Result<ForceProfile, DesignError> {
    dims.validate()?;
    let profile = sample_profile(params, count)?;
    let mut entries = Vec::with_capacity(profile.samples.len());
    let (mut skipped, mut clamped) = (0, 0);
    for &[x, _] in &profile.samples {
        let contact = contact_state(x, params, dims)?;
        match moment_balance_force(&contact, dims.mass_g) {
            Ok(raw) => {
                if raw < 0.0 {
                    clamped += 1;
                }
                entries.push(ForceSample { x, theta: contact.theta, force: raw.max(0.0) });
            }
            Err(DesignError::Singular(_)) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    let (max_force, argmax_x) = entries
        .iter()
        .fold((f64::NEG_INFINITY, f64::NAN), |(m, ax), e| {
            if e.force > m {
                (e.force, e.x)
            } else {
                (m, ax)
            }
        });
    if entries.is_empty() {
        return Err(DesignError::Evaluation(format!(
            "every sample of the n={} cam is singular",
            params.n
        )));
    }
    Ok(ForceProfile { n: params.n, entries, max_force, argmax_x, skipped, clamped })
}

/// Grid points `lo, lo + step, ..., <= hi`.
pub fn exponent_grid(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>, DesignError> {
    if !(lo >= 1.0) {
        return Err(DesignError::Argument(format!("n_lo must be >= 1.0, got {lo}")));
    }
    if !(step > 0.0) || !step.is_finite() {
        return Err(DesignError::Argument(format!("step must be > 0, got {step}")));
    }
    if hi < lo {
        return Err(DesignError::Argument(format!("empty exponent range [{lo}, {hi}]")));
    }
    let k_max = ((hi - lo) / step + 1e-9).floor() as usize;
    // rounding to 1e-12 keeps 1.0 + 3 * 0.1 printable as 1.3
    Ok((0..=k_max)
        .map(|k| ((lo + k as f64 * step) * 1e12).round() / 1e12)
        .collect())
}

/// Grid search for the exponent minimising the peak required force. Ties go
/// to the smaller exponent.
pub fn optimize_exponent(
    range: (f64, f64),
    step: f64,
    params: &AttachmentParams,
    dims: &RobotDims,
    count: usize,
) -> Result<ExponentSweep, DesignError> {
    let grid = exponent_grid(range.0, range.1, step)?;
    let mut best: Option<ForceProfile> = None;
    let mut table = Vec::with_capacity(grid.len());
    for n in grid {
        let profile = max_required_force(&params.with_exponent(n), dims, count)?;
        table.push((n, profile.max_force));
        if best.as_ref().map_or(true, |b| profile.max_force < b.max_force) {
            best = Some(profile);
        }
    }
    let best = best.ok_or_else(|| DesignError::Argument("empty exponent grid".into()))?;
    Ok(ExponentSweep { best_n: best.n, best, grid: table })
}

/// Arc radius a ramp crest needs so a body of width `w_robot` with wheel
/// clearance `h_wheel` never bottoms out.
pub fn ramp_arc_radius(w_robot: f64, h_wheel: f64) -> Result<f64, DesignError> {
    if !(w_robot > 0.0) || !(h_wheel > 0.0) {
        return Err(DesignError::Argument(format!(
            "w_robot and h_wheel must be > 0, got {w_robot}, {h_wheel}"
        )));
    }
    Ok(w_robot * w_robot / (8.0 * h_wheel))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Csv,
    Svg,
}

fn fmt_num(v: f64) -> String {
    // 17 significant digits round-trip every f64
    format!("{v:.16e}")
}

/// Serializes a profile for fabrication.
pub fn export_profile(profile: &SlopeProfile, format: ExportFormat) -> Vec<u8> {
    match format {
        ExportFormat::Csv => profile_csv(profile).into_bytes(),
        ExportFormat::Svg => profile_svg(profile).into_bytes(),
    }
}

fn profile_csv(profile: &SlopeProfile) -> String {
    let mut out = String::from("x_mm,y_mm\n");
    for [x, y] in &profile.samples {
        let _ = writeln!(out, "{},{}", fmt_num(*x), fmt_num(*y));
    }
    out
}

fn profile_svg(profile: &SlopeProfile) -> String {
    let p = &profile.params;
    let width = p.w_push + p.w_slope;
    let height = p.h_slope;
    let mut points = String::new();
    for (i, [x, y]) in profile.samples.iter().enumerate() {
        if i > 0 {
            points.push(' ');
        }
        let _ = write!(points, "{:.6},{:.6}", p.w_push + x, height - y);
    }
    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.6}mm" height="{height:.6}mm" viewBox="0 0 {width:.6} {height:.6}">"#
    );
    let _ = writeln!(
        out,
        r#"  <rect id="push" x="0" y="{:.6}" width="{:.6}" height="{:.6}" fill="none" stroke="black" stroke-width="0.2"/>"#,
        height - p.h_push,
        p.w_push,
        p.h_push
    );
    let _ = writeln!(
        out,
        r#"  <polyline id="slope" points="{points}" fill="none" stroke="black" stroke-width="0.2"/>"#
    );
    out.push_str("</svg>\n");
    out
}

/// Force table as CSV, `n,x_mm,theta_rad,force_N`.
pub fn force_csv<'a>(profiles: impl IntoIterator<Item = &'a ForceProfile>) -> String {
    let mut out = String::from("n,x_mm,theta_rad,force_N\n");
    for profile in profiles {
        for e in &profile.entries {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                profile.n,
                fmt_num(e.x),
                fmt_num(e.theta),
                fmt_num(e.force)
            );
        }
    }
    out
}

/// Parses the `x_mm,y_mm` CSV back into points.
pub fn parse_profile_csv(text: &str) -> Result<Vec<[f64; 2]>, DesignError> {
    let mut lines = text.lines();
    match lines.next() {
        Some("x_mm,y_mm") => {}
        other => {
            return Err(DesignError::Argument(format!("unexpected CSV header {other:?}")));
        }
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|line| {
            let (x, y) = line
                .split_once(',')
                .ok_or_else(|| DesignError::Argument(format!("malformed row {line:?}")))?;
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| DesignError::Argument(format!("bad number {s:?}: {e}")))
            };
            Ok([parse(x)?, parse(y)?])
        })
        .collect()
}

/// Peak required force along the full rotation, including the corner phase
/// before the tangency model applies. Used by the transition model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CamTrack {
    /// Rotation angles, ascending from 0 to π/2.
    pub theta: Vec<f64>,
    /// Horizontal pivot travel toward the wall needed to reach each angle.
    pub travel: Vec<f64>,
    /// Required push force at each angle (clamped at zero).
    pub force: Vec<f64>,
    /// Curve parameter of the wall contact at each angle.
    pub contact_x: Vec<f64>,
    /// Tangent-angle jump at the lip/slope boundary.
    pub kink: f64,
}

impl CamTrack {
    /// Walks the rotation from 0 to π/2 in `steps` increments. The wall
    /// contact at each angle is the supporting point of the cam outline
    /// (sampled with `count` intervals) in the wall direction.
    pub fn build(
        params: &AttachmentParams,
        dims: &RobotDims,
        count: usize,
        steps: usize,
    ) -> Result<Self, DesignError> {
        params.validate_for(dims)?;
        let origin = params.cam_origin(dims);
        let samples = sample_profile(params, count)?.samples;
        let outline: Vec<[f64; 2]> = samples.iter().map(|[x, y]| [origin + x, *y]).collect();
        let g = dims.cg();
        let weight = dims.mass_g / 1000.0 * GRAVITY;
        let mut theta = Vec::with_capacity(steps + 1);
        let mut support = Vec::with_capacity(steps + 1);
        let mut force = Vec::with_capacity(steps + 1);
        let mut contact_x = Vec::with_capacity(steps + 1);
        for i in 0..=steps {
            let t = FRAC_PI_2 * i as f64 / steps as f64;
            let (sin, cos) = t.sin_cos();
            let (mut best_i, mut best_h) = (0, f64::NEG_INFINITY);
            for (j, p) in outline.iter().enumerate() {
                let h = p[0] * cos - p[1] * sin;
                if h > best_h + 1e-12 {
                    best_h = h;
                    best_i = j;
                }
            }
            let best = outline[best_i];
            contact_x.push(samples[best_i][0]);
            let lever_s = best[0] * sin + best[1] * cos;
            let lever_g = g[0] * cos - g[1] * sin;
            let f = if lever_s > 0.0 { (weight * lever_g / lever_s).max(0.0) } else { 0.0 };
            theta.push(t);
            support.push(best_h);
            force.push(f);
        }
        let start = support[0];
        let travel = support.iter().map(|h| start - h).collect();
        Ok(Self { theta, travel, force, contact_x, kink: params.boundary_kink() })
    }

    pub fn total_travel(&self) -> f64 {
        *self.travel.last().unwrap_or(&0.0)
    }

    pub fn peak_force(&self) -> f64 {
        self.force.iter().copied().fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
        let r = (5f64.sqrt() - 1.0) / 2.0;
        let mut c = b - r * (b - a);
        let mut d = a + r * (b - a);
        while (b - a).abs() > tol {
            if f(c) > f(d) {
                b = d;
            } else {
                a = c;
            }
            c = b - r * (b - a);
            d = a + r * (b - a);
        }
        (a + b) / 2.0
    }

    #[test]
    fn push_width_at_zero_tilt_is_zero() {
        assert_eq!(required_push_width(0.0, 25.8, 5.0).unwrap(), 0.0);
    }

    #[test]
    fn push_width_goes_negative_when_lip_is_tall() {
        // h_push == h_robot is outside the strict precondition; check the
        // formula directly just below it.
        let w = required_push_width(PI / 3.0, 25.8, 25.79).unwrap();
        assert!(w < 0.0);
        let raw = 25.8 * ((PI / 3.0).sin() - (PI / 3.0).tan());
        assert!(raw < 0.0);
    }

    #[test]
    fn push_width_rejects_right_angle() {
        assert!(matches!(
            required_push_width(FRAC_PI_2, 25.8, 5.0),
            Err(DesignError::Domain(_))
        ));
    }

    #[test]
    fn critical_angle_examples() {
        assert_eq!(critical_tilt_angle(25.8, 25.8).unwrap(), 0.0);
        for h in [0.5, 3.0, 11.0] {
            let a = critical_tilt_angle(h, 8.0 * h).unwrap();
            assert!((a - PI / 3.0).abs() < 1e-12);
        }
        let oracle = golden_max(
            |t| 25.8 * t.sin() - 5.0 * t.tan(),
            0.0,
            FRAC_PI_2 - 1e-9,
            1e-9,
        );
        let a = critical_tilt_angle(5.0, 25.8).unwrap();
        assert!((a - oracle).abs() < 1e-6, "{a} vs {oracle}");
        assert!((a.to_degrees() - 54.64).abs() < 0.01);
        assert!(critical_tilt_angle(26.0, 25.8).is_err());
    }

    #[test]
    fn min_push_width_matches_grid_and_not_fifteen() {
        let n = 1_000_000;
        let grid = (0..n)
            .map(|i| {
                let t = FRAC_PI_2 * i as f64 / n as f64;
                25.8 * t.sin() - 5.0 * t.tan()
            })
            .fold(f64::NEG_INFINITY, f64::max);
        let w = min_push_width(5.0, 25.8).unwrap();
        assert!((w - grid).abs() < 1e-6, "{w} vs {grid}");
        assert!((w - 13.99).abs() < 0.01);
        assert!(min_push_width(25.8 - 1e-9, 25.8).unwrap().abs() < 1e-4);
    }

    #[test]
    fn slope_examples() {
        let p = AttachmentParams::default();
        assert_eq!(slope_height(0.0, &p).unwrap(), 0.0);
        assert_eq!(slope_height(25.8, &p).unwrap(), 48.6);
        let lin = p.with_exponent(1.0);
        assert!((slope_height(12.9, &lin).unwrap() - 24.3).abs() < 1e-12);
        assert!(slope_height(-0.1, &p).is_err());
        assert!(slope_height(25.81, &p).is_err());
    }

    #[test]
    fn sample_profile_shapes() {
        let p = AttachmentParams::default();
        let prof = sample_profile(&p, 1000).unwrap();
        assert_eq!(prof.samples.len(), 1001);
        assert_eq!(prof.samples[0], [0.0, 0.0]);
        assert_eq!(prof.samples[1000], [25.8, 48.6]);
        let lin = sample_profile(&p.with_exponent(1.0), 2).unwrap();
        assert_eq!(lin.samples[0], [0.0, 0.0]);
        assert!((lin.samples[1][0] - 12.9).abs() < 1e-12);
        assert!((lin.samples[1][1] - 24.3).abs() < 1e-12);
        assert_eq!(lin.samples[2], [25.8, 48.6]);
        assert!(matches!(sample_profile(&p, 1), Err(DesignError::Argument(_))));
    }

    #[test]
    fn rotation_angle_linear_and_limits() {
        let p = AttachmentParams { w_slope: 10.0, h_slope: 20.0, n: 1.0, ..Default::default() };
        let expect = FRAC_PI_2 - 2f64.atan();
        for x in [0.0, 1.0, 5.0, 10.0] {
            assert!((contact_rotation_angle(x, &p).unwrap() - expect).abs() < 1e-15);
        }
        let q = AttachmentParams { n: 2.0, ..Default::default() };
        assert_eq!(contact_rotation_angle(0.0, &q).unwrap(), FRAC_PI_2);
        assert!(FRAC_PI_2 - contact_rotation_angle(1e-9, &q).unwrap() < 1e-6);
        assert!(contact_rotation_angle(-1.0, &q).is_err());
    }

    /// Rotates the sampled curve and searches for its wall-most point.
    fn tangency_search(x: f64, p: &AttachmentParams) -> f64 {
        // bisection on theta: the wall-most curve point moves toward the
        // origin as theta grows
        let wall_most = |theta: f64| {
            let n = 200_000;
            let (s, c) = f64::sin_cos(theta);
            (0..=n)
                .map(|i| {
                    let xi = p.w_slope * i as f64 / n as f64;
                    let yi = p.h_slope * (xi / p.w_slope).powf(p.n);
                    (xi * c - yi * s, xi)
                })
                .fold((f64::NEG_INFINITY, 0.0), |a, b| if b.0 > a.0 { b } else { a })
                .1
        };
        let (mut lo, mut hi) = (0.0, FRAC_PI_2);
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            if wall_most(mid) > x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn rotation_angle_matches_tangency_search() {
        let p = AttachmentParams::default();
        let got = contact_rotation_angle(12.9, &p).unwrap();
        let oracle = tangency_search(12.9, &p);
        // the search resolves x to w_slope / 200000, which bounds the angle
        // error by |dθ/dx| * 1.3e-4
        assert!((got - oracle).abs() < 1e-5, "{got} vs {oracle}");
    }

    fn vector_torque_force(c: &ContactState, mass_g: f64) -> f64 {
        let rot = |r: f64, a: f64| {
            let v = nalgebra::Rotation2::new(c.theta) * nalgebra::Vector2::new(r * a.cos(), r * a.sin());
            nalgebra::Vector3::new(v.x, v.y, 0.0)
        };
        let s = rot(c.os, c.theta_s);
        let g = rot(c.og, c.theta_g);
        let weight = nalgebra::Vector3::new(0.0, -mass_g / 1000.0 * GRAVITY, 0.0);
        let unit_push = nalgebra::Vector3::new(-1.0, 0.0, 0.0);
        let tau_gravity = g.cross(&weight).z;
        let tau_unit = s.cross(&unit_push).z;
        -tau_gravity / tau_unit
    }

    #[test]
    fn force_examples() {
        let c = ContactState { x: 0.0, theta: 0.3, os: 40.0, theta_s: 0.5, og: 20.0, theta_g: FRAC_PI_2 - 0.3 };
        assert!(required_force_at(&c, 92.0).unwrap().abs() < 1e-15);
        let c = ContactState { theta_g: 0.2, ..c };
        let one = required_force_at(&c, 50.0).unwrap();
        let two = required_force_at(&c, 100.0).unwrap();
        assert!((two - 2.0 * one).abs() < 1e-15);
        let d = RobotDims::default();
        let p = AttachmentParams::default();
        let prof = sample_profile(&p, 1000).unwrap();
        let first = contact_state(prof.samples[1][0], &p, &d).unwrap();
        let got = required_force_at(&first, d.mass_g).unwrap();
        let want = vector_torque_force(&first, d.mass_g).max(0.0);
        assert!((got - want).abs() < 1e-9);
        let singular = ContactState { theta: 0.0, theta_s: 0.0, ..first };
        assert!(matches!(required_force_at(&singular, 92.0), Err(DesignError::Singular(_))));
    }

    #[test]
    fn max_force_ordering_and_refinement() {
        let d = RobotDims::default();
        let p = AttachmentParams::default();
        let f = |n: f64| max_required_force(&p.with_exponent(n), &d, 1000).unwrap().max_force;
        assert!(f(1.0) > f(2.4));
        assert!(f(2.4) > f(1.3));
        let coarse = max_required_force(&p, &d, 2).unwrap().max_force;
        assert!(f(1.3) >= coarse - 1e-12);
        let massless = RobotDims { mass_g: 0.0, ..d };
        assert_eq!(max_required_force(&p, &massless, 100).unwrap().max_force, 0.0);
    }

    #[test]
    fn optimize_examples() {
        let d = RobotDims::default();
        let p = AttachmentParams::default();
        let sweep = optimize_exponent((1.0, 3.0), 0.1, &p, &d, 1000).unwrap();
        assert!((1.1..=1.5).contains(&sweep.best_n), "n* = {}", sweep.best_n);
        assert_eq!(sweep.grid.len(), 21);
        let single = optimize_exponent((1.3, 1.3), 0.5, &p, &d, 100).unwrap();
        assert_eq!(single.best_n, 1.3);
        // re-evaluation oracle
        let (mut bn, mut bf) = (f64::NAN, f64::INFINITY);
        for k in 0..=20 {
            let n = 1.0 + 0.1 * k as f64;
            let m = max_required_force(&p.with_exponent(n), &d, 1000).unwrap().max_force;
            if m < bf {
                bf = m;
                bn = n;
            }
        }
        assert!((bn - sweep.best_n).abs() < 1e-9);
        assert!(optimize_exponent((0.5, 3.0), 0.1, &p, &d, 10).is_err());
        assert!(optimize_exponent((1.0, 3.0), 0.0, &p, &d, 10).is_err());
    }

    fn circumradius(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
        let dist = |p: [f64; 2], q: [f64; 2]| (p[0] - q[0]).hypot(p[1] - q[1]);
        let area2 = ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])).abs();
        dist(a, b) * dist(b, c) * dist(c, a) / (2.0 * area2)
    }

    #[test]
    fn ramp_examples() {
        assert!((ramp_arc_radius(40.0, 0.8).unwrap() - 250.0).abs() < 1e-9);
        assert!((ramp_arc_radius(16.0, 2.0).unwrap() - 16.0).abs() < 1e-12);
        // wheel contacts A and C sit a straight-line half-width from the
        // body-centre contact B and rise h_wheel above it
        let (w, h) = (40.0f64, 0.8f64);
        let half = ((w / 2.0).powi(2) - h * h).sqrt();
        let r = circumradius([-half, h], [0.0, 0.0], [half, h]);
        assert!((r - 250.0).abs() < 1e-6, "{r}");
        assert!(ramp_arc_radius(0.0, 0.8).is_err());
        assert!(ramp_arc_radius(40.0, -1.0).is_err());
    }

    #[test]
    fn csv_export_round_trip() {
        let p = AttachmentParams::default().with_exponent(1.0);
        let prof = sample_profile(&p, 2).unwrap();
        let text = String::from_utf8(export_profile(&prof, ExportFormat::Csv)).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(!text.contains('\r'));
        let back = parse_profile_csv(&text).unwrap();
        assert_eq!(back, prof.samples);
    }

    #[test]
    fn svg_bounding_box() {
        let p = AttachmentParams::default();
        let prof = sample_profile(&p, 1000).unwrap();
        let text = String::from_utf8(export_profile(&prof, ExportFormat::Svg)).unwrap();
        let doc = roxmltree::Document::parse(&text).unwrap();
        let (mut minx, mut maxx, mut miny, mut maxy) =
            (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        let mut grow = |x: f64, y: f64| {
            minx = minx.min(x);
            maxx = maxx.max(x);
            miny = miny.min(y);
            maxy = maxy.max(y);
        };
        let mut polylines = 0;
        for node in doc.descendants() {
            match node.tag_name().name() {
                "polyline" => {
                    polylines += 1;
                    for pair in node.attribute("points").unwrap().split_whitespace() {
                        let (x, y) = pair.split_once(',').unwrap();
                        grow(x.parse().unwrap(), y.parse().unwrap());
                    }
                }
                "rect" => {
                    let a = |k: &str| node.attribute(k).unwrap().parse::<f64>().unwrap();
                    grow(a("x"), a("y"));
                    grow(a("x") + a("width"), a("y") + a("height"));
                }
                _ => {}
            }
        }
        assert_eq!(polylines, 1);
        assert!((maxx - minx - (p.w_push + p.w_slope)).abs() < 1e-5);
        assert!((maxy - miny - p.h_slope).abs() < 1e-5);
    }

    #[test]
    fn cam_track_travel_and_peak() {
        let d = RobotDims::default();
        let p = AttachmentParams::default();
        let track = CamTrack::build(&p, &d, 1000, 2000).unwrap();
        let reach = p.cam_origin(&d) + p.w_slope;
        assert!((track.total_travel() - reach).abs() < 1e-9);
        let prof = max_required_force(&p, &d, 1000).unwrap();
        // tip contact precedes the curve contact and is not part of the sweep
        assert!(track.peak_force() >= prof.max_force * 0.99);
        let on_curve = track
            .force
            .iter()
            .zip(&track.contact_x)
            .filter(|(_, x)| **x < p.w_slope)
            .map(|(f, _)| *f)
            .fold(0.0, f64::max);
        assert!((on_curve - prof.max_force).abs() / prof.max_force < 0.01);
        assert_eq!(track.kink, 0.0);
        let lin = p.with_exponent(1.0);
        assert!((lin.boundary_kink() - (48.6f64 / 25.8).atan()).abs() < 1e-15);
    }
}
