use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::design::GRAVITY;
use crate::error::SimError;

pub const TICK_HZ: u32 = 60;
pub const DT: f64 = 1.0 / TICK_HZ as f64;
pub const MOTOR_LIMIT: i32 = 115;

/// Converts seconds to whole ticks, rounding up.
pub fn ticks_ceil(seconds: f64) -> u64 {
    (seconds * TICK_HZ as f64 - 1e-9).ceil().max(0.0) as u64
}

pub fn ticks_to_seconds(ticks: u64) -> f64 {
    ticks as f64 / TICK_HZ as f64
}

/// Calibration constants of the simulated robots. Everything except the
/// 430 rpm anchor, the ±5 unit localisation error and the 250 gf magnet is
/// a calibration choice rather than a measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhysicsParams {
    /// Pushing force one robot can exert, N.
    pub push_force: f64,
    /// Friction coefficient of pushed objects on the table.
    pub mu_table: f64,
    /// Wheel traction coefficient on the wall.
    pub mu_wheel_wall: f64,
    /// Magnet adhesion, grams-force.
    pub adhesion_gf: f64,
    pub robot_mass_g: f64,
    pub wheel_diameter_mm: f64,
    /// Wheel rpm at motor setting 100.
    pub rpm_at_100: f64,
    pub track_width_mm: f64,
    /// Half-width of the uniform per-axis alignment error, mat units.
    pub noise_sigma: f64,
    pub seed: u64,
    /// Required-force multiplier per radian of lip/slope tangent jump.
    pub kink_penalty_per_rad: f64,
    /// Time from the end of rotation until the mat position is read, s.
    pub recognition_delay_s: f64,
    /// Seconds of activity a full battery supports.
    pub battery_life_s: f64,
    pub transition_timeout_s: f64,
    /// Largest payload torque carried stably, N·m.
    pub payload_torque_limit: f64,
    /// Side of the square collision footprint, mm.
    pub footprint_mm: f64,
    /// Lever arm converting payload torque into magnet peel load, mm.
    pub peel_lever_mm: f64,
    /// Extra load factor for pushing objects up or along the wall.
    pub wall_push_margin: f64,
    /// Motor setting used while servoing into the transition line.
    pub align_setting: i32,
    pub align_timeout_s: f64,
    /// Drive utilisation above which a contact sliding along the curve
    /// starts to stick.
    pub slip_onset: f64,
    /// Per-tick stick probability per unit of utilisation above onset.
    pub slip_gain: f64,
}

impl Default for PhysicsParams {
    fn default() -> Self {
        Self {
            push_force: 0.30,
            mu_table: 0.35,
            mu_wheel_wall: 0.6,
            adhesion_gf: 250.0,
            robot_mass_g: 92.0,
            wheel_diameter_mm: 12.5,
            rpm_at_100: 430.0,
            track_width_mm: 26.0,
            noise_sigma: 5.0,
            seed: 0,
            kink_penalty_per_rad: 0.55,
            recognition_delay_s: 0.14,
            battery_life_s: 7200.0,
            transition_timeout_s: 5.0,
            payload_torque_limit: 0.0076,
            footprint_mm: 40.0,
            peel_lever_mm: 47.0,
            wall_push_margin: 0.1,
            align_setting: 50,
            align_timeout_s: 3.0,
            slip_onset: 0.40,
            slip_gain: 8.0,
        }
    }
}

impl PhysicsParams {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let positive = [
            ("mu_table", self.mu_table),
            ("mu_wheel_wall", self.mu_wheel_wall),
            ("adhesion_gf", self.adhesion_gf),
            ("robot_mass_g", self.robot_mass_g),
            ("wheel_diameter_mm", self.wheel_diameter_mm),
            ("track_width_mm", self.track_width_mm),
            ("battery_life_s", self.battery_life_s),
            ("footprint_mm", self.footprint_mm),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(SimError::Design(crate::error::DesignError::Domain(format!(
                    "{name} must be > 0, got {v}"
                ))));
            }
        }
        Ok(())
    }

    /// Wheel surface speed for a motor setting, mm/s.
    pub fn speed_of(&self, setting: i32) -> Result<f64, SimError> {
        if setting.abs() > MOTOR_LIMIT {
            return Err(SimError::MotorRange(setting));
        }
        let at_100 = PI * self.wheel_diameter_mm * self.rpm_at_100 / 60.0;
        Ok(at_100 * setting as f64 / 100.0)
    }

    pub fn adhesion_n(&self) -> f64 {
        self.adhesion_gf / 1000.0 * GRAVITY
    }
}

/// Something carried on top of a robot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct PayloadSpec {
    pub name: String,
    pub mass_g: f64,
    /// Extent above the mount, mm.
    pub length_mm: f64,
    /// Height of the payload's centre of gravity above the mount, mm.
    pub cg_from_mount_mm: f64,
    /// Carries a magnet the robot's hall sensor can detect.
    #[serde(default)]
    pub magnetic: bool,
    /// Footprint of a large flat payload (poster), mm; planners keep out of it.
    #[serde(default)]
    pub keepout_mm: Option<[f64; 2]>,
    /// Free-form tag, e.g. the peak a panel stands for.
    #[serde(default)]
    pub tag: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Stable,
    Unstable,
}

/// Length of one rod increment, mm.
pub const ROD_INCREMENT_MM: f64 = 43.0;
/// Mass of one rod increment, g.
pub const ROD_INCREMENT_G: f64 = 4.0;

impl PayloadSpec {
    pub fn new(name: &str, mass_g: f64, length_mm: f64, cg_from_mount_mm: f64) -> Self {
        Self {
            name: name.to_string(),
            mass_g,
            length_mm,
            cg_from_mount_mm,
            magnetic: false,
            keepout_mm: None,
            tag: None,
        }
    }

    /// Gravitational moment about the mount, N·m.
    pub fn torque(&self) -> f64 {
        self.mass_g / 1000.0 * GRAVITY * self.cg_from_mount_mm / 1000.0
    }

    /// A brick rod of `increments` equal segments.
    pub fn rod(increments: u32) -> Self {
        let len = ROD_INCREMENT_MM * increments as f64;
        Self::new(&format!("rod-{increments}"), ROD_INCREMENT_G * increments as f64, len, len / 2.0)
    }

    /// An object taped along one rod increment; the object's centre of mass
    /// sits level with the rod's.
    fn taped(name: &str, mass_g: f64) -> Self {
        Self::new(
            name,
            mass_g + ROD_INCREMENT_G,
            ROD_INCREMENT_MM,
            ROD_INCREMENT_MM / 2.0,
        )
    }

    pub fn bolt() -> Self {
        Self::taped("bolt", 9.0)
    }

    pub fn penlight() -> Self {
        Self::taped("penlight", 15.0)
    }

    pub fn cutter() -> Self {
        Self::taped("cutter", 20.0)
    }

    pub fn key() -> Self {
        Self::new("key", 8.0, 50.0, 12.0)
    }

    pub fn poster() -> Self {
        Self { keepout_mm: Some([120.0, 90.0]), ..Self::new("poster", 1.0, 90.0, 45.0) }
    }

    pub fn note(label: &str) -> Self {
        Self::new(&format!("note:{label}"), 0.5, 76.0, 38.0)
    }

    pub fn peak_panel(peak: &str) -> Self {
        Self {
            magnetic: true,
            tag: Some(peak.to_string()),
            ..Self::new(&format!("panel:{peak}"), 6.0, 60.0, 30.0)
        }
    }

    pub fn furniture(name: &str) -> Self {
        Self::new(&format!("proxy:{name}"), 3.0, 30.0, 15.0)
    }

    pub fn tangible(name: &str) -> Self {
        Self::new(&format!("tether:{name}"), 1.0, 10.0, 5.0)
    }
}

/// Stable iff the payload torque does not exceed `limit`.
pub fn payload_stability(payload: &PayloadSpec, limit: f64) -> Stability {
    if payload.torque() <= limit {
        Stability::Stable
    } else {
        Stability::Unstable
    }
}

/// Probability that a transition carrying `payload` shakes loose.
pub fn payload_failure_probability(payload: &PayloadSpec, limit: f64) -> f64 {
    match payload_stability(payload, limit) {
        Stability::Stable => 0.0,
        Stability::Unstable => (payload.torque() / limit - 1.0).clamp(0.0, 1.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn speed_examples() {
        let p = PhysicsParams::default();
        assert_eq!(p.speed_of(0).unwrap(), 0.0);
        let v100 = p.speed_of(100).unwrap();
        assert!((v100 - PI * 12.5 * 430.0 / 60.0).abs() < 1e-12);
        assert!((v100 - 281.4).abs() < 0.05);
        assert_eq!(p.speed_of(50).unwrap(), v100 / 2.0);
        assert_eq!(p.speed_of(-100).unwrap(), -v100);
        assert!(matches!(p.speed_of(116), Err(SimError::MotorRange(116))));
    }

    #[test]
    fn rod_torques() {
        let limit = 0.0076;
        let three = PayloadSpec::rod(3);
        assert_eq!(three.mass_g, 12.0);
        assert_eq!(three.cg_from_mount_mm, 64.5);
        assert!((three.torque() - 0.012 * GRAVITY * 0.0645).abs() < 1e-15);
        assert!((three.torque() - 0.00759).abs() < 1e-5);
        assert_eq!(payload_stability(&three, limit), Stability::Stable);
        let four = PayloadSpec::rod(4);
        assert!((four.torque() - 0.0135).abs() < 1e-4);
        assert_eq!(payload_stability(&four, limit), Stability::Unstable);
        let empty = PayloadSpec::new("nothing", 0.0, 0.0, 0.0);
        assert_eq!(payload_stability(&empty, limit), Stability::Stable);
        for p in [PayloadSpec::bolt(), PayloadSpec::penlight(), PayloadSpec::cutter()] {
            assert_eq!(payload_stability(&p, limit), Stability::Stable, "{}", p.name);
        }
        assert!(payload_failure_probability(&four, limit) > 0.5);
        assert_eq!(payload_failure_probability(&three, limit), 0.0);
    }

    #[test]
    fn tick_rounding() {
        assert_eq!(ticks_ceil(0.4), 24);
        assert_eq!(ticks_ceil(1.0 / 60.0), 1);
        assert_eq!(ticks_ceil(0.0), 0);
        assert_eq!(ticks_to_seconds(30), 0.5);
    }
}
