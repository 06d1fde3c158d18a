//! Outcome model of one cooperative corner transition.

use serde::{Deserialize, Serialize};

use crate::design::{max_required_force, AttachmentParams, CamTrack, ForceProfile, RobotDims};
use crate::error::DesignError;
use crate::sim::params::{
    payload_failure_probability, ticks_ceil, ticks_to_seconds, PayloadSpec, PhysicsParams, DT,
};
use crate::sim::uniform;
use rand_core::Rng;

/// Resolution of the force profile and the rotation track.
pub const PROFILE_SAMPLES: usize = 1000;
pub const TRACK_STEPS: usize = 1800;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    TableToWall,
    WallToTable,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::TableToWall => "table_to_wall",
            Self::WallToTable => "wall_to_table",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "table_to_wall" | "table-to-wall" | "up" => Some(Self::TableToWall),
            "wall_to_table" | "wall-to-table" | "down" => Some(Self::WallToTable),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    Timeout,
    ForceDeficit,
    Detach,
    Misalign,
}

impl FailureReason {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Timeout => "timeout",
            Self::ForceDeficit => "force_deficit",
            Self::Detach => "detach",
            Self::Misalign => "misalign",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub success: bool,
    /// Seconds from first push until the target mat is read (or failure);
    /// always `duration_ticks / 60`.
    pub duration: f64,
    pub duration_ticks: u64,
    pub failure_reason: Option<FailureReason>,
}

/// Per-trial alignment error of the mover relative to the helper, mat
/// units. `normal` runs along the seam normal, `lateral` along the seam.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AlignmentError {
    pub normal: f64,
    pub lateral: f64,
}

/// Precomputed cam data for one attachment on one body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionModel {
    pub attachment: AttachmentParams,
    pub dims: RobotDims,
    pub profile: ForceProfile,
    pub track: CamTrack,
}

impl TransitionModel {
    pub fn new(attachment: &AttachmentParams, dims: &RobotDims) -> Result<Self, DesignError> {
        Ok(Self {
            attachment: *attachment,
            dims: *dims,
            profile: max_required_force(attachment, dims, PROFILE_SAMPLES)?,
            track: CamTrack::build(attachment, dims, PROFILE_SAMPLES, TRACK_STEPS)?,
        })
    }

    /// Required-force multiplier applied once the contact has jumped past
    /// the lip/slope boundary.
    pub fn kink_factor(&self, physics: &PhysicsParams) -> f64 {
        1.0 + physics.kink_penalty_per_rad * self.track.kink
    }

    /// Peak required force along the rotation including the kink penalty.
    pub fn effective_peak(&self, physics: &PhysicsParams) -> f64 {
        let k = self.kink_factor(physics);
        let track_peak = self
            .track
            .force
            .iter()
            .zip(&self.track.contact_x)
            .map(|(f, x)| if self.track.kink > 0.0 && *x == 0.0 { f * k } else { *f })
            .fold(0.0, f64::max);
        let profile_peak = if self.track.kink > 0.0 {
            self.profile
                .entries
                .iter()
                .map(|e| if e.x == 0.0 { e.force * k } else { e.force })
                .fold(0.0, f64::max)
        } else {
            self.profile.max_force
        };
        track_peak.max(profile_peak)
    }
}

/// Outcome plus the rotation schedule the simulator plays back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionPlan {
    pub outcome: Outcome,
    /// Rotation angle after each tick since contact; the last entry holds
    /// for any later tick.
    pub theta: Vec<f64>,
    /// Pivot travel toward the seam after each tick since contact, mm.
    pub travel: Vec<f64>,
    pub alignment: AlignmentError,
    /// Pushing force available for this trial, N.
    pub available_force: f64,
}

impl TransitionPlan {
    pub fn theta_at(&self, tick: u64) -> f64 {
        sample_at(&self.theta, tick)
    }

    pub fn travel_at(&self, tick: u64) -> f64 {
        sample_at(&self.travel, tick)
    }
}

fn sample_at(v: &[f64], tick: u64) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let i = (tick as usize).min(v.len()) - usize::from(tick > 0);
    v[i.min(v.len() - 1)]
}

/// Decides the fate of one transition attempt and builds its schedule.
///
/// Table to wall: the mover must stay within the slope's lateral coverage,
/// and the combined drive of helper and mover (scaled by how squarely the
/// helper meets the mover) must exceed the required force at every angle.
/// Loaded motors slow linearly with the force they deliver. While the
/// wall contact slides along the curve under high load it may stick for
/// a tick. Wall to table: gravity carries the rotation. An unstable
/// payload shakes loose with a probability that grows with its torque.
///
/// Draws from `rng`: one payload roll, then one per tick spent above the
/// slip onset.
pub fn transition_outcome<R: Rng + ?Sized>(
    model: &TransitionModel,
    physics: &PhysicsParams,
    unit_mm: f64,
    direction: Direction,
    alignment: AlignmentError,
    payload: Option<&PayloadSpec>,
    rng: &mut R,
) -> TransitionPlan {
    let payload_roll = uniform(rng);
    let timeout_ticks = ticks_ceil(physics.transition_timeout_s);
    let v0 = physics.speed_of(100).expect("100 is a valid setting");
    let lat_mm = alignment.lateral.abs() * unit_mm;
    let half_width = model.attachment.lateral_width / 2.0;
    let coverage = half_width - model.dims.w_robot / 2.0;

    let fail = |reason: FailureReason, ticks: u64, theta: Vec<f64>, travel: Vec<f64>, available: f64| {
        TransitionPlan {
            outcome: Outcome {
                success: false,
                duration: ticks_to_seconds(ticks),
                duration_ticks: ticks,
                failure_reason: Some(reason),
            },
            theta,
            travel,
            alignment,
            available_force: available,
        }
    };

    if lat_mm > coverage {
        return fail(FailureReason::Misalign, 0, vec![0.0], vec![0.0], 0.0);
    }

    let efficiency = 1.0 - lat_mm / half_width;
    let available = match direction {
        Direction::TableToWall => 2.0 * physics.push_force * efficiency,
        Direction::WallToTable => f64::INFINITY,
    };
    let kink = model.kink_factor(physics);
    let track = &model.track;
    let w_slope = model.attachment.w_slope;
    let last = track.theta.len() - 1;
    let load = |i: usize| -> f64 {
        match direction {
            Direction::TableToWall => {
                let f = track.force[i];
                if track.kink > 0.0 && track.contact_x[i] == 0.0 {
                    f * kink
                } else {
                    f
                }
            }
            Direction::WallToTable => 0.0,
        }
    };
    let sliding = |i: usize| track.contact_x[i] > 0.0 && track.contact_x[i] < w_slope;

    let mut theta = Vec::new();
    let mut travel = Vec::new();
    let mut i = 0usize;
    let mut pos = 0.0;
    let mut rotation_end = None;
    let mut stalled = false;
    for tick in 1..=timeout_ticks {
        let utilisation = load(i) / available;
        let stuck = sliding(i)
            && utilisation > physics.slip_onset
            && uniform(rng) < (physics.slip_gain * (utilisation - physics.slip_onset)).min(0.95);
        let mut budget = if stuck || stalled { 0.0 } else { DT };
        while budget > 0.0 && i < last {
            let f = load(i + 1);
            if f >= available {
                stalled = true;
                break;
            }
            let speed = v0 * (1.0 - f / available);
            let need = (track.travel[i + 1] - pos) / speed;
            if need <= budget {
                budget -= need;
                i += 1;
                pos = track.travel[i];
            } else {
                pos += budget * speed;
                budget = 0.0;
            }
        }
        let (th, tr) = if i < last && !stalled {
            let span = track.travel[i + 1] - track.travel[i];
            let f = if span > 0.0 { (pos - track.travel[i]) / span } else { 0.0 };
            (track.theta[i] + f * (track.theta[i + 1] - track.theta[i]), pos)
        } else {
            (track.theta[i], track.travel[i])
        };
        theta.push(th);
        travel.push(tr);
        if i == last && rotation_end.is_none() {
            rotation_end = Some(tick as f64 * DT - budget);
            break;
        }
    }

    let Some(rotation_end) = rotation_end else {
        let reason = if stalled { FailureReason::ForceDeficit } else { FailureReason::Timeout };
        pad(&mut theta, timeout_ticks);
        pad(&mut travel, timeout_ticks);
        return fail(reason, timeout_ticks, theta, travel, available);
    };

    let total = rotation_end + physics.recognition_delay_s;
    let ticks = ticks_ceil(total).max(2);
    pad(&mut theta, ticks);
    pad(&mut travel, ticks);
    if ticks > timeout_ticks {
        theta.truncate(timeout_ticks as usize);
        travel.truncate(timeout_ticks as usize);
        return fail(FailureReason::Timeout, timeout_ticks, theta, travel, available);
    }

    if let Some(p) = payload {
        if payload_roll < payload_failure_probability(p, physics.payload_torque_limit) {
            // shakes loose once the rotation completes
            let at = ticks_ceil(rotation_end).clamp(1, ticks - 1);
            theta.truncate(at as usize);
            travel.truncate(at as usize);
            return fail(FailureReason::Detach, at, theta, travel, available);
        }
    }

    TransitionPlan {
        outcome: Outcome {
            success: true,
            duration: ticks_to_seconds(ticks),
            duration_ticks: ticks,
            failure_reason: None,
        },
        theta,
        travel,
        alignment,
        available_force: if available.is_finite() { available } else { -1.0 },
    }
}

fn pad(v: &mut Vec<f64>, len: u64) {
    let fill = v.last().copied().unwrap_or(0.0);
    v.resize(len as usize, fill);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::MAT_UNIT_MM;
    use rand_core::SeedableRng;
    use rand_xoshiro::SplitMix64;

    fn model(n: f64) -> TransitionModel {
        TransitionModel::new(&AttachmentParams::default().with_exponent(n), &RobotDims::default())
            .unwrap()
    }

    fn run(m: &TransitionModel, p: &PhysicsParams, dir: Direction, lat: f64) -> TransitionPlan {
        let mut rng = SplitMix64::seed_from_u64(7);
        transition_outcome(
            m,
            p,
            MAT_UNIT_MM,
            dir,
            AlignmentError { normal: 0.0, lateral: lat },
            None,
            &mut rng,
        )
    }

    /// Seeded stream whose first draw is `first`.
    struct Fixed(f64, SplitMix64);

    impl rand_core::TryRng for Fixed {
        type Error = std::convert::Infallible;
        fn try_next_u32(&mut self) -> Result<u32, Self::Error> {
            Ok(self.1.next_u32())
        }
        fn try_next_u64(&mut self) -> Result<u64, Self::Error> {
            if self.0 >= 0.0 {
                let v = ((self.0 * (1u64 << 53) as f64) as u64) << 11;
                self.0 = -1.0;
                return Ok(v);
            }
            Ok(self.1.next_u64())
        }
        fn try_fill_bytes(&mut self, dst: &mut [u8]) -> Result<(), Self::Error> {
            self.1.fill_bytes(dst);
            Ok(())
        }
    }

    #[test]
    fn aligned_cams_succeed_up_and_down() {
        let p = PhysicsParams::default();
        for n in [1.3, 2.4] {
            let m = model(n);
            for lat in [0.0, 5.0, -5.0] {
                let plan = run(&m, &p, Direction::TableToWall, lat);
                assert!(plan.outcome.success, "n={n} lat={lat}");
            }
        }
        let down: Vec<u64> = [1.0, 1.3, 2.4]
            .iter()
            .map(|&n| run(&model(n), &p, Direction::WallToTable, 4.0).outcome.duration_ticks)
            .collect();
        assert!(down.iter().all(|&d| d == down[0]));
        assert_eq!(down[0], 24);
    }

    #[test]
    fn zero_push_force() {
        let p = PhysicsParams { push_force: 0.0, ..Default::default() };
        let m = model(1.3);
        let up = run(&m, &p, Direction::TableToWall, 0.0);
        assert_eq!(up.outcome.failure_reason, Some(FailureReason::ForceDeficit));
        assert_eq!(up.outcome.duration_ticks, 300);
        assert!(run(&m, &p, Direction::WallToTable, 0.0).outcome.success);
    }

    #[test]
    fn linear_cam_depends_on_alignment() {
        let p = PhysicsParams::default();
        let m = model(1.0);
        assert!(run(&m, &p, Direction::TableToWall, 0.0).outcome.success);
        assert!(!run(&m, &p, Direction::TableToWall, 5.0).outcome.success);
    }

    #[test]
    fn lateral_miss_is_misalign() {
        let p = PhysicsParams::default();
        let plan = run(&model(1.3), &p, Direction::TableToWall, 31.0 / MAT_UNIT_MM + 0.1);
        assert_eq!(plan.outcome.failure_reason, Some(FailureReason::Misalign));
        assert_eq!(plan.outcome.duration_ticks, 0);
    }

    #[test]
    fn schedule_is_monotone_and_ends_upright() {
        let p = PhysicsParams::default();
        let plan = run(&model(1.3), &p, Direction::TableToWall, 2.0);
        assert_eq!(plan.theta.len() as u64, plan.outcome.duration_ticks);
        assert!(plan.theta.windows(2).all(|w| w[1] >= w[0]));
        assert!((plan.theta_at(plan.outcome.duration_ticks) - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        assert!((plan.outcome.duration * 60.0 - plan.outcome.duration_ticks as f64).abs() < 1e-9);
    }

    #[test]
    fn unstable_payload_can_detach() {
        let p = PhysicsParams::default();
        let m = model(1.3);
        let rod = PayloadSpec::rod(4);
        let mut low = Fixed(0.01, SplitMix64::seed_from_u64(1));
        let plan = transition_outcome(&m, &p, MAT_UNIT_MM, Direction::TableToWall, AlignmentError::default(), Some(&rod), &mut low);
        assert_eq!(plan.outcome.failure_reason, Some(FailureReason::Detach));
        let mut high = Fixed(0.99, SplitMix64::seed_from_u64(1));
        let ok = transition_outcome(&m, &p, MAT_UNIT_MM, Direction::TableToWall, AlignmentError::default(), Some(&rod), &mut high);
        assert!(ok.outcome.success);
    }
}
