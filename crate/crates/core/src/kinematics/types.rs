use nalgebra::{SVector, Vector3};
use serde::{Deserialize, Serialize};

use super::KinematicsError;

pub type Vector6 = SVector<f64, 6>;

/// Index of a virtual eye. Right eye sits at negative lateral offset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Eye {
    Right,
    Left,
}

impl Eye {
    pub const BOTH: [Eye; 2] = [Eye::Right, Eye::Left];

    pub fn index(self) -> usize {
        match self {
            Eye::Right => 0,
            Eye::Left => 1,
        }
    }

    /// Sign of the lateral (world y / screen u) offset of this eye.
    pub fn lateral_sign(self) -> f64 {
        match self {
            Eye::Right => -1.0,
            Eye::Left => 1.0,
        }
    }
}

/// Physical neck joints followed by the two virtual eyeball DoFs.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct JointVector {
    pub theta_pan: f64,
    pub theta_tilt: f64,
    pub theta_re_x: f64,
    pub theta_re_y: f64,
    pub theta_le_x: f64,
    pub theta_le_y: f64,
}

impl JointVector {
    pub const DOF: usize = 6;
    pub const PAN: usize = 0;
    pub const TILT: usize = 1;

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_vector(v: &Vector6) -> Self {
        Self {
            theta_pan: v[0],
            theta_tilt: v[1],
            theta_re_x: v[2],
            theta_re_y: v[3],
            theta_le_x: v[4],
            theta_le_y: v[5],
        }
    }

    pub fn to_vector(&self) -> Vector6 {
        Vector6::from([
            self.theta_pan,
            self.theta_tilt,
            self.theta_re_x,
            self.theta_re_y,
            self.theta_le_x,
            self.theta_le_y,
        ])
    }

    /// (yaw, pitch) of one eye.
    pub fn eye_angles(&self, eye: Eye) -> (f64, f64) {
        match eye {
            Eye::Right => (self.theta_re_x, self.theta_re_y),
            Eye::Left => (self.theta_le_x, self.theta_le_y),
        }
    }

    pub fn set_eye_angles(&mut self, eye: Eye, yaw: f64, pitch: f64) {
        match eye {
            Eye::Right => {
                self.theta_re_x = yaw;
                self.theta_re_y = pitch;
            }
            Eye::Left => {
                self.theta_le_x = yaw;
                self.theta_le_y = pitch;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_vector().iter().all(|v| v.is_finite())
    }

    pub fn within_limits(&self, geom: &HeadGeometry) -> bool {
        self.is_finite()
            && self.theta_pan.abs() <= geom.pan_limit
            && self.theta_tilt.abs() <= geom.tilt_limit
    }
}

/// Neck chain, screen plane and virtual eyeball placement.
///
/// Lengths are meters in the head (tilt) frame: x forward, y left, z up.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeadGeometry {
    /// Tilt frame origin to screen plane along the forward axis.
    pub screen_distance: f64,
    /// Eyeball center depth behind the screen plane.
    pub eye_depth: f64,
    /// Lateral offset of each eyeball center.
    pub eye_half_spacing: f64,
    pub screen_width: f64,
    pub screen_height: f64,
    pub pixels_per_meter: f64,
    pub iris_radius: f64,
    pub pupil_radius: f64,
    pub pan_limit: f64,
    pub tilt_limit: f64,
}

impl Default for HeadGeometry {
    fn default() -> Self {
        Self {
            screen_distance: 0.10,
            eye_depth: 0.03,
            eye_half_spacing: 0.05,
            screen_width: 0.24,
            screen_height: 0.07,
            pixels_per_meter: 2000.0,
            iris_radius: 0.014,
            pupil_radius: 0.0123,
            pan_limit: 1.57,
            tilt_limit: 0.6,
        }
    }
}

impl HeadGeometry {
    pub fn validate(&self) -> Result<(), KinematicsError> {
        let fields = [
            self.screen_distance,
            self.eye_depth,
            self.eye_half_spacing,
            self.screen_width,
            self.screen_height,
            self.pixels_per_meter,
            self.iris_radius,
            self.pupil_radius,
            self.pan_limit,
            self.tilt_limit,
        ];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(KinematicsError::InvalidGeometry("non-finite field".into()));
        }
        if !(self.iris_radius > self.pupil_radius && self.pupil_radius > 0.0) {
            return Err(KinematicsError::InvalidGeometry(
                "iris_radius > pupil_radius > 0 violated".into(),
            ));
        }
        if !(self.eye_depth > 0.0 && self.eye_half_spacing > 0.0) {
            return Err(KinematicsError::InvalidGeometry(
                "eye_depth and eye_half_spacing must be positive".into(),
            ));
        }
        if self.screen_distance <= self.eye_depth {
            return Err(KinematicsError::InvalidGeometry(
                "screen_distance must exceed eye_depth".into(),
            ));
        }
        if self.screen_width <= 2.0 * self.iris_radius || self.screen_height <= 2.0 * self.iris_radius
        {
            return Err(KinematicsError::InvalidGeometry(
                "screen smaller than the iris disc".into(),
            ));
        }
        if self.pixels_per_meter <= 0.0 || self.pan_limit <= 0.0 || self.tilt_limit <= 0.0 {
            return Err(KinematicsError::InvalidGeometry(
                "pixels_per_meter and joint limits must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Eyeball center in the head frame.
    pub fn eye_center_head(&self, eye: Eye) -> Vector3<f64> {
        Vector3::new(
            self.screen_distance - self.eye_depth,
            eye.lateral_sign() * self.eye_half_spacing,
            0.0,
        )
    }

    /// Largest |u| / |v| a pupil center can take with the iris fully on screen.
    pub fn pupil_bounds(&self) -> (f64, f64) {
        (
            self.screen_width / 2.0 - self.iris_radius,
            self.screen_height / 2.0 - self.iris_radius,
        )
    }

    pub fn raster_size(&self) -> (u32, u32) {
        (
            (self.screen_width * self.pixels_per_meter).round() as u32,
            (self.screen_height * self.pixels_per_meter).round() as u32,
        )
    }
}

/// Gains and weights for the weighted pseudo-inverse controller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IKParams {
    pub w_q: [f64; 6],
    pub w_j: [f64; 6],
    pub task_gain: f64,
    pub rest_gain: f64,
    pub damping: f64,
    pub dt: f64,
    pub max_ticks: usize,
    pub tol: f64,
}

impl Default for IKParams {
    fn default() -> Self {
        Self {
            w_q: [0.05, 0.05, 1.0, 1.0, 1.0, 1.0],
            w_j: [0.0, 0.0, 1.0, 1.0, 1.0, 1.0],
            task_gain: 6.0,
            rest_gain: 8.0,
            damping: 1e-3,
            dt: 0.02,
            max_ticks: 400,
            tol: 1e-4,
        }
    }
}

impl IKParams {
    pub fn validate(&self) -> Result<(), KinematicsError> {
        if self.w_q.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(KinematicsError::InvalidParams("w_q entries must be > 0".into()));
        }
        if self.w_j.iter().any(|w| !(0.0..=1.0).contains(w)) {
            return Err(KinematicsError::InvalidParams("w_j entries must lie in [0, 1]".into()));
        }
        if !(self.damping.is_finite() && self.damping >= 0.0) {
            return Err(KinematicsError::InvalidParams("damping must be >= 0".into()));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(KinematicsError::InvalidParams("dt must be > 0".into()));
        }
        if !(self.task_gain.is_finite() && self.rest_gain.is_finite() && self.tol > 0.0) {
            return Err(KinematicsError::InvalidParams(
                "gains must be finite and tol positive".into(),
            ));
        }
        Ok(())
    }
}

/// A world-frame point both gaze rays should pass through.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionTarget {
    pub position: Vector3<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl AttentionTarget {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self {
            position: Vector3::new(x, y, z),
            label: None,
        }
    }

    pub fn labeled(position: Vector3<f64>, label: impl Into<String>) -> Self {
        Self {
            position,
            label: Some(label.into()),
        }
    }
}

/// Point on the screen plane, meters, origin at screen center, u left, v up.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ScreenPoint {
    pub u: f64,
    pub v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GazeSolution {
    pub q: JointVector,
    pub gaze_dirs: [Vector3<f64>; 2],
    pub pupil_screen: [ScreenPoint; 2],
    pub converged: bool,
    pub residual: f64,
    pub ticks: usize,
}

impl GazeSolution {
    pub fn into_converged(self) -> Result<Self, KinematicsError> {
        if self.converged {
            Ok(self)
        } else {
            Err(KinematicsError::NotConverged {
                residual: self.residual,
                ticks: self.ticks,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GestureKind {
    /// Tilt axis.
    Nod,
    /// Pan axis.
    Shake,
}

impl GestureKind {
    pub fn joint_index(self) -> usize {
        match self {
            GestureKind::Nod => JointVector::TILT,
            GestureKind::Shake => JointVector::PAN,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GestureSpec {
    pub kind: GestureKind,
    pub amplitude: f64,
    pub frequency: f64,
    pub duration: f64,
    pub tracking_gain: f64,
}

impl GestureSpec {
    pub const DEFAULT_TRACKING_GAIN: f64 = 20.0;

    pub fn new(kind: GestureKind, amplitude: f64, frequency: f64, duration: f64) -> Self {
        Self {
            kind,
            amplitude,
            frequency,
            duration,
            tracking_gain: Self::DEFAULT_TRACKING_GAIN,
        }
    }

    /// The preset the gateway uses for `gesture{nod|shake}` commands.
    pub fn preset(kind: GestureKind) -> Self {
        Self::new(kind, 0.15, 1.2, 1.7)
    }

    pub fn validate(&self) -> Result<(), KinematicsError> {
        if !(self.amplitude > 0.0 && self.frequency > 0.0 && self.duration > 0.0) {
            return Err(KinematicsError::InvalidParams(
                "gesture amplitude, frequency and duration must be > 0".into(),
            ));
        }
        if !(self.tracking_gain.is_finite() && self.tracking_gain > 0.0) {
            return Err(KinematicsError::InvalidParams("tracking_gain must be > 0".into()));
        }
        Ok(())
    }

    /// Offset of the gesture DoF from its base value at `t` seconds.
    pub fn offset(&self, t: f64) -> f64 {
        self.amplitude * (2.0 * std::f64::consts::PI * self.frequency * t).sin()
    }
}
