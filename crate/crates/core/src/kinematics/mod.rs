//! Head-eye coordination: a pan/tilt neck carrying a screen with two
//! virtual eyeballs behind it.
//!
//! Frames: the world frame sits at the pan joint base with x forward, y left
//! and z up. Pan rotates about z, tilt about the panned y axis with positive
//! tilt pitching the head up. The head frame is the tilt frame; the screen is
//! the plane `x = screen_distance` in it.
//!
//! Velocities are computed with a damped weighted pseudo-inverse over the
//! per-eye (yaw, pitch) angle error, plus a nullspace pull of the eyes toward
//! the screen normal. The neck carries low weights, so the eyes saccade to
//! the target first and the head follows until it faces the target.

mod gesture;
mod ik;
mod types;

use nalgebra::{Matrix4x6, Rotation3, Vector3, Vector4};
use thiserror::Error;

pub use gesture::{apply_gesture, ActiveGesture};
pub use ik::{ik_step, integrate, rest_velocity, solve_gaze, weighted_solve, WeightedSolve};
pub use types::{
    AttentionTarget, Eye, GazeSolution, GestureKind, GestureSpec, HeadGeometry, IKParams,
    JointVector, ScreenPoint, Vector6,
};

/// Minimum target distance from an eyeball center.
pub const MIN_TARGET_DISTANCE: f64 = 1e-6;
/// Forward gaze component below which the ray misses the screen plane.
pub const MIN_SCREEN_FORWARD: f64 = 0.01;
/// Central difference step for [`jacobian`].
pub const FD_STEP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KinematicsError {
    #[error("attention target is {distance:e} m from an eyeball center")]
    DegenerateTarget { distance: f64 },
    #[error("damped normal matrix is numerically singular (condition {condition:e})")]
    SingularSystem { condition: f64 },
    #[error("{eye:?} eye gaze does not reach the screen plane (forward component {forward})")]
    GazeOffScreenPlane { eye: Eye, forward: f64 },
    #[error("gaze did not converge after {ticks} ticks (residual {residual:e} m)")]
    NotConverged { residual: f64, ticks: usize },
    #[error("invalid IK parameters: {0}")]
    InvalidParams(String),
    #[error("invalid head geometry: {0}")]
    InvalidGeometry(String),
}

/// World orientation of the head frame.
pub fn head_rotation(q: &JointVector) -> Rotation3<f64> {
    Rotation3::from_axis_angle(&Vector3::z_axis(), q.theta_pan)
        * Rotation3::from_axis_angle(&Vector3::y_axis(), -q.theta_tilt)
}

/// Gaze direction in the head frame for eye yaw `x` and pitch `y`.
pub fn gaze_direction(yaw: f64, pitch: f64) -> Vector3<f64> {
    Vector3::new(pitch.cos() * yaw.cos(), pitch.cos() * yaw.sin(), pitch.sin())
}

/// World-frame eyeball centers and unit gaze directions, indexed by [`Eye::index`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EyePoses {
    pub centers: [Vector3<f64>; 2],
    pub gaze_dirs: [Vector3<f64>; 2],
}

pub fn forward_kinematics(q: &JointVector, geom: &HeadGeometry) -> EyePoses {
    let rot = head_rotation(q);
    let mut centers = [Vector3::zeros(); 2];
    let mut gaze_dirs = [Vector3::zeros(); 2];
    for eye in Eye::BOTH {
        let (yaw, pitch) = q.eye_angles(eye);
        centers[eye.index()] = rot * geom.eye_center_head(eye);
        gaze_dirs[eye.index()] = (rot * gaze_direction(yaw, pitch)).normalize();
    }
    EyePoses { centers, gaze_dirs }
}

/// Unit screen normal in the world frame.
pub fn screen_normal(q: &JointVector) -> Vector3<f64> {
    head_rotation(q) * Vector3::x()
}

/// Target direction from an eyeball center, in the head frame (not normalized).
fn target_in_head(q: &JointVector, geom: &HeadGeometry, target: &Vector3<f64>, eye: Eye) -> Vector3<f64> {
    head_rotation(q).inverse() * target - geom.eye_center_head(eye)
}

/// Yaw/pitch of a head-frame direction.
fn direction_angles(u: &Vector3<f64>) -> (f64, f64) {
    (u.y.atan2(u.x), u.z.atan2(u.x.hypot(u.y)))
}

/// Eye angles that make each gaze ray pass through `target`, `[right, left]`.
pub fn desired_eye_angles(
    q: &JointVector,
    geom: &HeadGeometry,
    target: &AttentionTarget,
) -> Result<[(f64, f64); 2], KinematicsError> {
    let mut out = [(0.0, 0.0); 2];
    for eye in Eye::BOTH {
        let u = target_in_head(q, geom, &target.position, eye);
        let distance = u.norm();
        if !(distance >= MIN_TARGET_DISTANCE) {
            return Err(KinematicsError::DegenerateTarget { distance });
        }
        out[eye.index()] = direction_angles(&(u / distance));
    }
    Ok(out)
}

/// Per-eye angle error `(yaw_r, pitch_r, yaw_l, pitch_l)`, zero iff both rays hit the target.
pub fn constraint_error(
    q: &JointVector,
    geom: &HeadGeometry,
    target: &AttentionTarget,
) -> Result<Vector4<f64>, KinematicsError> {
    let desired = desired_eye_angles(q, geom, target)?;
    let (r, l) = (desired[0], desired[1]);
    Ok(Vector4::new(
        r.0 - q.theta_re_x,
        r.1 - q.theta_re_y,
        l.0 - q.theta_le_x,
        l.1 - q.theta_le_y,
    ))
}

/// Canonical Jacobian of [`constraint_error`]: central differences with [`FD_STEP`].
pub fn jacobian(
    q: &JointVector,
    geom: &HeadGeometry,
    target: &AttentionTarget,
) -> Result<Matrix4x6<f64>, KinematicsError> {
    jacobian_fd(q, geom, target, FD_STEP)
}

pub fn jacobian_fd(
    q: &JointVector,
    geom: &HeadGeometry,
    target: &AttentionTarget,
    step: f64,
) -> Result<Matrix4x6<f64>, KinematicsError> {
    let base = q.to_vector();
    let mut jac = Matrix4x6::zeros();
    for k in 0..JointVector::DOF {
        let mut plus = base;
        let mut minus = base;
        plus[k] += step;
        minus[k] -= step;
        let e_plus = constraint_error(&JointVector::from_vector(&plus), geom, target)?;
        let e_minus = constraint_error(&JointVector::from_vector(&minus), geom, target)?;
        jac.set_column(k, &((e_plus - e_minus) / (2.0 * step)));
    }
    Ok(jac)
}

/// Closed-form Jacobian of [`constraint_error`].
///
/// With `R = Rz(pan) Ry(-tilt)` the head-frame target is `R^T p - c`; its
/// derivatives are `-(z_tilt x v)` for pan (z expressed in the head frame)
/// and `y x v` for tilt, pushed through the atan2 derivatives.
pub fn jacobian_analytic(
    q: &JointVector,
    geom: &HeadGeometry,
    target: &AttentionTarget,
) -> Result<Matrix4x6<f64>, KinematicsError> {
    desired_eye_angles(q, geom, target)?;
    let v = head_rotation(q).inverse() * target.position;
    let tilt_rot = Rotation3::from_axis_angle(&Vector3::y_axis(), -q.theta_tilt);
    let z_in_head = tilt_rot.inverse() * Vector3::z();
    let dv_dpan = -z_in_head.cross(&v);
    let dv_dtilt = Vector3::y().cross(&v);

    let mut jac = Matrix4x6::zeros();
    for eye in Eye::BOTH {
        let u = v - geom.eye_center_head(eye);
        let rho2 = u.x * u.x + u.y * u.y;
        let rho = rho2.sqrt();
        let r2 = rho2 + u.z * u.z;
        let row = 2 * eye.index();
        for (col, du) in [(0, dv_dpan), (1, dv_dtilt)] {
            let d_yaw = (u.x * du.y - u.y * du.x) / rho2;
            let d_rho = (u.x * du.x + u.y * du.y) / rho;
            let d_pitch = (rho * du.z - u.z * d_rho) / r2;
            jac[(row, col)] = d_yaw;
            jac[(row + 1, col)] = d_pitch;
        }
        jac[(row, 2 + row)] = -1.0;
        jac[(row + 1, 3 + row)] = -1.0;
    }
    Ok(jac)
}

/// Distance from `point` to the ray `origin + s * dir`, `s >= 0`. `dir` must be unit.
pub fn point_ray_distance(point: &Vector3<f64>, origin: &Vector3<f64>, dir: &Vector3<f64>) -> f64 {
    let rel = point - origin;
    let s = rel.dot(dir).max(0.0);
    (rel - dir * s).norm()
}

/// Worst-eye distance between the target and the gaze rays.
pub fn gaze_residual(q: &JointVector, geom: &HeadGeometry, target: &AttentionTarget) -> f64 {
    let poses = forward_kinematics(q, geom);
    Eye::BOTH
        .iter()
        .map(|e| {
            point_ray_distance(
                &target.position,
                &poses.centers[e.index()],
                &poses.gaze_dirs[e.index()],
            )
        })
        .fold(0.0, f64::max)
}

/// Intersection of each gaze ray with the screen plane, in screen coordinates.
///
/// The kinematic position is returned unclamped; see [`clamp_to_screen`].
pub fn screen_pupil_position(
    q: &JointVector,
    geom: &HeadGeometry,
) -> Result<[ScreenPoint; 2], KinematicsError> {
    let mut out = [ScreenPoint::default(); 2];
    for eye in Eye::BOTH {
        let (yaw, pitch) = q.eye_angles(eye);
        let g = gaze_direction(yaw, pitch);
        if g.x <= MIN_SCREEN_FORWARD {
            return Err(KinematicsError::GazeOffScreenPlane { eye, forward: g.x });
        }
        let c = geom.eye_center_head(eye);
        let t = geom.eye_depth / g.x;
        out[eye.index()] = ScreenPoint {
            u: c.y + t * g.y,
            v: c.z + t * g.z,
        };
    }
    Ok(out)
}

/// Render-layer clamp keeping the whole iris disc on the screen.
pub fn clamp_to_screen(p: ScreenPoint, geom: &HeadGeometry) -> ScreenPoint {
    let (max_u, max_v) = geom.pupil_bounds();
    ScreenPoint {
        u: p.u.clamp(-max_u, max_u),
        v: p.v.clamp(-max_v, max_v),
    }
}
