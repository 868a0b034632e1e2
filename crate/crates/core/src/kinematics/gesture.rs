use nalgebra::{DMatrix, DVector};

use super::{
    constraint_error, jacobian, weighted_solve, AttentionTarget, GestureSpec, HeadGeometry,
    IKParams, JointVector, KinematicsError, Vector6,
};

/// A gesture in progress, anchored at the joint value it started from.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ActiveGesture {
    pub spec: GestureSpec,
    pub base: f64,
}

impl ActiveGesture {
    pub fn start(spec: GestureSpec, q: &JointVector) -> Self {
        let base = q.to_vector()[spec.kind.joint_index()];
        Self { spec, base }
    }

    pub fn reference(&self, t: f64) -> f64 {
        self.base + self.spec.offset(t)
    }

    pub fn finished(&self, t: f64) -> bool {
        t > self.spec.duration
    }
}

/// Gaze-preserving velocities while the gesture DoF follows its reference.
///
/// The gaze constraints get one extra row pinning the gesture joint; the
/// nullspace rest motion is off for the duration, so the eyes counter-rotate
/// against the head to keep both rays on the target.
pub fn apply_gesture(
    q: &JointVector,
    geom: &HeadGeometry,
    target: &AttentionTarget,
    gesture: &ActiveGesture,
    t: f64,
    params: &IKParams,
) -> Result<Vector6, KinematicsError> {
    let e = constraint_error(q, geom, target)?;
    let jac = jacobian(q, geom, target)?;
    let joint = gesture.spec.kind.joint_index();

    let mut aug = DMatrix::zeros(5, 6);
    aug.view_mut((0, 0), (4, 6)).copy_from(&(-jac));
    aug[(4, joint)] = 1.0;

    let mut rhs = DVector::zeros(5);
    rhs.rows_mut(0, 4).copy_from(&(e * params.task_gain));
    rhs[4] = gesture.spec.tracking_gain * (gesture.reference(t) - q.to_vector()[joint]);

    Ok(weighted_solve(&aug, &rhs, &params.w_q, params.damping)?.qdot)
}
