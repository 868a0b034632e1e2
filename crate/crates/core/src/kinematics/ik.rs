use nalgebra::{DMatrix, DVector, Matrix6};

use super::{
    constraint_error, forward_kinematics, gaze_residual, jacobian, screen_pupil_position,
    AttentionTarget, GazeSolution, HeadGeometry, IKParams, JointVector, KinematicsError,
    ScreenPoint, Vector6,
};

/// Normal matrices with a worse condition number are rejected.
pub const MAX_CONDITION: f64 = 1e12;

/// Result of one damped weighted pseudo-inverse solve.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSolve {
    /// `W Jᵀ (J W Jᵀ + λ² I)⁻¹ rhs`
    pub qdot: Vector6,
    /// `I - W Jᵀ (J W Jᵀ + λ² I)⁻¹ J`
    pub projector: Matrix6<f64>,
}

/// Damped weighted pseudo-inverse of an `m x 6` constraint system.
pub fn weighted_solve(
    jac: &DMatrix<f64>,
    rhs: &DVector<f64>,
    w_q: &[f64; 6],
    damping: f64,
) -> Result<WeightedSolve, KinematicsError> {
    assert_eq!(jac.ncols(), JointVector::DOF);
    assert_eq!(jac.nrows(), rhs.len());
    let rows = jac.nrows();
    let weights = DMatrix::from_diagonal(&DVector::from_column_slice(w_q));
    let w_jt = &weights * jac.transpose();
    let normal = jac * &w_jt + DMatrix::identity(rows, rows) * (damping * damping);

    let eigen = normal.clone().symmetric_eigen();
    let max = eigen.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let min = eigen.eigenvalues.iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(KinematicsError::SingularSystem { condition });
    }
    let inverse = normal
        .cholesky()
        .ok_or(KinematicsError::SingularSystem { condition })?
        .inverse();

    let gain = w_jt * inverse;
    let qdot = &gain * rhs;
    let projector = DMatrix::identity(6, 6) - &gain * jac;
    Ok(WeightedSolve {
        qdot: Vector6::from_column_slice(qdot.as_slice()),
        projector: Matrix6::from_column_slice(projector.as_slice()),
    })
}

/// Nullspace velocity pulling both eyes toward the screen normal.
pub fn rest_velocity(q: &JointVector, rest_gain: f64) -> Vector6 {
    Vector6::from([
        0.0,
        0.0,
        -rest_gain * q.theta_re_x,
        -rest_gain * q.theta_re_y,
        -rest_gain * q.theta_le_x,
        -rest_gain * q.theta_le_y,
    ])
}

/// Joint velocities for one control tick.
///
/// The solve runs on the task Jacobian `-∂e/∂q` (the gaze-ray Jacobian), so a
/// positive gain drives `e` toward zero.
pub fn ik_step(
    q: &JointVector,
    geom: &HeadGeometry,
    target: &AttentionTarget,
    params: &IKParams,
) -> Result<Vector6, KinematicsError> {
    let e = constraint_error(q, geom, target)?;
    let jac = jacobian(q, geom, target)?;
    let jac = -DMatrix::from_column_slice(4, 6, jac.as_slice());
    let rhs = DVector::from_column_slice((e * params.task_gain).as_slice());
    let solve = weighted_solve(&jac, &rhs, &params.w_q, params.damping)?;
    let gate = Matrix6::from_diagonal(&Vector6::from(params.w_j));
    Ok(solve.qdot + solve.projector * gate * rest_velocity(q, params.rest_gain))
}

/// Euler step; only the physical neck joints saturate.
pub fn integrate(q: &JointVector, qdot: &Vector6, dt: f64, geom: &HeadGeometry) -> JointVector {
    let mut next = JointVector::from_vector(&(q.to_vector() + qdot * dt));
    next.theta_pan = next.theta_pan.clamp(-geom.pan_limit, geom.pan_limit);
    next.theta_tilt = next.theta_tilt.clamp(-geom.tilt_limit, geom.tilt_limit);
    next
}

fn solution(q: JointVector, geom: &HeadGeometry, residual: f64, converged: bool, ticks: usize) -> GazeSolution {
    let pupil_screen = screen_pupil_position(&q, geom).unwrap_or([ScreenPoint::default(); 2]);
    GazeSolution {
        q,
        gaze_dirs: forward_kinematics(&q, geom).gaze_dirs,
        pupil_screen,
        converged,
        residual,
        ticks,
    }
}

/// Runs the controller from `q0` until both rays pass within `tol` of the target.
///
/// A run that exhausts `max_ticks` returns the lowest-residual state seen with
/// `converged == false`; [`GazeSolution::into_converged`] turns that into an error.
pub fn solve_gaze(
    q0: &JointVector,
    geom: &HeadGeometry,
    target: &AttentionTarget,
    params: &IKParams,
) -> Result<GazeSolution, KinematicsError> {
    params.validate()?;
    let mut q = *q0;
    let mut best = (q, f64::INFINITY, 0);
    for tick in 0..=params.max_ticks {
        // Degenerate targets surface here rather than as a NaN residual.
        constraint_error(&q, geom, target)?;
        let residual = gaze_residual(&q, geom, target);
        if residual <= params.tol {
            return Ok(solution(q, geom, residual, true, tick));
        }
        if residual < best.1 {
            best = (q, residual, tick);
        }
        if tick == params.max_ticks {
            break;
        }
        let qdot = ik_step(&q, geom, target, params)?;
        q = integrate(&q, &qdot, params.dt, geom);
    }
    Ok(solution(best.0, geom, best.1, false, params.max_ticks))
}
