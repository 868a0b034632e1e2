//! Gaze-based spatial referencing for a desk-scale robot head.
//!
//! * [`kinematics`] drives a pan/tilt neck and two virtual eyes so both gaze
//!   rays meet an attention target.
//! * [`compositor`] crops, scales and flips the attended camera region onto
//!   the pupils.
//! * [`renderer`] draws the eye screen and its expression states.
//! * [`scene`] holds the table scene, a synthetic overhead camera and the
//!   interruptible pick-and-place phase machine.
//! * [`scenario`] encodes instructions, injected misinterpretations, trial
//!   blocks and interruption metrics.
//! * [`batch`] runs the data-parallel workloads, on rayon when the
//!   `parallel` feature is on.

pub mod batch;
pub mod compositor;
pub mod kinematics;
pub mod renderer;
pub mod scenario;
pub mod scene;
