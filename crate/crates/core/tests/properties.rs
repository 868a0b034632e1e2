use mirroreyes::batch::{solve_gaze_batch, Execution};
use mirroreyes::compositor::{compute_crop, flip_horizontal, PixelSize, RegionOfInterest};
use mirroreyes::kinematics::{
    constraint_error, desired_eye_angles, gaze_residual, screen_pupil_position, solve_gaze, AttentionTarget, Eye,
    HeadGeometry, IKParams, JointVector,
};
use mirroreyes::scenario::{
    classify, ecdf, run_block, summarize, Classification, Condition, ErrorClass, ScenarioScript,
};
use mirroreyes::scene::{ActionEventKind, Timeline};
use image::{Rgba, RgbaImage};
use proptest::prelude::*;

fn head_state() -> impl Strategy<Value = (f64, f64)> {
    (-0.8f64..0.8, -0.4f64..0.4)
}

fn frontal_target() -> impl Strategy<Value = AttentionTarget> {
    (0.5f64..2.5, -1.0f64..1.0, -0.5f64..0.5).prop_map(|(x, y, z)| AttentionTarget::new(x, y, z))
}

fn with_desired_eyes(pan: f64, tilt: f64, geom: &HeadGeometry, target: &AttentionTarget) -> Option<JointVector> {
    let mut q = JointVector {
        theta_pan: pan,
        theta_tilt: tilt,
        ..JointVector::zero()
    };
    let angles = desired_eye_angles(&q, geom, target).ok()?;
    for eye in Eye::BOTH {
        let (yaw, pitch) = angles[eye.index()];
        q.set_eye_angles(eye, yaw, pitch);
    }
    Some(q)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn zero_error_means_rays_meet_target((pan, tilt) in head_state(), target in frontal_target(), delta in 1e-3f64..0.2, eye in 0usize..2) {
        let geom = HeadGeometry::default();
        let Some(q) = with_desired_eyes(pan, tilt, &geom, &target) else { return Ok(()); };
        let e = constraint_error(&q, &geom, &target).unwrap();
        prop_assert!(e.amax() < 1e-12);
        prop_assert!(gaze_residual(&q, &geom, &target) < 1e-9);

        let mut off = q;
        let eye = Eye::BOTH[eye];
        let (yaw, pitch) = q.eye_angles(eye);
        off.set_eye_angles(eye, yaw + delta, pitch);
        prop_assert!(constraint_error(&off, &geom, &target).unwrap().amax() > 0.0);
        prop_assert!(gaze_residual(&off, &geom, &target) > 1e-6);
    }

    #[test]
    fn symmetric_target_gives_mirrored_pupils(x in 0.6f64..2.5, z in -0.4f64..0.4) {
        let geom = HeadGeometry::default();
        let params = IKParams::default();
        let sol = solve_gaze(&JointVector::zero(), &geom, &AttentionTarget::new(x, 0.0, z), &params).unwrap();
        prop_assert!(sol.converged);
        prop_assert!(sol.q.theta_pan.abs() < 1e-9);
        let p = screen_pupil_position(&sol.q, &geom).unwrap();
        prop_assert!((p[0].u + p[1].u).abs() < 1e-9);
        prop_assert!((p[0].v - p[1].v).abs() < 1e-9);
    }

    #[test]
    fn crop_stays_inside_frame(
        fw in 1u32..2500, fh in 1u32..2500,
        fx in 0.0f64..1.0, fy in 0.0f64..1.0,
        rw in 0.5f64..4000.0, rh in 0.5f64..4000.0,
        tw in 1u32..200, th in 1u32..200,
    ) {
        let roi = RegionOfInterest::new(fx * fw as f64 * 0.999, fy * fh as f64 * 0.999, rw, rh);
        let c = compute_crop(PixelSize::new(fw, fh), &roi, PixelSize::new(tw, th)).unwrap();
        prop_assert!(c.crop.width >= 1 && c.crop.height >= 1);
        prop_assert!(c.tl_x + c.crop.width <= fw);
        prop_assert!(c.tl_y + c.crop.height <= fh);
        prop_assert!(c.scale > 0.0);
        if !c.region_exceeds_frame {
            prop_assert!(c.scale <= 1.0);
        }
    }

    #[test]
    fn flip_is_an_involution(w in 1u32..40, h in 1u32..40, seed in any::<u64>()) {
        let img = RgbaImage::from_fn(w, h, |x, y| {
            let v = seed.wrapping_mul(6364136223846793005).wrapping_add((x * 131 + y * 7919) as u64);
            Rgba((v >> 24).to_le_bytes()[..4].try_into().unwrap())
        });
        prop_assert_eq!(flip_horizontal(&flip_horizontal(&img)), img);
    }

    #[test]
    fn ecdf_is_a_distribution(values in prop::collection::vec(0.0f64..30.0, 1..60)) {
        let points = ecdf(&values);
        prop_assert!(points.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 <= w[1].1));
        prop_assert_eq!(points.last().unwrap().1, 1.0);
        let s = summarize(&values).unwrap();
        prop_assert!(s.min <= s.mean + 1e-12 && s.mean <= s.max + 1e-12);
        prop_assert!(s.sd >= 0.0);
    }

    #[test]
    fn nominal_event_times_ignore_tick_rate(rate in 30.0f64..240.0, seed in 0u64..1000) {
        let script = ScenarioScript::standard_block(Condition::EyesOnly, seed);
        let timeline = Timeline::default();
        let reference = run_block(&script, &[], 50.0, &timeline).unwrap();
        let other = run_block(&script, &[], rate, &timeline).unwrap();
        for (a, b) in reference.iter().zip(&other) {
            prop_assert_eq!(&a.events, &b.events);
        }
    }

    #[test]
    fn stop_time_recorded_exactly(stop in 0.0f64..19.9, rate in 30.0f64..120.0, pick in 0usize..6) {
        let mut script = ScenarioScript::instruction_set(Condition::MirrorEyes);
        script.trials = vec![script.trials[pick].clone()];
        let timeline = Timeline::default();
        let m = run_block(&script, &[Some(stop)], rate, &timeline).unwrap().remove(0);
        prop_assert_eq!(m.stop_time, Some(stop));
        let halted = m.halted_at.unwrap();
        let held = m.events.iter().any(|e| e.kind == ActionEventKind::PlacedDown);
        let lag = if held { timeline.place_down_duration } else { 0.0 };
        prop_assert!(halted >= stop + lag - 1e-9 && halted <= stop + lag + 1.0 / rate + 1e-9);
        prop_assert_eq!(held, stop >= timeline.grasped && stop < timeline.released);
        prop_assert!(m.events.iter().filter(|e| e.kind != ActionEventKind::PlacedDown).all(|e| e.t <= stop));
    }
}

#[test]
fn classification_soundness() {
    for class in [ErrorClass::None, ErrorClass::Step1, ErrorClass::Step2] {
        for stop in [None, Some(3.0)] {
            let c = classify(class, stop);
            assert_eq!(c == Classification::ErrorMissed, class != ErrorClass::None && stop.is_none());
            assert_eq!(c == Classification::FalseStop, class == ErrorClass::None && stop.is_some());
        }
    }
}

#[test]
fn batch_matches_single_solves() {
    let geom = HeadGeometry::default();
    let params = IKParams::default();
    let targets: Vec<_> = (0..16).map(|i| AttentionTarget::new(1.0 + 0.05 * i as f64, 0.3, -0.1)).collect();
    let batch = solve_gaze_batch(&JointVector::zero(), &geom, &targets, &params, Execution::auto());
    for (t, b) in targets.iter().zip(batch) {
        assert_eq!(b.unwrap(), solve_gaze(&JointVector::zero(), &geom, t, &params).unwrap());
    }
}
