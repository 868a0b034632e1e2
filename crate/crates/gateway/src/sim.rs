//! The tick loop binding kinematics, scene, scenario, compositor and renderer.

use std::collections::VecDeque;
use std::io::Cursor;
use std::path::{Path, PathBuf};

use base64::Engine as _;
use image::RgbaImage;
use mirroreyes::batch::Execution;
use mirroreyes::compositor::{apply_filters, compute_crop, extract_flip, PixelSize, RegionOfInterest};
use mirroreyes::kinematics::{
    apply_gesture, forward_kinematics, gaze_residual, ik_step, integrate, screen_normal, screen_pupil_position,
    ActiveGesture, AttentionTarget, GestureSpec, IKParams, JointVector, ScreenPoint, Vector6,
};
use mirroreyes::renderer::{render_eyes, step_expression, EyeFrame, ExpressionEvent, ExpressionMode, ExpressionState, MirrorInput};
use mirroreyes::scenario::{
    is_stop_utterance, tick_time, Condition, ParseMode, ScenarioScript, TrialMetrics, TrialRun, TrialSpec,
};
use mirroreyes::scene::{render_camera_window, roi_for, ActionEventKind, ArmPhase, Scene};
use nalgebra::Vector3;

use crate::config::SimConfig;
use crate::protocol::{AttentionState, Command, EntityPose, HeadPose, StateSnapshot, TrialStatus};

/// Side of the square region mirrored around a bare point target, meters.
const POINT_REGION: f64 = 0.15;

#[derive(Debug, Clone)]
struct LoadedScenario {
    script: ScenarioScript,
    order: Vec<TrialSpec>,
    used: Vec<bool>,
}

pub struct Simulation {
    config: SimConfig,
    ik: IKParams,
    scenario_dir: Option<PathBuf>,
    tick: u64,
    q: JointVector,
    target: AttentionTarget,
    target_entity: Option<String>,
    world: Scene,
    gesture: Option<(ActiveGesture, f64)>,
    expression: ExpressionState,
    mirror_on: bool,
    scenario: Option<LoadedScenario>,
    trial: Option<TrialRun>,
    completed: Vec<TrialMetrics>,
    queue: VecDeque<Command>,
    last_attention: Option<String>,
    pupil_images: Option<[RgbaImage; 2]>,
    eye_frame: Option<EyeFrame>,
}

fn arr(v: &Vector3<f64>) -> [f64; 3] {
    [v.x, v.y, v.z]
}

fn encode_png(img: &RgbaImage) -> Option<String> {
    let mut buf = Cursor::new(Vec::new());
    img.write_to(&mut buf, image::ImageFormat::Png).ok()?;
    Some(base64::engine::general_purpose::STANDARD.encode(buf.into_inner()))
}

impl Simulation {
    pub fn new(config: SimConfig) -> Self {
        let ik = IKParams {
            dt: config.dt(),
            ..config.ik
        };
        let world = config.scene.clone();
        let target = world
            .get(Scene::PERSON)
            .map(|o| AttentionTarget::labeled(o.position, Scene::PERSON))
            .unwrap_or_else(|_| AttentionTarget::new(1.5, 0.0, 0.0));
        Self {
            ik,
            scenario_dir: None,
            tick: 0,
            q: JointVector::zero(),
            target_entity: target.label.clone(),
            target,
            world,
            gesture: None,
            expression: ExpressionState::default(),
            mirror_on: false,
            scenario: None,
            trial: None,
            completed: Vec::new(),
            queue: VecDeque::new(),
            last_attention: None,
            pupil_images: None,
            eye_frame: None,
            config,
        }
    }

    /// Directory that relative `load_scenario` paths resolve against.
    pub fn with_scenario_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.scenario_dir = Some(dir.into());
        self
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn tick_count(&self) -> u64 {
        self.tick
    }

    pub fn sim_time(&self) -> f64 {
        tick_time(self.tick, self.config.tick_rate)
    }

    pub fn completed(&self) -> &[TrialMetrics] {
        &self.completed
    }

    pub fn trial_active(&self) -> bool {
        self.trial.is_some()
    }

    /// Trials of the loaded scenario not yet requested, in execution order.
    pub fn pending_trials(&self) -> Vec<TrialSpec> {
        self.scenario.as_ref().map_or_else(Vec::new, |s| {
            s.order
                .iter()
                .zip(&s.used)
                .filter(|(_, used)| !**used)
                .map(|(t, _)| t.clone())
                .collect()
        })
    }

    pub fn eye_frame(&self) -> Option<&EyeFrame> {
        self.eye_frame.as_ref()
    }

    pub fn pupil_images(&self) -> Option<&[RgbaImage; 2]> {
        self.pupil_images.as_ref()
    }

    pub fn scene(&self) -> &Scene {
        self.trial.as_ref().map_or(&self.world, |t| &t.scene)
    }

    /// Queues a command for the start of the next tick.
    pub fn enqueue(&mut self, cmd: Command) {
        self.queue.push_back(cmd);
    }

    fn condition(&self) -> Condition {
        if self.mirror_on {
            Condition::MirrorEyes
        } else {
            Condition::EyesOnly
        }
    }

    fn set_mirror(&mut self, on: bool) {
        self.mirror_on = on;
        let mode = if on { ExpressionMode::Mirror } else { ExpressionMode::Neutral };
        self.expression.set_mode(mode);
    }

    fn load_script(&mut self, path: Option<String>, inline: Option<ScenarioScript>) -> Result<(), String> {
        let script = match (path, inline) {
            (_, Some(script)) => script,
            (Some(path), None) => {
                let p = Path::new(&path);
                let resolved = match &self.scenario_dir {
                    Some(dir) if p.is_relative() => dir.join(p),
                    _ => p.to_path_buf(),
                };
                let text = std::fs::read_to_string(&resolved).map_err(|e| format!("{}: {e}", resolved.display()))?;
                serde_json::from_str(&text).map_err(|e| format!("{}: {e}", resolved.display()))?
            }
            (None, None) => return Err("load_scenario needs `path` or `inline`".into()),
        };
        script.validate().map_err(|e| e.to_string())?;
        let order = script.ordered_trials();
        self.world = script.scene.clone().unwrap_or_else(|| self.config.scene.clone());
        self.set_mirror(script.condition.mirror_enabled());
        self.scenario = Some(LoadedScenario {
            used: vec![false; order.len()],
            order,
            script,
        });
        Ok(())
    }

    fn start_trial(&mut self, text: &str) -> Result<(), String> {
        let norm = |s: &str| s.trim().trim_end_matches(['.', '!']).to_lowercase();
        let (spec, mode, scene) = match self.scenario.as_mut() {
            Some(s) => {
                let slot = s
                    .order
                    .iter()
                    .zip(s.used.iter_mut())
                    .find(|(t, used)| !**used && norm(&t.instruction) == norm(text));
                match slot {
                    Some((t, used)) => {
                        *used = true;
                        (t.clone(), ParseMode::Strict, s.script.scene())
                    }
                    None => (TrialSpec::new(text), ParseMode::Lenient, self.world.clone()),
                }
            }
            None => (TrialSpec::new(text), ParseMode::Lenient, self.world.clone()),
        };
        let run = TrialRun::new(
            self.completed.len(),
            self.condition(),
            &spec,
            scene,
            mode,
            self.config.tick_rate,
            self.config.timeline,
        )
        .map_err(|e| e.to_string())?;
        self.trial = Some(run);
        Ok(())
    }

    fn apply(&mut self, cmd: Command, warnings: &mut Vec<String>, expr: &mut Vec<ExpressionEvent>) {
        match cmd {
            Command::SetTarget { x, y, z, entity_id } => match (entity_id, x, y, z) {
                (Some(id), None, None, None) => match self.scene().get(&id) {
                    Ok(obj) => {
                        self.target = AttentionTarget::labeled(obj.position, id.clone());
                        self.target_entity = Some(id);
                    }
                    Err(e) => warnings.push(e.to_string()),
                },
                (None, Some(x), Some(y), Some(z)) if x.is_finite() && y.is_finite() && z.is_finite() => {
                    self.target = AttentionTarget::new(x, y, z);
                    self.target_entity = None;
                }
                _ => warnings.push("set_target needs finite x, y, z or an entity_id".into()),
            },
            Command::Request { text } => {
                if self.trial.is_some() {
                    warnings.push("a trial is already running; request ignored".into());
                } else if is_stop_utterance(&text, &self.config.stop_keywords) {
                    warnings.push("no running action to interrupt".into());
                } else {
                    match self.start_trial(&text) {
                        Ok(()) => expr.push(ExpressionEvent::ProcessingOff),
                        Err(e) => warnings.push(e),
                    }
                }
            }
            Command::Stop { keyword, at } => {
                if !is_stop_utterance(&keyword, &self.config.stop_keywords) {
                    warnings.push(format!("`{keyword}` is not an interrupt keyword"));
                } else if let Some(trial) = self.trial.as_mut() {
                    let t = at.unwrap_or_else(|| trial.time());
                    if t.is_finite() {
                        trial.request_stop(t);
                    } else {
                        warnings.push("stop time must be finite".into());
                    }
                } else {
                    warnings.push("stop outside a running action ignored".into());
                }
            }
            Command::Gesture { kind } => {
                let spec = GestureSpec::preset(kind);
                self.gesture = Some((ActiveGesture::start(spec, &self.q), self.sim_time()));
            }
            Command::SetMirror { on } => self.set_mirror(on),
            Command::LoadScenario { path, inline } => {
                if self.trial.is_some() {
                    warnings.push("cannot load a scenario during a trial".into());
                } else if let Err(e) = self.load_script(path, inline) {
                    warnings.push(e);
                }
            }
            Command::SetExpression { mode } => {
                if mode == ExpressionMode::Mirror {
                    self.mirror_on = true;
                }
                self.expression.set_mode(mode);
            }
        }
    }

    fn mirror_images(&self, attention: Option<&str>) -> Result<[RgbaImage; 2], String> {
        let cam = &self.config.camera;
        let scene = self.scene();
        let roi = match attention {
            Some(id) => roi_for(scene, cam, id).map_err(|e| e.to_string())?,
            None => {
                let p = cam.to_camera(&self.target.position);
                let (x, y) = cam.project_camera_point(&p).map_err(|e| e.to_string())?;
                let side = cam.focal * POINT_REGION / p.z;
                RegionOfInterest::new(x, y, side, side)
            }
        };
        let g = &self.config.geometry;
        let side = (2.0 * g.pupil_radius * g.pixels_per_meter).round().max(1.0) as u32;
        let crop = compute_crop(cam.size(), &roi, PixelSize::square(side)).map_err(|e| e.to_string())?;
        let frame = render_camera_window(scene, cam, (crop.tl_x, crop.tl_y), crop.crop, self.tick, Execution::auto());
        let img = extract_flip(&frame, &crop.windowed()).map_err(|e| e.to_string())?;
        let img = if roi.blur_on_mirror {
            apply_filters(&img, self.config.filters.blur_radius, 1.0)
        } else {
            img
        };
        Ok([img.clone(), img])
    }

    /// Advances one tick and reports the resulting state.
    pub fn step(&mut self) -> StateSnapshot {
        let dt = self.config.dt();
        let sim_time = self.sim_time();
        let mut warnings = Vec::new();
        let mut expr_events = Vec::new();

        while let Some(cmd) = self.queue.pop_front() {
            self.apply(cmd, &mut warnings, &mut expr_events);
        }

        let mut events = Vec::new();
        let mut finished = Vec::new();
        let mut trial_status = None;
        let mut attention_entity = self.target_entity.clone();
        if let Some(trial) = self.trial.as_mut() {
            let t = trial.time();
            let step = trial.step();
            for e in &step.events {
                match e.kind {
                    ActionEventKind::Stopped => expr_events.push(ExpressionEvent::ProcessingOn),
                    ActionEventKind::Completed => expr_events.push(ExpressionEvent::Success),
                    _ => {}
                }
            }
            events = step.events;
            attention_entity = Some(step.attention.clone());
            if let Ok(obj) = trial.scene.get(&step.attention) {
                self.target = AttentionTarget::labeled(obj.position, step.attention.clone());
            }
            trial_status = Some(TrialStatus {
                index: trial.index,
                instruction: trial.instruction.clone(),
                pick_id: trial.planned.pick_id.clone(),
                place_id: trial.planned.place_id.clone(),
                error_class: trial.planned.error_class,
                t,
                phase: trial.action.phase,
                held_object: trial.action.held_object.clone(),
                stop_time: trial.action.stop_time,
            });
            if trial.is_finished() {
                let metrics = trial.metrics();
                self.world = trial.scene.clone();
                self.target_entity = Some(step.attention);
                self.completed.push(metrics.clone());
                finished.push(metrics);
                self.trial = None;
            }
        }

        if attention_entity != self.last_attention {
            if let Some(id) = &attention_entity {
                expr_events.push(ExpressionEvent::Registration(id.clone()));
            }
            self.last_attention = attention_entity.clone();
        }

        let gesture_t = self.gesture.map(|(_, start)| sim_time - start);
        if let (Some((g, _)), Some(t)) = (self.gesture, gesture_t) {
            if g.finished(t) {
                self.gesture = None;
            }
        }
        let qdot = match (self.gesture, gesture_t) {
            (Some((g, _)), Some(t)) => apply_gesture(&self.q, &self.config.geometry, &self.target, &g, t, &self.ik),
            _ => ik_step(&self.q, &self.config.geometry, &self.target, &self.ik),
        };
        let qdot = qdot.unwrap_or_else(|e| {
            warnings.push(format!("gaze: {e}"));
            Vector6::zeros()
        });
        self.q = integrate(&self.q, &qdot, dt, &self.config.geometry);

        self.pupil_images = if self.mirror_on {
            match self.mirror_images(attention_entity.as_deref()) {
                Ok(imgs) => Some(imgs),
                Err(e) => {
                    warnings.push(format!("mirror: {e}"));
                    None
                }
            }
        } else {
            None
        };

        self.expression = step_expression(&self.expression, dt, &expr_events);

        let geom = &self.config.geometry;
        let pupils = screen_pupil_position(&self.q, geom).unwrap_or_else(|e| {
            warnings.push(format!("pupils: {e}"));
            [ScreenPoint::default(); 2]
        });
        let mirror_input = self.pupil_images.clone().map(|images| MirrorInput {
            images,
            filters: self.config.filters,
        });
        let frame = render_eyes(&pupils, &self.expression, mirror_input.as_ref(), geom).or_else(|e| {
            warnings.push(format!("render: {e}"));
            let mut plain = self.expression.clone();
            plain.mode = ExpressionMode::Neutral;
            plain.overrides = [None, None];
            render_eyes(&pupils, &plain, None, geom)
        });
        let pupils_px = match &frame {
            Ok(f) => f.pupil_centers_px.map(|(x, y)| [x, y]),
            Err(_) => [[0.0; 2]; 2],
        };
        self.eye_frame = frame.ok();

        let poses = forward_kinematics(&self.q, geom);
        let overlays = match (&self.pupil_images, self.config.snapshot_overlays) {
            (Some([r, l]), true) => encode_png(r).zip(encode_png(l)).map(|(a, b)| [a, b]),
            _ => None,
        };
        let snapshot = StateSnapshot {
            tick: self.tick,
            sim_time,
            q: self.q,
            pupils_px,
            expression: self.expression.mode,
            mirror_enabled: self.mirror_on,
            condition: self.scenario.as_ref().map(|s| s.script.condition),
            attention: AttentionState {
                entity_id: attention_entity,
                position: arr(&self.target.position),
                residual: gaze_residual(&self.q, geom, &self.target),
            },
            head: HeadPose {
                screen_normal: arr(&screen_normal(&self.q)),
                eye_centers: poses.centers.map(|c| arr(&c)),
                gaze_dirs: poses.gaze_dirs.map(|g| arr(&g)),
            },
            trial: trial_status,
            entities: self
                .scene()
                .objects
                .iter()
                .map(|o| EntityPose {
                    id: o.id.clone(),
                    position: arr(&o.position),
                })
                .collect(),
            overlays,
            events,
            finished,
            warnings,
        };
        self.tick += 1;
        snapshot
    }

    /// Phase of the running trial.
    pub fn phase(&self) -> Option<ArmPhase> {
        self.trial.as_ref().map(|t| t.action.phase)
    }
}
