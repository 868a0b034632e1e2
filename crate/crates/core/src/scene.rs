//! Table scene, synthetic overhead camera and the timed pick-and-place
//! phase machine with interruption.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::batch::Execution;
use crate::compositor::{CameraFrame, PixelSize, RegionOfInterest};

pub const TABLE_COLOR: [u8; 4] = [128, 124, 116, 255];
pub const TABLE_HEIGHT: f64 = -0.3;
/// Points closer than this to the image plane are not projected.
pub const MIN_DEPTH: f64 = 0.1;
const LIFT_HEIGHT: f64 = 0.12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SceneError {
    #[error("point has depth {depth} m in front of the camera")]
    BehindCamera { depth: f64 },
    #[error("unknown entity `{0}`")]
    UnknownEntity(String),
    #[error("invalid scene: {0}")]
    InvalidScene(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityLabel {
    RedBottle,
    SprayCan,
    RedPlate,
    WhitePlate,
    Person,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Shape {
    Circle { radius: f64 },
    Ring { outer: f64, inner: f64 },
    Ellipse { half_width: f64, half_height: f64 },
}

impl Shape {
    fn half_extent(&self) -> (f64, f64) {
        match *self {
            Shape::Circle { radius } => (radius, radius),
            Shape::Ring { outer, .. } => (outer, outer),
            Shape::Ellipse { half_width, half_height } => (half_width, half_height),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: String,
    pub label: EntityLabel,
    pub color: [u8; 3],
    pub shape: Shape,
    pub position: Vector3<f64>,
    pub graspable: bool,
    pub blur_on_mirror: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub objects: Vec<SceneObject>,
}

impl Default for Scene {
    fn default() -> Self {
        Self::desk_layout()
    }
}

impl Scene {
    pub const BOTTLE: &'static str = "bottle";
    pub const CAN: &'static str = "can";
    pub const RED_PLATE: &'static str = "red_plate";
    pub const WHITE_PLATE: &'static str = "white_plate";
    pub const PERSON: &'static str = "person";

    pub fn empty() -> Self {
        Self { objects: Vec::new() }
    }

    /// Two graspables in front of two plates, a person across the table.
    pub fn desk_layout() -> Self {
        Self {
            objects: vec![
                Self::object(EntityLabel::RedBottle, Vector3::new(0.45, 0.10, TABLE_HEIGHT)),
                Self::object(EntityLabel::SprayCan, Vector3::new(0.45, -0.10, TABLE_HEIGHT)),
                Self::object(EntityLabel::RedPlate, Vector3::new(0.55, 0.25, TABLE_HEIGHT)),
                Self::object(EntityLabel::WhitePlate, Vector3::new(0.55, -0.25, TABLE_HEIGHT)),
                Self::object(EntityLabel::Person, Vector3::new(1.5, 0.0, 0.25)),
            ],
        }
    }

    /// Canonical object for a label.
    pub fn object(label: EntityLabel, position: Vector3<f64>) -> SceneObject {
        let (id, color, shape) = match label {
            EntityLabel::RedBottle => (Self::BOTTLE, [200, 20, 20], Shape::Circle { radius: 0.035 }),
            EntityLabel::SprayCan => (Self::CAN, [120, 40, 170], Shape::Circle { radius: 0.03 }),
            EntityLabel::RedPlate => (Self::RED_PLATE, [225, 80, 95], Shape::Ring { outer: 0.10, inner: 0.075 }),
            EntityLabel::WhitePlate => (Self::WHITE_PLATE, [245, 245, 245], Shape::Ring { outer: 0.10, inner: 0.075 }),
            EntityLabel::Person => (
                Self::PERSON,
                [60, 100, 190],
                Shape::Ellipse {
                    half_width: 0.22,
                    half_height: 0.45,
                },
            ),
        };
        SceneObject {
            id: id.to_string(),
            label,
            color,
            shape,
            position,
            graspable: matches!(label, EntityLabel::RedBottle | EntityLabel::SprayCan),
            blur_on_mirror: label == EntityLabel::Person,
        }
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        for (i, obj) in self.objects.iter().enumerate() {
            if self.objects[..i].iter().any(|o| o.id == obj.id || o.label == obj.label) {
                return Err(SceneError::InvalidScene(format!("duplicate entity `{}`", obj.id)));
            }
            if obj.graspable && matches!(obj.label, EntityLabel::RedPlate | EntityLabel::WhitePlate) {
                return Err(SceneError::InvalidScene("plates are not graspable".into()));
            }
            if obj.label == EntityLabel::Person && !obj.blur_on_mirror {
                return Err(SceneError::InvalidScene("the person must be blurred on the mirror".into()));
            }
            if !obj.position.iter().all(|v| v.is_finite()) {
                return Err(SceneError::InvalidScene(format!("`{}` has a non-finite position", obj.id)));
            }
        }
        Ok(())
    }

    pub fn get(&self, id: &str) -> Result<&SceneObject, SceneError> {
        self.objects
            .iter()
            .find(|o| o.id == id)
            .ok_or_else(|| SceneError::UnknownEntity(id.to_string()))
    }

    pub fn set_position(&mut self, id: &str, position: Vector3<f64>) -> Result<(), SceneError> {
        let obj = self
            .objects
            .iter_mut()
            .find(|o| o.id == id)
            .ok_or_else(|| SceneError::UnknownEntity(id.to_string()))?;
        obj.position = position;
        Ok(())
    }
}

/// Pinhole camera; camera axes are x right, y down, z along the view direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticCamera {
    pub position: Vector3<f64>,
    /// Downward pitch of the view direction from the world x axis.
    pub pitch_down: f64,
    pub focal: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl Default for SyntheticCamera {
    fn default() -> Self {
        Self {
            position: Vector3::new(0.0, 0.0, 1.2),
            pitch_down: std::f64::consts::FRAC_PI_4,
            focal: 800.0,
            cx: 960.0,
            cy: 540.0,
            width: 1920,
            height: 1080,
        }
    }
}

impl SyntheticCamera {
    pub fn size(&self) -> PixelSize {
        PixelSize::new(self.width, self.height)
    }

    fn axes(&self) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>) {
        let forward = Vector3::new(self.pitch_down.cos(), 0.0, -self.pitch_down.sin());
        let right = Vector3::new(0.0, -1.0, 0.0);
        let down = forward.cross(&right);
        (right, down, forward)
    }

    /// World point in camera coordinates.
    pub fn to_camera(&self, world: &Vector3<f64>) -> Vector3<f64> {
        let rel = world - self.position;
        let (right, down, forward) = self.axes();
        Vector3::new(rel.dot(&right), rel.dot(&down), rel.dot(&forward))
    }

    pub fn project_camera_point(&self, p: &Vector3<f64>) -> Result<(f64, f64), SceneError> {
        if !(p.z > MIN_DEPTH) {
            return Err(SceneError::BehindCamera { depth: p.z });
        }
        Ok((self.focal * p.x / p.z + self.cx, self.focal * p.y / p.z + self.cy))
    }

    pub fn project(&self, world: &Vector3<f64>) -> Result<(f64, f64), SceneError> {
        self.project_camera_point(&self.to_camera(world))
    }
}

/// An object's footprint on the image.
#[derive(Debug, Clone, Copy)]
struct Footprint {
    center: (f64, f64),
    half: (f64, f64),
    inner: Option<f64>,
    color: [u8; 4],
    depth: f64,
}

impl Footprint {
    fn covers(&self, x: f64, y: f64) -> bool {
        let nx = (x - self.center.0) / self.half.0;
        let ny = (y - self.center.1) / self.half.1;
        let r2 = nx * nx + ny * ny;
        match self.inner {
            Some(inner) => r2 <= 1.0 && r2 >= inner * inner,
            None => r2 <= 1.0,
        }
    }
}

fn footprint(obj: &SceneObject, camera: &SyntheticCamera) -> Result<Footprint, SceneError> {
    let p = camera.to_camera(&obj.position);
    let center = camera.project_camera_point(&p)?;
    let (hw, hh) = obj.shape.half_extent();
    let inner = match obj.shape {
        Shape::Ring { outer, inner } => Some(inner / outer),
        _ => None,
    };
    Ok(Footprint {
        center,
        half: (camera.focal * hw / p.z, camera.focal * hh / p.z),
        inner,
        color: [obj.color[0], obj.color[1], obj.color[2], 255],
        depth: p.z,
    })
}

/// Far-to-near paint order; objects behind the camera are skipped.
fn paint_list(scene: &Scene, camera: &SyntheticCamera) -> Vec<Footprint> {
    let mut list: Vec<Footprint> = scene.objects.iter().filter_map(|o| footprint(o, camera).ok()).collect();
    list.sort_by(|a, b| b.depth.total_cmp(&a.depth));
    list
}

fn paint_row(row: &mut [u8], y: u32, x0: u32, list: &[Footprint]) {
    let py = y as f64 + 0.5;
    for (i, px) in row.chunks_exact_mut(4).enumerate() {
        let pxf = (x0 + i as u32) as f64 + 0.5;
        let mut color = TABLE_COLOR;
        for fp in list {
            if fp.covers(pxf, py) {
                color = fp.color;
            }
        }
        px.copy_from_slice(&color);
    }
}

/// Rasterizes the `size` window at `(tl_x, tl_y)` of the full camera image.
pub fn render_camera_window(
    scene: &Scene,
    camera: &SyntheticCamera,
    tl: (u32, u32),
    size: PixelSize,
    frame_id: u64,
    exec: Execution,
) -> CameraFrame {
    let list = paint_list(scene, camera);
    let mut frame = CameraFrame::filled(size.width, size.height, TABLE_COLOR, frame_id);
    let stride = size.width as usize * 4;
    if stride == 0 {
        return frame;
    }
    let buf: &mut [u8] = &mut frame.image;
    exec.for_each_chunk_mut(buf, stride, |row_idx, row| {
        paint_row(row, tl.1 + row_idx as u32, tl.0, &list);
    });
    frame
}

/// Full camera image.
pub fn render_camera(scene: &Scene, camera: &SyntheticCamera, frame_id: u64) -> CameraFrame {
    render_camera_window(scene, camera, (0, 0), camera.size(), frame_id, Execution::auto())
}

/// Projected center and bounding box of an entity.
pub fn roi_for(scene: &Scene, camera: &SyntheticCamera, entity_id: &str) -> Result<RegionOfInterest, SceneError> {
    let obj = scene.get(entity_id)?;
    let fp = footprint(obj, camera)?;
    Ok(RegionOfInterest {
        x: fp.center.0,
        y: fp.center.1,
        width: 2.0 * fp.half.0,
        height: 2.0 * fp.half.1,
        blur_on_mirror: obj.blur_on_mirror,
    })
}

/// Event times relative to function onset, seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Timeline {
    pub onset: f64,
    pub gaze_pick: f64,
    pub reach_start: f64,
    pub gaze_place: f64,
    pub grasped: f64,
    pub transport_start: f64,
    pub over_plate: f64,
    pub released: f64,
    pub completed: f64,
    pub place_down_duration: f64,
}

impl Default for Timeline {
    fn default() -> Self {
        Self {
            onset: 0.0,
            gaze_pick: 0.5,
            reach_start: 2.0,
            gaze_place: 3.5,
            grasped: 5.0,
            transport_start: 9.0,
            over_plate: 13.5,
            released: 16.0,
            completed: 20.0,
            place_down_duration: 1.5,
        }
    }
}

impl Timeline {
    /// Nominal events in time order, with the phase each one opens.
    pub fn schedule(&self) -> [(ActionEventKind, f64, ArmPhase); 9] {
        use ActionEventKind as K;
        [
            (K::Onset, self.onset, ArmPhase::Idle),
            (K::GazePick, self.gaze_pick, ArmPhase::GazePick),
            (K::ReachStart, self.reach_start, ArmPhase::Reach),
            (K::GazePlace, self.gaze_place, ArmPhase::GazePlace),
            (K::Grasped, self.grasped, ArmPhase::Grasp),
            (K::TransportStart, self.transport_start, ArmPhase::Transport),
            (K::OverPlate, self.over_plate, ArmPhase::Lower),
            (K::Released, self.released, ArmPhase::Release),
            (K::Completed, self.completed, ArmPhase::Done),
        ]
    }

    pub fn validate(&self) -> Result<(), String> {
        let times: Vec<f64> = self.schedule().iter().map(|s| s.1).collect();
        if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[0] > w[1]) {
            return Err("timeline events must be finite and non-decreasing".into());
        }
        if self.onset != 0.0 {
            return Err("onset must be 0".into());
        }
        if !(self.place_down_duration > 0.0) {
            return Err("place_down_duration must be > 0".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArmPhase {
    Idle,
    GazePick,
    Reach,
    Grasp,
    GazePlace,
    Transport,
    Lower,
    Release,
    Done,
    Halted,
    PlacingDown,
}

impl ArmPhase {
    pub fn is_terminal(self) -> bool {
        matches!(self, ArmPhase::Done | ArmPhase::Halted)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionEventKind {
    Onset,
    GazePick,
    ReachStart,
    Grasped,
    GazePlace,
    TransportStart,
    OverPlate,
    Released,
    Completed,
    Stopped,
    PlacedDown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionEvent {
    pub kind: ActionEventKind,
    /// Seconds since function onset.
    pub t: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entity: Option<String>,
}

/// What to move where, with the positions captured at onset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionPlan {
    pub pick_id: String,
    pub place_id: String,
    pub pick_from: Vector3<f64>,
    pub place_at: Vector3<f64>,
    /// Attended before the robot starts acting.
    pub idle_attention: String,
}

impl ActionPlan {
    pub fn new(scene: &Scene, pick_id: &str, place_id: &str) -> Result<Self, SceneError> {
        let pick = scene.get(pick_id)?;
        if !pick.graspable {
            return Err(SceneError::InvalidScene(format!("`{pick_id}` is not graspable")));
        }
        let place = scene.get(place_id)?;
        let idle_attention = scene
            .objects
            .iter()
            .find(|o| o.label == EntityLabel::Person)
            .map_or_else(|| pick_id.to_string(), |o| o.id.clone());
        Ok(Self {
            pick_id: pick_id.to_string(),
            place_id: place_id.to_string(),
            pick_from: pick.position,
            place_at: place.position,
            idle_attention,
        })
    }

    /// Carried object position `t` seconds after onset on the nominal trajectory.
    pub fn carried_position(&self, t: f64, timeline: &Timeline) -> Vector3<f64> {
        let lift = Vector3::new(0.0, 0.0, LIFT_HEIGHT);
        let frac = |a: f64, b: f64| ((t - a) / (b - a)).clamp(0.0, 1.0);
        if t < timeline.grasped {
            self.pick_from
        } else if t < timeline.transport_start {
            self.pick_from + lift * frac(timeline.grasped, timeline.transport_start)
        } else if t < timeline.over_plate {
            let s = frac(timeline.transport_start, timeline.over_plate);
            (self.pick_from + lift).lerp(&(self.place_at + lift), s)
        } else if t < timeline.released {
            (self.place_at + lift).lerp(&self.place_at, frac(timeline.over_plate, timeline.released))
        } else {
            self.place_at
        }
    }
}

/// Phase machine state of one pick-and-place execution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmAction {
    pub phase: ArmPhase,
    pub held_object: Option<String>,
    /// Onset-relative start time of the current phase.
    pub phase_start: f64,
    pub stop_time: Option<f64>,
    pub attention: String,
    /// Index into [`Timeline::schedule`] of the next nominal event.
    next_event: usize,
    drop_from: Option<Vector3<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionStep {
    pub action: ArmAction,
    pub attention: String,
    pub events: Vec<ActionEvent>,
    /// New position of the carried object, when it moved.
    pub moved: Option<(String, Vector3<f64>)>,
}

impl ArmAction {
    pub fn new(plan: &ActionPlan) -> Self {
        Self {
            phase: ArmPhase::Idle,
            held_object: None,
            phase_start: 0.0,
            stop_time: None,
            attention: plan.idle_attention.clone(),
            next_event: 0,
            drop_from: None,
        }
    }

    pub fn is_finished(&self) -> bool {
        self.phase.is_terminal()
    }
}

fn event_entity(kind: ActionEventKind, plan: &ActionPlan) -> Option<String> {
    use ActionEventKind as K;
    match kind {
        K::GazePick | K::ReachStart | K::Grasped | K::TransportStart | K::Released => Some(plan.pick_id.clone()),
        K::GazePlace | K::OverPlate => Some(plan.place_id.clone()),
        _ => None,
    }
}

fn attention_for(phase: ArmPhase, plan: &ActionPlan, previous: &str) -> String {
    match phase {
        ArmPhase::Idle => plan.idle_attention.clone(),
        ArmPhase::GazePick | ArmPhase::Reach => plan.pick_id.clone(),
        ArmPhase::GazePlace
        | ArmPhase::Grasp
        | ArmPhase::Transport
        | ArmPhase::Lower
        | ArmPhase::Release
        | ArmPhase::Done => plan.place_id.clone(),
        ArmPhase::Halted | ArmPhase::PlacingDown => previous.to_string(),
    }
}

/// Advances the action to onset-relative time `t`.
///
/// Nominal events are stamped with their timeline times, so logs are
/// identical across trials regardless of tick phase. A `stop_requested`
/// time (at or before `t`) halts the action: nominal events up to the stop
/// are still emitted, then `stopped` at the stop time. A held object is put
/// down over `place_down_duration` before the action halts.
pub fn step_action(
    action: &ArmAction,
    plan: &ActionPlan,
    t: f64,
    stop_requested: Option<f64>,
    timeline: &Timeline,
) -> ActionStep {
    let mut next = action.clone();
    let mut events = Vec::new();
    let mut moved = None;

    if next.phase.is_terminal() {
        let attention = next.attention.clone();
        return ActionStep {
            action: next,
            attention,
            events,
            moved,
        };
    }

    if next.phase == ArmPhase::PlacingDown {
        let stop = next.stop_time.unwrap_or(t);
        let from = next.drop_from.unwrap_or(plan.pick_from);
        let rest = Vector3::new(from.x, from.y, plan.pick_from.z);
        let done_at = stop + timeline.place_down_duration;
        let id = next.held_object.clone().unwrap_or_else(|| plan.pick_id.clone());
        if t >= done_at {
            moved = Some((id.clone(), rest));
            events.push(ActionEvent {
                kind: ActionEventKind::PlacedDown,
                t: done_at,
                entity: Some(id),
            });
            next.phase = ArmPhase::Halted;
            next.phase_start = done_at;
            next.held_object = None;
        } else {
            moved = Some((id, from.lerp(&rest, (t - stop) / timeline.place_down_duration)));
        }
        let attention = next.attention.clone();
        return ActionStep {
            action: next,
            attention,
            events,
            moved,
        };
    }

    let horizon = match stop_requested {
        Some(s) if next.stop_time.is_none() => s.min(t),
        _ => t,
    };
    let schedule = timeline.schedule();
    while next.next_event < schedule.len() && schedule[next.next_event].1 <= horizon {
        let (kind, at, phase) = schedule[next.next_event];
        events.push(ActionEvent {
            kind,
            t: at,
            entity: event_entity(kind, plan),
        });
        next.phase = phase;
        next.phase_start = at;
        match kind {
            ActionEventKind::Grasped => next.held_object = Some(plan.pick_id.clone()),
            ActionEventKind::Released => next.held_object = None,
            _ => {}
        }
        next.attention = attention_for(phase, plan, &next.attention);
        next.next_event += 1;
    }

    if next.held_object.is_some() {
        moved = Some((plan.pick_id.clone(), plan.carried_position(horizon, timeline)));
    } else if events.iter().any(|e| e.kind == ActionEventKind::Released) {
        moved = Some((plan.pick_id.clone(), plan.place_at));
    }

    if let (Some(stop), None) = (stop_requested, next.stop_time) {
        if !next.phase.is_terminal() {
            next.stop_time = Some(stop);
            events.push(ActionEvent {
                kind: ActionEventKind::Stopped,
                t: stop,
                entity: None,
            });
            next.phase_start = stop;
            if next.held_object.is_some() {
                next.phase = ArmPhase::PlacingDown;
                next.drop_from = Some(plan.carried_position(stop, timeline));
            } else {
                next.phase = ArmPhase::Halted;
            }
            next.attention = attention_for(next.phase, plan, &next.attention);
        }
    }

    let attention = next.attention.clone();
    ActionStep {
        action: next,
        attention,
        events,
        moved,
    }
}
