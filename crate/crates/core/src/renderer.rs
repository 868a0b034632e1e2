//! Eye screen raster and the expression state machine.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use image::{Rgba, RgbaImage};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compositor::{composite_in_place, disc_bounds, flash_envelope, in_disc, OverlayFilters};
use crate::kinematics::{clamp_to_screen, Eye, HeadGeometry, ScreenPoint};

pub const BACKGROUND: [u8; 4] = [18, 18, 24, 255];
pub const PUPIL_COLOR: [u8; 4] = [8, 8, 8, 255];
pub const LISTENING_TINT: [u8; 3] = [40, 200, 80];
pub const LOADING_COLOR: [u8; 4] = [220, 225, 255, 255];
pub const DEFAULT_IRIS: [u8; 3] = [70, 130, 200];

/// Loading ring revolutions per second.
pub const LOADING_FREQUENCY: f64 = 1.0;
/// How long the smile stays after a success event.
pub const POSITIVE_DURATION: f64 = 2.0;
/// Re-registrations of one entity inside this window do not flash again.
pub const REGISTRATION_DEBOUNCE: f64 = 1.0;
/// Flash bookkeeping is dropped once the envelope has decayed.
const FLASH_LIFETIME: f64 = 2.0;
const SMALL_PUPIL_FACTOR: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RenderError {
    #[error("mirror mode needs two pupil images")]
    MissingMirrorInput,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpressionMode {
    Neutral,
    SmallPupil,
    Positive,
    Negative,
    Closed,
    Loading,
    ColorCoded,
    Mirror,
}

impl ExpressionMode {
    pub fn from_name(name: &str) -> Option<Self> {
        serde_json::from_value(serde_json::Value::String(name.to_ascii_lowercase())).ok()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "event", content = "entity")]
pub enum ExpressionEvent {
    ListeningOn,
    ListeningOff,
    Success,
    ProcessingOn,
    ProcessingOff,
    Registration(String),
}

impl ExpressionEvent {
    /// Parses `listening_on`, `registration:<entity>` and friends; unknown names give `None`.
    pub fn from_name(name: &str) -> Option<Self> {
        if let Some(entity) = name.strip_prefix("registration:") {
            return Some(Self::Registration(entity.to_string()));
        }
        Some(match name {
            "listening_on" => Self::ListeningOn,
            "listening_off" => Self::ListeningOff,
            "success" => Self::Success,
            "processing_on" => Self::ProcessingOn,
            "processing_off" => Self::ProcessingOff,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpressionState {
    pub mode: ExpressionMode,
    /// Mode restored after timed or processing states end.
    pub base_mode: ExpressionMode,
    pub iris_color: [u8; 3],
    pub ring_phase: f64,
    pub listening: bool,
    /// Per-eye mode overrides, `[right, left]`.
    pub overrides: [Option<ExpressionMode>; 2],
    pub positive_remaining: f64,
    /// Seconds since the current flash started.
    pub flash_age: Option<f64>,
    pub clock: f64,
    pub registrations: BTreeMap<String, f64>,
}

impl Default for ExpressionState {
    fn default() -> Self {
        Self::new(ExpressionMode::Neutral)
    }
}

impl ExpressionState {
    pub fn new(mode: ExpressionMode) -> Self {
        Self {
            mode,
            base_mode: mode,
            iris_color: DEFAULT_IRIS,
            ring_phase: 0.0,
            listening: false,
            overrides: [None, None],
            positive_remaining: 0.0,
            flash_age: None,
            clock: 0.0,
            registrations: BTreeMap::new(),
        }
    }

    /// Explicit mode change; also becomes the mode returned to.
    pub fn set_mode(&mut self, mode: ExpressionMode) {
        self.mode = mode;
        self.base_mode = mode;
        self.positive_remaining = 0.0;
    }

    pub fn mirror_active(&self) -> bool {
        self.mode == ExpressionMode::Mirror || self.base_mode == ExpressionMode::Mirror
    }

    pub fn mode_for(&self, eye: Eye) -> ExpressionMode {
        self.overrides[eye.index()].unwrap_or(self.mode)
    }

    /// Current exposure multiplier of the registration flash.
    pub fn exposure_gain(&self, filters: &OverlayFilters) -> f64 {
        self.flash_age.map_or(1.0, |age| flash_envelope(age, filters))
    }
}

/// Advances timers by `dt`, then applies `events` in order.
pub fn step_expression(expr: &ExpressionState, dt: f64, events: &[ExpressionEvent]) -> ExpressionState {
    let mut next = expr.clone();
    next.clock += dt;
    if next.mode == ExpressionMode::Loading {
        next.ring_phase = (next.ring_phase + TAU * LOADING_FREQUENCY * dt).rem_euclid(TAU);
    }
    if next.mode == ExpressionMode::Positive {
        next.positive_remaining -= dt;
        if next.positive_remaining <= 1e-9 {
            next.positive_remaining = 0.0;
            next.mode = next.base_mode;
        }
    }
    if let Some(age) = next.flash_age.as_mut() {
        *age += dt;
        if *age > FLASH_LIFETIME {
            next.flash_age = None;
        }
    }

    for event in events {
        match event {
            ExpressionEvent::ListeningOn => next.listening = true,
            ExpressionEvent::ListeningOff => next.listening = false,
            ExpressionEvent::Success => {
                next.mode = ExpressionMode::Positive;
                next.positive_remaining = POSITIVE_DURATION;
            }
            ExpressionEvent::ProcessingOn => {
                if next.mode != ExpressionMode::Loading {
                    next.mode = ExpressionMode::Loading;
                    next.ring_phase = 0.0;
                }
            }
            ExpressionEvent::ProcessingOff => {
                if next.mode == ExpressionMode::Loading {
                    next.mode = next.base_mode;
                }
            }
            ExpressionEvent::Registration(entity) => {
                if !next.mirror_active() {
                    continue;
                }
                let fresh = next
                    .registrations
                    .get(entity)
                    .is_none_or(|last| next.clock - last >= REGISTRATION_DEBOUNCE);
                if fresh {
                    next.registrations.insert(entity.clone(), next.clock);
                    next.flash_age = Some(0.0);
                }
            }
        }
    }
    next
}

/// Pupil images and filters for the mirror overlay, `[right, left]`.
#[derive(Debug, Clone)]
pub struct MirrorInput {
    pub images: [RgbaImage; 2],
    pub filters: OverlayFilters,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EyeFrame {
    pub raster: RgbaImage,
    pub pupil_centers_px: [(f64, f64); 2],
    pub iris_radius_px: f64,
    pub pupil_radius_px: f64,
    pub expression: ExpressionMode,
    pub mirror_enabled: bool,
}

/// Screen point to continuous raster coordinates (viewer-facing, y down).
pub fn screen_to_pixel(p: ScreenPoint, geom: &HeadGeometry) -> (f64, f64) {
    let (w, h) = geom.raster_size();
    (
        w as f64 / 2.0 + p.u * geom.pixels_per_meter,
        h as f64 / 2.0 - p.v * geom.pixels_per_meter,
    )
}

fn fill_disc(img: &mut RgbaImage, center: (f64, f64), radius: f64, color: [u8; 4]) {
    let (x0, x1, y0, y1) = disc_bounds(center, radius, img.width(), img.height());
    for y in y0..y1 {
        for x in x0..x1 {
            if in_disc(x, y, center, radius) {
                img.put_pixel(x, y, Rgba(color));
            }
        }
    }
}

/// Repaints background over the iris pixels selected by `covered`.
fn cover_iris(img: &mut RgbaImage, center: (f64, f64), radius: f64, covered: impl Fn(f64, f64) -> bool) {
    let (x0, x1, y0, y1) = disc_bounds(center, radius, img.width(), img.height());
    for y in y0..y1 {
        for x in x0..x1 {
            let dx = x as f64 + 0.5 - center.0;
            let dy = y as f64 + 0.5 - center.1;
            if in_disc(x, y, center, radius) && covered(dx, dy) {
                img.put_pixel(x, y, Rgba(BACKGROUND));
            }
        }
    }
}

fn draw_loading_ring(img: &mut RgbaImage, center: (f64, f64), inner: f64, outer: f64, phase: f64) {
    let (x0, x1, y0, y1) = disc_bounds(center, outer, img.width(), img.height());
    for y in y0..y1 {
        for x in x0..x1 {
            let dx = x as f64 + 0.5 - center.0;
            let dy = y as f64 + 0.5 - center.1;
            let r = dx.hypot(dy);
            if r < inner || r > outer {
                continue;
            }
            // Three 60° segments, 120° apart.
            let a = (dy.atan2(dx) - phase).rem_euclid(TAU / 3.0);
            if a < TAU / 6.0 {
                img.put_pixel(x, y, Rgba(LOADING_COLOR));
            }
        }
    }
}

/// Draws both eyes for one tick.
///
/// Pupils are clamped on-screen here; the kinematic state is not touched.
/// Mirror images are composited whenever supplied (except on closed eyes);
/// mirror mode without them is an error.
pub fn render_eyes(
    pupil_screen: &[ScreenPoint; 2],
    expr: &ExpressionState,
    mirror: Option<&MirrorInput>,
    geom: &HeadGeometry,
) -> Result<EyeFrame, RenderError> {
    let wants_mirror = Eye::BOTH.iter().any(|&e| expr.mode_for(e) == ExpressionMode::Mirror);
    if wants_mirror && mirror.is_none() {
        return Err(RenderError::MissingMirrorInput);
    }
    let (w, h) = geom.raster_size();
    let mut raster = RgbaImage::from_pixel(w, h, Rgba(BACKGROUND));
    let iris_r = geom.iris_radius * geom.pixels_per_meter;
    let pupil_r = geom.pupil_radius * geom.pixels_per_meter;
    let mut centers = [(0.0, 0.0); 2];

    for eye in Eye::BOTH {
        let center = screen_to_pixel(clamp_to_screen(pupil_screen[eye.index()], geom), geom);
        centers[eye.index()] = center;
        let mode = expr.mode_for(eye);

        if mode == ExpressionMode::Closed {
            let half = 1.5;
            for y in (center.1 - half).floor().max(0.0) as u32..((center.1 + half).ceil().max(0.0) as u32).min(h) {
                for x in (center.0 - iris_r).floor().max(0.0) as u32..((center.0 + iris_r).ceil().max(0.0) as u32).min(w) {
                    raster.put_pixel(x, y, Rgba([150, 150, 160, 255]));
                }
            }
            continue;
        }

        let iris = if mode == ExpressionMode::ColorCoded && expr.listening {
            LISTENING_TINT
        } else {
            expr.iris_color
        };
        fill_disc(&mut raster, center, iris_r, [iris[0], iris[1], iris[2], 255]);
        let radius = if mode == ExpressionMode::SmallPupil {
            pupil_r * SMALL_PUPIL_FACTOR
        } else {
            pupil_r
        };
        fill_disc(&mut raster, center, radius, PUPIL_COLOR);

        if let Some(input) = mirror {
            let filters = OverlayFilters {
                exposure_gain: expr.exposure_gain(&input.filters),
                ..input.filters
            };
            composite_in_place(&mut raster, &input.images[eye.index()], &filters, center, radius);
        }

        match mode {
            ExpressionMode::Positive => {
                // Smile: an upward arc left by a lid rising from below.
                cover_iris(&mut raster, center, iris_r, |dx, dy| {
                    dx * dx + (dy - 1.25 * iris_r).powi(2) <= (1.1 * iris_r).powi(2)
                });
            }
            ExpressionMode::Negative => {
                // Slanted upper lid, lower toward the nose.
                let inward = -eye.lateral_sign();
                cover_iris(&mut raster, center, iris_r, |dx, dy| dy < -0.3 * iris_r + 0.5 * inward * dx);
            }
            ExpressionMode::Loading => {
                draw_loading_ring(&mut raster, center, iris_r, 1.25 * iris_r, expr.ring_phase);
            }
            _ => {}
        }
    }

    Ok(EyeFrame {
        raster,
        pupil_centers_px: centers,
        iris_radius_px: iris_r,
        pupil_radius_px: pupil_r,
        expression: expr.mode,
        mirror_enabled: mirror.is_some(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn neutral_pupils(geom: &HeadGeometry) -> [ScreenPoint; 2] {
        let b = geom.eye_half_spacing;
        [ScreenPoint { u: -b, v: 0.0 }, ScreenPoint { u: b, v: 0.0 }]
    }

    fn solid(color: [u8; 4]) -> MirrorInput {
        MirrorInput {
            images: [RgbaImage::from_pixel(49, 49, Rgba(color)), RgbaImage::from_pixel(49, 49, Rgba(color))],
            filters: OverlayFilters {
                opacity: 1.0,
                blur_radius: 0,
                ..OverlayFilters::default()
            },
        }
    }

    #[test]
    fn neutral_discs_are_concentric_at_pupil_pixels() {
        let geom = HeadGeometry::default();
        let frame = render_eyes(&neutral_pupils(&geom), &ExpressionState::default(), None, &geom).unwrap();
        assert_eq!(frame.pupil_centers_px, [(140.0, 70.0), (340.0, 70.0)]);
        for (cx, cy) in frame.pupil_centers_px {
            assert_eq!(frame.raster.get_pixel(cx as u32, cy as u32).0, PUPIL_COLOR);
            let iris_x = (cx + frame.pupil_radius_px + 1.5) as u32;
            assert_eq!(&frame.raster.get_pixel(iris_x, cy as u32).0[..3], &DEFAULT_IRIS);
            let out_x = (cx + frame.iris_radius_px + 2.0) as u32;
            assert_eq!(frame.raster.get_pixel(out_x, cy as u32).0, BACKGROUND);
        }
    }

    #[test]
    fn closed_eyes_have_no_iris_or_pupil() {
        let geom = HeadGeometry::default();
        let expr = ExpressionState::new(ExpressionMode::Closed);
        let frame = render_eyes(&neutral_pupils(&geom), &expr, None, &geom).unwrap();
        let iris = [DEFAULT_IRIS[0], DEFAULT_IRIS[1], DEFAULT_IRIS[2], 255];
        assert!(frame.raster.pixels().all(|p| p.0 != iris && p.0 != PUPIL_COLOR));
    }

    #[test]
    fn mirror_mode_paints_pupils() {
        let geom = HeadGeometry::default();
        let expr = ExpressionState::new(ExpressionMode::Mirror);
        let frame = render_eyes(&neutral_pupils(&geom), &expr, Some(&solid([0, 255, 0, 255])), &geom).unwrap();
        for (cx, cy) in frame.pupil_centers_px {
            assert_eq!(frame.raster.get_pixel(cx as u32, cy as u32).0, [0, 255, 0, 255]);
        }
        assert_eq!(
            render_eyes(&neutral_pupils(&geom), &expr, None, &geom),
            Err(RenderError::MissingMirrorInput)
        );
    }

    #[test]
    fn listening_tints_color_coded_iris() {
        let geom = HeadGeometry::default();
        let mut expr = ExpressionState::new(ExpressionMode::ColorCoded);
        expr = step_expression(&expr, 0.02, &[ExpressionEvent::ListeningOn]);
        let frame = render_eyes(&neutral_pupils(&geom), &expr, None, &geom).unwrap();
        let (cx, cy) = frame.pupil_centers_px[0];
        let x = (cx + frame.pupil_radius_px + 1.5) as u32;
        assert_eq!(&frame.raster.get_pixel(x, cy as u32).0[..3], &LISTENING_TINT);
    }

    #[test]
    fn clamped_pupils_stay_on_raster() {
        let geom = HeadGeometry::default();
        let far = [ScreenPoint { u: -1.0, v: 1.0 }, ScreenPoint { u: 1.0, v: -1.0 }];
        let frame = render_eyes(&far, &ExpressionState::default(), None, &geom).unwrap();
        let (w, h) = frame.raster.dimensions();
        for (cx, cy) in frame.pupil_centers_px {
            assert!(cx - frame.iris_radius_px >= -1e-9 && cx + frame.iris_radius_px <= w as f64 + 1e-9);
            assert!(cy - frame.iris_radius_px >= -1e-9 && cy + frame.iris_radius_px <= h as f64 + 1e-9);
        }
    }

    #[test]
    fn success_smiles_for_two_seconds() {
        let mut expr = step_expression(&ExpressionState::default(), 0.02, &[ExpressionEvent::Success]);
        assert_eq!(expr.mode, ExpressionMode::Positive);
        for _ in 0..99 {
            expr = step_expression(&expr, 0.02, &[]);
            assert_eq!(expr.mode, ExpressionMode::Positive);
        }
        expr = step_expression(&expr, 0.02, &[]);
        assert_eq!(expr.mode, ExpressionMode::Neutral);
    }

    #[test]
    fn processing_toggles_loading() {
        let mut expr = ExpressionState::new(ExpressionMode::Mirror);
        expr = step_expression(&expr, 0.02, &[ExpressionEvent::ProcessingOn]);
        assert_eq!(expr.mode, ExpressionMode::Loading);
        expr = step_expression(&expr, 0.25, &[]);
        assert!((expr.ring_phase - TAU * 0.25).abs() < 1e-12);
        expr = step_expression(&expr, 0.02, &[ExpressionEvent::ProcessingOff]);
        assert_eq!(expr.mode, ExpressionMode::Mirror);
    }

    #[test]
    fn registration_flash_is_debounced() {
        let reg = || ExpressionEvent::Registration("bottle".into());
        let mut expr = ExpressionState::new(ExpressionMode::Mirror);
        expr = step_expression(&expr, 0.02, &[reg()]);
        assert_eq!(expr.flash_age, Some(0.0));
        expr = step_expression(&expr, 0.05, &[reg()]);
        assert!((expr.flash_age.unwrap() - 0.05).abs() < 1e-12, "second registration restarted the flash");

        let plain = step_expression(&ExpressionState::default(), 0.02, &[reg()]);
        assert_eq!(plain.flash_age, None);
    }

    #[test]
    fn unknown_event_names_are_ignored() {
        assert_eq!(ExpressionEvent::from_name("sneeze"), None);
        assert_eq!(
            ExpressionEvent::from_name("registration:can"),
            Some(ExpressionEvent::Registration("can".into()))
        );
        assert_eq!(ExpressionMode::from_name("Small_Pupil"), Some(ExpressionMode::SmallPupil));
    }

    #[test]
    fn raster_is_deterministic() {
        let geom = HeadGeometry::default();
        let mut expr = ExpressionState::new(ExpressionMode::Loading);
        expr.ring_phase = 1.0;
        let a = render_eyes(&neutral_pupils(&geom), &expr, None, &geom).unwrap();
        let b = render_eyes(&neutral_pupils(&geom), &expr, None, &geom).unwrap();
        assert_eq!(a.raster.as_raw(), b.raster.as_raw());
    }

    #[test]
    fn mirror_content_only_changes_pupil_discs() {
        let geom = HeadGeometry::default();
        let expr = ExpressionState::new(ExpressionMode::Mirror);
        let a = render_eyes(&neutral_pupils(&geom), &expr, Some(&solid([255, 0, 0, 255])), &geom).unwrap();
        let b = render_eyes(&neutral_pupils(&geom), &expr, Some(&solid([0, 0, 255, 255])), &geom).unwrap();
        for (x, y, pa) in a.raster.enumerate_pixels() {
            let inside = a.pupil_centers_px.iter().any(|&c| in_disc(x, y, c, a.pupil_radius_px));
            if !inside {
                assert_eq!(pa, b.raster.get_pixel(x, y));
            }
        }
        assert_ne!(a.raster, b.raster);
    }
}
