//! Pupil mirror images: crop the attended camera region so its point of
//! interest lands on the pupil center, shrink it to pupil size, flip it
//! horizontally and blend it onto the pupil disc.

use image::{Rgba, RgbaImage};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompositorError {
    #[error("camera frame must be non-empty, got {width}x{height}")]
    EmptyFrame { width: u32, height: u32 },
    #[error("region size must be positive, got {width}x{height}")]
    InvalidRegion { width: f64, height: f64 },
    #[error("point of interest ({x}, {y}) lies outside the {width}x{height} frame")]
    PointOutsideFrame { x: f64, y: f64, width: u32, height: u32 },
    #[error("target size must be positive, got {width}x{height}")]
    InvalidTarget { width: u32, height: u32 },
    #[error("crop window exceeds the frame on at least one axis")]
    RegionLargerThanFrame,
    #[error("crop {crop:?} does not fit a {width}x{height} frame")]
    CropOutsideFrame { crop: Box<CropSpec>, width: u32, height: u32 },
}

/// One camera image; `frame_id` increases monotonically per producer.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraFrame {
    pub image: RgbaImage,
    pub frame_id: u64,
}

impl CameraFrame {
    pub fn filled(width: u32, height: u32, color: [u8; 4], frame_id: u64) -> Self {
        Self {
            image: RgbaImage::from_pixel(width, height, Rgba(color)),
            frame_id,
        }
    }

    pub fn width(&self) -> u32 {
        self.image.width()
    }

    pub fn height(&self) -> u32 {
        self.image.height()
    }
}

/// Attended region on the camera image, in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionOfInterest {
    pub x: f64,
    pub y: f64,
    pub width: f64,
    pub height: f64,
    #[serde(default)]
    pub blur_on_mirror: bool,
}

impl RegionOfInterest {
    pub fn new(x: f64, y: f64, width: f64, height: f64) -> Self {
        Self {
            x,
            y,
            width,
            height,
            blur_on_mirror: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PixelSize {
    pub width: u32,
    pub height: u32,
}

impl PixelSize {
    pub fn new(width: u32, height: u32) -> Self {
        Self { width, height }
    }

    pub fn square(side: u32) -> Self {
        Self::new(side, side)
    }
}

/// Source rectangle and scale producing one pupil image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CropSpec {
    pub tl_x: u32,
    pub tl_y: u32,
    pub crop: PixelSize,
    pub scale: f64,
    pub target: PixelSize,
    /// The window was shifted to stay inside the frame.
    pub clamped: bool,
    /// The aligned window was larger than the frame and got shrunk.
    pub region_exceeds_frame: bool,
}

impl CropSpec {
    /// Rejects crops flagged [`CropSpec::region_exceeds_frame`].
    pub fn strict(self) -> Result<Self, CompositorError> {
        if self.region_exceeds_frame {
            Err(CompositorError::RegionLargerThanFrame)
        } else {
            Ok(self)
        }
    }

    /// Same crop expressed against a frame that starts at the crop's corner.
    pub fn windowed(mut self) -> Self {
        self.tl_x = 0;
        self.tl_y = 0;
        self
    }

    fn fits(&self, width: u32, height: u32) -> bool {
        self.crop.width > 0
            && self.crop.height > 0
            && self.target.width > 0
            && self.target.height > 0
            && self.tl_x as u64 + self.crop.width as u64 <= width as u64
            && self.tl_y as u64 + self.crop.height as u64 <= height as u64
    }
}

/// Per-entity look of the mirrored content.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OverlayFilters {
    pub opacity: f64,
    pub blur_radius: u32,
    pub exposure_gain: f64,
    pub flash_decay_tau: f64,
}

impl Default for OverlayFilters {
    fn default() -> Self {
        Self {
            opacity: 0.8,
            blur_radius: 3,
            exposure_gain: 2.5,
            flash_decay_tau: 0.15,
        }
    }
}

impl OverlayFilters {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.opacity) {
            return Err("opacity must lie in [0, 1]".into());
        }
        if !(self.exposure_gain.is_finite() && self.exposure_gain >= 1.0) {
            return Err("exposure_gain must be >= 1".into());
        }
        if !(self.flash_decay_tau.is_finite() && self.flash_decay_tau > 0.0) {
            return Err("flash_decay_tau must be > 0".into());
        }
        Ok(())
    }
}

/// Aspect-preserving shrink factor; never enlarges.
pub fn compute_scale(roi: &RegionOfInterest, target: PixelSize) -> f64 {
    (target.width as f64 / roi.width)
        .min(target.height as f64 / roi.height)
        .min(1.0)
}

/// Crop window whose scaled image puts the point of interest at the pupil-image center.
pub fn compute_crop(
    frame: PixelSize,
    roi: &RegionOfInterest,
    target: PixelSize,
) -> Result<CropSpec, CompositorError> {
    if frame.width == 0 || frame.height == 0 {
        return Err(CompositorError::EmptyFrame {
            width: frame.width,
            height: frame.height,
        });
    }
    if !(roi.width > 0.0 && roi.height > 0.0 && roi.width.is_finite() && roi.height.is_finite()) {
        return Err(CompositorError::InvalidRegion {
            width: roi.width,
            height: roi.height,
        });
    }
    if !(roi.x >= 0.0 && roi.y >= 0.0 && roi.x < frame.width as f64 && roi.y < frame.height as f64) {
        return Err(CompositorError::PointOutsideFrame {
            x: roi.x,
            y: roi.y,
            width: frame.width,
            height: frame.height,
        });
    }
    if target.width == 0 || target.height == 0 {
        return Err(CompositorError::InvalidTarget {
            width: target.width,
            height: target.height,
        });
    }

    let (tw, th) = (target.width as f64, target.height as f64);
    let (fw, fh) = (frame.width as f64, frame.height as f64);
    let mut scale = compute_scale(roi, target);
    let mut crop_w = (tw / scale).round();
    let mut crop_h = (th / scale).round();
    let region_exceeds_frame = crop_w > fw || crop_h > fh;
    if region_exceeds_frame {
        scale = scale.max(tw / fw).max(th / fh);
        crop_w = (tw / scale).round().min(fw);
        crop_h = (th / scale).round().min(fh);
    }

    let ideal_x = (roi.x - crop_w / 2.0).round();
    let ideal_y = (roi.y - crop_h / 2.0).round();
    let tl_x = ideal_x.clamp(0.0, fw - crop_w);
    let tl_y = ideal_y.clamp(0.0, fh - crop_h);
    Ok(CropSpec {
        tl_x: tl_x as u32,
        tl_y: tl_y as u32,
        crop: PixelSize::new(crop_w as u32, crop_h as u32),
        scale,
        target,
        clamped: tl_x != ideal_x || tl_y != ideal_y,
        region_exceeds_frame,
    })
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

/// Samples the crop window down to the target size with bilinear filtering.
pub fn extract(frame: &CameraFrame, crop: &CropSpec) -> Result<RgbaImage, CompositorError> {
    if !crop.fits(frame.width(), frame.height()) {
        return Err(CompositorError::CropOutsideFrame {
            crop: Box::new(*crop),
            width: frame.width(),
            height: frame.height(),
        });
    }
    let step_x = crop.crop.width as f64 / crop.target.width as f64;
    let step_y = crop.crop.height as f64 / crop.target.height as f64;
    let max_x = (crop.crop.width - 1) as f64;
    let max_y = (crop.crop.height - 1) as f64;
    let src = &frame.image;

    let mut out = RgbaImage::new(crop.target.width, crop.target.height);
    for (ox, oy, px) in out.enumerate_pixels_mut() {
        let sx = ((ox as f64 + 0.5) * step_x - 0.5).clamp(0.0, max_x);
        let sy = ((oy as f64 + 0.5) * step_y - 0.5).clamp(0.0, max_y);
        let (x0, y0) = (sx.floor(), sy.floor());
        let (fx, fy) = (sx - x0, sy - y0);
        let x0 = x0 as u32;
        let y0 = y0 as u32;
        let x1 = (x0 + 1).min(max_x as u32);
        let y1 = (y0 + 1).min(max_y as u32);
        let at = |x: u32, y: u32| src.get_pixel(crop.tl_x + x, crop.tl_y + y).0;
        let (p00, p10, p01, p11) = (at(x0, y0), at(x1, y0), at(x0, y1), at(x1, y1));
        for c in 0..4 {
            let top = lerp(p00[c] as f64, p10[c] as f64, fx);
            let bottom = lerp(p01[c] as f64, p11[c] as f64, fx);
            px.0[c] = lerp(top, bottom, fy).round().clamp(0.0, 255.0) as u8;
        }
    }
    Ok(out)
}

/// Mirror about the vertical centerline.
pub fn flip_horizontal(img: &RgbaImage) -> RgbaImage {
    image::imageops::flip_horizontal(img)
}

/// The pupil image: scaled crop, mirrored.
pub fn extract_flip(frame: &CameraFrame, crop: &CropSpec) -> Result<RgbaImage, CompositorError> {
    Ok(flip_horizontal(&extract(frame, crop)?))
}

/// Separable box blur of `radius` pixels with clamped edges.
pub fn box_blur(img: &RgbaImage, radius: u32) -> RgbaImage {
    if radius == 0 {
        return img.clone();
    }
    let (w, h) = img.dimensions();
    let r = radius as i64;
    let n = (2 * r + 1) as f64;
    let pass = |src: &RgbaImage, horizontal: bool| {
        let mut dst = RgbaImage::new(w, h);
        for (x, y, px) in dst.enumerate_pixels_mut() {
            let mut acc = [0.0f64; 4];
            for k in -r..=r {
                let (sx, sy) = if horizontal {
                    ((x as i64 + k).clamp(0, w as i64 - 1) as u32, y)
                } else {
                    (x, (y as i64 + k).clamp(0, h as i64 - 1) as u32)
                };
                let s = src.get_pixel(sx, sy).0;
                for c in 0..4 {
                    acc[c] += s[c] as f64;
                }
            }
            for c in 0..4 {
                px.0[c] = (acc[c] / n).round() as u8;
            }
        }
        dst
    };
    pass(&pass(img, true), false)
}

/// Blur followed by an RGB gain saturating at 255.
pub fn apply_filters(img: &RgbaImage, blur_radius: u32, exposure_gain: f64) -> RgbaImage {
    let mut out = box_blur(img, blur_radius);
    if exposure_gain != 1.0 {
        for px in out.pixels_mut() {
            for c in 0..3 {
                px.0[c] = (px.0[c] as f64 * exposure_gain).round().min(255.0) as u8;
            }
        }
    }
    out
}

/// Whether the center of pixel `(x, y)` lies in the disc.
pub fn in_disc(x: u32, y: u32, center: (f64, f64), radius: f64) -> bool {
    let dx = x as f64 + 0.5 - center.0;
    let dy = y as f64 + 0.5 - center.1;
    dx * dx + dy * dy <= radius * radius
}

/// Pixel bounding box `[x0, x1) x [y0, y1)` of a disc, clipped to `width x height`.
pub(crate) fn disc_bounds(center: (f64, f64), radius: f64, width: u32, height: u32) -> (u32, u32, u32, u32) {
    let clip = |v: f64, max: u32| v.clamp(0.0, max as f64) as u32;
    (
        clip((center.0 - radius).floor(), width),
        clip((center.0 + radius).ceil() + 1.0, width),
        clip((center.1 - radius).floor(), height),
        clip((center.1 + radius).ceil() + 1.0, height),
    )
}

/// Blends the filtered pupil image onto the pupil disc of `base` in place.
///
/// The pupil image is stretched over the disc's bounding square. Pixels
/// outside the disc are left untouched.
pub fn composite_in_place(
    base: &mut RgbaImage,
    pupil_img: &RgbaImage,
    filters: &OverlayFilters,
    pupil_center: (f64, f64),
    pupil_radius: f64,
) {
    let filtered = apply_filters(pupil_img, filters.blur_radius, filters.exposure_gain);
    let (pw, ph) = filtered.dimensions();
    if pw == 0 || ph == 0 || pupil_radius <= 0.0 {
        return;
    }
    let alpha = filters.opacity.clamp(0.0, 1.0);
    let keep = 1.0 - alpha;
    let left = pupil_center.0 - pupil_radius;
    let top = pupil_center.1 - pupil_radius;
    let span = 2.0 * pupil_radius;
    let (x0, x1, y0, y1) = disc_bounds(pupil_center, pupil_radius, base.width(), base.height());
    for y in y0..y1 {
        for x in x0..x1 {
            if !in_disc(x, y, pupil_center, pupil_radius) {
                continue;
            }
            let sx = (((x as f64 + 0.5 - left) / span) * pw as f64).floor().clamp(0.0, (pw - 1) as f64) as u32;
            let sy = (((y as f64 + 0.5 - top) / span) * ph as f64).floor().clamp(0.0, (ph - 1) as f64) as u32;
            let mirror = filtered.get_pixel(sx, sy).0;
            let px = base.get_pixel_mut(x, y);
            for c in 0..3 {
                px.0[c] = (alpha * mirror[c] as f64 + keep * px.0[c] as f64).round().clamp(0.0, 255.0) as u8;
            }
        }
    }
}

pub fn composite(
    base_eye: &RgbaImage,
    pupil_img: &RgbaImage,
    filters: &OverlayFilters,
    pupil_center: (f64, f64),
    pupil_radius: f64,
) -> RgbaImage {
    let mut out = base_eye.clone();
    composite_in_place(&mut out, pupil_img, filters, pupil_center, pupil_radius);
    out
}

/// Exposure multiplier `t` seconds after an entity was first registered.
pub fn flash_envelope(t_since_registration: f64, filters: &OverlayFilters) -> f64 {
    1.0 + (filters.exposure_gain - 1.0) * (-t_since_registration.max(0.0) / filters.flash_decay_tau).exp()
}
