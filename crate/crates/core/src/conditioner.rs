//! Implicit mouth conditioning: blank the mouth box, draw the lip outline.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Landmarks68, INNER_LIP, OUTER_LIP};
use crate::image::{Image, Rgb};
use crate::raster::draw_closed_polyline;

pub const BLANK: Rgb = [0.0, 0.0, 0.0];
pub const OUTLINE: Rgb = [1.0, 1.0, 1.0];
pub const DEFAULT_EXPAND: f64 = 0.3;

/// Half-open pixel box `[x0, x1) × [y0, y1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MouthBBox {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl MouthBBox {
    pub fn contains(&self, x: i64, y: i64) -> bool {
        x >= self.x0 as i64 && x < self.x1 as i64 && y >= self.y0 as i64 && y < self.y1 as i64
    }

    pub fn area(&self) -> usize {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionedPair {
    pub input_image: Image,
    pub target_image: Image,
    pub bbox: MouthBBox,
}

/// Box around mouth points 49–68, grown by `expand` times the side length on
/// every side and clamped to the image.
///
/// The lower bound is `floor(min)`. The upper bound is `floor(max) + 1`,
/// which equals `ceil(max)` unless `max` is an integer; the extra pixel keeps
/// the pixel of every mouth point inside the half-open box.
pub fn mouth_bbox(landmarks: &Landmarks68, expand: f64, image_size: (usize, usize)) -> Result<MouthBBox> {
    if !(expand >= 0.0) {
        return Err(Error::InvalidParams(format!("expand={expand} must be non-negative")));
    }
    let mouth = landmarks.mouth();
    let (mut lo_x, mut lo_y) = (f64::INFINITY, f64::INFINITY);
    let (mut hi_x, mut hi_y) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in mouth {
        lo_x = lo_x.min(p.x);
        lo_y = lo_y.min(p.y);
        hi_x = hi_x.max(p.x);
        hi_y = hi_y.max(p.y);
    }
    let (w, h) = (hi_x - lo_x, hi_y - lo_y);
    let (lo_x, hi_x) = (lo_x - expand * w, hi_x + expand * w);
    let (lo_y, hi_y) = (lo_y - expand * h, hi_y + expand * h);

    let (iw, ih) = (image_size.0 as f64, image_size.1 as f64);
    let x0 = lo_x.floor().clamp(0.0, iw);
    let y0 = lo_y.floor().clamp(0.0, ih);
    let x1 = (hi_x.floor() + 1.0).clamp(0.0, iw);
    let y1 = (hi_y.floor() + 1.0).clamp(0.0, ih);
    if x0 >= x1 || y0 >= y1 {
        return Err(Error::EmptyBox);
    }
    Ok(MouthBBox {
        x0: x0 as usize,
        y0: y0 as usize,
        x1: x1 as usize,
        y1: y1 as usize,
    })
}

/// Outer lip 49…60…49 and inner lip 61…68…61 as 1-px closed polylines.
pub fn draw_mouth_outline(canvas: &mut Image, landmarks: &Landmarks68) {
    let pts = landmarks.points();
    draw_closed_polyline(canvas, &pts[OUTER_LIP], OUTLINE);
    draw_closed_polyline(canvas, &pts[INNER_LIP], OUTLINE);
}

pub fn make_conditioned_pair(image: &Image, landmarks: &Landmarks68) -> Result<ConditionedPair> {
    make_conditioned_pair_with(image, landmarks, DEFAULT_EXPAND)
}

pub fn make_conditioned_pair_with(image: &Image, landmarks: &Landmarks68, expand: f64) -> Result<ConditionedPair> {
    let bbox = mouth_bbox(landmarks, expand, image.size())?;
    let mut input = image.clone();
    for y in bbox.y0..bbox.y1 {
        for x in bbox.x0..bbox.x1 {
            input.set(x, y, BLANK);
        }
    }
    draw_mouth_outline(&mut input, landmarks);
    Ok(ConditionedPair {
        input_image: input,
        target_image: image.clone(),
        bbox,
    })
}
