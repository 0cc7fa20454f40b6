//! Parametric cartoon faces with exact 68-point ground truth.
//!
//! Landmarks are first laid out in a face-local frame (unit = `scale`, x to
//! the right, y down, origin at the face center) and then mapped to pixels by
//! `p = center + scale·R(rotation)·local`. Every local coordinate is affine in
//! the five mouth parameters:
//!
//! * jaw contour, j = 0..16, `t = πj/16`:
//!   `(−0.78 cos t, −0.10 + (1.0 + 0.05·jaw) sin t)`
//! * mouth, with `hw = 0.26 + 0.08·wide`, `b(u) = 1 − u²` and corner line
//!   `yc(u) = 0.40 − 0.05·smile·u²`; horizontal position
//!   `x = hw·u + 0.04·asymmetry·(u + 1)/2`:
//!   * outer top (49–55, u = −1 … 1 in thirds):
//!     `y = yc(u) − (0.08 + 0.06·open)·b(u)`
//!   * outer bottom (56–60, u = 2/3 … −2/3):
//!     `y = yc(u) + (0.07 + 0.12·open)·b(u) + 0.05·jaw`
//!   * inner lip (61–68) uses `x = 0.8·hw·u' + …` with `u = 0.8·u'`, u' in
//!     halves: top `y = yc(u) − (0.01 + 0.06·open)·b(u')`, bottom
//!     `y = yc(u) + (0.01 + 0.12·open)·b(u') + 0.05·jaw`.
//!
//! The inner-lip gap between 63 and 67 is therefore
//! `scale·(0.02 + 0.18·open + 0.05·jaw)` pixels.
//!
//! Brows, eyes and nose are fixed.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{lm, Landmarks68, Point, Similarity, INNER_LIP, NUM_LANDMARKS, OUTER_LIP};
use crate::image::{Image, Rgb};
use crate::raster::fill_polygon;

/// Inner-lip gap in face units at `open = jaw = 0`.
pub const BASE_GAP: f64 = 0.02;
/// Gap added per unit of `mouth_open`.
pub const OPEN_GAP: f64 = 0.18;
/// Gap added per unit of `jaw`.
pub const JAW_GAP: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaceParams {
    /// [0, 1]
    pub mouth_open: f64,
    /// [0, 1]
    pub mouth_wide: f64,
    /// [−1, 1]
    pub smile: f64,
    /// [0, 1]
    pub jaw: f64,
    /// [−1, 1]
    pub asymmetry: f64,
    pub center: Point,
    pub rotation: f64,
    /// Face half-height in pixels.
    pub scale: f64,
    pub image_size: (usize, usize),
}

impl FaceParams {
    /// Closed mouth, mid width, no smile, centered in a 64×64 image.
    pub fn neutral() -> Self {
        FaceParams {
            mouth_open: 0.0,
            mouth_wide: 0.5,
            smile: 0.0,
            jaw: 0.0,
            asymmetry: 0.0,
            center: Point::new(32.0, 30.0),
            rotation: 0.0,
            scale: 22.0,
            image_size: (64, 64),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (w, h) = self.image_size;
        let bad = |what: &str| Err(Error::InvalidParams(what.to_string()));
        if w < 32 || h < 32 {
            return bad("image must be at least 32x32");
        }
        if !(self.scale > 0.0) || !self.scale.is_finite() {
            return bad("scale must be positive");
        }
        if !self.center.is_finite()
            || self.center.x < 0.0
            || self.center.y < 0.0
            || self.center.x >= w as f64
            || self.center.y >= h as f64
        {
            return bad("center must lie inside the image");
        }
        let ranges = [
            (self.mouth_open, 0.0, 1.0, "mouth_open"),
            (self.mouth_wide, 0.0, 1.0, "mouth_wide"),
            (self.smile, -1.0, 1.0, "smile"),
            (self.jaw, 0.0, 1.0, "jaw"),
            (self.asymmetry, -1.0, 1.0, "asymmetry"),
        ];
        for (v, lo, hi, name) in ranges {
            if !(lo..=hi).contains(&v) {
                return Err(Error::InvalidParams(format!("{name}={v} outside [{lo}, {hi}]")));
            }
        }
        if !self.rotation.is_finite() {
            return bad("rotation must be finite");
        }
        Ok(())
    }

    fn pose(&self) -> Similarity {
        Similarity {
            scale: self.scale,
            angle: self.rotation,
            translation: self.center,
        }
    }

    /// Sets the `i`-th mouth latent (open, wide, smile, jaw, asymmetry).
    pub fn set_latent(&mut self, i: usize, v: f64) {
        match i {
            0 => self.mouth_open = v,
            1 => self.mouth_wide = v,
            2 => self.smile = v,
            3 => self.jaw = v,
            4 => self.asymmetry = v,
            _ => panic!("mouth latent index {i} out of range"),
        }
    }
}

pub const NUM_LATENTS: usize = 5;
const LATENT_RANGES: [(f64, f64); NUM_LATENTS] = [(0.0, 1.0), (0.0, 1.0), (-1.0, 1.0), (0.0, 1.0), (-1.0, 1.0)];

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSample {
    pub image: Image,
    pub landmarks: Landmarks68,
    pub params: FaceParams,
}

/// Landmarks in the face-local frame.
pub fn local_layout(p: &FaceParams) -> [Point; NUM_LANDMARKS] {
    let mut pts = [Point::default(); NUM_LANDMARKS];

    for (j, pt) in pts.iter_mut().enumerate().take(17) {
        let t = PI * j as f64 / 16.0;
        *pt = Point::new(-0.78 * t.cos(), -0.10 + (1.0 + 0.05 * p.jaw) * t.sin());
    }

    // brows 18–22 (image left) mirrored into 23–27
    for k in 0..5 {
        let x = -0.60 + 0.1125 * k as f64;
        let y = -0.52 - 0.06 * (PI * k as f64 / 4.0).sin();
        pts[lm(18) + k] = Point::new(x, y);
        pts[lm(27) - k] = Point::new(-x, y);
    }

    for (k, y) in [-0.35, -0.25, -0.15, -0.05].into_iter().enumerate() {
        pts[lm(28) + k] = Point::new(0.0, y);
    }
    let nostrils = [(-0.12, 0.05), (-0.06, 0.08), (0.0, 0.09), (0.06, 0.08), (0.12, 0.05)];
    for (k, (x, y)) in nostrils.into_iter().enumerate() {
        pts[lm(32) + k] = Point::new(x, y);
    }

    let left_eye = [
        (-0.45, -0.30),
        (-0.37, -0.35),
        (-0.29, -0.35),
        (-0.21, -0.30),
        (-0.29, -0.25),
        (-0.37, -0.25),
    ];
    // 43 mirrors 40, 44↔39, 45↔38, 46↔37, 47↔42, 48↔41
    let mirror_of = [3, 2, 1, 0, 5, 4];
    for k in 0..6 {
        let (x, y) = left_eye[k];
        pts[lm(37) + k] = Point::new(x, y);
        let (mx, my) = left_eye[mirror_of[k]];
        pts[lm(43) + k] = Point::new(-mx, my);
    }

    let hw = 0.26 + 0.08 * p.mouth_wide;
    let x_at = |u: f64| hw * u + 0.04 * p.asymmetry * (u + 1.0) / 2.0;
    let yc = |u: f64| 0.40 - 0.05 * p.smile * u * u;
    let bump = |u: f64| 1.0 - u * u;

    let outer_top = [-1.0, -2.0 / 3.0, -1.0 / 3.0, 0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0];
    for (k, &u) in outer_top.iter().enumerate() {
        let y = yc(u) - (0.08 + 0.06 * p.mouth_open) * bump(u);
        pts[lm(49) + k] = Point::new(x_at(u), y);
    }
    let outer_bottom = [2.0 / 3.0, 1.0 / 3.0, 0.0, -1.0 / 3.0, -2.0 / 3.0];
    for (k, &u) in outer_bottom.iter().enumerate() {
        let y = yc(u) + (0.07 + 0.12 * p.mouth_open) * bump(u) + 0.05 * p.jaw;
        pts[lm(56) + k] = Point::new(x_at(u), y);
    }

    // inner lip: 61 (left corner), 62–64 top, 65 (right corner), 66–68 bottom
    let inner = [
        (-1.0, 0.0),
        (-0.5, -1.0),
        (0.0, -1.0),
        (0.5, -1.0),
        (1.0, 0.0),
        (0.5, 1.0),
        (0.0, 1.0),
        (-0.5, 1.0),
    ];
    for (k, &(ui, side)) in inner.iter().enumerate() {
        let u = 0.8 * ui;
        let y = if side < 0.0 {
            yc(u) - (BASE_GAP / 2.0 + 0.06 * p.mouth_open) * bump(ui)
        } else if side > 0.0 {
            yc(u) + (BASE_GAP / 2.0 + 0.12 * p.mouth_open) * bump(ui) + JAW_GAP * p.jaw
        } else {
            yc(u)
        };
        pts[lm(61) + k] = Point::new(x_at(u), y);
    }

    pts
}

pub fn face_landmarks(p: &FaceParams) -> Result<Landmarks68> {
    p.validate()?;
    let pose = p.pose();
    let pts: Vec<Point> = local_layout(p).iter().map(|&q| pose.apply(q)).collect();
    let (w, h) = p.image_size;
    for (i, q) in pts.iter().enumerate() {
        if q.x < 0.0 || q.y < 0.0 || q.x >= w as f64 || q.y >= h as f64 {
            return Err(Error::OutOfFrame {
                index: i + 1,
                x: q.x,
                y: q.y,
                width: w,
                height: h,
            });
        }
    }
    Landmarks68::new(&pts)
}

pub const BACKGROUND: Rgb = [0.25, 0.35, 0.55];
pub const SKIN: Rgb = [0.85, 0.68, 0.55];
pub const BROW: Rgb = [0.30, 0.20, 0.15];
pub const EYE: Rgb = [0.88, 0.88, 0.85];
pub const NOSE: Rgb = [0.62, 0.45, 0.38];
pub const LIP: Rgb = [0.75, 0.30, 0.30];
pub const MOUTH_INTERIOR: Rgb = [0.20, 0.08, 0.10];

pub fn render_face(params: &FaceParams) -> Result<SyntheticSample> {
    let landmarks = face_landmarks(params)?;
    let pose = params.pose();
    let to_px = |q: Point| pose.apply(q);
    let pts = landmarks.points();
    let (w, h) = params.image_size;
    let mut img = Image::filled(w, h, BACKGROUND);

    // head outline: jaw contour closed by an upper arc through the forehead
    let mut head: Vec<Point> = pts[0..17].to_vec();
    for k in 1..12 {
        let t = PI * k as f64 / 12.0;
        head.push(to_px(Point::new(0.78 * t.cos(), -0.10 - 0.62 * t.sin())));
    }
    fill_polygon(&mut img, &head, SKIN);

    for brow in [lm(18)..lm(23), lm(23)..lm(28)] {
        let mut band: Vec<Point> = pts[brow.clone()].to_vec();
        let local = local_layout(params);
        for i in brow.rev() {
            band.push(to_px(local[i] + Point::new(0.0, 0.05)));
        }
        fill_polygon(&mut img, &band, BROW);
    }

    fill_polygon(&mut img, &pts[lm(37)..=lm(42)], EYE);
    fill_polygon(&mut img, &pts[lm(43)..=lm(48)], EYE);

    let local = local_layout(params);
    let bridge = [
        to_px(local[lm(28)] + Point::new(-0.025, 0.0)),
        to_px(local[lm(28)] + Point::new(0.025, 0.0)),
        to_px(local[lm(31)] + Point::new(0.025, 0.0)),
        to_px(local[lm(31)] + Point::new(-0.025, 0.0)),
    ];
    fill_polygon(&mut img, &bridge, NOSE);
    let mut nostrils: Vec<Point> = pts[lm(32)..=lm(36)].to_vec();
    nostrils.push(to_px(local[lm(31)]));
    fill_polygon(&mut img, &nostrils, NOSE);

    fill_polygon(&mut img, &pts[OUTER_LIP], LIP);
    fill_polygon(&mut img, &pts[INNER_LIP], MOUTH_INTERIOR);

    Ok(SyntheticSample {
        image: img,
        landmarks,
        params: *params,
    })
}

/// Random head pose for a 64×64 frame: center jitter, in-plane rotation and size.
pub fn random_pose(rng: &mut impl Rng, base: &mut FaceParams) {
    base.center = Point::new(32.0 + rng.gen_range(-3.0..3.0), 30.0 + rng.gen_range(-3.0..3.0));
    base.rotation = rng.gen_range(-0.15..0.15);
    base.scale = rng.gen_range(20.0..23.0);
}

/// Draws `n` faces whose first `latent_dims` mouth latents are uniform over
/// their ranges; the remaining latents stay neutral. Head pose varies.
pub fn sample_corpus(seed: u64, n: usize, latent_dims: usize) -> Result<Vec<SyntheticSample>> {
    if n == 0 {
        return Err(Error::InvalidParams("corpus size must be at least 1".into()));
    }
    if !(1..=NUM_LATENTS).contains(&latent_dims) {
        return Err(Error::InvalidParams(format!(
            "latent_dims={latent_dims} outside 1..={NUM_LATENTS}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let mut p = FaceParams::neutral();
            for (i, &(lo, hi)) in LATENT_RANGES.iter().enumerate().take(latent_dims) {
                p.set_latent(i, rng.gen_range(lo..=hi));
            }
            random_pose(&mut rng, &mut p);
            render_face(&p)
        })
        .collect()
}
