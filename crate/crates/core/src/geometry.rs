//! Mouth-local similarity normalization of 68-point face landmarks.
//!
//! A face is brought into a canonical frame in three steps: the mean of the
//! 20 mouth points is subtracted, the outer mouth-corner axis (49 → 55) is
//! rotated onto +x, and everything is divided by the Frobenius norm of the 68
//! center-relative vectors. The frame parameters (center, angle, scale) are
//! kept so a mouth shape can be placed back onto any target face.
//!
//! Landmark indices in this crate's public API follow the usual 1-based
//! 68-point numbering (49–68 = mouth). Storage is 0-based.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NUM_LANDMARKS: usize = 68;
pub const NUM_MOUTH: usize = 20;
pub const MOUTH_SHAPE_DIM: usize = 2 * NUM_MOUTH;

/// 0-based storage range of the mouth points (1-based 49–68).
pub const MOUTH: std::ops::Range<usize> = 48..68;
/// Outer lip contour, 1-based 49–60.
pub const OUTER_LIP: std::ops::Range<usize> = 48..60;
/// Inner lip contour, 1-based 61–68.
pub const INNER_LIP: std::ops::Range<usize> = 60..68;

/// Converts a 1-based landmark number into a storage index.
pub const fn lm(one_based: usize) -> usize {
    one_based - 1
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn rotate(self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Point::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<[f64; 2]> for Point {
    fn from([x, y]: [f64; 2]) -> Self {
        Point { x, y }
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, k: f64) -> Point {
        Point::new(self.x * k, self.y * k)
    }
}

/// Wraps an angle into (−π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// `p ↦ scale·R(angle)·p + translation`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Similarity {
    pub scale: f64,
    pub angle: f64,
    pub translation: Point,
}

impl Similarity {
    pub fn apply(&self, p: Point) -> Point {
        p.rotate(self.angle) * self.scale + self.translation
    }
}

/// The 68 landmarks of one face, in image pixels.
#[derive(Clone, Debug, PartialEq)]
pub struct Landmarks68 {
    points: [Point; NUM_LANDMARKS],
}

impl Landmarks68 {
    pub fn new(points: &[Point]) -> Result<Self> {
        if points.len() != NUM_LANDMARKS {
            return Err(Error::ShapeMismatch(format!(
                "expected {NUM_LANDMARKS} landmarks, got {}",
                points.len()
            )));
        }
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return Err(Error::InvalidParams(format!("landmark {} is not finite", i + 1)));
        }
        let mut arr = [Point::default(); NUM_LANDMARKS];
        arr.copy_from_slice(points);
        Ok(Landmarks68 { points: arr })
    }

    pub fn points(&self) -> &[Point; NUM_LANDMARKS] {
        &self.points
    }

    /// Landmark by 1-based number.
    pub fn get(&self, one_based: usize) -> Point {
        self.points[lm(one_based)]
    }

    pub fn mouth(&self) -> &[Point] {
        &self.points[MOUTH]
    }

    pub fn with_mouth(&self, mouth: &[Point; NUM_MOUTH]) -> Self {
        let mut out = self.clone();
        out.points[MOUTH].copy_from_slice(mouth);
        out
    }

    pub fn transformed(&self, t: &Similarity) -> Self {
        let mut out = self.clone();
        for p in out.points.iter_mut() {
            *p = t.apply(*p);
        }
        out
    }
}

/// Per-frame mouth-local similarity frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams {
    pub center: Point,
    /// In (−π, π].
    pub theta: f64,
    pub scale: f64,
}

/// 20 normalized mouth points as `[x49, y49, …, x68, y68]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MouthShape40(pub Vec<f64>);

impl MouthShape40 {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() != MOUTH_SHAPE_DIM {
            return Err(Error::ShapeMismatch(format!(
                "mouth shape needs {MOUTH_SHAPE_DIM} values, got {}",
                values.len()
            )));
        }
        Ok(MouthShape40(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn point(&self, i: usize) -> Point {
        Point::new(self.0[2 * i], self.0[2 * i + 1])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedFace {
    pub vectors: [Point; NUM_LANDMARKS],
    pub params: NormalizationParams,
}

const EPS: f64 = 1e-12;

pub fn estimate_frame(landmarks: &Landmarks68) -> Result<NormalizationParams> {
    let mouth = landmarks.mouth();
    let center = mouth.iter().fold(Point::default(), |acc, &p| acc + p) * (1.0 / NUM_MOUTH as f64);

    let axis = landmarks.get(55) - landmarks.get(49);
    if axis.norm() < EPS {
        return Err(Error::DegenerateFace("mouth corners coincide"));
    }
    let theta = wrap_angle(axis.y.atan2(axis.x));

    let scale = landmarks
        .points()
        .iter()
        .map(|&p| {
            let d = p - center;
            d.x * d.x + d.y * d.y
        })
        .sum::<f64>()
        .sqrt();
    if scale < EPS {
        return Err(Error::DegenerateFace("zero face scale"));
    }
    Ok(NormalizationParams { center, theta, scale })
}

pub fn normalize(landmarks: &Landmarks68) -> Result<NormalizedFace> {
    let params = estimate_frame(landmarks)?;
    let inv = 1.0 / params.scale;
    let mut vectors = [Point::default(); NUM_LANDMARKS];
    for (v, &p) in vectors.iter_mut().zip(landmarks.points()) {
        *v = (p - params.center).rotate(-params.theta) * inv;
    }
    Ok(NormalizedFace { vectors, params })
}

pub fn mouth_shape(norm: &NormalizedFace) -> MouthShape40 {
    let values = norm.vectors[MOUTH].iter().flat_map(|p| [p.x, p.y]).collect();
    MouthShape40(values)
}

/// Places a normalized mouth shape into the pixel frame described by `params`.
pub fn denormalize(shape: &MouthShape40, params: &NormalizationParams) -> [Point; NUM_MOUTH] {
    let mut out = [Point::default(); NUM_MOUTH];
    for (i, p) in out.iter_mut().enumerate() {
        *p = shape.point(i).rotate(params.theta) * params.scale + params.center;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn face_with(f: impl Fn(usize) -> Point) -> Landmarks68 {
        let pts: Vec<Point> = (0..NUM_LANDMARKS).map(f).collect();
        Landmarks68::new(&pts).unwrap()
    }

    fn spread(i: usize) -> Point {
        let a = i as f64 * 0.37;
        Point::new(10.0 + 7.0 * a.cos() + i as f64 * 0.1, 20.0 + 5.0 * a.sin())
    }

    fn with_corners(a: Point, b: Point) -> Landmarks68 {
        face_with(|i| match i {
            48 => a,
            54 => b,
            _ => spread(i),
        })
    }

    #[test]
    fn axis_aligned_angles() {
        let f = with_corners(Point::new(0.0, 0.0), Point::new(2.0, 0.0));
        assert_eq!(estimate_frame(&f).unwrap().theta, 0.0);
        let f = with_corners(Point::new(0.0, 0.0), Point::new(0.0, 2.0));
        assert!((estimate_frame(&f).unwrap().theta - PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn identical_points_are_degenerate() {
        let f = face_with(|_| Point::new(3.0, 4.0));
        assert!(matches!(estimate_frame(&f), Err(Error::DegenerateFace(_))));
        assert!(matches!(normalize(&f), Err(Error::DegenerateFace(_))));
    }

    #[test]
    fn coincident_corners_are_degenerate() {
        let f = with_corners(Point::new(1.0, 1.0), Point::new(1.0, 1.0));
        assert!(matches!(estimate_frame(&f), Err(Error::DegenerateFace(_))));
    }

    #[test]
    fn diagonal_corners_rotate_onto_x_axis() {
        let f = with_corners(Point::new(1.0, 1.0), Point::new(3.0, 3.0));
        let n = normalize(&f).unwrap();
        let d = n.vectors[lm(55)] - n.vectors[lm(49)];
        assert!(d.y.abs() < 1e-15);
        assert!(d.x > 0.0);
    }

    #[test]
    fn unit_frobenius_norm() {
        let n = normalize(&with_corners(Point::new(4.0, 9.0), Point::new(9.0, 7.5))).unwrap();
        let total: f64 = n.vectors.iter().map(|v| v.x * v.x + v.y * v.y).sum();
        assert!((total.sqrt() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mouth_shape_ignores_brows() {
        let a = with_corners(Point::new(0.0, 0.0), Point::new(2.0, 0.5));
        let c = estimate_frame(&a).unwrap().center;
        // brows rotated about the mouth center keep every |p - c|, so the scale is unchanged
        let mut pts = a.points().to_vec();
        for p in &mut pts[17..27] {
            *p = (*p - c).rotate(0.4) + c;
        }
        let b = Landmarks68::new(&pts).unwrap();
        let sa = mouth_shape(&normalize(&a).unwrap());
        let sb = mouth_shape(&normalize(&b).unwrap());
        for (x, y) in sa.0.iter().zip(&sb.0) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn brow_moves_only_rescale_mouth_shape() {
        let a = with_corners(Point::new(0.0, 0.0), Point::new(2.0, 0.5));
        let mut pts = a.points().to_vec();
        for p in &mut pts[17..27] {
            p.y -= 3.0;
        }
        let b = Landmarks68::new(&pts).unwrap();
        let sa = mouth_shape(&normalize(&a).unwrap());
        let sb = mouth_shape(&normalize(&b).unwrap());
        assert_eq!(sa.0.len(), MOUTH_SHAPE_DIM);
        let ratio = estimate_frame(&b).unwrap().scale / estimate_frame(&a).unwrap().scale;
        for (x, y) in sa.0.iter().zip(&sb.0) {
            assert!((x - y * ratio).abs() < 1e-12);
        }
    }

    #[test]
    fn denormalize_hand_arithmetic() {
        let mut values = vec![0.0; MOUTH_SHAPE_DIM];
        values[0] = 1.0;
        let shape = MouthShape40::new(values).unwrap();
        let params = NormalizationParams {
            center: Point::new(10.0, 10.0),
            theta: 0.0,
            scale: 2.0,
        };
        let out = denormalize(&shape, &params);
        assert_eq!(out[0], Point::new(12.0, 10.0));
        assert_eq!(out[1], Point::new(10.0, 10.0));
    }

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert!((wrap_angle(0.25) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn rejects_wrong_count_and_nan() {
        assert!(Landmarks68::new(&[Point::default(); 67]).is_err());
        let mut pts = vec![Point::default(); 68];
        pts[5].x = f64::NAN;
        assert!(Landmarks68::new(&pts).is_err());
    }
}
