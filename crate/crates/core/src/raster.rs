//! Aliased rasterization: integer line stepping and even-odd polygon fill.
//!
//! Pixel `(i, j)` covers `[i, i+1) × [j, j+1)`, so a continuous point lands
//! in pixel `(floor x, floor y)`.

use crate::geometry::Point;
use crate::image::{Image, Rgb};

pub type Pixel = (i64, i64);

pub fn pixel_of(p: Point) -> Pixel {
    (p.x.floor() as i64, p.y.floor() as i64)
}

/// Bresenham line from `a` to `b`, both endpoints included.
///
/// Along the major axis step `i` the minor offset is
/// `floor((2·i·|d_minor| + |d_major|) / (2·|d_major|))`: exact halves advance.
pub fn bresenham(a: Pixel, b: Pixel) -> Vec<Pixel> {
    let (dx, dy) = ((b.0 - a.0).abs(), (b.1 - a.1).abs());
    let (sx, sy) = ((b.0 - a.0).signum(), (b.1 - a.1).signum());
    let mut out = Vec::with_capacity(dx.max(dy) as usize + 1);
    if dx >= dy {
        let mut err = 2 * dy - dx;
        let mut y = a.1;
        for i in 0..=dx {
            out.push((a.0 + sx * i, y));
            if err >= 0 {
                y += sy;
                err -= 2 * dx;
            }
            err += 2 * dy;
        }
    } else {
        let mut err = 2 * dx - dy;
        let mut x = a.0;
        for i in 0..=dy {
            out.push((x, a.1 + sy * i));
            if err >= 0 {
                x += sx;
                err -= 2 * dy;
            }
            err += 2 * dx;
        }
    }
    out
}

/// Pixels of the closed polyline through `points` (last point joins the first).
pub fn closed_polyline(points: &[Point]) -> Vec<Pixel> {
    let n = points.len();
    let mut out = Vec::new();
    for i in 0..n {
        let seg = bresenham(pixel_of(points[i]), pixel_of(points[(i + 1) % n]));
        out.extend(seg);
    }
    out
}

pub fn draw_closed_polyline(img: &mut Image, points: &[Point], color: Rgb) {
    for (x, y) in closed_polyline(points) {
        img.put(x, y, color);
    }
}

/// Fills pixels whose centers lie inside the polygon (even-odd rule).
pub fn fill_polygon(img: &mut Image, poly: &[Point], color: Rgb) {
    if poly.len() < 3 {
        return;
    }
    let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in poly {
        y_min = y_min.min(p.y);
        y_max = y_max.max(p.y);
    }
    let h = img.height() as i64;
    let w = img.width() as i64;
    let row_lo = ((y_min - 0.5).ceil() as i64).max(0);
    let row_hi = ((y_max - 0.5).floor() as i64).min(h - 1);
    let mut crossings = Vec::with_capacity(poly.len());
    for row in row_lo..=row_hi {
        let yc = row as f64 + 0.5;
        crossings.clear();
        for i in 0..poly.len() {
            let (p, q) = (poly[i], poly[(i + 1) % poly.len()]);
            // half-open in y so shared vertices count once
            if (p.y <= yc) != (q.y <= yc) {
                crossings.push(p.x + (yc - p.y) * (q.x - p.x) / (q.y - p.y));
            }
        }
        crossings.sort_by(f64::total_cmp);
        for span in crossings.chunks_exact(2) {
            let lo = ((span[0] - 0.5).ceil() as i64).max(0);
            let hi = ((span[1] - 0.5).ceil() as i64 - 1).min(w - 1);
            for col in lo..=hi {
                img.set(col as usize, row as usize, color);
            }
        }
    }
}
