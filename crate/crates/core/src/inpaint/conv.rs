//! im2col convolution kernels over planar `C×H×W` buffers.

/// Geometry of a `k×k`, stride `s`, padding `p` window sweep over a
/// `channels×height×width` image.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Geom {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
}

impl Geom {
    pub fn out_h(&self) -> usize {
        (self.height + 2 * self.pad - self.k) / self.stride + 1
    }

    pub fn out_w(&self) -> usize {
        (self.width + 2 * self.pad - self.k) / self.stride + 1
    }

    pub fn positions(&self) -> usize {
        self.out_h() * self.out_w()
    }

    pub fn rows(&self) -> usize {
        self.channels * self.k * self.k
    }

    /// Per-position source pixel index for one `(ky, kx)` tap, or `None` in the padding.
    #[inline]
    fn source(&self, oy: usize, ox: usize, ky: usize, kx: usize) -> Option<usize> {
        let y = (oy * self.stride + ky) as isize - self.pad as isize;
        let x = (ox * self.stride + kx) as isize - self.pad as isize;
        if y < 0 || x < 0 || y >= self.height as isize || x >= self.width as isize {
            None
        } else {
            Some(y as usize * self.width + x as usize)
        }
    }
}

/// `(C·k·k) × (OH·OW)` patch matrix, row index `(c·k + ky)·k + kx`.
pub fn im2col(img: &[f64], g: &Geom, cols: &mut [f64]) {
    let (oh, ow, npos) = (g.out_h(), g.out_w(), g.positions());
    let plane = g.height * g.width;
    debug_assert_eq!(img.len(), g.channels * plane);
    debug_assert_eq!(cols.len(), g.rows() * npos);
    for c in 0..g.channels {
        let src = &img[c * plane..(c + 1) * plane];
        for ky in 0..g.k {
            for kx in 0..g.k {
                let row = (c * g.k + ky) * g.k + kx;
                let dst = &mut cols[row * npos..(row + 1) * npos];
                for oy in 0..oh {
                    for ox in 0..ow {
                        dst[oy * ow + ox] = match g.source(oy, ox, ky, kx) {
                            Some(i) => src[i],
                            None => 0.0,
                        };
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatter-adds patch values back into the image.
pub fn col2im(cols: &[f64], g: &Geom, img: &mut [f64]) {
    let (oh, ow, npos) = (g.out_h(), g.out_w(), g.positions());
    let plane = g.height * g.width;
    img.iter_mut().for_each(|v| *v = 0.0);
    for c in 0..g.channels {
        let dst = &mut img[c * plane..(c + 1) * plane];
        for ky in 0..g.k {
            for kx in 0..g.k {
                let row = (c * g.k + ky) * g.k + kx;
                let src = &cols[row * npos..(row + 1) * npos];
                for oy in 0..oh {
                    for ox in 0..ow {
                        if let Some(i) = g.source(oy, ox, ky, kx) {
                            dst[i] += src[oy * ow + ox];
                        }
                    }
                }
            }
        }
    }
}

/// Row-major `C = op(A)·op(B) + beta·C` with `op(A)` of shape `m×k` and `op(B)` of `k×n`.
#[allow(clippy::too_many_arguments)]
pub fn gemm(m: usize, k: usize, n: usize, a: &[f64], a_t: bool, b: &[f64], b_t: bool, beta: f64, c: &mut [f64]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    let (rsa, csa) = if a_t { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_t { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the slices hold exactly m·k, k·n and m·n elements and the strides
    // above address them in bounds for both layouts.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}
