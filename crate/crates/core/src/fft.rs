//! Overlap-and-save FFT convolution, used as a baseline.
//!
//! Each `α×α` input tile and each zero-padded, reversed filter is taken to
//! the frequency domain with a radix-2 FFT. Products are reduced over
//! channels frequency by frequency, as complex matrix products carried out
//! with three real matrix products. Only the `α(⌊α/2⌋+1)` frequencies that
//! are not fixed by Hermitian symmetry are multiplied; the rest are
//! reflected. After the inverse transform only the `(α-R+1)×(α-S+1)`
//! outputs untouched by cyclic wrap-around are kept, so input tiles overlap
//! by `R-1` and `S-1`.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::engine::{ForwardStats, TileGrid};
use crate::error::{ConvError, Result};
use crate::gemm::{gemm, MatRef};
use crate::matrix::Matrix;
use crate::reference::{expect_shape, LayerConfig};
use crate::scalar::Real;
use crate::tensor::Tensor4;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Complex<T> {
    pub re: T,
    pub im: T,
}

impl<T: Real> Complex<T> {
    pub fn new(re: T, im: T) -> Self {
        Complex { re, im }
    }

    pub fn conj(self) -> Self {
        Complex { re: self.re, im: -self.im }
    }

    fn add(self, o: Self) -> Self {
        Complex { re: self.re + o.re, im: self.im + o.im }
    }

    fn sub(self, o: Self) -> Self {
        Complex { re: self.re - o.re, im: self.im - o.im }
    }
}

/// Schoolbook product, four real multiplies.
#[inline]
pub fn complex_mul_4<T: Real>(x: Complex<T>, y: Complex<T>) -> Complex<T> {
    Complex { re: x.re * y.re - x.im * y.im, im: x.re * y.im + x.im * y.re }
}

/// Product with three real multiplies.
///
/// With `x = x₀ + i x₁` and `y = y₀ + i y₁`, let `uₐ = x₀`, `u_b = x₀ + x₁`,
/// `u_c = x₁ − x₀`, `vₐ = y₀`, `v_b = y₁`, `v_c = y₀ + y₁` and
/// `t = uₐ v_c`. Then the real part is `t − u_b v_b` and the imaginary
/// part is `u_c vₐ + t`.
///
/// ```
/// use fastconv::fft::{complex_mul_3, Complex};
/// let z = complex_mul_3(Complex::new(1.0, 2.0), Complex::new(3.0, 4.0));
/// assert_eq!(z, Complex::new(-5.0, 10.0));
/// ```
#[inline]
pub fn complex_mul_3<T: Real>(x: Complex<T>, y: Complex<T>) -> Complex<T> {
    let (ua, ub, uc) = (x.re, x.re + x.im, x.im - x.re);
    let (va, vb, vc) = (y.re, y.im, y.re + y.im);
    let t = ua * vc;
    Complex { re: t - ub * vb, im: uc * va + t }
}

/// Complex multiplies needed per `α×α` real tile: `α(⌊α/2⌋+1)`.
pub fn hermitian_unique_count(alpha: usize) -> usize {
    alpha * (alpha / 2 + 1)
}

/// Inner loop of [`fast_cgemm`] on strided views; returns the multiply count.
#[allow(clippy::too_many_arguments)]
fn fast_cgemm_into<T: Real>(
    ua: MatRef<'_, T>,
    ub: MatRef<'_, T>,
    uc: MatRef<'_, T>,
    va: MatRef<'_, T>,
    vb: MatRef<'_, T>,
    vc: MatRef<'_, T>,
    m0: &mut [T],
    m1: &mut [T],
    t: &mut [T],
) -> u64 {
    let mut count = gemm(ua, vc, t);
    count += gemm(uc, va, m0);
    for (o, &x) in m0.iter_mut().zip(t.iter()) {
        *o += x;
    }
    count += gemm(ub, vb, m1);
    for (o, &x) in m1.iter_mut().zip(t.iter()) {
        *o = x - *o;
    }
    count
}

/// Complex matrix product `(x₀ + i x₁)(y₀ + i y₁)` from the split factors
/// `Ua = x₀, Ub = x₀ + x₁, Uc = x₁ − x₀` and `Va = y₀, Vb = y₁, Vc = y₀ + y₁`.
///
/// Returns `(M0, M1)` with `M0 = Uc·Va + T` and `M1 = −Ub·Vb + T`, where
/// `T = Ua·Vc`. `M1` is the real part of the product and `M0` the
/// imaginary part.
pub fn fast_cgemm<T: Real>(
    ua: &Matrix<T>,
    ub: &Matrix<T>,
    uc: &Matrix<T>,
    va: &Matrix<T>,
    vb: &Matrix<T>,
    vc: &Matrix<T>,
) -> Result<(Matrix<T>, Matrix<T>)> {
    let (k, c) = ua.shape();
    let (c2, p) = va.shape();
    if ub.shape() != (k, c) || uc.shape() != (k, c) || vb.shape() != (c2, p) || vc.shape() != (c2, p) || c != c2 {
        return Err(ConvError::ShapeMismatch(format!(
            "split factors do not conform: U {k}x{c}, V {c2}x{p}"
        )));
    }
    fn view<T: Copy>(m: &Matrix<T>) -> MatRef<'_, T> {
        MatRef::row_major(m.as_slice(), m.rows(), m.cols())
    }
    let mut m0 = vec![T::zero(); k * p];
    let mut m1 = vec![T::zero(); k * p];
    let mut t = vec![T::zero(); k * p];
    fast_cgemm_into(view(ua), view(ub), view(uc), view(va), view(vb), view(vc), &mut m0, &mut m1, &mut t);
    Ok((Matrix::from_vec(k, p, m0)?, Matrix::from_vec(k, p, m1)?))
}

/// Radix-2 decimation-in-time FFT of a fixed power-of-two length.
#[derive(Debug, Clone)]
pub struct Fft<T> {
    n: usize,
    rev: Vec<usize>,
    twiddles: Vec<Complex<T>>,
}

impl<T: Real> Fft<T> {
    pub fn new(n: usize) -> Result<Self> {
        if !n.is_power_of_two() {
            return Err(ConvError::InvalidConfig(format!("FFT length {n} is not a power of two")));
        }
        let bits = n.trailing_zeros();
        let rev = (0..n)
            .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) })
            .collect();
        let twiddles = (0..n / 2)
            .map(|k| {
                let a = -2.0 * PI * k as f64 / n as f64;
                Complex::new(T::from_f64(a.cos()), T::from_f64(a.sin()))
            })
            .collect();
        Ok(Fft { n, rev, twiddles })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Unnormalised transform; `inverse` flips the twiddle sign only.
    pub fn transform(&self, buf: &mut [Complex<T>], inverse: bool) {
        let n = self.n;
        assert_eq!(buf.len(), n);
        for i in 0..n {
            let j = self.rev[i];
            if i < j {
                buf.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= n {
            let step = n / len;
            for start in (0..n).step_by(len) {
                for j in 0..len / 2 {
                    let w = self.twiddles[j * step];
                    let w = if inverse { w.conj() } else { w };
                    let a = buf[start + j];
                    let b = complex_mul_4(buf[start + j + len / 2], w);
                    buf[start + j] = a.add(b);
                    buf[start + j + len / 2] = a.sub(b);
                }
            }
            len <<= 1;
        }
    }

    /// Row-column 2-d transform of a row-major `n×n` plane.
    pub fn transform_2d(&self, plane: &mut [Complex<T>], inverse: bool, column: &mut Vec<Complex<T>>) {
        let n = self.n;
        for row in plane.chunks_mut(n) {
            self.transform(row, inverse);
        }
        column.resize(n, Complex::default());
        for v in 0..n {
            for u in 0..n {
                column[u] = plane[u * n + v];
            }
            self.transform(column, inverse);
            for u in 0..n {
                plane[u * n + v] = column[u];
            }
        }
    }
}

/// A layer computed with overlap-and-save FFT tiles of size `α`.
#[derive(Debug, Clone)]
pub struct FftLayer<T> {
    cfg: LayerConfig,
    alpha: usize,
    fft: Fft<T>,
    grid: TileGrid,
    hermitian: bool,
}

impl<T: Real> FftLayer<T> {
    pub fn new(cfg: LayerConfig, alpha: usize) -> Result<Self> {
        cfg.validate()?;
        if alpha < cfg.r || alpha < cfg.s {
            return Err(ConvError::UnsupportedTile(alpha));
        }
        let fft = Fft::new(alpha).map_err(|_| ConvError::UnsupportedTile(alpha))?;
        let m = (alpha - cfg.r + 1, alpha - cfg.s + 1);
        let grid = TileGrid::new(cfg.n, cfg.out_h(), cfg.out_w(), m, (alpha, alpha), cfg.pad);
        Ok(FftLayer { cfg, alpha, fft, grid, hermitian: true })
    }

    /// Multiply every frequency instead of the Hermitian-unique half.
    pub fn full_plane(mut self) -> Self {
        self.hermitian = false;
        self
    }

    pub fn grid(&self) -> &TileGrid {
        &self.grid
    }

    fn stored_cols(&self) -> usize {
        if self.hermitian {
            self.alpha / 2 + 1
        } else {
            self.alpha
        }
    }

    /// Number of frequencies multiplied per tile.
    pub fn frequencies(&self) -> usize {
        self.alpha * self.stored_cols()
    }

    /// Zeroes `buf` to `α×α`, lets `fill` write samples, then transforms.
    fn spectrum(&self, fill: impl Fn(&mut [Complex<T>]), buf: &mut Vec<Complex<T>>, col: &mut Vec<Complex<T>>) {
        let a = self.alpha;
        buf.clear();
        buf.resize(a * a, Complex::default());
        fill(buf);
        self.fft.transform_2d(buf, false, col);
    }

    pub fn forward(&self, d: &Tensor4<T>, g: &Tensor4<T>) -> Result<Tensor4<T>> {
        Ok(self.forward_with_stats(d, g)?.0)
    }

    pub fn forward_with_stats(&self, d: &Tensor4<T>, g: &Tensor4<T>) -> Result<(Tensor4<T>, ForwardStats)> {
        let cfg = &self.cfg;
        expect_shape("data", d.shape(), cfg.data_shape())?;
        expect_shape("filters", g.shape(), cfg.filter_shape())?;
        let (a, nv, nf) = (self.alpha, self.stored_cols(), self.frequencies());
        let (kk, cc, p) = (cfg.k, cfg.c, self.grid.count());
        let (r, s) = (cfg.r, cfg.s);

        // U split factors as nf contiguous K×C matrices each; built per k as
        // [factor][f][c] blocks, then copied row by row.
        let blocks: Vec<Vec<T>> = (0..kk)
            .into_par_iter()
            .map(|k| {
                let (mut buf, mut col) = (Vec::new(), Vec::new());
                let mut block = vec![T::zero(); 3 * nf * cc];
                for c in 0..cc {
                    let plane = g.plane(k, c);
                    self.spectrum(
                        |t| {
                            for y in 0..r {
                                for x in 0..s {
                                    t[y * a + x] = Complex::new(plane[(r - 1 - y) * s + (s - 1 - x)], T::zero());
                                }
                            }
                        },
                        &mut buf,
                        &mut col,
                    );
                    for uu in 0..a {
                        for vv in 0..nv {
                            let z = buf[uu * a + vv];
                            let f = uu * nv + vv;
                            block[f * cc + c] = z.re;
                            block[(nf + f) * cc + c] = z.re + z.im;
                            block[(2 * nf + f) * cc + c] = z.im - z.re;
                        }
                    }
                }
                block
            })
            .collect();
        let mut u = vec![T::zero(); 3 * nf * kk * cc];
        for (k, block) in blocks.iter().enumerate() {
            for (row, src) in block.chunks(cc).enumerate() {
                let (factor, f) = (row / nf, row % nf);
                u[factor * nf * kk * cc + (f * kk + k) * cc..][..cc].copy_from_slice(src);
            }
        }
        drop(blocks);
        let (ua, rest) = u.split_at(nf * kk * cc);
        let (ub, uc) = rest.split_at(nf * kk * cc);

        // V split factors, [c][f][b] each.
        let mut v = vec![T::zero(); 3 * cc * nf * p];
        let (va, rest) = v.split_at_mut(cc * nf * p);
        let (vb, vc) = rest.split_at_mut(cc * nf * p);
        let grid = self.grid;
        va.par_chunks_mut(nf * p)
            .zip(vb.par_chunks_mut(nf * p))
            .zip(vc.par_chunks_mut(nf * p))
            .enumerate()
            .for_each_init(
                || (Vec::new(), Vec::new()),
                |(buf, col), (c, ((fa, fb), fc))| {
                    for b in 0..p {
                        let (i, ty, tx) = grid.coords(b);
                        let (y0, x0) = grid.origin(ty, tx);
                        let plane = d.plane(i, c);
                        self.spectrum(
                            |t| {
                                for y in 0..a {
                                    let yy = y0 + y as isize;
                                    if yy < 0 || yy >= cfg.h as isize {
                                        continue;
                                    }
                                    for x in 0..a {
                                        let xx = x0 + x as isize;
                                        if xx >= 0 && xx < cfg.w as isize {
                                            t[y * a + x] =
                                                Complex::new(plane[yy as usize * cfg.w + xx as usize], T::zero());
                                        }
                                    }
                                }
                            },
                            buf,
                            col,
                        );
                        for uu in 0..a {
                            for vv in 0..nv {
                                let z = buf[uu * a + vv];
                                let idx = (uu * nv + vv) * p + b;
                                fa[idx] = z.re;
                                fb[idx] = z.im;
                                fc[idx] = z.re + z.im;
                            }
                        }
                    }
                },
            );

        // Per-frequency complex products, [f][k][b] for imaginary (m0) and real (m1).
        let mut m0 = vec![T::zero(); nf * kk * p];
        let mut m1 = vec![T::zero(); nf * kk * p];
        let (va, vb, vc) = (&*va, &*vb, &*vc);
        let count: u64 = m0
            .par_chunks_mut(kk * p)
            .zip(m1.par_chunks_mut(kk * p))
            .enumerate()
            .map(|(f, (o0, o1))| {
                let uview = |x| strided(x, f * kk * cc, kk, cc, cc, 1);
                let vview = |x| strided(x, f * p, cc, p, nf * p, 1);
                let mut t = vec![T::zero(); kk * p];
                fast_cgemm_into(uview(ua), uview(ub), uview(uc), vview(va), vview(vb), vview(vc), o0, o1, &mut t)
            })
            .sum();

        // Reconstruct, invert, keep the valid block.
        let (oh, ow) = (cfg.out_h(), cfg.out_w());
        let (mh, mw) = (grid.m_h, grid.m_w);
        let scale = T::from_f64(1.0 / (a * a) as f64);
        let hermitian = self.hermitian;
        let mut y = Tensor4::<T>::zeros(cfg.output_shape());
        y.as_mut_slice().par_chunks_mut(oh * ow).enumerate().for_each(|(plane, out)| {
            let (i, k) = (plane / kk, plane % kk);
            let mut buf = vec![Complex::<T>::default(); a * a];
            let mut col = Vec::new();
            for ty in 0..grid.tiles_h {
                for tx in 0..grid.tiles_w {
                    let b = grid.index(i, ty, tx);
                    for uu in 0..a {
                        for vv in 0..nv {
                            let idx = ((uu * nv + vv) * kk + k) * p + b;
                            buf[uu * a + vv] = Complex::new(m1[idx], m0[idx]);
                        }
                    }
                    if hermitian {
                        for uu in 0..a {
                            for vv in nv..a {
                                buf[uu * a + vv] = buf[((a - uu) % a) * a + (a - vv)].conj();
                            }
                        }
                    }
                    self.fft.transform_2d(&mut buf, true, &mut col);
                    let (oy, ox) = (ty * mh, tx * mw);
                    for yy in 0..mh.min(oh - oy) {
                        for xx in 0..mw.min(ow - ox) {
                            out[(oy + yy) * ow + ox + xx] = buf[(r - 1 + yy) * a + (s - 1 + xx)].re * scale;
                        }
                    }
                }
            }
        });
        Ok((y, ForwardStats { multiply_stage: count, tiles: p }))
    }
}

fn strided<T>(data: &[T], offset: usize, rows: usize, cols: usize, row_stride: usize, col_stride: usize) -> MatRef<'_, T> {
    MatRef { data: &data[offset..], rows, cols, row_stride, col_stride }
}

/// One-shot overlap-and-save forward pass with tile size `alpha`.
pub fn fft_forward_layer<T: Real>(
    d: &Tensor4<T>,
    g: &Tensor4<T>,
    cfg: &LayerConfig,
    alpha: usize,
) -> Result<Tensor4<T>> {
    FftLayer::new(*cfg, alpha)?.forward(d, g)
}
