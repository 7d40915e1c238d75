//! Direct convolution and its two gradients: the ground truth every fast
//! path is checked against.

use rayon::prelude::*;

use crate::error::{ConvError, Result};
use crate::scalar::Real;
use crate::tensor::{Precision, Tensor4};

/// Shape of one convnet layer.
///
/// `pad` zeros are added on every border; the forward output is
/// `(H + 2·pad - R + 1) × (W + 2·pad - S + 1)`. `depth` is how many times the
/// layer repeats in its network and only affects totals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LayerConfig {
    pub n: usize,
    pub c: usize,
    pub k: usize,
    pub h: usize,
    pub w: usize,
    pub r: usize,
    pub s: usize,
    pub pad: usize,
    pub depth: usize,
}

impl LayerConfig {
    /// A square-filter layer with one image and depth 1.
    pub fn new(c: usize, k: usize, h: usize, w: usize, r: usize, pad: usize) -> Self {
        LayerConfig { n: 1, c, k, h, w, r, s: r, pad, depth: 1 }
    }

    pub fn with_batch(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    pub fn with_depth(mut self, depth: usize) -> Self {
        self.depth = depth;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [self.n, self.c, self.k, self.h, self.w, self.r, self.s, self.depth];
        if counts.contains(&0) {
            return Err(ConvError::InvalidConfig(format!("all counts must be >= 1: {self:?}")));
        }
        if self.h + 2 * self.pad < self.r || self.w + 2 * self.pad < self.s {
            return Err(ConvError::InvalidConfig(format!(
                "filter {}x{} larger than padded input {}x{}",
                self.r,
                self.s,
                self.h + 2 * self.pad,
                self.w + 2 * self.pad
            )));
        }
        Ok(())
    }

    pub fn out_h(&self) -> usize {
        self.h + 2 * self.pad + 1 - self.r
    }

    pub fn out_w(&self) -> usize {
        self.w + 2 * self.pad + 1 - self.s
    }

    pub fn data_shape(&self) -> [usize; 4] {
        [self.n, self.c, self.h, self.w]
    }

    pub fn filter_shape(&self) -> [usize; 4] {
        [self.k, self.c, self.r, self.s]
    }

    pub fn output_shape(&self) -> [usize; 4] {
        [self.n, self.k, self.out_h(), self.out_w()]
    }

    pub(crate) fn check<T, U>(&self, d: &Tensor4<T>, g: &Tensor4<U>) -> Result<()> {
        self.validate()?;
        expect_shape("data", d.shape(), self.data_shape())?;
        expect_shape("filters", g.shape(), self.filter_shape())
    }
}

pub(crate) fn expect_shape(what: &str, got: [usize; 4], want: [usize; 4]) -> Result<()> {
    if got != want {
        return Err(ConvError::ShapeMismatch(format!("{what}: expected {want:?}, got {got:?}")));
    }
    Ok(())
}

/// Multiplies performed by direct convolution: `N·K·outH·outW·C·R·S`.
pub fn direct_multiplies(cfg: &LayerConfig) -> u64 {
    (cfg.n * cfg.k * cfg.out_h() * cfg.out_w() * cfg.c * cfg.r * cfg.s) as u64
}

/// Direct-convolution GFLOPs (2 per multiply-accumulate), weighted by depth.
pub fn gflops_direct(cfg: &LayerConfig) -> f64 {
    2.0 * direct_multiplies(cfg) as f64 * cfg.depth as f64 / 1e9
}

/// Range of `o` in `[0, out)` with `0 <= o + off < limit`, where `off` may be negative.
#[inline]
pub(crate) fn valid_range(out: usize, off: isize, limit: usize) -> std::ops::Range<usize> {
    let lo = (-off).max(0) as usize;
    let hi = (limit as isize - off).clamp(0, out as isize) as usize;
    lo.min(hi)..hi
}

/// Forward correlation accumulated in `A`.
///
/// `Y[i,k,y,x] = Σ_c Σ_u Σ_v D[i,c,y+u-pad,x+v-pad] · G[k,c,u,v]` with zero
/// reads outside the image. Every output accumulates in the fixed order
/// `c`, then filter row, then filter column, regardless of thread count.
pub fn direct_forward_as<T: Real, A: Real>(
    d: &Tensor4<T>,
    g: &Tensor4<T>,
    cfg: &LayerConfig,
) -> Result<Tensor4<A>> {
    cfg.check(d, g)?;
    let (oh, ow) = (cfg.out_h(), cfg.out_w());
    let (h, w, pad) = (cfg.h, cfg.w, cfg.pad as isize);
    let mut out = Tensor4::<A>::zeros(cfg.output_shape());
    out.as_mut_slice()
        .par_chunks_mut(oh * ow)
        .enumerate()
        .for_each(|(plane, y)| {
            let (i, k) = (plane / cfg.k, plane % cfg.k);
            for c in 0..cfg.c {
                let src = d.plane(i, c);
                let filt = g.plane(k, c);
                for u in 0..cfg.r {
                    let dy = u as isize - pad;
                    for v in 0..cfg.s {
                        let gv = A::from_f64(filt[u * cfg.s + v].to_f64());
                        let dx = v as isize - pad;
                        let xs = valid_range(ow, dx, w);
                        for oy in valid_range(oh, dy, h) {
                            let row = &src[(oy as isize + dy) as usize * w..][..w];
                            let dst = &mut y[oy * ow..(oy + 1) * ow];
                            for ox in xs.clone() {
                                dst[ox] += gv * A::from_f64(row[(ox as isize + dx) as usize].to_f64());
                            }
                        }
                    }
                }
            }
        });
    Ok(out)
}

/// Forward correlation accumulated at `accum`, returned at fp64.
///
/// `Fp16Sim` accumulates at fp32; quantizing operands is the caller's job.
pub fn direct_forward<T: Real>(
    d: &Tensor4<T>,
    g: &Tensor4<T>,
    cfg: &LayerConfig,
    accum: Precision,
) -> Result<Tensor4<f64>> {
    match accum {
        Precision::Fp64 => direct_forward_as::<T, f64>(d, g, cfg),
        Precision::Fp32 | Precision::Fp16Sim => Ok(direct_forward_as::<T, f32>(d, g, cfg)?.cast()),
    }
}

/// Gradient with respect to the layer inputs (the adjoint of the forward map).
pub fn direct_grad_inputs<T: Real>(dy: &Tensor4<T>, g: &Tensor4<T>, cfg: &LayerConfig) -> Result<Tensor4<T>> {
    cfg.validate()?;
    expect_shape("output gradient", dy.shape(), cfg.output_shape())?;
    expect_shape("filters", g.shape(), cfg.filter_shape())?;
    let (oh, ow) = (cfg.out_h(), cfg.out_w());
    let (h, w, pad) = (cfg.h, cfg.w, cfg.pad as isize);
    let mut dd = Tensor4::<T>::zeros(cfg.data_shape());
    dd.as_mut_slice()
        .par_chunks_mut(h * w)
        .enumerate()
        .for_each(|(plane, out)| {
            let (i, c) = (plane / cfg.c, plane % cfg.c);
            for k in 0..cfg.k {
                let src = dy.plane(i, k);
                let filt = g.plane(k, c);
                for u in 0..cfg.r {
                    // Input row y reads output row y + pad - u.
                    let oy_off = pad - u as isize;
                    for v in 0..cfg.s {
                        let gv = filt[u * cfg.s + v];
                        let ox_off = pad - v as isize;
                        let xs = valid_range(w, ox_off, ow);
                        for y in valid_range(h, oy_off, oh) {
                            let row = &src[(y as isize + oy_off) as usize * ow..][..ow];
                            let dst = &mut out[y * w..(y + 1) * w];
                            for x in xs.clone() {
                                dst[x] += gv * row[(x as isize + ox_off) as usize];
                            }
                        }
                    }
                }
            }
        });
    Ok(dd)
}

/// Gradient with respect to the filters.
pub fn direct_grad_weights<T: Real>(d: &Tensor4<T>, dy: &Tensor4<T>, cfg: &LayerConfig) -> Result<Tensor4<T>> {
    cfg.validate()?;
    expect_shape("data", d.shape(), cfg.data_shape())?;
    expect_shape("output gradient", dy.shape(), cfg.output_shape())?;
    let (oh, ow) = (cfg.out_h(), cfg.out_w());
    let (h, w, pad) = (cfg.h, cfg.w, cfg.pad as isize);
    let mut dg = Tensor4::<T>::zeros(cfg.filter_shape());
    dg.as_mut_slice()
        .par_chunks_mut(cfg.r * cfg.s)
        .enumerate()
        .for_each(|(plane, out)| {
            let (k, c) = (plane / cfg.c, plane % cfg.c);
            for u in 0..cfg.r {
                let dy_off = u as isize - pad;
                for v in 0..cfg.s {
                    let dx_off = v as isize - pad;
                    let xs = valid_range(ow, dx_off, w);
                    let mut acc = T::zero();
                    for i in 0..cfg.n {
                        let src = d.plane(i, c);
                        let err = dy.plane(i, k);
                        for oy in valid_range(oh, dy_off, h) {
                            let row = &src[(oy as isize + dy_off) as usize * w..][..w];
                            for ox in xs.clone() {
                                acc += row[(ox as isize + dx_off) as usize] * err[oy * ow + ox];
                            }
                        }
                    }
                    out[u * cfg.s + v] = acc;
                }
            }
        });
    Ok(dg)
}
