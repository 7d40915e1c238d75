//! Whole-layer convolution with a nested minimal filtering algorithm.
//!
//! The layer is computed in four stages:
//!
//! 1. every filter `g[k,c]` is transformed to `u = G g Gᵀ` and scattered into
//!    α² matrices `U^(ξ,ν)` of shape `K × C`;
//! 2. every input tile `d[c,b]` is transformed to `v = Bᵀ d B` and scattered
//!    into `V^(ξ,ν)` of shape `C × P`;
//! 3. α² independent matrix products `M^(ξ,ν) = U^(ξ,ν) V^(ξ,ν)` reduce over
//!    channels in transform space;
//! 4. each output tile gathers `m_(ξ,ν) = M^(ξ,ν)[k,b]` and applies
//!    `Aᵀ m A` once.
//!
//! Tiles are `α×α` input windows at stride `m` (so neighbours overlap by
//! `r - 1`), enumerated row-major over `(image, tile row, tile col)`. Padding
//! is never materialised: reads outside the image return zero. Edge tiles
//! that run past the output are computed whole and clipped on write-back.

use rayon::prelude::*;

use crate::error::{ConvError, Result};
use crate::gemm::{gemm, gemm_nt, MatRef};
use crate::reference::{expect_shape, LayerConfig};
use crate::scalar::Real;
use crate::tensor::Tensor4;
use crate::winograd::{Nested2d, WinogradAlgorithm};

/// Tiling of a layer's output into `m_h × m_w` blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TileGrid {
    pub m_h: usize,
    pub m_w: usize,
    pub alpha_h: usize,
    pub alpha_w: usize,
    pub images: usize,
    pub tiles_h: usize,
    pub tiles_w: usize,
    pub pad: usize,
}

impl TileGrid {
    pub fn new(
        images: usize,
        out_h: usize,
        out_w: usize,
        (m_h, m_w): (usize, usize),
        (alpha_h, alpha_w): (usize, usize),
        pad: usize,
    ) -> Self {
        TileGrid {
            m_h,
            m_w,
            alpha_h,
            alpha_w,
            images,
            tiles_h: out_h.div_ceil(m_h),
            tiles_w: out_w.div_ceil(m_w),
            pad,
        }
    }

    /// Number of tiles `P` across all images.
    pub fn count(&self) -> usize {
        self.images * self.tiles_h * self.tiles_w
    }

    pub fn index(&self, image: usize, ty: usize, tx: usize) -> usize {
        (image * self.tiles_h + ty) * self.tiles_w + tx
    }

    pub fn coords(&self, b: usize) -> (usize, usize, usize) {
        let per_image = self.tiles_h * self.tiles_w;
        (b / per_image, (b % per_image) / self.tiles_w, b % self.tiles_w)
    }

    /// Top-left input coordinate of tile `(ty, tx)`; may be negative.
    pub fn origin(&self, ty: usize, tx: usize) -> (isize, isize) {
        (
            (self.m_h * ty) as isize - self.pad as isize,
            (self.m_w * tx) as isize - self.pad as isize,
        )
    }
}

/// `P = N·⌈outH/m⌉·⌈outW/m⌉`.
pub fn tile_count(cfg: &LayerConfig, m: usize) -> usize {
    cfg.n * cfg.out_h().div_ceil(m) * cfg.out_w().div_ceil(m)
}

/// Multiplies in the batched stage: `N⌈outH/m⌉⌈outW/m⌉·C·K·(m+R-1)(m+S-1)`.
/// With `m = 1` this is the direct-convolution multiply count.
pub fn multiply_stage_flops(cfg: &LayerConfig, m: usize) -> u64 {
    (tile_count(cfg, m) * cfg.c * cfg.k * (m + cfg.r - 1) * (m + cfg.s - 1)) as u64
}

/// Scalars held by one forward pass: `U`, `V` and `M` stacks.
pub fn forward_workspace_len(cfg: &LayerConfig, m: usize) -> usize {
    let a2 = (m + cfg.r - 1) * (m + cfg.s - 1);
    let p = tile_count(cfg, m);
    a2 * (cfg.k * cfg.c + cfg.c * p + cfg.k * p)
}

/// Transformed filter bank `U`, stored as α² contiguous `K × C` matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedFilters<T> {
    k: usize,
    c: usize,
    alpha2: usize,
    data: Vec<T>,
}

impl<T: Real> TransformedFilters<T> {
    /// `U^(ξ,ν)[k, c]`, with `e = ξ·α_w + ν`.
    pub fn get(&self, e: usize, k: usize, c: usize) -> T {
        self.data[(e * self.k + k) * self.c + c]
    }

    /// Scalars held: `α²·K·C`.
    pub fn workspace_len(&self) -> usize {
        self.data.len()
    }

    fn view(&self, e: usize) -> MatRef<'_, T> {
        MatRef::row_major(&self.data[e * self.k * self.c..(e + 1) * self.k * self.c], self.k, self.c)
    }
}

/// Transformed input tiles `V`, laid out `[c][ξν][b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedData<T> {
    c: usize,
    p: usize,
    alpha2: usize,
    data: Vec<T>,
}

impl<T: Real> TransformedData<T> {
    /// `V^(ξ,ν)[c, b]`, with `e = ξ·α_w + ν`.
    pub fn get(&self, e: usize, c: usize, b: usize) -> T {
        self.data[(c * self.alpha2 + e) * self.p + b]
    }

    pub fn tiles(&self) -> usize {
        self.p
    }
}

/// All intermediate stacks of one forward pass, exposed for inspection.
#[derive(Debug, Clone)]
pub struct TransformedStacks<T> {
    pub alpha_h: usize,
    pub alpha_w: usize,
    pub k: usize,
    pub c: usize,
    pub p: usize,
    pub u: TransformedFilters<T>,
    v: Vec<T>,
    m: Vec<T>,
}

impl<T: Real> TransformedStacks<T> {
    pub fn u(&self, xi: usize, nu: usize, k: usize, c: usize) -> T {
        self.u.get(xi * self.alpha_w + nu, k, c)
    }

    pub fn v(&self, xi: usize, nu: usize, c: usize, b: usize) -> T {
        let a2 = self.alpha_h * self.alpha_w;
        self.v[(c * a2 + xi * self.alpha_w + nu) * self.p + b]
    }

    pub fn m(&self, xi: usize, nu: usize, k: usize, b: usize) -> T {
        self.m[((xi * self.alpha_w + nu) * self.k + k) * self.p + b]
    }
}

/// Counters gathered during a forward pass.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ForwardStats {
    /// Scalar multiplies executed by the batched matrix products.
    pub multiply_stage: u64,
    pub tiles: usize,
}

/// Row-major `out = a (ar×ac) · b (ac×bc)`.
#[inline]
fn mul_into<T: Real>(a: &[T], ac: usize, b: &[T], bc: usize, out: &mut [T]) {
    for (arow, orow) in a.chunks_exact(ac).zip(out.chunks_exact_mut(bc)) {
        orow.fill(T::zero());
        for (&av, brow) in arow.iter().zip(b.chunks_exact(bc)) {
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
}

/// Row-major `out = a (ar×ac) · bᵀ` with `b` of shape `br×ac`.
#[inline]
fn mul_bt_into<T: Real>(a: &[T], ac: usize, b: &[T], br: usize, out: &mut [T]) {
    for (arow, orow) in a.chunks_exact(ac).zip(out.chunks_exact_mut(br)) {
        for (o, brow) in orow.iter_mut().zip(b.chunks_exact(ac)) {
            let mut acc = T::zero();
            for (&x, &y) in arow.iter().zip(brow) {
                acc += x * y;
            }
            *o = acc;
        }
    }
}

/// `left · x · rightᵀ` through a caller-provided scratch buffer.
#[derive(Debug, Clone)]
struct Sandwich<T> {
    left: Vec<T>,
    right: Vec<T>,
    p: usize,
    q: usize,
    s: usize,
    t: usize,
}

impl<T: Real> Sandwich<T> {
    fn new(left: &crate::matrix::Matrix<T>, right: &crate::matrix::Matrix<T>) -> Self {
        Sandwich {
            left: left.as_slice().to_vec(),
            right: right.as_slice().to_vec(),
            p: left.rows(),
            q: left.cols(),
            s: right.cols(),
            t: right.rows(),
        }
    }

    fn scratch_len(&self) -> usize {
        self.p * self.s
    }

    fn apply(&self, x: &[T], scratch: &mut [T], out: &mut [T]) {
        mul_into(&self.left, self.q, x, self.s, &mut scratch[..self.p * self.s]);
        mul_bt_into(&scratch[..self.p * self.s], self.s, &self.right, self.t, out);
    }
}

/// The three 2-d transforms lowered to `T`.
#[derive(Debug, Clone)]
struct Kernels<T> {
    filter: Sandwich<T>,
    data: Sandwich<T>,
    inverse: Sandwich<T>,
    m: (usize, usize),
    alpha: (usize, usize),
}

impl<T: Real> Kernels<T> {
    fn new(alg: &Nested2d<T>) -> Self {
        Kernels {
            filter: Sandwich::new(&alg.rows.g, &alg.cols.g),
            data: Sandwich::new(&alg.rows.bt, &alg.cols.bt),
            inverse: Sandwich::new(&alg.rows.at, &alg.cols.at),
            m: alg.output_dims(),
            alpha: alg.tile_dims(),
        }
    }

    fn alpha2(&self) -> usize {
        self.alpha.0 * self.alpha.1
    }

    fn scratch_len(&self) -> usize {
        self.filter
            .scratch_len()
            .max(self.data.scratch_len())
            .max(self.inverse.scratch_len())
    }
}

/// Loads the `rows × cols` window at `(y0, x0)` of `plane`, zero outside.
#[inline]
#[allow(clippy::too_many_arguments)]
fn load_window<T: Real>(plane: &[T], h: usize, w: usize, y0: isize, x0: isize, rows: usize, cols: usize, out: &mut [T]) {
    for a in 0..rows {
        let y = y0 + a as isize;
        let dst = &mut out[a * cols..(a + 1) * cols];
        if y < 0 || y >= h as isize {
            dst.fill(T::zero());
            continue;
        }
        let row = &plane[y as usize * w..(y as usize + 1) * w];
        for (b, o) in dst.iter_mut().enumerate() {
            let x = x0 + b as isize;
            *o = if x < 0 || x >= w as isize { T::zero() } else { row[x as usize] };
        }
    }
}

/// A convnet layer bound to one minimal filtering algorithm.
///
/// Transforms are lowered to `T` once at construction. Filters may be
/// transformed per call ([`forward`](Self::forward)) or once up front and
/// reused ([`cache_filters`](Self::cache_filters) +
/// [`forward_cached`](Self::forward_cached)); both give bit-identical output.
#[derive(Debug, Clone)]
pub struct WinogradLayer<T> {
    cfg: LayerConfig,
    kernels: Kernels<T>,
    grid: TileGrid,
    cached: Option<TransformedFilters<T>>,
}

impl<T: Real> WinogradLayer<T> {
    /// Square nesting `F(m×m, r×r)` of `alg`.
    pub fn new(cfg: LayerConfig, alg: &WinogradAlgorithm) -> Result<Self> {
        Self::nested(cfg, Nested2d::square(alg.lower()))
    }

    /// Arbitrary nesting `F(m×n, r×s)`.
    pub fn nested(cfg: LayerConfig, alg: Nested2d<T>) -> Result<Self> {
        cfg.validate()?;
        if alg.filter_dims() != (cfg.r, cfg.s) {
            return Err(ConvError::InvalidConfig(format!(
                "algorithm filters are {:?}, layer filters are {}x{}",
                alg.filter_dims(),
                cfg.r,
                cfg.s
            )));
        }
        let kernels = Kernels::new(&alg);
        let grid = TileGrid::new(cfg.n, cfg.out_h(), cfg.out_w(), kernels.m, kernels.alpha, cfg.pad);
        Ok(WinogradLayer { cfg, kernels, grid, cached: None })
    }

    pub fn config(&self) -> &LayerConfig {
        &self.cfg
    }

    pub fn grid(&self) -> &TileGrid {
        &self.grid
    }

    /// `U` for the given filter bank.
    pub fn transform_filters(&self, g: &Tensor4<T>) -> Result<TransformedFilters<T>> {
        expect_shape("filters", g.shape(), self.cfg.filter_shape())?;
        let (kk, cc) = (self.cfg.k, self.cfg.c);
        let a2 = self.kernels.alpha2();
        let kern = &self.kernels;
        // Per k, an α²×C block so the scatter below copies whole rows.
        let blocks: Vec<Vec<T>> = (0..kk)
            .into_par_iter()
            .map(|k| {
                let mut block = vec![T::zero(); a2 * cc];
                let mut tile = vec![T::zero(); a2];
                let mut scratch = vec![T::zero(); kern.scratch_len()];
                for c in 0..cc {
                    kern.filter.apply(g.plane(k, c), &mut scratch, &mut tile);
                    for (e, &v) in tile.iter().enumerate() {
                        block[e * cc + c] = v;
                    }
                }
                block
            })
            .collect();
        let mut data = vec![T::zero(); kk * cc * a2];
        for (k, block) in blocks.iter().enumerate() {
            for e in 0..a2 {
                data[(e * kk + k) * cc..][..cc].copy_from_slice(&block[e * cc..(e + 1) * cc]);
            }
        }
        Ok(TransformedFilters { k: kk, c: cc, alpha2: a2, data })
    }

    /// Transforms and stores `U` for [`forward_cached`](Self::forward_cached).
    pub fn cache_filters(&mut self, g: &Tensor4<T>) -> Result<&TransformedFilters<T>> {
        let u = self.transform_filters(g)?;
        Ok(self.cached.insert(u))
    }

    pub fn cached_filters(&self) -> Option<&TransformedFilters<T>> {
        self.cached.as_ref()
    }

    /// `V` for the given input batch.
    pub fn transform_data(&self, d: &Tensor4<T>) -> Result<TransformedData<T>> {
        expect_shape("data", d.shape(), self.cfg.data_shape())?;
        let data = self.scatter_data(d);
        Ok(TransformedData { c: self.cfg.c, p: self.grid.count(), alpha2: self.kernels.alpha2(), data })
    }

    fn scatter_data(&self, d: &Tensor4<T>) -> Vec<T> {
        let (cc, p, a2) = (self.cfg.c, self.grid.count(), self.kernels.alpha2());
        let (h, w) = (self.cfg.h, self.cfg.w);
        let (ah, aw) = self.kernels.alpha;
        let grid = self.grid;
        let kern = &self.kernels;
        let mut v = vec![T::zero(); cc * a2 * p];
        v.par_chunks_mut(a2 * p).enumerate().for_each(|(c, block)| {
            let mut tile = vec![T::zero(); a2];
            let mut out = vec![T::zero(); a2];
            let mut scratch = vec![T::zero(); kern.scratch_len()];
            for b in 0..p {
                let (i, ty, tx) = grid.coords(b);
                let (y0, x0) = grid.origin(ty, tx);
                load_window(d.plane(i, c), h, w, y0, x0, ah, aw, &mut tile);
                kern.data.apply(&tile, &mut scratch, &mut out);
                for (e, &val) in out.iter().enumerate() {
                    block[e * p + b] = val;
                }
            }
        });
        v
    }

    /// The batched products alone: returns `M`, laid out `[ξν][k][b]`, and
    /// the number of scalar multiplies executed.
    pub fn multiply_stage(&self, u: &TransformedFilters<T>, v: &TransformedData<T>) -> Result<(Vec<T>, u64)> {
        let a2 = self.kernels.alpha2();
        if (u.k, u.c, u.alpha2) != (self.cfg.k, self.cfg.c, a2) || (v.c, v.p, v.alpha2) != (self.cfg.c, self.grid.count(), a2) {
            return Err(ConvError::ShapeMismatch("transformed stacks do not match layer".into()));
        }
        Ok(self.multiply(u, &v.data))
    }

    /// `M^(ξ,ν) = U^(ξ,ν) V^(ξ,ν)`, laid out `[ξν][k][b]`.
    fn multiply(&self, u: &TransformedFilters<T>, v: &[T]) -> (Vec<T>, u64) {
        let (kk, cc, p, a2) = (self.cfg.k, self.cfg.c, self.grid.count(), self.kernels.alpha2());
        let mut m = vec![T::zero(); a2 * kk * p];
        let count: u64 = m
            .par_chunks_mut(kk * p)
            .enumerate()
            .map(|(e, out)| {
                let vv = MatRef { data: &v[e * p..], rows: cc, cols: p, row_stride: a2 * p, col_stride: 1 };
                gemm(u.view(e), vv, out)
            })
            .sum();
        (m, count)
    }

    /// Gathers each output tile from `M` and applies the inverse transform.
    fn inverse(&self, m: &[T]) -> Tensor4<T> {
        let cfg = &self.cfg;
        let (oh, ow) = (cfg.out_h(), cfg.out_w());
        let (kk, p, a2) = (cfg.k, self.grid.count(), self.kernels.alpha2());
        let (mh, mw) = self.kernels.m;
        let grid = self.grid;
        let kern = &self.kernels;
        let mut y = Tensor4::<T>::zeros(cfg.output_shape());
        y.as_mut_slice()
            .par_chunks_mut(oh * ow)
            .enumerate()
            .for_each(|(plane, out)| {
                let (i, k) = (plane / kk, plane % kk);
                let mut gathered = vec![T::zero(); a2];
                let mut tile = vec![T::zero(); mh * mw];
                let mut scratch = vec![T::zero(); kern.scratch_len()];
                for ty in 0..grid.tiles_h {
                    for tx in 0..grid.tiles_w {
                        let b = grid.index(i, ty, tx);
                        for (e, g) in gathered.iter_mut().enumerate() {
                            *g = m[(e * kk + k) * p + b];
                        }
                        kern.inverse.apply(&gathered, &mut scratch, &mut tile);
                        let (y0, x0) = (ty * mh, tx * mw);
                        for a in 0..mh.min(oh - y0) {
                            let cols = mw.min(ow - x0);
                            out[(y0 + a) * ow + x0..][..cols].copy_from_slice(&tile[a * mw..a * mw + cols]);
                        }
                    }
                }
            });
        y
    }

    /// Forward pass with explicitly supplied transformed filters.
    pub fn forward_with(&self, d: &Tensor4<T>, u: &TransformedFilters<T>) -> Result<(Tensor4<T>, ForwardStats)> {
        expect_shape("data", d.shape(), self.cfg.data_shape())?;
        if (u.k, u.c, u.alpha2) != (self.cfg.k, self.cfg.c, self.kernels.alpha2()) {
            return Err(ConvError::ShapeMismatch("transformed filters do not match layer".into()));
        }
        let v = self.scatter_data(d);
        let (m, count) = self.multiply(u, &v);
        let stats = ForwardStats { multiply_stage: count, tiles: self.grid.count() };
        Ok((self.inverse(&m), stats))
    }

    pub fn forward(&self, d: &Tensor4<T>, g: &Tensor4<T>) -> Result<Tensor4<T>> {
        let u = self.transform_filters(g)?;
        Ok(self.forward_with(d, &u)?.0)
    }

    /// Forward pass reusing filters stored by [`cache_filters`](Self::cache_filters).
    pub fn forward_cached(&self, d: &Tensor4<T>) -> Result<Tensor4<T>> {
        let u = self
            .cached
            .as_ref()
            .ok_or_else(|| ConvError::InvalidConfig("no cached filters".into()))?;
        Ok(self.forward_with(d, u)?.0)
    }

    /// Runs stages 1-3 and returns every stack.
    pub fn stacks(&self, d: &Tensor4<T>, g: &Tensor4<T>) -> Result<TransformedStacks<T>> {
        expect_shape("data", d.shape(), self.cfg.data_shape())?;
        let u = self.transform_filters(g)?;
        let v = self.scatter_data(d);
        let (m, _) = self.multiply(&u, &v);
        Ok(TransformedStacks {
            alpha_h: self.kernels.alpha.0,
            alpha_w: self.kernels.alpha.1,
            k: self.cfg.k,
            c: self.cfg.c,
            p: self.grid.count(),
            u,
            v,
            m,
        })
    }
}

/// One-shot forward pass. With `cache_filters` the filter transform runs as
/// a separate pass whose result is stored and then consumed; the output is
/// identical either way.
pub fn winograd_forward<T: Real>(
    d: &Tensor4<T>,
    g: &Tensor4<T>,
    cfg: &LayerConfig,
    alg: &WinogradAlgorithm,
    cache_filters: bool,
) -> Result<Tensor4<T>> {
    let mut layer = WinogradLayer::new(*cfg, alg)?;
    if cache_filters {
        layer.cache_filters(g)?;
        layer.forward_cached(d)
    } else {
        layer.forward(d, g)
    }
}

/// Input gradient: the forward algorithm run over `dY` with spatially
/// flipped, channel-transposed filters and padding `R - 1 - pad`.
pub fn winograd_grad_inputs<T: Real>(
    dy: &Tensor4<T>,
    g: &Tensor4<T>,
    cfg: &LayerConfig,
    alg: &WinogradAlgorithm,
) -> Result<Tensor4<T>> {
    cfg.validate()?;
    expect_shape("output gradient", dy.shape(), cfg.output_shape())?;
    expect_shape("filters", g.shape(), cfg.filter_shape())?;
    if cfg.r != cfg.s || cfg.pad >= cfg.r {
        return Err(ConvError::InvalidConfig(format!(
            "input gradient needs square filters and pad < R (R={}, S={}, pad={})",
            cfg.r, cfg.s, cfg.pad
        )));
    }
    let back = LayerConfig {
        n: cfg.n,
        c: cfg.k,
        k: cfg.c,
        h: cfg.out_h(),
        w: cfg.out_w(),
        r: cfg.r,
        s: cfg.s,
        pad: cfg.r - 1 - cfg.pad,
        depth: 1,
    };
    let flipped = Tensor4::from_fn(back.filter_shape(), |[c, k, u, v]| {
        g.get([k, c, cfg.r - 1 - u, cfg.s - 1 - v])
    });
    WinogradLayer::new(back, alg)?.forward(dy, &flipped)
}

/// Weight gradient as a sum of small minimal-filtering problems.
///
/// `alg_w` must produce `R` outputs per dimension (F(3,2) for 3×3 filters).
/// The `dY` plane is cut into non-overlapping `r_w × r_w` tiles; each is the
/// "filter" applied to the matching `(R + r_w - 1)²` input tile (overlapping
/// by `R - 1`), and the `R × R` results are summed over tiles and images.
/// The sum runs in transform space as one `K × P` by `P × C` product per
/// transform component.
pub fn winograd_grad_weights<T: Real>(
    d: &Tensor4<T>,
    dy: &Tensor4<T>,
    cfg: &LayerConfig,
    alg_w: &WinogradAlgorithm,
) -> Result<Tensor4<T>> {
    Ok(grad_weights_with_stats(d, dy, cfg, alg_w)?.0)
}

/// [`winograd_grad_weights`] plus the multiply count of its batched stage.
pub fn grad_weights_with_stats<T: Real>(
    d: &Tensor4<T>,
    dy: &Tensor4<T>,
    cfg: &LayerConfig,
    alg_w: &WinogradAlgorithm,
) -> Result<(Tensor4<T>, ForwardStats)> {
    cfg.validate()?;
    expect_shape("data", d.shape(), cfg.data_shape())?;
    expect_shape("output gradient", dy.shape(), cfg.output_shape())?;
    if alg_w.m() != cfg.r || alg_w.m() != cfg.s {
        return Err(ConvError::InvalidConfig(format!(
            "weight-gradient algorithm computes {} outputs, filters are {}x{}",
            alg_w.m(),
            cfg.r,
            cfg.s
        )));
    }
    let nested = Nested2d::square(alg_w.lower::<T>());
    let kern = Kernels::new(&nested);
    let (rt, alpha, a2) = (alg_w.r(), alg_w.alpha(), kern.alpha2());
    let (oh, ow) = (cfg.out_h(), cfg.out_w());
    // Tiles step by the dY tile size; input windows start `pad` earlier.
    let grid = TileGrid::new(cfg.n, oh, ow, (rt, rt), (alpha, alpha), cfg.pad);
    let p = grid.count();

    let mut u = vec![T::zero(); cfg.k * a2 * p];
    u.par_chunks_mut(a2 * p).enumerate().for_each(|(k, block)| {
        let mut tile = vec![T::zero(); rt * rt];
        let mut out = vec![T::zero(); a2];
        let mut scratch = vec![T::zero(); kern.scratch_len()];
        for b in 0..p {
            let (i, ty, tx) = grid.coords(b);
            let y0 = (ty * rt) as isize;
            let x0 = (tx * rt) as isize;
            load_window(dy.plane(i, k), oh, ow, y0, x0, rt, rt, &mut tile);
            kern.filter.apply(&tile, &mut scratch, &mut out);
            for (e, &val) in out.iter().enumerate() {
                block[e * p + b] = val;
            }
        }
    });

    let mut v = vec![T::zero(); cfg.c * a2 * p];
    v.par_chunks_mut(a2 * p).enumerate().for_each(|(c, block)| {
        let mut tile = vec![T::zero(); a2];
        let mut out = vec![T::zero(); a2];
        let mut scratch = vec![T::zero(); kern.scratch_len()];
        for b in 0..p {
            let (i, ty, tx) = grid.coords(b);
            let (y0, x0) = grid.origin(ty, tx);
            load_window(d.plane(i, c), cfg.h, cfg.w, y0, x0, alpha, alpha, &mut tile);
            kern.data.apply(&tile, &mut scratch, &mut out);
            for (e, &val) in out.iter().enumerate() {
                block[e * p + b] = val;
            }
        }
    });

    let (kk, cc) = (cfg.k, cfg.c);
    let mut m = vec![T::zero(); a2 * kk * cc];
    let count: u64 = m
        .par_chunks_mut(kk * cc)
        .enumerate()
        .map(|(e, out)| {
            let uu = MatRef { data: &u[e * p..], rows: kk, cols: p, row_stride: a2 * p, col_stride: 1 };
            let vv = MatRef { data: &v[e * p..], rows: cc, cols: p, row_stride: a2 * p, col_stride: 1 };
            gemm_nt(uu, vv, out)
        })
        .sum();

    let mut dg = Tensor4::<T>::zeros(cfg.filter_shape());
    let (r, s) = (cfg.r, cfg.s);
    dg.as_mut_slice()
        .par_chunks_mut(r * s)
        .enumerate()
        .for_each(|(plane, out)| {
            let (k, c) = (plane / cc, plane % cc);
            let mut gathered = vec![T::zero(); a2];
            let mut scratch = vec![T::zero(); kern.scratch_len()];
            for (e, g) in gathered.iter_mut().enumerate() {
                *g = m[(e * kk + k) * cc + c];
            }
            kern.inverse.apply(&gathered, &mut scratch, out);
        });
    Ok((dg, ForwardStats { multiply_stage: count, tiles: p }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference::{direct_forward, direct_grad_inputs, direct_grad_weights};
    use crate::tensor::{max_abs_error, Precision};

    fn f23() -> WinogradAlgorithm {
        WinogradAlgorithm::builtin(2, 3).unwrap()
    }

    fn f43() -> WinogradAlgorithm {
        WinogradAlgorithm::builtin(4, 3).unwrap()
    }

    fn f32_2() -> WinogradAlgorithm {
        WinogradAlgorithm::builtin(3, 2).unwrap()
    }

    fn inputs(cfg: &LayerConfig, seed: u64) -> (Tensor4<f32>, Tensor4<f32>) {
        (
            Tensor4::uniform(cfg.data_shape(), seed, -1.0, 1.0),
            Tensor4::uniform(cfg.filter_shape(), seed + 1, -1.0, 1.0),
        )
    }

    #[test]
    fn tile_counts() {
        assert_eq!(tile_count(&LayerConfig::new(1, 1, 224, 224, 3, 1), 2), 12544);
        assert_eq!(tile_count(&LayerConfig::new(1, 1, 14, 14, 3, 1), 4), 16);
        assert_eq!(tile_count(&LayerConfig::new(1, 1, 28, 28, 3, 1).with_batch(32), 2), 6272);
    }

    #[test]
    fn multiply_stage_formula() {
        let cfg = LayerConfig::new(3, 5, 7, 9, 3, 1).with_batch(2);
        assert_eq!(multiply_stage_flops(&cfg, 1), crate::reference::direct_multiplies(&cfg));
        assert_eq!(multiply_stage_flops(&LayerConfig::new(1, 1, 4, 4, 3, 0), 2), 16);
    }

    #[test]
    fn grid_overlap_and_order() {
        let grid = TileGrid::new(2, 5, 5, (2, 2), (4, 4), 1);
        assert_eq!(grid.count(), 2 * 3 * 3);
        assert_eq!(grid.origin(0, 0), (-1, -1));
        // Consecutive tiles start m apart, so α-wide windows overlap by r - 1 = 2.
        let (a, b) = (grid.origin(0, 1).1, grid.origin(0, 2).1);
        assert_eq!(a + 4 - b, 2);
        assert_eq!(grid.coords(grid.index(1, 2, 0)), (1, 2, 0));
    }

    #[test]
    fn matches_direct_on_small_vgg_shape() {
        let cfg = LayerConfig::new(8, 8, 14, 14, 3, 1);
        let (d, g) = inputs(&cfg, 10);
        let truth = direct_forward(&d, &g, &cfg, Precision::Fp64).unwrap();
        let y = winograd_forward(&d, &g, &cfg, &f23(), false).unwrap();
        assert!(max_abs_error(&y, &truth).unwrap() <= 5e-4);
        let y = winograd_forward(&d, &g, &cfg, &f43(), false).unwrap();
        assert!(max_abs_error(&y, &truth).unwrap() <= 5e-3);
    }

    #[test]
    fn partial_edge_tiles() {
        let cfg = LayerConfig::new(2, 3, 5, 5, 3, 0);
        let (d, g) = inputs(&cfg, 4);
        let truth = direct_forward(&d, &g, &cfg, Precision::Fp64).unwrap();
        for alg in [f23(), f43()] {
            let y = winograd_forward(&d, &g, &cfg, &alg, false).unwrap();
            assert_eq!(y.shape(), [1, 3, 3, 3]);
            assert!(max_abs_error(&y, &truth).unwrap() <= 5e-4);
        }
    }

    #[test]
    fn zero_filters_give_zero_output() {
        let cfg = LayerConfig::new(3, 2, 6, 6, 3, 1);
        let d = Tensor4::<f32>::uniform(cfg.data_shape(), 1, -1.0, 1.0);
        let g = Tensor4::<f32>::zeros(cfg.filter_shape());
        let y = winograd_forward(&d, &g, &cfg, &f43(), true).unwrap();
        assert!(y.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_mismatched_filter_size() {
        let cfg = LayerConfig::new(1, 1, 6, 6, 5, 2);
        assert!(matches!(WinogradLayer::<f32>::new(cfg, &f23()), Err(ConvError::InvalidConfig(_))));
    }

    #[test]
    fn cached_filters_are_bit_identical() {
        let cfg = LayerConfig::new(4, 6, 9, 11, 3, 1).with_batch(2);
        let (d, g) = inputs(&cfg, 20);
        let mut layer = WinogradLayer::<f32>::new(cfg, &f23()).unwrap();
        let fresh = layer.forward(&d, &g).unwrap();
        assert!(layer.forward_cached(&d).is_err());
        let ws = layer.cache_filters(&g).unwrap().workspace_len();
        assert_eq!(ws, 16 * cfg.k * cfg.c);
        assert_eq!(layer.forward_cached(&d).unwrap(), fresh);
        assert_eq!(winograd_forward(&d, &g, &cfg, &f23(), true).unwrap(), fresh);
    }

    #[test]
    fn stacks_obey_scatter_and_matmul_contracts() {
        let cfg = LayerConfig::new(3, 2, 5, 6, 3, 1).with_batch(2);
        let d = Tensor4::<f64>::uniform(cfg.data_shape(), 3, -1.0, 1.0);
        let g = Tensor4::<f64>::uniform(cfg.filter_shape(), 4, -1.0, 1.0);
        let layer = WinogradLayer::<f64>::new(cfg, &f23()).unwrap();
        let st = layer.stacks(&d, &g).unwrap();
        let nested = Nested2d::square(f23().lower::<f64>());
        for k in 0..cfg.k {
            for c in 0..cfg.c {
                let gm = crate::matrix::Matrix::from_vec(3, 3, g.plane(k, c).to_vec()).unwrap();
                let u = nested.transform_filter(&gm).unwrap();
                for xi in 0..4 {
                    for nu in 0..4 {
                        assert_eq!(st.u(xi, nu, k, c), *u.get(xi, nu));
                    }
                }
            }
        }
        for xi in 0..4 {
            for nu in 0..4 {
                for k in 0..cfg.k {
                    for b in 0..st.p {
                        let mut acc = 0.0;
                        for c in 0..cfg.c {
                            acc += st.u(xi, nu, k, c) * st.v(xi, nu, c, b);
                        }
                        assert_eq!(st.m(xi, nu, k, b), acc);
                    }
                }
            }
        }
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let cfg = LayerConfig::new(5, 7, 13, 10, 3, 1).with_batch(2);
        let (d, g) = inputs(&cfg, 8);
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| {
                    (
                        winograd_forward(&d, &g, &cfg, &f43(), false).unwrap(),
                        winograd_grad_weights(&d, &Tensor4::uniform(cfg.output_shape(), 3, -1.0, 1.0), &cfg, &f32_2())
                            .unwrap(),
                    )
                })
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn instrumented_multiply_stage() {
        let cfg = LayerConfig::new(3, 4, 8, 8, 3, 1).with_batch(2);
        let (d, g) = inputs(&cfg, 30);
        for (alg, m) in [(f23(), 2), (f43(), 4)] {
            let layer = WinogradLayer::<f32>::new(cfg, &alg).unwrap();
            let u = layer.transform_filters(&g).unwrap();
            let (_, stats) = layer.forward_with(&d, &u).unwrap();
            assert_eq!(stats.multiply_stage, multiply_stage_flops(&cfg, m));
        }
    }

    #[test]
    fn grad_inputs_examples() {
        let cfg = LayerConfig::new(1, 1, 8, 8, 3, 1);
        let dy = Tensor4::<f64>::uniform(cfg.output_shape(), 1, -1.0, 1.0);
        let g = Tensor4::<f64>::uniform(cfg.filter_shape(), 2, -1.0, 1.0);
        let want = direct_grad_inputs(&dy, &g, &cfg).unwrap();
        let got = winograd_grad_inputs(&dy, &g, &cfg, &f23()).unwrap();
        assert!(max_abs_error(&got, &want).unwrap() <= 5e-4);

        let zeros = Tensor4::<f64>::zeros(cfg.output_shape());
        let got = winograd_grad_inputs(&zeros, &g, &cfg, &f23()).unwrap();
        assert!(got.as_slice().iter().all(|&v| v == 0.0));

        let mut impulse = Tensor4::<f64>::zeros(cfg.filter_shape());
        impulse.set([0, 0, 1, 1], 1.0);
        let got = winograd_grad_inputs(&dy, &impulse, &cfg, &f23()).unwrap();
        assert!(max_abs_error(&got, &dy).unwrap() < 1e-12);
    }

    #[test]
    fn grad_weights_examples() {
        let cfg = LayerConfig::new(1, 1, 6, 6, 3, 1);
        let d = Tensor4::<f64>::uniform(cfg.data_shape(), 5, -1.0, 1.0);
        let dy = Tensor4::<f64>::uniform(cfg.output_shape(), 6, -1.0, 1.0);
        let want = direct_grad_weights(&d, &dy, &cfg).unwrap();
        let got = winograd_grad_weights(&d, &dy, &cfg, &f32_2()).unwrap();
        assert!(max_abs_error(&got, &want).unwrap() <= 1e-10 * want.max_abs());

        let zeros = Tensor4::<f64>::zeros(cfg.output_shape());
        let got = winograd_grad_weights(&d, &zeros, &cfg, &f32_2()).unwrap();
        assert!(got.as_slice().iter().all(|&v| v == 0.0));

        let cfg = LayerConfig::new(4, 4, 8, 8, 3, 1).with_batch(2);
        let d = Tensor4::<f32>::uniform(cfg.data_shape(), 7, -1.0, 1.0);
        let dy = Tensor4::<f32>::uniform(cfg.output_shape(), 8, -1.0, 1.0);
        let want = direct_grad_weights(&d.cast::<f64>(), &dy.cast::<f64>(), &cfg).unwrap();
        let got = winograd_grad_weights(&d, &dy, &cfg, &f32_2()).unwrap();
        assert!(max_abs_error(&got, &want).unwrap() <= 1e-3);

        assert!(winograd_grad_weights(&d, &dy, &cfg, &f23()).is_err());
    }

    #[test]
    fn winograd_adjoint_identity() {
        let cfg = LayerConfig::new(3, 2, 7, 6, 3, 1).with_batch(2);
        let d = Tensor4::<f64>::uniform(cfg.data_shape(), 1, -1.0, 1.0);
        let g = Tensor4::<f64>::uniform(cfg.filter_shape(), 2, -1.0, 1.0);
        let dy = Tensor4::<f64>::uniform(cfg.output_shape(), 3, -1.0, 1.0);
        let lhs = winograd_forward(&d, &g, &cfg, &f23(), false).unwrap().dot(&dy).unwrap();
        let rhs = g.dot(&winograd_grad_weights(&d, &dy, &cfg, &f32_2()).unwrap()).unwrap();
        assert!((lhs - rhs).abs() <= 1e-8 * lhs.abs().max(1.0));

        let (d, g, dy) = (d.cast::<f32>(), g.cast::<f32>(), dy.cast::<f32>());
        let lhs = winograd_forward(&d, &g, &cfg, &f23(), false).unwrap().dot(&dy).unwrap();
        let rhs = g.dot(&winograd_grad_weights(&d, &dy, &cfg, &f32_2()).unwrap()).unwrap();
        assert!((lhs - rhs).abs() <= 1e-2 * lhs.abs().max(1.0));
    }

    #[test]
    fn non_square_nesting_layer() {
        let cfg = LayerConfig { n: 1, c: 2, k: 3, h: 7, w: 8, r: 3, s: 2, pad: 0, depth: 1 };
        let d = Tensor4::<f64>::uniform(cfg.data_shape(), 1, -1.0, 1.0);
        let g = Tensor4::<f64>::uniform(cfg.filter_shape(), 2, -1.0, 1.0);
        let alg = Nested2d::new(f23().lower(), f32_2().lower());
        let y = WinogradLayer::nested(cfg, alg).unwrap().forward(&d, &g).unwrap();
        let truth = direct_forward(&d, &g, &cfg, Precision::Fp64).unwrap();
        assert!(max_abs_error(&y, &truth).unwrap() < 1e-12);
    }
}
