//! Arithmetic complexity of tiled fast convolution.
//!
//! A method working on `α×α` input tiles that yield `m×m` outputs is
//! summarised by four normalized numbers:
//!
//! * `α′ = α²/m²`, multiplies in the batched stage per output per `(c, k)`;
//! * `β′ = β/α²`, `γ′ = γ/α²`, `δ′ = δ/α²`, where `β`, `γ`, `δ` are the
//!   per-tile instruction counts of the data, filter and inverse transforms.
//!
//! The layer total is `L = α′(1 + β′/K + γ′/P + δ′/C)·NHWCK` where `P` is the
//! tile count. As `K`, `P` and `C` grow the transform terms vanish and the
//! cost approaches `α′·NHWCK`.

use std::fmt;

use crate::engine::tile_count;
use crate::error::{ConvError, Result};
use crate::reference::LayerConfig;
use crate::winograd::{TransformFlops, WinogradAlgorithm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Direct,
    Winograd,
    FftDirectCgemm,
    FftFastCgemm,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Direct => "direct",
            Method::Winograd => "winograd",
            Method::FftDirectCgemm => "fft",
            Method::FftFastCgemm => "fft-fast-cgemm",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Where the transform columns of a profile come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    /// Computed from known per-tile instruction counts.
    Derived,
    /// Published figures stored as constants; not computed here.
    Tabulated,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexityProfile {
    pub method: Method,
    /// Input tile size α.
    pub alpha: usize,
    /// Outputs per tile dimension.
    pub m: usize,
    pub r: usize,
    pub alpha_n: f64,
    pub beta_n: f64,
    pub gamma_n: f64,
    pub delta_n: f64,
    pub source: Source,
}

impl ComplexityProfile {
    /// Per-tile transform counts `(β, γ, δ)`.
    pub fn transform_flops(&self) -> (f64, f64, f64) {
        let a2 = (self.alpha * self.alpha) as f64;
        (self.beta_n * a2, self.gamma_n * a2, self.delta_n * a2)
    }
}

/// Direct convolution with an `r×r` filter: `α′ = r²`, no transforms.
pub fn direct_profile(r: usize) -> ComplexityProfile {
    ComplexityProfile {
        method: Method::Direct,
        alpha: r,
        m: 1,
        r,
        alpha_n: (r * r) as f64,
        beta_n: 0.0,
        gamma_n: 0.0,
        delta_n: 0.0,
        source: Source::Derived,
    }
}

/// `F(m×m, r×r)` with caller-supplied transform counts.
pub fn winograd_profile_with(m: usize, r: usize, flops: TransformFlops) -> ComplexityProfile {
    let alpha = m + r - 1;
    let a2 = (alpha * alpha) as f64;
    ComplexityProfile {
        method: Method::Winograd,
        alpha,
        m,
        r,
        alpha_n: a2 / (m * m) as f64,
        beta_n: flops.data as f64 / a2,
        gamma_n: flops.filter as f64 / a2,
        delta_n: flops.inverse as f64 / a2,
        source: Source::Derived,
    }
}

/// `F(m×m, r×r)` using the built-in transform counts. `m = 1` is direct
/// convolution.
///
/// ```
/// let p = fastconv::complexity::winograd_profile(2, 3)?;
/// assert_eq!((p.alpha_n, p.beta_n, p.gamma_n, p.delta_n), (4.0, 2.0, 1.75, 1.5));
/// # Ok::<(), fastconv::ConvError>(())
/// ```
pub fn winograd_profile(m: usize, r: usize) -> Result<ComplexityProfile> {
    if m == 1 {
        return Ok(direct_profile(r));
    }
    let flops = WinogradAlgorithm::builtin(m, r)
        .map_err(|_| ConvError::NotProfiled { m, r })?
        .transform_flop_counts()?;
    Ok(winograd_profile_with(m, r, flops))
}

/// Multiplies in the frequency-domain stage per output per `(c, k)`:
/// `c·α(⌊α/2⌋+1)/m²` with `m = α − r + 1`, `c = 3` with the three-multiply
/// complex product and 4 otherwise.
pub fn fft_multiply_complexity(alpha: usize, r: usize, fast: bool) -> Result<f64> {
    if alpha < r || r == 0 {
        return Err(ConvError::UnsupportedTile(alpha));
    }
    let m = alpha - r + 1;
    let c = if fast { 3.0 } else { 4.0 };
    Ok(c * (alpha * (alpha / 2 + 1)) as f64 / (m * m) as f64)
}

const FFT_TILES: [usize; 6] = [8, 16, 32, 64, 128, 256];
// Split-radix transform costs, one value for all three transforms.
const FFT_DIRECT_CGEMM: [f64; 6] = [2.42, 4.23, 6.24, 8.30, 10.37, 12.42];
// (β′, γ′, δ′) with the extra split-factor additions folded in.
const FFT_FAST_CGEMM: [(f64, f64, f64); 6] = [
    (3.77, 4.30, 4.30),
    (6.23, 6.82, 6.82),
    (8.94, 9.57, 9.57),
    (11.72, 12.36, 12.36),
    (14.48, 15.14, 15.14),
    (17.22, 17.88, 17.88),
];

/// Tabulated `(β′, γ′, δ′)` for FFT tiles of size 8 through 256.
pub fn fft_table_constants(alpha: usize, fast: bool) -> Result<(f64, f64, f64)> {
    let i = FFT_TILES
        .iter()
        .position(|&a| a == alpha)
        .ok_or(ConvError::UnsupportedTile(alpha))?;
    Ok(if fast {
        FFT_FAST_CGEMM[i]
    } else {
        let v = FFT_DIRECT_CGEMM[i];
        (v, v, v)
    })
}

pub fn fft_profile(alpha: usize, r: usize, fast: bool) -> Result<ComplexityProfile> {
    let alpha_n = fft_multiply_complexity(alpha, r, fast)?;
    let (beta_n, gamma_n, delta_n) = fft_table_constants(alpha, fast)?;
    Ok(ComplexityProfile {
        method: if fast { Method::FftFastCgemm } else { Method::FftDirectCgemm },
        alpha,
        m: alpha - r + 1,
        r,
        alpha_n,
        beta_n,
        gamma_n,
        delta_n,
        source: Source::Tabulated,
    })
}

/// The three transform terms `(β′/K, γ′/P, δ′/C)` relative to the
/// batched multiply stage.
pub fn transform_overhead(cfg: &LayerConfig, prof: &ComplexityProfile) -> (f64, f64, f64) {
    let p = tile_count(cfg, prof.m) as f64;
    (prof.beta_n / cfg.k as f64, prof.gamma_n / p, prof.delta_n / cfg.c as f64)
}

/// `L = α′(1 + β′/K + γ′/P + δ′/C)·NHWCK` in multiplies, with `H×W` the
/// output plane. For the direct profile this is the direct multiply count.
pub fn layer_total_complexity(cfg: &LayerConfig, prof: &ComplexityProfile) -> f64 {
    let (b, g, d) = transform_overhead(cfg, prof);
    let nhwck = [cfg.n, cfg.out_h(), cfg.out_w(), cfg.c, cfg.k].iter().map(|&v| v as f64).product::<f64>();
    prof.alpha_n * (1.0 + b + g + d) * nhwck
}

/// Upper bound on speedup over direct convolution: `r²m²/(m+r−1)²`.
pub fn max_speedup(m: usize, r: usize) -> f64 {
    let alpha = (m + r - 1) as f64;
    (r * r * m * m) as f64 / (alpha * alpha)
}

/// One row of a complexity table.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub method: Method,
    pub tile: usize,
    pub alpha_n: f64,
    pub beta_n: f64,
    pub gamma_n: f64,
    pub delta_n: f64,
    pub source: Source,
}

impl From<ComplexityProfile> for TableRow {
    fn from(p: ComplexityProfile) -> Self {
        TableRow {
            method: p.method,
            tile: p.alpha,
            alpha_n: p.alpha_n,
            beta_n: p.beta_n,
            gamma_n: p.gamma_n,
            delta_n: p.delta_n,
            source: p.source,
        }
    }
}

// F(3×3,3×3) and F(6×6,3×3): counts for these transforms are not derived here.
const TABULATED_WINOGRAD: [(usize, f64, f64, f64); 2] = [(3, 3.60, 2.24, 2.24), (6, 6.50, 2.23, 4.38)];

/// Normalized complexity against tile size for 3×3 filters: direct and
/// Winograd tiles 3 to 8, then FFT tiles 8 to 256 with schoolbook complex
/// products.
pub fn table_tile_size() -> Vec<TableRow> {
    let mut rows = vec![
        TableRow::from(direct_profile(3)),
        TableRow::from(winograd_profile(2, 3).expect("builtin")),
    ];
    let tabulated = |(m, b, g, d): (usize, f64, f64, f64)| TableRow {
        method: Method::Winograd,
        tile: m + 2,
        alpha_n: ((m + 2) * (m + 2)) as f64 / (m * m) as f64,
        beta_n: b,
        gamma_n: g,
        delta_n: d,
        source: Source::Tabulated,
    };
    rows.push(tabulated(TABULATED_WINOGRAD[0]));
    rows.push(TableRow::from(winograd_profile(4, 3).expect("builtin")));
    rows.push(tabulated(TABULATED_WINOGRAD[1]));
    rows.extend(FFT_TILES.iter().map(|&a| TableRow::from(fft_profile(a, 3, false).expect("tabulated"))));
    rows
}

/// FFT tiles 8 to 256 with the three-multiply complex product.
pub fn table_fast_cgemm() -> Vec<TableRow> {
    FFT_TILES
        .iter()
        .map(|&a| TableRow::from(fft_profile(a, 3, true).expect("tabulated")))
        .collect()
}

/// Aligned text rendering, two decimals.
pub fn render_text(rows: &[TableRow]) -> String {
    let mut out = format!(
        "{:<15} {:>5} {:>7} {:>7} {:>7} {:>7}  {}\n",
        "method", "tile", "alpha'", "beta'", "gamma'", "delta'", "source"
    );
    for r in rows {
        let source = match r.source {
            Source::Derived => "derived",
            Source::Tabulated => "tabulated",
        };
        out.push_str(&format!(
            "{:<15} {:>5} {:>7.2} {:>7.2} {:>7.2} {:>7.2}  {}\n",
            r.method.label(),
            r.tile,
            r.alpha_n,
            r.beta_n,
            r.gamma_n,
            r.delta_n,
            source
        ));
    }
    out
}
