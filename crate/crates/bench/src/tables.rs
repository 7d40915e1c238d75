//! Complexity tables.

use fastconv::complexity::{
    direct_profile, layer_total_complexity, table_fast_cgemm, table_tile_size, winograd_profile, Method, Source,
    TableRow,
};
use fastconv::reference::gflops_direct;

use crate::report::{ComplexityRow, LayerCostRow};
use crate::suite::LayerSuite;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum TableKind {
    /// Direct and Winograd tiles 3 to 8.
    Winograd,
    /// FFT tiles 8 to 256, four-multiply complex products.
    Fft,
    /// FFT tiles 8 to 256, three-multiply complex products.
    FftFast,
    /// Direct GFLOPs per layer of a suite, with modelled speedups.
    LayerCosts,
}

fn row(r: TableRow) -> ComplexityRow {
    ComplexityRow {
        method: r.method.label().into(),
        tile: r.tile,
        alpha: r.alpha_n,
        beta: r.beta_n,
        gamma: r.gamma_n,
        delta: r.delta_n,
        source: match r.source {
            Source::Derived => "derived",
            Source::Tabulated => "tabulated",
        }
        .into(),
    }
}

pub fn complexity_rows(kind: TableKind) -> Vec<ComplexityRow> {
    let keep = |m: Method| match kind {
        TableKind::Winograd => matches!(m, Method::Direct | Method::Winograd),
        TableKind::Fft => m == Method::FftDirectCgemm,
        _ => false,
    };
    match kind {
        TableKind::FftFast => table_fast_cgemm().into_iter().map(row).collect(),
        _ => table_tile_size().into_iter().filter(|r| keep(r.method)).map(row).collect(),
    }
}

/// One row per layer plus a `total` row; speedups are ratios of modelled
/// total multiplies, direct over Winograd.
pub fn layer_costs(suite: &LayerSuite) -> Vec<LayerCostRow> {
    let direct = direct_profile(3);
    let f2 = winograd_profile(2, 3).expect("builtin");
    let f4 = winograd_profile(4, 3).expect("builtin");
    let mut rows = Vec::new();
    let (mut gflops, mut l_direct, mut l_f2, mut l_f4) = (0.0, 0.0, 0.0, 0.0);
    for (label, cfg) in &suite.layers {
        let depth = cfg.depth as f64;
        let (ld, l2, l4) = if cfg.r == 3 && cfg.s == 3 {
            (
                layer_total_complexity(cfg, &direct),
                layer_total_complexity(cfg, &f2),
                layer_total_complexity(cfg, &f4),
            )
        } else {
            (f64::NAN, f64::NAN, f64::NAN)
        };
        let g = gflops_direct(cfg);
        rows.push(LayerCostRow {
            layer: label.clone(),
            c: cfg.c,
            hw: cfg.h,
            k: cfg.k,
            depth: cfg.depth,
            gflops: g,
            speedup_f2x2: ld / l2,
            speedup_f4x4: ld / l4,
        });
        gflops += g;
        l_direct += ld * depth;
        l_f2 += l2 * depth;
        l_f4 += l4 * depth;
    }
    rows.push(LayerCostRow {
        layer: "total".into(),
        c: 0,
        hw: 0,
        k: 0,
        depth: suite.layers.iter().map(|(_, c)| c.depth).sum(),
        gflops,
        speedup_f2x2: l_direct / l_f2,
        speedup_f4x4: l_direct / l_f4,
    });
    rows
}
