//! Wall-clock timing with effective-GFLOPS reporting.
//!
//! Effective GFLOPS is the direct-convolution GFLOP count of the layer
//! divided by the measured time, whatever algorithm ran. It exceeds the
//! machine's peak rate when the algorithm does less arithmetic than direct
//! convolution.

use std::time::{Duration, Instant};

use fastconv::reference::gflops_direct;
use fastconv::Tensor4;

use crate::accuracy::layer_seeds;
use crate::algo::Algo;
use crate::report::BenchRow;
use crate::suite::{check_scale, scale_config, LayerSuite};
use crate::BenchError;

#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub algos: Vec<Algo>,
    pub batch: usize,
    pub repeats: usize,
    pub seed: u64,
    pub scale: f64,
    /// Layers whose estimated footprint exceeds this many bytes are skipped.
    pub mem_budget: usize,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            algos: vec![Algo::Direct, Algo::F2x2, Algo::F4x4],
            batch: 1,
            repeats: 3,
            seed: 1,
            scale: 1.0,
            mem_budget: 2 << 30,
        }
    }
}

pub fn effective_gflops(direct_gflops: f64, elapsed: Duration) -> f64 {
    direct_gflops / elapsed.as_secs_f64()
}

/// Times every (layer, algorithm) pair: one untimed warm-up run, then the
/// best of `repeats`. Rows are per layer instance; a `total` row per
/// algorithm weights each layer by its depth. Skipped layers are described
/// in `notices`.
pub fn run_bench(suite: &LayerSuite, opts: &BenchOptions, notices: &mut Vec<String>) -> Result<Vec<BenchRow>, BenchError> {
    check_scale(opts.scale)?;
    if opts.repeats == 0 || opts.batch == 0 {
        return Err(BenchError::Usage("--repeats and --batch must be at least 1".into()));
    }
    let mut rows = Vec::new();
    for &algo in &opts.algos {
        let (mut total_ms, mut total_gflops, mut timed) = (0.0, 0.0, 0);
        for (index, (label, full)) in suite.layers.iter().enumerate() {
            let cfg = scale_config(full, opts.scale, false).with_batch(opts.batch).with_depth(1);
            let bytes = algo.footprint(&cfg) * std::mem::size_of::<f32>();
            if bytes > opts.mem_budget {
                notices.push(format!(
                    "skipping {label} with {algo}: needs about {} MiB, budget {} MiB",
                    bytes >> 20,
                    opts.mem_budget >> 20
                ));
                continue;
            }
            let (ds, gs) = layer_seeds(opts.seed, index);
            let d = Tensor4::<f32>::uniform(cfg.data_shape(), ds, -1.0, 1.0);
            let g = Tensor4::<f32>::uniform(cfg.filter_shape(), gs, -1.0, 1.0);
            std::hint::black_box(algo.forward(&d, &g, &cfg)?);
            let mut best = Duration::MAX;
            for _ in 0..opts.repeats {
                let start = Instant::now();
                std::hint::black_box(algo.forward(&d, &g, &cfg)?);
                best = best.min(start.elapsed());
            }
            let gflops = gflops_direct(&cfg);
            let msec = best.as_secs_f64() * 1e3;
            rows.push(BenchRow {
                layer: label.clone(),
                algo: algo.label().into(),
                batch: opts.batch,
                msec,
                effective_gflops: effective_gflops(gflops, best),
            });
            total_ms += msec * full.depth as f64;
            total_gflops += gflops * full.depth as f64;
            timed += 1;
        }
        if timed > 0 {
            rows.push(BenchRow {
                layer: "total".into(),
                algo: algo.label().into(),
                batch: opts.batch,
                msec: total_ms,
                effective_gflops: total_gflops / (total_ms / 1e3),
            });
        }
    }
    Ok(rows)
}
