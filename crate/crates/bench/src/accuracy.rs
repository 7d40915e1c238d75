//! Maximum element error of each algorithm against an fp64 direct oracle.

use fastconv::{direct_forward, max_abs_error, quantize_fp16, Precision, Tensor4};

use crate::algo::Algo;
use crate::report::AccuracyRow;
use crate::suite::{check_scale, scale_config, LayerSuite};
use crate::BenchError;

#[derive(Debug, Clone)]
pub struct AccuracyOptions {
    pub algos: Vec<Algo>,
    /// `Fp32`, or `Fp16Sim` to round inputs to binary16 first.
    pub precision: Precision,
    pub seed: u64,
    pub scale: f64,
    pub scale_channels: bool,
    /// Use all-zero filters (every error must then be exactly zero).
    pub zero_filters: bool,
}

impl Default for AccuracyOptions {
    fn default() -> Self {
        AccuracyOptions {
            algos: vec![Algo::Direct, Algo::F2x2, Algo::F4x4],
            precision: Precision::Fp32,
            seed: 1,
            scale: 1.0,
            scale_channels: false,
            zero_filters: false,
        }
    }
}

/// Seeds for the data and filters of layer `index`.
pub fn layer_seeds(seed: u64, index: usize) -> (u64, u64) {
    let base = seed.wrapping_mul(1_000_003).wrapping_add(2 * index as u64);
    (base, base + 1)
}

/// Inputs uniform in [-1, 1) at fp32. The oracle always sees these exact
/// values; with fp16 precision the contenders see them rounded to binary16
/// and compute at fp32.
pub fn run_accuracy(suite: &LayerSuite, opts: &AccuracyOptions) -> Result<Vec<AccuracyRow>, BenchError> {
    check_scale(opts.scale)?;
    if !matches!(opts.precision, Precision::Fp32 | Precision::Fp16Sim) {
        return Err(BenchError::Usage(format!("precision {} is not a contender precision", opts.precision)));
    }
    let mut rows = Vec::new();
    for (index, (label, full)) in suite.layers.iter().enumerate() {
        let cfg = scale_config(full, opts.scale, opts.scale_channels).with_depth(1);
        let (ds, gs) = layer_seeds(opts.seed, index);
        let d = Tensor4::<f32>::uniform(cfg.data_shape(), ds, -1.0, 1.0);
        let g = if opts.zero_filters {
            Tensor4::<f32>::zeros(cfg.filter_shape())
        } else {
            Tensor4::<f32>::uniform(cfg.filter_shape(), gs, -1.0, 1.0)
        };
        let truth = direct_forward(&d, &g, &cfg, Precision::Fp64)?;
        let (dq, gq) = match opts.precision {
            Precision::Fp16Sim => (quantize_fp16(&d)?, quantize_fp16(&g)?),
            _ => (d.clone(), g.clone()),
        };
        for &algo in &opts.algos {
            let y = algo.forward(&dq, &gq, &cfg)?;
            rows.push(AccuracyRow {
                layer: label.clone(),
                algo: algo.label().to_string(),
                precision: opts.precision.label().to_string(),
                max_abs_err: max_abs_error(&y, &truth)?,
            });
        }
    }
    Ok(rows)
}

/// Fails if any contender matched the oracle exactly. On random inputs that
/// means the oracle was compared with itself.
pub fn check_nonzero(rows: &[AccuracyRow]) -> Result<(), BenchError> {
    match rows.iter().find(|r| r.max_abs_err == 0.0) {
        Some(r) => Err(BenchError::Verification(format!(
            "{} on {} reported zero error on random inputs",
            r.algo, r.layer
        ))),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use fastconv::LayerConfig;

    fn tiny() -> LayerSuite {
        LayerSuite {
            name: "tiny".into(),
            layers: vec![
                ("a".into(), LayerConfig::new(16, 8, 12, 12, 3, 1)),
                ("b".into(), LayerConfig::new(8, 8, 9, 7, 3, 0)),
            ],
        }
    }

    #[test]
    fn deterministic_and_nonzero() {
        let opts = AccuracyOptions { algos: vec![Algo::Direct, Algo::F2x2, Algo::F4x4, Algo::Fft], ..Default::default() };
        let a = run_accuracy(&tiny(), &opts).unwrap();
        assert_eq!(a, run_accuracy(&tiny(), &opts).unwrap());
        assert_eq!(a.len(), 8);
        check_nonzero(&a).unwrap();
        assert!(a.iter().all(|r| r.max_abs_err < 1e-4));
    }

    #[test]
    fn zero_filters_give_zero_error() {
        let opts = AccuracyOptions { zero_filters: true, ..Default::default() };
        let rows = run_accuracy(&tiny(), &opts).unwrap();
        assert!(rows.iter().all(|r| r.max_abs_err == 0.0));
        assert!(matches!(check_nonzero(&rows), Err(BenchError::Verification(_))));
    }

    #[test]
    fn fp16_errors_dominated_by_rounding() {
        let opts = AccuracyOptions { precision: Precision::Fp16Sim, ..Default::default() };
        let rows = run_accuracy(&tiny(), &opts).unwrap();
        assert!(rows.iter().all(|r| r.precision == "fp16" && r.max_abs_err > 1e-4));
    }

    #[test]
    fn rejects_bad_options() {
        let opts = AccuracyOptions { scale: 0.0, ..Default::default() };
        assert!(run_accuracy(&tiny(), &opts).is_err());
        let opts = AccuracyOptions { precision: Precision::Fp64, ..Default::default() };
        assert!(run_accuracy(&tiny(), &opts).is_err());
    }
}
