use std::fmt;
use std::str::FromStr;

use fastconv::engine::forward_workspace_len;
use fastconv::fft::{fft_forward_layer, hermitian_unique_count};
use fastconv::reference::direct_forward_as;
use fastconv::{tile_count, winograd_forward, LayerConfig, Tensor4, WinogradAlgorithm};

use crate::BenchError;

/// A forward-convolution method selectable from the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algo {
    Direct,
    F2x2,
    F4x4,
    Fft,
}

impl Algo {
    pub fn label(self) -> &'static str {
        match self {
            Algo::Direct => "direct",
            Algo::F2x2 => "f2x2",
            Algo::F4x4 => "f4x4",
            Algo::Fft => "fft",
        }
    }

    fn winograd(self) -> Option<WinogradAlgorithm> {
        match self {
            Algo::F2x2 => WinogradAlgorithm::builtin(2, 3).ok(),
            Algo::F4x4 => WinogradAlgorithm::builtin(4, 3).ok(),
            _ => None,
        }
    }

    /// Smallest power-of-two FFT tile, at least 8, that fits the filter.
    pub fn fft_tile(cfg: &LayerConfig) -> usize {
        cfg.r.max(cfg.s).next_power_of_two().max(8)
    }

    /// Forward pass at fp32.
    pub fn forward(self, d: &Tensor4<f32>, g: &Tensor4<f32>, cfg: &LayerConfig) -> Result<Tensor4<f32>, BenchError> {
        Ok(match self {
            Algo::Direct => direct_forward_as::<f32, f32>(d, g, cfg)?,
            Algo::Fft => fft_forward_layer(d, g, cfg, Self::fft_tile(cfg))?,
            _ => {
                let alg = self.winograd().expect("winograd variant");
                if alg.r() != cfg.r || cfg.r != cfg.s {
                    return Err(BenchError::Usage(format!("{} needs 3x3 filters", self.label())));
                }
                winograd_forward(d, g, cfg, &alg, false)?
            }
        })
    }

    /// Scalars held by tensors and workspaces during one forward pass.
    pub fn footprint(self, cfg: &LayerConfig) -> usize {
        let tensors = [cfg.data_shape(), cfg.filter_shape(), cfg.output_shape()]
            .iter()
            .map(|s| s.iter().product::<usize>())
            .sum::<usize>();
        let workspace = match self {
            Algo::Direct => 0,
            Algo::F2x2 => forward_workspace_len(cfg, 2),
            Algo::F4x4 => forward_workspace_len(cfg, 4),
            Algo::Fft => {
                let a = Self::fft_tile(cfg);
                let f = hermitian_unique_count(a);
                let p = tile_count(cfg, a - cfg.r + 1);
                f * (3 * cfg.k * cfg.c + 3 * cfg.c * p + 2 * cfg.k * p)
            }
        };
        tensors + workspace
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Algo {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, BenchError> {
        match s.trim() {
            "direct" | "direct-fp32" => Ok(Algo::Direct),
            "f2x2" | "f2" => Ok(Algo::F2x2),
            "f4x4" | "f4" => Ok(Algo::F4x4),
            "fft" => Ok(Algo::Fft),
            other => Err(BenchError::Usage(format!("unknown algorithm {other:?}"))),
        }
    }
}

/// Parses a comma-separated list such as `direct,f2x2,f4x4`.
pub fn parse_list(s: &str) -> Result<Vec<Algo>, BenchError> {
    let algos = s.split(',').filter(|p| !p.trim().is_empty()).map(str::parse).collect::<Result<Vec<_>, _>>()?;
    if algos.is_empty() {
        return Err(BenchError::Usage("empty algorithm list".into()));
    }
    Ok(algos)
}
