//! Named lists of convolution layers.

use serde::{Deserialize, Serialize};

use fastconv::LayerConfig;

use crate::BenchError;

/// One layer as written in a suite file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub label: String,
    #[serde(rename = "N", default = "one")]
    pub n: usize,
    #[serde(rename = "C")]
    pub c: usize,
    #[serde(rename = "H")]
    pub h: usize,
    #[serde(rename = "W")]
    pub w: usize,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "R")]
    pub r: usize,
    #[serde(rename = "S")]
    pub s: usize,
    pub pad: usize,
    #[serde(default = "one")]
    pub depth: usize,
}

fn one() -> usize {
    1
}

impl LayerSpec {
    pub fn config(&self) -> LayerConfig {
        LayerConfig {
            n: self.n,
            c: self.c,
            k: self.k,
            h: self.h,
            w: self.w,
            r: self.r,
            s: self.s,
            pad: self.pad,
            depth: self.depth,
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SuiteFile {
    Named { name: String, layers: Vec<LayerSpec> },
    Bare(Vec<LayerSpec>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerSuite {
    pub name: String,
    pub layers: Vec<(String, LayerConfig)>,
}

/// Layers reported in the accuracy table of the VGG preset.
pub const VGG_ACCURACY_LAYERS: [&str; 5] = ["conv1.2", "conv2.2", "conv3.2", "conv4.2", "conv5"];

impl LayerSuite {
    /// The 3×3 convolution layers of VGG network E, batch 1.
    pub fn vgg_e() -> Self {
        let rows: [(&str, usize, usize, usize, usize); 9] = [
            ("conv1.1", 3, 224, 64, 1),
            ("conv1.2", 64, 224, 64, 1),
            ("conv2.1", 64, 112, 128, 1),
            ("conv2.2", 128, 112, 128, 1),
            ("conv3.1", 128, 56, 256, 1),
            ("conv3.2", 256, 56, 256, 3),
            ("conv4.1", 256, 28, 512, 1),
            ("conv4.2", 512, 28, 512, 3),
            ("conv5", 512, 14, 512, 4),
        ];
        LayerSuite {
            name: "vgg-e".into(),
            layers: rows
                .iter()
                .map(|&(label, c, hw, k, depth)| (label.to_string(), LayerConfig::new(c, k, hw, hw, 3, 1).with_depth(depth)))
                .collect(),
        }
    }

    /// Parses a JSON suite: either `{"name": .., "layers": [..]}` or a bare
    /// array of layers.
    pub fn from_json(name: &str, text: &str) -> Result<Self, BenchError> {
        let (name, specs) = match serde_json::from_str::<SuiteFile>(text)? {
            SuiteFile::Named { name, layers } => (name, layers),
            SuiteFile::Bare(layers) => (name.to_string(), layers),
        };
        let mut layers = Vec::with_capacity(specs.len());
        for spec in specs {
            let cfg = spec.config();
            cfg.validate()
                .map_err(|e| BenchError::Usage(format!("layer {}: {e}", spec.label)))?;
            layers.push((spec.label, cfg));
        }
        Ok(LayerSuite { name, layers })
    }

    /// `"vgg-e"` or a path to a JSON suite file.
    pub fn load(name_or_path: &str) -> Result<Self, BenchError> {
        if name_or_path == "vgg-e" {
            return Ok(Self::vgg_e());
        }
        let text = std::fs::read_to_string(name_or_path)
            .map_err(|e| BenchError::Usage(format!("unknown suite {name_or_path:?}: {e}")))?;
        Self::from_json(name_or_path, &text)
    }

    pub fn to_json(&self) -> String {
        let specs: Vec<LayerSpec> = self
            .layers
            .iter()
            .map(|(label, c)| LayerSpec {
                label: label.clone(),
                n: c.n,
                c: c.c,
                h: c.h,
                w: c.w,
                k: c.k,
                r: c.r,
                s: c.s,
                pad: c.pad,
                depth: c.depth,
            })
            .collect();
        serde_json::json!({ "name": self.name, "layers": specs }).to_string()
    }

    /// Keeps the named layers, in the order given.
    pub fn select(&self, labels: &[String]) -> Result<Self, BenchError> {
        let layers = labels
            .iter()
            .map(|l| {
                self.layers
                    .iter()
                    .find(|(label, _)| label == l)
                    .cloned()
                    .ok_or_else(|| BenchError::Usage(format!("suite {} has no layer {l:?}", self.name)))
            })
            .collect::<Result<_, _>>()?;
        Ok(LayerSuite { name: self.name.clone(), layers })
    }

    /// Direct-convolution GFLOPs of every layer, depth-weighted.
    pub fn total_gflops(&self) -> f64 {
        self.layers.iter().map(|(_, c)| fastconv::reference::gflops_direct(c)).sum()
    }
}

/// Shrinks the spatial size by `scale` (and the channel counts too when
/// `channels` is set), never below one.
pub fn scale_config(cfg: &LayerConfig, scale: f64, channels: bool) -> LayerConfig {
    let shrink = |v: usize| ((v as f64 * scale).round() as usize).max(1);
    let mut out = *cfg;
    out.h = shrink(cfg.h).max(cfg.r.saturating_sub(2 * cfg.pad));
    out.w = shrink(cfg.w).max(cfg.s.saturating_sub(2 * cfg.pad));
    if channels {
        out.c = shrink(cfg.c);
        out.k = shrink(cfg.k);
    }
    out
}

pub fn check_scale(scale: f64) -> Result<(), BenchError> {
    if scale > 0.0 && scale <= 1.0 {
        Ok(())
    } else {
        Err(BenchError::Usage(format!("--scale must lie in (0, 1], got {scale}")))
    }
}
