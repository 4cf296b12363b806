use std::fmt;

use super::NetworkError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSpec {
    Conv { out_channels: usize, kernel: usize, stride: usize },
    /// Max pooling.
    Pool { window: usize, stride: usize },
    Relu,
    FullyConnected { out: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolingMode {
    Max,
    Average,
}

/// Per-view layer stack, view pooling and the final linear reduction.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    /// Square grayscale input side.
    pub input_resolution: usize,
    pub layers: Vec<LayerSpec>,
    /// D.
    pub output_dim: usize,
    pub pooling: PoolingMode,
}

/// Activation shape `(channels, height, width)`; fully-connected outputs
/// are `(n, 1, 1)`.
pub type Shape3 = (usize, usize, usize);

impl Default for NetworkConfig {
    /// The desk-scale configuration: two conv(5×5)/ReLU/pool(2×2) stages with
    /// 8 and 16 channels, a 256-wide fully-connected layer and D = 128, on
    /// 64×64 inputs.
    fn default() -> Self {
        Self::toy(64)
    }
}

impl NetworkConfig {
    pub fn toy(resolution: usize) -> Self {
        Self {
            input_resolution: resolution,
            layers: vec![
                LayerSpec::Conv { out_channels: 8, kernel: 5, stride: 1 },
                LayerSpec::Relu,
                LayerSpec::Pool { window: 2, stride: 2 },
                LayerSpec::Conv { out_channels: 16, kernel: 5, stride: 1 },
                LayerSpec::Relu,
                LayerSpec::Pool { window: 2, stride: 2 },
                LayerSpec::FullyConnected { out: 256 },
                LayerSpec::Relu,
            ],
            output_dim: 128,
            pooling: PoolingMode::Max,
        }
    }

    /// Output shape of every layer, starting with the input.
    pub fn shapes(&self) -> Result<Vec<Shape3>, NetworkError> {
        let bad = |m: String| Err(NetworkError::Config(m));
        if self.input_resolution == 0 {
            return bad("input_resolution must be positive".into());
        }
        let mut cur = (1, self.input_resolution, self.input_resolution);
        let mut out = vec![cur];
        for (i, l) in self.layers.iter().enumerate() {
            cur = match *l {
                LayerSpec::Conv { out_channels, kernel, stride } => {
                    if out_channels == 0 || kernel == 0 || stride == 0 {
                        return bad(format!("layer {i}: conv sizes must be positive"));
                    }
                    if kernel > cur.1 || kernel > cur.2 {
                        return bad(format!("layer {i}: kernel {kernel} larger than input {}x{}", cur.1, cur.2));
                    }
                    (out_channels, (cur.1 - kernel) / stride + 1, (cur.2 - kernel) / stride + 1)
                }
                LayerSpec::Pool { window, stride } => {
                    if window == 0 || stride == 0 {
                        return bad(format!("layer {i}: pool sizes must be positive"));
                    }
                    if window > cur.1 || window > cur.2 {
                        return bad(format!("layer {i}: pool window {window} larger than input {}x{}", cur.1, cur.2));
                    }
                    (cur.0, (cur.1 - window) / stride + 1, (cur.2 - window) / stride + 1)
                }
                LayerSpec::Relu => cur,
                LayerSpec::FullyConnected { out } => {
                    if out == 0 {
                        return bad(format!("layer {i}: fully-connected width must be positive"));
                    }
                    (out, 1, 1)
                }
            };
            out.push(cur);
        }
        Ok(out)
    }

    /// Length of the per-view descriptor (the flattened last layer output).
    pub fn view_descriptor_dim(&self) -> Result<usize, NetworkError> {
        let s = *self.shapes()?.last().expect("input shape");
        Ok(s.0 * s.1 * s.2)
    }

    pub fn validate(&self) -> Result<(), NetworkError> {
        self.view_descriptor_dim()?;
        if !(16..=512).contains(&self.output_dim) {
            return Err(NetworkError::Config(format!("output_dim {} outside 16..=512", self.output_dim)));
        }
        Ok(())
    }

    /// Parses the `key = value` block written by `Display`.
    pub fn parse(text: &str) -> Result<Self, NetworkError> {
        let mut res = None;
        let mut layers = None;
        let mut dim = None;
        let mut pooling = PoolingMode::Max;
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| NetworkError::Config(format!("expected key = value: {line}")))?;
            let (k, v) = (k.trim(), v.trim());
            let num = |v: &str| v.parse::<usize>().map_err(|_| NetworkError::Config(format!("bad number for {k}: {v}")));
            match k {
                "input_resolution" => res = Some(num(v)?),
                "output_dim" => dim = Some(num(v)?),
                "pooling" => {
                    pooling = match v {
                        "max" => PoolingMode::Max,
                        "average" => PoolingMode::Average,
                        _ => return Err(NetworkError::Config(format!("unknown pooling mode {v}"))),
                    }
                }
                "layers" => layers = Some(parse_layers(v)?),
                _ => return Err(NetworkError::Config(format!("unknown network key {k}"))),
            }
        }
        let cfg = Self {
            input_resolution: res.ok_or_else(|| NetworkError::Config("missing input_resolution".into()))?,
            layers: layers.ok_or_else(|| NetworkError::Config("missing layers".into()))?,
            output_dim: dim.ok_or_else(|| NetworkError::Config("missing output_dim".into()))?,
            pooling,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Comma-separated `conv:OUT:K:S`, `pool:W:S`, `relu`, `fc:OUT`.
pub fn parse_layers(text: &str) -> Result<Vec<LayerSpec>, NetworkError> {
    text.split(',')
        .map(|tok| {
            let tok = tok.trim();
            let parts: Vec<&str> = tok.split(':').collect();
            let n = |i: usize| {
                parts
                    .get(i)
                    .and_then(|p| p.parse::<usize>().ok())
                    .ok_or_else(|| NetworkError::Config(format!("bad layer spec {tok}")))
            };
            match (parts[0], parts.len()) {
                ("conv", 4) => Ok(LayerSpec::Conv { out_channels: n(1)?, kernel: n(2)?, stride: n(3)? }),
                ("pool", 3) => Ok(LayerSpec::Pool { window: n(1)?, stride: n(2)? }),
                ("relu", 1) => Ok(LayerSpec::Relu),
                ("fc", 2) => Ok(LayerSpec::FullyConnected { out: n(1)? }),
                _ => Err(NetworkError::Config(format!("bad layer spec {tok}"))),
            }
        })
        .collect()
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerSpec::Conv { out_channels, kernel, stride } => write!(f, "conv:{out_channels}:{kernel}:{stride}"),
            LayerSpec::Pool { window, stride } => write!(f, "pool:{window}:{stride}"),
            LayerSpec::Relu => write!(f, "relu"),
            LayerSpec::FullyConnected { out } => write!(f, "fc:{out}"),
        }
    }
}

impl fmt::Display for NetworkConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let layers: Vec<String> = self.layers.iter().map(|l| l.to_string()).collect();
        writeln!(f, "input_resolution = {}", self.input_resolution)?;
        writeln!(f, "layers = {}", layers.join(","))?;
        writeln!(f, "output_dim = {}", self.output_dim)?;
        writeln!(
            f,
            "pooling = {}",
            match self.pooling {
                PoolingMode::Max => "max",
                PoolingMode::Average => "average",
            }
        )
    }
}
