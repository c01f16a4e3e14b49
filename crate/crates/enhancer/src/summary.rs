//! Analytic parameter and FLOP counts.

use serde::Serialize;

use crate::model::{Direction, EnhancerConfig};

/// STFT frames per second of 16 kHz audio at a 256-sample hop.
pub const FRAMES_PER_SECOND: f64 = 16_000.0 / 256.0;

/// Published parameter count of the full-size two-encoder model.
pub const REFERENCE_PARAMS: f64 = 1.82e6;

/// Published FLOP count of the same model; its time base is not stated.
pub const REFERENCE_FLOPS: f64 = 19.52e9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    /// Frequency convolution (plain or transposed have the same counts).
    Conv { cin: usize, cout: usize, kernel: usize, bias: bool },
    BatchNorm { channels: usize },
    /// One LSTM direction.
    Lstm { input: usize, hidden: usize },
}

impl LayerSpec {
    pub fn params(&self) -> usize {
        match *self {
            LayerSpec::Conv { cin, cout, kernel, bias } => cin * cout * kernel + if bias { cout } else { 0 },
            LayerSpec::BatchNorm { channels } => 2 * channels,
            LayerSpec::Lstm { input, hidden } => 4 * hidden * (input + hidden + 1),
        }
    }

    /// Multiply-accumulates per (frame, bin); element-wise work is not
    /// counted.
    pub fn macs_per_bin(&self) -> usize {
        match *self {
            LayerSpec::Conv { cin, cout, kernel, .. } => cin * cout * kernel,
            LayerSpec::BatchNorm { .. } => 0,
            LayerSpec::Lstm { input, hidden } => 4 * hidden * (input + hidden),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelSummary {
    pub params: usize,
    /// `2 × MACs` for one second of audio.
    pub flops_per_second: f64,
}

impl ModelSummary {
    pub fn from_layers(layers: &[LayerSpec], bins: usize) -> Self {
        let macs: usize = layers.iter().map(|l| l.macs_per_bin()).sum();
        Self {
            params: layers.iter().map(LayerSpec::params).sum(),
            flops_per_second: 2.0 * macs as f64 * bins as f64 * FRAMES_PER_SECOND,
        }
    }
}

/// Every parameterized layer of the network described by `config`, in
/// forward order.
pub fn layer_specs(config: &EnhancerConfig) -> Vec<LayerSpec> {
    let k = config.kernel_freq;
    let glu = |cin: usize, cout: usize| {
        let conv = LayerSpec::Conv { cin, cout, kernel: k, bias: true };
        [conv, conv, LayerSpec::BatchNorm { channels: cout }]
    };
    let mut layers = Vec::new();
    for width in config.input_widths() {
        let mut cin = width;
        for _ in 0..config.encoder_blocks {
            layers.extend(glu(cin, config.glu_channels));
            cin = config.glu_channels;
        }
    }
    let dirs = match config.direction {
        Direction::Unidirectional => 1,
        Direction::Bidirectional => 2,
    };
    for _ in 0..dirs {
        layers.push(LayerSpec::Lstm {
            input: config.fused_width(),
            hidden: config.recurrent_hidden,
        });
    }
    layers.push(LayerSpec::Conv {
        cin: dirs * config.recurrent_hidden,
        cout: config.decoder_channels,
        kernel: 1,
        bias: true,
    });
    for j in 0..config.decoder_blocks {
        layers.extend(glu(config.decoder_channels + config.skip_width(j), config.decoder_channels));
    }
    layers.push(LayerSpec::Conv {
        cin: config.decoder_channels,
        cout: 2,
        kernel: k,
        bias: true,
    });
    layers
}

pub fn count_params_flops(config: &EnhancerConfig) -> ModelSummary {
    ModelSummary::from_layers(&layer_specs(config), config.bins)
}
