//! The encoder / channel-wise LSTM / decoder network.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use shse_core::features::{ModelInput, RealTensor, Variant};
use shse_core::spectral::Spectrogram;
use shse_core::Complex64;

use crate::act::Act;
use crate::layers::{ChannelLstm, ChannelLstmCache, Conv, GluBlock, GluCache};
use crate::params::ParameterSet;
use crate::scalar::Scalar;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Unidirectional,
    Bidirectional,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnhancerConfig {
    pub variant: Variant,
    /// Real input channels of the STFT tensor (2 per microphone).
    pub stft_channels: usize,
    /// Real input channels of the SHT tensor (`2(N+1)²`).
    pub sht_channels: usize,
    pub encoder_blocks: usize,
    /// Output width of every GLU in each encoder.
    pub glu_channels: usize,
    pub decoder_blocks: usize,
    /// Width entering (and leaving) every decoder block, skips excluded.
    pub decoder_channels: usize,
    pub kernel_freq: usize,
    /// Per-bin LSTM state width (per direction).
    pub recurrent_hidden: usize,
    pub bins: usize,
    pub direction: Direction,
    /// Concatenate mirrored encoder outputs onto decoder inputs.
    pub skip_connections: bool,
    /// Weight kept on the old running statistics at each training step.
    pub bn_momentum: f64,
}

impl EnhancerConfig {
    /// Full-size configuration for the two-encoder model.
    pub fn parallel() -> Self {
        Self {
            variant: Variant::Parallel,
            stft_channels: 18,
            sht_channels: 50,
            encoder_blocks: 6,
            glu_channels: 32,
            decoder_blocks: 6,
            decoder_channels: 128,
            kernel_freq: 5,
            recurrent_hidden: 64,
            bins: 257,
            direction: Direction::Unidirectional,
            skip_connections: true,
            bn_momentum: 0.9,
        }
    }

    /// Full-size single-encoder model on the concatenated input.
    pub fn serial() -> Self {
        Self {
            variant: Variant::Serial,
            glu_channels: 64,
            ..Self::parallel()
        }
    }

    pub fn for_variant(variant: Variant) -> Self {
        match variant {
            Variant::Parallel => Self::parallel(),
            Variant::Serial => Self::serial(),
        }
    }

    /// Reduced widths for single-core training runs. The serial encoder is
    /// twice as wide as each parallel encoder, as in the full-size pair.
    pub fn desk(variant: Variant) -> Self {
        let glu = match variant {
            Variant::Parallel => 8,
            Variant::Serial => 16,
        };
        Self {
            variant,
            encoder_blocks: 3,
            glu_channels: glu,
            decoder_blocks: 3,
            decoder_channels: 16,
            recurrent_hidden: 16,
            ..Self::parallel()
        }
    }

    /// Minimal configuration for gradient checks: 17 bins, one block per
    /// stage and 4 channels.
    pub fn tiny(variant: Variant) -> Self {
        Self {
            variant,
            stft_channels: 4,
            sht_channels: 8,
            encoder_blocks: 1,
            glu_channels: 4,
            decoder_blocks: 1,
            decoder_channels: 4,
            kernel_freq: 5,
            recurrent_hidden: 4,
            bins: 17,
            direction: Direction::Unidirectional,
            skip_connections: true,
            bn_momentum: 0.9,
        }
    }

    pub fn encoder_count(&self) -> usize {
        match self.variant {
            Variant::Parallel => 2,
            Variant::Serial => 1,
        }
    }

    pub fn input_widths(&self) -> Vec<usize> {
        match self.variant {
            Variant::Parallel => vec![self.stft_channels, self.sht_channels],
            Variant::Serial => vec![self.stft_channels + self.sht_channels],
        }
    }

    /// Channels of the fused encoder output (also the skip width).
    pub fn fused_width(&self) -> usize {
        if self.encoder_blocks == 0 {
            self.input_widths().iter().sum()
        } else {
            self.encoder_count() * self.glu_channels
        }
    }

    pub fn skip_width(&self, decoder_block: usize) -> usize {
        if self.skip_connections && decoder_block < self.encoder_blocks {
            self.encoder_count() * self.glu_channels
        } else {
            0
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.kernel_freq % 2 == 0 || self.kernel_freq > 5 {
            return bad(format!("kernel_freq {} must be 1, 3 or 5", self.kernel_freq));
        }
        if self.bins == 0 {
            return bad("bins must be positive".into());
        }
        if self.recurrent_hidden == 0 || self.decoder_channels == 0 {
            return bad("recurrent_hidden and decoder_channels must be positive".into());
        }
        if self.input_widths().contains(&0) {
            return bad("input channel counts must be positive".into());
        }
        if self.encoder_blocks > 0 && self.glu_channels == 0 {
            return bad("glu_channels must be positive".into());
        }
        if !(0.0..1.0).contains(&self.bn_momentum) {
            return bad(format!("bn_momentum {} outside [0, 1)", self.bn_momentum));
        }
        Ok(())
    }
}

/// Network parameters, batch-norm running statistics and layer layout.
#[derive(Debug, Clone)]
pub struct Enhancer<T> {
    config: EnhancerConfig,
    params: ParameterSet<T>,
    buffers: ParameterSet<T>,
    encoders: Vec<Vec<GluBlock>>,
    lstm: ChannelLstm,
    projection: Conv,
    decoder: Vec<GluBlock>,
    head: Conv,
}

/// Intermediate values of a training-mode forward pass.
#[derive(Debug, Clone)]
pub struct Tape<T> {
    encoders: Vec<Vec<GluCache<T>>>,
    lstm: ChannelLstmCache<T>,
    lstm_out: Act<T>,
    decoder: Vec<GluCache<T>>,
    head_in: Act<T>,
}

impl<T: Scalar> Enhancer<T> {
    /// Builds the network and initializes it from `seed`.
    pub fn new(config: EnhancerConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut params = ParameterSet::new();
        let mut buffers = ParameterSet::new();
        let k = config.kernel_freq;
        let names = match config.variant {
            Variant::Parallel => vec!["enc_stft", "enc_sht"],
            Variant::Serial => vec!["enc"],
        };
        let mut encoders = Vec::new();
        for (name, &width) in names.iter().zip(&config.input_widths()) {
            let mut blocks = Vec::new();
            let mut cin = width;
            for l in 0..config.encoder_blocks {
                blocks.push(GluBlock::new(
                    &mut params,
                    &mut buffers,
                    &format!("{name}.{l}"),
                    cin,
                    config.glu_channels,
                    k,
                    false,
                )?);
                cin = config.glu_channels;
            }
            encoders.push(blocks);
        }
        let bidir = config.direction == Direction::Bidirectional;
        let lstm = ChannelLstm::new(&mut params, "lstm", config.fused_width(), config.recurrent_hidden, bidir);
        let projection = Conv::new(
            &mut params,
            "projection",
            lstm.output_channels(),
            config.decoder_channels,
            1,
            false,
            true,
        )?;
        let mut decoder = Vec::new();
        for j in 0..config.decoder_blocks {
            decoder.push(GluBlock::new(
                &mut params,
                &mut buffers,
                &format!("dec.{j}"),
                config.decoder_channels + config.skip_width(j),
                config.decoder_channels,
                k,
                true,
            )?);
        }
        let head = Conv::new(&mut params, "head", config.decoder_channels, 2, k, false, true)?;

        let mut model = Self {
            config,
            params,
            buffers,
            encoders,
            lstm,
            projection,
            decoder,
            head,
        };
        model.initialize(seed);
        Ok(model)
    }

    fn initialize(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (p, b) = (&mut self.params, &mut self.buffers);
        for block in self.encoders.iter().flatten() {
            block.init(p, b, &mut rng);
        }
        self.lstm.init(p, &mut rng);
        self.projection.init(p, &mut rng);
        for block in &self.decoder {
            block.init(p, b, &mut rng);
        }
        self.head.init(p, &mut rng);
    }

    pub fn config(&self) -> &EnhancerConfig {
        &self.config
    }

    pub fn params(&self) -> &ParameterSet<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParameterSet<T> {
        &mut self.params
    }

    /// Batch-norm running statistics.
    pub fn buffers(&self) -> &ParameterSet<T> {
        &self.buffers
    }

    pub fn buffers_mut(&mut self) -> &mut ParameterSet<T> {
        &mut self.buffers
    }

    /// The same network in another precision.
    pub fn cast<U: Scalar>(&self) -> Enhancer<U> {
        Enhancer {
            config: self.config.clone(),
            params: self.params.cast(),
            buffers: self.buffers.cast(),
            encoders: self.encoders.clone(),
            lstm: self.lstm.clone(),
            projection: self.projection.clone(),
            decoder: self.decoder.clone(),
            head: self.head.clone(),
        }
    }

    fn encoder_inputs(&self, inputs: &[&ModelInput]) -> Result<Vec<Act<T>>> {
        let mut per_encoder: Vec<Vec<&RealTensor>> = vec![Vec::new(); self.config.encoder_count()];
        for input in inputs {
            match (input, self.config.variant) {
                (ModelInput::Parallel { stft, sht }, Variant::Parallel) => {
                    per_encoder[0].push(stft);
                    per_encoder[1].push(sht);
                }
                (ModelInput::Serial(t), Variant::Serial) => per_encoder[0].push(t),
                (other, v) => {
                    return Err(Error::VariantMismatch {
                        model: v,
                        input: other.variant(),
                    })
                }
            }
        }
        let widths = self.config.input_widths();
        per_encoder
            .iter()
            .zip(widths)
            .map(|(ts, w)| {
                let act = Act::from_tensors(ts)?;
                if act.channels != w || act.bins != self.config.bins {
                    return Err(Error::Shape(format!(
                        "input has {} channels x {} bins, model expects {w} x {}",
                        act.channels, act.bins, self.config.bins
                    )));
                }
                Ok(act)
            })
            .collect()
    }

    /// Runs the network on a batch of equally shaped inputs and returns the
    /// raw `2 × (B·T) × F` output with its tape. `train` selects batch
    /// statistics in normalization layers.
    pub fn forward_batch(&self, inputs: &[&ModelInput], train: bool) -> Result<(Act<T>, Tape<T>)> {
        let xs = self.encoder_inputs(inputs)?;
        let (p, b) = (&self.params, &self.buffers);
        let mut enc_caches = Vec::new();
        let mut enc_outs: Vec<Vec<Act<T>>> = Vec::new();
        let mut finals = Vec::new();
        for (blocks, x) in self.encoders.iter().zip(xs) {
            let mut h = x;
            let mut caches = Vec::new();
            let mut outs = Vec::new();
            for block in blocks {
                let (y, c) = block.forward(p, b, &h, train)?;
                caches.push(c);
                outs.push(y.clone());
                h = y;
            }
            enc_caches.push(caches);
            enc_outs.push(outs);
            finals.push(h);
        }
        let core_in = Act::concat(&finals.iter().collect::<Vec<_>>())?;
        let (lstm_out, lstm_cache) = self.lstm.forward(p, &core_in)?;
        let mut d = self.projection.forward(p, &lstm_out)?;
        let mut dec_caches = Vec::new();
        let e = self.config.encoder_blocks;
        for (j, block) in self.decoder.iter().enumerate() {
            let din = if self.config.skip_width(j) > 0 {
                let mut parts = vec![&d];
                parts.extend(enc_outs.iter().map(|o| &o[e - 1 - j]));
                Act::concat(&parts)?
            } else {
                d
            };
            let (y, c) = block.forward(p, b, &din, train)?;
            dec_caches.push(c);
            d = y;
        }
        let out = self.head.forward(p, &d)?;
        Ok((
            out,
            Tape {
                encoders: enc_caches,
                lstm: lstm_cache,
                lstm_out,
                decoder: dec_caches,
                head_in: d,
            },
        ))
    }

    /// Parameter gradients of `Σ dout · output` for a training-mode tape.
    pub fn backward(&self, tape: &Tape<T>, mut dout: Act<T>) -> Result<ParameterSet<T>> {
        let p = &self.params;
        let mut grads = self.params.zeros_like();
        let mut dd = self.head.backward(p, &mut grads, &tape.head_in, &mut dout);
        let e = self.config.encoder_blocks;
        let n_enc = self.config.encoder_count();
        // gradient arriving at each encoder block output via skips
        let mut enc_grads: Vec<Vec<Option<Act<T>>>> = vec![vec![None; e]; n_enc];
        for (j, block) in self.decoder.iter().enumerate().rev() {
            let din = block.backward(p, &mut grads, &tape.decoder[j], &dd)?;
            let skip = self.config.skip_width(j);
            if skip > 0 {
                let mut widths = vec![self.config.decoder_channels];
                widths.extend(std::iter::repeat(self.config.glu_channels).take(n_enc));
                let mut parts = din.split(&widths).into_iter();
                dd = parts.next().expect("decoder part");
                for (slot, g) in enc_grads.iter_mut().zip(parts) {
                    add_into(&mut slot[e - 1 - j], g);
                }
            } else {
                dd = din;
            }
        }
        let mut d_lstm_out = dd;
        let d_lstm_out = self.projection.backward(p, &mut grads, &tape.lstm_out, &mut d_lstm_out);
        let d_core = self.lstm.backward(p, &mut grads, &tape.lstm, &d_lstm_out);
        if e > 0 {
            let widths = vec![self.config.glu_channels; n_enc];
            for (enc, g) in d_core.split(&widths).into_iter().enumerate() {
                add_into(&mut enc_grads[enc][e - 1], g);
            }
            for (enc, blocks) in self.encoders.iter().enumerate() {
                let mut carry: Option<Act<T>> = None;
                for l in (0..e).rev() {
                    let mut g = enc_grads[enc][l].take();
                    if let Some(c) = carry.take() {
                        add_into(&mut g, c);
                    }
                    let g = g.expect("every encoder block receives a gradient");
                    carry = Some(blocks[l].backward(p, &mut grads, &tape.encoders[enc][l], &g)?);
                }
            }
        }
        Ok(grads)
    }

    /// Folds the batch statistics of a training-mode tape into the running
    /// statistics.
    pub fn update_running_stats(&mut self, tape: &Tape<T>) {
        let m = self.config.bn_momentum;
        let blocks = self.encoders.iter().flatten().zip(tape.encoders.iter().flatten());
        let dec = self.decoder.iter().zip(&tape.decoder);
        for (block, cache) in blocks.chain(dec) {
            if let Some(c) = cache.bn() {
                block.bn.update_running(&mut self.buffers, c, m);
            }
        }
    }

    /// Evaluation-mode enhancement of one utterance.
    pub fn enhance(&self, input: &ModelInput) -> Result<Spectrogram> {
        let (out, _) = self.forward_batch(&[input], false)?;
        Ok(output_spectrograms(&out).remove(0))
    }
}

fn add_into<T: Scalar>(slot: &mut Option<Act<T>>, g: Act<T>) {
    match slot {
        Some(acc) => acc.add_assign(&g),
        None => *slot = Some(g),
    }
}

/// Splits the 2-channel network output into one complex spectrogram per
/// batch item (channel 0 real, channel 1 imaginary).
pub fn output_spectrograms<T: Scalar>(out: &Act<T>) -> Vec<Spectrogram> {
    (0..out.batch)
        .map(|b| {
            let mut spec = Spectrogram::zeros(out.frames, out.bins, 1);
            for t in 0..out.frames {
                let row = b * out.frames + t;
                for f in 0..out.bins {
                    let z = Complex64::new(out.get(0, row, f).as_f64(), out.get(1, row, f).as_f64());
                    spec.set(t, f, 0, z);
                }
            }
            spec
        })
        .collect()
}

/// Packs per-utterance `(∂/∂Re, ∂/∂Im)` gradients (`[t][f]` order) into an
/// output-shaped activation gradient.
pub fn output_gradient<T: Scalar>(like: &Act<T>, grads: &[Vec<(f64, f64)>]) -> Act<T> {
    let mut d = Act::zeros(2, like.batch, like.frames, like.bins);
    for (b, g) in grads.iter().enumerate() {
        for t in 0..like.frames {
            for f in 0..like.bins {
                let (re, im) = g[t * like.bins + f];
                let row = b * like.frames + t;
                let i0 = d.index(0, row, f);
                let i1 = d.index(1, row, f);
                d.data[i0] = T::from_f64(re);
                d.data[i1] = T::from_f64(im);
            }
        }
    }
    d
}
