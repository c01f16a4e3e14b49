//! Activation tensors in a channel-major layout with zero-padded frequency
//! rows, so a frequency convolution is a handful of shifted matrix products.

use shse_core::features::RealTensor;

use crate::scalar::Scalar;
use crate::{Error, Result};

/// Zero bins stored on each side of every frequency row; bounds the kernel
/// width to `2·PAD + 1`.
pub const PAD: usize = 2;

/// Activations `[channel][row][PAD + bin + PAD]` where `row = b·frames + t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Act<T> {
    pub channels: usize,
    pub batch: usize,
    pub frames: usize,
    pub bins: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> Act<T> {
    pub fn zeros(channels: usize, batch: usize, frames: usize, bins: usize) -> Self {
        Self {
            channels,
            batch,
            frames,
            bins,
            data: vec![T::zero(); channels * batch * frames * (bins + 2 * PAD)],
        }
    }

    pub fn rows(&self) -> usize {
        self.batch * self.frames
    }

    /// Padded row length.
    pub fn row_len(&self) -> usize {
        self.bins + 2 * PAD
    }

    /// Elements per channel plane.
    pub fn plane(&self) -> usize {
        self.rows() * self.row_len()
    }

    pub fn index(&self, c: usize, row: usize, f: usize) -> usize {
        (c * self.rows() + row) * self.row_len() + PAD + f
    }

    pub fn get(&self, c: usize, row: usize, f: usize) -> T {
        self.data[self.index(c, row, f)]
    }

    pub fn same_grid(&self, other: &Act<T>) -> bool {
        self.batch == other.batch && self.frames == other.frames && self.bins == other.bins
    }

    pub fn zero_pads(&mut self) {
        let rl = self.row_len();
        for row in self.data.chunks_exact_mut(rl) {
            row[..PAD].fill(T::zero());
            row[rl - PAD..].fill(T::zero());
        }
    }

    /// Iterates mutable valid (non-pad) rows of `bins` elements.
    pub fn valid_rows_mut(&mut self) -> impl Iterator<Item = &mut [T]> {
        let (rl, bins) = (self.row_len(), self.bins);
        self.data.chunks_exact_mut(rl).map(move |r| &mut r[PAD..PAD + bins])
    }

    pub fn valid_rows(&self) -> impl Iterator<Item = &[T]> {
        let (rl, bins) = (self.row_len(), self.bins);
        self.data.chunks_exact(rl).map(move |r| &r[PAD..PAD + bins])
    }

    /// Valid rows of one channel.
    pub fn channel_rows(&self, c: usize) -> impl Iterator<Item = &[T]> {
        let (rl, bins, plane) = (self.row_len(), self.bins, self.plane());
        self.data[c * plane..(c + 1) * plane]
            .chunks_exact(rl)
            .map(move |r| &r[PAD..PAD + bins])
    }

    pub fn channel_rows_mut(&mut self, c: usize) -> impl Iterator<Item = &mut [T]> {
        let (rl, bins, plane) = (self.row_len(), self.bins, self.plane());
        self.data[c * plane..(c + 1) * plane]
            .chunks_exact_mut(rl)
            .map(move |r| &mut r[PAD..PAD + bins])
    }

    /// Stacks utterance tensors `[t][f][c]` of identical shape into a batch.
    pub fn from_tensors(tensors: &[&RealTensor]) -> Result<Self> {
        let first = tensors.first().ok_or_else(|| Error::Shape("empty batch".into()))?;
        let (frames, bins, channels) = (first.frames, first.bins, first.channels);
        let mut act = Self::zeros(channels, tensors.len(), frames, bins);
        for (b, t) in tensors.iter().enumerate() {
            if t.dims() != first.dims() {
                return Err(Error::Shape(format!(
                    "batch item {b} has shape {:?}, expected {:?}",
                    t.dims(),
                    first.dims()
                )));
            }
            for fr in 0..frames {
                for f in 0..bins {
                    for c in 0..channels {
                        let i = act.index(c, b * frames + fr, f);
                        act.data[i] = T::from_f64(t.get(fr, f, c));
                    }
                }
            }
        }
        Ok(act)
    }

    /// Concatenates along channels.
    pub fn concat(parts: &[&Act<T>]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::Shape("nothing to concatenate".into()))?;
        if parts.iter().any(|p| !p.same_grid(first)) {
            return Err(Error::Shape("concatenated activations differ in batch/frames/bins".into()));
        }
        let mut data = Vec::with_capacity(parts.iter().map(|p| p.data.len()).sum());
        for p in parts {
            data.extend_from_slice(&p.data);
        }
        Ok(Self {
            channels: parts.iter().map(|p| p.channels).sum(),
            batch: first.batch,
            frames: first.frames,
            bins: first.bins,
            data,
        })
    }

    /// Splits channels into consecutive groups of the given widths.
    pub fn split(&self, widths: &[usize]) -> Vec<Act<T>> {
        assert_eq!(widths.iter().sum::<usize>(), self.channels, "split widths");
        let plane = self.plane();
        let mut start = 0;
        widths
            .iter()
            .map(|&w| {
                let part = Act {
                    channels: w,
                    batch: self.batch,
                    frames: self.frames,
                    bins: self.bins,
                    data: self.data[start * plane..(start + w) * plane].to_vec(),
                };
                start += w;
                part
            })
            .collect()
    }

    pub fn add_assign(&mut self, other: &Act<T>) {
        assert_eq!(self.data.len(), other.data.len(), "add_assign shapes");
        self.data.iter_mut().zip(&other.data).for_each(|(a, &b)| *a = *a + b);
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
