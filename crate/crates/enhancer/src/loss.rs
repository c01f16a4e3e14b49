//! Time-domain MSE between the inverse STFT of an estimate and the target.

use std::ops::Range;

use shse_core::spectral::{Spectrogram, StftProcessor};

use crate::{Error, Result};

/// Samples compared by the loss: the span where every output sample is
/// covered by the full overlap-add (first and last half frames excluded),
/// cut to the target length.
pub fn loss_region(frames: usize, target_len: usize, stft: &StftProcessor) -> Range<usize> {
    let r = stft.config().reconstructable_range(frames);
    r.start..r.end.min(target_len).max(r.start)
}

fn reconstruct(est: &Spectrogram, stft: &StftProcessor) -> Result<Vec<f64>> {
    if est.channels() != 1 {
        return Err(Error::Shape(format!("estimate must have 1 channel, has {}", est.channels())));
    }
    Ok(stft.istft(est)?.into_channels().remove(0))
}

/// Mean squared error over [`loss_region`].
pub fn loss(est: &Spectrogram, target: &[f64], stft: &StftProcessor) -> Result<f64> {
    let out = reconstruct(est, stft)?;
    let region = loss_region(est.frames(), target.len(), stft);
    if region.is_empty() {
        return Err(Error::EmptyOverlap);
    }
    let n = region.len() as f64;
    Ok(region.map(|i| (out[i] - target[i]).powi(2)).sum::<f64>() / n)
}

/// Loss and its gradient with respect to `(Re, Im)` of every estimate bin,
/// in `[t][f]` order.
pub fn loss_and_grad(est: &Spectrogram, target: &[f64], stft: &StftProcessor) -> Result<(f64, Vec<(f64, f64)>)> {
    let out = reconstruct(est, stft)?;
    let region = loss_region(est.frames(), target.len(), stft);
    if region.is_empty() {
        return Err(Error::EmptyOverlap);
    }
    let n = region.len() as f64;
    let mut grad = vec![0.0; out.len()];
    let mut total = 0.0;
    for i in region {
        let e = out[i] - target[i];
        total += e * e;
        grad[i] = 2.0 * e / n;
    }
    Ok((total / n, stft.istft_adjoint(est.frames(), &grad)))
}
