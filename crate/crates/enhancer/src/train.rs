//! Adam optimization, the training step and the plateau learning-rate rule.

use serde::{Deserialize, Serialize};
use shse_core::features::ModelInput;
use shse_core::spectral::StftProcessor;

use crate::loss::{loss, loss_and_grad};
use crate::model::{output_gradient, output_spectrograms, Enhancer, Tape};
use crate::params::ParameterSet;
use crate::scalar::Scalar;
use crate::{Error, Result};

pub const DEFAULT_LEARNING_RATE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct Adam<T> {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Number of updates applied so far.
    pub step: u64,
    pub m: ParameterSet<T>,
    pub v: ParameterSet<T>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(params: &ParameterSet<T>) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: params.zeros_like(),
            v: params.zeros_like(),
        }
    }

    /// One bias-corrected Adam update.
    pub fn update(&mut self, params: &mut ParameterSet<T>, grads: &ParameterSet<T>, lr: f64) {
        self.step += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.step as i32);
        let c2 = 1.0 - b2.powi(self.step as i32);
        let tensors = params.tensors_mut().iter_mut().zip(grads.tensors());
        let moments = self.m.tensors_mut().iter_mut().zip(self.v.tensors_mut().iter_mut());
        for ((p, g), (m, v)) in tensors.zip(moments) {
            for (((pv, &gv), mv), vv) in p.data.iter_mut().zip(&g.data).zip(&mut m.data).zip(&mut v.data) {
                let gf = gv.as_f64();
                let mf = b1 * mv.as_f64() + (1.0 - b1) * gf;
                let vf = b2 * vv.as_f64() + (1.0 - b2) * gf * gf;
                *mv = T::from_f64(mf);
                *vv = T::from_f64(vf);
                let delta = lr * (mf / c1) / ((vf / c2).sqrt() + self.eps);
                *pv = *pv - T::from_f64(delta);
            }
        }
    }
}

fn check_batch(inputs: &[&ModelInput], targets: &[&[f64]]) -> Result<()> {
    if inputs.is_empty() || inputs.len() != targets.len() {
        return Err(Error::Shape(format!(
            "batch has {} inputs and {} targets",
            inputs.len(),
            targets.len()
        )));
    }
    Ok(())
}

/// Mean per-utterance loss of a training-mode forward pass, with parameter
/// gradients and the tape (for running-statistic updates).
pub fn loss_and_gradients<T: Scalar>(
    model: &Enhancer<T>,
    inputs: &[&ModelInput],
    targets: &[&[f64]],
    stft: &StftProcessor,
) -> Result<(f64, ParameterSet<T>, Tape<T>)> {
    check_batch(inputs, targets)?;
    let (out, tape) = model.forward_batch(inputs, true)?;
    let scale = 1.0 / inputs.len() as f64;
    let mut total = 0.0;
    let mut grads = Vec::with_capacity(inputs.len());
    for (est, target) in output_spectrograms(&out).iter().zip(targets) {
        let (l, mut g) = loss_and_grad(est, target, stft)?;
        total += l * scale;
        g.iter_mut().for_each(|(re, im)| {
            *re *= scale;
            *im *= scale;
        });
        grads.push(g);
    }
    let dout = output_gradient(&out, &grads);
    let pgrads = model.backward(&tape, dout)?;
    Ok((total, pgrads, tape))
}

/// One Adam step on a batch; returns the pre-update loss.
pub fn train_step<T: Scalar>(
    model: &mut Enhancer<T>,
    inputs: &[&ModelInput],
    targets: &[&[f64]],
    adam: &mut Adam<T>,
    lr: f64,
    stft: &StftProcessor,
) -> Result<f64> {
    let (loss_value, grads, tape) = loss_and_gradients(model, inputs, targets, stft)?;
    if !loss_value.is_finite() {
        return Err(Error::NonFinite(format!("loss {loss_value} at step {}", adam.step + 1)));
    }
    if !grads.all_finite() {
        return Err(Error::NonFinite(format!("gradient at step {}", adam.step + 1)));
    }
    model.update_running_stats(&tape);
    adam.update(model.params_mut(), &grads, lr);
    Ok(loss_value)
}

/// Mean evaluation-mode loss over a batch.
pub fn evaluate_loss<T: Scalar>(
    model: &Enhancer<T>,
    inputs: &[&ModelInput],
    targets: &[&[f64]],
    stft: &StftProcessor,
) -> Result<f64> {
    check_batch(inputs, targets)?;
    let (out, _) = model.forward_batch(inputs, false)?;
    let specs = output_spectrograms(&out);
    let mut total = 0.0;
    for (est, target) in specs.iter().zip(targets) {
        total += loss(est, target, stft)?;
    }
    Ok(total / inputs.len() as f64)
}

/// Halves the learning rate once the validation loss has failed to improve
/// on its best value for two consecutive epochs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub lr: f64,
    pub best: Option<f64>,
    pub stale_epochs: u32,
}

impl LrSchedule {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            best: None,
            stale_epochs: 0,
        }
    }

    /// Records one epoch's validation loss and returns the rate to use next.
    pub fn observe(&mut self, val_loss: f64) -> f64 {
        match self.best {
            Some(best) if val_loss >= best => {
                self.stale_epochs += 1;
                if self.stale_epochs == 2 {
                    self.lr *= 0.5;
                    self.stale_epochs = 0;
                }
            }
            _ => {
                self.best = Some(val_loss);
                self.stale_epochs = 0;
            }
        }
        self.lr
    }
}

/// Learning rate after replaying a history of validation losses.
pub fn lr_schedule(initial: f64, history: &[f64]) -> f64 {
    let mut s = LrSchedule::new(initial);
    history.iter().for_each(|&l| {
        s.observe(l);
    });
    s.lr
}
