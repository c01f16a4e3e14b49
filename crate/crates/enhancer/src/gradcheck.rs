//! Central finite-difference verification of the analytic gradients.

use shse_core::features::ModelInput;
use shse_core::spectral::StftProcessor;

use crate::model::Enhancer;
use crate::train::loss_and_gradients;
use crate::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_relative_error: f64,
    /// Name and index of the worst parameter.
    pub worst: (String, usize),
}

/// Compares every parameter's analytic gradient of the training-mode batch
/// loss against `(L(θ+h) − L(θ−h)) / 2h`. Relative errors are taken
/// against `max(|analytic|, |numeric|, floor)`.
pub fn check_gradients(
    model: &Enhancer<f64>,
    inputs: &[&ModelInput],
    targets: &[&[f64]],
    stft: &StftProcessor,
    h: f64,
    floor: f64,
) -> Result<GradCheckReport> {
    let (_, grads, _) = loss_and_gradients(model, inputs, targets, stft)?;
    let mut probe = model.clone();
    let mut report = GradCheckReport {
        checked: 0,
        max_relative_error: 0.0,
        worst: (String::new(), 0),
    };
    for (slot, tensor) in model.params().tensors().iter().enumerate() {
        for i in 0..tensor.data.len() {
            let orig = tensor.data[i];
            probe.params_mut().get_mut(slot)[i] = orig + h;
            let (up, _, _) = loss_and_gradients(&probe, inputs, targets, stft)?;
            probe.params_mut().get_mut(slot)[i] = orig - h;
            let (down, _, _) = loss_and_gradients(&probe, inputs, targets, stft)?;
            probe.params_mut().get_mut(slot)[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let analytic = grads.get(slot)[i];
            let rel = (numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(floor);
            report.checked += 1;
            if rel > report.max_relative_error {
                report.max_relative_error = rel;
                report.worst = (tensor.name.clone(), i);
            }
        }
    }
    Ok(report)
}
