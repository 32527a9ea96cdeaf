use super::LstmBackbone;
use crate::error::{LatticeError, Result};
use crate::seqcore::SeqView;

/// Comparison of analytic BPTT gradients with central finite differences.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    /// Parameter index where the maximum occurred.
    pub worst_index: usize,
    pub num_params: usize,
}

/// Relative errors are `|a - n| / max(|a|, |n|, 1e-6)`; the floor keeps
/// parameters with (near-)zero gradient from dominating through round-off.
pub fn grad_check(model: &LstmBackbone, input: SeqView<'_>, epsilon: f64) -> Result<GradCheck> {
    model.check_input(input)?;
    if input.len() < 2 {
        return Err(LatticeError::InvalidConfig("gradient check needs a sequence of length >= 2".into()));
    }
    let mean_loss = |m: &LstmBackbone| {
        let (l, c) = m.loss_and_grad(input, None);
        l / c as f64
    };
    let mut analytic = vec![0.0; model.num_params()];
    let (_, count) = model.loss_and_grad(input, Some(&mut analytic));
    analytic.iter_mut().for_each(|g| *g /= count as f64);

    let mut probe = model.clone();
    let mut worst = (0.0f64, 0usize);
    for i in 0..model.num_params() {
        let orig = probe.params[i];
        probe.params[i] = orig + epsilon;
        let plus = mean_loss(&probe);
        probe.params[i] = orig - epsilon;
        let minus = mean_loss(&probe);
        probe.params[i] = orig;
        let numeric = (plus - minus) / (2.0 * epsilon);
        let denom = analytic[i].abs().max(numeric.abs()).max(1e-6);
        let rel = (analytic[i] - numeric).abs() / denom;
        if rel > worst.0 {
            worst = (rel, i);
        }
    }
    Ok(GradCheck {
        max_rel_error: worst.0,
        worst_index: worst.1,
        num_params: model.num_params(),
    })
}
