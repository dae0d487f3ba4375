use super::network::{BackwardOptions, Network};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Central-difference step.
pub const FD_STEP: f64 = 1e-5;

const MAX_CHECKED: usize = 20_000;

/// `|a - n| / max(1e-8, |a| + |n|)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    /// Worst relative error over all parameters.
    pub max_param_error: f64,
    /// Worst relative error over the input.
    pub max_input_error: f64,
    /// Name of the parameter with the worst error.
    pub worst_param: String,
    pub checked: usize,
}

impl GradCheckReport {
    pub fn max_error(&self) -> f64 {
        self.max_param_error.max(self.max_input_error)
    }
}

fn set_param(net: &mut Network, tensor: usize, index: usize, value: f64) {
    if let Some((_, t)) = net.params.tensors_mut().nth(tensor) {
        t.data_mut()[index] = value;
    }
}

/// Compares backpropagated gradients against central differences.
///
/// `loss` maps the network output to `(value, d value / d output)`.
pub fn grad_check<F>(net: &Network, input: &Tensor, loss: F) -> Result<GradCheckReport>
where
    F: Fn(&Tensor) -> (f64, Tensor),
{
    let total = net.params.scalar_count() + input.len();
    if total > MAX_CHECKED {
        return Err(Error::InvalidInput(format!(
            "{total} values is too many to check by finite differences"
        )));
    }
    let cache = net.forward(input)?;
    let (_, upstream) = loss(cache.output());
    let grads = net.backward(&cache, &upstream, BackwardOptions::default())?;
    let eval = |n: &Network, x: &Tensor| -> Result<f64> { Ok(loss(&n.predict(x)?).0) };

    let mut report = GradCheckReport {
        max_param_error: 0.0,
        max_input_error: 0.0,
        worst_param: String::new(),
        checked: total,
    };
    let mut probe = net.clone();
    for p in 0..net.params.len() {
        for j in 0..net.params.tensor(p).len() {
            let original = net.params.tensor(p).data()[j];
            set_param(&mut probe, p, j, original + FD_STEP);
            let plus = eval(&probe, input)?;
            set_param(&mut probe, p, j, original - FD_STEP);
            let minus = eval(&probe, input)?;
            set_param(&mut probe, p, j, original);
            let numeric = (plus - minus) / (2.0 * FD_STEP);
            let err = relative_error(grads.params[p].data()[j], numeric);
            if err > report.max_param_error {
                report.max_param_error = err;
                report.worst_param = net.params.name(p).to_string();
            }
        }
    }
    let analytic_input = grads.input.expect("input gradient requested");
    let mut x = input.clone();
    for j in 0..input.len() {
        let original = x.data()[j];
        x.data_mut()[j] = original + FD_STEP;
        let plus = eval(net, &x)?;
        x.data_mut()[j] = original - FD_STEP;
        let minus = eval(net, &x)?;
        x.data_mut()[j] = original;
        let numeric = (plus - minus) / (2.0 * FD_STEP);
        report.max_input_error = report
            .max_input_error
            .max(relative_error(analytic_input.data()[j], numeric));
    }
    Ok(report)
}
