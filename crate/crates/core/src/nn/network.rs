use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::layer::{self, LayerBackward, LayerSpec};
use super::tensor::Tensor;
use crate::error::{Error, Result};

static NEXT_VERSION: AtomicU64 = AtomicU64::new(1);

fn fresh_version() -> u64 {
    NEXT_VERSION.fetch_add(1, Ordering::Relaxed)
}

/// Ordered, uniquely named parameter tensors of one network.
///
/// Every mutation assigns a new process-wide version tag, so a forward
/// cache can tell whether it still belongs to the parameters it sees.
#[derive(Clone, Debug)]
pub struct NetworkParams {
    entries: Vec<(String, Tensor)>,
    version: u64,
}

impl PartialEq for NetworkParams {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries
    }
}

impl NetworkParams {
    pub fn new(entries: Vec<(String, Tensor)>) -> Result<Self> {
        for (i, (name, _)) in entries.iter().enumerate() {
            if entries[..i].iter().any(|(n, _)| n == name) {
                return Err(Error::InvalidInput(format!("duplicate parameter name `{name}`")));
            }
        }
        Ok(NetworkParams {
            entries,
            version: fresh_version(),
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn tensor(&self, index: usize) -> &Tensor {
        &self.entries[index].1
    }

    pub fn name(&self, index: usize) -> &str {
        &self.entries[index].0
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    /// Total number of scalar parameters.
    pub fn scalar_count(&self) -> usize {
        self.entries.iter().map(|(_, t)| t.len()).sum()
    }

    /// Mutable access to every tensor; bumps the version tag.
    pub fn tensors_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor)> {
        self.version = fresh_version();
        self.entries.iter_mut().map(|(n, t)| (n.as_str(), t))
    }
}

/// A feed-forward stack of layers with its parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    layers: Vec<LayerSpec>,
    /// Index of the weight tensor in `params` for each parametrized layer.
    param_slots: Vec<Option<usize>>,
    input_shape: Vec<usize>,
    pub params: NetworkParams,
}

/// Activations recorded by [`Network::forward`].
#[derive(Clone, Debug)]
pub struct Cache {
    /// `activations[0]` is the input, `activations[i + 1]` the output of layer `i`.
    pub activations: Vec<Tensor>,
    version: u64,
}

impl Cache {
    pub fn output(&self) -> &Tensor {
        self.activations.last().expect("cache holds the input")
    }
}

#[derive(Clone, Copy, Debug)]
pub struct BackwardOptions {
    pub param_grads: bool,
    pub input_grad: bool,
    /// Guided rule at ReLU-family layers.
    pub guided: bool,
    /// Record the gradient with respect to every activation.
    pub trace: bool,
}

impl Default for BackwardOptions {
    fn default() -> Self {
        BackwardOptions {
            param_grads: true,
            input_grad: true,
            guided: false,
            trace: false,
        }
    }
}

impl BackwardOptions {
    pub fn params_only() -> Self {
        BackwardOptions {
            input_grad: false,
            ..Default::default()
        }
    }

    pub fn input_only() -> Self {
        BackwardOptions {
            param_grads: false,
            ..Default::default()
        }
    }
}

#[derive(Clone, Debug)]
pub struct Gradients {
    /// Aligned with the network's parameter order. Empty when not requested.
    pub params: Vec<Tensor>,
    pub input: Option<Tensor>,
    /// `trace[i]` is the gradient w.r.t. `activations[i]` (when requested).
    pub trace: Vec<Option<Tensor>>,
}

impl Network {
    /// Glorot-uniform weights and zero biases, drawn from `rng`.
    pub fn init(layers: Vec<LayerSpec>, input_shape: &[usize], rng: &mut ChaCha8Rng) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, spec) in layers.iter().enumerate() {
            if let Some((ws, bs)) = spec.param_shapes() {
                let limit = (6.0 / spec.fan_sum() as f64).sqrt();
                let n: usize = ws.iter().product();
                let w: Vec<f64> = (0..n).map(|_| rng.random_range(-limit..=limit)).collect();
                entries.push((format!("{i}.weight"), Tensor::from_parts(ws, w)));
                entries.push((format!("{i}.bias"), Tensor::zeros(&bs)));
            }
        }
        Self::with_params(layers, input_shape, NetworkParams::new(entries)?)
    }

    /// Assembles a network from existing parameters, checking every shape.
    pub fn with_params(layers: Vec<LayerSpec>, input_shape: &[usize], params: NetworkParams) -> Result<Self> {
        let mut param_slots = Vec::with_capacity(layers.len());
        let mut next = 0;
        let mut shape = vec![1];
        shape.extend_from_slice(input_shape);
        for (i, spec) in layers.iter().enumerate() {
            shape = spec
                .output_shape(&shape)
                .map_err(|message| Error::LayerShape { layer: i, message })?;
            if spec.param_shapes().is_some() {
                if next + 1 >= params.len() {
                    return Err(Error::LayerShape {
                        layer: i,
                        message: "missing parameters".into(),
                    });
                }
                layer::check_params(spec, i, params.tensor(next), params.tensor(next + 1))?;
                param_slots.push(Some(next));
                next += 2;
            } else {
                param_slots.push(None);
            }
        }
        if next != params.len() {
            return Err(Error::InvalidInput(format!(
                "{} parameter tensors supplied, layers use {next}",
                params.len()
            )));
        }
        Ok(Network {
            layers,
            param_slots,
            input_shape: input_shape.to_vec(),
            params,
        })
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    /// Per-sample input shape.
    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    fn layer_params(&self, i: usize) -> Option<(&Tensor, &Tensor)> {
        self.param_slots[i].map(|p| (self.params.tensor(p), self.params.tensor(p + 1)))
    }

    /// Runs every layer, keeping the activations needed by `backward`.
    pub fn forward(&self, input: &Tensor) -> Result<Cache> {
        self.forward_layers(input, self.layers.len())
    }

    /// Runs the first `depth` layers only.
    pub fn forward_layers(&self, input: &Tensor, depth: usize) -> Result<Cache> {
        if input.shape().len() < 2 || input.sample_len() != self.input_shape.iter().product::<usize>() {
            return Err(Error::LayerShape {
                layer: 0,
                message: format!("input {:?} does not match {:?}", input.shape(), self.input_shape),
            });
        }
        let mut activations = Vec::with_capacity(depth + 1);
        let mut shape = vec![input.batch()];
        shape.extend_from_slice(&self.input_shape);
        activations.push(input.clone().reshape(&shape)?);
        for (i, spec) in self.layers[..depth].iter().enumerate() {
            let x = activations.last().expect("nonempty");
            let out_shape = spec
                .output_shape(x.shape())
                .map_err(|message| Error::LayerShape { layer: i, message })?;
            let y = layer::forward(spec, self.layer_params(i), x, out_shape);
            activations.push(y);
        }
        Ok(Cache {
            activations,
            version: self.params.version(),
        })
    }

    /// Runs layers `start..end` on an input shaped like `activations[start]`.
    pub fn run_layers(&self, input: &Tensor, start: usize, end: usize) -> Result<Tensor> {
        let mut x = input.clone();
        for i in start..end {
            let out_shape = self.layers[i]
                .output_shape(x.shape())
                .map_err(|message| Error::LayerShape { layer: i, message })?;
            x = layer::forward(&self.layers[i], self.layer_params(i), &x, out_shape);
        }
        Ok(x)
    }

    /// Output only.
    pub fn predict(&self, input: &Tensor) -> Result<Tensor> {
        let mut cache = self.forward(input)?;
        Ok(cache.activations.pop().expect("nonempty"))
    }

    /// Backpropagates `upstream` (gradient w.r.t. the cached output).
    pub fn backward(&self, cache: &Cache, upstream: &Tensor, opts: BackwardOptions) -> Result<Gradients> {
        let top = cache.activations.len() - 1;
        self.backward_from(cache, top, upstream, opts)
    }

    /// Backpropagates from `activations[top]` down to the input.
    pub fn backward_from(
        &self,
        cache: &Cache,
        top: usize,
        upstream: &Tensor,
        opts: BackwardOptions,
    ) -> Result<Gradients> {
        if cache.version != self.params.version() || cache.activations.len() > self.layers.len() + 1 {
            return Err(Error::StaleCache);
        }
        if top >= cache.activations.len() {
            return Err(Error::InvalidInput(format!("no cached activation {top}")));
        }
        if upstream.shape() != cache.activations[top].shape() {
            return Err(Error::LayerShape {
                layer: top.saturating_sub(1),
                message: format!(
                    "upstream gradient {:?} does not match output {:?}",
                    upstream.shape(),
                    cache.activations[top].shape()
                ),
            });
        }
        let mut params: Vec<Option<Tensor>> = vec![None; self.params.len()];
        let mut trace: Vec<Option<Tensor>> = vec![None; cache.activations.len()];
        let mut grad = upstream.clone();
        // The lowest layer that must propagate to its input.
        let lowest = if opts.input_grad {
            0
        } else {
            self.param_slots[..top].iter().position(Option::is_some).unwrap_or(top)
        };
        for i in (0..top).rev() {
            if opts.trace {
                trace[i + 1] = Some(grad.clone());
            }
            let what = LayerBackward {
                param_grads: opts.param_grads,
                input_grad: i > lowest || opts.input_grad,
                guided: opts.guided,
            };
            let (dx, dp) = layer::backward(
                &self.layers[i],
                self.layer_params(i),
                &cache.activations[i],
                &cache.activations[i + 1],
                &grad,
                what,
            );
            if let (Some(slot), Some((dw, db))) = (self.param_slots[i], dp) {
                params[slot] = Some(dw);
                params[slot + 1] = Some(db);
            }
            match dx {
                Some(dx) => grad = dx,
                None => break,
            }
        }
        let input = if opts.input_grad {
            if opts.trace {
                trace[0] = Some(grad.clone());
            }
            Some(grad)
        } else {
            None
        };
        let params = if opts.param_grads {
            params
                .into_iter()
                .enumerate()
                .map(|(i, t)| t.unwrap_or_else(|| Tensor::zeros(self.params.tensor(i).shape())))
                .collect()
        } else {
            Vec::new()
        };
        Ok(Gradients { params, input, trace })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::layer::ConvSpec;
    use crate::nn::seeded_rng;

    #[test]
    fn identity_conv_kernel_is_identity() {
        let spec = ConvSpec {
            in_channels: 1,
            out_channels: 1,
            in_height: 5,
            in_width: 3,
            kernel: 1,
            stride: 1,
            padding: 0,
        };
        let params = NetworkParams::new(vec![
            ("0.weight".into(), Tensor::filled(&[1, 1, 1, 1], 1.0)),
            ("0.bias".into(), Tensor::zeros(&[1])),
        ])
        .unwrap();
        let net = Network::with_params(vec![LayerSpec::Conv2d(spec)], &[1, 5, 3], params).unwrap();
        let x = Tensor::new(vec![2, 1, 5, 3], (0..30).map(|v| v as f64 * 0.3 - 2.0).collect()).unwrap();
        assert_eq!(net.predict(&x).unwrap().data(), x.data());
    }

    #[test]
    fn relu_forward() {
        let net = Network::init(vec![LayerSpec::Relu], &[3], &mut seeded_rng(0)).unwrap();
        let x = Tensor::new(vec![1, 3], vec![-1.0, 0.0, 2.0]).unwrap();
        assert_eq!(net.predict(&x).unwrap().data(), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn dense_output_shape() {
        let net = Network::init(
            vec![LayerSpec::Dense { inputs: 4, outputs: 7 }],
            &[4],
            &mut seeded_rng(3),
        )
        .unwrap();
        let x = Tensor::filled(&[5, 4], 0.5);
        assert_eq!(net.predict(&x).unwrap().shape(), &[5, 7]);
    }

    #[test]
    fn sigmoid_local_gradient_at_zero() {
        let net = Network::init(vec![LayerSpec::Sigmoid], &[1], &mut seeded_rng(0)).unwrap();
        let cache = net.forward(&Tensor::zeros(&[1, 1])).unwrap();
        let g = net
            .backward(&cache, &Tensor::filled(&[1, 1], 1.0), BackwardOptions::default())
            .unwrap();
        assert_eq!(g.input.unwrap().data(), &[0.25]);
    }

    #[test]
    fn shape_mismatch_reports_layer() {
        let layers = vec![
            LayerSpec::Dense { inputs: 4, outputs: 3 },
            LayerSpec::Relu,
            LayerSpec::Dense { inputs: 5, outputs: 1 },
        ];
        match Network::init(layers, &[4], &mut seeded_rng(0)) {
            Err(Error::LayerShape { layer, .. }) => assert_eq!(layer, 2),
            other => panic!("unexpected {other:?}"),
        }
        let net = Network::init(
            vec![LayerSpec::Dense { inputs: 4, outputs: 3 }],
            &[4],
            &mut seeded_rng(0),
        )
        .unwrap();
        assert!(matches!(
            net.forward(&Tensor::zeros(&[2, 5])),
            Err(Error::LayerShape { layer: 0, .. })
        ));
    }

    #[test]
    fn stale_cache_is_rejected() {
        let mut net = Network::init(
            vec![LayerSpec::Dense { inputs: 2, outputs: 1 }],
            &[2],
            &mut seeded_rng(0),
        )
        .unwrap();
        let cache = net.forward(&Tensor::filled(&[1, 2], 1.0)).unwrap();
        for (_, t) in net.params.tensors_mut() {
            t.data_mut()[0] += 1.0;
        }
        let r = net.backward(&cache, &Tensor::filled(&[1, 1], 1.0), BackwardOptions::default());
        assert!(matches!(r, Err(Error::StaleCache)));
    }

    #[test]
    fn gradient_shapes_match_parameters() {
        let layers = vec![
            LayerSpec::Conv2d(ConvSpec::k4s2(1, 2, 4, 4)),
            LayerSpec::leaky_relu(),
            LayerSpec::Flatten,
            LayerSpec::Dense { inputs: 8, outputs: 1 },
        ];
        let net = Network::init(layers, &[1, 4, 4], &mut seeded_rng(1)).unwrap();
        let cache = net.forward(&Tensor::filled(&[3, 1, 4, 4], 0.3)).unwrap();
        let g = net
            .backward(&cache, &Tensor::filled(&[3, 1], 1.0), BackwardOptions::default())
            .unwrap();
        for (i, (_, t)) in net.params.iter().enumerate() {
            assert_eq!(g.params[i].shape(), t.shape());
        }
        assert_eq!(g.input.unwrap().shape(), &[3, 1, 4, 4]);
    }
}
