use n2rpp::checks::{cases, check_case, run_suite, TOLERANCE};
use n2rpp::nn::{seeded_rng, BackwardOptions, ConvSpec, LayerSpec, Network, NetworkParams, Tensor};
use n2rpp::saliency::input_gradient;
use proptest::prelude::*;
use rand::Rng;

fn random_tensor(shape: Vec<usize>, rng: &mut impl Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

#[test]
fn every_case_passes_twenty_seeds() {
    let results = run_suite(0..20).unwrap();
    assert_eq!(results.len(), cases().len() * 20);
    for r in &results {
        assert!(r.passed(), "{} seed {}: {:?}", r.name, r.seed, r.report);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn random_seeds_pass(seed in any::<u64>(), which in 0usize..11) {
        let (name, layers, shape) = cases().swap_remove(which);
        let r = check_case(name, layers, &shape, seed).unwrap();
        prop_assert!(r.report.max_error() <= TOLERANCE, "{} {:?}", name, r.report);
    }

    /// `<deconv(x), y> == <x, conv(y)>` for a shared weight tensor.
    #[test]
    fn deconv_is_adjoint_of_conv(seed in any::<u64>(), cin in 1usize..4, cout in 1usize..4, h in 2usize..6, w in 2usize..6) {
        let mut rng = seeded_rng(seed);
        let (h, w) = (h * 2, w * 2);
        let conv = ConvSpec::k4s2(cin, cout, h, w);
        let deconv = ConvSpec::k4s2(cout, cin, h / 2, w / 2);
        let weight = random_tensor(vec![cout, cin, 4, 4], &mut rng);
        let net = |spec: LayerSpec, bias: usize, input: Vec<usize>| {
            let params = NetworkParams::new(vec![
                ("0.weight".into(), weight.clone()),
                ("0.bias".into(), Tensor::zeros(&[bias])),
            ]).unwrap();
            Network::with_params(vec![spec], &input, params).unwrap()
        };
        let c = net(LayerSpec::Conv2d(conv), cout, vec![cin, h, w]);
        let d = net(LayerSpec::Deconv2d(deconv), cin, vec![cout, h / 2, w / 2]);
        let y = random_tensor(vec![1, cin, h, w], &mut rng);
        let x = random_tensor(vec![1, cout, h / 2, w / 2], &mut rng);
        let lhs = d.predict(&x).unwrap().dot(&y);
        let rhs = x.dot(&c.predict(&y).unwrap());
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()), "{lhs} vs {rhs}");
    }

    /// Backward signals right after every guided ReLU-family gate are nonnegative.
    #[test]
    fn guided_gates_emit_nonnegative_signals(seed in any::<u64>()) {
        let mut rng = seeded_rng(seed);
        for (_, layers, shape) in cases() {
            if !layers.iter().any(LayerSpec::is_relu_family) {
                continue;
            }
            let net = Network::init(layers.clone(), &shape, &mut rng).unwrap();
            let mut full = vec![3];
            full.extend_from_slice(&shape);
            let x = random_tensor(full, &mut rng);
            let g = input_gradient(&net, &x, true, true).unwrap();
            for (i, spec) in layers.iter().enumerate() {
                if spec.is_relu_family() {
                    let t = g.trace[i].as_ref().expect("trace requested");
                    prop_assert!(t.data().iter().all(|&v| v >= 0.0), "layer {} {}", i, spec.kind());
                }
            }
        }
    }
}

fn positive_net(seed: u64, layers: Vec<LayerSpec>, shape: &[usize]) -> Network {
    let mut rng = seeded_rng(seed);
    let mut net = Network::init(layers, shape, &mut rng).unwrap();
    for (_, t) in net.params.tensors_mut() {
        t.data_mut().iter_mut().for_each(|v| *v = rng.random_range(0.01..0.5));
    }
    net
}

#[test]
fn guided_equals_plain_on_positive_networks() {
    for seed in 0..20 {
        for leaky in [false, true] {
            let act = if leaky {
                LayerSpec::leaky_relu()
            } else {
                LayerSpec::Relu
            };
            let layers = vec![
                LayerSpec::Conv2d(ConvSpec::k4s2(1, 3, 8, 8)),
                act.clone(),
                LayerSpec::Flatten,
                LayerSpec::Dense { inputs: 48, outputs: 6 },
                act,
                LayerSpec::Dense { inputs: 6, outputs: 1 },
                LayerSpec::Sigmoid,
            ];
            let net = positive_net(seed, layers, &[1, 8, 8]);
            let mut rng = seeded_rng(seed + 100);
            let x = Tensor::new(
                vec![2, 1, 8, 8],
                (0..128).map(|_| rng.random_range(0.01..1.0)).collect(),
            )
            .unwrap();
            let plain = input_gradient(&net, &x, false, false).unwrap().input.unwrap();
            let guided = input_gradient(&net, &x, true, false).unwrap().input.unwrap();
            assert_eq!(plain, guided, "seed {seed}");
        }
    }
}

#[test]
fn guided_equals_plain_without_relu_layers() {
    let layers = vec![
        LayerSpec::Dense { inputs: 6, outputs: 4 },
        LayerSpec::Sigmoid,
        LayerSpec::Dense { inputs: 4, outputs: 1 },
    ];
    let mut rng = seeded_rng(9);
    let net = Network::init(layers, &[6], &mut rng).unwrap();
    let x = random_tensor(vec![3, 6], &mut rng);
    let plain = input_gradient(&net, &x, false, false).unwrap().input.unwrap();
    let guided = input_gradient(&net, &x, true, false).unwrap().input.unwrap();
    assert_eq!(plain, guided);
}

#[test]
fn backward_from_logit_skips_sigmoid() {
    let layers = vec![LayerSpec::Dense { inputs: 3, outputs: 1 }, LayerSpec::Sigmoid];
    let mut rng = seeded_rng(4);
    let net = Network::init(layers, &[3], &mut rng).unwrap();
    let x = random_tensor(vec![1, 3], &mut rng);
    let g = input_gradient(&net, &x, false, false).unwrap().input.unwrap();
    // The logit is linear in the input, so its gradient is the weight column.
    assert_eq!(g.data(), net.params.get("0.weight").unwrap().data());
    let cache = net.forward(&x).unwrap();
    let through_sigmoid = net
        .backward(&cache, &Tensor::filled(&[1, 1], 1.0), BackwardOptions::input_only())
        .unwrap()
        .input
        .unwrap();
    assert_ne!(through_sigmoid, g);
}
