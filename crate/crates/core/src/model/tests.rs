use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::data::NUM_JOINTS;
use crate::features::{pair_flat, rjdp_from_positions, NUM_PAIRS};
use crate::nn::{batch_cross_entropy, grad_check, Adam, Tensor, FD_STEP};

fn random_input(n: usize, frames: usize, joints: usize, seed: u64) -> ModelInput {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let per = frames * joints * 3;
    let mut jp = Vec::with_capacity(n * per);
    let mut rjdp = Vec::new();
    for _ in 0..n {
        let item: Vec<f64> = (0..per).map(|_| rng.random_range(-1.0..1.0)).collect();
        rjdp.extend(rjdp_from_positions(&item, frames, joints));
        jp.extend(item);
    }
    let pairs = joints * (joints - 1);
    ModelInput {
        jp: Tensor::from_vec([n, frames, joints, 3], jp).unwrap(),
        rjdp: Tensor::from_vec([n, frames, pairs, 3], rjdp).unwrap(),
    }
}

fn config(arch: Architecture, variant: HeadVariant, frames: usize) -> ModelConfig {
    ModelConfig {
        architecture: arch,
        head_variant: variant,
        frames,
        head_channels: 4,
        ..ModelConfig::default()
    }
}

fn zero_stream_bias(model: &mut Model) {
    // stream conv biases are the second parameter of each stream
    let arch = model.config().architecture;
    let mut params = model.params_mut();
    if arch.uses_jp() {
        params[1].value.iter_mut().for_each(|b| *b = 0.0);
    }
    if arch.uses_rjdp() {
        let k = if arch.uses_jp() { 3 } else { 1 };
        params[k].value.iter_mut().for_each(|b| *b = 0.0);
    }
}

#[test]
fn stream_and_fusion_shapes() {
    for t in [5, 10, 100] {
        let cfg = ModelConfig {
            stream_channels: 3,
            ..config(Architecture::TwoStream, HeadVariant::NoCnn, t)
        };
        let model = Model::new(&cfg, 1).unwrap();
        let x = random_input(2, t, NUM_JOINTS, 2);
        let a = model.forward_jp_stream(&x.jp).unwrap();
        let b = model.forward_rjdp_stream(&x.rjdp).unwrap();
        assert_eq!(a.dims(), [2, t - 2, 20, 3]);
        assert_eq!(b.dims(), [2, t - 2, 20, 3]);
        assert_eq!(fuse(&a, &b).unwrap().dims(), [2, t - 2, 20, 6]);
    }
}

#[test]
fn stream_input_shape_is_checked() {
    let model = Model::new(&config(Architecture::TwoStream, HeadVariant::Full, 10), 1).unwrap();
    let wrong = random_input(1, 9, NUM_JOINTS, 3);
    assert!(model.forward_jp_stream(&wrong.jp).is_err());
    assert!(model.forward_rjdp_stream(&wrong.rjdp).is_err());
    assert!(model.logits(&wrong).is_err());
}

#[test]
fn zero_input_gives_zero_jp_features() {
    let mut model = Model::new(&config(Architecture::TwoStream, HeadVariant::Full, 10), 4).unwrap();
    zero_stream_bias(&mut model);
    let x = Tensor::zeros([1, 10, 20, 3]);
    let y = model.forward_jp_stream(&x).unwrap();
    assert!(y.data().iter().all(|&v| v == 0.0));
}

#[test]
fn jp_stream_is_joint_local() {
    let model = Model::new(&config(Architecture::TwoStream, HeadVariant::Full, 12), 5).unwrap();
    let x = random_input(1, 12, NUM_JOINTS, 6).jp;
    let (a, b) = (3, 11);
    let mut swapped = x.clone();
    for t in 0..12 {
        for c in 0..3 {
            let (i, j) = (x.offset(0, t, a, c), x.offset(0, t, b, c));
            swapped.data_mut().swap(i, j);
        }
    }
    let y = model.forward_jp_stream(&x).unwrap();
    let ys = model.forward_jp_stream(&swapped).unwrap();
    let [_, h, w, c] = y.dims();
    for t in 0..h {
        for col in 0..w {
            let src = if col == a { b } else if col == b { a } else { col };
            for ch in 0..c {
                assert_eq!(ys.at(0, t, col, ch), y.at(0, t, src, ch));
            }
        }
    }
}

#[test]
fn rjdp_stream_is_anchor_local() {
    let mut model = Model::new(&config(Architecture::TwoStream, HeadVariant::Full, 10), 7).unwrap();
    zero_stream_bias(&mut model);
    let x = random_input(1, 10, NUM_JOINTS, 8).rjdp;
    let anchor = 4; // joint 5
    let mut probe = x.clone();
    for t in 0..10 {
        for partner in (0..NUM_JOINTS).filter(|&p| p != anchor) {
            let k = pair_flat(anchor, partner, NUM_JOINTS).unwrap();
            for c in 0..3 {
                let o = probe.offset(0, t, k, c);
                probe.data_mut()[o] = 0.0;
            }
        }
    }
    let y = model.forward_rjdp_stream(&x).unwrap();
    let yz = model.forward_rjdp_stream(&probe).unwrap();
    let [_, h, w, c] = y.dims();
    for t in 0..h {
        for col in 0..w {
            for ch in 0..c {
                if col == anchor {
                    assert_eq!(yz.at(0, t, col, ch), 0.0);
                } else {
                    assert_eq!(yz.at(0, t, col, ch), y.at(0, t, col, ch));
                }
            }
        }
    }
}

#[test]
fn fuse_keeps_stream_one_first() {
    let a = random_input(1, 6, NUM_JOINTS, 9).jp;
    let z = Tensor::zeros([1, 6, 20, 2]);
    let f = fuse(&a, &z).unwrap();
    let (x, y) = f.split_channels(3).unwrap();
    assert_eq!(x, a);
    assert_eq!(y, z);
    assert!(fuse(&a, &Tensor::zeros([1, 5, 20, 2])).is_err());
}

#[test]
fn full_head_geometry() {
    let cfg = ModelConfig {
        head_channels: 8,
        ..config(Architecture::TwoStream, HeadVariant::Full, 100)
    };
    let model = Model::new(&cfg, 10).unwrap();
    let echo = model.describe().unwrap();
    let pool = echo.layers.iter().find(|l| l.name == "head.pool").unwrap();
    assert_eq!(pool.input, [1, 94, 20, 8]);
    let dense = echo.layers.iter().find(|l| l.name == "head.dense").unwrap();
    assert_eq!(dense.input, [1, 1, 1, 8]);
    assert_eq!(echo.param_count, model.param_count());
}

#[test]
fn no_cnn_head_is_pool_then_dense() {
    let model = Model::new(&config(Architecture::TwoStream, HeadVariant::NoCnn, 20), 11).unwrap();
    let kinds: Vec<String> = model
        .describe()
        .unwrap()
        .layers
        .into_iter()
        .filter(|l| l.name.starts_with("head."))
        .map(|l| l.kind)
        .collect();
    assert_eq!(kinds, ["adaptive_max_pool", "dense"]);
}

#[test]
fn every_variant_trains_a_step_and_emits_four_logits() {
    let x = random_input(3, 12, NUM_JOINTS, 12);
    let labels = vec![0, 2, 3];
    let mut cases: Vec<ModelConfig> = HeadVariant::ALL
        .into_iter()
        .map(|v| config(Architecture::TwoStream, v, 12))
        .collect();
    cases.push(config(Architecture::JpStream, HeadVariant::Full, 12));
    cases.push(config(Architecture::RjdpStream, HeadVariant::Full, 12));
    cases.push(ModelConfig {
        fcnet_hidden: vec![8, 6],
        ..config(Architecture::FcNet, HeadVariant::Full, 12)
    });
    for cfg in cases {
        let mut model = Model::new(&cfg, 13).unwrap();
        let before = model.logits(&x).unwrap();
        assert_eq!(before.dims(), [3, 1, 1, 4]);
        let trace = model.forward_trace(&x).unwrap();
        let loss = batch_cross_entropy(trace.logits(), &labels).unwrap();
        model.zero_grad();
        model.backward(&trace, loss.grad).unwrap();
        let mut adam = Adam::default();
        adam.step(&mut model.params_mut()).unwrap();
        assert_ne!(model.logits(&x).unwrap(), before, "{cfg:?}");
    }
}

#[test]
fn param_counts() {
    let conv = crate::nn::Conv2d::new([3, 1], [1, 1], 3, 3, &mut ChaCha8Rng::seed_from_u64(0));
    assert_eq!(conv.param_count(), 30);

    let hc = 16;
    let count = |v| {
        let cfg = ModelConfig {
            head_channels: hc,
            ..config(Architecture::TwoStream, v, 100)
        };
        Model::new(&cfg, 0).unwrap().param_count()
    };
    let full = count(HeadVariant::Full);
    let sin = count(HeadVariant::SinCnn);
    let no_cnn = count(HeadVariant::NoCnn);
    let no_maxp = count(HeadVariant::NoMaxP);
    assert_eq!(full - sin, 3 * hc * hc + hc);
    assert!(no_cnn.max(sin) < full.min(no_maxp));
}

#[test]
fn fcnet_zero_weights_emit_bias() {
    let cfg = ModelConfig {
        fcnet_hidden: vec![5],
        ..config(Architecture::FcNet, HeadVariant::Full, 4)
    };
    let mut model = Model::new(&cfg, 14).unwrap();
    let bias = [0.5, -1.0, 2.0, 0.25];
    {
        let mut params = model.params_mut();
        let n = params.len();
        for p in params.iter_mut() {
            p.value.iter_mut().for_each(|v| *v = 0.0);
        }
        params[n - 1].value.copy_from_slice(&bias);
    }
    let y = model.logits(&random_input(2, 4, NUM_JOINTS, 15)).unwrap();
    assert_eq!(y.item(0), &bias);
    assert_eq!(y.item(1), &bias);
}

#[test]
fn fcnet_gradient_check_and_determinism() {
    let cfg = ModelConfig {
        joints: 4,
        fcnet_hidden: vec![6, 5],
        ..config(Architecture::FcNet, HeadVariant::Full, 5)
    };
    let mut model = Model::new(&cfg, 16).unwrap();
    let x = random_input(3, 5, 4, 17);
    let report = grad_check(&mut ModelProbe::new(&mut model, x.clone(), vec![1, 0, 3]), FD_STEP);
    assert!(report.max_rel_error < 1e-5, "{report:?}");
    let again = Model::new(&cfg, 16).unwrap();
    let fresh = Model::new(&cfg, 16).unwrap();
    assert_eq!(again.logits(&x).unwrap(), fresh.logits(&x).unwrap());
}

#[test]
fn two_stream_gradient_check_at_toy_size() {
    for attention in [false, true] {
        let cfg = ModelConfig {
            joints: 4,
            attention,
            ..config(Architecture::TwoStream, HeadVariant::Full, 10)
        };
        let mut model = Model::new(&cfg, 18).unwrap();
        let x = random_input(3, 10, 4, 19);
        let report = grad_check(&mut ModelProbe::new(&mut model, x, vec![0, 1, 2]), FD_STEP);
        assert!(report.max_rel_error < 1e-5, "attention={attention}: {report:?}");
    }
}

#[test]
fn disabled_attention_is_the_gate_free_network() {
    let plain_cfg = config(Architecture::TwoStream, HeadVariant::Full, 10);
    let gated_cfg = ModelConfig {
        attention: true,
        ..plain_cfg.clone()
    };
    let plain = Model::new(&plain_cfg, 20).unwrap();
    let gated = Model::new(&gated_cfg, 20).unwrap();
    let x = random_input(2, 10, NUM_JOINTS, 21);

    // explicit composition of the gate-free layers
    let manual = plain
        .head(&fuse(
            &plain.forward_jp_stream(&x.jp).unwrap(),
            &plain.forward_rjdp_stream(&x.rjdp).unwrap(),
        )
        .unwrap())
        .unwrap();
    assert_eq!(plain.logits(&x).unwrap(), manual);
    assert_eq!(plain.gate_activations(&x).unwrap(), (None, None));

    // the gated model shares every non-gate weight, in order
    let non_gate: Vec<&Vec<f64>> = gated
        .params()
        .into_iter()
        .map(|p| &p.value)
        .filter(|v| !gate_param(v.len()))
        .collect();
    let plain_values: Vec<&Vec<f64>> = plain.params().into_iter().map(|p| &p.value).collect();
    assert_eq!(non_gate, plain_values);
    assert!(gated.param_count() > plain.param_count());
}

// squeeze/excite shapes of the 20-wide and 380-wide gates
fn gate_param(len: usize) -> bool {
    [5 * 20, 5, 20 * 5, 20, 95 * 380, 95, 380 * 95, 380].contains(&len)
}


#[test]
fn gate_activations_and_report() {
    let cfg = ModelConfig {
        attention: true,
        ..config(Architecture::TwoStream, HeadVariant::Full, 8)
    };
    let model = Model::new(&cfg, 22).unwrap();
    let x = random_input(3, 8, NUM_JOINTS, 23);
    let (jp, pairs) = model.gate_activations(&x).unwrap();
    let (jp, pairs) = (jp.unwrap(), pairs.unwrap());
    assert_eq!(jp.len(), 3 * 20);
    assert_eq!(pairs.len(), 3 * NUM_PAIRS);
    assert!(jp.iter().chain(&pairs).all(|&g| (0.0..=1.0).contains(&g)));

    let mut acc = AttentionAccumulator::default();
    acc.add(&model, &x).unwrap();
    let report = acc.finish(DEFAULT_TOP_K).unwrap();
    assert_eq!(report.samples, 3);
    assert_eq!(report.top_pairs.len(), 50);
    assert!(report.top_pairs.windows(2).all(|w| w[0].importance >= w[1].importance));
    assert_eq!(acc.finish(1000).unwrap().top_pairs.len(), NUM_PAIRS);

    let plain = Model::new(&ModelConfig { attention: false, ..cfg }, 22).unwrap();
    assert!(AttentionAccumulator::default().add(&plain, &x).is_err());
}

#[test]
fn aggregate_counts_incident_pairs() {
    let r = attention::report_from_means(vec![0.5; 20], vec![1.0; NUM_PAIRS], 50, 1);
    assert!(r.per_joint_aggregate.iter().all(|&v| v == 38.0));
    assert!(r.per_joint_mean.iter().all(|&v| v == 1.0));
}

#[test]
fn checkpoint_round_trip() {
    let cfg = ModelConfig {
        attention: true,
        ..config(Architecture::TwoStream, HeadVariant::SinCnn, 8)
    };
    let mut model = Model::new(&cfg, 24).unwrap();
    let x = random_input(2, 8, NUM_JOINTS, 25);
    let trace = model.forward_trace(&x).unwrap();
    let loss = batch_cross_entropy(trace.logits(), &[1, 3]).unwrap();
    model.backward(&trace, loss.grad).unwrap();
    let mut adam = Adam::default();
    adam.step(&mut model.params_mut()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(26);
    let _: u64 = rng.random();

    let bytes = checkpoint::encode(&model, &adam, &rng).unwrap();
    assert_eq!(&bytes[..8], b"GAITNET1");
    let back = checkpoint::decode(&bytes).unwrap();
    assert_eq!(back.model.logits(&x).unwrap(), model.logits(&x).unwrap());
    assert_eq!(back.adam, adam);
    assert_eq!(back.rng, rng);
    assert_eq!(checkpoint::encode(&back.model, &back.adam, &back.rng).unwrap(), bytes);

    assert!(checkpoint::decode(&bytes[..bytes.len() - 1]).is_err());
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(checkpoint::decode(&bad).is_err());
}

#[test]
fn rejects_heads_that_do_not_fit() {
    // two temporal convs after the stream need at least 7 frames
    assert!(Model::new(&config(Architecture::TwoStream, HeadVariant::Full, 6), 0).is_err());
    assert!(Model::new(&config(Architecture::TwoStream, HeadVariant::Full, 7), 0).is_ok());
    let layer_kinds = Model::new(&config(Architecture::JpStream, HeadVariant::Full, 7), 0)
        .unwrap()
        .describe()
        .unwrap()
        .layers
        .len();
    assert_eq!(layer_kinds, 2 + 6);
}
