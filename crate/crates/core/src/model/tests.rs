use alloc::vec;

use super::*;
use crate::nn::Pass;
use crate::tensor::Tensor;

fn four_layer() -> ModelSpec {
    ModelSpec::new(
        vec![
            LayerSpec::Dense { inputs: 3, outputs: 8 },
            LayerSpec::Relu,
            LayerSpec::Dense { inputs: 8, outputs: 2 },
            LayerSpec::SoftmaxXentHead { classes: 2 },
        ],
        vec![3],
    )
    .unwrap()
}

#[test]
fn split_at_one_keeps_first_layer() {
    let (d, s) = split_model::<f32>(&four_layer(), 1, 0).unwrap();
    assert_eq!(d.range(), (0, 1));
    assert_eq!(s.range(), (1, 4));
    assert_eq!(d.specs(), vec![LayerSpec::Dense { inputs: 3, outputs: 8 }]);
}

#[test]
fn split_rejects_boundaries() {
    let spec = four_layer();
    assert!(split_model::<f32>(&spec, 0, 0).is_err());
    assert!(split_model::<f32>(&spec, spec.len(), 0).is_err());
}

#[test]
fn split_composition_is_bitwise_exact() {
    for spec in [ModelSpec::toy_cnn(1, 6, 3), ModelSpec::toy_mlp(2, 16, 4)] {
        let full: Block<f32> = spec.init(42);
        let mut shape = vec![5];
        shape.extend_from_slice(&spec.input_shape);
        let x = Tensor::from_fn(shape, |i| ((i * 31 % 17) as f32 - 8.0) / 5.0);
        let expected = full.infer(&x).unwrap();
        for p in 1..spec.len() {
            let (d, s) = split_model::<f32>(&spec, p, 42).unwrap();
            assert_eq!(s.infer(&d.infer(&x).unwrap()).unwrap(), expected, "p={p}");
            assert_eq!(d.param_bytes() + s.param_bytes(), full.param_bytes());
            assert!(d.clone().join(s).unwrap().same_params(&full));
        }
    }
}

#[test]
fn model_must_end_in_head() {
    assert!(ModelSpec::new(vec![LayerSpec::Dense { inputs: 2, outputs: 2 }], vec![2]).is_err());
    let bad_chain = ModelSpec::new(
        vec![LayerSpec::Dense { inputs: 2, outputs: 3 }, LayerSpec::SoftmaxXentHead { classes: 2 }],
        vec![2],
    );
    assert!(bad_chain.is_err());
}

#[test]
fn dense_aux_halves_units() {
    let server: Block<f32> = Block::init(
        1,
        vec![10],
        &[
            LayerSpec::Dense { inputs: 10, outputs: 64 },
            LayerSpec::Relu,
            LayerSpec::Dense { inputs: 64, outputs: 5 },
            LayerSpec::SoftmaxXentHead { classes: 5 },
        ],
        0,
    )
    .unwrap();
    let aux = generate_auxiliary(&server, 0.5, 5, 1).unwrap();
    assert_eq!(aux.replica, LayerSpec::Dense { inputs: 10, outputs: 32 });
    assert_eq!(aux.classifier, LayerSpec::Dense { inputs: 32, outputs: 5 });
    let full = generate_auxiliary(&server, 1.0, 5, 1).unwrap();
    assert_eq!(full.replica, LayerSpec::Dense { inputs: 10, outputs: 64 });
}

#[test]
fn conv_aux_halves_channels_and_runs() {
    let server: Block<f32> = Block::init(
        1,
        vec![4, 5, 5],
        &[
            LayerSpec::Relu,
            LayerSpec::Conv2d { in_channels: 4, out_channels: 16, kernel: 3, stride: 1, padding: 1 },
            LayerSpec::Relu,
            LayerSpec::Flatten,
            LayerSpec::Dense { inputs: 400, outputs: 3 },
            LayerSpec::SoftmaxXentHead { classes: 3 },
        ],
        0,
    )
    .unwrap();
    let aux = generate_auxiliary(&server, 0.5, 3, 1).unwrap();
    assert_eq!(aux.replica, LayerSpec::Conv2d { in_channels: 4, out_channels: 8, kernel: 3, stride: 1, padding: 1 });
    assert_eq!(
        aux.block.specs(),
        vec![
            LayerSpec::Relu,
            aux.replica,
            LayerSpec::Relu,
            LayerSpec::Flatten,
            LayerSpec::Dense { inputs: 200, outputs: 3 },
            LayerSpec::SoftmaxXentHead { classes: 3 },
        ]
    );
    let y = aux.block.infer(&Tensor::zeros(vec![2, 4, 5, 5])).unwrap();
    assert_eq!(y.shape(), &[2, 3]);
}

#[test]
fn aux_rejects_bad_inputs() {
    let head_only: Block<f32> = Block::init(3, vec![2], &[LayerSpec::SoftmaxXentHead { classes: 2 }], 0).unwrap();
    assert!(generate_auxiliary(&head_only, 0.5, 2, 0).is_err());
    let (_, s) = split_model::<f32>(&four_layer(), 1, 0).unwrap();
    assert!(generate_auxiliary(&s, 0.0, 2, 0).is_err());
    assert!(generate_auxiliary(&s, 1.5, 2, 0).is_err());
}

#[test]
fn rounding_is_half_up_with_floor_of_one() {
    assert_eq!(scaled_dimension(5, 0.5), 3);
    assert_eq!(scaled_dimension(4, 0.5), 2);
    assert_eq!(scaled_dimension(1, 0.25), 1);
    assert_eq!(scaled_dimension(7, 1.0), 7);
}

#[test]
fn aux_smaller_than_server_on_toy_models() {
    for spec in [ModelSpec::toy_cnn(1, 8, 4), ModelSpec::toy_mlp(2, 32, 4)] {
        let (_, s) = split_model::<f32>(&spec, 1, 0).unwrap();
        let aux = generate_auxiliary(&s, DEFAULT_AUX_RATIO, spec.classes, 0).unwrap();
        assert!(aux.block.param_count() < s.param_count());
    }
}

#[test]
fn param_and_activation_sizes() {
    let b: Block<f32> = Block::init(0, vec![10], &[LayerSpec::Dense { inputs: 10, outputs: 10 }], 0).unwrap();
    assert_eq!(param_bytes(&b), 440);
    let spec = four_layer();
    // relu passes the preceding layer's size through
    assert_eq!(activation_elems(&spec, 2).unwrap(), activation_elems(&spec, 1).unwrap());
    assert_eq!(activation_bytes(&spec, 1, 10, false).unwrap(), 4 * 8 * 10);
    assert_eq!(activation_bytes(&spec, 1, 10, true).unwrap(), (4 * 8 + 8) * 10);
}

#[test]
fn flops_split_adds_up() {
    let spec = ModelSpec::toy_cnn(1, 8, 4);
    let full: Block<f32> = spec.init(0);
    let (d, s) = split_model::<f32>(&spec, 3, 0).unwrap();
    assert_eq!(
        d.flops(4, Pass::ForwardBackward) + s.flops(4, Pass::ForwardBackward),
        full.flops(4, Pass::ForwardBackward)
    );
}
