use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::encoding::grouping_from;
use crate::kinematics::{presets, sample_robot_pointcloud, sample_scene_pointcloud, Aabb, Obstacle, Scene, Sphere};
use crate::tensor::gradcheck::{check_gradients, random_tensor, relative_error};

fn tiny_hyper() -> Hyper {
    Hyper {
        dof: 2,
        hidden: 8,
        heads: 2,
        enc_layers: 2,
        dec_layers: 1,
        dropout_p: 0.1,
        schedule: MaskSchedule::Interleaved,
        k_robot: 3,
        k_work: 3,
        n_robot_points: 24,
        n_work_points: 24,
        robot_radius: 0.2,
        work_radius: 0.3,
        max_group: 4,
    }
}

fn scene() -> Scene {
    Scene::new(
        vec![
            Obstacle::Sphere(Sphere {
                center: [0.6, 0.4, 0.0],
                radius: 0.15,
            }),
            Obstacle::Box(Aabb {
                min: [-0.7, -0.6, -0.1],
                max: [-0.4, -0.3, 0.1],
            }),
        ],
        presets::planar_bounds(),
    )
    .unwrap()
}

struct Inputs {
    model: GaideModel,
    input: SamplerInput,
}

fn setup(hyper: Hyper, seed: u64) -> Inputs {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = GaideModel::new(hyper.clone(), &mut rng).unwrap();
    let chain = presets::planar_2dof();
    let q_t = Config::new(vec![0.3, -0.5]);
    let robot_cloud = sample_robot_pointcloud(&chain, &q_t, hyper.n_robot_points, &mut rng).unwrap();
    let scene_cloud = sample_scene_pointcloud(&scene(), hyper.n_work_points, &mut rng);
    Inputs {
        model,
        input: SamplerInput {
            q_t,
            q_goal: Config::new(vec![-1.0, 0.8]),
            robot_cloud,
            scene_cloud,
        },
    }
}

fn random_legal_graph(n_robot: usize, n_work: usize, rng: &mut impl Rng) -> StructureGraph {
    let tags: Vec<usize> = (0..n_robot).map(|_| rng.gen_range(0..4)).collect();
    StructureGraph::build(&tags, n_work).unwrap()
}

#[test]
fn schedules() {
    let il: Vec<bool> = (0..4).map(|i| MaskSchedule::Interleaved.is_masked(i)).collect();
    assert_eq!(il, [true, false, true, false]);
    assert!((0..4).all(|i| MaskSchedule::AllMask.is_masked(i)));
    assert!((0..4).all(|i| !MaskSchedule::NoneMask.is_masked(i)));
}

#[test]
fn hyper_validation() {
    let mut h = tiny_hyper();
    h.heads = 3;
    assert!(matches!(h.validate(), Err(ModelError::Hyper(_))));
    let mut h = tiny_hyper();
    h.enc_layers = 1;
    assert!(h.validate().is_err());
    h.schedule = MaskSchedule::AllMask;
    assert!(h.validate().is_ok());
    assert!(Hyper::new(6).validate().is_ok());
}

fn attention_fixture(seed: u64, l: usize) -> (ParamStore, AttentionWeights, Tensor) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    let w = AttentionWeights::new(&mut store, "a", 8, &mut rng);
    (store, w, random_tensor(&[l, 8], &mut rng))
}

#[test]
fn absent_bias_equals_zero_bias_bitwise() {
    let (store, w, x) = attention_fixture(1, 5);
    let tape = Tape::new();
    let b = Binder::new(&store, &tape);
    let xv = tape.constant(&x);
    let none = masked_multihead_attention(&b, &w, 2, &xv, &xv, None).unwrap();
    let zero = AttentionBias::zeros(5);
    let zeroed = masked_multihead_attention(&b, &w, 2, &xv, &xv, Some(&zero)).unwrap();
    assert_eq!(none.output.data(), zeroed.output.data());
}

#[test]
fn identity_mask_attends_to_self() {
    let (store, w, x) = attention_fixture(2, 4);
    let l = 4;
    let g = StructureGraph::from_adjacency(2, 2, (0..l * l).map(|k| k / l == k % l).collect()).unwrap();
    let bias = adjacency_to_bias(&g).unwrap();
    let tape = Tape::new();
    let b = Binder::new(&store, &tape);
    let xv = tape.constant(&x);
    let att = masked_multihead_attention(&b, &w, 2, &xv, &xv, Some(&bias)).unwrap();
    for a in &att.weights {
        let d = a.data();
        for i in 0..l {
            for j in 0..l {
                assert_eq!(d[i * l + j], if i == j { 1.0 } else { 0.0 });
            }
        }
    }
    // Output is the output projection of each token's own value row.
    let expected = w.o.forward(&b, &w.v.forward(&b, &xv).unwrap()).unwrap().data();
    for (a, e) in att.output.data().iter().zip(expected) {
        assert!((a - e).abs() < 1e-12);
    }
}

#[test]
fn masked_weights_exactly_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for trial in 0..20 {
        let (nr, nw) = (rng.gen_range(1..6), rng.gen_range(1..6));
        let g = random_legal_graph(nr, nw, &mut rng);
        let (store, w, x) = attention_fixture(100 + trial, nr + nw);
        let bias = adjacency_to_bias(&g).unwrap();
        let tape = Tape::new();
        let b = Binder::new(&store, &tape);
        let xv = tape.constant(&x);
        let att = masked_multihead_attention(&b, &w, 2, &xv, &xv, Some(&bias)).unwrap();
        let l = g.len();
        for a in &att.weights {
            let d = a.data();
            for i in 0..l {
                let mut sum = 0.0;
                for j in 0..l {
                    if !g.edge(i, j) {
                        assert_eq!(d[i * l + j], 0.0);
                    }
                    sum += d[i * l + j];
                }
                assert!((sum - 1.0).abs() < 1e-12);
            }
        }
    }
}

fn encode_with(model: &GaideModel, graph: &StructureGraph, seed: u64) -> (Vec<f64>, Vec<Vec<f64>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = model.hyper().hidden;
    let zr = random_tensor(&[graph.n_robot(), h], &mut rng);
    let zw = random_tensor(&[graph.n_work(), h], &mut rng);
    let tape = Tape::new();
    let b = Binder::new(model.params(), &tape);
    let enc = model
        .encode(&b, &tape.constant(&zr), &tape.constant(&zw), graph, DropoutMode::Eval, &mut rng)
        .unwrap();
    (
        enc.memory.data(),
        enc.layer_outputs.iter().map(Var::data).collect(),
    )
}

#[test]
fn unmasked_schedule_matches_interleaved_on_complete_graph() {
    let Inputs { model, .. } = setup(tiny_hyper(), 4);
    let v = model.with_schedule(MaskSchedule::NoneMask).unwrap();
    let g = StructureGraph::complete(3, 3);
    assert_eq!(encode_with(&model, &g, 9), encode_with(&v, &g, 9));
}

#[test]
fn schedules_share_layer_zero_and_diverge() {
    let Inputs { model, .. } = setup(tiny_hyper(), 5);
    let hm = model.with_schedule(MaskSchedule::AllMask).unwrap();
    let vm = model.with_schedule(MaskSchedule::NoneMask).unwrap();
    let g = random_legal_graph(3, 3, &mut ChaCha8Rng::seed_from_u64(6));
    let (mi, li) = encode_with(&model, &g, 11);
    let (mh, lh) = encode_with(&hm, &g, 11);
    let (mv, _) = encode_with(&vm, &g, 11);
    assert_eq!(li[0], lh[0]);
    assert_ne!(mi, mh);
    assert_ne!(mi, mv);
    assert_ne!(mh, mv);
}

#[test]
fn encode_shape_and_determinism() {
    let Inputs { model, .. } = setup(tiny_hyper(), 7);
    let g = random_legal_graph(3, 3, &mut ChaCha8Rng::seed_from_u64(8));
    let (a, _) = encode_with(&model, &g, 1);
    let (b, _) = encode_with(&model, &g, 1);
    assert_eq!(a.len(), 6 * 8);
    assert_eq!(a, b);
    // Graph/token mismatch is a shape error.
    let tape = Tape::new();
    let bd = Binder::new(model.params(), &tape);
    let z = tape.constant(&Tensor::zeros(vec![2, 8]));
    let err = model.encode(&bd, &z, &z, &g, DropoutMode::Eval, &mut ChaCha8Rng::seed_from_u64(0));
    assert!(matches!(err, Err(ModelError::Tensor(TensorError::Dimension { .. }))));
}

#[test]
fn decode_output_and_linear_head() {
    let mut h = tiny_hyper();
    h.dof = 6;
    let mut model = GaideModel::new(h, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let memory = random_tensor(&[6, 8], &mut ChaCha8Rng::seed_from_u64(2));
    let run = |m: &GaideModel| {
        let tape = Tape::new();
        let b = Binder::new(m.params(), &tape);
        m.decode(&b, &tape.constant(&memory), DropoutMode::Eval, &mut ChaCha8Rng::seed_from_u64(0))
            .unwrap()
            .data()
    };
    assert_eq!(run(&model).len(), 6);
    let head = model.head();
    model.params_mut().get_mut(head.weight).data_mut().fill(0.0);
    let bias = model.params().get(head.bias).data().to_vec();
    assert_eq!(run(&model), bias);
}

#[test]
fn start_token_gradient_matches_finite_differences() {
    let Inputs { model, .. } = setup(tiny_hyper(), 12);
    let memory = random_tensor(&[6, 8], &mut ChaCha8Rng::seed_from_u64(13));
    let sq = |m: &GaideModel, tape: &Tape| -> f64 {
        let b = Binder::new(m.params(), tape);
        let d = m
            .decode(&b, &tape.constant(&memory), DropoutMode::Eval, &mut ChaCha8Rng::seed_from_u64(0))
            .unwrap();
        d.data().iter().map(|v| v * v).sum()
    };
    let tape = Tape::new();
    let b = Binder::new(model.params(), &tape);
    let d = model
        .decode(&b, &tape.constant(&memory), DropoutMode::Eval, &mut ChaCha8Rng::seed_from_u64(0))
        .unwrap();
    let loss = d.square().sum();
    let grads = tape.backward(loss).unwrap();
    let analytic = b.gradients(&grads)[model.start_token().0].clone();
    let eps = 1e-6;
    for j in 0..8 {
        let mut m = model.clone();
        m.params_mut().get_mut(model.start_token()).data_mut()[j] += eps;
        let up = sq(&m, &Tape::new());
        m.params_mut().get_mut(model.start_token()).data_mut()[j] -= 2.0 * eps;
        let down = sq(&m, &Tape::new());
        let numeric = (up - down) / (2.0 * eps);
        assert!(relative_error(analytic[j], numeric) < 1e-5, "{j}: {} vs {numeric}", analytic[j]);
    }
}

#[test]
fn sampling_modes() {
    let Inputs { model, input } = setup(tiny_hyper(), 14);
    let det = |seed| model.sample_delta(&input, SampleMode::Deterministic, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
    assert_eq!(det(1), det(2));
    assert_eq!(det(1).len(), 2);

    let mut max_diff: f64 = 0.0;
    for t in 0..10 {
        let a = model.sample_delta(&input, SampleMode::Stochastic, &mut ChaCha8Rng::seed_from_u64(2 * t)).unwrap();
        let b = model.sample_delta(&input, SampleMode::Stochastic, &mut ChaCha8Rng::seed_from_u64(2 * t + 1)).unwrap();
        max_diff = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(max_diff, f64::max);
    }
    assert!(max_diff > 0.0);

    let mut h0 = tiny_hyper();
    h0.dropout_p = 0.0;
    let Inputs { model: m0, input: in0 } = setup(h0, 14);
    let s = m0.sample_delta(&in0, SampleMode::Stochastic, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    let d = m0.sample_delta(&in0, SampleMode::Deterministic, &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
    assert_eq!(s, d);
}

#[test]
fn empty_scene_cloud_rejected_and_small_cloud_padded() {
    let Inputs { model, mut input } = setup(tiny_hyper(), 15);
    input.scene_cloud.points.truncate(2);
    assert!(model.sample_delta(&input, SampleMode::Deterministic, &mut ChaCha8Rng::seed_from_u64(0)).is_ok());
    input.scene_cloud.points.clear();
    assert!(matches!(
        model.sample_delta(&input, SampleMode::Deterministic, &mut ChaCha8Rng::seed_from_u64(0)),
        Err(ModelError::Input(_))
    ));
}

#[test]
fn within_group_permutation_leaves_output_unchanged() {
    let Inputs { model, input } = setup(tiny_hyper(), 16);
    let scene_g = model.scene_grouping(&input.scene_cloud).unwrap();
    // Reverse the member order of every group; centroids stay put.
    let members = crate::encoding::ball_group(&input.scene_cloud, &scene_g.centroid_indices, 0.3, 4).unwrap();
    let reversed: Vec<Vec<usize>> = members.iter().map(|m| m.iter().rev().copied().collect()).collect();
    let permuted = grouping_from(&input.scene_cloud, scene_g.centroid_indices.clone(), reversed);
    assert_ne!(permuted.relative, scene_g.relative);
    let robot = model.robot_grouping(&input.robot_cloud).unwrap();
    let run = |g: &Grouping| {
        let tape = Tape::new();
        let b = Binder::new(model.params(), &tape);
        model
            .forward(&b, &input.q_t, &input.q_goal, &robot, g, DropoutMode::Eval, &mut ChaCha8Rng::seed_from_u64(0))
            .unwrap()
            .delta
            .data()
    };
    assert_eq!(run(&scene_g), run(&permuted));
}

#[test]
fn full_model_gradients_match_finite_differences() {
    let mut h = tiny_hyper();
    h.dropout_p = 0.0;
    let Inputs { model, input } = setup(h, 17);
    let robot = model.robot_grouping(&input.robot_cloud).unwrap();
    let scene = model.scene_grouping(&input.scene_cloud).unwrap();
    let report = check_gradients(model.params().tensors(), 1e-6, |tape, vars| {
        let b = Binder::from_vars(model.params(), tape, vars);
        let f = model
            .forward(&b, &input.q_t, &input.q_goal, &robot, &scene, DropoutMode::Eval, &mut ChaCha8Rng::seed_from_u64(0))
            .map_err(|e| TensorError::Parameter(e.to_string()))?;
        Ok(f.delta.square().sum())
    })
    .unwrap();
    assert_eq!(report.checked, model.num_parameters());
    assert!(report.max_rel_error < 1e-4, "{report:?}");
}

#[test]
fn checkpoint_roundtrip_and_validation() {
    let Inputs { model, input } = setup(tiny_hyper(), 18);
    let ck = Checkpoint::from_model(&model, 42);
    let bytes = ck.to_bytes();
    let back = Checkpoint::from_bytes(&bytes).unwrap();
    assert_eq!(back, ck);
    assert_eq!(back.step, 42);
    let restored = back.to_model().unwrap();
    assert_eq!(restored, model);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert_eq!(
        restored.sample_delta(&input, SampleMode::Deterministic, &mut rng).unwrap(),
        model.sample_delta(&input, SampleMode::Deterministic, &mut rng).unwrap()
    );

    assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 1]).is_err());
    let mut bad_magic = bytes.clone();
    bad_magic[0] = b'X';
    assert!(Checkpoint::from_bytes(&bad_magic).is_err());

    let mut wrong_shape = ck.clone();
    wrong_shape.tensors[0].1 = Tensor::zeros(vec![1, 1]);
    assert!(matches!(wrong_shape.to_model(), Err(ModelError::Checkpoint(_))));
    let mut missing = ck;
    missing.tensors.pop();
    assert!(missing.to_model().is_err());
}
