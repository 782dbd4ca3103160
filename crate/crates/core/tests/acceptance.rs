//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Runs as a plain binary (`harness = false`) so the criteria can share the
//! trained models. Pass criterion numbers as arguments to run a subset:
//! `cargo test -p gaide --test acceptance -- 2 5`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use gaide::bench::{self, generate_suite, run_suite, write_report, BenchmarkSuite, PlannerId};
use gaide::encoding::{farthest_point_sample, grouping_from, SetAbstractionLayer};
use gaide::graph::{adjacency_to_bias, StructureGraph};
use gaide::kinematics::{
    presets, sample_robot_pointcloud, sample_scene_pointcloud, Aabb, CollisionChecker, Config, KinematicChain,
    Obstacle, PlanningProblem, PointCloud, Scene, Sphere,
};
use gaide::model::{masked_multihead_attention, AttentionWeights, GaideModel, Hyper, MaskSchedule, SampleMode};
use gaide::nn::{Binder, ParamStore};
use gaide::planners::{
    birrt_plan, informed_rrt_star_plan, informed_sample, neural_plan, rrt_star_plan, validate_path, Budget,
    NeuralSampler, NeuralSettings, PlanResult, PlannerSettings, RandomDeltaSampler, ReplanSettings,
};
use gaide::tensor::gradcheck::{check_gradients, random_tensor};
use gaide::tensor::{DropoutMode, Tape, Tensor, TensorError, Var};
use gaide::training::{self, Dataset, GenerationSettings, PreparedData, SceneFamily, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

type Outcome = Result<String, String>;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn tiny_hyper(schedule: MaskSchedule) -> Hyper {
    Hyper {
        dof: 2,
        hidden: 8,
        heads: 2,
        enc_layers: 2,
        dec_layers: 1,
        dropout_p: 0.0,
        schedule,
        k_robot: 3,
        k_work: 3,
        n_robot_points: 24,
        n_work_points: 24,
        robot_radius: 0.2,
        work_radius: 0.3,
        max_group: 4,
    }
}

fn fixture_scene() -> Scene {
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

// ---------------------------------------------------------------- 1

type Loss = for<'t> fn(&'t Tape, &[Var<'t>]) -> gaide::tensor::Result<Var<'t>>;

fn weighted(v: Var<'_>, seed: u64) -> gaide::tensor::Result<Var<'_>> {
    // A random linear functional makes every output element matter.
    let w = random_tensor(&v.shape(), &mut rng(seed));
    v.mul(&v.tape().constant(&w)).map(|x| x.sum())
}

fn criterion_1() -> Outcome {
    let started = Instant::now();
    let mut r = rng(1);
    let mut worst: f64 = 0.0;
    let mut check = |name: &str, shapes: &[&[usize]], f: Loss| -> Result<(), String> {
        let inputs: Vec<Tensor> = shapes.iter().map(|s| random_tensor(s, &mut r)).collect();
        let rep = check_gradients(&inputs, 1e-6, f).map_err(|e| format!("{name}: {e}"))?;
        worst = worst.max(rep.max_rel_error);
        ensure(rep.max_rel_error < 1e-4, || format!("{name}: relative error {:.3e}", rep.max_rel_error))
    };
    check("matmul", &[&[3, 4], &[4, 2]], |_, v| weighted(v[0].matmul(&v[1])?, 10))?;
    check("add", &[&[2, 3], &[2, 3]], |_, v| weighted(v[0].add(&v[1])?, 11))?;
    check("sub", &[&[2, 3], &[2, 3]], |_, v| weighted(v[0].sub(&v[1])?, 12))?;
    check("mul", &[&[2, 3], &[2, 3]], |_, v| weighted(v[0].mul(&v[1])?, 13))?;
    check("add_row", &[&[3, 4], &[4]], |_, v| weighted(v[0].add_row(&v[1])?, 14))?;
    check("add_const", &[&[2, 2]], |_, v| weighted(v[0].add_const(&[0.5, -1.0, 2.0, 0.0])?, 15))?;
    check("scale", &[&[5]], |_, v| weighted(v[0].scale(-1.7), 16))?;
    check("silu", &[&[2, 5]], |_, v| weighted(v[0].silu(), 17))?;
    check("square", &[&[2, 5]], |_, v| weighted(v[0].square(), 18))?;
    check("sum", &[&[3, 3]], |_, v| Ok(v[0].sum().square()))?;
    check("mean", &[&[3, 3]], |_, v| Ok(v[0].mean().square()))?;
    check("transpose", &[&[2, 3]], |_, v| weighted(v[0].transpose()?, 19))?;
    check("reshape", &[&[2, 3]], |_, v| weighted(v[0].reshape(vec![3, 2])?, 20))?;
    check("slice_cols", &[&[3, 5]], |_, v| weighted(v[0].slice_cols(1, 3)?, 21))?;
    check("concat_cols", &[&[2, 2], &[2, 3]], |_, v| weighted(Var::concat_cols(&[v[0], v[1]])?, 22))?;
    check("concat_rows", &[&[1, 3], &[2, 3]], |_, v| weighted(Var::concat_rows(&[v[0], v[1]])?, 23))?;
    check("softmax_lastdim", &[&[3, 4]], |_, v| weighted(v[0].softmax_lastdim()?, 24))?;
    check("masked softmax", &[&[2, 3]], |_, v| {
        let inf = f64::NEG_INFINITY;
        weighted(v[0].add_const(&[0.0, inf, 0.0, inf, 0.0, 0.0])?.softmax_lastdim()?, 25)
    })?;
    check("layer_norm", &[&[2, 8], &[8], &[8]], |_, v| weighted(v[0].layer_norm(&v[1], &v[2], 1e-5)?, 26))?;
    check("dropout", &[&[4, 4]], |_, v| weighted(v[0].dropout(0.3, DropoutMode::Train, &mut rng(27))?, 28))?;
    check("group_max", &[&[6, 3]], |_, v| weighted(v[0].group_max(&[vec![0, 1, 2], vec![3], vec![4, 5]])?, 29))?;

    // Whole forward pass, every parameter.
    let model = GaideModel::new(tiny_hyper(MaskSchedule::Interleaved), &mut rng(30)).map_err(|e| e.to_string())?;
    let chain = presets::planar_2dof();
    let q_t = Config::new(vec![0.3, -0.5]);
    let robot_cloud = sample_robot_pointcloud(&chain, &q_t, 24, &mut rng(31)).map_err(|e| e.to_string())?;
    let robot = model.robot_grouping(&robot_cloud).map_err(|e| e.to_string())?;
    let scene = model
        .scene_grouping(&sample_scene_pointcloud(&fixture_scene(), 24, &mut rng(32)))
        .map_err(|e| e.to_string())?;
    let q_goal = Config::new(vec![-1.0, 0.8]);
    let rep = check_gradients(model.params().tensors(), 1e-6, |tape, vars| {
        let b = Binder::from_vars(model.params(), tape, vars);
        let f = model
            .forward(&b, &q_t, &q_goal, &robot, &scene, DropoutMode::Eval, &mut rng(0))
            .map_err(|e| TensorError::Parameter(e.to_string()))?;
        Ok(f.delta.square().sum())
    })
    .map_err(|e| e.to_string())?;
    ensure(rep.checked == model.num_parameters(), || "not every parameter was checked".into())?;
    ensure(rep.max_rel_error < 1e-4, || format!("full model: relative error {:.3e}", rep.max_rel_error))?;
    worst = worst.max(rep.max_rel_error);
    let secs = started.elapsed().as_secs_f64();
    ensure(secs < 60.0, || format!("took {secs:.1} s"))?;
    Ok(format!(
        "max relative error {worst:.2e} over 21 ops + {} model parameters, {secs:.1} s",
        rep.checked
    ))
}

// ---------------------------------------------------------------- 2

fn random_legal_graph(r: &mut impl Rng) -> StructureGraph {
    let (nr, nw) = (r.gen_range(1..8), r.gen_range(1..8));
    let tags: Vec<usize> = (0..nr).map(|_| r.gen_range(0..4)).collect();
    StructureGraph::build(&tags, nw).unwrap()
}

fn criterion_2() -> Outcome {
    let mut r = rng(2);
    let mut masked_entries = 0usize;
    for trial in 0..100 {
        let g = random_legal_graph(&mut r);
        let l = g.len();
        let mut store = ParamStore::new();
        let w = AttentionWeights::new(&mut store, "a", 8, &mut r);
        let x = random_tensor(&[l, 8], &mut r);
        let tape = Tape::new();
        let b = Binder::new(&store, &tape);
        let xv = tape.constant(&x);
        let bias = adjacency_to_bias(&g).map_err(|e| e.to_string())?;
        let att = masked_multihead_attention(&b, &w, 2, &xv, &xv, Some(&bias)).map_err(|e| e.to_string())?;
        for a in &att.weights {
            let d = a.data();
            for i in 0..l {
                let mut sum = 0.0;
                for j in 0..l {
                    if !g.edge(i, j) {
                        masked_entries += 1;
                        ensure(d[i * l + j] == 0.0, || format!("graph {trial}: weight ({i},{j}) = {:e}", d[i * l + j]))?;
                    }
                    sum += d[i * l + j];
                }
                ensure((sum - 1.0).abs() < 1e-12, || format!("graph {trial}: row {i} sums to {sum}"))?;
            }
        }
        // All-true adjacency is the unmasked attention, bit for bit.
        let full = adjacency_to_bias(&StructureGraph::complete(g.n_robot(), g.n_work())).map_err(|e| e.to_string())?;
        let with = masked_multihead_attention(&b, &w, 2, &xv, &xv, Some(&full)).map_err(|e| e.to_string())?;
        let without = masked_multihead_attention(&b, &w, 2, &xv, &xv, None).map_err(|e| e.to_string())?;
        ensure(with.output.data() == without.output.data(), || format!("graph {trial}: complete graph differs"))?;
        for (a, b) in with.weights.iter().zip(&without.weights) {
            ensure(a.data() == b.data(), || format!("graph {trial}: complete-graph weights differ"))?;
        }
    }
    Ok(format!("100 graphs, {masked_entries} masked weights all exactly 0"))
}

// ---------------------------------------------------------------- 3

fn encode(model: &GaideModel, g: &StructureGraph, seed: u64) -> Result<(Vec<f64>, Vec<f64>), String> {
    let h = model.hyper().hidden;
    let mut r = rng(seed);
    let zr = random_tensor(&[g.n_robot(), h], &mut r);
    let zw = random_tensor(&[g.n_work(), h], &mut r);
    let tape = Tape::new();
    let b = Binder::new(model.params(), &tape);
    let enc = model
        .encode(&b, &tape.constant(&zr), &tape.constant(&zw), g, DropoutMode::Eval, &mut r)
        .map_err(|e| e.to_string())?;
    Ok((enc.memory.data(), enc.layer_outputs[0].data()))
}

fn criterion_3() -> Outcome {
    let base = GaideModel::new(tiny_hyper(MaskSchedule::Interleaved), &mut rng(3)).map_err(|e| e.to_string())?;
    let v = base.with_schedule(MaskSchedule::NoneMask).map_err(|e| e.to_string())?;
    let h = base.with_schedule(MaskSchedule::AllMask).map_err(|e| e.to_string())?;
    let complete = StructureGraph::complete(3, 3);
    ensure(encode(&base, &complete, 4)? == encode(&v, &complete, 4)?, || {
        "GAIDE-V differs from GAIDE under all-true adjacency".into()
    })?;
    let g = StructureGraph::build(&[0, 1, 1], 3).map_err(|e| e.to_string())?;
    let (mi, li) = encode(&base, &g, 5)?;
    let (mh, lh) = encode(&h, &g, 5)?;
    let (mv, _) = encode(&v, &g, 5)?;
    ensure(li == lh, || "GAIDE-H and GAIDE disagree at layer 0".into())?;
    ensure(mi != mh && mi != mv && mh != mv, || "schedules do not produce three distinct outputs".into())?;
    Ok("V = GAIDE on complete graph; H = GAIDE at layer 0; three distinct encodings".into())
}

// ---------------------------------------------------------------- 4

fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn covering_radius(points: &[[f64; 3]], centers: &[usize]) -> f64 {
    points
        .iter()
        .map(|p| centers.iter().map(|&c| dist(p, &points[c])).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
}

fn criterion_4() -> Outcome {
    let mut r = rng(4);
    // Each pick is the brute-force maximin point.
    for trial in 0..200 {
        let n = r.gen_range(1..=100);
        let pts: Vec<[f64; 3]> = (0..n).map(|_| [r.gen(), r.gen(), r.gen()]).collect();
        let k = r.gen_range(1..=n);
        let start = r.gen_range(0..n);
        let idx = farthest_point_sample(&PointCloud::new(pts.clone()), k, start).map_err(|e| e.to_string())?;
        ensure(idx.len() == k && idx[0] == start, || format!("trial {trial}: wrong selection size or start"))?;
        for s in 1..k {
            let chosen = &idx[..s];
            let gap = |p: &[f64; 3]| chosen.iter().map(|&c| dist(p, &pts[c])).fold(f64::INFINITY, f64::min);
            let best = pts.iter().map(gap).fold(f64::NEG_INFINITY, f64::max);
            ensure(gap(&pts[idx[s]]) == best, || format!("trial {trial}: pick {s} is not the maximin point"))?;
        }
    }
    // Greedy covering radius is within twice the exhaustive optimum.
    for trial in 0..30 {
        let pts: Vec<[f64; 3]> = (0..10).map(|_| [r.gen(), r.gen(), 0.0]).collect();
        let idx = farthest_point_sample(&PointCloud::new(pts.clone()), 3, 0).map_err(|e| e.to_string())?;
        let mut opt = f64::INFINITY;
        for a in 0..10 {
            for b in a + 1..10 {
                for c in b + 1..10 {
                    opt = opt.min(covering_radius(&pts, &[a, b, c]));
                }
            }
        }
        ensure(covering_radius(&pts, &idx) <= 2.0 * opt + 1e-12, || format!("trial {trial}: covering radius"))?;
    }

    let mut store = ParamStore::new();
    let layer = SetAbstractionLayer::new(&mut store, "sa", 16, 0.3, 8, 16, &mut r).map_err(|e| e.to_string())?;
    let cloud = sample_scene_pointcloud(&fixture_scene(), 200, &mut r);
    let shift = [3.7, -12.25, 0.8];
    let moved = PointCloud::new(cloud.points.iter().map(|p| [p[0] + shift[0], p[1] + shift[1], p[2] + shift[2]]).collect());
    let tape = Tape::new();
    let b = Binder::new(&store, &tape);
    let (_, fa) = layer.forward(&b, &cloud).map_err(|e| e.to_string())?;
    let (_, fb) = layer.forward(&b, &moved).map_err(|e| e.to_string())?;
    let drift = fa.data().iter().zip(fb.data()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    ensure(drift < 1e-9, || format!("translation drift {drift:e}"))?;

    let g = layer.group(&cloud).map_err(|e| e.to_string())?;
    let members = gaide::encoding::ball_group(&cloud, &g.centroid_indices, 0.3, 8).map_err(|e| e.to_string())?;
    let shuffled: Vec<Vec<usize>> = members
        .iter()
        .map(|m| {
            let mut m = m.clone();
            rand::seq::SliceRandom::shuffle(m.as_mut_slice(), &mut r);
            m
        })
        .collect();
    let permuted = grouping_from(&cloud, g.centroid_indices.clone(), shuffled);
    let pa = layer.embed(&b, &g).map_err(|e| e.to_string())?.data();
    let pb = layer.embed(&b, &permuted).map_err(|e| e.to_string())?.data();
    ensure(pa == pb, || "within-group permutation changed the features".into())?;
    Ok(format!("FPS maximin over 200 clouds; translation drift {drift:.1e}; permutation exact"))
}

// ---------------------------------------------------------------- 5

fn criterion_5() -> Outcome {
    let chain = presets::planar_2dof();
    let (s, g) = (Config::new(vec![-0.5, 0.2]), Config::new(vec![0.5, -0.1]));
    let c_min = s.distance(&g);
    let c_best = 1.4 * c_min;
    let mut r = rng(5);
    let samples: Vec<Config> = (0..10_000)
        .map(|_| informed_sample(&chain, &s, &g, c_best, &mut r))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    for q in &samples {
        let focal = q.distance(&s) + q.distance(&g);
        ensure(focal <= c_best * (1.0 + 1e-12), || format!("focal sum {focal} exceeds {c_best}"))?;
    }

    // c_best == c_min: every sample lies on the segment.
    for _ in 0..1000 {
        let q = informed_sample(&chain, &s, &g, c_min, &mut r).map_err(|e| e.to_string())?;
        let off = q.distance(&s) + q.distance(&g) - c_min;
        ensure(off.abs() < 1e-9, || format!("degenerate sample off the segment by {off:e}"))?;
    }

    // Map back to the unit disc and test uniformity over 16 equal-area
    // cells (4 rings x 4 sectors).
    let centre = [0.5 * (s[0] + g[0]), 0.5 * (s[1] + g[1])];
    let axis = [(g[0] - s[0]) / c_min, (g[1] - s[1]) / c_min];
    let (a, b) = (0.5 * c_best, 0.5 * (c_best * c_best - c_min * c_min).sqrt());
    let mut counts = [0f64; 16];
    for q in &samples {
        let d = [q[0] - centre[0], q[1] - centre[1]];
        let u = (d[0] * axis[0] + d[1] * axis[1]) / a;
        let v = (-d[0] * axis[1] + d[1] * axis[0]) / b;
        let ring = (((u * u + v * v) * 4.0).floor() as usize).min(3);
        let sector = (((v.atan2(u) + PI) / (2.0 * PI) * 4.0).floor() as usize).min(3);
        counts[ring * 4 + sector] += 1.0;
    }
    let expected = samples.len() as f64 / 16.0;
    let chi2: f64 = counts.iter().map(|c| (c - expected).powi(2) / expected).sum();
    let p = 1.0 - ChiSquared::new(15.0).unwrap().cdf(chi2);
    ensure(p > 0.01, || format!("chi-square {chi2:.2}, p = {p:.4}"))?;
    Ok(format!("10^4 samples inside; degenerate case on segment; chi-square p = {p:.3}"))
}

// ---------------------------------------------------------------- 6

fn recomputed_cost(path: &[Config]) -> f64 {
    path.windows(2)
        .map(|w| w[0].iter().zip(w[1].iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
        .sum()
}

fn check_contract(problem: &PlanningProblem, res: &PlanResult, resolution: f64) -> Result<(), String> {
    ensure(res.success == res.path.is_some(), || "success flag disagrees with path".into())?;
    let Some(path) = &res.path else {
        return Ok(());
    };
    ensure(path.first() == Some(&problem.q_start) && path.last() == Some(&problem.q_goal), || {
        "endpoints are not exact".into()
    })?;
    let checker = CollisionChecker::new(&problem.chain, &problem.scene, resolution);
    ensure(path.windows(2).all(|w| checker.edge_free(&w[0], &w[1])), || "edge in collision".into())?;
    validate_path(problem, path, resolution)?;
    let cost = res.cost.ok_or("missing cost")?;
    ensure((cost - recomputed_cost(path)).abs() <= 1e-9, || format!("cost {cost} vs recomputed"))
}

fn contract_problems(n: usize, seed: u64) -> Vec<PlanningProblem> {
    let chains = [Arc::new(presets::planar_2dof()), Arc::new(presets::planar_3dof())];
    let mut r = rng(seed);
    let mut out = Vec::new();
    while out.len() < n {
        let family = SceneFamily::ALL[out.len() % 4];
        let chain = &chains[out.len() % 2];
        let scene = Arc::new(training::generate_scene(family, &mut r));
        // Mixed: blocked and free straight lines.
        if let Some(p) = training::sample_problem(chain, &scene, 0.5, out.len() % 3 != 0, 0.02, 1000, &mut r) {
            out.push(p);
        }
    }
    out
}

fn criterion_6() -> Outcome {
    let problems = contract_problems(80, 6);
    let classical = PlannerSettings {
        budget: Budget::Checks(8000),
        ..PlannerSettings::default()
    };
    let neural = NeuralSettings {
        steps: 30,
        replan: Some(ReplanSettings {
            neural_steps: 5,
            fallback: PlannerSettings {
                budget: Budget::Checks(4000),
                ..PlannerSettings::default()
            },
        }),
        ..NeuralSettings::default()
    };
    let models: Vec<GaideModel> = [2, 3]
        .iter()
        .map(|&dof| {
            GaideModel::new(
                Hyper {
                    dof,
                    dropout_p: 0.1,
                    ..tiny_hyper(MaskSchedule::Interleaved)
                },
                &mut rng(60 + dof as u64),
            )
        })
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let (mut trials, mut successes, mut traces) = (0, 0, 0);
    for (i, p) in problems.iter().enumerate() {
        let model = &models[p.dof() - 2];
        let mut r = rng(1000 + i as u64);
        let runs: Vec<(&str, PlanResult)> = vec![
            ("birrt", birrt_plan(p, &classical, &mut r)),
            ("rrtstar", rrt_star_plan(p, &classical, &mut r)),
            ("informed-rrtstar", informed_rrt_star_plan(p, &classical, &mut r)),
            (
                "random",
                neural_plan(p, &RandomDeltaSampler { dof: p.dof(), magnitude: 0.3 }, &neural, &mut r).map_err(|e| e.to_string())?,
            ),
            (
                "gaide",
                neural_plan(p, &NeuralSampler { model, mode: SampleMode::Stochastic }, &neural, &mut r)
                    .map_err(|e| e.to_string())?,
            ),
        ];
        for (name, res) in runs {
            trials += 1;
            successes += usize::from(res.success);
            check_contract(p, &res, PlannerSettings::default().resolution)
                .map_err(|e| format!("{name} on problem {i}: {e}"))?;
            if name.contains("rrtstar") {
                traces += 1;
                ensure(res.best_cost_trace.windows(2).all(|w| w[1] <= w[0]), || {
                    format!("{name} on problem {i}: best-cost trace increases")
                })?;
                if let Some(c) = res.cost {
                    ensure(res.best_cost_trace.last().is_some_and(|&t| (t - c).abs() < 1e-9), || {
                        format!("{name} on problem {i}: trace ends away from the reported cost")
                    })?;
                }
            }
        }
    }
    ensure(trials == 400, || format!("{trials} trials"))?;
    Ok(format!("{successes}/{trials} successful paths re-validated; {traces} RRT* traces non-increasing"))
}

// ---------------------------------------------------------------- 7, 8

/// Desk-scale model: the default architecture with fewer, cheaper tokens.
fn desk_hyper(schedule: MaskSchedule) -> Hyper {
    Hyper {
        hidden: 32,
        k_robot: 8,
        k_work: 12,
        n_robot_points: 64,
        n_work_points: 192,
        max_group: 8,
        schedule,
        ..Hyper::new(2)
    }
}

const TRAIN_STEPS: u64 = 2500;

struct DeskScale {
    chain: Arc<KinematicChain>,
    dataset: Dataset,
    scenes: Vec<Arc<Scene>>,
    heldout: Vec<PlanningProblem>,
    models: BTreeMap<&'static str, GaideModel>,
    log: Vec<String>,
}

impl DeskScale {
    fn build() -> Result<Self, String> {
        let chain = Arc::new(presets::planar_2dof());
        let mut named = Vec::new();
        for (fi, family) in SceneFamily::ALL.iter().enumerate() {
            for i in 0..15 {
                let scene = training::generate_scene(*family, &mut rng(gaide::derive_seed(70, &[fi as u64, i])));
                named.push((format!("{family}-{i:02}"), Arc::new(scene)));
            }
        }
        let started = Instant::now();
        let dataset = training::generate_dataset(&chain, &named, &GenerationSettings::default(), 71);
        let mut log = vec![format!(
            "{} oracle paths over {} scenes in {:.0} s",
            dataset.records.len(),
            named.len(),
            started.elapsed().as_secs_f64()
        )];
        let scenes: Vec<Arc<Scene>> = named.into_iter().map(|(_, s)| s).collect();

        // Held-out scenes come from a different seed stream.
        let doc = generate_suite("heldout", &chain, &SceneFamily::ALL, 5, 5, 1, 72);
        let suite = BenchmarkSuite::from_document(doc).map_err(|e| e.to_string())?;
        let heldout: Vec<PlanningProblem> = suite
            .tasks
            .iter()
            .flat_map(|t| &t.scenes)
            .flat_map(|s| s.problems.iter().cloned())
            .collect();
        log.push(format!("{} held-out problems", heldout.len()));
        Ok(Self {
            chain,
            dataset,
            scenes,
            heldout,
            models: BTreeMap::new(),
            log,
        })
    }

    fn model(&mut self, name: &'static str, schedule: MaskSchedule) -> Result<&GaideModel, String> {
        if !self.models.contains_key(name) {
            let started = Instant::now();
            let mut model = GaideModel::new(desk_hyper(schedule), &mut rng(73)).map_err(|e| e.to_string())?;
            let data = PreparedData::new(&model, &self.chain, &self.dataset.header, &self.scenes, &self.dataset.samples(true))
                .map_err(|e| e.to_string())?;
            let config = TrainConfig {
                steps: TRAIN_STEPS,
                batch_size: 32,
                lr: 1e-3,
                seed: 74,
                ..TrainConfig::default()
            };
            let report = training::train(&mut model, &data, None, &config).map_err(|e| e.to_string())?;
            let tail = &report.loss_curve[report.loss_curve.len() - 100..];
            self.log.push(format!(
                "{name}: {} samples, {TRAIN_STEPS} steps, loss {:.4} -> {:.4} in {:.0} s",
                data.len(),
                report.loss_curve[..100].iter().sum::<f64>() / 100.0,
                tail.iter().sum::<f64>() / 100.0,
                started.elapsed().as_secs_f64()
            ));
            self.models.insert(name, model);
        }
        Ok(&self.models[name])
    }
}

fn eval_settings() -> NeuralSettings {
    // Full algorithm: lazy contraction, then neural repair with a Bi-RRT
    // fallback. Replanning only starts once the two ends have connected.
    NeuralSettings::default()
}

struct Tally {
    successes: usize,
    cost_sum: f64,
}

impl Tally {
    fn rate(&self, n: usize) -> f64 {
        100.0 * self.successes as f64 / n as f64
    }
    fn mean_cost(&self) -> f64 {
        self.cost_sum / self.successes as f64
    }
}

fn tally(problems: &[PlanningProblem], mut run: impl FnMut(&PlanningProblem, &mut ChaCha8Rng) -> PlanResult) -> Tally {
    let mut t = Tally {
        successes: 0,
        cost_sum: 0.0,
    };
    for (i, p) in problems.iter().enumerate() {
        let res = run(p, &mut rng(7000 + i as u64));
        if let Some(c) = res.cost {
            t.successes += 1;
            t.cost_sum += c;
        }
    }
    t
}

fn neural_tally(problems: &[PlanningProblem], model: &GaideModel) -> Tally {
    let sampler = NeuralSampler {
        model,
        mode: SampleMode::Stochastic,
    };
    tally(problems, |p, r| neural_plan(p, &sampler, &eval_settings(), r).expect("planner input is valid"))
}

fn criterion_7(desk: &mut DeskScale) -> Outcome {
    let records = desk.dataset.records.len();
    ensure(records >= 500, || format!("only {records} oracle paths"))?;
    let problems = desk.heldout.clone();
    let n = problems.len();
    let neural = neural_tally(&problems, desk.model("gaide", MaskSchedule::Interleaved)?);
    let sampler = RandomDeltaSampler { dof: 2, magnitude: 0.3 };
    let random = tally(&problems, |p, r| neural_plan(p, &sampler, &eval_settings(), r).expect("valid input"));
    let birrt = tally(&problems, |p, r| birrt_plan(p, &PlannerSettings::default(), r));
    let summary = format!(
        "success gaide {:.0}% vs random {:.0}%; mean cost gaide {:.3} vs raw Bi-RRT {:.3} ({} / {} solved)",
        neural.rate(n),
        random.rate(n),
        neural.mean_cost(),
        birrt.mean_cost(),
        neural.successes,
        birrt.successes
    );
    ensure(neural.rate(n) >= random.rate(n) + 20.0, || summary.clone())?;
    ensure(neural.successes > 0 && neural.mean_cost() < birrt.mean_cost(), || summary.clone())?;
    Ok(summary)
}

fn criterion_8(desk: &mut DeskScale) -> Outcome {
    let problems = desk.heldout.clone();
    let n = problems.len();
    let full = neural_tally(&problems, desk.model("gaide", MaskSchedule::Interleaved)?);
    let h = neural_tally(&problems, desk.model("gaide-h", MaskSchedule::AllMask)?);
    let summary = format!("success GAIDE {:.0}% vs GAIDE-H {:.0}%", full.rate(n), h.rate(n));
    ensure(full.successes >= h.successes, || summary.clone())?;
    Ok(summary)
}

// ---------------------------------------------------------------- 9

fn criterion_9() -> Outcome {
    let doc = generate_suite("repro", &presets::planar_2dof(), &SceneFamily::ALL, 2, 2, 2, 9);
    let suite = BenchmarkSuite::from_document(doc).map_err(|e| e.to_string())?;
    let model = GaideModel::new(
        Hyper {
            dropout_p: 0.1,
            ..tiny_hyper(MaskSchedule::Interleaved)
        },
        &mut rng(90),
    )
    .map_err(|e| e.to_string())?;
    let planners = [PlannerId::Gaide, PlannerId::Random, PlannerId::BiRrt, PlannerId::RrtStar, PlannerId::InformedRrtStar];
    let models = BTreeMap::from([(PlannerId::Gaide, model)]);
    let dirs = [tempfile::tempdir().map_err(|e| e.to_string())?, tempfile::tempdir().map_err(|e| e.to_string())?];
    for (dir, workers) in dirs.iter().zip([1, 3]) {
        let run = run_suite(&suite, &planners, &models, workers).map_err(|e| e.to_string())?;
        write_report(&run.records, &run.budgets, dir.path()).map_err(|e| e.to_string())?;
    }
    let mut bytes = 0;
    for file in ["results.csv", "costs.csv"] {
        let a = std::fs::read(dirs[0].path().join(file)).map_err(|e| e.to_string())?;
        let b = std::fs::read(dirs[1].path().join(file)).map_err(|e| e.to_string())?;
        ensure(a == b, || format!("{file} differs between runs"))?;
        bytes += a.len();
    }
    let rows = bench::report::parse_costs(&std::fs::read_to_string(dirs[0].path().join("costs.csv")).unwrap())
        .map_err(|e| e.to_string())?
        .len();
    Ok(format!("results.csv and costs.csv identical ({bytes} bytes, {rows} trials, 1 vs 3 workers)"))
}

// ---------------------------------------------------------------- 10

fn criterion_10() -> Outcome {
    let chain = Arc::new(presets::planar_2dof());
    let scene = Arc::new(fixture_scene());
    let mut model = GaideModel::new(Hyper::new(2), &mut rng(100)).map_err(|e| e.to_string())?;
    let text = format!(
        "{}\n{}\n",
        serde_json::json!({
            "format": "gaide-dataset", "version": 1, "chain": chain.digest(), "dof": 2,
            "master_seed": 0, "cloud_seed": 101, "scenes": ["fixture"]
        }),
        serde_json::json!({"scene": "fixture", "seed": 102, "configs": [[0.3, -0.5], [0.5, -0.3]]})
    );
    let dataset = Dataset::parse(&text).map_err(|e| e.to_string())?;
    let samples = dataset.samples(false);
    ensure(samples.len() == 1, || format!("{} samples", samples.len()))?;
    let data = PreparedData::new(&model, &chain, &dataset.header, &[scene], &samples).map_err(|e| e.to_string())?;
    let config = TrainConfig {
        steps: 500,
        batch_size: 1,
        lr: 1e-3,
        seed: 103,
        ..TrainConfig::default()
    };
    let report = training::train(&mut model, &data, None, &config).map_err(|e| e.to_string())?;
    let below = report.loss_curve.iter().position(|&l| l < 1e-3);
    let best = report.loss_curve.iter().copied().fold(f64::INFINITY, f64::min);
    match below {
        Some(step) => Ok(format!("loss below 1e-3 at step {step} (best {best:.2e})")),
        None => Err(format!("best loss {best:.3e} after 500 steps")),
    }
}

// ----------------------------------------------------------------

fn main() {
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let wanted = |n: u32| selected.is_empty() || selected.contains(&n);
    let titles = [
        "gradient soundness",
        "mask exactness",
        "ablation schedule correctness",
        "set-abstraction properties",
        "informed-sampling geometry",
        "planner contracts",
        "end-to-end desk-scale learning",
        "ablation direction",
        "benchmark reproducibility",
        "overfit sanity",
    ];
    let mut desk: Option<DeskScale> = None;
    let mut failed = 0;
    for n in 1..=10u32 {
        if !wanted(n) {
            continue;
        }
        let started = Instant::now();
        let outcome = match n {
            1 => criterion_1(),
            2 => criterion_2(),
            3 => criterion_3(),
            4 => criterion_4(),
            5 => criterion_5(),
            6 => criterion_6(),
            7 | 8 => {
                if desk.is_none() {
                    desk = Some(DeskScale::build().unwrap_or_else(|e| panic!("desk-scale setup: {e}")));
                }
                let d = desk.as_mut().expect("built above");
                let out = if n == 7 { criterion_7(d) } else { criterion_8(d) };
                for line in d.log.drain(..) {
                    println!("    {line}");
                }
                out
            }
            9 => criterion_9(),
            _ => criterion_10(),
        };
        let secs = started.elapsed().as_secs_f64();
        let title = titles[n as usize - 1];
        match outcome {
            Ok(detail) => println!("criterion {n:>2} {title}: PASS ({detail}; {secs:.1} s)"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n:>2} {title}: FAIL ({detail}; {secs:.1} s)");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
