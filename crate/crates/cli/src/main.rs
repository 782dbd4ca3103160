use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, ensure, Context, Result};
use clap::{Parser, Subcommand};
use gaide::bench::{self, generate_suite, run_suite, write_report, BenchmarkSuite, PlannerId};
use gaide::kinematics::{presets, Config, KinematicChain, PlanningProblem, Scene, SceneDocument};
use gaide::model::{Checkpoint, GaideModel, Hyper, SampleMode};
use gaide::planners::{
    birrt_plan, informed_rrt_star_plan, neural_plan, rrt_star_plan, validate_path, Budget, NeuralSampler,
    NeuralSettings, PlanResult, PlannerSettings, RandomDeltaSampler,
};
use gaide::training::{self, Dataset, GenerationSettings, PreparedData, SceneFamily, TrainConfig};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(name = "gaide", version, about = "Learned informed sampling for joint-space motion planning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write random scene documents for the planar two-joint arm.
    GenScenes {
        #[arg(long)]
        out: PathBuf,
        /// Scenes per family.
        #[arg(long, default_value_t = 25)]
        per_family: usize,
        /// Comma-separated families (table, narrow_gap, bins, shelf).
        #[arg(long, default_value = "table,narrow_gap,bins,shelf")]
        families: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Generate oracle demonstrations for every scene in a directory.
    GenData {
        #[arg(long)]
        scenes: PathBuf,
        #[arg(long, default_value_t = 10)]
        paths_per_scene: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Keep problems whose straight edge is already free.
        #[arg(long)]
        allow_free: bool,
    },
    /// Train a sampler on a dataset.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// Directory holding the scene documents the dataset refers to.
        #[arg(long)]
        scenes: PathBuf,
        #[arg(long, default_value_t = 2000)]
        steps: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 32)]
        batch_size: usize,
        #[arg(long, default_value_t = 1e-3)]
        lr: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// gaide, gaide-v or gaide-h.
        #[arg(long, default_value = "gaide")]
        variant: String,
        #[arg(long, default_value_t = 64)]
        hidden: usize,
        #[arg(long, default_value_t = 0.1)]
        val_fraction: f64,
        #[arg(long, default_value_t = 100)]
        eval_every: u64,
        #[arg(long, default_value_t = 0)]
        checkpoint_every: u64,
        /// CSV of per-step training loss and periodic validation loss.
        #[arg(long)]
        loss_log: Option<PathBuf>,
    },
    /// Write a benchmark suite over the planar scene families.
    GenSuite {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 5)]
        scenes_per_family: usize,
        #[arg(long, default_value_t = 5)]
        problems_per_scene: usize,
        #[arg(long, default_value_t = 4)]
        trials: usize,
        #[arg(long, default_value = "table,narrow_gap,bins,shelf")]
        families: String,
        #[arg(long, default_value_t = 1000)]
        seed: u64,
    },
    /// Solve one problem and print the result as JSON.
    Plan {
        /// Scene document (chain, obstacles, bounds).
        #[arg(long)]
        scene: PathBuf,
        /// Comma-separated joint values.
        #[arg(long, allow_hyphen_values = true)]
        start: String,
        #[arg(long, allow_hyphen_values = true)]
        goal: String,
        #[arg(long, default_value = "birrt")]
        planner: String,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value_t = 50_000)]
        budget_checks: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run a benchmark suite and write the report.
    Bench {
        #[arg(long)]
        suite: PathBuf,
        /// Comma-separated planner ids.
        #[arg(long)]
        planners: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// `<planner>=<file>`, once per learned planner.
        #[arg(long = "checkpoint")]
        checkpoints: Vec<String>,
    },
    /// Regenerate report files from the raw trial records in a directory.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_families(s: &str) -> Result<Vec<SceneFamily>> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| x.parse::<SceneFamily>().map_err(anyhow::Error::msg))
        .collect()
}

fn parse_config(s: &str) -> Result<Config> {
    let q = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().with_context(|| format!("bad joint value {x:?}")))
        .collect::<Result<Vec<_>>>()?;
    Ok(Config(q))
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, body).with_context(|| format!("writing {}", path.display()))
}

type NamedScenes = Vec<(String, Arc<Scene>)>;

/// Scene documents in `dir`, sorted by id (the file stem).
fn load_scene_dir(dir: &Path) -> Result<(Arc<KinematicChain>, NamedScenes)> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    files.sort();
    ensure!(!files.is_empty(), "no scene documents in {}", dir.display());
    let mut chain: Option<Arc<KinematicChain>> = None;
    let mut scenes = Vec::new();
    for f in files {
        let text = fs::read_to_string(&f)?;
        let (c, s) = SceneDocument::parse(&text).with_context(|| format!("parsing {}", f.display()))?;
        match &chain {
            Some(existing) if existing.digest() != c.digest() => {
                bail!("{} uses a different chain", f.display())
            }
            Some(_) => {}
            None => chain = Some(Arc::new(c)),
        }
        let id = f.file_stem().and_then(|s| s.to_str()).context("non-UTF-8 file name")?.to_string();
        scenes.push((id, Arc::new(s)));
    }
    Ok((chain.expect("at least one scene"), scenes))
}

fn load_model(path: &Path) -> Result<GaideModel> {
    Ok(Checkpoint::load(path)
        .with_context(|| format!("loading {}", path.display()))?
        .to_model()?)
}

fn gen_scenes(out: &Path, per_family: usize, families: &str, seed: u64) -> Result<()> {
    let chain = presets::planar_2dof();
    let families = parse_families(families)?;
    fs::create_dir_all(out)?;
    for (fi, family) in families.iter().enumerate() {
        for i in 0..per_family {
            let mut rng = ChaCha8Rng::seed_from_u64(gaide::derive_seed(seed, &[fi as u64, i as u64]));
            let scene = training::generate_scene(*family, &mut rng);
            let doc = SceneDocument::from_parts(&chain, &scene);
            write_file(&out.join(format!("{family}-{i:03}.json")), &doc.to_json_string())?;
        }
    }
    println!("wrote {} scenes to {}", families.len() * per_family, out.display());
    Ok(())
}

fn gen_data(scenes: &Path, paths_per_scene: usize, out: &Path, seed: u64, allow_free: bool) -> Result<()> {
    let (chain, scenes) = load_scene_dir(scenes)?;
    let settings = GenerationSettings {
        paths_per_scene,
        require_blocked: !allow_free,
        ..GenerationSettings::default()
    };
    let data = training::generate_dataset(&chain, &scenes, &settings, seed);
    write_file(out, &data.to_text())?;
    println!(
        "wrote {} paths ({} samples per direction) to {}",
        data.records.len(),
        data.samples(false).len(),
        out.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn train(
    data: &Path,
    scenes_dir: &Path,
    steps: u64,
    out: &Path,
    batch_size: usize,
    lr: f64,
    seed: u64,
    variant: &str,
    hidden: usize,
    val_fraction: f64,
    eval_every: u64,
    checkpoint_every: u64,
    loss_log: Option<&Path>,
) -> Result<()> {
    let dataset = Dataset::parse(&fs::read_to_string(data).with_context(|| format!("reading {}", data.display()))?)?;
    let (chain, scenes) = load_scene_dir(scenes_dir)?;
    let by_id: BTreeMap<&str, &Arc<Scene>> = scenes.iter().map(|(id, s)| (id.as_str(), s)).collect();
    let aligned = dataset
        .header
        .scenes
        .iter()
        .map(|id| by_id.get(id.as_str()).map(|s| Arc::clone(s)).with_context(|| format!("scene {id} not found")))
        .collect::<Result<Vec<_>>>()?;
    let schedule = variant
        .parse::<PlannerId>()
        .ok()
        .and_then(PlannerId::schedule)
        .with_context(|| format!("unknown variant {variant:?}"))?;
    let hyper = Hyper {
        hidden,
        schedule,
        ..Hyper::new(chain.dof())
    };
    let mut model = GaideModel::new(hyper, &mut ChaCha8Rng::seed_from_u64(gaide::derive_seed(seed, &[7])))?;
    let (train_set, val_set) = dataset.split_by_scene(val_fraction, seed);
    let prepared = PreparedData::new(&model, &chain, &dataset.header, &aligned, &train_set.samples(true))?;
    let val = PreparedData::new(&model, &chain, &dataset.header, &aligned, &val_set.samples(true))?;
    println!(
        "training {} on {} samples ({} validation), {} parameters",
        schedule.name(),
        prepared.len(),
        val.len(),
        model.num_parameters()
    );
    let config = TrainConfig {
        steps,
        batch_size,
        lr,
        seed,
        checkpoint_every,
        checkpoint_dir: (checkpoint_every > 0).then(|| out.with_extension("checkpoints")),
        eval_every,
    };
    let report = match training::train(&mut model, &prepared, Some(&val), &config) {
        Ok(r) => r,
        Err(training::TrainingError::Diverged { step, last_good }) => {
            last_good.save(out)?;
            bail!("loss diverged at step {step}; last good parameters saved to {}", out.display());
        }
        Err(e) => return Err(e.into()),
    };
    Checkpoint::from_model(&model, steps).save(out)?;
    if let Some(log) = loss_log {
        let mut s = String::from("step,train_loss,val_loss\n");
        let val: BTreeMap<u64, f64> = report.val_curve.iter().copied().collect();
        for (i, l) in report.loss_curve.iter().enumerate() {
            let v = val.get(&(i as u64)).map(|v| v.to_string()).unwrap_or_default();
            s.push_str(&format!("{i},{l},{v}\n"));
        }
        if let Some(v) = val.get(&steps) {
            s.push_str(&format!("{steps},,{v}\n"));
        }
        write_file(log, &s)?;
    }
    let last = report.loss_curve.last().copied().unwrap_or(f64::NAN);
    match (report.val_curve.first(), report.val_curve.last()) {
        (Some(a), Some(b)) => println!("final train loss {last:.6}; validation {:.6} -> {:.6}", a.1, b.1),
        _ => println!("final train loss {last:.6}"),
    }
    println!("saved {}", out.display());
    Ok(())
}

fn gen_suite(out: &Path, scenes: usize, problems: usize, trials: usize, families: &str, seed: u64) -> Result<()> {
    let doc = generate_suite(
        "desk",
        &presets::planar_2dof(),
        &parse_families(families)?,
        scenes,
        problems,
        trials,
        seed,
    );
    write_file(out, &doc.to_json_string())?;
    let suite = BenchmarkSuite::from_document(doc)?;
    println!("wrote suite with {} problems to {}", suite.num_problems(), out.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn plan(
    scene: &Path,
    start: &str,
    goal: &str,
    planner: &str,
    checkpoint: Option<&Path>,
    budget_checks: u64,
    seed: u64,
) -> Result<()> {
    let (chain, scene) = SceneDocument::parse(&fs::read_to_string(scene)?)?;
    let problem = PlanningProblem::new(Arc::new(chain), Arc::new(scene), parse_config(start)?, parse_config(goal)?)?;
    let id: PlannerId = planner.parse().map_err(anyhow::Error::msg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let classical = PlannerSettings {
        budget: Budget::Checks(budget_checks),
        ..PlannerSettings::default()
    };
    let result: PlanResult = match id {
        PlannerId::BiRrt => birrt_plan(&problem, &classical, &mut rng),
        PlannerId::RrtStar => rrt_star_plan(&problem, &classical, &mut rng),
        PlannerId::InformedRrtStar => informed_rrt_star_plan(&problem, &classical, &mut rng),
        PlannerId::Random => {
            let sampler = RandomDeltaSampler {
                dof: problem.dof(),
                magnitude: 0.3,
            };
            neural_plan(&problem, &sampler, &NeuralSettings::default(), &mut rng)?
        }
        learned => {
            let path = checkpoint.with_context(|| format!("planner {learned} needs --checkpoint"))?;
            let model = load_model(path)?;
            ensure!(
                Some(model.hyper().schedule) == learned.schedule(),
                "checkpoint uses the {} schedule",
                model.hyper().schedule.name()
            );
            let sampler = NeuralSampler {
                model: &model,
                mode: SampleMode::Stochastic,
            };
            neural_plan(&problem, &sampler, &NeuralSettings::default(), &mut rng)?
        }
    };
    if let Some(path) = &result.path {
        validate_path(&problem, path, PlannerSettings::default().resolution).map_err(anyhow::Error::msg)?;
    }
    println!("{}", serde_json::to_string_pretty(&result)?);
    Ok(())
}

fn run_bench(suite: &Path, planners: &str, out: &Path, workers: usize, checkpoints: &[String]) -> Result<()> {
    let mut doc = bench::SuiteDocument::parse(&fs::read_to_string(suite).with_context(|| format!("reading {}", suite.display()))?)?;
    if let Some(seed) = bench::seed_override()? {
        doc.master_seed = seed;
    }
    let suite = BenchmarkSuite::from_document(doc)?;
    let planners = PlannerId::parse_list(planners)?;
    let mut models = BTreeMap::new();
    for spec in checkpoints {
        let (name, path) = spec.split_once('=').with_context(|| format!("expected <planner>=<file>, got {spec:?}"))?;
        let id: PlannerId = name.parse().map_err(anyhow::Error::msg)?;
        ensure!(id.needs_model(), "planner {id} takes no checkpoint");
        models.insert(id, load_model(Path::new(path))?);
    }
    bench::check_configuration(&suite, &planners, &models)?;
    let run = run_suite(&suite, &planners, &models, workers)?;
    let files = write_report(&run.records, &run.budgets, out)?;
    for row in bench::aggregate(&run.records).iter().filter(|r| r.task == bench::ALL_TASKS) {
        println!(
            "{:<17} success {:6.2}%  cost {}  checks {:.0}",
            row.planner.name(),
            row.success_rate,
            row.cost_mean.map_or("NA".to_string(), |c| format!("{c:.3}")),
            row.checks_mean
        );
    }
    println!("wrote {} files to {}", files.len(), out.display());
    Ok(())
}

fn report(input: &Path, out: Option<&Path>) -> Result<()> {
    let records = bench::report::parse_trials(&fs::read_to_string(input.join("trials.jsonl"))?)?;
    let budgets: Vec<bench::BudgetRecord> = match fs::read_to_string(input.join("budgets.json")) {
        Ok(text) => serde_json::from_str(&text).context("parsing budgets.json")?,
        Err(_) => Vec::new(),
    };
    let out = out.unwrap_or(input);
    let files = write_report(&records, &budgets, out)?;
    println!("wrote {} files to {}", files.len(), out.display());
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::GenScenes {
            out,
            per_family,
            families,
            seed,
        } => gen_scenes(&out, per_family, &families, seed),
        Command::GenData {
            scenes,
            paths_per_scene,
            out,
            seed,
            allow_free,
        } => gen_data(&scenes, paths_per_scene, &out, seed, allow_free),
        Command::Train {
            data,
            scenes,
            steps,
            out,
            batch_size,
            lr,
            seed,
            variant,
            hidden,
            val_fraction,
            eval_every,
            checkpoint_every,
            loss_log,
        } => train(
            &data,
            &scenes,
            steps,
            &out,
            batch_size,
            lr,
            seed,
            &variant,
            hidden,
            val_fraction,
            eval_every,
            checkpoint_every,
            loss_log.as_deref(),
        ),
        Command::GenSuite {
            out,
            scenes_per_family,
            problems_per_scene,
            trials,
            families,
            seed,
        } => gen_suite(&out, scenes_per_family, problems_per_scene, trials, &families, seed),
        Command::Plan {
            scene,
            start,
            goal,
            planner,
            checkpoint,
            budget_checks,
            seed,
        } => plan(&scene, &start, &goal, &planner, checkpoint.as_deref(), budget_checks, seed),
        Command::Bench {
            suite,
            planners,
            out,
            workers,
            checkpoints,
        } => run_bench(&suite, &planners, &out, workers, &checkpoints),
        Command::Report { input, out } => report(&input, out.as_deref()),
    }
}
