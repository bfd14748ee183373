//! Command-line front end for the `cyclematch` library.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 runtime error.

pub mod config;

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;

use cyclematch::baselines::Method;
use cyclematch::eval::{
    self, embedding_similarity, mask_structural, metrics_csv, time_method, BaselineParams,
    InstanceInfo, MetricsRow,
};
use cyclematch::gradcheck::{gradcheck, GradcheckConfig};
use cyclematch::nn::{load_checkpoint, save_checkpoint, AdamConfig, GcnModel};
use cyclematch::rng::{derive_seed, Domain};
use cyclematch::synth::{gen_graph, gen_scene, SynthGraphSpec, DEFAULT_DESCRIPTOR_DIM, DEFAULT_DESCRIPTOR_NOISE};
use cyclematch::train::{ablate, ablation_csv, log_csv, Source, TrainConfig, Trainer};
use cyclematch::{CorrespondenceGraph, GroundTruth};

use config::{key_help, load_config, RunConfig};

pub const SEED_ENV: &str = "CYCLEMATCH_SEED";
/// Largest directional-derivative error `gradcheck` accepts.
pub const GRADCHECK_TOL: f64 = 1e-4;

#[derive(Parser, Debug)]
#[command(
    name = "cyclematch",
    version,
    about = "Cycle-consistent multi-image matching with graph convolutional networks",
    after_help = key_help()
)]
struct Cli {
    /// Master seed [default: $CYCLEMATCH_SEED, else 0]
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (or file, for gen-graph / gen-scene)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// `key = value` config file; flags take precedence
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct InstanceArgs {
    #[arg(long)]
    views: Option<usize>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    descriptor_dim: Option<usize>,
    #[arg(long)]
    descriptor_noise: Option<f64>,
    #[arg(long)]
    edge_noise: Option<f64>,
    /// Fraction of true matches rewired to a wrong node
    #[arg(long)]
    outliers: Option<f64>,
}

#[derive(Args, Debug, Default)]
struct TrainArgs {
    /// Training instances: graph or scene
    #[arg(long)]
    source: Option<String>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    lr0: Option<f64>,
    #[arg(long)]
    decay: Option<f64>,
    #[arg(long)]
    beta1: Option<f64>,
    #[arg(long)]
    beta2: Option<f64>,
    #[arg(long)]
    adam_eps: Option<f64>,
    #[arg(long)]
    lambda_geom: Option<f64>,
    #[arg(long)]
    geometric: Option<bool>,
    #[arg(long)]
    groupnorm: Option<bool>,
    #[arg(long)]
    eval_every: Option<usize>,
    #[arg(long)]
    eval_graphs: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    groups: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic correspondence graph and its ground truth
    GenGraph(InstanceArgs),
    /// Generate a synthetic scene with camera poses, plus its graph
    GenScene(InstanceArgs),
    /// Train a GCN on freshly sampled synthetic instances
    Train {
        #[command(flatten)]
        instance: InstanceArgs,
        #[command(flatten)]
        train: TrainArgs,
        /// Continue from a checkpoint that holds optimizer state
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Embed a graph with a trained model
    Infer {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        gt: Option<PathBuf>,
        /// Record wall-clock runtimes in output files
        #[arg(long)]
        timing: bool,
    },
    /// Run a synchronization baseline on a graph
    Baseline {
        /// spectral, matchals or pgdds
        #[arg(long)]
        method: Option<String>,
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        gt: Option<PathBuf>,
        /// Universe size [default: from --gt, else nodes per view]
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        iters: Option<usize>,
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long)]
        step: Option<f64>,
        #[arg(long)]
        timing: bool,
    },
    /// Score a match matrix against ground truth
    Eval {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// identity (input adjacency), features (descriptor cosines),
        /// a .cgrf match matrix or a .gcnm model
        #[arg(long, default_value = "identity")]
        embedding: String,
    },
    /// Error of iterative baselines across iteration budgets
    Sweep {
        /// matchals, pgdds or both
        #[arg(long)]
        method: Option<String>,
        /// Comma-separated iteration budgets
        #[arg(long, default_value = "15,25,50")]
        iters: String,
        #[arg(long)]
        instances: Option<usize>,
        #[command(flatten)]
        instance: InstanceArgs,
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long)]
        step: Option<f64>,
        #[arg(long)]
        timing: bool,
    },
    /// Train with an ablation flag on and off over several seeds
    Ablate {
        /// geometric or groupnorm
        #[arg(long)]
        flag: String,
        /// Comma-separated seeds [default: seed, seed+1, seed+2]
        #[arg(long)]
        seeds: Option<String>,
        #[command(flatten)]
        instance: InstanceArgs,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Directional-derivative check of the full model's gradients
    Gradcheck {
        #[arg(long)]
        directions: Option<usize>,
        #[arg(long)]
        views: Option<usize>,
        #[arg(long)]
        points: Option<usize>,
        /// Finite-difference step
        #[arg(long)]
        step: Option<f64>,
    },
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<cyclematch::Error> for CliError {
    fn from(e: cyclematch::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<config::ConfigError> for CliError {
    fn from(e: config::ConfigError) -> Self {
        CliError::Usage(e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

struct Ctx {
    seed: u64,
    out: Option<PathBuf>,
    cfg: RunConfig,
}

impl Ctx {
    fn out_dir(&self) -> CliResult<PathBuf> {
        let dir = self.out.clone().unwrap_or_else(|| PathBuf::from("."));
        fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
        Ok(dir)
    }

    fn spec(&self, a: &InstanceArgs) -> SynthGraphSpec {
        let c = &self.cfg;
        SynthGraphSpec {
            views: c.pick(a.views, "views", 3),
            points: c.pick(a.points, "points", 10),
            descriptor_dim: c.pick(a.descriptor_dim, "descriptor_dim", DEFAULT_DESCRIPTOR_DIM),
            descriptor_noise_sigma: c.pick(a.descriptor_noise, "descriptor_noise", DEFAULT_DESCRIPTOR_NOISE),
            edge_noise_sigma: c.pick(a.edge_noise, "edge_noise", 0.0),
            outlier_rate: c.pick(a.outliers, "outliers", 0.0),
            seed: self.seed,
        }
    }

    fn train_config(&self, inst: &InstanceArgs, t: &TrainArgs) -> CliResult<TrainConfig> {
        let c = &self.cfg;
        let d = TrainConfig::default();
        let source = match c.pick(t.source.clone(), "source", "graph".to_string()).as_str() {
            "graph" => Source::Graph,
            "scene" => Source::Scene,
            other => return Err(CliError::Usage(format!("unknown source {other:?} (graph or scene)"))),
        };
        let da = AdamConfig::default();
        Ok(TrainConfig {
            steps: c.pick(t.steps, "steps", d.steps),
            adam: AdamConfig {
                lr0: c.pick(t.lr0, "lr0", da.lr0),
                beta1: c.pick(t.beta1, "beta1", da.beta1),
                beta2: c.pick(t.beta2, "beta2", da.beta2),
                eps: c.pick(t.adam_eps, "adam_eps", da.eps),
                decay: c.pick(t.decay, "decay", da.decay),
            },
            lambda_geom: c.pick(t.lambda_geom, "lambda_geom", d.lambda_geom),
            use_geometric: c.pick(t.geometric, "geometric", d.use_geometric),
            use_groupnorm: c.pick(t.groupnorm, "groupnorm", d.use_groupnorm),
            eval_every: c.pick(t.eval_every, "eval_every", d.eval_every),
            eval_graphs: c.pick(t.eval_graphs, "eval_graphs", d.eval_graphs),
            seed: self.seed,
            graph: self.spec(inst),
            source,
            hidden: c.pick(t.hidden, "hidden", d.hidden),
            groups: c.pick(t.groups, "groups", d.groups),
            layers: c.pick(t.layers, "layers", d.layers),
            init: d.init,
        })
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

fn write(path: &Path, text: &str) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| io_error(parent, e))?;
    }
    fs::write(path, text).map_err(|e| io_error(path, e))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn resolve_seed(flag: Option<u64>, cfg: &RunConfig) -> CliResult<u64> {
    if let Some(s) = flag.or_else(|| cfg.get("seed")) {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(0),
    }
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> CliResult<Vec<T>> {
    text.split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| CliError::Usage(format!("bad {what} {s:?}"))))
        .collect()
}

/// `target` if it already names a file with extension `ext`, else
/// `dir/<stem>.<ext>`.
fn file_or_dir(ctx: &Ctx, ext: &str, stem: &str) -> CliResult<PathBuf> {
    match &ctx.out {
        Some(p) if p.extension().is_some_and(|e| e == ext) => Ok(p.clone()),
        _ => Ok(ctx.out_dir()?.join(format!("{stem}.{ext}"))),
    }
}

/// A similarity matrix as a feature-less graph file.
fn match_graph(s: &DMatrix<f64>, like: &CorrespondenceGraph) -> CliResult<CorrespondenceGraph> {
    let sym = (s + s.transpose()) * 0.5;
    Ok(CorrespondenceGraph::new(
        like.views(),
        like.view_of().to_vec(),
        sym,
        DMatrix::zeros(like.n(), 0),
    )?)
}

fn runtime_or_nan(timing: bool, secs: f64) -> f64 {
    if timing {
        secs
    } else {
        f64::NAN
    }
}

fn dispatch(cli: Cli) -> CliResult<()> {
    let cfg = match &cli.config {
        Some(path) => load_config(path)?,
        None => RunConfig::default(),
    };
    let ctx = Ctx {
        seed: resolve_seed(cli.seed, &cfg)?,
        out: cli.out,
        cfg,
    };
    match cli.command {
        Command::GenGraph(a) => cmd_gen_graph(&ctx, &a),
        Command::GenScene(a) => cmd_gen_scene(&ctx, &a),
        Command::Train { instance, train, resume } => cmd_train(&ctx, &instance, &train, resume.as_deref()),
        Command::Infer { model, graph, gt, timing } => cmd_infer(&ctx, &model, &graph, gt.as_deref(), timing),
        Command::Baseline {
            method,
            graph,
            gt,
            dim,
            iters,
            mu,
            step,
            timing,
        } => cmd_baseline(&ctx, method, &graph, gt.as_deref(), dim, iters, mu, step, timing),
        Command::Eval { graph, gt, embedding } => cmd_eval(&ctx, &graph, &gt, &embedding),
        Command::Sweep {
            method,
            iters,
            instances,
            instance,
            mu,
            step,
            timing,
        } => cmd_sweep(&ctx, method, &iters, instances, &instance, mu, step, timing),
        Command::Ablate {
            flag,
            seeds,
            instance,
            train,
        } => cmd_ablate(&ctx, &flag, seeds.as_deref(), &instance, &train),
        Command::Gradcheck {
            directions,
            views,
            points,
            step,
        } => cmd_gradcheck(&ctx, directions, views, points, step),
    }
}

fn cmd_gen_graph(ctx: &Ctx, a: &InstanceArgs) -> CliResult<()> {
    let (graph, gt) = gen_graph(&ctx.spec(a))?;
    let path = file_or_dir(ctx, "cgrf", "graph")?;
    write(&path, &graph.to_text())?;
    write(&path.with_extension("gtrf"), &gt.to_text())
}

fn cmd_gen_scene(ctx: &Ctx, a: &InstanceArgs) -> CliResult<()> {
    let (graph, scene) = gen_scene(&ctx.spec(a))?;
    let path = file_or_dir(ctx, "scnf", "scene")?;
    write(&path, &scene.to_text())?;
    write(&path.with_extension("cgrf"), &graph.to_text())?;
    write(&path.with_extension("gtrf"), &scene.ground_truth().to_text())
}

fn cmd_train(ctx: &Ctx, inst: &InstanceArgs, t: &TrainArgs, resume: Option<&Path>) -> CliResult<()> {
    let config = ctx.train_config(inst, t)?;
    let mut trainer = match resume {
        Some(path) => {
            let (model, adam) = load_checkpoint(path)?;
            let adam = adam.ok_or_else(|| {
                CliError::Runtime(format!("{} holds no optimizer state", path.display()))
            })?;
            Trainer::resume(config, model, adam)?
        }
        None => Trainer::new(config)?,
    };
    trainer.run()?;
    let dir = ctx.out_dir()?;
    let model_path = dir.join("model.gcnm");
    save_checkpoint(&model_path, trainer.model(), Some(trainer.adam()))?;
    println!("wrote {}", model_path.display());
    write(&dir.join("train_log.csv"), &log_csv(trainer.log()))?;
    if let Some(e) = trainer.final_eval() {
        println!(
            "step {} held-out l1 {:.4e} same {:.4} +- {:.4} diff {:.4} +- {:.4}",
            trainer.steps_done(),
            e.report.l1,
            e.stats.same_mean,
            e.stats.same_std,
            e.stats.diff_mean,
            e.stats.diff_std
        );
    }
    Ok(())
}

fn load_model(path: &Path) -> CliResult<GcnModel> {
    Ok(load_checkpoint(path)?.0)
}

fn embed(model: &GcnModel, graph: &CorrespondenceGraph) -> CliResult<(DMatrix<f64>, f64)> {
    let op = graph.augmented_operator();
    let (e, secs) = time_method(|| model.forward(&op, graph.features()));
    Ok((e?, secs))
}

fn info_of(graph: &CorrespondenceGraph, points: usize, seed: u64) -> InstanceInfo {
    InstanceInfo {
        views: graph.views(),
        points,
        noise: f64::NAN,
        outliers: f64::NAN,
        seed,
    }
}

fn cmd_infer(ctx: &Ctx, model: &Path, graph: &Path, gt: Option<&Path>, timing: bool) -> CliResult<()> {
    let model = load_model(model)?;
    let graph = CorrespondenceGraph::load(graph)?;
    let (e, secs) = embed(&model, &graph)?;
    eprintln!("forward pass {secs:.6} s");
    let s = embedding_similarity(&e, graph.view_of());
    let dir = ctx.out_dir()?;
    write(&dir.join("matches.cgrf"), &match_graph(&s, &graph)?.to_text())?;
    let mut text = String::new();
    for row in e.row_iter() {
        let cells: Vec<String> = row.iter().map(|x| format!("{x:.16e}")).collect();
        text.push_str(&cells.join(","));
        text.push('\n');
    }
    write(&dir.join("embedding.csv"), &text)?;
    if let Some(gt) = gt {
        let gt = GroundTruth::load(gt)?;
        let row = eval::score(
            "gcn",
            info_of(&graph, gt.universe_dim(), ctx.seed),
            0,
            &s,
            &gt,
            runtime_or_nan(timing, secs),
        )?;
        write(&dir.join("metrics.csv"), &metrics_csv(&[row]))?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_baseline(
    ctx: &Ctx,
    method: Option<String>,
    graph: &Path,
    gt: Option<&Path>,
    dim: Option<usize>,
    iters: Option<usize>,
    mu: Option<f64>,
    step: Option<f64>,
    timing: bool,
) -> CliResult<()> {
    let c = &ctx.cfg;
    let method: Method = c
        .pick(method, "method", String::new())
        .parse()
        .map_err(|e: cyclematch::Error| CliError::Usage(e.to_string()))?;
    if method == Method::Gcn {
        return Err(CliError::Usage("use `infer` for the GCN".into()));
    }
    let graph = CorrespondenceGraph::load(graph)?;
    let gt = gt.map(GroundTruth::load).transpose()?;
    let d = dim
        .or_else(|| gt.as_ref().map(|g| g.universe_dim()))
        .unwrap_or(graph.n() / graph.views());
    let iters = c.pick(iters, "iters", 50);
    let params = BaselineParams {
        mu: c.pick(mu, "mu", BaselineParams::default().mu),
        step: step.or_else(|| c.get("step")),
    };
    let out = eval::run_baseline(method, &graph, d, iters, &params)?;
    eprintln!("{method} ran {} iterations in {:.6} s", out.iterations, out.runtime_s);
    let dir = ctx.out_dir()?;
    write(&dir.join(format!("{method}.cgrf")), &match_graph(&out.matrix, &graph)?.to_text())?;
    if let Some(gt) = gt {
        let row = eval::score(
            method.tag(),
            info_of(&graph, d, ctx.seed),
            out.iterations,
            &out.matrix,
            &gt,
            runtime_or_nan(timing, out.runtime_s),
        )?;
        write(&dir.join("metrics.csv"), &metrics_csv(&[row]))?;
    }
    Ok(())
}

fn cmd_eval(ctx: &Ctx, graph: &Path, gt: &Path, embedding: &str) -> CliResult<()> {
    let graph = CorrespondenceGraph::load(graph)?;
    let gt = GroundTruth::load(gt)?;
    if gt.view_of() != graph.view_of() {
        return Err(CliError::Runtime("graph and ground truth disagree on node views".into()));
    }
    let (name, s) = match embedding {
        "identity" => ("input".to_string(), mask_structural(graph.adjacency(), graph.view_of())),
        "features" => ("features".to_string(), embedding_similarity(graph.features(), graph.view_of())),
        path => {
            let p = Path::new(path);
            let stem = p.file_stem().map_or("file".into(), |s| s.to_string_lossy().into_owned());
            match p.extension().and_then(|e| e.to_str()) {
                Some("cgrf") => {
                    let m = CorrespondenceGraph::load(p)?;
                    (stem, mask_structural(m.adjacency(), graph.view_of()))
                }
                Some("gcnm") => {
                    let (e, _) = embed(&load_model(p)?, &graph)?;
                    ("gcn".to_string(), embedding_similarity(&e, graph.view_of()))
                }
                _ => {
                    return Err(CliError::Usage(format!(
                        "--embedding must be identity, features, a .cgrf or a .gcnm file, got {path:?}"
                    )))
                }
            }
        }
    };
    let row = eval::score(&name, info_of(&graph, gt.universe_dim(), ctx.seed), 0, &s, &gt, f64::NAN)?;
    let csv = metrics_csv(&[row]);
    print!("{csv}");
    if let Some(out) = &ctx.out {
        fs::create_dir_all(out).map_err(|e| io_error(out, e))?;
        write(&out.join("metrics.csv"), &csv)?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep(
    ctx: &Ctx,
    method: Option<String>,
    iters: &str,
    instances: Option<usize>,
    inst: &InstanceArgs,
    mu: Option<f64>,
    step: Option<f64>,
    timing: bool,
) -> CliResult<()> {
    let c = &ctx.cfg;
    let methods = match c.pick(method, "method", "both".to_string()).as_str() {
        "both" => vec![Method::MatchAls, Method::Pgdds],
        "matchals" => vec![Method::MatchAls],
        "pgdds" => vec![Method::Pgdds],
        other => return Err(CliError::Usage(format!("cannot sweep {other:?} (matchals, pgdds or both)"))),
    };
    let budgets: Vec<usize> = parse_list(iters, "iteration budget")?;
    let instances = c.pick(instances, "instances", 20);
    let params = BaselineParams {
        mu: c.pick(mu, "mu", BaselineParams::default().mu),
        step: step.or_else(|| c.get("step")),
    };
    let base = ctx.spec(inst);
    let mut rows: Vec<MetricsRow> = Vec::new();
    for k in 0..instances {
        let spec = base.with_seed(derive_seed(ctx.seed, Domain::Instance, k as u64));
        let (graph, gt) = gen_graph(&spec)?;
        let info = InstanceInfo {
            views: spec.views,
            points: spec.points,
            noise: spec.edge_noise_sigma,
            outliers: spec.outlier_rate,
            seed: spec.seed,
        };
        for &m in &methods {
            for mut row in eval::sweep_iterations(m, &graph, &gt, info, &budgets, &params)? {
                row.report.runtime_s = runtime_or_nan(timing, row.report.runtime_s);
                rows.push(row);
            }
        }
    }
    for &m in &methods {
        for &b in &budgets {
            let sel: Vec<&MetricsRow> = rows.iter().filter(|r| r.method == m.tag() && r.iters == b).collect();
            let mean = sel.iter().map(|r| r.report.l1).sum::<f64>() / sel.len().max(1) as f64;
            eprintln!("{m}@{b}: mean l1 {mean:.6e} over {} instances", sel.len());
        }
    }
    write(&ctx.out_dir()?.join("sweep.csv"), &metrics_csv(&rows))
}

fn cmd_ablate(ctx: &Ctx, flag: &str, seeds: Option<&str>, inst: &InstanceArgs, t: &TrainArgs) -> CliResult<()> {
    let base = ctx.train_config(inst, t)?;
    let seeds: Vec<u64> = match seeds {
        Some(s) => parse_list(s, "seed")?,
        None => (0..3).map(|k| ctx.seed + k).collect(),
    };
    let (mut on, mut off) = (base.clone(), base);
    match flag {
        "geometric" => {
            on.use_geometric = true;
            off.use_geometric = false;
        }
        "groupnorm" => {
            on.use_groupnorm = true;
            off.use_groupnorm = false;
        }
        other => return Err(CliError::Usage(format!("unknown ablation flag {other:?} (geometric or groupnorm)"))),
    }
    let rows = ablate(&[on, off], &seeds)?;
    for r in &rows {
        eprintln!("{}: final held-out l1 {:.6e} +- {:.6e}", r.label, r.mean_l1, r.std_l1);
    }
    write(&ctx.out_dir()?.join("ablation.csv"), &ablation_csv(&rows))
}

fn cmd_gradcheck(
    ctx: &Ctx,
    directions: Option<usize>,
    views: Option<usize>,
    points: Option<usize>,
    step: Option<f64>,
) -> CliResult<()> {
    let c = &ctx.cfg;
    let d = GradcheckConfig::default();
    let mut text = String::new();
    let mut worst: f64 = 0.0;
    for groupnorm in [true, false] {
        let report = gradcheck(&GradcheckConfig {
            views: views.or_else(|| c.get("views")).unwrap_or(d.views),
            points: points.or_else(|| c.get("points")).unwrap_or(d.points),
            directions: c.pick(directions, "directions", d.directions),
            groupnorm,
            lambda_geom: c.pick(None, "lambda_geom", d.lambda_geom),
            step: step.unwrap_or(d.step),
            seed: ctx.seed,
        })?;
        worst = worst.max(report.max_rel_error());
        text.push_str(&report.to_text());
    }
    let verdict = if worst <= GRADCHECK_TOL { "PASS" } else { "FAIL" };
    text.push_str(&format!("max_rel_error={worst:.3e} tolerance={GRADCHECK_TOL:.0e} {verdict}\n"));
    print!("{text}");
    if ctx.out.is_some() {
        write(&ctx.out_dir()?.join("gradcheck.txt"), &text)?;
    }
    if worst <= GRADCHECK_TOL {
        Ok(())
    } else {
        Err(CliError::Runtime(format!("gradient check failed: {worst:.3e} > {GRADCHECK_TOL:.0e}")))
    }
}
