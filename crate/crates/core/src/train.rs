//! Unsupervised training loop and the ablation driver.
//!
//! Every step draws a fresh synthetic graph from its own seed stream, so a
//! run is a pure function of its config: the graph for step `s` depends only
//! on `(seed, s)`, and resuming from a checkpoint replays the same sequence.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::eval::{self, ErrorReport, SimilarityAccumulator, SimilarityStats};
use crate::geometry::{build_prior, GeometricPrior};
use crate::graph::CorrespondenceGraph;
use crate::losses::{combined_loss, LossConfig};
use crate::nn::{AdamConfig, AdamState, GcnModel, Init, ModelDims, DEFAULT_GROUPS, DEFAULT_HIDDEN, DEFAULT_LAYERS};
use crate::rng::{derive_seed, Domain};
use crate::synth::{gen_graph, gen_scene, GroundTruth, SynthGraphSpec};
use crate::textio;

/// Where training instances come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    /// Correspondence graphs only; no geometric prior.
    Graph,
    /// Full scenes: poses are known, so the epipolar prior is available.
    Scene,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub steps: usize,
    pub adam: AdamConfig,
    pub lambda_geom: f64,
    pub use_geometric: bool,
    pub use_groupnorm: bool,
    pub eval_every: usize,
    /// Number of held-out graphs scored at each evaluation.
    pub eval_graphs: usize,
    pub seed: u64,
    /// Instance template; its seed is ignored.
    pub graph: SynthGraphSpec,
    pub source: Source,
    pub hidden: usize,
    pub groups: usize,
    pub layers: usize,
    pub init: Init,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            steps: 1000,
            adam: AdamConfig::default(),
            lambda_geom: 1.0,
            use_geometric: false,
            use_groupnorm: true,
            eval_every: 100,
            eval_graphs: 10,
            seed: 0,
            graph: SynthGraphSpec::default(),
            source: Source::Graph,
            hidden: DEFAULT_HIDDEN,
            groups: DEFAULT_GROUPS,
            layers: DEFAULT_LAYERS,
            init: Init::Xavier,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::Spec("steps must be >= 1".into()));
        }
        if self.eval_every == 0 {
            return Err(Error::Spec("eval_every must be >= 1".into()));
        }
        if !(self.lambda_geom >= 0.0) {
            return Err(Error::Spec(format!("lambda_geom must be >= 0, got {}", self.lambda_geom)));
        }
        let a = &self.adam;
        if !(a.lr0 > 0.0) || !(0.0..1.0).contains(&a.beta1) || !(0.0..1.0).contains(&a.beta2) {
            return Err(Error::Spec("invalid optimizer settings".into()));
        }
        if !(a.eps > 0.0) || !(a.decay > 0.0 && a.decay <= 1.0) {
            return Err(Error::Spec("invalid optimizer settings".into()));
        }
        self.graph.validate()?;
        if self.source == Source::Scene && self.graph.points < 8 {
            return Err(Error::Spec("scene sources need at least 8 points".into()));
        }
        self.model_dims().validate()
    }

    /// The embedding width equals the generator's point count.
    pub fn universe_dim(&self) -> usize {
        self.graph.points
    }

    pub fn input_dim(&self) -> usize {
        match self.source {
            Source::Graph => self.graph.descriptor_dim,
            Source::Scene => self.graph.descriptor_dim + 2,
        }
    }

    pub fn model_dims(&self) -> ModelDims {
        let skip_at = if self.layers >= 12 {
            vec![self.layers / 2, self.layers]
        } else {
            vec![self.layers]
        };
        ModelDims {
            input_dim: self.input_dim(),
            hidden_dim: self.hidden,
            output_dim: self.universe_dim(),
            layers: self.layers,
            groups: self.groups,
            groupnorm: self.use_groupnorm,
            skip_at,
        }
    }
}

/// One generated training or evaluation instance.
#[derive(Debug, Clone)]
pub struct Instance {
    pub graph: CorrespondenceGraph,
    pub gt: GroundTruth,
    pub prior: Option<GeometricPrior>,
    pub op: DMatrix<f64>,
}

impl Instance {
    pub fn generate(spec: &SynthGraphSpec, source: Source, with_prior: bool) -> Result<Self> {
        let (graph, gt, prior) = match source {
            Source::Graph => {
                let (g, gt) = gen_graph(spec)?;
                (g, gt, None)
            }
            Source::Scene => {
                let (g, scene) = gen_scene(spec)?;
                let prior = if with_prior { Some(build_prior(&scene, &g)?) } else { None };
                (g, scene.ground_truth().clone(), prior)
            }
        };
        let op = graph.augmented_operator();
        Ok(Instance { graph, gt, prior, op })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalRecord {
    pub report: ErrorReport,
    pub stats: SimilarityStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    /// Steps completed, counting from 1.
    pub step: usize,
    pub loss: f64,
    pub cycle: f64,
    /// Weighted geometric term (zero when the prior is unused).
    pub geom: f64,
    /// Learning rate used by this step.
    pub lr: f64,
    pub eval: Option<EvalRecord>,
}

pub const LOG_HEADER: &str = "step,loss,cycle,geom,lr,eval_l1,eval_l2,same_mean,same_std,diff_mean,diff_std";

impl LogRow {
    pub fn to_csv(&self) -> String {
        let r = textio::real;
        let mut line = format!(
            "{},{},{},{},{}",
            self.step,
            r(self.loss),
            r(self.cycle),
            r(self.geom),
            r(self.lr)
        );
        match &self.eval {
            Some(e) => {
                for x in [
                    e.report.l1,
                    e.report.l2,
                    e.stats.same_mean,
                    e.stats.same_std,
                    e.stats.diff_mean,
                    e.stats.diff_std,
                ] {
                    line.push(',');
                    line.push_str(&r(x));
                }
            }
            None => line.push_str(",,,,,,"),
        }
        line
    }
}

pub fn log_csv(rows: &[LogRow]) -> String {
    let mut out = String::from(LOG_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.to_csv());
        out.push('\n');
    }
    out
}

/// Scores a model on held-out instances: error means are averaged over
/// instances, similarity statistics are pooled.
pub fn evaluate(model: &GcnModel, instances: &[Instance]) -> Result<EvalRecord> {
    let mut acc = SimilarityAccumulator::new();
    let (mut l1, mut l2) = (0.0, 0.0);
    for inst in instances {
        let e = model.forward(&inst.op, inst.graph.features())?;
        let s = eval::embedding_similarity(&e, inst.graph.view_of());
        let rep = eval::error_report(&s, &inst.gt.clean_adjacency(), 0.0)?;
        l1 += rep.l1;
        l2 += rep.l2;
        acc.add_embedding(&e, &inst.gt)?;
    }
    let k = instances.len().max(1) as f64;
    Ok(EvalRecord {
        report: ErrorReport {
            l1: l1 / k,
            l2: l2 / k,
            runtime_s: 0.0,
        },
        stats: acc.finish(),
    })
}

pub struct Trainer {
    config: TrainConfig,
    model: GcnModel,
    adam: AdamState,
    held_out: Vec<Instance>,
    log: Vec<LogRow>,
}

impl Trainer {
    pub fn new(config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let model = GcnModel::init(config.model_dims(), config.init, config.seed)?;
        let shapes: Vec<usize> = model.params().iter().map(|p| p.len()).collect();
        let adam = AdamState::new(config.adam, &shapes);
        Self::assemble(config, model, adam)
    }

    /// Continues a run from a saved model and optimizer state; the step
    /// counter is taken from the optimizer.
    pub fn resume(config: TrainConfig, model: GcnModel, adam: AdamState) -> Result<Self> {
        config.validate()?;
        if *model.dims() != config.model_dims() {
            return Err(Error::Spec("checkpoint does not match the configured model".into()));
        }
        let shapes: Vec<usize> = model.params().iter().map(|p| p.len()).collect();
        if adam.m.iter().map(Vec::len).ne(shapes.iter().copied()) {
            return Err(Error::Spec("optimizer state does not match the model".into()));
        }
        Self::assemble(config, model, adam)
    }

    fn assemble(config: TrainConfig, model: GcnModel, adam: AdamState) -> Result<Self> {
        let held_out = (0..config.eval_graphs)
            .map(|k| {
                let spec = config.graph.with_seed(derive_seed(config.seed, Domain::EvalGraph, k as u64));
                Instance::generate(&spec, config.source, false)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Trainer {
            config,
            model,
            adam,
            held_out,
            log: Vec::new(),
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn model(&self) -> &GcnModel {
        &self.model
    }

    pub fn adam(&self) -> &AdamState {
        &self.adam
    }

    pub fn log(&self) -> &[LogRow] {
        &self.log
    }

    pub fn held_out(&self) -> &[Instance] {
        &self.held_out
    }

    pub fn steps_done(&self) -> usize {
        self.adam.t as usize
    }

    pub fn into_parts(self) -> (GcnModel, AdamState, Vec<LogRow>) {
        (self.model, self.adam, self.log)
    }

    /// The training instance of step `s` (0-based).
    pub fn training_instance(&self, s: usize) -> Result<Instance> {
        let spec = self
            .config
            .graph
            .with_seed(derive_seed(self.config.seed, Domain::TrainGraph, s as u64));
        Instance::generate(&spec, self.config.source, self.config.use_geometric)
    }

    /// One optimization step; returns its log row.
    pub fn step(&mut self) -> Result<LogRow> {
        let s = self.steps_done();
        let inst = self.training_instance(s)?;
        let (embedding, cache) = self.model.forward_cached(&inst.op, inst.graph.features())?;
        let prior = if self.config.use_geometric { inst.prior.as_ref() } else { None };
        let loss_cfg = LossConfig {
            lambda_geom: self.config.lambda_geom,
        };
        let loss = combined_loss(inst.graph.adjacency(), prior, &embedding, &loss_cfg)?;
        if !loss.total.is_finite() {
            return Err(Error::NonFiniteLoss { step: s });
        }
        let grads = self.model.backward(&cache, &loss.grad)?;
        let lr = self.adam.lr();
        self.adam.step(self.model.params_mut(), grads.slices())?;
        let step = s + 1;
        let eval = if step.is_multiple_of(self.config.eval_every) || step == self.config.steps {
            Some(evaluate(&self.model, &self.held_out)?)
        } else {
            None
        };
        let geom = if prior.is_some() { self.config.lambda_geom * loss.geom } else { 0.0 };
        let row = LogRow {
            step,
            loss: loss.total,
            cycle: loss.cycle,
            geom,
            lr,
            eval,
        };
        self.log.push(row.clone());
        Ok(row)
    }

    /// Steps until `config.steps` have been taken in total.
    pub fn run(&mut self) -> Result<&[LogRow]> {
        while self.steps_done() < self.config.steps {
            self.step()?;
        }
        Ok(&self.log)
    }

    pub fn final_eval(&self) -> Option<EvalRecord> {
        self.log.iter().rev().find_map(|r| r.eval)
    }
}

/// Trains a fresh model to completion.
pub fn train(config: &TrainConfig) -> Result<(GcnModel, Vec<LogRow>)> {
    let mut t = Trainer::new(config.clone())?;
    t.run()?;
    let (model, _, log) = t.into_parts();
    Ok((model, log))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub label: String,
    pub use_geometric: bool,
    pub use_groupnorm: bool,
    /// Final held-out L1 per seed.
    pub l1: Vec<f64>,
    pub mean_l1: f64,
    pub std_l1: f64,
}

pub const ABLATION_HEADER: &str = "label,use_geometric,use_groupnorm,seeds,mean_l1,std_l1";

impl AblationRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.label,
            self.use_geometric,
            self.use_groupnorm,
            self.l1.len(),
            textio::real(self.mean_l1),
            textio::real(self.std_l1)
        )
    }
}

pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut out = String::from(ABLATION_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.to_csv());
        out.push('\n');
    }
    out
}

fn flags_differ(a: &TrainConfig, b: &TrainConfig) -> usize {
    (a.use_geometric != b.use_geometric) as usize + (a.use_groupnorm != b.use_groupnorm) as usize
}

fn ablation_label(c: &TrainConfig) -> String {
    format!(
        "geom={}_gn={}",
        if c.use_geometric { "on" } else { "off" },
        if c.use_groupnorm { "on" } else { "off" }
    )
}

/// Trains every config once per seed and summarizes the final held-out L1.
/// Configs must agree on everything except exactly one ablation flag.
pub fn ablate(configs: &[TrainConfig], seeds: &[u64]) -> Result<Vec<AblationRow>> {
    if configs.is_empty() || seeds.is_empty() {
        return Err(Error::Spec("ablation needs at least one config and one seed".into()));
    }
    let first = &configs[0];
    for c in &configs[1..] {
        let mut same = c.clone();
        same.use_geometric = first.use_geometric;
        same.use_groupnorm = first.use_groupnorm;
        if same != *first || flags_differ(first, c) != 1 {
            return Err(Error::Spec(
                "ablation configs must differ in exactly one flag".into(),
            ));
        }
    }
    configs
        .iter()
        .map(|c| {
            let l1 = seeds
                .iter()
                .map(|&seed| {
                    let mut cfg = c.clone();
                    cfg.seed = seed;
                    let mut t = Trainer::new(cfg)?;
                    t.run()?;
                    Ok(t.final_eval().map_or(f64::NAN, |e| e.report.l1))
                })
                .collect::<Result<Vec<_>>>()?;
            let k = l1.len() as f64;
            let mean_l1 = l1.iter().sum::<f64>() / k;
            let std_l1 = (l1.iter().map(|x| (x - mean_l1).powi(2)).sum::<f64>() / k).sqrt();
            Ok(AblationRow {
                label: ablation_label(c),
                use_geometric: c.use_geometric,
                use_groupnorm: c.use_groupnorm,
                l1,
                mean_l1,
                std_l1,
            })
        })
        .collect()
}
