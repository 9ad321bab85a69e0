use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::data::{LabeledSample, ToyData, ToyProblem};
use super::mlp::{Adam, Mlp, MlpFile};
use crate::error::{Error, Result};
use crate::eval::{argmax, default_prediction, post_inference_score, predict_projected, project_with_void, LabelSpace, Prediction};
use crate::loss::{aggregate_mask_max_over, nll, nll_plus_with_grad, two_head_joint, universal_posteriors, MaskStack};
use crate::taxonomy::LabelRef;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    UniversalNllPlus,
    UniversalNllMax,
    NaiveConcat,
    PartialMerge,
    PerDatasetHeads,
    Oracle,
}

impl Mode {
    pub const ALL: [Mode; 6] = [
        Mode::UniversalNllPlus,
        Mode::UniversalNllMax,
        Mode::NaiveConcat,
        Mode::PartialMerge,
        Mode::PerDatasetHeads,
        Mode::Oracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mode::UniversalNllPlus => "universal-nll-plus",
            Mode::UniversalNllMax => "universal-nll-max",
            Mode::NaiveConcat => "naive-concat",
            Mode::PartialMerge => "partial-merge",
            Mode::PerDatasetHeads => "per-dataset-heads",
            Mode::Oracle => "oracle",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown mode `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub mode: Mode,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    pub hidden: usize,
}

impl TrainConfig {
    pub fn new(mode: Mode, seed: u64) -> Self {
        TrainConfig {
            mode,
            epochs: 2000,
            lr: 1e-3,
            seed,
            hidden: 64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidInput("epochs must be positive".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidInput("learning rate must be positive".into()));
        }
        if self.hidden == 0 {
            return Err(Error::InvalidInput("hidden width must be positive".into()));
        }
        Ok(())
    }
}

/// What the logits of a model stand for.
#[derive(Clone, Debug, PartialEq)]
pub enum OutputSpace {
    /// One logit per listed universal class id.
    Universal(Vec<usize>),
    /// One logit per entry of a flat baseline label space.
    Flat(LabelSpace),
    /// Per-dataset class heads over the naive concatenation, followed by a
    /// dataset-recognition head.
    Heads(LabelSpace, usize),
}

impl OutputSpace {
    pub fn for_mode(mode: Mode, problem: &ToyProblem) -> Self {
        let art = &problem.art;
        match mode {
            Mode::UniversalNllPlus | Mode::UniversalNllMax => OutputSpace::Universal(art.active()),
            Mode::Oracle => OutputSpace::Universal((0..art.taxonomy.len()).collect()),
            Mode::NaiveConcat => OutputSpace::Flat(LabelSpace::naive_concat(&art.collection)),
            Mode::PartialMerge => OutputSpace::Flat(LabelSpace::partial_merge(&art.collection)),
            Mode::PerDatasetHeads => {
                OutputSpace::Heads(LabelSpace::naive_concat(&art.collection), art.collection.datasets().len())
            }
        }
    }

    pub fn logits(&self) -> usize {
        match self {
            OutputSpace::Universal(ids) => ids.len(),
            OutputSpace::Flat(space) => space.len(),
            OutputSpace::Heads(space, d) => space.len() + d,
        }
    }

    /// Name of every logit.
    pub fn names(&self, problem: &ToyProblem) -> Vec<String> {
        let c = &problem.art.collection;
        match self {
            OutputSpace::Universal(ids) => ids
                .iter()
                .map(|&u| problem.art.taxonomy.classes[u].display_name.clone())
                .collect(),
            OutputSpace::Flat(space) => space.entries.iter().map(|e| e.name.clone()).collect(),
            OutputSpace::Heads(space, _) => space
                .entries
                .iter()
                .map(|e| e.name.clone())
                .chain(c.datasets().iter().map(|d| format!("dataset:{}", d.name)))
                .collect(),
        }
    }

    /// Range of logits of the class head of dataset `d`.
    fn head(space: &LabelSpace, d: usize) -> std::ops::Range<usize> {
        let start = space.entries.iter().position(|e| e.labels[0].dataset == d).unwrap_or(space.len());
        let end = space.entries.iter().rposition(|e| e.labels[0].dataset == d).map_or(start, |i| i + 1);
        start..end
    }

    /// Distribution over the label space of the model: universal classes,
    /// flat entries, or the joint over concatenated dataset classes.
    pub fn posterior(&self, logits: &[f64]) -> Result<Vec<f64>> {
        match self {
            OutputSpace::Universal(_) | OutputSpace::Flat(_) => universal_posteriors(logits),
            OutputSpace::Heads(space, datasets) => {
                let pd = universal_posteriors(&logits[space.len()..space.len() + datasets])?;
                let mut joint = vec![0.0; space.len()];
                for (d, &p) in pd.iter().enumerate() {
                    let r = Self::head(space, d);
                    let pc = universal_posteriors(&logits[r.clone()])?;
                    for (k, q) in r.zip(pc) {
                        joint[k] = two_head_joint(q, p)?;
                    }
                }
                Ok(joint)
            }
        }
    }
}

enum Target {
    Mapped(Vec<usize>),
    Max(Vec<usize>),
    Class(usize),
    Heads { class: usize, dataset: usize },
}

fn targets(mode: Mode, output: &OutputSpace, problem: &ToyProblem, samples: &[&LabeledSample]) -> Vec<Target> {
    let art = &problem.art;
    let maps = match output {
        OutputSpace::Universal(ids) => Some(art.mappings.reindexed(ids)),
        _ => None,
    };
    samples
        .iter()
        .map(|s| match (mode, output) {
            (Mode::UniversalNllPlus, _) => Target::Mapped(maps.as_ref().expect("universal").get(s.label).to_vec()),
            (Mode::UniversalNllMax, _) => Target::Max(maps.as_ref().expect("universal").get(s.label).to_vec()),
            (Mode::Oracle, OutputSpace::Universal(ids)) => {
                Target::Class(ids.iter().position(|&u| u == s.universal).expect("oracle covers every class"))
            }
            (_, OutputSpace::Flat(space)) => Target::Class(space.entry_of(s.label).expect("every label has an entry")),
            (_, OutputSpace::Heads(space, _)) => Target::Heads {
                class: space.entry_of(s.label).expect("every label has an entry"),
                dataset: s.label.dataset,
            },
            _ => unreachable!("mode and output space disagree"),
        })
        .collect()
}

/// Loss of one sample and its gradient with respect to the logits.
fn sample_loss(target: &Target, output: &OutputSpace, logits: &[f64], grad: &mut [f64]) -> Result<f64> {
    match target {
        Target::Mapped(mapped) => {
            let (l, g) = nll_plus_with_grad(logits, mapped)?;
            grad.copy_from_slice(&g);
            Ok(l)
        }
        Target::Max(mapped) => {
            // −ln max_{u ∈ m(y)} p(u); the max is taken on a one-pixel stack
            let p = universal_posteriors(logits)?;
            let stack = MaskStack::new(p.len(), 1, 1, p.clone())?;
            let winner = aggregate_mask_max_over(&stack, mapped)?.argmax[0];
            softmax_nll(logits, winner, grad)
        }
        Target::Class(k) => softmax_nll(logits, *k, grad),
        Target::Heads { class, dataset } => {
            let OutputSpace::Heads(space, datasets) = output else {
                unreachable!("head targets need a head output");
            };
            let d = *dataset;
            let r = OutputSpace::head(space, d);
            let lc = softmax_nll(&logits[r.clone()], class - r.start, &mut grad[r.clone()])?;
            let dr = space.len()..space.len() + datasets;
            let ld = softmax_nll(&logits[dr.clone()], d, &mut grad[dr])?;
            Ok(lc + ld)
        }
    }
}

fn softmax_nll(logits: &[f64], target: usize, grad: &mut [f64]) -> Result<f64> {
    let p = universal_posteriors(logits)?;
    for (g, q) in grad.iter_mut().zip(&p) {
        *g = *q;
    }
    grad[target] -= 1.0;
    nll(logits, target)
}

/// A trained model with the meaning of its logits.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainedModel {
    pub mode: Mode,
    pub output: OutputSpace,
    pub mlp: Mlp,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub model: TrainedModel,
    /// Mean training loss before every update.
    pub trace: Vec<f64>,
}

pub fn train(config: &TrainConfig, problem: &ToyProblem, data: &ToyData) -> Result<TrainOutcome> {
    config.validate()?;
    let output = OutputSpace::for_mode(config.mode, problem);
    let samples: Vec<&LabeledSample> = data.train_samples().collect();
    if samples.is_empty() {
        return Err(Error::InvalidSpec("no training samples".into()));
    }
    let targets = targets(config.mode, &output, problem, &samples);
    let n = samples.len();
    let k = output.logits();
    let x = Array2::from_shape_fn((n, 2), |(i, j)| samples[i].x[j]);
    let mut mlp = Mlp::new(&[2, config.hidden, config.hidden, k], config.seed);
    let mut opt = Adam::new(config.lr, mlp.params().count());
    let mut trace = Vec::with_capacity(config.epochs);
    let mut dlogits = Array2::zeros((n, k));
    for epoch in 0..config.epochs {
        let cache = mlp.forward_cached(&x);
        let mut total = 0.0;
        for (i, t) in targets.iter().enumerate() {
            let row = cache.logits.row(i);
            let logits = row.as_slice().expect("row-major logits");
            let mut g = vec![0.0; k];
            total += sample_loss(t, &output, logits, &mut g)?;
            for (dst, v) in dlogits.row_mut(i).iter_mut().zip(g) {
                *dst = v / n as f64;
            }
        }
        let loss = total / n as f64;
        if !loss.is_finite() {
            return Err(Error::TrainingDiverged { epoch, loss });
        }
        trace.push(loss);
        let grads = mlp.backward(&cache, &dlogits);
        opt.step(&mut mlp, &grads);
        if !mlp.is_finite() {
            return Err(Error::TrainingDiverged { epoch, loss: f64::NAN });
        }
    }
    Ok(TrainOutcome {
        model: TrainedModel {
            mode: config.mode,
            output,
            mlp,
        },
        trace,
    })
}

/// How a baseline is scored on a dataset.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scoring {
    Default,
    PostInference,
}

impl TrainedModel {
    pub fn posterior(&self, x: [f64; 2]) -> Result<Vec<f64>> {
        self.output.posterior(&self.mlp.logits(x))
    }

    /// Universal class read out of the model. Baselines score each
    /// universal class by the summed posteriors of the outputs that
    /// intersect it.
    pub fn predict_universal(&self, problem: &ToyProblem, x: [f64; 2]) -> Result<usize> {
        let post = self.posterior(x)?;
        Ok(match &self.output {
            OutputSpace::Universal(ids) => ids[argmax(&post)],
            OutputSpace::Flat(space) | OutputSpace::Heads(space, _) => {
                let scores: Vec<f64> = problem
                    .art
                    .taxonomy
                    .classes
                    .iter()
                    .map(|u| {
                        space
                            .entries
                            .iter()
                            .zip(&post)
                            .filter(|(e, _)| e.atoms.intersects(&u.atoms))
                            .map(|(_, p)| p)
                            .sum()
                    })
                    .collect();
                argmax(&scores)
            }
        })
    }

    /// Prediction in the label space of dataset `d`.
    pub fn predict_dataset(&self, problem: &ToyProblem, x: [f64; 2], d: usize, scoring: Scoring) -> Result<Prediction> {
        let post = self.posterior(x)?;
        match &self.output {
            OutputSpace::Universal(ids) => {
                let maps = problem.art.mappings.reindexed(ids);
                Ok(predict_projected(&project_with_void(&post, d, &maps)?))
            }
            OutputSpace::Flat(space) | OutputSpace::Heads(space, _) => match scoring {
                Scoring::Default => default_prediction(space, &post, d),
                Scoring::PostInference => {
                    Ok(post_inference_score(space, &problem.art.collection, &post, d)?.predict())
                }
            },
        }
    }

    /// Index of the largest logit in the model's own output space.
    pub fn argmax_output(&self, x: [f64; 2]) -> usize {
        argmax(&self.mlp.logits(x))
    }

    pub fn to_file(&self, problem: &ToyProblem) -> ModelFile {
        ModelFile {
            mode: self.mode,
            outputs: self.output.names(problem),
            mlp: self.mlp.to_file(),
        }
    }

    /// Rebuilds a model for `problem`; its output names must match.
    pub fn from_file(file: &ModelFile, problem: &ToyProblem) -> Result<Self> {
        let output = OutputSpace::for_mode(file.mode, problem);
        if output.names(problem) != file.outputs {
            return Err(Error::InvalidInput(format!(
                "model outputs do not match the {} label space of the problem",
                file.mode
            )));
        }
        let mlp = Mlp::from_file(&file.mlp)?;
        if mlp.outputs() != output.logits() || mlp.sizes()[0] != 2 {
            return Err(Error::InvalidInput("network shape does not match its outputs".into()));
        }
        Ok(TrainedModel {
            mode: file.mode,
            output,
            mlp,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub mode: Mode,
    pub outputs: Vec<String>,
    pub mlp: MlpFile,
}

impl ModelFile {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            detail: e.to_string(),
        })
    }
}

/// Ground truth of a test sample in dataset `d`, if `d` labels its atom.
pub fn dataset_label(problem: &ToyProblem, atom: usize, d: usize) -> Option<LabelRef> {
    problem.art.collection.class_containing(d, atom).map(|c| LabelRef::new(d, c))
}
