use serde::{Deserialize, Serialize};

use super::data::{TestSample, ToyProblem};
use super::train::{dataset_label, Scoring, TrainConfig, TrainOutcome, TrainedModel};
use crate::error::{Error, Result};
use crate::eval::{ConfusionAccumulator, EvalReport};

/// Universal class predicted for every test sample, in order.
pub fn predict_all(model: &TrainedModel, problem: &ToyProblem, test: &[TestSample]) -> Result<Vec<usize>> {
    test.iter().map(|s| model.predict_universal(problem, s.x)).collect()
}

/// Share of `samples` (test indices) whose prediction is `class`.
pub fn share(predictions: &[usize], test: &[TestSample], samples: impl Fn(&TestSample) -> bool, class: usize) -> f64 {
    let (hit, total) = test
        .iter()
        .zip(predictions)
        .filter(|(s, _)| samples(s))
        .fold((0usize, 0usize), |(h, t), (_, &p)| (h + usize::from(p == class), t + 1));
    if total == 0 {
        0.0
    } else {
        hit as f64 / total as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub name: String,
    /// Recall on held-out samples of the class; `None` without samples.
    pub accuracy: Option<f64>,
    /// Share of all held-out predictions that go to the class.
    pub frequency: f64,
    pub dead: bool,
}

/// Held-out universal accuracy with per-class statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub accuracy: f64,
    pub classes: Vec<ClassStats>,
}

pub const DEAD_FREQUENCY: f64 = 0.01;

/// Prediction frequency of every universal class over the test set;
/// classes below one percent are dead.
pub fn dead_logit_report(model: &TrainedModel, problem: &ToyProblem, test: &[TestSample]) -> Result<AccuracyReport> {
    if test.is_empty() {
        return Err(Error::InvalidInput("empty test set".into()));
    }
    let pred = predict_all(model, problem, test)?;
    Ok(accuracy_report(problem, test, &pred))
}

pub fn accuracy_report(problem: &ToyProblem, test: &[TestSample], pred: &[usize]) -> AccuracyReport {
    let tax = &problem.art.taxonomy;
    let n = test.len() as f64;
    let correct = test.iter().zip(pred).filter(|(s, &p)| s.universal == p).count();
    let classes = tax
        .classes
        .iter()
        .map(|u| {
            let frequency = pred.iter().filter(|&&p| p == u.id).count() as f64 / n;
            let has = test.iter().any(|s| s.universal == u.id);
            ClassStats {
                name: u.display_name.clone(),
                accuracy: has.then(|| share(pred, test, |s| s.universal == u.id, u.id)),
                frequency,
                dead: frequency < DEAD_FREQUENCY,
            }
        })
        .collect();
    AccuracyReport {
        accuracy: correct as f64 / n,
        classes,
    }
}

/// Confusion matrix of a model on the test samples labeled by dataset `d`.
pub fn evaluate_dataset(
    model: &TrainedModel,
    problem: &ToyProblem,
    test: &[TestSample],
    d: usize,
    scoring: Scoring,
) -> Result<ConfusionAccumulator> {
    let mut acc = ConfusionAccumulator::new(problem.art.collection.dataset(d).classes.len());
    for s in test {
        if let Some(gt) = dataset_label(problem, s.atom, d) {
            acc.update(gt.class, model.predict_dataset(problem, s.x, d, scoring)?)?;
        }
    }
    Ok(acc)
}

pub fn eval_report(
    model: &TrainedModel,
    problem: &ToyProblem,
    test: &[TestSample],
    d: usize,
    scoring: Scoring,
) -> Result<EvalReport> {
    let acc = evaluate_dataset(model, problem, test, d, scoring)?;
    let name = match scoring {
        Scoring::Default => "default",
        Scoring::PostInference => "post-inference",
    };
    Ok(EvalReport::new(&problem.art.collection, d, name, &acc))
}

/// Summary written next to a trained model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub config: TrainConfig,
    pub final_loss: f64,
    pub train_samples: usize,
    pub test_samples: usize,
    pub accuracy: f64,
    pub classes: Vec<ClassStats>,
}

impl TrainReport {
    pub fn new(config: &TrainConfig, outcome: &TrainOutcome, train_samples: usize, acc: AccuracyReport, test_samples: usize) -> Self {
        TrainReport {
            config: config.clone(),
            final_loss: *outcome.trace.last().expect("at least one epoch"),
            train_samples,
            test_samples,
            accuracy: acc.accuracy,
            classes: acc.classes,
        }
    }
}

/// A regular grid, `nx` points from `xmin` to `xmax` and `ny` from `ymin`
/// to `ymax`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Grid {
    /// Parses `xmin,xmax,ymin,ymax,nx,ny`.
    pub fn parse(text: &str) -> Result<Self> {
        let parts: Vec<&str> = text.split(',').map(str::trim).collect();
        let bad = || Error::InvalidInput(format!("grid `{text}` must be xmin,xmax,ymin,ymax,nx,ny"));
        if parts.len() != 6 {
            return Err(bad());
        }
        let f = |i: usize| parts[i].parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(bad);
        let n = |i: usize| parts[i].parse::<usize>().ok().filter(|&v| v > 0).ok_or_else(bad);
        Ok(Grid {
            xmin: f(0)?,
            xmax: f(1)?,
            ymin: f(2)?,
            ymax: f(3)?,
            nx: n(4)?,
            ny: n(5)?,
        })
    }

    fn coord(lo: f64, hi: f64, n: usize, i: usize) -> f64 {
        if n == 1 {
            lo
        } else {
            lo + (hi - lo) * i as f64 / (n - 1) as f64
        }
    }

    /// Points in row-major order: `y` outer, `x` inner.
    pub fn points(&self) -> impl Iterator<Item = [f64; 2]> + '_ {
        (0..self.ny).flat_map(move |j| {
            (0..self.nx).map(move |i| {
                [
                    Self::coord(self.xmin, self.xmax, self.nx, i),
                    Self::coord(self.ymin, self.ymax, self.ny, j),
                ]
            })
        })
    }
}

/// `x,y,class,name` for every grid point, where `class` is the argmax
/// over the model's own outputs.
pub fn decision_surface_csv(model: &TrainedModel, names: &[String], grid: &Grid) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(["x", "y", "class", "name"]).expect("in-memory write");
    for p in grid.points() {
        let k = model.argmax_output(p);
        w.write_record([p[0].to_string(), p[1].to_string(), k.to_string(), names[k].clone()])
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

/// `epoch,loss` for every epoch.
pub fn trace_csv(trace: &[f64]) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(["epoch", "loss"]).expect("in-memory write");
    for (e, l) in trace.iter().enumerate() {
        w.write_record([e.to_string(), l.to_string()]).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}
