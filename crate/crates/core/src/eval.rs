//! Evaluation of universal and baseline models on individual datasets.
//!
//! Universal posteriors are projected onto a dataset's classes plus a void
//! class that absorbs every universal class the dataset does not label.
//! Baselines trained over a concatenated label space are scored either by
//! plain argmax (foreign winners count as void) or by post-inference
//! mapping, which adds the posteriors of intersecting foreign classes to
//! each native class.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::taxonomy::{AtomSet, Collection, LabelRef, MappingSet, TaxonomyArtifacts};

/// Distribution over a dataset's classes followed by the void class.
pub fn project_with_void(post: &[f64], dataset: usize, maps: &MappingSet) -> Result<Vec<f64>> {
    let classes = maps
        .maps
        .get(dataset)
        .ok_or_else(|| Error::NotFound(format!("dataset {dataset}")))?;
    let mut out = Vec::with_capacity(classes.len() + 1);
    let mut covered = vec![false; post.len()];
    for mapped in classes {
        let mut s = 0.0;
        for &u in mapped {
            let p = *post
                .get(u)
                .ok_or_else(|| Error::InvalidInput(format!("mapped class {u} outside {} posteriors", post.len())))?;
            s += p;
            covered[u] = true;
        }
        out.push(s);
    }
    out.push(post.iter().zip(&covered).filter(|(_, c)| !**c).map(|(p, _)| p).sum());
    Ok(out)
}

/// [`project_with_void`] over the trainable classes of `art`, addressed by
/// dataset name.
pub fn project_dataset(art: &TaxonomyArtifacts, post: &[f64], dataset: &str) -> Result<Vec<f64>> {
    let d = art.collection.dataset_index(dataset)?;
    project_with_void(post, d, &art.logit_mappings())
}

/// A dataset-level prediction: one of the dataset's classes or void.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Prediction {
    Class(usize),
    Void,
}

/// Argmax of a projected distribution whose last entry is void. Ties go to
/// the lowest index, so a class beats void at equal score.
pub fn predict_projected(scores: &[f64]) -> Prediction {
    let best = argmax(scores);
    if best + 1 == scores.len() {
        Prediction::Void
    } else {
        Prediction::Class(best)
    }
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// One output of a baseline model: a dataset class, or several identical
/// classes of different datasets merged into one.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpaceEntry {
    pub name: String,
    pub atoms: AtomSet,
    pub labels: Vec<LabelRef>,
}

/// The flat label space of a baseline model.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSpace {
    pub entries: Vec<SpaceEntry>,
}

impl LabelSpace {
    /// Every dataset class is its own output.
    pub fn naive_concat(collection: &Collection) -> Self {
        let entries = collection
            .labels()
            .map(|l| SpaceEntry {
                name: collection.label_name(l),
                atoms: collection.class_atoms(l).clone(),
                labels: vec![l],
            })
            .collect();
        LabelSpace { entries }
    }

    /// Classes with identical atom sets share one output, placed at the
    /// first occurrence in dataset order.
    pub fn partial_merge(collection: &Collection) -> Self {
        let mut entries: Vec<SpaceEntry> = Vec::new();
        for l in collection.labels() {
            let atoms = collection.class_atoms(l);
            if let Some(e) = entries.iter_mut().find(|e| &e.atoms == atoms) {
                e.labels.push(l);
                e.name = format!("{}={}", e.name, collection.label_name(l));
            } else {
                entries.push(SpaceEntry {
                    name: collection.label_name(l),
                    atoms: atoms.clone(),
                    labels: vec![l],
                });
            }
        }
        LabelSpace { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The output that carries `label`.
    pub fn entry_of(&self, label: LabelRef) -> Option<usize> {
        self.entries.iter().position(|e| e.labels.contains(&label))
    }

    /// Outputs carrying no class of dataset `d`.
    pub fn is_foreign(&self, entry: usize, d: usize) -> bool {
        self.entries[entry].labels.iter().all(|l| l.dataset != d)
    }

    fn native_entries(&self, collection: &Collection, d: usize) -> Result<Vec<usize>> {
        (0..collection.dataset(d).classes.len())
            .map(|c| {
                self.entry_of(LabelRef::new(d, c))
                    .ok_or_else(|| Error::NotFound(format!("no output for {}", collection.label_name(LabelRef::new(d, c)))))
            })
            .collect()
    }

    fn check(&self, post: &[f64]) -> Result<()> {
        if post.len() != self.entries.len() {
            return Err(Error::InvalidInput(format!(
                "posterior has {} entries, label space has {}",
                post.len(),
                self.entries.len()
            )));
        }
        Ok(())
    }
}

/// Default scoring: argmax over the whole baseline label space; a foreign
/// winner is a void prediction.
pub fn default_prediction(space: &LabelSpace, post: &[f64], d: usize) -> Result<Prediction> {
    space.check(post)?;
    let best = argmax(post);
    Ok(match space.entries[best].labels.iter().find(|l| l.dataset == d) {
        Some(l) => Prediction::Class(l.class),
        None => Prediction::Void,
    })
}

/// Post-inference scores for the classes of dataset `d`.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalmapScores {
    pub classes: Vec<f64>,
    /// Mass of foreign outputs that intersect no class of the dataset.
    pub void: f64,
}

impl EvalmapScores {
    /// Argmax over classes then void; lowest class id on ties.
    pub fn predict(&self) -> Prediction {
        let mut all = self.classes.clone();
        all.push(self.void);
        predict_projected(&all)
    }
}

/// `S(c) = P(c) + Σ P(f)` over foreign outputs `f` intersecting `c`. A
/// foreign output that intersects two native classes counts for both.
pub fn post_inference_score(space: &LabelSpace, collection: &Collection, post: &[f64], d: usize) -> Result<EvalmapScores> {
    space.check(post)?;
    if d >= collection.datasets().len() {
        return Err(Error::NotFound(format!("dataset {d}")));
    }
    let native = space.native_entries(collection, d)?;
    let mut classes: Vec<f64> = native.iter().map(|&e| post[e]).collect();
    let mut void = 0.0;
    for (e, entry) in space.entries.iter().enumerate() {
        if !space.is_foreign(e, d) {
            continue;
        }
        let mut hit = false;
        for (c, &n) in native.iter().enumerate() {
            if entry.atoms.intersects(&space.entries[n].atoms) {
                classes[c] += post[e];
                hit = true;
            }
        }
        if !hit {
            void += post[e];
        }
    }
    Ok(EvalmapScores { classes, void })
}

/// Confusion counts of one dataset: rows are ground-truth classes, columns
/// are predicted classes followed by void.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionAccumulator {
    pub classes: usize,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionAccumulator {
    pub fn new(classes: usize) -> Self {
        ConfusionAccumulator {
            classes,
            counts: vec![vec![0; classes + 1]; classes],
        }
    }

    pub fn update(&mut self, gt: usize, pred: Prediction) -> Result<()> {
        let col = match pred {
            Prediction::Class(c) if c < self.classes => c,
            Prediction::Class(c) => return Err(Error::InvalidInput(format!("predicted class {c} out of range"))),
            Prediction::Void => self.classes,
        };
        let row = self
            .counts
            .get_mut(gt)
            .ok_or_else(|| Error::InvalidInput(format!("ground-truth class {gt} out of range")))?;
        row[col] += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: &ConfusionAccumulator) -> Result<()> {
        if other.classes != self.classes {
            return Err(Error::InvalidInput("cannot merge accumulators of different sizes".into()));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Per-class IoU (`None` for classes neither in the ground truth nor
    /// predicted) and their mean. Void predictions only add false negatives.
    pub fn miou(&self) -> IouSummary {
        let k = self.classes;
        let per_class: Vec<Option<f64>> = (0..k)
            .map(|c| {
                let tp = self.counts[c][c];
                let fn_ = self.counts[c].iter().sum::<u64>() - tp;
                let fp = (0..k).filter(|&r| r != c).map(|r| self.counts[r][c]).sum::<u64>();
                let denom = tp + fp + fn_;
                (denom > 0).then(|| tp as f64 / denom as f64)
            })
            .collect();
        let present: Vec<f64> = per_class.iter().flatten().copied().collect();
        let mean = if present.is_empty() {
            0.0
        } else {
            present.iter().sum::<f64>() / present.len() as f64
        };
        let total = self.total();
        let void = self.counts.iter().map(|r| r[k]).sum::<u64>();
        let correct = (0..k).map(|c| self.counts[c][c]).sum::<u64>();
        IouSummary {
            per_class,
            miou: mean,
            void_fraction: if total == 0 { 0.0 } else { void as f64 / total as f64 },
            accuracy: if total == 0 { 0.0 } else { correct as f64 / total as f64 },
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IouSummary {
    pub per_class: Vec<Option<f64>>,
    pub miou: f64,
    pub void_fraction: f64,
    pub accuracy: f64,
}

/// JSON evaluation report of one dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset: String,
    pub scoring: String,
    pub samples: u64,
    pub classes: Vec<ClassIou>,
    pub miou: f64,
    pub accuracy: f64,
    pub void_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassIou {
    pub class: String,
    pub iou: Option<f64>,
}

impl EvalReport {
    pub fn new(collection: &Collection, d: usize, scoring: &str, acc: &ConfusionAccumulator) -> Self {
        let s = acc.miou();
        EvalReport {
            dataset: collection.dataset(d).name.clone(),
            scoring: scoring.to_string(),
            samples: acc.total(),
            classes: collection
                .dataset(d)
                .classes
                .iter()
                .zip(&s.per_class)
                .map(|(c, iou)| ClassIou {
                    class: c.name.clone(),
                    iou: *iou,
                })
                .collect(),
            miou: s.miou,
            accuracy: s.accuracy,
            void_fraction: s.void_fraction,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taxonomy::fixtures;

    #[test]
    fn void_mass() {
        // dataset covers universal 0..3 of 4
        let maps = MappingSet {
            maps: vec![vec![vec![0, 1], vec![2]]],
        };
        let p = project_with_void(&[0.25; 4], 0, &maps).unwrap();
        assert_eq!(p, vec![0.5, 0.25, 0.25]);
        let full = MappingSet {
            maps: vec![vec![vec![0, 1], vec![2, 3]]],
        };
        assert_eq!(project_with_void(&[0.1, 0.2, 0.3, 0.4], 0, &full).unwrap()[2], 0.0);
        assert!(matches!(project_with_void(&[1.0], 3, &full), Err(Error::NotFound(_))));
    }

    #[test]
    fn projection_by_name() {
        let art = TaxonomyArtifacts::from_collection(fixtures::vehicles());
        // truck, pickup, car, van
        let p = project_dataset(&art, &[0.1, 0.2, 0.3, 0.4], "Vistas").unwrap();
        assert!((p[0] - 0.9).abs() < 1e-12);
        assert!((p[1] - 0.1).abs() < 1e-12);
        assert!(project_dataset(&art, &[0.25; 4], "Nope").is_err());
    }

    fn sky_collection() -> Collection {
        Collection::from_tables(&[
            ("Vistas", &[("sky", &["sky"]), ("road", &["road"])]),
            ("COCO", &[("sky", &["sky"]), ("grass", &["grass"])]),
        ])
        .unwrap()
    }

    #[test]
    fn foreign_sky_counts_as_native_sky() {
        let c = sky_collection();
        let space = LabelSpace::naive_concat(&c);
        // Vistas.sky, Vistas.road, COCO.sky, COCO.grass
        let post = [0.1, 0.15, 0.7, 0.05];
        let s = post_inference_score(&space, &c, &post, 0).unwrap();
        assert!((s.classes[0] - 0.8).abs() < 1e-12);
        assert_eq!(s.classes[1], 0.15);
        assert_eq!(s.void, 0.05);
        assert_eq!(s.predict(), Prediction::Class(0));
        assert_eq!(default_prediction(&space, &post, 0).unwrap(), Prediction::Void);
    }

    #[test]
    fn disjoint_taxonomies_keep_native_scores() {
        let c = Collection::from_tables(&[("A", &[("x", &["x"]), ("y", &["y"])]), ("B", &[("z", &["z"])])]).unwrap();
        let space = LabelSpace::naive_concat(&c);
        let s = post_inference_score(&space, &c, &[0.2, 0.3, 0.5], 0).unwrap();
        assert_eq!(s.classes, vec![0.2, 0.3]);
        assert_eq!(s.void, 0.5);
    }

    #[test]
    fn two_datasets_three_classes_by_hand() {
        // A: x={1,2}, y={3}, z={4}; B: p={2,3}, q={4,5}
        let c = Collection::from_tables(&[
            ("A", &[("x", &["1", "2"]), ("y", &["3"]), ("z", &["4"])]),
            ("B", &[("p", &["2", "3"]), ("q", &["4", "5"])]),
        ])
        .unwrap();
        let space = LabelSpace::naive_concat(&c);
        let post = [0.1, 0.2, 0.05, 0.4, 0.25];
        let s = post_inference_score(&space, &c, &post, 0).unwrap();
        // p intersects x and y; q intersects z
        assert_eq!(s.classes, vec![0.1 + 0.4, 0.2 + 0.4, 0.05 + 0.25]);
        assert_eq!(s.void, 0.0);
        assert_eq!(s.predict(), Prediction::Class(1));
        let b = post_inference_score(&space, &c, &post, 1).unwrap();
        assert_eq!(b.classes, vec![0.4 + 0.1 + 0.2, 0.25 + 0.05]);
    }

    #[test]
    fn partial_merge_shares_equal_classes() {
        let c = sky_collection();
        let space = LabelSpace::partial_merge(&c);
        assert_eq!(space.len(), 3);
        assert_eq!(space.entries[0].name, "Vistas.sky=COCO.sky");
        assert_eq!(space.entry_of(LabelRef::new(1, 0)), Some(0));
        assert_eq!(default_prediction(&space, &[0.6, 0.1, 0.3], 1).unwrap(), Prediction::Class(0));
        assert_eq!(default_prediction(&space, &[0.2, 0.5, 0.3], 1).unwrap(), Prediction::Void);
    }

    #[test]
    fn void_predictions_are_false_negatives_only() {
        let mut acc = ConfusionAccumulator::new(2);
        for i in 0..10 {
            acc.update(0, if i < 8 { Prediction::Class(0) } else { Prediction::Void }).unwrap();
        }
        let s = acc.miou();
        assert_eq!(s.per_class, vec![Some(0.8), None]);
        assert_eq!(s.miou, 0.8);
        assert_eq!(s.void_fraction, 0.2);
    }

    #[test]
    fn cross_class_error() {
        let mut acc = ConfusionAccumulator::new(2);
        for (g, p) in [(0, 0), (0, 0), (0, 1), (1, 1)] {
            acc.update(g, Prediction::Class(p)).unwrap();
        }
        let s = acc.miou();
        assert_eq!(s.per_class, vec![Some(2.0 / 3.0), Some(0.5)]);
        assert!(acc.update(2, Prediction::Void).is_err());
        assert!(acc.update(0, Prediction::Class(5)).is_err());
    }

    #[test]
    fn predicted_only_class_enters_the_mean() {
        let mut acc = ConfusionAccumulator::new(3);
        acc.update(0, Prediction::Class(0)).unwrap();
        acc.update(0, Prediction::Class(1)).unwrap();
        let s = acc.miou();
        assert_eq!(s.per_class, vec![Some(0.5), Some(0.0), None]);
        assert_eq!(s.miou, 0.25);
    }

    #[test]
    fn ties_prefer_lowest_class_over_void() {
        assert_eq!(predict_projected(&[0.5, 0.5]), Prediction::Class(0));
        assert_eq!(predict_projected(&[0.2, 0.3, 0.5]), Prediction::Void);
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
    }
}
