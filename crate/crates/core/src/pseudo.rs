//! Universal pseudo-labels from native ground truth and foreign models.
//!
//! A native label may map to several universal classes. Each foreign
//! dataset-specific model votes for candidates through the share of its
//! posterior, restricted to its classes intersecting the ground truth,
//! that falls on the class mapping to the candidate.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::taxonomy::{LabelRef, TaxonomyArtifacts};

/// Posterior of one foreign dataset-specific model for a sample.
#[derive(Clone, Debug, PartialEq)]
pub struct ForeignPrediction {
    pub dataset: usize,
    pub posterior: Vec<f64>,
}

impl ForeignPrediction {
    pub fn new(art: &TaxonomyArtifacts, dataset: usize, posterior: Vec<f64>) -> Result<Self> {
        let ds = art
            .collection
            .datasets()
            .get(dataset)
            .ok_or_else(|| Error::NotFound(format!("dataset {dataset}")))?;
        if posterior.len() != ds.classes.len() {
            return Err(Error::InvalidInput(format!(
                "`{}` has {} classes, posterior has {}",
                ds.name,
                ds.classes.len(),
                posterior.len()
            )));
        }
        if let Some(p) = posterior.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidProbability(*p));
        }
        let total: f64 = posterior.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!("posterior of `{}` sums to {total}", ds.name)));
        }
        Ok(ForeignPrediction { dataset, posterior })
    }
}

/// Conditional score of universal class `u` for a sample labeled `gt`.
///
/// Zero when `gt` does not map to `u` or no class of the foreign dataset
/// maps to `u`. Fails with [`Error::OrthogonalDataset`] when no foreign
/// class intersects `gt`.
pub fn conditional_score(art: &TaxonomyArtifacts, foreign: &ForeignPrediction, gt: LabelRef, u: usize) -> Result<f64> {
    let c = &art.collection;
    let gt_atoms = c.class_atoms(gt);
    let d = foreign.dataset;
    let intersecting: Vec<usize> = (0..c.dataset(d).classes.len())
        .filter(|&j| c.class_atoms(LabelRef::new(d, j)).intersects(gt_atoms))
        .collect();
    if intersecting.is_empty() {
        return Err(Error::OrthogonalDataset(c.dataset(d).name.clone()));
    }
    if !art.mappings.get(gt).contains(&u) {
        return Ok(0.0);
    }
    let Some(i) = (0..c.dataset(d).classes.len()).find(|&i| art.mappings.get(LabelRef::new(d, i)).contains(&u)) else {
        return Ok(0.0);
    };
    let denom: f64 = intersecting.iter().map(|&j| foreign.posterior[j]).sum();
    if denom <= 0.0 {
        return Ok(0.0);
    }
    Ok(foreign.posterior[i] / denom)
}

/// Result of ensembling the foreign models for one sample.
#[derive(Clone, Debug, PartialEq)]
pub struct PseudoLabel {
    pub label: usize,
    /// Candidate universal ids (the mapped set of `gt`) with summed scores.
    pub scores: Vec<(usize, f64)>,
    /// No foreign model assigned positive score to any candidate.
    pub all_zero: bool,
    /// Foreign datasets without any class intersecting `gt`.
    pub orthogonal: Vec<usize>,
}

/// Argmax over the mapped set of `gt` of the summed conditional scores;
/// lowest universal id on ties and when every score is zero.
pub fn ensemble_pseudo_label(art: &TaxonomyArtifacts, foreign: &[ForeignPrediction], gt: LabelRef) -> Result<PseudoLabel> {
    let candidates = art.mappings.get(gt);
    if candidates.is_empty() {
        return Err(Error::UnmappedLabel);
    }
    let mut scores: Vec<(usize, f64)> = candidates.iter().map(|&u| (u, 0.0)).collect();
    let mut orthogonal = Vec::new();
    for f in foreign {
        if f.dataset == gt.dataset {
            return Err(Error::InvalidInput(format!(
                "`{}` is the native dataset, not a foreign one",
                art.collection.dataset(f.dataset).name
            )));
        }
        for (u, s) in scores.iter_mut() {
            match conditional_score(art, f, gt, *u) {
                Ok(v) => *s += v,
                Err(Error::OrthogonalDataset(_)) => {
                    if !orthogonal.contains(&f.dataset) {
                        orthogonal.push(f.dataset);
                    }
                }
                Err(e) => return Err(e),
            }
        }
    }
    let mut best = 0;
    for (k, &(_, s)) in scores.iter().enumerate() {
        if s > scores[best].1 {
            best = k;
        }
    }
    Ok(PseudoLabel {
        label: scores[best].0,
        all_zero: scores.iter().all(|&(_, s)| s == 0.0),
        scores,
        orthogonal,
    })
}

/// One input line: a sample's native label and foreign posteriors keyed by
/// dataset name, each listing every class of that dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PseudoInput {
    pub sample: String,
    pub dataset: String,
    pub class: String,
    pub foreign: BTreeMap<String, BTreeMap<String, f64>>,
}

/// One output line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PseudoOutput {
    pub sample: String,
    pub label: String,
    pub scores: Vec<CandidateScore>,
    pub flags: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub universal: String,
    pub score: f64,
}

/// Resolves names in `input` and pseudo-labels it.
pub fn label_record(art: &TaxonomyArtifacts, input: &PseudoInput) -> Result<PseudoOutput> {
    let c = &art.collection;
    let d = c.dataset_index(&input.dataset)?;
    let gt = LabelRef::new(d, c.class_index(d, &input.class)?);
    let mut foreign = Vec::new();
    for (name, post) in &input.foreign {
        let fd = c.dataset_index(name)?;
        let ds = c.dataset(fd);
        if let Some(k) = post.keys().find(|k| !ds.classes.iter().any(|cl| &cl.name == *k)) {
            return Err(Error::NotFound(format!("class `{k}` in dataset `{name}`")));
        }
        let values = ds
            .classes
            .iter()
            .map(|cl| {
                post.get(&cl.name)
                    .copied()
                    .ok_or_else(|| Error::InvalidInput(format!("missing posterior for `{name}.{}`", cl.name)))
            })
            .collect::<Result<Vec<_>>>()?;
        foreign.push(ForeignPrediction::new(art, fd, values)?);
    }
    let out = ensemble_pseudo_label(art, &foreign, gt)?;
    let name = |u: usize| art.taxonomy.classes[u].display_name.clone();
    let mut flags = Vec::new();
    if out.all_zero {
        flags.push("all-zero".to_string());
    }
    flags.extend(out.orthogonal.iter().map(|&fd| format!("orthogonal:{}", c.dataset(fd).name)));
    Ok(PseudoOutput {
        sample: input.sample.clone(),
        label: name(out.label),
        scores: out
            .scores
            .iter()
            .map(|&(u, score)| CandidateScore { universal: name(u), score })
            .collect(),
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taxonomy::Collection;

    /// VIPER distinguishes trucks (with pickups), vans and cars; Vistas
    /// lumps all of them but trucks into `car`.
    fn viper_vistas() -> TaxonomyArtifacts {
        TaxonomyArtifacts::from_collection(
            Collection::from_tables(&[
                ("VIPER", &[("truck", &["truck", "pickup"]), ("van", &["van"]), ("car", &["car"])]),
                ("Vistas", &[("car", &["car", "van", "pickup"]), ("truck", &["truck"])]),
            ])
            .unwrap(),
        )
    }

    #[test]
    fn pickup_share_of_viper_truck() {
        let art = viper_vistas();
        let pickup = art.taxonomy.by_name("pickup").unwrap();
        let truck = art.taxonomy.by_name("truck").unwrap();
        let f = ForeignPrediction::new(&art, 0, vec![0.5, 0.3, 0.2]).unwrap();
        let gt = LabelRef::new(1, 0);
        assert_eq!(conditional_score(&art, &f, gt, pickup).unwrap(), 0.5);
        assert_eq!(conditional_score(&art, &f, gt, truck).unwrap(), 0.0);
        let out = ensemble_pseudo_label(&art, &[f], gt).unwrap();
        assert_eq!(out.label, pickup);
    }

    #[test]
    fn single_intersecting_class_scores_one() {
        let art = viper_vistas();
        let truck = art.taxonomy.by_name("truck").unwrap();
        let f = ForeignPrediction::new(&art, 0, vec![0.1, 0.6, 0.3]).unwrap();
        assert_eq!(conditional_score(&art, &f, LabelRef::new(1, 1), truck).unwrap(), 1.0);
    }

    #[test]
    fn orthogonal_foreign_dataset() {
        let art = TaxonomyArtifacts::from_collection(
            Collection::from_tables(&[("A", &[("x", &["x", "y"])]), ("B", &[("z", &["z"])]), ("C", &[("y", &["y"])])])
                .unwrap(),
        );
        let f = ForeignPrediction::new(&art, 1, vec![1.0]).unwrap();
        let gt = LabelRef::new(0, 0);
        assert!(matches!(conditional_score(&art, &f, gt, 0), Err(Error::OrthogonalDataset(_))));
        let out = ensemble_pseudo_label(&art, &[f], gt).unwrap();
        assert!(out.all_zero);
        assert_eq!(out.orthogonal, vec![1]);
        assert_eq!(out.label, art.mappings.get(gt)[0]);
    }

    #[test]
    fn scores_add_across_datasets() {
        // A.x = {p, q}; B and C each split it.
        let art = TaxonomyArtifacts::from_collection(
            Collection::from_tables(&[
                ("A", &[("x", &["p", "q"])]),
                ("B", &[("p", &["p"]), ("q", &["q"])]),
                ("C", &[("p", &["p"]), ("q", &["q"])]),
            ])
            .unwrap(),
        );
        let p = art.taxonomy.by_name("p").unwrap();
        let gt = LabelRef::new(0, 0);
        let b = ForeignPrediction::new(&art, 1, vec![0.4, 0.6]).unwrap();
        let c = ForeignPrediction::new(&art, 2, vec![0.9, 0.1]).unwrap();
        let out = ensemble_pseudo_label(&art, &[b, c.clone()], gt).unwrap();
        let score = |u| out.scores.iter().find(|s| s.0 == u).unwrap().1;
        assert!((score(p) - 1.3).abs() < 1e-12);
        assert_eq!(out.label, p);
        let native = ForeignPrediction { dataset: 0, ..c };
        assert!(ensemble_pseudo_label(&art, &[native], gt).is_err());
    }

    #[test]
    fn record_round_trip() {
        let art = viper_vistas();
        let line = r#"{"sample":"s1","dataset":"Vistas","class":"car","foreign":{"VIPER":{"truck":0.5,"van":0.3,"car":0.2}}}"#;
        let input: PseudoInput = serde_json::from_str(line).unwrap();
        let out = label_record(&art, &input).unwrap();
        assert_eq!(out.label, "pickup");
        assert!(out.flags.is_empty());
        let bad = line.replace("\"van\"", "\"bus\"");
        assert!(label_record(&art, &serde_json::from_str(&bad).unwrap()).is_err());
    }
}
