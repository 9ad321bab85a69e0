use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::taxonomy::{CollectionFile, Collection, LabelRef, TaxonomyArtifacts};

/// One Gaussian blob of samples drawn for an atom.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConceptSpec {
    pub atom: String,
    pub center: [f64; 2],
    pub std: f64,
    pub count: usize,
    /// Datasets that may label the blob; empty means every dataset that
    /// covers the atom.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub datasets: Vec<String>,
}

/// A 2D problem: the labeling collection plus the blobs of every atom.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToyProblemSpec {
    pub collection: CollectionFile,
    pub concepts: Vec<ConceptSpec>,
    pub seed: u64,
    /// Drop untrainable universal classes before training.
    #[serde(default)]
    pub filter_untrainable: bool,
}

impl ToyProblemSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            detail: e.to_string(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes") + "\n"
    }
}

/// A validated spec with its taxonomy artifacts.
#[derive(Clone, Debug, PartialEq)]
pub struct ToyProblem {
    pub spec: ToyProblemSpec,
    pub art: TaxonomyArtifacts,
    /// Atom index of every concept.
    pub concept_atoms: Vec<usize>,
    /// Labels available to every concept, in dataset order.
    pub concept_labelers: Vec<Vec<LabelRef>>,
    /// Universal class id of every atom.
    pub atom_universal: Vec<usize>,
}

impl ToyProblem {
    pub fn new(spec: ToyProblemSpec) -> Result<Self> {
        let collection = Collection::from_file(&spec.collection)?;
        let full = TaxonomyArtifacts::from_collection(collection);
        let art = if spec.filter_untrainable { full.filtered().0 } else { full };
        if spec.concepts.is_empty() {
            return Err(Error::InvalidSpec("no concepts".into()));
        }
        let mut concept_atoms = Vec::new();
        let mut concept_labelers = Vec::new();
        let coll = &art.collection;
        for c in &spec.concepts {
            let a = coll
                .atom_index(&c.atom)
                .ok_or_else(|| Error::InvalidSpec(format!("concept atom `{}` is not in the collection", c.atom)))?;
            if c.count == 0 {
                return Err(Error::InvalidSpec(format!("concept `{}` has no samples", c.atom)));
            }
            if !(c.std > 0.0 && c.std.is_finite()) {
                return Err(Error::InvalidSpec(format!("concept `{}` needs a positive std", c.atom)));
            }
            if !c.center.iter().all(|v| v.is_finite()) {
                return Err(Error::InvalidSpec(format!("concept `{}` has a non-finite center", c.atom)));
            }
            let mut labelers: Vec<LabelRef> = (0..coll.datasets().len())
                .filter_map(|d| coll.class_containing(d, a).map(|k| LabelRef::new(d, k)))
                .collect();
            if !c.datasets.is_empty() {
                for name in &c.datasets {
                    let d = coll.dataset_index(name).map_err(|_| Error::InvalidSpec(format!("unknown dataset `{name}`")))?;
                    if !labelers.iter().any(|l| l.dataset == d) {
                        return Err(Error::InvalidSpec(format!("`{name}` does not label atom `{}`", c.atom)));
                    }
                }
                labelers.retain(|l| c.datasets.contains(&coll.dataset(l.dataset).name));
            }
            concept_atoms.push(a);
            concept_labelers.push(labelers);
        }
        let atom_universal = (0..coll.atoms().len())
            .map(|a| {
                art.taxonomy
                    .classes
                    .iter()
                    .position(|u| u.atoms.contains(a))
                    .expect("universal classes cover every atom")
            })
            .collect();
        Ok(ToyProblem {
            spec,
            art,
            concept_atoms,
            concept_labelers,
            atom_universal,
        })
    }
}

/// A training sample labeled by one dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub x: [f64; 2],
    pub label: LabelRef,
    /// Held for evaluation only.
    pub universal: usize,
}

/// A held-out sample with its true atom and universal class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestSample {
    pub x: [f64; 2],
    pub atom: usize,
    pub universal: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ToyData {
    /// Per dataset, in generation order.
    pub train: Vec<Vec<LabeledSample>>,
    pub test: Vec<TestSample>,
}

impl ToyData {
    pub fn train_samples(&self) -> impl Iterator<Item = &LabeledSample> {
        self.train.iter().flatten()
    }
}

/// One standard normal pair by Box–Muller.
pub fn normal_pair(rng: &mut SplitMix64) -> [f64; 2] {
    let u1 = 1.0 - rng.random::<f64>();
    let u2 = rng.random::<f64>();
    let r = (-2.0 * u1.ln()).sqrt();
    let t = std::f64::consts::TAU * u2;
    [r * t.cos(), r * t.sin()]
}

/// Draws every concept in spec order. Every fifth sample of a concept is
/// held out; the rest go round-robin to the datasets labeling its atom.
pub fn generate_toy(problem: &ToyProblem) -> ToyData {
    let c = &problem.art.collection;
    let mut rng = SplitMix64::seed_from_u64(problem.spec.seed);
    let mut train = vec![Vec::new(); c.datasets().len()];
    let mut test = Vec::new();
    for ((concept, &atom), labelers) in problem
        .spec
        .concepts
        .iter()
        .zip(&problem.concept_atoms)
        .zip(&problem.concept_labelers)
    {
        let universal = problem.atom_universal[atom];
        let mut next = 0;
        for k in 0..concept.count {
            let z = normal_pair(&mut rng);
            let x = [concept.center[0] + concept.std * z[0], concept.center[1] + concept.std * z[1]];
            if k % 5 == 4 {
                test.push(TestSample { x, atom, universal });
            } else {
                let label = labelers[next % labelers.len()];
                next += 1;
                train[label.dataset].push(LabeledSample { x, label, universal });
            }
        }
    }
    ToyData { train, test }
}
