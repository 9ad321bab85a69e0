//! Builders for the reference toy problems.

use super::data::{ConceptSpec, ToyProblemSpec};
use crate::taxonomy::{fixtures, Collection};

fn blob(atom: &str, center: [f64; 2], std: f64, count: usize) -> ConceptSpec {
    ConceptSpec {
        atom: atom.to_string(),
        center,
        std,
        count,
        datasets: Vec::new(),
    }
}

fn spec(collection: Collection, concepts: Vec<ConceptSpec>, seed: u64) -> ToyProblemSpec {
    ToyProblemSpec {
        collection: collection.to_file(),
        concepts,
        seed,
        filter_untrainable: false,
    }
}

/// Three well separated blobs, each labeled on its own by one dataset.
pub fn three_blobs(seed: u64) -> ToyProblemSpec {
    let c = Collection::from_tables(&[("A", &[("a", &["a"]), ("b", &["b"]), ("c", &["c"])])]).expect("valid");
    spec(
        c,
        vec![
            blob("a", [-3.0, 0.0], 0.5, 200),
            blob("b", [3.0, 0.0], 0.5, 200),
            blob("c", [0.0, 3.0], 0.5, 200),
        ],
        seed,
    )
}

/// `A.left = {p, m}` and `B.right = {m, q}` overlap in `m`, which no
/// dataset labels on its own.
pub fn intersection(seed: u64) -> ToyProblemSpec {
    let c = Collection::from_tables(&[
        ("A", &[("left", &["p", "m"]), ("far", &["q"])]),
        ("B", &[("right", &["m", "q"]), ("near", &["p"])]),
    ])
    .expect("valid");
    spec(
        c,
        vec![
            blob("p", [-2.5, 0.0], 0.5, 200),
            blob("m", [0.0, 0.0], 0.5, 200),
            blob("q", [2.5, 0.0], 0.5, 200),
        ],
        seed,
    )
}

/// CamVid bicycle = bike ∪ rider and Pascal person = rider ∪ pedestrian.
/// Rider is the only class any label prefers.
pub fn rider(seed: u64) -> ToyProblemSpec {
    spec(
        fixtures::rider(),
        vec![
            blob("bike", [-2.0, 0.0], 0.5, 200),
            blob("rider", [0.0, 0.0], 0.5, 200),
            blob("pedestrian", [2.0, 0.0], 0.5, 200),
        ],
        seed,
    )
}

/// Blob layout of the two-split problem.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CityLayout {
    /// Distance of bus, motorcycle, truck and bicycle from the car blob.
    pub vehicle_radius: f64,
    pub vehicle_std: f64,
    pub vehicle_count: usize,
    /// Radius of the ring holding the shared classes.
    pub shared_radius: f64,
    pub shared_std: f64,
    pub shared_count: usize,
}

impl Default for CityLayout {
    fn default() -> Self {
        CityLayout {
            vehicle_radius: 0.6,
            vehicle_std: 0.4,
            vehicle_count: 200,
            shared_radius: 3.5,
            shared_std: 0.35,
            shared_count: 40,
        }
    }
}

/// Nineteen blobs for the two relabeled splits: one groups car, bus and
/// truck, the other car, bicycle and motorcycle. The five vehicles overlap
/// around the car blob, alternating between the two groups, and the shared
/// classes sit on a wide ring around them.
pub fn city_splits(seed: u64, layout: CityLayout) -> ToyProblemSpec {
    let mut concepts = Vec::new();
    concepts.push(blob("car", [0.0, 0.0], layout.vehicle_std, layout.vehicle_count));
    for (k, name) in ["bus", "motorcycle", "truck", "bicycle"].into_iter().enumerate() {
        let a = std::f64::consts::FRAC_PI_2 * k as f64;
        let r = layout.vehicle_radius;
        concepts.push(blob(name, [r * a.cos(), r * a.sin()], layout.vehicle_std, layout.vehicle_count));
    }
    let n = fixtures::CITYSCAPES_SHARED.len() as f64;
    for (k, name) in fixtures::CITYSCAPES_SHARED.iter().enumerate() {
        let a = std::f64::consts::TAU * k as f64 / n;
        let r = layout.shared_radius;
        concepts.push(blob(name, [r * a.cos(), r * a.sin()], layout.shared_std, layout.shared_count));
    }
    spec(fixtures::city_splits(), concepts, seed)
}

/// Four classes in one dataset and three in the other: `a` is shared,
/// `D2.bc` covers `D1.b` and `D1.c`, and each dataset has a class the other
/// never labels.
pub fn two_datasets(seed: u64) -> ToyProblemSpec {
    let c = Collection::from_tables(&[
        ("D1", &[("a", &["a"]), ("b", &["b"]), ("c", &["c"]), ("p", &["p"])]),
        ("D2", &[("a", &["a"]), ("bc", &["b", "c"]), ("q", &["q"])]),
    ])
    .expect("valid");
    spec(
        c,
        vec![
            blob("a", [0.0, 1.5], 0.5, 200),
            blob("b", [-1.5, 0.0], 0.5, 200),
            blob("c", [0.0, -1.5], 0.5, 200),
            blob("p", [1.5, 0.0], 0.5, 200),
            blob("q", [1.5, 1.5], 0.5, 200),
        ],
        seed,
    )
}
