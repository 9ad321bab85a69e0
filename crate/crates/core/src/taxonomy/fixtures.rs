//! Reference collections and a seeded random collection generator.

use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;

use super::atoms::AtomSet;
use super::collection::{Collection, DatasetClass, DatasetTaxonomy};

/// VIPER truck, Vistas car and ADE20k van over pickups, vans, cars and trucks.
pub fn vehicles() -> Collection {
    Collection::from_tables(&[
        ("VIPER", &[("truck", &["truck", "pickup"])]),
        ("Vistas", &[("car", &["car", "van", "pickup"])]),
        ("ADE20k", &[("van", &["van", "pickup"])]),
    ])
    .expect("valid fixture")
}

/// CamVid bicycle = bike ∪ rider, Pascal person = rider ∪ pedestrian.
pub fn rider() -> Collection {
    Collection::from_tables(&[
        ("CamVid", &[("bicycle", &["bike", "rider"])]),
        ("Pascal", &[("person", &["rider", "pedestrian"])]),
    ])
    .expect("valid fixture")
}

pub const CITYSCAPES_SHARED: [&str; 14] = [
    "road",
    "sidewalk",
    "building",
    "wall",
    "fence",
    "pole",
    "traffic-light",
    "traffic-sign",
    "vegetation",
    "terrain",
    "sky",
    "person",
    "rider",
    "train",
];

/// Cityscapes relabeled into two splits of 17 classes: one groups cars,
/// buses and trucks into `four-wheel-vehicle`, the other groups cars,
/// bicycles and motorcycles into `personal-vehicle`. Cars are never labeled
/// on their own.
pub fn city_splits() -> Collection {
    let mut four: Vec<(&str, &[&str])> = CITYSCAPES_SHARED.iter().map(|c| (*c, std::slice::from_ref(c))).collect();
    let mut personal = four.clone();
    four.push(("motorcycle", &["motorcycle"]));
    four.push(("bicycle", &["bicycle"]));
    four.push(("four-wheel-vehicle", &["car", "bus", "truck"]));
    personal.push(("bus", &["bus"]));
    personal.push(("truck", &["truck"]));
    personal.push(("personal-vehicle", &["car", "bicycle", "motorcycle"]));
    Collection::from_tables(&[("City4w", &four), ("CityPers", &personal)]).expect("valid fixture")
}

/// A random valid collection with `1..=max_datasets` datasets of at most
/// `max_classes` classes over at most `max_atoms` atoms. Each dataset covers
/// a random subset of the atoms; unreferenced atoms are dropped.
pub fn random_collection(seed: u64, max_datasets: usize, max_classes: usize, max_atoms: usize) -> Collection {
    let mut rng = SplitMix64::seed_from_u64(seed);
    let n_atoms = rng.random_range(1..=max_atoms);
    let n_datasets = rng.random_range(1..=max_datasets);
    let mut raw: Vec<Vec<Vec<usize>>> = Vec::new();
    for _ in 0..n_datasets {
        let k = rng.random_range(1..=max_classes);
        let coverage: f64 = rng.random_range(0.3..1.0);
        let mut classes = vec![Vec::new(); k];
        for a in 0..n_atoms {
            if rng.random_bool(coverage) {
                classes[rng.random_range(0..k)].push(a);
            }
        }
        classes.retain(|c| !c.is_empty());
        if classes.is_empty() {
            classes.push(vec![rng.random_range(0..n_atoms)]);
        }
        raw.push(classes);
    }
    let mut used = vec![false; n_atoms];
    for a in raw.iter().flatten().flatten() {
        used[*a] = true;
    }
    let mut remap = vec![usize::MAX; n_atoms];
    let mut names = Vec::new();
    for a in 0..n_atoms {
        if used[a] {
            remap[a] = names.len();
            names.push(format!("a{a}"));
        }
    }
    let datasets = raw
        .into_iter()
        .enumerate()
        .map(|(d, classes)| DatasetTaxonomy {
            name: format!("D{d}"),
            classes: classes
                .into_iter()
                .enumerate()
                .map(|(c, atoms)| DatasetClass {
                    name: format!("c{c}"),
                    atoms: atoms.iter().map(|&a| remap[a]).collect::<AtomSet>(),
                })
                .collect(),
        })
        .collect();
    Collection::new(names, datasets).expect("generator yields valid collections")
}
