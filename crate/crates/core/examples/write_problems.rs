//! Regenerates the toy problem files under `problems/`.

use std::path::PathBuf;

use unitax_core::toy::problems::{city_splits, intersection, rider, three_blobs, two_datasets, CityLayout};

fn main() -> std::io::Result<()> {
    let dir = std::env::args_os()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../problems"));
    std::fs::create_dir_all(&dir)?;
    let specs = [
        ("three_blobs.json", three_blobs(0)),
        ("intersection.json", intersection(0)),
        ("rider.json", rider(0)),
        ("city_splits.json", city_splits(0, CityLayout::default())),
        ("two_datasets.json", two_datasets(0)),
    ];
    for (name, spec) in specs {
        std::fs::write(dir.join(name), spec.to_json())?;
    }
    Ok(())
}
