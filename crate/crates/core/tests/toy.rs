use std::path::PathBuf;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;
use unitax_core::toy::problems::{city_splits, intersection, rider, three_blobs, two_datasets, CityLayout};
use unitax_core::toy::{
    decision_surface_csv, generate_toy, train, Grid, Mlp, Mode, ModelFile, ToyProblem, ToyProblemSpec, TrainConfig,
    TrainedModel,
};

fn weighted_sum(mlp: &Mlp, x: &Array2<f64>, r: &Array2<f64>) -> f64 {
    (mlp.forward(x) * r).sum()
}

/// Smallest hidden pre-activation magnitude; finite differences are only
/// valid away from the ReLU kinks.
fn kink_distance(mlp: &Mlp, x: &Array2<f64>) -> f64 {
    let mut h = x.clone();
    let mut min = f64::INFINITY;
    for layer in &mlp.layers[..mlp.layers.len() - 1] {
        let z = h.dot(&layer.w) + &layer.b;
        min = z.iter().fold(min, |m, v| m.min(v.abs()));
        h = z.mapv(|v| v.max(0.0));
    }
    min
}

#[test]
fn mlp_gradient_matches_central_differences() {
    let mut rng = SplitMix64::seed_from_u64(41);
    let mut checked = 0;
    for trial in 0..40 {
        let mlp = Mlp::new(&[2, 6, 5, 4], trial);
        let x = Array2::from_shape_simple_fn((7, 2), || rng.random_range(-2.0..2.0));
        let r = Array2::from_shape_simple_fn((7, 4), || rng.random_range(-1.0..1.0));
        if kink_distance(&mlp, &x) < 1e-3 {
            continue;
        }
        checked += 1;
        let cache = mlp.forward_cached(&x);
        let grads: Vec<f64> = mlp.backward(&cache, &r).params().copied().collect();
        let h = 1e-6;
        let n = mlp.params().count();
        let mut fd = Vec::with_capacity(n);
        for i in 0..n {
            let mut up = mlp.clone();
            let mut down = mlp.clone();
            *up.params_mut().nth(i).unwrap() += h;
            *down.params_mut().nth(i).unwrap() -= h;
            fd.push((weighted_sum(&up, &x, &r) - weighted_sum(&down, &x, &r)) / (2.0 * h));
        }
        let err: f64 = grads.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale = grads.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-12);
        assert!(err / scale < 1e-4, "trial {trial}: relative error {}", err / scale);
    }
    assert!(checked >= 20);
}

#[test]
fn split_is_eighty_twenty_per_concept() {
    let p = ToyProblem::new(three_blobs(3)).unwrap();
    let data = generate_toy(&p);
    assert_eq!(data.train_samples().count(), 480);
    assert_eq!(data.test.len(), 120);
    for u in 0..3 {
        assert_eq!(data.test.iter().filter(|s| s.universal == u).count(), 40);
        assert_eq!(data.train_samples().filter(|s| s.universal == u).count(), 160);
    }
}

#[test]
fn generation_is_deterministic() {
    for seed in 0..3 {
        let p = ToyProblem::new(intersection(seed)).unwrap();
        assert_eq!(generate_toy(&p), generate_toy(&p));
    }
    let a = generate_toy(&ToyProblem::new(intersection(0)).unwrap());
    let b = generate_toy(&ToyProblem::new(intersection(1)).unwrap());
    assert_ne!(a, b);
}

#[test]
fn blob_means_lie_within_three_standard_errors() {
    for seed in 0..5 {
        let spec = three_blobs(seed);
        let p = ToyProblem::new(spec.clone()).unwrap();
        let data = generate_toy(&p);
        for (c, concept) in spec.concepts.iter().enumerate() {
            let xs: Vec<[f64; 2]> = data
                .train_samples()
                .filter(|s| s.universal == c)
                .map(|s| s.x)
                .chain(data.test.iter().filter(|s| s.universal == c).map(|s| s.x))
                .collect();
            let n = xs.len() as f64;
            let bound = 3.0 * concept.std / n.sqrt();
            for k in 0..2 {
                let mean = xs.iter().map(|x| x[k]).sum::<f64>() / n;
                assert!((mean - concept.center[k]).abs() < bound, "seed {seed}, concept {c}");
            }
        }
    }
}

#[test]
fn labels_rotate_over_the_labeling_datasets() {
    let p = ToyProblem::new(intersection(0)).unwrap();
    let data = generate_toy(&p);
    for (concept, labelers) in p.concept_labelers.iter().enumerate() {
        let u = p.atom_universal[p.concept_atoms[concept]];
        assert_eq!(labelers.len(), 2);
        for l in labelers {
            let n = data.train[l.dataset].iter().filter(|s| s.universal == u).count();
            assert_eq!(n, 80);
            assert!(data.train[l.dataset].iter().filter(|s| s.universal == u).all(|s| s.label == *l));
        }
    }
}

#[test]
fn training_is_deterministic_and_models_round_trip() {
    let p = ToyProblem::new(rider(0)).unwrap();
    let data = generate_toy(&p);
    for mode in Mode::ALL {
        let mut cfg = TrainConfig::new(mode, 5);
        cfg.epochs = 30;
        cfg.hidden = 8;
        let a = train(&cfg, &p, &data).unwrap();
        let b = train(&cfg, &p, &data).unwrap();
        assert_eq!(a, b, "{mode}");
        let text = a.model.to_file(&p).to_json();
        let back = TrainedModel::from_file(&ModelFile::from_json(&text).unwrap(), &p).unwrap();
        assert_eq!(back.to_file(&p).to_json(), text);
        for s in &data.test {
            assert_eq!(back.posterior(s.x).unwrap(), a.model.posterior(s.x).unwrap());
        }
    }
}

#[test]
fn models_refuse_a_different_problem() {
    let p = ToyProblem::new(rider(0)).unwrap();
    let other = ToyProblem::new(three_blobs(0)).unwrap();
    let mut cfg = TrainConfig::new(Mode::UniversalNllPlus, 0);
    cfg.epochs = 2;
    let out = train(&cfg, &p, &generate_toy(&p)).unwrap();
    let file = out.model.to_file(&p);
    assert!(TrainedModel::from_file(&file, &other).is_err());
}

#[test]
fn surface_is_row_major_with_names() {
    let p = ToyProblem::new(three_blobs(0)).unwrap();
    let mut cfg = TrainConfig::new(Mode::Oracle, 0);
    cfg.epochs = 5;
    let out = train(&cfg, &p, &generate_toy(&p)).unwrap();
    let names = out.model.output.names(&p);
    let grid = Grid::parse("-1,1,0,2,3,2").unwrap();
    let csv = decision_surface_csv(&out.model, &names, &grid);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "x,y,class,name");
    assert_eq!(lines.len(), 7);
    let coords: Vec<(String, String)> = lines[1..]
        .iter()
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            let k: usize = f[2].parse().unwrap();
            assert_eq!(f[3], names[k]);
            (f[0].to_string(), f[1].to_string())
        })
        .collect();
    let expected = [("-1", "0"), ("0", "0"), ("1", "0"), ("-1", "2"), ("0", "2"), ("1", "2")];
    for (got, want) in coords.iter().zip(expected) {
        assert_eq!((got.0.as_str(), got.1.as_str()), want);
    }
    assert!(Grid::parse("0,1,0,1,0,2").is_err());
    assert!(Grid::parse("0,1,0,1,2").is_err());
}

#[test]
fn shipped_problem_files_match_the_builders() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../problems");
    let cases: [(&str, ToyProblemSpec); 5] = [
        ("three_blobs.json", three_blobs(0)),
        ("intersection.json", intersection(0)),
        ("rider.json", rider(0)),
        ("city_splits.json", city_splits(0, CityLayout::default())),
        ("two_datasets.json", two_datasets(0)),
    ];
    for (name, spec) in cases {
        let text = std::fs::read_to_string(dir.join(name)).unwrap();
        assert_eq!(ToyProblemSpec::from_json(&text).unwrap(), spec, "{name}");
        assert_eq!(text, spec.to_json(), "{name}");
        ToyProblem::new(spec).unwrap();
    }
}

#[test]
fn invalid_specs_are_rejected() {
    let mut spec = three_blobs(0);
    spec.concepts[0].std = 0.0;
    assert!(ToyProblem::new(spec).is_err());
    let mut spec = three_blobs(0);
    spec.concepts[1].atom = "nope".into();
    assert!(ToyProblem::new(spec).is_err());
    let mut spec = three_blobs(0);
    spec.concepts[2].count = 0;
    assert!(ToyProblem::new(spec).is_err());
    assert!(ToyProblemSpec::from_json("{\"concepts\": []}").is_err());
}
