use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;
use unitax_core::loss::{dataset_posterior, nll, nll_plus, nll_plus_grad_over, nll_plus_over, universal_posteriors};
use unitax_core::taxonomy::{fixtures, LabelRef, TaxonomyArtifacts};

/// Direct `-ln(Σ_mapped e^s / Σ e^s)` without any stabilisation.
fn naive_loss(logits: &[f64], mapped: &[usize]) -> f64 {
    let z: f64 = logits.iter().map(|s| s.exp()).sum();
    let m: f64 = mapped.iter().map(|&u| logits[u].exp()).sum();
    -(m / z).ln()
}

fn instance(rng: &mut SplitMix64) -> (Vec<f64>, Vec<usize>) {
    let k = rng.random_range(2..=20);
    let logits: Vec<f64> = (0..k).map(|_| rng.random_range(-5.0..5.0)).collect();
    let mut mapped: Vec<usize> = (0..k).filter(|_| rng.random_bool(0.4)).collect();
    if mapped.is_empty() {
        mapped.push(rng.random_range(0..k));
    }
    if mapped.len() == k {
        mapped.pop();
    }
    (logits, mapped)
}

fn norm(v: impl Iterator<Item = f64>) -> f64 {
    v.map(|x| x * x).sum::<f64>().sqrt()
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = SplitMix64::seed_from_u64(11);
    let h = 1e-5;
    for _ in 0..1000 {
        let (logits, mapped) = instance(&mut rng);
        let g = nll_plus_grad_over(&logits, &mapped).unwrap();
        let fd: Vec<f64> = (0..logits.len())
            .map(|i| {
                let mut up = logits.clone();
                let mut down = logits.clone();
                up[i] += h;
                down[i] -= h;
                (naive_loss(&up, &mapped) - naive_loss(&down, &mapped)) / (2.0 * h)
            })
            .collect();
        let err = norm(g.iter().zip(&fd).map(|(a, b)| a - b));
        let scale = norm(g.iter().copied()).max(norm(fd.iter().copied())).max(1e-12);
        assert!(err / scale < 1e-6, "relative error {} on {logits:?} {mapped:?}", err / scale);
    }
}

#[test]
fn gradient_signs_and_zero_sum() {
    let mut rng = SplitMix64::seed_from_u64(12);
    for _ in 0..1000 {
        let (logits, mapped) = instance(&mut rng);
        let g = nll_plus_grad_over(&logits, &mapped).unwrap();
        for (v, gv) in g.iter().enumerate() {
            if mapped.contains(&v) {
                assert!(*gv <= 0.0);
            } else {
                assert!(*gv > 0.0);
            }
        }
        assert!(g.iter().sum::<f64>().abs() < 1e-9);
    }
}

#[test]
fn loss_matches_direct_formula() {
    let mut rng = SplitMix64::seed_from_u64(13);
    for _ in 0..1000 {
        let (logits, mapped) = instance(&mut rng);
        let got = nll_plus_over(&logits, &mapped).unwrap();
        assert!((got - naive_loss(&logits, &mapped)).abs() < 1e-10);
    }
}

#[test]
fn singleton_mappings_reduce_to_nll() {
    let mut rng = SplitMix64::seed_from_u64(14);
    for _ in 0..1000 {
        let (logits, _) = instance(&mut rng);
        let t = rng.random_range(0..logits.len());
        let p = universal_posteriors(&logits).unwrap();
        let reference = -p[t].ln();
        assert!((nll_plus_over(&logits, &[t]).unwrap() - nll(&logits, t).unwrap()).abs() < 1e-12);
        assert!((nll(&logits, t).unwrap() - reference).abs() < 1e-12);
    }
}

#[test]
fn full_mapping_costs_nothing() {
    let mut rng = SplitMix64::seed_from_u64(15);
    for _ in 0..200 {
        let (logits, _) = instance(&mut rng);
        let all: Vec<usize> = (0..logits.len()).collect();
        assert_eq!(nll_plus_over(&logits, &all).unwrap(), 0.0);
        assert!(nll_plus_grad_over(&logits, &all).unwrap().iter().all(|g| g.abs() < 1e-12));
    }
}

#[test]
fn dataset_posteriors_and_void_sum_to_one() {
    let mut rng = SplitMix64::seed_from_u64(16);
    for seed in 0..100 {
        let art = TaxonomyArtifacts::from_collection(fixtures::random_collection(seed, 5, 8, 30));
        let k = art.taxonomy.len();
        let logits: Vec<f64> = (0..k).map(|_| rng.random_range(-6.0..6.0)).collect();
        let post = universal_posteriors(&logits).unwrap();
        for (d, ds) in art.collection.datasets().iter().enumerate() {
            let mut covered = vec![false; k];
            let mut total = 0.0;
            for c in 0..ds.classes.len() {
                let label = LabelRef::new(d, c);
                total += dataset_posterior(&post, label, &art.mappings).unwrap();
                for &u in art.mappings.get(label) {
                    covered[u] = true;
                }
            }
            let void: f64 = (0..k).filter(|&u| !covered[u]).map(|u| post[u]).sum();
            assert!((total + void - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn labeled_loss_uses_the_mapping() {
    let art = TaxonomyArtifacts::from_collection(fixtures::vehicles());
    let label = art.collection.label_by_name("Vistas.car").unwrap();
    let logits = vec![0.3, -1.0, 2.0, 0.5];
    let mapped = art.mappings.get(label).to_vec();
    assert_eq!(
        nll_plus(&logits, label, &art.mappings).unwrap(),
        nll_plus_over(&logits, &mapped).unwrap()
    );
}
