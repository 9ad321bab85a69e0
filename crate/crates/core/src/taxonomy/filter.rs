//! Removal of universal classes that partial labels can never single out.
//!
//! A universal class is untrainable when some other universal class appears
//! in every dataset class it appears in: no label then prefers it over its
//! sibling. One pass suffices because dominance is transitive and the
//! largest dominating signature is itself maximal.

use serde::Serialize;

use super::collection::Collection;
use super::universal::{derive_mappings, MappingSet, Signature, UniversalTaxonomy};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FilterReport {
    /// `(untrainable class, dominator)` in ascending class id.
    pub removed: Vec<(usize, usize)>,
}

fn is_sub_signature(a: &Signature, b: &Signature) -> bool {
    // both sorted
    let mut it = b.iter();
    a.iter().all(|x| it.by_ref().any(|y| y == x))
}

/// Trainable flags and dominators under signature dominance.
pub(crate) fn dominance(tax: &UniversalTaxonomy) -> (Vec<bool>, Vec<Option<usize>>) {
    let n = tax.len();
    let mut trainable = vec![true; n];
    let mut dominator = vec![None; n];
    for u in 0..n {
        let su = &tax.classes[u].signature;
        let mut best: Option<usize> = None;
        for v in 0..n {
            if v == u || !is_sub_signature(su, &tax.classes[v].signature) {
                continue;
            }
            let better = match best {
                None => true,
                Some(b) => tax.classes[v].signature.len() > tax.classes[b].signature.len(),
            };
            if better {
                best = Some(v);
            }
        }
        if best.is_some() {
            trainable[u] = false;
            dominator[u] = best;
        }
    }
    (trainable, dominator)
}

/// Marks dominated classes untrainable and drops them from the mappings.
pub fn filter_untrainable(
    collection: &Collection,
    tax: &UniversalTaxonomy,
    _maps: &MappingSet,
) -> (UniversalTaxonomy, MappingSet, FilterReport) {
    let (trainable, dominator) = dominance(tax);
    let removed = dominator
        .iter()
        .enumerate()
        .filter_map(|(u, d)| d.map(|d| (u, d)))
        .collect();
    let out = UniversalTaxonomy {
        classes: tax.classes.clone(),
        trainable,
        dominator,
    };
    let maps = derive_mappings(collection, &out);
    (out, maps, FilterReport { removed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taxonomy::universal::{build_universal_from_atoms, validate_universal};
    use crate::taxonomy::{fixtures, LabelRef};

    #[test]
    fn rider_survives_alone() {
        let c = fixtures::rider();
        let (tax, maps) = build_universal_from_atoms(&c);
        let (f, fmaps, report) = filter_untrainable(&c, &tax, &maps);
        let rider = f.by_name("rider").unwrap();
        let bike = f.by_name("bike").unwrap();
        let ped = f.by_name("pedestrian").unwrap();
        assert_eq!(f.trainable_ids(), vec![rider]);
        assert_eq!(f.dominator[bike], Some(rider));
        assert_eq!(f.dominator[ped], Some(rider));
        assert_eq!(report.removed.len(), 2);
        for l in c.labels() {
            assert_eq!(fmaps.get(l), &[rider]);
        }
        validate_universal(&c, &f, &fmaps).unwrap();
    }

    #[test]
    fn incomparable_signatures_untouched() {
        let c = Collection::from_tables(&[
            ("A", &[("x", &["a", "b"]), ("y", &["c"])]),
            ("B", &[("p", &["a"]), ("q", &["b", "c"])]),
        ])
        .unwrap();
        let (tax, maps) = build_universal_from_atoms(&c);
        let (f, fmaps, report) = filter_untrainable(&c, &tax, &maps);
        assert!(report.removed.is_empty());
        assert_eq!(f, tax);
        assert_eq!(fmaps, maps);
    }

    #[test]
    fn vehicles_keep_only_pickup() {
        let c = fixtures::vehicles();
        let (tax, maps) = build_universal_from_atoms(&c);
        let (f, fmaps, _) = filter_untrainable(&c, &tax, &maps);
        let pickup = f.by_name("pickup").unwrap();
        assert_eq!(f.trainable_ids(), vec![pickup]);
        assert_eq!(fmaps.get(LabelRef::new(1, 0)), &[pickup]);
    }

    #[test]
    fn city_splits_keep_all_nineteen() {
        let c = fixtures::city_splits();
        let (tax, maps) = build_universal_from_atoms(&c);
        assert_eq!(tax.len(), 19);
        let (f, _, report) = filter_untrainable(&c, &tax, &maps);
        assert!(report.removed.is_empty());
        assert_eq!(f.trainable_ids().len(), 19);
    }

    #[test]
    fn sub_signature() {
        let s = |v: &[(usize, usize)]| v.iter().map(|&(d, c)| LabelRef::new(d, c)).collect::<Vec<_>>();
        assert!(is_sub_signature(&s(&[(0, 1)]), &s(&[(0, 1), (1, 0)])));
        assert!(!is_sub_signature(&s(&[(0, 2)]), &s(&[(0, 1), (1, 0)])));
        assert!(is_sub_signature(&s(&[]), &s(&[(0, 1)])));
    }
}
