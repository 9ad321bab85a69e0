use super::collection::{Collection, LabelRef};
use super::universal::{MappingSet, UniversalTaxonomy};
use crate::error::Result;

pub const VOID_ROW: &str = "__void__";

/// Binary matrix projecting universal predictions onto one dataset:
/// rows are dataset classes (plus an optional void row), columns are the
/// trainable universal classes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MappingMatrix {
    pub rows: Vec<String>,
    pub columns: Vec<String>,
    /// Universal id of each column.
    pub column_ids: Vec<usize>,
    pub entries: Vec<Vec<u8>>,
}

pub fn mapping_matrix(
    collection: &Collection,
    dataset: &str,
    tax: &UniversalTaxonomy,
    maps: &MappingSet,
    include_void: bool,
) -> Result<MappingMatrix> {
    let d = collection.dataset_index(dataset)?;
    let column_ids = tax.trainable_ids();
    let columns = column_ids.iter().map(|&u| tax.classes[u].display_name.clone()).collect();
    let ds = collection.dataset(d);
    let mut rows: Vec<String> = ds.classes.iter().map(|c| c.name.clone()).collect();
    let mut entries: Vec<Vec<u8>> = (0..ds.classes.len())
        .map(|c| {
            let mapped = maps.get(LabelRef::new(d, c));
            column_ids.iter().map(|u| u8::from(mapped.contains(u))).collect()
        })
        .collect();
    if include_void {
        let void = (0..column_ids.len())
            .map(|j| u8::from(entries.iter().all(|row| row[j] == 0)))
            .collect();
        entries.push(void);
        rows.push(VOID_ROW.to_string());
    }
    Ok(MappingMatrix {
        rows,
        columns,
        column_ids,
        entries,
    })
}

impl MappingMatrix {
    /// Header row of universal names (first cell empty), one line per row.
    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let mut header = vec![String::new()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header).expect("in-memory write");
        for (name, row) in self.rows.iter().zip(&self.entries) {
            let mut rec = vec![name.clone()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::taxonomy::{build_universal_from_atoms, fixtures};

    #[test]
    fn vistas_car_row() {
        let c = fixtures::vehicles();
        let (t, m) = build_universal_from_atoms(&c);
        let mm = mapping_matrix(&c, "Vistas", &t, &m, true).unwrap();
        let ones: Vec<&str> = mm.columns.iter().zip(&mm.entries[0]).filter(|(_, &v)| v == 1).map(|(n, _)| n.as_str()).collect();
        let mut ones = ones;
        ones.sort();
        assert_eq!(ones, ["car", "pickup", "van"]);
        assert_eq!(mm.rows.last().unwrap(), VOID_ROW);
        for j in 0..mm.columns.len() {
            assert_eq!(mm.entries.iter().map(|r| r[j]).sum::<u8>(), 1);
        }
        let csv = mm.to_csv();
        assert!(csv.starts_with(",truck,pickup,car,van\ncar,0,1,1,1\n__void__,1,0,0,0\n"), "{csv}");
    }

    #[test]
    fn identity_when_dataset_equals_universal() {
        let c = Collection::from_tables(&[("A", &[("x", &["x"]), ("y", &["y"])]), ("B", &[("u", &["x", "y"])])]).unwrap();
        let (t, m) = build_universal_from_atoms(&c);
        let mm = mapping_matrix(&c, "A", &t, &m, true).unwrap();
        assert_eq!(mm.entries, vec![vec![1, 0], vec![0, 1], vec![0, 0]]);
        assert!(matches!(mapping_matrix(&c, "Z", &t, &m, false), Err(Error::NotFound(_))));
    }
}
