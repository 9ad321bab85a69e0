//! Declaration programs: building a collection from stated class relations.
//!
//! Text format, one statement per line, `#` starts a comment:
//!
//! ```text
//! dataset City road sky car          # optional: declares classes in order
//! equiv WD.sky City.sky
//! subset ADE20k.car KITTI.car        # first ⊂ second
//! overlap VIPER.truck ADE20k.truck name=truck
//! ```
//!
//! `subset` accepts `name=` for the remainder part; `overlap` accepts
//! `name=` for the intersection and `left=`/`right=` for the two
//! differences. Classes referenced without a `dataset` line are registered
//! in order of first appearance.
//!
//! Every class starts as one fresh atom. Statements are applied in file
//! order by splitting atoms, mirroring the resolution rules. A statement is
//! only applied when the class it splits is still a single atom, or when
//! the relation already holds; anything else would require guessing which
//! part is meant and is reported as ambiguous. After all statements the
//! declared relations are re-checked against the synthesized atoms.

use std::collections::BTreeMap;
use std::fmt;

use super::atoms::{classify_relation, AtomId, AtomSet, Relation};
use super::collection::{Collection, DatasetClass, DatasetTaxonomy, LabelRef};
use super::universal::{build_universal_from_atoms, MappingSet, UniversalTaxonomy};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClassName {
    pub dataset: String,
    pub class: String,
}

impl ClassName {
    pub fn new(dataset: impl Into<String>, class: impl Into<String>) -> Self {
        ClassName {
            dataset: dataset.into(),
            class: class.into(),
        }
    }

    fn parse(token: &str, line: usize) -> Result<Self> {
        match token.split_once('.') {
            Some((d, c)) if !d.is_empty() && !c.is_empty() => Ok(ClassName::new(d, c)),
            _ => Err(Error::Parse {
                line,
                detail: format!("expected dataset.class, found `{token}`"),
            }),
        }
    }
}

impl fmt::Display for ClassName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.dataset, self.class)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Statement {
    Equiv(ClassName, ClassName),
    /// `sub ⊂ sup`; `remainder` names `sup ∖ sub`.
    Subset {
        sub: ClassName,
        sup: ClassName,
        remainder: Option<String>,
    },
    Overlap {
        left: ClassName,
        right: ClassName,
        intersection: Option<String>,
        left_rest: Option<String>,
        right_rest: Option<String>,
    },
}

impl Statement {
    fn operands(&self) -> (&ClassName, &ClassName) {
        match self {
            Statement::Equiv(a, b) => (a, b),
            Statement::Subset { sub, sup, .. } => (sub, sup),
            Statement::Overlap { left, right, .. } => (left, right),
        }
    }

    /// Relation of the first operand to the second.
    fn relation(&self) -> Relation {
        match self {
            Statement::Equiv(..) => Relation::Equal,
            Statement::Subset { .. } => Relation::Subset,
            Statement::Overlap { .. } => Relation::Overlap,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct DeclarationProgram {
    /// Datasets and their classes in declaration order.
    pub datasets: Vec<(String, Vec<String>)>,
    /// Statements with their 1-based source line.
    pub statements: Vec<(usize, Statement)>,
}

impl DeclarationProgram {
    pub fn parse(text: &str) -> Result<Self> {
        let mut prog = DeclarationProgram::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let tokens: Vec<&str> = body.split_whitespace().collect();
            let (positional, options): (Vec<&str>, Vec<&str>) = tokens[1..].iter().partition(|t| !t.contains('='));
            let mut opts = BTreeMap::new();
            for o in options {
                let (k, v) = o.split_once('=').expect("partitioned on '='");
                if v.is_empty() || opts.insert(k, v.to_string()).is_some() {
                    return Err(Error::Parse {
                        line,
                        detail: format!("malformed option `{o}`"),
                    });
                }
            }
            let allow = |keys: &[&str]| -> Result<()> {
                match opts.keys().find(|k| !keys.contains(k)) {
                    Some(k) => Err(Error::Parse {
                        line,
                        detail: format!("unknown option `{k}` for `{}`", tokens[0]),
                    }),
                    None => Ok(()),
                }
            };
            let two = |what: &str| -> Result<(ClassName, ClassName)> {
                if positional.len() != 2 {
                    return Err(Error::Parse {
                        line,
                        detail: format!("`{what}` takes two classes, found {}", positional.len()),
                    });
                }
                let a = ClassName::parse(positional[0], line)?;
                let b = ClassName::parse(positional[1], line)?;
                if a == b {
                    return Err(Error::Parse {
                        line,
                        detail: format!("statement references `{a}` twice"),
                    });
                }
                Ok((a, b))
            };
            let stmt = match tokens[0] {
                "dataset" => {
                    allow(&[])?;
                    let Some((name, classes)) = positional.split_first() else {
                        return Err(Error::Parse {
                            line,
                            detail: "`dataset` needs a name".into(),
                        });
                    };
                    for c in classes {
                        prog.register(&ClassName::new(*name, *c));
                    }
                    if classes.is_empty() {
                        prog.dataset_entry(name);
                    }
                    continue;
                }
                "equiv" => {
                    allow(&[])?;
                    let (a, b) = two("equiv")?;
                    Statement::Equiv(a, b)
                }
                "subset" => {
                    allow(&["name"])?;
                    let (sub, sup) = two("subset")?;
                    Statement::Subset {
                        sub,
                        sup,
                        remainder: opts.get("name").cloned(),
                    }
                }
                "overlap" => {
                    allow(&["name", "left", "right"])?;
                    let (left, right) = two("overlap")?;
                    Statement::Overlap {
                        left,
                        right,
                        intersection: opts.get("name").cloned(),
                        left_rest: opts.get("left").cloned(),
                        right_rest: opts.get("right").cloned(),
                    }
                }
                other => {
                    return Err(Error::Parse {
                        line,
                        detail: format!("unknown statement `{other}`"),
                    })
                }
            };
            let (a, b) = stmt.operands();
            prog.register(a);
            prog.register(b);
            prog.statements.push((line, stmt));
        }
        Ok(prog)
    }

    fn dataset_entry(&mut self, name: &str) -> &mut Vec<String> {
        let pos = match self.datasets.iter().position(|(d, _)| d == name) {
            Some(p) => p,
            None => {
                self.datasets.push((name.to_string(), Vec::new()));
                self.datasets.len() - 1
            }
        };
        &mut self.datasets[pos].1
    }

    fn register(&mut self, name: &ClassName) {
        let classes = self.dataset_entry(&name.dataset);
        if !classes.contains(&name.class) {
            classes.push(name.class.clone());
        }
    }

    /// One statement per related cross-dataset pair of `collection`, in
    /// `(dataset, class)` pair order.
    pub fn from_relations(collection: &Collection) -> Self {
        let mut prog = DeclarationProgram {
            datasets: collection
                .datasets()
                .iter()
                .map(|d| (d.name.clone(), d.classes.iter().map(|c| c.name.clone()).collect()))
                .collect(),
            statements: Vec::new(),
        };
        let labels: Vec<LabelRef> = collection.labels().collect();
        let name = |l: LabelRef| ClassName::new(&collection.dataset(l.dataset).name, &collection.class(l).name);
        for (i, &a) in labels.iter().enumerate() {
            for &b in &labels[i + 1..] {
                if a.dataset == b.dataset {
                    continue;
                }
                let rel = classify_relation(collection.class_atoms(a), collection.class_atoms(b)).expect("valid classes");
                let stmt = match rel {
                    Relation::Equal => Statement::Equiv(name(a), name(b)),
                    Relation::Subset => Statement::Subset {
                        sub: name(a),
                        sup: name(b),
                        remainder: None,
                    },
                    Relation::Superset => Statement::Subset {
                        sub: name(b),
                        sup: name(a),
                        remainder: None,
                    },
                    Relation::Overlap => Statement::Overlap {
                        left: name(a),
                        right: name(b),
                        intersection: None,
                        left_rest: None,
                        right_rest: None,
                    },
                    Relation::Disjoint => continue,
                };
                let line = prog.datasets.len() + prog.statements.len() + 1;
                prog.statements.push((line, stmt));
            }
        }
        prog
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (d, classes) in &self.datasets {
            out.push_str(&format!("dataset {d} {}\n", classes.join(" ")));
        }
        for (_, s) in &self.statements {
            let opt = |k: &str, v: &Option<String>| v.as_ref().map(|v| format!(" {k}={v}")).unwrap_or_default();
            let line = match s {
                Statement::Equiv(a, b) => format!("equiv {a} {b}"),
                Statement::Subset { sub, sup, remainder } => format!("subset {sub} {sup}{}", opt("name", remainder)),
                Statement::Overlap {
                    left,
                    right,
                    intersection,
                    left_rest,
                    right_rest,
                } => format!(
                    "overlap {left} {right}{}{}{}",
                    opt("name", intersection),
                    opt("left", left_rest),
                    opt("right", right_rest)
                ),
            };
            out.push_str(&line);
            out.push('\n');
        }
        out
    }
}

/// Mutable atom model used while compiling a program.
struct Compiler {
    names: Vec<Option<String>>,
    classes: Vec<AtomSet>,
    /// Dataset index of every flattened class.
    owner: Vec<usize>,
    index: BTreeMap<ClassName, usize>,
    qualified: Vec<ClassName>,
}

impl Compiler {
    fn new(prog: &DeclarationProgram) -> Self {
        let mut c = Compiler {
            names: Vec::new(),
            classes: Vec::new(),
            owner: Vec::new(),
            index: BTreeMap::new(),
            qualified: Vec::new(),
        };
        for (d, (dname, classes)) in prog.datasets.iter().enumerate() {
            for cname in classes {
                let q = ClassName::new(dname, cname);
                c.index.insert(q.clone(), c.classes.len());
                c.classes.push(AtomSet::singleton(c.names.len()));
                c.names.push(Some(q.to_string()));
                c.owner.push(d);
                c.qualified.push(q);
            }
        }
        c
    }

    fn fresh(&mut self, name: String, line: usize) -> Result<AtomId> {
        if self.names.iter().flatten().any(|n| *n == name) {
            return Err(Error::InconsistentDeclaration {
                line,
                detail: format!("part name `{name}` is already in use"),
            });
        }
        self.names.push(Some(name));
        Ok(self.names.len() - 1)
    }

    /// Replaces `atom` by `parts` in every class; returns the touched classes.
    fn substitute(&mut self, atom: AtomId, parts: &AtomSet) -> Vec<usize> {
        let mut touched = Vec::new();
        for (i, set) in self.classes.iter_mut().enumerate() {
            if set.remove(atom) {
                set.union_with(parts);
                touched.push(i);
            }
        }
        self.names[atom] = None;
        touched
    }

    fn check_disjoint(&self, touched: &[usize], line: usize) -> Result<()> {
        for &i in touched {
            for j in 0..self.classes.len() {
                if j != i && self.owner[j] == self.owner[i] && self.classes[i].intersects(&self.classes[j]) {
                    return Err(Error::InconsistentDeclaration {
                        line,
                        detail: format!(
                            "`{}` and `{}` belong to one dataset but would overlap",
                            self.qualified[i], self.qualified[j]
                        ),
                    });
                }
            }
        }
        Ok(())
    }

    fn apply(&mut self, line: usize, stmt: &Statement) -> Result<()> {
        let (a, b) = stmt.operands();
        let (ia, ib) = (self.index[a], self.index[b]);
        if self.owner[ia] == self.owner[ib] {
            return Err(Error::InconsistentDeclaration {
                line,
                detail: format!("`{a}` and `{b}` belong to one dataset and are disjoint by definition"),
            });
        }
        let (xa, xb) = (self.classes[ia].clone(), self.classes[ib].clone());
        let current = classify_relation(&xa, &xb)?;
        let wanted = stmt.relation();
        if current == wanted {
            return Ok(());
        }
        let conflict = || Error::InconsistentDeclaration {
            line,
            detail: format!("declared {wanted:?} but earlier statements imply {a} is {current:?} to {b}"),
        };
        let ambiguous = |split: &ClassName| Error::AmbiguousDeclaration {
            line,
            detail: format!("`{split}` has already been split; cannot tell which of its parts the statement refers to"),
        };
        if current != Relation::Disjoint {
            return Err(conflict());
        }
        let touched = match stmt {
            Statement::Equiv(..) => {
                if xa.is_atomic() && xb.is_atomic() {
                    let (keep, gone) = (xa.first().unwrap(), xb.first().unwrap());
                    let t = self.substitute(gone, &xa);
                    if a.class == b.class && self.names[keep].as_deref() == Some(a.to_string().as_str()) && !self.names.iter().flatten().any(|n| *n == a.class) {
                        self.names[keep] = Some(a.class.clone());
                    }
                    t
                } else if xa.is_atomic() {
                    self.substitute(xa.first().unwrap(), &xb)
                } else if xb.is_atomic() {
                    self.substitute(xb.first().unwrap(), &xa)
                } else {
                    return Err(ambiguous(a));
                }
            }
            Statement::Subset { sub, sup, remainder } => {
                if !xb.is_atomic() {
                    return Err(ambiguous(sup));
                }
                let name = remainder.clone().unwrap_or_else(|| format!("{sup}∖{sub}"));
                let rest = self.fresh(name, line)?;
                let mut parts = xa.clone();
                parts.insert(rest);
                self.substitute(xb.first().unwrap(), &parts)
            }
            Statement::Overlap {
                left,
                right,
                intersection,
                left_rest,
                right_rest,
            } => {
                if !xa.is_atomic() {
                    return Err(ambiguous(left));
                }
                if !xb.is_atomic() {
                    return Err(ambiguous(right));
                }
                let l = self.fresh(left_rest.clone().unwrap_or_else(|| format!("{left}∖{right}")), line)?;
                let r = self.fresh(right_rest.clone().unwrap_or_else(|| format!("{right}∖{left}")), line)?;
                let i = self.fresh(intersection.clone().unwrap_or_else(|| format!("{left}∩{right}")), line)?;
                let mut t = self.substitute(xa.first().unwrap(), &AtomSet::from([l, i]));
                t.extend(self.substitute(xb.first().unwrap(), &AtomSet::from([r, i])));
                t
            }
        };
        self.check_disjoint(&touched, line)
    }

    fn into_collection(self, prog: &DeclarationProgram) -> Collection {
        let mut remap = vec![usize::MAX; self.names.len()];
        let mut names = Vec::new();
        for (i, n) in self.names.iter().enumerate() {
            if let Some(n) = n {
                remap[i] = names.len();
                names.push(n.clone());
            }
        }
        let mut next = 0;
        let datasets = prog
            .datasets
            .iter()
            .map(|(dname, classes)| DatasetTaxonomy {
                name: dname.clone(),
                classes: classes
                    .iter()
                    .map(|cname| {
                        let atoms = self.classes[next].iter().map(|a| remap[a]).collect();
                        next += 1;
                        DatasetClass {
                            name: cname.clone(),
                            atoms,
                        }
                    })
                    .collect(),
            })
            .collect();
        Collection::new_unchecked(names, datasets)
    }
}

/// Compiles a declaration program into a synthesized collection and its
/// universal taxonomy.
pub fn build_universal_from_declarations(
    prog: &DeclarationProgram,
) -> Result<(Collection, UniversalTaxonomy, MappingSet)> {
    let mut compiler = Compiler::new(prog);
    for (line, stmt) in &prog.statements {
        compiler.apply(*line, stmt)?;
    }
    let collection = compiler.into_collection(prog);
    collection.validate().map_err(|e| Error::InconsistentDeclaration {
        line: 0,
        detail: e.to_string(),
    })?;
    for (line, stmt) in &prog.statements {
        let (a, b) = stmt.operands();
        let la = collection.label_by_name(&a.to_string())?;
        let lb = collection.label_by_name(&b.to_string())?;
        let got = classify_relation(collection.class_atoms(la), collection.class_atoms(lb))?;
        if got != stmt.relation() {
            return Err(Error::InconsistentDeclaration {
                line: *line,
                detail: format!("declared {:?} between {a} and {b}, but the program implies {got:?}", stmt.relation()),
            });
        }
    }
    let (tax, maps) = build_universal_from_atoms(&collection);
    Ok((collection, tax, maps))
}
