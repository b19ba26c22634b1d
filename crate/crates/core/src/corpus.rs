//! Tables, query triples, and dataset splits.
//!
//! A corpus is a directory of table JSON files plus a JSONL file of
//! (precedent, follow-up, fused) query triples, each referencing a table id.
//! Column kinds and person-ness are inferred from cell contents when the
//! table file does not annotate them.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid json in {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("table {id}: {reason}")]
    InvalidTable { id: String, reason: String },
    #[error("{path}:{line}: {reason}")]
    InvalidTriple {
        path: String,
        line: usize,
        reason: String,
    },
    #[error("unknown table id {0:?}")]
    UnknownTable(String),
    #[error("invalid split: {0}")]
    InvalidSplit(String),
}

/// Inferred or annotated column content kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Text,
    Number,
    Date,
}

impl fmt::Display for ColumnKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColumnKind::Text => write!(f, "text"),
            ColumnKind::Number => write!(f, "number"),
            ColumnKind::Date => write!(f, "date"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
    /// Whether cells look like person names (drives pronoun grounding).
    pub is_person: bool,
}

/// A cell is either text or an explicit null.
pub type Cell = Option<String>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub id: String,
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Cell>>,
}

/// On-disk form: `kind` and `is_person` may be omitted and are then inferred.
#[derive(Debug, Deserialize)]
struct TableFile {
    id: String,
    columns: Vec<ColumnSpec>,
    rows: Vec<Vec<Cell>>,
}

#[derive(Debug, Deserialize)]
struct ColumnSpec {
    name: String,
    #[serde(default)]
    kind: Option<ColumnKind>,
    #[serde(default)]
    is_person: Option<bool>,
}

fn is_integer_or_decimal(s: &str) -> bool {
    let s = s.strip_prefix('-').unwrap_or(s);
    if s.is_empty() {
        return false;
    }
    // Accept 1990, 2.5, 1,000 and 1,000.25 but not 2.4.6 or bare separators.
    let mut dot_seen = false;
    let mut digit_seen = false;
    for (i, c) in s.char_indices() {
        match c {
            '0'..='9' => digit_seen = true,
            '.' if !dot_seen && i > 0 && i + 1 < s.len() => dot_seen = true,
            ',' if i > 0 && i + 1 < s.len() && !dot_seen => {}
            _ => return false,
        }
    }
    digit_seen
}

fn is_year(s: &str) -> bool {
    s.len() == 4 && s.chars().all(|c| c.is_ascii_digit()) && ('1'..='2').contains(&s.chars().next().unwrap())
}

fn is_date_like(s: &str) -> bool {
    // Day-month-year style numeric dates: 12/03/1995, 1995-03-12, 3-12-95.
    let parts: Vec<&str> = if s.contains('/') {
        s.split('/').collect()
    } else if s.contains('-') {
        s.split('-').collect()
    } else {
        return false;
    };
    parts.len() == 3
        && parts
            .iter()
            .all(|p| !p.is_empty() && p.len() <= 4 && p.chars().all(|c| c.is_ascii_digit()))
}

/// True when the token reads as a standalone number or date.
pub fn is_number_or_date(s: &str) -> bool {
    is_integer_or_decimal(s) || is_date_like(s)
}

const FUNCTION_WORDS: &[&str] = &[
    "the", "a", "an", "of", "in", "on", "at", "by", "to", "for", "and", "or", "from", "with",
];

fn looks_like_person(cell: &str) -> bool {
    let words: Vec<&str> = cell.split_whitespace().collect();
    if words.is_empty() || words.len() > 3 {
        return false;
    }
    words.iter().all(|w| {
        let mut chars = w.chars();
        match chars.next() {
            Some(c) if c.is_uppercase() => !FUNCTION_WORDS.contains(&w.to_lowercase().as_str()),
            _ => false,
        }
    }) && words.iter().all(|w| w.chars().any(|c| c.is_alphabetic()))
}

fn infer_kind(cells: &[&str]) -> ColumnKind {
    if cells.is_empty() {
        return ColumnKind::Text;
    }
    if cells.iter().all(|c| is_integer_or_decimal(c)) {
        ColumnKind::Number
    } else if cells.iter().all(|c| is_date_like(c) || is_year(c)) {
        ColumnKind::Date
    } else {
        ColumnKind::Text
    }
}

fn infer_is_person(cells: &[&str]) -> bool {
    if cells.is_empty() {
        return false;
    }
    let person = cells.iter().filter(|c| looks_like_person(c)).count();
    person * 2 > cells.len()
}

impl Table {
    /// Build a table from parts, inferring any unannotated column metadata.
    fn from_file(file: TableFile) -> Result<Table, CorpusError> {
        let id = file.id;
        if file.columns.is_empty() {
            return Err(CorpusError::InvalidTable {
                id,
                reason: "table has no columns".into(),
            });
        }
        let mut seen = HashSet::new();
        for c in &file.columns {
            if !seen.insert(c.name.to_lowercase()) {
                return Err(CorpusError::InvalidTable {
                    id,
                    reason: format!("duplicate column name {:?}", c.name),
                });
            }
        }
        for (i, row) in file.rows.iter().enumerate() {
            if row.len() != file.columns.len() {
                return Err(CorpusError::InvalidTable {
                    id,
                    reason: format!(
                        "row {} has {} cells, expected {}",
                        i,
                        row.len(),
                        file.columns.len()
                    ),
                });
            }
            for (j, cell) in row.iter().enumerate() {
                if let Some(text) = cell {
                    if text.trim().is_empty() {
                        return Err(CorpusError::InvalidTable {
                            id,
                            reason: format!("row {i} column {j}: empty cell text (use null)"),
                        });
                    }
                }
            }
        }
        let columns = file
            .columns
            .into_iter()
            .enumerate()
            .map(|(j, spec)| {
                let cells: Vec<&str> = file
                    .rows
                    .iter()
                    .filter_map(|r| r[j].as_deref())
                    .collect();
                Column {
                    kind: spec.kind.unwrap_or_else(|| infer_kind(&cells)),
                    is_person: spec.is_person.unwrap_or_else(|| infer_is_person(&cells)),
                    name: spec.name,
                }
            })
            .collect();
        Ok(Table {
            id,
            columns,
            rows: file.rows,
        })
    }

    /// Non-fatal quality notes (small tables still load and run).
    pub fn recommendations(&self) -> Vec<String> {
        let mut notes = Vec::new();
        if self.rows.len() < 8 {
            notes.push(format!(
                "table {}: only {} rows (8+ recommended)",
                self.id,
                self.rows.len()
            ));
        }
        if !self.columns.iter().any(|c| c.kind == ColumnKind::Number) {
            notes.push(format!("table {}: no numerical column", self.id));
        }
        notes
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        let lower = name.to_lowercase();
        self.columns.iter().position(|c| c.name.to_lowercase() == lower)
    }
}

/// Load one table JSON file, inferring missing column metadata.
pub fn load_table(path: &Path) -> Result<Table, CorpusError> {
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let file: TableFile = serde_json::from_str(&text).map_err(|source| CorpusError::Json {
        path: path.display().to_string(),
        source,
    })?;
    Table::from_file(file)
}

/// Tables by id; iteration order is the sorted id order.
#[derive(Debug, Default, Clone)]
pub struct TableRegistry {
    tables: BTreeMap<String, Table>,
}

impl TableRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, table: Table) {
        self.tables.insert(table.id.clone(), table);
    }

    /// Load every `*.json` file in a directory (sorted by file name).
    pub fn load_dir(dir: &Path) -> Result<Self, CorpusError> {
        let mut paths: Vec<_> = fs::read_dir(dir)
            .map_err(|source| CorpusError::Io {
                path: dir.display().to_string(),
                source,
            })?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "json"))
            .collect();
        paths.sort();
        let mut reg = Self::new();
        for p in paths {
            reg.insert(load_table(&p)?);
        }
        Ok(reg)
    }

    pub fn get(&self, id: &str) -> Result<&Table, CorpusError> {
        self.tables
            .get(id)
            .ok_or_else(|| CorpusError::UnknownTable(id.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = &Table> {
        self.tables.values()
    }

    pub fn len(&self) -> usize {
        self.tables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }
}

/// One training/evaluation example: a precedent query, an elliptical
/// follow-up, and the gold self-contained fusion, all over one table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryTriple {
    pub precedent: String,
    pub followup: String,
    pub fused: String,
    pub table_id: String,
}

/// Load triples from a JSONL file, validating table references.
pub fn load_triples(path: &Path, tables: &TableRegistry) -> Result<Vec<QueryTriple>, CorpusError> {
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut triples = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let triple: QueryTriple =
            serde_json::from_str(line).map_err(|e| CorpusError::InvalidTriple {
                path: path.display().to_string(),
                line: i + 1,
                reason: e.to_string(),
            })?;
        for (field, value) in [
            ("precedent", &triple.precedent),
            ("followup", &triple.followup),
            ("fused", &triple.fused),
        ] {
            if value.trim().is_empty() {
                return Err(CorpusError::InvalidTriple {
                    path: path.display().to_string(),
                    line: i + 1,
                    reason: format!("empty {field} query"),
                });
            }
        }
        if tables.get(&triple.table_id).is_err() {
            return Err(CorpusError::InvalidTriple {
                path: path.display().to_string(),
                line: i + 1,
                reason: format!("unknown table id {:?}", triple.table_id),
            });
        }
        triples.push(triple);
    }
    Ok(triples)
}

/// Write triples as JSONL.
pub fn save_triples(path: &Path, triples: &[QueryTriple]) -> Result<(), CorpusError> {
    let mut out = String::new();
    for t in triples {
        out.push_str(&serde_json::to_string(t).expect("triple serializes"));
        out.push('\n');
    }
    fs::write(path, out).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DatasetSplit {
    pub train: Vec<QueryTriple>,
    pub dev: Vec<QueryTriple>,
    pub test: Vec<QueryTriple>,
}

/// Deterministic seeded shuffle-then-partition of `0..len` into index lists.
/// `sizes` must sum to `len`.
pub fn split_indices(
    len: usize,
    sizes: (usize, usize, usize),
    seed: u64,
) -> Result<SplitFile, CorpusError> {
    let (n_train, n_dev, n_test) = sizes;
    if n_train + n_dev + n_test != len {
        return Err(CorpusError::InvalidSplit(format!(
            "sizes {n_train}+{n_dev}+{n_test} != {len} triples"
        )));
    }
    let mut order: Vec<usize> = (0..len).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    Ok(SplitFile {
        train: order[0..n_train].to_vec(),
        dev: order[n_train..n_train + n_dev].to_vec(),
        test: order[n_train + n_dev..].to_vec(),
    })
}

/// Deterministic seeded shuffle-then-partition. `sizes` must sum to the
/// number of triples.
pub fn split_dataset(
    triples: &[QueryTriple],
    sizes: (usize, usize, usize),
    seed: u64,
) -> Result<DatasetSplit, CorpusError> {
    let split = split_indices(triples.len(), sizes, seed)?;
    let pick = |ids: &[usize]| -> Vec<QueryTriple> {
        ids.iter().map(|&i| triples[i].clone()).collect()
    };
    Ok(DatasetSplit {
        train: pick(&split.train),
        dev: pick(&split.dev),
        test: pick(&split.test),
    })
}

/// Index-based predefined split, as stored in a split JSON file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitFile {
    pub train: Vec<usize>,
    pub dev: Vec<usize>,
    pub test: Vec<usize>,
}

/// Apply a predefined split verbatim. The three index lists must be
/// disjoint and together cover every triple exactly once.
pub fn apply_split_file(
    triples: &[QueryTriple],
    split: &SplitFile,
) -> Result<DatasetSplit, CorpusError> {
    let total = split.train.len() + split.dev.len() + split.test.len();
    if total != triples.len() {
        return Err(CorpusError::InvalidSplit(format!(
            "split covers {} indices but corpus has {} triples",
            total,
            triples.len()
        )));
    }
    let mut seen = HashSet::new();
    for &i in split.train.iter().chain(&split.dev).chain(&split.test) {
        if i >= triples.len() {
            return Err(CorpusError::InvalidSplit(format!(
                "index {i} out of range ({} triples)",
                triples.len()
            )));
        }
        if !seen.insert(i) {
            return Err(CorpusError::InvalidSplit(format!("index {i} appears twice")));
        }
    }
    let pick = |ids: &[usize]| ids.iter().map(|&i| triples[i].clone()).collect();
    Ok(DatasetSplit {
        train: pick(&split.train),
        dev: pick(&split.dev),
        test: pick(&split.test),
    })
}

pub fn load_split_file(path: &Path) -> Result<SplitFile, CorpusError> {
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| CorpusError::Json {
        path: path.display().to_string(),
        source,
    })
}
