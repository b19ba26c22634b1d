//! Synthetic corpus: deterministic precedent/follow-up/fused triples drawn
//! from eight follow-up scenario shapes (value refinement, comparison,
//! calculation over a prior result, extremum shift, demonstrative filtering,
//! grouping, sorting, and self-referential search), each over its own small
//! table. Values rotate deterministically so every triple is distinct.
//!
//! The search scenario's gold outputs repeat an entity ("... of X excluding
//! X"), which the fusion rules cannot produce; those triples are deliberate
//! hard cases with no reachable positive candidate.

use std::path::Path;

use crate::corpus::{Column, ColumnKind, CorpusError, QueryTriple, Table};

/// Number of triples produced by default.
pub const DEFAULT_TRIPLE_COUNT: usize = 50;

fn table(id: &str, cols: &[(&str, ColumnKind, bool)], rows: &[&[&str]]) -> Table {
    Table {
        id: id.to_string(),
        columns: cols
            .iter()
            .map(|(n, k, p)| Column { name: n.to_string(), kind: *k, is_person: *p })
            .collect(),
        rows: rows
            .iter()
            .map(|r| r.iter().map(|c| Some(c.to_string())).collect())
            .collect(),
    }
}

/// The eight fixed tables, one per scenario.
pub fn tables() -> Vec<Table> {
    vec![
        table(
            "networks",
            &[
                ("network", ColumnKind::Text, false),
                ("year", ColumnKind::Number, false),
                ("rating", ColumnKind::Number, false),
            ],
            &[
                &["CBC", "1995", "9"],
                &["TSN", "1996", "8"],
                &["NBC", "1997", "7"],
                &["Fox", "1998", "6"],
                &["Global", "1999", "5"],
            ],
        ),
        table(
            "earnings",
            &[
                ("player", ColumnKind::Text, true),
                ("money", ColumnKind::Number, false),
                ("rank", ColumnKind::Number, false),
            ],
            &[
                &["Smith", "120000", "1"],
                &["Bill Collins", "95000", "2"],
                &["Garcia", "87000", "3"],
                &["Jones", "61000", "4"],
                &["Lee", "52000", "5"],
                &["Diaz", "43000", "6"],
                &["Kim", "38000", "7"],
            ],
        ),
        table(
            "universities",
            &[
                ("universities", ColumnKind::Text, false),
                ("founded", ColumnKind::Number, false),
                ("students", ColumnKind::Number, false),
            ],
            &[
                &["Harvard", "1636", "21000"],
                &["Yale", "1701", "12000"],
                &["Princeton", "1746", "8000"],
                &["Rutgers", "1766", "50000"],
            ],
        ),
        table(
            "stadiums",
            &[
                ("stadium", ColumnKind::Text, false),
                ("capacity", ColumnKind::Number, false),
                ("attendance", ColumnKind::Number, false),
                ("seats", ColumnKind::Number, false),
            ],
            &[
                &["Lakeside", "40000", "38000", "39500"],
                &["Riverpark", "52000", "45000", "51000"],
                &["Northfield", "31000", "29000", "30500"],
            ],
        ),
        table(
            "studios",
            &[
                ("titles", ColumnKind::Text, false),
                ("studio", ColumnKind::Text, false),
                ("roles", ColumnKind::Number, false),
            ],
            &[
                &["Psycho", "paramount", "12"],
                &["Vertigo", "universal", "10"],
                &["Charade", "mgm", "14"],
                &["Gaslight", "rko", "9"],
                &["Rebecca", "selznick", "11"],
                &["Jezebel", "warner", "13"],
            ],
        ),
        table(
            "industries",
            &[
                ("industry", ColumnKind::Text, false),
                ("companies", ColumnKind::Number, false),
                ("countries", ColumnKind::Number, false),
                ("workers", ColumnKind::Number, false),
            ],
            &[
                &["steel", "120", "30", "90000"],
                &["textile", "340", "55", "200000"],
                &["software", "510", "48", "150000"],
            ],
        ),
        table(
            "chassis",
            &[
                ("chassis", ColumnKind::Text, false),
                ("year", ColumnKind::Number, false),
                ("maker", ColumnKind::Text, false),
            ],
            &[
                &["B195", "1995", "Benetton"],
                &["FW16", "1994", "Williams"],
                &["MP4", "1993", "McLaren"],
            ],
        ),
        table(
            "players",
            &[
                ("player", ColumnKind::Text, true),
                ("position", ColumnKind::Text, false),
                ("club", ColumnKind::Text, false),
            ],
            &[
                &["Sid O'Neill", "goalkeeper", "Rovers"],
                &["Ann Morgan", "striker", "United"],
                &["Pat Doyle", "defender", "City"],
                &["Lou Chen", "midfielder", "Albion"],
                &["Max Berg", "winger", "Wanderers"],
                &["Ira Holt", "forward", "Athletic"],
            ],
        ),
    ]
}

fn triple(table_id: &str, precedent: String, followup: String, fused: String) -> QueryTriple {
    QueryTriple {
        precedent,
        followup,
        fused,
        table_id: table_id.to_string(),
    }
}

/// Value refinement: the follow-up swaps one filter value.
fn analytics(i: usize) -> QueryTriple {
    let networks = ["CBC", "TSN", "NBC", "Fox", "Global"];
    let years = ["1995", "1996", "1997", "1998", "1999", "2000", "2001"];
    let a = networks[i % networks.len()];
    let b = networks[(i + 1) % networks.len()];
    let y = years[i % years.len()];
    triple(
        "networks",
        format!("In {y}, is there any network named {a}?"),
        format!("Any {b}?"),
        format!("In {y}, is there any network named {b}?"),
    )
}

/// Comparison: both values must survive side by side.
fn compare(i: usize) -> QueryTriple {
    let players = ["Smith", "Bill Collins", "Garcia", "Jones", "Lee", "Diaz", "Kim"];
    let a = players[i % players.len()];
    let b = players[(i + 2) % players.len()];
    triple(
        "earnings",
        format!("How much money has {a} earned?"),
        format!("Compare it with {b}."),
        format!("Compare money {a} earned with {b}."),
    )
}

/// Calculation over the precedent's result set via a possessive pronoun.
fn calc_stats(i: usize) -> QueryTriple {
    let years = ["1855", "1700", "1750", "1800", "1900", "1650"];
    let y = years[i % years.len()];
    triple(
        "universities",
        format!("List all universities founded before {y}."),
        "Show their number.".to_string(),
        format!("Show the number of all universities founded before {y}."),
    )
}

/// Extremum shift: aggregate and column both change.
fn extremum(i: usize) -> QueryTriple {
    let pairs = [
        ("capacity", "attendance"),
        ("attendance", "capacity"),
        ("capacity", "seats"),
        ("seats", "attendance"),
        ("attendance", "seats"),
        ("seats", "capacity"),
    ];
    let (a, b) = pairs[i % pairs.len()];
    triple(
        "stadiums",
        format!("Which stadium has the most {a}?"),
        format!("Which get the highest {b}?"),
        format!("Which stadium get the highest {b}?"),
    )
}

/// Demonstrative filter reference ("that studio").
fn filter(i: usize) -> QueryTriple {
    let studios = ["paramount", "universal", "mgm", "rko", "selznick", "warner"];
    let s = studios[i % studios.len()];
    triple(
        "studios",
        format!("How many roles are from studio {s}?"),
        "List all titles produced by that studio.".to_string(),
        format!("List all titles produced by studio {s}."),
    )
}

/// Grouping: the follow-up adds a grouping clause.
fn group(i: usize) -> QueryTriple {
    let pairs = [
        ("companies", "countries"),
        ("countries", "companies"),
        ("workers", "countries"),
        ("companies", "workers"),
        ("countries", "workers"),
        ("workers", "companies"),
    ];
    let (a, b) = pairs[i % pairs.len()];
    triple(
        "industries",
        format!("Show the industry which has the most {a}?"),
        format!("Show in different {b}."),
        format!("Show the industry which has the most {a} in different {b}."),
    )
}

/// Sorting: the follow-up appends a sort clause.
fn sort(i: usize) -> QueryTriple {
    let years = ["1990", "1992", "1994"];
    let keys = ["year", "maker"];
    let y = years[i % years.len()];
    let k = keys[i % keys.len()];
    triple(
        "chassis",
        format!("Show all chassis produced after the year {y}."),
        format!("Sort them by {k}."),
        format!("Show all chassis produced after the year {y} and sort by {k}."),
    )
}

/// Self-referential search: the gold repeats the entity, which fusion cannot
/// produce — a deliberate hard case.
fn search(i: usize) -> QueryTriple {
    let players = [
        "Sid O'Neill",
        "Ann Morgan",
        "Pat Doyle",
        "Lou Chen",
        "Max Berg",
        "Ira Holt",
    ];
    let p = players[i % players.len()];
    triple(
        "players",
        format!("What position did {p} play?"),
        "Which players else are in the same position?".to_string(),
        format!("Which players play in the position of {p} excluding {p}?"),
    )
}

type Builder = fn(usize) -> QueryTriple;

/// Scenario builders with their share of the default 50 triples.
const SCENARIOS: [(&str, Builder, usize); 8] = [
    ("analytics", analytics, 7),
    ("compare", compare, 7),
    ("calc_stats", calc_stats, 6),
    ("extremum", extremum, 6),
    ("filter", filter, 6),
    ("group", group, 6),
    ("sort", sort, 6),
    ("search", search, 6),
];

/// Generate `count` triples, round-robin across scenarios so any contiguous
/// split stays balanced. Counts beyond the default weights keep cycling.
pub fn triples(count: usize) -> Vec<QueryTriple> {
    let mut emitted = vec![0usize; SCENARIOS.len()];
    let mut out = Vec::with_capacity(count);
    let weight_total: usize = SCENARIOS.iter().map(|(_, _, w)| w).sum();
    while out.len() < count {
        for (si, (_, build, weight)) in SCENARIOS.iter().enumerate() {
            if out.len() >= count {
                break;
            }
            // Within one full cycle of `weight_total`, honor the weights;
            // afterwards keep rotating evenly.
            let cycle = out.len() / weight_total;
            if emitted[si] < (cycle + 1) * weight || *weight == 0 {
                out.push(build(emitted[si]));
                emitted[si] += 1;
            }
        }
    }
    out
}

/// Scenario name for triple `index` within the deterministic stream, for
/// diagnostics.
pub fn scenario_of(index: usize) -> &'static str {
    // Reproduce the round-robin order lazily.
    let mut emitted = vec![0usize; SCENARIOS.len()];
    let weight_total: usize = SCENARIOS.iter().map(|(_, _, w)| w).sum();
    let mut n = 0;
    loop {
        for (si, (name, _, weight)) in SCENARIOS.iter().enumerate() {
            let cycle = n / weight_total;
            if emitted[si] < (cycle + 1) * weight || *weight == 0 {
                if n == index {
                    return name;
                }
                emitted[si] += 1;
                n += 1;
            }
        }
    }
}

/// Write `tables/<id>.json` files and a `triples.jsonl` under `dir`.
pub fn write_corpus(dir: &Path, count: usize) -> Result<(), CorpusError> {
    let tables_dir = dir.join("tables");
    let io_err = |path: &Path| {
        let path = path.display().to_string();
        move |source| CorpusError::Io { path, source }
    };
    std::fs::create_dir_all(&tables_dir).map_err(io_err(&tables_dir))?;
    for t in tables() {
        let path = tables_dir.join(format!("{}.json", t.id));
        let json = serde_json::to_string_pretty(&t).expect("table serializes");
        std::fs::write(&path, json).map_err(io_err(&path))?;
    }
    let ts = triples(count);
    crate::corpus::save_triples(&dir.join("triples.jsonl"), &ts)?;
    Ok(())
}
