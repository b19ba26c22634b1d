//! Symbol anonymization: map query tokens to typed symbol spans.
//!
//! Two sources of symbols: the table (column names -> `Col`, cell values and
//! free numbers/dates -> `Val`) and small per-kind lexicons (`Agg`, `Com`,
//! `Dir`, `Per`, `Pos`, `Dem`). Table matching is greedy longest-span
//! left-to-right and case-insensitive; table matches take precedence over
//! lexicon matches. A word listed under several lexicon kinds (e.g. "those"
//! as personal or demonstrative) multiplies the output into one sequence per
//! interpretation, capped to keep enumeration bounded.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{is_number_or_date, Table};

#[derive(Debug, thiserror::Error)]
pub enum AnonymizeError {
    #[error("query {query:?} has {count} symbol interpretations, more than the cap {cap}")]
    AmbiguityCapExceeded {
        query: String,
        count: usize,
        cap: usize,
    },
    #[error("lexicon file {path}: {reason}")]
    BadLexiconFile { path: String, reason: String },
}

/// Longest column-name or cell n-gram considered by the table matcher.
pub const MAX_NGRAM: usize = 6;
/// Default limit on interpretations produced for one query.
pub const DEFAULT_AMBIGUITY_CAP: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    pub lower: String,
    /// Position in the token sequence.
    pub index: usize,
}

/// The eight symbol kinds a span can take.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SymbolKind {
    /// Column name mention.
    Col,
    /// Cell value, number, or date.
    Val,
    /// Aggregation word (sum, average, count, ...).
    Agg,
    /// Comparison word (more, before, higher, ...).
    Com,
    /// Sort-direction word (ascending, descending).
    Dir,
    /// Personal pronoun (it, them, ...).
    Per,
    /// Possessive pronoun (their, its, ...).
    Pos,
    /// Demonstrative (that, same, other, ...).
    Dem,
}

impl SymbolKind {
    pub const ALL: [SymbolKind; 8] = [
        SymbolKind::Col,
        SymbolKind::Val,
        SymbolKind::Agg,
        SymbolKind::Com,
        SymbolKind::Dir,
        SymbolKind::Per,
        SymbolKind::Pos,
        SymbolKind::Dem,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SymbolKind::Col => "Col",
            SymbolKind::Val => "Val",
            SymbolKind::Agg => "Agg",
            SymbolKind::Com => "Com",
            SymbolKind::Dir => "Dir",
            SymbolKind::Per => "Per",
            SymbolKind::Pos => "Pos",
            SymbolKind::Dem => "Dem",
        }
    }

    /// Pronoun-like kinds get special treatment in segmentation (they may
    /// stand as plain O) and are ignored by symbol-consistency comparison.
    pub fn is_pronoun(self) -> bool {
        matches!(self, SymbolKind::Per | SymbolKind::Pos | SymbolKind::Dem)
    }

    pub fn ordinal(self) -> usize {
        SymbolKind::ALL.iter().position(|k| *k == self).unwrap()
    }
}

impl fmt::Display for SymbolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What a span is anchored to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Grounding {
    /// `Col`: index of the matched column.
    Column(usize),
    /// `Val` found in table cells: every column index containing the value.
    Cells(Vec<usize>),
    /// `Val` that is a free-standing number or date, not found in any cell.
    Literal,
    /// Lexicon kinds: the matched lexicon entry.
    Lexicon(String),
}

/// A typed token range `[start, end)` within one query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolSpan {
    pub kind: SymbolKind,
    pub start: usize,
    pub end: usize,
    pub grounding: Grounding,
}

impl SymbolSpan {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryRole {
    Precedent,
    Followup,
    Fused,
}

/// One interpretation of a query: its tokens plus non-overlapping symbol
/// spans sorted by start position.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolSequence {
    pub tokens: Vec<Token>,
    pub spans: Vec<SymbolSpan>,
    pub role: QueryRole,
}

/// One rendered position: either a plain word or a whole symbol span
/// collapsed to its kind pseudo-token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedItem {
    /// Kind name for spans, lowercased surface otherwise.
    pub text: String,
    /// Index into the owning sequence's (or pair's) span list.
    pub span: Option<usize>,
    pub kind: Option<SymbolKind>,
    pub token_start: usize,
    pub token_end: usize,
}

impl SymbolSequence {
    /// Rendered form with every span collapsed to one pseudo-token.
    pub fn rendered_items(&self) -> Vec<RenderedItem> {
        let mut items = Vec::new();
        let mut pos = 0;
        for (si, span) in self.spans.iter().enumerate() {
            while pos < span.start {
                items.push(RenderedItem {
                    text: self.tokens[pos].lower.clone(),
                    span: None,
                    kind: None,
                    token_start: pos,
                    token_end: pos + 1,
                });
                pos += 1;
            }
            items.push(RenderedItem {
                text: span.kind.as_str().to_string(),
                span: Some(si),
                kind: Some(span.kind),
                token_start: span.start,
                token_end: span.end,
            });
            pos = span.end;
        }
        while pos < self.tokens.len() {
            items.push(RenderedItem {
                text: self.tokens[pos].lower.clone(),
                span: None,
                kind: None,
                token_start: pos,
                token_end: pos + 1,
            });
            pos += 1;
        }
        items
    }

    /// Human-readable anonymized form, e.g. "show the Agg of Col".
    pub fn render(&self) -> String {
        self.rendered_items()
            .iter()
            .map(|i| i.text.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn rendered_len(&self) -> usize {
        self.tokens.len() - self.spans.iter().map(SymbolSpan::len).sum::<usize>()
            + self.spans.len()
    }

    /// Number of leading tokens before the first span (the sentence pattern).
    /// With no spans this is the whole query.
    pub fn pattern_token_len(&self) -> usize {
        self.spans.first().map_or(self.tokens.len(), |s| s.start)
    }

    /// Surface text of a token range.
    pub fn surface(&self, start: usize, end: usize) -> String {
        self.tokens[start..end]
            .iter()
            .map(|t| t.surface.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Original token surfaces; expanding every span back to its tokens must
    /// reproduce exactly this.
    pub fn reconstruct(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.tokens.len());
        for item in self.rendered_items() {
            for t in &self.tokens[item.token_start..item.token_end] {
                out.push(t.surface.clone());
            }
        }
        out
    }
}

/// A precedent interpretation paired with a follow-up interpretation. Spans
/// are addressed by a single global index: precedent spans first, then
/// follow-up spans.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedSymbolSequence {
    pub precedent: SymbolSequence,
    pub followup: SymbolSequence,
}

impl PairedSymbolSequence {
    /// Rendered position where the follow-up begins.
    pub fn boundary(&self) -> usize {
        self.precedent.rendered_len()
    }

    pub fn span_count(&self) -> usize {
        self.precedent.spans.len() + self.followup.spans.len()
    }

    pub fn span(&self, global: usize) -> &SymbolSpan {
        let p = self.precedent.spans.len();
        if global < p {
            &self.precedent.spans[global]
        } else {
            &self.followup.spans[global - p]
        }
    }

    /// Side-local sequence and span index for a global span index.
    pub fn side_of(&self, global: usize) -> (&SymbolSequence, usize) {
        let p = self.precedent.spans.len();
        if global < p {
            (&self.precedent, global)
        } else {
            (&self.followup, global - p)
        }
    }

    /// Concatenated rendered items with span indices rebased to global.
    pub fn rendered_items(&self) -> Vec<RenderedItem> {
        let p = self.precedent.spans.len();
        let mut items = self.precedent.rendered_items();
        items.extend(self.followup.rendered_items().into_iter().map(|mut i| {
            if let Some(s) = i.span {
                i.span = Some(s + p);
            }
            i
        }));
        items
    }

    /// Total rendered length (both queries).
    pub fn rendered_len(&self) -> usize {
        self.precedent.rendered_len() + self.followup.rendered_len()
    }
}

const PUNCT: &[char] = &['?', '!', '.', ',', ';', ':', '(', ')', '"', '\''];

pub fn is_punctuation(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| PUNCT.contains(&c))
}

/// Whitespace tokenization with punctuation split off, except inside tokens
/// that read as numbers/dates ("2.4.6" and "1,000" stay whole, as does the
/// apostrophe in "O'Neill").
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens: Vec<String> = Vec::new();
    for chunk in text.split_whitespace() {
        let mut rest = chunk;
        let mut leading: Vec<String> = Vec::new();
        while rest.chars().count() > 1 {
            let first = rest.chars().next().unwrap();
            if PUNCT.contains(&first) && !is_number_or_date(rest) {
                leading.push(first.to_string());
                rest = &rest[first.len_utf8()..];
            } else {
                break;
            }
        }
        let mut trailing: Vec<String> = Vec::new();
        while rest.chars().count() > 1 {
            let last = rest.chars().last().unwrap();
            if PUNCT.contains(&last) && !is_number_or_date(rest) {
                trailing.push(last.to_string());
                rest = &rest[..rest.len() - last.len_utf8()];
            } else {
                break;
            }
        }
        tokens.extend(leading);
        if !rest.is_empty() {
            tokens.push(rest.to_string());
        }
        tokens.extend(trailing.into_iter().rev());
    }
    tokens
        .into_iter()
        .enumerate()
        .map(|(index, surface)| Token {
            lower: surface.to_lowercase(),
            surface,
            index,
        })
        .collect()
}

/// Per-kind word lists for the six lexicon-driven symbol kinds.
#[derive(Debug, Clone)]
pub struct Lexicons {
    by_kind: BTreeMap<SymbolKind, BTreeSet<String>>,
}

/// Override file format: kind name (lowercased) to word list.
#[derive(Debug, Deserialize)]
struct LexiconFile(BTreeMap<String, Vec<String>>);

impl Default for Lexicons {
    fn default() -> Self {
        Self::builtin()
    }
}

impl Lexicons {
    /// Curated built-in lists. "her" (personal/possessive) and "those"
    /// (personal/demonstrative) are deliberately ambiguous.
    pub fn builtin() -> Self {
        let mut by_kind = BTreeMap::new();
        let mut add = |kind: SymbolKind, words: &[&str]| {
            by_kind.insert(
                kind,
                words.iter().map(|w| w.to_string()).collect::<BTreeSet<_>>(),
            );
        };
        add(
            SymbolKind::Agg,
            &[
                "average", "avg", "mean", "sum", "total", "count", "number", "maximum", "max",
                "minimum", "min", "most", "least", "highest", "lowest", "largest", "smallest",
                "fewest",
            ],
        );
        add(
            SymbolKind::Com,
            &[
                "more", "less", "fewer", "greater", "smaller", "higher", "lower", "later",
                "earlier", "before", "after", "above", "below", "over", "under",
            ],
        );
        add(
            SymbolKind::Dir,
            &["ascending", "descending", "asc", "desc", "increasing", "decreasing"],
        );
        add(
            SymbolKind::Per,
            &["it", "he", "she", "they", "them", "him", "her", "those"],
        );
        add(SymbolKind::Pos, &["their", "its", "his", "her", "theirs"]);
        add(
            SymbolKind::Dem,
            &["that", "this", "those", "these", "other", "others", "same"],
        );
        Lexicons { by_kind }
    }

    /// Built-ins with entries added from a JSON file `{kind: [words...]}`.
    pub fn with_overrides(path: &Path) -> Result<Self, AnonymizeError> {
        let text = std::fs::read_to_string(path).map_err(|e| AnonymizeError::BadLexiconFile {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        let file: LexiconFile =
            serde_json::from_str(&text).map_err(|e| AnonymizeError::BadLexiconFile {
                path: path.display().to_string(),
                reason: e.to_string(),
            })?;
        let mut lex = Self::builtin();
        for (name, words) in file.0 {
            let kind = SymbolKind::ALL
                .iter()
                .find(|k| k.as_str().eq_ignore_ascii_case(&name))
                .copied()
                .filter(|k| !matches!(k, SymbolKind::Col | SymbolKind::Val))
                .ok_or_else(|| AnonymizeError::BadLexiconFile {
                    path: path.display().to_string(),
                    reason: format!("unknown lexicon kind {name:?} (expected Agg/Com/Dir/Per/Pos/Dem)"),
                })?;
            let set = lex.by_kind.get_mut(&kind).unwrap();
            for w in words {
                set.insert(w.to_lowercase());
            }
        }
        Ok(lex)
    }

    /// Kinds listing this word, in fixed kind order.
    pub fn kinds_for(&self, word: &str) -> Vec<SymbolKind> {
        self.by_kind
            .iter()
            .filter(|(_, set)| set.contains(word))
            .map(|(k, _)| *k)
            .collect()
    }

    pub fn contains(&self, kind: SymbolKind, word: &str) -> bool {
        self.by_kind.get(&kind).is_some_and(|s| s.contains(word))
    }
}

/// Normalize a column name or cell for matching: tokenize and lowercase.
fn normalize_for_match(text: &str) -> String {
    tokenize(text)
        .iter()
        .map(|t| t.lower.as_str())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Greedy longest-span left-to-right matching against column names and cell
/// values plus free numbers/dates. Column matches win ties over cell matches;
/// a value occurring in several columns keeps all of them (earliest first).
pub fn match_table(tokens: &[Token], table: &Table) -> Vec<SymbolSpan> {
    let mut col_map: HashMap<String, usize> = HashMap::new();
    for (j, c) in table.columns.iter().enumerate() {
        col_map.entry(normalize_for_match(&c.name)).or_insert(j);
    }
    let mut cell_map: HashMap<String, BTreeSet<usize>> = HashMap::new();
    for row in &table.rows {
        for (j, cell) in row.iter().enumerate() {
            if let Some(text) = cell {
                cell_map.entry(normalize_for_match(text)).or_default().insert(j);
            }
        }
    }

    let mut spans = Vec::new();
    let mut pos = 0;
    while pos < tokens.len() {
        let mut matched = false;
        let max_n = MAX_NGRAM.min(tokens.len() - pos);
        for n in (1..=max_n).rev() {
            let key = tokens[pos..pos + n]
                .iter()
                .map(|t| t.lower.as_str())
                .collect::<Vec<_>>()
                .join(" ");
            if let Some(&j) = col_map.get(&key) {
                spans.push(SymbolSpan {
                    kind: SymbolKind::Col,
                    start: pos,
                    end: pos + n,
                    grounding: Grounding::Column(j),
                });
                pos += n;
                matched = true;
                break;
            }
            if let Some(cols) = cell_map.get(&key) {
                spans.push(SymbolSpan {
                    kind: SymbolKind::Val,
                    start: pos,
                    end: pos + n,
                    grounding: Grounding::Cells(cols.iter().copied().collect()),
                });
                pos += n;
                matched = true;
                break;
            }
        }
        if !matched {
            if is_number_or_date(&tokens[pos].surface) {
                spans.push(SymbolSpan {
                    kind: SymbolKind::Val,
                    start: pos,
                    end: pos + 1,
                    grounding: Grounding::Literal,
                });
            }
            pos += 1;
        }
    }
    spans
}

/// Single-token lexicon matches. A word under several kinds yields one span
/// per kind (same range), in fixed kind order.
pub fn match_lexicons(tokens: &[Token], lexicons: &Lexicons) -> Vec<SymbolSpan> {
    let mut spans = Vec::new();
    for t in tokens {
        for kind in lexicons.kinds_for(&t.lower) {
            spans.push(SymbolSpan {
                kind,
                start: t.index,
                end: t.index + 1,
                grounding: Grounding::Lexicon(t.lower.clone()),
            });
        }
    }
    spans
}

/// Anonymize one query against a table. Returns one `SymbolSequence` per
/// interpretation of lexicon-ambiguous words, in deterministic order, erroring
/// past `cap` interpretations. Table matches take precedence over lexicon
/// matches on overlapping tokens.
pub fn anonymize(
    text: &str,
    table: &Table,
    lexicons: &Lexicons,
    role: QueryRole,
    cap: usize,
) -> Result<Vec<SymbolSequence>, AnonymizeError> {
    let tokens = tokenize(text);
    let table_spans = match_table(&tokens, table);
    let covered: Vec<bool> = {
        let mut v = vec![false; tokens.len()];
        for s in &table_spans {
            for slot in &mut v[s.start..s.end] {
                *slot = true;
            }
        }
        v
    };

    // Group alternative kinds per lexicon position (table-covered positions
    // are skipped entirely).
    let mut alternatives: Vec<(usize, Vec<SymbolKind>)> = Vec::new();
    for t in &tokens {
        if covered[t.index] {
            continue;
        }
        let kinds = lexicons.kinds_for(&t.lower);
        if !kinds.is_empty() {
            alternatives.push((t.index, kinds));
        }
    }

    let count: usize = alternatives.iter().map(|(_, ks)| ks.len()).product();
    if count > cap {
        return Err(AnonymizeError::AmbiguityCapExceeded {
            query: text.to_string(),
            count,
            cap,
        });
    }

    // Mixed-radix enumeration: earlier positions vary slowest, kinds in
    // fixed order, so output order is deterministic.
    let mut sequences = Vec::with_capacity(count);
    for mut idx in 0..count.max(1) {
        let mut choice = Vec::with_capacity(alternatives.len());
        for (_, kinds) in alternatives.iter().rev() {
            choice.push(idx % kinds.len());
            idx /= kinds.len();
        }
        choice.reverse();
        let mut spans = table_spans.clone();
        for ((pos, kinds), &pick) in alternatives.iter().zip(&choice) {
            spans.push(SymbolSpan {
                kind: kinds[pick],
                start: *pos,
                end: pos + 1,
                grounding: Grounding::Lexicon(tokens[*pos].lower.clone()),
            });
        }
        spans.sort_by_key(|s| s.start);
        sequences.push(SymbolSequence {
            tokens: tokens.clone(),
            spans,
            role,
        });
    }
    Ok(sequences)
}

/// Cartesian pairing of precedent and follow-up interpretations.
pub fn pair_sequences(
    precedents: &[SymbolSequence],
    followups: &[SymbolSequence],
) -> Vec<PairedSymbolSequence> {
    let mut pairs = Vec::with_capacity(precedents.len() * followups.len());
    for p in precedents {
        for f in followups {
            pairs.push(PairedSymbolSequence {
                precedent: p.clone(),
                followup: f.clone(),
            });
        }
    }
    pairs
}
