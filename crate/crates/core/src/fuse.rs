//! Fusion: turn a chosen segment sequence plus intent into a self-contained
//! query.
//!
//! First, conflicting segment pairs are found across the two sides: same-type
//! segments conflict; value filters conflict only when their values live in
//! the same table column; a demonstrative-plus-column phrase conflicts with a
//! value filter describing that column; personal and possessive pronouns
//! conflict with the whole precedent remainder. Then the pairs are fused.
//! Under the refine intent the precedent's conflicting symbols are replaced
//! by their follow-up counterparts (symbol-for-symbol, rhetorical words
//! kept); under the append intent the two sides are kept side by side.
//! Pronouns always resolve to grounded precedent text. The output is the
//! follow-up fusion when fusion actually changed the follow-up, otherwise
//! the precedent fusion.

use serde::Serialize;

use crate::anonymize::{is_punctuation, PairedSymbolSequence, SymbolKind, Token};
use crate::segment::{Intent, Segment, SegmentSequence, SegmentType, Side};

/// Words that join two compared phrases; reused when appending.
pub const CONNECTIVES: [&str; 8] =
    ["with", "and", "or", "to", "versus", "vs", "against", "than"];

/// Auxiliary verbs dropped from pronoun replacement text.
const AUXILIARIES: [&str; 10] =
    ["is", "are", "was", "were", "has", "have", "had", "do", "does", "did"];

/// Determiners kept when they close the precedent's sentence prefix.
const KEPT_DETERMINERS: [&str; 6] = ["the", "a", "an", "all", "every", "each"];

/// Why two segments conflict. Serialized names match the display strings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ConflictKind {
    /// Same segment type on both sides.
    #[serde(rename = "same-type")]
    SameType,
    /// Two value filters over the same column.
    #[serde(rename = "value-column")]
    ValColumn,
    /// Demonstrative-plus-column phrase against a filter on that column.
    #[serde(rename = "demonstrative-column")]
    PronounDemCol,
    /// Personal pronoun standing for the precedent remainder.
    #[serde(rename = "personal-pronoun")]
    PronounGlobal,
    /// Possessive pronoun standing for the precedent remainder.
    #[serde(rename = "possessive-pronoun")]
    PronounPossessive,
}

impl std::fmt::Display for ConflictKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ConflictKind::SameType => "same-type",
            ConflictKind::ValColumn => "value-column",
            ConflictKind::PronounDemCol => "demonstrative-column",
            ConflictKind::PronounGlobal => "personal-pronoun",
            ConflictKind::PronounPossessive => "possessive-pronoun",
        };
        f.write_str(s)
    }
}

/// What a follow-up segment conflicts with on the precedent side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PrecedentTarget {
    /// Index into the segment sequence.
    Segment(usize),
    /// Everything not already consumed by other pairs.
    Remainder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ConflictPair {
    /// Index of the follow-up segment in the segment sequence.
    pub followup: usize,
    pub target: PrecedentTarget,
    pub kind: ConflictKind,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FusionResult {
    pub precedent_fusion: String,
    pub followup_fusion: String,
    /// The selected self-contained query.
    pub output: String,
    pub intent: Intent,
    pub conflicts: Vec<ConflictPair>,
}

/// Side-local token extent (first to last member) of a segment.
fn extent(seg: &Segment, pair: &PairedSymbolSequence) -> (usize, usize) {
    let mut start = usize::MAX;
    let mut end = 0;
    for &m in &seg.members {
        let span = pair.span(m);
        start = start.min(span.start);
        end = end.max(span.end);
    }
    (start, end)
}

/// The column a value filter talks about: its column symbol's column if it
/// has one, else the first column its value grounds to, else none (a free
/// literal).
fn filter_column(seg: &Segment, pair: &PairedSymbolSequence) -> Option<usize> {
    use crate::anonymize::Grounding;
    for &m in &seg.members {
        let span = pair.span(m);
        if span.kind == SymbolKind::Col {
            if let Grounding::Column(c) = span.grounding {
                return Some(c);
            }
        }
    }
    for &m in &seg.members {
        let span = pair.span(m);
        if span.kind == SymbolKind::Val {
            if let Grounding::Cells(cols) = &span.grounding {
                return cols.first().copied();
            }
        }
    }
    None
}

/// The column named by a demonstrative-plus-column segment.
fn demonstrative_column(seg: &Segment, pair: &PairedSymbolSequence) -> Option<usize> {
    use crate::anonymize::Grounding;
    for &m in &seg.members {
        let span = pair.span(m);
        if span.kind == SymbolKind::Col {
            if let Grounding::Column(c) = span.grounding {
                return Some(c);
            }
        }
    }
    None
}

/// Find conflicting pairs. Column-grounded rules run first (value filters
/// over the same column; demonstrative references), then remaining same-type
/// pairs left to right, then personal/possessive pronouns claim the
/// remainder. Every segment joins at most one pair.
pub fn find_conflicts(
    pair: &PairedSymbolSequence,
    segs: &SegmentSequence,
) -> Vec<ConflictPair> {
    let followup_idxs: Vec<usize> = segs
        .segments
        .iter()
        .enumerate()
        .filter(|(_, s)| s.side == Side::Followup && s.seg_type != SegmentType::Other)
        .map(|(i, _)| i)
        .collect();
    let precedent_idxs: Vec<usize> = segs
        .segments
        .iter()
        .enumerate()
        .filter(|(_, s)| s.side == Side::Precedent && s.seg_type != SegmentType::Other)
        .map(|(i, _)| i)
        .collect();

    let mut used_p = vec![false; segs.segments.len()];
    let mut used_f = vec![false; segs.segments.len()];
    let mut out = Vec::new();
    let mut push = |fi: usize, target: PrecedentTarget, kind: ConflictKind,
                    used_f: &mut Vec<bool>, used_p: &mut Vec<bool>| {
        used_f[fi] = true;
        if let PrecedentTarget::Segment(pi) = target {
            used_p[pi] = true;
        }
        out.push(ConflictPair { followup: fi, target, kind });
    };

    // Column-grounded rules first.
    for &fi in &followup_idxs {
        let fseg = &segs.segments[fi];
        match fseg.seg_type {
            SegmentType::FilterValue => {
                let fcol = filter_column(fseg, pair);
                if let Some(&pi) = precedent_idxs.iter().find(|&&pi| {
                    !used_p[pi]
                        && segs.segments[pi].seg_type == SegmentType::FilterValue
                        && filter_column(&segs.segments[pi], pair) == fcol
                }) {
                    push(fi, PrecedentTarget::Segment(pi), ConflictKind::ValColumn, &mut used_f, &mut used_p);
                }
            }
            SegmentType::DemonstrativeRef => {
                let Some(col) = demonstrative_column(fseg, pair) else {
                    continue;
                };
                if let Some(&pi) = precedent_idxs.iter().find(|&&pi| {
                    !used_p[pi]
                        && segs.segments[pi].seg_type == SegmentType::FilterValue
                        && filter_column(&segs.segments[pi], pair) == Some(col)
                }) {
                    push(fi, PrecedentTarget::Segment(pi), ConflictKind::PronounDemCol, &mut used_f, &mut used_p);
                }
            }
            _ => {}
        }
    }

    // Remaining same-type pairs, left to right. Value filters only conflict
    // through the column rule above.
    for &fi in &followup_idxs {
        if used_f[fi] {
            continue;
        }
        let t = segs.segments[fi].seg_type;
        let same_type_eligible = matches!(
            t,
            SegmentType::Select
                | SegmentType::FilterColumnPair
                | SegmentType::Group
                | SegmentType::Order
        );
        if !same_type_eligible {
            continue;
        }
        if let Some(&pi) = precedent_idxs
            .iter()
            .find(|&&pi| !used_p[pi] && segs.segments[pi].seg_type == t)
        {
            push(fi, PrecedentTarget::Segment(pi), ConflictKind::SameType, &mut used_f, &mut used_p);
        }
    }

    // Pronouns claim the remainder.
    for &fi in &followup_idxs {
        if used_f[fi] {
            continue;
        }
        match segs.segments[fi].seg_type {
            SegmentType::PersonalPronoun => {
                push(fi, PrecedentTarget::Remainder, ConflictKind::PronounGlobal, &mut used_f, &mut used_p);
            }
            SegmentType::PossessivePronoun => {
                push(fi, PrecedentTarget::Remainder, ConflictKind::PronounPossessive, &mut used_f, &mut used_p);
            }
            _ => {}
        }
    }

    out
}

/// The precedent text a pronoun stands for: the precedent minus its sentence
/// prefix (a trailing determiner survives), minus extents consumed by other
/// conflict pairs, minus auxiliary verbs and punctuation. Possessive
/// pronouns wrap the result with "of".
pub fn resolve_pronoun_text(
    pair: &PairedSymbolSequence,
    segs: &SegmentSequence,
    conflicts: &[ConflictPair],
    possessive: bool,
) -> String {
    let tokens = &pair.precedent.tokens;
    let mut keep = vec![true; tokens.len()];
    let prefix_end = pair.precedent.spans.first().map_or(0, |s| s.start);
    for k in keep.iter_mut().take(prefix_end) {
        *k = false;
    }
    if prefix_end > 0 && KEPT_DETERMINERS.contains(&tokens[prefix_end - 1].lower.as_str()) {
        keep[prefix_end - 1] = true;
    }
    for c in conflicts {
        if let PrecedentTarget::Segment(pi) = c.target {
            let (start, end) = extent(&segs.segments[pi], pair);
            for k in keep.iter_mut().take(end).skip(start) {
                *k = false;
            }
        }
    }
    for t in tokens {
        if AUXILIARIES.contains(&t.lower.as_str()) || is_punctuation(&t.surface) {
            keep[t.index] = false;
        }
    }
    let words: Vec<&str> = tokens
        .iter()
        .filter(|t| keep[t.index])
        .map(|t| t.surface.as_str())
        .collect();
    let body = words.join(" ");
    if possessive {
        format!("of {body}")
    } else {
        body
    }
}

/// Pending token-level edits on one side.
#[derive(Default)]
struct Edits {
    /// Replace token range `[start, end)` with the given words.
    replace: Vec<(usize, usize, Vec<String>)>,
    /// Insert words before this token position.
    insert: Vec<(usize, Vec<String>)>,
}

impl Edits {
    fn apply(&self, tokens: &[Token]) -> Vec<String> {
        let mut replace = self.replace.clone();
        replace.sort_by_key(|r| r.0);
        let mut out = Vec::with_capacity(tokens.len());
        let mut pos = 0;
        while pos <= tokens.len() {
            for (at, words) in &self.insert {
                if *at == pos {
                    out.extend(words.iter().cloned());
                }
            }
            if pos == tokens.len() {
                break;
            }
            if let Some((_, end, words)) = replace.iter().find(|r| r.0 == pos) {
                out.extend(words.iter().cloned());
                pos = (*end).max(pos + 1);
            } else {
                out.push(tokens[pos].surface.clone());
                pos += 1;
            }
        }
        out
    }
}

/// Join words into a sentence, attaching punctuation to the previous word.
pub fn detokenize(words: &[String]) -> String {
    let mut out = String::new();
    for w in words {
        if w.is_empty() {
            continue;
        }
        if out.is_empty() || is_punctuation(w) {
            out.push_str(w);
        } else {
            out.push(' ');
            out.push_str(w);
        }
    }
    out
}

fn surface_words(tokens: &[Token], start: usize, end: usize) -> Vec<String> {
    tokens[start..end].iter().map(|t| t.surface.clone()).collect()
}

fn split_words(text: &str) -> Vec<String> {
    text.split_whitespace().map(|w| w.to_string()).collect()
}

/// Substitute follow-up symbols into the precedent segment, kind for kind.
/// Precedent symbols without a counterpart keep their text, as do the
/// rhetorical words between them.
fn symbol_level_replace(
    pseg: &Segment,
    fseg: &Segment,
    pair: &PairedSymbolSequence,
    edits: &mut Edits,
) {
    let mut taken = vec![false; pseg.members.len()];
    for &fm in &fseg.members {
        let fspan = pair.span(fm);
        let Some(slot) = (0..pseg.members.len())
            .find(|&i| !taken[i] && pair.span(pseg.members[i]).kind == fspan.kind)
        else {
            continue;
        };
        taken[slot] = true;
        let pspan = pair.span(pseg.members[slot]);
        let words = surface_words(&pair.followup.tokens, fspan.start, fspan.end);
        edits.replace.push((pspan.start, pspan.end, words));
    }
}

/// The follow-up's connective token index just before a segment, if any.
fn connective_before(
    fseg: &Segment,
    pair: &PairedSymbolSequence,
) -> Option<usize> {
    let (start, _) = extent(fseg, pair);
    if start == 0 {
        return None;
    }
    let prev = &pair.followup.tokens[start - 1];
    CONNECTIVES.contains(&prev.lower.as_str()).then_some(start - 1)
}

/// Fuse one candidate segmentation under its intent.
pub fn fuse(
    pair: &PairedSymbolSequence,
    segs: &SegmentSequence,
    intent: Intent,
    conflicts: &[ConflictPair],
) -> FusionResult {
    let mut p_edits = Edits::default();
    let mut f_edits = Edits::default();

    for c in conflicts {
        let fseg = &segs.segments[c.followup];
        match c.kind {
            ConflictKind::SameType | ConflictKind::ValColumn => {
                let PrecedentTarget::Segment(pi) = c.target else {
                    continue;
                };
                let pseg = &segs.segments[pi];
                match intent {
                    Intent::Refine => {
                        symbol_level_replace(pseg, fseg, pair, &mut p_edits);
                    }
                    Intent::Append => {
                        let (fs, fe) = extent(fseg, pair);
                        let (_, pe) = extent(pseg, pair);
                        let conn = connective_before(fseg, pair);
                        let conn_word = conn
                            .map(|i| pair.followup.tokens[i].surface.to_lowercase())
                            .unwrap_or_else(|| "and".to_string());
                        let mut words = vec![conn_word];
                        words.extend(surface_words(&pair.followup.tokens, fs, fe));
                        p_edits.insert.push((pe, words));
                        if let Some(ci) = conn {
                            let (ps, pe) = extent(pseg, pair);
                            let p_words = surface_words(&pair.precedent.tokens, ps, pe);
                            f_edits.insert.push((ci, p_words));
                        }
                    }
                }
            }
            ConflictKind::PronounDemCol => {
                let PrecedentTarget::Segment(pi) = c.target else {
                    continue;
                };
                let (ps, pe) = extent(&segs.segments[pi], pair);
                let (fs, fe) = extent(fseg, pair);
                f_edits
                    .replace
                    .push((fs, fe, surface_words(&pair.precedent.tokens, ps, pe)));
            }
            ConflictKind::PronounGlobal => {
                let (fs, fe) = extent(fseg, pair);
                let text = resolve_pronoun_text(pair, segs, conflicts, false);
                f_edits.replace.push((fs, fe, split_words(&text)));
            }
            ConflictKind::PronounPossessive => {
                let (fs, fe) = extent(fseg, pair);
                f_edits.replace.push((fs, fe, vec!["the".to_string()]));
                let text = resolve_pronoun_text(pair, segs, conflicts, true);
                let of_words = split_words(&text);
                // Attach after the next follow-up segment's extent; with no
                // following segment, before trailing punctuation.
                let next_end = segs
                    .segments
                    .iter()
                    .filter(|s| {
                        s.side == Side::Followup
                            && !s.seg_type.is_pronoun()
                            && s.seg_type != SegmentType::Other
                    })
                    .map(|s| extent(s, pair))
                    .filter(|(s, _)| *s >= fe)
                    .map(|(_, e)| e)
                    .min();
                let at = next_end.unwrap_or_else(|| {
                    let toks = &pair.followup.tokens;
                    let mut end = toks.len();
                    while end > 0 && is_punctuation(&toks[end - 1].surface) {
                        end -= 1;
                    }
                    end
                });
                f_edits.insert.push((at, of_words));
            }
        }
    }

    let mut precedent_words = p_edits.apply(&pair.precedent.tokens);

    // Appending with nothing paired: graft the follow-up clause onto the
    // precedent with "and" (pronoun spans and punctuation dropped, first
    // word lowercased).
    if intent == Intent::Append && conflicts.is_empty() {
        let has_content_segment = segs.segments.iter().any(|s| {
            s.side == Side::Followup
                && !s.seg_type.is_pronoun()
                && s.seg_type != SegmentType::Other
        });
        if has_content_segment {
            let mut trailing = Vec::new();
            while precedent_words
                .last()
                .is_some_and(|w| is_punctuation(w))
            {
                trailing.insert(0, precedent_words.pop().unwrap());
            }
            let mut clause = Vec::new();
            for t in &pair.followup.tokens {
                let in_pronoun_span = pair.followup.spans.iter().any(|s| {
                    s.kind.is_pronoun() && s.start <= t.index && t.index < s.end
                });
                if in_pronoun_span || is_punctuation(&t.surface) {
                    continue;
                }
                clause.push(t.surface.clone());
            }
            if !clause.is_empty() {
                clause[0] = clause[0].to_lowercase();
                precedent_words.push("and".to_string());
                precedent_words.extend(clause);
            }
            precedent_words.extend(trailing);
        }
    }

    let followup_words = f_edits.apply(&pair.followup.tokens);
    let precedent_fusion = detokenize(&precedent_words);
    let followup_fusion = detokenize(&followup_words);
    let original_followup = detokenize(
        &pair
            .followup
            .tokens
            .iter()
            .map(|t| t.surface.clone())
            .collect::<Vec<_>>(),
    );
    let output = if followup_fusion != original_followup {
        followup_fusion.clone()
    } else {
        precedent_fusion.clone()
    };
    FusionResult {
        precedent_fusion,
        followup_fusion,
        output,
        intent,
        conflicts: conflicts.to_vec(),
    }
}

/// Convenience: conflicts plus fusion in one call.
pub fn fuse_segments(
    pair: &PairedSymbolSequence,
    segs: &SegmentSequence,
    intent: Intent,
) -> FusionResult {
    let conflicts = find_conflicts(pair, segs);
    fuse(pair, segs, intent, &conflicts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anonymize::{anonymize, Lexicons, QueryRole, DEFAULT_AMBIGUITY_CAP};
    use crate::corpus::{Column, ColumnKind, Table};

    fn table(id: &str, cols: &[(&str, ColumnKind, bool)], rows: &[&[&str]]) -> Table {
        Table {
            id: id.to_string(),
            columns: cols
                .iter()
                .map(|(n, k, p)| Column {
                    name: n.to_string(),
                    kind: *k,
                    is_person: *p,
                })
                .collect(),
            rows: rows
                .iter()
                .map(|r| r.iter().map(|c| Some(c.to_string())).collect())
                .collect(),
        }
    }

    fn pair_for(table: &Table, precedent: &str, followup: &str) -> PairedSymbolSequence {
        let lex = Lexicons::builtin();
        let p = anonymize(precedent, table, &lex, QueryRole::Precedent, DEFAULT_AMBIGUITY_CAP)
            .unwrap();
        let f = anonymize(followup, table, &lex, QueryRole::Followup, DEFAULT_AMBIGUITY_CAP)
            .unwrap();
        assert_eq!(p.len(), 1, "ambiguous precedent fixture");
        assert_eq!(f.len(), 1, "ambiguous follow-up fixture");
        PairedSymbolSequence {
            precedent: p.into_iter().next().unwrap(),
            followup: f.into_iter().next().unwrap(),
        }
    }

    fn seg(t: SegmentType, side: Side, members: &[usize]) -> Segment {
        Segment {
            seg_type: t,
            members: members.to_vec(),
            side,
        }
    }

    fn kinds(pair: &PairedSymbolSequence) -> Vec<(SymbolKind, String)> {
        let mut v = Vec::new();
        for side in [&pair.precedent, &pair.followup] {
            for s in &side.spans {
                v.push((s.kind, side.surface(s.start, s.end)));
            }
        }
        v
    }

    #[test]
    fn refine_replaces_filter_value_in_matching_column_only() {
        let t = table(
            "networks",
            &[
                ("network", ColumnKind::Text, false),
                ("year", ColumnKind::Number, false),
                ("rating", ColumnKind::Number, false),
            ],
            &[&["CBC", "1995", "9"], &["TSN", "1997", "8"]],
        );
        let pair = pair_for(&t, "In 1995, is there any network named CBC?", "Any TSN?");
        // Spans: 1995 (year cell), network (column), CBC (network cell) | TSN.
        assert_eq!(
            kinds(&pair),
            vec![
                (SymbolKind::Val, "1995".to_string()),
                (SymbolKind::Col, "network".to_string()),
                (SymbolKind::Val, "CBC".to_string()),
                (SymbolKind::Val, "TSN".to_string()),
            ]
        );
        let segs = SegmentSequence {
            segments: vec![
                seg(SegmentType::FilterValue, Side::Precedent, &[0]),
                seg(SegmentType::Select, Side::Precedent, &[1]),
                seg(SegmentType::FilterValue, Side::Precedent, &[2]),
                seg(SegmentType::FilterValue, Side::Followup, &[3]),
            ],
        };
        let conflicts = find_conflicts(&pair, &segs);
        assert_eq!(
            conflicts,
            vec![ConflictPair {
                followup: 3,
                target: PrecedentTarget::Segment(2),
                kind: ConflictKind::ValColumn,
            }],
            "the year filter must stay untouched"
        );
        let r = fuse(&pair, &segs, Intent::Refine, &conflicts);
        assert_eq!(r.precedent_fusion, "In 1995, is there any network named TSN?");
        assert_eq!(r.followup_fusion, "Any TSN?");
        assert_eq!(r.output, r.precedent_fusion, "unchanged follow-up falls back");
        assert!(!r.precedent_fusion.contains("CBC"));
    }

    #[test]
    fn refine_same_type_swaps_only_matching_symbol_kinds() {
        let t = table(
            "sales",
            &[
                ("sales", ColumnKind::Number, false),
                ("brand", ColumnKind::Text, false),
                ("year", ColumnKind::Number, false),
            ],
            &[&["100", "acme", "2018"]],
        );
        let pair = pair_for(
            &t,
            "Show the sum of sales by brand in the year 2018.",
            "How about the average?",
        );
        // Precedent spans: sum, sales, brand, year, 2018; follow-up: average.
        let segs = SegmentSequence {
            segments: vec![
                seg(SegmentType::Select, Side::Precedent, &[0, 1]),
                seg(SegmentType::Group, Side::Precedent, &[2]),
                seg(SegmentType::FilterValue, Side::Precedent, &[3, 4]),
                seg(SegmentType::Select, Side::Followup, &[5]),
            ],
        };
        let r = fuse_segments(&pair, &segs, Intent::Refine);
        assert_eq!(
            r.precedent_fusion,
            "Show the average of sales by brand in the year 2018."
        );
        assert_eq!(r.output, r.precedent_fusion);
        assert_eq!(r.conflicts.len(), 1);
        assert_eq!(r.conflicts[0].kind, ConflictKind::SameType);
    }

    #[test]
    fn append_inserts_counterpart_on_both_sides_of_connective() {
        let t = table(
            "earnings",
            &[
                ("player", ColumnKind::Text, true),
                ("money", ColumnKind::Number, false),
                ("rank", ColumnKind::Number, false),
            ],
            &[&["Smith", "100", "1"], &["Bill Collins", "90", "2"]],
        );
        let pair = pair_for(&t, "How much money has Smith earned?", "Compare it with Bill Collins.");
        // Precedent spans: money (col), Smith (player cell);
        // follow-up: it (Per), Bill Collins (player cell).
        let segs = SegmentSequence {
            segments: vec![
                seg(SegmentType::Select, Side::Precedent, &[0]),
                seg(SegmentType::FilterValue, Side::Precedent, &[1]),
                seg(SegmentType::PersonalPronoun, Side::Followup, &[2]),
                seg(SegmentType::FilterValue, Side::Followup, &[3]),
            ],
        };
        let conflicts = find_conflicts(&pair, &segs);
        assert_eq!(conflicts.len(), 2);
        assert_eq!(conflicts[0].kind, ConflictKind::ValColumn);
        assert_eq!(conflicts[1].kind, ConflictKind::PronounGlobal);
        let r = fuse(&pair, &segs, Intent::Append, &conflicts);
        assert_eq!(r.followup_fusion, "Compare money earned Smith with Bill Collins.");
        assert_eq!(r.output, r.followup_fusion);
        // Both compared values survive in the output.
        assert!(r.output.contains("Smith") && r.output.contains("Bill Collins"));
        assert_eq!(
            r.precedent_fusion,
            "How much money has Smith with Bill Collins earned?"
        );
    }

    #[test]
    fn possessive_pronoun_wraps_remainder_with_of() {
        let t = table(
            "universities",
            &[
                ("universities", ColumnKind::Text, false),
                ("founded", ColumnKind::Number, false),
                ("students", ColumnKind::Number, false),
            ],
            &[&["MIT", "1861", "11000"]],
        );
        let pair = pair_for(&t, "List all universities founded before 1855.", "Show their number.");
        // Precedent spans: universities, founded, before (Com), 1855;
        // follow-up: their (Pos), number (Agg).
        let segs = SegmentSequence {
            segments: vec![
                seg(SegmentType::Group, Side::Precedent, &[0]),
                seg(SegmentType::FilterValue, Side::Precedent, &[1, 2, 3]),
                seg(SegmentType::PossessivePronoun, Side::Followup, &[4]),
                seg(SegmentType::Select, Side::Followup, &[5]),
            ],
        };
        let r = fuse_segments(&pair, &segs, Intent::Refine);
        assert_eq!(
            r.followup_fusion,
            "Show the number of all universities founded before 1855."
        );
        assert_eq!(r.output, r.followup_fusion);
    }

    #[test]
    fn demonstrative_reference_pulls_precedent_filter_text() {
        let t = table(
            "studios",
            &[
                ("titles", ColumnKind::Text, false),
                ("studio", ColumnKind::Text, false),
                ("roles", ColumnKind::Number, false),
            ],
            &[&["Psycho", "paramount", "12"]],
        );
        let pair = pair_for(
            &t,
            "How many roles are from studio paramount?",
            "List all titles produced by that studio.",
        );
        // Precedent spans: roles, studio, paramount;
        // follow-up: titles, that (Dem), studio.
        let segs = SegmentSequence {
            segments: vec![
                seg(SegmentType::Select, Side::Precedent, &[0]),
                seg(SegmentType::FilterValue, Side::Precedent, &[1, 2]),
                seg(SegmentType::Select, Side::Followup, &[3]),
                seg(SegmentType::DemonstrativeRef, Side::Followup, &[4, 5]),
            ],
        };
        let conflicts = find_conflicts(&pair, &segs);
        assert_eq!(conflicts[0].kind, ConflictKind::PronounDemCol);
        let r = fuse(&pair, &segs, Intent::Refine, &conflicts);
        assert_eq!(r.followup_fusion, "List all titles produced by studio paramount.");
        assert_eq!(r.output, r.followup_fusion);
    }

    #[test]
    fn append_without_pairs_grafts_followup_clause() {
        let t = table(
            "chassis",
            &[
                ("chassis", ColumnKind::Text, false),
                ("year", ColumnKind::Number, false),
                ("maker", ColumnKind::Text, false),
            ],
            &[&["B195", "1995", "Benetton"]],
        );
        let pair = pair_for(&t, "Show all chassis produced after the year 1990.", "Sort them by year.");
        // Precedent spans: chassis, after (Com), year, 1990;
        // follow-up: them (Per), year.
        let segs = SegmentSequence {
            segments: vec![
                seg(SegmentType::Select, Side::Precedent, &[0]),
                seg(SegmentType::FilterValue, Side::Precedent, &[1, 2, 3]),
                seg(SegmentType::Other, Side::Followup, &[4]),
                seg(SegmentType::Order, Side::Followup, &[5]),
            ],
        };
        let r = fuse_segments(&pair, &segs, Intent::Append);
        assert!(r.conflicts.is_empty());
        assert_eq!(
            r.precedent_fusion,
            "Show all chassis produced after the year 1990 and sort by year."
        );
        assert_eq!(r.followup_fusion, "Sort them by year.");
        assert_eq!(r.output, r.precedent_fusion, "unchanged follow-up falls back");
    }

    #[test]
    fn no_conflicts_under_refine_is_a_no_op() {
        let t = table(
            "networks",
            &[("network", ColumnKind::Text, false), ("year", ColumnKind::Number, false)],
            &[&["CBC", "1995"]],
        );
        let pair = pair_for(&t, "Show every network.", "Thanks!");
        let segs = SegmentSequence {
            segments: vec![seg(SegmentType::Select, Side::Precedent, &[0])],
        };
        let r = fuse_segments(&pair, &segs, Intent::Refine);
        assert!(r.conflicts.is_empty());
        assert_eq!(r.precedent_fusion, "Show every network.");
        assert_eq!(r.followup_fusion, "Thanks!");
        assert_eq!(r.output, "Show every network.");
    }

    #[test]
    fn free_literal_filters_conflict_when_both_ungrounded() {
        let t = table(
            "enrollment",
            &[("students", ColumnKind::Number, false), ("campus", ColumnKind::Text, false)],
            &[&["500", "north"]],
        );
        let pair = pair_for(&t, "How many students enrolled in 2017?", "How about 2018?");
        // 2017/2018 are free number literals, not cells: both columns none.
        let segs = SegmentSequence {
            segments: vec![
                seg(SegmentType::Select, Side::Precedent, &[0]),
                seg(SegmentType::FilterValue, Side::Precedent, &[1]),
                seg(SegmentType::FilterValue, Side::Followup, &[2]),
            ],
        };
        let conflicts = find_conflicts(&pair, &segs);
        assert_eq!(conflicts.len(), 1);
        assert_eq!(conflicts[0].kind, ConflictKind::ValColumn);
        let r = fuse(&pair, &segs, Intent::Refine, &conflicts);
        assert_eq!(r.output, "How many students enrolled in 2018?");
    }

    #[test]
    fn remainder_keeps_trailing_determiner_and_drops_auxiliaries() {
        let t = table(
            "earnings",
            &[("player", ColumnKind::Text, true), ("money", ColumnKind::Number, false)],
            &[&["Smith", "100"]],
        );
        let pair = pair_for(&t, "How much money has Smith earned?", "Compare it with Smith.");
        let segs = SegmentSequence {
            segments: vec![
                seg(SegmentType::Select, Side::Precedent, &[0]),
                seg(SegmentType::FilterValue, Side::Precedent, &[1]),
                seg(SegmentType::PersonalPronoun, Side::Followup, &[2]),
            ],
        };
        // No other pairs: nothing consumed, so Smith stays in the remainder.
        let conflicts = vec![ConflictPair {
            followup: 2,
            target: PrecedentTarget::Remainder,
            kind: ConflictKind::PronounGlobal,
        }];
        let text = resolve_pronoun_text(&pair, &segs, &conflicts, false);
        assert_eq!(text, "money Smith earned");
        let of_text = resolve_pronoun_text(&pair, &segs, &conflicts, true);
        assert_eq!(of_text, "of money Smith earned");
    }

    #[test]
    fn detokenize_attaches_punctuation() {
        let words: Vec<String> = ["In", "1995", ",", "is", "it", "?"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        assert_eq!(detokenize(&words), "In 1995, is it?");
    }
}
