//! Rule-based segment enumeration and IOB tag candidates.
//!
//! Symbol spans combine into typed segments by compositional rules (a Select
//! is an optional aggregation plus a column, a value filter is a value with
//! optional column/comparison, and so on). Members must be adjacent: no other
//! symbol may sit between them and the word-level gap between consecutive
//! members stays under a window. In the follow-up query the content rules
//! relax so that any nonempty subset of a rule's symbols still deduces the
//! type — ellipsis means the rest lives in the precedent.
//!
//! A candidate for ranking is an exact cover of both queries' spans by
//! deducible segments, mapped to one IOB tag per rendered token, and paired
//! with a Refine/Append intent tagged over the follow-up's sentence pattern.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::anonymize::{PairedSymbolSequence, SymbolKind, SymbolSequence};

#[derive(Debug, thiserror::Error)]
pub enum SegmentError {
    #[error("pair yields {count} segment sequences, more than the cap {cap}")]
    CandidateCapExceeded { count: usize, cap: usize },
}

/// Default adjacency window: strict upper bound on the word gap between
/// consecutive members of one segment.
pub const DEFAULT_WINDOW: usize = 4;
/// Default limit on segment sequences enumerated for one pair.
pub const DEFAULT_CANDIDATE_CAP: usize = 10_000;

/// Typed symbol groupings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SegmentType {
    /// `[Agg [Val]] Col`: projection, possibly aggregated.
    Select,
    /// `[Dir] Col`: sort key.
    Order,
    /// `[Col] [Com] Val`: filter comparing a column against a value.
    FilterValue,
    /// `Col Com Col`: filter comparing two columns.
    FilterColumnPair,
    /// `Col`: grouping key.
    Group,
    /// `Per`: personal pronoun referring to precedent content.
    PersonalPronoun,
    /// `Pos`: possessive pronoun.
    PossessivePronoun,
    /// `Dem Col`: demonstrative plus column ("that studio").
    DemonstrativeRef,
    /// Single symbol acting as plain text.
    Other,
}

impl SegmentType {
    /// Content rules, in deterministic enumeration order. Pronoun rules and
    /// grouping are never relaxed in follow-ups.
    const RULES: [SegmentType; 8] = [
        SegmentType::Select,
        SegmentType::Order,
        SegmentType::FilterValue,
        SegmentType::FilterColumnPair,
        SegmentType::Group,
        SegmentType::PersonalPronoun,
        SegmentType::PossessivePronoun,
        SegmentType::DemonstrativeRef,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SegmentType::Select => "Select",
            SegmentType::Order => "Order",
            SegmentType::FilterValue => "WhereVal",
            SegmentType::FilterColumnPair => "WhereCols",
            SegmentType::Group => "Group",
            SegmentType::PersonalPronoun => "PerRef",
            SegmentType::PossessivePronoun => "PosRef",
            SegmentType::DemonstrativeRef => "DemRef",
            SegmentType::Other => "O",
        }
    }

    pub fn is_pronoun(self) -> bool {
        matches!(
            self,
            SegmentType::PersonalPronoun
                | SegmentType::PossessivePronoun
                | SegmentType::DemonstrativeRef
        )
    }

    /// Tag label this type maps to; `None` collapses to the O tag.
    pub fn label(self) -> Option<TagLabel> {
        match self {
            SegmentType::Select => Some(TagLabel::Select),
            SegmentType::Order => Some(TagLabel::Order),
            SegmentType::FilterValue | SegmentType::FilterColumnPair => Some(TagLabel::W),
            SegmentType::Group => Some(TagLabel::Group),
            SegmentType::PersonalPronoun
            | SegmentType::PossessivePronoun
            | SegmentType::DemonstrativeRef => Some(TagLabel::P),
            SegmentType::Other => None,
        }
    }
}

impl fmt::Display for SegmentType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Checks whether a kind multiset deduces `seg_type`. In follow-ups the five
/// content rules accept any nonempty sub-multiset of their symbols.
fn rule_accepts(seg_type: SegmentType, kinds: &[SymbolKind], is_followup: bool) -> bool {
    use SymbolKind::*;
    let count = |k: SymbolKind| kinds.iter().filter(|&&x| x == k).count();
    let total = kinds.len();
    if total == 0 {
        return false;
    }
    let only = |allowed: &[SymbolKind]| kinds.iter().all(|k| allowed.contains(k));
    match seg_type {
        SegmentType::Select => {
            let shape = only(&[Agg, Val, Col]) && count(Agg) <= 1 && count(Val) <= 1 && count(Col) <= 1;
            if is_followup {
                shape
            } else {
                // [Agg [Val]] Col: the value rides along only with an aggregation.
                shape && count(Col) == 1 && (count(Val) == 0 || count(Agg) == 1)
            }
        }
        SegmentType::Order => {
            let shape = only(&[Dir, Col]) && count(Dir) <= 1 && count(Col) <= 1;
            if is_followup {
                shape
            } else {
                shape && count(Col) == 1
            }
        }
        SegmentType::FilterValue => {
            let shape = only(&[Col, Com, Val]) && count(Col) <= 1 && count(Com) <= 1 && count(Val) <= 1;
            if is_followup {
                shape
            } else {
                shape && count(Val) == 1
            }
        }
        SegmentType::FilterColumnPair => {
            let shape = only(&[Col, Com]) && count(Col) <= 2 && count(Com) <= 1;
            if is_followup {
                shape
            } else {
                shape && count(Col) == 2 && count(Com) == 1
            }
        }
        SegmentType::Group => total == 1 && count(Col) == 1,
        SegmentType::PersonalPronoun => total == 1 && count(Per) == 1,
        SegmentType::PossessivePronoun => total == 1 && count(Pos) == 1,
        SegmentType::DemonstrativeRef => total == 2 && count(Dem) == 1 && count(Col) == 1,
        SegmentType::Other => false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Precedent,
    Followup,
}

/// A typed group of member spans (global pair-level span indices, ascending).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Segment {
    pub seg_type: SegmentType,
    pub members: Vec<usize>,
    pub side: Side,
}

/// One exact cover of a pair's spans by segments, precedent side first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentSequence {
    pub segments: Vec<Segment>,
}

/// Whether the follow-up refines the precedent in place or appends to it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Intent {
    Refine,
    Append,
}

impl fmt::Display for Intent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Intent::Refine => write!(f, "Refine"),
            Intent::Append => write!(f, "Append"),
        }
    }
}

/// Labels that take B/I positions; together with O they form 15 tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TagLabel {
    Select,
    W,
    Group,
    Order,
    P,
    Refine,
    Append,
}

impl TagLabel {
    pub const ALL: [TagLabel; 7] = [
        TagLabel::Select,
        TagLabel::W,
        TagLabel::Group,
        TagLabel::Order,
        TagLabel::P,
        TagLabel::Refine,
        TagLabel::Append,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TagLabel::Select => "Select",
            TagLabel::W => "W",
            TagLabel::Group => "Group",
            TagLabel::Order => "Order",
            TagLabel::P => "P",
            TagLabel::Refine => "Refine",
            TagLabel::Append => "Append",
        }
    }

    fn ordinal(self) -> usize {
        TagLabel::ALL.iter().position(|l| *l == self).unwrap()
    }
}

/// IOB tag over rendered tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tag {
    Outside,
    Begin(TagLabel),
    Inside(TagLabel),
}

/// Size of the tag inventory (7 labels x B/I, plus O).
pub const TAG_COUNT: usize = 15;

impl Tag {
    /// Dense index in `0..TAG_COUNT`; O is 0.
    pub fn index(self) -> usize {
        match self {
            Tag::Outside => 0,
            Tag::Begin(l) => 1 + 2 * l.ordinal(),
            Tag::Inside(l) => 2 + 2 * l.ordinal(),
        }
    }

    pub fn from_index(i: usize) -> Option<Tag> {
        match i {
            0 => Some(Tag::Outside),
            _ if i < TAG_COUNT => {
                let label = TagLabel::ALL[(i - 1) / 2];
                Some(if (i - 1) % 2 == 0 {
                    Tag::Begin(label)
                } else {
                    Tag::Inside(label)
                })
            }
            _ => None,
        }
    }

    pub fn parse(s: &str) -> Option<Tag> {
        if s == "O" {
            return Some(Tag::Outside);
        }
        let (label, pos) = s.rsplit_once('_')?;
        let label = *TagLabel::ALL.iter().find(|l| l.as_str() == label)?;
        match pos {
            "B" => Some(Tag::Begin(label)),
            "I" => Some(Tag::Inside(label)),
            _ => None,
        }
    }

    /// All tags in index order.
    pub fn inventory() -> Vec<Tag> {
        (0..TAG_COUNT).map(|i| Tag::from_index(i).unwrap()).collect()
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tag::Outside => write!(f, "O"),
            Tag::Begin(l) => write!(f, "{}_B", l.as_str()),
            Tag::Inside(l) => write!(f, "{}_I", l.as_str()),
        }
    }
}

/// True when every Inside tag continues a run of the same label.
pub fn valid_iob(tags: &[Tag]) -> bool {
    let mut prev: Option<TagLabel> = None;
    for t in tags {
        match t {
            Tag::Inside(l) if prev != Some(*l) => return false,
            Tag::Inside(l) | Tag::Begin(l) => prev = Some(*l),
            Tag::Outside => prev = None,
        }
    }
    true
}

/// One ranking candidate: a segment cover rendered to tags plus an intent.
/// `pair_index` points back into the owning analysis' pair list.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub tags: Vec<Tag>,
    pub intent: Intent,
    pub segments: SegmentSequence,
    pub pair_index: usize,
}

impl Candidate {
    pub fn tag_string(&self) -> String {
        self.tags.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(" ")
    }
}

/// Options of one span position in a cover: each entry is a segment whose
/// first member is that span.
fn segment_options(
    seq: &SymbolSequence,
    is_followup: bool,
    window: usize,
    span_offset: usize,
    side: Side,
) -> Vec<Vec<Segment>> {
    let n = seq.spans.len();
    // Rule-based groupings first.
    let mut rule_options: Vec<Vec<Segment>> = vec![Vec::new(); n];
    let mut rule_covered = vec![false; n];
    for start in 0..n {
        let mut kinds = Vec::new();
        for end in start..n.min(start + 3) {
            if end > start {
                // Adjacency: nearest-edge word gap strictly under the window.
                let gap = seq.spans[end].start - seq.spans[end - 1].end;
                if gap >= window {
                    break;
                }
            }
            kinds.push(seq.spans[end].kind);
            for seg_type in SegmentType::RULES {
                if rule_accepts(seg_type, &kinds, is_followup) {
                    rule_options[start].push(Segment {
                        seg_type,
                        members: (start..=end).map(|i| i + span_offset).collect(),
                        side,
                    });
                    for i in start..=end {
                        rule_covered[i] = true;
                    }
                }
            }
        }
    }
    // O is deducible only for pronoun-kind symbols (ambiguous pronouns may be
    // plain text) and for symbols no rule can use.
    for (i, span) in seq.spans.iter().enumerate() {
        if span.kind.is_pronoun() || !rule_covered[i] {
            rule_options[i].push(Segment {
                seg_type: SegmentType::Other,
                members: vec![i + span_offset],
                side,
            });
        }
    }
    rule_options
}

/// Every grouping of the sequence's spans that matches a rule (including the
/// O options), in deterministic order.
pub fn deducible_segments(seq: &SymbolSequence, is_followup: bool, window: usize) -> Vec<Segment> {
    let side = if is_followup { Side::Followup } else { Side::Precedent };
    segment_options(seq, is_followup, window, 0, side)
        .into_iter()
        .flatten()
        .collect()
}

fn count_covers(options: &[Vec<Segment>]) -> Vec<u128> {
    let n = options.len();
    let mut counts = vec![0u128; n + 1];
    counts[n] = 1;
    for i in (0..n).rev() {
        let mut total = 0u128;
        for seg in &options[i] {
            total += counts[i + seg.members.len()];
        }
        counts[i] = total;
    }
    counts
}

fn materialize_covers(options: &[Vec<Segment>]) -> Vec<Vec<Segment>> {
    let n = options.len();
    let mut out = Vec::new();
    let mut stack: Vec<Segment> = Vec::new();
    fn rec(
        i: usize,
        n: usize,
        options: &[Vec<Segment>],
        stack: &mut Vec<Segment>,
        out: &mut Vec<Vec<Segment>>,
    ) {
        if i == n {
            out.push(stack.clone());
            return;
        }
        for seg in &options[i] {
            stack.push(seg.clone());
            rec(i + seg.members.len(), n, options, stack, out);
            stack.pop();
        }
    }
    rec(0, n, options, &mut stack, &mut out);
    out
}

/// Enumerate every exact cover of the pair's spans by deducible segments.
/// Segments never straddle the query boundary; the result is the cross
/// product of the two sides' covers, capped at `cap`.
pub fn enumerate_sequences(
    pair: &PairedSymbolSequence,
    window: usize,
    cap: usize,
) -> Result<Vec<SegmentSequence>, SegmentError> {
    let pre_options = segment_options(&pair.precedent, false, window, 0, Side::Precedent);
    let fol_options = segment_options(
        &pair.followup,
        true,
        window,
        pair.precedent.spans.len(),
        Side::Followup,
    );
    let pre_count = count_covers(&pre_options)[0];
    let fol_count = count_covers(&fol_options)[0];
    let total = pre_count.saturating_mul(fol_count);
    if total > cap as u128 {
        return Err(SegmentError::CandidateCapExceeded {
            count: total.min(usize::MAX as u128) as usize,
            cap,
        });
    }
    let pre_covers = materialize_covers(&pre_options);
    let fol_covers = materialize_covers(&fol_options);
    let mut out = Vec::with_capacity(pre_covers.len() * fol_covers.len());
    for p in &pre_covers {
        for f in &fol_covers {
            let mut segments = p.clone();
            segments.extend(f.iter().cloned());
            out.push(SegmentSequence { segments });
        }
    }
    Ok(out)
}

/// Rendered-position extent (inclusive start, exclusive end) of a segment.
fn rendered_extent(segments: &Segment, span_to_rendered: &[usize]) -> (usize, usize) {
    let first = span_to_rendered[*segments.members.first().unwrap()];
    let last = span_to_rendered[*segments.members.last().unwrap()];
    (first, last + 1)
}

/// Map a cover to one IOB tag per rendered token of the pair. A segment's
/// extent runs from its first member to its last, so interior rhetorical
/// words take Inside tags; everything else (and O segments) is Outside.
pub fn to_tags(seg_seq: &SegmentSequence, pair: &PairedSymbolSequence) -> Vec<Tag> {
    let items = pair.rendered_items();
    let mut span_to_rendered = vec![usize::MAX; pair.span_count()];
    for (pos, item) in items.iter().enumerate() {
        if let Some(s) = item.span {
            span_to_rendered[s] = pos;
        }
    }
    let mut tags = vec![Tag::Outside; items.len()];
    for seg in &seg_seq.segments {
        let Some(label) = seg.seg_type.label() else {
            continue;
        };
        let (start, end) = rendered_extent(seg, &span_to_rendered);
        tags[start] = Tag::Begin(label);
        for tag in tags.iter_mut().take(end).skip(start + 1) {
            *tag = Tag::Inside(label);
        }
    }
    tags
}

/// How intents are attached to covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntentMode {
    /// Double candidates (Refine and Append) when the sentence pattern is
    /// nonempty.
    #[default]
    Full,
    /// Ablation: everything becomes Refine, no doubling.
    ForceRefine,
}

/// Rendered extent of the follow-up sentence pattern: the follow-up tokens
/// before its first symbol span (the whole follow-up if it has none).
pub fn pattern_extent(pair: &PairedSymbolSequence) -> (usize, usize) {
    let start = pair.boundary();
    (start, start + pair.followup.pattern_token_len())
}

/// Expand covers into tag candidates. A nonempty sentence pattern doubles
/// each cover into a Refine-tagged and an Append-tagged candidate; an empty
/// pattern leaves one Refine candidate with no intent tags. Duplicate tag
/// sequences (e.g. two filter types rendering to the same W tags) keep the
/// first occurrence.
pub fn attach_intents(
    covers: &[SegmentSequence],
    pair: &PairedSymbolSequence,
    pair_index: usize,
    mode: IntentMode,
) -> Vec<Candidate> {
    let (p_start, p_end) = pattern_extent(pair);
    let intents: &[Intent] = if p_start == p_end || mode == IntentMode::ForceRefine {
        &[Intent::Refine]
    } else {
        &[Intent::Refine, Intent::Append]
    };
    let mut seen: HashSet<Vec<Tag>> = HashSet::new();
    let mut out = Vec::new();
    for cover in covers {
        let base = to_tags(cover, pair);
        for &intent in intents {
            let mut tags = base.clone();
            if p_start < p_end {
                let label = match intent {
                    Intent::Refine => TagLabel::Refine,
                    Intent::Append => TagLabel::Append,
                };
                tags[p_start] = Tag::Begin(label);
                for tag in tags.iter_mut().take(p_end).skip(p_start + 1) {
                    *tag = Tag::Inside(label);
                }
            }
            if seen.insert(tags.clone()) {
                out.push(Candidate {
                    tags,
                    intent,
                    segments: cover.clone(),
                    pair_index,
                });
            }
        }
    }
    out
}
