//! Independent re-derivation of segment-cover enumeration, used as an oracle.
//!
//! Instead of the library's left-to-right recursive construction, this
//! enumerates every set partition of the pair's spans, filters blocks by the
//! adjacency rules, and assigns block types from explicit multiset tables.

use std::collections::BTreeSet;

use followup_core::anonymize::{PairedSymbolSequence, SymbolKind, SymbolSequence, Token};
use followup_core::segment::{SegmentSequence, SegmentType};
use rand::Rng;

/// Sorted-kind multisets accepted per type in precedent queries.
fn precedent_table(t: SegmentType) -> Vec<Vec<SymbolKind>> {
    use SymbolKind::*;
    match t {
        SegmentType::Select => vec![vec![Col], vec![Col, Agg], vec![Col, Val, Agg]],
        SegmentType::Order => vec![vec![Col], vec![Col, Dir]],
        SegmentType::FilterValue => vec![
            vec![Val],
            vec![Col, Val],
            vec![Val, Com],
            vec![Col, Val, Com],
        ],
        SegmentType::FilterColumnPair => vec![vec![Col, Col, Com]],
        SegmentType::Group => vec![vec![Col]],
        SegmentType::PersonalPronoun => vec![vec![Per]],
        SegmentType::PossessivePronoun => vec![vec![Pos]],
        SegmentType::DemonstrativeRef => vec![vec![Col, Dem]],
        SegmentType::Other => vec![],
    }
}

/// Follow-up relaxation: any nonempty sub-multiset of the five content
/// rules' symbols; pronoun rules and grouping unchanged.
fn followup_table(t: SegmentType) -> Vec<Vec<SymbolKind>> {
    use SymbolKind::*;
    match t {
        SegmentType::Select => vec![
            vec![Col],
            vec![Val],
            vec![Agg],
            vec![Col, Val],
            vec![Col, Agg],
            vec![Val, Agg],
            vec![Col, Val, Agg],
        ],
        SegmentType::Order => vec![vec![Col], vec![Dir], vec![Col, Dir]],
        SegmentType::FilterValue => vec![
            vec![Col],
            vec![Val],
            vec![Com],
            vec![Col, Val],
            vec![Col, Com],
            vec![Val, Com],
            vec![Col, Val, Com],
        ],
        SegmentType::FilterColumnPair => vec![
            vec![Col],
            vec![Com],
            vec![Col, Col],
            vec![Col, Com],
            vec![Col, Col, Com],
        ],
        other => precedent_table(other),
    }
}

fn sorted_kinds(seq: &SymbolSequence, members: &[usize]) -> Vec<SymbolKind> {
    let mut kinds: Vec<SymbolKind> = members.iter().map(|&m| seq.spans[m].kind).collect();
    kinds.sort();
    kinds
}

fn types_for_block(seq: &SymbolSequence, members: &[usize], is_followup: bool) -> Vec<SegmentType> {
    let kinds = sorted_kinds(seq, members);
    let all = [
        SegmentType::Select,
        SegmentType::Order,
        SegmentType::FilterValue,
        SegmentType::FilterColumnPair,
        SegmentType::Group,
        SegmentType::PersonalPronoun,
        SegmentType::PossessivePronoun,
        SegmentType::DemonstrativeRef,
    ];
    all.into_iter()
        .filter(|&t| {
            let table = if is_followup { followup_table(t) } else { precedent_table(t) };
            table.contains(&kinds)
        })
        .collect()
}

/// Block validity: members consecutive (nothing but rhetorical words between
/// them) with every gap strictly under the window.
fn block_adjacent(seq: &SymbolSequence, members: &[usize], window: usize) -> bool {
    members.windows(2).all(|w| {
        w[1] == w[0] + 1 && seq.spans[w[1]].start - seq.spans[w[0]].end < window
    })
}

/// Whether span `i` can join any rule-valid block (used for O availability).
fn rule_reachable(seq: &SymbolSequence, i: usize, is_followup: bool, window: usize) -> bool {
    let n = seq.spans.len();
    for lo in i.saturating_sub(2)..=i {
        for hi in i..n.min(lo + 3) {
            let members: Vec<usize> = (lo..=hi).collect();
            if !block_adjacent(seq, &members, window) {
                continue;
            }
            if !types_for_block(seq, &members, is_followup).is_empty() {
                return true;
            }
        }
    }
    false
}

/// All set partitions of 0..n as sorted blocks.
fn set_partitions(n: usize) -> Vec<Vec<Vec<usize>>> {
    let mut out = Vec::new();
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    fn rec(i: usize, n: usize, blocks: &mut Vec<Vec<usize>>, out: &mut Vec<Vec<Vec<usize>>>) {
        if i == n {
            let mut sorted = blocks.clone();
            for b in &mut sorted {
                b.sort_unstable();
            }
            sorted.sort();
            out.push(sorted);
            return;
        }
        for bi in 0..blocks.len() {
            blocks[bi].push(i);
            rec(i + 1, n, blocks, out);
            blocks[bi].pop();
        }
        blocks.push(vec![i]);
        rec(i + 1, n, blocks, out);
        blocks.pop();
    }
    rec(0, n, &mut blocks, &mut out);
    out
}

/// Canonical form of one cover: sorted "(first member, type, member count)".
pub fn canonical_key(segments: &[(SegmentType, Vec<usize>)]) -> String {
    let mut parts: Vec<String> = segments
        .iter()
        .map(|(t, m)| format!("{:?}:{:?}", t, m))
        .collect();
    parts.sort();
    parts.join("|")
}

pub fn library_cover_keys(covers: &[SegmentSequence]) -> BTreeSet<String> {
    covers
        .iter()
        .map(|c| {
            let segs: Vec<(SegmentType, Vec<usize>)> = c
                .segments
                .iter()
                .map(|s| (s.seg_type, s.members.clone()))
                .collect();
            canonical_key(&segs)
        })
        .collect()
}

/// Oracle enumeration: every exact cover by valid typed blocks.
pub fn brute_force_cover_keys(pair: &PairedSymbolSequence, window: usize) -> BTreeSet<String> {
    let pre_n = pair.precedent.spans.len();
    let total = pre_n + pair.followup.spans.len();
    let mut keys = BTreeSet::new();
    'partition: for partition in set_partitions(total) {
        // Typed choices per block; bail on any invalid block.
        let mut choices: Vec<Vec<(SegmentType, Vec<usize>)>> = Vec::new();
        for block in &partition {
            let followup_side = block[0] >= pre_n;
            if block.iter().any(|&m| (m >= pre_n) != followup_side) {
                continue 'partition;
            }
            let (seq, offset) = if followup_side {
                (&pair.followup, pre_n)
            } else {
                (&pair.precedent, 0)
            };
            let local: Vec<usize> = block.iter().map(|&m| m - offset).collect();
            if !block_adjacent(seq, &local, window) {
                continue 'partition;
            }
            let mut typed: Vec<(SegmentType, Vec<usize>)> = types_for_block(seq, &local, followup_side)
                .into_iter()
                .map(|t| (t, block.clone()))
                .collect();
            if local.len() == 1 {
                let span = &seq.spans[local[0]];
                if span.kind.is_pronoun() || !rule_reachable(seq, local[0], followup_side, window) {
                    typed.push((SegmentType::Other, block.clone()));
                }
            }
            if typed.is_empty() {
                continue 'partition;
            }
            choices.push(typed);
        }
        // Cartesian product of block type choices.
        let mut indices = vec![0usize; choices.len()];
        loop {
            let cover: Vec<(SegmentType, Vec<usize>)> = indices
                .iter()
                .zip(&choices)
                .map(|(&i, c)| c[i].clone())
                .collect();
            keys.insert(canonical_key(&cover));
            let mut carry = true;
            for (i, c) in indices.iter_mut().zip(&choices) {
                if carry {
                    *i += 1;
                    if *i == c.len() {
                        *i = 0;
                    } else {
                        carry = false;
                    }
                }
            }
            if carry {
                break;
            }
        }
    }
    keys
}

/// Random synthetic symbol sequence: spans with random kinds separated by
/// random rhetorical gaps. No table needed; rules only look at kinds and
/// positions.
pub fn random_sequence<R: Rng>(
    rng: &mut R,
    n_spans: usize,
    role: followup_core::anonymize::QueryRole,
) -> SymbolSequence {
    use SymbolKind::*;
    // Weighted toward content kinds so rule combinations actually form.
    let kind_pool = [Col, Col, Col, Val, Val, Agg, Com, Dir, Per, Pos, Dem];
    let mut tokens: Vec<Token> = Vec::new();
    let mut spans = Vec::new();
    let push_word = |tokens: &mut Vec<Token>, w: String| {
        let index = tokens.len();
        tokens.push(Token { lower: w.to_lowercase(), surface: w, index });
    };
    for g in 0..rng.gen_range(0..3) {
        push_word(&mut tokens, format!("lead{g}"));
    }
    for s in 0..n_spans {
        if s > 0 {
            for g in 0..rng.gen_range(0..6) {
                push_word(&mut tokens, format!("gap{s}{g}"));
            }
        }
        let kind = kind_pool[rng.gen_range(0..kind_pool.len())];
        let len = if matches!(kind, Col | Val) { rng.gen_range(1..3) } else { 1 };
        let start = tokens.len();
        for w in 0..len {
            push_word(&mut tokens, format!("sym{s}{w}"));
        }
        spans.push(followup_core::anonymize::SymbolSpan {
            kind,
            start,
            end: start + len,
            grounding: followup_core::anonymize::Grounding::Lexicon(format!("sym{s}")),
        });
    }
    for g in 0..rng.gen_range(0..2) {
        push_word(&mut tokens, format!("tail{g}"));
    }
    SymbolSequence { tokens, spans, role }
}

pub fn random_pair<R: Rng>(rng: &mut R, max_spans: usize) -> PairedSymbolSequence {
    use followup_core::anonymize::QueryRole;
    let total = rng.gen_range(0..=max_spans);
    let pre = rng.gen_range(0..=total);
    PairedSymbolSequence {
        precedent: random_sequence(rng, pre, QueryRole::Precedent),
        followup: random_sequence(rng, total - pre, QueryRole::Followup),
    }
}
