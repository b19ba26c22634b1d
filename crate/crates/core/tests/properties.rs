//! Randomized property tests for structural invariants: tokenization is
//! character-preserving, anonymization spans nest cleanly and reconstruct
//! the original text, enumerated covers partition the spans and render to
//! well-formed IOB tags, scoring is shift-invariant in the way a linear
//! chain must be, checkpoints round-trip, and corpus splits partition.

// Only the random-pair generator is used here; the oracle functions the
// module also exports are exercised by the enumeration-oracle and acceptance
// targets.
#[path = "support/brute_force.rs"]
#[allow(dead_code)]
mod brute_force;

use std::collections::BTreeSet;

use followup_core::anonymize::{
    anonymize, tokenize, Grounding, Lexicons, QueryRole, SymbolKind,
};
use followup_core::corpus::{split_indices, Column, ColumnKind, Table};
use followup_core::rank::{Model, ModelConfig, Vocab};
use followup_core::segment::{
    attach_intents, enumerate_sequences, to_tags, valid_iob, Intent, IntentMode, Side, Tag,
    DEFAULT_WINDOW, TAG_COUNT,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Word pool for random queries over the sales table: column names, cell
/// values, analysis-specific words of every kind, free literals, filler, and
/// punctuation.
const POOL: &[&str] = &[
    "brand", "sales", "year", "Acme", "Zenith", "120", "2017", "2018", "sum", "average", "count",
    "more", "before", "higher", "ascending", "it", "them", "their", "that", "same", "show", "the",
    "of", "by", "in", "all", "list", "1990", "3.5", "?", ".",
];

fn sales_table() -> Table {
    Table {
        id: "sales".to_string(),
        columns: vec![
            Column { name: "brand".into(), kind: ColumnKind::Text, is_person: false },
            Column { name: "sales".into(), kind: ColumnKind::Number, is_person: false },
            Column { name: "year".into(), kind: ColumnKind::Number, is_person: false },
        ],
        rows: vec![
            vec![Some("Acme".into()), Some("120".into()), Some("2017".into())],
            vec![Some("Zenith".into()), Some("90".into()), Some("2018".into())],
        ],
    }
}

proptest! {
    /// Tokenization only splits: concatenating the token surfaces gives back
    /// the input minus whitespace, indices count up from zero, and `lower`
    /// is the lowercased surface.
    #[test]
    fn tokenize_preserves_characters(
        chunks in prop::collection::vec("[A-Za-z0-9.,?!:;()'-]{1,8}", 0..12),
        sep in prop::sample::select(&[" ", "  ", "\t", " \n "]),
    ) {
        let text = chunks.join(sep);
        let tokens = tokenize(&text);
        let rejoined: String = tokens.iter().map(|t| t.surface.as_str()).collect();
        let squashed: String = text.split_whitespace().collect();
        prop_assert_eq!(rejoined, squashed);
        for (i, t) in tokens.iter().enumerate() {
            prop_assert_eq!(t.index, i);
            prop_assert_eq!(t.lower.clone(), t.surface.to_lowercase());
            prop_assert!(!t.surface.is_empty());
        }
    }

    /// Every interpretation of a random query keeps its spans sorted,
    /// disjoint, and in bounds; groundings agree with kinds; and expanding
    /// the spans back out reproduces the original tokens exactly.
    #[test]
    fn anonymize_interpretations_are_well_formed(
        words in prop::collection::vec(prop::sample::select(POOL), 1..10),
        role in prop::sample::select(&[QueryRole::Precedent, QueryRole::Followup, QueryRole::Fused]),
    ) {
        let text = words.join(" ");
        let table = sales_table();
        let lex = Lexicons::builtin();
        let interpretations =
            anonymize(&text, &table, &lex, role, 1024).expect("cap 1024 is never hit here");
        prop_assert!(!interpretations.is_empty());
        let surfaces: Vec<String> =
            tokenize(&text).into_iter().map(|t| t.surface).collect();
        for seq in &interpretations {
            prop_assert_eq!(seq.role, role);
            let mut prev_end = 0usize;
            for span in &seq.spans {
                prop_assert!(span.start >= prev_end, "spans overlap or are unsorted");
                prop_assert!(span.start < span.end);
                prop_assert!(span.end <= seq.tokens.len());
                prev_end = span.end;
                let grounding_fits = match span.kind {
                    SymbolKind::Col => matches!(span.grounding, Grounding::Column(_)),
                    SymbolKind::Val => matches!(
                        span.grounding,
                        Grounding::Cells(_) | Grounding::Literal
                    ),
                    _ => matches!(span.grounding, Grounding::Lexicon(_)),
                };
                prop_assert!(grounding_fits, "{:?} grounded as {:?}", span.kind, span.grounding);
            }
            prop_assert_eq!(seq.reconstruct(), surfaces.clone());
            prop_assert_eq!(seq.rendered_items().len(), seq.rendered_len());
        }
    }

    /// Enumerated segment sequences are exact covers: every span of the pair
    /// appears in exactly one segment, members stay on their segment's side,
    /// and enumeration is deterministic.
    #[test]
    fn enumerated_covers_partition_the_spans(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pair = brute_force::random_pair(&mut rng, 8);
        let covers = enumerate_sequences(&pair, DEFAULT_WINDOW, 1_000_000).unwrap();
        let all: Vec<usize> = (0..pair.span_count()).collect();
        let precedent_spans = pair.precedent.spans.len();
        for cover in &covers {
            let mut members: Vec<usize> =
                cover.segments.iter().flat_map(|s| s.members.iter().copied()).collect();
            members.sort_unstable();
            prop_assert_eq!(&members, &all, "cover is not an exact cover of the spans");
            for seg in &cover.segments {
                prop_assert!(!seg.members.is_empty());
                for &m in &seg.members {
                    let on_precedent = m < precedent_spans;
                    prop_assert_eq!(on_precedent, seg.side == Side::Precedent);
                }
            }
        }
        let again = enumerate_sequences(&pair, DEFAULT_WINDOW, 1_000_000).unwrap();
        prop_assert_eq!(covers, again);
    }

    /// Tag candidates derived from the covers are well-formed IOB sequences
    /// over the rendered pair, are pairwise distinct, and only carry the
    /// append intent when the follow-up has a sentence pattern to host it.
    #[test]
    fn candidates_render_to_valid_distinct_iob(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pair = brute_force::random_pair(&mut rng, 8);
        let covers = enumerate_sequences(&pair, DEFAULT_WINDOW, 1_000_000).unwrap();
        let rendered = pair.rendered_len();
        for cover in &covers {
            let tags = to_tags(cover, &pair);
            prop_assert_eq!(tags.len(), rendered);
            prop_assert!(valid_iob(&tags), "cover renders to invalid IOB: {:?}", tags);
        }

        let candidates = attach_intents(&covers, &pair, 0, IntentMode::Full);
        let mut seen = BTreeSet::new();
        let pattern_empty = pair.followup.pattern_token_len() == 0;
        for c in &candidates {
            prop_assert_eq!(c.tags.len(), rendered);
            prop_assert!(valid_iob(&c.tags));
            prop_assert!(seen.insert(c.tag_string()), "duplicate candidate tags");
            if pattern_empty {
                prop_assert_eq!(c.intent, Intent::Refine);
            }
        }

        let refine_only = attach_intents(&covers, &pair, 0, IntentMode::ForceRefine);
        prop_assert!(refine_only.iter().all(|c| c.intent == Intent::Refine));
        prop_assert!(refine_only.len() <= covers.len());
    }

    /// Adding a constant to every emission shifts every sequence score by
    /// (length x constant) and therefore never changes score differences
    /// between candidates of the same pair.
    #[test]
    fn score_differences_ignore_uniform_emission_shifts(
        seed in any::<u64>(),
        n in 1usize..10,
        shift in -5.0f64..5.0,
        tag_seed in any::<u64>(),
    ) {
        let vocab = Vocab::build(["alpha", "beta", "gamma"]);
        let model = Model::init(ModelConfig { embed_dim: 6, hidden_dim: 5, seed }, vocab);
        let mut rng = ChaCha8Rng::seed_from_u64(tag_seed);
        let inputs: Vec<usize> =
            (0..n).map(|_| rand::Rng::gen_range(&mut rng, 0..model.vocab.len())).collect();
        let random_tags = |rng: &mut ChaCha8Rng| -> Vec<Tag> {
            (0..n)
                .map(|_| Tag::from_index(rand::Rng::gen_range(rng, 0..TAG_COUNT)).unwrap())
                .collect()
        };
        let a = random_tags(&mut rng);
        let b = random_tags(&mut rng);

        let enc = model.encode(&inputs);
        let mut shifted = enc.clone();
        for e in &mut shifted.emissions {
            *e += shift;
        }

        let tol = 1e-9;
        let expected = model.score(&a, &enc) + shift * n as f64;
        let got = model.score(&a, &shifted);
        prop_assert!((got - expected).abs() <= tol * expected.abs().max(1.0));

        let diff = model.score(&a, &enc) - model.score(&b, &enc);
        let shifted_diff = model.score(&a, &shifted) - model.score(&b, &shifted);
        prop_assert!((diff - shifted_diff).abs() <= tol * diff.abs().max(1.0));
    }

    /// Saving and reloading a freshly initialized model reproduces it
    /// exactly, whatever the dimensions, vocabulary, or seed.
    #[test]
    fn checkpoints_round_trip_exactly(
        embed in 1usize..8,
        hidden in 1usize..6,
        seed in any::<u64>(),
        n_words in 0usize..10,
    ) {
        let words: Vec<String> = (0..n_words).map(|i| format!("word{i}")).collect();
        let vocab = Vocab::build(words.iter().map(String::as_str));
        let model = Model::init(ModelConfig { embed_dim: embed, hidden_dim: hidden, seed }, vocab);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        model.save(&path).unwrap();
        let loaded = Model::load(&path).unwrap();
        prop_assert_eq!(model, loaded);
    }

    /// Seeded index splitting partitions `0..len` into parts of exactly the
    /// requested sizes, deterministically per seed.
    #[test]
    fn split_indices_partitions_exactly(
        (len, n_train, n_dev) in (0usize..120)
            .prop_flat_map(|len| (Just(len), 0..=len))
            .prop_flat_map(|(len, a)| (Just(len), Just(a), 0..=len - a)),
        seed in any::<u64>(),
    ) {
        let sizes = (n_train, n_dev, len - n_train - n_dev);
        let split = split_indices(len, sizes, seed).unwrap();
        prop_assert_eq!(split.train.len(), sizes.0);
        prop_assert_eq!(split.dev.len(), sizes.1);
        prop_assert_eq!(split.test.len(), sizes.2);
        let union: BTreeSet<usize> = split
            .train
            .iter()
            .chain(&split.dev)
            .chain(&split.test)
            .copied()
            .collect();
        prop_assert_eq!(union.len(), len, "parts overlap");
        prop_assert!(union.iter().all(|&i| i < len));
        let again = split_indices(len, sizes, seed).unwrap();
        prop_assert_eq!(split.train, again.train);
        prop_assert_eq!(split.dev, again.dev);
        prop_assert_eq!(split.test, again.test);
    }

    /// The vocabulary reserves index 0 for unknown words and one pseudo-token
    /// per symbol kind, then assigns every distinct word its own index.
    /// (Callers feed it lowercased tokens, so lowercase here too.)
    #[test]
    fn vocab_indexing_is_injective(
        words in prop::collection::vec(prop::sample::select(POOL), 0..20),
    ) {
        let lowered: Vec<String> = words.iter().map(|w| w.to_lowercase()).collect();
        let vocab = Vocab::build(lowered.iter().map(String::as_str));
        let distinct: BTreeSet<String> = lowered.iter().cloned().collect();
        prop_assert_eq!(vocab.len(), 1 + SymbolKind::ALL.len() + distinct.len());
        prop_assert_eq!(vocab.lookup("never-in-the-pool"), 0);
        let mut ids = BTreeSet::new();
        for kind in SymbolKind::ALL {
            let id = vocab.kind_index(kind);
            prop_assert!(id >= 1 && id <= SymbolKind::ALL.len());
            prop_assert!(ids.insert(id), "kind pseudo-tokens collide");
        }
        for w in &distinct {
            let id = vocab.lookup(w);
            prop_assert!(id > SymbolKind::ALL.len(), "word maps into the reserved range");
            prop_assert!(ids.insert(id), "two distinct words share an index");
        }
    }
}
