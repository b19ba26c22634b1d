//! Metrics: symbol accuracy (share of outputs whose table/lexicon symbols
//! match the gold query's, order-free, pronouns ignored) and corpus-level
//! 4-gram BLEU with uniform weights, brevity penalty, and add-one smoothing
//! on the higher orders.

use std::collections::HashMap;

use serde::Serialize;

use crate::anonymize::{anonymize, tokenize, Lexicons, QueryRole, SymbolSequence, DEFAULT_AMBIGUITY_CAP};
use crate::corpus::Table;

pub const BLEU_VARIANT: &str = "corpus-4-gram, uniform weights, add-one smoothing on n>1";

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("output/gold length mismatch: {outputs} vs {golds}")]
    LengthMismatch { outputs: usize, golds: usize },
    #[error("cannot evaluate an empty corpus")]
    Empty,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExampleEval {
    pub output: String,
    pub gold: String,
    pub consistent: bool,
    pub bleu: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub symbol_accuracy: f64,
    pub bleu: f64,
    pub bleu_variant: String,
    pub examples: Vec<ExampleEval>,
}

/// Evaluator-local tokenization: lowercase with punctuation split off.
pub fn eval_tokenize(text: &str) -> Vec<String> {
    tokenize(text).into_iter().map(|t| t.lower).collect()
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for i in 0..=tokens.len() - n {
            *counts.entry(&tokens[i..i + n]).or_insert(0) += 1;
        }
    }
    counts
}

struct BleuTally {
    matched: [usize; 4],
    total: [usize; 4],
    candidate_len: usize,
    reference_len: usize,
}

impl BleuTally {
    fn new() -> Self {
        BleuTally { matched: [0; 4], total: [0; 4], candidate_len: 0, reference_len: 0 }
    }

    fn add(&mut self, output: &str, gold: &str) {
        let cand = eval_tokenize(output);
        let refr = eval_tokenize(gold);
        self.candidate_len += cand.len();
        self.reference_len += refr.len();
        for n in 1..=4 {
            let c = ngram_counts(&cand, n);
            let r = ngram_counts(&refr, n);
            for (gram, count) in &c {
                self.matched[n - 1] += (*count).min(r.get(gram).copied().unwrap_or(0));
                self.total[n - 1] += count;
            }
        }
    }

    fn score(&self) -> f64 {
        if self.candidate_len == 0 || self.total[0] == 0 || self.matched[0] == 0 {
            return 0.0;
        }
        let mut log_sum = 0.0;
        for n in 1..=4 {
            let (num, den) = if n == 1 {
                (self.matched[0] as f64, self.total[0] as f64)
            } else {
                // Add-one smoothing keeps higher orders defined on short or
                // non-overlapping corpora.
                ((self.matched[n - 1] + 1) as f64, (self.total[n - 1] + 1) as f64)
            };
            log_sum += 0.25 * (num / den).ln();
        }
        let c = self.candidate_len as f64;
        let r = self.reference_len as f64;
        let bp = if c > r { 1.0 } else { (1.0 - r / c).exp() };
        100.0 * bp * log_sum.exp()
    }
}

/// Corpus-level BLEU over aligned output/gold lists.
pub fn corpus_bleu(outputs: &[String], golds: &[String]) -> Result<f64, EvalError> {
    if outputs.len() != golds.len() {
        return Err(EvalError::LengthMismatch { outputs: outputs.len(), golds: golds.len() });
    }
    if outputs.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut tally = BleuTally::new();
    for (o, g) in outputs.iter().zip(golds) {
        tally.add(o, g);
    }
    Ok(tally.score())
}

/// Single-pair BLEU with the same variant.
pub fn sentence_bleu(output: &str, gold: &str) -> f64 {
    let mut tally = BleuTally::new();
    tally.add(output, gold);
    tally.score()
}

/// Order-free multiset of (kind, lowercased surface) pairs, pronouns
/// excluded.
pub fn symbol_profile(seq: &SymbolSequence) -> Vec<(usize, String)> {
    let mut profile: Vec<(usize, String)> = seq
        .spans
        .iter()
        .filter(|s| !s.kind.is_pronoun())
        .map(|s| (s.kind.ordinal(), seq.surface(s.start, s.end).to_lowercase()))
        .collect();
    profile.sort();
    profile
}

/// True when the two texts carry the same symbols over the table. Both are
/// anonymized; with several interpretations, any matching pair counts. An
/// anonymization failure counts as inconsistent.
pub fn symbol_consistent(a: &str, b: &str, table: &Table, lexicons: &Lexicons) -> bool {
    let Ok(seqs_a) = anonymize(a, table, lexicons, QueryRole::Fused, DEFAULT_AMBIGUITY_CAP) else {
        return false;
    };
    let Ok(seqs_b) = anonymize(b, table, lexicons, QueryRole::Fused, DEFAULT_AMBIGUITY_CAP) else {
        return false;
    };
    let profiles_b: Vec<_> = seqs_b.iter().map(symbol_profile).collect();
    seqs_a
        .iter()
        .map(symbol_profile)
        .any(|pa| profiles_b.iter().any(|pb| *pb == pa))
}

/// Share of consistent outputs, in percent.
pub fn symbol_accuracy(
    outputs: &[String],
    golds: &[String],
    tables: &[&Table],
    lexicons: &Lexicons,
) -> Result<f64, EvalError> {
    if outputs.len() != golds.len() || outputs.len() != tables.len() {
        return Err(EvalError::LengthMismatch { outputs: outputs.len(), golds: golds.len() });
    }
    if outputs.is_empty() {
        return Err(EvalError::Empty);
    }
    let consistent = outputs
        .iter()
        .zip(golds)
        .zip(tables)
        .filter(|((o, g), t)| symbol_consistent(o, g, t, lexicons))
        .count();
    Ok(100.0 * consistent as f64 / outputs.len() as f64)
}

/// Full report: both metrics plus per-example records.
pub fn evaluate(
    outputs: &[String],
    golds: &[String],
    tables: &[&Table],
    lexicons: &Lexicons,
) -> Result<EvalReport, EvalError> {
    if outputs.len() != golds.len() || outputs.len() != tables.len() {
        return Err(EvalError::LengthMismatch { outputs: outputs.len(), golds: golds.len() });
    }
    if outputs.is_empty() {
        return Err(EvalError::Empty);
    }
    let examples: Vec<ExampleEval> = outputs
        .iter()
        .zip(golds)
        .zip(tables)
        .map(|((o, g), t)| ExampleEval {
            output: o.clone(),
            gold: g.clone(),
            consistent: symbol_consistent(o, g, t, lexicons),
            bleu: sentence_bleu(o, g),
        })
        .collect();
    let consistent = examples.iter().filter(|e| e.consistent).count();
    Ok(EvalReport {
        symbol_accuracy: 100.0 * consistent as f64 / examples.len() as f64,
        bleu: corpus_bleu(outputs, golds)?,
        bleu_variant: BLEU_VARIANT.to_string(),
        examples,
    })
}
