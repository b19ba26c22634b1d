//! End-to-end glue: run anonymization, pairing, segment enumeration, and
//! intent attachment to build the full candidate list for one
//! precedent/follow-up example, choose a candidate (learned scoring or a
//! seeded uniform baseline), and fuse it into the final output.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::anonymize::{
    anonymize, pair_sequences, AnonymizeError, Lexicons, PairedSymbolSequence, QueryRole,
    DEFAULT_AMBIGUITY_CAP,
};
use crate::corpus::Table;
use crate::fuse::{fuse_segments, FusionResult};
use crate::rank::{argmax, Encoding, Model};
use crate::segment::{
    attach_intents, enumerate_sequences, Candidate, IntentMode, SegmentError, Tag,
    DEFAULT_CANDIDATE_CAP, DEFAULT_WINDOW,
};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Anonymize(#[from] AnonymizeError),
    #[error(transparent)]
    Segment(#[from] SegmentError),
}

#[derive(Debug, Clone, Copy)]
pub struct AnalysisOptions {
    /// Maximum word gap between spans grouped into one segment.
    pub window: usize,
    /// Cap on anonymization interpretations per query.
    pub ambiguity_cap: usize,
    /// Cap on segment covers per interpretation pair.
    pub candidate_cap: usize,
    /// Whether candidates carry both intents or refine only.
    pub intent_mode: IntentMode,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            window: DEFAULT_WINDOW,
            ambiguity_cap: DEFAULT_AMBIGUITY_CAP,
            candidate_cap: DEFAULT_CANDIDATE_CAP,
            intent_mode: IntentMode::Full,
        }
    }
}

/// Everything enumerable for one example: interpretation pairs and the
/// merged candidate list (each candidate remembers its pair).
#[derive(Debug, Clone)]
pub struct Analysis {
    pub pairs: Vec<PairedSymbolSequence>,
    pub candidates: Vec<Candidate>,
}

/// Build all candidates for a precedent/follow-up example over a table.
pub fn analyze(
    precedent: &str,
    followup: &str,
    table: &Table,
    lexicons: &Lexicons,
    options: &AnalysisOptions,
) -> Result<Analysis, PipelineError> {
    let precedents = anonymize(
        precedent,
        table,
        lexicons,
        QueryRole::Precedent,
        options.ambiguity_cap,
    )?;
    let followups = anonymize(
        followup,
        table,
        lexicons,
        QueryRole::Followup,
        options.ambiguity_cap,
    )?;
    let pairs = pair_sequences(&precedents, &followups);
    let mut candidates = Vec::new();
    for (pi, pair) in pairs.iter().enumerate() {
        let covers = enumerate_sequences(pair, options.window, options.candidate_cap)?;
        candidates.extend(attach_intents(&covers, pair, pi, options.intent_mode));
    }
    Ok(Analysis { pairs, candidates })
}

/// How a candidate gets picked.
pub enum Chooser<'a> {
    /// Argmax of the learned scoring model.
    Learned(&'a Model),
    /// Seeded uniform choice; the stream is derived from the example index
    /// so parallel evaluation stays deterministic and order-independent.
    Uniform { seed: u64, example_index: usize },
}

/// Score every candidate with the model (one encoder pass per pair).
pub fn candidate_scores(analysis: &Analysis, model: &Model) -> Vec<f64> {
    let encodings: Vec<Encoding> = analysis
        .pairs
        .iter()
        .map(|p| model.encode(&model.vocab.indices(&p.rendered_items())))
        .collect();
    analysis
        .candidates
        .iter()
        .map(|c| model.score(&c.tags, &encodings[c.pair_index]))
        .collect()
}

/// Pick a candidate index; `None` only when there are no candidates.
pub fn choose(analysis: &Analysis, chooser: &Chooser) -> Option<usize> {
    if analysis.candidates.is_empty() {
        return None;
    }
    match chooser {
        Chooser::Learned(model) => argmax(&candidate_scores(analysis, model)),
        Chooser::Uniform { seed, example_index } => {
            let stream = seed ^ (*example_index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
            let mut rng = ChaCha8Rng::seed_from_u64(stream);
            Some(rng.gen_range(0..analysis.candidates.len()))
        }
    }
}

/// Fuse the candidate at `index`.
pub fn fuse_candidate(analysis: &Analysis, index: usize) -> FusionResult {
    let cand = &analysis.candidates[index];
    fuse_segments(
        &analysis.pairs[cand.pair_index],
        &cand.segments,
        cand.intent,
    )
}

/// One example's end-to-end result.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub output: String,
    pub fusion: FusionResult,
    pub tags: Vec<Tag>,
    pub chosen: usize,
    pub candidate_count: usize,
}

/// Analyze, choose, and fuse one example.
pub fn predict(
    precedent: &str,
    followup: &str,
    table: &Table,
    lexicons: &Lexicons,
    options: &AnalysisOptions,
    chooser: &Chooser,
) -> Result<Prediction, PipelineError> {
    let analysis = analyze(precedent, followup, table, lexicons, options)?;
    let chosen = choose(&analysis, chooser).expect("nonempty queries always yield a candidate");
    let fusion = fuse_candidate(&analysis, chosen);
    let cand = &analysis.candidates[chosen];
    Ok(Prediction {
        output: fusion.output.clone(),
        fusion,
        tags: cand.tags.clone(),
        chosen,
        candidate_count: analysis.candidates.len(),
    })
}
