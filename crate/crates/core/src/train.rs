//! Weakly supervised max-margin training for the candidate ranker.
//!
//! The corpus carries no per-candidate labels. Instead every enumerated
//! candidate is fused and its output checked for symbol consistency against
//! the gold fused query: consistent candidates are positives, the rest
//! negatives. Each update pushes the best-scoring positive above the
//! best-scoring negative by a fixed margin, with candidate scores normalized
//! by rendered sequence length so long interpretations do not dominate.
//!
//! Optionally, a small set of hand-annotated tag sequences can warm-start the
//! model before the weak loop: the candidate matching the annotation becomes
//! the sole positive.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::anonymize::{tokenize, Lexicons, DEFAULT_AMBIGUITY_CAP};
use crate::corpus::{CorpusError, QueryTriple, Table, TableRegistry};
use crate::eval::{symbol_accuracy, symbol_consistent, EvalError};
use crate::pipeline::{
    analyze, fuse_candidate, predict, Analysis, AnalysisOptions, Chooser, PipelineError,
};
use crate::rank::{Gradients, Model, ModelConfig, ModelError, Optimizer, Vocab, START};
use crate::segment::{IntentMode, Tag, DEFAULT_CANDIDATE_CAP, DEFAULT_WINDOW, TAG_COUNT};

/// Stream constant mixed into the seed for shuffle randomness, so shuffling
/// never reuses the stream that initialized the parameters.
const SHUFFLE_STREAM: u64 = 0x5851_F42D_4C95_7F2D;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("training set is empty")]
    EmptyTrainingSet,
}

/// All knobs for one training run. Deserializes with per-field defaults, so a
/// config file only needs the fields it wants to override; unknown keys are
/// rejected to catch typos.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Margin the best positive must clear over the best negative.
    pub margin: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Global L2 gradient clip applied before each update.
    pub clip_norm: f64,
    /// Seeds parameter init and epoch shuffling.
    pub seed: u64,
    /// Shuffle example order each epoch.
    pub shuffle: bool,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    /// Passes over the annotated warm-start set, when one is given.
    pub pretrain_epochs: usize,
    /// Segment adjacency window.
    pub window: usize,
    /// Cap on anonymization interpretations per query.
    pub ambiguity_cap: usize,
    /// Cap on segment covers per interpretation pair.
    pub candidate_cap: usize,
    pub intent_mode: IntentMode,
    /// Optional word-vector file overriding embedding rows at init.
    pub pretrained_vectors: Option<std::path::PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let model = ModelConfig::default();
        TrainConfig {
            margin: 0.5,
            learning_rate: 0.001,
            epochs: 30,
            clip_norm: 5.0,
            seed: 1,
            shuffle: true,
            embed_dim: model.embed_dim,
            hidden_dim: model.hidden_dim,
            pretrain_epochs: 3,
            window: DEFAULT_WINDOW,
            ambiguity_cap: DEFAULT_AMBIGUITY_CAP,
            candidate_cap: DEFAULT_CANDIDATE_CAP,
            intent_mode: IntentMode::Full,
            pretrained_vectors: None,
        }
    }
}

impl TrainConfig {
    pub fn analysis_options(&self) -> AnalysisOptions {
        AnalysisOptions {
            window: self.window,
            ambiguity_cap: self.ambiguity_cap,
            candidate_cap: self.candidate_cap,
            intent_mode: self.intent_mode,
        }
    }
}

/// One example with its candidates split into weak positives and negatives.
#[derive(Debug, Clone)]
pub struct PreparedExample {
    pub analysis: Analysis,
    /// Candidate indices whose fused output is symbol-consistent with gold.
    pub positive: Vec<usize>,
    /// The remaining candidate indices.
    pub negative: Vec<usize>,
}

impl PreparedExample {
    /// An example drives updates only when both sides are nonempty.
    pub fn is_trainable(&self) -> bool {
        !self.positive.is_empty() && !self.negative.is_empty()
    }
}

/// Partition candidate indices by symbol consistency of their fused output
/// against the gold fused query.
pub fn label_candidates(
    analysis: &Analysis,
    gold: &str,
    table: &Table,
    lexicons: &Lexicons,
) -> (Vec<usize>, Vec<usize>) {
    let mut positive = Vec::new();
    let mut negative = Vec::new();
    for index in 0..analysis.candidates.len() {
        let fusion = fuse_candidate(analysis, index);
        if symbol_consistent(&fusion.output, gold, table, lexicons) {
            positive.push(index);
        } else {
            negative.push(index);
        }
    }
    (positive, negative)
}

/// Analyze one triple and label its candidates.
pub fn prepare_example(
    triple: &QueryTriple,
    table: &Table,
    lexicons: &Lexicons,
    options: &AnalysisOptions,
) -> Result<PreparedExample, PipelineError> {
    let analysis = analyze(&triple.precedent, &triple.followup, table, lexicons, options)?;
    let (positive, negative) = label_candidates(&analysis, &triple.fused, table, lexicons);
    Ok(PreparedExample { analysis, positive, negative })
}

/// Margin violation for already-normalized scores.
pub fn hinge(margin: f64, positive: f64, negative: f64) -> f64 {
    (margin - positive + negative).max(0.0)
}

/// First index (in `indices`) maximizing `key`, ties going to the earliest.
fn best_by(indices: &[usize], key: impl Fn(usize) -> f64) -> usize {
    let mut best = indices[0];
    let mut best_score = key(best);
    for &i in &indices[1..] {
        let s = key(i);
        if s > best_score {
            best = i;
            best_score = s;
        }
    }
    best
}

/// Hinge loss and its gradients for one example: scores every candidate,
/// picks the strongest positive and strongest negative, and differentiates
/// the margin violation through emissions, the encoder, and the transition
/// table. Returns `None` when the example is not trainable; gradients are
/// zero when the margin is already satisfied.
pub fn hinge_step(
    model: &Model,
    example: &PreparedExample,
    margin: f64,
) -> Option<(f64, Gradients)> {
    if !example.is_trainable() {
        return None;
    }
    let analysis = &example.analysis;
    let encodings: Vec<_> = analysis
        .pairs
        .iter()
        .map(|p| model.encode(&model.vocab.indices(&p.rendered_items())))
        .collect();
    let lengths: Vec<f64> = analysis
        .pairs
        .iter()
        .map(|p| p.rendered_len() as f64)
        .collect();
    let normalized = |i: usize| {
        let c = &analysis.candidates[i];
        model.score(&c.tags, &encodings[c.pair_index]) / lengths[c.pair_index]
    };
    let pos = best_by(&example.positive, normalized);
    let neg = best_by(&example.negative, normalized);
    let loss = hinge(margin, normalized(pos), normalized(neg));
    let mut grads = Gradients::zeros_like(model);
    if loss > 0.0 {
        // d loss / d score = -1/N for the positive, +1/N for the negative.
        // Emission gradients for candidates sharing a pair accumulate into
        // one buffer so the encoder backprop runs once per pair.
        let mut d_emissions: Vec<Vec<f64>> = lengths
            .iter()
            .map(|n| vec![0.0; *n as usize * TAG_COUNT])
            .collect();
        for (index, sign) in [(pos, -1.0), (neg, 1.0)] {
            let cand = &analysis.candidates[index];
            let coeff = sign / lengths[cand.pair_index];
            let buffer = &mut d_emissions[cand.pair_index];
            let mut prev = START;
            for (row, tag) in cand.tags.iter().enumerate() {
                let t = tag.index();
                buffer[row * TAG_COUNT + t] += coeff;
                grads.add_transition(prev, t, coeff);
                prev = t;
            }
        }
        for (pair_index, buffer) in d_emissions.iter().enumerate() {
            if buffer.iter().any(|&v| v != 0.0) {
                model.backprop(&encodings[pair_index], buffer, &mut grads);
            }
        }
    }
    Some((loss, grads))
}

/// Result of one optimization step.
#[derive(Debug, Clone, Copy)]
pub struct StepOutcome {
    pub loss: f64,
    /// Whether parameters changed (loss was positive).
    pub updated: bool,
}

/// Run one hinge step and apply the clipped gradients when the margin is
/// violated. Returns `None` for untrainable examples.
pub fn train_step(
    model: &mut Model,
    optimizer: &mut Optimizer,
    example: &PreparedExample,
    margin: f64,
    clip_norm: f64,
) -> Option<StepOutcome> {
    let (loss, mut grads) = hinge_step(model, example, margin)?;
    let updated = loss > 0.0;
    if updated {
        grads.clip(clip_norm);
        optimizer.apply(model, &grads);
    }
    Some(StepOutcome { loss, updated })
}

/// Per-epoch training trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based epoch number.
    pub epoch: usize,
    /// Mean hinge loss over trainable examples.
    pub mean_loss: f64,
    /// Steps that actually changed parameters.
    pub updates: usize,
    pub dev_symbol_accuracy: f64,
}

/// Summary of a training run. Serialized output is fully deterministic for a
/// fixed config and corpus; wall time is kept out of serialization for that
/// reason.
#[derive(Debug, Clone, Serialize)]
pub struct TrainReport {
    pub config: TrainConfig,
    pub vocab_size: usize,
    pub train_examples: usize,
    /// Examples with at least one positive and one negative candidate.
    pub trainable_examples: usize,
    /// Examples skipped for lacking a positive or a negative.
    pub skipped_examples: usize,
    pub dev_examples: usize,
    /// Annotated warm-start examples used / not matching any candidate.
    pub pretrain_used: usize,
    pub pretrain_skipped: usize,
    /// Dev symbol accuracy of the freshly initialized model.
    pub initial_dev_symbol_accuracy: f64,
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose model is returned; 0 means the initial model.
    pub best_epoch: usize,
    pub best_dev_symbol_accuracy: f64,
    /// Informational only; never serialized so artifacts stay reproducible.
    #[serde(skip)]
    pub wall_seconds: f64,
}

/// A trained model plus its report.
#[derive(Debug)]
pub struct TrainOutcome {
    pub model: Model,
    pub report: TrainReport,
}

/// Warm-start pass summary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PretrainSummary {
    /// Annotations matched to a candidate and trained on.
    pub used: usize,
    /// Annotations whose tags matched no enumerated candidate.
    pub skipped: usize,
    pub mean_loss: f64,
}

/// Dev-set symbol accuracy of the model's argmax predictions; 0 for an empty
/// dev set.
fn dev_accuracy(
    model: &Model,
    dev: &[QueryTriple],
    tables: &TableRegistry,
    lexicons: &Lexicons,
    options: &AnalysisOptions,
) -> Result<f64, TrainError> {
    if dev.is_empty() {
        return Ok(0.0);
    }
    let mut outputs = Vec::with_capacity(dev.len());
    let mut golds = Vec::with_capacity(dev.len());
    let mut dev_tables = Vec::with_capacity(dev.len());
    for triple in dev {
        let table = tables.get(&triple.table_id)?;
        let prediction = predict(
            &triple.precedent,
            &triple.followup,
            table,
            lexicons,
            options,
            &Chooser::Learned(model),
        )?;
        outputs.push(prediction.output);
        golds.push(triple.fused.clone());
        dev_tables.push(table);
    }
    Ok(symbol_accuracy(&outputs, &golds, &dev_tables, lexicons)?)
}

/// Train on annotated tag sequences: the candidates whose tags equal the
/// annotation are the positives, everything else is negative. Annotations
/// that match no candidate are counted and skipped.
pub fn pretrain_supervised(
    model: &mut Model,
    optimizer: &mut Optimizer,
    annotations: &[(QueryTriple, Vec<Tag>)],
    tables: &TableRegistry,
    lexicons: &Lexicons,
    config: &TrainConfig,
) -> Result<PretrainSummary, TrainError> {
    let options = config.analysis_options();
    let mut prepared = Vec::new();
    let mut skipped = 0;
    for (triple, tags) in annotations {
        let table = tables.get(&triple.table_id)?;
        let analysis = analyze(&triple.precedent, &triple.followup, table, lexicons, &options)?;
        let positive: Vec<usize> = analysis
            .candidates
            .iter()
            .enumerate()
            .filter(|(_, c)| &c.tags == tags)
            .map(|(i, _)| i)
            .collect();
        let negative: Vec<usize> = (0..analysis.candidates.len())
            .filter(|i| !positive.contains(i))
            .collect();
        let example = PreparedExample { analysis, positive, negative };
        if example.is_trainable() {
            prepared.push(example);
        } else {
            skipped += 1;
        }
    }
    let mut total_loss = 0.0;
    let mut steps = 0usize;
    for _ in 0..config.pretrain_epochs {
        for example in &prepared {
            if let Some(outcome) =
                train_step(model, optimizer, example, config.margin, config.clip_norm)
            {
                total_loss += outcome.loss;
                steps += 1;
            }
        }
    }
    Ok(PretrainSummary {
        used: prepared.len(),
        skipped,
        mean_loss: if steps == 0 { 0.0 } else { total_loss / steps as f64 },
    })
}

/// Full training run: build the vocabulary from the training queries,
/// initialize the model, optionally warm-start from annotations, then run
/// max-margin epochs with per-epoch dev evaluation. The returned model is the
/// one with the best dev symbol accuracy seen (the initial model counts as
/// epoch 0), so training can never return something worse than it started
/// with.
pub fn train(
    train_triples: &[QueryTriple],
    dev_triples: &[QueryTriple],
    tables: &TableRegistry,
    lexicons: &Lexicons,
    annotations: &[(QueryTriple, Vec<Tag>)],
    config: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    let start = Instant::now();
    if train_triples.is_empty() {
        return Err(TrainError::EmptyTrainingSet);
    }
    let options = config.analysis_options();

    let mut words = Vec::new();
    for triple in train_triples {
        for token in tokenize(&triple.precedent) {
            words.push(token.lower);
        }
        for token in tokenize(&triple.followup) {
            words.push(token.lower);
        }
    }
    let vocab = Vocab::build(words.iter().map(String::as_str));
    let model_config = ModelConfig {
        embed_dim: config.embed_dim,
        hidden_dim: config.hidden_dim,
        seed: config.seed,
    };
    let mut model = Model::init(model_config, vocab);
    if let Some(path) = &config.pretrained_vectors {
        model.load_pretrained_vectors(path)?;
    }
    let mut optimizer = Optimizer::new(config.learning_rate, &model);

    let (pretrain_used, pretrain_skipped) = if annotations.is_empty() {
        (0, 0)
    } else {
        let summary =
            pretrain_supervised(&mut model, &mut optimizer, annotations, tables, lexicons, config)?;
        (summary.used, summary.skipped)
    };

    let mut prepared = Vec::new();
    let mut skipped_examples = 0;
    for triple in train_triples {
        let table = tables.get(&triple.table_id)?;
        let example = prepare_example(triple, table, lexicons, &options)?;
        if example.is_trainable() {
            prepared.push(example);
        } else {
            skipped_examples += 1;
        }
    }

    let initial_dev = dev_accuracy(&model, dev_triples, tables, lexicons, &options)?;
    let mut best_model = model.clone();
    let mut best_epoch = 0;
    let mut best_dev = initial_dev;

    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed ^ SHUFFLE_STREAM);
    let mut order: Vec<usize> = (0..prepared.len()).collect();
    let mut records = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        if config.shuffle {
            order.shuffle(&mut shuffle_rng);
        }
        let mut total_loss = 0.0;
        let mut updates = 0;
        for &i in &order {
            if let Some(outcome) =
                train_step(&mut model, &mut optimizer, &prepared[i], config.margin, config.clip_norm)
            {
                total_loss += outcome.loss;
                if outcome.updated {
                    updates += 1;
                }
            }
        }
        let mean_loss = if prepared.is_empty() {
            0.0
        } else {
            total_loss / prepared.len() as f64
        };
        let dev = dev_accuracy(&model, dev_triples, tables, lexicons, &options)?;
        records.push(EpochRecord { epoch, mean_loss, updates, dev_symbol_accuracy: dev });
        if dev > best_dev {
            best_dev = dev;
            best_epoch = epoch;
            best_model = model.clone();
        }
    }

    let report = TrainReport {
        config: config.clone(),
        vocab_size: best_model.vocab.len(),
        train_examples: train_triples.len(),
        trainable_examples: prepared.len(),
        skipped_examples,
        dev_examples: dev_triples.len(),
        pretrain_used,
        pretrain_skipped,
        initial_dev_symbol_accuracy: initial_dev,
        epochs: records,
        best_epoch,
        best_dev_symbol_accuracy: best_dev,
        wall_seconds: start.elapsed().as_secs_f64(),
    };
    Ok(TrainOutcome { model: best_model, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anonymize::Lexicons;
    use crate::segment::Intent;
    use crate::synth;

    fn registry() -> TableRegistry {
        let mut reg = TableRegistry::new();
        for table in synth::tables() {
            reg.insert(table);
        }
        reg
    }

    fn small_config() -> TrainConfig {
        TrainConfig {
            embed_dim: 16,
            hidden_dim: 12,
            epochs: 2,
            ..TrainConfig::default()
        }
    }

    fn prepare(triple: &QueryTriple) -> PreparedExample {
        let reg = registry();
        let lex = Lexicons::builtin();
        let table = reg.get(&triple.table_id).unwrap();
        prepare_example(triple, table, &lex, &AnalysisOptions::default()).unwrap()
    }

    #[test]
    fn labels_partition_candidates_and_exact_gold_is_positive() {
        let triple = &synth::triples(1)[0];
        let example = prepare(triple);
        assert!(!example.positive.is_empty());
        assert!(!example.negative.is_empty());
        assert_eq!(
            example.positive.len() + example.negative.len(),
            example.analysis.candidates.len()
        );
        assert!(example.positive.iter().all(|i| !example.negative.contains(i)));
        // At least one positive reconstructs the gold string verbatim.
        let exact = example
            .positive
            .iter()
            .any(|&i| fuse_candidate(&example.analysis, i).output == triple.fused);
        assert!(exact, "no positive candidate fuses to the gold string");
    }

    #[test]
    fn append_candidate_keeping_both_values_is_negative() {
        // Gold replaces CBC with TSN; an append-intent reading keeps both
        // network names side by side, which breaks symbol consistency.
        let triple = &synth::triples(1)[0];
        assert!(triple.precedent.contains("CBC") && triple.fused.contains("TSN"));
        let example = prepare(triple);
        let both = example
            .negative
            .iter()
            .map(|&i| (i, fuse_candidate(&example.analysis, i)))
            .find(|(i, fusion)| {
                example.analysis.candidates[*i].intent == Intent::Append
                    && fusion.output.contains("CBC")
                    && fusion.output.contains("TSN")
            });
        assert!(both.is_some(), "expected an append reading keeping both values");
    }

    #[test]
    fn hinge_is_zero_beyond_margin_and_linear_inside() {
        assert_eq!(hinge(0.5, 2.0, 1.0), 0.0);
        assert_eq!(hinge(0.5, 1.0, 0.5), 0.0);
        assert!((hinge(0.5, 1.0, 0.8) - 0.3).abs() < 1e-12);
        assert!((hinge(0.5, -0.2, 0.1) - 0.8).abs() < 1e-12);
    }

    #[test]
    fn hinge_step_matches_manual_best_pair_computation() {
        let triple = &synth::triples(1)[0];
        let example = prepare(triple);
        let mut words = Vec::new();
        for token in tokenize(&triple.precedent) {
            words.push(token.lower);
        }
        for token in tokenize(&triple.followup) {
            words.push(token.lower);
        }
        let model = Model::init(
            ModelConfig { embed_dim: 8, hidden_dim: 6, seed: 5 },
            Vocab::build(words.iter().map(String::as_str)),
        );
        let margin = 2.0;
        let (loss, grads) = hinge_step(&model, &example, margin).unwrap();

        let norm = |i: usize| {
            let c = &example.analysis.candidates[i];
            let pair = &example.analysis.pairs[c.pair_index];
            let enc = model.encode(&model.vocab.indices(&pair.rendered_items()));
            model.score(&c.tags, &enc) / pair.rendered_len() as f64
        };
        let best_pos = example
            .positive
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, |acc, i| acc.max(norm(i)));
        let best_neg = example
            .negative
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, |acc, i| acc.max(norm(i)));
        let expected = (margin - best_pos + best_neg).max(0.0);
        assert!((loss - expected).abs() < 1e-12);
        assert!(loss > 0.0, "margin 2.0 should be violated at init");
        assert!(grads.l2_norm() > 0.0);

        // A tiny margin the init already satisfies yields zero gradients.
        let satisfied = best_pos - best_neg;
        if satisfied > 0.0 {
            let (l0, g0) = hinge_step(&model, &example, satisfied / 2.0).unwrap();
            assert_eq!(l0, 0.0);
            assert_eq!(g0.l2_norm(), 0.0);
        }
    }

    #[test]
    fn hinge_gradients_match_finite_differences_in_every_group() {
        let triple = &synth::triples(1)[0];
        let example = prepare(triple);
        let mut words = Vec::new();
        for token in tokenize(&triple.precedent) {
            words.push(token.lower);
        }
        for token in tokenize(&triple.followup) {
            words.push(token.lower);
        }
        let mut model = Model::init(
            ModelConfig { embed_dim: 6, hidden_dim: 5, seed: 9 },
            Vocab::build(words.iter().map(String::as_str)),
        );
        // Large margin keeps the hinge active and the best pair stable under
        // the probe perturbations.
        let margin = 5.0;
        let (loss, grads) = hinge_step(&model, &example, margin).unwrap();
        assert!(loss > 0.0);

        let eps = 1e-5;
        for name in Model::group_names() {
            let len = model.group_mut(name).len();
            let samples = 6.min(len);
            for s in 0..samples {
                let idx = s * len / samples;
                let orig = model.group_mut(name)[idx];
                model.group_mut(name)[idx] = orig + eps;
                let (plus, _) = hinge_step(&model, &example, margin).unwrap();
                model.group_mut(name)[idx] = orig - eps;
                let (minus, _) = hinge_step(&model, &example, margin).unwrap();
                model.group_mut(name)[idx] = orig;
                let numeric = (plus - minus) / (2.0 * eps);
                let analytic = grads.group(name)[idx];
                // Relative error with a floored denominator: central
                // differences carry ~1e-10 absolute noise, which would
                // swamp near-zero gradients under a pure relative test.
                let rel = (analytic - numeric).abs() / numeric.abs().max(analytic.abs()).max(1e-3);
                assert!(
                    rel < 1e-4,
                    "{name}[{idx}]: analytic {analytic:.3e} vs numeric {numeric:.3e} (rel {rel:.3e})"
                );
            }
        }
    }

    #[test]
    fn training_reaches_perfect_dev_accuracy_on_two_solvable_examples() {
        let all = synth::triples(8);
        // Index 0 is a value refinement, index 4 a demonstrative filter;
        // both have reachable consistent candidates.
        let set = vec![all[0].clone(), all[4].clone()];
        let reg = registry();
        let lex = Lexicons::builtin();
        let config = TrainConfig {
            embed_dim: 16,
            hidden_dim: 12,
            epochs: 25,
            learning_rate: 0.02,
            ..TrainConfig::default()
        };
        let outcome = train(&set, &set, &reg, &lex, &[], &config).unwrap();
        assert_eq!(outcome.report.trainable_examples, 2);
        assert_eq!(outcome.report.best_dev_symbol_accuracy, 100.0);
        let first = outcome.report.epochs.first().unwrap();
        let last = outcome.report.epochs.last().unwrap();
        assert!(
            last.mean_loss < first.mean_loss,
            "loss should shrink: first {} last {}",
            first.mean_loss,
            last.mean_loss
        );
    }

    #[test]
    fn same_config_trains_to_identical_reports_and_checkpoints() {
        let all = synth::triples(10);
        let (train_set, dev_set) = all.split_at(8);
        let reg = registry();
        let lex = Lexicons::builtin();
        let config = small_config();
        let dir = tempfile::tempdir().unwrap();

        let mut reports = Vec::new();
        let mut bytes = Vec::new();
        for run in 0..2 {
            let outcome = train(train_set, dev_set, &reg, &lex, &[], &config).unwrap();
            reports.push(serde_json::to_string(&outcome.report).unwrap());
            let path = dir.path().join(format!("model{run}.json"));
            outcome.model.save(&path).unwrap();
            bytes.push(std::fs::read(&path).unwrap());
        }
        assert_eq!(reports[0], reports[1]);
        assert_eq!(bytes[0], bytes[1]);
    }

    #[test]
    fn report_serialization_omits_wall_time() {
        let all = synth::triples(2);
        let reg = registry();
        let lex = Lexicons::builtin();
        let config = TrainConfig { epochs: 1, embed_dim: 8, hidden_dim: 6, ..TrainConfig::default() };
        let outcome = train(&all, &[], &reg, &lex, &[], &config).unwrap();
        let json = serde_json::to_string(&outcome.report).unwrap();
        assert!(!json.contains("wall_seconds"));
        assert!(json.contains("best_epoch"));
    }

    #[test]
    fn pretrain_uses_matching_annotations_and_skips_unmatched() {
        let triple = synth::triples(1)[0].clone();
        let example = prepare(&triple);
        let good_tags = example.analysis.candidates[example.positive[0]].tags.clone();
        let pair_len = example.analysis.pairs
            [example.analysis.candidates[example.positive[0]].pair_index]
            .rendered_len();
        // All-outside tags are never a candidate here: the table and value
        // spans cannot be tagged O.
        let bad_tags = vec![Tag::Outside; pair_len];

        let reg = registry();
        let lex = Lexicons::builtin();
        let config = TrainConfig { embed_dim: 8, hidden_dim: 6, ..TrainConfig::default() };
        let mut words = Vec::new();
        for token in tokenize(&triple.precedent) {
            words.push(token.lower);
        }
        for token in tokenize(&triple.followup) {
            words.push(token.lower);
        }
        let mut model = Model::init(
            ModelConfig { embed_dim: 8, hidden_dim: 6, seed: 1 },
            Vocab::build(words.iter().map(String::as_str)),
        );
        let mut optimizer = Optimizer::new(config.learning_rate, &model);
        let annotations = vec![(triple.clone(), good_tags), (triple, bad_tags)];
        let summary = pretrain_supervised(
            &mut model,
            &mut optimizer,
            &annotations,
            &reg,
            &lex,
            &config,
        )
        .unwrap();
        assert_eq!(summary.used, 1);
        assert_eq!(summary.skipped, 1);
        assert!(summary.mean_loss.is_finite());
    }

    #[test]
    fn zero_epochs_returns_initial_model() {
        let all = synth::triples(2);
        let reg = registry();
        let lex = Lexicons::builtin();
        let config = TrainConfig { epochs: 0, embed_dim: 8, hidden_dim: 6, ..TrainConfig::default() };
        let outcome = train(&all, &all, &reg, &lex, &[], &config).unwrap();
        assert_eq!(outcome.report.best_epoch, 0);
        assert!(outcome.report.epochs.is_empty());
        assert_eq!(
            outcome.report.best_dev_symbol_accuracy,
            outcome.report.initial_dev_symbol_accuracy
        );
    }

    #[test]
    fn empty_training_set_is_an_error() {
        let reg = registry();
        let lex = Lexicons::builtin();
        let err = train(&[], &[], &reg, &lex, &[], &small_config());
        assert!(matches!(err, Err(TrainError::EmptyTrainingSet)));
    }
}
