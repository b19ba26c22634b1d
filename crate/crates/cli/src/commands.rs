//! Subcommand implementations.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::anyhow;
use rayon::prelude::*;
use serde::Deserialize;
use serde_json::json;

use followup_core::anonymize::{anonymize, Grounding, Lexicons, SymbolSequence};
use followup_core::corpus::{
    apply_split_file, load_split_file, load_triples, split_indices, CorpusError, QueryTriple,
    Table, TableRegistry,
};
use followup_core::eval::evaluate;
use followup_core::fuse::{ConflictPair, PrecedentTarget};
use followup_core::pipeline::{analyze, candidate_scores, choose, fuse_candidate, predict, Chooser};
use followup_core::rank::Model;
use followup_core::segment::{IntentMode, Tag};
use followup_core::synth;
use followup_core::train::{train, TrainConfig};

use crate::args::{
    Ablation, CandidatesArgs, EvalArgs, FuseArgs, InspectArgs, Part, SynthArgs, TrainArgs,
};

/// Errors split by exit code: usage and input-validation problems exit 2,
/// operational failures exit 1.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Failure(anyhow::Error),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> CliError {
        CliError::Usage(msg.into())
    }
}

impl<E: std::error::Error + Send + Sync + 'static> From<E> for CliError {
    fn from(e: E) -> CliError {
        CliError::Failure(anyhow::Error::new(e))
    }
}

type CmdResult = Result<(), CliError>;

/// Corpus-shaped inputs: IO problems are operational, everything else is the
/// user handing over invalid data.
fn data_validation<T>(result: Result<T, CorpusError>) -> Result<T, CliError> {
    result.map_err(|e| match e {
        CorpusError::Io { .. } => CliError::Failure(e.into()),
        other => CliError::Usage(other.to_string()),
    })
}

fn load_lexicons(path: &Option<PathBuf>) -> Result<Lexicons, CliError> {
    match path {
        None => Ok(Lexicons::builtin()),
        Some(p) => Lexicons::with_overrides(p).map_err(|e| CliError::Usage(e.to_string())),
    }
}

fn load_registry(dir: &Path) -> Result<TableRegistry, CliError> {
    data_validation(TableRegistry::load_dir(dir))
}

fn get_table<'a>(registry: &'a TableRegistry, id: &str) -> Result<&'a Table, CliError> {
    data_validation(registry.get(id))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> CmdResult {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// synth

pub fn synth_cmd(args: SynthArgs) -> CmdResult {
    synth::write_corpus(&args.out, args.count)?;
    println!(
        "wrote {} triples over {} tables",
        args.count,
        synth::tables().len()
    );
    println!("tables:  {}", args.out.join("tables").display());
    println!("triples: {}", args.out.join("triples.jsonl").display());
    Ok(())
}

// ---------------------------------------------------------------------------
// inspect

fn describe_grounding(grounding: &Grounding, table: &Table) -> String {
    match grounding {
        Grounding::Column(i) => format!("column \"{}\"", table.columns[*i].name),
        Grounding::Cells(cols) => {
            let names: Vec<&str> = cols
                .iter()
                .map(|&c| table.columns[c].name.as_str())
                .collect();
            format!("cell value in column(s) {}", names.join(", "))
        }
        Grounding::Literal => "free-standing number or date".to_string(),
        Grounding::Lexicon(word) => format!("lexicon entry \"{word}\""),
    }
}

fn interpretation_json(seq: &SymbolSequence, table: &Table) -> serde_json::Value {
    json!({
        "rendered": seq.render(),
        "spans": seq.spans.iter().map(|s| json!({
            "kind": s.kind.as_str(),
            "start": s.start,
            "end": s.end,
            "surface": seq.surface(s.start, s.end),
            "grounding": describe_grounding(&s.grounding, table),
        })).collect::<Vec<_>>(),
    })
}

pub fn inspect_cmd(args: InspectArgs) -> CmdResult {
    let lexicons = load_lexicons(&args.data.lexicons)?;
    let registry = load_registry(&args.data.tables)?;
    let table = get_table(&registry, &args.table)?;
    let cap = args
        .ambiguity_cap
        .unwrap_or(followup_core::anonymize::DEFAULT_AMBIGUITY_CAP);
    let seqs = anonymize(&args.query, table, &lexicons, args.role.into(), cap)?;
    if args.json {
        let value = json!({
            "query": args.query,
            "table": table.id,
            "interpretations": seqs.iter().map(|s| interpretation_json(s, table)).collect::<Vec<_>>(),
        });
        println!("{}", serde_json::to_string(&value)?);
        return Ok(());
    }
    println!("query: {}", args.query);
    println!("table: {}", table.id);
    println!("interpretations: {}", seqs.len());
    for (i, seq) in seqs.iter().enumerate() {
        println!();
        println!("interpretation {}:", i + 1);
        println!("  rendered: {}", seq.render());
        if seq.spans.is_empty() {
            println!("  (no symbols)");
        }
        for span in &seq.spans {
            println!(
                "  {:<4} [{}, {}) \"{}\" -> {}",
                span.kind.as_str(),
                span.start,
                span.end,
                seq.surface(span.start, span.end),
                describe_grounding(&span.grounding, table),
            );
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// candidates

/// Pad token and tag rows to a shared per-column width so every tag sits
/// directly under its token.
fn align_rows(tokens: &[String], tags: &[String]) -> (String, String) {
    let mut token_row = String::new();
    let mut tag_row = String::new();
    for (i, (token, tag)) in tokens.iter().zip(tags).enumerate() {
        if i > 0 {
            token_row.push_str("  ");
            tag_row.push_str("  ");
        }
        let width = token.chars().count().max(tag.chars().count());
        token_row.push_str(token);
        for _ in token.chars().count()..width {
            token_row.push(' ');
        }
        tag_row.push_str(tag);
        for _ in tag.chars().count()..width {
            tag_row.push(' ');
        }
    }
    (
        token_row.trim_end().to_string(),
        tag_row.trim_end().to_string(),
    )
}

pub fn candidates_cmd(args: CandidatesArgs) -> CmdResult {
    let lexicons = load_lexicons(&args.data.lexicons)?;
    let registry = load_registry(&args.data.tables)?;
    let table = get_table(&registry, &args.table)?;
    let options = args.analysis.options();
    let analysis = analyze(&args.precedent, &args.followup, table, &lexicons, &options)?;
    let model = args.checkpoint.as_deref().map(Model::load).transpose()?;
    let scores = model.as_ref().map(|m| candidate_scores(&analysis, m));

    if args.json {
        let value = json!({
            "pairs": analysis.pairs.iter().map(|p| json!({
                "rendered": p.rendered_items().iter().map(|i| i.text.clone()).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
            "candidates": analysis.candidates.iter().enumerate().map(|(i, c)| json!({
                "index": i,
                "pair": c.pair_index,
                "intent": c.intent.to_string(),
                "tags": c.tags.iter().map(|t| t.to_string()).collect::<Vec<_>>(),
                "score": scores.as_ref().map(|s| s[i]),
            })).collect::<Vec<_>>(),
        });
        println!("{}", serde_json::to_string(&value)?);
        return Ok(());
    }

    println!(
        "pairs: {}, candidates: {}",
        analysis.pairs.len(),
        analysis.candidates.len()
    );
    for (pi, pair) in analysis.pairs.iter().enumerate() {
        println!();
        println!("pair {}/{}:", pi + 1, analysis.pairs.len());
        let tokens: Vec<String> = pair
            .rendered_items()
            .iter()
            .map(|i| i.text.clone())
            .collect();
        let members: Vec<usize> = (0..analysis.candidates.len())
            .filter(|&i| analysis.candidates[i].pair_index == pi)
            .collect();
        let shown = if args.limit == 0 {
            members.len()
        } else {
            args.limit.min(members.len())
        };
        for &ci in &members[..shown] {
            let cand = &analysis.candidates[ci];
            let tags: Vec<String> = cand.tags.iter().map(|t| t.to_string()).collect();
            let (token_row, tag_row) = align_rows(&tokens, &tags);
            match scores.as_ref() {
                Some(s) => println!(
                    "  candidate {ci} (intent {}, score {:.4}):",
                    cand.intent, s[ci]
                ),
                None => println!("  candidate {ci} (intent {}):", cand.intent),
            }
            println!("    {token_row}");
            println!("    {tag_row}");
        }
        if shown < members.len() {
            println!("  ... {} more candidates not shown", members.len() - shown);
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// fuse

fn describe_conflict(conflict: &ConflictPair) -> String {
    let target = match conflict.target {
        PrecedentTarget::Segment(i) => format!("precedent segment {i}"),
        PrecedentTarget::Remainder => "precedent remainder".to_string(),
    };
    format!(
        "follow-up segment {} vs {} ({})",
        conflict.followup, target, conflict.kind
    )
}

pub fn fuse_cmd(args: FuseArgs) -> CmdResult {
    let lexicons = load_lexicons(&args.data.lexicons)?;
    let registry = load_registry(&args.data.tables)?;
    let table = get_table(&registry, &args.table)?;
    let options = args.analysis.options();
    let analysis = analyze(&args.precedent, &args.followup, table, &lexicons, &options)?;
    let model = args.checkpoint.as_deref().map(Model::load).transpose()?;
    let chooser = match model.as_ref() {
        Some(m) => Chooser::Learned(m),
        None => Chooser::Uniform {
            seed: args.seed,
            example_index: 0,
        },
    };
    let chosen = choose(&analysis, &chooser)
        .ok_or_else(|| CliError::Failure(anyhow!("no candidates enumerated")))?;
    let fusion = fuse_candidate(&analysis, chosen);
    let cand = &analysis.candidates[chosen];

    if args.json {
        let value = json!({
            "output": fusion.output,
            "precedent_fusion": fusion.precedent_fusion,
            "followup_fusion": fusion.followup_fusion,
            "intent": fusion.intent.to_string(),
            "conflicts": fusion.conflicts,
            "tags": cand.tags.iter().map(|t| t.to_string()).collect::<Vec<_>>(),
            "chosen": chosen,
            "candidate_count": analysis.candidates.len(),
        });
        println!("{}", serde_json::to_string(&value)?);
        return Ok(());
    }

    match (&args.checkpoint, &model) {
        (Some(path), Some(_)) => println!("chooser: model {}", path.display()),
        _ => {
            println!("chooser: uniform random");
            println!("seed: {}", args.seed);
        }
    }
    println!(
        "candidates: {} (chose {})",
        analysis.candidates.len(),
        chosen
    );
    println!("intent: {}", fusion.intent);
    if args.verbose {
        let pair = &analysis.pairs[cand.pair_index];
        let tokens: Vec<String> = pair
            .rendered_items()
            .iter()
            .map(|i| i.text.clone())
            .collect();
        let tags: Vec<String> = cand.tags.iter().map(|t| t.to_string()).collect();
        let (token_row, tag_row) = align_rows(&tokens, &tags);
        println!("  {token_row}");
        println!("  {tag_row}");
        if fusion.conflicts.is_empty() {
            println!("conflicts: none");
        } else {
            println!("conflicts:");
            for conflict in &fusion.conflicts {
                println!("  {}", describe_conflict(conflict));
            }
        }
    }
    println!("fused: {}", fusion.output);
    Ok(())
}

// ---------------------------------------------------------------------------
// train

fn parse_split_sizes(spec: &str) -> Result<(usize, usize, usize), CliError> {
    let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(CliError::usage(format!(
            "--split-sizes wants \"TRAIN,DEV,TEST\", got {spec:?}"
        )));
    }
    let mut sizes = [0usize; 3];
    for (slot, part) in sizes.iter_mut().zip(&parts) {
        *slot = part.parse().map_err(|_| {
            CliError::usage(format!("--split-sizes: {part:?} is not a number"))
        })?;
    }
    Ok((sizes[0], sizes[1], sizes[2]))
}

/// Fields present in the config file override the flag-derived config.
fn merge_config(base: &TrainConfig, path: &Path) -> Result<TrainConfig, CliError> {
    let text = fs::read_to_string(path)?;
    let overlay: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))?;
    let serde_json::Value::Object(overlay) = overlay else {
        return Err(CliError::usage(format!(
            "config {}: expected a JSON object",
            path.display()
        )));
    };
    let mut merged = serde_json::to_value(base).expect("config serializes");
    let map = merged.as_object_mut().expect("config is an object");
    for (key, value) in overlay {
        map.insert(key, value);
    }
    serde_json::from_value(merged)
        .map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))
}

#[derive(Deserialize)]
struct AnnotationRecord {
    precedent: String,
    followup: String,
    fused: String,
    table_id: String,
    tags: Vec<String>,
}

fn load_annotations(
    path: &Path,
    registry: &TableRegistry,
) -> Result<Vec<(QueryTriple, Vec<Tag>)>, CliError> {
    let text = fs::read_to_string(path)?;
    let mut annotations = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: AnnotationRecord = serde_json::from_str(line).map_err(|e| {
            CliError::usage(format!("{} line {}: {e}", path.display(), lineno + 1))
        })?;
        get_table(registry, &record.table_id)?;
        let mut tags = Vec::with_capacity(record.tags.len());
        for raw in &record.tags {
            tags.push(Tag::parse(raw).ok_or_else(|| {
                CliError::usage(format!(
                    "{} line {}: unknown tag {raw:?}",
                    path.display(),
                    lineno + 1
                ))
            })?);
        }
        annotations.push((
            QueryTriple {
                precedent: record.precedent,
                followup: record.followup,
                fused: record.fused,
                table_id: record.table_id,
            },
            tags,
        ));
    }
    Ok(annotations)
}

fn intent_mode_name(mode: IntentMode) -> &'static str {
    match mode {
        IntentMode::Full => "full",
        IntentMode::ForceRefine => "force-refine",
    }
}

pub fn train_cmd(args: TrainArgs) -> CmdResult {
    let lexicons = load_lexicons(&args.data.lexicons)?;
    let registry = load_registry(&args.data.tables)?;
    let triples = data_validation(load_triples(&args.triples, &registry))?;

    let mut config = TrainConfig::default();
    if let Some(v) = args.seed {
        config.seed = v;
    }
    if let Some(v) = args.margin {
        config.margin = v;
    }
    if let Some(v) = args.lr {
        config.learning_rate = v;
    }
    if let Some(v) = args.epochs {
        config.epochs = v;
    }
    if let Some(v) = args.clip_norm {
        config.clip_norm = v;
    }
    if let Some(v) = args.embed_dim {
        config.embed_dim = v;
    }
    if let Some(v) = args.hidden_dim {
        config.hidden_dim = v;
    }
    if let Some(v) = args.pretrain_epochs {
        config.pretrain_epochs = v;
    }
    if let Some(v) = &args.pretrained_vectors {
        config.pretrained_vectors = Some(v.clone());
    }
    if args.no_shuffle {
        config.shuffle = false;
    }
    if let Some(v) = args.analysis.window {
        config.window = v;
    }
    if let Some(v) = args.analysis.ambiguity_cap {
        config.ambiguity_cap = v;
    }
    if let Some(v) = args.analysis.candidate_cap {
        config.candidate_cap = v;
    }
    if args.analysis.no_intent {
        config.intent_mode = IntentMode::ForceRefine;
    }
    if let Some(path) = &args.config {
        config = merge_config(&config, path)?;
    }

    let (train_set, dev_set, test_held_out) = if let Some(path) = &args.split {
        let file = data_validation(load_split_file(path))?;
        let split = data_validation(apply_split_file(&triples, &file))?;
        (split.train, split.dev, split.test.len())
    } else if let Some(spec) = &args.split_sizes {
        let sizes = parse_split_sizes(spec)?;
        let file = data_validation(split_indices(triples.len(), sizes, config.seed))?;
        if let Some(out) = &args.save_split {
            write_json(out, &file)?;
            println!("split written to {}", out.display());
        }
        let split = data_validation(apply_split_file(&triples, &file))?;
        (split.train, split.dev, split.test.len())
    } else {
        (triples, Vec::new(), 0)
    };

    let annotations = match &args.pretrain_annotations {
        Some(path) => load_annotations(path, &registry)?,
        None => Vec::new(),
    };

    println!("seed: {}", config.seed);
    println!(
        "data: {} train / {} dev / {} test held out",
        train_set.len(),
        dev_set.len(),
        test_held_out
    );
    println!(
        "model: embed {} hidden {} | margin {} lr {} epochs {} clip {}",
        config.embed_dim,
        config.hidden_dim,
        config.margin,
        config.learning_rate,
        config.epochs,
        config.clip_norm
    );
    println!("intent mode: {}", intent_mode_name(config.intent_mode));

    let outcome = train(&train_set, &dev_set, &registry, &lexicons, &annotations, &config)
        .map_err(|e| match e {
            followup_core::train::TrainError::EmptyTrainingSet => {
                CliError::usage("training set is empty")
            }
            other => CliError::Failure(other.into()),
        })?;
    let report = &outcome.report;

    if !annotations.is_empty() {
        println!(
            "warm start: {} annotations used, {} unmatched",
            report.pretrain_used, report.pretrain_skipped
        );
    }
    println!(
        "examples: {} trainable, {} skipped (no positive or no negative)",
        report.trainable_examples, report.skipped_examples
    );
    println!(
        "initial dev accuracy: {:.2}%",
        report.initial_dev_symbol_accuracy
    );
    for record in &report.epochs {
        println!(
            "epoch {:>3}: loss {:.4}  updates {:>3}  dev accuracy {:.2}%",
            record.epoch, record.mean_loss, record.updates, record.dev_symbol_accuracy
        );
    }
    println!(
        "best epoch: {} (dev accuracy {:.2}%)",
        report.best_epoch, report.best_dev_symbol_accuracy
    );
    println!("wall time: {:.1}s", report.wall_seconds);

    if let Some(path) = &args.checkpoint {
        outcome.model.save(path)?;
        println!("checkpoint written to {}", path.display());
    }
    if let Some(path) = &args.report {
        write_json(path, report)?;
        println!("report written to {}", path.display());
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// eval

pub fn eval_cmd(args: EvalArgs) -> CmdResult {
    match args.ablate {
        Some(Ablation::NoRanking) if args.checkpoint.is_some() => {
            return Err(CliError::usage(
                "--ablate no-ranking replaces the model; drop --checkpoint",
            ));
        }
        Some(Ablation::NoRanking) => {}
        _ if args.checkpoint.is_none() => {
            return Err(CliError::usage(
                "--checkpoint is required unless --ablate no-ranking",
            ));
        }
        _ => {}
    }
    if args.part.is_some() && args.split.is_none() {
        return Err(CliError::usage("--part needs --split"));
    }

    let lexicons = load_lexicons(&args.data.lexicons)?;
    let registry = load_registry(&args.data.tables)?;
    let triples = data_validation(load_triples(&args.triples, &registry))?;
    let set: Vec<QueryTriple> = match &args.split {
        Some(path) => {
            let file = data_validation(load_split_file(path))?;
            let split = data_validation(apply_split_file(&triples, &file))?;
            match args.part.unwrap_or(Part::Test) {
                Part::Train => split.train,
                Part::Dev => split.dev,
                Part::Test => split.test,
            }
        }
        None => triples,
    };
    if set.is_empty() {
        return Err(CliError::usage("selected evaluation set is empty"));
    }

    let mut options = args.analysis.options();
    if args.ablate == Some(Ablation::NoIntent) {
        options.intent_mode = IntentMode::ForceRefine;
    }
    let model = args.checkpoint.as_deref().map(Model::load).transpose()?;

    match (&args.checkpoint, args.ablate) {
        (Some(path), Some(Ablation::NoIntent)) => {
            println!("chooser: model {} (ablation: no-intent)", path.display());
        }
        (Some(path), _) => println!("chooser: model {}", path.display()),
        (None, _) => {
            println!("chooser: uniform random (ablation: no-ranking)");
            println!("seed: {}", args.seed);
        }
    }
    println!("examples: {}", set.len());

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs.unwrap_or(0))
        .build()?;
    let outputs: Result<Vec<String>, anyhow::Error> = pool.install(|| {
        set.par_iter()
            .enumerate()
            .map(|(i, triple)| {
                let table = registry.get(&triple.table_id)?;
                let chooser = match model.as_ref() {
                    Some(m) => Chooser::Learned(m),
                    None => Chooser::Uniform {
                        seed: args.seed,
                        example_index: i,
                    },
                };
                let prediction = predict(
                    &triple.precedent,
                    &triple.followup,
                    table,
                    &lexicons,
                    &options,
                    &chooser,
                )?;
                Ok(prediction.output)
            })
            .collect()
    });
    let outputs = outputs.map_err(CliError::Failure)?;
    let golds: Vec<String> = set.iter().map(|t| t.fused.clone()).collect();
    let tables: Vec<&Table> = set
        .iter()
        .map(|t| registry.get(&t.table_id))
        .collect::<Result<_, _>>()?;
    let report = evaluate(&outputs, &golds, &tables, &lexicons)?;

    if args.verbose {
        for (i, example) in report.examples.iter().enumerate() {
            let mark = if example.consistent { "ok  " } else { "MISS" };
            println!("[{i:>3}] {mark} {} || gold: {}", example.output, example.gold);
        }
    }
    println!("symbol accuracy: {:.2}%", report.symbol_accuracy);
    println!("bleu: {:.2}", report.bleu);
    if let Some(path) = &args.report {
        write_json(path, &report)?;
        println!("report written to {}", path.display());
    }
    Ok(())
}

/// Print an error and return the exit code its class maps to.
pub fn print_cli_error(err: &CliError) -> i32 {
    match err {
        CliError::Usage(msg) => {
            eprintln!("error: {msg}");
            2
        }
        CliError::Failure(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}
