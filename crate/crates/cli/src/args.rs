//! Command-line argument definitions.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use followup_core::anonymize::QueryRole;
use followup_core::pipeline::AnalysisOptions;
use followup_core::segment::IntentMode;
use followup_core::synth::DEFAULT_TRIPLE_COUNT;

#[derive(Parser)]
#[command(
    name = "followup",
    version,
    about = "Turn elliptical follow-up database queries into self-contained ones",
    long_about = "Analyzes a precedent query and an elliptical follow-up over a known table: \
                  symbols are anonymized, candidate segmentations enumerated, a learned model \
                  ranks them, and rule-based fusion produces a self-contained query."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Train the candidate ranker with weak supervision from fused queries.
    Train(TrainArgs),
    /// Evaluate predictions: symbol accuracy and BLEU over a triple file.
    Eval(EvalArgs),
    /// Fuse one precedent/follow-up pair into a self-contained query.
    Fuse(FuseArgs),
    /// Dump every candidate reading of one precedent/follow-up pair.
    Candidates(CandidatesArgs),
    /// Show the symbol interpretations of a single query.
    Inspect(InspectArgs),
    /// Generate the built-in synthetic corpus.
    Synth(SynthArgs),
}

/// Flags shared by every command that reads tables.
#[derive(Args)]
pub struct DataArgs {
    /// Directory of table JSON files.
    #[arg(long, value_name = "DIR")]
    pub tables: PathBuf,
    /// Lexicon overrides, JSON object of {"kind": ["word", ...]}.
    #[arg(long, value_name = "FILE")]
    pub lexicons: Option<PathBuf>,
}

/// Candidate enumeration knobs shared by analysis commands.
#[derive(Args)]
pub struct AnalysisArgs {
    /// Max word gap between spans grouped into one segment.
    #[arg(long)]
    pub window: Option<usize>,
    /// Max anonymization interpretations per query.
    #[arg(long)]
    pub ambiguity_cap: Option<usize>,
    /// Max segment covers per interpretation pair.
    #[arg(long)]
    pub candidate_cap: Option<usize>,
    /// Drop the append intent: every candidate becomes a refinement.
    #[arg(long)]
    pub no_intent: bool,
}

impl AnalysisArgs {
    pub fn options(&self) -> AnalysisOptions {
        let mut options = AnalysisOptions::default();
        if let Some(w) = self.window {
            options.window = w;
        }
        if let Some(a) = self.ambiguity_cap {
            options.ambiguity_cap = a;
        }
        if let Some(c) = self.candidate_cap {
            options.candidate_cap = c;
        }
        if self.no_intent {
            options.intent_mode = IntentMode::ForceRefine;
        }
        options
    }
}

#[derive(Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Triple corpus, one JSON object per line.
    #[arg(long, value_name = "FILE")]
    pub triples: PathBuf,
    /// Predefined split file with train/dev/test index lists.
    #[arg(long, value_name = "FILE", conflicts_with = "split_sizes")]
    pub split: Option<PathBuf>,
    /// Generate a seeded split with these sizes, e.g. "40,5,5".
    #[arg(long, value_name = "T,D,E")]
    pub split_sizes: Option<String>,
    /// Write the generated split file for reuse (with --split-sizes).
    #[arg(long, value_name = "FILE", requires = "split_sizes")]
    pub save_split: Option<PathBuf>,
    /// Seed for parameter init, shuffling, and split generation.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Margin the best positive candidate must clear.
    #[arg(long)]
    pub margin: Option<f64>,
    /// Adam learning rate.
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Global L2 gradient clip.
    #[arg(long)]
    pub clip_norm: Option<f64>,
    /// Word embedding dimension.
    #[arg(long)]
    pub embed_dim: Option<usize>,
    /// Encoder hidden dimension per direction.
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    /// Keep corpus order instead of shuffling each epoch.
    #[arg(long)]
    pub no_shuffle: bool,
    #[command(flatten)]
    pub analysis: AnalysisArgs,
    /// Annotated tag sequences (JSONL) for a supervised warm start.
    #[arg(long, value_name = "FILE")]
    pub pretrain_annotations: Option<PathBuf>,
    /// Passes over the warm-start annotations.
    #[arg(long)]
    pub pretrain_epochs: Option<usize>,
    /// Word-vector file overriding embedding rows at init.
    #[arg(long, value_name = "FILE")]
    pub pretrained_vectors: Option<PathBuf>,
    /// JSON config file; its fields override the flags above.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Where to write the trained model.
    #[arg(long, value_name = "FILE")]
    pub checkpoint: Option<PathBuf>,
    /// Where to write the JSON training report.
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Part {
    Train,
    Dev,
    Test,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Ablation {
    /// Force every candidate to the refine intent.
    NoIntent,
    /// Replace the learned ranker with a seeded uniform choice.
    NoRanking,
}

#[derive(Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Triple corpus, one JSON object per line.
    #[arg(long, value_name = "FILE")]
    pub triples: PathBuf,
    /// Split file; evaluation uses one of its parts.
    #[arg(long, value_name = "FILE")]
    pub split: Option<PathBuf>,
    /// Which split part to evaluate (default: test).
    #[arg(long, value_enum)]
    pub part: Option<Part>,
    /// Trained model checkpoint.
    #[arg(long, value_name = "FILE")]
    pub checkpoint: Option<PathBuf>,
    /// Ablation to apply.
    #[arg(long, value_enum)]
    pub ablate: Option<Ablation>,
    /// Seed for the uniform chooser of the no-ranking ablation.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    #[command(flatten)]
    pub analysis: AnalysisArgs,
    /// Where to write the JSON evaluation report.
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,
    /// Print one line per example.
    #[arg(long)]
    pub verbose: bool,
}

#[derive(Args)]
pub struct FuseArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Table id both queries run against.
    #[arg(long)]
    pub table: String,
    #[arg(long)]
    pub precedent: String,
    #[arg(long)]
    pub followup: String,
    /// Trained checkpoint; without one a seeded random chooser picks.
    #[arg(long, value_name = "FILE")]
    pub checkpoint: Option<PathBuf>,
    /// Seed for the random chooser when no checkpoint is given.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    pub analysis: AnalysisArgs,
    /// Emit one machine-readable JSON object instead of text.
    #[arg(long)]
    pub json: bool,
    /// Also print the chosen reading: tags, intent, conflicts.
    #[arg(long)]
    pub verbose: bool,
}

#[derive(Args)]
pub struct CandidatesArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Table id both queries run against.
    #[arg(long)]
    pub table: String,
    #[arg(long)]
    pub precedent: String,
    #[arg(long)]
    pub followup: String,
    /// Score candidates with this checkpoint.
    #[arg(long, value_name = "FILE")]
    pub checkpoint: Option<PathBuf>,
    /// Max candidates printed per pair (0 = all).
    #[arg(long, default_value_t = 0)]
    pub limit: usize,
    #[command(flatten)]
    pub analysis: AnalysisArgs,
    /// Emit one machine-readable JSON object instead of text.
    #[arg(long)]
    pub json: bool,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
pub enum Role {
    Precedent,
    Followup,
    Fused,
}

impl From<Role> for QueryRole {
    fn from(role: Role) -> QueryRole {
        match role {
            Role::Precedent => QueryRole::Precedent,
            Role::Followup => QueryRole::Followup,
            Role::Fused => QueryRole::Fused,
        }
    }
}

#[derive(Args)]
pub struct InspectArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Table id the query runs against.
    #[arg(long)]
    pub table: String,
    #[arg(long)]
    pub query: String,
    /// How the query is treated during anonymization.
    #[arg(long, value_enum, default_value_t = Role::Followup)]
    pub role: Role,
    /// Max anonymization interpretations.
    #[arg(long)]
    pub ambiguity_cap: Option<usize>,
    /// Emit one machine-readable JSON object instead of text.
    #[arg(long)]
    pub json: bool,
}

#[derive(Args)]
pub struct SynthArgs {
    /// Output directory; receives tables/ and triples.jsonl.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Number of triples to generate.
    #[arg(long, default_value_t = DEFAULT_TRIPLE_COUNT)]
    pub count: usize,
}
