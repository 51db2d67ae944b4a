use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use framescout::datasetops::{MergeOrder, Split};
use framescout::identifier::{PromptMode, ValidationPolicy};
use framescout::lcq2f::MatchMode;
use framescout::lexicon::RepresentationVariant;

use crate::output::Format;

#[derive(Debug, Parser)]
#[command(name = "framescout", version, about = "Target-free frame detection toolkit")]
pub struct Cli {
    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Upper bound on concurrent provider calls [default: 4].
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    /// Seed of the fallback embedder [default: 3407].
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// `fallback`, `fallback:<dim>`, `http` or a provider file [default: fallback].
    #[arg(long, global = true, visible_alias = "provider")]
    pub embedder: Option<String>,

    /// Report layout on stdout [default: records].
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    /// More log output on stderr (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Frame lexicon checks.
    #[command(subcommand)]
    Lexicon(LexiconCmd),
    /// Embed one text per line.
    Embed(EmbedArgs),
    /// Build or query a frame vector index.
    #[command(subcommand)]
    Index(IndexCmd),
    /// Retrieve candidate frames for a sentence, or evaluate retrieval.
    Retrieve(RetrieveArgs),
    /// Identify the frames a sentence evokes.
    Identify(IdentifyArgs),
    /// Group, describe and merge annotated datasets.
    #[command(subcommand)]
    Dataset(DatasetCmd),
    /// Score predictions.
    #[command(subcommand)]
    Eval(EvalCmd),
    /// Build frame-augmented question datasets.
    #[command(subcommand)]
    Lcq2f(Lcq2fCmd),
}

#[derive(Debug, Subcommand)]
pub enum LexiconCmd {
    /// Report frames with empty descriptions or empty LU/FE lists.
    Validate { path: PathBuf },
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    /// Text file, one input per line.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum IndexCmd {
    Build {
        #[arg(long)]
        lexicon: PathBuf,
        #[arg(long, default_value = "rep3")]
        variant: RepresentationVariant,
        #[arg(long)]
        out: PathBuf,
    },
    Search {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        query: String,
        #[arg(short, long, default_value_t = 24)]
        k: usize,
    },
}

#[derive(Debug, Args)]
#[command(args_conflicts_with_subcommands = true)]
pub struct RetrieveArgs {
    #[command(subcommand)]
    pub eval: Option<RetrieveCmd>,
    #[arg(long)]
    pub index: Option<PathBuf>,
    #[arg(long)]
    pub sentence: Option<String>,
    #[arg(short, long, default_value_t = 24)]
    pub k: usize,
}

#[derive(Debug, Subcommand)]
pub enum RetrieveCmd {
    /// Micro precision/recall of the candidates against gold frame sets.
    Eval {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        index: PathBuf,
        /// One or more cutoffs, comma-separated.
        #[arg(short, long, value_delimiter = ',', default_value = "24")]
        k: Vec<usize>,
        /// Report file (JSON).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Ranked candidates per sentence, for `eval recall-at-k`.
        #[arg(long)]
        candidates_out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct IdentifyArgs {
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long)]
    pub lexicon: PathBuf,
    /// `mock:<policy>`, `http` or a provider file.
    #[arg(long)]
    pub chat: Option<String>,
    /// Single sentence to identify.
    #[arg(long, conflicts_with = "out")]
    pub sentence: Option<String>,
    /// Grouped dataset: sentences to identify and gold frames for mocks.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Predictions file (JSONL), one record per dataset sentence.
    #[arg(long, requires = "dataset")]
    pub out: Option<PathBuf>,
    #[arg(short, long, default_value_t = 24)]
    pub k: usize,
    #[arg(long)]
    pub mode: Option<PromptMode>,
    /// Tell the model how many frames the sentence evokes.
    #[arg(long, conflicts_with = "with_gold_count")]
    pub gold_count: Option<usize>,
    /// Use each dataset sentence's gold frame count.
    #[arg(long, requires = "dataset")]
    pub with_gold_count: bool,
    /// Grouped file whose first `--demo-count` examples become few-shot demonstrations.
    #[arg(long)]
    pub demos: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    pub demo_count: usize,
    /// Prompt token budget; 0 disables the check.
    #[arg(long)]
    pub token_budget: Option<usize>,
    #[arg(long, default_value = "open")]
    pub policy: ValidationPolicy,
    /// Chat exchange log (JSONL) [default: beside --out].
    #[arg(long)]
    pub audit: Option<PathBuf>,
    /// Print the prompt for `--sentence` instead of calling the provider.
    #[arg(long, requires = "sentence")]
    pub prompt_only: bool,
    /// Print the frame-element labelling prompt for this frame and `--sentence`.
    #[arg(long, requires = "sentence")]
    pub fsrl: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum DatasetCmd {
    /// Target-annotated instances to one record per sentence.
    Group {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "train")]
        split: Split,
    },
    Stats {
        #[arg(long = "in")]
        input: PathBuf,
    },
    Merge {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        exemplars: PathBuf,
        #[arg(long, default_value = "exemplars_first")]
        order: MergeOrder,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum EvalCmd {
    /// Micro P/R and accuracies of predicted frame sets.
    Detect {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recall of ranked predictions truncated at each k.
    RecallAtK {
        #[arg(long)]
        ranked: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        #[arg(short, long, value_delimiter = ',', default_value = "1,3,5")]
        k: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Corpus BLEU-4 of SPARQL queries, one per line.
    Bleu {
        #[arg(long)]
        hyp: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Frame evaluations per sentence with and without candidate filtering.
    Complexity {
        #[arg(long)]
        tokens: u64,
        #[arg(long)]
        lexicon_size: u64,
        #[arg(long)]
        candidates: Option<u64>,
    },
}

#[derive(Debug, Subcommand)]
pub enum Lcq2fCmd {
    Build {
        #[arg(long)]
        questions: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        /// Attach frame descriptions and frame elements.
        #[arg(long, requires = "lexicon")]
        plus: bool,
        #[arg(long)]
        lexicon: Option<PathBuf>,
        /// Also emit raw + reformulated doubled splits.
        #[arg(long)]
        combined: bool,
        #[arg(long = "match", default_value = "exact")]
        match_mode: MatchMode,
        #[arg(long)]
        out: PathBuf,
    },
}
