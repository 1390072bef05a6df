use biaslens_core::debias::DebiasMode;
use biaslens_core::disco::{Aggregation, DEFAULT_CANDIDATE_POOL, DEFAULT_K};
use biaslens_core::Language;
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "biaslens", version, about = "Gender bias evaluation and CDA data tooling for masked language models")]
pub struct Cli {
    /// Directory that receives every output file.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Multilingual DisCo over templates and name pairs.
    EvalDisco(EvalDiscoArgs),
    /// Pairwise likelihood comparison of male vs. female sentences.
    EvalMbe(EvalMbeArgs),
    /// Filter a corpus and write gender-swapped counterfactuals.
    GenCda(GenCdaArgs),
    /// Pair male and female names by minimum edit distance.
    PairNames(PairNamesArgs),
    /// Write a fine-tuning manifest for one CDA setup.
    ComposeManifest(ComposeManifestArgs),
    /// Turn a translation work order and its responses into per-language datasets.
    MergeTranslations(MergeTranslationsArgs),
    /// Check a model server against the wire protocol.
    Conformance(ConformanceArgs),
}

#[derive(Debug, Clone, Args)]
pub struct EndpointArgs {
    /// `http(s)://host:port` of a model server, or `mock:<table.json>`.
    #[arg(long, env = "BIASLENS_ENDPOINT")]
    pub endpoint: String,

    /// Per-request timeout in seconds.
    #[arg(long = "timeout-s", env = "BIASLENS_TIMEOUT_S", default_value_t = 30.0)]
    pub timeout_s: f64,

    /// Extra attempts after a transport error, timeout, 500 or 503.
    #[arg(long, default_value_t = 2)]
    pub retries: u32,
}

#[derive(Debug, Args)]
pub struct EvalDiscoArgs {
    /// JSON Lines templates: {"id", "lang", "male", "female"}.
    #[arg(long)]
    pub templates: PathBuf,

    /// CSV name pairs: lang,male,female.
    #[arg(long)]
    pub names: PathBuf,

    #[command(flatten)]
    pub endpoint: EndpointArgs,

    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: usize,

    #[arg(long, default_value = "none", value_parser = parse_mode)]
    pub debias: DebiasMode,

    /// CSV lang,prompt_text. Required for sd-l; sd-en falls back to the built-in English prompt.
    #[arg(long)]
    pub prompts: Option<PathBuf>,

    /// Languages to evaluate (repeatable). Defaults to every language in the template file.
    #[arg(long = "lang", value_parser = parse_lang)]
    pub langs: Vec<Language>,

    #[arg(long, default_value_t = 0)]
    pub min_count: u64,

    #[arg(long, default_value = "per-template", value_parser = parse_aggregation)]
    pub aggregation: Aggregation,

    /// Plain predictions reranked by self-debiasing.
    #[arg(long, default_value_t = DEFAULT_CANDIDATE_POOL)]
    pub candidate_pool: usize,

    /// Row label in the result table; defaults to OOB, SD-en or SD-l.
    #[arg(long)]
    pub method: Option<String>,

    /// Languages-used label in the result table, e.g. `{hi,en}`.
    #[arg(long, default_value = "-")]
    pub languages_used: String,
}

#[derive(Debug, Args)]
pub struct EvalMbeArgs {
    /// JSON Lines corpus: {"text", "gender", "lang"}.
    #[arg(long)]
    pub corpus: PathBuf,

    #[command(flatten)]
    pub endpoint: EndpointArgs,

    #[arg(long, default_value = "OOB")]
    pub method: String,

    #[arg(long, default_value = "-")]
    pub languages_used: String,
}

#[derive(Debug, Args)]
pub struct GenCdaArgs {
    /// Plain text, one sentence per line.
    #[arg(long)]
    pub corpus: PathBuf,

    /// CSV male_form,female_form.
    #[arg(long)]
    pub terms: PathBuf,

    /// CSV lang,male,female; pairs in the corpus language join the swap map.
    #[arg(long)]
    pub names: Option<PathBuf>,

    /// Ignore --names when building the swap map.
    #[arg(long)]
    pub no_name_swaps: bool,

    /// One keyword per line; `#` lines describe the list.
    #[arg(long)]
    pub keywords: Option<PathBuf>,

    /// Sentences kept by the keyword filter.
    #[arg(long, default_value_t = biaslens_core::cda::DEFAULT_TARGET)]
    pub target: usize,

    #[arg(long, default_value = "en", value_parser = parse_lang)]
    pub lang: Language,

    /// Emit a translation work order for these languages (comma separated).
    #[arg(long, value_delimiter = ',', value_parser = parse_lang)]
    pub translate_to: Vec<Language>,
}

#[derive(Debug, Args)]
pub struct PairNamesArgs {
    /// One name per line.
    #[arg(long)]
    pub male: PathBuf,

    /// One name per line.
    #[arg(long)]
    pub female: PathBuf,

    /// Language tag written to the output CSV.
    #[arg(long, default_value = "en", value_parser = parse_lang)]
    pub lang: Language,
}

#[derive(Debug, Args)]
pub struct ComposeManifestArgs {
    /// CDA-{en}, CDA-{l}, CDA-{l,en} or CDA-L\{en} (short forms en, l, l,en, non-en).
    #[arg(long)]
    pub setup: String,

    #[arg(long, value_parser = parse_lang)]
    pub lang: Option<Language>,

    /// JSON object mapping language code to dataset path.
    #[arg(long)]
    pub catalog: PathBuf,
}

#[derive(Debug, Args)]
pub struct MergeTranslationsArgs {
    /// Work order written by gen-cda.
    #[arg(long)]
    pub order: PathBuf,

    /// Translator output: one {"id", "text", "target_lang"} per line.
    #[arg(long)]
    pub responses: PathBuf,

    /// English CDA corpus to list in the catalog alongside the translations.
    #[arg(long)]
    pub english: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ConformanceArgs {
    #[command(flatten)]
    pub endpoint: EndpointArgs,
}

fn parse_lang(s: &str) -> Result<Language, String> {
    s.parse().map_err(|e: biaslens_core::lang::UnknownLanguage| e.to_string())
}

fn parse_mode(s: &str) -> Result<DebiasMode, String> {
    s.parse().map_err(|e: biaslens_core::debias::DebiasError| e.to_string())
}

fn parse_aggregation(s: &str) -> Result<Aggregation, String> {
    match s {
        "per-template" => Ok(Aggregation::PerTemplate),
        "pooled" => Ok(Aggregation::Pooled),
        other => Err(format!("unknown aggregation `{other}` (per-template or pooled)")),
    }
}
