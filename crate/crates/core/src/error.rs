use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum WarcError {
    #[error("malformed WARC header: {0}")]
    MalformedHeader(String),
    #[error("truncated record at offset {offset}: declared {declared} bytes, read {read}")]
    TruncatedRecord { offset: u64, declared: u64, read: u64 },
    #[error("gzip stream error: {0}")]
    Gzip(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid URL {url:?}: {reason}")]
pub struct InvalidUrl {
    pub url: String,
    pub reason: String,
}

#[derive(Debug, Error)]
pub enum HeuristicError {
    #[error("site has no pages")]
    EmptySite,
    #[error("invalid filter pattern in rule {name:?}: {source}")]
    InvalidPattern {
        name: String,
        #[source]
        source: regex::Error,
    },
    #[error("filter rule file line {line}: {reason}")]
    RuleSyntax { line: usize, reason: String },
    #[error("unknown heuristic code {0}")]
    UnknownHeuristic(u8),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Error)]
pub enum VocabularyLoadError {
    #[error("rank file line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("duplicate rank {0}")]
    DuplicateRank(u32),
    #[error("duplicate token on line {0}")]
    DuplicateToken(usize),
    #[error("vocabulary lacks single-byte token 0x{0:02x}")]
    MissingByte(u8),
    #[error("bad split pattern: {0}")]
    Pattern(#[from] regex::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("empty content")]
    EmptyContent,
    #[error("API error {status}: {body}")]
    Api { status: u16, body: String },
    #[error("rate limited after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("reply did not match the {{title, abstract}} schema after {attempts} attempts: {last_error}")]
    SchemaViolation { attempts: u32, last_error: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("invalid client config: {0}")]
    Config(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("text produced no tokens")]
    EmptyText,
    #[error("generated and reference sets share no site ids")]
    NoOverlap,
    #[error("ranking needs at least two combinations, got {0}")]
    InsufficientCombinations(usize),
    #[error("generated rows mix sources ({0} and {1})")]
    MixedSources(String, String),
    #[error("generated rows are not a prompt × heuristic combination")]
    NotACombination,
    #[error("embedding provider: {0}")]
    Provider(String),
}

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("malformed grading CSV: {0}")]
    MalformedCsv(String),
    #[error("unknown verdict {verdict:?} on line {line}")]
    UnknownVerdict { verdict: String, line: u64 },
    #[error("no complete items remain after filtering")]
    EmptyAfterFiltering,
    #[error("every row is constant; statistic undefined")]
    DegenerateMatrix,
    #[error("no discordant pairs between the two treatments")]
    NoDiscordantPairs,
    #[error("treatment {0:?} not present")]
    UnknownTreatment(String),
    #[error("test needs at least {needed} treatments, matrix has {found}")]
    TooFewTreatments { needed: usize, found: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("no WARC files under {0}")]
    NoInput(PathBuf),
    #[error("config: {0}")]
    Config(String),
    #[error("every input file failed ({0} files)")]
    AllFilesFailed(usize),
    #[error("{path}: {message}")]
    Store { path: PathBuf, message: String },
    #[error(transparent)]
    Warc(#[from] WarcError),
    #[error(transparent)]
    Heuristic(#[from] HeuristicError),
    #[error(transparent)]
    Vocabulary(#[from] VocabularyLoadError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl PipelineError {
    pub(crate) fn store(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        PipelineError::Store { path: path.into(), message: message.to_string() }
    }
}
