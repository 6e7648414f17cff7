//! Command-line front end shared by the `warc2meta` binary and tests.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use super::{
    cmd_cost, cmd_evaluate, cmd_generate, cmd_ingest, cmd_select, cmd_stats, CostRow, PipelineConfig, StatsRequest,
    StatsTest,
};
use crate::error::PipelineError;
use crate::heuristics::HeuristicId;
use crate::llm::{PromptVariant, Source};
use crate::stats::{McNemarOptions, DEFAULT_ALPHA};

#[derive(Debug, Parser)]
#[command(name = "warc2meta", version, about = "Catalogue titles and abstracts from web-archive WARC files")]
pub struct Cli {
    /// TOML configuration file
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory (overrides the config)
    #[arg(long, global = true, value_name = "DIR")]
    pub output: Option<PathBuf>,
    /// Worker threads for ingest (overrides the config)
    #[arg(long, global = true, value_name = "N")]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PromptArg {
    Rules,
    Norules,
}

impl From<PromptArg> for PromptVariant {
    fn from(p: PromptArg) -> Self {
        match p {
            PromptArg::Rules => PromptVariant::Rules,
            PromptArg::Norules => PromptVariant::NoRules,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TestArg {
    Cochran,
    Mcnemar,
}

fn parse_heuristic(s: &str) -> Result<HeuristicId, String> {
    s.parse::<u8>()
        .ok()
        .and_then(|n| HeuristicId::try_from(n).ok())
        .ok_or_else(|| format!("heuristic must be 1, 2 or 3, got {s:?}"))
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse WARC files into sites.jsonl
    Ingest {
        /// Directory of *.warc / *.warc.gz files (overrides the config)
        #[arg(long, value_name = "DIR")]
        input: Option<PathBuf>,
    },
    /// Choose one page per site and write the cost report
    Select {
        #[arg(long, value_parser = parse_heuristic)]
        heuristic: Option<HeuristicId>,
        /// Run all three heuristics
        #[arg(long, conflicts_with = "heuristic")]
        all: bool,
    },
    /// Generate titles and abstracts through the chat endpoint
    Generate {
        #[arg(long, value_parser = parse_heuristic)]
        heuristic: Option<HeuristicId>,
        #[arg(long, value_enum)]
        prompt: Option<PromptArg>,
        /// Sweep all six prompt × heuristic combinations
        #[arg(long, conflicts_with_all = ["heuristic", "prompt"])]
        all_combinations: bool,
    },
    /// Score generated metadata against references and rank combinations
    Evaluate {
        /// Reference titles/abstracts (JSONL or CSV; overrides the config)
        #[arg(long, value_name = "PATH")]
        reference: Option<PathBuf>,
    },
    /// Significance tests over a pass/fail grading sheet
    Stats {
        /// CSV with columns item_id,source,grader_id,verdict
        grading_csv: PathBuf,
        #[arg(long, value_enum, default_value = "cochran")]
        test: TestArg,
        #[arg(long, value_name = "LABEL")]
        a: Option<String>,
        #[arg(long, value_name = "LABEL")]
        b: Option<String>,
        /// McNemar continuity correction
        #[arg(long)]
        correction: bool,
        /// Exact binomial p-value for fewer than 25 discordant pairs
        #[arg(long)]
        exact: bool,
        #[arg(long, default_value_t = DEFAULT_ALPHA)]
        alpha: f64,
    },
    /// Recompute the token and cost report from existing stores
    Cost,
}

impl Cli {
    pub fn pipeline_config(&self) -> Result<PipelineConfig, PipelineError> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        if let Some(dir) = &self.output {
            cfg.output_dir = dir.clone();
        }
        if let Some(n) = self.workers {
            cfg.worker_count = n;
        }
        if let Command::Ingest { input: Some(dir) } = &self.command {
            cfg.input_dir = dir.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn write_cost_table(out: &mut dyn Write, rows: &[CostRow]) -> std::io::Result<()> {
    writeln!(out, "heuristic  sites  tokens_before  tokens_after  reduction  cost_before  cost_after")?;
    for r in rows {
        writeln!(
            out,
            "{:>9}  {:>5}  {:>13}  {:>12}  {:>8.4}%  {:>11}  {:>10}{}",
            r.heuristic,
            r.sites,
            r.tokens_before,
            r.tokens_after,
            100.0 * r.reduction_ratio,
            r.cost_before,
            r.cost_after,
            if r.approximate { "  (estimated)" } else { "" }
        )?;
    }
    Ok(())
}

/// Runs one parsed command, writing human-readable output to `out`.
pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<(), PipelineError> {
    if let Command::Stats { grading_csv, test, a, b, correction, exact, alpha } = &cli.command {
        let request = StatsRequest {
            test: match test {
                TestArg::Cochran => StatsTest::Cochran,
                TestArg::Mcnemar => StatsTest::McNemar,
            },
            a: a.clone(),
            b: b.clone(),
            options: McNemarOptions { correction: *correction, exact: *exact },
            alpha: *alpha,
        };
        let result = cmd_stats(grading_csv, &request)?;
        writeln!(out, "{}", serde_json::to_string(&result).expect("result serializes"))?;
        writeln!(out, "{}", result.summary())?;
        return Ok(());
    }

    let cfg = cli.pipeline_config()?;
    match &cli.command {
        Command::Ingest { .. } => {
            let c = cmd_ingest(&cfg)?;
            writeln!(
                out,
                "ingested {}/{} files: {} pages kept, {} rejected, {} duplicates, {} files failed",
                c.files_ingested, c.files_found, c.pages_kept, c.pages_rejected, c.pages_duplicate, c.files_failed
            )?;
        }
        Command::Select { heuristic, all } => {
            let heuristics = if *all { HeuristicId::ALL.to_vec() } else { vec![heuristic.unwrap_or(cfg.heuristic)] };
            let rows = cmd_select(&cfg, &heuristics)?;
            write_cost_table(out, &rows)?;
        }
        Command::Generate { heuristic, prompt, all_combinations } => {
            let combos: Vec<Source> = if *all_combinations {
                Source::combinations().collect()
            } else {
                vec![Source::Combo(prompt.map(Into::into).unwrap_or(cfg.prompt_variant), heuristic.unwrap_or(cfg.heuristic))]
            };
            for (source, c) in cmd_generate(&cfg, &combos)? {
                writeln!(
                    out,
                    "{source}: {} generated, {} errors, {} resumed from checkpoint, {} truncated to the token cap",
                    c.rows_generated, c.errors, c.resumed, c.truncated
                )?;
            }
        }
        Command::Evaluate { reference } => {
            let e = cmd_evaluate(&cfg, reference.as_deref())?;
            writeln!(out, "prompt         heuristic  combination  score  lev_median  bs_median  bs_std")?;
            for r in &e.ranked {
                writeln!(
                    out,
                    "{:<13}  {:>9}  {:>11}  {:>5}  {:>10.2}  {:>9.4}  {:>6.4}",
                    r.stats.prompt.label(),
                    r.stats.heuristic.code(),
                    r.stats.combination_id,
                    r.final_score,
                    r.stats.lev_median,
                    r.stats.bs_median,
                    r.stats.bs_std
                )?;
            }
            let labels: Vec<String> = e.shortlisted.iter().map(ToString::to_string).collect();
            writeln!(out, "shortlisted for manual review: {}", labels.join(", "))?;
        }
        Command::Cost => {
            let rows = cmd_cost(&cfg)?;
            write_cost_table(out, &rows)?;
        }
        Command::Stats { .. } => unreachable!("handled above"),
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_from<I, T>(args: I, out: &mut dyn Write) -> Result<(), PipelineError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| PipelineError::Config(e.to_string()))?;
    execute(&cli, out)
}
