//! Stage-by-stage orchestration over an output directory of JSONL/CSV files.
//!
//! ```text
//! ingest    input_dir/*.warc[.gz]      -> sites.jsonl
//! select    sites.jsonl                -> selections_h{1,2,3}.jsonl, cost.csv
//! generate  selections_h{h}.jsonl      -> generated_combo{n}.jsonl (+ checkpoints/)
//! evaluate  generated_combo*.jsonl     -> scores.csv, summary.csv
//! ```

pub mod cli;
mod config;
mod manifest;

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub use config::{EmbeddingConfig, EmbeddingKind, PipelineConfig};
pub use manifest::{EvaluateCounts, GenerateCounts, IngestCounts, RunManifest, SelectCounts, MANIFEST_FILE};

use crate::error::{EvalError, PipelineError};
use crate::eval::{
    rank_combinations, score_combination_detailed, shortlist, EmbeddingProvider, HashEmbedder, HttpEmbedder,
    RankedCombination,
};
use crate::heuristics::{HeuristicId, Selection};
use crate::ingest::{discover_warc_files, ingest_files, site_id_for, SiteDocument};
use crate::llm::{run_batch, BatchRow, Checkpoint, GeneratedMetadata, MetadataGenerator, Source};
use crate::stats::{cochran_q, ingest_grading, mcnemar, McNemarOptions, TestResult};
use crate::tokens::{reduction_report, Amount};

pub const SITES_FILE: &str = "sites.jsonl";
pub const COST_FILE: &str = "cost.csv";
pub const SCORES_FILE: &str = "scores.csv";
pub const SUMMARY_FILE: &str = "summary.csv";

pub fn selections_file(heuristic: HeuristicId) -> String {
    format!("selections_h{}.jsonl", heuristic.code())
}

pub fn generated_file(source: Source) -> String {
    format!("generated_{}.jsonl", source.to_string().to_lowercase())
}

pub fn checkpoint_file(source: Source) -> PathBuf {
    Path::new("checkpoints").join(generated_file(source))
}

/// One line of `sites.jsonl`: a site document, or why its file failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteRow {
    pub source_file: PathBuf,
    pub site_id: String,
    pub page_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub document: Option<SiteDocument>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// One line of `selections_h{h}.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRow {
    pub site_id: String,
    pub heuristic: HeuristicId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection: Option<Selection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// One row of `cost.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostRow {
    pub heuristic: u8,
    pub sites: usize,
    pub tokens_before: u64,
    pub tokens_after: u64,
    pub reduction_ratio: f64,
    pub cost_before: Amount,
    pub cost_after: Amount,
    pub price_per_million_input: Amount,
    pub price_per_million_output: Amount,
    pub approximate: bool,
    pub degenerate: bool,
}

/// One row of `scores.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub site_id: String,
    pub combination_id: u8,
    pub title_lev: usize,
    pub title_bs_f1: f64,
    pub abstract_bs_f1: f64,
}

/// One row of `summary.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub prompt: String,
    pub heuristic: u8,
    pub combination: u8,
    pub ranked_aggregated_score: usize,
    pub lev_median: f64,
    pub bs_median: f64,
    pub bs_std: f64,
    pub n: usize,
    pub rank_lev: usize,
    pub rank_bs: usize,
    pub rank_std: usize,
    pub rank_sum: usize,
    pub shortlisted: bool,
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, PipelineError> {
    let file = File::open(path).map_err(|e| PipelineError::store(path, e))?;
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| PipelineError::store(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        rows.push(serde_json::from_str(&line).map_err(|e| PipelineError::store(path, format!("line {}: {e}", i + 1)))?);
    }
    Ok(rows)
}

/// Writes through a temporary sibling and renames, so readers never see a
/// half-written store.
fn write_atomically(path: &Path, fill: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<(), PipelineError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension("tmp");
    let result = File::create(&tmp).and_then(|f| {
        let mut w = BufWriter::new(f);
        fill(&mut w)?;
        w.flush()
    });
    result.and_then(|_| std::fs::rename(&tmp, path)).map_err(|e| PipelineError::store(path, e))
}

pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), PipelineError> {
    write_atomically(path, |w| {
        for row in rows {
            serde_json::to_writer(&mut *w, row)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    })
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), PipelineError> {
    write_atomically(path, |w| {
        let mut csv = csv::Writer::from_writer(w);
        for row in rows {
            csv.serialize(row)?;
        }
        csv.flush()
    })
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, PipelineError> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| PipelineError::store(path, e))?;
    rdr.deserialize().collect::<Result<Vec<T>, _>>().map_err(|e| PipelineError::store(path, e))
}

/// Walks `input_dir`, ingests every WARC file on `worker_count` threads and
/// writes `sites.jsonl` with one row per file.
pub fn cmd_ingest(cfg: &PipelineConfig) -> Result<IngestCounts, PipelineError> {
    let mut manifest = RunManifest::begin(&cfg.output_dir, "ingest", &cfg.digest());
    if !cfg.input_dir.is_dir() {
        return Err(PipelineError::NoInput(cfg.input_dir.clone()));
    }
    let files = discover_warc_files(&cfg.input_dir)?;
    if files.is_empty() {
        return Err(PipelineError::NoInput(cfg.input_dir.clone()));
    }
    let results = ingest_files(&files, &cfg.ingest_config(), cfg.worker_count);

    let mut counts = IngestCounts { files_found: files.len(), ..Default::default() };
    let rows: Vec<SiteRow> = files
        .iter()
        .zip(results)
        .map(|(path, result)| match result {
            Ok(doc) => {
                counts.files_ingested += 1;
                counts.pages_kept += doc.pages.len();
                counts.pages_rejected += doc.rejected_count;
                counts.pages_duplicate += doc.duplicate_count;
                counts.truncated_records += doc.diagnostics.truncated_records;
                SiteRow {
                    source_file: path.clone(),
                    site_id: doc.site_id.clone(),
                    page_count: doc.pages.len(),
                    document: Some(doc),
                    error: None,
                }
            }
            Err(e) => {
                log::error!("{}: {e}", path.display());
                counts.files_failed += 1;
                SiteRow { source_file: path.clone(), site_id: site_id_for(path), page_count: 0, document: None, error: Some(e.to_string()) }
            }
        })
        .collect();

    write_jsonl(&cfg.output_dir.join(SITES_FILE), &rows)?;
    manifest.ingest = Some(counts.clone());
    manifest.finish(&cfg.output_dir)?;
    if counts.files_ingested == 0 {
        return Err(PipelineError::AllFilesFailed(counts.files_failed));
    }
    Ok(counts)
}

fn load_sites(cfg: &PipelineConfig) -> Result<Vec<SiteRow>, PipelineError> {
    let path = cfg.output_dir.join(SITES_FILE);
    if !path.is_file() {
        return Err(PipelineError::store(path, "missing; run `ingest` first"));
    }
    read_jsonl(&path)
}

/// Runs each heuristic over every ingested site, writes one selections store
/// per heuristic and refreshes `cost.csv`.
pub fn cmd_select(cfg: &PipelineConfig, heuristics: &[HeuristicId]) -> Result<Vec<CostRow>, PipelineError> {
    let mut manifest = RunManifest::begin(&cfg.output_dir, "select", &cfg.digest());
    let sites = load_sites(cfg)?;
    let selector = cfg.selector()?;
    for &h in heuristics {
        let rows: Vec<SelectionRow> = sites
            .par_iter()
            .map(|site| {
                let outcome = match &site.document {
                    Some(doc) => selector.select(h, doc).map_err(|e| e.to_string()),
                    None => Err(format!("ingest failed: {}", site.error.as_deref().unwrap_or("unknown error"))),
                };
                match outcome {
                    Ok(sel) => SelectionRow { site_id: site.site_id.clone(), heuristic: h, selection: Some(sel), error: None },
                    Err(e) => SelectionRow { site_id: site.site_id.clone(), heuristic: h, selection: None, error: Some(e) },
                }
            })
            .collect();
        let selected = rows.iter().filter(|r| r.selection.is_some()).count();
        manifest.select.insert(
            h.code().to_string(),
            SelectCounts { sites: rows.len(), selected, errors: rows.len() - selected },
        );
        write_jsonl(&cfg.output_dir.join(selections_file(h)), &rows)?;
    }
    let cost = cost_rows(cfg, &sites)?;
    write_csv(&cfg.output_dir.join(COST_FILE), &cost)?;
    manifest.finish(&cfg.output_dir)?;
    Ok(cost)
}

fn cost_rows(cfg: &PipelineConfig, sites: &[SiteRow]) -> Result<Vec<CostRow>, PipelineError> {
    let counter = cfg.token_counter()?;
    let before: Vec<String> = sites
        .iter()
        .filter_map(|s| s.document.as_ref())
        .map(|d| d.pages.iter().map(|p| p.body_text.as_str()).collect::<Vec<_>>().join("\n"))
        .collect();
    let mut rows = Vec::new();
    for h in HeuristicId::ALL {
        let path = cfg.output_dir.join(selections_file(h));
        if !path.is_file() {
            continue;
        }
        let selections: Vec<SelectionRow> = read_jsonl(&path)?;
        let after: Vec<&str> = selections.iter().filter_map(|r| r.selection.as_ref()).map(|s| s.content.as_str()).collect();
        let r = reduction_report(&before, &after, &cfg.prices, &counter);
        rows.push(CostRow {
            heuristic: h.code(),
            sites: after.len(),
            tokens_before: r.tokens_before,
            tokens_after: r.tokens_after,
            reduction_ratio: r.reduction_ratio,
            cost_before: r.cost_before,
            cost_after: r.cost_after,
            price_per_million_input: r.price_per_million_input,
            price_per_million_output: r.price_per_million_output,
            approximate: r.approximate,
            degenerate: r.degenerate,
        });
    }
    Ok(rows)
}

/// Recomputes `cost.csv` from the stores already on disk.
pub fn cmd_cost(cfg: &PipelineConfig) -> Result<Vec<CostRow>, PipelineError> {
    let sites = load_sites(cfg)?;
    let rows = cost_rows(cfg, &sites)?;
    if rows.is_empty() {
        return Err(PipelineError::store(cfg.output_dir.join("selections_h*.jsonl"), "missing; run `select` first"));
    }
    write_csv(&cfg.output_dir.join(COST_FILE), &rows)?;
    Ok(rows)
}

/// Generates metadata for each requested combination. Reruns pick up from
/// the per-combination checkpoint.
pub fn cmd_generate(cfg: &PipelineConfig, combinations: &[Source]) -> Result<Vec<(Source, GenerateCounts)>, PipelineError> {
    let mut manifest = RunManifest::begin(&cfg.output_dir, "generate", &cfg.digest());
    let counter = cfg.token_counter()?;
    let mut summary = Vec::new();
    for &source in combinations {
        let Source::Combo(variant, heuristic) = source else {
            return Err(PipelineError::Config("generation needs a prompt × heuristic combination".into()));
        };
        let path = cfg.output_dir.join(selections_file(heuristic));
        if !path.is_file() {
            return Err(PipelineError::store(path, "missing; run `select` first"));
        }
        let mut truncated = 0;
        let selections: Vec<Selection> = read_jsonl::<SelectionRow>(&path)?
            .into_iter()
            .filter_map(|r| r.selection)
            .map(|mut s| {
                let capped = counter.truncate(&s.content, cfg.max_content_tokens);
                if capped.len() < s.content.len() {
                    truncated += 1;
                    s.content = capped.to_string();
                }
                s
            })
            .collect();

        let generator = MetadataGenerator::new(cfg.client.clone(), variant)?;
        let mut checkpoint = Checkpoint::open(&cfg.output_dir.join(checkpoint_file(source)))?;
        let resumed = selections.iter().filter(|s| checkpoint.get(&s.site_id, source).is_some()).count();
        let rows = run_batch(&selections, &generator, Some(&mut checkpoint));
        write_jsonl(&cfg.output_dir.join(generated_file(source)), &rows)?;

        let errors = rows.iter().filter(|r| !r.is_ok()).count();
        let counts = GenerateCounts {
            sites_selected: selections.len(),
            rows_generated: rows.len() - errors,
            errors,
            resumed,
            truncated,
        };
        manifest.generate.insert(source.to_string(), counts.clone());
        summary.push((source, counts));
    }
    manifest.finish(&cfg.output_dir)?;
    Ok(summary)
}

#[derive(Debug, Deserialize)]
struct ReferenceRow {
    site_id: String,
    title: String,
    #[serde(rename = "abstract")]
    abstract_text: String,
}

/// Human reference metadata from JSONL or CSV (`site_id,title,abstract`).
pub fn load_references(path: &Path) -> Result<Vec<GeneratedMetadata>, PipelineError> {
    if !path.is_file() {
        return Err(PipelineError::Config(format!("reference file {} not found", path.display())));
    }
    let rows: Vec<ReferenceRow> = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        read_csv(path)?
    } else {
        read_jsonl(path)?
    };
    Ok(rows
        .into_iter()
        .map(|r| GeneratedMetadata {
            site_id: r.site_id,
            source: Source::Human,
            title: r.title,
            abstract_text: r.abstract_text,
            model_name: None,
        })
        .collect())
}

pub fn embedding_provider(cfg: &EmbeddingConfig) -> Result<Box<dyn EmbeddingProvider>, PipelineError> {
    Ok(match cfg.provider {
        EmbeddingKind::Hash => Box::new(HashEmbedder::new(cfg.dimension)),
        EmbeddingKind::Http => Box::new(HttpEmbedder::new(cfg.client.clone())?),
    })
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub ranked: Vec<RankedCombination>,
    pub shortlisted: Vec<Source>,
    pub counts: EvaluateCounts,
}

/// Scores every generated combination on disk against the references and
/// ranks them.
pub fn cmd_evaluate(cfg: &PipelineConfig, reference: Option<&Path>) -> Result<Evaluation, PipelineError> {
    let mut manifest = RunManifest::begin(&cfg.output_dir, "evaluate", &cfg.digest());
    let reference = reference
        .or(cfg.reference_path.as_deref())
        .ok_or_else(|| PipelineError::Config("no reference file given (reference_path or --reference)".into()))?;
    let references = load_references(reference)?;
    let provider = embedding_provider(&cfg.embeddings)?;

    let mut stats = Vec::new();
    let mut scores = Vec::new();
    let mut counts = EvaluateCounts { references: references.len(), ..Default::default() };
    for source in Source::combinations() {
        let path = cfg.output_dir.join(generated_file(source));
        if !path.is_file() {
            continue;
        }
        let generated: Vec<GeneratedMetadata> =
            read_jsonl::<BatchRow>(&path)?.iter().filter_map(BatchRow::metadata).collect();
        if generated.is_empty() {
            log::warn!("{}: no successful rows; skipped", path.display());
            continue;
        }
        let scored = score_combination_detailed(&generated, &references, provider.as_ref())?;
        counts.scored_pairs += scored.pairs.len();
        counts.unmatched_generated += scored.unmatched_generated;
        counts.unmatched_reference += scored.unmatched_reference;
        scores.extend(scored.pairs.iter().map(|p| ScoreRow {
            site_id: p.site_id.clone(),
            combination_id: scored.stats.combination_id,
            title_lev: p.title_levenshtein,
            title_bs_f1: p.title_bertscore_f1,
            abstract_bs_f1: p.abstract_bertscore_f1,
        }));
        stats.push(scored.stats);
    }
    if stats.len() < 2 {
        return Err(EvalError::InsufficientCombinations(stats.len()).into());
    }
    let ranked = rank_combinations(&stats)?;
    let shortlisted: Vec<Source> = if cfg.shortlist == 0 {
        shortlist(&ranked).into_iter().map(|r| Source::Combo(r.stats.prompt, r.stats.heuristic)).collect()
    } else {
        ranked.iter().take(cfg.shortlist).map(|r| Source::Combo(r.stats.prompt, r.stats.heuristic)).collect()
    };

    let summary: Vec<SummaryRow> = ranked
        .iter()
        .map(|r| SummaryRow {
            prompt: r.stats.prompt.label().to_string(),
            heuristic: r.stats.heuristic.code(),
            combination: r.stats.combination_id,
            ranked_aggregated_score: r.final_score,
            lev_median: r.stats.lev_median,
            bs_median: r.stats.bs_median,
            bs_std: r.stats.bs_std,
            n: r.stats.n,
            rank_lev: r.rank_lev,
            rank_bs: r.rank_bs,
            rank_std: r.rank_std,
            rank_sum: r.rank_sum,
            shortlisted: shortlisted.contains(&Source::Combo(r.stats.prompt, r.stats.heuristic)),
        })
        .collect();
    write_csv(&cfg.output_dir.join(SCORES_FILE), &scores)?;
    write_csv(&cfg.output_dir.join(SUMMARY_FILE), &summary)?;

    counts.combinations = stats.len();
    counts.shortlisted = shortlisted.iter().map(ToString::to_string).collect();
    manifest.evaluate = Some(counts.clone());
    manifest.finish(&cfg.output_dir)?;
    Ok(Evaluation { ranked, shortlisted, counts })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StatsTest {
    Cochran,
    McNemar,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatsRequest {
    pub test: StatsTest,
    pub a: Option<String>,
    pub b: Option<String>,
    pub options: McNemarOptions,
    pub alpha: f64,
}

/// Runs a significance test over a grading sheet. McNemar defaults to the
/// sheet's only two sources when `a`/`b` are absent.
pub fn cmd_stats(grading_csv: &Path, request: &StatsRequest) -> Result<TestResult, PipelineError> {
    let m = ingest_grading(grading_csv)?;
    let result = match request.test {
        StatsTest::Cochran => cochran_q(&m)?,
        StatsTest::McNemar => {
            let pick = |label: &Option<String>, i: usize| -> Result<String, PipelineError> {
                match label {
                    Some(l) => Ok(l.clone()),
                    None if m.treatments.len() == 2 => Ok(m.treatments[i].clone()),
                    None => Err(PipelineError::Config(format!(
                        "McNemar needs --a and --b; sources present: {}",
                        m.treatments.join(", ")
                    ))),
                }
            };
            mcnemar(&m, &pick(&request.a, 0)?, &pick(&request.b, 1)?, request.options)?
        }
    };
    Ok(result.with_alpha(request.alpha))
}
