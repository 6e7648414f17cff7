//! Token counts and exact input cost before and after page selection.
//!
//! cargo run --example token_cost [RANK_FILE]
//!
//! With a tiktoken-format rank file (e.g. o200k_base.tiktoken) counts are
//! exact; without one they fall back to a 4-characters-per-token estimate.

use std::path::PathBuf;

use warc2meta::heuristics::{HeuristicId, Selector};
use warc2meta::ingest::{ingest_files, IngestConfig};
use warc2meta::synth::{write_corpus, SiteShape};
use warc2meta::tokens::{reduction_report, Prices, TokenCounter};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let counter = TokenCounter::from_optional_path(std::env::args().nth(1).map(PathBuf::from).as_deref())?;
    let dir = std::env::temp_dir().join("warc2meta-cost-example");
    let files = write_corpus(&dir, 10, &SiteShape::default(), 3)?;
    let docs: Vec<_> = ingest_files(&files, &IngestConfig::default(), 4).into_iter().collect::<Result<_, _>>()?;
    let before: Vec<String> =
        docs.iter().map(|d| d.pages.iter().map(|p| p.body_text.as_str()).collect::<Vec<_>>().join("\n")).collect();

    let prices = Prices { price_per_million_input: "2.50".parse()?, price_per_million_output: "10.00".parse()? };
    let selector = Selector::default();
    for h in HeuristicId::ALL {
        let after: Vec<String> = docs.iter().filter_map(|d| selector.select(h, d).ok()).map(|s| s.content).collect();
        let r = reduction_report(&before, &after, &prices, &counter);
        println!(
            "heuristic {}: {} -> {} tokens ({:.3}% less), ${} -> ${}{}",
            h.code(),
            r.tokens_before,
            r.tokens_after,
            100.0 * r.reduction_ratio,
            r.cost_before,
            r.cost_after,
            if r.approximate { " (estimated)" } else { "" }
        );
    }
    Ok(())
}
