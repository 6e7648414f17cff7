//! Runs the three page-selection heuristics on one synthetic site.

use warc2meta::heuristics::{HeuristicId, Selector};
use warc2meta::ingest::{ingest_warc_file, IngestConfig};
use warc2meta::synth::{synthetic_site, write_site_warc, SiteShape};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::temp_dir().join("warc2meta-heuristics-example.warc.gz");
    write_site_warc(&path, &synthetic_site(4, &SiteShape { content_pages: 12, ..SiteShape::default() }, 1), true)?;
    let doc = ingest_warc_file(&path, &IngestConfig::default())?;

    let selector = Selector::default();
    for h in HeuristicId::ALL {
        let s = selector.select(h, &doc)?;
        println!("heuristic {} ({h:?}) picked {}", h.code(), s.chosen_url.as_str());
        println!("  ~{} tokens after filtering, ~{} before", s.reduced_token_estimate, s.original_token_estimate);
        println!("  {}", s.content.chars().take(120).collect::<String>().replace('\n', " / "));
    }
    Ok(())
}
