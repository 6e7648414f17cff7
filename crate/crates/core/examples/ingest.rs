//! Writes a small synthetic crawl and ingests it, printing what survived
//! filtering and deduplication for each site.
//!
//! cargo run --example ingest [DIR]

use std::path::PathBuf;

use warc2meta::ingest::{ingest_files, IngestConfig};
use warc2meta::synth::{write_corpus, SiteShape};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = match std::env::args().nth(1) {
        Some(d) => PathBuf::from(d),
        None => {
            let dir = std::env::temp_dir().join("warc2meta-ingest-example");
            let shape = SiteShape { content_pages: 8, ..SiteShape::default() };
            write_corpus(&dir, 3, &shape, 7)?;
            dir
        }
    };
    let files = warc2meta::ingest::discover_warc_files(&dir)?;
    for (path, result) in files.iter().zip(ingest_files(&files, &IngestConfig::default(), 2)) {
        match result {
            Ok(doc) => {
                println!(
                    "{} ({}): {} pages kept, {} rejected, {} duplicates",
                    doc.site_id,
                    doc.site_url(),
                    doc.pages.len(),
                    doc.rejected_count,
                    doc.duplicate_count
                );
                for page in doc.pages.iter().take(3) {
                    println!("  {:<60} {:>6} chars  {}", page.url.as_str(), page.char_count, page.page_title);
                }
            }
            Err(e) => println!("{}: {e}", path.display()),
        }
    }
    Ok(())
}
