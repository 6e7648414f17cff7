//! Generates title/abstract metadata for a few selections against the
//! bundled mock endpoint, or a real one when WARC2META_BASE_URL is set
//! (with the key in WARC2META_API_KEY).

use warc2meta::eval::HashEmbedder;
use warc2meta::heuristics::{HeuristicId, Selector};
use warc2meta::ingest::{ingest_files, IngestConfig};
use warc2meta::llm::{run_batch, ClientConfig, MetadataGenerator, PromptVariant};
use warc2meta::mock::{openai_compatible, MockServer};
use warc2meta::synth::{write_corpus, SiteShape};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("warc2meta-generate-example");
    let files = write_corpus(&dir, 4, &SiteShape { content_pages: 5, ..SiteShape::default() }, 11)?;
    let docs: Vec<_> = ingest_files(&files, &IngestConfig::default(), 2).into_iter().collect::<Result<_, _>>()?;
    let selector = Selector::default();
    let selections: Vec<_> =
        docs.iter().map(|d| selector.select(HeuristicId::AboutPriority, d)).collect::<Result<_, _>>()?;

    let mock;
    let base_url = match std::env::var("WARC2META_BASE_URL") {
        Ok(url) => url,
        Err(_) => {
            mock = MockServer::start(openai_compatible(HashEmbedder::default()))?;
            mock.base_url()
        }
    };
    for variant in PromptVariant::ALL {
        let generator = MetadataGenerator::new(ClientConfig { base_url: base_url.clone(), ..ClientConfig::default() }, variant)?;
        println!("== {}", variant.label());
        for row in run_batch(&selections, &generator, None) {
            match &row.error {
                None => println!("{} [{}]\n  {}\n  {}", row.site_id, row.source, row.title, row.abstract_text),
                Some(e) => println!("{}: {e}", row.site_id),
            }
        }
    }
    Ok(())
}
