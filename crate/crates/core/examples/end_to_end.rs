//! The whole pipeline through the CLI entry point: ingest, select,
//! generate all six combinations against the mock endpoint, evaluate.

use warc2meta::eval::HashEmbedder;
use warc2meta::mock::{openai_compatible, MockServer};
use warc2meta::pipeline::cli::run_from;
use warc2meta::synth::{reference_line, write_corpus, SiteShape};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = std::env::temp_dir().join("warc2meta-end-to-end");
    let _ = std::fs::remove_dir_all(&root);
    let sites = 12;
    write_corpus(&root.join("warcs"), sites, &SiteShape { content_pages: 10, ..SiteShape::default() }, 5)?;
    std::fs::write(root.join("refs.jsonl"), (0..sites).map(|i| reference_line(i) + "\n").collect::<String>())?;

    let server = MockServer::start(openai_compatible(HashEmbedder::default()))?;
    let config = root.join("config.toml");
    std::fs::write(
        &config,
        format!(
            "input_dir = \"warcs\"\noutput_dir = \"out\"\nreference_path = \"refs.jsonl\"\n\n[client]\nbase_url = \"{}\"\n",
            server.base_url()
        ),
    )?;

    let mut stdout = std::io::stdout();
    for cmd in [&["ingest"][..], &["select", "--all"], &["generate", "--all-combinations"], &["evaluate"]] {
        println!("$ warc2meta {}", cmd.join(" "));
        let mut argv = vec!["warc2meta", "--config", config.to_str().unwrap()];
        argv.extend_from_slice(cmd);
        run_from(argv, &mut stdout)?;
    }
    println!("stores in {}", root.join("out").display());
    Ok(())
}
