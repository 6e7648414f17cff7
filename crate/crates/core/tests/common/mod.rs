#![allow(dead_code)]

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use flate2::write::GzEncoder;
use flate2::Compression;
use warc2meta::synth::{http_response, WarcWriter};

fn html(title: &str, body: &str) -> Vec<u8> {
    format!("<html><head><title>{title}</title><script>track()</script></head><body>{body}</body></html>").into_bytes()
}

fn writer(dir: &Path, name: &str) -> WarcWriter<BufWriter<File>> {
    let gzip = name.ends_with(".gz");
    let mut w = WarcWriter::new(BufWriter::new(File::create(dir.join(name)).unwrap()), gzip);
    w.warcinfo().unwrap();
    w
}

fn page(w: &mut WarcWriter<BufWriter<File>>, url: &str, status: u16, title: &str, body: &str) {
    w.request(url).unwrap();
    w.response(url, status, "text/html; charset=utf-8", &html(title, body)).unwrap();
}

const ACME: [(&str, &str, &str); 3] = [
    ("/", "Acme Instruments", "<p>Acme Instruments makes precision measuring tools.</p>"),
    ("/about-us", "About Acme", "<h1>About</h1><p>Founded in 1962 in Singapore by two engineers.</p>"),
    ("/products", "Products", "<ul><li>Calipers and gauges</li><li>Micrometers for industry</li></ul>"),
];

/// What ingesting one fixture file must produce.
#[derive(Debug, Clone)]
pub struct Expected {
    pub file: &'static str,
    pub site_id: &'static str,
    /// dedup keys in output order; empty with `error` set for failing files.
    pub urls: Vec<&'static str>,
    pub rejected: usize,
    pub duplicates: usize,
    pub non_html: usize,
    pub truncated: usize,
    pub error: bool,
}

fn expect(file: &'static str, urls: Vec<&'static str>, rejected: usize, duplicates: usize) -> Expected {
    let site_id = file.trim_end_matches(".gz").trim_end_matches(".warc");
    Expected { file, site_id, urls, rejected, duplicates, non_html: 0, truncated: 0, error: false }
}

pub fn expected_corpus() -> Vec<Expected> {
    vec![
        expect("a_valid.warc", vec!["https://acme.sg/", "https://acme.sg/about-us", "https://acme.sg/products"], 0, 0),
        expect("b_gzip.warc.gz", vec!["https://beta.sg/", "https://beta.sg/about-us", "https://beta.sg/products"], 0, 0),
        Expected { truncated: 1, ..expect("c_truncated.warc", vec!["https://cut.sg/"], 0, 0) },
        Expected { non_html: 2, ..expect("d_non_html.warc", vec!["https://media.sg/"], 0, 0) },
        expect("e_duplicates.warc", vec!["https://dup.sg/index", "https://dup.sg/"], 0, 2),
        expect("f_not_found.warc", vec!["https://gone.sg/"], 3, 0),
        expect("g_lorem.warc.gz", vec!["https://draft.sg/"], 1, 0),
        expect("h_short.warc", vec![], 2, 0),
        expect("i_encoded.warc", vec!["https://zip.sg/"], 0, 0),
        expect("j_latin1.warc", vec!["http://cafe.sg/"], 0, 0),
        expect("k_requests_only.warc", vec![], 0, 0),
        Expected { error: true, ..expect("l_corrupt.warc", vec![], 0, 0) },
    ]
}

/// Writes the twelve hand-built fixture files into `dir`.
pub fn build_fixture_corpus(dir: &Path) -> Vec<PathBuf> {
    std::fs::create_dir_all(dir).unwrap();
    for (name, host) in [("a_valid.warc", "acme.sg"), ("b_gzip.warc.gz", "beta.sg")] {
        let mut w = writer(dir, name);
        for (path, title, body) in ACME {
            page(&mut w, &format!("https://{host}{path}"), 200, title, body);
        }
        w.finish().unwrap();
    }

    let mut w = writer(dir, "c_truncated.warc");
    page(&mut w, "https://cut.sg/", 200, "Cut", "<p>The first record is complete and long enough.</p>");
    let block = http_response(200, "text/html", &html("Second", "<p>This record claims more bytes than it has.</p>"));
    w.record_with_length("response", Some("https://cut.sg/second"), "application/http; msgtype=response", &block, block.len() + 500)
        .unwrap();
    w.finish().unwrap();

    let mut w = writer(dir, "d_non_html.warc");
    w.response("https://media.sg/logo.png", 200, "image/png", b"\x89PNG\r\n\x1a\n0000").unwrap();
    w.response("https://media.sg/brochure.pdf", 200, "application/pdf", b"%PDF-1.4 binary").unwrap();
    w.record("metadata", Some("https://media.sg/"), "application/warc-fields", b"via: crawler\r\n").unwrap();
    page(&mut w, "https://media.sg/", 200, "Media", "<p>Media Studio produces documentaries and short films.</p>");
    w.finish().unwrap();

    let mut w = writer(dir, "e_duplicates.warc");
    page(&mut w, "https://www.dup.sg/index?utm_source=news", 200, "Index", "<p>Duplicate site index, short copy.</p>");
    page(&mut w, "https://dup.sg/index", 200, "Index", "<p>Duplicate site index, the long copy with the complete listing of services.</p>");
    page(&mut w, "https://DUP.sg/index#top", 200, "Index", "<p>Duplicate site index, a medium copy of it.</p>");
    page(&mut w, "https://dup.sg/", 200, "Dup", "<p>Welcome to the duplicate test site home page.</p>");
    w.finish().unwrap();

    let mut w = writer(dir, "f_not_found.warc");
    page(&mut w, "https://gone.sg/missing", 404, "Missing", "<p>The server could not find the requested resource.</p>");
    page(&mut w, "https://gone.sg/gone", 200, "Page Not Found", "<p>Sorry, we moved things around on this website.</p>");
    page(&mut w, "https://gone.sg/err", 200, "Oops", "<p>Error 404: nothing here, please go back home.</p>");
    page(&mut w, "https://gone.sg/", 200, "Gone", "<p>Gone Fishing Supplies sells rods, reels and bait.</p>");
    w.finish().unwrap();

    let mut w = writer(dir, "g_lorem.warc.gz");
    page(&mut w, "https://draft.sg/draft", 200, "Draft", "<p>Lorem ipsum dolor sit amet, consectetur adipiscing elit.</p>");
    page(&mut w, "https://draft.sg/", 200, "Draft Studio", "<p>Draft Studio is an architecture practice in Singapore.</p>");
    w.finish().unwrap();

    let mut w = writer(dir, "h_short.warc");
    page(&mut w, "https://tiny.sg/", 200, "Tiny", "<p>Hi.</p>");
    page(&mut w, "https://tiny.sg/x", 200, "Tiny", "<p>Coming soon.</p>");
    w.finish().unwrap();

    let mut w = writer(dir, "i_encoded.warc");
    let mut gz = GzEncoder::new(Vec::new(), Compression::default());
    gz.write_all(&html("Zip", "<p>Zip Logistics moves containers across the region.</p>")).unwrap();
    let compressed = gz.finish().unwrap();
    let mut chunked = Vec::new();
    for chunk in compressed.chunks(16) {
        chunked.extend_from_slice(format!("{:x}\r\n", chunk.len()).as_bytes());
        chunked.extend_from_slice(chunk);
        chunked.extend_from_slice(b"\r\n");
    }
    chunked.extend_from_slice(b"0\r\n\r\n");
    let mut block = b"HTTP/1.1 200 OK\r\nContent-Type: text/html\r\nTransfer-Encoding: chunked\r\nContent-Encoding: gzip\r\n\r\n".to_vec();
    block.extend_from_slice(&chunked);
    w.record("response", Some("https://zip.sg/"), "application/http; msgtype=response", &block).unwrap();
    w.finish().unwrap();

    let mut w = writer(dir, "j_latin1.warc");
    let body = b"<html><head><title>Caf\xe9</title></head><body><p>Caf\xe9 R\xe9sidence offers rooms near the river.</p></body></html>".to_vec();
    w.response("http://cafe.sg/", 200, "text/html; charset=iso-8859-1", &body).unwrap();
    w.finish().unwrap();

    let mut w = writer(dir, "k_requests_only.warc");
    w.request("https://quiet.sg/").unwrap();
    w.request("https://quiet.sg/about").unwrap();
    w.finish().unwrap();

    std::fs::write(dir.join("l_corrupt.warc"), b"WARC/0.9\r\nWARC-Type: response\r\nContent-Length: 4\r\n\r\nabcd\r\n\r\n").unwrap();

    let mut files: Vec<PathBuf> = expected_corpus().iter().map(|e| dir.join(e.file)).collect();
    files.sort();
    files
}

/// Human reference titles/abstracts for the fixture sites that keep pages.
pub fn fixture_references() -> String {
    [
        ("a_valid", "Acme Instruments", "Acme Instruments makes precision measuring tools and was founded in 1962 in Singapore."),
        ("b_gzip", "Acme Instruments", "Acme Instruments makes precision measuring tools."),
        ("c_truncated", "Cut", "The website of Cut."),
        ("d_non_html", "Media Studio", "Media Studio produces documentaries and short films."),
        ("e_duplicates", "Dup", "A duplicate test site."),
        ("f_not_found", "Gone Fishing Supplies", "Gone Fishing Supplies sells rods, reels and bait."),
        ("g_lorem", "Draft Studio", "Draft Studio is an architecture practice in Singapore."),
        ("i_encoded", "Zip Logistics", "Zip Logistics moves containers across the region."),
        ("j_latin1", "Café Résidence", "Café Résidence offers rooms near the river."),
    ]
    .iter()
    .map(|(id, t, a)| serde_json::json!({ "site_id": id, "title": t, "abstract": a }).to_string() + "\n")
    .collect()
}
pub mod oracles;

/// Every difference between the expected corpus and ingest results.
pub fn corpus_mismatches(
    expected: &[Expected],
    results: &[Result<warc2meta::ingest::SiteDocument, warc2meta::error::WarcError>],
) -> Vec<String> {
    let mut out = Vec::new();
    if expected.len() != results.len() {
        out.push(format!("{} results for {} files", results.len(), expected.len()));
    }
    for (exp, got) in expected.iter().zip(results) {
        let d = match (got, exp.error) {
            (Err(_), true) => continue,
            (Err(e), false) => {
                out.push(format!("{}: unexpected error {e}", exp.file));
                continue;
            }
            (Ok(_), true) => {
                out.push(format!("{}: expected an error", exp.file));
                continue;
            }
            (Ok(d), false) => d,
        };
        let urls: Vec<&str> = d.pages.iter().map(|p| p.url.as_str()).collect();
        let checks = [
            ("site id", d.site_id == exp.site_id),
            ("urls", urls == exp.urls),
            ("rejected", d.rejected_count == exp.rejected),
            ("duplicates", d.duplicate_count == exp.duplicates),
            ("non-html", d.diagnostics.non_html == exp.non_html),
            ("truncated", d.diagnostics.truncated_records == exp.truncated),
            ("record accounting", d.pages.len() + d.rejected_count + d.duplicate_count == d.diagnostics.html_records),
        ];
        for (what, ok) in checks {
            if !ok {
                out.push(format!("{}: {what} differs (urls {urls:?})", exp.file));
            }
        }
    }
    out
}
