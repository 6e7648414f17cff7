//! WARC writing and seeded synthetic site corpora for demos, benchmarks and
//! tests.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use flate2::write::GzEncoder;
use flate2::Compression;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Writes WARC/1.1 records, optionally one gzip member per record.
pub struct WarcWriter<W: Write> {
    out: W,
    gzip: bool,
    records: u64,
}

impl<W: Write> WarcWriter<W> {
    pub fn new(out: W, gzip: bool) -> Self {
        WarcWriter { out, gzip, records: 0 }
    }

    /// A record whose header declares `declared_len` bytes; pass a larger
    /// value than `block.len()` to produce a truncated record.
    pub fn record_with_length(
        &mut self,
        warc_type: &str,
        target_uri: Option<&str>,
        content_type: &str,
        block: &[u8],
        declared_len: usize,
    ) -> io::Result<()> {
        self.records += 1;
        let mut bytes = format!(
            "WARC/1.1\r\nWARC-Type: {warc_type}\r\nWARC-Record-ID: <urn:uuid:00000000-0000-4000-8000-{:012x}>\r\nWARC-Date: 2024-01-01T00:00:00Z\r\n",
            self.records
        )
        .into_bytes();
        if let Some(uri) = target_uri {
            bytes.extend_from_slice(format!("WARC-Target-URI: {uri}\r\n").as_bytes());
        }
        bytes.extend_from_slice(format!("Content-Type: {content_type}\r\nContent-Length: {declared_len}\r\n\r\n").as_bytes());
        bytes.extend_from_slice(block);
        if declared_len <= block.len() {
            bytes.extend_from_slice(b"\r\n\r\n");
        }
        if self.gzip {
            let mut gz = GzEncoder::new(&mut self.out, Compression::fast());
            gz.write_all(&bytes)?;
            gz.finish()?;
        } else {
            self.out.write_all(&bytes)?;
        }
        Ok(())
    }

    pub fn record(&mut self, warc_type: &str, target_uri: Option<&str>, content_type: &str, block: &[u8]) -> io::Result<()> {
        self.record_with_length(warc_type, target_uri, content_type, block, block.len())
    }

    pub fn warcinfo(&mut self) -> io::Result<()> {
        self.record("warcinfo", None, "application/warc-fields", b"software: warc2meta-synth\r\nformat: WARC File Format 1.1\r\n")
    }

    pub fn request(&mut self, uri: &str) -> io::Result<()> {
        let path = uri.splitn(4, '/').nth(3).unwrap_or("");
        let block = format!("GET /{path} HTTP/1.1\r\nUser-Agent: synth\r\n\r\n");
        self.record("request", Some(uri), "application/http; msgtype=request", block.as_bytes())
    }

    pub fn response(&mut self, uri: &str, status: u16, content_type: &str, body: &[u8]) -> io::Result<()> {
        self.record("response", Some(uri), "application/http; msgtype=response", &http_response(status, content_type, body))
    }

    pub fn finish(mut self) -> io::Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

/// An HTTP/1.1 response block with a `Content-Length` header.
pub fn http_response(status: u16, content_type: &str, body: &[u8]) -> Vec<u8> {
    let mut block = format!(
        "HTTP/1.1 {status} {}\r\nContent-Type: {content_type}\r\nContent-Length: {}\r\n\r\n",
        if status < 400 { "OK" } else { "Error" },
        body.len()
    )
    .into_bytes();
    block.extend_from_slice(body);
    block
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntheticPage {
    pub url: String,
    pub status: u16,
    pub content_type: String,
    pub html: String,
}

pub fn html_page(title: &str, paragraphs: &[String]) -> String {
    let mut html = format!(
        "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>{title}</title></head>\n<body>\n\
         <nav><a href=\"/\">Home</a> | <a href=\"/about-us\">About</a> | <a href=\"/products\">Products</a> | <a href=\"/contact\">Contact</a></nav>\n\
         <h1>{title}</h1>\n"
    );
    for p in paragraphs {
        html.push_str(&format!("<p>{p}</p>\n"));
    }
    html.push_str("<footer>© 2024 All rights reserved. This site uses cookies.</footer>\n</body></html>\n");
    html
}

const WORDS: &[&str] = &[
    "precision", "instruments", "heritage", "library", "catalogue", "service", "community", "archive", "digital",
    "research", "products", "quality", "solutions", "training", "customers", "engineering", "design", "local",
    "regional", "support", "innovation", "sustainable", "materials", "education", "collection", "partners",
    "delivery", "maintenance", "consulting", "software", "hardware", "events", "members", "programme", "national",
];

fn sentence(rng: &mut ChaCha8Rng, words: usize) -> String {
    let mut s: Vec<&str> = (0..words.max(1)).map(|_| *WORDS.choose(rng).unwrap()).collect();
    let first = s[0];
    let capital = first[..1].to_uppercase() + &first[1..];
    s[0] = "";
    format!("{capital}{}.", s.join(" "))
}

fn paragraphs(rng: &mut ChaCha8Rng, words: usize) -> Vec<String> {
    let mut out = Vec::new();
    let mut left = words;
    while left > 0 {
        let n = left.min(rng.random_range(40..80));
        let mut p = Vec::new();
        let mut m = n;
        while m > 0 {
            let k = m.min(rng.random_range(8..16));
            p.push(sentence(rng, k));
            m -= k;
        }
        out.push(p.join(" "));
        left -= n;
    }
    out
}

/// Shape of one generated site.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SiteShape {
    /// Pages besides the home and About pages.
    pub content_pages: usize,
    pub words_per_page: usize,
    pub about_words: usize,
    pub home_words: usize,
}

impl Default for SiteShape {
    fn default() -> Self {
        SiteShape { content_pages: 50, words_per_page: 400, about_words: 40, home_words: 120 }
    }
}

pub fn site_host(index: usize) -> String {
    format!("www.company{index:03}.example.sg")
}

pub fn site_name(index: usize) -> String {
    format!("Company {index:03} Pte Ltd")
}

/// Home page, a short About page and `content_pages` long pages, all
/// determined by `seed` and `index`.
pub fn synthetic_site(index: usize, shape: &SiteShape, seed: u64) -> Vec<SyntheticPage> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let host = site_host(index);
    let name = site_name(index);
    let page = |url: String, title: &str, body: Vec<String>| SyntheticPage {
        url,
        status: 200,
        content_type: "text/html; charset=utf-8".into(),
        html: html_page(title, &body),
    };
    let mut pages = Vec::with_capacity(shape.content_pages + 2);
    let mut home = vec![format!("Welcome to {name}, a provider of {} and {}.", WORDS[index % WORDS.len()], WORDS[(index * 7 + 3) % WORDS.len()])];
    home.extend(paragraphs(&mut rng, shape.home_words));
    pages.push(page(format!("https://{host}/"), &format!("{name} | Home"), home));
    let mut about = vec![format!("{name} was founded in {} in Singapore.", 1950 + index % 70)];
    if shape.about_words > 0 {
        about.push(sentence(&mut rng, shape.about_words));
    }
    pages.push(page(format!("https://{host}/about-us"), &format!("About {name}"), about));
    for j in 0..shape.content_pages {
        let section = ["products", "news", "services", "resources"][j % 4];
        pages.push(page(
            format!("https://{host}/{section}/item-{j:03}?utm_source=crawl"),
            &format!("{name} {section} {j}"),
            paragraphs(&mut rng, shape.words_per_page),
        ));
    }
    pages
}

pub fn write_site_warc(path: &Path, pages: &[SyntheticPage], gzip: bool) -> io::Result<()> {
    let mut w = WarcWriter::new(BufWriter::new(File::create(path)?), gzip);
    w.warcinfo()?;
    for p in pages {
        w.request(&p.url)?;
        w.response(&p.url, p.status, &p.content_type, p.html.as_bytes())?;
    }
    w.finish()?;
    Ok(())
}

/// Writes `sites` WARC files (alternating plain and gzip) into `dir`.
pub fn write_corpus(dir: &Path, sites: usize, shape: &SiteShape, seed: u64) -> io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    (0..sites)
        .map(|i| {
            let gzip = i % 2 == 1;
            let path = dir.join(format!("company{i:03}.warc{}", if gzip { ".gz" } else { "" }));
            write_site_warc(&path, &synthetic_site(i, shape, seed), gzip)?;
            Ok(path)
        })
        .collect()
}

/// Plausible human reference metadata for a synthetic site, as a JSONL line.
pub fn reference_line(index: usize) -> String {
    serde_json::json!({
        "site_id": format!("company{index:03}"),
        "title": site_name(index),
        "abstract": format!(
            "{} was founded in {} in Singapore and provides {} and {}.",
            site_name(index),
            1950 + index % 70,
            WORDS[index % WORDS.len()],
            WORDS[(index * 7 + 3) % WORDS.len()]
        ),
    })
    .to_string()
}
