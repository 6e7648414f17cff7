//! WARC files to per-site page collections.
//!
//! `open_warc_stream → extract_page → quality_filter → deduplicate`, one
//! [`SiteDocument`] per input file.

pub mod html;
pub mod url;

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

pub use self::url::{normalize_url, NormalizedUrl, UrlNormalizer};
use crate::error::WarcError;
use crate::warc::{open_warc_stream, RawWarcRecord, RecordType};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageRecord {
    pub url: NormalizedUrl,
    pub raw_url: String,
    #[serde(rename = "title")]
    pub page_title: String,
    pub body_text: String,
    pub http_status: Option<u16>,
    pub char_count: usize,
}

impl PageRecord {
    pub fn new(url: NormalizedUrl, raw_url: impl Into<String>, title: impl Into<String>, body: impl Into<String>, http_status: Option<u16>) -> Self {
        let body_text = body.into();
        PageRecord {
            url,
            raw_url: raw_url.into(),
            page_title: title.into(),
            char_count: body_text.chars().count(),
            body_text,
            http_status,
        }
    }
}

/// Per-file counters for records that never became pages.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestDiagnostics {
    /// HTML response/resource records turned into pages (before filtering).
    pub html_records: usize,
    pub non_html: usize,
    pub undecodable: usize,
    pub invalid_url: usize,
    pub skipped_other_types: u64,
    pub truncated_records: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiteDocument {
    pub source_file: PathBuf,
    pub site_id: String,
    pub pages: Vec<PageRecord>,
    pub rejected_count: usize,
    pub duplicate_count: usize,
    #[serde(default)]
    pub diagnostics: IngestDiagnostics,
}

impl SiteDocument {
    /// Landing URL for prompting: the shortest retained URL, or the site id.
    pub fn site_url(&self) -> String {
        self.pages
            .iter()
            .map(|p| &p.url)
            .min_by(|a, b| a.char_len().cmp(&b.char_len()).then_with(|| a.as_str().cmp(b.as_str())))
            .map(|u| format!("{}://{}/", u.scheme, u.host))
            .unwrap_or_else(|| self.site_id.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "reason")]
pub enum RejectReason {
    Status { code: u16 },
    NotFound,
    Placeholder,
    TooShort { chars: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Keep,
    Reject(RejectReason),
}

#[derive(Debug, Clone)]
pub struct IngestConfig {
    pub min_chars: usize,
    pub normalizer: UrlNormalizer,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig { min_chars: 30, normalizer: UrlNormalizer::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkipReason {
    NonHtml,
    Undecodable,
    InvalidUrl,
}

fn is_html(content_type: Option<&str>) -> bool {
    content_type.is_some_and(|ct| {
        let media = ct.split(';').next().unwrap_or("").trim().to_ascii_lowercase();
        media == "text/html" || media == "application/xhtml+xml"
    })
}

/// Turns an HTML record into a page, or says why it cannot be one.
pub fn classify_record(record: &RawWarcRecord, normalizer: &UrlNormalizer) -> Result<PageRecord, SkipReason> {
    if record.record_type == RecordType::Other || !is_html(record.content_type.as_deref()) {
        return Err(SkipReason::NonHtml);
    }
    let body = record.body().map_err(|_| SkipReason::Undecodable)?;
    let url = normalizer.normalize(&record.target_uri).map_err(|_| SkipReason::InvalidUrl)?;
    let text = html::extract_text(&html::decode_html(&body, record.content_type.as_deref()));
    Ok(PageRecord::new(url, record.target_uri.clone(), text.title, text.body, record.http_status))
}

/// HTML records become pages; everything else is absent.
pub fn extract_page(record: &RawWarcRecord) -> Option<PageRecord> {
    classify_record(record, &UrlNormalizer::default()).ok()
}

fn marker_patterns() -> &'static (Regex, Regex) {
    static PATTERNS: OnceLock<(Regex, Regex)> = OnceLock::new();
    PATTERNS.get_or_init(|| {
        (
            Regex::new(r"(?i)\b404\b|page not found").unwrap(),
            Regex::new(r"(?i)lorem\s+ipsum").unwrap(),
        )
    })
}

pub fn quality_filter(page: &PageRecord, min_chars: usize) -> Verdict {
    if let Some(code) = page.http_status.filter(|c| *c >= 400) {
        return Verdict::Reject(RejectReason::Status { code });
    }
    let (not_found, placeholder) = marker_patterns();
    if not_found.is_match(&page.page_title) || not_found.is_match(&page.body_text) {
        return Verdict::Reject(RejectReason::NotFound);
    }
    if placeholder.is_match(&page.page_title) || placeholder.is_match(&page.body_text) {
        return Verdict::Reject(RejectReason::Placeholder);
    }
    if page.char_count < min_chars {
        return Verdict::Reject(RejectReason::TooShort { chars: page.char_count });
    }
    Verdict::Keep
}

/// Keeps the longest page per dedup key (earliest on ties), in first-seen key order.
pub fn deduplicate(pages: Vec<PageRecord>) -> Vec<PageRecord> {
    let mut slot: HashMap<String, usize> = HashMap::with_capacity(pages.len());
    let mut out: Vec<PageRecord> = Vec::with_capacity(pages.len());
    for page in pages {
        match slot.get(&page.url.dedup_key) {
            Some(&i) => {
                if page.char_count > out[i].char_count {
                    out[i] = page;
                }
            }
            None => {
                slot.insert(page.url.dedup_key.clone(), out.len());
                out.push(page);
            }
        }
    }
    out
}

/// `example.warc.gz` → `example`.
pub fn site_id_for(path: &Path) -> String {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let name = name.strip_suffix(".gz").unwrap_or(&name);
    name.strip_suffix(".warc").unwrap_or(name).to_string()
}

pub fn ingest_warc_file(path: &Path, cfg: &IngestConfig) -> Result<SiteDocument, WarcError> {
    let mut reader = open_warc_stream(path)?;
    let mut diagnostics = IngestDiagnostics::default();
    let mut kept = Vec::new();
    let mut rejected_count = 0;

    for record in reader.by_ref() {
        let record = match record {
            Ok(r) => r,
            Err(WarcError::TruncatedRecord { offset, declared, read }) => {
                log::warn!("{}: truncated record at {offset} ({read}/{declared} bytes)", path.display());
                diagnostics.truncated_records += 1;
                break;
            }
            Err(e) => return Err(e),
        };
        match classify_record(&record, &cfg.normalizer) {
            Ok(page) => {
                diagnostics.html_records += 1;
                match quality_filter(&page, cfg.min_chars) {
                    Verdict::Keep => kept.push(page),
                    Verdict::Reject(_) => rejected_count += 1,
                }
            }
            Err(SkipReason::NonHtml) => diagnostics.non_html += 1,
            Err(SkipReason::Undecodable) => diagnostics.undecodable += 1,
            Err(SkipReason::InvalidUrl) => diagnostics.invalid_url += 1,
        }
    }
    diagnostics.skipped_other_types = reader.skipped();

    let before = kept.len();
    let pages = deduplicate(kept);
    Ok(SiteDocument {
        source_file: path.to_path_buf(),
        site_id: site_id_for(path),
        duplicate_count: before - pages.len(),
        pages,
        rejected_count,
        diagnostics,
    })
}

/// `*.warc` and `*.warc.gz` directly under `dir`, sorted by name.
pub fn discover_warc_files(dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.file_name()
                    .map(|n| n.to_string_lossy())
                    .is_some_and(|n| n.ends_with(".warc") || n.ends_with(".warc.gz"))
        })
        .collect();
    files.sort();
    Ok(files)
}

/// Ingests files on a pool of `workers` threads; results follow input order.
pub fn ingest_files(
    paths: &[PathBuf],
    cfg: &IngestConfig,
    workers: usize,
) -> Vec<Result<SiteDocument, WarcError>> {
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("thread pool");
    pool.install(|| paths.par_iter().map(|p| ingest_warc_file(p, cfg)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn page(url: &str, body: &str) -> PageRecord {
        PageRecord::new(normalize_url(url).unwrap(), url, "", body, Some(200))
    }

    fn response(ct: &str, body: &str) -> RawWarcRecord {
        let block = format!("HTTP/1.1 200 OK\r\nContent-Type: {ct}\r\n\r\n{body}");
        RawWarcRecord {
            record_type: RecordType::Response,
            target_uri: "http://a.sg/".into(),
            http_status: Some(200),
            content_type: Some(ct.into()),
            transfer_encoding: None,
            content_encoding: None,
            body_start: block.find("\r\n\r\n").unwrap() + 4,
            payload: block.into_bytes(),
            payload_offset: 0,
        }
    }

    #[test]
    fn non_html_absent() {
        assert!(extract_page(&response("image/png", "\u{89}PNG")).is_none());
    }

    #[test]
    fn html_page_extracted() {
        let r = response(
            "text/html; charset=utf-8",
            "<html><head><title>T</title><script>x()</script></head><body> a  b </body></html>",
        );
        let p = extract_page(&r).unwrap();
        assert_eq!(p.page_title, "T");
        assert_eq!(p.body_text, "a b");
        assert_eq!(p.char_count, 3);
        assert_eq!(p.url.dedup_key, "http://a.sg/");
    }

    #[test]
    fn xhtml_accepted_and_script_only_empty() {
        let p = extract_page(&response("application/xhtml+xml", "<script>x()</script>")).unwrap();
        assert_eq!(p.body_text, "");
        assert_eq!(p.char_count, 0);
    }

    #[test]
    fn filter_status() {
        let mut p = page("http://a.sg/x", &"genuine text ".repeat(40));
        p.http_status = Some(404);
        assert_eq!(quality_filter(&p, 30), Verdict::Reject(RejectReason::Status { code: 404 }));
    }

    #[test]
    fn filter_placeholder() {
        let p = page("http://a.sg/x", "Lorem Ipsum dolor sit amet, consectetur adipiscing elit");
        assert_eq!(quality_filter(&p, 30), Verdict::Reject(RejectReason::Placeholder));
    }

    #[test]
    fn filter_not_found_markers() {
        let p = page("http://a.sg/x", "Sorry, Page Not Found. Try the search box instead please.");
        assert_eq!(quality_filter(&p, 30), Verdict::Reject(RejectReason::NotFound));
        let mut p = page("http://a.sg/x", &"genuine text ".repeat(40));
        p.page_title = "Error 404".into();
        assert_eq!(quality_filter(&p, 30), Verdict::Reject(RejectReason::NotFound));
        // digits inside a longer number are not a marker
        let p = page("http://a.sg/x", "Call us at 64041234 for enquiries about our services.");
        assert_eq!(quality_filter(&p, 30), Verdict::Keep);
    }

    #[test]
    fn filter_length() {
        let p = page("http://a.sg/x", "too short");
        assert_eq!(quality_filter(&p, 30), Verdict::Reject(RejectReason::TooShort { chars: 9 }));
        let p = page("http://a.sg/x", &"g".repeat(500));
        assert_eq!(quality_filter(&p, 30), Verdict::Keep);
    }

    #[test]
    fn dedup_keeps_longest() {
        let out = deduplicate(vec![page("http://a.sg/x", &"a".repeat(10)), page("http://www.a.sg/x/", &"b".repeat(50))]);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].char_count, 50);
    }

    #[test]
    fn dedup_tie_keeps_earliest_and_order() {
        let input = vec![
            page("http://a.sg/1", "first"),
            page("http://a.sg/2", "other"),
            page("http://a.sg/1", "later"),
        ];
        let out = deduplicate(input);
        assert_eq!(out.iter().map(|p| p.body_text.as_str()).collect::<Vec<_>>(), ["first", "other"]);
    }

    #[test]
    fn dedup_identity_and_empty() {
        let input = vec![page("http://a.sg/1", "x"), page("http://a.sg/2", "y")];
        assert_eq!(deduplicate(input.clone()), input);
        assert!(deduplicate(vec![]).is_empty());
    }

    #[test]
    fn site_ids() {
        assert_eq!(site_id_for(Path::new("/x/acme.warc.gz")), "acme");
        assert_eq!(site_id_for(Path::new("acme.warc")), "acme");
    }
}
