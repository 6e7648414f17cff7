//! Streaming reader for WARC 1.0/1.1 containers, plain or gzip-compressed.
//!
//! Records are yielded one at a time; only the current record's block is
//! held in memory. Records other than `response` and `resource` are skipped
//! without buffering their content.

use std::borrow::Cow;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Read};
use std::path::Path;

use flate2::bufread::MultiGzDecoder;

use crate::error::WarcError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordType {
    Response,
    Resource,
    Other,
}

/// A `response` or `resource` record with its HTTP envelope (if any) parsed.
#[derive(Debug, Clone)]
pub struct RawWarcRecord {
    pub record_type: RecordType,
    pub target_uri: String,
    pub http_status: Option<u16>,
    pub content_type: Option<String>,
    /// `Transfer-Encoding` and `Content-Encoding` of the HTTP message, lowercased.
    pub transfer_encoding: Option<String>,
    pub content_encoding: Option<String>,
    /// The full record block; its length equals the declared `Content-Length`.
    pub payload: Vec<u8>,
    /// Offset of the record's version line. For gzip input this is the
    /// offset within the decompressed stream.
    pub payload_offset: u64,
    /// Start of the entity body inside `payload`.
    pub body_start: usize,
}

impl RawWarcRecord {
    /// Entity body with transfer and content codings removed.
    pub fn body(&self) -> io::Result<Cow<'_, [u8]>> {
        let raw = &self.payload[self.body_start.min(self.payload.len())..];
        let mut body: Cow<'_, [u8]> = Cow::Borrowed(raw);
        if self
            .transfer_encoding
            .as_deref()
            .is_some_and(|te| te.contains("chunked"))
        {
            body = Cow::Owned(dechunk(&body)?);
        }
        match self.content_encoding.as_deref().map(str::trim) {
            None | Some("") | Some("identity") => Ok(body),
            Some("gzip") | Some("x-gzip") => {
                let mut out = Vec::new();
                flate2::read::MultiGzDecoder::new(&body[..]).read_to_end(&mut out)?;
                Ok(Cow::Owned(out))
            }
            Some("deflate") => {
                let mut out = Vec::new();
                if flate2::read::ZlibDecoder::new(&body[..])
                    .read_to_end(&mut out)
                    .is_err()
                {
                    out.clear();
                    flate2::read::DeflateDecoder::new(&body[..]).read_to_end(&mut out)?;
                }
                Ok(Cow::Owned(out))
            }
            Some(other) => Err(io::Error::new(
                io::ErrorKind::InvalidData,
                format!("unsupported content-encoding {other}"),
            )),
        }
    }
}

fn dechunk(mut data: &[u8]) -> io::Result<Vec<u8>> {
    let bad = |m: &str| io::Error::new(io::ErrorKind::InvalidData, m.to_string());
    let mut out = Vec::with_capacity(data.len());
    loop {
        let eol = data
            .windows(2)
            .position(|w| w == b"\r\n")
            .ok_or_else(|| bad("chunk size line"))?;
        let line = std::str::from_utf8(&data[..eol]).map_err(|_| bad("chunk size line"))?;
        let size_str = line.split(';').next().unwrap_or("").trim();
        let size = usize::from_str_radix(size_str, 16).map_err(|_| bad("chunk size"))?;
        data = &data[eol + 2..];
        if size == 0 {
            return Ok(out);
        }
        if data.len() < size {
            // Truncated captures keep whatever arrived.
            out.extend_from_slice(data);
            return Ok(out);
        }
        out.extend_from_slice(&data[..size]);
        data = &data[size..];
        data = data.strip_prefix(b"\r\n").unwrap_or(data);
    }
}

/// Byte counter over the (decompressed) input.
struct Counting<R> {
    inner: R,
    pos: u64,
}

impl<R: BufRead> Read for Counting<R> {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        let n = self.inner.read(buf)?;
        self.pos += n as u64;
        Ok(n)
    }
}

impl<R: BufRead> BufRead for Counting<R> {
    fn fill_buf(&mut self) -> io::Result<&[u8]> {
        self.inner.fill_buf()
    }
    fn consume(&mut self, amt: usize) {
        self.pos += amt as u64;
        self.inner.consume(amt)
    }
}

/// Iterator over the `response`/`resource` records of a WARC stream.
pub struct WarcReader<R> {
    input: Counting<R>,
    gzip: bool,
    done: bool,
    skipped: u64,
}

/// Opens `path`, detecting gzip by its magic bytes.
pub fn open_warc_stream(path: &Path) -> Result<WarcReader<Box<dyn BufRead + Send>>, WarcError> {
    let file = File::open(path)?;
    let mut buffered = BufReader::with_capacity(64 * 1024, file);
    let gzip = buffered.fill_buf()?.starts_with(&[0x1f, 0x8b]);
    let inner: Box<dyn BufRead + Send> = if gzip {
        Box::new(BufReader::with_capacity(64 * 1024, MultiGzDecoder::new(buffered)))
    } else {
        Box::new(buffered)
    };
    Ok(WarcReader::with_gzip_flag(inner, gzip))
}

impl<R: BufRead> WarcReader<R> {
    pub fn new(input: R) -> Self {
        Self::with_gzip_flag(input, false)
    }

    fn with_gzip_flag(input: R, gzip: bool) -> Self {
        WarcReader {
            input: Counting { inner: input, pos: 0 },
            gzip,
            done: false,
            skipped: 0,
        }
    }

    /// Records of other types passed over so far.
    pub fn skipped(&self) -> u64 {
        self.skipped
    }

    fn io_err(&self, e: io::Error) -> WarcError {
        if self.gzip && e.kind() != io::ErrorKind::NotFound {
            WarcError::Gzip(e.to_string())
        } else {
            WarcError::Io(e)
        }
    }

    /// Reads one line including its terminator; returns `None` at EOF.
    fn read_line(&mut self) -> Result<Option<Vec<u8>>, WarcError> {
        let mut line = Vec::new();
        let n = self
            .input
            .read_until(b'\n', &mut line)
            .map_err(|e| self.io_err(e))?;
        Ok((n > 0).then_some(line))
    }

    fn next_record(&mut self) -> Result<Option<RawWarcRecord>, WarcError> {
        loop {
            // Skip blank separator lines up to the next version line.
            let (offset, version) = loop {
                let offset = self.input.pos;
                match self.read_line()? {
                    None => return Ok(None),
                    Some(l) if trim_eol(&l).is_empty() => continue,
                    Some(l) => break (offset, l),
                }
            };
            let version = String::from_utf8_lossy(trim_eol(&version)).into_owned();
            if !(version == "WARC/1.0" || version == "WARC/1.1") {
                return Err(WarcError::MalformedHeader(format!(
                    "bad version line {version:?} at offset {offset}"
                )));
            }

            let headers = self.read_headers(offset)?;
            let header = |name: &str| {
                headers
                    .iter()
                    .find(|(k, _)| k.eq_ignore_ascii_case(name))
                    .map(|(_, v)| v.as_str())
            };
            let warc_type = header("WARC-Type").ok_or_else(|| {
                WarcError::MalformedHeader(format!("missing WARC-Type at offset {offset}"))
            })?;
            let length: u64 = header("Content-Length")
                .ok_or_else(|| {
                    WarcError::MalformedHeader(format!("missing Content-Length at offset {offset}"))
                })?
                .trim()
                .parse()
                .map_err(|_| {
                    WarcError::MalformedHeader(format!("bad Content-Length at offset {offset}"))
                })?;
            let record_type = match warc_type.trim().to_ascii_lowercase().as_str() {
                "response" => RecordType::Response,
                "resource" => RecordType::Resource,
                _ => RecordType::Other,
            };

            if record_type == RecordType::Other {
                let copied = io::copy(&mut (&mut self.input).take(length), &mut io::sink())
                    .map_err(|e| self.io_err(e))?;
                if copied < length {
                    return Err(WarcError::TruncatedRecord { offset, declared: length, read: copied });
                }
                self.skipped += 1;
                continue;
            }

            let target_uri = header("WARC-Target-URI")
                .map(|u| u.trim().trim_start_matches('<').trim_end_matches('>').to_string())
                .ok_or_else(|| {
                    WarcError::MalformedHeader(format!("missing WARC-Target-URI at offset {offset}"))
                })?;
            let warc_content_type = header("Content-Type").map(str::to_string);

            let mut payload = Vec::with_capacity(length.min(1 << 24) as usize);
            let read = (&mut self.input)
                .take(length)
                .read_to_end(&mut payload)
                .map_err(|e| self.io_err(e))? as u64;
            if read < length {
                return Err(WarcError::TruncatedRecord { offset, declared: length, read });
            }

            let mut record = RawWarcRecord {
                record_type,
                target_uri,
                http_status: None,
                content_type: warc_content_type.clone(),
                transfer_encoding: None,
                content_encoding: None,
                payload,
                payload_offset: offset,
                body_start: 0,
            };
            let is_http = warc_content_type
                .as_deref()
                .is_some_and(|ct| ct.to_ascii_lowercase().starts_with("application/http"))
                || (record_type == RecordType::Response && record.payload.starts_with(b"HTTP/"));
            if is_http {
                parse_http_envelope(&mut record);
            }
            return Ok(Some(record));
        }
    }

    fn read_headers(&mut self, offset: u64) -> Result<Vec<(String, String)>, WarcError> {
        let mut headers: Vec<(String, String)> = Vec::new();
        loop {
            let line = self.read_line()?.ok_or(WarcError::TruncatedRecord {
                offset,
                declared: 0,
                read: 0,
            })?;
            let line = trim_eol(&line);
            if line.is_empty() {
                return Ok(headers);
            }
            let text = String::from_utf8_lossy(line);
            if text.starts_with([' ', '\t']) {
                if let Some((_, v)) = headers.last_mut() {
                    v.push(' ');
                    v.push_str(text.trim());
                    continue;
                }
            }
            let (name, value) = text.split_once(':').ok_or_else(|| {
                WarcError::MalformedHeader(format!("header line without colon at offset {offset}"))
            })?;
            headers.push((name.trim().to_string(), value.trim().to_string()));
        }
    }
}

impl<R: BufRead> Iterator for WarcReader<R> {
    type Item = Result<RawWarcRecord, WarcError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        match self.next_record() {
            Ok(Some(r)) => Some(Ok(r)),
            Ok(None) => {
                self.done = true;
                None
            }
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

fn trim_eol(line: &[u8]) -> &[u8] {
    let line = line.strip_suffix(b"\n").unwrap_or(line);
    line.strip_suffix(b"\r").unwrap_or(line)
}

fn parse_http_envelope(record: &mut RawWarcRecord) {
    let block = &record.payload;
    let Some(head_end) = find_head_end(block) else {
        return;
    };
    let head = String::from_utf8_lossy(&block[..head_end.0]);
    let mut lines = head.split('\n').map(|l| l.trim_end_matches('\r'));
    let status_line = lines.next().unwrap_or("");
    if status_line.starts_with("HTTP/") {
        record.http_status = status_line
            .split_whitespace()
            .nth(1)
            .and_then(|s| s.parse().ok());
    }
    let mut content_type = None;
    for line in lines {
        let Some((name, value)) = line.split_once(':') else {
            continue;
        };
        let value = value.trim();
        match name.trim().to_ascii_lowercase().as_str() {
            "content-type" => content_type = Some(value.to_string()),
            "transfer-encoding" => record.transfer_encoding = Some(value.to_ascii_lowercase()),
            "content-encoding" => record.content_encoding = Some(value.to_ascii_lowercase()),
            _ => {}
        }
    }
    record.content_type = content_type;
    record.body_start = head_end.1;
}

/// Returns (end of header text, start of body).
fn find_head_end(block: &[u8]) -> Option<(usize, usize)> {
    if let Some(p) = block.windows(4).position(|w| w == b"\r\n\r\n") {
        let lf = block.windows(2).position(|w| w == b"\n\n");
        if lf.is_none_or(|l| l > p) {
            return Some((p, p + 4));
        }
    }
    block
        .windows(2)
        .position(|w| w == b"\n\n")
        .map(|p| (p, p + 2))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(kind: &str, uri: &str, block: &[u8]) -> Vec<u8> {
        let mut out = format!(
            "WARC/1.0\r\nWARC-Type: {kind}\r\nWARC-Target-URI: {uri}\r\nContent-Type: application/http; msgtype=response\r\nContent-Length: {}\r\n\r\n",
            block.len()
        )
        .into_bytes();
        out.extend_from_slice(block);
        out.extend_from_slice(b"\r\n\r\n");
        out
    }

    #[test]
    fn response_and_request() {
        let mut data = record("response", "http://a.sg/", b"HTTP/1.1 200 OK\r\nContent-Type: text/html\r\n\r\n<p>hi</p>");
        data.extend(record("request", "http://a.sg/", b"GET / HTTP/1.1\r\n\r\n"));
        let mut reader = WarcReader::new(&data[..]);
        let recs: Vec<_> = reader.by_ref().collect::<Result<_, _>>().unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(reader.skipped(), 1);
        let r = &recs[0];
        assert_eq!(r.http_status, Some(200));
        assert_eq!(r.content_type.as_deref(), Some("text/html"));
        assert_eq!(&r.body().unwrap()[..], b"<p>hi</p>");
        assert_eq!(r.payload_offset, 0);
    }

    #[test]
    fn truncated() {
        let data = b"WARC/1.0\r\nWARC-Type: response\r\nWARC-Target-URI: http://a.sg/\r\nContent-Length: 100\r\n\r\nshort";
        let err = WarcReader::new(&data[..]).next().unwrap().unwrap_err();
        assert!(matches!(err, WarcError::TruncatedRecord { declared: 100, read: 5, .. }));
    }

    #[test]
    fn bad_version() {
        let data = b"HTTP/1.1 200 OK\r\n\r\n";
        let err = WarcReader::new(&data[..]).next().unwrap().unwrap_err();
        assert!(matches!(err, WarcError::MalformedHeader(_)));
    }

    #[test]
    fn missing_content_length() {
        let data = b"WARC/1.1\r\nWARC-Type: response\r\nWARC-Target-URI: http://a.sg/\r\n\r\n";
        let err = WarcReader::new(&data[..]).next().unwrap().unwrap_err();
        assert!(matches!(err, WarcError::MalformedHeader(m) if m.contains("Content-Length")));
    }

    #[test]
    fn chunked_body() {
        let block = b"HTTP/1.1 200 OK\r\nTransfer-Encoding: chunked\r\nContent-Type: text/html\r\n\r\n3\r\nabc\r\n2\r\nde\r\n0\r\n\r\n";
        let data = record("response", "http://a.sg/", block);
        let r = WarcReader::new(&data[..]).next().unwrap().unwrap();
        assert_eq!(r.payload.len(), block.len());
        assert_eq!(&r.body().unwrap()[..], b"abcde");
    }

    #[test]
    fn empty_input() {
        assert_eq!(WarcReader::new(&b""[..]).count(), 0);
    }
}
