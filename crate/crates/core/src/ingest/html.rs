//! Visible-text extraction from HTML.
//!
//! A small forgiving scanner rather than a full tree builder: it only needs
//! the first `<title>`, the text outside non-rendered elements, and where
//! block boundaries fall.

use encoding_rs::{Encoding, UTF_8};

/// Elements whose content is never rendered as page text.
const SKIPPED: &[&str] = &["script", "style", "noscript", "template", "title", "svg"];

const BLOCK: &[&str] = &[
    "address", "article", "aside", "blockquote", "body", "br", "dd", "div", "dl", "dt", "fieldset",
    "figcaption", "figure", "footer", "form", "h1", "h2", "h3", "h4", "h5", "h6", "header", "hr",
    "html", "li", "main", "nav", "ol", "option", "p", "pre", "section", "table", "td", "th", "tr",
    "ul",
];

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExtractedText {
    pub title: String,
    /// Visible text, one line per block; runs of inline whitespace are single spaces.
    pub body: String,
}

/// Decodes an HTML body: HTTP charset, then `<meta charset>`, then lossy UTF-8.
pub fn decode_html(bytes: &[u8], content_type: Option<&str>) -> String {
    let encoding = content_type
        .and_then(charset_param)
        .and_then(|l| Encoding::for_label(l.as_bytes()))
        .or_else(|| sniff_meta_charset(bytes))
        .unwrap_or(UTF_8);
    let (text, _, _) = encoding.decode(bytes);
    text.into_owned()
}

fn charset_param(content_type: &str) -> Option<String> {
    content_type.split(';').skip(1).find_map(|p| {
        let (k, v) = p.split_once('=')?;
        k.trim()
            .eq_ignore_ascii_case("charset")
            .then(|| v.trim().trim_matches(['"', '\'']).to_string())
    })
}

fn sniff_meta_charset(bytes: &[u8]) -> Option<&'static Encoding> {
    let head = &bytes[..bytes.len().min(4096)];
    let lower = String::from_utf8_lossy(head).to_ascii_lowercase();
    let mut rest = lower.as_str();
    while let Some(i) = rest.find("<meta") {
        rest = &rest[i + 5..];
        let tag = &rest[..rest.find('>').unwrap_or(rest.len())];
        if let Some(j) = tag.find("charset") {
            let after = tag[j + 7..].trim_start().strip_prefix('=')?.trim_start();
            let after = after.trim_start_matches(['"', '\'']);
            let end = after
                .find(|c: char| c == '"' || c == '\'' || c == ';' || c == '/' || c.is_whitespace())
                .unwrap_or(after.len());
            if let Some(enc) = Encoding::for_label(&after.as_bytes()[..end]) {
                return Some(enc);
            }
        }
    }
    None
}

/// Extracts the first `<title>` and the visible body text.
pub fn extract_text(html: &str) -> ExtractedText {
    let mut title: Option<String> = None;
    let mut raw = String::with_capacity(html.len() / 2);
    let bytes = html.as_bytes();
    let mut i = 0;
    let mut text_start = 0;

    while i < bytes.len() {
        if bytes[i] != b'<' {
            i += 1;
            continue;
        }
        let next = bytes.get(i + 1).copied().unwrap_or(0);
        if !(next.is_ascii_alphabetic() || next == b'/' || next == b'!' || next == b'?') {
            i += 1;
            continue;
        }
        push_text(&mut raw, &html[text_start..i]);

        if html[i..].starts_with("<!--") {
            i = html[i + 4..].find("-->").map_or(bytes.len(), |p| i + 4 + p + 3);
        } else if next == b'!' || next == b'?' {
            i = html[i..].find('>').map_or(bytes.len(), |p| i + p + 1);
        } else {
            let closing = next == b'/';
            let name_start = if closing { i + 2 } else { i + 1 };
            let name_end = html[name_start..]
                .find(|c: char| !(c.is_ascii_alphanumeric() || c == '-' || c == ':'))
                .map_or(bytes.len(), |p| name_start + p);
            let name = html[name_start..name_end].to_ascii_lowercase();
            let tag_end = find_tag_end(bytes, name_end);
            let self_closing = tag_end >= 2 && bytes[tag_end - 2] == b'/';
            i = tag_end;

            if BLOCK.contains(&name.as_str()) {
                raw.push('\n');
            }
            if !closing && !self_closing && SKIPPED.contains(&name.as_str()) {
                let (inner_end, after) = find_close(html, i, &name);
                if name == "title" && title.is_none() {
                    title = Some(collapse_inline(&decode_entities(&html[i..inner_end])));
                }
                i = after;
                raw.push('\n');
            }
        }
        text_start = i;
    }
    if text_start < bytes.len() {
        push_text(&mut raw, &html[text_start..]);
    }

    let body = raw
        .split('\n')
        .map(collapse_inline)
        .filter(|l| !l.is_empty())
        .collect::<Vec<_>>()
        .join("\n");
    ExtractedText { title: title.unwrap_or_default(), body }
}

/// Position just past the `>` closing a tag, honoring quoted attribute values.
fn find_tag_end(bytes: &[u8], mut i: usize) -> usize {
    let mut quote = 0u8;
    while i < bytes.len() {
        let b = bytes[i];
        if quote != 0 {
            if b == quote {
                quote = 0;
            }
        } else if b == b'"' || b == b'\'' {
            quote = b;
        } else if b == b'>' {
            return i + 1;
        }
        i += 1;
    }
    bytes.len()
}

/// Finds `</name` (case-insensitive) from `from`, counting nested same-name
/// openings. Returns (start of closing tag, position after it).
fn find_close(html: &str, from: usize, name: &str) -> (usize, usize) {
    let bytes = html.as_bytes();
    let open = format!("<{name}");
    let close = format!("</{name}");
    let raw_text = matches!(name, "script" | "style" | "title");
    let mut depth = 0usize;
    let mut pos = from;
    loop {
        let Some(c) = find_ci(bytes, close.as_bytes(), pos) else {
            return (html.len(), html.len());
        };
        if !raw_text {
            let mut k = pos;
            while let Some(o) = find_ci(&bytes[..c], open.as_bytes(), k) {
                let after = bytes.get(o + open.len()).copied().unwrap_or(b'>');
                if !after.is_ascii_alphanumeric() {
                    depth += 1;
                }
                k = o + open.len();
            }
        }
        let after = find_tag_end(bytes, c + close.len());
        if depth == 0 {
            return (c, after);
        }
        depth -= 1;
        pos = after;
    }
}

fn find_ci(hay: &[u8], needle: &[u8], from: usize) -> Option<usize> {
    if from >= hay.len() || needle.is_empty() {
        return None;
    }
    let first = needle[0].to_ascii_lowercase();
    let mut i = from;
    while i + needle.len() <= hay.len() {
        let j = i + memchr_ci(&hay[i..=hay.len() - needle.len()], first)?;
        if hay[j..j + needle.len()].eq_ignore_ascii_case(needle) {
            return Some(j);
        }
        i = j + 1;
    }
    None
}

fn memchr_ci(hay: &[u8], lower: u8) -> Option<usize> {
    hay.iter().position(|b| b.to_ascii_lowercase() == lower)
}

/// Source line breaks are ordinary whitespace; only block boundaries make lines.
fn push_text(out: &mut String, text: &str) {
    out.extend(decode_entities(text).chars().map(|c| if c == '\n' { ' ' } else { c }));
}

fn collapse_inline(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn decode_entities(s: &str) -> std::borrow::Cow<'_, str> {
    if !s.contains('&') {
        return s.into();
    }
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(amp) = rest.find('&') {
        out.push_str(&rest[..amp]);
        rest = &rest[amp..];
        let end = rest[1..]
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '#'))
            .map_or(rest.len(), |p| p + 1);
        let entity = &rest[1..end];
        let decoded = if let Some(num) = entity.strip_prefix('#') {
            let code = match num.strip_prefix(['x', 'X']) {
                Some(hex) => u32::from_str_radix(hex, 16).ok(),
                None => num.parse().ok(),
            };
            code.and_then(char::from_u32)
        } else {
            named_entity(entity)
        };
        match decoded {
            Some(c) => {
                out.push(c);
                rest = rest[end..].strip_prefix(';').unwrap_or(&rest[end..]);
            }
            None => {
                out.push('&');
                rest = &rest[1..];
            }
        }
    }
    out.push_str(rest);
    out.into()
}

fn named_entity(name: &str) -> Option<char> {
    Some(match name {
        "amp" | "AMP" => '&',
        "lt" | "LT" => '<',
        "gt" | "GT" => '>',
        "quot" | "QUOT" => '"',
        "apos" => '\'',
        "nbsp" => '\u{a0}',
        "copy" => '©',
        "reg" => '®',
        "trade" => '™',
        "mdash" => '—',
        "ndash" => '–',
        "hellip" => '…',
        "lsquo" => '‘',
        "rsquo" => '’',
        "ldquo" => '“',
        "rdquo" => '”',
        "laquo" => '«',
        "raquo" => '»',
        "middot" => '·',
        "bull" => '•',
        "euro" => '€',
        "pound" => '£',
        "yen" => '¥',
        "cent" => '¢',
        "deg" => '°',
        "times" => '×',
        "divide" => '÷',
        "sect" => '§',
        "para" => '¶',
        "eacute" => 'é',
        "egrave" => 'è',
        "aacute" => 'á',
        "agrave" => 'à',
        "ouml" => 'ö',
        "uuml" => 'ü',
        "auml" => 'ä',
        "szlig" => 'ß',
        _ => return None,
    })
}
