//! Page-selection heuristics that reduce a site to one block of content.
//!
//! 1. About-page priority, falling back to the shortest URL.
//! 2. Shortest URL.
//! 3. Shortest URL with regex reduction filters applied to its text.

use std::fmt;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::HeuristicError;
use crate::ingest::{NormalizedUrl, PageRecord, SiteDocument};
use crate::tokens::estimate_tokens;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum HeuristicId {
    AboutPriority = 1,
    ShortestUrl = 2,
    ShortestUrlFiltered = 3,
}

impl HeuristicId {
    pub const ALL: [HeuristicId; 3] = [HeuristicId::AboutPriority, HeuristicId::ShortestUrl, HeuristicId::ShortestUrlFiltered];

    pub fn code(self) -> u8 {
        self as u8
    }
}

impl TryFrom<u8> for HeuristicId {
    type Error = HeuristicError;

    fn try_from(code: u8) -> Result<Self, Self::Error> {
        match code {
            1 => Ok(HeuristicId::AboutPriority),
            2 => Ok(HeuristicId::ShortestUrl),
            3 => Ok(HeuristicId::ShortestUrlFiltered),
            other => Err(HeuristicError::UnknownHeuristic(other)),
        }
    }
}

impl From<HeuristicId> for u8 {
    fn from(h: HeuristicId) -> u8 {
        h.code()
    }
}

impl fmt::Display for HeuristicId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selection {
    pub site_id: String,
    pub heuristic: HeuristicId,
    pub chosen_url: NormalizedUrl,
    /// Scheme and host of the site's landing page.
    pub site_url: String,
    pub content: String,
    pub original_token_estimate: usize,
    pub reduced_token_estimate: usize,
}

/// A regex substitution applied globally to the selected text.
#[derive(Debug, Clone)]
pub struct FilterRule {
    pub name: String,
    pub pattern: String,
    pub replacement: String,
    regex: Regex,
}

impl FilterRule {
    pub fn new(name: impl Into<String>, pattern: impl Into<String>, replacement: impl Into<String>) -> Result<Self, HeuristicError> {
        let name = name.into();
        let pattern = pattern.into();
        let regex = Regex::new(&pattern)
            .map_err(|source| HeuristicError::InvalidPattern { name: name.clone(), source })?;
        Ok(FilterRule { name, pattern, replacement: replacement.into(), regex })
    }

    pub fn apply(&self, text: &str) -> String {
        self.regex.replace_all(text, self.replacement.as_str()).into_owned()
    }

    /// Collapses every whitespace run, newlines included, to one space.
    pub fn collapse_all_whitespace() -> Self {
        FilterRule::new("collapse_all_whitespace", r"\s+", " ").unwrap()
    }
}

/// The built-in reduction rules, in application order.
///
/// Lines are block boundaries from extraction. Every rule either deletes
/// whole lines or shortens text within a line, so the set never lengthens
/// its input and a second pass changes nothing.
pub fn default_rules() -> Vec<FilterRule> {
    static RULES: OnceLock<Vec<FilterRule>> = OnceLock::new();
    RULES.get_or_init(build_default_rules).clone()
}

fn build_default_rules() -> Vec<FilterRule> {
    const LINE_END: &str = r"(?:\n|$)";
    let rules = [
        ("symbol_runs", r"[^\p{L}\p{N}\s]{6,}".to_string(), " "),
        (
            "boilerplate_lines",
            format!(
                r"(?mi)^[^\n]*(?:©|\(c\)[^\S\n]*\d{{4}}|\bcopyright\b|\ball\s+rights\s+reserved\b|\bcookie\s+(?:policy|settings|preferences|consent)\b|\buses?\s+cookies\b|\baccept\s+(?:all\s+)?cookies\b)[^\n]*{LINE_END}"
            ),
            "",
        ),
        ("nav_lines", format!(r"(?m)^[^\n]*[^\S\n][|•·»][^\S\n][^\n]*{LINE_END}"), ""),
        ("short_lines", format!(r"(?m)^[^\w\n]*(?:\w+[^\w\n]+)?\w*[^\w\n]*{LINE_END}"), ""),
        ("inline_whitespace", r"[^\S\n]+".to_string(), " "),
        ("trim_lines", r"(?m)^[^\S\n]+|[^\S\n]+$".to_string(), ""),
        ("blank_lines", r"\n{2,}".to_string(), "\n"),
        ("trim_text", r"^\n+|\n+$".to_string(), ""),
    ];
    rules
        .into_iter()
        .map(|(name, pattern, replacement)| FilterRule::new(name, pattern, replacement).expect("default rule compiles"))
        .collect()
}

/// Loads rules from `name<TAB>pattern<TAB>replacement` lines. Blank lines
/// and lines starting with `#` are ignored; `\n`, `\t` and `\\` in the
/// replacement are unescaped.
pub fn load_rules(path: &Path) -> Result<Vec<FilterRule>, HeuristicError> {
    parse_rules(&std::fs::read_to_string(path)?)
}

pub fn parse_rules(text: &str) -> Result<Vec<FilterRule>, HeuristicError> {
    let mut rules = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.splitn(3, '\t');
        let name = parts.next().unwrap_or_default();
        let pattern = parts
            .next()
            .ok_or_else(|| HeuristicError::RuleSyntax { line: i + 1, reason: "expected name<TAB>pattern<TAB>replacement".into() })?;
        let replacement = unescape(parts.next().unwrap_or(""));
        rules.push(FilterRule::new(name, pattern, replacement)?);
    }
    Ok(rules)
}

fn unescape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('n') => out.push('\n'),
            Some('t') => out.push('\t'),
            Some('\\') => out.push('\\'),
            Some(other) => {
                out.push('\\');
                out.push(other);
            }
            None => out.push('\\'),
        }
    }
    out
}

pub fn apply_reduction_filters(text: &str, rules: &[FilterRule]) -> String {
    rules.iter().fold(text.to_string(), |acc, rule| rule.apply(&acc))
}

pub const DEFAULT_ABOUT_TOKENS: &[&str] = &["about", "about-us", "aboutus", "about_us", "who-we-are"];

/// Heuristic settings: which path segments mark an About page, and the
/// reduction rules for heuristic 3.
#[derive(Debug, Clone)]
pub struct Selector {
    pub about_tokens: Vec<String>,
    pub rules: Vec<FilterRule>,
}

impl Default for Selector {
    fn default() -> Self {
        Selector {
            about_tokens: DEFAULT_ABOUT_TOKENS.iter().map(|t| t.to_string()).collect(),
            rules: default_rules(),
        }
    }
}

fn url_order(a: &PageRecord, b: &PageRecord) -> std::cmp::Ordering {
    a.url.char_len().cmp(&b.url.char_len()).then_with(|| a.url.as_str().cmp(b.url.as_str()))
}

fn selection(site: &SiteDocument, heuristic: HeuristicId, page: &PageRecord, content: String) -> Selection {
    Selection {
        site_id: site.site_id.clone(),
        heuristic,
        chosen_url: page.url.clone(),
        site_url: site.site_url(),
        original_token_estimate: estimate_tokens(&page.body_text),
        reduced_token_estimate: estimate_tokens(&content),
        content,
    }
}

impl Selector {
    pub fn new(about_tokens: Vec<String>, rules: Vec<FilterRule>) -> Self {
        Selector { about_tokens: about_tokens.into_iter().map(|t| t.to_lowercase()).collect(), rules }
    }

    fn is_about(&self, url: &NormalizedUrl) -> bool {
        url.path.split('/').filter(|s| !s.is_empty()).any(|segment| {
            let segment = segment.to_lowercase();
            let stem = match segment.rsplit_once('.') {
                Some((stem, ext)) if !stem.is_empty() && ext.chars().all(|c| c.is_ascii_alphanumeric()) => stem,
                _ => segment.as_str(),
            };
            self.about_tokens.iter().any(|t| t == stem)
        })
    }

    fn shortest_page(site: &SiteDocument) -> Result<&PageRecord, HeuristicError> {
        site.pages.iter().min_by(|a, b| url_order(a, b)).ok_or(HeuristicError::EmptySite)
    }

    pub fn about_priority(&self, site: &SiteDocument) -> Result<Selection, HeuristicError> {
        let page = match site.pages.iter().filter(|p| self.is_about(&p.url)).min_by(|a, b| url_order(a, b)) {
            Some(p) => p,
            None => Self::shortest_page(site)?,
        };
        Ok(selection(site, HeuristicId::AboutPriority, page, page.body_text.clone()))
    }

    pub fn shortest_url(&self, site: &SiteDocument) -> Result<Selection, HeuristicError> {
        let page = Self::shortest_page(site)?;
        Ok(selection(site, HeuristicId::ShortestUrl, page, page.body_text.clone()))
    }

    pub fn shortest_url_filtered(&self, site: &SiteDocument) -> Result<Selection, HeuristicError> {
        let page = Self::shortest_page(site)?;
        let content = apply_reduction_filters(&page.body_text, &self.rules);
        Ok(selection(site, HeuristicId::ShortestUrlFiltered, page, content))
    }

    pub fn select(&self, heuristic: HeuristicId, site: &SiteDocument) -> Result<Selection, HeuristicError> {
        match heuristic {
            HeuristicId::AboutPriority => self.about_priority(site),
            HeuristicId::ShortestUrl => self.shortest_url(site),
            HeuristicId::ShortestUrlFiltered => self.shortest_url_filtered(site),
        }
    }
}

pub fn select_about_priority(site: &SiteDocument) -> Result<Selection, HeuristicError> {
    Selector::default().about_priority(site)
}

pub fn select_shortest_url(site: &SiteDocument) -> Result<Selection, HeuristicError> {
    Selector::default().shortest_url(site)
}

pub fn select_shortest_url_filtered(site: &SiteDocument, rules: &[FilterRule]) -> Result<Selection, HeuristicError> {
    Selector { rules: rules.to_vec(), ..Selector::default() }.shortest_url_filtered(site)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::normalize_url;
    use proptest::prelude::*;

    fn site(urls: &[&str]) -> SiteDocument {
        let pages = urls
            .iter()
            .map(|u| PageRecord::new(normalize_url(u).unwrap(), *u, "", format!("content of {u}"), Some(200)))
            .collect();
        SiteDocument {
            source_file: "fixture.warc".into(),
            site_id: "fixture".into(),
            pages,
            rejected_count: 0,
            duplicate_count: 0,
            diagnostics: Default::default(),
        }
    }

    #[test]
    fn about_page_preferred() {
        let s = site(&["https://a.sg/", "https://a.sg/about", "https://a.sg/products"]);
        assert_eq!(select_about_priority(&s).unwrap().chosen_url.path, "/about");
    }

    #[test]
    fn about_falls_back_to_shortest() {
        let s = site(&["https://a.sg/products", "https://a.sg/"]);
        let sel = select_about_priority(&s).unwrap();
        assert_eq!(sel.chosen_url.path, "/");
        assert_eq!(sel.chosen_url, select_shortest_url(&s).unwrap().chosen_url);
    }

    #[test]
    fn shorter_about_wins() {
        let s = site(&["https://a.sg/about-us", "https://a.sg/about"]);
        assert_eq!(select_about_priority(&s).unwrap().chosen_url.path, "/about");
    }

    #[test]
    fn about_segment_matching() {
        let s = site(&["https://a.sg/", "https://a.sg/en/About-Us.html", "https://a.sg/aboutness"]);
        assert_eq!(select_about_priority(&s).unwrap().chosen_url.path, "/en/About-Us.html");
        let custom = Selector::new(vec!["Company".into()], default_rules());
        let s = site(&["https://a.sg/", "https://a.sg/company"]);
        assert_eq!(custom.about_priority(&s).unwrap().chosen_url.path, "/company");
    }

    #[test]
    fn shortest_by_length_then_lexicographic() {
        let s = site(&["https://a.sg/x", "https://a.sg/"]);
        assert_eq!(select_shortest_url(&s).unwrap().chosen_url.as_str(), "https://a.sg/");
        let s = site(&["https://a.sg/b", "https://a.sg/a"]);
        assert_eq!(select_shortest_url(&s).unwrap().chosen_url.as_str(), "https://a.sg/a");
        let s = site(&["https://a.sg/only"]);
        assert_eq!(select_shortest_url(&s).unwrap().content, "content of https://a.sg/only");
    }

    #[test]
    fn empty_site() {
        let s = site(&[]);
        for h in HeuristicId::ALL {
            assert!(matches!(Selector::default().select(h, &s), Err(HeuristicError::EmptySite)));
        }
    }

    #[test]
    fn whitespace_rule() {
        assert_eq!(apply_reduction_filters("a   b\n\nc", &[FilterRule::collapse_all_whitespace()]), "a b c");
    }

    #[test]
    fn nav_line_dropped() {
        let out = apply_reduction_filters(
            "Home | Shop | Cart\nWe build precision instruments for laboratories",
            &default_rules(),
        );
        assert_eq!(out, "We build precision instruments for laboratories");
    }

    #[test]
    fn defaults_on_edge_inputs() {
        assert_eq!(apply_reduction_filters("", &default_rules()), "");
        let text = "Contact\nWe have served clients since 1990.\n© 2024 Acme Pte Ltd\nThis site uses cookies to improve things.\nOur   team ======== builds   tools for labs.";
        assert_eq!(
            apply_reduction_filters(text, &default_rules()),
            "We have served clients since 1990.\nOur team builds tools for labs."
        );
    }

    #[test]
    fn filtered_selection_smaller() {
        let mut s = site(&["https://a.sg/", "https://a.sg/long/page"]);
        s.pages[0].body_text = "Home | Shop | Cart | Login | Register\nWe build precision instruments for laboratories".into();
        let plain = select_shortest_url(&s).unwrap();
        let filtered = select_shortest_url_filtered(&s, &default_rules()).unwrap();
        assert_eq!(plain.chosen_url, filtered.chosen_url);
        assert!(filtered.reduced_token_estimate < plain.reduced_token_estimate);
        assert_eq!(filtered.original_token_estimate, plain.original_token_estimate);
    }

    #[test]
    fn minimal_content_fixed_point() {
        let mut s = site(&["https://a.sg/"]);
        s.pages[0].body_text = "We build precision instruments for laboratories".into();
        let sel = select_shortest_url_filtered(&s, &default_rules()).unwrap();
        assert_eq!(sel.reduced_token_estimate, sel.original_token_estimate);
    }

    #[test]
    fn rule_file_parsing() {
        let rules = parse_rules("# comment\n\nphone\t\\+65 \\d{4} \\d{4}\t[phone]\nnl\t;\t\\n\n").unwrap();
        assert_eq!(rules.len(), 2);
        assert_eq!(apply_reduction_filters("call +65 6123 4567;ok", &rules), "call [phone]\nok");
        assert!(matches!(parse_rules("bad\t(unclosed\t"), Err(HeuristicError::InvalidPattern { .. })));
        assert!(matches!(parse_rules("no-tab-here"), Err(HeuristicError::RuleSyntax { line: 1, .. })));
    }

    #[test]
    fn heuristic_codes() {
        for h in HeuristicId::ALL {
            assert_eq!(HeuristicId::try_from(h.code()).unwrap(), h);
        }
        assert!(HeuristicId::try_from(4).is_err());
        assert_eq!(serde_json::to_string(&HeuristicId::ShortestUrl).unwrap(), "2");
    }

    fn text_strategy() -> impl Strategy<Value = String> {
        let token = prop::sample::select(vec![
            "we", "build", "tools", "Home", "|", "•", "»", "©", "2024", "cookie", "policy", "uses", "cookies",
            "-------", "==", "***", "  ", "\t", "\n", "\n\n", " ", "(c)", "all", "rights", "reserved", "Lab", "é",
        ]);
        prop::collection::vec(token, 0..40).prop_map(|t| t.join(" "))
    }

    proptest! {
        #[test]
        fn defaults_idempotent_and_shrinking(text in text_strategy()) {
            let rules = default_rules();
            let once = apply_reduction_filters(&text, &rules);
            prop_assert!(once.len() <= text.len());
            prop_assert_eq!(apply_reduction_filters(&once, &rules), once);
        }

        #[test]
        fn each_default_rule_shrinks(text in text_strategy()) {
            for rule in default_rules() {
                prop_assert!(rule.apply(&text).len() <= text.len(), "{}", rule.name);
            }
        }

        #[test]
        fn chosen_url_in_site(n in 1usize..8, seed in 0u64..1000) {
            let urls: Vec<String> = (0..n).map(|i| format!("https://a.sg/{}", "p".repeat((i * 7 + seed as usize) % 5))).collect();
            let refs: Vec<&str> = urls.iter().map(String::as_str).collect();
            let s = site(&refs);
            for h in HeuristicId::ALL {
                let sel = Selector::default().select(h, &s).unwrap();
                prop_assert!(s.pages.iter().any(|p| p.url == sel.chosen_url));
                prop_assert!(sel.reduced_token_estimate <= sel.original_token_estimate);
            }
        }
    }
}
