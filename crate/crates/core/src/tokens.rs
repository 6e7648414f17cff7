//! Token counting and the before/after cost comparison.
//!
//! Counting uses byte-level BPE over a rank table (one `base64-token rank`
//! pair per line, the format tiktoken ships). Without a table, a
//! four-characters-per-token estimate is used and reports say so.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use base64::Engine;
use num_rational::Ratio;
use num_traits::{Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::VocabularyLoadError;

/// `ceil(chars / 4)`.
pub fn estimate_tokens(text: &str) -> usize {
    text.chars().count().div_ceil(4)
}

/// Pre-tokenization close to the GPT-4o split: letter runs with an optional
/// leading non-letter, digit groups of up to three, punctuation runs, and
/// whitespace. Trailing-whitespace lookahead is applied in code.
pub const O200K_SPLIT: &str = concat!(
    r"[^\r\n\p{L}\p{N}]?[\p{Lu}\p{Lt}\p{Lm}\p{Lo}\p{M}]*[\p{Ll}\p{Lm}\p{Lo}\p{M}]+(?i:'s|'t|'re|'ve|'m|'ll|'d)?",
    r"|[^\r\n\p{L}\p{N}]?[\p{Lu}\p{Lt}\p{Lm}\p{Lo}\p{M}]+[\p{Ll}\p{Lm}\p{Lo}\p{M}]*(?i:'s|'t|'re|'ve|'m|'ll|'d)?",
    r"|\p{N}{1,3}",
    r"| ?[^\s\p{L}\p{N}]+[\r\n/]*",
    r"|\s*[\r\n]+",
    r"|\s+",
);

/// A loaded BPE vocabulary.
#[derive(Debug, Clone)]
pub struct Tokenizer {
    pub name: String,
    ranks: HashMap<Vec<u8>, u32>,
    decoder: HashMap<u32, Vec<u8>>,
    pub special_tokens: HashSet<String>,
    split: Option<Regex>,
}

impl Tokenizer {
    pub fn from_rank_file(path: &Path) -> Result<Self, VocabularyLoadError> {
        let text = std::fs::read_to_string(path)?;
        let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        Self::from_rank_text(name, &text, Some(O200K_SPLIT))
    }

    /// Parses a rank table. `split` is the pre-tokenization pattern; `None`
    /// merges over the whole input at once.
    pub fn from_rank_text(name: impl Into<String>, text: &str, split: Option<&str>) -> Result<Self, VocabularyLoadError> {
        let engine = base64::engine::general_purpose::STANDARD;
        let mut ranks = HashMap::new();
        let mut decoder = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let syntax = |reason: &str| VocabularyLoadError::Syntax { line: line_no, reason: reason.into() };
            let (token, rank) = line.trim().split_once(' ').ok_or_else(|| syntax("expected `<base64> <rank>`"))?;
            let bytes = engine.decode(token).map_err(|e| syntax(&e.to_string()))?;
            let rank: u32 = rank.trim().parse().map_err(|_| syntax("rank is not an integer"))?;
            if decoder.insert(rank, bytes.clone()).is_some() {
                return Err(VocabularyLoadError::DuplicateRank(rank));
            }
            if ranks.insert(bytes, rank).is_some() {
                return Err(VocabularyLoadError::DuplicateToken(line_no));
            }
        }
        if let Some(b) = (0..=255u8).find(|b| !ranks.contains_key(&vec![*b])) {
            return Err(VocabularyLoadError::MissingByte(b));
        }
        let split = split.map(Regex::new).transpose()?;
        Ok(Tokenizer { name: name.into(), ranks, decoder, special_tokens: HashSet::new(), split })
    }

    pub fn with_special_tokens<I: IntoIterator<Item = String>>(mut self, tokens: I) -> Self {
        self.special_tokens.extend(tokens);
        self
    }

    pub fn vocab_size(&self) -> usize {
        self.ranks.len()
    }

    /// Pieces the text is split into before merging.
    pub fn pieces<'a>(&self, text: &'a str) -> Vec<&'a str> {
        let Some(split) = &self.split else {
            return if text.is_empty() { vec![] } else { vec![text] };
        };
        let mut out = Vec::new();
        let mut pos = 0;
        while pos < text.len() {
            let Some(m) = split.find_at(text, pos) else { break };
            let (start, mut end) = (m.start(), m.end());
            if start > pos {
                out.push(&text[pos..start]);
            }
            let piece = &text[start..end];
            // `\s+(?!\S)`: a whitespace run leaves its last char to the next piece.
            if end < text.len()
                && piece.chars().count() > 1
                && piece.chars().all(char::is_whitespace)
                && !piece.contains(['\r', '\n'])
            {
                end -= piece.chars().next_back().map_or(0, char::len_utf8);
            }
            if end == start {
                end = start + piece.chars().next().map_or(1, char::len_utf8);
            }
            out.push(&text[start..end]);
            pos = end;
        }
        out
    }

    /// Token ids, treating special-token text as ordinary text.
    pub fn encode(&self, text: &str) -> Vec<u32> {
        let mut out = Vec::new();
        for piece in self.pieces(text) {
            let bytes = piece.as_bytes();
            match self.ranks.get(bytes) {
                Some(&r) => out.push(r),
                None => out.extend(self.merge(bytes)),
            }
        }
        out
    }

    pub fn decode(&self, ids: &[u32]) -> Vec<u8> {
        ids.iter().flat_map(|id| self.decoder.get(id).cloned().unwrap_or_default()).collect()
    }

    pub fn count(&self, text: &str) -> usize {
        self.encode(text).len()
    }

    /// Repeatedly merges the adjacent pair with the lowest rank (leftmost on
    /// ties). `bounds[i]` starts part `i`; `cache[i]` is the rank of parts
    /// `i` and `i + 1` joined.
    fn merge(&self, bytes: &[u8]) -> Vec<u32> {
        let rank_of = |bounds: &[usize], i: usize| -> u32 {
            if i + 2 < bounds.len() {
                self.ranks.get(&bytes[bounds[i]..bounds[i + 2]]).copied().unwrap_or(u32::MAX)
            } else {
                u32::MAX
            }
        };
        let mut bounds: Vec<usize> = (0..=bytes.len()).collect();
        let mut cache: Vec<u32> = (0..bounds.len()).map(|i| rank_of(&bounds, i)).collect();
        while let Some((i, &best)) = cache.iter().enumerate().min_by_key(|(i, r)| (**r, *i)) {
            if best == u32::MAX {
                break;
            }
            bounds.remove(i + 1);
            cache.remove(i + 1);
            cache[i] = rank_of(&bounds, i);
            if i > 0 {
                cache[i - 1] = rank_of(&bounds, i - 1);
            }
        }
        bounds.windows(2).map(|w| self.ranks[&bytes[w[0]..w[1]]]).collect()
    }
}

/// BPE when a vocabulary is configured, otherwise the character estimate.
#[derive(Debug, Clone, Default)]
pub enum TokenCounter {
    Bpe(Tokenizer),
    #[default]
    Estimate,
}

impl TokenCounter {
    pub fn from_optional_path(path: Option<&Path>) -> Result<Self, VocabularyLoadError> {
        Ok(match path {
            Some(p) => TokenCounter::Bpe(Tokenizer::from_rank_file(p)?),
            None => TokenCounter::Estimate,
        })
    }

    pub fn count(&self, text: &str) -> usize {
        match self {
            TokenCounter::Bpe(t) => t.count(text),
            TokenCounter::Estimate => estimate_tokens(text),
        }
    }

    pub fn is_approximate(&self) -> bool {
        matches!(self, TokenCounter::Estimate)
    }

    /// Longest prefix of `text` (on a char boundary) within `max_tokens`.
    pub fn truncate<'a>(&self, text: &'a str, max_tokens: usize) -> &'a str {
        match self {
            TokenCounter::Estimate => match text.char_indices().nth(max_tokens.saturating_mul(4)) {
                Some((i, _)) => &text[..i],
                None => text,
            },
            TokenCounter::Bpe(t) => {
                let ids = t.encode(text);
                if ids.len() <= max_tokens {
                    return text;
                }
                let mut len = t.decode(&ids[..max_tokens]).len().min(text.len());
                while !text.is_char_boundary(len) {
                    len -= 1;
                }
                &text[..len]
            }
        }
    }
}

/// Exact currency amount.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Amount(pub Ratio<i128>);

impl Amount {
    pub fn zero() -> Self {
        Amount(Ratio::zero())
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    /// Rounded half away from zero to `digits` decimals.
    pub fn to_fixed(&self, digits: u32) -> String {
        let scale = 10i128.pow(digits);
        let scaled = (self.0 * Ratio::from_integer(scale)).round().to_integer();
        let sign = if scaled < 0 { "-" } else { "" };
        let abs = scaled.unsigned_abs();
        if digits == 0 {
            return format!("{sign}{abs}");
        }
        let scale = scale as u128;
        format!("{sign}{}.{:0width$}", abs / scale, abs % scale, width = digits as usize)
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }
}

impl FromStr for Amount {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (neg, digits) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s),
        };
        let (int, frac) = digits.split_once('.').unwrap_or((digits, ""));
        if int.is_empty() && frac.is_empty()
            || !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit())
            || frac.len() > 18
        {
            return Err(format!("not a decimal amount: {s:?}"));
        }
        let numer: i128 = format!("{int}{frac}").parse().map_err(|_| format!("amount out of range: {s:?}"))?;
        let value = Ratio::new(numer, 10i128.pow(frac.len() as u32));
        Ok(Amount(if neg { -value } else { value }))
    }
}

impl fmt::Display for Amount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_fixed(6))
    }
}

impl Serialize for Amount {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_fixed(6))
    }
}

impl<'de> Deserialize<'de> for Amount {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Int(i64),
            Float(f64),
        }
        match Raw::deserialize(d)? {
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
            Raw::Int(i) => Ok(Amount(Ratio::from_integer(i as i128))),
            Raw::Float(f) => f.to_string().parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Prices per million tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Prices {
    pub price_per_million_input: Amount,
    pub price_per_million_output: Amount,
}

impl Default for Prices {
    /// GPT-4o list prices at the time of writing (USD 2.50 in / 10.00 out).
    fn default() -> Self {
        Prices {
            price_per_million_input: "2.50".parse().unwrap(),
            price_per_million_output: "10.00".parse().unwrap(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub tokens_before: u64,
    pub tokens_after: u64,
    pub reduction_ratio: f64,
    pub cost_before: Amount,
    pub cost_after: Amount,
    pub price_per_million_input: Amount,
    pub price_per_million_output: Amount,
    /// Counts come from the character estimate, not a vocabulary.
    pub approximate: bool,
    /// The before corpus had no tokens; the ratio is reported as 0.
    pub degenerate: bool,
}

pub fn input_cost(tokens: u64, prices: &Prices) -> Amount {
    Amount(Ratio::from_integer(tokens as i128) * prices.price_per_million_input.0 / Ratio::from_integer(1_000_000))
}

pub fn reduction_report<B, A>(before_texts: &[B], after_texts: &[A], prices: &Prices, counter: &TokenCounter) -> CostReport
where
    B: AsRef<str> + Sync,
    A: AsRef<str> + Sync,
{
    let sum = |texts: &[&str]| -> u64 { texts.par_iter().map(|t| counter.count(t) as u64).sum() };
    let before: Vec<&str> = before_texts.iter().map(AsRef::as_ref).collect();
    let after: Vec<&str> = after_texts.iter().map(AsRef::as_ref).collect();
    let tokens_before = sum(&before);
    let tokens_after = sum(&after);
    let degenerate = tokens_before == 0;
    let reduction_ratio = if degenerate {
        0.0
    } else {
        (1.0 - tokens_after as f64 / tokens_before as f64).clamp(0.0, 1.0)
    };
    CostReport {
        tokens_before,
        tokens_after,
        reduction_ratio,
        cost_before: input_cost(tokens_before, prices),
        cost_after: input_cost(tokens_after, prices),
        price_per_million_input: prices.price_per_million_input,
        price_per_million_output: prices.price_per_million_output,
        approximate: counter.is_approximate(),
        degenerate,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn estimate() {
        assert_eq!(estimate_tokens(""), 0);
        assert_eq!(estimate_tokens("123456789"), 3);
        assert_eq!(estimate_tokens("éééé"), 1);
    }

    #[test]
    fn amounts() {
        let a: Amount = "2.50".parse().unwrap();
        assert_eq!(a.to_fixed(6), "2.500000");
        assert_eq!("0.0000005".parse::<Amount>().unwrap().to_fixed(6), "0.000001");
        assert_eq!("-1.25".parse::<Amount>().unwrap().to_fixed(1), "-1.3");
        assert!("1.2.3".parse::<Amount>().is_err());
        assert!("".parse::<Amount>().is_err());
        let from_float: Amount = serde_json::from_str("2.5").unwrap();
        assert_eq!(from_float, a);
    }

    #[test]
    fn report_ratio_and_cost() {
        let prices = Prices::default();
        // 4,000,000 chars → 1,000,000 estimated tokens; 4,000 chars → 1,000.
        let before = vec!["a".repeat(4_000_000)];
        let after = vec!["a".repeat(4_000)];
        let r = reduction_report(&before, &after, &prices, &TokenCounter::Estimate);
        assert_eq!((r.tokens_before, r.tokens_after), (1_000_000, 1_000));
        assert!((r.reduction_ratio - 0.999).abs() < 1e-12);
        assert_eq!(r.cost_before, "2.5".parse().unwrap());
        assert_eq!(r.cost_after, "0.0025".parse().unwrap());
        assert!(r.approximate);
    }

    #[test]
    fn report_guards() {
        let p = Prices::default();
        let same = reduction_report(&["abcd"], &["abcd"], &p, &TokenCounter::Estimate);
        assert_eq!(same.reduction_ratio, 0.0);
        assert!(!same.degenerate);
        let empty: [&str; 0] = [];
        let r = reduction_report(&empty, &empty, &p, &TokenCounter::Estimate);
        assert!(r.degenerate);
        assert_eq!(r.reduction_ratio, 0.0);
    }

    #[test]
    fn rank_file_errors() {
        let engine = base64::engine::general_purpose::STANDARD;
        let bytes: String = (0..=255u8).map(|b| format!("{} {}\n", engine.encode([b]), b)).collect();
        assert!(Tokenizer::from_rank_text("t", &bytes, None).is_ok());
        let missing: String = (0..=254u8).map(|b| format!("{} {}\n", engine.encode([b]), b)).collect();
        assert!(matches!(Tokenizer::from_rank_text("t", &missing, None), Err(VocabularyLoadError::MissingByte(255))));
        let dup = format!("{bytes}{} 0\n", engine.encode(b"ab"));
        assert!(matches!(Tokenizer::from_rank_text("t", &dup, None), Err(VocabularyLoadError::DuplicateRank(0))));
        assert!(matches!(Tokenizer::from_rank_text("t", "!!! x", None), Err(VocabularyLoadError::Syntax { line: 1, .. })));
    }

    #[test]
    fn split_pieces() {
        let engine = base64::engine::general_purpose::STANDARD;
        let bytes: String = (0..=255u8).map(|b| format!("{} {}\n", engine.encode([b]), b)).collect();
        let t = Tokenizer::from_rank_text("t", &bytes, Some(O200K_SPLIT)).unwrap();
        assert_eq!(t.pieces("Hello world"), ["Hello", " world"]);
        assert_eq!(t.pieces("a   b"), ["a", "  ", " b"]);
        assert_eq!(t.pieces("12345 it's"), ["123", "45", " it's"]);
        assert_eq!(t.pieces("end  "), ["end", "  "]);
        assert_eq!(t.pieces("x\n\ny"), ["x", "\n\n", "y"]);
        assert!(t.pieces("").is_empty());
    }

    #[test]
    fn truncate_estimate() {
        let c = TokenCounter::Estimate;
        assert_eq!(c.truncate("abcdefghij", 2), "abcdefgh");
        assert_eq!(c.truncate("abc", 2), "abc");
    }
}
