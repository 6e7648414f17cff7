//! Title/abstract generation through an OpenAI-compatible chat endpoint.

mod batch;
mod client;
mod prompt;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use batch::{run_batch, BatchRow, Checkpoint};
pub use client::{generate_metadata, parse_reply, ChatClient, ClientConfig, Generation, MetadataGenerator};
pub use prompt::{build_prompt, ChatMessage, PromptVariant, Role, CATALOGUER_PROMPT, SUMMARY_RULES};

use crate::heuristics::HeuristicId;

/// Who produced a title/abstract pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Source {
    Human,
    Combo(PromptVariant, HeuristicId),
}

impl Source {
    /// Combination number: with-rules variants are even, heuristic 1 first.
    pub fn combination_id(self) -> Option<u8> {
        match self {
            Source::Human => None,
            Source::Combo(p, h) => Some(combination_id(p, h)),
        }
    }

    pub fn from_combination_id(id: u8) -> Option<Self> {
        let heuristic = HeuristicId::try_from(id / 2 + 1).ok()?;
        let prompt = if id.is_multiple_of(2) { PromptVariant::Rules } else { PromptVariant::NoRules };
        Some(Source::Combo(prompt, heuristic))
    }

    /// All six prompt × heuristic combinations in id order.
    pub fn combinations() -> impl Iterator<Item = Source> {
        (0..6).filter_map(Source::from_combination_id)
    }
}

pub fn combination_id(prompt: PromptVariant, heuristic: HeuristicId) -> u8 {
    2 * (heuristic.code() - 1) + if prompt == PromptVariant::Rules { 0 } else { 1 }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.combination_id() {
            None => f.write_str("Human"),
            Some(id) => write!(f, "Combo{id}"),
        }
    }
}

impl FromStr for Source {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("human") {
            return Ok(Source::Human);
        }
        t.strip_prefix("Combo")
            .or_else(|| t.strip_prefix("combo"))
            .and_then(|n| n.parse::<u8>().ok())
            .and_then(Source::from_combination_id)
            .ok_or_else(|| format!("unknown source label {s:?}"))
    }
}

impl Serialize for Source {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Source {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedMetadata {
    pub site_id: String,
    pub source: Source,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_name: Option<String>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combination_numbering() {
        use HeuristicId::*;
        use PromptVariant::*;
        let expected = [(Rules, AboutPriority), (NoRules, AboutPriority), (Rules, ShortestUrl), (NoRules, ShortestUrl), (Rules, ShortestUrlFiltered), (NoRules, ShortestUrlFiltered)];
        for (id, (p, h)) in expected.into_iter().enumerate() {
            assert_eq!(combination_id(p, h), id as u8);
            assert_eq!(Source::from_combination_id(id as u8), Some(Source::Combo(p, h)));
        }
        assert_eq!(Source::from_combination_id(6), None);
        assert_eq!(Source::combinations().count(), 6);
    }

    #[test]
    fn source_labels() {
        assert_eq!("Combo2".parse::<Source>().unwrap().to_string(), "Combo2");
        assert_eq!("human".parse::<Source>().unwrap(), Source::Human);
        assert!("Combo9".parse::<Source>().is_err());
        let json = serde_json::to_string(&Source::Combo(PromptVariant::NoRules, HeuristicId::ShortestUrlFiltered)).unwrap();
        assert_eq!(json, "\"Combo5\"");
    }
}
