use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use url::Url;

use crate::error::InvalidUrl;

/// Canonical form of a page URL used for deduplication and page selection.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NormalizedUrl {
    pub scheme: String,
    pub host: String,
    /// Non-default port, if any.
    pub port: Option<u16>,
    pub path: String,
    pub query: String,
    pub dedup_key: String,
}

impl NormalizedUrl {
    pub fn as_str(&self) -> &str {
        &self.dedup_key
    }

    /// Length in characters; the measure used by the shortest-URL heuristics.
    pub fn char_len(&self) -> usize {
        self.dedup_key.chars().count()
    }
}

impl fmt::Display for NormalizedUrl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.dedup_key)
    }
}

impl Serialize for NormalizedUrl {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.dedup_key)
    }
}

impl<'de> Deserialize<'de> for NormalizedUrl {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        normalize_url(&raw).map_err(serde::de::Error::custom)
    }
}

/// URL canonicalizer; the tracking-parameter list can be extended.
#[derive(Debug, Clone, Default)]
pub struct UrlNormalizer {
    extra_tracking_params: Vec<String>,
}

impl UrlNormalizer {
    pub fn with_tracking_params<I, S>(params: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        UrlNormalizer {
            extra_tracking_params: params.into_iter().map(|p| p.into().to_ascii_lowercase()).collect(),
        }
    }

    fn is_tracking(&self, name: &str) -> bool {
        let name = name.to_ascii_lowercase();
        name.starts_with("utm_")
            || name == "fbclid"
            || name == "gclid"
            || self.extra_tracking_params.contains(&name)
    }

    pub fn normalize(&self, raw: &str) -> Result<NormalizedUrl, InvalidUrl> {
        let invalid = |reason: &str| InvalidUrl { url: raw.to_string(), reason: reason.to_string() };
        let url = Url::parse(raw.trim()).map_err(|e| invalid(&e.to_string()))?;
        let host = url.host_str().ok_or_else(|| invalid("no host"))?;

        let scheme = url.scheme().to_ascii_lowercase();
        let mut host = host.to_ascii_lowercase();
        while let Some(rest) = host.strip_prefix("www.") {
            if rest.is_empty() {
                break;
            }
            host = rest.to_string();
        }
        let port = url.port();

        let mut path = url.path().to_string();
        while path.len() > 1 && path.ends_with('/') {
            path.pop();
        }
        if path.is_empty() {
            path.push('/');
        }

        let query = url
            .query()
            .unwrap_or("")
            .split('&')
            .filter(|kv| !kv.is_empty())
            .filter(|kv| !self.is_tracking(kv.split('=').next().unwrap_or(kv)))
            .collect::<Vec<_>>()
            .join("&");

        let mut dedup_key = format!("{scheme}://{host}");
        if let Some(p) = port {
            dedup_key.push_str(&format!(":{p}"));
        }
        dedup_key.push_str(&path);
        if !query.is_empty() {
            dedup_key.push('?');
            dedup_key.push_str(&query);
        }

        Ok(NormalizedUrl { scheme, host, port, path, query, dedup_key })
    }
}

/// Normalizes with the default tracking-parameter list (`utm_*`, `fbclid`, `gclid`).
pub fn normalize_url(raw: &str) -> Result<NormalizedUrl, InvalidUrl> {
    UrlNormalizer::default().normalize(raw)
}
