use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bertscore::{bertscore, EmbeddingProvider};
use super::levenshtein::levenshtein;
use crate::error::EvalError;
use crate::heuristics::HeuristicId;
use crate::llm::{GeneratedMetadata, PromptVariant, Source};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorePair {
    pub site_id: String,
    pub title_levenshtein: usize,
    pub title_bertscore_f1: f64,
    pub abstract_bertscore_f1: f64,
}

pub fn score_pair(
    generated: &GeneratedMetadata,
    reference: &GeneratedMetadata,
    provider: &dyn EmbeddingProvider,
) -> Result<ScorePair, EvalError> {
    Ok(ScorePair {
        site_id: generated.site_id.clone(),
        title_levenshtein: levenshtein(&generated.title, &reference.title),
        title_bertscore_f1: bertscore(&generated.title, &reference.title, provider)?.f1,
        abstract_bertscore_f1: bertscore(&generated.abstract_text, &reference.abstract_text, provider)?.f1,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinationStats {
    pub combination_id: u8,
    pub prompt: PromptVariant,
    pub heuristic: HeuristicId,
    pub lev_median: f64,
    /// Median abstract BERTScore F1.
    pub bs_median: f64,
    /// Population standard deviation of abstract BERTScore F1.
    pub bs_std: f64,
    pub n: usize,
}

/// Per-site scores plus the join bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinationScores {
    pub stats: CombinationStats,
    pub pairs: Vec<ScorePair>,
    /// Generated rows with no reference, and references with no generated row.
    pub unmatched_generated: usize,
    pub unmatched_reference: usize,
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len().is_multiple_of(2) {
        (v[mid - 1] + v[mid]) / 2.0
    } else {
        v[mid]
    }
}

pub fn population_std(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt()
}

fn combination_of(rows: &[GeneratedMetadata]) -> Result<(PromptVariant, HeuristicId), EvalError> {
    let first = rows.first().ok_or(EvalError::NoOverlap)?;
    if let Some(other) = rows.iter().find(|r| r.source != first.source) {
        return Err(EvalError::MixedSources(first.source.to_string(), other.source.to_string()));
    }
    match first.source {
        Source::Combo(p, h) => Ok((p, h)),
        Source::Human => Err(EvalError::NotACombination),
    }
}

/// Scores one combination's output against the reference set, joined on
/// `site_id`.
pub fn score_combination_detailed(
    generated: &[GeneratedMetadata],
    reference: &[GeneratedMetadata],
    provider: &dyn EmbeddingProvider,
) -> Result<CombinationScores, EvalError> {
    let (prompt, heuristic) = combination_of(generated)?;
    let refs: HashMap<&str, &GeneratedMetadata> = reference.iter().map(|r| (r.site_id.as_str(), r)).collect();
    let joined: Vec<(&GeneratedMetadata, &GeneratedMetadata)> = generated
        .iter()
        .filter_map(|g| refs.get(g.site_id.as_str()).map(|r| (g, *r)))
        .collect();
    if joined.is_empty() {
        return Err(EvalError::NoOverlap);
    }
    let pairs = joined
        .par_iter()
        .map(|(g, r)| score_pair(g, r, provider))
        .collect::<Result<Vec<_>, _>>()?;

    let lev: Vec<f64> = pairs.iter().map(|p| p.title_levenshtein as f64).collect();
    let bs: Vec<f64> = pairs.iter().map(|p| p.abstract_bertscore_f1).collect();
    let stats = CombinationStats {
        combination_id: crate::llm::combination_id(prompt, heuristic),
        prompt,
        heuristic,
        lev_median: median(&lev),
        bs_median: median(&bs),
        bs_std: population_std(&bs),
        n: pairs.len(),
    };
    let generated_ids: std::collections::HashSet<&str> = generated.iter().map(|g| g.site_id.as_str()).collect();
    Ok(CombinationScores {
        stats,
        unmatched_generated: generated.len() - joined.len(),
        unmatched_reference: refs.keys().filter(|id| !generated_ids.contains(**id)).count(),
        pairs,
    })
}

pub fn score_combination(
    generated: &[GeneratedMetadata],
    reference: &[GeneratedMetadata],
    provider: &dyn EmbeddingProvider,
) -> Result<CombinationStats, EvalError> {
    score_combination_detailed(generated, reference, provider).map(|s| s.stats)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedCombination {
    pub stats: CombinationStats,
    pub rank_lev: usize,
    pub rank_bs: usize,
    pub rank_std: usize,
    pub rank_sum: usize,
    pub final_score: usize,
}

/// Competition ranking ("1224"): rank = 1 + number of strictly better values.
pub fn competition_ranks<T, F>(values: &[T], better: F) -> Vec<usize>
where
    F: Fn(&T, &T) -> bool,
{
    values
        .iter()
        .map(|v| 1 + values.iter().filter(|w| better(w, v)).count())
        .collect()
}

pub fn rank_combinations(all_stats: &[CombinationStats]) -> Result<Vec<RankedCombination>, EvalError> {
    if all_stats.len() < 2 {
        return Err(EvalError::InsufficientCombinations(all_stats.len()));
    }
    let rank_lev = competition_ranks(all_stats, |a, b| a.lev_median < b.lev_median);
    let rank_bs = competition_ranks(all_stats, |a, b| a.bs_median > b.bs_median);
    let rank_std = competition_ranks(all_stats, |a, b| a.bs_std < b.bs_std);
    let sums: Vec<usize> = (0..all_stats.len()).map(|i| rank_lev[i] + rank_bs[i] + rank_std[i]).collect();
    let finals = competition_ranks(&sums, |a, b| a < b);

    let mut ranked: Vec<RankedCombination> = all_stats
        .iter()
        .enumerate()
        .map(|(i, s)| RankedCombination {
            stats: s.clone(),
            rank_lev: rank_lev[i],
            rank_bs: rank_bs[i],
            rank_std: rank_std[i],
            rank_sum: sums[i],
            final_score: finals[i],
        })
        .collect();
    ranked.sort_by_key(|r| (r.final_score, r.stats.combination_id));
    Ok(ranked)
}

/// Combinations holding the best final score.
pub fn shortlist(ranked: &[RankedCombination]) -> Vec<&RankedCombination> {
    let best = ranked.iter().map(|r| r.final_score).min();
    ranked.iter().filter(|r| Some(r.final_score) == best).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::bertscore::HashEmbedder;

    fn stats(id: u8, lev: f64, bs: f64, std: f64) -> CombinationStats {
        let Source::Combo(prompt, heuristic) = Source::from_combination_id(id).unwrap() else { unreachable!() };
        CombinationStats { combination_id: id, prompt, heuristic, lev_median: lev, bs_median: bs, bs_std: std, n: 1 }
    }

    fn meta(site: &str, source: Source, title: &str, abs: &str) -> GeneratedMetadata {
        GeneratedMetadata {
            site_id: site.into(),
            source,
            title: title.into(),
            abstract_text: abs.into(),
            model_name: None,
        }
    }

    #[test]
    fn three_way_ranking() {
        let ranked = rank_combinations(&[stats(0, 2.0, 0.90, 0.01), stats(1, 5.0, 0.80, 0.02), stats(2, 1.0, 0.95, 0.03)])
            .unwrap();
        let got: Vec<(u8, usize, usize)> =
            ranked.iter().map(|r| (r.stats.combination_id, r.rank_sum, r.final_score)).collect();
        assert_eq!(got, [(0, 5, 1), (2, 5, 1), (1, 8, 3)]);
    }

    #[test]
    fn total_tie_and_dominance() {
        let all: Vec<_> = (0..6).map(|i| stats(i, 1.0, 0.9, 0.1)).collect();
        assert!(rank_combinations(&all).unwrap().iter().all(|r| r.final_score == 1));
        let ranked = rank_combinations(&[stats(0, 1.0, 0.9, 0.1), stats(3, 2.0, 0.8, 0.2)]).unwrap();
        assert_eq!(ranked.iter().map(|r| r.final_score).collect::<Vec<_>>(), [1, 2]);
        assert!(matches!(rank_combinations(&all[..1]), Err(EvalError::InsufficientCombinations(1))));
    }

    #[test]
    fn medians() {
        assert_eq!(median(&[2.0, 4.0]), 3.0);
        assert_eq!(median(&[5.0, 1.0, 3.0]), 3.0);
        assert_eq!(population_std(&[1.0, 1.0]), 0.0);
        assert_eq!(population_std(&[0.0, 2.0]), 1.0);
    }

    #[test]
    fn identical_outputs() {
        let combo = Source::Combo(PromptVariant::Rules, HeuristicId::ShortestUrl);
        let refs = vec![
            meta("a", Source::Human, "Acme Ltd", "Acme sells tools."),
            meta("b", Source::Human, "Beta Co", "Beta makes boats."),
        ];
        let gen: Vec<_> = refs.iter().map(|r| GeneratedMetadata { source: combo, ..r.clone() }).collect();
        let s = score_combination(&gen, &refs, &HashEmbedder::default()).unwrap();
        assert_eq!(s.combination_id, 2);
        assert_eq!(s.lev_median, 0.0);
        assert!((s.bs_median - 1.0).abs() < 1e-9);
        assert!(s.bs_std < 1e-9);
    }

    #[test]
    fn join_errors() {
        let combo = Source::Combo(PromptVariant::NoRules, HeuristicId::AboutPriority);
        let refs = vec![meta("a", Source::Human, "A", "a")];
        let gen = vec![meta("z", combo, "Z", "z")];
        assert!(matches!(score_combination(&gen, &refs, &HashEmbedder::default()), Err(EvalError::NoOverlap)));
        let mixed = vec![meta("a", combo, "A", "a"), meta("a", Source::Human, "A", "a")];
        assert!(matches!(
            score_combination(&mixed, &refs, &HashEmbedder::default()),
            Err(EvalError::MixedSources(..))
        ));
    }
}
