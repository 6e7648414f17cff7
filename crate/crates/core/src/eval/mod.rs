//! Intrinsic scoring of generated metadata against references.

pub mod aggregate;
pub mod bertscore;
pub mod levenshtein;

pub use aggregate::{
    competition_ranks, median, population_std, rank_combinations, score_combination, score_combination_detailed,
    score_pair, shortlist, CombinationScores, CombinationStats, RankedCombination, ScorePair,
};
pub use bertscore::{
    bertscore, bertscore_embedded, BertScore, EmbeddingProvider, HashEmbedder, HttpEmbedder, TableEmbedder,
    TokenEmbedding,
};
pub use levenshtein::levenshtein;
