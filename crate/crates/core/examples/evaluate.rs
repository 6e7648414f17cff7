//! Scores hand-written candidate metadata against references and ranks
//! the combinations by aggregated rank.

use warc2meta::eval::{bertscore, levenshtein, rank_combinations, score_combination, shortlist, HashEmbedder};
use warc2meta::llm::{GeneratedMetadata, Source};

fn meta(site: &str, source: Source, title: &str, abstract_text: &str) -> GeneratedMetadata {
    GeneratedMetadata { site_id: site.into(), source, title: title.into(), abstract_text: abstract_text.into(), model_name: None }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let embedder = HashEmbedder::default();
    println!("levenshtein(\"Acme Pte Ltd\", \"ACME Pte. Ltd.\") = {}", levenshtein("Acme Pte Ltd", "ACME Pte. Ltd."));
    println!("{:?}", bertscore("Acme sells tools in Singapore", "Acme sells hardware tools", &embedder)?);

    let refs = vec![
        meta("acme", Source::Human, "Acme Pte Ltd", "Acme sells hand tools and hardware in Singapore."),
        meta("beta", Source::Human, "Beta Marine", "Beta Marine builds and repairs boats."),
        meta("gamma", Source::Human, "Gamma Clinic", "Gamma Clinic offers family medicine."),
    ];
    let candidates = [
        ["Acme Pte Ltd", "Beta Marine", "Gamma Clinic"],
        ["Acme", "Beta Marine Services", "Gamma Family Clinic"],
        ["Welcome to Acme", "Home", "Gamma"],
    ];
    let mut all = Vec::new();
    for (id, titles) in candidates.iter().enumerate() {
        let source = Source::from_combination_id(id as u8).expect("valid id");
        let generated: Vec<_> = refs
            .iter()
            .zip(titles)
            .map(|(r, t)| GeneratedMetadata { source, title: t.to_string(), ..r.clone() })
            .collect();
        all.push(score_combination(&generated, &refs, &embedder)?);
    }
    let ranked = rank_combinations(&all)?;
    for r in &ranked {
        println!(
            "Combo{}  score {}  (lev median {:.1} rank {}, bs median {:.3} rank {}, std {:.3} rank {})",
            r.stats.combination_id, r.final_score, r.stats.lev_median, r.rank_lev, r.stats.bs_median, r.rank_bs, r.stats.bs_std, r.rank_std
        );
    }
    let picks: Vec<String> = shortlist(&ranked).iter().map(|r| format!("Combo{}", r.stats.combination_id)).collect();
    println!("shortlist: {}", picks.join(", "));
    Ok(())
}
