//! Reference implementations written independently of the library, used
//! only to check it.

use std::collections::HashMap;

use base64::Engine;

/// Levenshtein distance from the full (m+1)×(n+1) table over chars.
pub fn levenshtein_table(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in d[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = d[i - 1][j - 1] + if a[i - 1] == b[j - 1] { 0 } else { 1 };
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    d[a.len()][b.len()]
}

/// Trains `merges` byte-pair merges on `corpus` by most-frequent pair
/// (ties to the smallest pair), returning a rank table in text form.
pub fn train_rank_table(corpus: &str, merges: usize) -> String {
    let engine = base64::engine::general_purpose::STANDARD;
    let mut vocab: Vec<Vec<u8>> = (0..=255u8).map(|b| vec![b]).collect();
    let mut words: Vec<Vec<Vec<u8>>> =
        corpus.split_inclusive(' ').map(|w| w.bytes().map(|b| vec![b]).collect()).collect();
    for _ in 0..merges {
        let mut counts: HashMap<(Vec<u8>, Vec<u8>), usize> = HashMap::new();
        for w in &words {
            for pair in w.windows(2) {
                *counts.entry((pair[0].clone(), pair[1].clone())).or_default() += 1;
            }
        }
        let Some(best) = counts
            .into_iter()
            .max_by(|(pa, ca), (pb, cb)| ca.cmp(cb).then_with(|| pb.cmp(pa)))
            .map(|(p, _)| p)
        else {
            break;
        };
        let merged: Vec<u8> = [best.0.clone(), best.1.clone()].concat();
        if !vocab.contains(&merged) {
            vocab.push(merged.clone());
        }
        for w in &mut words {
            let mut i = 0;
            while i + 1 < w.len() {
                if w[i] == best.0 && w[i + 1] == best.1 {
                    w[i] = merged.clone();
                    w.remove(i + 1);
                }
                i += 1;
            }
        }
    }
    vocab.iter().enumerate().map(|(rank, tok)| format!("{} {rank}\n", engine.encode(tok))).collect()
}

pub fn parse_rank_table(text: &str) -> HashMap<Vec<u8>, u32> {
    let engine = base64::engine::general_purpose::STANDARD;
    text.lines()
        .map(|l| {
            let (t, r) = l.split_once(' ').unwrap();
            (engine.decode(t).unwrap(), r.parse().unwrap())
        })
        .collect()
}

/// Lowest-rank-first merging, rescanning every adjacent pair at each step.
pub fn bpe_encode_piece(piece: &[u8], ranks: &HashMap<Vec<u8>, u32>) -> Vec<u32> {
    if let Some(&r) = ranks.get(piece) {
        return vec![r];
    }
    let mut parts: Vec<Vec<u8>> = piece.iter().map(|&b| vec![b]).collect();
    loop {
        let mut best: Option<(u32, usize)> = None;
        for i in 0..parts.len().saturating_sub(1) {
            let joined = [parts[i].as_slice(), parts[i + 1].as_slice()].concat();
            if let Some(&r) = ranks.get(&joined) {
                if best.is_none_or(|(br, _)| r < br) {
                    best = Some((r, i));
                }
            }
        }
        let Some((_, i)) = best else { break };
        let right = parts.remove(i + 1);
        parts[i].extend(right);
    }
    parts.iter().map(|p| ranks[p]).collect()
}

fn gamma_half_integer(k: u32) -> f64 {
    // Γ(k/2) from Γ(1) = 1, Γ(1/2) = √π and Γ(z + 1) = zΓ(z).
    let (mut z, mut g) = if k.is_multiple_of(2) { (1.0, 1.0) } else { (0.5, std::f64::consts::PI.sqrt()) };
    while z < k as f64 / 2.0 - 1e-9 {
        g *= z;
        z += 1.0;
    }
    g
}

/// Chi-square upper tail by composite Simpson integration of the density
/// after substituting t = s², which removes the singularity at 0 for df = 1.
pub fn chi_square_survival_integrated(x: f64, df: u32) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let k = df as f64;
    let norm = 2f64.powf(k / 2.0) * gamma_half_integer(df);
    // density in s: f(s²)·2s = 2 s^(k−1) e^(−s²/2) / norm
    let g = |s: f64| 2.0 * s.powf(k - 1.0) * (-s * s / 2.0).exp() / norm;
    let lo = x.sqrt();
    let hi = lo + 40.0;
    let n = 40_000usize;
    let h = (hi - lo) / n as f64;
    let mut sum = g(lo) + g(hi);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * g(lo + i as f64 * h);
    }
    sum * h / 3.0
}

/// Greedy-matching precision, recall and F1 from raw (unnormalized) vectors.
pub fn bertscore_oracle(candidate: &[Vec<f64>], reference: &[Vec<f64>]) -> (f64, f64, f64) {
    let cos = |a: &[f64], b: &[f64]| {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        dot / (a.iter().map(|x| x * x).sum::<f64>().sqrt() * b.iter().map(|x| x * x).sum::<f64>().sqrt())
    };
    let mut p = 0.0;
    for c in candidate {
        let mut best = f64::MIN;
        for r in reference {
            best = best.max(cos(c, r));
        }
        p += best;
    }
    p /= candidate.len() as f64;
    let mut r_sum = 0.0;
    for r in reference {
        let mut best = f64::MIN;
        for c in candidate {
            best = best.max(cos(c, r));
        }
        r_sum += best;
    }
    let r = r_sum / reference.len() as f64;
    let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f)
}
