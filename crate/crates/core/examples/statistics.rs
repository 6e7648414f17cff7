//! Cochran's Q across three treatments and pairwise McNemar tests.

use warc2meta::stats::{cochran_q, mcnemar, mcnemar_counts, GradingMatrix, McNemarOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // One row per website, one column per treatment; 1 = acceptable.
    let rows = vec![
        vec![1, 1, 0],
        vec![1, 0, 0],
        vec![1, 1, 1],
        vec![0, 0, 0],
        vec![1, 1, 0],
        vec![1, 0, 1],
        vec![1, 1, 0],
        vec![1, 0, 0],
    ];
    let m = GradingMatrix::from_rows(&["Human", "Combo2", "Combo5"], &rows)?;
    println!("{}", cochran_q(&m)?.summary());
    for (a, b) in [("Human", "Combo2"), ("Human", "Combo5"), ("Combo2", "Combo5")] {
        let exact = McNemarOptions { correction: false, exact: true };
        println!("{a} vs {b}: {}", mcnemar(&m, a, b, exact)?.summary());
    }
    println!("b=15, c=5: {}", mcnemar_counts(15, 5, McNemarOptions::default())?.summary());
    println!("b=15, c=5 corrected: {}", mcnemar_counts(15, 5, McNemarOptions { correction: true, exact: false })?.summary());
    Ok(())
}
