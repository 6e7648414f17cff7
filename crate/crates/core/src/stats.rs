//! Pass/fail grading matrices with Cochran's Q and McNemar tests.

use std::collections::HashMap;
use std::fmt;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::StatsError;

pub const DEFAULT_ALPHA: f64 = 0.05;

/// Items × treatments matrix of binary outcomes (`true` = pass).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GradingMatrix {
    pub subjects: Vec<String>,
    pub treatments: Vec<String>,
    pub cells: Vec<Vec<bool>>,
    /// Graders behind each cell, when the matrix came from a grading sheet.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graders: Option<Vec<Vec<Vec<String>>>>,
    /// Items dropped for lacking a verdict under some treatment.
    #[serde(default)]
    pub dropped_items: Vec<String>,
}

impl GradingMatrix {
    pub fn new(subjects: Vec<String>, treatments: Vec<String>, cells: Vec<Vec<bool>>) -> Result<Self, StatsError> {
        if treatments.len() < 2 {
            return Err(StatsError::TooFewTreatments { needed: 2, found: treatments.len() });
        }
        if cells.is_empty() {
            return Err(StatsError::EmptyAfterFiltering);
        }
        if cells.len() != subjects.len() || cells.iter().any(|r| r.len() != treatments.len()) {
            return Err(StatsError::MalformedCsv("matrix shape does not match its labels".into()));
        }
        Ok(GradingMatrix { subjects, treatments, cells, graders: None, dropped_items: Vec::new() })
    }

    /// Builds a matrix from 0/1 rows with generated item ids.
    pub fn from_rows<S: AsRef<str>>(treatments: &[S], rows: &[Vec<u8>]) -> Result<Self, StatsError> {
        GradingMatrix::new(
            (1..=rows.len()).map(|i| format!("item{i}")).collect(),
            treatments.iter().map(|t| t.as_ref().to_string()).collect(),
            rows.iter().map(|r| r.iter().map(|&v| v != 0).collect()).collect(),
        )
    }

    pub fn k(&self) -> usize {
        self.treatments.len()
    }

    pub fn treatment_index(&self, label: &str) -> Result<usize, StatsError> {
        self.treatments
            .iter()
            .position(|t| t == label)
            .ok_or_else(|| StatsError::UnknownTreatment(label.to_string()))
    }
}

#[derive(Debug, Deserialize)]
struct GradingRow {
    item_id: String,
    source: String,
    grader_id: String,
    verdict: String,
}

fn parse_verdict(v: &str) -> Option<bool> {
    match v.trim().to_ascii_lowercase().as_str() {
        "pass" => Some(true),
        "fail" => Some(false),
        _ => None,
    }
}

/// Majority vote; a tie counts as a fail.
pub fn majority(verdicts: &[bool]) -> bool {
    let passes = verdicts.iter().filter(|&&v| v).count();
    2 * passes > verdicts.len()
}

pub fn ingest_grading(path: &Path) -> Result<GradingMatrix, StatsError> {
    read_grading(std::fs::File::open(path)?)
}

/// Reads a grading sheet with columns `item_id, source, grader_id, verdict`
/// and pivots it to items × sources.
pub fn read_grading<R: Read>(reader: R) -> Result<GradingMatrix, StatsError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| StatsError::MalformedCsv(e.to_string()))?.clone();
    for col in ["item_id", "source", "grader_id", "verdict"] {
        if !headers.iter().any(|h| h == col) {
            return Err(StatsError::MalformedCsv(format!("missing column {col:?}")));
        }
    }

    let mut items: Vec<String> = Vec::new();
    let mut sources: Vec<String> = Vec::new();
    let mut votes: HashMap<(usize, usize), (Vec<bool>, Vec<String>)> = HashMap::new();
    for record in rdr.records() {
        let record = record.map_err(|e| StatsError::MalformedCsv(e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        let row: GradingRow = record
            .deserialize(Some(&headers))
            .map_err(|e| StatsError::MalformedCsv(format!("line {line}: {e}")))?;
        let verdict = parse_verdict(&row.verdict).ok_or_else(|| StatsError::UnknownVerdict {
            verdict: row.verdict.clone(),
            line,
        })?;
        let i = index_of(&mut items, &row.item_id);
        let j = index_of(&mut sources, &row.source);
        let cell = votes.entry((i, j)).or_default();
        cell.0.push(verdict);
        cell.1.push(row.grader_id);
    }
    if sources.len() < 2 && !items.is_empty() {
        return Err(StatsError::TooFewTreatments { needed: 2, found: sources.len() });
    }

    let mut subjects = Vec::new();
    let mut cells = Vec::new();
    let mut graders = Vec::new();
    let mut dropped_items = Vec::new();
    for (i, item) in items.iter().enumerate() {
        let row: Option<Vec<&(Vec<bool>, Vec<String>)>> = (0..sources.len()).map(|j| votes.get(&(i, j))).collect();
        match row {
            Some(row) => {
                subjects.push(item.clone());
                cells.push(row.iter().map(|c| majority(&c.0)).collect());
                graders.push(row.iter().map(|c| c.1.clone()).collect());
            }
            None => dropped_items.push(item.clone()),
        }
    }
    if !dropped_items.is_empty() {
        log::warn!("dropped {} incomplete item(s): {}", dropped_items.len(), dropped_items.join(", "));
    }
    if cells.is_empty() {
        return Err(StatsError::EmptyAfterFiltering);
    }
    let mut m = GradingMatrix::new(subjects, sources, cells)?;
    m.graders = Some(graders);
    m.dropped_items = dropped_items;
    Ok(m)
}

fn index_of(labels: &mut Vec<String>, label: &str) -> usize {
    labels.iter().position(|l| l == label).unwrap_or_else(|| {
        labels.push(label.to_string());
        labels.len() - 1
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TestName {
    CochranQ,
    McNemar,
}

impl fmt::Display for TestName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TestName::CochranQ => "Cochran's Q",
            TestName::McNemar => "McNemar",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    #[serde(rename = "test")]
    pub test_name: TestName,
    pub statistic: f64,
    pub df: u32,
    pub p_value: f64,
    pub alpha: f64,
    pub reject_null: bool,
    /// p-value from the exact binomial tail rather than chi-square.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub exact: bool,
}

impl TestResult {
    fn new(test_name: TestName, statistic: f64, df: u32, p_value: f64, alpha: f64, exact: bool) -> Self {
        let p_value = p_value.clamp(0.0, 1.0);
        TestResult { test_name, statistic, df, p_value, alpha, reject_null: p_value < alpha, exact }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self.reject_null = self.p_value < alpha;
        self
    }

    pub fn summary(&self) -> String {
        format!(
            "{} = {:.4} (df {}), p = {:.4}{}: {} the null hypothesis at alpha = {}",
            self.test_name,
            self.statistic,
            self.df,
            self.p_value,
            if self.exact { " (exact binomial)" } else { "" },
            if self.reject_null { "reject" } else { "fail to reject" },
            self.alpha
        )
    }
}

/// Cochran's Q over all treatments of `m`.
pub fn cochran_q(m: &GradingMatrix) -> Result<TestResult, StatsError> {
    let k = m.k();
    if k < 2 {
        return Err(StatsError::TooFewTreatments { needed: 2, found: k });
    }
    let col_totals: Vec<f64> = (0..k).map(|j| m.cells.iter().filter(|r| r[j]).count() as f64).collect();
    let row_totals: Vec<f64> = m.cells.iter().map(|r| r.iter().filter(|&&c| c).count() as f64).collect();
    let t: f64 = row_totals.iter().sum();
    let kf = k as f64;
    let denominator = kf * t - row_totals.iter().map(|l| l * l).sum::<f64>();
    if denominator == 0.0 {
        return Err(StatsError::DegenerateMatrix);
    }
    let q = (kf - 1.0) * (kf * col_totals.iter().map(|g| g * g).sum::<f64>() - t * t) / denominator;
    let q = q.max(0.0);
    let df = (k - 1) as u32;
    Ok(TestResult::new(TestName::CochranQ, q, df, chi_square_survival(q, df), DEFAULT_ALPHA, false))
}

/// Discordant counts (a pass & b fail, a fail & b pass).
pub fn discordant(m: &GradingMatrix, a: &str, b: &str) -> Result<(u64, u64), StatsError> {
    let (ia, ib) = (m.treatment_index(a)?, m.treatment_index(b)?);
    let count = |x: bool| m.cells.iter().filter(|r| r[ia] == x && r[ib] != x).count() as u64;
    Ok((count(true), count(false)))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct McNemarOptions {
    /// Subtract 1 from |b − c| before squaring.
    pub correction: bool,
    /// Use the exact binomial p-value when b + c < 25.
    pub exact: bool,
}

pub const EXACT_THRESHOLD: u64 = 25;

pub fn mcnemar(m: &GradingMatrix, a: &str, b: &str, options: McNemarOptions) -> Result<TestResult, StatsError> {
    let (nb, nc) = discordant(m, a, b)?;
    mcnemar_counts(nb, nc, options)
}

pub fn mcnemar_counts(b: u64, c: u64, options: McNemarOptions) -> Result<TestResult, StatsError> {
    let n = b + c;
    if n == 0 {
        return Err(StatsError::NoDiscordantPairs);
    }
    let diff = b.abs_diff(c) as f64 - if options.correction { 1.0 } else { 0.0 };
    let statistic = (diff.max(0.0)).powi(2) / n as f64;
    let exact = options.exact && n < EXACT_THRESHOLD;
    let p = if exact { exact_binomial_two_sided(b.min(c), n) } else { chi_square_survival(statistic, 1) };
    Ok(TestResult::new(TestName::McNemar, statistic, 1, p, DEFAULT_ALPHA, exact))
}

/// Two-sided binomial tail at rate ½: `min(1, 2·P(X ≤ k))`, X ~ Bin(n, ½).
pub fn exact_binomial_two_sided(k: u64, n: u64) -> f64 {
    let k = k.min(n - k);
    let mut term = (0.5f64).powi(n as i32);
    let mut tail = 0.0;
    for i in 0..=k {
        tail += term;
        term *= (n - i) as f64 / (i + 1) as f64;
    }
    (2.0 * tail).min(1.0)
}

/// Upper tail of the chi-square distribution, `Q(df/2, x/2)`.
pub fn chi_square_survival(x: f64, df: u32) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if df == 0 {
        return 0.0;
    }
    regularized_gamma_q(df as f64 / 2.0, x / 2.0)
}

const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// ln Γ(a) for a > 0 (Lanczos, g = 7).
pub fn ln_gamma(a: f64) -> f64 {
    if a < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * a).sin()).ln() - ln_gamma(1.0 - a);
    }
    let a = a - 1.0;
    let mut sum = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        sum += c / (a + i as f64);
    }
    let t = a + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (a + 0.5) * t.ln() - t + sum.ln()
}

/// Regularized upper incomplete gamma Q(a, x).
pub fn regularized_gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let log_prefix = a * x.ln() - x - ln_gamma(a);
    if x < a + 1.0 {
        // P(a, x) by its power series.
        let (mut term, mut sum, mut ap) = (1.0 / a, 1.0 / a, a);
        for _ in 0..1000 {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * 1e-17 {
                break;
            }
        }
        (1.0 - sum * log_prefix.exp()).max(0.0)
    } else {
        // Q(a, x) by its continued fraction (modified Lentz).
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..1000 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < 1e-17 {
                break;
            }
        }
        (log_prefix.exp() * h).min(1.0)
    }
}
