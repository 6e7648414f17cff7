use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

use serde::{Deserialize, Serialize};

use super::client::MetadataGenerator;
use super::{GeneratedMetadata, Source};
use crate::error::LlmError;
use crate::heuristics::Selection;

/// One output line of a generation run. Exactly one of the metadata fields
/// pair or `error` is meaningful.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchRow {
    pub site_id: String,
    pub source: Source,
    #[serde(default)]
    pub title: String,
    #[serde(rename = "abstract", default)]
    pub abstract_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_name: Option<String>,
    #[serde(default)]
    pub retry_count: u32,
}

impl BatchRow {
    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }

    pub fn failed(selection: &Selection, source: Source, error: &LlmError) -> Self {
        BatchRow {
            site_id: selection.site_id.clone(),
            source,
            title: String::new(),
            abstract_text: String::new(),
            error: Some(error.to_string()),
            model_name: None,
            retry_count: 0,
        }
    }

    pub fn metadata(&self) -> Option<GeneratedMetadata> {
        self.is_ok().then(|| GeneratedMetadata {
            site_id: self.site_id.clone(),
            source: self.source,
            title: self.title.clone(),
            abstract_text: self.abstract_text.clone(),
            model_name: self.model_name.clone(),
        })
    }
}

/// Append-only JSONL record of finished rows. Successful rows are not
/// requested again on a rerun; failed ones are.
#[derive(Debug)]
pub struct Checkpoint {
    path: PathBuf,
    done: HashMap<(String, Source), BatchRow>,
    file: File,
}

impl Checkpoint {
    pub fn open(path: &Path) -> Result<Self, LlmError> {
        let err = |e: std::io::Error| LlmError::Checkpoint(format!("{}: {e}", path.display()));
        let mut done = HashMap::new();
        if path.exists() {
            for (i, line) in BufReader::new(File::open(path).map_err(err)?).lines().enumerate() {
                let line = line.map_err(err)?;
                if line.trim().is_empty() {
                    continue;
                }
                // A torn final line from an interrupted write is ignored.
                match serde_json::from_str::<BatchRow>(&line) {
                    Ok(row) if row.is_ok() => {
                        done.insert((row.site_id.clone(), row.source), row);
                    }
                    Ok(_) => {}
                    Err(e) => log::warn!("{}:{}: skipping unreadable checkpoint line: {e}", path.display(), i + 1),
                }
            }
        }
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(err)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path).map_err(err)?;
        Ok(Checkpoint { path: path.to_path_buf(), done, file })
    }

    pub fn get(&self, site_id: &str, source: Source) -> Option<&BatchRow> {
        self.done.get(&(site_id.to_string(), source))
    }

    pub fn completed(&self) -> usize {
        self.done.len()
    }

    pub fn record(&mut self, row: &BatchRow) -> Result<(), LlmError> {
        let mut line = serde_json::to_string(row).expect("row serializes");
        line.push('\n');
        self.file
            .write_all(line.as_bytes())
            .and_then(|_| self.file.flush())
            .map_err(|e| LlmError::Checkpoint(format!("{}: {e}", self.path.display())))?;
        if row.is_ok() {
            self.done.insert((row.site_id.clone(), row.source), row.clone());
        }
        Ok(())
    }
}

/// Generates metadata for every selection with at most `max_in_flight`
/// requests outstanding. Output order follows input order; per-item
/// failures become error rows.
pub fn run_batch(
    selections: &[Selection],
    generator: &MetadataGenerator,
    mut checkpoint: Option<&mut Checkpoint>,
) -> Vec<BatchRow> {
    let mut rows: Vec<Option<BatchRow>> = vec![None; selections.len()];
    let mut pending = Vec::new();
    for (i, sel) in selections.iter().enumerate() {
        let source = Source::Combo(generator.variant, sel.heuristic);
        match checkpoint.as_ref().and_then(|c| c.get(&sel.site_id, source)) {
            Some(row) => rows[i] = Some(row.clone()),
            None => pending.push(i),
        }
    }

    let workers = generator.client.config().max_in_flight.max(1).min(pending.len().max(1));
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(usize, BatchRow)>();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let (next, pending) = (&next, &pending);
            scope.spawn(move || loop {
                let k = next.fetch_add(1, Ordering::SeqCst);
                let Some(&i) = pending.get(k) else { break };
                let sel = &selections[i];
                let source = Source::Combo(generator.variant, sel.heuristic);
                let row = match generator.generate(sel) {
                    Ok(g) => BatchRow {
                        site_id: g.metadata.site_id,
                        source,
                        title: g.metadata.title,
                        abstract_text: g.metadata.abstract_text,
                        error: None,
                        model_name: g.metadata.model_name,
                        retry_count: g.retry_count,
                    },
                    Err(e) => BatchRow::failed(sel, source, &e),
                };
                if tx.send((i, row)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for (i, row) in rx {
            if let Some(cp) = checkpoint.as_deref_mut() {
                if let Err(e) = cp.record(&row) {
                    log::error!("{e}");
                }
            }
            rows[i] = Some(row);
        }
    });

    rows.into_iter().map(|r| r.expect("every selection produces a row")).collect()
}
