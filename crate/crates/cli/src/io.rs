//! File formats the commands read and write.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use infodemic_core::corpus::{Corpus, Split};
use infodemic_core::ensemble::ProbVector;
use infodemic_core::features::EmbeddingTable;
use infodemic_core::Label;

use crate::error::{CliError, Result};

pub const PREDICTIONS_HEADER: &str = "id\tlabel\tp_fake";

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

/// Reads a dataset TSV. A file with no content at all is an empty corpus.
pub fn read_corpus(path: &Path, split: Split, expect_labels: bool) -> Result<Corpus> {
    let content = read_text(path)?;
    if content.trim().is_empty() {
        return Ok(Corpus::new(Vec::new(), split)?);
    }
    Corpus::parse_tsv(&content, split, expect_labels).map_err(|source| CliError::Parse { path: path.into(), source })
}

pub fn read_embeddings(path: &Path) -> Result<EmbeddingTable> {
    let content = read_text(path)?;
    let (table, duplicates) =
        EmbeddingTable::parse(&content, None).map_err(|source| CliError::Parse { path: path.into(), source })?;
    if !duplicates.is_empty() {
        log::warn!("{}: ignored {} duplicate token line(s), first at line {}", path.display(), duplicates.len(), duplicates[0]);
    }
    log::info!("loaded {} vectors of dimension {} from {}", table.len(), table.dim(), path.display());
    Ok(table)
}

/// Writes through a sibling temporary file and a rename, so a failed run
/// never leaves a partial output behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp_name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    tmp_name.push(".partial");
    let tmp = path.with_file_name(tmp_name);
    let result = fs::File::create(&tmp).and_then(|mut f| {
        f.write_all(bytes)?;
        f.sync_all()
    });
    if let Err(e) = result.and_then(|_| fs::rename(&tmp, path)) {
        let _ = fs::remove_file(&tmp);
        return Err(CliError::io(path, e));
    }
    Ok(())
}

/// Writes to `path`, or to stdout when there is none.
pub fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).and_then(|_| out.flush()).map_err(|e| CliError::io("<stdout>", e))
        }
    }
}

pub fn format_predictions(ids: &[&str], probs: &[ProbVector], labels: &[Label]) -> String {
    let mut out = String::from(PREDICTIONS_HEADER);
    out.push('\n');
    for ((id, p), label) in ids.iter().zip(probs).zip(labels) {
        let _ = writeln!(out, "{id}\t{label}\t{}", p.fake);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub id: String,
    pub label: Label,
    pub p_fake: Option<f64>,
}

/// Parses a predictions file. The `p_fake` column may be absent.
pub fn parse_predictions(path: &Path, content: &str) -> Result<Vec<Prediction>> {
    let bad = |line: usize, msg: String| CliError::Data(format!("{}:{line}: {msg}", path.display()));
    let mut lines = content.lines().enumerate();
    let Some((_, header)) = lines.next() else { return Ok(Vec::new()) };
    let columns: Vec<&str> = header.trim_end_matches('\r').split('\t').collect();
    if columns.len() < 2 || columns[0] != "id" || columns[1] != "label" {
        return Err(bad(1, format!("expected header `{PREDICTIONS_HEADER}`")));
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != columns.len() {
            return Err(bad(i + 1, format!("expected {} columns, found {}", columns.len(), fields.len())));
        }
        let label = Label::parse(fields[1]).ok_or_else(|| bad(i + 1, format!("unknown label `{}`", fields[1])))?;
        let p_fake = match fields.get(2) {
            Some(v) => Some(v.parse::<f64>().map_err(|_| bad(i + 1, format!("`{v}` is not a probability")))?),
            None => None,
        };
        out.push(Prediction { id: fields[0].to_string(), label, p_fake });
    }
    Ok(out)
}

/// Fixed six-decimal rendering used in every metrics table.
pub fn metric(v: f64) -> String {
    format!("{v:.6}")
}

/// Replaces tabs and newlines so free text fits in one TSV cell.
pub fn tsv_cell(text: &str) -> String {
    text.chars().map(|c| if matches!(c, '\t' | '\n' | '\r') { ' ' } else { c }).collect()
}
