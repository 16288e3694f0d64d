use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use facetkit_core::coherency::{read_labeled, LabeledRecord};
use facetkit_core::corpus::{load_generated_facets, parse_clarification_tsv, ClarificationRecord, RowError};

/// Writes files into the output directory through a temporary file in the
/// same directory, renamed into place once complete. Text outputs start
/// with a `#` line carrying the resolved run configuration.
pub struct Output {
    dir: PathBuf,
    header: String,
}

impl Output {
    pub fn new(dir: &Path, command: &str, config: &serde_json::Value) -> Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            header: format!("# facetkit {command} {config}\n"),
        })
    }

    pub fn header(&self) -> &str {
        &self.header
    }

    /// Writes `body` preceded by the config header.
    pub fn report(&self, name: &str, body: &str) -> Result<PathBuf> {
        self.raw(name, format!("{}{body}", self.header).as_bytes())
    }

    /// Writes `body` as is; for files other commands read back.
    pub fn raw(&self, name: &str, body: &[u8]) -> Result<PathBuf> {
        let target = self.dir.join(name);
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)
            .with_context(|| format!("creating temporary file in {}", self.dir.display()))?;
        tmp.write_all(body)?;
        tmp.as_file().sync_data()?;
        tmp.persist(&target)
            .with_context(|| format!("writing {}", target.display()))?;
        Ok(target)
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(BufReader::new(f))
}

/// Strips `#` lines so files written with a config header read back cleanly.
fn read_text(path: &Path) -> Result<String> {
    let mut text = String::new();
    open(path)?.read_to_string(&mut text)?;
    Ok(text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect())
}

fn warn_rows(path: &Path, errors: &[RowError]) {
    for e in errors {
        eprintln!("warning: {}: {e}", path.display());
    }
}

/// Loads clarification records from a TSV corpus (`.tsv`) or a JSON-lines
/// file, either full records as written by `ingest` or `{"query", "facets"}`
/// lines, in which case records are tagged with `provider`.
pub fn load_records(path: &Path, provider: &str) -> Result<Vec<ClarificationRecord>> {
    if path.extension().is_some_and(|e| e == "tsv") {
        let parsed = parse_clarification_tsv(open(path)?)
            .with_context(|| format!("parsing {}", path.display()))?;
        warn_rows(path, &parsed.errors);
        return Ok(parsed.records);
    }
    let text = read_text(path)?;
    let full: std::result::Result<Vec<ClarificationRecord>, _> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect();
    if let Ok(records) = full {
        return Ok(records);
    }
    let parsed = load_generated_facets(text.as_bytes(), provider);
    warn_rows(path, &parsed.errors);
    if parsed.records.is_empty() && !parsed.errors.is_empty() {
        bail!("{}: no readable records", path.display());
    }
    Ok(parsed.records)
}

pub fn load_labeled(path: &Path) -> Result<Vec<LabeledRecord>> {
    let text = read_text(path)?;
    let (records, errors) = read_labeled(text.as_bytes());
    warn_rows(path, &errors);
    if records.is_empty() {
        bail!("{}: no labeled records", path.display());
    }
    Ok(records)
}

pub fn load_text(path: &Path) -> Result<String> {
    read_text(path)
}

/// One number per line; blank and `#` lines are skipped.
pub fn load_numbers(path: &Path) -> Result<Vec<f64>> {
    read_text(path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim()
                .parse::<f64>()
                .with_context(|| format!("{} line {}: not a number", path.display(), i + 1))
        })
        .collect()
}

pub fn load_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    read_text(path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("{} line {}", path.display(), i + 1)))
        .collect()
}
