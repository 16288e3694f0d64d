//! Clarification records and their on-disk formats.
//!
//! A [`ClarificationRecord`] is one query together with its clarifying
//! question, an unordered [`FacetSet`] and optionally the retrieved
//! documents. Ground-truth records come from header-driven TSV files
//! (MIMICS layout); generated facet sets and document lists come from
//! line-delimited JSON.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Default cap on retrieved documents kept per query.
pub const MAX_DOCUMENTS: usize = 10;

/// Upper bound on facets in a MIMICS clarification pane.
pub const MAX_PANE_OPTIONS: usize = 5;

/// Column names required in a clarification TSV header.
pub const REQUIRED_COLUMNS: [&str; 7] = [
    "query", "question", "option_1", "option_2", "option_3", "option_4", "option_5",
];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CorpusError {
    #[error("query text is empty")]
    EmptyQuery,
    #[error("facet text has no terms: {0:?}")]
    EmptyFacet(String),
    #[error("facet set is empty")]
    EmptyFacetSet,
    #[error("missing required header column(s): {0}")]
    MissingHeader(String),
    #[error("i/o error: {0}")]
    Io(String),
}

/// Splits text into casefolded alphanumeric runs.
///
/// Every maximal run of non-alphanumeric characters is a separator, so
/// hyphens and punctuation split words and digits are kept as terms.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

/// Canonical comparison form of a facet: trimmed, whitespace collapsed,
/// casefolded.
pub fn normalize_facet(text: &str) -> String {
    text.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Query {
    text: String,
    id: String,
}

impl Query {
    pub fn new(text: impl Into<String>) -> Result<Self, CorpusError> {
        let text = text.into();
        let normalized = normalize_facet(&text);
        if normalized.is_empty() {
            return Err(CorpusError::EmptyQuery);
        }
        let digest = Sha256::digest(normalized.as_bytes());
        let id = digest[..8].iter().map(|b| format!("{b:02x}")).collect();
        Ok(Self { text, id })
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    /// Stable identifier: first 64 bits of SHA-256 over the normalized text.
    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn normalized(&self) -> String {
        normalize_facet(&self.text)
    }

    pub fn terms(&self) -> Vec<String> {
        tokenize(&self.text)
    }
}

impl TryFrom<String> for Query {
    type Error = CorpusError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        Query::new(value)
    }
}

impl From<Query> for String {
    fn from(q: Query) -> Self {
        q.text
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

/// A single facet: the raw option text and its term list.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Facet {
    raw: String,
    terms: Vec<String>,
}

impl Facet {
    pub fn new(raw: impl Into<String>) -> Result<Self, CorpusError> {
        let raw = raw.into();
        let terms = tokenize(&raw);
        if terms.is_empty() {
            return Err(CorpusError::EmptyFacet(raw));
        }
        Ok(Self { raw, terms })
    }

    pub fn raw(&self) -> &str {
        &self.raw
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn normalized(&self) -> String {
        normalize_facet(&self.raw)
    }

    fn canonical_cmp(&self, other: &Self) -> Ordering {
        self.normalized()
            .cmp(&other.normalized())
            .then_with(|| self.raw.cmp(&other.raw))
    }
}

impl fmt::Display for Facet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.raw)
    }
}

/// Unordered collection of facets.
///
/// Facets are stored in canonical order (normalized text, then raw text), so
/// two sets built from permutations of the same options are equal and
/// iterate identically.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct FacetSet {
    facets: Vec<Facet>,
}

impl FacetSet {
    pub fn new(mut facets: Vec<Facet>) -> Result<Self, CorpusError> {
        if facets.is_empty() {
            return Err(CorpusError::EmptyFacetSet);
        }
        facets.sort_by(Facet::canonical_cmp);
        Ok(Self { facets })
    }

    pub fn from_texts<I, S>(texts: I) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let facets = texts
            .into_iter()
            .map(Facet::new)
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(facets)
    }

    /// Number of facets, `M`.
    pub fn len(&self) -> usize {
        self.facets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facets.is_empty()
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Facet> {
        self.facets.iter()
    }

    pub fn raw_texts(&self) -> Vec<String> {
        self.facets.iter().map(|f| f.raw.clone()).collect()
    }

    /// Total number of terms over all facets.
    pub fn token_count(&self) -> usize {
        self.facets.iter().map(Facet::len).sum()
    }
}

impl<'a> IntoIterator for &'a FacetSet {
    type Item = &'a Facet;
    type IntoIter = std::slice::Iter<'a, Facet>;
    fn into_iter(self) -> Self::IntoIter {
        self.facets.iter()
    }
}

impl TryFrom<Vec<String>> for FacetSet {
    type Error = CorpusError;
    fn try_from(value: Vec<String>) -> Result<Self, Self::Error> {
        FacetSet::from_texts(value)
    }
}

impl From<FacetSet> for Vec<String> {
    fn from(set: FacetSet) -> Self {
        set.facets.into_iter().map(|f| f.raw).collect()
    }
}

impl fmt::Display for FacetSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let joined: Vec<&str> = self.facets.iter().map(Facet::raw).collect();
        f.write_str(&joined.join("; "))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DocumentList {
    snippets: Vec<String>,
}

impl DocumentList {
    /// Keeps the first `MAX_DOCUMENTS` snippets in input order.
    pub fn new(snippets: Vec<String>) -> Self {
        Self::with_limit(snippets, MAX_DOCUMENTS)
    }

    pub fn with_limit(mut snippets: Vec<String>, limit: usize) -> Self {
        snippets.truncate(limit);
        Self { snippets }
    }

    pub fn snippets(&self) -> &[String] {
        &self.snippets
    }

    pub fn len(&self) -> usize {
        self.snippets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snippets.is_empty()
    }
}

/// Where a facet set came from.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    GroundTruth,
    Generated(String),
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::GroundTruth => f.write_str("ground_truth"),
            Source::Generated(p) => write!(f, "generated:{p}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClarificationRecord {
    pub query: Query,
    #[serde(default)]
    pub question: String,
    pub facets: FacetSet,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub documents: Option<DocumentList>,
    pub source: Source,
}

impl ClarificationRecord {
    pub fn ground_truth(query: Query, question: impl Into<String>, facets: FacetSet) -> Self {
        Self {
            query,
            question: question.into(),
            facets,
            documents: None,
            source: Source::GroundTruth,
        }
    }

    pub fn generated(query: Query, facets: FacetSet, provider: impl Into<String>) -> Self {
        Self {
            query,
            question: String::new(),
            facets,
            documents: None,
            source: Source::Generated(provider.into()),
        }
    }
}

/// A data row or line that could not be turned into a record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RowError {
    /// 1-based line number in the input (the header is line 1 for TSV).
    pub line: usize,
    pub reason: String,
}

impl fmt::Display for RowError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.reason)
    }
}

#[derive(Debug, Clone)]
pub struct Parsed<T> {
    pub records: Vec<T>,
    pub errors: Vec<RowError>,
}

impl<T> Default for Parsed<T> {
    fn default() -> Self {
        Self { records: Vec::new(), errors: Vec::new() }
    }
}

/// Parses a MIMICS-style clarification TSV.
///
/// Columns are located by header name; extra columns are ignored. Bad rows
/// are collected as [`RowError`]s and parsing continues.
pub fn parse_clarification_tsv<R: Read>(
    reader: R,
) -> Result<Parsed<ClarificationRecord>, CorpusError> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .quoting(false)
        .flexible(true)
        .has_headers(true)
        .from_reader(reader);

    let headers = rdr
        .headers()
        .map_err(|e| CorpusError::Io(e.to_string()))?
        .clone();
    let position: HashMap<&str, usize> = headers
        .iter()
        .enumerate()
        .map(|(i, h)| (h.trim(), i))
        .collect();
    let missing: Vec<&str> = REQUIRED_COLUMNS
        .iter()
        .copied()
        .filter(|c| !position.contains_key(c))
        .collect();
    if !missing.is_empty() {
        return Err(CorpusError::MissingHeader(missing.join(", ")));
    }
    let col = |name: &str| position[name];
    let query_col = col("query");
    let question_col = col("question");
    let option_cols: Vec<usize> = (1..=MAX_PANE_OPTIONS)
        .map(|i| col(&format!("option_{i}")))
        .collect();

    let mut out = Parsed::default();
    for (idx, row) in rdr.records().enumerate() {
        let line = idx + 2;
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                out.errors.push(RowError { line, reason: e.to_string() });
                continue;
            }
        };
        let cell = |i: usize| row.get(i).unwrap_or("");
        let query = match Query::new(cell(query_col)) {
            Ok(q) => q,
            Err(e) => {
                out.errors.push(RowError { line, reason: e.to_string() });
                continue;
            }
        };
        let options: Vec<&str> = option_cols
            .iter()
            .map(|&i| cell(i))
            .filter(|o| !o.trim().is_empty())
            .collect();
        if options.is_empty() {
            out.errors.push(RowError {
                line,
                reason: "no non-empty options".to_string(),
            });
            continue;
        }
        match FacetSet::from_texts(options) {
            Ok(facets) => out.records.push(ClarificationRecord::ground_truth(
                query,
                cell(question_col),
                facets,
            )),
            Err(e) => out.errors.push(RowError { line, reason: e.to_string() }),
        }
    }
    Ok(out)
}

/// Writes records in the clarification TSV layout. Facets are emitted in
/// canonical order. Tabs and newlines inside text are replaced by spaces,
/// since the format has no quoting.
pub fn write_clarification_tsv<W: Write>(
    mut writer: W,
    records: &[ClarificationRecord],
) -> std::io::Result<()> {
    let clean = |s: &str| s.replace(['\t', '\n', '\r'], " ");
    writeln!(writer, "{}", REQUIRED_COLUMNS.join("\t"))?;
    for rec in records {
        let mut cells = vec![clean(rec.query.text()), clean(&rec.question)];
        for i in 0..MAX_PANE_OPTIONS {
            cells.push(
                rec.facets
                    .facets()
                    .get(i)
                    .map(|f| clean(f.raw()))
                    .unwrap_or_default(),
            );
        }
        writeln!(writer, "{}", cells.join("\t"))?;
    }
    Ok(())
}

#[derive(Deserialize)]
struct GeneratedLine {
    query: String,
    facets: Vec<String>,
}

/// Loads generated facet sets, one JSON object per line:
/// `{"query": ..., "facets": [...]}`. Blank lines are skipped.
pub fn load_generated_facets<R: BufRead>(
    reader: R,
    provider: &str,
) -> Parsed<ClarificationRecord> {
    let mut out = Parsed::default();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = match line {
            Ok(l) => l,
            Err(e) => {
                out.errors.push(RowError { line: line_no, reason: e.to_string() });
                continue;
            }
        };
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<GeneratedLine>(&line)
            .map_err(|e| e.to_string())
            .and_then(|g| {
                let query = Query::new(g.query).map_err(|e| e.to_string())?;
                let facets = FacetSet::from_texts(g.facets).map_err(|e| e.to_string())?;
                Ok(ClarificationRecord::generated(query, facets, provider))
            });
        match parsed {
            Ok(rec) => out.records.push(rec),
            Err(reason) => out.errors.push(RowError { line: line_no, reason }),
        }
    }
    out
}

/// Serializes generated records back into the line-delimited format.
pub fn write_generated_facets<W: Write>(
    mut writer: W,
    records: &[ClarificationRecord],
) -> std::io::Result<()> {
    for rec in records {
        let line = serde_json::json!({
            "query": rec.query.text(),
            "facets": rec.facets.raw_texts(),
        });
        writeln!(writer, "{line}")?;
    }
    Ok(())
}

#[derive(Deserialize)]
struct DocumentsLine {
    query: String,
    documents: Vec<String>,
}

/// Loads `{"query": ..., "documents": [...]}` lines keyed by query id.
/// A later line for the same query replaces an earlier one.
pub fn load_documents<R: BufRead>(reader: R) -> (HashMap<String, DocumentList>, Vec<RowError>) {
    let mut docs = HashMap::new();
    let mut errors = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let result = line
            .map_err(|e| e.to_string())
            .and_then(|l| {
                if l.trim().is_empty() {
                    return Ok(None);
                }
                let d: DocumentsLine = serde_json::from_str(&l).map_err(|e| e.to_string())?;
                let q = Query::new(d.query).map_err(|e| e.to_string())?;
                Ok(Some((q, d.documents)))
            });
        match result {
            Ok(Some((q, list))) => {
                docs.insert(q.id().to_string(), DocumentList::new(list));
            }
            Ok(None) => {}
            Err(reason) => errors.push(RowError { line: line_no, reason }),
        }
    }
    (docs, errors)
}

/// Attaches document lists to records whose query id has one.
pub fn attach_documents(records: &mut [ClarificationRecord], docs: &HashMap<String, DocumentList>) {
    for rec in records {
        if let Some(d) = docs.get(rec.query.id()) {
            rec.documents = Some(d.clone());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header() -> String {
        REQUIRED_COLUMNS.join("\t")
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("1982 mustang"), vec!["1982", "mustang"]);
        assert!(tokenize("").is_empty());
        assert_eq!(
            tokenize("Call-of-Duty  game"),
            vec!["call", "of", "duty", "game"]
        );
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_facet("  Coupe "), "coupe");
        assert_eq!(normalize_facet("birthday  gifts"), "birthday gifts");
        assert_eq!(normalize_facet("For Sale"), "for sale");
    }

    #[test]
    fn query_id_is_stable_under_normalization() {
        let a = Query::new("1982 Mustang").unwrap();
        let b = Query::new("  1982   mustang ").unwrap();
        assert_eq!(a.id(), b.id());
        assert_ne!(a.id(), Query::new("1983 mustang").unwrap().id());
        assert_eq!(Query::new("   "), Err(CorpusError::EmptyQuery));
    }

    #[test]
    fn facet_requires_terms() {
        assert!(matches!(Facet::new("--"), Err(CorpusError::EmptyFacet(_))));
        assert_eq!(Facet::new("For sale").unwrap().terms(), ["for", "sale"]);
    }

    #[test]
    fn tsv_option_counts() {
        let tsv = format!(
            "{}\n1982 mustang\tselect one\tcoupe\thatchback\t\t\t\n\
             cars\twhich\ta\tb\tc\td\te\n",
            header()
        );
        let parsed = parse_clarification_tsv(tsv.as_bytes()).unwrap();
        assert!(parsed.errors.is_empty());
        assert_eq!(parsed.records.len(), 2);
        assert_eq!(parsed.records[0].facets.len(), 2);
        assert_eq!(parsed.records[1].facets.len(), 5);
        assert_eq!(parsed.records[0].source, Source::GroundTruth);
    }

    #[test]
    fn tsv_bad_rows_are_reported() {
        let tsv = format!(
            "{}\n\tq\tcoupe\t\t\t\t\nok\tq\t\t\t\t\t\nfine\tq\tx\t\t\t\t\n",
            header()
        );
        let parsed = parse_clarification_tsv(tsv.as_bytes()).unwrap();
        assert_eq!(parsed.records.len(), 1);
        assert_eq!(parsed.errors.len(), 2);
        assert_eq!(parsed.errors[0].line, 2);
        assert_eq!(parsed.errors[1].line, 3);
    }

    #[test]
    fn tsv_header_order_free_and_extra_columns() {
        let tsv = "option_5\textra\toption_4\toption_3\toption_2\toption_1\tquestion\tquery\n\
                   \tzzz\t\t\tb\ta\tq?\tmy query\n";
        let parsed = parse_clarification_tsv(tsv.as_bytes()).unwrap();
        assert_eq!(parsed.records[0].query.text(), "my query");
        assert_eq!(parsed.records[0].facets.raw_texts(), vec!["a", "b"]);
    }

    #[test]
    fn tsv_missing_header() {
        let err = parse_clarification_tsv("query\tquestion\toption_1\n".as_bytes()).unwrap_err();
        assert_eq!(
            err,
            CorpusError::MissingHeader("option_2, option_3, option_4, option_5".into())
        );
    }

    #[test]
    fn generated_lines() {
        let input = "{\"query\":\"1982 mustang\",\"facets\":[\"specs\",\"for sale\"]}\n\
                     {\"query\":\"x\",\"facets\":[]}\n\
                     not json\n\
                     \n\
                     {\"query\":\"1982 mustang\",\"facets\":[\"specs\",\"for sale\"]}\n";
        let parsed = load_generated_facets(input.as_bytes(), "bart");
        assert_eq!(parsed.records.len(), 2);
        assert_eq!(parsed.records[0].facets.len(), 2);
        assert_eq!(parsed.records[0].source, Source::Generated("bart".into()));
        assert!(parsed.records[0].question.is_empty());
        assert_eq!(parsed.records[0], parsed.records[1]);
        let lines: Vec<usize> = parsed.errors.iter().map(|e| e.line).collect();
        assert_eq!(lines, vec![2, 3]);
    }

    #[test]
    fn documents_are_capped_and_attached() {
        let docs: Vec<String> = (0..12).map(|i| format!("doc {i}")).collect();
        let line = serde_json::json!({"query": "1982 Mustang", "documents": docs});
        let (map, errors) = load_documents(format!("{line}\n").as_bytes());
        assert!(errors.is_empty());
        let q = Query::new("1982 mustang").unwrap();
        let list = &map[q.id()];
        assert_eq!(list.len(), MAX_DOCUMENTS);
        assert_eq!(list.snippets()[0], "doc 0");

        let mut recs = vec![ClarificationRecord::ground_truth(
            q,
            "",
            FacetSet::from_texts(["coupe"]).unwrap(),
        )];
        attach_documents(&mut recs, &map);
        assert_eq!(recs[0].documents.as_ref().unwrap().len(), 10);
    }

    #[test]
    fn record_json_roundtrip() {
        let rec = ClarificationRecord::generated(
            Query::new("police sales").unwrap(),
            FacetSet::from_texts(["school bus sales", "police car sales"]).unwrap(),
            "bart",
        );
        let json = serde_json::to_string(&rec).unwrap();
        let back: ClarificationRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(rec, back);
    }
}
