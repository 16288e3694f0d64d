use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::CoherencyError;
use crate::corpus::{FacetSet, Query, RowError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Coherency {
    Coherent,
    Incoherent,
}

impl Coherency {
    pub fn as_target(self) -> f64 {
        match self {
            Coherency::Coherent => 1.0,
            Coherency::Incoherent => 0.0,
        }
    }
}

impl fmt::Display for Coherency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Coherency::Coherent => "coherent",
            Coherency::Incoherent => "incoherent",
        })
    }
}

/// Where a label came from. Serialized as `expert`, `weak:<rule>`,
/// `propagated` or `predicted`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Provenance {
    Expert,
    WeakRule(String),
    Propagated,
    Predicted,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Expert => f.write_str("expert"),
            Provenance::WeakRule(rule) => write!(f, "weak:{rule}"),
            Provenance::Propagated => f.write_str("propagated"),
            Provenance::Predicted => f.write_str("predicted"),
        }
    }
}

impl FromStr for Provenance {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "expert" => Ok(Provenance::Expert),
            "propagated" => Ok(Provenance::Propagated),
            "predicted" => Ok(Provenance::Predicted),
            other => match other.strip_prefix("weak:") {
                Some(rule) if !rule.is_empty() => Ok(Provenance::WeakRule(rule.to_string())),
                _ => Err(format!("unknown provenance {other:?}")),
            },
        }
    }
}

impl Serialize for Provenance {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Provenance {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoherencyLabel {
    pub value: Coherency,
    pub provenance: Provenance,
}

impl CoherencyLabel {
    pub fn new(value: Coherency, provenance: Provenance) -> Self {
        Self { value, provenance }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledRecord {
    pub id: String,
    pub query: Query,
    pub question: String,
    pub facets: FacetSet,
    pub label: CoherencyLabel,
}

#[derive(Serialize, Deserialize)]
struct LabeledLine {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<String>,
    query: String,
    #[serde(default)]
    question: String,
    facets: Vec<String>,
    label: Coherency,
    provenance: Provenance,
}

/// Reads the labeled-data format, one JSON object per line. Records without
/// an `id` get `<query id>:<line>`.
pub fn read_labeled<R: BufRead>(reader: R) -> (Vec<LabeledRecord>, Vec<RowError>) {
    let mut records = Vec::new();
    let mut errors = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let parsed = line.map_err(|e| e.to_string()).and_then(|l| {
            if l.trim().is_empty() {
                return Ok(None);
            }
            let raw: LabeledLine = serde_json::from_str(&l).map_err(|e| e.to_string())?;
            let query = Query::new(raw.query).map_err(|e| e.to_string())?;
            let facets = FacetSet::from_texts(raw.facets).map_err(|e| e.to_string())?;
            let id = raw.id.unwrap_or_else(|| format!("{}:{line_no}", query.id()));
            Ok(Some(LabeledRecord {
                id,
                query,
                question: raw.question,
                facets,
                label: CoherencyLabel::new(raw.label, raw.provenance),
            }))
        });
        match parsed {
            Ok(Some(r)) => records.push(r),
            Ok(None) => {}
            Err(reason) => errors.push(RowError { line: line_no, reason }),
        }
    }
    (records, errors)
}

pub fn write_labeled<W: Write>(mut w: W, records: &[LabeledRecord]) -> std::io::Result<()> {
    for r in records {
        let line = LabeledLine {
            id: Some(r.id.clone()),
            query: r.query.text().to_string(),
            question: r.question.clone(),
            facets: r.facets.raw_texts(),
            label: r.label.value,
            provenance: r.label.provenance.clone(),
        };
        serde_json::to_writer(&mut w, &line)?;
        writeln!(w)?;
    }
    Ok(())
}

impl LabeledRecord {
    pub fn ensure_not_predicted(&self) -> Result<(), CoherencyError> {
        if self.label.provenance == Provenance::Predicted {
            Err(CoherencyError::PredictedLabel(self.id.clone()))
        } else {
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn provenance_strings() {
        for p in [
            Provenance::Expert,
            Provenance::WeakRule("duplicate-facet".into()),
            Provenance::Propagated,
            Provenance::Predicted,
        ] {
            assert_eq!(p.to_string().parse::<Provenance>().unwrap(), p);
        }
        assert!("weak:".parse::<Provenance>().is_err());
        assert!("crowd".parse::<Provenance>().is_err());
    }

    #[test]
    fn labeled_file_roundtrip() {
        let input = r#"{"query":"gift ideas","question":"Who is it for?","facets":["men","women"],"label":"coherent","provenance":"expert"}
{"query":"gift ideas","facets":["coupe","coupe"],"label":"incoherent","provenance":"weak:duplicate-facet"}
{"query":"gift ideas","facets":["a"],"label":"maybe","provenance":"expert"}
"#;
        let (records, errors) = read_labeled(input.as_bytes());
        assert_eq!(records.len(), 2);
        assert_eq!(errors.len(), 1);
        assert_eq!(errors[0].line, 3);
        assert_eq!(records[1].label.provenance, Provenance::WeakRule("duplicate-facet".into()));
        let mut out = Vec::new();
        write_labeled(&mut out, &records).unwrap();
        let (again, errors) = read_labeled(out.as_slice());
        assert!(errors.is_empty());
        assert_eq!(again, records);
    }
}
