//! Information content, generalization quality (GenQ) and report rendering.
//!
//! With `ic(t) = -ln p(t)` and `nro` the largest information content among
//! annotated terms, GenQ of a term set `T` is `1 - mean(ic over T) / nro`.
//! This is the same quantity as `1 - Σ ln p(t) / (|T| · NrO)` written with
//! `NrO = -max IC`: numerator and normalizer both flip sign, so the positive
//! form is used throughout. The log base cancels in the ratio.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::explanations::StartingTermSets;
use crate::ontology::{Ontology, TermId};
use crate::reasoning::ClassTermSets;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("no term is annotated; information content is undefined")]
    NoAnnotations,
    #[error("universe size must be at least 1")]
    EmptyUniverse,
    #[error("term `{term}` has count {count} above the universe size {universe}")]
    CountExceedsUniverse {
        term: TermId,
        count: usize,
        universe: usize,
    },
    #[error("GenQ of an empty term set is undefined")]
    EmptyTermSet,
    #[error("term `{0}` is not in the information content table")]
    UnknownTerm(TermId),
    #[error("unknown output format `{0}` (expected text, json or csv)")]
    UnknownFormat(String),
    #[error("cannot write report: {0}")]
    Write(String),
}

/// Information content per term, in nats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcTable {
    ic: BTreeMap<TermId, f64>,
    nro: f64,
}

impl IcTable {
    /// `p(t) = count(t) / universe`. Unannotated terms take the table maximum.
    pub fn build(counts: &BTreeMap<TermId, usize>, universe: usize) -> Result<Self, MetricsError> {
        if universe == 0 {
            return Err(MetricsError::EmptyUniverse);
        }
        let mut ic = BTreeMap::new();
        let mut nro = f64::NEG_INFINITY;
        for (term, &count) in counts {
            if count > universe {
                return Err(MetricsError::CountExceedsUniverse {
                    term: term.clone(),
                    count,
                    universe,
                });
            }
            if count > 0 {
                let value = -(count as f64 / universe as f64).ln();
                nro = nro.max(value);
                ic.insert(term.clone(), value);
            }
        }
        if ic.is_empty() {
            return Err(MetricsError::NoAnnotations);
        }
        for term in counts.keys() {
            ic.entry(term.clone()).or_insert(nro);
        }
        Ok(IcTable { ic, nro })
    }

    pub fn ic(&self, term: &str) -> Option<f64> {
        self.ic.get(term).copied()
    }

    /// Normalizer: the largest information content of any annotated term.
    pub fn nro(&self) -> f64 {
        self.nro
    }

    pub fn len(&self) -> usize {
        self.ic.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ic.is_empty()
    }

    /// GenQ of a term set. Duplicates are ignored.
    ///
    /// When every annotated term has `p = 1` the normalizer is zero; all terms
    /// are then maximally general and the score is 1.
    pub fn genq<'a>(
        &self,
        terms: impl IntoIterator<Item = &'a TermId>,
    ) -> Result<f64, MetricsError> {
        let set: BTreeSet<&TermId> = terms.into_iter().collect();
        if set.is_empty() {
            return Err(MetricsError::EmptyTermSet);
        }
        let mut total = 0.0;
        for t in &set {
            total += self
                .ic(t.as_str())
                .ok_or_else(|| MetricsError::UnknownTerm((*t).clone()))?;
        }
        if self.nro <= 0.0 {
            return Ok(1.0);
        }
        Ok((1.0 - total / (set.len() as f64 * self.nro)).clamp(0.0, 1.0))
    }

    /// GenQ of each class's ungeneralized starting set; empty classes are omitted.
    pub fn baseline_genq(
        &self,
        start: &StartingTermSets,
    ) -> Result<BTreeMap<String, f64>, MetricsError> {
        start
            .per_class
            .iter()
            .filter(|(_, terms)| !terms.is_empty())
            .map(|(class, terms)| Ok((class.clone(), self.genq(terms)?)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Text,
    Json,
    Csv,
}

impl FromStr for OutputFormat {
    type Err = MetricsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" => Ok(OutputFormat::Text),
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            other => Err(MetricsError::UnknownFormat(other.to_owned())),
        }
    }
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputFormat::Text => "text",
            OutputFormat::Json => "json",
            OutputFormat::Csv => "csv",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportTerm {
    pub id: TermId,
    pub name: String,
    pub depth: u32,
    pub ic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub genq: f64,
    pub baseline_genq: f64,
    pub term_count: usize,
    pub baseline_term_count: usize,
    pub mean_depth: f64,
    /// Ordered by depth descending, then name.
    pub terms: Vec<ReportTerm>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GenQReport {
    pub per_class: BTreeMap<String, ClassReport>,
    /// Classes left out because their starting or generalized set is empty.
    pub skipped_classes: BTreeSet<String>,
}

impl GenQReport {
    pub fn build(
        sets: &ClassTermSets,
        start: &StartingTermSets,
        table: &IcTable,
        ontology: &Ontology,
    ) -> Result<Self, MetricsError> {
        let mut report = GenQReport::default();
        for (class, terms) in &sets.per_class {
            let baseline = start.per_class.get(class).filter(|s| !s.is_empty());
            let Some(baseline) = baseline.filter(|_| !terms.is_empty()) else {
                report.skipped_classes.insert(class.clone());
                continue;
            };
            let mut rows = terms
                .iter()
                .map(|(id, &depth)| {
                    let ic = table
                        .ic(id.as_str())
                        .ok_or_else(|| MetricsError::UnknownTerm(id.clone()))?;
                    Ok(ReportTerm {
                        id: id.clone(),
                        name: ontology.display_name(id).to_owned(),
                        depth,
                        ic,
                    })
                })
                .collect::<Result<Vec<_>, MetricsError>>()?;
            rows.sort_by(|a, b| {
                b.depth
                    .cmp(&a.depth)
                    .then_with(|| a.name.cmp(&b.name))
                    .then_with(|| a.id.cmp(&b.id))
            });
            let mean_depth = rows.iter().map(|r| r.depth as f64).sum::<f64>() / rows.len() as f64;
            report.per_class.insert(
                class.clone(),
                ClassReport {
                    genq: table.genq(terms.keys())?,
                    baseline_genq: table.genq(baseline)?,
                    term_count: rows.len(),
                    baseline_term_count: baseline.len(),
                    mean_depth,
                    terms: rows,
                },
            );
        }
        Ok(report)
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn render(&self, format: OutputFormat) -> Result<String, MetricsError> {
        match format {
            OutputFormat::Text => Ok(self.render_text()),
            OutputFormat::Json => {
                let mut s = serde_json::to_string_pretty(self)
                    .map_err(|e| MetricsError::Write(e.to_string()))?;
                s.push('\n');
                Ok(s)
            }
            OutputFormat::Csv => self.render_csv(),
        }
    }

    /// One conjunctive explanation per class: `class :- a ∧ b ∧ ...`.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for (class, report) in &self.per_class {
            let names: Vec<&str> = report.terms.iter().map(|t| t.name.as_str()).collect();
            out.push_str(class);
            out.push_str(" :- ");
            out.push_str(&names.join(" ∧ "));
            out.push('\n');
        }
        out
    }

    fn render_csv(&self) -> Result<String, MetricsError> {
        let err = |e: csv::Error| MetricsError::Write(e.to_string());
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "class",
            "term_id",
            "term_name",
            "depth",
            "ic",
            "genq_class",
            "baseline_genq_class",
            "term_count",
            "baseline_term_count",
        ])
        .map_err(err)?;
        for (class, r) in &self.per_class {
            for t in &r.terms {
                w.write_record([
                    class.as_str(),
                    t.id.as_str(),
                    t.name.as_str(),
                    &t.depth.to_string(),
                    &t.ic.to_string(),
                    &r.genq.to_string(),
                    &r.baseline_genq.to_string(),
                    &r.term_count.to_string(),
                    &r.baseline_term_count.to_string(),
                ])
                .map_err(err)?;
            }
        }
        let bytes = w
            .into_inner()
            .map_err(|e| MetricsError::Write(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| MetricsError::Write(e.to_string()))
    }
}
