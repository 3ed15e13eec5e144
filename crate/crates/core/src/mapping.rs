//! Feature → term annotations and true-path annotation counts.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ontology::{Ontology, TermId};

/// Identifier of an input feature, e.g. a gene symbol.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureId(String);

impl FeatureId {
    pub fn new(id: impl Into<String>) -> Self {
        FeatureId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for FeatureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for FeatureId {
    fn from(s: &str) -> Self {
        FeatureId(s.to_owned())
    }
}

impl From<String> for FeatureId {
    fn from(s: String) -> Self {
        FeatureId(s)
    }
}

impl std::borrow::Borrow<str> for FeatureId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

#[derive(Debug, Error)]
pub enum MappingError {
    #[error("mapping has no entries")]
    Empty,
    #[error("line {line}: expected `feature<TAB>term[,term...]`")]
    MissingTab { line: usize },
    #[error("line {line}: empty feature identifier")]
    EmptyFeature { line: usize },
    #[error("line {line}: input is not valid UTF-8")]
    Encoding { line: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotationMap {
    by_feature: BTreeMap<FeatureId, BTreeSet<TermId>>,
    dropped_terms: usize,
}

/// Iterates `(line number, content)` over non-blank, non-comment lines.
fn data_lines<R: BufRead>(
    reader: R,
) -> impl Iterator<Item = Result<(usize, String), MappingError>> {
    reader.split(b'\n').enumerate().filter_map(|(i, raw)| {
        let line_no = i + 1;
        let raw = match raw {
            Ok(raw) => raw,
            Err(e) => return Some(Err(MappingError::Io(e))),
        };
        let line = match String::from_utf8(raw) {
            Ok(s) => s,
            Err(_) => return Some(Err(MappingError::Encoding { line: line_no })),
        };
        let line = line.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() || line.starts_with('#') {
            None
        } else {
            Some(Ok((line_no, line.to_owned())))
        }
    })
}

impl AnnotationMap {
    /// Parses `feature<TAB>term[,term...]` lines. Repeated features merge.
    pub fn parse<R: BufRead>(reader: R) -> Result<Self, MappingError> {
        let mut by_feature: BTreeMap<FeatureId, BTreeSet<TermId>> = BTreeMap::new();
        for entry in data_lines(reader) {
            let (line, text) = entry?;
            let (feature, terms) = text
                .split_once('\t')
                .ok_or(MappingError::MissingTab { line })?;
            let feature = feature.trim();
            if feature.is_empty() {
                return Err(MappingError::EmptyFeature { line });
            }
            let set = by_feature.entry(FeatureId::from(feature)).or_default();
            set.extend(
                terms
                    .split([',', '\t'])
                    .map(str::trim)
                    .filter(|t| !t.is_empty())
                    .map(TermId::from),
            );
        }
        if by_feature.is_empty() {
            return Err(MappingError::Empty);
        }
        Ok(AnnotationMap {
            by_feature,
            dropped_terms: 0,
        })
    }

    /// Parses and drops annotations to terms the ontology does not contain.
    pub fn parse_for<R: BufRead>(reader: R, ontology: &Ontology) -> Result<Self, MappingError> {
        let mut map = Self::parse(reader)?;
        map.retain_known(ontology);
        Ok(map)
    }

    pub fn from_entries<I, F, T>(entries: I) -> Self
    where
        I: IntoIterator<Item = (F, T)>,
        F: Into<FeatureId>,
        T: IntoIterator,
        T::Item: Into<TermId>,
    {
        let mut by_feature: BTreeMap<FeatureId, BTreeSet<TermId>> = BTreeMap::new();
        for (f, terms) in entries {
            by_feature
                .entry(f.into())
                .or_default()
                .extend(terms.into_iter().map(Into::into));
        }
        AnnotationMap {
            by_feature,
            dropped_terms: 0,
        }
    }

    /// Removes annotations to unknown terms; returns how many were removed.
    /// Features left with no terms stay in the universe.
    pub fn retain_known(&mut self, ontology: &Ontology) -> usize {
        let mut dropped = 0;
        for terms in self.by_feature.values_mut() {
            let before = terms.len();
            terms.retain(|t| ontology.contains(t.as_str()));
            dropped += before - terms.len();
        }
        self.dropped_terms += dropped;
        dropped
    }

    pub fn dropped_terms(&self) -> usize {
        self.dropped_terms
    }

    pub fn universe_size(&self) -> usize {
        self.by_feature.len()
    }

    pub fn terms_of(&self, feature: &str) -> Option<&BTreeSet<TermId>> {
        self.by_feature.get(feature)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&FeatureId, &BTreeSet<TermId>)> {
        self.by_feature.iter()
    }

    /// Sub-map over the given features; features absent from the map are ignored.
    pub fn restricted_to<'a>(&self, features: impl IntoIterator<Item = &'a FeatureId>) -> Self {
        let by_feature = features
            .into_iter()
            .filter_map(|f| self.by_feature.get_key_value(f))
            .map(|(f, t)| (f.clone(), t.clone()))
            .collect();
        AnnotationMap {
            by_feature,
            dropped_terms: self.dropped_terms,
        }
    }

    /// Per-term count of features annotated to the term or to any of its
    /// descendants. Every ontology term appears, possibly with 0.
    pub fn term_annotation_counts(&self, ontology: &Ontology) -> BTreeMap<TermId, usize> {
        let counts = self.counts_by_index(ontology);
        ontology
            .terms()
            .zip(counts)
            .map(|(t, c)| (t.id.clone(), c))
            .collect()
    }

    pub(crate) fn counts_by_index(&self, ontology: &Ontology) -> Vec<usize> {
        let mut counts = vec![0usize; ontology.len()];
        // stamp[i] == feature number + 1 once term i is counted for that feature
        let mut stamp = vec![0usize; ontology.len()];
        for (n, terms) in self.by_feature.values().enumerate() {
            let mark = n + 1;
            for t in terms {
                let Some(i) = ontology.index_of(t.as_str()) else {
                    continue;
                };
                if stamp[i as usize] == mark {
                    continue;
                }
                for a in ontology.ancestor_indices(i) {
                    if stamp[a as usize] != mark {
                        stamp[a as usize] = mark;
                        counts[a as usize] += 1;
                    }
                }
            }
        }
        counts
    }
}

/// Converts one-pair-per-line `feature<TAB>term` input into the grouped
/// `feature<TAB>term,term,...` form, features in sorted order.
pub fn pairs_to_tsv<R: BufRead>(reader: R) -> Result<String, MappingError> {
    let map = AnnotationMap::parse(reader)?;
    let mut out = String::new();
    for (feature, terms) in map.iter() {
        out.push_str(feature.as_str());
        out.push('\t');
        let joined: Vec<&str> = terms.iter().map(TermId::as_str).collect();
        out.push_str(&joined.join(","));
        out.push('\n');
    }
    Ok(out)
}
