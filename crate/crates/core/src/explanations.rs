//! Per-instance explanations: ingestion, per-class aggregation, dynamic
//! thresholding and mapping of the selected features onto ontology terms.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mapping::{AnnotationMap, FeatureId};
use crate::ontology::TermId;

#[derive(Debug, Error)]
pub enum ExplanationError {
    #[error("invalid explanation document at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("instance {instance}: expected {expected} values, found {found}")]
    Length {
        instance: usize,
        expected: usize,
        found: usize,
    },
    #[error("`{path}`: class `{label}` is not declared in `classes`")]
    UndeclaredClass { path: String, label: String },
    #[error("`{path}`: duplicate entry `{value}`")]
    Duplicate { path: String, value: String },
    #[error("unknown class `{0}`")]
    UnknownClass(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub true_class: String,
    pub predicted_class: String,
    pub values: Vec<f64>,
}

/// Dense per-instance explanation vectors aligned to `features`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationSet {
    pub classes: Vec<String>,
    pub features: Vec<FeatureId>,
    pub instances: Vec<Instance>,
}

/// Expected explanation per feature, one vector per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatedImportance {
    pub classes: Vec<String>,
    pub features: Vec<FeatureId>,
    pub per_class: BTreeMap<String, Vec<f64>>,
    /// Classes with no contributing instance; their vector is all zeros.
    pub empty_classes: BTreeSet<String>,
}

/// Either interchange form: raw instances or pre-aggregated class vectors.
#[derive(Debug, Clone, PartialEq)]
pub enum Explanations {
    Instances(ExplanationSet),
    Aggregated(AggregatedImportance),
}

#[derive(Deserialize)]
struct Document {
    classes: Vec<String>,
    features: Vec<String>,
    instances: Option<Vec<Instance>>,
    per_class_importance: Option<BTreeMap<String, Vec<f64>>>,
}

fn schema(path: &str, message: impl Into<String>) -> ExplanationError {
    ExplanationError::Schema {
        path: path.to_owned(),
        message: message.into(),
    }
}

fn check_unique(path: &str, items: &[String]) -> Result<(), ExplanationError> {
    let mut seen = BTreeSet::new();
    for (i, item) in items.iter().enumerate() {
        if item.is_empty() {
            return Err(schema(&format!("{path}[{i}]"), "empty identifier"));
        }
        if !seen.insert(item) {
            return Err(ExplanationError::Duplicate {
                path: format!("{path}[{i}]"),
                value: item.clone(),
            });
        }
    }
    Ok(())
}

impl Explanations {
    pub fn parse<R: Read>(reader: R) -> Result<Self, ExplanationError> {
        let de = &mut serde_json::Deserializer::from_reader(reader);
        let doc: Document = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            schema(&path, e.into_inner().to_string())
        })?;
        check_unique("classes", &doc.classes)?;
        check_unique("features", &doc.features)?;
        let declared: BTreeSet<&String> = doc.classes.iter().collect();
        let features: Vec<FeatureId> = doc.features.into_iter().map(FeatureId::from).collect();

        match (doc.instances, doc.per_class_importance) {
            (Some(instances), None) => {
                for (i, inst) in instances.iter().enumerate() {
                    if inst.values.len() != features.len() {
                        return Err(ExplanationError::Length {
                            instance: i,
                            expected: features.len(),
                            found: inst.values.len(),
                        });
                    }
                    for (field, label) in [
                        ("true_class", &inst.true_class),
                        ("predicted_class", &inst.predicted_class),
                    ] {
                        if !declared.contains(label) {
                            return Err(ExplanationError::UndeclaredClass {
                                path: format!("instances[{i}].{field}"),
                                label: label.clone(),
                            });
                        }
                    }
                }
                Ok(Explanations::Instances(ExplanationSet {
                    classes: doc.classes,
                    features,
                    instances,
                }))
            }
            (None, Some(mut per_class)) => {
                for (label, values) in &per_class {
                    let path = format!("per_class_importance.{label}");
                    if !declared.contains(label) {
                        return Err(ExplanationError::UndeclaredClass {
                            path,
                            label: label.clone(),
                        });
                    }
                    if values.len() != features.len() {
                        return Err(schema(
                            &path,
                            format!("expected {} values, found {}", features.len(), values.len()),
                        ));
                    }
                }
                let mut empty_classes = BTreeSet::new();
                for label in &doc.classes {
                    if !per_class.contains_key(label) {
                        per_class.insert(label.clone(), vec![0.0; features.len()]);
                        empty_classes.insert(label.clone());
                    }
                }
                Ok(Explanations::Aggregated(AggregatedImportance {
                    classes: doc.classes,
                    features,
                    per_class,
                    empty_classes,
                }))
            }
            (Some(_), Some(_)) => Err(schema(
                ".",
                "`instances` and `per_class_importance` are mutually exclusive",
            )),
            (None, None) => Err(schema(
                ".",
                "expected either `instances` or `per_class_importance`",
            )),
        }
    }

    pub fn classes(&self) -> &[String] {
        match self {
            Explanations::Instances(e) => &e.classes,
            Explanations::Aggregated(a) => &a.classes,
        }
    }

    pub fn features(&self) -> &[FeatureId] {
        match self {
            Explanations::Instances(e) => &e.features,
            Explanations::Aggregated(a) => &a.features,
        }
    }

    /// Aggregates raw instances; pre-aggregated input is returned unchanged.
    pub fn into_aggregated(self, options: AggregateOptions) -> AggregatedImportance {
        match self {
            Explanations::Instances(e) => e.aggregate(options),
            Explanations::Aggregated(a) => a,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AggregateOptions {
    pub use_absolute: bool,
    /// Average over every instance of the true class, not only correctly
    /// classified ones.
    pub include_misclassified: bool,
}

impl Default for AggregateOptions {
    fn default() -> Self {
        AggregateOptions {
            use_absolute: true,
            include_misclassified: false,
        }
    }
}

impl ExplanationSet {
    pub fn aggregate(&self, options: AggregateOptions) -> AggregatedImportance {
        let width = self.features.len();
        let mut sums: BTreeMap<&str, (Vec<f64>, usize)> = self
            .classes
            .iter()
            .map(|c| (c.as_str(), (vec![0.0; width], 0)))
            .collect();
        for inst in &self.instances {
            if !options.include_misclassified && inst.true_class != inst.predicted_class {
                continue;
            }
            let Some((sum, n)) = sums.get_mut(inst.true_class.as_str()) else {
                continue;
            };
            for (acc, &v) in sum.iter_mut().zip(&inst.values) {
                *acc += if options.use_absolute { v.abs() } else { v };
            }
            *n += 1;
        }

        let mut empty_classes = BTreeSet::new();
        let per_class = sums
            .into_iter()
            .map(|(label, (mut sum, n))| {
                if n == 0 {
                    empty_classes.insert(label.to_owned());
                } else {
                    sum.iter_mut().for_each(|v| *v /= n as f64);
                }
                (label.to_owned(), sum)
            })
            .collect();
        AggregatedImportance {
            classes: self.classes.clone(),
            features: self.features.clone(),
            per_class,
            empty_classes,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    /// Final threshold; every selected feature's value is strictly above it.
    pub threshold: f64,
    /// Selected features by value descending, ties by id.
    pub features: Vec<FeatureId>,
    /// Set when the class has no positive value to select from.
    pub degenerate: bool,
}

impl AggregatedImportance {
    /// Lowers a per-class threshold from the class maximum by repeated
    /// multiplication with `step` until at least `min_terms` features lie
    /// strictly above it, or until every positive feature does.
    pub fn dynamic_threshold(
        &self,
        class: &str,
        min_terms: usize,
        step: f64,
    ) -> Result<Selection, ExplanationError> {
        if min_terms == 0 {
            return Err(ExplanationError::InvalidParameter(
                "min_terms must be at least 1".into(),
            ));
        }
        if !(step > 0.0 && step < 1.0) {
            return Err(ExplanationError::InvalidParameter(format!(
                "step must lie in (0, 1), got {step}"
            )));
        }
        let values = self
            .per_class
            .get(class)
            .ok_or_else(|| ExplanationError::UnknownClass(class.to_owned()))?;

        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min_positive = values
            .iter()
            .copied()
            .filter(|&v| v > 0.0)
            .fold(f64::INFINITY, f64::min);
        if max.is_nan() || max <= 0.0 {
            return Ok(Selection {
                threshold: max.max(0.0),
                features: Vec::new(),
                degenerate: true,
            });
        }

        let mut threshold = max;
        loop {
            threshold *= step;
            let above = values.iter().filter(|&&v| v > threshold).count();
            if above >= min_terms || threshold < min_positive {
                break;
            }
        }

        let mut picked: Vec<(f64, &FeatureId)> = values
            .iter()
            .zip(&self.features)
            .filter(|(&v, _)| v > threshold)
            .map(|(&v, f)| (v, f))
            .collect();
        picked.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
        Ok(Selection {
            threshold,
            features: picked.into_iter().map(|(_, f)| f.clone()).collect(),
            degenerate: false,
        })
    }
}

/// Per-class starting terms for the reasoning step.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StartingTermSets {
    pub per_class: BTreeMap<String, BTreeSet<TermId>>,
    pub selected_features: BTreeMap<String, Vec<FeatureId>>,
    /// Selected features missing from the annotation map.
    pub unmapped_features: usize,
    /// Classes that ended up with no starting term.
    pub empty_classes: BTreeSet<String>,
}

impl StartingTermSets {
    /// Unions the annotation sets of every selected feature, per class.
    pub fn from_selection(
        selected: &BTreeMap<String, Vec<FeatureId>>,
        map: &AnnotationMap,
    ) -> Self {
        let mut out = StartingTermSets {
            selected_features: selected.clone(),
            ..Default::default()
        };
        for (label, features) in selected {
            let mut terms = BTreeSet::new();
            for f in features {
                match map.terms_of(f.as_str()) {
                    Some(ts) => terms.extend(ts.iter().cloned()),
                    None => out.unmapped_features += 1,
                }
            }
            if terms.is_empty() {
                out.empty_classes.insert(label.clone());
            }
            out.per_class.insert(label.clone(), terms);
        }
        out
    }

    /// Builds sets directly from term ids, with no feature bookkeeping.
    pub fn from_terms<I, L, T>(sets: I) -> Self
    where
        I: IntoIterator<Item = (L, T)>,
        L: Into<String>,
        T: IntoIterator,
        T::Item: Into<TermId>,
    {
        let mut out = StartingTermSets::default();
        for (label, terms) in sets {
            let label = label.into();
            let terms: BTreeSet<TermId> = terms.into_iter().map(Into::into).collect();
            if terms.is_empty() {
                out.empty_classes.insert(label.clone());
            }
            out.per_class.insert(label, terms);
        }
        out
    }
}
