//! Generalization of per-class starting terms over the ontology.
//!
//! Two procedures are provided. [`selective_staircase`] lifts every term to
//! each parent whose intersection ratio is within a threshold and repeats
//! until nothing changes. [`ancestry`] pairs terms at random, proposes their
//! lowest common ancestor and keeps it when
//! `ratio / (depth * weight) < 0.5`.
//!
//! The intersection ratio of a term is the fraction of the *other* classes'
//! starting terms found in its reflexive descendant set. Starting sets are
//! frozen for the whole run, so classes are generalized independently (and in
//! parallel).

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::explanations::StartingTermSets;
use crate::ontology::{Ontology, TermId};

#[derive(Debug, Error)]
pub enum ReasonError {
    #[error("class `{class}`: starting term `{term}` is not in the ontology")]
    UnknownStartingTerm { class: String, term: TermId },
    #[error("unknown term `{0}`")]
    UnknownTerm(String),
    #[error("unknown class `{0}`")]
    UnknownClass(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("class `{class}` did not converge within {limit} passes")]
    IterationLimit { class: String, limit: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    SelectiveStaircase,
    Ancestry,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::SelectiveStaircase => "staircase",
            Algorithm::Ancestry => "ancestry",
        })
    }
}

impl FromStr for Algorithm {
    type Err = ReasonError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "staircase" | "selective_staircase" | "selective-staircase" => {
                Ok(Algorithm::SelectiveStaircase)
            }
            "ancestry" => Ok(Algorithm::Ancestry),
            other => Err(ReasonError::InvalidParameter(format!(
                "unknown algorithm `{other}` (expected staircase or ancestry)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReasoningConfig {
    pub algorithm: Algorithm,
    /// Staircase only; in `[0, 1]`.
    pub threshold: f64,
    /// Ancestry only; strictly positive.
    pub weight: f64,
    /// Ancestry only.
    pub seed: u64,
    /// Pass limit per class; `None` means the number of ontology terms.
    pub max_iterations: Option<usize>,
}

impl Default for ReasoningConfig {
    fn default() -> Self {
        ReasoningConfig {
            algorithm: Algorithm::SelectiveStaircase,
            threshold: 0.0,
            weight: 1e-6,
            seed: 0,
            max_iterations: None,
        }
    }
}

/// Generalized terms per class with the depth at which each was reached.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassTermSets {
    pub per_class: BTreeMap<String, BTreeMap<TermId, u32>>,
    pub converged: BTreeMap<String, bool>,
    /// Passes executed per class, including the final no-op pass.
    pub passes: BTreeMap<String, usize>,
    /// Classes whose starting set was empty.
    pub empty_classes: BTreeSet<String>,
}

impl ClassTermSets {
    pub fn terms(&self, class: &str) -> Option<BTreeSet<&TermId>> {
        self.per_class.get(class).map(|m| m.keys().collect())
    }

    pub fn mean_depth(&self, class: &str) -> Option<f64> {
        let set = self.per_class.get(class)?;
        if set.is_empty() {
            return None;
        }
        Some(set.values().map(|&d| d as f64).sum::<f64>() / set.len() as f64)
    }
}

/// Intersection ratio of a candidate term for one class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ratio {
    pub value: f64,
    /// No other class has a starting term; the ratio is reported as 0.
    pub no_other_terms: bool,
}

/// Per-class view of the frozen starting sets.
struct ClassView {
    own: Vec<u32>,
    others: usize,
    /// Number of other-class starting terms in each term's reflexive descendant set.
    covered: Vec<u32>,
}

impl ClassView {
    fn ratio(&self, term: u32) -> f64 {
        if self.others == 0 {
            0.0
        } else {
            self.covered[term as usize] as f64 / self.others as f64
        }
    }
}

fn resolve(
    ontology: &Ontology,
    start: &StartingTermSets,
) -> Result<BTreeMap<String, Vec<u32>>, ReasonError> {
    start
        .per_class
        .iter()
        .map(|(class, terms)| {
            let indices = terms
                .iter()
                .map(|t| {
                    ontology
                        .index_of(t.as_str())
                        .ok_or_else(|| ReasonError::UnknownStartingTerm {
                            class: class.clone(),
                            term: t.clone(),
                        })
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok((class.clone(), indices))
        })
        .collect()
}

fn class_view(
    ontology: &Ontology,
    resolved: &BTreeMap<String, Vec<u32>>,
    class: &str,
) -> ClassView {
    let others: BTreeSet<u32> = resolved
        .iter()
        .filter(|(c, _)| c.as_str() != class)
        .flat_map(|(_, terms)| terms.iter().copied())
        .collect();
    let mut covered = vec![0u32; ontology.len()];
    for &s in &others {
        for a in ontology.ancestor_indices(s) {
            covered[a as usize] += 1;
        }
    }
    ClassView {
        own: resolved.get(class).cloned().unwrap_or_default(),
        others: others.len(),
        covered,
    }
}

pub fn intersection_ratio(
    ontology: &Ontology,
    start: &StartingTermSets,
    class: &str,
    term: &str,
) -> Result<Ratio, ReasonError> {
    if !start.per_class.contains_key(class) {
        return Err(ReasonError::UnknownClass(class.to_owned()));
    }
    let t = ontology
        .index_of(term)
        .ok_or_else(|| ReasonError::UnknownTerm(term.to_owned()))?;
    let resolved = resolve(ontology, start)?;
    let view = class_view(ontology, &resolved, class);
    Ok(Ratio {
        value: view.ratio(t),
        no_other_terms: view.others == 0,
    })
}

pub fn selective_staircase(
    ontology: &Ontology,
    start: &StartingTermSets,
    threshold: f64,
) -> Result<ClassTermSets, ReasonError> {
    generalize(
        ontology,
        start,
        &ReasoningConfig {
            algorithm: Algorithm::SelectiveStaircase,
            threshold,
            ..Default::default()
        },
    )
}

pub fn ancestry(
    ontology: &Ontology,
    start: &StartingTermSets,
    weight: f64,
    seed: u64,
) -> Result<ClassTermSets, ReasonError> {
    generalize(
        ontology,
        start,
        &ReasoningConfig {
            algorithm: Algorithm::Ancestry,
            weight,
            seed,
            ..Default::default()
        },
    )
}

struct ClassOutcome {
    terms: BTreeMap<u32, u32>,
    passes: usize,
}

pub fn generalize(
    ontology: &Ontology,
    start: &StartingTermSets,
    config: &ReasoningConfig,
) -> Result<ClassTermSets, ReasonError> {
    match config.algorithm {
        Algorithm::SelectiveStaircase if !(0.0..=1.0).contains(&config.threshold) => {
            return Err(ReasonError::InvalidParameter(format!(
                "threshold must lie in [0, 1], got {}",
                config.threshold
            )))
        }
        Algorithm::Ancestry if !(config.weight > 0.0 && config.weight.is_finite()) => {
            return Err(ReasonError::InvalidParameter(format!(
                "weight must be positive, got {}",
                config.weight
            )))
        }
        _ => {}
    }
    let limit = config.max_iterations.unwrap_or(ontology.len()).max(1);
    let resolved = resolve(ontology, start)?;

    let outcomes: Vec<(String, ClassOutcome)> = resolved
        .keys()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|class| {
            let view = class_view(ontology, &resolved, class);
            let outcome = match config.algorithm {
                Algorithm::SelectiveStaircase => {
                    staircase_class(ontology, &view, config.threshold, limit)
                }
                Algorithm::Ancestry => {
                    let mut rng = class_rng(config.seed, class);
                    ancestry_class(ontology, &view, config.weight, limit, &mut rng)
                }
            };
            outcome
                .map(|o| (class.clone(), o))
                .ok_or_else(|| ReasonError::IterationLimit {
                    class: class.clone(),
                    limit,
                })
        })
        .collect::<Result<_, _>>()?;

    let mut out = ClassTermSets::default();
    for (class, outcome) in outcomes {
        if resolved[&class].is_empty() {
            out.empty_classes.insert(class.clone());
        }
        out.per_class.insert(
            class.clone(),
            outcome
                .terms
                .into_iter()
                .map(|(t, d)| (ontology.id_at(t).clone(), d))
                .collect(),
        );
        out.converged.insert(class.clone(), true);
        out.passes.insert(class, outcome.passes);
    }
    Ok(out)
}

/// Independent stream per class, so parallel and serial runs agree.
fn class_rng(seed: u64, class: &str) -> ChaCha8Rng {
    let digest = Sha256::new()
        .chain_update(seed.to_le_bytes())
        .chain_update(class.as_bytes())
        .finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(key)
}

/// Memoized reflexive-ancestor sets.
struct Ancestors<'a> {
    ontology: &'a Ontology,
    cache: HashMap<u32, HashSet<u32>>,
}

impl<'a> Ancestors<'a> {
    fn new(ontology: &'a Ontology) -> Self {
        Ancestors {
            ontology,
            cache: HashMap::new(),
        }
    }

    /// Whether `x` lies strictly below `p`.
    fn strictly_below(&mut self, x: u32, p: u32) -> bool {
        x != p
            && self
                .cache
                .entry(x)
                .or_insert_with(|| self.ontology.ancestor_indices(x).into_iter().collect())
                .contains(&p)
    }
}

/// Returns `None` when the pass limit is hit.
///
/// Each pass proposes the parents of the terms first reached in the previous
/// pass. An accepted parent absorbs every current member below it and joins
/// the set unless a current member already lies above it; either way it is
/// reached, so its own parents are proposed next pass even when it was
/// absorbed in the same pass it was accepted.
fn staircase_class(
    ontology: &Ontology,
    view: &ClassView,
    threshold: f64,
    limit: usize,
) -> Option<ClassOutcome> {
    let mut below = Ancestors::new(ontology);
    let mut current: BTreeMap<u32, u32> = BTreeMap::new();
    for &t in &view.own {
        if !view.own.iter().any(|&o| below.strictly_below(t, o)) {
            current.insert(t, 0);
        }
    }
    // Generalization depth of every term reached so far, absorbed or not.
    let mut reached: BTreeMap<u32, u32> = view.own.iter().map(|&t| (t, 0)).collect();
    let mut frontier: BTreeSet<u32> = reached.keys().copied().collect();
    let mut passes = 0;
    loop {
        if passes == limit {
            return None;
        }
        passes += 1;
        let parents: BTreeSet<u32> = frontier
            .iter()
            .flat_map(|&t| ontology.parent_indices(t).iter().copied())
            .collect();
        let mut next = BTreeSet::new();
        for p in parents {
            if view.ratio(p) > threshold {
                continue;
            }
            let depth = 1 + reached
                .iter()
                .filter(|&(&x, _)| below.strictly_below(x, p))
                .map(|(_, &d)| d)
                .max()
                .unwrap_or(0);
            let entry = reached.entry(p).or_insert_with(|| {
                next.insert(p);
                depth
            });
            *entry = (*entry).max(depth);
            let depth = *entry;

            current.retain(|&x, _| !below.strictly_below(x, p));
            let covered = current.keys().any(|&x| below.strictly_below(p, x));
            if !covered {
                current.insert(p, depth);
            }
        }
        if next.is_empty() {
            return Some(ClassOutcome {
                terms: current,
                passes,
            });
        }
        frontier = next;
    }
}

/// Returns `None` when the pass limit is hit.
fn ancestry_class(
    ontology: &Ontology,
    view: &ClassView,
    weight: f64,
    limit: usize,
    rng: &mut ChaCha8Rng,
) -> Option<ClassOutcome> {
    let mut current: BTreeMap<u32, u32> = view.own.iter().map(|&t| (t, 0)).collect();
    let mut passes = 0;
    loop {
        if current.len() < 2 {
            return Some(ClassOutcome {
                terms: current,
                passes,
            });
        }
        if passes == limit {
            return None;
        }
        passes += 1;

        let snapshot: Vec<u32> = current.keys().copied().collect();
        let mut used = vec![false; snapshot.len()];
        let mut added: BTreeMap<u32, u32> = BTreeMap::new();
        let mut accepted = false;
        for i in 0..snapshot.len() {
            if used[i] {
                continue;
            }
            let partners: Vec<usize> = (0..snapshot.len())
                .filter(|&j| j != i && !used[j])
                .collect();
            if partners.is_empty() {
                continue;
            }
            let j = partners[rng.random_range(0..partners.len())];
            let (term, partner) = (snapshot[i], snapshot[j]);
            let Some((anc, depth)) = ontology.lca_index(term, partner) else {
                continue;
            };
            let score = view.ratio(anc) / (depth.max(1) as f64 * weight);
            if score < 0.5 {
                let d = 1 + current[&term].max(current[&partner]);
                let slot = added.entry(anc).or_insert(0);
                *slot = (*slot).max(d);
                used[i] = true;
                used[j] = true;
                accepted = true;
            }
        }
        if !accepted {
            return Some(ClassOutcome {
                terms: current,
                passes,
            });
        }
        for (i, t) in snapshot.iter().enumerate() {
            if used[i] {
                current.remove(t);
            }
        }
        for (anc, d) in added {
            let slot = current.entry(anc).or_insert(0);
            *slot = (*slot).max(d);
        }
    }
}
