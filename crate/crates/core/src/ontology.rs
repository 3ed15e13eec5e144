//! Typed ontology DAG parsed from OBO text.
//!
//! Edges point from the more specific term (child) to the more general one
//! (parent). Every relation kind in the active set is traversed the same way;
//! kinds outside it are kept in [`Ontology::edges`] but never walked.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Identifier of an ontology term, e.g. `GO:0008150`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TermId(String);

impl TermId {
    pub fn new(id: impl Into<String>) -> Self {
        TermId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for TermId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for TermId {
    fn from(s: &str) -> Self {
        TermId(s.to_owned())
    }
}

impl From<String> for TermId {
    fn from(s: String) -> Self {
        TermId(s)
    }
}

impl std::borrow::Borrow<str> for TermId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationKind {
    IsA,
    PartOf,
    Regulates,
    NegativelyRegulates,
    PositivelyRegulates,
}

impl RelationKind {
    pub const ALL: [RelationKind; 5] = [
        RelationKind::IsA,
        RelationKind::PartOf,
        RelationKind::Regulates,
        RelationKind::NegativelyRegulates,
        RelationKind::PositivelyRegulates,
    ];

    /// Token used in OBO `relationship:` lines (and `is_a` for the subsumption edge).
    pub fn obo_token(self) -> &'static str {
        match self {
            RelationKind::IsA => "is_a",
            RelationKind::PartOf => "part_of",
            RelationKind::Regulates => "regulates",
            RelationKind::NegativelyRegulates => "negatively_regulates",
            RelationKind::PositivelyRegulates => "positively_regulates",
        }
    }

    pub fn all() -> BTreeSet<RelationKind> {
        Self::ALL.into_iter().collect()
    }
}

impl fmt::Display for RelationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.obo_token())
    }
}

impl FromStr for RelationKind {
    type Err = OntologyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.obo_token() == s)
            .ok_or_else(|| OntologyError::UnknownRelation(s.to_owned()))
    }
}

#[derive(Debug, Error)]
pub enum OntologyError {
    #[error("line {line}: [Term] stanza has no `id:`")]
    MissingId { line: usize },
    #[error("line {line}: input is not valid UTF-8")]
    Encoding { line: usize },
    #[error("cycle over active relations: {}", display_cycle(.cycle))]
    Cycle { cycle: Vec<TermId> },
    #[error("unknown term `{0}`")]
    UnknownTerm(String),
    #[error("lowest common ancestor needs two distinct terms, got `{0}` twice")]
    SameTerm(String),
    #[error("unknown relation kind `{0}`")]
    UnknownRelation(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn display_cycle(cycle: &[TermId]) -> String {
    cycle
        .iter()
        .map(TermId::as_str)
        .collect::<Vec<_>>()
        .join(" -> ")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Term {
    pub id: TermId,
    pub name: String,
    pub namespace: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge<'a> {
    pub child: &'a TermId,
    pub parent: &'a TermId,
    pub kind: RelationKind,
}

/// Incrementally collects terms and edges, then freezes them into an [`Ontology`].
///
/// Parents that were never declared become placeholder terms with an empty name.
#[derive(Debug, Default, Clone)]
pub struct OntologyBuilder {
    terms: BTreeMap<TermId, (String, String)>,
    edges: BTreeSet<(TermId, TermId, RelationKind)>,
    unknown_relations: BTreeMap<String, usize>,
}

impl OntologyBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn term(&mut self, id: impl Into<TermId>, name: &str, namespace: &str) -> &mut Self {
        let entry = self.terms.entry(id.into()).or_default();
        if !name.is_empty() {
            entry.0 = name.to_owned();
        }
        if !namespace.is_empty() {
            entry.1 = namespace.to_owned();
        }
        self
    }

    pub fn edge(
        &mut self,
        child: impl Into<TermId>,
        parent: impl Into<TermId>,
        kind: RelationKind,
    ) -> &mut Self {
        self.edges.insert((child.into(), parent.into(), kind));
        self
    }

    fn unknown_relation(&mut self, token: &str) {
        *self.unknown_relations.entry(token.to_owned()).or_default() += 1;
    }

    pub fn build(mut self, active: &BTreeSet<RelationKind>) -> Result<Ontology, OntologyError> {
        for (child, parent, _) in &self.edges {
            for id in [child, parent] {
                if !self.terms.contains_key(id) {
                    self.terms.insert(id.clone(), Default::default());
                }
            }
        }

        // BTreeMap iteration gives indices in TermId order, so index order is id order.
        let terms: Vec<Term> = self
            .terms
            .into_iter()
            .map(|(id, (name, namespace))| Term {
                id,
                name,
                namespace,
            })
            .collect();
        let index: HashMap<TermId, u32> = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.id.clone(), i as u32))
            .collect();

        let n = terms.len();
        let mut parents = vec![Vec::new(); n];
        let mut children = vec![Vec::new(); n];
        let mut edges = Vec::with_capacity(self.edges.len());
        for (child, parent, kind) in &self.edges {
            let c = index[child];
            let p = index[parent];
            edges.push((c, p, *kind));
            if active.contains(kind) {
                parents[c as usize].push(p);
                children[p as usize].push(c);
            }
        }
        for list in parents.iter_mut().chain(children.iter_mut()) {
            list.sort_unstable();
            list.dedup();
        }

        let ontology = Ontology {
            terms,
            index,
            edges,
            active: active.clone(),
            parents,
            children,
            unknown_relations: self.unknown_relations,
        };
        if let Some(cycle) = ontology.find_cycle() {
            return Err(OntologyError::Cycle {
                cycle: cycle
                    .into_iter()
                    .map(|i| ontology.terms[i as usize].id.clone())
                    .collect(),
            });
        }
        Ok(ontology)
    }
}

/// Immutable ontology. Term indices follow lexicographic [`TermId`] order.
#[derive(Debug, Clone)]
pub struct Ontology {
    terms: Vec<Term>,
    index: HashMap<TermId, u32>,
    edges: Vec<(u32, u32, RelationKind)>,
    active: BTreeSet<RelationKind>,
    parents: Vec<Vec<u32>>,
    children: Vec<Vec<u32>>,
    unknown_relations: BTreeMap<String, usize>,
}

#[derive(Default)]
struct Stanza {
    line: usize,
    id: Option<String>,
    name: String,
    namespace: String,
    obsolete: bool,
    is_a: Vec<String>,
    relationships: Vec<(String, String)>,
}

fn first_token(value: &str) -> Option<&str> {
    value.split_whitespace().next().filter(|t| *t != "!")
}

impl Ontology {
    /// Parses the OBO subset: `[Term]` stanzas with `id`, `name`, `namespace`,
    /// `is_a`, `relationship` and `is_obsolete`. Everything else is skipped.
    pub fn parse_obo<R: BufRead>(
        reader: R,
        active: &BTreeSet<RelationKind>,
    ) -> Result<Ontology, OntologyError> {
        let mut stanzas = Vec::new();
        let mut current: Option<Stanza> = None;

        for (i, raw) in reader.split(b'\n').enumerate() {
            let line_no = i + 1;
            let raw = raw?;
            let line =
                std::str::from_utf8(&raw).map_err(|_| OntologyError::Encoding { line: line_no })?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('!') {
                continue;
            }
            if line.starts_with('[') {
                if let Some(s) = current.take() {
                    stanzas.push(s);
                }
                if line == "[Term]" {
                    current = Some(Stanza {
                        line: line_no,
                        ..Default::default()
                    });
                }
                continue;
            }
            let Some(stanza) = current.as_mut() else {
                continue;
            };
            let Some((key, value)) = line.split_once(':') else {
                continue;
            };
            let value = value.trim();
            match key.trim() {
                "id" => {
                    if let Some(id) = first_token(value) {
                        stanza.id = Some(id.to_owned());
                    }
                }
                "name" => stanza.name = value.to_owned(),
                "namespace" => stanza.namespace = value.to_owned(),
                "is_obsolete" => stanza.obsolete = value == "true",
                "is_a" => {
                    if let Some(parent) = first_token(value) {
                        stanza.is_a.push(parent.to_owned());
                    }
                }
                "relationship" => {
                    let mut tokens = value.split_whitespace();
                    if let (Some(kind), Some(target)) = (tokens.next(), tokens.next()) {
                        stanza
                            .relationships
                            .push((kind.to_owned(), target.to_owned()));
                    }
                }
                _ => {}
            }
        }
        if let Some(s) = current.take() {
            stanzas.push(s);
        }

        let mut obsolete = BTreeSet::new();
        for s in &stanzas {
            match &s.id {
                None => return Err(OntologyError::MissingId { line: s.line }),
                Some(id) if s.obsolete => {
                    obsolete.insert(id.clone());
                }
                Some(_) => {}
            }
        }

        let mut builder = OntologyBuilder::new();
        for s in stanzas.into_iter().filter(|s| !s.obsolete) {
            let id = s.id.expect("checked above");
            builder.term(id.as_str(), &s.name, &s.namespace);
            for parent in s.is_a {
                if !obsolete.contains(&parent) {
                    builder.edge(id.as_str(), parent, RelationKind::IsA);
                }
            }
            for (token, parent) in s.relationships {
                match token.parse::<RelationKind>() {
                    Ok(kind) if kind != RelationKind::IsA => {
                        if !obsolete.contains(&parent) {
                            builder.edge(id.as_str(), parent, kind);
                        }
                    }
                    _ => builder.unknown_relation(&token),
                }
            }
        }
        builder.build(active)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn term(&self, id: &str) -> Option<&Term> {
        self.index.get(id).map(|&i| &self.terms[i as usize])
    }

    /// Display name of a term, falling back to its id when the name is empty.
    pub fn display_name<'a>(&'a self, id: &'a TermId) -> &'a str {
        match self.term(id.as_str()) {
            Some(t) if !t.name.is_empty() => &t.name,
            _ => id.as_str(),
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = &Term> {
        self.terms.iter()
    }

    /// All parsed edges, including those whose kind is not active.
    pub fn edges(&self) -> impl Iterator<Item = Edge<'_>> {
        self.edges.iter().map(|&(c, p, kind)| Edge {
            child: &self.terms[c as usize].id,
            parent: &self.terms[p as usize].id,
            kind,
        })
    }

    pub fn active_relations(&self) -> &BTreeSet<RelationKind> {
        &self.active
    }

    /// Counts of `relationship:` tokens that did not match a known relation kind.
    pub fn unknown_relations(&self) -> &BTreeMap<String, usize> {
        &self.unknown_relations
    }

    pub fn parents(&self, id: &str) -> Result<Vec<&TermId>, OntologyError> {
        let i = self.require(id)?;
        Ok(self.ids(self.parents[i as usize].iter().copied()))
    }

    pub fn children(&self, id: &str) -> Result<Vec<&TermId>, OntologyError> {
        let i = self.require(id)?;
        Ok(self.ids(self.children[i as usize].iter().copied()))
    }

    /// Reflexive-transitive closure of the child relation, sorted by id.
    pub fn descendants(&self, id: &str) -> Result<Vec<&TermId>, OntologyError> {
        let i = self.require(id)?;
        let mut found = self.closure(i, &self.children);
        found.sort_unstable();
        Ok(self.ids(found))
    }

    /// Reflexive-transitive closure of the parent relation, sorted by id.
    pub fn ancestors(&self, id: &str) -> Result<Vec<&TermId>, OntologyError> {
        let i = self.require(id)?;
        let mut found = self.closure(i, &self.parents);
        found.sort_unstable();
        Ok(self.ids(found))
    }

    /// Lowest common ancestor of two distinct terms.
    ///
    /// The depth is the shorter of the two path lengths to the ancestor. Ties go
    /// to the smaller longer-path length, then to the smaller id.
    pub fn lowest_common_ancestor(
        &self,
        a: &str,
        b: &str,
    ) -> Result<Option<(&TermId, u32)>, OntologyError> {
        if a == b {
            return Err(OntologyError::SameTerm(a.to_owned()));
        }
        let a = self.require(a)?;
        let b = self.require(b)?;
        Ok(self
            .lca_index(a, b)
            .map(|(anc, depth)| (&self.terms[anc as usize].id, depth)))
    }

    /// Terms ordered so that every child precedes all of its parents.
    pub fn topological_order(&self) -> Vec<&TermId> {
        let n = self.terms.len();
        let mut pending: Vec<usize> = self.children.iter().map(Vec::len).collect();
        let mut queue: VecDeque<u32> = (0..n as u32)
            .filter(|&i| pending[i as usize] == 0)
            .collect();
        let mut order = Vec::with_capacity(n);
        while let Some(i) = queue.pop_front() {
            order.push(i);
            for &p in &self.parents[i as usize] {
                pending[p as usize] -= 1;
                if pending[p as usize] == 0 {
                    queue.push_back(p);
                }
            }
        }
        debug_assert_eq!(order.len(), n, "ontology invariant: acyclic");
        self.ids(order)
    }

    pub(crate) fn index_of(&self, id: &str) -> Option<u32> {
        self.index.get(id).copied()
    }

    pub(crate) fn require(&self, id: &str) -> Result<u32, OntologyError> {
        self.index_of(id)
            .ok_or_else(|| OntologyError::UnknownTerm(id.to_owned()))
    }

    pub(crate) fn id_at(&self, i: u32) -> &TermId {
        &self.terms[i as usize].id
    }

    pub(crate) fn parent_indices(&self, i: u32) -> &[u32] {
        &self.parents[i as usize]
    }

    /// Reflexive ancestors of `i`, unordered.
    pub(crate) fn ancestor_indices(&self, i: u32) -> Vec<u32> {
        self.closure(i, &self.parents)
    }

    /// Shortest upward path length from `i` to each of its reflexive ancestors.
    pub(crate) fn ancestor_distances(&self, i: u32) -> HashMap<u32, u32> {
        let mut dist = HashMap::from([(i, 0)]);
        let mut queue = VecDeque::from([i]);
        while let Some(u) = queue.pop_front() {
            let d = dist[&u];
            for &p in &self.parents[u as usize] {
                dist.entry(p).or_insert_with(|| {
                    queue.push_back(p);
                    d + 1
                });
            }
        }
        dist
    }

    pub(crate) fn lca_index(&self, a: u32, b: u32) -> Option<(u32, u32)> {
        let from_a = self.ancestor_distances(a);
        let from_b = self.ancestor_distances(b);
        from_a
            .iter()
            .filter_map(|(&anc, &da)| from_b.get(&anc).map(|&db| (da.min(db), da.max(db), anc)))
            .min()
            .map(|(depth, _, anc)| (anc, depth))
    }

    fn closure(&self, start: u32, adjacency: &[Vec<u32>]) -> Vec<u32> {
        let mut seen = vec![false; self.terms.len()];
        seen[start as usize] = true;
        let mut out = vec![start];
        let mut next = 0;
        while next < out.len() {
            let u = out[next];
            next += 1;
            for &v in &adjacency[u as usize] {
                if !std::mem::replace(&mut seen[v as usize], true) {
                    out.push(v);
                }
            }
        }
        out
    }

    fn ids(&self, indices: impl IntoIterator<Item = u32>) -> Vec<&TermId> {
        indices
            .into_iter()
            .map(|i| &self.terms[i as usize].id)
            .collect()
    }

    fn find_cycle(&self) -> Option<Vec<u32>> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            New,
            Open,
            Done,
        }
        let n = self.terms.len();
        let mut mark = vec![Mark::New; n];
        for root in 0..n {
            if mark[root] != Mark::New {
                continue;
            }
            // Iterative DFS; `path` holds the open nodes with their next-edge cursor.
            let mut path: Vec<(u32, usize)> = vec![(root as u32, 0)];
            mark[root] = Mark::Open;
            while let Some(&mut (u, ref mut cursor)) = path.last_mut() {
                let parents = &self.parents[u as usize];
                if *cursor < parents.len() {
                    let p = parents[*cursor];
                    *cursor += 1;
                    match mark[p as usize] {
                        Mark::New => {
                            mark[p as usize] = Mark::Open;
                            path.push((p, 0));
                        }
                        Mark::Open => {
                            let start = path.iter().position(|&(v, _)| v == p).unwrap();
                            let mut cycle: Vec<u32> =
                                path[start..].iter().map(|&(v, _)| v).collect();
                            cycle.push(p);
                            return Some(cycle);
                        }
                        Mark::Done => {}
                    }
                } else {
                    mark[u as usize] = Mark::Done;
                    path.pop();
                }
            }
        }
        None
    }
}
