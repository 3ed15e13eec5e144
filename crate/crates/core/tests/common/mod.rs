//! Fixture generators shared by the integration test targets.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::PathBuf;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reex::{
    AnnotationMap, Explanations, Ontology, OntologyBuilder, RelationKind, StartingTermSets,
};

pub fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
}

pub fn toy() -> Ontology {
    let text = std::fs::read(data("toy.obo")).unwrap();
    Ontology::parse_obo(&text[..], &RelationKind::all()).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn node(i: usize) -> String {
    format!("N{i:03}")
}

/// Random DAG over `n` nodes where node 0 is the only root and every other
/// node has between one and `max_parents` parents with smaller indices.
pub fn random_dag(rng: &mut ChaCha8Rng, n: usize, max_parents: usize) -> Ontology {
    let mut b = OntologyBuilder::new();
    b.term(node(0), "", "");
    for i in 1..n {
        b.term(node(i), "", "");
        let k = rng.random_range(1..=max_parents.min(i));
        let parents: Vec<usize> = rand::seq::index::sample(rng, i, k).into_iter().collect();
        for p in parents {
            b.edge(node(i), node(p), RelationKind::IsA);
        }
    }
    b.build(&RelationKind::all()).unwrap()
}

/// Every feature annotated with one to three random terms.
pub fn random_mapping(rng: &mut ChaCha8Rng, o: &Ontology, features: usize) -> AnnotationMap {
    let ids: Vec<String> = o.terms().map(|t| t.id.to_string()).collect();
    AnnotationMap::from_entries((0..features).map(|f| {
        let k = rng.random_range(1..=3);
        let terms: Vec<String> = ids.choose_multiple(rng, k).cloned().collect();
        (format!("f{f}"), terms)
    }))
}

/// Per-class random starting sets over the terms of `o`; sets may overlap.
pub fn random_start(
    rng: &mut ChaCha8Rng,
    o: &Ontology,
    classes: usize,
    max_size: usize,
) -> StartingTermSets {
    let ids: Vec<String> = o.terms().map(|t| t.id.to_string()).collect();
    StartingTermSets::from_terms((0..classes).map(|c| {
        let k = rng.random_range(1..=max_size.min(ids.len()));
        let terms: Vec<String> = ids.choose_multiple(rng, k).cloned().collect();
        (format!("c{c}"), terms)
    }))
}

/// A generated dataset in its on-disk encodings, plus parsed forms.
pub struct Synthetic {
    pub obo: String,
    pub mapping_tsv: String,
    pub json: String,
    pub ontology: Ontology,
    pub mapping: AnnotationMap,
    pub explanations: Explanations,
}

/// Hierarchical ontology with one subtree per class. Features annotate leaves
/// of their class's subtree; instances of a class give that class's features
/// large explanation values and everything else small noise. A few nodes get
/// a second parent one level up in another subtree.
pub fn hierarchical(seed: u64) -> Synthetic {
    let mut rng = rng(seed);
    let classes = rng.random_range(3..=5);
    let mut names: Vec<String> = Vec::new();
    let mut edges: Vec<(usize, usize)> = Vec::new();
    let mut levels: Vec<Vec<usize>> = vec![vec![0]];
    names.push("root".into());

    let mut leaves_of: Vec<Vec<usize>> = Vec::new();
    for c in 0..classes {
        let hub = names.len();
        names.push(format!("class {c} hub"));
        edges.push((hub, 0));
        push_level(&mut levels, 1, hub);
        let depth = rng.random_range(3..=4);
        let mut frontier = vec![hub];
        for level in 2..=depth {
            let mut next = Vec::new();
            for &parent in &frontier {
                for _ in 0..rng.random_range(2..=3) {
                    let id = names.len();
                    names.push(format!("class {c} level {level} term {id}"));
                    edges.push((id, parent));
                    push_level(&mut levels, level, id);
                    next.push(id);
                }
            }
            frontier = next;
        }
        leaves_of.push(frontier);
    }

    // Cross links to a random node one level up keep the graph acyclic.
    let all_edges = edges.clone();
    for &(child, parent) in &all_edges {
        let level = levels.iter().position(|l| l.contains(&child)).unwrap();
        if level >= 3 && rng.random_bool(0.05) {
            let other = *levels[level - 1].choose(&mut rng).unwrap();
            if other != parent {
                edges.push((child, other));
            }
        }
    }

    let mut obo = String::from("format-version: 1.2\nontology: synthetic\n\n");
    let mut parents: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &(c, p) in &edges {
        parents.entry(c).or_default().push(p);
    }
    for (i, name) in names.iter().enumerate() {
        writeln!(
            obo,
            "[Term]\nid: S:{i:07}\nname: {name}\nnamespace: synthetic"
        )
        .unwrap();
        for p in parents.get(&i).into_iter().flatten() {
            writeln!(obo, "is_a: S:{p:07} ! {}", names[*p]).unwrap();
        }
        obo.push('\n');
    }

    let mut mapping_tsv = String::new();
    let mut features: Vec<(String, usize)> = Vec::new();
    for (c, leaves) in leaves_of.iter().enumerate() {
        for (j, &leaf) in leaves.iter().enumerate() {
            let f = format!("g{c}_{j}");
            let mut terms = vec![format!("S:{leaf:07}")];
            if rng.random_bool(0.1) {
                let extra = *leaves.choose(&mut rng).unwrap();
                if extra != leaf {
                    terms.push(format!("S:{extra:07}"));
                }
            }
            writeln!(mapping_tsv, "{f}\t{}", terms.join(",")).unwrap();
            features.push((f, c));
        }
    }

    let labels: Vec<String> = (0..classes).map(|c| format!("class{c}")).collect();
    let mut instances = Vec::new();
    for (c, label) in labels.iter().enumerate() {
        for _ in 0..12 {
            let predicted = if rng.random_bool(0.1) {
                labels.choose(&mut rng).unwrap().clone()
            } else {
                label.clone()
            };
            let values: Vec<f64> = features
                .iter()
                .map(|&(_, fc)| {
                    let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                    if fc == c {
                        sign * rng.random_range(0.3..1.0)
                    } else {
                        sign * rng.random_range(0.0..0.2)
                    }
                })
                .collect();
            instances.push(serde_json::json!({
                "true_class": label,
                "predicted_class": predicted,
                "values": values,
            }));
        }
    }
    let json = serde_json::json!({
        "classes": labels,
        "features": features.iter().map(|(f, _)| f).collect::<Vec<_>>(),
        "instances": instances,
    })
    .to_string();

    let ontology = Ontology::parse_obo(obo.as_bytes(), &RelationKind::all()).unwrap();
    let mapping = AnnotationMap::parse_for(mapping_tsv.as_bytes(), &ontology).unwrap();
    let explanations = Explanations::parse(json.as_bytes()).unwrap();
    Synthetic {
        obo,
        mapping_tsv,
        json,
        ontology,
        mapping,
        explanations,
    }
}

fn push_level(levels: &mut Vec<Vec<usize>>, level: usize, id: usize) {
    if levels.len() <= level {
        levels.resize(level + 1, Vec::new());
    }
    levels[level].push(id);
}

/// Brute-force reflexive descendant sets by repeated relaxation.
pub fn brute_descendants(o: &Ontology) -> BTreeMap<String, BTreeSet<String>> {
    let ids: Vec<String> = o.terms().map(|t| t.id.to_string()).collect();
    let mut down: BTreeMap<String, BTreeSet<String>> = ids
        .iter()
        .map(|i| (i.clone(), BTreeSet::from([i.clone()])))
        .collect();
    loop {
        let mut changed = false;
        for e in o.edges() {
            if !o.active_relations().contains(&e.kind) {
                continue;
            }
            let child = down[e.child.as_str()].clone();
            let parent = down.get_mut(e.parent.as_str()).unwrap();
            let before = parent.len();
            parent.extend(child);
            changed |= parent.len() != before;
        }
        if !changed {
            return down;
        }
    }
}

/// Expected staircase output at threshold 0 by exhaustive enumeration: the
/// maximal elements among the starting terms and their ancestors whose
/// reflexive descendants contain no starting term of another class.
pub fn maximal_safe_ancestors(
    down: &BTreeMap<String, BTreeSet<String>>,
    start: &StartingTermSets,
    class: &str,
) -> BTreeSet<String> {
    let own = &start.per_class[class];
    let others: BTreeSet<&str> = start
        .per_class
        .iter()
        .filter(|(c, _)| c.as_str() != class)
        .flat_map(|(_, t)| t.iter().map(|t| t.as_str()))
        .collect();
    let safe = |a: &str| down[a].iter().all(|d| !others.contains(d.as_str()));
    let mut candidates: BTreeSet<String> = BTreeSet::new();
    for (a, below) in down {
        if safe(a) && own.iter().any(|s| below.contains(s.as_str())) {
            candidates.insert(a.clone());
        }
    }
    for s in own {
        if !safe(s.as_str()) {
            candidates.insert(s.to_string());
        }
    }
    candidates
        .iter()
        .filter(|a| {
            !candidates
                .iter()
                .any(|b| b != *a && down[b.as_str()].contains(a.as_str()))
        })
        .cloned()
        .collect()
}
