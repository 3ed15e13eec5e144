mod common;

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use proptest::prelude::*;
use proptest::sample::Index;
use reex::explanations::{ExplanationSet, Instance};
use reex::reasoning;
use reex::{
    AggregateOptions, AnnotationMap, FeatureId, IcTable, Ontology, OntologyBuilder, RelationKind,
    StartingTermSets, TermId,
};

/// Parent choices per node; node `i` may only pick parents below `i`.
fn dag_strategy(max_nodes: usize) -> impl Strategy<Value = Vec<Vec<Index>>> {
    prop::collection::vec(prop::collection::vec(any::<Index>(), 0..3), 1..max_nodes)
}

fn kinds() -> [RelationKind; 3] {
    [
        RelationKind::IsA,
        RelationKind::PartOf,
        RelationKind::Regulates,
    ]
}

fn build(parents: &[Vec<Index>], kind_pick: &[Index]) -> Ontology {
    let mut b = OntologyBuilder::new();
    for (i, ps) in parents.iter().enumerate() {
        b.term(common::node(i), "", "");
        if i == 0 {
            continue;
        }
        for (j, p) in ps.iter().enumerate() {
            let kind = kind_pick
                .get(i + j)
                .map_or(RelationKind::IsA, |k| kinds()[k.index(3)]);
            b.edge(common::node(i), common::node(p.index(i)), kind);
        }
    }
    b.build(&RelationKind::all()).unwrap()
}

fn ids(o: &Ontology) -> Vec<TermId> {
    o.terms().map(|t| t.id.clone()).collect()
}

/// Shortest upward distance to every reflexive ancestor.
fn distances_up(o: &Ontology, from: &str) -> BTreeMap<String, u32> {
    let mut dist = BTreeMap::from([(from.to_owned(), 0)]);
    let mut queue = VecDeque::from([from.to_owned()]);
    while let Some(t) = queue.pop_front() {
        let d = dist[&t];
        for p in o.parents(&t).unwrap() {
            if !dist.contains_key(p.as_str()) {
                dist.insert(p.to_string(), d + 1);
                queue.push_back(p.to_string());
            }
        }
    }
    dist
}

fn pick<'a>(v: &'a [TermId], picks: &[Index]) -> BTreeSet<&'a TermId> {
    picks.iter().map(|i| &v[i.index(v.len())]).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn closures_are_consistent(parents in dag_strategy(30), kp in prop::collection::vec(any::<Index>(), 64)) {
        let o = build(&parents, &kp);
        let down = common::brute_descendants(&o);
        for t in ids(&o) {
            let desc: BTreeSet<String> = o.descendants(t.as_str()).unwrap().into_iter().map(|d| d.to_string()).collect();
            prop_assert_eq!(&desc, &down[t.as_str()]);
            for a in o.ancestors(t.as_str()).unwrap() {
                prop_assert!(down[a.as_str()].contains(t.as_str()));
            }
            for c in o.children(t.as_str()).unwrap() {
                prop_assert!(o.parents(c.as_str()).unwrap().contains(&&t));
            }
        }
        let order = o.topological_order();
        let rank: BTreeMap<&TermId, usize> = order.iter().enumerate().map(|(i, t)| (*t, i)).collect();
        prop_assert_eq!(rank.len(), o.len());
        for e in o.edges() {
            prop_assert!(rank[e.child] < rank[e.parent]);
        }
    }

    #[test]
    fn inactive_relations_are_not_traversed(parents in dag_strategy(25), kp in prop::collection::vec(any::<Index>(), 64)) {
        let full = build(&parents, &kp);
        let mut b = OntologyBuilder::new();
        for t in full.terms() {
            b.term(t.id.clone(), "", "");
        }
        for e in full.edges() {
            b.edge(e.child.clone(), e.parent.clone(), e.kind);
        }
        let only_is_a = b.build(&BTreeSet::from([RelationKind::IsA])).unwrap();
        for t in ids(&full) {
            let narrow: BTreeSet<_> = only_is_a.ancestors(t.as_str()).unwrap().into_iter().collect();
            let wide: BTreeSet<_> = full.ancestors(t.as_str()).unwrap().into_iter().collect();
            prop_assert!(narrow.is_subset(&wide));
            for p in only_is_a.parents(t.as_str()).unwrap() {
                let kind = full.edges().find(|e| e.child == &t && e.parent == p).unwrap().kind;
                prop_assert_eq!(kind, RelationKind::IsA);
            }
        }
    }

    #[test]
    fn lca_matches_brute_force(parents in dag_strategy(25), a in any::<Index>(), b in any::<Index>()) {
        let o = build(&parents, &[]);
        let v = ids(&o);
        let (a, b) = (&v[a.index(v.len())], &v[b.index(v.len())]);
        prop_assume!(a != b);
        let da = distances_up(&o, a.as_str());
        let db = distances_up(&o, b.as_str());
        let best = da
            .iter()
            .filter_map(|(t, &x)| db.get(t).map(|&y| (x.min(y), x.max(y), t.clone())))
            .min();
        let got = o.lowest_common_ancestor(a.as_str(), b.as_str()).unwrap();
        match best {
            None => prop_assert!(got.is_none()),
            Some((depth, _, id)) => prop_assert_eq!(got, Some((&TermId::from(id), depth))),
        }
    }

    #[test]
    fn annotation_counts_follow_the_true_path(
        parents in dag_strategy(30),
        annotations in prop::collection::vec(prop::collection::vec(any::<Index>(), 1..4), 1..20),
    ) {
        let o = build(&parents, &[]);
        let v = ids(&o);
        let map = AnnotationMap::from_entries(
            annotations.iter().enumerate().map(|(f, picks)| (format!("f{f}"), pick(&v, picks).into_iter().cloned().collect::<Vec<_>>())),
        );
        let counts = map.term_annotation_counts(&o);
        let down = common::brute_descendants(&o);
        for t in &v {
            let expected = map
                .iter()
                .filter(|(_, terms)| terms.iter().any(|x| down[t.as_str()].contains(x.as_str())))
                .count();
            prop_assert_eq!(counts[t], expected);
            prop_assert!(counts[t] <= map.universe_size());
            for p in o.parents(t.as_str()).unwrap() {
                prop_assert!(counts[p] >= counts[t]);
            }
        }

        let table = IcTable::build(&counts, map.universe_size()).unwrap();
        for t in &v {
            let g = table.genq([t]).unwrap();
            prop_assert!((0.0..=1.0).contains(&g));
            for p in o.parents(t.as_str()).unwrap() {
                // A parent is never more specific than its child.
                if counts[t] > 0 {
                    prop_assert!(table.ic(p.as_str()).unwrap() <= table.ic(t.as_str()).unwrap());
                }
            }
        }
    }

    #[test]
    fn aggregation_ignores_instance_order(
        rows in prop::collection::vec((0usize..3, 0usize..3, prop::collection::vec(-5.0f64..5.0, 4)), 1..30),
        shuffle in any::<u64>(),
        absolute in any::<bool>(),
        misclassified in any::<bool>(),
    ) {
        let classes: Vec<String> = ["a", "b", "c"].map(String::from).to_vec();
        let instances: Vec<Instance> = rows
            .iter()
            .map(|(t, p, values)| Instance {
                true_class: classes[*t].clone(),
                predicted_class: classes[*p].clone(),
                values: values.clone(),
            })
            .collect();
        let features: Vec<FeatureId> = (0..4).map(|i| FeatureId::new(format!("f{i}"))).collect();
        let opts = AggregateOptions { use_absolute: absolute, include_misclassified: misclassified };
        let set = ExplanationSet { classes: classes.clone(), features: features.clone(), instances: instances.clone() };
        let mut shuffled = instances;
        let mut rng = common::rng(shuffle);
        rand::seq::SliceRandom::shuffle(&mut shuffled[..], &mut rng);
        let other = ExplanationSet { classes, features, instances: shuffled };

        let x = set.aggregate(opts);
        let y = other.aggregate(opts);
        prop_assert_eq!(&x.empty_classes, &y.empty_classes);
        for (c, vx) in &x.per_class {
            for (a, b) in vx.iter().zip(&y.per_class[c]) {
                prop_assert!((a - b).abs() <= 1e-9);
            }
            if absolute {
                prop_assert!(vx.iter().all(|v| *v >= 0.0));
            }
        }
    }

    #[test]
    fn threshold_selections_nest(
        values in prop::collection::vec(0.0f64..1.0, 1..40),
        k in 1usize..20,
        step in 0.5f64..0.999,
    ) {
        let features: Vec<FeatureId> = (0..values.len()).map(|i| FeatureId::new(format!("f{i:02}"))).collect();
        let agg = reex::AggregatedImportance {
            classes: vec!["c".into()],
            features,
            per_class: BTreeMap::from([("c".into(), values.clone())]),
            empty_classes: BTreeSet::new(),
        };
        let small = agg.dynamic_threshold("c", k, step).unwrap();
        let large = agg.dynamic_threshold("c", k + 1, step).unwrap();
        prop_assert!(large.threshold <= small.threshold);
        let small_set: BTreeSet<_> = small.features.iter().collect();
        let large_set: BTreeSet<_> = large.features.iter().collect();
        prop_assert!(small_set.is_subset(&large_set));
        for f in &small.features {
            let i: usize = f.as_str()[1..].parse().unwrap();
            prop_assert!(values[i] > small.threshold);
        }
    }

    #[test]
    fn staircase_is_sound(
        parents in dag_strategy(30),
        starts in prop::collection::vec(prop::collection::vec(any::<Index>(), 1..5), 2..4),
        threshold in prop_oneof![Just(0.0), 0.0f64..=1.0],
    ) {
        let o = build(&parents, &[]);
        let v = ids(&o);
        let start = StartingTermSets::from_terms(
            starts.iter().enumerate().map(|(c, picks)| (format!("c{c}"), pick(&v, picks).into_iter().cloned().collect::<Vec<_>>())),
        );
        let down = common::brute_descendants(&o);
        let out = reasoning::selective_staircase(&o, &start, threshold).unwrap();
        for (class, terms) in &out.per_class {
            let own = &start.per_class[class];
            for t in terms.keys() {
                prop_assert!(own.iter().any(|s| down[t.as_str()].contains(s.as_str())));
                let r = reasoning::intersection_ratio(&o, &start, class, t.as_str()).unwrap();
                prop_assert!(r.value <= threshold || own.contains(t));
            }
            // Output is an antichain.
            for a in terms.keys() {
                for b in terms.keys() {
                    prop_assert!(a == b || !down[b.as_str()].contains(a.as_str()));
                }
            }
        }
        if threshold == 0.0 {
            for (class, terms) in &out.per_class {
                let want = common::maximal_safe_ancestors(&down, &start, class);
                let got: BTreeSet<String> = terms.keys().map(|t| t.to_string()).collect();
                prop_assert_eq!(got, want);
            }
        }
    }

    #[test]
    fn ancestry_is_sound(
        parents in dag_strategy(30),
        starts in prop::collection::vec(prop::collection::vec(any::<Index>(), 1..6), 1..4),
        weight in prop_oneof![Just(1e-6), 0.01f64..5.0],
        seed in any::<u64>(),
    ) {
        let o = build(&parents, &[]);
        let v = ids(&o);
        let start = StartingTermSets::from_terms(
            starts.iter().enumerate().map(|(c, picks)| (format!("c{c}"), pick(&v, picks).into_iter().cloned().collect::<Vec<_>>())),
        );
        let down = common::brute_descendants(&o);
        let out = reasoning::ancestry(&o, &start, weight, seed).unwrap();
        let again = reasoning::ancestry(&o, &start, weight, seed).unwrap();
        prop_assert_eq!(&out.per_class, &again.per_class);
        for (class, terms) in &out.per_class {
            let own = &start.per_class[class];
            prop_assert!(terms.len() <= own.len());
            for (t, &depth) in terms {
                let below = own.iter().filter(|s| down[t.as_str()].contains(s.as_str())).count();
                if depth > 0 {
                    prop_assert!(below >= 2, "{} generalizes {} starting terms", t, below);
                } else {
                    prop_assert!(own.contains(t));
                }
            }
        }
    }
}
