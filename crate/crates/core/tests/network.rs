use std::collections::{BTreeSet, HashMap};

use narrative_core::corpus::{NarrativeTriplet, TripletKey};
use narrative_core::network::{
    build_network, disparity_alpha, disparity_filter, edge_alphas, export, export_dot, export_graphml, export_json,
    find_hubs, global_network, import_json, local_network, overlap_report, successors, with_forced_top, Edge,
    GraphFormat, HubClass, HubThresholds, NarrativeNetwork, WeightedTriplet, ALPHA_GLOBAL, ALPHA_LOCAL,
};
use narrative_core::significance::{RankedFragment, Score};
use proptest::prelude::*;
use quick_xml::events::Event;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `1 - (k - 1) * integral_0^p (1 - x)^(k - 2) dx` by composite Simpson.
fn alpha_by_quadrature(p: f64, k: usize) -> f64 {
    let n = 4000;
    let h = p / n as f64;
    let f = |x: f64| (1.0 - x).powi(k as i32 - 2);
    let mut s = f(0.0) + f(p);
    for i in 1..n {
        s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    1.0 - (k - 1) as f64 * s * h / 3.0
}

fn random_graph(rng: &mut ChaCha8Rng) -> NarrativeNetwork {
    let n_nodes = rng.gen_range(2..8);
    let n_edges = rng.gen_range(1..=20);
    let items: Vec<WeightedTriplet> = (0..n_edges)
        .map(|_| WeightedTriplet {
            triplet: TripletKey::new(
                &format!("n{}", rng.gen_range(0..n_nodes)),
                ["F", "G"][rng.gen_range(0..2)],
                &format!("n{}", rng.gen_range(0..n_nodes)),
            ),
            weight: rng.gen_range(0.01..5.0),
            support: 1,
        })
        .collect();
    build_network(&items)
}

#[test]
fn closed_form_matches_quadrature_on_random_graphs() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut compared = 0;
    for _ in 0..100 {
        let net = random_graph(&mut rng);
        assert!(net.edges.len() <= 20);
        let alphas = edge_alphas(&net).unwrap();
        let mut out: HashMap<&str, (f64, usize)> = HashMap::new();
        let mut inn: HashMap<&str, (f64, usize)> = HashMap::new();
        for e in &net.edges {
            let o = out.entry(&e.source).or_default();
            o.0 += e.weight;
            o.1 += 1;
            let i = inn.entry(&e.target).or_default();
            i.0 += e.weight;
            i.1 += 1;
        }
        for (e, (a_out, a_in)) in net.edges.iter().zip(alphas) {
            for (side, (s, k)) in [(a_out, out[e.source.as_str()]), (a_in, inn[e.target.as_str()])] {
                if k < 2 {
                    assert_eq!(side, None);
                    continue;
                }
                let oracle = alpha_by_quadrature(e.weight / s, k);
                let got = side.unwrap();
                assert!((got - oracle).abs() < 1e-8, "k={k} p={} got {got} oracle {oracle}", e.weight / s);
                compared += 1;
            }
        }
    }
    assert!(compared > 200);
}

fn edge_set(net: &NarrativeNetwork) -> BTreeSet<TripletKey> {
    net.edges.iter().map(Edge::key).collect()
}

#[test]
fn backbones_nest() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let levels = [1e-7, 1e-3, 0.01, 0.05, 0.2, 0.5, 0.9];
    for _ in 0..100 {
        let net = random_graph(&mut rng);
        let sets: Vec<BTreeSet<TripletKey>> =
            levels.iter().map(|&a| edge_set(&disparity_filter(&net, a).unwrap().backbone)).collect();
        for w in sets.windows(2) {
            assert!(w[0].is_subset(&w[1]));
        }
        assert!(sets.last().unwrap().is_subset(&edge_set(&net)));
    }
}

#[test]
fn closed_form_examples() {
    assert_eq!(disparity_alpha(0.5, 2), 0.5);
    let got: Vec<f64> = [0.7, 0.2, 0.1].iter().map(|&p| disparity_alpha(p, 3)).collect();
    for (g, want) in got.iter().zip([0.09, 0.64, 0.81]) {
        assert!((g - want).abs() < 1e-12);
    }
    let net = build_network(
        &[("x", 0.7), ("y", 0.2), ("z", 0.1)]
            .map(|(t, w)| WeightedTriplet {
                triplet: TripletKey::new("hub", "F", t),
                weight: w,
                support: 1,
            }),
    );
    let bb = disparity_filter(&net, 0.1).unwrap();
    let kept: Vec<&str> = bb.backbone.edges.iter().map(|e| e.target.as_str()).collect();
    assert_eq!(kept, ["x"]);
    assert_eq!((ALPHA_GLOBAL, ALPHA_LOCAL), (1e-7, 0.01));
}

fn score(a0: &str, a1: &str, s_w: f64) -> Score {
    Score {
        triplet: TripletKey::new(a0, "LIKE", a1),
        s_w,
        f_target: 1,
        f_reference: 0,
        f_background: 1,
    }
}

#[test]
fn local_network_construction() {
    let net = local_network(&[score("i", "x", 0.5), score("i", "y", 0.2), score("i", "z", -0.3)]);
    assert_eq!(successors(&net, "i").into_iter().collect::<Vec<_>>(), ["x", "y"]);
    assert!((net.out_strength("i") - 0.7).abs() < 1e-12);
    assert!(net.find(&TripletKey::new("i", "LIKE", "z")).is_none());
    assert!(local_network(&[]).is_empty());
    assert!(global_network(&[]).is_empty());
}

#[test]
fn global_weights_are_frequencies() {
    let t = |a: &str| NarrativeTriplet::new("d", a, "say.01", "b");
    let net = global_network(&[t("a"), t("a"), t("c")]);
    let w: Vec<(f64, u64)> = net.edges.iter().map(|e| (e.weight, e.support)).collect();
    assert_eq!(w, [(2.0, 2), (1.0, 1)]);
}

fn star(leaves: usize) -> NarrativeNetwork {
    let items: Vec<WeightedTriplet> = (0..leaves)
        .map(|i| WeightedTriplet {
            triplet: TripletKey::new("center", "F", &format!("leaf{i:02}")),
            weight: 1.0,
            support: 1,
        })
        .collect();
    build_network(&items)
}

#[test]
fn hub_classes_follow_degree() {
    let hubs = find_hubs(&star(12), HubThresholds::default());
    assert_eq!(hubs.iter().find(|h| h.node == "center").unwrap().class, HubClass::Major);
    assert!(hubs.iter().filter(|h| h.node != "center").all(|h| h.class == HubClass::Plain));
    let hubs = find_hubs(&star(7), HubThresholds::default());
    assert_eq!(hubs.iter().find(|h| h.node == "center").unwrap().class, HubClass::Minor);
    let lone = NarrativeNetwork::new(vec!["alone".into()], Vec::new()).unwrap();
    assert_eq!(find_hubs(&lone, HubThresholds::default())[0].class, HubClass::Plain);
}

fn ranked(keys: &[TripletKey]) -> Vec<RankedFragment> {
    keys.iter()
        .enumerate()
        .map(|(i, k)| RankedFragment {
            rank: i + 1,
            triplet: k.clone(),
            s_w: 1.0,
            f_target: 1,
            f_reference: 0,
        })
        .collect()
}

#[test]
fn overlap_counts_surviving_tops() {
    // each top edge has its own source with nine fillers: 8 dominate their
    // source, 7 are dwarfed by it
    let mut items = Vec::new();
    let mut top_keys = Vec::new();
    for i in 0..15 {
        let heavy = i < 8;
        let src = format!("s{i:02}");
        let key = TripletKey::new(&src, "F", &format!("top{i:02}"));
        top_keys.push(key.clone());
        items.push(WeightedTriplet {
            triplet: key,
            weight: if heavy { 1.0 } else { 1e-4 },
            support: 1,
        });
        for j in 0..9 {
            items.push(WeightedTriplet {
                triplet: TripletKey::new(&src, "F", &format!("fill{i:02}_{j}")),
                weight: if heavy { 1e-4 } else { 1.0 },
                support: 1,
            });
        }
    }
    let full = build_network(&items);
    let bb = disparity_filter(&full, 0.01).unwrap();
    let top = ranked(&top_keys);
    for (i, k) in top_keys.iter().enumerate() {
        let t = &bb.tests[full.edges.iter().position(|e| e.key() == *k).unwrap()];
        assert_eq!(t.alpha_in, None);
        assert_eq!(t.alpha_out.unwrap() < 0.01, i < 8);
    }
    assert_eq!(overlap_report(&bb.backbone, &top), 8);
    assert_eq!(overlap_report(&full, &top), 15);
    assert_eq!(overlap_report(&NarrativeNetwork::default(), &top), 0);

    let shown = with_forced_top(&bb.backbone, &full, &top);
    assert_eq!(shown.edges.iter().filter(|e| e.forced).count(), 7);
    assert_eq!(overlap_report(&shown, &top), 8);
}

fn xml_well_formed(text: &str) -> usize {
    let mut reader = quick_xml::Reader::from_str(text);
    reader.config_mut().check_end_names = true;
    let mut depth = 0i64;
    let mut elements = 0;
    loop {
        match reader.read_event().expect("well-formed XML") {
            Event::Start(_) => {
                depth += 1;
                elements += 1;
            }
            Event::Empty(_) => elements += 1,
            Event::End(_) => depth -= 1,
            Event::Eof => break,
            _ => {}
        }
    }
    assert_eq!(depth, 0);
    elements
}

#[test]
fn graphml_is_well_formed() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..20 {
        let net = random_graph(&mut rng);
        let text = export_graphml(&net, HubThresholds::default());
        assert!(text.contains("edgedefault=\"directed\""));
        assert!(xml_well_formed(&text) > net.nodes.len() + net.edges.len());
    }
    let odd = build_network(&[WeightedTriplet {
        triplet: TripletKey::new("a <b> & \"c\"", "F'G", "d"),
        weight: 1.0,
        support: 2,
    }]);
    xml_well_formed(&export_graphml(&odd, HubThresholds::default()));
    xml_well_formed(&export_graphml(&NarrativeNetwork::default(), HubThresholds::default()));
}

#[test]
fn empty_graph_exports() {
    let empty = NarrativeNetwork::default();
    let th = HubThresholds::default();
    assert_eq!(import_json(&export_json(&empty)).unwrap(), empty);
    let dot = export_dot(&empty, th);
    assert!(dot.starts_with("digraph") && dot.trim_end().ends_with('}'));
    for f in [GraphFormat::Dot, GraphFormat::Graphml, GraphFormat::Json] {
        assert!(!export(&empty, f, th).is_empty());
    }
}

#[test]
fn two_node_json_round_trip_is_byte_exact() {
    let net = build_network(&[WeightedTriplet {
        triplet: TripletKey::new("i", "LIKE", "x"),
        weight: 0.5,
        support: 3,
    }]);
    let text = export_json(&net);
    let back = import_json(&text).unwrap();
    assert_eq!(back, net);
    assert_eq!(export_json(&back), text);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn json_round_trip(seed in 0u64..10_000) {
        let net = random_graph(&mut ChaCha8Rng::seed_from_u64(seed));
        let text = export_json(&net);
        prop_assert_eq!(export_json(&import_json(&text).unwrap()), text);
    }

    #[test]
    fn backbone_is_a_subgraph_with_consistent_tests(seed in 0u64..10_000, alpha in 0.001f64..0.99) {
        let net = random_graph(&mut ChaCha8Rng::seed_from_u64(seed));
        let bb = disparity_filter(&net, alpha).unwrap();
        prop_assert_eq!(bb.tests.len(), net.edges.len());
        let kept: BTreeSet<TripletKey> = bb.retained().map(|i| net.edges[i].key()).collect();
        prop_assert_eq!(&kept, &edge_set(&bb.backbone));
        for t in &bb.tests {
            for a in [t.alpha_out, t.alpha_in].into_iter().flatten() {
                prop_assert!((0.0..=1.0).contains(&a));
            }
        }
    }

    #[test]
    fn hub_degree_ignores_forced_edges(seed in 0u64..10_000) {
        let net = random_graph(&mut ChaCha8Rng::seed_from_u64(seed));
        let bb = disparity_filter(&net, 0.05).unwrap().backbone;
        let top_keys: Vec<TripletKey> = net.edges.iter().map(Edge::key).collect();
        let shown = with_forced_top(&bb, &net, &ranked(&top_keys));
        let th = HubThresholds::default();
        let plain: HashMap<String, usize> = find_hubs(&bb, th).into_iter().map(|h| (h.node, h.degree)).collect();
        for h in find_hubs(&shown, th) {
            prop_assert_eq!(h.degree, plain.get(&h.node).copied().unwrap_or(0));
        }
    }
}
