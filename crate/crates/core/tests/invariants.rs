//! Structural invariants of generated portfolios, their features and their
//! scores, checked over randomly configured datasets.

use proptest::prelude::*;
use tci_core::centrality::{adjacency, centrality, connection_weight, featurize_connections, WeightScheme};
use tci_core::graph::{NetworkGraph, PolicyType};
use tci_core::synth::{generate, GenConfig};

fn config() -> impl Strategy<Value = GenConfig> {
    (any::<u64>(), 20usize..80, 1usize..4, 0.5f64..0.95, 0.0f64..1.5).prop_map(|(seed, n_ent, years, multi, att)| {
        GenConfig {
            n_entities: n_ent,
            n_policies: 2 * n_ent,
            n_connections: 5 * n_ent,
            years,
            multiple_buyer_share: multi,
            attachment: att,
            ..GenConfig::small(seed)
        }
    })
}

fn scheme() -> impl Strategy<Value = WeightScheme> {
    prop_oneof![
        Just(WeightScheme::Unit),
        Just(WeightScheme::InverseBuyerCount),
        Just(WeightScheme::InsuredAmount)
    ]
}

fn check_records(g: &NetworkGraph) -> Result<(), TestCaseError> {
    let n = g.connections().len();
    let by_buyer: usize = (0..g.entities().len()).map(|i| g.connections_as_buyer(i).len()).sum();
    let by_seller: usize = (0..g.entities().len()).map(|i| g.connections_as_seller(i).len()).sum();
    let by_policy: usize = (0..g.policies().len()).map(|j| g.connections_of_policy(j).len()).sum();
    prop_assert_eq!((by_buyer, by_seller, by_policy), (n, n, n));
    for i in 0..g.entities().len() {
        for &k in g.connections_as_buyer(i) {
            prop_assert_eq!(g.buyer_of(k), i);
        }
        for &k in g.connections_as_seller(i) {
            prop_assert_eq!(g.seller_of(k), i);
        }
    }
    for (j, p) in g.policies().iter().enumerate() {
        prop_assert!(p.start < p.end && p.start >= 0.0 && p.start < g.tau());
        prop_assert!(!p.buyers.is_empty());
        prop_assert_eq!(p.policy_type == PolicyType::SingleBuyer, p.buyers.len() == 1);
        for &k in g.connections_of_policy(j) {
            prop_assert_eq!(g.policy_of(k), j);
            let c = &g.connections()[k];
            prop_assert_eq!(c.seller, p.seller);
            prop_assert!(p.buyers.contains(&c.buyer));
        }
    }
    for (k, c) in g.connections().iter().enumerate() {
        prop_assert!(g.window(k) > 0.0);
        if c.observed_claim {
            prop_assert!(c.observed_gap > 0.0 && c.observed_gap <= g.window(k));
        } else {
            prop_assert!(c.observed_gap.is_infinite());
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn generated_graphs_are_consistent(cfg in config()) {
        let gen = generate(&cfg).unwrap();
        check_records(&gen.graph)?;
        prop_assert_eq!(gen.truth.actual_claim.len(), gen.graph.connections().len());
        for (k, c) in gen.graph.connections().iter().enumerate() {
            // a reported claim is an actual claim with the same gap
            if c.observed_claim {
                prop_assert!(gen.truth.actual_claim[k]);
                prop_assert_eq!(c.observed_gap, gen.truth.actual_gap[k]);
            }
        }
    }

    #[test]
    fn degree_sums_equal_total_weight(cfg in config(), scheme in scheme(), u in 0.0f64..1.0) {
        let g = generate(&cfg).unwrap().graph;
        let t = u * g.tau();
        let active = g.active_subgraph(t);
        let weight: f64 = active.connections.iter().map(|&k| connection_weight(&g, k, scheme)).sum();
        let m = adjacency(&g, t, scheme);
        prop_assert_eq!(m.dim(), active.entities.len());
        prop_assert!((m.total() - weight).abs() <= 1e-9 * weight.max(1.0));
        if scheme == WeightScheme::Unit {
            prop_assert_eq!(m.total(), active.connections.len() as f64);
        }
        let dc = centrality(&g, t, scheme);
        let (mut out, mut inn) = (0.0, 0.0);
        for i in 0..g.entities().len() {
            let d = dc.get(i);
            prop_assert!(d.as_array().iter().all(|&x| x >= 0.0));
            if active.entities.binary_search(&i).is_err() {
                prop_assert_eq!(d.as_array(), [0.0; 6]);
            }
            out += d.out_degree;
            inn += d.in_degree;
        }
        prop_assert!((out - weight).abs() <= 1e-9 * weight.max(1.0));
        prop_assert!((inn - weight).abs() <= 1e-9 * weight.max(1.0));
    }

    #[test]
    fn weights_are_positive(cfg in config(), scheme in scheme()) {
        let g = generate(&cfg).unwrap().graph;
        for k in 0..g.connections().len() {
            prop_assert!(connection_weight(&g, k, scheme) > 0.0);
        }
    }

    #[test]
    fn censoring_keeps_the_invariants(cfg in config(), u in 0.3f64..1.0) {
        let g = generate(&cfg).unwrap().graph;
        let tau = u * g.tau();
        let Ok(c) = g.censor_at(tau) else { return Ok(()) };
        check_records(&c)?;
        prop_assert!(c.policies().iter().all(|p| p.start < tau));
    }

    #[test]
    fn design_layout_matches_the_graph(cfg in config(), scheme in scheme()) {
        let g = generate(&cfg).unwrap().graph;
        let (design, scaling) = featurize_connections(&g, scheme).unwrap();
        prop_assert_eq!(design.names.len(), 40);
        prop_assert_eq!(scaling.names.clone(), design.names.clone());
        for k in 0..g.connections().len() {
            let row = design.row(k);
            prop_assert_eq!(row.len(), 40);
            prop_assert_eq!(row[0], 1.0);
            prop_assert!(row.iter().all(|x| x.is_finite()));
        }
    }
}
