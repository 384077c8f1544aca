//! Property tests for the library invariants: network count formulas,
//! capacity-mode dominance, margin detection, pairing conservation laws,
//! diagram round-trips and bottleneck metric behaviour.

use proptest::prelude::*;

use hrnflow_core::cosheaf::{
    build_cover, cech_chain_data, cech_homology_dims, cone_homology_dim, CosheafKind, KernelMode,
};
use hrnflow_core::dataflow::{
    classify, final_data_dimension, simulate_flow, CapacityMode, FlowKind, FlowPolicy, Margin,
    MarginProfile, QuiverRep,
};
use hrnflow_core::hrn::{build, export_graph, import_graph, validate, GraphExport};
use hrnflow_core::persistence::{
    bottleneck_distance, generate_p_intervals, persistent_error_dim, BottleneckDistance, Death,
    DiagramPoint, ErrorDiagram, ErrorEvent, MagnitudeRule, MatchPolicy,
};
use hrnflow_core::scenario::{
    parse_report, rederive_diagram, report_to_toml, run_instance, InitialSpec, NetworkSpec,
    Scenario, ScenarioPolicy, SubprogramSpec,
};
use hrnflow_core::selfcheck::brute_force_bottleneck;

fn cycle_lengths() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(3usize..=8, 1..=5)
}

proptest! {
    /// Vertex and edge counts follow the closed forms, and every built
    /// network passes structural validation and survives the text export.
    #[test]
    fn built_networks_are_valid_and_countable(lengths in cycle_lengths()) {
        let h = build(&lengths).unwrap();
        let m = lengths.len();
        prop_assert_eq!(h.vertex_count(), (2 * m + 1) + lengths.iter().map(|k| k - 2).sum::<usize>());
        prop_assert_eq!(h.edge_count(), m + lengths.iter().sum::<usize>());
        prop_assert!(validate(&h).is_valid());

        let export = export_graph(&h);
        let text = export.to_text();
        let back = GraphExport::from_text(&text).unwrap();
        prop_assert_eq!(&back, &export);
        let rebuilt = import_graph(&back).unwrap();
        prop_assert_eq!(rebuilt.vertex_count(), h.vertex_count());
        prop_assert_eq!(rebuilt.edges(), h.edges());
    }
}

proptest! {
    /// Capped flows never exceed unconstrained flows cell-for-cell; reject
    /// mode succeeds exactly when capping was a no-op, and errors exactly
    /// when capping had to clamp somewhere.
    #[test]
    fn capacity_modes_are_ordered(
        capacities in prop::collection::vec(0u64..6, 1..6),
        ell in 0u64..4,
        iterations in 1usize..5,
        initial in 0u64..4,
    ) {
        let initial = initial.min(capacities[0]); // keep cap/reject starts legal
        let rep = QuiverRep { subprogram: 1, capacities, increment: ell, initial_dim: initial };
        let run = |mode| {
            simulate_flow(&rep, iterations, &FlowPolicy {
                capacity_mode: mode,
                beta_adds: true,
                strict_stitching: false,
            })
        };
        let ignore = run(CapacityMode::Ignore).unwrap();
        let cap = run(CapacityMode::Cap).unwrap();
        for (vi, vc) in ignore.dims.iter().zip(&cap.dims) {
            for (a, b) in vi.iter().zip(vc) {
                prop_assert!(b <= a, "capped {b} exceeds unconstrained {a}");
            }
        }
        match run(CapacityMode::Reject) {
            Ok(flow) => {
                prop_assert_eq!(&flow.dims, &cap.dims);
                prop_assert_eq!(&flow.dims, &ignore.dims);
            }
            Err(_) => prop_assert_ne!(&cap.dims, &ignore.dims),
        }
    }

    /// Without capacities the output dimension has a closed form.
    #[test]
    fn unconstrained_theta_closed_form(
        k in 1usize..7,
        iterations in 1usize..6,
        ell in 0u64..5,
        initial in 0u64..5,
        beta_adds in any::<bool>(),
    ) {
        let rep = QuiverRep { subprogram: 1, capacities: vec![0; k], increment: ell, initial_dim: initial };
        let policy = FlowPolicy { capacity_mode: CapacityMode::Ignore, beta_adds, strict_stitching: false };
        let flow = simulate_flow(&rep, iterations, &policy).unwrap();
        let steps = if beta_adds { k * iterations - 1 } else { iterations * (k - 1) } as u64;
        prop_assert_eq!(final_data_dimension(&flow), initial + ell * steps);
    }

    /// Classification margins are one-sided and reconstruct the gap.
    #[test]
    fn margins_are_one_sided(theta in 0u64..50, delta in 0u64..50) {
        let c = classify(theta, delta);
        prop_assert_eq!(c.margin, theta.abs_diff(delta));
        let profile = MarginProfile::from_theta_delta(&[(theta, delta)]);
        let m = profile.margins[0];
        prop_assert_eq!(m.deficit * m.surplus, 0);
        prop_assert_eq!(m.deficit, delta.saturating_sub(theta));
        prop_assert_eq!(m.surplus, theta.saturating_sub(delta));
        match c.kind {
            FlowKind::Faulty => prop_assert!(theta < delta),
            FlowKind::Able => prop_assert!(theta > delta),
            FlowKind::Sufficient => prop_assert_eq!(theta, delta),
        }
    }
}

fn margin_profiles() -> impl Strategy<Value = MarginProfile> {
    prop::collection::vec((0u64..4, 0u64..4), 1..6).prop_map(|pairs| MarginProfile {
        margins: pairs
            .into_iter()
            .map(|(d, s)| {
                // Margins are one-sided by construction; bias keeps both kinds.
                if d >= s {
                    Margin { deficit: d - s, surplus: 0 }
                } else {
                    Margin { deficit: 0, surplus: s - d }
                }
            })
            .collect(),
    })
}

proptest! {
    /// Chain dimensions are local, cone kernels detect exactly the margins,
    /// and the incremental kernel never exceeds the absolute one.
    #[test]
    fn cones_detect_margins(profile in margin_profiles()) {
        let n = profile.len();
        let cover = build_cover(n);
        for kind in [CosheafKind::Error, CosheafKind::Fix] {
            let data = cech_chain_data(kind, &profile, &cover).unwrap();
            prop_assert_eq!(data.chain_dims.len(), n + 1);
            for (k, &dim) in data.chain_dims.iter().enumerate() {
                let at = k.max(1);
                let expected = match kind {
                    CosheafKind::Error => profile.deficit(at),
                    CosheafKind::Fix => profile.surplus(at),
                };
                prop_assert_eq!(dim, expected, "kind {:?} degree {}", kind, k);
            }
            let homology = cech_homology_dims(&data);
            prop_assert!(homology.iter().sum::<u64>() <= data.chain_dims.iter().sum::<u64>());
            for k in 1..=n {
                let absolute = cone_homology_dim(kind, &profile, k, KernelMode::Absolute).unwrap();
                let incremental =
                    cone_homology_dim(kind, &profile, k, KernelMode::Incremental).unwrap();
                prop_assert_eq!(absolute, data.chain_dims[k]);
                prop_assert!(incremental <= absolute);
            }
        }
    }
}

fn event_lists() -> impl Strategy<Value = Vec<ErrorEvent>> {
    (prop::collection::btree_set(1usize..12, 0..5usize)).prop_flat_map(|indexes| {
        let indexes: Vec<usize> = indexes.into_iter().collect();
        let len = indexes.len();
        prop::collection::vec(1u64..5, len..=len).prop_map(move |mags| {
            indexes
                .iter()
                .zip(&mags)
                .map(|(&index, &magnitude)| ErrorEvent { index, magnitude })
                .collect()
        })
    })
}

proptest! {
    /// Exact-mode pairing conserves error mass, never reuses a fix, and
    /// only ever kills an error strictly later than its birth.
    #[test]
    fn exact_pairing_conservation(errors in event_lists(), fixes in event_lists()) {
        let policy = MatchPolicy::default();
        let diagram = generate_p_intervals(&errors, &fixes, &policy).unwrap();

        let total: u64 = diagram.points().iter().map(|p| p.multiplicity).sum();
        prop_assert_eq!(total, errors.iter().map(|e| e.magnitude).sum::<u64>());

        let mut seen_deaths = Vec::new();
        for p in diagram.points() {
            if let Death::Finite(d) = p.death {
                prop_assert!(d > p.birth);
                prop_assert!(!seen_deaths.contains(&d), "fix at {d} consumed twice");
                seen_deaths.push(d);
                let fix = fixes.iter().find(|f| f.index as i64 == d);
                prop_assert!(fix.is_some(), "death {d} is not a fix index");
                prop_assert_eq!(fix.unwrap().magnitude, p.multiplicity);
            }
        }
    }

    /// Partial mode never draws more from a fix than its magnitude.
    #[test]
    fn partial_pairing_respects_budgets(errors in event_lists(), fixes in event_lists()) {
        let policy = MatchPolicy { magnitude_rule: MagnitudeRule::Partial, ..Default::default() };
        let diagram = generate_p_intervals(&errors, &fixes, &policy).unwrap();
        for f in &fixes {
            let drawn: u64 = diagram
                .points()
                .iter()
                .filter(|p| p.death == Death::Finite(f.index as i64))
                .map(|p| p.multiplicity)
                .sum();
            prop_assert!(drawn <= f.magnitude, "fix {} over-consumed: {drawn}", f.index);
        }
        let total: u64 = diagram.points().iter().map(|p| p.multiplicity).sum();
        prop_assert_eq!(total, errors.iter().map(|e| e.magnitude).sum::<u64>());
    }
}

fn diagrams() -> impl Strategy<Value = ErrorDiagram> {
    prop::collection::vec((0i64..15, prop::option::of(1i64..8), 1u64..4), 0..6).prop_map(|raw| {
        ErrorDiagram::from_points(raw.into_iter().map(|(birth, pers, multiplicity)| DiagramPoint {
            birth,
            death: match pers {
                Some(p) => Death::Finite(birth + p),
                None => Death::Infinite,
            },
            multiplicity,
        }))
        .unwrap()
    })
}

proptest! {
    /// The text form is lossless.
    #[test]
    fn diagram_text_round_trips(d in diagrams()) {
        prop_assert_eq!(ErrorDiagram::from_text(&d.to_text()).unwrap(), d);
    }

    /// Persistent error dimension is monotone in both window ends.
    #[test]
    fn persistent_dim_monotone(d in diagrams(), i in -2i64..25, j in -2i64..25) {
        let here = persistent_error_dim(&d, i, j);
        prop_assert!(persistent_error_dim(&d, i + 1, j) >= here);
        prop_assert!(persistent_error_dim(&d, i, j + 1) >= here);
        prop_assert!(persistent_error_dim(&d, i, j) <= d.proper_mass());
    }

    /// Identity, symmetry, and agreement with brute-force matching.
    #[test]
    fn bottleneck_is_a_metric_matching_brute_force(a in diagrams(), b in diagrams()) {
        prop_assert_eq!(bottleneck_distance(&a, &a), BottleneckDistance::zero());
        let ab = bottleneck_distance(&a, &b);
        prop_assert_eq!(ab, bottleneck_distance(&b, &a));
        prop_assert_eq!(ab, brute_force_bottleneck(&a, &b));
        if a.infinity_mass() != b.infinity_mass() {
            prop_assert_eq!(ab, BottleneckDistance::Infinite);
        }
    }
}

fn scenarios() -> impl Strategy<Value = Scenario> {
    (1usize..=3).prop_flat_map(|m| {
        let lengths = prop::collection::vec(3usize..=5, m..=m);
        lengths.prop_flat_map(move |lengths| {
            let subs: Vec<_> = lengths
                .iter()
                .map(|&k| {
                    (
                        prop::collection::vec(0u64..5, k..=k),
                        0u64..3,
                        1usize..3,
                        prop_oneof![
                            (0u64..3).prop_map(InitialSpec::Fixed),
                            (0u64..2, 2u64..4).prop_map(|(lo, hi)| InitialSpec::Uniform { lo, hi }),
                        ],
                    )
                })
                .collect();
            let deltas = prop::collection::vec(0u64..8, lengths.len()..=lengths.len());
            (Just(lengths), subs, deltas, any::<u64>(), any::<bool>()).prop_map(
                |(lengths, subs, desired_outputs, seed, beta_adds)| Scenario {
                    seed,
                    desired_outputs,
                    network: NetworkSpec { m: lengths.len(), cycle_lengths: lengths },
                    policy: ScenarioPolicy {
                        // Unconstrained flows keep every draw legal.
                        capacity_mode: CapacityMode::Ignore,
                        beta_adds,
                        ..Default::default()
                    },
                    subprograms: subs
                        .into_iter()
                        .map(|(capacities, ell, iterations, initial)| SubprogramSpec {
                            capacities,
                            ell,
                            iterations,
                            capacity_mode: None,
                            initial,
                        })
                        .collect(),
                },
            )
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    /// Runs are deterministic, reports survive the TOML round trip, and the
    /// recorded diagram always re-derives from the recorded cone table.
    #[test]
    fn runs_are_deterministic_and_auditable(scenario in scenarios()) {
        let first = run_instance(&scenario, None).unwrap();
        let second = run_instance(&scenario, None).unwrap();
        prop_assert_eq!(&first.report, &second.report);

        let text = report_to_toml(&first.report).unwrap();
        prop_assert_eq!(&parse_report(&text).unwrap(), &first.report);

        let derived = rederive_diagram(&first.report).unwrap();
        prop_assert_eq!(derived, first.diagram);
    }
}
