use cim_mapping::{apply_duplication, ArchConfig, MappingPlan};
use clsa_scheduler::{
    cross_layer_schedule, determine_dependencies, determine_sets, determine_sets_with, order_sets,
    schedule_asap, schedule_layer_by_layer, Region, ScheduleError, SetDependencyGraph, SetId,
    SetShape,
};
use nn_ir::{
    infer_shapes, ActivationFn, ConcatAxis, KernelSpec, LayerNode, NNGraph, Op, PadAmounts,
    PoolSpec, TensorShape,
};

fn conv(name: &str, input: &str, k: usize, k_in: usize, k_out: usize) -> LayerNode {
    LayerNode::new(
        name,
        Op::Conv2d {
            kernel: KernelSpec::conv(k, k, k_in, k_out, 1),
            bias: false,
        },
        vec![input.into()],
    )
}

fn graph(nodes: Vec<LayerNode>) -> NNGraph {
    infer_shapes(NNGraph::from_nodes("g", nodes).unwrap()).unwrap()
}

fn input(h: usize, w: usize, c: usize) -> LayerNode {
    LayerNode::new(
        "in",
        Op::Input {
            shape: TensorShape::new(h, w, c),
        },
        vec![],
    )
}

/// conv1 (OFM 4×4) → pool 2/2 → conv2 1×1 (OFM 2×2).
fn pooled_pair() -> NNGraph {
    graph(vec![
        input(6, 6, 1),
        conv("conv1", "in", 3, 1, 4),
        LayerNode::new(
            "pool",
            Op::MaxPool2d(PoolSpec::new(2, 2)),
            vec!["conv1".into()],
        ),
        conv("conv2", "pool", 1, 4, 4),
    ])
}

fn ends(s: &clsa_scheduler::Schedule, layer: &str) -> Vec<(u64, u64)> {
    s.entries
        .iter()
        .filter(|e| e.layer == layer)
        .map(|e| (e.start_cycle, e.end_cycle))
        .collect()
}

#[test]
fn pooled_pair_overlaps() {
    let g = pooled_pair();
    let (parts, s) = cross_layer_schedule(&g, 4).unwrap();
    assert_eq!(parts[0].sets.len(), 4);
    assert!(parts[0].sets.iter().all(|r| r.area() == 4));
    assert_eq!(ends(&s, "conv1"), vec![(0, 4), (4, 8), (8, 12), (12, 16)]);
    assert_eq!(ends(&s, "conv2"), vec![(4, 5), (8, 9), (12, 13), (16, 17)]);
    assert_eq!(s.makespan(), 17);

    let lbl = schedule_layer_by_layer(&determine_sets(&g, 1).unwrap());
    assert_eq!(lbl.makespan(), 20);
}

#[test]
fn single_layer_gains_nothing() {
    let g = graph(vec![input(9, 7, 2), conv("c", "in", 3, 2, 3)]);
    for target in [1, 4, 16] {
        let (_, s) = cross_layer_schedule(&g, target).unwrap();
        assert_eq!(s.makespan(), 35);
    }
}

#[test]
fn duplicated_halves_run_concurrently() {
    let g = graph(vec![input(10, 8, 2), conv("c", "in", 3, 2, 3)]);
    let plan = MappingPlan::new(&g, ArchConfig::new(64))
        .unwrap()
        .with_duplicates(&[2])
        .unwrap();
    let dup = apply_duplication(&g, &plan).unwrap();
    let (parts, s) = cross_layer_schedule(&dup, 4).unwrap();
    assert_eq!(parts.len(), 2);
    for d in 0..2 {
        let first = s
            .entries
            .iter()
            .find(|e| e.duplicate == d && e.set_index == 0)
            .unwrap();
        assert_eq!(first.start_cycle, 0);
    }
    assert_eq!(s.makespan(), 48 / 2);
    let lbl = schedule_layer_by_layer(&determine_sets(&dup, 1).unwrap());
    assert_eq!(lbl.makespan(), 24);
}

#[test]
fn one_set_per_layer_is_layer_by_layer() {
    let g = graph(vec![
        input(12, 12, 3),
        conv("a", "in", 3, 3, 8),
        LayerNode::new("relu", Op::Activation(ActivationFn::Relu), vec!["a".into()]),
        LayerNode::new(
            "pad",
            Op::Pad(PadAmounts::new(1, 1, 1, 1)),
            vec!["relu".into()],
        ),
        conv("b", "pad", 3, 8, 8),
        LayerNode::new("pool", Op::MaxPool2d(PoolSpec::new(2, 2)), vec!["b".into()]),
        conv("c", "pool", 1, 8, 4),
    ]);
    let (_, s) = cross_layer_schedule(&g, 1).unwrap();
    assert_eq!(s.makespan(), 100 + 100 + 25);
    let lbl = schedule_layer_by_layer(&determine_sets(&g, 1).unwrap());
    assert_eq!(s, lbl);
}

#[test]
fn finer_sets_never_hurt() {
    let g = graph(vec![
        input(16, 16, 3),
        conv("a", "in", 3, 3, 8),
        LayerNode::new("pool", Op::MaxPool2d(PoolSpec::new(2, 2)), vec!["a".into()]),
        conv("b", "pool", 3, 8, 8),
        conv("c", "b", 1, 8, 8),
    ]);
    let coarse = cross_layer_schedule(&g, 1).unwrap().1.makespan();
    for target in [2, 4, 9, 16, 64] {
        assert!(cross_layer_schedule(&g, target).unwrap().1.makespan() <= coarse);
    }
}

#[test]
fn corner_set_reads_across_pooled_boundary() {
    // conv → bias → act → pool 2/2 → pad 1 → conv 3×3
    let g = graph(vec![
        input(10, 10, 1),
        conv("conv1", "in", 3, 1, 4),
        LayerNode::new("bias", Op::BiasAdd, vec!["conv1".into()]),
        LayerNode::new(
            "act",
            Op::Activation(ActivationFn::Relu),
            vec!["bias".into()],
        ),
        LayerNode::new(
            "pool",
            Op::MaxPool2d(PoolSpec::new(2, 2)),
            vec!["act".into()],
        ),
        LayerNode::new(
            "pad",
            Op::Pad(PadAmounts::new(1, 1, 1, 1)),
            vec!["pool".into()],
        ),
        conv("conv2", "pad", 3, 4, 4),
    ]);
    let parts = determine_sets(&g, 4).unwrap();
    assert_eq!(parts[0].rows, vec![(0, 4), (4, 8)]);
    assert_eq!(parts[1].rows, vec![(0, 2), (2, 4)]);
    let deps = determine_dependencies(&g, &parts).unwrap();
    let corner = SetId::new(1, 0);
    assert!(deps.p(corner) > 1);
    assert_eq!(
        deps.producers(corner),
        &[
            SetId::new(0, 0),
            SetId::new(0, 1),
            SetId::new(0, 2),
            SetId::new(0, 3)
        ]
    );
    assert!(deps.q(SetId::new(0, 0)) >= 1);
}

#[test]
fn aligned_single_sets_give_one_edge() {
    let g = graph(vec![
        input(4, 4, 2),
        conv("a", "in", 1, 2, 2),
        conv("b", "a", 1, 2, 2),
    ]);
    let parts = determine_sets(&g, 1).unwrap();
    let deps = determine_dependencies(&g, &parts).unwrap();
    assert_eq!(
        deps.data_edges(),
        vec![(SetId::new(0, 0), SetId::new(1, 0))]
    );
    assert_eq!((deps.p(SetId::new(1, 0)), deps.q(SetId::new(0, 0))), (1, 1));
}

#[test]
fn strided_pointwise_skips_odd_rows() {
    let g = graph(vec![
        input(5, 5, 1),
        conv("a", "in", 1, 1, 2),
        LayerNode::new(
            "b",
            Op::Conv2d {
                kernel: KernelSpec::conv(1, 1, 2, 2, 2),
                bias: false,
            },
            vec!["a".into()],
        ),
    ]);
    let parts = determine_sets_with(&g, usize::MAX, SetShape::Rows).unwrap();
    assert_eq!(parts[0].len(), 5);
    let deps = determine_dependencies(&g, &parts).unwrap();
    for s in 0..3 {
        assert_eq!(deps.producers(SetId::new(1, s)), &[SetId::new(0, 2 * s)]);
    }
    assert_eq!(deps.q(SetId::new(0, 1)), 0);
}

#[test]
fn residual_add_depends_on_both_branches() {
    let g = graph(vec![
        input(8, 8, 2),
        conv("a", "in", 1, 2, 4),
        conv("b", "a", 1, 4, 4),
        LayerNode::new("add", Op::Add, vec!["a".into(), "b".into()]),
        conv("c", "add", 1, 4, 4),
    ]);
    let parts = determine_sets(&g, 4).unwrap();
    let deps = determine_dependencies(&g, &parts).unwrap();
    for s in 0..4 {
        let producers = deps.producers(SetId::new(2, s));
        assert!(producers.contains(&SetId::new(0, s)));
        assert!(producers.contains(&SetId::new(1, s)));
    }
}

#[test]
fn concat_and_upsample_paths() {
    let g = graph(vec![
        input(8, 8, 2),
        conv("a", "in", 1, 2, 4),
        LayerNode::new("pool", Op::MaxPool2d(PoolSpec::new(2, 2)), vec!["a".into()]),
        conv("b", "pool", 1, 4, 4),
        LayerNode::new("up", Op::Upsample2d { factor: 2 }, vec!["b".into()]),
        LayerNode::new(
            "cat",
            Op::Concat {
                axis: ConcatAxis::C,
            },
            vec!["a".into(), "up".into()],
        ),
        conv("c", "cat", 1, 8, 2),
    ]);
    let (parts, s) = cross_layer_schedule(&g, 4).unwrap();
    let deps = determine_dependencies(&g, &parts).unwrap();
    // The top-left set of `c` needs the matching quarter of `a` and of `b`.
    assert_eq!(
        deps.producers(SetId::new(2, 0)),
        &[SetId::new(0, 0), SetId::new(1, 0)]
    );
    assert!(s.makespan() < 64 + 16 + 64);
}

#[test]
fn cycles_are_reported() {
    let edges = [
        (SetId::new(0, 1), SetId::new(1, 0)),
        (SetId::new(1, 0), SetId::new(0, 0)),
    ];
    let deps = SetDependencyGraph::from_edges(vec![2, 1], edges);
    assert!(matches!(
        deps.topological_order(),
        Err(ScheduleError::Cycle { unscheduled: 3 })
    ));
    let g = graph(vec![
        input(2, 2, 1),
        conv("a", "in", 1, 1, 1),
        conv("b", "a", 1, 1, 1),
    ]);
    let mut parts = determine_sets(&g, 2).unwrap();
    parts.truncate(2);
    assert!(matches!(
        schedule_asap(&deps, &parts),
        Err(ScheduleError::Cycle { .. })
    ));
}

#[test]
fn zero_target_is_rejected() {
    assert!(matches!(
        determine_sets(&pooled_pair(), 0),
        Err(ScheduleError::InvalidTarget)
    ));
}

#[test]
fn order_is_row_major() {
    let parts = determine_sets(&pooled_pair(), 4).unwrap();
    let regions: Vec<Region> = parts[0].sets.clone();
    assert_eq!(order_sets(&regions), vec![0, 1, 2, 3]);
    let starts: Vec<(usize, usize)> = regions.iter().map(|r| (r.row_begin, r.col_begin)).collect();
    assert_eq!(starts, vec![(0, 0), (0, 2), (2, 0), (2, 2)]);
}

#[test]
fn schedule_json_round_trip() {
    let (_, s) = cross_layer_schedule(&pooled_pair(), 4).unwrap();
    let json = s.to_json();
    assert!(json.contains("\"region\": [\n"));
    let back: clsa_scheduler::Schedule = serde_json::from_str(&json).unwrap();
    assert_eq!(back, s);
}

#[test]
fn dot_export_lists_both_edge_kinds() {
    let g = pooled_pair();
    let parts = determine_sets(&g, 4).unwrap();
    let dot = determine_dependencies(&g, &parts).unwrap().to_dot(&parts);
    assert!(dot.starts_with("digraph sets {"));
    assert!(dot.contains("\"0:0\" -> \"1:0\";"));
    assert!(dot.contains("\"0:0\" -> \"0:1\" [style=dashed];"));
}
