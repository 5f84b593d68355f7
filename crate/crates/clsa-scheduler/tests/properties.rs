use std::collections::{BTreeSet, HashSet};

use clsa_scheduler::{
    alignment_unit, determine_dependencies, determine_sets_with, schedule_asap, set_grid_with,
    Schedule, SetId, SetPartition, SetShape,
};
use nn_ir::{
    infer_shapes, ActivationFn, ConcatAxis, KernelSpec, LayerNode, NNGraph, Op, PadAmounts,
    PoolSpec, TensorShape,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random canonical graph with convolutions, explicit padding, pooling,
/// upsampling, slicing, residual adds and concatenations along every axis.
fn random_graph(seed: u64) -> NNGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes = Vec::new();
    let mut tensors: Vec<(String, TensorShape)> = Vec::new();
    let h = rng.gen_range(6..=14);
    let w = rng.gen_range(6..=14);
    let shape = TensorShape::new(h, w, 2);
    nodes.push(LayerNode::new("in", Op::Input { shape }, vec![]));
    tensors.push(("in".into(), shape));
    let mut convs = 0;
    let steps = rng.gen_range(4..=9);
    for i in 0..steps {
        let (src, s) = if rng.gen_bool(0.75) {
            tensors.last().unwrap().clone()
        } else {
            tensors[rng.gen_range(0..tensors.len())].clone()
        };
        let name = format!("n{i}");
        let mark = nodes.len();
        let choice = if convs == 0 { 0 } else { rng.gen_range(0..8) };
        let out = match choice {
            0 | 1 | 2 => {
                let k = [1, 3, 3][rng.gen_range(0..3)];
                let stride = if rng.gen_bool(0.3) { 2 } else { 1 };
                let mut input = src.clone();
                if k == 3 && rng.gen_bool(0.6) {
                    let p = PadAmounts::new(
                        rng.gen_range(0..2),
                        rng.gen_range(0..2),
                        rng.gen_range(0..2),
                        1,
                    );
                    input = format!("{name}/pad");
                    nodes.push(LayerNode::new(input.clone(), Op::Pad(p), vec![src.clone()]));
                }
                let k_out = [2, 3][rng.gen_range(0..2)];
                nodes.push(LayerNode::new(
                    name.clone(),
                    Op::Conv2d {
                        kernel: KernelSpec::conv(k, k, s.channels, k_out, stride),
                        bias: false,
                    },
                    vec![input],
                ));
                if rng.gen_bool(0.5) {
                    let act = format!("{name}/act");
                    nodes.push(LayerNode::new(
                        act.clone(),
                        Op::Activation(ActivationFn::Relu),
                        vec![name.clone()],
                    ));
                    act
                } else {
                    name
                }
            }
            3 if s.height >= 2 && s.width >= 2 => {
                let (size, stride) = [(2, 2), (2, 1), (3, 2)][rng.gen_range(0..3)];
                if s.height < size || s.width < size {
                    continue;
                }
                nodes.push(LayerNode::new(
                    name.clone(),
                    Op::MaxPool2d(PoolSpec::new(size, stride)),
                    vec![src],
                ));
                name
            }
            4 if s.spatial() <= 64 => {
                nodes.push(LayerNode::new(
                    name.clone(),
                    Op::Upsample2d { factor: 2 },
                    vec![src],
                ));
                name
            }
            5 if s.height >= 3 && s.width >= 3 => {
                let r0 = rng.gen_range(0..s.height / 2);
                let c0 = rng.gen_range(0..s.width / 2);
                let size = [
                    s.height - r0 - rng.gen_range(0..2),
                    s.width - c0 - rng.gen_range(0..2),
                    s.channels,
                ];
                nodes.push(LayerNode::new(
                    name.clone(),
                    Op::Slice {
                        begin: [r0, c0, 0],
                        size,
                    },
                    vec![src],
                ));
                name
            }
            6 => {
                let Some((other, _)) = tensors
                    .iter()
                    .rev()
                    .find(|(n, t)| *t == s && *n != src)
                    .cloned()
                else {
                    continue;
                };
                nodes.push(LayerNode::new(name.clone(), Op::Add, vec![src, other]));
                name
            }
            7 => {
                let axis = [ConcatAxis::C, ConcatAxis::H, ConcatAxis::W][rng.gen_range(0..3)];
                let fits = |t: &TensorShape| match axis {
                    ConcatAxis::C => t.height == s.height && t.width == s.width,
                    ConcatAxis::H => t.width == s.width && t.channels == s.channels,
                    ConcatAxis::W => t.height == s.height && t.channels == s.channels,
                };
                let Some((other, _)) = tensors
                    .iter()
                    .rev()
                    .find(|(n, t)| fits(t) && *n != src)
                    .cloned()
                else {
                    continue;
                };
                nodes.push(LayerNode::new(
                    name.clone(),
                    Op::Concat { axis },
                    vec![other, src],
                ));
                name
            }
            _ => continue,
        };
        match infer_shapes(NNGraph::from_nodes("tmp", nodes.clone()).unwrap()) {
            Ok(g) => {
                convs += usize::from(choice < 3);
                tensors.push((out.clone(), g.shape(&out).unwrap()));
            }
            // Window larger than the map: drop the step.
            Err(_) => nodes.truncate(mark),
        }
    }
    // Close with a 1×1 conv so every branch ends in a base layer.
    let (last, s) = tensors.last().unwrap().clone();
    nodes.push(LayerNode::new(
        "head",
        Op::Conv2d {
            kernel: KernelSpec::conv(1, 1, s.channels, 2, 1),
            bias: false,
        },
        vec![last],
    ));
    infer_shapes(NNGraph::from_nodes(format!("random{seed}"), nodes).unwrap()).unwrap()
}

type Pixel = (usize, usize);

/// Input pixels read by output pixel `p` of `node`, one list per input.
fn pixel_backward(g: &NNGraph, node: &LayerNode, (r, c): Pixel) -> Vec<Vec<Pixel>> {
    let shapes = g.input_shapes(&node.name).unwrap();
    let window = |kh: usize, kw: usize, sh: usize, sw: usize| {
        let mut v = Vec::new();
        for i in 0..kh {
            for j in 0..kw {
                v.push((r * sh + i, c * sw + j));
            }
        }
        v
    };
    match &node.op {
        Op::Conv2d { kernel: k, .. } => vec![window(k.k_h, k.k_w, k.stride_h, k.stride_w)],
        Op::MaxPool2d(p) | Op::AvgPool2d(p) => {
            vec![window(p.size_h, p.size_w, p.stride_h, p.stride_w)]
        }
        Op::Pad(p) => {
            let inside = r >= p.top
                && c >= p.left
                && r - p.top < shapes[0].height
                && c - p.left < shapes[0].width;
            vec![if inside {
                vec![(r - p.top, c - p.left)]
            } else {
                vec![]
            }]
        }
        Op::Upsample2d { factor } => vec![vec![(r / factor, c / factor)]],
        Op::Slice { begin, .. } => vec![vec![(r + begin[0], c + begin[1])]],
        Op::Concat {
            axis: ConcatAxis::C,
        }
        | Op::Add
        | Op::Activation(_)
        | Op::BiasAdd => shapes.iter().map(|_| vec![(r, c)]).collect(),
        Op::Concat { axis } => {
            let mut offset = 0;
            shapes
                .iter()
                .map(|s| {
                    let (pos, extent) = if *axis == ConcatAxis::H {
                        (r, s.height)
                    } else {
                        (c, s.width)
                    };
                    let hit = pos >= offset && pos < offset + extent;
                    let local = pos.wrapping_sub(offset);
                    offset += extent;
                    if !hit {
                        vec![]
                    } else if *axis == ConcatAxis::H {
                        vec![(local, c)]
                    } else {
                        vec![(r, local)]
                    }
                })
                .collect()
        }
        other => panic!("unexpected op {other:?}"),
    }
}

/// Element-level oracle: every producer set holding a pixel that some pixel
/// of the consumer set transitively reads.
fn brute_force_edges(g: &NNGraph, parts: &[SetPartition]) -> BTreeSet<(SetId, SetId)> {
    let mut edges = BTreeSet::new();
    for (ci, part) in parts.iter().enumerate() {
        let node = g.node(&part.node).unwrap();
        for (si, set) in part.sets.iter().enumerate() {
            let mut stack = Vec::new();
            for r in set.row_begin..set.row_end {
                for c in set.col_begin..set.col_end {
                    for (input, pixels) in node.inputs.iter().zip(pixel_backward(g, node, (r, c))) {
                        stack.extend(pixels.into_iter().map(|p| (input.clone(), p)));
                    }
                }
            }
            let mut seen = HashSet::new();
            while let Some((name, p)) = stack.pop() {
                if !seen.insert((name.clone(), p)) {
                    continue;
                }
                let n = g.node(&name).unwrap();
                if n.is_base() {
                    let pi = parts.iter().position(|q| q.node == name).unwrap();
                    for (ps, region) in parts[pi].sets.iter().enumerate() {
                        if region.contains(p.0, p.1) {
                            edges.insert((SetId::new(pi, ps), SetId::new(ci, si)));
                        }
                    }
                } else if !matches!(n.op, Op::Input { .. }) {
                    for (input, pixels) in n.inputs.iter().zip(pixel_backward(g, n, p)) {
                        stack.extend(pixels.into_iter().map(|q| (input.clone(), q)));
                    }
                }
            }
        }
    }
    edges
}

fn check_asap(s: &Schedule, parts: &[SetPartition], g: &NNGraph) {
    let deps = determine_dependencies(g, parts).unwrap();
    let mut offset = vec![0];
    for p in parts {
        offset.push(offset.last().unwrap() + p.len());
    }
    let at = |id: SetId| &s.entries[offset[id.layer] + id.set];
    for id in deps.ids() {
        let e = at(id);
        assert_eq!(e.cycles(), parts[id.layer].sets[id.set].area() as u64);
        let mut preds: Vec<SetId> = deps.producers(id).to_vec();
        preds.extend(deps.resource_predecessor(id));
        for p in &preds {
            assert!(
                at(*p).end_cycle <= e.start_cycle,
                "edge {p:?} -> {id:?} violated"
            );
        }
        // Starting one cycle earlier must break some edge.
        assert!(e.start_cycle == 0 || preds.iter().any(|p| at(*p).end_cycle == e.start_cycle));
    }
    for intervals in s.intervals().values() {
        assert!(intervals.windows(2).all(|w| w[0].1 <= w[1].0));
    }
}

fn shapes() -> [SetShape; 2] {
    [SetShape::Grid, SetShape::Rows]
}

#[test]
fn generator_exercises_every_op() {
    let mut kinds = BTreeSet::new();
    for seed in 0..100 {
        for n in random_graph(seed).iter() {
            let tag = match &n.op {
                Op::Concat { axis } => format!("concat_{}", axis.as_str()),
                op => op.kind().as_str().to_string(),
            };
            kinds.insert(tag);
        }
    }
    for k in [
        "conv2d",
        "pad",
        "maxpool2d",
        "upsample2d",
        "slice",
        "add",
        "concat_c",
        "concat_h",
        "concat_w",
    ] {
        assert!(kinds.contains(k), "{k} never generated: {kinds:?}");
    }
}

#[test]
fn dependencies_match_element_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for seed in 0..100 {
        let g = random_graph(seed);
        let target = [1, 2, 4, 6, 9, 16, 1000][rng.gen_range(0..7)];
        let shape = shapes()[rng.gen_range(0..2)];
        let parts = determine_sets_with(&g, target, shape).unwrap();
        let deps = determine_dependencies(&g, &parts).unwrap();
        let got: BTreeSet<_> = deps.data_edges().into_iter().collect();
        assert_eq!(
            got,
            brute_force_edges(&g, &parts),
            "seed {seed}, target {target}, {shape:?}"
        );
    }
}

#[test]
fn asap_is_tight_on_random_graphs() {
    for seed in 100..160 {
        let g = random_graph(seed);
        for (target, shape) in [
            (4, SetShape::Grid),
            (16, SetShape::Grid),
            (usize::MAX, SetShape::Rows),
        ] {
            let parts = determine_sets_with(&g, target, shape).unwrap();
            let deps = determine_dependencies(&g, &parts).unwrap();
            let s = schedule_asap(&deps, &parts).unwrap();
            check_asap(&s, &parts, &g);
        }
    }
}

#[test]
fn schedules_are_deterministic() {
    for seed in 200..220 {
        let run = || {
            let g = random_graph(seed);
            let parts = determine_sets_with(&g, 9, SetShape::Grid).unwrap();
            let deps = determine_dependencies(&g, &parts).unwrap();
            (
                schedule_asap(&deps, &parts).unwrap().to_json(),
                deps.to_dot(&parts),
            )
        };
        assert_eq!(run(), run());
    }
}

#[test]
fn pooled_sets_hold_whole_windows() {
    for seed in 300..340 {
        let g = random_graph(seed);
        let parts = determine_sets_with(&g, 16, SetShape::Grid).unwrap();
        for p in &parts {
            let (uh, uw) = alignment_unit(&g, &p.node);
            let interior =
                |ranges: &[(usize, usize)], u: usize| ranges.iter().all(|r| r.0 % u == 0);
            if p.rows.len() > 1 {
                assert!(
                    interior(&p.rows, uh),
                    "{} rows {:?} unit {uh}",
                    p.node,
                    p.rows
                );
            }
            if p.cols.len() > 1 {
                assert!(
                    interior(&p.cols, uw),
                    "{} cols {:?} unit {uw}",
                    p.node,
                    p.cols
                );
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn sets_cover_the_ofm_once(
        h in 1usize..40,
        w in 1usize..40,
        uh in 1usize..4,
        uw in 1usize..4,
        target in 1usize..80,
        rows_only in any::<bool>(),
    ) {
        let shape = if rows_only { SetShape::Rows } else { SetShape::Grid };
        let ofm = TensorShape::new(h, w, 1);
        let (rows, cols) = set_grid_with(&ofm, (uh, uw), target, shape);
        prop_assert!(rows.len() * cols.len() <= target);
        if rows_only {
            prop_assert_eq!(cols.len(), 1);
        }
        let mut covered = vec![0u8; h * w];
        let mut areas = Vec::new();
        for &(r0, r1) in &rows {
            for &(c0, c1) in &cols {
                areas.push((r1 - r0) * (c1 - c0));
                for r in r0..r1 {
                    for c in c0..c1 {
                        covered[r * w + c] += 1;
                    }
                }
            }
        }
        prop_assert!(covered.iter().all(|&n| n == 1));
        let (lo, hi) = (areas.iter().min().unwrap(), areas.iter().max().unwrap());
        prop_assert!(*hi <= 2 * *lo);
        if rows.len() > 1 {
            prop_assert!(rows.iter().all(|r| r.0 % uh == 0));
        }
        if cols.len() > 1 {
            prop_assert!(cols.iter().all(|c| c.0 % uw == 0));
        }
    }
}
