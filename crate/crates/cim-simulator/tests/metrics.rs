use cim_mapping::{apply_duplication, ArchConfig, MappingPlan};
use cim_simulator::{check_speedup_relation, layer_by_layer_baseline, simulate, SimError};
use clsa_scheduler::{
    cross_layer_schedule, determine_sets, schedule_layer_by_layer, Schedule, ScheduledSet,
};
use nn_ir::{infer_shapes, KernelSpec, LayerNode, NNGraph, Op, PadAmounts, PoolSpec, TensorShape};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Chain of convolutions with varying channel counts, so PE counts differ
/// between layers on small crossbars.
fn random_chain(seed: u64) -> NNGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = rng.gen_range(1..=4);
    let mut h = rng.gen_range(10..=20);
    let mut nodes = vec![LayerNode::new(
        "in",
        Op::Input {
            shape: TensorShape::new(h, h, c),
        },
        vec![],
    )];
    let mut prev = "in".to_string();
    for i in 0..rng.gen_range(2..=5) {
        let k = if rng.gen_bool(0.5) { 3 } else { 1 };
        if k == 3 {
            let pad = format!("pad{i}");
            nodes.push(LayerNode::new(
                pad.clone(),
                Op::Pad(PadAmounts::new(1, 1, 1, 1)),
                vec![prev],
            ));
            prev = pad;
        }
        let k_out = rng.gen_range(1..=12);
        let name = format!("conv{i}");
        nodes.push(LayerNode::new(
            name.clone(),
            Op::Conv2d {
                kernel: KernelSpec::conv(k, k, c, k_out, 1),
                bias: false,
            },
            vec![prev],
        ));
        prev = name;
        c = k_out;
        if h >= 8 && rng.gen_bool(0.3) {
            let pool = format!("pool{i}");
            nodes.push(LayerNode::new(
                pool.clone(),
                Op::MaxPool2d(PoolSpec::new(2, 2)),
                vec![prev],
            ));
            prev = pool;
            h /= 2;
        }
    }
    infer_shapes(NNGraph::from_nodes(format!("chain{seed}"), nodes).unwrap()).unwrap()
}

fn small_arch(num_pe: usize) -> ArchConfig {
    ArchConfig::new(num_pe).with_pe_dims(4, 8)
}

/// Ut recomputed from the schedule entries alone.
fn utilization_oracle(s: &Schedule, plan: &MappingPlan) -> f64 {
    let work: u64 = s
        .entries
        .iter()
        .map(|e| e.cycles() * plan.layer(&e.layer).unwrap().pe_count as u64)
        .sum();
    work as f64 / (plan.arch.num_pe as f64 * s.makespan() as f64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn cross_layer_conserves_work(seed in any::<u64>(), target in 1usize..40, extra in 0usize..8) {
        let g = random_chain(seed);
        let pe_min = MappingPlan::new(&g, small_arch(usize::MAX)).unwrap().c_num();
        let plan = MappingPlan::new(&g, small_arch(pe_min + extra)).unwrap();
        let baseline = layer_by_layer_baseline(&plan);

        let lbl = simulate(&schedule_layer_by_layer(&determine_sets(&g, 1).unwrap()), &plan).unwrap();
        let (_, s) = cross_layer_schedule(&g, target).unwrap();
        let xinf = simulate(&s, &plan).unwrap();

        prop_assert_eq!(lbl.total_cycles, baseline.cycles);
        prop_assert_eq!(lbl.active_pe_cycles(), xinf.active_pe_cycles());
        prop_assert!(xinf.speedup >= 1.0);
        prop_assert!((xinf.utilization - utilization_oracle(&s, &plan)).abs() < 1e-12);
        prop_assert!(check_speedup_relation(&xinf, &baseline, pe_min, extra) < 1e-12);
        prop_assert!(check_speedup_relation(&lbl, &baseline, pe_min, extra) < 1e-12);
    }

    #[test]
    fn duplication_keeps_identity(seed in any::<u64>(), target in 1usize..40, d_seed in any::<u64>()) {
        let g = random_chain(seed);
        let probe = MappingPlan::new(&g, small_arch(usize::MAX)).unwrap();
        let pe_min = probe.c_num();
        let mut rng = ChaCha8Rng::seed_from_u64(d_seed);
        let d: Vec<usize> = probe.layers().iter().map(|_| rng.gen_range(1..=4)).collect();
        let used: usize = probe.pe_counts().iter().zip(&d).map(|(c, d)| c * d).sum();
        let plan = MappingPlan::new(&g, small_arch(used)).unwrap().with_duplicates(&d).unwrap();
        let dup = apply_duplication(&g, &plan).unwrap();
        let (_, s) = cross_layer_schedule(&dup, target).unwrap();
        let report = simulate(&s, &plan).unwrap();
        let baseline = layer_by_layer_baseline(&plan);
        prop_assert!((report.utilization - utilization_oracle(&s, &plan)).abs() < 1e-12);
        prop_assert!(check_speedup_relation(&report, &baseline, pe_min, used - pe_min) <= 0.02);
    }
}

#[test]
fn overlapping_sets_are_rejected() {
    let g = random_chain(1);
    let plan = MappingPlan::new(&g, small_arch(1 << 10)).unwrap();
    let layer = plan.layers()[0].layer.clone();
    let entry = |start| ScheduledSet {
        layer: layer.clone(),
        duplicate: 0,
        set_index: 0,
        region: clsa_scheduler::Region::new(0, 1, 0, 2).unwrap(),
        start_cycle: start,
        end_cycle: start + 2,
    };
    let s = Schedule {
        entries: vec![entry(0), entry(1)],
    };
    assert!(matches!(
        simulate(&s, &plan),
        Err(SimError::ResourceConflict { .. })
    ));
}

#[test]
fn latency_uses_cycle_time() {
    let g = random_chain(2);
    let plan = MappingPlan::new(&g, small_arch(1 << 10)).unwrap();
    let (_, s) = cross_layer_schedule(&g, 4).unwrap();
    let r = simulate(&s, &plan).unwrap();
    assert_eq!(r.total_latency_ns, r.total_cycles as f64 * 1400.0);
    assert_eq!(r.per_pe_active_cycles.len(), 1 << 10);
}
