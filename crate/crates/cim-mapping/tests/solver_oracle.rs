use cim_mapping::{objective, solve_duplication, SolverMode};
use proptest::prelude::*;

/// Exhaustive minimum of Σ t_i/d_i over every feasible d.
fn brute_force(t: &[u64], c: &[usize], budget: usize) -> f64 {
    fn go(i: usize, t: &[u64], c: &[usize], left: usize, acc: f64, best: &mut f64) {
        if i == t.len() {
            *best = best.min(acc);
            return;
        }
        let mut d = 1;
        while c[i] * d <= left {
            // Only the PEs of layers not yet visited need to stay reserved.
            let reserve: usize = c[i + 1..].iter().sum();
            if c[i] * d + reserve > left {
                break;
            }
            go(
                i + 1,
                t,
                c,
                left - c[i] * d,
                acc + t[i] as f64 / d as f64,
                best,
            );
            d += 1;
        }
    }
    let mut best = f64::INFINITY;
    go(0, t, c, budget, 0.0, &mut best);
    best
}

fn instance() -> impl Strategy<Value = (Vec<u64>, Vec<usize>, usize)> {
    (1usize..=5)
        .prop_flat_map(|n| {
            (
                prop::collection::vec(1u64..2000, n),
                prop::collection::vec(1usize..=4, n),
            )
        })
        .prop_flat_map(|(t, c)| {
            let need: usize = c.iter().sum();
            (Just(t), Just(c), need.max(1)..=20usize.max(need))
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn exact_matches_enumeration((t, c, f) in instance()) {
        let d = solve_duplication(&t, &c, f, SolverMode::Exact).unwrap();
        let used: usize = c.iter().zip(&d).map(|(c, d)| c * d).sum();
        prop_assert!(used <= f);
        let opt = brute_force(&t, &c, f);
        prop_assert!((objective(&t, &d) - opt).abs() <= 1e-9 * opt.max(1.0));
    }

    #[test]
    fn greedy_stays_near_optimum((t, c, f) in instance()) {
        let d = solve_duplication(&t, &c, f, SolverMode::Greedy).unwrap();
        prop_assert!(objective(&t, &d) <= 1.05 * brute_force(&t, &c, f));
    }

    #[test]
    fn greedy_is_feasible_and_dominates_all_ones((t, c, f) in instance()) {
        let d = solve_duplication(&t, &c, f, SolverMode::Greedy).unwrap();
        let used: usize = c.iter().zip(&d).map(|(c, d)| c * d).sum();
        prop_assert!(used <= f);
        prop_assert!(d.iter().all(|&x| x >= 1));
        prop_assert!(objective(&t, &d) <= objective(&t, &vec![1; t.len()]));
    }

    #[test]
    fn solver_is_deterministic((t, c, f) in instance()) {
        for mode in [SolverMode::Greedy, SolverMode::Exact] {
            prop_assert_eq!(
                solve_duplication(&t, &c, f, mode).unwrap(),
                solve_duplication(&t, &c, f, mode).unwrap()
            );
        }
    }
}

#[test]
fn exchange_beats_many_small_increments() {
    // Plain marginal gain spends all three spare PEs on layer 0
    // (objective 28607.5); one increment of layer 1 is better.
    let (t, c) = ([12518, 23724, 1754], [1, 3, 3]);
    let d = solve_duplication(&t, &c, 10, SolverMode::Greedy).unwrap();
    assert_eq!(d, vec![1, 2, 1]);
    assert_eq!(objective(&t, &d), brute_force(&t, &c, 10));
}

#[test]
fn brute_force_oracle_sanity() {
    assert_eq!(brute_force(&[100, 10], &[1, 1], 3), 60.0);
    assert_eq!(brute_force(&[100], &[1], 4), 25.0);
}
