//! Constructed fixture for the randomized parameter search.
//!
//! The normative stack is zero everywhere except isolated noise pixels on a
//! 4-pixel lattice in the upper half, so any chance cluster has size 1.
//! Outliers carry a planted 2×3 block in the empty lower half. Candidates
//! keep the block only while `min_cluster <= 6`.

use pedqc_core::spm::{
    null_max_cluster_distribution, search_params, LeaveOneOutMaps, PreparedSample, ReferenceStack, SearchSpace,
    SpmParams,
};
use pedqc_core::{Side, GRID_PIXELS, GRID_SIZE};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const N: usize = 250;

fn noise(rng: &mut ChaCha8Rng) -> Vec<f32> {
    let mut v = vec![0.0f32; GRID_PIXELS];
    for r in (0..32).step_by(4) {
        for c in (0..GRID_SIZE).step_by(4) {
            v[r * GRID_SIZE + c] = rng.gen_range(0.2..0.8);
        }
    }
    v
}

fn plant(mut v: Vec<f32>) -> Vec<f32> {
    for r in 44..46 {
        for c in 30..33 {
            v[r * GRID_SIZE + c] = 0.9;
        }
    }
    v
}

#[test]
fn search_keeps_small_min_cluster_for_small_anomaly() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let members: Vec<Vec<f32>> = (0..N).map(|_| noise(&mut rng)).collect();
    let stack = ReferenceStack::new(members, GRID_SIZE, GRID_SIZE).unwrap();
    let loo = LeaveOneOutMaps::new(&stack).unwrap();
    let loo = [loo.clone(), loo];

    let prepared: Vec<PreparedSample> = (0..40)
        .map(|i| {
            let outlier = i % 2 == 0;
            let v = noise(&mut rng);
            let v = if outlier { plant(v) } else { v };
            PreparedSample {
                id: format!("v{i}"),
                side: if i % 4 < 2 { Side::Left } else { Side::Right },
                is_outlier: outlier,
                p_map: Some(stack.pvalue_map(&v)),
            }
        })
        .collect();

    let base = SpmParams { n_permutations: 200, ..Default::default() };
    let result = search_params(&loo, &prepared, &base, &SearchSpace::default(), 25, 5).unwrap();
    assert_eq!(result.best_f1, 1.0);
    assert!(result.best.min_cluster <= 5, "tuned {:?}", result.best);
    for (c, f1) in &result.candidates {
        if c.min_cluster > 6 {
            assert_eq!(*f1, 0.0, "{c:?}");
        } else {
            assert_eq!(*f1, 1.0, "{c:?}");
        }
    }
}

#[test]
fn unattainable_threshold_gives_empty_null() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let members: Vec<Vec<f32>> = (0..20).map(|_| noise(&mut rng)).collect();
    let stack = ReferenceStack::new(members, GRID_SIZE, GRID_SIZE).unwrap();
    let params = SpmParams { alpha_forming: 1e-9, min_cluster: 0, n_permutations: 100, ..Default::default() };
    let null = null_max_cluster_distribution(&stack, &params, 1).unwrap();
    assert!(null.iter().all(|&v| v == 0));
}
