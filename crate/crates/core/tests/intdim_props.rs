mod common;

use common::oracles::{circle, random_rotation, sphere, transform, twonn_oracle};
use proptest::prelude::*;
use trace_core::intdim::{pca_estimate, twonn_estimate, PointCloud, DEFAULT_DISCARD};
use trace_core::Error;

fn cloud(rows: &[Vec<f64>]) -> PointCloud {
    PointCloud::from_rows(rows).unwrap()
}

#[test]
fn manifold_bands() {
    let line = twonn_estimate(&cloud(&circle(1000, 10, 1)), DEFAULT_DISCARD).unwrap();
    assert!((0.9..=1.2).contains(&line), "circle {line}");
    let surf = twonn_estimate(&cloud(&sphere(1000, 10, 2)), DEFAULT_DISCARD).unwrap();
    assert!((1.8..=2.3).contains(&surf), "sphere {surf}");
}

#[test]
fn matches_brute_force_oracle() {
    for seed in 0..4 {
        let rows = sphere(300, 6, seed);
        for discard in [0.0, 0.1, 0.25] {
            let a = twonn_estimate(&cloud(&rows), discard).unwrap();
            let b = twonn_oracle(&rows, discard);
            assert!((a - b).abs() <= 1e-12 * b, "{a} vs {b}");
        }
    }
}

#[test]
fn rotation_and_scale_invariance() {
    let rows = sphere(400, 10, 5);
    let base = twonn_estimate(&cloud(&rows), DEFAULT_DISCARD).unwrap();
    let q = random_rotation(10, 9);
    for scale in [1.0, 1e-3, 250.0] {
        let moved = twonn_estimate(&cloud(&transform(&rows, &q, scale)), DEFAULT_DISCARD).unwrap();
        assert!((moved - base).abs() < 1e-3 * base, "scale {scale}: {moved} vs {base}");
    }
}

#[test]
fn duplicates_do_not_change_the_estimate() {
    let rows = circle(200, 5, 3);
    let base = twonn_estimate(&cloud(&rows), 0.1).unwrap();
    let mut doubled = rows.clone();
    doubled.extend(rows.iter().take(50).cloned());
    let c = cloud(&doubled);
    assert_eq!(c.duplicate_count(), 50);
    assert_eq!(twonn_estimate(&c, 0.1).unwrap(), base);
}

#[test]
fn degenerate_inputs_are_errors() {
    let few = circle(10, 3, 0);
    assert!(matches!(twonn_estimate(&cloud(&few), 0.1), Err(Error::SampleSize { .. })));
    let same = vec![vec![1.0, 2.0]; 40];
    assert!(matches!(twonn_estimate(&cloud(&same), 0.1), Err(Error::Degenerate(_))));
    assert!(matches!(PointCloud::new(3, vec![0.0; 7]), Err(Error::Data(_))));
}

#[test]
fn pca_counts_flat_dimensions() {
    let q = random_rotation(8, 4);
    let mut r = common::oracles::rng(4);
    let flat: Vec<Vec<f64>> = (0..300)
        .map(|_| {
            let g = common::oracles::gaussian(&mut r, 3);
            let mut x = vec![0.0; 8];
            x[..3].copy_from_slice(&g);
            x
        })
        .collect();
    assert_eq!(pca_estimate(&cloud(&transform(&flat, &q, 7.0)), 0.999).unwrap(), 3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn permutation_invariance(seed in 0u64..1000, shift in 0usize..100) {
        let rows = sphere(120, 4, seed);
        let mut perm = rows.clone();
        perm.rotate_left(shift);
        perm.reverse();
        let a = twonn_estimate(&cloud(&rows), 0.1).unwrap();
        let b = twonn_estimate(&cloud(&perm), 0.1).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a);
    }

    #[test]
    fn pca_within_bounds(seed in 0u64..1000, thr in 0.05f64..1.0) {
        let rows = sphere(60, 5, seed);
        let k = pca_estimate(&cloud(&rows), thr).unwrap();
        prop_assert!((1..=5).contains(&k));
    }
}
