use homoflow::thresholds::{
    compute_threshold, critical_profile, hls_ratio_gaps, CriticalOptions, ThresholdOptions,
};
use homoflow::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Brute-force maximum of pair sum over gap sum for `p` points, scanning gaps on a simplex grid.
fn simplex_scan(p: usize, m: f64, k: usize) -> f64 {
    let ratio = |gaps: &[f64]| {
        let x: Vec<f64> = std::iter::once(0.0)
            .chain(gaps.iter().scan(0.0, |s, g| {
                *s += g;
                Some(*s)
            }))
            .collect();
        let mut pairs = 0.0;
        for i in 0..x.len() {
            for j in 0..x.len() {
                if i != j {
                    pairs += (x[i] - x[j]).abs().powf(1.0 - m);
                }
            }
        }
        pairs / gaps.iter().map(|g| g.powf(1.0 - m)).sum::<f64>()
    };
    let mut best = 0.0_f64;
    let mut idx = vec![1usize; p - 1];
    loop {
        let gaps: Vec<f64> = idx.iter().map(|&i| i as f64 / k as f64).collect();
        best = best.max(ratio(&gaps));
        let mut d = 0;
        loop {
            if d == idx.len() {
                return 1.0 / best;
            }
            idx[d] += 1;
            if idx[d] <= k {
                break;
            }
            idx[d] = 1;
            d += 1;
        }
    }
}

#[test]
fn small_thresholds_match_grid_scan() {
    let opts = ThresholdOptions::default();
    for (p, k, tol) in [(3, 400, 1e-4), (4, 120, 1e-3)] {
        let c = compute_threshold(p, 1.5, &opts).unwrap().c_p;
        let scan = simplex_scan(p, 1.5, k);
        // a grid can only undershoot the maximum ratio
        assert!(c <= scan + 1e-12, "p={p}: {c} > grid {scan}");
        assert!((c - scan).abs() < tol, "p={p}: {c} vs grid {scan}");
    }
}

#[test]
fn maximizer_attains_threshold() {
    let est = compute_threshold(6, 1.2, &ThresholdOptions::default()).unwrap();
    let gaps = est.maximizer.gaps();
    let r = hls_ratio_gaps(&gaps, 1.2).unwrap();
    assert!((1.0 / r - est.c_p).abs() < 1e-10);
    assert!(est.kkt_residual < 1e-6);
    // the maximizer is symmetric under reflection
    let rev: Vec<f64> = gaps.iter().rev().copied().collect();
    for (a, b) in gaps.iter().zip(&rev) {
        assert!((a - b).abs() < 1e-5 * a.max(*b), "{gaps:?}");
    }
}

#[test]
fn seeds_agree() {
    let a = compute_threshold(
        7,
        1.3,
        &ThresholdOptions {
            seed: 1,
            ..Default::default()
        },
    )
    .unwrap();
    let b = compute_threshold(
        7,
        1.3,
        &ThresholdOptions {
            seed: 99,
            ..Default::default()
        },
    )
    .unwrap();
    assert!((a.c_p - b.c_p).abs() < 1e-9);
}

#[test]
fn critical_profile_with_confinement() {
    let opts = CriticalOptions::default();
    let c4 = compute_threshold(4, 1.2, &opts.threshold).unwrap().c_p;
    let prof = critical_profile(4, 1.2, 0.8 * c4, 0.5, &opts).unwrap();
    assert!(prof.residual < 1e-8, "residual {}", prof.residual);
    assert!(prof.positions.iter().sum::<f64>().abs() < 1e-12);
    let x = prof.positions.to_vec();
    for i in 0..4 {
        assert!((x[i] + x[3 - i]).abs() < 1e-6, "not symmetric: {x:?}");
    }
}

#[test]
fn no_critical_point_regimes_are_reported() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let opts = CriticalOptions::default();
    let c3 = compute_threshold(3, 1.5, &opts.threshold).unwrap().c_p;
    let mut reported = 0;
    let total = 20;
    for k in 0..total {
        let (chi, alpha) = match k % 3 {
            0 => (c3 * rng.random_range(0.3..0.95), 0.0),
            1 => (c3 * rng.random_range(1.05..2.0), rng.random_range(0.1..2.0)),
            _ => (c3 * rng.random_range(0.3..0.95), -rng.random_range(0.1..2.0)),
        };
        match critical_profile(3, 1.5, chi, alpha, &opts) {
            Err(Error::NoCriticalPoint { .. }) => reported += 1,
            other => eprintln!("chi={chi} alpha={alpha}: {other:?}"),
        }
    }
    assert!(reported * 100 >= 95 * total, "{reported}/{total}");
}
