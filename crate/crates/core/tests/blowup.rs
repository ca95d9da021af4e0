use homoflow::blowup::{detect_relative_blowup, detect_weak_blowup, BlowupOptions};
use homoflow::{simulate, Configuration, DtSchedule, InitialProfile, ModelSpec, RunSpec};

fn sequence(gaps: impl Fn(f64) -> Vec<f64>) -> Vec<Configuration> {
    (0..8)
        .map(|k| Configuration::from_gaps(&gaps(4f64.powi(k))).unwrap())
        .collect()
}

#[test]
fn two_separate_collapses() {
    let seq = sequence(|n| vec![1.0 / n, 1.0, 1.0, 1.0 / n, 1.0 / n]);
    let sets = detect_relative_blowup(&seq, &BlowupOptions::default()).unwrap();
    let ranges: Vec<_> = sets.iter().map(|s| s.one_based()).collect();
    assert_eq!(ranges, vec![(1, 2), (4, 6)]);
    for s in &sets {
        let z = &s.profile;
        let pi: f64 = z.gaps().iter().map(|g| g * g).sum::<f64>().sqrt();
        assert!((pi - 1.0).abs() < 1e-12);
        assert!(z.iter().sum::<f64>().abs() < 1e-12);
    }
}

#[test]
fn mixed_rates_keep_the_fast_pair() {
    let seq = sequence(|n| vec![1.0 / (n * n), 1.0 / n, 1.0]);
    let sets = detect_relative_blowup(&seq, &BlowupOptions::default()).unwrap();
    assert_eq!(
        sets.iter().map(|s| s.one_based()).collect::<Vec<_>>(),
        vec![(1, 2)]
    );
}

#[test]
fn expanding_sequence_has_no_set() {
    let seq = sequence(|n| vec![n, n, 1.0]);
    assert!(detect_relative_blowup(&seq, &BlowupOptions::default())
        .unwrap()
        .is_empty());
}

#[test]
fn supercritical_run_has_weak_blowup() {
    let spec = RunSpec::new(
        ModelSpec::new(1.3, 0.15, 0.0, 12),
        InitialProfile::TwoBlocks {
            separation: 3.0,
            block_width: 1.0,
        },
        DtSchedule::constant(0.01),
        10.0,
    );
    let run = simulate(&spec).unwrap();
    assert!(run.termination.is_blowup());
    let weak = detect_weak_blowup(&run, 1e-5 * run.initial_scale);
    assert!(!weak.sets.is_empty());
    let sets = detect_relative_blowup(&run.configurations(), &BlowupOptions::default()).unwrap();
    for s in &sets {
        assert!(
            weak.containing(s.l, s.r).is_some(),
            "{:?} not in {:?}",
            s.range(),
            weak.sets
        );
    }
}
