//! Relative blow-up detection on synthetic collapsing sequences.

use homoflow::blowup::{detect_relative_blowup, limiting_profile, BlowupOptions};
use homoflow::{Configuration, Error};

fn sequence(gaps: impl Fn(f64) -> Vec<f64>) -> Vec<Configuration> {
    (1..=8)
        .map(|k| Configuration::from_gaps(&gaps(4f64.powi(k))).expect("positive gaps"))
        .collect()
}

type GapLaw = Box<dyn Fn(f64) -> Vec<f64>>;

fn main() -> homoflow::Result<()> {
    let opts = BlowupOptions::default();
    let cases: [(&str, GapLaw); 3] = [
        ("(1/n, 1, 1/n^2)", Box::new(|n| vec![1.0 / n, 1.0, 1.0 / (n * n)])),
        ("(1/n, 1/n, 1)", Box::new(|n| vec![1.0 / n, 1.0 / n, 1.0])),
        ("(1, 1, 1)", Box::new(|_| vec![1.0, 1.0, 1.0])),
    ];
    for (name, g) in &cases {
        let sets = detect_relative_blowup(&sequence(g), &opts)?;
        let found: Vec<(usize, usize)> = sets.iter().map(|s| s.one_based()).collect();
        println!("gaps {name:<16} -> sets (1-based) {found:?}");
    }

    // A pair whose shape keeps changing has no limiting profile.
    let wobble = sequence(|n| {
        let s = if (n.log2() as i64) % 4 == 0 { 2.0 } else { 1.0 };
        vec![1.0, s / n, 1.0 / n, 1.0]
    });
    match limiting_profile(&wobble, (1, 3)) {
        Err(Error::NonConvergent { oscillation, .. }) => {
            println!("oscillating pair: oscillation {oscillation:.3}")
        }
        other => println!("oscillating pair: {other:?}"),
    }
    Ok(())
}
