//! The Cauchy–Schwarz deficit on random unit configurations and its infimum over the
//! nonnegative-energy cone above the threshold.
//!
//! ```text
//! cargo run --release --example deficit_bound
//! ```

use homoflow::model::deficit_h;
use homoflow::thresholds::{compute_threshold, estimate_delta_h, DeltaOptions, ThresholdOptions};
use homoflow::{Configuration, ModelParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> homoflow::Result<()> {
    let (n, m) = (4, 1.2);
    let c_n = compute_threshold(n, m, &ThresholdOptions::default())?.c_p;
    let p = ModelParams::new(m, c_n, 0.0, n)?;

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut smallest = f64::INFINITY;
    for _ in 0..1000 {
        let gaps: Vec<f64> = (0..n - 1).map(|_| rng.random_range(0.05..1.0)).collect();
        let y = Configuration::from_gaps(&gaps)?.normalized();
        smallest = smallest.min(deficit_h(&y, &p)?);
    }
    println!("min deficit over 1000 random unit configurations: {smallest:.3e}");

    for factor in [1.0, 1.05, 1.3] {
        let est = estimate_delta_h(n, m, factor * c_n, &DeltaOptions::default())?;
        println!(
            "chi = {factor:>4} C_{n}: delta_H <= {:.6e}  (feasible starts {}/{})",
            est.value, est.feasible_starts, est.starts
        );
    }
    Ok(())
}
