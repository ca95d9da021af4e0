//! Critical couplings `C_p` by multi-start maximization of the interaction/internal ratio.
//!
//! ```text
//! cargo run --release --example threshold_table -- 1.2 10
//! ```

use homoflow::thresholds::{threshold_table, ThresholdOptions};

fn main() -> homoflow::Result<()> {
    let mut args = std::env::args().skip(1);
    let m: f64 = args
        .next()
        .map_or(1.2, |s| s.parse().expect("m must be a number"));
    let p_max: usize = args
        .next()
        .map_or(8, |s| s.parse().expect("p_max must be an integer"));

    let table = threshold_table(p_max, m, &ThresholdOptions::default())?;
    println!("m = {m}");
    println!("{:>4} {:>12} {:>12} {:>10}", "p", "C_p", "1/p", "kkt");
    for e in &table.entries {
        println!(
            "{:>4} {:>12.8} {:>12.8} {:>10.1e}",
            e.p,
            e.c_p,
            1.0 / e.p as f64,
            e.kkt_residual
        );
    }
    println!("non-increasing: {}", table.monotone);
    if let Some(last) = table.entries.last() {
        println!("maximizer for p = {}: {:?}", last.p, last.maximizer.positions());
    }
    Ok(())
}
