//! The two-bump collapse with 50 particles, followed by blow-up analysis.
//!
//! ```text
//! cargo run --release --example double_bump_run
//! ```

use homoflow::blowup::{detect_relative_blowup, detect_weak_blowup, BlowupOptions};
use homoflow::io::summary::extrema;
use homoflow::thresholds::{threshold_table, ThresholdOptions};
use homoflow::{simulate, RunSpec};

fn main() -> homoflow::Result<()> {
    let spec = RunSpec::double_bump(50);
    let result = simulate(&spec)?;
    let ex = extrema(&result);
    let first = result.rows.first().expect("initial row");
    println!("F(0) = {:.4}, f2(0) = {:.4}", first.energy, first.f2);
    println!("f2 peaks at t = {:.3} ({:.3})", ex.t_of_max_f2, ex.max_f2);
    if let Some(t) = ex.t_energy_sign_change {
        println!("energy turns negative at t = {t:.3}");
    }
    println!("termination: {:?}", result.termination);

    let sets = detect_relative_blowup(&result.configurations(), &BlowupOptions::default())?;
    let weak = detect_weak_blowup(&result, 1e-5 * result.initial_scale);
    for s in &sets {
        let (l, r) = s.one_based();
        println!(
            "relative blow-up set: particles {l}..={r}, profile settled: {}",
            s.profile_converged
        );
    }
    for (l, r) in &weak.sets {
        println!("weak blow-up set: particles {}..={}", l + 1, r + 1);
    }

    let chi = spec.model.effective_chi();
    let table = threshold_table(spec.model.n, spec.model.m, &ThresholdOptions::default())?;
    if let Some(k) = table.largest_subcritical(chi) {
        println!(
            "chi_eff = {chi:.6} < C_{k}: a weak set needs at least {} particles",
            k + 1
        );
    }
    Ok(())
}
