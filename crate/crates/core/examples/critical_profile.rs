//! Critical profiles: the zero-energy shape at `chi = C_p`, and a confined steady state.

use homoflow::model::gradient;
use homoflow::thresholds::{compute_threshold, critical_profile, CriticalOptions};
use homoflow::ModelParams;

fn main() -> homoflow::Result<()> {
    let (p, m) = (6, 1.2);
    let opts = CriticalOptions::default();
    let c_p = compute_threshold(p, m, &opts.threshold)?.c_p;

    let v = critical_profile(p, m, c_p, 0.0, &opts)?;
    println!("p = {p}, m = {m}, C_p = {c_p:.9}");
    println!("critical profile {:?}", v.positions.positions());
    println!("energy {:.3e}, residual {:.3e}", v.energy, v.residual);

    // Below the threshold a quadratic confinement balances the flow.
    let chi = 0.5 * c_p;
    let w = critical_profile(p, m, chi, 1.0, &opts)?;
    let grad = gradient(&w.positions, &ModelParams::new(m, chi, 1.0, p)?)?;
    println!("confined steady state {:?}", w.positions.positions());
    println!("|grad F| = {:.3e}", grad.norm());
    Ok(())
}
