//! Below the critical coupling the particles never collide; with confinement they settle on the
//! steady state.

use homoflow::thresholds::{compute_threshold, ThresholdOptions};
use homoflow::{simulate, DtSchedule, InitialProfile, ModelSpec, RunSpec};

fn main() -> homoflow::Result<()> {
    let (n, m) = (5, 1.2);
    let c5 = compute_threshold(n, m, &ThresholdOptions::default())?.c_p;
    for alpha in [0.0, 1.0] {
        let spec = RunSpec::new(
            ModelSpec::new(m, 0.5 * c5, alpha, n),
            InitialProfile::Uniform { half_width: 1.0 },
            DtSchedule::constant(0.1),
            100.0,
        );
        let result = simulate(&spec)?;
        let half = result.rows.len() / 2;
        let floor = result.rows[half..]
            .iter()
            .map(|r| r.min_gap)
            .fold(f64::INFINITY, f64::min);
        let last = result.rows.last().expect("rows");
        println!(
            "alpha = {alpha}: {}, min gap over the second half {floor:.4}, final F {:.6}",
            result.termination.label(),
            last.energy
        );
    }
    Ok(())
}
