//! Writes every plot kind for a short supercritical run into a directory.
//!
//! ```text
//! cargo run --release --example plots -- /tmp/homoflow-plots
//! ```

use std::path::PathBuf;

use homoflow::blowup::{detect_weak_blowup, rescale_trajectory};
use homoflow::io::svg::{render_svg, PlotData, PlotKind, PlotSpec};
use homoflow::io::trajectory::write_trajectory_csv;
use homoflow::{simulate, DtSchedule, InitialProfile, ModelSpec, RunSpec};

fn main() -> homoflow::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "plots".into()));
    std::fs::create_dir_all(&dir)?;

    let spec = RunSpec::new(
        ModelSpec::new(1.3, 0.15, 0.0, 12),
        InitialProfile::TwoBlocks {
            separation: 2.0,
            block_width: 1.0,
        },
        DtSchedule::constant(0.01),
        10.0,
    );
    let result = simulate(&spec)?;
    write_trajectory_csv(&result, &dir.join("diagnostics.csv"), &dir.join("snapshots.csv"))?;
    println!("{:?}", result.termination);

    for kind in [PlotKind::EnergyVsT, PlotKind::MomentVsT] {
        render_svg(
            PlotData::Diagnostics(&result.rows),
            &PlotSpec::new(kind),
            &dir.join(format!("{}.svg", kind.name())),
        )?;
    }
    for kind in [PlotKind::Worldlines, PlotKind::DensityHist] {
        render_svg(
            PlotData::Snapshots(&result.snapshots),
            &PlotSpec::new(kind),
            &dir.join(format!("{}.svg", kind.name())),
        )?;
    }
    let weak = detect_weak_blowup(&result, 1e-5 * result.initial_scale);
    if let Some(&range) = weak.sets.first() {
        let rescaled = rescale_trajectory(&result.snapshots, range)?;
        let data = PlotData::Rescaled {
            trajectory: &rescaled,
            range,
        };
        render_svg(
            data,
            &PlotSpec::new(PlotKind::RescaledWorldlines),
            &dir.join("rescaled_worldlines.svg"),
        )?;
    }
    println!("plots written to {}", dir.display());
    Ok(())
}
