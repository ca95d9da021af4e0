//! Reads a run configuration, prints the resolved run and renders it back to TOML.
//!
//! ```text
//! cargo run --example config_roundtrip -- crates/core/configs/double_bump.toml
//! ```

use homoflow::io::config::{parse_run_spec, read_run_spec, render_run_spec};

fn main() -> homoflow::Result<()> {
    let spec = match std::env::args().nth(1) {
        Some(path) => read_run_spec(path.as_ref())?,
        None => parse_run_spec(include_str!("../configs/subcritical.toml"))?,
    };
    println!("model: {:?}", spec.model);
    println!(
        "effective chi {:.6}, mobility {:.6}",
        spec.model.effective_chi(),
        spec.model.mobility()
    );
    println!("initial: {}", spec.initial.kind_name());
    let text = render_run_spec(&spec);
    println!("---\n{text}");
    assert_eq!(parse_run_spec(&text)?, spec);
    Ok(())
}
