//! Energy, forces and scaling behavior of a small configuration.
//!
//! ```text
//! cargo run --example energy_landscape
//! ```

use homoflow::model::{dilate, energy_breakdown, gradient, moment_power, second_moment};
use homoflow::{Configuration, ModelParams};

fn main() -> homoflow::Result<()> {
    let p = ModelParams::new(1.5, 0.2, 0.0, 5)?;
    let x = Configuration::new(vec![-1.0, -0.4, 0.1, 0.5, 0.8])?;

    let e = energy_breakdown(&x, &p)?;
    println!("internal    {:>12.6}", e.internal);
    println!("interaction {:>12.6}", e.interaction);
    println!("total F     {:>12.6}", e.total);

    let g = gradient(&x, &p)?;
    println!("gradient    {:?}", g.0);
    // Euler identity for a degree 1-m homogeneous function
    println!(
        "<X, grad F> = {:.12}, (1-m) F = {:.12}",
        g.dot(&x),
        (1.0 - p.m) * e.total
    );

    for lambda in [0.5, 2.0, 10.0] {
        let y = dilate(&x, lambda)?;
        let ey = energy_breakdown(&y, &p)?.total;
        println!(
            "lambda = {lambda:>4}: F(lambda X) / F(X) = {:.12}, lambda^(1-m) = {:.12}",
            ey / e.total,
            lambda.powf(1.0 - p.m)
        );
    }
    println!(
        "f2 = {:.6}, f_(m+1) = {:.6}",
        second_moment(&x),
        moment_power(&x, p.m)
    );
    Ok(())
}
