//! Logarithmic interaction: the second moment moves at a constant rate, and its sign decides
//! between spreading and collapse.

use homoflow::flow::{rk4_with, Functional};
use homoflow::model::second_moment;
use homoflow::Configuration;

fn main() -> homoflow::Result<()> {
    let n = 6;
    let critical = 1.0 / n as f64;
    for chi in [0.8 * critical, 1.2 * critical] {
        let f = Functional::Log { chi };
        let mut x = Configuration::from_gaps(&vec![0.5; n - 1])?;
        let dt = 1e-4;
        let f0 = second_moment(&x);
        for _ in 0..1000 {
            x = rk4_with(&x, dt, &f)?;
        }
        let slope = (second_moment(&x) - f0) / 0.1;
        let expected = (n - 1) as f64 * (1.0 - chi * n as f64);
        println!("chi = {chi:.4}: df2/dt = {slope:.10} (expected {expected:.10})");
        if expected < 0.0 {
            println!("  f2 reaches zero by t = {:.4}: collapse", f0 / -expected);
        } else {
            println!("  f2 grows without bound: spreading");
        }
    }
    Ok(())
}
