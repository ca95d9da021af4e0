use homoflow::flow::{implicit_step, rk4_with, Functional, NewtonOptions};
use homoflow::model::{energy_breakdown, gradient};
use homoflow::{
    simulate, Configuration, DtSchedule, InitialProfile, ModelParams, ModelSpec, RunSpec, Termination,
};

fn sq(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

#[test]
fn implicit_step_solves_the_euler_equation() {
    let p = ModelParams::new(1.4, 0.05, 0.3, 6).unwrap();
    let x = Configuration::from_gaps(&[0.5, 0.9, 0.3, 1.1, 0.7]).unwrap();
    let step = implicit_step(&x, 0.1, &p, &NewtonOptions::default()).unwrap();
    let g = gradient(&step.next, &p).unwrap();
    for i in 0..6 {
        let r = step.next[i] - x[i] + 0.1 * g[i];
        assert!(r.abs() < 1e-9, "residual {r} at {i}");
    }
}

#[test]
fn energy_decreases_along_implicit_steps() {
    let spec = RunSpec::new(
        ModelSpec::new(1.5, 0.08, 0.5, 8),
        InitialProfile::Uniform { half_width: 2.0 },
        DtSchedule::constant(0.05),
        5.0,
    );
    let run = simulate(&spec).unwrap();
    assert!(matches!(run.termination, Termination::Completed { .. }));
    for w in run.rows.windows(2) {
        assert!(
            w[1].energy <= w[0].energy + 1e-12,
            "{} -> {}",
            w[0].energy,
            w[1].energy
        );
    }
}

#[test]
fn center_of_mass_stays_zero() {
    let spec = RunSpec::new(
        ModelSpec::new(1.3, 0.2, 0.0, 9),
        InitialProfile::TwoBlocks {
            separation: 3.0,
            block_width: 1.0,
        },
        DtSchedule::constant(0.02),
        2.0,
    );
    let run = simulate(&spec).unwrap();
    for (_, x) in &run.snapshots {
        assert!(x.iter().sum::<f64>().abs() < 1e-11);
    }
}

#[test]
fn second_moment_law_without_confinement() {
    let p = ModelParams::new(1.2, 0.04, 0.0, 7).unwrap();
    let f = Functional::Power(p);
    let mut x = Configuration::from_gaps(&[0.4, 0.6, 0.5, 0.9, 0.3, 0.8]).unwrap();
    let dt = 1e-4;
    for _ in 0..20 {
        let e = energy_breakdown(&x, &p).unwrap().total;
        let next = rk4_with(&x, dt, &f).unwrap();
        let prev = rk4_with(&x, -dt, &f).unwrap();
        let slope = 0.5 * (sq(&next) - sq(&prev)) / (2.0 * dt);
        assert!((slope - 0.2 * e).abs() < 1e-6 * e.abs().max(1.0));
        x = next;
    }
}

#[test]
fn mirrored_start_stays_mirrored() {
    let spec = RunSpec::new(
        ModelSpec::new(1.2, 0.1, 0.0, 10),
        InitialProfile::double_bump(),
        DtSchedule::constant(0.01),
        0.5,
    );
    let run = simulate(&spec).unwrap();
    let (_, x) = run.snapshots.last().unwrap();
    for i in 0..10 {
        assert!((x[i] + x[9 - i]).abs() < 1e-9);
    }
}

#[test]
fn logarithmic_exponent_is_rejected_by_power_driver() {
    let spec = RunSpec::new(
        ModelSpec::new(1.0, 0.1, 0.0, 4),
        InitialProfile::Uniform { half_width: 1.0 },
        DtSchedule::constant(0.1),
        1.0,
    );
    assert!(simulate(&spec).is_err());
}
