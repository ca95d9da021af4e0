//! TOML run configuration.
//!
//! ```toml
//! schema = 1
//!
//! [model]
//! m = 1.2
//! chi = 1.45
//! alpha = 0.0             # optional, default 0
//! n = 200
//! chi_scaling = "mass"    # optional: "discrete" (default) or "mass"
//!
//! [initial]
//! kind = "tanh"           # tanh | uniform | two_blocks | explicit
//! amplitude = 4.0
//! steepness = 10.0
//! center_p = 0.5
//!
//! [time]
//! t_max = 5000.0
//! schedule = [[4.0, 0.05], [inf, 0.5]]   # (t_until, dt) stages
//! growth = 1.3            # optional
//!
//! [newton]                # optional section
//! max_iters = 50
//! tol = 1e-10
//! damping = true
//!
//! [stop]                  # optional section
//! gap_min = 1e-9          # optional, default 1e-9 times the initial scale
//! dt_min = 1e-10
//!
//! [output]                # optional section
//! record_every = 1
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{ChiScaling, DtSchedule, DtStage, ModelSpec, NewtonOptions, RunSpec, StopOptions};
use crate::io::profile::InitialProfile;

pub const SCHEMA_VERSION: i64 = 1;

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDoc {
    schema: Option<i64>,
    model: Option<RawModel>,
    initial: Option<InitialProfile>,
    time: Option<RawTime>,
    newton: Option<RawNewton>,
    stop: Option<RawStop>,
    output: Option<RawOutput>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    m: Option<f64>,
    chi: Option<f64>,
    alpha: Option<f64>,
    n: Option<usize>,
    chi_scaling: Option<ChiScaling>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTime {
    t_max: Option<f64>,
    schedule: Option<Vec<(f64, f64)>>,
    growth: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNewton {
    max_iters: Option<usize>,
    tol: Option<f64>,
    damping: Option<bool>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStop {
    gap_min: Option<f64>,
    dt_min: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    record_every: Option<usize>,
}

fn required<T>(v: Option<T>, key: &str) -> Result<T> {
    v.ok_or_else(|| Error::validation(key, "missing required key"))
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(before.len(), |i| before.len() - i - 1) + 1;
    (line, column)
}

/// Parses and validates a run configuration, filling defaults.
pub fn parse_run_spec(text: &str) -> Result<RunSpec> {
    let raw: RawDoc = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
        Error::Parse {
            line,
            column,
            message: e.message().to_string(),
        }
    })?;

    if let Some(v) = raw.schema {
        if v != SCHEMA_VERSION {
            return Err(Error::validation(
                "schema",
                format!("unsupported schema version {v} (expected {SCHEMA_VERSION})"),
            ));
        }
    }
    let model = required(raw.model, "model")?;
    let model = ModelSpec {
        m: required(model.m, "model.m")?,
        chi: required(model.chi, "model.chi")?,
        alpha: model.alpha.unwrap_or(0.0),
        n: required(model.n, "model.n")?,
        chi_scaling: model.chi_scaling.unwrap_or_default(),
    };
    let initial = required(raw.initial, "initial")?;
    let time = required(raw.time, "time")?;
    let t_max = required(time.t_max, "time.t_max")?;
    let schedule = DtSchedule {
        stages: required(time.schedule, "time.schedule")?
            .into_iter()
            .map(|(t_until, dt)| DtStage { t_until, dt })
            .collect(),
        growth: time.growth.unwrap_or(1.3),
    };
    let newton = raw.newton.unwrap_or_default();
    let defaults = NewtonOptions::default();
    let newton = NewtonOptions {
        max_iters: newton.max_iters.unwrap_or(defaults.max_iters),
        tol: newton.tol.unwrap_or(defaults.tol),
        damping: newton.damping.unwrap_or(defaults.damping),
    };
    let stop = raw.stop.unwrap_or_default();
    let stop = StopOptions {
        gap_min: stop.gap_min,
        dt_min: stop.dt_min.unwrap_or(StopOptions::default().dt_min),
    };
    let record_every = raw.output.unwrap_or_default().record_every.unwrap_or(1);

    let spec = RunSpec {
        model,
        initial,
        schedule,
        t_max,
        newton,
        stop,
        record_every,
    };
    spec.validate()?;
    Ok(spec)
}

pub fn read_run_spec(path: &std::path::Path) -> Result<RunSpec> {
    parse_run_spec(&std::fs::read_to_string(path)?)
}

/// Writes a complete configuration document; `parse_run_spec(&render_run_spec(s)) == s`.
pub fn render_run_spec(spec: &RunSpec) -> String {
    let doc = RawDoc {
        schema: Some(SCHEMA_VERSION),
        model: Some(RawModel {
            m: Some(spec.model.m),
            chi: Some(spec.model.chi),
            alpha: Some(spec.model.alpha),
            n: Some(spec.model.n),
            chi_scaling: Some(spec.model.chi_scaling),
        }),
        initial: Some(spec.initial.clone()),
        time: Some(RawTime {
            t_max: Some(spec.t_max),
            schedule: Some(spec.schedule.stages.iter().map(|s| (s.t_until, s.dt)).collect()),
            growth: Some(spec.schedule.growth),
        }),
        newton: Some(RawNewton {
            max_iters: Some(spec.newton.max_iters),
            tol: Some(spec.newton.tol),
            damping: Some(spec.newton.damping),
        }),
        stop: Some(RawStop {
            gap_min: spec.stop.gap_min,
            dt_min: Some(spec.stop.dt_min),
        }),
        output: Some(RawOutput {
            record_every: Some(spec.record_every),
        }),
    };
    toml::to_string(&doc).expect("run specs always serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    const DOUBLE_BUMP: &str = r#"
schema = 1

[model]
m = 1.2
chi = 1.45
n = 200

[initial]
kind = "tanh"
amplitude = 4.0
steepness = 10.0
center_p = 0.5

[time]
t_max = 1000.0
schedule = [[4.0, 0.05], [inf, 0.5]]
"#;

    #[test]
    fn reference_document() {
        let spec = parse_run_spec(DOUBLE_BUMP).unwrap();
        assert_eq!(spec.model.n, 200);
        assert_eq!(spec.model.chi, 1.45);
        assert_eq!(spec.model.alpha, 0.0);
        assert_eq!(spec.initial, InitialProfile::double_bump());
        assert_eq!(spec.schedule.stages.len(), 2);
        assert!(spec.schedule.stages[1].t_until.is_infinite());
        assert_eq!(spec.newton, NewtonOptions::default());
    }

    #[test]
    fn missing_chi_names_the_key() {
        let text = DOUBLE_BUMP.replace("chi = 1.45\n", "");
        match parse_run_spec(&text) {
            Err(Error::Validation { key, .. }) => assert_eq!(key, "model.chi"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn negative_dt_names_the_key() {
        let text = DOUBLE_BUMP.replace("[inf, 0.5]", "[inf, -1.0]");
        match parse_run_spec(&text) {
            Err(Error::Validation { key, .. }) => assert_eq!(key, "time.schedule[1].dt"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_key_reports_position() {
        let text = DOUBLE_BUMP.replace("n = 200", "n = 200\nbogus = 3");
        match parse_run_spec(&text) {
            Err(Error::Parse {
                line,
                column,
                message,
            }) => {
                assert_eq!(line, 8, "{message}");
                assert_eq!(column, 1);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn syntax_error_position() {
        match parse_run_spec("schema = 1\n[model\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn render_round_trip() {
        let mut spec = parse_run_spec(DOUBLE_BUMP).unwrap();
        spec.stop.gap_min = Some(1e-12);
        spec.model.chi_scaling = ChiScaling::Mass;
        let text = render_run_spec(&spec);
        assert_eq!(parse_run_spec(&text).unwrap(), spec);
    }
}
