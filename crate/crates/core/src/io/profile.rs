use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{center, Configuration};

/// Generator for the initial configuration of a run.
///
/// Generated profiles sample the quantile function at the midpoints `p_i = (i - 1/2)/N` and are
/// then centered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialProfile {
    /// `X(p) = amplitude * tanh(steepness * (p - center_p))`: two bumps of density.
    Tanh {
        amplitude: f64,
        steepness: f64,
        center_p: f64,
    },
    /// Equally spaced particles on `[-half_width, half_width]`.
    Uniform { half_width: f64 },
    /// Two equal uniform blocks of width `block_width`, centers `separation` apart.
    TwoBlocks { separation: f64, block_width: f64 },
    /// Given positions (re-centered).
    Explicit { positions: Vec<f64> },
}

impl InitialProfile {
    /// `4 tanh(10 (p - 1/2))`.
    pub fn double_bump() -> Self {
        InitialProfile::Tanh {
            amplitude: 4.0,
            steepness: 10.0,
            center_p: 0.5,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            InitialProfile::Tanh { .. } => "tanh",
            InitialProfile::Uniform { .. } => "uniform",
            InitialProfile::TwoBlocks { .. } => "two_blocks",
            InitialProfile::Explicit { .. } => "explicit",
        }
    }

    /// Checks the shape parameters. `key_prefix` is used in error messages.
    pub fn validate(&self, key_prefix: &str) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::validation(
                    format!("{key_prefix}.{name}"),
                    format!("must be a positive number, got {v}"),
                ))
            }
        };
        match self {
            InitialProfile::Tanh {
                amplitude,
                steepness,
                center_p,
            } => {
                positive("amplitude", *amplitude)?;
                positive("steepness", *steepness)?;
                if !center_p.is_finite() {
                    return Err(Error::validation(
                        format!("{key_prefix}.center_p"),
                        "must be finite",
                    ));
                }
            }
            InitialProfile::Uniform { half_width } => positive("half_width", *half_width)?,
            InitialProfile::TwoBlocks {
                separation,
                block_width,
            } => {
                positive("separation", *separation)?;
                positive("block_width", *block_width)?;
                if block_width >= separation {
                    return Err(Error::validation(
                        format!("{key_prefix}.block_width"),
                        "blocks overlap: block_width must be smaller than separation",
                    ));
                }
            }
            InitialProfile::Explicit { positions } => {
                center(positions)
                    .map_err(|e| Error::validation(format!("{key_prefix}.positions"), e.to_string()))?;
            }
        }
        Ok(())
    }

    pub fn generate(&self, n: usize) -> Result<Configuration> {
        if n < 2 {
            return Err(Error::domain("need at least 2 particles"));
        }
        self.validate("initial")?;
        let mid = |i: usize| (i as f64 + 0.5) / n as f64;
        let raw: Vec<f64> = match self {
            InitialProfile::Tanh {
                amplitude,
                steepness,
                center_p,
            } => (0..n)
                .map(|i| amplitude * (steepness * (mid(i) - center_p)).tanh())
                .collect(),
            InitialProfile::Uniform { half_width } => {
                (0..n).map(|i| half_width * (2.0 * mid(i) - 1.0)).collect()
            }
            InitialProfile::TwoBlocks {
                separation,
                block_width,
            } => {
                let left = n / 2;
                let right = n - left;
                let block = |count: usize, c: f64| {
                    (0..count).map(move |i| c + block_width * ((i as f64 + 0.5) / count as f64 - 0.5))
                };
                block(left, -0.5 * separation)
                    .chain(block(right, 0.5 * separation))
                    .collect()
            }
            InitialProfile::Explicit { positions } => {
                if positions.len() != n {
                    return Err(Error::validation(
                        "initial.positions",
                        format!("expected {n} positions, got {}", positions.len()),
                    ));
                }
                positions.clone()
            }
        };
        center(&raw)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn double_bump_sampling() {
        let x = InitialProfile::double_bump().generate(200).unwrap();
        assert_eq!(x.len(), 200);
        let expect = 4.0 * (10.0 * (0.5 / 200.0 - 0.5_f64)).tanh();
        assert!((x[0] - expect).abs() < 1e-12);
        // symmetric profile: centering is a no-op up to rounding
        assert!((x[0] + x[199]).abs() < 1e-12);
    }

    #[test]
    fn kinds_generate_ordered_profiles() {
        let kinds = [
            InitialProfile::Uniform { half_width: 2.0 },
            InitialProfile::TwoBlocks {
                separation: 4.0,
                block_width: 1.0,
            },
            InitialProfile::Explicit {
                positions: vec![0.0, 1.0, 3.0, 7.0, 8.0],
            },
        ];
        for k in kinds {
            let x = k.generate(5).unwrap();
            assert!(x.min_gap() > 0.0);
        }
        let u = InitialProfile::Uniform { half_width: 2.0 }.generate(4).unwrap();
        assert_eq!(u.gaps(), vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn invalid_profiles() {
        assert!(InitialProfile::Uniform { half_width: -1.0 }.generate(3).is_err());
        assert!(InitialProfile::TwoBlocks {
            separation: 1.0,
            block_width: 2.0
        }
        .generate(4)
        .is_err());
        assert!(InitialProfile::Explicit {
            positions: vec![0.0, 2.0, 1.0]
        }
        .generate(3)
        .is_err());
        assert!(InitialProfile::Explicit {
            positions: vec![0.0, 1.0]
        }
        .generate(3)
        .is_err());
    }
}
