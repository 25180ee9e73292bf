//! Supply functions `Q` sampled on the grid.
//!
//! Wiener realizations are drawn from `ChaCha8Rng::seed_from_u64(seed)` with
//! standard normals from `rand_distr::StandardNormal` (ziggurat transform of
//! the uniform stream). Both are fixed: changing either changes every
//! recorded experiment.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::SupplyVector;
use crate::error::{Error, Result};
use crate::grid::TimeGrid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SupplySpec {
    /// `amplitude * sin(angular_frequency * t)`
    Sinusoid {
        amplitude: f64,
        angular_frequency: f64,
    },
    /// One realization of a standard Wiener process.
    Wiener {
        seed: u64,
    },
    FromFile {
        path: PathBuf,
    },
    Constant {
        value: f64,
    },
}

pub fn generate_supply(spec: &SupplySpec, grid: &TimeGrid) -> Result<SupplyVector> {
    let n = grid.steps();
    match spec {
        SupplySpec::Sinusoid {
            amplitude,
            angular_frequency,
        } => SupplyVector::new(
            (0..n)
                .map(|l| amplitude * (angular_frequency * grid.time(l)).sin())
                .collect(),
        ),
        SupplySpec::Wiener { seed } => SupplyVector::new(wiener_path(*seed, grid)),
        SupplySpec::Constant { value } => SupplyVector::new(vec![*value; n]),
        SupplySpec::FromFile { path } => {
            let values = read_column(path)?;
            if values.len() != n {
                return Err(Error::SupplyLength {
                    path: path.clone(),
                    expected: n,
                    actual: values.len(),
                });
            }
            SupplyVector::new(values)
        }
    }
}

/// `W[0] = 0`, `W[l] = W[l-1] + xi_l sqrt(dt)`, sampled at left endpoints.
pub fn wiener_path(seed: u64, grid: &TimeGrid) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = grid.dt().sqrt();
    let mut path = Vec::with_capacity(grid.steps());
    let mut w = 0.0;
    path.push(w);
    for _ in 1..grid.steps() {
        let xi: f64 = StandardNormal.sample(&mut rng);
        w += xi * scale;
        path.push(w);
    }
    path
}

/// Reads a single numeric column. The first row may be a header; blank rows
/// are skipped. LF and CRLF line endings are both accepted.
pub fn read_column(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let field = line.trim();
        if field.is_empty() {
            continue;
        }
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() => values.push(v),
            Ok(_) => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    row: i + 1,
                    message: format!("non-finite value `{field}`"),
                })
            }
            Err(_) if i == 0 && values.is_empty() => {} // header
            Err(e) => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    row: i + 1,
                    message: format!("`{field}`: {e}"),
                })
            }
        }
    }
    Ok(values)
}

/// Writes `Q` with header `Q`, one shortest round-trip decimal per row.
pub fn write_supply_csv(path: &Path, supply: &SupplyVector) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = String::with_capacity(supply.len() * 24 + 2);
    out.push_str("Q\n");
    for v in supply.as_slice() {
        out.push_str(&format!("{v:?}\n"));
    }
    fs::File::create(path)
        .and_then(|mut f| f.write_all(out.as_bytes()))
        .map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sinusoid_on_coarse_grid() {
        let g = TimeGrid::new(1.0, 4).unwrap();
        let q = generate_supply(
            &SupplySpec::Sinusoid {
                amplitude: 1.0,
                angular_frequency: 10.0,
            },
            &g,
        )
        .unwrap();
        assert_eq!(
            q.as_slice(),
            &[0.0, 2.5f64.sin(), 5.0f64.sin(), 7.5f64.sin()]
        );
    }

    #[test]
    fn wiener_starts_at_zero_and_is_deterministic() {
        let g = TimeGrid::new(1.0, 64).unwrap();
        for seed in [0, 1, 42, u64::MAX] {
            let a = generate_supply(&SupplySpec::Wiener { seed }, &g).unwrap();
            assert_eq!(a.as_slice()[0], 0.0);
            assert_eq!(a.len(), 64);
        }
        let a = generate_supply(&SupplySpec::Wiener { seed: 42 }, &g).unwrap();
        let b = generate_supply(&SupplySpec::Wiener { seed: 42 }, &g).unwrap();
        let bits = |v: &SupplyVector| v.as_slice().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        let c = generate_supply(&SupplySpec::Wiener { seed: 43 }, &g).unwrap();
        assert_ne!(bits(&a), bits(&c));
    }

    #[test]
    fn single_step_wiener_is_zero() {
        let g = TimeGrid::new(1.0, 1).unwrap();
        let q = generate_supply(&SupplySpec::Wiener { seed: 3 }, &g).unwrap();
        assert_eq!(q.as_slice(), &[0.0]);
    }

    #[test]
    fn constant_supply() {
        let g = TimeGrid::new(2.0, 3).unwrap();
        let q = generate_supply(&SupplySpec::Constant { value: 0.5 }, &g).unwrap();
        assert_eq!(q.as_slice(), &[0.5; 3]);
    }

    #[test]
    fn csv_round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("q.csv");
        let g = TimeGrid::new(1.0, 1000).unwrap();
        let q = generate_supply(
            &SupplySpec::Sinusoid {
                amplitude: 1.0,
                angular_frequency: 10.0,
            },
            &g,
        )
        .unwrap();
        write_supply_csv(&path, &q).unwrap();
        let back = generate_supply(&SupplySpec::FromFile { path }, &g).unwrap();
        for (a, b) in q.as_slice().iter().zip(back.as_slice()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn file_length_mismatch_names_counts() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("q.csv");
        fs::write(&path, "Q\r\n1.0\r\n2.0\r\n3\r\n").unwrap();
        let g = TimeGrid::new(1.0, 4).unwrap();
        let err = generate_supply(&SupplySpec::FromFile { path: path.clone() }, &g).unwrap_err();
        match err {
            Error::SupplyLength {
                expected, actual, ..
            } => assert_eq!((expected, actual), (4, 3)),
            other => panic!("unexpected {other:?}"),
        }
        assert!(err_text(&path, &g).contains("expected N = 4"));
    }

    fn err_text(path: &Path, g: &TimeGrid) -> String {
        generate_supply(
            &SupplySpec::FromFile {
                path: path.to_path_buf(),
            },
            g,
        )
        .unwrap_err()
        .to_string()
    }

    #[test]
    fn file_without_header_and_bad_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("q.csv");
        fs::write(&path, "1.5\n-2\n").unwrap();
        assert_eq!(read_column(&path).unwrap(), vec![1.5, -2.0]);
        fs::write(&path, "Q\n1.0\nNaN\n").unwrap();
        assert!(matches!(
            read_column(&path),
            Err(Error::Parse { row: 3, .. })
        ));
        fs::write(&path, "Q\n1.0\nabc\n").unwrap();
        assert!(matches!(
            read_column(&path),
            Err(Error::Parse { row: 3, .. })
        ));
    }
}
