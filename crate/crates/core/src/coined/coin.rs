use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{param, Error, Result};
use crate::linalg::unitarity_deviation;
use crate::C64;

/// Tolerance for the unitarity check made when a coin is realised.
pub const COIN_UNITARITY_TOL: f64 = 1e-12;

/// Which unitary coin acts at a vertex.
#[derive(Debug, Clone, PartialEq)]
pub enum CoinSpec {
    Hadamard,
    /// `[[√η, e^{iδ}√(1−η)], [e^{−iδ}√(1−η), −√η]]`.
    Biased { eta: f64, delta: f64 },
    /// Discrete Fourier transform, `ω^{jk}/√d`.
    Dft,
    /// `2/d − δ_ij`.
    Grover,
    /// `−I`, used at the marked vertex of the search walk.
    NegativeIdentity,
    Custom(DMatrix<C64>),
    /// A default coin with per-vertex overrides.
    PerVertex {
        default: Box<CoinSpec>,
        overrides: Vec<(usize, CoinSpec)>,
    },
}

impl CoinSpec {
    /// The coin that acts at `vertex` (resolves [`CoinSpec::PerVertex`]).
    pub fn at_vertex(&self, vertex: usize) -> &CoinSpec {
        match self {
            CoinSpec::PerVertex { default, overrides } => overrides
                .iter()
                .rev()
                .find(|(v, _)| *v == vertex)
                .map(|(_, c)| c.at_vertex(vertex))
                .unwrap_or_else(|| default.at_vertex(vertex)),
            other => other,
        }
    }
}

/// Realises a coin as a `d × d` unitary matrix.
pub fn make_coin(spec: &CoinSpec, d: usize) -> Result<DMatrix<C64>> {
    if d == 0 {
        return Err(param("d", "coin dimension must be at least 1"));
    }
    let m = match spec {
        CoinSpec::Hadamard => {
            require_qubit("Hadamard", d)?;
            let h = std::f64::consts::FRAC_1_SQRT_2;
            DMatrix::from_row_slice(2, 2, &[h, h, h, -h].map(|v| C64::new(v, 0.0)))
        }
        CoinSpec::Biased { eta, delta } => {
            require_qubit("Biased", d)?;
            if !(0.0..=1.0).contains(eta) {
                return Err(param("eta", format!("{eta} outside [0, 1]")));
            }
            if !(0.0..2.0 * PI).contains(delta) {
                return Err(param("delta", format!("{delta} outside [0, 2π)")));
            }
            let a = C64::new(eta.sqrt(), 0.0);
            let b = (1.0 - eta).sqrt();
            DMatrix::from_row_slice(
                2,
                2,
                &[a, C64::from_polar(b, *delta), C64::from_polar(b, -delta), -a],
            )
        }
        CoinSpec::Dft => {
            let norm = 1.0 / (d as f64).sqrt();
            DMatrix::from_fn(d, d, |j, k| {
                C64::from_polar(norm, 2.0 * PI * ((j * k) % d) as f64 / d as f64)
            })
        }
        CoinSpec::Grover => DMatrix::from_fn(d, d, |i, j| {
            C64::new(2.0 / d as f64 - if i == j { 1.0 } else { 0.0 }, 0.0)
        }),
        CoinSpec::NegativeIdentity => -DMatrix::<C64>::identity(d, d),
        CoinSpec::Custom(m) => {
            if m.nrows() != d || m.ncols() != d {
                return Err(Error::Dimension {
                    expected: d,
                    found: m.nrows().max(m.ncols()),
                });
            }
            m.clone()
        }
        CoinSpec::PerVertex { .. } => {
            return Err(Error::Unsupported(
                "a per-vertex coin has no single matrix; resolve it with `at_vertex`".into(),
            ))
        }
    };
    let dev = unitarity_deviation(&m);
    if dev > COIN_UNITARITY_TOL {
        return Err(Error::NotUnitary { max_deviation: dev });
    }
    Ok(m)
}

/// Real rotation coin `[[cos(φ/2), sin(φ/2)], [sin(φ/2), −cos(φ/2)]]`; `φ = π/2`
/// gives the Hadamard coin.
pub fn angle_coin(phi: f64) -> DMatrix<C64> {
    let (s, c) = (phi / 2.0).sin_cos();
    DMatrix::from_row_slice(2, 2, &[c, s, s, -c].map(|v| C64::new(v, 0.0)))
}

fn require_qubit(name: &str, d: usize) -> Result<()> {
    if d != 2 {
        return Err(Error::Unsupported(format!(
            "the {name} coin needs a two-dimensional coin space, not {d}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;

    fn real(rows: usize, vals: &[f64]) -> DMatrix<C64> {
        DMatrix::from_row_slice(rows, rows, &vals.iter().map(|&v| C64::new(v, 0.0)).collect::<Vec<_>>())
    }

    #[test]
    fn grover_three() {
        let g = make_coin(&CoinSpec::Grover, 3).unwrap();
        let expect = real(3, &[-1.0, 2.0, 2.0, 2.0, -1.0, 2.0, 2.0, 2.0, -1.0]) / C64::new(3.0, 0.0);
        assert!(max_abs_diff(&g, &expect) < 1e-15);
        let u = nalgebra::DVector::from_element(3, C64::new(1.0 / 3f64.sqrt(), 0.0));
        assert!((&g * &u - &u).norm() < 1e-15);
    }

    #[test]
    fn unbiased_coin_is_hadamard() {
        let b = make_coin(&CoinSpec::Biased { eta: 0.5, delta: 0.0 }, 2).unwrap();
        let h = make_coin(&CoinSpec::Hadamard, 2).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!(max_abs_diff(&h, &real(2, &[s, s, s, -s])) < 1e-16);
        assert!(max_abs_diff(&b, &h) < 1e-15);
        assert!(max_abs_diff(&angle_coin(PI / 2.0), &h) < 1e-15);
    }

    #[test]
    fn dft_entries() {
        let f = make_coin(&CoinSpec::Dft, 4).unwrap();
        let i = C64::new(0.0, 1.0);
        assert!((f[(1, 1)] - i * 0.5).norm() < 1e-15);
        // ω^{2·3 mod 4} = ω² = −1
        assert!((f[(2, 3)] - C64::new(-0.5, 0.0)).norm() < 1e-15);
        assert!(unitarity_deviation(&f) < 1e-14);
    }

    #[test]
    fn rejects_bad_input() {
        let bad = real(2, &[1.0, 1.0, 0.0, 1.0]);
        match make_coin(&CoinSpec::Custom(bad), 2) {
            Err(Error::NotUnitary { max_deviation }) => assert!(max_deviation > 0.5),
            other => panic!("{other:?}"),
        }
        assert!(make_coin(&CoinSpec::Hadamard, 3).is_err());
        assert!(make_coin(&CoinSpec::Biased { eta: 1.2, delta: 0.0 }, 2).is_err());
        assert!(make_coin(&CoinSpec::Biased { eta: 0.2, delta: 7.0 }, 2).is_err());
        assert!(make_coin(&CoinSpec::Custom(real(2, &[1.0, 0.0, 0.0, 1.0])), 3).is_err());
    }

    #[test]
    fn per_vertex_resolution() {
        let spec = CoinSpec::PerVertex {
            default: Box::new(CoinSpec::Grover),
            overrides: vec![(5, CoinSpec::NegativeIdentity)],
        };
        assert_eq!(spec.at_vertex(5), &CoinSpec::NegativeIdentity);
        assert_eq!(spec.at_vertex(4), &CoinSpec::Grover);
    }
}
