//! Error measures between particle states and exact solutions.

use std::cell::Cell as Slot;

use super::AnalysisError;
use crate::energy::EnergyModel;
use crate::geometry::{Point, Tessellation};

/// Mass-weighted l2 distance `sqrt(sum_i m_i |x_i - y_i|^2)`.
pub fn flow_error(positions: &[Point], exact: &[Point], masses: &[f64]) -> Result<f64, AnalysisError> {
    if positions.len() != exact.len() || positions.len() != masses.len() {
        return Err(AnalysisError::LengthMismatch {
            left: positions.len(),
            right: exact.len().min(masses.len()),
        });
    }
    Ok(positions
        .iter()
        .zip(exact)
        .zip(masses)
        .map(|((x, y), m)| m * (*x - *y).norm_squared())
        .sum::<f64>()
        .sqrt())
}

/// `sum_i int_{L_i} U(m_i / |L_i| | rho(x)) dx` by per-cell quadrature.
///
/// Points where `rho` vanishes use the limit `U(r) - U(0) - U'(0) r`;
/// negative densities are rejected.
pub fn relative_internal_energy(
    tess: &Tessellation,
    masses: &[f64],
    energy: &EnergyModel,
    rho: impl Fn(Point) -> f64,
) -> Result<f64, AnalysisError> {
    if masses.len() != tess.len() {
        return Err(AnalysisError::LengthMismatch { left: tess.len(), right: masses.len() });
    }
    let mut total = 0.0;
    for (i, cell) in tess.cells.iter().enumerate() {
        if cell.is_empty() {
            continue;
        }
        let density = masses[i] / cell.area;
        let bad = Slot::new(false);
        let [v] = cell.integrate(|x| {
            let s = rho(x);
            match energy.relative_entropy(density, s) {
                Ok(v) => [v],
                Err(_) => {
                    bad.set(true);
                    [0.0]
                }
            }
        });
        if bad.get() {
            return Err(AnalysisError::NonpositiveDensity(i));
        }
        total += v;
    }
    Ok(total)
}

/// Empirical convergence rates `log2(e_{k-1}/e_k) / log2(sqrt(N_k / N_{k-1}))`.
pub fn convergence_rates(ns: &[usize], errors: &[f64]) -> Vec<Option<f64>> {
    (0..errors.len())
        .map(|k| {
            (k > 0).then(|| {
                (errors[k - 1] / errors[k]).log2() / (ns[k] as f64 / ns[k - 1] as f64).sqrt().log2()
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flow_error_examples() {
        let a = [Point::new(0.1, 0.2), Point::new(-1.0, 3.0)];
        assert_eq!(flow_error(&a, &a, &[1.0, 2.0]).unwrap(), 0.0);
        let e = flow_error(&[Point::new(0.3, 0.4)], &[Point::ORIGIN], &[4.0]).unwrap();
        assert!((e - 1.0).abs() < 1e-15);
        assert!(matches!(flow_error(&a, &a[..1], &[1.0, 1.0]), Err(AnalysisError::LengthMismatch { .. })));
    }

    #[test]
    fn rates_of_halving_errors() {
        let r = convergence_rates(&[100, 400, 1600], &[0.1, 0.05, 0.025]);
        assert_eq!(r[0], None);
        assert!((r[1].unwrap() - 1.0).abs() < 1e-15);
        assert!((r[2].unwrap() - 1.0).abs() < 1e-15);
    }
}
