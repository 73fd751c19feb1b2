//! Central finite-difference gradient checking.

use super::Matrix;

/// Perturbation used for central differences.
pub const FD_STEP: f64 = 1e-5;

/// Gradient entries smaller than this are compared on an absolute scale of
/// the same size; pure relative error is meaningless near zero.
pub const RELATIVE_FLOOR: f64 = 1e-4;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamCheck {
    pub name: String,
    pub max_relative_error: f64,
    /// Flat row-major index of the worst entry.
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub tolerance: f64,
    pub params: Vec<ParamCheck>,
}

impl GradCheckReport {
    pub fn max_relative_error(&self) -> f64 {
        self.params
            .iter()
            .map(|p| p.max_relative_error)
            .fold(0.0, f64::max)
    }

    pub fn failures(&self) -> Vec<&ParamCheck> {
        self.params
            .iter()
            .filter(|p| p.max_relative_error.is_nan() || p.max_relative_error > self.tolerance)
            .collect()
    }

    pub fn passed(&self) -> bool {
        self.failures().is_empty()
    }
}

/// Compares `analytic[k]` against central differences of `loss` around
/// `values`, one entry at a time. `loss` must be deterministic.
pub fn finite_difference_check<F>(
    loss: F,
    names: &[String],
    values: &[Matrix],
    analytic: &[Matrix],
    tolerance: f64,
) -> GradCheckReport
where
    F: Fn(&[Matrix]) -> f64,
{
    assert_eq!(values.len(), analytic.len());
    assert_eq!(values.len(), names.len());
    let mut work: Vec<Matrix> = values.to_vec();
    let mut params = Vec::with_capacity(values.len());
    for (k, name) in names.iter().enumerate() {
        assert_eq!(values[k].shape(), analytic[k].shape(), "shape of {name}");
        let mut check = ParamCheck {
            name: name.clone(),
            max_relative_error: 0.0,
            worst_index: 0,
            analytic: 0.0,
            numeric: 0.0,
        };
        for idx in 0..values[k].as_slice().len() {
            let orig = values[k].as_slice()[idx];
            work[k].as_mut_slice()[idx] = orig + FD_STEP;
            let up = loss(&work);
            work[k].as_mut_slice()[idx] = orig - FD_STEP;
            let down = loss(&work);
            work[k].as_mut_slice()[idx] = orig;

            let numeric = (up - down) / (2.0 * FD_STEP);
            let a = analytic[k].as_slice()[idx];
            let err = relative_error(a, numeric);
            // A NaN error is sticky: it must surface as the worst entry.
            let worse = if err.is_nan() {
                !check.max_relative_error.is_nan()
            } else {
                err > check.max_relative_error
            };
            if worse {
                check.max_relative_error = err;
                check.worst_index = idx;
                check.analytic = a;
                check.numeric = numeric;
            }
        }
        params.push(check);
    }
    GradCheckReport { tolerance, params }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear(values: &[Matrix]) -> f64 {
        values[0]
            .as_slice()
            .iter()
            .zip([3.0, -2.0, 0.5])
            .map(|(x, c)| x * c)
            .sum()
    }

    #[test]
    fn linear_loss_is_exact() {
        let x = Matrix::from_rows(&[[0.1, 0.2, 0.3]]);
        let g = Matrix::from_rows(&[[3.0, -2.0, 0.5]]);
        let report = finite_difference_check(linear, &["x".into()], &[x], &[g], 1e-9);
        assert!(report.passed(), "{report:?}");
    }

    #[test]
    fn corrupted_gradient_is_flagged() {
        let x = Matrix::from_rows(&[[0.1, 0.2, 0.3]]);
        let g = Matrix::from_rows(&[[3.0, -2.0, 0.6]]);
        let report = finite_difference_check(linear, &["x".into()], &[x], &[g], 1e-5);
        assert!(!report.passed());
        assert_eq!(report.failures()[0].worst_index, 2);
    }

    #[test]
    fn nan_gradient_is_flagged() {
        let x = Matrix::from_rows(&[[0.1, 0.2, 0.3]]);
        let g = Matrix::from_rows(&[[3.0, f64::NAN, 0.5]]);
        let report = finite_difference_check(linear, &["x".into()], &[x], &[g], 1e-5);
        assert!(!report.passed());
    }
}
