//! Distances and rate diagnostics. Two views of the same discrepancy: the
//! true L1 distance on the covariate cube, and the covariate-weighted window
//! average actually identified by data. Their gap shrinks like n^{-1/2} for
//! ergodic covariates, which is what the delta diagnostic measures.

use thiserror::Error;

use crate::covariates::CovariateField;
use crate::grid::SpatialGrid;
use crate::intensity::Intensity;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("intensities have covariate dimensions {0} and {1}")]
    DimensionMismatch(usize, usize),
    #[error("unsupported covariate dimension {0}")]
    UnsupportedDimension(usize),
    #[error("covariate field shape does not match the window grid")]
    ShapeMismatch,
    #[error("rate regression needs at least {needed} distinct sample sizes, got {got}")]
    TooFewSizes { needed: usize, got: usize },
    #[error("rate regression needs positive errors, got {0}")]
    NonPositiveError(f64),
    #[error("sample sizes must be positive, finite and strictly increasing")]
    BadSampleSizes,
    #[error("replicate list for one sample size is empty")]
    EmptyReplicates,
}

/// Default quadrature refinement for the unit cube.
pub fn default_quadrature_cells(d: usize) -> usize {
    match d {
        1 => 512,
        _ => 128,
    }
}

/// Midpoint Riemann sum of |a - b| over [0,1]^d with `cells_per_axis`
/// subdivisions per axis. Exact for constants and, in the midpoint sense,
/// for piecewise-linear integrands.
pub fn l1_distance<A: Intensity, B: Intensity>(
    a: &A,
    b: &B,
    cells_per_axis: usize,
) -> Result<f64, MetricError> {
    let d = a.dim_in();
    if d != b.dim_in() {
        return Err(MetricError::DimensionMismatch(d, b.dim_in()));
    }
    if d == 0 || d > 2 {
        return Err(MetricError::UnsupportedDimension(d));
    }
    let m = cells_per_axis.max(1);
    let h = 1.0 / m as f64;
    let mut acc = 0.0;
    match d {
        1 => {
            for i in 0..m {
                let z = [(i as f64 + 0.5) * h];
                acc += (a.eval(&z) - b.eval(&z)).abs();
            }
            Ok(acc * h)
        }
        _ => {
            for i2 in 0..m {
                let z2 = (i2 as f64 + 0.5) * h;
                for i1 in 0..m {
                    let z = [(i1 as f64 + 0.5) * h, z2];
                    acc += (a.eval(&z) - b.eval(&z)).abs();
                }
            }
            Ok(acc * h * h)
        }
    }
}

/// The covariate-dependent L1 metric: the window average of
/// |a(Z(x)) - b(Z(x))|, discretized on the covariate grid and normalized by
/// the window volume n.
pub fn empirical_distance<A: Intensity, B: Intensity>(
    a: &A,
    b: &B,
    covariates: &CovariateField,
    grid: &SpatialGrid,
) -> Result<f64, MetricError> {
    let d = a.dim_in();
    if d != b.dim_in() {
        return Err(MetricError::DimensionMismatch(d, b.dim_in()));
    }
    if covariates.dim() != grid.dim()
        || covariates.cells_per_axis() != grid.cells_per_axis()
        || covariates.covariate_dim() != d
    {
        return Err(MetricError::ShapeMismatch);
    }
    let mut z = vec![0.0; d];
    let mut acc = 0.0;
    for cell in 0..covariates.num_cells() {
        covariates.at_cell(cell, &mut z);
        acc += (a.eval(&z) - b.eval(&z)).abs();
    }
    Ok(acc * grid.cell_volume() / grid.volume())
}

/// Signed gap between the true and the empirical distance. Root mean square
/// over replicates is the n^{-1/2} concentration signature.
pub fn delta_diagnostic<A: Intensity, B: Intensity>(
    a: &A,
    b: &B,
    covariates: &CovariateField,
    grid: &SpatialGrid,
    quadrature_cells: usize,
) -> Result<f64, MetricError> {
    Ok(l1_distance(a, b, quadrature_cells)? - empirical_distance(a, b, covariates, grid)?)
}

/// Log-log regression of posterior errors against sample size, with the
/// theoretical contraction exponent for comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub n_values: Vec<f64>,
    pub per_replicate: Vec<Vec<f64>>,
    pub median_errors: Vec<f64>,
    pub fitted_slope: f64,
    pub slope_stderr: f64,
    pub intercept: f64,
    pub theoretical_slope: f64,
    pub epsilon_n: Vec<f64>,
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite errors"));
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// OLS of log(median error) on log(n). Needs three distinct sizes so the
/// slope has a residual degree of freedom.
pub fn rate_regression(
    pairs: &[(f64, Vec<f64>)],
    beta: f64,
    d: usize,
) -> Result<RateReport, MetricError> {
    if pairs.len() < 3 {
        return Err(MetricError::TooFewSizes {
            needed: 3,
            got: pairs.len(),
        });
    }
    let mut n_values = Vec::with_capacity(pairs.len());
    let mut per_replicate = Vec::with_capacity(pairs.len());
    let mut median_errors = Vec::with_capacity(pairs.len());
    for (n, errors) in pairs {
        if !(n.is_finite() && *n > 0.0) || n_values.last().is_some_and(|&prev| *n <= prev) {
            return Err(MetricError::BadSampleSizes);
        }
        if errors.is_empty() {
            return Err(MetricError::EmptyReplicates);
        }
        for &e in errors {
            if e <= 0.0 || !e.is_finite() {
                return Err(MetricError::NonPositiveError(e));
            }
        }
        n_values.push(*n);
        per_replicate.push(errors.clone());
        median_errors.push(median(errors));
    }
    let x: Vec<f64> = n_values.iter().map(|n| n.ln()).collect();
    let y: Vec<f64> = median_errors.iter().map(|e| e.ln()).collect();
    let k = x.len() as f64;
    let x_bar = x.iter().sum::<f64>() / k;
    let y_bar = y.iter().sum::<f64>() / k;
    let sxx: f64 = x.iter().map(|xi| (xi - x_bar) * (xi - x_bar)).sum();
    let sxy: f64 = x
        .iter()
        .zip(&y)
        .map(|(xi, yi)| (xi - x_bar) * (yi - y_bar))
        .sum();
    let fitted_slope = sxy / sxx;
    let intercept = y_bar - fitted_slope * x_bar;
    let rss: f64 = x
        .iter()
        .zip(&y)
        .map(|(xi, yi)| {
            let r = yi - (intercept + fitted_slope * xi);
            r * r
        })
        .sum();
    let slope_stderr = (rss / (k - 2.0) / sxx).sqrt();
    let theoretical_slope = -beta / (2.0 * beta + d as f64);
    let epsilon_n = n_values.iter().map(|n| n.powf(theoretical_slope)).collect();
    Ok(RateReport {
        n_values,
        per_replicate,
        median_errors,
        fitted_slope,
        slope_stderr,
        intercept,
        theoretical_slope,
        epsilon_n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariates::build_covariates;
    use crate::grid::window_from_n;
    use crate::intensity::ConstantIntensity;
    use crate::matern::CovarianceModel;
    use crate::randfield::FieldSampler;
    use crate::streams::{rng_from_seed, stream_rng};
    use approx::assert_relative_eq;

    struct Fn1(fn(f64) -> f64);
    impl Intensity for Fn1 {
        fn dim_in(&self) -> usize {
            1
        }
        fn eval(&self, z: &[f64]) -> f64 {
            (self.0)(z[0])
        }
    }

    #[test]
    fn l1_of_constants_is_their_gap() {
        let a = ConstantIntensity::new(1, 2.0);
        let b = ConstantIntensity::new(1, 0.5);
        assert_relative_eq!(l1_distance(&a, &b, 512).unwrap(), 1.5, max_relative = 1e-12);
        assert_eq!(l1_distance(&a, &a, 512).unwrap(), 0.0);
        let a2 = ConstantIntensity::new(2, 2.0);
        let b2 = ConstantIntensity::new(2, 0.5);
        assert_relative_eq!(
            l1_distance(&a2, &b2, 128).unwrap(),
            1.5,
            max_relative = 1e-12
        );
    }

    #[test]
    fn l1_against_an_analytic_integral() {
        let ramp = Fn1(|z| z);
        let zero = ConstantIntensity::new(1, 0.0);
        let got = l1_distance(&ramp, &zero, 512).unwrap();
        assert!((got - 0.5).abs() < 1e-6, "got {got}");
    }

    #[test]
    fn l1_dimension_mismatch() {
        let a = ConstantIntensity::new(1, 1.0);
        let b = ConstantIntensity::new(2, 1.0);
        assert_eq!(
            l1_distance(&a, &b, 64).unwrap_err(),
            MetricError::DimensionMismatch(1, 2)
        );
    }

    fn window_with_covariates(seed: u64, n: f64, cells: usize) -> (SpatialGrid, CovariateField) {
        let grid = window_from_n(n, 1, cells).unwrap();
        let model = CovarianceModel::matern(0.5, 1.0).unwrap();
        let sampler = FieldSampler::new(&grid, &model).unwrap();
        let mut rng = rng_from_seed(seed);
        (
            grid.clone(),
            build_covariates(&[sampler.sample(&mut rng)]).unwrap(),
        )
    }

    #[test]
    fn empirical_distance_of_constants_ignores_covariates() {
        let (grid, field) = window_with_covariates(1, 200.0, 400);
        let a = ConstantIntensity::new(1, 3.0);
        let b = ConstantIntensity::new(1, 1.25);
        assert_relative_eq!(
            empirical_distance(&a, &b, &field, &grid).unwrap(),
            1.75,
            max_relative = 1e-12
        );
        assert_eq!(empirical_distance(&a, &a, &field, &grid).unwrap(), 0.0);
    }

    #[test]
    fn delta_is_zero_for_identical_and_constant_pairs() {
        let (grid, field) = window_with_covariates(2, 100.0, 200);
        let smooth = Fn1(|z| (z * 6.0).sin().exp());
        assert_eq!(
            delta_diagnostic(&smooth, &smooth, &field, &grid, 512).unwrap(),
            0.0
        );
        let a = ConstantIntensity::new(1, 2.0);
        let b = ConstantIntensity::new(1, 5.0);
        let delta = delta_diagnostic(&a, &b, &field, &grid, 512).unwrap();
        assert!(delta.abs() < 1e-12, "delta {delta}");
    }

    #[test]
    fn empirical_approaches_true_l1_with_window_size() {
        // The window average over an ergodic covariate converges to the cube
        // integral; medians of the gap must fall as n grows.
        let a = Fn1(|z| (2.0 * std::f64::consts::PI * z).sin().exp());
        let b = Fn1(|z| 0.5 + z);
        let model = CovarianceModel::matern(0.5, 1.0).unwrap();
        let truth = l1_distance(&a, &b, 4096).unwrap();
        let mut gaps = Vec::new();
        for &n in &[256.0f64, 1024.0, 4096.0] {
            let cells = (2.0 * n) as usize;
            let grid = window_from_n(n, 1, cells).unwrap();
            let sampler = FieldSampler::new(&grid, &model).unwrap();
            let mut reps = Vec::new();
            for rep in 0..20u64 {
                let mut rng = stream_rng(7, "metrics-test", &[n as u64, rep]);
                let field = build_covariates(&[sampler.sample(&mut rng)]).unwrap();
                let emp = empirical_distance(&a, &b, &field, &grid).unwrap();
                reps.push((emp - truth).abs());
            }
            gaps.push(median(&reps));
        }
        assert!(
            gaps[0] > gaps[1] && gaps[1] > gaps[2],
            "medians not decreasing: {gaps:?}"
        );
    }

    #[test]
    fn distances_are_symmetric_and_triangular() {
        let (grid, field) = window_with_covariates(3, 100.0, 200);
        let funcs = [
            Fn1(|z| 1.0 + z * z),
            Fn1(|z| (z * 3.0).cos().abs() + 0.1),
            Fn1(|z| (1.5 * z).exp() * 0.4),
        ];
        for i in 0..3 {
            for j in 0..3 {
                let dij = l1_distance(&funcs[i], &funcs[j], 256).unwrap();
                let dji = l1_distance(&funcs[j], &funcs[i], 256).unwrap();
                assert_relative_eq!(dij, dji, max_relative = 1e-12);
                let eij = empirical_distance(&funcs[i], &funcs[j], &field, &grid).unwrap();
                let eji = empirical_distance(&funcs[j], &funcs[i], &field, &grid).unwrap();
                assert_relative_eq!(eij, eji, max_relative = 1e-12);
                for l in 0..3 {
                    let dil = l1_distance(&funcs[i], &funcs[l], 256).unwrap();
                    let dlj = l1_distance(&funcs[l], &funcs[j], 256).unwrap();
                    assert!(dij <= dil + dlj + 1e-9);
                }
            }
        }
    }

    #[test]
    fn empirical_distance_bounded_by_sup_gap() {
        let (grid, field) = window_with_covariates(4, 100.0, 200);
        let a = Fn1(|z| (z * 2.0).exp());
        let b = Fn1(|z| 1.0 + z);
        let mut sup = 0.0f64;
        for i in 0..=2000 {
            let z = [i as f64 / 2000.0];
            sup = sup.max((a.eval(&z) - b.eval(&z)).abs());
        }
        let emp = empirical_distance(&a, &b, &field, &grid).unwrap();
        assert!(emp <= sup + 1e-12, "emp {emp} sup {sup}");
    }

    #[test]
    fn regression_recovers_an_exact_power_law() {
        let pairs: Vec<(f64, Vec<f64>)> = [128.0f64, 256.0, 512.0, 1024.0, 2048.0]
            .iter()
            .map(|&n| (n, vec![2.5 * n.powf(-1.0 / 3.0)]))
            .collect();
        let report = rate_regression(&pairs, 1.0, 1).unwrap();
        assert!((report.fitted_slope + 1.0 / 3.0).abs() < 1e-12);
        assert!(report.slope_stderr < 1e-12);
        assert_eq!(report.theoretical_slope, -1.0 / 3.0);
        assert_relative_eq!(report.epsilon_n[0], 128.0f64.powf(-1.0 / 3.0));
        assert_relative_eq!(report.intercept, 2.5f64.ln(), max_relative = 1e-9);
    }

    #[test]
    fn theoretical_slopes_from_the_contraction_exponent() {
        let pairs: Vec<(f64, Vec<f64>)> =
            [(64.0, vec![1.0]), (128.0, vec![0.8]), (256.0, vec![0.7])].to_vec();
        assert_eq!(
            rate_regression(&pairs, 1.0, 1).unwrap().theoretical_slope,
            -1.0 / 3.0
        );
        assert_eq!(
            rate_regression(&pairs, 2.0, 2).unwrap().theoretical_slope,
            -1.0 / 3.0
        );
        assert_eq!(
            rate_regression(&pairs, 2.0, 1).unwrap().theoretical_slope,
            -0.4
        );
    }

    #[test]
    fn regression_input_validation() {
        let short = vec![(64.0, vec![1.0]), (128.0, vec![0.5])];
        assert_eq!(
            rate_regression(&short, 1.0, 1).unwrap_err(),
            MetricError::TooFewSizes { needed: 3, got: 2 }
        );
        let unordered = vec![(64.0, vec![1.0]), (32.0, vec![0.5]), (128.0, vec![0.4])];
        assert_eq!(
            rate_regression(&unordered, 1.0, 1).unwrap_err(),
            MetricError::BadSampleSizes
        );
        let negative = vec![(64.0, vec![1.0]), (128.0, vec![-0.5]), (256.0, vec![0.4])];
        assert_eq!(
            rate_regression(&negative, 1.0, 1).unwrap_err(),
            MetricError::NonPositiveError(-0.5)
        );
        let empty = vec![(64.0, vec![1.0]), (128.0, vec![]), (256.0, vec![0.4])];
        assert_eq!(
            rate_regression(&empty, 1.0, 1).unwrap_err(),
            MetricError::EmptyReplicates
        );
    }

    #[test]
    fn medians_split_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(median(&[5.0]), 5.0);
    }
}
