//! Minimal inference kernel: Welch's t-test, OLS with categorical fixed
//! effects and an SSR-based joint F test, and Poisson regression by
//! iteratively reweighted least squares. Classical standard errors only.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, FisherSnedecor, Normal, StudentsT};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("input lengths disagree: {0}")]
    LengthMismatch(String),
    #[error("need more observations than design columns ({n} observations, {k} columns)")]
    TooFewObservations { n: usize, k: usize },
    #[error("column {0:?} is collinear with earlier design columns")]
    Collinear(String),
    #[error("each sample needs at least two values")]
    SampleTooSmall,
    #[error("both samples have zero variance; the t statistic is undefined")]
    ZeroVariance,
    #[error("counts must be nonnegative")]
    NegativeCounts,
    #[error("all counts are zero; the intercept diverges")]
    AllZeroCounts,
    #[error("IRLS did not converge within {iterations} iterations (gradient norm {gradient_norm:.3e})")]
    NonConvergence { iterations: u32, gradient_norm: f64 },
}

/// Welch's unequal-variance t statistic with Satterthwaite degrees of freedom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelchT {
    pub t: f64,
    pub dof: f64,
    pub p: f64,
}

pub fn welch_t(a: &[f64], b: &[f64]) -> Result<WelchT, StatsError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(StatsError::SampleTooSmall);
    }
    let (mean_a, var_a) = mean_var(a);
    let (mean_b, var_b) = mean_var(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (sa, sb) = (var_a / na, var_b / nb);
    let se = (sa + sb).sqrt();
    if se == 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    let t = (mean_a - mean_b) / se;
    let dof = (sa + sb).powi(2) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, dof).expect("positive dof");
    let p = 2.0 * (1.0 - dist.cdf(t.abs()));
    Ok(WelchT { t, dof, p })
}

fn mean_var(sample: &[f64]) -> (f64, f64) {
    let n = sample.len() as f64;
    let mean = sample.iter().sum::<f64>() / n;
    let var = sample.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// One fitted coefficient.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct CoefEstimate {
    pub term: String,
    pub estimate: f64,
    pub std_error: f64,
    pub statistic: f64,
    pub p_value: f64,
}

/// Joint restriction test (F for OLS).
#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub struct JointTest {
    pub statistic: f64,
    pub df1: f64,
    pub df2: f64,
    pub p_value: f64,
}

/// A fitted regression model.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct RegressionResult {
    pub coefficients: Vec<CoefEstimate>,
    pub n_obs: usize,
    pub r_squared: Option<f64>,
    pub adj_r_squared: Option<f64>,
    pub mcfadden_r_squared: Option<f64>,
    pub joint_test: Option<JointTest>,
    pub n_iterations: Option<u32>,
}

impl RegressionResult {
    pub fn coefficient(&self, term: &str) -> Option<&CoefEstimate> {
        self.coefficients.iter().find(|c| c.term == term)
    }
}

/// Builds the design matrix: intercept, numeric predictors, then dummies per
/// fixed effect with the lexicographically first level dropped.
fn build_design(
    n: usize,
    predictors: &[(&str, Vec<f64>)],
    fixed_effects: &[(&str, Vec<String>)],
) -> Result<(Vec<String>, DMatrix<f64>), StatsError> {
    let mut names = vec!["(intercept)".to_string()];
    let mut cols: Vec<Vec<f64>> = vec![vec![1.0; n]];
    for (name, values) in predictors {
        if values.len() != n {
            return Err(StatsError::LengthMismatch(format!(
                "predictor {name:?} has {} values for {n} observations",
                values.len()
            )));
        }
        names.push((*name).to_string());
        cols.push(values.clone());
    }
    for (factor, labels) in fixed_effects {
        if labels.len() != n {
            return Err(StatsError::LengthMismatch(format!(
                "fixed effect {factor:?} has {} labels for {n} observations",
                labels.len()
            )));
        }
        let levels: BTreeSet<&String> = labels.iter().collect();
        for level in levels.iter().skip(1) {
            names.push(format!("{factor}={level}"));
            cols.push(labels.iter().map(|l| f64::from(l == *level)).collect());
        }
    }
    let k = cols.len();
    let design = DMatrix::from_fn(n, k, |i, j| cols[j][i]);
    Ok((names, design))
}

/// Rejects rank-deficient designs, naming the first dependent column
/// (modified Gram-Schmidt residual check).
fn check_collinearity(names: &[String], design: &DMatrix<f64>) -> Result<(), StatsError> {
    let n = design.nrows();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for j in 0..design.ncols() {
        let mut col = DVector::from_fn(n, |i, _| design[(i, j)]);
        let scale = col.norm();
        for q in &basis {
            let proj = q.dot(&col);
            col -= q * proj;
        }
        if col.norm() <= 1e-10 * scale.max(1e-300) {
            return Err(StatsError::Collinear(names[j].clone()));
        }
        let norm = col.norm();
        basis.push(col / norm);
    }
    Ok(())
}

/// Least squares by QR; returns coefficients, residual sum of squares, and
/// the unscaled covariance (X'X)^{-1}.
fn solve_ls(design: &DMatrix<f64>, y: &DVector<f64>) -> (DVector<f64>, f64, DMatrix<f64>) {
    let k = design.ncols();
    let qr = design.clone().qr();
    let q = qr.q();
    let r = qr.r();
    let qty = q.transpose() * y;
    let beta = r
        .solve_upper_triangular(&qty)
        .expect("design checked full rank before solving");
    let rinv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .expect("design checked full rank before solving");
    let cov_unscaled = &rinv * rinv.transpose();
    let residuals = y - design * &beta;
    let ssr = residuals.norm_squared();
    (beta, ssr, cov_unscaled)
}

/// OLS with fixed effects, classical standard errors, adjusted R-squared, and
/// an SSR-based F test that the `joint_terms` coefficients are jointly zero.
pub fn ols_fe(
    outcome: &[f64],
    predictors: &[(&str, Vec<f64>)],
    fixed_effects: &[(&str, Vec<String>)],
    joint_terms: &[&str],
) -> Result<RegressionResult, StatsError> {
    let n = outcome.len();
    let (names, design) = build_design(n, predictors, fixed_effects)?;
    let k = design.ncols();
    if n <= k {
        return Err(StatsError::TooFewObservations { n, k });
    }
    check_collinearity(&names, &design)?;

    let y = DVector::from_column_slice(outcome);
    let (beta, ssr, cov_unscaled) = solve_ls(&design, &y);
    let df_resid = (n - k) as f64;
    let sigma2 = ssr / df_resid;
    let tdist = StudentsT::new(0.0, 1.0, df_resid).expect("positive dof");

    let coefficients = names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let estimate = beta[j];
            let std_error = (sigma2 * cov_unscaled[(j, j)]).max(0.0).sqrt();
            let statistic = if std_error > 0.0 { estimate / std_error } else { f64::NAN };
            let p_value = if statistic.is_nan() {
                f64::NAN
            } else {
                2.0 * (1.0 - tdist.cdf(statistic.abs()))
            };
            CoefEstimate { term: name.clone(), estimate, std_error, statistic, p_value }
        })
        .collect();

    let mean_y = outcome.iter().sum::<f64>() / n as f64;
    let sst: f64 = outcome.iter().map(|v| (v - mean_y).powi(2)).sum();
    let (r_squared, adj_r_squared) = if sst > 0.0 {
        let r2 = 1.0 - ssr / sst;
        let adj = 1.0 - (1.0 - r2) * (n as f64 - 1.0) / df_resid;
        (Some(r2), Some(adj))
    } else {
        (None, None)
    };

    let joint_test = if joint_terms.is_empty() {
        None
    } else {
        let kept: Vec<(&str, Vec<f64>)> = predictors
            .iter()
            .filter(|(name, _)| !joint_terms.contains(name))
            .map(|(name, v)| (*name, v.clone()))
            .collect();
        let q = (predictors.len() - kept.len()) as f64;
        if q == 0.0 {
            None
        } else {
            let (_, restricted_design) = build_design(n, &kept, fixed_effects)?;
            let (_, ssr_restricted, _) = solve_ls(&restricted_design, &y);
            let f = ((ssr_restricted - ssr) / q) / (ssr / df_resid);
            let fdist = FisherSnedecor::new(q, df_resid).expect("positive dof");
            Some(JointTest {
                statistic: f,
                df1: q,
                df2: df_resid,
                p_value: 1.0 - fdist.cdf(f.max(0.0)),
            })
        }
    };

    Ok(RegressionResult {
        coefficients,
        n_obs: n,
        r_squared,
        adj_r_squared,
        mcfadden_r_squared: None,
        joint_test,
        n_iterations: None,
    })
}

const IRLS_MAX_ITERATIONS: u32 = 100;
const IRLS_GRADIENT_TOL: f64 = 1e-8;

/// Log-link Poisson regression by IRLS with step halving, classical standard
/// errors, and McFadden's pseudo R-squared.
pub fn poisson_fit(
    counts: &[f64],
    predictors: &[(&str, Vec<f64>)],
    fixed_effects: &[(&str, Vec<String>)],
) -> Result<RegressionResult, StatsError> {
    let n = counts.len();
    if counts.iter().any(|&y| y < 0.0) {
        return Err(StatsError::NegativeCounts);
    }
    let mean_y = counts.iter().sum::<f64>() / n.max(1) as f64;
    if mean_y == 0.0 {
        return Err(StatsError::AllZeroCounts);
    }
    let (names, design) = build_design(n, predictors, fixed_effects)?;
    let k = design.ncols();
    if n <= k {
        return Err(StatsError::TooFewObservations { n, k });
    }
    check_collinearity(&names, &design)?;

    let y = DVector::from_column_slice(counts);
    let mut beta = DVector::zeros(k);
    beta[0] = mean_y.ln();

    let loglik = |beta: &DVector<f64>| -> f64 {
        let eta = (&design * beta).map(|e| e.clamp(-30.0, 30.0));
        eta.iter()
            .zip(counts)
            .map(|(&e, &yi)| yi * e - e.exp() - ln_gamma(yi + 1.0))
            .sum()
    };

    let mut ll = loglik(&beta);
    let mut converged_at = None;
    for iteration in 1..=IRLS_MAX_ITERATIONS {
        let eta = (&design * &beta).map(|e| e.clamp(-30.0, 30.0));
        let mu = eta.map(f64::exp);
        let gradient = design.transpose() * (&y - &mu);
        if gradient.norm() < IRLS_GRADIENT_TOL {
            converged_at = Some(iteration - 1);
            break;
        }
        // weighted LS on the working response z = eta + (y - mu)/mu
        let z = DVector::from_fn(n, |i, _| eta[i] + (y[i] - mu[i]) / mu[i]);
        let sqrt_w = mu.map(f64::sqrt);
        let mut wx = design.clone();
        let mut wz = z.clone();
        for i in 0..n {
            for j in 0..k {
                wx[(i, j)] *= sqrt_w[i];
            }
            wz[i] *= sqrt_w[i];
        }
        let (candidate, _, _) = solve_ls(&wx, &wz);
        // step halving keeps the log likelihood nondecreasing
        let mut step = 1.0;
        let mut next = &beta + (&candidate - &beta) * step;
        let mut next_ll = loglik(&next);
        let mut halvings = 0;
        while next_ll < ll - 1e-12 && halvings < 30 {
            step *= 0.5;
            next = &beta + (&candidate - &beta) * step;
            next_ll = loglik(&next);
            halvings += 1;
        }
        debug_assert!(next_ll >= ll - 1e-9, "IRLS step decreased the log likelihood");
        beta = next;
        ll = next_ll;
    }
    let eta = (&design * &beta).map(|e| e.clamp(-30.0, 30.0));
    let mu = eta.map(f64::exp);
    let gradient_norm = (design.transpose() * (&y - &mu)).norm();
    let Some(n_iterations) = converged_at.or_else(|| {
        (gradient_norm < IRLS_GRADIENT_TOL).then_some(IRLS_MAX_ITERATIONS)
    }) else {
        return Err(StatsError::NonConvergence {
            iterations: IRLS_MAX_ITERATIONS,
            gradient_norm,
        });
    };

    // observed information: X' diag(mu) X
    let mut wx = design.clone();
    for i in 0..n {
        let w = mu[i].sqrt();
        for j in 0..k {
            wx[(i, j)] *= w;
        }
    }
    let qr = wx.qr();
    let r = qr.r();
    let rinv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .expect("design checked full rank before solving");
    let cov = &rinv * rinv.transpose();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");

    let coefficients = names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let estimate = beta[j];
            let std_error = cov[(j, j)].max(0.0).sqrt();
            let statistic = if std_error > 0.0 { estimate / std_error } else { f64::NAN };
            let p_value = if statistic.is_nan() {
                f64::NAN
            } else {
                2.0 * (1.0 - normal.cdf(statistic.abs()))
            };
            CoefEstimate { term: name.clone(), estimate, std_error, statistic, p_value }
        })
        .collect();

    // null model: intercept only, mu = mean
    let ll_null: f64 = counts
        .iter()
        .map(|&yi| yi * mean_y.ln() - mean_y - ln_gamma(yi + 1.0))
        .sum();
    let mcfadden = if ll_null != 0.0 { Some(1.0 - ll / ll_null) } else { None };

    Ok(RegressionResult {
        coefficients,
        n_obs: n,
        r_squared: None,
        adj_r_squared: None,
        mcfadden_r_squared: mcfadden,
        joint_test: None,
        n_iterations: Some(n_iterations),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn welch_identical_samples() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let out = welch_t(&a, &a).unwrap();
        assert_eq!(out.t, 0.0);
        assert!((out.p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn welch_known_example() {
        // means 3 and 4, both variances 2.5: t = -1 exactly, Welch dof = 8
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let b = [2.0, 3.0, 4.0, 5.0, 6.0];
        let out = welch_t(&a, &b).unwrap();
        assert!((out.t - (-1.0)).abs() < 1e-12);
        assert!((out.dof - 8.0).abs() < 1e-12);
        assert!((out.p - 0.3466).abs() < 1e-3);
    }

    #[test]
    fn welch_separated_samples() {
        let a = [10.0, 10.001, 9.999, 10.0];
        let b = [0.0, 0.001, -0.001, 0.0];
        let out = welch_t(&a, &b).unwrap();
        assert!(out.t.abs() > 100.0);
        assert!(out.p < 0.001);
    }

    #[test]
    fn welch_errors() {
        assert!(matches!(welch_t(&[1.0], &[1.0, 2.0]), Err(StatsError::SampleTooSmall)));
        assert!(matches!(
            welch_t(&[2.0, 2.0, 2.0], &[3.0, 3.0]),
            Err(StatsError::ZeroVariance)
        ));
    }

    #[test]
    fn ols_recovers_exact_linear_fit() {
        let x: Vec<f64> = (0..50).map(|i| i as f64 / 10.0).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 + 3.0 * v).collect();
        let fit = ols_fe(&y, &[("x", x)], &[], &[]).unwrap();
        let intercept = fit.coefficient("(intercept)").unwrap();
        let slope = fit.coefficient("x").unwrap();
        assert!((intercept.estimate - 2.0).abs() < 1e-9);
        assert!((slope.estimate - 3.0).abs() < 1e-9);
        assert!((fit.r_squared.unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn ols_fixed_effects_absorb_group_means() {
        // y = 1*x + group offsets, noise-free
        let mut x = Vec::new();
        let mut y = Vec::new();
        let mut g = Vec::new();
        for i in 0..60 {
            let group = ["a", "b", "c"][i % 3];
            let offset = match group {
                "a" => 0.0,
                "b" => 5.0,
                _ => -2.0,
            };
            let xv = (i as f64) * 0.1;
            x.push(xv);
            y.push(offset + 1.5 * xv);
            g.push(group.to_string());
        }
        let fit = ols_fe(&y, &[("x", x)], &[("group", g)], &[]).unwrap();
        assert!((fit.coefficient("x").unwrap().estimate - 1.5).abs() < 1e-9);
        assert!((fit.coefficient("group=b").unwrap().estimate - 5.0).abs() < 1e-9);
        assert!((fit.coefficient("group=c").unwrap().estimate + 2.0).abs() < 1e-9);
    }

    #[test]
    fn ols_simulation_recovery_within_two_se() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let n = 1000;
        let churn: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let log_cores: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..3.0)).collect();
        let field: Vec<String> = (0..n).map(|i| format!("f{}", i % 5)).collect();
        let y: Vec<f64> = (0..n)
            .map(|i| {
                let fe = (i % 5) as f64 * 0.2;
                0.05 * churn[i] - 0.01 * log_cores[i]
                    + fe
                    + rng.random_range(-0.05..0.05)
            })
            .collect();
        let fit = ols_fe(
            &y,
            &[("churn", churn), ("log_cores", log_cores)],
            &[("field", field)],
            &["churn", "log_cores"],
        )
        .unwrap();
        let churn_coef = fit.coefficient("churn").unwrap();
        assert!((churn_coef.estimate - 0.05).abs() < 2.0 * churn_coef.std_error);
        let cores_coef = fit.coefficient("log_cores").unwrap();
        assert!((cores_coef.estimate + 0.01).abs() < 2.0 * cores_coef.std_error);
        let joint = fit.joint_test.unwrap();
        assert_eq!(joint.df1, 2.0);
        assert!(joint.p_value < 0.001, "strong predictors must reject the joint null");
    }

    #[test]
    fn ols_rejects_collinear_columns() {
        let x: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let x2: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let y: Vec<f64> = x.iter().map(|v| 1.0 + v).collect();
        let err = ols_fe(&y, &[("x", x), ("double_x", x2)], &[], &[]).unwrap_err();
        assert!(matches!(err, StatsError::Collinear(name) if name == "double_x"));
    }

    #[test]
    fn ols_residuals_orthogonal_to_design() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 200;
        let x1: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x2: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..10.0)).collect();
        let y: Vec<f64> = (0..n).map(|i| 1.0 + x1[i] - 0.3 * x2[i] + rng.random_range(-1.0..1.0)).collect();
        let fit = ols_fe(&y, &[("x1", x1.clone()), ("x2", x2.clone())], &[], &[]).unwrap();
        let yhat: Vec<f64> = (0..n)
            .map(|i| {
                fit.coefficient("(intercept)").unwrap().estimate
                    + fit.coefficient("x1").unwrap().estimate * x1[i]
                    + fit.coefficient("x2").unwrap().estimate * x2[i]
            })
            .collect();
        let resid: Vec<f64> = (0..n).map(|i| y[i] - yhat[i]).collect();
        let scale: f64 = y.iter().map(|v| v.abs()).fold(f64::MIN, f64::max);
        for col in [&vec![1.0; n], &x1, &x2] {
            let dot: f64 = resid.iter().zip(col).map(|(r, c)| r * c).sum();
            assert!(dot.abs() < 1e-8 * scale * n as f64);
        }
    }

    #[test]
    fn poisson_constant_model_intercept_is_log_mean() {
        let counts = [2.0, 3.0, 4.0, 5.0, 2.0, 4.0];
        let mean = counts.iter().sum::<f64>() / counts.len() as f64;
        let fit = poisson_fit(&counts, &[], &[]).unwrap();
        let intercept = fit.coefficient("(intercept)").unwrap();
        assert!((intercept.estimate - mean.ln()).abs() < 1e-6);
    }

    #[test]
    fn poisson_recovers_simulated_rates() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 2000;
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let counts: Vec<f64> = x
            .iter()
            .map(|&xv| {
                let lambda = (0.5 + 0.8 * xv).exp();
                // inverse-transform Poisson sampling
                let mut k = 0u32;
                let mut acc = (-lambda).exp();
                let mut cum = acc;
                let u: f64 = rng.random_range(0.0..1.0);
                while cum < u && k < 1000 {
                    k += 1;
                    acc *= lambda / f64::from(k);
                    cum += acc;
                }
                f64::from(k)
            })
            .collect();
        let fit = poisson_fit(&counts, &[("x", x)], &[]).unwrap();
        let slope = fit.coefficient("x").unwrap();
        assert!((slope.estimate - 0.8).abs() < 2.0 * slope.std_error, "slope {slope:?}");
        assert!(fit.mcfadden_r_squared.unwrap() > 0.0);
    }

    #[test]
    fn poisson_all_zero_counts_error() {
        let counts = [0.0, 0.0, 0.0, 0.0];
        assert!(matches!(poisson_fit(&counts, &[], &[]), Err(StatsError::AllZeroCounts)));
    }

    proptest! {
        #[test]
        fn welch_antisymmetry(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a: Vec<f64> = (0..rng.random_range(2..20)).map(|_| rng.random_range(-5.0..5.0)).collect();
            let b: Vec<f64> = (0..rng.random_range(2..20)).map(|_| rng.random_range(-5.0..5.0)).collect();
            if let (Ok(ab), Ok(ba)) = (welch_t(&a, &b), welch_t(&b, &a)) {
                prop_assert_eq!(ab.t, -ba.t);
                prop_assert_eq!(ab.dof, ba.dof);
            }
        }
    }
}
