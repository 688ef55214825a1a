//! Monte Carlo estimation of terminal-value functionals and measurement of
//! the weak convergence rate of the Euler scheme.
//!
//! A [`SimModel`] bundles everything needed to simulate one terminal value.
//! [`weak_error_curve`] estimates `E g(X_T)` on a ladder of step counts
//! against a reference value, and [`fit_rate`] regresses the log errors to
//! recover the empirical order. Sample reductions go through deterministic
//! pairwise summation so results do not depend on thread scheduling.

use statrs::distribution::{ContinuousCDF, Normal, StudentsT};
use thiserror::Error;

use crate::funcdsl::{PiecewiseFunction, SegmentForm};
use crate::sde::{
    euler_drift_diffusion_terminal_streamed, run_paths, simulate_x_terminal, EvalSide, PathGrid,
    RngSpec, SdeError,
};
use crate::transform::CoefficientPsi;

/// Stream domain used for reference (fine grid) simulations.
pub const DOMAIN_REFERENCE: u32 = 0;
/// Stream domain of the first ladder entry; entry `i` uses `BASE + i`.
pub const DOMAIN_LADDER_BASE: u32 = 1;

#[derive(Debug, Error)]
pub enum McError {
    #[error(transparent)]
    Sde(#[from] SdeError),
    #[error("need at least two paths, got {0}")]
    TooFewPaths(usize),
    #[error("rate fit needs at least three usable points, got {usable}")]
    InsufficientPoints { usable: usize },
    #[error("step ladder must be nonempty with strictly increasing distinct steps")]
    BadLadder,
}

/// Order-stable numerical helpers shared by the estimators.
pub mod stats {
    /// Pairwise summation; deterministic and accurate to O(log n) rounding.
    pub fn pairwise_sum(xs: &[f64]) -> f64 {
        if xs.len() <= 32 {
            xs.iter().sum()
        } else {
            let mid = xs.len() / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }

    pub fn mean(xs: &[f64]) -> f64 {
        assert!(!xs.is_empty(), "mean of empty sample");
        pairwise_sum(xs) / xs.len() as f64
    }

    /// Unbiased sample variance, two-pass.
    pub fn sample_variance(xs: &[f64]) -> f64 {
        assert!(xs.len() >= 2, "variance needs at least two samples");
        let m = mean(xs);
        let sq: Vec<f64> = xs.iter().map(|&x| (x - m) * (x - m)).collect();
        pairwise_sum(&sq) / (xs.len() - 1) as f64
    }

    pub fn mean_and_standard_error(xs: &[f64]) -> (f64, f64) {
        let m = mean(xs);
        let se = (sample_variance(xs) / xs.len() as f64).sqrt();
        (m, se)
    }
}

/// Terminal payoff `g`. Most payoffs are piecewise functions in the text
/// grammar; the square is built in because it is not representable there.
#[derive(Debug, Clone)]
pub enum Payoff {
    Piecewise(PiecewiseFunction),
    Quadratic,
}

impl Payoff {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Payoff::Piecewise(f) => f.eval(x),
            Payoff::Quadratic => x * x,
        }
    }

    /// `E g(Z)` for `Z ~ N(mean, sd^2)` in closed form, when every segment
    /// admits one. Returns `None` if any segment does not.
    pub fn gaussian_expectation(&self, mean: f64, sd: f64) -> Option<f64> {
        assert!(sd >= 0.0, "standard deviation must be nonnegative");
        if sd == 0.0 {
            return Some(self.eval(mean));
        }
        let f = match self {
            Payoff::Quadratic => return Some(mean * mean + sd * sd),
            Payoff::Piecewise(f) => f,
        };
        let n01 = Normal::new(0.0, 1.0).unwrap();
        let cdf = |t: f64| {
            if t == f64::NEG_INFINITY {
                0.0
            } else if t == f64::INFINITY {
                1.0
            } else {
                n01.cdf(t)
            }
        };
        let pdf = |t: f64| {
            if t.is_finite() {
                (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt()
            } else {
                0.0
            }
        };
        let mut total = 0.0;
        for seg in f.segments() {
            let a = (seg.lower - mean) / sd;
            let b = (seg.upper - mean) / sd;
            let dphi = cdf(b) - cdf(a);
            total += match seg.form {
                SegmentForm::Constant { value } => value * dphi,
                SegmentForm::Linear { intercept, slope } => {
                    intercept * dphi + slope * (mean * dphi + sd * (pdf(a) - pdf(b)))
                }
                SegmentForm::Exponential {
                    scale,
                    offset,
                    rate,
                } => {
                    scale
                        * (offset + rate * mean + 0.5 * rate * rate * sd * sd).exp()
                        * (cdf(b - rate * sd) - cdf(a - rate * sd))
                }
                SegmentForm::Rational1 { .. } => return None,
            };
        }
        Some(total)
    }
}

/// A simulatable terminal value: either the transformed driftless pipeline
/// mapped back to the original variable, or a plain drift-diffusion scheme.
#[derive(Debug, Clone)]
pub enum SimModel {
    Transformed {
        psi: CoefficientPsi,
        x0: f64,
        horizon: f64,
        side: EvalSide,
    },
    DriftDiffusion {
        sigma: PiecewiseFunction,
        drift: PiecewiseFunction,
        x0: f64,
        horizon: f64,
    },
}

fn constant_value(f: &PiecewiseFunction) -> Option<f64> {
    if f.breakpoints().is_empty() {
        if let SegmentForm::Constant { value } = f.forms()[0] {
            return Some(value);
        }
    }
    None
}

impl SimModel {
    pub fn horizon(&self) -> f64 {
        match self {
            SimModel::Transformed { horizon, .. } => *horizon,
            SimModel::DriftDiffusion { horizon, .. } => *horizon,
        }
    }

    pub fn initial(&self) -> f64 {
        match self {
            SimModel::Transformed { x0, .. } => *x0,
            SimModel::DriftDiffusion { x0, .. } => *x0,
        }
    }

    /// One simulated terminal value on `grid` using the path's own stream.
    pub fn terminal(&self, grid: &PathGrid, rng: &RngSpec, path: u64) -> Result<f64, SdeError> {
        debug_assert_eq!(grid.horizon(), self.horizon());
        match self {
            SimModel::Transformed { psi, x0, side, .. } => {
                simulate_x_terminal(psi.pair(), psi, *x0, grid, rng, path, *side)
            }
            SimModel::DriftDiffusion {
                sigma, drift, x0, ..
            } => {
                let mut stream = rng.stream(path);
                euler_drift_diffusion_terminal_streamed(sigma, drift, *x0, grid, &mut stream)
            }
        }
    }

    /// `(mean, sd)` of the exact terminal law when the model reduces to
    /// constant coefficients, where the Euler scheme is also exact.
    pub fn gaussian_terminal_law(&self) -> Option<(f64, f64)> {
        match self {
            SimModel::Transformed {
                psi, x0, horizon, ..
            } => {
                let p = constant_value(psi.phi())?;
                constant_value(psi.pair().density())?;
                Some((*x0, p.abs() * horizon.sqrt()))
            }
            SimModel::DriftDiffusion {
                sigma,
                drift,
                x0,
                horizon,
            } => {
                let s = constant_value(sigma)?;
                let b = constant_value(drift)?;
                Some((x0 + b * horizon, s.abs() * horizon.sqrt()))
            }
        }
    }
}

/// Terminal values of `paths` independent paths on a `steps`-step grid,
/// in path order.
pub fn terminal_samples(
    model: &SimModel,
    steps: usize,
    paths: usize,
    rng: &RngSpec,
) -> Result<Vec<f64>, McError> {
    let grid = PathGrid::new(model.horizon(), steps)?;
    run_paths(paths, |p| model.terminal(&grid, rng, p)).map_err(McError::from)
}

/// Monte Carlo estimate of `E g(X_T^n)` for one step count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakErrorEstimate {
    pub steps: usize,
    pub paths: usize,
    pub mean: f64,
    pub std_error: f64,
}

pub fn estimate_payoff(
    model: &SimModel,
    payoff: &Payoff,
    steps: usize,
    paths: usize,
    rng: &RngSpec,
) -> Result<WeakErrorEstimate, McError> {
    if paths < 2 {
        return Err(McError::TooFewPaths(paths));
    }
    let samples = terminal_samples(model, steps, paths, rng)?;
    let values: Vec<f64> = samples.iter().map(|&x| payoff.eval(x)).collect();
    let (mean, std_error) = stats::mean_and_standard_error(&values);
    Ok(WeakErrorEstimate {
        steps,
        paths,
        mean,
        std_error,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefMethod {
    /// Exact expectation of the terminal law.
    ClosedForm,
    /// Fine-grid Monte Carlo estimate.
    FineGrid { steps: usize, paths: usize },
}

/// The value the ladder estimates are compared against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceValue {
    pub value: f64,
    pub std_error: f64,
    pub method: RefMethod,
}

/// Closed form when the model and payoff admit one, otherwise a fine-grid
/// estimate in the dedicated reference stream domain.
pub fn reference_value(
    model: &SimModel,
    payoff: &Payoff,
    ref_steps: usize,
    ref_paths: usize,
    rng: &RngSpec,
) -> Result<ReferenceValue, McError> {
    if let Some((mean, sd)) = model.gaussian_terminal_law() {
        if let Some(value) = payoff.gaussian_expectation(mean, sd) {
            return Ok(ReferenceValue {
                value,
                std_error: 0.0,
                method: RefMethod::ClosedForm,
            });
        }
    }
    let est = estimate_payoff(
        model,
        payoff,
        ref_steps,
        ref_paths,
        &rng.subdomain(DOMAIN_REFERENCE),
    )?;
    Ok(ReferenceValue {
        value: est.mean,
        std_error: est.std_error,
        method: RefMethod::FineGrid {
            steps: ref_steps,
            paths: ref_paths,
        },
    })
}

/// One ladder entry of the weak error curve. `excluded` marks points whose
/// error is statistically indistinguishable from zero (within two joint
/// standard errors); the rate fit skips them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub steps: usize,
    pub dt: f64,
    pub estimate: f64,
    pub std_error: f64,
    pub abs_error: f64,
    pub joint_se: f64,
    pub excluded: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeakErrorCurve {
    pub points: Vec<CurvePoint>,
    pub reference: ReferenceValue,
}

/// Assembles curve points from precomputed estimates.
pub fn curve_from_estimates(
    estimates: &[WeakErrorEstimate],
    horizon: f64,
    reference: ReferenceValue,
) -> WeakErrorCurve {
    let points = estimates
        .iter()
        .map(|e| {
            let dt = horizon / e.steps as f64;
            let abs_error = (e.mean - reference.value).abs();
            let joint_se = (e.std_error * e.std_error
                + reference.std_error * reference.std_error)
                .sqrt();
            CurvePoint {
                steps: e.steps,
                dt,
                estimate: e.mean,
                std_error: e.std_error,
                abs_error,
                joint_se,
                excluded: abs_error <= 2.0 * joint_se,
            }
        })
        .collect();
    WeakErrorCurve { points, reference }
}

/// Runs the ladder. Entry `i` simulates in stream domain `LADDER_BASE + i`,
/// so every entry and the reference draw independent randomness from one
/// master seed.
pub fn weak_error_curve(
    model: &SimModel,
    payoff: &Payoff,
    step_ladder: &[usize],
    paths: usize,
    rng: &RngSpec,
    reference: ReferenceValue,
) -> Result<WeakErrorCurve, McError> {
    if step_ladder.is_empty() || step_ladder.windows(2).any(|w| w[0] >= w[1]) {
        return Err(McError::BadLadder);
    }
    let mut estimates = Vec::with_capacity(step_ladder.len());
    for (i, &steps) in step_ladder.iter().enumerate() {
        estimates.push(estimate_payoff(
            model,
            payoff,
            steps,
            paths,
            &rng.subdomain(DOMAIN_LADDER_BASE + i as u32),
        )?);
    }
    Ok(curve_from_estimates(&estimates, model.horizon(), reference))
}

/// Least-squares fit of `log |error| = log c + gamma log dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub gamma_hat: f64,
    pub log_c_hat: f64,
    pub r_squared: f64,
    /// Half-width of the 95% confidence interval for `gamma_hat`.
    pub gamma_half_width: f64,
    pub points_used: usize,
}

pub fn fit_rate(curve: &WeakErrorCurve) -> Result<RateFit, McError> {
    let pts: Vec<(f64, f64)> = curve
        .points
        .iter()
        .filter(|p| !p.excluded && p.abs_error > 0.0 && p.abs_error.is_finite())
        .map(|p| (p.dt.ln(), p.abs_error.ln()))
        .collect();
    let k = pts.len();
    if k < 3 {
        return Err(McError::InsufficientPoints { usable: k });
    }
    let xbar = pts.iter().map(|p| p.0).sum::<f64>() / k as f64;
    let ybar = pts.iter().map(|p| p.1).sum::<f64>() / k as f64;
    let sxx: f64 = pts.iter().map(|p| (p.0 - xbar) * (p.0 - xbar)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - xbar) * (p.1 - ybar)).sum();
    let tss: f64 = pts.iter().map(|p| (p.1 - ybar) * (p.1 - ybar)).sum();
    if sxx == 0.0 {
        return Err(McError::BadLadder);
    }
    let gamma_hat = sxy / sxx;
    let log_c_hat = ybar - gamma_hat * xbar;
    let rss = (tss - gamma_hat * sxy).max(0.0);
    let r_squared = if tss > 0.0 { 1.0 - rss / tss } else { 1.0 };
    let df = (k - 2) as f64;
    let se_slope = (rss / df / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, df).unwrap().inverse_cdf(0.975);
    Ok(RateFit {
        gamma_hat,
        log_c_hat,
        r_squared,
        gamma_half_width: t * se_slope,
        points_used: k,
    })
}

/// Two-sample Kolmogorov-Smirnov statistic. Equal values are consumed from
/// both sides before the running maximum is updated, so ties never inflate
/// the distance.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    assert!(!a.is_empty() && !b.is_empty(), "ks_distance needs samples");
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let m = y.len() as f64;
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < x.len() && j < y.len() {
        let t = if x[i] <= y[j] { x[i] } else { y[j] };
        while i < x.len() && x[i] == t {
            i += 1;
        }
        while j < y.len() && y[j] == t {
            j += 1;
        }
        let diff = (i as f64 / n - j as f64 / m).abs();
        if diff > d {
            d = diff;
        }
    }
    d
}

/// Large-sample two-sided critical value `c(alpha) sqrt((n + m) / (n m))`.
pub fn ks_critical(alpha: f64, n: usize, m: usize) -> f64 {
    assert!(alpha > 0.0 && alpha < 1.0, "alpha must be in (0, 1)");
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    c * (((n + m) as f64) / (n as f64 * m as f64)).sqrt()
}
