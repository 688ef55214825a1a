//! Euler-Maruyama path engine with reproducible, parallel-safe randomness.
//!
//! Every path draws from its own counter-derived ChaCha stream, so the same
//! (seed, domain, path index) always reproduces the same increments no matter
//! how paths are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use thiserror::Error;

use crate::funcdsl::PiecewiseFunction;
use crate::transform::{CoefficientPsi, TransformPair};

/// Path indices must fit in 32 bits; the stream id packs (domain, path).
pub const MAX_PATHS: u64 = 1 << 32;

#[derive(Debug, Error)]
pub enum SdeError {
    #[error("grid must have a positive finite horizon and at least one step")]
    InvalidGrid,
    #[error("expected {expected} increments, got {got}")]
    IncrementsLength { expected: usize, got: usize },
    #[error("state became non-finite at step {step}")]
    NonFinite { step: usize },
}

/// Uniform time grid on `[0, horizon]` with `steps` steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathGrid {
    horizon: f64,
    steps: usize,
}

impl PathGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self, SdeError> {
        if !(horizon.is_finite() && horizon > 0.0) || steps == 0 {
            return Err(SdeError::InvalidGrid);
        }
        Ok(Self { horizon, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// Grid times `0 = t_0 < ... < t_n`; the last one is exactly the horizon.
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        let dt = self.dt();
        (0..=self.steps).map(move |k| {
            if k == self.steps {
                self.horizon
            } else {
                k as f64 * dt
            }
        })
    }
}

/// Master seed plus a domain tag. Independent estimation jobs under one seed
/// take distinct domains; within a job, path `p` reads stream
/// `(domain << 32) | p` of the ChaCha generator seeded by the master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngSpec {
    seed: u64,
    domain: u32,
}

impl RngSpec {
    pub fn new(seed: u64) -> Self {
        Self { seed, domain: 0 }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn domain(&self) -> u32 {
        self.domain
    }

    /// Same seed, different domain: an independent family of path streams.
    pub fn subdomain(&self, domain: u32) -> Self {
        Self {
            seed: self.seed,
            domain,
        }
    }

    pub fn stream(&self, path: u64) -> ChaCha8Rng {
        assert!(path < MAX_PATHS, "path index must fit in 32 bits");
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(((self.domain as u64) << 32) | path);
        rng
    }
}

/// Scheme state: current value after `step` steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerState {
    pub value: f64,
    pub step: usize,
}

/// Which one-sided value of a discontinuous coefficient the scheme reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EvalSide {
    #[default]
    Right,
    Left,
}

/// The Brownian increments of one path, `sqrt(dt) * z_k`.
pub fn brownian_increments(grid: &PathGrid, rng: &RngSpec, path: u64) -> Vec<f64> {
    let mut stream = rng.stream(path);
    let scale = grid.dt().sqrt();
    (0..grid.steps())
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut stream);
            scale * z
        })
        .collect()
}

fn psi_at(psi: &CoefficientPsi, y: f64, side: EvalSide) -> f64 {
    match side {
        EvalSide::Right => psi.eval(y),
        EvalSide::Left => psi.eval_left(y),
    }
}

/// Driftless Euler step loop: `y_{k+1} = y_k + psi(y_k) dB_k`, coefficient
/// frozen at the left endpoint of each step. Returns the terminal value.
pub fn euler_diffusion_terminal(
    psi: &CoefficientPsi,
    y0: f64,
    grid: &PathGrid,
    increments: &[f64],
    side: EvalSide,
) -> Result<f64, SdeError> {
    if increments.len() != grid.steps() {
        return Err(SdeError::IncrementsLength {
            expected: grid.steps(),
            got: increments.len(),
        });
    }
    let mut state = EulerState { value: y0, step: 0 };
    for &db in increments {
        state.value += psi_at(psi, state.value, side) * db;
        state.step += 1;
        if !state.value.is_finite() {
            return Err(SdeError::NonFinite { step: state.step });
        }
    }
    Ok(state.value)
}

/// Full path of the driftless scheme, `steps + 1` values starting at `y0`.
pub fn euler_diffusion_path(
    psi: &CoefficientPsi,
    y0: f64,
    grid: &PathGrid,
    increments: &[f64],
    side: EvalSide,
) -> Result<Vec<f64>, SdeError> {
    if increments.len() != grid.steps() {
        return Err(SdeError::IncrementsLength {
            expected: grid.steps(),
            got: increments.len(),
        });
    }
    let mut out = Vec::with_capacity(grid.steps() + 1);
    let mut state = EulerState { value: y0, step: 0 };
    out.push(state.value);
    for &db in increments {
        state.value += psi_at(psi, state.value, side) * db;
        state.step += 1;
        if !state.value.is_finite() {
            return Err(SdeError::NonFinite { step: state.step });
        }
        out.push(state.value);
    }
    Ok(out)
}

/// Same arithmetic as [`euler_diffusion_terminal`] with the increments drawn
/// on the fly; avoids materializing them.
pub fn euler_diffusion_terminal_streamed(
    psi: &CoefficientPsi,
    y0: f64,
    grid: &PathGrid,
    stream: &mut ChaCha8Rng,
    side: EvalSide,
) -> Result<f64, SdeError> {
    let scale = grid.dt().sqrt();
    let mut state = EulerState { value: y0, step: 0 };
    for _ in 0..grid.steps() {
        let z: f64 = StandardNormal.sample(stream);
        state.value += psi_at(psi, state.value, side) * (scale * z);
        state.step += 1;
        if !state.value.is_finite() {
            return Err(SdeError::NonFinite { step: state.step });
        }
    }
    Ok(state.value)
}

/// Euler scheme with drift: `x_{k+1} = x_k + drift(x_k) dt + sigma(x_k) dB_k`.
pub fn euler_drift_diffusion_terminal(
    sigma: &PiecewiseFunction,
    drift: &PiecewiseFunction,
    x0: f64,
    grid: &PathGrid,
    increments: &[f64],
) -> Result<f64, SdeError> {
    if increments.len() != grid.steps() {
        return Err(SdeError::IncrementsLength {
            expected: grid.steps(),
            got: increments.len(),
        });
    }
    let dt = grid.dt();
    let mut state = EulerState { value: x0, step: 0 };
    for &db in increments {
        state.value += drift.eval(state.value) * dt + sigma.eval(state.value) * db;
        state.step += 1;
        if !state.value.is_finite() {
            return Err(SdeError::NonFinite { step: state.step });
        }
    }
    Ok(state.value)
}

/// Streamed twin of [`euler_drift_diffusion_terminal`].
pub fn euler_drift_diffusion_terminal_streamed(
    sigma: &PiecewiseFunction,
    drift: &PiecewiseFunction,
    x0: f64,
    grid: &PathGrid,
    stream: &mut ChaCha8Rng,
) -> Result<f64, SdeError> {
    let dt = grid.dt();
    let scale = dt.sqrt();
    let mut state = EulerState { value: x0, step: 0 };
    for _ in 0..grid.steps() {
        let z: f64 = StandardNormal.sample(stream);
        state.value += drift.eval(state.value) * dt + sigma.eval(state.value) * (scale * z);
        state.step += 1;
        if !state.value.is_finite() {
            return Err(SdeError::NonFinite { step: state.step });
        }
    }
    Ok(state.value)
}

/// Terminal value of the original equation: map the start point, run the
/// driftless scheme in the transformed variable, map back.
pub fn simulate_x_terminal(
    pair: &TransformPair,
    psi: &CoefficientPsi,
    x0: f64,
    grid: &PathGrid,
    rng: &RngSpec,
    path: u64,
    side: EvalSide,
) -> Result<f64, SdeError> {
    let y0 = pair.map(x0);
    let mut stream = rng.stream(path);
    let y_t = euler_diffusion_terminal_streamed(psi, y0, grid, &mut stream, side)?;
    let x = pair.inverse(y_t);
    if !x.is_finite() {
        return Err(SdeError::NonFinite { step: grid.steps() });
    }
    Ok(x)
}

/// Runs `paths` independent path simulations, possibly in parallel, and
/// returns the terminal values in path order. The output is identical for
/// any thread count because each path's randomness depends only on its index.
pub fn run_paths<F>(paths: usize, body: F) -> Result<Vec<f64>, SdeError>
where
    F: Fn(u64) -> Result<f64, SdeError> + Sync + Send,
{
    (0..paths as u64)
        .into_par_iter()
        .map(body)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcdsl::PiecewiseFunction;
    use crate::measure::SignedMeasure;
    use crate::transform::{build_legall_pair, build_psi};
    use approx::assert_relative_eq;

    fn step_psi(alpha: f64) -> CoefficientPsi {
        let pair = build_legall_pair(&SignedMeasure::dirac(0.0, alpha).unwrap()).unwrap();
        build_psi(PiecewiseFunction::constant(1.0), pair)
    }

    #[test]
    fn grid_validation_and_times() {
        assert!(PathGrid::new(0.0, 4).is_err());
        assert!(PathGrid::new(1.0, 0).is_err());
        assert!(PathGrid::new(f64::NAN, 4).is_err());
        let g = PathGrid::new(1.0, 3).unwrap();
        let times: Vec<f64> = g.times().collect();
        assert_eq!(times.len(), 4);
        assert_eq!(times[0], 0.0);
        assert_eq!(*times.last().unwrap(), 1.0);
        assert_relative_eq!(g.dt(), 1.0 / 3.0);
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let rng = RngSpec::new(7);
        let g = PathGrid::new(1.0, 16).unwrap();
        let a = brownian_increments(&g, &rng, 3);
        let b = brownian_increments(&g, &rng, 3);
        assert_eq!(a, b);
        let c = brownian_increments(&g, &rng, 4);
        assert_ne!(a, c);
        let d = brownian_increments(&g, &rng.subdomain(1), 3);
        assert_ne!(a, d);
        // a shorter grid reads a prefix of the same stream
        let g8 = PathGrid::new(1.0, 8).unwrap();
        let e = brownian_increments(&g8, &rng, 3);
        let rescale = (g8.dt() / g.dt()).sqrt();
        for k in 0..8 {
            assert_relative_eq!(e[k], a[k] * rescale, max_relative = 1e-15);
        }
    }

    #[test]
    fn streamed_and_increment_paths_agree_bitwise() {
        let psi = step_psi(0.5);
        let grid = PathGrid::new(1.0, 64).unwrap();
        let rng = RngSpec::new(2024);
        for path in 0..16 {
            let increments = brownian_increments(&grid, &rng, path);
            let a = euler_diffusion_terminal(&psi, 0.3, &grid, &increments, EvalSide::Right)
                .unwrap();
            let mut stream = rng.stream(path);
            let b =
                euler_diffusion_terminal_streamed(&psi, 0.3, &grid, &mut stream, EvalSide::Right)
                    .unwrap();
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn path_output_matches_terminal() {
        let psi = step_psi(0.25);
        let grid = PathGrid::new(1.0, 32).unwrap();
        let rng = RngSpec::new(5);
        let increments = brownian_increments(&grid, &rng, 0);
        let path = euler_diffusion_path(&psi, 0.0, &grid, &increments, EvalSide::Right).unwrap();
        let terminal =
            euler_diffusion_terminal(&psi, 0.0, &grid, &increments, EvalSide::Right).unwrap();
        assert_eq!(path.len(), 33);
        assert_eq!(path[0], 0.0);
        assert_eq!(*path.last().unwrap(), terminal);
    }

    #[test]
    fn increments_length_is_checked() {
        let psi = step_psi(0.5);
        let grid = PathGrid::new(1.0, 8).unwrap();
        let err = euler_diffusion_terminal(&psi, 0.0, &grid, &[0.1; 7], EvalSide::Right)
            .unwrap_err();
        assert!(matches!(err, SdeError::IncrementsLength { .. }));
    }

    #[test]
    fn transformed_terminal_is_the_mapped_driftless_terminal() {
        // for the unit-phi step model, x = 3y on y >= 0 and x = y below
        let alpha = 0.5;
        let m = SignedMeasure::dirac(0.0, alpha).unwrap();
        let pair = build_legall_pair(&m).unwrap();
        let psi = build_psi(PiecewiseFunction::constant(1.0), pair.clone());
        let grid = PathGrid::new(1.0, 128).unwrap();
        let rng = RngSpec::new(99);
        for path in 0..32 {
            let x = simulate_x_terminal(&pair, &psi, 0.0, &grid, &rng, path, EvalSide::Right)
                .unwrap();
            let mut stream = rng.stream(path);
            let y =
                euler_diffusion_terminal_streamed(&psi, 0.0, &grid, &mut stream, EvalSide::Right)
                    .unwrap();
            let expected = if y >= 0.0 { y / ((1.0 - alpha) / (1.0 + alpha)) } else { y };
            assert_relative_eq!(x, expected, max_relative = 1e-13);
        }
    }

    #[test]
    fn left_side_evaluation_differs_at_the_jump() {
        let psi = step_psi(0.5);
        let grid = PathGrid::new(1.0, 1).unwrap();
        // with one step from y0 = 0 the coefficient at the jump decides
        let increments = [0.5];
        let right =
            euler_diffusion_terminal(&psi, 0.0, &grid, &increments, EvalSide::Right).unwrap();
        let left =
            euler_diffusion_terminal(&psi, 0.0, &grid, &increments, EvalSide::Left).unwrap();
        assert_relative_eq!(right, 0.5 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(left, 0.5, max_relative = 1e-15);
    }

    #[test]
    fn drift_diffusion_scheme_runs_the_expected_recursion() {
        let sigma = PiecewiseFunction::constant(2.0);
        let drift = PiecewiseFunction::parse("piece all: 0 + 1*x").unwrap();
        let grid = PathGrid::new(1.0, 4).unwrap();
        let increments = [0.1, -0.2, 0.3, 0.0];
        let got =
            euler_drift_diffusion_terminal(&sigma, &drift, 1.0, &grid, &increments).unwrap();
        let dt = grid.dt();
        let mut x = 1.0;
        for &db in &increments {
            x += x * dt + 2.0 * db;
        }
        assert_eq!(got, x);
    }

    #[test]
    fn non_finite_states_are_reported() {
        let pair = build_legall_pair(&SignedMeasure::zero()).unwrap();
        let psi = build_psi(PiecewiseFunction::constant(1.0), pair);
        let grid = PathGrid::new(1.0, 2).unwrap();
        let err = euler_diffusion_terminal(&psi, 0.0, &grid, &[f64::MAX, f64::MAX], EvalSide::Right);
        assert!(matches!(err, Err(SdeError::NonFinite { step: 2 })));
    }

    #[test]
    fn run_paths_is_order_stable() {
        let psi = step_psi(0.5);
        let grid = PathGrid::new(1.0, 16).unwrap();
        let rng = RngSpec::new(31);
        let body = |p: u64| {
            let mut stream = rng.stream(p);
            euler_diffusion_terminal_streamed(&psi, 0.0, &grid, &mut stream, EvalSide::Right)
        };
        let parallel = run_paths(64, body).unwrap();
        let sequential: Vec<f64> = (0..64).map(|p| body(p).unwrap()).collect();
        assert_eq!(parallel, sequential);
    }
}
