//! Built-in experiment configurations for the documented worked models.

use crate::config::{
    AtomSpec, ExperimentConfig, MeasureSection, ModelSection, Pipeline, RunSection,
};

pub const DEFAULT_ALPHA: f64 = 0.5;
pub const IDS: [&str; 3] = ["example1", "example2", "skewbm"];

/// A named preconfigured experiment. `alpha` is the weight of the single
/// point mass at the origin and must satisfy |alpha| < 1.
pub fn builtin(id: &str, alpha: f64) -> Result<ExperimentConfig, String> {
    if !(alpha.is_finite() && alpha.abs() < 1.0) {
        return Err(format!("alpha must satisfy |alpha| < 1 (got {alpha})"));
    }
    let dirac = MeasureSection {
        atoms: vec![AtomSpec {
            location: 0.0,
            weight: alpha,
        }],
        density: None,
    };
    // Jump factor of the scale density at the origin and its reciprocal.
    let r = (1.0 - alpha) / (1.0 + alpha);
    let q = 1.0 / r;
    match id {
        // Smooth transformed coefficient: phi is chosen so that the
        // transformed equation has coefficient e^{-|y|}, and the payoff
        // becomes 1/(1+y^2) in the transformed variable.
        "example1" => Ok(ExperimentConfig {
            model: ModelSection {
                x0: 0.0,
                t: 1.0,
                phi: format!("piece x<0: exp(x); piece x>=0: {q}*exp(-{r}*x)"),
                pipeline: Pipeline::Legall,
                measure: dirac,
            },
            run: RunSection {
                n_list: vec![4, 8, 16, 32, 64],
                m: 200_000,
                seed: 42,
                n_ref: 1024,
                m_ref: 1_000_000,
            },
            payoff: format!("piece x<0: 1/(1+(1*x)^2); piece x>=0: 1/(1+({r}*x)^2)"),
            output: None,
        }),
        // Unit diffusion with a point mass: the transformed coefficient is
        // the step {1 on y<0, r on y>=0}, discontinuous at the origin.
        "example2" => Ok(ExperimentConfig {
            model: ModelSection {
                x0: 0.0,
                t: 1.0,
                phi: "piece all: 1".into(),
                pipeline: Pipeline::Legall,
                measure: dirac,
            },
            run: RunSection {
                n_list: vec![8, 32, 128, 512],
                m: 100_000,
                seed: 42,
                n_ref: 4096,
                m_ref: 100_000,
            },
            payoff: "piece all: 1/(1+(1*x)^2)".into(),
            output: None,
        }),
        // Same dynamics observed through the identity payoff, whose mean
        // has the closed form alpha * sqrt(2 t / pi).
        "skewbm" => Ok(ExperimentConfig {
            model: ModelSection {
                x0: 0.0,
                t: 1.0,
                phi: "piece all: 1".into(),
                pipeline: Pipeline::Legall,
                measure: dirac,
            },
            run: RunSection {
                n_list: vec![8, 32, 128],
                m: 50_000,
                seed: 42,
                n_ref: 1024,
                m_ref: 200_000,
            },
            payoff: "piece all: x".into(),
            output: None,
        }),
        _ => Err(format!(
            "unknown example '{id}' (expected one of {})",
            IDS.join(", ")
        )),
    }
}
