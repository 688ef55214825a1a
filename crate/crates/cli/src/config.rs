//! Experiment configuration: a TOML file describing the model, the run
//! parameters, and the payoff. Loading validates everything up front and
//! returns either a fully built [`Prepared`] experiment or the complete
//! list of failures.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use localsde::funcdsl::{PiecewiseFunction, SegmentForm};
use localsde::measure::{Atom, PiecewiseConstantDensity, Regime, SignedMeasure};
use localsde::montecarlo::{Payoff, SimModel};
use localsde::sde::EvalSide;
use localsde::transform::{
    build_basschen_pair, build_legall_pair, build_psi, density_function, CoefficientPsi,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSection,
    pub run: RunSection,
    /// Payoff in the piecewise text grammar, or the literal `"quadratic"`.
    pub payoff: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub x0: f64,
    /// Time horizon of the simulation.
    pub t: f64,
    /// Diffusion coefficient in the piecewise text grammar.
    pub phi: String,
    pub pipeline: Pipeline,
    #[serde(default)]
    pub measure: MeasureSection,
}

/// Literal form of the signed measure: point masses plus an optional
/// piecewise-constant density. Both empty means the zero measure.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSection {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub atoms: Vec<AtomSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<DensitySpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomSpec {
    pub location: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensitySpec {
    pub breakpoints: Vec<f64>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Pipeline {
    /// Scale transform normalized to 1 on the left tail.
    Legall,
    /// Companion-measure scale transform (atom weights below 1/2).
    Basschen,
    /// Direct drift form b = g * phi^2; needs an atomless measure.
    DriftAc,
}

impl fmt::Display for Pipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pipeline::Legall => "legall",
            Pipeline::Basschen => "basschen",
            Pipeline::DriftAc => "drift-ac",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    /// Step-count ladder, strictly increasing.
    pub n_list: Vec<usize>,
    /// Paths per ladder entry.
    pub m: usize,
    pub seed: u64,
    /// Reference grid steps (used when no closed form applies).
    pub n_ref: usize,
    /// Reference paths.
    pub m_ref: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directory: Option<String>,
    /// Subset of {"csv", "json"}; both when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub formats: Option<Vec<String>>,
}

impl ExperimentConfig {
    /// Canonical text form; reparsing it yields an equal config.
    pub fn render(&self) -> String {
        toml::to_string_pretty(self).expect("validated config serializes to TOML")
    }

    /// Hex SHA-256 of the canonical text form, so semantically identical
    /// configs hash identically regardless of source formatting.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.render().as_bytes());
        format!("{:x}", h.finalize())
    }

    pub fn validate(self) -> Result<Prepared, Vec<String>> {
        validate(self)
    }
}

/// The simulatable object a pipeline produces, before the start point and
/// horizon are attached.
#[derive(Debug, Clone)]
pub enum PipelineModel {
    Transformed(CoefficientPsi),
    Drift {
        sigma: PiecewiseFunction,
        drift: PiecewiseFunction,
    },
}

impl PipelineModel {
    pub fn to_sim(&self, x0: f64, horizon: f64, side: EvalSide) -> SimModel {
        match self {
            PipelineModel::Transformed(psi) => SimModel::Transformed {
                psi: psi.clone(),
                x0,
                horizon,
                side,
            },
            PipelineModel::Drift { sigma, drift } => SimModel::DriftDiffusion {
                sigma: sigma.clone(),
                drift: drift.clone(),
                x0,
                horizon,
            },
        }
    }
}

/// Builds the model for one pipeline, checking admissibility of the measure
/// for that pipeline first.
pub fn pipeline_model(
    measure: &SignedMeasure,
    phi: &PiecewiseFunction,
    pipeline: Pipeline,
) -> Result<PipelineModel, String> {
    match pipeline {
        Pipeline::Legall => {
            measure
                .require_admissible(Regime::LeGall)
                .map_err(|e| e.to_string())?;
            let pair = build_legall_pair(measure).map_err(|e| e.to_string())?;
            Ok(PipelineModel::Transformed(build_psi(phi.clone(), pair)))
        }
        Pipeline::Basschen => {
            measure
                .require_admissible(Regime::BassChen)
                .map_err(|e| e.to_string())?;
            let pair = build_basschen_pair(measure).map_err(|e| e.to_string())?;
            Ok(PipelineModel::Transformed(build_psi(phi.clone(), pair)))
        }
        Pipeline::DriftAc => {
            if !measure.is_atomless() {
                return Err(
                    "the drift-ac pipeline needs an atomless measure; atoms require a transform pipeline"
                        .into(),
                );
            }
            let g = density_function(measure.continuous());
            let drift = phi
                .try_square()
                .and_then(|sq| g.try_product(&sq))
                .map_err(|e| format!("drift g*phi^2 is not representable: {e}"))?;
            Ok(PipelineModel::Drift {
                sigma: phi.clone(),
                drift,
            })
        }
    }
}

/// A validated config with every derived object already built, so the run
/// phase cannot fail on malformed input.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub config: ExperimentConfig,
    pub measure: SignedMeasure,
    pub phi: PiecewiseFunction,
    pub payoff: Payoff,
    pub pipeline_model: PipelineModel,
    /// Transformed-coefficient view used for diagnostics; for the drift
    /// pipeline this is the scale-transform view of the same measure.
    pub diag_psi: CoefficientPsi,
    /// Hex SHA-256 of the canonical config text.
    pub hash: String,
    /// Advisory findings that do not block the run.
    pub warnings: Vec<String>,
}

impl Prepared {
    pub fn model(&self, side: EvalSide) -> SimModel {
        self.pipeline_model
            .to_sim(self.config.model.x0, self.config.model.t, side)
    }

    pub fn seed(&self) -> u64 {
        self.config.run.seed
    }

    pub fn formats(&self) -> (bool, bool) {
        match self
            .config
            .output
            .as_ref()
            .and_then(|o| o.formats.as_ref())
        {
            None => (true, true),
            Some(list) => (
                list.iter().any(|f| f == "csv"),
                list.iter().any(|f| f == "json"),
            ),
        }
    }
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, Vec<String>> {
    toml::from_str(text).map_err(|e| vec![format!("config parse error: {e}")])
}

pub fn load(path: &Path) -> Result<Prepared, Vec<String>> {
    let text = fs::read_to_string(path)
        .map_err(|e| vec![format!("cannot read config {}: {e}", path.display())])?;
    parse_config(&text)?.validate()
}

pub fn parse_payoff(text: &str) -> Result<Payoff, String> {
    if text.trim() == "quadratic" {
        return Ok(Payoff::Quadratic);
    }
    PiecewiseFunction::parse(text)
        .map(Payoff::Piecewise)
        .map_err(|e| e.to_string())
}

/// True when the function reaches zero or below at a point (an infimum of
/// zero that is only approached in a tail does not count).
fn attains_nonpositive(f: &PiecewiseFunction) -> bool {
    f.segments().any(|s| match s.form {
        SegmentForm::Constant { value } => value <= 0.0,
        SegmentForm::Exponential { scale, .. } => scale <= 0.0,
        SegmentForm::Rational1 { scale, .. } => scale <= 0.0,
        SegmentForm::Linear { intercept, slope } => {
            if slope == 0.0 {
                intercept <= 0.0
            } else if s.lower.is_finite() && s.upper.is_finite() {
                let at = |x: f64| intercept + slope * x;
                at(s.lower).min(at(s.upper)) <= 0.0
            } else {
                true
            }
        }
    })
}

fn validate(config: ExperimentConfig) -> Result<Prepared, Vec<String>> {
    let mut errors = Vec::new();
    let mut warnings = Vec::new();

    if !(config.model.t.is_finite() && config.model.t > 0.0) {
        errors.push(format!(
            "model.t must be a positive finite horizon (got {})",
            config.model.t
        ));
    }
    if !config.model.x0.is_finite() {
        errors.push(format!("model.x0 must be finite (got {})", config.model.x0));
    }

    let phi = match PiecewiseFunction::parse(&config.model.phi) {
        Ok(f) => Some(f),
        Err(e) => {
            errors.push(format!("model.phi: {e}"));
            None
        }
    };
    if let Some(f) = &phi {
        if attains_nonpositive(f) {
            warnings
                .push("model.phi takes non-positive values; the diffusion degenerates there".into());
        }
    }

    let payoff = match parse_payoff(&config.payoff) {
        Ok(p) => Some(p),
        Err(e) => {
            errors.push(format!("payoff: {e}"));
            None
        }
    };

    let density = match &config.model.measure.density {
        None => Some(PiecewiseConstantDensity::empty()),
        Some(spec) => {
            match PiecewiseConstantDensity::new(spec.breakpoints.clone(), spec.values.clone()) {
                Ok(d) => Some(d),
                Err(e) => {
                    errors.push(format!("model.measure.density: {e}"));
                    None
                }
            }
        }
    };
    let measure = density.and_then(|d| {
        let atoms = config
            .model
            .measure
            .atoms
            .iter()
            .map(|a| Atom {
                location: a.location,
                weight: a.weight,
            })
            .collect();
        match SignedMeasure::new(atoms, d) {
            Ok(m) => Some(m),
            Err(e) => {
                errors.push(format!("model.measure: {e}"));
                None
            }
        }
    });

    let built = match (&measure, &phi) {
        (Some(m), Some(f)) => match pipeline_model(m, f, config.model.pipeline) {
            Ok(pm) => {
                let diag = match &pm {
                    PipelineModel::Transformed(psi) => Some(psi.clone()),
                    PipelineModel::Drift { .. } => match build_legall_pair(m) {
                        Ok(pair) => Some(build_psi(f.clone(), pair)),
                        Err(e) => {
                            errors.push(format!("model.pipeline: {e}"));
                            None
                        }
                    },
                };
                diag.map(|d| (pm, d))
            }
            Err(e) => {
                errors.push(format!("model.pipeline ({}): {e}", config.model.pipeline));
                None
            }
        },
        _ => None,
    };

    let run = &config.run;
    if run.n_list.is_empty() {
        errors.push("run.n_list must not be empty".into());
    }
    if run.n_list.iter().any(|&n| n == 0) {
        errors.push("run.n_list entries must be at least 1".into());
    }
    if run.n_list.windows(2).any(|w| w[0] >= w[1]) {
        errors.push("run.n_list must be strictly increasing".into());
    }
    if run.m < 2 {
        errors.push(format!("run.m must be at least 2 (got {})", run.m));
    }
    if run.m_ref < 2 {
        errors.push(format!("run.m_ref must be at least 2 (got {})", run.m_ref));
    }
    if let Some(&n_max) = run.n_list.iter().max() {
        if run.n_ref <= n_max {
            errors.push(format!(
                "run.n_ref ({}) must exceed the largest ladder entry ({n_max})",
                run.n_ref
            ));
        } else if run.n_ref < 8 * n_max {
            warnings.push(format!(
                "run.n_ref ({}) is less than 8x the largest ladder entry ({n_max}); the reference bias may distort the fitted rate",
                run.n_ref
            ));
        }
    }
    if run.seed > i64::MAX as u64 {
        errors.push(format!(
            "run.seed ({}) does not fit the signed 64-bit range of the canonical text form",
            run.seed
        ));
    }

    if let Some(output) = &config.output {
        if let Some(dir) = &output.directory {
            if dir.is_empty() {
                errors.push("output.directory must not be empty when present".into());
            }
        }
        if let Some(formats) = &output.formats {
            for f in formats {
                if f != "csv" && f != "json" {
                    errors.push(format!("output.formats entry '{f}' is not 'csv' or 'json'"));
                }
            }
            if formats.is_empty() {
                warnings.push("output.formats is empty; no artifact files will be written".into());
            }
        }
    }

    if !errors.is_empty() {
        return Err(errors);
    }
    let (pipeline_model, diag_psi) = built.expect("all components validated");
    let hash = config.hash();
    Ok(Prepared {
        measure: measure.expect("validated"),
        phi: phi.expect("validated"),
        payoff: payoff.expect("validated"),
        pipeline_model,
        diag_psi,
        hash,
        warnings,
        config,
    })
}
