//! Finite signed measures made of weighted atoms plus a compactly supported
//! piecewise-constant density. The admissibility bounds on atom weights decide
//! which scale transform applies downstream.

use std::fmt;

use thiserror::Error;

/// Atoms with |weight| below this are dropped at construction.
pub const ATOM_WEIGHT_FLOOR: f64 = 1e-15;

/// Below this magnitude the log expression for [`pi_coeff`] loses digits to
/// cancellation, so a cubic Taylor polynomial is used instead.
pub const PI_SERIES_CROSSOVER: f64 = 1.0 / 1024.0;

#[derive(Debug, Error)]
pub enum MeasureError {
    #[error("atom locations must be distinct (duplicate at {0})")]
    DuplicateAtomLocation(f64),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("density breakpoints must be strictly increasing")]
    UnsortedBreakpoints,
    #[error("density needs one value per interval: {breakpoints} breakpoints, {values} values")]
    DensityShape { breakpoints: usize, values: usize },
    #[error(
        "measure is not {regime}-admissible: atom at {location} has weight {weight}, needs {requirement}"
    )]
    Inadmissible {
        regime: Regime,
        location: f64,
        weight: f64,
        requirement: &'static str,
    },
    #[error("pi coefficient is undefined for arguments >= 1/2 (got {0})")]
    PiDomain(f64),
}

/// Which transform the admissibility check is for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    LeGall,
    BassChen,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Regime::LeGall => write!(f, "legall"),
            Regime::BassChen => write!(f, "basschen"),
        }
    }
}

/// Point mass `weight` at `location`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub location: f64,
    pub weight: f64,
}

/// Piecewise-constant density with compact support. Value on `[b_j, b_{j+1})`
/// is `values[j]`; zero outside `[b_0, b_last)`. Right-continuous.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PiecewiseConstantDensity {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl PiecewiseConstantDensity {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self, MeasureError> {
        if breakpoints.iter().any(|b| !b.is_finite()) {
            return Err(MeasureError::NonFinite("density breakpoint"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(MeasureError::NonFinite("density value"));
        }
        let ok_shape = if breakpoints.is_empty() {
            values.is_empty()
        } else {
            breakpoints.len() >= 2 && values.len() + 1 == breakpoints.len()
        };
        if !ok_shape {
            return Err(MeasureError::DensityShape {
                breakpoints: breakpoints.len(),
                values: values.len(),
            });
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(MeasureError::UnsortedBreakpoints);
        }
        Ok(Self { breakpoints, values })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Density value at `x`, right-continuous, zero outside the support.
    pub fn value_at(&self, x: f64) -> f64 {
        let idx = self.breakpoints.partition_point(|b| *b <= x);
        if idx == 0 || idx == self.breakpoints.len() {
            0.0
        } else {
            self.values[idx - 1]
        }
    }

    /// Integral of the density over `(-inf, x]`.
    pub fn cumulative(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for (j, v) in self.values.iter().enumerate() {
            let lo = self.breakpoints[j];
            let hi = self.breakpoints[j + 1];
            if x <= lo {
                break;
            }
            acc += v * (x.min(hi) - lo);
        }
        acc
    }

    pub fn total_abs_mass(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(j, v)| v.abs() * (self.breakpoints[j + 1] - self.breakpoints[j]))
            .sum()
    }
}

/// One admissibility verdict: `violation` names the first offending atom.
#[derive(Debug, Clone, Copy)]
pub struct AdmissibilityReport {
    pub regime: Regime,
    pub violation: Option<AtomViolation>,
}

#[derive(Debug, Clone, Copy)]
pub struct AtomViolation {
    pub atom: Atom,
    pub bound: f64,
    pub requirement: &'static str,
}

impl AdmissibilityReport {
    pub fn is_admissible(&self) -> bool {
        self.violation.is_none()
    }
}

/// Finite signed measure: sorted atoms plus a piecewise-constant density.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedMeasure {
    atoms: Vec<Atom>,
    continuous: PiecewiseConstantDensity,
}

impl SignedMeasure {
    /// Sorts atoms by location, drops atoms below [`ATOM_WEIGHT_FLOOR`], and
    /// rejects duplicates and non-finite entries.
    pub fn new(
        atoms: Vec<Atom>,
        continuous: PiecewiseConstantDensity,
    ) -> Result<Self, MeasureError> {
        if atoms
            .iter()
            .any(|a| !a.location.is_finite() || !a.weight.is_finite())
        {
            return Err(MeasureError::NonFinite("atom"));
        }
        let mut atoms: Vec<Atom> = atoms
            .into_iter()
            .filter(|a| a.weight.abs() >= ATOM_WEIGHT_FLOOR)
            .collect();
        atoms.sort_by(|a, b| a.location.total_cmp(&b.location));
        if let Some(w) = atoms.windows(2).find(|w| w[0].location == w[1].location) {
            return Err(MeasureError::DuplicateAtomLocation(w[0].location));
        }
        Ok(Self { atoms, continuous })
    }

    pub fn zero() -> Self {
        Self {
            atoms: Vec::new(),
            continuous: PiecewiseConstantDensity::empty(),
        }
    }

    pub fn dirac(location: f64, weight: f64) -> Result<Self, MeasureError> {
        Self::new(
            vec![Atom { location, weight }],
            PiecewiseConstantDensity::empty(),
        )
    }

    pub fn from_density(continuous: PiecewiseConstantDensity) -> Self {
        Self {
            atoms: Vec::new(),
            continuous,
        }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn continuous(&self) -> &PiecewiseConstantDensity {
        &self.continuous
    }

    pub fn is_atomless(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.is_empty() && self.continuous.is_empty()
    }

    /// Mass of the single point `{x}`.
    pub fn atom_mass(&self, x: f64) -> f64 {
        self.atoms
            .binary_search_by(|a| a.location.total_cmp(&x))
            .map(|i| self.atoms[i].weight)
            .unwrap_or(0.0)
    }

    pub fn total_variation(&self) -> f64 {
        let atom_part: f64 = self.atoms.iter().map(|a| a.weight.abs()).sum();
        atom_part + self.continuous.total_abs_mass()
    }

    /// Checks every atom weight against the bound for `regime`:
    /// `|w| < 1` for Le Gall, `w < 1/2` for Bass-Chen.
    pub fn validate(&self, regime: Regime) -> AdmissibilityReport {
        let violation = self
            .atoms
            .iter()
            .find_map(|&atom| match regime {
                Regime::LeGall if atom.weight.abs() >= 1.0 => Some(AtomViolation {
                    atom,
                    bound: 1.0,
                    requirement: "|weight| < 1",
                }),
                Regime::BassChen if atom.weight >= 0.5 => Some(AtomViolation {
                    atom,
                    bound: 0.5,
                    requirement: "weight < 1/2",
                }),
                _ => None,
            });
        AdmissibilityReport { regime, violation }
    }

    pub fn require_admissible(&self, regime: Regime) -> Result<(), MeasureError> {
        match self.validate(regime).violation {
            None => Ok(()),
            Some(v) => Err(MeasureError::Inadmissible {
                regime,
                location: v.atom.location,
                weight: v.atom.weight,
                requirement: v.requirement,
            }),
        }
    }

    /// Continuous part of the cumulative, `nu_c((-inf, x])`.
    pub fn cumulative_continuous(&self, x: f64) -> f64 {
        self.continuous.cumulative(x)
    }

    /// Product of `(1 - w)/(1 + w)` over atoms with location `<= x`.
    /// Requires Le Gall admissibility so every factor is positive and finite.
    pub fn atom_product(&self, x: f64) -> Result<f64, MeasureError> {
        self.require_admissible(Regime::LeGall)?;
        Ok(self
            .atoms
            .iter()
            .take_while(|a| a.location <= x)
            .map(|a| (1.0 - a.weight) / (1.0 + a.weight))
            .product())
    }

    /// Companion measure with each atom weight `w` replaced by `pi(w) * w`;
    /// the continuous part is unchanged. Weights `>= 1/2` surface as the
    /// domain error of [`pi_coeff`].
    pub fn basschen(&self) -> Result<SignedMeasure, MeasureError> {
        let atoms = self
            .atoms
            .iter()
            .map(|a| {
                Ok(Atom {
                    location: a.location,
                    weight: pi_coeff(a.weight)? * a.weight,
                })
            })
            .collect::<Result<Vec<_>, MeasureError>>()?;
        // Locations and ordering are untouched; pi > 0 keeps weights nonzero,
        // so construct directly instead of re-normalizing through `new`.
        Ok(SignedMeasure {
            atoms,
            continuous: self.continuous.clone(),
        })
    }
}

/// `pi(x) = -log(1 - 2x) / (2x)` continued by `pi(0) = 1`, defined for
/// `x < 1/2`. Near zero the Taylor polynomial `1 + x + (4/3)x^2 + 2x^3`
/// avoids the `log1p`-style cancellation.
pub fn pi_coeff(x: f64) -> Result<f64, MeasureError> {
    if !x.is_finite() {
        return Err(MeasureError::NonFinite("pi coefficient argument"));
    }
    if x >= 0.5 {
        return Err(MeasureError::PiDomain(x));
    }
    if x.abs() < PI_SERIES_CROSSOVER {
        Ok(1.0 + x * (1.0 + x * (4.0 / 3.0 + x * 2.0)))
    } else {
        Ok(-(1.0 - 2.0 * x).ln() / (2.0 * x))
    }
}
