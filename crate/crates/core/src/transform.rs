//! Scale transforms that remove the local-time drift.
//!
//! For an admissible measure the scale density is
//! `exp(-2 * cumulative_continuous(x)) * product of per-atom jump factors`,
//! with factor `(1 - w)/(1 + w)` in the Le Gall regime and `exp(-2 pi(w) w)`
//! (which collapses to `1 - 2w`) in the Bass-Chen regime. Integrating the
//! density from 0 gives a strictly increasing map; the image process of a
//! solution is driftless with coefficient `psi = (phi * density) o inverse`.

use thiserror::Error;

use crate::funcdsl::{merge_breakpoints, PiecewiseFunction, SegmentForm};
use crate::measure::{MeasureError, PiecewiseConstantDensity, Regime, SignedMeasure};

/// Relative tolerance for deciding that the two one-sided limits of psi at a
/// candidate point differ; absorbs the roundoff of composing evaluations.
pub const PSI_JUMP_REL_TOL: f64 = 1e-12;

/// Relative tolerance for the jump-identity and log-slope verifications.
pub const JUMP_RATIO_REL_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum TransformError {
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error("scale density must stay positive; its infimum is {infimum}")]
    NonPositiveDensity { infimum: f64 },
    #[error("pair densities must use only constant and exponential segment forms")]
    UnsupportedDensityForm,
}

/// A strictly increasing map together with its density, supporting exact
/// evaluation and inversion per segment. `map(0) = 0`.
#[derive(Debug, Clone)]
pub struct TransformPair {
    density: PiecewiseFunction,
    values: Vec<f64>,
}

impl TransformPair {
    pub fn density(&self) -> &PiecewiseFunction {
        &self.density
    }

    pub fn breakpoints(&self) -> &[f64] {
        self.density.breakpoints()
    }

    /// Map value at each breakpoint, in order.
    pub fn map_values(&self) -> &[f64] {
        &self.values
    }

    /// Left limit of the density.
    pub fn density_left(&self, x: f64) -> f64 {
        self.density.eval_left(x)
    }

    pub fn map(&self, x: f64) -> f64 {
        let bps = self.density.breakpoints();
        let i = bps.partition_point(|b| *b <= x);
        let (anchor_x, anchor_v) = self.anchor(i, bps);
        anchor_v + segment_integral(&self.density.forms()[i], anchor_x, x)
    }

    pub fn inverse(&self, y: f64) -> f64 {
        let bps = self.density.breakpoints();
        let i = self.values.partition_point(|v| *v <= y);
        let (anchor_x, anchor_v) = self.anchor(i, bps);
        segment_invert(&self.density.forms()[i], anchor_x, anchor_v, y)
    }

    fn anchor(&self, i: usize, bps: &[f64]) -> (f64, f64) {
        if bps.is_empty() {
            (0.0, 0.0)
        } else if i == 0 {
            (bps[0], self.values[0])
        } else {
            (bps[i - 1], self.values[i - 1])
        }
    }
}

/// Integral of a constant or exponential form from `t0` to `t1` (signed).
fn segment_integral(form: &SegmentForm, t0: f64, t1: f64) -> f64 {
    match *form {
        SegmentForm::Constant { value } => value * (t1 - t0),
        SegmentForm::Exponential {
            scale,
            offset,
            rate,
        } => {
            if rate == 0.0 {
                scale * offset.exp() * (t1 - t0)
            } else {
                scale / rate * ((offset + rate * t1).exp() - (offset + rate * t0).exp())
            }
        }
        _ => unreachable!("pair densities contain only constant and exponential forms"),
    }
}

/// Solves `anchor_v + integral(form, anchor_x, t) = y` for `t`.
fn segment_invert(form: &SegmentForm, anchor_x: f64, anchor_v: f64, y: f64) -> f64 {
    match *form {
        SegmentForm::Constant { value } => anchor_x + (y - anchor_v) / value,
        SegmentForm::Exponential {
            scale,
            offset,
            rate,
        } => {
            if rate == 0.0 {
                anchor_x + (y - anchor_v) / (scale * offset.exp())
            } else {
                let e0 = (offset + rate * anchor_x).exp();
                ((e0 + rate / scale * (y - anchor_v)).ln() - offset) / rate
            }
        }
        _ => unreachable!("pair densities contain only constant and exponential forms"),
    }
}

/// Merges atom jump factors with the exponential of the continuous
/// cumulative into one piecewise density, exact at every breakpoint.
fn scale_density(factors: &[(f64, f64)], continuous: &PiecewiseConstantDensity) -> PiecewiseFunction {
    let atom_locs: Vec<f64> = factors.iter().map(|f| f.0).collect();
    let bps = merge_breakpoints(&atom_locs, continuous.breakpoints());
    if bps.is_empty() {
        return PiecewiseFunction::constant(1.0);
    }
    let mut forms = vec![SegmentForm::Constant { value: 1.0 }];
    let mut product = 1.0;
    let mut fi = 0;
    for &bp in &bps {
        if fi < factors.len() && factors[fi].0 == bp {
            product *= factors[fi].1;
            fi += 1;
        }
        let base = product * (-2.0 * continuous.cumulative(bp)).exp();
        let d = continuous.value_at(bp);
        let form = if d == 0.0 {
            SegmentForm::Constant { value: base }
        } else {
            // offset + rate * bp cancels exactly, so the value at the
            // segment's left endpoint is `base` with no roundoff
            let two_d = 2.0 * d;
            SegmentForm::Exponential {
                scale: base,
                offset: two_d * bp,
                rate: -two_d,
            }
        };
        forms.push(form);
    }
    PiecewiseFunction::new(bps, forms).expect("scale density segments are well-formed")
}

/// Le Gall scale density: normalized to 1 on the left tail, jump factor
/// `(1 - w)/(1 + w)` at each atom. Requires `|w| < 1` everywhere.
pub fn build_f_nu(measure: &SignedMeasure) -> Result<PiecewiseFunction, TransformError> {
    measure.require_admissible(Regime::LeGall)?;
    let factors: Vec<(f64, f64)> = measure
        .atoms()
        .iter()
        .map(|a| (a.location, (1.0 - a.weight) / (1.0 + a.weight)))
        .collect();
    Ok(scale_density(&factors, measure.continuous()))
}

/// Turns a density into the pair (map, inverse). The density must be built
/// from constant and exponential segments and have a positive infimum, which
/// makes the map a bijection of the line.
pub fn build_pair(density: PiecewiseFunction) -> Result<TransformPair, TransformError> {
    if density
        .forms()
        .iter()
        .any(|f| !matches!(f, SegmentForm::Constant { .. } | SegmentForm::Exponential { .. }))
    {
        return Err(TransformError::UnsupportedDensityForm);
    }
    let infimum = density.infimum();
    if !(infimum > 0.0) {
        return Err(TransformError::NonPositiveDensity { infimum });
    }
    let bps = density.breakpoints().to_vec();
    let mut values = vec![0.0; bps.len()];
    for j in 1..bps.len() {
        values[j] = values[j - 1] + segment_integral(&density.forms()[j], bps[j - 1], bps[j]);
    }
    let mut pair = TransformPair { density, values };
    let shift = pair.map(0.0);
    if shift != 0.0 {
        for v in &mut pair.values {
            *v -= shift;
        }
    }
    debug_assert!(pair.values.windows(2).all(|w| w[0] < w[1]));
    Ok(pair)
}

pub fn build_legall_pair(measure: &SignedMeasure) -> Result<TransformPair, TransformError> {
    build_pair(build_f_nu(measure)?)
}

/// Bass-Chen pair: the companion measure maps each weight through
/// `w -> pi(w) w`, after which there are no atoms left to compensate and the
/// density is the plain exponential of the companion cumulative.
pub fn build_basschen_pair(measure: &SignedMeasure) -> Result<TransformPair, TransformError> {
    let companion = measure.basschen()?;
    let factors: Vec<(f64, f64)> = companion
        .atoms()
        .iter()
        .map(|a| (a.location, (-2.0 * a.weight).exp()))
        .collect();
    build_pair(scale_density(&factors, companion.continuous()))
}

/// The measure's continuous density as a piecewise function, zero outside
/// its support.
pub fn density_function(density: &PiecewiseConstantDensity) -> PiecewiseFunction {
    if density.is_empty() {
        return PiecewiseFunction::constant(0.0);
    }
    let mut forms = Vec::with_capacity(density.values().len() + 2);
    forms.push(SegmentForm::Constant { value: 0.0 });
    forms.extend(
        density
            .values()
            .iter()
            .map(|&value| SegmentForm::Constant { value }),
    );
    forms.push(SegmentForm::Constant { value: 0.0 });
    PiecewiseFunction::new(density.breakpoints().to_vec(), forms)
        .expect("density breakpoints are strictly increasing")
}

/// A discontinuity of the transformed coefficient, located in the image
/// variable, with both one-sided limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiJump {
    pub location: f64,
    pub left_limit: f64,
    pub right_limit: f64,
}

impl PsiJump {
    /// Smaller of the two squared one-sided limits; the scheme's convergence
    /// theory wants this positive at every jump.
    pub fn liminf_sq(&self) -> f64 {
        (self.left_limit * self.left_limit).min(self.right_limit * self.right_limit)
    }
}

/// Diffusion coefficient of the transformed equation,
/// `psi(y) = phi(inverse(y)) * density(inverse(y))`, right-continuous,
/// with its discontinuities precomputed.
#[derive(Debug, Clone)]
pub struct CoefficientPsi {
    phi: PiecewiseFunction,
    pair: TransformPair,
    jumps: Vec<PsiJump>,
}

pub fn build_psi(phi: PiecewiseFunction, pair: TransformPair) -> CoefficientPsi {
    let candidates = merge_breakpoints(phi.breakpoints(), pair.breakpoints());
    let jumps = candidates
        .iter()
        .filter_map(|&x| {
            let left = phi.eval_left(x) * pair.density_left(x);
            let right = phi.eval(x) * pair.density().eval(x);
            if (left - right).abs() <= PSI_JUMP_REL_TOL * left.abs().max(right.abs()) {
                None
            } else {
                Some(PsiJump {
                    location: pair.map(x),
                    left_limit: left,
                    right_limit: right,
                })
            }
        })
        .collect();
    CoefficientPsi { phi, pair, jumps }
}

impl CoefficientPsi {
    pub fn eval(&self, y: f64) -> f64 {
        let x = self.pair.inverse(y);
        self.phi.eval(x) * self.pair.density().eval(x)
    }

    /// Left limit at `y`; the inverse map is continuous and increasing, so
    /// this is the composition of the factor left limits.
    pub fn eval_left(&self, y: f64) -> f64 {
        let x = self.pair.inverse(y);
        self.phi.eval_left(x) * self.pair.density_left(x)
    }

    pub fn discontinuities(&self) -> &[PsiJump] {
        &self.jumps
    }

    pub fn is_continuous(&self) -> bool {
        self.jumps.is_empty()
    }

    /// Minimum of `liminf_sq` over the jumps; `None` when continuous.
    pub fn min_liminf_sq(&self) -> Option<f64> {
        self.jumps
            .iter()
            .map(PsiJump::liminf_sq)
            .min_by(f64::total_cmp)
    }

    pub fn pair(&self) -> &TransformPair {
        &self.pair
    }

    pub fn phi(&self) -> &PiecewiseFunction {
        &self.phi
    }

    /// Whether psi grows at most linearly in each tail. On a constant-density
    /// tail the map is affine there, so the growth class of `phi * density`
    /// in the original variable carries over; exponential density tails
    /// reparametrize growth and are reported as unclassified (`None`).
    pub fn at_most_linear_growth(&self) -> Option<bool> {
        let phi_forms = self.phi.forms();
        let dens_forms = self.pair.density().forms();
        let left = tail_at_most_linear(phi_forms.first().unwrap(), dens_forms.first().unwrap(), false);
        let right = tail_at_most_linear(phi_forms.last().unwrap(), dens_forms.last().unwrap(), true);
        match (left, right) {
            (Some(false), _) | (_, Some(false)) => Some(false),
            (None, _) | (_, None) => None,
            _ => Some(true),
        }
    }
}

fn tail_at_most_linear(phi: &SegmentForm, dens: &SegmentForm, right: bool) -> Option<bool> {
    if !matches!(dens, SegmentForm::Constant { .. }) {
        return None;
    }
    Some(match *phi {
        SegmentForm::Constant { .. } | SegmentForm::Linear { .. } | SegmentForm::Rational1 { .. } => {
            true
        }
        SegmentForm::Exponential { rate, .. } => {
            rate == 0.0 || (right && rate < 0.0) || (!right && rate > 0.0)
        }
    })
}

#[derive(Debug, Clone, Copy)]
pub struct AtomJumpCheck {
    pub location: f64,
    pub jump: f64,
    pub expected: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct IntervalSlopeCheck {
    pub probe: f64,
    pub log_slope: f64,
    pub expected: f64,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct JumpRatioReport {
    pub atoms: Vec<AtomJumpCheck>,
    pub intervals: Vec<IntervalSlopeCheck>,
}

impl JumpRatioReport {
    pub fn pass(&self) -> bool {
        self.atoms.iter().all(|a| a.pass) && self.intervals.iter().all(|i| i.pass)
    }
}

/// Verifies the defining identities of a scale density `f` against its
/// measure: at every atom `f(a) - f(a-) = -(f(a) + f(a-)) w`, and on every
/// atomless interval the log-slope of `f` equals `-2` times the continuous
/// density, probed at interior points.
pub fn jump_ratio_check(f: &PiecewiseFunction, measure: &SignedMeasure) -> JumpRatioReport {
    let atoms = measure
        .atoms()
        .iter()
        .map(|a| {
            let right = f.eval(a.location);
            let left = f.eval_left(a.location);
            let jump = right - left;
            let expected = -(right + left) * a.weight;
            let pass =
                (jump - expected).abs() <= JUMP_RATIO_REL_TOL * jump.abs().max(expected.abs());
            AtomJumpCheck {
                location: a.location,
                jump,
                expected,
                pass,
            }
        })
        .collect();
    let intervals = f
        .segments()
        .map(|s| {
            let probe = if s.lower.is_finite() && s.upper.is_finite() {
                0.5 * (s.lower + s.upper)
            } else if s.lower.is_finite() {
                s.lower + 1.0
            } else if s.upper.is_finite() {
                s.upper - 1.0
            } else {
                0.0
            };
            let log_slope = s.form.derivative(probe) / s.form.eval(probe);
            let expected = -2.0 * measure.continuous().value_at(probe);
            let pass = (log_slope - expected).abs() <= JUMP_RATIO_REL_TOL * expected.abs().max(1.0);
            IntervalSlopeCheck {
                probe,
                log_slope,
                expected,
                pass,
            }
        })
        .collect();
    JumpRatioReport { atoms, intervals }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::Atom;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn dirac(weight: f64) -> SignedMeasure {
        SignedMeasure::dirac(0.0, weight).unwrap()
    }

    #[test]
    fn single_atom_scale_density_is_the_two_value_step() {
        for &alpha in &[0.25, 0.5, -0.5] {
            let f = build_f_nu(&dirac(alpha)).unwrap();
            let expected = (1.0 - alpha) / (1.0 + alpha);
            assert_eq!(f.eval(-1.0), 1.0);
            assert_eq!(f.eval_left(0.0), 1.0);
            assert_eq!(f.eval(0.0), expected);
            assert_eq!(f.eval(3.0), expected);
        }
    }

    #[test]
    fn single_atom_map_and_inverse() {
        let pair = build_legall_pair(&dirac(0.5)).unwrap();
        assert_eq!(pair.map(0.0), 0.0);
        assert_eq!(pair.map(-2.0), -2.0);
        assert_relative_eq!(pair.map(3.0), 1.0, max_relative = 1e-15);
        assert_relative_eq!(pair.inverse(1.0), 3.0, max_relative = 1e-15);
        assert_eq!(pair.inverse(-2.0), -2.0);
    }

    #[test]
    fn pure_density_measure_gives_exponential_segments() {
        let density = PiecewiseConstantDensity::new(vec![0.0, 1.0], vec![1.0]).unwrap();
        let m = SignedMeasure::from_density(density);
        let f = build_f_nu(&m).unwrap();
        assert_eq!(f.eval(-1.0), 1.0);
        assert_relative_eq!(f.eval(0.5), (-1.0f64).exp(), max_relative = 1e-15);
        assert_relative_eq!(f.eval(1.0), (-2.0f64).exp(), max_relative = 1e-15);
        assert_relative_eq!(f.eval(10.0), (-2.0f64).exp(), max_relative = 1e-15);

        let pair = build_pair(f).unwrap();
        // integral of exp(-2x) over [0, 1]
        let expected = (1.0 - (-2.0f64).exp()) / 2.0;
        assert_relative_eq!(pair.map(1.0), expected, max_relative = 1e-14);
        assert_relative_eq!(pair.inverse(expected), 1.0, max_relative = 1e-14);
    }

    #[test]
    fn basschen_quarter_atom_halves_the_positive_axis() {
        let pair = build_basschen_pair(&dirac(0.25)).unwrap();
        for &x in &[0.5, 1.0, 2.0, 7.5] {
            assert_relative_eq!(pair.map(x), 0.5 * x, max_relative = 1e-13);
        }
        assert_eq!(pair.map(-1.0), -1.0);
    }

    #[test]
    fn transforms_agree_on_atomless_measures() {
        let density = PiecewiseConstantDensity::new(vec![-1.0, 0.5, 2.0], vec![0.7, -0.3]).unwrap();
        let m = SignedMeasure::from_density(density);
        let legall = build_legall_pair(&m).unwrap();
        let basschen = build_basschen_pair(&m).unwrap();
        let mut x = -3.0;
        while x <= 4.0 {
            assert_relative_eq!(legall.map(x), basschen.map(x), max_relative = 1e-13);
            assert_relative_eq!(
                legall.density().eval(x),
                basschen.density().eval(x),
                max_relative = 1e-13
            );
            x += 0.05;
        }
    }

    #[test]
    fn build_pair_rejects_bad_densities() {
        let linear = PiecewiseFunction::parse("piece all: 1 + 1*x").unwrap();
        assert!(matches!(
            build_pair(linear),
            Err(TransformError::UnsupportedDensityForm)
        ));
        let vanishing = PiecewiseFunction::parse("piece x<0: exp(x); piece x>=0: 1").unwrap();
        assert!(matches!(
            build_pair(vanishing),
            Err(TransformError::NonPositiveDensity { .. })
        ));
    }

    #[test]
    fn build_f_nu_rejects_inadmissible_atoms() {
        let m = SignedMeasure::dirac(0.0, 1.0).unwrap();
        assert!(matches!(
            build_f_nu(&m),
            Err(TransformError::Measure(MeasureError::Inadmissible { .. }))
        ));
    }

    #[test]
    fn scale_density_matches_atom_product_at_atoms() {
        let m = SignedMeasure::new(
            vec![
                Atom {
                    location: -1.0,
                    weight: 0.3,
                },
                Atom {
                    location: 2.0,
                    weight: -0.6,
                },
            ],
            PiecewiseConstantDensity::empty(),
        )
        .unwrap();
        let f = build_f_nu(&m).unwrap();
        for &x in &[-1.0, 0.0, 2.0, 5.0] {
            assert_relative_eq!(
                f.eval(x),
                m.atom_product(x).unwrap(),
                max_relative = 1e-15
            );
        }
    }

    #[test]
    fn psi_for_the_unit_phi_step_model() {
        let m = dirac(0.5);
        let pair = build_legall_pair(&m).unwrap();
        let psi = build_psi(PiecewiseFunction::constant(1.0), pair);
        assert_eq!(psi.eval(-1.0), 1.0);
        assert_relative_eq!(psi.eval(0.0), 1.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(psi.eval(2.0), 1.0 / 3.0, max_relative = 1e-15);
        assert_eq!(psi.eval_left(0.0), 1.0);
        let jumps = psi.discontinuities();
        assert_eq!(jumps.len(), 1);
        assert_eq!(jumps[0].location, 0.0);
        assert_eq!(jumps[0].left_limit, 1.0);
        assert_relative_eq!(jumps[0].right_limit, 1.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(
            psi.min_liminf_sq().unwrap(),
            1.0 / 9.0,
            max_relative = 1e-15
        );
        assert_eq!(psi.at_most_linear_growth(), Some(true));
    }

    #[test]
    fn psi_continuity_when_phi_compensates_the_density_jump() {
        // phi jumps by the reciprocal of the density jump, so psi is smooth
        let alpha = 0.5f64;
        let q = (1.0 + alpha) / (1.0 - alpha);
        let r = (1.0 - alpha) / (1.0 + alpha);
        let phi = PiecewiseFunction::new(
            vec![0.0],
            vec![
                SegmentForm::Exponential {
                    scale: 1.0,
                    offset: 0.0,
                    rate: 1.0,
                },
                SegmentForm::Exponential {
                    scale: q,
                    offset: 0.0,
                    rate: -r,
                },
            ],
        )
        .unwrap();
        let pair = build_legall_pair(&dirac(alpha)).unwrap();
        let psi = build_psi(phi, pair);
        assert!(psi.is_continuous());
        assert_eq!(psi.min_liminf_sq(), None);
        for &y in &[-3.0, -1.0, 0.0, 1.0, 3.0] {
            assert_relative_eq!(psi.eval(y), (-y.abs()).exp(), max_relative = 1e-13);
        }
        assert_eq!(psi.at_most_linear_growth(), Some(true));
    }

    #[test]
    fn growth_classification_flags_exponential_tails() {
        let phi = PiecewiseFunction::parse("piece all: exp(x)").unwrap();
        let pair = build_legall_pair(&SignedMeasure::zero()).unwrap();
        let psi = build_psi(phi, pair);
        assert_eq!(psi.at_most_linear_growth(), Some(false));

        let density = PiecewiseConstantDensity::new(vec![0.0, 1.0], vec![1.0]).unwrap();
        let pair = build_legall_pair(&SignedMeasure::from_density(density)).unwrap();
        let psi = build_psi(PiecewiseFunction::constant(1.0), pair);
        // interior exponential segments sit between constant tails
        assert_eq!(psi.at_most_linear_growth(), Some(true));
    }

    #[test]
    fn jump_ratio_report_validates_the_builder() {
        let density = PiecewiseConstantDensity::new(vec![-0.5, 1.5], vec![0.8]).unwrap();
        let m = SignedMeasure::new(
            vec![
                Atom {
                    location: 0.0,
                    weight: 0.5,
                },
                Atom {
                    location: 1.0,
                    weight: -0.25,
                },
            ],
            density,
        )
        .unwrap();
        let f = build_f_nu(&m).unwrap();
        let report = jump_ratio_check(&f, &m);
        assert!(report.pass());
        assert_eq!(report.atoms.len(), 2);
        assert_eq!(report.intervals.len(), f.forms().len());

        // a density that does not satisfy the identities fails the check
        let wrong = PiecewiseFunction::parse("piece x<0: 1; piece x>=0: 0.9").unwrap();
        assert!(!jump_ratio_check(&wrong, &m).pass());
    }

    fn arb_admissible_measure() -> impl Strategy<Value = SignedMeasure> {
        let atoms = prop::collection::vec(
            ((-5.0..5.0f64), (-0.9..0.9f64)),
            0..4,
        );
        let density = prop_oneof![
            Just(None),
            (prop::collection::vec(-6.0..6.0f64, 2..5), -1.5..1.5f64).prop_map(Some),
        ];
        (atoms, density).prop_map(|(raw_atoms, raw_density)| {
            let mut atoms: Vec<Atom> = raw_atoms
                .into_iter()
                .map(|(location, weight)| Atom { location, weight })
                .collect();
            atoms.sort_by(|a, b| a.location.total_cmp(&b.location));
            atoms.dedup_by(|a, b| a.location == b.location);
            let continuous = match raw_density {
                None => PiecewiseConstantDensity::empty(),
                Some((mut bps, value)) => {
                    bps.sort_by(f64::total_cmp);
                    bps.dedup();
                    if bps.len() < 2 {
                        PiecewiseConstantDensity::empty()
                    } else {
                        let values = vec![value; bps.len() - 1];
                        PiecewiseConstantDensity::new(bps, values).unwrap()
                    }
                }
            };
            SignedMeasure::new(atoms, continuous).unwrap()
        })
    }

    proptest! {
        /// The defining identities hold for every built scale density.
        #[test]
        fn jump_identities_hold(m in arb_admissible_measure()) {
            let f = build_f_nu(&m).unwrap();
            prop_assert!(jump_ratio_check(&f, &m).pass());
        }

        /// inverse(map(x)) recovers x up to the local condition number: a
        /// rounding of y maps back to an x-error of roughly ulp(y)/f(x).
        #[test]
        fn map_inverts(m in arb_admissible_measure(), xs in prop::collection::vec(-50.0..50.0f64, 1..20)) {
            let pair = build_legall_pair(&m).unwrap();
            let vmax = pair
                .map_values()
                .iter()
                .fold(0.0f64, |acc, &v| acc.max(v.abs()));
            prop_assert!(pair.map(0.0).abs() <= 1e-12 * (1.0 + vmax));
            for &x in &xs {
                let y = pair.map(x);
                let roundtrip = pair.inverse(y);
                let f_x = pair.density().eval(x);
                let tol = 1e-9 * x.abs().max(1.0)
                    + 64.0 * f64::EPSILON * (y.abs().max(vmax) + 1.0) / f_x;
                prop_assert!((roundtrip - x).abs() <= tol,
                    "x={x} roundtrip={roundtrip} tol={tol}");
            }
        }

        /// The map increases along any sampled grid; strictly so whenever the
        /// true increment is large enough to be representable.
        #[test]
        fn map_is_increasing(m in arb_admissible_measure()) {
            let pair = build_legall_pair(&m).unwrap();
            let density = pair.density();
            let mut prev = pair.map(-20.0);
            let mut x = -20.0 + 0.25;
            while x <= 20.0 {
                let v = pair.map(x);
                let ulp = f64::EPSILON * v.abs().max(prev.abs()).max(1.0);
                prop_assert!(v >= prev - 2.0 * ulp, "x={x} v={v} prev={prev}");
                let mut min_f = density.eval(x - 0.25).min(density.eval(x));
                for &bp in density.breakpoints() {
                    if x - 0.25 < bp && bp <= x {
                        min_f = min_f.min(density.eval(bp)).min(pair.density_left(bp));
                    }
                }
                if 0.25 * min_f > 8.0 * ulp {
                    prop_assert!(v > prev, "x={x} v={v} prev={prev}");
                }
                prev = v;
                x += 0.25;
            }
        }
    }
}
