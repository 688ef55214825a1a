//! Piecewise functions on the real line built from a tiny closed family of
//! segment forms, with a text representation for configs.
//!
//! Text form, whitespace-insensitive:
//!
//! ```text
//! function    := piece (";" piece)* [";"]
//! piece       := "piece" cond ":" expr
//! cond        := "all" | "x" ">=" num | "x" "<" num | num "<=" "x" "<" num
//! expr        := affine | exponential | rational | fraction
//! affine      := term (("+" | "-") term)*           e.g. "1", "-2 + 0.5*x"
//! exponential := [num "*"] "exp" "(" affine ")"     e.g. "3*exp(-0.2*x)"
//! rational    := num "/" "(" "1" "+" "(" affine ")" "^" "2" ")"
//! fraction    := num "/" num                        a rational constant
//! num         := optionally signed decimal float literal
//! ```
//!
//! The inner affine of the rational form must be a pure multiple of `x`.
//! Pieces must partition the line exactly: consecutive bounds must match with
//! no gap or overlap. Evaluation is right-continuous, so each bound belongs
//! to the piece on its right; `eval_left` gives the limit from the left.

use thiserror::Error;

mod parse;

pub use parse::ParseError;

#[derive(Debug, Error, PartialEq)]
pub enum FuncError {
    #[error("breakpoints must be finite and strictly increasing")]
    BadBreakpoints,
    #[error("need exactly one more segment form than breakpoints")]
    ShapeMismatch,
    #[error("segment form has a non-finite parameter")]
    NonFiniteParam,
    #[error("product is not representable in the segment form family")]
    NotRepresentable,
}

/// One closed-form expression, valid on a segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SegmentForm {
    /// `value`
    Constant { value: f64 },
    /// `intercept + slope * x`
    Linear { intercept: f64, slope: f64 },
    /// `scale * exp(offset + rate * x)`
    Exponential { scale: f64, offset: f64, rate: f64 },
    /// `scale / (1 + (shape * x)^2)`
    Rational1 { scale: f64, shape: f64 },
}

impl SegmentForm {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            SegmentForm::Constant { value } => value,
            SegmentForm::Linear { intercept, slope } => intercept + slope * x,
            SegmentForm::Exponential {
                scale,
                offset,
                rate,
            } => scale * (offset + rate * x).exp(),
            SegmentForm::Rational1 { scale, shape } => {
                let t = shape * x;
                scale / (1.0 + t * t)
            }
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            SegmentForm::Constant { .. } => 0.0,
            SegmentForm::Linear { slope, .. } => slope,
            SegmentForm::Exponential { rate, .. } => rate * self.eval(x),
            SegmentForm::Rational1 { scale, shape } => {
                let t = shape * x;
                let denom = 1.0 + t * t;
                -2.0 * scale * shape * t / (denom * denom)
            }
        }
    }

    fn params_finite(&self) -> bool {
        match *self {
            SegmentForm::Constant { value } => value.is_finite(),
            SegmentForm::Linear { intercept, slope } => {
                intercept.is_finite() && slope.is_finite()
            }
            SegmentForm::Exponential {
                scale,
                offset,
                rate,
            } => scale.is_finite() && offset.is_finite() && rate.is_finite(),
            SegmentForm::Rational1 { scale, shape } => scale.is_finite() && shape.is_finite(),
        }
    }

    fn scaled(self, k: f64) -> SegmentForm {
        match self {
            SegmentForm::Constant { value } => SegmentForm::Constant { value: k * value },
            SegmentForm::Linear { intercept, slope } => SegmentForm::Linear {
                intercept: k * intercept,
                slope: k * slope,
            },
            SegmentForm::Exponential {
                scale,
                offset,
                rate,
            } => SegmentForm::Exponential {
                scale: k * scale,
                offset,
                rate,
            },
            SegmentForm::Rational1 { scale, shape } => SegmentForm::Rational1 {
                scale: k * scale,
                shape,
            },
        }
    }

    fn try_mul(self, other: SegmentForm) -> Result<SegmentForm, FuncError> {
        match (self, other) {
            (SegmentForm::Constant { value }, f) | (f, SegmentForm::Constant { value }) => {
                Ok(f.scaled(value))
            }
            (
                SegmentForm::Exponential {
                    scale: c1,
                    offset: a1,
                    rate: b1,
                },
                SegmentForm::Exponential {
                    scale: c2,
                    offset: a2,
                    rate: b2,
                },
            ) => Ok(SegmentForm::Exponential {
                scale: c1 * c2,
                offset: a1 + a2,
                rate: b1 + b2,
            }),
            _ => Err(FuncError::NotRepresentable),
        }
    }

    fn try_sq(self) -> Result<SegmentForm, FuncError> {
        match self {
            SegmentForm::Constant { value } => Ok(SegmentForm::Constant {
                value: value * value,
            }),
            SegmentForm::Linear { intercept, slope } if slope == 0.0 => {
                Ok(SegmentForm::Constant {
                    value: intercept * intercept,
                })
            }
            SegmentForm::Exponential {
                scale,
                offset,
                rate,
            } => Ok(SegmentForm::Exponential {
                scale: scale * scale,
                offset: 2.0 * offset,
                rate: 2.0 * rate,
            }),
            _ => Err(FuncError::NotRepresentable),
        }
    }

    /// Exact infimum over the closure of `[lower, upper]`; the bounds may be
    /// infinite, in which case tail limits count.
    fn infimum_on(&self, lower: f64, upper: f64) -> f64 {
        match *self {
            SegmentForm::Constant { value } => value,
            SegmentForm::Linear { intercept, slope } => {
                if slope == 0.0 {
                    intercept
                } else {
                    let end = |t: f64| {
                        if t.is_finite() {
                            intercept + slope * t
                        } else if (slope > 0.0) == (t == f64::INFINITY) {
                            f64::INFINITY
                        } else {
                            f64::NEG_INFINITY
                        }
                    };
                    end(lower).min(end(upper))
                }
            }
            SegmentForm::Exponential {
                scale,
                offset,
                rate,
            } => {
                if scale == 0.0 {
                    return 0.0;
                }
                if rate == 0.0 {
                    return scale * offset.exp();
                }
                let end = |t: f64| {
                    if t.is_finite() {
                        scale * (offset + rate * t).exp()
                    } else if (rate > 0.0) == (t == f64::INFINITY) {
                        // exponent runs to +inf on this side
                        if scale > 0.0 {
                            f64::INFINITY
                        } else {
                            f64::NEG_INFINITY
                        }
                    } else {
                        0.0
                    }
                };
                end(lower).min(end(upper))
            }
            SegmentForm::Rational1 { scale, shape } => {
                if scale == 0.0 || shape == 0.0 {
                    return scale;
                }
                let bump = |x: f64| {
                    let t = shape * x;
                    scale / (1.0 + t * t)
                };
                if scale > 0.0 {
                    // smallest where |x| is largest
                    if !lower.is_finite() || !upper.is_finite() {
                        0.0
                    } else {
                        bump(lower.abs().max(upper.abs()))
                    }
                } else {
                    // most negative where |x| is smallest
                    if lower <= 0.0 && 0.0 <= upper {
                        scale
                    } else if lower > 0.0 {
                        bump(lower)
                    } else {
                        bump(upper)
                    }
                }
            }
        }
    }
}

/// A segment with its closed-form expression; bounds may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub lower: f64,
    pub upper: f64,
    pub form: SegmentForm,
}

/// Piecewise function: `forms[i]` applies on `[breakpoints[i-1], breakpoints[i])`
/// with the outer segments unbounded. Always defined on the whole line.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseFunction {
    breakpoints: Vec<f64>,
    forms: Vec<SegmentForm>,
}

impl PiecewiseFunction {
    pub fn new(breakpoints: Vec<f64>, forms: Vec<SegmentForm>) -> Result<Self, FuncError> {
        if forms.len() != breakpoints.len() + 1 {
            return Err(FuncError::ShapeMismatch);
        }
        if breakpoints.iter().any(|b| !b.is_finite())
            || breakpoints.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(FuncError::BadBreakpoints);
        }
        if forms.iter().any(|f| !f.params_finite()) {
            return Err(FuncError::NonFiniteParam);
        }
        Ok(Self { breakpoints, forms })
    }

    pub fn constant(value: f64) -> Self {
        Self {
            breakpoints: Vec::new(),
            forms: vec![SegmentForm::Constant { value }],
        }
    }

    pub fn parse(text: &str) -> Result<Self, ParseError> {
        parse::parse(text)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn forms(&self) -> &[SegmentForm] {
        &self.forms
    }

    pub fn segments(&self) -> impl Iterator<Item = Segment> + '_ {
        (0..self.forms.len()).map(move |i| Segment {
            lower: if i == 0 {
                f64::NEG_INFINITY
            } else {
                self.breakpoints[i - 1]
            },
            upper: if i == self.breakpoints.len() {
                f64::INFINITY
            } else {
                self.breakpoints[i]
            },
            form: self.forms[i],
        })
    }

    /// Right-continuous evaluation: at a breakpoint the right segment wins.
    pub fn eval(&self, x: f64) -> f64 {
        let i = self.breakpoints.partition_point(|b| *b <= x);
        self.forms[i].eval(x)
    }

    /// Limit from the left: at a breakpoint the left segment's form applies.
    pub fn eval_left(&self, x: f64) -> f64 {
        let i = self.breakpoints.partition_point(|b| *b < x);
        self.forms[i].eval(x)
    }

    /// Breakpoints where the two one-sided values differ exactly.
    pub fn discontinuities(&self) -> Vec<f64> {
        self.breakpoints
            .iter()
            .copied()
            .filter(|&b| self.eval(b) != self.eval_left(b))
            .collect()
    }

    /// Exact infimum over the whole line, computed per segment in closed form.
    pub fn infimum(&self) -> f64 {
        self.segments()
            .map(|s| s.form.infimum_on(s.lower, s.upper))
            .fold(f64::INFINITY, f64::min)
    }

    /// True iff the infimum of every segment is at least `eps`.
    pub fn bounded_below(&self, eps: f64) -> bool {
        assert!(eps > 0.0, "threshold must be positive");
        self.infimum() >= eps
    }

    pub fn scaled(&self, k: f64) -> PiecewiseFunction {
        PiecewiseFunction {
            breakpoints: self.breakpoints.clone(),
            forms: self.forms.iter().map(|f| f.scaled(k)).collect(),
        }
    }

    /// Pointwise product, when every overlap stays inside the form family
    /// (constants scale anything, exponentials multiply).
    pub fn try_product(&self, other: &PiecewiseFunction) -> Result<PiecewiseFunction, FuncError> {
        let bps = merge_breakpoints(&self.breakpoints, &other.breakpoints);
        let mut forms = Vec::with_capacity(bps.len() + 1);
        let mut ia = 0;
        let mut ib = 0;
        forms.push(self.forms[0].try_mul(other.forms[0])?);
        for &bp in &bps {
            if ia < self.breakpoints.len() && self.breakpoints[ia] == bp {
                ia += 1;
            }
            if ib < other.breakpoints.len() && other.breakpoints[ib] == bp {
                ib += 1;
            }
            forms.push(self.forms[ia].try_mul(other.forms[ib])?);
        }
        PiecewiseFunction::new(bps, forms)
    }

    /// Pointwise square, when each form squares within the family.
    pub fn try_square(&self) -> Result<PiecewiseFunction, FuncError> {
        let forms = self
            .forms
            .iter()
            .map(|f| f.try_sq())
            .collect::<Result<Vec<_>, _>>()?;
        Ok(PiecewiseFunction {
            breakpoints: self.breakpoints.clone(),
            forms,
        })
    }

    /// Text form that reparses to a function with identical values.
    pub fn render(&self) -> String {
        let n = self.forms.len();
        if n == 1 {
            return format!("piece all: {}", render_form(&self.forms[0]));
        }
        let mut out = String::new();
        for (i, form) in self.forms.iter().enumerate() {
            if i > 0 {
                out.push_str("; ");
            }
            if i == 0 {
                out.push_str(&format!("piece x<{}: ", self.breakpoints[0]));
            } else if i == n - 1 {
                out.push_str(&format!("piece x>={}: ", self.breakpoints[i - 1]));
            } else {
                out.push_str(&format!(
                    "piece {}<=x<{}: ",
                    self.breakpoints[i - 1],
                    self.breakpoints[i]
                ));
            }
            out.push_str(&render_form(form));
        }
        out
    }
}

/// Exact-dedup merge of two sorted breakpoint lists.
pub(crate) fn merge_breakpoints(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let next = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) => {
                if x <= y {
                    i += 1;
                    if x == y {
                        j += 1;
                    }
                    x
                } else {
                    j += 1;
                    y
                }
            }
            (Some(&x), None) => {
                i += 1;
                x
            }
            (None, Some(&y)) => {
                j += 1;
                y
            }
            (None, None) => unreachable!(),
        };
        out.push(next);
    }
    out
}

fn render_affine(intercept: f64, slope: f64) -> String {
    if slope < 0.0 {
        format!("{} - {}*x", intercept, -slope)
    } else {
        format!("{} + {}*x", intercept, slope)
    }
}

fn render_form(form: &SegmentForm) -> String {
    match *form {
        SegmentForm::Constant { value } => format!("{}", value),
        SegmentForm::Linear { intercept, slope } => render_affine(intercept, slope),
        SegmentForm::Exponential {
            scale,
            offset,
            rate,
        } => format!("{}*exp({})", scale, render_affine(offset, rate)),
        SegmentForm::Rational1 { scale, shape } => {
            format!("{}/(1+({}*x)^2)", scale, shape)
        }
    }
}
