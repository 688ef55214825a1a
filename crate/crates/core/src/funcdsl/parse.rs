//! Lexer and recursive-descent parser for the piecewise-function text form.

use thiserror::Error;

use super::{PiecewiseFunction, SegmentForm};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("pieces do not partition the line: {0}")]
    Partition(String),
}

#[derive(Debug, Clone, PartialEq)]
enum TokKind {
    Num(f64),
    Ident(String),
    Sym(&'static str),
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokKind,
    pos: usize,
}

fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = src.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let pos = i;
        if c.is_ascii_digit() || (c == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if i < bytes.len() && bytes[i] == b'.' {
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
            }
            // exponent marker, only when it is really one (otherwise it may
            // be the start of "exp")
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let tail = &bytes[i + 1..];
                let digits_at = |k: usize| tail.get(k).is_some_and(u8::is_ascii_digit);
                if digits_at(0) {
                    i += 2;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                } else if tail.first().is_some_and(|&b| b == b'+' || b == b'-') && digits_at(1) {
                    i += 3;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text = &src[pos..i];
            let value: f64 = text
                .parse()
                .map_err(|_| ParseError::Syntax {
                    pos,
                    msg: format!("bad number literal '{text}'"),
                })?;
            if !value.is_finite() {
                return Err(ParseError::Syntax {
                    pos,
                    msg: format!("number literal '{text}' is out of range"),
                });
            }
            toks.push(Token {
                kind: TokKind::Num(value),
                pos,
            });
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            toks.push(Token {
                kind: TokKind::Ident(src[pos..i].to_string()),
                pos,
            });
            continue;
        }
        let two = bytes.get(i + 1).map(|&b| [c, b]);
        let sym: &'static str = match (c, two) {
            (b'<', Some([b'<', b'='])) => "<=",
            (b'>', Some([b'>', b'='])) => ">=",
            (b'<', _) => "<",
            (b';', _) => ";",
            (b':', _) => ":",
            (b'+', _) => "+",
            (b'-', _) => "-",
            (b'*', _) => "*",
            (b'/', _) => "/",
            (b'(', _) => "(",
            (b')', _) => ")",
            (b'^', _) => "^",
            _ => {
                return Err(ParseError::Syntax {
                    pos,
                    msg: format!("unexpected character '{}'", &src[pos..pos + 1]),
                })
            }
        };
        i += sym.len();
        toks.push(Token {
            kind: TokKind::Sym(sym),
            pos,
        });
    }
    Ok(toks)
}

struct RawPiece {
    lower: f64,
    upper: f64,
    form: SegmentForm,
}

struct Parser {
    toks: Vec<Token>,
    i: usize,
    src_len: usize,
}

impl Parser {
    fn pos(&self) -> usize {
        self.toks.get(self.i).map_or(self.src_len, |t| t.pos)
    }

    fn err(&self, msg: impl Into<String>) -> ParseError {
        ParseError::Syntax {
            pos: self.pos(),
            msg: msg.into(),
        }
    }

    fn peek(&self) -> Option<&TokKind> {
        self.toks.get(self.i).map(|t| &t.kind)
    }

    fn at_end(&self) -> bool {
        self.i >= self.toks.len()
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if matches!(self.peek(), Some(TokKind::Sym(t)) if *t == s) {
            self.i += 1;
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), ParseError> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            Err(self.err(format!("expected '{s}'")))
        }
    }

    fn ident_is(&self, at: usize, name: &str) -> bool {
        matches!(self.toks.get(at).map(|t| &t.kind), Some(TokKind::Ident(id)) if id == name)
    }

    fn eat_ident(&mut self, name: &str) -> bool {
        if self.ident_is(self.i, name) {
            self.i += 1;
            true
        } else {
            false
        }
    }

    fn expect_ident(&mut self, name: &str) -> Result<(), ParseError> {
        if self.eat_ident(name) {
            Ok(())
        } else {
            Err(self.err(format!("expected '{name}'")))
        }
    }

    fn signed_number(&mut self) -> Result<f64, ParseError> {
        let sign = if self.eat_sym("-") {
            -1.0
        } else {
            self.eat_sym("+");
            1.0
        };
        match self.peek() {
            Some(TokKind::Num(n)) => {
                let v = sign * n;
                self.i += 1;
                Ok(v)
            }
            _ => Err(self.err("expected a number")),
        }
    }

    fn literal(&mut self, want: f64, what: &str) -> Result<(), ParseError> {
        match self.peek() {
            Some(TokKind::Num(n)) if *n == want => {
                self.i += 1;
                Ok(())
            }
            _ => Err(self.err(format!("expected '{what}'"))),
        }
    }

    fn parse_cond(&mut self) -> Result<(f64, f64), ParseError> {
        if self.eat_ident("all") {
            return Ok((f64::NEG_INFINITY, f64::INFINITY));
        }
        if self.eat_ident("x") {
            if self.eat_sym(">=") {
                let n = self.signed_number()?;
                return Ok((n, f64::INFINITY));
            }
            if self.eat_sym("<") {
                let n = self.signed_number()?;
                return Ok((f64::NEG_INFINITY, n));
            }
            return Err(self.err("expected '>=' or '<' after 'x'"));
        }
        let at = self.pos();
        let a = self.signed_number()?;
        self.expect_sym("<=")?;
        self.expect_ident("x")?;
        self.expect_sym("<")?;
        let b = self.signed_number()?;
        if !(a < b) {
            return Err(ParseError::Syntax {
                pos: at,
                msg: format!("empty interval [{a}, {b})"),
            });
        }
        Ok((a, b))
    }

    /// Scans the tokens of the current expression (up to ';' or the end) for
    /// a marker deciding which form grammar applies.
    fn expr_has(&self, ident: Option<&str>, sym: Option<&str>) -> bool {
        self.toks[self.i..]
            .iter()
            .take_while(|t| t.kind != TokKind::Sym(";"))
            .any(|t| match &t.kind {
                TokKind::Ident(id) => ident == Some(id.as_str()),
                TokKind::Sym(s) => sym == Some(*s),
                TokKind::Num(_) => false,
            })
    }

    /// Sum of terms `num`, `num*x`, `x`; returns (intercept, slope).
    fn parse_affine(&mut self) -> Result<(f64, f64), ParseError> {
        let mut intercept = 0.0;
        let mut slope = 0.0;
        loop {
            let mut sign = 1.0;
            loop {
                if self.eat_sym("-") {
                    sign = -sign;
                } else if !self.eat_sym("+") {
                    break;
                }
            }
            match self.peek() {
                Some(TokKind::Num(n)) => {
                    let n = *n;
                    self.i += 1;
                    if self.eat_sym("*") {
                        self.expect_ident("x")?;
                        slope += sign * n;
                    } else {
                        intercept += sign * n;
                    }
                }
                Some(TokKind::Ident(id)) if id == "x" => {
                    self.i += 1;
                    slope += sign;
                }
                _ => return Err(self.err("expected a number or 'x'")),
            }
            if !matches!(self.peek(), Some(TokKind::Sym(s)) if *s == "+" || *s == "-") {
                return Ok((intercept, slope));
            }
        }
    }

    fn parse_exponential(&mut self) -> Result<SegmentForm, ParseError> {
        let scale = if self.ident_is(self.i, "exp") {
            1.0
        } else if matches!(self.peek(), Some(TokKind::Sym(s)) if *s == "-" || *s == "+")
            && self.ident_is(self.i + 1, "exp")
        {
            let neg = self.eat_sym("-");
            if !neg {
                self.eat_sym("+");
            }
            if neg {
                -1.0
            } else {
                1.0
            }
        } else {
            let c = self.signed_number()?;
            self.expect_sym("*")?;
            c
        };
        self.expect_ident("exp")?;
        self.expect_sym("(")?;
        let (offset, rate) = self.parse_affine()?;
        self.expect_sym(")")?;
        if rate == 0.0 {
            Ok(SegmentForm::Constant {
                value: scale * offset.exp(),
            })
        } else {
            Ok(SegmentForm::Exponential {
                scale,
                offset,
                rate,
            })
        }
    }

    fn parse_fraction_or_rational(&mut self) -> Result<SegmentForm, ParseError> {
        let scale = self.signed_number()?;
        self.expect_sym("/")?;
        if self.eat_sym("(") {
            self.literal(1.0, "1")?;
            self.expect_sym("+")?;
            self.expect_sym("(")?;
            let at = self.pos();
            let (intercept, shape) = self.parse_affine()?;
            if intercept != 0.0 {
                return Err(ParseError::Syntax {
                    pos: at,
                    msg: "the squared term must be a pure multiple of x".into(),
                });
            }
            self.expect_sym(")")?;
            self.expect_sym("^")?;
            self.literal(2.0, "2")?;
            self.expect_sym(")")?;
            Ok(SegmentForm::Rational1 { scale, shape })
        } else {
            let at = self.pos();
            let denom = self.signed_number()?;
            if denom == 0.0 {
                return Err(ParseError::Syntax {
                    pos: at,
                    msg: "division by zero".into(),
                });
            }
            Ok(SegmentForm::Constant {
                value: scale / denom,
            })
        }
    }

    fn parse_expr(&mut self) -> Result<SegmentForm, ParseError> {
        if self.expr_has(Some("exp"), None) {
            self.parse_exponential()
        } else if self.expr_has(None, Some("/")) {
            self.parse_fraction_or_rational()
        } else {
            let (intercept, slope) = self.parse_affine()?;
            if slope == 0.0 {
                Ok(SegmentForm::Constant { value: intercept })
            } else {
                Ok(SegmentForm::Linear { intercept, slope })
            }
        }
    }
}

pub(crate) fn parse(text: &str) -> Result<PiecewiseFunction, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        i: 0,
        src_len: text.len(),
    };
    let mut pieces = Vec::new();
    loop {
        p.expect_ident("piece")?;
        let (lower, upper) = p.parse_cond()?;
        p.expect_sym(":")?;
        let form = p.parse_expr()?;
        pieces.push(RawPiece { lower, upper, form });
        if p.eat_sym(";") {
            if p.at_end() {
                break;
            }
        } else if p.at_end() {
            break;
        } else {
            return Err(p.err("expected ';' between pieces"));
        }
    }
    assemble(pieces)
}

fn assemble(mut pieces: Vec<RawPiece>) -> Result<PiecewiseFunction, ParseError> {
    pieces.sort_by(|a, b| a.lower.total_cmp(&b.lower));
    if pieces[0].lower != f64::NEG_INFINITY {
        return Err(ParseError::Partition(format!(
            "no piece covers the left tail (lowest starts at {})",
            pieces[0].lower
        )));
    }
    for w in pieces.windows(2) {
        if w[1].lower > w[0].upper {
            return Err(ParseError::Partition(format!(
                "gap between {} and {}",
                w[0].upper, w[1].lower
            )));
        }
        if w[1].lower < w[0].upper {
            return Err(ParseError::Partition(format!("overlap at {}", w[1].lower)));
        }
    }
    if pieces.last().unwrap().upper != f64::INFINITY {
        return Err(ParseError::Partition(format!(
            "no piece covers the right tail (highest ends at {})",
            pieces.last().unwrap().upper
        )));
    }
    let breakpoints: Vec<f64> = pieces[1..].iter().map(|p| p.lower).collect();
    let forms: Vec<SegmentForm> = pieces.iter().map(|p| p.form).collect();
    PiecewiseFunction::new(breakpoints, forms).map_err(|e| ParseError::Partition(e.to_string()))
}
