//! Text literals for every value type, with an exact printer.
//!
//! ```text
//! rational   -12/35 | 7
//! ball       B(1/3; -1)
//! set        {B(0; 0), B(1/3; 0)}            {} is the empty set
//! step       {B(0; 0): 1/2, B(1/3; -1): 2 | tail 0}
//! affine     aff(a = <step>, b = <step>)
//! exponential exp{<step>}
//! polynomial poly{3/2 * <step>^2 * <step>}
//! event      event{N(B(0; 0)) = 2 & N({B(1; -1), B(2; -1)}) >= 1}
//! ```
//!
//! Whitespace is free and `#` starts a comment running to the end of the line.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::Serializer;
use thiserror::Error;

use crate::affine::AffineElement;
use crate::clopen::ClopenSet;
use crate::error::Error;
use crate::measure::IntensityMeasure;
use crate::padic::{Ball, Prime, Rational};
use crate::poisson::{CountPredicate, CylinderFunction, CylinderShape};
use crate::stepfn::{StepFunction, ValueKind};

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{line}:{column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    /// Byte range of the offending text.
    pub span: (usize, usize),
    pub message: String,
    /// The domain error behind a semantic failure.
    pub cause: Option<Box<Error>>,
}

pub fn format_rational(x: &Rational) -> String {
    if x.denom().is_one() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

pub(crate) fn serialize_rational<S: Serializer>(x: &Rational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&format_rational(x))
}

/// Any value the grammar can describe.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Literal {
    Rational(Rational),
    Ball(Ball),
    Set(ClopenSet),
    Step(StepFunction),
    Affine(AffineElement),
    Cylinder(CylinderFunction),
}

impl Literal {
    pub fn type_name(&self) -> &'static str {
        match self {
            Literal::Rational(_) => "rational",
            Literal::Ball(_) => "ball",
            Literal::Set(_) => "clopen set",
            Literal::Step(_) => "step function",
            Literal::Affine(_) => "affine element",
            Literal::Cylinder(_) => "cylinder function",
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Rational(q) => f.write_str(&format_rational(q)),
            Literal::Ball(b) => b.fmt(f),
            Literal::Set(s) => s.fmt(f),
            Literal::Step(s) => s.fmt(f),
            Literal::Affine(g) => g.fmt(f),
            Literal::Cylinder(c) => c.fmt(f),
        }
    }
}

impl fmt::Display for CountPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CountPredicate::Exactly(k) => write!(f, "= {k}"),
            CountPredicate::AtMost(k) => write!(f, "<= {k}"),
            CountPredicate::AtLeast(k) => write!(f, ">= {k}"),
        }
    }
}

impl fmt::Display for CylinderFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.shape() {
            CylinderShape::Exponential(g) => write!(f, "exp{{<{g}>}}"),
            CylinderShape::Polynomial {
                coefficient,
                factors,
            } => {
                write!(f, "poly{{")?;
                let mut terms = Vec::new();
                if !coefficient.is_one() || factors.is_empty() {
                    terms.push(format_rational(coefficient));
                }
                for (g, k) in factors {
                    if *k == 1 {
                        terms.push(format!("<{g}>"));
                    } else {
                        terms.push(format!("<{g}>^{k}"));
                    }
                }
                write!(f, "{}}}", terms.join(" * "))
            }
            CylinderShape::CountEvent(conditions) => {
                write!(f, "event{{")?;
                for (i, (s, pred)) in conditions.iter().enumerate() {
                    if i > 0 {
                        write!(f, " & ")?;
                    }
                    match s.balls() {
                        [b] => write!(f, "N({b}) {pred}")?,
                        _ => write!(f, "N({s}) {pred}")?,
                    }
                }
                write!(f, "}}")
            }
        }
    }
}

/// Parses any literal.
pub fn parse(input: &str, prime: Prime) -> Result<Literal, ParseError> {
    let mut parser = Parser::new(input, prime)?;
    let value = parser.literal()?;
    parser.finish()?;
    Ok(value)
}

/// `print`: the canonical text of a literal.
pub fn print(value: &Literal) -> String {
    value.to_string()
}

fn expect_type<T>(
    input: &str,
    prime: Prime,
    want: &'static str,
    pick: impl FnOnce(Literal) -> Result<T, Literal>,
) -> Result<T, ParseError> {
    let value = parse(input, prime)?;
    pick(value).map_err(|other| {
        let end = input.trim_end().len();
        error_at(
            input,
            (0, end),
            format!("expected {want}, found {}", other.type_name()),
        )
    })
}

pub fn parse_rational(input: &str, prime: Prime) -> Result<Rational, ParseError> {
    expect_type(input, prime, "rational", |v| match v {
        Literal::Rational(q) => Ok(q),
        other => Err(other),
    })
}

pub fn parse_ball(input: &str, prime: Prime) -> Result<Ball, ParseError> {
    expect_type(input, prime, "ball", |v| match v {
        Literal::Ball(b) => Ok(b),
        other => Err(other),
    })
}

/// A clopen set; a single ball is accepted as a one-ball set.
pub fn parse_set(input: &str, prime: Prime) -> Result<ClopenSet, ParseError> {
    expect_type(input, prime, "clopen set", |v| match v {
        Literal::Set(s) => Ok(s),
        Literal::Ball(b) => Ok(ClopenSet::from_ball(b)),
        other => Err(other),
    })
}

pub fn parse_step(input: &str, prime: Prime) -> Result<StepFunction, ParseError> {
    expect_type(input, prime, "step function", |v| match v {
        Literal::Step(s) => Ok(s),
        other => Err(other),
    })
}

pub fn parse_affine(input: &str, prime: Prime) -> Result<AffineElement, ParseError> {
    expect_type(input, prime, "affine element", |v| match v {
        Literal::Affine(g) => Ok(g),
        other => Err(other),
    })
}

pub fn parse_cylinder(input: &str, prime: Prime) -> Result<CylinderFunction, ParseError> {
    expect_type(input, prime, "cylinder function", |v| match v {
        Literal::Cylinder(c) => Ok(c),
        other => Err(other),
    })
}

/// An intensity measure given by its density, a step function with tail 1.
pub fn parse_measure(input: &str, prime: Prime) -> Result<IntensityMeasure, ParseError> {
    let density = parse_step(input, prime)?;
    IntensityMeasure::new(density).map_err(|e| semantic(input, (0, input.trim_end().len()), e))
}

fn position(input: &str, offset: usize) -> (usize, usize) {
    let before = &input[..offset.min(input.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

fn error_at(input: &str, span: (usize, usize), message: String) -> ParseError {
    let (line, column) = position(input, span.0);
    ParseError {
        line,
        column,
        span,
        message,
        cause: None,
    }
}

fn semantic(input: &str, span: (usize, usize), cause: Error) -> ParseError {
    let mut e = error_at(
        input,
        span,
        format!("{cause} in `{}`", &input[span.0..span.1]),
    );
    e.cause = Some(Box::new(cause));
    e
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Int(BigInt),
    Word(String),
    Sym(&'static str),
    End,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Int(n) => write!(f, "`{n}`"),
            Tok::Word(w) => write!(f, "`{w}`"),
            Tok::Sym(s) => write!(f, "`{s}`"),
            Tok::End => write!(f, "end of input"),
        }
    }
}

const SYMBOLS: [&str; 17] = [
    "<=", ">=", "(", ")", "{", "}", ";", ":", ",", "|", "/", "-", "<", ">", "^", "*", "&",
];

fn tokenize(input: &str) -> Result<Vec<(Tok, (usize, usize))>, ParseError> {
    let bytes = input.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    'outer: while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if c == b'#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let n = BigInt::from_str(&input[start..i]).expect("digits");
            out.push((Tok::Int(n), (start, i)));
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Word(input[start..i].to_string()), (start, i)));
            continue;
        }
        if c == b'=' {
            out.push((Tok::Sym("="), (i, i + 1)));
            i += 1;
            continue;
        }
        for s in SYMBOLS {
            if input[i..].starts_with(s) {
                out.push((Tok::Sym(s), (i, i + s.len())));
                i += s.len();
                continue 'outer;
            }
        }
        let ch = input[i..].chars().next().expect("in bounds");
        return Err(error_at(
            input,
            (i, i + ch.len_utf8()),
            format!("unexpected character `{ch}`"),
        ));
    }
    out.push((Tok::End, (input.len(), input.len())));
    Ok(out)
}

struct Parser<'a> {
    input: &'a str,
    prime: Prime,
    tokens: Vec<(Tok, (usize, usize))>,
    pos: usize,
}

type PResult<T> = Result<T, ParseError>;

impl<'a> Parser<'a> {
    fn new(input: &'a str, prime: Prime) -> PResult<Self> {
        Ok(Parser {
            input,
            prime,
            tokens: tokenize(input)?,
            pos: 0,
        })
    }

    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].0
    }

    fn span(&self) -> (usize, usize) {
        self.tokens[self.pos].1
    }

    /// Start of the current token up to the end of the previous one.
    fn since(&self, start: usize) -> (usize, usize) {
        let end = if self.pos == 0 { start } else { self.tokens[self.pos - 1].1 .1 };
        (start, end.max(start))
    }

    fn bump(&mut self) -> (Tok, (usize, usize)) {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, wanted: &str) -> ParseError {
        error_at(self.input, self.span(), format!("expected {wanted}, found {}", self.peek()))
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(t) if *t == s)
    }

    fn is_word(&self, w: &str) -> bool {
        matches!(self.peek(), Tok::Word(t) if t == w)
    }

    fn sym(&mut self, s: &str) -> PResult<()> {
        if self.is_sym(s) {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(&format!("`{s}`")))
        }
    }

    fn word(&mut self, w: &str) -> PResult<()> {
        if self.is_word(w) {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(&format!("`{w}`")))
        }
    }

    fn finish(&self) -> PResult<()> {
        match self.peek() {
            Tok::End => Ok(()),
            _ => Err(self.unexpected("end of input")),
        }
    }

    fn literal(&mut self) -> PResult<Literal> {
        match self.peek().clone() {
            Tok::Int(_) | Tok::Sym("-") => Ok(Literal::Rational(self.rational()?)),
            Tok::Word(w) => match w.as_str() {
                "B" => Ok(Literal::Ball(self.ball()?)),
                "aff" => Ok(Literal::Affine(self.affine()?)),
                "exp" | "poly" | "event" => Ok(Literal::Cylinder(self.cylinder()?)),
                _ => Err(self.unexpected("a literal")),
            },
            Tok::Sym("{") => self.brace(),
            _ => Err(self.unexpected("a literal")),
        }
    }

    fn natural(&mut self) -> PResult<BigInt> {
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(n)
            }
            _ => Err(self.unexpected("an integer")),
        }
    }

    fn small<T: TryFrom<BigInt>>(&mut self, what: &str) -> PResult<T> {
        let span = self.span();
        let n = self.natural()?;
        T::try_from(n).map_err(|_| error_at(self.input, span, format!("{what} out of range")))
    }

    fn rational(&mut self) -> PResult<Rational> {
        let start = self.span().0;
        let negative = self.is_sym("-");
        if negative {
            self.bump();
        }
        let num = self.natural()?;
        let den = if self.is_sym("/") {
            self.bump();
            self.natural()?
        } else {
            BigInt::one()
        };
        if den.is_zero() {
            return Err(error_at(self.input, self.since(start), "zero denominator".into()));
        }
        let q = Rational::new(num, den);
        Ok(if negative { -q } else { q })
    }

    fn ball(&mut self) -> PResult<Ball> {
        self.word("B")?;
        self.sym("(")?;
        let center = self.rational()?;
        self.sym(";")?;
        let negative = self.is_sym("-");
        if negative {
            self.bump();
        }
        let k: i64 = self.small("radius exponent")?;
        self.sym(")")?;
        Ok(Ball::new(self.prime, &center, if negative { -k } else { k }))
    }

    /// `{...}`: a clopen set or a step function.
    fn brace(&mut self) -> PResult<Literal> {
        let start = self.span().0;
        self.sym("{")?;
        if self.is_sym("}") {
            self.bump();
            return Ok(Literal::Set(ClopenSet::empty(self.prime)));
        }
        if self.is_sym("|") {
            return Ok(Literal::Step(self.step_rest(start, Vec::new())?));
        }
        let first = self.ball()?;
        if self.is_sym(":") {
            self.bump();
            let v = self.rational()?;
            let mut parts = vec![(first, v)];
            while self.is_sym(",") {
                self.bump();
                let b = self.ball()?;
                self.sym(":")?;
                parts.push((b, self.rational()?));
            }
            return Ok(Literal::Step(self.step_rest(start, parts)?));
        }
        let mut balls = vec![first];
        while self.is_sym(",") {
            self.bump();
            balls.push(self.ball()?);
        }
        self.sym("}")?;
        ClopenSet::new(self.prime, balls)
            .map(Literal::Set)
            .map_err(|e| semantic(self.input, self.since(start), e))
    }

    fn step_rest(&mut self, start: usize, parts: Vec<(Ball, Rational)>) -> PResult<StepFunction> {
        self.sym("|")?;
        self.word("tail")?;
        let tail = self.rational()?;
        self.sym("}")?;
        StepFunction::new(self.prime, ValueKind::Real, parts, tail)
            .map_err(|e| semantic(self.input, self.since(start), e))
    }

    fn step(&mut self) -> PResult<StepFunction> {
        let span = self.span();
        match self.brace()? {
            Literal::Step(s) => Ok(s),
            other => Err(error_at(
                self.input,
                (span.0, self.since(span.0).1),
                format!("expected step function, found {}", other.type_name()),
            )),
        }
    }

    fn affine(&mut self) -> PResult<AffineElement> {
        let start = self.span().0;
        self.word("aff")?;
        self.sym("(")?;
        self.word("a")?;
        self.sym("=")?;
        let a = self.step()?;
        self.sym(",")?;
        self.word("b")?;
        self.sym("=")?;
        let b = self.step()?;
        self.sym(")")?;
        AffineElement::new(a, b).map_err(|e| semantic(self.input, self.since(start), e))
    }

    fn bracketed_step(&mut self) -> PResult<StepFunction> {
        self.sym("<")?;
        let f = self.step()?;
        self.sym(">")?;
        Ok(f)
    }

    fn cylinder(&mut self) -> PResult<CylinderFunction> {
        let start = self.span().0;
        let (head, _) = self.bump();
        self.sym("{")?;
        let result = match head {
            Tok::Word(w) if w == "exp" => {
                let f = self.bracketed_step()?;
                self.sym("}")?;
                CylinderFunction::exponential(f)
            }
            Tok::Word(w) if w == "poly" => {
                let mut coefficient = Rational::one();
                let mut factors = Vec::new();
                loop {
                    if self.is_sym("<") {
                        let f = self.bracketed_step()?;
                        let k = if self.is_sym("^") {
                            self.bump();
                            self.small("exponent")?
                        } else {
                            1
                        };
                        factors.push((f, k));
                    } else {
                        coefficient *= self.rational()?;
                    }
                    if self.is_sym("*") {
                        self.bump();
                    } else {
                        break;
                    }
                }
                self.sym("}")?;
                CylinderFunction::polynomial(self.prime, coefficient, factors)
            }
            _ => {
                let mut conditions = Vec::new();
                if !self.is_sym("}") {
                    loop {
                        conditions.push(self.condition()?);
                        if self.is_sym("&") {
                            self.bump();
                        } else {
                            break;
                        }
                    }
                }
                self.sym("}")?;
                CylinderFunction::count_event(self.prime, conditions)
            }
        };
        result.map_err(|e| semantic(self.input, self.since(start), e))
    }

    fn condition(&mut self) -> PResult<(ClopenSet, CountPredicate)> {
        self.word("N")?;
        self.sym("(")?;
        let set = if self.is_word("B") {
            ClopenSet::from_ball(self.ball()?)
        } else {
            let span = self.span();
            match self.brace()? {
                Literal::Set(s) => s,
                other => {
                    return Err(error_at(
                        self.input,
                        (span.0, self.since(span.0).1),
                        format!("expected clopen set, found {}", other.type_name()),
                    ))
                }
            }
        };
        self.sym(")")?;
        let op = match self.peek() {
            Tok::Sym("=") => CountPredicate::Exactly,
            Tok::Sym("<=") => CountPredicate::AtMost,
            Tok::Sym(">=") => CountPredicate::AtLeast,
            _ => return Err(self.unexpected("`=`, `<=` or `>=`")),
        };
        self.bump();
        let k: u64 = self.small("count")?;
        Ok((set, op(k)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::padic::{integer, rational};

    fn p3() -> Prime {
        Prime::new(3).unwrap()
    }

    #[test]
    fn rationals() {
        assert_eq!(parse_rational("-12/35", p3()).unwrap(), rational(-12, 35));
        assert_eq!(parse_rational("6/4", p3()).unwrap(), rational(3, 2));
        assert_eq!(format_rational(&rational(-3, 2)), "-3/2");
        assert_eq!(format_rational(&integer(7)), "7");
        let e = parse_rational("1/0", p3()).unwrap_err();
        assert_eq!((e.line, e.column), (1, 1));
    }

    #[test]
    fn unit_ball() {
        assert_eq!(parse_ball("B(0;0)", p3()).unwrap(), Ball::unit(p3()));
        assert_eq!(parse_ball(" B( 3 ; -1 ) ", p3()).unwrap(), Ball::new(p3(), &integer(0), -1));
    }

    #[test]
    fn g0_round_trip() {
        let text = "aff(a = {B(0;0): 3 | tail 1}, b = {B(0;0): 0 | tail 0})";
        let g = parse_affine(text, p3()).unwrap();
        let want = crate::representation::scaling_on_unit_ball(p3(), integer(3));
        assert_eq!(g, want);
        assert_eq!(parse_affine(&g.to_string(), p3()).unwrap(), g);
    }

    #[test]
    fn overlapping_step_parts() {
        let e = parse("{B(0;0): 1, B(1;0): 2 | tail 0}", p3()).unwrap_err();
        assert!(matches!(e.cause.as_deref(), Some(Error::OverlappingParts(_, _))));
        assert_eq!(e.span, (0, 31));
    }

    #[test]
    fn zero_a_value() {
        let e = parse("aff(a = {B(0;0): 0 | tail 1}, b = {| tail 0})", p3()).unwrap_err();
        assert!(matches!(e.cause.as_deref(), Some(Error::InvalidAffine(_))));
    }

    #[test]
    fn syntax_positions() {
        let e = parse("{B(0;0): 1,\n  B(1/3;0) 2 | tail 0}", p3()).unwrap_err();
        assert_eq!((e.line, e.column), (2, 12));
        assert!(e.message.contains("expected `:`"), "{}", e.message);
        let e = parse("B(0;0) extra", p3()).unwrap_err();
        assert_eq!((e.line, e.column), (1, 8));
        let e = parse("B(0;0) @", p3()).unwrap_err();
        assert!(e.message.contains("unexpected character"));
    }

    #[test]
    fn cylinder_forms() {
        let e = parse_cylinder("event{N(B(0;0)) = 2 & N(B(1/3;0)) >= 1}", p3()).unwrap();
        assert_eq!(e.to_string(), "event{N(B(0; 0)) = 2 & N(B(1/3; 0)) >= 1}");
        let p = parse_cylinder("poly{<{B(0;0): 1 | tail 0}>^2}", p3()).unwrap();
        assert_eq!(p.degree(), Some(2));
        let c = parse_cylinder("poly{2 * 3/4}", p3()).unwrap();
        assert_eq!(c, CylinderFunction::constant(p3(), rational(3, 2)));
        assert_eq!(parse_cylinder(&c.to_string(), p3()).unwrap(), c);
        assert!(parse_cylinder("exp{<{B(0;0): 1 | tail 1}>}", p3()).is_err());
    }

    #[test]
    fn comments_and_type_errors() {
        let s = parse_set("# unit ball\n{B(0;0)}", p3()).unwrap();
        assert_eq!(s, ClopenSet::from_ball(Ball::unit(p3())));
        assert!(parse_step("B(0;0)", p3()).unwrap_err().message.contains("expected step function"));
        assert!(parse_measure("{B(0;0): -1 | tail 1}", p3()).is_err());
    }
}
