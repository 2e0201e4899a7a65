//! Small arithmetic expressions over `j`, `n`, `k` (and `c`) used as audit
//! bounds, e.g. `2*max(1, clog(j^k, n)) - 1`.
//!
//! Arithmetic, `floor`, `ceil`, `min`, `max`, integer powers and
//! `clog(x, b)` (smallest integer `i` with `b^i >= x`) are exact.
//! `log2` is exact on powers of two; otherwise `log2`, `ln`, `sqrt` and
//! fractional powers go through `f64` and the result is converted exactly.
//! `if(a <= b, x, y)` evaluates only the chosen branch, and `alpha(j)` reads
//! the priority function when one is supplied.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::priority::PriorityFunction;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum BoundError {
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("unknown function `{0}` or wrong argument count")]
    UnknownFunction(String),
    #[error("{0}")]
    Domain(String),
}

#[derive(Debug, Clone, PartialEq)]
enum Expr {
    Num(Scalar),
    Var(String),
    Neg(Box<Expr>),
    Bin(Op, Box<Expr>, Box<Expr>),
    Call(String, Vec<Expr>),
    If(Box<Cond>, Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Op {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, PartialEq)]
struct Cond {
    lhs: Expr,
    cmp: String,
    rhs: Expr,
}

/// A parsed bound expression; `Display` gives back the source text.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundSpec {
    source: String,
    expr: Expr,
}

impl fmt::Display for BoundSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

/// Values of the free variables.
#[derive(Debug, Clone, Default)]
pub struct BoundVars<'a> {
    pub j: usize,
    pub n: usize,
    pub k: u32,
    pub c: u32,
    pub alpha: Option<&'a PriorityFunction>,
}

struct Parser<'s> {
    src: &'s [u8],
    pos: usize,
}

impl Parser<'_> {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T, BoundError> {
        Err(BoundError::Parse { pos: self.pos, msg: msg.into() })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<(), BoundError> {
        if self.eat(c) {
            Ok(())
        } else {
            self.err(format!("expected `{}`", c as char))
        }
    }

    fn expr(&mut self) -> Result<Expr, BoundError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(b'+') => Op::Add,
                Some(b'-') => Op::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(self.term()?));
        }
    }

    fn term(&mut self) -> Result<Expr, BoundError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(b'*') => Op::Mul,
                Some(b'/') => Op::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(self.unary()?));
        }
    }

    fn unary(&mut self) -> Result<Expr, BoundError> {
        if self.eat(b'-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        let base = self.atom()?;
        if self.eat(b'^') {
            // right associative, binds tighter than unary minus on the left
            return Ok(Expr::Bin(Op::Pow, Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, BoundError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.src.len() && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_') {
                    self.pos += 1;
                }
                let name = String::from_utf8_lossy(&self.src[start..self.pos]).into_owned();
                if !self.eat(b'(') {
                    return Ok(Expr::Var(name));
                }
                if name == "if" {
                    let cond = self.cond()?;
                    self.expect(b',')?;
                    let a = self.expr()?;
                    self.expect(b',')?;
                    let b = self.expr()?;
                    self.expect(b')')?;
                    return Ok(Expr::If(Box::new(cond), Box::new(a), Box::new(b)));
                }
                let mut args = vec![self.expr()?];
                while self.eat(b',') {
                    args.push(self.expr()?);
                }
                self.expect(b')')?;
                Ok(Expr::Call(name, args))
            }
            Some(_) => self.err("unexpected character"),
            None => self.err("unexpected end of input"),
        }
    }

    fn number(&mut self) -> Result<Expr, BoundError> {
        let start = self.pos;
        while self.pos < self.src.len() && (self.src[self.pos].is_ascii_digit() || self.src[self.pos] == b'.') {
            self.pos += 1;
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        match text.parse::<Scalar>() {
            Ok(s) => Ok(Expr::Num(s)),
            Err(_) => self.err(format!("bad number `{text}`")),
        }
    }

    fn cond(&mut self) -> Result<Cond, BoundError> {
        let lhs = self.expr()?;
        self.skip_ws();
        let rest = &self.src[self.pos..];
        let cmp = ["<=", ">=", "==", "!=", "<", ">"]
            .into_iter()
            .find(|op| rest.starts_with(op.as_bytes()));
        let Some(cmp) = cmp else {
            return self.err("expected a comparison");
        };
        self.pos += cmp.len();
        let rhs = self.expr()?;
        Ok(Cond { lhs, cmp: cmp.to_string(), rhs })
    }
}

impl std::str::FromStr for BoundSpec {
    type Err = BoundError;

    fn from_str(s: &str) -> Result<BoundSpec, BoundError> {
        let mut p = Parser { src: s.as_bytes(), pos: 0 };
        let expr = p.expr()?;
        if p.peek().is_some() {
            return p.err("trailing input");
        }
        Ok(BoundSpec { source: s.to_string(), expr })
    }
}

fn from_f64(v: f64, what: &str) -> Result<Scalar, BoundError> {
    BigRational::from_float(v)
        .map(Scalar::from_big)
        .ok_or_else(|| BoundError::Domain(format!("{what} is not finite")))
}

/// `Some(e)` when `x = 2^e` exactly.
fn exact_log2(x: &BigRational) -> Option<i64> {
    let is_pow2 = |v: &BigInt| v.is_positive() && (v & (v - BigInt::one())).is_zero();
    if !is_pow2(x.numer()) || !is_pow2(x.denom()) {
        return None;
    }
    Some(x.numer().bits() as i64 - x.denom().bits() as i64)
}

fn pow_int(base: &Scalar, e: &BigInt) -> Result<Scalar, BoundError> {
    let mag = e.abs().to_u32().ok_or_else(|| BoundError::Domain("exponent too large".into()))?;
    if base.is_zero() && e.is_negative() {
        return Err(BoundError::Domain("0 raised to a negative power".into()));
    }
    let b = base.to_big();
    let mut out = BigRational::one();
    for _ in 0..mag {
        out *= &b;
    }
    Ok(Scalar::from_big(if e.is_negative() { out.recip() } else { out }))
}

impl BoundSpec {
    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval(&self, vars: &BoundVars) -> Result<Scalar, BoundError> {
        eval(&self.expr, vars)
    }
}

fn eval(e: &Expr, vars: &BoundVars) -> Result<Scalar, BoundError> {
    match e {
        Expr::Num(s) => Ok(s.clone()),
        Expr::Var(name) => match name.as_str() {
            "j" => Ok(Scalar::from(vars.j)),
            "n" => Ok(Scalar::from(vars.n)),
            "k" => Ok(Scalar::from(vars.k as u64)),
            "c" => Ok(Scalar::from(vars.c as u64)),
            _ => Err(BoundError::UnknownVariable(name.clone())),
        },
        Expr::Neg(a) => Ok(-eval(a, vars)?),
        Expr::Bin(op, a, b) => {
            let (x, y) = (eval(a, vars)?, eval(b, vars)?);
            match op {
                Op::Add => Ok(x + y),
                Op::Sub => Ok(x - y),
                Op::Mul => Ok(x * y),
                Op::Div if y.is_zero() => Err(BoundError::Domain("division by zero".into())),
                Op::Div => Ok(x / y),
                Op::Pow if y.is_integer() => pow_int(&x, &y.numer()),
                Op::Pow if x.is_negative() => Err(BoundError::Domain("fractional power of a negative".into())),
                Op::Pow => from_f64(x.to_f64().powf(y.to_f64()), "power"),
            }
        }
        Expr::If(cond, a, b) => {
            let (l, r) = (eval(&cond.lhs, vars)?, eval(&cond.rhs, vars)?);
            let holds = match cond.cmp.as_str() {
                "<=" => l <= r,
                ">=" => l >= r,
                "<" => l < r,
                ">" => l > r,
                "==" => l == r,
                _ => l != r,
            };
            eval(if holds { a } else { b }, vars)
        }
        Expr::Call(name, args) => {
            let unknown = || BoundError::UnknownFunction(name.clone());
            let vals = args.iter().map(|a| eval(a, vars)).collect::<Result<Vec<_>, _>>()?;
            let positive = |v: &Scalar, f: &str| {
                if v.is_positive() {
                    Ok(())
                } else {
                    Err(BoundError::Domain(format!("{f} of a non-positive value")))
                }
            };
            match (name.as_str(), vals.as_slice()) {
                ("floor", [x]) => Ok(Scalar::from_bigint(x.floor())),
                ("ceil", [x]) => Ok(Scalar::from_bigint(x.ceil())),
                ("min", [x, rest @ ..]) => Ok(rest.iter().fold(x.clone(), |a, b| a.min(b.clone()))),
                ("max", [x, rest @ ..]) => Ok(rest.iter().fold(x.clone(), |a, b| a.max(b.clone()))),
                ("log2", [x]) => {
                    positive(x, "log2")?;
                    match exact_log2(&x.to_big()) {
                        Some(e) => Ok(Scalar::from_int(e)),
                        None => from_f64(x.to_f64().log2(), "log2"),
                    }
                }
                ("ln", [x]) => {
                    positive(x, "ln")?;
                    from_f64(x.to_f64().ln(), "ln")
                }
                ("sqrt", [x]) if !x.is_negative() => from_f64(x.to_f64().sqrt(), "sqrt"),
                ("clog", [x, b]) => {
                    if *b <= Scalar::ONE {
                        return Err(BoundError::Domain("clog base must exceed 1".into()));
                    }
                    positive(x, "clog")?;
                    let mut i = 0i64;
                    let mut acc = Scalar::ONE;
                    while acc < *x {
                        acc = &acc * b;
                        i += 1;
                    }
                    let mut acc = Scalar::ONE;
                    while &acc / b >= *x {
                        acc = &acc / b;
                        i -= 1;
                    }
                    Ok(Scalar::from_int(i))
                }
                ("alpha", [x]) => {
                    let f = vars.alpha.ok_or_else(|| BoundError::Domain("alpha(j) needs a priority function".into()))?;
                    let j = x.to_big().to_integer().to_usize().filter(|&j| x.is_integer() && j >= 1 && j <= f.n_max());
                    match j {
                        Some(j) => Ok(f.alpha(j).clone()),
                        None => Err(BoundError::Domain(format!("alpha({x}) outside 1..={}", f.n_max()))),
                    }
                }
                _ => Err(unknown()),
            }
        }
    }
}

/// Default bounds per embedding mode, as spec strings.
pub mod defaults {
    pub const TREE_DISTORTION: &str = "1";
    pub const TREE_DIMENSION: &str = "40*(log2(j)+2)";
    pub const LINF_DISTORTION: &str = "2*min(k, max(1, clog(j^k, n)))-1";
    pub const LINF_DIMENSION_DISTORTION: &str = "if(j <= 2, 1, 2*k*clog(clog(j, 2), 2)+1)";
    pub const ULTRAMETRIC: &str = "2*alpha(j)";
    pub const SPANNING_TREE: &str = "1024*alpha(j)";
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frechet::{dimension_mode_bound, distortion_mode_bound};
    use crate::priority::default_priority_function;

    fn ev(s: &str, j: usize, n: usize, k: u32) -> Scalar {
        s.parse::<BoundSpec>().unwrap().eval(&BoundVars { j, n, k, c: 16, alpha: None }).unwrap()
    }

    #[test]
    fn arithmetic_and_precedence() {
        assert_eq!(ev("1 + 2*3", 1, 1, 1), Scalar::from_int(7));
        assert_eq!(ev("-2^2", 1, 1, 1), Scalar::from_int(-4));
        assert_eq!(ev("2^3^2", 1, 1, 1), Scalar::from_int(512));
        assert_eq!(ev("(j+1)/n", 3, 8, 1), Scalar::new(1, 2));
        assert_eq!(ev("2^-2", 1, 1, 1), Scalar::new(1, 4));
        assert_eq!(ev("1.25*4", 1, 1, 1), Scalar::from_int(5));
    }

    #[test]
    fn exact_logs() {
        assert_eq!(ev("log2(j)", 256, 1, 1), Scalar::from_int(8));
        assert_eq!(ev("log2(1/8)", 1, 1, 1), Scalar::from_int(-3));
        assert_eq!(ev("ceil(k*log2(j)/log2(n))", 16, 256, 2), Scalar::ONE);
        assert_eq!(ev("clog(j^k, n)", 10, 100, 2), Scalar::ONE);
        assert_eq!(ev("clog(j^k, n)", 11, 100, 2), Scalar::from_int(2));
        assert_eq!(ev("clog(1, 2)", 1, 1, 1), Scalar::ZERO);
        assert_eq!(ev("clog(1/3, 2)", 1, 1, 1), Scalar::from_int(-1));
    }

    #[test]
    fn defaults_match_closed_forms() {
        for n in [2usize, 5, 64, 256, 1000] {
            for k in 1..=5u32 {
                for j in 1..=n {
                    let got = ev(defaults::LINF_DISTORTION, j, n, k);
                    assert_eq!(got, Scalar::from(distortion_mode_bound(j, n, k)), "j={j} n={n} k={k}");
                    let got = ev(defaults::LINF_DIMENSION_DISTORTION, j, n, k);
                    assert_eq!(got, Scalar::from(dimension_mode_bound(j, k)), "j={j} k={k}");
                }
            }
        }
    }

    #[test]
    fn alpha_and_conditionals() {
        let f = default_priority_function(10);
        let spec: BoundSpec = defaults::ULTRAMETRIC.parse().unwrap();
        let v = spec.eval(&BoundVars { j: 3, n: 10, k: 0, c: 0, alpha: Some(&f) }).unwrap();
        assert_eq!(v, Scalar::from_int(2) * f.alpha(3));
        assert!(spec.eval(&BoundVars { j: 11, n: 10, k: 0, c: 0, alpha: Some(&f) }).is_err());
        assert_eq!(ev("if(j <= 2, 1, log2(0))", 2, 1, 1), Scalar::ONE);
    }

    #[test]
    fn errors() {
        assert!(matches!("1 +".parse::<BoundSpec>(), Err(BoundError::Parse { .. })));
        assert!(matches!("(1".parse::<BoundSpec>(), Err(BoundError::Parse { .. })));
        assert!(matches!("1 2".parse::<BoundSpec>(), Err(BoundError::Parse { .. })));
        let z: BoundSpec = "q + 1".parse().unwrap();
        assert_eq!(z.eval(&BoundVars::default()), Err(BoundError::UnknownVariable("q".into())));
        let z: BoundSpec = "foo(1)".parse().unwrap();
        assert!(matches!(z.eval(&BoundVars::default()), Err(BoundError::UnknownFunction(_))));
        let z: BoundSpec = "1/(j-j)".parse().unwrap();
        assert!(matches!(z.eval(&BoundVars::default()), Err(BoundError::Domain(_))));
        assert_eq!("2*j".parse::<BoundSpec>().unwrap().to_string(), "2*j");
    }
}
