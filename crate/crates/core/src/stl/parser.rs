//! Recursive-descent parser for the concrete STL syntax.
//!
//! ```text
//! formula    = or
//! or         = and { "|" and }
//! and        = until { "&" until }
//! until      = unary [ "U" bounds unary ]
//! unary      = "!" unary | ("F" | "G") bounds unary | primary
//! primary    = "true" | "(" formula ")" | gated | comparison
//! gated      = "gate" "(" [ "!" ] name ")" "->" ( "(" comparison ")" | comparison )
//! comparison = linear ( ">=" | ">" | "<=" | "<" ) linear
//! linear     = term { ("+" | "-") term }
//! term       = [ "-" ] ( number [ "*" var ] | var )
//! var        = "x" digits            (1-based state component)
//! bounds     = "[" integer "," integer "]"
//! ```
//!
//! Strict comparisons are read as their non-strict counterparts.

use super::ast::{Formula, Predicate};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64, String),
    Ident(String),
    Sym(&'static str),
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
    line: usize,
    col: usize,
}

#[derive(Clone, Debug)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

const SYMBOLS: [&str; 14] = [
    "->", ">=", "<=", ">", "<", "(", ")", "[", "]", ",", "!", "&", "|", "+",
];

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Self {
            src,
            pos: 0,
            line: 1,
            col: 1,
        }
    }

    fn bump(&mut self, n: usize) {
        for ch in self.src[self.pos..self.pos + n].chars() {
            if ch == '\n' {
                self.line += 1;
                self.col = 1;
            } else {
                self.col += 1;
            }
        }
        self.pos += n;
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::Syntax {
            line: self.line,
            column: self.col,
            message: message.into(),
        }
    }

    fn tokens(mut self) -> Result<Vec<Spanned>> {
        let mut out = Vec::new();
        loop {
            let rest = &self.src[self.pos..];
            let Some(ch) = rest.chars().next() else {
                break;
            };
            if ch.is_whitespace() {
                self.bump(ch.len_utf8());
                continue;
            }
            let (line, col) = (self.line, self.col);
            if ch.is_ascii_digit() || ch == '.' {
                let len = rest
                    .char_indices()
                    .find(|&(i, c)| {
                        !(c.is_ascii_digit()
                            || c == '.'
                            || c == 'e'
                            || c == 'E'
                            || ((c == '-' || c == '+')
                                && i > 0
                                && matches!(rest.as_bytes()[i - 1], b'e' | b'E')))
                    })
                    .map_or(rest.len(), |(i, _)| i);
                let text = &rest[..len];
                let v: f64 = text.parse().map_err(|_| self.err(format!("bad number '{text}'")))?;
                out.push(Spanned {
                    tok: Tok::Num(v, text.to_string()),
                    line,
                    col,
                });
                self.bump(len);
                continue;
            }
            if ch.is_ascii_alphabetic() || ch == '_' {
                let len = rest
                    .char_indices()
                    .find(|&(_, c)| !(c.is_ascii_alphanumeric() || c == '_'))
                    .map_or(rest.len(), |(i, _)| i);
                out.push(Spanned {
                    tok: Tok::Ident(rest[..len].to_string()),
                    line,
                    col,
                });
                self.bump(len);
                continue;
            }
            let sym = SYMBOLS
                .iter()
                .chain(&["-", "*"])
                .find(|s| rest.starts_with(**s))
                .ok_or_else(|| self.err(format!("unexpected character '{ch}'")))?;
            out.push(Spanned {
                tok: Tok::Sym(sym),
                line,
                col,
            });
            self.bump(sym.len());
        }
        Ok(out)
    }
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    end: (usize, usize),
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.pos + k).map(|s| &s.tok)
    }

    fn here(&self) -> (usize, usize) {
        self.toks
            .get(self.pos)
            .map_or(self.end, |s| (s.line, s.col))
    }

    fn err(&self, message: impl Into<String>) -> Error {
        let (line, column) = self.here();
        Error::Syntax {
            line,
            column,
            message: message.into(),
        }
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|s| s.tok.clone());
        self.pos += 1;
        t
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Sym(x)) if *x == s) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> Result<()> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            Err(self.err(format!("expected '{s}'")))
        }
    }

    fn is_ident(&self, name: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(x)) if x == name)
    }

    fn formula(&mut self) -> Result<Formula> {
        let first = self.and()?;
        if !matches!(self.peek(), Some(Tok::Sym("|"))) {
            return Ok(first);
        }
        let mut parts = vec![first];
        while self.eat_sym("|") {
            parts.push(self.and()?);
        }
        Ok(Formula::Or(parts))
    }

    fn and(&mut self) -> Result<Formula> {
        let first = self.until()?;
        if !matches!(self.peek(), Some(Tok::Sym("&"))) {
            return Ok(first);
        }
        let mut parts = vec![first];
        while self.eat_sym("&") {
            parts.push(self.until()?);
        }
        Ok(Formula::And(parts))
    }

    fn until(&mut self) -> Result<Formula> {
        let lhs = self.unary()?;
        if self.is_ident("U") {
            self.pos += 1;
            let (a, b) = self.bounds()?;
            let rhs = self.unary()?;
            return Ok(Formula::until(a, b, lhs, rhs));
        }
        Ok(lhs)
    }

    fn bounds(&mut self) -> Result<(usize, usize)> {
        self.expect_sym("[")?;
        let a = self.integer()?;
        self.expect_sym(",")?;
        let b = self.integer()?;
        if a > b {
            return Err(self.err(format!("reversed bounds [{a},{b}]")));
        }
        self.expect_sym("]")?;
        Ok((a, b))
    }

    fn integer(&mut self) -> Result<usize> {
        match self.peek().cloned() {
            Some(Tok::Num(_, text)) => {
                let v = text
                    .parse::<usize>()
                    .map_err(|_| self.err(format!("bound '{text}' is not a nonnegative integer")))?;
                self.pos += 1;
                Ok(v)
            }
            _ => Err(self.err("expected an integer bound")),
        }
    }

    fn unary(&mut self) -> Result<Formula> {
        if self.eat_sym("!") {
            return Ok(Formula::not(self.unary()?));
        }
        if (self.is_ident("F") || self.is_ident("G"))
            && matches!(self.peek_at(1), Some(Tok::Sym("[")))
        {
            let always = self.is_ident("G");
            self.pos += 1;
            let (a, b) = self.bounds()?;
            let body = self.unary()?;
            return Ok(if always {
                Formula::always(a, b, body)
            } else {
                Formula::eventually(a, b, body)
            });
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Formula> {
        if self.is_ident("true") {
            self.pos += 1;
            return Ok(Formula::True);
        }
        if self.is_ident("gate") {
            return self.gated();
        }
        if self.eat_sym("(") {
            let f = self.formula()?;
            self.expect_sym(")")?;
            return Ok(f);
        }
        Ok(Formula::Pred(self.comparison()?))
    }

    fn gated(&mut self) -> Result<Formula> {
        self.pos += 1;
        self.expect_sym("(")?;
        let negated = self.eat_sym("!");
        let name = match self.next() {
            Some(Tok::Ident(name)) => name,
            _ => {
                self.pos -= 1;
                return Err(self.err("expected a signal name"));
            }
        };
        self.expect_sym(")")?;
        self.expect_sym("->")?;
        let pred = if self.eat_sym("(") {
            let p = self.comparison()?;
            self.expect_sym(")")?;
            p
        } else {
            self.comparison()?
        };
        Ok(Formula::Pred(pred.gated(name, negated)))
    }

    fn comparison(&mut self) -> Result<Predicate> {
        let (lc, lk) = self.linear()?;
        let flip = match self.next() {
            Some(Tok::Sym(">=" | ">")) => false,
            Some(Tok::Sym("<=" | "<")) => true,
            _ => {
                self.pos -= 1;
                return Err(self.err("expected a comparison operator"));
            }
        };
        let (rc, rk) = self.linear()?;
        let n = lc.len().max(rc.len());
        let mut coeffs = vec![0.0; n];
        for (i, c) in lc.iter().enumerate() {
            coeffs[i] += c;
        }
        for (i, c) in rc.iter().enumerate() {
            coeffs[i] -= c;
        }
        let mut constant = lk - rk;
        if flip {
            coeffs.iter_mut().for_each(|c| *c = -*c);
            constant = -constant;
        }
        Ok(Predicate::new(coeffs, constant))
    }

    /// Returns `(coefficients, constant)` of a linear expression.
    fn linear(&mut self) -> Result<(Vec<f64>, f64)> {
        let mut coeffs = Vec::new();
        let mut constant = 0.0;
        let mut sign = 1.0;
        loop {
            if self.eat_sym("-") {
                sign = -sign;
                continue;
            }
            let (c, var) = self.term()?;
            match var {
                Some(k) => {
                    if coeffs.len() < k {
                        coeffs.resize(k, 0.0);
                    }
                    coeffs[k - 1] += sign * c;
                }
                None => constant += sign * c,
            }
            if self.eat_sym("+") {
                sign = 1.0;
            } else if self.eat_sym("-") {
                sign = -1.0;
            } else {
                return Ok((coeffs, constant));
            }
        }
    }

    fn term(&mut self) -> Result<(f64, Option<usize>)> {
        let mut sign = 1.0;
        while self.eat_sym("-") {
            sign = -sign;
        }
        match self.peek().cloned() {
            Some(Tok::Num(v, _)) => {
                self.pos += 1;
                if self.eat_sym("*") {
                    let k = self.var()?;
                    Ok((sign * v, Some(k)))
                } else {
                    Ok((sign * v, None))
                }
            }
            Some(Tok::Ident(_)) => Ok((sign, Some(self.var()?))),
            _ => Err(self.err("expected a number or a state variable")),
        }
    }

    fn var(&mut self) -> Result<usize> {
        match self.peek().cloned() {
            Some(Tok::Ident(name)) => {
                let k = name
                    .strip_prefix('x')
                    .and_then(|d| d.parse::<usize>().ok())
                    .filter(|k| *k >= 1)
                    .ok_or_else(|| self.err(format!("unknown variable '{name}'")))?;
                self.pos += 1;
                Ok(k)
            }
            _ => Err(self.err("expected a state variable")),
        }
    }
}

pub fn parse(text: &str) -> Result<Formula> {
    let toks = Lexer::new(text).tokens()?;
    let mut end = (1, 1);
    for ch in text.chars() {
        if ch == '\n' {
            end = (end.0 + 1, 1);
        } else {
            end.1 += 1;
        }
    }
    let mut p = Parser { toks, pos: 0, end };
    let f = p.formula()?;
    if p.pos < p.toks.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(f)
}
