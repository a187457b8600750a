//! Formal Green-function monomials and their power-counting exponents.
//!
//! Text form, one monomial per line:
//!
//! ```text
//! N^{α+1} E[u(G,3)] E[e(A,2,i1,i2) e(B,2,i3,i3)] E[au(A,7)]
//! ```
//!
//! `u(L,m)` is the normalised trace of `L^m` under its own expectation,
//! `au(L,m)` the centred trace `⟨L^m⟩`, and `e(L,m,x,y)` the entry `(L^m)_{xy}`.
//! Labels are one capital letter with an optional `*`.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
    pub expected: Vec<String>,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}: {}", self.line, self.column, self.message)?;
        if !self.expected.is_empty() {
            write!(f, " (expected {})", self.expected.join(" or "))?;
        }
        Ok(())
    }
}

impl std::error::Error for ParseError {}

/// `t = constant + alpha·α + beta·β` for the power `N^t`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Exponent {
    pub constant: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl Exponent {
    pub fn eval(&self, alpha: f64, beta: f64) -> f64 {
        self.constant + self.alpha * alpha + self.beta * beta
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.alpha == 0.0 && self.beta == 0.0 {
            return write!(f, "{}", self.constant);
        }
        let mut parts = String::new();
        for (coef, sym) in [(self.alpha, "α"), (self.beta, "β")] {
            if coef == 0.0 {
                continue;
            }
            if !parts.is_empty() && coef > 0.0 {
                parts.push('+');
            }
            match coef {
                c if c == 1.0 => parts.push_str(sym),
                c if c == -1.0 => {
                    parts.push('-');
                    parts.push_str(sym);
                }
                c => parts.push_str(&format!("{c}{sym}")),
            }
        }
        if self.constant != 0.0 {
            if self.constant > 0.0 {
                parts.push('+');
            }
            parts.push_str(&self.constant.to_string());
        }
        write!(f, "{{{parts}}}")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Label {
    pub letter: char,
    pub adjoint: bool,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.letter, if self.adjoint { "*" } else { "" })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Atom {
    Underline { label: Label, power: u32 },
    AngleUnderline { label: Label, power: u32 },
    Entry { label: Label, power: u32, row: u32, col: u32 },
}

impl Atom {
    pub fn power(&self) -> u32 {
        match *self {
            Atom::Underline { power, .. } | Atom::AngleUnderline { power, .. } | Atom::Entry { power, .. } => power,
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Underline { label, power } => write!(f, "u({label},{power})"),
            Atom::AngleUnderline { label, power } => write!(f, "au({label},{power})"),
            Atom::Entry { label, power, row, col } => write!(f, "e({label},{power},i{row},i{col})"),
        }
    }
}

/// One expectation `E[...]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Factor {
    pub atoms: Vec<Atom>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FormalMonomial {
    pub t: Exponent,
    pub factors: Vec<Factor>,
}

impl fmt::Display for FormalMonomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "N^{}", self.t)?;
        for factor in &self.factors {
            let atoms: Vec<String> = factor.atoms.iter().map(Atom::to_string).collect();
            write!(f, " E[{}]", atoms.join(" "))?;
        }
        Ok(())
    }
}

struct Parser {
    chars: Vec<char>,
    pos: usize,
}

impl Parser {
    fn new(text: &str) -> Self {
        Parser { chars: text.chars().collect(), pos: 0 }
    }

    fn location(&self, pos: usize) -> (usize, usize) {
        let mut line = 1;
        let mut col = 1;
        for &c in self.chars.iter().take(pos) {
            if c == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
        }
        (line, col)
    }

    fn error_at(&self, pos: usize, message: impl Into<String>, expected: &[&str]) -> ParseError {
        let (line, column) = self.location(pos);
        ParseError { line, column, message: message.into(), expected: expected.iter().map(|s| s.to_string()).collect() }
    }

    fn skip_ws(&mut self) {
        while self.chars.get(self.pos).is_some_and(|c| c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }

    fn found(&mut self) -> String {
        match self.peek() {
            Some(c) => format!("found '{c}'"),
            None => "found end of input".to_string(),
        }
    }

    fn starts_with(&mut self, lit: &str) -> bool {
        self.skip_ws();
        let lit: Vec<char> = lit.chars().collect();
        self.chars.get(self.pos..self.pos + lit.len()) == Some(&lit[..])
    }

    fn eat(&mut self, lit: &str) -> bool {
        if self.starts_with(lit) {
            self.pos += lit.chars().count();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, lit: &str) -> std::result::Result<(), ParseError> {
        if self.eat(lit) {
            Ok(())
        } else {
            let msg = self.found();
            Err(self.error_at(self.pos, msg, &[&format!("'{lit}'")]))
        }
    }

    /// Unsigned decimal with optional fraction and exponent.
    fn number(&mut self) -> Option<f64> {
        self.skip_ws();
        let digits = |p: &Self, mut i: usize| {
            while p.chars.get(i).is_some_and(|c| c.is_ascii_digit()) {
                i += 1;
            }
            i
        };
        let start = self.pos;
        let mut end = digits(self, start);
        if self.chars.get(end) == Some(&'.') {
            end = digits(self, end + 1);
        }
        if end == start || (end == start + 1 && self.chars[start] == '.') {
            return None;
        }
        if matches!(self.chars.get(end), Some('e' | 'E')) {
            let mut k = end + 1;
            if matches!(self.chars.get(k), Some('+' | '-')) {
                k += 1;
            }
            let after = digits(self, k);
            if after > k {
                end = after;
            }
        }
        let v = self.chars[start..end].iter().collect::<String>().parse().ok()?;
        self.pos = end;
        Some(v)
    }

    fn integer(&mut self, what: &str) -> std::result::Result<u32, ParseError> {
        self.skip_ws();
        let start = self.pos;
        while self.chars.get(self.pos).is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        if start == self.pos {
            let msg = self.found();
            return Err(self.error_at(start, msg, &[what]));
        }
        let s: String = self.chars[start..self.pos].iter().collect();
        s.parse().map_err(|_| self.error_at(start, format!("{what} out of range"), &[]))
    }

    fn symbol(&mut self) -> Option<char> {
        for (lit, sym) in [("alpha", 'a'), ("α", 'a'), ("beta", 'b'), ("β", 'b')] {
            if self.eat(lit) {
                return Some(sym);
            }
        }
        None
    }

    fn affine(&mut self) -> std::result::Result<Exponent, ParseError> {
        let mut e = Exponent::default();
        let mut first = true;
        loop {
            let sign = if self.eat("+") {
                1.0
            } else if self.eat("-") {
                -1.0
            } else if first {
                1.0
            } else {
                return Ok(e);
            };
            first = false;
            let start = self.pos;
            let coef = self.number();
            if coef.is_some() {
                self.eat("*");
            }
            match (coef, self.symbol()) {
                (c, Some('a')) => e.alpha += sign * c.unwrap_or(1.0),
                (c, Some(_)) => e.beta += sign * c.unwrap_or(1.0),
                (Some(c), None) => e.constant += sign * c,
                (None, None) => {
                    let msg = self.found();
                    return Err(self.error_at(start.max(self.pos), msg, &["number", "'α'", "'β'"]));
                }
            }
        }
    }

    fn exponent(&mut self) -> std::result::Result<Exponent, ParseError> {
        if self.eat("{") {
            let e = self.affine()?;
            self.expect("}")?;
            return Ok(e);
        }
        let negative = self.eat("-");
        let start = self.pos;
        match self.number() {
            Some(v) => Ok(Exponent { constant: if negative { -v } else { v }, ..Default::default() }),
            None => {
                let msg = self.found();
                Err(self.error_at(start, msg, &["number", "'{'"]))
            }
        }
    }

    fn label(&mut self) -> std::result::Result<Label, ParseError> {
        self.skip_ws();
        let start = self.pos;
        let mut end = start;
        while self.chars.get(end).is_some_and(|c| c.is_alphanumeric() || *c == '*' || *c == '_') {
            end += 1;
        }
        let word: String = self.chars[start..end].iter().collect();
        let mut it = word.chars();
        let label = match (it.next(), it.next(), it.next()) {
            (Some(c), None, None) if c.is_ascii_uppercase() => Label { letter: c, adjoint: false },
            (Some(c), Some('*'), None) if c.is_ascii_uppercase() => Label { letter: c, adjoint: true },
            _ => {
                let shown = if word.is_empty() { self.found() } else { format!("unknown label '{word}'") };
                return Err(self.error_at(start, shown, &["label such as G, G*, F, F*"]));
            }
        };
        self.pos = end;
        Ok(label)
    }

    fn power(&mut self) -> std::result::Result<u32, ParseError> {
        self.skip_ws();
        let start = self.pos;
        let m = self.integer("power")?;
        if m < 1 {
            return Err(self.error_at(start, "power m must be at least 1", &[]));
        }
        Ok(m)
    }

    fn index(&mut self) -> std::result::Result<u32, ParseError> {
        self.skip_ws();
        let start = self.pos;
        if !self.eat("i") {
            let found = self.found();
            return Err(self.error_at(start, format!("malformed index, {found}"), &["index such as i1"]));
        }
        if !self.chars.get(self.pos).is_some_and(|c| c.is_ascii_digit()) {
            return Err(self.error_at(start, "malformed index", &["index such as i1"]));
        }
        let k = self.integer("index number")?;
        if k < 1 {
            return Err(self.error_at(start, "malformed index: numbering starts at i1", &[]));
        }
        Ok(k)
    }

    fn atom(&mut self) -> std::result::Result<Atom, ParseError> {
        let atom = if self.eat("au(") {
            let label = self.label()?;
            self.expect(",")?;
            Atom::AngleUnderline { label, power: self.power()? }
        } else if self.eat("u(") {
            let label = self.label()?;
            self.expect(",")?;
            Atom::Underline { label, power: self.power()? }
        } else if self.eat("e(") {
            let label = self.label()?;
            self.expect(",")?;
            let power = self.power()?;
            self.expect(",")?;
            let row = self.index()?;
            self.expect(",")?;
            let col = self.index()?;
            Atom::Entry { label, power, row, col }
        } else {
            let msg = self.found();
            return Err(self.error_at(self.pos, msg, &["'u('", "'au('", "'e('"]));
        };
        self.expect(")")?;
        Ok(atom)
    }

    fn factor(&mut self) -> std::result::Result<Factor, ParseError> {
        let start = self.pos;
        self.expect("E[")?;
        let mut atoms = vec![self.atom()?];
        while !self.eat("]") {
            if self.peek().is_none() {
                return Err(self.error_at(self.pos, "unterminated expectation", &["']'"]));
            }
            atoms.push(self.atom()?);
        }
        if atoms.len() > 1 && atoms.iter().any(|a| matches!(a, Atom::Underline { .. })) {
            return Err(self.error_at(start, "an expected trace u(..) must stand alone in its expectation", &[]));
        }
        Ok(Factor { atoms })
    }

    fn monomial(&mut self) -> std::result::Result<FormalMonomial, ParseError> {
        self.expect("N^")?;
        let t = self.exponent()?;
        let mut factors = vec![self.factor()?];
        while self.peek().is_some() {
            if !self.starts_with("E[") {
                let msg = self.found();
                return Err(self.error_at(self.pos, msg, &["'E['", "end of input"]));
            }
            factors.push(self.factor()?);
        }
        Ok(FormalMonomial { t, factors })
    }
}

pub fn parse_monomial(text: &str) -> std::result::Result<FormalMonomial, ParseError> {
    Parser::new(text).monomial()
}

/// The six counters `ν₁ … ν₆`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NuCounters(pub [u32; 6]);

impl FormalMonomial {
    fn atoms(&self) -> impl Iterator<Item = &Atom> {
        self.factors.iter().flat_map(|f| f.atoms.iter())
    }

    pub fn nu_counters(&self) -> NuCounters {
        let mut nu = [0u32; 6];
        // index -> (occurrences, appears off-diagonally)
        let mut idx: BTreeMap<u32, (u32, bool)> = BTreeMap::new();
        for a in self.atoms() {
            match *a {
                Atom::Underline { power, .. } => {
                    nu[0] += power - 1;
                    if power >= 2 {
                        nu[2] += 1;
                    }
                }
                Atom::AngleUnderline { power, .. } => {
                    nu[1] += power - 1;
                    nu[3] += 1;
                }
                Atom::Entry { power, row, col, .. } => {
                    nu[1] += power - 1;
                    let off = row != col;
                    for i in [row, col] {
                        let e = idx.entry(i).or_default();
                        e.0 += 1;
                        e.1 |= off;
                    }
                }
            }
        }
        for (count, off) in idx.values() {
            if count % 2 == 1 {
                nu[4] += 1;
            } else if *off {
                nu[5] += 1;
            }
        }
        NuCounters(nu)
    }

    /// Number of index symbols, i.e. the largest `k` among `i_k`.
    pub fn index_count(&self) -> u32 {
        self.atoms()
            .filter_map(|a| match a {
                Atom::Entry { row, col, .. } => Some((*row).max(*col)),
                _ => None,
            })
            .max()
            .unwrap_or(0)
    }
}

pub fn nu_counters(p: &FormalMonomial) -> NuCounters {
    p.nu_counters()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentReport {
    pub nu: [u32; 6],
    pub n: u32,
    pub t: f64,
    pub b0: f64,
    pub b1: f64,
    pub b: f64,
    pub bstar: f64,
    pub chi: f64,
    pub chi_tilde: f64,
}

/// Exponents at `α = −log_N η` and `β = −log_N ω`, `0 ≤ β ≤ α < 1`.
pub fn exponents(p: &FormalMonomial, alpha: f64, beta: f64) -> Result<ExponentReport> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::domain("alpha", alpha));
    }
    if !(0.0 <= beta && beta <= alpha) {
        return Err(Error::domain("beta", beta));
    }
    let NuCounters(nu) = p.nu_counters();
    let v = nu.map(f64::from);
    Ok(ExponentReport {
        nu,
        n: p.index_count(),
        t: p.t.eval(alpha, beta),
        b0: alpha * (v[0] + v[1]) - (1.0 - alpha) * v[3] - (1.0 - alpha) * v[4] / 4.0,
        b1: alpha * v[1] - (1.0 - alpha) * v[3] - (1.0 - alpha) * v[4] / 4.0,
        b: -v[3] - (v[4] + v[5]) / 2.0,
        bstar: beta * v[1] - (1.0 - beta) * v[3] - v[4] / 2.0 - (1.0 - beta) * v[5] / 2.0,
        chi: alpha.min(1.0 - alpha) / 2.0,
        chi_tilde: (alpha - beta).min(alpha / 2.0).min((1.0 - alpha) / 2.0),
    })
}

/// Reference monomial with counters (5, 9, 2, 1, 2, 3).
pub const WORKED_EXAMPLE: &str = "N^{α+1} E[u(G,3)] E[u(B*,4)] E[e(A,2,i1,i2) e(B,2,i3,i3) e(A,2,i2,i4)] E[e(A,1,i6,i1) e(B,1,i5,i6) au(A,7)]";

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simple_parse() {
        let p = parse_monomial("N^0 E[u(G,2)]").unwrap();
        assert_eq!(p.t, Exponent::default());
        assert_eq!(p.factors[0].atoms, vec![Atom::Underline { label: Label { letter: 'G', adjoint: false }, power: 2 }]);
        assert_eq!(p.nu_counters(), NuCounters([1, 0, 1, 0, 0, 0]));
    }

    #[test]
    fn worked_example() {
        let p = parse_monomial(WORKED_EXAMPLE).unwrap();
        assert_eq!(p.factors.len(), 4);
        assert_eq!(p.t, Exponent { constant: 1.0, alpha: 1.0, beta: 0.0 });
        assert_eq!(p.nu_counters(), NuCounters([5, 9, 2, 1, 2, 3]));
        assert_eq!(p.index_count(), 6);
        let r = exponents(&p, 0.5, 0.5).unwrap();
        assert_eq!((r.b0, r.b1, r.b, r.bstar), (6.25, 3.75, -3.5, 2.25));
    }

    #[test]
    fn counters_small_cases() {
        assert_eq!(parse_monomial("N^0 E[u(G,1)]").unwrap().nu_counters(), NuCounters([0; 6]));
        let p = parse_monomial("N^0 E[e(G,1,i1,i2) e(G,1,i2,i1)]").unwrap();
        assert_eq!(p.nu_counters().0[4..], [0, 2]);
        let diag = parse_monomial("N^0 E[e(G,1,i1,i1)]").unwrap();
        assert_eq!(diag.nu_counters().0[4..], [0, 0]);
    }

    #[test]
    fn zero_counters_give_zero_exponents() {
        let r = exponents(&parse_monomial("N^2 E[u(G,1)]").unwrap(), 0.7, 0.3).unwrap();
        assert_eq!((r.b0, r.b1, r.b, r.bstar), (0.0, 0.0, 0.0, 0.0));
        assert_eq!(r.t, 2.0);
    }

    #[test]
    fn remark_concordance() {
        let p = parse_monomial("N^0 E[au(G,1) au(F*,1)]").unwrap();
        for (a, b) in [(0.5, 0.2), (0.9, 0.9), (0.3, 0.0)] {
            let r = exponents(&p, a, b).unwrap();
            assert!((r.bstar - (2.0 * b - 2.0)).abs() < 1e-15);
            assert!((r.b0 - (2.0 * a - 2.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn parameter_domain() {
        let p = parse_monomial("N^0 E[u(G,1)]").unwrap();
        assert!(exponents(&p, 1.0, 0.5).is_err());
        assert!(exponents(&p, 0.5, 0.6).is_err());
        assert!(exponents(&p, 0.5, -0.1).is_err());
        let r = exponents(&p, 0.6, 0.2).unwrap();
        assert!((r.chi - 0.2).abs() < 1e-15 && (r.chi_tilde - 0.2).abs() < 1e-15);
    }

    #[test]
    fn parse_errors_are_structured() {
        let e = parse_monomial("N^0 E[u(H2,1)]").unwrap_err();
        assert!(e.message.contains("unknown label") && e.column == 9);
        let e = parse_monomial("N^0 E[u(G,0)]").unwrap_err();
        assert!(e.message.contains("at least 1"));
        let e = parse_monomial("N^0 E[e(G,1,j1,i2)]").unwrap_err();
        assert!(e.message.contains("malformed index"));
        let e = parse_monomial("N^0\nE[u(G,1)] E[u(G,1) e(G,1,i1,i1)]").unwrap_err();
        assert_eq!(e.line, 2);
        let e = parse_monomial("N^0 E[x(G,1)]").unwrap_err();
        assert_eq!(e.expected.len(), 3);
        for garbage in ["", "hello", "N^", "N^{α+", "N^1 E[", "N^1 E[u(G,1)", "N^1 E[u(G,1)] junk", "N^1 E[e(G,1,i1)]", "\u{1F600}"] {
            assert!(parse_monomial(garbage).is_err(), "{garbage:?}");
        }
    }

    #[test]
    fn round_trip() {
        for s in [WORKED_EXAMPLE, "N^-0.5 E[au(F*,2)]", "N^{2β-α-3} E[e(Z*,4,i9,i2)]", "N^{alpha + 2*beta} E[u(G,1)]"] {
            let p = parse_monomial(s).unwrap();
            let again = parse_monomial(&p.to_string()).unwrap();
            assert_eq!(p, again, "{s} -> {p}");
        }
    }
}
