//! Tokenizer and reader for the s-expression surface syntax. `[` and `]`
//! delimit interval bounds; commas are whitespace; `;` starts a comment.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use super::FrontendError;

#[derive(Clone, Debug, PartialEq)]
pub enum SexpKind {
    Atom(String),
    List(Vec<Sexp>),
    Bracket(Vec<Sexp>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sexp {
    pub kind: SexpKind,
    pub line: usize,
    pub col: usize,
}

impl Sexp {
    pub fn atom(&self) -> Option<&str> {
        match &self.kind {
            SexpKind::Atom(s) => Some(s),
            _ => None,
        }
    }

    pub fn list(&self) -> Option<&[Sexp]> {
        match &self.kind {
            SexpKind::List(xs) => Some(xs),
            _ => None,
        }
    }

    /// Head symbol of a list.
    pub fn head(&self) -> Option<&str> {
        self.list().and_then(|xs| xs.first()).and_then(|s| s.atom())
    }

    pub fn error(&self, msg: impl Into<String>) -> FrontendError {
        FrontendError::Parse { line: self.line, col: self.col, msg: msg.into() }
    }
}

impl fmt::Display for Sexp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |f: &mut fmt::Formatter<'_>, xs: &[Sexp], sep: &str| {
            for (i, x) in xs.iter().enumerate() {
                if i > 0 {
                    f.write_str(sep)?;
                }
                write!(f, "{x}")?;
            }
            Ok(())
        };
        match &self.kind {
            SexpKind::Atom(s) => f.write_str(s),
            SexpKind::List(xs) => {
                f.write_str("(")?;
                join(f, xs, " ")?;
                f.write_str(")")
            }
            SexpKind::Bracket(xs) => {
                f.write_str("[")?;
                join(f, xs, ", ")?;
                f.write_str("]")
            }
        }
    }
}

/// Read every top-level expression of `src`.
pub fn read_all(src: &str) -> Result<Vec<Sexp>, FrontendError> {
    let mut stack: Vec<(char, usize, usize, Vec<Sexp>)> = Vec::new();
    let mut top = Vec::new();
    let mut chars = src.chars().peekable();
    let (mut line, mut col) = (1, 1);
    let push = |stack: &mut Vec<(char, usize, usize, Vec<Sexp>)>, top: &mut Vec<Sexp>, s: Sexp| match stack.last_mut() {
        Some(frame) => frame.3.push(s),
        None => top.push(s),
    };
    while let Some(&c) = chars.peek() {
        let (l, cl) = (line, col);
        match c {
            '\n' => {
                chars.next();
                line += 1;
                col = 1;
                continue;
            }
            ';' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    chars.next();
                }
                continue;
            }
            c if c.is_whitespace() || c == ',' => {
                chars.next();
                col += 1;
                continue;
            }
            '(' | '[' => {
                chars.next();
                col += 1;
                stack.push((c, l, cl, Vec::new()));
            }
            ')' | ']' => {
                chars.next();
                col += 1;
                let Some((open, ol, oc, items)) = stack.pop() else {
                    return Err(FrontendError::Parse { line: l, col: cl, msg: format!("unbalanced '{c}'") });
                };
                let kind = match (open, c) {
                    ('(', ')') => SexpKind::List(items),
                    ('[', ']') => SexpKind::Bracket(items),
                    _ => return Err(FrontendError::Parse { line: l, col: cl, msg: format!("'{c}' closes '{open}' opened at {ol}:{oc}") }),
                };
                push(&mut stack, &mut top, Sexp { kind, line: ol, col: oc });
            }
            _ => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_whitespace() || matches!(c, '(' | ')' | '[' | ']' | ',' | ';') {
                        break;
                    }
                    s.push(c);
                    chars.next();
                    col += 1;
                }
                push(&mut stack, &mut top, Sexp { kind: SexpKind::Atom(s), line: l, col: cl });
            }
        }
    }
    if let Some((_, l, c, _)) = stack.pop() {
        return Err(FrontendError::Parse { line: l, col: c, msg: "unclosed list".into() });
    }
    Ok(top)
}

/// Exact value of an integer, fraction (`-1/3`) or decimal (`2.5e-3`) literal.
pub fn parse_rational(s: &str) -> Option<BigRational> {
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    if body.is_empty() || !body.starts_with(|c: char| c.is_ascii_digit() || c == '.') {
        return None;
    }
    let value = if let Some((n, d)) = body.split_once('/') {
        let n: BigInt = digits(n)?;
        let d: BigInt = digits(d)?;
        if d.is_zero() {
            return None;
        }
        BigRational::new(n, d)
    } else {
        let (mantissa, exp) = match body.find(['e', 'E']) {
            Some(i) => (&body[..i], body[i + 1..].parse::<i32>().ok()?),
            None => (body, 0),
        };
        let (int, frac) = mantissa.split_once('.').unwrap_or((mantissa, ""));
        if int.is_empty() && frac.is_empty() {
            return None;
        }
        let all = format!("{int}{frac}");
        let m: BigInt = digits(&all)?;
        let scale = exp - frac.len() as i32;
        let ten = BigRational::from_integer(10.into());
        let mut q = BigRational::from_integer(m);
        let factor = (0..scale.unsigned_abs()).fold(BigRational::one(), |acc, _| acc * &ten);
        if scale >= 0 {
            q *= factor;
        } else {
            q /= factor;
        }
        q
    };
    Some(if neg { -value } else { value })
}

fn digits(s: &str) -> Option<BigInt> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse().ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_nested_lists_and_brackets() {
        let xs = read_all("; comment\n(declare-var x Real [-1, 1])\n(assert (= x 0))").unwrap();
        assert_eq!(xs.len(), 2);
        assert_eq!(xs[0].to_string(), "(declare-var x Real [-1, 1])");
        assert_eq!((xs[1].line, xs[1].col), (3, 1));
        assert_eq!(xs[1].head(), Some("assert"));
    }

    #[test]
    fn reports_positions() {
        let e = read_all("(a\n  (b]").unwrap_err();
        assert_eq!(e, FrontendError::Parse { line: 2, col: 5, msg: "']' closes '(' opened at 2:3".into() });
        assert!(matches!(read_all("(a"), Err(FrontendError::Parse { line: 1, col: 1, .. })));
        assert!(matches!(read_all(")"), Err(FrontendError::Parse { .. })));
    }

    #[test]
    fn rational_literals() {
        let q = |n: i64, d: i64| BigRational::new(n.into(), d.into());
        assert_eq!(parse_rational("3"), Some(q(3, 1)));
        assert_eq!(parse_rational("-1/3"), Some(q(-1, 3)));
        assert_eq!(parse_rational("0.001"), Some(q(1, 1000)));
        assert_eq!(parse_rational("2.5e2"), Some(q(250, 1)));
        assert_eq!(parse_rational("1e-3"), Some(q(1, 1000)));
        assert_eq!(parse_rational(".5"), Some(q(1, 2)));
        for bad in ["x", "-", "1/0", "1.2.3", "e5", "x1"] {
            assert_eq!(parse_rational(bad), None, "{bad}");
        }
    }
}
