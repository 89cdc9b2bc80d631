//! Recursive-descent parser. Total: every input yields a tree or a diagnostic.

use std::fmt;

use super::{BinaryOp, Expr, UnaryOp};

/// Nesting bound so hostile input cannot exhaust the stack.
const MAX_DEPTH: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseErrorKind {
    UnexpectedToken,
    UnexpectedEnd,
    UnknownIdentifier,
    ArityMismatch,
    DimensionOverflow,
    NonConstantExponent,
    InvalidNumber,
    NestingTooDeep,
}

/// Parse failure with a byte offset into the input (`offset <= input.len()`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseDiagnostics {
    pub kind: ParseErrorKind,
    pub offset: usize,
    pub message: String,
}

impl fmt::Display for ParseDiagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at byte {}", self.message, self.offset)
    }
}

impl std::error::Error for ParseDiagnostics {}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("identifier '{s}'"),
            Tok::Plus => "'+'".into(),
            Tok::Minus => "'-'".into(),
            Tok::Star => "'*'".into(),
            Tok::Slash => "'/'".into(),
            Tok::Caret => "'^'".into(),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::Comma => "','".into(),
            Tok::End => "end of input".into(),
        }
    }
}

fn err(kind: ParseErrorKind, offset: usize, message: impl Into<String>) -> ParseDiagnostics {
    ParseDiagnostics { kind, offset, message: message.into() }
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ParseDiagnostics> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let simple = match c {
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Star),
            b'/' => Some(Tok::Slash),
            b'^' => Some(Tok::Caret),
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            b',' => Some(Tok::Comma),
            _ => None,
        };
        if let Some(tok) = simple {
            out.push((tok, start));
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || c == b'.' {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if i < bytes.len() && bytes[i] == b'.' {
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
            }
            // exponent only when digits follow, so "2e" lexes as 2 then 'e'
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text = &src[start..i];
            let value: f64 = text
                .parse()
                .map_err(|_| err(ParseErrorKind::InvalidNumber, start, format!("malformed number '{text}'")))?;
            if !value.is_finite() {
                return Err(err(ParseErrorKind::InvalidNumber, start, format!("number '{text}' overflows f64")));
            }
            out.push((Tok::Num(value), start));
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(src[start..i].to_string()), start));
            continue;
        }
        let ch = src[start..].chars().next().unwrap_or('?');
        return Err(err(ParseErrorKind::UnexpectedToken, start, format!("unexpected character '{ch}'")));
    }
    out.push((Tok::End, src.len()));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    dimension: usize,
    depth: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, expected: &str) -> ParseDiagnostics {
        let tok = self.peek();
        let kind = if *tok == Tok::End { ParseErrorKind::UnexpectedEnd } else { ParseErrorKind::UnexpectedToken };
        err(kind, self.offset(), format!("expected {expected}, found {}", tok.describe()))
    }

    fn enter(&mut self) -> Result<(), ParseDiagnostics> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(err(ParseErrorKind::NestingTooDeep, self.offset(), "expression nested too deeply"));
        }
        Ok(())
    }

    fn expr(&mut self) -> Result<Expr, ParseDiagnostics> {
        self.enter()?;
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinaryOp::Add,
                Tok::Minus => BinaryOp::Sub,
                _ => break,
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
        self.depth -= 1;
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseDiagnostics> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinaryOp::Mul,
                Tok::Slash => BinaryOp::Div,
                _ => break,
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseDiagnostics> {
        self.enter()?;
        let out = match self.peek() {
            Tok::Minus => {
                self.bump();
                Expr::unary(UnaryOp::Neg, self.unary()?)
            }
            Tok::Plus => {
                self.bump();
                self.unary()?
            }
            _ => self.power()?,
        };
        self.depth -= 1;
        Ok(out)
    }

    fn power(&mut self) -> Result<Expr, ParseDiagnostics> {
        let base = self.primary()?;
        if *self.peek() != Tok::Caret {
            return Ok(base);
        }
        self.bump();
        let at = self.offset();
        let exponent = self.exponent()?;
        if exponent.max_var() > 0 || exponent.depends_on_time() {
            return Err(err(
                ParseErrorKind::NonConstantExponent,
                at,
                "exponent must be a constant expression",
            ));
        }
        let value = exponent
            .eval(&[], 0.0)
            .map_err(|e| err(ParseErrorKind::InvalidNumber, at, format!("exponent does not evaluate: {e}")))?;
        if !value.is_finite() {
            return Err(err(ParseErrorKind::InvalidNumber, at, "exponent is not finite"));
        }
        Ok(base.powf(value))
    }

    fn exponent(&mut self) -> Result<Expr, ParseDiagnostics> {
        self.enter()?;
        let out = match self.peek() {
            Tok::Minus => {
                self.bump();
                Expr::unary(UnaryOp::Neg, self.exponent()?)
            }
            Tok::Plus => {
                self.bump();
                self.exponent()?
            }
            _ => self.power()?,
        };
        self.depth -= 1;
        Ok(out)
    }

    fn primary(&mut self) -> Result<Expr, ParseDiagnostics> {
        let (tok, at) = self.bump();
        match tok {
            Tok::Num(v) => Ok(Expr::Const(v)),
            Tok::LParen => {
                let inner = self.expr()?;
                if *self.peek() != Tok::RParen {
                    return Err(self.unexpected("')'"));
                }
                self.bump();
                Ok(inner)
            }
            Tok::Ident(name) => self.identifier(&name, at),
            other => {
                // step back so the offset points at the offending token
                self.pos -= usize::from(other != Tok::End);
                Err(self.unexpected("a number, variable, function or '('"))
            }
        }
    }

    fn identifier(&mut self, name: &str, at: usize) -> Result<Expr, ParseDiagnostics> {
        if name == "t" {
            return Ok(Expr::Time);
        }
        if let Some(op) = UnaryOp::from_name(name) {
            if *self.peek() != Tok::LParen {
                return Err(self.unexpected(&format!("'(' after '{name}'")));
            }
            self.bump();
            let mut args = Vec::new();
            if *self.peek() != Tok::RParen {
                args.push(self.expr()?);
                while *self.peek() == Tok::Comma {
                    self.bump();
                    args.push(self.expr()?);
                }
            }
            if *self.peek() != Tok::RParen {
                return Err(self.unexpected("')'"));
            }
            self.bump();
            if args.len() != 1 {
                return Err(err(
                    ParseErrorKind::ArityMismatch,
                    at,
                    format!("'{name}' takes 1 argument, got {}", args.len()),
                ));
            }
            return Ok(Expr::unary(op, args.pop().expect("one argument")));
        }
        if let Some(digits) = name.strip_prefix('x') {
            if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) {
                let index: usize = match digits.parse() {
                    Ok(i) => i,
                    Err(_) => {
                        return Err(err(
                            ParseErrorKind::DimensionOverflow,
                            at,
                            format!("variable '{name}' exceeds dimension {}", self.dimension),
                        ))
                    }
                };
                if index == 0 {
                    return Err(err(ParseErrorKind::UnknownIdentifier, at, "variables are numbered from x1"));
                }
                if index > self.dimension {
                    return Err(err(
                        ParseErrorKind::DimensionOverflow,
                        at,
                        format!("variable '{name}' exceeds dimension {}", self.dimension),
                    ));
                }
                return Ok(Expr::Var(index));
            }
        }
        Err(err(ParseErrorKind::UnknownIdentifier, at, format!("unknown identifier '{name}'")))
    }
}

/// Parse `text` as an expression in `x1..x{dimension}` and `t`.
///
/// `dimension = 0` accepts time-only expressions.
pub fn parse(text: &str, dimension: usize) -> Result<Expr, ParseDiagnostics> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0, dimension, depth: 0 };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(p.unexpected("an operator or end of input"));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn precedence_and_associativity() {
        let e = parse("x1 + 2*t", 2).unwrap();
        assert_eq!(e, Expr::Var(1) + Expr::Const(2.0) * Expr::Time);
        assert_eq!(parse("-x1^2", 1).unwrap(), -(Expr::Var(1).powf(2.0)));
        assert_eq!(parse("2^3^2", 0).unwrap(), Expr::Const(2.0).powf(9.0));
        assert_eq!(parse("1-2-3", 0).unwrap().eval(&[], 0.0).unwrap(), -4.0);
        assert_eq!(parse("8/4/2", 0).unwrap().eval(&[], 0.0).unwrap(), 1.0);
        assert_eq!(parse("x1^-2", 1).unwrap(), Expr::Var(1).powf(-2.0));
        assert_eq!(parse("x1^(1/2)", 1).unwrap(), Expr::Var(1).powf(0.5));
    }

    #[test]
    fn sin_x3_needs_dimension_three() {
        let d = parse("sin(x3)", 2).unwrap_err();
        assert_eq!(d.kind, ParseErrorKind::DimensionOverflow);
        assert_eq!(d.offset, 4);
        assert!(parse("sin(x3)", 3).is_ok());
    }

    #[test]
    fn diagnostics() {
        assert_eq!(parse("foo(x1)", 1).unwrap_err().kind, ParseErrorKind::UnknownIdentifier);
        assert_eq!(parse("x0", 1).unwrap_err().kind, ParseErrorKind::UnknownIdentifier);
        assert_eq!(parse("sin(x1, x2)", 2).unwrap_err().kind, ParseErrorKind::ArityMismatch);
        assert_eq!(parse("sin()", 2).unwrap_err().kind, ParseErrorKind::ArityMismatch);
        assert_eq!(parse("x1^x2", 2).unwrap_err().kind, ParseErrorKind::NonConstantExponent);
        assert_eq!(parse("x1^t", 1).unwrap_err().kind, ParseErrorKind::NonConstantExponent);
        assert_eq!(parse("1e999", 1).unwrap_err().kind, ParseErrorKind::InvalidNumber);
        assert_eq!(parse("x1 +", 1).unwrap_err().kind, ParseErrorKind::UnexpectedEnd);
        assert_eq!(parse("x1 x2", 2).unwrap_err().kind, ParseErrorKind::UnexpectedToken);
        assert_eq!(parse("", 1).unwrap_err().kind, ParseErrorKind::UnexpectedEnd);
        let d = parse("x1 $ 2", 1).unwrap_err();
        assert_eq!((d.kind, d.offset), (ParseErrorKind::UnexpectedToken, 3));
        let deep = "(".repeat(10_000) + "1" + &")".repeat(10_000);
        assert_eq!(parse(&deep, 0).unwrap_err().kind, ParseErrorKind::NestingTooDeep);
    }

    #[test]
    fn number_forms() {
        for (s, v) in [("2.", 2.0), (".5", 0.5), ("1e3", 1e3), ("2.5E-2", 0.025), ("7", 7.0)] {
            assert_eq!(parse(s, 0).unwrap(), Expr::Const(v), "{s}");
        }
        assert_eq!(parse("2e", 0).unwrap_err().kind, ParseErrorKind::UnexpectedToken);
    }

    fn arb_expr(dim: usize) -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (-1e6f64..1e6).prop_map(Expr::Const),
            (1..=dim).prop_map(Expr::Var),
            Just(Expr::Time),
        ];
        leaf.prop_recursive(6, 64, 2, |inner| {
            prop_oneof![
                (
                    prop_oneof![
                        Just(UnaryOp::Neg),
                        Just(UnaryOp::Sin),
                        Just(UnaryOp::Cos),
                        Just(UnaryOp::Exp),
                        Just(UnaryOp::Sqrt),
                        Just(UnaryOp::Abs),
                        Just(UnaryOp::Tanh)
                    ],
                    inner.clone()
                )
                    .prop_map(|(op, c)| Expr::unary(op, c)),
                (
                    prop_oneof![
                        Just(BinaryOp::Add),
                        Just(BinaryOp::Sub),
                        Just(BinaryOp::Mul),
                        Just(BinaryOp::Div)
                    ],
                    inner.clone(),
                    inner.clone()
                )
                    .prop_map(|(op, l, r)| Expr::binary(op, l, r)),
                (inner, -4.0f64..4.0).prop_map(|(b, e)| b.powf(e)),
            ]
        })
    }

    /// Structural equality up to how negative literals are spelled.
    fn equivalent(a: &Expr, b: &Expr) -> bool {
        match (a, b) {
            (Expr::Const(x), Expr::Const(y)) => x == y,
            (Expr::Unary(UnaryOp::Neg, c), Expr::Const(y)) | (Expr::Const(y), Expr::Unary(UnaryOp::Neg, c)) => {
                matches!(**c, Expr::Const(x) if -x == *y)
            }
            (Expr::Var(i), Expr::Var(j)) => i == j,
            (Expr::Time, Expr::Time) => true,
            (Expr::Unary(o1, c1), Expr::Unary(o2, c2)) => o1 == o2 && equivalent(c1, c2),
            (Expr::Binary(o1, l1, r1), Expr::Binary(o2, l2, r2)) => {
                o1 == o2 && equivalent(l1, l2) && equivalent(r1, r2)
            }
            (Expr::Pow(b1, e1), Expr::Pow(b2, e2)) => e1 == e2 && equivalent(b1, b2),
            _ => false,
        }
    }

    proptest! {
        #[test]
        fn parser_is_total(s in "\\PC{0,40}") {
            match parse(&s, 3) {
                Ok(_) => {}
                Err(d) => prop_assert!(d.offset <= s.len()),
            }
        }

        #[test]
        fn parser_is_total_on_expression_alphabet(s in "[x0-9t+*/^() .,eE-]{0,40}|(sin|cos|x1|x4|t|\\(|\\)|\\^|-|\\*|2){0,20}") {
            if let Err(d) = parse(&s, 3) {
                prop_assert!(d.offset <= s.len());
            }
        }

        #[test]
        fn print_round_trips(e in arb_expr(3)) {
            let text = e.print();
            let back = parse(&text, 3).unwrap();
            prop_assert!(equivalent(&e, &back), "{} -> {}", text, back);
            prop_assert_eq!(back.print(), text);
        }
    }
}
