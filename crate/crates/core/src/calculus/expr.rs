//! Expression trees over `x1..xN` and a recursive-descent parser.
//!
//! Grammar (whitespace is insignificant):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | factor
//! factor := base ('^' '-'? integer)?
//! base   := number | 'x'k | 'pi' | func '(' expr ')' | '(' expr ')'
//! func   := sin | cos | exp | sqrt | log
//! ```

use std::fmt;

use super::CalculusError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
    Log,
}

impl Func {
    fn from_name(name: &str) -> Option<Self> {
        match name {
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "exp" => Some(Func::Exp),
            "sqrt" => Some(Func::Sqrt),
            "log" => Some(Func::Log),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
            Func::Log => "log",
        }
    }

    /// Value, first and second derivative at `t`.
    pub(crate) fn taylor2(self, t: f64) -> (f64, f64, f64) {
        match self {
            Func::Sin => {
                let (s, c) = t.sin_cos();
                (s, c, -s)
            }
            Func::Cos => {
                let (s, c) = t.sin_cos();
                (c, -s, -c)
            }
            Func::Exp => {
                let e = t.exp();
                (e, e, e)
            }
            Func::Sqrt => {
                let r = t.sqrt();
                (r, 0.5 / r, -0.25 / (r * t))
            }
            Func::Log => (t.ln(), 1.0 / t, -1.0 / (t * t)),
        }
    }

    pub(crate) fn apply(self, t: f64) -> f64 {
        match self {
            Func::Sin => t.sin(),
            Func::Cos => t.cos(),
            Func::Exp => t.exp(),
            Func::Sqrt => t.sqrt(),
            Func::Log => t.ln(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Const(f64),
    /// Zero-based coordinate index.
    Var(usize),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, i32),
    Call(Func, Box<Node>),
}

impl Node {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Node::Const(c) => *c,
            Node::Var(k) => x[*k],
            Node::Neg(a) => -a.eval(x),
            Node::Add(a, b) => a.eval(x) + b.eval(x),
            Node::Sub(a, b) => a.eval(x) - b.eval(x),
            Node::Mul(a, b) => a.eval(x) * b.eval(x),
            Node::Div(a, b) => a.eval(x) / b.eval(x),
            Node::Pow(a, n) => a.eval(x).powi(*n),
            Node::Call(f, a) => f.apply(a.eval(x)),
        }
    }

    pub fn contains_division(&self) -> bool {
        match self {
            Node::Const(_) | Node::Var(_) => false,
            Node::Div(_, _) => true,
            Node::Pow(_, n) if *n < 0 => true,
            Node::Neg(a) | Node::Pow(a, _) | Node::Call(_, a) => a.contains_division(),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) => {
                a.contains_division() || b.contains_division()
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            Node::Const(_) => true,
            Node::Var(_) => false,
            Node::Neg(a) | Node::Pow(a, _) | Node::Call(_, a) => a.is_constant(),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                a.is_constant() && b.is_constant()
            }
        }
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Const(c) => write!(f, "{c:?}"),
            Node::Var(k) => write!(f, "x{}", k + 1),
            Node::Neg(a) => write!(f, "(-{a})"),
            Node::Add(a, b) => write!(f, "({a} + {b})"),
            Node::Sub(a, b) => write!(f, "({a} - {b})"),
            Node::Mul(a, b) => write!(f, "({a} * {b})"),
            Node::Div(a, b) => write!(f, "({a} / {b})"),
            Node::Pow(a, n) => write!(f, "({a}^{n})"),
            Node::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

pub(crate) fn parse(text: &str, dim: usize) -> Result<Node, CalculusError> {
    let mut parser = Parser {
        src: text.as_bytes(),
        pos: 0,
        dim,
    };
    let node = parser.expr()?;
    parser.skip_ws();
    if parser.pos < parser.src.len() {
        return Err(parser.error("unexpected trailing input"));
    }
    Ok(node)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    dim: usize,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> CalculusError {
        CalculusError::Syntax {
            offset: self.pos,
            message: message.to_string(),
        }
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

    fn expr(&mut self) -> Result<Node, CalculusError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = Node::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat(b'-') {
                lhs = Node::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Node, CalculusError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(b'*') {
                lhs = Node::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat(b'/') {
                lhs = Node::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Node, CalculusError> {
        if self.eat(b'-') {
            Ok(Node::Neg(Box::new(self.unary()?)))
        } else {
            self.factor()
        }
    }

    fn factor(&mut self) -> Result<Node, CalculusError> {
        let base = self.base()?;
        if !self.eat(b'^') {
            return Ok(base);
        }
        let negative = self.eat(b'-');
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error("expected integer exponent"));
        }
        let digits = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii digits");
        let mut exponent: i32 = digits.parse().map_err(|_| CalculusError::Syntax {
            offset: start,
            message: "exponent out of range".into(),
        })?;
        if negative {
            exponent = -exponent;
        }
        Ok(Node::Pow(Box::new(base), exponent))
    }

    fn base(&mut self) -> Result<Node, CalculusError> {
        match self.peek() {
            None => Err(self.error("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.error("expected ')'"));
                }
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.identifier(),
            Some(_) => Err(self.error("unexpected character")),
        }
    }

    fn number(&mut self) -> Result<Node, CalculusError> {
        let start = self.pos;
        let bytes = self.src;
        let mut i = self.pos;
        while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
            i += 1;
        }
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
        let text = std::str::from_utf8(&bytes[start..i]).expect("ascii number");
        let value: f64 = text.parse().map_err(|_| CalculusError::Syntax {
            offset: start,
            message: format!("malformed number '{text}'"),
        })?;
        self.pos = i;
        Ok(Node::Const(value))
    }

    fn identifier(&mut self) -> Result<Node, CalculusError> {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii identifier");
        if name == "pi" {
            return Ok(Node::Const(std::f64::consts::PI));
        }
        if let Some(func) = Func::from_name(name) {
            if !self.eat(b'(') {
                return Err(self.error("expected '(' after function name"));
            }
            let arg = self.expr()?;
            if !self.eat(b')') {
                return Err(self.error("expected ')'"));
            }
            return Ok(Node::Call(func, Box::new(arg)));
        }
        if let Some(rest) = name.strip_prefix('x') {
            if let Ok(k) = rest.parse::<usize>() {
                if (1..=self.dim).contains(&k) && !rest.starts_with('0') {
                    return Ok(Node::Var(k - 1));
                }
            }
        }
        Err(CalculusError::UnknownIdentifier {
            offset: start,
            name: name.to_string(),
            dim: self.dim,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_and_unary_minus() {
        let node = parse("-x1^2 + 2*x2/4", 2).unwrap();
        assert_eq!(node.eval(&[3.0, 2.0]), -9.0 + 1.0);
        let node = parse("2^3^1", 1);
        // A power is a single factor; chaining needs parentheses.
        assert!(node.is_err());
    }

    #[test]
    fn numbers_with_exponents() {
        let node = parse("1.5e-1 + .5 + 2E2", 1).unwrap();
        assert!((node.eval(&[0.0]) - 200.65).abs() < 1e-12);
    }

    #[test]
    fn negative_integer_power_counts_as_division() {
        let node = parse("x1^-2", 1).unwrap();
        assert_eq!(node.eval(&[2.0]), 0.25);
        assert!(node.contains_division());
        assert!(!parse("x1^2 + sin(x1)", 1).unwrap().contains_division());
    }

    #[test]
    fn syntax_error_offsets() {
        match parse("x1^", 1) {
            Err(CalculusError::Syntax { offset, .. }) => assert_eq!(offset, 3),
            other => panic!("unexpected {other:?}"),
        }
        match parse("(x1 + 1", 1) {
            Err(CalculusError::Syntax { offset, .. }) => assert_eq!(offset, 7),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse("x1 x1", 1),
            Err(CalculusError::Syntax { offset: 3, .. })
        ));
    }

    #[test]
    fn unknown_identifiers() {
        assert!(matches!(
            parse("x3 + 1", 2),
            Err(CalculusError::UnknownIdentifier { offset: 0, .. })
        ));
        assert!(matches!(
            parse("1 + tan(x1)", 1),
            Err(CalculusError::UnknownIdentifier { offset: 4, .. })
        ));
        assert!(matches!(
            parse("x0", 1),
            Err(CalculusError::UnknownIdentifier { .. })
        ));
    }

    #[test]
    fn display_reparses_to_same_values() {
        let node = parse("sqrt(1 + x1^2) * exp(-x2) / (2 - cos(x1))", 2).unwrap();
        let again = parse(&node.to_string(), 2).unwrap();
        for x in [[0.1, 0.2], [-1.0, 0.7], [2.5, -0.3]] {
            assert_eq!(node.eval(&x), again.eval(&x));
        }
    }
}
