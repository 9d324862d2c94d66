//! Arithmetic expressions in the variables `t` and `x`, used for custom
//! mobilities and initial data.
//!
//! Grammar (usual precedence, `^` right-associative and binding tighter
//! than unary minus):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?
//! atom   := number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')'
//! ```

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub struct ExprError {
    pub pos: usize,
    pub msg: String,
}

impl fmt::Display for ExprError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at offset {}", self.msg, self.pos)
    }
}

impl std::error::Error for ExprError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    T,
    X,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Ln,
    Sqrt,
    Abs,
    Tanh,
    Cosh,
    Sinh,
    Min,
    Max,
}

impl Func {
    fn lookup(name: &str) -> Option<(Func, usize)> {
        Some(match name {
            "sin" => (Func::Sin, 1),
            "cos" => (Func::Cos, 1),
            "tan" => (Func::Tan, 1),
            "exp" => (Func::Exp, 1),
            "ln" | "log" => (Func::Ln, 1),
            "sqrt" => (Func::Sqrt, 1),
            "abs" => (Func::Abs, 1),
            "tanh" => (Func::Tanh, 1),
            "cosh" => (Func::Cosh, 1),
            "sinh" => (Func::Sinh, 1),
            "min" => (Func::Min, 2),
            "max" => (Func::Max, 2),
            _ => return None,
        })
    }

    fn apply(self, a: &[f64]) -> f64 {
        match self {
            Func::Sin => a[0].sin(),
            Func::Cos => a[0].cos(),
            Func::Tan => a[0].tan(),
            Func::Exp => a[0].exp(),
            Func::Ln => a[0].ln(),
            Func::Sqrt => a[0].sqrt(),
            Func::Abs => a[0].abs(),
            Func::Tanh => a[0].tanh(),
            Func::Cosh => a[0].cosh(),
            Func::Sinh => a[0].sinh(),
            Func::Min => a[0].min(a[1]),
            Func::Max => a[0].max(a[1]),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Var(Var),
    Neg(Box<Node>),
    Bin(char, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

/// A parsed expression.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    root: Node,
    source: String,
}

impl Expr {
    pub fn parse(src: &str) -> Result<Self, ExprError> {
        let mut p = Parser { src: src.as_bytes(), pos: 0 };
        let root = p.expr()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(Self {
            root,
            source: src.trim().to_string(),
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval(&self, t: f64, x: f64) -> f64 {
        eval(&self.root, t, x)
    }

    /// Whether the expression mentions `var`.
    pub fn uses(&self, var: Var) -> bool {
        uses(&self.root, var)
    }

    /// The value if the expression mentions neither variable.
    pub fn as_constant(&self) -> Option<f64> {
        if self.uses(Var::T) || self.uses(Var::X) {
            None
        } else {
            Some(self.eval(0.0, 0.0))
        }
    }
}

fn eval(n: &Node, t: f64, x: f64) -> f64 {
    match n {
        Node::Num(v) => *v,
        Node::Var(Var::T) => t,
        Node::Var(Var::X) => x,
        Node::Neg(a) => -eval(a, t, x),
        Node::Bin(op, a, b) => {
            let (a, b) = (eval(a, t, x), eval(b, t, x));
            match op {
                '+' => a + b,
                '-' => a - b,
                '*' => a * b,
                '/' => a / b,
                _ => a.powf(b),
            }
        }
        Node::Call(f, args) => {
            let vals: Vec<f64> = args.iter().map(|a| eval(a, t, x)).collect();
            f.apply(&vals)
        }
    }
}

fn uses(n: &Node, var: Var) -> bool {
    match n {
        Node::Num(_) => false,
        Node::Var(v) => *v == var,
        Node::Neg(a) => uses(a, var),
        Node::Bin(_, a, b) => uses(a, var) || uses(b, var),
        Node::Call(_, args) => args.iter().any(|a| uses(a, var)),
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> ExprError {
        ExprError {
            pos: self.pos,
            msg: msg.to_string(),
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

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.term()?;
        while let Some(c @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Node::Bin(c as char, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        while let Some(c @ (b'*' | b'/')) = self.peek() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Node::Bin(c as char, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        if self.eat(b'-') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if self.eat(b'+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, ExprError> {
        let base = self.atom()?;
        if self.eat(b'^') {
            let exp = self.unary()?;
            return Ok(Node::Bin('^', Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ExprError> {
        match self.peek() {
            None => Err(self.error("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.error("expected `)`"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.ident(),
            Some(_) => Err(self.error("unexpected character")),
        }
    }

    fn number(&mut self) -> Result<Node, ExprError> {
        let start = self.pos;
        let s = self.src;
        let digits = |p: &mut usize| {
            while *p < s.len() && s[*p].is_ascii_digit() {
                *p += 1;
            }
        };
        digits(&mut self.pos);
        if self.pos < s.len() && s[self.pos] == b'.' {
            self.pos += 1;
            digits(&mut self.pos);
        }
        if self.pos < s.len() && (s[self.pos] == b'e' || s[self.pos] == b'E') {
            let mut p = self.pos + 1;
            if p < s.len() && (s[p] == b'+' || s[p] == b'-') {
                p += 1;
            }
            if p < s.len() && s[p].is_ascii_digit() {
                self.pos = p;
                digits(&mut self.pos);
            }
        }
        let text = std::str::from_utf8(&s[start..self.pos]).expect("ascii");
        text.parse::<f64>().map(Node::Num).map_err(|_| ExprError {
            pos: start,
            msg: format!("malformed number `{text}`"),
        })
    }

    fn ident(&mut self) -> Result<Node, ExprError> {
        let start = self.pos;
        while self.pos < self.src.len() && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_') {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        if self.peek() == Some(b'(') {
            let (func, arity) = Func::lookup(name).ok_or_else(|| ExprError {
                pos: start,
                msg: format!("unknown function `{name}`"),
            })?;
            self.pos += 1;
            let mut args = vec![self.expr()?];
            while self.eat(b',') {
                args.push(self.expr()?);
            }
            if !self.eat(b')') {
                return Err(self.error("expected `)` or `,`"));
            }
            if args.len() != arity {
                return Err(ExprError {
                    pos: start,
                    msg: format!("`{name}` takes {arity} argument(s), got {}", args.len()),
                });
            }
            return Ok(Node::Call(func, args));
        }
        match name {
            "t" => Ok(Node::Var(Var::T)),
            "x" => Ok(Node::Var(Var::X)),
            "pi" => Ok(Node::Num(std::f64::consts::PI)),
            "e" => Ok(Node::Num(std::f64::consts::E)),
            _ => Err(ExprError {
                pos: start,
                msg: format!("unknown identifier `{name}`"),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn ev(s: &str, t: f64, x: f64) -> f64 {
        Expr::parse(s).unwrap().eval(t, x)
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("1 + 2 * 3", 0.0, 0.0), 7.0);
        assert_eq!(ev("(1 + 2) * 3", 0.0, 0.0), 9.0);
        assert_eq!(ev("8 / 4 / 2", 0.0, 0.0), 1.0);
        assert_eq!(ev("2 ^ 3 ^ 2", 0.0, 0.0), 512.0);
        assert_eq!(ev("-2 ^ 2", 0.0, 0.0), -4.0);
        assert_eq!(ev("2 ^ -1", 0.0, 0.0), 0.5);
        assert_eq!(ev("1 - 2 - 3", 0.0, 0.0), -4.0);
    }

    #[test]
    fn variables_constants_functions() {
        assert_eq!(ev("0.01 + 0.005 * x * t", 2.0, 0.5), 0.01 + 0.005 * 0.5 * 2.0);
        assert_eq!(ev("0.5*pi*x - 0.25*pi", 0.0, 0.3), 0.5 * PI * 0.3 - 0.25 * PI);
        assert_eq!(ev("cos(pi*x)", 0.0, 1.0), (PI).cos());
        assert_eq!(ev("max(x, 1e-2)", 0.0, 0.001), 0.01);
        assert_eq!(ev("1.5E+1", 0.0, 0.0), 15.0);
        assert_eq!(ev("exp(1) - e", 0.0, 0.0), 0.0);
        assert_eq!(ev("sqrt(abs(-4))", 0.0, 0.0), 2.0);
    }

    #[test]
    fn constant_detection() {
        assert_eq!(Expr::parse("0.01").unwrap().as_constant(), Some(0.01));
        assert_eq!(Expr::parse("2*x").unwrap().as_constant(), None);
        assert!(Expr::parse("t + 1").unwrap().uses(Var::T));
    }

    #[test]
    fn malformed_input_is_rejected() {
        for s in ["", "1 +", "(1", "foo(1)", "y", "min(1)", "2 $ 3", "1 2", "sin 1"] {
            assert!(Expr::parse(s).is_err(), "{s}");
        }
    }
}
