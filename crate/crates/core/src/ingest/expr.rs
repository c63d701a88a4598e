use std::collections::BTreeSet;
use std::fmt;

/// Arithmetic expression over named coordinates.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(String),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    /// Non-negative integer power.
    Pow(Box<Expr>, u32),
}

// Smart constructors fold constants and drop neutral elements so that
// symbolic derivatives stay small.

pub fn num(x: f64) -> Expr {
    Expr::Num(x)
}

pub fn var(name: impl Into<String>) -> Expr {
    Expr::Var(name.into())
}

fn is_num(e: &Expr, x: f64) -> bool {
    matches!(e, Expr::Num(v) if *v == x)
}

pub fn neg(e: Expr) -> Expr {
    match e {
        Expr::Num(x) => Expr::Num(-x),
        Expr::Neg(inner) => *inner,
        e => Expr::Neg(Box::new(e)),
    }
}

pub fn add(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Num(x), Expr::Num(y)) => Expr::Num(x + y),
        (a, b) if is_num(&a, 0.0) => b,
        (a, b) if is_num(&b, 0.0) => a,
        (a, b) => Expr::Add(Box::new(a), Box::new(b)),
    }
}

pub fn sub(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Num(x), Expr::Num(y)) => Expr::Num(x - y),
        (a, b) if is_num(&b, 0.0) => a,
        (a, b) if is_num(&a, 0.0) => neg(b),
        (a, b) => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

pub fn mul(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Num(x), Expr::Num(y)) => Expr::Num(x * y),
        (a, b) if is_num(&a, 0.0) || is_num(&b, 0.0) => Expr::Num(0.0),
        (a, b) if is_num(&a, 1.0) => b,
        (a, b) if is_num(&b, 1.0) => a,
        (a, b) => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

pub fn div(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Num(x), Expr::Num(y)) if y != 0.0 => Expr::Num(x / y),
        (a, _) if is_num(&a, 0.0) => Expr::Num(0.0),
        (a, b) if is_num(&b, 1.0) => a,
        (a, b) => Expr::Div(Box::new(a), Box::new(b)),
    }
}

pub fn pow(base: Expr, exp: u32) -> Expr {
    match (base, exp) {
        (_, 0) => Expr::Num(1.0),
        (b, 1) => b,
        (Expr::Num(x), n) => Expr::Num(x.powi(n as i32)),
        (b, n) => Expr::Pow(Box::new(b), n),
    }
}

impl Expr {
    pub fn variables(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Num(_) => {}
            Expr::Var(v) => {
                out.insert(v.clone());
            }
            Expr::Neg(e) | Expr::Pow(e, _) => e.collect_vars(out),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    /// Symbolic partial derivative with respect to `x`.
    pub fn derivative(&self, x: &str) -> Expr {
        match self {
            Expr::Num(_) => num(0.0),
            Expr::Var(v) => num(if v == x { 1.0 } else { 0.0 }),
            Expr::Neg(e) => neg(e.derivative(x)),
            Expr::Add(a, b) => add(a.derivative(x), b.derivative(x)),
            Expr::Sub(a, b) => sub(a.derivative(x), b.derivative(x)),
            Expr::Mul(a, b) => add(
                mul(a.derivative(x), (**b).clone()),
                mul((**a).clone(), b.derivative(x)),
            ),
            Expr::Div(a, b) => div(
                sub(
                    mul(a.derivative(x), (**b).clone()),
                    mul((**a).clone(), b.derivative(x)),
                ),
                pow((**b).clone(), 2),
            ),
            Expr::Pow(_, 0) => num(0.0),
            Expr::Pow(b, n) => mul(
                mul(num(*n as f64), pow((**b).clone(), n - 1)),
                b.derivative(x),
            ),
        }
    }

    /// Resolves variable names to slots in `names`. Returns the first unknown name on failure.
    pub fn compile(&self, names: &[String]) -> Result<CompiledExpr, String> {
        let slot = |v: &str| names.iter().position(|n| n == v).ok_or_else(|| v.to_string());
        let boxed = |e: &Expr| e.compile(names).map(Box::new);
        Ok(match self {
            Expr::Num(x) => CompiledExpr::Num(*x),
            Expr::Var(v) => CompiledExpr::Var(slot(v)?),
            Expr::Neg(e) => CompiledExpr::Neg(boxed(e)?),
            Expr::Add(a, b) => CompiledExpr::Add(boxed(a)?, boxed(b)?),
            Expr::Sub(a, b) => CompiledExpr::Sub(boxed(a)?, boxed(b)?),
            Expr::Mul(a, b) => CompiledExpr::Mul(boxed(a)?, boxed(b)?),
            Expr::Div(a, b) => CompiledExpr::Div(boxed(a)?, boxed(b)?),
            Expr::Pow(b, n) => CompiledExpr::Pow(boxed(b)?, *n),
        })
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(_) => 3,
            Expr::Pow(..) => 4,
            Expr::Num(x) if *x < 0.0 || x.is_sign_negative() => 3,
            Expr::Num(_) | Expr::Var(_) => 5,
        }
    }

    fn fmt_at(&self, min_prec: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.precedence() < min_prec {
            write!(f, "(")?;
            self.fmt_at(0, f)?;
            return write!(f, ")");
        }
        match self {
            Expr::Num(x) if x.is_sign_negative() => write!(f, "-{}", -x),
            Expr::Num(x) => write!(f, "{x}"),
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Neg(e) => {
                write!(f, "-")?;
                e.fmt_at(3, f)
            }
            Expr::Add(a, b) | Expr::Sub(a, b) => {
                a.fmt_at(1, f)?;
                write!(f, " {} ", if matches!(self, Expr::Add(..)) { '+' } else { '-' })?;
                b.fmt_at(2, f)
            }
            Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.fmt_at(2, f)?;
                write!(f, "{}", if matches!(self, Expr::Mul(..)) { '*' } else { '/' })?;
                b.fmt_at(3, f)
            }
            Expr::Pow(b, n) => {
                b.fmt_at(5, f)?;
                write!(f, "^{n}")
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_at(0, f)
    }
}

/// An [`Expr`] whose variables index into an evaluation slice.
#[derive(Debug, Clone, PartialEq)]
pub enum CompiledExpr {
    Num(f64),
    Var(usize),
    Neg(Box<CompiledExpr>),
    Add(Box<CompiledExpr>, Box<CompiledExpr>),
    Sub(Box<CompiledExpr>, Box<CompiledExpr>),
    Mul(Box<CompiledExpr>, Box<CompiledExpr>),
    Div(Box<CompiledExpr>, Box<CompiledExpr>),
    Pow(Box<CompiledExpr>, u32),
}

impl CompiledExpr {
    /// Plain IEEE evaluation; division by zero yields a non-finite value.
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            CompiledExpr::Num(v) => *v,
            CompiledExpr::Var(i) => x[*i],
            CompiledExpr::Neg(e) => -e.eval(x),
            CompiledExpr::Add(a, b) => a.eval(x) + b.eval(x),
            CompiledExpr::Sub(a, b) => a.eval(x) - b.eval(x),
            CompiledExpr::Mul(a, b) => a.eval(x) * b.eval(x),
            CompiledExpr::Div(a, b) => a.eval(x) / b.eval(x),
            CompiledExpr::Pow(b, n) => b.eval(x).powi(*n as i32),
        }
    }
}
