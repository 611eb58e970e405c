//! Second-order forward-mode jets: value, gradient and Hessian propagated
//! through the expression tree with the exact chain and product rules.

use super::expr::Node;

#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub gradient: Vec<f64>,
    /// Row-major `dim x dim`, symmetric by construction.
    pub hessian: Vec<f64>,
}

impl Jet {
    fn constant(value: f64, dim: usize) -> Self {
        Jet {
            value,
            gradient: vec![0.0; dim],
            hessian: vec![0.0; dim * dim],
        }
    }

    fn variable(x: &[f64], k: usize) -> Self {
        let dim = x.len();
        let mut jet = Jet::constant(x[k], dim);
        jet.gradient[k] = 1.0;
        jet
    }

    pub fn dim(&self) -> usize {
        self.gradient.len()
    }

    pub fn hess(&self, i: usize, j: usize) -> f64 {
        self.hessian[i * self.dim() + j]
    }

    pub fn laplacian(&self) -> f64 {
        (0..self.dim()).map(|i| self.hess(i, i)).sum()
    }

    /// `f(self)` given `f`, `f'`, `f''` evaluated at `self.value`.
    fn compose(&self, (f0, f1, f2): (f64, f64, f64)) -> Jet {
        let dim = self.dim();
        let mut out = Jet::constant(f0, dim);
        for i in 0..dim {
            out.gradient[i] = f1 * self.gradient[i];
        }
        for i in 0..dim {
            for j in i..dim {
                let h = f1 * self.hess(i, j) + f2 * self.gradient[i] * self.gradient[j];
                out.hessian[i * dim + j] = h;
                out.hessian[j * dim + i] = h;
            }
        }
        out
    }

    fn add(&self, other: &Jet, sign: f64) -> Jet {
        Jet {
            value: self.value + sign * other.value,
            gradient: self
                .gradient
                .iter()
                .zip(&other.gradient)
                .map(|(a, b)| a + sign * b)
                .collect(),
            hessian: self
                .hessian
                .iter()
                .zip(&other.hessian)
                .map(|(a, b)| a + sign * b)
                .collect(),
        }
    }

    fn mul(&self, other: &Jet) -> Jet {
        let dim = self.dim();
        let (a, b) = (self, other);
        let mut out = Jet::constant(a.value * b.value, dim);
        for i in 0..dim {
            out.gradient[i] = a.gradient[i] * b.value + a.value * b.gradient[i];
        }
        for i in 0..dim {
            for j in i..dim {
                let h = a.hess(i, j) * b.value
                    + a.gradient[i] * b.gradient[j]
                    + a.gradient[j] * b.gradient[i]
                    + a.value * b.hess(i, j);
                out.hessian[i * dim + j] = h;
                out.hessian[j * dim + i] = h;
            }
        }
        out
    }

    fn neg(&self) -> Jet {
        Jet {
            value: -self.value,
            gradient: self.gradient.iter().map(|g| -g).collect(),
            hessian: self.hessian.iter().map(|h| -h).collect(),
        }
    }
}

pub(crate) fn evaluate(node: &Node, x: &[f64]) -> Jet {
    let dim = x.len();
    match node {
        Node::Const(c) => Jet::constant(*c, dim),
        Node::Var(k) => Jet::variable(x, *k),
        Node::Neg(a) => evaluate(a, x).neg(),
        Node::Add(a, b) => evaluate(a, x).add(&evaluate(b, x), 1.0),
        Node::Sub(a, b) => evaluate(a, x).add(&evaluate(b, x), -1.0),
        Node::Mul(a, b) => evaluate(a, x).mul(&evaluate(b, x)),
        Node::Div(a, b) => {
            let denom = evaluate(b, x);
            let t = denom.value;
            let recip = denom.compose((1.0 / t, -1.0 / (t * t), 2.0 / (t * t * t)));
            evaluate(a, x).mul(&recip)
        }
        Node::Pow(a, n) => {
            let base = evaluate(a, x);
            let t = base.value;
            let n = *n;
            let f0 = t.powi(n);
            let f1 = if n == 0 {
                0.0
            } else {
                n as f64 * t.powi(n - 1)
            };
            let f2 = if n == 0 || n == 1 {
                0.0
            } else {
                (n as f64) * ((n - 1) as f64) * t.powi(n - 2)
            };
            base.compose((f0, f1, f2))
        }
        Node::Call(func, a) => {
            let inner = evaluate(a, x);
            let taylor = func.taylor2(inner.value);
            inner.compose(taylor)
        }
    }
}
