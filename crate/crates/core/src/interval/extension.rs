//! Natural interval extensions of terms, compiled to a flat tape.

use std::sync::Arc;

use super::{FloatBox, FloatInterval, IntervalError};
use crate::expr::Term;
use crate::odes::{self, Ivp};

/// One tape instruction; operands refer to earlier nodes.
#[derive(Clone, Debug)]
pub enum Node {
    Var(usize),
    Const(FloatInterval),
    Neg(usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    Pow(usize, u32),
    Exp(usize),
    Sin(usize),
    Cos(usize),
    Min(usize, usize),
    Max(usize, usize),
    Abs(usize),
    Flow { ivp: Arc<Ivp>, component: usize, time: usize, init: Vec<usize> },
}

/// A term in post-order: children always precede their parents and the
/// root is the last node.
#[derive(Clone, Debug)]
pub struct Tape {
    nodes: Vec<Node>,
    vars: Vec<usize>,
}

impl Tape {
    pub fn compile(t: &Term) -> Tape {
        let mut nodes = Vec::with_capacity(t.size());
        push(t, &mut nodes);
        let vars = t.free_vars().into_iter().collect();
        Tape { nodes, vars }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn root(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Variables occurring in the term, ascending.
    pub fn vars(&self) -> &[usize] {
        &self.vars
    }

    pub fn has_flow(&self) -> bool {
        self.nodes.iter().any(|n| matches!(n, Node::Flow { .. }))
    }

    /// Forward sweep storing every node's enclosure in `vals`.
    pub fn forward(&self, bx: &FloatBox, vals: &mut Vec<FloatInterval>) -> Result<FloatInterval, IntervalError> {
        vals.clear();
        for node in &self.nodes {
            let v = apply(node, vals, bx)?;
            vals.push(v);
        }
        Ok(vals[self.root()])
    }

    pub fn eval(&self, bx: &FloatBox) -> Result<FloatInterval, IntervalError> {
        let mut vals = Vec::with_capacity(self.nodes.len());
        self.forward(bx, &mut vals)
    }
}

fn push(t: &Term, nodes: &mut Vec<Node>) -> usize {
    let un = |a: &Term, nodes: &mut Vec<Node>| push(a, nodes);
    let node = match t {
        Term::Var(i) => Node::Var(*i),
        Term::Const(c) => Node::Const(FloatInterval::hull_rational(c)),
        Term::Neg(a) => Node::Neg(un(a, nodes)),
        Term::Add(a, b) => Node::Add(un(a, nodes), un(b, nodes)),
        Term::Sub(a, b) => Node::Sub(un(a, nodes), un(b, nodes)),
        Term::Mul(a, b) => Node::Mul(un(a, nodes), un(b, nodes)),
        Term::Div(a, b) => Node::Div(un(a, nodes), un(b, nodes)),
        Term::Pow(a, n) => Node::Pow(un(a, nodes), *n),
        Term::Exp(a) => Node::Exp(un(a, nodes)),
        Term::Sin(a) => Node::Sin(un(a, nodes)),
        Term::Cos(a) => Node::Cos(un(a, nodes)),
        Term::Min(a, b) => Node::Min(un(a, nodes), un(b, nodes)),
        Term::Max(a, b) => Node::Max(un(a, nodes), un(b, nodes)),
        Term::Abs(a) => Node::Abs(un(a, nodes)),
        Term::Flow(fl) => {
            let time = un(&fl.time, nodes);
            let init = fl.init.iter().map(|a| un(a, nodes)).collect();
            Node::Flow { ivp: fl.ivp.clone(), component: fl.component, time, init }
        }
    };
    nodes.push(node);
    nodes.len() - 1
}

fn apply(node: &Node, v: &[FloatInterval], bx: &FloatBox) -> Result<FloatInterval, IntervalError> {
    Ok(match node {
        Node::Var(i) => bx.get(*i),
        Node::Const(c) => *c,
        Node::Neg(a) => v[*a].neg(),
        Node::Add(a, b) => v[*a].add(&v[*b]),
        Node::Sub(a, b) => v[*a].sub(&v[*b]),
        Node::Mul(a, b) => v[*a].mul(&v[*b]),
        Node::Div(a, b) => v[*a].div(&v[*b])?,
        Node::Pow(a, n) => v[*a].powi(*n),
        Node::Exp(a) => v[*a].exp(),
        Node::Sin(a) => v[*a].sin(),
        Node::Cos(a) => v[*a].cos(),
        Node::Min(a, b) => v[*a].min(&v[*b]),
        Node::Max(a, b) => v[*a].max(&v[*b]),
        Node::Abs(a) => v[*a].abs(),
        Node::Flow { ivp, component, time, init } => {
            let y0 = FloatBox::new(init.iter().map(|&i| v[i]).collect());
            if y0.is_empty() || v[*time].is_empty() {
                return Ok(FloatInterval::EMPTY);
            }
            // an integration failure leaves the value unconstrained
            odes::flow_extension(ivp, *component, v[*time], &y0).unwrap_or(FloatInterval::ENTIRE)
        }
    })
}

/// Natural interval extension: a superset of `{t(x) : x in bx}`.
pub fn natural_extension(t: &Term, bx: &FloatBox) -> Result<FloatInterval, IntervalError> {
    Tape::compile(t).eval(bx)
}

/// Enclosure of the gradient of `t` over `bx`, one interval per box
/// dimension, by forward-mode differentiation in interval arithmetic. At
/// kinks of `abs`, `min` and `max` the enclosure covers every one-sided
/// derivative.
pub fn gradient_enclosure(t: &Term, bx: &FloatBox) -> Result<Vec<FloatInterval>, IntervalError> {
    Tape::compile(t).gradient(bx)
}

impl Tape {
    /// As [`gradient_enclosure`] for a compiled term.
    pub fn gradient(&self, bx: &FloatBox) -> Result<Vec<FloatInterval>, IntervalError> {
        gradient_of(self, bx)
    }
}

fn gradient_of(tape: &Tape, bx: &FloatBox) -> Result<Vec<FloatInterval>, IntervalError> {
    if tape.has_flow() {
        return Err(IntervalError::Unsupported("derivative of an ODE flow".into()));
    }
    let n = bx.dim();
    let zero = FloatInterval::point(0.0);
    let mut vals: Vec<FloatInterval> = Vec::with_capacity(tape.nodes.len());
    let mut grads: Vec<Vec<FloatInterval>> = Vec::with_capacity(tape.nodes.len());
    let combine = |a: &[FloatInterval], b: &[FloatInterval], f: &dyn Fn(&FloatInterval, &FloatInterval) -> FloatInterval| {
        a.iter().zip(b).map(|(x, y)| f(x, y)).collect::<Vec<_>>()
    };
    let scale = |a: &[FloatInterval], k: &FloatInterval| a.iter().map(|x| x.mul(k)).collect::<Vec<_>>();
    for node in &tape.nodes {
        let val = apply(node, &vals, bx)?;
        let g = match node {
            Node::Var(i) => {
                let mut g = vec![zero; n];
                g[*i] = FloatInterval::point(1.0);
                g
            }
            Node::Const(_) => vec![zero; n],
            Node::Neg(a) => grads[*a].iter().map(|x| x.neg()).collect(),
            Node::Add(a, b) => combine(&grads[*a], &grads[*b], &|x, y| x.add(y)),
            Node::Sub(a, b) => combine(&grads[*a], &grads[*b], &|x, y| x.sub(y)),
            Node::Mul(a, b) => {
                let (va, vb) = (vals[*a], vals[*b]);
                combine(&grads[*a], &grads[*b], &|x, y| x.mul(&vb).add(&y.mul(&va)))
            }
            Node::Div(a, b) => {
                let (va, vb) = (vals[*a], vals[*b]);
                let den = vb.powi(2);
                let mut out = Vec::with_capacity(n);
                for (x, y) in grads[*a].iter().zip(&grads[*b]) {
                    out.push(x.mul(&vb).sub(&y.mul(&va)).div(&den)?);
                }
                out
            }
            Node::Pow(a, k) => {
                let d = if *k == 1 {
                    FloatInterval::point(1.0)
                } else {
                    vals[*a].powi(k - 1).scale(*k as f64)
                };
                scale(&grads[*a], &d)
            }
            Node::Exp(a) => scale(&grads[*a], &val),
            Node::Sin(a) => scale(&grads[*a], &vals[*a].cos()),
            Node::Cos(a) => scale(&grads[*a], &vals[*a].sin().neg()),
            Node::Abs(a) => {
                let x = vals[*a];
                let s = if x.lo() >= 0.0 {
                    FloatInterval::point(1.0)
                } else if x.hi() <= 0.0 {
                    FloatInterval::point(-1.0)
                } else {
                    FloatInterval::new(-1.0, 1.0)
                };
                scale(&grads[*a], &s)
            }
            Node::Min(a, b) | Node::Max(a, b) => {
                let (va, vb) = (vals[*a], vals[*b]);
                let is_min = matches!(node, Node::Min(..));
                let a_wins = if is_min { va.hi() < vb.lo() } else { va.lo() > vb.hi() };
                let b_wins = if is_min { vb.hi() < va.lo() } else { vb.lo() > va.hi() };
                if a_wins {
                    grads[*a].clone()
                } else if b_wins {
                    grads[*b].clone()
                } else {
                    combine(&grads[*a], &grads[*b], &|x, y| x.hull(y))
                }
            }
            Node::Flow { .. } => unreachable!(),
        };
        vals.push(val);
        grads.push(g);
    }
    Ok(grads.pop().expect("nonempty tape"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x() -> Term {
        Term::var(0)
    }

    fn y() -> Term {
        Term::var(1)
    }

    #[test]
    fn parabola_box_has_no_zero() {
        let t = x() - y().pow(2);
        let r = natural_extension(&t, &FloatBox::from_bounds(&[(1.0, 2.0), (2.0, 4.0)])).unwrap();
        assert!(r.hi() < 0.0);
    }

    #[test]
    fn dependency_effect() {
        let t = x() * x() - x();
        let r = natural_extension(&t, &FloatBox::from_bounds(&[(0.0, 1.0)])).unwrap();
        assert_eq!(r, FloatInterval::new(-1.0, 1.0));
        let c = natural_extension(&Term::int(5), &FloatBox::from_bounds(&[(0.0, 1.0)])).unwrap();
        assert_eq!(c, FloatInterval::point(5.0));
    }

    #[test]
    fn gradients() {
        let bx = FloatBox::from_bounds(&[(0.0, 7.0)]);
        let g = gradient_enclosure(&x().sin(), &bx).unwrap();
        assert_eq!(g[0], FloatInterval::new(-1.0, 1.0));
        let t = x() * y() + x().pow(3);
        let g = gradient_enclosure(&t, &FloatBox::from_bounds(&[(1.0, 2.0), (3.0, 4.0)])).unwrap();
        // d/dx = y + 3x^2 in [6, 16], d/dy = x in [1, 2]
        assert_eq!(g[0], FloatInterval::new(6.0, 16.0));
        assert_eq!(g[1], FloatInterval::new(1.0, 2.0));
    }
}
