//! Forward-backward propagation over the term tape.

use super::{Constraint, PruneOperator, PruneResult};
use crate::interval::{cos_preimage, div_extended, root_preimage, sin_preimage, FloatBox, FloatInterval, Node};

pub struct Hc4;

impl PruneOperator for Hc4 {
    fn name(&self) -> &str {
        "hc4"
    }

    fn prune(&self, bx: &FloatBox, c: &Constraint) -> PruneResult {
        hc4_revise(bx, c)
    }
}

fn nonneg() -> FloatInterval {
    FloatInterval::new(0.0, f64::INFINITY)
}

/// Hull of `x ∩ (z / y)` using extended division.
fn div_narrow(x: &FloatInterval, z: &FloatInterval, y: &FloatInterval) -> FloatInterval {
    let (p, q) = div_extended(z, y);
    x.intersect(&p).hull(&x.intersect(&q))
}

/// One forward sweep computing enclosures of every subterm, then a backward
/// sweep projecting the band `[-delta, delta]` down to the variables.
pub fn hc4_revise(bx: &FloatBox, c: &Constraint) -> PruneResult {
    if bx.is_empty() {
        return PruneResult::empty(bx.dim());
    }
    let tape = c.tape();
    let nodes = tape.nodes();
    let mut vals = Vec::with_capacity(nodes.len());
    if tape.forward(bx, &mut vals).is_err() {
        // undefined somewhere in the box: keep it whole
        return PruneResult { bx: bx.clone(), changed: false };
    }
    let root = tape.root();
    vals[root] = vals[root].intersect(&c.band());
    if vals[root].is_empty() {
        return PruneResult::empty(bx.dim());
    }
    let mut out = bx.clone();
    for idx in (0..nodes.len()).rev() {
        let v = vals[idx];
        if v.is_empty() {
            return PruneResult::empty(bx.dim());
        }
        match &nodes[idx] {
            Node::Var(i) => out.set(*i, out.get(*i).intersect(&v)),
            Node::Const(k) => {
                if k.intersect(&v).is_empty() {
                    return PruneResult::empty(bx.dim());
                }
            }
            Node::Neg(a) => vals[*a] = vals[*a].intersect(&v.neg()),
            Node::Add(a, b) => {
                vals[*a] = vals[*a].intersect(&v.sub(&vals[*b]));
                vals[*b] = vals[*b].intersect(&v.sub(&vals[*a]));
            }
            Node::Sub(a, b) => {
                vals[*a] = vals[*a].intersect(&v.add(&vals[*b]));
                vals[*b] = vals[*b].intersect(&vals[*a].sub(&v));
            }
            Node::Mul(a, b) => {
                vals[*a] = div_narrow(&vals[*a], &v, &vals[*b]);
                vals[*b] = div_narrow(&vals[*b], &v, &vals[*a]);
            }
            Node::Div(a, b) => {
                // v = a / b with b never containing only zero here
                vals[*a] = vals[*a].intersect(&v.mul(&vals[*b]));
                vals[*b] = div_narrow(&vals[*b], &vals[*a], &v);
            }
            Node::Pow(a, n) => vals[*a] = root_preimage(&v, *n, &vals[*a]),
            Node::Exp(a) => vals[*a] = vals[*a].intersect(&v.ln()),
            Node::Sin(a) => vals[*a] = sin_preimage(&v, &vals[*a]),
            Node::Cos(a) => vals[*a] = cos_preimage(&v, &vals[*a]),
            Node::Abs(a) => {
                let m = v.intersect(&nonneg());
                vals[*a] = vals[*a].intersect(&m.hull(&m.neg()));
            }
            Node::Min(a, b) => {
                let floor = FloatInterval::checked(v.lo(), f64::INFINITY);
                let (va, vb) = (vals[*a].intersect(&floor), vals[*b].intersect(&floor));
                vals[*a] = if vb.lo() > v.hi() { va.intersect(&v) } else { va };
                vals[*b] = if va.lo() > v.hi() { vb.intersect(&v) } else { vb };
            }
            Node::Max(a, b) => {
                let ceil = FloatInterval::checked(f64::NEG_INFINITY, v.hi());
                let (va, vb) = (vals[*a].intersect(&ceil), vals[*b].intersect(&ceil));
                vals[*a] = if vb.hi() < v.lo() { va.intersect(&v) } else { va };
                vals[*b] = if va.hi() < v.lo() { vb.intersect(&v) } else { vb };
            }
            // flows are not inverted; their arguments stay as they are
            Node::Flow { .. } => {}
        }
    }
    if out.is_empty() || !c.consistent(&out) {
        return PruneResult::empty(bx.dim());
    }
    PruneResult::from_boxes(bx, out)
}
