//! Random instance generators and independent checkers shared by the
//! integration tests and the acceptance suite.
#![allow(dead_code)]

use std::sync::Arc;

use deltasat::expr::{rational_from_f64, RationalInterval, Term};
use deltasat::icp::{certificate_check, solve_conjunction, IcpAnswer, IcpConfig};
use deltasat::interval::round::pad_up;
use deltasat::interval::{rational_up, FloatBox, FloatInterval};
use deltasat::normalize::{delta_weaken, StandardForm};
use deltasat::expr::Truth;
use deltasat::odes::{ode_extension, ode_prune, Ivp};
use deltasat::oracle::{grid_decide_with, OracleAnswer, OracleConfig, OracleError};
use deltasat::prune::{Constraint, PruneResult};
use num_rational::BigRational;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;

pub type TestRng = ChaCha8Rng;

pub fn rng(seed: u64) -> TestRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

/// Random term over variables `0..nvars` using every operator. Divisors have
/// the form `1 + b^2`, so every term is defined everywhere.
pub fn random_term(rng: &mut TestRng, nvars: usize, depth: u32) -> Term {
    if depth == 0 || rng.gen_bool(0.25) {
        return if rng.gen_bool(0.65) {
            Term::var(rng.gen_range(0..nvars))
        } else {
            Term::ratio(rng.gen_range(-6..=6), rng.gen_range(1..=3))
        };
    }
    let sub = |rng: &mut TestRng| random_term(rng, nvars, depth - 1);
    match rng.gen_range(0..13) {
        0 => -sub(rng),
        1 => sub(rng) + sub(rng),
        2 => sub(rng) - sub(rng),
        3 => sub(rng) * sub(rng),
        4 => sub(rng) / (Term::int(1) + sub(rng).pow(2)),
        5 => sub(rng).pow(rng.gen_range(1..=3)),
        6 => sub(rng).sin().exp(),
        7 => (sub(rng) * Term::ratio(1, 2)).exp(),
        8 => sub(rng).sin(),
        9 => sub(rng).cos(),
        10 => sub(rng).abs(),
        11 => sub(rng).min(sub(rng)),
        _ => sub(rng).max(sub(rng)),
    }
}

pub fn random_box(rng: &mut TestRng, nvars: usize) -> FloatBox {
    let bounds: Vec<(f64, f64)> = (0..nvars)
        .map(|_| {
            let lo = rng.gen_range(-3.0..3.0);
            let w = if rng.gen_bool(0.1) { 0.0 } else { rng.gen_range(0.0..2.5) };
            (lo, lo + w)
        })
        .collect();
    FloatBox::from_bounds(&bounds)
}

pub fn random_point(rng: &mut TestRng, bx: &FloatBox) -> Vec<f64> {
    bx.intervals()
        .iter()
        .map(|d| if d.width() == 0.0 { d.lo() } else { rng.gen_range(d.lo()..=d.hi()) })
        .collect()
}

pub fn point_box(p: &[f64]) -> FloatBox {
    FloatBox::new(p.iter().map(|&x| FloatInterval::point(x)).collect())
}

/// Counts of violated conditions over a batch of pruning cases.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Violations {
    pub cases: usize,
    pub w1: usize,
    pub w2: usize,
    pub w3: usize,
}

impl Violations {
    pub fn total(&self) -> usize {
        self.w1 + self.w2 + self.w3
    }
}

const GRID: usize = 24;

/// Points of a dense grid over the box whose rigorous point enclosure lies
/// inside the band, so they are solutions of the relaxed constraint.
pub fn band_solutions(bx: &FloatBox, c: &Constraint) -> Vec<Vec<f64>> {
    let axes: Vec<Vec<f64>> = bx
        .intervals()
        .iter()
        .map(|d| {
            if d.width() == 0.0 {
                vec![d.lo()]
            } else {
                (0..=GRID).map(|k| (d.lo() + d.width() * k as f64 / GRID as f64).min(d.hi())).collect()
            }
        })
        .collect();
    let mut out = Vec::new();
    let mut idx = vec![0usize; axes.len()];
    loop {
        let p: Vec<f64> = idx.iter().zip(&axes).map(|(&k, a)| a[k]).collect();
        if c.range(&point_box(&p)).is_subset(&c.certificate_band()) {
            out.push(p);
        }
        let mut d = 0;
        loop {
            if d == idx.len() {
                return out;
            }
            idx[d] += 1;
            if idx[d] < axes[d].len() {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

pub fn random_delta(rng: &mut TestRng) -> BigRational {
    match rng.gen_range(0..4) {
        0 => q(0, 1),
        1 => q(1, 100),
        2 => q(1, 10),
        _ => q(1, 2),
    }
}

/// The two functions the well-definedness discussion is built on, mixed in
/// with random terms.
pub fn suite_constraint(rng: &mut TestRng, case: usize) -> (FloatBox, Constraint) {
    let x = Term::var(0);
    let y = Term::var(1);
    let (bx, term) = match case % 10 {
        0 => (FloatBox::from_bounds(&[(-1.0, 1.0), (-1.0, 1.0)]), x.pow(2) + Term::int(1)),
        1 => (FloatBox::from_bounds(&[(1.0, 2.0), (0.0, 4.0)]), x - y.pow(2)),
        _ => (random_box(rng, 2), random_term(rng, 2, 3)),
    };
    (bx, Constraint::new(term, random_delta(rng)))
}

/// Check one pruning result against the three conditions.
pub fn check_case(bx: &FloatBox, c: &Constraint, r: &PruneResult, v: &mut Violations) {
    v.cases += 1;
    if !r.is_empty() && !r.bx.is_subset(bx) {
        v.w1 += 1;
    }
    if !r.is_empty() {
        let pad = pad_up(rational_up(&c.delta), 2);
        let range = c.range(&r.bx);
        if !(range.lo() <= pad && range.hi() >= -pad) {
            v.w2 += 1;
        }
    }
    if band_solutions(bx, c).iter().any(|p| r.is_empty() || !r.bx.contains_point(p)) {
        v.w3 += 1;
    }
}

pub fn w_suite(cases: usize, seed: u64, op: impl Fn(&mut TestRng, &FloatBox, &Constraint) -> PruneResult) -> Violations {
    let mut rng = rng(seed);
    let mut v = Violations::default();
    for case in 0..cases {
        let (bx, c) = suite_constraint(&mut rng, case);
        let r = op(&mut rng, &bx, &c);
        check_case(&bx, &c, &r, &mut v);
    }
    v
}

/// Fields with closed-form flows `y(t; y0)`.
#[derive(Clone, Copy, Debug)]
pub enum ClosedForm {
    Decay,
    Growth,
    Drift(f64),
}

impl ClosedForm {
    pub fn ivp(self) -> Arc<Ivp> {
        let field = match self {
            ClosedForm::Decay => -Term::var(0),
            ClosedForm::Growth => Term::var(0),
            ClosedForm::Drift(c) => Term::constant(rational_from_f64(c)),
        };
        Arc::new(Ivp::new("f", vec!["y".into()], vec![field], q(0, 1), q(1, 1)).unwrap())
    }

    pub fn solution(self, t: f64, y0: f64) -> f64 {
        match self {
            ClosedForm::Decay => y0 * (-t).exp(),
            ClosedForm::Growth => y0 * t.exp(),
            ClosedForm::Drift(c) => y0 + c * t,
        }
    }
}

// slack for the float rounding of the closed-form reference values
const REFERENCE_SLACK: f64 = 1e-12;

pub fn ode_w_suite(cases: usize, seed: u64) -> Violations {
    let mut rng = rng(seed);
    let mut v = Violations::default();
    for _ in 0..cases {
        let field = match rng.gen_range(0..3) {
            0 => ClosedForm::Decay,
            1 => ClosedForm::Growth,
            _ => ClosedForm::Drift(rng.gen_range(-2.0..2.0)),
        };
        let ivp = field.ivp();
        let t_lo = rng.gen_range(0.0..1.0);
        let t_iv = FloatInterval::new(t_lo, rng.gen_range(t_lo..=1.0));
        let y_lo = rng.gen_range(-2.0..2.0);
        let y0 = FloatBox::from_bounds(&[(y_lo, y_lo + rng.gen_range(0.0..1.0))]);
        let i_lo = rng.gen_range(-3.0..3.0);
        let iv = FloatInterval::new(i_lo, i_lo + rng.gen_range(0.0..3.0));
        let r = ode_prune(iv, &ivp, 0, t_iv, &y0);
        v.cases += 1;
        if !r.is_empty() && !r.is_subset(&iv) {
            v.w1 += 1;
        }
        if !r.is_empty() {
            let ext = ode_extension(&ivp, 0, t_iv, &y0).unwrap();
            if !r.is_subset(&ext) {
                v.w2 += 1;
            }
        }
        let mut lost = false;
        for a in 0..=16 {
            for b in 0..=16 {
                let t = t_iv.lo() + (t_iv.hi() - t_iv.lo()) * a as f64 / 16.0;
                let y = y0.get(0).lo() + y0.get(0).width() * b as f64 / 16.0;
                let s = field.solution(t.min(t_iv.hi()), y.min(y0.get(0).hi()));
                let inside = s > iv.lo() + REFERENCE_SLACK && s < iv.hi() - REFERENCE_SLACK;
                if inside && (r.is_empty() || s < r.lo() - REFERENCE_SLACK || s > r.hi() + REFERENCE_SLACK) {
                    lost = true;
                }
            }
        }
        v.w3 += lost as usize;
    }
    v
}

/// Random conjunction of one or two equalities over one or two variables,
/// drawn from polynomial, exponential and trigonometric families.
pub fn random_conjunction(rng: &mut TestRng) -> StandardForm {
    let nvars = rng.gen_range(1..=2);
    let bounds: Vec<RationalInterval> = (0..nvars)
        .map(|_| {
            let lo = rng.gen_range(-2..=1);
            RationalInterval::closed_int(lo, lo + rng.gen_range(1..=2))
        })
        .collect();
    let natoms = rng.gen_range(1..=nvars);
    let terms = (0..natoms)
        .map(|_| {
            let x = Term::var(rng.gen_range(0..nvars));
            let y = Term::var(rng.gen_range(0..nvars));
            let c = Term::ratio(rng.gen_range(-12..=12), 4);
            match rng.gen_range(0..6) {
                0 => x.pow(2) - c,
                1 => x.clone().pow(3) - x - c,
                2 => x * y - c,
                3 => x.exp() - y - c,
                4 => x.sin() - c,
                _ => x.sin() + y.cos() - c,
            }
        })
        .collect();
    StandardForm::from_conjunction(bounds, terms)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Agreement {
    Agree,
    /// One side unsat, the other delta-sat, with the finer grid confirming
    /// the problem has no exact solution but a delta-close one.
    Overlap,
    /// ICP ran out of boxes or the grid is too large.
    Undecided,
    Contradiction(String),
}

pub fn icp_vs_oracle(sf: &StandardForm, delta: &BigRational, max_points: u64) -> Agreement {
    let cs: Vec<Constraint> = sf.clauses.iter().map(|c| Constraint::new(c[0].clone(), delta.clone())).collect();
    let terms: Vec<Term> = cs.iter().map(|c| c.term.clone()).collect();
    let icp = solve_conjunction(&cs, &sf.domain_box(), &IcpConfig::new(delta.clone())).unwrap();
    let ocfg = OracleConfig { max_points, ..OracleConfig::default() };
    let oracle = match grid_decide_with(sf, delta, &ocfg) {
        Ok(r) => r.answer,
        Err(OracleError::GridTooLarge { .. }) => return Agreement::Undecided,
        Err(e) => return Agreement::Contradiction(format!("oracle error {e}")),
    };
    if let IcpAnswer::DeltaSat(cert) = &icp {
        if !certificate_check(&cert.witness, &terms, delta) || !cert.witness.is_subset(&sf.domain_box()) {
            return Agreement::Contradiction("icp certificate fails the check".into());
        }
    }
    if let OracleAnswer::DeltaSat(p) = &oracle {
        if delta_weaken(sf, delta.clone()).unwrap().holds_at(p) != Truth::True {
            return Agreement::Contradiction("oracle point violates the weakening".into());
        }
    }
    match (&icp, &oracle) {
        (IcpAnswer::ResourceOut, _) => Agreement::Undecided,
        (IcpAnswer::Unsat, OracleAnswer::Unsat) | (IcpAnswer::DeltaSat(_), OracleAnswer::DeltaSat(_)) => Agreement::Agree,
        _ => {
            let fine = delta / BigRational::from_integer(10.into());
            match grid_decide_with(sf, &fine, &ocfg) {
                Ok(r) if r.answer == OracleAnswer::Unsat => Agreement::Overlap,
                Ok(_) => Agreement::Contradiction(format!("icp {} / oracle {:?}; finer grid finds a near-solution", icp_verdict(&icp), oracle)),
                Err(_) => Agreement::Undecided,
            }
        }
    }
}

fn icp_verdict(a: &IcpAnswer) -> &'static str {
    match a {
        IcpAnswer::Unsat => "unsat",
        IcpAnswer::DeltaSat(_) => "delta-sat",
        IcpAnswer::ResourceOut => "resource-out",
    }
}

/// Largest magnitude of the natural extension of any subterm of `t` over `bx`.
pub fn largest_value(t: &Term, bx: &FloatBox) -> f64 {
    let own = deltasat::interval::natural_extension(t, bx).map_or(f64::INFINITY, |r| r.mag());
    t.children().into_iter().map(|c| largest_value(c, bx)).fold(own, f64::max)
}
