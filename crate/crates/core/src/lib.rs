//! A delta-complete decision procedure for bounded existential formulas over
//! the reals with polynomial, `exp`, `sin`, `cos` and ODE-solution terms.

pub mod expr;
pub mod interval;
pub mod odes;
pub mod prune;
pub mod normalize;
pub mod icp;
pub mod dpll;
pub mod oracle;
pub mod frontend;
