//! Linear encodings of binary products for the mixed-integer form of the
//! branch constraints.
//!
//! The branch constraints multiply the line status with both endpoint
//! statuses. The product of three binaries is built pairwise: an auxiliary
//! `pair = u_line · u_from` and then `triple = pair · u_to`, each encoded with
//! the three standard McCormick inequalities.

use crate::grid::Line;

/// Big-M used by the relaxed voltage-drop rows, in per-unit voltage.
pub const DEFAULT_BIG_M: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
}

/// `Σ coeffs[i]·x[i]  (≤ | ≥)  rhs` over a fixed variable order.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub coeffs: Vec<f64>,
    pub sense: Sense,
    pub rhs: f64,
}

impl LinearConstraint {
    fn new(coeffs: Vec<f64>, sense: Sense, rhs: f64) -> Self {
        LinearConstraint { coeffs, sense, rhs }
    }

    pub fn holds(&self, x: &[f64]) -> bool {
        let lhs: f64 = self.coeffs.iter().zip(x).map(|(a, b)| a * b).sum();
        match self.sense {
            Sense::Le => lhs <= self.rhs + 1e-9,
            Sense::Ge => lhs >= self.rhs - 1e-9,
        }
    }
}

/// Constraint set over the variable order `[u1, u2, u3, pair, triple]`.
#[derive(Debug, Clone)]
pub struct TripleProductLinearization {
    pub constraints: Vec<LinearConstraint>,
}

impl TripleProductLinearization {
    pub const U1: usize = 0;
    pub const U2: usize = 1;
    pub const U3: usize = 2;
    pub const PAIR: usize = 3;
    pub const TRIPLE: usize = 4;

    pub fn holds(&self, x: &[f64; 5]) -> bool {
        self.constraints.iter().all(|c| c.holds(x))
    }

    /// All binary `(pair, triple)` assignments feasible for fixed inputs.
    pub fn feasible_auxiliaries(&self, u1: u8, u2: u8, u3: u8) -> Vec<(u8, u8)> {
        let mut out = Vec::new();
        for pair in 0..=1u8 {
            for triple in 0..=1u8 {
                let x = [u1, u2, u3, pair, triple].map(f64::from);
                if self.holds(&x) {
                    out.push((pair, triple));
                }
            }
        }
        out
    }
}

/// McCormick rows for `triple = u1·u2·u3` via `pair = u1·u2`.
pub fn linearize_triple_product() -> TripleProductLinearization {
    use Sense::*;
    let row = |u1: f64, u2: f64, u3: f64, pair: f64, triple: f64, sense, rhs| {
        LinearConstraint::new(vec![u1, u2, u3, pair, triple], sense, rhs)
    };
    TripleProductLinearization {
        constraints: vec![
            // pair ≤ u1, pair ≤ u2, pair ≥ u1 + u2 − 1
            row(-1.0, 0.0, 0.0, 1.0, 0.0, Le, 0.0),
            row(0.0, -1.0, 0.0, 1.0, 0.0, Le, 0.0),
            row(-1.0, -1.0, 0.0, 1.0, 0.0, Ge, -1.0),
            // triple ≤ pair, triple ≤ u3, triple ≥ pair + u3 − 1
            row(0.0, 0.0, 0.0, -1.0, 1.0, Le, 0.0),
            row(0.0, 0.0, -1.0, 0.0, 1.0, Le, 0.0),
            row(0.0, 0.0, -1.0, -1.0, 1.0, Ge, -1.0),
        ],
    }
}

/// Mixed-integer branch rows for one line over `[v_from, v_to, p, q, z]`
/// where `z` is the linearized energization product.
#[derive(Debug, Clone)]
pub struct BigMBranchRows {
    pub constraints: Vec<LinearConstraint>,
}

impl BigMBranchRows {
    pub fn holds(&self, v_from: f64, v_to: f64, p: f64, q: f64, z: f64) -> bool {
        let x = [v_from, v_to, p, q, z];
        self.constraints.iter().all(|c| c.holds(&x))
    }
}

/// `−M(1−z) ≤ v_from − v_to − (ρp + χq) ≤ M(1−z)` and `|p|, |q| ≤ S_max·z`.
pub fn branch_flow_rows(line: &Line, big_m: f64) -> BigMBranchRows {
    use Sense::*;
    let (r, x, s) = (line.resistance, line.reactance, line.capacity_mva);
    let c = |v: [f64; 5], sense, rhs| LinearConstraint::new(v.to_vec(), sense, rhs);
    BigMBranchRows {
        constraints: vec![
            // v_f − v_t − ρp − χq + M z ≤ M
            c([1.0, -1.0, -r, -x, big_m], Le, big_m),
            // v_f − v_t − ρp − χq − M z ≥ −M
            c([1.0, -1.0, -r, -x, -big_m], Ge, -big_m),
            c([0.0, 0.0, 1.0, 0.0, -s], Le, 0.0),
            c([0.0, 0.0, 1.0, 0.0, s], Ge, 0.0),
            c([0.0, 0.0, 0.0, 1.0, -s], Le, 0.0),
            c([0.0, 0.0, 0.0, 1.0, s], Ge, 0.0),
        ],
    }
}
