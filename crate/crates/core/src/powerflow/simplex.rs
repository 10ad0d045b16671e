//! Bounded-variable primal simplex over a dense tableau.
//!
//! Solves `min cᵀx  s.t.  Ax = b,  l ≤ x ≤ u` with finite lower bounds.
//! Phase 1 starts from every variable at its lower bound with one artificial
//! per row; phase 2 then optimises the real objective with artificials fixed
//! at zero. Pricing is Dantzig's rule, switching to Bland's rule after a run
//! of degenerate pivots so cycling cannot occur.

use thiserror::Error;

const EPS: f64 = 1e-9;
const PIVOT_EPS: f64 = 1e-9;
const DEGENERATE_RUN: usize = 30;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("problem is infeasible (phase 1 residual {0:.3e})")]
    Infeasible(f64),
    #[error("problem is unbounded")]
    Unbounded,
    #[error("iteration limit reached")]
    IterationLimit,
    #[error("variable {0} has an infinite or inverted lower bound")]
    BadBounds(usize),
}

/// Sparse equality row: `Σ coeffs · x = rhs`.
#[derive(Debug, Clone, Default)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
}

#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    pub cost: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub rows: Vec<Row>,
}

impl LinearProgram {
    pub fn add_var(&mut self, cost: f64, lower: f64, upper: f64) -> usize {
        self.cost.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.cost.len() - 1
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, rhs: f64) {
        self.rows.push(Row { coeffs, rhs });
    }

    pub fn num_vars(&self) -> usize {
        self.cost.len()
    }
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

#[derive(Clone, Copy, PartialEq, Debug)]
enum State {
    Basic(usize),
    AtLower,
    AtUpper,
}

struct Tableau {
    m: usize,
    n: usize,
    /// m rows of B⁻¹A, row-major with stride n.
    t: Vec<f64>,
    beta: Vec<f64>,
    basis: Vec<usize>,
    state: Vec<State>,
    x_nonbasic: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    iterations: usize,
}

impl Tableau {
    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.n + j]
    }

    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut d = cost.to_vec();
        for i in 0..self.m {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.t[i * self.n..(i + 1) * self.n];
                for (dj, a) in d.iter_mut().zip(row) {
                    *dj -= cb * a;
                }
            }
        }
        d
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let n = self.n;
        let piv = self.t[r * n + q];
        let inv = 1.0 / piv;
        for j in 0..n {
            self.t[r * n + j] *= inv;
        }
        self.t[r * n + q] = 1.0;
        let (before, rest) = self.t.split_at_mut(r * n);
        let (prow, after) = rest.split_at_mut(n);
        for row in before.chunks_exact_mut(n).chain(after.chunks_exact_mut(n)) {
            let f = row[q];
            if f != 0.0 {
                for (a, p) in row.iter_mut().zip(prow.iter()) {
                    *a -= f * p;
                }
                row[q] = 0.0;
            }
        }
    }

    /// Runs primal simplex iterations for `cost`; artificials with index
    /// `>= frozen_from` may not enter the basis.
    fn optimise(&mut self, cost: &[f64], frozen_from: usize, max_iter: usize) -> Result<(), LpError> {
        let mut degenerate = 0usize;
        let mut d = self.reduced_costs(cost);
        loop {
            if self.iterations >= max_iter {
                return Err(LpError::IterationLimit);
            }
            let bland = degenerate >= DEGENERATE_RUN;
            // entering variable
            let mut enter: Option<(usize, f64)> = None;
            let mut best = 0.0;
            for j in 0..frozen_from {
                let dir = match self.state[j] {
                    State::Basic(_) => continue,
                    State::AtLower if d[j] < -EPS && self.upper[j] > self.lower[j] => 1.0,
                    State::AtUpper if d[j] > EPS => -1.0,
                    _ => continue,
                };
                let score = d[j].abs();
                if bland {
                    enter = Some((j, dir));
                    break;
                }
                if score > best {
                    best = score;
                    enter = Some((j, dir));
                }
            }
            let Some((q, dir)) = enter else {
                return Ok(());
            };

            // ratio test: x_q moves by dir·step, basic i moves by −dir·α_i·step
            let mut step = self.upper[q] - self.lower[q];
            let mut leave: Option<(usize, bool)> = None; // (row, leaves at upper)
            for i in 0..self.m {
                let a = dir * self.at(i, q);
                let bvar = self.basis[i];
                let (limit, to_upper) = if a > PIVOT_EPS {
                    ((self.beta[i] - self.lower[bvar]) / a, false)
                } else if a < -PIVOT_EPS {
                    if self.upper[bvar].is_infinite() {
                        continue;
                    }
                    ((self.upper[bvar] - self.beta[i]) / -a, true)
                } else {
                    continue;
                };
                let limit = limit.max(0.0);
                let better = if limit < step - 1e-12 {
                    true
                } else if (limit - step).abs() <= 1e-12 {
                    // ties: Bland picks the lowest variable index, otherwise the
                    // larger pivot; a tie with the bound flip keeps the flip
                    match leave {
                        Some((r, _)) if bland => bvar < self.basis[r],
                        Some((r, _)) => self.at(i, q).abs() > self.at(r, q).abs(),
                        None => false,
                    }
                } else {
                    false
                };
                if better {
                    step = limit;
                    leave = Some((i, to_upper));
                }
            }
            if step.is_infinite() {
                return Err(LpError::Unbounded);
            }
            self.iterations += 1;
            if step <= 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }

            for i in 0..self.m {
                self.beta[i] -= dir * self.at(i, q) * step;
            }
            match leave {
                None => {
                    // bound flip
                    self.state[q] = if dir > 0.0 { State::AtUpper } else { State::AtLower };
                    self.x_nonbasic[q] = if dir > 0.0 { self.upper[q] } else { self.lower[q] };
                }
                Some((r, to_upper)) => {
                    let old = self.basis[r];
                    let entering_value = self.x_nonbasic[q] + dir * step;
                    self.state[old] = if to_upper { State::AtUpper } else { State::AtLower };
                    self.x_nonbasic[old] = if to_upper { self.upper[old] } else { self.lower[old] };
                    self.pivot(r, q);
                    self.basis[r] = q;
                    self.state[q] = State::Basic(r);
                    self.beta[r] = entering_value;
                    // update reduced costs with the pivot row
                    let dq = d[q];
                    if dq != 0.0 {
                        let row = &self.t[r * self.n..(r + 1) * self.n];
                        for (dj, a) in d.iter_mut().zip(row) {
                            *dj -= dq * a;
                        }
                    }
                    d[q] = 0.0;
                }
            }
            if self.iterations % 200 == 0 {
                d = self.reduced_costs(cost);
            }
        }
    }

    fn value(&self, j: usize) -> f64 {
        match self.state[j] {
            State::Basic(i) => self.beta[i],
            _ => self.x_nonbasic[j],
        }
    }
}

/// Solves the linear program to optimality.
pub fn solve(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    let ns = lp.num_vars();
    let m = lp.rows.len();
    for j in 0..ns {
        if !lp.lower[j].is_finite() || lp.upper[j] < lp.lower[j] - EPS {
            return Err(LpError::BadBounds(j));
        }
    }
    let n = ns + m;
    let mut lower = lp.lower.clone();
    let mut upper = lp.upper.clone();
    lower.extend(std::iter::repeat_n(0.0, m));
    upper.extend(std::iter::repeat_n(f64::INFINITY, m));

    let mut t = vec![0.0; m * n];
    let mut beta = vec![0.0; m];
    for (i, row) in lp.rows.iter().enumerate() {
        let mut residual = row.rhs;
        for &(j, a) in &row.coeffs {
            t[i * n + j] += a;
            residual -= a * lp.lower[j];
        }
        let sign = if residual < 0.0 { -1.0 } else { 1.0 };
        if sign < 0.0 {
            for v in &mut t[i * n..i * n + ns] {
                *v = -*v;
            }
        }
        t[i * n + ns + i] = 1.0;
        beta[i] = residual.abs();
    }
    let mut state = vec![State::AtLower; n];
    for i in 0..m {
        state[ns + i] = State::Basic(i);
    }
    let mut tab = Tableau {
        m,
        n,
        t,
        beta,
        basis: (ns..n).collect(),
        state,
        x_nonbasic: lower.clone(),
        lower,
        upper,
        iterations: 0,
    };
    let max_iter = 50 * (n + m) + 1000;

    // phase 1
    let mut phase1 = vec![0.0; n];
    for c in &mut phase1[ns..] {
        *c = 1.0;
    }
    tab.optimise(&phase1, n, max_iter)?;
    let infeasibility: f64 = (ns..n).map(|j| tab.value(j)).sum();
    let scale = 1.0 + lp.rows.iter().map(|r| r.rhs.abs()).fold(0.0, f64::max);
    if infeasibility > 1e-7 * scale {
        return Err(LpError::Infeasible(infeasibility));
    }
    // drive zero-valued artificials out of the basis where possible
    for r in 0..m {
        let b = tab.basis[r];
        if b < ns {
            continue;
        }
        if let Some(q) = (0..ns).find(|&j| {
            !matches!(tab.state[j], State::Basic(_)) && tab.at(r, j).abs() > 1e-7
        }) {
            let old = tab.basis[r];
            let val = tab.x_nonbasic[q];
            tab.state[old] = State::AtLower;
            tab.x_nonbasic[old] = 0.0;
            tab.pivot(r, q);
            tab.basis[r] = q;
            tab.state[q] = State::Basic(r);
            // the artificial sat at zero, so no other basic value moves
            tab.beta[r] = val;
        }
    }
    for j in ns..n {
        tab.upper[j] = 0.0;
    }

    // phase 2
    let mut cost = lp.cost.clone();
    cost.extend(std::iter::repeat_n(0.0, m));
    tab.optimise(&cost, ns, max_iter)?;

    let x: Vec<f64> = (0..ns)
        .map(|j| tab.value(j).clamp(lp.lower[j], lp.upper[j]))
        .collect();
    let objective = x.iter().zip(&lp.cost).map(|(a, c)| a * c).sum();
    Ok(LpSolution {
        x,
        objective,
        iterations: tab.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounded_two_variable() {
        // min -x - 2y  s.t. x + y + s = 4, 0<=x<=3, 0<=y<=2, s>=0
        let mut lp = LinearProgram::default();
        let x = lp.add_var(-1.0, 0.0, 3.0);
        let y = lp.add_var(-2.0, 0.0, 2.0);
        let s = lp.add_var(0.0, 0.0, f64::INFINITY);
        lp.add_row(vec![(x, 1.0), (y, 1.0), (s, 1.0)], 4.0);
        let sol = solve(&lp).unwrap();
        assert!((sol.objective + 6.0).abs() < 1e-9, "{sol:?}");
        assert!((sol.x[x] - 2.0).abs() < 1e-9);
        assert!((sol.x[y] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn negative_lower_bounds_and_equalities() {
        // min x0 + x1 s.t. x0 - x1 = -3, -5<=x0<=5, -5<=x1<=5  -> x0=-5, x1=-2
        let mut lp = LinearProgram::default();
        let a = lp.add_var(1.0, -5.0, 5.0);
        let b = lp.add_var(1.0, -5.0, 5.0);
        lp.add_row(vec![(a, 1.0), (b, -1.0)], -3.0);
        let sol = solve(&lp).unwrap();
        assert!((sol.objective + 7.0).abs() < 1e-9);
        assert!((sol.x[a] + 5.0).abs() < 1e-9);
    }

    #[test]
    fn detects_infeasible() {
        let mut lp = LinearProgram::default();
        let a = lp.add_var(0.0, 0.0, 1.0);
        let b = lp.add_var(0.0, 0.0, 1.0);
        lp.add_row(vec![(a, 1.0), (b, 1.0)], 3.0);
        assert!(matches!(solve(&lp), Err(LpError::Infeasible(_))));
    }

    #[test]
    fn detects_unbounded() {
        let mut lp = LinearProgram::default();
        let a = lp.add_var(-1.0, 0.0, f64::INFINITY);
        let b = lp.add_var(0.0, 0.0, f64::INFINITY);
        lp.add_row(vec![(a, 1.0), (b, -1.0)], 1.0);
        assert_eq!(solve(&lp).unwrap_err(), LpError::Unbounded);
    }

    #[test]
    fn redundant_rows() {
        let mut lp = LinearProgram::default();
        let a = lp.add_var(1.0, 0.0, 10.0);
        let b = lp.add_var(2.0, 0.0, 10.0);
        lp.add_row(vec![(a, 1.0), (b, 1.0)], 4.0);
        lp.add_row(vec![(a, 2.0), (b, 2.0)], 8.0);
        let sol = solve(&lp).unwrap();
        assert!((sol.objective - 4.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_transportation() {
        // 3x3 transportation with equal supplies/demands, a classic
        // degenerate case
        let cost = [[4.0, 6.0, 9.0], [5.0, 3.0, 8.0], [7.0, 5.0, 2.0]];
        let mut lp = LinearProgram::default();
        let mut v = [[0usize; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                v[i][j] = lp.add_var(cost[i][j], 0.0, f64::INFINITY);
            }
        }
        for i in 0..3 {
            lp.add_row((0..3).map(|j| (v[i][j], 1.0)).collect(), 1.0);
        }
        for j in 0..3 {
            lp.add_row((0..3).map(|i| (v[i][j], 1.0)).collect(), 1.0);
        }
        let sol = solve(&lp).unwrap();
        assert!((sol.objective - 9.0).abs() < 1e-9, "{}", sol.objective);
    }
}
