//! Exact rational simplex, used as a reference for the floating-point solver.
//!
//! Tableau method with Bland's rule throughout, so it never cycles. Slow, but
//! the reference programs have at most a dozen rows and columns.

use num::{BigInt, BigRational, One, Signed, ToPrimitive, Zero};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rel {
    Le,
    Eq,
    Ge,
}

/// `max c·x` subject to the rows, with `x ≥ 0`.
#[derive(Debug, Clone)]
pub struct Program {
    pub c: Vec<BigRational>,
    pub rows: Vec<(Vec<BigRational>, Rel, BigRational)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Optimal { value: BigRational, x: Vec<BigRational> },
    Infeasible,
    Unbounded,
}

impl Outcome {
    pub fn value_f64(&self) -> Option<f64> {
        match self {
            Outcome::Optimal { value, .. } => Some(to_f64(value)),
            _ => None,
        }
    }
}

/// Integer data, convenient for random generation.
#[derive(Debug, Clone)]
pub struct IntProgram {
    pub num_vars: usize,
    pub maximize: bool,
    pub c: Vec<i64>,
    pub rows: Vec<(Vec<i64>, Rel, i64)>,
    /// Optional upper bound per variable.
    pub upper: Vec<Option<i64>>,
}

impl IntProgram {
    /// The equivalent maximization with bounds written as rows.
    pub fn to_rational(&self) -> Program {
        let q = |v: i64| BigRational::from_integer(BigInt::from(v));
        let sign = if self.maximize { 1 } else { -1 };
        let mut rows: Vec<_> = self
            .rows
            .iter()
            .map(|(a, rel, b)| (a.iter().map(|&v| q(v)).collect(), *rel, q(*b)))
            .collect();
        for (j, u) in self.upper.iter().enumerate() {
            if let Some(u) = u {
                let mut a = vec![BigRational::zero(); self.num_vars];
                a[j] = BigRational::one();
                rows.push((a, Rel::Le, q(*u)));
            }
        }
        Program {
            c: self.c.iter().map(|&v| q(sign * v)).collect(),
            rows,
        }
    }

    /// Optimal value in the program's own sense.
    pub fn solve_exact(&self) -> Outcome {
        match solve(&self.to_rational()) {
            Outcome::Optimal { value, x } if !self.maximize => Outcome::Optimal { value: -value, x },
            other => other,
        }
    }
}

pub fn to_f64(q: &BigRational) -> f64 {
    q.to_f64().expect("rational out of f64 range")
}

struct Tableau {
    rows: Vec<Vec<BigRational>>,
    rhs: Vec<BigRational>,
    basis: Vec<usize>,
}

impl Tableau {
    fn pivot(&mut self, r: usize, col: usize) {
        let p = self.rows[r][col].clone();
        for v in self.rows[r].iter_mut() {
            *v = &*v / &p;
        }
        self.rhs[r] = &self.rhs[r] / &p;
        for i in 0..self.rows.len() {
            if i == r || self.rows[i][col].is_zero() {
                continue;
            }
            let f = self.rows[i][col].clone();
            for j in 0..self.rows[i].len() {
                let d = &f * &self.rows[r][j];
                self.rows[i][j] -= d;
            }
            let d = &f * &self.rhs[r];
            self.rhs[i] -= d;
        }
        self.basis[r] = col;
    }

    fn objective(&self, cost: &[BigRational]) -> BigRational {
        self.basis
            .iter()
            .zip(&self.rhs)
            .fold(BigRational::zero(), |acc, (&b, v)| acc + &cost[b] * v)
    }

    /// Maximizes `cost` over the allowed columns. Returns false if unbounded.
    fn run(&mut self, cost: &[BigRational], allowed: usize) -> bool {
        loop {
            let entering = (0..allowed).find(|&j| {
                if self.basis.contains(&j) {
                    return false;
                }
                let reduced = self
                    .basis
                    .iter()
                    .enumerate()
                    .fold(cost[j].clone(), |acc, (i, &b)| acc - &cost[b] * &self.rows[i][j]);
                reduced.is_positive()
            });
            let Some(col) = entering else { return true };
            let mut best: Option<(usize, BigRational)> = None;
            for i in 0..self.rows.len() {
                if !self.rows[i][col].is_positive() {
                    continue;
                }
                let ratio = &self.rhs[i] / &self.rows[i][col];
                let better = match &best {
                    None => true,
                    Some((bi, br)) => ratio < *br || (ratio == *br && self.basis[i] < self.basis[*bi]),
                };
                if better {
                    best = Some((i, ratio));
                }
            }
            let Some((r, _)) = best else { return false };
            self.pivot(r, col);
        }
    }
}

pub fn solve(p: &Program) -> Outcome {
    let n = p.c.len();
    let m = p.rows.len();
    let slacks = p.rows.iter().filter(|r| r.1 != Rel::Eq).count();
    let art0 = n + slacks;
    let width = art0 + m;
    let mut t = Tableau {
        rows: Vec::with_capacity(m),
        rhs: Vec::with_capacity(m),
        basis: Vec::with_capacity(m),
    };
    let mut slack = n;
    for (i, (a, rel, b)) in p.rows.iter().enumerate() {
        let mut row = vec![BigRational::zero(); width];
        row[..n].clone_from_slice(a);
        match rel {
            Rel::Le => row[slack] = BigRational::one(),
            Rel::Ge => row[slack] = -BigRational::one(),
            Rel::Eq => {}
        }
        if *rel != Rel::Eq {
            slack += 1;
        }
        let mut b = b.clone();
        if b.is_negative() {
            row.iter_mut().for_each(|v| *v = -v.clone());
            b = -b;
        }
        row[art0 + i] = BigRational::one();
        t.rows.push(row);
        t.rhs.push(b);
        t.basis.push(art0 + i);
    }

    let mut phase1 = vec![BigRational::zero(); width];
    phase1[art0..].iter_mut().for_each(|v| *v = -BigRational::one());
    t.run(&phase1, width);
    if t.objective(&phase1).is_negative() {
        return Outcome::Infeasible;
    }
    // Drive zero-level artificials out of the basis; drop redundant rows.
    let mut i = 0;
    while i < t.rows.len() {
        if t.basis[i] >= art0 {
            match (0..art0).find(|&j| !t.rows[i][j].is_zero()) {
                Some(j) => t.pivot(i, j),
                None => {
                    t.rows.remove(i);
                    t.rhs.remove(i);
                    t.basis.remove(i);
                    continue;
                }
            }
        }
        i += 1;
    }

    let mut cost = vec![BigRational::zero(); width];
    cost[..n].clone_from_slice(&p.c);
    if !t.run(&cost, art0) {
        return Outcome::Unbounded;
    }
    let mut x = vec![BigRational::zero(); n];
    for (i, &b) in t.basis.iter().enumerate() {
        if b < n {
            x[b] = t.rhs[i].clone();
        }
    }
    Outcome::Optimal {
        value: t.objective(&cost),
        x,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ip(c: Vec<i64>, rows: Vec<(Vec<i64>, Rel, i64)>) -> IntProgram {
        IntProgram {
            num_vars: c.len(),
            maximize: true,
            upper: vec![None; c.len()],
            c,
            rows,
        }
    }

    #[test]
    fn textbook_program() {
        // max 3x + 5y, x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18: optimum 36 at (2, 6)
        let p = ip(
            vec![3, 5],
            vec![(vec![1, 0], Rel::Le, 4), (vec![0, 2], Rel::Le, 12), (vec![3, 2], Rel::Le, 18)],
        );
        assert_eq!(p.solve_exact().value_f64(), Some(36.0));
    }

    #[test]
    fn infeasible_and_unbounded() {
        let p = ip(vec![1], vec![(vec![1], Rel::Ge, 2), (vec![1], Rel::Le, 1)]);
        assert_eq!(p.solve_exact(), Outcome::Infeasible);
        let p = ip(vec![1, 0], vec![(vec![1, -1], Rel::Le, 1)]);
        assert_eq!(p.solve_exact(), Outcome::Unbounded);
    }

    #[test]
    fn equality_with_redundant_row() {
        let mut p = ip(vec![1, 1], vec![(vec![1, 1], Rel::Eq, 2), (vec![2, 2], Rel::Eq, 4)]);
        p.maximize = false;
        assert_eq!(p.solve_exact().value_f64(), Some(2.0));
    }

    #[test]
    fn fractional_optimum() {
        // max x + y, 3x + y ≤ 2, x + 3y ≤ 2: optimum 1 at (1/2, 1/2)
        let p = ip(vec![1, 1], vec![(vec![3, 1], Rel::Le, 2), (vec![1, 3], Rel::Le, 2)]);
        match p.solve_exact() {
            Outcome::Optimal { value, x } => {
                assert_eq!(value, BigRational::one());
                assert_eq!(x[0], BigRational::new(1.into(), 2.into()));
            }
            o => panic!("{o:?}"),
        }
    }
}
