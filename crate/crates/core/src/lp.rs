//! Exact rational linear programming: a dense two-phase primal simplex with
//! Bland's rule, so every run is deterministic and cannot cycle.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use num_traits::{Signed, Zero};

use crate::rational::Rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Objective {
    pub direction: Direction,
    pub coeffs: Vec<(usize, Rational)>,
}

impl Objective {
    pub fn maximize(coeffs: Vec<(usize, Rational)>) -> Self {
        Objective {
            direction: Direction::Maximize,
            coeffs,
        }
    }

    pub fn minimize(coeffs: Vec<(usize, Rational)>) -> Self {
        Objective {
            direction: Direction::Minimize,
            coeffs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    pub name: String,
    pub coeffs: Vec<(usize, Rational)>,
    pub relation: Relation,
    pub rhs: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearProgram {
    pub variables: Vec<String>,
    pub nonneg: Vec<bool>,
    pub constraints: Vec<Constraint>,
    pub objective: Objective,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// One value per variable; present iff `status` is `Optimal`.
    pub assignment: Option<Vec<Rational>>,
    pub objective_value: Option<Rational>,
}

impl LpSolution {
    fn without_point(status: LpStatus) -> Self {
        LpSolution {
            status,
            assignment: None,
            objective_value: None,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    /// Value of variable `v`; zero when there is no assignment.
    pub fn value(&self, v: usize) -> Rational {
        self.assignment
            .as_ref()
            .map(|a| a[v].clone())
            .unwrap_or_else(Rational::zero)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LpError {
    #[error("constraint {constraint:?} references undeclared variable {variable}")]
    UnknownVariable { constraint: String, variable: usize },
    #[error("objective references undeclared variable {0}")]
    UnknownObjectiveVariable(usize),
    #[error("simplex returned a point violating constraint {0:?}")]
    VerificationFailed(String),
}

impl LinearProgram {
    pub fn new(direction: Direction) -> Self {
        LinearProgram {
            variables: Vec::new(),
            nonneg: Vec::new(),
            constraints: Vec::new(),
            objective: Objective {
                direction,
                coeffs: Vec::new(),
            },
        }
    }

    pub fn add_nonneg(&mut self, name: impl Into<String>) -> usize {
        self.variables.push(name.into());
        self.nonneg.push(true);
        self.variables.len() - 1
    }

    pub fn add_free(&mut self, name: impl Into<String>) -> usize {
        self.variables.push(name.into());
        self.nonneg.push(false);
        self.variables.len() - 1
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        coeffs: Vec<(usize, Rational)>,
        relation: Relation,
        rhs: Rational,
    ) {
        self.constraints.push(Constraint {
            name: name.into(),
            coeffs: merge(coeffs),
            relation,
            rhs,
        });
    }

    pub fn set_objective(&mut self, coeffs: Vec<(usize, Rational)>) {
        self.objective.coeffs = merge(coeffs);
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn objective_at(&self, x: &[Rational]) -> Rational {
        dot(&self.objective.coeffs, x)
    }

    /// First constraint violated by `x`, if any. Exact.
    pub fn first_violation(&self, x: &[Rational]) -> Option<&str> {
        for (v, ok) in self.nonneg.iter().enumerate() {
            if *ok && x[v].is_negative() {
                return Some(&self.variables[v]);
            }
        }
        self.constraints
            .iter()
            .find(|c| {
                let lhs = dot(&c.coeffs, x);
                match c.relation {
                    Relation::Le => lhs > c.rhs,
                    Relation::Eq => lhs != c.rhs,
                    Relation::Ge => lhs < c.rhs,
                }
            })
            .map(|c| c.name.as_str())
    }

    fn check_well_formed(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        for c in &self.constraints {
            if let Some((v, _)) = c.coeffs.iter().find(|(v, _)| *v >= n) {
                return Err(LpError::UnknownVariable {
                    constraint: c.name.clone(),
                    variable: *v,
                });
            }
        }
        if let Some((v, _)) = self.objective.coeffs.iter().find(|(v, _)| *v >= n) {
            return Err(LpError::UnknownObjectiveVariable(*v));
        }
        Ok(())
    }

    /// Human-readable dump in the usual LP file layout. Coefficients are
    /// printed as exact fractions.
    pub fn to_lp_text(&self) -> String {
        let mut out = String::new();
        let term_list = |coeffs: &[(usize, Rational)]| -> String {
            if coeffs.is_empty() {
                return String::from("0");
            }
            let mut s = String::new();
            for (k, (v, c)) in coeffs.iter().enumerate() {
                let sign = if c.is_negative() {
                    "-"
                } else if k == 0 {
                    ""
                } else {
                    "+"
                };
                if k > 0 {
                    s.push(' ');
                }
                let _ = write!(s, "{sign}{} {}", c.abs(), self.variables[*v]);
            }
            s
        };
        let _ = writeln!(
            out,
            "{}",
            match self.objective.direction {
                Direction::Maximize => "Maximize",
                Direction::Minimize => "Minimize",
            }
        );
        let _ = writeln!(out, " obj: {}", term_list(&self.objective.coeffs));
        let _ = writeln!(out, "Subject To");
        for c in &self.constraints {
            let rel = match c.relation {
                Relation::Le => "<=",
                Relation::Eq => "=",
                Relation::Ge => ">=",
            };
            let _ = writeln!(out, " {}: {} {} {}", c.name, term_list(&c.coeffs), rel, c.rhs);
        }
        let free: Vec<&str> = self
            .variables
            .iter()
            .zip(&self.nonneg)
            .filter(|(_, nn)| !**nn)
            .map(|(v, _)| v.as_str())
            .collect();
        if !free.is_empty() {
            let _ = writeln!(out, "Bounds");
            for v in free {
                let _ = writeln!(out, " {v} free");
            }
        }
        let _ = writeln!(out, "End");
        out
    }
}

fn merge(mut coeffs: Vec<(usize, Rational)>) -> Vec<(usize, Rational)> {
    coeffs.sort_by_key(|(v, _)| *v);
    let mut out: Vec<(usize, Rational)> = Vec::with_capacity(coeffs.len());
    for (v, c) in coeffs {
        match out.last_mut() {
            Some((w, acc)) if *w == v => *acc += c,
            _ => out.push((v, c)),
        }
    }
    out.retain(|(_, c)| !c.is_zero());
    out
}

fn dot(coeffs: &[(usize, Rational)], x: &[Rational]) -> Rational {
    coeffs.iter().map(|(v, c)| c * &x[*v]).sum()
}

/// Dense simplex tableau. Column layout: structural columns (free variables
/// split into a positive and a negative part), then slacks, then
/// artificials.
struct Tableau {
    rows: Vec<Vec<Rational>>,
    rhs: Vec<Rational>,
    basis: Vec<usize>,
    /// Reduced costs of the current phase objective (maximization).
    reduced: Vec<Rational>,
    value: Rational,
    allowed: Vec<bool>,
}

enum Outcome {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn pivot(&mut self, r: usize, q: usize) {
        let inv = self.rows[r][q].recip();
        let nz: Vec<usize> = {
            let row = &mut self.rows[r];
            let mut nz = Vec::new();
            for (j, a) in row.iter_mut().enumerate() {
                if !a.is_zero() {
                    *a *= &inv;
                    nz.push(j);
                }
            }
            nz
        };
        self.rhs[r] *= &inv;
        let pivot_row = self.rows[r].clone();
        let pivot_rhs = self.rhs[r].clone();
        for i in 0..self.rows.len() {
            if i == r || self.rows[i][q].is_zero() {
                continue;
            }
            let f = self.rows[i][q].clone();
            let row = &mut self.rows[i];
            for &j in &nz {
                row[j] -= &f * &pivot_row[j];
            }
            self.rhs[i] -= &f * &pivot_rhs;
        }
        if !self.reduced[q].is_zero() {
            let f = self.reduced[q].clone();
            for &j in &nz {
                self.reduced[j] -= &f * &pivot_row[j];
            }
            self.value += &f * &pivot_rhs;
        }
        self.basis[r] = q;
    }

    /// Maximizes the current objective with Bland's rule.
    fn run(&mut self) -> Outcome {
        loop {
            let entering = (0..self.reduced.len()).find(|&j| self.allowed[j] && self.reduced[j] > Rational::zero());
            let Some(q) = entering else {
                return Outcome::Optimal;
            };
            let mut best: Option<(usize, Rational)> = None;
            for i in 0..self.rows.len() {
                let a = &self.rows[i][q];
                if *a > Rational::zero() {
                    let ratio = &self.rhs[i] / a;
                    let better = match &best {
                        None => true,
                        Some((k, r)) => ratio < *r || (ratio == *r && self.basis[i] < self.basis[*k]),
                    };
                    if better {
                        best = Some((i, ratio));
                    }
                }
            }
            match best {
                None => return Outcome::Unbounded,
                Some((r, _)) => self.pivot(r, q),
            }
        }
    }

    fn set_objective(&mut self, costs: &[Rational]) {
        self.reduced = costs.to_vec();
        self.value = Rational::zero();
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = costs[b].clone();
            if cb.is_zero() {
                continue;
            }
            for (j, a) in self.rows[i].iter().enumerate() {
                if !a.is_zero() {
                    self.reduced[j] -= &cb * a;
                }
            }
            self.value += &cb * &self.rhs[i];
        }
    }
}

/// Solves `lp` exactly. Infeasibility and unboundedness are statuses; the
/// returned point of an optimal solve is re-checked against every
/// constraint before it is handed out.
pub fn solve(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    lp.check_well_formed()?;
    let n = lp.num_vars();

    // Structural columns.
    let mut col_of = Vec::with_capacity(n);
    let mut ncols = 0usize;
    for &nn in &lp.nonneg {
        col_of.push(ncols);
        ncols += if nn { 1 } else { 2 };
    }
    let structural = ncols;
    let m = lp.constraints.len();

    // Rows normalized to a nonnegative right-hand side.
    let mut dense_rows = Vec::with_capacity(m);
    let mut rels = Vec::with_capacity(m);
    let mut rhs = Vec::with_capacity(m);
    for c in &lp.constraints {
        let flip = c.rhs.is_negative();
        let mut row = vec![Rational::zero(); structural];
        for (v, a) in &c.coeffs {
            let a = if flip { -a } else { a.clone() };
            row[col_of[*v]] = a.clone();
            if !lp.nonneg[*v] {
                row[col_of[*v] + 1] = -a;
            }
        }
        let rel = match (c.relation, flip) {
            (Relation::Le, true) => Relation::Ge,
            (Relation::Ge, true) => Relation::Le,
            (r, _) => r,
        };
        dense_rows.push(row);
        rels.push(rel);
        rhs.push(if flip { -c.rhs.clone() } else { c.rhs.clone() });
    }

    let slacks = rels.iter().filter(|r| **r != Relation::Eq).count();
    let artificials = rels.iter().filter(|r| **r != Relation::Le).count();
    let total = structural + slacks + artificials;
    let mut rows = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    let mut next_slack = structural;
    let mut next_art = structural + slacks;
    for (i, mut row) in dense_rows.into_iter().enumerate() {
        row.resize(total, Rational::zero());
        match rels[i] {
            Relation::Le => {
                row[next_slack] = Rational::from_integer(1.into());
                basis.push(next_slack);
                next_slack += 1;
            }
            Relation::Ge => {
                row[next_slack] = Rational::from_integer((-1).into());
                next_slack += 1;
                row[next_art] = Rational::from_integer(1.into());
                basis.push(next_art);
                next_art += 1;
            }
            Relation::Eq => {
                row[next_art] = Rational::from_integer(1.into());
                basis.push(next_art);
                next_art += 1;
            }
        }
        rows.push(row);
    }

    let art_start = structural + slacks;
    let mut tab = Tableau {
        rows,
        rhs,
        basis,
        reduced: Vec::new(),
        value: Rational::zero(),
        allowed: vec![true; total],
    };

    // Phase one: maximize -sum(artificials).
    if artificials > 0 {
        let mut costs = vec![Rational::zero(); total];
        for c in costs.iter_mut().skip(art_start) {
            *c = Rational::from_integer((-1).into());
        }
        tab.set_objective(&costs);
        tab.run();
        if tab.value.is_negative() {
            return Ok(LpSolution::without_point(LpStatus::Infeasible));
        }
        // Drive remaining (zero-valued) artificials out of the basis.
        let mut i = 0;
        while i < tab.rows.len() {
            if tab.basis[i] >= art_start {
                match (0..art_start).find(|&j| !tab.rows[i][j].is_zero()) {
                    Some(q) => {
                        tab.pivot(i, q);
                        i += 1;
                    }
                    None => {
                        tab.rows.swap_remove(i);
                        tab.rhs.swap_remove(i);
                        tab.basis.swap_remove(i);
                    }
                }
            } else {
                i += 1;
            }
        }
        for a in tab.allowed.iter_mut().skip(art_start) {
            *a = false;
        }
    }

    // Phase two.
    let sign = match lp.objective.direction {
        Direction::Maximize => Rational::from_integer(1.into()),
        Direction::Minimize => Rational::from_integer((-1).into()),
    };
    let mut costs = vec![Rational::zero(); total];
    for (v, c) in &lp.objective.coeffs {
        costs[col_of[*v]] = &sign * c;
        if !lp.nonneg[*v] {
            costs[col_of[*v] + 1] = -(&sign * c);
        }
    }
    tab.set_objective(&costs);
    if let Outcome::Unbounded = tab.run() {
        return Ok(LpSolution::without_point(LpStatus::Unbounded));
    }

    let mut col_value = vec![Rational::zero(); total];
    for (i, &b) in tab.basis.iter().enumerate() {
        col_value[b] = tab.rhs[i].clone();
    }
    let x: Vec<Rational> = (0..n)
        .map(|v| {
            let c = col_of[v];
            if lp.nonneg[v] {
                col_value[c].clone()
            } else {
                &col_value[c] - &col_value[c + 1]
            }
        })
        .collect();
    if let Some(name) = lp.first_violation(&x) {
        return Err(LpError::VerificationFailed(name.into()));
    }
    let value = lp.objective_at(&x);
    Ok(LpSolution {
        status: LpStatus::Optimal,
        assignment: Some(x),
        objective_value: Some(value),
    })
}

/// Optimizes `secondary` over the optimal face of `lp`: the primary
/// objective is pinned to its optimum by an equality constraint.
pub fn solve_lexicographic(lp: &LinearProgram, secondary: &Objective) -> Result<LpSolution, LpError> {
    let first = solve(lp)?;
    let Some(best) = first.objective_value.clone() else {
        return Ok(first);
    };
    let mut pinned = lp.clone();
    pinned.add_constraint("primary_optimum", lp.objective.coeffs.clone(), Relation::Eq, best);
    pinned.objective = Objective {
        direction: secondary.direction,
        coeffs: merge(secondary.coeffs.clone()),
    };
    let second = solve(&pinned)?;
    Ok(second)
}

/// Readable variable name helper: `prefix[a,b]`.
pub fn var_name(prefix: &str, parts: &[&str]) -> String {
    format!("{prefix}[{}]", parts.join(","))
}
