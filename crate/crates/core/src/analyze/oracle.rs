//! Reference optimum by exhaustive search over memoryless schedulers on the
//! transformed model. Only meant for tiny models.

use alloc::vec;
use alloc::vec::Vec;

use super::verify::quick_check;
use super::AnalysisError;
use crate::mdp::MrScheduler;
use crate::rational::Rational;
use crate::transform::TransformedMdp;

/// Upper limit on evaluated candidates.
pub const MAX_CANDIDATES: usize = 400_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleResult {
    pub best: Option<Rational>,
    pub witness: Option<MrScheduler>,
    pub candidates: usize,
    pub resilient: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("more than {0} candidate schedulers")]
    TooLarge(usize),
    #[error("grid denominator must be positive")]
    ZeroGrid,
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

/// All distributions over `k` choices with probabilities in `{0, 1/g, ..., 1}`.
/// With `g = 1` these are exactly the deterministic choices.
pub fn grid_distributions(k: usize, g: u32) -> Vec<Vec<(usize, Rational)>> {
    let mut out = Vec::new();
    let mut parts = vec![0u32; k];
    fn rec(i: usize, left: u32, g: u32, parts: &mut Vec<u32>, out: &mut Vec<Vec<(usize, Rational)>>) {
        if i + 1 == parts.len() {
            parts[i] = left;
            out.push(
                parts
                    .iter()
                    .enumerate()
                    .filter(|(_, &p)| p > 0)
                    .map(|(a, &p)| (a, Rational::new(p.into(), g.into())))
                    .collect(),
            );
            return;
        }
        for p in (0..=left).rev() {
            parts[i] = p;
            rec(i + 1, left - p, g, parts, out);
        }
    }
    if k > 0 {
        rec(0, g, g, &mut parts, &mut out);
    }
    out
}

/// Best availability over resilient memoryless schedulers whose
/// probabilities lie on the grid with denominator `grid`. Only the states
/// reachable under a partial assignment are branched on.
pub fn brute_force_optimum(mt: &TransformedMdp, threshold: &Rational, grid: u32) -> Result<OracleResult, OracleError> {
    if grid == 0 {
        return Err(OracleError::ZeroGrid);
    }
    let host = mt.mdp();
    let options: Vec<Vec<Vec<(usize, Rational)>>> = (0..mt.len())
        .map(|s| grid_distributions(host.choices(s).len(), grid))
        .collect();
    let mut search = Search {
        mt,
        threshold,
        options: &options,
        sched: MrScheduler::empty(mt.len()),
        result: OracleResult {
            best: None,
            witness: None,
            candidates: 0,
            resilient: 0,
        },
    };
    search.explore()?;
    Ok(search.result)
}

struct Search<'a> {
    mt: &'a TransformedMdp,
    threshold: &'a Rational,
    options: &'a [Vec<Vec<(usize, Rational)>>],
    sched: MrScheduler,
    result: OracleResult,
}

impl Search<'_> {
    fn next_open(&self) -> Option<usize> {
        let host = self.mt.mdp();
        let mut seen = vec![false; host.len()];
        let mut stack = vec![self.mt.initial()];
        seen[self.mt.initial()] = true;
        let mut open = None::<usize>;
        while let Some(s) = stack.pop() {
            let Some(d) = self.sched.get(s) else {
                open = Some(open.map_or(s, |o| o.min(s)));
                continue;
            };
            for (a, _) in d {
                for t in host.choices(s)[*a].targets() {
                    if !seen[t] {
                        seen[t] = true;
                        stack.push(t);
                    }
                }
            }
        }
        open
    }

    fn explore(&mut self) -> Result<(), OracleError> {
        let Some(s) = self.next_open() else {
            return self.evaluate();
        };
        for k in 0..self.options[s].len() {
            self.sched.decisions[s] = Some(self.options[s][k].clone());
            self.explore()?;
        }
        self.sched.decisions[s] = None;
        Ok(())
    }

    fn evaluate(&mut self) -> Result<(), OracleError> {
        self.result.candidates += 1;
        if self.result.candidates > MAX_CANDIDATES {
            return Err(OracleError::TooLarge(MAX_CANDIDATES));
        }
        let Some(value) = quick_check(self.mt, &self.sched, self.threshold)? else {
            return Ok(());
        };
        self.result.resilient += 1;
        if self.result.best.as_ref().is_none_or(|b| value > *b) {
            self.result.best = Some(value);
            self.result.witness = Some(self.sched.clone());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::plant_model;
    use crate::rational::{int, rat};

    #[test]
    fn grid_counts() {
        assert_eq!(grid_distributions(2, 1).len(), 2);
        assert_eq!(grid_distributions(2, 5).len(), 6);
        assert_eq!(grid_distributions(3, 2).len(), 6);
        assert_eq!(grid_distributions(1, 7), vec![vec![(0, int(1))]]);
    }

    #[test]
    fn plant_deterministic() {
        let mt = TransformedMdp::new(&plant_model(), 2);
        assert_eq!(brute_force_optimum(&mt, &int(1), 1).unwrap().best, Some(rat(1, 2)));
        assert_eq!(brute_force_optimum(&mt, &rat(3, 4), 1).unwrap().best, Some(int(1)));
        // the randomized optimum is not deterministic
        assert_eq!(brute_force_optimum(&mt, &rat(4, 5), 1).unwrap().best, Some(rat(1, 2)));
    }

    #[test]
    fn plant_grid() {
        let mt = TransformedMdp::new(&plant_model(), 2);
        assert_eq!(brute_force_optimum(&mt, &rat(4, 5), 5).unwrap().best, Some(rat(9, 10)));
    }

    #[test]
    fn infeasible_without_budget() {
        let mt = TransformedMdp::new(&plant_model(), 0);
        let r = brute_force_optimum(&mt, &rat(1, 2), 1).unwrap();
        assert_eq!(r.best, None);
        assert!(r.candidates > 0);
    }
}
