use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::{One, Signed, Zero};

use super::AnalysisError;
use crate::graph;
use crate::mdp::{Mdp, MrScheduler};
use crate::rational::Rational;

/// Markov chain induced by a memoryless scheduler, restricted to the states
/// reachable from the initial one. Chain index 0 is the initial state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InducedChain {
    /// Host state of every chain state.
    pub states: Vec<usize>,
    index: BTreeMap<usize, usize>,
    /// Sparse rows over chain indices, sorted, positive entries only.
    pub rows: Vec<Vec<(usize, Rational)>>,
}

impl InducedChain {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn index_of(&self, host: usize) -> Option<usize> {
        self.index.get(&host).copied()
    }

    pub fn contains(&self, host: usize) -> bool {
        self.index.contains_key(&host)
    }

    pub fn probability(&self, from: usize, to: usize) -> Rational {
        self.rows[from]
            .iter()
            .find(|(t, _)| *t == to)
            .map(|(_, p)| p.clone())
            .unwrap_or_else(Rational::zero)
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        self.rows.iter().map(|r| r.iter().map(|(t, _)| *t).collect()).collect()
    }

    /// Host-indexed mask turned into a chain-indexed one.
    pub fn mask(&self, pred: impl Fn(usize) -> bool) -> Vec<bool> {
        self.states.iter().map(|&h| pred(h)).collect()
    }
}

/// `P(s, s') = sum_a sched(s)(a) * P(s, a, s')` over the states reachable from
/// `init`. Fails if a reachable state has no decision.
pub fn induce_chain(host: &Mdp, sched: &MrScheduler, init: usize) -> Result<InducedChain, AnalysisError> {
    let mut states = vec![init];
    let mut index = BTreeMap::new();
    index.insert(init, 0usize);
    let mut rows = Vec::new();
    let mut k = 0;
    while k < states.len() {
        let s = states[k];
        let dist = sched.get(s).ok_or(AnalysisError::OutsideDomain(s))?;
        let mut acc: BTreeMap<usize, Rational> = BTreeMap::new();
        for (a, pa) in dist {
            let choice = host
                .choices(s)
                .get(*a)
                .ok_or(AnalysisError::NoSuchChoice { state: s, choice: *a })?;
            for (t, p) in &choice.successors {
                *acc.entry(*t).or_insert_with(Rational::zero) += pa * p;
            }
        }
        let mut row = Vec::with_capacity(acc.len());
        for (t, p) in acc {
            if p.is_zero() {
                continue;
            }
            let j = *index.entry(t).or_insert_with(|| {
                states.push(t);
                states.len() - 1
            });
            row.push((j, p));
        }
        row.sort_by_key(|(j, _)| *j);
        rows.push(row);
        k += 1;
    }
    Ok(InducedChain { states, index, rows })
}

/// Solves `a x = b` exactly. Pivots on the entry with the largest absolute
/// numerator. Returns `None` for singular systems.
pub fn solve_linear_system(mut a: Vec<Vec<Rational>>, mut b: Vec<Rational>) -> Option<Vec<Rational>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).filter(|&r| !a[r][col].is_zero()).max_by(|&r1, &r2| {
            a[r1][col]
                .numer()
                .abs()
                .cmp(&a[r2][col].numer().abs())
                .then(r2.cmp(&r1))
        })?;
        a.swap(col, pivot);
        b.swap(col, pivot);
        let inv = a[col][col].recip();
        let pivot_row: Vec<(usize, Rational)> = a[col]
            .iter()
            .enumerate()
            .skip(col)
            .filter(|(_, v)| !v.is_zero())
            .map(|(j, v)| (j, v * &inv))
            .collect();
        let pivot_b = &b[col] * &inv;
        for &(j, ref v) in &pivot_row {
            a[col][j] = v.clone();
        }
        b[col] = pivot_b.clone();
        for r in 0..n {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let f = a[r][col].clone();
            for (j, v) in &pivot_row {
                a[r][*j] -= &f * v;
            }
            b[r] -= &f * &pivot_b;
        }
    }
    Some(b)
}

/// `Pr_s(stay U target)` for every chain state `s`. States with probability
/// zero are found by graph analysis first; the remaining system has a
/// unique solution.
pub fn until_probability(chain: &InducedChain, stay: &[bool], target: &[bool]) -> Vec<Rational> {
    let n = chain.len();
    let adj = chain.adjacency();
    let through: Vec<bool> = (0..n).map(|s| stay[s] || target[s]).collect();
    // Backward search from the targets, only through stay-states.
    let mut rev = vec![Vec::new(); n];
    for s in 0..n {
        if stay[s] && !target[s] {
            for &t in &adj[s] {
                rev[t].push(s);
            }
        }
    }
    let sources: Vec<usize> = (0..n).filter(|&s| target[s]).collect();
    let positive = graph::reachable(&rev, &through, &sources);

    let unknown: Vec<usize> = (0..n).filter(|&s| positive[s] && !target[s]).collect();
    let mut pos = vec![usize::MAX; n];
    for (k, &s) in unknown.iter().enumerate() {
        pos[s] = k;
    }
    let m = unknown.len();
    let mut a = vec![vec![Rational::zero(); m]; m];
    let mut b = vec![Rational::zero(); m];
    for (k, &s) in unknown.iter().enumerate() {
        a[k][k] += Rational::one();
        for (t, p) in &chain.rows[s] {
            if target[*t] {
                b[k] += p;
            } else if pos[*t] != usize::MAX {
                a[k][pos[*t]] -= p;
            }
        }
    }
    let x = solve_linear_system(a, b).expect("until system is nonsingular after zero-probability elimination");
    (0..n)
        .map(|s| {
            if target[s] {
                Rational::one()
            } else if pos[s] != usize::MAX {
                x[pos[s]].clone()
            } else {
                Rational::zero()
            }
        })
        .collect()
}

/// `Pr_s(eventually target) = 1`, decided on the graph: fails exactly when
/// `s` can reach, avoiding `target`, a state from which `target` is
/// unreachable.
pub fn almost_sure_reach(chain: &InducedChain, target: &[bool]) -> Vec<bool> {
    let n = chain.len();
    let adj = chain.adjacency();
    let all = vec![true; n];
    let hits = graph::can_reach(&adj, &all, target);
    let doomed: Vec<bool> = hits.iter().map(|h| !h).collect();
    let avoiding: Vec<bool> = (0..n).map(|s| !target[s]).collect();
    let can_get_doomed = graph::can_reach(&adj, &avoiding, &doomed);
    (0..n).map(|s| target[s] || !can_get_doomed[s]).collect()
}

/// Bottom strongly connected components, sorted by smallest chain index.
pub fn bsccs(chain: &InducedChain) -> Vec<Vec<usize>> {
    let mut b = graph::bottom_sccs(&chain.adjacency(), &vec![true; chain.len()]);
    b.sort();
    b
}

/// Stationary distribution of a BSCC.
pub fn stationary(chain: &InducedChain, component: &[usize]) -> Vec<Rational> {
    let m = component.len();
    let mut pos = BTreeMap::new();
    for (k, &s) in component.iter().enumerate() {
        pos.insert(s, k);
    }
    // pi (P - I) = 0 with the last balance equation replaced by sum(pi) = 1.
    let mut a = vec![vec![Rational::zero(); m]; m];
    for (k, &s) in component.iter().enumerate() {
        for (t, p) in &chain.rows[s] {
            if let Some(&j) = pos.get(t) {
                a[j][k] += p;
            }
        }
        a[k][k] -= Rational::one();
    }
    let mut b = vec![Rational::zero(); m];
    a[m - 1] = vec![Rational::one(); m];
    b[m - 1] = Rational::one();
    solve_linear_system(a, b).expect("irreducible chain has a unique stationary distribution")
}

/// Expected long-run average of `value` (host-indexed) from chain state
/// `from`: the sum over BSCCs of reach probability times stationary mean.
pub fn long_run_average_from(chain: &InducedChain, value: &[Rational], from: usize) -> Rational {
    let n = chain.len();
    let mut total = Rational::zero();
    for comp in bsccs(chain) {
        let mut target = vec![false; n];
        for &s in &comp {
            target[s] = true;
        }
        let reach = until_probability(chain, &vec![true; n], &target);
        if reach[from].is_zero() {
            continue;
        }
        let pi = stationary(chain, &comp);
        let mean: Rational = comp.iter().zip(&pi).map(|(&s, p)| p * &value[chain.states[s]]).sum();
        total += &reach[from] * mean;
    }
    total
}

/// Expected long-run average payoff from the chain's initial state.
pub fn availability(chain: &InducedChain, payoff: &[Rational]) -> Rational {
    long_run_average_from(chain, payoff, 0)
}

/// Long-run averages of several weight vectors (host-indexed), keyed like
/// the input.
pub fn mp_values<K: Ord + Clone>(chain: &InducedChain, weights: &BTreeMap<K, Vec<Rational>>) -> BTreeMap<K, Rational> {
    weights
        .iter()
        .map(|(k, w)| (k.clone(), long_run_average_from(chain, w, 0)))
        .collect()
}

/// Expected reward accumulated before absorption in `goal` (host index),
/// from every chain state. `None` if the goal is not reached almost surely
/// from the initial state.
pub fn expected_total_reward(chain: &InducedChain, reward: &[Rational], goal: usize) -> Option<Vec<Rational>> {
    let n = chain.len();
    let goal_mask = chain.mask(|h| h == goal);
    let sure = almost_sure_reach(chain, &goal_mask);
    if !sure[0] {
        return None;
    }
    // Every state reachable from the initial state reaches the goal surely.
    let unknown: Vec<usize> = (0..n).filter(|&s| !goal_mask[s]).collect();
    let mut pos = vec![usize::MAX; n];
    for (k, &s) in unknown.iter().enumerate() {
        pos[s] = k;
    }
    let m = unknown.len();
    let mut a = vec![vec![Rational::zero(); m]; m];
    let mut b = vec![Rational::zero(); m];
    for (k, &s) in unknown.iter().enumerate() {
        a[k][k] += Rational::one();
        b[k] = reward[chain.states[s]].clone();
        for (t, p) in &chain.rows[s] {
            if pos[*t] != usize::MAX {
                a[k][pos[*t]] -= p;
            }
        }
    }
    let x = solve_linear_system(a, b)?;
    Some(
        (0..n)
            .map(|s| {
                if pos[s] == usize::MAX {
                    Rational::zero()
                } else {
                    x[pos[s]].clone()
                }
            })
            .collect(),
    )
}

/// Rows of a chain sum to exactly one.
pub fn is_stochastic(chain: &InducedChain) -> bool {
    chain
        .rows
        .iter()
        .all(|r| r.iter().map(|(_, p)| p.clone()).sum::<Rational>().is_one() && r.iter().all(|(_, p)| p.is_positive()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::Choice;
    use crate::rational::{int, rat};

    fn chain_of(rows: Vec<Vec<(usize, Rational)>>) -> InducedChain {
        let mdp = Mdp {
            choices: rows.into_iter().map(|r| vec![Choice::new("a", r)]).collect(),
        };
        induce_chain(&mdp, &MrScheduler::first_choice(&mdp), 0).unwrap()
    }

    #[test]
    fn gauss_small() {
        let a = vec![vec![int(2), int(1)], vec![int(1), int(3)]];
        let x = solve_linear_system(a, vec![int(3), int(5)]).unwrap();
        assert_eq!(x, vec![rat(4, 5), rat(7, 5)]);
        let singular = vec![vec![int(1), int(1)], vec![int(2), int(2)]];
        assert!(solve_linear_system(singular, vec![int(1), int(2)]).is_none());
    }

    #[test]
    fn gamblers_ruin_until() {
        // 0 <-> 1 <-> 2 with absorbing ends 3 (win) and 4 (lose).
        let h = rat(1, 2);
        let c = chain_of(vec![
            vec![(1, h.clone()), (4, h.clone())],
            vec![(0, h.clone()), (2, h.clone())],
            vec![(1, h.clone()), (3, h.clone())],
            vec![(3, int(1))],
            vec![(4, int(1))],
        ]);
        let stay = c.mask(|s| s < 3);
        let target = c.mask(|s| s == 3);
        let p = until_probability(&c, &stay, &target);
        assert_eq!(p[c.index_of(0).unwrap()], rat(1, 4));
        assert_eq!(p[c.index_of(1).unwrap()], rat(1, 2));
        assert_eq!(p[c.index_of(3).unwrap()], int(1));
        assert_eq!(p[c.index_of(4).unwrap()], int(0));
        let sure = almost_sure_reach(&c, &c.mask(|s| s >= 3));
        assert!(sure.iter().all(|&b| b));
        assert!(!almost_sure_reach(&c, &target)[0]);
    }

    #[test]
    fn stationary_mean() {
        // two-state flip-flop with a bias; payoff 1 in state 1
        let c = chain_of(vec![
            vec![(0, rat(1, 2)), (1, rat(1, 2))],
            vec![(0, rat(1, 3)), (1, rat(2, 3))],
        ]);
        assert!(is_stochastic(&c));
        let pi = stationary(&c, &[0, 1]);
        assert_eq!(pi, vec![rat(2, 5), rat(3, 5)]);
        assert_eq!(availability(&c, &[int(0), int(1)]), rat(3, 5));
    }

    #[test]
    fn availability_mixes_bsccs() {
        let c = chain_of(vec![
            vec![(1, rat(1, 3)), (2, rat(2, 3))],
            vec![(1, int(1))],
            vec![(2, int(1))],
        ]);
        assert_eq!(availability(&c, &[int(7), int(3), int(0)]), int(1));
        let mut w = BTreeMap::new();
        w.insert("neg", vec![int(0), int(-1), int(0)]);
        assert_eq!(mp_values(&c, &w)["neg"], rat(-1, 3));
    }

    #[test]
    fn total_reward_to_goal() {
        // 0 -> {1: 1/2, 2: 1/2}, 1 -> 2, 2 goal absorbing
        let c = chain_of(vec![
            vec![(1, rat(1, 2)), (2, rat(1, 2))],
            vec![(2, int(1))],
            vec![(2, int(1))],
        ]);
        let v = expected_total_reward(&c, &[int(1), int(4), int(0)], 2).unwrap();
        assert_eq!(v[0], int(3));
        let stuck = chain_of(vec![vec![(0, int(1))], vec![(1, int(1))]]);
        assert!(expected_total_reward(&stuck, &[int(0), int(0)], 1).is_none());
    }
}
